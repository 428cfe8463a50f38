//! ADAM optimizer over flat parameter slices.

use crate::{Error, Result};

/// ADAM state: first and second moment accumulators per parameter tensor plus
/// the shared step counter.
///
/// Tensors are addressed positionally, so every call to [`AdamState::step`]
/// must pass the same tensors in the same order. Moments are allocated lazily
/// on the first step. Updates use bias-corrected moments:
///
/// ```text
/// m <- b1 m + (1 - b1) g        m_hat = m / (1 - b1^t)
/// v <- b2 v + (1 - b2) g^2      v_hat = v / (1 - b2^t)
/// p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// ```
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Number of steps taken so far.
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        AdamState {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Applies one update to every parameter tensor in place.
    ///
    /// # Errors
    ///
    /// * [`Error::LengthMismatch`] if the tensor count or a tensor length does
    ///   not match previous steps.
    /// * [`Error::NonFiniteGradient`] if any gradient entry is NaN or
    ///   infinite; parameters are left untouched in that case.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::LengthMismatch {
                context: "adam gradient tensor count".to_string(),
                expected: params.len(),
                found: grads.len(),
            });
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::LengthMismatch {
                context: "adam parameter tensor count".to_string(),
                expected: self.m.len(),
                found: params.len(),
            });
        }
        for (idx, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.m[idx].len() {
                return Err(Error::LengthMismatch {
                    context: format!("adam tensor {idx}"),
                    expected: self.m[idx].len(),
                    found: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    tensor: idx,
                    iteration: self.t + 1,
                });
            }
        }

        self.t += 1;
        let bc1 = 1.0 - self.beta1.powf(self.t as f64);
        let bc2 = 1.0 - self.beta2.powf(self.t as f64);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for k in 0..p.len() {
                let gk = g[k];
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_almost_the_learning_rate() {
        let mut adam = AdamState::new(1e-4, 0.9, 0.999, 1e-8);
        let mut p = vec![1.0];
        adam.step(&mut [&mut p], &[&[1.0]]).unwrap();
        assert!((p[0] - 0.999900000001).abs() < 1e-15);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn two_steps_match_the_unrolled_recurrence() {
        let mut adam = AdamState::new(1e-4, 0.9, 0.999, 1e-8);
        let mut p = vec![1.0];
        adam.step(&mut [&mut p], &[&[1.0]]).unwrap();
        adam.step(&mut [&mut p], &[&[0.5]]).unwrap();
        assert!((p[0] - 0.9998067820382982).abs() < 1e-15, "{}", p[0]);
    }

    #[test]
    fn descends_on_a_quadratic() {
        let mut adam = AdamState::new(0.05, 0.9, 0.999, 1e-8);
        let mut p = vec![3.0, -2.0];
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            adam.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert!(p.iter().all(|x| x.abs() < 0.05), "{p:?}");
    }

    #[test]
    fn tensor_count_and_length_mismatches_are_errors() {
        let mut adam = AdamState::new(1e-3, 0.9, 0.999, 1e-8);
        let mut a = vec![0.0; 2];
        let mut b = vec![0.0; 3];
        adam.step(&mut [&mut a, &mut b], &[&[1.0, 1.0], &[1.0, 1.0, 1.0]]).unwrap();

        let mut a2 = vec![0.0; 2];
        assert!(matches!(
            adam.step(&mut [&mut a2], &[&[1.0, 1.0]]),
            Err(Error::LengthMismatch { .. })
        ));

        let mut adam2 = AdamState::new(1e-3, 0.9, 0.999, 1e-8);
        let mut c = vec![0.0; 2];
        assert!(matches!(
            adam2.step(&mut [&mut c], &[&[1.0]]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_gradient_is_rejected_before_any_update() {
        let mut adam = AdamState::new(1e-3, 0.9, 0.999, 1e-8);
        let mut a = vec![1.0, 2.0];
        let mut b = vec![3.0];
        let err = adam
            .step(&mut [&mut a, &mut b], &[&[0.1, 0.2], &[f64::NAN]])
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { tensor: 1, iteration: 1 }));
        assert_eq!(a, vec![1.0, 2.0]);
        assert_eq!(b, vec![3.0]);
        assert_eq!(adam.t, 0);
    }
}
