//! Building blocks for the hand-rolled networks: dense layers, a single-layer
//! LSTM, and the ADAM optimizer.
//!
//! All math is 64-bit. Forward passes come in two flavors: a taping variant
//! that records the activations backpropagation needs, returning a tape that
//! the matching `backward` consumes by value (so a tape can never be replayed
//! against updated weights), and a tape-free variant for inference. Gradients
//! are plain arrays mirroring the parameter shapes; the optimizer treats every
//! parameter tensor as a flat slice.

mod adam;
mod dense;
mod lstm;

pub use adam::AdamState;
pub use dense::{DenseGrads, DenseLayer, DenseTape};
pub use lstm::{LstmCell, LstmGrads, LstmTape};

use ndarray::Array2;
use rand::Rng;

/// Elementwise nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
    Tanh,
    /// Sigmoid scaled to `(0, cap)`, matching the range of clipped features.
    ScaledSigmoid(f64),
}

impl Activation {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Activation::Linear => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::ScaledSigmoid(cap) => cap * sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's own output.
    pub fn derivative_from_output(&self, y: f64) -> f64 {
        match *self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::ScaledSigmoid(cap) => y * (1.0 - y / cap),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Uniform Glorot initialization on `±sqrt(6 / (fan_in + fan_out))` with the
/// fans given explicitly, since LSTM gates count both the input and the
/// recurrent connections as fan-in.
pub(crate) fn glorot_uniform<R: Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    fan_in: usize,
    fan_out: usize,
) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn activation_values_match_scalar_formulas() {
        assert_eq!(Activation::Linear.apply(-2.5), -2.5);
        assert_eq!(Activation::Relu.apply(-2.5), 0.0);
        assert_eq!(Activation::Relu.apply(1.25), 1.25);
        assert!((Activation::Sigmoid.apply(0.0) - 0.5).abs() < 1e-15);
        assert!((Activation::Tanh.apply(0.5) - 0.5f64.tanh()).abs() < 1e-15);
        let scaled = Activation::ScaledSigmoid(10.0);
        assert!((scaled.apply(0.0) - 5.0).abs() < 1e-12);
        assert!(scaled.apply(5.0) < 10.0);
        assert!(scaled.apply(-5.0) > 0.0);
        assert!(scaled.apply(50.0) <= 10.0);
        assert!(scaled.apply(-50.0) >= 0.0);
    }

    #[test]
    fn output_derivatives_match_finite_differences() {
        let h = 1e-6;
        for activation in [
            Activation::Linear,
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Tanh,
            Activation::ScaledSigmoid(10.0),
        ] {
            for x in [-1.3, -0.2, 0.4, 2.1] {
                let y = activation.apply(x);
                let numeric = (activation.apply(x + h) - activation.apply(x - h)) / (2.0 * h);
                let analytic = activation.derivative_from_output(y);
                assert!(
                    (numeric - analytic).abs() < 1e-6,
                    "{activation:?} at {x}: {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn glorot_bounds_follow_the_fans() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let w = glorot_uniform(&mut rng, 8, 4, 12, 8);
        let bound = (6.0f64 / 20.0).sqrt();
        assert!(w.iter().all(|&v| v > -bound && v < bound));
        assert!(w.iter().any(|&v| v.abs() > bound * 0.1));
    }
}
