//! Fully connected layer with explicit forward tapes and backpropagation.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::{Error, Result};

use super::{glorot_uniform, Activation};

/// Affine map plus activation: `y = act(W x + b)`.
///
/// Weights are stored output-major (`out_dim x in_dim`), biases start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

/// Activations recorded by [`DenseLayer::forward_batch`]; consumed by
/// [`DenseLayer::backward`].
#[derive(Debug)]
pub struct DenseTape {
    input: Array2<f64>,
    output: Array2<f64>,
}

/// Gradients of a dense layer's parameters, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub d_weights: Array2<f64>,
    pub d_biases: Array1<f64>,
}

impl DenseLayer {
    /// Creates a layer with Glorot-uniform weights and zero biases.
    pub fn new<R: Rng>(out_dim: usize, in_dim: usize, activation: Activation, rng: &mut R) -> Self {
        DenseLayer {
            weights: glorot_uniform(rng, out_dim, in_dim, in_dim, out_dim),
            biases: Array1::zeros(out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Maps a single input vector through the layer.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.in_dim() {
            return Err(Error::LengthMismatch {
                context: "dense layer input".to_string(),
                expected: self.in_dim(),
                found: input.len(),
            });
        }
        let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row shape");
        let (y, _) = self.forward_batch(&x);
        Ok(y.row(0).to_vec())
    }

    /// Maps a batch (rows are samples) and records the tape for backward.
    pub fn forward_batch(&self, input: &Array2<f64>) -> (Array2<f64>, DenseTape) {
        let output = self.infer_batch(input);
        let tape = DenseTape {
            input: input.clone(),
            output: output.clone(),
        };
        (output, tape)
    }

    /// Maps a batch without recording anything.
    pub fn infer_batch(&self, input: &Array2<f64>) -> Array2<f64> {
        debug_assert_eq!(input.ncols(), self.in_dim());
        let mut pre = input.dot(&self.weights.t());
        pre += &self.biases;
        pre.mapv_inplace(|v| self.activation.apply(v));
        pre
    }

    /// Backpropagates `d_output` (gradient of the loss in the layer's output)
    /// through the tape, returning parameter gradients and the gradient in the
    /// layer's input.
    pub fn backward(&self, tape: DenseTape, d_output: &Array2<f64>) -> (DenseGrads, Array2<f64>) {
        debug_assert_eq!(d_output.dim(), tape.output.dim());
        let mut d_pre = d_output.clone();
        d_pre.zip_mut_with(&tape.output, |d, &y| {
            *d *= self.activation.derivative_from_output(y);
        });

        let raw = d_pre.t().dot(&tape.input);
        let d_weights = if raw.is_standard_layout() {
            raw
        } else {
            raw.as_standard_layout().into_owned()
        };
        let d_biases = d_pre.sum_axis(Axis(0));
        let d_input = d_pre.dot(&self.weights);
        (
            DenseGrads {
                d_weights,
                d_biases,
            },
            d_input,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_layer_with_sigmoid_outputs_one_half() {
        let layer = DenseLayer {
            weights: Array2::zeros((3, 4)),
            biases: Array1::zeros(3),
            activation: Activation::Sigmoid,
        };
        let y = layer.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(y, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn forward_matches_hand_computed_affine_map() {
        let layer = DenseLayer {
            weights: array![[1.0, 2.0], [3.0, 4.0]],
            biases: array![0.5, -0.5],
            activation: Activation::Linear,
        };
        let y = layer.forward(&[1.0, -1.0]).unwrap();
        assert_eq!(y, vec![-0.5, -1.5]);

        let relu = DenseLayer {
            activation: Activation::Relu,
            ..layer
        };
        assert_eq!(relu.forward(&[1.0, -1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(relu.forward(&[1.0, 1.0]).unwrap(), vec![3.5, 6.5]);
    }

    #[test]
    fn wrong_input_length_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = DenseLayer::new(2, 3, Activation::Relu, &mut rng);
        assert!(matches!(
            layer.forward(&[1.0, 2.0]),
            Err(Error::LengthMismatch { expected: 3, found: 2, .. })
        ));
    }

    /// Central-difference check of every weight, bias, and input gradient.
    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for activation in [Activation::Sigmoid, Activation::Tanh, Activation::ScaledSigmoid(10.0)] {
            let mut layer = DenseLayer::new(2, 3, activation, &mut rng);
            layer.biases = array![0.1, -0.2];
            let x = array![[0.3, -0.7, 1.1], [0.9, 0.2, -0.4]];

            let loss = |layer: &DenseLayer, x: &Array2<f64>| layer.infer_batch(x).sum();

            let (y, tape) = layer.forward_batch(&x);
            let d_output = Array2::ones(y.dim());
            let (grads, d_input) = layer.backward(tape, &d_output);

            let h = 1e-6;
            for i in 0..layer.out_dim() {
                for j in 0..layer.in_dim() {
                    let mut plus = layer.clone();
                    plus.weights[[i, j]] += h;
                    let mut minus = layer.clone();
                    minus.weights[[i, j]] -= h;
                    let numeric = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
                    let analytic = grads.d_weights[[i, j]];
                    assert!(
                        (numeric - analytic).abs() < 1e-7 + 1e-6 * numeric.abs(),
                        "dW[{i},{j}] {analytic} vs {numeric}"
                    );
                }
                let mut plus = layer.clone();
                plus.biases[i] += h;
                let mut minus = layer.clone();
                minus.biases[i] -= h;
                let numeric = (loss(&plus, &x) - loss(&minus, &x)) / (2.0 * h);
                assert!((numeric - grads.d_biases[i]).abs() < 1e-7 + 1e-6 * numeric.abs());
            }
            for r in 0..x.nrows() {
                for c in 0..x.ncols() {
                    let mut plus = x.clone();
                    plus[[r, c]] += h;
                    let mut minus = x.clone();
                    minus[[r, c]] -= h;
                    let numeric = (loss(&layer, &plus) - loss(&layer, &minus)) / (2.0 * h);
                    assert!((numeric - d_input[[r, c]]).abs() < 1e-7 + 1e-6 * numeric.abs());
                }
            }
        }
    }

    #[test]
    fn seeded_construction_is_deterministic() {
        let a = DenseLayer::new(4, 6, Activation::Relu, &mut ChaCha8Rng::seed_from_u64(9));
        let b = DenseLayer::new(4, 6, Activation::Relu, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
