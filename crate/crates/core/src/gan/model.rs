//! Discriminator and generator architectures.

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::neural::{
    Activation, DenseGrads, DenseLayer, DenseTape, LstmCell, LstmGrads, LstmTape,
};
use crate::spectral::FeatureVector;
use crate::{Error, Result};

/// Shape parameters shared by both models.
///
/// Each channel's `W / 2` spectral lines are fed to that channel's LSTM
/// branch as a sequence of `seq_steps` chunks of `step_size` ascending lines.
/// `seq_steps` is the largest divisor of `W / 2` not exceeding
/// `target_seq_steps`, so the chunking is exact for any even window length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub window_length: usize,
    pub channel_count: usize,
    pub hidden_size: usize,
    pub merge_width: usize,
    pub latent_dim: usize,
    pub seq_steps: usize,
    pub step_size: usize,
}

impl ModelDims {
    pub fn new(
        window_length: usize,
        channel_count: usize,
        hidden_size: usize,
        merge_width: usize,
        latent_dim: usize,
        target_seq_steps: usize,
    ) -> Result<Self> {
        if window_length == 0 || !window_length.is_multiple_of(2) {
            return Err(Error::InvalidWindowLength(window_length));
        }
        for (name, value) in [
            ("channel_count", channel_count),
            ("hidden_size", hidden_size),
            ("merge_width", merge_width),
            ("latent_dim", latent_dim),
            ("target_seq_steps", target_seq_steps),
        ] {
            if value == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        let lines = window_length / 2;
        let seq_steps = (1..=target_seq_steps.min(lines))
            .rev()
            .find(|steps| lines.is_multiple_of(*steps))
            .expect("1 divides everything");
        Ok(ModelDims {
            window_length,
            channel_count,
            hidden_size,
            merge_width,
            latent_dim,
            seq_steps,
            step_size: lines / seq_steps,
        })
    }

    pub fn lines_per_channel(&self) -> usize {
        self.window_length / 2
    }

    /// Length of the flat feature vector both models operate on.
    pub fn feature_len(&self) -> usize {
        self.channel_count * self.lines_per_channel()
    }
}

/// Discriminator: one LSTM branch per channel over that channel's spectral
/// lines, branch states concatenated into a relu dense layer, then a single
/// sigmoid unit estimating the probability that the input is a real healthy
/// feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub dims: ModelDims,
    /// Channel ids the model was trained on, in feature block order.
    pub channel_ids: Vec<usize>,
    pub branches: Vec<LstmCell>,
    pub merge_hidden: DenseLayer,
    pub output: DenseLayer,
}

/// Activations recorded by [`Discriminator::forward_batch`].
#[derive(Debug)]
pub struct DiscriminatorTape {
    branch_tapes: Vec<LstmTape>,
    merge_tape: DenseTape,
    output_tape: DenseTape,
}

/// Gradients for every discriminator parameter tensor.
#[derive(Debug)]
pub struct DiscriminatorGrads {
    pub branches: Vec<LstmGrads>,
    pub merge_hidden: DenseGrads,
    pub output: DenseGrads,
}

impl DiscriminatorGrads {
    /// Accumulates another gradient set, tensor by tensor.
    pub fn add(&mut self, other: &DiscriminatorGrads) {
        for (a, b) in self.branches.iter_mut().zip(&other.branches) {
            a.d_w_x += &b.d_w_x;
            a.d_w_h += &b.d_w_h;
            a.d_bias += &b.d_bias;
        }
        self.merge_hidden.d_weights += &other.merge_hidden.d_weights;
        self.merge_hidden.d_biases += &other.merge_hidden.d_biases;
        self.output.d_weights += &other.output.d_weights;
        self.output.d_biases += &other.output.d_biases;
    }

    /// Flat gradient slices in the discriminator's parameter order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for g in &self.branches {
            out.push(g.d_w_x.as_slice().expect("contiguous"));
            out.push(g.d_w_h.as_slice().expect("contiguous"));
            out.push(g.d_bias.as_slice().expect("contiguous"));
        }
        out.push(self.merge_hidden.d_weights.as_slice().expect("contiguous"));
        out.push(self.merge_hidden.d_biases.as_slice().expect("contiguous"));
        out.push(self.output.d_weights.as_slice().expect("contiguous"));
        out.push(self.output.d_biases.as_slice().expect("contiguous"));
        out
    }
}

impl Discriminator {
    /// Builds a randomly initialized discriminator for the given shape; one
    /// channel id per branch.
    pub fn new<R: Rng>(dims: ModelDims, channel_ids: Vec<usize>, rng: &mut R) -> Result<Self> {
        if channel_ids.len() != dims.channel_count {
            return Err(Error::ChannelMismatch {
                context: "discriminator channel ids".to_string(),
                expected: dims.channel_count,
                found: channel_ids.len(),
            });
        }
        let branches = (0..dims.channel_count)
            .map(|_| LstmCell::new(dims.step_size, dims.hidden_size, rng))
            .collect();
        let merge_hidden = DenseLayer::new(
            dims.merge_width,
            dims.channel_count * dims.hidden_size,
            Activation::Relu,
            rng,
        );
        let output = DenseLayer::new(1, dims.merge_width, Activation::Sigmoid, rng);
        Ok(Discriminator {
            dims,
            channel_ids,
            branches,
            merge_hidden,
            output,
        })
    }

    /// Cuts one branch's slice of the flat input into its step sequence.
    fn branch_steps(&self, input: &Array2<f64>, branch: usize) -> Vec<Array2<f64>> {
        let lines = self.dims.lines_per_channel();
        let offset = branch * lines;
        (0..self.dims.seq_steps)
            .map(|t| {
                let start = offset + t * self.dims.step_size;
                input
                    .slice(ndarray::s![.., start..start + self.dims.step_size])
                    .to_owned()
            })
            .collect()
    }

    /// Scores a batch of flat features (rows), recording the tape.
    pub fn forward_batch(&self, input: &Array2<f64>) -> (Array1<f64>, DiscriminatorTape) {
        debug_assert_eq!(input.ncols(), self.dims.feature_len());
        let mut branch_tapes = Vec::with_capacity(self.branches.len());
        let mut states = Vec::with_capacity(self.branches.len());
        for (b, cell) in self.branches.iter().enumerate() {
            let steps = self.branch_steps(input, b);
            let (h, tape) = cell.forward_batch(&steps);
            branch_tapes.push(tape);
            states.push(h);
        }
        let views: Vec<_> = states.iter().map(|h| h.view()).collect();
        let merged = concatenate(Axis(1), &views).expect("equal row counts");
        let (hidden, merge_tape) = self.merge_hidden.forward_batch(&merged);
        let (out, output_tape) = self.output.forward_batch(&hidden);
        (
            out.column(0).to_owned(),
            DiscriminatorTape {
                branch_tapes,
                merge_tape,
                output_tape,
            },
        )
    }

    /// Scores a batch without recording anything.
    pub fn infer_batch(&self, input: &Array2<f64>) -> Array1<f64> {
        debug_assert_eq!(input.ncols(), self.dims.feature_len());
        let states: Vec<Array2<f64>> = self
            .branches
            .iter()
            .enumerate()
            .map(|(b, cell)| cell.infer_batch(&self.branch_steps(input, b)))
            .collect();
        let views: Vec<_> = states.iter().map(|h| h.view()).collect();
        let merged = concatenate(Axis(1), &views).expect("equal row counts");
        let hidden = self.merge_hidden.infer_batch(&merged);
        self.output.infer_batch(&hidden).column(0).to_owned()
    }

    /// Backpropagates the gradient in the output probabilities, returning
    /// parameter gradients and the gradient in the flat input.
    pub fn backward(
        &self,
        tape: DiscriminatorTape,
        d_prob: &Array1<f64>,
    ) -> (DiscriminatorGrads, Array2<f64>) {
        let batch = d_prob.len();
        let d_out = d_prob.clone().into_shape_with_order((batch, 1)).expect("column");
        let (output_grads, d_hidden) = self.output.backward(tape.output_tape, &d_out);
        let (merge_grads, d_merged) = self.merge_hidden.backward(tape.merge_tape, &d_hidden);

        let lines = self.dims.lines_per_channel();
        let hd = self.dims.hidden_size;
        let mut d_input = Array2::zeros((batch, self.dims.feature_len()));
        let mut branch_grads = Vec::with_capacity(self.branches.len());
        for (b, (cell, branch_tape)) in self
            .branches
            .iter()
            .zip(tape.branch_tapes)
            .enumerate()
        {
            let dh = d_merged.slice(ndarray::s![.., b * hd..(b + 1) * hd]).to_owned();
            let (grads, d_steps) = cell.backward(branch_tape, &dh);
            branch_grads.push(grads);
            for (t, d_step) in d_steps.iter().enumerate() {
                let start = b * lines + t * self.dims.step_size;
                d_input
                    .slice_mut(ndarray::s![.., start..start + self.dims.step_size])
                    .assign(d_step);
            }
        }
        (
            DiscriminatorGrads {
                branches: branch_grads,
                merge_hidden: merge_grads,
                output: output_grads,
            },
            d_input,
        )
    }

    /// Probability that one feature vector is a real healthy source feature.
    ///
    /// # Errors
    ///
    /// [`Error::ChannelMismatch`] / [`Error::LengthMismatch`] if the feature's
    /// channel count or spectral resolution differs from what the model was
    /// trained on.
    pub fn predict(&self, feature: &FeatureVector) -> Result<f64> {
        Ok(self.predict_features(std::slice::from_ref(feature))?[0])
    }

    /// Batched [`Discriminator::predict`] over many features.
    pub fn predict_features(&self, features: &[FeatureVector]) -> Result<Vec<f64>> {
        if features.is_empty() {
            return Err(Error::EmptyInput("no features to score".to_string()));
        }
        for f in features {
            if f.channel_count() != self.dims.channel_count {
                return Err(Error::ChannelMismatch {
                    context: "feature scored by discriminator".to_string(),
                    expected: self.dims.channel_count,
                    found: f.channel_count(),
                });
            }
            if f.lines_per_channel() != self.dims.lines_per_channel() {
                return Err(Error::LengthMismatch {
                    context: "feature lines per channel".to_string(),
                    expected: self.dims.lines_per_channel(),
                    found: f.lines_per_channel(),
                });
            }
        }
        let mut input = Array2::zeros((features.len(), self.dims.feature_len()));
        for (i, f) in features.iter().enumerate() {
            input.row_mut(i).assign(&Array1::from_vec(f.flat().to_vec()));
        }
        Ok(self.infer_batch(&input).to_vec())
    }

    /// Mutable flat views of every parameter tensor, in a fixed order matching
    /// [`DiscriminatorGrads::slices`].
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for cell in &mut self.branches {
            out.push(cell.w_x.as_slice_mut().expect("contiguous"));
            out.push(cell.w_h.as_slice_mut().expect("contiguous"));
            out.push(cell.bias.as_slice_mut().expect("contiguous"));
        }
        out.push(self.merge_hidden.weights.as_slice_mut().expect("contiguous"));
        out.push(self.merge_hidden.biases.as_slice_mut().expect("contiguous"));
        out.push(self.output.weights.as_slice_mut().expect("contiguous"));
        out.push(self.output.biases.as_slice_mut().expect("contiguous"));
        out
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.branches
            .iter()
            .map(|c| c.w_x.len() + c.w_h.len() + c.bias.len())
            .sum::<usize>()
            + self.merge_hidden.weights.len()
            + self.merge_hidden.biases.len()
            + self.output.weights.len()
            + self.output.biases.len()
    }
}

/// Generator: a dense stack from a standard-normal latent vector to a fake
/// feature vector, hidden layers relu, output a sigmoid scaled to the
/// feature clip range.
///
/// Hidden widths are 256 and 1024, with a third 3750-wide layer inserted only
/// when the output is wider than 3750.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub latent_dim: usize,
    pub layers: Vec<DenseLayer>,
}

/// Activations recorded by [`Generator::forward_batch`].
#[derive(Debug)]
pub struct GeneratorTape {
    layer_tapes: Vec<DenseTape>,
}

/// Gradients for every generator parameter tensor.
#[derive(Debug)]
pub struct GeneratorGrads {
    pub layers: Vec<DenseGrads>,
}

impl GeneratorGrads {
    /// Flat gradient slices in the generator's parameter order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.push(g.d_weights.as_slice().expect("contiguous"));
            out.push(g.d_biases.as_slice().expect("contiguous"));
        }
        out
    }
}

impl Generator {
    pub fn new<R: Rng>(latent_dim: usize, output_dim: usize, clip_cap: f64, rng: &mut R) -> Self {
        let mut widths = vec![latent_dim, 256, 1024];
        if output_dim > 3750 {
            widths.push(3750);
        }
        widths.push(output_dim);

        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, pair)| {
                let activation = if i == last {
                    Activation::ScaledSigmoid(clip_cap)
                } else {
                    Activation::Relu
                };
                DenseLayer::new(pair[1], pair[0], activation, rng)
            })
            .collect();
        Generator { latent_dim, layers }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim()
    }

    /// Draws a batch of standard-normal latent vectors.
    pub fn sample_latent<R: Rng>(rng: &mut R, batch: usize, latent_dim: usize) -> Array2<f64> {
        Array2::from_shape_fn((batch, latent_dim), |_| rng.sample(StandardNormal))
    }

    /// Generates fake features for a latent batch, recording the tape.
    pub fn forward_batch(&self, latent: &Array2<f64>) -> (Array2<f64>, GeneratorTape) {
        debug_assert_eq!(latent.ncols(), self.latent_dim);
        let mut layer_tapes = Vec::with_capacity(self.layers.len());
        let mut x = latent.clone();
        for layer in &self.layers {
            let (y, tape) = layer.forward_batch(&x);
            layer_tapes.push(tape);
            x = y;
        }
        (x, GeneratorTape { layer_tapes })
    }

    /// Generates fake features without recording anything.
    pub fn infer_batch(&self, latent: &Array2<f64>) -> Array2<f64> {
        debug_assert_eq!(latent.ncols(), self.latent_dim);
        let mut x = latent.clone();
        for layer in &self.layers {
            x = layer.infer_batch(&x);
        }
        x
    }

    /// Backpropagates the gradient in the generated features.
    pub fn backward(&self, tape: GeneratorTape, d_output: &Array2<f64>) -> GeneratorGrads {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d = d_output.clone();
        for (layer, layer_tape) in self.layers.iter().zip(tape.layer_tapes).rev() {
            let (g, d_input) = layer.backward(layer_tape, &d);
            grads.push(g);
            d = d_input;
        }
        grads.reverse();
        GeneratorGrads { layers: grads }
    }

    /// Mutable flat views of every parameter tensor, matching
    /// [`GeneratorGrads::slices`].
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(layer.weights.as_slice_mut().expect("contiguous"));
            out.push(layer.biases.as_slice_mut().expect("contiguous"));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }
}
