//! Single-layer LSTM with full backpropagation through time.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::{Error, Result};

use super::{glorot_uniform, sigmoid};

/// LSTM cell whose gate parameters are stacked row blocks in the order
/// input, forget, cell, output.
///
/// For hidden size `H` and input size `I`, `w_x` is `4H x I`, `w_h` is
/// `4H x H`, and `bias` has `4H` entries. The step computation is
///
/// ```text
/// z = W_x x_t + W_h h_{t-1} + b
/// i = sigmoid(z_i)   f = sigmoid(z_f)   g = tanh(z_g)   o = sigmoid(z_o)
/// c_t = f * c_{t-1} + i * g
/// h_t = o * tanh(c_t)
/// ```
///
/// with `h_0 = c_0 = 0`. The forget-gate bias starts at 1 so early training
/// retains cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_x: Array2<f64>,
    pub w_h: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Per-step activations recorded by [`LstmCell::forward_batch`]; consumed by
/// [`LstmCell::backward`].
#[derive(Debug)]
pub struct LstmTape {
    xs: Vec<Array2<f64>>,
    /// `h_0..h_T`, so entry `t` is the hidden state entering step `t`.
    hs: Vec<Array2<f64>>,
    /// `c_0..c_T`.
    cs: Vec<Array2<f64>>,
    /// Post-activation gate values per step, columns blocked `[i f g o]`.
    gates: Vec<Array2<f64>>,
}

/// Gradients of an LSTM cell's parameters, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub d_w_x: Array2<f64>,
    pub d_w_h: Array2<f64>,
    pub d_bias: Array1<f64>,
}

impl LstmCell {
    /// Creates a cell with Glorot-uniform weights (gate fan-in counts input
    /// and recurrent connections together), zero biases, and forget bias 1.
    pub fn new<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let fan_in = input_dim + hidden_dim;
        let w_x = glorot_uniform(rng, 4 * hidden_dim, input_dim, fan_in, hidden_dim);
        let w_h = glorot_uniform(rng, 4 * hidden_dim, hidden_dim, fan_in, hidden_dim);
        let mut bias = Array1::zeros(4 * hidden_dim);
        bias.slice_mut(ndarray::s![hidden_dim..2 * hidden_dim]).fill(1.0);
        LstmCell { w_x, w_h, bias }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.ncols()
    }

    /// Runs one sample through the sequence and returns the final hidden
    /// state.
    pub fn forward(&self, sequence: &[Vec<f64>]) -> Result<Vec<f64>> {
        if sequence.is_empty() {
            return Err(Error::EmptyInput("lstm sequence".to_string()));
        }
        let steps: Vec<Array2<f64>> = sequence
            .iter()
            .map(|step| {
                if step.len() != self.input_dim() {
                    return Err(Error::LengthMismatch {
                        context: "lstm step input".to_string(),
                        expected: self.input_dim(),
                        found: step.len(),
                    });
                }
                Ok(Array2::from_shape_vec((1, step.len()), step.clone()).expect("row shape"))
            })
            .collect::<Result<_>>()?;
        Ok(self.infer_batch(&steps).row(0).to_vec())
    }

    /// Runs a batch through the sequence (each entry of `steps` is one time
    /// step, rows are samples) and returns the final hidden state with the
    /// tape for backward.
    pub fn forward_batch(&self, steps: &[Array2<f64>]) -> (Array2<f64>, LstmTape) {
        assert!(!steps.is_empty(), "lstm sequence must not be empty");
        let batch = steps[0].nrows();
        let hd = self.hidden_dim();
        let mut h = Array2::zeros((batch, hd));
        let mut c = Array2::zeros((batch, hd));
        let mut tape = LstmTape {
            xs: steps.to_vec(),
            hs: vec![h.clone()],
            cs: vec![c.clone()],
            gates: Vec::with_capacity(steps.len()),
        };
        for x in steps {
            let (gates, c_new, h_new) = self.step(x, &h, &c);
            tape.gates.push(gates);
            c = c_new;
            h = h_new;
            tape.cs.push(c.clone());
            tape.hs.push(h.clone());
        }
        (h, tape)
    }

    /// Runs a batch through the sequence without recording anything.
    pub fn infer_batch(&self, steps: &[Array2<f64>]) -> Array2<f64> {
        assert!(!steps.is_empty(), "lstm sequence must not be empty");
        let batch = steps[0].nrows();
        let hd = self.hidden_dim();
        let mut h = Array2::zeros((batch, hd));
        let mut c = Array2::zeros((batch, hd));
        for x in steps {
            let (_, c_new, h_new) = self.step(x, &h, &c);
            c = c_new;
            h = h_new;
        }
        h
    }

    fn step(
        &self,
        x: &Array2<f64>,
        h: &Array2<f64>,
        c: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        debug_assert_eq!(x.ncols(), self.input_dim());
        let batch = x.nrows();
        let hd = self.hidden_dim();
        let mut z = x.dot(&self.w_x.t()) + h.dot(&self.w_h.t());
        z += &self.bias;

        let mut c_new = Array2::zeros((batch, hd));
        let mut h_new = Array2::zeros((batch, hd));
        for b in 0..batch {
            for j in 0..hd {
                let i_v = sigmoid(z[[b, j]]);
                let f_v = sigmoid(z[[b, hd + j]]);
                let g_v = z[[b, 2 * hd + j]].tanh();
                let o_v = sigmoid(z[[b, 3 * hd + j]]);
                z[[b, j]] = i_v;
                z[[b, hd + j]] = f_v;
                z[[b, 2 * hd + j]] = g_v;
                z[[b, 3 * hd + j]] = o_v;
                let c_v = f_v * c[[b, j]] + i_v * g_v;
                c_new[[b, j]] = c_v;
                h_new[[b, j]] = o_v * c_v.tanh();
            }
        }
        (z, c_new, h_new)
    }

    /// Backpropagates the gradient in the final hidden state through all
    /// steps, returning parameter gradients and per-step input gradients in
    /// forward order.
    pub fn backward(&self, tape: LstmTape, d_h_final: &Array2<f64>) -> (LstmGrads, Vec<Array2<f64>>) {
        let steps = tape.xs.len();
        let batch = d_h_final.nrows();
        let hd = self.hidden_dim();
        debug_assert_eq!(d_h_final.ncols(), hd);

        let mut d_w_x: Array2<f64> = Array2::zeros(self.w_x.dim());
        let mut d_w_h: Array2<f64> = Array2::zeros(self.w_h.dim());
        let mut d_bias: Array1<f64> = Array1::zeros(self.bias.len());
        let mut d_xs: Vec<Array2<f64>> = Vec::with_capacity(steps);

        let mut dh = d_h_final.clone();
        let mut dc: Array2<f64> = Array2::zeros((batch, hd));

        for t in (0..steps).rev() {
            let gates = &tape.gates[t];
            let c_t = &tape.cs[t + 1];
            let c_prev = &tape.cs[t];
            let h_prev = &tape.hs[t];

            let mut dz: Array2<f64> = Array2::zeros((batch, 4 * hd));
            let mut dc_prev: Array2<f64> = Array2::zeros((batch, hd));
            for b in 0..batch {
                for j in 0..hd {
                    let i_v = gates[[b, j]];
                    let f_v = gates[[b, hd + j]];
                    let g_v = gates[[b, 2 * hd + j]];
                    let o_v = gates[[b, 3 * hd + j]];
                    let tanh_c = c_t[[b, j]].tanh();

                    let dh_v = dh[[b, j]];
                    let dc_v = dc[[b, j]] + dh_v * o_v * (1.0 - tanh_c * tanh_c);

                    let d_i = dc_v * g_v;
                    let d_f = dc_v * c_prev[[b, j]];
                    let d_g = dc_v * i_v;
                    let d_o = dh_v * tanh_c;

                    dz[[b, j]] = d_i * i_v * (1.0 - i_v);
                    dz[[b, hd + j]] = d_f * f_v * (1.0 - f_v);
                    dz[[b, 2 * hd + j]] = d_g * (1.0 - g_v * g_v);
                    dz[[b, 3 * hd + j]] = d_o * o_v * (1.0 - o_v);
                    dc_prev[[b, j]] = dc_v * f_v;
                }
            }

            d_w_x += &dz.t().dot(&tape.xs[t]);
            d_w_h += &dz.t().dot(h_prev);
            d_bias += &dz.sum_axis(Axis(0));
            d_xs.push(dz.dot(&self.w_x));
            dh = dz.dot(&self.w_h);
            dc = dc_prev;
        }

        d_xs.reverse();
        (
            LstmGrads {
                d_w_x,
                d_w_h,
                d_bias,
            },
            d_xs,
        )
    }
}
