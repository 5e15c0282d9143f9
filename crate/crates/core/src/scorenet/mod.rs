//! Fully-connected conditional score network `ψ(y, x; θ)`.
//!
//! The input is `concat(y, x) ∈ ℝ^{2d}`, hidden layers are affine + SiLU and
//! the output layer is affine, giving `ψ ∈ ℝ^d`. The divergence
//! `Σ_i ∂ψ_i/∂y_i` is computed exactly by pushing `d` tangent vectors
//! `e_1, …, e_d` (in the `y` block) through the network alongside the primal
//! pass. Both streams are batched into matrix products: a batch of `B` pairs
//! carries a `B × n` activation matrix and a `(B·d) × n` tangent matrix per
//! layer, with tangent row `b·d + i` belonging to sample `b`, direction `i`.

mod backprop;
mod model;
mod train;

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::SimRng;
use crate::score::TransitionPair;

pub use backprop::MlpGradient;
pub use model::{as_score_field, load_model, read_model, save_model, write_model, ScoreNet, MODEL_MAGIC, MODEL_VERSION};
pub use train::{evaluate_accuracy, train, AccuracyReport, Optimizer, TrainConfig, TrainHistory};

/// Pairs per chunk when evaluating large pair sets.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Silu,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpArchitecture {
    /// `d`: the network maps `ℝ^{2d} → ℝ^d`.
    pub state_dim: usize,
    pub hidden_widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn new(state_dim: usize, hidden_widths: Vec<usize>) -> Result<Self> {
        let arch = MlpArchitecture {
            state_dim,
            hidden_widths,
            activation: Activation::Silu,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Three hidden layers of 128 (synthetic experiment).
    pub fn synthetic(state_dim: usize) -> Self {
        MlpArchitecture {
            state_dim,
            hidden_widths: vec![128; 3],
            activation: Activation::Silu,
        }
    }

    /// Four hidden layers of 512, five affine layers in total (motion capture).
    pub fn mocap(state_dim: usize) -> Self {
        MlpArchitecture {
            state_dim,
            hidden_widths: vec![512; 4],
            activation: Activation::Silu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 {
            return Err(Error::Usage("architecture state_dim must be >= 1".into()));
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::Usage("hidden_widths must be nonempty and positive".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        2 * self.state_dim
    }

    pub fn output_dim(&self) -> usize {
        self.state_dim
    }

    /// `(fan_out, fan_in)` for every affine layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 2);
        dims.push(self.input_dim());
        dims.extend(&self.hidden_widths);
        dims.push(self.output_dim());
        dims.windows(2).map(|w| (w[1], w[0])).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(o, i)| o * i + o).sum()
    }
}

/// One affine layer: `z = W a + b` with `W` stored `fan_out × fan_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParameters {
    arch: MlpArchitecture,
    layers: Vec<Layer>,
}

/// Per-pair network outputs and the diagonal of `∂ψ/∂y`.
#[derive(Debug, Clone)]
pub struct BatchEval {
    /// `B × d` network outputs.
    pub outputs: Array2<f64>,
    /// `B × d`, entry `(b, i)` is `∂ψ_i/∂y_i` at sample `b`.
    pub jacobian_diag: Array2<f64>,
}

#[inline]
pub(crate) fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// `u · sigmoid(u)`.
#[inline]
pub fn silu(u: f64) -> f64 {
    u * sigmoid(u)
}

#[inline]
pub(crate) fn silu_prime(u: f64) -> f64 {
    let s = sigmoid(u);
    s * (1.0 + u * (1.0 - s))
}

#[inline]
pub(crate) fn silu_second(u: f64) -> f64 {
    let s = sigmoid(u);
    s * (1.0 - s) * (2.0 + u * (1.0 - 2.0 * s))
}

/// Fan-in scaled uniform initialisation: every weight of a layer with fan-in
/// `n` is drawn from `U(−1/√n, 1/√n)` (variance `1/(3n)`); biases start at 0.
pub fn init_params(arch: &MlpArchitecture, seed: u64) -> Result<MlpParameters> {
    arch.validate()?;
    let mut rng = SimRng::new(seed);
    Ok(init_with_rng(arch, &mut rng))
}

pub(crate) fn init_with_rng(arch: &MlpArchitecture, rng: &mut SimRng) -> MlpParameters {
    let layers = arch
        .layer_shapes()
        .into_iter()
        .map(|(fan_out, fan_in)| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || bound * (2.0 * rng.uniform() - 1.0));
            Layer {
                weight,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    MlpParameters {
        arch: arch.clone(),
        layers,
    }
}

impl MlpParameters {
    pub fn zeros(arch: &MlpArchitecture) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(o, i)| Layer {
                weight: Array2::zeros((o, i)),
                bias: Array1::zeros(o),
            })
            .collect();
        Ok(MlpParameters {
            arch: arch.clone(),
            layers,
        })
    }

    /// Builds parameters from explicit layers, checking every shape and value.
    pub fn from_layers(arch: MlpArchitecture, layers: Vec<Layer>) -> Result<Self> {
        arch.validate()?;
        let shapes = arch.layer_shapes();
        check_dim("layer count", shapes.len(), layers.len())?;
        for (k, ((o, i), layer)) in shapes.iter().zip(&layers).enumerate() {
            if layer.weight.dim() != (*o, *i) || layer.bias.len() != *o {
                return Err(Error::Usage(format!(
                    "layer {k}: expected weight {o}x{i} and bias {o}, got {:?} and {}",
                    layer.weight.dim(),
                    layer.bias.len()
                )));
            }
            if layer.weight.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::non_finite(format!("parameters of layer {k}")));
            }
        }
        Ok(MlpParameters { arch, layers })
    }

    pub fn arch(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn state_dim(&self) -> usize {
        self.arch.state_dim
    }

    /// `ψ(y, x; θ)`.
    pub fn forward(&self, y: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let d = self.state_dim();
        check_dim("forward y", d, y.len())?;
        check_dim("forward x", d, x.len())?;
        let mut a = Array1::from_iter(y.iter().chain(x).copied());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weight.dot(&a);
            z += &layer.bias;
            if k < last {
                z.mapv_inplace(silu);
            }
            a = z;
        }
        Ok(a.to_vec())
    }

    /// Exact `Σ_i ∂ψ_i/∂y_i` from `d` tangent passes.
    pub fn divergence(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        let pair = TransitionPair::from_slices(x, y)?;
        let eval = self.evaluate_pairs(std::slice::from_ref(&pair))?;
        Ok(eval.jacobian_diag.sum())
    }

    /// Outputs and Jacobian diagonals for a set of pairs (`y = next`, `x = prev`).
    pub fn evaluate_pairs(&self, pairs: &[TransitionPair]) -> Result<BatchEval> {
        let d = self.state_dim();
        let mut outputs = Array2::zeros((pairs.len(), d));
        let mut jacobian_diag = Array2::zeros((pairs.len(), d));
        for (c, chunk) in pairs.chunks(EVAL_CHUNK).enumerate() {
            let input = stack_inputs(chunk, d)?;
            let (out, diag) = self.eval_batch(input.view());
            let lo = c * EVAL_CHUNK;
            outputs.slice_mut(s![lo..lo + chunk.len(), ..]).assign(&out);
            jacobian_diag.slice_mut(s![lo..lo + chunk.len(), ..]).assign(&diag);
        }
        Ok(BatchEval { outputs, jacobian_diag })
    }

    /// Forward + tangent pass on a stacked `B × 2d` input, without keeping
    /// intermediates.
    fn eval_batch(&self, input: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let d = self.state_dim();
        let batch = input.nrows();
        let mut a = input.to_owned();
        let mut adot = seed_tangents(batch, d);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight.t());
            z += &layer.bias;
            let mut zdot = adot.dot(&layer.weight.t());
            if k < last {
                let n = z.ncols();
                let slope = z.mapv(silu_prime);
                scale_tangents(&mut zdot, &slope, d, n);
                z.mapv_inplace(silu);
            }
            a = z;
            adot = zdot;
        }
        (a, tangent_diagonal(&adot, batch, d))
    }
}

/// Stacks pairs into a `B × 2d` matrix with rows `[x_next | x_prev]`.
pub(crate) fn stack_inputs(pairs: &[TransitionPair], d: usize) -> Result<Array2<f64>> {
    let mut input = Array2::zeros((pairs.len(), 2 * d));
    for (mut row, pair) in input.rows_mut().into_iter().zip(pairs) {
        check_dim("network input", d, pair.dim())?;
        for (dst, src) in row.iter_mut().zip(pair.next().iter().chain(pair.prev())) {
            *dst = *src;
        }
    }
    Ok(input)
}

/// `(B·d) × 2d` tangent seeds: row `b·d + i` is `e_i` in the `y` block.
pub(crate) fn seed_tangents(batch: usize, d: usize) -> Array2<f64> {
    let mut t = Array2::zeros((batch * d, 2 * d));
    for b in 0..batch {
        for i in 0..d {
            t[[b * d + i, i]] = 1.0;
        }
    }
    t
}

/// Multiplies tangent row `b·d + i` elementwise by `factor` row `b`.
pub(crate) fn scale_tangents(tangents: &mut Array2<f64>, factor: &Array2<f64>, d: usize, n: usize) {
    debug_assert_eq!(tangents.dim(), (factor.nrows() * d, n));
    // Row loops rather than a reshape: `dot` may hand back column-major
    // matrices for degenerate shapes.
    for (b, f) in factor.outer_iter().enumerate() {
        let mut block = tangents.slice_mut(s![b * d..(b + 1) * d, ..]);
        block *= &f;
    }
}

/// Sums each group of `d` consecutive tangent rows, giving one row per sample.
pub(crate) fn sum_tangent_groups(tangents: &Array2<f64>, batch: usize, d: usize) -> Array2<f64> {
    let mut out = Array2::zeros((batch, tangents.ncols()));
    for (b, mut row) in out.outer_iter_mut().enumerate() {
        row.assign(&tangents.slice(s![b * d..(b + 1) * d, ..]).sum_axis(Axis(0)));
    }
    out
}

/// Picks `(b, i) ↦ tangents[b·d + i, i]` from the output-layer tangents.
pub(crate) fn tangent_diagonal(tangents: &Array2<f64>, batch: usize, d: usize) -> Array2<f64> {
    let mut diag = Array2::zeros((batch, d));
    Zip::indexed(&mut diag).for_each(|(b, i), v| *v = tangents[[b * d + i, i]]);
    diag
}
