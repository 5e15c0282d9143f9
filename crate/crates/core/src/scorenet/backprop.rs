//! Surrogate score-matching loss and its exact parameter gradient.
//!
//! Per pair the loss is `Σ_i ½ψ_i² + ∂ψ_i/∂y_i`. The divergence term lives in
//! the tangent stream, so the reverse pass carries two adjoints per layer: one
//! for the activations (`g`) and one for the tangents (`G`). For a hidden layer
//! with `a = silu(z)` and `ȧ = silu'(z) ż`:
//!
//! ```text
//! g_z = g_a ⊙ silu'(z) + Σ_i (G_ȧ,i ⊙ ż_i) ⊙ silu''(z)
//! G_ż = G_ȧ ⊙ silu'(z)
//! ∂L/∂W = g_zᵀ a_prev + G_żᵀ ȧ_prev,   ∂L/∂b = Σ_b g_z
//! ```

use ndarray::{Array1, Array2, Axis, Zip};

use super::{
    scale_tangents, seed_tangents, silu, silu_prime, silu_second, stack_inputs, sum_tangent_groups, tangent_diagonal, Layer, MlpParameters,
};
use crate::error::{Error, Result};
use crate::score::TransitionPair;

/// Gradient with the same layout as [`MlpParameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub layers: Vec<Layer>,
}

impl MlpGradient {
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weight.iter().chain(l.bias.iter()).map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

struct Tape {
    /// Layer inputs `a_0 … a_{L−1}`.
    inputs: Vec<Array2<f64>>,
    /// Tangents of the layer inputs, `ȧ_0 … ȧ_{L−1}`.
    input_tangents: Vec<Array2<f64>>,
    /// Hidden pre-activations `z_1 … z_{L−1}`.
    pre: Vec<Array2<f64>>,
    /// Hidden pre-activation tangents.
    pre_tangents: Vec<Array2<f64>>,
    outputs: Array2<f64>,
    output_tangents: Array2<f64>,
}

impl MlpParameters {
    fn forward_tape(&self, input: Array2<f64>) -> Tape {
        let d = self.state_dim();
        let batch = input.nrows();
        let last = self.layers().len() - 1;
        let mut tape = Tape {
            inputs: Vec::with_capacity(last + 1),
            input_tangents: Vec::with_capacity(last + 1),
            pre: Vec::with_capacity(last),
            pre_tangents: Vec::with_capacity(last),
            outputs: Array2::zeros((0, 0)),
            output_tangents: Array2::zeros((0, 0)),
        };
        let mut a = input;
        let mut adot = seed_tangents(batch, d);
        for (k, layer) in self.layers().iter().enumerate() {
            let mut z = a.dot(&layer.weight.t());
            z += &layer.bias;
            let zdot = adot.dot(&layer.weight.t());
            tape.inputs.push(a);
            tape.input_tangents.push(adot);
            if k == last {
                tape.outputs = z;
                tape.output_tangents = zdot;
                break;
            }
            let n = z.ncols();
            let slope = z.mapv(silu_prime);
            let mut next_dot = zdot.clone();
            scale_tangents(&mut next_dot, &slope, d, n);
            a = z.mapv(silu);
            adot = next_dot;
            tape.pre.push(z);
            tape.pre_tangents.push(zdot);
        }
        tape
    }

    /// Mean over `batch` of `Σ_i ½ψ_i² + ∂ψ_i/∂y_i` at `(y, x) = (next, prev)`.
    pub fn surrogate_loss(&self, batch: &[TransitionPair]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Usage("surrogate loss needs a nonempty batch".into()));
        }
        let eval = self.evaluate_pairs(batch)?;
        let total = 0.5 * eval.outputs.iter().map(|v| v * v).sum::<f64>() + eval.jacobian_diag.sum();
        let loss = total / batch.len() as f64;
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(Error::non_finite("surrogate loss"))
        }
    }

    /// Surrogate loss and its exact gradient with respect to every weight and bias.
    pub fn loss_gradient(&self, batch: &[TransitionPair]) -> Result<(f64, MlpGradient)> {
        if batch.is_empty() {
            return Err(Error::Usage("loss gradient needs a nonempty batch".into()));
        }
        let d = self.state_dim();
        let nb = batch.len();
        let inv_b = 1.0 / nb as f64;
        let tape = self.forward_tape(stack_inputs(batch, d)?);

        let diag = tangent_diagonal(&tape.output_tangents, nb, d);
        let loss = (0.5 * tape.outputs.iter().map(|v| v * v).sum::<f64>() + diag.sum()) * inv_b;
        if !loss.is_finite() {
            return Err(Error::non_finite("surrogate loss"));
        }

        // Output adjoints: ½‖ψ‖² gives ψ/B, the trace term puts 1/B on each
        // tangent's own output coordinate.
        let mut g_z = &tape.outputs * inv_b;
        let mut g_zdot = Array2::<f64>::zeros((nb * d, d));
        for b in 0..nb {
            for i in 0..d {
                g_zdot[[b * d + i, i]] = inv_b;
            }
        }

        let n_layers = self.layers().len();
        let mut grads: Vec<Layer> = Vec::with_capacity(n_layers);
        for k in (0..n_layers).rev() {
            let layer = &self.layers()[k];
            let mut g_w = g_z.t().dot(&tape.inputs[k]);
            g_w += &g_zdot.t().dot(&tape.input_tangents[k]);
            let g_b: Array1<f64> = g_z.sum_axis(Axis(0));
            if g_w.iter().chain(g_b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::non_finite(format!("gradient of layer {k}")));
            }
            grads.push(Layer { weight: g_w, bias: g_b });
            if k == 0 {
                break;
            }

            let g_a = g_z.dot(&layer.weight);
            let g_adot = g_zdot.dot(&layer.weight);
            let z = &tape.pre[k - 1];
            let zdot = &tape.pre_tangents[k - 1];
            let n = z.ncols();

            let slope = z.mapv(silu_prime);
            let cross = sum_tangent_groups(&(&g_adot * zdot), nb, d);
            let mut next_g_z = g_a;
            Zip::from(&mut next_g_z)
                .and(&slope)
                .and(&cross)
                .and(z)
                .for_each(|g, &s1, &c, &u| *g = *g * s1 + c * silu_second(u));

            let mut next_g_zdot = g_adot;
            scale_tangents(&mut next_g_zdot, &slope, d, n);
            g_z = next_g_z;
            g_zdot = next_g_zdot;
        }
        grads.reverse();
        Ok((loss, MlpGradient { layers: grads }))
    }
}
