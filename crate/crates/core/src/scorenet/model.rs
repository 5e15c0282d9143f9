//! Trained networks as score fields, and their on-disk format.
//!
//! Model file layout (all integers `u32` and all reals `f64`, little-endian):
//!
//! ```text
//! magic            8 bytes  "SCNMODEL"
//! version          u32      1
//! state_dim        u32      d
//! hidden_count     u32      H
//! hidden_widths    u32 × H
//! activation       u8       0 = SiLU
//! has_standardize  u8       0 or 1
//! [mean            f64 × d]  present when has_standardize = 1
//! [scale           f64 × d]
//! layers, input to output:
//!   weight         f64 × (fan_out · fan_in), row-major (fan_out rows)
//!   bias           f64 × fan_out
//! ```
//!
//! The file must end right after the last bias. Loading checks every shape
//! and rejects non-finite parameters.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Layer, MlpArchitecture, MlpParameters};
use crate::error::{check_dim, Error, Result};
use crate::score::{ScoreField, TransitionPair};
use crate::standardize::Standardization;

pub const MODEL_MAGIC: &[u8; 8] = b"SCNMODEL";
pub const MODEL_VERSION: u32 = 1;

/// Upper bound on any single dimension read from a model header.
const MAX_WIDTH: u32 = 1 << 16;

/// A network plus the input standardization it was trained under.
///
/// As a [`ScoreField`] it works in raw coordinates: inputs are standardized
/// before the network and the output is mapped back with the chain rule,
/// `score_i = ψ_i / scale_i`, `divergence = Σ_i (∂ψ_i/∂ỹ_i) / scale_i²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreNet {
    pub params: MlpParameters,
    pub standardization: Option<Standardization>,
}

/// Wraps parameters as a score field with no input standardization.
pub fn as_score_field(params: MlpParameters) -> ScoreNet {
    ScoreNet {
        params,
        standardization: None,
    }
}

impl ScoreNet {
    pub fn with_standardization(params: MlpParameters, standardization: Standardization) -> Result<Self> {
        standardization.validate()?;
        check_dim("model standardization", params.state_dim(), standardization.dim())?;
        Ok(ScoreNet {
            params,
            standardization: Some(standardization),
        })
    }

    fn prepare(&self, v: &[f64]) -> Vec<f64> {
        match &self.standardization {
            Some(st) => st.apply(v),
            None => v.to_vec(),
        }
    }

    fn inv_scale(&self, i: usize) -> f64 {
        self.standardization.as_ref().map_or(1.0, |st| 1.0 / st.scale[i])
    }
}

impl ScoreField for ScoreNet {
    fn dim(&self) -> usize {
        self.params.state_dim()
    }

    /// # Panics
    /// If `y` or `x` does not have the network's dimension.
    fn score(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = self
            .params
            .forward(&self.prepare(y), &self.prepare(x))
            .expect("score field called with mismatched dimensions");
        for (i, o) in out.iter_mut().enumerate() {
            *o *= self.inv_scale(i);
        }
        out
    }

    fn divergence(&self, y: &[f64], x: &[f64]) -> f64 {
        self.score_and_divergence(y, x).1
    }

    fn score_and_divergence(&self, y: &[f64], x: &[f64]) -> (Vec<f64>, f64) {
        let pair = TransitionPair::from_slices(&self.prepare(x), &self.prepare(y))
            .expect("score field called with mismatched or non-finite inputs");
        let eval = self.params.evaluate_pairs(std::slice::from_ref(&pair)).expect("dimension checked");
        let d = self.dim();
        let score = (0..d).map(|i| eval.outputs[[0, i]] * self.inv_scale(i)).collect();
        let div = (0..d).map(|i| eval.jacobian_diag[[0, i]] * self.inv_scale(i).powi(2)).sum();
        (score, div)
    }

    fn hyvarinen_scores(&self, pairs: &[TransitionPair]) -> Result<Vec<f64>> {
        let d = self.dim();
        if let Some(p) = pairs.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                context: "hyvarinen_scores",
                expected: d,
                actual: p.dim(),
            });
        }
        let prepared;
        let input = match &self.standardization {
            Some(st) => {
                prepared = pairs
                    .iter()
                    .map(|p| TransitionPair::from_slices(&st.apply(p.prev()), &st.apply(p.next())))
                    .collect::<Result<Vec<_>>>()?;
                &prepared[..]
            }
            None => pairs,
        };
        let eval = self.params.evaluate_pairs(input)?;
        let inv: Vec<f64> = (0..d).map(|i| self.inv_scale(i)).collect();
        let mut out = Vec::with_capacity(pairs.len());
        for (row_out, row_diag) in eval.outputs.rows().into_iter().zip(eval.jacobian_diag.rows()) {
            let mut sq = 0.0;
            let mut div = 0.0;
            for i in 0..d {
                sq += (row_out[i] * inv[i]).powi(2);
                div += row_diag[i] * inv[i] * inv[i];
            }
            if !sq.is_finite() {
                return Err(Error::non_finite("squared score norm"));
            }
            if !div.is_finite() {
                return Err(Error::non_finite("score divergence"));
            }
            out.push(0.5 * sq + div);
        }
        Ok(out)
    }
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64s<'a, W: Write>(w: &mut W, vals: impl IntoIterator<Item = &'a f64>) -> std::io::Result<()> {
    for v in vals {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_model<W: Write>(w: &mut W, model: &ScoreNet) -> std::io::Result<()> {
    let arch = model.params.arch();
    w.write_all(MODEL_MAGIC)?;
    put_u32(w, MODEL_VERSION)?;
    put_u32(w, arch.state_dim as u32)?;
    put_u32(w, arch.hidden_widths.len() as u32)?;
    for &h in &arch.hidden_widths {
        put_u32(w, h as u32)?;
    }
    w.write_all(&[0u8])?;
    match &model.standardization {
        Some(st) => {
            w.write_all(&[1u8])?;
            put_f64s(w, &st.mean)?;
            put_f64s(w, &st.scale)?;
        }
        None => w.write_all(&[0u8])?,
    }
    for layer in model.params.layers() {
        // Row-major regardless of the array's memory layout.
        put_f64s(w, layer.weight.iter())?;
        put_f64s(w, layer.bias.iter())?;
    }
    Ok(())
}

struct Reader<'a, R> {
    inner: &'a mut R,
    source: &'a str,
}

impl<R: Read> Reader<'_, R> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::ModelFormat {
            path: self.source.to_string(),
            reason: reason.into(),
        }
    }

    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| self.fail(format!("truncated while reading {what}: {e}")))?;
        Ok(buf)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes::<4>(what)?))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.bytes::<1>(what)?[0])
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n)
            .map(|_| Ok(f64::from_le_bytes(self.bytes::<8>(what)?)))
            .collect()
    }
}

/// Reads a model; `source` names the input in error messages.
pub fn read_model<R: Read>(r: &mut R, source: &str) -> Result<ScoreNet> {
    let mut rd = Reader { inner: r, source };
    let magic = rd.bytes::<8>("magic")?;
    if &magic != MODEL_MAGIC {
        return Err(rd.fail("not a model file (bad magic)"));
    }
    let version = rd.u32("version")?;
    if version != MODEL_VERSION {
        return Err(rd.fail(format!("unsupported format version {version}")));
    }
    let state_dim = rd.u32("state_dim")?;
    let hidden_count = rd.u32("hidden layer count")?;
    if state_dim == 0 || state_dim > MAX_WIDTH || hidden_count == 0 || hidden_count > 1024 {
        return Err(rd.fail(format!("implausible header: state_dim {state_dim}, {hidden_count} hidden layers")));
    }
    let mut hidden_widths = Vec::with_capacity(hidden_count as usize);
    for _ in 0..hidden_count {
        let w = rd.u32("hidden width")?;
        if w == 0 || w > MAX_WIDTH {
            return Err(rd.fail(format!("implausible hidden width {w}")));
        }
        hidden_widths.push(w as usize);
    }
    let activation = match rd.u8("activation")? {
        0 => Activation::Silu,
        other => return Err(rd.fail(format!("unknown activation code {other}"))),
    };
    let arch = MlpArchitecture {
        state_dim: state_dim as usize,
        hidden_widths,
        activation,
    };
    let d = arch.state_dim;
    let standardization = match rd.u8("standardization flag")? {
        0 => None,
        1 => {
            let mean = rd.f64s(d, "standardization mean")?;
            let scale = rd.f64s(d, "standardization scale")?;
            let st = Standardization { mean, scale };
            st.validate().map_err(|e| rd.fail(e.to_string()))?;
            Some(st)
        }
        other => return Err(rd.fail(format!("bad standardization flag {other}"))),
    };
    let mut layers = Vec::new();
    for (k, (fan_out, fan_in)) in arch.layer_shapes().into_iter().enumerate() {
        let w = rd.f64s(fan_out * fan_in, &format!("layer {k} weight"))?;
        let b = rd.f64s(fan_out, &format!("layer {k} bias"))?;
        layers.push(Layer {
            weight: Array2::from_shape_vec((fan_out, fan_in), w).expect("length matches shape"),
            bias: Array1::from_vec(b),
        });
    }
    let mut trailing = [0u8; 1];
    match rd.inner.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(rd.fail("trailing bytes after last layer")),
        Err(e) => return Err(rd.fail(e.to_string())),
    }
    let params = MlpParameters::from_layers(arch, layers).map_err(|e| rd.fail(e.to_string()))?;
    Ok(ScoreNet { params, standardization })
}

pub fn save_model(path: &Path, model: &ScoreNet) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_model(&mut w, model).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ScoreNet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(&mut std::io::BufReader::new(file), &path.display().to_string())
}
