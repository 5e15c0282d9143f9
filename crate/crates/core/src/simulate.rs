//! Synthetic Gaussian-kernel Markov chain with a closed-form conditional score.
//!
//! One step is `X_{n+1} = μ(X_n) + σ Z_n` with `Z_n ∼ N(0, I)` and
//!
//! ```text
//! μ(x) = x + f(x) − ∇V(x),   V(x) = (α/2)‖x‖²,   f(x) = shift · tanh(x)
//! ```
//!
//! applied elementwise, i.e. `μ(x) = (1 − α) x + shift · tanh(x)`. For
//! `0 < α < 2` the linear part contracts and the `tanh` term is bounded, so
//! the chain stays in a bounded region and is geometrically ergodic.
//!
//! Paths start at the zero vector and run `burn_in` pre-change steps before
//! anything is emitted. At the change point the state is carried over: `X_ν`
//! is drawn from the post-change kernel given `X_{ν−1}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::SimRng;
use crate::score::{pairs_from_path, ScoreField, StateVector, TransitionPair};

pub const DEFAULT_BURN_IN: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianKernelSpec {
    pub dim: usize,
    /// Mean-reversion strength, in `(0, 2)`.
    pub alpha: f64,
    pub sigma: f64,
    pub shift: f64,
}

impl GaussianKernelSpec {
    /// Pre-change kernel of the synthetic experiment.
    pub fn default_pre() -> Self {
        GaussianKernelSpec {
            dim: 10,
            alpha: 0.3,
            sigma: 0.3,
            shift: 0.2,
        }
    }

    /// Post-change kernel of the synthetic experiment.
    pub fn default_post() -> Self {
        GaussianKernelSpec {
            dim: 10,
            alpha: 0.6,
            sigma: 0.5,
            shift: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Usage("kernel dim must be >= 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Usage(format!("kernel sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::Usage(format!("kernel alpha must lie in (0, 2), got {}", self.alpha)));
        }
        if !self.shift.is_finite() {
            return Err(Error::Usage("kernel shift must be finite".into()));
        }
        Ok(())
    }

    fn mean_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = xi - self.alpha * xi + self.shift * xi.tanh();
        }
    }

    /// `log N(y; μ(x), σ² I)`.
    pub fn log_density(&self, y: &[f64], x: &[f64]) -> f64 {
        let mut mean = vec![0.0; self.dim];
        self.mean_into(x, &mut mean);
        let var = self.sigma * self.sigma;
        let sq: f64 = y.iter().zip(&mean).map(|(y, m)| (y - m).powi(2)).sum();
        let d = self.dim as f64;
        -sq / (2.0 * var) - d * self.sigma.ln() - 0.5 * d * (std::f64::consts::TAU).ln()
    }
}

/// When the kernel switches. `At(ν)` means `X_n` for `n ≥ ν` is post-change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangePoint {
    At(usize),
    Never,
}

impl ChangePoint {
    pub fn index(self) -> Option<usize> {
        match self {
            ChangePoint::At(n) => Some(n),
            ChangePoint::Never => None,
        }
    }

    pub fn is_post(self, n: usize) -> bool {
        matches!(self, ChangePoint::At(nu) if n >= nu)
    }
}

impl Serialize for ChangePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ChangePoint::At(n) => s.serialize_u64(*n as u64),
            ChangePoint::Never => s.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for ChangePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Index(u64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Index(0) => Err(serde::de::Error::custom("change_point must be >= 1")),
            Repr::Index(n) => Ok(ChangePoint::At(n as usize)),
            Repr::Word(w) if w == "infinity" => Ok(ChangePoint::Never),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "change_point must be a positive integer or \"infinity\", got {w:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub pre: GaussianKernelSpec,
    #[serde(default)]
    pub post: Option<GaussianKernelSpec>,
    pub change_point: ChangePoint,
    pub length: usize,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl TrajectoryConfig {
    /// A never-changing path under `spec`.
    pub fn stationary(spec: GaussianKernelSpec, length: usize, seed: u64) -> Self {
        TrajectoryConfig {
            pre: spec,
            post: None,
            change_point: ChangePoint::Never,
            length,
            seed,
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pre.validate()?;
        if let Some(post) = &self.post {
            post.validate()?;
            check_dim("post kernel", self.pre.dim, post.dim)?;
        }
        // A change point past the end is allowed: the window is then all pre-change.
        if let ChangePoint::At(_) = self.change_point {
            if self.post.is_none() {
                return Err(Error::Usage("a finite change_point requires a post kernel".into()));
            }
        }
        Ok(())
    }

    pub fn kernel_at(&self, n: usize) -> &GaussianKernelSpec {
        match (&self.post, self.change_point.is_post(n)) {
            (Some(post), true) => post,
            _ => &self.pre,
        }
    }
}

/// `μ(x) = x − α x + shift · tanh(x)`, elementwise.
pub fn transition_mean(spec: &GaussianKernelSpec, x: &StateVector) -> Result<StateVector> {
    check_dim("transition_mean", spec.dim, x.dim())?;
    let mut out = vec![0.0; spec.dim];
    spec.mean_into(x.as_slice(), &mut out);
    Ok(StateVector::from_vec_unchecked(out))
}

/// One transition: `μ(x) + σ z` with `z` drawn from `rng`.
pub fn step(spec: &GaussianKernelSpec, x: &StateVector, rng: &mut SimRng) -> Result<StateVector> {
    check_dim("step", spec.dim, x.dim())?;
    let mut out = vec![0.0; spec.dim];
    step_into(spec, x.as_slice(), rng, &mut out);
    Ok(StateVector::from_vec_unchecked(out))
}

fn step_into(spec: &GaussianKernelSpec, x: &[f64], rng: &mut SimRng, out: &mut [f64]) {
    spec.mean_into(x, out);
    for o in out.iter_mut() {
        *o += spec.sigma * rng.standard_normal();
    }
}

/// Emits `X_0, …, X_{length−1}`, where `X_0` is the state after burn-in and
/// `X_n` for `n ≥ 1` is drawn from the pre-change kernel when `n < ν` and from
/// the post-change kernel otherwise.
pub fn simulate_path(config: &TrajectoryConfig) -> Result<Vec<StateVector>> {
    config.validate()?;
    let d = config.pre.dim;
    let mut rng = SimRng::new(config.seed);
    let mut state = vec![0.0; d];
    let mut next = vec![0.0; d];
    for _ in 0..config.burn_in {
        step_into(&config.pre, &state, &mut rng, &mut next);
        std::mem::swap(&mut state, &mut next);
    }
    let mut path = Vec::with_capacity(config.length);
    if config.length == 0 {
        return Ok(path);
    }
    path.push(StateVector::from_vec_unchecked(state.clone()));
    for n in 1..config.length {
        step_into(config.kernel_at(n), &state, &mut rng, &mut next);
        std::mem::swap(&mut state, &mut next);
        path.push(StateVector::from_vec_unchecked(state.clone()));
    }
    Ok(path)
}

/// `n` pairs from a burned-in path under a single kernel.
pub fn stationary_pairs(spec: &GaussianKernelSpec, n: usize, seed: u64) -> Result<Vec<TransitionPair>> {
    let path = simulate_path(&TrajectoryConfig::stationary(*spec, n + 1, seed))?;
    Ok(pairs_from_path(&path))
}

/// Exact score field of a [`GaussianKernelSpec`]:
/// `score(y, x) = −(y − μ(x)) / σ²`, `divergence = −d / σ²`.
#[derive(Debug, Clone)]
pub struct GaussianKernelField {
    spec: GaussianKernelSpec,
}

impl GaussianKernelField {
    pub fn spec(&self) -> &GaussianKernelSpec {
        &self.spec
    }
}

pub fn closed_form_score(spec: &GaussianKernelSpec) -> GaussianKernelField {
    GaussianKernelField { spec: *spec }
}

impl ScoreField for GaussianKernelField {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn score(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.dim];
        self.spec.mean_into(x, &mut out);
        let inv_var = 1.0 / (self.spec.sigma * self.spec.sigma);
        for (o, yi) in out.iter_mut().zip(y) {
            *o = -(yi - *o) * inv_var;
        }
        out
    }

    fn divergence(&self, _y: &[f64], _x: &[f64]) -> f64 {
        -(self.spec.dim as f64) / (self.spec.sigma * self.spec.sigma)
    }
}

/// `log q(x_next | x_prev) − log p(x_next | x_prev)`, the exact CUSUM increment.
pub fn log_likelihood_ratio(pre: &GaussianKernelSpec, post: &GaussianKernelSpec, pair: &TransitionPair) -> Result<f64> {
    check_dim("log_likelihood_ratio", pre.dim, post.dim)?;
    check_dim("log_likelihood_ratio", pre.dim, pair.dim())?;
    let v = post.log_density(pair.next(), pair.prev()) - pre.log_density(pair.next(), pair.prev());
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::non_finite("log-likelihood ratio"))
    }
}

/// Writes a path as CSV with header `x0..x{d-1}` and, when `change` is
/// given, a trailing `regime` column (`pre` / `post`).
pub fn write_trajectory_csv<W: Write>(out: W, path: &[StateVector], dim: usize, change: Option<ChangePoint>) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    if change.is_some() {
        header.push("regime".into());
    }
    w.write_record(&header)?;
    for (n, state) in path.iter().enumerate() {
        let mut row: Vec<String> = state.as_slice().iter().map(|v| v.to_string()).collect();
        if let Some(cp) = change {
            row.push(if cp.is_post(n) { "post" } else { "pre" }.into());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_trajectory_csv`]. A `regime` column, when
/// present, must switch from `pre` to `post` at most once; the switch row
/// becomes the change point.
pub fn read_trajectory_csv<R: std::io::Read>(input: R) -> Result<(Vec<StateVector>, Option<ChangePoint>)> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| Error::Usage(format!("trajectory header: {e}")))?.clone();
    let has_regime = headers.iter().next_back() == Some("regime");
    let dim = headers.len() - usize::from(has_regime);
    if dim == 0 {
        return Err(Error::Usage("trajectory CSV has no state columns".into()));
    }
    let mut path = Vec::new();
    let mut change = has_regime.then_some(ChangePoint::Never);
    for (n, record) in r.records().enumerate() {
        let row = n + 2;
        let record = record.map_err(|e| Error::Usage(format!("trajectory row {row}: {e}")))?;
        let values = record
            .iter()
            .take(dim)
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Usage(format!("trajectory row {row}: non-numeric value {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        path.push(StateVector::new(values).map_err(|e| Error::Usage(format!("trajectory row {row}: {e}")))?);
        if has_regime {
            match (record.get(dim).map(str::trim), change) {
                (Some("pre"), Some(ChangePoint::Never)) => {}
                (Some("post"), Some(ChangePoint::Never)) => change = Some(ChangePoint::At(n)),
                (Some("post"), Some(ChangePoint::At(_))) => {}
                (other, _) => {
                    return Err(Error::Usage(format!(
                        "trajectory row {row}: regime {other:?} out of order (expected pre rows then post rows)"
                    )))
                }
            }
        }
    }
    Ok((path, change))
}
