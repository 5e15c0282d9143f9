//! Conditional Hyvärinen scores and the information quantities built on them.
//!
//! A [`ScoreField`] models the conditional score `∇_y log p(y | x)` together
//! with its divergence `Δ_y log p(y | x)`. From a field we get the conditional
//! Hyvärinen score
//!
//! ```text
//! S_H(y, x; p) = ½‖∇_y log p(y|x)‖² + Δ_y log p(y|x)
//! ```
//!
//! and, for two fields, the score difference `s = S_H(·; p) − S_H(·; q)` that
//! drives the detector.
//!
//! The conditional Fisher divergence uses the ½ convention,
//! `D_F(p‖q | x) = ½ E_{y∼p(·|x)} ‖∇ log p − ∇ log q‖²`, which makes the
//! drift identity `E_p[s] = −D_F(p‖q)` hold exactly.
//!
//! Estimators accept any stream of pairs. Whether that stream is drawn from
//! the stationary law is up to the caller (see `simulate` for burn-in).

use crate::error::{check_dim, Error, Result};

/// One observation of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Usage("state vector must have dimension >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite(format!("state vector entry {i}")));
        }
        Ok(StateVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        StateVector(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Wraps a vector the caller already knows to be finite and nonempty.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        StateVector(values)
    }
}

impl AsRef<[f64]> for StateVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Consecutive observations `(x_prev, x_next) = (X_{n-1}, X_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionPair {
    prev: StateVector,
    next: StateVector,
}

impl TransitionPair {
    pub fn new(prev: StateVector, next: StateVector) -> Result<Self> {
        check_dim("transition pair", prev.dim(), next.dim())?;
        Ok(TransitionPair { prev, next })
    }

    /// Convenience constructor from raw slices.
    pub fn from_slices(prev: &[f64], next: &[f64]) -> Result<Self> {
        Self::new(StateVector::new(prev.to_vec())?, StateVector::new(next.to_vec())?)
    }

    pub fn dim(&self) -> usize {
        self.prev.dim()
    }

    pub fn prev(&self) -> &[f64] {
        self.prev.as_slice()
    }

    pub fn next(&self) -> &[f64] {
        self.next.as_slice()
    }
}

/// Builds the pairs `(X_{n-1}, X_n)` of a path.
pub fn pairs_from_path(path: &[StateVector]) -> Vec<TransitionPair> {
    path.windows(2)
        .map(|w| TransitionPair {
            prev: w[0].clone(),
            next: w[1].clone(),
        })
        .collect()
}

/// A model of the conditional score `∇_y log p(y | x)` and its divergence.
///
/// Implementations must be safe to share between threads once built.
pub trait ScoreField: Send + Sync {
    fn dim(&self) -> usize;

    /// `∇_y log p(y | x)`.
    fn score(&self, y: &[f64], x: &[f64]) -> Vec<f64>;

    /// `Σ_i ∂ score_i / ∂ y_i`.
    fn divergence(&self, y: &[f64], x: &[f64]) -> f64;

    fn score_and_divergence(&self, y: &[f64], x: &[f64]) -> (Vec<f64>, f64) {
        (self.score(y, x), self.divergence(y, x))
    }

    /// Hyvärinen scores for many pairs. Fields with a cheaper batched path
    /// (networks) override this; results must match [`hyvarinen_score`].
    fn hyvarinen_scores(&self, pairs: &[TransitionPair]) -> Result<Vec<f64>> {
        pairs.iter().map(|p| hyvarinen_score(self, p)).collect()
    }
}

impl<T: ScoreField + ?Sized> ScoreField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        (**self).score(y, x)
    }
    fn divergence(&self, y: &[f64], x: &[f64]) -> f64 {
        (**self).divergence(y, x)
    }
    fn score_and_divergence(&self, y: &[f64], x: &[f64]) -> (Vec<f64>, f64) {
        (**self).score_and_divergence(y, x)
    }
    fn hyvarinen_scores(&self, pairs: &[TransitionPair]) -> Result<Vec<f64>> {
        (**self).hyvarinen_scores(pairs)
    }
}

impl<T: ScoreField + ?Sized> ScoreField for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        (**self).score(y, x)
    }
    fn divergence(&self, y: &[f64], x: &[f64]) -> f64 {
        (**self).divergence(y, x)
    }
    fn score_and_divergence(&self, y: &[f64], x: &[f64]) -> (Vec<f64>, f64) {
        (**self).score_and_divergence(y, x)
    }
    fn hyvarinen_scores(&self, pairs: &[TransitionPair]) -> Result<Vec<f64>> {
        (**self).hyvarinen_scores(pairs)
    }
}

/// Isotropic Gaussian `N(mean, σ² I)` that ignores the conditioning state.
///
/// Useful as the i.i.d. special case and as a reference field in tests.
#[derive(Debug, Clone)]
pub struct FixedGaussianField {
    mean: Vec<f64>,
    sigma: f64,
}

impl FixedGaussianField {
    pub fn new(mean: Vec<f64>, sigma: f64) -> Result<Self> {
        if mean.is_empty() || !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Usage("gaussian field needs dim >= 1 and sigma > 0".into()));
        }
        Ok(FixedGaussianField { mean, sigma })
    }
}

impl ScoreField for FixedGaussianField {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn score(&self, y: &[f64], _x: &[f64]) -> Vec<f64> {
        let inv_var = 1.0 / (self.sigma * self.sigma);
        y.iter().zip(&self.mean).map(|(y, m)| -(y - m) * inv_var).collect()
    }

    fn divergence(&self, _y: &[f64], _x: &[f64]) -> f64 {
        -(self.mean.len() as f64) / (self.sigma * self.sigma)
    }
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub count: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Usage("cannot estimate a mean from zero samples".into()));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_err = if samples.len() > 1 {
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            f64::INFINITY
        };
        Ok(Estimate {
            mean,
            std_err,
            count: samples.len(),
        })
    }

    /// `|mean| / std_err`.
    pub fn z_score(&self) -> f64 {
        self.mean.abs() / self.std_err
    }
}

/// `½‖score(x_next, x_prev)‖² + divergence(x_next, x_prev)`.
pub fn hyvarinen_score<F: ScoreField + ?Sized>(field: &F, pair: &TransitionPair) -> Result<f64> {
    check_dim("hyvarinen_score", field.dim(), pair.dim())?;
    let (score, div) = field.score_and_divergence(pair.next(), pair.prev());
    check_dim("score output", field.dim(), score.len())?;
    let sq: f64 = score.iter().map(|s| s * s).sum();
    if !sq.is_finite() {
        return Err(Error::non_finite("squared score norm"));
    }
    if !div.is_finite() {
        return Err(Error::non_finite("score divergence"));
    }
    Ok(0.5 * sq + div)
}

/// `S_H(pair; p) − S_H(pair; q)`.
pub fn score_difference<P, Q>(field_p: &P, field_q: &Q, pair: &TransitionPair) -> Result<f64>
where
    P: ScoreField + ?Sized,
    Q: ScoreField + ?Sized,
{
    Ok(hyvarinen_score(field_p, pair)? - hyvarinen_score(field_q, pair)?)
}

/// Score differences for a whole stream, using each field's batched path.
pub fn score_differences<P, Q>(field_p: &P, field_q: &Q, pairs: &[TransitionPair]) -> Result<Vec<f64>>
where
    P: ScoreField + ?Sized,
    Q: ScoreField + ?Sized,
{
    if let Some(p) = pairs.first() {
        check_dim("score_differences", field_p.dim(), p.dim())?;
        check_dim("score_differences", field_q.dim(), p.dim())?;
    }
    let hp = field_p.hyvarinen_scores(pairs)?;
    let hq = field_q.hyvarinen_scores(pairs)?;
    Ok(hp.into_iter().zip(hq).map(|(a, b)| a - b).collect())
}

/// Monte-Carlo conditional Fisher divergence `½ E‖score_p − score_q‖²`.
///
/// `samples` should have `x_next ∼ p(· | x_prev)`.
pub fn estimate_fisher_divergence<P, Q>(field_p: &P, field_q: &Q, samples: &[TransitionPair]) -> Result<Estimate>
where
    P: ScoreField + ?Sized,
    Q: ScoreField + ?Sized,
{
    if samples.is_empty() {
        return Err(Error::Usage("fisher divergence needs at least one sample".into()));
    }
    check_dim("estimate_fisher_divergence", field_p.dim(), field_q.dim())?;
    let terms = samples
        .iter()
        .map(|pair| {
            check_dim("estimate_fisher_divergence", field_p.dim(), pair.dim())?;
            let sp = field_p.score(pair.next(), pair.prev());
            let sq = field_q.score(pair.next(), pair.prev());
            Ok(0.5 * sp.iter().zip(&sq).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Estimate::from_samples(&terms)
}

/// Empirical mean of the score difference over `pairs`.
///
/// Negative in expectation when the pairs come from `p`, positive under `q`.
pub fn estimate_drift<P, Q>(field_p: &P, field_q: &Q, pairs: &[TransitionPair]) -> Result<Estimate>
where
    P: ScoreField + ?Sized,
    Q: ScoreField + ?Sized,
{
    if pairs.is_empty() {
        return Err(Error::Usage("drift estimate needs at least one pair".into()));
    }
    let diffs = score_differences(field_p, field_q, pairs)?;
    Estimate::from_samples(&diffs)
}

/// Central finite-difference divergence `Σ_i [score_i(y + h e_i) − score_i(y − h e_i)] / 2h`.
///
/// Used as an independent check on analytic or network divergences.
pub fn finite_difference_divergence<F: ScoreField + ?Sized>(field: &F, y: &[f64], x: &[f64], h: f64) -> f64 {
    let mut yp = y.to_vec();
    let mut total = 0.0;
    for i in 0..y.len() {
        yp[i] = y[i] + h;
        let plus = field.score(&yp, x)[i];
        yp[i] = y[i] - h;
        let minus = field.score(&yp, x)[i];
        yp[i] = y[i];
        total += (plus - minus) / (2.0 * h);
    }
    total
}
