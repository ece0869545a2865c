//! Discrete martingales and their transforms, differential subordination,
//! and exponentially weighted stochastic integrals.

mod dyadic;
mod lenglart;
mod weighted;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dyadic::{search_extremal_transform, DyadicTree, SearchOptions, SearchResult};
pub use lenglart::{lenglart_check, HypothesisRecord, LenglartReport, StoppingRule};
pub use weighted::{
    bdg_ratio, diagonal_consistency, matrix_bdg_ratio, matrix_exp_step, matrix_second_moment_check, matrix_weighted_ensemble,
    matrix_weighted_integral, second_moment_check, weighted_ensemble, weighted_integral, MatrixDynamics, MatrixWeightedProcess,
    ScalarDynamics, SecondMomentCheck, WeightedProcess,
};

use crate::error::{Error, Result};
use crate::rng::path_rng;

/// Martingale path with difference sequence `df` (`df_0 = f_0`) and partial
/// sums `f_n = Σ_{k≤n} df_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMartingalePath {
    pub increments: Vec<f64>,
    pub partial: Vec<f64>,
}

impl DiscreteMartingalePath {
    pub fn from_increments(increments: Vec<f64>) -> Self {
        let partial = increments
            .iter()
            .scan(0.0, |s, d| {
                *s += d;
                Some(*s)
            })
            .collect();
        DiscreteMartingalePath { increments, partial }
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn last(&self) -> f64 {
        self.partial.last().copied().unwrap_or(0.0)
    }
}

/// Law of the increments of [`sample_dyadic_martingale`]: `df_k = ε_k·h_k`
/// with an independent symmetric sign `ε_k` and a magnitude `h_k` fixed
/// before `ε_k` is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncrementLaw {
    /// `h_k = 1`.
    Sign,
    /// `h_k ~ Uniform[lo, hi]`, independent of the past.
    UniformMagnitude { lo: f64, hi: f64 },
    /// `h_k = base + gain·|f_{k−1}|`.
    Feedback { base: f64, gain: f64 },
}

impl IncrementLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            IncrementLaw::Sign => true,
            IncrementLaw::UniformMagnitude { lo, hi } => lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi,
            IncrementLaw::Feedback { base, gain } => base.is_finite() && gain.is_finite() && base >= 0.0 && gain >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid increment law {self:?}")))
        }
    }
}

fn sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Path `index` of the dyadic-martingale ensemble keyed by `seed`.
pub fn sample_dyadic_martingale(depth: usize, law: &IncrementLaw, seed: u64, index: u64) -> Result<DiscreteMartingalePath> {
    if depth == 0 {
        return Err(Error::domain("depth must be at least 1"));
    }
    law.validate()?;
    let mut rng = path_rng(seed, index);
    let mut f = 0.0f64;
    let mut df = Vec::with_capacity(depth);
    for _ in 0..depth {
        let h = match *law {
            IncrementLaw::Sign => 1.0,
            IncrementLaw::UniformMagnitude { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            IncrementLaw::Feedback { base, gain } => base + gain * f.abs(),
        };
        let d = sign(&mut rng) * h;
        f += d;
        df.push(d);
    }
    Ok(DiscreteMartingalePath::from_increments(df))
}

pub fn sample_dyadic_ensemble(depth: usize, law: &IncrementLaw, seed: u64, n_paths: usize) -> Result<Vec<DiscreteMartingalePath>> {
    (0..n_paths as u64).into_par_iter().map(|i| sample_dyadic_martingale(depth, law, seed, i)).collect()
}

/// Predictable multipliers `v_k ∈ [b, B]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictableSequence {
    pub values: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl PredictableSequence {
    pub fn new(values: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) {
            return Err(Error::domain(format!("empty range [{lower}, {upper}]")));
        }
        if let Some(v) = values.iter().find(|v| !(lower <= **v && **v <= upper)) {
            return Err(Error::domain(format!("value {v} outside [{lower}, {upper}]")));
        }
        Ok(PredictableSequence { values, lower, upper })
    }

    pub fn constant(len: usize, c: f64) -> Self {
        PredictableSequence { values: vec![c; len], lower: c, upper: c }
    }

    /// `v_k = (−1)^k`.
    pub fn alternating(len: usize) -> Self {
        let values = (0..len).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        PredictableSequence { values, lower: -1.0, upper: 1.0 }
    }

    /// Uniform draws on `[b, B]`, independent of any martingale (hence
    /// predictable for it).
    pub fn random(len: usize, lower: f64, upper: f64, seed: u64, index: u64) -> Result<Self> {
        let mut rng = path_rng(seed ^ 0x7f4a_7c15_9e37_79b9, index);
        let values = (0..len).map(|_| lower + (upper - lower) * rng.random::<f64>()).collect();
        PredictableSequence::new(values, lower, upper)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise product; the range is the product interval.
    pub fn product(&self, other: &PredictableSequence) -> PredictableSequence {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        let c = [self.lower * other.lower, self.lower * other.upper, self.upper * other.lower, self.upper * other.upper];
        PredictableSequence {
            values,
            lower: c.iter().copied().fold(f64::INFINITY, f64::min),
            upper: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// `g = v ⋆ f`: increments `dg_k = v_k df_k`.
pub fn transform(f: &DiscreteMartingalePath, v: &PredictableSequence) -> Result<DiscreteMartingalePath> {
    if v.len() < f.len() {
        return Err(Error::LengthMismatch { expected: f.len(), found: v.len() });
    }
    Ok(DiscreteMartingalePath::from_increments(f.increments.iter().zip(&v.values).map(|(d, c)| c * d).collect()))
}

/// Differential subordination of `Y` to `X` relative to `[b, B]`:
/// `|Y_0| ≤ |X_0|` and `[((B−b)/2)X] − [Y − ((b+B)/2)X]` nonnegative and
/// nondecreasing, with `[W]_n = Σ_{k≤n} (ΔW_k)²` and `ΔW_0 = W_0`.
///
/// Each term is compared with a relative tolerance of `1e−12` so that
/// transforms with `v_k` on the boundary of the range are not rejected for
/// rounding.
pub fn check_subordination(x: &DiscreteMartingalePath, y: &DiscreteMartingalePath, b: f64, big_b: f64) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::GridMismatch(format!("paths have {} and {} steps", x.len(), y.len())));
    }
    if !(b <= big_b) {
        return Err(Error::domain(format!("empty range [{b}, {big_b}]")));
    }
    if x.is_empty() {
        return Ok(true);
    }
    let half_width = (big_b - b) / 2.0;
    let mid = (b + big_b) / 2.0;
    let tol = 1e-12;
    if y.increments[0].abs() > x.increments[0].abs() * (1.0 + tol) {
        return Ok(false);
    }
    let mut gap = 0.0;
    for (dx, dy) in x.increments.iter().zip(&y.increments) {
        let dom = (half_width * dx).powi(2);
        let sub = (dy - mid * dx).powi(2);
        let term = dom - sub;
        if term < -tol * dom.max(sub) {
            return Ok(false);
        }
        gap += term;
        if gap < -tol * dom.max(sub) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `(mean |x|^p)^{1/p}`.
pub fn empirical_lp(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    Ok((values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / values.len() as f64).powf(1.0 / p))
}
