//! Probabilistic construction of `S^T_A f`.
//!
//! Along each path of the torus diffusion the transformed Itô sum
//!
//! ```text
//! I = Σ_n e^{S_N − S_n} (A(T−t_n, Y_n) ∇P^V_{T−t_n} f(Y_n)) · ΔB_n,
//! S_n = Σ_{k<n} V(Y_k) Δ,
//! ```
//!
//! is accumulated with the semigroup gradients precomputed spectrally on the
//! time grid and evaluated at `Y_n` by direct Fourier summation. Then
//! `E[I | Y_T = x]` estimates `S^T_A f(x)` and `E[I g(Y_T)]` estimates
//! `∫ (S^T_A f) g dμ` when `Y_0` is uniform.
//!
//! With left-endpoint integrands the exact expectation of the Itô sum is the
//! right-endpoint Riemann sum `Δ Σ_{j=1}^{N} h(jΔ)` of the spectral time
//! integrand, so the grid-matched oracle uses
//! [`TimeQuadrature::GridRiemann`](crate::quadrature::TimeQuadrature).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::{path_weights, DiffusionPath, EnsembleSpec, Potential};
use crate::error::{check_len, Error, Result};
use crate::quadrature::TimeProfile;
use crate::spectral::{heat_eigenvalue, FourierField, MatrixProfile};
use crate::stats::MeanSe;

/// Coefficient matrix `A(t, x)`, with `t` the semigroup time `T − t_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixField {
    Constant(DMatrix<f64>),
    /// `a(t)·A₀`.
    Scaled {
        profile: TimeProfile,
        base: DMatrix<f64>,
    },
    /// Planar rotation by `θ(x) = c·sin(2πx₁)` in the first two coordinates,
    /// identity elsewhere; orthogonal, so `‖A(x)‖ = 1`.
    Rotation {
        amplitude: f64,
    },
}

impl MatrixField {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            MatrixField::Constant(a) => MatrixProfile::Constant(a.clone()).validate(dim),
            MatrixField::Scaled { profile, base } => MatrixProfile::Scaled { profile: profile.clone(), base: base.clone() }.validate(dim),
            MatrixField::Rotation { .. } if dim < 2 => Err(Error::domain("rotation field needs d ≥ 2")),
            MatrixField::Rotation { .. } => Ok(()),
        }
    }

    pub fn at(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        match self {
            MatrixField::Constant(a) => a.clone(),
            MatrixField::Scaled { profile, base } => base * profile.value(t),
            MatrixField::Rotation { amplitude } => {
                let d = x.len();
                let th = amplitude * (2.0 * PI * x[0]).sin();
                let mut m = DMatrix::identity(d, d);
                m[(0, 0)] = th.cos();
                m[(0, 1)] = -th.sin();
                m[(1, 0)] = th.sin();
                m[(1, 1)] = th.cos();
                m
            }
        }
    }

    /// `sup_{t,x} ‖A(t,x)‖` (spectral norm).
    pub fn sup_norm(&self) -> Result<f64> {
        Ok(match self {
            MatrixField::Constant(a) => spectral_norm(a),
            MatrixField::Scaled { profile, base } => profile.sup_abs()? * spectral_norm(base),
            MatrixField::Rotation { .. } => 1.0,
        })
    }

    /// Time-only profile for the spectral oracle, if `A` does not depend on `x`.
    pub fn profile(&self) -> Option<MatrixProfile> {
        match self {
            MatrixField::Constant(a) => Some(MatrixProfile::Constant(a.clone())),
            MatrixField::Scaled { profile, base } => Some(MatrixProfile::Scaled { profile: profile.clone(), base: base.clone() }),
            MatrixField::Rotation { .. } => None,
        }
    }
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.clone().svd(false, false).singular_values.amax()
}

/// Spectral coefficients of `P^V_{T−t_n} f` on the time grid, `V ≡ −m`.
#[derive(Debug, Clone)]
pub struct GradientTable {
    pub dim: usize,
    pub bandwidth: usize,
    pub steps: usize,
    pub horizon: f64,
    pub potential: f64,
    modes: Vec<Vec<i64>>,
    /// `coeffs[n][j]`: coefficient of mode `j` in `P^V_{T−t_n} f`.
    coeffs: Vec<Vec<Complex64>>,
}

impl GradientTable {
    pub fn new(f: &FourierField, horizon: f64, steps: usize, potential: f64) -> Result<Self> {
        if steps == 0 || !(horizon > 0.0) {
            return Err(Error::domain("gradient table needs steps ≥ 1 and T > 0"));
        }
        if !(potential >= 0.0) {
            return Err(Error::domain(format!("V ≡ −m needs m ≥ 0, got {potential}")));
        }
        let nz = f.nonzero_modes();
        let dt = horizon / steps as f64;
        let coeffs = (0..=steps)
            .map(|n| {
                let s = horizon - n as f64 * dt;
                nz.iter().map(|(k, c)| c * (-(heat_eigenvalue(k) + potential) * s).exp()).collect()
            })
            .collect();
        Ok(GradientTable {
            dim: f.dim(),
            bandwidth: f.bandwidth(),
            steps,
            horizon,
            potential,
            modes: nz.into_iter().map(|(k, _)| k).collect(),
            coeffs,
        })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    fn phases(&self, y: &[f64]) -> Vec<Vec<Complex64>> {
        let kk = self.bandwidth as i64;
        y.iter().map(|ya| (-kk..=kk).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 * ya)).collect()).collect()
    }

    /// `(P^V_{T−t_n} f(y), ∇P^V_{T−t_n} f(y))`.
    pub fn eval(&self, n: usize, y: &[f64], grad: &mut [f64]) -> f64 {
        let ph = self.phases(y);
        let kk = self.bandwidth as i64;
        grad.fill(0.0);
        let mut value = 0.0;
        for (k, c) in self.modes.iter().zip(&self.coeffs[n]) {
            let mut e = *c;
            for (a, ka) in k.iter().enumerate() {
                e *= ph[a][(ka + kk) as usize];
            }
            value += e.re;
            // Re(2πi k_a e) = −2π k_a Im(e)
            for (g, ka) in grad.iter_mut().zip(k) {
                *g -= 2.0 * PI * *ka as f64 * e.im;
            }
        }
        value
    }
}

/// Per-path output of [`path_integrals`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    /// Transformed integral `I`.
    pub transformed: f64,
    /// Same sum with `A = I`.
    pub untransformed: f64,
    pub terminal: Vec<f64>,
    pub terminal_weight: f64,
    /// `Σ_n e^{2(S_N−S_n)} |A ∇P^V f|² Δ`.
    pub qv_transformed: f64,
    /// `Σ_n e^{2(S_N−S_n)} |∇P^V f|² Δ`.
    pub qv_untransformed: f64,
    /// `|A u|² ≤ ‖A‖² |u|²` held at every step.
    pub dominated: bool,
}

/// Per-step increments `e^{S_N−S_n} (A ∇P^V f)(Y_n) · ΔB_n` of one path.
pub fn integrand_terms(
    path: &DiffusionPath,
    table: &GradientTable,
    a: &MatrixField,
    potential: &Potential,
) -> Result<(Vec<f64>, PathRecord)> {
    let d = table.dim;
    let dt = table.dt();
    check_len((table.steps + 1) * d, path.y.len())?;
    let w = path_weights(path, d, dt, potential)?;
    let w_t = w[table.steps];
    let bound = a.sup_norm()?.powi(2);
    let mut grad = vec![0.0; d];
    let mut terms = Vec::with_capacity(table.steps);
    let mut rec = PathRecord {
        transformed: 0.0,
        untransformed: 0.0,
        terminal: path.position(table.steps, d).to_vec(),
        terminal_weight: w_t,
        qv_transformed: 0.0,
        qv_untransformed: 0.0,
        dominated: true,
    };
    for (n, w_n) in w.iter().enumerate().take(table.steps) {
        let y = path.position(n, d);
        table.eval(n, y, &mut grad);
        let s = table.horizon - n as f64 * dt;
        let am = a.at(s, y);
        let factor = w_t / w_n;
        let db = path.increment(n, d);
        let mut term = 0.0;
        let mut plain = 0.0;
        let mut au2 = 0.0;
        let mut u2 = 0.0;
        for i in 0..d {
            let mut ai = 0.0;
            for j in 0..d {
                ai += am[(i, j)] * grad[j];
            }
            term += ai * db[i];
            plain += grad[i] * db[i];
            au2 += ai * ai;
            u2 += grad[i] * grad[i];
        }
        if au2 > bound * u2 * (1.0 + 1e-12) + 1e-300 {
            rec.dominated = false;
        }
        terms.push(factor * term);
        rec.transformed += factor * term;
        rec.untransformed += factor * plain;
        rec.qv_transformed += factor * factor * au2 * dt;
        rec.qv_untransformed += factor * factor * u2 * dt;
    }
    Ok((terms, rec))
}

/// Transformed integrals of every path of the ensemble, in path order.
pub fn path_integrals(spec: &EnsembleSpec, table: &GradientTable, a: &MatrixField, potential: &Potential) -> Result<Vec<PathRecord>> {
    spec.validate()?;
    a.validate(spec.dim)?;
    if spec.steps != table.steps || spec.horizon != table.horizon || spec.dim != table.dim {
        return Err(Error::GridMismatch(format!(
            "paths have (d={}, T={}, n={}), table has (d={}, T={}, n={})",
            spec.dim, spec.horizon, spec.steps, table.dim, table.horizon, table.steps
        )));
    }
    (0..spec.n_paths as u64).into_par_iter().map(|i| integrand_terms(&spec.path(i), table, a, potential).map(|(_, r)| r)).collect()
}

/// `E[I g(Y_T)]` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingEstimate {
    pub value: f64,
    pub se: f64,
    pub n_paths: usize,
}

pub fn pairing_estimate(values: &[f64], g: &FourierField, terminal: &[Vec<f64>]) -> Result<PairingEstimate> {
    check_len(values.len(), terminal.len())?;
    let m = MeanSe::of_iter(values.iter().zip(terminal).map(|(v, y)| v * g.eval_real(y)))?;
    Ok(PairingEstimate { value: m.mean, se: m.se, n_paths: m.n })
}

/// Histogram regression of per-path values on `Y_T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionEstimate {
    pub dim: usize,
    pub bins: usize,
    /// Row-major over cells; `None` for empty cells.
    pub estimates: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    /// `None` where fewer than two paths landed.
    pub se: Vec<Option<f64>>,
    pub fingerprint: String,
}

impl ProjectionEstimate {
    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.fingerprint = fingerprint.into();
        self
    }

    pub fn n_paths(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut r = cell;
        for a in (0..self.dim).rev() {
            out[a] = ((r % self.bins) as f64 + 0.5) / self.bins as f64;
            r /= self.bins;
        }
        out
    }

    /// `(Σ_cells count·|estimate|^p / N)^{1/p}`.
    pub fn weighted_lp(&self, p: f64) -> f64 {
        let n = self.n_paths() as f64;
        let s: f64 = self.estimates.iter().zip(&self.counts).filter_map(|(e, c)| e.map(|v| *c as f64 * v.abs().powf(p))).sum();
        (s / n).powf(1.0 / p)
    }

    /// Root mean square standard error over cells with a defined SE.
    pub fn pooled_se(&self) -> f64 {
        let v: Vec<f64> = self.se.iter().flatten().map(|s| s * s).collect();
        if v.is_empty() {
            return f64::NAN;
        }
        (v.iter().sum::<f64>() / v.len() as f64).sqrt()
    }

    pub fn mean_se(&self) -> f64 {
        let v: Vec<f64> = self.se.iter().flatten().copied().collect();
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn cell_of(y: &[f64], bins: usize) -> usize {
    y.iter().fold(0usize, |acc, v| acc * bins + ((v * bins as f64) as usize).min(bins - 1))
}

/// Bin means of `values` by the cell of `Y_T` (`bins` per axis). Empty cells
/// stay missing.
pub fn conditional_expectation(values: &[f64], terminal: &[Vec<f64>], bins: usize) -> Result<ProjectionEstimate> {
    check_len(values.len(), terminal.len())?;
    if bins < 2 {
        return Err(Error::domain("need at least two bins per axis"));
    }
    let dim = terminal.first().map_or(0, |y| y.len());
    if dim == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let cells = bins.pow(dim as u32);
    let mut sum = vec![0.0; cells];
    let mut sum2 = vec![0.0; cells];
    let mut counts = vec![0usize; cells];
    for (v, y) in values.iter().zip(terminal) {
        let c = cell_of(y, bins);
        sum[c] += v;
        counts[c] += 1;
    }
    let estimates: Vec<Option<f64>> = (0..cells).map(|c| (counts[c] > 0).then(|| sum[c] / counts[c] as f64)).collect();
    for (v, y) in values.iter().zip(terminal) {
        let c = cell_of(y, bins);
        let m = estimates[c].unwrap_or(0.0);
        sum2[c] += (v - m) * (v - m);
    }
    let se = (0..cells)
        .map(|c| {
            let n = counts[c];
            (n >= 2).then(|| (sum2[c] / (n - 1) as f64 / n as f64).sqrt())
        })
        .collect();
    Ok(ProjectionEstimate { dim, bins, estimates, counts, se, fingerprint: String::new() })
}

/// Comparison of a binned estimate with the oracle's exact cell averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinComparison {
    /// RMS difference over nonempty cells.
    pub l2_distance: f64,
    pub pooled_se: f64,
    /// Bias bound of reading the cell average as the value at the centre:
    /// `(h√d/2) sup|∇S f|`, with `h = 1/bins`.
    pub centre_bias_bound: f64,
    pub nonempty: usize,
    pub pass: bool,
}

/// Passes iff the RMS distance to the cell averages of `oracle` is at most
/// `3·pooled SE`. The centre-value discretisation bound is reported for
/// reference: the histogram estimates cell averages, which the oracle
/// provides exactly.
pub fn compare_bins(est: &ProjectionEstimate, oracle: &FourierField) -> Result<BinComparison> {
    if oracle.dim() != est.dim {
        return Err(Error::domain("oracle dimension differs from the estimate"));
    }
    let exact = oracle.bin_averages(est.bins);
    let diffs: Vec<f64> = est.estimates.iter().zip(&exact).filter_map(|(e, x)| e.map(|v| (v - x).powi(2))).collect();
    let l2 = (diffs.iter().sum::<f64>() / diffs.len() as f64).sqrt();
    let lip: f64 = oracle.modes().map(|(k, c)| 2.0 * PI * crate::spectral::norm_sq(&k).sqrt() * c.norm()).sum();
    let h = 1.0 / est.bins as f64;
    let pooled = est.pooled_se();
    Ok(BinComparison {
        l2_distance: l2,
        pooled_se: pooled,
        centre_bias_bound: h * (est.dim as f64).sqrt() / 2.0 * lip,
        nonempty: diffs.len(),
        pass: l2 <= 3.0 * pooled,
    })
}

/// One checkpoint of [`martingale_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub step: usize,
    pub time: f64,
    pub mean: MeanSe,
    /// Paired difference with the `t = 0` value.
    pub drift: MeanSe,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub checkpoints: Vec<Checkpoint>,
    /// `(P^V_T f)(x₀)` for a deterministic start.
    pub exact_start: Option<f64>,
    pub pass: bool,
}

/// Checks that `e^{∫_0^t V} (P^V_{T−t} f)(Y_t)` has constant mean over the
/// checkpoints (constant potential only, so that `P^V` is spectral).
pub fn martingale_check(spec: &EnsembleSpec, f: &FourierField, potential: &Potential, checkpoints: &[usize]) -> Result<MartingaleReport> {
    spec.validate()?;
    let m = potential.constant_rate().ok_or_else(|| Error::domain("martingale check needs a constant potential"))?;
    if let Some(bad) = checkpoints.iter().find(|c| **c > spec.steps) {
        return Err(Error::GridMismatch(format!("checkpoint {bad} beyond {} steps", spec.steps)));
    }
    let table = GradientTable::new(f, spec.horizon, spec.steps, m)?;
    let d = spec.dim;
    let dt = spec.dt();
    let per_path: Vec<Vec<f64>> = (0..spec.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let p = spec.path(i);
            let w = path_weights(&p, d, dt, potential)?;
            let mut grad = vec![0.0; d];
            let base = table.eval(0, p.position(0, d), &mut grad);
            Ok(std::iter::once(base).chain(checkpoints.iter().map(|&n| w[n] * table.eval(n, p.position(n, d), &mut grad))).collect())
        })
        .collect::<Result<_>>()?;
    let exact_start = match &spec.init {
        crate::diffusion::InitialLaw::Point { x } => {
            let mut grad = vec![0.0; d];
            Some(table.eval(0, x, &mut grad))
        }
        crate::diffusion::InitialLaw::Uniform => None,
    };
    let mut out = Vec::with_capacity(checkpoints.len());
    for (j, &n) in checkpoints.iter().enumerate() {
        let mean = MeanSe::of_iter(per_path.iter().map(|v| v[j + 1]))?;
        let drift = MeanSe::of_iter(per_path.iter().map(|v| v[j + 1] - v[0]))?;
        let mut ok = drift.mean.abs() <= 3.0 * drift.se + 1e-12;
        if let Some(x) = exact_start {
            ok &= (mean.mean - x).abs() <= 3.0 * mean.se + 1e-12;
        }
        out.push(Checkpoint { step: n, time: n as f64 * dt, mean, drift, ok });
    }
    let pass = out.iter().all(|c| c.ok);
    Ok(MartingaleReport { checkpoints: out, exact_start, pass })
}

/// Outcome of [`integral_lp_check`] for one exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralLpRecord {
    pub p: f64,
    /// `‖Σ_n ∇P_{T−t_n} f(Y_n)·ΔB_n‖_p`.
    pub integral_norm: f64,
    pub integral_norm_se: f64,
    pub f_norm: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `L^p` norm of the untransformed, unweighted integral against
/// `2^{2−1/p} p²/(p−1) ‖f‖_p`, within 3 standard errors. `‖f‖_p` is taken on
/// a grid of `grid` points per axis.
pub fn integral_lp_check(integrals: &[f64], f: &FourierField, p: f64, grid: usize) -> Result<IntegralLpRecord> {
    let bound = crate::constants::integral_lp_constant(p)?;
    let pth = MeanSe::of_iter(integrals.iter().map(|v| v.abs().powf(p)))?;
    let f_norm = crate::normest::lp_norm(&f.to_grid(grid)?.values, p)?;
    let norm = pth.mean.powf(1.0 / p);
    // delta method for x ↦ x^{1/p}
    let norm_se = if pth.mean > 0.0 { pth.se * pth.mean.powf(1.0 / p - 1.0) / p } else { 0.0 };
    let (ratio, ratio_se) = if f_norm > 0.0 { (norm / f_norm, norm_se / f_norm) } else { (0.0, 0.0) };
    Ok(IntegralLpRecord {
        p,
        integral_norm: norm,
        integral_norm_se: norm_se,
        f_norm,
        ratio,
        ratio_se,
        bound,
        pass: ratio - 3.0 * ratio_se <= bound,
    })
}
