//! `L^p` norms of grid fields and lower bounds for `L^p → L^p` operator norms
//! of Fourier multipliers on the torus.
//!
//! The estimator is the duality-map power iteration: with
//! `J_p(v) = |v|^{p−1} sgn(v) / ‖v‖_p^{p−1}` (so `‖J_p v‖_q = 1` and
//! `⟨J_p v, v⟩ = ‖v‖_p`), one step is
//!
//! ```text
//! w = J_p(T u),   u ← J_q(T* w).
//! ```
//!
//! Hölder gives `‖T u_new‖_p ≥ ⟨T u_new, w⟩ = ‖T* w‖_q ≥ ⟨T* w, u⟩ = ‖T u‖_p`,
//! so the ratio never decreases; a decrease beyond rounding aborts the run.
//! Every returned value is the ratio of a stored witness field.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quadrature::TimeProfile;
use crate::rng::standard_normal;
use crate::spectral::{grid_point, Direction, GridField, MultiplierSymbol, SpectralPlan};

const ASCENT_SLACK: f64 = 1e-13;

/// `(mean_x |f(x)|^p)^{1/p}` with uniform torus weights.
pub fn lp_norm(values: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("L^p norm needs p ≥ 1, got {p}")));
    }
    if values.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = values.len() as f64;
    if p == f64::INFINITY {
        return Ok(values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = values.iter().map(|v| (v.abs() / scale).powf(p)).sum();
    Ok(scale * (s / n).powf(1.0 / p))
}

/// `|v|^{p−1} sgn(v) / ‖v‖_p^{p−1}`; zero entries map to zero.
fn dual_map(v: &[f64], p: f64) -> Result<Vec<f64>> {
    let norm = lp_norm(v, p)?;
    if norm == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    Ok(v.iter().map(|x| (x.abs() / norm).powf(p - 1.0) * x.signum() * (*x != 0.0) as u8 as f64).collect())
}

/// Named multiplier operators accepted by the estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    Identity,
    /// `R_iR_j`, 0-based axes.
    Riesz2 {
        i: usize,
        j: usize,
    },
    /// `Σ_ij A_ij R_iR_j`.
    SaConstant(nalgebra::DMatrix<f64>),
    /// `Σ_{j∈J} R_j²`.
    RieszSquareSum(Vec<usize>),
    /// `T_a`.
    Laplace(TimeProfile),
    Composite(Vec<OperatorKind>),
}

impl OperatorKind {
    pub fn symbol(&self) -> MultiplierSymbol {
        match self {
            OperatorKind::Identity => MultiplierSymbol::Identity,
            OperatorKind::Riesz2 { i, j } => MultiplierSymbol::Riesz2 { i: *i, j: *j },
            OperatorKind::SaConstant(a) => MultiplierSymbol::SaConstant(a.clone()),
            OperatorKind::RieszSquareSum(js) => {
                MultiplierSymbol::Sum(js.iter().map(|&j| (1.0, MultiplierSymbol::Riesz2 { i: j, j })).collect())
            }
            OperatorKind::Laplace(a) => MultiplierSymbol::Laplace(a.clone()),
            OperatorKind::Composite(parts) => MultiplierSymbol::Product(parts.iter().map(|p| p.symbol()).collect()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            OperatorKind::Identity => "identity".into(),
            OperatorKind::Riesz2 { i, j } => format!("riesz2({},{})", i + 1, j + 1),
            OperatorKind::SaConstant(a) => format!("sa_constant({:?})", a.as_slice()),
            OperatorKind::RieszSquareSum(js) => {
                format!("riesz_square_sum({:?})", js.iter().map(|j| j + 1).collect::<Vec<_>>())
            }
            OperatorKind::Laplace(a) => format!("laplace({a:?})"),
            OperatorKind::Composite(parts) => {
                format!("composite[{}]", parts.iter().map(|p| p.label()).collect::<Vec<_>>().join(", "))
            }
        }
    }
}

/// A multiplier applied on the full `G^d` grid torus with every grid
/// frequency, `G ≥ 2K+2`.
///
/// The symbol table is real and even. On even grids the Nyquist frequency
/// `G/2` stands for both `±G/2`; its symbol is averaged over the sign flips of
/// the Nyquist components so the discrete operator stays real and
/// self-adjoint.
#[derive(Debug, Clone)]
pub struct OperatorHandle {
    pub kind: OperatorKind,
    pub dim: usize,
    pub bandwidth: usize,
    pub grid: usize,
    table: Vec<f64>,
    plan: SpectralPlan,
}

impl OperatorHandle {
    pub fn new(kind: OperatorKind, dim: usize, bandwidth: usize, grid: Option<usize>) -> Result<Self> {
        let grid = grid.unwrap_or(2 * bandwidth + 2);
        if grid < 2 * bandwidth + 2 {
            return Err(Error::domain(format!("grid {grid} below the alias-free size {}", 2 * bandwidth + 2)));
        }
        let symbol = kind.symbol();
        symbol.validate(dim)?;
        let n = grid.pow(dim as u32);
        let half = grid as i64 / 2;
        let mut table = Vec::with_capacity(n);
        let mut idx = vec![0usize; dim];
        for flat in 0..n {
            let mut r = flat;
            for a in (0..dim).rev() {
                idx[a] = r % grid;
                r /= grid;
            }
            let k: Vec<i64> = idx.iter().map(|&j| if (j as i64) <= half { j as i64 } else { j as i64 - grid as i64 }).collect();
            let nyq: Vec<usize> = (0..dim).filter(|&a| grid.is_multiple_of(2) && k[a] == half).collect();
            let mut acc = 0.0;
            for mask in 0..(1usize << nyq.len()) {
                let mut kk = k.clone();
                for (b, &a) in nyq.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        kk[a] = -kk[a];
                    }
                }
                acc += symbol.value(&kk)?;
            }
            table.push(acc / (1usize << nyq.len()) as f64);
        }
        Ok(OperatorHandle { kind, dim, bandwidth, grid, table, plan: SpectralPlan::new(grid) })
    }

    pub fn points(&self) -> usize {
        self.table.len()
    }

    /// `max |m|` over the grid frequencies, the exact `L² → L²` norm.
    pub fn symbol_sup(&self) -> f64 {
        self.table.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Grid frequency (in `(−G/2, G/2]`) where `|m|` peaks.
    pub fn peak_mode(&self) -> Vec<i64> {
        let (flat, _) = self.table.iter().enumerate().fold((0, -1.0), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best });
        let half = self.grid as i64 / 2;
        let mut r = flat;
        let mut k = vec![0i64; self.dim];
        for a in (0..self.dim).rev() {
            let j = (r % self.grid) as i64;
            k[a] = if j <= half { j } else { j - self.grid as i64 };
            r /= self.grid;
        }
        k
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len(self.points(), u.len())?;
        let mut buf: Vec<Complex64> = u.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        self.plan.transform(&mut buf, self.dim, Direction::Forward);
        for (z, m) in buf.iter_mut().zip(&self.table) {
            *z *= *m;
        }
        self.plan.transform(&mut buf, self.dim, Direction::Inverse);
        let norm = 1.0 / buf.len() as f64;
        Ok(buf.into_iter().map(|z| z.re * norm).collect())
    }

    /// `‖T u‖_p / ‖u‖_p`.
    pub fn ratio(&self, u: &[f64], p: f64) -> Result<f64> {
        let den = lp_norm(u, p)?;
        if den == 0.0 {
            return Err(Error::ZeroDenominator);
        }
        Ok(lp_norm(&self.apply(u)?, p)? / den)
    }

    /// `cos(2π k·x)` on the grid.
    pub fn cosine_field(&self, k: &[i64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        (0..self.points())
            .map(|i| {
                grid_point(i, self.dim, self.grid, &mut x);
                (2.0 * std::f64::consts::PI * k.iter().zip(&x).map(|(a, b)| *a as f64 * b).sum::<f64>()).cos()
            })
            .collect()
    }

    pub fn random_field(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.points()).map(|_| standard_normal(&mut rng)).collect()
    }
}

/// Starting field of the power iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum StartField {
    Seed(u64),
    /// `cos(2πk·x)` at the frequency where the symbol peaks.
    PeakMode,
    Field(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationOptions {
    pub max_iter: usize,
    /// Stop once the ratio gains less than `tol·ratio` in a step.
    pub tol: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions { max_iter: 2000, tol: 1e-13 }
    }
}

/// Lower bound on `‖T‖_{p→p}` with its witness.
#[derive(Debug, Clone, Serialize)]
pub struct NormEstimate {
    pub p: f64,
    pub value: f64,
    pub iterations: usize,
    /// Ratio gain of the last step.
    pub residual: f64,
    pub converged: bool,
    pub bound: Option<f64>,
    pub margin: Option<f64>,
    pub start: String,
    pub witness_checksum: String,
    #[serde(skip)]
    pub witness: GridField,
}

impl NormEstimate {
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self.margin = Some(bound - self.value);
        self
    }
}

fn checksum(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Duality-map power iteration for `‖T‖_{p→p}`.
pub fn opnorm_lp(op: &OperatorHandle, p: f64, opts: &IterationOptions, start: &StartField) -> Result<NormEstimate> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::domain(format!("operator norm needs 1 < p < ∞, got {p}")));
    }
    let q = p / (p - 1.0);
    let (mut u, label) = match start {
        StartField::Seed(s) => (op.random_field(*s), format!("seed:{s}")),
        StartField::PeakMode => {
            let k = op.peak_mode();
            (op.cosine_field(&k), format!("peak:{k:?}"))
        }
        StartField::Field(f) => {
            crate::error::check_len(op.points(), f.len())?;
            (f.clone(), "field".to_string())
        }
    };
    let n0 = lp_norm(&u, p)?;
    if n0 == 0.0 {
        return Err(Error::domain("starting field is zero"));
    }
    u.iter_mut().for_each(|v| *v /= n0);
    let mut tu = op.apply(&u)?;
    let mut ratio = lp_norm(&tu, p)?;
    let mut iterations = 0;
    let mut residual = 0.0;
    let mut converged = ratio == 0.0;
    while !converged && iterations < opts.max_iter {
        let w = dual_map(&tu, p)?;
        let z = op.apply(&w)?;
        let u_new = dual_map(&z, q)?;
        let tu_new = op.apply(&u_new)?;
        let r_new = lp_norm(&tu_new, p)? / lp_norm(&u_new, p)?;
        iterations += 1;
        if r_new < ratio * (1.0 - ASCENT_SLACK) {
            return Err(Error::AscentViolation { iteration: iterations, before: ratio, after: r_new });
        }
        residual = (r_new - ratio).max(0.0);
        if r_new >= ratio {
            u = u_new;
            tu = tu_new;
            ratio = r_new;
        }
        converged = residual <= opts.tol * ratio;
    }
    let value = op.ratio(&u, p)?;
    Ok(NormEstimate {
        p,
        value,
        iterations,
        residual,
        converged,
        bound: None,
        margin: None,
        start: label,
        witness_checksum: checksum(&u),
        witness: GridField { dim: op.dim, size: op.grid, values: u },
    })
}

/// Outcome of [`bound_check`].
#[derive(Debug, Clone, Serialize)]
pub struct BoundVerdict {
    pub operator: String,
    pub p: f64,
    pub bound: f64,
    pub best: f64,
    pub margin: f64,
    pub pass: bool,
    pub runs: Vec<NormEstimate>,
}

/// Seeds of the default random starts.
pub const DEFAULT_SEEDS: [u64; 3] = [0x5eed_0001, 0x5eed_0002, 0x5eed_0003];

/// Runs [`opnorm_lp`] from the given random starts plus the peak-mode start,
/// concurrently, and passes iff the best lower bound is `≤ bound + 1e−9`.
pub fn bound_check(op: &OperatorHandle, p: f64, bound: f64, seeds: &[u64], opts: &IterationOptions) -> Result<BoundVerdict> {
    if seeds.len() < 3 {
        return Err(Error::domain("bound checks use at least three random starts"));
    }
    let mut starts: Vec<StartField> = seeds.iter().map(|s| StartField::Seed(*s)).collect();
    starts.push(StartField::PeakMode);
    let runs = starts.par_iter().map(|s| opnorm_lp(op, p, opts, s).map(|e| e.with_bound(bound))).collect::<Result<Vec<_>>>()?;
    let best = runs.iter().map(|r| r.value).fold(0.0, f64::max);
    Ok(BoundVerdict { operator: op.kind.label(), p, bound, best, margin: bound - best, pass: best <= bound + 1e-9, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn lp_norm_examples() {
        assert!((lp_norm(&[-2.5; 7], 3.0).unwrap() - 2.5).abs() < 1e-15);
        let signs: Vec<f64> = (0..64).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        for p in [1.0, 1.5, 4.0] {
            assert!((lp_norm(&signs, p).unwrap() - 1.0).abs() < 1e-15);
        }
        let g = GridField::from_fn(2, 16, |x| (2.0 * std::f64::consts::PI * x[0]).cos());
        assert!((lp_norm(&g.values, 2.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(lp_norm(&[1.0], 0.5).is_err());
    }

    #[test]
    fn dual_map_pairs_to_norm() {
        let v = vec![0.3, -1.2, 0.0, 2.0, -0.1];
        let p = 3.0;
        let w = dual_map(&v, p).unwrap();
        let pairing: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / v.len() as f64;
        assert!((pairing - lp_norm(&v, p).unwrap()).abs() < 1e-14);
        assert!((lp_norm(&w, 1.5).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(w[2], 0.0);
    }

    #[test]
    fn identity_has_unit_norm() {
        let op = OperatorHandle::new(OperatorKind::Identity, 2, 4, None).unwrap();
        for p in [4.0 / 3.0, 2.0, 5.0] {
            let e = opnorm_lp(&op, p, &IterationOptions::default(), &StartField::Seed(1)).unwrap();
            assert!((e.value - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn grid_below_alias_free_size_is_rejected() {
        assert!(OperatorHandle::new(OperatorKind::Identity, 2, 4, Some(9)).is_err());
    }

    #[test]
    fn operator_is_self_adjoint_and_real() {
        let op = OperatorHandle::new(OperatorKind::Riesz2 { i: 0, j: 1 }, 2, 3, None).unwrap();
        let u = op.random_field(3);
        let v = op.random_field(4);
        let (tu, tv) = (op.apply(&u).unwrap(), op.apply(&v).unwrap());
        let a: f64 = tu.iter().zip(&v).map(|(x, y)| x * y).sum();
        let b: f64 = u.iter().zip(&tv).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn l2_estimate_is_symbol_sup() {
        let op = OperatorHandle::new(OperatorKind::Riesz2 { i: 0, j: 1 }, 2, 8, None).unwrap();
        let e = opnorm_lp(&op, 2.0, &IterationOptions::default(), &StartField::Seed(9)).unwrap();
        assert!((e.value - 0.5).abs() < 1e-8, "{}", e.value);
        assert!((op.symbol_sup() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn witness_reproduces_value() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let op = OperatorHandle::new(OperatorKind::SaConstant(a), 2, 6, None).unwrap();
        let e = opnorm_lp(&op, 4.0, &IterationOptions { max_iter: 200, tol: 1e-12 }, &StartField::Seed(2)).unwrap();
        let again = op.ratio(&e.witness.values, 4.0).unwrap();
        assert!((again - e.value).abs() <= 1e-12 * e.value);
        assert!(e.value <= 3.0 + 1e-9);
    }

    #[test]
    fn bound_check_passes_for_riesz_square() {
        let op = OperatorHandle::new(OperatorKind::RieszSquareSum(vec![0]), 2, 6, None).unwrap();
        let v = bound_check(&op, 3.0, 2.0, &DEFAULT_SEEDS, &IterationOptions { max_iter: 300, tol: 1e-12 }).unwrap();
        assert!(v.pass, "{v:?}");
        assert_eq!(v.runs.len(), 4);
        assert!(bound_check(&op, 3.0, 2.0, &DEFAULT_SEEDS[..2], &IterationOptions::default()).is_err());
    }
}
