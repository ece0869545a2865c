use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quadrature::{laplace_integral, Horizon, TimeProfile, TimeQuadrature};

const FOUR_PI2: f64 = 4.0 * PI * PI;

/// Squared frequency `|k|²`.
pub fn norm_sq(k: &[i64]) -> f64 {
    k.iter().map(|&a| (a * a) as f64).sum()
}

/// Heat eigenvalue `λ_k = 2π²|k|²`, so that `P_t e_k = e^{−λ_k t} e_k`.
pub fn heat_eigenvalue(k: &[i64]) -> f64 {
    2.0 * PI * PI * norm_sq(k)
}

/// `k^T A k / |k|²`, zero at `k = 0`.
fn rayleigh(a: &DMatrix<f64>, k: &[i64]) -> f64 {
    let n = norm_sq(k);
    if n == 0.0 {
        return 0.0;
    }
    quadratic_form(a, k) / n
}

fn quadratic_form(a: &DMatrix<f64>, k: &[i64]) -> f64 {
    let mut s = 0.0;
    for (i, &ki) in k.iter().enumerate() {
        for (j, &kj) in k.iter().enumerate() {
            s += a[(i, j)] * (ki * kj) as f64;
        }
    }
    s
}

/// Time-dependent coefficient matrix `A(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixProfile {
    Constant(DMatrix<f64>),
    /// `A(t) = a(t)·A₀`.
    Scaled {
        profile: TimeProfile,
        base: DMatrix<f64>,
    },
    /// Piecewise constant: `A(t) = matrices[i]` on `[times[i], times[i+1])`,
    /// the last matrix extending to infinity. `times[0]` must be 0.
    Tabulated {
        times: Vec<f64>,
        matrices: Vec<DMatrix<f64>>,
    },
}

impl MatrixProfile {
    pub fn dim(&self) -> usize {
        match self {
            MatrixProfile::Constant(a) => a.nrows(),
            MatrixProfile::Scaled { base, .. } => base.nrows(),
            MatrixProfile::Tabulated { matrices, .. } => matrices.first().map_or(0, |m| m.nrows()),
        }
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        match self {
            MatrixProfile::Constant(a) => a.clone(),
            MatrixProfile::Scaled { profile, base } => base * profile.value(t),
            MatrixProfile::Tabulated { times, matrices } => {
                let i = times.partition_point(|s| *s <= t).max(1) - 1;
                matrices[i].clone()
            }
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let check = |m: &DMatrix<f64>| -> Result<()> {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::domain(format!("matrix is {}x{}, expected {dim}x{dim}", m.nrows(), m.ncols())));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain("matrix has non-finite entries"));
            }
            Ok(())
        };
        match self {
            MatrixProfile::Constant(a) => check(a),
            MatrixProfile::Scaled { profile, base } => {
                profile.sup_abs()?;
                check(base)
            }
            MatrixProfile::Tabulated { times, matrices } => {
                if times.is_empty() || times.len() != matrices.len() {
                    return Err(Error::domain("tabulated profile needs one matrix per breakpoint"));
                }
                if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::domain("tabulated breakpoints must start at 0 and increase"));
                }
                matrices.iter().try_for_each(check)
            }
        }
    }

    /// `∫_0^T A(t) e^{−rate·t} dt`.
    pub fn laplace(&self, rate: f64, horizon: Horizon, quad: TimeQuadrature) -> Result<DMatrix<f64>> {
        match self {
            MatrixProfile::Constant(a) => Ok(a * laplace_integral(&TimeProfile::constant(1.0), rate, horizon, quad)?),
            MatrixProfile::Scaled { profile, base } => Ok(base * laplace_integral(profile, rate, horizon, quad)?),
            MatrixProfile::Tabulated { times, matrices } => {
                let mut out = DMatrix::zeros(matrices[0].nrows(), matrices[0].ncols());
                for (i, m) in matrices.iter().enumerate() {
                    let end = times.get(i + 1).copied().unwrap_or(f64::INFINITY);
                    let w = laplace_integral(&TimeProfile::indicator(times[i], end), rate, horizon, quad)?;
                    out += m * w;
                }
                Ok(out)
            }
        }
    }
}

/// The finite-horizon operator
///
/// ```text
/// S^T_A f = Σ_ij ∫_0^T P_t X_i* A_ij(t) X_j P_t f dt
/// ```
///
/// on the torus with `X_i = ∂_i`, `X_i* = −∂_i` and constant potential
/// `V ≡ −m`, so that `P_t = e^{−mt} e^{tΔ/2}`. Its symbol at mode `k` is
///
/// ```text
/// 4π² Σ_ij k_i k_j ∫_0^T A_ij(t) e^{−(4π²|k|² + 2m) t} dt.
/// ```
///
/// For constant `A`, `m = 0` and `T = ∞` this is `k^T A k / |k|²`, the
/// negative of the Riesz-composition symbol of [`super::sa_constant_apply`].
#[derive(Debug, Clone, PartialEq)]
pub struct SaOracle {
    pub profile: MatrixProfile,
    pub horizon: Horizon,
    /// `m ≥ 0` in `V ≡ −m`.
    pub potential: f64,
    pub quadrature: TimeQuadrature,
}

impl SaOracle {
    pub fn new(profile: MatrixProfile, horizon: Horizon) -> Self {
        SaOracle { profile, horizon, potential: 0.0, quadrature: TimeQuadrature::default() }
    }

    pub fn with_potential(mut self, m: f64) -> Self {
        self.potential = m;
        self
    }

    pub fn with_quadrature(mut self, quad: TimeQuadrature) -> Self {
        self.quadrature = quad;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        self.horizon.validate()?;
        if !(self.potential.is_finite() && self.potential >= 0.0) {
            return Err(Error::domain(format!("potential V ≡ −m needs m ≥ 0, got m={}", self.potential)));
        }
        self.profile.validate(dim)
    }

    pub fn value(&self, k: &[i64]) -> Result<f64> {
        let n = norm_sq(k);
        if n == 0.0 || self.horizon == Horizon::Finite(0.0) {
            return Ok(0.0);
        }
        let b = self.profile.laplace(FOUR_PI2 * n + 2.0 * self.potential, self.horizon, self.quadrature)?;
        Ok(FOUR_PI2 * quadratic_form(&b, k))
    }
}

/// A Fourier multiplier `e_k ↦ m(k) e_k` on the torus. Every symbol here is
/// real and even in `k`, so the operators are self-adjoint and map real
/// fields to real fields.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierSymbol {
    Identity,
    /// `e^{−2π²|k|²t}`
    Heat {
        t: f64,
    },
    /// `R_iR_j`: `−k_ik_j/|k|²` (0-based axes).
    Riesz2 {
        i: usize,
        j: usize,
    },
    /// `Σ_ij A_ij R_iR_j`: `−k^T A k/|k|²`.
    SaConstant(DMatrix<f64>),
    /// `T_a`: `−λ_k ∫_0^∞ a(t) e^{−2λ_k t} dt`.
    Laplace(TimeProfile),
    SaOracle(SaOracle),
    Product(Vec<MultiplierSymbol>),
    /// `Σ c_i m_i(k)`.
    Sum(Vec<(f64, MultiplierSymbol)>),
}

impl MultiplierSymbol {
    /// Checks the symbol against a torus dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            MultiplierSymbol::Identity => Ok(()),
            MultiplierSymbol::Heat { t } => {
                if t.is_finite() && *t >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::domain(format!("heat time must be ≥ 0, got {t}")))
                }
            }
            MultiplierSymbol::Riesz2 { i, j } => {
                if *i < dim && *j < dim {
                    Ok(())
                } else {
                    Err(Error::domain(format!("Riesz indices ({i},{j}) out of range for d={dim}")))
                }
            }
            MultiplierSymbol::SaConstant(a) => MatrixProfile::Constant(a.clone()).validate(dim),
            MultiplierSymbol::Laplace(a) => a.sup_abs().map(|_| ()),
            MultiplierSymbol::SaOracle(o) => o.validate(dim),
            MultiplierSymbol::Product(parts) => parts.iter().try_for_each(|s| s.validate(dim)),
            MultiplierSymbol::Sum(parts) => parts.iter().try_for_each(|(_, s)| s.validate(dim)),
        }
    }

    pub fn value(&self, k: &[i64]) -> Result<f64> {
        Ok(match self {
            MultiplierSymbol::Identity => 1.0,
            MultiplierSymbol::Heat { t } => (-heat_eigenvalue(k) * t).exp(),
            MultiplierSymbol::Riesz2 { i, j } => {
                let n = norm_sq(k);
                if n == 0.0 {
                    0.0
                } else {
                    -((k[*i] * k[*j]) as f64) / n
                }
            }
            MultiplierSymbol::SaConstant(a) => -rayleigh(a, k),
            MultiplierSymbol::Laplace(a) => {
                let lambda = heat_eigenvalue(k);
                if lambda == 0.0 {
                    0.0
                } else {
                    -lambda * laplace_integral(a, 2.0 * lambda, Horizon::Infinite, TimeQuadrature::default())?
                }
            }
            MultiplierSymbol::SaOracle(o) => o.value(k)?,
            MultiplierSymbol::Product(parts) => {
                let mut v = 1.0;
                for s in parts {
                    v *= s.value(k)?;
                }
                v
            }
            MultiplierSymbol::Sum(parts) => {
                let mut v = 0.0;
                for (c, s) in parts {
                    v += c * s.value(k)?;
                }
                v
            }
        })
    }

    /// `max |m(k)|` over the lattice cube `|k_a| ≤ band`.
    pub fn sup_abs(&self, dim: usize, band: usize) -> Result<f64> {
        let side = 2 * band + 1;
        let mut k = vec![0i64; dim];
        let mut best = 0.0f64;
        for idx in 0..side.pow(dim as u32) {
            let mut r = idx;
            for a in (0..dim).rev() {
                k[a] = (r % side) as i64 - band as i64;
                r /= side;
            }
            best = best.max(self.value(&k)?.abs());
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riesz_symbol_examples() {
        let r12 = MultiplierSymbol::Riesz2 { i: 0, j: 1 };
        assert_eq!(r12.value(&[1, 1]).unwrap(), -0.5);
        assert_eq!(r12.value(&[0, 0]).unwrap(), 0.0);
        assert!((r12.sup_abs(2, 6).unwrap() - 0.5).abs() < 1e-15);
        assert!(r12.validate(2).is_ok());
        assert!(r12.validate(1).is_err());
        for k in [[1, 0], [2, -3], [5, 7]] {
            let tr: f64 = (0..2).map(|i| MultiplierSymbol::Riesz2 { i, j: i }.value(&k).unwrap()).sum();
            assert!((tr + 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn tabulated_profile_lookup() {
        let a = DMatrix::identity(2, 2);
        let p = MatrixProfile::Tabulated { times: vec![0.0, 1.0], matrices: vec![a.clone(), a.clone() * 2.0] };
        assert!(p.validate(2).is_ok());
        assert_eq!(p.at(0.5)[(0, 0)], 1.0);
        assert_eq!(p.at(1.0)[(0, 0)], 2.0);
        assert_eq!(p.at(7.0)[(1, 1)], 2.0);
        let bad = MatrixProfile::Tabulated { times: vec![0.5], matrices: vec![a] };
        assert!(bad.validate(2).is_err());
    }

    #[test]
    fn tabulated_laplace_matches_pieces() {
        let a = DMatrix::identity(2, 2);
        let p = MatrixProfile::Tabulated { times: vec![0.0, 1.0], matrices: vec![a.clone(), a * 3.0] };
        let r = 2.0;
        let got = p.laplace(r, Horizon::Infinite, TimeQuadrature::default()).unwrap();
        let expect = (1.0 - (-r).exp()) / r + 3.0 * (-r).exp() / r;
        assert!((got[(0, 0)] - expect).abs() < 1e-13);
        assert_eq!(got[(0, 1)], 0.0);
    }
}
