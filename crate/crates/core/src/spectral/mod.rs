//! Exact Fourier computation on the flat torus `T^d = [0,1)^d`.
//!
//! Basis `e_k(x) = e^{2πik·x}`, generator `L = ½Δ`, so `P_t` has symbol
//! `e^{−2π²|k|²t}` and `X_i = ∂_i` has symbol `2πik_i`. Every multiplier
//! annihilates the mode `k = 0`.

mod field;
mod su2;
mod symbol;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

pub use field::{grid_point, Direction, FourierField, GridField, SpectralPlan, TrigTerm};
pub use su2::{su2_multiplier_apply, RootSign, SU2ClassFunction, Su2Roots};
pub use symbol::{heat_eigenvalue, norm_sq, MatrixProfile, MultiplierSymbol, SaOracle};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive, Horizon, TimeProfile};

fn apply(symbol: &MultiplierSymbol, f: &FourierField) -> Result<FourierField> {
    symbol.validate(f.dim())?;
    let mut err = None;
    let out = f.map_symbol(|k| match symbol.value(k) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

impl MultiplierSymbol {
    pub fn apply(&self, f: &FourierField) -> Result<FourierField> {
        apply(self, f)
    }
}

/// `P_t f`.
pub fn heat_semigroup(f: &FourierField, t: f64) -> Result<FourierField> {
    apply(&MultiplierSymbol::Heat { t }, f)
}

/// `(∂_1 f, …, ∂_d f)`.
pub fn gradient(f: &FourierField) -> Vec<FourierField> {
    (0..f.dim()).map(|i| f.map_complex_symbol(|k| Complex64::new(0.0, 2.0 * PI * k[i] as f64))).collect()
}

/// `R_iR_j f` with 0-based axes.
pub fn riesz2_apply(i: usize, j: usize, f: &FourierField) -> Result<FourierField> {
    apply(&MultiplierSymbol::Riesz2 { i, j }, f)
}

/// `Σ_ij A_ij R_iR_j f`.
pub fn sa_constant_apply(a: &DMatrix<f64>, f: &FourierField) -> Result<FourierField> {
    apply(&MultiplierSymbol::SaConstant(a.clone()), f)
}

/// `S^T_A f` by per-mode time quadrature; see [`SaOracle`].
pub fn sa_oracle(oracle: &SaOracle, f: &FourierField) -> Result<FourierField> {
    apply(&MultiplierSymbol::SaOracle(oracle.clone()), f)
}

/// `T_a f = ∫_0^∞ a(t) L P_{2t} f dt`.
pub fn laplace_multiplier_apply(a: &TimeProfile, f: &FourierField) -> Result<FourierField> {
    apply(&MultiplierSymbol::Laplace(a.clone()), f)
}

/// Result of [`bilinear_embedding`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BilinearValue {
    pub value: f64,
    /// Upper bound on the part of `[0, T]` beyond the quadrature window.
    pub tail_bound: f64,
    /// Quadrature window `[0, t0]`.
    pub window: f64,
    pub quadrature_error: f64,
}

/// Tolerances for [`bilinear_embedding`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearOptions {
    /// Points per axis of the spatial grid; default `max(4K+4, 32)`.
    pub grid: Option<usize>,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Target for the neglected tail.
    pub tail_tol: f64,
}

impl Default for BilinearOptions {
    fn default() -> Self {
        BilinearOptions { grid: None, abs_tol: 1e-14, rel_tol: 1e-12, tail_tol: 1e-14 }
    }
}

/// `∫_0^T ∫_{T^d} |∇P_t f| |∇P_t g| dμ dt`.
///
/// The inner integral is a grid average, exact up to the grid's resolution of
/// the (non-smooth) product of gradient magnitudes. The time integral runs to
/// `t0 = min(T, window)` by adaptive Gauss-Legendre; for nonzero `k` we have
/// `|∇P_t f| ≤ C_f e^{−2π²t}` with `C_f = Σ 2π|k||c_k|`, so the remainder is at
/// most `C_f C_g e^{−4π²t0}/(4π²)`, which fixes the window.
pub fn bilinear_embedding(f: &FourierField, g: &FourierField, horizon: Horizon, opts: &BilinearOptions) -> Result<BilinearValue> {
    f.check_compatible(g)?;
    horizon.validate()?;
    let dim = f.dim();
    let size = opts.grid.unwrap_or((4 * f.bandwidth() + 4).max(32));
    if size < 2 * f.bandwidth() + 2 {
        return Err(Error::domain(format!("grid {size} too coarse for bandwidth {}", f.bandwidth())));
    }
    let lip = |h: &FourierField| -> f64 { h.modes().map(|(k, c)| 2.0 * PI * norm_sq(&k).sqrt() * c.norm()).sum() };
    let (cf, cg) = (lip(f), lip(g));
    let rate = 4.0 * PI * PI;
    let t_tail = if cf * cg > 0.0 { ((cf * cg / (rate * opts.tail_tol)).ln() / rate).max(0.0) } else { 0.0 };
    let (window, tail_bound) = match horizon {
        Horizon::Finite(t) if t <= t_tail => (t, 0.0),
        _ => (t_tail, cf * cg * (-rate * t_tail).exp() / rate),
    };
    if window == 0.0 {
        return Ok(BilinearValue { value: 0.0, tail_bound, window, quadrature_error: 0.0 });
    }
    let plan = SpectralPlan::new(size);
    let (grad_f, grad_g) = (gradient(f), gradient(g));
    let points = size.pow(dim as u32);
    let magnitude = |grads: &[FourierField], t: f64| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; points];
        for gi in grads {
            let v = heat_semigroup(gi, t)?.to_complex_grid(size, &plan)?;
            for (a, z) in acc.iter_mut().zip(&v) {
                *a += z.re * z.re;
            }
        }
        Ok(acc.into_iter().map(f64::sqrt).collect())
    };
    let integrand = |t: f64| -> f64 {
        match (magnitude(&grad_f, t), magnitude(&grad_g, t)) {
            (Ok(a), Ok(b)) => a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / points as f64,
            _ => f64::NAN,
        }
    };
    let q = adaptive(&integrand, 0.0, window, opts.abs_tol, opts.rel_tol)?;
    if !q.value.is_finite() {
        return Err(Error::Divergent("bilinear integrand is not finite".into()));
    }
    Ok(BilinearValue { value: q.value, tail_bound, window, quadrature_error: q.error_estimate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::TimeQuadrature;

    fn cos1(dim: usize, band: usize) -> FourierField {
        let mut mode = vec![0; dim];
        mode[0] = 1;
        FourierField::real_trig(dim, band, &[TrigTerm::Cos { mode, amplitude: 1.0 }]).unwrap()
    }

    fn mixed() -> FourierField {
        FourierField::real_trig(
            2,
            3,
            &[
                TrigTerm::Cos { mode: vec![1, 0], amplitude: 1.0 },
                TrigTerm::Sin { mode: vec![1, 1], amplitude: 0.5 },
                TrigTerm::Cos { mode: vec![2, -3], amplitude: 0.3 },
                TrigTerm::Constant(0.7),
            ],
        )
        .unwrap()
    }

    fn max_diff(a: &FourierField, b: &FourierField) -> f64 {
        a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn heat_examples() {
        let f = mixed();
        assert_eq!(heat_semigroup(&f, 0.0).unwrap(), f);
        assert!(heat_semigroup(&f, -1.0).is_err());
        let e = FourierField::from_modes(2, 2, &[(vec![1, 0], Complex64::new(1.0, 0.0))]).unwrap();
        let pe = heat_semigroup(&e, 0.3).unwrap();
        assert!((pe.coeff(&[1, 0]).unwrap().re - (-2.0 * PI * PI * 0.3).exp()).abs() < 1e-16);
        let st = heat_semigroup(&heat_semigroup(&f, 0.01).unwrap(), 0.02).unwrap();
        assert!(max_diff(&st, &heat_semigroup(&f, 0.03).unwrap()) < 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let s = FourierField::real_trig(1, 2, &[TrigTerm::Sin { mode: vec![1], amplitude: 1.0 }]).unwrap();
        let d = &gradient(&s)[0];
        for x in [0.1, 0.45, 0.8] {
            assert!((d.eval_real(&[x]) - 2.0 * PI * (2.0 * PI * x).cos()).abs() < 1e-13);
        }
        let c = FourierField::real_trig(2, 2, &[TrigTerm::Constant(3.0)]).unwrap();
        assert!(gradient(&c).iter().all(|g| g.l2_norm_sq() == 0.0));
        let f = mixed();
        let parseval: f64 = f.modes().map(|(k, c)| (2.0 * PI * k[1] as f64).powi(2) * c.norm_sqr()).sum();
        assert!((gradient(&f)[1].l2_norm_sq() - parseval).abs() < 1e-12);
        assert!(gradient(&f)[0].is_real());
    }

    #[test]
    fn sa_constant_matches_riesz_and_trace() {
        let f = mixed();
        let mut a = DMatrix::zeros(2, 2);
        a[(0, 1)] = 1.0;
        assert!(max_diff(&sa_constant_apply(&a, &f).unwrap(), &riesz2_apply(0, 1, &f).unwrap()) < 1e-15);
        let id = sa_constant_apply(&DMatrix::identity(2, 2), &f).unwrap();
        let expect = f.map_symbol(|k| if norm_sq(k) == 0.0 { 0.0 } else { -1.0 });
        assert!(max_diff(&id, &expect) < 1e-15);
        assert!(sa_constant_apply(&DMatrix::identity(3, 3), &f).is_err());
    }

    #[test]
    fn sa_constant_symbol_in_eigen_range() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.3, -0.2]);
        let eig = a.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        let s = MultiplierSymbol::SaConstant(a);
        for k1 in -4i64..=4 {
            for k2 in -4i64..=4 {
                if k1 == 0 && k2 == 0 {
                    continue;
                }
                let m = s.value(&[k1, k2]).unwrap();
                assert!(m >= -hi - 1e-15 && m <= -lo + 1e-15);
            }
        }
    }

    #[test]
    fn oracle_infinite_horizon_is_negated_riesz_composition() {
        let f = mixed();
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
        let o = SaOracle::new(MatrixProfile::Constant(a.clone()), Horizon::Infinite);
        let got = sa_oracle(&o, &f).unwrap();
        let expect = sa_constant_apply(&a, &f).unwrap().scale(-1.0);
        assert!(max_diff(&got, &expect) < 1e-10);
        let zero = SaOracle::new(MatrixProfile::Constant(a), Horizon::Finite(0.0));
        assert_eq!(sa_oracle(&zero, &f).unwrap().l2_norm_sq(), 0.0);
    }

    #[test]
    fn oracle_converges_exponentially_in_horizon() {
        let f = cos1(2, 2);
        let a = DMatrix::identity(2, 2);
        let inf = sa_oracle(&SaOracle::new(MatrixProfile::Constant(a.clone()), Horizon::Infinite), &f).unwrap();
        for t in [0.02, 0.05, 0.1] {
            let fin = sa_oracle(&SaOracle::new(MatrixProfile::Constant(a.clone()), Horizon::Finite(t)), &f).unwrap();
            let gap = (inf.coeff(&[1, 0]).unwrap() - fin.coeff(&[1, 0]).unwrap()).re;
            assert!((gap - 0.5 * (-4.0 * PI * PI * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_exponential_profile_closed_form() {
        let f = cos1(2, 2);
        let o = SaOracle::new(
            MatrixProfile::Scaled { profile: TimeProfile::exponential(1.0), base: DMatrix::identity(2, 2) },
            Horizon::Infinite,
        );
        let got = sa_oracle(&o, &f).unwrap().coeff(&[1, 0]).unwrap().re;
        let four_pi2 = 4.0 * PI * PI;
        assert!((got - 0.5 * four_pi2 / (four_pi2 + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn potential_folds_into_rate() {
        let f = cos1(2, 2);
        let m = 1.0;
        let t = 0.5;
        let o = SaOracle::new(MatrixProfile::Constant(DMatrix::identity(2, 2)), Horizon::Finite(t)).with_potential(m);
        let r = 4.0 * PI * PI + 2.0 * m;
        let expect = 0.5 * 4.0 * PI * PI * (1.0 - (-r * t).exp()) / r;
        assert!((sa_oracle(&o, &f).unwrap().coeff(&[1, 0]).unwrap().re - expect).abs() < 1e-13);
        let grid = o.clone().with_quadrature(TimeQuadrature::GridRiemann { steps: 200 });
        let dt = t / 200.0;
        let riemann: f64 = (1..=200).map(|j| (-r * j as f64 * dt).exp()).sum::<f64>() * dt * 4.0 * PI * PI * 0.5;
        assert!((sa_oracle(&grid, &f).unwrap().coeff(&[1, 0]).unwrap().re - riemann).abs() < 1e-13);
    }

    #[test]
    fn laplace_constant_profile_is_half_projection() {
        let f = mixed();
        let got = laplace_multiplier_apply(&TimeProfile::constant(1.0), &f).unwrap();
        let expect = f.map_symbol(|k| if norm_sq(k) == 0.0 { 0.0 } else { -0.5 });
        assert!(max_diff(&got, &expect) < 1e-10);
        let zero = laplace_multiplier_apply(&TimeProfile::constant(0.0), &f).unwrap();
        assert_eq!(zero.l2_norm_sq(), 0.0);
        assert!(laplace_multiplier_apply(&TimeProfile::exponential(-1.0), &f).is_err());
    }

    #[test]
    fn multipliers_commute() {
        let f = mixed();
        let ops = [
            MultiplierSymbol::Heat { t: 0.01 },
            MultiplierSymbol::Riesz2 { i: 0, j: 1 },
            MultiplierSymbol::Laplace(TimeProfile::exponential(2.0)),
            MultiplierSymbol::SaConstant(DMatrix::from_row_slice(2, 2, &[1.0, -0.3, 0.2, 0.5])),
        ];
        for a in &ops {
            for b in &ops {
                let ab = a.apply(&b.apply(&f).unwrap()).unwrap();
                let ba = b.apply(&a.apply(&f).unwrap()).unwrap();
                assert!(max_diff(&ab, &ba) < 1e-12);
            }
        }
    }

    #[test]
    fn bilinear_self_pairing_is_parseval() {
        let f = cos1(2, 2);
        let v = bilinear_embedding(&f, &f, Horizon::Infinite, &BilinearOptions::default()).unwrap();
        // ∫_0^∞ ‖∇P_t f‖² dt = Σ |c_k|² 4π²|k|² / (4π²|k|²) = ‖f − mean‖²
        assert!((v.value - f.l2_norm_sq()).abs() < 1e-8, "{v:?}");
        assert!(v.tail_bound < 1e-13);
        let c = FourierField::real_trig(2, 2, &[TrigTerm::Constant(1.0)]).unwrap();
        assert_eq!(bilinear_embedding(&c, &f, Horizon::Infinite, &BilinearOptions::default()).unwrap().value, 0.0);
    }
}
