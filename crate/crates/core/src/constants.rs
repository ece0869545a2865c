//! Explicit constants of the martingale-transform bounds.
//!
//! `p* = max(p, p/(p−1))`; `p* − 1` is the sharp constant for transforms by
//! predictable sequences with values in `[−1, 1]`. The remaining functions
//! evaluate the Choi asymptotic expansion, the two-sided estimate for
//! `C_{p,b,B}` (transforms with values in `[b, B]`) and the explicit
//! constants available when a potential is present.

use serde::Serialize;

use crate::error::{Error, Result};

fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("exponent must satisfy 1 < p < ∞, got {p}")))
    }
}

/// A Lebesgue exponent `p ∈ (1, ∞)` together with its conjugate `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentPair {
    pub p: f64,
    pub q: f64,
}

impl ExponentPair {
    pub fn new(p: f64) -> Result<Self> {
        check_exponent(p)?;
        Ok(ExponentPair { p, q: p / (p - 1.0) })
    }

    pub fn conjugate(&self) -> ExponentPair {
        ExponentPair { p: self.q, q: self.p }
    }

    pub fn pstar(&self) -> f64 {
        self.p.max(self.q)
    }

    pub fn pstar_minus_one(&self) -> f64 {
        if self.p <= 2.0 {
            1.0 / (self.p - 1.0)
        } else {
            self.p - 1.0
        }
    }
}

pub fn pstar(p: f64) -> Result<f64> {
    Ok(ExponentPair::new(p)?.pstar())
}

/// `p* − 1`, evaluated branchwise as `1/(p−1)` on `(1, 2]` and `p − 1` on
/// `[2, ∞)` so that both branches are exact where they are simple.
pub fn pstar_minus_one(p: f64) -> Result<f64> {
    Ok(ExponentPair::new(p)?.pstar_minus_one())
}

/// `ln((1 + e^{−2})/2)`, the constant term shared by the Choi expansion.
pub fn choi_log_term() -> f64 {
    ((1.0 + (-2.0f64).exp()) / 2.0).ln()
}

/// Second coefficient `α₂` of the Choi expansion.
pub fn choi_alpha2() -> f64 {
    let l = choi_log_term();
    let r = (-2.0f64).exp() / (1.0 + (-2.0f64).exp());
    l * l + 0.5 * l - 2.0 * r * r
}

/// Three-term truncation `p/2 + ½ ln((1+e^{−2})/2) + α₂/p` of the asymptotic
/// series for Choi's constant `c_p`.
///
/// This is an approximation for large `p`, not a certified bound: the series
/// carries no remainder estimate and its value for moderate `p` (say `p ≤ 4`)
/// should be read as indicative only. Bound checks use [`cpbb_bounds`].
pub fn choi_asymptotic(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(p / 2.0 + 0.5 * choi_log_term() + choi_alpha2() / p)
}

/// Two-sided estimate of `C_{p,b,B}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantBounds {
    pub lower: f64,
    pub upper: f64,
    pub exact: Option<f64>,
}

impl ConstantBounds {
    pub fn scaled(&self, s: f64) -> ConstantBounds {
        ConstantBounds { lower: s * self.lower, upper: s * self.upper, exact: self.exact.map(|e| s * e) }
    }
}

/// Bounds on the best constant `C_{p,b,B}` for transforms by predictable
/// sequences with values in `[b, B]`:
///
/// ```text
/// max{ ((B−b)/2)(p*−1), max{|B|,|b|} } ≤ C_{p,b,B} ≤ max{B, |b|}(p*−1)
/// ```
///
/// The upper bound is taken as written, with `max{B, |b|}`; ranges with
/// `B ≤ 0` are rejected since for them that expression no longer dominates
/// the lower bound. When `b = −B` the constant is known exactly,
/// `C_{p,−B,B} = B(p*−1)`.
pub fn cpbb_bounds(p: f64, b: f64, big_b: f64) -> Result<ConstantBounds> {
    let pair = ExponentPair::new(p)?;
    if !(b.is_finite() && big_b.is_finite()) || b >= big_b {
        return Err(Error::domain(format!("need finite b < B, got b={b}, B={big_b}")));
    }
    if big_b <= 0.0 {
        return Err(Error::domain(format!("upper bound max{{B,|b|}}(p*-1) is only used for B > 0, got B={big_b}")));
    }
    let c = pair.pstar_minus_one();
    let lower = (((big_b - b) / 2.0) * c).max(big_b.abs().max(b.abs()));
    let upper = big_b.max(b.abs()) * c;
    let exact = if b == -big_b {
        Some(big_b * c)
    } else if lower == upper {
        Some(upper)
    } else {
        None
    };
    Ok(ConstantBounds { lower, upper, exact })
}

/// Explicit constant `8‖A‖(p*−1)p⁴/(p−1)²` for `S_A` with a potential.
pub fn schrodinger_explicit_bound(p: f64, norm_a: f64) -> Result<f64> {
    let pair = ExponentPair::new(p)?;
    if !(norm_a.is_finite() && norm_a >= 0.0) {
        return Err(Error::domain(format!("matrix norm must be finite and nonnegative, got {norm_a}")));
    }
    Ok(8.0 * norm_a * pair.pstar_minus_one() * p.powi(4) / ((p - 1.0) * (p - 1.0)))
}

/// `2^{2−1/p} p²/(p−1)`: the `L^p` bound (in units of `‖f‖_p`) for the
/// untransformed stochastic integral `Σ_i ∫ (X_i P_{T−t} f)(Y_t) dB^i_t`.
pub fn integral_lp_constant(p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(2f64.powf(2.0 - 1.0 / p) * p * p / (p - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // mpmath, 40 digits: L = ln((1+e^-2)/2), α₂ = L² + L/2 − 2(e^-2/(1+e^-2))²
    const ALPHA2_ORACLE: f64 = 0.009_075_889_932_781_910_712;
    const CHOI_P20_ORACLE: f64 = 9.717_344_209_738_152_689;
    const CHOI_P2_ORACLE: f64 = 0.721_428_360_207_904_548_9;

    #[test]
    fn pstar_examples() {
        assert_eq!(pstar(3.0).unwrap(), 3.0);
        assert_eq!(pstar_minus_one(3.0).unwrap(), 2.0);
        assert_eq!(pstar_minus_one(2.0).unwrap(), 1.0);
        assert_eq!(pstar(1.5).unwrap(), 3.0);
        assert_eq!(pstar_minus_one(1.5).unwrap(), 2.0);
    }

    #[test]
    fn domain_errors() {
        for p in [1.0, 0.5, -2.0, f64::NAN, f64::INFINITY] {
            assert!(pstar(p).is_err(), "p={p}");
            assert!(choi_asymptotic(p).is_err());
            assert!(integral_lp_constant(p).is_err());
            assert!(schrodinger_explicit_bound(p, 1.0).is_err());
        }
        assert!(schrodinger_explicit_bound(2.0, -0.1).is_err());
        assert!(cpbb_bounds(2.0, 1.0, 1.0).is_err());
        assert!(cpbb_bounds(2.0, 2.0, 1.0).is_err());
        assert!(cpbb_bounds(2.0, -3.0, -1.0).is_err());
    }

    #[test]
    fn choi_series_matches_oracle() {
        assert!((choi_alpha2() - ALPHA2_ORACLE).abs() < 1e-15);
        assert!((choi_alpha2() - 0.009).abs() < 1e-4);
        assert!((choi_asymptotic(20.0).unwrap() - CHOI_P20_ORACLE).abs() < 1e-12);
        assert!((choi_asymptotic(2.0).unwrap() - CHOI_P2_ORACLE).abs() < 1e-12);
    }

    #[test]
    fn cpbb_examples() {
        for p in [4.0 / 3.0, 1.5, 2.0, 3.0, 4.0] {
            let b = cpbb_bounds(p, -1.0, 1.0).unwrap();
            assert_eq!(b.exact, Some(pstar_minus_one(p).unwrap()));
        }
        let b = cpbb_bounds(2.0, 0.0, 1.0).unwrap();
        assert_eq!((b.lower, b.upper, b.exact), (1.0, 1.0, Some(1.0)));
        let b = cpbb_bounds(4.0, 0.0, 1.0).unwrap();
        assert_eq!(b.upper, 3.0);
        assert_eq!(b.exact, None);
    }

    #[test]
    fn explicit_bound_examples() {
        assert_eq!(schrodinger_explicit_bound(2.0, 1.0).unwrap(), 128.0);
        assert_eq!(schrodinger_explicit_bound(3.0, 0.0).unwrap(), 0.0);
        assert!((schrodinger_explicit_bound(4.0, 2.0).unwrap() - 12288.0 / 9.0).abs() < 1e-9);
        assert!((integral_lp_constant(2.0).unwrap() - 11.313_708_498_984_76).abs() < 1e-12);
        assert!((integral_lp_constant(3.0).unwrap() - 14.286_609_467_713_795).abs() < 1e-12);
        assert!(integral_lp_constant(1.0 + 1e-9).unwrap().is_finite());
    }

    #[test]
    fn pstar_is_conjugation_invariant_on_grid() {
        for i in 0..100 {
            let p = 1.05 + 0.1 * i as f64;
            let pair = ExponentPair::new(p).unwrap();
            let a = pstar(p).unwrap();
            let b = pstar(pair.q).unwrap();
            assert!((a - b).abs() <= 1e-12 * a, "p={p}: {a} vs {b}");
        }
    }

    #[test]
    fn cpbb_symmetric_case_is_exact() {
        for a in [0.5, 1.0, 2.0] {
            for p in [1.2, 2.0, 3.5] {
                let b = cpbb_bounds(p, -a, a).unwrap();
                assert_eq!(b.exact, Some(a * pstar_minus_one(p).unwrap()));
            }
        }
    }

    proptest! {
        #[test]
        fn cpbb_lower_below_upper(p in 1.01f64..20.0, b in -5.0f64..5.0, width in 0.01f64..5.0) {
            let big_b = b + width;
            prop_assume!(big_b > 0.0);
            let c = cpbb_bounds(p, b, big_b).unwrap();
            prop_assert!(c.lower <= c.upper * (1.0 + 1e-15));
            if let Some(e) = c.exact {
                prop_assert_eq!(e, c.upper);
            }
        }

        #[test]
        fn cpbb_is_scale_covariant(p in 1.01f64..20.0, b in -5.0f64..5.0, width in 0.01f64..5.0, s in 0.01f64..100.0) {
            let big_b = b + width;
            prop_assume!(big_b > 0.0);
            let base = cpbb_bounds(p, b, big_b).unwrap().scaled(s);
            let scaled = cpbb_bounds(p, s * b, s * big_b).unwrap();
            prop_assert!((base.lower - scaled.lower).abs() <= 1e-12 * base.lower.abs());
            prop_assert!((base.upper - scaled.upper).abs() <= 1e-12 * base.upper.abs());
        }
    }
}
