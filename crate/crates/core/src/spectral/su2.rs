//! Class functions on SU(2) and the second-order Riesz multiplier attached
//! to a pair of roots.
//!
//! Irreducible representations are indexed by their dimension `n ≥ 1`, with
//! highest weight `λ_n = (n−1)α/2` and half-sum of positive roots `ρ = α/2`.
//! Weights live on the line spanned by `α`, so inner products reduce to
//! products of coordinates along that line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite character expansion `f = Σ_{n=1}^{N} a_n χ_n`; `coeffs[n−1] = a_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SU2ClassFunction {
    pub coeffs: Vec<f64>,
}

/// Which root `β` is paired with `α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootSign {
    /// `β = α`
    Same,
    /// `β = −α`
    Opposite,
}

impl RootSign {
    fn coordinate(self) -> f64 {
        match self {
            RootSign::Same => 1.0,
            RootSign::Opposite => -1.0,
        }
    }
}

/// Root data: `‖α‖` (the normalisation is a free parameter) and `β = ±α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Su2Roots {
    pub alpha_norm: f64,
    pub beta: RootSign,
}

impl Default for Su2Roots {
    fn default() -> Self {
        Su2Roots { alpha_norm: 1.0, beta: RootSign::Same }
    }
}

impl Su2Roots {
    pub fn beta_norm(&self) -> f64 {
        self.alpha_norm
    }

    /// `⟨λ_n,α⟩⟨λ_n,β⟩ / (‖λ_n+ρ‖² − ‖ρ‖²)` for `n ≥ 2`.
    pub fn symbol(&self, n: usize) -> Result<f64> {
        if n < 2 {
            return Err(Error::domain("the trivial representation has a vanishing denominator"));
        }
        let a = self.alpha_norm;
        let lambda = (n as f64 - 1.0) * a / 2.0;
        let rho = a / 2.0;
        let beta = self.beta.coordinate() * a;
        Ok((lambda * a) * (lambda * beta) / ((lambda + rho).powi(2) - rho * rho))
    }

    /// `sup_{2 ≤ n ≤ N} |m(n)|`.
    pub fn sup_abs(&self, max_n: usize) -> Result<f64> {
        (2..=max_n).try_fold(0.0f64, |acc, n| Ok(acc.max(self.symbol(n)?.abs())))
    }
}

impl SU2ClassFunction {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("class-function coefficients must be finite"));
        }
        Ok(SU2ClassFunction { coeffs })
    }

    pub fn truncation(&self) -> usize {
        self.coeffs.len()
    }

    /// Dimensions `n` with `a_n ≠ 0`.
    pub fn support(&self) -> Vec<usize> {
        self.coeffs.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(i, _)| i + 1).collect()
    }

    /// `Σ a_n²`: characters are orthonormal in `L²(SU(2))`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Value on the conjugacy class of `diag(e^{iθ}, e^{−iθ})`, using
    /// `χ_n(θ) = sin(nθ)/sin θ`.
    pub fn eval(&self, theta: f64) -> f64 {
        let s = theta.sin();
        if s.abs() < 1e-12 {
            // χ_n(0) = n, χ_n(π) = (−1)^{n−1} n
            let sign: f64 = if theta.cos() < 0.0 { -1.0 } else { 1.0 };
            return self.coeffs.iter().enumerate().map(|(i, c)| c * (i + 1) as f64 * sign.powi(i as i32)).sum();
        }
        self.coeffs.iter().enumerate().map(|(i, c)| c * ((i + 1) as f64 * theta).sin() / s).sum()
    }

    /// `‖f‖_p^p` against Haar measure, which on class functions has density
    /// `(2/π) sin²θ` on `[0, π]`; midpoint rule with `m` nodes.
    pub fn lp_norm(&self, p: f64, nodes: usize) -> f64 {
        let h = PI / nodes as f64;
        let s: f64 = (0..nodes)
            .map(|j| {
                let t = (j as f64 + 0.5) * h;
                self.eval(t).abs().powf(p) * t.sin().powi(2)
            })
            .sum();
        (2.0 / PI * s * h).powf(1.0 / p)
    }
}

/// Applies the root-pair multiplier `a_n ↦ m(n) a_n`. The trivial
/// representation has no symbol, so `a_1` must be zero.
pub fn su2_multiplier_apply(f: &SU2ClassFunction, roots: &Su2Roots) -> Result<SU2ClassFunction> {
    if f.coeffs.first().is_some_and(|a1| *a1 != 0.0) {
        return Err(Error::domain("coefficient of the trivial representation must be zero"));
    }
    let coeffs = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| if i == 0 { Ok(0.0) } else { Ok(roots.symbol(i + 1)? * c) })
        .collect::<Result<Vec<_>>>()?;
    Ok(SU2ClassFunction { coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_examples() {
        let r = Su2Roots::default();
        assert!((r.symbol(2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let opp = Su2Roots { alpha_norm: 1.0, beta: RootSign::Opposite };
        assert!((opp.symbol(2).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert!((r.symbol(100_000).unwrap() - 1.0).abs() < 1e-4);
        assert!(r.symbol(1).is_err());
    }

    #[test]
    fn symbol_scales_quadratically() {
        let base = Su2Roots { alpha_norm: 1.3, beta: RootSign::Opposite };
        let scaled = Su2Roots { alpha_norm: 2.6, ..base };
        for n in 2..20 {
            assert!((scaled.symbol(n).unwrap() - 4.0 * base.symbol(n).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn trivial_coefficient_rejected() {
        let f = SU2ClassFunction::new(vec![1.0, 0.5]).unwrap();
        assert!(su2_multiplier_apply(&f, &Su2Roots::default()).is_err());
    }

    #[test]
    fn haar_norm_matches_coefficients() {
        let f = SU2ClassFunction::new(vec![0.0, 0.7, -0.2, 0.0, 1.1]).unwrap();
        let l2 = f.lp_norm(2.0, 4000);
        assert!((l2 * l2 - f.l2_norm_sq()).abs() < 1e-10);
        assert!((f.eval(1e-14) - f.eval(0.3e-6)).abs() < 1e-6);
    }
}
