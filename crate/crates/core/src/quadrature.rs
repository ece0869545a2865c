//! Time quadrature for the per-mode integrals of the spectral oracles.
//!
//! Integrands are of the form `a(t) e^{−rt}` with `a` bounded and piecewise
//! smooth. They are integrated with adaptive Gauss-Legendre panels on a
//! finite window split at the discontinuities of `a`, and the remainder on
//! `[T₀, ∞)` is added in closed form from the profile's tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule; nodes are Newton-refined roots of `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }
}

// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub panels: usize,
}

/// Adaptive bisection with a 20-point Gauss-Legendre rule per panel.
///
/// A panel is accepted when the one-panel and two-half-panel estimates agree
/// to `max(abs_tol, rel_tol·|estimate|)`.
pub fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("adaptive quadrature needs a finite interval"));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, error_estimate: 0.0, panels: 0 });
    }
    let rule = GaussLegendre::new(20);
    let mut out = QuadResult { value: 0.0, error_estimate: 0.0, panels: 0 };
    let whole = rule.integrate(f, a, b);
    refine(f, &rule, a, b, whole, abs_tol, rel_tol, 0, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn refine(
    f: &impl Fn(f64) -> f64,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    abs_tol: f64,
    rel_tol: f64,
    depth: usize,
    out: &mut QuadResult,
) -> Result<()> {
    let m = 0.5 * (a + b);
    let left = rule.integrate(f, a, m);
    let right = rule.integrate(f, m, b);
    let split = left + right;
    if !split.is_finite() {
        return Err(Error::Divergent(format!("non-finite integrand on [{a}, {b}]")));
    }
    let diff = (split - whole).abs();
    if diff <= abs_tol.max(rel_tol * split.abs()) || depth >= 40 {
        out.value += split;
        out.error_estimate += diff;
        out.panels += 1;
        return Ok(());
    }
    refine(f, rule, a, m, left, 0.5 * abs_tol, rel_tol, depth + 1, out)?;
    refine(f, rule, m, b, right, 0.5 * abs_tol, rel_tol, depth + 1, out)
}

/// Scalar time profile `a(t)` on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    /// `a(t) = c`.
    Constant { value: f64 },
    /// `a(t) = c·e^{−rt}`; `r < 0` is accepted only to be rejected by the
    /// integrability checks.
    Exponential { scale: f64, rate: f64 },
    /// `a(t) = c·1_{[start, end)}(t)`.
    Indicator { scale: f64, start: f64, end: f64 },
}

impl TimeProfile {
    pub fn constant(value: f64) -> Self {
        TimeProfile::Constant { value }
    }

    pub fn exponential(rate: f64) -> Self {
        TimeProfile::Exponential { scale: 1.0, rate }
    }

    pub fn indicator(start: f64, end: f64) -> Self {
        TimeProfile::Indicator { scale: 1.0, start, end }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant { value } => value,
            TimeProfile::Exponential { scale, rate } => scale * (-rate * t).exp(),
            TimeProfile::Indicator { scale, start, end } => {
                if t >= start && t < end {
                    scale
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup_t |a(t)|`; an error for profiles that grow without bound.
    pub fn sup_abs(&self) -> Result<f64> {
        match *self {
            TimeProfile::Constant { value } => Ok(value.abs()),
            TimeProfile::Exponential { scale, rate } => {
                if rate < 0.0 && scale != 0.0 {
                    Err(Error::Divergent(format!("profile e^{{-({rate})t}} is unbounded")))
                } else {
                    Ok(scale.abs())
                }
            }
            TimeProfile::Indicator { scale, start, end } => Ok(if end > start { scale.abs() } else { 0.0 }),
        }
    }

    /// Interior discontinuities.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            TimeProfile::Indicator { start, end, .. } => [start, end].into_iter().filter(|t| *t > 0.0).collect(),
            _ => Vec::new(),
        }
    }

    /// `∫_{t0}^∞ a(t) e^{−rate·t} dt` in closed form.
    pub fn laplace_tail(&self, rate: f64, t0: f64) -> Result<f64> {
        let exp_tail = |r: f64, c: f64| -> Result<f64> {
            if c == 0.0 {
                Ok(0.0)
            } else if r <= 0.0 {
                Err(Error::Divergent(format!("∫ e^{{-{r} t}} dt diverges")))
            } else {
                Ok(c * (-r * t0).exp() / r)
            }
        };
        match *self {
            TimeProfile::Constant { value } => exp_tail(rate, value),
            TimeProfile::Exponential { scale, rate: r } => exp_tail(rate + r, scale),
            TimeProfile::Indicator { scale, start, end } => {
                let lo = start.max(t0);
                if end <= lo || scale == 0.0 {
                    return Ok(0.0);
                }
                if rate == 0.0 {
                    return Ok(scale * (end - lo));
                }
                Ok(scale * ((-rate * lo).exp() - (-rate * end).exp()) / rate)
            }
        }
    }
}

/// Horizon of a time integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Horizon::Finite(t) if !(t.is_finite() && t >= 0.0) => Err(Error::domain(format!("horizon must be finite and ≥ 0, got {t}"))),
            _ => Ok(()),
        }
    }
}

/// How the time integral of a spectral oracle is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeQuadrature {
    /// Adaptive Gauss-Legendre on the finite part plus closed-form tail.
    Adaptive { abs_tol: f64, rel_tol: f64 },
    /// `Δ Σ_{j=1}^{n} h(jΔ)`, `Δ = T/n`: the exact expectation of an Itô sum
    /// with left-endpoint integrands on an `n`-step grid over `[0, T]`.
    GridRiemann { steps: usize },
}

impl Default for TimeQuadrature {
    fn default() -> Self {
        TimeQuadrature::Adaptive { abs_tol: 1e-15, rel_tol: 1e-13 }
    }
}

/// `∫_0^T a(t) e^{−rate·t} dt` for a profile `a`.
pub fn laplace_integral(profile: &TimeProfile, rate: f64, horizon: Horizon, quad: TimeQuadrature) -> Result<f64> {
    horizon.validate()?;
    profile.sup_abs()?;
    let h = |t: f64| profile.value(t) * (-rate * t).exp();
    match quad {
        TimeQuadrature::GridRiemann { steps } => {
            let t = match horizon {
                Horizon::Finite(t) => t,
                Horizon::Infinite => return Err(Error::domain("grid Riemann sums need a finite horizon")),
            };
            if steps == 0 {
                return Err(Error::domain("grid Riemann sum needs at least one step"));
            }
            let dt = t / steps as f64;
            Ok((1..=steps).map(|j| h(j as f64 * dt)).sum::<f64>() * dt)
        }
        TimeQuadrature::Adaptive { abs_tol, rel_tol } => {
            // Window beyond which the tail is added in closed form.
            let window = if rate > 0.0 { 40.0 / rate } else { 50.0 };
            let (end, tail) = match horizon {
                Horizon::Finite(t) if t <= window => (t, 0.0),
                Horizon::Finite(t) => (window, profile.laplace_tail(rate, window)? - profile.laplace_tail(rate, t)?),
                Horizon::Infinite => (window, profile.laplace_tail(rate, window)?),
            };
            let mut cuts = vec![0.0];
            cuts.extend(profile.breakpoints().into_iter().filter(|b| *b < end));
            cuts.push(end);
            let mut total = tail;
            for w in cuts.windows(2) {
                total += adaptive(&h, w[0], w[1], abs_tol, rel_tol)?.value;
            }
            Ok(total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(10);
        // ∫_0^2 x^19 dx = 2^20 / 20
        let v = rule.integrate(&|x: f64| x.powi(19), 0.0, 2.0);
        assert!((v - 2f64.powi(20) / 20.0).abs() < 1e-9 * v);
        let wsum: f64 = GaussLegendre::new(20).weights.iter().sum();
        assert!((wsum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_sharp_decay() {
        let r = 400.0;
        let q = adaptive(&|t: f64| (-r * t).exp(), 0.0, 1.0, 1e-16, 1e-14).unwrap();
        assert!((q.value - (1.0 - (-r).exp()) / r).abs() < 1e-15);
    }

    #[test]
    fn laplace_of_profiles_matches_closed_forms() {
        let quad = TimeQuadrature::default();
        for rate in [0.3, 1.0, 39.47, 700.0] {
            let c = laplace_integral(&TimeProfile::constant(1.0), rate, Horizon::Infinite, quad).unwrap();
            assert!((c - 1.0 / rate).abs() < 1e-13 / rate, "rate {rate}");
            let e = laplace_integral(&TimeProfile::exponential(1.0), rate, Horizon::Infinite, quad).unwrap();
            assert!((e - 1.0 / (rate + 1.0)).abs() < 1e-13 / rate);
            let i = laplace_integral(&TimeProfile::indicator(0.0, 1.0), rate, Horizon::Infinite, quad).unwrap();
            assert!((i - (1.0 - (-rate).exp()) / rate).abs() < 1e-13 / rate);
            let f = laplace_integral(&TimeProfile::constant(1.0), rate, Horizon::Finite(0.5), quad).unwrap();
            assert!((f - (1.0 - (-rate * 0.5).exp()) / rate).abs() < 1e-13 / rate);
        }
    }

    #[test]
    fn grid_riemann_sum_is_right_endpoint() {
        let q = TimeQuadrature::GridRiemann { steps: 4 };
        let v = laplace_integral(&TimeProfile::constant(1.0), 1.0, Horizon::Finite(1.0), q).unwrap();
        let expect: f64 = (1..=4).map(|j| (-(j as f64) / 4.0).exp()).sum::<f64>() / 4.0;
        assert_eq!(v, expect);
        assert!(laplace_integral(&TimeProfile::constant(1.0), 1.0, Horizon::Infinite, q).is_err());
    }

    #[test]
    fn unbounded_profiles_are_flagged() {
        let grow = TimeProfile::exponential(-2.0);
        assert!(grow.sup_abs().is_err());
        assert!(laplace_integral(&grow, 1.0, Horizon::Infinite, TimeQuadrature::default()).is_err());
        assert!(TimeProfile::constant(1.0).laplace_tail(0.0, 1.0).is_err());
    }
}
