use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::stats::MeanSe;

/// Bounded stopping rule on a discrete grid, always capped at the last index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoppingRule {
    Deterministic {
        step: usize,
    },
    /// First `n` with `N_n ≥ level`.
    FirstHit {
        level: f64,
    },
}

impl StoppingRule {
    fn stop(&self, n_path: &[f64]) -> usize {
        let last = n_path.len() - 1;
        match *self {
            StoppingRule::Deterministic { step } => step.min(last),
            StoppingRule::FirstHit { level } => n_path.iter().position(|x| *x >= level).unwrap_or(last),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisRecord {
    pub rule: StoppingRule,
    pub n_tau: MeanSe,
    pub a_tau: MeanSe,
    /// `mean(N_τ − A_τ) ≤ 3·SE`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LenglartReport {
    pub k: f64,
    pub factor: f64,
    pub hypotheses: Vec<HypothesisRecord>,
    pub hypothesis_holds: bool,
    /// `E[(sup N)^k]`.
    pub lhs: MeanSe,
    /// `((2−k)/(1−k)) E[A_T^k]`.
    pub rhs: MeanSe,
    pub conclusion_holds: bool,
    /// The conclusion holds, or the empirical hypothesis failed.
    pub pass: bool,
}

/// Domination inequality: if `E[N_τ] ≤ E[A_τ]` for bounded stopping times
/// then `E[(sup N)^k] ≤ ((2−k)/(1−k)) E[A_T^k]` for `k ∈ (0, 1)`.
///
/// Both comparisons are paired per path and decided at 3 standard errors.
pub fn lenglart_check(n: &[Vec<f64>], a: &[Vec<f64>], rules: &[StoppingRule], k: f64) -> Result<LenglartReport> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::domain(format!("exponent k must lie in (0, 1), got {k}")));
    }
    check_len(n.len(), a.len())?;
    if n.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    for (np, ap) in n.iter().zip(a) {
        if np.len() != ap.len() || np.is_empty() {
            return Err(Error::GridMismatch("N and A paths must share a nonempty grid".into()));
        }
        if np.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::domain("N must be nonnegative"));
        }
        if ap.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::domain("A must be nondecreasing"));
        }
    }
    let factor = (2.0 - k) / (1.0 - k);
    let mut hypotheses = Vec::with_capacity(rules.len());
    for rule in rules {
        let taus: Vec<usize> = n.iter().map(|p| rule.stop(p)).collect();
        let nt: Vec<f64> = n.iter().zip(&taus).map(|(p, t)| p[*t]).collect();
        let at: Vec<f64> = a.iter().zip(&taus).map(|(p, t)| p[*t]).collect();
        let diff = MeanSe::of_iter(nt.iter().zip(&at).map(|(x, y)| x - y))?;
        hypotheses.push(HypothesisRecord {
            rule: *rule,
            n_tau: MeanSe::of(&nt)?,
            a_tau: MeanSe::of(&at)?,
            holds: diff.mean <= 3.0 * diff.se,
        });
    }
    let sup_k: Vec<f64> = n.iter().map(|p| p.iter().fold(0.0f64, |m, x| m.max(*x)).powf(k)).collect();
    let a_k: Vec<f64> = a.iter().map(|p| factor * p[p.len() - 1].powf(k)).collect();
    let diff = MeanSe::of_iter(sup_k.iter().zip(&a_k).map(|(x, y)| x - y))?;
    let hypothesis_holds = hypotheses.iter().all(|h| h.holds);
    let conclusion_holds = diff.mean <= 3.0 * diff.se;
    Ok(LenglartReport {
        k,
        factor,
        hypotheses,
        hypothesis_holds,
        lhs: MeanSe::of(&sup_k)?,
        rhs: MeanSe::of(&a_k)?,
        conclusion_holds,
        pass: conclusion_holds || !hypothesis_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_equal_paths() {
        let a: Vec<Vec<f64>> = (0..50).map(|i| (0..10).map(|n| (n * (i + 1)) as f64 * 0.01).collect()).collect();
        let rules = [StoppingRule::Deterministic { step: 4 }, StoppingRule::FirstHit { level: 0.2 }];
        let r = lenglart_check(&a, &a, &rules, 0.5).unwrap();
        assert_eq!(r.factor, 3.0);
        assert!(r.hypothesis_holds && r.conclusion_holds && r.pass);
        assert!(r.rhs.mean >= r.lhs.mean);
    }

    #[test]
    fn invalid_inputs() {
        let a = vec![vec![0.0, 1.0]];
        assert!(lenglart_check(&a, &a, &[], 1.0).is_err());
        assert!(lenglart_check(&a, &a, &[], 0.0).is_err());
        assert!(lenglart_check(&a, &[vec![1.0, 0.0]], &[], 0.5).is_err());
        assert!(lenglart_check(&[vec![-1.0, 0.0]], &a, &[], 0.5).is_err());
    }
}
