//! Sample means, standard errors and ratio estimators.
//!
//! All reductions run sequentially in slice order so that a result depends
//! only on the values, never on how they were produced.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanSe {
    /// Mean and standard error of the mean (sample variance with `n − 1`).
    pub fn of(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            0.0
        };
        Ok(MeanSe { mean, se, n })
    }

    pub fn of_iter(values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        Self::of(&v)
    }
}

/// Ratio of means `E[x]/E[y]` with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub se: f64,
    pub numerator: f64,
    pub denominator: f64,
}

pub fn ratio_of_means(x: &[f64], y: &[f64]) -> Result<RatioEstimate> {
    crate::error::check_len(x.len(), y.len())?;
    let n = x.len();
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    if my == 0.0 || !my.is_finite() {
        return Err(Error::ZeroDenominator);
    }
    let r = mx / my;
    let se = if n > 1 {
        // Var(x − r y) / (n my²)
        let ss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let e = (a - mx) - r * (b - my);
                e * e
            })
            .sum();
        (ss / (nf - 1.0) / nf).sqrt() / my.abs()
    } else {
        0.0
    };
    Ok(RatioEstimate { ratio: r, se, numerator: mx, denominator: my })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_matches_hand_values() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((m.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(MeanSe::of(&[]).is_err());
    }

    #[test]
    fn ratio_of_means_rejects_zero_denominator() {
        assert!(matches!(ratio_of_means(&[1.0, 2.0], &[0.0, 0.0]), Err(Error::ZeroDenominator)));
        let r = ratio_of_means(&[2.0, 4.0], &[1.0, 2.0]).unwrap();
        assert_eq!(r.ratio, 2.0);
        assert_eq!(r.se, 0.0);
    }
}
