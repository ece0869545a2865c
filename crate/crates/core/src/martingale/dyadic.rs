use rand::Rng;
use serde::Serialize;

use super::{DiscreteMartingalePath, PredictableSequence};
use crate::error::{Error, Result};
use crate::rng::path_rng;

/// A dyadic martingale together with a transform, both specified node by
/// node on the binary tree of sign histories.
///
/// Node `(k, prefix)` (level `k`, the first `k` signs encoded as bits) sits at
/// index `2^k − 1 + prefix` and carries the magnitude `h` and multiplier `v`
/// used at step `k`. Both are functions of the past signs only, so `v` is
/// predictable, and the `2^depth` equally likely leaves give the exact law of
/// `(f_N, g_N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicTree {
    pub depth: usize,
    pub magnitudes: Vec<f64>,
    pub multipliers: Vec<f64>,
}

impl DyadicTree {
    pub fn new(depth: usize, magnitudes: Vec<f64>, multipliers: Vec<f64>) -> Result<Self> {
        let nodes = (1usize << depth) - 1;
        if depth == 0 || depth > 24 {
            return Err(Error::domain(format!("tree depth must be in 1..=24, got {depth}")));
        }
        crate::error::check_len(nodes, magnitudes.len())?;
        crate::error::check_len(nodes, multipliers.len())?;
        if magnitudes.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::domain("magnitudes must be finite and nonnegative"));
        }
        Ok(DyadicTree { depth, magnitudes, multipliers })
    }

    /// Magnitudes uniform on `[lo, hi]`, multipliers uniform on `[b, B]`.
    pub fn random(depth: usize, (lo, hi): (f64, f64), (b, big_b): (f64, f64), seed: u64, index: u64) -> Result<Self> {
        if !(0.0 <= lo && lo <= hi && b <= big_b) {
            return Err(Error::domain("invalid magnitude or multiplier range"));
        }
        let nodes = (1usize << depth.min(24)) - 1;
        let mut rng = path_rng(seed, index);
        let magnitudes = (0..nodes).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
        let multipliers = (0..nodes).map(|_| b + (big_b - b) * rng.random::<f64>()).collect();
        DyadicTree::new(depth, magnitudes, multipliers)
    }

    pub fn leaves(&self) -> usize {
        1 << self.depth
    }

    /// `(f, g)` along the sign history `leaf` (bit `k` is the sign at step
    /// `k`, 1 meaning `+`), with `g = v ⋆ f`.
    pub fn path(&self, leaf: usize) -> (DiscreteMartingalePath, PredictableSequence) {
        let mut df = Vec::with_capacity(self.depth);
        let mut v = Vec::with_capacity(self.depth);
        let mut prefix = 0usize;
        for k in 0..self.depth {
            let node = (1usize << k) - 1 + prefix;
            let bit = (leaf >> k) & 1;
            let eps = if bit == 1 { 1.0 } else { -1.0 };
            df.push(eps * self.magnitudes[node]);
            v.push(self.multipliers[node]);
            prefix |= bit << k;
        }
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (DiscreteMartingalePath::from_increments(df), PredictableSequence { values: v, lower: lo, upper: hi })
    }

    /// Terminal values `(f_N, g_N)` at every leaf.
    pub fn terminal_values(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.leaves();
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        for leaf in 0..n {
            let mut prefix = 0usize;
            let (mut fs, mut gs) = (0.0, 0.0);
            for k in 0..self.depth {
                let node = (1usize << k) - 1 + prefix;
                let bit = (leaf >> k) & 1;
                let d = if bit == 1 { self.magnitudes[node] } else { -self.magnitudes[node] };
                fs += d;
                gs += self.multipliers[node] * d;
                prefix |= bit << k;
            }
            f[leaf] = fs;
            g[leaf] = gs;
        }
        (f, g)
    }

    /// Exact `‖g_N‖_p / ‖f_N‖_p`.
    pub fn lp_ratio(&self, p: f64) -> Result<f64> {
        let (f, g) = self.terminal_values();
        let nf = super::empirical_lp(&f, p)?;
        if nf == 0.0 {
            return Err(Error::ZeroDenominator);
        }
        Ok(super::empirical_lp(&g, p)? / nf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub depth: usize,
    pub sweeps: usize,
    /// Candidate values tried per coordinate.
    pub candidates: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { depth: 6, sweeps: 12, candidates: 21, seed: 1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub p: f64,
    pub best_ratio: f64,
    pub sweeps_run: usize,
    pub tree: DyadicTree,
}

/// Coordinate ascent of `‖v ⋆ f‖_p / ‖f‖_p` over the node multipliers
/// (`v ∈ [−1, 1]`) and magnitudes (`h ∈ [0, 1]`) of a dyadic tree.
///
/// The result is a lower bound on the best constant for the tree depth; it is
/// reported, never compared with `p* − 1` as an attainment claim.
pub fn search_extremal_transform(p: f64, opts: &SearchOptions) -> Result<SearchResult> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::domain(format!("need 1 < p < ∞, got {p}")));
    }
    let mut tree = DyadicTree::random(opts.depth, (0.2, 1.0), (-1.0, 1.0), opts.seed, 0)?;
    let mut best = tree.lp_ratio(p)?;
    let grid: Vec<f64> = (0..opts.candidates).map(|i| i as f64 / (opts.candidates - 1).max(1) as f64).collect();
    let nodes = tree.magnitudes.len();
    let mut sweeps_run = 0;
    for _ in 0..opts.sweeps {
        sweeps_run += 1;
        let before = best;
        for node in 0..nodes {
            for which in 0..2 {
                let current = if which == 0 { tree.multipliers[node] } else { tree.magnitudes[node] };
                let mut best_val = current;
                for &u in &grid {
                    let cand = if which == 0 { 2.0 * u - 1.0 } else { u };
                    if which == 0 {
                        tree.multipliers[node] = cand;
                    } else {
                        tree.magnitudes[node] = cand;
                    }
                    if let Ok(r) = tree.lp_ratio(p) {
                        if r > best {
                            best = r;
                            best_val = cand;
                        }
                    }
                }
                if which == 0 {
                    tree.multipliers[node] = best_val;
                } else {
                    tree.magnitudes[node] = best_val;
                }
            }
        }
        if best <= before * (1.0 + 1e-12) {
            break;
        }
    }
    Ok(SearchResult { p, best_ratio: best, sweeps_run, tree })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::pstar_minus_one;
    use crate::martingale::{check_subordination, transform};

    #[test]
    fn leaf_paths_agree_with_terminal_values() {
        let t = DyadicTree::random(5, (0.1, 1.0), (-1.0, 1.0), 3, 0).unwrap();
        let (f, g) = t.terminal_values();
        for leaf in [0, 7, 31] {
            let (path, v) = t.path(leaf);
            let tg = transform(&path, &v).unwrap();
            assert!((path.last() - f[leaf]).abs() < 1e-14);
            assert!((tg.last() - g[leaf]).abs() < 1e-14);
            assert!(check_subordination(&path, &tg, -1.0, 1.0).unwrap());
        }
        // mean-zero at the root: f_N sums to zero over the leaves
        assert!(f.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn burkholder_bound_on_random_trees() {
        for p in [4.0 / 3.0, 2.0, 4.0] {
            let c = pstar_minus_one(p).unwrap();
            for i in 0..200 {
                let t = DyadicTree::random(8, (0.0, 1.0), (-1.0, 1.0), 17, i).unwrap();
                assert!(t.lp_ratio(p).unwrap() <= c + 1e-9);
            }
        }
    }

    #[test]
    fn search_improves_and_respects_bound() {
        let opts = SearchOptions { depth: 4, sweeps: 4, candidates: 11, seed: 5 };
        let start = DyadicTree::random(4, (0.2, 1.0), (-1.0, 1.0), 5, 0).unwrap().lp_ratio(4.0).unwrap();
        let r = search_extremal_transform(4.0, &opts).unwrap();
        assert!(r.best_ratio >= start);
        assert!(r.best_ratio > 1.0);
        assert!(r.best_ratio <= 3.0 + 1e-9);
    }
}
