//! Diffusions on the flat torus and Feynman-Kac weights.
//!
//! A path is a pure function of `(seed, index)`: [`EnsembleSpec::path`]
//! regenerates any path on demand, so large ensembles are streamed through
//! the estimators instead of being held in memory. [`PathEnsemble`]
//! materialises a (small) ensemble when the paths themselves are wanted.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{path_rng, standard_normal};

/// `x mod 1` in `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    Point {
        x: Vec<f64>,
    },
    /// Lebesgue measure on `[0,1)^d`, the invariant law.
    Uniform,
}

/// Brownian ensemble on `T^d`: `Y_{n+1} = Y_n + ΔB_n mod 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub dim: usize,
    pub horizon: f64,
    pub steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub init: InitialLaw,
}

/// One path: wrapped positions `Y_0..Y_N` and increments `ΔB_0..ΔB_{N−1}`,
/// both flattened row-major (`d` entries per time).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionPath {
    pub y: Vec<f64>,
    pub db: Vec<f64>,
    /// `Y_N − Y_0` without wrapping.
    pub displacement: Vec<f64>,
    /// Set when the blow-up guard stopped the path; later positions repeat
    /// the last finite state.
    pub aborted: bool,
}

impl DiffusionPath {
    pub fn position(&self, n: usize, dim: usize) -> &[f64] {
        &self.y[n * dim..(n + 1) * dim]
    }

    pub fn increment(&self, n: usize, dim: usize) -> &[f64] {
        &self.db[n * dim..(n + 1) * dim]
    }
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.steps == 0 || self.n_paths == 0 {
            return Err(Error::InvalidSpec("need d ≥ 1, steps ≥ 1 and at least one path".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidSpec(format!("horizon must be positive, got {}", self.horizon)));
        }
        if let InitialLaw::Point { x } = &self.init {
            if x.len() != self.dim {
                return Err(Error::LengthMismatch { expected: self.dim, found: x.len() });
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_n = nΔ`.
    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.init {
            InitialLaw::Point { x } => x.iter().map(|v| wrap(*v)).collect(),
            InitialLaw::Uniform => (0..self.dim).map(|_| rng.random::<f64>()).collect(),
        }
    }

    fn increments<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sq = self.dt().sqrt();
        (0..self.steps * self.dim).map(|_| sq * standard_normal(rng)).collect()
    }

    /// Brownian path `index`.
    pub fn path(&self, index: u64) -> DiffusionPath {
        let mut rng = path_rng(self.seed, index);
        let y0 = self.start(&mut rng);
        let db = self.increments(&mut rng);
        let d = self.dim;
        let mut y = Vec::with_capacity((self.steps + 1) * d);
        y.extend_from_slice(&y0);
        let mut displacement = vec![0.0; d];
        for n in 0..self.steps {
            for a in 0..d {
                let inc = db[n * d + a];
                displacement[a] += inc;
                let next = wrap(y[n * d + a] + inc);
                y.push(next);
            }
        }
        DiffusionPath { y, db, displacement, aborted: false }
    }

    /// Path `index` driven by the Stratonovich fields, using the same initial
    /// point and increments as [`EnsembleSpec::path`].
    pub fn heun_path(&self, fields: &FieldSet, index: u64) -> Result<DiffusionPath> {
        let mut rng = path_rng(self.seed, index);
        let y0 = self.start(&mut rng);
        let db = self.increments(&mut rng);
        euler_heun_path(fields, &y0, self.dt(), &db)
    }
}

/// A materialised ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub spec: EnsembleSpec,
    pub paths: Vec<DiffusionPath>,
    pub aborted: usize,
}

impl PathEnsemble {
    pub fn times(&self) -> Vec<f64> {
        (0..=self.spec.steps).map(|n| self.spec.time(n)).collect()
    }
}

pub fn brownian_paths(spec: &EnsembleSpec) -> Result<PathEnsemble> {
    spec.validate()?;
    let paths: Vec<DiffusionPath> = (0..spec.n_paths as u64).into_par_iter().map(|i| spec.path(i)).collect();
    Ok(PathEnsemble { spec: spec.clone(), paths, aborted: 0 })
}

type FieldFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Vector field on the torus, evaluated at wrapped coordinates.
#[derive(Clone)]
pub enum VectorField {
    Zero,
    Constant(Vec<f64>),
    /// `c·(−sin 2πx₂, sin 2πx₁, 0, …)`.
    Rotation {
        amplitude: f64,
    },
    /// `c·∇cos(2πk·x) = −2πc·k·sin(2πk·x)`.
    GradientOfPotential {
        amplitude: f64,
        mode: Vec<i64>,
    },
    Custom(Arc<FieldFn>),
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorField::Zero => write!(f, "Zero"),
            VectorField::Constant(c) => write!(f, "Constant({c:?})"),
            VectorField::Rotation { amplitude } => write!(f, "Rotation({amplitude})"),
            VectorField::GradientOfPotential { amplitude, mode } => write!(f, "GradientOfPotential({amplitude}, {mode:?})"),
            VectorField::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl VectorField {
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            VectorField::Zero => out.fill(0.0),
            VectorField::Constant(c) => out.copy_from_slice(c),
            VectorField::Rotation { amplitude } => {
                out.fill(0.0);
                if x.len() >= 2 {
                    out[0] = -amplitude * (2.0 * PI * x[1]).sin();
                    out[1] = amplitude * (2.0 * PI * x[0]).sin();
                }
            }
            VectorField::GradientOfPotential { amplitude, mode } => {
                let phase: f64 = mode.iter().zip(x).map(|(k, v)| *k as f64 * v).sum::<f64>() * 2.0 * PI;
                let s = phase.sin();
                for (o, k) in out.iter_mut().zip(mode) {
                    *o = -2.0 * PI * amplitude * *k as f64 * s;
                }
            }
            VectorField::Custom(f) => f(x, out),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let ok = match self {
            VectorField::Constant(c) => c.len() == dim,
            VectorField::GradientOfPotential { mode, .. } => mode.len() == dim,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("vector field {self:?} does not live in dimension {dim}")))
        }
    }
}

/// Drift `X_0` and diffusion fields `X_1..X_m` of
/// `dY = X_0(Y) dt + Σ X_i(Y) ∘ dB^i`.
#[derive(Debug, Clone)]
pub struct FieldSet {
    pub drift: VectorField,
    pub diffusion: Vec<VectorField>,
}

impl FieldSet {
    /// `X_0 = 0`, `X_i = e_i`: Brownian motion.
    pub fn coordinate(dim: usize) -> Self {
        let diffusion = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                VectorField::Constant(e)
            })
            .collect();
        FieldSet { drift: VectorField::Zero, diffusion }
    }

    pub fn with_drift(mut self, drift: VectorField) -> Self {
        self.drift = drift;
        self
    }
}

/// Positions beyond this size (in the unwrapped state) count as blow-up.
const BLOW_UP: f64 = 1e8;

/// Heun predictor-corrector for the Stratonovich equation, driven by the
/// given increments (`d` Brownian components per step, one per diffusion
/// field).
pub fn euler_heun_path(fields: &FieldSet, y0: &[f64], dt: f64, db: &[f64]) -> Result<DiffusionPath> {
    let d = y0.len();
    let m = fields.diffusion.len();
    fields.drift.check_dim(d)?;
    for x in &fields.diffusion {
        x.check_dim(d)?;
    }
    if m == 0 || !db.len().is_multiple_of(m) {
        return Err(Error::InvalidSpec("increments do not match the number of diffusion fields".into()));
    }
    let steps = db.len() / m;
    let mut y = Vec::with_capacity((steps + 1) * d);
    y.extend(y0.iter().map(|v| wrap(*v)));
    let mut displacement = vec![0.0; d];
    let mut aborted = false;
    let (mut a0, mut a1, mut pred, mut inc, mut tmp) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut cols0 = vec![vec![0.0; d]; m];
    for n in 0..steps {
        let cur: Vec<f64> = y[n * d..(n + 1) * d].to_vec();
        if aborted {
            y.extend_from_slice(&cur);
            continue;
        }
        let dbn = &db[n * m..(n + 1) * m];
        fields.drift.eval(&cur, &mut a0);
        for (i, x) in fields.diffusion.iter().enumerate() {
            x.eval(&cur, &mut cols0[i]);
        }
        for a in 0..d {
            let mut s = a0[a] * dt;
            for i in 0..m {
                s += cols0[i][a] * dbn[i];
            }
            pred[a] = wrap(cur[a] + s);
        }
        fields.drift.eval(&pred, &mut a1);
        for a in 0..d {
            inc[a] = 0.5 * (a0[a] + a1[a]) * dt;
        }
        for (i, x) in fields.diffusion.iter().enumerate() {
            x.eval(&pred, &mut tmp);
            for a in 0..d {
                inc[a] += 0.5 * (cols0[i][a] + tmp[a]) * dbn[i];
            }
        }
        if inc.iter().any(|v| !v.is_finite()) || displacement.iter().zip(&inc).any(|(s, v)| (s + v).abs() > BLOW_UP) {
            aborted = true;
            y.extend_from_slice(&cur);
            continue;
        }
        for a in 0..d {
            displacement[a] += inc[a];
            y.push(wrap(cur[a] + inc[a]));
        }
    }
    Ok(DiffusionPath { y, db: db.to_vec(), displacement, aborted })
}

/// Ensemble of Heun paths; the driving noise of path `i` is that of
/// `spec.path(i)`.
pub fn euler_heun(fields: &FieldSet, spec: &EnsembleSpec) -> Result<PathEnsemble> {
    spec.validate()?;
    if fields.diffusion.len() != spec.dim {
        return Err(Error::InvalidSpec(format!(
            "{} diffusion fields for a {}-dimensional Brownian motion",
            fields.diffusion.len(),
            spec.dim
        )));
    }
    let paths = (0..spec.n_paths as u64).into_par_iter().map(|i| spec.heun_path(fields, i)).collect::<Result<Vec<_>>>()?;
    let aborted = paths.iter().filter(|p| p.aborted).count();
    Ok(PathEnsemble { spec: spec.clone(), paths, aborted })
}

pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Potential `V ≤ 0`.
#[derive(Clone)]
pub enum Potential {
    Zero,
    /// `V ≡ −m`.
    Constant {
        m: f64,
    },
    /// `V(x) = −(m₀ + m₁ cos²(πk·x))`.
    Cosine {
        m0: f64,
        m1: f64,
        mode: Vec<i64>,
    },
    Custom(PotentialFn),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Constant { m } => write!(f, "Constant(-{m})"),
            Potential::Cosine { m0, m1, mode } => write!(f, "Cosine({m0}, {m1}, {mode:?})"),
            Potential::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Potential {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Constant { m } => -m,
            Potential::Cosine { m0, m1, mode } => {
                let phase: f64 = mode.iter().zip(x).map(|(k, v)| *k as f64 * v).sum::<f64>() * PI;
                -(m0 + m1 * phase.cos().powi(2))
            }
            Potential::Custom(f) => f(x),
        }
    }

    /// `Some(m)` when `V ≡ −m`.
    pub fn constant_rate(&self) -> Option<f64> {
        match self {
            Potential::Zero => Some(0.0),
            Potential::Constant { m } => Some(*m),
            _ => None,
        }
    }
}

/// `w_n = exp(Σ_{k<n} V(Y_k) Δ)`, `n = 0..=N`.
pub fn path_weights(path: &DiffusionPath, dim: usize, dt: f64, v: &Potential) -> Result<Vec<f64>> {
    let steps = path.y.len() / dim - 1;
    let mut w = Vec::with_capacity(steps + 1);
    let mut s = 0.0f64;
    w.push(1.0);
    for n in 0..steps {
        let val = v.value(path.position(n, dim));
        if !(val <= 0.0) {
            return Err(Error::domain(format!("potential sample {val} is not ≤ 0")));
        }
        s += val * dt;
        w.push(s.exp());
    }
    Ok(w)
}

/// Per-path Feynman-Kac weights of a materialised ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct FeynmanKacWeights {
    pub weights: Vec<Vec<f64>>,
}

pub fn feynman_kac_weights(ensemble: &PathEnsemble, v: &Potential) -> Result<FeynmanKacWeights> {
    let dt = ensemble.spec.dt();
    let weights = ensemble.paths.par_iter().map(|p| path_weights(p, ensemble.spec.dim, dt, v)).collect::<Result<Vec<_>>>()?;
    Ok(FeynmanKacWeights { weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{heat_semigroup, FourierField, TrigTerm};
    use crate::stats::MeanSe;

    fn spec(dim: usize, steps: usize, n_paths: usize, init: InitialLaw) -> EnsembleSpec {
        EnsembleSpec { dim, horizon: 1.0, steps, n_paths, seed: 42, init }
    }

    #[test]
    fn uniform_start_stays_uniform() {
        let s = EnsembleSpec { horizon: 0.3, ..spec(2, 10, 100_000, InitialLaw::Uniform) };
        let bins = 16;
        let mut counts = vec![0usize; bins * bins];
        for i in 0..s.n_paths as u64 {
            let p = s.path(i);
            let y = p.position(s.steps, 2);
            counts[(y[0] * bins as f64) as usize * bins + (y[1] * bins as f64) as usize] += 1;
        }
        let expect = s.n_paths as f64 / (bins * bins) as f64;
        let chi2: f64 = counts.iter().map(|c| (*c as f64 - expect).powi(2) / expect).sum();
        // 99th percentile of χ² with 255 degrees of freedom
        assert!(chi2 < 310.5, "chi2 = {chi2}");
    }

    #[test]
    fn increments_have_brownian_variance() {
        let s = spec(2, 20, 10_000, InitialLaw::Point { x: vec![0.5, 0.5] });
        let e = brownian_paths(&s).unwrap();
        let dt = s.dt();
        for a in 0..2 {
            let var =
                e.paths.iter().flat_map(|p| (0..s.steps).map(move |n| p.db[n * 2 + a].powi(2))).sum::<f64>() / (s.steps * s.n_paths) as f64;
            assert!((var / dt - 1.0).abs() < 0.05);
            let disp = MeanSe::of_iter(e.paths.iter().map(|p| p.displacement[a].powi(2))).unwrap();
            assert!((disp.mean - s.horizon).abs() <= 3.0 * disp.se);
        }
        assert!(e.paths.iter().all(|p| p.y.iter().all(|v| (0.0..1.0).contains(v))));
        assert_eq!(s.path(17), e.paths[17]);
    }

    #[test]
    fn constant_fields_reproduce_brownian_paths() {
        let s = spec(2, 50, 200, InitialLaw::Uniform);
        let b = brownian_paths(&s).unwrap();
        let h = euler_heun(&FieldSet::coordinate(2), &s).unwrap();
        assert_eq!(b.paths, h.paths);
    }

    #[test]
    fn drift_moves_the_mean() {
        let c = 0.37;
        let s = spec(2, 40, 20_000, InitialLaw::Point { x: vec![0.0, 0.0] });
        let fields = FieldSet::coordinate(2).with_drift(VectorField::Constant(vec![c, 0.0]));
        let e = euler_heun(&fields, &s).unwrap();
        let m = MeanSe::of_iter(e.paths.iter().map(|p| p.displacement[0])).unwrap();
        assert!((m.mean - c * s.horizon).abs() <= 3.0 * m.se);
    }

    #[test]
    fn blow_up_is_flagged() {
        let fields = FieldSet {
            drift: VectorField::Custom(Arc::new(|x: &[f64], out: &mut [f64]| {
                out[0] = if x[0] > 0.5 { f64::NAN } else { 0.0 };
            })),
            diffusion: vec![VectorField::Constant(vec![1.0])],
        };
        let s = spec(1, 100, 50, InitialLaw::Uniform);
        let e = euler_heun(&fields, &s).unwrap();
        assert!(e.aborted > 0);
        assert!(e.paths.iter().all(|p| p.y.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn heun_is_weakly_first_order() {
        // f(Y_T) for a rotation-perturbed diffusion, against a fine-step
        // reference driven by the same Brownian path.
        let fields = FieldSet {
            drift: VectorField::Rotation { amplitude: 0.5 },
            diffusion: vec![VectorField::GradientOfPotential { amplitude: 0.1, mode: vec![1, 0] }, VectorField::Constant(vec![0.0, 1.0])],
        };
        let f = |y: &[f64]| (2.0 * PI * y[0]).cos() + (2.0 * PI * (y[0] + y[1])).sin();
        let fine = 256;
        let n_paths = 100_000u64;
        let levels = [4usize, 8, 16];
        let y0 = [0.1, 0.3];
        let diffs: Vec<Vec<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = path_rng(3, i);
                let dt = 1.0 / fine as f64;
                let db: Vec<f64> = (0..fine * 2).map(|_| dt.sqrt() * standard_normal(&mut rng)).collect();
                let reference = f(euler_heun_path(&fields, &y0, dt, &db).unwrap().position(fine, 2));
                levels
                    .iter()
                    .map(|&n| {
                        let r = fine / n;
                        let coarse: Vec<f64> = (0..n)
                            .flat_map(|k| {
                                let db = &db;
                                (0..2).map(move |a| (0..r).map(|j| db[((k * r + j) * 2) + a]).sum::<f64>())
                            })
                            .collect();
                        let yc = euler_heun_path(&fields, &y0, 1.0 / n as f64, &coarse).unwrap();
                        f(yc.position(n, 2)) - reference
                    })
                    .collect()
            })
            .collect();
        let est: Vec<MeanSe> = (0..levels.len()).map(|l| MeanSe::of_iter(diffs.iter().map(|d| d[l])).unwrap()).collect();
        let err: Vec<f64> = est.iter().map(|e| e.mean.abs()).collect();
        assert!(err[0] > 10.0 * est[0].se, "{est:?}");
        assert!(err[1] < err[0] && err[2] < err[1], "{est:?}");
        // Two halvings of the step: about 4 for first order, about 2 for order ½.
        assert!(err[0] / err[2] > 3.0, "{est:?}");
    }

    #[test]
    fn constant_potential_weights() {
        let s = spec(2, 30, 3, InitialLaw::Uniform);
        let e = brownian_paths(&s).unwrap();
        let ones = feynman_kac_weights(&e, &Potential::Zero).unwrap();
        assert!(ones.weights.iter().flatten().all(|w| *w == 1.0));
        let m = 0.8;
        let w = feynman_kac_weights(&e, &Potential::Constant { m }).unwrap();
        for path in &w.weights {
            for (n, x) in path.iter().enumerate() {
                assert!((x - (-m * n as f64 * s.dt()).exp()).abs() < 1e-14);
            }
        }
        let bad = Potential::Custom(Arc::new(|_: &[f64]| 0.1));
        assert!(feynman_kac_weights(&e, &bad).is_err());
        let cos = Potential::Cosine { m0: 0.1, m1: 1.0, mode: vec![1, 1] };
        for path in feynman_kac_weights(&e, &cos).unwrap().weights {
            assert!(path.windows(2).all(|p| p[1] <= p[0] && p[1] > 0.0));
        }
    }

    #[test]
    fn feynman_kac_matches_spectral_semigroup() {
        let m = 1.0;
        let x0 = vec![0.2, 0.7];
        let s = EnsembleSpec { horizon: 0.25, ..spec(2, 25, 40_000, InitialLaw::Point { x: x0.clone() }) };
        let f = FourierField::real_trig(
            2,
            2,
            &[TrigTerm::Cos { mode: vec![1, 0], amplitude: 1.0 }, TrigTerm::Sin { mode: vec![1, 1], amplitude: 0.5 }],
        )
        .unwrap();
        let v = Potential::Constant { m };
        let est = MeanSe::of_iter((0..s.n_paths as u64).map(|i| {
            let p = s.path(i);
            let w = path_weights(&p, 2, s.dt(), &v).unwrap();
            w[s.steps] * f.eval_real(p.position(s.steps, 2))
        }))
        .unwrap();
        let exact = (-m * s.horizon).exp() * heat_semigroup(&f, s.horizon).unwrap().eval_real(&x0);
        assert!((est.mean - exact).abs() <= 3.0 * est.se, "{est:?} vs {exact}");
    }
}
