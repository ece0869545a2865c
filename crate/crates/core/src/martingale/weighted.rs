use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::{path_rng, standard_normal};
use crate::stats::{ratio_of_means, MeanSe, RatioEstimate};

/// `Z_t = e^{∫_0^t V} ∫_0^t e^{−∫_0^s V} dM_s` on a uniform grid, advanced by
/// the exponential integrator `Z_{n+1} = e^{V_n Δ}(Z_n + ΔM_n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedProcess {
    pub dt: f64,
    pub dm: Vec<f64>,
    pub v: Vec<f64>,
    /// `Z_0 = 0, …, Z_N`.
    pub z: Vec<f64>,
    /// `[M]_n = Σ_{k<n} ΔM_k²`, `n = 0..=N`.
    pub qv: Vec<f64>,
}

impl WeightedProcess {
    pub fn horizon(&self) -> f64 {
        self.dt * self.dm.len() as f64
    }

    pub fn terminal(&self) -> f64 {
        *self.z.last().unwrap_or(&0.0)
    }

    pub fn terminal_qv(&self) -> f64 {
        *self.qv.last().unwrap_or(&0.0)
    }

    pub fn sup_abs(&self) -> f64 {
        self.z.iter().fold(0.0f64, |m, z| m.max(z.abs()))
    }
}

pub fn weighted_integral(dm: &[f64], v: &[f64], dt: f64) -> Result<WeightedProcess> {
    check_len(dm.len(), v.len())?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {dt}")));
    }
    if let Some(bad) = v.iter().find(|x| !(**x <= 0.0)) {
        return Err(Error::domain(format!("potential sample {bad} is not ≤ 0")));
    }
    let n = dm.len();
    let mut z = Vec::with_capacity(n + 1);
    let mut qv = Vec::with_capacity(n + 1);
    z.push(0.0);
    qv.push(0.0);
    for k in 0..n {
        z.push((v[k] * dt).exp() * (z[k] + dm[k]));
        qv.push(qv[k] + dm[k] * dm[k]);
    }
    Ok(WeightedProcess { dt, dm: dm.to_vec(), v: v.to_vec(), z, qv })
}

/// Vector analogue driven by a symmetric nonpositive matrix potential.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixWeightedProcess {
    pub dt: f64,
    pub dim: usize,
    pub dm: Vec<DVector<f64>>,
    pub v: Vec<DMatrix<f64>>,
    /// `ℳ_0 = I, ℳ_{n+1} = exp(𝒱_n Δ) ℳ_n`.
    pub fundamental: Vec<DMatrix<f64>>,
    pub z: Vec<DVector<f64>>,
    /// `[M]_n = Σ_{k<n} ΔM_k ΔM_kᵀ`.
    pub qv: Vec<DMatrix<f64>>,
}

impl MatrixWeightedProcess {
    pub fn terminal(&self) -> &DVector<f64> {
        self.z.last().expect("process has Z_0")
    }

    pub fn terminal_qv(&self) -> &DMatrix<f64> {
        self.qv.last().expect("process has [M]_0")
    }

    pub fn sup_norm(&self) -> f64 {
        self.z.iter().fold(0.0f64, |m, z| m.max(z.norm()))
    }
}

/// `exp(𝒱 Δ)` for symmetric nonpositive `𝒱`; diagonal input is exponentiated
/// entrywise so that it agrees bit for bit with the scalar recursion.
pub fn matrix_exp_step(v: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    let d = v.nrows();
    if v.ncols() != d {
        return Err(Error::domain("potential matrix must be square"));
    }
    let scale = v.amax().max(1.0);
    for i in 0..d {
        for j in 0..i {
            if (v[(i, j)] - v[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::domain(format!("potential matrix not symmetric at ({i},{j})")));
            }
        }
    }
    let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || v[(i, j)] == 0.0));
    if diagonal {
        if let Some(x) = v.diagonal().iter().find(|x| !(**x <= 0.0)) {
            return Err(Error::domain(format!("potential eigenvalue {x} is positive")));
        }
        return Ok(DMatrix::from_diagonal(&v.diagonal().map(|x| (x * dt).exp())));
    }
    let eig = v.clone().symmetric_eigen();
    if let Some(x) = eig.eigenvalues.iter().find(|x| !(**x <= 1e-10)) {
        return Err(Error::domain(format!("potential eigenvalue {x} is positive")));
    }
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| (x * dt).exp())) * q.transpose())
}

pub fn matrix_weighted_integral(dm: &[DVector<f64>], v: &[DMatrix<f64>], dt: f64) -> Result<MatrixWeightedProcess> {
    check_len(dm.len(), v.len())?;
    let dim = dm.first().map_or(0, |x| x.len());
    if dm.iter().any(|x| x.len() != dim) || v.iter().any(|m| m.nrows() != dim) {
        return Err(Error::domain("inconsistent dimensions in matrix weighted integral"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {dt}")));
    }
    let n = dm.len();
    let mut fundamental = Vec::with_capacity(n + 1);
    let mut z = Vec::with_capacity(n + 1);
    let mut qv = Vec::with_capacity(n + 1);
    fundamental.push(DMatrix::identity(dim, dim));
    z.push(DVector::zeros(dim));
    qv.push(DMatrix::zeros(dim, dim));
    for k in 0..n {
        let e = matrix_exp_step(&v[k], dt)?;
        fundamental.push(&e * &fundamental[k]);
        z.push(&e * (&z[k] + &dm[k]));
        qv.push(&qv[k] + &dm[k] * dm[k].transpose());
    }
    Ok(MatrixWeightedProcess { dt, dim, dm: dm.to_vec(), v: v.to_vec(), fundamental, z, qv })
}

/// Scalar Itô dynamics used to generate `(M, V)` ensembles:
/// `ΔM_n = σ_n √Δ ξ_n`, `σ_n = σ₀ + σ₁ sin(2π M_n)`,
/// `V_n = −(v₀ + v₁ cos²(M_n))`. All coefficients are functions of `M_n`, so
/// they are adapted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarDynamics {
    pub sigma0: f64,
    pub sigma1: f64,
    pub v0: f64,
    pub v1: f64,
    pub steps: usize,
    pub horizon: f64,
}

impl ScalarDynamics {
    pub fn validate(&self) -> Result<()> {
        if !(self.v0 >= 0.0 && self.v1 >= 0.0) {
            return Err(Error::InvalidSpec("potential coefficients must be ≥ 0 (V ≤ 0)".into()));
        }
        if self.steps == 0 || !(self.horizon > 0.0) {
            return Err(Error::InvalidSpec("need steps ≥ 1 and horizon > 0".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn without_potential(&self) -> Self {
        ScalarDynamics { v0: 0.0, v1: 0.0, ..*self }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<WeightedProcess> {
        let dt = self.dt();
        let sq = dt.sqrt();
        let mut m = 0.0f64;
        let mut dm = Vec::with_capacity(self.steps);
        let mut v = Vec::with_capacity(self.steps);
        for _ in 0..self.steps {
            let sigma = self.sigma0 + self.sigma1 * (2.0 * std::f64::consts::PI * m).sin();
            v.push(-(self.v0 + self.v1 * m.cos().powi(2)));
            let d = sigma * sq * standard_normal(rng);
            dm.push(d);
            m += d;
        }
        weighted_integral(&dm, &v, dt)
    }
}

/// `n_paths` processes, path `i` drawn from stream `i` of `seed`.
pub fn weighted_ensemble(dynamics: &ScalarDynamics, n_paths: usize, seed: u64) -> Result<Vec<WeightedProcess>> {
    dynamics.validate()?;
    (0..n_paths as u64).into_par_iter().map(|i| dynamics.sample(&mut path_rng(seed, i))).collect()
}

/// Vector dynamics: `ΔM^a_n = (σ₀ + σ₁ sin(2π M^a_n)) √Δ ξ^a_n` and
/// `𝒱_n = −Q diag(e_a + e₁ cos²(M^a_n)) Qᵀ` for a fixed orthogonal `Q`
/// (identity for the diagonal case).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDynamics {
    pub sigma0: f64,
    pub sigma1: f64,
    pub eig0: Vec<f64>,
    pub eig1: f64,
    pub rotation: Option<DMatrix<f64>>,
    pub steps: usize,
    pub horizon: f64,
}

impl MatrixDynamics {
    pub fn dim(&self) -> usize {
        self.eig0.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.eig0.is_empty() || self.eig0.iter().any(|e| !(*e >= 0.0)) || !(self.eig1 >= 0.0) {
            return Err(Error::InvalidSpec("matrix potential needs eigen-coefficients ≥ 0".into()));
        }
        if let Some(q) = &self.rotation {
            let d = self.dim();
            if q.nrows() != d || q.ncols() != d || (q.transpose() * q - DMatrix::identity(d, d)).amax() > 1e-12 {
                return Err(Error::InvalidSpec("rotation must be a d×d orthogonal matrix".into()));
            }
        }
        if self.steps == 0 || !(self.horizon > 0.0) {
            return Err(Error::InvalidSpec("need steps ≥ 1 and horizon > 0".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MatrixWeightedProcess> {
        let d = self.dim();
        let dt = self.horizon / self.steps as f64;
        let sq = dt.sqrt();
        let mut m = DVector::<f64>::zeros(d);
        let mut dm = Vec::with_capacity(self.steps);
        let mut vs = Vec::with_capacity(self.steps);
        for _ in 0..self.steps {
            let diag = DVector::from_iterator(d, (0..d).map(|a| -(self.eig0[a] + self.eig1 * m[a].cos().powi(2))));
            let v = match &self.rotation {
                None => DMatrix::from_diagonal(&diag),
                Some(q) => {
                    let mut v = q * DMatrix::from_diagonal(&diag) * q.transpose();
                    // exact symmetry
                    let vt = v.transpose();
                    v = (v + vt) * 0.5;
                    v
                }
            };
            vs.push(v);
            let inc = DVector::from_iterator(
                d,
                (0..d).map(|a| (self.sigma0 + self.sigma1 * (2.0 * std::f64::consts::PI * m[a]).sin()) * sq * standard_normal(rng)),
            );
            m += &inc;
            dm.push(inc);
        }
        matrix_weighted_integral(&dm, &vs, dt)
    }
}

pub fn matrix_weighted_ensemble(dynamics: &MatrixDynamics, n_paths: usize, seed: u64) -> Result<Vec<MatrixWeightedProcess>> {
    dynamics.validate()?;
    (0..n_paths as u64).into_par_iter().map(|i| dynamics.sample(&mut path_rng(seed, i))).collect()
}

/// `E[sup_n |Z_n|^p] / E[[M]_T^{p/2}]`.
pub fn bdg_ratio(ensemble: &[WeightedProcess], p: f64) -> Result<RatioEstimate> {
    if !(p > 0.0) {
        return Err(Error::domain(format!("BDG exponent must be > 0, got {p}")));
    }
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let num: Vec<f64> = ensemble.iter().map(|w| w.sup_abs().powf(p)).collect();
    let den: Vec<f64> = ensemble.iter().map(|w| w.terminal_qv().powf(p / 2.0)).collect();
    ratio_of_means(&num, &den)
}

/// `E[sup_n |Z_n|^p] / E[‖[M]_T‖^{p/2}]` with the spectral norm.
pub fn matrix_bdg_ratio(ensemble: &[MatrixWeightedProcess], p: f64) -> Result<RatioEstimate> {
    if !(p > 0.0) {
        return Err(Error::domain(format!("BDG exponent must be > 0, got {p}")));
    }
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let num: Vec<f64> = ensemble.iter().map(|w| w.sup_norm().powf(p)).collect();
    let den: Vec<f64> = ensemble
        .iter()
        .map(|w| {
            let qv = w.terminal_qv();
            qv.clone().symmetric_eigen().eigenvalues.amax().powf(p / 2.0)
        })
        .collect();
    ratio_of_means(&num, &den)
}

/// Paired test of `E[X] ≤ E[Y]`: passes iff `mean(X − Y) ≤ 3·SE(X − Y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondMomentCheck {
    pub lhs: MeanSe,
    pub rhs: MeanSe,
    pub difference: MeanSe,
    pub pass: bool,
}

fn paired(lhs: Vec<f64>, rhs: Vec<f64>) -> Result<SecondMomentCheck> {
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let difference = MeanSe::of(&diff)?;
    Ok(SecondMomentCheck { lhs: MeanSe::of(&lhs)?, rhs: MeanSe::of(&rhs)?, difference, pass: difference.mean <= 3.0 * difference.se })
}

/// `E[Z_T²] ≤ E[[M]_T]`.
pub fn second_moment_check(ensemble: &[WeightedProcess]) -> Result<SecondMomentCheck> {
    paired(ensemble.iter().map(|w| w.terminal().powi(2)).collect(), ensemble.iter().map(|w| w.terminal_qv()).collect())
}

/// `E[|Z_T|²] ≤ E[tr [M]_T]`.
pub fn matrix_second_moment_check(ensemble: &[MatrixWeightedProcess]) -> Result<SecondMomentCheck> {
    paired(ensemble.iter().map(|w| w.terminal().norm_squared()).collect(), ensemble.iter().map(|w| w.terminal_qv().trace()).collect())
}

/// Largest deviation between a diagonal-potential matrix process and the
/// scalar recursion run on each component.
pub fn diagonal_consistency(process: &MatrixWeightedProcess) -> Result<f64> {
    let mut worst = 0.0f64;
    for a in 0..process.dim {
        if process.v.iter().any(|m| (0..process.dim).any(|j| j != a && (m[(a, j)] != 0.0 || m[(j, a)] != 0.0))) {
            return Err(Error::domain("potential is not diagonal"));
        }
        let dm: Vec<f64> = process.dm.iter().map(|x| x[a]).collect();
        let v: Vec<f64> = process.v.iter().map(|m| m[(a, a)]).collect();
        let scalar = weighted_integral(&dm, &v, process.dt)?;
        for (zs, zm) in scalar.z.iter().zip(&process.z) {
            worst = worst.max((zs - zm[a]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potential_gives_partial_sums() {
        let dm = [0.3, -1.2, 0.7, 0.05];
        let w = weighted_integral(&dm, &[0.0; 4], 0.1).unwrap();
        let mut s = 0.0;
        for (k, d) in dm.iter().enumerate() {
            s += d;
            assert_eq!(w.z[k + 1], s);
        }
        assert_eq!(w.z[0], 0.0);
        assert!(weighted_integral(&dm, &[0.0, 0.1, 0.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn impulse_decays_geometrically() {
        let c = 0.7;
        let dt = 0.05;
        let mut dm = vec![0.0; 40];
        dm[0] = 1.0;
        let w = weighted_integral(&dm, &vec![-c; 40], dt).unwrap();
        for n in 1..=40 {
            assert!((w.z[n] - (-c * n as f64 * dt).exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn one_dimensional_matrix_is_scalar() {
        let dm = [0.3, -1.2, 0.7];
        let v = [-0.5, -1.0, 0.0];
        let s = weighted_integral(&dm, &v, 0.2).unwrap();
        let m = matrix_weighted_integral(
            &dm.iter().map(|x| DVector::from_element(1, *x)).collect::<Vec<_>>(),
            &v.iter().map(|x| DMatrix::from_element(1, 1, *x)).collect::<Vec<_>>(),
            0.2,
        )
        .unwrap();
        for (a, b) in s.z.iter().zip(&m.z) {
            assert_eq!(*a, b[0]);
        }
    }

    #[test]
    fn zero_matrix_potential_gives_vector_sums() {
        let dm: Vec<DVector<f64>> = (0..5).map(|k| DVector::from_vec(vec![k as f64, -0.5, 0.25])).collect();
        let m = matrix_weighted_integral(&dm, &vec![DMatrix::zeros(3, 3); 5], 0.1).unwrap();
        let sum = dm.iter().fold(DVector::zeros(3), |a, b| a + b);
        assert_eq!(m.terminal(), &sum);
        assert_eq!(m.fundamental[5], DMatrix::identity(3, 3));
    }

    #[test]
    fn matrix_potential_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -1.0]);
        assert!(matrix_exp_step(&bad, 0.1).is_err());
        let pos = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 2.0, -1.0]);
        assert!(matrix_exp_step(&pos, 0.1).is_err());
        let ok = DMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 0.5, -1.0]);
        let e = matrix_exp_step(&ok, 0.1).unwrap();
        // exp(AΔ)exp(−AΔ) = I via the eigen-decomposition of −A
        let inv = {
            let eig = ok.clone().symmetric_eigen();
            let q = &eig.eigenvectors;
            q * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| (-x * 0.1).exp())) * q.transpose()
        };
        assert!((e * inv - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn diagonal_matrix_matches_scalar_components() {
        let dynamics =
            MatrixDynamics { sigma0: 1.0, sigma1: 0.3, eig0: vec![0.5, 1.0, 2.0], eig1: 0.5, rotation: None, steps: 50, horizon: 1.0 };
        for w in matrix_weighted_ensemble(&dynamics, 20, 4).unwrap() {
            assert!(diagonal_consistency(&w).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn second_moment_inequality_and_doob() {
        let dynamics = ScalarDynamics { sigma0: 1.0, sigma1: 0.4, v0: 0.5, v1: 1.0, steps: 50, horizon: 1.0 };
        let ens = weighted_ensemble(&dynamics, 4000, 21).unwrap();
        assert!(second_moment_check(&ens).unwrap().pass);
        let free = weighted_ensemble(&dynamics.without_potential(), 4000, 21).unwrap();
        let r = bdg_ratio(&free, 2.0).unwrap();
        assert!(r.ratio <= 4.0 + 3.0 * r.se);
        let zero: Vec<WeightedProcess> = (0..3).map(|_| weighted_integral(&[0.0; 4], &[0.0; 4], 0.1).unwrap()).collect();
        assert!(matches!(bdg_ratio(&zero, 2.0), Err(Error::ZeroDenominator)));
        assert!(matches!(bdg_ratio(&[], 2.0), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn ensembles_do_not_depend_on_thread_count() {
        let dynamics = ScalarDynamics { sigma0: 1.0, sigma1: 0.4, v0: 0.5, v1: 1.0, steps: 20, horizon: 1.0 };
        let a = weighted_ensemble(&dynamics, 64, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| weighted_ensemble(&dynamics, 64, 9).unwrap());
        assert_eq!(a, b);
    }
}
