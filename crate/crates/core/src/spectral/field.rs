use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Truncated Fourier series `f(x) = Σ_{|k_a| ≤ K} c_k e^{2πi k·x}` on `[0,1)^d`.
///
/// Coefficients are stored densely in row-major order over `[−K, K]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    dim: usize,
    bandwidth: usize,
    coeffs: Vec<Complex64>,
    real: bool,
}

/// One real trigonometric term of a field built with [`FourierField::real_trig`].
#[derive(Debug, Clone, PartialEq)]
pub enum TrigTerm {
    Cos { mode: Vec<i64>, amplitude: f64 },
    Sin { mode: Vec<i64>, amplitude: f64 },
    Constant(f64),
}

impl FourierField {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        let side = 2 * bandwidth + 1;
        FourierField { dim, bandwidth, coeffs: vec![Complex64::new(0.0, 0.0); side.pow(dim as u32)], real: true }
    }

    /// Field with the given coefficients; unlisted modes are zero.
    pub fn from_modes(dim: usize, bandwidth: usize, modes: &[(Vec<i64>, Complex64)]) -> Result<Self> {
        let mut f = FourierField::zeros(dim, bandwidth);
        for (k, c) in modes {
            let idx = f.index_of(k)?;
            f.coeffs[idx] += c;
        }
        f.real = f.conjugate_symmetry_defect() <= 1e-12 * f.max_abs().max(1.0);
        Ok(f)
    }

    /// Real field `Σ a cos(2πk·x) + Σ b sin(2πk·x) + c`.
    pub fn real_trig(dim: usize, bandwidth: usize, terms: &[TrigTerm]) -> Result<Self> {
        let mut modes = Vec::new();
        for t in terms {
            match t {
                TrigTerm::Constant(c) => modes.push((vec![0; dim], Complex64::new(*c, 0.0))),
                TrigTerm::Cos { mode, amplitude } => {
                    let neg: Vec<i64> = mode.iter().map(|k| -k).collect();
                    modes.push((mode.clone(), Complex64::new(0.5 * amplitude, 0.0)));
                    modes.push((neg, Complex64::new(0.5 * amplitude, 0.0)));
                }
                TrigTerm::Sin { mode, amplitude } => {
                    let neg: Vec<i64> = mode.iter().map(|k| -k).collect();
                    modes.push((mode.clone(), Complex64::new(0.0, -0.5 * amplitude)));
                    modes.push((neg, Complex64::new(0.0, 0.5 * amplitude)));
                }
            }
        }
        let mut f = FourierField::from_modes(dim, bandwidth, &modes)?;
        f.real = true;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn side(&self) -> usize {
        2 * self.bandwidth + 1
    }

    fn index_of(&self, k: &[i64]) -> Result<usize> {
        if k.len() != self.dim {
            return Err(Error::LengthMismatch { expected: self.dim, found: k.len() });
        }
        let kk = self.bandwidth as i64;
        let mut idx = 0usize;
        for &ka in k {
            if ka.abs() > kk {
                return Err(Error::domain(format!("mode {k:?} outside bandwidth {kk}")));
            }
            idx = idx * self.side() + (ka + kk) as usize;
        }
        Ok(idx)
    }

    /// Mode vector of storage slot `idx`.
    pub fn mode_of(&self, mut idx: usize, out: &mut [i64]) {
        let side = self.side();
        for a in (0..self.dim).rev() {
            out[a] = (idx % side) as i64 - self.bandwidth as i64;
            idx /= side;
        }
    }

    pub fn coeff(&self, k: &[i64]) -> Result<Complex64> {
        Ok(self.coeffs[self.index_of(k)?])
    }

    /// Iterator over `(mode, coefficient)` for every stored slot.
    pub fn modes(&self) -> impl Iterator<Item = (Vec<i64>, Complex64)> + '_ {
        self.coeffs.iter().enumerate().map(move |(i, c)| {
            let mut k = vec![0; self.dim];
            self.mode_of(i, &mut k);
            (k, *c)
        })
    }

    /// Modes with a nonzero coefficient.
    pub fn nonzero_modes(&self) -> Vec<(Vec<i64>, Complex64)> {
        self.modes().filter(|(_, c)| c.norm_sqr() > 0.0).collect()
    }

    fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `max_k |c_{−k} − conj(c_k)|`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.coeffs.len();
        (0..n).map(|i| (self.coeffs[n - 1 - i] - self.coeffs[i].conj()).norm()).fold(0.0, f64::max)
    }

    /// New field with `c_k ↦ m(k) c_k` for a real symbol.
    pub fn map_symbol(&self, mut symbol: impl FnMut(&[i64]) -> f64) -> FourierField {
        self.map_complex_symbol(move |k| Complex64::new(symbol(k), 0.0))
    }

    pub fn map_complex_symbol(&self, mut symbol: impl FnMut(&[i64]) -> Complex64) -> FourierField {
        let mut k = vec![0; self.dim];
        let coeffs: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                self.mode_of(i, &mut k);
                if c.norm_sqr() == 0.0 {
                    *c
                } else {
                    symbol(&k) * c
                }
            })
            .collect();
        let mut out = FourierField { dim: self.dim, bandwidth: self.bandwidth, coeffs, real: false };
        out.real = self.real && out.conjugate_symmetry_defect() <= 1e-12 * out.max_abs().max(1.0);
        out
    }

    pub fn add(&self, other: &FourierField) -> Result<FourierField> {
        self.check_compatible(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(FourierField { dim: self.dim, bandwidth: self.bandwidth, coeffs, real: self.real && other.real })
    }

    pub fn scale(&self, s: f64) -> FourierField {
        FourierField { coeffs: self.coeffs.iter().map(|c| c * s).collect(), ..self.clone() }
    }

    pub fn check_compatible(&self, other: &FourierField) -> Result<()> {
        if self.dim != other.dim || self.bandwidth != other.bandwidth {
            return Err(Error::domain(format!(
                "fields differ in shape: (d={}, K={}) vs (d={}, K={})",
                self.dim, self.bandwidth, other.dim, other.bandwidth
            )));
        }
        Ok(())
    }

    /// `c_0`, the integral of the field.
    pub fn mean(&self) -> f64 {
        self.coeffs[self.coeffs.len() / 2].re
    }

    /// `‖f‖_2² = Σ |c_k|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `∫ f conj(g) dμ = Σ c_k conj(d_k)`; real for real fields.
    pub fn inner(&self, other: &FourierField) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a * b.conj()).re).sum())
    }

    /// Direct Fourier summation at a point.
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let mut k = vec![0; self.dim];
        let mut s = Complex64::new(0.0, 0.0);
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            self.mode_of(i, &mut k);
            let phase: f64 = k.iter().zip(x).map(|(ka, xa)| *ka as f64 * xa).sum::<f64>() * 2.0 * PI;
            s += c * Complex64::from_polar(1.0, phase);
        }
        s
    }

    pub fn eval_real(&self, x: &[f64]) -> f64 {
        self.eval(x).re
    }

    /// Values on the uniform grid `x_j = j/G`, `G ≥ 2K+1` points per axis.
    pub fn to_grid(&self, size: usize) -> Result<GridField> {
        let values = self.to_complex_grid(size, &SpectralPlan::new(size))?;
        Ok(GridField { dim: self.dim, size, values: values.into_iter().map(|c| c.re).collect() })
    }

    pub(crate) fn to_complex_grid(&self, size: usize, plan: &SpectralPlan) -> Result<Vec<Complex64>> {
        if size < 2 * self.bandwidth + 1 {
            return Err(Error::domain(format!("grid {size} aliases bandwidth {}", self.bandwidth)));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); size.pow(self.dim as u32)];
        let mut k = vec![0; self.dim];
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            self.mode_of(i, &mut k);
            let mut idx = 0usize;
            for &ka in &k {
                idx = idx * size + ka.rem_euclid(size as i64) as usize;
            }
            buf[idx] = *c;
        }
        plan.transform(&mut buf, self.dim, Direction::Inverse);
        Ok(buf)
    }

    /// Coefficients `|k_a| ≤ K` of a grid field (exact for band-limited data).
    pub fn from_grid(grid: &GridField, bandwidth: usize) -> Result<FourierField> {
        let size = grid.size;
        if size < 2 * bandwidth + 1 {
            return Err(Error::domain(format!("grid {size} cannot resolve bandwidth {bandwidth}")));
        }
        let plan = SpectralPlan::new(size);
        let mut buf: Vec<Complex64> = grid.values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        plan.transform(&mut buf, grid.dim, Direction::Forward);
        let norm = 1.0 / buf.len() as f64;
        let mut f = FourierField::zeros(grid.dim, bandwidth);
        let mut k = vec![0; grid.dim];
        for i in 0..f.coeffs.len() {
            f.mode_of(i, &mut k);
            let mut idx = 0usize;
            for &ka in &k {
                idx = idx * size + ka.rem_euclid(size as i64) as usize;
            }
            f.coeffs[i] = buf[idx] * norm;
        }
        f.real = true;
        Ok(f)
    }

    /// Exact averages of the field over the `bins^d` cells of side `1/bins`,
    /// row-major over cells.
    pub fn bin_averages(&self, bins: usize) -> Vec<f64> {
        let h = 1.0 / bins as f64;
        // Average of e^{2πi k x} over [j h, (j+1) h).
        let cell = |ka: i64, j: usize| -> Complex64 {
            if ka == 0 {
                return Complex64::new(1.0, 0.0);
            }
            let w = 2.0 * PI * ka as f64;
            let a = j as f64 * h;
            (Complex64::from_polar(1.0, w * (a + h)) - Complex64::from_polar(1.0, w * a)) / Complex64::new(0.0, w * h)
        };
        let n_cells = bins.pow(self.dim as u32);
        let modes = self.nonzero_modes();
        let mut out = vec![0.0; n_cells];
        let mut cell_idx = vec![0usize; self.dim];
        for (c, slot) in out.iter_mut().enumerate() {
            let mut r = c;
            for a in (0..self.dim).rev() {
                cell_idx[a] = r % bins;
                r /= bins;
            }
            let mut s = Complex64::new(0.0, 0.0);
            for (k, coef) in &modes {
                let mut term = *coef;
                for a in 0..self.dim {
                    term *= cell(k[a], cell_idx[a]);
                }
                s += term;
            }
            *slot = s.re;
        }
        out
    }
}

/// Real samples on the uniform grid `{j/G}^d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub dim: usize,
    pub size: usize,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn from_fn(dim: usize, size: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = size.pow(dim as u32);
        let mut x = vec![0.0; dim];
        let values = (0..n)
            .map(|i| {
                grid_point(i, dim, size, &mut x);
                f(&x)
            })
            .collect();
        GridField { dim, size, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Coordinates of flat grid index `i`.
pub fn grid_point(mut i: usize, dim: usize, size: usize, out: &mut [f64]) {
    for a in (0..dim).rev() {
        out[a] = (i % size) as f64 / size as f64;
        i /= size;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `X_k = Σ_j x_j e^{−2πi jk/G}`
    Forward,
    /// `x_j = Σ_k X_k e^{+2πi jk/G}` (unnormalised)
    Inverse,
}

/// Cached FFT plans for one grid size, applied axis by axis.
#[derive(Clone)]
pub struct SpectralPlan {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("size", &self.size).finish()
    }
}

impl SpectralPlan {
    pub fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        SpectralPlan { size, forward: planner.plan_fft_forward(size), inverse: planner.plan_fft_inverse(size) }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn transform(&self, data: &mut [Complex64], dim: usize, direction: Direction) {
        let n = self.size;
        assert_eq!(data.len(), n.pow(dim as u32));
        let fft = match direction {
            Direction::Forward => &self.forward,
            Direction::Inverse => &self.inverse,
        };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                for inner in 0..stride {
                    let start = o * n * stride + inner;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[start + j * stride] = *v;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field() -> FourierField {
        FourierField::real_trig(
            2,
            3,
            &[
                TrigTerm::Cos { mode: vec![1, 0], amplitude: 1.0 },
                TrigTerm::Sin { mode: vec![1, 1], amplitude: 0.5 },
                TrigTerm::Cos { mode: vec![-2, 3], amplitude: 0.25 },
                TrigTerm::Constant(0.3),
            ],
        )
        .unwrap()
    }

    #[test]
    fn trig_terms_evaluate_pointwise() {
        let f = sample_field();
        assert!(f.is_real());
        assert!(f.conjugate_symmetry_defect() < 1e-15);
        for x in [[0.1, 0.7], [0.33, 0.01], [0.9, 0.5]] {
            let expect = (2.0 * PI * x[0]).cos()
                + 0.5 * (2.0 * PI * (x[0] + x[1])).sin()
                + 0.25 * (2.0 * PI * (-2.0 * x[0] + 3.0 * x[1])).cos()
                + 0.3;
            let got = f.eval(&x);
            assert!((got.re - expect).abs() < 1e-14);
            assert!(got.im.abs() < 1e-14);
        }
        assert!((f.mean() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn grid_round_trip() {
        let f = sample_field();
        for size in [8, 9, 16] {
            let g = f.to_grid(size).unwrap();
            let back = FourierField::from_grid(&g, 3).unwrap();
            let err = f.coeffs.iter().zip(&back.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "size {size}: {err}");
            let mut x = [0.0; 2];
            for i in [0, 5, 17] {
                grid_point(i, 2, size, &mut x);
                assert!((g.values[i] - f.eval_real(&x)).abs() < 1e-12);
            }
        }
        assert!(f.to_grid(6).is_err());
    }

    #[test]
    fn out_of_band_mode_is_rejected() {
        assert!(FourierField::from_modes(1, 2, &[(vec![3], Complex64::new(1.0, 0.0))]).is_err());
        assert!(FourierField::from_modes(2, 2, &[(vec![1], Complex64::new(1.0, 0.0))]).is_err());
    }

    #[test]
    fn bin_averages_match_fine_quadrature() {
        let f = sample_field();
        let bins = 4;
        let avg = f.bin_averages(bins);
        // midpoint rule on a 64x64 sub-grid of each cell
        let m = 64;
        for (c, got) in avg.iter().enumerate() {
            let (ci, cj) = (c / bins, c % bins);
            let mut s = 0.0;
            for a in 0..m {
                for b in 0..m {
                    let x =
                        [(ci as f64 + (a as f64 + 0.5) / m as f64) / bins as f64, (cj as f64 + (b as f64 + 0.5) / m as f64) / bins as f64];
                    s += f.eval_real(&x);
                }
            }
            s /= (m * m) as f64;
            assert!((got - s).abs() < 2e-3, "cell {c}: {got} vs {s}");
        }
        let total: f64 = avg.iter().sum::<f64>() / avg.len() as f64;
        assert!((total - f.mean()).abs() < 1e-14);
    }
}
