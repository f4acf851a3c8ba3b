//! Real scalar and vector fields carried with their Fourier coefficients.
//!
//! A [`SpectralField`] is immutable. It is created from one representation
//! (physical samples or Fourier coefficients) and computes the other on first
//! access. Coefficients follow the normalization documented in [`crate::fft`]:
//! `c_k = n⁻² Σ_x f(x) e^{−iξ_k·x}`, so `Σ_x |f|² h² = L² Σ_k |c_k|²`.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::Grid2D;

/// Which representation [`SpectralField::transform`] populates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Physical samples to Fourier coefficients.
    Forward,
    /// Fourier coefficients to physical samples.
    Inverse,
}

#[derive(Clone, Default)]
struct Component {
    values: OnceLock<Arc<Vec<f64>>>,
    coeffs: OnceLock<Arc<Vec<Complex64>>>,
}

impl Component {
    fn from_values(v: Vec<f64>) -> Self {
        let c = Self::default();
        let _ = c.values.set(Arc::new(v));
        c
    }

    fn from_coeffs(k: Vec<Complex64>) -> Self {
        let c = Self::default();
        let _ = c.coeffs.set(Arc::new(k));
        c
    }

    fn values(&self, n: usize) -> &Arc<Vec<f64>> {
        self.values.get_or_init(|| {
            let k = self.coeffs.get().expect("component has no representation");
            Arc::new(fft::inverse_real(k, n))
        })
    }

    fn coeffs(&self, n: usize) -> &Arc<Vec<Complex64>> {
        self.coeffs.get_or_init(|| {
            let v = self.values.get().expect("component has no representation");
            Arc::new(fft::forward_real(v, n))
        })
    }
}

#[derive(Clone)]
pub struct SpectralField {
    grid: Grid2D,
    comps: Vec<Component>,
}

impl std::fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralField")
            .field("grid", &self.grid)
            .field("components", &self.comps.len())
            .finish()
    }
}

/// Enforce `c_{−k} = conj(c_k)` so the inverse transform is real.
fn hermitian_symmetrize(grid: &Grid2D, k: &mut [Complex64]) {
    let n = grid.n();
    let src = k.to_vec();
    k.par_chunks_mut(n).enumerate().for_each(|(i2, row)| {
        let j2 = (n - i2) % n;
        for (i1, c) in row.iter_mut().enumerate() {
            let j1 = (n - i1) % n;
            let mirror = src[j2 * n + j1];
            *c = 0.5 * (src[i2 * n + i1] + mirror.conj());
        }
    });
}

impl SpectralField {
    fn check_components(count: usize) -> Result<()> {
        if count == 1 || count == 2 {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "fields carry 1 or 2 components, got {count}"
            )))
        }
    }

    /// Field from physical samples, one `Vec` per component.
    pub fn from_values(grid: Grid2D, comps: Vec<Vec<f64>>) -> Result<Self> {
        Self::check_components(comps.len())?;
        if let Some(bad) = comps.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::Shape(format!(
                "expected {} samples per component, got {}",
                grid.len(),
                bad.len()
            )));
        }
        Ok(Self {
            grid,
            comps: comps.into_iter().map(Component::from_values).collect(),
        })
    }

    /// Field from Fourier coefficients. The coefficients are projected onto
    /// the conjugate-symmetric subspace so the field is real.
    pub fn from_coefficients(grid: Grid2D, comps: Vec<Vec<Complex64>>) -> Result<Self> {
        Self::check_components(comps.len())?;
        if let Some(bad) = comps.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::Shape(format!(
                "expected {} coefficients per component, got {}",
                grid.len(),
                bad.len()
            )));
        }
        Ok(Self {
            grid,
            comps: comps
                .into_iter()
                .map(|mut k| {
                    hermitian_symmetrize(&grid, &mut k);
                    Component::from_coeffs(k)
                })
                .collect(),
        })
    }

    pub fn scalar(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        Self::from_values(grid, vec![values])
    }

    pub fn vector(grid: Grid2D, v1: Vec<f64>, v2: Vec<f64>) -> Result<Self> {
        Self::from_values(grid, vec![v1, v2])
    }

    /// Scalar field sampled from a function of position.
    pub fn from_fn<F>(grid: Grid2D, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (x, y) = grid.point(i);
                f(x, y)
            })
            .collect();
        Self {
            grid,
            comps: vec![Component::from_values(values)],
        }
    }

    /// Vector field sampled from a function of position.
    pub fn vector_from_fn<F>(grid: Grid2D, f: F) -> Self
    where
        F: Fn(f64, f64) -> (f64, f64) + Sync,
    {
        let pairs: Vec<(f64, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (x, y) = grid.point(i);
                f(x, y)
            })
            .collect();
        let (v1, v2) = pairs.into_iter().unzip();
        Self {
            grid,
            comps: vec![Component::from_values(v1), Component::from_values(v2)],
        }
    }

    pub fn zeros(grid: Grid2D, components: usize) -> Self {
        Self {
            grid,
            comps: (0..components.clamp(1, 2))
                .map(|_| {
                    let c = Component::default();
                    let _ = c.values.set(Arc::new(vec![0.0; grid.len()]));
                    let _ = c.coeffs.set(Arc::new(vec![Complex64::new(0.0, 0.0); grid.len()]));
                    c
                })
                .collect(),
        }
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            comps: vec![Component::from_values(vec![value; grid.len()])],
        }
    }

    /// Stack two scalar fields into a vector field.
    pub fn stack(a: &SpectralField, b: &SpectralField) -> Result<Self> {
        if a.grid != b.grid || !a.is_scalar() || !b.is_scalar() {
            return Err(Error::Shape("stack needs two scalar fields on one grid".into()));
        }
        Ok(Self {
            grid: a.grid,
            comps: vec![a.comps[0].clone(), b.comps[0].clone()],
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.comps.len()
    }

    #[inline]
    pub fn is_scalar(&self) -> bool {
        self.comps.len() == 1
    }

    /// Physical samples of component `c`.
    pub fn values(&self, c: usize) -> &[f64] {
        self.comps[c].values(self.grid.n())
    }

    /// Fourier coefficients of component `c`.
    pub fn coefficients(&self, c: usize) -> &[Complex64] {
        self.comps[c].coeffs(self.grid.n())
    }

    /// Scalar field holding component `c`.
    pub fn component(&self, c: usize) -> SpectralField {
        Self {
            grid: self.grid,
            comps: vec![self.comps[c].clone()],
        }
    }

    /// Populate the representation selected by `direction`.
    pub fn transform(&self, direction: Direction) -> SpectralField {
        for c in 0..self.components() {
            match direction {
                Direction::Forward => {
                    self.coefficients(c);
                }
                Direction::Inverse => {
                    self.values(c);
                }
            }
        }
        self.clone()
    }

    /// Apply `f(idx, c_k)` to every coefficient of every component.
    pub fn map_coefficients<F>(&self, f: F) -> SpectralField
    where
        F: Fn(usize, Complex64) -> Complex64 + Sync,
    {
        let comps = (0..self.components())
            .map(|c| {
                self.coefficients(c)
                    .par_iter()
                    .enumerate()
                    .map(|(i, &z)| f(i, z))
                    .collect()
            })
            .collect();
        Self::from_coefficients(self.grid, comps).expect("shape preserved")
    }

    /// Apply `f(x)` to every physical sample of every component.
    pub fn map_values<F>(&self, f: F) -> SpectralField
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let comps = (0..self.components())
            .map(|c| self.values(c).par_iter().map(|&v| f(v)).collect())
            .collect();
        Self::from_values(self.grid, comps).expect("shape preserved")
    }

    /// 2/3-rule projection: zero every coefficient with
    /// `max(|k₁|, |k₂|) > n/3`.
    pub fn dealias(&self) -> SpectralField {
        let g = self.grid;
        let cut = g.dealias_index() as i64;
        let n = g.n();
        self.map_coefficients(move |i, z| {
            let k1 = g.signed_index(i % n).abs();
            let k2 = g.signed_index(i / n).abs();
            if k1.max(k2) > cut {
                Complex64::new(0.0, 0.0)
            } else {
                z
            }
        })
    }

    fn assert_same_shape(&self, other: &SpectralField) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        assert_eq!(
            self.components(),
            other.components(),
            "fields have different component counts"
        );
    }

    fn zip_values<F>(&self, other: &SpectralField, f: F) -> SpectralField
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        self.assert_same_shape(other);
        let comps = (0..self.components())
            .map(|c| {
                self.values(c)
                    .par_iter()
                    .zip(other.values(c).par_iter())
                    .map(|(&a, &b)| f(a, b))
                    .collect()
            })
            .collect();
        Self::from_values(self.grid, comps).expect("shape preserved")
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        self.zip_values(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        self.zip_values(other, |a, b| a - b)
    }

    pub fn scale(&self, alpha: f64) -> SpectralField {
        self.map_values(|v| alpha * v)
    }

    /// `self + alpha · other`.
    pub fn axpy(&self, alpha: f64, other: &SpectralField) -> SpectralField {
        self.zip_values(other, |a, b| a + alpha * b)
    }

    /// Linear combination in spectral space; avoids a round trip when both
    /// operands are spectral.
    pub fn add_spectral(&self, alpha: f64, other: &SpectralField) -> SpectralField {
        self.assert_same_shape(other);
        let comps = (0..self.components())
            .map(|c| {
                self.coefficients(c)
                    .par_iter()
                    .zip(other.coefficients(c).par_iter())
                    .map(|(&a, &b)| a + alpha * b)
                    .collect()
            })
            .collect();
        Self::from_coefficients(self.grid, comps).expect("shape preserved")
    }

    /// Pointwise product of a scalar field with a scalar or vector field.
    pub fn mul_scalar_field(&self, scalar: &SpectralField) -> SpectralField {
        assert!(scalar.is_scalar(), "multiplier must be scalar");
        assert_eq!(self.grid, scalar.grid, "fields live on different grids");
        let s = scalar.values(0);
        let comps = (0..self.components())
            .map(|c| {
                self.values(c)
                    .par_iter()
                    .zip(s.par_iter())
                    .map(|(&a, &b)| a * b)
                    .collect()
            })
            .collect();
        Self::from_values(self.grid, comps).expect("shape preserved")
    }

    /// Pointwise Euclidean inner product of two vector fields.
    pub fn dot(&self, other: &SpectralField) -> SpectralField {
        self.assert_same_shape(other);
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                (0..self.components())
                    .map(|c| self.values(c)[i] * other.values(c)[i])
                    .sum()
            })
            .collect();
        Self::scalar(self.grid, values).expect("shape preserved")
    }

    /// Spectral partial derivative `∂₁^{a1} ∂₂^{a2}` of every component.
    pub fn derivative(&self, a1: u32, a2: u32) -> SpectralField {
        if a1 == 0 && a2 == 0 {
            return self.clone();
        }
        let g = self.grid;
        let odd = (a1 + a2) % 2 == 1;
        self.map_coefficients(move |i, z| {
            if odd && g.is_nyquist(i) {
                return Complex64::new(0.0, 0.0);
            }
            let (k1, k2) = g.wavevector(i);
            let f1 = Complex64::new(0.0, k1).powu(a1);
            let f2 = Complex64::new(0.0, k2).powu(a2);
            z * f1 * f2
        })
    }

    /// Gradient of a scalar field.
    pub fn gradient(&self) -> SpectralField {
        assert!(self.is_scalar(), "gradient needs a scalar field");
        let d1 = self.derivative(1, 0);
        let d2 = self.derivative(0, 1);
        SpectralField::stack(&d1, &d2).expect("same grid")
    }

    /// Divergence of a vector field.
    pub fn divergence(&self) -> SpectralField {
        assert_eq!(self.components(), 2, "divergence needs a vector field");
        let d1 = self.component(0).derivative(1, 0);
        let d2 = self.component(1).derivative(0, 1);
        d1.add_spectral(1.0, &d2)
    }

    /// Translate by whole grid cells: `g(x) = f(x − (s1, s2)·h)`.
    pub fn shift(&self, s1: i64, s2: i64) -> SpectralField {
        let n = self.grid.n() as i64;
        let comps = (0..self.components())
            .map(|c| {
                let v = self.values(c);
                (0..self.grid.len())
                    .map(|i| {
                        let i1 = (i as i64 % n - s1).rem_euclid(n);
                        let i2 = (i as i64 / n - s2).rem_euclid(n);
                        v[(i2 * n + i1) as usize]
                    })
                    .collect()
            })
            .collect();
        Self::from_values(self.grid, comps).expect("shape preserved")
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> Vec<f64> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                (0..self.components())
                    .map(|c| self.values(c)[i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Sup norm of the pointwise Euclidean magnitude.
    pub fn linf(&self) -> f64 {
        if self.is_scalar() {
            self.values(0).par_iter().map(|v| v.abs()).reduce(|| 0.0, f64::max)
        } else {
            self.magnitude().into_iter().fold(0.0, f64::max)
        }
    }

    /// `(Σ_x |f(x)|² h²)^{1/2}`.
    pub fn l2(&self) -> f64 {
        let s: f64 = (0..self.components())
            .map(|c| self.values(c).par_iter().map(|v| v * v).sum::<f64>())
            .sum();
        (s * self.grid.cell_area()).sqrt()
    }

    /// `L^p` norm of the pointwise magnitude; `p = ∞` gives [`Self::linf`].
    pub fn lp(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.linf();
        }
        let s: f64 = self.magnitude().iter().map(|v| v.powf(p)).sum();
        (s * self.grid.cell_area()).powf(1.0 / p)
    }

    /// `L²` norm evaluated from the coefficients (Parseval).
    pub fn l2_spectral(&self) -> f64 {
        let s: f64 = (0..self.components())
            .map(|c| self.coefficients(c).par_iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        self.grid.length() * s.sqrt()
    }

    /// Mean of component `c`.
    pub fn mean(&self, c: usize) -> f64 {
        self.coefficients(c)[0].re
    }

    /// `max_x |self − other|` over the pointwise Euclidean magnitude.
    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.sub(other).linf()
    }

    /// Spectral inner product `L² Σ_k Re(a_k conj(b_k))` summed over
    /// components; equals the `L²` inner product of the two fields.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        self.assert_same_shape(other);
        let s: f64 = (0..self.components())
            .map(|c| {
                self.coefficients(c)
                    .par_iter()
                    .zip(other.coefficients(c).par_iter())
                    .map(|(a, b)| (a * b.conj()).re)
                    .sum::<f64>()
            })
            .sum();
        s * self.grid.length().powi(2)
    }

    /// The same Fourier series sampled on another grid of the same box.
    /// Modes absent on the target grid are dropped; Nyquist modes are dropped
    /// when refining so the result stays real.
    pub fn resample(&self, target: Grid2D) -> Result<SpectralField> {
        if (target.length() - self.grid.length()).abs() > 1e-12 * self.grid.length() {
            return Err(Error::Shape("resampling requires equal box sizes".into()));
        }
        let (ns, nt) = (self.grid.n(), target.n());
        let keep = (ns.min(nt) / 2) as i64;
        let comps = (0..self.components())
            .map(|c| {
                let src = self.coefficients(c);
                let mut dst = vec![Complex64::new(0.0, 0.0); target.len()];
                for (i, z) in src.iter().enumerate() {
                    let k1 = self.grid.signed_index(i % ns);
                    let k2 = self.grid.signed_index(i / ns);
                    if k1.abs() >= keep || k2.abs() >= keep {
                        continue;
                    }
                    dst[target.fourier_index(k2) * nt + target.fourier_index(k1)] = *z;
                }
                dst
            })
            .collect();
        Self::from_coefficients(target, comps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid2D {
        Grid2D::periodic(n).unwrap()
    }

    fn pseudo_random(g: Grid2D, seed: u64) -> SpectralField {
        SpectralField::from_fn(g, move |x, y| {
            let s = seed as f64;
            (3.0 * x + s).sin() * (2.0 * y).cos() + (x * y / 7.0 + s).sin()
        })
    }

    #[test]
    fn constant_field_has_single_zero_mode() {
        let g = grid(16);
        let f = SpectralField::constant(g, 3.0);
        let c = f.coefficients(0);
        assert!((c[0].re - 3.0).abs() < 1e-14);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn plane_wave_has_two_coefficients() {
        let g = grid(32);
        let f = SpectralField::from_fn(g, |x, _| x.cos());
        let c = f.coefficients(0);
        let nonzero: Vec<usize> = (0..g.len()).filter(|&i| c[i].norm() > 1e-12).collect();
        assert_eq!(nonzero, vec![1, 31]);
        assert!((c[1].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn parseval_constant_is_box_area() {
        let g = Grid2D::new(64, 3.0).unwrap();
        let f = pseudo_random(g, 3);
        let rel = (f.l2() - f.l2_spectral()).abs() / f.l2();
        assert!(rel < 1e-12, "{rel}");
    }

    #[test]
    fn dealias_removes_nyquist_and_keeps_low_band() {
        let g = grid(32);
        let nyq = SpectralField::from_fn(g, |x, _| (16.0 * x).cos());
        assert!(nyq.dealias().linf() < 1e-12);
        let low = SpectralField::from_fn(g, |x, y| (3.0 * x + 5.0 * y).sin());
        assert!(low.dealias().max_abs_diff(&low) < 1e-13);
    }

    #[test]
    fn derivatives_of_plane_waves() {
        let g = grid(32);
        let f = SpectralField::from_fn(g, |x, y| (2.0 * x + 3.0 * y).sin());
        let d = f.derivative(1, 1);
        let exact = SpectralField::from_fn(g, |x, y| -6.0 * (2.0 * x + 3.0 * y).sin());
        assert!(d.max_abs_diff(&exact) < 1e-11);
        let div = f.gradient().divergence();
        let lap = SpectralField::from_fn(g, |x, y| -13.0 * (2.0 * x + 3.0 * y).sin());
        assert!(div.max_abs_diff(&lap) < 1e-10);
    }

    #[test]
    fn from_coefficients_is_real() {
        let g = grid(16);
        let mut k = vec![Complex64::new(0.0, 0.0); g.len()];
        k[3] = Complex64::new(1.0, 2.0);
        let f = SpectralField::from_coefficients(g, vec![k]).unwrap();
        let expect = SpectralField::from_fn(g, |x, _| (3.0 * x).cos() - 2.0 * (3.0 * x).sin());
        assert!(f.max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn resample_preserves_band_limited_fields() {
        let f = SpectralField::from_fn(grid(32), |x, y| (2.0 * x).sin() * (5.0 * y).cos());
        let up = f.resample(grid(64)).unwrap();
        let exact = SpectralField::from_fn(grid(64), |x, y| (2.0 * x).sin() * (5.0 * y).cos());
        assert!(up.max_abs_diff(&exact) < 1e-13);
    }

    #[test]
    fn shift_translates_by_cells() {
        let g = grid(32);
        let f = SpectralField::from_fn(g, |x, y| x.sin() + (2.0 * y).cos());
        let h = g.spacing();
        let s = f.shift(3, -2);
        let exact = SpectralField::from_fn(g, |x, y| (x - 3.0 * h).sin() + (2.0 * (y + 2.0 * h)).cos());
        assert!(s.max_abs_diff(&exact) < 1e-13);
    }
}
