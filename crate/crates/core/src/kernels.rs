//! The Riesz kernel `Φ_β = C_β|x|^{−β}` and its near/far split.
//!
//! With a radial cutoff `a` (1 on `B₁`, 0 off `B₂`) the velocity splits into
//! the near kernel `∇⊥(aΦ_β)`, compactly supported with an integrable
//! `|x|^{−β−1}` singularity, and the far kernel `∇∇⊥((1−a)Φ_β)`, smooth with
//! `|x|^{−β−2}` decay. Kernels are sampled at minimum-image grid points and
//! applied as periodic convolutions through their cached transforms. The far
//! operator itself is built in Fourier space as the complement of the near
//! operator in the exact symbol, so near and far reassemble the velocity law
//! to rounding.
//!
//! Kernels that reach the box edge are periodized by summing images
//! `K(x + mL)` over a square of lattice vectors; the remaining shells are
//! replaced by the leading isotropic Taylor term, which decays like
//! `M^{−β}` or faster.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid2D;
use crate::multipliers::{apply_multiplier, MultiplierSpec};
use crate::special::{gamma, integrate, lattice_zeta, smooth_step_with_derivatives};
use crate::verify::VerificationReport;

/// Largest grid spacing that resolves the cutoff transition.
pub const MAX_SPACING: f64 = 0.125;
/// Smallest box that leaves room for the far field.
pub const MIN_LENGTH: f64 = 16.0;

const RIESZ_IMAGES: i64 = 10;

/// Normalization making `C_β|x|^{−β}` the fundamental solution of
/// `(−Δ)^{1−β/2}` in the plane.
pub fn c_beta(beta: f64) -> f64 {
    gamma(0.5 * beta) / (2f64.powf(2.0 - beta) * PI * gamma(1.0 - 0.5 * beta))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("β = {beta} is outside (0, 1)")))
    }
}

/// Radial cutoff: 1 for `ρ ≤ inner`, 0 for `ρ ≥ outer`, smooth and
/// decreasing in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffA {
    pub inner: f64,
    pub outer: f64,
}

impl Default for CutoffA {
    fn default() -> Self {
        Self {
            inner: 1.0,
            outer: 2.0,
        }
    }
}

impl CutoffA {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && outer > inner) {
            return Err(Error::Config(format!(
                "cutoff radii must satisfy 0 < inner < outer, got {inner}, {outer}"
            )));
        }
        Ok(Self { inner, outer })
    }

    /// `(a, a′, a″)` at radius `rho`.
    pub fn profile(&self, rho: f64) -> (f64, f64, f64) {
        let w = self.outer - self.inner;
        let (s, s1, s2) = smooth_step_with_derivatives((rho - self.inner) / w);
        (1.0 - s, -s1 / w, -s2 / (w * w))
    }

    pub fn value(&self, rho: f64) -> f64 {
        self.profile(rho).0
    }
}

/// `(Φ, Φ′, Φ″)` of `C ρ^{−β}`.
#[inline]
fn riesz(beta: f64, c: f64, rho: f64) -> (f64, f64, f64) {
    let p = c * rho.powf(-beta);
    (p, -beta * p / rho, beta * (beta + 1.0) * p / (rho * rho))
}

/// Hessian `(H₁₁, H₁₂, H₂₂)` of a radial function with derivatives `d1, d2`.
#[inline]
fn radial_hessian(x: f64, y: f64, rho: f64, d1: f64, d2: f64) -> [f64; 3] {
    let (ex, ey) = (x / rho, y / rho);
    let t = d1 / rho;
    [
        d2 * ex * ex + t * (1.0 - ex * ex),
        (d2 - t) * ex * ey,
        d2 * ey * ey + t * (1.0 - ey * ey),
    ]
}

/// Far kernel entries `[F₁₁, F₁₂, F₂₁, F₂₂]` with `F_{ij} = ∂_j ∇⊥_i`
/// from a Hessian.
#[inline]
fn far_from_hessian(h: [f64; 3]) -> [f64; 4] {
    [-h[1], -h[2], h[0], h[1]]
}

/// `Σ_{|m|_∞ > M} |m|^{−p}` over ℤ², approximated by the integral outside the
/// square of half-width `M + 1/2`. Requires `p > 2`.
fn lattice_tail(p: f64, m: i64) -> f64 {
    let a = m as f64 + 0.5;
    8.0 * integrate(|phi| (a / phi.cos()).powf(2.0 - p), 0.0, 0.25 * PI, 4) / (p - 2.0)
}

fn images(m: i64) -> impl Iterator<Item = (f64, f64)> {
    (-m..=m)
        .flat_map(move |a| (-m..=m).map(move |b| (a, b)))
        .filter(|&(a, b)| (a, b) != (0, 0))
        .map(|(a, b)| (a as f64, b as f64))
}

fn spectral_convolve(kernel: &[Complex64], f: &[Complex64], area: f64) -> Vec<Complex64> {
    kernel.par_iter().zip(f).map(|(k, z)| area * k * z).collect()
}

fn forward(grid: Grid2D, values: Vec<f64>) -> Vec<Complex64> {
    SpectralField::scalar(grid, values)
        .expect("sampled on grid")
        .coefficients(0)
        .to_vec()
}

/// Near kernel `∇⊥(aΦ_β)` at `(x, y)`; zero at the origin and off `B_outer`.
pub fn near_kernel(beta: f64, cutoff: &CutoffA, x: f64, y: f64) -> (f64, f64) {
    let rho = x.hypot(y);
    if rho == 0.0 || rho >= cutoff.outer {
        return (0.0, 0.0);
    }
    let c = c_beta(beta);
    let (p, p1, _) = riesz(beta, c, rho);
    let (a, a1, _) = cutoff.profile(rho);
    let d = (a1 * p + a * p1) / rho;
    (-y * d, x * d)
}

/// Far kernel `∇∇⊥((1−a)Φ_β)` at `(x, y)` as `[F₁₁, F₁₂, F₂₁, F₂₂]`.
pub fn far_kernel(beta: f64, cutoff: &CutoffA, x: f64, y: f64) -> [f64; 4] {
    let rho = x.hypot(y);
    if rho <= cutoff.inner {
        return [0.0; 4];
    }
    let c = c_beta(beta);
    let (p, p1, p2) = riesz(beta, c, rho);
    let (a, a1, a2) = cutoff.profile(rho);
    let h1 = -a1 * p + (1.0 - a) * p1;
    let h2 = -a2 * p - 2.0 * a1 * p1 + (1.0 - a) * p2;
    far_from_hessian(radial_hessian(x, y, rho, h1, h2))
}

/// Quadrature `L¹` norm of the near kernel on a lattice of spacing `h`,
/// with the leading lattice correction for the `|x|^{−β−1}` singularity.
pub fn near_l1_norm(beta: f64, cutoff: &CutoffA, h: f64) -> f64 {
    let m = (cutoff.outer / h).ceil() as i64;
    let sum: f64 = (-m..=m)
        .into_par_iter()
        .map(|a| {
            (-m..=m)
                .map(|b| {
                    let (u, v) = near_kernel(beta, cutoff, a as f64 * h, b as f64 * h);
                    u.hypot(v)
                })
                .sum::<f64>()
        })
        .sum();
    h * h * sum - h.powf(1.0 - beta) * beta * c_beta(beta) * lattice_zeta(0.5 * (1.0 + beta))
}

/// Periodized Riesz kernel `Φ_β` sampled on `grid`, up to an additive
/// constant. The origin carries the lattice weight of the `|x|^{−β}`
/// singularity; `scale` multiplies `C_β`.
pub fn periodic_riesz_samples(grid: Grid2D, beta: f64, scale: f64) -> Vec<f64> {
    let c = scale * c_beta(beta);
    let l = grid.length();
    let h = grid.spacing();
    let tail = 0.25 * c * beta * beta * l.powf(-beta - 2.0) * lattice_tail(beta + 2.0, RIESZ_IMAGES);
    let offsets: Vec<(f64, f64, f64)> = images(RIESZ_IMAGES)
        .map(|(a, b)| (a * l, b * l, c * (a * l).hypot(b * l).powf(-beta)))
        .collect();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (x, y) = grid.centered_point(i);
            let own = if i == 0 {
                -c * lattice_zeta(0.5 * beta) * h.powf(-beta)
            } else {
                c * x.hypot(y).powf(-beta)
            };
            let wrapped: f64 = offsets
                .iter()
                .map(|&(dx, dy, base)| c * (x + dx).hypot(y + dy).powf(-beta) - base)
                .sum();
            own + wrapped + tail * (x * x + y * y)
        })
        .collect()
}

/// Sampled near/far split with cached transforms.
#[derive(Debug, Clone)]
pub struct KernelSplit {
    beta: f64,
    c_beta: f64,
    cutoff: CutoffA,
    grid: Grid2D,
    near: [Vec<f64>; 2],
    far: [Vec<f64>; 4],
    near_hat: [Vec<Complex64>; 2],
    far_hat: [Vec<Complex64>; 4],
    moment: f64,
}

impl KernelSplit {
    pub fn build_split(grid: Grid2D, beta: f64, cutoff: CutoffA) -> Result<Self> {
        check_beta(beta)?;
        if grid.spacing() > MAX_SPACING {
            return Err(Error::Config(format!(
                "spacing {} exceeds {MAX_SPACING}; the cutoff transition is unresolved",
                grid.spacing()
            )));
        }
        if grid.length() < MIN_LENGTH.max(4.0 * cutoff.outer) {
            return Err(Error::Config(format!(
                "box length {} leaves no room for the far field",
                grid.length()
            )));
        }
        let c = c_beta(beta);
        let l = grid.length();
        let h = grid.spacing();

        let near: Vec<(f64, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (x, y) = grid.centered_point(i);
                near_kernel(beta, &cutoff, x, y)
            })
            .collect();
        let (n1, n2): (Vec<f64>, Vec<f64>) = near.into_iter().unzip();

        let far: Vec<[f64; 4]> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (x, y) = grid.centered_point(i);
                far_kernel(beta, &cutoff, x, y)
            })
            .collect();
        let far: [Vec<f64>; 4] = std::array::from_fn(|k| far.iter().map(|f| f[k]).collect());

        // Odd kernel: the punctured lattice sum misses a first-moment term
        // proportional to h^{2−β}∇⊥θ, restored here in spectral form.
        let moment = h.powf(2.0 - beta) * 0.5 * beta * c * lattice_zeta(0.5 * beta);
        let area = l * l;
        let correction = |k: usize, i: usize| -> Complex64 {
            if grid.is_nyquist(i) {
                return Complex64::new(0.0, 0.0);
            }
            let (k1, k2) = grid.wavevector(i);
            let v = if k == 0 { k2 } else { -k1 };
            Complex64::new(0.0, moment * v / area)
        };
        let near_hat: [Vec<Complex64>; 2] = std::array::from_fn(|k| {
            let v = if k == 0 { n1.clone() } else { n2.clone() };
            forward(grid, v)
                .into_iter()
                .enumerate()
                .map(|(i, z)| z + correction(k, i))
                .collect()
        });
        // The far operator is the complement of the discrete near operator in
        // the exact Biot-Savart symbol, differentiated once more. Sampling the
        // second derivatives of the cutoff directly aliases at the percent
        // level for h near 1/8, which would swamp the time error of the
        // Serfati reconstruction.
        let far_hat: [Vec<Complex64>; 4] = std::array::from_fn(|k| {
            let (i, j) = (k / 2, k % 2);
            (0..grid.len())
                .into_par_iter()
                .map(|idx| {
                    if idx == 0 || grid.is_nyquist(idx) {
                        return Complex64::new(0.0, 0.0);
                    }
                    let (k1, k2) = grid.wavevector(idx);
                    let m = grid.wavenumber(idx).powf(beta - 2.0);
                    let bs = if i == 0 { -k2 * m } else { k1 * m };
                    let rest = Complex64::new(0.0, bs / area) - near_hat[i][idx];
                    let d = if j == 0 { k1 } else { k2 };
                    Complex64::new(0.0, d) * rest
                })
                .collect()
        });

        Ok(Self {
            beta,
            c_beta: c,
            cutoff,
            grid,
            near: [n1, n2],
            far,
            near_hat,
            far_hat,
            moment,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn c_beta(&self) -> f64 {
        self.c_beta
    }

    pub fn cutoff(&self) -> &CutoffA {
        &self.cutoff
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Coefficient of the first-moment correction `(∂₂θ, −∂₁θ)` added to the
    /// punctured near-kernel sum.
    pub fn moment_correction(&self) -> f64 {
        self.moment
    }

    /// Near kernel samples as a vector field.
    pub fn near_field(&self) -> SpectralField {
        SpectralField::vector(self.grid, self.near[0].clone(), self.near[1].clone()).expect("grid")
    }

    /// Row `i` of the sampled far kernel as a vector field `(F_{i1}, F_{i2})`.
    /// These are point samples; [`Self::contract_far`] applies the
    /// spectral far operator, which agrees with them up to aliasing of the
    /// cutoff transition.
    pub fn far_row(&self, i: usize) -> SpectralField {
        SpectralField::vector(self.grid, self.far[2 * i].clone(), self.far[2 * i + 1].clone())
            .expect("grid")
    }

    fn check_grid(&self, f: &SpectralField) -> Result<()> {
        if *f.grid() != self.grid {
            return Err(Error::Shape("field and kernel live on different grids".into()));
        }
        Ok(())
    }

    /// `∇⊥(aΦ_β) ∗ θ`.
    pub fn convolve_near(&self, theta: &SpectralField) -> Result<SpectralField> {
        self.check_grid(theta)?;
        if !theta.is_scalar() {
            return Err(Error::Shape("near convolution takes a scalar field".into()));
        }
        let area = self.grid.length().powi(2);
        let t = theta.coefficients(0);
        let comps = self.near_hat.iter().map(|k| spectral_convolve(k, t, area)).collect();
        SpectralField::from_coefficients(self.grid, comps)
    }

    /// `∇∇⊥((1−a)Φ_β) ∗· (θu)`: component `i` is `Σ_j F_{ij} ∗ (θ u_j)`.
    pub fn convolve_far(&self, theta: &SpectralField, u: &SpectralField) -> Result<SpectralField> {
        self.check_grid(theta)?;
        self.check_grid(u)?;
        if !theta.is_scalar() || u.components() != 2 {
            return Err(Error::Shape("far convolution takes a scalar and a vector".into()));
        }
        self.contract_far(&u.mul_scalar_field(theta))
    }

    /// `Σ_j F_{ij} ∗ w_j` for a vector field `w`.
    pub fn contract_far(&self, w: &SpectralField) -> Result<SpectralField> {
        self.check_grid(w)?;
        let area = self.grid.length().powi(2);
        let (w1, w2) = (w.coefficients(0), w.coefficients(1));
        let row = |i: usize| -> Vec<Complex64> {
            let (a, b) = (&self.far_hat[2 * i], &self.far_hat[2 * i + 1]);
            (0..w1.len())
                .into_par_iter()
                .map(|k| area * (a[k] * w1[k] + b[k] * w2[k]))
                .collect()
        };
        SpectralField::from_coefficients(self.grid, vec![row(0), row(1)])
    }

    /// `∇⊥((1−a)Φ_β) ∗ θ` with the periodized kernel, for split checks.
    pub fn convolve_far_gradient(&self, theta: &SpectralField) -> Result<SpectralField> {
        self.check_grid(theta)?;
        let (beta, c, cut) = (self.beta, self.c_beta, self.cutoff);
        let l = self.grid.length();
        let offsets: Vec<(f64, f64)> = images(RIESZ_IMAGES).map(|(a, b)| (a * l, b * l)).collect();
        let swirl = 0.5 * c * beta * beta * l.powf(-beta - 2.0) * lattice_tail(beta + 2.0, RIESZ_IMAGES);
        let grid = self.grid;
        let samples: Vec<(f64, f64)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let (x, y) = grid.centered_point(i);
                let mut v = (swirl * -y, swirl * x);
                let rho = x.hypot(y);
                if rho > cut.inner {
                    let (p, p1, _) = riesz(beta, c, rho);
                    let (a, a1, _) = cut.profile(rho);
                    let d = (-a1 * p + (1.0 - a) * p1) / rho;
                    v.0 -= y * d;
                    v.1 += x * d;
                }
                for &(dx, dy) in &offsets {
                    let (px, py) = (x + dx, y + dy);
                    let r = px.hypot(py);
                    let d = riesz(beta, c, r).1 / r;
                    v.0 -= py * d;
                    v.1 += px * d;
                }
                v
            })
            .collect();
        let (k1, k2): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        let area = l * l;
        let t = theta.coefficients(0);
        let comps = [k1, k2]
            .into_iter()
            .map(|k| {
                let mut z = forward(grid, k);
                z[0] = Complex64::new(0.0, 0.0);
                spectral_convolve(&z, t, area)
            })
            .collect();
        SpectralField::from_coefficients(grid, comps)
    }

    /// `L¹` norm of the near kernel at this grid's spacing.
    pub fn near_l1(&self) -> f64 {
        near_l1_norm(self.beta, &self.cutoff, self.grid.spacing())
    }

    /// Decay exponent of the unperiodized far kernel between `L/4` and the
    /// last grid point before `L/2` along the first axis.
    pub fn far_decay_exponent(&self) -> f64 {
        let n = self.grid.n();
        let h = self.grid.spacing();
        let r1 = (n / 4) as f64 * h;
        let r2 = (n / 2 - 1) as f64 * h;
        let norm = |r: f64| {
            far_kernel(self.beta, &self.cutoff, r, 0.0)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        };
        (norm(r2) / norm(r1)).ln() / (r2 / r1).ln()
    }

    /// `max_ξ |ξ|^{2−β}|F(aΦ_β)(ξ)|` over the grid's wavevectors.
    pub fn fourier_bound(&self) -> f64 {
        let (beta, c, cut) = (self.beta, self.c_beta, self.cutoff);
        let h = self.grid.spacing();
        let grid = self.grid;
        let samples: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if i == 0 {
                    return -c * lattice_zeta(0.5 * beta) * h.powf(-beta);
                }
                let (x, y) = grid.centered_point(i);
                let rho = x.hypot(y);
                cut.value(rho) * c * rho.powf(-beta)
            })
            .collect();
        let area = grid.length().powi(2);
        forward(grid, samples)
            .iter()
            .enumerate()
            .map(|(i, z)| grid.wavenumber(i).powf(2.0 - beta) * area * z.norm())
            .fold(0.0, f64::max)
    }
}

/// Relative `L²` residual of `(−Δ)^{1−β/2}(scale·Φ_β ∗ g)` against `g − ḡ`.
pub fn fundamental_residual(beta: f64, g: &SpectralField, scale: f64) -> Result<f64> {
    check_beta(beta)?;
    let grid = *g.grid();
    let phi = forward(grid, periodic_riesz_samples(grid, beta, scale));
    let area = grid.length().powi(2);
    let conv = SpectralField::from_coefficients(grid, vec![spectral_convolve(&phi, g.coefficients(0), area)])?;
    let back = apply_multiplier(&conv, &MultiplierSpec::frac_laplacian(2.0 - beta))?;
    let mean = g.mean(0);
    let target = g.map_values(|v| v - mean);
    let denom = target.l2();
    if denom == 0.0 {
        return Ok(back.l2());
    }
    Ok(back.sub(&target).l2() / denom)
}

/// Gaussian of width `L/20` centered at the grid origin.
pub fn fundamental_test_function(grid: Grid2D) -> SpectralField {
    let sigma = grid.length() / 20.0;
    let values = (0..grid.len())
        .map(|i| {
            let (x, y) = grid.centered_point(i);
            (-(x * x + y * y) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    SpectralField::scalar(grid, values).expect("grid")
}

/// Residual of the fundamental-solution identity on `grid` and on two
/// coarser grids of the same box. Passes when the finest residual is at
/// most `1e−2` and the residual strictly decreases under refinement.
pub fn verify_fundamental_solution(beta: f64, grid: Grid2D) -> Result<VerificationReport> {
    check_beta(beta)?;
    let mut report = VerificationReport::new("fundamental_solution")
        .param("beta", beta)
        .param("n", grid.n() as f64)
        .param("length", grid.length());
    let sizes = [grid.n() / 4, grid.n() / 2, grid.n()];
    let mut errors = Vec::new();
    for (t, &n) in sizes.iter().enumerate() {
        let g = grid.with_n(n)?;
        let e = fundamental_residual(beta, &fundamental_test_function(g), 1.0)?;
        report.push(format!("n={n}"), t, e);
        errors.push(e);
    }
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    if !decreasing {
        report.note("residual does not decrease under refinement");
    }
    let ceiling = 1e-2;
    report.ceiling = ceiling;
    report.stability = 0.0;
    report.verdict = if decreasing && errors[2] <= ceiling {
        crate::verify::Verdict::Pass
    } else {
        crate::verify::Verdict::Fail
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipliers::biot_savart_velocity;

    fn box_grid(n: usize) -> Grid2D {
        Grid2D::new(n, 16.0 * PI).unwrap()
    }

    #[test]
    fn cutoff_profile() {
        let a = CutoffA::default();
        assert_eq!(a.value(0.3), 1.0);
        assert_eq!(a.value(1.0), 1.0);
        assert_eq!(a.value(2.0), 0.0);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = a.value(1.0 + k as f64 / 100.0);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!(CutoffA::new(2.0, 1.0).is_err());
    }

    #[test]
    fn riesz_constant_at_half() {
        // Γ(1/4) / (2^{3/2} π Γ(3/4))
        assert!((c_beta(0.5) - 0.332_967_935_501_700).abs() < 1e-12, "{}", c_beta(0.5));
    }

    #[test]
    fn kernels_inside_the_unit_ball() {
        let beta = 0.5;
        let cut = CutoffA::default();
        let (x, y) = (0.3, 0.4);
        let rho: f64 = 0.5;
        let d = -c_beta(beta) * beta * rho.powf(-beta - 1.0) / rho;
        let (u, v) = near_kernel(beta, &cut, x, y);
        assert!((u - (-y * d)).abs() < 1e-14 && (v - x * d).abs() < 1e-14);
        assert_eq!(far_kernel(beta, &cut, x, y), [0.0; 4]);
        assert_eq!(near_kernel(beta, &cut, 2.0, 0.1), (0.0, 0.0));
    }

    #[test]
    fn far_kernel_matches_finite_differences() {
        let beta = 0.4;
        let cut = CutoffA::default();
        let e = 1e-4;
        // ∇⊥h for h = (1−a)Φ, differentiated numerically.
        let grad_perp = |x: f64, y: f64| {
            let rho = x.hypot(y);
            let (p, p1, _) = riesz(beta, c_beta(beta), rho);
            let (a, a1, _) = cut.profile(rho);
            let d = (-a1 * p + (1.0 - a) * p1) / rho;
            (-y * d, x * d)
        };
        for &(x, y) in &[(1.3, 0.2), (0.9, -1.1), (3.0, 2.0)] {
            let f = far_kernel(beta, &cut, x, y);
            let dx = |i: usize| {
                let p = grad_perp(x + e, y);
                let m = grad_perp(x - e, y);
                if i == 0 { (p.0 - m.0) / (2.0 * e) } else { (p.1 - m.1) / (2.0 * e) }
            };
            let dy = |i: usize| {
                let p = grad_perp(x, y + e);
                let m = grad_perp(x, y - e);
                if i == 0 { (p.0 - m.0) / (2.0 * e) } else { (p.1 - m.1) / (2.0 * e) }
            };
            let fd = [dx(0), dy(0), dx(1), dy(1)];
            for k in 0..4 {
                assert!((f[k] - fd[k]).abs() < 1e-6, "({x},{y}) entry {k}: {} vs {}", f[k], fd[k]);
            }
        }
    }

    #[test]
    fn build_rejects_bad_input() {
        let cut = CutoffA::default();
        assert!(matches!(KernelSplit::build_split(box_grid(512), 1.0, cut), Err(Error::Domain(_))));
        assert!(matches!(KernelSplit::build_split(box_grid(256), 0.5, cut), Err(Error::Config(_))));
        let small = Grid2D::new(128, 8.0).unwrap();
        assert!(matches!(KernelSplit::build_split(small, 0.5, cut), Err(Error::Config(_))));
    }

    #[test]
    fn near_l1_converges() {
        let cut = CutoffA::default();
        let a = near_l1_norm(0.5, &cut, 1.0 / 32.0);
        let b = near_l1_norm(0.5, &cut, 1.0 / 64.0);
        assert!((a - b).abs() / b <= 0.02, "{a} {b}");
    }

    #[test]
    fn far_decay_exponent_is_homogeneous() {
        let s = KernelSplit::build_split(box_grid(512), 0.5, CutoffA::default()).unwrap();
        assert!((s.far_decay_exponent() + 2.5).abs() < 0.05);
        assert!(s.fourier_bound().is_finite());
    }

    fn gaussian(grid: Grid2D, sigma: f64) -> SpectralField {
        let c = 0.5 * grid.length();
        SpectralField::from_fn(grid, move |x, y| {
            (-((x - c).powi(2) + (y - c).powi(2)) / (2.0 * sigma * sigma)).exp()
        })
    }

    #[test]
    fn near_convolution_trivial_inputs() {
        let g = box_grid(512);
        let s = KernelSplit::build_split(g, 0.5, CutoffA::default()).unwrap();
        assert_eq!(s.convolve_near(&SpectralField::zeros(g, 1)).unwrap().linf(), 0.0);
        assert!(s.convolve_near(&SpectralField::constant(g, 1.0)).unwrap().linf() < 1e-10);
        let u = SpectralField::constant(g, 1.0).dealias();
        let w = SpectralField::stack(&u, &u).unwrap();
        assert_eq!(s.convolve_far(&SpectralField::zeros(g, 1), &w).unwrap().linf(), 0.0);
    }

    /// Punctured lattice sum evaluated point by point, plus the analytic
    /// first-moment term using the exact Gaussian gradient.
    #[test]
    fn near_convolution_matches_direct_quadrature() {
        let g = box_grid(512);
        let beta = 0.5;
        let cut = CutoffA::default();
        let s = KernelSplit::build_split(g, beta, cut).unwrap();
        let sigma = 0.6;
        let theta = gaussian(g, sigma);
        let fast = s.convolve_near(&theta).unwrap();
        let h = g.spacing();
        let c = 0.5 * g.length();
        let m = (cut.outer / h).ceil() as i64;
        let n = g.n() as i64;
        let vals = theta.values(0);
        let mut worst: f64 = 0.0;
        for &(i1, i2) in &[(256i64, 256i64), (260, 250), (270, 256), (240, 275), (300, 300)] {
            let (mut u, mut v) = (0.0, 0.0);
            for a in -m..=m {
                for b in -m..=m {
                    let (k1, k2) = near_kernel(beta, &cut, a as f64 * h, b as f64 * h);
                    let j = ((i2 - b).rem_euclid(n) * n + (i1 - a).rem_euclid(n)) as usize;
                    u += h * h * k1 * vals[j];
                    v += h * h * k2 * vals[j];
                }
            }
            let (x, y) = (i1 as f64 * h - c, i2 as f64 * h - c);
            let e = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
            let (gx, gy) = (-x / (sigma * sigma) * e, -y / (sigma * sigma) * e);
            u += s.moment_correction() * gy;
            v -= s.moment_correction() * gx;
            let idx = (i2 * n + i1) as usize;
            worst = worst
                .max((fast.values(0)[idx] - u).abs())
                .max((fast.values(1)[idx] - v).abs());
        }
        assert!(worst / fast.linf() < 1e-6, "{}", worst / fast.linf());
    }

    #[test]
    fn far_convolution_is_the_divergence_form() {
        // F ∗· w = Σ_j ∂_j(∇⊥h ∗ w_j) with the independently sampled ∇⊥h.
        let beta = 0.5;
        let mut errs = Vec::new();
        for n in [256, 512] {
            let g = Grid2D::new(n, 32.0).unwrap();
            let s = KernelSplit::build_split(g, beta, CutoffA::default()).unwrap();
            let theta = gaussian(g, 1.5);
            let u = biot_savart_velocity(&theta, beta).unwrap();
            let fast = s.convolve_far(&theta, &u).unwrap();
            let w = u.mul_scalar_field(&theta);
            let part = |j: usize| {
                let wj = SpectralField::scalar(g, w.values(j).to_vec()).unwrap();
                let gj = s.convolve_far_gradient(&wj).unwrap();
                gj.derivative((j == 0) as u32, (j == 1) as u32)
            };
            let slow = part(0).add(&part(1));
            errs.push(fast.sub(&slow).linf() / fast.linf());
        }
        assert!(errs[1] < 1e-3 && errs[1] < errs[0], "{errs:?}");
    }

    #[test]
    fn split_reassembles_the_velocity() {
        let beta = 0.5;
        let mut errs = Vec::new();
        for n in [256, 512] {
            let g = Grid2D::new(n, 32.0).unwrap();
            let s = KernelSplit::build_split(g, beta, CutoffA::default()).unwrap();
            let c = 0.5 * g.length();
            let theta = SpectralField::from_fn(g, move |x, y| {
                let q = ((x - c).powi(2) + (y - c).powi(2)) / 2.0;
                (1.0 - q) * (-q).exp() + 0.3 * (x - c) * (-q).exp()
            });
            let u = biot_savart_velocity(&theta, beta).unwrap();
            let split = s
                .convolve_near(&theta)
                .unwrap()
                .add(&s.convolve_far_gradient(&theta).unwrap());
            errs.push(split.sub(&u).linf() / u.linf());
        }
        assert!(errs[1] <= 1e-3 && errs[1] < errs[0], "{errs:?}");
    }

    #[test]
    fn fundamental_solution_residual() {
        let g = box_grid(128);
        let f = fundamental_test_function(g);
        let e = fundamental_residual(0.5, &f, 1.0).unwrap();
        assert!(e < 1e-3, "{e}");
        let wrong = fundamental_residual(0.5, &f, 2.0).unwrap();
        assert!((wrong - 1.0).abs() < 0.05, "{wrong}");
    }

    #[test]
    fn residual_is_linear() {
        let g = box_grid(128);
        let f = fundamental_test_function(g).shift(10, 4);
        let anti = f.sub(&f.shift(-20, -8));
        let phi = forward(g, periodic_riesz_samples(g, 0.3, 1.0));
        let area = g.length().powi(2);
        let apply = |x: &SpectralField| {
            let conv = SpectralField::from_coefficients(g, vec![spectral_convolve(&phi, x.coefficients(0), area)]).unwrap();
            apply_multiplier(&conv, &MultiplierSpec::frac_laplacian(1.7)).unwrap()
        };
        let lhs = apply(&f.add(&anti.scale(2.0)));
        let rhs = apply(&f).add(&apply(&anti).scale(2.0));
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }
}
