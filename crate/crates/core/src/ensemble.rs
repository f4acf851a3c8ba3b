//! Seeded random field ensembles.
//!
//! Every generator draws its randomness from physical parameters only, never
//! from the grid, so the same `(seed, trial)` describes the same function on
//! any grid of the same box. This is what makes refinement comparisons
//! meaningful.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid2D;

/// Smallest ensemble that may back a pass verdict.
pub const MIN_SHIPPED_COUNT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldClass {
    /// Gaussian Fourier coefficients with amplitude `|ξ|^{−γ}` up to a band
    /// limit, mean zero.
    BandLimited,
    /// A few smooth bumps with compact support near the box center.
    CompactBump,
    /// Zero-mass radial profile `(1 − ρ²/2)e^{−ρ²/2}`, `ρ = |x − x₀|/σ`.
    Radial,
    /// A constant plus a compact bump.
    ConstantPlusBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub count: usize,
    pub seed: u64,
    pub class: FieldClass,
    /// Spectral slope of band-limited draws.
    #[serde(default = "default_slope")]
    pub slope: f64,
    /// Largest wavenumber `|ξ|` of band-limited draws.
    #[serde(default = "default_band")]
    pub band: f64,
}

fn default_slope() -> f64 {
    2.5
}

fn default_band() -> f64 {
    16.0
}

impl EnsembleSpec {
    pub fn new(count: usize, seed: u64, class: FieldClass) -> Self {
        Self {
            count,
            seed,
            class,
            slope: default_slope(),
            band: default_band(),
        }
    }

    pub fn with_band(mut self, band: f64) -> Self {
        self.band = band;
        self
    }

    pub fn with_slope(mut self, slope: f64) -> Self {
        self.slope = slope;
        self
    }

    /// Whether the ensemble is large enough to back a pass verdict.
    pub fn is_shippable(&self) -> bool {
        self.count >= MIN_SHIPPED_COUNT
    }

    fn rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64 + 1);
        rng
    }

    /// Member `trial` of the ensemble sampled on `grid`.
    pub fn sample(&self, grid: Grid2D, trial: usize) -> Result<SpectralField> {
        let mut rng = self.rng(trial);
        match self.class {
            FieldClass::BandLimited => band_limited(grid, &mut rng, self.slope, self.band),
            FieldClass::CompactBump => Ok(compact_bumps(grid, &mut rng)),
            FieldClass::Radial => Ok(radial(grid, &mut rng)),
            FieldClass::ConstantPlusBump => {
                let c = rng.random_range(-2.0..2.0);
                Ok(compact_bumps(grid, &mut rng).map_values(|v| v + c))
            }
        }
    }

    pub fn generate(&self, grid: Grid2D) -> Result<Vec<SpectralField>> {
        (0..self.count).map(|t| self.sample(grid, t)).collect()
    }
}

/// Random mean-zero field with coefficients `N(0,1)·|ξ|^{−slope}` for
/// `0 < |ξ| ≤ band`, normalized to unit `L²` norm.
pub fn band_limited<R: Rng>(grid: Grid2D, rng: &mut R, slope: f64, band: f64) -> Result<SpectralField> {
    let k0 = 2.0 * PI / grid.length();
    let m = (band / k0).floor() as i64;
    if m < 1 {
        return Err(Error::Config(format!("band {band} holds no nonzero wavenumber")));
    }
    if m > grid.dealias_index() as i64 {
        return Err(Error::Config(format!(
            "band {band} exceeds the dealiased range of n = {}",
            grid.n()
        )));
    }
    let n = grid.n();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut energy = 0.0;
    // Visit the upper half plane in a grid-independent order.
    for m2 in 0..=m {
        for m1 in -m..=m {
            if m2 == 0 && m1 <= 0 {
                continue;
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let k = k0 * ((m1 * m1 + m2 * m2) as f64).sqrt();
            if k > band {
                continue;
            }
            let z = Complex64::new(re, im) * k.powf(-slope);
            coeffs[grid.fourier_index(m2) * n + grid.fourier_index(m1)] = z;
            coeffs[grid.fourier_index(-m2) * n + grid.fourier_index(-m1)] = z.conj();
            energy += 2.0 * z.norm_sqr();
        }
    }
    let scale = 1.0 / (grid.length() * energy.sqrt());
    coeffs.iter_mut().for_each(|z| *z *= scale);
    SpectralField::from_coefficients(grid, vec![coeffs])
}

/// `exp(1 − 1/(1 − ρ²))` on `ρ < 1`, zero outside; equals 1 at the origin.
pub fn bump(rho: f64) -> f64 {
    if rho >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - rho * rho)).exp()
    }
}

fn compact_bumps<R: Rng>(grid: Grid2D, rng: &mut R) -> SpectralField {
    let l = grid.length();
    let count = 3;
    let params: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            let amp = rng.random_range(-1.0..1.0);
            let cx = 0.5 * l + rng.random_range(-0.02..0.02) * l;
            let cy = 0.5 * l + rng.random_range(-0.02..0.02) * l;
            let radius = rng.random_range(0.08..0.105) * l;
            (amp, cx, cy, radius)
        })
        .collect();
    SpectralField::from_fn(grid, move |x, y| {
        params
            .iter()
            .map(|&(a, cx, cy, r)| a * bump(((x - cx).powi(2) + (y - cy).powi(2)).sqrt() / r))
            .sum()
    })
}

/// Zero-mass radial profile centered in the box.
pub fn radial_profile(grid: Grid2D, amplitude: f64, sigma: f64) -> SpectralField {
    let c = 0.5 * grid.length();
    SpectralField::from_fn(grid, move |x, y| {
        let q = ((x - c).powi(2) + (y - c).powi(2)) / (2.0 * sigma * sigma);
        amplitude * (1.0 - q) * (-q).exp()
    })
}

fn radial<R: Rng>(grid: Grid2D, rng: &mut R) -> SpectralField {
    let amp = rng.random_range(0.5..1.5);
    let sigma = rng.random_range(0.04..0.06) * grid.length();
    radial_profile(grid, amp, sigma)
}
