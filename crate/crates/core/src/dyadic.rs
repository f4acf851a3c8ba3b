//! Littlewood-Paley decomposition on the periodic grid.
//!
//! The low-pass profile `χ̂` equals 1 for `|ξ| ≤ 3/4` and vanishes for
//! `|ξ| ≥ 5/6`; the annulus profile is `φ̂(ξ) = χ̂(ξ/2) − χ̂(ξ)`, supported in
//! `3/4 < |ξ| < 5/3`. With `φ̂_j = φ̂(2^{−j}·)` the sum
//! `χ̂ + Σ_{j=0}^{J} φ̂_j = χ̂(2^{−J−1}·)` telescopes, so the partition of unity
//! holds exactly up to rounding. All block operators are Fourier multipliers.

use std::io::Write;
use std::ops::RangeInclusive;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid2D;
use crate::special::smooth_step;

/// `χ̂ ≡ 1` inside this radius.
pub const CHI_PLATEAU: f64 = 0.75;
/// `supp χ̂ ⊂ B(0, CHI_SUPPORT)`.
pub const CHI_SUPPORT: f64 = 5.0 / 6.0;
/// Inner radius of the reference annulus containing `supp φ̂`.
pub const ANNULUS_INNER: f64 = 3.0 / 5.0;
/// Outer radius of the reference annulus containing `supp φ̂`.
pub const ANNULUS_OUTER: f64 = 5.0 / 3.0;

/// Low-pass profile `χ̂(|ξ|)`.
pub fn chi_hat(rho: f64) -> f64 {
    1.0 - smooth_step((rho - CHI_PLATEAU) / (CHI_SUPPORT - CHI_PLATEAU))
}

/// Annulus profile `φ̂(|ξ|) = χ̂(|ξ|/2) − χ̂(|ξ|)`.
pub fn phi_hat(rho: f64) -> f64 {
    chi_hat(0.5 * rho) - chi_hat(rho)
}

/// Which family of block operators to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockMode {
    /// `Δ_j`, `j ≥ −1`, with `Δ_{−1} = χ(D)`.
    Inhomogeneous,
    /// `Δ̇_j = φ_j(D)`, `j ∈ ℤ`.
    Homogeneous,
    /// `S_n = χ(D) + Σ_{0≤j≤n} φ_j(D) = χ(2^{−n−1}D)`.
    LowPass,
}

/// Multiplier of block `j` in `mode` at radius `rho`.
pub fn block_symbol(j: i32, mode: BlockMode, rho: f64) -> f64 {
    match mode {
        BlockMode::Inhomogeneous if j == -1 => chi_hat(rho),
        BlockMode::Inhomogeneous if j < -1 => 0.0,
        BlockMode::Inhomogeneous | BlockMode::Homogeneous => phi_hat(rho * 2f64.powi(-j)),
        BlockMode::LowPass => chi_hat(rho * 2f64.powi(-j - 1)),
    }
}

/// Partition of unity on a grid together with its realizable block range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicFamily {
    grid: Grid2D,
    j_min_homogeneous: i32,
    j_max: i32,
    j_top: i32,
}

impl DyadicFamily {
    /// Build the family on `grid`.
    ///
    /// `j_max` is the largest block whose annulus lies inside the dealiased
    /// disc, `j_top` the largest block touching any grid wavenumber, and the
    /// homogeneous range starts at the first annulus containing a nonzero
    /// wavenumber.
    pub fn build_partition(grid: Grid2D) -> Result<Self> {
        let k0 = grid.fundamental();
        let j_min_homogeneous = (ANNULUS_INNER * k0).log2().floor() as i32 + 1;
        let j_max = (ANNULUS_INNER * grid.dealias_radius()).log2().floor() as i32;
        let j_top = (grid.max_wavenumber() / CHI_PLATEAU).log2().ceil() as i32 - 1;
        if j_max < j_min_homogeneous.max(0) {
            return Err(Error::Config(format!(
                "grid n = {} on L = {} cannot host an annulus below the dealias cutoff",
                grid.n(),
                grid.length()
            )));
        }
        Ok(Self {
            grid,
            j_min_homogeneous,
            j_max,
            j_top,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Largest block whose annulus lies below the dealias cutoff.
    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// Largest block with any support on the grid.
    pub fn j_top(&self) -> i32 {
        self.j_top
    }

    pub fn j_min_homogeneous(&self) -> i32 {
        self.j_min_homogeneous
    }

    /// Blocks the operator accepts for `mode`.
    pub fn realizable(&self, mode: BlockMode) -> RangeInclusive<i32> {
        match mode {
            BlockMode::Inhomogeneous => -1..=self.j_top,
            BlockMode::Homogeneous => self.j_min_homogeneous..=self.j_top,
            BlockMode::LowPass => 0..=self.j_top,
        }
    }

    /// Blocks on which "for all j" statements are tested: fully resolved
    /// below the dealias cutoff, excluding the last one.
    pub fn tested_range(&self, mode: BlockMode) -> RangeInclusive<i32> {
        match mode {
            BlockMode::Inhomogeneous => -1..=(self.j_max - 1),
            BlockMode::Homogeneous => self.j_min_homogeneous..=(self.j_max - 1),
            BlockMode::LowPass => 0..=(self.j_max - 1),
        }
    }

    /// `Δ_j f`, `Δ̇_j f`, or `S_j f` according to `mode`.
    pub fn project_block(&self, f: &SpectralField, j: i32, mode: BlockMode) -> Result<SpectralField> {
        let range = self.realizable(mode);
        if !range.contains(&j) {
            return Err(Error::Range {
                j,
                lo: *range.start(),
                hi: *range.end(),
            });
        }
        Ok(self.apply_symbol(f, |rho| block_symbol(j, mode, rho)))
    }

    /// `S_n f`, the smoothed data the approximating sequence starts from.
    /// Any `n` beyond the top block returns `f` unchanged.
    pub fn smooth_truncate_initial(&self, f: &SpectralField, n: u32) -> SpectralField {
        let j = n.min(self.j_top.max(0) as u32 + 1) as i32;
        self.apply_symbol(f, |rho| block_symbol(j, BlockMode::LowPass, rho))
    }

    /// All nonempty blocks of `f` in `mode`, in increasing `j`.
    pub fn decompose(&self, f: &SpectralField, mode: BlockMode) -> Vec<(i32, SpectralField)> {
        self.realizable(mode)
            .map(|j| (j, self.apply_symbol(f, |rho| block_symbol(j, mode, rho))))
            .collect()
    }

    fn apply_symbol<S: Fn(f64) -> f64 + Sync>(&self, f: &SpectralField, symbol: S) -> SpectralField {
        assert_eq!(f.grid(), &self.grid, "field and family live on different grids");
        let g = self.grid;
        f.map_coefficients(|i, z| {
            let m = symbol(g.wavenumber(i));
            if m == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                z * m
            }
        })
    }

    /// `max_ξ |1 − χ̂(ξ) − Σ_{j=0}^{j_top} φ̂_j(ξ)|` over every grid wavenumber.
    pub fn partition_residual(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.partition_residual_at(self.grid.wavenumber(i)))
            .fold(0.0, f64::max)
    }

    /// `|1 − χ̂(ρ) − Σ_{j=0}^{j_top} φ̂_j(ρ)|` at a single radius.
    pub fn partition_residual_at(&self, rho: f64) -> f64 {
        let s: f64 = chi_hat(rho)
            + (0..=self.j_top)
                .map(|j| phi_hat(rho * 2f64.powi(-j)))
                .sum::<f64>();
        (1.0 - s).abs()
    }

    /// CSV export of `(radius, chi_hat, phi_hat)` on `samples` radii in `[0, 2]`.
    pub fn write_profiles_csv<W: Write>(mut w: W, samples: usize) -> Result<()> {
        writeln!(w, "radius,chi_hat,phi_hat")?;
        for i in 0..samples {
            let r = 2.0 * i as f64 / (samples.max(2) - 1) as f64;
            writeln!(w, "{r:.17e},{:.17e},{:.17e}", chi_hat(r), phi_hat(r))?;
        }
        Ok(())
    }
}
