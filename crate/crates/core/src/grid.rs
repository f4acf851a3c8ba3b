//! Periodic square grids.
//!
//! A [`Grid2D`] samples the torus `[0, L)²` at `n × n` points with spacing
//! `h = L / n`. Sample `(i1, i2)` sits at `x = (i1·h, i2·h)` and is stored at
//! flat index `i2·n + i1` (row-major, rows along the second coordinate).
//! Fourier index `i` maps to the signed wavenumber `i` for `i ≤ n/2` and
//! `i − n` otherwise, so the Nyquist index `n/2` is carried as `+n/2`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default box side: integer wavenumbers.
pub const DEFAULT_LENGTH: f64 = 2.0 * PI;

/// Box side used by kernel experiments.
pub const KERNEL_LENGTH: f64 = 16.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    n: usize,
    length: f64,
}

impl Grid2D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Config(format!(
                "n_side must be a power of two and at least 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Config(format!(
                "box length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { n, length })
    }

    /// Grid on the default `2π` box.
    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, DEFAULT_LENGTH)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn length(&self) -> f64 {
        self.length
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Number of samples per component.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Smallest nonzero wavenumber magnitude, `2π/L`.
    #[inline]
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.length
    }

    #[inline]
    pub fn nyquist(&self) -> usize {
        self.n / 2
    }

    /// Area element `h²`.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Signed integer wavenumber of Fourier index `i`.
    #[inline]
    pub fn signed_index(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Fourier index of a signed wavenumber (taken modulo `n`).
    #[inline]
    pub fn fourier_index(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Physical wavevector `ξ` of the flat Fourier index `idx`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> (f64, f64) {
        let k0 = self.fundamental();
        let (i1, i2) = (idx % self.n, idx / self.n);
        (
            k0 * self.signed_index(i1) as f64,
            k0 * self.signed_index(i2) as f64,
        )
    }

    /// `|ξ|` of the flat Fourier index `idx`.
    #[inline]
    pub fn wavenumber(&self, idx: usize) -> f64 {
        let (k1, k2) = self.wavevector(idx);
        k1.hypot(k2)
    }

    /// True if either index of `idx` is the Nyquist index.
    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let half = self.n / 2;
        idx % self.n == half || idx / self.n == half
    }

    /// Physical coordinates of flat sample index `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let h = self.spacing();
        ((idx % self.n) as f64 * h, (idx / self.n) as f64 * h)
    }

    /// Minimum-image displacement of flat sample index `idx` from the origin,
    /// in `[−L/2, L/2)²`.
    #[inline]
    pub fn centered_point(&self, idx: usize) -> (f64, f64) {
        let h = self.spacing();
        let half = self.n / 2;
        let wrap = |i: usize| -> f64 {
            if i < half {
                i as f64 * h
            } else {
                (i as f64 - self.n as f64) * h
            }
        };
        (wrap(idx % self.n), wrap(idx / self.n))
    }

    /// Minimum-image difference `a − b` on the torus, per coordinate.
    #[inline]
    pub fn periodic_delta(&self, a: f64, b: f64) -> f64 {
        let l = self.length;
        let mut d = (a - b) % l;
        if d >= 0.5 * l {
            d -= l;
        } else if d < -0.5 * l {
            d += l;
        }
        d
    }

    /// Largest retained integer wavenumber index under the 2/3 rule.
    #[inline]
    pub fn dealias_index(&self) -> usize {
        self.n / 3
    }

    /// Radius of the largest disc of wavevectors kept by the 2/3 rule.
    #[inline]
    pub fn dealias_radius(&self) -> f64 {
        self.dealias_index() as f64 * self.fundamental()
    }

    /// Largest `|ξ|` present on the grid (the Nyquist corner).
    #[inline]
    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.nyquist() as f64 * self.fundamental()
    }

    /// The same box sampled with a different resolution.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(n, self.length)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid2D::new(4, 1.0).is_err());
        assert!(Grid2D::new(48, 1.0).is_err());
        assert!(Grid2D::new(64, 0.0).is_err());
        assert!(Grid2D::new(64, f64::NAN).is_err());
        assert!(Grid2D::new(8, 1.0).is_ok());
    }

    #[test]
    fn wavenumbers_are_integer_multiples_of_the_fundamental() {
        let g = Grid2D::periodic(16).unwrap();
        assert_eq!(g.signed_index(0), 0);
        assert_eq!(g.signed_index(8), 8);
        assert_eq!(g.signed_index(9), -7);
        assert_eq!(g.signed_index(15), -1);
        let (k1, k2) = g.wavevector(15 + 16 * 2);
        assert!((k1 + 1.0).abs() < 1e-15 && (k2 - 2.0).abs() < 1e-15);
        assert!(g.is_nyquist(8));
        assert!(g.is_nyquist(8 * 16 + 3));
        assert!(!g.is_nyquist(7 * 16 + 3));
    }

    #[test]
    fn periodic_delta_is_minimum_image() {
        let g = Grid2D::new(8, 10.0).unwrap();
        assert!((g.periodic_delta(9.0, 1.0) + 2.0).abs() < 1e-12);
        assert!((g.periodic_delta(1.0, 9.0) - 2.0).abs() < 1e-12);
        assert!((g.periodic_delta(3.0, 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn centered_points_cover_the_symmetric_box() {
        let g = Grid2D::new(8, 8.0).unwrap();
        assert_eq!(g.centered_point(0), (0.0, 0.0));
        assert_eq!(g.centered_point(4), (-4.0, 0.0));
        assert_eq!(g.centered_point(7 + 8 * 3), (-1.0, 3.0));
    }
}
