//! Shared fixtures for the benchmarks in `benches/`.

use sqglab::{EnsembleSpec, FieldClass, Grid2D, SpectralField};

/// Band-limited unit-`L²` field on the `2π` box with `n × n` samples.
pub fn sample_field(n: usize) -> SpectralField {
    let grid = Grid2D::periodic(n).expect("valid size");
    EnsembleSpec::new(1, 1, FieldClass::BandLimited)
        .with_band(0.25 * n as f64)
        .sample(grid, 0)
        .expect("band fits the grid")
}
