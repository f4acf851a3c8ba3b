//! Two-dimensional complex FFTs on square power-of-two grids.
//!
//! Normalization: the forward transform carries the `1/n²` factor,
//!
//! ```text
//! c_k  = n⁻² Σ_x f(x) e^{−i ξ_k·x},      f(x) = Σ_k c_k e^{i ξ_k·x},
//! ```
//!
//! so a constant field `c` has `c_0 = c`, and Parseval reads
//! `Σ_x |f(x)|² h² = L² Σ_k |c_k|²`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

fn transpose(data: &[Complex64], out: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    out.par_chunks_mut(n * BLOCK)
        .enumerate()
        .for_each(|(bi, rows)| {
            let r0 = bi * BLOCK;
            let nrows = rows.len() / n;
            for c0 in (0..n).step_by(BLOCK) {
                for r in 0..nrows {
                    for c in c0..(c0 + BLOCK).min(n) {
                        rows[r * n + c] = data[c * n + r0 + r];
                    }
                }
            }
        });
}

fn rows_fft(data: &mut [Complex64], n: usize, plan: &Arc<dyn Fft<f64>>) {
    let scratch_len = plan.get_inplace_scratch_len();
    data.par_chunks_mut(n * 16).for_each_init(
        || vec![Complex64::new(0.0, 0.0); scratch_len],
        |scratch, chunk| plan.process_with_scratch(chunk, scratch),
    );
}

fn fft2(data: &mut [Complex64], n: usize, plan: &Arc<dyn Fft<f64>>) {
    assert_eq!(data.len(), n * n, "fft2 buffer does not match n²");
    rows_fft(data, n, plan);
    let mut tmp = vec![Complex64::new(0.0, 0.0); n * n];
    transpose(data, &mut tmp, n);
    rows_fft(&mut tmp, n, plan);
    transpose(&tmp, data, n);
}

/// Forward transform of real samples, normalized by `1/n²`.
pub fn forward_real(values: &[f64], n: usize) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward_in_place(&mut data, n);
    data
}

/// Forward transform in place, normalized by `1/n²`.
pub fn forward_in_place(data: &mut [Complex64], n: usize) {
    let (fwd, _) = plans(n);
    fft2(data, n, &fwd);
    let scale = 1.0 / (n * n) as f64;
    data.par_iter_mut().for_each(|c| *c *= scale);
}

/// Unnormalized inverse transform in place.
pub fn inverse_in_place(data: &mut [Complex64], n: usize) {
    let (_, inv) = plans(n);
    fft2(data, n, &inv);
}

/// Inverse transform returning the real part.
pub fn inverse_real(coeffs: &[Complex64], n: usize) -> Vec<f64> {
    let mut data = coeffs.to_vec();
    inverse_in_place(&mut data, n);
    data.into_iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_maps_to_zero_mode() {
        let n = 16;
        let c = forward_real(&vec![2.5; n * n], n);
        assert!((c[0].re - 2.5).abs() < 1e-14);
        assert!(c.iter().skip(1).all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn round_trip_non_square_block_sizes() {
        for n in [8, 32, 64] {
            let v: Vec<f64> = (0..n * n).map(|i| ((i * 37 % 101) as f64).sin()).collect();
            let back = inverse_real(&forward_real(&v, n), n);
            let err = v
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-13, "n = {n}: {err}");
        }
    }
}
