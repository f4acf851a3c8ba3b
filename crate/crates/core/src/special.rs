//! Scalar special functions shared by the profile and kernel code.
//!
//! The lattice sums are what make singular quadrature on the grid accurate:
//! for `f` homogeneous of degree `−2s` and smooth compactly supported `g`,
//!
//! ```text
//! Σ'_{n∈ℤ²} h² f(hn) g(hn) = ∫ f g + h^{2−2s} Z(f) g(0) + O(h^{4−2s}),
//! ```
//!
//! where `Σ'` omits `n = 0` and `Z(f)` is the analytically continued lattice
//! sum of `f`. For `f = |x|^{−2s}` this is `Z = 4 ζ(s) β(s)`.

use std::f64::consts::PI;

/// `exp(−1/t)` for `t > 0`, zero otherwise, with two derivatives.
#[inline]
fn psi(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let e = (-1.0 / t).exp();
    let t2 = t * t;
    (e, e / t2, e * (1.0 / (t2 * t2) - 2.0 / (t2 * t)))
}

/// C∞ transition from 0 (for `t ≤ 0`) to 1 (for `t ≥ 1`), together with its
/// first and second derivatives.
pub fn smooth_step_with_derivatives(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let (a, a1, a2) = psi(t);
    let (b, b1, b2) = psi(1.0 - t);
    // N = a, D = a + b(1−t); derivatives of b(1−t) pick up chain-rule signs.
    let d = a + b;
    let d1 = a1 - b1;
    let d2 = a2 + b2;
    let s = a / d;
    let s1 = (a1 * d - a * d1) / (d * d);
    let s2 = (a2 * d - a * d2) / (d * d) - 2.0 * d1 * (a1 * d - a * d1) / (d * d * d);
    (s, s1, s2)
}

#[inline]
pub fn smooth_step(t: f64) -> f64 {
    smooth_step_with_derivatives(t).0
}

/// Sum of an alternating series `Σ (−1)^k a_k` by the Cohen–Villegas–Zagier
/// acceleration; exact to about `5.8^{−terms}` for totally monotone `a_k`.
fn alternating_sum<F: Fn(usize) -> f64>(a: F, terms: usize) -> f64 {
    let mut d = (3.0 + 8f64.sqrt()).powi(terms as i32);
    d = 0.5 * (d + 1.0 / d);
    let mut b = -1.0;
    let mut c = -d;
    let mut s = 0.0;
    let nf = terms as f64;
    for k in 0..terms {
        c = b - c;
        s += c * a(k);
        let kf = k as f64;
        b *= (kf + nf) * (kf - nf) / ((kf + 0.5) * (kf + 1.0));
    }
    s / d
}

/// Riemann zeta for real `s > 0`, `s ≠ 1`, via the Dirichlet eta function.
pub fn riemann_zeta(s: f64) -> f64 {
    let eta = alternating_sum(|k| ((k + 1) as f64).powf(-s), 40);
    eta / (1.0 - 2f64.powf(1.0 - s))
}

/// Dirichlet beta `Σ_{k≥0} (−1)^k (2k+1)^{−s}` for real `s > 0`.
pub fn dirichlet_beta(s: f64) -> f64 {
    alternating_sum(|k| ((2 * k + 1) as f64).powf(-s), 40)
}

/// Continued lattice sum `Σ'_{n∈ℤ²} |n|^{−2s} = 4 ζ(s) β(s)`; valid for real
/// `s > 0`, `s ≠ 1`.
pub fn lattice_zeta(s: f64) -> f64 {
    4.0 * riemann_zeta(s) * dirichlet_beta(s)
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if order == 1 {
                p0 = 1.0;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(16);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        for (xi, wi) in x.iter().zip(&w) {
            total += wi * f(mid + 0.5 * width * xi);
        }
    }
    0.5 * width * total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_and_beta_reference_values() {
        assert!((riemann_zeta(0.5) + 1.460_354_508_809_586_8).abs() < 1e-12);
        assert!((riemann_zeta(2.0) - PI * PI / 6.0).abs() < 1e-12);
        assert!((dirichlet_beta(1.0) - PI / 4.0).abs() < 1e-12);
        assert!((dirichlet_beta(0.5) - 0.667_691_457_189_609).abs() < 1e-12);
    }

    #[test]
    fn lattice_zeta_converges_at_s_two() {
        // Σ' |n|^{-4} = 4 ζ(2) β(2) with Catalan's constant β(2).
        let direct: f64 = (-400i64..=400)
            .flat_map(|a| (-400i64..=400).map(move |b| (a, b)))
            .filter(|&(a, b)| (a, b) != (0, 0))
            .map(|(a, b)| ((a * a + b * b) as f64).powi(-2))
            .sum();
        assert!((lattice_zeta(2.0) - direct).abs() < 1e-4, "{}", lattice_zeta(2.0));
    }

    /// Corrected punctured lattice sum of `|x|^{−2s} e^{−|x|²}` against the
    /// closed form `π Γ(1−s)`.
    #[test]
    fn lattice_correction_restores_singular_integral() {
        for s in [0.25, 0.5, 0.75] {
            let h = 0.05;
            let m = (7.0 / h) as i64;
            let mut sum = 0.0;
            for a in -m..=m {
                for b in -m..=m {
                    if a == 0 && b == 0 {
                        continue;
                    }
                    let r2 = h * h * (a * a + b * b) as f64;
                    sum += h * h * r2.powf(-s) * (-r2).exp();
                }
            }
            let corrected = sum - h.powf(2.0 - 2.0 * s) * lattice_zeta(s);
            let exact = PI * gamma(1.0 - s);
            let rel = (corrected - exact).abs() / exact;
            assert!(rel < 1e-4, "s = {s}: rel {rel}");
            let raw = (sum - exact).abs() / exact;
            assert!(raw > 10.0 * rel);
        }
    }

    #[test]
    fn smooth_step_derivatives_match_finite_differences() {
        for &t in &[0.1, 0.3, 0.5, 0.77, 0.95] {
            let (_, d1, d2) = smooth_step_with_derivatives(t);
            let e = 1e-5;
            let fd1 = (smooth_step(t + e) - smooth_step(t - e)) / (2.0 * e);
            let fd2 = (smooth_step(t + e) - 2.0 * smooth_step(t) + smooth_step(t - e)) / (e * e);
            assert!((d1 - fd1).abs() < 1e-7, "t={t}");
            assert!((d2 - fd2).abs() < 1e-4, "t={t}: {d2} vs {fd2}");
        }
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let i = integrate(|t| t.sin(), 0.0, PI, 4);
        assert!((i - 2.0).abs() < 1e-14);
    }
}
