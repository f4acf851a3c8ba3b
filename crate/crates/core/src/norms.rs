//! Norm estimators: Hölder-Zygmund, classical Hölder, Bessel-potential
//! Sobolev, and uniformly local variants built from translated bump windows.
//!
//! Uniformly local norms evaluate `‖φ_{c,λ} f‖` on a square sub-box around
//! each window center `c`, sampled at the parent spacing from the periodic
//! field. The window product is then a compactly supported function on the
//! plane, so the sub-box computation is a faithful evaluation of the
//! whole-plane norm of `φ_{c,λ} f` even when the window is wider than the
//! torus.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{BlockMode, DyadicFamily};
use crate::error::{Error, Result};
use crate::fft;
use crate::field::SpectralField;
use crate::grid::Grid2D;
use crate::multipliers::{apply_multiplier, MultiplierSpec};
use crate::special::{gamma, integrate, lattice_zeta, smooth_step};

/// Largest parent grid on which the Slobodeckij double integral is evaluated.
pub const SLOBODECKIJ_MAX_N: usize = 128;

/// Which quantity a uniformly local norm localizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum LocalKind {
    /// `‖φ_x f‖_{L^p}`; `p = ∞` allowed.
    Lebesgue { p: f64 },
    /// `‖J^s(φ_x f)‖_{L²}`.
    Sobolev { s: f64 },
    /// `‖(−Δ)^{s/2}(φ_x f)‖_{L²}`.
    HomogeneousSobolev { s: f64 },
    /// Sobolev-Slobodeckij `W^{s,2}` by direct quadrature.
    Slobodeckij { s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "norm", rename_all = "snake_case")]
pub enum NormKind {
    Linf,
    L2,
    /// `‖f‖_∞ + ‖∇f‖_∞`.
    Lipschitz,
    Zygmund { r: f64, homogeneous: bool },
    ClassicalHolder { r: f64 },
    Sobolev { s: f64, homogeneous: bool },
    UniformlyLocal { local: LocalKind, lambda: f64 },
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NormKind::Linf => write!(f, "linf"),
            NormKind::L2 => write!(f, "l2"),
            NormKind::Lipschitz => write!(f, "w1inf"),
            NormKind::Zygmund { r, homogeneous: false } => write!(f, "zygmund:{r}"),
            NormKind::Zygmund { r, homogeneous: true } => write!(f, "zygmund_hom:{r}"),
            NormKind::ClassicalHolder { r } => write!(f, "holder:{r}"),
            NormKind::Sobolev { s, homogeneous: false } => write!(f, "sobolev:{s}"),
            NormKind::Sobolev { s, homogeneous: true } => write!(f, "sobolev_hom:{s}"),
            NormKind::UniformlyLocal { local, lambda } => match local {
                LocalKind::Lebesgue { p } => write!(f, "lp_ul:{p}@{lambda}"),
                LocalKind::Sobolev { s } => write!(f, "hs_ul:{s}@{lambda}"),
                LocalKind::HomogeneousSobolev { s } => write!(f, "hs_hom_ul:{s}@{lambda}"),
                LocalKind::Slobodeckij { s } => write!(f, "ws2_ul:{s}@{lambda}"),
            },
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    /// Parses the names produced by `Display`; the window scale defaults to 1.
    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown norm {text:?}"));
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        let (param, lambda) = match rest.split_once('@') {
            Some((p, l)) => (p, l.parse::<f64>().map_err(|_| bad())?),
            None => (rest, 1.0),
        };
        let num = || param.parse::<f64>().map_err(|_| bad());
        let ul = |local| NormKind::UniformlyLocal { local, lambda };
        Ok(match name {
            "linf" => NormKind::Linf,
            "l2" => NormKind::L2,
            "w1inf" => NormKind::Lipschitz,
            "zygmund" => NormKind::Zygmund { r: num()?, homogeneous: false },
            "zygmund_hom" => NormKind::Zygmund { r: num()?, homogeneous: true },
            "holder" => NormKind::ClassicalHolder { r: num()? },
            "sobolev" => NormKind::Sobolev { s: num()?, homogeneous: false },
            "sobolev_hom" => NormKind::Sobolev { s: num()?, homogeneous: true },
            "lp_ul" => ul(LocalKind::Lebesgue { p: num()? }),
            "hs_ul" => ul(LocalKind::Sobolev { s: num()? }),
            "hs_hom_ul" => ul(LocalKind::HomogeneousSobolev { s: num()? }),
            "ws2_ul" => ul(LocalKind::Slobodeckij { s: num()? }),
            _ => return Err(bad()),
        })
    }
}

impl NormKind {
    /// Evaluate this norm of `f`.
    pub fn evaluate(&self, f: &SpectralField) -> Result<NormReport> {
        let g = *f.grid();
        match *self {
            NormKind::Linf => Ok(NormReport::scalar(*self, f.linf())),
            NormKind::L2 => Ok(NormReport::scalar(*self, f.l2())),
            NormKind::Lipschitz => {
                let grad = (0..f.components())
                    .map(|c| f.component(c).gradient().linf())
                    .fold(0.0, f64::max);
                Ok(NormReport::scalar(*self, f.linf() + grad))
            }
            NormKind::Zygmund { r, homogeneous } => {
                zygmund_norm(f, r, &DyadicFamily::build_partition(g)?, homogeneous)
            }
            NormKind::ClassicalHolder { r } => classical_holder_norm(f, r),
            NormKind::Sobolev { s, homogeneous } => sobolev_norm(f, s, homogeneous),
            NormKind::UniformlyLocal { local, lambda } => {
                uniformly_local_norm(f, local, &WindowFamily::new(g, lambda)?)
            }
        }
    }
}

/// Result of a norm evaluation with the per-block or per-window detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub kind: NormKind,
    pub value: f64,
    /// `(j, weighted block norm)` for block-based norms.
    pub block_profile: Vec<(i32, f64)>,
    /// `(center, windowed norm)` for uniformly local norms.
    pub window_profile: Vec<((f64, f64), f64)>,
    /// Block range or window-lattice size the value was taken over.
    pub tested_range: Option<(i32, i32)>,
    /// Named companion quantities, e.g. the Littlewood-Paley variant of a
    /// Sobolev norm.
    pub auxiliary: Vec<(String, f64)>,
}

impl NormReport {
    fn scalar(kind: NormKind, value: f64) -> Self {
        Self {
            kind,
            value,
            block_profile: Vec::new(),
            window_profile: Vec::new(),
            tested_range: None,
            auxiliary: Vec::new(),
        }
    }

    pub fn auxiliary(&self, name: &str) -> Option<f64> {
        self.auxiliary.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// `kind,param,value` rows: the value, then each auxiliary quantity.
    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> Result<()> {
        let kind = self.kind.to_string();
        let (name, param) = kind.split_once(':').unwrap_or((&kind, ""));
        writeln!(w, "{name},{param},{:.17e}", self.value)?;
        for (aux, v) in &self.auxiliary {
            writeln!(w, "{name}.{aux},{param},{v:.17e}")?;
        }
        Ok(())
    }

    /// Per-block or per-window profile as CSV.
    pub fn write_profile_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if !self.block_profile.is_empty() {
            writeln!(w, "j,value")?;
            for (j, v) in &self.block_profile {
                writeln!(w, "{j},{v:.17e}")?;
            }
        } else {
            writeln!(w, "x,y,value")?;
            for ((x, y), v) in &self.window_profile {
                writeln!(w, "{x:.17e},{y:.17e},{v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// `sup_j 2^{jr}‖Δ_j f‖_∞` over every block present on the grid; the
/// homogeneous variant is `sup_j ‖Δ̇_j f‖_∞` without weight.
pub fn zygmund_norm(f: &SpectralField, r: f64, family: &DyadicFamily, homogeneous: bool) -> Result<NormReport> {
    let mode = if homogeneous {
        BlockMode::Homogeneous
    } else {
        BlockMode::Inhomogeneous
    };
    let range = family.realizable(mode);
    let profile: Vec<(i32, f64)> = range
        .clone()
        .into_par_iter()
        .map(|j| {
            let block = family.project_block(f, j, mode).expect("j in realizable range");
            let w = if homogeneous { 1.0 } else { 2f64.powf(j as f64 * r) };
            (j, w * block.linf())
        })
        .collect();
    let value = profile.iter().map(|&(_, v)| v).fold(0.0, f64::max);
    Ok(NormReport {
        kind: NormKind::Zygmund { r, homogeneous },
        value,
        block_profile: profile,
        window_profile: Vec::new(),
        tested_range: Some((*range.start(), *range.end())),
        auxiliary: Vec::new(),
    })
}

/// Multi-indices `(a1, a2)` with `a1 + a2 = k`.
fn multi_indices(k: u32) -> impl Iterator<Item = (u32, u32)> {
    (0..=k).map(move |a1| (a1, k - a1))
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Lattice offsets `(d1, d2)` in a half plane with `0 < |d|·h ≤ radius`.
///
/// Small offsets, the axes and diagonals, and a ring at the outer radius are
/// kept densely; the rest of the disc is strided so the count stays bounded.
fn pair_offsets(h: f64, radius: f64) -> Vec<(i64, i64)> {
    let rmax = (radius / h + 1e-9).floor() as i64;
    let inside = |d1: i64, d2: i64| {
        let r2 = d1 * d1 + d2 * d2;
        r2 > 0 && (r2 as f64).sqrt() * h <= radius * (1.0 + 1e-12)
    };
    let half = |d1: i64, d2: i64| d2 > 0 || (d2 == 0 && d1 > 0);
    let disc_size = (PI * (rmax * rmax) as f64 / 2.0) as i64;
    let stride = ((disc_size as f64 / 1500.0).sqrt().ceil() as i64).max(1);
    let mut out = Vec::new();
    for d2 in 0..=rmax {
        for d1 in -rmax..=rmax {
            if !half(d1, d2) || !inside(d1, d2) {
                continue;
            }
            let near = d1.abs().max(d2.abs()) <= 4;
            let ray = d1 == 0 || d2 == 0 || d1.abs() == d2;
            let strided = d1.rem_euclid(stride) == 0 && d2.rem_euclid(stride) == 0;
            let rim = ((d1 * d1 + d2 * d2) as f64).sqrt() > rmax as f64 - 1.0;
            if near || ray || strided || (rim && stride == 1) {
                out.push((d1, d2));
            }
        }
    }
    if stride > 1 {
        for a in 0..256 {
            let t = PI * a as f64 / 256.0;
            let mut rr = rmax as f64;
            loop {
                let d1 = (rr * t.cos()).round() as i64;
                let d2 = (rr * t.sin()).round() as i64;
                if inside(d1, d2) && half(d1, d2) {
                    out.push((d1, d2));
                    break;
                }
                rr -= 0.5;
                if rr <= 0.0 {
                    break;
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }
    out
}

/// `sup |g(x) − g(y)| / |x−y|^σ` over grid pairs with `|x − y| ≤ radius`,
/// `|·|` the Euclidean magnitude across components.
pub fn holder_seminorm(g: &SpectralField, sigma: f64, radius: f64) -> f64 {
    let grid = *g.grid();
    let n = grid.n() as i64;
    let h = grid.spacing();
    let comps: Vec<&[f64]> = (0..g.components()).map(|c| g.values(c)).collect();
    pair_offsets(h, radius)
        .into_par_iter()
        .map(|(d1, d2)| {
            let dist = ((d1 * d1 + d2 * d2) as f64).sqrt() * h;
            let mut worst = 0.0f64;
            for i2 in 0..n {
                let j2 = (i2 + d2).rem_euclid(n);
                for i1 in 0..n {
                    let j1 = (i1 + d1).rem_euclid(n);
                    let a = (i2 * n + i1) as usize;
                    let b = (j2 * n + j1) as usize;
                    let diff2: f64 = comps.iter().map(|v| (v[a] - v[b]).powi(2)).sum();
                    worst = worst.max(diff2);
                }
            }
            worst.sqrt() / dist.powf(sigma)
        })
        .reduce(|| 0.0, f64::max)
}

/// `Σ_{|α|≤⌊r⌋}‖D^α f‖_∞ + Σ_{|β|=⌊r⌋} sup_{0<|x−y|≤1} |D^βf(x)−D^βf(y)|/|x−y|^{r−⌊r⌋}`.
///
/// The far-pair bound `Σ_β 2‖D^β f‖_∞` is carried as the auxiliary `far_bound`.
pub fn classical_holder_norm(f: &SpectralField, r: f64) -> Result<NormReport> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("Hölder order r = {r} must be nonnegative")));
    }
    let k = r.floor() as u32;
    let sigma = r - k as f64;
    let mut value = 0.0;
    for order in 0..=k {
        for (a1, a2) in multi_indices(order) {
            value += f.derivative(a1, a2).linf();
        }
    }
    let mut semi = 0.0;
    let mut far = 0.0;
    if sigma > 0.0 {
        for (a1, a2) in multi_indices(k) {
            let d = f.derivative(a1, a2);
            semi += holder_seminorm(&d, sigma, 1.0);
            far += 2.0 * d.linf();
        }
    }
    Ok(NormReport {
        kind: NormKind::ClassicalHolder { r },
        value: value + semi,
        block_profile: Vec::new(),
        window_profile: Vec::new(),
        tested_range: None,
        auxiliary: vec![("seminorm".into(), semi), ("far_bound".into(), far)],
    })
}

/// `‖J^s f‖_{L²}` (or `‖(−Δ)^{s/2} f‖_{L²}`), with the Littlewood-Paley
/// variant `(Σ_j 2^{2js}‖Δ_j f‖²_{L²})^{1/2}` as auxiliary `lp_blocks`.
pub fn sobolev_norm(f: &SpectralField, s: f64, homogeneous: bool) -> Result<NormReport> {
    let g = *f.grid();
    let m = if homogeneous {
        MultiplierSpec::frac_laplacian(s)
    } else {
        MultiplierSpec::bessel(s)
    };
    let value = apply_multiplier(f, &m)?.l2_spectral();
    let family = DyadicFamily::build_partition(g)?;
    let mode = if homogeneous {
        BlockMode::Homogeneous
    } else {
        BlockMode::Inhomogeneous
    };
    let range = family.realizable(mode);
    let profile: Vec<(i32, f64)> = range
        .clone()
        .into_par_iter()
        .map(|j| {
            let b = family.project_block(f, j, mode).expect("realizable");
            (j, 2f64.powf(j as f64 * s) * b.l2_spectral())
        })
        .collect();
    let lp = profile.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
    Ok(NormReport {
        kind: NormKind::Sobolev { s, homogeneous },
        value,
        block_profile: profile,
        window_profile: Vec::new(),
        tested_range: Some((*range.start(), *range.end())),
        auxiliary: vec![("lp_blocks".into(), lp)],
    })
}

/// Radial bump `φ(|x|)`: 1 on the unit ball, 0 outside radius 2, monotone
/// in between.
pub fn window_profile(rho: f64) -> f64 {
    1.0 - smooth_step(rho - 1.0)
}

/// Translates of `φ(·/λ)` centred on a lattice of grid points with spacing
/// at most `λ` in each direction.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFamily {
    grid: Grid2D,
    lambda: f64,
    centers: Vec<(usize, usize)>,
}

impl WindowFamily {
    pub fn new(grid: Grid2D, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("window scale {lambda} must be positive")));
        }
        if lambda < 4.0 * grid.spacing() {
            return Err(Error::Config(format!(
                "window scale {lambda} is not resolved by spacing {}",
                grid.spacing()
            )));
        }
        let m = (grid.length() / lambda).ceil() as usize;
        let n = grid.n();
        let snap = |i: usize| ((i as f64 * n as f64 / m as f64).round() as usize) % n;
        let centers = (0..m)
            .flat_map(|a| (0..m).map(move |b| (snap(a), snap(b))))
            .collect();
        Ok(Self {
            grid,
            lambda,
            centers,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Physical coordinates of the window centers.
    pub fn centers(&self) -> Vec<(f64, f64)> {
        let h = self.grid.spacing();
        self.centers
            .iter()
            .map(|&(a, b)| (a as f64 * h, b as f64 * h))
            .collect()
    }

    /// Whether every grid point lies in `B_λ` of some center (periodically).
    pub fn covers(&self) -> bool {
        let g = self.grid;
        let centers = self.centers();
        (0..g.len()).into_par_iter().all(|i| {
            let (x, y) = g.point(i);
            centers.iter().any(|&(cx, cy)| {
                let dx = g.periodic_delta(x, cx);
                let dy = g.periodic_delta(y, cy);
                (dx * dx + dy * dy).sqrt() < self.lambda
            })
        })
    }

    /// Side length in samples of the sub-box hosting a window of support
    /// radius `2λ` with `padding·λ` total side length.
    fn box_samples(&self, padding: f64) -> usize {
        let need = (padding * self.lambda / self.grid.spacing()).ceil() as usize;
        need.next_power_of_two().max(8)
    }

    /// `φ((x−c)/λ) f(x)` on a sub-box of `nb × nb` samples centred at `c`.
    fn windowed(&self, f: &SpectralField, center: (usize, usize), nb: usize) -> Option<Vec<Vec<f64>>> {
        let n = self.grid.n() as i64;
        let h = self.grid.spacing();
        let half = (nb / 2) as i64;
        let mut any = false;
        let comps = (0..f.components())
            .map(|c| {
                let v = f.values(c);
                let mut out = vec![0.0; nb * nb];
                for b in 0..nb as i64 {
                    let p2 = (center.1 as i64 + b - half).rem_euclid(n);
                    let y = (b - half) as f64 * h;
                    for a in 0..nb as i64 {
                        let x = (a - half) as f64 * h;
                        let w = window_profile((x * x + y * y).sqrt() / self.lambda);
                        if w == 0.0 {
                            continue;
                        }
                        let p1 = (center.0 as i64 + a - half).rem_euclid(n);
                        let val = w * v[(p2 * n + p1) as usize];
                        any |= val != 0.0;
                        out[(b as usize) * nb + a as usize] = val;
                    }
                }
                out
            })
            .collect();
        any.then_some(comps)
    }
}

/// Constant `C_{2,σ}` with `‖u‖²_{Ḣ^σ} = (C/2)∬|u(x)−u(y)|²/|x−y|^{2+2σ}`.
pub fn slobodeckij_constant(sigma: f64) -> f64 {
    // |Γ(−σ)| = Γ(1−σ)/σ on (0, 1).
    4f64.powf(sigma) * gamma(1.0 + sigma) * sigma / (PI * gamma(1.0 - sigma))
}

/// `∬_{ℝ²×ℝ²} |g(x)−g(y)|²/|x−y|^{2+2σ}` for `g` sampled on a periodic box
/// `side × side` and supported in a disc of radius `support` about the box
/// center, with `2·support < side/2`.
///
/// Written through the autocorrelation `R(d) = ∫ g(x) g(x+d) dx` as
/// `∫ 2(R(0) − R(d))|d|^{−2−2σ} dd`: a lattice sum over `d` with the leading
/// singular term corrected by the lattice zeta value, and the far region,
/// where `R = 0`, integrated in closed form after a smooth hand-off.
pub fn slobodeckij_double_integral(g: &[f64], nb: usize, side: f64, support: f64, sigma: f64) -> f64 {
    let h = side / nb as f64;
    let mut coeffs = fft::forward_real(g, nb);
    let grad2: f64 = {
        // ‖∇g‖² by Parseval.
        let k0 = 2.0 * PI / side;
        coeffs
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let k1 = signed(i % nb, nb) as f64 * k0;
                let k2 = signed(i / nb, nb) as f64 * k0;
                (k1 * k1 + k2 * k2) * z.norm_sqr()
            })
            .sum::<f64>()
            * side
            * side
    };
    for z in coeffs.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    let r: Vec<f64> = fft::inverse_real(&coeffs, nb).into_iter().map(|v| v * side * side).collect();
    let r0 = r[0];
    let inner = 2.0 * support;
    let outer = 0.5 * side - 2.0 * h;
    assert!(outer > inner, "sub-box too small for the autocorrelation support");
    let hand_off = |rho: f64| 1.0 - smooth_step((rho - inner) / (outer - inner));
    let mut sum = 0.0;
    for b in 0..nb {
        let d2 = signed(b, nb) as f64 * h;
        for a in 0..nb {
            if a == 0 && b == 0 {
                continue;
            }
            let d1 = signed(a, nb) as f64 * h;
            let rho = (d1 * d1 + d2 * d2).sqrt();
            let w = hand_off(rho);
            if w == 0.0 {
                continue;
            }
            sum += w * 2.0 * (r0 - r[b * nb + a]) * rho.powf(-2.0 - 2.0 * sigma);
        }
    }
    sum *= h * h;
    // Leading behaviour 2(R(0)−R(d)) ≈ (d·∇)²-average, whose lattice sum
    // over the punctured lattice is (‖∇g‖²/2)·Z(σ).
    let correction = h.powf(2.0 - 2.0 * sigma) * 0.5 * grad2 * lattice_zeta(sigma);
    let tail = 2.0 * r0 * 2.0 * PI * {
        let body = integrate(
            |rho| (1.0 - hand_off(rho)) * rho.powf(-1.0 - 2.0 * sigma),
            inner,
            outer,
            64,
        );
        body + outer.powf(-2.0 * sigma) / (2.0 * sigma)
    };
    sum - correction + tail
}

fn signed(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// `sup_c ‖φ_{c,λ} f‖` over the window lattice.
///
/// Windows on which `f` vanishes identically contribute 0 without being
/// evaluated. The Slobodeckij variant is refused on parent grids with
/// `n > 128`.
pub fn uniformly_local_norm(f: &SpectralField, local: LocalKind, windows: &WindowFamily) -> Result<NormReport> {
    if f.grid() != windows.grid() {
        return Err(Error::Shape("field and windows live on different grids".into()));
    }
    let n = windows.grid.n();
    match local {
        LocalKind::Slobodeckij { s } => {
            if n > SLOBODECKIJ_MAX_N {
                return Err(Error::Refused(format!(
                    "Slobodeckij quadrature is limited to n ≤ {SLOBODECKIJ_MAX_N}; got n = {n}"
                )));
            }
            if !(s > 0.0) {
                return Err(Error::Domain(format!("order s = {s} must be positive")));
            }
        }
        LocalKind::Lebesgue { p } if !(p >= 1.0) => {
            return Err(Error::Domain(format!("exponent p = {p} must be ≥ 1")));
        }
        _ => {}
    }
    let padding = match local {
        LocalKind::Lebesgue { .. } => 4.0,
        LocalKind::Sobolev { .. } | LocalKind::HomogeneousSobolev { .. } => 8.0,
        LocalKind::Slobodeckij { .. } => 10.0,
    };
    let nb = windows.box_samples(padding);
    let h = windows.grid.spacing();
    let side = nb as f64 * h;
    let sub = Grid2D::new(nb, side)?;
    let centers = windows.centers();
    let values: Vec<f64> = windows
        .centers
        .par_iter()
        .map(|&c| -> Result<f64> {
            let Some(comps) = windows.windowed(f, c, nb) else {
                return Ok(0.0);
            };
            local_norm(&comps, sub, local, 2.0 * windows.lambda)
        })
        .collect::<Result<_>>()?;
    let value = values.iter().copied().fold(0.0, f64::max);
    Ok(NormReport {
        kind: NormKind::UniformlyLocal {
            local,
            lambda: windows.lambda,
        },
        value,
        block_profile: Vec::new(),
        window_profile: centers.into_iter().zip(values).collect(),
        tested_range: Some((0, windows.centers.len() as i32 - 1)),
        auxiliary: vec![("sub_box_samples".into(), nb as f64)],
    })
}

fn local_norm(comps: &[Vec<f64>], sub: Grid2D, local: LocalKind, support: f64) -> Result<f64> {
    let area = sub.cell_area();
    match local {
        LocalKind::Lebesgue { p } if p.is_infinite() => Ok((0..sub.len())
            .map(|i| comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)),
        LocalKind::Lebesgue { p } => Ok(((0..sub.len())
            .map(|i| comps.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt().powf(p))
            .sum::<f64>()
            * area)
            .powf(1.0 / p)),
        LocalKind::Sobolev { s } | LocalKind::HomogeneousSobolev { s } => {
            let m = if matches!(local, LocalKind::Sobolev { .. }) {
                MultiplierSpec::bessel(s)
            } else {
                MultiplierSpec::frac_laplacian(s)
            };
            let field = SpectralField::from_values(sub, comps.to_vec())?;
            Ok(apply_multiplier(&field, &m)?.l2_spectral())
        }
        LocalKind::Slobodeckij { s } => {
            let m = s.floor() as u32;
            let sigma = s - m as f64;
            let field = SpectralField::from_values(sub, comps.to_vec())?;
            let mut total = field.l2_spectral().powi(2);
            for (a1, a2) in multi_indices(m) {
                // Ordered index tuples: each multi-index appears binom(m, a1) times.
                let mult = binomial(m, a1);
                let d = field.derivative(a1, a2);
                if m > 0 {
                    total += mult * d.l2_spectral().powi(2);
                }
                if sigma > 0.0 {
                    let c = slobodeckij_constant(sigma);
                    for comp in 0..d.components() {
                        let integral =
                            slobodeckij_double_integral(d.values(comp), sub.n(), sub.length(), support, sigma);
                        total += mult * 0.5 * c * integral;
                    }
                }
            }
            Ok(total.max(0.0).sqrt())
        }
    }
}

/// `[min, max]` of `((1+ρ^{2m}+ρ^{2s})/(1+ρ²)^s)^{1/2}` over `ρ ≥ 0`: the
/// exact bracket for `‖·‖_{W^{s,2}} / ‖·‖_{H^s}` per window.
pub fn slobodeckij_bracket(s: f64) -> (f64, f64) {
    let m = s.floor();
    let ratio = |rho: f64| {
        let r2 = rho * rho;
        ((1.0 + r2.powf(m) + r2.powf(s)) / (1.0 + r2).powf(s)).sqrt()
    };
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..=20000 {
        // Log-spaced radii over [1e−4, 1e4] plus the origin.
        let rho = if i == 0 { 0.0 } else { 10f64.powf(-4.0 + 8.0 * i as f64 / 20000.0) };
        let v = ratio(rho);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi.max(ratio(1e8)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{EnsembleSpec, FieldClass};

    fn grid(n: usize) -> Grid2D {
        Grid2D::periodic(n).unwrap()
    }

    #[test]
    fn zygmund_constant_and_unit_mode() {
        let g = grid(64);
        let fam = DyadicFamily::build_partition(g).unwrap();
        let c = SpectralField::constant(g, -3.0);
        let rep = zygmund_norm(&c, 2.0, &fam, false).unwrap();
        assert!((rep.value - 0.75).abs() < 1e-14);
        let wave = SpectralField::from_fn(g, |x, _| 0.4 * x.sin());
        for r in [0.5, 1.5, 3.0] {
            let rep = zygmund_norm(&wave, r, &fam, false).unwrap();
            assert!((rep.value - 0.4).abs() < 1e-14);
            assert_eq!(rep.block_profile.len(), (fam.j_top() + 2) as usize);
        }
    }

    #[test]
    fn zygmund_profiles_are_monotone_in_r_for_nonnegative_blocks() {
        let g = grid(64);
        let fam = DyadicFamily::build_partition(g).unwrap();
        let f = EnsembleSpec::new(1, 2, FieldClass::BandLimited).sample(g, 0).unwrap();
        let a = zygmund_norm(&f, 0.7, &fam, false).unwrap();
        let b = zygmund_norm(&f, 1.9, &fam, false).unwrap();
        for ((j, x), (_, y)) in a.block_profile.iter().zip(&b.block_profile) {
            if *j >= 0 {
                assert!(x <= y);
            }
        }
    }

    #[test]
    fn homogeneous_zygmund_drops_the_weight() {
        let g = grid(64);
        let fam = DyadicFamily::build_partition(g).unwrap();
        let f = SpectralField::from_fn(g, |x, y| (4.0 * x).cos() + 0.5 * (y).sin());
        let rep = zygmund_norm(&f, 3.0, &fam, true).unwrap();
        assert!((rep.value - 1.0).abs() < 1e-12);
        let c = SpectralField::constant(g, 5.0);
        assert!(zygmund_norm(&c, 1.0, &fam, true).unwrap().value < 1e-13);
    }

    #[test]
    fn classical_holder_constant_and_sine() {
        let g = grid(256);
        let c = SpectralField::constant(g, -2.0);
        assert!((classical_holder_norm(&c, 1.5).unwrap().value - 2.0).abs() < 1e-12);

        let f = SpectralField::from_fn(g, |x, _| x.sin());
        let rep = classical_holder_norm(&f, 1.5).unwrap();
        // Dense 1-D search of |cos a − cos b| / |a − b|^{1/2} over grid
        // separations up to 1; the sup sits at the largest one.
        let h = g.spacing();
        let dense = (1..=((1.0 / h) as usize))
            .map(|d| {
                let delta = d as f64 * h;
                (0..g.n())
                    .map(|i| {
                        let a = i as f64 * h;
                        (a.cos() - (a + delta).cos()).abs() / delta.sqrt()
                    })
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let semi = rep.auxiliary("seminorm").unwrap();
        assert!((semi - dense).abs() < 1e-12, "{semi} vs {dense}");
        let analytic = 2.0 * 0.5f64.sin();
        assert!((semi - analytic).abs() / analytic < 1e-2);
        assert!((rep.value - 2.0 - semi).abs() < 1e-12);
        assert!((rep.auxiliary("far_bound").unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn classical_holder_is_homogeneous() {
        let g = grid(64);
        let f = EnsembleSpec::new(1, 7, FieldClass::BandLimited).with_band(8.0).sample(g, 0).unwrap();
        let a = classical_holder_norm(&f, 1.3).unwrap().value;
        let b = classical_holder_norm(&f.scale(-3.5), 1.3).unwrap().value;
        assert!((b - 3.5 * a).abs() < 1e-12 * b);
    }

    #[test]
    fn sobolev_single_mode() {
        let g = grid(64);
        let f = SpectralField::from_fn(g, |x, _| x.sin());
        let rep = sobolev_norm(&f, 2.0, false).unwrap();
        assert!((rep.value - 2.0 * PI * 2f64.sqrt()).abs() < 1e-12);
        let hom = sobolev_norm(&f, 0.0, true).unwrap();
        assert!((hom.value - f.l2()).abs() < 1e-12);
        // Block variant: all mass in block 0 with weight 1.
        assert!((rep.auxiliary("lp_blocks").unwrap() - f.l2()).abs() < 1e-12);
    }

    #[test]
    fn windows_cover_the_torus() {
        for lambda in [0.5, 1.0, 2.0] {
            let w = WindowFamily::new(grid(64), lambda).unwrap();
            assert!(w.covers());
        }
        assert!(WindowFamily::new(grid(16), 0.1).is_err());
        assert_eq!(window_profile(0.9), 1.0);
        assert_eq!(window_profile(2.0), 0.0);
    }

    #[test]
    fn window_profile_finite_differences_are_bounded() {
        let h = 1.0 / 64.0;
        let v: Vec<f64> = (0..=200).map(|i| window_profile(i as f64 * h)).collect();
        let mut d = v.clone();
        for order in 1..=4 {
            d = d.windows(2).map(|w| (w[1] - w[0]) / h).collect();
            let max = d.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(max < 10f64.powi(order + 1), "order {order}: {max}");
        }
    }

    #[test]
    fn constant_l2_ul_equals_window_mass() {
        let g = grid(64);
        let c = SpectralField::constant(g, 1.5);
        let w = WindowFamily::new(g, 1.0).unwrap();
        let rep = uniformly_local_norm(&c, LocalKind::Lebesgue { p: 2.0 }, &w).unwrap();
        // ‖φ‖²_{L²} = 2π ∫ φ(ρ)² ρ dρ.
        let mass = (2.0 * PI * integrate(|r| window_profile(r).powi(2) * r, 0.0, 2.0, 64)).sqrt();
        assert!((rep.value - 1.5 * mass).abs() / (1.5 * mass) < 1e-3);
        let spread = rep
            .window_profile
            .iter()
            .map(|(_, v)| (v - rep.value).abs())
            .fold(0.0, f64::max);
        assert!(spread < 1e-12);
    }

    #[test]
    fn slobodeckij_refused_on_fine_grids() {
        let g = grid(256);
        let f = SpectralField::constant(g, 1.0);
        let w = WindowFamily::new(g, 1.0).unwrap();
        let err = uniformly_local_norm(&f, LocalKind::Slobodeckij { s: 1.5 }, &w).unwrap_err();
        assert!(matches!(err, Error::Refused(_)));
    }

    #[test]
    fn slobodeckij_constant_limits() {
        // C_{2,σ}/2 · ∬ reproduces |ξ|^{2σ}; at σ = 1/2 the constant is 1/(2π).
        assert!((slobodeckij_constant(0.5) - 1.0 / (2.0 * PI)).abs() < 1e-14);
    }

    /// A Gaussian has `‖g‖²_{Ḣ^σ} = ∫|ξ|^{2σ}|ĝ|²` in closed form; the
    /// quadrature must reproduce it.
    #[test]
    fn slobodeckij_integral_matches_gaussian_closed_form() {
        let nb = 128;
        let side = 16.0;
        let h = side / nb as f64;
        let a = 0.6;
        let g: Vec<f64> = (0..nb * nb)
            .map(|i| {
                let x = signed(i % nb, nb) as f64 * h;
                let y = signed(i / nb, nb) as f64 * h;
                (-(x * x + y * y) / (2.0 * a * a)).exp()
            })
            .collect();
        for sigma in [0.25, 0.5, 0.8] {
            let c = slobodeckij_constant(sigma);
            let got = 0.5 * c * slobodeckij_double_integral(&g, nb, side, 2.5, sigma);
            // ĝ(ξ) = 2πa² e^{−a²|ξ|²/2}; ∫|ξ|^{2σ}|ĝ|² dξ / (2π)² = π a^{2−2σ} Γ(1+σ).
            let exact = PI * a.powf(2.0 - 2.0 * sigma) * gamma(1.0 + sigma);
            assert!((got - exact).abs() / exact < 2e-3, "σ={sigma}: {got} vs {exact}");
        }
    }

    #[test]
    fn slobodeckij_bracket_for_two_and_a_half() {
        let (lo, hi) = slobodeckij_bracket(2.5);
        // Reference extremes from a dense scan of the same symbol ratio.
        assert!((lo - 0.709_907).abs() < 1e-5, "{lo}");
        assert!((hi - 1.043_937).abs() < 1e-5, "{hi}");
    }

    #[test]
    fn names_round_trip() {
        for text in ["zygmund:1.5", "zygmund_hom:0.5", "holder:1.5", "sobolev:2.5", "hs_ul:2.5@2", "lp_ul:2@1", "ws2_ul:1.5@1", "linf", "w1inf"] {
            let k: NormKind = text.parse().unwrap();
            let back: NormKind = k.to_string().parse().unwrap();
            assert_eq!(k, back);
        }
        assert!("nonsense:1".parse::<NormKind>().is_err());
    }

    #[test]
    fn csv_rows_include_auxiliaries() {
        let g = grid(32);
        let f = SpectralField::from_fn(g, |x, _| x.sin());
        let rep = sobolev_norm(&f, 1.0, false).unwrap();
        let mut buf = Vec::new();
        rep.write_csv_rows(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sobolev,1,"));
        assert!(text.contains("sobolev.lp_blocks,1,"));
    }
}
