//! Measured-constant checks of the estimates behind the well-posedness theory.
//!
//! A `≲` inequality is never asserted with a specific constant. Each check
//! measures the ratio `left / right` over an ensemble and over two grids, and
//! passes when the ratios stay below a declared ceiling and the fitted
//! constant does not drift by more than [`MAX_DRIFT`] under refinement.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dyadic::{block_symbol, BlockMode, DyadicFamily};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid2D;
use crate::kernels::{CutoffA, KernelSplit};
use crate::multipliers::{apply_multiplier, biot_savart_velocity, kato_ponce_commutator, MultiplierSpec};
use crate::norms::{
    classical_holder_norm, slobodeckij_bracket, sobolev_norm, uniformly_local_norm, zygmund_norm, LocalKind,
    NormKind, WindowFamily,
};
use crate::solver::{cfl_limit, existence_time, simulate, SolverConfig, Trajectory};

pub use crate::ensemble::{EnsembleSpec, FieldClass};

/// Largest relative variation of a fitted constant between two grids.
pub const MAX_DRIFT: f64 = 0.5;

/// A trial whose ratio exceeds this multiple of the median blocks a pass.
pub const OUTLIER_FACTOR: f64 = 10.0;

/// Right-hand sides below this are treated as degenerate and skipped.
pub const DEGENERATE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Warning,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    /// Which sub-case the ratio belongs to, e.g. `n=256,j=3`.
    pub label: String,
    pub trial: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub check_id: String,
    pub parameters: Vec<(String, f64)>,
    pub measured: Vec<Measurement>,
    /// Declared ceiling on every measured ratio.
    pub ceiling: f64,
    /// Declared floor; zero for one-sided estimates.
    pub floor: f64,
    /// Relative variation of the fitted constant across refinement.
    pub stability: f64,
    pub skipped: usize,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(check_id: impl Into<String>) -> Self {
        Self {
            check_id: check_id.into(),
            parameters: Vec::new(),
            measured: Vec::new(),
            ceiling: f64::INFINITY,
            floor: 0.0,
            stability: 0.0,
            skipped: 0,
            verdict: Verdict::Warning,
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, name: &str, value: f64) -> Self {
        self.parameters.push((name.to_string(), value));
        self
    }

    pub fn push(&mut self, label: impl Into<String>, trial: usize, ratio: f64) {
        self.measured.push(Measurement {
            label: label.into(),
            trial,
            ratio,
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.measured.iter().map(|m| m.ratio).collect()
    }

    /// Ratios whose label starts with `prefix`.
    pub fn ratios_for(&self, prefix: &str) -> Vec<f64> {
        self.measured
            .iter()
            .filter(|m| m.label.starts_with(prefix))
            .map(|m| m.ratio)
            .collect()
    }

    pub fn max_ratio(&self) -> f64 {
        self.measured.iter().map(|m| m.ratio).fold(0.0, f64::max)
    }

    pub fn median_ratio(&self) -> f64 {
        median(&self.ratios())
    }

    pub fn min_ratio(&self) -> f64 {
        self.measured.iter().map(|m| m.ratio).fold(f64::INFINITY, f64::min)
    }

    /// Largest ratio of each trial, over all of its sub-cases.
    pub fn trial_maxima(&self) -> Vec<f64> {
        let mut trials: Vec<usize> = self.measured.iter().map(|m| m.trial).collect();
        trials.sort_unstable();
        trials.dedup();
        trials
            .iter()
            .map(|&t| {
                self.measured
                    .iter()
                    .filter(|m| m.trial == t)
                    .map(|m| m.ratio)
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// True when some trial exceeds [`OUTLIER_FACTOR`] times the median
    /// trial. Sub-cases of one trial (blocks, grids) are pooled first so a
    /// systematic trend in `j` is not mistaken for an outlier.
    pub fn has_outlier(&self) -> bool {
        let maxima = self.trial_maxima();
        let med = median(&maxima);
        med > 0.0 && maxima.iter().any(|&v| v > OUTLIER_FACTOR * med)
    }

    /// Set the verdict from the ceiling, the stability and the outlier guard.
    pub fn conclude(&mut self, ceiling: f64, stability: f64) -> Verdict {
        self.conclude_bracket(0.0, ceiling, stability)
    }

    /// Two-sided variant of [`Self::conclude`]: every ratio must also be at
    /// least `floor`.
    pub fn conclude_bracket(&mut self, floor: f64, ceiling: f64, stability: f64) -> Verdict {
        self.floor = floor;
        self.ceiling = ceiling;
        self.stability = stability;
        let inside = self.max_ratio() <= ceiling && self.min_ratio() >= floor;
        if self.has_outlier() {
            self.note("outlier trial above the median guard");
        }
        if stability > MAX_DRIFT {
            self.note(format!("constant drifts by {stability:.3} under refinement"));
        }
        self.verdict = if self.measured.is_empty() {
            self.note("no admissible trials");
            Verdict::Warning
        } else if inside && stability <= MAX_DRIFT && !self.has_outlier() {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        self.verdict
    }

    /// Downgrade a pass to a warning when the ensemble is too small to ship.
    pub fn require_shippable(&mut self, ensemble: &EnsembleSpec) {
        if self.verdict == Verdict::Pass && !ensemble.is_shippable() {
            self.note(format!("ensemble of {} trials is below the shipping size", ensemble.count));
            self.verdict = Verdict::Warning;
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Stable hash of the parameter list, used to key CSV rows.
    pub fn param_hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (k, v) in &self.parameters {
            for b in k.bytes().chain(v.to_bits().to_le_bytes()) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }

    /// Rows `check_id,param_hash,label,trial,ratio` without a header.
    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> Result<()> {
        let hash = self.param_hash();
        for m in &self.measured {
            writeln!(w, "{},{},{},{},{:.12e}", self.check_id, hash, m.label, m.trial, m.ratio)?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "check_id,param_hash,label,trial,ratio")?;
        self.write_csv_rows(&mut w)?;
        writeln!(w, "# {}", self.summary())?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {} min={:.4e} max={:.4e} bracket=[{:.4e}, {:.4e}] stability={:.3} trials={} skipped={}",
            self.check_id,
            self.verdict,
            if self.measured.is_empty() { 0.0 } else { self.min_ratio() },
            self.max_ratio(),
            self.floor,
            self.ceiling,
            self.stability,
            self.measured.len(),
            self.skipped
        )
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_drift(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest relative variation over all pairs of `values`.
pub fn max_drift(values: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (i, &a) in values.iter().enumerate() {
        for &b in &values[i + 1..] {
            worst = worst.max(relative_drift(a, b));
        }
    }
    worst
}

/// Envelope `α·Π_{i<k}(1 + w_i)`, `k = 0..=len`, of every nonnegative
/// sequence with `u_k ≤ α + Σ_{i<k} w_i u_i`. Equality holds when the
/// sequence satisfies the recursion with equality.
pub fn gronwall_envelope(alpha: f64, weights: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(weights.len() + 1);
    let mut acc = alpha;
    out.push(acc);
    for &w in weights {
        acc *= 1.0 + w;
        out.push(acc);
    }
    out
}

/// Continuous form `α·exp(Σ_{i<k} w_i)`; dominates [`gronwall_envelope`].
pub fn gronwall_exponential(alpha: f64, weights: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(weights.len() + 1);
    let mut integral = 0.0;
    out.push(alpha);
    for &w in weights {
        integral += w;
        out.push(alpha * integral.exp());
    }
    out
}

/// Cumulative trapezoid integral of `(t, g)` samples, starting at zero.
pub fn cumulative_trapezoid(series: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for (i, &(t, g)) in series.iter().enumerate() {
        if i > 0 {
            let (t0, g0) = series[i - 1];
            acc += 0.5 * (t - t0) * (g + g0);
        }
        out.push(acc);
    }
    out
}

/// Least-squares line `y ≈ a + b·x`; returns `(a, b)`.
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.len() < 2 {
        return (points.first().map_or(0.0, |p| p.1), 0.0);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

/// The estimates the harness knows how to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    /// `‖∇Δ̇_j f‖_p ∼ 2^j‖Δ̇_j f‖_p`.
    Bernstein,
    /// `‖Δ̇_j(−Δ)^{s/2}f‖_p ∼ 2^{js}‖Δ̇_j f‖_p`.
    RieszBlocks,
    /// `‖Δ̇_j u‖_p ≲ 2^{j(β−1)}‖Δ̇_j θ‖_p` for the velocity law.
    BiotSavartBlocks,
    KatoPonce,
    /// `[u·∇, Δ_j]θ` in `C^r`, both right-hand sides.
    HolderCommutator,
    /// `‖u‖_{C^{r+1−β}} ≲ ‖u‖_∞ + ‖θ‖_{C^r}`.
    VelocityHolder,
    /// Near-field convolution in homogeneous `Ḣ^s_ul`.
    NearHomogeneous,
    /// Near-field convolution in `H^s_ul`.
    NearInhomogeneous,
    /// `C̃^j` against `H^{j+s}_ul`, `s > 1`.
    Embedding,
    /// Exponential growth bound for `‖θ‖_{H^s_ul}` along a solution.
    SobolevGronwall,
    /// Rational bound on `sup‖u‖_∞ + sup‖θ‖_{C^r}` along a solution.
    HolderBound,
    /// `‖u‖_{H^s_ul} ≲ ‖θ‖_{H^{s−1+β}_ul} + ‖u‖_{C̃¹}` along a solution.
    VelocityHsul,
    /// Block-sum `H^s` norm against the Bessel multiplier.
    SobolevBlocks,
    /// `W^{s,2}_ul` quadrature against `H^s_ul`.
    SlobodeckijWindows,
    /// `H^s_ul` at window scales `λ` and `2λ`.
    WindowScale,
    /// Growth of a perturbation between two nearby solutions.
    TwinRun,
}

impl CheckId {
    pub const ALL: [CheckId; 16] = [
        CheckId::Bernstein,
        CheckId::RieszBlocks,
        CheckId::BiotSavartBlocks,
        CheckId::KatoPonce,
        CheckId::HolderCommutator,
        CheckId::VelocityHolder,
        CheckId::NearHomogeneous,
        CheckId::NearInhomogeneous,
        CheckId::Embedding,
        CheckId::SobolevGronwall,
        CheckId::HolderBound,
        CheckId::VelocityHsul,
        CheckId::SobolevBlocks,
        CheckId::SlobodeckijWindows,
        CheckId::WindowScale,
        CheckId::TwinRun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckId::Bernstein => "bernstein",
            CheckId::RieszBlocks => "riesz_blocks",
            CheckId::BiotSavartBlocks => "biot_savart_blocks",
            CheckId::KatoPonce => "kato_ponce",
            CheckId::HolderCommutator => "holder_commutator",
            CheckId::VelocityHolder => "velocity_holder",
            CheckId::NearHomogeneous => "near_homogeneous",
            CheckId::NearInhomogeneous => "near_inhomogeneous",
            CheckId::Embedding => "embedding",
            CheckId::SobolevGronwall => "sobolev_gronwall",
            CheckId::HolderBound => "holder_bound",
            CheckId::VelocityHsul => "velocity_hsul",
            CheckId::SobolevBlocks => "sobolev_blocks",
            CheckId::SlobodeckijWindows => "slobodeckij_windows",
            CheckId::WindowScale => "window_scale",
            CheckId::TwinRun => "twin_run",
        }
    }

    /// Ensemble used when none is given.
    pub fn default_ensemble(self, seed: u64) -> EnsembleSpec {
        match self {
            CheckId::NearHomogeneous
            | CheckId::NearInhomogeneous
            | CheckId::SobolevGronwall
            | CheckId::HolderBound
            | CheckId::VelocityHsul
            | CheckId::TwinRun => EnsembleSpec::new(16, seed, FieldClass::CompactBump),
            CheckId::SlobodeckijWindows => EnsembleSpec::new(16, seed, FieldClass::BandLimited).with_band(6.0),
            _ => EnsembleSpec::new(16, seed, FieldClass::BandLimited),
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckId {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        CheckId::ALL
            .into_iter()
            .find(|c| c.name() == text)
            .ok_or_else(|| Error::Config(format!("unknown check {text:?}")))
    }
}

/// Parameters shared by all checks; each check reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckParams {
    pub beta: f64,
    pub s: f64,
    pub r: f64,
    /// Lebesgue exponent; `"inf"` in JSON for `p = ∞`.
    #[serde(serialize_with = "ser_exponent", deserialize_with = "de_exponent")]
    pub p: f64,
    /// Grid sizes compared for stability.
    pub grids: Vec<usize>,
    pub length: f64,
    /// Window scale of uniformly local norms.
    pub lambda: f64,
    /// Perturbation sizes of the twin run.
    pub deltas: Vec<f64>,
    /// Fraction of the existence-time estimate covered by trajectory checks.
    pub time_fraction: f64,
}

fn ser_exponent<S: Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

fn de_exponent<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Raw::Text(t) => Err(serde::de::Error::custom(format!("exponent {t:?} is neither a number nor \"inf\""))),
    }
}

impl Default for CheckParams {
    fn default() -> Self {
        Self {
            beta: 0.5,
            s: 2.5,
            r: 1.5,
            p: 2.0,
            grids: vec![128, 256],
            length: 2.0 * PI,
            lambda: 1.0,
            deltas: vec![1e-3, 1e-4, 1e-5],
            time_fraction: 0.5,
        }
    }
}

impl CheckParams {
    /// Reference parameters of `check`.
    pub fn for_check(check: CheckId) -> Self {
        let base = Self::default();
        match check {
            CheckId::RieszBlocks => Self { s: 0.7, ..base },
            CheckId::NearHomogeneous | CheckId::NearInhomogeneous => Self {
                s: 1.2,
                length: 16.0,
                ..base
            },
            CheckId::Embedding => Self { s: 1.1, r: 1.0, ..base },
            CheckId::SobolevBlocks | CheckId::WindowScale => Self { s: 1.5, ..base },
            CheckId::SlobodeckijWindows => Self {
                grids: vec![32, 64],
                ..base
            },
            CheckId::SobolevGronwall | CheckId::HolderBound | CheckId::VelocityHsul => Self {
                grids: vec![256, 512],
                ..base
            },
            CheckId::TwinRun => Self {
                grids: vec![256],
                ..base
            },
            _ => base,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Domain(format!("β = {} is outside (0, 1)", self.beta)));
        }
        if !(self.p >= 1.0) {
            return Err(Error::Domain(format!("exponent p = {} must be ≥ 1", self.p)));
        }
        if self.grids.is_empty() {
            return Err(Error::Config("no grid sizes given".into()));
        }
        if !(self.time_fraction > 0.0 && self.time_fraction <= 1.0) {
            return Err(Error::Config(format!("time fraction {} is outside (0, 1]", self.time_fraction)));
        }
        Ok(())
    }

    fn grid(&self, n: usize) -> Result<Grid2D> {
        Grid2D::new(n, self.length)
    }

    fn describe(&self, report: VerificationReport, ensemble: Option<&EnsembleSpec>) -> VerificationReport {
        let mut r = report
            .param("beta", self.beta)
            .param("s", self.s)
            .param("r", self.r)
            .param("p", self.p)
            .param("length", self.length)
            .param("lambda", self.lambda);
        for (i, &n) in self.grids.iter().enumerate() {
            r = r.param(&format!("grid{i}"), n as f64);
        }
        if let Some(e) = ensemble {
            r = r.param("count", e.count as f64).param("seed", e.seed as f64);
        }
        r
    }
}

/// Declared spread `C/c` of the two-sided block estimates.
pub const BLOCK_SPREAD: f64 = 4.0;

/// Declared ceilings of the one-sided estimates. Each sits about an order of
/// magnitude above the constant measured on the reference ensembles, so a
/// pass means "bounded and stable", not "sharp".
pub const COMMUTATOR_CEILING: f64 = 10.0;
pub const VELOCITY_CEILING: f64 = 10.0;
pub const NEAR_FIELD_CEILING: f64 = 10.0;
pub const EMBEDDING_CEILING: f64 = 10.0;
pub const VELOCITY_HSUL_CEILING: f64 = 10.0;

/// Declared bracket of `‖f‖_{H^s_ul(λ)} / ‖f‖_{H^s_ul(2λ)}`.
pub const WINDOW_SCALE_BRACKET: (f64, f64) = (0.25, 4.0);

/// Relative allowance on the Slobodeckij bracket for quadrature error.
pub const SLOBODECKIJ_QUADRATURE: f64 = 0.05;

/// Tolerance on bounds that dominate by construction.
const ROUNDING: f64 = 1e-9;

fn block_ratio(check: CheckId, block: &SpectralField, j: i32, params: &CheckParams) -> Result<Option<f64>> {
    let den = block.lp(params.p);
    if den < DEGENERATE {
        return Ok(None);
    }
    let (image, order) = match check {
        CheckId::Bernstein => (block.gradient(), 1.0),
        CheckId::RieszBlocks => (apply_multiplier(block, &MultiplierSpec::frac_laplacian(params.s))?, params.s),
        CheckId::BiotSavartBlocks => (biot_savart_velocity(block, params.beta)?, params.beta - 1.0),
        _ => return Err(Error::Config(format!("{check} is not a block estimate"))),
    };
    Ok(Some(image.lp(params.p) / (2f64.powf(j as f64 * order) * den)))
}

/// Block ratio of the single mode `cos(2^j x₁)` on the `2π` box; exactly 1
/// for every block estimate.
pub fn single_mode_ratio(check: CheckId, n: usize, j: i32, params: &CheckParams) -> Result<f64> {
    let grid = Grid2D::periodic(n)?;
    let k = 2f64.powi(j);
    if k >= grid.dealias_radius() {
        return Err(Error::Config(format!("mode 2^{j} is not resolved on n = {n}")));
    }
    let f = SpectralField::from_fn(grid, |x, _| (k * x).cos());
    let family = DyadicFamily::build_partition(grid)?;
    let block = family.project_block(&f, j, BlockMode::Homogeneous)?;
    block_ratio(check, &block, j, params)?.ok_or_else(|| Error::State("degenerate single mode".into()))
}

/// Ratio tables of the dyadic block estimates. Passes when the ratios over
/// all blocks, trials and grids spread by at most [`BLOCK_SPREAD`] and the
/// per-grid extremes drift by at most [`MAX_DRIFT`].
pub fn check_multiplier_bounds(check: CheckId, params: &CheckParams, ensemble: &EnsembleSpec) -> Result<VerificationReport> {
    if !matches!(check, CheckId::Bernstein | CheckId::RieszBlocks | CheckId::BiotSavartBlocks) {
        return Err(Error::Config(format!("{check} is not a block estimate")));
    }
    params.validate()?;
    let mut report = params.describe(VerificationReport::new(check.name()), Some(ensemble));
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for &n in &params.grids {
        let grid = params.grid(n)?;
        let family = DyadicFamily::build_partition(grid)?;
        let range = family.tested_range(BlockMode::Homogeneous);
        if range.clone().count() < 4 {
            return Err(Error::Config(format!(
                "n = {n} resolves only {} blocks; at least 4 are needed",
                range.count()
            )));
        }
        let rows: Vec<Vec<(i32, Option<f64>)>> = (0..ensemble.count)
            .into_par_iter()
            .map(|t| -> Result<_> {
                let f = ensemble.sample(grid, t)?;
                range
                    .clone()
                    .map(|j| {
                        let block = family.project_block(&f, j, BlockMode::Homogeneous)?;
                        Ok((j, block_ratio(check, &block, j, params)?))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (t, row) in rows.into_iter().enumerate() {
            for (j, ratio) in row {
                match ratio {
                    Some(v) => {
                        lo = lo.min(v);
                        hi = hi.max(v);
                        report.push(format!("n={n},j={j}"), t, v);
                    }
                    None => report.skipped += 1,
                }
            }
        }
        minima.push(lo);
        maxima.push(hi);
    }
    let stability = max_drift(&maxima).max(max_drift(&minima));
    let floor = report.min_ratio();
    report.conclude_bracket(floor, BLOCK_SPREAD * floor, stability);
    report.require_shippable(ensemble);
    Ok(report)
}

/// Operator norm of the Jacobian, bounded by the pointwise Frobenius norm.
fn jacobian_linf(u: &SpectralField) -> f64 {
    let grads: Vec<SpectralField> = (0..u.components()).map(|c| u.component(c).gradient()).collect();
    let mags: Vec<Vec<f64>> = grads.iter().map(|g| g.magnitude()).collect();
    (0..u.grid().len())
        .map(|i| mags.iter().map(|m| m[i] * m[i]).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// `u·∇(Δ_jθ) − Δ_j(u·∇θ)` with dealiased products.
pub fn holder_commutator(u: &SpectralField, theta: &SpectralField, family: &DyadicFamily, j: i32) -> Result<SpectralField> {
    let theta = theta.dealias();
    let u = u.dealias();
    let block = family.project_block(&theta, j, BlockMode::Inhomogeneous)?;
    let a = u.dot(&block.gradient()).dealias();
    let b = family.project_block(&u.dot(&theta.gradient()).dealias(), j, BlockMode::Inhomogeneous)?;
    Ok(a.sub(&b))
}

/// Measured constants of the commutator estimates. Partners come from the
/// same ensemble with the seed shifted by one.
pub fn check_commutators(check: CheckId, params: &CheckParams, ensemble: &EnsembleSpec) -> Result<VerificationReport> {
    params.validate()?;
    let partner = EnsembleSpec {
        seed: ensemble.seed.wrapping_add(1),
        ..*ensemble
    };
    let mut report = params.describe(VerificationReport::new(check.name()), Some(ensemble));
    for &n in &params.grids {
        let grid = params.grid(n)?;
        let family = DyadicFamily::build_partition(grid)?;
        let rows: Vec<Vec<(String, Option<f64>)>> = match check {
            CheckId::KatoPonce => {
                if params.p.is_infinite() {
                    return Err(Error::Domain("the commutator estimate needs p < ∞".into()));
                }
                (0..ensemble.count)
                    .into_par_iter()
                    .map(|t| -> Result<_> {
                        let f = ensemble.sample(grid, t)?;
                        let g = partner.sample(grid, t)?;
                        Ok(vec![(format!("n={n}"), kato_ponce_ratio(&f, &g, params.s, params.p)?)])
                    })
                    .collect::<Result<_>>()?
            }
            CheckId::HolderCommutator => (0..ensemble.count)
                .into_par_iter()
                .map(|t| -> Result<_> {
                    let psi = ensemble.sample(grid, t)?;
                    let u = biot_savart_velocity(&psi, params.beta)?;
                    let theta = partner.sample(grid, t)?;
                    holder_commutator_ratios(&u, &theta, &family, params.r, n)
                })
                .collect::<Result<_>>()?,
            _ => return Err(Error::Config(format!("{check} is not a commutator estimate"))),
        };
        for (t, row) in rows.into_iter().enumerate() {
            for (label, ratio) in row {
                match ratio {
                    Some(v) => report.push(label, t, v),
                    None => report.skipped += 1,
                }
            }
        }
    }
    let stability = grid_stability(&report, &params.grids);
    report.conclude(COMMUTATOR_CEILING, stability);
    report.require_shippable(ensemble);
    Ok(report)
}

/// Drift of the largest ratio across grids, per label family. A label is a
/// comma list such as `form=smooth,n=256,j=3`; the family drops `n` and `j`.
fn grid_stability(report: &VerificationReport, grids: &[usize]) -> f64 {
    let split = |label: &str| -> (String, Option<usize>) {
        let mut family = Vec::new();
        let mut n = None;
        for part in label.split(',') {
            if let Some(v) = part.strip_prefix("n=") {
                n = v.parse().ok();
            } else if !part.starts_with("j=") {
                family.push(part);
            }
        }
        (family.join(","), n)
    };
    let mut families: Vec<String> = report.measured.iter().map(|m| split(&m.label).0).collect();
    families.sort();
    families.dedup();
    families
        .iter()
        .map(|fam| {
            let maxima: Vec<f64> = grids
                .iter()
                .map(|&n| {
                    report
                        .measured
                        .iter()
                        .filter(|m| split(&m.label) == (fam.clone(), Some(n)))
                        .map(|m| m.ratio)
                        .fold(0.0, f64::max)
                })
                .collect();
            max_drift(&maxima)
        })
        .fold(0.0, f64::max)
}

fn kato_ponce_ratio(f: &SpectralField, g: &SpectralField, s: f64, p: f64) -> Result<Option<f64>> {
    let lhs = kato_ponce_commutator(f, g, s)?.lp(p);
    let j_s = |h: &SpectralField, order: f64| apply_multiplier(h, &MultiplierSpec::bessel(order));
    let rhs = f.gradient().linf() * j_s(g, s - 1.0)?.lp(p) + j_s(f, s)?.lp(p) * g.linf();
    Ok((rhs >= DEGENERATE).then(|| lhs / rhs))
}

fn holder_commutator_ratios(
    u: &SpectralField,
    theta: &SpectralField,
    family: &DyadicFamily,
    r: f64,
    n: usize,
) -> Result<Vec<(String, Option<f64>)>> {
    let zyg = |f: &SpectralField, order: f64| zygmund_norm(f, order, family, false).map(|z| z.value);
    let grad_u = jacobian_linf(u);
    let theta_cr = zyg(theta, r)?;
    let gradient_form = theta.gradient().linf() * zyg(u, r)? + grad_u * theta_cr;
    let smooth_form = theta.linf() * zyg(u, r + 1.0)? + grad_u * theta_cr;
    let mut out = Vec::new();
    for j in family.tested_range(BlockMode::Inhomogeneous) {
        let lhs = zyg(&holder_commutator(u, theta, family, j)?, r)?;
        for (form, rhs) in [("gradient", gradient_form), ("smooth", smooth_form)] {
            out.push((format!("form={form},n={n},j={j}"), (rhs >= DEGENERATE).then(|| lhs / rhs)));
        }
    }
    Ok(out)
}

fn near_split(grid: Grid2D, beta: f64) -> Result<KernelSplit> {
    KernelSplit::build_split(grid, beta, CutoffA::default())
}

/// One trial of a velocity-regularity estimate: `(left, right)`.
fn velocity_sides(
    check: CheckId,
    g: &SpectralField,
    params: &CheckParams,
    family: &DyadicFamily,
    split: Option<&KernelSplit>,
    windows: &WindowFamily,
) -> Result<(f64, f64)> {
    let ul = |f: &SpectralField, local| uniformly_local_norm(f, local, windows).map(|r| r.value);
    let (s, beta) = (params.s, params.beta);
    match check {
        CheckId::VelocityHolder => {
            let f = biot_savart_velocity(g, beta)?;
            let lhs = zygmund_norm(&f, params.r + 1.0 - beta, family, false)?.value;
            Ok((lhs, f.linf() + zygmund_norm(g, params.r, family, false)?.value))
        }
        CheckId::NearHomogeneous => {
            let v = split.expect("split").convolve_near(g)?;
            let lhs = ul(&v, LocalKind::HomogeneousSobolev { s })?;
            let rhs = ul(g, LocalKind::HomogeneousSobolev { s: s - 1.0 + beta })? + ul(g, LocalKind::Lebesgue { p: 2.0 })?;
            Ok((lhs, rhs))
        }
        CheckId::NearInhomogeneous => {
            let v = split.expect("split").convolve_near(g)?;
            Ok((ul(&v, LocalKind::Sobolev { s })?, ul(g, LocalKind::Sobolev { s: s - 1.0 + beta })?))
        }
        CheckId::Embedding => {
            let lhs = classical_holder_norm(g, params.r)?.value;
            Ok((lhs, ul(g, LocalKind::Sobolev { s: params.r + s })?))
        }
        _ => Err(Error::Config(format!("{check} is not a velocity-regularity estimate"))),
    }
}

/// `left / right` of one velocity-regularity estimate for a given field;
/// `None` when the right side is degenerate.
pub fn velocity_ratio(check: CheckId, g: &SpectralField, params: &CheckParams) -> Result<Option<f64>> {
    let grid = *g.grid();
    let family = DyadicFamily::build_partition(grid)?;
    let split = match check {
        CheckId::NearHomogeneous | CheckId::NearInhomogeneous => Some(near_split(grid, params.beta)?),
        _ => None,
    };
    let windows = WindowFamily::new(grid, params.lambda)?;
    let (lhs, rhs) = velocity_sides(check, g, params, &family, split.as_ref(), &windows)?;
    Ok((rhs >= DEGENERATE).then(|| lhs / rhs))
}

/// Measured constants of the velocity-regularity and embedding estimates.
pub fn check_velocity_regularity(check: CheckId, params: &CheckParams, ensemble: &EnsembleSpec) -> Result<VerificationReport> {
    params.validate()?;
    if check == CheckId::Embedding && params.s <= 1.0 {
        return Err(Error::Domain(format!("the embedding needs s > 1; got {}", params.s)));
    }
    let mut report = params.describe(VerificationReport::new(check.name()), Some(ensemble));
    for &n in &params.grids {
        let grid = params.grid(n)?;
        let family = DyadicFamily::build_partition(grid)?;
        let split = match check {
            CheckId::NearHomogeneous | CheckId::NearInhomogeneous => Some(near_split(grid, params.beta)?),
            CheckId::VelocityHolder | CheckId::Embedding => None,
            _ => return Err(Error::Config(format!("{check} is not a velocity-regularity estimate"))),
        };
        let windows = WindowFamily::new(grid, params.lambda)?;
        let rows: Vec<(f64, f64)> = (0..ensemble.count)
            .into_par_iter()
            .map(|t| {
                let g = ensemble.sample(grid, t)?;
                velocity_sides(check, &g, params, &family, split.as_ref(), &windows)
            })
            .collect::<Result<_>>()?;
        for (t, (lhs, rhs)) in rows.into_iter().enumerate() {
            if rhs < DEGENERATE {
                report.skipped += 1;
            } else {
                report.push(format!("n={n}"), t, lhs / rhs);
            }
        }
    }
    let ceiling = match check {
        CheckId::VelocityHolder => VELOCITY_CEILING,
        CheckId::Embedding => EMBEDDING_CEILING,
        _ => NEAR_FIELD_CEILING,
    };
    let stability = grid_stability(&report, &params.grids);
    report.conclude(ceiling, stability);
    report.require_shippable(ensemble);
    Ok(report)
}

/// `[min, max]` over `ρ ≥ 0` of `(Σ_j 2^{2js}|Δ_j(ρ)|²)^{1/2} / (1+ρ²)^{s/2}`:
/// the exact bracket of the block-sum `H^s` norm against the multiplier.
pub fn sobolev_block_bracket(s: f64) -> (f64, f64) {
    let ratio = |rho: f64| {
        let sum: f64 = (-1..=40)
            .map(|j| {
                let b = block_symbol(j, BlockMode::Inhomogeneous, rho);
                2f64.powf(2.0 * j as f64 * s) * b * b
            })
            .sum();
        sum.sqrt() / (1.0 + rho * rho).powf(0.5 * s)
    };
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..=40000 {
        let rho = if i == 0 { 0.0 } else { 10f64.powf(-4.0 + 10.0 * i as f64 / 40000.0) };
        let v = ratio(rho);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// Ratios of two equivalent norms over an ensemble, checked against a fixed
/// bracket and for drift between grids.
pub fn check_norm_equivalence(check: CheckId, params: &CheckParams, ensemble: &EnsembleSpec) -> Result<VerificationReport> {
    params.validate()?;
    let s = params.s;
    let (floor, ceiling) = match check {
        CheckId::SobolevBlocks => sobolev_block_bracket(s),
        CheckId::SlobodeckijWindows => {
            let (lo, hi) = slobodeckij_bracket(s);
            (lo * (1.0 - SLOBODECKIJ_QUADRATURE), hi * (1.0 + SLOBODECKIJ_QUADRATURE))
        }
        CheckId::WindowScale => WINDOW_SCALE_BRACKET,
        CheckId::Embedding => return check_velocity_regularity(check, params, ensemble),
        _ => return Err(Error::Config(format!("{check} is not a norm equivalence"))),
    };
    let mut report = params.describe(VerificationReport::new(check.name()), Some(ensemble));
    for &n in &params.grids {
        let grid = params.grid(n)?;
        let windows = WindowFamily::new(grid, params.lambda)?;
        let wide = match check {
            CheckId::WindowScale => Some(WindowFamily::new(grid, 2.0 * params.lambda)?),
            _ => None,
        };
        let rows: Vec<(f64, f64)> = (0..ensemble.count)
            .into_par_iter()
            .map(|t| -> Result<(f64, f64)> {
                let f = ensemble.sample(grid, t)?;
                let hs = |w: &WindowFamily| uniformly_local_norm(&f, LocalKind::Sobolev { s }, w).map(|r| r.value);
                match check {
                    CheckId::SobolevBlocks => {
                        let rep = sobolev_norm(&f, s, false)?;
                        Ok((rep.auxiliary("lp_blocks").unwrap_or(0.0), rep.value))
                    }
                    CheckId::SlobodeckijWindows => {
                        let w = uniformly_local_norm(&f, LocalKind::Slobodeckij { s }, &windows)?.value;
                        Ok((w, hs(&windows)?))
                    }
                    _ => Ok((hs(&windows)?, hs(wide.as_ref().expect("wide windows"))?)),
                }
            })
            .collect::<Result<_>>()?;
        for (t, (a, b)) in rows.into_iter().enumerate() {
            if b < DEGENERATE {
                report.skipped += 1;
            } else {
                report.push(format!("n={n}"), t, a / b);
            }
        }
    }
    let per_grid = |pick: fn(f64, f64) -> f64, init: f64| -> Vec<f64> {
        params
            .grids
            .iter()
            .map(|&n| {
                let label = format!("n={n}");
                report.ratios_for(&label).into_iter().fold(init, pick)
            })
            .collect()
    };
    let stability = max_drift(&per_grid(f64::max, 0.0)).max(max_drift(&per_grid(f64::min, f64::INFINITY)));
    report.conclude_bracket(floor, ceiling, stability);
    report.require_shippable(ensemble);
    Ok(report)
}

fn hsul_name(s: f64, lambda: f64) -> String {
    NormKind::UniformlyLocal {
        local: LocalKind::Sobolev { s },
        lambda,
    }
    .to_string()
}

/// Norms a trajectory must record for `check`.
pub fn apriori_norms(check: CheckId, params: &CheckParams) -> Vec<String> {
    match check {
        CheckId::SobolevGronwall => vec![hsul_name(params.s, params.lambda)],
        CheckId::HolderBound => vec![NormKind::Zygmund {
            r: params.r,
            homogeneous: false,
        }
        .to_string()],
        CheckId::VelocityHsul => vec![
            format!("u:{}", hsul_name(params.s, params.lambda)),
            hsul_name(params.s - 1.0 + params.beta, params.lambda),
        ],
        _ => Vec::new(),
    }
}

fn recorded(run: &Trajectory, name: &str) -> Result<Vec<(f64, f64)>> {
    let s = run.series(name);
    if s.is_empty() {
        return Err(Error::Config(format!("trajectory did not record {name:?}")));
    }
    Ok(s)
}

fn run_label(run: &Trajectory) -> String {
    format!("n={},dt={:.3e}", run.config.n_side, run.dt)
}

/// Fitted constants of the a-priori bounds along recorded trajectories,
/// compared across the runs (different grids or steps on the same data).
pub fn check_apriori_bounds(runs: &[Trajectory], check: CheckId, params: &CheckParams) -> Result<VerificationReport> {
    if runs.is_empty() {
        return Err(Error::Config("no trajectories given".into()));
    }
    let mut report = params.describe(VerificationReport::new(check.name()), None);
    let mut constants = Vec::new();
    let mut warn = false;
    let mut ceiling = 1.0 + ROUNDING;
    for (i, run) in runs.iter().enumerate() {
        let label = run_label(run);
        match check {
            CheckId::SobolevGronwall => {
                let norm = recorded(run, &hsul_name(params.s, params.lambda))?;
                let u_c1 = recorded(run, "u_c1")?;
                let th = recorded(run, "theta_w1inf")?;
                let g: Vec<(f64, f64)> = u_c1.iter().zip(&th).map(|(a, b)| (a.0, a.1 + b.1)).collect();
                let integral = cumulative_trapezoid(&g);
                let n0 = norm[0].1;
                let mut k = 0.0f64;
                for (&(_, v), &int) in norm.iter().zip(&integral).skip(1) {
                    if n0 > 0.0 && int > 0.0 && v > 0.0 {
                        k = k.max((v / n0).ln() / int);
                    }
                }
                let weights: Vec<f64> = integral.windows(2).map(|w| k * (w[1] - w[0])).collect();
                let envelope = gronwall_exponential(n0, &weights);
                for (idx, (&(_, v), &b)) in norm.iter().zip(&envelope).enumerate() {
                    report.push(format!("{label},sample={idx}"), i, if b > 0.0 { v / b } else { 0.0 });
                }
                report = report.param(&format!("K[{label}]"), k);
                constants.push(k);
            }
            CheckId::HolderBound => {
                let zyg = recorded(run, &apriori_norms(check, params)[0])?;
                let u = recorded(run, "u_linf")?;
                let a = u[0].1 + zyg[0].1;
                let (mut su, mut sz) = (0.0f64, 0.0f64);
                let mut lhs = Vec::new();
                let mut c = 0.0f64;
                for (&(t, uv), &(_, zv)) in u.iter().zip(&zyg) {
                    su = su.max(uv);
                    sz = sz.max(zv);
                    let m = su + sz;
                    if a > 0.0 {
                        c = c.max(m / (a * (1.0 + t * m)));
                    }
                    lhs.push((t, m));
                }
                for (idx, &(t, m)) in lhs.iter().enumerate() {
                    let den = 1.0 - c * t * a;
                    if den <= 0.0 {
                        warn = true;
                        continue;
                    }
                    let bound = c * a / den;
                    report.push(format!("{label},sample={idx}"), i, if bound > 0.0 { m / bound } else { 0.0 });
                }
                report = report.param(&format!("C[{label}]"), c);
                constants.push(c);
            }
            CheckId::VelocityHsul => {
                let names = apriori_norms(check, params);
                let uh = recorded(run, &names[0])?;
                let th = recorded(run, &names[1])?;
                let c1 = recorded(run, "u_c1")?;
                let mut worst = 0.0f64;
                for (idx, ((&(_, a), &(_, b)), &(_, c))) in uh.iter().zip(&th).zip(&c1).enumerate() {
                    let rhs = b + c;
                    if rhs < DEGENERATE {
                        report.skipped += 1;
                        continue;
                    }
                    worst = worst.max(a / rhs);
                    report.push(format!("{label},sample={idx}"), i, a / rhs);
                }
                constants.push(worst);
                ceiling = VELOCITY_HSUL_CEILING;
            }
            _ => return Err(Error::Config(format!("{check} is not an a-priori bound"))),
        }
    }
    let stability = max_drift(&constants);
    report.conclude(ceiling, stability);
    if warn {
        report.note("bound denominator reached zero inside the run; the run left the guaranteed window");
        if report.verdict == Verdict::Pass {
            report.verdict = Verdict::Warning;
        }
    }
    Ok(report)
}

/// Trajectories of trial 0 of `ensemble` on each grid of `params`, recorded
/// with the norms `check` needs, run to `time_fraction` of the existence
/// time with a common step.
pub fn apriori_runs(check: CheckId, params: &CheckParams, ensemble: &EnsembleSpec) -> Result<Vec<Trajectory>> {
    params.validate()?;
    let finest = *params.grids.iter().max().expect("validated");
    let fine_grid = params.grid(finest)?;
    let theta = ensemble.sample(fine_grid, 0)?;
    let u = biot_savart_velocity(&theta, params.beta)?;
    let family = DyadicFamily::build_partition(fine_grid)?;
    let t_exist = existence_time(u.linf(), zygmund_norm(&theta, params.r, &family, false)?.value, 1.0);
    let t_end = params.time_fraction * t_exist;
    let steps = ((t_end / (0.8 * cfl_limit(&fine_grid, u.linf()))).ceil() as usize).max(16);
    let dt = t_end / steps as f64;
    params
        .grids
        .iter()
        .map(|&n| {
            let grid = params.grid(n)?;
            let theta = ensemble.sample(grid, 0)?;
            let u = biot_savart_velocity(&theta, params.beta)?;
            let mut config = SolverConfig::new(params.beta, n, params.length, dt, t_end);
            config.r = params.r;
            config.record_norms = apriori_norms(check, params);
            config.sample_every = (steps / 16).max(1);
            simulate(&config, &theta, &u)
        })
        .collect()
}

/// Perturbation growth between the solution from `θ⁰` and those from
/// `θ⁰ + δ·p`, `δ ∈ deltas`. For each `δ` the error
/// `e(t) = ‖θ_δ − θ‖_∞ + ‖u_δ − u‖_∞` is fitted to `K·δ·e^{Λt}` (`Λ` by
/// least squares on `ln(e/δ)`, `K` minimal); the check passes when `K` and
/// `e^{Λ t_end}` vary by at most [`MAX_DRIFT`] over `δ`.
pub fn twin_run(config: &SolverConfig, theta0: &SpectralField, perturbation: &SpectralField, deltas: &[f64]) -> Result<VerificationReport> {
    if deltas.len() < 2 || deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Config("twin run needs at least two positive perturbation sizes".into()));
    }
    let grid = config.grid()?;
    let u0 = biot_savart_velocity(theta0, config.beta)?;
    let mut config = config.clone();
    config.dt = config.dt.min(0.8 * cfl_limit(&grid, u0.linf()));
    config.checkpoint_every = Some(config.sample_every);
    let base = simulate(&config, theta0, &u0)?;
    let mut report = VerificationReport::new(CheckId::TwinRun.name())
        .param("beta", config.beta)
        .param("n", config.n_side as f64)
        .param("length", config.length)
        .param("t_end", config.t_end)
        .param("dt", base.dt);
    let mut ks = Vec::new();
    let mut growth = Vec::new();
    for (i, &delta) in deltas.iter().enumerate() {
        let theta = theta0.axpy(delta, perturbation);
        let u = biot_savart_velocity(&theta, config.beta)?;
        let run = simulate(&config, &theta, &u)?;
        if run.snapshots.len() != base.snapshots.len() {
            return Err(Error::State("twin runs sampled at different times".into()));
        }
        let errors: Vec<(f64, f64)> = run
            .snapshots
            .iter()
            .zip(&base.snapshots)
            .map(|((t, th, u), (_, th0, u0))| (*t, th.sub(th0).linf() + u.sub(u0).linf()))
            .collect();
        let logs: Vec<(f64, f64)> = errors.iter().filter(|e| e.1 > 0.0).map(|&(t, e)| (t, (e / delta).ln())).collect();
        let (_, lambda) = fit_line(&logs);
        let k = errors
            .iter()
            .map(|&(t, e)| e / (delta * (lambda * t).exp()))
            .fold(0.0, f64::max);
        for (idx, &(t, e)) in errors.iter().enumerate() {
            let bound = k * delta * (lambda * t).exp();
            report.push(format!("delta={delta:e},sample={idx}"), i, if bound > 0.0 { e / bound } else { 0.0 });
        }
        report = report.param(&format!("K[{delta:e}]"), k).param(&format!("Lambda[{delta:e}]"), lambda);
        ks.push(k);
        growth.push((lambda * config.t_end).exp());
    }
    let stability = max_drift(&ks).max(max_drift(&growth));
    report.conclude(1.0 + ROUNDING, stability);
    Ok(report)
}

/// Twin run on trial 0 of `ensemble` with trial 1 as the perturbation
/// direction, normalized to unit sup norm.
pub fn twin_run_check(params: &CheckParams, ensemble: &EnsembleSpec) -> Result<VerificationReport> {
    params.validate()?;
    let n = params.grids[0];
    let grid = params.grid(n)?;
    let theta = ensemble.sample(grid, 0)?;
    let dir = ensemble.sample(grid, 1)?;
    let dir = dir.scale(1.0 / dir.linf().max(DEGENERATE));
    let u = biot_savart_velocity(&theta, params.beta)?;
    let family = DyadicFamily::build_partition(grid)?;
    let t_exist = existence_time(u.linf(), zygmund_norm(&theta, params.r, &family, false)?.value, 1.0);
    let t_end = params.time_fraction * t_exist;
    let mut config = SolverConfig::new(params.beta, n, params.length, t_end / 32.0, t_end);
    config.r = params.r;
    config.sample_every = 2;
    let mut report = twin_run(&config, &theta, &dir, &params.deltas)?;
    report.parameters.extend([("seed".to_string(), ensemble.seed as f64), ("trial".to_string(), 0.0)]);
    Ok(report)
}

/// Run any check with its own data generation.
pub fn run_check(check: CheckId, params: &CheckParams, ensemble: &EnsembleSpec) -> Result<VerificationReport> {
    match check {
        CheckId::Bernstein | CheckId::RieszBlocks | CheckId::BiotSavartBlocks => check_multiplier_bounds(check, params, ensemble),
        CheckId::KatoPonce | CheckId::HolderCommutator => check_commutators(check, params, ensemble),
        CheckId::VelocityHolder | CheckId::NearHomogeneous | CheckId::NearInhomogeneous | CheckId::Embedding => {
            check_velocity_regularity(check, params, ensemble)
        }
        CheckId::SobolevGronwall | CheckId::HolderBound | CheckId::VelocityHsul => {
            let runs = apriori_runs(check, params, ensemble)?;
            let mut report = check_apriori_bounds(&runs, check, params)?;
            report.parameters.extend([("seed".to_string(), ensemble.seed as f64), ("trial".to_string(), 0.0)]);
            Ok(report)
        }
        CheckId::SobolevBlocks | CheckId::SlobodeckijWindows | CheckId::WindowScale => {
            check_norm_equivalence(check, params, ensemble)
        }
        CheckId::TwinRun => twin_run_check(params, ensemble),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::radial_profile;
    use proptest::prelude::*;

    #[test]
    fn single_modes_give_ratio_one() {
        for check in [CheckId::Bernstein, CheckId::RieszBlocks, CheckId::BiotSavartBlocks] {
            for p in [2.0, f64::INFINITY] {
                for beta in [0.25, 0.5, 0.75] {
                    let params = CheckParams {
                        p,
                        beta,
                        s: 0.7,
                        ..CheckParams::default()
                    };
                    for j in 0..=4 {
                        let r = single_mode_ratio(check, 128, j, &params).unwrap();
                        assert!((r - 1.0).abs() < 1e-10, "{check} p={p} j={j}: {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn too_few_blocks_is_refused() {
        let params = CheckParams {
            grids: vec![16],
            ..CheckParams::default()
        };
        let ens = EnsembleSpec::new(2, 0, FieldClass::BandLimited).with_band(4.0);
        assert!(check_multiplier_bounds(CheckId::Bernstein, &params, &ens).is_err());
        assert!(check_multiplier_bounds(CheckId::KatoPonce, &CheckParams::default(), &ens).is_err());
    }

    #[test]
    fn small_ensembles_only_warn() {
        let params = CheckParams {
            grids: vec![128, 256],
            ..CheckParams::default()
        };
        let ens = EnsembleSpec::new(3, 1, FieldClass::BandLimited).with_band(8.0);
        let report = check_multiplier_bounds(CheckId::BiotSavartBlocks, &params, &ens).unwrap();
        assert_eq!(report.verdict, Verdict::Warning);
        assert!(report.max_ratio() <= BLOCK_SPREAD * report.min_ratio());
    }

    #[test]
    fn kato_ponce_vanishes_for_constant_factor() {
        let g = Grid2D::periodic(64).unwrap();
        let f = SpectralField::constant(g, 3.0);
        let h = EnsembleSpec::new(1, 2, FieldClass::BandLimited).with_band(8.0).sample(g, 0).unwrap();
        let r = kato_ponce_ratio(&f, &h, 2.5, 2.0).unwrap().unwrap();
        assert!(r < 1e-12, "{r}");
    }

    #[test]
    fn holder_commutator_vanishes_without_velocity() {
        let g = Grid2D::periodic(64).unwrap();
        let fam = DyadicFamily::build_partition(g).unwrap();
        let theta = EnsembleSpec::new(1, 2, FieldClass::BandLimited).with_band(8.0).sample(g, 0).unwrap();
        let u = SpectralField::zeros(g, 2);
        for j in fam.tested_range(BlockMode::Inhomogeneous) {
            assert_eq!(holder_commutator(&u, &theta, &fam, j).unwrap().linf(), 0.0);
        }
        let rows = holder_commutator_ratios(&u, &theta, &fam, 1.5, 64).unwrap();
        assert!(rows.iter().all(|(_, r)| r.is_none_or(|v| v == 0.0)));
    }

    #[test]
    fn velocity_holder_single_mode_closed_form() {
        let g = Grid2D::periodic(128).unwrap();
        let params = CheckParams::for_check(CheckId::VelocityHolder);
        for j in 1..=4 {
            let k = 2f64.powi(j);
            let f = SpectralField::from_fn(g, |x, _| (k * x).cos());
            let r = velocity_ratio(CheckId::VelocityHolder, &f, &params).unwrap().unwrap();
            let top = k.powf(params.r);
            let expected = top / (k.powf(params.beta - 1.0) + top);
            assert!((r - expected).abs() < 1e-10 * expected, "j={j}: {r} vs {expected}");
        }
    }

    #[test]
    fn near_field_of_zero_is_skipped() {
        let g = Grid2D::new(128, 16.0).unwrap();
        let params = CheckParams::for_check(CheckId::NearInhomogeneous);
        let zero = SpectralField::zeros(g, 1);
        assert_eq!(velocity_ratio(CheckId::NearInhomogeneous, &zero, &params).unwrap(), None);
        assert_eq!(velocity_ratio(CheckId::NearHomogeneous, &zero, &params).unwrap(), None);
    }

    #[test]
    fn block_bracket_contains_the_plateau() {
        let (lo, hi) = sobolev_block_bracket(1.5);
        assert!(lo > 0.0 && lo < 1.0 && hi > 1.0 && hi < 2.0, "{lo} {hi}");
        let (lo0, hi0) = sobolev_block_bracket(0.0);
        assert!(lo0 >= 1.0 / 2f64.sqrt() - 1e-12 && hi0 <= 1.0 + 1e-12, "{lo0} {hi0}");
    }

    #[test]
    fn check_names_round_trip() {
        for c in CheckId::ALL {
            assert_eq!(c.name().parse::<CheckId>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
        assert!("nonsense".parse::<CheckId>().is_err());
    }

    #[test]
    fn params_json_is_strict() {
        let p: CheckParams = serde_json::from_str(r#"{"beta":0.25,"p":"inf"}"#).unwrap();
        assert_eq!(p.beta, 0.25);
        assert!(p.p.is_infinite());
        assert_eq!(p.grids, vec![128, 256]);
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains(r#""p":"inf""#));
        assert_eq!(serde_json::from_str::<CheckParams>(&text).unwrap(), p);
        assert!(serde_json::from_str::<CheckParams>(r#"{"gamma":1}"#).is_err());
        assert!(serde_json::from_str::<CheckParams>(r#"{"p":"huge"}"#).is_err());
    }

    #[test]
    fn verdict_logic() {
        let mut r = VerificationReport::new("x");
        assert_eq!(r.conclude(1.0, 0.0), Verdict::Warning);
        for t in 0..16 {
            r.push("n=1", t, 0.5);
        }
        assert_eq!(r.clone().conclude(1.0, 0.1), Verdict::Pass);
        assert_eq!(r.clone().conclude(1.0, 0.6), Verdict::Fail);
        assert_eq!(r.clone().conclude(0.4, 0.0), Verdict::Fail);
        assert_eq!(r.clone().conclude_bracket(0.6, 1.0, 0.0), Verdict::Fail);
        // One wild trial trips the guard even under a generous ceiling.
        r.push("n=1", 16, 6.0);
        assert!(r.has_outlier());
        assert_eq!(r.conclude(100.0, 0.0), Verdict::Fail);
    }

    #[test]
    fn outlier_guard_pools_subcases() {
        let mut r = VerificationReport::new("x");
        for t in 0..8 {
            r.push("j=0", t, 0.01);
            r.push("j=5", t, 1.0);
        }
        assert!(!r.has_outlier());
        assert_eq!(r.trial_maxima(), vec![1.0; 8]);
    }

    #[test]
    fn csv_rows_carry_the_hash() {
        let mut r = VerificationReport::new("bernstein").param("beta", 0.5);
        r.push("n=64,j=1", 0, 1.25);
        r.conclude(2.0, 0.0);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "check_id,param_hash,label,trial,ratio");
        assert!(lines[1].starts_with(&format!("bernstein,{},n=64,j=1,0,", r.param_hash())));
        assert!(lines[2].starts_with("# bernstein pass"));
        assert_ne!(r.param_hash(), VerificationReport::new("b").param("beta", 0.25).param_hash());
    }

    #[test]
    fn gronwall_envelope_is_exact_for_equality() {
        let (alpha, b) = (2.0, 0.01);
        let weights = vec![b; 200];
        let env = gronwall_envelope(alpha, &weights);
        // u_k = α + Σ_{i<k} β u_i solved forward.
        let mut u = vec![alpha];
        for k in 1..=200 {
            let s: f64 = u[..k].iter().map(|v| b * v).sum();
            u.push(alpha + s);
        }
        for (e, v) in env.iter().zip(&u) {
            assert!(e >= &(v * (1.0 - 1e-12)));
            assert!((e / v - 1.0).abs() < 0.05);
        }
        let cont = gronwall_exponential(alpha, &weights);
        assert!(cont.iter().zip(&env).all(|(c, e)| c >= e));
        assert!((cont[200] / env[200] - 1.0).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn gronwall_envelope_dominates(
            alpha in 0.0f64..10.0,
            weights in prop::collection::vec(0.0f64..0.5, 1..60),
            slack in prop::collection::vec(0.0f64..1.0, 60),
        ) {
            // Any sequence obeying the inequality sits under the envelope.
            let mut u = Vec::new();
            for k in 0..=weights.len() {
                let s: f64 = (0..k).map(|i| weights[i] * u[i]).sum();
                u.push((alpha + s) * slack[k % slack.len()]);
            }
            let env = gronwall_envelope(alpha, &weights);
            for (v, e) in u.iter().zip(&env) {
                prop_assert!(*v <= e * (1.0 + 1e-12) + 1e-300);
            }
        }

        #[test]
        fn fit_line_recovers_lines(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.3, a + b * i as f64 * 0.3)).collect();
            let (fa, fb) = fit_line(&pts);
            prop_assert!((fa - a).abs() < 1e-10 && (fb - b).abs() < 1e-10);
        }

        #[test]
        fn drift_is_symmetric_and_bounded(a in -1e3f64..1e3, b in -1e3f64..1e3) {
            let d = relative_drift(a, b);
            prop_assert_eq!(d, relative_drift(b, a));
            prop_assert!((0.0..=2.0).contains(&d));
            prop_assert_eq!(max_drift(&[a, b]), d);
        }
    }

    fn short_run(theta: SpectralField, norms: Vec<String>) -> Trajectory {
        let g = *theta.grid();
        let u = biot_savart_velocity(&theta, 0.5).unwrap();
        let mut cfg = SolverConfig::new(0.5, g.n(), g.length(), 0.01, 0.1);
        cfg.record_norms = norms;
        cfg.sample_every = 2;
        simulate(&cfg, &theta, &u).unwrap()
    }

    #[test]
    fn stationary_run_needs_no_growth() {
        let g = Grid2D::periodic(64).unwrap();
        let params = CheckParams::for_check(CheckId::SobolevGronwall);
        let mut norms = apriori_norms(CheckId::SobolevGronwall, &params);
        norms.extend(apriori_norms(CheckId::HolderBound, &params));
        let run = short_run(radial_profile(g, 1.0, 0.6), norms);
        let report = check_apriori_bounds(std::slice::from_ref(&run), CheckId::SobolevGronwall, &params).unwrap();
        let k = report.parameters.iter().find(|(n, _)| n.starts_with("K[")).unwrap().1;
        assert!(k < 1e-6, "K = {k}");
        assert!(report.passed());
        let holder = check_apriori_bounds(&[run], CheckId::HolderBound, &params).unwrap();
        let c = holder.parameters.iter().find(|(n, _)| n.starts_with("C[")).unwrap().1;
        assert!((c - 1.0).abs() < 1e-6, "C = {c}");
    }

    #[test]
    fn zero_data_passes_vacuously() {
        let g = Grid2D::periodic(32).unwrap();
        let params = CheckParams::for_check(CheckId::SobolevGronwall);
        let run = short_run(SpectralField::zeros(g, 1), apriori_norms(CheckId::SobolevGronwall, &params));
        let report = check_apriori_bounds(&[run], CheckId::SobolevGronwall, &params).unwrap();
        assert!(report.passed());
        assert_eq!(report.max_ratio(), 0.0);
    }

    #[test]
    fn missing_series_is_a_config_error() {
        let g = Grid2D::periodic(32).unwrap();
        let run = short_run(radial_profile(g, 1.0, 0.6), Vec::new());
        let params = CheckParams::for_check(CheckId::VelocityHsul);
        assert!(matches!(
            check_apriori_bounds(&[run], CheckId::VelocityHsul, &params),
            Err(Error::Config(_))
        ));
        assert!(check_apriori_bounds(&[], CheckId::HolderBound, &params).is_err());
    }

    #[test]
    fn twin_run_on_a_small_grid() {
        let g = Grid2D::periodic(64).unwrap();
        let ens = EnsembleSpec::new(2, 4, FieldClass::CompactBump);
        let theta = ens.sample(g, 0).unwrap();
        let dir = ens.sample(g, 1).unwrap();
        let mut cfg = SolverConfig::new(0.5, 64, g.length(), 0.01, 0.2);
        cfg.sample_every = 4;
        let report = twin_run(&cfg, &theta, &dir, &[1e-3, 1e-4, 1e-5]).unwrap();
        assert!(report.passed(), "{}", report.summary());
        assert!(report.max_ratio() <= 1.0 + 1e-9);
        assert!(twin_run(&cfg, &theta, &dir, &[1e-3]).is_err());
    }

    #[test]
    fn checks_are_deterministic() {
        let params = CheckParams {
            grids: vec![64, 128],
            ..CheckParams::for_check(CheckId::KatoPonce)
        };
        let ens = EnsembleSpec::new(4, 8, FieldClass::BandLimited).with_band(8.0);
        let a = run_check(CheckId::KatoPonce, &params, &ens).unwrap();
        let b = run_check(CheckId::KatoPonce, &params, &ens).unwrap();
        assert_eq!(a.ratios(), b.ratios());
    }
}
