//! Transport time stepping, both constitutive laws, the flow map and the
//! Picard approximating sequence.
//!
//! `θ` is advanced by classical RK4 on `∂ₜθ = −dealias(u·∇θ)`. The velocity
//! is either recomputed from `θ` through the multiplier law, rebuilt from
//! the near/far identity
//!
//! ```text
//! u(t) = u⁰ + ∇⊥(aΦ) ∗ (θ(t) − θ⁰) − ∫₀ᵗ ∇∇⊥((1−a)Φ) ∗· (θu) dτ,
//! ```
//!
//! or prescribed. The time integral is accumulated by the trapezoid rule at
//! step boundaries.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicFamily;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid2D;
use crate::kernels::{CutoffA, KernelSplit};
use crate::multipliers::biot_savart_velocity;
use crate::norms::{zygmund_norm, NormKind};
use crate::verify::Verdict;

/// Courant number used for the time-step check.
pub const CFL: f64 = 0.5;
/// A run aborts once `‖θ‖_∞` exceeds this multiple of `‖θ⁰‖_∞`.
pub const BLOWUP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constitutive {
    #[default]
    Direct,
    Serfati,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub beta: f64,
    /// Zygmund regularity used for `‖θ⁰‖_{C^r}` and the Picard decrements.
    #[serde(default = "default_r")]
    pub r: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub constitutive: Constitutive,
    pub n_side: usize,
    #[serde(default = "default_length")]
    pub length: f64,
    /// Norm descriptors recorded at each sample; a `u:` prefix selects the
    /// velocity.
    #[serde(default)]
    pub record_norms: Vec<String>,
    /// Constant of the existence-time formula.
    #[serde(default = "default_c")]
    pub c_existence: f64,
    /// Steps between norm samples.
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    /// Steps between stored snapshots; `None` keeps only the endpoints.
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
    /// Stop at the existence-time estimate when it comes before `t_end`.
    #[serde(default)]
    pub stop_at_existence_time: bool,
    /// Accumulate the far-field integral alongside a direct-law run and
    /// record the identity mismatch.
    #[serde(default)]
    pub track_serfati: bool,
}

fn default_r() -> f64 {
    1.5
}

fn default_length() -> f64 {
    crate::grid::DEFAULT_LENGTH
}

fn default_c() -> f64 {
    1.0
}

fn default_sample_every() -> usize {
    10
}

impl SolverConfig {
    pub fn new(beta: f64, n_side: usize, length: f64, dt: f64, t_end: f64) -> Self {
        Self {
            beta,
            r: default_r(),
            dt,
            t_end,
            constitutive: Constitutive::Direct,
            n_side,
            length,
            record_norms: Vec::new(),
            c_existence: default_c(),
            sample_every: default_sample_every(),
            checkpoint_every: None,
            stop_at_existence_time: false,
            track_serfati: false,
        }
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.n_side, self.length)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Domain(format!("β = {} is outside (0, 1)", self.beta)));
        }
        if !(self.dt > 0.0 && self.t_end >= 0.0) {
            return Err(Error::Config("dt must be positive and t_end nonnegative".into()));
        }
        if self.sample_every == 0 || self.checkpoint_every == Some(0) {
            return Err(Error::Config("sampling cadences must be positive".into()));
        }
        if self.r <= 0.0 || self.c_existence <= 0.0 {
            return Err(Error::Config("r and c_existence must be positive".into()));
        }
        self.grid()?;
        self.norm_targets()?;
        Ok(())
    }

    fn norm_targets(&self) -> Result<Vec<(String, bool, NormKind)>> {
        self.record_norms
            .iter()
            .map(|d| {
                let (on_u, body) = match d.strip_prefix("u:") {
                    Some(rest) => (true, rest),
                    None => (false, d.as_str()),
                };
                Ok((d.clone(), on_u, body.parse::<NormKind>()?))
            })
            .collect()
    }
}

/// Existence time `ln 2 / (c M)` with `M = 2c(‖θ⁰‖_{C^r} + ‖u⁰‖_∞)`;
/// infinite for zero data.
pub fn existence_time(u0_linf: f64, theta0_cr: f64, c: f64) -> f64 {
    let m = 2.0 * c * (theta0_cr + u0_linf);
    if m == 0.0 {
        f64::INFINITY
    } else {
        std::f64::consts::LN_2 / (c * m)
    }
}

/// Right side `C A / (1 − C t A)` of the Hölder bound, infinite once the
/// denominator vanishes.
pub fn holder_bound(c: f64, a: f64, t: f64) -> f64 {
    let d = 1.0 - c * t * a;
    if d <= 0.0 {
        f64::INFINITY
    } else {
        c * a / d
    }
}

/// `Σ_{|α|≤1} ‖D^α f‖_∞`, with vector fields measured by magnitude.
pub fn c_tilde_1(f: &SpectralField) -> f64 {
    let d1 = f.derivative(1, 0).linf();
    let d2 = f.derivative(0, 1).linf();
    f.linf() + d1 + d2
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub theta: SpectralField,
    pub u: SpectralField,
    /// `∫₀ᵗ ∇∇⊥((1−a)Φ) ∗· (θu) dτ`, when tracked.
    pub far_accumulator: Option<SpectralField>,
    /// Time through which the accumulator is current.
    pub accumulator_time: f64,
    far_integrand: Option<SpectralField>,
}

impl SimState {
    pub fn new(theta: SpectralField, u: SpectralField) -> Self {
        Self {
            t: 0.0,
            theta,
            u,
            far_accumulator: None,
            accumulator_time: 0.0,
            far_integrand: None,
        }
    }

    /// Start accumulating the far-field integral from the current time.
    pub fn with_accumulator(mut self) -> Self {
        let g = *self.theta.grid();
        self.far_accumulator = Some(SpectralField::zeros(g, 2));
        self.accumulator_time = self.t;
        self
    }
}

/// Where the transport velocity comes from during a step.
#[derive(Debug, Clone, Copy)]
pub enum VelocityLaw<'a> {
    /// Prescribed and constant over the step.
    Frozen(&'a SpectralField),
    /// Prescribed at both ends of the step, linear in between.
    Interpolated {
        start: &'a SpectralField,
        end: &'a SpectralField,
    },
    /// `u = ∇⊥(−Δ)^{−1+β/2}θ` at every stage.
    Direct { beta: f64 },
    /// `u = u⁰ + near ∗ (θ − θ⁰) − accumulator` at every stage.
    Serfati {
        split: &'a KernelSplit,
        theta0: &'a SpectralField,
        u0: &'a SpectralField,
    },
}

fn advection(theta: &SpectralField, u: &SpectralField) -> SpectralField {
    u.dot(&theta.gradient()).dealias().scale(-1.0)
}

/// `u⁰ + ∇⊥(aΦ) ∗ (θ(t) − θ⁰) − ∫₀ᵗ ∇∇⊥((1−a)Φ) ∗· (θu)`.
pub fn velocity_serfati(
    state: &SimState,
    u0: &SpectralField,
    theta0: &SpectralField,
    split: &KernelSplit,
) -> Result<SpectralField> {
    let acc = state
        .far_accumulator
        .as_ref()
        .ok_or_else(|| Error::State("far-field accumulator is not tracked".into()))?;
    if (state.accumulator_time - state.t).abs() > 1e-12 * state.t.abs().max(1.0) {
        return Err(Error::State(format!(
            "accumulator is current through t = {}, state is at t = {}",
            state.accumulator_time, state.t
        )));
    }
    let near = split.convolve_near(&state.theta.sub(theta0))?;
    Ok(u0.add(&near).sub(acc))
}

fn far_integrand(split: &KernelSplit, theta: &SpectralField, u: &SpectralField) -> Result<SpectralField> {
    Ok(split.convolve_far(theta, u)?.dealias())
}

/// One RK4 step of transport. When `split` is given and the state tracks
/// the accumulator, the far-field integral is advanced by the trapezoid rule.
pub fn step_transport(
    state: &SimState,
    law: VelocityLaw<'_>,
    dt: f64,
    split: Option<&KernelSplit>,
) -> Result<SimState> {
    let split = match law {
        VelocityLaw::Serfati { split, .. } => Some(split),
        _ => split,
    };
    let tracking = state.far_accumulator.is_some() && split.is_some();
    if matches!(law, VelocityLaw::Serfati { .. }) && state.far_accumulator.is_none() {
        return Err(Error::State("Serfati law needs a tracked accumulator".into()));
    }
    let integrand_now = match (&state.far_integrand, tracking) {
        (Some(i), true) => Some(i.clone()),
        (None, true) => Some(far_integrand(split.unwrap(), &state.theta, &state.u)?),
        _ => None,
    };

    let velocity = |theta: &SpectralField, c: f64, acc: Option<&SpectralField>| -> Result<SpectralField> {
        Ok(match law {
            VelocityLaw::Frozen(u) => u.clone(),
            VelocityLaw::Interpolated { start, end } => start.scale(1.0 - c).add(&end.scale(c)),
            VelocityLaw::Direct { beta } => biot_savart_velocity(theta, beta)?,
            VelocityLaw::Serfati { split, theta0, u0 } => {
                let acc = acc.expect("tracked");
                u0.add(&split.convolve_near(&theta.sub(theta0))?).sub(acc)
            }
        })
    };
    // Accumulator predicted at stage time t + c·dt from the integrand at t.
    let predicted = |c: f64| -> Option<SpectralField> {
        let acc = state.far_accumulator.as_ref()?;
        Some(match &integrand_now {
            Some(i) => acc.axpy(c * dt, i),
            None => acc.clone(),
        })
    };

    let theta0 = &state.theta;
    let k1 = advection(theta0, &state.u);
    let t2 = theta0.axpy(0.5 * dt, &k1);
    let k2 = advection(&t2, &velocity(&t2, 0.5, predicted(0.5).as_ref())?);
    let t3 = theta0.axpy(0.5 * dt, &k2);
    let k3 = advection(&t3, &velocity(&t3, 0.5, predicted(0.5).as_ref())?);
    let t4 = theta0.axpy(dt, &k3);
    let k4 = advection(&t4, &velocity(&t4, 1.0, predicted(1.0).as_ref())?);
    let incr = k1.add(&k2.scale(2.0)).add(&k3.scale(2.0)).add(&k4);
    let theta = theta0.axpy(dt / 6.0, &incr);
    if !theta.values(0).iter().all(|v| v.is_finite()) {
        return Err(Error::Blowup {
            t: state.t + dt,
            reason: "non-finite θ".into(),
        });
    }

    let mut u = velocity(&theta, 1.0, predicted(1.0).as_ref())?;
    let mut next = SimState {
        t: state.t + dt,
        theta,
        u: u.clone(),
        far_accumulator: None,
        accumulator_time: state.accumulator_time,
        far_integrand: None,
    };
    if let (true, Some(now)) = (tracking, integrand_now) {
        let split = split.unwrap();
        let acc = state.far_accumulator.as_ref().unwrap();
        let mut later = far_integrand(split, &next.theta, &u)?;
        let mut acc_new = acc.axpy(0.5 * dt, &now.add(&later));
        if matches!(law, VelocityLaw::Serfati { .. }) {
            // One correction pass with the trapezoid accumulator.
            next.far_accumulator = Some(acc_new.clone());
            u = velocity(&next.theta, 1.0, Some(&acc_new))?;
            later = far_integrand(split, &next.theta, &u)?;
            acc_new = acc.axpy(0.5 * dt, &now.add(&later));
            u = velocity(&next.theta, 1.0, Some(&acc_new))?;
        }
        next.u = u;
        next.far_accumulator = Some(acc_new);
        next.far_integrand = Some(later);
        next.accumulator_time = next.t;
    }
    Ok(next)
}

/// Norm values recorded at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSample {
    pub t: f64,
    pub values: Vec<(String, f64)>,
}

impl NormSample {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: SolverConfig,
    /// Time step actually used after the CFL check.
    pub dt: f64,
    pub existence_time: f64,
    pub samples: Vec<NormSample>,
    /// `(t, θ, u)` at the checkpoint cadence and both endpoints.
    pub snapshots: Vec<(f64, SpectralField, SpectralField)>,
    pub final_state: SimState,
    pub notes: Vec<String>,
}

impl Trajectory {
    /// `(t, value)` pairs of one recorded quantity.
    pub fn series(&self, name: &str) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .filter_map(|s| s.get(name).map(|v| (s.t, v)))
            .collect()
    }

    /// Rows `t,kind,value` with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,kind,value")?;
        for s in &self.samples {
            for (k, v) in &s.values {
                writeln!(w, "{:.12e},{},{:.12e}", s.t, k, v)?;
            }
        }
        Ok(())
    }
}

/// Largest admissible step for velocity magnitude `umax` on `grid`.
pub fn cfl_limit(grid: &Grid2D, umax: f64) -> f64 {
    if umax == 0.0 {
        f64::INFINITY
    } else {
        CFL * grid.spacing() / umax
    }
}

/// Step count and step size covering `[0, t_end]` within the CFL limit.
fn plan_steps(dt: f64, t_end: f64, limit: f64) -> (usize, f64) {
    let dt = dt.min(limit);
    if t_end == 0.0 {
        return (0, dt);
    }
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    (steps, t_end / steps as f64)
}

fn record(
    config: &SolverConfig,
    targets: &[(String, bool, NormKind)],
    state: &SimState,
    serfati: Option<&SpectralField>,
) -> Result<NormSample> {
    let (theta, u) = (&state.theta, &state.u);
    let mut values = vec![
        ("theta_linf".to_string(), theta.linf()),
        ("theta_l2".to_string(), theta.l2()),
        ("theta_mean".to_string(), theta.mean(0)),
        ("theta_w1inf".to_string(), c_tilde_1(theta)),
        ("u_linf".to_string(), u.linf()),
        ("u_c1".to_string(), c_tilde_1(u)),
        ("u_divergence".to_string(), u.divergence().linf()),
    ];
    if let Some(us) = serfati {
        let scale = u.linf().max(f64::MIN_POSITIVE);
        values.push(("serfati_mismatch".to_string(), us.sub(u).linf() / scale));
    }
    for (name, on_u, kind) in targets {
        let f = if *on_u { u } else { theta };
        values.push((name.clone(), kind.evaluate(f)?.value));
    }
    let _ = config;
    Ok(NormSample { t: state.t, values })
}

/// Advance `(θ⁰, u⁰)` to `t_end` (or the existence-time estimate when
/// requested), recording norms along the way.
pub fn simulate(config: &SolverConfig, theta0: &SpectralField, u0: &SpectralField) -> Result<Trajectory> {
    config.validate()?;
    let grid = config.grid()?;
    if *theta0.grid() != grid || *u0.grid() != grid || !theta0.is_scalar() || u0.components() != 2 {
        return Err(Error::Shape("initial data does not match the configured grid".into()));
    }
    let mut notes = Vec::new();
    let direct0 = biot_savart_velocity(theta0, config.beta)?;
    let scale = direct0.linf().max(u0.linf());
    if scale > 0.0 && config.constitutive == Constitutive::Direct {
        let mismatch = direct0.sub(u0).linf() / scale;
        if mismatch > 1e-6 {
            return Err(Error::Config(format!(
                "u⁰ differs from the constitutive law by {mismatch:.3e} (relative)"
            )));
        }
    }
    let family = DyadicFamily::build_partition(grid)?;
    let theta_cr = zygmund_norm(theta0, config.r, &family, false)?.value;
    let t_exist = existence_time(u0.linf(), theta_cr, config.c_existence);
    let mut t_end = config.t_end;
    if config.stop_at_existence_time && t_exist < t_end {
        notes.push(format!("stopped at existence-time estimate {t_exist:.6e}"));
        t_end = t_exist;
    } else if t_exist < t_end {
        notes.push(format!("t_end exceeds existence-time estimate {t_exist:.6e}"));
    }
    let (steps, dt) = plan_steps(config.dt, t_end, cfl_limit(&grid, u0.linf()));
    if dt < config.dt * (1.0 - 1e-12) && config.dt > cfl_limit(&grid, u0.linf()) {
        notes.push(format!("dt reduced to {dt:.6e} by the CFL check"));
    }

    let split = match (config.constitutive, config.track_serfati) {
        (Constitutive::Serfati, _) | (_, true) => Some(KernelSplit::build_split(grid, config.beta, CutoffA::default())?),
        _ => None,
    };
    let targets = config.norm_targets()?;
    let mut state = SimState::new(theta0.clone(), u0.clone());
    if split.is_some() {
        state = state.with_accumulator();
    }
    let theta_max = theta0.linf();
    let serfati_now = |s: &SimState| -> Result<Option<SpectralField>> {
        match (&split, config.track_serfati) {
            (Some(sp), true) => Ok(Some(velocity_serfati(s, u0, theta0, sp)?)),
            _ => Ok(None),
        }
    };
    let mut samples = vec![record(config, &targets, &state, serfati_now(&state)?.as_ref())?];
    let mut snapshots = vec![(0.0, theta0.clone(), u0.clone())];

    for k in 1..=steps {
        let law = match config.constitutive {
            Constitutive::Direct => VelocityLaw::Direct { beta: config.beta },
            Constitutive::Serfati => VelocityLaw::Serfati {
                split: split.as_ref().unwrap(),
                theta0,
                u0,
            },
        };
        state = step_transport(&state, law, dt, split.as_ref())?;
        if k == steps {
            state.t = t_end;
            state.accumulator_time = if state.far_accumulator.is_some() { t_end } else { 0.0 };
        }
        let m = state.theta.linf();
        if m > BLOWUP_FACTOR * theta_max {
            return Err(Error::Blowup {
                t: state.t,
                reason: format!("‖θ‖_∞ = {m:.3e} exceeds {BLOWUP_FACTOR}·‖θ⁰‖_∞"),
            });
        }
        if k % config.sample_every == 0 || k == steps {
            samples.push(record(config, &targets, &state, serfati_now(&state)?.as_ref())?);
        }
        if config.checkpoint_every.is_some_and(|c| k % c == 0) || k == steps {
            snapshots.push((state.t, state.theta.clone(), state.u.clone()));
        }
    }
    Ok(Trajectory {
        config: config.clone(),
        dt,
        existence_time: t_exist,
        samples,
        snapshots,
        final_state: state,
        notes,
    })
}

/// Velocity samples at uniformly spaced times.
#[derive(Debug, Clone)]
pub struct VelocityHistory {
    pub t0: f64,
    pub spacing: f64,
    pub fields: Vec<SpectralField>,
}

impl VelocityHistory {
    pub fn steady(u: SpectralField) -> Self {
        Self {
            t0: 0.0,
            spacing: 1.0,
            fields: vec![u],
        }
    }

    fn at(&self, t: f64, x: f64, y: f64) -> (f64, f64) {
        if self.fields.len() == 1 {
            return bilinear(&self.fields[0], x, y);
        }
        let last = self.fields.len() - 1;
        let s = ((t - self.t0) / self.spacing).clamp(0.0, last as f64);
        if self.fields.len() < 4 {
            let i = (s.floor() as usize).min(last - 1);
            let w = s - i as f64;
            let a = bilinear(&self.fields[i], x, y);
            let b = bilinear(&self.fields[i + 1], x, y);
            return (a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1));
        }
        // Four-point Lagrange stencil around s.
        let i0 = (s.floor() as isize - 1).clamp(0, last as isize - 3) as usize;
        let mut out = (0.0, 0.0);
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (s - (i0 + b) as f64) / (a as f64 - b as f64);
                }
            }
            let v = bilinear(&self.fields[i0 + a], x, y);
            out.0 += w * v.0;
            out.1 += w * v.1;
        }
        out
    }
}

fn bilinear(u: &SpectralField, x: f64, y: f64) -> (f64, f64) {
    let g = u.grid();
    let n = g.n();
    let h = g.spacing();
    let (fx, fy) = ((x / h).rem_euclid(n as f64), (y / h).rem_euclid(n as f64));
    let (i, j) = (fx.floor() as usize % n, fy.floor() as usize % n);
    let (wx, wy) = (fx - fx.floor(), fy - fy.floor());
    let (i1, j1) = ((i + 1) % n, (j + 1) % n);
    let comp = |c: usize| {
        let v = u.values(c);
        (1.0 - wy) * ((1.0 - wx) * v[j * n + i] + wx * v[j * n + i1])
            + wy * ((1.0 - wx) * v[j1 * n + i] + wx * v[j1 * n + i1])
    };
    (comp(0), comp(1))
}

/// Particle paths `X(t_k)` for `t_k = t₀ + k·dt` covering the history.
pub fn flow_map(history: &VelocityHistory, particles: &[(f64, f64)], dt: f64, t_end: f64) -> Result<Vec<Vec<(f64, f64)>>> {
    if history.fields.is_empty() || dt <= 0.0 {
        return Err(Error::Config("flow map needs velocity samples and dt > 0".into()));
    }
    let steps = ((t_end - history.t0) / dt).round().max(0.0) as usize;
    let mut paths: Vec<Vec<(f64, f64)>> = particles.iter().map(|&p| vec![p]).collect();
    for path in paths.iter_mut() {
        let (mut x, mut y) = path[0];
        for k in 0..steps {
            let t = history.t0 + k as f64 * dt;
            let k1 = history.at(t, x, y);
            let k2 = history.at(t + 0.5 * dt, x + 0.5 * dt * k1.0, y + 0.5 * dt * k1.1);
            let k3 = history.at(t + 0.5 * dt, x + 0.5 * dt * k2.0, y + 0.5 * dt * k2.1);
            let k4 = history.at(t + dt, x + dt * k3.0, y + dt * k3.1);
            x += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            y += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::Blowup {
                    t: t + dt,
                    reason: "particle left the finite plane".into(),
                });
            }
            path.push((x, y));
        }
    }
    Ok(paths)
}

/// Signed area of a closed polygon by the shoelace formula.
pub fn polygon_area(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct IterationTrace {
    /// Times at which decrements were sampled.
    pub times: Vec<f64>,
    /// `decrements[k][i] = D_{k+2}(times[i])`.
    pub decrements: Vec<Vec<f64>>,
    /// `(θⁿ(T), uⁿ(T))` for `n = 1, 2, …`.
    pub iterates: Vec<(SpectralField, SpectralField)>,
    /// Existence-time estimate for the data.
    pub time_bound: f64,
    /// `(t, C A / (1 − C t A))` at the sample times.
    pub norm_bound_curve: Vec<(f64, f64)>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl IterationTrace {
    /// `D_n` at the final time, for `n = 2, 3, …`.
    pub fn final_decrements(&self) -> Vec<f64> {
        self.decrements.iter().map(|d| *d.last().unwrap()).collect()
    }

    /// Geometric decay ratio `ρ` from a least-squares fit of `ln D_n(T)`
    /// against `n`, over the leading run of decrements above `floor`.
    pub fn decay_ratio(&self, floor: f64) -> Option<f64> {
        let d: Vec<f64> = self
            .final_decrements()
            .into_iter()
            .take_while(|&v| v > floor)
            .collect();
        if d.len() < 2 {
            return None;
        }
        let m = d.len() as f64;
        let xbar = 0.5 * (m - 1.0);
        let ybar = d.iter().map(|v| v.ln()).sum::<f64>() / m;
        let (num, den) = d.iter().enumerate().fold((0.0, 0.0), |(a, b), (i, v)| {
            let x = i as f64 - xbar;
            (a + x * (v.ln() - ybar), b + x * x)
        });
        Some((num / den).exp())
    }

    /// Partial sums `Σ_{k≤n} D_k(T)`.
    pub fn partial_sums(&self) -> Vec<f64> {
        self.final_decrements()
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,t,decrement")?;
        for (k, d) in self.decrements.iter().enumerate() {
            for (t, v) in self.times.iter().zip(d) {
                writeln!(w, "{},{:.12e},{:.12e}", k + 2, t, v)?;
            }
        }
        Ok(())
    }
}

/// Picard sequence: `θ¹ = S₂θ⁰`, `u¹ = S₂u⁰` frozen in time; `θ^{n+1}`
/// solves transport by `uⁿ` from `S_{n+2}θ⁰`; `u^{n+1}` is rebuilt from the
/// near/far identity with `θ^{n+1}uⁿ` in the far integrand.
pub fn picard_iterate(config: &SolverConfig, theta0: &SpectralField, u0: &SpectralField, n_max: usize) -> Result<IterationTrace> {
    config.validate()?;
    if n_max < 2 {
        return Err(Error::Config("Picard iteration needs n_max ≥ 2".into()));
    }
    let grid = config.grid()?;
    if *theta0.grid() != grid || *u0.grid() != grid {
        return Err(Error::Shape("initial data does not match the configured grid".into()));
    }
    let split = KernelSplit::build_split(grid, config.beta, CutoffA::default())?;
    let family = DyadicFamily::build_partition(grid)?;
    let theta_cr = zygmund_norm(theta0, config.r, &family, false)?.value;
    let a = u0.linf() + theta_cr;
    let time_bound = existence_time(u0.linf(), theta_cr, config.c_existence);
    let (steps, dt) = plan_steps(config.dt, config.t_end, cfl_limit(&grid, 2.0 * u0.linf()));
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let sampled: Vec<usize> = (0..=steps)
        .filter(|&k| k % config.sample_every == 0 || k == steps)
        .collect();

    let s2t = family.smooth_truncate_initial(theta0, 2);
    let s2u = family.smooth_truncate_initial(u0, 2);
    let mut theta_prev: Vec<SpectralField> = vec![s2t.clone(); steps + 1];
    let mut u_prev: Vec<SpectralField> = vec![s2u.clone(); steps + 1];
    let mut iterates = vec![(s2t, s2u)];
    let mut decrements = Vec::new();
    let mut notes = Vec::new();

    for n in 1..n_max {
        let start = family.smooth_truncate_initial(theta0, n as u32 + 2);
        let u_start = family.smooth_truncate_initial(u0, n as u32 + 2);
        let mut theta_traj = Vec::with_capacity(steps + 1);
        let mut u_traj = Vec::with_capacity(steps + 1);
        let mut state = SimState::new(start.clone(), u_prev[0].clone());
        theta_traj.push(start.clone());
        u_traj.push(u_start.clone());
        let mut integrand = far_integrand(&split, &start, &u_prev[0])?;
        let mut acc = SpectralField::zeros(grid, 2);
        for k in 0..steps {
            let law = VelocityLaw::Interpolated {
                start: &u_prev[k],
                end: &u_prev[k + 1],
            };
            state.u = u_prev[k].clone();
            state = step_transport(&state, law, dt, None)?;
            let theta = state.theta.clone();
            let later = far_integrand(&split, &theta, &u_prev[k + 1])?;
            acc = acc.axpy(0.5 * dt, &integrand.add(&later));
            integrand = later;
            let u = u_start.add(&split.convolve_near(&theta.sub(&start))?).sub(&acc);
            theta_traj.push(theta);
            u_traj.push(u);
        }
        let row = sampled
            .iter()
            .map(|&k| -> Result<f64> {
                let v = u_traj[k].sub(&u_prev[k]).linf();
                let eta = theta_traj[k].sub(&theta_prev[k]);
                Ok(v + zygmund_norm(&eta, config.r - 1.0, &family, false)?.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        decrements.push(row);
        iterates.push((theta_traj[steps].clone(), u_traj[steps].clone()));
        theta_prev = theta_traj;
        u_prev = u_traj;
    }

    let finals: Vec<f64> = decrements.iter().map(|d| *d.last().unwrap()).collect();
    let stalled = finals
        .windows(4)
        .any(|w| w[1] >= w[0] && w[2] >= w[1] && w[3] >= w[2] && w[0] > 1e-13);
    let verdict = if stalled {
        notes.push("decrements did not decrease over three consecutive iterations".into());
        Verdict::Warning
    } else {
        Verdict::Pass
    };
    let norm_bound_curve = sampled
        .iter()
        .map(|&k| (times[k], holder_bound(config.c_existence, a, times[k])))
        .collect();
    Ok(IterationTrace {
        times: sampled.iter().map(|&k| times[k]).collect(),
        decrements,
        iterates,
        time_bound,
        norm_bound_curve,
        verdict,
        notes,
    })
}
