//! The experiment document: one JSON object, flags layered on top.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sqglab::solver::Constitutive;
use sqglab::verify::{CheckId, CheckParams};
use sqglab::{EnsembleSpec, FieldClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Verify,
    Simulate,
    Iterate,
    Norms,
    Kernels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub command: Option<CommandKind>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub checks: Vec<CheckDescriptor>,
    /// Norm descriptors for the `norms` command.
    #[serde(default)]
    pub norms: Vec<String>,
    /// Field file read by `norms` instead of generating initial data.
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Picard iterations for `iterate`.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_seed() -> u64 {
    7
}

fn default_n_max() -> usize {
    12
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

/// Solver settings. Unset lengths and steps are filled per command when the
/// config is resolved, so the manifest always carries concrete values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub beta: f64,
    pub n_side: usize,
    pub length: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    /// Fraction of the existence-time estimate used when `t_end` is unset
    /// for `iterate`.
    pub time_fraction: f64,
    pub r: f64,
    pub constitutive: Constitutive,
    pub record_norms: Vec<String>,
    pub sample_every: usize,
    pub checkpoint_every: Option<usize>,
    pub track_serfati: bool,
    pub stop_at_existence_time: bool,
    pub c_existence: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            beta: 0.5,
            n_side: 256,
            length: None,
            dt: None,
            t_end: None,
            time_fraction: 0.5,
            r: 1.5,
            constitutive: Constitutive::Direct,
            record_norms: Vec::new(),
            sample_every: 10,
            checkpoint_every: None,
            track_serfati: false,
            stop_at_existence_time: false,
            c_existence: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialData {
    pub class: FieldClass,
    pub trial: usize,
    /// Amplitude of the radial profile.
    pub amplitude: f64,
    /// Width of the radial profile; `length / 8π` when unset.
    pub sigma: Option<f64>,
    /// Band limit of band-limited draws.
    pub band: f64,
}

impl Default for InitialData {
    fn default() -> Self {
        Self {
            class: FieldClass::CompactBump,
            trial: 0,
            amplitude: 1.0,
            sigma: None,
            band: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckDescriptor {
    pub check: CheckId,
    #[serde(default)]
    pub params: Option<CheckParams>,
    #[serde(default)]
    pub ensemble: Option<EnsembleSpec>,
}

impl CheckDescriptor {
    pub fn new(check: CheckId) -> Self {
        Self {
            check,
            params: None,
            ensemble: None,
        }
    }
}

/// Flag values that override the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub checks: Vec<CheckId>,
    pub beta: Option<f64>,
    pub n: Option<usize>,
    pub length: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub p: Option<f64>,
    pub s: Option<f64>,
    pub r: Option<f64>,
    pub count: Option<usize>,
    pub ic: Option<FieldClass>,
    pub norms: Vec<String>,
    pub record: Vec<String>,
    pub input: Option<PathBuf>,
    pub n_max: Option<usize>,
    pub serfati: bool,
}

/// Default box for `command` and the initial data.
fn default_length(command: CommandKind, class: FieldClass) -> f64 {
    match (command, class) {
        (CommandKind::Iterate, _) => 16.0,
        (CommandKind::Kernels, _) | (_, FieldClass::Radial) => 16.0 * PI,
        _ => 2.0 * PI,
    }
}

impl ExperimentConfig {
    /// Apply flags, then fill every unset value so the result is fully
    /// explicit.
    pub fn resolve(mut self, command: CommandKind, o: &Overrides, env_out: Option<PathBuf>) -> Self {
        self.command = Some(command);
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        self.output_dir = o
            .out
            .clone()
            .or(self.output_dir)
            .or(env_out)
            .or_else(|| Some(PathBuf::from("sqglab-out")));
        let sv = &mut self.solver;
        if let Some(v) = o.beta {
            sv.beta = v;
        }
        if let Some(v) = o.n {
            sv.n_side = v;
        }
        if o.length.is_some() {
            sv.length = o.length;
        }
        if o.dt.is_some() {
            sv.dt = o.dt;
        }
        if o.t_end.is_some() {
            sv.t_end = o.t_end;
        }
        if let Some(v) = o.r {
            sv.r = v;
        }
        if !o.record.is_empty() {
            sv.record_norms = o.record.clone();
        }
        if o.serfati {
            sv.track_serfati = true;
        }
        if let Some(c) = o.ic {
            self.initial.class = c;
        }
        if !o.norms.is_empty() {
            self.norms = o.norms.clone();
        }
        if o.input.is_some() {
            self.input = o.input.clone();
        }
        if let Some(v) = o.n_max {
            self.n_max = v;
        }
        let sv = &mut self.solver;
        if sv.length.is_none() {
            sv.length = Some(default_length(command, self.initial.class));
        }
        if command == CommandKind::Simulate {
            sv.dt.get_or_insert(1e-3);
            sv.t_end.get_or_insert(1.0);
        }
        if self.initial.class == FieldClass::Radial && self.initial.sigma.is_none() {
            self.initial.sigma = Some(sv.length.expect("filled") / (8.0 * PI));
        }

        if command == CommandKind::Verify {
            if !o.checks.is_empty() {
                self.checks = o.checks.iter().copied().map(CheckDescriptor::new).collect();
            }
            let seed = self.seed;
            for d in &mut self.checks {
                let mut params = d.params.take().unwrap_or_else(|| CheckParams::for_check(d.check));
                if let Some(v) = o.beta {
                    params.beta = v;
                }
                if let Some(v) = o.p {
                    params.p = v;
                }
                if let Some(v) = o.s {
                    params.s = v;
                }
                if let Some(v) = o.r {
                    params.r = v;
                }
                if let Some(v) = o.length {
                    params.length = v;
                }
                if let Some(n) = o.n {
                    params.grids = if d.check == CheckId::TwinRun { vec![n] } else { vec![n / 2, n] };
                }
                let mut ens = d.ensemble.take().unwrap_or_else(|| d.check.default_ensemble(seed));
                if o.seed.is_some() {
                    ens.seed = seed;
                }
                if let Some(c) = o.count {
                    ens.count = c;
                }
                d.params = Some(params);
                d.ensemble = Some(ens);
            }
        }
        self
    }
}
