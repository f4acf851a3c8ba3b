//! `sqglab`: batch front end for the verification suites, solver runs,
//! Picard iterations, norm evaluation and kernel export.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sqglab::verify::CheckId;
use sqglab::FieldClass;

use crate::config::{CommandKind, ExperimentConfig, Overrides};

#[derive(Parser, Debug)]
#[command(name = "sqglab", version, about = "Pseudo-spectral gSQG laboratory")]
struct Cli {
    /// JSON experiment document (or a manifest from an earlier run).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; falls back to the document, then $OUTPUT_DIR.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run estimate checks and write one report CSV per check.
    Verify {
        /// Check name; repeat for several.
        #[arg(long = "check", value_parser = parse_check)]
        checks: Vec<CheckId>,
        /// Finest grid; the comparison grid is half of it.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        /// Lebesgue exponent, a number or `inf`.
        #[arg(long, value_parser = parse_exponent)]
        p: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        /// Ensemble size.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        length: Option<f64>,
    },
    /// Evolve initial data and record norm time series.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Extra norm to record (`u:` prefix for the velocity); repeatable.
        #[arg(long = "record")]
        record: Vec<String>,
        /// Track the near/far velocity identity alongside the run.
        #[arg(long)]
        serfati: bool,
    },
    /// Picard approximating sequence and its decrements.
    Iterate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Evaluate norms of a field file or of generated data.
    Norms {
        #[command(flatten)]
        run: RunArgs,
        /// Norm descriptor such as `zygmund:1.5` or `hs_ul:2.5@1`; repeatable.
        #[arg(long = "norm")]
        norms: Vec<String>,
        /// `.fld` file to evaluate instead of generated data.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Export the near/far kernel split and validate the fundamental solution.
    Kernels {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    length: Option<f64>,
    /// Initial data: radial, compact_bump (bump), band_limited (band) or
    /// constant_plus_bump.
    #[arg(long, value_parser = parse_class)]
    ic: Option<FieldClass>,
    #[arg(long)]
    r: Option<f64>,
}

fn parse_check(text: &str) -> Result<CheckId, String> {
    text.parse().map_err(|e: sqglab::Error| {
        let names: Vec<&str> = CheckId::ALL.iter().map(|c| c.name()).collect();
        format!("{e}; expected one of {}", names.join(", "))
    })
}

fn parse_exponent(text: &str) -> Result<f64, String> {
    match text {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => text.parse().map_err(|_| format!("{text:?} is neither a number nor inf")),
    }
}

fn parse_class(text: &str) -> Result<FieldClass, String> {
    let canonical = match text {
        "bump" => "compact_bump",
        "band" => "band_limited",
        other => other,
    };
    serde_json::from_value(serde_json::Value::String(canonical.into())).map_err(|_| {
        format!("unknown initial data {text:?}; expected radial, compact_bump, band_limited or constant_plus_bump")
    })
}

impl RunArgs {
    fn apply(&self, o: &mut Overrides) {
        o.beta = self.beta;
        o.n = self.n;
        o.length = self.length;
        o.ic = self.ic;
        o.r = self.r;
    }
}

/// Split the subcommand into its kind and the flag overrides.
fn overrides(cli: &Cli) -> (Option<CommandKind>, Overrides) {
    let mut o = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        ..Overrides::default()
    };
    let kind = match &cli.command {
        None => None,
        Some(Command::Verify {
            checks,
            n,
            beta,
            p,
            s,
            r,
            count,
            length,
        }) => {
            o.checks = checks.clone();
            o.n = *n;
            o.beta = *beta;
            o.p = *p;
            o.s = *s;
            o.r = *r;
            o.count = *count;
            o.length = *length;
            Some(CommandKind::Verify)
        }
        Some(Command::Simulate {
            run,
            dt,
            t_end,
            record,
            serfati,
        }) => {
            run.apply(&mut o);
            o.dt = *dt;
            o.t_end = *t_end;
            o.record = record.clone();
            o.serfati = *serfati;
            Some(CommandKind::Simulate)
        }
        Some(Command::Iterate { run, n_max, dt, t_end }) => {
            run.apply(&mut o);
            o.n_max = *n_max;
            o.dt = *dt;
            o.t_end = *t_end;
            Some(CommandKind::Iterate)
        }
        Some(Command::Norms { run, norms, input }) => {
            run.apply(&mut o);
            o.norms = norms.clone();
            o.input = input.clone();
            Some(CommandKind::Norms)
        }
        Some(Command::Kernels { run }) => {
            run.apply(&mut o);
            Some(CommandKind::Kernels)
        }
    };
    (kind, o)
}

/// Read an experiment document, accepting a manifest in its place.
fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let doc = match value.get("manifest_version") {
        Some(_) => value.get("config").cloned().context("manifest without a config")?,
        None => value,
    };
    serde_json::from_value(doc).with_context(|| format!("invalid config {}", path.display()))
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest_version: u32,
    config: &'a ExperimentConfig,
    artifacts: &'a [String],
    verdicts: &'a [(String, sqglab::Verdict)],
    summary: &'a [String],
    status: &'static str,
}

fn execute(cli: &Cli) -> Result<bool> {
    let base = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    let (kind, o) = overrides(cli);
    let command = kind
        .or(base.command)
        .context("no command given: name a subcommand or set \"command\" in the config")?;
    let env_out = std::env::var_os("OUTPUT_DIR").map(PathBuf::from);
    let mut config = base.resolve(command, &o, env_out);
    let dir = config.output_dir.clone().expect("resolved");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let outcome = commands::run(&mut config, &dir)?;
    let failed = outcome.failed();
    let manifest = Manifest {
        manifest_version: 1,
        config: &config,
        artifacts: &outcome.artifacts,
        verdicts: &outcome.verdicts,
        summary: &outcome.summary,
        status: if failed { "fail" } else { "ok" },
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(!failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
