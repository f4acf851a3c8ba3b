use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sqglab::dyadic::DyadicFamily;
use sqglab::ensemble::radial_profile;
use sqglab::io::{load_field, save_field};
use sqglab::kernels::verify_fundamental_solution;
use sqglab::multipliers::biot_savart_velocity;
use sqglab::norms::zygmund_norm;
use sqglab::solver::{existence_time, picard_iterate, simulate, SolverConfig};
use sqglab::verify::run_check;
use sqglab::{CutoffA, EnsembleSpec, FieldClass, Grid2D, KernelSplit, NormKind, SpectralField, Verdict};

use crate::config::{CommandKind, ExperimentConfig};

const DEFAULT_NORMS: [&str; 4] = ["linf", "l2", "w1inf", "zygmund:1.5"];

#[derive(Debug, Default, Serialize)]
pub struct Outcome {
    pub artifacts: Vec<String>,
    pub verdicts: Vec<(String, Verdict)>,
    /// Headline numbers, also printed to stdout.
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn failed(&self) -> bool {
        self.verdicts.iter().any(|(_, v)| *v == Verdict::Fail)
    }

    fn say(&mut self, line: String) {
        println!("{line}");
        self.summary.push(line);
    }
}

struct Sink<'a> {
    dir: &'a Path,
    out: Outcome,
}

impl Sink<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.out.artifacts.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    fn field(&mut self, name: &str, f: &SpectralField) -> Result<()> {
        save_field(f, self.dir.join(name)).with_context(|| format!("writing {name}"))?;
        self.out.artifacts.push(name.to_string());
        Ok(())
    }
}

fn solver_config(c: &ExperimentConfig) -> SolverConfig {
    let s = &c.solver;
    let mut cfg = SolverConfig::new(
        s.beta,
        s.n_side,
        s.length.expect("resolved"),
        s.dt.unwrap_or(1e-3),
        s.t_end.unwrap_or(0.0),
    );
    cfg.r = s.r;
    cfg.constitutive = s.constitutive;
    cfg.record_norms = s.record_norms.clone();
    cfg.sample_every = s.sample_every;
    cfg.checkpoint_every = s.checkpoint_every;
    cfg.track_serfati = s.track_serfati;
    cfg.stop_at_existence_time = s.stop_at_existence_time;
    cfg.c_existence = s.c_existence;
    cfg
}

fn initial_data(c: &ExperimentConfig, grid: Grid2D) -> Result<SpectralField> {
    let init = &c.initial;
    Ok(match init.class {
        FieldClass::Radial => radial_profile(grid, init.amplitude, init.sigma.expect("resolved")),
        class => EnsembleSpec::new(init.trial + 1, c.seed, class)
            .with_band(init.band)
            .sample(grid, init.trial)?,
    })
}

/// Run the resolved experiment, writing artifacts into `dir`. Values the
/// command derives from the data (step, horizon) are written back into
/// `config` so the manifest reproduces the run.
pub fn run(config: &mut ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let mut sink = Sink {
        dir,
        out: Outcome::default(),
    };
    match config.command.expect("resolved") {
        CommandKind::Verify => verify(config, &mut sink)?,
        CommandKind::Simulate => run_simulation(config, &mut sink)?,
        CommandKind::Iterate => iterate(config, &mut sink)?,
        CommandKind::Norms => norms(config, &mut sink)?,
        CommandKind::Kernels => kernels(config, &mut sink)?,
    }
    Ok(sink.out)
}

fn verify(config: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let mut used = Vec::new();
    for d in &config.checks {
        let name = d.check.name();
        let copies = used.iter().filter(|n| **n == name).count();
        used.push(name);
        let file = if copies == 0 { format!("{name}.csv") } else { format!("{name}_{copies}.csv") };
        let params = d.params.as_ref().expect("resolved");
        let ensemble = d.ensemble.as_ref().expect("resolved");
        let report = run_check(d.check, params, ensemble).with_context(|| format!("check {name}"))?;
        report.write_csv(sink.create(&file)?)?;
        for n in &report.notes {
            sink.out.say(format!("  {name}: {n}"));
        }
        sink.out.say(report.summary());
        sink.out.verdicts.push((name.to_string(), report.verdict));
    }
    Ok(())
}

fn run_simulation(config: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let cfg = solver_config(config);
    let grid = cfg.grid()?;
    let theta = initial_data(config, grid)?;
    let u = biot_savart_velocity(&theta, cfg.beta)?;
    let run = simulate(&cfg, &theta, &u)?;
    run.write_csv(sink.create("timeseries.csv")?)?;
    sink.field("theta_initial.fld", &theta)?;
    sink.field("theta_final.fld", &run.final_state.theta)?;
    sink.field("u_final.fld", &run.final_state.u)?;
    if cfg.checkpoint_every.is_some() {
        for (k, (_, th, _)) in run.snapshots.iter().enumerate() {
            sink.field(&format!("theta_{k:04}.fld"), th)?;
        }
    }
    for n in &run.notes {
        sink.out.say(format!("note: {n}"));
    }
    let linf = run.series("theta_linf");
    let l0 = linf[0].1;
    let series_drift = linf.iter().map(|&(_, v)| (v - l0).abs()).fold(0.0, f64::max) / l0.max(f64::MIN_POSITIVE);
    let field_drift = run.final_state.theta.sub(&theta).linf() / l0.max(f64::MIN_POSITIVE);
    sink.out.say(format!(
        "simulate t_end={} dt={:.4e} steps={} existence_time={:.4e}",
        run.final_state.t,
        run.dt,
        (run.final_state.t / run.dt).round(),
        run.existence_time
    ));
    sink.out.say(format!("theta_linf drift {series_drift:.3e}; |theta(T) - theta0|_inf / |theta0|_inf = {field_drift:.3e}"));
    if let Some(&(_, m)) = run.series("serfati_mismatch").last() {
        sink.out.say(format!("serfati mismatch at t_end {m:.3e}"));
    }
    Ok(())
}

fn iterate(config: &mut ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let grid = Grid2D::new(config.solver.n_side, config.solver.length.expect("resolved"))?;
    let theta = initial_data(config, grid)?;
    let u = biot_savart_velocity(&theta, config.solver.beta)?;
    let family = DyadicFamily::build_partition(grid)?;
    let cr = zygmund_norm(&theta, config.solver.r, &family, false)?.value;
    let t_exist = existence_time(u.linf(), cr, config.solver.c_existence);
    let sv = &mut config.solver;
    if sv.t_end.is_none() {
        sv.t_end = Some(sv.time_fraction * t_exist);
    }
    if sv.dt.is_none() {
        sv.dt = Some(sv.t_end.expect("set") / 8.0);
    }
    if config.n_max < 2 {
        bail!("n_max must be at least 2");
    }
    let mut cfg = solver_config(config);
    cfg.sample_every = 1;
    let trace = picard_iterate(&cfg, &theta, &u, config.n_max)?;
    trace.write_csv(sink.create("decrements.csv")?)?;
    let mut w = sink.create("partial_sums.csv")?;
    writeln!(w, "n,decrement,partial_sum")?;
    for (k, (d, s)) in trace.final_decrements().iter().zip(trace.partial_sums()).enumerate() {
        writeln!(w, "{},{d:.12e},{s:.12e}", k + 2)?;
    }
    drop(w);
    let (theta_n, u_n) = trace.iterates.last().expect("at least one iterate");
    sink.field("theta_last.fld", theta_n)?;
    sink.field("u_last.fld", u_n)?;
    for n in &trace.notes {
        sink.out.say(format!("note: {n}"));
    }
    let rho = trace.decay_ratio(1e-14);
    sink.out.say(format!(
        "iterate T={:.4e} t_end={:.4e} decay_ratio={} last_decrement={:.3e} verdict={}",
        t_exist,
        cfg.t_end,
        rho.map_or("n/a".into(), |r| format!("{r:.4}")),
        trace.final_decrements().last().copied().unwrap_or(0.0),
        trace.verdict
    ));
    sink.out.verdicts.push(("picard".into(), trace.verdict));
    Ok(())
}

fn norms(config: &mut ExperimentConfig, sink: &mut Sink) -> Result<()> {
    if config.norms.is_empty() {
        config.norms = DEFAULT_NORMS.iter().map(|s| s.to_string()).collect();
    }
    let field = match &config.input {
        Some(path) => load_field(path).with_context(|| format!("reading {}", path.display()))?,
        None => {
            let grid = Grid2D::new(config.solver.n_side, config.solver.length.expect("resolved"))?;
            initial_data(config, grid)?
        }
    };
    let mut table = sink.create("norms.csv")?;
    writeln!(table, "kind,param,value")?;
    for (i, name) in config.norms.iter().enumerate() {
        let kind: NormKind = name.parse()?;
        let report = kind.evaluate(&field).with_context(|| format!("norm {name}"))?;
        report.write_csv_rows(&mut table)?;
        if !report.block_profile.is_empty() || !report.window_profile.is_empty() {
            report.write_profile_csv(sink.create(&format!("profile_{i:02}.csv"))?)?;
        }
        sink.out.say(format!("{kind} = {:.10e}", report.value));
    }
    Ok(())
}

fn kernels(config: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let beta = config.solver.beta;
    let grid = Grid2D::new(config.solver.n_side, config.solver.length.expect("resolved"))?;
    let split = KernelSplit::build_split(grid, beta, CutoffA::default())?;
    sink.field("near.fld", &split.near_field())?;
    sink.field("far_row0.fld", &split.far_row(0))?;
    sink.field("far_row1.fld", &split.far_row(1))?;
    let mut w = sink.create("kernels.csv")?;
    writeln!(w, "quantity,value")?;
    let rows = [
        ("c_beta", split.c_beta()),
        ("moment_correction", split.moment_correction()),
        ("near_l1", split.near_l1()),
        ("far_decay_exponent", split.far_decay_exponent()),
        ("fourier_bound", split.fourier_bound()),
    ];
    for (k, v) in rows {
        writeln!(w, "{k},{v:.17e}")?;
    }
    drop(w);
    DyadicFamily::write_profiles_csv(sink.create("dyadic_profiles.csv")?, 513)?;
    let report = verify_fundamental_solution(beta, grid)?;
    report.write_csv(sink.create("fundamental.csv")?)?;
    sink.out.say(format!(
        "kernels beta={beta} c_beta={:.15} near_l1={:.6e} far_decay={:.4}",
        split.c_beta(),
        split.near_l1(),
        split.far_decay_exponent()
    ));
    sink.out.say(report.summary());
    sink.out.verdicts.push(("fundamental_solution".into(), report.verdict));
    Ok(())
}
