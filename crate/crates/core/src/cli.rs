//! Subcommand pipelines behind the `nullwave` binary.
//!
//! Exit status: 0 complete/pass, 1 monitor violation, detected blow-up in
//! `simulate`/`energy-report`, blow-up of a null spec in `blowup-compare`,
//! or a non-null verdict from `check-null`; 2 usage or config error;
//! 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;

use crate::config::{load_config, RunConfig, SnapshotFormat};
use crate::energy::{self, bootstrap_monitor, EnergyReport, Verdict};
use crate::error::{Error, Result};
use crate::experiments::{self, StudyResult, StudyStatus};
use crate::output::{self, fmt_num, BinarySnapshotWriter, CsvSnapshotWriter};
use crate::solver::{self, BlowupCause, BlowupEvent, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Converge,
    EnergyReport,
    BlowupCompare,
    IncrementScaling,
    Lifespan,
    CheckNull,
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub seedless: bool,
    pub quiet: bool,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::StepFailure { .. }
        | Error::NumericalFailure { .. }
        | Error::Quadrature(_)
        | Error::WeightOverflow { .. }
        | Error::Margin { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn kind_name(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::WeightOverflow { .. } => "weight-overflow",
        Error::Dimension { .. } => "dimension",
        Error::Margin { .. } => "margin",
        Error::StepFailure { .. } => "step-failure",
        Error::NumericalFailure { .. } => "numerical-failure",
        Error::Quadrature(_) => "quadrature",
        Error::HypothesisViolation(_) => "hypothesis-violation",
        Error::DegenerateData(_) => "degenerate-data",
        Error::Geometry(_) => "geometry",
        Error::ConfigSyntax { .. } => "config-syntax",
        Error::ConfigInvalid(_) => "config-invalid",
        Error::Io(_) => "io",
    }
}

/// One-line structured form for the diagnostic stream.
pub fn describe_error(e: &Error) -> String {
    format!("error kind={} message={:?}", kind_name(e), e.to_string())
}

fn describe_event(ev: &BlowupEvent) -> String {
    let cause = match ev.cause {
        BlowupCause::Threshold => "threshold".to_string(),
        BlowupCause::StepFailure { cell } => format!("step-failure cell={cell}"),
        BlowupCause::NumericalFailure => "numerical-failure".to_string(),
    };
    format!("blowup t={} cause={cause} peak={}", fmt_num(ev.t), fmt_num(ev.peak))
}

/// Loads the config and runs one subcommand; returns the exit status.
pub fn run_cli(command: Command, config: &Path, opts: &Options) -> i32 {
    let result = load_config(config).and_then(|cfg| dispatch(command, cfg, opts));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", describe_error(&e));
            exit_code(&e)
        }
    }
}

pub fn dispatch(command: Command, mut cfg: RunConfig, opts: &Options) -> Result<i32> {
    if opts.seedless && cfg.seed.is_some() {
        return Err(Error::ConfigInvalid(vec![
            "--seedless: the config requests randomness via 'seed'".into(),
        ]));
    }
    if let Some(out) = &opts.out {
        cfg.output.dir = out.clone();
    }
    if command == Command::CheckNull {
        return Ok(check_null(&cfg, opts));
    }
    fs::create_dir_all(&cfg.output.dir)?;
    let out = Output { dir: cfg.output.dir.clone(), quiet: opts.quiet };
    match command {
        Command::Simulate => simulate(&cfg, &out),
        Command::EnergyReport => energy_report(&cfg, &out),
        Command::Converge => converge(&cfg, &out),
        Command::BlowupCompare => blowup_compare(&cfg, &out),
        Command::IncrementScaling => increment_scaling(&cfg, &out),
        Command::Lifespan => lifespan(&cfg, &out),
        Command::CheckNull => unreachable!(),
    }
}

struct Output {
    dir: PathBuf,
    quiet: bool,
}

impl Output {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn summary(&self, name: &str, entries: Vec<(String, String)>) -> Result<()> {
        if !self.quiet {
            for (k, v) in &entries {
                println!("{k} = {v}");
            }
        }
        output::write_summary(&self.path(name), &entries)
    }
}

fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn check_null(cfg: &RunConfig, opts: &Options) -> i32 {
    let null = cfg.spec.is_null();
    if !opts.quiet {
        println!("{}", if null { "null" } else { "not null" });
    }
    if null {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    }
}

/// Runs the config, streaming snapshots if requested, and writes `energy.csv`.
fn simulate_to_disk(cfg: &RunConfig, out: &Output) -> Result<RunOutput> {
    enum Snap {
        None,
        Csv(CsvSnapshotWriter),
        Bin(BinarySnapshotWriter),
    }
    let mut snap = match cfg.output.snapshots {
        SnapshotFormat::None => Snap::None,
        SnapshotFormat::Csv => Snap::Csv(CsvSnapshotWriter::create(&out.path("snapshots.csv"))?),
        SnapshotFormat::Binary => Snap::Bin(BinarySnapshotWriter::create(
            &out.path("snapshots.bin"),
            cfg.spec.fields(),
            &cfg.grid,
        )?),
    };
    let grid = cfg.grid;
    let run = solver::run_observed(cfg, |s, _| match &mut snap {
        Snap::None => Ok(()),
        Snap::Csv(w) => w.write(s, &grid),
        Snap::Bin(w) => w.write(s),
    })?;
    match snap {
        Snap::None => {}
        Snap::Csv(w) => w.finish()?,
        Snap::Bin(w) => w.finish()?,
    }
    output::write_energy_csv(&out.path("energy.csv"), &run.reports)?;
    Ok(run)
}

fn run_entries(cfg: &RunConfig, run: &RunOutput, verdict: &Verdict) -> Vec<(String, String)> {
    let mut e = vec![
        kv("steps", run.steps),
        kv("t_final", fmt_num(run.final_state.t)),
        kv("e_initial", fmt_num(run.e_initial)),
        kv("theorem_regime", run.theorem_regime),
        kv("null_spec", cfg.spec.is_null()),
        kv("bootstrap_k", fmt_num(cfg.monitors.bootstrap_k)),
        kv(
            "bootstrap",
            match verdict {
                Verdict::Pass => "pass".to_string(),
                Verdict::Fail { t, ratio } => format!("fail t={} ratio={}", fmt_num(*t), fmt_num(*ratio)),
            },
        ),
        kv("max_ratio", fmt_num(run.reports.iter().map(|r| r.ratio).fold(0.0, f64::max))),
    ];
    match &run.blowup {
        Some(ev) => e.push(kv("blowup", describe_event(ev))),
        None => e.push(kv("blowup", "none")),
    }
    e
}

fn run_status(run: &RunOutput, verdict: &Verdict) -> i32 {
    if let Some(ev) = &run.blowup {
        eprintln!("{}", describe_event(ev));
        return EXIT_VIOLATION;
    }
    if !verdict.passed() {
        return EXIT_VIOLATION;
    }
    EXIT_OK
}

fn simulate(cfg: &RunConfig, out: &Output) -> Result<i32> {
    let run = simulate_to_disk(cfg, out)?;
    let verdict = bootstrap_monitor(&run.reports, run.e_initial, cfg.monitors.bootstrap_k)?;
    out.summary("summary.txt", run_entries(cfg, &run, &verdict))?;
    Ok(run_status(&run, &verdict))
}

/// Largest `sup / (L² pair)` over the reports, the measured Sobolev constant.
pub fn sobolev_constant(reports: &[EnergyReport]) -> f64 {
    reports.iter().map(|r| r.mixed.sobolev_ratio()).fold(0.0, f64::max)
}

fn energy_report(cfg: &RunConfig, out: &Output) -> Result<i32> {
    let run = simulate_to_disk(cfg, out)?;
    let verdict = bootstrap_monitor(&run.reports, run.e_initial, cfg.monitors.bootstrap_k)?;
    let mut entries = run_entries(cfg, &run, &verdict);
    let first = &run.reports[0];
    let sup_wl0 = first.sup_wl;
    let drift = run
        .reports
        .iter()
        .map(|r| if sup_wl0 > 0.0 { (r.sup_wl / sup_wl0 - 1.0).abs() } else { 0.0 })
        .fold(0.0, f64::max);
    entries.push(kv("sup_wL_max_relative_drift", fmt_num(drift)));
    entries.push(kv("sobolev_constant", fmt_num(sobolev_constant(&run.reports))));
    let last = run.reports.last().unwrap();
    for k in 0..2 {
        entries.push(kv(&format!("st_int_k{k}"), fmt_num(last.st_integral[k])));
        entries.push(kv(&format!("st_int_k{k}_fubini_bound"), fmt_num(run.fubini_bound[k])));
    }
    if run.blowup.is_none() {
        match energy::identity_residual(cfg, cfg.study.ubar0) {
            Ok(r) => {
                entries.push(kv("identity_residual_minus", fmt_num(r.minus)));
                entries.push(kv("identity_residual_plus", fmt_num(r.plus)));
                if run.e_initial > 0.0 {
                    entries.push(kv("identity_residual_relative", fmt_num(r.magnitude() / run.e_initial)));
                }
            }
            Err(Error::Geometry(msg)) => entries.push(kv("identity_residual", format!("skipped: {msg}"))),
            Err(e) => return Err(e),
        }
    }
    out.summary("summary.txt", entries)?;
    Ok(run_status(&run, &verdict))
}

fn status_entry(r: &StudyResult) -> (String, String) {
    match &r.status {
        StudyStatus::Conclusive => kv("status", "conclusive"),
        StudyStatus::Inconclusive(why) => kv("status", format!("inconclusive: {why}")),
    }
}

fn fitted_entry(r: &StudyResult) -> (String, String) {
    let v: Vec<String> = r.fitted.iter().map(|v| fmt_num(*v)).collect();
    kv("fitted", format!("[{}]", v.join(", ")))
}

fn converge(cfg: &RunConfig, out: &Output) -> Result<i32> {
    let r = experiments::convergence_study(cfg, cfg.study.refinements)?;
    let rows: Vec<Vec<f64>> = r
        .rungs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let order = if i == 0 { f64::NAN } else { r.fitted[i - 1] };
            vec![g.h, g.value, order]
        })
        .collect();
    output::write_table(&out.path("converge.csv"), &["h", "error", "order"], &rows)?;
    out.summary("converge_summary.txt", vec![status_entry(&r), fitted_entry(&r)])?;
    Ok(EXIT_OK)
}

fn blowup_compare(cfg: &RunConfig, out: &Output) -> Result<i32> {
    let est = experiments::detect_blowup(cfg)?;
    let oracle = cfg.data.plateau_velocity().and_then(|a| experiments::john_oracle(cfg.eps * a));
    let mut rows = Vec::new();
    let mut entries = vec![
        kv("theorem_regime", cfg.data.is_theorem_regime()),
        kv("null_spec", cfg.spec.is_null()),
        kv("oracle", oracle.map_or("none".into(), fmt_num)),
    ];
    match &est {
        None => entries.push(kv("blowup", "none")),
        Some(b) => {
            for (label, ev, h) in [
                (0.0, b.coarse, cfg.grid.h),
                (1.0, b.fine, cfg.grid.refined().h),
            ] {
                if let Some(ev) = ev {
                    rows.push(vec![label, h, ev.t, ev.peak]);
                }
            }
            entries.push(kv("blowup", format!("t={}", fmt_num(b.t_blow))));
            entries.push(kv("gap", fmt_num(b.gap)));
            entries.push(kv("low_confidence", b.low_confidence));
            if let Some(o) = oracle {
                entries.push(kv("relative_error", fmt_num((b.t_blow - o).abs() / o)));
            }
        }
    }
    output::write_table(&out.path("blowup.csv"), &["rung", "h", "t", "peak"], &rows)?;
    out.summary("blowup_summary.txt", entries)?;
    Ok(if est.is_some() && cfg.spec.is_null() { EXIT_VIOLATION } else { EXIT_OK })
}

fn increment_scaling(cfg: &RunConfig, out: &Output) -> Result<i32> {
    let ladder = required_ladder(cfg)?;
    let r = experiments::increment_scaling(cfg, &ladder)?;
    let rows: Vec<Vec<f64>> = r
        .rungs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let nu = if i == 0 { f64::NAN } else { r.fitted[i - 1] };
            vec![g.eps, g.value, g.aux, nu]
        })
        .collect();
    output::write_table(&out.path("increment.csv"), &["eps", "delta", "noise_floor", "nu"], &rows)?;
    out.summary("increment_summary.txt", vec![status_entry(&r), fitted_entry(&r)])?;
    Ok(EXIT_OK)
}

fn lifespan(cfg: &RunConfig, out: &Output) -> Result<i32> {
    let ladder = required_ladder(cfg)?;
    let cap = cfg.study.t_cap.unwrap_or(cfg.t_final);
    let r = experiments::lifespan_sweep(cfg, &ladder, cap)?;
    let rows: Vec<Vec<f64>> = r
        .rungs
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let ratio = if i == 0 { f64::NAN } else { r.fitted[i - 1] };
            vec![g.eps, g.value, if g.censored { 1.0 } else { 0.0 }, ratio]
        })
        .collect();
    output::write_table(&out.path("lifespan.csv"), &["eps", "t_star", "censored", "ratio"], &rows)?;
    out.summary(
        "lifespan_summary.txt",
        vec![status_entry(&r), fitted_entry(&r), kv("theorem_regime", cfg.data.is_theorem_regime())],
    )?;
    Ok(EXIT_OK)
}

fn required_ladder(cfg: &RunConfig) -> Result<Vec<f64>> {
    if cfg.study.eps_ladder.is_empty() {
        return Err(Error::ConfigInvalid(vec!["study.eps_ladder is required for this command".into()]));
    }
    Ok(cfg.study.eps_ladder.clone())
}
