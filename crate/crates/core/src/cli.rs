//! Experiment driver behind the `efp` binary.
//!
//! A run is described by an [`ExperimentConfig`], read from an optional TOML
//! file and then overridden by command-line flags. Every command validates the
//! resolved configuration before it touches the output directory, writes
//! headed CSV files plus a `manifest.json`, and reports a one-line summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::grid::{make_grid, Field};
use crate::metrics::{relative_distance, TrialRecord, TrialStats};
use crate::problems::{
    make_burgers, make_heat, make_poisson, ProblemKind, ProblemSpec, DEFAULT_ALPHA,
    DEFAULT_Y_EXTENT,
};
use crate::solver::{run_solver, SolveResult, SolverConfig};
use crate::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "EFP_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "efp-out";
pub const DEFAULT_NUS: [f64; 3] = [0.01, 0.05, 0.1];
pub const HISTORY_HEADER: &str = "iter,energy,residual_norm,rel_l2_error,eps";
pub const SWEEP_HEADER: &str = "nu,mean_error_pct,std_error_pct,mean_time_s";

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub nx: usize,
    pub ny: usize,
    /// Heat diffusivity.
    pub alpha: f64,
    /// Burgers viscosity for `solve`, `ablation` and `trials`.
    pub nu: f64,
    /// Extent of the time axis on space-time grids.
    pub y_extent: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Poisson,
            nx: 64,
            ny: 64,
            alpha: DEFAULT_ALPHA,
            nu: 0.1,
            y_extent: DEFAULT_Y_EXTENT,
        }
    }
}

impl ProblemConfig {
    pub fn build(&self) -> crate::Result<ProblemSpec> {
        self.build_with_nu(self.nu)
    }

    pub fn build_with_nu(&self, nu: f64) -> crate::Result<ProblemSpec> {
        let y_extent = match self.kind {
            ProblemKind::Poisson => 1.0,
            _ => self.y_extent,
        };
        let grid = make_grid(self.kind.grid_kind(), self.nx, self.ny, y_extent)?;
        match self.kind {
            ProblemKind::Poisson => make_poisson(&grid),
            ProblemKind::Heat => make_heat(&grid, self.alpha),
            ProblemKind::Burgers => make_burgers(&grid, nu),
        }
    }
}

/// Which seeds to run. An explicit `seeds` list wins; otherwise `count` seeds
/// are generated as `base_seed + index`, with `base_seed` defaulting to the
/// solver seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialPlan {
    pub seeds: Vec<u64>,
    pub count: usize,
    pub base_seed: Option<u64>,
    /// Initial-field amplitudes, cycled over the trials. Empty means the
    /// solver's `sigma_init` for every trial.
    pub sigma_inits: Vec<f64>,
    pub workers: usize,
}

impl Default for TrialPlan {
    fn default() -> Self {
        Self {
            seeds: Vec::new(),
            count: 10,
            base_seed: None,
            sigma_inits: Vec::new(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepPlan {
    pub nus: Vec<f64>,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            nus: DEFAULT_NUS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub trials: TrialPlan,
    pub sweep: SweepPlan,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Ablation,
    Sweep,
    Trials,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Solve => "solve",
            CommandKind::Ablation => "ablation",
            CommandKind::Sweep => "sweep",
            CommandKind::Trials => "trials",
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> crate::Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Ok(Self::from_toml_str(&text)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Resolved seed list, in run order.
    pub fn seeds(&self) -> Vec<u64> {
        if !self.trials.seeds.is_empty() {
            return self.trials.seeds.clone();
        }
        let base = self.trials.base_seed.unwrap_or(self.solver.seed);
        (0..self.trials.count as u64).map(|i| base.wrapping_add(i)).collect()
    }

    /// Solver settings for trial `index` running `seed`.
    pub fn trial_solver(&self, index: usize, seed: u64) -> SolverConfig {
        let mut cfg = self.solver.clone();
        cfg.seed = seed;
        if !self.trials.sigma_inits.is_empty() {
            cfg.sigma_init = self.trials.sigma_inits[index % self.trials.sigma_inits.len()];
        }
        cfg
    }

    /// Output directory: explicit setting, then `EFP_OUT_DIR`, then a default.
    pub fn output_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    /// Checks everything a command needs, including that the problems can be
    /// built, without writing anything.
    pub fn validate(&self, command: CommandKind) -> crate::Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.solver.validate()?;
        for t in &self.trials.sigma_inits {
            if !(*t >= 0.0) || !t.is_finite() {
                return bad(format!("sigma_inits entries must be non-negative, got {t}"));
            }
        }
        if self.trials.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        match command {
            CommandKind::Solve => {
                self.problem.build()?;
            }
            CommandKind::Ablation => {
                if self.problem.kind != ProblemKind::Poisson {
                    return bad(format!(
                        "ablation runs on poisson, got {}",
                        self.problem.kind
                    ));
                }
                self.problem.build()?;
            }
            CommandKind::Sweep => {
                if self.problem.kind != ProblemKind::Burgers {
                    return bad(format!("sweep runs on burgers, got {}", self.problem.kind));
                }
                if self.sweep.nus.is_empty() {
                    return bad("sweep needs at least one viscosity".into());
                }
                for &nu in &self.sweep.nus {
                    self.problem.build_with_nu(nu)?;
                }
                if self.seeds().is_empty() {
                    return bad("the seed list is empty".into());
                }
            }
            CommandKind::Trials => {
                self.problem.build()?;
                let n = self.seeds().len();
                if n < 2 {
                    return bad(format!("trials needs at least 2 seeds, got {n}"));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Debug, Parser)]
#[command(name = "efp", version, about = "Randomized energy-flow PDE solver experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solve and write the final, exact and error fields.
    Solve(RunArgs),
    /// Poisson study of smoothing and boundary enforcement, all four combinations.
    Ablation(RunArgs),
    /// Burgers viscosity sweep over the trial plan.
    Sweep(RunArgs),
    /// Repeat one problem over a list of seeds.
    Trials(RunArgs),
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Solve(_) => CommandKind::Solve,
            Command::Ablation(_) => CommandKind::Ablation,
            Command::Sweep(_) => CommandKind::Sweep,
            Command::Trials(_) => CommandKind::Trials,
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Solve(a) | Command::Ablation(a) | Command::Sweep(a) | Command::Trials(a) => a,
        }
    }
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<ProblemKind>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub nu: Option<f64>,
    /// Viscosities for `sweep`, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub nus: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub y_extent: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Explicit seed list, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Number of generated seeds when no list is given.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Initial-field amplitudes cycled over trials, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sigma_inits: Vec<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub dtau: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps_decay: Option<f64>,
    #[arg(long)]
    pub sigma_init: Option<f64>,
    #[arg(long)]
    pub sigma_smooth: Option<f64>,
    #[arg(long)]
    pub smooth_decay: Option<f64>,
    #[arg(long)]
    pub no_smoothing: bool,
    #[arg(long)]
    pub no_boundary: bool,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub residual_tol: Option<f64>,
    #[arg(long)]
    pub cg_tol: Option<f64>,
    /// Output directory; falls back to `EFP_OUT_DIR`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Loads the config file if any and applies the flags on top.
    pub fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let p = &mut c.problem;
        set(&mut p.kind, self.problem);
        set(&mut p.nx, self.nx);
        set(&mut p.ny, self.ny);
        set(&mut p.nu, self.nu);
        set(&mut p.alpha, self.alpha);
        set(&mut p.y_extent, self.y_extent);

        let s = &mut c.solver;
        set(&mut s.seed, self.seed);
        set(&mut s.dtau, self.dtau);
        set(&mut s.eps0, self.eps0);
        set(&mut s.eps_decay, self.eps_decay);
        set(&mut s.sigma_init, self.sigma_init);
        set(&mut s.sigma_smooth, self.sigma_smooth);
        set(&mut s.smooth_decay, self.smooth_decay);
        set(&mut s.max_iters, self.max_iters);
        set(&mut s.residual_tol, self.residual_tol);
        set(&mut s.cg_tol, self.cg_tol);
        if self.no_smoothing {
            s.smoothing_enabled = false;
        }
        if self.no_boundary {
            s.boundary_enabled = false;
        }

        let t = &mut c.trials;
        if !self.seeds.is_empty() {
            t.seeds = self.seeds.clone();
        }
        if let Some(n) = self.trials {
            t.count = n;
            t.seeds.clear();
        }
        if self.seed.is_some() && self.trials.is_some() {
            t.base_seed = self.seed;
        }
        if !self.sigma_inits.is_empty() {
            t.sigma_inits = self.sigma_inits.clone();
        }
        set(&mut t.workers, self.workers);
        if !self.nus.is_empty() {
            c.sweep.nus = self.nus.clone();
        }
        if self.out.is_some() {
            c.out_dir = self.out.clone();
        }
        Ok(c)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

// ---------------------------------------------------------------------------
// Commands

/// What a finished command reports back to the caller.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub out_dir: PathBuf,
    /// Trials or cells that ended in an error.
    pub failures: usize,
}

pub fn run(command: &Command) -> anyhow::Result<Outcome> {
    let config = command.args().resolve()?;
    run_command(command.kind(), &config)
}

pub fn run_command(kind: CommandKind, config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    config.validate(kind)?;
    match kind {
        CommandKind::Solve => cmd_solve(config),
        CommandKind::Ablation => cmd_ablation(config),
        CommandKind::Sweep => cmd_sweep(config),
        CommandKind::Trials => cmd_trials(config),
    }
}

pub fn cmd_solve(config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    config.validate(CommandKind::Solve)?;
    let problem = config.problem.build()?;
    let result = run_solver(&problem, &config.solver)?;

    let dir = prepare_dir(config)?;
    let exact = problem.exact();
    let abs_error = Field::from_values(
        exact.grid(),
        result
            .final_u
            .values()
            .iter()
            .zip(exact.values())
            .map(|(u, e)| (u - e).abs())
            .collect(),
    )?;
    let files = [
        ("solution", "solution.csv"),
        ("exact", "exact.csv"),
        ("abs_error", "abs_error.csv"),
        ("history", "history.csv"),
    ];
    result.final_u.write_csv(&dir.join(files[0].1))?;
    exact.write_csv(&dir.join(files[1].1))?;
    abs_error.write_csv(&dir.join(files[2].1))?;
    fs::write(dir.join(files[3].1), history_csv(&result))?;

    let summary = format!(
        "{} {}x{} seed {}: error {:.6}%, {} iterations, {:.2} s ({})",
        config.problem.kind,
        config.problem.nx,
        config.problem.ny,
        result.seed,
        result.final_error(),
        result.iterations(),
        result.wall_time,
        stop_label(&result),
    );
    write_manifest(
        &dir,
        CommandKind::Solve,
        config,
        &files.map(|(k, f)| (k.to_string(), f.to_string())),
        json!({ "solve": result_json(&result) }),
    )?;
    Ok(Outcome {
        summary,
        out_dir: dir,
        failures: 0,
    })
}

pub fn cmd_ablation(config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    config.validate(CommandKind::Ablation)?;
    let problem = config.problem.build()?;
    let dir = prepare_dir(config)?;

    let mut table = String::from(
        "smoothing,boundary,initial_residual,final_residual,final_rel_l2_error,iterations,status\n",
    );
    let mut files = Vec::new();
    let mut cells = Vec::new();
    let mut failures = 0;
    for (smoothing, boundary) in [(true, true), (false, true), (true, false), (false, false)] {
        let mut solver = config.solver.clone();
        solver.smoothing_enabled = smoothing;
        solver.boundary_enabled = boundary;
        let name = format!("history_smoothing-{}_boundary-{}.csv", on_off(smoothing), on_off(boundary));
        let (result, status) = settle(run_solver(&problem, &solver))?;
        if status != "ok" {
            failures += 1;
        }
        fs::write(dir.join(&name), history_csv(&result))?;
        writeln!(
            table,
            "{},{},{},{},{},{},{}",
            on_off(smoothing),
            on_off(boundary),
            result.initial.residual_norm,
            result.final_residual(),
            result.final_error(),
            result.iterations(),
            status
        )?;
        cells.push(json!({
            "smoothing": smoothing,
            "boundary": boundary,
            "status": status,
            "result": result_json(&result),
        }));
        files.push((format!("history_{}_{}", on_off(smoothing), on_off(boundary)), name));
    }
    fs::write(dir.join("ablation.csv"), &table)?;
    files.push(("summary".into(), "ablation.csv".into()));

    let summary = format!(
        "ablation {}x{} seed {}: {} cells, {} failed",
        config.problem.nx, config.problem.ny, config.solver.seed, cells.len(), failures
    );
    write_manifest(&dir, CommandKind::Ablation, config, &files, json!({ "cells": cells }))?;
    Ok(Outcome {
        summary,
        out_dir: dir,
        failures,
    })
}

pub fn cmd_sweep(config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    config.validate(CommandKind::Sweep)?;
    let dir = prepare_dir(config)?;
    let mut table = format!("{SWEEP_HEADER}\n");
    let mut rows = String::from("nu,seed,sigma_init,final_rel_l2_error,wall_time,iterations,status\n");
    let mut per_nu = Vec::new();
    let mut failures = 0;
    let mut lines = Vec::new();
    for &nu in &config.sweep.nus {
        let problem = config.problem.build_with_nu(nu)?;
        let runs = run_trials(config, &problem)?;
        let mut records = Vec::new();
        for run in &runs {
            writeln!(
                rows,
                "{nu},{},{},{},{},{},{}",
                run.seed,
                run.sigma_init,
                run.result.final_error(),
                run.result.wall_time,
                run.result.iterations(),
                run.status
            )?;
            if run.status == "ok" {
                records.push(record_of(&run.result));
            } else {
                failures += 1;
            }
        }
        match TrialStats::from_records(records) {
            Ok(stats) => {
                writeln!(
                    table,
                    "{nu},{},{},{}",
                    stats.mean_rel_l2_error, stats.std_rel_l2_error, stats.mean_wall_time
                )?;
                lines.push(format!(
                    "nu {nu}: {:.4}% +- {:.4}",
                    stats.mean_rel_l2_error, stats.std_rel_l2_error
                ));
                per_nu.push(json!({ "nu": nu, "stats": stats }));
            }
            Err(_) => {
                writeln!(table, "{nu},NaN,NaN,NaN")?;
                lines.push(format!("nu {nu}: all trials failed"));
                per_nu.push(json!({ "nu": nu, "stats": null }));
            }
        }
    }
    fs::write(dir.join("sweep.csv"), &table)?;
    fs::write(dir.join("sweep_trials.csv"), &rows)?;
    let files = vec![
        ("summary".to_string(), "sweep.csv".to_string()),
        ("trials".to_string(), "sweep_trials.csv".to_string()),
    ];
    write_manifest(&dir, CommandKind::Sweep, config, &files, json!({ "sweep": per_nu }))?;
    Ok(Outcome {
        summary: format!("sweep {}x{}: {}", config.problem.nx, config.problem.ny, lines.join("; ")),
        out_dir: dir,
        failures,
    })
}

pub fn cmd_trials(config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    config.validate(CommandKind::Trials)?;
    let problem = config.problem.build()?;
    let dir = prepare_dir(config)?;
    let runs = run_trials(config, &problem)?;

    let mut table = String::from("trial,seed,sigma_init,final_rel_l2_error,wall_time,iterations,status\n");
    let mut files = Vec::new();
    let mut records = Vec::new();
    let mut failures = 0;
    for (index, run) in runs.iter().enumerate() {
        let history = format!("history_trial{index}_seed{}.csv", run.seed);
        let solution = format!("solution_trial{index}_seed{}.csv", run.seed);
        fs::write(dir.join(&history), history_csv(&run.result))?;
        run.result.final_u.write_csv(&dir.join(&solution))?;
        files.push((format!("history_{index}"), history));
        files.push((format!("solution_{index}"), solution));
        writeln!(
            table,
            "{index},{},{},{},{},{},{}",
            run.seed,
            run.sigma_init,
            run.result.final_error(),
            run.result.wall_time,
            run.result.iterations(),
            run.status
        )?;
        if run.status == "ok" {
            records.push(record_of(&run.result));
        } else {
            failures += 1;
        }
    }
    fs::write(dir.join("trials.csv"), &table)?;
    files.push(("trials".into(), "trials.csv".into()));

    let finals: Vec<&Field> = runs
        .iter()
        .filter(|r| r.status == "ok")
        .map(|r| &r.result.final_u)
        .collect();
    let spread = max_pairwise_distance(&finals)?;
    let stats = TrialStats::from_records(records).ok();
    let mut summary_csv = String::from(
        "mean_error_pct,std_error_pct,mean_time_s,std_time_s,trial_count,max_pairwise_rel_distance\n",
    );
    let line = match &stats {
        Some(s) => {
            writeln!(
                summary_csv,
                "{},{},{},{},{},{}",
                s.mean_rel_l2_error,
                s.std_rel_l2_error,
                s.mean_wall_time,
                s.std_wall_time,
                s.trial_count,
                spread
            )?;
            format!(
                "trials {} x{}: error {:.6}% +- {:.6}, max pairwise distance {:.3e}, {} failed",
                config.problem.kind,
                runs.len(),
                s.mean_rel_l2_error,
                s.std_rel_l2_error,
                spread,
                failures
            )
        }
        None => {
            writeln!(summary_csv, "NaN,NaN,NaN,NaN,0,NaN")?;
            format!("trials {} x{}: all trials failed", config.problem.kind, runs.len())
        }
    };
    fs::write(dir.join("trials_summary.csv"), &summary_csv)?;
    files.push(("summary".into(), "trials_summary.csv".into()));
    write_manifest(
        &dir,
        CommandKind::Trials,
        config,
        &files,
        json!({ "stats": stats, "max_pairwise_rel_distance": spread }),
    )?;
    Ok(Outcome {
        summary: line,
        out_dir: dir,
        failures,
    })
}

// ---------------------------------------------------------------------------
// Helpers

struct TrialRun {
    seed: u64,
    sigma_init: f64,
    result: SolveResult,
    status: String,
}

/// Runs the trial plan on a worker pool; results come back in seed-list order.
fn run_trials(config: &ExperimentConfig, problem: &ProblemSpec) -> anyhow::Result<Vec<TrialRun>> {
    let seeds = config.seeds();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.trials.workers)
        .build()?;
    let outcomes: Vec<anyhow::Result<TrialRun>> = pool.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(index, &seed)| {
                let solver = config.trial_solver(index, seed);
                let (result, status) = settle(run_solver(problem, &solver))?;
                Ok(TrialRun {
                    seed,
                    sigma_init: solver.sigma_init,
                    result,
                    status,
                })
            })
            .collect()
    });
    outcomes.into_iter().collect()
}

/// Turns a divergence into a flagged partial result; other errors propagate.
fn settle(outcome: crate::Result<SolveResult>) -> anyhow::Result<(SolveResult, String)> {
    match outcome {
        Ok(r) => Ok((r, "ok".into())),
        Err(Error::Diverged {
            iteration,
            reason,
            partial,
        }) => Ok((*partial, format!("diverged at {iteration}: {reason}"))),
        Err(e) => Err(e.into()),
    }
}

fn record_of(r: &SolveResult) -> TrialRecord {
    TrialRecord {
        seed: r.seed,
        final_rel_l2_error: r.final_error(),
        wall_time: r.wall_time,
        iterations: r.iterations(),
    }
}

/// Largest `‖a - b‖ / ‖b‖` over ordered pairs of distinct entries.
pub fn max_pairwise_distance(fields: &[&Field]) -> crate::Result<f64> {
    let mut worst = 0.0f64;
    for (i, a) in fields.iter().enumerate() {
        for (j, b) in fields.iter().enumerate() {
            if i != j {
                worst = worst.max(relative_distance(a, b)?);
            }
        }
    }
    Ok(worst)
}

/// History as CSV: one row per completed update.
pub fn history_csv(result: &SolveResult) -> String {
    let mut out = format!("{HISTORY_HEADER}\n");
    for r in &result.history {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iter, r.energy, r.residual_norm, r.rel_l2_error, r.eps
        )
        .expect("writing to a String cannot fail");
    }
    out
}

fn on_off(flag: bool) -> &'static str {
    if flag {
        "on"
    } else {
        "off"
    }
}

fn stop_label(r: &SolveResult) -> &'static str {
    if r.converged {
        "tolerance reached"
    } else {
        "iteration cap"
    }
}

fn result_json(r: &SolveResult) -> serde_json::Value {
    json!({
        "seed": r.seed,
        "final_rel_l2_error": r.final_error(),
        "final_residual_norm": r.final_residual(),
        "initial": r.initial,
        "iterations": r.iterations(),
        "converged": r.converged,
        "stop_reason": r.stop_reason,
        "wall_time": r.wall_time,
        "cg_cap_hits": r.cg_cap_hits,
    })
}

fn prepare_dir(config: &ExperimentConfig) -> anyhow::Result<PathBuf> {
    let dir = config.output_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_manifest(
    dir: &Path,
    command: CommandKind,
    config: &ExperimentConfig,
    files: &[(String, String)],
    results: serde_json::Value,
) -> anyhow::Result<()> {
    let file_map: serde_json::Map<String, serde_json::Value> = files
        .iter()
        .map(|(k, f)| (k.clone(), json!(dir.join(f))))
        .collect();
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command.name(),
        "library_version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "seeds": config.seeds(),
        "files": file_map,
        "results": results,
    });
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Fails with a readable message when `outcome` reports failed trials.
pub fn check_failures(outcome: &Outcome) -> anyhow::Result<()> {
    if outcome.failures > 0 {
        bail!(
            "{} run(s) failed; see {}",
            outcome.failures,
            outcome.out_dir.join("manifest.json").display()
        );
    }
    Ok(())
}
