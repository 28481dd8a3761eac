//! Reproducible sweeps over the planted model.
//!
//! A run is described by an [`ExperimentConfig`] (TOML on disk). Every trial
//! draws its instance from a seed derived from the master seed, the cell
//! parameters and the trial index, so results do not depend on the number of
//! worker threads or on scheduling. Outputs are `trials.csv` (one row per
//! trial and method), `summary.csv` (one row per cell and method) and
//! `run.json` (configuration echo and environment).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, default_lambda_grid};
use crate::certificate::{deterministic_recovery, RecoveryOptions};
use crate::error::{Error, Result};
use crate::graph::{generate_planted, recovery_threshold, PlantedInstance};
use crate::oracle::{clique_cover_number, Budget};
use crate::rng::derive_seed;
use crate::sdp::conic::ConicOptions;
use crate::sdp::theta::{classify_recovery, solve_theta, Recovery};
use crate::symmat::CERT_TOL;

pub const SCHEMA: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Comparison,
    IlpGap,
    PhaseTransition,
    Certify,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Comparison => "comparison",
            ExperimentKind::IlpGap => "ilp_gap",
            ExperimentKind::PhaseTransition => "phase_transition",
            ExperimentKind::Certify => "certify",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "comparison" => Ok(ExperimentKind::Comparison),
            "ilp_gap" => Ok(ExperimentKind::IlpGap),
            "phase_transition" => Ok(ExperimentKind::PhaseTransition),
            "certify" => Ok(ExperimentKind::Certify),
            other => Err(Error::Config(format!("unknown experiment kind `{other}`"))),
        }
    }
}

/// The p grid `{0.00, 0.05, …, 1.00}`.
pub fn default_p_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Block sizes of the planted partition (all kinds but phase_transition).
    pub sizes: Vec<usize>,
    /// `n = k*` values (phase_transition only).
    pub n_values: Vec<usize>,
    pub p_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub eps: f64,
    pub max_iter: usize,
    /// Strong/weak value tolerance, relative to `k*`.
    pub tol_value: f64,
    /// Strong/weak matrix tolerance, relative to `‖X*‖_F`.
    pub tol_matrix: f64,
    pub lambda_grid: Vec<f64>,
    pub max_nodes: u64,
    pub max_time_secs: Option<f64>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

/// Every key optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub kind: Option<ExperimentKind>,
    pub sizes: Option<Vec<usize>>,
    pub n_values: Option<Vec<usize>>,
    pub p_grid: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub eps: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol_value: Option<f64>,
    pub tol_matrix: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub max_nodes: Option<u64>,
    pub max_time_secs: Option<f64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

impl ExperimentConfig {
    /// Defaults for each experiment.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            kind,
            sizes: vec![10; 10],
            n_values: vec![5, 8, 10, 12],
            p_grid: default_p_grid(),
            trials: 20,
            seed: 2024,
            eps: 1e-5,
            max_iter: 20_000,
            tol_value: 1e-3,
            tol_matrix: 1e-3,
            lambda_grid: default_lambda_grid(),
            max_nodes: Budget::default().max_nodes,
            max_time_secs: None,
            out: None,
            jobs: 1,
        };
        match kind {
            ExperimentKind::Comparison => base,
            ExperimentKind::IlpGap => ExperimentConfig {
                sizes: vec![6; 6],
                trials: 10,
                ..base
            },
            ExperimentKind::PhaseTransition => ExperimentConfig { trials: 10, ..base },
            ExperimentKind::Certify => ExperimentConfig {
                sizes: vec![10; 4],
                p_grid: vec![0.0, 0.1, 0.2, 0.3, 0.4],
                trials: 20,
                eps: 1e-7,
                ..base
            },
        }
    }

    /// Preset for the file's kind (or `fallback`), overlaid with the file.
    pub fn from_file(file: ConfigFile, fallback: Option<ExperimentKind>) -> Result<Self> {
        let kind = file
            .kind
            .or(fallback)
            .ok_or_else(|| Error::Config("missing `kind`".into()))?;
        let mut cfg = Self::preset(kind);
        cfg.overlay(file);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces every key present in `file`.
    pub fn overlay(&mut self, file: ConfigFile) {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = file.$f { self.$f = v; } )* };
        }
        take!(kind, sizes, n_values, p_grid, trials, seed, eps, max_iter, tol_value, tol_matrix,
              lambda_grid, max_nodes, jobs);
        if file.max_time_secs.is_some() {
            self.max_time_secs = file.max_time_secs;
        }
        if file.out.is_some() {
            self.out = file.out;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.p_grid.is_empty() || self.p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad(format!("p_grid must be non-empty within [0, 1]: {:?}", self.p_grid));
        }
        if self.trials == 0 {
            return bad("trials must be ≥ 1".into());
        }
        if !(self.eps > 0.0) || self.max_iter == 0 {
            return bad("eps must be positive and max_iter ≥ 1".into());
        }
        if !(self.tol_value > 0.0) || !(self.tol_matrix > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be ≥ 1".into());
        }
        if self.kind == ExperimentKind::PhaseTransition {
            if self.n_values.is_empty() || self.n_values.contains(&0) {
                return bad("n_values must be non-empty and positive".into());
            }
        } else if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("sizes must be non-empty and positive".into());
        }
        if self.kind == ExperimentKind::Comparison && self.lambda_grid.is_empty() {
            return bad("lambda_grid must be non-empty".into());
        }
        if let Some(t) = self.max_time_secs {
            if !(t > 0.0) {
                return bad("max_time_secs must be positive".into());
            }
        }
        Ok(())
    }

    fn conic(&self) -> ConicOptions {
        ConicOptions {
            eps: self.eps,
            max_iter: self.max_iter,
            ..ConicOptions::default()
        }
    }

    fn budget(&self) -> Budget {
        Budget {
            max_nodes: self.max_nodes,
            max_time: self.max_time_secs.map(Duration::from_secs_f64),
        }
    }

    /// Cells as `(sizes, p)` in output order.
    fn cells(&self) -> Vec<(Vec<usize>, f64)> {
        let size_sets: Vec<Vec<usize>> = match self.kind {
            ExperimentKind::PhaseTransition => self.n_values.iter().map(|&n| vec![n; n]).collect(),
            _ => vec![self.sizes.clone()],
        };
        size_sets
            .into_iter()
            .flat_map(|s| self.p_grid.iter().map(move |&p| (s.clone(), p)))
            .collect()
    }
}

/// One row of `trials.csv`. Columns that do not apply are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub schema: String,
    pub experiment: String,
    pub cell: usize,
    pub sizes: String,
    pub vertices: usize,
    pub k: usize,
    pub p: f64,
    pub trial: usize,
    pub seed: u64,
    pub method: String,
    pub outcome: String,
    pub success: bool,
    pub theta: Option<f64>,
    pub chi_bar: Option<usize>,
    /// `⌈θ − tol⌉`, an integer lower bound on `χ̄`.
    pub theta_bound: Option<usize>,
    pub gap: Option<f64>,
    pub certified: Option<bool>,
    pub c_min: Option<f64>,
    pub below_threshold: Option<bool>,
    pub distance: Option<f64>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub nodes: Option<u64>,
    pub exact: Option<bool>,
    pub runtime_secs: f64,
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub schema: String,
    pub experiment: String,
    pub cell: usize,
    pub sizes: String,
    pub vertices: usize,
    pub k: usize,
    pub p: f64,
    pub method: String,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub mean_theta: Option<f64>,
    pub mean_chi_bar: Option<f64>,
    /// Mean of `χ̄ − θ` over trials whose oracle value is exact.
    pub mean_gap: Option<f64>,
    pub exact_trials: Option<usize>,
    pub mean_nodes: Option<f64>,
    pub certified_rate: Option<f64>,
    pub below_threshold_rate: Option<f64>,
    pub unconverged: usize,
    pub mean_runtime_secs: f64,
}

/// Transition statistics of one phase-transition size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionStats {
    pub n: usize,
    pub p_at_90: Option<f64>,
    pub p_at_50: Option<f64>,
    pub p_at_10: Option<f64>,
    /// `p_at_10 − p_at_90` on the strong curve.
    pub width: Option<f64>,
    /// Weak rate minus strong rate at `p_at_50`.
    pub gap_at_midpoint: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    pub transitions: Vec<TransitionStats>,
    pub elapsed_secs: f64,
}

fn sizes_label(sizes: &[usize]) -> String {
    if sizes.iter().all(|&s| s == sizes[0]) {
        format!("{}x{}", sizes.len(), sizes[0])
    } else {
        sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("+")
    }
}

fn trial_seed(master: u64, sizes: &[usize], p: f64, trial: usize) -> u64 {
    let mut key: Vec<u64> = sizes.iter().map(|&s| s as u64).collect();
    key.push(p.to_bits());
    derive_seed(&[master, derive_seed(&key), trial as u64])
}

struct TrialContext<'a> {
    cfg: &'a ExperimentConfig,
    cell: usize,
    trial: usize,
    inst: PlantedInstance,
}

impl TrialContext<'_> {
    fn record(&self, method: &str) -> TrialRecord {
        let part = &self.inst.partition;
        TrialRecord {
            schema: SCHEMA.into(),
            experiment: self.cfg.kind.as_str().into(),
            cell: self.cell,
            sizes: sizes_label(&part.sizes()),
            vertices: part.n(),
            k: part.k(),
            p: self.inst.p,
            trial: self.trial,
            seed: self.inst.seed,
            method: method.into(),
            outcome: String::new(),
            success: false,
            theta: None,
            chi_bar: None,
            theta_bound: None,
            gap: None,
            certified: None,
            c_min: None,
            below_threshold: None,
            distance: None,
            residual: None,
            iterations: None,
            converged: None,
            nodes: None,
            exact: None,
            runtime_secs: 0.0,
        }
    }

    /// Two records: strong recovery and weak-or-better recovery.
    fn theta_records(&self) -> Result<Vec<TrialRecord>> {
        let start = Instant::now();
        let sol = solve_theta(&self.inst.graph, &self.cfg.conic())?;
        let runtime = start.elapsed().as_secs_f64();
        let k = self.inst.partition.k() as f64;
        let class = classify_recovery(
            &sol,
            &self.inst.partition,
            self.cfg.tol_value * k,
            self.cfg.tol_matrix,
        );
        let class = match class {
            Ok(c) => Some(c),
            Err(Error::NotConverged) => None,
            Err(e) => return Err(e),
        };
        let make = |method: &str, ok: bool| {
            let mut r = self.record(method);
            r.outcome = class.map_or("not_converged", |c| c.as_str()).into();
            r.success = ok;
            r.theta = Some(sol.theta);
            r.residual = Some(sol.primal_residual.max(sol.dual_residual).max(sol.gap));
            r.iterations = Some(sol.iterations);
            r.converged = Some(sol.converged);
            r.runtime_secs = runtime;
            r
        };
        Ok(vec![
            make("theta_strong", class == Some(Recovery::Strong)),
            make(
                "theta_weak",
                matches!(class, Some(Recovery::Strong | Recovery::Weak)),
            ),
        ])
    }

    fn baseline_record(&self, r: &baselines::BaselineResult, method: &str) -> TrialRecord {
        let mut rec = self.record(method);
        rec.outcome = if r.success { "success" } else { "fail" }.into();
        rec.success = r.success;
        rec.distance = Some(r.distance);
        rec.residual = Some(r.residual);
        rec.iterations = Some(r.iterations);
        rec.converged = Some(r.converged);
        rec.runtime_secs = r.runtime_secs;
        rec
    }

    fn comparison(&self) -> Result<Vec<TrialRecord>> {
        let (g, part) = (&self.inst.graph, &self.inst.partition);
        let opts = self.cfg.conic();
        let mut out = self.theta_records()?;

        let start = Instant::now();
        let sweep = baselines::sweep_lambda(g, part, &self.cfg.lambda_grid, &opts)?;
        let mut rec = self.baseline_record(sweep.best_result(), "deconvolution");
        rec.iterations = Some(sweep.per_lambda.iter().map(|r| r.iterations).sum());
        rec.converged = Some(sweep.per_lambda.iter().all(|r| r.converged));
        rec.runtime_secs = start.elapsed().as_secs_f64();
        out.push(rec);

        let kdc = baselines::solve_kdc(g, part, part.k(), &opts)?;
        out.push(self.baseline_record(&kdc, "kdc"));

        match baselines::solve_schurhorn(g, part, &opts) {
            Ok(sh) => out.push(self.baseline_record(&sh, "schurhorn")),
            Err(Error::Inapplicable(_)) => {
                let mut rec = self.record("schurhorn");
                rec.outcome = "inapplicable".into();
                out.push(rec);
            }
            Err(e) => return Err(e),
        }
        Ok(out)
    }

    fn ilp_gap(&self) -> Result<Vec<TrialRecord>> {
        let cover = clique_cover_number(&self.inst.graph, self.cfg.budget());
        let mut theta = self.theta_records()?.swap_remove(0);
        let t = theta.theta.expect("theta recorded");
        let mut rec = self.record("ilp_gap");
        rec.outcome = if cover.exact { "exact" } else { "inexact" }.into();
        rec.success = cover.exact;
        rec.theta = Some(t);
        rec.chi_bar = Some(cover.value);
        rec.theta_bound = Some((t - self.cfg.tol_value * self.inst.partition.k() as f64).ceil().max(0.0) as usize);
        rec.gap = Some(cover.value as f64 - t);
        rec.residual = theta.residual.take();
        rec.iterations = theta.iterations;
        rec.converged = theta.converged;
        rec.nodes = Some(cover.nodes_explored);
        rec.exact = Some(cover.exact);
        rec.runtime_secs = cover.time_secs + theta.runtime_secs;
        Ok(vec![rec])
    }

    fn certify(&self) -> Result<Vec<TrialRecord>> {
        let (g, part) = (&self.inst.graph, &self.inst.partition);
        let start = Instant::now();
        let report = deterministic_recovery(
            g,
            part,
            RecoveryOptions {
                tol: CERT_TOL,
                ..RecoveryOptions::default()
            },
        )?;
        let theta = self.theta_records()?.swap_remove(0);
        let c_min = report.residuals.c_min.expect("pipeline records c_min");
        let mut rec = self.record("certify");
        let certified = report.verdict.is_certified();
        rec.certified = Some(certified);
        rec.c_min = Some(c_min);
        rec.below_threshold = Some(c_min <= recovery_threshold(part));
        rec.success = theta.success;
        rec.outcome = theta.outcome.clone();
        rec.theta = theta.theta;
        rec.residual = theta.residual;
        rec.iterations = theta.iterations;
        rec.converged = theta.converged;
        rec.runtime_secs = start.elapsed().as_secs_f64();
        Ok(vec![rec])
    }
}

fn run_trial(cfg: &ExperimentConfig, cell: usize, sizes: &[usize], p: f64, trial: usize) -> Result<Vec<TrialRecord>> {
    let seed = trial_seed(cfg.seed, sizes, p, trial);
    let ctx = TrialContext {
        cfg,
        cell,
        trial,
        inst: generate_planted(sizes, p, seed)?,
    };
    match cfg.kind {
        ExperimentKind::Comparison => ctx.comparison(),
        ExperimentKind::IlpGap => ctx.ilp_gap(),
        ExperimentKind::PhaseTransition => ctx.theta_records(),
        ExperimentKind::Certify => ctx.certify(),
    }
}

/// Runs every (cell, trial) on a pool of `cfg.jobs` threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let cells = cfg.cells();
    let work: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<Vec<TrialRecord>>> = pool.install(|| {
        work.par_iter()
            .map(|&(c, t)| run_trial(cfg, c, &cells[c].0, cells[c].1, t))
            .collect()
    });
    let mut records = Vec::with_capacity(results.len() * 5);
    for r in results {
        records.extend(r?);
    }
    records.sort_by(|a, b| (a.cell, a.trial).cmp(&(b.cell, b.trial)));
    let summary = summarize(&records);
    let transitions = if cfg.kind == ExperimentKind::PhaseTransition {
        transition_stats(&summary)
    } else {
        Vec::new()
    };
    Ok(ExperimentOutput {
        config: cfg.clone(),
        records,
        summary,
        transitions,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn run_comparison(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::Comparison)?;
    run_experiment(cfg)
}

pub fn run_ilp_gap(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::IlpGap)?;
    run_experiment(cfg)
}

pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::PhaseTransition)?;
    run_experiment(cfg)
}

pub fn run_certify(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    expect_kind(cfg, ExperimentKind::Certify)?;
    run_experiment(cfg)
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::Config(format!(
            "expected a {} config, got {}",
            kind.as_str(),
            cfg.kind.as_str()
        )));
    }
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

/// Aggregates records into one row per (cell, method), in first-seen order.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(usize, String)> = Vec::new();
    for r in records {
        let key = (r.cell, r.method.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.sort_by(|a, b| a.0.cmp(&b.0));
    keys.into_iter()
        .map(|(cell, method)| {
            let rows: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.cell == cell && r.method == method)
                .collect();
            let first = rows[0];
            let exact: Vec<&&TrialRecord> = rows.iter().filter(|r| r.exact == Some(true)).collect();
            let has_oracle = rows.iter().any(|r| r.chi_bar.is_some());
            SummaryRow {
                schema: SCHEMA.into(),
                experiment: first.experiment.clone(),
                cell,
                sizes: first.sizes.clone(),
                vertices: first.vertices,
                k: first.k,
                p: first.p,
                method,
                trials: rows.len(),
                successes: rows.iter().filter(|r| r.success).count(),
                rate: rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64,
                mean_theta: mean(rows.iter().filter_map(|r| r.theta)),
                mean_chi_bar: mean(rows.iter().filter_map(|r| r.chi_bar.map(|c| c as f64))),
                mean_gap: mean(exact.iter().filter_map(|r| r.gap)),
                exact_trials: has_oracle.then_some(exact.len()),
                mean_nodes: mean(rows.iter().filter_map(|r| r.nodes.map(|n| n as f64))),
                certified_rate: mean(rows.iter().filter_map(|r| r.certified.map(|b| b as u8 as f64))),
                below_threshold_rate: mean(
                    rows.iter().filter_map(|r| r.below_threshold.map(|b| b as u8 as f64)),
                ),
                unconverged: rows.iter().filter(|r| r.converged == Some(false)).count(),
                mean_runtime_secs: mean(rows.iter().map(|r| r.runtime_secs)).unwrap_or(0.0),
            }
        })
        .collect()
}

/// First `p` where a decreasing curve crosses `level`, by linear
/// interpolation between grid points, searching from index `from`.
pub fn crossing(ps: &[f64], rates: &[f64], level: f64, from: usize) -> Option<(f64, usize)> {
    if rates.get(from).is_some_and(|&r| r < level) {
        return Some((ps[from], from));
    }
    for i in from..rates.len().saturating_sub(1) {
        let (a, b) = (rates[i], rates[i + 1]);
        if a >= level && b < level {
            let t = (a - level) / (a - b);
            return Some((ps[i] + t * (ps[i + 1] - ps[i]), i));
        }
    }
    None
}

fn interpolate(ps: &[f64], ys: &[f64], p: f64) -> f64 {
    if p <= ps[0] {
        return ys[0];
    }
    for i in 0..ps.len() - 1 {
        if p <= ps[i + 1] {
            let t = (p - ps[i]) / (ps[i + 1] - ps[i]);
            return ys[i] + t * (ys[i + 1] - ys[i]);
        }
    }
    *ys.last().expect("non-empty curve")
}

/// Width and weak/strong gap per size from phase-transition summary rows.
pub fn transition_stats(summary: &[SummaryRow]) -> Vec<TransitionStats> {
    let mut sizes: Vec<usize> = summary.iter().map(|r| r.k).collect();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let curve = |method: &str| -> (Vec<f64>, Vec<f64>) {
                let mut pts: Vec<(f64, f64)> = summary
                    .iter()
                    .filter(|r| r.k == n && r.method == method)
                    .map(|r| (r.p, r.rate))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                pts.into_iter().unzip()
            };
            let (ps, strong) = curve("theta_strong");
            let (_, weak) = curve("theta_weak");
            let at90 = crossing(&ps, &strong, 0.9, 0);
            let at50 = at90.and_then(|(_, i)| crossing(&ps, &strong, 0.5, i));
            let at10 = at50.and_then(|(_, i)| crossing(&ps, &strong, 0.1, i));
            let gap = at50.map(|(p, _)| interpolate(&ps, &weak, p) - interpolate(&ps, &strong, p));
            TransitionStats {
                n,
                p_at_90: at90.map(|x| x.0),
                p_at_50: at50.map(|x| x.0),
                p_at_10: at10.map(|x| x.0),
                width: at90.zip(at10).map(|(a, b)| b.0 - a.0),
                gap_at_midpoint: gap,
            }
        })
        .collect()
}

pub fn write_records<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{other:?}")),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{other:?}")),
    })?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Serialize)]
struct RunInfo<'a> {
    schema: &'a str,
    config: &'a ExperimentConfig,
    transitions: &'a [TransitionStats],
    records: usize,
    elapsed_secs: f64,
    crate_version: &'a str,
    os: &'a str,
    arch: &'a str,
}

/// Writes `trials.csv`, `summary.csv` and `run.json` into `dir`.
pub fn write_outputs(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_records(&dir.join("trials.csv"), &out.records)?;
    write_records(&dir.join("summary.csv"), &out.summary)?;
    let info = RunInfo {
        schema: SCHEMA,
        config: &out.config,
        transitions: &out.transitions,
        records: out.records.len(),
        elapsed_secs: out.elapsed_secs,
        crate_version: env!("CARGO_PKG_VERSION"),
        os: std::env::consts::OS,
        arch: std::env::consts::ARCH,
    };
    let path = dir.join("run.json");
    let text = serde_json::to_string_pretty(&info)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}
