use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use thetacover::baselines::{self, default_lambda_grid, BaselineResult};
use thetacover::certificate::{
    build_canonical, deterministic_recovery, project_certificate, ProjectionOptions, RecoveryOptions,
};
use thetacover::experiment::{self, ConfigFile, ExperimentConfig, ExperimentKind};
use thetacover::graph::{generate_planted, read_graph, GraphDocument};
use thetacover::oracle::{clique_cover_number, stability_number, Budget};
use thetacover::sdp::{classify_recovery, solve_theta, ConicOptions};
use thetacover::symmat::CERT_TOL;
use thetacover::{CliquePartition, Error};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "thetacover", version, about = "Planted clique covers and the Lovász theta function")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solver tolerance.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Output file (or directory for `experiment`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Exit with code 4 when a solver does not converge or an oracle runs out of budget.
    #[arg(long, global = true)]
    strict: bool,
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a planted clique-cover instance.
    Generate {
        /// Block sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// Cross-block edge probability.
        #[arg(long)]
        p: f64,
    },
    /// Compute theta and, when the file carries a partition, classify recovery.
    Theta {
        graph: PathBuf,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Run the deterministic certificate pipeline on a planted instance.
    Certify {
        graph: PathBuf,
        #[arg(long, default_value_t = CERT_TOL)]
        tol: f64,
        /// Directory receiving z_star.csv and z_prime.csv.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Exact clique cover number and stability number.
    Cover {
        graph: PathBuf,
        #[arg(long)]
        max_nodes: Option<u64>,
        /// Wall-clock budget in seconds.
        #[arg(long)]
        max_time: Option<f64>,
    },
    /// Run a competing relaxation against the file's planted partition.
    Baseline {
        graph: PathBuf,
        #[arg(long, value_enum)]
        method: BaselineKind,
        /// Single λ for deconvolution; the default grid is swept otherwise.
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Run a sweep and write trials.csv, summary.csv and run.json.
    Experiment {
        #[arg(value_enum)]
        kind: Option<KindArg>,
        /// TOML config; command-line flags override its keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Deconvolution,
    Kdc,
    Schurhorn,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Comparison,
    IlpGap,
    PhaseTransition,
    Certify,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Comparison => ExperimentKind::Comparison,
            KindArg::IlpGap => ExperimentKind::IlpGap,
            KindArg::PhaseTransition => ExperimentKind::PhaseTransition,
            KindArg::Certify => ExperimentKind::Certify,
        }
    }
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Parse(_) | Error::Json(_) | Error::Csv(_) => EXIT_IO,
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::InvalidGraph(_)
            | Error::InvalidPartition(_)
            | Error::Inapplicable(_)
            | Error::Dimension(_) => EXIT_USAGE,
            Error::NotConverged | Error::Inexact => EXIT_NOT_CONVERGED,
            _ => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn not_converged(what: &str) -> Failure {
    Failure {
        code: EXIT_NOT_CONVERGED,
        message: format!("{what} (--strict)"),
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let c = &cli.common;
    match cli.command {
        Command::Generate { sizes, p } => generate(c, &sizes, p),
        Command::Theta { graph, max_iter } => theta(c, &graph, max_iter),
        Command::Certify { graph, tol, dump } => certify(c, &graph, tol, dump.as_deref()),
        Command::Cover {
            graph,
            max_nodes,
            max_time,
        } => cover(c, &graph, max_nodes, max_time),
        Command::Baseline {
            graph,
            method,
            lambda,
        } => baseline(c, &graph, method, lambda),
        Command::Experiment {
            kind,
            config,
            trials,
        } => run_experiment(c, kind.map(Into::into), config.as_deref(), trials),
    }
}

fn conic(c: &Common) -> ConicOptions {
    let mut opts = ConicOptions::default();
    if let Some(eps) = c.eps {
        opts.eps = eps;
    }
    opts
}

fn emit(c: &Common, text: String, value: serde_json::Value) -> Outcome {
    let body = if c.json {
        serde_json::to_string_pretty(&value).map_err(Error::from)?
    } else {
        text
    };
    println!("{body}");
    if let Some(path) = &c.out {
        let pretty = serde_json::to_string_pretty(&value).map_err(Error::from)?;
        fs::write(path, pretty).map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("cannot write {}: {e}", path.display()),
        })?;
    }
    Ok(())
}

fn partition_of(doc: &GraphDocument, path: &Path) -> Result<CliquePartition, Failure> {
    doc.partition
        .clone()
        .ok_or_else(|| usage(format!("{} carries no planted partition (`blocks`)", path.display())))
}

fn generate(c: &Common, sizes: &[usize], p: f64) -> Outcome {
    let inst = generate_planted(sizes, p, c.seed.unwrap_or(0))?;
    let doc = GraphDocument::from(inst);
    match &c.out {
        Some(path) => {
            thetacover::graph::write_graph(path, &doc)?;
            eprintln!(
                "wrote {} ({} vertices, {} edges)",
                path.display(),
                doc.graph.n(),
                doc.graph.edge_count()
            );
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{}", doc.to_json()).map_err(|e| Failure {
                code: EXIT_IO,
                message: e.to_string(),
            })?;
        }
    }
    Ok(())
}

fn theta(c: &Common, path: &Path, max_iter: Option<usize>) -> Outcome {
    let doc = read_graph(path)?;
    let mut opts = conic(c);
    if let Some(m) = max_iter {
        opts.max_iter = m;
    }
    let sol = solve_theta(&doc.graph, &opts)?;
    let recovery = match &doc.partition {
        Some(part) => match classify_recovery(&sol, part, 1e-3 * part.k() as f64, 1e-3) {
            Ok(r) => Some(r.as_str()),
            Err(Error::NotConverged) => Some("not_converged"),
            Err(e) => return Err(e.into()),
        },
        None => None,
    };
    let mut text = format!(
        "theta = {:.8}\niterations = {}\nconverged = {}\nresiduals = primal {:.2e}, dual {:.2e}, gap {:.2e}",
        sol.theta, sol.iterations, sol.converged, sol.primal_residual, sol.dual_residual, sol.gap
    );
    if let (Some(part), Some(r)) = (&doc.partition, recovery) {
        text.push_str(&format!("\nk = {}\nrecovery = {r}", part.k()));
    }
    emit(
        c,
        text,
        json!({
            "theta": sol.theta,
            "iterations": sol.iterations,
            "converged": sol.converged,
            "primal_residual": sol.primal_residual,
            "dual_residual": sol.dual_residual,
            "gap": sol.gap,
            "k": doc.partition.as_ref().map(|p| p.k()),
            "recovery": recovery,
        }),
    )?;
    if c.strict && !sol.converged {
        return Err(not_converged("theta solver did not converge"));
    }
    Ok(())
}

fn certify(c: &Common, path: &Path, tol: f64, dump: Option<&Path>) -> Outcome {
    let doc = read_graph(path)?;
    let part = partition_of(&doc, path)?;
    let report = deterministic_recovery(
        &doc.graph,
        &part,
        RecoveryOptions {
            tol,
            ..RecoveryOptions::default()
        },
    )?;
    let verdict = match &report.verdict {
        thetacover::Verdict::Certified => "Certified".to_string(),
        thetacover::Verdict::NotCertified(why) => format!("NotCertified ({why})"),
    };
    let r = &report.residuals;
    let text = format!(
        "verdict: {verdict}\npsd {} | support {} | complementarity {} | rank {} ({}/{}) | extreme point {}\nc_min = {:.4}, threshold = {:.4}",
        report.psd_ok,
        report.support_ok,
        report.complementarity_ok,
        report.rank_ok,
        r.rank,
        r.expected_rank,
        report.extreme_point_ok,
        r.c_min.unwrap_or(f64::NAN),
        r.recovery_threshold.unwrap_or(f64::NAN),
    );
    let value = serde_json::to_value(&report).map_err(Error::from)?;
    if let Some(dir) = dump {
        fs::create_dir_all(dir).map_err(|e| Failure {
            code: EXIT_IO,
            message: format!("cannot create {}: {e}", dir.display()),
        })?;
        let projected = project_certificate(&doc.graph, &part, ProjectionOptions::default())?;
        build_canonical(&part).z_star.write_csv(&dir.join("z_star.csv"))?;
        projected.z_prime.write_csv(&dir.join("z_prime.csv"))?;
    }
    emit(c, text, value)
}

fn cover(c: &Common, path: &Path, max_nodes: Option<u64>, max_time: Option<f64>) -> Outcome {
    let doc = read_graph(path)?;
    let mut budget = Budget::default();
    if let Some(n) = max_nodes {
        budget.max_nodes = n;
    }
    if let Some(t) = max_time {
        if !(t > 0.0) {
            return Err(usage("--max-time must be positive"));
        }
        budget.max_time = Some(Duration::from_secs_f64(t));
    }
    let cov = clique_cover_number(&doc.graph, budget);
    let alpha = stability_number(&doc.graph, budget);
    let cover_note = if cov.exact {
        String::new()
    } else {
        format!(" (upper bound; lower bound {})", cov.lower_bound)
    };
    let alpha_note = if alpha.exact { "" } else { " (lower bound)" };
    let text = format!(
        "chi_bar = {}{cover_note}\nalpha = {}{alpha_note}\nnodes = {}\ncover = {:?}",
        cov.value,
        alpha.value,
        cov.nodes_explored + alpha.nodes_explored,
        cov.cover
    );
    emit(c, text, json!({ "cover": cov, "stability": alpha }))?;
    if c.strict && !(cov.exact && alpha.exact) {
        return Err(not_converged("oracle budget exhausted"));
    }
    Ok(())
}

fn baseline(c: &Common, path: &Path, method: BaselineKind, lambda: Option<f64>) -> Outcome {
    let doc = read_graph(path)?;
    let part = partition_of(&doc, path)?;
    let opts = conic(c);
    let g = &doc.graph;
    let results: Vec<BaselineResult> = match method {
        BaselineKind::Deconvolution => {
            let grid = lambda.map_or_else(default_lambda_grid, |l| vec![l]);
            baselines::sweep_lambda(g, &part, &grid, &opts)?.per_lambda
        }
        BaselineKind::Kdc => vec![baselines::solve_kdc(g, &part, part.k(), &opts)?],
        BaselineKind::Schurhorn => vec![baselines::solve_schurhorn(g, &part, &opts)?],
    };
    let text = results
        .iter()
        .map(|r| {
            format!(
                "{:?}: success {} | distance {:.3e} | iterations {} | converged {}",
                r.method, r.success, r.distance, r.iterations, r.converged
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let any_success = results.iter().any(|r| r.success);
    let all_converged = results.iter().all(|r| r.converged);
    emit(
        c,
        format!("{text}\nsuccess = {any_success}"),
        json!({ "success": any_success, "runs": results }),
    )?;
    if c.strict && !all_converged {
        return Err(not_converged("baseline solver did not converge"));
    }
    Ok(())
}

fn run_experiment(
    c: &Common,
    kind: Option<ExperimentKind>,
    config: Option<&Path>,
    trials: Option<usize>,
) -> Outcome {
    let mut file = match config {
        Some(p) => ConfigFile::read(p)?,
        None => ConfigFile::default(),
    };
    if kind.is_some() {
        file.kind = kind;
    }
    if c.seed.is_some() {
        file.seed = c.seed;
    }
    if c.eps.is_some() {
        file.eps = c.eps;
    }
    if c.jobs.is_some() {
        file.jobs = c.jobs;
    }
    if trials.is_some() {
        file.trials = trials;
    }
    if c.out.is_some() {
        file.out = c.out.clone();
    }
    let mut cfg = ExperimentConfig::from_file(file, None)
        .map_err(|e| usage(format!("{e} (give a kind or a config file with `kind`)")))?;
    let dir = cfg
        .out
        .get_or_insert_with(|| PathBuf::from("results").join(cfg.kind.as_str()))
        .clone();
    let out = experiment::run_experiment(&cfg)?;
    experiment::write_outputs(&dir, &out)?;
    if c.json {
        let rows = serde_json::to_value(&out.summary).map_err(Error::from)?;
        println!("{}", serde_json::to_string_pretty(&rows).map_err(Error::from)?);
    } else {
        for r in &out.summary {
            println!("{:>6} p={:.2} {:<14} rate {:.2} ({}/{})", r.sizes, r.p, r.method, r.rate, r.successes, r.trials);
        }
        for t in &out.transitions {
            println!(
                "n={} width={} gap_at_midpoint={}",
                t.n,
                t.width.map_or("none".into(), |w| format!("{w:.3}")),
                t.gap_at_midpoint.map_or("none".into(), |g| format!("{g:.3}"))
            );
        }
    }
    eprintln!(
        "{} records in {:.1}s written to {}",
        out.records.len(),
        out.elapsed_secs,
        dir.display()
    );
    let unconverged = out
        .records
        .iter()
        .filter(|r| r.converged == Some(false) || r.exact == Some(false))
        .count();
    if c.strict && unconverged > 0 {
        return Err(not_converged(&format!(
            "{unconverged} trial records did not converge or ran out of oracle budget"
        )));
    }
    Ok(())
}
