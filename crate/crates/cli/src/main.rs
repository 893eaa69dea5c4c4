mod output;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use realzeros::{
    estimate_covariance, estimate_limit_process_zero_count, estimate_mean_zero_count,
    oracle_agreement, CoeffDistribution, CovarianceConfig, EnsembleKind, ExperimentConfig,
    ExperimentResult, GridParams, IntervalSpec, LimitZeroEstimate, OracleCheckConfig,
    DEFAULT_TAIL_EPS,
};

use output::{Artifacts, Csv, RunManifest};

const TOOL_VERSION: &str = concat!("realzeros ", env!("CARGO_PKG_VERSION"));
const ORACLE_MIN_AGREEMENT: f64 = 0.99;

/// Monte Carlo experiments on the real zeros of Gaussian-analytic-type random
/// functions (spherical, flat, hyperbolic and Weyl ensembles).
///
/// Exit status: 0 on success, 2 on invalid input, 3 on a numerical failure
/// (including an oracle check below the agreement threshold), 1 on I/O errors.
#[derive(Parser, Debug)]
#[command(name = "realzeros", version, about)]
struct Cli {
    /// Directory receiving the CSV and JSON outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Overrides the master seed of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the limiting zero density (1/2π)·√(p′/t + p″) and γ(t).
    ///
    /// Writes density.csv with columns t,density,gamma.
    Density {
        #[arg(long)]
        ensemble: EnsembleKind,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        /// Number of grid points, endpoints included.
        #[arg(long, default_value_t = 101)]
        steps: usize,
    },
    /// Estimate E N_n[a, b] over a sweep of n from a JSON experiment config.
    ///
    /// Writes simulate.csv with columns
    /// n,trials,mean_count,stderr,scaled_mean,theory,abs_error,nonconverged
    /// and simulate.json holding the full result and its run manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Also write (t, S_n(t)) for the first trial of every n.
        #[arg(long)]
        dump_realization: bool,
        /// Points in each realization dump.
        #[arg(long, default_value_t = 1001)]
        dump_points: usize,
    },
    /// Second moments of the window process S_n(t + x/√n) against
    /// e^{−γ(t)(x_i − x_j)²/2}.
    ///
    /// Writes covariance.csv with columns i,j,x_i,x_j,empirical,limit,abs_error.
    Covariance {
        #[arg(long)]
        ensemble: EnsembleKind,
        #[arg(long, default_value = "StandardGaussian")]
        distribution: CoeffDistribution,
        #[arg(long)]
        n: u64,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        /// Comma-separated offsets x_i.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            default_value = "0,0.5,1,2"
        )]
        offsets: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = DEFAULT_TAIL_EPS)]
        tail_eps: f64,
    },
    /// Mean zero count of the limit process Z_γ on [0, δ] against δ√γ/π.
    ///
    /// Writes limit_process.csv with columns
    /// gamma,delta,trials,mean,stderr,theory,nonconverged.
    LimitProcess {
        /// Comma-separated γ values.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        gamma: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        delta: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Compare grid counts with companion-matrix roots on random SP/WP
    /// polynomials.
    ///
    /// Writes oracle_check.csv with columns
    /// index,ensemble,n,distribution,a,b,grid_count,oracle_count,converged,final_step,explanation.
    OracleCheck {
        #[arg(long, default_value_t = 500)]
        instances: u64,
        #[arg(long, default_value_t = 5)]
        n_min: u64,
        #[arg(long, default_value_t = 50)]
        n_max: u64,
        #[arg(long, default_value_t = 1e-8)]
        im_tol: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, default_value_t = GridParams::default().points_per_spacing)]
    points_per_spacing: u32,
    #[arg(long, default_value_t = GridParams::default().max_refinements)]
    max_refinements: u32,
}

impl GridArgs {
    fn params(&self) -> GridParams {
        GridParams {
            points_per_spacing: self.points_per_spacing,
            max_refinements: self.max_refinements,
            ..GridParams::default()
        }
    }
}

enum Failure {
    Validation(String),
    Numerical(String),
    Io(anyhow::Error),
}

impl From<realzeros::Error> for Failure {
    fn from(e: realzeros::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Io(e)
    }
}

type CmdResult = Result<(), Failure>;

struct Run<'a> {
    out_dir: &'a Path,
    started_at: String,
    clock: Instant,
}

impl Run<'_> {
    fn manifest<C: Serialize>(
        &self,
        config: C,
        seed: u64,
        artifacts: &Artifacts,
    ) -> RunManifest<C> {
        RunManifest {
            config_echo: config,
            master_seed: seed,
            tool_version: TOOL_VERSION,
            started_at: self.started_at.clone(),
            wall_time_s: self.clock.elapsed().as_secs_f64(),
            artifacts: artifacts.names(),
        }
    }

    fn commit(&self, artifacts: Artifacts) -> CmdResult {
        for path in artifacts.commit()? {
            println!("wrote {}", path.display());
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct DensityConfig {
    ensemble: EnsembleKind,
    a: f64,
    b: f64,
    steps: usize,
}

fn density(run: &Run, cfg: DensityConfig) -> CmdResult {
    let iv = IntervalSpec::new(cfg.a, cfg.b)?;
    iv.check_for(cfg.ensemble)?;
    if cfg.steps < 2 {
        return Err(Failure::Validation(format!(
            "steps must be at least 2, got {}",
            cfg.steps
        )));
    }
    let mut csv = Csv::new(&["t", "density", "gamma"]);
    for i in 0..cfg.steps {
        let t = if i + 1 == cfg.steps {
            cfg.b
        } else {
            cfg.a + (cfg.b - cfg.a) * i as f64 / (cfg.steps - 1) as f64
        };
        csv.row(&[&t, &cfg.ensemble.density(t)?, &cfg.ensemble.gamma(t)?]);
    }
    let mut out = Artifacts::new(run.out_dir);
    out.add("density.csv", csv.into_bytes());
    let manifest = run.manifest(&cfg, 0, &out);
    out.add_json("density.json", &manifest)?;
    run.commit(out)
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    #[serde(flatten)]
    result: &'a ExperimentResult,
    manifest: RunManifest<&'a ExperimentConfig>,
}

fn simulate(
    run: &Run,
    config: &Path,
    seed: Option<u64>,
    dump_realization: bool,
    dump_points: usize,
) -> CmdResult {
    let text = std::fs::read_to_string(config)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", config.display())))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Validation(format!("invalid config {}: {e}", config.display())))?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    if dump_realization && dump_points < 2 {
        return Err(Failure::Validation(format!(
            "dump-points must be at least 2, got {dump_points}"
        )));
    }
    let result = estimate_mean_zero_count(&cfg)?;

    let mut csv = Csv::new(&[
        "n",
        "trials",
        "mean_count",
        "stderr",
        "scaled_mean",
        "theory",
        "abs_error",
        "nonconverged",
    ]);
    for r in &result.per_n {
        csv.row(&[
            &r.n,
            &r.trials,
            &r.mean_count,
            &r.stderr,
            &r.scaled_mean,
            &r.theory,
            &r.abs_error,
            &r.nonconverged_trials,
        ]);
        println!(
            "n={} mean={:.6} stderr={:.6} scaled={:.6} theory={:.6} nonconverged={}",
            r.n, r.mean_count, r.stderr, r.scaled_mean, r.theory, r.nonconverged_trials
        );
    }
    let mut out = Artifacts::new(run.out_dir);
    out.add("simulate.csv", csv.into_bytes());
    if dump_realization {
        let (a, b) = (cfg.interval.a, cfg.interval.b);
        for (j, &n) in cfg.n_values.iter().enumerate() {
            let f = cfg.realize(n, cfg.trial_index(j, 0))?;
            let mut dump = Csv::new(&["t", "value"]);
            for i in 0..dump_points {
                let t = if i + 1 == dump_points {
                    b
                } else {
                    a + (b - a) * i as f64 / (dump_points - 1) as f64
                };
                dump.row(&[&t, &f.eval_normalized(t)?]);
            }
            out.add(format!("realization_n{n}.csv"), dump.into_bytes());
        }
    }
    let summary = SimulateSummary {
        result: &result,
        manifest: run.manifest(&cfg, cfg.master_seed, &out),
    };
    out.add_json("simulate.json", &summary)?;
    run.commit(out)
}

fn covariance(run: &Run, cfg: CovarianceConfig) -> CmdResult {
    let est = estimate_covariance(&cfg)?;
    let mut csv = Csv::new(&["i", "j", "x_i", "x_j", "empirical", "limit", "abs_error"]);
    for (i, xi) in cfg.offsets.iter().enumerate() {
        for (j, xj) in cfg.offsets.iter().enumerate() {
            let (e, l) = (est.empirical[i][j], est.limit[i][j]);
            csv.row(&[&i, &j, xi, xj, &e, &l, &(e - l).abs()]);
        }
    }
    println!(
        "gamma(t)={:.6} max_abs_error={:.6} trials={}",
        est.gamma,
        est.max_abs_error(),
        est.trials
    );
    #[derive(Serialize)]
    struct Summary<'a> {
        estimate: &'a realzeros::CovarianceEstimate,
        manifest: RunManifest<&'a CovarianceConfig>,
    }
    let mut out = Artifacts::new(run.out_dir);
    out.add("covariance.csv", csv.into_bytes());
    let summary = Summary {
        estimate: &est,
        manifest: run.manifest(&cfg, cfg.master_seed, &out),
    };
    out.add_json("covariance.json", &summary)?;
    run.commit(out)
}

#[derive(Serialize)]
struct LimitProcessConfig {
    gamma: Vec<f64>,
    delta: f64,
    trials: u64,
    master_seed: u64,
    grid: GridParams,
}

fn limit_process(run: &Run, cfg: LimitProcessConfig) -> CmdResult {
    if cfg.gamma.is_empty() {
        return Err(Failure::Validation("at least one gamma is required".into()));
    }
    let estimates = cfg
        .gamma
        .iter()
        .map(|&g| {
            estimate_limit_process_zero_count(g, cfg.delta, cfg.trials, cfg.master_seed, &cfg.grid)
        })
        .collect::<Result<Vec<LimitZeroEstimate>, _>>()?;
    let mut csv = Csv::new(&[
        "gamma",
        "delta",
        "trials",
        "mean",
        "stderr",
        "theory",
        "nonconverged",
    ]);
    for e in &estimates {
        csv.row(&[
            &e.gamma,
            &e.delta,
            &e.trials,
            &e.mean,
            &e.stderr,
            &e.theory,
            &e.nonconverged_trials,
        ]);
        println!(
            "gamma={} mean={:.6} stderr={:.6} theory={:.6}",
            e.gamma, e.mean, e.stderr, e.theory
        );
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        estimates: &'a [LimitZeroEstimate],
        manifest: RunManifest<&'a LimitProcessConfig>,
    }
    let mut out = Artifacts::new(run.out_dir);
    out.add("limit_process.csv", csv.into_bytes());
    let summary = Summary {
        estimates: &estimates,
        manifest: run.manifest(&cfg, cfg.master_seed, &out),
    };
    out.add_json("limit_process.json", &summary)?;
    run.commit(out)
}

fn oracle_check(run: &Run, cfg: OracleCheckConfig) -> CmdResult {
    let report = oracle_agreement(&cfg)?;
    let mut csv = Csv::new(&[
        "index",
        "ensemble",
        "n",
        "distribution",
        "a",
        "b",
        "grid_count",
        "oracle_count",
        "converged",
        "final_step",
        "explanation",
    ]);
    for i in &report.instances {
        let explanation: &dyn Display = &i.explanation.as_deref().unwrap_or("");
        csv.row(&[
            &i.index,
            &i.ensemble,
            &i.n,
            &i.distribution,
            &i.a,
            &i.b,
            &i.grid_count,
            &i.oracle_count,
            &i.converged,
            &i.final_step,
            explanation,
        ]);
    }
    for d in report.disagreements() {
        println!(
            "disagreement #{} {} n={} [{}, {}]: grid {} vs oracle {} ({})",
            d.index,
            d.ensemble,
            d.n,
            d.a,
            d.b,
            d.grid_count,
            d.oracle_count,
            d.explanation.as_deref().unwrap_or("")
        );
    }
    println!(
        "agreement {} over {} instances",
        report.agreement,
        report.instances.len()
    );
    #[derive(Serialize)]
    struct Summary<'a> {
        agreement: f64,
        disagreements: Vec<&'a realzeros::OracleInstance>,
        manifest: RunManifest<&'a OracleCheckConfig>,
    }
    let mut out = Artifacts::new(run.out_dir);
    out.add("oracle_check.csv", csv.into_bytes());
    let summary = Summary {
        agreement: report.agreement,
        disagreements: report.disagreements().collect(),
        manifest: run.manifest(&cfg, cfg.master_seed, &out),
    };
    out.add_json("oracle_check.json", &summary)?;
    run.commit(out)?;
    if report.agreement < ORACLE_MIN_AGREEMENT {
        return Err(Failure::Numerical(format!(
            "oracle agreement {} is below {ORACLE_MIN_AGREEMENT}",
            report.agreement
        )));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CmdResult {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Validation("threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Io(e.into()))?;
    }
    let run = Run {
        out_dir: &cli.out_dir,
        started_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        clock: Instant::now(),
    };
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Density {
            ensemble,
            a,
            b,
            steps,
        } => density(
            &run,
            DensityConfig {
                ensemble,
                a,
                b,
                steps,
            },
        ),
        Command::Simulate {
            config,
            dump_realization,
            dump_points,
        } => simulate(&run, &config, cli.seed, dump_realization, dump_points),
        Command::Covariance {
            ensemble,
            distribution,
            n,
            t,
            offsets,
            trials,
            tail_eps,
        } => covariance(
            &run,
            CovarianceConfig {
                ensemble,
                distribution,
                n,
                t,
                offsets,
                trials,
                master_seed: seed,
                tail_eps,
            },
        ),
        Command::LimitProcess {
            gamma,
            delta,
            trials,
            grid,
        } => limit_process(
            &run,
            LimitProcessConfig {
                gamma,
                delta,
                trials,
                master_seed: seed,
                grid: grid.params(),
            },
        ),
        Command::OracleCheck {
            instances,
            n_min,
            n_max,
            im_tol,
            grid,
        } => oracle_check(
            &run,
            OracleCheckConfig {
                instances,
                master_seed: seed,
                n_min,
                n_max,
                im_tol,
                grid: grid.params(),
            },
        ),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
