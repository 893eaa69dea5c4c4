//! Monte Carlo experiments.
//!
//! Trials are independent work items keyed by `(master_seed, trial_index)`
//! and run on the ambient rayon pool. Integer zero counts are aggregated
//! exactly and float statistics are reduced in trial-index order, so results
//! do not depend on the number of worker threads.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{EnsembleKind, IntervalSpec};
use crate::error::{Error, Result};
use crate::evaluate::{LimitProcessSample, SampleFunction, DEFAULT_TAIL_EPS};
use crate::sampling::{trial_seed, CoeffDistribution, TrialStream};
use crate::special::NeumaierSum;
use crate::zeros::{
    count_zeros_grid, oracle_real_roots, polynomial_roots, GridParams, ZeroCountReport,
};

fn default_tail_eps() -> f64 {
    DEFAULT_TAIL_EPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleKind,
    pub distribution: CoeffDistribution,
    pub n_values: Vec<u64>,
    pub interval: IntervalSpec,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default = "default_tail_eps")]
    pub tail_eps: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.interval.check_for(self.ensemble)?;
        self.distribution.validate()?;
        self.grid.validate()?;
        if self.trials < 2 {
            return Err(Error::InvalidParameter(format!(
                "trials must be at least 2, got {}",
                self.trials
            )));
        }
        if self.n_values.is_empty() {
            return Err(Error::InvalidParameter("n_values must not be empty".into()));
        }
        if self.n_values.contains(&0) {
            return Err(Error::InvalidParameter("every n must be positive".into()));
        }
        if !(self.tail_eps > 0.0 && self.tail_eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tail_eps must lie in (0, 1), got {}",
                self.tail_eps
            )));
        }
        Ok(())
    }

    /// Global trial index of trial `i` for the `j`-th entry of `n_values`.
    pub fn trial_index(&self, j: usize, i: u64) -> u64 {
        j as u64 * self.trials + i
    }

    /// Grid density for degree `n`: √(n·max γ)/π zeros per unit length.
    pub fn expected_rate(&self, n: u64) -> Result<f64> {
        Ok((n as f64 * self.ensemble.max_gamma(&self.interval)?).sqrt() / PI)
    }

    /// The realized function of one trial.
    pub fn realize(&self, n: u64, trial_index: u64) -> Result<SampleFunction> {
        let stream = TrialStream::new(self.master_seed, trial_index, self.distribution);
        SampleFunction::draw(
            self.ensemble,
            n,
            self.interval.max_abs(),
            self.tail_eps,
            &stream,
        )
    }

    /// Zero count of one trial.
    pub fn run_trial(&self, n: u64, trial_index: u64) -> Result<ZeroCountReport> {
        let sample = self.realize(n, trial_index)?;
        count_zeros_grid(
            |t| sample.eval_unchecked(t),
            &self.interval,
            self.expected_rate(n)?,
            &self.grid,
        )
    }
}

/// Statistics for one degree n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NRow {
    pub n: u64,
    pub trials: u64,
    pub mean_count: f64,
    pub stderr: f64,
    /// mean_count / √n
    pub scaled_mean: f64,
    /// The limit of E N_n[a, b] / √n.
    pub theory: f64,
    /// |scaled_mean − theory|
    pub abs_error: f64,
    pub nonconverged_trials: u64,
    pub total_count: u64,
    pub total_count_sq: u64,
}

impl NRow {
    fn from_reports(n: u64, theory: f64, reports: &[ZeroCountReport]) -> Self {
        let trials = reports.len() as u64;
        let total_count: u64 = reports.iter().map(|r| r.count as u64).sum();
        let total_count_sq: u64 = reports.iter().map(|r| (r.count as u64).pow(2)).sum();
        let nonconverged_trials = reports.iter().filter(|r| !r.converged).count() as u64;
        let (mean_count, stderr) = mean_and_stderr(total_count, total_count_sq, trials);
        let scaled_mean = mean_count / (n as f64).sqrt();
        Self {
            n,
            trials,
            mean_count,
            stderr,
            scaled_mean,
            theory,
            abs_error: (scaled_mean - theory).abs(),
            nonconverged_trials,
            total_count,
            total_count_sq,
        }
    }
}

/// Mean and standard error from exact integer sums.
fn mean_and_stderr(sum: u64, sum_sq: u64, trials: u64) -> (f64, f64) {
    let t = trials as f64;
    let mean = sum as f64 / t;
    if trials < 2 {
        return (mean, f64::NAN);
    }
    // T·Σx² − (Σx)² is an exact integer.
    let centered = trials as u128 * sum_sq as u128 - (sum as u128) * (sum as u128);
    let var = centered as f64 / (t * (t - 1.0));
    (mean, (var / t).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub per_n: Vec<NRow>,
    pub config_echo: ExperimentConfig,
    pub wall_time_s: f64,
}

pub fn estimate_mean_zero_count(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let start = Instant::now();
    let theory = config.ensemble.expected_zero_rate(&config.interval)?;
    let mut per_n = Vec::with_capacity(config.n_values.len());
    for (j, &n) in config.n_values.iter().enumerate() {
        let reports = (0..config.trials)
            .into_par_iter()
            .map(|i| config.run_trial(n, config.trial_index(j, i)))
            .collect::<Result<Vec<_>>>()?;
        per_n.push(NRow::from_reports(n, theory, &reports));
    }
    Ok(ExperimentResult {
        per_n,
        config_echo: config.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub scaled_mean: f64,
    pub scaled_stderr: f64,
    pub theory: f64,
    pub abs_error: f64,
}

/// Sweep over `base.n_values` in increasing n. The error column is reported,
/// not asserted.
pub fn convergence_study(base: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    let mut config = base.clone();
    config.n_values.sort_unstable();
    config.n_values.dedup();
    let result = estimate_mean_zero_count(&config)?;
    Ok(result
        .per_n
        .iter()
        .map(|r| ConvergenceRow {
            n: r.n,
            scaled_mean: r.scaled_mean,
            scaled_stderr: r.stderr / (r.n as f64).sqrt(),
            theory: r.theory,
            abs_error: r.abs_error,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    pub ensemble: EnsembleKind,
    pub distribution: CoeffDistribution,
    pub n: u64,
    pub t: f64,
    pub offsets: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default = "default_tail_eps")]
    pub tail_eps: f64,
}

impl CovarianceConfig {
    /// Points t + x/√n at which the window process is observed.
    pub fn points(&self) -> Vec<f64> {
        let scale = (self.n as f64).sqrt();
        self.offsets.iter().map(|x| self.t + x / scale).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if self.t == 0.0 {
            return Err(Error::ZeroPoint);
        }
        if !self.ensemble.in_domain(self.t) {
            return Err(Error::Domain {
                ensemble: self.ensemble,
                t: self.t,
            });
        }
        if self.offsets.is_empty() {
            return Err(Error::InvalidParameter("offsets must not be empty".into()));
        }
        for p in self.points() {
            if !self.ensemble.in_domain(p) {
                return Err(Error::Domain {
                    ensemble: self.ensemble,
                    t: p,
                });
            }
        }
        if self.trials < 1 {
            return Err(Error::InvalidParameter("trials must be positive".into()));
        }
        if !(self.tail_eps > 0.0 && self.tail_eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tail_eps must lie in (0, 1), got {}",
                self.tail_eps
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub offsets: Vec<f64>,
    /// γ(t) of the limiting window process.
    pub gamma: f64,
    /// Empirical E[Q_{n,t}(x_i) Q_{n,t}(x_j)].
    pub empirical: Vec<Vec<f64>>,
    /// e^{−γ(t)(x_i − x_j)²/2}
    pub limit: Vec<Vec<f64>>,
    pub trials: u64,
}

impl CovarianceEstimate {
    pub fn max_abs_error(&self) -> f64 {
        self.empirical
            .iter()
            .flatten()
            .zip(self.limit.iter().flatten())
            .map(|(e, l)| (e - l).abs())
            .fold(0.0, f64::max)
    }
}

/// Second moments of the window process Q_{n,t}(x) = S_n(t + x/√n) at the
/// given offsets. One realization per trial serves all offsets.
pub fn estimate_covariance(config: &CovarianceConfig) -> Result<CovarianceEstimate> {
    config.validate()?;
    let gamma = config.ensemble.gamma(config.t)?;
    let points = config.points();
    let t_max = points.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let d = points.len();
    let pairs = d * (d + 1) / 2;

    let mut products = vec![0.0; config.trials as usize * pairs];
    products
        .par_chunks_mut(pairs)
        .enumerate()
        .try_for_each(|(i, out)| -> Result<()> {
            let stream = TrialStream::new(config.master_seed, i as u64, config.distribution);
            let sample =
                SampleFunction::draw(config.ensemble, config.n, t_max, config.tail_eps, &stream)?;
            let q: Vec<f64> = points.iter().map(|&p| sample.eval_unchecked(p)).collect();
            let mut idx = 0;
            for a in 0..d {
                for b in a..d {
                    out[idx] = q[a] * q[b];
                    idx += 1;
                }
            }
            Ok(())
        })?;

    let mut sums = vec![NeumaierSum::default(); pairs];
    for chunk in products.chunks_exact(pairs) {
        for (s, &v) in sums.iter_mut().zip(chunk) {
            s.add(v);
        }
    }
    let trials = config.trials as f64;
    let mut empirical = vec![vec![0.0; d]; d];
    let pairs = (0..d).flat_map(|a| (a..d).map(move |b| (a, b)));
    for ((a, b), s) in pairs.zip(&sums) {
        let v = s.value() / trials;
        empirical[a][b] = v;
        empirical[b][a] = v;
    }
    let limit = config
        .offsets
        .iter()
        .map(|xi| {
            config
                .offsets
                .iter()
                .map(|xj| (-0.5 * gamma * (xi - xj).powi(2)).exp())
                .collect()
        })
        .collect();
    Ok(CovarianceEstimate {
        offsets: config.offsets.clone(),
        gamma,
        empirical,
        limit,
        trials: config.trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitZeroEstimate {
    pub gamma: f64,
    pub delta: f64,
    pub trials: u64,
    pub mean: f64,
    pub stderr: f64,
    /// δ√γ/π
    pub theory: f64,
    pub nonconverged_trials: u64,
    pub total_count: u64,
}

/// Mean number of zeros of Z_γ on [0, δ].
pub fn estimate_limit_process_zero_count(
    gamma: f64,
    delta: f64,
    trials: u64,
    seed: u64,
    grid: &GridParams,
) -> Result<LimitZeroEstimate> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if trials < 2 {
        return Err(Error::InvalidParameter(format!(
            "trials must be at least 2, got {trials}"
        )));
    }
    grid.validate()?;
    let window = IntervalSpec::new(0.0, delta)?;
    let rate = gamma.sqrt() / PI;
    let reports = (0..trials)
        .into_par_iter()
        .map(|i| {
            let z = LimitProcessSample::draw(gamma, delta, seed, i)?;
            count_zeros_grid(|u| z.eval_unchecked(u), &window, rate, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let total: u64 = reports.iter().map(|r| r.count as u64).sum();
    let total_sq: u64 = reports.iter().map(|r| (r.count as u64).pow(2)).sum();
    let (mean, stderr) = mean_and_stderr(total, total_sq, trials);
    Ok(LimitZeroEstimate {
        gamma,
        delta,
        trials,
        mean,
        stderr,
        theory: delta * gamma.sqrt() / PI,
        nonconverged_trials: reports.iter().filter(|r| !r.converged).count() as u64,
        total_count: total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCheckConfig {
    pub instances: u64,
    pub master_seed: u64,
    pub n_min: u64,
    pub n_max: u64,
    pub im_tol: f64,
    #[serde(default)]
    pub grid: GridParams,
}

impl Default for OracleCheckConfig {
    fn default() -> Self {
        Self {
            instances: 500,
            master_seed: 0,
            n_min: 5,
            n_max: 50,
            im_tol: 1e-8,
            grid: GridParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub index: u64,
    pub ensemble: EnsembleKind,
    pub n: u64,
    pub distribution: CoeffDistribution,
    pub a: f64,
    pub b: f64,
    pub grid_count: u32,
    pub oracle_count: u32,
    pub converged: bool,
    pub final_step: f64,
    /// Why the two routes disagree; `None` when they agree.
    pub explanation: Option<String>,
}

impl OracleInstance {
    pub fn agrees(&self) -> bool {
        self.grid_count == self.oracle_count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleAgreementReport {
    pub instances: Vec<OracleInstance>,
    pub agreement: f64,
}

impl OracleAgreementReport {
    pub fn disagreements(&self) -> impl Iterator<Item = &OracleInstance> {
        self.instances.iter().filter(|i| !i.agrees())
    }

    /// Disagreements without a boundary, resolution or convergence cause.
    pub fn unexplained(&self) -> usize {
        self.disagreements()
            .filter(|i| i.explanation.as_deref() == Some(UNEXPLAINED))
            .count()
    }
}

const UNEXPLAINED: &str = "unexplained";

/// Random SP/WP instances counted by both the grid and the eigenvalue oracle.
pub fn oracle_agreement(config: &OracleCheckConfig) -> Result<OracleAgreementReport> {
    if config.instances == 0 {
        return Err(Error::InvalidParameter("instances must be positive".into()));
    }
    if !(1 <= config.n_min && config.n_min <= config.n_max) {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= n_min <= n_max, got {}..{}",
            config.n_min, config.n_max
        )));
    }
    if !(config.im_tol > 0.0 && config.im_tol.is_finite()) {
        return Err(Error::InvalidParameter("im_tol must be positive".into()));
    }
    config.grid.validate()?;
    let instances = (0..config.instances)
        .into_par_iter()
        .map(|i| oracle_instance(config, i))
        .collect::<Result<Vec<_>>>()?;
    let agree = instances.iter().filter(|i| i.agrees()).count();
    Ok(OracleAgreementReport {
        agreement: agree as f64 / instances.len() as f64,
        instances,
    })
}

fn oracle_instance(config: &OracleCheckConfig, index: u64) -> Result<OracleInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(!config.master_seed, index));
    let ensemble = if rng.random::<bool>() {
        EnsembleKind::Sp
    } else {
        EnsembleKind::Wp
    };
    let distribution = if rng.random::<bool>() {
        CoeffDistribution::Rademacher
    } else {
        CoeffDistribution::StandardGaussian
    };
    let n = rng.random_range(config.n_min..=config.n_max);
    let (lo, hi) = match ensemble {
        EnsembleKind::Sp => {
            let a = rng.random_range(0.05..2.5);
            (a, a + rng.random_range(0.1..2.0))
        }
        _ => {
            let a = rng.random_range(0.05..0.85);
            (a, a + (0.98 - a) * rng.random_range(0.1..1.0))
        }
    };
    let (a, b) = if rng.random::<bool>() {
        (lo, hi)
    } else {
        (-hi, -lo)
    };
    let interval = IntervalSpec::new(a, b)?;

    let stream = TrialStream::new(config.master_seed, index, distribution);
    let sample = SampleFunction::draw(ensemble, n, interval.max_abs(), DEFAULT_TAIL_EPS, &stream)?;
    let rate = (n as f64 * ensemble.max_gamma(&interval)?).sqrt() / PI;
    let grid = count_zeros_grid(|t| sample.eval_unchecked(t), &interval, rate, &config.grid)?;
    let real_roots = oracle_real_roots(&sample, config.im_tol)?;
    let oracle_count = real_roots.iter().filter(|&&x| x >= a && x <= b).count() as u32;

    let explanation = if grid.count == oracle_count {
        None
    } else {
        Some(explain_disagreement(
            &sample,
            &interval,
            &grid,
            config.im_tol,
        )?)
    };
    Ok(OracleInstance {
        index,
        ensemble,
        n,
        distribution,
        a,
        b,
        grid_count: grid.count,
        oracle_count,
        converged: grid.converged,
        final_step: grid.final_step,
        explanation,
    })
}

fn explain_disagreement(
    sample: &SampleFunction,
    interval: &IntervalSpec,
    grid: &ZeroCountReport,
    im_tol: f64,
) -> Result<String> {
    if !grid.converged {
        return Ok("grid refinement did not converge".into());
    }
    let roots = polynomial_roots(&sample.raw_coeffs().expect("finite family"))?;
    let boundary_tol = 10.0 * im_tol;
    let near_boundary = roots.iter().any(|&(re, im)| {
        im.abs() <= boundary_tol * (1.0 + re.abs())
            && ((re - interval.a).abs() <= boundary_tol * (1.0 + re.abs())
                || (re - interval.b).abs() <= boundary_tol * (1.0 + re.abs()))
    });
    if near_boundary {
        return Ok("root within 10*im_tol of the interval boundary".into());
    }
    // A pair of roots (real or nearly so) closer than the final grid step is
    // below the grid's resolution; eigenvalue error can also split such a
    // pair off the real axis.
    let step = grid.final_step;
    let mut near: Vec<(f64, f64)> = roots
        .into_iter()
        .filter(|&(re, im)| re >= interval.a - step && re <= interval.b + step && im.abs() <= step)
        .collect();
    near.sort_by(|x, y| x.0.total_cmp(&y.0));
    if near.windows(2).any(|w| (w[1].0 - w[0].0).abs() <= step) {
        return Ok("root pair closer than the final grid step".into());
    }
    Ok(UNEXPLAINED.into())
}
