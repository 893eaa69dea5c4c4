//! Evaluation of the variance-normalized random function
//! S_n(t) = P_n(t) / √v_n(t) and of the limit process Z_γ(u).
//!
//! The normalized weights a_{n,k}(t) = f_{n,k}|t|^k / √v_n(t) satisfy
//! Σ_k a²_{n,k}(t) = 1, so every term of S_n is bounded by |ξ_k| and nothing
//! overflows. The squared weights form a unimodal law in k; evaluation starts
//! at its mode and walks outward with the ratio f_{n,k+1}/f_{n,k}, stopping
//! once the weights fall below [`WEIGHT_CUTOFF`]. Only the anchor term needs a
//! log-space exponential.

use serde::{Deserialize, Serialize};

use crate::ensembles::EnsembleKind;
use crate::error::{Error, Result};
use crate::sampling::{CoeffDistribution, TrialStream};
use crate::special::{ln_factorial, NeumaierSum};

pub const DEFAULT_TAIL_EPS: f64 = 1e-16;

/// Weights below this fraction of the peak weight are dropped.
pub const WEIGHT_CUTOFF: f64 = 1e-20;

/// Tail bound for the limit-process series: γ^K u_max^{2K} / K! below this.
const LIMIT_TAIL_TERM: f64 = 1e-26;

fn check_series_domain(ensemble: EnsembleKind, t: f64) -> Result<()> {
    let ok = t.is_finite() && (ensemble != EnsembleKind::Haf || t.abs() < 1.0);
    if ok {
        Ok(())
    } else {
        Err(Error::Domain { ensemble, t })
    }
}

/// Number of coefficients needed so that the squared-weight mass beyond the
/// last one stays below `tail_eps` for every |t| ≤ `t_max`.
///
/// SP and WP are polynomials and need exactly n + 1. For FAF the squared
/// weights at t are Poisson(n t²); for HAF they are negative binomial with
/// mean n t²/(1 − t²). The tail grows with |t|, so certifying at `t_max`
/// covers the whole range. A candidate K = mean + c·sd is tried for
/// c = 1, 2, … until a direct tail sum certifies it, then K is walked down to
/// the smallest certified value.
pub fn truncation_order(
    ensemble: EnsembleKind,
    n: u64,
    t_max: f64,
    tail_eps: f64,
) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidParameter("degree n must be positive".into()));
    }
    if !(tail_eps > 0.0 && tail_eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail_eps must lie in (0, 1), got {tail_eps}"
        )));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "t_max must be positive, got {t_max}"
        )));
    }
    check_series_domain(ensemble, t_max)?;
    let law = match ensemble {
        EnsembleKind::Sp | EnsembleKind::Wp => return Ok(n as usize + 1),
        EnsembleKind::Faf => WeightLaw::Poisson {
            lambda: n as f64 * t_max * t_max,
        },
        EnsembleKind::Haf => WeightLaw::NegBinomial {
            n: n as f64,
            q: t_max * t_max,
        },
    };
    let (mean, var) = law.mean_var();
    let sd = var.sqrt();
    let mut c = 1.0;
    let mut k = loop {
        let cand = (mean + c * sd).ceil() as u64 + 1;
        if law.tail(cand) < tail_eps {
            break cand;
        }
        c += 1.0;
        if c > 1e4 {
            return Err(Error::Numerical("truncation order search diverged".into()));
        }
    };
    let mut tail = law.tail(k);
    while k > 1 {
        let with_prev = tail + law.log_pmf(k - 1).exp();
        if with_prev < tail_eps {
            tail = with_prev;
            k -= 1;
        } else {
            break;
        }
    }
    usize::try_from(k).map_err(|_| Error::Numerical("truncation order overflows usize".into()))
}

#[derive(Debug, Clone, Copy)]
enum WeightLaw {
    Poisson { lambda: f64 },
    NegBinomial { n: f64, q: f64 },
}

impl WeightLaw {
    fn mean_var(self) -> (f64, f64) {
        match self {
            Self::Poisson { lambda } => (lambda, lambda),
            Self::NegBinomial { n, q } => (n * q / (1.0 - q), n * q / ((1.0 - q) * (1.0 - q))),
        }
    }

    fn log_pmf(self, k: u64) -> f64 {
        let kf = k as f64;
        match self {
            Self::Poisson { lambda } => -lambda + kf * lambda.ln() - ln_factorial(k),
            Self::NegBinomial { n, q } => {
                let log_binom = if k == 0 {
                    0.0
                } else {
                    crate::special::ln_gamma(n + kf) - ln_factorial(k) - crate::special::ln_gamma(n)
                };
                log_binom + n * (-q).ln_1p() + kf * q.ln()
            }
        }
    }

    /// pmf(k + 1) / pmf(k)
    fn ratio(self, k: u64) -> f64 {
        let kf = k as f64;
        match self {
            Self::Poisson { lambda } => lambda / (kf + 1.0),
            Self::NegBinomial { n, q } => q * (n + kf) / (kf + 1.0),
        }
    }

    /// Σ_{j ≥ k} pmf(j), summed directly until the geometric remainder bound
    /// is negligible.
    fn tail(self, k: u64) -> f64 {
        let mut term = self.log_pmf(k).exp();
        let mut sum = NeumaierSum::default();
        sum.add(term);
        let mut j = k;
        loop {
            let r = self.ratio(j);
            term *= r;
            j += 1;
            sum.add(term);
            if term == 0.0 {
                break;
            }
            let r_next = self.ratio(j);
            if r_next < 1.0 {
                let remainder = term * r_next / (1.0 - r_next);
                if remainder <= 1e-6 * sum.value() {
                    sum.add(remainder);
                    break;
                }
            }
        }
        sum.value()
    }
}

/// One realized random function P_n with its coefficients drawn once and
/// reused at every evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFunction {
    pub ensemble: EnsembleKind,
    pub n: u64,
    pub truncation_k: usize,
    pub coeffs: Vec<f64>,
    /// Largest |t| at which the truncation is certified.
    pub t_max: f64,
    #[serde(skip)]
    ratios: Vec<f64>,
}

impl SampleFunction {
    /// Draws the coefficients of one trial, truncated for |t| ≤ `t_max`.
    pub fn draw(
        ensemble: EnsembleKind,
        n: u64,
        t_max: f64,
        tail_eps: f64,
        stream: &TrialStream,
    ) -> Result<Self> {
        let k = truncation_order(ensemble, n, t_max, tail_eps)?;
        Self::from_coeffs(ensemble, n, stream.draw_coeffs(k), t_max)
    }

    /// Wraps explicit coefficients.
    ///
    /// For SP and WP a short vector is padded with zeros to degree n. For FAF
    /// and HAF the vector length is the truncation order; the caller is
    /// responsible for its tail being negligible (or zero) up to `t_max`.
    pub fn from_coeffs(
        ensemble: EnsembleKind,
        n: u64,
        mut coeffs: Vec<f64>,
        t_max: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("degree n must be positive".into()));
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("empty coefficient vector".into()));
        }
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_max must be positive, got {t_max}"
            )));
        }
        check_series_domain(ensemble, t_max)?;
        if ensemble.is_finite() {
            let degree_plus_one = n as usize + 1;
            if coeffs.len() > degree_plus_one {
                return Err(Error::InvalidParameter(format!(
                    "{ensemble} of degree {n} takes at most {degree_plus_one} coefficients, got {}",
                    coeffs.len()
                )));
            }
            coeffs.resize(degree_plus_one, 0.0);
        }
        let truncation_k = coeffs.len();
        let ratios = (0..truncation_k.saturating_sub(1) as u64)
            .map(|k| ensemble.coeff_ratio(n, k))
            .collect();
        Ok(Self {
            ensemble,
            n,
            truncation_k,
            coeffs,
            t_max,
            ratios,
        })
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if t.is_finite() && t.abs() <= self.t_max {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                t,
                t_max: self.t_max,
            })
        }
    }

    /// S_n(t) = P_n(t)/√v_n(t).
    pub fn eval_normalized(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.eval_unchecked(t))
    }

    /// S_n(t) without the range check; `t` must satisfy |t| ≤ `t_max`.
    ///
    /// The normalization Σ_k w_k² runs over the full weight window, past the
    /// stored coefficients if necessary, so it equals v_n(t) even when the
    /// coefficient vector is shorter than the series.
    pub fn eval_unchecked(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.coeffs[0];
        }
        let mode = self.ensemble.weight_mode(self.n, t) as usize;
        let xi = |k: usize| self.coeffs.get(k).copied().unwrap_or(0.0);
        let anchor = if mode % 2 == 1 && t < 0.0 { -1.0 } else { 1.0 };

        let mut num = NeumaierSum::default();
        num.add(xi(mode) * anchor);
        let mut den = anchor * anchor;

        let mut s = anchor;
        let mut k = mode;
        loop {
            let r = match self.ratios.get(k) {
                Some(&r) => r,
                None => self.ensemble.coeff_ratio(self.n, k as u64),
            };
            s *= r * t;
            k += 1;
            if s == 0.0 {
                break;
            }
            num.add(xi(k) * s);
            den += s * s;
            if s.abs() < WEIGHT_CUTOFF {
                break;
            }
        }
        s = anchor;
        for k in (0..mode).rev() {
            let r = match self.ratios.get(k) {
                Some(&r) => r,
                None => self.ensemble.coeff_ratio(self.n, k as u64),
            };
            s /= r * t;
            num.add(xi(k) * s);
            den += s * s;
            if s.abs() < WEIGHT_CUTOFF {
                break;
            }
        }
        num.value() / den.sqrt()
    }

    /// S_n(t) from the defining series, term by term in log space:
    /// Σ_k sign · exp(log f_{n,k} + k log|t| + log|ξ_k| − ½ log v_n(t)).
    ///
    /// O(K) exponentials per call; meant for cross-checking
    /// [`eval_normalized`](Self::eval_normalized).
    pub fn eval_reference(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        if t == 0.0 {
            return Ok(self.coeffs[0]);
        }
        let half_log_v = 0.5 * self.ensemble.log_variance(self.n, t)?;
        let log_abs_t = t.abs().ln();
        let mut sum = NeumaierSum::default();
        for (k, &xi) in self.coeffs.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let Some(log_f) = self.ensemble.log_coeff(self.n, k as u64) else {
                break;
            };
            let mag = (log_f + k as f64 * log_abs_t + xi.abs().ln() - half_log_v).exp();
            let negative = (xi < 0.0) ^ (t < 0.0 && k % 2 == 1);
            sum.add(if negative { -mag } else { mag });
        }
        Ok(sum.value())
    }

    /// Raw polynomial coefficients f_{n,k} ξ_k (SP and WP only).
    pub fn raw_coeffs(&self) -> Option<Vec<f64>> {
        if !self.ensemble.is_finite() {
            return None;
        }
        Some(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(k, &xi)| {
                    let f = self
                        .ensemble
                        .log_coeff(self.n, k as u64)
                        .map_or(0.0, f64::exp);
                    f * xi
                })
                .collect(),
        )
    }
}

/// One realization of Z_γ(u) = e^{−γu²/2} Σ_k ζ_k γ^{k/2} u^k / √k!.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitProcessSample {
    pub gamma: f64,
    pub coeffs: Vec<f64>,
    pub truncation_k: usize,
    pub u_max: f64,
    #[serde(skip)]
    inv_sqrt: Vec<f64>,
}

/// Series length for Z_γ on |u| ≤ `u_max`: the smallest K past the peak with
/// γ^K u_max^{2K}/K! < 1e−26, plus ⌈10·√ln K⌉ extra terms to absorb the
/// √(2 ln K) growth of the largest Gaussian coefficient.
pub fn limit_truncation_order(gamma: f64, u_max: f64) -> Result<usize> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if !(u_max >= 0.0 && u_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "u_max must be finite and nonnegative, got {u_max}"
        )));
    }
    let x2 = gamma * u_max * u_max;
    if x2 == 0.0 {
        return Ok(1);
    }
    let log_bound = LIMIT_TAIL_TERM.ln();
    let mut k: u64 = (x2.ceil() as u64).max(1);
    while k as f64 * x2.ln() - ln_factorial(k) >= log_bound {
        k += 1;
    }
    let margin = (10.0 * (k as f64).ln().max(0.0).sqrt()).ceil() as u64;
    Ok((k + margin) as usize)
}

impl LimitProcessSample {
    /// Draws standard Gaussian coefficients from trial `trial_index` of `seed`.
    pub fn draw(gamma: f64, u_max: f64, seed: u64, trial_index: u64) -> Result<Self> {
        let k = limit_truncation_order(gamma, u_max)?;
        let stream = TrialStream::new(seed, trial_index, CoeffDistribution::StandardGaussian);
        Self::from_coeffs(gamma, stream.draw_coeffs(k), u_max)
    }

    pub fn from_coeffs(gamma: f64, coeffs: Vec<f64>, u_max: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("empty coefficient vector".into()));
        }
        let inv_sqrt = (1..=coeffs.len())
            .map(|k| 1.0 / (k as f64).sqrt())
            .collect();
        Ok(Self {
            gamma,
            truncation_k: coeffs.len(),
            coeffs,
            u_max,
            inv_sqrt,
        })
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u.is_finite() && u.abs() <= self.u_max) {
            return Err(Error::OutOfRange {
                t: u,
                t_max: self.u_max,
            });
        }
        Ok(self.eval_unchecked(u))
    }

    pub fn eval_unchecked(&self, u: f64) -> f64 {
        if u == 0.0 {
            return self.coeffs[0];
        }
        let x = self.gamma.sqrt() * u;
        let x2 = x * x;
        let last = self.truncation_k - 1;
        let mode = (x2.floor() as usize).min(last);
        // Weight of term k is the square root of the Poisson(x²) mass at k.
        let log_anchor = 0.5 * (-x2 + 2.0 * mode as f64 * x.abs().ln() - ln_factorial(mode as u64));
        let mut anchor = log_anchor.exp();
        if mode % 2 == 1 && x < 0.0 {
            anchor = -anchor;
        }
        let zeta = &self.coeffs;
        let mut sum = NeumaierSum::default();
        sum.add(zeta[mode] * anchor);
        let mut s = anchor;
        for k in mode..last {
            s *= x * self.inv_sqrt[k];
            sum.add(zeta[k + 1] * s);
            if s.abs() < WEIGHT_CUTOFF * 1e-10 {
                break;
            }
        }
        s = anchor;
        for k in (0..mode).rev() {
            s /= x * self.inv_sqrt[k];
            sum.add(zeta[k] * s);
            if s.abs() < WEIGHT_CUTOFF * 1e-10 {
                break;
            }
        }
        sum.value()
    }
}
