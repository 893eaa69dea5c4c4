//! Closed-form mathematics of the four coefficient families.
//!
//! Every family is written as P_n(t) = Σ_k f_{n,k} ξ_k t^k with
//!
//! ```text
//! SP   f_{n,k} = √binom(n, k),        k ≤ n
//! FAF  f_{n,k} = √(n^k / k!)
//! HAF  f_{n,k} = √binom(n + k − 1, k)
//! WP   f_{n,k} = √(n^k / k!),         k ≤ n
//! ```
//!
//! The variance v_n(t) = Σ_k f²_{n,k} t^{2k} grows like e^{n p(t)}, and the
//! limiting density of real zeros per √n is (1/2π)·√(p′/t + p″) = √γ(t)/π.
//! Coefficients and variances are kept in log space throughout.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_gamma, NeumaierSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnsembleKind {
    /// Spherical (elliptic, SU(2)) polynomial.
    #[serde(rename = "SP")]
    Sp,
    /// Flat (ISO(2)) random entire function.
    #[serde(rename = "FAF")]
    Faf,
    /// Hyperbolic (SU(1,1)) random series on the unit disk.
    #[serde(rename = "HAF")]
    Haf,
    /// Weyl polynomial, the flat series cut at degree n.
    #[serde(rename = "WP")]
    Wp,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 4] = [Self::Sp, Self::Faf, Self::Haf, Self::Wp];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Sp => "SP",
            Self::Faf => "FAF",
            Self::Haf => "HAF",
            Self::Wp => "WP",
        }
    }

    /// SP and WP are polynomials of degree n; FAF and HAF are infinite series.
    pub fn is_finite(self) -> bool {
        matches!(self, Self::Sp | Self::Wp)
    }

    /// Radius of the real domain used for zero statistics.
    pub fn domain_radius(self) -> f64 {
        match self {
            Self::Sp | Self::Faf => f64::INFINITY,
            Self::Haf | Self::Wp => 1.0,
        }
    }

    /// Whether `t` lies in the real domain (zero included).
    pub fn in_domain(self, t: f64) -> bool {
        t.is_finite() && t.abs() < self.domain_radius()
    }

    fn check_domain(self, t: f64) -> Result<()> {
        if self.in_domain(t) {
            Ok(())
        } else {
            Err(Error::Domain { ensemble: self, t })
        }
    }

    /// log f_{n,k}; `None` for the polynomial families when k > n.
    pub fn log_coeff(self, n: u64, k: u64) -> Option<f64> {
        if self.is_finite() && k > n {
            return None;
        }
        if k == 0 {
            return Some(0.0);
        }
        let nf = n as f64;
        let kf = k as f64;
        let log_sq = match self {
            Self::Sp => ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k),
            Self::Faf | Self::Wp => kf * nf.ln() - ln_factorial(k),
            Self::Haf => ln_gamma(nf + kf) - ln_factorial(k) - ln_gamma(nf),
        };
        Some(0.5 * log_sq)
    }

    /// f_{n,k+1} / f_{n,k}, or 0 past the degree of a polynomial family.
    pub fn coeff_ratio(self, n: u64, k: u64) -> f64 {
        let nf = n as f64;
        let kf = k as f64;
        match self {
            Self::Sp => {
                if k >= n {
                    0.0
                } else {
                    ((nf - kf) / (kf + 1.0)).sqrt()
                }
            }
            Self::Wp if k >= n => 0.0,
            Self::Faf | Self::Wp => (nf / (kf + 1.0)).sqrt(),
            Self::Haf => ((nf + kf) / (kf + 1.0)).sqrt(),
        }
    }

    /// log v_n(t), where v_n(t) = Σ_k f²_{n,k} t^{2k} is the variance of P_n(t).
    ///
    /// SP, FAF and HAF have closed forms. WP is the partial exponential sum
    /// Σ_{k≤n} (n t²)^k / k!, evaluated as a log-sum-exp anchored at its
    /// largest term.
    pub fn log_variance(self, n: u64, t: f64) -> Result<f64> {
        let t2 = t * t;
        let nf = n as f64;
        match self {
            Self::Sp => Ok(nf * t2.ln_1p()),
            Self::Faf => Ok(nf * t2),
            Self::Haf => {
                self.check_domain(t)?;
                Ok(-nf * (-t2).ln_1p())
            }
            Self::Wp => {
                if !t.is_finite() {
                    return Err(Error::Domain { ensemble: self, t });
                }
                Ok(log_partial_exp_sum(n, nf * t2))
            }
        }
    }

    pub fn p_derivs(self, t: f64) -> Result<PDerivatives> {
        self.check_domain(t)?;
        let t2 = t * t;
        Ok(match self {
            Self::Sp => {
                let s = 1.0 + t2;
                PDerivatives {
                    p: t2.ln_1p(),
                    p1: 2.0 * t / s,
                    p2: 2.0 * (1.0 - t2) / (s * s),
                }
            }
            Self::Faf | Self::Wp => PDerivatives {
                p: t2,
                p1: 2.0 * t,
                p2: 2.0,
            },
            Self::Haf => {
                let s = 1.0 - t2;
                PDerivatives {
                    p: -(-t2).ln_1p(),
                    p1: 2.0 * t / s,
                    p2: 2.0 * (1.0 + t2) / (s * s),
                }
            }
        })
    }

    /// Local frequency γ(t) = ¼(p′(t)/t + p″(t)) in simplified form.
    pub fn gamma(self, t: f64) -> Result<f64> {
        self.check_domain(t)?;
        if t == 0.0 {
            return Err(Error::ZeroPoint);
        }
        let t2 = t * t;
        Ok(match self {
            Self::Sp => 1.0 / ((1.0 + t2) * (1.0 + t2)),
            Self::Faf | Self::Wp => 1.0,
            Self::Haf => 1.0 / ((1.0 - t2) * (1.0 - t2)),
        })
    }

    /// Limiting mean density of real zeros per √n at t: √γ(t)/π.
    pub fn density(self, t: f64) -> Result<f64> {
        Ok(self.gamma(t)?.sqrt() / PI)
    }

    /// Largest γ on the interval. γ is monotone in |t| for every family, so
    /// the endpoints suffice.
    pub fn max_gamma(self, interval: &IntervalSpec) -> Result<f64> {
        interval.check_for(self)?;
        Ok(self.gamma(interval.a)?.max(self.gamma(interval.b)?))
    }

    /// lim E N_n[a, b] / √n.
    pub fn expected_zero_rate(self, interval: &IntervalSpec) -> Result<f64> {
        interval.check_for(self)?;
        let IntervalSpec { a, b } = *interval;
        Ok(match self {
            Self::Sp => (b.atan() - a.atan()) / PI,
            Self::Faf | Self::Wp => (b - a) / PI,
            Self::Haf => (b.atanh() - a.atanh()) / PI,
        })
    }

    /// True iff [a, b] sits inside the real domain and avoids 0.
    ///
    /// For real t the extra Weyl condition e^{−t²} t² < 1/e holds on all of
    /// (−1, 1), so WP reduces to the open unit interval.
    pub fn domain_contains(self, interval: &IntervalSpec) -> bool {
        interval.check_for(self).is_ok()
    }

    /// An index at or next to the largest weight f_{n,k}|t|^k.
    ///
    /// The squared normalized weights form a Binomial (SP), Poisson (FAF),
    /// negative binomial (HAF) or truncated Poisson (WP) law in k, all
    /// unimodal, and this is their mode.
    pub fn weight_mode(self, n: u64, t: f64) -> u64 {
        let t2 = t * t;
        let nf = n as f64;
        let mode = match self {
            Self::Sp => ((nf + 1.0) * t2 / (1.0 + t2)).floor(),
            Self::Faf | Self::Wp => (nf * t2).floor(),
            Self::Haf => {
                if n <= 1 || t2 >= 1.0 {
                    0.0
                } else {
                    ((nf - 1.0) * t2 / (1.0 - t2)).floor()
                }
            }
        };
        let mode = if mode.is_finite() && mode > 0.0 {
            mode.min(u64::MAX as f64 / 2.0) as u64
        } else {
            0
        };
        if self.is_finite() {
            mode.min(n)
        } else {
            mode
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SP" => Ok(Self::Sp),
            "FAF" => Ok(Self::Faf),
            "HAF" => Ok(Self::Haf),
            "WP" => Ok(Self::Wp),
            _ => Err(Error::InvalidParameter(format!(
                "unknown ensemble {s:?} (expected SP, FAF, HAF or WP)"
            ))),
        }
    }
}

/// log Σ_{k=0}^{n} x^k / k!, for x ≥ 0.
fn log_partial_exp_sum(n: u64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    // Terms are unimodal in k; sum outward from the largest one. Once a term
    // drops below 1e-40 of the peak the rest are geometrically smaller still.
    const CUTOFF: f64 = 1e-40;
    let anchor = (x.floor() as u64).min(n);
    let log_peak = anchor as f64 * x.ln() - ln_factorial(anchor);
    let mut sum = NeumaierSum::default();
    sum.add(1.0);
    let mut term = 1.0;
    for k in anchor + 1..=n {
        term *= x / k as f64;
        sum.add(term);
        if term < CUTOFF {
            break;
        }
    }
    term = 1.0;
    for k in (1..=anchor).rev() {
        term *= k as f64 / x;
        sum.add(term);
        if term < CUTOFF {
            break;
        }
    }
    log_peak + sum.value().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PDerivatives {
    pub p: f64,
    pub p1: f64,
    pub p2: f64,
}

impl PDerivatives {
    /// ¼(p′/t + p″), the unsimplified local frequency.
    pub fn composed_gamma(&self, t: f64) -> f64 {
        0.25 * (self.p1 / t + self.p2)
    }
}

/// A closed interval [a, b] with a < b.
///
/// Construction only checks ordering and finiteness; membership in an
/// ensemble's domain (including the exclusion of 0) is checked by
/// [`IntervalSpec::check_for`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalSpec {
    pub a: f64,
    pub b: f64,
}

impl IntervalSpec {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidInterval {
                a,
                b,
                reason: "endpoints must be finite".into(),
            });
        }
        if a >= b {
            return Err(Error::InvalidInterval {
                a,
                b,
                reason: "require a < b".into(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains_zero(&self) -> bool {
        self.a <= 0.0 && self.b >= 0.0
    }

    /// Largest |t| on the interval.
    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs())
    }

    /// Validates [a, b] ⊂ domain ∩ (ℝ \ {0}) for `ensemble`.
    pub fn check_for(&self, ensemble: EnsembleKind) -> Result<()> {
        if self.contains_zero() {
            return Err(Error::InvalidInterval {
                a: self.a,
                b: self.b,
                reason: "interval must not contain 0".into(),
            });
        }
        if !(ensemble.in_domain(self.a) && ensemble.in_domain(self.b)) {
            return Err(Error::InvalidInterval {
                a: self.a,
                b: self.b,
                reason: format!("{ensemble} requires the interval inside (-1, 1)"),
            });
        }
        Ok(())
    }
}

impl<'de> Deserialize<'de> for IntervalSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            a: f64,
            b: f64,
        }
        let raw = Raw::deserialize(d)?;
        IntervalSpec::new(raw.a, raw.b).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn log_coeff_examples() {
        assert_eq!(EnsembleKind::Faf.log_coeff(5, 0), Some(0.0));
        for e in EnsembleKind::ALL {
            assert_eq!(e.log_coeff(7, 0), Some(0.0));
        }
        assert!(close(
            EnsembleKind::Sp.log_coeff(2, 1).unwrap(),
            0.5 * 2f64.ln(),
            1e-15
        ));
        assert!(close(
            EnsembleKind::Wp.log_coeff(4, 2).unwrap(),
            0.5 * 8f64.ln(),
            1e-14
        ));
        assert_eq!(EnsembleKind::Sp.log_coeff(3, 5), None);
        assert_eq!(EnsembleKind::Wp.log_coeff(3, 4), None);
        assert!(EnsembleKind::Haf.log_coeff(3, 400).is_some());
    }

    #[test]
    fn haf_coeff_is_sqrt_binomial() {
        // binom(n + k − 1, k) with n = 4, k = 3 is binom(6, 3) = 20.
        let got = EnsembleKind::Haf.log_coeff(4, 3).unwrap();
        assert!(close(got, 0.5 * 20f64.ln(), 1e-14));
    }

    #[test]
    fn coeff_ratio_matches_log_coeff() {
        for e in EnsembleKind::ALL {
            for k in 0..30 {
                let lo = e.log_coeff(30, k).unwrap();
                let hi = e.log_coeff(30, k + 1);
                let r = e.coeff_ratio(30, k);
                match hi {
                    Some(hi) => assert!(close(r.ln(), hi - lo, 1e-12), "{e} k={k}"),
                    None => assert_eq!(r, 0.0),
                }
            }
        }
    }

    #[test]
    fn log_variance_examples() {
        assert!(close(
            EnsembleKind::Sp.log_variance(3, 1.0).unwrap(),
            8f64.ln(),
            1e-15
        ));
        for e in EnsembleKind::ALL {
            assert_eq!(e.log_variance(17, 0.0).unwrap(), 0.0);
        }
        // Brute-force partial exponential sum, frozen with a 50-digit evaluation.
        let wp = EnsembleKind::Wp.log_variance(6, 0.5).unwrap();
        assert!(close(wp, 1.499_073_579_091_112, 1e-14));
        assert!(EnsembleKind::Haf.log_variance(3, 1.0).is_err());
    }

    #[test]
    fn wp_log_variance_survives_huge_n() {
        let n = 1_000_000;
        let lv = EnsembleKind::Wp.log_variance(n, 0.5).unwrap();
        // For t² < 1 the partial sum is e^{n t²} up to a vanishing tail.
        assert!(close(lv, n as f64 * 0.25, 1e-6));
        // t = 1 is the Poisson median: half the mass is cut off.
        let lv1 = EnsembleKind::Wp.log_variance(n, 1.0).unwrap();
        assert!(close(lv1 - n as f64, 0.5f64.ln(), 2e-3));
    }

    #[test]
    fn p_derivs_examples() {
        let d = EnsembleKind::Faf.p_derivs(0.7).unwrap();
        assert!(close(d.p, 0.49, 1e-15) && close(d.p1, 1.4, 1e-15) && d.p2 == 2.0);
        let d = EnsembleKind::Sp.p_derivs(0.0).unwrap();
        assert_eq!((d.p, d.p1, d.p2), (0.0, 0.0, 2.0));
        let d = EnsembleKind::Haf.p_derivs(0.5).unwrap();
        assert!(close(d.p, -(0.75f64.ln()), 1e-15));
        assert!(close(d.p1, 4.0 / 3.0, 1e-15));
        assert!(close(d.p2, 2.0 * 1.25 / 0.5625, 1e-14));
        assert!(EnsembleKind::Haf.p_derivs(1.0).is_err());
        assert!(EnsembleKind::Wp.p_derivs(-1.2).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(EnsembleKind::Faf.gamma(0.3).unwrap(), 1.0);
        assert_eq!(EnsembleKind::Sp.gamma(1.0).unwrap(), 0.25);
        assert!(close(
            EnsembleKind::Haf.gamma(0.5).unwrap(),
            16.0 / 9.0,
            1e-15
        ));
        assert_eq!(EnsembleKind::Sp.gamma(0.0), Err(Error::ZeroPoint));
    }

    #[test]
    fn expected_zero_rate_examples() {
        let iv = |a, b| IntervalSpec::new(a, b).unwrap();
        let r = EnsembleKind::Faf.expected_zero_rate(&iv(0.2, 1.2)).unwrap();
        assert!(close(r, 1.0 / PI, 1e-15));
        let r = EnsembleKind::Sp.expected_zero_rate(&iv(0.5, 1.5)).unwrap();
        assert!(close(r, 0.165_249_340_538_567_9, 1e-14));
        let r = EnsembleKind::Haf.expected_zero_rate(&iv(0.2, 0.8)).unwrap();
        assert!(close(r, 0.285_167_376_359_355_7, 1e-14));
        assert!(EnsembleKind::Haf.expected_zero_rate(&iv(0.5, 1.1)).is_err());
        assert!(EnsembleKind::Sp.expected_zero_rate(&iv(-1.0, 1.0)).is_err());
    }

    #[test]
    fn domain_contains_examples() {
        let iv = |a, b| IntervalSpec::new(a, b).unwrap();
        assert!(EnsembleKind::Sp.domain_contains(&iv(-2.0, -1.0)));
        assert!(!EnsembleKind::Haf.domain_contains(&iv(0.5, 1.1)));
        assert!(!EnsembleKind::Wp.domain_contains(&iv(-0.3, 0.3)));
        assert!(EnsembleKind::Wp.domain_contains(&iv(-0.99, -0.01)));
        assert!(!EnsembleKind::Wp.domain_contains(&iv(0.5, 1.0)));
        assert!(EnsembleKind::Faf.domain_contains(&iv(3.0, 40.0)));
    }

    #[test]
    fn interval_rejects_bad_order() {
        assert!(IntervalSpec::new(1.0, 1.0).is_err());
        assert!(IntervalSpec::new(2.0, 1.0).is_err());
        assert!(IntervalSpec::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn interval_deserialization_validates() {
        let ok: IntervalSpec = serde_json::from_str(r#"{"a":0.2,"b":0.8}"#).unwrap();
        assert_eq!(ok, IntervalSpec { a: 0.2, b: 0.8 });
        assert!(serde_json::from_str::<IntervalSpec>(r#"{"a":0.8,"b":0.2}"#).is_err());
        assert!(serde_json::from_str::<IntervalSpec>(r#"{"a":0.1,"b":0.2,"c":1}"#).is_err());
    }

    #[test]
    fn weight_mode_is_argmax() {
        for e in EnsembleKind::ALL {
            for &t in &[0.05, 0.3, 0.7, 0.95] {
                let n = 60;
                let mode = e.weight_mode(n, t);
                let lw = |k: u64| e.log_coeff(n, k).map(|c| c + k as f64 * t.ln());
                let best = (0..400u64).filter_map(|k| lw(k).map(|w| (k, w))).fold(
                    (0, f64::NEG_INFINITY),
                    |acc, x| if x.1 > acc.1 { x } else { acc },
                );
                // Ties between neighbours are allowed.
                assert!(
                    lw(mode).unwrap() >= best.1 - 1e-9 || mode.abs_diff(best.0) <= 1,
                    "{e} t={t}: mode {mode} vs argmax {}",
                    best.0
                );
            }
        }
    }
}
