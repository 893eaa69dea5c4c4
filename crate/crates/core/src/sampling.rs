//! Seedable, per-trial coefficient streams.
//!
//! Each trial owns an independent generator keyed by a 64-bit hash of
//! `(master_seed, trial_index)`, so trials can be produced on any worker in
//! any order and still reproduce bit for bit.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Law of the i.i.d. coefficients. Every variant has mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoeffDistribution {
    /// ±1 with probability ½ each.
    Rademacher,
    StandardGaussian,
    /// Uniform on [−√3, √3].
    UniformCentered,
    /// √((1−p)/p) with probability p, −√(p/(1−p)) otherwise.
    TwoPoint(f64),
}

impl CoeffDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::TwoPoint(p) if !(p > 0.0 && p < 1.0) => Err(Error::InvalidParameter(format!(
                "TwoPoint probability must lie in (0, 1), got {p}"
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::StandardGaussian => rng.sample(StandardNormal),
            Self::UniformCentered => SQRT_3 * (2.0 * rng.random::<f64>() - 1.0),
            Self::TwoPoint(p) => {
                if rng.random::<f64>() < p {
                    ((1.0 - p) / p).sqrt()
                } else {
                    -(p / (1.0 - p)).sqrt()
                }
            }
        }
    }
}

impl fmt::Display for CoeffDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Rademacher => f.write_str("Rademacher"),
            Self::StandardGaussian => f.write_str("StandardGaussian"),
            Self::UniformCentered => f.write_str("UniformCentered"),
            Self::TwoPoint(p) => write!(f, "TwoPoint:{p}"),
        }
    }
}

impl FromStr for CoeffDistribution {
    type Err = Error;

    /// Accepts the variant names, and `TwoPoint:<p>` for the skewed law.
    fn from_str(s: &str) -> Result<Self> {
        let d = match s {
            "Rademacher" => Self::Rademacher,
            "StandardGaussian" | "Gaussian" => Self::StandardGaussian,
            "UniformCentered" | "Uniform" => Self::UniformCentered,
            _ => match s.strip_prefix("TwoPoint:") {
                Some(p) => Self::TwoPoint(p.parse().map_err(|_| {
                    Error::InvalidParameter(format!("bad TwoPoint probability {p:?}"))
                })?),
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown distribution {s:?}"
                    )))
                }
            },
        };
        d.validate()?;
        Ok(d)
    }
}

/// splitmix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream seed for one trial.
pub fn trial_seed(master_seed: u64, trial_index: u64) -> u64 {
    let h = mix64(master_seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    mix64(h ^ mix64(trial_index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStream {
    pub master_seed: u64,
    pub trial_index: u64,
    pub distribution: CoeffDistribution,
}

impl TrialStream {
    pub fn new(master_seed: u64, trial_index: u64, distribution: CoeffDistribution) -> Self {
        Self {
            master_seed,
            trial_index,
            distribution,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(trial_seed(self.master_seed, self.trial_index))
    }

    /// The first `count` coefficients ξ_0, …, ξ_{count−1} of this stream.
    pub fn draw_coeffs(&self, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        self.draw_into(count, &mut out);
        out
    }

    /// Like [`draw_coeffs`](Self::draw_coeffs) but reusing `out`'s allocation.
    pub fn draw_into(&self, count: usize, out: &mut Vec<f64>) {
        out.clear();
        let mut rng = self.rng();
        let dist = self.distribution;
        out.extend((0..count).map(|_| dist.sample(&mut rng)));
    }
}
