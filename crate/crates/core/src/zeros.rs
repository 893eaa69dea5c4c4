//! Counting real zeros of a realized function on an interval.
//!
//! [`count_zeros_grid`] counts strict sign changes on a uniform grid sized
//! from the expected zero density and halves the step until two consecutive
//! levels agree. [`count_zeros_oracle`] is an independent route for the
//! polynomial families: all roots from the eigenvalues of the companion
//! matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ensembles::IntervalSpec;
use crate::error::{Error, Result};
use crate::evaluate::SampleFunction;

/// Phase shift, in units of the current step, applied after a grid point
/// lands on a zero.
const PHASE_SHIFT: f64 = 1e-3;
const MAX_PHASE_SHIFTS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    pub points_per_spacing: u32,
    pub max_refinements: u32,
    pub zero_tol: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            points_per_spacing: 20,
            max_refinements: 6,
            zero_tol: 1e-300,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_spacing < 4 {
            return Err(Error::InvalidParameter(format!(
                "points_per_spacing must be at least 4, got {}",
                self.points_per_spacing
            )));
        }
        if self.max_refinements < 1 {
            return Err(Error::InvalidParameter(
                "max_refinements must be positive".into(),
            ));
        }
        if !(self.zero_tol > 0.0 && self.zero_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "zero_tol must be positive, got {}",
                self.zero_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCountReport {
    pub count: u32,
    pub final_step: f64,
    pub refinements_used: u32,
    /// Two successive refinement levels produced the same count.
    pub converged: bool,
    pub grid_zero_hits: u32,
}

struct Level {
    /// Absolute offset of all grid points except the right endpoint, which
    /// moves left by the same amount.
    shift: f64,
    values: Vec<f64>,
}

fn grid_point(interval: &IntervalSpec, intervals: usize, i: usize, shift: f64) -> f64 {
    if i == intervals {
        interval.b - shift
    } else {
        interval.a + interval.len() * (i as f64 / intervals as f64) + shift
    }
}

fn sign_changes(values: &[f64]) -> u32 {
    let mut count = 0;
    let mut prev = 0.0f64;
    for &v in values {
        if v == 0.0 || v.is_nan() {
            continue;
        }
        if prev != 0.0 && (prev > 0.0) != (v > 0.0) {
            count += 1;
        }
        prev = v;
    }
    count
}

/// Counts zeros of `f` on `interval` by sign changes on a refined grid.
///
/// `expected_rate` is the mean number of zeros per unit length; the initial
/// step is 1/(`expected_rate`·`points_per_spacing`). Non-convergence is
/// reported, not raised.
pub fn count_zeros_grid<F>(
    mut f: F,
    interval: &IntervalSpec,
    expected_rate: f64,
    params: &GridParams,
) -> Result<ZeroCountReport>
where
    F: FnMut(f64) -> f64,
{
    if !(expected_rate > 0.0 && expected_rate.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "expected_rate must be positive, got {expected_rate}"
        )));
    }
    params.validate()?;
    let target_step = 1.0 / (expected_rate * params.points_per_spacing as f64);
    let mut intervals = ((interval.len() / target_step).ceil() as usize).max(1);
    let mut hits = 0u32;

    let mut eval_level = |intervals: usize, prev: Option<&Level>, hits: &mut u32| -> Level {
        let h = interval.len() / intervals as f64;
        let mut shift = prev.map_or(0.0, |p| p.shift);
        let mut reuse = prev;
        for attempt in 0..=MAX_PHASE_SHIFTS {
            let mut values = Vec::with_capacity(intervals + 1);
            let mut hit = false;
            for i in 0..=intervals {
                let v = match reuse {
                    Some(p) if i % 2 == 0 => p.values[i / 2],
                    _ => f(grid_point(interval, intervals, i, shift)),
                };
                if v.abs() <= params.zero_tol {
                    hit = true;
                }
                values.push(v);
            }
            if !hit || attempt == MAX_PHASE_SHIFTS {
                return Level { shift, values };
            }
            *hits += 1;
            shift += PHASE_SHIFT * h;
            reuse = None;
        }
        unreachable!()
    };

    let mut level = eval_level(intervals, None, &mut hits);
    let mut count = sign_changes(&level.values);
    let mut refinements = 0;
    let mut converged = false;
    while refinements < params.max_refinements {
        intervals *= 2;
        let next = eval_level(intervals, Some(&level), &mut hits);
        refinements += 1;
        let next_count = sign_changes(&next.values);
        level = next;
        if next_count == count {
            converged = true;
            break;
        }
        count = next_count;
    }
    Ok(ZeroCountReport {
        count,
        final_step: interval.len() / intervals as f64,
        refinements_used: refinements,
        converged,
        grid_zero_hits: hits,
    })
}

/// Degree of a polynomial eligible for the eigenvalue oracle.
pub const ORACLE_MAX_DEGREE: u64 = 80;

/// All complex roots (re, im) of Σ c_k z^k, with trailing zeros stripped.
///
/// Roots at the origin from vanishing low-order coefficients are returned
/// explicitly; the rest come from the eigenvalues of the balanced companion
/// matrix of the monic polynomial.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<(f64, f64)>> {
    let Some(top) = coeffs.iter().rposition(|&c| c != 0.0) else {
        return Err(Error::InvalidParameter("all coefficients are zero".into()));
    };
    let low = coeffs.iter().position(|&c| c != 0.0).unwrap_or(0);
    let mut roots = vec![(0.0, 0.0); low];
    let c = &coeffs[low..=top];
    let d = c.len() - 1;
    if d == 0 {
        return Ok(roots);
    }
    let lead = c[d];
    let mut m = DMatrix::<f64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..d {
        m[(i, d - 1)] = -c[i] / lead;
    }
    balance(&mut m);
    let eig = m.complex_eigenvalues();
    if eig.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Numerical(
            "companion eigenvalues are not finite".into(),
        ));
    }
    roots.extend(eig.iter().map(|z| (z.re, z.im)));
    Ok(roots)
}

/// Parlett–Reinsch diagonal balancing by powers of two; preserves the
/// spectrum exactly and tames the dynamic range of the coefficients.
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    const RADIX: f64 = 2.0;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    m[(i, j)] *= inv;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// Real roots in `interval` of a realized SP or WP polynomial, from the
/// companion-matrix eigenvalues.
///
/// A root counts as real when |Im λ| ≤ `im_tol`·(1 + |λ|).
pub fn count_zeros_oracle(
    sample: &SampleFunction,
    interval: &IntervalSpec,
    im_tol: f64,
) -> Result<u32> {
    let roots = oracle_real_roots(sample, im_tol)?;
    Ok(roots
        .iter()
        .filter(|&&x| x >= interval.a && x <= interval.b)
        .count() as u32)
}

/// Sorted real parts of the roots the oracle classifies as real.
pub fn oracle_real_roots(sample: &SampleFunction, im_tol: f64) -> Result<Vec<f64>> {
    if !sample.ensemble.is_finite() {
        return Err(Error::Unsupported {
            ensemble: sample.ensemble,
            reason: "the eigenvalue oracle needs a polynomial (SP or WP)",
        });
    }
    if sample.n > ORACLE_MAX_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "oracle degree limited to {ORACLE_MAX_DEGREE}, got {}",
            sample.n
        )));
    }
    let raw = sample.raw_coeffs().expect("finite family");
    let mut real: Vec<f64> = polynomial_roots(&raw)?
        .into_iter()
        .filter(|&(re, im)| im.abs() <= im_tol * (1.0 + re.hypot(im)))
        .map(|(re, _)| re)
        .collect();
    real.sort_by(f64::total_cmp);
    Ok(real)
}
