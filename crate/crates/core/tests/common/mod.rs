//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use realzeros::EnsembleKind;

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// (1/2π)·√(p′/t + p″) from the unsimplified derivatives.
pub fn density_from_derivatives(e: EnsembleKind, t: f64) -> f64 {
    let d = e.p_derivs(t).unwrap();
    (d.p1 / t + d.p2).sqrt() / (2.0 * std::f64::consts::PI)
}

/// Quadrature of the limiting density over [a, b].
pub fn integrated_density(e: EnsembleKind, a: f64, b: f64) -> f64 {
    adaptive_simpson(&|t| density_from_derivatives(e, t), a, b, 1e-13)
}

/// Σ_k a²_{n,k}(t) from log_coeff and log_variance, over `terms` terms.
pub fn partition_sum(e: EnsembleKind, n: u64, t: f64, terms: u64) -> f64 {
    let lv = e.log_variance(n, t).unwrap();
    let mut sum = 0.0;
    for k in 0..terms {
        let Some(lc) = e.log_coeff(n, k) else { break };
        let log_t = if k == 0 {
            0.0
        } else {
            2.0 * k as f64 * t.abs().ln()
        };
        sum += (2.0 * lc + log_t - lv).exp();
    }
    sum
}
