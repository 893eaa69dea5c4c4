mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use realzeros::special::{gamma_q, NeumaierSum};
use realzeros::{
    count_zeros_grid, estimate_mean_zero_count, truncation_order, CoeffDistribution, EnsembleKind,
    Error, ExperimentConfig, GridParams, IntervalSpec, LimitProcessSample, SampleFunction,
    TrialStream, DEFAULT_TAIL_EPS,
};

fn ensemble() -> impl Strategy<Value = EnsembleKind> {
    prop::sample::select(EnsembleKind::ALL.to_vec())
}

/// A nonzero t inside the natural domain of `e`, away from the HAF/WP edge.
fn point_in(e: EnsembleKind, u: f64) -> f64 {
    let r = if e.domain_radius().is_finite() {
        0.97
    } else {
        3.0
    };
    let t = r * u;
    if t == 0.0 {
        0.5
    } else {
        t
    }
}

fn config(
    e: EnsembleKind,
    d: CoeffDistribution,
    n: u64,
    a: f64,
    b: f64,
    trials: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        ensemble: e,
        distribution: d,
        n_values: vec![n],
        interval: IntervalSpec::new(a, b).unwrap(),
        trials,
        master_seed: 99,
        grid: GridParams::default(),
        tail_eps: DEFAULT_TAIL_EPS,
    }
}

fn typical_interval(e: EnsembleKind) -> (f64, f64) {
    match e {
        EnsembleKind::Sp => (0.5, 1.5),
        EnsembleKind::Faf => (0.2, 1.2),
        EnsembleKind::Haf | EnsembleKind::Wp => (0.2, 0.8),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn partition_of_unity(e in ensemble(), n in 1u64..=200, u in -1.0f64..1.0) {
        let t = point_in(e, u);
        let terms = if e.is_finite() {
            n + 1
        } else {
            truncation_order(e, n, t.abs(), DEFAULT_TAIL_EPS).unwrap() as u64
        };
        let s = common::partition_sum(e, n, t, terms);
        prop_assert!((s - 1.0).abs() <= 1e-10, "{e} n={n} t={t}: {s}");
    }

    #[test]
    fn wp_variance_is_scaled_upper_gamma(n in 1u64..=100, t in -2.0f64..2.0) {
        let x = n as f64 * t * t;
        let want = x + gamma_q(n as f64 + 1.0, x).ln();
        let got = EnsembleKind::Wp.log_variance(n, t).unwrap();
        prop_assert!(((got - want).exp() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn density_and_variance_are_even(e in ensemble(), n in 1u64..=300, u in 0.001f64..1.0) {
        let t = point_in(e, u);
        prop_assert_eq!(e.density(t).unwrap(), e.density(-t).unwrap());
        prop_assert_eq!(e.log_variance(n, t).unwrap(), e.log_variance(n, -t).unwrap());
    }

    #[test]
    fn reflection_flips_odd_coefficients(e in ensemble(), n in 1u64..=60, seed: u64, u in 0.001f64..1.0) {
        let t = point_in(e, u);
        let stream = TrialStream::new(seed, 0, CoeffDistribution::StandardGaussian);
        let f = SampleFunction::draw(e, n, t.abs(), DEFAULT_TAIL_EPS, &stream).unwrap();
        let flipped: Vec<f64> = f
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &x)| if k % 2 == 1 { -x } else { x })
            .collect();
        let g = SampleFunction::from_coeffs(e, n, flipped, f.t_max).unwrap();
        let lhs = f.eval_normalized(-t).unwrap();
        let rhs = g.eval_normalized(t).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn fast_and_reference_evaluation_agree(e in ensemble(), n in 1u64..=400, seed: u64, u in -1.0f64..1.0) {
        let t = point_in(e, u);
        let stream = TrialStream::new(seed, 1, CoeffDistribution::Rademacher);
        let f = SampleFunction::draw(e, n, t.abs(), DEFAULT_TAIL_EPS, &stream).unwrap();
        let fast = f.eval_normalized(t).unwrap();
        let slow = f.eval_reference(t).unwrap();
        prop_assert!((fast - slow).abs() <= 1e-9, "{e} n={n} t={t}: {fast} vs {slow}");
    }

    #[test]
    fn compensated_sum_ignores_order(xs in prop::collection::vec(-1e10f64..1e10, 1..100), seed: u64) {
        let mut ys = xs.clone();
        ys.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let s1: NeumaierSum = xs.iter().copied().collect();
        let s2: NeumaierSum = ys.iter().copied().collect();
        let (s1, s2) = (s1.value(), s2.value());
        let mass: f64 = xs.iter().map(|x| x.abs()).sum();
        let eps = f64::EPSILON;
        let bound = 4.0 * eps * s1.abs() + 1e3 * xs.len() as f64 * eps * eps * mass;
        prop_assert!((s1 - s2).abs() <= bound, "{s1} vs {s2}");
    }

    #[test]
    fn grid_finds_planted_roots(
        mut roots in prop::collection::vec(0.0f64..1.0, 1..8),
        pps in 4u32..40,
    ) {
        roots.sort_by(f64::total_cmp);
        let separated = roots.windows(2).all(|w| w[1] - w[0] > 0.02);
        prop_assume!(separated && roots[0] > 0.02 && roots[roots.len() - 1] < 0.98);
        let f = |t: f64| roots.iter().map(|r| t - r).product::<f64>();
        let iv = IntervalSpec::new(0.0, 1.0).unwrap();
        let params = GridParams { points_per_spacing: pps, ..GridParams::default() };
        let report = count_zeros_grid(f, &iv, roots.len() as f64, &params).unwrap();
        prop_assert!(report.converged);
        prop_assert_eq!(report.count as usize, roots.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gamma_matches_composition(e in ensemble(), u in -1.0f64..1.0) {
        let t = if e.domain_radius().is_finite() { 0.999 * u } else { 50.0 * u };
        prop_assume!(t != 0.0);
        let g = e.gamma(t).unwrap();
        let composed = e.p_derivs(t).unwrap().composed_gamma(t);
        prop_assert!((g - composed).abs() <= 1e-12 * g);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn closed_form_rate_matches_quadrature(e in ensemble(), u in 0.0f64..1.0, v in 0.0f64..1.0, neg: bool) {
        let r = if e.domain_radius().is_finite() { 0.99 } else { 6.0 };
        let (mut a, mut b) = (r * u.min(v), r * u.max(v));
        prop_assume!(b - a > 1e-4 && a > 1e-3);
        if neg {
            (a, b) = (-b, -a);
        }
        let closed = e.expected_zero_rate(&IntervalSpec::new(a, b).unwrap()).unwrap();
        let quad = common::integrated_density(e, a, b);
        prop_assert!((closed - quad).abs() <= 1e-9, "{e} [{a}, {b}]: {closed} vs {quad}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 100,
        rng_seed: proptest::test_runner::RngSeed::Fixed(7),
        ..ProptestConfig::default()
    })]

    #[test]
    fn doubling_truncation_changes_nothing(
        e in prop::sample::select(vec![EnsembleKind::Faf, EnsembleKind::Haf]),
        n in 1u64..=500,
        seed: u64,
        u in 0.05f64..1.0,
        w in -1.0f64..1.0,
    ) {
        let t_max = if e == EnsembleKind::Haf { 0.95 * u } else { 2.0 * u };
        let k = truncation_order(e, n, t_max, DEFAULT_TAIL_EPS).unwrap();
        let coeffs = TrialStream::new(seed, 0, CoeffDistribution::StandardGaussian).draw_coeffs(2 * k);
        let short = SampleFunction::from_coeffs(e, n, coeffs[..k].to_vec(), t_max).unwrap();
        let long = SampleFunction::from_coeffs(e, n, coeffs, t_max).unwrap();
        let t = w * t_max;
        let value = short.eval_normalized(t).unwrap();
        let d = (value - long.eval_normalized(t).unwrap()).abs();
        prop_assert!(d <= 1e-8 * (1.0 + value.abs()), "{e} n={n} t={t}: {d}");
    }
}

#[test]
fn normalized_variance_is_one() {
    let samples = 100_000u64;
    for e in EnsembleKind::ALL {
        let t = if e.domain_radius().is_finite() {
            0.6
        } else {
            0.9
        };
        let mut second = NeumaierSum::default();
        for i in 0..samples {
            let stream = TrialStream::new(5, i, CoeffDistribution::UniformCentered);
            let f = SampleFunction::draw(e, 20, t, DEFAULT_TAIL_EPS, &stream).unwrap();
            let s = f.eval_unchecked(t);
            second.add(s * s);
        }
        let var = second.value() / samples as f64;
        assert!((var - 1.0).abs() <= 0.02, "{e}: E[S²] = {var}");
    }
}

#[test]
fn limit_process_covariance_is_gaussian_kernel() {
    let gamma = 2.0;
    let points = [0.0, 0.4, 1.0, 1.8];
    let samples = 100_000u64;
    let mut acc = [[0.0; 4]; 4];
    for i in 0..samples {
        let z = LimitProcessSample::draw(gamma, 1.8, 11, i).unwrap();
        let vals = points.map(|u| z.eval(u).unwrap());
        for a in 0..4 {
            for b in 0..4 {
                acc[a][b] += vals[a] * vals[b];
            }
        }
    }
    for a in 0..4 {
        for b in 0..4 {
            let emp = acc[a][b] / samples as f64;
            let d = points[a] - points[b];
            let want = (-gamma * d * d / 2.0).exp();
            assert!((emp - want).abs() <= 0.02, "({a},{b}): {emp} vs {want}");
        }
    }
}

#[test]
fn mean_count_does_not_depend_on_coefficient_law() {
    let laws = [
        CoeffDistribution::Rademacher,
        CoeffDistribution::StandardGaussian,
        CoeffDistribution::UniformCentered,
        CoeffDistribution::TwoPoint(0.3),
    ];
    for e in EnsembleKind::ALL {
        let (a, b) = typical_interval(e);
        for d in laws {
            let row = &estimate_mean_zero_count(&config(e, d, 400, a, b, 400))
                .unwrap()
                .per_n[0];
            assert!(
                row.abs_error <= 0.05,
                "{e}/{d}: scaled mean {} vs {}",
                row.scaled_mean,
                row.theory
            );
        }
    }
}

#[test]
fn stderr_shrinks_like_root_trials() {
    let small = &estimate_mean_zero_count(&config(
        EnsembleKind::Sp,
        CoeffDistribution::StandardGaussian,
        50,
        0.5,
        1.5,
        500,
    ))
    .unwrap()
    .per_n[0];
    let large = &estimate_mean_zero_count(&config(
        EnsembleKind::Sp,
        CoeffDistribution::StandardGaussian,
        50,
        0.5,
        1.5,
        8000,
    ))
    .unwrap()
    .per_n[0];
    let ratio = large.stderr / small.stderr;
    assert!((0.18..=0.32).contains(&ratio), "stderr ratio {ratio}");
}

#[test]
fn repeated_runs_reproduce() {
    let cfg = config(
        EnsembleKind::Haf,
        CoeffDistribution::TwoPoint(0.2),
        200,
        0.2,
        0.8,
        50,
    );
    let first = estimate_mean_zero_count(&cfg).unwrap();
    let second = estimate_mean_zero_count(&cfg).unwrap();
    assert_eq!(first.per_n, second.per_n);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(IntervalSpec::new(1.0, 1.0).is_err());
    assert!(IntervalSpec::new(f64::NAN, 1.0).is_err());

    let mut cfg = config(
        EnsembleKind::Haf,
        CoeffDistribution::Rademacher,
        10,
        0.2,
        0.8,
        10,
    );
    cfg.interval = IntervalSpec::new(0.5, 1.2).unwrap();
    assert!(matches!(
        estimate_mean_zero_count(&cfg),
        Err(Error::InvalidInterval { .. })
    ));

    cfg.ensemble = EnsembleKind::Sp;
    cfg.interval = IntervalSpec::new(-0.5, 0.5).unwrap();
    assert!(matches!(
        estimate_mean_zero_count(&cfg),
        Err(Error::InvalidInterval { .. })
    ));

    cfg.interval = IntervalSpec::new(0.5, 1.5).unwrap();
    cfg.trials = 1;
    assert!(estimate_mean_zero_count(&cfg).is_err());

    cfg.trials = 10;
    cfg.n_values = vec![0];
    assert!(estimate_mean_zero_count(&cfg).is_err());

    cfg.n_values = vec![10];
    cfg.distribution = CoeffDistribution::TwoPoint(1.0);
    assert!(estimate_mean_zero_count(&cfg).is_err());
}

#[test]
fn config_round_trips_through_json() {
    let cfg = config(
        EnsembleKind::Wp,
        CoeffDistribution::TwoPoint(0.25),
        64,
        0.2,
        0.8,
        100,
    );
    let json = serde_json::to_string(&cfg).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), json);

    let bad = json.replace("\"trials\"", "\"trails\"");
    assert!(serde_json::from_str::<ExperimentConfig>(&bad).is_err());
    let reversed = json.replace("\"a\":0.2", "\"a\":0.9");
    assert!(serde_json::from_str::<ExperimentConfig>(&reversed).is_err());
}
