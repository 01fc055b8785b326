use depmeter::dataset::Dataset;
use depmeter::dependence::{estimate_coefficient, Estimator, EstimatorConfig, Verdict};
use depmeter::gaussian::{closed_form_coefficient, sem_to_covariance, LinearSem};
use depmeter::simgen::{functional_system_bounds, sample_linear_sem, FunctionalSystem, Grid, DEFAULT_GRID_POINTS};
use proptest::prelude::*;

const ESTIMATORS: [Estimator; 2] = [Estimator::Wasserstein, Estimator::Mmd];

fn cfg(e: Estimator) -> EstimatorConfig {
    EstimatorConfig::default().with_estimator(e)
}

/// `Y = slope·X + W`, unit variances.
fn pair(slope: f64) -> LinearSem {
    LinearSem::new(vec![vec![0.0, 0.0], vec![slope, 0.0]], vec![1.0, 1.0]).unwrap()
}

fn scale_column(ds: &Dataset, col: usize, s: f64) -> Dataset {
    let cols: Vec<Vec<f64>> = (0..ds.n_cols()).map(|c| ds.column(c).into_iter().map(|v| if c == col { v * s } else { v }).collect()).collect();
    Dataset::from_columns(ds.columns().to_vec(), &cols).unwrap()
}

/// Breaks any dependence of column 1 on column 0 by reversing column 1.
fn decouple(ds: &Dataset) -> Dataset {
    let mut y = ds.column(1);
    y.reverse();
    Dataset::from_columns(ds.columns().to_vec(), &[ds.column(0), y]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn estimates_are_nonnegative(
        rows in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 500..800),
        mmd in any::<bool>(),
    ) {
        let cols = vec![rows.iter().map(|r| r.0).collect::<Vec<_>>(), rows.iter().map(|r| r.1).collect(), rows.iter().map(|r| r.2).collect()];
        let ds = Dataset::from_columns(vec!["a".into(), "b".into(), "c".into()], &cols).unwrap();
        let c = cfg(if mmd { Estimator::Mmd } else { Estimator::Wasserstein });
        for (i, j, k) in [(0, 1, vec![]), (1, 0, vec![2]), (2, 0, vec![])] {
            let est = estimate_coefficient(&ds, i, j, &k, &c).unwrap();
            prop_assert!(est.value >= 0.0 && est.tau >= 0.0);
            prop_assert!(est.diagnostics.pairs.iter().all(|p| p.distance >= 0.0 && p.ratio >= 0.0));
        }
    }

    #[test]
    fn rescaling_the_source_rescales_the_estimate(seed in 0u64..1000, s in prop_oneof![0.05f64..0.9, 1.1f64..20.0]) {
        let ds = sample_linear_sem(&pair(2.0), 3000, seed).unwrap();
        for e in ESTIMATORS {
            let base = estimate_coefficient(&ds, 1, 0, &[], &cfg(e)).unwrap().value;
            let scaled = estimate_coefficient(&scale_column(&ds, 0, s), 1, 0, &[], &cfg(e)).unwrap().value;
            prop_assert!((scaled * s / base - 1.0).abs() < 0.05, "{e}: {base} vs {scaled} at s = {s}");
        }
    }
}

#[test]
fn coefficient_is_asymmetric_beyond_the_threshold() {
    // c_{y,x} = 3 while c_{x,y} = 0.3 in the closed form
    let ds = sample_linear_sem(&pair(3.0), 20_000, 5).unwrap();
    for e in ESTIMATORS {
        let yx = estimate_coefficient(&ds, 1, 0, &[], &cfg(e)).unwrap();
        let xy = estimate_coefficient(&ds, 0, 1, &[], &cfg(e)).unwrap();
        let tau = yx.tau.max(xy.tau);
        assert!(yx.value - xy.value > 3.0 * tau, "{e}: {} vs {} (tau {tau})", yx.value, xy.value);
    }
}

fn mean_abs_error(sem: &LinearSem, i: usize, j: usize, k: &[usize], n: usize, e: Estimator) -> f64 {
    let truth = closed_form_coefficient(&sem_to_covariance(sem), i, j, k).unwrap();
    let seeds = 8;
    (0..seeds).map(|s| (estimate_coefficient(&sample_linear_sem(sem, n, 100 + s).unwrap(), i, j, k, &cfg(e)).unwrap().value - truth).abs()).sum::<f64>() / seeds as f64
}

/// Each quadrupling of N roughly halves the error once the cells hold a few
/// hundred rows; below that the conditional cells are too thin to be in the
/// asymptotic regime.
#[test]
fn estimate_approaches_the_closed_form() {
    // chain X0 → X1 → X2: the coefficient of X0 on X2 given X1 is zero, that
    // of X1 on X2 is 1.5 with or without X0
    let chain = LinearSem::new(vec![vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0, 1.5, 0.0]], vec![1.0, 1.0, 1.0]).unwrap();
    for e in ESTIMATORS {
        for (i, j, k) in [(2usize, 0usize, vec![1usize]), (2, 1, vec![]), (2, 1, vec![0])] {
            let errs: Vec<f64> = [4000, 16_000, 64_000].iter().map(|&n| mean_abs_error(&chain, i, j, &k, n, e)).collect();
            for w in errs.windows(2) {
                assert!(w[1] < 0.7 * w[0], "{e} c[{i},{j}|{k:?}]: {errs:?}");
            }
        }
    }
}

#[test]
fn estimators_agree_on_clear_cases() {
    let ds = sample_linear_sem(&pair(2.0), 10_000, 77).unwrap();
    let null = decouple(&ds);
    for e in ESTIMATORS {
        assert_eq!(estimate_coefficient(&ds, 1, 0, &[], &cfg(e)).unwrap().verdict, Verdict::Dependent, "{e}");
        assert_eq!(estimate_coefficient(&null, 1, 0, &[], &cfg(e)).unwrap().verdict, Verdict::Independent, "{e}");
    }
}

#[test]
fn estimation_is_deterministic() {
    let ds = sample_linear_sem(&pair(-1.5), 2000, 3).unwrap();
    for e in ESTIMATORS {
        let a = estimate_coefficient(&ds, 1, 0, &[], &cfg(e)).unwrap();
        let b = estimate_coefficient(&ds, 1, 0, &[], &cfg(e)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn linear_estimate_lies_inside_the_bounds() {
    // X0 → X1 → X2 and X0 → X2; every parent of X2 other than j is conditioned on
    let sem = LinearSem::new(vec![vec![0.0; 3], vec![0.8, 0.0, 0.0], vec![1.0, 2.0, 0.0]], vec![1.0, 1.0, 1.0]).unwrap();
    let sys = FunctionalSystem::linear(&sem).unwrap();
    let ds = sys.sample(10_000, 11).unwrap();
    for (j, other) in [(1usize, 0usize), (0, 1)] {
        let grid = Grid::observed(&sys, 2, &ds, DEFAULT_GRID_POINTS).unwrap();
        let (lo, hi) = functional_system_bounds(&sys, 2, j, &grid).unwrap();
        for e in ESTIMATORS {
            let est = estimate_coefficient(&ds, 2, j, &[other], &cfg(e)).unwrap();
            assert!(lo - 3.0 * est.tau <= est.value && est.value <= hi + 3.0 * est.tau, "{e} j={j}: {} outside [{lo}, {hi}] ± 3·{}", est.value, est.tau);
        }
    }
}
