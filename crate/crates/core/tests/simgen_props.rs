use std::sync::Arc;

use depmeter::dataset::{Dataset, Provenance};
use depmeter::gaussian::LinearSem;
use depmeter::simgen::{
    column_rng, functional_system_bounds, sample_group_model, sample_linear_sem, sample_nonlinear_system, sample_ratio_model, FunctionalNode,
    FunctionalSystem, Grid, InterventionSpec, NoiseLaw, SimError, NATURAL_CLAMP, NON_NATURAL_CLAMP,
};
use proptest::prelude::*;
use rand::Rng;

mod common;

const UNIFORM_SD: f64 = 0.577_350_269_189_625_8; // 1/√3

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn assert_centred(w: &[f64], sd: f64, what: &str) {
    let bound = 4.0 * sd / (w.len() as f64).sqrt();
    assert!(mean(w).abs() <= bound, "{what}: mean {} beyond {bound}", mean(w));
}

/// Recovers `W1..W5` of the nonlinear system from its observational columns.
fn nonlinear_noise(ds: &Dataset) -> Vec<Vec<f64>> {
    let c: Vec<Vec<f64>> = (0..5).map(|k| ds.column(k)).collect();
    let n = ds.n_rows();
    vec![
        c[0].clone(),
        (0..n).map(|r| c[1][r] - c[0][r] * c[0][r] - 2.0 * c[3][r] + c[4][r].abs()).collect(),
        c[2].clone(),
        (0..n).map(|r| c[3][r] - c[2][r] + c[4][r]).collect(),
        (0..n).map(|r| c[4][r] - 2.0 * c[0][r].abs().sqrt()).collect(),
    ]
}

fn every_generator(n: usize, seed: u64) -> Vec<Dataset> {
    let sem = LinearSem::new(vec![vec![0.0, 0.0, 0.0], vec![1.5, 0.0, 0.0], vec![-1.0, 0.5, 0.0]], vec![1.0, 0.5, 2.0]).unwrap();
    vec![
        sample_linear_sem(&sem, n, seed).unwrap(),
        sample_nonlinear_system(n, seed, None).unwrap(),
        sample_nonlinear_system(n, seed, Some(&InterventionSpec::x3_natural())).unwrap(),
        sample_group_model(n, seed, 0.5).unwrap(),
        sample_ratio_model(n, seed, 3, &[0.2, 0.3, 0.5]).unwrap(),
        FunctionalSystem::linear(&sem).unwrap().sample(n, seed).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn generators_are_pure_functions_of_their_inputs(seed in any::<u64>()) {
        let a = every_generator(300, seed);
        let b = every_generator(300, seed);
        let c = every_generator(300, seed.wrapping_add(1));
        for ((x, y), z) in a.iter().zip(&b).zip(&c) {
            prop_assert_eq!(x, y);
            prop_assert_ne!(x, z);
        }
    }

    /// Per-column streams: a shorter run is a prefix of a longer one.
    #[test]
    fn shorter_runs_are_prefixes(seed in any::<u64>(), short in 1usize..200) {
        for (s, l) in every_generator(short, seed).iter().zip(every_generator(400, seed)) {
            let rows: Vec<usize> = (0..short).collect();
            prop_assert_eq!(s, &l.select_rows(&rows).unwrap());
        }
    }
}

#[test]
fn noise_terms_are_centred() {
    let n = 20_000;
    for seed in 0..5 {
        for (k, w) in nonlinear_noise(&sample_nonlinear_system(n, seed, None).unwrap()).iter().enumerate() {
            assert_centred(w, UNIFORM_SD, &format!("W{}", k + 1));
        }
        let sem = LinearSem::new(vec![vec![0.0, 0.0], vec![2.0, 0.0]], vec![4.0, 0.25]).unwrap();
        let lin = sample_linear_sem(&sem, n, seed).unwrap();
        let (x, y) = (lin.column(0), lin.column(1));
        assert_centred(&x, 2.0, "linear W1");
        assert_centred(&y.iter().zip(&x).map(|(y, x)| y - 2.0 * x).collect::<Vec<_>>(), 0.5, "linear W2");

        let ratio = sample_ratio_model(n, seed, 3, &[1.0 / 3.0; 3]).unwrap();
        let (c, x, y) = (ratio.column(0), ratio.column(1), ratio.column(2));
        let w1: Vec<f64> = c.iter().zip(&x).map(|(c, x)| c * x).collect();
        let w2: Vec<f64> = (0..n).map(|r| y[r] - c[r] * x[r]).collect();
        assert_centred(&w1, 1.0, "ratio W1");
        assert_centred(&w2, 1.0, "ratio W2");

        let group = sample_group_model(n, seed, 0.5).unwrap();
        let female: Vec<usize> = (0..n).filter(|&r| group.get(r, 0) == 0.0).collect();
        let male: Vec<usize> = (0..n).filter(|&r| group.get(r, 0) == 1.0).collect();
        let resid = |rows: &[usize], mx: f64, slope: f64| -> (Vec<f64>, Vec<f64>) {
            rows.iter().map(|&r| (group.get(r, 1) - mx, group.get(r, 2) - slope * group.get(r, 1))).unzip()
        };
        let (fx, fy) = resid(&female, 1.5, 2.0);
        let (mx, my) = resid(&male, 1.0, 3.0);
        assert_centred(&fx, 1.0, "female X");
        assert_centred(&fy, 1.0, "female Y");
        assert_centred(&mx, 2.0, "male X");
        assert_centred(&my, 3.0, "male Y");
        let share = female.len() as f64 / n as f64;
        assert!((share - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt(), "female share {share}");
    }
}

#[test]
fn column_streams_are_uncorrelated() {
    let n = 20_000;
    let bound = 4.0 / (n as f64).sqrt();
    let draws: Vec<Vec<f64>> = (0..6)
        .map(|c| {
            let mut r = column_rng(9, c);
            (0..n).map(|_| r.random::<f64>()).collect()
        })
        .collect();
    for a in 0..6 {
        for b in a + 1..6 {
            assert!(correlation(&draws[a], &draws[b]).abs() < bound, "streams {a}, {b}");
        }
    }
    let w = nonlinear_noise(&sample_nonlinear_system(n, 9, None).unwrap());
    for a in 0..5 {
        for b in a + 1..5 {
            assert!(correlation(&w[a], &w[b]).abs() < bound, "W{} and W{}", a + 1, b + 1);
        }
    }
}

#[test]
fn interventions_clamp_and_tag() {
    let nat = sample_nonlinear_system(500, 1, Some(&InterventionSpec::x3_natural())).unwrap();
    let non = sample_nonlinear_system(500, 1, Some(&InterventionSpec::x3_non_natural())).unwrap();
    assert!(nat.column(2).iter().all(|&v| v == NATURAL_CLAMP));
    assert!(non.column(2).iter().all(|&v| v == NON_NATURAL_CLAMP));
    assert_eq!(nat.clamped_columns().unwrap(), vec![(2, NATURAL_CLAMP)]);
    let tags = |ds: &Dataset| match ds.provenance() {
        Provenance::Interventional(c) => c.iter().map(|c| c.tag.clone().unwrap()).collect::<Vec<_>>(),
        Provenance::Observational => vec![],
    };
    assert_eq!(tags(&nat), ["natural"]);
    assert_eq!(tags(&non), ["non-natural"]);
    // the natural branch cuts X1 → X5; the other keeps it
    let obs = sample_nonlinear_system(500, 1, None).unwrap();
    let x1 = obs.column(0);
    for ((a, x5), x1) in nat.column(4).iter().zip(obs.column(4)).zip(&x1) {
        assert!((a - (x5 - 2.0 * x1.abs().sqrt())).abs() < 1e-12);
    }
    assert_eq!(non.column(4), obs.column(4));
    // downstream nodes see the clamp
    let expect_x4: Vec<f64> = (0..500).map(|r| NON_NATURAL_CLAMP - non.get(r, 4) + (obs.get(r, 3) - obs.get(r, 2) + obs.get(r, 4))).collect();
    for (a, b) in non.column(3).iter().zip(&expect_x4) {
        assert!((a - b).abs() < 1e-12);
    }
    let both = InterventionSpec::x3_natural().clamp(0, 0.25);
    let ds = sample_nonlinear_system(100, 1, Some(&both)).unwrap();
    assert_eq!(ds.clamped_columns().unwrap(), vec![(0, 0.25), (2, NATURAL_CLAMP)]);
    assert!(matches!(sample_nonlinear_system(10, 1, Some(&InterventionSpec::default().clamp(7, 0.0))), Err(SimError::UnknownNode(7))));
}

fn node(name: &str, parents: Vec<usize>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> FunctionalNode {
    FunctionalNode { name: name.into(), parents, location: Arc::new(f), scale: Arc::new(g), noise: NoiseLaw::Gaussian { sd: 1.0 } }
}

#[test]
fn bounds_on_known_systems() {
    // Y = X² + (1 + X²)·W on a 101-point lattice over [0, 1]: the steepest
    // neighbouring quotient of both F and G is (1 − 0.99²)/0.01 = 1.99
    let sys = FunctionalSystem::new(vec![
        node("X", vec![], |_| 0.0, |_| 1.0),
        node("Y", vec![0], |x| x[0] * x[0], |x| 1.0 + x[0] * x[0]),
    ])
    .unwrap();
    let grid = Grid::Lattice { ranges: vec![(0.0, 1.0)], points: 101 };
    let (lo, hi) = functional_system_bounds(&sys, 1, 0, &grid).unwrap();
    assert!((lo - 1.99).abs() < 1e-9, "{lo}");
    assert!((hi - 1.99 * 2f64.sqrt()).abs() < 1e-9, "{hi}");

    // explicit points: only pairs sharing the other coordinate count
    let sys = FunctionalSystem::new(vec![
        node("A", vec![], |_| 0.0, |_| 1.0),
        node("B", vec![], |_| 0.0, |_| 1.0),
        node("C", vec![0, 1], |x| x[0] * x[1], |_| 1.0),
    ])
    .unwrap();
    let pts = Grid::Points(vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 5.0], vec![2.0, 5.0], vec![9.0, 7.0]]);
    assert_eq!(functional_system_bounds(&sys, 2, 0, &pts).unwrap(), (5.0, 5.0));

    // a linear node gives |a| on both sides, whatever the grid
    let sem = LinearSem::new(vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![-2.5, 0.7, 0.0]], vec![1.0, 1.0, 1.0]).unwrap();
    let lin = FunctionalSystem::linear(&sem).unwrap();
    let grid = Grid::Lattice { ranges: vec![(-3.0, 3.0), (-1.0, 2.0)], points: 11 };
    let (lo, hi) = functional_system_bounds(&lin, 2, 0, &grid).unwrap();
    assert!((lo - 2.5).abs() < 1e-9 && (hi - 2.5).abs() < 1e-9);

    assert!(matches!(functional_system_bounds(&lin, 0, 1, &grid), Err(SimError::NodeNotParent { .. })));
    assert!(matches!(functional_system_bounds(&lin, 2, 0, &Grid::Lattice { ranges: vec![(0.0, 1.0); 2], points: 0 }), Err(SimError::EmptyGrid)));
}

#[test]
fn rejects_bad_parameters() {
    assert!(sample_ratio_model(10, 0, 3, &[0.5, 0.5]).is_err());
    assert!(matches!(sample_ratio_model(10, 0, 2, &[0.5, 0.6]), Err(SimError::NotNormalized(_))));
    assert!(sample_group_model(10, 0, 1.5).is_err());
    assert!(sample_nonlinear_system(0, 0, None).is_err());
    let zero = FunctionalSystem::new(vec![node("X", vec![], |_| 0.0, |_| 0.0)]).unwrap();
    assert!(matches!(zero.sample(3, 0), Err(SimError::ZeroScale { node: 0 })));
    assert!(matches!(
        FunctionalSystem::new(vec![node("X", vec![1], |_| 0.0, |_| 1.0), node("Y", vec![0], |_| 0.0, |_| 1.0)]),
        Err(SimError::CyclicSupport)
    ));
}
