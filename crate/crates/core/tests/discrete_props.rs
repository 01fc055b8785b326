use depmeter::discrete::{
    cmi_discrete, do_coefficient, entropy, exact_coefficient, information_flow, joint_distribution, DiscreteNode, FactoredModel, XorModel,
    XorVariant,
};
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

mod common;

const TOL: f64 = 1e-9;

fn distribution(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut p: Vec<f64> = w.iter().map(|x| x / s).collect();
    // make the row sum to one to the last bit
    let rest: f64 = p[1..].iter().sum();
    p[0] = 1.0 - rest;
    p
}

/// Random strictly positive model over `n` nodes in index order. Each node
/// ignores each of its parents with probability one half (identical CPT rows
/// along that parent), so exact conditional independences are common.
fn random_model(seed: u64, n: usize) -> FactoredModel {
    let mut r = common::rng(seed);
    let mut nodes: Vec<DiscreteNode> = Vec::new();
    for v in 0..n {
        let size = r.random_range(2..=3);
        let mut support: Vec<f64> = Vec::new();
        while support.len() < size {
            let x = f64::from(r.random_range(-4i32..=4));
            if !support.contains(&x) {
                support.push(x);
            }
        }
        let parents: Vec<usize> = (0..v).filter(|_| r.random::<f64>() < 0.6).collect();
        let sizes: Vec<usize> = parents.iter().map(|&p| nodes[p].support.len()).collect();
        let used: Vec<bool> = parents.iter().map(|_| r.random::<bool>()).collect();
        let rows: usize = sizes.iter().product();
        let mut by_key: std::collections::BTreeMap<Vec<usize>, Vec<f64>> = Default::default();
        let mut cpt = Vec::with_capacity(rows);
        for row in 0..rows {
            let mut rem = row;
            let mut key = vec![0; sizes.len()];
            for (slot, &s) in sizes.iter().enumerate().rev() {
                key[slot] = if used[slot] { rem % s } else { 0 };
                rem /= s;
            }
            let p = by_key.entry(key).or_insert_with(|| distribution(&mut r, size)).clone();
            cpt.push(p);
        }
        nodes.push(DiscreteNode { name: format!("N{v}"), support, parents, cpt });
    }
    FactoredModel::new(nodes).unwrap()
}

/// Brute-force `P(X_v = support[k])` by summing the CPT product.
fn brute_marginal(model: &FactoredModel, v: usize) -> Vec<f64> {
    let nodes = model.nodes();
    let sizes: Vec<usize> = nodes.iter().map(|n| n.support.len()).collect();
    let total: usize = sizes.iter().product();
    let mut out = vec![0.0; sizes[v]];
    for atom in 0..total {
        let mut vals = vec![0; nodes.len()];
        let mut rem = atom;
        for k in (0..nodes.len()).rev() {
            vals[k] = rem % sizes[k];
            rem /= sizes[k];
        }
        let mut p = 1.0;
        for (k, node) in nodes.iter().enumerate() {
            let row = node.parents.iter().fold(0, |acc, &q| acc * sizes[q] + vals[q]);
            p *= node.cpt[row][vals[k]];
        }
        out[vals[v]] += p;
    }
    out
}

fn subsets_without(n: usize, i: usize, j: usize) -> Vec<Vec<usize>> {
    let pool: Vec<usize> = (0..n).filter(|&v| v != i && v != j).collect();
    common::all_subsets(&pool)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn joint_marginals_match_the_cpt_product(seed in any::<u64>(), n in 2usize..=4) {
        let model = random_model(seed, n);
        let joint = joint_distribution(&model).unwrap();
        prop_assert!((joint.probs().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for v in 0..n {
            let m = joint.marginal(&[v]);
            for (a, b) in m.iter().zip(brute_marginal(&model, v)) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_coefficient_iff_zero_cmi(seed in any::<u64>()) {
        let model = random_model(seed, 3);
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                for k in subsets_without(3, i, j) {
                    let c = exact_coefficient(&model, i, j, &k).unwrap();
                    let cmi = cmi_discrete(&model, i, j, &k).unwrap().value;
                    prop_assert!(c >= 0.0 && cmi >= 0.0);
                    prop_assert_eq!(c <= TOL, cmi <= TOL, "c[{},{}|{:?}] = {}, cmi = {}", i, j, k, c, cmi);
                }
            }
        }
    }

    #[test]
    fn json_round_trip(seed in any::<u64>(), n in 1usize..=4) {
        let model = random_model(seed, n);
        let back = FactoredModel::from_json(&model.to_json()).unwrap();
        prop_assert_eq!(back, model);
    }

    #[test]
    fn flow_depends_on_the_dag_while_the_coefficient_does_not(b in 0.05f64..0.95, eps in 0.0f64..0.45) {
        let a = XorModel::new(XorVariant::A, b, eps).unwrap().to_model();
        let bm = XorModel::new(XorVariant::B, b, eps).unwrap().to_model();
        let flow_a = information_flow(&a, &[0], &[2], &[1]).unwrap().value;
        let flow_b = information_flow(&bm, &[0], &[2], &[1]).unwrap().value;
        let h = |p: f64| entropy(&[p, 1.0 - p]).unwrap().value;
        prop_assert!((flow_a - h(eps)).abs() < 1e-12);
        prop_assert!((flow_b - h(b)).abs() < 1e-12);
        prop_assert!((flow_a - flow_b).abs() > 1e-6 || (h(eps) - h(b)).abs() < 1e-6);
        let ca = exact_coefficient(&a, 2, 0, &[1]).unwrap();
        let cb = exact_coefficient(&bm, 2, 0, &[1]).unwrap();
        prop_assert!((ca - cb).abs() < 1e-12 && (ca - 1.0).abs() < 1e-12);
    }
}

/// `Y` copies `X` exactly and `Z` listens to `X` only. Both conditional
/// mutual informations vanish although `Z` depends on `(X, Y)`, so the
/// classical intersection property fails; the coefficient, defined on the
/// null realisations `x ≠ y` too, still sees `X → Z` given `Y`.
#[test]
fn intersection_holds_on_a_degenerate_model() {
    let bin = vec![0.0, 1.0];
    let model = FactoredModel::new(vec![
        DiscreteNode { name: "X".into(), support: bin.clone(), parents: vec![], cpt: vec![vec![0.5, 0.5]] },
        DiscreteNode { name: "Y".into(), support: bin.clone(), parents: vec![0], cpt: vec![vec![1.0, 0.0], vec![0.0, 1.0]] },
        DiscreteNode { name: "Z".into(), support: bin, parents: vec![0], cpt: vec![vec![0.9, 0.1], vec![0.2, 0.8]] },
    ])
    .unwrap();
    assert!(cmi_discrete(&model, 2, 0, &[1]).unwrap().value < 1e-12);
    assert!(cmi_discrete(&model, 2, 1, &[0]).unwrap().value < 1e-12);
    assert!(cmi_discrete(&model, 2, 0, &[]).unwrap().value > 0.1);
    assert!((exact_coefficient(&model, 2, 0, &[1]).unwrap() - 0.7).abs() < 1e-12);
    assert!(exact_coefficient(&model, 2, 1, &[0]).unwrap() < 1e-12);
    // the interventional version agrees on this model
    assert!((do_coefficient(&model, 2, 0, &[1]).unwrap() - 0.7).abs() < 1e-12);
}

#[test]
fn xor_values() {
    for eps in [0.0, 0.1, 0.4] {
        let a = XorModel::new(XorVariant::A, 0.5, eps).unwrap().to_model();
        let b = XorModel::new(XorVariant::B, 0.5, eps).unwrap().to_model();
        assert!((information_flow(&b, &[0], &[2], &[1]).unwrap().to_bits() - 1.0).abs() < 1e-12);
        let h = if eps == 0.0 { 0.0 } else { -eps * eps.log2() - (1.0 - eps) * (1.0 - eps).log2() };
        assert!((information_flow(&a, &[0], &[2], &[1]).unwrap().to_bits() - h).abs() < 1e-12);
        assert_eq!(exact_coefficient(&a, 2, 0, &[1]).unwrap(), 1.0);
        assert_eq!(exact_coefficient(&b, 2, 0, &[1]).unwrap(), 1.0);
    }
}
