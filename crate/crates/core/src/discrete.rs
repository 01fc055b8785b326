//! Exact computation on finite discrete Bayesian networks.
//!
//! Everything is enumeration over the joint table, so models are limited to
//! [`MAX_JOINT_ENTRIES`] atoms. Entropies, CMI and information flow are in
//! bits.
//!
//! Conditionals on zero-probability configurations are defined as the limit
//! of the model whose CPTs are mixed with a vanishing amount of uniform
//! noise, `(1 − ε)·P + ε·U`. Each atom then has probability
//! `coef·ε^order + o(ε^order)`, where `order` counts its zero CPT factors, and
//! the conditional keeps only the lowest-order atoms consistent with the
//! conditioning event. On positive-probability events this is the ordinary
//! conditional; on null events it is what the CPT product dictates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ipm::{self, EmpiricalDistribution};
use crate::Information;

pub const MAX_JOINT_ENTRIES: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscreteError {
    #[error("parent structure contains a cycle")]
    CyclicGraph,
    #[error("joint table would have {0} entries (limit 1e6)")]
    SupportTooLarge(u128),
    #[error("value {value} is not in the support of {node}")]
    ValueNotInSupport { node: String, value: f64 },
    #[error("node sets must be disjoint")]
    NonDisjointSets,
    #[error("probability vector does not sum to 1 (sum {0})")]
    NotNormalized(f64),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("bad model json: {0}")]
    BadModelJson(String),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
}

impl DiscreteError {
    pub fn code(&self) -> &'static str {
        match self {
            DiscreteError::CyclicGraph => "CyclicGraph",
            DiscreteError::SupportTooLarge(_) => "SupportTooLarge",
            DiscreteError::ValueNotInSupport { .. } => "ValueNotInSupport",
            DiscreteError::NonDisjointSets => "NonDisjointSets",
            DiscreteError::NotNormalized(_) => "NotNormalized",
            DiscreteError::UnknownNode(_) => "UnknownNode",
            DiscreteError::InvalidModel(_) => "InvalidModel",
            DiscreteError::BadModelJson(_) => "BadModelJson",
            DiscreteError::InvalidProbability(_) => "InvalidProbability",
        }
    }
}

/// A node with numeric support values and its CPT.
///
/// CPT rows are indexed by parent configurations in mixed radix, first
/// parent most significant; each row is a distribution over `support`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteNode {
    pub name: String,
    pub support: Vec<f64>,
    pub parents: Vec<usize>,
    pub cpt: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactoredModel {
    nodes: Vec<DiscreteNode>,
    order: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeJson {
    name: String,
    support: Vec<f64>,
    #[serde(default)]
    parents: Vec<String>,
    cpt: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    nodes: Vec<NodeJson>,
}

impl FactoredModel {
    pub fn new(nodes: Vec<DiscreteNode>) -> Result<Self, DiscreteError> {
        let n = nodes.len();
        if n == 0 {
            return Err(DiscreteError::InvalidModel("model has no nodes".into()));
        }
        for node in &nodes {
            if node.support.is_empty() {
                return Err(DiscreteError::InvalidModel(format!("{} has empty support", node.name)));
            }
            let mut s = node.support.clone();
            s.sort_by(f64::total_cmp);
            if s.windows(2).any(|w| w[0] == w[1]) || s.iter().any(|v| !v.is_finite()) {
                return Err(DiscreteError::InvalidModel(format!("{} has repeated or non-finite support values", node.name)));
            }
            if node.parents.iter().any(|&p| p >= n) {
                return Err(DiscreteError::InvalidModel(format!("{} has an out-of-range parent", node.name)));
            }
            let rows: usize = node.parents.iter().map(|&p| nodes[p].support.len()).product();
            if node.cpt.len() != rows {
                return Err(DiscreteError::InvalidModel(format!("{} needs {rows} CPT rows, has {}", node.name, node.cpt.len())));
            }
            for row in &node.cpt {
                if row.len() != node.support.len() {
                    return Err(DiscreteError::InvalidModel(format!("{} has a CPT row of the wrong length", node.name)));
                }
                if let Some(&p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(DiscreteError::InvalidProbability(p));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(DiscreteError::NotNormalized(s));
                }
            }
        }
        let mut names: Vec<&str> = nodes.iter().map(|n| n.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(DiscreteError::InvalidModel("duplicate node names".into()));
        }
        let order = topo(&nodes).ok_or(DiscreteError::CyclicGraph)?;
        Ok(FactoredModel { nodes, order })
    }

    pub fn from_json(text: &str) -> Result<Self, DiscreteError> {
        let spec: ModelJson = serde_json::from_str(text).map_err(|e| DiscreteError::BadModelJson(e.to_string()))?;
        let index: BTreeMap<&str, usize> = spec.nodes.iter().enumerate().map(|(k, n)| (n.name.as_str(), k)).collect();
        let mut nodes = Vec::with_capacity(spec.nodes.len());
        for n in &spec.nodes {
            let parents = n
                .parents
                .iter()
                .map(|p| index.get(p.as_str()).copied().ok_or_else(|| DiscreteError::UnknownNode(p.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            nodes.push(DiscreteNode { name: n.name.clone(), support: n.support.clone(), parents, cpt: n.cpt.clone() });
        }
        Self::new(nodes)
    }

    pub fn to_json(&self) -> String {
        let spec = ModelJson {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeJson {
                    name: n.name.clone(),
                    support: n.support.clone(),
                    parents: n.parents.iter().map(|&p| self.nodes[p].name.clone()).collect(),
                    cpt: n.cpt.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&spec).expect("model serialises")
    }

    pub fn nodes(&self) -> &[DiscreteNode] {
        &self.nodes
    }

    pub fn node_index(&self, name: &str) -> Result<usize, DiscreteError> {
        self.nodes.iter().position(|n| n.name == name).ok_or_else(|| DiscreteError::UnknownNode(name.to_string()))
    }

    fn check_nodes(&self, idx: &[usize]) -> Result<(), DiscreteError> {
        match idx.iter().find(|&&k| k >= self.nodes.len()) {
            Some(k) => Err(DiscreteError::UnknownNode(format!("#{k}"))),
            None => Ok(()),
        }
    }

    fn value_index(&self, node: usize, value: f64) -> Result<usize, DiscreteError> {
        self.nodes[node]
            .support
            .iter()
            .position(|&v| (v - value).abs() <= 1e-12)
            .ok_or_else(|| DiscreteError::ValueNotInSupport { node: self.nodes[node].name.clone(), value })
    }
}

fn topo(nodes: &[DiscreteNode]) -> Option<Vec<usize>> {
    let n = nodes.len();
    let mut indeg: Vec<usize> = nodes.iter().map(|x| x.parents.len()).collect();
    let mut ready: Vec<usize> = (0..n).rev().filter(|&k| indeg[k] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(k) = ready.pop() {
        order.push(k);
        for (c, node) in nodes.iter().enumerate() {
            for _ in node.parents.iter().filter(|&&p| p == k) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(c);
                }
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Full joint table. Atoms are indexed in mixed radix, node 0 most
/// significant.
#[derive(Clone, Debug)]
pub struct JointTable {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    probs: Vec<f64>,
    /// Number of zero CPT factors per atom.
    order: Vec<u32>,
    /// Product of nonzero factors times `1/|support|` per zero factor.
    coef: Vec<f64>,
}

impl JointTable {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Support index of `node` in atom `atom`.
    pub fn value_of(&self, atom: usize, node: usize) -> usize {
        (atom / self.strides[node]) % self.sizes[node]
    }

    /// Probability of the atom with the given support indices.
    pub fn prob(&self, values: &[usize]) -> f64 {
        let a: usize = values.iter().zip(&self.strides).map(|(v, s)| v * s).sum();
        self.probs[a]
    }

    fn config(&self, atom: usize, nodes: &[usize]) -> usize {
        nodes.iter().fold(0, |acc, &n| acc * self.sizes[n] + self.value_of(atom, n))
    }

    fn n_configs(&self, nodes: &[usize]) -> usize {
        nodes.iter().map(|&n| self.sizes[n]).product()
    }

    /// Marginal over `nodes`, indexed in mixed radix (first node most
    /// significant). An empty set gives `[1.0]`.
    pub fn marginal(&self, nodes: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_configs(nodes)];
        for (a, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                out[self.config(a, nodes)] += p;
            }
        }
        out
    }

    /// `P(X_target | X_cond = c)` for every configuration `c`, using the
    /// vanishing-noise limit on null events.
    fn conditional_limit(&self, target: usize, cond: &[usize]) -> Vec<Vec<f64>> {
        let nc = self.n_configs(cond);
        let nt = self.sizes[target];
        let mut min_order = vec![u32::MAX; nc];
        for a in 0..self.probs.len() {
            let c = self.config(a, cond);
            min_order[c] = min_order[c].min(self.order[a]);
        }
        let mut acc = vec![vec![0.0; nt]; nc];
        for a in 0..self.probs.len() {
            let c = self.config(a, cond);
            if self.order[a] == min_order[c] {
                acc[c][self.value_of(a, target)] += self.coef[a];
            }
        }
        for row in &mut acc {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
        }
        acc
    }
}

/// Chain-rule product of the CPTs over every atom.
pub fn joint_distribution(model: &FactoredModel) -> Result<JointTable, DiscreteError> {
    let sizes: Vec<usize> = model.nodes.iter().map(|n| n.support.len()).collect();
    let total: u128 = sizes.iter().map(|&s| s as u128).product();
    if total > MAX_JOINT_ENTRIES as u128 {
        return Err(DiscreteError::SupportTooLarge(total));
    }
    let total = total as usize;
    let mut strides = vec![1; sizes.len()];
    for k in (0..sizes.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * sizes[k + 1];
    }
    let mut probs = vec![0.0; total];
    let mut order = vec![0u32; total];
    let mut coef = vec![0.0; total];
    let mut vals = vec![0usize; sizes.len()];
    for a in 0..total {
        for (k, v) in vals.iter_mut().enumerate() {
            *v = (a / strides[k]) % sizes[k];
        }
        let mut o = 0u32;
        let mut c = 1.0;
        for &k in &model.order {
            let node = &model.nodes[k];
            let row = node.parents.iter().fold(0, |acc, &p| acc * sizes[p] + vals[p]);
            let p = node.cpt[row][vals[k]];
            if p == 0.0 {
                o += 1;
                c /= sizes[k] as f64;
            } else {
                c *= p;
            }
        }
        order[a] = o;
        coef[a] = c;
        probs[a] = if o == 0 { c } else { 0.0 };
    }
    Ok(JointTable { sizes, strides, probs, order, coef })
}

/// Replaces each assigned node's CPT by a point mass and cuts its parents.
pub fn do_intervene(model: &FactoredModel, assignments: &[(usize, f64)]) -> Result<FactoredModel, DiscreteError> {
    let mut nodes = model.nodes.clone();
    for &(k, value) in assignments {
        model.check_nodes(&[k])?;
        let vi = model.value_index(k, value)?;
        let node = &mut nodes[k];
        node.parents.clear();
        let mut row = vec![0.0; node.support.len()];
        row[vi] = 1.0;
        node.cpt = vec![row];
    }
    FactoredModel::new(nodes)
}

fn disjoint(sets: &[&[usize]]) -> Result<(), DiscreteError> {
    let mut all: Vec<usize> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    let n = all.len();
    all.sort_unstable();
    all.dedup();
    if all.len() != n {
        return Err(DiscreteError::NonDisjointSets);
    }
    Ok(())
}

/// `H(p) = −Σ p log₂ p` in bits.
pub fn entropy(p: &[f64]) -> Result<Information, DiscreteError> {
    if let Some(&bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(DiscreteError::InvalidProbability(bad));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(DiscreteError::NotNormalized(s));
    }
    Ok(Information::bits(p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum::<f64>().max(0.0)))
}

/// `I(X_i; X_j | X_K)` in bits.
pub fn cmi_discrete(model: &FactoredModel, i: usize, j: usize, k: &[usize]) -> Result<Information, DiscreteError> {
    model.check_nodes(&[i, j])?;
    model.check_nodes(k)?;
    disjoint(&[&[i], &[j], k])?;
    let joint = joint_distribution(model)?;
    let ijk: Vec<usize> = [i, j].iter().chain(k).copied().collect();
    let ik: Vec<usize> = std::iter::once(i).chain(k.iter().copied()).collect();
    let jk: Vec<usize> = std::iter::once(j).chain(k.iter().copied()).collect();
    let p_ijk = joint.marginal(&ijk);
    let p_ik = joint.marginal(&ik);
    let p_jk = joint.marginal(&jk);
    let p_k = joint.marginal(k);
    let (si, sj) = (joint.sizes[i], joint.sizes[j]);
    let nk = p_k.len();
    let mut total = 0.0;
    for vi in 0..si {
        for vj in 0..sj {
            for ck in 0..nk {
                let p = p_ijk[(vi * sj + vj) * nk + ck];
                if p > 0.0 {
                    total += p * (p * p_k[ck] / (p_ik[vi * nk + ck] * p_jk[vj * nk + ck])).log2();
                }
            }
        }
    }
    Ok(Information::bits(total.max(0.0)))
}

fn assignments(model: &FactoredModel, nodes: &[usize], mut cfg: usize) -> Vec<(usize, f64)> {
    let mut out = vec![(0, 0.0); nodes.len()];
    for (slot, &n) in nodes.iter().enumerate().rev() {
        let s = &model.nodes[n].support;
        out[slot] = (n, s[cfg % s.len()]);
        cfg /= s.len();
    }
    out
}

fn do_marginal(model: &FactoredModel, clamp: &[(usize, f64)], of: &[usize]) -> Result<Vec<f64>, DiscreteError> {
    let m = do_intervene(model, clamp)?;
    Ok(joint_distribution(&m)?.marginal(of))
}

/// Information flow from `A` to `B` imposing `K`, in bits:
///
/// `Σ P(x_K) P(x_A|do x_K) P(x_B|do(x_A,x_K)) log₂ [P(x_B|do(x_A,x_K)) / Σ_{x'_A} P(x'_A|do x_K) P(x_B|do(x'_A,x_K))]`.
pub fn information_flow(model: &FactoredModel, a: &[usize], b: &[usize], k: &[usize]) -> Result<Information, DiscreteError> {
    model.check_nodes(a)?;
    model.check_nodes(b)?;
    model.check_nodes(k)?;
    if a.is_empty() || b.is_empty() {
        return Err(DiscreteError::InvalidModel("information flow needs nonempty A and B".into()));
    }
    disjoint(&[a, b, k])?;
    let joint = joint_distribution(model)?;
    let p_k = joint.marginal(k);
    let na = joint.n_configs(a);
    let mut total = 0.0;
    for (ck, &pk) in p_k.iter().enumerate() {
        if pk == 0.0 {
            continue;
        }
        let clamp_k = assignments(model, k, ck);
        let p_a = do_marginal(model, &clamp_k, a)?;
        let mut p_b_given: Vec<Vec<f64>> = Vec::with_capacity(na);
        for ca in 0..na {
            let mut clamp = assignments(model, a, ca);
            clamp.extend_from_slice(&clamp_k);
            p_b_given.push(do_marginal(model, &clamp, b)?);
        }
        let nb = p_b_given[0].len();
        let mix: Vec<f64> = (0..nb).map(|cb| (0..na).map(|ca| p_a[ca] * p_b_given[ca][cb]).sum()).collect();
        for ca in 0..na {
            if p_a[ca] == 0.0 {
                continue;
            }
            for cb in 0..nb {
                let p = p_b_given[ca][cb];
                if p > 0.0 {
                    total += pk * p_a[ca] * p * (p / mix[cb]).log2();
                }
            }
        }
    }
    Ok(Information::bits(total.max(0.0)))
}

fn w1_finite(support: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let (Ok(a), Ok(b)) = (
        EmpiricalDistribution::normalized(1, support.to_vec(), p),
        EmpiricalDistribution::normalized(1, support.to_vec(), q),
    ) else {
        unreachable!("conditionals are normalised distributions")
    };
    ipm::wasserstein_1d_exact(&a, &b).expect("one-dimensional")
}

/// Supremum over `x_K` and `x_j ≠ y_j` of
/// `W₁(P(X_i|x_j,x_K), P(X_i|y_j,x_K)) / |x_j − y_j|`, over every
/// realisation including null ones.
pub fn exact_coefficient(model: &FactoredModel, i: usize, j: usize, k: &[usize]) -> Result<f64, DiscreteError> {
    model.check_nodes(&[i, j])?;
    model.check_nodes(k)?;
    disjoint(&[&[i], &[j], k])?;
    let joint = joint_distribution(model)?;
    let cond: Vec<usize> = std::iter::once(j).chain(k.iter().copied()).collect();
    let cpd = joint.conditional_limit(i, &cond);
    let nk = joint.n_configs(k);
    Ok(sup_ratio(model, i, j, nk, |vj, ck| cpd[vj * nk + ck].clone()))
}

/// As [`exact_coefficient`] with `P(X_i | do(x_j, x_K))` in place of the
/// observational conditionals.
pub fn do_coefficient(model: &FactoredModel, i: usize, j: usize, k: &[usize]) -> Result<f64, DiscreteError> {
    model.check_nodes(&[i, j])?;
    model.check_nodes(k)?;
    disjoint(&[&[i], &[j], k])?;
    joint_distribution(model)?;
    let cond: Vec<usize> = std::iter::once(j).chain(k.iter().copied()).collect();
    let sj = model.nodes[j].support.len();
    let nk: usize = k.iter().map(|&n| model.nodes[n].support.len()).product();
    let mut table = Vec::with_capacity(sj * nk);
    for c in 0..sj * nk {
        table.push(do_marginal(model, &assignments(model, &cond, c), &[i])?);
    }
    Ok(sup_ratio(model, i, j, nk, |vj, ck| table[vj * nk + ck].clone()))
}

fn sup_ratio(model: &FactoredModel, i: usize, j: usize, nk: usize, dist: impl Fn(usize, usize) -> Vec<f64>) -> f64 {
    let si = &model.nodes[i].support;
    let sj = &model.nodes[j].support;
    let mut best: f64 = 0.0;
    for ck in 0..nk {
        for x in 0..sj.len() {
            for y in x + 1..sj.len() {
                let w = w1_finite(si, &dist(x, ck), &dist(y, ck));
                best = best.max(w / (sj[x] - sj[y]).abs());
            }
        }
    }
    best
}

/// Which of the two three-node XOR networks to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XorVariant {
    /// `Y` is the root (`P(Y=0) = b`); `X` copies `Y` with flip probability ε.
    A,
    /// `X` is the root (`P(X=0) = b`); `Y` copies `X` with flip probability ε.
    B,
}

/// Binary `X`, `Y` with one copying the other through a noisy channel, and
/// `Z = X ⊕ Y`. Node order is always `X, Y, Z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct XorModel {
    pub variant: XorVariant,
    pub b: f64,
    pub eps: f64,
}

impl XorModel {
    pub fn new(variant: XorVariant, b: f64, eps: f64) -> Result<Self, DiscreteError> {
        for p in [b, eps] {
            if !(0.0..=1.0).contains(&p) {
                return Err(DiscreteError::InvalidProbability(p));
            }
        }
        Ok(XorModel { variant, b, eps })
    }

    pub fn to_model(&self) -> FactoredModel {
        let bin = vec![0.0, 1.0];
        let root = vec![vec![self.b, 1.0 - self.b]];
        let copy = vec![vec![1.0 - self.eps, self.eps], vec![self.eps, 1.0 - self.eps]];
        let xor = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let (x, y) = match self.variant {
            XorVariant::B => (
                DiscreteNode { name: "X".into(), support: bin.clone(), parents: vec![], cpt: root },
                DiscreteNode { name: "Y".into(), support: bin.clone(), parents: vec![0], cpt: copy },
            ),
            XorVariant::A => (
                DiscreteNode { name: "X".into(), support: bin.clone(), parents: vec![1], cpt: copy },
                DiscreteNode { name: "Y".into(), support: bin.clone(), parents: vec![], cpt: root },
            ),
        };
        let z = DiscreteNode { name: "Z".into(), support: bin, parents: vec![0, 1], cpt: xor };
        FactoredModel::new(vec![x, y, z]).expect("xor model is well formed")
    }
}
