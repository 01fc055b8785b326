//! Seeded synthetic data generators and the functional-system bound
//! calculator.
//!
//! Every generator draws each column's noise from its own ChaCha stream
//! (`seed`, stream = column index), so output does not depend on the order in
//! which columns are produced.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use thiserror::Error;

use crate::dataset::{Clamp, Dataset, DatasetError, Provenance};
use crate::gaussian::LinearSem;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("parent structure contains a cycle")]
    CyclicSupport,
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("node {j} is not a parent of node {i}")]
    NodeNotParent { i: usize, j: usize },
    #[error("evaluation grid is empty")]
    EmptyGrid,
    #[error("scale function of node {node} returned 0")]
    ZeroScale { node: usize },
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::CyclicSupport => "CyclicSupport",
            SimError::NotNormalized(_) => "NotNormalized",
            SimError::NodeNotParent { .. } => "NodeNotParent",
            SimError::EmptyGrid => "EmptyGrid",
            SimError::ZeroScale { .. } => "ZeroScale",
            SimError::UnknownNode(_) => "UnknownNode",
            SimError::InvalidParameter(_) => "InvalidParameter",
            SimError::Dataset(e) => e.code(),
        }
    }
}

/// Independent random stream for one column.
pub fn column_rng(seed: u64, column: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(column as u64);
    rng
}

fn check_n(n: usize) -> Result<(), SimError> {
    if n == 0 {
        return Err(SimError::InvalidParameter("N must be at least 1".into()));
    }
    Ok(())
}

fn normal_draws(n: usize, seed: u64, column: usize, sd: f64) -> Vec<f64> {
    let mut rng = column_rng(seed, column);
    if sd == 0.0 {
        return vec![0.0; n];
    }
    let d = Normal::new(0.0, sd).expect("finite sd");
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn uniform_draws(n: usize, seed: u64, column: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = column_rng(seed, column);
    let d = Uniform::new_inclusive(lo, hi).expect("valid range");
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn default_names(m: usize) -> Vec<String> {
    (1..=m).map(|k| format!("X{k}")).collect()
}

/// Forward-samples `X = AX + W` with `W_i ~ N(0, σ_i²)`.
pub fn sample_linear_sem(sem: &LinearSem, n: usize, seed: u64) -> Result<Dataset, SimError> {
    check_n(n)?;
    let m = sem.dim();
    let order = sem.topological_order();
    if order.len() != m {
        return Err(SimError::CyclicSupport);
    }
    let mut cols: Vec<Vec<f64>> = (0..m).map(|c| normal_draws(n, seed, c, sem.noise_variance(c).sqrt())).collect();
    for &i in order {
        for j in sem.parents(i) {
            let a = sem.coefficient(i, j);
            let (src, dst) = if j < i {
                let (l, r) = cols.split_at_mut(i);
                (&l[j], &mut r[0])
            } else {
                let (l, r) = cols.split_at_mut(j);
                (&r[0], &mut l[i])
            };
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }
    Ok(Dataset::from_columns(default_names(m), &cols)?)
}

/// Clamp value used when the natural-number branch is requested.
pub const NATURAL_CLAMP: f64 = 1.0;
/// Clamp value used for the non-natural case.
pub const NON_NATURAL_CLAMP: f64 = std::f64::consts::SQRT_2;

/// One clamped node. `natural` is the authoritative flag for the branch
/// that `X5` takes when `X3` is clamped; the value itself is never tested
/// for integrality.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeClamp {
    pub node: usize,
    pub value: f64,
    pub natural: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct InterventionSpec {
    pub clamps: Vec<NodeClamp>,
}

impl InterventionSpec {
    /// `do(X3 = 1)` taking the natural-number branch.
    pub fn x3_natural() -> Self {
        Self::x3(NATURAL_CLAMP, true)
    }

    /// `do(X3 = √2)` taking the ordinary branch.
    pub fn x3_non_natural() -> Self {
        Self::x3(NON_NATURAL_CLAMP, false)
    }

    pub fn x3(value: f64, natural: bool) -> Self {
        InterventionSpec { clamps: vec![NodeClamp { node: 2, value, natural }] }
    }

    /// Adds a clamp on any node (0-based). Untagged clamps are non-natural.
    pub fn clamp(mut self, node: usize, value: f64) -> Self {
        self.clamps.retain(|c| c.node != node);
        self.clamps.push(NodeClamp { node, value, natural: false });
        self
    }

    fn get(&self, node: usize) -> Option<&NodeClamp> {
        self.clamps.iter().find(|c| c.node == node)
    }

    fn provenance(&self, names: &[String]) -> Provenance {
        let mut clamps: Vec<&NodeClamp> = self.clamps.iter().collect();
        clamps.sort_by_key(|c| c.node);
        Provenance::Interventional(
            clamps
                .into_iter()
                .map(|c| Clamp {
                    column: names[c.node].clone(),
                    value: c.value,
                    tag: Some(if c.natural { "natural" } else { "non-natural" }.to_string()),
                })
                .collect(),
        )
    }
}

/// Five-node nonlinear system with `W_i ~ U[-1, 1]`:
///
/// ```text
/// X1 = W1
/// X3 = W3
/// X5 = W5                   if X3 is natural
///      2·sqrt|X1| + W5      otherwise
/// X4 = X3 − X5 + W4
/// X2 = X1² + 2·X4 − |X5| + W2
/// ```
///
/// Observationally `X3` is continuous and never natural, so only a flagged
/// intervention selects the first branch.
pub fn sample_nonlinear_system(n: usize, seed: u64, intervention: Option<&InterventionSpec>) -> Result<Dataset, SimError> {
    check_n(n)?;
    let names = default_names(5);
    let empty = InterventionSpec::default();
    let iv = intervention.unwrap_or(&empty);
    if let Some(c) = iv.clamps.iter().find(|c| c.node >= 5) {
        return Err(SimError::UnknownNode(c.node));
    }
    let w: Vec<Vec<f64>> = (0..5).map(|c| uniform_draws(n, seed, c, -1.0, 1.0)).collect();
    let pick = |node: usize, f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        match iv.get(node) {
            Some(c) => vec![c.value; n],
            None => (0..n).map(f).collect(),
        }
    };
    let x1 = pick(0, &|r| w[0][r]);
    let x3 = pick(2, &|r| w[2][r]);
    let natural = iv.get(2).is_some_and(|c| c.natural);
    let x5 = pick(4, &|r| if natural { w[4][r] } else { 2.0 * x1[r].abs().sqrt() + w[4][r] });
    let x4 = pick(3, &|r| x3[r] - x5[r] + w[3][r]);
    let x2 = pick(1, &|r| x1[r] * x1[r] + 2.0 * x4[r] - x5[r].abs() + w[1][r]);
    let ds = Dataset::from_columns(names.clone(), &[x1, x2, x3, x4, x5])?;
    Ok(match intervention {
        Some(iv) if !iv.clamps.is_empty() => ds.with_provenance(iv.provenance(&names)),
        _ => ds,
    })
}

/// Two-stratum model with columns `(C, X, Y)`; `C = 0` is female, `1` male.
///
/// female: `X ~ N(1.5, 1)`, `Y = 2X + N(0, 1)`;
/// male:   `X ~ N(1, 4)`,   `Y = 3X + N(0, 9)` (variances).
pub fn sample_group_model(n: usize, seed: u64, female_share: f64) -> Result<Dataset, SimError> {
    check_n(n)?;
    if !(0.0..=1.0).contains(&female_share) {
        return Err(SimError::InvalidParameter(format!("split {female_share} outside [0, 1]")));
    }
    let mut rc = column_rng(seed, 0);
    let c: Vec<f64> = (0..n).map(|_| if rc.random::<f64>() < female_share { 0.0 } else { 1.0 }).collect();
    let zx = normal_draws(n, seed, 1, 1.0);
    let zy = normal_draws(n, seed, 2, 1.0);
    let x: Vec<f64> = (0..n).map(|r| if c[r] == 0.0 { 1.5 + zx[r] } else { 1.0 + 2.0 * zx[r] }).collect();
    let y: Vec<f64> = (0..n).map(|r| if c[r] == 0.0 { 2.0 * x[r] + zy[r] } else { 3.0 * x[r] + 3.0 * zy[r] }).collect();
    Ok(Dataset::from_columns(vec!["C".into(), "X".into(), "Y".into()], &[c, x, y])?
        .with_levels(0, vec!["female".into(), "male".into()]))
}

/// `C ~ p` on `{1..M}`, `X = W1 / C`, `Y = C·X + W2`, `W ~ N(0, 1)`.
pub fn sample_ratio_model(n: usize, seed: u64, m: usize, p: &[f64]) -> Result<Dataset, SimError> {
    check_n(n)?;
    if m == 0 || p.len() != m {
        return Err(SimError::InvalidParameter(format!("expected {m} probabilities, got {}", p.len())));
    }
    if p.iter().any(|&q| !(q >= 0.0)) {
        return Err(SimError::InvalidParameter("negative probability".into()));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(SimError::NotNormalized(total));
    }
    let mut rc = column_rng(seed, 0);
    let c: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rc.random();
            let mut acc = 0.0;
            for (k, &q) in p.iter().enumerate() {
                acc += q;
                if u < acc {
                    return (k + 1) as f64;
                }
            }
            // rounding leftovers go to the last stratum with mass
            (p.iter().rposition(|&q| q > 0.0).unwrap() + 1) as f64
        })
        .collect();
    let w1 = normal_draws(n, seed, 1, 1.0);
    let w2 = normal_draws(n, seed, 2, 1.0);
    let x: Vec<f64> = (0..n).map(|r| w1[r] / c[r]).collect();
    let y: Vec<f64> = (0..n).map(|r| c[r] * x[r] + w2[r]).collect();
    Ok(Dataset::from_columns(vec!["C".into(), "X".into(), "Y".into()], &[c, x, y])?)
}

pub type NodeFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Zero-mean noise law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseLaw {
    Gaussian { sd: f64 },
    /// `U[-half_width, half_width]`.
    Uniform { half_width: f64 },
}

impl NoiseLaw {
    pub fn sd(&self) -> f64 {
        match *self {
            NoiseLaw::Gaussian { sd } => sd,
            NoiseLaw::Uniform { half_width } => half_width / 3f64.sqrt(),
        }
    }

    fn draws(&self, n: usize, seed: u64, column: usize) -> Vec<f64> {
        match *self {
            NoiseLaw::Gaussian { sd } => normal_draws(n, seed, column, sd),
            NoiseLaw::Uniform { half_width } => uniform_draws(n, seed, column, -half_width, half_width),
        }
    }
}

/// One node of `X_i = F_i(X_pa) + G_i(X_pa)·W_i`. `F` and `G` receive the
/// parent values in the order of `parents`.
#[derive(Clone)]
pub struct FunctionalNode {
    pub name: String,
    pub parents: Vec<usize>,
    pub location: NodeFn,
    pub scale: NodeFn,
    pub noise: NoiseLaw,
}

impl fmt::Debug for FunctionalNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalNode")
            .field("name", &self.name)
            .field("parents", &self.parents)
            .field("noise", &self.noise)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub struct FunctionalSystem {
    nodes: Vec<FunctionalNode>,
    order: Vec<usize>,
}

impl FunctionalSystem {
    pub fn new(nodes: Vec<FunctionalNode>) -> Result<Self, SimError> {
        let n = nodes.len();
        for node in &nodes {
            if let Some(&p) = node.parents.iter().find(|&&p| p >= n) {
                return Err(SimError::UnknownNode(p));
            }
            let sd = node.noise.sd();
            if !(sd.is_finite() && sd >= 0.0) {
                return Err(SimError::InvalidParameter(format!("noise scale of {}", node.name)));
            }
        }
        let mut indeg: Vec<usize> = nodes.iter().map(|v| v.parents.len()).collect();
        let mut ready: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for (c, node) in nodes.iter().enumerate() {
                for _ in node.parents.iter().filter(|&&p| p == v) {
                    indeg[c] -= 1;
                    if indeg[c] == 0 {
                        ready.push(c);
                    }
                }
            }
        }
        if order.len() != n {
            return Err(SimError::CyclicSupport);
        }
        Ok(FunctionalSystem { nodes, order })
    }

    /// Linear system `F_i = Σ_j A_{i,j} x_j`, `G_i = 1`, Gaussian noise.
    pub fn linear(sem: &LinearSem) -> Result<Self, SimError> {
        let nodes = (0..sem.dim())
            .map(|i| {
                let parents = sem.parents(i);
                let coefs: Vec<f64> = parents.iter().map(|&j| sem.coefficient(i, j)).collect();
                FunctionalNode {
                    name: format!("X{}", i + 1),
                    parents,
                    location: Arc::new(move |x: &[f64]| x.iter().zip(&coefs).map(|(a, b)| a * b).sum()),
                    scale: Arc::new(|_: &[f64]| 1.0),
                    noise: NoiseLaw::Gaussian { sd: sem.noise_variance(i).sqrt() },
                }
            })
            .collect();
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[FunctionalNode] {
        &self.nodes
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset, SimError> {
        check_n(n)?;
        let m = self.nodes.len();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); m];
        let mut buf = Vec::new();
        for &i in &self.order {
            let node = &self.nodes[i];
            let w = node.noise.draws(n, seed, i);
            let mut col = Vec::with_capacity(n);
            for (r, &wr) in w.iter().enumerate() {
                buf.clear();
                buf.extend(node.parents.iter().map(|&p| cols[p][r]));
                let g = (node.scale)(&buf);
                if g == 0.0 {
                    return Err(SimError::ZeroScale { node: i });
                }
                col.push((node.location)(&buf) + g * wr);
            }
            cols[i] = col;
        }
        let names = self.nodes.iter().map(|v| v.name.clone()).collect();
        Ok(Dataset::from_columns(names, &cols)?)
    }
}

/// Where the bound calculator evaluates `F_i` and `G_i`.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    /// Uniform lattice with `points` values per parent between the given
    /// bounds (ordered like the node's parents). Non-`j` axes are thinned
    /// when the full lattice would exceed [`LATTICE_CAP`] evaluations.
    Lattice { ranges: Vec<(f64, f64)>, points: usize },
    /// Explicit parent vectors.
    Points(Vec<Vec<f64>>),
}

pub const DEFAULT_GRID_POINTS: usize = 101;
pub const LATTICE_CAP: usize = 2_000_000;

impl Grid {
    /// Lattice over the observed range of each parent in `ds`.
    pub fn observed(sys: &FunctionalSystem, i: usize, ds: &Dataset, points: usize) -> Result<Grid, SimError> {
        let node = sys.nodes.get(i).ok_or(SimError::UnknownNode(i))?;
        let ranges = node
            .parents
            .iter()
            .map(|&p| {
                let col = ds.column(p);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect();
        Ok(Grid::Lattice { ranges, points })
    }
}

fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..k).map(|t| lo + (hi - lo) * t as f64 / (k - 1) as f64).collect()
}

/// Lower and upper bounds on the influence of parent `j` on node `i`:
///
/// * lower = max |ΔF_i / Δx_j|
/// * upper = max sqrt((ΔF_i / Δx_j)² + (σ_i · ΔG_i / Δx_j)²)
///
/// over grid pairs that differ only in `x_j`. Only neighbouring pairs along
/// `x_j` are evaluated: any wider difference quotient is a convex combination
/// of neighbouring ones and both objectives are convex, so the maxima agree.
/// On a lattice the result is a lower estimate of the true supremum.
pub fn functional_system_bounds(sys: &FunctionalSystem, i: usize, j: usize, grid: &Grid) -> Result<(f64, f64), SimError> {
    let node = sys.nodes.get(i).ok_or(SimError::UnknownNode(i))?;
    let pos = node.parents.iter().position(|&p| p == j).ok_or(SimError::NodeNotParent { i, j })?;
    let d = node.parents.len();
    let sigma = node.noise.sd();

    // group parent vectors by the other coordinates, each line sorted along x_j
    let mut lines: BTreeMap<Vec<u64>, Vec<Vec<f64>>> = BTreeMap::new();
    match grid {
        Grid::Points(pts) => {
            for p in pts {
                if p.len() != d {
                    return Err(SimError::InvalidParameter(format!("grid point has {} coordinates, expected {d}", p.len())));
                }
                let key: Vec<u64> = p.iter().enumerate().filter(|&(c, _)| c != pos).map(|(_, v)| v.to_bits()).collect();
                lines.entry(key).or_default().push(p.clone());
            }
        }
        Grid::Lattice { ranges, points } => {
            if ranges.len() != d {
                return Err(SimError::InvalidParameter(format!("{} ranges for {d} parents", ranges.len())));
            }
            if *points == 0 {
                return Err(SimError::EmptyGrid);
            }
            let others = d - 1;
            let mut k_other = *points;
            while others > 0 && k_other > 2 && (k_other as f64).powi(others as i32) * (*points as f64) > LATTICE_CAP as f64 {
                k_other -= 1;
            }
            let axes: Vec<Vec<f64>> = ranges
                .iter()
                .enumerate()
                .map(|(c, &(lo, hi))| linspace(lo, hi, if c == pos { *points } else { k_other }))
                .collect();
            let other_axes: Vec<usize> = (0..d).filter(|&c| c != pos).collect();
            let mut idx = vec![0usize; others];
            loop {
                let mut line = Vec::with_capacity(*points);
                for &xj in &axes[pos] {
                    let mut p = vec![0.0; d];
                    for (t, &c) in other_axes.iter().enumerate() {
                        p[c] = axes[c][idx[t]];
                    }
                    p[pos] = xj;
                    line.push(p);
                }
                lines.insert(idx.iter().map(|&v| v as u64).collect(), line);
                // odometer
                let mut t = 0;
                while t < others {
                    idx[t] += 1;
                    if idx[t] < axes[other_axes[t]].len() {
                        break;
                    }
                    idx[t] = 0;
                    t += 1;
                }
                if t == others {
                    break;
                }
            }
        }
    }

    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::NEG_INFINITY;
    for line in lines.values_mut() {
        line.sort_by(|a, b| a[pos].total_cmp(&b[pos]));
        line.dedup_by(|a, b| a[pos] == b[pos]);
        let evals: Vec<(f64, f64, f64)> = line.iter().map(|p| (p[pos], (node.location)(p), (node.scale)(p))).collect();
        for w in evals.windows(2) {
            let dx = w[1].0 - w[0].0;
            let df = (w[1].1 - w[0].1) / dx;
            let dg = (w[1].2 - w[0].2) / dx;
            lower = lower.max(df.abs());
            upper = upper.max(df.hypot(sigma * dg));
        }
    }
    if lower == f64::NEG_INFINITY {
        return Err(SimError::EmptyGrid);
    }
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cov(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        cov(a, b) / (cov(a, a) * cov(b, b)).sqrt()
    }

    #[test]
    fn linear_sem_covariance_and_determinism() {
        let sem = LinearSem::new(vec![vec![0.0, 0.0], vec![2.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let ds = sample_linear_sem(&sem, 100_000, 3).unwrap();
        let (x, y) = (ds.column(0), ds.column(1));
        assert!((cov(&x, &x) - 1.0).abs() < 0.05);
        assert!((cov(&x, &y) - 2.0).abs() < 0.05);
        assert!((cov(&y, &y) - 5.0).abs() < 0.05);
        assert_eq!(sample_linear_sem(&sem, 100, 9).unwrap(), sample_linear_sem(&sem, 100, 9).unwrap());
    }

    #[test]
    fn nonlinear_branches() {
        let obs = sample_nonlinear_system(4000, 1, None).unwrap();
        let s1: Vec<f64> = obs.column(0).iter().map(|v| 2.0 * v.abs().sqrt()).collect();
        assert!(corr(&obs.column(4), &s1) > 0.3);
        let n = 4000;
        let nat = sample_nonlinear_system(n, 1, Some(&InterventionSpec::x3_natural())).unwrap();
        assert!(corr(&nat.column(4), &s1).abs() < 3.0 / (n as f64).sqrt());
        assert!(nat.column(2).iter().all(|&v| v == 1.0));
        let iv = InterventionSpec::default().clamp(4, 0.0);
        let d = sample_nonlinear_system(500, 2, Some(&iv)).unwrap();
        let w2 = uniform_draws(500, 2, 1, -1.0, 1.0);
        for r in 0..500 {
            let (x1, x2, x4) = (d.get(r, 0), d.get(r, 1), d.get(r, 3));
            assert!((x2 - (x1 * x1 + 2.0 * x4 + w2[r])).abs() < 1e-12);
        }
    }

    #[test]
    fn group_model_slopes() {
        let ds = sample_group_model(10_000, 5, 0.5).unwrap();
        for (code, slope, tol) in [(0.0, 2.0, 0.05), (1.0, 3.0, 0.1)] {
            let rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| ds.get(r, 0) == code).collect();
            let s = ds.select_rows(&rows).unwrap();
            let (x, y) = (s.column(1), s.column(2));
            assert!((cov(&x, &y) / cov(&x, &x) - slope).abs() < tol);
        }
        let all_f = sample_group_model(200, 5, 1.0).unwrap();
        assert!(all_f.column(0).iter().all(|&c| c == 0.0));
        assert_eq!(all_f.level_label(0, 0.0), Some("female"));
    }

    #[test]
    fn ratio_model_strata() {
        let ds = sample_ratio_model(30_000, 4, 3, &[1.0 / 3.0; 3]).unwrap();
        for c in 1..=3 {
            let rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| ds.get(r, 0) == c as f64).collect();
            let s = ds.select_rows(&rows).unwrap();
            let (x, y) = (s.column(1), s.column(2));
            assert!((corr(&x, &y).powi(2) - 0.5).abs() < 0.03);
            assert!((cov(&x, &y) / cov(&x, &x) - c as f64).abs() < 0.1 * c as f64);
        }
        assert!(matches!(sample_ratio_model(10, 1, 2, &[0.5, 0.6]), Err(SimError::NotNormalized(_))));
        let one = sample_ratio_model(50, 1, 1, &[1.0]).unwrap();
        assert!(one.column(0).iter().all(|&c| c == 1.0));
    }

    fn single_child(f: NodeFn, g: NodeFn, sd: f64) -> FunctionalSystem {
        FunctionalSystem::new(vec![
            FunctionalNode {
                name: "X1".into(),
                parents: vec![],
                location: Arc::new(|_: &[f64]| 0.0),
                scale: Arc::new(|_: &[f64]| 1.0),
                noise: NoiseLaw::Gaussian { sd: 1.0 },
            },
            FunctionalNode { name: "X2".into(), parents: vec![0], location: f, scale: g, noise: NoiseLaw::Gaussian { sd } },
        ])
        .unwrap()
    }

    #[test]
    fn bounds_examples() {
        let grid = Grid::Lattice { ranges: vec![(-2.0, 2.0)], points: DEFAULT_GRID_POINTS };
        let lin = single_child(Arc::new(|x: &[f64]| -1.5 * x[0]), Arc::new(|_: &[f64]| 1.0), 1.0);
        let (lo, hi) = functional_system_bounds(&lin, 1, 0, &grid).unwrap();
        assert!((lo - 1.5).abs() < 1e-12 && (hi - 1.5).abs() < 1e-12);
        let het = single_child(Arc::new(|_: &[f64]| 0.0), Arc::new(|x: &[f64]| x[0]), 2.0);
        let (lo, hi) = functional_system_bounds(&het, 1, 0, &grid).unwrap();
        assert!(lo.abs() < 1e-12 && (hi - 2.0).abs() < 1e-9);
        assert!(matches!(functional_system_bounds(&het, 0, 1, &grid), Err(SimError::NodeNotParent { .. })));
        assert!(matches!(functional_system_bounds(&het, 1, 0, &Grid::Points(vec![])), Err(SimError::EmptyGrid)));
    }

    #[test]
    fn zero_scale_is_rejected() {
        let sys = single_child(Arc::new(|_: &[f64]| 0.0), Arc::new(|_: &[f64]| 0.0), 1.0);
        assert!(matches!(sys.sample(10, 1), Err(SimError::ZeroScale { node: 1 })));
    }
}
