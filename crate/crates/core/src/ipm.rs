//! Metric spaces, weighted empirical distributions and the two integral
//! probability metrics used throughout the crate.
//!
//! * [`wasserstein_lp`] solves the Kantorovich–Rubinstein dual exactly through
//!   its primal transportation problem (network simplex).
//! * [`wasserstein_dual_simplex`] solves the literal Lipschitz-dual LP with a
//!   dense tableau; it exists to cross-check the network simplex on tiny inputs.
//! * [`wasserstein_1d_exact`] is the closed form on the real line.
//! * [`mmd_squared`] is the biased (V-statistic) MMD² with a Gaussian kernel.
//! * [`sandwich_bounds`] brackets W₁ between the mean gap and a coupling's
//!   quadratic cost.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Default cap on the total number of atoms handed to the LP solvers.
pub const DEFAULT_SIZE_CAP: usize = 2000;

/// Largest instance accepted by the dense dual simplex.
pub const DENSE_DUAL_CAP: usize = 32;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IpmError {
    #[error("distribution has no points")]
    EmptyDistribution,
    #[error("{total} points exceed the solver cap of {cap}")]
    SizeCapExceeded { total: usize, cap: usize },
    #[error("solver stopped after {iterations} iterations without reaching optimality")]
    SolverNonConvergence { iterations: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid pairing: {0}")]
    InvalidPairing(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
}

impl IpmError {
    pub fn code(&self) -> &'static str {
        match self {
            IpmError::EmptyDistribution => "EmptyDistribution",
            IpmError::SizeCapExceeded { .. } => "SizeCapExceeded",
            IpmError::SolverNonConvergence { .. } => "SolverNonConvergence",
            IpmError::DimensionMismatch { .. } => "DimensionMismatch",
            IpmError::InvalidPairing(_) => "InvalidPairing",
            IpmError::InvalidWeights(_) => "InvalidWeights",
            IpmError::InvalidBandwidth(_) => "InvalidBandwidth",
        }
    }
}

pub type DistanceFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Distance {
    Euclidean,
    Custom(DistanceFn),
}

/// A finite-dimensional point space together with its metric.
#[derive(Clone)]
pub struct MetricSpace {
    dimension: usize,
    distance: Distance,
}

impl fmt::Debug for MetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.distance {
            Distance::Euclidean => "euclidean",
            Distance::Custom(_) => "custom",
        };
        f.debug_struct("MetricSpace")
            .field("dimension", &self.dimension)
            .field("distance", &kind)
            .finish()
    }
}

impl MetricSpace {
    pub fn euclidean(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        MetricSpace { dimension, distance: Distance::Euclidean }
    }

    /// Wraps a user metric. The metric axioms are the caller's responsibility;
    /// [`MetricSpace::check_axioms`] can spot-check them.
    pub fn custom(dimension: usize, distance: DistanceFn) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        MetricSpace { dimension, distance: Distance::Custom(distance) }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        match &self.distance {
            Distance::Euclidean => euclidean(p, q),
            Distance::Custom(d) => d(p, q),
        }
    }

    /// Checks identity, symmetry and the triangle inequality on the given
    /// triples. Returns the first violated triple, if any.
    pub fn check_axioms<'a>(
        &self,
        triples: impl IntoIterator<Item = (&'a [f64], &'a [f64], &'a [f64])>,
        tol: f64,
    ) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        for (p, q, r) in triples {
            let pq = self.distance(p, q);
            let ok = self.distance(p, p).abs() <= tol
                && (pq - self.distance(q, p)).abs() <= tol
                && pq >= -tol
                && pq <= self.distance(p, r) + self.distance(r, q) + tol;
            if !ok {
                return Some((p.to_vec(), q.to_vec(), r.to_vec()));
            }
        }
        None
    }
}

fn euclidean(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Finite weighted point set. Points are stored flat, `dim` coordinates each.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Uniform weights over the given points.
    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self, IpmError> {
        if dim == 0 {
            return Err(IpmError::DimensionMismatch { expected: 1, found: 0 });
        }
        if points.len() % dim != 0 {
            return Err(IpmError::DimensionMismatch { expected: dim, found: points.len() % dim });
        }
        let n = points.len() / dim;
        if n == 0 {
            return Err(IpmError::EmptyDistribution);
        }
        Ok(EmpiricalDistribution { dim, points, weights: vec![1.0 / n as f64; n] })
    }

    /// Explicit weights; they must be nonnegative and sum to one within 1e-12.
    pub fn weighted(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self, IpmError> {
        let mut d = Self::uniform(dim, points)?;
        if weights.len() != d.len() {
            return Err(IpmError::InvalidWeights(format!(
                "{} weights for {} points",
                weights.len(),
                d.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(IpmError::InvalidWeights("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(IpmError::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        d.weights = weights;
        Ok(d)
    }

    /// Rescales arbitrary nonnegative masses to a probability vector.
    pub fn normalized(dim: usize, points: Vec<f64>, masses: &[f64]) -> Result<Self, IpmError> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || masses.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(IpmError::InvalidWeights("masses must be nonnegative with positive total".into()));
        }
        let mut d = Self::uniform(dim, points)?;
        if masses.len() != d.len() {
            return Err(IpmError::InvalidWeights(format!(
                "{} masses for {} points",
                masses.len(),
                d.len()
            )));
        }
        d.weights = masses.iter().map(|m| m / total).collect();
        Ok(d)
    }

    /// Uniform distribution on scalars.
    pub fn from_scalars(xs: &[f64]) -> Result<Self, IpmError> {
        Self::uniform(1, xs.to_vec())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn coordinates(&self) -> &[f64] {
        &self.points
    }

    fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for k in 0..self.len() {
            for (c, x) in m.iter_mut().zip(self.point(k)) {
                *c += self.weights[k] * x;
            }
        }
        m
    }
}

fn same_space(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<(), IpmError> {
    if a.dim != b.dim {
        return Err(IpmError::DimensionMismatch { expected: a.dim, found: b.dim });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Network simplex on the transportation problem
// ---------------------------------------------------------------------------

/// Optimal transport plan returned by [`wasserstein_lp_with`].
#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub cost: f64,
    /// Nonzero flows `(source atom, target atom, mass)`.
    pub plan: Vec<(usize, usize, f64)>,
    pub pivots: usize,
}

/// W₁ between two empirical distributions under `space`'s metric.
///
/// The Lipschitz-dual LP over the pooled atoms is solved through its primal,
/// the transportation problem, by a network simplex with Cunningham's
/// strongly-feasible leaving rule.
pub fn wasserstein_lp(
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
    space: &MetricSpace,
) -> Result<f64, IpmError> {
    wasserstein_lp_with(a, b, space, DEFAULT_SIZE_CAP).map(|s| s.cost)
}

pub fn wasserstein_lp_with(
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
    space: &MetricSpace,
    cap: usize,
) -> Result<TransportSolution, IpmError> {
    if a.is_empty() || b.is_empty() {
        return Err(IpmError::EmptyDistribution);
    }
    same_space(a, b)?;
    if a.dim != space.dimension() {
        return Err(IpmError::DimensionMismatch { expected: space.dimension(), found: a.dim });
    }
    let total = a.len() + b.len();
    if total > cap {
        return Err(IpmError::SizeCapExceeded { total, cap });
    }
    // Zero-mass atoms carry no flow; dropping them keeps the initial tree
    // strongly feasible.
    let src: Vec<usize> = (0..a.len()).filter(|&k| a.weights[k] > 0.0).collect();
    let dst: Vec<usize> = (0..b.len()).filter(|&k| b.weights[k] > 0.0).collect();
    let supply: Vec<f64> = src.iter().map(|&k| a.weights[k]).collect();
    let demand: Vec<f64> = dst.iter().map(|&k| b.weights[k]).collect();
    let mut cost = Vec::with_capacity(src.len() * dst.len());
    for &s in &src {
        for &t in &dst {
            cost.push(space.distance(a.point(s), b.point(t)));
        }
    }
    let mut ns = NetworkSimplex::new(&supply, &demand, cost);
    ns.solve()?;
    let mut plan = Vec::new();
    let mut total_cost = 0.0;
    let n2 = dst.len();
    for (e, &f) in ns.flow[..ns.n_real].iter().enumerate() {
        if f > 0.0 {
            total_cost += f * ns.cost[e];
            plan.push((src[e / n2], dst[e % n2], f));
        }
    }
    Ok(TransportSolution { cost: total_cost.max(0.0), plan, pivots: ns.pivots })
}

const UP: i8 = 1;
const DOWN: i8 = -1;

struct NetworkSimplex {
    n1: usize,
    n2: usize,
    n_real: usize,
    root: usize,
    tail: Vec<usize>,
    head: Vec<usize>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    tree_arcs: Vec<usize>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    dir: Vec<i8>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    eps: f64,
    pivots: usize,
    next_arc: usize,
}

impl NetworkSimplex {
    fn new(supply: &[f64], demand: &[f64], real_cost: Vec<f64>) -> Self {
        let (n1, n2) = (supply.len(), demand.len());
        let n_real = n1 * n2;
        let root = n1 + n2;
        let nodes = root + 1;
        let max_c = real_cost.iter().cloned().fold(0.0f64, f64::max);
        let big_m = (max_c + 1.0) * (nodes as f64);
        let m = n_real + n1 + n2;
        let mut tail = Vec::with_capacity(m);
        let mut head = Vec::with_capacity(m);
        for i in 0..n1 {
            for j in 0..n2 {
                tail.push(i);
                head.push(n1 + j);
            }
        }
        let mut cost = real_cost;
        let mut flow = vec![0.0; n_real];
        let mut tree_arcs = Vec::with_capacity(n1 + n2);
        for (i, &s) in supply.iter().enumerate() {
            tree_arcs.push(tail.len());
            tail.push(i);
            head.push(root);
            cost.push(big_m);
            flow.push(s);
        }
        for (j, &d) in demand.iter().enumerate() {
            tree_arcs.push(tail.len());
            tail.push(root);
            head.push(n1 + j);
            cost.push(0.0);
            flow.push(d);
        }
        let mut in_tree = vec![false; m];
        for &e in &tree_arcs {
            in_tree[e] = true;
        }
        let mut ns = NetworkSimplex {
            n1,
            n2,
            n_real,
            root,
            tail,
            head,
            cost,
            flow,
            in_tree,
            tree_arcs,
            parent: vec![usize::MAX; nodes],
            pred: vec![usize::MAX; nodes],
            dir: vec![0; nodes],
            depth: vec![0; nodes],
            pi: vec![0.0; nodes],
            eps: 1e-12 * (1.0 + max_c),
            pivots: 0,
            next_arc: 0,
        };
        ns.rebuild();
        ns
    }

    /// Recomputes parent pointers, depths and potentials from the tree arcs.
    fn rebuild(&mut self) {
        let nodes = self.root + 1;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        for &e in &self.tree_arcs {
            adj[self.tail[e]].push(e);
            adj[self.head[e]].push(e);
        }
        let mut seen = vec![false; nodes];
        let mut queue = std::collections::VecDeque::new();
        seen[self.root] = true;
        self.depth[self.root] = 0;
        self.pi[self.root] = 0.0;
        self.parent[self.root] = usize::MAX;
        queue.push_back(self.root);
        while let Some(u) = queue.pop_front() {
            for &e in &adj[u] {
                let (v, d) = if self.tail[e] == u { (self.head[e], DOWN) } else { (self.tail[e], UP) };
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                self.parent[v] = u;
                self.pred[v] = e;
                self.dir[v] = d;
                self.depth[v] = self.depth[u] + 1;
                // reduced cost c_e + pi_tail - pi_head vanishes on tree arcs
                self.pi[v] = if d == DOWN { self.pi[u] + self.cost[e] } else { self.pi[u] - self.cost[e] };
                queue.push_back(v);
            }
        }
    }

    fn reduced_cost(&self, e: usize) -> f64 {
        self.cost[e] + self.pi[self.tail[e]] - self.pi[self.head[e]]
    }

    fn find_entering(&mut self) -> Option<usize> {
        let m = self.flow.len();
        let block = ((m as f64).sqrt().ceil() as usize).max(10);
        let mut best = None;
        let mut best_rc = -self.eps;
        let mut scanned_in_block = 0;
        for step in 0..m {
            let e = (self.next_arc + step) % m;
            if !self.in_tree[e] {
                let rc = self.reduced_cost(e);
                if rc < best_rc {
                    best_rc = rc;
                    best = Some(e);
                }
            }
            scanned_in_block += 1;
            if scanned_in_block >= block {
                if best.is_some() {
                    self.next_arc = (e + 1) % m;
                    return best;
                }
                scanned_in_block = 0;
            }
        }
        best
    }

    fn solve(&mut self) -> Result<(), IpmError> {
        let limit = 1000 * (self.n1 + self.n2) + 100_000;
        while let Some(entering) = self.find_entering() {
            if self.pivots >= limit {
                return Err(IpmError::SolverNonConvergence { iterations: self.pivots });
            }
            self.pivot(entering);
            self.pivots += 1;
        }
        Ok(())
    }

    fn pivot(&mut self, entering: usize) {
        let u = self.tail[entering];
        let v = self.head[entering];
        // join node
        let (mut x, mut y) = (u, v);
        while x != y {
            if self.depth[x] >= self.depth[y] {
                x = self.parent[x];
            } else {
                y = self.parent[y];
            }
        }
        let join = x;
        // Flow is pushed u -> v along the entering arc and back to u through
        // the tree. On u's side an up-arc is traversed backwards, on v's side a
        // down-arc is. Ties go to the last blocking arc in cycle order.
        let mut delta = f64::INFINITY;
        let mut leaving_node = usize::MAX;
        let mut w = u;
        while w != join {
            if self.dir[w] == UP {
                let d = self.flow[self.pred[w]];
                if d < delta {
                    delta = d;
                    leaving_node = w;
                }
            }
            w = self.parent[w];
        }
        w = v;
        while w != join {
            if self.dir[w] == DOWN {
                let d = self.flow[self.pred[w]];
                if d <= delta {
                    delta = d;
                    leaving_node = w;
                }
            }
            w = self.parent[w];
        }
        // Transportation arcs are uncapacitated but every cycle contains an
        // opposing tree arc, so some arc always blocks.
        debug_assert!(delta.is_finite());
        let delta = delta.max(0.0);
        if delta > 0.0 {
            self.flow[entering] += delta;
            w = u;
            while w != join {
                let e = self.pred[w];
                self.flow[e] += if self.dir[w] == UP { -delta } else { delta };
                if self.flow[e] < 0.0 {
                    self.flow[e] = 0.0;
                }
                w = self.parent[w];
            }
            w = v;
            while w != join {
                let e = self.pred[w];
                self.flow[e] += if self.dir[w] == DOWN { -delta } else { delta };
                if self.flow[e] < 0.0 {
                    self.flow[e] = 0.0;
                }
                w = self.parent[w];
            }
        }
        let leaving = self.pred[leaving_node];
        self.flow[leaving] = 0.0;
        self.in_tree[leaving] = false;
        self.in_tree[entering] = true;
        let slot = self.tree_arcs.iter().position(|&e| e == leaving).expect("leaving arc in tree");
        self.tree_arcs[slot] = entering;
        self.rebuild();
    }
}

// ---------------------------------------------------------------------------
// Dense simplex on the literal Lipschitz dual
// ---------------------------------------------------------------------------

/// W₁ from the literal dual LP
/// `max Σ w_k α_k  s.t.  α_k − α_l ≤ d(x_k, x_l)` over the pooled atoms, with
/// signed weights `+w` on `a` and `−w` on `b`.
///
/// Dense Bland-rule tableau; only intended for cross-checks on at most
/// [`DENSE_DUAL_CAP`] atoms.
pub fn wasserstein_dual_simplex(
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
    space: &MetricSpace,
) -> Result<f64, IpmError> {
    if a.is_empty() || b.is_empty() {
        return Err(IpmError::EmptyDistribution);
    }
    same_space(a, b)?;
    let n = a.len() + b.len();
    if n > DENSE_DUAL_CAP {
        return Err(IpmError::SizeCapExceeded { total: n, cap: DENSE_DUAL_CAP });
    }
    let point = |k: usize| if k < a.len() { a.point(k) } else { b.point(k - a.len()) };
    let obj: Vec<f64> = a.weights.iter().copied().chain(b.weights.iter().map(|w| -w)).collect();

    // The objective is shift invariant, so α ≥ 0 loses nothing once α_0 is
    // capped; the cap also absorbs any round-off in the weight totals.
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let mut reach: f64 = 0.0;
    for k in 0..n {
        for l in 0..n {
            if k != l {
                let d = space.distance(point(k), point(l));
                reach = reach.max(d);
                rows.push((vec![(k, 1.0), (l, -1.0)], d));
            }
        }
    }
    rows.push((vec![(0, 1.0)], reach));
    dense_simplex_max(n, &obj, &rows)
}

/// Maximises `c·x` subject to `A x ≤ b`, `x ≥ 0`, `b ≥ 0` from the slack basis.
fn dense_simplex_max(n: usize, c: &[f64], rows: &[(Vec<(usize, f64)>, f64)]) -> Result<f64, IpmError> {
    let m = rows.len();
    let width = n + m + 1;
    let mut t = vec![0.0; (m + 1) * width];
    for (r, (coefs, rhs)) in rows.iter().enumerate() {
        for &(k, v) in coefs {
            t[r * width + k] = v;
        }
        t[r * width + n + r] = 1.0;
        t[r * width + width - 1] = *rhs;
    }
    // objective row holds -c so that optimality means no negative entries
    for k in 0..n {
        t[m * width + k] = -c[k];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let tol = 1e-12;
    let limit = 50 * (n + m) + 10_000;
    for _ in 0..limit {
        // Bland: lowest-index improving column
        let Some(col) = (0..n + m).find(|&k| t[m * width + k] < -tol) else {
            return Ok(t[m * width + width - 1].max(0.0));
        };
        let mut pivot_row = None;
        let mut best = f64::INFINITY;
        for r in 0..m {
            let v = t[r * width + col];
            if v > tol {
                let ratio = t[r * width + width - 1] / v;
                let better = ratio < best - tol
                    || (ratio <= best + tol && pivot_row.is_some_and(|p: usize| basis[r] < basis[p]));
                if better {
                    best = ratio.min(best);
                    pivot_row = Some(r);
                }
            }
        }
        let Some(pr) = pivot_row else {
            // unbounded cannot happen with the cap row; treat as failure
            return Err(IpmError::SolverNonConvergence { iterations: 0 });
        };
        let pv = t[pr * width + col];
        for k in 0..width {
            t[pr * width + k] /= pv;
        }
        for r in 0..=m {
            if r != pr {
                let f = t[r * width + col];
                if f != 0.0 {
                    for k in 0..width {
                        t[r * width + k] -= f * t[pr * width + k];
                    }
                }
            }
        }
        basis[pr] = col;
    }
    Err(IpmError::SolverNonConvergence { iterations: limit })
}

// ---------------------------------------------------------------------------
// Closed form on the line
// ---------------------------------------------------------------------------

/// Exact W₁ for one-dimensional distributions: `∫ |F_a − F_b|`.
pub fn wasserstein_1d_exact(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<f64, IpmError> {
    if a.is_empty() || b.is_empty() {
        return Err(IpmError::EmptyDistribution);
    }
    for d in [a, b] {
        if d.dim != 1 {
            return Err(IpmError::DimensionMismatch { expected: 1, found: d.dim });
        }
    }
    let mut signed: Vec<(f64, f64)> = a
        .points
        .iter()
        .zip(&a.weights)
        .map(|(&x, &w)| (x, w))
        .chain(b.points.iter().zip(&b.weights).map(|(&x, &w)| (x, -w)))
        .collect();
    signed.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(cdf_gap_integral(&signed))
}

/// `∫ |Σ_{x_k ≤ t} s_k| dt` over sorted signed atoms.
pub(crate) fn cdf_gap_integral(sorted: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    let mut total = 0.0;
    for w in sorted.windows(2) {
        acc += w[0].1;
        total += acc.abs() * (w[1].0 - w[0].0);
    }
    total
}

// ---------------------------------------------------------------------------
// MMD
// ---------------------------------------------------------------------------

/// Gaussian kernel `k(x, y) = exp(−‖x − y‖² / (2h²))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    bandwidth: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self, IpmError> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(IpmError::InvalidBandwidth(bandwidth));
        }
        Ok(KernelSpec { bandwidth })
    }

    /// Median pairwise distance of the pooled sample; falls back to 1 when
    /// the median is zero. Large samples are thinned to 1000 points.
    pub fn median_heuristic(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<Self, IpmError> {
        if a.is_empty() || b.is_empty() {
            return Err(IpmError::EmptyDistribution);
        }
        same_space(a, b)?;
        let pooled: Vec<&[f64]> = (0..a.len()).map(|k| a.point(k)).chain((0..b.len()).map(|k| b.point(k))).collect();
        let h = median_pairwise_distance(&pooled);
        Self::gaussian(if h > 0.0 { h } else { 1.0 })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn eval(&self, p: &[f64], q: &[f64]) -> f64 {
        let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

pub(crate) fn median_pairwise_distance(points: &[&[f64]]) -> f64 {
    const MAX_POINTS: usize = 1000;
    let stride = points.len().div_ceil(MAX_POINTS).max(1);
    let sub: Vec<&[f64]> = points.iter().step_by(stride).copied().collect();
    let mut d = Vec::with_capacity(sub.len() * sub.len().saturating_sub(1) / 2);
    for i in 0..sub.len() {
        for j in i + 1..sub.len() {
            d.push(euclidean(sub[i], sub[j]));
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, |x, y| x.total_cmp(y));
    *m
}

/// MMD² together with the unclamped value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MmdValue {
    /// `max(raw, 0)`.
    pub value: f64,
    pub raw: f64,
    /// True when round-off pushed `raw` below zero.
    pub clamped: bool,
}

/// Biased MMD² `Σ y_k y_l k(x_k, x_l)` with `y = +w` on `a` and `−w` on `b`.
pub fn mmd_squared(a: &EmpiricalDistribution, b: &EmpiricalDistribution, kernel: &KernelSpec) -> Result<MmdValue, IpmError> {
    if a.is_empty() || b.is_empty() {
        return Err(IpmError::EmptyDistribution);
    }
    same_space(a, b)?;
    let aa = kernel_cross_sum(a, a, kernel);
    let bb = kernel_cross_sum(b, b, kernel);
    let ab = kernel_cross_sum(a, b, kernel);
    Ok(mmd_from_sums(aa, bb, ab))
}

pub(crate) fn mmd_from_sums(aa: f64, bb: f64, ab: f64) -> MmdValue {
    let raw = aa + bb - 2.0 * ab;
    MmdValue { value: raw.max(0.0), raw, clamped: raw < 0.0 }
}

/// `Σ_k Σ_l w_k v_l k(x_k, y_l)`.
pub(crate) fn kernel_cross_sum(a: &EmpiricalDistribution, b: &EmpiricalDistribution, kernel: &KernelSpec) -> f64 {
    let inv = -1.0 / (2.0 * kernel.bandwidth * kernel.bandwidth);
    if a.dim == 1 {
        let mut s = 0.0;
        for (&x, &wx) in a.points.iter().zip(&a.weights) {
            let mut row = 0.0;
            for (&y, &wy) in b.points.iter().zip(&b.weights) {
                let d = x - y;
                row += wy * (d * d * inv).exp();
            }
            s += wx * row;
        }
        return s;
    }
    let mut s = 0.0;
    for k in 0..a.len() {
        for l in 0..b.len() {
            s += a.weights[k] * b.weights[l] * kernel.eval(a.point(k), b.point(l));
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Sandwich bounds
// ---------------------------------------------------------------------------

/// `(|E a − E b|, sqrt(E_π (x − y)²))` for a coupling π of `a` and `b`.
///
/// Without a pairing the monotone (sorted) coupling is used, which also
/// attains W₂. A pairing maps atom `k` of `a` onto atom `pairing[k]` of `b`
/// and must be a bijection between atoms of equal weight.
pub fn sandwich_bounds(
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
    pairing: Option<&[usize]>,
) -> Result<(f64, f64), IpmError> {
    if a.is_empty() || b.is_empty() {
        return Err(IpmError::EmptyDistribution);
    }
    for d in [a, b] {
        if d.dim != 1 {
            return Err(IpmError::DimensionMismatch { expected: 1, found: d.dim });
        }
    }
    let lower = (a.mean()[0] - b.mean()[0]).abs();
    let quad = match pairing {
        Some(p) => paired_quadratic_cost(a, b, p)?,
        None => sorted_quadratic_cost(a, b),
    };
    let upper = quad.max(0.0).sqrt();
    Ok((lower, upper))
}

fn paired_quadratic_cost(a: &EmpiricalDistribution, b: &EmpiricalDistribution, p: &[usize]) -> Result<f64, IpmError> {
    if p.len() != a.len() || a.len() != b.len() {
        return Err(IpmError::InvalidPairing(format!(
            "pairing of length {} between {} and {} atoms",
            p.len(),
            a.len(),
            b.len()
        )));
    }
    let mut used = vec![false; b.len()];
    let mut cost = 0.0;
    for (k, &l) in p.iter().enumerate() {
        if l >= b.len() || used[l] {
            return Err(IpmError::InvalidPairing("pairing is not a permutation".into()));
        }
        used[l] = true;
        if (a.weights[k] - b.weights[l]).abs() > WEIGHT_TOL {
            return Err(IpmError::InvalidPairing(format!("atom {k} and atom {l} carry different weights")));
        }
        let d = a.points[k] - b.points[l];
        cost += a.weights[k] * d * d;
    }
    Ok(cost)
}

/// North-west corner rule on the sorted atoms.
fn sorted_quadratic_cost(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let sorted = |d: &EmpiricalDistribution| {
        let mut v: Vec<(f64, f64)> = d.points.iter().copied().zip(d.weights.iter().copied()).collect();
        v.sort_by(|p, q| p.0.total_cmp(&q.0));
        v
    };
    let (sa, sb) = (sorted(a), sorted(b));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (sa[0].1, sb[0].1);
    let mut cost = 0.0;
    while i < sa.len() && j < sb.len() {
        let m = ra.min(rb);
        let d = sa[i].0 - sb[j].0;
        cost += m * d * d;
        ra -= m;
        rb -= m;
        if ra <= 1e-15 {
            i += 1;
            if i < sa.len() {
                ra = sa[i].1;
            }
        }
        if rb <= 1e-15 {
            j += 1;
            if j < sb.len() {
                rb = sb[j].1;
            }
        }
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scal(xs: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::from_scalars(xs).unwrap()
    }

    #[test]
    fn lp_small_cases() {
        let s = MetricSpace::euclidean(1);
        assert_eq!(wasserstein_lp(&scal(&[0.0]), &scal(&[0.0]), &s).unwrap(), 0.0);
        assert!((wasserstein_lp(&scal(&[0.0]), &scal(&[3.0]), &s).unwrap() - 3.0).abs() < 1e-12);
        let w = wasserstein_lp(&scal(&[0.0, 2.0]), &scal(&[1.0, 3.0]), &s).unwrap();
        assert!((w - 1.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn dense_dual_matches_small_cases() {
        let s = MetricSpace::euclidean(1);
        let w = wasserstein_dual_simplex(&scal(&[0.0, 2.0]), &scal(&[1.0, 3.0]), &s).unwrap();
        assert!((w - 1.0).abs() < 1e-9, "{w}");
        let w = wasserstein_dual_simplex(&scal(&[0.0]), &scal(&[3.0]), &s).unwrap();
        assert!((w - 3.0).abs() < 1e-9, "{w}");
    }

    #[test]
    fn exact_1d_cases() {
        assert!((wasserstein_1d_exact(&scal(&[0.0, 2.0]), &scal(&[1.0, 3.0])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(wasserstein_1d_exact(&scal(&[0.5, -1.0]), &scal(&[-1.0, 0.5])).unwrap(), 0.0);
        assert_eq!(wasserstein_1d_exact(&scal(&[0.0]), &scal(&[5.0])).unwrap(), 5.0);
        let two = EmpiricalDistribution::uniform(2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(wasserstein_1d_exact(&two, &two), Err(IpmError::DimensionMismatch { .. })));
    }

    #[test]
    fn lp_rejects_bad_input() {
        let s = MetricSpace::euclidean(1);
        assert!(matches!(EmpiricalDistribution::from_scalars(&[]), Err(IpmError::EmptyDistribution)));
        let big = scal(&vec![0.0; 1500]);
        assert!(matches!(wasserstein_lp(&big, &big, &s), Err(IpmError::SizeCapExceeded { total: 3000, cap: 2000 })));
    }

    #[test]
    fn mmd_two_atoms() {
        let k = KernelSpec::gaussian(1.0).unwrap();
        let v = mmd_squared(&scal(&[0.0]), &scal(&[1.0]), &k).unwrap();
        assert!((v.value - (2.0 - 2.0 * (-0.5f64).exp())).abs() < 1e-12);
        let v = mmd_squared(&scal(&[0.0, 1.0]), &scal(&[1.0, 0.0]), &k).unwrap();
        assert!(v.value.abs() < 1e-15);
        assert!(KernelSpec::gaussian(0.0).is_err());
    }

    #[test]
    fn median_heuristic_falls_back_on_ties() {
        let k = KernelSpec::median_heuristic(&scal(&[2.0, 2.0]), &scal(&[2.0])).unwrap();
        assert_eq!(k.bandwidth(), 1.0);
        let k = KernelSpec::median_heuristic(&scal(&[0.0, 1.0]), &scal(&[3.0])).unwrap();
        assert_eq!(k.bandwidth(), 2.0);
    }

    #[test]
    fn sandwich_cases() {
        assert_eq!(sandwich_bounds(&scal(&[0.0]), &scal(&[3.0]), None).unwrap(), (3.0, 3.0));
        assert_eq!(sandwich_bounds(&scal(&[-1.0, 1.0]), &scal(&[-1.0, 1.0]), None).unwrap(), (0.0, 0.0));
        let (lo, hi) = sandwich_bounds(&scal(&[0.0, 2.0]), &scal(&[1.0, 3.0]), None).unwrap();
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
        let (lo, hi) = sandwich_bounds(&scal(&[0.0, 2.0]), &scal(&[1.0, 3.0]), Some(&[1, 0])).unwrap();
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 5f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            sandwich_bounds(&scal(&[0.0, 2.0]), &scal(&[1.0, 3.0]), Some(&[0, 0])),
            Err(IpmError::InvalidPairing(_))
        ));
    }

    #[test]
    fn custom_metric_is_used() {
        let taxicab: DistanceFn = Arc::new(|p, q| p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum());
        let s = MetricSpace::custom(2, taxicab);
        let a = EmpiricalDistribution::uniform(2, vec![0.0, 0.0]).unwrap();
        let b = EmpiricalDistribution::uniform(2, vec![1.0, 1.0]).unwrap();
        assert!((wasserstein_lp(&a, &b, &s).unwrap() - 2.0).abs() < 1e-12);
        assert!((wasserstein_lp(&a, &b, &MetricSpace::euclidean(2)).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }
}
