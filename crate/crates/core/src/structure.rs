//! Causal structure discovery: d-separation, PC-stable skeleton search,
//! v-structures, Meek's rules and orientation from interventional data.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::dependence::{self, DependenceError, EstimatorConfig, Verdict};

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("graph contains a directed cycle")]
    CyclicGraph,
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
    #[error("self loop on node {0}")]
    SelfLoop(usize),
    #[error("node sets must be disjoint")]
    NonDisjointSets,
    #[error("{found} rows are not enough (need at least {needed})")]
    InsufficientSamples { found: usize, needed: usize },
    #[error("no usable intervention data for {node}: {reason}")]
    MissingInterventionData { node: String, reason: String },
    #[error("bad dot input: {0}")]
    BadDot(String),
    #[error(transparent)]
    Dependence(#[from] DependenceError),
}

impl StructureError {
    pub fn code(&self) -> &'static str {
        match self {
            StructureError::CyclicGraph => "CyclicGraph",
            StructureError::NodeOutOfRange(_) => "NodeOutOfRange",
            StructureError::SelfLoop(_) => "SelfLoop",
            StructureError::NonDisjointSets => "NonDisjointSets",
            StructureError::InsufficientSamples { .. } => "InsufficientSamples",
            StructureError::MissingInterventionData { .. } => "MissingInterventionData",
            StructureError::BadDot(_) => "BadDot",
            StructureError::Dependence(e) => e.code(),
        }
    }
}

/// Directed acyclic graph over named nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    pub fn new(names: Vec<String>, edges: &[(usize, usize)]) -> Result<Self, StructureError> {
        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(StructureError::NodeOutOfRange(a.max(b)));
            }
            if a == b {
                return Err(StructureError::SelfLoop(a));
            }
            if !children[a].contains(&b) {
                children[a].push(b);
                parents[b].push(a);
            }
        }
        for v in parents.iter_mut().chain(children.iter_mut()) {
            v.sort_unstable();
        }
        let g = Dag { names, parents, children };
        if g.topological_order().is_none() {
            return Err(StructureError::CyclicGraph);
        }
        Ok(g)
    }

    /// Nodes named `X1..Xn`.
    pub fn with_default_names(n: usize, edges: &[(usize, usize)]) -> Result<Self, StructureError> {
        Self::new((1..=n).map(|k| format!("X{k}")).collect(), edges)
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.children[a].contains(&b)
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n()).flat_map(|a| self.children[a].iter().map(move |&b| (a, b))).collect()
    }

    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Unshielded colliders `(a, c, b)` with `a < b` and `a → c ← b`.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for c in 0..self.n() {
            let p = &self.parents[c];
            for (x, &a) in p.iter().enumerate() {
                for &b in &p[x + 1..] {
                    if !self.adjacent(a, b) {
                        out.insert((a, c, b));
                    }
                }
            }
        }
        out
    }
}

/// True when every path between `a` and `b` is blocked by `c`.
///
/// Reachability ("Bayes ball"): a trail may pass a non-collider outside `c`,
/// and a collider that is in `c` or has a descendant in `c`.
pub fn d_separated(g: &Dag, a: &[usize], b: &[usize], c: &[usize]) -> Result<bool, StructureError> {
    let n = g.n();
    if let Some(&v) = a.iter().chain(b).chain(c).find(|&&v| v >= n) {
        return Err(StructureError::NodeOutOfRange(v));
    }
    let (sa, sb, sc): (BTreeSet<_>, BTreeSet<_>, BTreeSet<_>) =
        (a.iter().copied().collect(), b.iter().copied().collect(), c.iter().copied().collect());
    if !sa.is_disjoint(&sb) || !sa.is_disjoint(&sc) || !sb.is_disjoint(&sc) {
        return Err(StructureError::NonDisjointSets);
    }
    // c and its ancestors
    let mut anc = vec![false; n];
    let mut stack: Vec<usize> = c.to_vec();
    while let Some(v) = stack.pop() {
        if !anc[v] {
            anc[v] = true;
            stack.extend_from_slice(g.parents(v));
        }
    }
    let in_c = |v: usize| sc.contains(&v);
    // direction: true = arrived from a child (moving up)
    let mut seen = vec![[false; 2]; n];
    let mut queue: VecDeque<(usize, bool)> = a.iter().map(|&v| (v, true)).collect();
    while let Some((v, up)) = queue.pop_front() {
        if seen[v][up as usize] {
            continue;
        }
        seen[v][up as usize] = true;
        if !in_c(v) && sb.contains(&v) {
            return Ok(false);
        }
        if up {
            if !in_c(v) {
                queue.extend(g.parents(v).iter().map(|&p| (p, true)));
                queue.extend(g.children(v).iter().map(|&ch| (ch, false)));
            }
        } else {
            if !in_c(v) {
                queue.extend(g.children(v).iter().map(|&ch| (ch, false)));
            }
            if anc[v] {
                queue.extend(g.parents(v).iter().map(|&p| (p, true)));
            }
        }
    }
    Ok(true)
}

/// Why an edge has its current mark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeProvenance {
    Skeleton,
    VStructure,
    MeekR1,
    MeekR2,
    MeekR3,
    MeekR4,
    Interventional,
}

impl EdgeProvenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgeProvenance::Skeleton => "skeleton",
            EdgeProvenance::VStructure => "v-structure",
            EdgeProvenance::MeekR1 => "meek-r1",
            EdgeProvenance::MeekR2 => "meek-r2",
            EdgeProvenance::MeekR3 => "meek-r3",
            EdgeProvenance::MeekR4 => "meek-r4",
            EdgeProvenance::Interventional => "interventional",
        }
    }

    fn color(&self) -> &'static str {
        match self {
            EdgeProvenance::Skeleton => "black",
            EdgeProvenance::VStructure => "blue",
            EdgeProvenance::MeekR1 | EdgeProvenance::MeekR2 | EdgeProvenance::MeekR3 | EdgeProvenance::MeekR4 => "darkgreen",
            EdgeProvenance::Interventional => "red",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "skeleton" => EdgeProvenance::Skeleton,
            "v-structure" => EdgeProvenance::VStructure,
            "meek-r1" => EdgeProvenance::MeekR1,
            "meek-r2" => EdgeProvenance::MeekR2,
            "meek-r3" => EdgeProvenance::MeekR3,
            "meek-r4" => EdgeProvenance::MeekR4,
            "interventional" => EdgeProvenance::Interventional,
            _ => return None,
        })
    }
}

/// Edge mark relative to the stored key `(lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mark {
    Undirected,
    LoToHi,
    HiToLo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct EdgeState {
    mark: Mark,
    provenance: EdgeProvenance,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Partially directed graph with separating sets and a conflict log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pdag {
    names: Vec<String>,
    edges: BTreeMap<(usize, usize), EdgeState>,
    sepsets: BTreeMap<(usize, usize), Vec<usize>>,
    conflicts: Vec<String>,
}

/// One edge as seen from outside: `directed` means `from → to`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeView {
    pub from: usize,
    pub to: usize,
    pub directed: bool,
    pub provenance: EdgeProvenance,
}

impl Pdag {
    pub fn empty(names: Vec<String>) -> Self {
        Pdag { names, edges: BTreeMap::new(), sepsets: BTreeMap::new(), conflicts: Vec::new() }
    }

    pub fn complete(names: Vec<String>) -> Self {
        let mut p = Self::empty(names);
        let n = p.n();
        for a in 0..n {
            for b in a + 1..n {
                p.add_undirected(a, b, EdgeProvenance::Skeleton);
            }
        }
        p
    }

    /// Every edge of the DAG, directed.
    pub fn from_dag(g: &Dag) -> Self {
        let mut p = Self::empty(g.names().to_vec());
        for (a, b) in g.edges() {
            p.add_directed(a, b, EdgeProvenance::Skeleton);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.contains_key(&key(a, b))
    }

    /// `a → b`.
    pub fn has_directed(&self, a: usize, b: usize) -> bool {
        match self.edges.get(&key(a, b)) {
            Some(e) => (e.mark == Mark::LoToHi && a < b) || (e.mark == Mark::HiToLo && a > b),
            None => false,
        }
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        matches!(self.edges.get(&key(a, b)), Some(e) if e.mark == Mark::Undirected)
    }

    pub fn provenance(&self, a: usize, b: usize) -> Option<EdgeProvenance> {
        self.edges.get(&key(a, b)).map(|e| e.provenance)
    }

    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        (0..self.n()).filter(|&b| b != a && self.adjacent(a, b)).collect()
    }

    pub fn undirected_neighbors(&self, a: usize) -> Vec<usize> {
        (0..self.n()).filter(|&b| b != a && self.has_undirected(a, b)).collect()
    }

    pub fn parents(&self, a: usize) -> Vec<usize> {
        (0..self.n()).filter(|&b| self.has_directed(b, a)).collect()
    }

    pub fn children(&self, a: usize) -> Vec<usize> {
        (0..self.n()).filter(|&b| self.has_directed(a, b)).collect()
    }

    pub fn add_undirected(&mut self, a: usize, b: usize, provenance: EdgeProvenance) {
        assert!(a != b && a < self.n() && b < self.n(), "bad edge {a}-{b}");
        self.edges.insert(key(a, b), EdgeState { mark: Mark::Undirected, provenance });
    }

    pub fn add_directed(&mut self, a: usize, b: usize, provenance: EdgeProvenance) {
        assert!(a != b && a < self.n() && b < self.n(), "bad edge {a}->{b}");
        let mark = if a < b { Mark::LoToHi } else { Mark::HiToLo };
        self.edges.insert(key(a, b), EdgeState { mark, provenance });
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.edges.remove(&key(a, b));
    }

    pub fn set_sepset(&mut self, a: usize, b: usize, mut k: Vec<usize>) {
        k.sort_unstable();
        self.sepsets.insert(key(a, b), k);
    }

    pub fn sepset(&self, a: usize, b: usize) -> Option<&[usize]> {
        self.sepsets.get(&key(a, b)).map(Vec::as_slice)
    }

    pub fn clear_sepset(&mut self, a: usize, b: usize) {
        self.sepsets.remove(&key(a, b));
    }

    pub fn conflicts(&self) -> &[String] {
        &self.conflicts
    }

    fn log_conflict(&mut self, msg: String) {
        self.conflicts.push(msg);
    }

    pub fn edges(&self) -> Vec<EdgeView> {
        self.edges
            .iter()
            .map(|(&(lo, hi), e)| {
                let (from, to) = if e.mark == Mark::HiToLo { (hi, lo) } else { (lo, hi) };
                EdgeView { from, to, directed: e.mark != Mark::Undirected, provenance: e.provenance }
            })
            .collect()
    }

    pub fn directed_edges(&self) -> BTreeSet<(usize, usize)> {
        self.edges().into_iter().filter(|e| e.directed).map(|e| (e.from, e.to)).collect()
    }

    pub fn undirected_edges(&self) -> BTreeSet<(usize, usize)> {
        self.edges().into_iter().filter(|e| !e.directed).map(|e| (e.from, e.to)).collect()
    }

    /// Unordered adjacencies as `(lo, hi)`.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges.keys().copied().collect()
    }

    /// Is there a directed path `from ⇝ to`?
    pub fn directed_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.n()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if !std::mem::replace(&mut seen[v], true) {
                stack.extend(self.children(v));
            }
        }
        false
    }

    pub fn is_directed_acyclic(&self) -> bool {
        let n = self.n();
        let mut indeg = vec![0usize; n];
        for (_, b) in self.directed_edges() {
            indeg[b] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut count = 0;
        while let Some(v) = ready.pop() {
            count += 1;
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(c);
                }
            }
        }
        count == n
    }

    /// Orients an existing edge `a → b`, refusing when that closes a
    /// directed cycle. Returns whether the mark changed.
    fn orient(&mut self, a: usize, b: usize, provenance: EdgeProvenance) -> bool {
        if !self.adjacent(a, b) || self.has_directed(a, b) {
            return false;
        }
        let previous = self.edges[&key(a, b)];
        self.remove_edge(a, b);
        if self.directed_path(b, a) {
            self.edges.insert(key(a, b), previous);
            self.log_conflict(format!(
                "{} -> {} ({}) would close a directed cycle; left as is",
                self.names[a],
                self.names[b],
                provenance.as_str()
            ));
            return false;
        }
        self.add_directed(a, b, provenance);
        true
    }

    pub fn to_dot(&self) -> String {
        let q = |v: usize| format!("\"{}\"", self.names[v]);
        let mut s = String::from("digraph pdag {\n");
        for v in 0..self.n() {
            s.push_str(&format!("  {};\n", q(v)));
        }
        for e in self.edges() {
            let dir = if e.directed { "" } else { "dir=none, " };
            s.push_str(&format!(
                "  {} -> {} [{}provenance=\"{}\", color=\"{}\"];\n",
                q(e.from),
                q(e.to),
                dir,
                e.provenance.as_str(),
                e.provenance.color()
            ));
        }
        for (&(a, b), k) in &self.sepsets {
            let ks: Vec<String> = k.iter().map(|&v| q(v)).collect();
            s.push_str(&format!("  // sepset {} {} : {}\n", q(a), q(b), ks.join(" ")));
        }
        for c in &self.conflicts {
            s.push_str(&format!("  // conflict: {}\n", c.replace('\n', " ")));
        }
        s.push_str("}\n");
        s
    }

    /// Parses the output of [`Pdag::to_dot`].
    pub fn from_dot(text: &str) -> Result<Pdag, StructureError> {
        let bad = |m: &str| StructureError::BadDot(m.to_string());
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let head = lines.next().ok_or_else(|| bad("empty input"))?;
        if !head.starts_with("digraph") || !head.ends_with('{') {
            return Err(bad("expected `digraph ... {`"));
        }
        let mut names: Vec<String> = Vec::new();
        let mut edges = Vec::new();
        let mut seps = Vec::new();
        let mut conflicts = Vec::new();
        let mut closed = false;
        for line in lines {
            if line == "}" {
                closed = true;
                break;
            }
            if let Some(c) = line.strip_prefix("// conflict: ") {
                conflicts.push(c.to_string());
            } else if let Some(rest) = line.strip_prefix("// sepset ") {
                let (pair, ks) = rest.split_once(" : ").or_else(|| rest.split_once(" :")).ok_or_else(|| bad(line))?;
                let pair = quoted_tokens(pair).ok_or_else(|| bad(line))?;
                let ks = quoted_tokens(ks).ok_or_else(|| bad(line))?;
                if pair.len() != 2 {
                    return Err(bad(line));
                }
                seps.push((pair[0].clone(), pair[1].clone(), ks));
            } else if line.starts_with("//") {
                continue;
            } else if line.contains("->") {
                let (lhs, attrs) = line.split_once('[').ok_or_else(|| bad(line))?;
                let toks = quoted_tokens(&lhs.replace("->", " ")).ok_or_else(|| bad(line))?;
                if toks.len() != 2 {
                    return Err(bad(line));
                }
                let undirected = attrs.contains("dir=none");
                let prov = attrs
                    .split("provenance=\"")
                    .nth(1)
                    .and_then(|r| r.split('"').next())
                    .and_then(EdgeProvenance::parse)
                    .ok_or_else(|| bad(line))?;
                edges.push((toks[0].clone(), toks[1].clone(), undirected, prov));
            } else {
                let toks = quoted_tokens(line.trim_end_matches(';')).ok_or_else(|| bad(line))?;
                if toks.len() != 1 {
                    return Err(bad(line));
                }
                names.push(toks[0].clone());
            }
        }
        if !closed {
            return Err(bad("missing closing brace"));
        }
        let mut p = Pdag::empty(names);
        let idx = |p: &Pdag, s: &str| p.names.iter().position(|n| n == s).ok_or_else(|| StructureError::BadDot(format!("unknown node {s}")));
        for (a, b, undirected, prov) in edges {
            let (a, b) = (idx(&p, &a)?, idx(&p, &b)?);
            if undirected {
                p.add_undirected(a, b, prov);
            } else {
                p.add_directed(a, b, prov);
            }
        }
        for (a, b, ks) in seps {
            let k = ks.iter().map(|s| idx(&p, s)).collect::<Result<Vec<_>, _>>()?;
            let (a, b) = (idx(&p, &a)?, idx(&p, &b)?);
            p.set_sepset(a, b, k);
        }
        p.conflicts = conflicts;
        Ok(p)
    }

    /// `from,to,kind,provenance` rows.
    pub fn to_edge_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["from", "to", "kind", "provenance"]).expect("in-memory write");
        for e in self.edges() {
            let kind = if e.directed { "directed" } else { "undirected" };
            w.write_record([self.names[e.from].as_str(), self.names[e.to].as_str(), kind, e.provenance.as_str()])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn quoted_tokens(s: &str) -> Option<Vec<String>> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let r = rest.strip_prefix('"')?;
        let end = r.find('"')?;
        out.push(r[..end].to_string());
        rest = r[end + 1..].trim_start();
    }
    Some(out)
}

/// A conditional independence oracle.
pub trait CiTest: Sync {
    fn n_vars(&self) -> usize;
    /// True when `X_i ⫫ X_j | X_K` is accepted.
    fn independent(&self, i: usize, j: usize, k: &[usize]) -> bool;
}

/// d-separation in a known DAG.
pub struct DsepOracle<'a> {
    pub dag: &'a Dag,
}

impl CiTest for DsepOracle<'_> {
    fn n_vars(&self) -> usize {
        self.dag.n()
    }

    fn independent(&self, i: usize, j: usize, k: &[usize]) -> bool {
        d_separated(self.dag, &[i], &[j], k).expect("valid query")
    }
}

/// Symmetrised data test: independent only when both `ĉ^K_{i,j}` and
/// `ĉ^K_{j,i}` fall below their thresholds. A direction that cannot be
/// estimated (too few populated cells) counts as dependent, which keeps the
/// edge.
pub struct DataCiTest<'a> {
    pub data: &'a Dataset,
    pub config: EstimatorConfig,
}

impl CiTest for DataCiTest<'_> {
    fn n_vars(&self) -> usize {
        self.data.n_cols()
    }

    fn independent(&self, i: usize, j: usize, k: &[usize]) -> bool {
        [(i, j), (j, i)].iter().all(|&(a, b)| {
            matches!(dependence::estimate_coefficient(self.data, a, b, k, &self.config), Ok(e) if e.verdict == Verdict::Independent)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub estimator: EstimatorConfig,
    pub max_cond_size: usize,
    pub min_rows: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig { estimator: EstimatorConfig::default(), max_cond_size: 3, min_rows: 200 }
    }
}

/// All `size`-subsets of `pool` in lexicographic order.
pub fn subsets(pool: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec(pool: &[usize], size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for k in start..pool.len() {
            if pool.len() - k < size - cur.len() {
                break;
            }
            cur.push(pool[k]);
            rec(pool, size, k + 1, cur, out);
            cur.pop();
        }
    }
    rec(pool, size, 0, &mut cur, &mut out);
    out
}

/// PC-stable skeleton search with an arbitrary CI test.
///
/// Within one conditioning size every test sees the adjacencies frozen at
/// the start of the level, tests run in parallel, and removals are committed
/// together afterwards, so the result does not depend on edge order.
pub fn learn_skeleton_with<T: CiTest>(test: &T, names: Vec<String>, max_cond_size: usize) -> Pdag {
    assert_eq!(names.len(), test.n_vars(), "one name per variable");
    let mut p = Pdag::complete(names);
    for level in 0..=max_cond_size {
        let frozen: Vec<Vec<usize>> = (0..p.n()).map(|v| p.neighbors(v)).collect();
        let pairs: Vec<(usize, usize)> = p
            .skeleton()
            .into_iter()
            .filter(|&(a, b)| frozen[a].len() > level || frozen[b].len() > level)
            .collect();
        if pairs.is_empty() {
            break;
        }
        let found: Vec<Option<Vec<usize>>> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let mut tried = BTreeSet::new();
                for (x, y) in [(a, b), (b, a)] {
                    let pool: Vec<usize> = frozen[x].iter().copied().filter(|&v| v != y).collect();
                    for k in subsets(&pool, level) {
                        if tried.insert(k.clone()) && test.independent(a, b, &k) {
                            return Some(k);
                        }
                    }
                }
                None
            })
            .collect();
        for ((a, b), sep) in pairs.into_iter().zip(found) {
            if let Some(k) = sep {
                p.remove_edge(a, b);
                p.set_sepset(a, b, k);
            }
        }
    }
    p
}

/// Skeleton from observational data using the symmetrised coefficient test.
pub fn learn_skeleton(ds: &Dataset, cfg: &LearnConfig) -> Result<Pdag, StructureError> {
    if ds.n_rows() < cfg.min_rows {
        return Err(StructureError::InsufficientSamples { found: ds.n_rows(), needed: cfg.min_rows });
    }
    cfg.estimator.validate()?;
    let test = DataCiTest { data: ds, config: cfg.estimator.clone() };
    Ok(learn_skeleton_with(&test, ds.columns().to_vec(), cfg.max_cond_size))
}

/// Orients `a → c ← b` for every unshielded triple whose separating set
/// omits `c`. Contradictory proposals leave the edge as it was and are logged.
pub fn orient_v_structures(p: &Pdag) -> Pdag {
    let mut out = p.clone();
    let mut proposals: BTreeMap<(usize, usize), BTreeSet<(usize, usize)>> = BTreeMap::new();
    for c in 0..p.n() {
        let nb = p.neighbors(c);
        for (x, &a) in nb.iter().enumerate() {
            for &b in &nb[x + 1..] {
                if p.adjacent(a, b) {
                    continue;
                }
                if let Some(sep) = p.sepset(a, b) {
                    if !sep.contains(&c) {
                        proposals.entry(key(a, c)).or_default().insert((a, c));
                        proposals.entry(key(b, c)).or_default().insert((b, c));
                    }
                }
            }
        }
    }
    for (_, dirs) in proposals {
        if dirs.len() > 1 {
            let (a, b) = *dirs.iter().next().unwrap();
            out.log_conflict(format!(
                "v-structures disagree on {} - {}; left undirected",
                out.names[a], out.names[b]
            ));
            continue;
        }
        let (a, b) = *dirs.iter().next().unwrap();
        if out.has_directed(b, a) {
            out.log_conflict(format!(
                "v-structure wants {} -> {} but the edge is already reversed",
                out.names[a], out.names[b]
            ));
        } else if out.has_undirected(a, b) {
            out.orient(a, b, EdgeProvenance::VStructure);
        }
    }
    out
}

/// Applies Meek's rules R1–R4 until nothing changes.
pub fn meek_rules(p: &Pdag) -> Pdag {
    let mut out = p.clone();
    loop {
        let mut changed = false;
        for (lo, hi) in out.undirected_edges() {
            for (a, b) in [(lo, hi), (hi, lo)] {
                if !out.has_undirected(a, b) {
                    break;
                }
                if let Some(rule) = meek_fires(&out, a, b) {
                    if out.orient(a, b, rule) {
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Which rule (if any) forces the undirected edge `a − b` into `a → b`.
fn meek_fires(p: &Pdag, a: usize, b: usize) -> Option<EdgeProvenance> {
    let n = p.n();
    // R1: c → a − b, c and b nonadjacent
    if (0..n).any(|c| p.has_directed(c, a) && c != b && !p.adjacent(c, b)) {
        return Some(EdgeProvenance::MeekR1);
    }
    // R2: a → c → b
    if (0..n).any(|c| p.has_directed(a, c) && p.has_directed(c, b)) {
        return Some(EdgeProvenance::MeekR2);
    }
    let und = p.undirected_neighbors(a);
    // R3: a − c → b, a − d → b, c and d nonadjacent
    for (x, &c) in und.iter().enumerate() {
        if !p.has_directed(c, b) {
            continue;
        }
        for &d in &und[x + 1..] {
            if p.has_directed(d, b) && !p.adjacent(c, d) {
                return Some(EdgeProvenance::MeekR3);
            }
        }
    }
    // R4: a − c → d → b, a adjacent to d, c and b nonadjacent
    for &c in &und {
        if c == b || p.adjacent(c, b) {
            continue;
        }
        for d in p.children(c) {
            if d != a && p.has_directed(d, b) && p.adjacent(a, d) {
                return Some(EdgeProvenance::MeekR4);
            }
        }
    }
    None
}

/// Interventional samples in which `clamped` was set by the experimenter.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub clamped: usize,
    pub data: Dataset,
}

/// Orients edges out of intervened nodes.
///
/// Datasets clamping the same node are pooled; the clamp levels play the
/// role of the `x_j` cells. For every other node `j`, `ĉ^K_{j,i}` is
/// evaluated for each `K ⊆ adj(j) ∖ {i}` up to the configured size:
///
/// * independent for some `K` and `i − j` adjacent → `j → i`;
/// * dependent for every `K` → `i → j`, adding the edge when the
///   observational skeleton had dropped it (a mechanism switched by the
///   intervention can be invisible to observational tests).
///
/// Afterwards v-structures are re-derived for the remaining undirected edges
/// and Meek's rules are re-run.
pub fn orient_with_interventions(p: &Pdag, experiments: &[Experiment], cfg: &LearnConfig) -> Result<Pdag, StructureError> {
    if experiments.is_empty() {
        return Ok(p.clone());
    }
    let mut by_node: BTreeMap<usize, Vec<&Dataset>> = BTreeMap::new();
    for e in experiments {
        if e.clamped >= p.n() {
            return Err(StructureError::NodeOutOfRange(e.clamped));
        }
        by_node.entry(e.clamped).or_default().push(&e.data);
    }
    let mut out = p.clone();
    for (i, parts) in by_node {
        let pooled = Dataset::concat(&parts).map_err(DependenceError::from)?;
        let missing = |reason: &str| StructureError::MissingInterventionData { node: p.names[i].clone(), reason: reason.to_string() };
        if pooled.n_cols() != p.n() {
            return Err(missing("column count differs from the graph"));
        }
        if dependence::strata(&pooled, i).len() < 2 {
            return Err(missing("needs at least two distinct clamp levels"));
        }
        for j in (0..p.n()).filter(|&j| j != i) {
            let pool: Vec<usize> = out.neighbors(j).into_iter().filter(|&v| v != i).collect();
            let mut tested = 0;
            let mut any_independent = false;
            'sizes: for size in 0..=cfg.max_cond_size.min(pool.len()) {
                for k in subsets(&pool, size) {
                    if let Ok(e) = dependence::estimate_coefficient(&pooled, j, i, &k, &cfg.estimator) {
                        tested += 1;
                        if e.verdict == Verdict::Independent {
                            any_independent = true;
                            break 'sizes;
                        }
                    }
                }
            }
            if tested == 0 {
                continue;
            }
            if any_independent {
                if out.adjacent(i, j) {
                    set_interventional(&mut out, j, i);
                }
            } else if out.adjacent(i, j) {
                set_interventional(&mut out, i, j);
            } else {
                out.add_directed(i, j, EdgeProvenance::Interventional);
                out.clear_sepset(i, j);
            }
        }
    }
    Ok(meek_rules(&orient_v_structures(&out)))
}

fn set_interventional(p: &mut Pdag, a: usize, b: usize) {
    if p.has_directed(b, a) {
        let prov = p.provenance(a, b).unwrap();
        p.log_conflict(format!(
            "intervention reverses {} -> {} ({})",
            p.names[b],
            p.names[a],
            prov.as_str()
        ));
    }
    p.add_directed(a, b, EdgeProvenance::Interventional);
}

/// Skeleton, v-structures, Meek's rules, then interventional orientation.
pub fn learn_structure(obs: &Dataset, experiments: &[Experiment], cfg: &LearnConfig) -> Result<Pdag, StructureError> {
    let skel = learn_skeleton(obs, cfg)?;
    let p = meek_rules(&orient_v_structures(&skel));
    orient_with_interventions(&p, experiments, cfg)
}
