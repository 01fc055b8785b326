//! Graph oracles that share no code with the library's graph algorithms.

use std::collections::BTreeSet;

use depmeter::structure::Dag;

pub fn descendants(edges: &BTreeSet<(usize, usize)>, v: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(x) = stack.pop() {
        for &(a, b) in edges {
            if a == x && out.insert(b) {
                stack.push(b);
            }
        }
    }
    out
}

/// d-separation by listing every simple path in the skeleton.
pub fn dsep_by_paths(n: usize, edges: &BTreeSet<(usize, usize)>, a: usize, b: usize, k: &[usize]) -> bool {
    let adj = |x: usize, y: usize| edges.contains(&(x, y)) || edges.contains(&(y, x));
    let active = |path: &[usize]| {
        path.windows(3).all(|w| {
            let collider = edges.contains(&(w[0], w[1])) && edges.contains(&(w[2], w[1]));
            if collider {
                descendants(edges, w[1]).iter().any(|d| k.contains(d))
            } else {
                !k.contains(&w[1])
            }
        })
    };
    fn walk(n: usize, path: &mut Vec<usize>, b: usize, adj: &dyn Fn(usize, usize) -> bool, hit: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        let last = *path.last().unwrap();
        if last == b {
            return hit(path);
        }
        for v in 0..n {
            if !path.contains(&v) && adj(last, v) {
                path.push(v);
                if walk(n, path, b, adj, hit) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    let mut path = vec![a];
    !walk(n, &mut path, b, &adj, &mut |p| active(p))
}

pub fn v_structures(edges: &BTreeSet<(usize, usize)>) -> BTreeSet<(usize, usize, usize)> {
    let adj = |x: usize, y: usize| edges.contains(&(x, y)) || edges.contains(&(y, x));
    let mut out = BTreeSet::new();
    for &(a, c) in edges {
        for &(b, c2) in edges {
            if c == c2 && a < b && !adj(a, b) {
                out.insert((a, c, b));
            }
        }
    }
    out
}

pub fn acyclic(n: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    (0..n).all(|v| edges.iter().filter(|&&(a, _)| a == v).all(|&(_, b)| !descendants(edges, b).contains(&v)))
}

/// Edges on which every admissible DAG agrees, as `(directed, undirected)`.
/// Admissible: same skeleton and v-structures as `dag`, acyclic, and
/// containing every edge in `required`.
pub fn equivalence_class_marks(
    dag: &Dag,
    required: &BTreeSet<(usize, usize)>,
) -> (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>) {
    let n = dag.n();
    let truth: BTreeSet<(usize, usize)> = dag.edges().into_iter().collect();
    let skel: Vec<(usize, usize)> = truth.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let target_v = v_structures(&truth);
    let mut members: Vec<BTreeSet<(usize, usize)>> = Vec::new();
    for mask in 0..1u32 << skel.len() {
        let e: BTreeSet<(usize, usize)> =
            skel.iter().enumerate().map(|(t, &(a, b))| if mask >> t & 1 == 1 { (b, a) } else { (a, b) }).collect();
        if required.is_subset(&e) && acyclic(n, &e) && v_structures(&e) == target_v {
            members.push(e);
        }
    }
    assert!(!members.is_empty());
    let mut directed = BTreeSet::new();
    let mut undirected = BTreeSet::new();
    for &(a, b) in &skel {
        let fwd = members.iter().filter(|m| m.contains(&(a, b))).count();
        match fwd {
            0 => {
                directed.insert((b, a));
            }
            f if f == members.len() => {
                directed.insert((a, b));
            }
            _ => {
                undirected.insert((a, b));
            }
        }
    }
    (directed, undirected)
}

pub fn names(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("X{k}")).collect()
}
