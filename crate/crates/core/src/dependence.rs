//! Sample estimates of the conditional dependence coefficient `ĉ^K_{i,j}`.
//!
//! Exact matches on `x_K` never occur with continuous data, so rows are
//! grouped into cells: equal-frequency bins for every conditioning variable
//! (a K-bin is one combination of those) crossed with equal-frequency bins of
//! `x_j`. Within each K-bin, every pair of retained `x_j` cells yields the
//! ratio
//!
//! ```text
//!   D(law of X_i in cell a, law of X_i in cell b) / |rep_a − rep_b|
//! ```
//!
//! where `D` is W₁ or the bandwidth-scaled MMD and `rep` is the cell's
//! representative `x_j` value. The estimate is the largest ratio (or a high
//! quantile of them).
//!
//! The verdict is per pair: a pair is evidence of dependence when
//! `D > c₀ · s · sqrt(1/n_a + 1/n_b)`, with `s` the pooled within-cell sd of
//! `X_i`, i.e. the ratio exceeds `τ = c₀ · s · sqrt(1/n_a + 1/n_b) / gap`.
//! This is of order `1/√n` like a global threshold but measured on the
//! conditional scale of each cell, which a single marginal scale misses
//! badly once K is nonempty.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::dataset::{Dataset, DatasetError};
use crate::ipm::{self, EmpiricalDistribution, IpmError, KernelSpec};
use crate::linalg::Cholesky;

#[derive(Debug, Error)]
pub enum DependenceError {
    #[error("column index {0} out of range")]
    ColumnOutOfRange(usize),
    #[error("index sets overlap: {0}")]
    OverlappingIndices(String),
    #[error("no two retained cells share a conditioning bin")]
    NoComparableCells,
    #[error("{found} rows are not enough (need at least {needed})")]
    InsufficientSamples { found: usize, needed: usize },
    #[error("stratum {0} selects too few rows")]
    EmptyStratum(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ipm(#[from] IpmError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

impl DependenceError {
    pub fn code(&self) -> &'static str {
        match self {
            DependenceError::ColumnOutOfRange(_) => "ColumnOutOfRange",
            DependenceError::OverlappingIndices(_) => "OverlappingIndices",
            DependenceError::NoComparableCells => "NoComparableCells",
            DependenceError::InsufficientSamples { .. } => "InsufficientSamples",
            DependenceError::EmptyStratum(_) => "EmptyStratum",
            DependenceError::InvalidConfig(_) => "InvalidConfig",
            DependenceError::Ipm(e) => e.code(),
            DependenceError::Dataset(e) => e.code(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Wasserstein,
    Mmd,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Wasserstein => "wasserstein",
            Estimator::Mmd => "mmd",
        })
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wasserstein" | "w1" => Ok(Estimator::Wasserstein),
            "mmd" => Ok(Estimator::Mmd),
            other => Err(format!("unknown estimator {other:?}")),
        }
    }
}

/// How the per-pair ratios are reduced to one number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    Max,
    Quantile(f64),
}

/// Which statistic of a cell's `x_j` values stands in for the cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representative {
    Mean,
    Median,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// `bandwidth_scale` × median pairwise distance of the `X_i` sample.
    Median,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub estimator: Estimator,
    /// Bins per conditioning variable, and for `x_j` when K is nonempty.
    pub bins: usize,
    /// Bins for `x_j` when K is empty.
    pub marginal_bins: usize,
    pub min_occupancy: usize,
    pub threshold_c0: f64,
    pub bandwidth: Bandwidth,
    pub bandwidth_scale: f64,
    pub aggregate: Aggregate,
    pub representative: Representative,
    /// Linearly shift `X_i` to each K-bin's centre before comparing cells.
    pub adjust_within_bins: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            estimator: Estimator::Wasserstein,
            bins: 4,
            marginal_bins: 8,
            min_occupancy: 20,
            threshold_c0: DEFAULT_C0,
            bandwidth: Bandwidth::Median,
            bandwidth_scale: 5.0,
            aggregate: Aggregate::Max,
            representative: Representative::Mean,
            adjust_within_bins: true,
        }
    }
}

/// Default threshold constant, in null standard errors of a cell-pair distance.
pub const DEFAULT_C0: f64 = 5.0;

impl EstimatorConfig {
    pub fn with_estimator(mut self, e: Estimator) -> Self {
        self.estimator = e;
        self
    }

    pub fn validate(&self) -> Result<(), DependenceError> {
        let bad = |m: &str| Err(DependenceError::InvalidConfig(m.to_string()));
        if self.bins < 2 || self.marginal_bins < 2 {
            return bad("bins must be at least 2");
        }
        if self.min_occupancy == 0 {
            return bad("min occupancy must be positive");
        }
        if !(self.threshold_c0 >= 0.0) || !self.threshold_c0.is_finite() {
            return bad("threshold constant must be a nonnegative number");
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return bad("bandwidth must be positive");
            }
        }
        if !(self.bandwidth_scale > 0.0) || !self.bandwidth_scale.is_finite() {
            return bad("bandwidth scale must be positive");
        }
        if let Aggregate::Quantile(q) = self.aggregate {
            if !(0.0..=1.0).contains(&q) {
                return bad("quantile must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

/// Rows grouped by (K-bin, j-bin).
#[derive(Clone, Debug, PartialEq)]
pub struct CellPartition {
    pub j: usize,
    pub k: Vec<usize>,
    /// Retained cells sorted by `(k_bin, j_bin)`.
    pub cells: Vec<Cell>,
    /// Interior quantile edges for each conditioning variable (in K order),
    /// then for `x_j`.
    pub edges: Vec<Vec<f64>>,
    pub min_occupancy: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub k_bin: usize,
    pub j_bin: usize,
    pub rows: Vec<usize>,
}

impl CellPartition {
    /// Index pairs of cells sharing a K-bin, `a < b`.
    pub fn comparable_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < self.cells.len() {
            let mut end = start;
            while end < self.cells.len() && self.cells[end].k_bin == self.cells[start].k_bin {
                end += 1;
            }
            for a in start..end {
                for b in a + 1..end {
                    out.push((a, b));
                }
            }
            start = end;
        }
        out
    }
}

/// Interior edges of `bins` equal-frequency bins; tied values never straddle
/// an edge, so heavily tied columns produce fewer bins.
fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let mut edges: Vec<f64> = (1..bins).map(|q| s[(q * n / bins).min(n - 1)]).collect();
    edges.dedup();
    // an edge equal to the minimum would leave bin 0 empty
    edges.retain(|&e| e > s[0]);
    edges
}

fn bin_of(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|&e| e <= x)
}

fn check_indices(ds: &Dataset, i: Option<usize>, j: usize, k: &[usize]) -> Result<(), DependenceError> {
    let m = ds.n_cols();
    for &c in i.iter().chain(std::iter::once(&j)).chain(k) {
        if c >= m {
            return Err(DependenceError::ColumnOutOfRange(c));
        }
    }
    let mut all: Vec<usize> = i.iter().copied().chain(std::iter::once(j)).chain(k.iter().copied()).collect();
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return Err(DependenceError::OverlappingIndices(format!("i={i:?}, j={j}, K={k:?}")));
    }
    Ok(())
}

/// Equal-frequency cells on `x_K × x_j` with `bins` bins per variable.
pub fn bin_conditioning(ds: &Dataset, j: usize, k: &[usize], bins: usize, min_occupancy: usize) -> Result<CellPartition, DependenceError> {
    partition(ds, j, k, bins, bins, min_occupancy)
}

fn partition(ds: &Dataset, j: usize, k: &[usize], k_bins: usize, j_bins: usize, min_occupancy: usize) -> Result<CellPartition, DependenceError> {
    check_indices(ds, None, j, k)?;
    if k_bins < 2 || j_bins < 2 {
        return Err(DependenceError::InvalidConfig("bins must be at least 2".into()));
    }
    let n = ds.n_rows();
    let mut edges: Vec<Vec<f64>> = k.iter().map(|&c| quantile_edges(&ds.column(c), k_bins)).collect();
    edges.push(quantile_edges(&ds.column(j), j_bins));
    let mut keyed: Vec<(usize, usize, usize)> = (0..n)
        .map(|r| {
            let kb = k.iter().zip(&edges).fold(0, |acc, (&c, e)| acc * (e.len() + 1) + bin_of(e, ds.get(r, c)));
            (kb, bin_of(&edges[k.len()], ds.get(r, j)), r)
        })
        .collect();
    keyed.sort_unstable();
    let mut cells = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start;
        while end < keyed.len() && keyed[end].0 == keyed[start].0 && keyed[end].1 == keyed[start].1 {
            end += 1;
        }
        if end - start >= min_occupancy {
            cells.push(Cell { k_bin: keyed[start].0, j_bin: keyed[start].1, rows: keyed[start..end].iter().map(|t| t.2).collect() });
        }
        start = end;
    }
    let p = CellPartition { j, k: k.to_vec(), cells, edges, min_occupancy };
    if p.comparable_pairs().is_empty() {
        return Err(DependenceError::NoComparableCells);
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Dependent,
    Independent,
}

/// One compared cell pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostic {
    pub k_bin: usize,
    pub j_bins: (usize, usize),
    pub sizes: (usize, usize),
    /// IPM distance between the two conditional samples of `X_i`.
    pub distance: f64,
    /// Gap between the cells' representatives of `x_j`.
    pub gap: f64,
    pub ratio: f64,
    /// Standard error scale of `distance` under no dependence:
    /// pooled within-cell sd of `X_i` times `sqrt(1/n_a + 1/n_b)`.
    pub null_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_cells: usize,
    pub n_pairs: usize,
    pub min_cell: usize,
    pub best_pair: Option<PairDiagnostic>,
    pub pairs: Vec<PairDiagnostic>,
    /// Kernel bandwidth actually used (MMD only).
    pub bandwidth: Option<f64>,
    /// Pairs whose raw MMD² was negative and clamped.
    pub clamped_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DependenceEstimate {
    pub value: f64,
    pub i: usize,
    pub j: usize,
    pub k: Vec<usize>,
    pub estimator: Estimator,
    pub tau: f64,
    pub verdict: Verdict,
    pub diagnostics: Diagnostics,
}

/// Flat CSV row for a [`DependenceEstimate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub i: String,
    pub j: String,
    #[serde(rename = "K")]
    pub k: String,
    pub estimator: Estimator,
    pub value: f64,
    pub tau: f64,
    pub verdict: Verdict,
    pub n_cells: usize,
}

impl DependenceEstimate {
    pub fn is_dependent(&self) -> bool {
        self.verdict == Verdict::Dependent
    }

    pub fn record(&self, columns: &[String]) -> EstimateRecord {
        EstimateRecord {
            i: columns[self.i].clone(),
            j: columns[self.j].clone(),
            k: self.k.iter().map(|&c| columns[c].as_str()).collect::<Vec<_>>().join(";"),
            estimator: self.estimator,
            value: self.value,
            tau: self.tau,
            verdict: self.verdict,
            n_cells: self.diagnostics.n_cells,
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len().max(2) - 1) as f64).sqrt()
}

fn median_sorted(s: &[f64]) -> f64 {
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

struct CellSample {
    sorted_xi: Vec<f64>,
    var: f64,
    rep: f64,
    dist: Option<EmpiricalDistribution>,
    self_sum: f64,
}

/// W₁ between two uniform sorted samples.
fn w1_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (wa, wb) = (1.0 / a.len() as f64, -1.0 / b.len() as f64);
    let mut merged = Vec::with_capacity(a.len() + b.len());
    let (mut p, mut q) = (0, 0);
    while p < a.len() || q < b.len() {
        if q == b.len() || (p < a.len() && a[p] <= b[q]) {
            merged.push((a[p], wa));
            p += 1;
        } else {
            merged.push((b[q], wb));
            q += 1;
        }
    }
    ipm::cdf_gap_integral(&merged)
}

/// Moves every `X_i` value to the centre of its K-bin along a local linear
/// fit in `x_K`, so the cells of one K-bin compare conditional laws at a
/// common `x_K` instead of mixtures over the bin's width. The slope is
/// estimated from deviations about each cell's own means, which keeps the
/// `x_j` effect out of it. Bins with a singular design are left alone.
fn adjust_to_bin_centres(ds: &Dataset, part: &CellPartition, xi: &mut [f64]) {
    let d = part.k.len();
    let mut start = 0;
    while start < part.cells.len() {
        let kb = part.cells[start].k_bin;
        let end = start + part.cells[start..].iter().take_while(|c| c.k_bin == kb).count();
        let group = &part.cells[start..end];
        start = end;

        let mut sxx = vec![0.0; d * d];
        let mut sxy = vec![0.0; d];
        let mut centre = vec![0.0; d];
        let mut total = 0usize;
        for cell in group {
            let n = cell.rows.len() as f64;
            let mk: Vec<f64> = (0..d).map(|a| cell.rows.iter().map(|&r| ds.get(r, part.k[a])).sum::<f64>() / n).collect();
            let mi = cell.rows.iter().map(|&r| xi[r]).sum::<f64>() / n;
            for &r in &cell.rows {
                let dev: Vec<f64> = (0..d).map(|a| ds.get(r, part.k[a]) - mk[a]).collect();
                for a in 0..d {
                    sxy[a] += dev[a] * (xi[r] - mi);
                    for b in 0..d {
                        sxx[a * d + b] += dev[a] * dev[b];
                    }
                }
            }
            for a in 0..d {
                centre[a] += mk[a] * n;
            }
            total += cell.rows.len();
        }
        let Ok(ch) = Cholesky::factor(&sxx, d) else { continue };
        let beta = ch.solve(&sxy);
        for c in centre.iter_mut() {
            *c /= total as f64;
        }
        for cell in group {
            for &r in &cell.rows {
                xi[r] -= (0..d).map(|a| beta[a] * (ds.get(r, part.k[a]) - centre[a])).sum::<f64>();
            }
        }
    }
}

/// `ĉ^K_{i,j}` from data.
pub fn estimate_coefficient(ds: &Dataset, i: usize, j: usize, k: &[usize], cfg: &EstimatorConfig) -> Result<DependenceEstimate, DependenceError> {
    cfg.validate()?;
    check_indices(ds, Some(i), j, k)?;
    let needed = 2 * cfg.min_occupancy;
    if ds.n_rows() < needed {
        return Err(DependenceError::InsufficientSamples { found: ds.n_rows(), needed });
    }
    let j_bins = if k.is_empty() { cfg.marginal_bins } else { cfg.bins };
    let part = partition(ds, j, k, cfg.bins, j_bins, cfg.min_occupancy)?;
    let mut xi = ds.column(i);
    if cfg.adjust_within_bins && !k.is_empty() {
        adjust_to_bin_centres(ds, &part, &mut xi);
    }
    let xj = ds.column(j);

    let kernel = match (cfg.estimator, cfg.bandwidth) {
        (Estimator::Wasserstein, _) => None,
        (Estimator::Mmd, Bandwidth::Fixed(h)) => Some(KernelSpec::gaussian(h)?),
        (Estimator::Mmd, Bandwidth::Median) => {
            let pts: Vec<&[f64]> = xi.iter().map(std::slice::from_ref).collect();
            let h = ipm::median_pairwise_distance(&pts);
            Some(KernelSpec::gaussian(cfg.bandwidth_scale * if h > 0.0 { h } else { 1.0 })?)
        }
    };

    let samples: Vec<CellSample> = part
        .cells
        .par_iter()
        .map(|cell| {
            let mut v: Vec<f64> = cell.rows.iter().map(|&r| xi[r]).collect();
            v.sort_by(f64::total_cmp);
            let mut js: Vec<f64> = cell.rows.iter().map(|&r| xj[r]).collect();
            let rep = match cfg.representative {
                Representative::Mean => mean(&js),
                Representative::Median => {
                    js.sort_by(f64::total_cmp);
                    median_sorted(&js)
                }
            };
            let (dist, self_sum) = match &kernel {
                Some(kern) => {
                    let d = EmpiricalDistribution::from_scalars(&v).expect("cells are nonempty");
                    let s = ipm::kernel_cross_sum(&d, &d, kern);
                    (Some(d), s)
                }
                None => (None, 0.0),
            };
            let var = std_dev(&v).powi(2);
            CellSample { sorted_xi: v, var, rep, dist, self_sum }
        })
        .collect();

    let scale = xj.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let pair_idx: Vec<(usize, usize)> = part
        .comparable_pairs()
        .into_iter()
        .filter(|&(a, b)| (samples[a].rep - samples[b].rep).abs() > 1e-12 * scale)
        .collect();
    if pair_idx.is_empty() {
        return Err(DependenceError::NoComparableCells);
    }
    let results: Vec<(PairDiagnostic, bool)> = pair_idx
        .par_iter()
        .map(|&(a, b)| {
            let (sa, sb) = (&samples[a], &samples[b]);
            let (distance, clamped) = match &kernel {
                None => (w1_sorted(&sa.sorted_xi, &sb.sorted_xi), false),
                Some(kern) => {
                    let cross = ipm::kernel_cross_sum(sa.dist.as_ref().unwrap(), sb.dist.as_ref().unwrap(), kern);
                    let m = ipm::mmd_from_sums(sa.self_sum, sb.self_sum, cross);
                    (kern.bandwidth() * m.value.sqrt(), m.clamped)
                }
            };
            let gap = (sa.rep - sb.rep).abs();
            let (na, nb) = (sa.sorted_xi.len() as f64, sb.sorted_xi.len() as f64);
            let pooled = ((na - 1.0) * sa.var + (nb - 1.0) * sb.var) / (na + nb - 2.0).max(1.0);
            let null_scale = pooled.sqrt() * (1.0 / na + 1.0 / nb).sqrt();
            let diag = PairDiagnostic {
                k_bin: part.cells[a].k_bin,
                j_bins: (part.cells[a].j_bin, part.cells[b].j_bin),
                sizes: (sa.sorted_xi.len(), sb.sorted_xi.len()),
                distance,
                gap,
                ratio: distance / gap,
                null_scale,
            };
            (diag, clamped)
        })
        .collect();
    let clamped_pairs = results.iter().filter(|r| r.1).count();
    let pairs: Vec<PairDiagnostic> = results.into_iter().map(|r| r.0).collect();

    let best = pairs.iter().max_by(|p, q| p.ratio.total_cmp(&q.ratio)).cloned();
    let value = match cfg.aggregate {
        Aggregate::Max => best.as_ref().map_or(0.0, |b| b.ratio),
        Aggregate::Quantile(q) => {
            let mut r: Vec<f64> = pairs.iter().map(|p| p.ratio).collect();
            r.sort_by(f64::total_cmp);
            r[((q * (r.len() - 1) as f64).round() as usize).min(r.len() - 1)]
        }
    }
    .max(0.0);

    let used: std::collections::BTreeSet<usize> = pair_idx.iter().flat_map(|&(a, b)| [a, b]).collect();
    let min_cell = used.iter().map(|&c| part.cells[c].rows.len()).min().unwrap_or(0);
    // A pair is evidence of dependence when its distance exceeds c0 null
    // standard errors. τ is reported on the ratio scale for the pair with the
    // strongest evidence: c0 · null_scale / gap.
    let z = |p: &PairDiagnostic| if p.null_scale > 0.0 { p.distance / p.null_scale } else if p.distance > 0.0 { f64::INFINITY } else { 0.0 };
    let strongest = pairs.iter().max_by(|p, q| z(p).total_cmp(&z(q))).expect("at least one pair");
    let tau = cfg.threshold_c0 * strongest.null_scale / strongest.gap;
    let verdict = if z(strongest) > cfg.threshold_c0 { Verdict::Dependent } else { Verdict::Independent };

    Ok(DependenceEstimate {
        value,
        i,
        j,
        k: k.to_vec(),
        estimator: cfg.estimator,
        tau,
        verdict,
        diagnostics: Diagnostics {
            n_cells: part.cells.len(),
            n_pairs: pairs.len(),
            min_cell,
            best_pair: best,
            pairs,
            bandwidth: kernel.map(|k| k.bandwidth()),
            clamped_pairs,
        },
    })
}

/// Selects the rows of a stratum of the grouping column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stratum {
    Value(f64),
    /// Half-open `[lo, hi)`.
    Range(f64, f64),
}

impl Stratum {
    fn contains(&self, x: f64) -> bool {
        match *self {
            Stratum::Value(v) => x == v,
            Stratum::Range(lo, hi) => lo <= x && x < hi,
        }
    }
}

impl std::fmt::Display for Stratum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stratum::Value(v) => write!(f, "{v}"),
            Stratum::Range(lo, hi) => write!(f, "[{lo},{hi})"),
        }
    }
}

/// `ĉ^{C=c}_{y,x}`: the marginal coefficient of `x` on `y` within one stratum.
pub fn group_coefficient(ds: &Dataset, y: usize, x: usize, c: usize, stratum: Stratum, cfg: &EstimatorConfig) -> Result<DependenceEstimate, DependenceError> {
    check_indices(ds, Some(y), x, &[c])?;
    let rows: Vec<usize> = (0..ds.n_rows()).filter(|&r| stratum.contains(ds.get(r, c))).collect();
    if rows.len() < cfg.min_occupancy.max(1) {
        return Err(DependenceError::EmptyStratum(stratum.to_string()));
    }
    let sub = ds.select_rows(&rows)?;
    estimate_coefficient(&sub, y, x, &[], cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumScore {
    pub value: f64,
    pub label: Option<String>,
    pub n_rows: usize,
    pub estimate: DependenceEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupScan {
    /// Sorted by descending coefficient; ties keep ascending stratum order.
    pub ranked: Vec<StratumScore>,
    /// Largest per-stratum coefficient, the estimate of `c^{c}_{y,x}`.
    pub sup: f64,
}

/// Distinct values of column `c` with their row counts, ascending.
pub fn strata(ds: &Dataset, c: usize) -> Vec<(f64, usize)> {
    let mut v = ds.column(c);
    v.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for x in v {
        match out.last_mut() {
            Some((last, n)) if *last == x => *n += 1,
            _ => out.push((x, 1)),
        }
    }
    out
}

/// Ranks the strata of `c` by their coefficient of `x` on `y`.
pub fn group_scan(ds: &Dataset, y: usize, x: usize, c: usize, cfg: &EstimatorConfig) -> Result<GroupScan, DependenceError> {
    check_indices(ds, Some(y), x, &[c])?;
    let mut ranked = Vec::new();
    for (value, n) in strata(ds, c) {
        if n < cfg.min_occupancy {
            continue;
        }
        let estimate = group_coefficient(ds, y, x, c, Stratum::Value(value), cfg)?;
        ranked.push(StratumScore { value, label: ds.level_label(c, value).map(str::to_string), n_rows: n, estimate });
    }
    if ranked.is_empty() {
        return Err(DependenceError::EmptyStratum("every stratum is below the minimum occupancy".into()));
    }
    ranked.sort_by(|a, b| b.estimate.value.total_cmp(&a.estimate.value));
    let sup = ranked[0].estimate.value;
    Ok(GroupScan { ranked, sup })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(cols: &[&str], data: &[Vec<f64>]) -> Dataset {
        Dataset::from_columns(cols.iter().map(|s| s.to_string()).collect(), data).unwrap()
    }

    #[test]
    fn uniform_rows_balance() {
        let n = 100;
        let x: Vec<f64> = (0..n).map(|k| (k * 37 % n) as f64 / n as f64).collect();
        let y: Vec<f64> = (0..n).map(|k| (k * 61 % n) as f64 / n as f64).collect();
        let d = ds(&["x", "y"], &[x, y]);
        let p = bin_conditioning(&d, 0, &[1], 2, 5).unwrap();
        assert_eq!(p.cells.len(), 4);
        assert_eq!(p.cells.iter().map(|c| c.rows.len()).sum::<usize>(), n);
        let p = bin_conditioning(&d, 0, &[], 2, 5).unwrap();
        assert!(p.cells.iter().all(|c| c.k_bin == 0));
        assert_eq!(p.cells.len(), 2);
    }

    #[test]
    fn constant_target_has_no_pairs() {
        let d = ds(&["x", "y"], &[vec![1.0; 50], (0..50).map(f64::from).collect()]);
        assert!(matches!(bin_conditioning(&d, 0, &[], 4, 5), Err(DependenceError::NoComparableCells)));
        assert!(matches!(estimate_coefficient(&d, 1, 0, &[], &EstimatorConfig::default()), Err(DependenceError::NoComparableCells)));
    }

    #[test]
    fn tied_values_share_a_bin() {
        let e = quantile_edges(&[1.0, 1.0, 1.0, 2.0, 2.0, 2.0], 4);
        assert_eq!(e, vec![2.0]);
        assert_eq!(bin_of(&e, 1.0), 0);
        assert_eq!(bin_of(&e, 2.0), 1);
    }

    #[test]
    fn deterministic_line_gives_its_slope() {
        let x: Vec<f64> = (0..4000).map(|k| k as f64 / 400.0).collect();
        let y: Vec<f64> = x.iter().map(|v| -3.0 * v + 1.0).collect();
        let d = ds(&["x", "y"], &[x, y]);
        let e = estimate_coefficient(&d, 1, 0, &[], &EstimatorConfig::default()).unwrap();
        assert!((e.value - 3.0).abs() < 1e-9, "{}", e.value);
        assert!(e.is_dependent());
    }

    #[test]
    fn rejects_overlap_and_bad_config() {
        let d = ds(&["x", "y"], &[(0..50).map(f64::from).collect(), (0..50).map(f64::from).collect()]);
        assert!(matches!(estimate_coefficient(&d, 0, 0, &[], &EstimatorConfig::default()), Err(DependenceError::OverlappingIndices(_))));
        assert!(matches!(estimate_coefficient(&d, 0, 5, &[], &EstimatorConfig::default()), Err(DependenceError::ColumnOutOfRange(5))));
        let cfg = EstimatorConfig { bins: 1, ..Default::default() };
        assert!(matches!(estimate_coefficient(&d, 0, 1, &[], &cfg), Err(DependenceError::InvalidConfig(_))));
    }

    #[test]
    fn stratum_errors() {
        let d = ds(&["c", "x", "y"], &[vec![0.0; 30], (0..30).map(f64::from).collect(), (0..30).map(f64::from).collect()]);
        assert!(matches!(group_coefficient(&d, 2, 1, 0, Stratum::Value(1.0), &EstimatorConfig::default()), Err(DependenceError::EmptyStratum(_))));
        assert_eq!(strata(&d, 0), vec![(0.0, 30)]);
    }
}
