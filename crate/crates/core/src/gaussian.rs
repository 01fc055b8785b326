//! Closed forms for jointly Gaussian systems.
//!
//! For a Gaussian vector the coefficient reduces to a partial regression
//! slope, `c^K_{i,j} = |Σ_{i,{j,K}} Σ_{{j,K},{j,K}}^{-1} e₁|`, with `X_j`
//! ordered first in the block. Conditional mutual information comes from
//! log-determinants and is reported in nats.

use thiserror::Error;

use crate::dataset::Dataset;
use crate::linalg::{self, Cholesky};
use crate::Information;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("conditioning block for {{j}} ∪ K is singular")]
    SingularConditioningBlock,
    #[error("covariance block {0:?} is singular")]
    SingularBlock(Vec<usize>),
    #[error("coefficient support contains a cycle")]
    CyclicSupport,
    #[error("need at least 2 rows, got {0}")]
    InsufficientSamples(usize),
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("index sets overlap: {0}")]
    OverlappingIndices(String),
    #[error("matrix is not {0}x{0}")]
    DimensionMismatch(usize),
    #[error("covariance is not symmetric")]
    NotSymmetric,
    #[error("covariance has eigenvalue {0} below -1e-10")]
    NotPositiveSemidefinite(f64),
    #[error("invalid linear model: {0}")]
    InvalidModel(String),
}

impl GaussianError {
    pub fn code(&self) -> &'static str {
        match self {
            GaussianError::SingularConditioningBlock => "SingularConditioningBlock",
            GaussianError::SingularBlock(_) => "SingularBlock",
            GaussianError::CyclicSupport => "CyclicSupport",
            GaussianError::InsufficientSamples(_) => "InsufficientSamples",
            GaussianError::IndexOutOfRange(_) => "ColumnOutOfRange",
            GaussianError::OverlappingIndices(_) => "OverlappingIndices",
            GaussianError::DimensionMismatch(_) => "DimensionMismatch",
            GaussianError::NotSymmetric => "NotSymmetric",
            GaussianError::NotPositiveSemidefinite(_) => "NotPositiveSemidefinite",
            GaussianError::InvalidModel(_) => "InvalidModel",
        }
    }
}

/// Mean vector and covariance matrix (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianModel {
    mean: Vec<f64>,
    cov: Vec<f64>,
}

impl GaussianModel {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self, GaussianError> {
        let m = mean.len();
        if cov.len() != m || cov.iter().any(|r| r.len() != m) {
            return Err(GaussianError::DimensionMismatch(m));
        }
        Self::from_flat(mean, cov.concat())
    }

    pub fn from_flat(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self, GaussianError> {
        let m = mean.len();
        if cov.len() != m * m {
            return Err(GaussianError::DimensionMismatch(m));
        }
        for r in 0..m {
            for c in r + 1..m {
                if (cov[r * m + c] - cov[c * m + r]).abs() > 1e-12 {
                    return Err(GaussianError::NotSymmetric);
                }
            }
        }
        let min_ev = linalg::symmetric_eigenvalues(&cov, m).into_iter().fold(f64::INFINITY, f64::min);
        if m > 0 && min_ev < -1e-10 {
            return Err(GaussianError::NotPositiveSemidefinite(min_ev));
        }
        Ok(GaussianModel { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self, r: usize, c: usize) -> f64 {
        self.cov[r * self.dim() + c]
    }

    pub fn covariance(&self) -> Vec<Vec<f64>> {
        self.cov.chunks(self.dim().max(1)).map(<[f64]>::to_vec).collect()
    }

    fn check(&self, idx: &[usize]) -> Result<(), GaussianError> {
        match idx.iter().find(|&&k| k >= self.dim()) {
            Some(&k) => Err(GaussianError::IndexOutOfRange(k)),
            None => Ok(()),
        }
    }

    fn log_det(&self, idx: &[usize]) -> Result<f64, GaussianError> {
        if idx.is_empty() {
            return Ok(0.0);
        }
        let sub = linalg::submatrix(&self.cov, self.dim(), idx, idx);
        Cholesky::factor(&sub, idx.len())
            .map(|c| c.log_det())
            .map_err(|_| GaussianError::SingularBlock(idx.to_vec()))
    }
}

fn disjoint(i: usize, j: usize, k: &[usize]) -> Result<(), GaussianError> {
    if i == j || k.contains(&i) || k.contains(&j) {
        return Err(GaussianError::OverlappingIndices(format!("i={i}, j={j}, K={k:?}")));
    }
    let mut s = k.to_vec();
    s.sort_unstable();
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(GaussianError::OverlappingIndices(format!("K={k:?} repeats an index")));
    }
    Ok(())
}

/// `|first entry of Σ_{{j,K},{j,K}}^{-1} Σ_{{j,K},i}|`.
pub fn closed_form_coefficient(model: &GaussianModel, i: usize, j: usize, k: &[usize]) -> Result<f64, GaussianError> {
    model.check(&[i, j])?;
    model.check(k)?;
    disjoint(i, j, k)?;
    let block: Vec<usize> = std::iter::once(j).chain(k.iter().copied()).collect();
    let m = model.dim();
    let s = linalg::submatrix(&model.cov, m, &block, &block);
    let rhs: Vec<f64> = block.iter().map(|&b| model.cov[b * m + i]).collect();
    let ch = Cholesky::factor(&s, block.len()).map_err(|_| GaussianError::SingularConditioningBlock)?;
    Ok(ch.solve(&rhs)[0].abs())
}

/// Coefficient of a block `X_J` on `X_i` given `X_K`: the Euclidean norm of
/// the `J` entries of `Σ_{{J,K},{J,K}}^{-1} Σ_{{J,K},i}`. Under the Euclidean
/// metric on `x_J` this is the largest mean shift of `X_i` per unit move of
/// `x_J`; for `|J| = 1` it equals [`closed_form_coefficient`].
pub fn closed_form_coefficient_set(model: &GaussianModel, i: usize, j: &[usize], k: &[usize]) -> Result<f64, GaussianError> {
    model.check(&[i])?;
    model.check(j)?;
    model.check(k)?;
    if j.is_empty() {
        return Err(GaussianError::OverlappingIndices("J is empty".into()));
    }
    let block: Vec<usize> = j.iter().chain(k).copied().collect();
    let mut sorted = block.clone();
    sorted.push(i);
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(GaussianError::OverlappingIndices(format!("i={i}, J={j:?}, K={k:?}")));
    }
    let m = model.dim();
    let s = linalg::submatrix(&model.cov, m, &block, &block);
    let rhs: Vec<f64> = block.iter().map(|&b| model.cov[b * m + i]).collect();
    let ch = Cholesky::factor(&s, block.len()).map_err(|_| GaussianError::SingularConditioningBlock)?;
    Ok(ch.solve(&rhs)[..j.len()].iter().map(|b| b * b).sum::<f64>().sqrt())
}

/// `I(X_i; X_j | X_K)` in nats, clamped at zero.
pub fn gaussian_cmi(model: &GaussianModel, i: usize, j: usize, k: &[usize]) -> Result<Information, GaussianError> {
    model.check(&[i, j])?;
    model.check(k)?;
    disjoint(i, j, k)?;
    let with = |extra: &[usize]| -> Vec<usize> { extra.iter().copied().chain(k.iter().copied()).collect() };
    let v = 0.5 * (model.log_det(&with(&[i]))? + model.log_det(&with(&[j]))? - model.log_det(k)? - model.log_det(&with(&[i, j]))?);
    Ok(Information::nats(v.max(0.0)))
}

/// Sample mean and unbiased sample covariance of every column.
pub fn estimate_covariance(ds: &Dataset) -> Result<GaussianModel, GaussianError> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(GaussianError::InsufficientSamples(n));
    }
    let m = ds.n_cols();
    let mut mean = vec![0.0; m];
    for r in 0..n {
        for (acc, x) in mean.iter_mut().zip(ds.row(r)) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= n as f64);
    let mut cov = vec![0.0; m * m];
    for r in 0..n {
        let row = ds.row(r);
        for a in 0..m {
            let da = row[a] - mean[a];
            for b in a..m {
                cov[a * m + b] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..m {
        for b in a..m {
            cov[a * m + b] /= (n - 1) as f64;
            cov[b * m + a] = cov[a * m + b];
        }
    }
    // rank-deficient sample covariances can dip a hair below zero
    Ok(GaussianModel { mean, cov })
}

/// `X = A X + W` with independent zero-mean noises; `A[i][j]` is the weight
/// of `X_j` in the equation of `X_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSem {
    a: Vec<f64>,
    noise_var: Vec<f64>,
    order: Vec<usize>,
}

impl LinearSem {
    pub fn new(a: Vec<Vec<f64>>, noise_var: Vec<f64>) -> Result<Self, GaussianError> {
        let m = noise_var.len();
        if a.len() != m || a.iter().any(|r| r.len() != m) {
            return Err(GaussianError::DimensionMismatch(m));
        }
        if noise_var.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(GaussianError::InvalidModel("noise variances must be positive".into()));
        }
        let a = a.concat();
        if a.iter().any(|x| !x.is_finite()) {
            return Err(GaussianError::InvalidModel("coefficients must be finite".into()));
        }
        if (0..m).any(|k| a[k * m + k] != 0.0) {
            return Err(GaussianError::InvalidModel("diagonal of A must be zero".into()));
        }
        let order = topological_order(&a, m).ok_or(GaussianError::CyclicSupport)?;
        Ok(LinearSem { a, noise_var, order })
    }

    pub fn dim(&self) -> usize {
        self.noise_var.len()
    }

    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.dim() + j]
    }

    pub fn noise_variance(&self, i: usize) -> f64 {
        self.noise_var[i]
    }

    pub fn parents(&self, i: usize) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.coefficient(i, j) != 0.0).collect()
    }

    /// Edges `(j, i)` meaning `X_j → X_i`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let m = self.dim();
        (0..m).flat_map(|i| (0..m).map(move |j| (j, i))).filter(|&(j, i)| self.coefficient(i, j) != 0.0).collect()
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }
}

/// Kahn's algorithm over the support of `a` (edge j → i when `a[i][j] ≠ 0`).
fn topological_order(a: &[f64], m: usize) -> Option<Vec<usize>> {
    let mut indeg: Vec<usize> = (0..m).map(|i| (0..m).filter(|&j| a[i * m + j] != 0.0).count()).collect();
    let mut ready: Vec<usize> = (0..m).filter(|&i| indeg[i] == 0).collect();
    ready.reverse();
    let mut order = Vec::with_capacity(m);
    while let Some(j) = ready.pop() {
        order.push(j);
        for i in 0..m {
            if a[i * m + j] != 0.0 {
                indeg[i] -= 1;
                if indeg[i] == 0 {
                    ready.push(i);
                }
            }
        }
    }
    (order.len() == m).then_some(order)
}

/// `Σ = (I − A)^{-1} D (I − A)^{-T}`, computed row by row in topological order.
pub fn sem_to_covariance(sem: &LinearSem) -> GaussianModel {
    let m = sem.dim();
    // row i of B = (I − A)^{-1}: X_i = Σ_k B[i][k] W_k
    let mut b = vec![0.0; m * m];
    for &i in &sem.order {
        b[i * m + i] = 1.0;
        for j in 0..m {
            let c = sem.a[i * m + j];
            if c != 0.0 {
                for k in 0..m {
                    b[i * m + k] += c * b[j * m + k];
                }
            }
        }
    }
    let mut cov = vec![0.0; m * m];
    for r in 0..m {
        for c in r..m {
            let v: f64 = (0..m).map(|k| b[r * m + k] * sem.noise_var[k] * b[c * m + k]).sum();
            cov[r * m + c] = v;
            cov[c * m + r] = v;
        }
    }
    GaussianModel { mean: vec![0.0; m], cov }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(m: usize) -> GaussianModel {
        let cov = (0..m).map(|r| (0..m).map(|c| if r == c { 1.0 } else { 0.0 }).collect()).collect();
        GaussianModel::new(vec![0.0; m], cov).unwrap()
    }

    #[test]
    fn identity_gives_zero() {
        let g = identity(4);
        assert_eq!(closed_form_coefficient(&g, 0, 1, &[2, 3]).unwrap(), 0.0);
        assert_eq!(gaussian_cmi(&g, 0, 1, &[2]).unwrap().value, 0.0);
    }

    #[test]
    fn two_node_sem() {
        let sem = LinearSem::new(vec![vec![0.0, 0.0], vec![2.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let g = sem_to_covariance(&sem);
        assert_eq!(g.covariance(), vec![vec![1.0, 2.0], vec![2.0, 5.0]]);
        assert!((closed_form_coefficient(&g, 1, 0, &[]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn chain_coefficients() {
        let sem = LinearSem::new(vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], vec![1.0; 3]).unwrap();
        let g = sem_to_covariance(&sem);
        assert!((g.cov(2, 0) - 1.0).abs() < 1e-15);
        assert!(closed_form_coefficient(&g, 2, 0, &[1]).unwrap() < 1e-12);
        assert!((closed_form_coefficient(&g, 2, 0, &[]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cmi_rho() {
        let g = GaussianModel::new(vec![0.0, 0.0], vec![vec![1.0, 0.8], vec![0.8, 1.0]]).unwrap();
        let v = gaussian_cmi(&g, 0, 1, &[]).unwrap();
        assert!((v.value + 0.5 * 0.36f64.ln()).abs() < 1e-12);
        assert_eq!(v.unit, crate::InfoUnit::Nats);
    }

    #[test]
    fn rejects_cycles_and_bad_matrices() {
        assert_eq!(
            LinearSem::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 1.0]),
            Err(GaussianError::CyclicSupport)
        );
        assert!(GaussianModel::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(GaussianModel::new(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        let g = GaussianModel::new(vec![0.0, 0.0], vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(closed_form_coefficient(&g, 0, 1, &[]).unwrap(), 1.0);
        let g3 = GaussianModel::new(vec![0.0; 3], vec![vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(closed_form_coefficient(&g3, 2, 0, &[1]), Err(GaussianError::SingularConditioningBlock));
    }

    #[test]
    fn covariance_estimation_edge_cases() {
        let ds = Dataset::from_rows(vec!["a".into(), "b".into()], &[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let g = estimate_covariance(&ds).unwrap();
        assert_eq!(g.covariance(), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let one = Dataset::from_rows(vec!["a".into()], &[vec![1.0]]).unwrap();
        assert_eq!(estimate_covariance(&one), Err(GaussianError::InsufficientSamples(1)));
    }
}
