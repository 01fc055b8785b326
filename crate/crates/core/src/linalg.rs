//! Small dense symmetric linear algebra: pivoted Cholesky and Jacobi
//! eigenvalues. Matrices are row-major `Vec<f64>`.

/// Pivots below this fraction of the largest diagonal entry count as zero.
pub(crate) const RELATIVE_PIVOT: f64 = 1e-12;

/// `P A Pᵀ = L Lᵀ` with diagonal pivoting.
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
    perm: Vec<usize>,
}

/// Returned when a pivot falls below the relative threshold.
#[derive(Debug)]
pub(crate) struct Singular;

impl Cholesky {
    pub(crate) fn factor(a: &[f64], n: usize) -> Result<Self, Singular> {
        debug_assert_eq!(a.len(), n * n);
        let mut w = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = (0..n).map(|k| a[k * n + k].abs()).fold(0.0f64, f64::max);
        if n == 0 {
            return Ok(Cholesky { n, l: Vec::new(), perm });
        }
        if !(scale > 0.0) {
            return Err(Singular);
        }
        for k in 0..n {
            let (p, pmax) = (k..n).map(|r| (r, w[r * n + r])).fold((k, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(pmax > RELATIVE_PIVOT * scale) {
                return Err(Singular);
            }
            if p != k {
                swap_sym(&mut w, n, k, p);
                perm.swap(k, p);
            }
            let d = w[k * n + k].sqrt();
            w[k * n + k] = d;
            for r in k + 1..n {
                w[r * n + k] /= d;
            }
            for r in k + 1..n {
                let lr = w[r * n + k];
                for c in k + 1..=r {
                    w[r * n + c] -= lr * w[c * n + k];
                }
            }
            // keep the trailing block symmetric for the next pivot search
            for r in k + 1..n {
                for c in r + 1..n {
                    w[r * n + c] = w[c * n + r];
                }
            }
        }
        for r in 0..n {
            for c in r + 1..n {
                w[r * n + c] = 0.0;
            }
        }
        Ok(Cholesky { n, l: w, perm })
    }

    pub(crate) fn log_det(&self) -> f64 {
        (0..self.n).map(|k| 2.0 * self.l[k * self.n + k].ln()).sum()
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut s = y[r];
            for c in 0..r {
                s -= self.l[r * n + c] * y[c];
            }
            y[r] = s / self.l[r * n + r];
        }
        for r in (0..n).rev() {
            let mut s = y[r];
            for c in r + 1..n {
                s -= self.l[c * n + r] * y[c];
            }
            y[r] = s / self.l[r * n + r];
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}

fn swap_sym(w: &mut [f64], n: usize, a: usize, b: usize) {
    for c in 0..n {
        w.swap(a * n + c, b * n + c);
    }
    for r in 0..n {
        w.swap(r * n + a, r * n + b);
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub(crate) fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c))).map(|(r, c)| m[r * n + c].powi(2)).sum();
        let diag: f64 = (0..n).map(|k| m[k * n + k].powi(2)).sum();
        if off <= 1e-30 * diag.max(1e-300) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|k| m[k * n + k]).collect()
}

/// Principal submatrix on `idx` (in that order).
pub(crate) fn submatrix(a: &[f64], n: usize, rows: &[usize], cols: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        for &c in cols {
            out.push(a[r * n + c]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_and_logdet() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let ch = Cholesky::factor(&a, 3).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        for r in 0..3 {
            let ax: f64 = (0..3).map(|c| a[r * 3 + c] * x[c]).sum();
            assert!((ax - [1.0, 2.0, 3.0][r]).abs() < 1e-12);
        }
        // det by cofactors
        let det = 4.0 * (15.0 - 1.0) - 2.0 * (6.0 - 0.6) + 0.6 * (2.0 - 3.0);
        assert!((ch.log_det() - f64::ln(det)).abs() < 1e-12);
    }

    #[test]
    fn cholesky_flags_singular() {
        assert!(Cholesky::factor(&[1.0, 1.0, 1.0, 1.0], 2).is_err());
        assert!(Cholesky::factor(&[0.0], 1).is_err());
    }

    #[test]
    fn jacobi_eigenvalues() {
        let mut ev = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }
}
