//! Small dense kernels for the desk-scale diagnostics: Cholesky solves and a
//! cyclic Jacobi eigensolver for symmetric matrices. Not meant for large
//! systems; the callers cap sizes at a few hundred rows.

use super::{LinalgError, SparseMatrix};

/// Row-major dense matrix.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> DenseMatrix {
        DenseMatrix { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn from_sparse(a: &SparseMatrix) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(a.nrows(), a.ncols());
        for i in 0..a.nrows() {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                d[(i, *c)] = *v;
            }
        }
        d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// Lower-triangular Cholesky factor of an SPD matrix.
pub struct Cholesky {
    n: usize,
    l: Vec<f64>, // row-major lower triangle, full storage
}

impl Cholesky {
    pub fn new(a: &DenseMatrix) -> Result<Cholesky, LinalgError> {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(LinalgError::BadDiagonal { index: i, value: s });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// Forward substitution L y = b.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }

    /// Back substitution L^T x = b.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, ascending.
pub fn symmetric_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    assert_eq!(a.nrows, a.ncols);
    let n = a.nrows;
    let mut m = a.data.clone();
    let at = |m: &[f64], i: usize, j: usize| m[i * n + j];

    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += at(m, i, j) * at(m, i, j);
            }
        }
        s.sqrt()
    };
    let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);

    for _sweep in 0..60 {
        if off(&m) <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = at(&m, p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = at(&m, p, p);
                let aqq = at(&m, q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = at(&m, k, p);
                    let akq = at(&m, k, q);
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = at(&m, p, k);
                    let aqk = at(&m, q, k);
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| at(&m, i, i)).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd() {
        let mut a = DenseMatrix::zeros(3, 3);
        let vals = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 5.0]];
        for i in 0..3 {
            for j in 0..3 {
                a[(i, j)] = vals[i][j];
            }
        }
        let ch = Cholesky::new(&a).unwrap();
        let x = ch.solve(&[1.0, 2.0, 3.0]);
        // check A x = b
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| vals[i][j] * x[j]).sum();
            assert!((s - (i as f64 + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = DenseMatrix::zeros(2, 2);
        a[(0, 0)] = 1.0;
        a[(1, 1)] = -1.0;
        assert!(Cholesky::new(&a).is_err());
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // diag(1, 2, 3) conjugated by a rotation in the (0,2) plane
        let (c, s) = (0.8, 0.6);
        let d = [1.0, 2.0, 3.0];
        let mut a = DenseMatrix::zeros(3, 3);
        // R diag R^T with R = [[c,0,-s],[0,1,0],[s,0,c]]
        let r = [[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]];
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                for (k, dk) in d.iter().enumerate() {
                    v += r[i][k] * dk * r[j][k];
                }
                a[(i, j)] = v;
            }
        }
        let eig = symmetric_eigenvalues(&a);
        for (e, want) in eig.iter().zip(&d) {
            assert!((e - want).abs() < 1e-12);
        }
    }
}
