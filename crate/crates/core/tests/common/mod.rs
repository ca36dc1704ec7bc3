//! Shared helpers for the integration suites: a dense Gaussian-elimination
//! solver and the exhaustive active-set enumeration oracles. Everything here
//! is independent of the library's linear-solver path.

use obstacle_fem::assembly::{MixedSystem, StabilizedSystem};
use obstacle_fem::linalg::SparseMatrix;

pub fn to_dense(a: &SparseMatrix) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; a.ncols()]; a.nrows()];
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (c, v) in cols.iter().zip(vals) {
            d[i][*c] = *v;
        }
    }
    d
}

/// Plain Gaussian elimination with partial pivoting; returns None for a
/// numerically singular system.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(*bi);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for row in (col + 1)..n {
            let fac = m[row][col] / m[col][col];
            if fac != 0.0 {
                for k in col..=n {
                    m[row][k] -= fac * m[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = m[row][n];
        for k in (row + 1)..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

pub struct OracleSolution {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub active: Vec<usize>,
}

const FEAS_TOL: f64 = 1e-9;

/// Enumerate all 2^M active sets of the mixed complementarity system and
/// return the KKT-feasible solution, asserting it is unique up to
/// representation of degenerate zeros.
pub fn enumerate_mixed(sys: &MixedSystem) -> OracleSolution {
    let n = sys.a.nrows();
    let m = sys.b.nrows();
    assert!(m <= 16, "enumeration explodes beyond a few multiplier dofs");
    let a = to_dense(&sys.a);
    let b = to_dense(&sys.b);
    let mut found: Option<OracleSolution> = None;

    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let na = active.len();
        // KKT system: A u - B_a^T lambda_a = f, B_a u = g_a
        let size = n + na;
        let mut kkt = vec![vec![0.0; size]; size];
        let mut rhs = vec![0.0; size];
        for i in 0..n {
            for j in 0..n {
                kkt[i][j] = a[i][j];
            }
            rhs[i] = sys.f[i];
        }
        for (p, &k) in active.iter().enumerate() {
            for j in 0..n {
                kkt[j][n + p] = -b[k][j];
                kkt[n + p][j] = b[k][j];
            }
            rhs[n + p] = sys.g[k];
        }
        let Some(sol) = dense_solve(&kkt, &rhs) else { continue };
        let u = sol[..n].to_vec();
        let mut lambda = vec![0.0; m];
        for (p, &k) in active.iter().enumerate() {
            lambda[k] = sol[n + p];
        }
        // feasibility: lambda >= 0 and B u >= g on the inactive rows
        if lambda.iter().any(|&l| l < -FEAS_TOL) {
            continue;
        }
        let mut feasible = true;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            let bu: f64 = b[i].iter().zip(&u).map(|(x, y)| x * y).sum();
            if bu - sys.g[i] < -FEAS_TOL {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }
        let strict: Vec<usize> = (0..m).filter(|&i| lambda[i] > FEAS_TOL).collect();
        match &found {
            None => found = Some(OracleSolution { u, lambda, active: strict }),
            Some(prev) => {
                // degenerate representations must agree on the solution
                for (x, y) in prev.u.iter().zip(&u) {
                    assert!(
                        (x - y).abs() < 1e-7 * x.abs().max(1.0),
                        "oracle found two distinct feasible solutions"
                    );
                }
            }
        }
    }
    found.expect("no KKT-feasible active set exists")
}

/// Enumeration oracle for the stabilized complementarity system.
pub fn enumerate_stabilized(sys: &StabilizedSystem) -> OracleSolution {
    let n = sys.a_alpha.nrows();
    let m = sys.c_alpha.len();
    assert!(m <= 16);
    let a = to_dense(&sys.a_alpha);
    let b = to_dense(&sys.b_alpha);
    let mut found: Option<OracleSolution> = None;

    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let na = active.len();
        // A u - B_a^T lambda_a = f, (B u + C lambda - g)_a = 0
        let size = n + na;
        let mut kkt = vec![vec![0.0; size]; size];
        let mut rhs = vec![0.0; size];
        for i in 0..n {
            for j in 0..n {
                kkt[i][j] = a[i][j];
            }
            rhs[i] = sys.f_alpha[i];
        }
        for (p, &k) in active.iter().enumerate() {
            for j in 0..n {
                kkt[j][n + p] = -b[k][j];
                kkt[n + p][j] = b[k][j];
            }
            kkt[n + p][n + p] = sys.c_alpha[k];
            rhs[n + p] = sys.g_alpha[k];
        }
        let Some(sol) = dense_solve(&kkt, &rhs) else { continue };
        let u = sol[..n].to_vec();
        let mut lambda = vec![0.0; m];
        for (p, &k) in active.iter().enumerate() {
            lambda[k] = sol[n + p];
        }
        if lambda.iter().any(|&l| l < -FEAS_TOL) {
            continue;
        }
        let mut feasible = true;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            let bu: f64 = b[i].iter().zip(&u).map(|(x, y)| x * y).sum();
            if bu - sys.g_alpha[i] < -FEAS_TOL {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }
        let strict: Vec<usize> = (0..m).filter(|&i| lambda[i] > FEAS_TOL).collect();
        match &found {
            None => found = Some(OracleSolution { u, lambda, active: strict }),
            Some(prev) => {
                for (x, y) in prev.u.iter().zip(&u) {
                    assert!(
                        (x - y).abs() < 1e-7 * x.abs().max(1.0),
                        "oracle found two distinct feasible solutions"
                    );
                }
            }
        }
    }
    found.expect("no KKT-feasible active set exists")
}
