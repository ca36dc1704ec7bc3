//! Sparse matrices and the two linear solves the active-set algorithms need:
//! a preconditioned conjugate-gradient SPD solve and a Schur-complement
//! saddle-point solve. Everything is deterministic: fixed assembly order,
//! fixed reduction order, no parallel reductions inside solves.

pub mod dense;
pub mod direct;

use std::io::Write;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix diagonal entry {index} is {value}; not usable as an SPD preconditioner")]
    BadDiagonal { index: usize, value: f64 },
    #[error("conjugate gradients did not converge after {iterations} iterations: residual {achieved:.3e}, target {target:.3e}")]
    NoConvergence { iterations: usize, achieved: f64, target: f64 },
    #[error("encountered non-SPD curvature during conjugate gradients")]
    IndefiniteMatrix,
    #[error("active coupling block appears rank deficient ({rows} active rows)")]
    SingularActiveBlock { rows: usize },
    #[error("saddle-point refinement stalled: block residual {achieved:.3e}, target {target:.3e}")]
    SaddleNotConverged { achieved: f64, target: f64 },
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
}

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within each row and entries that
/// sum to exactly zero are dropped when the builder finalizes.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    /// Stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(c, v)| (i, *c, *v))
        })
    }

    pub fn identity(n: usize) -> SparseMatrix {
        let mut b = CooBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 1.0);
        }
        b.build()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                s += v * x[*c];
            }
            y[i] = s;
        }
        y
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * x[i];
            }
        }
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows.min(self.ncols)];
        for i in 0..d.len() {
            let (cols, vals) = self.row(i);
            if let Ok(p) = cols.binary_search(&i) {
                d[i] = vals[p];
            }
        }
        d
    }

    /// Keep only the listed rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut b = CooBuilder::new(rows.len(), self.ncols);
        for (new_i, &i) in rows.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                b.push(new_i, *c, *v);
            }
        }
        b.build()
    }

    /// MatrixMarket coordinate output, for debugging.
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                writeln!(w, "{} {} {:.16e}", i + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Triplet accumulator. Duplicate entries are summed in insertion order
/// (stable sort), so identical inputs produce bit-identical matrices.
#[derive(Clone, Debug)]
pub struct CooBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooBuilder {
    pub fn new(nrows: usize, ncols: usize) -> CooBuilder {
        CooBuilder { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> CooBuilder {
        CooBuilder { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn extend(&mut self, other: CooBuilder) {
        debug_assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.entries.extend(other.entries);
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut it = self.entries.into_iter().peekable();
        while let Some((r, c, v)) = it.next() {
            let mut acc = v;
            while let Some(&(r2, c2, v2)) = it.peek() {
                if r2 == r && c2 == c {
                    acc += v2;
                    it.next();
                } else {
                    break;
                }
            }
            if acc != 0.0 {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(acc);
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Iteration statistics of a conjugate-gradient run.
#[derive(Clone, Copy, Debug, Default)]
pub struct CgStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients with an iteration cap of 10n.
/// Returns x with ||Ax - b||_2 <= rel_tol * ||b||_2.
pub fn spd_solve_stats(
    a: &SparseMatrix,
    b: &[f64],
    rel_tol: f64,
) -> Result<(Vec<f64>, CgStats), LinalgError> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "spd_solve: {}x{} matrix, rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let b_norm = norm2(b);
    if !b_norm.is_finite() {
        return Err(LinalgError::NonFinite("spd_solve rhs"));
    }
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], CgStats::default()));
    }

    let diag = a.diagonal();
    let mut inv_diag = vec![0.0; n];
    for (i, &d) in diag.iter().enumerate() {
        if !(d > 0.0) {
            return Err(LinalgError::BadDiagonal { index: i, value: d });
        }
        inv_diag[i] = 1.0 / d;
    }

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let cap = 10 * n;
    let target = rel_tol * b_norm;
    let mut r_norm = b_norm;

    for iter in 0..cap {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            if pap.is_finite() && pap <= 0.0 {
                return Err(LinalgError::IndefiniteMatrix);
            }
            return Err(LinalgError::NonFinite("spd_solve curvature"));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        r_norm = norm2(&r);
        if r_norm <= target {
            return Ok((x, CgStats { iterations: iter + 1, rel_residual: r_norm / b_norm }));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::NoConvergence { iterations: cap, achieved: r_norm / b_norm, target: rel_tol })
}

/// SPD solve without iteration statistics.
pub fn spd_solve(a: &SparseMatrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>, LinalgError> {
    spd_solve_stats(a, b, rel_tol).map(|(x, _)| x)
}

/// MINRES with a positive diagonal preconditioner, for symmetric but
/// possibly indefinite systems (the residual-stabilized matrix loses
/// definiteness once the stabilization parameter exceeds the inverse
/// estimate constant of the space).
pub fn minres_solve_stats(
    a: &SparseMatrix,
    b: &[f64],
    rel_tol: f64,
) -> Result<(Vec<f64>, CgStats), LinalgError> {
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if d.abs() > 1e-300 { 1.0 / d.abs() } else { 1.0 })
        .collect();
    let mut precond = |v: &[f64]| -> Result<Vec<f64>, LinalgError> {
        Ok(v.iter().zip(&inv_diag).map(|(x, m)| x * m).collect())
    };
    minres_solve_pc(a, b, rel_tol, 15 * a.nrows(), &mut precond)
}

/// Application of a symmetric positive definite preconditioner.
pub type Preconditioner<'a> = dyn FnMut(&[f64]) -> Result<Vec<f64>, LinalgError> + 'a;

/// Preconditioned MINRES. The preconditioner callback must apply a fixed
/// symmetric positive definite operator.
pub fn minres_solve_pc(
    a: &SparseMatrix,
    b: &[f64],
    rel_tol: f64,
    cap: usize,
    precond: &mut Preconditioner<'_>,
) -> Result<(Vec<f64>, CgStats), LinalgError> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "minres: {}x{} matrix, rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], CgStats::default()));
    }

    let mut x = vec![0.0; n];
    let mut v_prev = vec![0.0; n];
    let mut v = b.to_vec();
    let mut z = precond(&v)?;
    let mut gamma = dot(&z, &v).max(0.0).sqrt();
    if gamma == 0.0 {
        return Ok((x, CgStats::default()));
    }
    let gamma0 = gamma;
    let mut gamma_prev = 1.0;
    let (mut c_old, mut c) = (1.0f64, 1.0f64);
    let (mut s_old, mut s) = (0.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w_prev = vec![0.0; n];
    let mut eta = gamma;

    for iter in 0..cap {
        for zi in z.iter_mut() {
            *zi /= gamma;
        }
        let az = a.matvec(&z);
        let delta = dot(&az, &z);
        let mut v_next = vec![0.0; n];
        for i in 0..n {
            v_next[i] = az[i] - (delta / gamma) * v[i] - (gamma / gamma_prev) * v_prev[i];
        }
        let z_next = precond(&v_next)?;
        let gamma_next = dot(&z_next, &v_next).max(0.0).sqrt();

        let alpha0 = c * delta - c_old * s * gamma;
        let alpha1 = (alpha0 * alpha0 + gamma_next * gamma_next).sqrt();
        let alpha2 = s * delta + c_old * c * gamma;
        let alpha3 = s_old * gamma;
        c_old = c;
        s_old = s;
        c = alpha0 / alpha1;
        s = gamma_next / alpha1;

        let mut w_next = vec![0.0; n];
        for i in 0..n {
            w_next[i] = (z[i] - alpha3 * w_prev[i] - alpha2 * w[i]) / alpha1;
        }
        for i in 0..n {
            x[i] += c * eta * w_next[i];
        }
        eta *= -s;

        w_prev = w;
        w = w_next;
        v_prev = v;
        v = v_next;
        z = z_next;
        gamma_prev = gamma;
        gamma = gamma_next;

        if eta.abs() <= rel_tol * gamma0 * 0.5 || gamma == 0.0 {
            // confirm with the true residual
            let r: Vec<f64> = a.matvec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
            let rn = norm2(&r);
            if rn <= rel_tol * b_norm {
                return Ok((x, CgStats { iterations: iter + 1, rel_residual: rn / b_norm }));
            }
            if gamma == 0.0 {
                break;
            }
        }
    }
    let r: Vec<f64> = a.matvec(&x).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
    let achieved = norm2(&r) / b_norm;
    if achieved <= rel_tol {
        return Ok((x, CgStats { iterations: cap, rel_residual: achieved }));
    }
    Err(LinalgError::NoConvergence { iterations: cap, achieved, target: rel_tol })
}

/// Symmetric solve: conjugate gradients when the matrix is positive
/// definite, MINRES otherwise.
pub fn sym_solve_stats(
    a: &SparseMatrix,
    b: &[f64],
    rel_tol: f64,
) -> Result<(Vec<f64>, CgStats), LinalgError> {
    if a.diagonal().iter().any(|&d| d <= 0.0) {
        return minres_solve_stats(a, b, rel_tol);
    }
    match spd_solve_stats(a, b, rel_tol) {
        Ok(out) => Ok(out),
        Err(LinalgError::IndefiniteMatrix) | Err(LinalgError::NoConvergence { .. }) => {
            minres_solve_stats(a, b, rel_tol)
        }
        Err(e) => Err(e),
    }
}

/// Outcome of a saddle-point solve, including aggregate CG work.
#[derive(Clone, Debug)]
pub struct SaddleOutcome {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub cg_iterations: usize,
    pub block_residual: f64,
}

/// Solve the saddle system
/// `[[A, -B^T], [-B, 0]] (u, lambda) = (f, -g)`
/// by Schur-complement reduction: conjugate gradients on `B A^{-1} B^T`
/// with inner SPD solves, followed by block-residual refinement.
pub fn saddle_solve_stats(
    a: &SparseMatrix,
    b_act: &SparseMatrix,
    f: &[f64],
    g_act: &[f64],
    rel_tol: f64,
) -> Result<SaddleOutcome, LinalgError> {
    let n = a.nrows();
    let m = b_act.nrows();
    if b_act.ncols() != n || f.len() != n || g_act.len() != m {
        return Err(LinalgError::DimensionMismatch(format!(
            "saddle_solve: A {}x{}, B {}x{}, f {}, g {}",
            a.nrows(),
            a.ncols(),
            b_act.nrows(),
            b_act.ncols(),
            f.len(),
            g_act.len()
        )));
    }

    let mut total_cg = 0usize;
    // Per-pass solve accuracy; the refinement loop below measures the true
    // block residual and iterates, so this does not bound the final accuracy.
    let inner_tol = 1e-12f64;
    let schur_tol = 1e-10f64;

    if m == 0 {
        let (u, st) = spd_solve_stats(a, f, rel_tol)?;
        let r1: Vec<f64> =
            a.matvec(&u).iter().zip(f).map(|(au, fi)| fi - au).collect();
        return Ok(SaddleOutcome {
            u,
            lambda: Vec::new(),
            cg_iterations: st.iterations,
            block_residual: norm2(&r1),
        });
    }

    let rhs_norm = (dot(f, f) + dot(g_act, g_act)).sqrt();
    if rhs_norm == 0.0 {
        return Ok(SaddleOutcome {
            u: vec![0.0; n],
            lambda: vec![0.0; m],
            cg_iterations: 0,
            block_residual: 0.0,
        });
    }

    let mut u = vec![0.0; n];
    let mut lambda = vec![0.0; m];

    // Schur operator: lambda -> B A^{-1} B^T lambda
    let apply_schur = |l: &[f64], cg: &mut usize| -> Result<Vec<f64>, LinalgError> {
        let bt_l = b_act.matvec_transpose(l);
        let (y, st) = spd_solve_stats(a, &bt_l, inner_tol)?;
        *cg += st.iterations;
        Ok(b_act.matvec(&y))
    };

    // One Schur pass solving the residual system
    //   A du - B^T dl = r1,  B du = r2.
    let schur_pass = |r1: &[f64],
                      r2: &[f64],
                      total_cg: &mut usize|
     -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
        let (y, st) = spd_solve_stats(a, r1, inner_tol)?;
        *total_cg += st.iterations;
        // (B A^{-1} B^T) dl = r2 - B A^{-1} r1
        let rhs: Vec<f64> =
            b_act.matvec(&y).iter().zip(r2).map(|(by, r)| r - by).collect();
        let rhs_n = norm2(&rhs);
        let mut dl = vec![0.0; m];
        if rhs_n > 0.0 {
            let mut r = rhs.clone();
            let mut p = r.clone();
            let mut rr = dot(&r, &r);
            let cap = 10 * m.max(2);
            let mut converged = false;
            for _ in 0..cap {
                let sp = apply_schur(&p, total_cg)?;
                let psp = dot(&p, &sp);
                if !(psp > 1e-300) {
                    return Err(LinalgError::SingularActiveBlock { rows: m });
                }
                let alpha = rr / psp;
                for i in 0..m {
                    dl[i] += alpha * p[i];
                    r[i] -= alpha * sp[i];
                }
                let rr_new = dot(&r, &r);
                if rr_new.sqrt() <= schur_tol * rhs_n {
                    converged = true;
                    break;
                }
                let beta = rr_new / rr;
                rr = rr_new;
                for i in 0..m {
                    p[i] = r[i] + beta * p[i];
                }
            }
            if !converged {
                return Err(LinalgError::SingularActiveBlock { rows: m });
            }
        }
        // du = A^{-1} (r1 + B^T dl)
        let bt_dl = b_act.matvec_transpose(&dl);
        let rhs_u: Vec<f64> = r1.iter().zip(&bt_dl).map(|(a, b)| a + b).collect();
        let (du, st) = spd_solve_stats(a, &rhs_u, inner_tol)?;
        *total_cg += st.iterations;
        Ok((du, dl))
    };

    let block_residual = |u: &[f64], lambda: &[f64]| -> (Vec<f64>, Vec<f64>, f64) {
        let au = a.matvec(u);
        let btl = b_act.matvec_transpose(lambda);
        let r1: Vec<f64> = (0..n).map(|i| f[i] - (au[i] - btl[i])).collect();
        let bu = b_act.matvec(u);
        // second block row: -B u = -g  =>  residual r2 = g - B u
        let r2: Vec<f64> = (0..m).map(|i| g_act[i] - bu[i]).collect();
        let norm = (dot(&r1, &r1) + dot(&r2, &r2)).sqrt();
        (r1, r2, norm)
    };

    let target = rel_tol * rhs_norm;
    for _ in 0..4 {
        let (r1, r2, norm) = block_residual(&u, &lambda);
        if norm <= target {
            break;
        }
        let (du, dl) = schur_pass(&r1, &r2, &mut total_cg)?;
        for i in 0..n {
            u[i] += du[i];
        }
        for i in 0..m {
            lambda[i] += dl[i];
        }
    }
    let (_, _, final_res) = block_residual(&u, &lambda);
    if final_res > target {
        return Err(LinalgError::SaddleNotConverged { achieved: final_res, target });
    }
    if u.iter().chain(lambda.iter()).any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite("saddle_solve solution"));
    }
    Ok(SaddleOutcome { u, lambda, cg_iterations: total_cg, block_residual: final_res })
}

/// Saddle solve returning only the solution pair.
pub fn saddle_solve(
    a: &SparseMatrix,
    b_act: &SparseMatrix,
    f: &[f64],
    g_act: &[f64],
    rel_tol: f64,
) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    saddle_solve_stats(a, b_act, f, g_act, rel_tol).map(|o| (o.u, o.lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct XorShift(u64);
    impl XorShift {
        fn next(&mut self) -> f64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| dot(row, x)).collect()
    }

    /// plain Gaussian elimination with partial pivoting, test-side oracle
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().map(|r| {
            let mut row = r.clone();
            row.push(0.0);
            row
        }).collect();
        for i in 0..n {
            m[i][n] = b[i];
        }
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
            m.swap(col, piv);
            assert!(m[col][col].abs() > 1e-14, "singular oracle system");
            for row in (col + 1)..n {
                let fac = m[row][col] / m[col][col];
                for k in col..=n {
                    m[row][k] -= fac * m[col][k];
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
        x
    }

    fn to_dense(a: &SparseMatrix) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; a.ncols()]; a.nrows()];
        for i in 0..a.nrows() {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                d[i][*c] = *v;
            }
        }
        d
    }

    #[test]
    fn builder_sums_and_sorts() {
        let mut b = CooBuilder::new(2, 3);
        b.push(1, 2, 1.0);
        b.push(0, 0, 2.0);
        b.push(1, 2, 3.0);
        b.push(0, 1, -2.0);
        b.push(0, 1, 2.0); // cancels to exact zero, dropped
        let m = b.build();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.row(0), (&[0usize][..], &[2.0][..]));
        assert_eq!(m.row(1), (&[2usize][..], &[4.0][..]));
    }

    #[test]
    fn matvec_matches_dense_oracle() {
        let mut rng = XorShift(42);
        for trial in 0..5 {
            let n = 20 + 16 * trial;
            let mut b = CooBuilder::new(n, n);
            for _ in 0..(6 * n) {
                let i = (rng.next() * n as f64) as usize % n;
                let j = (rng.next() * n as f64) as usize % n;
                b.push(i, j, rng.next() - 0.5);
            }
            let a = b.build();
            let d = to_dense(&a);
            let x: Vec<f64> = (0..n).map(|_| rng.next() - 0.5).collect();
            let y1 = a.matvec(&x);
            let y2 = dense_matvec(&d, &x);
            for i in 0..n {
                let scale = y2[i].abs().max(1.0);
                assert!((y1[i] - y2[i]).abs() <= 1e-13 * scale);
            }
            // transpose product against the transposed dense oracle
            let yt1 = a.matvec_transpose(&x);
            let mut yt2 = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    yt2[j] += d[i][j] * x[i];
                }
            }
            for i in 0..n {
                assert!((yt1[i] - yt2[i]).abs() <= 1e-13 * yt2[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn cg_identity_returns_rhs() {
        let a = SparseMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 4.0];
        let x = spd_solve(&a, &b, 1e-12).unwrap();
        for i in 0..5 {
            assert!((x[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_hand_2x2() {
        let mut b = CooBuilder::new(2, 2);
        b.push(0, 0, 2.0);
        b.push(0, 1, 1.0);
        b.push(1, 0, 1.0);
        b.push(1, 1, 2.0);
        let a = b.build();
        let x = spd_solve(&a, &[3.0, 3.0], 1e-14).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cg_zero_rhs() {
        let a = SparseMatrix::identity(4);
        let x = spd_solve(&a, &[0.0; 4], 1e-12).unwrap();
        assert_eq!(x, vec![0.0; 4]);
    }

    #[test]
    fn cg_matches_dense_oracle_on_random_spd() {
        let mut rng = XorShift(7);
        for trial in 0..4 {
            let n = 10 + 10 * trial;
            // SPD: M^T M + n I
            let mut m = vec![vec![0.0; n]; n];
            for row in m.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.next() - 0.5;
                }
            }
            let mut b = CooBuilder::new(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for (k, row) in m.iter().enumerate() {
                        s += row[i] * row[j];
                        let _ = k;
                    }
                    if i == j {
                        s += n as f64;
                    }
                    b.push(i, j, s);
                }
            }
            let a = b.build();
            let rhs: Vec<f64> = (0..n).map(|_| rng.next() - 0.5).collect();
            let x = spd_solve(&a, &rhs, 1e-12).unwrap();
            let oracle = dense_solve(&to_dense(&a), &rhs);
            for i in 0..n {
                assert!((x[i] - oracle[i]).abs() < 1e-9 * oracle[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn cg_reports_nonconvergence_on_indefinite() {
        let mut b = CooBuilder::new(2, 2);
        b.push(0, 0, 1.0);
        b.push(1, 1, -1.0);
        let a = b.build();
        assert!(spd_solve(&a, &[1.0, 1.0], 1e-12).is_err());
    }

    #[test]
    fn saddle_empty_active_reduces_to_spd() {
        let a = SparseMatrix::identity(3);
        let empty = CooBuilder::new(0, 3).build();
        let (u, l) = saddle_solve(&a, &empty, &[1.0, 2.0, 3.0], &[], 1e-12).unwrap();
        assert!(l.is_empty());
        assert!((u[0] - 1.0).abs() < 1e-12);
        assert!((u[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_hand_3x3_kkt() {
        // A = I2, B = [1 0], f = 0, g = 1:
        // u1 - lambda = 0, u2 = 0, B u = g  =>  u = (1, 0), lambda = 1
        let a = SparseMatrix::identity(2);
        let mut bb = CooBuilder::new(1, 2);
        bb.push(0, 0, 1.0);
        let b = bb.build();
        let (u, l) = saddle_solve(&a, &b, &[0.0, 0.0], &[1.0], 1e-12).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-10, "u = {u:?}");
        assert!(u[1].abs() < 1e-10);
        assert!((l[0] - 1.0).abs() < 1e-10, "lambda = {l:?}");
    }

    #[test]
    fn saddle_scales_linearly() {
        let mut ab = CooBuilder::new(3, 3);
        for i in 0..3 {
            ab.push(i, i, 2.0 + i as f64);
        }
        ab.push(0, 1, 0.5);
        ab.push(1, 0, 0.5);
        let a = ab.build();
        let mut bb = CooBuilder::new(1, 3);
        bb.push(0, 0, 1.0);
        bb.push(0, 2, 1.0);
        let b = bb.build();
        let f = [1.0, -1.0, 0.5];
        let g = [0.7];
        let (u1, l1) = saddle_solve(&a, &b, &f, &g, 1e-13).unwrap();
        let f10: Vec<f64> = f.iter().map(|v| 10.0 * v).collect();
        let g10: Vec<f64> = g.iter().map(|v| 10.0 * v).collect();
        let (u2, l2) = saddle_solve(&a, &b, &f10, &g10, 1e-13).unwrap();
        for i in 0..3 {
            assert!((u2[i] - 10.0 * u1[i]).abs() < 1e-8 * u1[i].abs().max(1.0));
        }
        assert!((l2[0] - 10.0 * l1[0]).abs() < 1e-8 * l1[0].abs().max(1.0));
    }

    #[test]
    fn saddle_matches_dense_oracle() {
        let mut rng = XorShift(99);
        for trial in 0..3 {
            let n = 8 + 6 * trial;
            let m = 3 + trial;
            let mut mm = vec![vec![0.0; n]; n];
            for row in mm.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.next() - 0.5;
                }
            }
            let mut ab = CooBuilder::new(n, n);
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for row in &mm {
                        s += row[i] * row[j];
                    }
                    if i == j {
                        s += n as f64;
                    }
                    ab.push(i, j, s);
                }
            }
            let a = ab.build();
            let mut bb = CooBuilder::new(m, n);
            for i in 0..m {
                for j in 0..n {
                    bb.push(i, j, rng.next() - 0.5);
                }
            }
            let b = bb.build();
            let f: Vec<f64> = (0..n).map(|_| rng.next() - 0.5).collect();
            let g: Vec<f64> = (0..m).map(|_| rng.next() - 0.5).collect();
            let (u, l) = saddle_solve(&a, &b, &f, &g, 1e-12).unwrap();

            // dense KKT oracle
            let ad = to_dense(&a);
            let bd = to_dense(&b);
            let size = n + m;
            let mut kkt = vec![vec![0.0; size]; size];
            let mut rhs = vec![0.0; size];
            for i in 0..n {
                for j in 0..n {
                    kkt[i][j] = ad[i][j];
                }
                for j in 0..m {
                    kkt[i][n + j] = -bd[j][i];
                    kkt[n + j][i] = -bd[j][i];
                }
                rhs[i] = f[i];
            }
            for j in 0..m {
                rhs[n + j] = -g[j];
            }
            let sol = dense_solve(&kkt, &rhs);
            for i in 0..n {
                assert!((u[i] - sol[i]).abs() < 1e-8 * sol[i].abs().max(1.0));
            }
            for j in 0..m {
                assert!((l[j] - sol[n + j]).abs() < 1e-8 * sol[n + j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn saddle_detects_rank_deficiency() {
        let a = SparseMatrix::identity(3);
        let mut bb = CooBuilder::new(2, 3);
        bb.push(0, 0, 1.0);
        bb.push(1, 0, 1.0); // duplicate row: rank deficient
        let b = bb.build();
        let err = saddle_solve(&a, &b, &[0.0; 3], &[1.0, 2.0], 1e-12).unwrap_err();
        match err {
            LinalgError::SingularActiveBlock { rows } => assert_eq!(rows, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn minres_solves_symmetric_indefinite() {
        let mut rng = XorShift(5);
        for trial in 0..3 {
            let n = 12 + 8 * trial;
            // symmetric indefinite: Q diag(+-) Q^T built from a random symmetric matrix
            let mut b = CooBuilder::new(n, n);
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.next() - 0.5;
                    dense[i][j] = v;
                    dense[j][i] = v;
                }
                dense[i][i] += if i % 2 == 0 { 3.0 } else { -3.0 };
            }
            for i in 0..n {
                for j in 0..n {
                    if dense[i][j] != 0.0 {
                        b.push(i, j, dense[i][j]);
                    }
                }
            }
            let a = b.build();
            let rhs: Vec<f64> = (0..n).map(|_| rng.next() - 0.5).collect();
            let (x, _) = minres_solve_stats(&a, &rhs, 1e-11).unwrap();
            let oracle = dense_solve(&dense, &rhs);
            for i in 0..n {
                assert!(
                    (x[i] - oracle[i]).abs() < 1e-7 * oracle[i].abs().max(1.0),
                    "n={n} i={i}: {} vs {}",
                    x[i],
                    oracle[i]
                );
            }
        }
    }

    #[test]
    fn sym_solve_falls_back_for_negative_diagonal() {
        let mut b = CooBuilder::new(2, 2);
        b.push(0, 0, 1.0);
        b.push(1, 1, -2.0);
        let a = b.build();
        let (x, _) = sym_solve_stats(&a, &[3.0, 4.0], 1e-12).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-10);
        assert!((x[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn matrix_market_output() {
        let mut b = CooBuilder::new(2, 2);
        b.push(0, 0, 1.5);
        b.push(1, 0, -2.0);
        let m = b.build();
        let mut out = Vec::new();
        m.write_matrix_market(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("%%MatrixMarket"));
        assert!(text.contains("2 2 2"));
        assert!(text.contains("2 1 -2.0000000000000000e0"));
    }
}
