//! Primal-dual active set iterations for the mixed and stabilized systems,
//! the elementwise Nitsche/penalty fixed point, and KKT verification.

use crate::assembly::{MixedSystem, ProblemData, StabilizedSystem};
use crate::fespace::{eval_basis, quadrature_rule, DofMap, ElementGeometry, SpaceSpec};
use crate::linalg::direct::ldlt_solve;
use crate::linalg::{
    minres_solve_pc, saddle_solve_stats, spd_solve_stats, CooBuilder, LinalgError,
    SparseMatrix,
};
use crate::mesh::Mesh;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum SolverError {
    #[error("singular active block at iteration {iteration}: {source}")]
    SingularActiveBlock { iteration: usize, source: LinalgError },
    #[error("linear solver failed at iteration {iteration}: {source}")]
    LinearSolve { iteration: usize, source: LinalgError },
}

/// Parameters of the active-set and Nitsche iterations.
#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Complementarity scaling of the mixed active-set predictor; any
    /// positive value yields the same fixed point.
    pub c: f64,
    /// Stopping tolerance on the multiplier update.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative tolerance of the inner linear solves.
    pub lin_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { c: 1.0, tol: 1e-10, max_iter: 200, lin_tol: 1e-12 }
    }
}

/// Per-run report: one multiplier-update norm per iteration.
#[derive(Clone, Debug, Default)]
pub struct SolverReport {
    pub iterations: usize,
    pub lambda_update_norms: Vec<f64>,
    pub converged: bool,
    pub oscillating: bool,
    pub cg_iterations: usize,
    pub cg_solves: usize,
}

/// Converged (or best-effort) solution: displacement coefficients on the
/// free dofs, one multiplier per element, and the final active set.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub active_set: Vec<usize>,
    pub report: SolverReport,
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Active-set iteration for the mixed complementarity system: start from the
/// unconstrained solve, then alternate the sign split of
/// `s = lambda + c (g - B u)` with equality-constrained saddle solves on the
/// active rows.
pub fn pdas_mixed(
    sys: &MixedSystem,
    opts: &SolverOptions,
) -> Result<DiscreteSolution, SolverError> {
    assert!(opts.c > 0.0, "the active-set scaling c must be positive");
    let m = sys.b.nrows();
    let mut report = SolverReport::default();

    let (mut u, st) = spd_solve_stats(&sys.a, &sys.f, opts.lin_tol)
        .map_err(|source| SolverError::LinearSolve { iteration: 0, source })?;
    report.cg_iterations += st.iterations;
    report.cg_solves += 1;

    let mut lambda = vec![0.0; m];
    let mut active: Vec<usize> = Vec::new();

    for k in 0..opts.max_iter {
        let bu = sys.b.matvec(&u);
        active = (0..m)
            .filter(|&i| lambda[i] + opts.c * (sys.g[i] - bu[i]) > 0.0)
            .collect();

        let b_act = sys.b.select_rows(&active);
        let g_act: Vec<f64> = active.iter().map(|&i| sys.g[i]).collect();
        let outcome = saddle_solve_stats(&sys.a, &b_act, &sys.f, &g_act, opts.lin_tol)
            .map_err(|source| match source {
                LinalgError::SingularActiveBlock { .. } => {
                    SolverError::SingularActiveBlock { iteration: k, source }
                }
                other => SolverError::LinearSolve { iteration: k, source: other },
            })?;
        report.cg_iterations += outcome.cg_iterations;
        report.cg_solves += 1;

        let mut lambda_next = vec![0.0; m];
        for (pos, &i) in active.iter().enumerate() {
            lambda_next[i] = outcome.lambda[pos];
        }
        u = outcome.u;

        let update = inf_norm_diff(&lambda_next, &lambda);
        report.lambda_update_norms.push(update);
        lambda = lambda_next;
        report.iterations = k + 1;
        if update <= opts.tol {
            report.converged = true;
            break;
        }
    }

    let active_set: Vec<usize> = active.into_iter().filter(|&i| lambda[i] > 0.0).collect();
    Ok(DiscreteSolution { u, lambda, active_set, report })
}

/// Symmetric solve with a definite-first policy: conjugate gradients when
/// the matrix behaves definite, otherwise MINRES preconditioned with the
/// given SPD matrix (applied by an inner conjugate-gradient solve).
fn solve_sym_with_spd(
    mat: &SparseMatrix,
    spd: &SparseMatrix,
    rhs: &[f64],
    rel_tol: f64,
    report: &mut SolverReport,
) -> Result<Vec<f64>, LinalgError> {
    report.cg_solves += 1;
    if mat.diagonal().iter().all(|&d| d > 0.0) {
        match spd_solve_stats(mat, rhs, rel_tol) {
            Ok((x, st)) => {
                report.cg_iterations += st.iterations;
                return Ok(x);
            }
            Err(LinalgError::IndefiniteMatrix) | Err(LinalgError::NoConvergence { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    // indefinite path: direct profile factorization
    match ldlt_solve(mat, rhs, rel_tol) {
        Ok(x) => return Ok(x),
        Err(LinalgError::BadDiagonal { .. }) | Err(LinalgError::NoConvergence { .. }) => {}
        Err(e) => return Err(e),
    }
    // MINRES preconditioned by the SPD part, wrapped in residual
    // refinement: each pass solves to a comfortably attainable tolerance
    // and the loop drives the true residual below the requested one.
    let n = mat.nrows();
    let b_norm = crate::linalg::norm2(rhs);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut inner = 0usize;
    let mut x = vec![0.0; n];
    let pass_tol = rel_tol.max(1e-9);
    for _pass in 0..4 {
        let ax = mat.matvec(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let achieved = crate::linalg::norm2(&r);
        if achieved <= rel_tol * b_norm {
            report.cg_iterations += inner;
            return Ok(x);
        }
        let mut pc = |v: &[f64]| -> Result<Vec<f64>, LinalgError> {
            let (y, st) = spd_solve_stats(spd, v, 1e-10)?;
            inner += st.iterations;
            Ok(y)
        };
        let outcome = minres_solve_pc(mat, &r, pass_tol, 600, &mut pc);
        let (dx, _) = match outcome {
            Ok(v) => v,
            Err(e) => {
                report.cg_iterations += inner;
                return Err(e);
            }
        };
        for i in 0..n {
            x[i] += dx[i];
        }
    }
    report.cg_iterations += inner;
    let ax = mat.matvec(&x);
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let achieved = crate::linalg::norm2(&r);
    if achieved <= rel_tol * b_norm {
        Ok(x)
    } else {
        Err(LinalgError::NoConvergence {
            iterations: inner,
            achieved: achieved / b_norm,
            target: rel_tol,
        })
    }
}

/// Eliminate the active multiplier block of the stabilized system: returns
/// the matrix `A + B(a,:)^T C(a,a)^{-1} B(a,:)`, its SPD counterpart with
/// the same penalty terms, and the matching right-hand side. C is diagonal,
/// so the inversion is elementwise.
fn condensed_system(
    a: &SparseMatrix,
    a_spd: &SparseMatrix,
    b: &SparseMatrix,
    c_diag: &[f64],
    f_rhs: &[f64],
    g_rhs: &[f64],
    active: &[usize],
) -> (SparseMatrix, SparseMatrix, Vec<f64>) {
    let n = a.nrows();
    let mut coo = CooBuilder::with_capacity(n, n, a.nnz() + 36 * active.len());
    for (i, j, v) in a.entries() {
        coo.push(i, j, v);
    }
    let mut coo_spd = CooBuilder::with_capacity(n, n, a_spd.nnz() + 36 * active.len());
    for (i, j, v) in a_spd.entries() {
        coo_spd.push(i, j, v);
    }
    let mut rhs = f_rhs.to_vec();
    for &k in active {
        let inv_c = 1.0 / c_diag[k];
        let (cols, vals) = b.row(k);
        for (i, vi) in cols.iter().zip(vals) {
            for (j, vj) in cols.iter().zip(vals) {
                coo.push(*i, *j, vi * vj * inv_c);
                coo_spd.push(*i, *j, vi * vj * inv_c);
            }
            rhs[*i] += g_rhs[k] * inv_c * vi;
        }
    }
    (coo.build(), coo_spd.build(), rhs)
}

/// Active-set iteration for the stabilized system: unconstrained solve,
/// elementwise multiplier recovery `lambda = C^{-1}(g - B u)`, then sweeps
/// on the condensed SPD system with the projected multiplier update.
pub fn pdas_stabilized(
    sys: &StabilizedSystem,
    opts: &SolverOptions,
) -> Result<DiscreteSolution, SolverError> {
    let m = sys.c_alpha.len();
    let mut report = SolverReport::default();

    let u = solve_sym_with_spd(&sys.a_alpha, &sys.a_spd, &sys.f_alpha, opts.lin_tol, &mut report)
        .map_err(|source| SolverError::LinearSolve { iteration: 0, source })?;

    let bu = sys.b_alpha.matvec(&u);
    let lambda: Vec<f64> = (0..m).map(|i| (sys.g_alpha[i] - bu[i]) / sys.c_alpha[i]).collect();
    pdas_stabilized_loop(sys, opts, u, lambda, report)
}

/// Continue the stabilized active-set iteration from a given multiplier,
/// e.g. one prolonged from a coarser mesh. The plain cold start can cycle
/// between active sets once the stabilization parameter exceeds the inverse
/// estimate constant; continuation keeps the iteration in the attraction
/// basin of the discrete solution.
pub fn pdas_stabilized_warm(
    sys: &StabilizedSystem,
    opts: &SolverOptions,
    lambda0: &[f64],
) -> Result<DiscreteSolution, SolverError> {
    assert_eq!(lambda0.len(), sys.c_alpha.len());
    let report = SolverReport::default();
    let u = vec![0.0; sys.a_alpha.nrows()];
    pdas_stabilized_loop(sys, opts, u, lambda0.to_vec(), report)
}

fn pdas_stabilized_loop(
    sys: &StabilizedSystem,
    opts: &SolverOptions,
    mut u: Vec<f64>,
    mut lambda: Vec<f64>,
    mut report: SolverReport,
) -> Result<DiscreteSolution, SolverError> {
    let m = sys.c_alpha.len();
    let mut active: Vec<usize> = Vec::new();

    for k in 0..opts.max_iter {
        active = (0..m).filter(|&i| lambda[i] > 0.0).collect();
        let (mat, mat_spd, rhs) = condensed_system(
            &sys.a_alpha,
            &sys.a_spd,
            &sys.b_alpha,
            &sys.c_alpha,
            &sys.f_alpha,
            &sys.g_alpha,
            &active,
        );
        u = solve_sym_with_spd(&mat, &mat_spd, &rhs, opts.lin_tol, &mut report)
            .map_err(|source| SolverError::LinearSolve { iteration: k, source })?;

        let bu = sys.b_alpha.matvec(&u);
        let lambda_next: Vec<f64> = (0..m)
            .map(|i| ((sys.g_alpha[i] - bu[i]) / sys.c_alpha[i]).max(0.0))
            .collect();
        let update = inf_norm_diff(&lambda_next, &lambda);
        report.lambda_update_norms.push(update);
        lambda = lambda_next;
        report.iterations = k + 1;
        if update <= opts.tol {
            report.converged = true;
            break;
        }
    }

    let active_set: Vec<usize> = active.into_iter().filter(|&i| lambda[i] > 0.0).collect();
    Ok(DiscreteSolution { u, lambda, active_set, report })
}

/// Discrete negative norm of an elementwise-constant multiplier.
fn neg_norm_p0(mesh: &Mesh, values: &[f64]) -> f64 {
    (0..mesh.n_triangles())
        .map(|k| {
            let h = mesh.element_h(k);
            h * h * values[k] * values[k] * mesh.triangle_area(k)
        })
        .sum::<f64>()
        .sqrt()
}

/// Nitsche/penalty fixed point.
///
/// The contact force is recovered pointwise from
/// `max(0, (alpha h^2)^{-1} (g - u) - f - Lap u)`. For degree 1 whole
/// elements are classified by the sign of the element mean, which reproduces
/// the elementwise elimination of the P0 multiplier, and the linear system
/// is the penalty formulation on the contact region. For degree 2 the
/// formula is applied at quadrature points. Stops when the discrete negative
/// norm of the force update drops below `tol`; revisiting an earlier contact
/// region is reported as oscillation.
pub fn nitsche_solve(
    mesh: &Mesh,
    data: &ProblemData,
    opts: &SolverOptions,
) -> Result<DiscreteSolution, SolverError> {
    match data.degree {
        1 => nitsche_k1(mesh, data, opts),
        2 => nitsche_k2(mesh, data, opts),
        d => panic!("nitsche_solve supports degrees 1 and 2, got {d}"),
    }
}

fn nitsche_k1(
    mesh: &Mesh,
    data: &ProblemData,
    opts: &SolverOptions,
) -> Result<DiscreteSolution, SolverError> {
    let sys = crate::assembly::assemble_stabilized(
        mesh,
        &data.stabilized_space(),
        &SpaceSpec::multiplier(),
        data,
    );
    let m = sys.c_alpha.len();
    let mut report = SolverReport::default();

    let (mut u, st) = spd_solve_stats(&sys.a_alpha, &sys.f_alpha, opts.lin_tol)
        .map_err(|source| SolverError::LinearSolve { iteration: 0, source })?;
    report.cg_iterations += st.iterations;
    report.cg_solves += 1;

    // element mean of (alpha h^2)^{-1}(g - u) - f, clipped at zero
    let force = |u: &[f64]| -> Vec<f64> {
        let bu = sys.b_alpha.matvec(u);
        (0..m)
            .map(|i| ((sys.g_alpha[i] - bu[i]) / sys.c_alpha[i]).max(0.0))
            .collect()
    };

    let mut lambda = force(&u);
    let mut contact: Vec<usize> = (0..m).filter(|&i| lambda[i] > 0.0).collect();
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
    seen.insert(contact.clone(), 0);

    for k in 0..opts.max_iter {
        let (mat, mat_spd, rhs) = condensed_system(
            &sys.a_alpha,
            &sys.a_spd,
            &sys.b_alpha,
            &sys.c_alpha,
            &sys.f_alpha,
            &sys.g_alpha,
            &contact,
        );
        u = solve_sym_with_spd(&mat, &mat_spd, &rhs, opts.lin_tol, &mut report)
            .map_err(|source| SolverError::LinearSolve { iteration: k, source })?;

        let lambda_next = force(&u);
        let contact_next: Vec<usize> = (0..m).filter(|&i| lambda_next[i] > 0.0).collect();
        let diff: Vec<f64> = lambda_next.iter().zip(&lambda).map(|(a, b)| a - b).collect();
        let update = neg_norm_p0(mesh, &diff);
        report.lambda_update_norms.push(update);
        lambda = lambda_next;
        report.iterations = k + 1;
        if update <= opts.tol {
            report.converged = true;
            contact = contact_next;
            break;
        }
        if let Some(&j) = seen.get(&contact_next) {
            if k + 1 - j >= 2 {
                report.oscillating = true;
                contact = contact_next;
                break;
            }
        }
        seen.insert(contact_next.clone(), k + 1);
        contact = contact_next;
    }

    let active_set: Vec<usize> = contact.into_iter().filter(|&i| lambda[i] > 0.0).collect();
    Ok(DiscreteSolution { u, lambda, active_set, report })
}

fn nitsche_k2(
    mesh: &Mesh,
    data: &ProblemData,
    opts: &SolverOptions,
) -> Result<DiscreteSolution, SolverError> {
    let v_spec = data.stabilized_space();
    let v_dofs = DofMap::build(mesh, &v_spec);
    let rule = quadrature_rule(4).unwrap();
    let nq = rule.len();
    let nt = mesh.n_triangles();
    let nl = v_spec.family.local_dofs();
    let alpha = data.alpha;
    let mut report = SolverReport::default();

    // contact force update at every quadrature point
    let force_at_points = |u_full: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; nt * nq];
        for k in 0..nt {
            let geo = ElementGeometry::new(mesh, k);
            let dofs = v_dofs.element_dofs(k);
            let h2 = mesh.element_rho(k) * mesh.element_rho(k);
            for (q, pt) in rule.points().iter().enumerate() {
                let basis = eval_basis(v_spec.family, &geo, *pt);
                let x = geo.point(*pt);
                let mut uv = 0.0;
                let mut lap_u = 0.0;
                for i in 0..nl {
                    uv += u_full[dofs[i]] * basis[i].value;
                    lap_u += u_full[dofs[i]] * basis[i].laplacian;
                }
                let g = (data.obstacle)(x[0], x[1]);
                let f = (data.load)(x[0], x[1]);
                let t = (g - uv) / (alpha * h2) - f - lap_u;
                out[k * nq + q] = t.max(0.0);
            }
        }
        out
    };

    // contact-region form with the pointwise indicator, together with its
    // SPD counterpart (gradient and contact mass terms only) used as the
    // MINRES preconditioner
    let assemble_with = |chi: &[bool]| -> (SparseMatrix, SparseMatrix, Vec<f64>) {
        let n_free = v_dofs.n_free();
        let mut coo = CooBuilder::with_capacity(n_free, n_free, nt * nl * nl);
        let mut coo_spd = CooBuilder::with_capacity(n_free, n_free, nt * nl * nl);
        let mut rhs = vec![0.0; n_free];
        for k in 0..nt {
            let geo = ElementGeometry::new(mesh, k);
            let dofs = v_dofs.element_dofs(k);
            let h2 = mesh.element_rho(k) * mesh.element_rho(k);
            let mut loc = [[0.0f64; 7]; 7];
            let mut loc_spd = [[0.0f64; 7]; 7];
            let mut loc_rhs = [0.0f64; 7];
            for (q, (pt, &w)) in rule.points().iter().zip(rule.weights()).enumerate() {
                let basis = eval_basis(v_spec.family, &geo, *pt);
                let x = geo.point(*pt);
                let wj = w * 2.0 * geo.area;
                let f = (data.load)(x[0], x[1]);
                let g = (data.obstacle)(x[0], x[1]);
                let in_contact = chi[k * nq + q];
                for i in 0..nl {
                    let bi = basis[i];
                    for j in 0..nl {
                        let bj = basis[j];
                        // row i tests with v_h, column j carries u_h
                        let grad = bi.grad[0] * bj.grad[0] + bi.grad[1] * bj.grad[1];
                        let mut v = grad;
                        let mut v_spd = grad;
                        if in_contact {
                            let mass = bj.value * bi.value / (alpha * h2);
                            v += bj.value * bi.laplacian + bj.laplacian * bi.value + mass;
                            v_spd += mass;
                        } else {
                            v -= alpha * h2 * (bi.laplacian * bj.laplacian);
                        }
                        loc[i][j] += wj * v;
                        loc_spd[i][j] += wj * v_spd;
                    }
                    if in_contact {
                        loc_rhs[i] +=
                            wj * g * (basis[i].laplacian + basis[i].value / (alpha * h2));
                    } else {
                        loc_rhs[i] +=
                            wj * f * (basis[i].value + alpha * h2 * basis[i].laplacian);
                    }
                }
            }
            for i in 0..nl {
                let Some(ri) = v_dofs.free_index(dofs[i]) else { continue };
                for j in 0..nl {
                    if let Some(cj) = v_dofs.free_index(dofs[j]) {
                        coo.push(ri, cj, loc[i][j]);
                        coo_spd.push(ri, cj, loc_spd[i][j]);
                    }
                }
                rhs[ri] += loc_rhs[i];
            }
        }
        (coo.build(), coo_spd.build(), rhs)
    };

    let neg_norm_q = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for k in 0..nt {
            let h2 = mesh.element_h(k) * mesh.element_h(k);
            let area2 = 2.0 * mesh.triangle_area(k);
            for (q, &w) in rule.weights().iter().enumerate() {
                let d = a[k * nq + q] - b[k * nq + q];
                s += h2 * w * area2 * d * d;
            }
        }
        s.sqrt()
    };

    // start from the no-contact solve
    let chi0 = vec![false; nt * nq];
    let (mat0, spd0, rhs0) = assemble_with(&chi0);
    let mut u = solve_sym_with_spd(&mat0, &spd0, &rhs0, opts.lin_tol, &mut report)
        .map_err(|source| SolverError::LinearSolve { iteration: 0, source })?;

    let mut lambda_q = force_at_points(&v_dofs.expand(&u));
    let mut chi: Vec<bool> = lambda_q.iter().map(|&v| v > 0.0).collect();
    let mut seen: HashMap<Vec<bool>, usize> = HashMap::new();
    seen.insert(chi.clone(), 0);

    for k in 0..opts.max_iter {
        let (mat, mat_spd, rhs) = assemble_with(&chi);
        u = solve_sym_with_spd(&mat, &mat_spd, &rhs, opts.lin_tol, &mut report)
            .map_err(|source| SolverError::LinearSolve { iteration: k, source })?;

        let lambda_next = force_at_points(&v_dofs.expand(&u));
        let chi_next: Vec<bool> = lambda_next.iter().map(|&v| v > 0.0).collect();
        let update = neg_norm_q(&lambda_next, &lambda_q);
        report.lambda_update_norms.push(update);
        lambda_q = lambda_next;
        report.iterations = k + 1;
        if update <= opts.tol {
            report.converged = true;
            break;
        }
        if let Some(&j) = seen.get(&chi_next) {
            if k + 1 - j >= 2 {
                report.oscillating = true;
                break;
            }
        }
        seen.insert(chi_next.clone(), k + 1);
        chi = chi_next;
    }

    // element means of the pointwise force, for reporting and estimation
    let mut lambda = vec![0.0; nt];
    for k in 0..nt {
        let mut s = 0.0;
        for (q, &w) in rule.weights().iter().enumerate() {
            s += w * 2.0 * lambda_q[k * nq + q];
        }
        lambda[k] = s; // weights sum to 1/2, so s is the element mean
    }
    let active_set: Vec<usize> = (0..nt).filter(|&k| lambda[k] > 0.0).collect();
    Ok(DiscreteSolution { u, lambda, active_set, report })
}

/// Infinity norms of the three KKT defect measures.
#[derive(Clone, Copy, Debug)]
pub struct KktResiduals {
    /// largest violation of the primal constraint (zero when feasible)
    pub primal: f64,
    /// largest negative multiplier magnitude
    pub dual: f64,
    /// largest complementarity product
    pub complementarity: f64,
}

fn kkt_from_gap(lambda: &[f64], gap: &[f64]) -> KktResiduals {
    let mut primal = 0.0f64;
    let mut dual = 0.0f64;
    let mut comp = 0.0f64;
    for (l, g) in lambda.iter().zip(gap) {
        primal = primal.max((-g).max(0.0));
        dual = dual.max((-l).max(0.0));
        comp = comp.max((l * g).abs());
    }
    KktResiduals { primal, dual, complementarity: comp }
}

/// Defects of B u >= g, lambda >= 0 and lambda (B u - g) = 0.
pub fn kkt_check_mixed(sol: &DiscreteSolution, sys: &MixedSystem) -> KktResiduals {
    let bu = sys.b.matvec(&sol.u);
    let gap: Vec<f64> = bu.iter().zip(&sys.g).map(|(b, g)| b - g).collect();
    kkt_from_gap(&sol.lambda, &gap)
}

/// Stabilized analogue with the constraint B u + C lambda >= g.
pub fn kkt_check_stabilized(sol: &DiscreteSolution, sys: &StabilizedSystem) -> KktResiduals {
    let bu = sys.b_alpha.matvec(&sol.u);
    let gap: Vec<f64> = (0..sys.c_alpha.len())
        .map(|i| bu[i] + sys.c_alpha[i] * sol.lambda[i] - sys.g_alpha[i])
        .collect();
    kkt_from_gap(&sol.lambda, &gap)
}
