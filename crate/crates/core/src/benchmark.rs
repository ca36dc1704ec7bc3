//! Radial benchmark on the disk of radius 2: closed-form reference solution,
//! error norms, uniform convergence studies and small dense diagnostics for
//! the inf-sup constant and the inverse-estimate constant.
//!
//! Unit load f = -1 presses the membrane onto the radial obstacle
//! g(r) = sqrt(1 - r^2) for r < 0.9, continued by its tangent line. Outside
//! the contact disk of radius `a` the displacement solves the radial Poisson
//! equation u'' + u'/r = 1, and matching value and slope of the obstacle at
//! r = a determines both the log coefficient and `a` itself.

use crate::assembly::{
    assemble_coupling, assemble_h1_gram, assemble_laplacian_gram, assemble_mixed,
    assemble_stiffness, assemble_stabilized, ProblemData,
};
use crate::estimator::{estimate, MethodFlavor};
use crate::fespace::{quadrature_rule, DofMap, ElementGeometry, FieldEval, SpaceSpec};
use crate::linalg::dense::{symmetric_eigenvalues, Cholesky, DenseMatrix};
use crate::mesh::{generate_disk_mesh, Mesh, MeshError};
use crate::solver::{
    nitsche_solve, pdas_mixed, pdas_stabilized, pdas_stabilized_warm, DiscreteSolution,
    SolverError, SolverOptions,
};
use std::sync::Arc;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum BenchmarkError {
    #[error("mesh generation failed: {0}")]
    Mesh(#[from] MeshError),
    #[error("solver failed at level {level}: {source}")]
    Solver { level: usize, source: SolverError },
    #[error("solver did not converge at level {level} within {iterations} iterations")]
    NotConverged { level: usize, iterations: usize },
    #[error("dense diagnostic limited to {cap} dofs, got {got}")]
    SizeCapExceeded { cap: usize, got: usize },
}

const OBSTACLE_KINK: f64 = 0.9;

/// Closed-form reference solution of the radial benchmark.
#[derive(Clone, Copy, Debug)]
pub struct ExactSolution {
    /// contact radius a
    pub contact_radius: f64,
    /// coefficient of log(r/2) outside the contact region
    pub log_coeff: f64,
    /// slope of the tangent-line continuation of the obstacle
    pub obstacle_c1: f64,
    /// intercept of the tangent-line continuation
    pub obstacle_c2: f64,
}

fn sqrt_part(r: f64) -> f64 {
    (1.0 - r * r).sqrt()
}

/// Construct the reference solution: the tangent-line constants follow from
/// C1 matching at the obstacle kink, and the contact radius is bracketed in
/// [0.7, 0.9] and bisected to 1e-12 on the value-matching residual.
pub fn build_exact_solution() -> ExactSolution {
    let s = sqrt_part(OBSTACLE_KINK);
    let obstacle_c1 = -OBSTACLE_KINK / s;
    let obstacle_c2 = 1.0 / s;

    let g = sqrt_part;
    let gp = |r: f64| -r / sqrt_part(r);
    // u(r) = r^2/4 - 1 + C1(a) log(r/2) with C1 fixed by slope matching
    let log_coeff_of = |a: f64| a * (gp(a) - a / 2.0);
    let residual = |a: f64| a * a / 4.0 - 1.0 + log_coeff_of(a) * (a / 2.0).ln() - g(a);

    let (mut lo, mut hi) = (0.7_f64, 0.9_f64);
    let (flo, fhi) = (residual(lo), residual(hi));
    assert!(
        flo * fhi < 0.0,
        "contact-radius residual must change sign on [0.7, 0.9]: {flo} vs {fhi}"
    );
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if residual(lo) * residual(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    ExactSolution {
        contact_radius: a,
        log_coeff: log_coeff_of(a),
        obstacle_c1,
        obstacle_c2,
    }
}

impl ExactSolution {
    pub fn obstacle(&self, r: f64) -> f64 {
        if r < OBSTACLE_KINK {
            sqrt_part(r)
        } else {
            self.obstacle_c1 * r + self.obstacle_c2
        }
    }

    pub fn obstacle_deriv(&self, r: f64) -> f64 {
        if r < OBSTACLE_KINK {
            -r / sqrt_part(r)
        } else {
            self.obstacle_c1
        }
    }

    pub fn u(&self, r: f64) -> f64 {
        if r <= self.contact_radius {
            self.obstacle(r)
        } else {
            r * r / 4.0 - 1.0 + self.log_coeff * (r / 2.0).ln()
        }
    }

    pub fn u_deriv(&self, r: f64) -> f64 {
        if r <= self.contact_radius {
            self.obstacle_deriv(r)
        } else {
            r / 2.0 + self.log_coeff / r
        }
    }

    pub fn grad_u(&self, x: f64, y: f64) -> [f64; 2] {
        let r = (x * x + y * y).sqrt();
        if r < 1e-14 {
            return [0.0, 0.0];
        }
        let d = self.u_deriv(r);
        [d * x / r, d * y / r]
    }

    /// Contact reaction 1 - Lap g inside the contact disk, zero outside.
    pub fn lambda(&self, r: f64) -> f64 {
        if r < self.contact_radius {
            let w = 1.0 - r * r;
            1.0 + w.powf(-1.5) + w.powf(-0.5)
        } else {
            0.0
        }
    }

    /// Benchmark problem data for the given discretization parameters.
    pub fn problem_data(&self, alpha: f64, degree: u8) -> ProblemData {
        let me = *self;
        ProblemData::new(
            Arc::new(|_, _| -1.0),
            Arc::new(move |x: f64, y: f64| me.obstacle((x * x + y * y).sqrt())),
            Arc::new(move |x: f64, y: f64| {
                let r = (x * x + y * y).sqrt();
                if r < 1e-14 {
                    return [0.0, 0.0];
                }
                let d = me.obstacle_deriv(r);
                [d * x / r, d * y / r]
            }),
            alpha,
            degree,
        )
    }
}

/// Full H1 error of a displacement field against the reference solution,
/// integrated with the degree-6 rule. Elements straddling the contact circle
/// are integrated with the same rule; the committed sampling error there is
/// below the measured convergence rates.
pub fn error_h1(u_free: &[f64], mesh: &Mesh, v_dofs: &DofMap, exact: &ExactSolution) -> f64 {
    let u = FieldEval::from_free(mesh, v_dofs, u_free);
    let rule = quadrature_rule(6).unwrap();
    let mut acc = 0.0;
    for k in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, k);
        for (pt, &w) in rule.points().iter().zip(rule.weights()) {
            let x = geo.point(*pt);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let uh = u.eval(k, &geo, *pt);
            let du = exact.u(r) - uh.value;
            let gu = exact.grad_u(x[0], x[1]);
            let dgx = gu[0] - uh.grad[0];
            let dgy = gu[1] - uh.grad[1];
            acc += w * 2.0 * geo.area * (du * du + dgx * dgx + dgy * dgy);
        }
    }
    acc.sqrt()
}

/// Discrete negative norm of the multiplier error:
/// (sum_K h_K^2 || lambda - lambda_K ||^2_{0,K})^{1/2}.
pub fn error_lambda_neg(lambda: &[f64], mesh: &Mesh, exact: &ExactSolution) -> f64 {
    let rule = quadrature_rule(6).unwrap();
    let mut acc = 0.0;
    for k in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, k);
        let h2 = mesh.element_h(k) * mesh.element_h(k);
        for (pt, &w) in rule.points().iter().zip(rule.weights()) {
            let x = geo.point(*pt);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let d = exact.lambda(r) - lambda[k];
            acc += h2 * w * 2.0 * geo.area * d * d;
        }
    }
    acc.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodKind {
    Mixed,
    Stabilized,
    Nitsche,
}

impl MethodKind {
    pub fn flavor(self) -> MethodFlavor {
        match self {
            MethodKind::Mixed => MethodFlavor::Mixed,
            _ => MethodFlavor::Stabilized,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFamily {
    /// one vertex ring snapped onto the contact circle
    Conforming,
    Nonconforming,
}

/// Inputs of a uniform-refinement convergence study.
#[derive(Clone, Debug)]
pub struct StudySpec {
    pub method: MethodKind,
    pub degree: u8,
    pub alpha: f64,
    pub family: MeshFamily,
    pub initial_h: f64,
    pub levels: usize,
    pub solver: SolverOptions,
}

#[derive(Clone, Debug)]
pub struct LevelRow {
    pub level: usize,
    pub h: f64,
    pub ndof_u: usize,
    pub ndof_lambda: usize,
    pub err_u_h1: f64,
    pub err_lambda_neg: f64,
    pub eta: f64,
    pub s_term: f64,
    pub iterations: usize,
    /// vertices on the conform circle, 0 for nonconforming meshes
    pub ring_vertices: usize,
}

#[derive(Clone, Debug, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<LevelRow>,
}

/// rate p with e ~ h^p between consecutive rows
pub fn rates(errors: &[f64], hs: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None; errors.len()];
    for i in 1..errors.len() {
        if errors[i - 1] > 0.0 && errors[i] > 0.0 && hs[i - 1] != hs[i] {
            out[i] = Some((errors[i - 1] / errors[i]).ln() / (hs[i - 1] / hs[i]).ln());
        }
    }
    out
}

impl ConvergenceTable {
    pub fn rates_u(&self) -> Vec<Option<f64>> {
        let e: Vec<f64> = self.rows.iter().map(|r| r.err_u_h1).collect();
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        rates(&e, &h)
    }

    pub fn rates_lambda(&self) -> Vec<Option<f64>> {
        let e: Vec<f64> = self.rows.iter().map(|r| r.err_lambda_neg).collect();
        let h: Vec<f64> = self.rows.iter().map(|r| r.h).collect();
        rates(&e, &h)
    }
}

/// Solve the benchmark problem on one mesh with the selected method.
/// Returns the solution and the displacement dof map it lives on.
pub fn solve_benchmark(
    mesh: &Mesh,
    data: &ProblemData,
    method: MethodKind,
    opts: &SolverOptions,
) -> Result<(DiscreteSolution, DofMap), SolverError> {
    let q = SpaceSpec::multiplier();
    match method {
        MethodKind::Mixed => {
            let sys = assemble_mixed(mesh, &data.mixed_space(), &q, data);
            let sol = pdas_mixed(&sys, opts)?;
            Ok((sol, sys.v_dofs))
        }
        MethodKind::Stabilized => {
            let sys = assemble_stabilized(mesh, &data.stabilized_space(), &q, data);
            let sol = pdas_stabilized(&sys, opts)?;
            Ok((sol, sys.v_dofs))
        }
        MethodKind::Nitsche => {
            let sol = nitsche_solve(mesh, data, opts)?;
            let dofs = DofMap::build(mesh, &data.stabilized_space());
            Ok((sol, dofs))
        }
    }
}

fn count_ring_vertices(mesh: &Mesh, radius: f64) -> usize {
    mesh.vertices()
        .iter()
        .filter(|p| ((p[0] * p[0] + p[1] * p[1]).sqrt() - radius).abs() <= 1e-12)
        .count()
}

/// Uniform-refinement study: solve, estimate and measure errors per level.
pub fn convergence_study(spec: &StudySpec) -> Result<ConvergenceTable, BenchmarkError> {
    convergence_study_with(spec, |_, _, _, _, _| {})
}

/// As `convergence_study`, additionally handing every level's mesh,
/// solution, dof map and estimator breakdown to the sink (used by the
/// command line driver to emit per-level files).
pub fn convergence_study_with<F>(
    spec: &StudySpec,
    mut sink: F,
) -> Result<ConvergenceTable, BenchmarkError>
where
    F: FnMut(usize, &Mesh, &DiscreteSolution, &DofMap, &crate::estimator::ErrorBreakdown),
{
    assert!(spec.levels >= 1);
    let exact = build_exact_solution();
    let data = exact.problem_data(spec.alpha, spec.degree);
    let conform = match spec.family {
        MeshFamily::Conforming => Some(exact.contact_radius),
        MeshFamily::Nonconforming => None,
    };
    let mut mesh = generate_disk_mesh(2.0, spec.initial_h, conform)?;
    let mut table = ConvergenceTable::default();
    let mut lambda_prev: Option<Vec<f64>> = None;

    for level in 0..spec.levels {
        // Continue the stabilized iteration from the multiplier of the
        // previous level: a cold start can cycle once alpha exceeds the
        // inverse estimate constant of the space.
        let warm = match (spec.method, &lambda_prev, mesh.parent_elements()) {
            (MethodKind::Stabilized, Some(lp), Some(parents)) => {
                Some(parents.iter().map(|&p| lp[p]).collect::<Vec<f64>>())
            }
            _ => None,
        };
        let (sol, v_dofs) = match warm {
            Some(lambda0) => {
                let q = SpaceSpec::multiplier();
                let sys = assemble_stabilized(&mesh, &data.stabilized_space(), &q, &data);
                let sol = pdas_stabilized_warm(&sys, &spec.solver, &lambda0)
                    .map_err(|source| BenchmarkError::Solver { level, source })?;
                (sol, sys.v_dofs)
            }
            None => solve_benchmark(&mesh, &data, spec.method, &spec.solver)
                .map_err(|source| BenchmarkError::Solver { level, source })?,
        };
        if !sol.report.converged {
            return Err(BenchmarkError::NotConverged {
                level,
                iterations: sol.report.iterations,
            });
        }
        let est = estimate(&sol, &mesh, &v_dofs, &data, spec.method.flavor());
        sink(level, &mesh, &sol, &v_dofs, &est);
        table.rows.push(LevelRow {
            level,
            h: mesh.h_max(),
            ndof_u: v_dofs.n_free(),
            ndof_lambda: mesh.n_triangles(),
            err_u_h1: error_h1(&sol.u, &mesh, &v_dofs, &exact),
            err_lambda_neg: error_lambda_neg(&sol.lambda, &mesh, &exact),
            eta: est.eta,
            s_term: est.s_term,
            iterations: sol.report.iterations,
            ring_vertices: count_ring_vertices(&mesh, exact.contact_radius),
        });
        lambda_prev = Some(sol.lambda);
        if level + 1 < spec.levels {
            mesh = mesh.refine_uniform();
        }
    }
    Ok(table)
}

const DENSE_CAP: usize = 400;

/// Discrete inf-sup constant of the pair (V_h, Q_h): the square root of the
/// smallest eigenvalue of D^{-1/2} B H^{-1} B^T D^{-1/2}, with H the H1 Gram
/// matrix on the free displacement dofs and D the diagonal Gram of the
/// discrete negative norm (D_KK = h_K^2 |K|). Dense computation, capped at
/// 400 total dofs.
pub fn infsup_diagnostic(
    mesh: &Mesh,
    v_spec: &SpaceSpec,
    q_spec: &SpaceSpec,
) -> Result<f64, BenchmarkError> {
    assert_eq!(q_spec.family, crate::fespace::Family::P0Disc);
    let (v_dofs, b) = assemble_coupling(mesh, v_spec);
    let n = v_dofs.n_free();
    let m = mesh.n_triangles();
    if n + m > DENSE_CAP {
        return Err(BenchmarkError::SizeCapExceeded { cap: DENSE_CAP, got: n + m });
    }

    let h = assemble_h1_gram(mesh, v_spec);
    let h_dense = DenseMatrix::from_sparse(&h);
    let chol = Cholesky::new(&h_dense).expect("H1 Gram matrix is SPD");

    // columns of H^{-1} B^T
    let mut hinv_bt: Vec<Vec<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let mut col = vec![0.0; n];
        let (cols, vals) = b.row(k);
        for (c, v) in cols.iter().zip(vals) {
            col[*c] = *v;
        }
        hinv_bt.push(chol.solve(&col));
    }

    let mut s = DenseMatrix::zeros(m, m);
    for i in 0..m {
        let (cols_i, vals_i) = b.row(i);
        for j in 0..m {
            let mut acc = 0.0;
            for (c, v) in cols_i.iter().zip(vals_i) {
                acc += v * hinv_bt[j][*c];
            }
            s[(i, j)] = acc;
        }
    }
    // symmetrize roundoff and scale by D^{-1/2}
    let d: Vec<f64> = (0..m)
        .map(|k| (mesh.element_h(k).powi(2) * mesh.triangle_area(k)).sqrt())
        .collect();
    let mut t = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            t[(i, j)] = 0.5 * (s[(i, j)] + s[(j, i)]) / (d[i] * d[j]);
        }
    }
    let eig = symmetric_eigenvalues(&t);
    Ok(eig[0].max(0.0).sqrt())
}

/// Estimate of the inverse-inequality constant: the largest generalized
/// eigenvalue mu of (sum_K h_K^2 (Lap u, Lap v), (grad u, grad v)) gives the
/// constant 1/mu; the stabilized form stays definite for alpha below it.
/// Infinite for P1, whose element Laplacians vanish.
pub fn inverse_constant_estimate(
    mesh: &Mesh,
    v_spec: &SpaceSpec,
) -> Result<f64, BenchmarkError> {
    let (v_dofs, a) = assemble_stiffness(mesh, v_spec);
    let n = v_dofs.n_free();
    if n > DENSE_CAP {
        return Err(BenchmarkError::SizeCapExceeded { cap: DENSE_CAP, got: n });
    }
    let l = assemble_laplacian_gram(mesh, v_spec);
    if l.nnz() == 0 {
        return Ok(f64::INFINITY);
    }
    let a_dense = DenseMatrix::from_sparse(&a);
    let l_dense = DenseMatrix::from_sparse(&l);
    let chol = Cholesky::new(&a_dense).expect("stiffness matrix is SPD on free dofs");

    // M = G^{-1} L G^{-T} column by column
    let mut mcols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let ginv_t = chol.solve_upper(&e);
        let mut lg = vec![0.0; n];
        for r in 0..n {
            let mut acc = 0.0;
            for c in 0..n {
                acc += l_dense.get(r, c) * ginv_t[c];
            }
            lg[r] = acc;
        }
        mcols.push(chol.solve_lower(&lg));
    }
    let mut mm = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            mm[(i, j)] = 0.5 * (mcols[j][i] + mcols[i][j]);
        }
    }
    let eig = symmetric_eigenvalues(&mm);
    let mu_max = *eig.last().unwrap();
    if mu_max <= 1e-14 {
        Ok(f64::INFINITY)
    } else {
        Ok(1.0 / mu_max)
    }
}
