//! Batch driver: JSON configuration, the solve/converge/adapt/check
//! subcommands, and CSV/VTK/plot-script emission.
//!
//! All subcommands run the radial benchmark problem; the configuration
//! selects method, degree, stabilization parameter, mesh family and solver
//! tolerances. Outputs are byte-reproducible for identical configurations.

pub mod output;

use crate::assembly::{assemble_mixed, assemble_stabilized, ProblemData};
use crate::benchmark::{
    build_exact_solution, convergence_study_with, error_h1, error_lambda_neg,
    infsup_diagnostic, inverse_constant_estimate, solve_benchmark, BenchmarkError, MeshFamily,
    MethodKind, StudySpec,
};
use crate::estimator::{estimate, local_indicator, mark};
use crate::fespace::{eval_basis, quadrature_rule, ElementGeometry, Family, SpaceSpec};
use crate::mesh::{generate_disk_mesh, Mesh, MeshError};
use crate::solver::{
    kkt_check_mixed, kkt_check_stabilized, pdas_stabilized_warm, DiscreteSolution, SolverOptions,
};
use output::CsvRow;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("mesh error: {0}")]
    Mesh(#[from] MeshError),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("solver did not converge")]
    NotConverged,
    #[error("{0} property check(s) failed")]
    CheckFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Mesh(_) => 1,
            CliError::Solver(_) | CliError::NotConverged => 2,
            CliError::CheckFailed(_) => 3,
        }
    }
}

impl From<BenchmarkError> for CliError {
    fn from(e: BenchmarkError) -> CliError {
        match e {
            BenchmarkError::NotConverged { .. } => CliError::NotConverged,
            BenchmarkError::Mesh(m) => CliError::Mesh(m),
            other => CliError::Solver(other.to_string()),
        }
    }
}

#[derive(Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mixed,
    Stabilized,
    Nitsche,
}

impl Method {
    pub fn kind(self) -> MethodKind {
        match self {
            Method::Mixed => MethodKind::Mixed,
            Method::Stabilized => MethodKind::Stabilized,
            Method::Nitsche => MethodKind::Nitsche,
        }
    }
}

#[derive(Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Family2 {
    Conforming,
    Nonconforming,
}

fn default_initial_h() -> f64 {
    0.6
}

fn default_levels() -> usize {
    5
}

fn default_family() -> Family2 {
    Family2::Nonconforming
}

#[derive(Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_family")]
    pub family: Family2,
    #[serde(default = "default_initial_h")]
    pub initial_h: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            family: default_family(),
            initial_h: default_initial_h(),
            levels: default_levels(),
        }
    }
}

fn default_c() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    200
}

#[derive(Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { c: default_c(), tol: default_tol(), max_iter: default_max_iter() }
    }
}

fn default_theta() -> f64 {
    0.9
}

fn default_budget() -> usize {
    30_000
}

fn default_outdir() -> String {
    "out".to_string()
}

#[derive(Deserialize, Clone, Debug)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub degree: u8,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_budget")]
    pub dof_budget: usize,
    #[serde(default = "default_outdir")]
    pub output_dir: String,
}

impl RunConfig {
    /// Stabilization parameter: configured value, or 0.01 for degree 1 and
    /// 0.1 for degree 2. Ignored by the mixed method.
    pub fn effective_alpha(&self) -> f64 {
        self.alpha
            .unwrap_or(if self.degree == 1 { 0.01 } else { 0.1 })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.degree != 1 && self.degree != 2 {
            return Err(CliError::Config(format!(
                "degree: must be 1 or 2, got {}",
                self.degree
            )));
        }
        if self.method != Method::Mixed && !(self.effective_alpha() > 0.0) {
            return Err(CliError::Config(format!(
                "alpha: must be positive for the {:?} method, got {}",
                self.method,
                self.effective_alpha()
            )));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(CliError::Config(format!(
                "theta: must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if self.mesh.levels < 1 {
            return Err(CliError::Config("mesh.levels: must be at least 1".into()));
        }
        if !(self.mesh.initial_h > 0.0 && self.mesh.initial_h < 2.0) {
            return Err(CliError::Config(format!(
                "mesh.initial_h: must lie in (0, 2), got {}",
                self.mesh.initial_h
            )));
        }
        Ok(())
    }

    pub fn family(&self) -> MeshFamily {
        match self.mesh.family {
            Family2::Conforming => MeshFamily::Conforming,
            Family2::Nonconforming => MeshFamily::Nonconforming,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            c: self.solver.c,
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            lin_tol: 1e-12,
        }
    }

    pub fn study_spec(&self) -> StudySpec {
        StudySpec {
            method: self.method.kind(),
            degree: self.degree,
            alpha: self.effective_alpha(),
            family: self.family(),
            initial_h: self.mesh.initial_h,
            levels: self.mesh.levels,
            solver: self.solver_options(),
        }
    }
}

/// Parse and validate a JSON configuration file. Parse failures carry the
/// offending field path and source location.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        CliError::Config(format!("{}: {}", e.path(), e.inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn vertex_values(mesh: &Mesh, v_dofs: &crate::fespace::DofMap, u_free: &[f64]) -> Vec<f64> {
    let full = v_dofs.expand(u_free);
    full[..mesh.n_vertices()].to_vec()
}

fn write_level_vtk(
    dir: &Path,
    tag: &str,
    mesh: &Mesh,
    v_dofs: &crate::fespace::DofMap,
    sol: &DiscreteSolution,
    indicator: &[f64],
) -> Result<(), CliError> {
    let u_vertices = vertex_values(mesh, v_dofs, &sol.u);
    output::write_vtk_point_scalar(&dir.join(format!("u{tag}.vtk")), mesh, "u", &u_vertices)?;
    output::write_vtk_cell_scalars(
        &dir.join(format!("lambda{tag}.vtk")),
        mesh,
        &[("lambda", &sol.lambda), ("indicator", indicator)],
    )?;
    Ok(())
}

fn report_lines(sol: &DiscreteSolution) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "converged: {}\niterations: {}\ncg solves: {}\ncg iterations: {}\noscillating: {}\n",
        sol.report.converged,
        sol.report.iterations,
        sol.report.cg_solves,
        sol.report.cg_iterations,
        sol.report.oscillating,
    ));
    s.push_str("lambda update norms:");
    for v in &sol.report.lambda_update_norms {
        s.push_str(&format!(" {v:.3e}"));
    }
    s.push('\n');
    s
}

/// Solve on the initial mesh and write u.vtk, lambda.vtk, table.csv and the
/// solver report. Nonzero exit when the iteration did not converge.
pub fn run_solve(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    ensure_dir(out)?;
    let exact = build_exact_solution();
    let data = exact.problem_data(cfg.effective_alpha(), cfg.degree);
    let conform = match cfg.family() {
        MeshFamily::Conforming => Some(exact.contact_radius),
        MeshFamily::Nonconforming => None,
    };
    let mesh = generate_disk_mesh(2.0, cfg.mesh.initial_h, conform)?;
    let (sol, v_dofs) = solve_benchmark(&mesh, &data, cfg.method.kind(), &cfg.solver_options())
        .map_err(|e| CliError::Solver(e.to_string()))?;
    let est = estimate(&sol, &mesh, &v_dofs, &data, cfg.method.kind().flavor());
    let ind = local_indicator(&sol, &mesh, &v_dofs, &data);
    write_level_vtk(out, "", &mesh, &v_dofs, &sol, &ind)?;

    let row = CsvRow {
        level: 0,
        h: mesh.h_max(),
        ndof_u: v_dofs.n_free(),
        ndof_lambda: mesh.n_triangles(),
        ring_vertices: count_ring(&mesh, exact.contact_radius),
        err_u_h1: error_h1(&sol.u, &mesh, &v_dofs, &exact),
        err_lambda_neg: error_lambda_neg(&sol.lambda, &mesh, &exact),
        eta: est.eta,
        s_term: est.s_term,
        iters: sol.report.iterations,
        ..Default::default()
    };
    output::write_csv(&out.join("table.csv"), &[row])?;
    std::fs::write(out.join("report.txt"), report_lines(&sol))?;
    if sol.report.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged)
    }
}

fn count_ring(mesh: &Mesh, radius: f64) -> usize {
    mesh.vertices()
        .iter()
        .filter(|p| ((p[0] * p[0] + p[1] * p[1]).sqrt() - radius).abs() <= 1e-12)
        .count()
}

/// Uniform-refinement study with per-level VTK output and the rate table.
pub fn run_converge(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    ensure_dir(out)?;
    let spec = cfg.study_spec();
    let data = build_exact_solution().problem_data(spec.alpha, spec.degree);
    let mut sink_err: Option<CliError> = None;
    let table = convergence_study_with(&spec, |level, mesh, sol, v_dofs, _est| {
        if sink_err.is_some() {
            return;
        }
        let ind = local_indicator(sol, mesh, v_dofs, &data);
        if let Err(e) = write_level_vtk(out, &format!("_{level:03}"), mesh, v_dofs, sol, &ind) {
            sink_err = Some(e);
        }
    })?;
    if let Some(e) = sink_err {
        return Err(e);
    }

    let ru = table.rates_u();
    let rl = table.rates_lambda();
    let rows: Vec<CsvRow> = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| CsvRow {
            level: r.level,
            h: r.h,
            ndof_u: r.ndof_u,
            ndof_lambda: r.ndof_lambda,
            ring_vertices: r.ring_vertices,
            err_u_h1: r.err_u_h1,
            err_lambda_neg: r.err_lambda_neg,
            eta: r.eta,
            s_term: r.s_term,
            rate_u: ru[i],
            rate_lambda: rl[i],
            slope_n: None,
            iters: r.iterations,
        })
        .collect();
    output::write_csv(&out.join("table.csv"), &rows)?;
    output::write_gnuplot(&out.join("plot.gp"), "table.csv")?;
    let mut report = String::new();
    for r in &rows {
        report.push_str(&format!(
            "level {}: h {:.5e} err_u {:.5e} err_lambda {:.5e} iters {}\n",
            r.level, r.h, r.err_u_h1, r.err_lambda_neg, r.iters
        ));
    }
    std::fs::write(out.join("report.txt"), report)?;
    Ok(())
}

/// Adaptive study: solve, estimate, bulk-mark and bisect until the dof
/// budget is exhausted. Stabilized method only.
pub fn run_adapt(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    if cfg.method != Method::Stabilized {
        return Err(CliError::Config(
            "method: the adaptive study requires the stabilized method".into(),
        ));
    }
    ensure_dir(out)?;
    let exact = build_exact_solution();
    let data = exact.problem_data(cfg.effective_alpha(), cfg.degree);
    let conform = match cfg.family() {
        MeshFamily::Conforming => Some(exact.contact_radius),
        MeshFamily::Nonconforming => None,
    };
    let opts = cfg.solver_options();
    let q = SpaceSpec::multiplier();

    let mut mesh = generate_disk_mesh(2.0, cfg.mesh.initial_h, conform)?;
    let mut lambda_prev: Option<Vec<f64>> = None;
    let mut rows: Vec<CsvRow> = Vec::new();
    let mut all_converged = true;

    for level in 0..1000 {
        let sys = assemble_stabilized(&mesh, &data.stabilized_space(), &q, &data);
        let sol = match (&lambda_prev, mesh.parent_elements()) {
            (Some(lp), Some(parents)) => {
                let lambda0: Vec<f64> = parents.iter().map(|&p| lp[p]).collect();
                pdas_stabilized_warm(&sys, &opts, &lambda0)
            }
            _ => crate::solver::pdas_stabilized(&sys, &opts),
        }
        .map_err(|e| CliError::Solver(e.to_string()))?;
        all_converged &= sol.report.converged;

        let est = estimate(&sol, &mesh, &sys.v_dofs, &data, MethodKind::Stabilized.flavor());
        let ind = local_indicator(&sol, &mesh, &sys.v_dofs, &data);
        write_level_vtk(out, &format!("_{level:03}"), &mesh, &sys.v_dofs, &sol, &ind)?;

        let n_total = sys.v_dofs.n_free() + mesh.n_triangles();
        let err_u = error_h1(&sol.u, &mesh, &sys.v_dofs, &exact);
        let slope_n = rows.last().and_then(|prev: &CsvRow| {
            let n_prev = prev.ndof_u + prev.ndof_lambda;
            if prev.err_u_h1 > 0.0 && err_u > 0.0 && n_prev != n_total {
                Some((err_u / prev.err_u_h1).ln() / (n_total as f64 / n_prev as f64).ln())
            } else {
                None
            }
        });
        rows.push(CsvRow {
            level,
            h: mesh.h_max(),
            ndof_u: sys.v_dofs.n_free(),
            ndof_lambda: mesh.n_triangles(),
            ring_vertices: count_ring(&mesh, exact.contact_radius),
            err_u_h1: err_u,
            err_lambda_neg: error_lambda_neg(&sol.lambda, &mesh, &exact),
            eta: est.eta,
            s_term: est.s_term,
            rate_u: None,
            rate_lambda: None,
            slope_n,
            iters: sol.report.iterations,
        });

        if n_total > cfg.dof_budget {
            break;
        }
        let marking = mark(&ind, cfg.theta);
        if marking.marked.is_empty() {
            break;
        }
        lambda_prev = Some(sol.lambda);
        mesh = mesh.refine_adaptive(&marking.marked)?;
    }

    output::write_csv(&out.join("table.csv"), &rows)?;
    output::write_gnuplot(&out.join("plot.gp"), "table.csv")?;
    let mut report = String::new();
    for r in &rows {
        report.push_str(&format!(
            "level {}: N {} err_u {:.5e} slope {:?} iters {}\n",
            r.level,
            r.ndof_u + r.ndof_lambda,
            r.err_u_h1,
            r.slope_n,
            r.iters
        ));
    }
    std::fs::write(out.join("report.txt"), report)?;
    if all_converged {
        Ok(())
    } else {
        Err(CliError::NotConverged)
    }
}

struct CheckOutcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn check_quadrature_exactness() -> CheckOutcome {
    let fact = |n: u32| (1..=n).map(|i| i as f64).product::<f64>().max(1.0);
    let mut worst = 0.0f64;
    for order in [1usize, 2, 4, 6] {
        let rule = quadrature_rule(order).unwrap();
        for p in 0..=(order as u32) {
            for q in 0..=(order as u32 - p) {
                let num: f64 = rule
                    .points()
                    .iter()
                    .zip(rule.weights())
                    .map(|(pt, w)| w * pt[1].powi(p as i32) * pt[2].powi(q as i32))
                    .sum();
                let exact = fact(p) * fact(q) / fact(p + q + 2);
                worst = worst.max((num - exact).abs());
            }
        }
    }
    CheckOutcome {
        name: "quadrature exactness",
        passed: worst < 1e-14,
        detail: format!("worst monomial defect {worst:.3e}"),
    }
}

fn check_basis() -> CheckOutcome {
    let geo = ElementGeometry::from_coords([[0.1, 0.0], [1.2, 0.3], [0.4, 1.1]]);
    let mut worst_pu = 0.0f64;
    let mut worst_grad = 0.0f64;
    let pts = [[0.2, 0.3, 0.5], [0.6, 0.3, 0.1], [1.0 / 3.0; 3]];
    for family in [Family::P1, Family::P2, Family::P1Bubble, Family::P2Bubble] {
        let n_poly = match family {
            Family::P1 | Family::P1Bubble => 3,
            _ => 6,
        };
        for b in pts {
            let basis = eval_basis(family, &geo, b);
            let s: f64 = basis.iter().take(n_poly).map(|v| v.value).sum();
            worst_pu = worst_pu.max((s - 1.0).abs());
            let x = geo.point(b);
            let h = 1e-7;
            for i in 0..basis.len() {
                for dir in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[dir] += h;
                    xm[dir] -= h;
                    let vp = eval_basis(family, &geo, geo.barycentric(xp))[i].value;
                    let vm = eval_basis(family, &geo, geo.barycentric(xm))[i].value;
                    worst_grad =
                        worst_grad.max(((vp - vm) / (2.0 * h) - basis[i].grad[dir]).abs());
                }
            }
        }
    }
    CheckOutcome {
        name: "basis partition of unity and gradients",
        passed: worst_pu < 1e-12 && worst_grad < 1e-6,
        detail: format!("partition defect {worst_pu:.3e}, gradient defect {worst_grad:.3e}"),
    }
}

fn check_determinism(data: &ProblemData, mesh: &Mesh) -> CheckOutcome {
    let v = data.stabilized_space();
    let q = SpaceSpec::multiplier();
    let s1 = assemble_stabilized(mesh, &v, &q, data);
    let s2 = assemble_stabilized(mesh, &v, &q, data);
    let same = s1.a_alpha == s2.a_alpha
        && s1.b_alpha == s2.b_alpha
        && s1.f_alpha == s2.f_alpha
        && s1.g_alpha == s2.g_alpha
        && s1.c_alpha == s2.c_alpha;
    CheckOutcome {
        name: "assembly determinism",
        passed: same,
        detail: if same { "bit-identical reassembly".into() } else { "reassembly differs".into() },
    }
}

fn check_quadrature_audit(data: &ProblemData, mesh: &Mesh) -> CheckOutcome {
    let v = data.mixed_space();
    let q = SpaceSpec::multiplier();
    let s4 = crate::assembly::assemble_mixed_with_degree(mesh, &v, &q, data, 4);
    let s6 = crate::assembly::assemble_mixed_with_degree(mesh, &v, &q, data, 6);
    let entry = |m: &crate::linalg::SparseMatrix, i: usize, j: usize| -> f64 {
        let (cols, vals) = m.row(i);
        cols.binary_search(&j).map(|p| vals[p]).unwrap_or(0.0)
    };
    let mut worst = 0.0f64;
    for i in 0..s4.a.nrows() {
        let (cols, vals) = s4.a.row(i);
        for (c, v) in cols.iter().zip(vals) {
            worst = worst.max((v - entry(&s6.a, i, *c)).abs());
        }
    }
    for i in 0..s4.b.nrows() {
        let (cols, vals) = s4.b.row(i);
        for (c, v) in cols.iter().zip(vals) {
            worst = worst.max((v - entry(&s6.b, i, *c)).abs());
        }
    }
    CheckOutcome {
        name: "quadrature degree audit",
        passed: worst <= 1e-12,
        detail: format!("largest entry change {worst:.3e}"),
    }
}

fn check_kkt(cfg: &RunConfig, data: &ProblemData, mesh: &Mesh) -> CheckOutcome {
    let opts = cfg.solver_options();
    let q = SpaceSpec::multiplier();
    match cfg.method {
        Method::Mixed => {
            let sys = assemble_mixed(mesh, &data.mixed_space(), &q, data);
            match crate::solver::pdas_mixed(&sys, &opts) {
                Ok(sol) => {
                    let r = kkt_check_mixed(&sol, &sys);
                    let scale = 1.0 + sol.lambda.iter().cloned().fold(0.0, f64::max);
                    let ok = sol.report.converged
                        && r.primal <= 1e-9 * scale
                        && r.dual <= 1e-12
                        && r.complementarity <= 1e-9 * scale;
                    CheckOutcome {
                        name: "solve and KKT residuals",
                        passed: ok,
                        detail: format!(
                            "primal {:.2e} dual {:.2e} comp {:.2e}",
                            r.primal, r.dual, r.complementarity
                        ),
                    }
                }
                Err(e) => CheckOutcome {
                    name: "solve and KKT residuals",
                    passed: false,
                    detail: e.to_string(),
                },
            }
        }
        Method::Stabilized => {
            let sys = assemble_stabilized(mesh, &data.stabilized_space(), &q, data);
            match crate::solver::pdas_stabilized(&sys, &opts) {
                Ok(sol) => {
                    let r = kkt_check_stabilized(&sol, &sys);
                    let scale = 1.0 + sol.lambda.iter().cloned().fold(0.0, f64::max);
                    let ok = sol.report.converged
                        && r.primal <= 1e-9 * scale
                        && r.dual <= 1e-12
                        && r.complementarity <= 1e-9 * scale;
                    CheckOutcome {
                        name: "solve and KKT residuals",
                        passed: ok,
                        detail: format!(
                            "primal {:.2e} dual {:.2e} comp {:.2e}",
                            r.primal, r.dual, r.complementarity
                        ),
                    }
                }
                Err(e) => CheckOutcome {
                    name: "solve and KKT residuals",
                    passed: false,
                    detail: e.to_string(),
                },
            }
        }
        Method::Nitsche => match crate::solver::nitsche_solve(mesh, data, &opts) {
            Ok(sol) => CheckOutcome {
                name: "solve and KKT residuals",
                passed: sol.report.converged && sol.lambda.iter().all(|&l| l >= 0.0),
                detail: format!(
                    "converged {}, nonnegative contact force {}",
                    sol.report.converged,
                    sol.lambda.iter().all(|&l| l >= 0.0)
                ),
            },
            Err(e) => CheckOutcome {
                name: "solve and KKT residuals",
                passed: false,
                detail: e.to_string(),
            },
        },
    }
}

fn check_infsup() -> (CheckOutcome, String) {
    let v = SpaceSpec::displacement(Family::P1Bubble);
    let q = SpaceSpec::multiplier();
    let mut mesh = generate_disk_mesh(2.0, 1.9, None).unwrap();
    let mut betas = Vec::new();
    let mut rowtext = String::new();
    for level in 0..3 {
        match infsup_diagnostic(&mesh, &v, &q) {
            Ok(beta) => {
                rowtext.push_str(&format!("inf-sup (bubble pair) level {level}: beta_h = {beta:.6}\n"));
                betas.push(beta);
            }
            Err(e) => {
                return (
                    CheckOutcome {
                        name: "inf-sup floor",
                        passed: false,
                        detail: e.to_string(),
                    },
                    rowtext,
                );
            }
        }
        if level < 2 {
            mesh = mesh.refine_uniform();
        }
    }
    let floor_ok = betas.iter().all(|b| *b >= 0.8 * betas[0]);
    (
        CheckOutcome {
            name: "inf-sup floor",
            passed: floor_ok,
            detail: format!("beta_h = {betas:?}"),
        },
        rowtext,
    )
}

/// Run the property checks and persist a report; exit status 3 when any
/// check fails. An out-of-range stabilization parameter is recorded as a
/// warning, not a failure.
pub fn run_check(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    ensure_dir(out)?;
    let exact = build_exact_solution();
    let data = exact.problem_data(cfg.effective_alpha(), cfg.degree);
    let mesh = generate_disk_mesh(2.0, 0.9, None)?;

    let mut outcomes = vec![
        check_quadrature_exactness(),
        check_basis(),
        check_determinism(&data, &mesh),
        check_quadrature_audit(&data, &mesh),
        check_kkt(cfg, &data, &mesh),
    ];
    let (infsup_outcome, infsup_rows) = check_infsup();
    outcomes.push(infsup_outcome);

    let mut warnings = Vec::new();
    if cfg.method != Method::Mixed {
        let ci = inverse_constant_estimate(&mesh, &data.stabilized_space())
            .map_err(|e| CliError::Solver(e.to_string()))?;
        if cfg.effective_alpha() >= ci {
            warnings.push(format!(
                "alpha-range warning: alpha = {} is not below the inverse-constant estimate {ci:.4}; \
                 the stabilized form may lose coercivity",
                cfg.effective_alpha()
            ));
        }
    }

    let mut text = String::new();
    let mut failures = 0;
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failures += 1;
        }
        let line = format!("CHECK {:<40} {status}  {}\n", o.name, o.detail);
        print!("{line}");
        text.push_str(&line);
    }
    text.push_str(&infsup_rows);
    print!("{infsup_rows}");
    for w in &warnings {
        let line = format!("WARN {w}\n");
        print!("{line}");
        text.push_str(&line);
    }
    std::fs::write(out.join("check_report.txt"), text)?;
    if failures > 0 {
        Err(CliError::CheckFailed(failures))
    } else {
        Ok(())
    }
}

/// Entry point shared by the binary: dispatch a subcommand with arguments.
pub fn run(args: &[String]) -> Result<(), CliError> {
    let usage = "usage: obstacle-fem <solve|converge|adapt|check> --config <path> [--out <dir>]";
    if args.is_empty() {
        return Err(CliError::Config(usage.into()));
    }
    let sub = args[0].as_str();
    let mut config_path: Option<PathBuf> = None;
    let mut out_dir: Option<PathBuf> = None;
    let mut i = 1;
    while i < args.len() {
        match args[i].as_str() {
            "--config" => {
                i += 1;
                config_path = Some(PathBuf::from(args.get(i).ok_or_else(|| {
                    CliError::Config("--config expects a path".into())
                })?));
            }
            "--out" => {
                i += 1;
                out_dir = Some(PathBuf::from(args.get(i).ok_or_else(|| {
                    CliError::Config("--out expects a directory".into())
                })?));
            }
            other => {
                return Err(CliError::Config(format!("unknown argument {other:?}; {usage}")));
            }
        }
        i += 1;
    }
    let config_path =
        config_path.ok_or_else(|| CliError::Config(format!("missing --config; {usage}")))?;
    let cfg = load_config(&config_path)?;
    let out = out_dir.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    match sub {
        "solve" => run_solve(&cfg, &out),
        "converge" => run_converge(&cfg, &out),
        "adapt" => run_adapt(&cfg, &out),
        "check" => run_check(&cfg, &out),
        other => Err(CliError::Config(format!("unknown subcommand {other:?}; {usage}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"method": "stabilized", "degree": 1}"#).unwrap();
        assert_eq!(cfg.effective_alpha(), 0.01);
        assert_eq!(cfg.theta, 0.9);
        cfg.validate().unwrap();

        let cfg: RunConfig =
            serde_json::from_str(r#"{"method": "stabilized", "degree": 2}"#).unwrap();
        assert_eq!(cfg.effective_alpha(), 0.1);

        let bad: Result<RunConfig, _> =
            serde_json::from_str(r#"{"method": "wrong", "degree": 1}"#);
        assert!(bad.is_err());

        let cfg: RunConfig = serde_json::from_str(
            r#"{"method": "stabilized", "degree": 1, "theta": 1.5}"#,
        )
        .unwrap();
        assert!(matches!(cfg.validate(), Err(CliError::Config(m)) if m.contains("theta")));
    }

    #[test]
    fn config_error_names_the_field() {
        let dir = std::env::temp_dir().join("obstacle-fem-cfg-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.json");
        std::fs::write(&path, r#"{"method": "zigzag", "degree": 1}"#).unwrap();
        let err = load_config(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("method"), "message should name the field: {msg}");
    }

    #[test]
    fn alpha_must_be_positive_for_stabilized() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"method": "stabilized", "degree": 1, "alpha": -0.5}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
        // the mixed method ignores alpha entirely
        let cfg: RunConfig =
            serde_json::from_str(r#"{"method": "mixed", "degree": 1, "alpha": -0.5}"#).unwrap();
        cfg.validate().unwrap();
    }
}
