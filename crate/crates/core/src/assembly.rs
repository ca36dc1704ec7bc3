//! Assembly of the mixed system (A, B, f, g) and the residual-stabilized
//! system (A_a, B_a, C_a, f_a, g_a) from mesh, spaces and problem data.
//!
//! Load and obstacle are sampled at quadrature points; Dirichlet dofs are
//! eliminated by dropping their rows and columns. Element loops may run on
//! several threads (`OBSTACLE_FEM_THREADS`), but contributions are merged in
//! a fixed element order so identical inputs produce bit-identical systems.

use crate::fespace::{
    eval_basis, quadrature_rule, DofMap, ElementGeometry, Family, QuadratureRule, SpaceSpec,
};
use crate::linalg::{CooBuilder, SparseMatrix};
use crate::mesh::Mesh;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type GradientField = Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>;

/// Load, obstacle and discretization parameters of one obstacle problem.
#[derive(Clone)]
pub struct ProblemData {
    pub load: ScalarField,
    pub obstacle: ScalarField,
    pub obstacle_grad: GradientField,
    pub alpha: f64,
    pub degree: u8,
}

impl ProblemData {
    pub fn new(
        load: ScalarField,
        obstacle: ScalarField,
        obstacle_grad: GradientField,
        alpha: f64,
        degree: u8,
    ) -> ProblemData {
        assert!(alpha >= 0.0, "stabilization parameter must be nonnegative");
        assert!(degree == 1 || degree == 2, "only degrees 1 and 2 are supported");
        ProblemData { load, obstacle, obstacle_grad, alpha, degree }
    }

    /// Constant load and obstacle, zero obstacle gradient. Test helper.
    pub fn constants(load: f64, obstacle: f64, alpha: f64, degree: u8) -> ProblemData {
        ProblemData::new(
            Arc::new(move |_, _| load),
            Arc::new(move |_, _| obstacle),
            Arc::new(|_, _| [0.0, 0.0]),
            alpha,
            degree,
        )
    }

    /// Displacement family for the given method.
    pub fn mixed_space(&self) -> SpaceSpec {
        SpaceSpec::displacement(if self.degree == 1 { Family::P1Bubble } else { Family::P2Bubble })
    }

    pub fn stabilized_space(&self) -> SpaceSpec {
        SpaceSpec::displacement(if self.degree == 1 { Family::P1 } else { Family::P2 })
    }
}

/// Algebraic form of the mixed method: A u - B^T lambda = f with the
/// constraint B u >= g.
#[derive(Clone, Debug)]
pub struct MixedSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub v_dofs: DofMap,
    pub q_dofs: DofMap,
}

/// Algebraic form of the stabilized method. `c_alpha` is the diagonal of the
/// elementwise multiplier block (one entry per element for P0 multipliers).
/// `a_spd` is the plain stiffness part of `a_alpha`; the solver uses it as a
/// preconditioner when the stabilized matrix is indefinite.
#[derive(Clone, Debug)]
pub struct StabilizedSystem {
    pub a_alpha: SparseMatrix,
    pub b_alpha: SparseMatrix,
    pub c_alpha: Vec<f64>,
    pub f_alpha: Vec<f64>,
    pub g_alpha: Vec<f64>,
    pub a_spd: SparseMatrix,
    pub v_dofs: DofMap,
    pub q_dofs: DofMap,
    pub alpha_per_element: Vec<f64>,
}

impl StabilizedSystem {
    pub fn c_alpha_matrix(&self) -> SparseMatrix {
        let m = self.c_alpha.len();
        let mut b = CooBuilder::new(m, m);
        for (i, &v) in self.c_alpha.iter().enumerate() {
            b.push(i, i, v);
        }
        b.build()
    }
}

fn thread_count() -> usize {
    std::env::var("OBSTACLE_FEM_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

const CHUNK: usize = 512;

/// Map element ranges to per-chunk outputs. Chunk boundaries are fixed, so
/// the collected outputs do not depend on the number of worker threads.
pub(crate) fn chunked_map<T, F>(n_items: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let n_chunks = n_items.div_ceil(CHUNK).max(1);
    let range = |c: usize| (c * CHUNK)..((c + 1) * CHUNK).min(n_items);
    if threads <= 1 || n_chunks <= 1 {
        return (0..n_chunks).map(|c| f(range(c))).collect();
    }
    let counter = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n_chunks).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..threads.min(n_chunks) {
            scope.spawn(|| loop {
                let c = counter.fetch_add(1, Ordering::Relaxed);
                if c >= n_chunks {
                    break;
                }
                let out = f(range(c));
                *slots[c].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("chunk worker panicked"))
        .collect()
}

fn check_obstacle_compatibility(mesh: &Mesh, data: &ProblemData) {
    if cfg!(debug_assertions) {
        for v in 0..mesh.n_vertices() {
            if mesh.is_boundary_vertex(v) {
                let p = mesh.vertices()[v];
                let g = (data.obstacle)(p[0], p[1]);
                debug_assert!(
                    g <= 1e-12,
                    "obstacle penetrates the boundary condition: g({}, {}) = {g}",
                    p[0],
                    p[1]
                );
            }
        }
    }
}

struct ChunkOut {
    a: Vec<(usize, usize, f64)>,
    b: Vec<(usize, usize, f64)>,
    f: Vec<(usize, f64)>,
    g: Vec<(usize, f64)>,
    // stabilized extras; empty for the mixed assembly
    c: Vec<(usize, f64)>,
    g_alpha: Vec<(usize, f64)>,
}

#[allow(clippy::too_many_arguments)]
fn assemble_element_range(
    mesh: &Mesh,
    v_dofs: &DofMap,
    rule: &QuadratureRule,
    data: &ProblemData,
    family: Family,
    alpha_of: Option<&(dyn Fn(usize) -> f64 + Sync)>,
    range: std::ops::Range<usize>,
) -> ChunkOut {
    let nl = family.local_dofs();
    let mut out = ChunkOut {
        a: Vec::new(),
        b: Vec::new(),
        f: Vec::new(),
        g: Vec::new(),
        c: Vec::new(),
        g_alpha: Vec::new(),
    };
    for k in range {
        let geo = ElementGeometry::new(mesh, k);
        let dofs = v_dofs.element_dofs(k);
        let area2 = 2.0 * geo.area;
        let rho2 = mesh.element_rho(k) * mesh.element_rho(k);
        let alpha_h2 = alpha_of.map(|a| a(k) * rho2);

        let mut a_loc = [[0.0f64; 7]; 7];
        let mut b_loc = [0.0f64; 7];
        let mut f_loc = [0.0f64; 7];
        let mut g_int = 0.0f64;
        let mut f_int = 0.0f64;

        for (pt, &w) in rule.points().iter().zip(rule.weights()) {
            let basis = eval_basis(family, &geo, *pt);
            let x = geo.point(*pt);
            let fv = (data.load)(x[0], x[1]);
            let gv = (data.obstacle)(x[0], x[1]);
            let wj = w * area2;
            for i in 0..nl {
                let bi = basis[i];
                for j in 0..nl {
                    let bj = basis[j];
                    let mut v = bi.grad[0] * bj.grad[0] + bi.grad[1] * bj.grad[1];
                    if let Some(ah2) = alpha_h2 {
                        // keep the product order symmetric in (i, j)
                        v -= ah2 * (bi.laplacian * bj.laplacian);
                    }
                    a_loc[i][j] += wj * v;
                }
                let mut bv = bi.value;
                if let Some(ah2) = alpha_h2 {
                    bv += ah2 * bi.laplacian;
                }
                b_loc[i] += wj * bv;
                let mut fvi = fv * bi.value;
                if let Some(ah2) = alpha_h2 {
                    fvi += ah2 * fv * bi.laplacian;
                }
                f_loc[i] += wj * fvi;
            }
            g_int += wj * gv;
            f_int += wj * fv;
        }

        for i in 0..nl {
            let Some(ri) = v_dofs.free_index(dofs[i]) else { continue };
            for j in 0..nl {
                if let Some(cj) = v_dofs.free_index(dofs[j]) {
                    out.a.push((ri, cj, a_loc[i][j]));
                }
            }
            out.b.push((k, ri, b_loc[i]));
            out.f.push((ri, f_loc[i]));
        }
        out.g.push((k, g_int));
        if let Some(ah2) = alpha_h2 {
            out.c.push((k, ah2 * geo.area));
            out.g_alpha.push((k, g_int - ah2 * f_int));
        }
    }
    out
}

/// dof maps, A, B, f, g, C diagonal and g_alpha of one assembly pass
type AssembledParts =
    (DofMap, DofMap, SparseMatrix, SparseMatrix, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

fn assemble_core(
    mesh: &Mesh,
    v_spec: &SpaceSpec,
    q_spec: &SpaceSpec,
    data: &ProblemData,
    quad_degree: usize,
    alpha_of: Option<&(dyn Fn(usize) -> f64 + Sync)>,
) -> AssembledParts {
    assert_eq!(q_spec.family, Family::P0Disc, "multiplier space must be P0");
    check_obstacle_compatibility(mesh, data);
    let v_dofs = DofMap::build(mesh, v_spec);
    let q_dofs = DofMap::build(mesh, q_spec);
    let rule = quadrature_rule(quad_degree).expect("assembly quadrature degree");
    let nt = mesh.n_triangles();
    let n_free = v_dofs.n_free();

    let chunks = chunked_map(nt, thread_count(), |range| {
        assemble_element_range(mesh, &v_dofs, &rule, data, v_spec.family, alpha_of, range)
    });

    let nl = v_spec.family.local_dofs();
    let mut a = CooBuilder::with_capacity(n_free, n_free, nt * nl * nl);
    let mut b = CooBuilder::with_capacity(nt, n_free, nt * nl);
    let mut f = vec![0.0; n_free];
    let mut g = vec![0.0; nt];
    let mut c = vec![0.0; nt];
    let mut g_alpha = vec![0.0; nt];
    for ch in chunks {
        for (i, j, v) in ch.a {
            a.push(i, j, v);
        }
        for (i, j, v) in ch.b {
            b.push(i, j, v);
        }
        for (i, v) in ch.f {
            f[i] += v;
        }
        for (i, v) in ch.g {
            g[i] += v;
        }
        for (i, v) in ch.c {
            c[i] += v;
        }
        for (i, v) in ch.g_alpha {
            g_alpha[i] += v;
        }
    }
    (v_dofs, q_dofs, a.build(), b.build(), f, g, c, g_alpha)
}

/// Assemble the mixed system with the default (degree 4) quadrature.
pub fn assemble_mixed(
    mesh: &Mesh,
    v_spec: &SpaceSpec,
    q_spec: &SpaceSpec,
    data: &ProblemData,
) -> MixedSystem {
    assemble_mixed_with_degree(mesh, v_spec, q_spec, data, 4)
}

pub fn assemble_mixed_with_degree(
    mesh: &Mesh,
    v_spec: &SpaceSpec,
    q_spec: &SpaceSpec,
    data: &ProblemData,
    quad_degree: usize,
) -> MixedSystem {
    let (v_dofs, q_dofs, a, b, f, g, _, _) =
        assemble_core(mesh, v_spec, q_spec, data, quad_degree, None);
    MixedSystem { a, b, f, g, v_dofs, q_dofs }
}

/// Assemble the stabilized system with the constant parameter `data.alpha`.
pub fn assemble_stabilized(
    mesh: &Mesh,
    v_spec: &SpaceSpec,
    q_spec: &SpaceSpec,
    data: &ProblemData,
) -> StabilizedSystem {
    let alpha = data.alpha;
    assert!(alpha > 0.0, "stabilized assembly needs alpha > 0");
    let alpha_k = vec![alpha; mesh.n_triangles()];
    assemble_stabilized_per_element(mesh, v_spec, q_spec, data, &alpha_k)
}

pub fn assemble_stabilized_with_degree(
    mesh: &Mesh,
    v_spec: &SpaceSpec,
    q_spec: &SpaceSpec,
    data: &ProblemData,
    quad_degree: usize,
) -> StabilizedSystem {
    let alpha_k = vec![data.alpha; mesh.n_triangles()];
    let alpha_of = move |k: usize| alpha_k[k];
    let (v_dofs, q_dofs, a, b, f, g, c, g_alpha) =
        assemble_core(mesh, v_spec, q_spec, data, quad_degree, Some(&alpha_of));
    let _ = g;
    let a_spd = spd_part(mesh, v_spec, &a);
    StabilizedSystem {
        a_alpha: a,
        b_alpha: b,
        c_alpha: c,
        f_alpha: f,
        g_alpha,
        a_spd,
        v_dofs,
        q_dofs,
        alpha_per_element: vec![data.alpha; mesh.n_triangles()],
    }
}

/// Plain stiffness on the same dof numbering; for families with vanishing
/// element Laplacians the stabilized matrix itself is that stiffness.
fn spd_part(mesh: &Mesh, v_spec: &SpaceSpec, a_alpha: &SparseMatrix) -> SparseMatrix {
    match v_spec.family {
        Family::P1 => a_alpha.clone(),
        _ => assemble_stiffness(mesh, v_spec).1,
    }
}

/// Stabilized assembly with an elementwise parameter. Used where a variable
/// parameter is induced, e.g. by static condensation of bubble dofs.
pub fn assemble_stabilized_per_element(
    mesh: &Mesh,
    v_spec: &SpaceSpec,
    q_spec: &SpaceSpec,
    data: &ProblemData,
    alpha_k: &[f64],
) -> StabilizedSystem {
    assert_eq!(alpha_k.len(), mesh.n_triangles());
    assert!(alpha_k.iter().all(|&a| a > 0.0));
    let alpha_of = |k: usize| alpha_k[k];
    let (v_dofs, q_dofs, a, b, f, g, c, g_alpha) =
        assemble_core(mesh, v_spec, q_spec, data, 4, Some(&alpha_of));
    let _ = g;
    let a_spd = spd_part(mesh, v_spec, &a);
    StabilizedSystem {
        a_alpha: a,
        b_alpha: b,
        c_alpha: c,
        f_alpha: f,
        g_alpha,
        a_spd,
        v_dofs,
        q_dofs,
        alpha_per_element: alpha_k.to_vec(),
    }
}

/// H1 Gram matrix (stiffness + mass) on the free displacement dofs.
/// Degree-6 quadrature so bubble products are integrated exactly.
pub fn assemble_h1_gram(mesh: &Mesh, v_spec: &SpaceSpec) -> SparseMatrix {
    let v_dofs = DofMap::build(mesh, v_spec);
    let rule = quadrature_rule(6).unwrap();
    let n_free = v_dofs.n_free();
    let nl = v_spec.family.local_dofs();
    let chunks = chunked_map(mesh.n_triangles(), thread_count(), |range| {
        let mut triplets = Vec::new();
        for k in range {
            let geo = ElementGeometry::new(mesh, k);
            let dofs = v_dofs.element_dofs(k);
            let mut loc = [[0.0f64; 7]; 7];
            for (pt, &w) in rule.points().iter().zip(rule.weights()) {
                let basis = eval_basis(v_spec.family, &geo, *pt);
                let wj = w * 2.0 * geo.area;
                for i in 0..nl {
                    for j in 0..nl {
                        loc[i][j] += wj
                            * (basis[i].grad[0] * basis[j].grad[0]
                                + basis[i].grad[1] * basis[j].grad[1]
                                + basis[i].value * basis[j].value);
                    }
                }
            }
            for i in 0..nl {
                let Some(ri) = v_dofs.free_index(dofs[i]) else { continue };
                for j in 0..nl {
                    if let Some(cj) = v_dofs.free_index(dofs[j]) {
                        triplets.push((ri, cj, loc[i][j]));
                    }
                }
            }
        }
        triplets
    });
    let mut b = CooBuilder::new(n_free, n_free);
    for ch in chunks {
        for (i, j, v) in ch {
            b.push(i, j, v);
        }
    }
    b.build()
}

/// Stiffness matrix (grad, grad) on the free displacement dofs.
pub fn assemble_stiffness(mesh: &Mesh, v_spec: &SpaceSpec) -> (DofMap, SparseMatrix) {
    let v_dofs = DofMap::build(mesh, v_spec);
    let rule = quadrature_rule(4).unwrap();
    let nl = v_spec.family.local_dofs();
    let mut b = CooBuilder::new(v_dofs.n_free(), v_dofs.n_free());
    for k in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, k);
        let dofs = v_dofs.element_dofs(k);
        let mut loc = [[0.0f64; 7]; 7];
        for (pt, &w) in rule.points().iter().zip(rule.weights()) {
            let basis = eval_basis(v_spec.family, &geo, *pt);
            let wj = w * 2.0 * geo.area;
            for i in 0..nl {
                for j in 0..nl {
                    loc[i][j] += wj
                        * (basis[i].grad[0] * basis[j].grad[0]
                            + basis[i].grad[1] * basis[j].grad[1]);
                }
            }
        }
        for i in 0..nl {
            let Some(ri) = v_dofs.free_index(dofs[i]) else { continue };
            for j in 0..nl {
                if let Some(cj) = v_dofs.free_index(dofs[j]) {
                    b.push(ri, cj, loc[i][j]);
                }
            }
        }
    }
    (v_dofs, b.build())
}

/// Coupling matrix (xi_K, phi_j) between the P0 multiplier basis and the
/// free displacement dofs, one row per element.
pub fn assemble_coupling(mesh: &Mesh, v_spec: &SpaceSpec) -> (DofMap, SparseMatrix) {
    let v_dofs = DofMap::build(mesh, v_spec);
    let rule = quadrature_rule(4).unwrap();
    let nl = v_spec.family.local_dofs();
    let mut b = CooBuilder::new(mesh.n_triangles(), v_dofs.n_free());
    for k in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, k);
        let dofs = v_dofs.element_dofs(k);
        let mut loc = [0.0f64; 7];
        for (pt, &w) in rule.points().iter().zip(rule.weights()) {
            let basis = eval_basis(v_spec.family, &geo, *pt);
            let wj = w * 2.0 * geo.area;
            for i in 0..nl {
                loc[i] += wj * basis[i].value;
            }
        }
        for i in 0..nl {
            if let Some(ri) = v_dofs.free_index(dofs[i]) {
                b.push(k, ri, loc[i]);
            }
        }
    }
    (v_dofs, b.build())
}

/// Gram matrix of the scaled element Laplacians on the free displacement
/// dofs, with the same length scale as the stabilization terms. Identically
/// zero for P1.
pub fn assemble_laplacian_gram(mesh: &Mesh, v_spec: &SpaceSpec) -> SparseMatrix {
    let v_dofs = DofMap::build(mesh, v_spec);
    let rule = quadrature_rule(4).unwrap();
    let n_free = v_dofs.n_free();
    let nl = v_spec.family.local_dofs();
    let mut b = CooBuilder::new(n_free, n_free);
    for k in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, k);
        let dofs = v_dofs.element_dofs(k);
        let h2 = mesh.element_rho(k) * mesh.element_rho(k);
        let mut loc = [[0.0f64; 7]; 7];
        for (pt, &w) in rule.points().iter().zip(rule.weights()) {
            let basis = eval_basis(v_spec.family, &geo, *pt);
            let wj = w * 2.0 * geo.area;
            for i in 0..nl {
                for j in 0..nl {
                    loc[i][j] += wj * h2 * basis[i].laplacian * basis[j].laplacian;
                }
            }
        }
        for i in 0..nl {
            let Some(ri) = v_dofs.free_index(dofs[i]) else { continue };
            for j in 0..nl {
                if let Some(cj) = v_dofs.free_index(dofs[j]) {
                    b.push(ri, cj, loc[i][j]);
                }
            }
        }
    }
    b.build()
}

/// Residual of the stabilization consistency identity: given elementwise
/// evaluable fields for the Laplacian of u and for lambda, returns the
/// largest test-dof value of
/// `alpha * sum_K h_K^2 (-Lap u - lambda - f, -Lap v - mu)_K`
/// over test dofs (v, 0) and (0, mu). Zero whenever -Lap u - lambda = f.
pub fn consistency_residual(
    mesh: &Mesh,
    v_spec: &SpaceSpec,
    q_spec: &SpaceSpec,
    data: &ProblemData,
    lap_u: &dyn Fn(f64, f64) -> f64,
    lambda: &dyn Fn(f64, f64) -> f64,
) -> f64 {
    assert_eq!(q_spec.family, Family::P0Disc);
    let v_dofs = DofMap::build(mesh, v_spec);
    let rule = quadrature_rule(4).unwrap();
    let nl = v_spec.family.local_dofs();
    let mut v_terms = vec![0.0; v_dofs.n_free()];
    let mut worst: f64 = 0.0;
    for k in 0..mesh.n_triangles() {
        let geo = ElementGeometry::new(mesh, k);
        let dofs = v_dofs.element_dofs(k);
        let h2 = mesh.element_rho(k) * mesh.element_rho(k);
        let mut q_term = 0.0;
        for (pt, &w) in rule.points().iter().zip(rule.weights()) {
            let basis = eval_basis(v_spec.family, &geo, *pt);
            let x = geo.point(*pt);
            let rho = -lap_u(x[0], x[1]) - lambda(x[0], x[1]) - (data.load)(x[0], x[1]);
            let wj = w * 2.0 * geo.area;
            for i in 0..nl {
                if let Some(ri) = v_dofs.free_index(dofs[i]) {
                    v_terms[ri] += data.alpha * h2 * wj * rho * (-basis[i].laplacian);
                }
            }
            q_term -= data.alpha * h2 * wj * rho;
        }
        worst = worst.max(q_term.abs());
    }
    for t in v_terms {
        worst = worst.max(t.abs());
    }
    worst
}
