//! Reference-element bases, quadrature rules and degree-of-freedom maps.
//!
//! Displacement spaces are continuous P1 or P2, optionally enriched with one
//! cubic bubble per element. The multiplier space is elementwise constant
//! (P0, discontinuous). Homogeneous Dirichlet constraints are expressed as a
//! per-dof mask plus a free-dof numbering.

use crate::mesh::Mesh;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum FeError {
    #[error("unsupported quadrature order {0} (supported: 1..=6)")]
    UnsupportedQuadratureOrder(usize),
    #[error("P0 space cannot carry Dirichlet constraints")]
    ConstrainedMultiplier,
    #[error("bubble enrichment is only available for displacement spaces")]
    BubbleMultiplier,
}

/// Finite element family on a triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    P1,
    P2,
    P1Bubble,
    P2Bubble,
    P0Disc,
}

impl Family {
    /// Local dofs per element.
    pub fn local_dofs(self) -> usize {
        match self {
            Family::P1 => 3,
            Family::P2 => 6,
            Family::P1Bubble => 4,
            Family::P2Bubble => 7,
            Family::P0Disc => 1,
        }
    }

    pub fn has_bubble(self) -> bool {
        matches!(self, Family::P1Bubble | Family::P2Bubble)
    }

    pub fn has_edge_dofs(self) -> bool {
        matches!(self, Family::P2 | Family::P2Bubble)
    }

    pub fn has_vertex_dofs(self) -> bool {
        !matches!(self, Family::P0Disc)
    }
}

/// A family together with its boundary-condition handling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceSpec {
    pub family: Family,
    pub dirichlet: bool,
}

impl SpaceSpec {
    pub fn new(family: Family, dirichlet: bool) -> Result<Self, FeError> {
        if family == Family::P0Disc && dirichlet {
            return Err(FeError::ConstrainedMultiplier);
        }
        Ok(SpaceSpec { family, dirichlet })
    }

    /// Displacement space with homogeneous Dirichlet conditions.
    pub fn displacement(family: Family) -> Self {
        assert!(family != Family::P0Disc, "P0 is not a displacement space");
        SpaceSpec { family, dirichlet: true }
    }

    /// The elementwise-constant multiplier space.
    pub fn multiplier() -> Self {
        SpaceSpec { family: Family::P0Disc, dirichlet: false }
    }
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Symmetric quadrature rule on the reference triangle.
///
/// Points are barycentric, weights sum to 1/2 (the reference area), and the
/// rule integrates bivariate polynomials up to `degree` exactly.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    degree: usize,
}

impl QuadratureRule {
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn perm3(points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>, a: f64, b: f64, w: f64) {
    points.push([a, b, b]);
    points.push([b, a, b]);
    points.push([b, b, a]);
    weights.extend_from_slice(&[w, w, w]);
}

/// Rule exact for all bivariate monomials of total degree <= `order`.
pub fn quadrature_rule(order: usize) -> Result<QuadratureRule, FeError> {
    let (points, weights, degree) = match order {
        1 => (vec![[1.0 / 3.0; 3]], vec![0.5], 1),
        2 => {
            let mut p = Vec::new();
            let mut w = Vec::new();
            perm3(&mut p, &mut w, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0);
            (p, w, 2)
        }
        3 | 4 => {
            // Dunavant degree 4, 6 points.
            let mut p = Vec::new();
            let mut w = Vec::new();
            let b1 = 0.44594849091596488632;
            perm3(&mut p, &mut w, 1.0 - 2.0 * b1, b1, 0.22338158967801146570 / 2.0);
            let b2 = 0.09157621350977074346;
            perm3(&mut p, &mut w, 1.0 - 2.0 * b2, b2, 0.10995174365532186764 / 2.0);
            (p, w, 4)
        }
        5 | 6 => {
            // Dunavant degree 6, 12 points.
            let mut p = Vec::new();
            let mut w = Vec::new();
            let b1 = 0.06308901449150222834;
            perm3(&mut p, &mut w, 1.0 - 2.0 * b1, b1, 0.05084490637020681692 / 2.0);
            let b2 = 0.24928674517091042129;
            perm3(&mut p, &mut w, 1.0 - 2.0 * b2, b2, 0.11678627572637936603 / 2.0);
            let (q1, q2) = (0.63650249912139864723, 0.31035245103378440542);
            let q3 = 1.0 - q1 - q2;
            let w3 = 0.08285107561837357519 / 2.0;
            for pt in [
                [q1, q2, q3],
                [q1, q3, q2],
                [q2, q1, q3],
                [q2, q3, q1],
                [q3, q1, q2],
                [q3, q2, q1],
            ] {
                p.push(pt);
                w.push(w3);
            }
            (p, w, 6)
        }
        _ => return Err(FeError::UnsupportedQuadratureOrder(order)),
    };
    Ok(QuadratureRule { points, weights, degree })
}

/// 3-point Gauss rule on the unit interval, exact to degree 5. Returned as
/// (t, weight) pairs.
pub fn edge_quadrature() -> [(f64, f64); 3] {
    let s = (3.0_f64 / 5.0).sqrt() / 2.0;
    [
        (0.5 - s, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 + s, 5.0 / 18.0),
    ]
}

// ---------------------------------------------------------------------------
// Element geometry (affine map data)
// ---------------------------------------------------------------------------

/// Affine geometry of one triangle: vertex coordinates, area and the constant
/// barycentric gradients.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub coords: [[f64; 2]; 3],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn from_coords(coords: [[f64; 2]; 3]) -> Self {
        let [p0, p1, p2] = coords;
        let area = 0.5
            * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]));
        let inv2a = 1.0 / (2.0 * area);
        let grad_lambda = [
            [(p1[1] - p2[1]) * inv2a, (p2[0] - p1[0]) * inv2a],
            [(p2[1] - p0[1]) * inv2a, (p0[0] - p2[0]) * inv2a],
            [(p0[1] - p1[1]) * inv2a, (p1[0] - p0[0]) * inv2a],
        ];
        ElementGeometry { coords, area, grad_lambda }
    }

    pub fn new(mesh: &Mesh, element: usize) -> Self {
        let tri = mesh.triangles()[element];
        let v = mesh.vertices();
        Self::from_coords([v[tri[0]], v[tri[1]], v[tri[2]]])
    }

    /// Physical coordinates of a barycentric point.
    pub fn point(&self, bary: [f64; 3]) -> [f64; 2] {
        let mut x = [0.0; 2];
        for i in 0..3 {
            x[0] += bary[i] * self.coords[i][0];
            x[1] += bary[i] * self.coords[i][1];
        }
        x
    }

    /// Barycentric coordinates of a physical point.
    pub fn barycentric(&self, x: [f64; 2]) -> [f64; 3] {
        let [p0, p1, p2] = self.coords;
        let inv2a = 1.0 / (2.0 * self.area);
        let l0 = ((p1[0] - x[0]) * (p2[1] - x[1]) - (p1[1] - x[1]) * (p2[0] - x[0])) * inv2a;
        let l1 = ((p2[0] - x[0]) * (p0[1] - x[1]) - (p2[1] - x[1]) * (p0[0] - x[0])) * inv2a;
        [l0, l1, 1.0 - l0 - l1]
    }
}

// ---------------------------------------------------------------------------
// Basis evaluation
// ---------------------------------------------------------------------------

/// Value, physical gradient and physical Laplacian of one shape function.
#[derive(Clone, Copy, Debug, Default)]
pub struct BasisValue {
    pub value: f64,
    pub grad: [f64; 2],
    pub laplacian: f64,
}

/// Fixed-capacity set of shape-function evaluations (at most 7 local dofs).
#[derive(Clone, Debug)]
pub struct BasisSet {
    n: usize,
    vals: [BasisValue; 7],
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, BasisValue> {
        self.vals[..self.n].iter()
    }
}

impl std::ops::Index<usize> for BasisSet {
    type Output = BasisValue;
    fn index(&self, i: usize) -> &BasisValue {
        &self.vals[..self.n][i]
    }
}

/// Evaluate all shape functions of `family` at a barycentric point.
///
/// Local ordering: vertex dofs first, then edge midpoints (edge i opposite
/// vertex i), then the element bubble. P1 Laplacians are exactly zero and P2
/// Laplacians are constant on the element.
pub fn eval_basis(family: Family, geo: &ElementGeometry, bary: [f64; 3]) -> BasisSet {
    let g = &geo.grad_lambda;
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let mut out = BasisSet { n: 0, vals: [BasisValue::default(); 7] };
    let push = |v: BasisValue, out: &mut BasisSet| {
        out.vals[out.n] = v;
        out.n += 1;
    };

    match family {
        Family::P0Disc => {
            push(BasisValue { value: 1.0, grad: [0.0, 0.0], laplacian: 0.0 }, &mut out);
        }
        Family::P1 | Family::P1Bubble => {
            for i in 0..3 {
                push(
                    BasisValue { value: bary[i], grad: g[i], laplacian: 0.0 },
                    &mut out,
                );
            }
        }
        Family::P2 | Family::P2Bubble => {
            for i in 0..3 {
                let l = bary[i];
                push(
                    BasisValue {
                        value: l * (2.0 * l - 1.0),
                        grad: [(4.0 * l - 1.0) * g[i][0], (4.0 * l - 1.0) * g[i][1]],
                        laplacian: 4.0 * dot(g[i], g[i]),
                    },
                    &mut out,
                );
            }
            // Edge i is opposite vertex i, between vertices j and k.
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                let (lj, lk) = (bary[j], bary[k]);
                push(
                    BasisValue {
                        value: 4.0 * lj * lk,
                        grad: [
                            4.0 * (lj * g[k][0] + lk * g[j][0]),
                            4.0 * (lj * g[k][1] + lk * g[j][1]),
                        ],
                        laplacian: 8.0 * dot(g[j], g[k]),
                    },
                    &mut out,
                );
            }
        }
    }

    if family.has_bubble() {
        let [l0, l1, l2] = bary;
        push(
            BasisValue {
                value: 27.0 * l0 * l1 * l2,
                grad: [
                    27.0 * (l1 * l2 * g[0][0] + l0 * l2 * g[1][0] + l0 * l1 * g[2][0]),
                    27.0 * (l1 * l2 * g[0][1] + l0 * l2 * g[1][1] + l0 * l1 * g[2][1]),
                ],
                laplacian: 54.0
                    * (l0 * dot(g[1], g[2]) + l1 * dot(g[0], g[2]) + l2 * dot(g[0], g[1])),
            },
            &mut out,
        );
    }

    out
}

// ---------------------------------------------------------------------------
// Dof maps
// ---------------------------------------------------------------------------

/// Geometric carrier of a global dof.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofKind {
    Vertex(usize),
    EdgeMid(usize),
    Bubble(usize),
    ElementConst(usize),
}

/// Global dof numbering with Dirichlet bookkeeping.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub spec: SpaceSpec,
    n_dofs: usize,
    n_free: usize,
    element_dofs: Vec<usize>,
    local_count: usize,
    kinds: Vec<DofKind>,
    constrained: Vec<bool>,
    free_index: Vec<Option<usize>>,
}

impl DofMap {
    pub fn build(mesh: &Mesh, spec: &SpaceSpec) -> DofMap {
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let nt = mesh.n_triangles();
        let fam = spec.family;

        let vertex_base = 0usize;
        let edge_base = if fam.has_vertex_dofs() { nv } else { 0 };
        let bubble_base = edge_base + if fam.has_edge_dofs() { ne } else { 0 };

        let n_dofs = match fam {
            Family::P0Disc => nt,
            Family::P1 => nv,
            Family::P2 => nv + ne,
            Family::P1Bubble => nv + nt,
            Family::P2Bubble => nv + ne + nt,
        };

        let mut kinds = Vec::with_capacity(n_dofs);
        match fam {
            Family::P0Disc => kinds.extend((0..nt).map(DofKind::ElementConst)),
            _ => {
                kinds.extend((0..nv).map(DofKind::Vertex));
                if fam.has_edge_dofs() {
                    kinds.extend((0..ne).map(DofKind::EdgeMid));
                }
                if fam.has_bubble() {
                    kinds.extend((0..nt).map(DofKind::Bubble));
                }
            }
        }

        let mut constrained = vec![false; n_dofs];
        if spec.dirichlet {
            for v in 0..nv {
                if mesh.is_boundary_vertex(v) {
                    constrained[vertex_base + v] = true;
                }
            }
            if fam.has_edge_dofs() {
                for e in 0..ne {
                    if mesh.is_boundary_edge(e) {
                        constrained[edge_base + e] = true;
                    }
                }
            }
        }

        let mut free_index = vec![None; n_dofs];
        let mut n_free = 0;
        for d in 0..n_dofs {
            if !constrained[d] {
                free_index[d] = Some(n_free);
                n_free += 1;
            }
        }

        let local_count = fam.local_dofs();
        let mut element_dofs = Vec::with_capacity(nt * local_count);
        for k in 0..nt {
            match fam {
                Family::P0Disc => element_dofs.push(k),
                _ => {
                    let tri = mesh.triangles()[k];
                    element_dofs.extend(tri.iter().map(|&v| vertex_base + v));
                    if fam.has_edge_dofs() {
                        let edges = mesh.triangle_edges(k);
                        element_dofs.extend(edges.iter().map(|&e| edge_base + e));
                    }
                    if fam.has_bubble() {
                        element_dofs.push(bubble_base + k);
                    }
                }
            }
        }

        DofMap {
            spec: *spec,
            n_dofs,
            n_free,
            element_dofs,
            local_count,
            kinds,
            constrained,
            free_index,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn element_dofs(&self, element: usize) -> &[usize] {
        let s = element * self.local_count;
        &self.element_dofs[s..s + self.local_count]
    }

    pub fn kind(&self, dof: usize) -> DofKind {
        self.kinds[dof]
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.free_index[dof]
    }

    /// Scatter a free-dof vector into a full-dof vector, zeros on the
    /// constrained entries.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        assert_eq!(free.len(), self.n_free);
        let mut full = vec![0.0; self.n_dofs];
        for d in 0..self.n_dofs {
            if let Some(i) = self.free_index[d] {
                full[d] = free[i];
            }
        }
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.n_dofs);
        let mut free = vec![0.0; self.n_free];
        for d in 0..self.n_dofs {
            if let Some(i) = self.free_index[d] {
                free[i] = full[d];
            }
        }
        free
    }
}

/// A finite element function given by a full coefficient vector.
pub struct FieldEval<'a> {
    mesh: &'a Mesh,
    dofs: &'a DofMap,
    coeffs: Vec<f64>,
}

impl<'a> FieldEval<'a> {
    /// Wrap a free-dof solution vector; constrained dofs are zero.
    pub fn from_free(mesh: &'a Mesh, dofs: &'a DofMap, free: &[f64]) -> FieldEval<'a> {
        FieldEval { mesh, dofs, coeffs: dofs.expand(free) }
    }

    pub fn from_full(mesh: &'a Mesh, dofs: &'a DofMap, coeffs: Vec<f64>) -> FieldEval<'a> {
        assert_eq!(coeffs.len(), dofs.n_dofs());
        FieldEval { mesh, dofs, coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Value, gradient and Laplacian at a barycentric point of an element.
    pub fn eval(&self, element: usize, geo: &ElementGeometry, bary: [f64; 3]) -> BasisValue {
        let basis = eval_basis(self.dofs.spec.family, geo, bary);
        let dofs = self.dofs.element_dofs(element);
        let mut out = BasisValue::default();
        for (i, &d) in dofs.iter().enumerate() {
            let c = self.coeffs[d];
            out.value += c * basis[i].value;
            out.grad[0] += c * basis[i].grad[0];
            out.grad[1] += c * basis[i].grad[1];
            out.laplacian += c * basis[i].laplacian;
        }
        out
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }
}
