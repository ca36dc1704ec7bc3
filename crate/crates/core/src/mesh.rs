//! Conforming triangulations of the disk with edge topology and refinement.
//!
//! Meshes are immutable after construction; both refinement operations return
//! a new mesh. Triangles are stored counterclockwise and the vertex order
//! encodes the newest-vertex-bisection state: the refinement edge of a
//! triangle is always the edge opposite its first vertex.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use thiserror::Error;

const VERTEX_TOL: f64 = 1e-12;

#[derive(Error, Debug)]
pub enum MeshError {
    #[error("invalid mesh size: {0}")]
    InvalidSize(String),
    #[error("conform radius {conform} must lie strictly inside the disk of radius {radius}")]
    ConformRadiusOutOfRange { conform: f64, radius: f64 },
    #[error("triangle {element} has non-positive area {area}")]
    NonPositiveArea { element: usize, area: f64 },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("edge ({0}, {1}) is traversed twice in the same direction (orientation conflict)")]
    InconsistentOrientation(usize, usize),
    #[error("edge ({0}, {1}) has one adjacent triangle but an endpoint is not flagged as boundary")]
    BoundaryFlagMismatch(usize, usize),
    #[error("vertex {vertex} hangs on edge ({0}, {1})", edge.0, edge.1)]
    HangingVertex { vertex: usize, edge: (usize, usize) },
    #[error("marked element {id} out of range (mesh has {n} elements)")]
    MarkedOutOfRange { id: usize, n: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("mesh file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One edge of the triangulation. `left` is the triangle traversing the edge
/// from `v[0]` to `v[1]` in its counterclockwise boundary, `right` the one
/// traversing it the other way. Boundary edges have exactly one neighbor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeInfo {
    pub v: [usize; 2],
    pub left: Option<usize>,
    pub right: Option<usize>,
}

impl EdgeInfo {
    pub fn is_boundary(&self) -> bool {
        self.left.is_none() || self.right.is_none()
    }
}

/// Interior-edge record with the quantities needed by edge-jump integrals.
/// The unit normal points from the left element into the right one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteriorEdge {
    pub edge: usize,
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: usize,
    pub length: f64,
    pub normal: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    conform_vertex: Vec<bool>,
    generation: Vec<u32>,
    boundary_radius: Option<f64>,
    conform_radius: Option<f64>,
    edges: Vec<EdgeInfo>,
    triangle_edges: Vec<[usize; 3]>,
    interior: Vec<InteriorEdge>,
    h: Vec<f64>,
    /// per-element parent in the mesh this one was refined from
    parent: Option<Vec<usize>>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn signed_area(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> f64 {
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]))
}

/// Rotate the vertex triple so that the longest edge sits opposite the first
/// vertex. Ties break toward the lowest local index, which keeps the choice
/// deterministic.
fn rotate_longest_edge(vertices: &[[f64; 2]], tri: [usize; 3]) -> [usize; 3] {
    let mut best = 0usize;
    let mut best_len = -1.0;
    for i in 0..3 {
        let a = vertices[tri[(i + 1) % 3]];
        let b = vertices[tri[(i + 2) % 3]];
        let len = dist(a, b);
        if len > best_len {
            best_len = len;
            best = i;
        }
    }
    [tri[best], tri[(best + 1) % 3], tri[(best + 2) % 3]]
}

impl Mesh {
    /// Build a mesh from raw parts, validating orientation and conformity.
    /// Triangles are re-rotated so the refinement edge is the longest edge.
    pub fn from_parts(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_vertex: Vec<bool>,
    ) -> Result<Mesh, MeshError> {
        let n = vertices.len();
        let triangles: Vec<[usize; 3]> = triangles
            .into_iter()
            .map(|t| rotate_longest_edge(&vertices, t))
            .collect();
        let gen = vec![0; triangles.len()];
        Mesh::assemble(
            vertices,
            triangles,
            boundary_vertex,
            vec![false; n],
            gen,
            None,
            None,
            None,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary_vertex: Vec<bool>,
        conform_vertex: Vec<bool>,
        generation: Vec<u32>,
        boundary_radius: Option<f64>,
        conform_radius: Option<f64>,
        parent: Option<Vec<usize>>,
    ) -> Result<Mesh, MeshError> {
        assert_eq!(boundary_vertex.len(), vertices.len());
        assert_eq!(conform_vertex.len(), vertices.len());
        assert_eq!(generation.len(), triangles.len());

        let mut h = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            let (p0, p1, p2) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            let area = signed_area(p0, p1, p2);
            if area <= 0.0 {
                return Err(MeshError::NonPositiveArea { element: k, area });
            }
            h.push(dist(p0, p1).max(dist(p1, p2)).max(dist(p2, p0)));
        }

        // Edge table. Local edge i of a triangle is the edge opposite local
        // vertex i, traversed counterclockwise.
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<EdgeInfo> = Vec::new();
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];
        for (k, t) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = t[(i + 1) % 3];
                let b = t[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(EdgeInfo { v: [key.0, key.1], left: None, right: None });
                    edges.len() - 1
                });
                triangle_edges[k][i] = id;
                let slot = if (a, b) == (key.0, key.1) {
                    &mut edges[id].left
                } else {
                    &mut edges[id].right
                };
                match slot {
                    Some(_) => {
                        // Same direction twice means either a third triangle
                        // or a flipped one.
                        let other = if edges[id].left.is_some() && edges[id].right.is_some() {
                            return Err(MeshError::NonManifoldEdge(key.0, key.1));
                        } else {
                            MeshError::InconsistentOrientation(key.0, key.1)
                        };
                        return Err(other);
                    }
                    None => *slot = Some(k),
                }
            }
        }

        let mut interior = Vec::new();
        for (id, e) in edges.iter().enumerate() {
            match (e.left, e.right) {
                (Some(l), Some(r)) => {
                    let (a, b) = (vertices[e.v[0]], vertices[e.v[1]]);
                    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                    let len = (dx * dx + dy * dy).sqrt();
                    interior.push(InteriorEdge {
                        edge: id,
                        vertices: e.v,
                        left: l,
                        right: r,
                        length: len,
                        normal: [dy / len, -dx / len],
                    });
                }
                _ => {
                    if !boundary_vertex[e.v[0]] || !boundary_vertex[e.v[1]] {
                        return Err(MeshError::BoundaryFlagMismatch(e.v[0], e.v[1]));
                    }
                }
            }
        }

        Ok(Mesh {
            vertices,
            triangles,
            boundary_vertex,
            conform_vertex,
            generation,
            boundary_radius,
            conform_radius,
            edges,
            triangle_edges,
            interior,
            h,
            parent,
        })
    }

    /// For refined meshes, the element each triangle descends from in the
    /// mesh that was refined. None for generated or deserialized meshes.
    pub fn parent_elements(&self) -> Option<&[usize]> {
        self.parent.as_deref()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edges[e].is_boundary()
    }

    pub fn edges(&self) -> &[EdgeInfo] {
        &self.edges
    }

    /// Edge ids of a triangle; entry i is the edge opposite local vertex i.
    pub fn triangle_edges(&self, k: usize) -> [usize; 3] {
        self.triangle_edges[k]
    }

    /// The interior-edge table (each edge once, with left/right elements,
    /// length and the left-to-right unit normal).
    pub fn interior_edges(&self) -> &[InteriorEdge] {
        &self.interior
    }

    /// Longest edge of element k.
    pub fn element_h(&self, k: usize) -> f64 {
        self.h[k]
    }

    /// Inradius of element k: area over semiperimeter. Used as the length
    /// scale of the residual stabilization, where a shape-uniform inverse
    /// estimate is needed; the refinement indicators and discrete norms use
    /// the element diameter `element_h`.
    pub fn element_rho(&self, k: usize) -> f64 {
        let t = self.triangles[k];
        let (a, b, c) = (self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]);
        let s = 0.5 * (dist(a, b) + dist(b, c) + dist(c, a));
        self.triangle_area(k) / s
    }

    pub fn element_diameters(&self) -> &[f64] {
        &self.h
    }

    pub fn h_max(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn generation(&self, k: usize) -> u32 {
        self.generation[k]
    }

    pub fn conform_radius(&self) -> Option<f64> {
        self.conform_radius
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        let t = self.triangles[k];
        signed_area(self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|k| self.triangle_area(k)).sum()
    }

    pub fn element_centroid(&self, k: usize) -> [f64; 2] {
        let t = self.triangles[k];
        let (a, b, c) = (self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Smallest interior angle over all triangles, in radians.
    pub fn min_angle(&self) -> f64 {
        let mut min = f64::MAX;
        for t in &self.triangles {
            for i in 0..3 {
                let p = self.vertices[t[i]];
                let a = self.vertices[t[(i + 1) % 3]];
                let b = self.vertices[t[(i + 2) % 3]];
                let u = [a[0] - p[0], a[1] - p[1]];
                let v = [b[0] - p[0], b[1] - p[1]];
                let cosang = (u[0] * v[0] + u[1] * v[1])
                    / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
                min = min.min(cosang.clamp(-1.0, 1.0).acos());
            }
        }
        min
    }

    /// Geometric hanging-node audit: no vertex may lie strictly inside a
    /// boundary-candidate edge. Quadratic cost, intended for tests and checks.
    pub fn audit_conformity(&self) -> Result<(), MeshError> {
        for e in &self.edges {
            if !e.is_boundary() {
                continue;
            }
            let (a, b) = (self.vertices[e.v[0]], self.vertices[e.v[1]]);
            let len = dist(a, b);
            for (v, &p) in self.vertices.iter().enumerate() {
                if v == e.v[0] || v == e.v[1] {
                    continue;
                }
                let da = dist(a, p);
                let db = dist(b, p);
                if (da + db - len).abs() <= 1e-9 * len && da > 1e-9 * len && db > 1e-9 * len {
                    return Err(MeshError::HangingVertex { vertex: v, edge: (e.v[0], e.v[1]) });
                }
            }
        }
        Ok(())
    }

    fn project_to_circle(p: [f64; 2], radius: f64) -> [f64; 2] {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if r < 1e-14 {
            return p;
        }
        [p[0] * radius / r, p[1] * radius / r]
    }

    fn edge_midpoint(&self, e: &EdgeInfo) -> ([f64; 2], bool, bool) {
        let (a, b) = (self.vertices[e.v[0]], self.vertices[e.v[1]]);
        let mut m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let on_conform = self.conform_vertex[e.v[0]] && self.conform_vertex[e.v[1]];
        let on_boundary = e.is_boundary();
        if on_conform {
            if let Some(rc) = self.conform_radius {
                m = Self::project_to_circle(m, rc);
            }
        } else if on_boundary {
            if let Some(rb) = self.boundary_radius {
                m = Self::project_to_circle(m, rb);
            }
        }
        (m, on_boundary, on_conform)
    }

    /// Red refinement: each triangle is split into four via edge midpoints.
    /// Midpoints of boundary edges are projected radially back onto the
    /// circle, midpoints of conform-circle edges onto that circle.
    pub fn refine_uniform(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut boundary = self.boundary_vertex.clone();
        let mut conform = self.conform_vertex.clone();

        let mut edge_mid = vec![usize::MAX; self.edges.len()];
        for (id, e) in self.edges.iter().enumerate() {
            let (m, on_b, on_c) = self.edge_midpoint(e);
            edge_mid[id] = vertices.len();
            vertices.push(m);
            boundary.push(on_b);
            conform.push(on_c);
        }

        let mut triangles = Vec::with_capacity(4 * self.n_triangles());
        let mut generation = Vec::with_capacity(4 * self.n_triangles());
        let mut parent = Vec::with_capacity(4 * self.n_triangles());
        for (k, t) in self.triangles.iter().enumerate() {
            let e = self.triangle_edges[k];
            // midpoint of the edge joining local vertices i and j is the
            // midpoint of the edge opposite the remaining vertex
            let m01 = edge_mid[e[2]];
            let m12 = edge_mid[e[0]];
            let m20 = edge_mid[e[1]];
            for child in [
                [t[0], m01, m20],
                [t[1], m12, m01],
                [t[2], m20, m12],
                [m01, m12, m20],
            ] {
                triangles.push(rotate_longest_edge(&vertices, child));
                generation.push(self.generation[k] + 1);
                parent.push(k);
            }
        }

        Mesh::assemble(
            vertices,
            triangles,
            boundary,
            conform,
            generation,
            self.boundary_radius,
            self.conform_radius,
            Some(parent),
        )
        .expect("red refinement of a valid mesh stays valid")
    }

    /// Newest-vertex bisection of the marked elements plus conformity
    /// closure. An empty marked set returns an identical mesh.
    pub fn refine_adaptive(&self, marked: &[usize]) -> Result<Mesh, MeshError> {
        for &id in marked {
            if id >= self.n_triangles() {
                return Err(MeshError::MarkedOutOfRange { id, n: self.n_triangles() });
            }
        }
        if marked.is_empty() {
            return Ok(self.clone());
        }
        let mut selected = vec![false; self.n_triangles()];
        for &id in marked {
            selected[id] = true;
        }

        // Closure: a triangle must bisect whenever any of its edges is split,
        // and bisection always splits the refinement edge first.
        let mut split = vec![false; self.edges.len()];
        loop {
            let mut changed = false;
            for k in 0..self.n_triangles() {
                let e = self.triangle_edges[k];
                let needs = selected[k] || e.iter().any(|&id| split[id]);
                if needs && !split[e[0]] {
                    split[e[0]] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut vertices = self.vertices.clone();
        let mut boundary = self.boundary_vertex.clone();
        let mut conform = self.conform_vertex.clone();
        let mut edge_mid = vec![usize::MAX; self.edges.len()];
        for (id, e) in self.edges.iter().enumerate() {
            if !split[id] {
                continue;
            }
            let (m, on_b, on_c) = self.edge_midpoint(e);
            edge_mid[id] = vertices.len();
            vertices.push(m);
            boundary.push(on_b);
            conform.push(on_c);
        }

        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        for (id, e) in self.edges.iter().enumerate() {
            edge_ids.insert((e.v[0], e.v[1]), id);
        }

        let mut triangles = Vec::new();
        let mut generation = Vec::new();
        let mut parent = Vec::new();
        // Bisect (p, a, b) at the midpoint of the refinement edge (a, b);
        // children keep the new vertex first. Recursion depth is at most two
        // because child refinement edges involving new vertices are never
        // split.
        #[allow(clippy::too_many_arguments)]
        fn bisect(
            tri: [usize; 3],
            gen: u32,
            root: usize,
            edge_ids: &HashMap<(usize, usize), usize>,
            edge_mid: &[usize],
            out_t: &mut Vec<[usize; 3]>,
            out_g: &mut Vec<u32>,
            out_p: &mut Vec<usize>,
        ) {
            let [p, a, b] = tri;
            let key = (a.min(b), a.max(b));
            let mid = edge_ids
                .get(&key)
                .map(|&id| edge_mid[id])
                .unwrap_or(usize::MAX);
            if mid == usize::MAX {
                out_t.push(tri);
                out_g.push(gen);
                out_p.push(root);
            } else {
                bisect([mid, p, a], gen + 1, root, edge_ids, edge_mid, out_t, out_g, out_p);
                bisect([mid, b, p], gen + 1, root, edge_ids, edge_mid, out_t, out_g, out_p);
            }
        }
        for (k, t) in self.triangles.iter().enumerate() {
            bisect(
                *t,
                self.generation[k],
                k,
                &edge_ids,
                &edge_mid,
                &mut triangles,
                &mut generation,
                &mut parent,
            );
        }

        Mesh::assemble(
            vertices,
            triangles,
            boundary,
            conform,
            generation,
            self.boundary_radius,
            self.conform_radius,
            Some(parent),
        )
    }

    // -----------------------------------------------------------------
    // Plain-text format
    // -----------------------------------------------------------------

    /// Write the "obstacle-mesh v1" plain-text format.
    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<(), MeshError> {
        writeln!(w, "obstacle-mesh v1")?;
        writeln!(w, "{}", self.n_vertices())?;
        for (v, p) in self.vertices.iter().enumerate() {
            writeln!(
                w,
                "{:.16e} {:.16e} {}",
                p[0],
                p[1],
                if self.boundary_vertex[v] { 1 } else { 0 }
            )?;
        }
        writeln!(w, "{}", self.n_triangles())?;
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    /// Read the plain-text format. The refinement-edge state is rebuilt by
    /// the longest-edge rule; if all boundary vertices sit on a common circle
    /// the boundary radius is inferred so refinement keeps projecting.
    pub fn read_text<R: BufRead>(r: &mut R) -> Result<Mesh, MeshError> {
        let mut lines = r.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String), MeshError> {
            match lines.next() {
                Some((i, Ok(s))) => Ok((i + 1, s)),
                Some((i, Err(e))) => Err(MeshError::Parse { line: i + 1, msg: e.to_string() }),
                None => Err(MeshError::Parse { line: 0, msg: format!("missing {what}") }),
            }
        };

        let (line, header) = next("header")?;
        if header.trim() != "obstacle-mesh v1" {
            return Err(MeshError::Parse { line, msg: format!("bad header {header:?}") });
        }
        let (line, nv_s) = next("vertex count")?;
        let nv: usize = nv_s
            .trim()
            .parse()
            .map_err(|e| MeshError::Parse { line, msg: format!("vertex count: {e}") })?;
        let mut vertices = Vec::with_capacity(nv);
        let mut boundary = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, s) = next("vertex line")?;
            let mut it = s.split_whitespace();
            let parse = |tok: Option<&str>, what: &str| -> Result<f64, MeshError> {
                tok.ok_or(MeshError::Parse { line, msg: format!("missing {what}") })?
                    .parse::<f64>()
                    .map_err(|e| MeshError::Parse { line, msg: format!("{what}: {e}") })
            };
            let x = parse(it.next(), "x")?;
            let y = parse(it.next(), "y")?;
            let flag = it
                .next()
                .ok_or(MeshError::Parse { line, msg: "missing boundary flag".into() })?;
            boundary.push(match flag {
                "0" => false,
                "1" => true,
                other => {
                    return Err(MeshError::Parse {
                        line,
                        msg: format!("boundary flag must be 0 or 1, got {other:?}"),
                    })
                }
            });
            vertices.push([x, y]);
        }
        let (line, nt_s) = next("triangle count")?;
        let nt: usize = nt_s
            .trim()
            .parse()
            .map_err(|e| MeshError::Parse { line, msg: format!("triangle count: {e}") })?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (line, s) = next("triangle line")?;
            let idx: Result<Vec<usize>, _> = s.split_whitespace().map(str::parse).collect();
            let idx =
                idx.map_err(|e| MeshError::Parse { line, msg: format!("triangle: {e}") })?;
            if idx.len() != 3 || idx.iter().any(|&i| i >= nv) {
                return Err(MeshError::Parse { line, msg: "bad triangle indices".into() });
            }
            triangles.push([idx[0], idx[1], idx[2]]);
        }

        let radii: Vec<f64> = vertices
            .iter()
            .zip(&boundary)
            .filter(|(_, &b)| b)
            .map(|(p, _)| (p[0] * p[0] + p[1] * p[1]).sqrt())
            .collect();
        let boundary_radius = if !radii.is_empty() {
            let r0 = radii[0];
            radii
                .iter()
                .all(|r| (r - r0).abs() <= 1e-9 * r0.max(1.0))
                .then_some(r0)
        } else {
            None
        };

        let n = vertices.len();
        let triangles = triangles
            .into_iter()
            .map(|t| rotate_longest_edge(&vertices, t))
            .collect::<Vec<_>>();
        let gen = vec![0; triangles.len()];
        Mesh::assemble(
            vertices,
            triangles,
            boundary,
            vec![false; n],
            gen,
            boundary_radius,
            None,
            None,
        )
    }
}

/// Structured triangulation of the disk of radius `radius` built from
/// concentric rings of quasi-equilateral triangles. With `conform_radius`
/// one vertex ring is snapped onto that circle so a closed polyline of mesh
/// edges lies on it.
pub fn generate_disk_mesh(
    radius: f64,
    target_h: f64,
    conform_radius: Option<f64>,
) -> Result<Mesh, MeshError> {
    if !(radius > 0.0) {
        return Err(MeshError::InvalidSize(format!("radius {radius} must be positive")));
    }
    if !(target_h > 0.0 && target_h < radius) {
        return Err(MeshError::InvalidSize(format!(
            "target_h {target_h} must lie in (0, {radius})"
        )));
    }
    if let Some(rc) = conform_radius {
        if !(rc > 0.0 && rc < radius) {
            return Err(MeshError::ConformRadiusOutOfRange { conform: rc, radius });
        }
    }

    let mut n_rings = ((radius / target_h).round() as usize).max(1);
    if conform_radius.is_some() {
        n_rings = n_rings.max(2);
    }

    // Ring radii; with a conform circle the rings are uniform inside and
    // outside it separately.
    let mut ring_r = Vec::with_capacity(n_rings + 1);
    match conform_radius {
        None => {
            for i in 0..=n_rings {
                ring_r.push(radius * i as f64 / n_rings as f64);
            }
        }
        Some(rc) => {
            let snap = ((rc / radius * n_rings as f64).round() as usize).clamp(1, n_rings - 1);
            for i in 0..=n_rings {
                if i <= snap {
                    ring_r.push(rc * i as f64 / snap as f64);
                } else {
                    ring_r.push(rc + (radius - rc) * (i - snap) as f64 / (n_rings - snap) as f64);
                }
            }
        }
    }

    let mut vertices: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize; n_rings + 1];
    for (i, &r) in ring_r.iter().enumerate().skip(1) {
        ring_start[i] = vertices.len();
        let count = 6 * i;
        for j in 0..count {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
            vertices.push([r * theta.cos(), r * theta.sin()]);
        }
    }

    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(6 * n_rings * n_rings);
    // innermost fan
    for j in 0..6 {
        triangles.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    // annuli
    for i in 2..=n_rings {
        let base_o = ring_start[i];
        let base_i = ring_start[i - 1];
        let n_o = 6 * i;
        let n_i = 6 * (i - 1);
        for s in 0..6 {
            let outer = |j: usize| base_o + (s * i + j) % n_o;
            let inner = |j: usize| base_i + (s * (i - 1) + j) % n_i;
            for j in 0..i {
                triangles.push([outer(j), outer(j + 1), inner(j)]);
                if j + 1 < i {
                    triangles.push([outer(j + 1), inner(j + 1), inner(j)]);
                }
            }
        }
    }

    let mut boundary = vec![false; vertices.len()];
    for v in ring_start[n_rings]..vertices.len() {
        boundary[v] = true;
    }
    let mut conform = vec![false; vertices.len()];
    if let Some(rc) = conform_radius {
        for (v, p) in vertices.iter().enumerate() {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if (r - rc).abs() <= VERTEX_TOL {
                conform[v] = true;
            }
        }
    }

    let triangles = triangles
        .into_iter()
        .map(|t| rotate_longest_edge(&vertices, t))
        .collect::<Vec<_>>();
    let gen = vec![0; triangles.len()];
    Mesh::assemble(
        vertices,
        triangles,
        boundary,
        conform,
        gen,
        Some(radius),
        conform_radius,
        None,
    )
}
