//! Residual a posteriori error estimation: element and edge residuals, the
//! obstacle consistency terms, data oscillation, the combined elementwise
//! refinement indicator and bulk marking.

use crate::assembly::ProblemData;
use crate::fespace::{edge_quadrature, quadrature_rule, DofMap, ElementGeometry, FieldEval};
use crate::mesh::Mesh;
use crate::solver::DiscreteSolution;

/// Which consistency term accompanies the residual estimator. The two
/// flavors differ in the sign inside the multiplier product: the mixed
/// method pairs the multiplier with the penetration (g - u)+, the
/// stabilized method with the separation (u - g)+.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodFlavor {
    Mixed,
    Stabilized,
}

/// Estimator components. `eta` is the root sum of squares of the element
/// and edge residuals; `total` additionally carries the consistency term.
#[derive(Clone, Debug)]
pub struct ErrorBreakdown {
    pub eta_k: Vec<f64>,
    /// indexed like `mesh.interior_edges()`
    pub eta_e: Vec<f64>,
    pub s_term: f64,
    pub osc_k: Vec<f64>,
    pub osc: f64,
    pub eta: f64,
    pub total: f64,
}

/// Marked element ids (ascending) and the squared-indicator fraction they
/// cover.
#[derive(Clone, Debug)]
pub struct MarkingResult {
    pub marked: Vec<usize>,
    pub covered_fraction: f64,
}

/// h_E ||[grad u . n]||^2_{0,E} for each interior edge.
fn edge_jump_terms(mesh: &Mesh, u: &FieldEval<'_>) -> Vec<f64> {
    let rule = edge_quadrature();
    mesh.interior_edges()
        .iter()
        .map(|e| {
            let a = mesh.vertices()[e.vertices[0]];
            let b = mesh.vertices()[e.vertices[1]];
            let geo_l = ElementGeometry::new(mesh, e.left);
            let geo_r = ElementGeometry::new(mesh, e.right);
            let mut acc = 0.0;
            for &(t, w) in rule.iter() {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let gl = u.eval(e.left, &geo_l, geo_l.barycentric(x)).grad;
                let gr = u.eval(e.right, &geo_r, geo_r.barycentric(x)).grad;
                let jump = (gl[0] - gr[0]) * e.normal[0] + (gl[1] - gr[1]) * e.normal[1];
                acc += w * jump * jump;
            }
            // the rule lives on [0,1]: scale by the edge length, then by h_E
            e.length * (e.length * acc)
        })
        .collect()
}

struct ElementTerms {
    eta_k2: Vec<f64>,
    /// squared H1 norm of (g - u)+ per element
    pen_h1_2: Vec<f64>,
    /// integral of (g - u)+ lambda per element
    pen_product: Vec<f64>,
    /// integral of (u - g)+ lambda per element
    sep_product: Vec<f64>,
}

fn element_terms(
    mesh: &Mesh,
    u: &FieldEval<'_>,
    lambda: &[f64],
    data: &ProblemData,
) -> ElementTerms {
    let rule = quadrature_rule(4).unwrap();
    let nt = mesh.n_triangles();
    let mut out = ElementTerms {
        eta_k2: vec![0.0; nt],
        pen_h1_2: vec![0.0; nt],
        pen_product: vec![0.0; nt],
        sep_product: vec![0.0; nt],
    };
    for k in 0..nt {
        let geo = ElementGeometry::new(mesh, k);
        let h2 = mesh.element_h(k) * mesh.element_h(k);
        let mut resid2 = 0.0;
        for (pt, &w) in rule.points().iter().zip(rule.weights()) {
            let x = geo.point(*pt);
            let wj = w * 2.0 * geo.area;
            let uv = u.eval(k, &geo, *pt);
            let f = (data.load)(x[0], x[1]);
            let g = (data.obstacle)(x[0], x[1]);
            let r = uv.laplacian + lambda[k] + f;
            resid2 += wj * r * r;

            let gap = g - uv.value;
            if gap > 0.0 {
                let dg = (data.obstacle_grad)(x[0], x[1]);
                let dgap = [dg[0] - uv.grad[0], dg[1] - uv.grad[1]];
                out.pen_h1_2[k] += wj * (gap * gap + dgap[0] * dgap[0] + dgap[1] * dgap[1]);
                out.pen_product[k] += wj * gap * lambda[k];
            } else if gap < 0.0 {
                out.sep_product[k] += wj * (-gap) * lambda[k];
            }
        }
        out.eta_k2[k] = h2 * resid2;
    }
    out
}

/// Residual estimator with the method-dependent consistency term.
pub fn estimate(
    sol: &DiscreteSolution,
    mesh: &Mesh,
    v_dofs: &DofMap,
    data: &ProblemData,
    flavor: MethodFlavor,
) -> ErrorBreakdown {
    let u = FieldEval::from_free(mesh, v_dofs, &sol.u);
    let terms = element_terms(mesh, &u, &sol.lambda, data);
    let edge2 = edge_jump_terms(mesh, &u);

    let pen_h1: f64 = terms.pen_h1_2.iter().sum::<f64>().sqrt();
    let product: f64 = match flavor {
        MethodFlavor::Mixed => terms.pen_product.iter().sum::<f64>(),
        MethodFlavor::Stabilized => terms.sep_product.iter().sum::<f64>(),
    };
    let s_term = pen_h1 + product.max(0.0).sqrt();

    let (osc_k, osc) = oscillation(data, mesh);
    let eta_sq: f64 = terms.eta_k2.iter().sum::<f64>() + edge2.iter().sum::<f64>();
    let eta = eta_sq.sqrt();
    ErrorBreakdown {
        eta_k: terms.eta_k2.iter().map(|v| v.sqrt()).collect(),
        eta_e: edge2.iter().map(|v| v.sqrt()).collect(),
        s_term,
        osc_k,
        osc,
        eta,
        total: eta + s_term,
    }
}

/// Combined elementwise refinement indicator: element residual, half of the
/// interior edge jumps around the element, and the local obstacle
/// consistency terms.
pub fn local_indicator(
    sol: &DiscreteSolution,
    mesh: &Mesh,
    v_dofs: &DofMap,
    data: &ProblemData,
) -> Vec<f64> {
    let u = FieldEval::from_free(mesh, v_dofs, &sol.u);
    let terms = element_terms(mesh, &u, &sol.lambda, data);
    let edge2 = edge_jump_terms(mesh, &u);

    let mut ind2 = vec![0.0; mesh.n_triangles()];
    for k in 0..mesh.n_triangles() {
        ind2[k] = terms.eta_k2[k] + terms.pen_h1_2[k] + terms.sep_product[k];
    }
    for (e, jump2) in mesh.interior_edges().iter().zip(&edge2) {
        ind2[e.left] += 0.5 * jump2;
        ind2[e.right] += 0.5 * jump2;
    }
    ind2.into_iter().map(|v| v.max(0.0).sqrt()).collect()
}

/// Bulk marking: the smallest prefix of elements, sorted by decreasing
/// squared indicator (ties by id), whose squared sum reaches the fraction
/// `theta` of the total.
pub fn mark(indicators: &[f64], theta: f64) -> MarkingResult {
    assert!(theta > 0.0 && theta <= 1.0, "theta must lie in (0, 1]");
    let total: f64 = indicators.iter().map(|v| v * v).sum();
    if total <= 0.0 {
        return MarkingResult { marked: Vec::new(), covered_fraction: 1.0 };
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&i, &j| {
        (indicators[j] * indicators[j])
            .total_cmp(&(indicators[i] * indicators[i]))
            .then(i.cmp(&j))
    });
    let mut cum = 0.0;
    let mut marked = Vec::new();
    for &i in &order {
        marked.push(i);
        cum += indicators[i] * indicators[i];
        if cum >= theta * total {
            break;
        }
    }
    marked.sort_unstable();
    MarkingResult { marked, covered_fraction: cum / total }
}

/// Data oscillation h_K || f - f_K ||_{0,K} with the elementwise mean f_K.
pub fn oscillation(data: &ProblemData, mesh: &Mesh) -> (Vec<f64>, f64) {
    let rule = quadrature_rule(4).unwrap();
    let nt = mesh.n_triangles();
    let mut osc_k = vec![0.0; nt];
    let mut total2 = 0.0;
    for k in 0..nt {
        let geo = ElementGeometry::new(mesh, k);
        let mut f_vals = Vec::with_capacity(rule.len());
        let mut mean = 0.0;
        for (pt, &w) in rule.points().iter().zip(rule.weights()) {
            let x = geo.point(*pt);
            let f = (data.load)(x[0], x[1]);
            f_vals.push(f);
            mean += w * 2.0 * f; // weights sum to 1/2
        }
        let mut var = 0.0;
        for (f, &w) in f_vals.iter().zip(rule.weights()) {
            var += w * 2.0 * geo.area * (f - mean) * (f - mean);
        }
        let h = mesh.element_h(k);
        osc_k[k] = h * var.max(0.0).sqrt();
        total2 += osc_k[k] * osc_k[k];
    }
    (osc_k, total2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{DofMap, Family, SpaceSpec};
    use crate::mesh::generate_disk_mesh;
    use crate::solver::SolverReport;

    fn zero_solution(n_free: usize, m: usize) -> DiscreteSolution {
        DiscreteSolution {
            u: vec![0.0; n_free],
            lambda: vec![0.0; m],
            active_set: vec![],
            report: SolverReport::default(),
        }
    }

    #[test]
    fn eta_k_matches_p0_residual_for_p1() {
        // u = 0, lambda and f constant: eta_K = h_K |lambda + f| |K|^(1/2)
        let mesh = generate_disk_mesh(2.0, 0.7, None).unwrap();
        let spec = SpaceSpec::displacement(Family::P1);
        let dofs = DofMap::build(&mesh, &spec);
        let data = ProblemData::constants(-1.0, -5.0, 0.0, 1);
        let mut sol = zero_solution(dofs.n_free(), mesh.n_triangles());
        for l in sol.lambda.iter_mut() {
            *l = 3.0;
        }
        let est = estimate(&sol, &mesh, &dofs, &data, MethodFlavor::Stabilized);
        for k in 0..mesh.n_triangles() {
            let expect = mesh.element_h(k) * (3.0f64 - 1.0).abs() * mesh.triangle_area(k).sqrt();
            assert!((est.eta_k[k] - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn affine_function_has_no_jumps() {
        let mesh = generate_disk_mesh(2.0, 0.7, None).unwrap();
        let spec = SpaceSpec::new(Family::P1, false).unwrap();
        let dofs = DofMap::build(&mesh, &spec);
        // coefficients of u(x, y) = 2x - 3y + 1 in the nodal basis
        let coeffs: Vec<f64> = mesh
            .vertices()
            .iter()
            .map(|p| 2.0 * p[0] - 3.0 * p[1] + 1.0)
            .collect();
        let u = FieldEval::from_full(&mesh, &dofs, coeffs);
        for jump2 in edge_jump_terms(&mesh, &u) {
            assert!(jump2.abs() < 1e-24);
        }
    }

    #[test]
    fn s_term_vanishes_without_penetration() {
        let mesh = generate_disk_mesh(2.0, 0.7, None).unwrap();
        let spec = SpaceSpec::displacement(Family::P1);
        let dofs = DofMap::build(&mesh, &spec);
        let data = ProblemData::constants(0.0, -1.0, 0.0, 1); // obstacle below zero
        let sol = zero_solution(dofs.n_free(), mesh.n_triangles());
        let est = estimate(&sol, &mesh, &dofs, &data, MethodFlavor::Mixed);
        assert_eq!(est.s_term, 0.0);
    }

    #[test]
    fn zero_solution_zero_indicators() {
        let mesh = generate_disk_mesh(2.0, 0.7, None).unwrap();
        let spec = SpaceSpec::displacement(Family::P1);
        let dofs = DofMap::build(&mesh, &spec);
        let data = ProblemData::constants(0.0, -1.0, 0.0, 1);
        let sol = zero_solution(dofs.n_free(), mesh.n_triangles());
        let ind = local_indicator(&sol, &mesh, &dofs, &data);
        assert!(ind.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_patch_jump_and_identity() {
        // two unit right triangles, u = hat at vertex (1,0)
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let triangles = vec![[0, 1, 2], [0, 2, 3]];
        let mesh = Mesh::from_parts(vertices, triangles, vec![true; 4]).unwrap();
        let spec = SpaceSpec::new(Family::P1, false).unwrap();
        let dofs = DofMap::build(&mesh, &spec);
        let data = ProblemData::constants(0.0, -1.0, 0.0, 1);
        let mut sol = zero_solution(dofs.n_free(), mesh.n_triangles());
        sol.u[1] = 1.0; // hat at vertex 1 = (1, 0)

        // gradient on one side is (1, -1), zero on the other:
        // |jump| = sqrt(2) along the shared diagonal of length sqrt(2)
        let est = estimate(&sol, &mesh, &dofs, &data, MethodFlavor::Stabilized);
        assert_eq!(est.eta_e.len(), 1);
        let expect_eta_e2 = 2.0_f64.sqrt() * 2.0 * 2.0_f64.sqrt();
        assert!((est.eta_e[0].powi(2) - expect_eta_e2).abs() < 1e-12);

        // each element receives half of the edge term; no other parts
        let ind = local_indicator(&sol, &mesh, &dofs, &data);
        for v in &ind {
            assert!((v.powi(2) - 0.5 * expect_eta_e2).abs() < 1e-12);
        }
        // sum of squared indicators equals eta^2 here
        let sum2: f64 = ind.iter().map(|v| v * v).sum();
        assert!((sum2 - est.eta.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn indicator_squares_sum_to_eta_squared_plus_consistency() {
        let mesh = generate_disk_mesh(2.0, 0.5, None).unwrap();
        let spec = SpaceSpec::displacement(Family::P1);
        let dofs = DofMap::build(&mesh, &spec);
        let data = ProblemData::constants(-1.0, -10.0, 0.0, 1);
        // arbitrary coefficients, obstacle far below: the penetration terms
        // vanish and only the separation product remains
        let mut sol = zero_solution(dofs.n_free(), mesh.n_triangles());
        for (i, v) in sol.u.iter_mut().enumerate() {
            *v = ((i * 37) % 11) as f64 / 7.0 - 0.5;
        }
        for (i, l) in sol.lambda.iter_mut().enumerate() {
            *l = ((i * 13) % 5) as f64 / 3.0;
        }
        let est = estimate(&sol, &mesh, &dofs, &data, MethodFlavor::Stabilized);
        let ind = local_indicator(&sol, &mesh, &dofs, &data);
        let u = FieldEval::from_free(&mesh, &dofs, &sol.u);
        let terms = element_terms(&mesh, &u, &sol.lambda, &data);
        let sum2: f64 = ind
            .iter()
            .zip(&terms.sep_product)
            .map(|(v, s)| v * v - s)
            .sum();
        assert!(
            (sum2 - est.eta.powi(2)).abs() < 1e-10 * est.eta.powi(2).max(1.0),
            "{sum2} vs {}",
            est.eta.powi(2)
        );
    }

    #[test]
    fn eta_matches_root_sum_of_squares() {
        let mesh = generate_disk_mesh(2.0, 0.5, None).unwrap();
        let spec = SpaceSpec::displacement(Family::P1);
        let dofs = DofMap::build(&mesh, &spec);
        let data = ProblemData::constants(-1.0, -10.0, 0.0, 1);
        let mut sol = zero_solution(dofs.n_free(), mesh.n_triangles());
        for (i, v) in sol.u.iter_mut().enumerate() {
            *v = (i % 3) as f64;
        }
        let est = estimate(&sol, &mesh, &dofs, &data, MethodFlavor::Stabilized);
        let sum2: f64 = est.eta_k.iter().map(|v| v * v).sum::<f64>()
            + est.eta_e.iter().map(|v| v * v).sum::<f64>();
        assert!((est.eta - sum2.sqrt()).abs() <= 1e-13 * est.eta.max(1.0));
    }

    #[test]
    fn marking_examples() {
        // equal indicators: 9 of 10 marked at theta = 0.9
        let r = mark(&[1.0; 10], 0.9);
        assert_eq!(r.marked.len(), 9);
        assert!(r.covered_fraction >= 0.9);

        // one dominant element carrying 95% of the squared total
        let mut ind = vec![1.0; 20];
        let dominant: f64 = (0.95f64 * 19.0 / 0.05).sqrt();
        ind[7] = dominant;
        let r = mark(&ind, 0.9);
        assert_eq!(r.marked, vec![7]);

        // squared indicators (5, 3, 1, 1), theta 0.9: prefix {0, 1, 2}
        let ind: Vec<f64> = [5.0f64, 3.0, 1.0, 1.0].iter().map(|v| v.sqrt()).collect();
        let r = mark(&ind, 0.9);
        assert_eq!(r.marked, vec![0, 1, 2]);
        assert!((r.covered_fraction - 0.9).abs() < 1e-15);
    }

    #[test]
    fn marking_scale_invariance() {
        let ind = [0.4, 1.3, 0.1, 0.9, 0.7];
        let r1 = mark(&ind, 0.8);
        let scaled: Vec<f64> = ind.iter().map(|v| 123.0 * v).collect();
        let r2 = mark(&scaled, 0.8);
        assert_eq!(r1.marked, r2.marked);
    }

    #[test]
    fn oscillation_constant_load_is_zero() {
        let mesh = generate_disk_mesh(2.0, 0.7, None).unwrap();
        let data = ProblemData::constants(-1.0, -1.0, 0.0, 1);
        let (osc_k, osc) = oscillation(&data, &mesh);
        assert!(osc_k.iter().all(|&v| v.abs() < 1e-14));
        assert!(osc < 1e-13);
    }

    #[test]
    fn oscillation_linear_load_closed_form() {
        let mesh = Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![true; 3],
        )
        .unwrap();
        let data = ProblemData::new(
            std::sync::Arc::new(|x: f64, _| x),
            std::sync::Arc::new(|_, _| -1.0),
            std::sync::Arc::new(|_, _| [0.0, 0.0]),
            0.0,
            1,
        );
        let (osc_k, _) = oscillation(&data, &mesh);
        // ||x - 1/3||^2 over the reference triangle is 1/36
        let expect = 2.0_f64.sqrt() * (1.0f64 / 36.0).sqrt();
        assert!((osc_k[0] - expect).abs() < 1e-14, "{} vs {expect}", osc_k[0]);
    }
}
