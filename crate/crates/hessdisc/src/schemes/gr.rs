//! Gradient-recovery Hessian discretisation on triangles: conforming P1
//! space, patch-averaging recovery Q_h of the broken gradient, and the
//! stabilised reconstructed Hessian
//! HB u = sym[grad(Q_h grad u)] + sym[sigma_h (x) (Q_h grad u - grad u)].

use std::collections::BTreeMap;

use crate::error::{HessdiscError, Result};
use crate::hd::{BKind, HessianDiscretisation};
use crate::mesh::PolytopalMesh;
use crate::quadrature::tri_order4;
use crate::sparse::SparseBuilder;

pub struct GrSpace {
    pub dof_of_vertex: Vec<Option<usize>>,
    pub n_dofs: usize,
}

pub fn gr_space(mesh: &PolytopalMesh) -> GrSpace {
    let mut dof_of_vertex = Vec::with_capacity(mesh.vertices.len());
    let mut n = 0;
    for v in &mesh.vertices {
        if v.on_boundary {
            dof_of_vertex.push(None);
        } else {
            dof_of_vertex.push(Some(n));
            n += 1;
        }
    }
    GrSpace {
        dof_of_vertex,
        n_dofs: n,
    }
}

/// Gradients of the three barycentric coordinates of a triangle cell.
fn barycentric_gradients(mesh: &PolytopalMesh, ci: usize) -> [[f64; 2]; 3] {
    let c = &mesh.cells[ci];
    let p: Vec<[f64; 2]> = c.vertices.iter().map(|&v| mesh.vertex_xy(v)).collect();
    let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let a = p[(i + 1) % 3];
        let b = p[(i + 2) % 3];
        // grad lambda_i is the inward normal of the opposite edge scaled
        // by 1/(2|K|); rotate (b - a) by +90 degrees over the signed area.
        g[i] = [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a];
    }
    g
}

/// Barycentric coordinates of a point in a triangle cell.
fn barycentric_coords(mesh: &PolytopalMesh, ci: usize, x: f64, y: f64) -> [f64; 3] {
    let c = &mesh.cells[ci];
    let p: Vec<[f64; 2]> = c.vertices.iter().map(|&v| mesh.vertex_xy(v)).collect();
    let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let sub = |a: [f64; 2], b: [f64; 2]| {
        ((b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1])) / two_a
    };
    [sub(p[1], p[2]), sub(p[2], p[0]), sub(p[0], p[1])]
}

/// Patch-averaging recovery: lifts per-cell constant vectors to vertex
/// values with cell-measure weights. Weights at each vertex sum to 1. The
/// recovered field lives in the zero-boundary P1 space, so boundary
/// vertices carry the value zero.
pub fn recover(mesh: &PolytopalMesh, cell_vals: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    let mut out = vec![[0.0; 2]; mesh.vertices.len()];
    let mut wsum = vec![0.0; mesh.vertices.len()];
    for (ci, c) in mesh.cells.iter().enumerate() {
        for &v in &c.vertices {
            out[v][0] += c.measure * cell_vals[ci][0];
            out[v][1] += c.measure * cell_vals[ci][1];
            wsum[v] += c.measure;
        }
    }
    for (v, w) in wsum.iter().enumerate() {
        if *w <= 0.0 {
            return Err(HessdiscError::MeshInvalid(format!(
                "vertex {v} has no incident cell"
            )));
        }
        out[v][0] /= w;
        out[v][1] /= w;
    }
    for (v, vert) in mesh.vertices.iter().enumerate() {
        if vert.on_boundary {
            out[v] = [0.0, 0.0];
        }
    }
    Ok(out)
}

type Row = BTreeMap<usize, f64>;

pub fn build_gr_hd(mesh: &PolytopalMesh, theta: f64) -> Result<HessianDiscretisation> {
    if !mesh.all_triangles() {
        return Err(HessdiscError::SchemeMeshMismatch(
            "triangular cells for the gradient-recovery method".into(),
        ));
    }
    if !(theta > 0.0) {
        return Err(HessdiscError::InvalidArgument(format!(
            "stabilisation factor must be positive, got {theta}"
        )));
    }
    let space = gr_space(mesh);
    let quad = tri_order4(mesh)?;
    let nc = mesh.n_cells();

    // Broken gradient of u on each cell as a dof row per component.
    let bgrads: Vec<[[f64; 2]; 3]> = (0..nc).map(|ci| barycentric_gradients(mesh, ci)).collect();
    let mut cell_grad: Vec<[Row; 2]> = vec![[Row::new(), Row::new()]; nc];
    for (ci, c) in mesh.cells.iter().enumerate() {
        for (li, &v) in c.vertices.iter().enumerate() {
            if let Some(d) = space.dof_of_vertex[v] {
                for comp in 0..2 {
                    *cell_grad[ci][comp].entry(d).or_insert(0.0) += bgrads[ci][li][comp];
                }
            }
        }
    }

    // Recovered gradient at vertices: measure-weighted patch averages.
    let mut patch_w = vec![0.0; mesh.vertices.len()];
    for c in &mesh.cells {
        for &v in &c.vertices {
            patch_w[v] += c.measure;
        }
    }
    if patch_w.iter().any(|&w| w <= 0.0) {
        return Err(HessdiscError::MeshInvalid(
            "vertex with no incident cell".into(),
        ));
    }
    // Boundary vertices keep empty rows: Q_h maps into the zero-boundary
    // P1 space, which is what transmits the clamped boundary condition to
    // the reconstructed Hessian.
    let mut qrow: Vec<[Row; 2]> = vec![[Row::new(), Row::new()]; mesh.vertices.len()];
    for (ci, c) in mesh.cells.iter().enumerate() {
        for &v in &c.vertices {
            if mesh.vertices[v].on_boundary {
                continue;
            }
            let w = c.measure / patch_w[v];
            for comp in 0..2 {
                for (&d, &val) in &cell_grad[ci][comp] {
                    *qrow[v][comp].entry(d).or_insert(0.0) += w * val;
                }
            }
        }
    }

    let nq = quad.n_points();
    let mut pi = SparseBuilder::new(nq, space.n_dofs);
    let mut grad = SparseBuilder::new(2 * nq, space.n_dofs);
    let mut hb = SparseBuilder::new(4 * nq, space.n_dofs);
    let inv_sqrt2 = 1.0 / std::f64::consts::SQRT_2;

    for (ci, cell) in mesh.cells.iter().enumerate() {
        // Per-cell constant G_de = d_e (Q_h grad u)_d, then symmetrized.
        let mut gmat: [[Row; 2]; 2] = Default::default();
        for (li, &v) in cell.vertices.iter().enumerate() {
            for d in 0..2 {
                for e in 0..2 {
                    let w = bgrads[ci][li][e];
                    for (&dof, &val) in &qrow[v][d] {
                        *gmat[d][e].entry(dof).or_insert(0.0) += w * val;
                    }
                }
            }
        }
        let sigma = [theta * inv_sqrt2, theta * inv_sqrt2];
        let (qs, qe) = quad.cell_ranges[ci];
        for q in qs..qe {
            let [x, y] = quad.points[q];
            let lam = barycentric_coords(mesh, ci, x, y);
            // Pi: P1 evaluation.
            for (li, &v) in cell.vertices.iter().enumerate() {
                if let Some(d) = space.dof_of_vertex[v] {
                    pi.add(q, d, lam[li]);
                }
            }
            // Recovered gradient at the point, and the stabilisation
            // deviation w = Q_h grad u - grad u (per dof).
            let mut qg: [Row; 2] = Default::default();
            for (li, &v) in cell.vertices.iter().enumerate() {
                for comp in 0..2 {
                    for (&dof, &val) in &qrow[v][comp] {
                        *qg[comp].entry(dof).or_insert(0.0) += lam[li] * val;
                    }
                }
            }
            for comp in 0..2 {
                for (&dof, &val) in &qg[comp] {
                    grad.add(2 * q + comp, dof, val);
                }
            }
            let mut dev: [Row; 2] = Default::default();
            for comp in 0..2 {
                dev[comp] = qg[comp].clone();
                for (&dof, &val) in &cell_grad[ci][comp] {
                    *dev[comp].entry(dof).or_insert(0.0) -= val;
                }
            }
            // HB_de = 1/2 (G_de + G_ed) + 1/2 (sigma_d w_e + sigma_e w_d).
            for d in 0..2 {
                for e in 0..2 {
                    let r = 4 * q + 2 * d + e;
                    for (&dof, &val) in &gmat[d][e] {
                        hb.add(r, dof, 0.5 * val);
                    }
                    for (&dof, &val) in &gmat[e][d] {
                        hb.add(r, dof, 0.5 * val);
                    }
                    for (&dof, &val) in &dev[e] {
                        hb.add(r, dof, 0.5 * sigma[d] * val);
                    }
                    for (&dof, &val) in &dev[d] {
                        hb.add(r, dof, 0.5 * sigma[e] * val);
                    }
                }
            }
        }
    }

    let hd = HessianDiscretisation {
        n_dofs: space.n_dofs,
        quad,
        pi: pi.build(),
        grad: grad.build(),
        hb: hb.build(),
        b_kind: BKind::IdentityOnSymmetric,
        coercivity_estimate: 1.0,
    };
    hd.check_shapes()?;
    Ok(hd)
}

/// Nodal interpolation of a smooth field into the constrained P1 space.
pub fn interpolate_dofs(
    mesh: &PolytopalMesh,
    space: &GrSpace,
    phi: &crate::exact::ExactSolution,
) -> Vec<f64> {
    let mut dofs = vec![0.0; space.n_dofs];
    for (vi, v) in mesh.vertices.iter().enumerate() {
        if let Some(d) = space.dof_of_vertex[vi] {
            dofs[d] = phi.value(v.x, v.y);
        }
    }
    dofs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hd::assemble_stiffness;
    use crate::mesh::{gen_triangular_mesh, CenterRule, Domain};
    use crate::sparse::{factorize, FactorKind};
    use approx::assert_relative_eq;

    #[test]
    fn recovery_preserves_constants() {
        let mesh = gen_triangular_mesh(4, Domain::UnitSquare).unwrap();
        let vals = vec![[3.0, -2.0]; mesh.n_cells()];
        let rec = recover(&mesh, &vals).unwrap();
        let mut interior = 0;
        for (vi, v) in mesh.vertices.iter().enumerate() {
            if v.on_boundary {
                assert_eq!(rec[vi], [0.0, 0.0]);
            } else {
                assert_relative_eq!(rec[vi][0], 3.0, max_relative = 1e-13);
                assert_relative_eq!(rec[vi][1], -2.0, max_relative = 1e-13);
                interior += 1;
            }
        }
        assert!(interior > 0);
    }

    #[test]
    fn recovery_is_patch_mean_on_equal_areas() {
        // Regular hexagon fan: 6 equal triangles around a center vertex
        // with alternating gradients (1,0)/(0,1) recover to (0.5, 0.5).
        let mut coords = vec![[0.0, 0.0]];
        for k in 0..6 {
            let a = std::f64::consts::PI / 3.0 * k as f64;
            coords.push([a.cos(), a.sin()]);
        }
        let cells = (0..6)
            .map(|k| vec![0usize, 1 + k, 1 + (k + 1) % 6])
            .collect();
        let mesh = PolytopalMesh::build(coords, cells, CenterRule::Centroid).unwrap();
        let vals: Vec<[f64; 2]> = (0..6)
            .map(|k| if k % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] })
            .collect();
        let rec = recover(&mesh, &vals).unwrap();
        assert_relative_eq!(rec[0][0], 0.5, max_relative = 1e-13);
        assert_relative_eq!(rec[0][1], 0.5, max_relative = 1e-13);
    }

    #[test]
    fn linear_gradient_recovered_exactly() {
        // u = a . x interpolated at interior vertices: the broken gradient
        // equals a on every cell away from the boundary layer, so both the
        // recovered gradient and HB vanish there.
        let n = 8;
        let mesh = gen_triangular_mesh(n, Domain::UnitSquare).unwrap();
        let space = gr_space(&mesh);
        let hd = build_gr_hd(&mesh, 1.0).unwrap();
        let (a0, a1) = (1.5, -0.5);
        let mut dofs = vec![0.0; space.n_dofs];
        for (vi, v) in mesh.vertices.iter().enumerate() {
            if let Some(d) = space.dof_of_vertex[vi] {
                dofs[d] = a0 * v.x + a1 * v.y;
            }
        }
        let g = hd.sample_grad(&dofs);
        let h = hd.sample_hb(&dofs);
        let hcell = 1.0 / n as f64;
        let deep = |x: f64, y: f64| {
            x > 3.0 * hcell && x < 1.0 - 3.0 * hcell && y > 3.0 * hcell && y < 1.0 - 3.0 * hcell
        };
        let mut checked = 0;
        for (ci, _) in mesh.cells.iter().enumerate() {
            let c = mesh.cells[ci].centroid;
            if !deep(c[0], c[1]) {
                continue;
            }
            let (qs, qe) = hd.quad.cell_ranges[ci];
            for q in qs..qe {
                assert_relative_eq!(g[2 * q], a0, max_relative = 1e-11);
                assert_relative_eq!(g[2 * q + 1], a1, max_relative = 1e-11);
                for comp in 0..4 {
                    assert!(h[4 * q + comp].abs() < 1e-10);
                }
            }
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn hb_samples_are_symmetric() {
        let mesh = gen_triangular_mesh(4, Domain::UnitSquare).unwrap();
        let hd = build_gr_hd(&mesh, 1.0).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let dofs: Vec<f64> = (0..hd.n_dofs).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = hd.sample_hb(&dofs);
        for q in 0..hd.quad.n_points() {
            assert!((h[4 * q + 1] - h[4 * q + 2]).abs() < 1e-12);
        }
    }

    #[test]
    fn stiffness_spd() {
        let mesh = gen_triangular_mesh(4, Domain::UnitSquare).unwrap();
        let hd = build_gr_hd(&mesh, 1.0).unwrap();
        let a = assemble_stiffness(&hd).unwrap();
        assert!(a.symmetry_defect() < 1e-10);
        assert!(factorize(&a, FactorKind::Spd).is_ok());
    }

    #[test]
    fn rejects_bad_arguments() {
        use crate::mesh::gen_square_mesh;
        let sq = gen_square_mesh(2, Domain::UnitSquare).unwrap();
        assert!(matches!(
            build_gr_hd(&sq, 1.0),
            Err(HessdiscError::SchemeMeshMismatch(_))
        ));
        let tri = gen_triangular_mesh(2, Domain::UnitSquare).unwrap();
        assert!(build_gr_hd(&tri, 0.0).is_err());
    }
}
