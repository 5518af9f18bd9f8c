//! Adini nonconforming rectangle element: three dofs (value, both partial
//! derivatives) per interior vertex, local space P3 + {x y^3, x^3 y},
//! broken Hessian sampled at 3x3 Gauss points.

use crate::error::{HessdiscError, Result};
use crate::hd::{BKind, HessianDiscretisation};
use crate::mesh::PolytopalMesh;
use crate::quadrature::{gauss_legendre, gauss_rect, rect_bounds};
use crate::sparse::SparseBuilder;

/// Monomial exponents of the local space on [-1,1]^2.
pub const MONOMIALS: [(u32, u32); 12] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
    (3, 1),
    (1, 3),
];

/// Reference corners in counter-clockwise order from the lower left;
/// each carries dofs (value, d/dxi, d/deta).
pub const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

fn mono_value(e: (u32, u32), x: f64, y: f64) -> f64 {
    x.powi(e.0 as i32) * y.powi(e.1 as i32)
}

fn mono_deriv(e: (u32, u32), dx: u32, dy: u32, x: f64, y: f64) -> f64 {
    let d1 = |n: u32, k: u32, t: f64| -> f64 {
        if k > n {
            return 0.0;
        }
        let mut c = 1.0;
        for i in 0..k {
            c *= (n - i) as f64;
        }
        c * t.powi((n - k) as i32)
    };
    d1(e.0, dx, x) * d1(e.1, dy, y)
}

/// The 12 shape functions as monomial coefficient rows, obtained by
/// inverting the interpolation matrix once.
pub struct AdiniReferenceBasis {
    /// coeffs[k][m]: coefficient of monomial m in shape k.
    pub coeffs: [[f64; 12]; 12],
}

impl AdiniReferenceBasis {
    /// Value, gradient [d/dxi, d/deta] and Hessian [xx, xy, yy] of shape k
    /// at a reference point.
    pub fn eval(&self, k: usize, xi: f64, eta: f64) -> (f64, [f64; 2], [f64; 3]) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [0.0; 3];
        for (m, &e) in MONOMIALS.iter().enumerate() {
            let c = self.coeffs[k][m];
            if c == 0.0 {
                continue;
            }
            v += c * mono_value(e, xi, eta);
            g[0] += c * mono_deriv(e, 1, 0, xi, eta);
            g[1] += c * mono_deriv(e, 0, 1, xi, eta);
            h[0] += c * mono_deriv(e, 2, 0, xi, eta);
            h[1] += c * mono_deriv(e, 1, 1, xi, eta);
            h[2] += c * mono_deriv(e, 0, 2, xi, eta);
        }
        (v, g, h)
    }

    /// Interpolates local dof values (12, corner-major: value, dxi, deta
    /// per corner) at a reference point.
    pub fn interpolate(&self, dofs: &[f64; 12], xi: f64, eta: f64) -> f64 {
        (0..12).map(|k| dofs[k] * self.eval(k, xi, eta).0).sum()
    }
}

/// Solves the 12x12 nodal interpolation system. The dof functionals are,
/// corner by corner: value, d/dxi, d/deta.
pub fn build_reference_basis() -> Result<AdiniReferenceBasis> {
    // mat[i][m] = functional i applied to monomial m.
    let mut mat = [[0.0f64; 12]; 12];
    for (ci, &(cx, cy)) in CORNERS.iter().enumerate() {
        for (m, &e) in MONOMIALS.iter().enumerate() {
            mat[3 * ci][m] = mono_value(e, cx, cy);
            mat[3 * ci + 1][m] = mono_deriv(e, 1, 0, cx, cy);
            mat[3 * ci + 2][m] = mono_deriv(e, 0, 1, cx, cy);
        }
    }
    // Invert by Gauss-Jordan with partial pivoting; shape k is column k of
    // the inverse, i.e. the coefficient vector with functional_i = delta_ik.
    let mut aug = [[0.0f64; 24]; 12];
    for i in 0..12 {
        aug[i][..12].copy_from_slice(&mat[i]);
        aug[i][12 + i] = 1.0;
    }
    for col in 0..12 {
        let piv = (col..12)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        if aug[piv][col].abs() < 1e-12 {
            return Err(HessdiscError::Singular {
                row: col,
                pivot: aug[piv][col],
            });
        }
        aug.swap(col, piv);
        let d = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= d;
        }
        for r in 0..12 {
            if r != col && aug[r][col] != 0.0 {
                let f = aug[r][col];
                for c in 0..24 {
                    aug[r][c] -= f * aug[col][c];
                }
            }
        }
    }
    // aug[:, 12..] is mat^{-1}; its column k gives shape k's coefficients:
    // coeffs[k][m] = inv[m][k].
    let mut coeffs = [[0.0f64; 12]; 12];
    for k in 0..12 {
        for m in 0..12 {
            coeffs[k][m] = aug[m][12 + k];
        }
    }
    Ok(AdiniReferenceBasis { coeffs })
}

/// Global dof numbering: 3 dofs per interior vertex, stored in physical
/// units (value, du/dx, du/dy).
pub struct AdiniSpace {
    /// base dof index per vertex; None at boundary vertices.
    pub dof_of_vertex: Vec<Option<usize>>,
    pub n_dofs: usize,
}

pub fn adini_space(mesh: &PolytopalMesh) -> AdiniSpace {
    let mut dof_of_vertex = Vec::with_capacity(mesh.vertices.len());
    let mut n = 0;
    for v in &mesh.vertices {
        if v.on_boundary {
            dof_of_vertex.push(None);
        } else {
            dof_of_vertex.push(Some(n));
            n += 3;
        }
    }
    AdiniSpace {
        dof_of_vertex,
        n_dofs: n,
    }
}

pub fn build_adini_hd(mesh: &PolytopalMesh) -> Result<HessianDiscretisation> {
    if !mesh.all_rectangles() {
        return Err(HessdiscError::SchemeMeshMismatch(
            "axis-aligned rectangular cells for the Adini element".into(),
        ));
    }
    let basis = build_reference_basis()?;
    let space = adini_space(mesh);
    let quad = gauss_rect(mesh, 3)?;

    // Reference points in the same tensor order as gauss_rect.
    let (gx, _) = gauss_legendre(3);
    let mut ref_pts = Vec::with_capacity(9);
    for &ey in &gx {
        for &ex in &gx {
            ref_pts.push((ex, ey));
        }
    }
    // Shape data at the 9 reference points, shared by every cell.
    let shape: Vec<Vec<(f64, [f64; 2], [f64; 3])>> = (0..12)
        .map(|k| ref_pts.iter().map(|&(x, y)| basis.eval(k, x, y)).collect())
        .collect();

    let nq = quad.n_points();
    let mut pi = SparseBuilder::new(nq, space.n_dofs);
    let mut grad = SparseBuilder::new(2 * nq, space.n_dofs);
    let mut hb = SparseBuilder::new(4 * nq, space.n_dofs);

    for (ci, cell) in mesh.cells.iter().enumerate() {
        let (x0, x1, y0, y1) = rect_bounds(mesh, ci);
        let (hx2, hy2) = (0.5 * (x1 - x0), 0.5 * (y1 - y0));
        // Map each cell vertex to its reference corner by coordinates.
        let mut corner_vertex = [usize::MAX; 4];
        for &v in &cell.vertices {
            let p = mesh.vertex_xy(v);
            let cx = if (p[0] - x0).abs() < (p[0] - x1).abs() { -1.0 } else { 1.0 };
            let cy = if (p[1] - y0).abs() < (p[1] - y1).abs() { -1.0 } else { 1.0 };
            let slot = CORNERS
                .iter()
                .position(|&c| c == (cx, cy))
                .expect("corner match");
            corner_vertex[slot] = v;
        }
        let (qs, _) = quad.cell_ranges[ci];
        for (rp, _) in ref_pts.iter().enumerate() {
            let q = qs + rp;
            for (slot, &v) in corner_vertex.iter().enumerate() {
                let Some(base) = space.dof_of_vertex[v] else {
                    continue;
                };
                // Local dofs (value, dxi, deta) scale the physical dofs
                // (value, dx, dy) by (1, hx/2, hy/2).
                let scales = [1.0, hx2, hy2];
                for c in 0..3 {
                    let k = 3 * slot + c;
                    let (val, g, h) = shape[k][rp];
                    let s = scales[c];
                    let dof = base + c;
                    pi.add(q, dof, s * val);
                    grad.add(2 * q, dof, s * g[0] / hx2);
                    grad.add(2 * q + 1, dof, s * g[1] / hy2);
                    hb.add(4 * q, dof, s * h[0] / (hx2 * hx2));
                    hb.add(4 * q + 1, dof, s * h[1] / (hx2 * hy2));
                    hb.add(4 * q + 2, dof, s * h[1] / (hx2 * hy2));
                    hb.add(4 * q + 3, dof, s * h[2] / (hy2 * hy2));
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

/// Global dof interpolation of a smooth field: (value, dx, dy) at each
/// interior vertex. Boundary dofs are implicitly zero, so this is the
/// clamped interpolant.
pub fn interpolate_dofs(
    mesh: &PolytopalMesh,
    space: &AdiniSpace,
    phi: &crate::exact::ExactSolution,
) -> Vec<f64> {
    let mut dofs = vec![0.0; space.n_dofs];
    for (vi, v) in mesh.vertices.iter().enumerate() {
        if let Some(base) = space.dof_of_vertex[vi] {
            let j = phi.eval_jet(v.x, v.y);
            dofs[base] = j.value();
            dofs[base + 1] = j.dx();
            dofs[base + 2] = j.dy();
        }
    }
    dofs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hd::assemble_stiffness;
    use crate::mesh::{gen_square_mesh, gen_triangular_mesh, Domain};
    use crate::sparse::{factorize, FactorKind};
    use approx::assert_relative_eq;

    #[test]
    fn nodal_duality() {
        let b = build_reference_basis().unwrap();
        for k in 0..12 {
            for (ci, &(cx, cy)) in CORNERS.iter().enumerate() {
                let (v, g, _) = b.eval(k, cx, cy);
                let functionals = [v, g[0], g[1]];
                for c in 0..3 {
                    let expect = if 3 * ci + c == k { 1.0 } else { 0.0 };
                    assert_relative_eq!(functionals[c], expect, epsilon = 1e-12);
                }
            }
        }
    }

    /// Local dof vector of a closed-form function on the reference cell.
    fn local_dofs(f: impl Fn(f64, f64) -> (f64, f64, f64)) -> [f64; 12] {
        let mut d = [0.0; 12];
        for (ci, &(cx, cy)) in CORNERS.iter().enumerate() {
            let (v, gx, gy) = f(cx, cy);
            d[3 * ci] = v;
            d[3 * ci + 1] = gx;
            d[3 * ci + 2] = gy;
        }
        d
    }

    #[test]
    fn reproduces_local_space_members() {
        let b = build_reference_basis().unwrap();
        // x^3 y and the constant 1 are both in the local space.
        let p = |x: f64, y: f64| (x * x * x * y, 3.0 * x * x * y, x * x * x);
        let one = |_: f64, _: f64| (1.0, 0.0, 0.0);
        for (f, exact) in [
            (
                local_dofs(p),
                Box::new(|x: f64, y: f64| x * x * x * y) as Box<dyn Fn(f64, f64) -> f64>,
            ),
            (local_dofs(one), Box::new(|_, _| 1.0)),
        ] {
            for &(x, y) in &[(0.3, -0.7), (0.0, 0.0), (-0.9, 0.2), (1.0, 1.0)] {
                assert_relative_eq!(b.interpolate(&f, x, y), exact(x, y), epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn x2y2_is_not_in_the_space() {
        let b = build_reference_basis().unwrap();
        let d = local_dofs(|x, y| (x * x * y * y, 2.0 * x * y * y, 2.0 * x * x * y));
        let at_center = b.interpolate(&d, 0.0, 0.0);
        assert!((at_center - 0.0).abs() > 0.1, "interpolant = {at_center}");
    }

    #[test]
    fn n2_has_three_dofs() {
        let mesh = gen_square_mesh(2, Domain::UnitSquare).unwrap();
        let hd = build_adini_hd(&mesh).unwrap();
        assert_eq!(hd.n_dofs, 3);
    }

    #[test]
    fn broken_hessian_exact_on_cubics() {
        // Per-cell interpolation of w = x^3 (unconstrained local dofs)
        // must reproduce w_xx = 6x at every quadrature point.
        let mesh = gen_square_mesh(3, Domain::UnitSquare).unwrap();
        let basis = build_reference_basis().unwrap();
        let quad = gauss_rect(&mesh, 3).unwrap();
        let (gx, _) = gauss_legendre(3);
        for (ci, _) in mesh.cells.iter().enumerate() {
            let (x0, x1, y0, y1) = rect_bounds(&mesh, ci);
            let (hx2, hy2) = (0.5 * (x1 - x0), 0.5 * (y1 - y0));
            let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
            // Local dofs of x^3 in reference scaling.
            let mut d = [0.0; 12];
            for (s, &(rx, ry)) in CORNERS.iter().enumerate() {
                let x = cx + hx2 * rx;
                let _y = cy + hy2 * ry;
                d[3 * s] = x * x * x;
                d[3 * s + 1] = hx2 * 3.0 * x * x;
                d[3 * s + 2] = 0.0;
            }
            let mut rp = Vec::new();
            for &ey in &gx {
                for &ex in &gx {
                    rp.push((ex, ey));
                }
            }
            let (qs, _) = quad.cell_ranges[ci];
            for (i, &(xi, eta)) in rp.iter().enumerate() {
                let x = quad.points[qs + i][0];
                let hxx: f64 = (0..12)
                    .map(|k| d[k] * basis.eval(k, xi, eta).2[0] / (hx2 * hx2))
                    .sum();
                assert_relative_eq!(hxx, 6.0 * x, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn vertex_continuity() {
        let mesh = gen_square_mesh(4, Domain::UnitSquare).unwrap();
        let space = adini_space(&mesh);
        let basis = build_reference_basis().unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let dofs: Vec<f64> = (0..space.n_dofs).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Evaluate Pi at each vertex from every adjacent cell.
        for (vi, v) in mesh.vertices.iter().enumerate() {
            let mut values = Vec::new();
            for (ci, cell) in mesh.cells.iter().enumerate() {
                if !cell.vertices.contains(&vi) {
                    continue;
                }
                let (x0, x1, y0, y1) = rect_bounds(&mesh, ci);
                let (hx2, hy2) = (0.5 * (x1 - x0), 0.5 * (y1 - y0));
                let xi = (v.x - 0.5 * (x0 + x1)) / hx2;
                let eta = (v.y - 0.5 * (y0 + y1)) / hy2;
                let mut local = [0.0; 12];
                for (slot, &(rx, ry)) in CORNERS.iter().enumerate() {
                    let p = [0.5 * (x0 + x1) + hx2 * rx, 0.5 * (y0 + y1) + hy2 * ry];
                    let vert = cell
                        .vertices
                        .iter()
                        .copied()
                        .find(|&w| {
                            let q = mesh.vertex_xy(w);
                            (q[0] - p[0]).abs() + (q[1] - p[1]).abs() < 1e-12
                        })
                        .unwrap();
                    if let Some(base) = space.dof_of_vertex[vert] {
                        local[3 * slot] = dofs[base];
                        local[3 * slot + 1] = hx2 * dofs[base + 1];
                        local[3 * slot + 2] = hy2 * dofs[base + 2];
                    }
                }
                values.push(basis.interpolate(&local, xi, eta));
            }
            for w in &values[1..] {
                assert_relative_eq!(*w, values[0], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn stiffness_spd() {
        let mesh = gen_square_mesh(4, Domain::UnitSquare).unwrap();
        let hd = build_adini_hd(&mesh).unwrap();
        let a = assemble_stiffness(&hd).unwrap();
        assert!(a.symmetry_defect() < 1e-10);
        assert!(factorize(&a, FactorKind::Spd).is_ok());
    }

    #[test]
    fn rejects_triangles() {
        let mesh = gen_triangular_mesh(2, Domain::UnitSquare).unwrap();
        assert!(matches!(
            build_adini_hd(&mesh),
            Err(HessdiscError::SchemeMeshMismatch(_))
        ));
    }
}
