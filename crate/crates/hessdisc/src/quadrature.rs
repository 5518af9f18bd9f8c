//! Per-cell quadrature layouts shared by all discretisations.
//!
//! Three rules are used in production: midpoint at the FV center x_K
//! (the "skewed midpoint" rule), tensor 3x3 Gauss on rectangles, and a
//! 6-point order-4 rule on triangles. Higher-order variants exist for
//! oracle comparisons in tests.

use crate::error::{HessdiscError, Result};
use crate::mesh::PolytopalMesh;

#[derive(Clone, Debug)]
pub struct QuadratureLayout {
    pub points: Vec<[f64; 2]>,
    /// Area-unit weights; per cell they sum to |K|.
    pub weights: Vec<f64>,
    /// Owning cell of each point.
    pub cell_of: Vec<usize>,
    /// Half-open point index range per cell.
    pub cell_ranges: Vec<(usize, usize)>,
    pub rule_id: String,
}

impl QuadratureLayout {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Integrates a scalar field over the whole layout.
    pub fn integrate(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * g(p[0], p[1]))
            .sum()
    }
}

/// One point per cell at the FV center x_K, weight |K|.
pub fn cell_midpoint(mesh: &PolytopalMesh) -> QuadratureLayout {
    let n = mesh.cells.len();
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut cell_of = Vec::with_capacity(n);
    let mut cell_ranges = Vec::with_capacity(n);
    for (ci, c) in mesh.cells.iter().enumerate() {
        cell_ranges.push((ci, ci + 1));
        points.push(c.center);
        weights.push(c.measure);
        cell_of.push(ci);
    }
    QuadratureLayout {
        points,
        weights,
        cell_of,
        cell_ranges,
        rule_id: "cell-midpoint".into(),
    }
}

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Tensor n x n Gauss rule on each (axis-aligned rectangular) cell.
pub fn gauss_rect(mesh: &PolytopalMesh, n: usize) -> Result<QuadratureLayout> {
    if !mesh.all_rectangles() {
        return Err(HessdiscError::SchemeMeshMismatch(
            "axis-aligned rectangular cells for tensor Gauss quadrature".into(),
        ));
    }
    let (xs, ws) = gauss_legendre(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut cell_of = Vec::new();
    let mut cell_ranges = Vec::new();
    for (ci, c) in mesh.cells.iter().enumerate() {
        let (x0, x1, y0, y1) = rect_bounds(mesh, ci);
        let (hx, hy) = (0.5 * (x1 - x0), 0.5 * (y1 - y0));
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let start = points.len();
        for (j, &gy) in xs.iter().enumerate() {
            for (i, &gx) in xs.iter().enumerate() {
                points.push([cx + hx * gx, cy + hy * gy]);
                weights.push(ws[i] * ws[j] * hx * hy);
                cell_of.push(ci);
            }
        }
        let _ = c;
        cell_ranges.push((start, points.len()));
    }
    Ok(QuadratureLayout {
        points,
        weights,
        cell_of,
        cell_ranges,
        rule_id: format!("gauss-{n}x{n}-rect"),
    })
}

/// Bounding box of a rectangular cell.
pub fn rect_bounds(mesh: &PolytopalMesh, ci: usize) -> (f64, f64, f64, f64) {
    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for &v in &mesh.cells[ci].vertices {
        let p = mesh.vertex_xy(v);
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    (x0, x1, y0, y1)
}

// Dunavant degree-4 rule: two symmetric orbits of 3 points.
const TRI4_W1: f64 = 0.223_381_589_678_011;
const TRI4_A1: f64 = 0.445_948_490_915_965;
const TRI4_W2: f64 = 0.109_951_743_655_322;
const TRI4_A2: f64 = 0.091_576_213_509_771;

fn tri4_points() -> [([f64; 3], f64); 6] {
    let orbit = |a: f64, w: f64| {
        let b = 1.0 - 2.0 * a;
        [([b, a, a], w), ([a, b, a], w), ([a, a, b], w)]
    };
    let o1 = orbit(TRI4_A1, TRI4_W1);
    let o2 = orbit(TRI4_A2, TRI4_W2);
    [o1[0], o1[1], o1[2], o2[0], o2[1], o2[2]]
}

/// 6-point order-4 rule on each triangle, optionally on a uniform
/// 4^levels subdivision of every triangle (for oracle integration).
pub fn tri_order4_refined(mesh: &PolytopalMesh, levels: usize) -> Result<QuadratureLayout> {
    if !mesh.all_triangles() {
        return Err(HessdiscError::SchemeMeshMismatch(
            "triangular cells for the order-4 triangle rule".into(),
        ));
    }
    let rule = tri4_points();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut cell_of = Vec::new();
    let mut cell_ranges = Vec::new();
    for (ci, c) in mesh.cells.iter().enumerate() {
        let start = points.len();
        let v: Vec<[f64; 2]> = c.vertices.iter().map(|&p| mesh.vertex_xy(p)).collect();
        let mut tris = vec![[v[0], v[1], v[2]]];
        for _ in 0..levels {
            let mut next = Vec::with_capacity(tris.len() * 4);
            for t in &tris {
                let m01 = mid(t[0], t[1]);
                let m12 = mid(t[1], t[2]);
                let m20 = mid(t[2], t[0]);
                next.push([t[0], m01, m20]);
                next.push([m01, t[1], m12]);
                next.push([m20, m12, t[2]]);
                next.push([m01, m12, m20]);
            }
            tris = next;
        }
        for t in &tris {
            let area = 0.5
                * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1])
                    - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
                    .abs();
            for (bary, w) in rule {
                points.push([
                    bary[0] * t[0][0] + bary[1] * t[1][0] + bary[2] * t[2][0],
                    bary[0] * t[0][1] + bary[1] * t[1][1] + bary[2] * t[2][1],
                ]);
                weights.push(w * area);
                cell_of.push(ci);
            }
        }
        cell_ranges.push((start, points.len()));
    }
    let rule_id = if levels == 0 {
        "gauss-6pt-tri".to_string()
    } else {
        format!("gauss-6pt-tri-sub{levels}")
    };
    Ok(QuadratureLayout {
        points,
        weights,
        cell_of,
        cell_ranges,
        rule_id,
    })
}

pub fn tri_order4(mesh: &PolytopalMesh) -> Result<QuadratureLayout> {
    tri_order4_refined(mesh, 0)
}

fn mid(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_square_mesh, gen_triangular_mesh, Domain};
    use approx::assert_relative_eq;

    fn check_weight_sums(mesh: &PolytopalMesh, q: &QuadratureLayout) {
        for (ci, &(s, e)) in q.cell_ranges.iter().enumerate() {
            let sum: f64 = q.weights[s..e].iter().sum();
            assert_relative_eq!(sum, mesh.cells[ci].measure, max_relative = 1e-12);
            for i in s..e {
                assert_eq!(q.cell_of[i], ci);
            }
        }
    }

    #[test]
    fn gauss_legendre_3_is_standard() {
        let (xs, ws) = gauss_legendre(3);
        let r = (0.6f64).sqrt();
        assert_relative_eq!(xs[0], -r, max_relative = 1e-14);
        assert_relative_eq!(xs[1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(xs[2], r, max_relative = 1e-14);
        assert_relative_eq!(ws[0], 5.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(ws[1], 8.0 / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn rect_rule_exact_for_degree_5() {
        let mesh = gen_square_mesh(2, Domain::UnitSquare).unwrap();
        let q = gauss_rect(&mesh, 3).unwrap();
        check_weight_sums(&mesh, &q);
        // integral of x^5 y^4 over [0,1]^2 = 1/30.
        let val = q.integrate(|x, y| x.powi(5) * y.powi(4));
        assert_relative_eq!(val, 1.0 / 30.0, max_relative = 1e-13);
    }

    #[test]
    fn tri_rule_exact_for_degree_4() {
        let mesh = gen_triangular_mesh(2, Domain::UnitSquare).unwrap();
        let q = tri_order4(&mesh).unwrap();
        check_weight_sums(&mesh, &q);
        // integral of x^2 y^2 over [0,1]^2 = 1/9.
        let val = q.integrate(|x, y| x * x * y * y);
        assert_relative_eq!(val, 1.0 / 9.0, max_relative = 1e-13);
        // degree 5 is not exact but the subdivided rule converges.
        let fine = tri_order4_refined(&mesh, 3).unwrap();
        let v5 = fine.integrate(|x, y| x.powi(4) * y.powi(3));
        assert_relative_eq!(v5, 1.0 / 20.0, max_relative = 1e-9);
    }

    #[test]
    fn midpoint_rule_covers_all_cells() {
        let mesh = gen_square_mesh(4, Domain::LShape).unwrap();
        let q = cell_midpoint(&mesh);
        check_weight_sums(&mesh, &q);
        assert_eq!(q.n_points(), mesh.n_cells());
        assert_relative_eq!(q.total_weight(), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn rect_rule_rejects_triangles() {
        let mesh = gen_triangular_mesh(2, Domain::UnitSquare).unwrap();
        assert!(gauss_rect(&mesh, 3).is_err());
        let sq = gen_square_mesh(2, Domain::UnitSquare).unwrap();
        assert!(tri_order4(&sq).is_err());
    }
}
