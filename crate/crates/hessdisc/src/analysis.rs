//! Relative error norms, estimated orders of convergence and table output.

use crate::error::{HessdiscError, Result};
use crate::exact::ExactTriple;
use crate::hd::{BKind, HessianDiscretisation};
use crate::mesh::PolytopalMesh;
use crate::ocp::KktSolution;

/// Column order of every report and table.
pub const QUANTITIES: [&str; 8] = [
    "err_y",
    "err_grad_y",
    "err_hess_y",
    "err_u",
    "err_p",
    "err_grad_p",
    "err_hess_p",
    "err_u_tilde",
];

/// Relative errors of one solve. The Hessian-norm entries compare the full
/// reconstructed Hessian for identity-B schemes and the discrete Laplacian
/// (trace of HB over sqrt(2)) for the finite volume scheme.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub values: [f64; 8],
    pub denominators: [f64; 8],
}

impl ErrorReport {
    pub fn get(&self, name: &str) -> f64 {
        let i = QUANTITIES.iter().position(|&q| q == name).expect("known quantity");
        self.values[i]
    }
}

struct NormAcc {
    num: f64,
    den: f64,
}

impl NormAcc {
    fn new() -> Self {
        NormAcc { num: 0.0, den: 0.0 }
    }

    fn add(&mut self, w: f64, approx: f64, exact: f64) {
        let d = approx - exact;
        self.num += w * d * d;
        self.den += w * exact * exact;
    }

    fn finish(self, name: &str) -> Result<(f64, f64)> {
        if self.den <= 0.0 {
            return Err(HessdiscError::ZeroDenominator(name.to_string()));
        }
        let den = self.den.sqrt();
        Ok((self.num.sqrt() / den, den))
    }
}

/// Relative errors of a KKT solution against the exact triple, in the
/// scheme's own quadrature.
pub fn compute_errors(
    hd: &HessianDiscretisation,
    sol: &KktSolution,
    exact: &ExactTriple,
    mesh: &PolytopalMesh,
) -> Result<ErrorReport> {
    let nq = hd.quad.n_points();
    let piy = hd.sample_pi(&sol.y.dofs);
    let gy = hd.sample_grad(&sol.y.dofs);
    let hy = hd.sample_hb(&sol.y.dofs);
    let pip = hd.sample_pi(&sol.p.dofs);
    let gp = hd.sample_grad(&sol.p.dofs);
    let hp = hd.sample_hb(&sol.p.dofs);
    let mut u_of_cell = vec![0.0; mesh.n_cells()];
    for (&c, &v) in sol.u.cells.iter().zip(&sol.u.values) {
        u_of_cell[c] = v;
    }

    let laplacian_mode = hd.b_kind == BKind::TraceIsotropic;
    let mut acc: Vec<NormAcc> = (0..8).map(|_| NormAcc::new()).collect();
    for q in 0..nq {
        let [x, y] = hd.quad.points[q];
        let w = hd.quad.weights[q];
        let jy = exact.state.eval_jet(x, y);
        let jp = exact.adjoint.eval_jet(x, y);
        acc[0].add(w, piy[q], jy.value());
        acc[1].add(w, gy[2 * q], jy.dx());
        acc[1].add(w, gy[2 * q + 1], jy.dy());
        acc[4].add(w, pip[q], jp.value());
        acc[5].add(w, gp[2 * q], jp.dx());
        acc[5].add(w, gp[2 * q + 1], jp.dy());
        if laplacian_mode {
            let s2 = std::f64::consts::SQRT_2;
            acc[2].add(w, (hy[4 * q] + hy[4 * q + 3]) / s2, jy.laplacian());
            acc[6].add(w, (hp[4 * q] + hp[4 * q + 3]) / s2, jp.laplacian());
        } else {
            let ey = [jy.dxx(), jy.dxy(), jy.dxy(), jy.dyy()];
            let ep = [jp.dxx(), jp.dxy(), jp.dxy(), jp.dyy()];
            for c in 0..4 {
                acc[2].add(w, hy[4 * q + c], ey[c]);
                acc[6].add(w, hp[4 * q + c], ep[c]);
            }
        }
        let ubar = (exact.control)(x, y);
        acc[3].add(w, u_of_cell[hd.quad.cell_of[q]], ubar);
        acc[7].add(w, sol.u_tilde_quad[q], ubar);
    }

    // The one-point midpoint rule samples the exact control where the cell
    // constant is second-order accurate and would hide the O(h) part of the
    // piecewise-constant error; measure err(u) with a volumetric rule there.
    if hd.quad.rule_id.starts_with("cell-midpoint") {
        if let Some(cq) = control_quadrature(mesh) {
            let mut a = NormAcc::new();
            for q in 0..cq.n_points() {
                let [x, y] = cq.points[q];
                let ubar = (exact.control)(x, y);
                a.add(cq.weights[q], u_of_cell[cq.cell_of[q]], ubar);
            }
            acc[3] = a;
        }
    }

    let mut values = [0.0; 8];
    let mut denominators = [0.0; 8];
    for (i, a) in acc.into_iter().enumerate() {
        let (v, d) = a.finish(QUANTITIES[i])?;
        values[i] = v;
        denominators[i] = d;
    }
    Ok(ErrorReport {
        values,
        denominators,
    })
}

fn control_quadrature(mesh: &PolytopalMesh) -> Option<crate::quadrature::QuadratureLayout> {
    if mesh.all_rectangles() {
        crate::quadrature::gauss_rect(mesh, 4).ok()
    } else if mesh.all_triangles() {
        crate::quadrature::tri_order4_refined(mesh, 1).ok()
    } else {
        None
    }
}

/// Estimated order of convergence over a refinement pair.
pub fn compute_eoc(h_coarse: f64, e_coarse: f64, h_fine: f64, e_fine: f64) -> Result<f64> {
    if !(h_coarse > 0.0 && h_fine > 0.0 && e_coarse > 0.0 && e_fine > 0.0) {
        return Err(HessdiscError::InvalidArgument(
            "EOC needs positive mesh sizes and errors".into(),
        ));
    }
    if h_coarse == h_fine {
        return Err(HessdiscError::InvalidArgument(
            "EOC needs distinct mesh sizes".into(),
        ));
    }
    Ok((e_coarse / e_fine).ln() / (h_coarse / h_fine).ln())
}

/// Errors per level for the tracked quantities, with derived EOC columns.
#[derive(Clone, Debug, Default)]
pub struct ConvergenceTable {
    pub hs: Vec<f64>,
    /// rows[level][quantity].
    pub rows: Vec<[f64; 8]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl ConvergenceTable {
    pub fn push(&mut self, h: f64, report: &ErrorReport) {
        self.hs.push(h);
        self.rows.push(report.values);
    }

    /// EOC of quantity `qi` between consecutive rows; None on the first.
    pub fn order(&self, level: usize, qi: usize) -> Option<f64> {
        if level == 0 {
            return None;
        }
        compute_eoc(
            self.hs[level - 1],
            self.rows[level - 1][qi],
            self.hs[level],
            self.rows[level][qi],
        )
        .ok()
    }

    pub fn emit(&self, format: TableFormat) -> String {
        match format {
            TableFormat::Csv => self.emit_csv(),
            TableFormat::Markdown => self.emit_markdown(),
        }
    }

    fn emit_csv(&self) -> String {
        let mut s = String::new();
        for (qi, name) in QUANTITIES.iter().enumerate() {
            s.push_str(&format!("# {name}\n"));
            s.push_str("h,err,order\n");
            for (level, &h) in self.hs.iter().enumerate() {
                let order = match self.order(level, qi) {
                    Some(o) => format!("{o:.4}"),
                    None => "-".to_string(),
                };
                s.push_str(&format!("{h:.6},{:.5e},{order}\n", self.rows[level][qi]));
            }
        }
        s
    }

    fn emit_markdown(&self) -> String {
        let mut s = String::new();
        for (title, base) in [("state / control", 0), ("adjoint / post-processed", 4)] {
            s.push_str(&format!("**{title}**\n\n"));
            s.push_str("| h |");
            for qi in base..base + 4 {
                s.push_str(&format!(" {} | order |", QUANTITIES[qi]));
            }
            s.push('\n');
            s.push_str("|---|");
            for _ in 0..8 {
                s.push_str("---|");
            }
            s.push('\n');
            for (level, &h) in self.hs.iter().enumerate() {
                s.push_str(&format!("| {h:.6} |"));
                for qi in base..base + 4 {
                    let order = match self.order(level, qi) {
                        Some(o) => format!("{o:.4}"),
                        None => "-".to_string(),
                    };
                    s.push_str(&format!(" {:.5e} | {order} |", self.rows[level][qi]));
                }
                s.push('\n');
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eoc_examples() {
        assert_relative_eq!(compute_eoc(0.2, 0.2, 0.1, 0.05).unwrap(), 2.0);
        assert_relative_eq!(compute_eoc(0.2, 0.1, 0.1, 0.1).unwrap(), 0.0);
        // A published refinement pair.
        assert_relative_eq!(
            compute_eoc(0.176777, 0.190741, 0.088388, 0.081011).unwrap(),
            1.2354,
            max_relative = 1e-4
        );
        assert!(compute_eoc(0.2, 0.0, 0.1, 0.1).is_err());
        assert!(compute_eoc(0.1, 1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn empty_table_emits_headers_only() {
        let t = ConvergenceTable::default();
        let csv = t.emit(TableFormat::Csv);
        assert!(csv.contains("# err_y\nh,err,order\n"));
        assert_eq!(csv.lines().filter(|l| l.contains(',')).count(), 8);
    }

    #[test]
    fn csv_round_trips_one_row() {
        let mut t = ConvergenceTable::default();
        t.push(
            0.25,
            &ErrorReport {
                values: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
                denominators: [1.0; 8],
            },
        );
        let csv = t.emit(TableFormat::Csv);
        let mut seen = 0;
        for line in csv.lines() {
            if line.starts_with('#') || line.starts_with('h') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            assert_eq!(parts.len(), 3);
            let h: f64 = parts[0].parse().unwrap();
            let e: f64 = parts[1].parse().unwrap();
            assert_relative_eq!(h, 0.25);
            assert!(e > 0.0);
            assert_eq!(parts[2], "-");
            seen += 1;
        }
        assert_eq!(seen, 8);
    }
}
