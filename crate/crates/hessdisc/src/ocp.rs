//! The distributed optimal control problem and its primal-dual active set
//! (PDAS) solver on the piecewise-constant control space.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{HessdiscError, Result};
use crate::hd::{
    assemble_load, assemble_pi_mass, assemble_stiffness, DiscreteFunction, HessianDiscretisation,
};
use crate::mesh::PolytopalMesh;
use crate::quadrature::QuadratureLayout;
use crate::sparse::{solve_block_2x2, SparseBuilder, SparseMatrix};

pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Pointwise projection onto [a, b]. Errors if a > b.
pub fn clamp(s: f64, a: f64, b: f64) -> Result<f64> {
    if a > b {
        return Err(HessdiscError::InvalidArgument(format!(
            "control bounds reversed: lo = {a} > hi = {b}"
        )));
    }
    Ok(s.max(a).min(b))
}

#[derive(Clone, Debug, PartialEq)]
pub enum ControlSupport {
    FullDomain,
    /// Control acts only on the listed cells.
    Cells(Vec<usize>),
}

/// min over (y, u):  1/2 ||y - y_d||^2 + alpha/2 ||u - u_d||^2
/// subject to  Delta^2 y = f + u chi_omega  (clamped BCs)  and  lo <= u <= hi.
#[derive(Clone)]
pub struct OcpProblem {
    pub alpha: f64,
    pub lo: f64,
    pub hi: f64,
    pub f: ScalarField,
    pub y_d: ScalarField,
    pub u_d: ScalarField,
    pub support: ControlSupport,
}

impl OcpProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(HessdiscError::InvalidArgument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.lo > self.hi {
            return Err(HessdiscError::InvalidArgument(format!(
                "control bounds reversed: lo = {} > hi = {}",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn omega_cells(&self, mesh: &PolytopalMesh) -> Vec<usize> {
        match &self.support {
            ControlSupport::FullDomain => (0..mesh.n_cells()).collect(),
            ControlSupport::Cells(cs) => cs.clone(),
        }
    }
}

/// Per-cell constants of the control space over the cells of omega.
#[derive(Clone, Debug)]
pub struct ControlVector {
    /// Cell indices this control lives on.
    pub cells: Vec<usize>,
    pub values: Vec<f64>,
}

/// L2 projection onto piecewise constants: (P_h g)_K = (1/|K|) int_K g,
/// computed with the given quadrature layout.
pub fn project_ph(
    g: impl Fn(f64, f64) -> f64,
    mesh: &PolytopalMesh,
    quad: &QuadratureLayout,
) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_cells()];
    for (ci, &(s, e)) in quad.cell_ranges.iter().enumerate() {
        let mut acc = 0.0;
        for q in s..e {
            let p = quad.points[q];
            acc += quad.weights[q] * g(p[0], p[1]);
        }
        out[ci] = acc / mesh.cells[ci].measure;
    }
    out
}

/// Control coupling B[i, c] = int_{K_c} Pi_D phi_i over the omega cells.
fn control_coupling(
    hd: &HessianDiscretisation,
    omega: &[usize],
    n_cells: usize,
) -> SparseMatrix {
    let mut col_of_cell = vec![None; n_cells];
    for (j, &c) in omega.iter().enumerate() {
        col_of_cell[c] = Some(j);
    }
    let mut b = SparseBuilder::new(hd.n_dofs, omega.len());
    for q in 0..hd.quad.n_points() {
        let Some(col) = col_of_cell[hd.quad.cell_of[q]] else {
            continue;
        };
        let w = hd.quad.weights[q];
        let (cols, vals) = hd.pi.row(q);
        for (&i, &v) in cols.iter().zip(vals) {
            b.add(i, col, w * v);
        }
    }
    b.build()
}

fn negate(m: &SparseMatrix) -> SparseMatrix {
    let mut b = SparseBuilder::new(m.n_rows, m.n_cols);
    for i in 0..m.n_rows {
        let (cols, vals) = m.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            b.add(i, c, -v);
        }
    }
    b.build()
}

#[derive(Clone, Debug)]
pub struct KktSolution {
    pub y: DiscreteFunction,
    pub p: DiscreteFunction,
    pub u: ControlVector,
    /// Post-processed control sampled at the quadrature points.
    pub u_tilde_quad: Vec<f64>,
    pub iterations: usize,
    /// (|A_lo|, |A_hi|) per iteration.
    pub active_history: Vec<(usize, usize)>,
}

const PDAS_MAX_ITERS: usize = 100;

/// Primal-dual active set solve of the discrete KKT system (state,
/// adjoint, projection relation) with piecewise-constant controls.
pub fn pdas_solve(
    problem: &OcpProblem,
    hd: &HessianDiscretisation,
    mesh: &PolytopalMesh,
) -> Result<KktSolution> {
    problem.validate()?;
    let omega = problem.omega_cells(mesh);
    let a_mat = assemble_stiffness(hd)?;
    let m_pi = assemble_pi_mass(hd);
    let neg_m_pi = negate(&m_pi);
    let f_vec = assemble_load(hd, |x, y| (problem.f)(x, y));
    let g_vec = assemble_load(hd, |x, y| (problem.y_d)(x, y));
    let b_ctl = control_coupling(hd, &omega, mesh.n_cells());
    let b_t = b_ctl.transpose();
    let phud_all = project_ph(|x, y| (problem.u_d)(x, y), mesh, &hd.quad);
    let phud: Vec<f64> = omega.iter().map(|&c| phud_all[c]).collect();
    let inv_measure: Vec<f64> = omega.iter().map(|&c| 1.0 / mesh.cells[c].measure).collect();
    let alpha = problem.alpha;
    let (lo, hi) = (problem.lo, problem.hi);

    let mut p = vec![0.0; hd.n_dofs];
    let mut y = vec![0.0; hd.n_dofs];
    let mut prev_sets: Option<(BTreeSet<usize>, BTreeSet<usize>)> = None;
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        // Candidate control per omega cell from the current multiplier.
        let bp = b_t.matvec(&p);
        let t: Vec<f64> = (0..omega.len())
            .map(|j| phud[j] - bp[j] * inv_measure[j] / alpha)
            .collect();
        let a_lo: BTreeSet<usize> = (0..omega.len()).filter(|&j| t[j] < lo).collect();
        let a_hi: BTreeSet<usize> = (0..omega.len()).filter(|&j| t[j] > hi).collect();
        if prev_sets.as_ref() == Some(&(a_lo.clone(), a_hi.clone())) {
            let u_vals: Vec<f64> = t.iter().map(|&s| s.max(lo).min(hi)).collect();
            let u_tilde_quad = post_process(problem, hd, mesh, &p)?;
            return Ok(KktSolution {
                y: DiscreteFunction { dofs: y },
                p: DiscreteFunction { dofs: p },
                u: ControlVector {
                    cells: omega,
                    values: u_vals,
                },
                u_tilde_quad,
                iterations,
                active_history: history,
            });
        }
        if iterations >= PDAS_MAX_ITERS {
            return Err(HessdiscError::PdasNonConvergence {
                iterations,
                history,
            });
        }
        history.push((a_lo.len(), a_hi.len()));

        // Eliminate the inactive controls, fix the active ones, and solve
        // the coupled system in (y, p):
        //   A y + (1/alpha) B_I D_I^{-1} B_I^T p = F + B_act u_act + B_I phud_I
        //   -M_Pi y + A p = -G
        let mut c12 = SparseBuilder::new(hd.n_dofs, hd.n_dofs);
        let mut rhs1 = f_vec.clone();
        for j in 0..omega.len() {
            let (cols, vals) = b_t.row(j);
            if a_lo.contains(&j) || a_hi.contains(&j) {
                let fixed = if a_lo.contains(&j) { lo } else { hi };
                for (&i, &v) in cols.iter().zip(vals) {
                    rhs1[i] += v * fixed;
                }
            } else {
                for (&i, &v) in cols.iter().zip(vals) {
                    rhs1[i] += v * phud[j];
                }
                let scale = inv_measure[j] / alpha;
                for (ki, (&i, &vi)) in cols.iter().zip(vals).enumerate() {
                    for (&k, &vk) in cols[ki..].iter().zip(&vals[ki..]) {
                        let a = scale * vi * vk;
                        c12.add(i, k, a);
                        if i != k {
                            c12.add(k, i, a);
                        }
                    }
                }
            }
        }
        let rhs2: Vec<f64> = g_vec.iter().map(|v| -v).collect();
        let (ys, ps) = solve_block_2x2(&a_mat, &c12.build(), &neg_m_pi, &a_mat, &rhs1, &rhs2)?;
        y = ys;
        p = ps;
        prev_sets = Some((a_lo, a_hi));
        iterations += 1;
    }
}

/// Post-processed control at the quadrature points:
/// u~(x) = clamp(P_h u_d(x) - (1/alpha) Pi_D p(x)) on omega, 0 elsewhere.
pub fn post_process(
    problem: &OcpProblem,
    hd: &HessianDiscretisation,
    mesh: &PolytopalMesh,
    p_dofs: &[f64],
) -> Result<Vec<f64>> {
    problem.validate()?;
    let omega = problem.omega_cells(mesh);
    let mut in_omega = vec![false; mesh.n_cells()];
    for &c in &omega {
        in_omega[c] = true;
    }
    let phud = project_ph(|x, y| (problem.u_d)(x, y), mesh, &hd.quad);
    let pi_p = hd.sample_pi(p_dofs);
    let mut out = vec![0.0; hd.quad.n_points()];
    for q in 0..hd.quad.n_points() {
        let c = hd.quad.cell_of[q];
        if in_omega[c] {
            out[q] = clamp(phud[c] - pi_p[q] / problem.alpha, problem.lo, problem.hi)?;
        }
    }
    Ok(out)
}

/// Largest violation of the discrete projection relation
/// u_c = clamp((P_h u_d)_c - (1/alpha)(P_h Pi_D p)_c) at the solution.
pub fn optimality_residual(
    problem: &OcpProblem,
    hd: &HessianDiscretisation,
    mesh: &PolytopalMesh,
    sol: &KktSolution,
) -> f64 {
    let b_ctl = control_coupling(hd, &sol.u.cells, mesh.n_cells());
    let bp = b_ctl.transpose_matvec(&sol.p.dofs);
    let phud_all = project_ph(|x, y| (problem.u_d)(x, y), mesh, &hd.quad);
    let mut worst = 0.0f64;
    for (j, &c) in sol.u.cells.iter().enumerate() {
        let t = phud_all[c] - bp[j] / mesh.cells[c].measure / problem.alpha;
        let expect = t.max(problem.lo).min(problem.hi);
        worst = worst.max((sol.u.values[j] - expect).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{gen_square_mesh, Domain};
    use crate::quadrature::cell_midpoint;
    use crate::schemes::fvm::build_fvm_hd;
    use approx::assert_relative_eq;

    #[test]
    fn clamp_spec_values() {
        assert_eq!(clamp(-900.0, -750.0, -50.0).unwrap(), -750.0);
        assert_eq!(clamp(-100.0, -750.0, -50.0).unwrap(), -100.0);
        assert_eq!(clamp(0.0, -750.0, -50.0).unwrap(), -50.0);
        assert!(clamp(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let mesh = gen_square_mesh(4, Domain::UnitSquare).unwrap();
        let quad = cell_midpoint(&mesh);
        let c = project_ph(|_, _| 7.5, &mesh, &quad);
        assert!(c.iter().all(|&v| (v - 7.5).abs() < 1e-14));
        // g = x on [0, 1/4] x [0, 1/4] averages to 1/8 (midpoint exact
        // for linear g).
        let lin = project_ph(|x, _| x, &mesh, &quad);
        assert_relative_eq!(lin[0], 0.125, max_relative = 1e-13);
    }

    fn toy_problem(alpha: f64, lo: f64, hi: f64) -> OcpProblem {
        OcpProblem {
            alpha,
            lo,
            hi,
            f: Arc::new(|x: f64, y: f64| {
                (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin() * 100.0
            }),
            y_d: Arc::new(|_, _| 0.01),
            u_d: Arc::new(|_, _| 0.0),
            support: ControlSupport::FullDomain,
        }
    }

    #[test]
    fn unconstrained_converges_in_one_iteration() {
        let mesh = gen_square_mesh(6, Domain::UnitSquare).unwrap();
        let hd = build_fvm_hd(&mesh).unwrap();
        let problem = toy_problem(1e-2, -1e300, 1e300);
        let sol = pdas_solve(&problem, &hd, &mesh).unwrap();
        assert_eq!(sol.iterations, 1);
        assert!(sol.active_history.iter().all(|&(a, b)| a == 0 && b == 0));
        let res = optimality_residual(&problem, &hd, &mesh, &sol);
        assert!(res < 1e-10, "residual {res}");
    }

    #[test]
    fn box_constraints_respected_and_fixed_point_holds() {
        let mesh = gen_square_mesh(8, Domain::UnitSquare).unwrap();
        let hd = build_fvm_hd(&mesh).unwrap();
        let problem = toy_problem(1e-4, -0.5, 0.5);
        let sol = pdas_solve(&problem, &hd, &mesh).unwrap();
        assert!(sol
            .u
            .values
            .iter()
            .all(|&u| (-0.5..=0.5).contains(&u)));
        assert!(optimality_residual(&problem, &hd, &mesh, &sol) < 1e-10);
        assert!(sol
            .u_tilde_quad
            .iter()
            .all(|&u| (-0.5..=0.5).contains(&u)));
    }

    #[test]
    fn control_norm_decreases_with_alpha() {
        let mesh = gen_square_mesh(6, Domain::UnitSquare).unwrap();
        let hd = build_fvm_hd(&mesh).unwrap();
        let mut norms = Vec::new();
        for alpha in [1.0, 1e3, 1e6] {
            let problem = toy_problem(alpha, -1.0, 1.0);
            let sol = pdas_solve(&problem, &hd, &mesh).unwrap();
            let n: f64 = sol
                .u
                .cells
                .iter()
                .zip(&sol.u.values)
                .map(|(&c, &u)| mesh.cells[c].measure * u * u)
                .sum::<f64>()
                .sqrt();
            norms.push(n);
        }
        assert!(norms[0] > norms[1] && norms[1] > norms[2]);
    }

    #[test]
    fn zero_adjoint_post_process_is_clamped_ud() {
        let mesh = gen_square_mesh(4, Domain::UnitSquare).unwrap();
        let hd = build_fvm_hd(&mesh).unwrap();
        let problem = toy_problem(1e-3, 0.25, 1.0);
        let p = vec![0.0; hd.n_dofs];
        let ut = post_process(&problem, &hd, &mesh, &p).unwrap();
        // u_d = 0 clamps to the lower bound everywhere.
        assert!(ut.iter().all(|&v| (v - 0.25).abs() < 1e-14));
    }

    #[test]
    fn invalid_problem_rejected() {
        let mut bad = toy_problem(0.0, -1.0, 1.0);
        assert!(bad.validate().is_err());
        bad.alpha = 1.0;
        bad.lo = 2.0;
        assert!(bad.validate().is_err());
    }
}
