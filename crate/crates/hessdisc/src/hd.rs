//! Scheme-agnostic Hessian discretisation core: the (X_D0, Pi_D, Grad_D,
//! H_D^B) quadruplet as sampled operators on a quadrature layout, assembly
//! of the Hessian scheme, and the three intrinsic accuracy diagnostics
//! C_D, S_D, W_D.

use std::sync::Arc;

use crate::error::{HessdiscError, Result};
use crate::exact::ExactSolution;
use crate::quadrature::QuadratureLayout;
use crate::sparse::{dot, factorize, FactorKind, Factorization, SparseBuilder, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BKind {
    /// B = Id on symmetric matrices (FEM, gradient recovery).
    IdentityOnSymmetric,
    /// B xi = tr(xi)/sqrt(d) Id, the finite-volume choice.
    TraceIsotropic,
}

impl BKind {
    /// Applies B to a 2x2 matrix stored as [xx, xy, yx, yy].
    pub fn apply(&self, xi: [f64; 4]) -> [f64; 4] {
        match self {
            BKind::IdentityOnSymmetric => xi,
            BKind::TraceIsotropic => {
                let t = (xi[0] + xi[3]) / std::f64::consts::SQRT_2;
                [t, 0.0, 0.0, t]
            }
        }
    }
}

/// A Hessian discretisation: dof space dimension plus the three
/// reconstruction operators sampled at quadrature points.
///
/// `pi` is n_q x n_dofs, `grad` is 2 n_q x n_dofs (components interleaved
/// per point), `hb` is 4 n_q x n_dofs storing the full 2x2 matrix
/// [xx, xy, yx, yy] per point.
pub struct HessianDiscretisation {
    pub n_dofs: usize,
    pub quad: QuadratureLayout,
    pub pi: SparseMatrix,
    pub grad: SparseMatrix,
    pub hb: SparseMatrix,
    pub b_kind: BKind,
    /// Estimate of the coercivity constant of the bilinear form induced
    /// by B (1 for both B choices used here).
    pub coercivity_estimate: f64,
}

#[derive(Clone, Debug)]
pub struct DiscreteFunction {
    pub dofs: Vec<f64>,
}

impl HessianDiscretisation {
    pub fn check_shapes(&self) -> Result<()> {
        let nq = self.quad.n_points();
        let ok = self.pi.n_rows == nq
            && self.grad.n_rows == 2 * nq
            && self.hb.n_rows == 4 * nq
            && self.pi.n_cols == self.n_dofs
            && self.grad.n_cols == self.n_dofs
            && self.hb.n_cols == self.n_dofs;
        if !ok {
            return Err(HessdiscError::InvalidArgument(
                "operator sample matrices do not match the quadrature layout".into(),
            ));
        }
        Ok(())
    }

    pub fn sample_pi(&self, dofs: &[f64]) -> Vec<f64> {
        self.pi.matvec(dofs)
    }

    pub fn sample_grad(&self, dofs: &[f64]) -> Vec<f64> {
        self.grad.matvec(dofs)
    }

    pub fn sample_hb(&self, dofs: &[f64]) -> Vec<f64> {
        self.hb.matvec(dofs)
    }
}

/// Weighted Gram matrix M = S^T W S for an operator sample matrix with
/// `comps` components per quadrature point.
fn weighted_gram(s: &SparseMatrix, weights: &[f64], comps: usize, n_dofs: usize) -> SparseMatrix {
    let mut b = SparseBuilder::new(n_dofs, n_dofs);
    for r in 0..s.n_rows {
        let w = weights[r / comps];
        let (cols, vals) = s.row(r);
        for (ki, (&i, &vi)) in cols.iter().zip(vals).enumerate() {
            // Exploit symmetry: fill the upper triangle and mirror.
            for (&j, &vj) in cols[ki..].iter().zip(&vals[ki..]) {
                let a = w * vi * vj;
                b.add(i, j, a);
                if i != j {
                    b.add(j, i, a);
                }
            }
        }
    }
    b.build()
}

/// S^T W v for per-point values v sampled like the rows of S.
fn weighted_tmul(s: &SparseMatrix, weights: &[f64], comps: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; s.n_cols];
    for r in 0..s.n_rows {
        let wv = weights[r / comps] * v[r];
        if wv == 0.0 {
            continue;
        }
        let (cols, vals) = s.row(r);
        for (&c, &a) in cols.iter().zip(vals) {
            out[c] += wv * a;
        }
    }
    out
}

/// Stiffness A = HB^T W HB of the Hessian scheme; symmetric positive
/// definite whenever the norm property of the discretisation holds.
pub fn assemble_stiffness(hd: &HessianDiscretisation) -> Result<SparseMatrix> {
    hd.check_shapes()?;
    if hd.quad.total_weight() <= 0.0 {
        return Err(HessdiscError::InvalidArgument(
            "zero-measure quadrature layout".into(),
        ));
    }
    Ok(weighted_gram(&hd.hb, &hd.quad.weights, 4, hd.n_dofs))
}

/// Load vector F_i = sum_q w_q g(x_q) Pi[q, i].
pub fn assemble_load(hd: &HessianDiscretisation, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let vals: Vec<f64> = hd.quad.points.iter().map(|p| g(p[0], p[1])).collect();
    weighted_tmul(&hd.pi, &hd.quad.weights, 1, &vals)
}

/// Mass matrix of the reconstructed function, M_ij = (Pi phi_i, Pi phi_j).
pub fn assemble_pi_mass(hd: &HessianDiscretisation) -> SparseMatrix {
    weighted_gram(&hd.pi, &hd.quad.weights, 1, hd.n_dofs)
}

/// Gram matrix of the reconstructed gradient.
pub fn assemble_grad_mass(hd: &HessianDiscretisation) -> SparseMatrix {
    weighted_gram(&hd.grad, &hd.quad.weights, 2, hd.n_dofs)
}

/// Solves the Hessian scheme A psi = F.
pub fn solve_hessian_scheme(hd: &HessianDiscretisation, f: &[f64]) -> Result<DiscreteFunction> {
    let a = assemble_stiffness(hd)?;
    let factor = factorize(&a, FactorKind::Spd)?;
    Ok(DiscreteFunction {
        dofs: factor.solve(f),
    })
}

/// L2 norm of per-point sampled values under the layout weights.
pub fn weighted_norm(weights: &[f64], comps: usize, v: &[f64]) -> f64 {
    v.iter()
        .enumerate()
        .map(|(r, &x)| weights[r / comps] * x * x)
        .sum::<f64>()
        .sqrt()
}

const EIG_TOL: f64 = 1e-6;
const EIG_MAX_ITERS: usize = 500;

/// Largest generalized eigenvalue of M w = lambda A w by power iteration
/// on A^{-1} M, with a deterministic all-ones start.
fn max_generalized_eig(m: &SparseMatrix, a_factor: &Factorization) -> Result<f64> {
    let n = a_factor.n();
    let mut z = vec![1.0; n];
    let mut lambda_prev = f64::NAN;
    for _ in 0..EIG_MAX_ITERS {
        let mz = m.matvec(&z);
        let az = crate::sparse::norm2(&mz);
        if az == 0.0 {
            return Ok(0.0);
        }
        let y = a_factor.solve(&mz);
        // Rayleigh quotient at y: since A y = M z, y^T A y = y^T M z.
        let den = dot(&y, &mz);
        if den == 0.0 {
            return Ok(0.0);
        }
        let lambda = dot(&y, &m.matvec(&y)) / den;
        let scale = crate::sparse::norm2(&y);
        z = y.iter().map(|v| v / scale).collect();
        if lambda_prev.is_finite() && (lambda - lambda_prev).abs() <= EIG_TOL * lambda.abs() {
            return Ok(lambda);
        }
        lambda_prev = lambda;
    }
    Err(HessdiscError::EigNonConvergence(EIG_MAX_ITERS))
}

/// Discrete Poincare constant C_D^B: the larger of the two generalized
/// Rayleigh quotients ||Pi w||/||HB w|| and ||Grad w||/||HB w||.
pub fn estimate_cd(hd: &HessianDiscretisation) -> Result<f64> {
    let a = assemble_stiffness(hd)?;
    let factor = factorize(&a, FactorKind::Spd)?;
    let lp = max_generalized_eig(&assemble_pi_mass(hd), &factor)?;
    let lg = max_generalized_eig(&assemble_grad_mass(hd), &factor)?;
    Ok(lp.max(lg).max(0.0).sqrt())
}

/// Consistency S_D^B(phi): the paper's min over dofs of the sum of the
/// three L2 interpolation distances. The minimizer of the sum of squares
/// (a linear least-squares problem) is used, and the sum of norms is
/// reported at that point — an upper bound within a factor sqrt(3).
pub fn measure_sd(hd: &HessianDiscretisation, phi: &ExactSolution) -> Result<f64> {
    hd.check_shapes()?;
    let nq = hd.quad.n_points();
    let mut v0 = vec![0.0; nq];
    let mut v1 = vec![0.0; 2 * nq];
    let mut v2 = vec![0.0; 4 * nq];
    for (q, p) in hd.quad.points.iter().enumerate() {
        let j = phi.eval_jet(p[0], p[1]);
        v0[q] = j.value();
        v1[2 * q] = j.dx();
        v1[2 * q + 1] = j.dy();
        let bh = hd.b_kind.apply([j.dxx(), j.dxy(), j.dxy(), j.dyy()]);
        v2[4 * q..4 * q + 4].copy_from_slice(&bh);
    }
    let a = assemble_stiffness(hd)?;
    let mp = assemble_pi_mass(hd);
    let mg = assemble_grad_mass(hd);
    // Normal equations of the sum-of-squares objective.
    let mut b = SparseBuilder::new(hd.n_dofs, hd.n_dofs);
    for mat in [&a, &mp, &mg] {
        for i in 0..hd.n_dofs {
            let (cols, vals) = mat.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                b.add(i, c, v);
            }
        }
    }
    let normal = b.build();
    let mut rhs = weighted_tmul(&hd.pi, &hd.quad.weights, 1, &v0);
    for (r, v) in rhs
        .iter_mut()
        .zip(weighted_tmul(&hd.grad, &hd.quad.weights, 2, &v1))
    {
        *r += v;
    }
    for (r, v) in rhs
        .iter_mut()
        .zip(weighted_tmul(&hd.hb, &hd.quad.weights, 4, &v2))
    {
        *r += v;
    }
    let w = factorize(&normal, FactorKind::Spd)?.solve(&rhs);
    let diff = |s: &[f64], t: &[f64], comps: usize| {
        let d: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
        weighted_norm(&hd.quad.weights, comps, &d)
    };
    Ok(diff(&hd.sample_pi(&w), &v0, 1)
        + diff(&hd.sample_grad(&w), &v1, 2)
        + diff(&hd.sample_hb(&w), &v2, 4))
}

/// A matrix field xi with the scalar H:(B^T B xi) needed by the
/// limit-conformity measure.
#[derive(Clone)]
pub struct MatrixField {
    /// xi as [xx, xy, yx, yy].
    pub value: Arc<dyn Fn(f64, f64) -> [f64; 4] + Send + Sync>,
    /// H:(B^T B xi) = sum_ij d_i d_j (B^T B xi)_ij.
    pub hdiv: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl MatrixField {
    /// xi = H(phi). For both B choices used here, H:(B^T B H phi) is the
    /// bilaplacian of phi.
    pub fn from_hessian(phi: &ExactSolution) -> Self {
        let p1 = phi.clone();
        let p2 = phi.clone();
        MatrixField {
            value: Arc::new(move |x, y| {
                let h = p1.hessian(x, y);
                [h[0], h[1], h[1], h[2]]
            }),
            hdiv: Arc::new(move |x, y| p2.bilaplacian(x, y)),
        }
    }

    pub fn zero() -> Self {
        MatrixField {
            value: Arc::new(|_, _| [0.0; 4]),
            hdiv: Arc::new(|_, _| 0.0),
        }
    }
}

/// Limit-conformity W_D^B(xi): dual norm sqrt(r^T A^{-1} r) of the
/// discrete integration-by-parts defect
/// r_i = int (H:B^T B xi) Pi phi_i - int B xi : HB phi_i.
pub fn measure_wd(hd: &HessianDiscretisation, xi: &MatrixField) -> Result<f64> {
    hd.check_shapes()?;
    let nq = hd.quad.n_points();
    let mut hv = vec![0.0; nq];
    let mut bv = vec![0.0; 4 * nq];
    for (q, p) in hd.quad.points.iter().enumerate() {
        hv[q] = (xi.hdiv)(p[0], p[1]);
        let bxi = hd.b_kind.apply((xi.value)(p[0], p[1]));
        bv[4 * q..4 * q + 4].copy_from_slice(&bxi);
    }
    let mut r = weighted_tmul(&hd.pi, &hd.quad.weights, 1, &hv);
    for (ri, v) in r
        .iter_mut()
        .zip(weighted_tmul(&hd.hb, &hd.quad.weights, 4, &bv))
    {
        *ri -= v;
    }
    let a = assemble_stiffness(hd)?;
    let z = factorize(&a, FactorKind::Spd)?.solve(&r);
    Ok(dot(&r, &z).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureLayout;
    use approx::assert_relative_eq;

    /// A hand-built two-dof discretisation on three quadrature points with
    /// simple integer-valued operator samples.
    fn toy_hd() -> HessianDiscretisation {
        let quad = QuadratureLayout {
            points: vec![[0.25, 0.5], [0.5, 0.5], [0.75, 0.5]],
            weights: vec![0.25, 0.5, 0.25],
            cell_of: vec![0, 1, 2],
            cell_ranges: vec![(0, 1), (1, 2), (2, 3)],
            rule_id: "toy".into(),
        };
        let mut pi = crate::sparse::SparseBuilder::new(3, 2);
        pi.add(0, 0, 1.0);
        pi.add(1, 0, 0.5);
        pi.add(1, 1, 0.5);
        pi.add(2, 1, 1.0);
        let mut grad = crate::sparse::SparseBuilder::new(6, 2);
        grad.add(0, 0, 1.0);
        grad.add(2, 0, -1.0);
        grad.add(2, 1, 1.0);
        grad.add(4, 1, -1.0);
        let mut hb = crate::sparse::SparseBuilder::new(12, 2);
        // Symmetric samples: diag(a, a) per point.
        for q in 0..3 {
            let (c0, c1) = match q {
                0 => (2.0, 0.0),
                1 => (-1.0, 1.0),
                _ => (0.0, 2.0),
            };
            for comp in [0, 3] {
                hb.add(4 * q + comp, 0, c0);
                hb.add(4 * q + comp, 1, c1);
            }
        }
        HessianDiscretisation {
            n_dofs: 2,
            quad,
            pi: pi.build(),
            grad: grad.build(),
            hb: hb.build(),
            b_kind: BKind::IdentityOnSymmetric,
            coercivity_estimate: 1.0,
        }
    }

    #[test]
    fn stiffness_matches_norm_identity() {
        let hd = toy_hd();
        let a = assemble_stiffness(&hd).unwrap();
        for v in [[1.0, 0.0], [0.0, 1.0], [0.3, -0.7], [2.0, 5.0]] {
            let hv = hd.sample_hb(&v);
            let direct = weighted_norm(&hd.quad.weights, 4, &hv).powi(2);
            let av = a.matvec(&v);
            let quad_form = dot(&v, &av);
            assert_relative_eq!(direct, quad_form, max_relative = 1e-12);
        }
        assert!(a.symmetry_defect() < 1e-14);
    }

    #[test]
    fn load_of_one_gives_pi_integrals() {
        let hd = toy_hd();
        let f = assemble_load(&hd, |_, _| 1.0);
        // F_i = sum_q w_q Pi[q,i]: dof0 -> 0.25 + 0.25, dof1 -> 0.25 + 0.25.
        assert_relative_eq!(f[0], 0.5);
        assert_relative_eq!(f[1], 0.5);
        let z = assemble_load(&hd, |_, _| 0.0);
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pi_mass_is_psd_and_matches_loads() {
        let hd = toy_hd();
        let m = assemble_pi_mass(&hd);
        // Row sums equal the load vector of g = 1 (partition-of-unity link)
        // because Pi rows here sum to 1.
        let f = assemble_load(&hd, |_, _| 1.0);
        for i in 0..2 {
            let (cols, vals) = m.row(i);
            let s: f64 = cols.iter().zip(vals).map(|(_, &v)| v).sum();
            assert_relative_eq!(s, f[i], max_relative = 1e-12);
        }
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let mx = m.matvec(&x);
            assert!(dot(&x, &mx) >= -1e-14);
        }
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let hd = toy_hd();
        let psi = solve_hessian_scheme(&hd, &[0.0, 0.0]).unwrap();
        assert!(psi.dofs.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn stability_bound_with_estimated_cd() {
        let hd = toy_hd();
        let cd = estimate_cd(&hd).unwrap();
        assert!(cd > 0.0);
        let f_vec = assemble_load(&hd, |x, _| 1.0 + x);
        let psi = solve_hessian_scheme(&hd, &f_vec).unwrap();
        // ||HB psi||^2 = psi^T F <= ||Pi psi|| ||F_fn|| <= C_D ||HB psi|| ||F_fn||
        let hb_norm = weighted_norm(&hd.quad.weights, 4, &hd.sample_hb(&psi.dofs));
        let f_norm = weighted_norm(
            &hd.quad.weights,
            1,
            &hd.quad
                .points
                .iter()
                .map(|p| 1.0 + p[0])
                .collect::<Vec<_>>(),
        );
        assert!(hb_norm <= cd * f_norm * (1.0 + 1e-10));
    }

    #[test]
    fn broken_hb_scaling_explodes_cd() {
        let hd = toy_hd();
        let cd = estimate_cd(&hd).unwrap();
        let mut broken = toy_hd();
        broken.hb = {
            let mut b = crate::sparse::SparseBuilder::new(12, 2);
            for r in 0..12 {
                let (cols, vals) = hd.hb.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    b.add(r, c, v * 1e-6);
                }
            }
            b.build()
        };
        let cd_broken = estimate_cd(&broken).unwrap();
        assert_relative_eq!(cd_broken / cd, 1e6, max_relative = 1e-3);
    }

    #[test]
    fn cd_deterministic() {
        let a = estimate_cd(&toy_hd()).unwrap();
        let b = estimate_cd(&toy_hd()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn sd_zero_for_zero_field() {
        let hd = toy_hd();
        let zero = ExactSolution::new(|_, _| crate::jet::Jet4::constant(0.0));
        let s = measure_sd(&hd, &zero).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn wd_zero_for_zero_field() {
        let hd = toy_hd();
        let w = measure_wd(&hd, &MatrixField::zero()).unwrap();
        assert!(w.abs() < 1e-12);
    }

    #[test]
    fn zero_measure_quadrature_rejected() {
        let mut hd = toy_hd();
        for w in hd.quad.weights.iter_mut() {
            *w = 0.0;
        }
        assert!(assemble_stiffness(&hd).is_err());
    }
}
