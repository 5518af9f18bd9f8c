//! Manufactured exact solutions and the data they induce.
//!
//! Both benchmark problems ship the exact state/adjoint pair and derive the
//! source term and desired state from it: `f = Delta^2 y - u` and
//! `y_d = y - Delta^2 p`. All derivatives up to fourth order come from the
//! jet arithmetic in [`crate::jet`], so the singular L-shape solution needs
//! no hand-derived formulas.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{HessdiscError, Result};
use crate::jet::{angle_jet, Jet4};
use crate::ocp::{clamp, ControlSupport, OcpProblem};

/// A smooth scalar field with derivatives up to total order 4.
#[derive(Clone)]
pub struct ExactSolution {
    jet: Arc<dyn Fn(f64, f64) -> Jet4 + Send + Sync>,
}

impl ExactSolution {
    pub fn new(jet: impl Fn(f64, f64) -> Jet4 + Send + Sync + 'static) -> Self {
        ExactSolution { jet: Arc::new(jet) }
    }

    pub fn eval_jet(&self, x: f64, y: f64) -> Jet4 {
        (self.jet)(x, y)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.eval_jet(x, y).value()
    }

    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        let j = self.eval_jet(x, y);
        [j.dx(), j.dy()]
    }

    /// Hessian as [dxx, dxy, dyy]; symmetric by construction.
    pub fn hessian(&self, x: f64, y: f64) -> [f64; 3] {
        let j = self.eval_jet(x, y);
        [j.dxx(), j.dxy(), j.dyy()]
    }

    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        self.eval_jet(x, y).laplacian()
    }

    pub fn bilaplacian(&self, x: f64, y: f64) -> f64 {
        self.eval_jet(x, y).bilaplacian()
    }
}

/// Exact state, adjoint and control of a benchmark control problem.
#[derive(Clone)]
pub struct ExactTriple {
    pub state: ExactSolution,
    pub adjoint: ExactSolution,
    /// Pointwise exact control u(x) = clamp(u_d - p/alpha, a, b).
    pub control: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

/// Example 1: smooth data on the unit square.
///
/// State and adjoint are both sin^2(pi x) sin^2(pi y), alpha = 1e-3,
/// box bounds [-750, -50], desired control zero.
pub fn example1() -> (OcpProblem, ExactTriple) {
    let alpha = 1e-3;
    let (lo, hi) = (-750.0, -50.0);
    let y = ExactSolution::new(|x, y| {
        let sx = (Jet4::var_x(x) * PI).sin();
        let sy = (Jet4::var_y(y) * PI).sin();
        sx * sx * sy * sy
    });
    let p = y.clone();
    build_problem(y, p, alpha, lo, hi)
}

/// Example 2: singular solution on the L-shaped domain
/// (-1,1)^2 minus [0,1) x (-1,0], alpha = 1e-3, bounds [-600, -50].
pub fn example2() -> (OcpProblem, ExactTriple) {
    let alpha = 1e-3;
    let (lo, hi) = (-600.0, -50.0);
    let omega_angle = 3.0 * PI / 2.0;
    let gamma = solve_gamma(omega_angle).expect("singular exponent root");
    let y = ExactSolution::new(move |x, y| lshape_jet(x, y, gamma, omega_angle));
    let p = y.clone();
    build_problem(y, p, alpha, lo, hi)
}

fn build_problem(
    state: ExactSolution,
    adjoint: ExactSolution,
    alpha: f64,
    lo: f64,
    hi: f64,
) -> (OcpProblem, ExactTriple) {
    let control = {
        let p = adjoint.clone();
        Arc::new(move |x: f64, y: f64| clamp(-p.value(x, y) / alpha, lo, hi).unwrap())
            as Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>
    };
    let f = {
        let y = state.clone();
        let u = control.clone();
        Arc::new(move |px: f64, py: f64| y.bilaplacian(px, py) - u(px, py))
            as Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>
    };
    let y_d = {
        let y = state.clone();
        let p = adjoint.clone();
        Arc::new(move |px: f64, py: f64| y.value(px, py) - p.bilaplacian(px, py))
            as Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>
    };
    let problem = OcpProblem {
        alpha,
        lo,
        hi,
        f,
        y_d,
        u_d: Arc::new(|_, _| 0.0),
        support: ControlSupport::FullDomain,
    };
    let triple = ExactTriple {
        state,
        adjoint,
        control,
    };
    (problem, triple)
}

/// The singular L-shape solution
/// (x^2-1)^2 (y^2-1)^2 r^(1+gamma) g_{gamma,omega}(theta).
fn lshape_jet(x: f64, y: f64, gamma: f64, omega: f64) -> Jet4 {
    let r2_val = x * x + y * y;
    if r2_val < 1e-28 {
        // Corner limit: value and gradient vanish; higher derivatives
        // are singular and marked non-evaluable.
        let mut j = Jet4::constant(0.0);
        for k in 3..crate::jet::N_COEFFS {
            j.c[k] = f64::NAN;
        }
        return j;
    }
    let xj = Jet4::var_x(x);
    let yj = Jet4::var_y(y);
    let one = Jet4::constant(1.0);
    let wall = (xj * xj - one).powi(2) * (yj * yj - one).powi(2);
    let r = (xj * xj + yj * yj).sqrt();
    let mut theta0 = y.atan2(x);
    if theta0 < 0.0 {
        theta0 += 2.0 * PI;
    }
    let theta = angle_jet(xj, yj, theta0);
    wall * r.powf(1.0 + gamma) * g_angular(theta, gamma, omega)
}

fn g_angular(theta: Jet4, gamma: f64, omega: f64) -> Jet4 {
    let gm = gamma - 1.0;
    let gp = gamma + 1.0;
    let c1 = (gm * omega).sin() / gm - (gp * omega).sin() / gp;
    let c2 = (gm * omega).cos() - (gp * omega).cos();
    let term1 = (theta * gm).cos() - (theta * gp).cos();
    let term2 = (theta * gm).sin() * (1.0 / gm) - (theta * gp).sin() * (1.0 / gp);
    term1 * c1 - term2 * c2
}

/// Non-characteristic root of sin^2(gamma w) = gamma^2 sin^2(w) in (0, 1),
/// located by bisection on [0.5, 0.6] to 1e-12.
pub fn solve_gamma(omega_angle: f64) -> Result<f64> {
    let f = |g: f64| (g * omega_angle).sin().powi(2) - g * g * omega_angle.sin().powi(2);
    let (mut a, mut b) = (0.5, 0.6);
    let (fa, fb) = (f(a), f(b));
    if fa * fb >= 0.0 {
        return Err(HessdiscError::RootSolve(format!(
            "no sign change on [{a}, {b}]: f(a)={fa:.3e}, f(b)={fb:.3e}"
        )));
    }
    while b - a > 1e-13 {
        let m = 0.5 * (a + b);
        if fa * f(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(0.5 * (a + b))
}
