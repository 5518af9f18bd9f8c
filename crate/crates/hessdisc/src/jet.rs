//! Bivariate truncated Taylor arithmetic up to total degree 4.
//!
//! Every closed-form exact solution in this crate is evaluated through
//! [`Jet4`], so fourth derivatives (needed for the bilaplacian in the
//! manufactured data) come out of the same code path as values and
//! gradients, with no hand-derived Leibniz expansions.

use std::ops::{Add, Mul, Neg, Sub};

/// Number of monomials x^i y^j with i + j <= 4.
pub const N_COEFFS: usize = 15;

// Index of the coefficient of x^i y^j, laid out by total degree:
// 1 | x y | x2 xy y2 | x3 x2y xy2 y3 | x4 x3y x2y2 xy3 y4
const fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// Truncated bivariate Taylor series: sum c[idx(i,j)] dx^i dy^j, i+j <= 4.
///
/// Coefficients are Taylor coefficients, i.e. partial derivatives divided
/// by i! j!.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet4 {
    pub c: [f64; N_COEFFS],
}

impl Jet4 {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N_COEFFS];
        c[0] = v;
        Jet4 { c }
    }

    /// The seed jet for the first coordinate at base point `x`.
    pub fn var_x(x: f64) -> Self {
        let mut c = [0.0; N_COEFFS];
        c[0] = x;
        c[idx(1, 0)] = 1.0;
        Jet4 { c }
    }

    /// The seed jet for the second coordinate at base point `y`.
    pub fn var_y(y: f64) -> Self {
        let mut c = [0.0; N_COEFFS];
        c[0] = y;
        c[idx(0, 1)] = 1.0;
        Jet4 { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative d^(i+j) f / dx^i dy^j recovered from the
    /// Taylor coefficient.
    pub fn deriv(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i + j <= 4);
        self.c[idx(i, j)] * factorial(i) * factorial(j)
    }

    pub fn dx(&self) -> f64 {
        self.deriv(1, 0)
    }

    pub fn dy(&self) -> f64 {
        self.deriv(0, 1)
    }

    pub fn dxx(&self) -> f64 {
        self.deriv(2, 0)
    }

    pub fn dxy(&self) -> f64 {
        self.deriv(1, 1)
    }

    pub fn dyy(&self) -> f64 {
        self.deriv(0, 2)
    }

    pub fn laplacian(&self) -> f64 {
        self.dxx() + self.dyy()
    }

    /// Bilaplacian f_xxxx + 2 f_xxyy + f_yyyy.
    pub fn bilaplacian(&self) -> f64 {
        self.deriv(4, 0) + 2.0 * self.deriv(2, 2) + self.deriv(0, 4)
    }

    /// Composition f(g) for a univariate outer function given by its
    /// derivatives f^(0..=4) at g.value().
    pub fn compose(&self, outer_derivs: [f64; 5]) -> Jet4 {
        // Split g = g0 + gh with gh the pure perturbation part.
        let mut gh = *self;
        gh.c[0] = 0.0;
        // Horner-style evaluation of sum f^(k)(g0)/k! gh^k.
        let mut acc = Jet4::constant(outer_derivs[4] / 24.0);
        acc = acc * gh + Jet4::constant(outer_derivs[3] / 6.0);
        acc = acc * gh + Jet4::constant(outer_derivs[2] / 2.0);
        acc = acc * gh + Jet4::constant(outer_derivs[1]);
        acc = acc * gh + Jet4::constant(outer_derivs[0]);
        acc
    }

    pub fn sin(&self) -> Jet4 {
        let g = self.value();
        let (s, c) = g.sin_cos();
        self.compose([s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Jet4 {
        let g = self.value();
        let (s, c) = g.sin_cos();
        self.compose([c, -s, -c, s, c])
    }

    pub fn sqrt(&self) -> Jet4 {
        let g = self.value();
        assert!(g > 0.0, "sqrt jet needs a positive base value");
        let r = g.sqrt();
        self.compose([
            r,
            0.5 / r,
            -0.25 / (r * g),
            0.375 / (r * g * g),
            -0.9375 / (r * g * g * g),
        ])
    }

    /// g^a for real exponent a, base value must be positive.
    pub fn powf(&self, a: f64) -> Jet4 {
        let g = self.value();
        assert!(g > 0.0, "powf jet needs a positive base value");
        let v = g.powf(a);
        self.compose([
            v,
            a * v / g,
            a * (a - 1.0) * v / (g * g),
            a * (a - 1.0) * (a - 2.0) * v / (g * g * g),
            a * (a - 1.0) * (a - 2.0) * (a - 3.0) * v / (g * g * g * g),
        ])
    }

    pub fn powi(&self, n: u32) -> Jet4 {
        let mut acc = Jet4::constant(1.0);
        for _ in 0..n {
            acc = acc * *self;
        }
        acc
    }

    pub fn recip(&self) -> Jet4 {
        let g = self.value();
        assert!(g != 0.0);
        let v = 1.0 / g;
        self.compose([v, -v * v, 2.0 * v * v * v, -6.0 * v.powi(4), 24.0 * v.powi(5)])
    }

    pub fn atan(&self) -> Jet4 {
        let g = self.value();
        let d = 1.0 + g * g;
        // Derivatives of atan: 1/d, -2g/d^2, (6g^2-2)/d^3, (24g - 24g^3)/d^4.
        self.compose([
            g.atan(),
            1.0 / d,
            -2.0 * g / (d * d),
            (6.0 * g * g - 2.0) / (d * d * d),
            (24.0 * g - 24.0 * g * g * g) / (d * d * d * d),
        ])
    }
}

fn factorial(n: usize) -> f64 {
    match n {
        0 | 1 => 1.0,
        2 => 2.0,
        3 => 6.0,
        4 => 24.0,
        _ => unreachable!(),
    }
}

impl Add for Jet4 {
    type Output = Jet4;
    fn add(self, rhs: Jet4) -> Jet4 {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(rhs.c.iter()) {
            *a += b;
        }
        Jet4 { c }
    }
}

impl Sub for Jet4 {
    type Output = Jet4;
    fn sub(self, rhs: Jet4) -> Jet4 {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(rhs.c.iter()) {
            *a -= b;
        }
        Jet4 { c }
    }
}

impl Neg for Jet4 {
    type Output = Jet4;
    fn neg(self) -> Jet4 {
        let mut c = self.c;
        for a in c.iter_mut() {
            *a = -*a;
        }
        Jet4 { c }
    }
}

impl Mul for Jet4 {
    type Output = Jet4;
    fn mul(self, rhs: Jet4) -> Jet4 {
        let mut c = [0.0; N_COEFFS];
        for i1 in 0..=4 {
            for j1 in 0..=4 - i1 {
                let a = self.c[idx(i1, j1)];
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..=4 - i1 - j1 {
                    for j2 in 0..=4 - i1 - j1 - i2 {
                        let b = rhs.c[idx(i2, j2)];
                        if b != 0.0 {
                            c[idx(i1 + i2, j1 + j2)] += a * b;
                        }
                    }
                }
            }
        }
        Jet4 { c }
    }
}

impl Mul<f64> for Jet4 {
    type Output = Jet4;
    fn mul(self, rhs: f64) -> Jet4 {
        let mut c = self.c;
        for a in c.iter_mut() {
            *a *= rhs;
        }
        Jet4 { c }
    }
}

/// Angle of the point (x, y) measured like atan2 but mapped to [0, 2*pi),
/// with full jet information. Undefined at the origin.
pub fn angle_jet(x: Jet4, y: Jet4, base_angle: f64) -> Jet4 {
    // theta = theta0 + atan(s) with s = (y x0 - x y0) / (x x0 + y y0);
    // the denominator stays near r0^2 > 0 so the branch cut is avoided.
    let x0 = x.value();
    let y0 = y.value();
    let num = y * x0 - x * y0;
    let den = x * x0 + y * y0;
    let s = num * den.recip();
    Jet4::constant(base_angle) + s.atan()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eval_at(f: impl Fn(Jet4, Jet4) -> Jet4, x: f64, y: f64) -> Jet4 {
        f(Jet4::var_x(x), Jet4::var_y(y))
    }

    #[test]
    fn polynomial_derivatives_exact() {
        // f = x^3 y + 2 x y^2
        let f = |x: Jet4, y: Jet4| x.powi(3) * y + x * y.powi(2) * 2.0;
        let j = eval_at(f, 1.5, -0.5);
        assert_relative_eq!(j.value(), 1.5f64.powi(3) * -0.5 + 2.0 * 1.5 * 0.25);
        assert_relative_eq!(j.dx(), 3.0 * 1.5f64.powi(2) * -0.5 + 2.0 * 0.25);
        assert_relative_eq!(j.dxy(), 3.0 * 1.5f64.powi(2) + 4.0 * -0.5);
        assert_relative_eq!(j.deriv(3, 1), 6.0);
        assert_relative_eq!(j.deriv(4, 0), 0.0);
    }

    #[test]
    fn sin_product_bilaplacian() {
        // f = sin(pi x) sin(pi y): Delta^2 f = 4 pi^4 f.
        let pi = std::f64::consts::PI;
        let f = |x: Jet4, y: Jet4| (x * pi).sin() * (y * pi).sin();
        let j = eval_at(f, 0.3, 0.7);
        assert_relative_eq!(j.bilaplacian(), 4.0 * pi.powi(4) * j.value(), max_relative = 1e-12);
    }

    #[test]
    fn sqrt_powf_consistency() {
        let f = |x: Jet4, y: Jet4| (x * x + y * y).sqrt();
        let g = |x: Jet4, y: Jet4| (x * x + y * y).powf(0.5);
        let a = eval_at(f, 0.8, -0.3);
        let b = eval_at(g, 0.8, -0.3);
        for k in 0..N_COEFFS {
            assert_relative_eq!(a.c[k], b.c[k], max_relative = 1e-12, epsilon = 1e-13);
        }
    }

    #[test]
    fn angle_jet_matches_finite_differences() {
        let (x0, y0) = (-0.6f64, 0.4f64);
        let base = y0.atan2(x0);
        let theta = |x: f64, y: f64| y.atan2(x);
        let j = angle_jet(Jet4::var_x(x0), Jet4::var_y(y0), base);
        let h = 1e-5;
        let fd_dx = (theta(x0 + h, y0) - theta(x0 - h, y0)) / (2.0 * h);
        let fd_dy = (theta(x0, y0 + h) - theta(x0, y0 - h)) / (2.0 * h);
        assert_relative_eq!(j.value(), base);
        assert_relative_eq!(j.dx(), fd_dx, max_relative = 1e-8);
        assert_relative_eq!(j.dy(), fd_dy, max_relative = 1e-8);
        let fd_dxx = (theta(x0 + h, y0) - 2.0 * theta(x0, y0) + theta(x0 - h, y0)) / (h * h);
        assert_relative_eq!(j.dxx(), fd_dxx, max_relative = 1e-4);
    }

    #[test]
    fn recip_is_inverse() {
        let j = eval_at(|x, y| (x + y * 2.0).recip() * (x + y * 2.0), 0.4, 0.1);
        assert_relative_eq!(j.value(), 1.0, max_relative = 1e-14);
        for k in 1..N_COEFFS {
            assert!(j.c[k].abs() < 1e-12);
        }
    }
}
