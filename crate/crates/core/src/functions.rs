//! Smooth test functions evaluated pointwise (the "callable path").

use std::f64::consts::PI;

use crate::sym2::Sym2;

/// A smooth function on a neighborhood of the closed domain.
pub trait SmoothFunction: Sync {
    fn value(&self, x: [f64; 2]) -> f64;
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
}

/// `c + g.x + x^T H x / 2`.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    pub hessian: Sym2,
    pub gradient: [f64; 2],
    pub constant: f64,
}

impl Quadratic {
    pub fn new(hessian: Sym2, gradient: [f64; 2], constant: f64) -> Self {
        Self {
            hessian,
            gradient,
            constant,
        }
    }

    /// `|x|^2 / 2`.
    pub fn half_norm_squared() -> Self {
        Self::new(Sym2::identity(), [0.0; 2], 0.0)
    }

    pub fn affine(gradient: [f64; 2], constant: f64) -> Self {
        Self::new(Sym2::new(0.0, 0.0, 0.0), gradient, constant)
    }
}

impl SmoothFunction for Quadratic {
    fn value(&self, x: [f64; 2]) -> f64 {
        self.constant
            + self.gradient[0] * x[0]
            + self.gradient[1] * x[1]
            + 0.5 * self.hessian.quad_form(x)
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let hx = self.hessian.apply(x);
        [self.gradient[0] + hx[0], self.gradient[1] + hx[1]]
    }
}

/// `sin(k pi x) sin(k pi y)`.
#[derive(Debug, Clone, Copy)]
pub struct SineProduct {
    pub k: f64,
}

impl Default for SineProduct {
    fn default() -> Self {
        Self { k: 1.0 }
    }
}

impl SmoothFunction for SineProduct {
    fn value(&self, x: [f64; 2]) -> f64 {
        (self.k * PI * x[0]).sin() * (self.k * PI * x[1]).sin()
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let w = self.k * PI;
        [
            w * (w * x[0]).cos() * (w * x[1]).sin(),
            w * (w * x[0]).sin() * (w * x[1]).cos(),
        ]
    }
}

/// Adapter for plain closures without a gradient; the gradient is taken by
/// central differences.
pub struct FromFn<F>(pub F);

impl<F: Fn([f64; 2]) -> f64 + Sync> SmoothFunction for FromFn<F> {
    fn value(&self, x: [f64; 2]) -> f64 {
        (self.0)(x)
    }

    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let d = 1e-6;
        [
            ((self.0)([x[0] + d, x[1]]) - (self.0)([x[0] - d, x[1]])) / (2.0 * d),
            ((self.0)([x[0], x[1] + d]) - (self.0)([x[0], x[1] - d])) / (2.0 * d),
        ]
    }
}
