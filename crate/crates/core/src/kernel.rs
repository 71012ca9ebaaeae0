//! Radial bump kernel and positive-weight cubature on the unit disk.
//!
//! The kernel is `phi(y) = c (1 - |y|^2)^p` on the unit disk, normalized so
//! that its second moment `int |y|^2 phi` equals the dimension. Cubature rules
//! store *effective* weights `W_j`, the product of a geometric weight and the
//! kernel value, so that `sum_j W_j g(xi_j)` approximates `int g phi`.

use faer::{Mat, Side};

use crate::error::{Error, Result};

const DIM: usize = 2;

/// Polynomial bump kernel on the unit disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub p: u32,
    pub c: f64,
}

impl Kernel {
    /// Normalized kernel with exponent `p`. The closed-form constant is
    /// cross-checked against a Gauss–Legendre radial integral.
    pub fn new(p: u32) -> Result<Self> {
        let c = kernel_normalization(p)?;
        let k = Self { p, c };
        let nodes = gauss_jacobi(24, 0, 0)?;
        // int_{B_1} |y|^2 phi = 2 pi int_0^1 r^3 phi(r) dr, with r = (1 + x) / 2
        let numeric: f64 = nodes
            .iter()
            .map(|&(x, w)| {
                let r = 0.5 * (1.0 + x);
                0.5 * w * r.powi(3) * k.profile(r)
            })
            .sum::<f64>()
            * 2.0
            * std::f64::consts::PI;
        if (numeric - DIM as f64).abs() > 1e-10 * DIM as f64 {
            return Err(Error::Quadrature(format!(
                "kernel second moment {numeric} differs from {DIM}"
            )));
        }
        Ok(k)
    }

    /// Radial profile `phi(r)`; zero outside the unit disk.
    pub fn profile(&self, r: f64) -> f64 {
        if r >= 1.0 {
            0.0
        } else {
            self.c * (1.0 - r * r).powi(self.p as i32)
        }
    }

    pub fn eval(&self, y: [f64; 2]) -> f64 {
        self.profile(y[0].hypot(y[1]))
    }

    /// Total mass `int phi = pi c / (p + 1)`.
    pub fn mass(&self) -> f64 {
        std::f64::consts::PI * self.c / (self.p as f64 + 1.0)
    }
}

/// Constant `c` with `int_{B_1} |y|^2 c (1 - |y|^2)^p dy = 2`.
///
/// Substituting `t = r^2` gives `pi c B(2, p + 1) = pi c / ((p + 1)(p + 2))`.
pub fn kernel_normalization(p: u32) -> Result<f64> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!(
            "kernel exponent p = {p} must be at least 2"
        )));
    }
    let p = p as f64;
    Ok(DIM as f64 * (p + 1.0) * (p + 2.0) / std::f64::consts::PI)
}

/// Nodes in the unit disk with nonnegative effective weights reproducing the
/// kernel moments through degree two.
#[derive(Debug, Clone)]
pub struct BallQuadrature {
    nodes: Vec<[f64; 2]>,
    weights: Vec<f64>,
    m0: f64,
}

impl BallQuadrature {
    /// Validates positivity and moment conditions through degree two.
    pub fn new(nodes: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::Quadrature("node/weight count mismatch".into()));
        }
        if let Some(j) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Quadrature(format!(
                "weight {j} is negative or not finite: {}",
                weights[j]
            )));
        }
        if let Some(j) = nodes.iter().position(|x| x[0].hypot(x[1]) > 1.0 + 1e-14) {
            return Err(Error::Quadrature(format!("node {j} lies outside the unit disk")));
        }
        let m0: f64 = weights.iter().sum();
        let mut first = [0.0; 2];
        let mut second = [[0.0; 2]; 2];
        for (x, w) in nodes.iter().zip(&weights) {
            for i in 0..2 {
                first[i] += w * x[i];
                for k in 0..2 {
                    second[i][k] += w * x[i] * x[k];
                }
            }
        }
        if first.iter().any(|m| m.abs() > 1e-12) {
            return Err(Error::Quadrature(format!("first moments {first:?} do not vanish")));
        }
        for i in 0..2 {
            for k in 0..2 {
                let target = if i == k { 1.0 } else { 0.0 };
                if (second[i][k] - target).abs() > 1e-12 {
                    return Err(Error::Quadrature(format!(
                        "second moment matrix {second:?} is not the identity"
                    )));
                }
            }
        }
        Ok(Self { nodes, weights, m0 })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_j W_j`, the rule's approximation of `int phi`.
    pub fn m0(&self) -> f64 {
        self.m0
    }

    /// Coefficient of the subtracted center value, `2 m0`.
    pub fn kappa(&self) -> f64 {
        2.0 * self.m0
    }

    /// `sum_j W_j g(xi_j)`.
    pub fn apply(&self, g: impl Fn([f64; 2]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * g(*x)).sum()
    }

    fn check_mass(self, kernel: &Kernel) -> Result<Self> {
        let mass = kernel.mass();
        if (self.m0 - mass).abs() > 1e-12 * mass {
            return Err(Error::Quadrature(format!(
                "rule mass {} differs from kernel mass {mass}",
                self.m0
            )));
        }
        Ok(self)
    }
}

/// Five-point rule `{0, +-r e_1, +-r e_2}` with axis weights `1/(2 r^2)` and
/// center weight `m0 - 2/r^2`.
pub fn build_axis_rule(kernel: &Kernel, r: f64) -> Result<BallQuadrature> {
    let m0 = kernel.mass();
    let r_min = (DIM as f64 / m0).sqrt();
    if !(r >= r_min && r < 1.0) {
        return Err(Error::QuadratureRadius { r, min: r_min });
    }
    let axis = 1.0 / (2.0 * r * r);
    let center = (m0 - DIM as f64 / (r * r)).max(0.0);
    let nodes = vec![[0.0, 0.0], [r, 0.0], [-r, 0.0], [0.0, r], [0.0, -r]];
    let weights = vec![center, axis, axis, axis, axis];
    BallQuadrature::new(nodes, weights)?.check_mass(kernel)
}

/// Tensor rule: Gauss–Jacobi in `t = r^2` against the radial weight and
/// uniform angles.
pub fn build_polar_rule(kernel: &Kernel, n_r: usize, n_t: usize) -> Result<BallQuadrature> {
    if n_r < 2 || n_t < 4 {
        return Err(Error::InvalidParameter(format!(
            "polar rule needs n_r >= 2 and n_t >= 4 (got {n_r}, {n_t})"
        )));
    }
    // int_0^1 g(t) (1 - t)^p dt = 2^{-p-1} int_{-1}^{1} g((1 + x)/2) (1 - x)^p dx
    let radial = gauss_jacobi(n_r, kernel.p, 0)?;
    let scale = 0.5f64.powi(kernel.p as i32 + 1);
    let angle_weight = 2.0 * std::f64::consts::PI / n_t as f64;
    let mut nodes = Vec::with_capacity(n_r * n_t);
    let mut weights = Vec::with_capacity(n_r * n_t);
    for &(x, w) in &radial {
        let r = (0.5 * (1.0 + x)).sqrt();
        let wr = angle_weight * 0.5 * kernel.c * scale * w;
        for k in 0..n_t {
            let theta = angle_weight * k as f64;
            nodes.push([r * theta.cos(), r * theta.sin()]);
            weights.push(wr);
        }
    }
    BallQuadrature::new(nodes, weights)?.check_mass(kernel)
}

/// Gauss–Jacobi nodes and weights on `[-1, 1]` for the weight
/// `(1 - x)^a (1 + x)^b`, by the Golub–Welsch eigenvalue method.
pub fn gauss_jacobi(n: usize, a: u32, b: u32) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::InvalidParameter("Gauss rule needs at least one node".into()));
    }
    let (af, bf) = (a as f64, b as f64);
    let ab = af + bf;
    let mut jacobi = Mat::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        jacobi[(k, k)] = if k == 0 {
            (bf - af) / (ab + 2.0)
        } else {
            (bf * bf - af * af) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k + 1 < n {
            let m = kf + 1.0;
            let s = 2.0 * m + ab;
            let beta = 4.0 * m * (m + af) * (m + bf) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0));
            jacobi[(k, k + 1)] = beta.sqrt();
            jacobi[(k + 1, k)] = beta.sqrt();
        }
    }
    let eig = jacobi
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Quadrature(format!("Golub–Welsch eigensolve failed: {e:?}")))?;
    // mu0 = int (1-x)^a (1+x)^b = 2^{a+b+1} a! b! / (a+b+1)!
    let fact = |m: u32| (1..=m).map(f64::from).product::<f64>();
    let mu0 = 2f64.powi((a + b + 1) as i32) * fact(a) * fact(b) / fact(a + b + 1);
    let values = eig.S().column_vector();
    let vectors = eig.U();
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|k| (values[k], mu0 * vectors[(0, k)] * vectors[(0, k)]))
        .collect();
    rule.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(rule)
}
