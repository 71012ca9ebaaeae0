//! Symmetric 2x2 matrices with closed-form spectral calculus.

use std::ops::{Add, Mul, Sub};

/// A symmetric 2x2 matrix stored by its three independent entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

/// Eigenpairs of a [`Sym2`], eigenvalues in ascending order.
#[derive(Debug, Clone, Copy)]
pub struct Eigen2 {
    pub values: [f64; 2],
    pub vectors: [[f64; 2]; 2],
}

impl Sym2 {
    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, b)
    }

    pub const fn identity() -> Self {
        Self::diag(1.0, 1.0)
    }

    pub fn scaled_identity(s: f64) -> Self {
        Self::diag(s, s)
    }

    /// Builds a matrix from row-major entries, rejecting asymmetric input.
    pub fn from_row_major(m: [f64; 4], tol: f64) -> Option<Self> {
        if (m[1] - m[2]).abs() > tol {
            return None;
        }
        Some(Self::new(m[0], 0.5 * (m[1] + m[2]), m[3]))
    }

    pub fn to_row_major(self) -> [f64; 4] {
        [self.xx, self.xy, self.xy, self.yy]
    }

    /// `R(theta) D R(theta)^T` for the rotation by `theta`.
    pub fn rotated(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let r = [[c, -s], [s, c]];
        let m = [[self.xx, self.xy], [self.xy, self.yy]];
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        acc += r[i][k] * m[k][l] * r[j][l];
                    }
                }
                out[i][j] = acc;
            }
        }
        Self::new(out[0][0], 0.5 * (out[0][1] + out[1][0]), out[1][1])
    }

    pub fn trace(self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Frobenius inner product `A : B`.
    pub fn contract(self, other: Sym2) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    pub fn apply(self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    /// Quadratic form `v^T A v`.
    pub fn quad_form(self, v: [f64; 2]) -> f64 {
        let av = self.apply(v);
        v[0] * av[0] + v[1] * av[1]
    }

    /// Matrix square of a symmetric matrix (again symmetric).
    pub fn square(self) -> Sym2 {
        Sym2::new(
            self.xx * self.xx + self.xy * self.xy,
            self.xy * (self.xx + self.yy),
            self.xy * self.xy + self.yy * self.yy,
        )
    }

    pub fn max_abs_entry(self) -> f64 {
        self.xx.abs().max(self.xy.abs()).max(self.yy.abs())
    }

    pub fn eigen(self) -> Eigen2 {
        if self.xy == 0.0 {
            return if self.xx <= self.yy {
                Eigen2 {
                    values: [self.xx, self.yy],
                    vectors: [[1.0, 0.0], [0.0, 1.0]],
                }
            } else {
                Eigen2 {
                    values: [self.yy, self.xx],
                    vectors: [[0.0, 1.0], [1.0, 0.0]],
                }
            };
        }
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = half_diff.hypot(self.xy);
        // eigenvector of the larger eigenvalue sits at angle theta
        let theta = 0.5 * (2.0 * self.xy).atan2(self.xx - self.yy);
        let (s, c) = theta.sin_cos();
        Eigen2 {
            values: [mean - radius, mean + radius],
            vectors: [[-s, c], [c, s]],
        }
    }

    pub fn min_eigenvalue(self) -> f64 {
        self.eigen().values[0]
    }

    pub fn max_eigenvalue(self) -> f64 {
        self.eigen().values[1]
    }

    /// Spectral norm, i.e. the largest absolute eigenvalue.
    pub fn spectral_norm(self) -> f64 {
        let e = self.eigen().values;
        e[0].abs().max(e[1].abs())
    }

    /// Applies `g` to the spectrum: `sum_i g(l_i) v_i v_i^T`.
    pub fn map_spectrum(self, g: impl Fn(f64) -> f64) -> Sym2 {
        let e = self.eigen();
        let mut out = Sym2::new(0.0, 0.0, 0.0);
        for (l, v) in e.values.iter().zip(e.vectors.iter()) {
            let gl = g(*l);
            out.xx += gl * v[0] * v[0];
            out.xy += gl * v[0] * v[1];
            out.yy += gl * v[1] * v[1];
        }
        out
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }
}

impl Mul<Sym2> for f64 {
    type Output = Sym2;
    fn mul(self, m: Sym2) -> Sym2 {
        Sym2::new(self * m.xx, self * m.xy, self * m.yy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal_is_exact() {
        let e = Sym2::diag(3.0, 1.0).eigen();
        assert_eq!(e.values, [1.0, 3.0]);
        assert_eq!(e.vectors, [[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn eigen_reconstructs_matrix() {
        let a = Sym2::new(2.0, 1.0, 2.0);
        let e = a.eigen();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        let back = a.map_spectrum(|l| l);
        assert!((back - a).max_abs_entry() < 1e-14);
        for (l, v) in e.values.iter().zip(e.vectors.iter()) {
            let av = a.apply(*v);
            assert!((av[0] - l * v[0]).abs() < 1e-14);
            assert!((av[1] - l * v[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_by_quarter_pi_of_diag() {
        let r = Sym2::diag(1.0, 2.0).rotated(std::f64::consts::FRAC_PI_4);
        assert!((r.xx - 1.5).abs() < 1e-15);
        assert!((r.yy - 1.5).abs() < 1e-15);
        assert!((r.xy + 0.5).abs() < 1e-15);
    }

    #[test]
    fn row_major_rejects_asymmetry() {
        assert!(Sym2::from_row_major([1.0, 0.5, 0.4, 1.0], 1e-12).is_none());
        assert_eq!(
            Sym2::from_row_major([1.0, 0.5, 0.5, 2.0], 1e-12),
            Some(Sym2::new(1.0, 0.5, 2.0))
        );
    }
}
