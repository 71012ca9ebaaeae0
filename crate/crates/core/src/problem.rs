//! Isaacs control problem data: control sets, coefficient fields, source
//! term and ellipticity constants.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Rect};
use crate::sym2::Sym2;

/// Scalar data on the closed domain (source terms, exact solutions).
#[derive(Debug, Clone, Copy)]
pub enum ScalarField {
    Constant(f64),
    Registered {
        name: &'static str,
        eval: fn([f64; 2]) -> f64,
    },
}

impl ScalarField {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Registered { eval, .. } => eval(x),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ScalarField::Constant(c) => format!("constant({c})"),
            ScalarField::Registered { name, .. } => (*name).to_string(),
        }
    }
}

/// A symmetric matrix-valued coefficient field.
#[derive(Debug, Clone, Copy)]
pub enum MatrixField {
    Constant(Sym2),
    Registered {
        name: &'static str,
        eval: fn([f64; 2]) -> Sym2,
        /// Lipschitz constant; the modulus of continuity is `lipschitz * t`.
        lipschitz: f64,
    },
}

impl MatrixField {
    pub fn eval(&self, x: [f64; 2]) -> Sym2 {
        match self {
            MatrixField::Constant(a) => *a,
            MatrixField::Registered { eval, .. } => eval(x),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, MatrixField::Constant(_))
    }

    /// Modulus of continuity evaluated at `t`.
    pub fn modulus(&self, t: f64) -> f64 {
        match self {
            MatrixField::Constant(_) => 0.0,
            MatrixField::Registered { lipschitz, .. } => lipschitz * t,
        }
    }

    /// `diag(1, 2)` rotated by `pi (x + y) / 4`; eigenvalues stay in `[1, 2]`.
    pub fn rotating() -> Self {
        MatrixField::Registered {
            name: "rotating",
            eval: |x| Sym2::diag(1.0, 2.0).rotated(std::f64::consts::FRAC_PI_4 * (x[0] + x[1])),
            // |dA/dtheta| = 1 and |grad theta| = pi sqrt(2) / 4
            lipschitz: std::f64::consts::PI * std::f64::consts::SQRT_2 / 4.0,
        }
    }
}

/// Ellipticity constants `lambda I <= A <= Lambda I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipticity {
    pub lambda: f64,
    pub big_lambda: f64,
}

/// Bounds on the diffusion square roots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtBounds {
    /// `sqrt(2 / lambda)`.
    pub q_paper: f64,
    /// `max ||M||` over controls and sample points.
    pub q_eff: f64,
}

/// `inf_a sup_b A^{ab}(x) : D^2 u = f` with homogeneous Dirichlet data.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub name: String,
    n_alpha: usize,
    n_beta: usize,
    coeff: Vec<MatrixField>,
    pub source: ScalarField,
    pub domain: Rect,
    pub exact: Option<ScalarField>,
    bounds: Option<Ellipticity>,
}

impl ControlProblem {
    /// `coeff` is indexed `alpha * n_beta + beta`.
    pub fn new(
        name: impl Into<String>,
        n_alpha: usize,
        n_beta: usize,
        coeff: Vec<MatrixField>,
        source: ScalarField,
        domain: Rect,
    ) -> Result<Self> {
        if n_alpha == 0 || n_beta == 0 {
            return Err(Error::InvalidParameter("control sets must be nonempty".into()));
        }
        if coeff.len() != n_alpha * n_beta {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficient fields, got {}",
                n_alpha * n_beta,
                coeff.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            n_alpha,
            n_beta,
            coeff,
            source,
            domain,
            exact: None,
            bounds: None,
        })
    }

    pub fn with_exact(mut self, exact: ScalarField) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn coeff(&self, alpha: usize, beta: usize) -> &MatrixField {
        &self.coeff[alpha * self.n_beta + beta]
    }

    pub fn has_constant_coefficients(&self) -> bool {
        self.coeff.iter().all(MatrixField::is_constant)
    }

    pub fn control_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_alpha).flat_map(move |a| (0..self.n_beta).map(move |b| (a, b)))
    }

    pub fn ellipticity(&self) -> Option<Ellipticity> {
        self.bounds
    }

    /// `lambda`, failing if [`ControlProblem::ellipticity_bounds`] has not run.
    pub fn lambda(&self) -> Result<f64> {
        self.bounds
            .map(|b| b.lambda)
            .ok_or_else(|| Error::InvalidParameter("ellipticity bounds not computed".into()))
    }

    /// Extreme eigenvalues of all coefficients over the sample points; the
    /// result is stored in the problem.
    pub fn ellipticity_bounds(&mut self, samples: &[[f64; 2]]) -> Result<Ellipticity> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for field in &self.coeff {
            let points: &[[f64; 2]] = if field.is_constant() { &[[0.0, 0.0]] } else { samples };
            for &x in points {
                let e = field.eval(x).eigen().values;
                lo = lo.min(e[0]);
                hi = hi.max(e[1]);
            }
        }
        if !(lo > 0.0) {
            return Err(Error::NotElliptic { lambda: lo });
        }
        let b = Ellipticity {
            lambda: lo,
            big_lambda: hi,
        };
        self.bounds = Some(b);
        Ok(b)
    }

    /// Square root of `A^{ab}(x) - lambda/2 I`.
    pub fn diffusion_sqrt_at(&self, alpha: usize, beta: usize, x: [f64; 2]) -> Result<Sym2> {
        diffusion_sqrt(self.coeff(alpha, beta).eval(x), self.lambda()?)
            .map_err(|e| with_pair(e, alpha, beta))
    }

    /// `Q = sqrt(2 / lambda)` and the sharp bound `max ||M||`.
    pub fn sup_norm_m(&self, samples: &[[f64; 2]]) -> Result<SqrtBounds> {
        let lambda = self.lambda()?;
        let mut q_eff: f64 = 0.0;
        for (a, b) in self.control_pairs() {
            let field = self.coeff(a, b);
            let points: &[[f64; 2]] = if field.is_constant() { &[[0.0, 0.0]] } else { samples };
            for &x in points {
                q_eff = q_eff.max(self.diffusion_sqrt_at(a, b, x)?.spectral_norm());
            }
        }
        Ok(SqrtBounds {
            q_paper: (2.0 / lambda).sqrt(),
            q_eff,
        })
    }

    /// Largest modulus of continuity over all coefficients at `t`.
    pub fn modulus(&self, t: f64) -> f64 {
        self.coeff.iter().map(|f| f.modulus(t)).fold(0.0, f64::max)
    }
}

fn with_pair(e: Error, alpha: usize, beta: usize) -> Error {
    match e {
        Error::NotPositiveDefinite { min_eig, .. } => Error::NotPositiveDefinite {
            alpha,
            beta,
            min_eig,
        },
        other => other,
    }
}

/// Cell barycenters plus vertices.
pub fn sample_points(mesh: &Mesh) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = (0..mesh.num_cells()).map(|c| mesh.cell_centroid(c)).collect();
    pts.extend_from_slice(mesh.vertices());
    pts
}

/// Symmetric positive definite square root of `A - lambda/2 I`.
///
/// The error names control pair `(0, 0)`; callers with a pair in scope
/// should use [`ControlProblem::diffusion_sqrt_at`].
pub fn diffusion_sqrt(a: Sym2, lambda: f64) -> Result<Sym2> {
    let shifted = a - Sym2::scaled_identity(0.5 * lambda);
    let min_eig = shifted.min_eigenvalue();
    if !(min_eig > 0.0) {
        return Err(Error::NotPositiveDefinite {
            alpha: 0,
            beta: 0,
            min_eig,
        });
    }
    Ok(shifted.map_spectrum(f64::sqrt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_problem(mats: &[Sym2], n_alpha: usize) -> ControlProblem {
        ControlProblem::new(
            "t",
            n_alpha,
            mats.len() / n_alpha,
            mats.iter().map(|&m| MatrixField::Constant(m)).collect(),
            ScalarField::Constant(1.0),
            Rect::unit_square(),
        )
        .unwrap()
    }

    #[test]
    fn ellipticity_examples() {
        let mut p = constant_problem(&[Sym2::identity()], 1);
        let b = p.ellipticity_bounds(&[]).unwrap();
        assert_eq!((b.lambda, b.big_lambda), (1.0, 1.0));

        let mut p = constant_problem(&[Sym2::diag(1.0, 2.0)], 1);
        let b = p.ellipticity_bounds(&[]).unwrap();
        assert_eq!((b.lambda, b.big_lambda), (1.0, 2.0));

        let mut p = constant_problem(&[Sym2::diag(1.0, 2.0), Sym2::diag(2.0, 1.0)], 2);
        let b = p.ellipticity_bounds(&[]).unwrap();
        assert_eq!((b.lambda, b.big_lambda), (1.0, 2.0));
        assert_eq!(p.ellipticity(), Some(b));
    }

    #[test]
    fn non_elliptic_rejected() {
        let mut p = constant_problem(&[Sym2::diag(1.0, -0.5)], 1);
        assert!(matches!(p.ellipticity_bounds(&[]), Err(Error::NotElliptic { .. })));
    }

    #[test]
    fn sqrt_examples() {
        let m = diffusion_sqrt(Sym2::identity(), 1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.xx - s).abs() < 1e-15 && m.xy == 0.0 && (m.yy - s).abs() < 1e-15);

        let m = diffusion_sqrt(Sym2::diag(2.0, 4.0), 2.0).unwrap();
        assert_eq!(m, Sym2::diag(1.0, 3f64.sqrt()));

        let a = Sym2::new(2.0, 1.0, 2.0);
        let m = diffusion_sqrt(a, 1.0).unwrap();
        let target = a - Sym2::scaled_identity(0.5);
        assert!((m.square() - target).max_abs_entry() <= 1e-12);
        assert!(m.min_eigenvalue() > 0.0);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        assert!(matches!(
            diffusion_sqrt(Sym2::diag(0.4, 2.0), 1.0),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let mut p = constant_problem(&[Sym2::identity(), Sym2::diag(0.5, 3.0)], 1);
        p.bounds = Some(Ellipticity {
            lambda: 1.2,
            big_lambda: 3.0,
        });
        assert!(matches!(
            p.diffusion_sqrt_at(0, 1, [0.0, 0.0]),
            Err(Error::NotPositiveDefinite { alpha: 0, beta: 1, .. })
        ));
    }

    #[test]
    fn q_eff_examples() {
        let mut p = constant_problem(&[Sym2::identity()], 1);
        p.ellipticity_bounds(&[]).unwrap();
        let q = p.sup_norm_m(&[]).unwrap();
        assert!((q.q_eff - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((q.q_paper - 2f64.sqrt()).abs() < 1e-15);

        let mut p = constant_problem(&[Sym2::diag(1.0, 2.0), Sym2::diag(2.0, 1.0)], 2);
        p.ellipticity_bounds(&[]).unwrap();
        let coarse = p.sup_norm_m(&[[0.1, 0.1]]).unwrap();
        let fine = p.sup_norm_m(&[[0.5, 0.5], [0.9, 0.3]]).unwrap();
        assert!((coarse.q_eff - 1.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(coarse.q_eff, fine.q_eff);
    }

    #[test]
    fn constant_fields_are_position_independent() {
        let f = MatrixField::Constant(Sym2::new(1.5, -0.5, 1.5));
        assert_eq!(f.eval([0.0, 0.0]), f.eval([0.3, 0.9]));
        assert_eq!(f.modulus(0.1), 0.0);
    }

    #[test]
    fn rotating_field_stays_in_bounds() {
        let f = MatrixField::rotating();
        let mesh = crate::mesh::build_structured_mesh(6, Rect::unit_square()).unwrap();
        for x in sample_points(&mesh) {
            let e = f.eval(x).eigen().values;
            assert!(e[0] >= 1.0 - 1e-12 && e[1] <= 2.0 + 1e-12);
        }
        assert!(f.modulus(0.1) > 0.0);
    }
}
