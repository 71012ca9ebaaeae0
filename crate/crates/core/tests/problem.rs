use isaacs_core::harness::registry;
use isaacs_core::mesh::{build_structured_mesh, Rect};
use isaacs_core::problem::{diffusion_sqrt, sample_points, MatrixField};
use isaacs_core::sym2::Sym2;
use proptest::prelude::*;

fn spd() -> impl Strategy<Value = Sym2> {
    (1.0..4.0f64, 1.0..4.0f64, -3.2..3.2f64).prop_map(|(a, b, t)| Sym2::diag(a, b).rotated(t))
}

proptest! {
    #[test]
    fn diffusion_sqrt_squares_back(a in spd()) {
        let lambda = a.min_eigenvalue();
        let m = diffusion_sqrt(a, lambda).unwrap();
        let back = m.square() + Sym2::scaled_identity(0.5 * lambda);
        prop_assert!((back - a).max_abs_entry() <= 1e-12 * a.max_abs_entry());
        prop_assert!(m.min_eigenvalue() > 0.0);
        prop_assert_eq!(diffusion_sqrt(a, lambda).unwrap(), m);
    }

    #[test]
    fn diffusion_sqrt_rejects_lambda_above_twice_the_spectrum(a in spd(), s in 2.01..4.0f64) {
        prop_assert!(diffusion_sqrt(a, s * a.min_eigenvalue()).is_err());
    }

    #[test]
    fn constant_fields_do_not_depend_on_x(a in spd(), x in (-5.0..5.0f64, -5.0..5.0f64), y in (-5.0..5.0f64, -5.0..5.0f64)) {
        let f = MatrixField::Constant(a);
        prop_assert_eq!(f.eval([x.0, x.1]), f.eval([y.0, y.1]));
        prop_assert_eq!(f.modulus(x.0.abs()), 0.0);
    }

    #[test]
    fn rotating_field_is_symmetric_and_lipschitz(x in (0.0..1.0f64, 0.0..1.0f64), y in (0.0..1.0f64, 0.0..1.0f64)) {
        let f = MatrixField::rotating();
        let (a, b) = (f.eval([x.0, x.1]), f.eval([y.0, y.1]));
        let e = a.eigen().values;
        prop_assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 2.0).abs() < 1e-12);
        let dist = (x.0 - y.0).hypot(x.1 - y.1);
        prop_assert!((a - b).spectral_norm() <= f.modulus(dist) + 1e-12);
    }
}

#[test]
fn registry_problems_respect_their_ellipticity_bounds() {
    let mesh = build_structured_mesh(16, Rect::unit_square()).unwrap();
    for entry in registry::registry() {
        let p = registry::lookup(entry.id).unwrap();
        let bounds = p.ellipticity().unwrap();
        for (a, b) in p.control_pairs() {
            for &x in &sample_points(&mesh) {
                let m = p.coeff(a, b).eval(x);
                assert!(m.min_eigenvalue() >= bounds.lambda - 1e-12, "{}", entry.id);
                assert!(m.max_eigenvalue() <= bounds.big_lambda + 1e-12, "{}", entry.id);
            }
        }
    }
}
