use isaacs_core::kernel::{build_axis_rule, build_polar_rule, BallQuadrature, Kernel};
use isaacs_core::sym2::Sym2;
use proptest::prelude::*;

fn rule() -> impl Strategy<Value = BallQuadrature> {
    prop_oneof![
        (2u32..6, 0.0..1.0f64).prop_filter_map("radius below minimum", |(p, s)| {
            let k = Kernel::new(p).ok()?;
            let r_min = (2.0 / k.mass()).sqrt();
            build_axis_rule(&k, r_min + s * (0.99 - r_min)).ok()
        }),
        (2u32..6, 2usize..7, 4usize..17).prop_map(|(p, nr, nt)| build_polar_rule(&Kernel::new(p).unwrap(), nr, nt).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_profile_is_a_nonnegative_radial_bump(p in 2u32..8, x in -1.5..1.5f64, y in -1.5..1.5f64, th in 0.0..6.3f64) {
        let k = Kernel::new(p).unwrap();
        let v = k.eval([x, y]);
        prop_assert!(v >= 0.0);
        if x.hypot(y) >= 1.0 {
            prop_assert_eq!(v, 0.0);
        }
        let r = x.hypot(y);
        prop_assert!((k.eval([r * th.cos(), r * th.sin()]) - v).abs() <= 1e-12 * k.c);
    }

    #[test]
    fn weights_are_nonnegative_and_moments_match(q in rule()) {
        prop_assert!(q.weights().iter().all(|&w| w >= 0.0));
        let mut first = [0.0; 2];
        let mut second = [[0.0; 2]; 2];
        for (xi, w) in q.nodes().iter().zip(q.weights()) {
            prop_assert!(xi[0].hypot(xi[1]) <= 1.0);
            for i in 0..2 {
                first[i] += w * xi[i];
                for k in 0..2 {
                    second[i][k] += w * xi[i] * xi[k];
                }
            }
        }
        prop_assert!(first[0].abs() < 1e-12 && first[1].abs() < 1e-12);
        for i in 0..2 {
            for k in 0..2 {
                let target = if i == k { 1.0 } else { 0.0 };
                prop_assert!((second[i][k] - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rules_integrate_quadratic_forms(q in rule(), a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
        let h = Sym2::new(a, b, c);
        let got = q.apply(|xi| h.quad_form(xi));
        prop_assert!((got - h.trace()).abs() < 1e-12 * (1.0 + h.max_abs_entry()));
    }

    #[test]
    fn centered_difference_kills_affine(q in rule(), a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
        let f = |x: [f64; 2]| a * x[0] + b * x[1] + c;
        let got = q.apply(f) - q.m0() * f([0.0, 0.0]);
        prop_assert!(got.abs() < 1e-12 * (1.0 + a.abs() + b.abs() + c.abs()) * q.m0().max(1.0));
    }
}
