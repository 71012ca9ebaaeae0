use isaacs_core::fem::{assemble_stiffness, discrete_laplacian, FeFunction, LumpedVolumes};
use isaacs_core::mesh::{build_structured_mesh, Mesh, PointLocation, Rect};
use proptest::prelude::*;

fn rect() -> impl Strategy<Value = Rect> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.2..3.0f64, 0.2..3.0f64).prop_map(|(x, y, w, h)| Rect::new(x, y, x + w, y + h))
}

fn mesh() -> impl Strategy<Value = Mesh> {
    (1usize..12, rect()).prop_map(|(n, r)| build_structured_mesh(n, r).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cell_areas_sum_to_rectangle(n in 1usize..16, r in rect()) {
        let m = build_structured_mesh(n, r).unwrap();
        let total: f64 = (0..m.num_cells()).map(|c| m.cell_area(c)).sum();
        prop_assert!((total - r.area()).abs() <= 1e-12 * r.area());
        prop_assert_eq!(m.num_cells(), 2 * n * n);
        prop_assert_eq!(m.num_nodes(), (n + 1) * (n + 1));
    }

    #[test]
    fn refinement_halves_h(n in 1usize..20, r in rect()) {
        let a = build_structured_mesh(n, r).unwrap();
        let b = build_structured_mesh(2 * n, r).unwrap();
        prop_assert!((a.h() - 2.0 * b.h()).abs() <= 1e-14 * a.h());
    }

    #[test]
    fn centroid_locates_its_own_cell(m in mesh()) {
        for c in 0..m.num_cells() {
            match m.locate(m.cell_centroid(c)) {
                PointLocation::Inside { cell, .. } => prop_assert_eq!(cell, c),
                PointLocation::Outside => prop_assert!(false, "centroid of {} not found", c),
            }
        }
    }

    #[test]
    fn barycentric_coordinates_are_in_range(m in mesh(), s in 0.0..=1.0f64, t in 0.0..=1.0f64) {
        let r = Rect::new(
            m.vertices().iter().map(|v| v[0]).fold(f64::INFINITY, f64::min),
            m.vertices().iter().map(|v| v[1]).fold(f64::INFINITY, f64::min),
            m.vertices().iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max),
            m.vertices().iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max),
        );
        let p = [r.x0 + s * r.width(), r.y0 + t * r.height()];
        let loc = m.locate(p);
        prop_assert_eq!(loc, m.locate_exhaustive(p));
        match loc {
            PointLocation::Inside { bary, .. } => {
                prop_assert!(bary.iter().all(|&b| (-1e-12..=1.0 + 1e-12).contains(&b)));
                prop_assert!((bary.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            PointLocation::Outside => prop_assert!(false, "point inside the rectangle not located"),
        }
    }

    #[test]
    fn points_outside_are_not_located(m in mesh(), dx in 1e-6..1.0f64, y in 0.0..1.0f64) {
        let x1 = m.vertices().iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
        let y0 = m.vertices().iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
        let y1 = m.vertices().iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max);
        let p = [x1 + dx, y0 + y * (y1 - y0)];
        prop_assert_eq!(m.locate(p), PointLocation::Outside);
        let w = FeFunction::interpolate(&m, |_| 1.0);
        prop_assert_eq!(w.eval(p), 0.0);
    }

    #[test]
    fn stiffness_is_symmetric_with_zero_row_sums(m in mesh()) {
        prop_assert!(m.is_weakly_acute());
        let k = assemble_stiffness(&m).unwrap();
        prop_assert!(k.matrix().is_symmetric(1e-12));
        for z in 0..m.num_nodes() {
            let (cols, vals) = k.matrix().row(z);
            prop_assert!(k.matrix().row_sum(z).abs() <= 1e-12 * k.get(z, z).abs().max(1.0));
            for (&y, &v) in cols.iter().zip(vals) {
                if y != z {
                    prop_assert!(v <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn lumped_volumes_partition_the_domain(m in mesh()) {
        let v = LumpedVolumes::new(&m);
        prop_assert!(v.0.iter().all(|&x| x > 0.0));
        let area = m.area();
        prop_assert!((v.0.iter().sum::<f64>() - area).abs() <= 1e-12 * area);
        for z in 0..m.num_nodes() {
            prop_assert!((v.get(z) - m.star_volume(z).unwrap() / 3.0).abs() <= 1e-14 * area);
        }
    }

    #[test]
    fn laplacian_annihilates_affine(m in mesh(), a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
        let k = assemble_stiffness(&m).unwrap();
        let vol = LumpedVolumes::new(&m);
        let w = FeFunction::interpolate(&m, |x| a * x[0] + b * x[1] + c);
        let scale = (a.abs() + b.abs() + c.abs()).max(1.0) / m.h().powi(2);
        for &z in m.interior_nodes() {
            prop_assert!(discrete_laplacian(&k, &vol, &w, z).unwrap().abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn mesh_tables_round_trip(m in mesh()) {
        let mut buf = Vec::new();
        m.write_tables(&mut buf).unwrap();
        let back = Mesh::read_tables(buf.as_slice()).unwrap();
        prop_assert_eq!(back.vertices(), m.vertices());
        prop_assert_eq!(back.num_cells(), m.num_cells());
        prop_assert_eq!(back.interior_nodes(), m.interior_nodes());
    }
}
