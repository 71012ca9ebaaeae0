//! P1 finite element infrastructure: nodal functions, stiffness matrix,
//! lumped volumes, discrete Laplacian, load coefficients and the Galerkin
//! projection.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::SmoothFunction;
use crate::mesh::{Mesh, PointLocation};
use crate::sparse::{linear_solve, CsrMatrix};

/// Continuous piecewise-affine function given by its nodal values, extended
/// by zero outside the mesh.
#[derive(Debug, Clone)]
pub struct FeFunction<'m> {
    mesh: &'m Mesh,
    values: Vec<f64>,
}

impl<'m> FeFunction<'m> {
    pub fn zeros(mesh: &'m Mesh) -> Self {
        Self {
            mesh,
            values: vec![0.0; mesh.num_nodes()],
        }
    }

    pub fn from_values(mesh: &'m Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::InvalidParameter(format!(
                "expected {} nodal values, got {}",
                mesh.num_nodes(),
                values.len()
            )));
        }
        Ok(Self { mesh, values })
    }

    /// Function in `V_h^0` with the given interior values.
    pub fn from_interior(mesh: &'m Mesh, interior: &[f64]) -> Self {
        let mut values = vec![0.0; mesh.num_nodes()];
        for (&z, &v) in mesh.interior_nodes().iter().zip(interior) {
            values[z] = v;
        }
        Self { mesh, values }
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(mesh: &'m Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            mesh,
            values: mesh.vertices().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.mesh.interior_nodes().iter().map(|&z| self.values[z]).collect()
    }

    /// True when all boundary values vanish to within `tol`.
    pub fn is_in_v0(&self, tol: f64) -> bool {
        self.mesh.boundary_nodes().iter().all(|&z| self.values[z].abs() <= tol)
    }

    pub fn eval_located(&self, loc: PointLocation) -> f64 {
        match loc {
            PointLocation::Inside { cell, bary } => {
                let tri = self.mesh.cells()[cell];
                (0..3).map(|k| bary[k] * self.values[tri[k]]).sum()
            }
            PointLocation::Outside => 0.0,
        }
    }

    /// Point evaluation; zero outside the domain.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.eval_located(self.mesh.locate(x))
    }

    /// Constant gradient on cell `c`.
    pub fn cell_gradient(&self, c: usize) -> [f64; 2] {
        let grads = hat_gradients(self.mesh, c);
        let tri = self.mesh.cells()[c];
        let mut g = [0.0; 2];
        for k in 0..3 {
            g[0] += self.values[tri[k]] * grads[k][0];
            g[1] += self.values[tri[k]] * grads[k][1];
        }
        g
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Max-norm distance between nodal values.
    pub fn max_diff(&self, other: &FeFunction<'_>) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `id x y value` lines.
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# id x y value")?;
        for (i, (x, v)) in self.mesh.vertices().iter().zip(&self.values).enumerate() {
            writeln!(out, "{i} {} {} {v}", x[0], x[1])?;
        }
        Ok(())
    }
}

/// Gradients of the three barycentric hat functions on cell `c`.
pub fn hat_gradients(mesh: &Mesh, c: usize) -> [[f64; 2]; 3] {
    let p = mesh.cells()[c].map(|v| mesh.vertex(v));
    let two_area = 2.0 * mesh.cell_area(c);
    [0, 1, 2].map(|k| {
        let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area]
    })
}

/// `K[z][y] = int grad phi_y . grad phi_z` over all nodes.
#[derive(Debug, Clone)]
pub struct StiffnessMatrix(pub CsrMatrix);

impl StiffnessMatrix {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn get(&self, z: usize, y: usize) -> f64 {
        self.0.get(z, y)
    }
}

/// Standard P1 assembly; each row is accumulated from the star of its node.
pub fn assemble_stiffness(mesh: &Mesh) -> Result<StiffnessMatrix> {
    for c in 0..mesh.num_cells() {
        let a = mesh.cell_area(c);
        if !(a > 0.0) {
            return Err(Error::DegenerateCell { cell: c, area: a });
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..mesh.num_nodes())
        .into_par_iter()
        .map(|z| {
            let mut row = Vec::with_capacity(3 * mesh.star(z).len());
            for &c in mesh.star(z) {
                let tri = mesh.cells()[c];
                let grads = hat_gradients(mesh, c);
                let area = mesh.cell_area(c);
                let kz = tri.iter().position(|&v| v == z).unwrap();
                for k in 0..3 {
                    let dot = grads[kz][0] * grads[k][0] + grads[kz][1] * grads[k][1];
                    row.push((tri[k], area * dot));
                }
            }
            row
        })
        .collect();
    Ok(StiffnessMatrix(CsrMatrix::from_rows(mesh.num_nodes(), rows)))
}

/// `v_z = int phi_z = |omega_z| / 3` for every node.
#[derive(Debug, Clone)]
pub struct LumpedVolumes(pub Vec<f64>);

impl LumpedVolumes {
    pub fn new(mesh: &Mesh) -> Self {
        Self(
            (0..mesh.num_nodes())
                .map(|z| mesh.star(z).iter().map(|&c| mesh.cell_area(c)).sum::<f64>() / 3.0)
                .collect(),
        )
    }

    pub fn get(&self, z: usize) -> f64 {
        self.0[z]
    }
}

/// `Delta_h w(z) = -v_z^{-1} sum_y K[z][y] w(y)` at an interior node.
pub fn discrete_laplacian(
    stiffness: &StiffnessMatrix,
    volumes: &LumpedVolumes,
    w: &FeFunction<'_>,
    z: usize,
) -> Result<f64> {
    let mesh = w.mesh();
    if z >= mesh.num_nodes() {
        return Err(Error::InvalidNode {
            node: z,
            count: mesh.num_nodes(),
        });
    }
    if mesh.is_boundary(z) {
        return Err(Error::BoundaryNode { node: z });
    }
    Ok(-stiffness.0.row_dot(z, w.values()) / volumes.get(z))
}

/// Edge midpoints of cell `c` paired with the local index of the opposite
/// vertex.
fn edge_midpoints(mesh: &Mesh, c: usize) -> [([f64; 2], usize); 3] {
    let p = mesh.cells()[c].map(|v| mesh.vertex(v));
    [0, 1, 2].map(|k| {
        let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        ([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], k)
    })
}

/// `f_z = v_z^{-1} int f phi_z`, integrated with the edge-midpoint rule.
pub fn load_coefficients(
    mesh: &Mesh,
    volumes: &LumpedVolumes,
    f: impl Fn([f64; 2]) -> f64 + Sync,
) -> Vec<f64> {
    (0..mesh.num_nodes())
        .into_par_iter()
        .map(|z| {
            let mut acc = 0.0;
            for &c in mesh.star(z) {
                let kz = mesh.cells()[c].iter().position(|&v| v == z).unwrap();
                let third = mesh.cell_area(c) / 3.0;
                for (m, opposite) in edge_midpoints(mesh, c) {
                    // phi_z is 1/2 on the two edges through z and 0 on the other
                    if opposite != kz {
                        acc += third * 0.5 * f(m);
                    }
                }
            }
            acc / volumes.get(z)
        })
        .collect()
}

fn galerkin_with<'m>(
    mesh: &'m Mesh,
    stiffness: &StiffnessMatrix,
    boundary_value: impl Fn(usize) -> f64,
    grad_in_cell: impl Fn(usize, [f64; 2]) -> [f64; 2] + Sync,
) -> Result<FeFunction<'m>> {
    let interior = mesh.interior_nodes();
    if interior.is_empty() {
        return Err(Error::NoInteriorNodes);
    }
    let mut values = vec![0.0; mesh.num_nodes()];
    for &z in mesh.boundary_nodes() {
        values[z] = boundary_value(z);
    }
    let k = &stiffness.0;
    let rhs: Vec<f64> = interior
        .par_iter()
        .map(|&z| {
            let mut b = 0.0;
            for &c in mesh.star(z) {
                let kz = mesh.cells()[c].iter().position(|&v| v == z).unwrap();
                let gz = hat_gradients(mesh, c)[kz];
                let third = mesh.cell_area(c) / 3.0;
                for (m, _) in edge_midpoints(mesh, c) {
                    let g = grad_in_cell(c, m);
                    b += third * (g[0] * gz[0] + g[1] * gz[1]);
                }
            }
            let (cols, vals) = k.row(z);
            for (&y, &kzy) in cols.iter().zip(vals) {
                if mesh.is_boundary(y) {
                    b -= kzy * values[y];
                }
            }
            b
        })
        .collect();
    let rows = interior
        .iter()
        .map(|&z| {
            let (cols, vals) = k.row(z);
            cols.iter()
                .zip(vals)
                .filter_map(|(&y, &v)| mesh.interior_position(y).map(|p| (p, v)))
                .collect()
        })
        .collect();
    let system = CsrMatrix::from_rows(interior.len(), rows);
    let solution = linear_solve(&system, &rhs)?;
    for (&z, v) in interior.iter().zip(solution) {
        values[z] = v;
    }
    FeFunction::from_values(mesh, values)
}

/// Galerkin projection of a smooth function: boundary values are
/// interpolated, interior values satisfy the discrete Poisson identity.
pub fn galerkin_projection<'m>(
    mesh: &'m Mesh,
    stiffness: &StiffnessMatrix,
    w: &dyn SmoothFunction,
) -> Result<FeFunction<'m>> {
    galerkin_with(
        mesh,
        stiffness,
        |z| w.value(mesh.vertex(z)),
        |_, x| w.gradient(x),
    )
}

/// Galerkin projection of a finite element function (uses its cellwise
/// gradient, so the projection reproduces it).
pub fn galerkin_projection_fe<'m>(
    stiffness: &StiffnessMatrix,
    w: &FeFunction<'m>,
) -> Result<FeFunction<'m>> {
    galerkin_with(w.mesh(), stiffness, |z| w.value(z), |c, _| w.cell_gradient(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Quadratic, SineProduct};
    use crate::mesh::{build_structured_mesh, Rect};

    fn unit(n: usize) -> Mesh {
        build_structured_mesh(n, Rect::unit_square()).unwrap()
    }

    #[test]
    fn stiffness_center_entry_and_structure() {
        let m = unit(2);
        let k = assemble_stiffness(&m).unwrap();
        assert!((k.get(4, 4) - 4.0).abs() < 1e-14);
        assert!(k.matrix().is_symmetric(1e-14));
        for z in 0..m.num_nodes() {
            assert!(k.matrix().row_sum(z).abs() < 1e-12);
        }
    }

    #[test]
    fn stiffness_offdiagonals_nonpositive() {
        for n in [2, 3, 5, 8] {
            let m = unit(n);
            let k = assemble_stiffness(&m).unwrap();
            for z in 0..m.num_nodes() {
                let (cols, vals) = k.matrix().row(z);
                for (&y, &v) in cols.iter().zip(vals) {
                    if y != z {
                        assert!(v <= 1e-14, "K[{z}][{y}] = {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn volumes_are_positive_and_sum_to_area() {
        let m = unit(5);
        let v = LumpedVolumes::new(&m);
        assert!(v.0.iter().all(|&x| x > 0.0));
        assert!((v.0.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        for z in 0..m.num_nodes() {
            assert!((v.get(z) - m.star_volume(z).unwrap() / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn laplacian_annihilates_affine() {
        let m = unit(6);
        let (k, v) = (assemble_stiffness(&m).unwrap(), LumpedVolumes::new(&m));
        let w = FeFunction::interpolate(&m, |x| 3.0 - 2.0 * x[0] + 0.7 * x[1]);
        for &z in m.interior_nodes() {
            assert!(discrete_laplacian(&k, &v, &w, z).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_of_half_norm_squared_is_two() {
        let m = unit(8);
        let (k, v) = (assemble_stiffness(&m).unwrap(), LumpedVolumes::new(&m));
        let w = FeFunction::interpolate(&m, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        for &z in m.interior_nodes() {
            assert!((discrete_laplacian(&k, &v, &w, z).unwrap() - 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn laplacian_of_hat_is_negative_and_boundary_rejected() {
        let m = unit(4);
        let (k, v) = (assemble_stiffness(&m).unwrap(), LumpedVolumes::new(&m));
        let z = m.interior_nodes()[4];
        let mut w = FeFunction::zeros(&m);
        w.values_mut()[z] = 1.0;
        assert!(discrete_laplacian(&k, &v, &w, z).unwrap() < 0.0);
        assert!(matches!(
            discrete_laplacian(&k, &v, &w, 0),
            Err(Error::BoundaryNode { node: 0 })
        ));
    }

    #[test]
    fn loads_examples() {
        let m = unit(4);
        let v = LumpedVolumes::new(&m);
        for f in load_coefficients(&m, &v, |_| 1.0) {
            assert!((f - 1.0).abs() < 1e-14);
        }
        let f = load_coefficients(&m, &v, |x| x[0]);
        for &z in m.interior_nodes() {
            assert!((f[z] - m.vertex(z)[0]).abs() < 1e-14);
        }
    }

    /// `v_z^{-1} int f phi_z` by a centroid rule on 64^2 sub-triangles per cell.
    fn dense_load(m: &Mesh, v: &LumpedVolumes, z: usize, f: impl Fn([f64; 2]) -> f64) -> f64 {
        let n = 64;
        let mut acc = 0.0;
        for &c in m.star(z) {
            let tri = m.cells()[c];
            let p = tri.map(|q| m.vertex(q));
            let kz = tri.iter().position(|&q| q == z).unwrap();
            let area = m.cell_area(c) / (n * n) as f64;
            let mut visit = |s0: f64, s1: f64| {
                let bary = [1.0 - s0 - s1, s0, s1];
                let x = [
                    bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
                    bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
                ];
                acc += area * f(x) * bary[kz];
            };
            let nf = n as f64;
            for i in 0..n {
                for j in 0..n - i {
                    let (a, b) = (i as f64, j as f64);
                    visit((a + 1.0 / 3.0) / nf, (b + 1.0 / 3.0) / nf);
                    if i + j + 1 < n {
                        visit((a + 2.0 / 3.0) / nf, (b + 2.0 / 3.0) / nf);
                    }
                }
            }
        }
        acc / v.get(z)
    }

    #[test]
    fn loads_match_dense_quadrature() {
        let s = SineProduct::default();
        // the oracle itself is validated on an integrand the midpoint rule
        // integrates exactly
        let m = unit(4);
        let v = LumpedVolumes::new(&m);
        let affine = load_coefficients(&m, &v, |x| 2.0 * x[0] - x[1]);
        for &z in m.interior_nodes() {
            assert!((affine[z] - dense_load(&m, &v, z, |x| 2.0 * x[0] - x[1])).abs() < 1e-6);
        }
        // midpoint-rule error is O(h^2): up to 1.7e-3 at n = 4, below 1e-3 from n = 8
        for (n, tol) in [(4, 2e-3), (8, 1e-3)] {
            let m = unit(n);
            let v = LumpedVolumes::new(&m);
            let f = load_coefficients(&m, &v, |x| s.value(x));
            for &z in m.interior_nodes() {
                let oracle = dense_load(&m, &v, z, |x| s.value(x));
                assert!((f[z] - oracle).abs() < tol, "n = {n}: {} vs {oracle}", f[z]);
            }
        }
    }

    #[test]
    fn galerkin_reproduces_affine() {
        let m = unit(5);
        let k = assemble_stiffness(&m).unwrap();
        let w = Quadratic::affine([1.5, -0.25], 0.4);
        let g = galerkin_projection(&m, &k, &w).unwrap();
        let interp = FeFunction::interpolate(&m, |x| w.value(x));
        assert!(g.max_diff(&interp) < 1e-12);
    }

    #[test]
    fn galerkin_is_a_projection() {
        let m = unit(6);
        let k = assemble_stiffness(&m).unwrap();
        let fe = FeFunction::interpolate(&m, |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let g = galerkin_projection_fe(&k, &fe).unwrap();
        assert!(g.max_diff(&fe) < 1e-12);
    }

    #[test]
    fn galerkin_error_for_quadratic_decreases() {
        let w = Quadratic::half_norm_squared();
        let mut last = f64::INFINITY;
        for n in [4, 8, 16, 32] {
            let m = unit(n);
            let k = assemble_stiffness(&m).unwrap();
            let g = galerkin_projection(&m, &k, &w).unwrap();
            let mut err: f64 = 0.0;
            for i in 0..=97 {
                for j in 0..=97 {
                    let x = [i as f64 / 97.0, j as f64 / 97.0];
                    err = err.max((g.eval(x) - w.value(x)).abs());
                }
            }
            assert!(err < last, "n = {n}: {err} !< {last}");
            last = err;
        }
    }

    #[test]
    fn galerkin_needs_interior_nodes() {
        let m = unit(1);
        let k = assemble_stiffness(&m).unwrap();
        assert!(matches!(
            galerkin_projection(&m, &k, &Quadratic::half_norm_squared()),
            Err(Error::NoInteriorNodes)
        ));
    }

    #[test]
    fn interior_poisson_solution_is_nonpositive_for_nonnegative_loads() {
        let m = unit(9);
        let (k, v) = (assemble_stiffness(&m).unwrap(), LumpedVolumes::new(&m));
        let loads = load_coefficients(&m, &v, |x| 1.0 + x[0] * x[1]);
        let interior = m.interior_nodes();
        // Delta_h u = f  <=>  -K_II u = V f
        let rows = interior
            .iter()
            .map(|&z| {
                let (cols, vals) = k.matrix().row(z);
                cols.iter()
                    .zip(vals)
                    .filter_map(|(&y, &a)| m.interior_position(y).map(|p| (p, -a)))
                    .collect()
            })
            .collect();
        let a = CsrMatrix::from_rows(interior.len(), rows);
        let rhs: Vec<f64> = interior.iter().map(|&z| v.get(z) * loads[z]).collect();
        let u = linear_solve(&a, &rhs).unwrap();
        assert!(u.iter().all(|&x| x <= 1e-12));
    }

    #[test]
    fn evaluation_outside_is_zero() {
        let m = unit(3);
        let w = FeFunction::interpolate(&m, |_| 1.0);
        assert_eq!(w.eval([1.5, 0.5]), 0.0);
        assert!((w.eval([0.3, 0.3]) - 1.0).abs() < 1e-14);
    }
}
