//! The quadrature-based integral operator and the discrete Isaacs operator.
//!
//! At an interior node `z` the nonlocal operator reads
//!
//! ```text
//! I[w](z) = (2 / eps^2) * ( sum_j W_j w(z + eps M(z) xi_j) - m0 w(z) ),
//! ```
//!
//! with `M = (A - lambda/2 I)^{1/2}` and `w` extended by zero outside the
//! domain. The full operator is `(lambda/2) Delta_h w(z) + inf_a sup_b I[w](z)`.
//! For every interior node and control pair the sample points are located
//! once, so that applying the operator (or assembling a policy matrix) is a
//! sparse dot product.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_stiffness, galerkin_projection, FeFunction, LumpedVolumes, StiffnessMatrix,
};
use crate::functions::SmoothFunction;
use crate::kernel::BallQuadrature;
use crate::mesh::{Mesh, PointLocation};
use crate::problem::{sample_points, ControlProblem, SqrtBounds};
use crate::sparse::CsrMatrix;
use crate::sym2::Sym2;

/// Relative tolerance for the monotone sign pattern of policy matrices.
pub const SIGN_TOL: f64 = 1e-12;

/// `eps = c * h^gamma * max(1, |ln h|)^delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsSchedule {
    pub c: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 0.5,
            delta: 1.0,
        }
    }
}

impl EpsSchedule {
    /// `(h max(1, |ln h|))^{1/4}`, balancing `eps^2` against `h eps^-2 |ln h|`.
    pub fn smooth() -> Self {
        Self {
            c: 1.0,
            gamma: 0.25,
            delta: 0.25,
        }
    }

    pub fn eps(&self, h: f64) -> f64 {
        self.c * h.powf(self.gamma) * h.ln().abs().max(1.0).powf(self.delta)
    }
}

/// Per interior node control selections, indexed by interior position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolicyField {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
}

impl PolicyField {
    pub fn uniform(len: usize, alpha: usize, beta: usize) -> Self {
        Self {
            alpha: vec![alpha; len],
            beta: vec![beta; len],
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Fixed-policy system matrix over interior nodes.
#[derive(Debug, Clone)]
pub struct PolicyMatrix(pub CsrMatrix);

impl PolicyMatrix {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }
}

/// `min_a max_b table(a, b)` with ties resolved to the lowest indices.
pub fn inf_sup(n_alpha: usize, n_beta: usize, table: impl Fn(usize, usize) -> f64) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0);
    for a in 0..n_alpha {
        let mut inner = (f64::NEG_INFINITY, 0);
        for b in 0..n_beta {
            let v = table(a, b);
            if v > inner.0 {
                inner = (v, b);
            }
        }
        if inner.0 < best.0 {
            best = (inner.0, a, inner.1);
        }
    }
    best
}

/// Everything needed to apply the discrete operator on a fixed mesh.
pub struct OperatorContext<'a> {
    mesh: &'a Mesh,
    problem: &'a ControlProblem,
    rule: &'a BallQuadrature,
    eps: f64,
    lambda: f64,
    bounds: SqrtBounds,
    volumes: LumpedVolumes,
    stiffness: StiffnessMatrix,
    n_pairs: usize,
    /// `(lambda/2) Delta_h` rows over all nodes, by interior position.
    lap_rows: Vec<Vec<(usize, f64)>>,
    /// Nonlocal rows over all nodes, indexed `pos * n_pairs + pair`.
    stencils: Vec<Vec<(usize, f64)>>,
    /// `M^{ab}(z)`, same indexing as `stencils`.
    msqrt: Vec<Sym2>,
}

impl<'a> OperatorContext<'a> {
    /// Builds the context. The problem must already carry its ellipticity
    /// bounds. Meshes that are not weakly acute are refused unless
    /// `allow_non_acute` is set.
    pub fn new(
        mesh: &'a Mesh,
        problem: &'a ControlProblem,
        rule: &'a BallQuadrature,
        eps: f64,
        allow_non_acute: bool,
    ) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        if let Err(e) = mesh.check_weakly_acute() {
            if !allow_non_acute {
                return Err(e);
            }
            log::warn!("{e}; the scheme may lose monotonicity");
        }
        let lambda = problem.lambda()?;
        let bounds = problem.sup_norm_m(&sample_points(mesh))?;
        let volumes = LumpedVolumes::new(mesh);
        let stiffness = assemble_stiffness(mesh)?;
        let n_pairs = problem.n_alpha() * problem.n_beta();

        let lap_rows = mesh
            .interior_nodes()
            .iter()
            .map(|&z| {
                let (cols, vals) = stiffness.0.row(z);
                let scale = -0.5 * lambda / volumes.get(z);
                cols.iter()
                    .zip(vals)
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(&y, &v)| (y, scale * v))
                    .collect()
            })
            .collect();

        let per_node: Vec<Vec<(Sym2, Vec<(usize, f64)>)>> = mesh
            .interior_nodes()
            .par_iter()
            .map(|&z| {
                problem
                    .control_pairs()
                    .map(|(a, b)| {
                        let m = problem.diffusion_sqrt_at(a, b, mesh.vertex(z))?;
                        Ok((m, build_stencil(mesh, rule, eps, z, m)))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut stencils = Vec::with_capacity(per_node.len() * n_pairs);
        let mut msqrt = Vec::with_capacity(per_node.len() * n_pairs);
        for node in per_node {
            for (m, s) in node {
                msqrt.push(m);
                stencils.push(s);
            }
        }

        Ok(Self {
            mesh,
            problem,
            rule,
            eps,
            lambda,
            bounds,
            volumes,
            stiffness,
            n_pairs,
            lap_rows,
            stencils,
            msqrt,
        })
    }

    pub fn mesh(&self) -> &'a Mesh {
        self.mesh
    }

    pub fn problem(&self) -> &'a ControlProblem {
        self.problem
    }

    pub fn rule(&self) -> &'a BallQuadrature {
        self.rule
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sqrt_bounds(&self) -> SqrtBounds {
        self.bounds
    }

    pub fn volumes(&self) -> &LumpedVolumes {
        &self.volumes
    }

    pub fn stiffness(&self) -> &StiffnessMatrix {
        &self.stiffness
    }

    pub fn num_interior(&self) -> usize {
        self.lap_rows.len()
    }

    fn pair(&self, alpha: usize, beta: usize) -> usize {
        alpha * self.problem.n_beta() + beta
    }

    /// `(lambda/2) Delta_h` row of the interior node at `pos`, over all nodes.
    pub fn laplacian_row(&self, pos: usize) -> &[(usize, f64)] {
        &self.lap_rows[pos]
    }

    /// Nonlocal row of the interior node at `pos` for `(alpha, beta)`.
    pub fn stencil(&self, pos: usize, alpha: usize, beta: usize) -> &[(usize, f64)] {
        &self.stencils[pos * self.n_pairs + self.pair(alpha, beta)]
    }

    /// `M^{ab}` at the interior node at `pos`.
    pub fn diffusion_sqrt(&self, pos: usize, alpha: usize, beta: usize) -> Sym2 {
        self.msqrt[pos * self.n_pairs + self.pair(alpha, beta)]
    }

    fn position(&self, z: usize) -> Result<usize> {
        if z >= self.mesh.num_nodes() {
            return Err(Error::InvalidNode {
                node: z,
                count: self.mesh.num_nodes(),
            });
        }
        self.mesh
            .interior_position(z)
            .ok_or(Error::BoundaryNode { node: z })
    }

    fn dot(row: &[(usize, f64)], values: &[f64]) -> f64 {
        row.iter().map(|&(y, c)| c * values[y]).sum()
    }

    pub(crate) fn laplacian_at(&self, pos: usize, values: &[f64]) -> f64 {
        Self::dot(&self.lap_rows[pos], values)
    }

    pub(crate) fn nonlocal_at(&self, pos: usize, alpha: usize, beta: usize, values: &[f64]) -> f64 {
        Self::dot(self.stencil(pos, alpha, beta), values)
    }

    /// `I^{ab}[w](z)` for a finite element function (zero outside).
    pub fn evaluate_i(&self, w: &FeFunction<'_>, z: usize, alpha: usize, beta: usize) -> Result<f64> {
        let pos = self.position(z)?;
        Ok(self.nonlocal_at(pos, alpha, beta, w.values()))
    }

    /// `I^{ab}[w](x)` for a smooth function evaluated exactly at the sample
    /// points, with no zero extension.
    pub fn evaluate_i_callable(
        &self,
        w: &dyn SmoothFunction,
        x: [f64; 2],
        alpha: usize,
        beta: usize,
    ) -> Result<f64> {
        let m = self.problem.diffusion_sqrt_at(alpha, beta, x)?;
        Ok(self.apply_rule(x, m, |p| w.value(p)))
    }

    fn apply_rule(&self, x: [f64; 2], m: Sym2, eval: impl Fn([f64; 2]) -> f64) -> f64 {
        let sum = self.rule.apply(|xi| {
            let d = m.apply(xi);
            eval([x[0] + self.eps * d[0], x[1] + self.eps * d[1]])
        });
        2.0 / (self.eps * self.eps) * (sum - self.rule.m0() * eval(x))
    }

    /// Full operator at interior node position `pos` from nodal values,
    /// returning the value and the selected `(alpha, beta)`.
    pub(crate) fn f_at(&self, pos: usize, values: &[f64]) -> (f64, usize, usize) {
        let p = self.problem;
        let (v, a, b) = inf_sup(p.n_alpha(), p.n_beta(), |a, b| self.nonlocal_at(pos, a, b, values));
        (self.laplacian_at(pos, values) + v, a, b)
    }

    /// `(lambda/2) Delta_h w(z) + inf_a sup_b I^{ab}[w](z)` with the selected
    /// controls.
    pub fn evaluate_f(&self, w: &FeFunction<'_>, z: usize) -> Result<(f64, usize, usize)> {
        let pos = self.position(z)?;
        Ok(self.f_at(pos, w.values()))
    }

    /// Operator values and selections at every interior node (by position).
    pub fn evaluate_f_all(&self, values: &[f64]) -> Vec<(f64, usize, usize)> {
        (0..self.num_interior())
            .into_par_iter()
            .map(|pos| self.f_at(pos, values))
            .collect()
    }

    /// Matrix of `w -> (lambda/2) Delta_h w + I^{a_z b_z}[w]` on `V_h^0`,
    /// with its monotone sign pattern verified.
    pub fn assemble_policy_matrix(&self, policy: &PolicyField) -> Result<PolicyMatrix> {
        let n = self.num_interior();
        if policy.len() != n {
            return Err(Error::InvalidParameter(format!(
                "policy has {} entries, expected {n}",
                policy.len()
            )));
        }
        let p = self.problem;
        if let Some(i) = (0..n).find(|&i| policy.alpha[i] >= p.n_alpha() || policy.beta[i] >= p.n_beta()) {
            return Err(Error::InvalidParameter(format!(
                "policy entry {i} = ({}, {}) out of range",
                policy.alpha[i], policy.beta[i]
            )));
        }
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|pos| {
                self.lap_rows[pos]
                    .iter()
                    .chain(self.stencil(pos, policy.alpha[pos], policy.beta[pos]))
                    .filter_map(|&(y, c)| self.mesh.interior_position(y).map(|q| (q, c)))
                    .collect()
            })
            .collect();
        let matrix = CsrMatrix::from_rows(n, rows);
        check_sign_pattern(&matrix)?;
        Ok(PolicyMatrix(matrix))
    }

    /// Largest absolute diagonal entry over all control pairs.
    pub fn max_abs_diagonal(&self) -> f64 {
        let interior = self.mesh.interior_nodes();
        let mut best: f64 = 0.0;
        for (pos, &z) in interior.iter().enumerate() {
            let lap: f64 = self.lap_rows[pos].iter().filter(|e| e.0 == z).map(|e| e.1).sum();
            for k in 0..self.n_pairs {
                let nl: f64 = self.stencils[pos * self.n_pairs + k]
                    .iter()
                    .filter(|e| e.0 == z)
                    .map(|e| e.1)
                    .sum();
                best = best.max((lap + nl).abs());
            }
        }
        best
    }

    /// `max_z |F[w](z) - f_z|` over interior nodes; `loads` is indexed by node.
    pub fn residual(&self, w: &FeFunction<'_>, loads: &[f64]) -> f64 {
        self.residual_values(w.values(), loads)
    }

    pub(crate) fn residual_values(&self, values: &[f64], loads: &[f64]) -> f64 {
        let interior = self.mesh.interior_nodes();
        self.evaluate_f_all(values)
            .iter()
            .zip(interior)
            .map(|(f, &z)| (f.0 - loads[z]).abs())
            .fold(0.0, f64::max)
    }

    /// Largest nodal consistency defect between the operator applied to the
    /// Galerkin projection of `w` and the `phi_z`-weighted average of the
    /// pointwise operator applied to `w` itself.
    ///
    /// Outside the domain the projection is continued by `w`, the values an
    /// extension mesh would interpolate.
    pub fn measure_consistency(&self, w: &dyn SmoothFunction) -> Result<f64> {
        let mesh = self.mesh;
        let proj = galerkin_projection(mesh, &self.stiffness, w)?;
        let p = self.problem;
        let defects = mesh
            .interior_nodes()
            .par_iter()
            .enumerate()
            .map(|(pos, &z)| -> Result<f64> {
                let x = mesh.vertex(z);
                let extended = |q: [f64; 2]| match mesh.locate(q) {
                    loc @ PointLocation::Inside { .. } => proj.eval_located(loc),
                    PointLocation::Outside => w.value(q),
                };
                let (discrete, _, _) = inf_sup(p.n_alpha(), p.n_beta(), |a, b| {
                    self.apply_rule(x, self.diffusion_sqrt(pos, a, b), extended)
                });

                let mut avg = 0.0;
                for &c in mesh.star(z) {
                    let tri = mesh.cells()[c];
                    let pts = tri.map(|v| mesh.vertex(v));
                    let kz = tri.iter().position(|&v| v == z).unwrap();
                    let third = mesh.cell_area(c) / 3.0;
                    for k in 0..3 {
                        if k == kz {
                            continue;
                        }
                        // midpoint of the edge from z to vertex k, where phi_z = 1/2
                        let m = [0.5 * (pts[kz][0] + pts[k][0]), 0.5 * (pts[kz][1] + pts[k][1])];
                        let mut table = vec![0.0; self.n_pairs];
                        for (a, b) in p.control_pairs() {
                            table[self.pair(a, b)] = self.evaluate_i_callable(w, m, a, b)?;
                        }
                        let (v, _, _) = inf_sup(p.n_alpha(), p.n_beta(), |a, b| table[self.pair(a, b)]);
                        avg += third * 0.5 * v;
                    }
                }
                Ok((discrete - avg / self.volumes.get(z)).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(defects.into_iter().fold(0.0, f64::max))
    }
}

/// Nonlocal row of node `z` over all nodes: located sample points contribute
/// `(2/eps^2) W_j` times barycentric weights; the center carries `-2 m0/eps^2`.
fn build_stencil(mesh: &Mesh, rule: &BallQuadrature, eps: f64, z: usize, m: Sym2) -> Vec<(usize, f64)> {
    let scale = 2.0 / (eps * eps);
    let x = mesh.vertex(z);
    let mut row = Vec::with_capacity(3 * rule.len() + 1);
    for (xi, &w) in rule.nodes().iter().zip(rule.weights()) {
        if w == 0.0 {
            continue;
        }
        let d = m.apply(*xi);
        let q = [x[0] + eps * d[0], x[1] + eps * d[1]];
        if let PointLocation::Inside { cell, bary } = mesh.locate(q) {
            // points within tolerance of an edge get clamped weights
            let clamped = bary.map(|l| l.max(0.0));
            let total: f64 = clamped.iter().sum();
            for (k, &v) in mesh.cells()[cell].iter().enumerate() {
                if clamped[k] > 0.0 {
                    row.push((v, scale * w * clamped[k] / total));
                }
            }
        }
    }
    row.push((z, -scale * rule.m0()));
    row.sort_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (y, c) in row {
        match merged.last_mut() {
            Some(last) if last.0 == y => last.1 += c,
            _ => merged.push((y, c)),
        }
    }
    merged
}

fn check_sign_pattern(matrix: &CsrMatrix) -> Result<()> {
    for i in 0..matrix.n_rows() {
        let (cols, vals) = matrix.row(i);
        let diag = matrix.get(i, i);
        if !(diag < 0.0) {
            return Err(Error::SignPattern {
                row: i,
                detail: format!("diagonal entry {diag:e} is not negative"),
            });
        }
        let tol = SIGN_TOL * diag.abs();
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i && v < -tol {
                return Err(Error::SignPattern {
                    row: i,
                    detail: format!("off-diagonal entry ({i}, {j}) = {v:e} is negative"),
                });
            }
        }
        let sum = matrix.row_sum(i);
        if sum > tol {
            return Err(Error::SignPattern {
                row: i,
                detail: format!("row sum {sum:e} is positive"),
            });
        }
    }
    Ok(())
}
