//! Howard-type min-max iteration for the discrete Isaacs system.
//!
//! The outer loop freezes the minimizing control `alpha` at every node and
//! solves the resulting sup-problem exactly (or to a tolerance `eta_k`) by
//! policy iteration on `beta`. Started from a discrete supersolution, the
//! exact variant produces nodally nonincreasing iterates.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::FeFunction;
use crate::nonlocal::{OperatorContext, PolicyField};
use crate::sparse::linear_solve;

/// Upper bound on outer iterations regardless of configuration.
pub const MAX_OUTER_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum Initialization {
    Paraboloid,
    Zero,
    /// Interior nodal values, by interior position.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HowardConfig {
    /// Outer tolerance relative to `max(1, ||f||)`.
    pub tol: f64,
    /// Inner tolerance relative to `max(1, ||f||)`.
    pub inner_tol: f64,
    /// `None` means `50 * #A`, capped at [`MAX_OUTER_CAP`].
    pub max_outer: Option<usize>,
    pub max_inner: usize,
    /// `Some(eta0)` selects inexact inner solves with `eta_k = eta0 2^-k`.
    pub inexact: Option<f64>,
    pub init: Initialization,
}

impl Default for HowardConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            inner_tol: 1e-11,
            max_outer: None,
            max_inner: 200,
            inexact: None,
            init: Initialization::Paraboloid,
        }
    }
}

impl HowardConfig {
    pub fn inexact(eta0: f64) -> Self {
        Self {
            inexact: Some(eta0),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.inner_tol > 0.0) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if matches!(self.inexact, Some(e) if !(e >= 0.0) || !e.is_finite()) {
            return Err(Error::InvalidParameter("eta0 must be finite and nonnegative".into()));
        }
        if self.max_inner == 0 || self.max_outer == Some(0) {
            return Err(Error::InvalidParameter("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport<'m> {
    pub solution: FeFunction<'m>,
    pub outer_iterations: usize,
    /// Full min-max residual after each outer iteration.
    pub residuals: Vec<f64>,
    /// `max_z (w^{k+1} - w^k)(z)` over interior nodes, starting with the
    /// step away from the initializer.
    pub monotonicity_gaps: Vec<f64>,
    /// Inner policy iterations per outer iteration.
    pub inner_iterations: Vec<usize>,
    pub linear_solves: usize,
    pub policy: PolicyField,
    /// Absolute outer tolerance actually used.
    pub tolerance: f64,
    pub seconds: f64,
}

impl SolveReport<'_> {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn max_monotonicity_gap(&self) -> f64 {
        self.monotonicity_gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Monotonicity violations above `10 tol`.
    pub fn monotonicity_violations(&self) -> usize {
        self.monotonicity_gaps
            .iter()
            .filter(|&&g| g > 10.0 * self.tolerance)
            .count()
    }
}

fn load_scale(ctx: &OperatorContext<'_>, loads: &[f64]) -> f64 {
    ctx.mesh()
        .interior_nodes()
        .iter()
        .map(|&z| loads[z].abs())
        .fold(1.0, f64::max)
}

fn check_loads(ctx: &OperatorContext<'_>, loads: &[f64]) -> Result<()> {
    let n = ctx.mesh().num_nodes();
    if loads.len() != n {
        return Err(Error::InvalidParameter(format!(
            "expected {n} load coefficients, got {}",
            loads.len()
        )));
    }
    if ctx.num_interior() == 0 {
        return Err(Error::NoInteriorNodes);
    }
    Ok(())
}

fn interior_loads(ctx: &OperatorContext<'_>, loads: &[f64]) -> Vec<f64> {
    ctx.mesh().interior_nodes().iter().map(|&z| loads[z]).collect()
}

fn to_nodal(ctx: &OperatorContext<'_>, interior: &[f64]) -> Vec<f64> {
    FeFunction::from_interior(ctx.mesh(), interior).values().to_vec()
}

/// Nodal interpolant of `P = (F / 2 lambda)(|x - c|^2 - R^2)` with zero
/// boundary values, verified to satisfy `F_h[P] <= f`. `B_R` contains the
/// domain together with all quadrature sample points.
pub fn perron_initializer<'m>(ctx: &OperatorContext<'m>, loads: &[f64]) -> Result<FeFunction<'m>> {
    check_loads(ctx, loads)?;
    let mesh = ctx.mesh();
    let center = mesh.centroid();
    // the ball must also hold every sample point, where P is replaced by 0
    let reach = ctx
        .rule()
        .nodes()
        .iter()
        .map(|xi| xi[0].hypot(xi[1]))
        .fold(0.0, f64::max);
    let radius = mesh.radius_about(center) + ctx.eps() * ctx.sqrt_bounds().q_eff * reach;
    let f_min = mesh
        .interior_nodes()
        .iter()
        .map(|&z| loads[z])
        .fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * load_scale(ctx, loads);
    let mut delta = f_min.abs() + 1.0;
    let mut worst = f64::NAN;
    for _ in 0..4 {
        let big_f = f_min.min(0.0) - delta;
        let scale = 0.5 * big_f / ctx.lambda();
        let mut p = FeFunction::interpolate(mesh, |x| {
            let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
            scale * (d2 - radius * radius)
        });
        for &z in mesh.boundary_nodes() {
            p.values_mut()[z] = 0.0;
        }
        let excess = ctx
            .evaluate_f_all(p.values())
            .iter()
            .zip(mesh.interior_nodes())
            .map(|(v, &z)| v.0 - loads[z])
            .fold(f64::NEG_INFINITY, f64::max);
        if excess <= tol {
            return Ok(p);
        }
        log::warn!("paraboloid with delta = {delta} is not a supersolution (excess {excess:e})");
        worst = excess;
        delta *= 4.0;
    }
    Err(Error::Supersolution(format!(
        "paraboloid initializer violates F_h[P] <= f by {worst:e} after enlarging the margin"
    )))
}

fn argmin_alpha(ctx: &OperatorContext<'_>, values: &[f64]) -> Vec<usize> {
    ctx.evaluate_f_all(values).into_iter().map(|s| s.1).collect()
}

fn argmax_beta(ctx: &OperatorContext<'_>, alpha: &[usize], values: &[f64]) -> Vec<usize> {
    let nb = ctx.problem().n_beta();
    (0..ctx.num_interior())
        .into_par_iter()
        .map(|pos| {
            let mut best = (f64::NEG_INFINITY, 0);
            for b in 0..nb {
                let v = ctx.nonlocal_at(pos, alpha[pos], b, values);
                if v > best.0 {
                    best = (v, b);
                }
            }
            best.1
        })
        .collect()
}

/// `max_z |(lambda/2) Delta_h w + sup_b I^{a_z b}[w] - f_z|` over interior nodes.
pub fn fixed_alpha_residual(ctx: &OperatorContext<'_>, alpha: &[usize], values: &[f64], loads: &[f64]) -> f64 {
    let nb = ctx.problem().n_beta();
    let interior = ctx.mesh().interior_nodes();
    (0..ctx.num_interior())
        .into_par_iter()
        .map(|pos| {
            let sup = (0..nb)
                .map(|b| ctx.nonlocal_at(pos, alpha[pos], b, values))
                .fold(f64::NEG_INFINITY, f64::max);
            (ctx.laplacian_at(pos, values) + sup - loads[interior[pos]]).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Inner solver state shared across outer iterations.
struct PolicyCache {
    solutions: HashMap<PolicyField, Vec<f64>>,
    linear_solves: usize,
}

impl PolicyCache {
    fn new() -> Self {
        Self {
            solutions: HashMap::new(),
            linear_solves: 0,
        }
    }

    fn solve(&mut self, ctx: &OperatorContext<'_>, policy: PolicyField, rhs: &[f64]) -> Result<Vec<f64>> {
        if let Some(x) = self.solutions.get(&policy) {
            return Ok(x.clone());
        }
        let g = ctx.assemble_policy_matrix(&policy)?;
        let x = linear_solve(g.matrix(), rhs)?;
        self.linear_solves += 1;
        self.solutions.insert(policy, x.clone());
        Ok(x)
    }
}

/// Policy iteration on `beta` for the sup-problem with frozen `alpha`.
/// Returns nodal values and the number of linear systems visited.
fn hjb_sup(
    ctx: &OperatorContext<'_>,
    loads: &[f64],
    alpha: &[usize],
    init: &[f64],
    tol: f64,
    max_inner: usize,
    cache: &mut PolicyCache,
) -> Result<(Vec<f64>, usize)> {
    let rhs = interior_loads(ctx, loads);
    let mut values = init.to_vec();
    let mut beta = argmax_beta(ctx, alpha, &values);
    let mut history = Vec::new();
    for it in 1..=max_inner {
        let policy = PolicyField {
            alpha: alpha.to_vec(),
            beta: beta.clone(),
        };
        values = to_nodal(ctx, &cache.solve(ctx, policy, &rhs)?);
        let res = fixed_alpha_residual(ctx, alpha, &values, loads);
        history.push(res);
        let next = argmax_beta(ctx, alpha, &values);
        if res <= tol || next == beta {
            return Ok((values, it));
        }
        beta = next;
    }
    Err(Error::NonConvergence {
        method: "inner policy iteration",
        iterations: max_inner,
        history,
    })
}

/// Solves `(lambda/2) Delta_h w + sup_b I^{a_z b}[w] = f_z` for a fixed
/// `alpha` field, starting the `beta` selection from `init`.
pub fn solve_hjb_sup<'m>(
    ctx: &OperatorContext<'m>,
    loads: &[f64],
    alpha: &[usize],
    init: &FeFunction<'_>,
    tol: f64,
) -> Result<(FeFunction<'m>, usize)> {
    check_loads(ctx, loads)?;
    if alpha.len() != ctx.num_interior() || alpha.iter().any(|&a| a >= ctx.problem().n_alpha()) {
        return Err(Error::InvalidParameter("invalid alpha field".into()));
    }
    let mut cache = PolicyCache::new();
    let (values, _) = hjb_sup(ctx, loads, alpha, init.values(), tol, 1000, &mut cache)?;
    Ok((FeFunction::from_values(ctx.mesh(), values)?, cache.linear_solves))
}

/// Exact (or, with `config.inexact`, inexact) Howard min-max iteration.
pub fn howard_minmax<'m>(
    ctx: &OperatorContext<'m>,
    loads: &[f64],
    config: &HowardConfig,
) -> Result<SolveReport<'m>> {
    config.validate()?;
    check_loads(ctx, loads)?;
    let start = Instant::now();
    let mesh = ctx.mesh();
    let scale = load_scale(ctx, loads);
    let tol = config.tol * scale;
    let max_outer = config
        .max_outer
        .unwrap_or(50 * ctx.problem().n_alpha())
        .min(MAX_OUTER_CAP);

    let mut values = match &config.init {
        Initialization::Paraboloid => perron_initializer(ctx, loads)?.values().to_vec(),
        Initialization::Zero => vec![0.0; mesh.num_nodes()],
        Initialization::Custom(v) => {
            if v.len() != ctx.num_interior() {
                return Err(Error::InvalidParameter(format!(
                    "custom initializer has {} values, expected {}",
                    v.len(),
                    ctx.num_interior()
                )));
            }
            to_nodal(ctx, v)
        }
    };

    let mut cache = PolicyCache::new();
    let mut residuals = Vec::new();
    let mut gaps = Vec::new();
    let mut inner_counts = Vec::new();
    let mut alpha = argmin_alpha(ctx, &values);
    for k in 0..max_outer {
        let inner_tol = match config.inexact {
            Some(eta0) => (eta0 * 0.5f64.powi(k as i32)).max(config.inner_tol * scale),
            None => config.inner_tol * scale,
        };
        let (next, inner) = hjb_sup(ctx, loads, &alpha, &values, inner_tol, config.max_inner, &mut cache)?;
        inner_counts.push(inner);
        gaps.push(
            mesh.interior_nodes()
                .iter()
                .map(|&z| next[z] - values[z])
                .fold(f64::NEG_INFINITY, f64::max),
        );
        values = next;
        let evals = ctx.evaluate_f_all(&values);
        let res = evals
            .iter()
            .zip(mesh.interior_nodes())
            .map(|(v, &z)| (v.0 - loads[z]).abs())
            .fold(0.0, f64::max);
        residuals.push(res);
        log::debug!("outer iteration {k}: residual {res:e}, inner solves {inner}");
        if res <= tol {
            let policy = PolicyField {
                alpha: evals.iter().map(|s| s.1).collect(),
                beta: evals.iter().map(|s| s.2).collect(),
            };
            return Ok(SolveReport {
                solution: FeFunction::from_values(mesh, values)?,
                outer_iterations: k + 1,
                residuals,
                monotonicity_gaps: gaps,
                inner_iterations: inner_counts,
                linear_solves: cache.linear_solves,
                policy,
                tolerance: tol,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
        alpha = evals.iter().map(|s| s.1).collect();
    }
    Err(Error::NonConvergence {
        method: "Howard min-max",
        iterations: max_outer,
        history: residuals,
    })
}

/// Howard iteration with inner solves stopped at `eta_k = eta0 2^-k`.
pub fn inexact_howard<'m>(
    ctx: &OperatorContext<'m>,
    loads: &[f64],
    eta0: f64,
    config: &HowardConfig,
) -> Result<SolveReport<'m>> {
    let config = HowardConfig {
        inexact: Some(eta0),
        ..config.clone()
    };
    howard_minmax(ctx, loads, &config)
}

/// Damped nodal fixed point `w <- w + tau (F_h[w] - f)` until the residual
/// drops below `1e-9`. `tau = None` uses `0.8 / max |diagonal|`.
pub fn value_iteration_oracle<'m>(
    ctx: &OperatorContext<'m>,
    loads: &[f64],
    tau: Option<f64>,
    max_iter: usize,
) -> Result<FeFunction<'m>> {
    check_loads(ctx, loads)?;
    let diag = ctx.max_abs_diagonal();
    let tau_max = 1.0 / diag;
    let tau = tau.unwrap_or(0.8 * tau_max);
    if !(tau > 0.0 && tau <= tau_max) {
        return Err(Error::InvalidParameter(format!(
            "tau = {tau} outside (0, {tau_max}]"
        )));
    }
    let mesh = ctx.mesh();
    let interior = mesh.interior_nodes();
    let mut values = vec![0.0; mesh.num_nodes()];
    let mut history = Vec::new();
    for it in 0..max_iter {
        let evals = ctx.evaluate_f_all(&values);
        let mut res: f64 = 0.0;
        for (pos, &z) in interior.iter().enumerate() {
            let d = evals[pos].0 - loads[z];
            res = res.max(d.abs());
            values[z] += tau * d;
        }
        if it % 1000 == 0 {
            history.push(res);
        }
        if res <= 1e-9 {
            // the update above used a residual already within tolerance
            return FeFunction::from_values(mesh, values);
        }
    }
    Err(Error::NonConvergence {
        method: "value iteration",
        iterations: max_iter,
        history,
    })
}
