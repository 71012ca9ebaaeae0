//! Single solves and refinement studies, with CSV output.
//!
//! All floating-point columns use a fixed format and the `seconds` column is
//! left empty unless timing is requested, so repeated runs with the same
//! configuration write identical bytes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::abp::{abp_ratio_with, contact_set, convex_envelope, ring_sensitivity};
use crate::error::{Error, Result};
use crate::fem::{load_coefficients, FeFunction};
use crate::functions::{Quadratic, SineProduct, SmoothFunction};
use crate::harness::config::{ConsistencyFunction, RunConfig};
use crate::mesh::{Mesh, PointLocation};
use crate::nonlocal::OperatorContext;
use crate::problem::ControlProblem;
use crate::solver::howard_minmax;

pub const STUDY_HEADER: &str = "n,h,eps,error_max,order,iters,residual,seconds";
pub const ABP_HEADER: &str = "n,h,eps,sup_neg,rhs,ratio,contact_size,growth,envelope_excess,ring_sensitivity";
pub const REPORT_HEADER: &str = "iteration,residual,monotonicity_gap,inner_iterations";

/// Result of one solve, detached from the mesh it was computed on.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub n: usize,
    pub h: f64,
    pub eps: f64,
    pub values: Vec<f64>,
    pub loads: Vec<f64>,
    pub outer_iterations: usize,
    pub linear_solves: usize,
    pub residuals: Vec<f64>,
    pub monotonicity_gaps: Vec<f64>,
    pub inner_iterations: Vec<usize>,
    pub tolerance: f64,
    pub seconds: f64,
}

impl SolveOutcome {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn max_monotonicity_gap(&self) -> f64 {
        self.monotonicity_gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_report<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{REPORT_HEADER}")?;
        for k in 0..self.residuals.len() {
            writeln!(
                out,
                "{},{},{},{}",
                k + 1,
                num(self.residuals[k]),
                num(self.monotonicity_gaps[k]),
                self.inner_iterations[k]
            )?;
        }
        Ok(())
    }
}

/// Solves `problem` on `mesh` with loads computed from `source`.
pub fn solve_on(
    cfg: &RunConfig,
    problem: &ControlProblem,
    mesh: &Mesh,
    n: usize,
    source: &(dyn Fn([f64; 2]) -> f64 + Sync),
) -> Result<SolveOutcome> {
    let start = Instant::now();
    let rule = cfg.build_rule()?;
    let eps = cfg.schedule().eps(mesh.h());
    let ctx = OperatorContext::new(mesh, problem, &rule, eps, cfg.mesh.allow_non_acute)?;
    let loads = load_coefficients(mesh, ctx.volumes(), source);
    let report = howard_minmax(&ctx, &loads, &cfg.howard())?;
    Ok(SolveOutcome {
        n,
        h: mesh.h(),
        eps,
        values: report.solution.values().to_vec(),
        loads,
        outer_iterations: report.outer_iterations,
        linear_solves: report.linear_solves,
        residuals: report.residuals,
        monotonicity_gaps: report.monotonicity_gaps,
        inner_iterations: report.inner_iterations,
        tolerance: report.tolerance,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn problem_source(problem: &ControlProblem) -> impl Fn([f64; 2]) -> f64 + Sync + '_ {
    move |x| problem.source.eval(x)
}

/// Solves the configured problem at resolution `cfg.n` and writes
/// `solution.dat` and `report.csv` when an output directory is set.
pub fn run_solve(cfg: &RunConfig) -> Result<SolveOutcome> {
    let problem = cfg.build_problem()?;
    let mesh = cfg.build_mesh(cfg.n)?;
    let outcome = solve_on(cfg, &problem, &mesh, cfg.n, &problem_source(&problem))?;
    if let Some(dir) = &cfg.output.dir {
        std::fs::create_dir_all(dir)?;
        let solution = FeFunction::from_values(&mesh, outcome.values.clone())?;
        solution.write_table(std::io::BufWriter::new(std::fs::File::create(dir.join("solution.dat"))?))?;
        outcome.write_report(std::io::BufWriter::new(std::fs::File::create(dir.join("report.csv"))?))?;
    }
    Ok(outcome)
}

/// One line of a refinement table.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    pub eps: f64,
    pub error_max: f64,
    pub order: Option<f64>,
    pub iters: Option<usize>,
    pub residual: Option<f64>,
    pub seconds: Option<f64>,
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{STUDY_HEADER}").unwrap();
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.n,
            num(r.h),
            num(r.eps),
            num(r.error_max),
            opt(r.order, |o| format!("{o:.6}")),
            opt(r.iters, |i| i.to_string()),
            opt(r.residual, num),
            opt(r.seconds, |t| format!("{t:.3}")),
        )
        .unwrap();
    }
    s
}

/// Whitespace-separated table for gnuplot.
pub fn study_dat(rows: &[StudyRow]) -> String {
    let mut s = String::from("# n h eps error_max\n");
    for r in rows {
        writeln!(s, "{} {} {} {}", r.n, num(r.h), num(r.eps), num(r.error_max)).unwrap();
    }
    s
}

/// `log(e_{i-1} / e_i) / log(h_{i-1} / h_i)`, which is `log2(e_n / e_2n)`
/// under halving.
pub fn fill_orders(rows: &mut [StudyRow]) {
    for i in 1..rows.len() {
        let (prev, cur) = (&rows[i - 1], &rows[i]);
        let order = (prev.error_max / cur.error_max).ln() / (prev.h / cur.h).ln();
        rows[i].order = order.is_finite().then_some(order);
    }
}

fn write_outputs(cfg: &RunConfig, stem: &str, csv: &str, dat: Option<&str>) -> Result<()> {
    if let Some(dir) = &cfg.output.dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.csv")), csv)?;
        if let Some(dat) = dat {
            std::fs::write(dir.join(format!("{stem}.dat")), dat)?;
        }
    }
    Ok(())
}

fn require_structured(cfg: &RunConfig) -> Result<()> {
    if cfg.mesh.file.is_some() {
        return Err(Error::Config("refinement studies need structured meshes; remove [mesh] file".into()));
    }
    Ok(())
}

/// Reference solutions keyed by problem, resolution, eps schedule, kernel
/// and rule. Entries are kept in memory and, when a directory is given,
/// on disk.
#[derive(Debug, Default)]
pub struct ReferenceCache {
    dir: Option<PathBuf>,
    entries: Mutex<HashMap<String, Arc<Vec<f64>>>>,
}

impl ReferenceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            entries: Mutex::default(),
        }
    }

    pub fn key(cfg: &RunConfig, n_ref: usize) -> String {
        let e = cfg.eps;
        let r = cfg.rule;
        format!(
            "{}-n{}-c{:?}-g{:?}-d{:?}-p{}-{:?}-r{:?}-{}x{}",
            cfg.problem, n_ref, e.c, e.gamma, e.delta, cfg.kernel.p, r.kind, r.r, r.n_r, r.n_t
        )
        .to_lowercase()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("reference-{key}.txt")))
    }

    fn read(path: &Path) -> Option<Vec<f64>> {
        let text = std::fs::read_to_string(path).ok()?;
        text.lines().map(|l| l.trim().parse().ok()).collect()
    }

    /// Nodal reference solution at resolution `n_ref`, solving on a miss.
    pub fn get(&self, cfg: &RunConfig, problem: &ControlProblem, n_ref: usize) -> Result<Arc<Vec<f64>>> {
        let key = Self::key(cfg, n_ref);
        if let Some(v) = self.entries.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let path = self.path(&key);
        let values = match path.as_deref().and_then(Self::read) {
            Some(v) => v,
            None => {
                log::info!("solving reference {key}");
                let mesh = cfg.build_mesh(n_ref)?;
                let v = solve_on(cfg, problem, &mesh, n_ref, &problem_source(problem))?.values;
                if let Some(p) = &path {
                    if let Some(d) = p.parent() {
                        std::fs::create_dir_all(d)?;
                    }
                    let text: String = v.iter().map(|x| format!("{x:?}\n")).collect();
                    std::fs::write(p, text)?;
                }
                v
            }
        };
        let values = Arc::new(values);
        self.entries.lock().unwrap().insert(key, values.clone());
        Ok(values)
    }
}

/// Errors against the exact solution when known, otherwise against a
/// reference solution at `study.reference_n`.
pub fn run_convergence_study(cfg: &RunConfig, cache: &ReferenceCache) -> Result<Vec<StudyRow>> {
    require_structured(cfg)?;
    let problem = cfg.build_problem()?;
    let ns = cfg.resolutions();
    let reference = match problem.exact {
        Some(_) => None,
        None => {
            let n_ref = cfg.study.reference_n;
            if let Some(&n) = ns.iter().find(|&&n| n_ref % n != 0) {
                return Err(Error::Config(format!(
                    "reference_n = {n_ref} is not a multiple of n = {n}"
                )));
            }
            Some((cfg.build_mesh(n_ref)?, cache.get(cfg, &problem, n_ref)?))
        }
    };
    let mut rows = ns
        .par_iter()
        .map(|&n| -> Result<StudyRow> {
            let mesh = cfg.build_mesh(n)?;
            let out = solve_on(cfg, &problem, &mesh, n, &problem_source(&problem))?;
            let error_max = match (&problem.exact, &reference) {
                (Some(u), _) => mesh
                    .vertices()
                    .iter()
                    .zip(&out.values)
                    .map(|(x, v)| (v - u.eval(*x)).abs())
                    .fold(0.0, f64::max),
                (None, Some((fine, values))) => {
                    let fine_fn = FeFunction::from_values(fine, values.to_vec())?;
                    mesh.vertices()
                        .iter()
                        .zip(&out.values)
                        .map(|(x, v)| (v - fine_fn.eval(*x)).abs())
                        .fold(0.0, f64::max)
                }
                (None, None) => unreachable!("reference is built whenever exact is missing"),
            };
            Ok(StudyRow {
                n,
                h: out.h,
                eps: out.eps,
                error_max,
                order: None,
                iters: Some(out.outer_iterations),
                residual: Some(out.final_residual()),
                seconds: cfg.study.timing.then_some(out.seconds),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fill_orders(&mut rows);
    write_outputs(cfg, "convergence", &study_csv(&rows), Some(&study_dat(&rows)))?;
    Ok(rows)
}

/// Largest nodal consistency defect per resolution, in the study table
/// format with `error_max` holding the defect.
pub fn run_consistency_study(cfg: &RunConfig) -> Result<Vec<StudyRow>> {
    require_structured(cfg)?;
    let problem = cfg.build_problem()?;
    let rule = cfg.build_rule()?;
    let function: Box<dyn SmoothFunction> = match cfg.study.function {
        ConsistencyFunction::Sine => Box::new(SineProduct::default()),
        ConsistencyFunction::Quadratic => Box::new(Quadratic::half_norm_squared()),
    };
    let mut rows = cfg
        .resolutions()
        .par_iter()
        .map(|&n| -> Result<StudyRow> {
            let start = Instant::now();
            let mesh = cfg.build_mesh(n)?;
            let eps = cfg.schedule().eps(mesh.h());
            let ctx = OperatorContext::new(&mesh, &problem, &rule, eps, cfg.mesh.allow_non_acute)?;
            let defect = ctx.measure_consistency(function.as_ref())?;
            Ok(StudyRow {
                n,
                h: mesh.h(),
                eps,
                error_max: defect,
                order: None,
                iters: None,
                residual: None,
                seconds: cfg.study.timing.then(|| start.elapsed().as_secs_f64()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fill_orders(&mut rows);
    write_outputs(cfg, "consistency", &study_csv(&rows), Some(&study_dat(&rows)))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbpRow {
    pub n: usize,
    pub h: f64,
    pub eps: f64,
    pub sup_neg: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub contact_size: usize,
    /// Ratio relative to the previous row.
    pub growth: Option<f64>,
    /// `max_z (Gamma(v)(z) - v(z))` over interior nodes; never positive.
    pub envelope_excess: f64,
    /// Nodal envelope change when the ring is doubled.
    pub ring_sensitivity: f64,
}

pub fn abp_csv(rows: &[AbpRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{ABP_HEADER}").unwrap();
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.n,
            num(r.h),
            num(r.eps),
            num(r.sup_neg),
            num(r.rhs),
            num(r.ratio),
            r.contact_size,
            opt(r.growth, |g| format!("{g:.6}")),
            num(r.envelope_excess),
            num(r.ring_sensitivity),
        )
        .unwrap();
    }
    s
}

/// Source constant on each cell of the structured mesh of resolution
/// `base_n`, with values drawn uniformly from `[-1, 1]`.
pub struct RandomCellSource {
    mesh: Mesh,
    values: Vec<f64>,
}

impl RandomCellSource {
    pub fn new(cfg: &RunConfig, base_n: usize, seed: u64) -> Result<Self> {
        let mesh = cfg.build_mesh(base_n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..mesh.num_cells()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Ok(Self { mesh, values })
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self.mesh.locate(x) {
            PointLocation::Inside { cell, .. } => self.values[cell],
            PointLocation::Outside => 0.0,
        }
    }
}

/// Solves with a seeded random source at each resolution and reports the
/// discrete ABP ratio.
pub fn run_abp_study(cfg: &RunConfig) -> Result<Vec<AbpRow>> {
    require_structured(cfg)?;
    let problem = cfg.build_problem()?;
    let source = RandomCellSource::new(cfg, cfg.study.abp_base_n, cfg.seed)?;
    let ring = cfg.study.ring_samples;
    let mut rows = cfg
        .resolutions()
        .par_iter()
        .map(|&n| -> Result<AbpRow> {
            let mesh = cfg.build_mesh(n)?;
            let out = solve_on(cfg, &problem, &mesh, n, &|x| source.eval(x))?;
            let v = FeFunction::from_values(&mesh, out.values)?;
            let env = convex_envelope(&v, None, ring)?;
            let contact = contact_set(&v, &env, None);
            let r = abp_ratio_with(&mesh, &v, &out.loads, &contact)?;
            let envelope_excess = mesh
                .interior_nodes()
                .iter()
                .map(|&z| env.nodal()[z] - v.value(z))
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(AbpRow {
                n,
                h: mesh.h(),
                eps: out.eps,
                sup_neg: r.sup_neg,
                rhs: r.rhs,
                ratio: r.ratio,
                contact_size: r.contact_size,
                growth: None,
                envelope_excess,
                ring_sensitivity: ring_sensitivity(&v, ring, 2 * ring)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for i in 1..rows.len() {
        let g = rows[i].ratio / rows[i - 1].ratio;
        rows[i].growth = g.is_finite().then_some(g);
    }
    write_outputs(cfg, "abp", &abp_csv(&rows), None)?;
    Ok(rows)
}
