//! Run configuration, read from TOML with every table and key checked.
//!
//! ```toml
//! problem = "isaacs-2x2"
//! n = 16
//! ns = [8, 16, 32]
//! seed = 7
//!
//! [eps]
//! c = 1.0
//! gamma = 0.5
//! delta = 1.0
//!
//! [rule]
//! kind = "axis"
//! r = 0.5
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::registry;
use crate::kernel::{build_axis_rule, build_polar_rule, BallQuadrature, Kernel};
use crate::mesh::{build_structured_mesh, Mesh, Rect};
use crate::nonlocal::EpsSchedule;
use crate::problem::{ControlProblem, MatrixField, ScalarField};
use crate::solver::{HowardConfig, Initialization};
use crate::sym2::Sym2;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    /// Mesh resolution for single runs.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Resolutions for refinement studies.
    #[serde(default)]
    pub ns: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub eps: EpsConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub rule: RuleConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub custom: Option<CustomConfig>,
}

fn default_n() -> usize {
    16
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsConfig {
    pub c: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for EpsConfig {
    fn default() -> Self {
        let s = EpsSchedule::default();
        Self {
            c: s.c,
            gamma: s.gamma,
            delta: s.delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub p: u32,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { p: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Axis,
    Polar,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuleConfig {
    pub kind: RuleKind,
    /// Axis rule radius.
    pub r: f64,
    pub n_r: usize,
    pub n_t: usize,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            kind: RuleKind::Axis,
            r: 0.5,
            n_r: 4,
            n_t: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Paraboloid,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub inner_tol: f64,
    pub max_outer: Option<usize>,
    pub max_inner: usize,
    /// Enables inexact inner solves with `eta_k = eta0 2^-k`.
    pub eta0: Option<f64>,
    pub init: InitKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let h = HowardConfig::default();
        Self {
            tol: h.tol,
            inner_tol: h.inner_tol,
            max_outer: h.max_outer,
            max_inner: h.max_inner,
            eta0: h.inexact,
            init: InitKind::Paraboloid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsistencyFunction {
    Sine,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    /// Reference resolution for problems without an exact solution.
    pub reference_n: usize,
    /// Fills the `seconds` column; off by default so output is reproducible.
    pub timing: bool,
    pub function: ConsistencyFunction,
    /// Coarsest resolution on whose cells the random ABP source is constant.
    pub abp_base_n: usize,
    pub ring_samples: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            reference_n: 128,
            timing: false,
            function: ConsistencyFunction::Sine,
            abp_base_n: 4,
            ring_samples: crate::abp::DEFAULT_RING_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    /// Node/cell table as written by `Mesh::write_tables`; replaces the
    /// structured mesh.
    pub file: Option<PathBuf>,
    pub allow_non_acute: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Constant-coefficient problem given inline, selected by `problem = "custom"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomConfig {
    pub n_alpha: usize,
    pub n_beta: usize,
    /// Row-major 2x2 matrices, indexed `alpha * n_beta + beta`.
    pub matrices: Vec<[f64; 4]>,
    #[serde(default = "default_source")]
    pub source: f64,
}

fn default_source() -> f64 {
    1.0
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Default configuration for `problem`, unvalidated.
    pub fn for_problem(problem: &str) -> Self {
        toml::from_str(&format!("problem = {problem:?}")).expect("defaults deserialize")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 1 || self.ns.iter().any(|&n| n < 1) {
            return bad("mesh resolutions must be at least 1".into());
        }
        let e = self.eps;
        if !(e.c > 0.0 && e.gamma >= 0.0 && e.delta >= 0.0) || ![e.c, e.gamma, e.delta].iter().all(|v| v.is_finite()) {
            return bad(format!("invalid eps schedule {e:?}"));
        }
        let s = self.solver;
        if !(s.tol > 0.0 && s.inner_tol > 0.0) || s.max_inner == 0 || s.max_outer == Some(0) {
            return bad(format!("invalid solver settings {s:?}"));
        }
        if matches!(s.eta0, Some(v) if !(v >= 0.0)) {
            return bad("eta0 must be nonnegative".into());
        }
        if self.study.reference_n < 1 || self.study.abp_base_n < 1 || self.study.ring_samples < 3 {
            return bad("invalid study settings".into());
        }
        match (self.problem.as_str(), &self.custom) {
            ("custom", None) => bad("problem = \"custom\" requires a [custom] table".into()),
            ("custom", Some(c)) => {
                if c.n_alpha == 0 || c.n_beta == 0 || c.matrices.len() != c.n_alpha * c.n_beta {
                    return bad(format!(
                        "[custom] needs n_alpha * n_beta = {} matrices, got {}",
                        c.n_alpha * c.n_beta,
                        c.matrices.len()
                    ));
                }
                Ok(())
            }
            (_, Some(_)) => bad("[custom] is only valid with problem = \"custom\"".into()),
            (id, None) => registry::lookup(id).map(|_| ()),
        }
    }

    pub fn schedule(&self) -> EpsSchedule {
        EpsSchedule {
            c: self.eps.c,
            gamma: self.eps.gamma,
            delta: self.eps.delta,
        }
    }

    pub fn build_rule(&self) -> Result<BallQuadrature> {
        let kernel = Kernel::new(self.kernel.p)?;
        match self.rule.kind {
            RuleKind::Axis => build_axis_rule(&kernel, self.rule.r),
            RuleKind::Polar => build_polar_rule(&kernel, self.rule.n_r, self.rule.n_t),
        }
    }

    pub fn howard(&self) -> HowardConfig {
        HowardConfig {
            tol: self.solver.tol,
            inner_tol: self.solver.inner_tol,
            max_outer: self.solver.max_outer,
            max_inner: self.solver.max_inner,
            inexact: self.solver.eta0,
            init: match self.solver.init {
                InitKind::Paraboloid => Initialization::Paraboloid,
                InitKind::Zero => Initialization::Zero,
            },
        }
    }

    pub fn build_problem(&self) -> Result<ControlProblem> {
        let Some(c) = &self.custom else {
            return registry::lookup(&self.problem);
        };
        let mut coeff = Vec::with_capacity(c.matrices.len());
        for (k, m) in c.matrices.iter().enumerate() {
            let a = Sym2::from_row_major(*m, 1e-12)
                .ok_or_else(|| Error::Config(format!("[custom] matrix {k} is not symmetric")))?;
            coeff.push(MatrixField::Constant(a));
        }
        let mut p = ControlProblem::new(
            "custom",
            c.n_alpha,
            c.n_beta,
            coeff,
            ScalarField::Constant(c.source),
            Rect::unit_square(),
        )?;
        registry::with_bounds(&mut p)?;
        Ok(p)
    }

    /// Structured mesh of resolution `n`, or the mesh file when configured.
    pub fn build_mesh(&self, n: usize) -> Result<Mesh> {
        match &self.mesh.file {
            Some(path) => {
                let file = std::fs::File::open(path)
                    .map_err(|e| Error::Config(format!("cannot open mesh {}: {e}", path.display())))?;
                Mesh::read_tables(std::io::BufReader::new(file))
            }
            None => build_structured_mesh(n, Rect::unit_square()),
        }
    }

    /// Study resolutions, falling back to the single `n`.
    pub fn resolutions(&self) -> Vec<usize> {
        if self.ns.is_empty() {
            vec![self.n]
        } else {
            self.ns.clone()
        }
    }
}
