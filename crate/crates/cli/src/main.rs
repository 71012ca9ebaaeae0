//! `isaacs`: solve, refinement studies and mesh diagnostics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isaacs_core::harness::studies::{abp_csv, study_csv};
use isaacs_core::harness::{self, ReferenceCache, RunConfig};
use isaacs_core::Result;

#[derive(Parser)]
#[command(name = "isaacs", version, about = "Two-scale FEM for Isaacs equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and report the Howard iteration.
    Solve(Common),
    /// Convergence study over `ns`.
    Study(Common),
    /// Consistency defect study over `ns`.
    Consistency(Common),
    /// ABP ratio study with a seeded random source.
    Abp(Common),
    /// Print mesh statistics, optionally writing the node/cell tables.
    MeshInfo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "problem")]
    config: Option<PathBuf>,
    /// Registered problem id, as a shortcut for a minimal configuration.
    #[arg(long)]
    problem: Option<String>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Mesh resolution (overrides `n`).
    #[arg(long)]
    n: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.problem) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(id)) => {
                let cfg = RunConfig::for_problem(id);
                cfg.validate()?;
                cfg
            }
            (None, None) => {
                return Err(isaacs_core::Error::Config("either --config or --problem is required".into()))
            }
        };
        if let Some(out) = &self.out {
            cfg.output.dir = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    harness::init_worker_pool()?;
    match cli.command {
        Command::Solve(c) => {
            let cfg = c.load()?;
            let out = harness::run_solve(&cfg)?;
            println!("problem      {}", cfg.problem);
            println!("n            {}", out.n);
            println!("h            {:.6e}", out.h);
            println!("eps          {:.6e}", out.eps);
            println!("outer iters  {}", out.outer_iterations);
            println!("linear solves {}", out.linear_solves);
            println!("residual     {:.3e} (tol {:.3e})", out.final_residual(), out.tolerance);
            println!("max gap      {:.3e}", out.max_monotonicity_gap());
            let min = out.values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = out.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            println!("solution     [{min:.6e}, {max:.6e}]");
        }
        Command::Study(c) => {
            let cfg = c.load()?;
            let cache = match &cfg.output.dir {
                Some(d) => ReferenceCache::with_dir(d.join("cache")),
                None => ReferenceCache::new(),
            };
            print!("{}", study_csv(&harness::run_convergence_study(&cfg, &cache)?));
        }
        Command::Consistency(c) => {
            let cfg = c.load()?;
            print!("{}", study_csv(&harness::run_consistency_study(&cfg)?));
        }
        Command::Abp(c) => {
            let cfg = c.load()?;
            print!("{}", abp_csv(&harness::run_abp_study(&cfg)?));
        }
        Command::MeshInfo { common, write } => {
            let cfg = common.load()?;
            let mesh = cfg.build_mesh(cfg.n)?;
            println!("nodes          {}", mesh.num_nodes());
            println!("cells          {}", mesh.num_cells());
            println!("interior nodes {}", mesh.interior_nodes().len());
            println!("h              {:.6e}", mesh.h());
            println!("area           {:.6e}", mesh.area());
            println!("weakly acute   {}", mesh.is_weakly_acute());
            if let Some(path) = write {
                mesh.write_tables(std::io::BufWriter::new(std::fs::File::create(path)?))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
