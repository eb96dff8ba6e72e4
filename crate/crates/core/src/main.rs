use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{ArgGroup, Parser};
use stickmin::pipeline::{run_pipeline, PipelineConfig, PipelineError, Stage};
use stickmin::SeedSpec;

const EXIT_VERIFICATION: u8 = 2;
const EXIT_SEED: u8 = 3;
const EXIT_STAGE: u8 = 4;
const EXIT_OUTPUT: u8 = 1;

/// Minimize the number of edges of a polygonal knot without changing its
/// knot type.
#[derive(Debug, Parser)]
#[command(version, about)]
#[command(group(ArgGroup::new("seed").required(true).args(
    ["seed_file", "lattice_file", "torus", "figure_eight", "builtin_trefoil"]
)))]
struct Args {
    /// Off-lattice polygon file (one `x y z` vertex per line)
    #[arg(long, value_name = "PATH")]
    seed_file: Option<PathBuf>,
    /// Cubic-lattice polygon file (integer coordinates)
    #[arg(long, value_name = "PATH")]
    lattice_file: Option<PathBuf>,
    /// Torus knot seed T(p, q)
    #[arg(long, num_args = 2, value_names = ["P", "Q"])]
    torus: Option<Vec<u32>>,
    /// Parametric figure-eight seed
    #[arg(long)]
    figure_eight: bool,
    /// Built-in 32-step lattice trefoil
    #[arg(long)]
    builtin_trefoil: bool,
    /// Vertices sampled on parametric seeds
    #[arg(long, default_value_t = 96)]
    samples: usize,
    /// Comma-separated subsequence of lattice,unit,free,eq
    #[arg(long)]
    stages: Option<String>,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Iteration cap per annealing stage
    #[arg(long)]
    iters: Option<u64>,
    /// Wall-clock budget per annealing stage and restart, in seconds
    #[arg(long, default_value_t = 60.0)]
    time_budget: f64,
    /// Acceptance probability of edge-adding moves (all annealing stages)
    #[arg(long)]
    p_grow: Option<f64>,
    /// Clearance tolerance of the off-lattice sweep checks
    #[arg(long)]
    eps: Option<f64>,
    /// Determinant check interval in accepted moves (0 disables)
    #[arg(long)]
    verify_every: Option<u64>,
    /// Stop each off-lattice stage once this edge count is reached
    #[arg(long)]
    target: Option<usize>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    /// Directory for the final polygon (and figure)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write an SVG projection of the final polygon into --out
    #[arg(long, requires = "out")]
    svg: bool,
    /// JSON report path (printed to stdout when absent)
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

impl Args {
    fn seed(&self) -> SeedSpec {
        if let Some(p) = &self.seed_file {
            SeedSpec::File(p.clone())
        } else if let Some(p) = &self.lattice_file {
            SeedSpec::LatticeFile(p.clone())
        } else if let Some(pq) = &self.torus {
            SeedSpec::TorusKnot {
                p: pq[0],
                q: pq[1],
                samples: self.samples,
            }
        } else if self.figure_eight {
            SeedSpec::FigureEight { samples: self.samples }
        } else {
            SeedSpec::BuiltinLatticeTrefoil
        }
    }

    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = PipelineConfig::new(self.seed());
        if let Some(s) = &self.stages {
            cfg.stages = Stage::parse_list(s)?;
        }
        if !(self.time_budget > 0.0 && self.time_budget.is_finite()) {
            return Err(PipelineError::Config(format!("bad time budget {}", self.time_budget)));
        }
        let budget = Some(Duration::from_secs_f64(self.time_budget));
        cfg.lattice.time_budget = budget;
        cfg.unit.time_budget = budget;
        cfg.free.time_budget = budget;
        if let Some(n) = self.iters {
            cfg.lattice.max_iters = n;
            cfg.unit.max_iters = n;
            cfg.free.max_iters = n;
        }
        if let Some(p) = self.p_grow {
            cfg.lattice.p_grow = p;
            cfg.unit.p_grow = p;
            cfg.free.p_grow = p;
        }
        if let Some(e) = self.eps {
            cfg.unit.eps = e;
            cfg.free.eps = e;
            cfg.equalize.eps = e;
        }
        if let Some(v) = self.verify_every {
            cfg.lattice.verify_every = v;
            cfg.unit.verify_every = v;
            cfg.free.verify_every = v;
        }
        cfg.unit.target_edges = self.target;
        cfg.free.target_edges = self.target;
        cfg.restarts = self.restarts;
        cfg.rng_seed = self.rng_seed;
        cfg.threads = std::env::var("STICKMIN_THREADS").ok().and_then(|v| v.parse().ok());
        cfg.out_dir = self.out.clone();
        cfg.svg = self.svg;
        cfg.report_path = self.report.clone();
        Ok(cfg)
    }
}

fn exit_code(e: &PipelineError) -> u8 {
    match e {
        PipelineError::Seed(_) | PipelineError::Config(_) => EXIT_SEED,
        PipelineError::Lattice(_) | PipelineError::Stage(_) => EXIT_STAGE,
        PipelineError::Verify(_) | PipelineError::VerificationFailed => EXIT_VERIFICATION,
        PipelineError::Io(_) | PipelineError::Json(_) | PipelineError::Svg(_) => EXIT_OUTPUT,
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_SEED);
        }
    };
    let result = args.config().and_then(|cfg| {
        let report = run_pipeline(&cfg)?;
        if cfg.report_path.is_none() {
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        eprintln!(
            "best edge count {} (restart {}), invariants {}",
            report.best_edges,
            report.best_restart,
            if report.verdict { "match" } else { "DIFFER" }
        );
        report.ensure_verified()
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
