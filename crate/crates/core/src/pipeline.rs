//! Staged annealing with independent restarts and an invariant check of
//! the final polygon against the seed.
//!
//! Seeding: every random stream is a ChaCha8 stream keyed by the master
//! seed. Stream 0 drives the invariant reports; restart `r` owns stream
//! `r + 1` for all of its stages. A restart's trajectory therefore depends
//! only on the master seed and its index, never on scheduling.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilateral::{
    equalize_edges, max_unit_deviation, mr_certificate, normalize_and_close, EquilateralCertificate,
    EquilateralError, DEFAULT_CLOSURE_TOL, DEFAULT_TARGET_BAND,
};
use crate::lattice::{anneal_lattice, AnnealConfig, LatticeError};
use crate::polygon::{
    builtin_lattice_trefoil, figure_eight_seed, read_lattice_polygon, read_polygon, torus_knot_seed, write_polygon,
    LatticePolygon, Polygon, PolygonError, SeedSpec,
};
use crate::stick::{run_stage, StageConfig, StageError, StageKind, UNIT_TOL};
use crate::svg::{export_projection_svg, SvgError};
use crate::verify::{compare_invariants, invariant_report, InvariantReport, VerifyError, DEFAULT_REL_TOL, DEFAULT_SAMPLES};

/// Per-stage time budget unless configured otherwise.
pub const DEFAULT_STAGE_BUDGET: Duration = Duration::from_secs(60);

/// Pipeline stages in their canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Lattice,
    UnitStick,
    FreeStick,
    Equilateralize,
}

impl Stage {
    pub fn parse_list(s: &str) -> Result<Vec<Stage>, PipelineError> {
        s.split(',')
            .map(|t| match t.trim() {
                "lattice" => Ok(Stage::Lattice),
                "unit" => Ok(Stage::UnitStick),
                "free" => Ok(Stage::FreeStick),
                "eq" => Ok(Stage::Equilateralize),
                other => Err(PipelineError::Config(format!("unknown stage `{other}`"))),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualizeConfig {
    pub target_band: f64,
    pub max_iters: usize,
    pub eps: f64,
    pub closure_tol: f64,
    pub closure_iters: usize,
}

impl Default for EqualizeConfig {
    fn default() -> Self {
        Self {
            target_band: DEFAULT_TARGET_BAND,
            max_iters: 1_000_000,
            eps: crate::geom::DEFAULT_EPS,
            closure_tol: DEFAULT_CLOSURE_TOL,
            closure_iters: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: SeedSpec,
    /// A subsequence of the canonical stage order.
    pub stages: Vec<Stage>,
    pub lattice: AnnealConfig,
    pub unit: StageConfig<f64>,
    pub free: StageConfig<f64>,
    pub equalize: EqualizeConfig,
    pub restarts: usize,
    pub rng_seed: u64,
    /// Evaluation points of the invariant reports.
    pub invariant_samples: usize,
    /// Upper bound on concurrently running restarts (`None`: one per core).
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub svg: bool,
    pub report_path: Option<PathBuf>,
}

impl PipelineConfig {
    /// All stages applicable to `seed`, with default settings and the
    /// default time budget on each annealing stage.
    pub fn new(seed: SeedSpec) -> Self {
        let stages = if seed.is_lattice() {
            vec![Stage::Lattice, Stage::UnitStick, Stage::FreeStick]
        } else {
            vec![Stage::FreeStick]
        };
        let budget = Some(DEFAULT_STAGE_BUDGET);
        Self {
            seed,
            stages,
            lattice: AnnealConfig {
                time_budget: budget,
                ..AnnealConfig::default()
            },
            unit: StageConfig {
                time_budget: budget,
                ..StageConfig::default()
            },
            free: StageConfig {
                time_budget: budget,
                ..StageConfig::default()
            },
            equalize: EqualizeConfig::default(),
            restarts: 1,
            rng_seed: 0,
            invariant_samples: DEFAULT_SAMPLES,
            threads: None,
            out_dir: None,
            svg: false,
            report_path: None,
        }
    }

    fn check(&self, seed: &Seed) -> Result<(), PipelineError> {
        if self.stages.is_empty() {
            return Err(PipelineError::Config("no stages selected".into()));
        }
        if self.stages.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PipelineError::Config(format!(
                "stages {:?} are not in the order lattice, unit, free, eq",
                self.stages
            )));
        }
        for (name, p) in [("lattice", self.lattice.p_grow), ("unit", self.unit.p_grow), ("free", self.free.p_grow)] {
            if !(0.0..1.0).contains(&p) {
                return Err(PipelineError::Config(format!("{name} p_grow must lie in [0, 1), got {p}")));
            }
        }
        if self.restarts == 0 {
            return Err(PipelineError::Config("at least one restart is required".into()));
        }
        let lattice_input = matches!(seed, Seed::Lattice(_));
        if self.stages[0] == Stage::Lattice && !lattice_input {
            return Err(PipelineError::Config("the lattice stage needs a lattice seed".into()));
        }
        if self.stages[0] == Stage::UnitStick {
            if let Seed::OffLattice(p) = seed {
                if let Some((i, l)) = p.edge_lengths().iter().enumerate().find(|(_, l)| (**l - 1.0).abs() > UNIT_TOL) {
                    return Err(PipelineError::Config(format!(
                        "the unit stage needs unit edges; edge {i} has length {l}"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl SeedSpec {
    pub fn is_lattice(&self) -> bool {
        matches!(self, SeedSpec::LatticeFile(_) | SeedSpec::BuiltinLatticeTrefoil)
    }

    pub fn resolve(&self) -> Result<Seed, PolygonError> {
        Ok(match self {
            SeedSpec::File(path) => Seed::OffLattice(read_polygon(path)?),
            SeedSpec::LatticeFile(path) => Seed::Lattice(read_lattice_polygon(path)?),
            SeedSpec::TorusKnot { p, q, samples } => Seed::OffLattice(torus_knot_seed(*p, *q, *samples)?),
            SeedSpec::FigureEight { samples } => Seed::OffLattice(figure_eight_seed(*samples)?),
            SeedSpec::BuiltinLatticeTrefoil => Seed::Lattice(builtin_lattice_trefoil()),
        })
    }
}

/// A resolved seed polygon.
#[derive(Clone, Debug, PartialEq)]
pub enum Seed {
    Lattice(LatticePolygon),
    OffLattice(Polygon<f64>),
}

impl Seed {
    pub fn polygon(&self) -> Polygon<f64> {
        match self {
            Seed::Lattice(l) => l.to_polygon(),
            Seed::OffLattice(p) => p.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("seed: {0}")]
    Seed(#[from] PolygonError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("lattice stage: {0}")]
    Lattice(#[from] LatticeError),
    #[error("off-lattice stage: {0}")]
    Stage(#[from] StageError),
    #[error("verification: {0}")]
    Verify(#[from] VerifyError),
    #[error("final polygon fails the invariant comparison with the seed")]
    VerificationFailed,
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("output: {0}")]
    Json(#[from] serde_json::Error),
    #[error("figure: {0}")]
    Svg(#[from] SvgError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: Stage,
    pub initial_edges: usize,
    pub best_edges: usize,
    pub iterations: u64,
    pub accepted: u64,
    pub seconds: f64,
}

/// Outcome of the equalization stage. A stage that does not converge
/// leaves the polygon as it was and is reported here rather than failing
/// the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilateralOutcome {
    pub converged: bool,
    /// Largest `|L_i - 1|` reached, after rescaling to unit mean length.
    pub max_dev: f64,
    pub failure: Option<String>,
    pub certificate: Option<EquilateralCertificate<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartReport {
    pub restart: usize,
    /// ChaCha8 stream index under the master seed.
    pub stream: u64,
    pub stages: Vec<StageSummary>,
    pub final_edges: usize,
    pub equilateral: Option<EquilateralOutcome>,
}

/// A restart's report together with its final polygon.
#[derive(Clone, Debug, PartialEq)]
pub struct RestartOutcome {
    pub report: RestartReport,
    pub polygon: Polygon<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: SeedSpec,
    pub stages: Vec<Stage>,
    pub rng_seed: u64,
    pub restarts: Vec<RestartReport>,
    /// Fewest edges reached by any restart in each stage.
    pub stage_best: Vec<(Stage, usize)>,
    pub best_restart: usize,
    pub best_edges: usize,
    pub initial_invariants: InvariantReport,
    pub final_invariants: InvariantReport,
    pub verdict: bool,
    pub equilateral: Option<EquilateralOutcome>,
    pub final_polygon: Polygon<f64>,
    pub final_polygon_path: Option<PathBuf>,
    pub svg_path: Option<PathBuf>,
}

impl RunReport {
    pub fn ensure_verified(&self) -> Result<(), PipelineError> {
        if self.verdict {
            Ok(())
        } else {
            Err(PipelineError::VerificationFailed)
        }
    }
}

fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

fn summary(stage: Stage, initial: usize, best: usize, iterations: u64, accepted: u64, elapsed: Duration) -> StageSummary {
    StageSummary {
        stage,
        initial_edges: initial,
        best_edges: best,
        iterations,
        accepted,
        seconds: elapsed.as_secs_f64(),
    }
}

fn equilateralize(poly: &Polygon<f64>, cfg: &EqualizeConfig, rng: &mut ChaCha8Rng) -> (Option<Polygon<f64>>, EquilateralOutcome) {
    // knot type is scale invariant; aim the unit target at the mean edge
    let mean = poly.edge_lengths().iter().sum::<f64>() / poly.len() as f64;
    let scaled = poly.scaled(1.0 / mean);
    let fail = |max_dev: f64, e: EquilateralError<f64>| {
        (
            None,
            EquilateralOutcome {
                converged: false,
                max_dev,
                failure: Some(e.to_string()),
                certificate: None,
            },
        )
    };
    let eq = match equalize_edges(&scaled, cfg.target_band, cfg.max_iters, cfg.eps, rng) {
        Ok(p) => p,
        Err(e) => {
            let dev = match &e {
                EquilateralError::NotConverged { max_dev, .. } => *max_dev,
                _ => max_unit_deviation(&scaled),
            };
            return fail(dev, e);
        }
    };
    let closed = match normalize_and_close(&eq, cfg.closure_tol, cfg.closure_iters) {
        Ok(p) => p,
        Err(e) => return fail(max_unit_deviation(&eq), e),
    };
    let certificate = mr_certificate(&closed).ok();
    let outcome = EquilateralOutcome {
        converged: true,
        max_dev: max_unit_deviation(&closed),
        failure: None,
        certificate,
    };
    (Some(closed), outcome)
}

/// Runs every configured stage for restart `restart` on its own stream.
pub fn run_restart(cfg: &PipelineConfig, seed: &Seed, restart: usize) -> Result<RestartOutcome, PipelineError> {
    let stream = restart as u64 + 1;
    let mut rng = stream_rng(cfg.rng_seed, stream);
    let mut lattice = match seed {
        Seed::Lattice(l) => Some(l.clone()),
        Seed::OffLattice(_) => None,
    };
    let mut poly: Option<Polygon<f64>> = match seed {
        Seed::OffLattice(p) => Some(p.clone()),
        Seed::Lattice(_) => None,
    };
    let mut stages = Vec::new();
    let mut equilateral = None;
    for &stage in &cfg.stages {
        match stage {
            Stage::Lattice => {
                let start = lattice.take().ok_or_else(|| PipelineError::Config("lattice stage needs a lattice seed".into()))?;
                let run = anneal_lattice(&start, &cfg.lattice, &mut rng)?;
                let s = &run.stats;
                stages.push(summary(stage, s.initial_len, s.best_len, s.iterations, s.accepted, s.elapsed));
                poly = Some(run.best.to_polygon());
            }
            Stage::UnitStick | Stage::FreeStick => {
                let current = poly.take().or_else(|| lattice.take().map(|l| l.to_polygon())).expect("seed polygon");
                let (kind, stage_cfg) = if stage == Stage::UnitStick {
                    (StageKind::Unit, &cfg.unit)
                } else {
                    (StageKind::Free, &cfg.free)
                };
                let run = if kind == StageKind::Unit {
                    crate::stick::run_unit_stage(&current, stage_cfg, &mut rng)?
                } else {
                    run_stage(&current, kind, stage_cfg, &mut rng)?
                };
                let s = &run.stats;
                stages.push(summary(stage, s.initial_edges, s.best_edges, s.iterations, s.accepted, s.elapsed));
                poly = Some(run.best);
            }
            Stage::Equilateralize => {
                let current = poly.take().or_else(|| lattice.take().map(|l| l.to_polygon())).expect("seed polygon");
                let start = Instant::now();
                let (closed, outcome) = equilateralize(&current, &cfg.equalize, &mut rng);
                let n = current.len();
                stages.push(summary(stage, n, n, 0, 0, start.elapsed()));
                equilateral = Some(outcome);
                poly = Some(closed.unwrap_or(current));
            }
        }
    }
    let polygon = poly.or_else(|| lattice.map(|l| l.to_polygon())).expect("seed polygon");
    Ok(RestartOutcome {
        report: RestartReport {
            restart,
            stream,
            stages,
            final_edges: polygon.len(),
            equilateral,
        },
        polygon,
    })
}

fn run_all(cfg: &PipelineConfig, seed: &Seed) -> Result<Vec<RestartOutcome>, PipelineError> {
    let work = || (0..cfg.restarts).into_par_iter().map(|r| run_restart(cfg, seed, r)).collect();
    match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Resolves the seed, runs all restarts, picks the polygon with the fewest
/// edges (lowest restart index on ties) and compares its invariants with
/// the seed's. Writes the configured outputs. A failed comparison is
/// reported through `verdict`; see [`RunReport::ensure_verified`].
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let seed = cfg.seed.resolve()?;
    seed.polygon().validate(0.0)?;
    cfg.check(&seed)?;

    let verify_rng = stream_rng(cfg.rng_seed, 0);
    let initial_invariants = invariant_report(&seed.polygon(), cfg.invariant_samples, &mut verify_rng.clone())?;

    let outcomes = run_all(cfg, &seed)?;
    let best = outcomes
        .iter()
        .min_by_key(|o| (o.polygon.len(), o.report.restart))
        .expect("at least one restart");
    // identical thetas: both reports start from the same stream state
    let final_invariants = invariant_report(&best.polygon, cfg.invariant_samples, &mut verify_rng.clone())?;
    let verdict = compare_invariants(&initial_invariants, &final_invariants, DEFAULT_REL_TOL)?;

    let stage_best = cfg
        .stages
        .iter()
        .enumerate()
        .map(|(k, &s)| (s, outcomes.iter().map(|o| o.report.stages[k].best_edges).min().unwrap_or(0)))
        .collect();

    let mut report = RunReport {
        seed: cfg.seed.clone(),
        stages: cfg.stages.clone(),
        rng_seed: cfg.rng_seed,
        restarts: outcomes.iter().map(|o| o.report.clone()).collect(),
        stage_best,
        best_restart: best.report.restart,
        best_edges: best.polygon.len(),
        initial_invariants,
        final_invariants,
        verdict,
        equilateral: best.report.equilateral.clone(),
        final_polygon: best.polygon.clone(),
        final_polygon_path: None,
        svg_path: None,
    };
    write_outputs(cfg, &mut report)?;
    Ok(report)
}

fn write_outputs(cfg: &PipelineConfig, report: &mut RunReport) -> Result<(), PipelineError> {
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("final_polygon.txt");
        write_polygon(&report.final_polygon, &path)?;
        report.final_polygon_path = Some(path);
        if cfg.svg {
            let path = dir.join("final_polygon.svg");
            export_projection_svg(&report.final_polygon, report.final_invariants.direction, &path)?;
            report.svg_path = Some(path);
        }
    }
    if let Some(path) = &cfg.report_path {
        write_report(report, path)?;
    }
    Ok(())
}

pub fn write_report(report: &RunReport, path: &Path) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(report)?)?;
    Ok(())
}
