//! The pipeline stages behind each CLI subcommand. Every stage reads and
//! writes the paths named in the configuration and returns what it produced.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::PipelineConfig;
use super::svg::Svg;
use super::tables::{
    dataset_csv, parse_dataset, read_file, summary_csv, sweep_csv, telemetry_csv, training_csv, trajectory_csv,
    trials_csv, write_file,
};
use crate::error::{Error, Result};
use crate::experiments::{
    benchmark, mppi_sigma_sweep, run_episode, summarize, synth_expert, trial_rng, Controller, Episode, EpisodeMetrics,
    ScenarioKind, Stream, Summary, SweepRow,
};
use crate::flow::{train, FlowModel, TrainReport};
use crate::mask::{build_cache, CacheSummary, MaskCache, PrimitiveSource};
use crate::planner::{cost, PlanResult, PlanTrace, Planner};
use crate::primitives::{reconstruct, PrimitiveParams};
use crate::vehicle::World;

pub const TRAINING_LOG: &str = "training.csv";
pub const PLAN_ONCE_SVG: &str = "plan_once.svg";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControllerKind {
    GenPlan,
    Mppi,
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::GenPlan => "genplan",
            Self::Mppi => "mppi",
        }
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "genplan" => Ok(Self::GenPlan),
            "mppi" => Ok(Self::Mppi),
            other => Err(Error::Config(format!("unknown controller {other:?} (expected genplan or mppi)"))),
        }
    }
}

fn out_path(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.paths.output_dir.join(name)
}

/// Synthesizes the expert dataset and writes it as CSV.
pub fn gen_data(cfg: &PipelineConfig) -> Result<Vec<PrimitiveParams>> {
    let data = synth_expert(&cfg.expert, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    write_file(&cfg.paths.dataset, &dataset_csv(&data, &cfg.meta()))?;
    Ok(data)
}

pub fn load_dataset(path: &Path) -> Result<Vec<PrimitiveParams>> {
    parse_dataset(&read_file(path)?).map_err(|e| match e {
        Error::Format { detail, .. } => Error::Format {
            what: "dataset",
            detail: format!("{}: {detail}", path.display()),
        },
        other => other,
    })
}

/// Trains a flow on the dataset file, saves it, and writes the per-epoch log.
pub fn train_model(cfg: &PipelineConfig) -> Result<(FlowModel, TrainReport)> {
    let data: Vec<[f64; 4]> = load_dataset(&cfg.paths.dataset)?.iter().map(|p| p.to_array()).collect();
    let (model, report) = train(&data, &cfg.train)?;
    let meta = cfg.meta();
    if let Some(dir) = cfg.paths.model.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    model.save(&cfg.paths.model, &meta)?;
    write_file(&out_path(cfg, TRAINING_LOG), &training_csv(&report, &meta))?;
    Ok((model, report))
}

/// Builds the mask cache for the model file and saves it.
pub fn build_cache_file(cfg: &PipelineConfig) -> Result<CacheSummary> {
    let (model, _) = FlowModel::load(&cfg.paths.model)?;
    let cache = build_cache(&model, &cfg.input_grid(), &cfg.roi, &cfg.cache, cfg.meta())?;
    if let Some(dir) = cfg.paths.cache.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    }
    cache.save(&cfg.paths.cache)?;
    Ok(cache.summary())
}

/// Loads model and cache and refuses pairs built from different models.
pub fn load_artifacts(cfg: &PipelineConfig) -> Result<(FlowModel, MaskCache)> {
    let cache = MaskCache::load(&cfg.paths.cache)?;
    let (model, _) = FlowModel::load(&cfg.paths.model)?;
    cache.check_model(&model)?;
    Ok((model, cache))
}

pub struct PlanOnce {
    pub result: PlanResult,
    pub trace: PlanTrace,
    pub svg: String,
}

/// One planning step from the scenario start in `world`, plotted with every
/// accepted sample, every rejected draw, and the chosen primitive.
pub fn plan_once(cfg: &PipelineConfig, model: &FlowModel, cache: &MaskCache, world: &World, seed: u64) -> Result<PlanOnce> {
    let planner = Planner::new(model, cache, cfg.planner.clone(), cfg.vehicle)?;
    let state = cfg.scenario.start_state();
    let (result, trace) = planner.plan_traced(&state, world, &mut trial_rng(seed, Stream::Planner));
    let pose = state.pose();
    let mut svg = Svg::new();
    svg.obstacles(world);
    svg.roi(cache.atomic_grid(), &pose);
    for z in &trace.rejected {
        let path = reconstruct(&model.primitive(z), cfg.planner.n_recon)?.transformed(&pose);
        svg.path("rejected", &path);
    }
    for s in &trace.accepted {
        svg.polyline("sample", &s.path);
    }
    svg.path("chosen", &result.path);
    svg.start(state.x, state.y);
    let svg = svg.finish();
    write_file(&out_path(cfg, PLAN_ONCE_SVG), &svg)?;
    Ok(PlanOnce { result, trace, svg })
}

fn with_controller<T>(
    cfg: &PipelineConfig,
    artifacts: Option<&(FlowModel, MaskCache)>,
    kind: ControllerKind,
    f: impl FnOnce(&Controller<'_>) -> T,
) -> Result<T> {
    match kind {
        ControllerKind::GenPlan => {
            let (model, cache) = artifacts.ok_or_else(|| Error::Config("genplan needs a model and a cache".into()))?;
            let planner = Planner::new(model, cache, cfg.planner.clone(), cfg.vehicle)?;
            Ok(f(&Controller::GenPlan {
                planner: &planner,
                gains: cfg.pid,
            }))
        }
        ControllerKind::Mppi => Ok(f(&Controller::Mppi(&cfg.mppi))),
    }
}

pub fn run_file_stem(controller: ControllerKind, scenario: ScenarioKind, seed: u64) -> String {
    format!("run_{}_{scenario}_{seed}", controller.name())
}

/// One closed-loop trial. Writes an SVG of the executed trajectory and
/// plans, the trajectory CSV, and (GenPlan) per-plan telemetry.
pub fn run(
    cfg: &PipelineConfig,
    artifacts: Option<&(FlowModel, MaskCache)>,
    controller: ControllerKind,
    scenario: ScenarioKind,
    seed: u64,
) -> Result<Episode> {
    let world = cfg.scenario.world(scenario, seed);
    let sc = &cfg.scenario;
    let ep = with_controller(cfg, artifacts, controller, |c| {
        run_episode(c, &world, sc, sc.exit_x(scenario), &cfg.vehicle, seed)
    })?;
    let meta = cfg.meta();
    let stem = run_file_stem(controller, scenario, seed);

    let mut svg = Svg::new();
    svg.obstacles(&world);
    for p in &ep.plans {
        svg.path("plan", p);
    }
    svg.path("trajectory", &ep.trajectory);
    let start = ep.trajectory.first();
    svg.start(start.x, start.y);
    write_file(&out_path(cfg, &format!("{stem}.svg")), &svg.finish())?;
    write_file(&out_path(cfg, &format!("{stem}_trajectory.csv")), &trajectory_csv(&ep.trajectory, &meta))?;
    if controller == ControllerKind::GenPlan {
        let every = artifacts
            .map(|(m, c)| Planner::new(m, c, cfg.planner.clone(), cfg.vehicle))
            .transpose()?
            .map_or(1, |p| p.replan_ticks(sc.sim_hz));
        let ticks: Vec<usize> = (0..ep.telemetry.len()).map(|i| i * every).collect();
        let costs: Vec<f64> = ep.plans.iter().map(cost).collect();
        write_file(
            &out_path(cfg, &format!("{stem}_telemetry.csv")),
            &telemetry_csv(seed, &ticks, &ep.telemetry, &costs, &meta),
        )?;
    }
    Ok(ep)
}

pub fn trials_file(controller: ControllerKind, scenario: ScenarioKind) -> String {
    format!("trials_{}_{scenario}.csv", controller.name())
}

pub fn summary_file(scenario: ScenarioKind) -> String {
    format!("summary_{scenario}.csv")
}

pub fn sweep_file(scenario: ScenarioKind) -> String {
    format!("sweep_{scenario}.csv")
}

pub struct BenchResult {
    pub controller: ControllerKind,
    pub trials: Vec<EpisodeMetrics>,
    pub summary: Summary,
}

/// Seeded trials of each controller; writes one per-trial CSV per
/// controller and one summary CSV.
pub fn bench(
    cfg: &PipelineConfig,
    artifacts: Option<&(FlowModel, MaskCache)>,
    controllers: &[ControllerKind],
    scenario: ScenarioKind,
) -> Result<Vec<BenchResult>> {
    let meta = cfg.meta();
    let mut out = Vec::new();
    for &c in controllers {
        let trials = with_controller(cfg, artifacts, c, |ctl| benchmark(ctl, scenario, &cfg.scenario, &cfg.vehicle))?;
        write_file(&out_path(cfg, &trials_file(c, scenario)), &trials_csv(&trials, &meta))?;
        out.push(BenchResult {
            controller: c,
            summary: summarize(&trials),
            trials,
        });
    }
    let kind = scenario.to_string();
    let rows: Vec<(&str, &str, Summary)> = out
        .iter()
        .map(|r| (r.controller.name(), kind.as_str(), r.summary.clone()))
        .collect();
    write_file(&out_path(cfg, &summary_file(scenario)), &summary_csv(&rows, &meta))?;
    Ok(out)
}

/// MPPI over the eleven noise settings; writes the sweep CSV.
pub fn sweep(cfg: &PipelineConfig, scenario: ScenarioKind, progress: impl FnMut(usize, f64, f64)) -> Result<Vec<SweepRow>> {
    let rows = mppi_sigma_sweep(&cfg.mppi, scenario, &cfg.scenario, &cfg.vehicle, progress);
    write_file(&out_path(cfg, &sweep_file(scenario)), &sweep_csv(&rows, &cfg.meta()))?;
    Ok(rows)
}
