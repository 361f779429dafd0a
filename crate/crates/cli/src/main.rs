//! `genplan`: synthesize data, train the flow, build the mask cache, and run
//! plans, episodes, benchmarks and noise sweeps.
//!
//! Exit codes: 0 on success, 2 for configuration and input-file problems,
//! 3 for failures at run time.

use std::io::ErrorKind;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use genplan::experiments::ScenarioKind;
use genplan::harness::{self, ControllerKind, PipelineConfig};
use genplan::mask::MaskCache;
use genplan::vehicle::World;
use genplan::Error;

#[derive(Parser)]
#[command(name = "genplan", version, about = "Flow-based motion primitive planning toolkit")]
struct Cli {
    /// TOML configuration; every key is optional.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `paths.output_dir`.
    #[arg(short, long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Random,
    Culdesac,
}

impl From<Scenario> for ScenarioKind {
    fn from(s: Scenario) -> Self {
        match s {
            Scenario::Random => ScenarioKind::Random,
            Scenario::Culdesac => ScenarioKind::Culdesac,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WorldArg {
    Empty,
    Random,
    Culdesac,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Ctl {
    Genplan,
    Mppi,
}

impl From<Ctl> for ControllerKind {
    fn from(c: Ctl) -> Self {
        match c {
            Ctl::Genplan => ControllerKind::GenPlan,
            Ctl::Mppi => ControllerKind::Mppi,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the expert dataset.
    GenData {
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the flow on the dataset.
    Train,
    /// Build the mask cache for the trained model.
    BuildCache,
    /// Plan once from the start pose and plot every sample.
    PlanOnce {
        #[arg(long, value_enum, default_value = "random")]
        world: WorldArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one closed-loop episode.
    Run {
        #[arg(long, value_enum, default_value = "genplan")]
        controller: Ctl,
        #[arg(long, value_enum, default_value = "random")]
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Seeded trials of one or both controllers.
    Bench {
        #[arg(long, value_enum, default_value = "random")]
        scenario: Scenario,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["genplan", "mppi"])]
        controllers: Vec<Ctl>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// MPPI over the eleven exploration-noise settings.
    Sweep {
        #[arg(long, value_enum, default_value = "culdesac")]
        scenario: Scenario,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Print the cache header and bit statistics.
    InspectCache {
        /// Defaults to `paths.cache`.
        path: Option<PathBuf>,
    },
}

/// 2 for problems with the inputs the user supplied, 3 otherwise.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Format { .. } | Error::Version { .. } | Error::ChecksumMismatch { .. } => 2,
        Error::File { source, .. } if source.kind() == ErrorKind::NotFound => 2,
        _ => 3,
    }
}

fn load_config(cli: &Cli) -> genplan::Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(dir) = &cli.output_dir {
        cfg.paths.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> genplan::Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::GenData { seed } => {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.echo()?;
            let data = harness::gen_data(&cfg)?;
            println!("wrote {} primitives to {}", data.len(), cfg.paths.dataset.display());
        }
        Command::Train => {
            cfg.echo()?;
            let (_, r) = harness::train_model(&cfg)?;
            println!(
                "trained on {} samples ({} held out): validation NLL {:.4} -> {:.4} (best epoch {})",
                r.n_train, r.n_val, r.initial_val_nll, r.best_val_nll, r.best_epoch
            );
            println!("wrote {}", cfg.paths.model.display());
        }
        Command::BuildCache => {
            cfg.echo()?;
            let s = harness::build_cache_file(&cfg)?;
            println!("{s}");
            println!("wrote {}", cfg.paths.cache.display());
        }
        Command::PlanOnce { world, seed } => {
            cfg.echo()?;
            let artifacts = harness::load_artifacts(&cfg)?;
            let w = match world {
                WorldArg::Empty => World::empty(),
                WorldArg::Random => cfg.scenario.world(ScenarioKind::Random, seed),
                WorldArg::Culdesac => cfg.scenario.world(ScenarioKind::Culdesac, seed),
            };
            let p = harness::plan_once(&cfg, &artifacts.0, &artifacts.1, &w, seed)?;
            let s = &p.result.stats;
            println!(
                "draws {} rejected {} accepted {} infeasible {} checks {} rank {} fallback {} cost {:.4}",
                s.draws, s.rejects, p.trace.accepted.len(), s.infeasible, s.explicit_checks, s.rank, s.fallback, p.result.cost
            );
            println!("wrote {}", cfg.paths.output_dir.join(harness::PLAN_ONCE_SVG).display());
        }
        Command::Run {
            controller,
            scenario,
            seed,
        } => {
            cfg.echo()?;
            let artifacts = if controller == Ctl::Genplan {
                Some(harness::load_artifacts(&cfg)?)
            } else {
                None
            };
            let ep = harness::run(&cfg, artifacts.as_ref(), controller.into(), scenario.into(), seed)?;
            let m = &ep.metrics;
            println!(
                "collided {} exited {} terminal_x {:.3} avg_vel {:.3} elapsed {:.2} plans {} fallbacks {}",
                m.collided, m.exited, m.terminal_x, m.avg_vel, m.elapsed, m.plans, m.fallbacks
            );
            let stem = harness::run_file_stem(controller.into(), scenario.into(), seed);
            println!("wrote {}", cfg.paths.output_dir.join(format!("{stem}.svg")).display());
        }
        Command::Bench {
            scenario,
            controllers,
            trials,
        } => {
            if let Some(n) = trials {
                cfg.scenario.trials = n;
            }
            cfg.validate()?;
            cfg.echo()?;
            let artifacts = if controllers.contains(&Ctl::Genplan) {
                Some(harness::load_artifacts(&cfg)?)
            } else {
                None
            };
            let kinds: Vec<ControllerKind> = controllers.iter().map(|&c| c.into()).collect();
            let kind: ScenarioKind = scenario.into();
            for r in harness::bench(&cfg, artifacts.as_ref(), &kinds, kind)? {
                let s = &r.summary;
                println!(
                    "{:8} {kind}: trials {} collision {:.1}% exit {:.1}% terminal_x {:.2} ± {:.2} avg_vel {:.2} ± {:.2} mean_rank {:.2}",
                    r.controller.name(),
                    s.trials,
                    s.collision_pct,
                    s.exit_pct,
                    s.terminal_x_mean,
                    s.terminal_x_std,
                    s.avg_vel_mean,
                    s.avg_vel_std,
                    s.mean_rank
                );
            }
            println!("wrote {}", cfg.paths.output_dir.join(harness::summary_file(kind)).display());
        }
        Command::Sweep { scenario, trials } => {
            if let Some(n) = trials {
                cfg.scenario.trials = n;
            }
            cfg.validate()?;
            cfg.echo()?;
            let kind: ScenarioKind = scenario.into();
            let rows = harness::sweep(&cfg, kind, |i, a, p| eprintln!("[{}/11] sigma = ({a}, {p:.4})", i + 1))?;
            for r in &rows {
                let s = &r.summary;
                println!(
                    "sigma ({:.1}, {:.3}): collision {:.1}% exit {:.1}% avg_vel {:.2}",
                    r.sigma_a, r.sigma_psidot, s.collision_pct, s.exit_pct, s.avg_vel_mean
                );
            }
            println!("wrote {}", cfg.paths.output_dir.join(harness::sweep_file(kind)).display());
        }
        Command::InspectCache { path } => {
            let p = path.unwrap_or_else(|| cfg.paths.cache.clone());
            println!("{}", MaskCache::load(&p)?.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
