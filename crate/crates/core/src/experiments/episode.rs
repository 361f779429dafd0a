use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::worlds::{gen_culdesac, gen_random_world, CuldesacConfig, RandomWorldConfig};
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::mppi::{mppi_step, MppiConfig, MppiState};
use crate::planner::{PlanStats, Planner};
use crate::primitives::{reconstruct, PathSample, PosePath};
use crate::vehicle::{euler_step, pid_track, segment_collides, step, ControlInput, PidGains, VehicleLimits, VehicleState, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Random,
    Culdesac,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "culdesac" => Ok(Self::Culdesac),
            other => Err(Error::Config(format!("unknown scenario {other:?} (expected random or culdesac)"))),
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::Culdesac => "culdesac",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub duration_s: f64,
    pub sim_hz: f64,
    pub start: [f64; 2],
    pub start_heading: f64,
    pub start_speed: f64,
    pub trials: usize,
    pub base_seed: u64,
    /// Resolution of the executed-trajectory collision check, meters.
    pub collision_ds: f64,
    pub random: RandomWorldConfig,
    pub culdesac: CuldesacConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            duration_s: 2.5,
            sim_hz: 100.0,
            start: [-0.5, 0.0],
            start_heading: 0.0,
            start_speed: 2.5,
            trials: 100,
            base_seed: 0,
            collision_ds: 0.005,
            random: RandomWorldConfig::default(),
            culdesac: CuldesacConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.duration_s > 0.0
            && self.sim_hz > 0.0
            && self.start_speed >= 0.0
            && self.collision_ds > 0.0
            && self.trials > 0
            && [self.duration_s, self.sim_hz, self.start_speed, self.collision_ds, self.start_heading]
                .iter()
                .chain(&self.start)
                .all(|v| v.is_finite());
        if !ok {
            return Err(Error::Config("scenario: durations, rates and counts must be positive".into()));
        }
        self.random.validate()?;
        self.culdesac.validate()
    }

    pub fn start_state(&self) -> VehicleState {
        VehicleState::new(self.start[0], self.start[1], self.start_speed, self.start_heading, 0.0)
    }

    pub fn ticks(&self) -> usize {
        (self.duration_s * self.sim_hz).round() as usize
    }

    /// World of trial `seed`; the cul-de-sac ignores the seed.
    pub fn world(&self, kind: ScenarioKind, seed: u64) -> World {
        match kind {
            ScenarioKind::Random => {
                gen_random_world(&self.random, (self.start[0], self.start[1]), &mut trial_rng(seed, Stream::World))
            }
            ScenarioKind::Culdesac => gen_culdesac(&self.culdesac),
        }
    }

    /// x beyond which a cul-de-sac trial counts as an exit.
    pub fn exit_x(&self, kind: ScenarioKind) -> Option<f64> {
        match kind {
            ScenarioKind::Random => None,
            ScenarioKind::Culdesac => Some(self.culdesac.rear_x),
        }
    }
}

/// Independent random streams of one trial.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    World = 0,
    Planner = 1,
    Mppi = 2,
    Analysis = 3,
}

pub fn trial_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub enum Controller<'a> {
    GenPlan { planner: &'a Planner<'a>, gains: PidGains },
    Mppi(&'a MppiConfig),
}

impl Controller<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::GenPlan { .. } => "genplan",
            Controller::Mppi(_) => "mppi",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub collided: bool,
    pub exited: bool,
    pub terminal_x: f64,
    /// Path length over elapsed time, m/s.
    pub avg_vel: f64,
    pub elapsed: f64,
    pub plans: usize,
    pub fallbacks: usize,
    /// Mean rank of chosen primitives over non-fallback plans (GenPlan only).
    pub mean_rank: f64,
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub metrics: EpisodeMetrics,
    /// Executed positions at every sim tick, up to the end or first collision.
    pub trajectory: PosePath,
    /// World-frame plan chosen at each planning step (MPPI: nominal rollout).
    pub plans: Vec<PosePath>,
    /// Per-plan telemetry (GenPlan only).
    pub telemetry: Vec<PlanStats>,
}

fn sample(t: f64, s: &VehicleState) -> PathSample {
    PathSample::new(t, s.x, s.y, s.phi)
}

/// Euler rollout of the nominal sequence, for display.
fn nominal_path(state: &VehicleState, ms: &MppiState, cfg: &MppiConfig, limits: &VehicleLimits) -> PosePath {
    let mut s = *state;
    let mut out = vec![sample(0.0, &s)];
    for (i, u) in ms.nominal.iter().enumerate() {
        s = euler_step(&s, u, cfg.dt(), limits);
        out.push(sample((i + 1) as f64 * cfg.dt(), &s));
    }
    PosePath::from_samples_unchecked(out)
}

/// Runs one closed-loop trial: RK4 ground truth at `sim_hz`, ended early by
/// the first collision of the swept trajectory.
pub fn run_episode(
    controller: &Controller<'_>,
    world: &World,
    scenario: &ScenarioConfig,
    exit_x: Option<f64>,
    limits: &VehicleLimits,
    seed: u64,
) -> Episode {
    let dt = 1.0 / scenario.sim_hz;
    let mut state = scenario.start_state();
    let mut samples = vec![sample(0.0, &state)];
    let mut plans = Vec::new();
    let mut telemetry = Vec::new();
    let mut collided = world.collides(state.x, state.y);
    let mut ticks_run = 0;

    let mut planner_rng = trial_rng(seed, Stream::Planner);
    let mut mppi_rng = trial_rng(seed, Stream::Mppi);
    let mut plan_body: Option<(PosePath, Pose, usize)> = None;
    let mut mppi_state = match controller {
        Controller::Mppi(cfg) => Some(MppiState::new(cfg)),
        _ => None,
    };
    let mut held = ControlInput::ZERO;

    if !collided {
        for tick in 0..scenario.ticks() {
            let u = match controller {
                Controller::GenPlan { planner, gains } => {
                    if tick % planner.replan_ticks(scenario.sim_hz) == 0 {
                        let r = planner.plan(&state, world, &mut planner_rng);
                        let body = reconstruct(&r.theta, planner.config().n_recon).expect("valid plan");
                        plans.push(r.path);
                        telemetry.push(r.stats);
                        plan_body = Some((body, state.pose(), tick));
                    }
                    let (body, origin, t0) = plan_body.as_ref().expect("planned on the first tick");
                    pid_track(&state, body, origin, (tick - t0) as f64 * dt, gains, limits)
                }
                Controller::Mppi(cfg) => {
                    let hold = ((scenario.sim_hz / cfg.rate_hz).round() as usize).max(1);
                    if tick % hold == 0 {
                        let ms = mppi_state.as_ref().expect("initialized");
                        let (u, next) = mppi_step(&state, world, ms, cfg, limits, &mut mppi_rng);
                        if tick % (hold * 10) == 0 {
                            plans.push(nominal_path(&state, ms, cfg, limits));
                        }
                        mppi_state = Some(next);
                        held = u;
                    }
                    held
                }
            };
            let next = step(&state, &u, dt, limits);
            let (a, b) = (sample(tick as f64 * dt, &state), sample((tick + 1) as f64 * dt, &next));
            state = next;
            samples.push(b);
            ticks_run = tick + 1;
            if segment_collides(&a, &b, world, scenario.collision_ds) {
                collided = true;
                break;
            }
        }
    }

    let trajectory = PosePath::from_samples_unchecked(samples);
    let elapsed = ticks_run as f64 * dt;
    let ranks: Vec<usize> = telemetry.iter().filter(|s| !s.fallback).map(|s| s.rank).collect();
    let metrics = EpisodeMetrics {
        seed,
        collided,
        exited: !collided && exit_x.is_some_and(|x| state.x > x),
        terminal_x: state.x,
        avg_vel: if elapsed > 0.0 { trajectory.polyline_length() / elapsed } else { 0.0 },
        elapsed,
        plans: plans.len().max(telemetry.len()),
        fallbacks: telemetry.iter().filter(|s| s.fallback).count(),
        mean_rank: if ranks.is_empty() {
            0.0
        } else {
            ranks.iter().sum::<usize>() as f64 / ranks.len() as f64
        },
    };
    Episode {
        metrics,
        trajectory,
        plans,
        telemetry,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{ArtifactMeta, DIM};
    use crate::mask::{build_cache, AtomicGrid, BuildConfig, InputGrid, MaskCache, PrimitiveSource};
    use crate::planner::PlanConfig;
    use crate::primitives::PrimitiveParams;
    use crate::vehicle::{path_collides, Obstacle};

    struct Fan;

    impl PrimitiveSource for Fan {
        fn primitive(&self, z: &[f64; DIM]) -> PrimitiveParams {
            PrimitiveParams::from_raw([5.0 + 0.6 * z[0], 0.2 * z[1], 0.2 * z[2], 0.15 * z[3]])
        }
        fn checksum(&self) -> [u8; 32] {
            [4; 32]
        }
    }

    fn cache() -> MaskCache {
        build_cache(
            &Fan,
            &InputGrid::new(4).unwrap(),
            &AtomicGrid::default(),
            &BuildConfig::default(),
            ArtifactMeta::default(),
        )
        .unwrap()
    }

    #[test]
    fn empty_world_genplan_drives_forward() {
        let c = cache();
        let planner = Planner::new(&Fan, &c, PlanConfig::default(), VehicleLimits::default()).unwrap();
        let ctl = Controller::GenPlan {
            planner: &planner,
            gains: PidGains::default(),
        };
        let sc = ScenarioConfig::default();
        let ep = run_episode(&ctl, &World::empty(), &sc, None, &VehicleLimits::default(), 1);
        assert!(!ep.metrics.collided);
        assert!(ep.metrics.terminal_x > 4.0, "{:?}", ep.metrics);
        assert_eq!(ep.metrics.plans, 13);
        assert_eq!(ep.trajectory.len(), 251);
        assert!(ep.metrics.avg_vel > 0.0);
    }

    #[test]
    fn same_seed_same_episode_and_replay_agrees() {
        let c = cache();
        let planner = Planner::new(&Fan, &c, PlanConfig::default(), VehicleLimits::default()).unwrap();
        let ctl = Controller::GenPlan {
            planner: &planner,
            gains: PidGains::default(),
        };
        let sc = ScenarioConfig::default();
        for seed in 0..6 {
            let world = sc.world(ScenarioKind::Random, seed);
            let a = run_episode(&ctl, &world, &sc, None, &VehicleLimits::default(), seed);
            let b = run_episode(&ctl, &world, &sc, None, &VehicleLimits::default(), seed);
            assert_eq!(a.metrics, b.metrics);
            assert_eq!(path_collides(&a.trajectory, &world, sc.collision_ds), a.metrics.collided);
        }
    }

    #[test]
    fn enclosed_start_never_panics() {
        let c = cache();
        let planner = Planner::new(&Fan, &c, PlanConfig::default(), VehicleLimits::default()).unwrap();
        let ring: Vec<Obstacle> = (0..40)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 40.0;
                Obstacle::new(-0.5 + 0.7 * a.cos(), 0.7 * a.sin(), 0.15)
            })
            .collect();
        let world = World::new(ring).unwrap();
        let sc = ScenarioConfig::default();
        let ctl = Controller::GenPlan {
            planner: &planner,
            gains: PidGains::default(),
        };
        let ep = run_episode(&ctl, &world, &sc, None, &VehicleLimits::default(), 2);
        assert!(ep.metrics.collided || ep.metrics.fallbacks > 0);
        let mppi = MppiConfig {
            n_rollouts: 32,
            ..MppiConfig::default()
        };
        let ep = run_episode(&Controller::Mppi(&mppi), &world, &sc, None, &VehicleLimits::default(), 2);
        assert!(ep.metrics.collided);
    }

    #[test]
    fn mppi_episode_is_deterministic() {
        let mppi = MppiConfig {
            n_rollouts: 32,
            ..MppiConfig::default()
        };
        let sc = ScenarioConfig {
            duration_s: 0.5,
            ..ScenarioConfig::default()
        };
        let world = sc.world(ScenarioKind::Random, 3);
        let a = run_episode(&Controller::Mppi(&mppi), &world, &sc, None, &VehicleLimits::default(), 3);
        let b = run_episode(&Controller::Mppi(&mppi), &world, &sc, None, &VehicleLimits::default(), 3);
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.trajectory, b.trajectory);
    }

    #[test]
    fn streams_are_independent() {
        use rand::Rng;
        let a: u64 = trial_rng(7, Stream::World).random();
        let b: u64 = trial_rng(7, Stream::Planner).random();
        let c: u64 = trial_rng(8, Stream::World).random();
        assert!(a != b && a != c);
    }
}
