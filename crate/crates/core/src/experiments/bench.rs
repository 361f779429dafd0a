use std::f64::consts::PI;

use rayon::prelude::*;

use super::episode::{run_episode, trial_rng, Controller, EpisodeMetrics, ScenarioConfig, ScenarioKind, Stream};
use crate::flow::{draw_prior, DIM};
use crate::mask::{decompose, MaskCache, PrimitiveSource};
use crate::mppi::MppiConfig;
use crate::primitives::reconstruct;
use crate::vehicle::{path_collides, VehicleLimits, World};

/// Aggregates in the layout of the result tables. Terminal x and average
/// velocity use non-colliding trials only; standard deviations are
/// population deviations (0 for a single trial).
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub trials: usize,
    pub collision_pct: f64,
    pub exit_pct: f64,
    pub terminal_x_mean: f64,
    pub terminal_x_std: f64,
    pub avg_vel_mean: f64,
    pub avg_vel_std: f64,
    pub fallbacks_mean: f64,
    pub mean_rank: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(trials: &[EpisodeMetrics]) -> Summary {
    let n = trials.len().max(1) as f64;
    let clean: Vec<&EpisodeMetrics> = trials.iter().filter(|m| !m.collided).collect();
    let (tx, txs) = mean_std(&clean.iter().map(|m| m.terminal_x).collect::<Vec<_>>());
    let (av, avs) = mean_std(&clean.iter().map(|m| m.avg_vel).collect::<Vec<_>>());
    let ranked: Vec<f64> = trials.iter().filter(|m| m.mean_rank > 0.0).map(|m| m.mean_rank).collect();
    Summary {
        trials: trials.len(),
        collision_pct: 100.0 * trials.iter().filter(|m| m.collided).count() as f64 / n,
        exit_pct: 100.0 * trials.iter().filter(|m| m.exited).count() as f64 / n,
        terminal_x_mean: tx,
        terminal_x_std: txs,
        avg_vel_mean: av,
        avg_vel_std: avs,
        fallbacks_mean: trials.iter().map(|m| m.fallbacks as f64).sum::<f64>() / n,
        mean_rank: mean_std(&ranked).0,
    }
}

/// Runs trials `base_seed .. base_seed + n_trials`, in seed order.
pub fn benchmark(
    controller: &Controller<'_>,
    kind: ScenarioKind,
    scenario: &ScenarioConfig,
    limits: &VehicleLimits,
) -> Vec<EpisodeMetrics> {
    let seeds: Vec<u64> = (0..scenario.trials as u64).map(|i| scenario.base_seed + i).collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let world = scenario.world(kind, seed);
            run_episode(controller, &world, scenario, scenario.exit_x(kind), limits, seed).metrics
        })
        .collect()
}

/// The eleven sweep settings: `sigma_a` from 0.1 to 5 with
/// `sigma_psidot = 1.6π·sigma_a`.
pub fn sigma_pairs() -> Vec<(f64, f64)> {
    let mut a = vec![0.1];
    a.extend((1..=10).map(|i| 0.5 * i as f64));
    a.into_iter().map(|s| (s, 1.6 * PI * s)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub sigma_a: f64,
    pub sigma_psidot: f64,
    pub trials: Vec<EpisodeMetrics>,
    pub summary: Summary,
}

pub fn mppi_sigma_sweep(
    base: &MppiConfig,
    kind: ScenarioKind,
    scenario: &ScenarioConfig,
    limits: &VehicleLimits,
    mut progress: impl FnMut(usize, f64, f64),
) -> Vec<SweepRow> {
    sigma_pairs()
        .into_iter()
        .enumerate()
        .map(|(i, (sa, sp))| {
            progress(i, sa, sp);
            let cfg = MppiConfig {
                sigma_a: sa,
                sigma_psidot: sp,
                ..base.clone()
            };
            let trials = benchmark(&Controller::Mppi(&cfg), kind, scenario, limits);
            let summary = summarize(&trials);
            SweepRow {
                sigma_a: sa,
                sigma_psidot: sp,
                trials,
                summary,
            }
        })
        .collect()
}

/// Paired comparison of masked and unmasked sampling from one flow.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MaskingEfficacy {
    pub worlds: usize,
    pub unmasked: usize,
    pub accepted: usize,
    /// Colliding samples against the full world.
    pub unmasked_hits: usize,
    pub accepted_hits: usize,
    /// Colliding samples against the obstacles that intersect the ROI.
    pub unmasked_roi_hits: usize,
    pub accepted_roi_hits: usize,
}

impl MaskingEfficacy {
    pub fn unmasked_rate(&self) -> f64 {
        self.unmasked_hits as f64 / self.unmasked.max(1) as f64
    }
    pub fn accepted_rate(&self) -> f64 {
        self.accepted_hits as f64 / self.accepted.max(1) as f64
    }
    pub fn unmasked_roi_rate(&self) -> f64 {
        self.unmasked_roi_hits as f64 / self.unmasked.max(1) as f64
    }
    pub fn accepted_roi_rate(&self) -> f64 {
        self.accepted_roi_hits as f64 / self.accepted.max(1) as f64
    }
}

/// For each random world (trial seeds as in [`benchmark`]), draws
/// `n_samples` prior points at the start pose, pushes all of them through
/// the flow, and records which collide, split by whether the mask accepts
/// them.
pub fn masking_efficacy(
    source: &dyn PrimitiveSource,
    cache: &MaskCache,
    scenario: &ScenarioConfig,
    n_worlds: usize,
    n_samples: usize,
    n_recon: usize,
    ds: f64,
) -> MaskingEfficacy {
    let igrid = cache.input_grid();
    let agrid = cache.atomic_grid();
    let pose = scenario.start_state().pose();
    let mut out = MaskingEfficacy {
        worlds: n_worlds,
        ..Default::default()
    };
    for i in 0..n_worlds as u64 {
        let seed = scenario.base_seed + i;
        let world = scenario.world(ScenarioKind::Random, seed);
        let roi_world = World::new(
            world
                .obstacles()
                .iter()
                .filter(|o| {
                    let (bx, by) = pose.inverse_transform_point(o.cx, o.cy);
                    agrid.distance_to_roi(bx, by) < o.r
                })
                .copied()
                .collect(),
        )
        .expect("subset of a valid world");
        let mask = cache.rejected_cells(&decompose(&world, &pose, agrid));
        let mut rng = trial_rng(seed, Stream::Analysis);
        let zs: Vec<[f64; DIM]> = (0..n_samples).map(|_| draw_prior(&mut rng)).collect();
        for z in &zs {
            let path = reconstruct(&source.primitive(z), n_recon)
                .expect("projected parameters are valid")
                .transformed(&pose);
            let hit = path_collides(&path, &world, ds);
            let roi_hit = path_collides(&path, &roi_world, ds);
            out.unmasked += 1;
            out.unmasked_hits += hit as usize;
            out.unmasked_roi_hits += roi_hit as usize;
            if !mask.contains(igrid.cell_of(z)) {
                out.accepted += 1;
                out.accepted_hits += hit as usize;
                out.accepted_roi_hits += roi_hit as usize;
            }
        }
    }
    out
}
