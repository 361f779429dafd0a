//! One planning tick: masked prior sampling, push-forward through the flow,
//! cost ranking and lazy collision checking.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{draw_prior, DIM};
use crate::mask::{decompose, InputGrid, MaskCache, PrimitiveSource};
use crate::primitives::{reconstruct, PosePath, PrimitiveParams, ALPHA_MIN, PRIMITIVE_DURATION};
use crate::vehicle::{path_collides, Obstacle, VehicleLimits, VehicleState, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    /// Accepted samples per tick.
    pub n_samples: usize,
    /// Draw budget is `max_draw_factor · n_samples`.
    pub max_draw_factor: usize,
    /// Explicit collision-check resolution, meters.
    pub ds: f64,
    /// Samples per reconstructed primitive.
    pub n_recon: usize,
    /// Replanning rate, Hz.
    pub replan_hz: f64,
    /// Obstacles are inflated by this much for the explicit check, meters.
    pub check_margin: f64,
    /// Reject prior draws in masked cells. Off gives plain flow sampling.
    pub masking: bool,
    /// Primitives curving harder than this fraction of the steering-limited
    /// curvature are dropped before ranking. Values above 1 disable the filter.
    pub curvature_fraction: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            n_samples: 512,
            max_draw_factor: 16,
            ds: 0.01,
            n_recon: 41,
            replan_hz: 5.0,
            check_margin: 0.0,
            masking: true,
            curvature_fraction: 1.0,
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.max_draw_factor == 0 || self.n_recon < 2 {
            return Err(Error::Config(
                "planner: n_samples and max_draw_factor must be positive, n_recon >= 2".into(),
            ));
        }
        if !(self.ds > 0.0 && self.replan_hz > 0.0 && self.ds.is_finite() && self.replan_hz.is_finite()) {
            return Err(Error::Config("planner: ds and replan_hz must be positive".into()));
        }
        if !(self.curvature_fraction > 0.0) {
            return Err(Error::Config("planner: curvature_fraction must be positive".into()));
        }
        if !(self.check_margin >= 0.0 && self.check_margin.is_finite()) {
            return Err(Error::Config("planner: check_margin must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PlanStats {
    /// Prior draws made, accepted or not.
    pub draws: usize,
    /// Draws discarded because their cell was masked.
    pub rejects: usize,
    pub flow_evals: usize,
    /// Candidates dropped by the curvature filter.
    pub infeasible: usize,
    pub explicit_checks: usize,
    /// 1-based position of the chosen sample in cost order; 0 on fallback.
    pub rank: usize,
    pub fallback: bool,
    pub atomic_maps: usize,
    pub rejected_cells: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    pub theta: PrimitiveParams,
    /// Chosen primitive in the world frame.
    pub path: PosePath,
    pub cost: f64,
    pub stats: PlanStats,
}

/// A sample kept for plotting and analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct TracedSample {
    pub z: [f64; DIM],
    pub theta: PrimitiveParams,
    pub path: PosePath,
    pub cost: f64,
    /// Result of the explicit check, if one was made.
    pub collided: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanTrace {
    pub accepted: Vec<TracedSample>,
    /// Draws discarded by the mask.
    pub rejected: Vec<[f64; DIM]>,
    pub atoms: Vec<usize>,
}

/// Terminal world-frame x, negated.
pub fn cost(path: &PosePath) -> f64 {
    -path.last().x
}

/// Hardest-braking straight primitive from the current speed.
pub fn fallback_params(v: f64, limits: &VehicleLimits) -> PrimitiveParams {
    let t = PRIMITIVE_DURATION;
    let alpha = (v * t - 0.5 * limits.a_max * t * t).max(0.25 * v * t).max(ALPHA_MIN);
    PrimitiveParams::straight(alpha)
}

pub fn fallback(state: &VehicleState, limits: &VehicleLimits, n_recon: usize) -> PosePath {
    reconstruct(&fallback_params(state.v, limits), n_recon)
        .expect("fallback parameters are valid")
        .transformed(&state.pose())
}

pub struct Planner<'a> {
    source: &'a dyn PrimitiveSource,
    cache: &'a MaskCache,
    igrid: InputGrid,
    cfg: PlanConfig,
    limits: VehicleLimits,
}

impl<'a> Planner<'a> {
    pub fn new(source: &'a dyn PrimitiveSource, cache: &'a MaskCache, cfg: PlanConfig, limits: VehicleLimits) -> Result<Self> {
        cfg.validate()?;
        cache.check_model(source)?;
        Ok(Self {
            source,
            cache,
            igrid: cache.input_grid(),
            cfg,
            limits,
        })
    }

    pub fn config(&self) -> &PlanConfig {
        &self.cfg
    }

    /// Interval between plans in ticks of a `sim_hz` loop.
    pub fn replan_ticks(&self, sim_hz: f64) -> usize {
        ((sim_hz / self.cfg.replan_hz) - 1e-9).ceil().max(1.0) as usize
    }

    pub fn plan(&self, state: &VehicleState, world: &World, rng: &mut impl Rng) -> PlanResult {
        self.run(state, world, rng, None)
    }

    pub fn plan_traced(&self, state: &VehicleState, world: &World, rng: &mut impl Rng) -> (PlanResult, PlanTrace) {
        let mut trace = PlanTrace::default();
        let r = self.run(state, world, rng, Some(&mut trace));
        (r, trace)
    }

    fn run(&self, state: &VehicleState, world: &World, rng: &mut impl Rng, mut trace: Option<&mut PlanTrace>) -> PlanResult {
        let pose = state.pose();
        let mut stats = PlanStats::default();
        let reject = if self.cfg.masking {
            let atoms = decompose(world, &pose, self.cache.atomic_grid());
            stats.atomic_maps = atoms.len();
            let mask = self.cache.rejected_cells(&atoms);
            stats.rejected_cells = mask.count();
            if let Some(t) = trace.as_deref_mut() {
                t.atoms = atoms;
            }
            Some(mask)
        } else {
            None
        };

        let budget = self.cfg.max_draw_factor * self.cfg.n_samples;
        let mut zs = Vec::with_capacity(self.cfg.n_samples);
        while zs.len() < self.cfg.n_samples && stats.draws < budget {
            let z = draw_prior(rng);
            stats.draws += 1;
            if let Some(mask) = &reject {
                if mask.contains(self.igrid.cell_of(&z)) {
                    stats.rejects += 1;
                    if let Some(t) = trace.as_deref_mut() {
                        t.rejected.push(z);
                    }
                    continue;
                }
            }
            zs.push(z);
        }

        let mut candidates: Vec<(PrimitiveParams, PosePath, f64)> = zs
            .iter()
            .map(|z| {
                let theta = self.source.primitive(z);
                let path = reconstruct(&theta, self.cfg.n_recon)
                    .expect("projected parameters are valid")
                    .transformed(&pose);
                let c = cost(&path);
                (theta, path, c)
            })
            .collect();
        stats.flow_evals = candidates.len();
        let k_max = self.cfg.curvature_fraction * self.limits.max_curvature();
        // shorter primitives end before the vehicle can stop
        let stop = state.v * state.v / (2.0 * self.limits.a_max);
        let mut order: Vec<usize> = (0..candidates.len())
            .filter(|&i| {
                let theta = &candidates[i].0;
                theta.alpha >= stop && theta.kappa.iter().all(|k| k.abs() <= k_max)
            })
            .collect();
        stats.infeasible = candidates.len() - order.len();
        order.sort_by(|&a, &b| candidates[a].2.total_cmp(&candidates[b].2));

        let inflated;
        let check_world = if self.cfg.check_margin > 0.0 {
            inflated = World::new(
                world
                    .obstacles()
                    .iter()
                    .map(|o| Obstacle::new(o.cx, o.cy, o.r + self.cfg.check_margin))
                    .collect(),
            )
            .expect("inflated world is valid");
            &inflated
        } else {
            world
        };

        let mut collided = vec![None; candidates.len()];
        let mut chosen = None;
        for (rank, &i) in order.iter().enumerate() {
            stats.explicit_checks += 1;
            let hit = path_collides(&candidates[i].1, check_world, self.cfg.ds);
            collided[i] = Some(hit);
            if !hit {
                stats.rank = rank + 1;
                chosen = Some(i);
                break;
            }
        }

        if let Some(t) = trace {
            t.accepted = zs
                .iter()
                .zip(&candidates)
                .zip(&collided)
                .map(|((z, (theta, path, c)), hit)| TracedSample {
                    z: *z,
                    theta: *theta,
                    path: path.clone(),
                    cost: *c,
                    collided: *hit,
                })
                .collect();
        }

        match chosen {
            Some(i) => {
                let (theta, path, c) = candidates.swap_remove(i);
                PlanResult {
                    theta,
                    path,
                    cost: c,
                    stats,
                }
            }
            None => {
                stats.fallback = true;
                let theta = fallback_params(state.v, &self.limits);
                let path = fallback(state, &self.limits, self.cfg.n_recon);
                let c = cost(&path);
                PlanResult {
                    theta,
                    path,
                    cost: c,
                    stats,
                }
            }
        }
    }
}
