use std::sync::OnceLock;

use genplan::experiments::{trial_rng, RandomWorldConfig, ScenarioConfig, ScenarioKind, Stream};
use genplan::flow::{ArtifactMeta, DIM};
use genplan::mask::{build_cache, AtomicGrid, BuildConfig, InputGrid, MaskCache, PrimitiveSource};
use genplan::planner::{PlanConfig, Planner};
use genplan::primitives::{reconstruct, PrimitiveParams};
use genplan::vehicle::{path_collides, VehicleLimits, VehicleState};
use proptest::prelude::*;

/// Smooth stand-in for a trained flow: a fan of gentle arcs.
struct Fan;

impl PrimitiveSource for Fan {
    fn primitive(&self, z: &[f64; DIM]) -> PrimitiveParams {
        PrimitiveParams::from_raw([4.0 + 0.8 * z[0], 0.15 * z[1], 0.15 * z[2], 0.1 * z[3]])
    }
    fn checksum(&self) -> [u8; 32] {
        [9; 32]
    }
}

fn cache() -> &'static MaskCache {
    static CACHE: OnceLock<MaskCache> = OnceLock::new();
    CACHE.get_or_init(|| {
        build_cache(
            &Fan,
            &InputGrid::new(6).unwrap(),
            &AtomicGrid::default(),
            &BuildConfig::default(),
            ArtifactMeta::default(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chosen_plan_is_free_or_flagged(seed in 0u64..10_000, x in -1.0f64..1.0, y in -1.0f64..1.0, v in 0.5f64..3.0, n_obs in 10usize..60) {
        let cfg = PlanConfig { n_samples: 64, ..PlanConfig::default() };
        let planner = Planner::new(&Fan, cache(), cfg.clone(), VehicleLimits::default()).unwrap();
        let sc = ScenarioConfig {
            random: RandomWorldConfig { n_obstacles: n_obs, ..RandomWorldConfig::default() },
            ..ScenarioConfig::default()
        };
        let world = sc.world(ScenarioKind::Random, seed);
        prop_assume!(!world.collides(x, y));
        let state = VehicleState::new(x, y, v, 0.0, 0.0);
        let (r, trace) = planner.plan_traced(&state, &world, &mut trial_rng(seed, Stream::Planner));
        let s = r.stats;
        prop_assert_eq!(s.draws, s.rejects + s.flow_evals);
        prop_assert_eq!(trace.accepted.len(), s.flow_evals);
        prop_assert_eq!(trace.rejected.len(), s.rejects);
        if s.fallback {
            prop_assert_eq!(s.rank, 0);
            prop_assert_eq!(s.explicit_checks, s.flow_evals - s.infeasible);
        } else {
            prop_assert_eq!(s.explicit_checks, s.rank);
            prop_assert!(!path_collides(&r.path, &world, cfg.ds));
            // nothing cheaper than the chosen plan was both feasible and free
            for t in trace.accepted.iter().filter(|t| t.cost < r.cost) {
                prop_assert_ne!(t.collided, Some(false));
            }
        }
        let mask = cache().rejected_cells(&trace.atoms);
        let grid = cache().input_grid();
        for z in &trace.rejected {
            prop_assert!(mask.contains(grid.cell_of(z)));
        }
        for t in &trace.accepted {
            prop_assert!(!mask.contains(grid.cell_of(&t.z)));
            let body = reconstruct(&t.theta, cfg.n_recon).unwrap();
            prop_assert_eq!(body.transformed(&state.pose()), t.path.clone());
        }
    }

    #[test]
    fn same_seed_same_plan(seed in 0u64..10_000) {
        let planner = Planner::new(&Fan, cache(), PlanConfig { n_samples: 32, ..PlanConfig::default() }, VehicleLimits::default()).unwrap();
        let sc = ScenarioConfig::default();
        let world = sc.world(ScenarioKind::Random, seed);
        let state = sc.start_state();
        let a = planner.plan(&state, &world, &mut trial_rng(seed, Stream::Planner));
        let b = planner.plan(&state, &world, &mut trial_rng(seed, Stream::Planner));
        prop_assert_eq!(a.theta, b.theta);
        prop_assert_eq!(a.stats, b.stats);
    }
}
