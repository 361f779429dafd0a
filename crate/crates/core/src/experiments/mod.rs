//! Scenario worlds, the synthetic expert, closed-loop episodes and the
//! benchmark aggregations.

mod bench;
mod episode;
mod expert;
mod worlds;

pub use bench::{benchmark, masking_efficacy, mppi_sigma_sweep, sigma_pairs, summarize, MaskingEfficacy, Summary, SweepRow};
pub use episode::{run_episode, trial_rng, Controller, Episode, EpisodeMetrics, ScenarioConfig, ScenarioKind, Stream};
pub use expert::{
    alpha_bounds, kmeans_2d, nearest_center, sample_maneuver, synth_expert, synth_expert_labeled, three_mode_dataset,
    ExpertConfig, Maneuver, ALPHA_RANGE, THREE_MODE_CENTERS,
};
pub use worlds::{gen_culdesac, gen_random_world, CuldesacConfig, RandomWorldConfig};
