//! Synthetic stand-in for recorded expert driving.
//!
//! Maneuvers are drawn from a fixed mixture of families, reconstructed,
//! corrupted with position noise and re-fitted, so the resulting parameters
//! carry the same fitting artifacts a recorded log would.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::primitives::{fit_params, reconstruct, PathSample, PosePath, PrimitiveParams};

/// Maneuver families of the synthetic expert.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Maneuver {
    Straight,
    SwerveLeft,
    SwerveRight,
    SCurve,
    HardAvoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertConfig {
    pub n: usize,
    /// Relative frequency of straight, left swerve, right swerve, S-curve and
    /// hard avoid.
    pub weights: [f64; 5],
    /// Position noise added before fitting, meters.
    pub noise: f64,
    /// Samples per reconstructed maneuver before fitting.
    pub n_fit_samples: usize,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            n: 836,
            weights: [0.3, 0.2, 0.2, 0.15, 0.15],
            noise: 0.005,
            n_fit_samples: 41,
        }
    }
}

/// Inclusive `alpha` range of each family.
pub fn alpha_bounds(m: Maneuver) -> (f64, f64) {
    match m {
        Maneuver::Straight => (3.5, 6.0),
        Maneuver::SwerveLeft | Maneuver::SwerveRight => (3.0, 5.5),
        Maneuver::SCurve => (3.0, 5.0),
        Maneuver::HardAvoid => (1.5, 4.0),
    }
}

/// Overall `alpha` range of the generator.
pub const ALPHA_RANGE: (f64, f64) = (1.5, 6.0);

const FAMILIES: [Maneuver; 5] = [
    Maneuver::Straight,
    Maneuver::SwerveLeft,
    Maneuver::SwerveRight,
    Maneuver::SCurve,
    Maneuver::HardAvoid,
];

fn pick_family(weights: &[f64; 5], rng: &mut impl Rng) -> Maneuver {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (m, w) in FAMILIES.iter().zip(weights) {
        if u < *w {
            return *m;
        }
        u -= w;
    }
    FAMILIES[FAMILIES.len() - 1]
}

fn sign(rng: &mut impl Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// One noiseless maneuver. Every curvature stays within 0.45 1/m.
pub fn sample_maneuver<R: Rng>(m: Maneuver, rng: &mut R) -> PrimitiveParams {
    let (lo, hi) = alpha_bounds(m);
    let alpha = rng.random_range(lo..=hi);
    let jitter = Normal::<f64>::new(0.0, 0.02).expect("finite std");
    let j = |rng: &mut R| jitter.sample(rng).clamp(-0.05, 0.05);
    match m {
        Maneuver::Straight => PrimitiveParams::new(alpha, j(rng), j(rng), j(rng)),
        Maneuver::SwerveLeft | Maneuver::SwerveRight => {
            let s = if m == Maneuver::SwerveLeft { 1.0 } else { -1.0 };
            let a = rng.random_range(0.15..=0.4);
            PrimitiveParams::new(alpha, s * a, -s * a, j(rng))
        }
        Maneuver::SCurve => {
            let s = sign(rng);
            let a = rng.random_range(0.1..=0.22);
            PrimitiveParams::new(alpha, s * a, -2.0 * s * a, s * a)
        }
        Maneuver::HardAvoid => {
            let s = sign(rng);
            let a = rng.random_range(0.3..=0.45);
            let b = rng.random_range(0.0..=0.45);
            PrimitiveParams::new(alpha, s * a, s * a, -s * b)
        }
    }
}

fn noisy(path: &PosePath, sigma: f64, rng: &mut impl Rng) -> PosePath {
    let n = Normal::new(0.0, sigma).expect("finite std");
    let samples = path
        .samples()
        .iter()
        .map(|s| PathSample::new(s.t, s.x + n.sample(rng), s.y + n.sample(rng), s.heading))
        .collect();
    PosePath::new(samples).expect("time stamps are unchanged")
}

/// `(family, fitted parameters)` for `cfg.n` synthetic maneuvers.
pub fn synth_expert_labeled(cfg: &ExpertConfig, rng: &mut impl Rng) -> Result<Vec<(Maneuver, PrimitiveParams)>> {
    (0..cfg.n)
        .map(|_| {
            let m = pick_family(&cfg.weights, rng);
            let truth = sample_maneuver(m, rng);
            let path = reconstruct(&truth, cfg.n_fit_samples)?;
            let fitted = fit_params(&noisy(&path, cfg.noise, rng))?;
            Ok((m, fitted.params))
        })
        .collect()
}

pub fn synth_expert(cfg: &ExpertConfig, rng: &mut impl Rng) -> Result<Vec<PrimitiveParams>> {
    Ok(synth_expert_labeled(cfg, rng)?.into_iter().map(|(_, p)| p).collect())
}

/// Centers of the three-mode benchmark mixture: left swerve, straight, right swerve.
pub const THREE_MODE_CENTERS: [[f64; 4]; 3] = [
    [4.5, 0.3, -0.3, 0.0],
    [4.5, 0.0, 0.0, 0.0],
    [4.5, -0.3, 0.3, 0.0],
];

/// Equal-weight mixture of three tight clusters around [`THREE_MODE_CENTERS`],
/// sharing one `alpha` spread so that nearest-center assignment depends only
/// on the curvatures.
pub fn three_mode_dataset(n: usize, rng: &mut impl Rng) -> Vec<[f64; 4]> {
    let a = Normal::new(0.0, 0.4).expect("finite std");
    let k = Normal::new(0.0, 0.03).expect("finite std");
    (0..n)
        .map(|i| {
            let c = THREE_MODE_CENTERS[i % 3];
            [c[0] + a.sample(rng), c[1] + k.sample(rng), c[2] + k.sample(rng), c[3] + k.sample(rng)]
        })
        .collect()
}

pub fn nearest_center(x: &[f64; 4], centers: &[[f64; 4]]) -> usize {
    let d = |c: &[f64; 4]| c.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    (0..centers.len())
        .min_by(|&i, &j| d(&centers[i]).total_cmp(&d(&centers[j])))
        .expect("at least one center")
}

/// Lloyd's algorithm with deterministic farthest-point seeding. Returns
/// cluster sizes and centers.
pub fn kmeans_2d(points: &[[f64; 2]], k: usize, iters: usize) -> (Vec<usize>, Vec<[f64; 2]>) {
    assert!(k >= 1 && points.len() >= k);
    let d2 = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut centers = vec![points[0]];
    while centers.len() < k {
        let far = points
            .iter()
            .max_by(|a, b| {
                let da = centers.iter().map(|c| d2(a, c)).fold(f64::INFINITY, f64::min);
                let db = centers.iter().map(|c| d2(b, c)).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db)
            })
            .expect("non-empty");
        centers.push(*far);
    }
    let mut assign = vec![0usize; points.len()];
    for _ in 0..iters {
        for (a, p) in assign.iter_mut().zip(points) {
            *a = (0..k).min_by(|&i, &j| d2(p, &centers[i]).total_cmp(&d2(p, &centers[j]))).expect("k >= 1");
        }
        let mut sums = vec![[0.0; 3]; k];
        for (a, p) in assign.iter().zip(points) {
            sums[*a][0] += p[0];
            sums[*a][1] += p[1];
            sums[*a][2] += 1.0;
        }
        let mut moved = false;
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[2] > 0.0 {
                let next = [s[0] / s[2], s[1] / s[2]];
                moved |= next != *c;
                *c = next;
            }
        }
        if !moved {
            break;
        }
    }
    let mut sizes = vec![0usize; k];
    for a in assign {
        sizes[a] += 1;
    }
    (sizes, centers)
}
