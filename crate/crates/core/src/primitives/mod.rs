//! Fixed-duration motion primitives built from three equal-length arcs.
//!
//! A primitive is described by its total arc length `alpha` and the curvature
//! of each of its three consecutive arcs. Reconstruction is closed form: each
//! arc advances along the chord of its circle, which stays well conditioned as
//! the curvature goes to zero.

mod fit;
pub(crate) mod path;

pub use fit::{fit_params, FitOutcome};
pub use path::{slice_log, PathSample, PosePath};

use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Duration of every primitive, seconds.
pub const PRIMITIVE_DURATION: f64 = 2.0;
/// Curvature bound for trackable primitives, 1/m.
pub const KAPPA_MAX: f64 = 4.0;
/// Shortest primitive the planner will execute, meters.
pub const ALPHA_MIN: f64 = 0.05;

const STRAIGHT_EPS: f64 = 1e-9;

/// Total arc length plus one curvature per arc.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimitiveParams {
    pub alpha: f64,
    pub kappa: [f64; 3],
}

impl PrimitiveParams {
    pub fn new(alpha: f64, k1: f64, k2: f64, k3: f64) -> Self {
        Self {
            alpha,
            kappa: [k1, k2, k3],
        }
    }

    pub fn straight(alpha: f64) -> Self {
        Self::new(alpha, 0.0, 0.0, 0.0)
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.alpha, self.kappa[0], self.kappa[1], self.kappa[2]]
    }

    /// Projects an unconstrained 4-vector (e.g. a flow output) onto executable
    /// parameters: `alpha >= ALPHA_MIN`, `|kappa| <= KAPPA_MAX`.
    pub fn from_raw(v: [f64; 4]) -> Self {
        let sane = |x: f64, fallback: f64| if x.is_finite() { x } else { fallback };
        Self {
            alpha: sane(v[0], ALPHA_MIN).max(ALPHA_MIN),
            kappa: [
                sane(v[1], 0.0).clamp(-KAPPA_MAX, KAPPA_MAX),
                sane(v[2], 0.0).clamp(-KAPPA_MAX, KAPPA_MAX),
                sane(v[3], 0.0).clamp(-KAPPA_MAX, KAPPA_MAX),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "alpha must be positive and finite, got {}",
                self.alpha
            )));
        }
        if let Some(k) = self.kappa.iter().find(|k| !k.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite curvature {k}")));
        }
        Ok(())
    }

    /// Constant speed implied by the fixed primitive duration.
    pub fn speed(&self) -> f64 {
        self.alpha / PRIMITIVE_DURATION
    }

    /// Body-frame pose after travelling arc length `s` (clamped to `[0, alpha]`).
    pub fn pose_at(&self, s: f64) -> Pose {
        let seg = self.alpha / 3.0;
        let mut remaining = s.clamp(0.0, self.alpha);
        let mut pose = Pose::ORIGIN;
        for &k in &self.kappa {
            let l = remaining.min(seg);
            pose = advance_arc(pose, k, l);
            remaining -= l;
            if remaining <= 0.0 {
                break;
            }
        }
        pose
    }
}

/// Moves along a circular arc of curvature `kappa` for arc length `l`.
#[inline]
fn advance_arc(p: Pose, kappa: f64, l: f64) -> Pose {
    let dh = kappa * l;
    let chord = if kappa.abs() < STRAIGHT_EPS {
        l
    } else {
        2.0 * (0.5 * dh).sin() / kappa
    };
    let mid = p.heading + 0.5 * dh;
    Pose::new(p.x + chord * mid.cos(), p.y + chord * mid.sin(), p.heading + dh)
}

/// Samples the primitive at `n_samples` points evenly spaced in arc length
/// (and therefore in time, at constant speed).
pub fn reconstruct(theta: &PrimitiveParams, n_samples: usize) -> Result<PosePath> {
    theta.validate()?;
    if n_samples < 2 {
        return Err(Error::InvalidParams(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    let last = (n_samples - 1) as f64;
    let samples = (0..n_samples)
        .map(|k| {
            let f = k as f64 / last;
            let pose = theta.pose_at(theta.alpha * f);
            PathSample::from_pose(PRIMITIVE_DURATION * f, pose)
        })
        .collect();
    Ok(PosePath::from_samples_unchecked(samples))
}
