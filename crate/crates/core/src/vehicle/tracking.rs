use serde::{Deserialize, Serialize};

use super::{ControlInput, VehicleLimits, VehicleState};
use crate::geometry::{wrap_angle, Pose};
use crate::primitives::PosePath;

/// Gains of the primitive tracker: P on speed, PD on lateral and heading
/// error for the steering rate, plus steering-angle damping toward the
/// reference curvature's steady-state angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    pub kv: f64,
    pub kct: f64,
    pub kh: f64,
    pub kd: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kv: 4.0,
            kct: 6.0,
            kh: 8.0,
            kd: 10.0,
        }
    }
}

/// Closest point of `plan` to `(x, y)`, both in the plan's frame, as
/// `(time, pose)`. Heading is interpolated along the nearest segment.
fn project(plan: &PosePath, x: f64, y: f64) -> (f64, Pose) {
    let samples = plan.samples();
    let mut best = (f64::INFINITY, samples[0].t, Pose::new(samples[0].x, samples[0].y, samples[0].heading));
    for w in samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let len2 = ex * ex + ey * ey;
        let u = if len2 > 0.0 {
            (((x - a.x) * ex + (y - a.y) * ey) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (px, py) = (a.x + u * ex, a.y + u * ey);
        let d2 = (x - px).powi(2) + (y - py).powi(2);
        if d2 < best.0 {
            let heading = a.heading + u * wrap_angle(b.heading - a.heading);
            best = (d2, a.t + u * (b.t - a.t), Pose::new(px, py, heading));
        }
    }
    (best.1, best.2)
}

/// Control that keeps `state` on the plan's path at the plan's speed.
///
/// `plan` is in the body frame of `plan_origin`. Speed follows the reference
/// at `t_since_plan`; lateral and heading errors are taken against the
/// closest point of the path, so a speed mismatch shows up as along-track
/// lag instead of pulling the vehicle off the checked geometry. The
/// cross-track error is positive when the path is to the vehicle's left.
pub fn pid_track(
    state: &VehicleState,
    plan: &PosePath,
    plan_origin: &Pose,
    t_since_plan: f64,
    gains: &PidGains,
    limits: &VehicleLimits,
) -> ControlInput {
    let (v_ref, _) = plan.rates_at_time(t_since_plan);
    let (bx, by) = plan_origin.inverse_transform_point(state.x, state.y);
    let (t_near, near) = project(plan, bx, by);
    let (_, kappa_ref) = plan.rates_at_time(t_near);

    let (dx, dy) = (near.x - bx, near.y - by);
    let (s, c) = near.heading.sin_cos();
    let cross_track = -s * dx + c * dy;
    let heading_err = wrap_angle(near.heading - (state.phi - plan_origin.heading));
    let psi_ff = (kappa_ref * limits.wheelbase).atan();

    ControlInput::new(
        gains.kv * (v_ref - state.v),
        gains.kct * cross_track + gains.kh * heading_err - gains.kd * (state.psi - psi_ff),
    )
    .clamped(limits)
}
