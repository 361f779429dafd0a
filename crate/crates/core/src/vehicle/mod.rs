//! Kinematic bicycle simulation, point-robot collision checking, and the
//! primitive-tracking controller.

mod tracking;
mod world;

pub use tracking::{pid_track, PidGains};
pub use world::{path_collides, point_collides, Obstacle, World};
pub(crate) use world::segment_collides;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geometry::Pose;

/// Actuation and geometry limits shared by every controller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleLimits {
    /// |u_a| bound, m/s².
    pub a_max: f64,
    /// |u_psidot| bound, rad/s.
    pub psidot_max: f64,
    /// |psi| bound, rad.
    pub psi_max: f64,
    /// Divides `v tan(psi)` in the heading rate.
    pub wheelbase: f64,
}

impl VehicleLimits {
    /// Largest path curvature reachable at full steering lock, 1/m.
    pub fn max_curvature(&self) -> f64 {
        self.psi_max.tan() / self.wheelbase
    }
}

impl Default for VehicleLimits {
    fn default() -> Self {
        Self {
            a_max: 5.0,
            psidot_max: 4.0 * PI,
            psi_max: 0.45,
            wheelbase: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub phi: f64,
    pub psi: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, v: f64, phi: f64, psi: f64) -> Self {
        Self { x, y, v, phi, psi }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.phi)
    }

    fn offset(&self, d: &[f64; 5], h: f64) -> Self {
        Self {
            x: self.x + h * d[0],
            y: self.y + h * d[1],
            v: self.v + h * d[2],
            phi: self.phi + h * d[3],
            psi: self.psi + h * d[4],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlInput {
    pub u_a: f64,
    pub u_psidot: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput {
        u_a: 0.0,
        u_psidot: 0.0,
    };

    pub fn new(u_a: f64, u_psidot: f64) -> Self {
        Self { u_a, u_psidot }
    }

    pub fn clamped(&self, limits: &VehicleLimits) -> Self {
        Self {
            u_a: self.u_a.clamp(-limits.a_max, limits.a_max),
            u_psidot: self.u_psidot.clamp(-limits.psidot_max, limits.psidot_max),
        }
    }
}

#[inline]
fn derivative(s: &VehicleState, u: &ControlInput, wheelbase: f64) -> [f64; 5] {
    let (sin_phi, cos_phi) = s.phi.sin_cos();
    [
        s.v * cos_phi,
        s.v * sin_phi,
        u.u_a,
        s.v * s.psi.tan() / wheelbase,
        u.u_psidot,
    ]
}

#[inline]
fn sanitize(mut s: VehicleState, limits: &VehicleLimits) -> VehicleState {
    s.v = s.v.max(0.0);
    s.psi = s.psi.clamp(-limits.psi_max, limits.psi_max);
    s
}

/// One RK4 step of the bicycle model. Controls are clamped before
/// integration; speed and steering angle are clamped afterwards.
pub fn step(state: &VehicleState, control: &ControlInput, dt: f64, limits: &VehicleLimits) -> VehicleState {
    let u = control.clamped(limits);
    let l = limits.wheelbase;
    let k1 = derivative(state, &u, l);
    let k2 = derivative(&state.offset(&k1, 0.5 * dt), &u, l);
    let k3 = derivative(&state.offset(&k2, 0.5 * dt), &u, l);
    let k4 = derivative(&state.offset(&k3, dt), &u, l);
    let mut d = [0.0; 5];
    for i in 0..5 {
        d[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
    }
    sanitize(state.offset(&d, dt), limits)
}

/// Forward-Euler variant used inside sampled rollouts.
#[inline]
pub fn euler_step(state: &VehicleState, control: &ControlInput, dt: f64, limits: &VehicleLimits) -> VehicleState {
    let d = derivative(state, control, limits.wheelbase);
    sanitize(state.offset(&d, dt), limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap_angle;

    fn lim() -> VehicleLimits {
        VehicleLimits::default()
    }

    #[test]
    fn coasting_moves_forward() {
        let s = step(&VehicleState::new(0.0, 0.0, 1.0, 0.0, 0.0), &ControlInput::ZERO, 0.01, &lim());
        assert!((s.x - 0.01).abs() < 1e-15);
        assert_eq!((s.y, s.v, s.phi, s.psi), (0.0, 1.0, 0.0, 0.0));
    }

    #[test]
    fn acceleration_from_rest() {
        let s = step(&VehicleState::default(), &ControlInput::new(1.0, 0.0), 0.01, &lim());
        assert!((s.v - 0.01).abs() < 1e-15);
    }

    #[test]
    fn constant_steer_closes_a_circle() {
        let period = 2.0 * PI / 0.1f64.tan();
        let dt = 1e-3;
        let full = (period / dt).floor() as usize;
        let mut s = VehicleState::new(0.0, 0.0, 1.0, 0.0, 0.1);
        for _ in 0..full {
            s = step(&s, &ControlInput::ZERO, dt, &lim());
        }
        s = step(&s, &ControlInput::ZERO, period - full as f64 * dt, &lim());
        assert!(wrap_angle(s.phi).abs() < 1e-3, "phi {}", s.phi);
        assert!(s.x.abs() < 1e-3 && s.y.abs() < 1e-3);
    }

    #[test]
    fn limits_are_enforced() {
        let s = step(&VehicleState::new(0.0, 0.0, 0.01, 0.0, 0.44), &ControlInput::new(-100.0, 100.0), 0.05, &lim());
        assert_eq!(s.v, 0.0);
        assert_eq!(s.psi, 0.45);
        let u = ControlInput::new(9.0, -99.0).clamped(&lim());
        assert_eq!((u.u_a, u.u_psidot), (5.0, -4.0 * PI));
    }

    #[test]
    fn rk4_is_fourth_order() {
        // global error over a fixed horizon, against a dt = 1e-6 reference
        let start = VehicleState::new(0.0, 0.0, 2.0, 0.3, 0.1);
        let u = ControlInput::new(0.5, 0.4);
        let horizon = 0.2;
        let run = |dt: f64| {
            let n = (horizon / dt).round() as usize;
            (0..n).fold(start, |s, _| step(&s, &u, dt, &lim()))
        };
        let reference = run(1e-6);
        let err = |s: VehicleState| {
            ((s.x - reference.x).powi(2) + (s.y - reference.y).powi(2) + (s.phi - reference.phi).powi(2)).sqrt()
        };
        let coarse = err(run(0.05));
        let fine = err(run(0.025));
        let ratio = coarse / fine;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }
}
