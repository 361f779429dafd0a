//! Planar rigid-body poses.

use std::f64::consts::PI;

/// A pose in SE(2): position in meters, heading in radians.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub const ORIGIN: Pose = Pose {
        x: 0.0,
        y: 0.0,
        heading: 0.0,
    };

    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    /// Maps a point expressed in this pose's frame into the parent frame.
    #[inline]
    pub fn transform_point(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        (self.x + c * x - s * y, self.y + s * x + c * y)
    }

    /// Maps a parent-frame point into this pose's frame.
    #[inline]
    pub fn inverse_transform_point(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (x - self.x, y - self.y);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// `self ∘ local`: the pose `local` (given in this frame) expressed in the parent frame.
    pub fn compose(&self, local: &Pose) -> Pose {
        let (x, y) = self.transform_point(local.x, local.y);
        Pose::new(x, y, self.heading + local.heading)
    }

    /// `other` expressed in this pose's frame.
    pub fn relative(&self, other: &Pose) -> Pose {
        let (x, y) = self.inverse_transform_point(other.x, other.y);
        Pose::new(x, y, other.heading - self.heading)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_then_relative_is_identity() {
        let origin = Pose::new(1.0, -2.0, 0.7);
        let local = Pose::new(0.3, 0.4, -1.1);
        let back = origin.relative(&origin.compose(&local));
        assert!((back.x - local.x).abs() < 1e-12);
        assert!((back.y - local.y).abs() < 1e-12);
        assert!((back.heading - local.heading).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_angle(-7.0) - (-7.0 + 2.0 * PI)).abs() < 1e-12);
    }
}
