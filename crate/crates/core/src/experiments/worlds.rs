use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{Obstacle, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomWorldConfig {
    pub n_obstacles: usize,
    pub radius: f64,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
}

impl Default for RandomWorldConfig {
    fn default() -> Self {
        Self {
            n_obstacles: 50,
            radius: 0.15,
            x_range: [0.0, 5.0],
            y_range: [-3.0, 3.0],
        }
    }
}

/// U-shaped trap opening toward the start (toward -x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CuldesacConfig {
    /// x of the closed end.
    pub rear_x: f64,
    /// x where the side walls begin.
    pub side_start_x: f64,
    /// Side walls sit at `y = ±half_width`.
    pub half_width: f64,
    pub radius: f64,
    /// Largest center-to-center distance along a wall.
    pub spacing: f64,
}

impl Default for CuldesacConfig {
    fn default() -> Self {
        Self {
            rear_x: 4.5,
            side_start_x: 3.0,
            half_width: 1.0,
            radius: 0.15,
            spacing: 0.15,
        }
    }
}

impl RandomWorldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || self.x_range[1] < self.x_range[0] || self.y_range[1] < self.y_range[0] {
            return Err(Error::Config("random world: bad radius or ranges".into()));
        }
        Ok(())
    }
}

impl CuldesacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.spacing > 0.0 && self.half_width > 0.0) || self.side_start_x > self.rear_x {
            return Err(Error::Config("culdesac: need positive sizes and side_start_x <= rear_x".into()));
        }
        Ok(())
    }
}

/// Uniform obstacles; any obstacle covering `start` is redrawn.
pub fn gen_random_world(cfg: &RandomWorldConfig, start: (f64, f64), rng: &mut impl Rng) -> World {
    let mut obstacles = Vec::with_capacity(cfg.n_obstacles);
    while obstacles.len() < cfg.n_obstacles {
        let o = Obstacle::new(
            rng.random_range(cfg.x_range[0]..=cfg.x_range[1]),
            rng.random_range(cfg.y_range[0]..=cfg.y_range[1]),
            cfg.radius,
        );
        if !o.contains(start.0, start.1) {
            obstacles.push(o);
        }
    }
    World::new(obstacles).expect("finite obstacles")
}

/// Evenly spaced points from `a` to `b` inclusive, no further apart than `spacing`.
fn wall(a: (f64, f64), b: (f64, f64), spacing: f64) -> Vec<(f64, f64)> {
    let len = (b.0 - a.0).hypot(b.1 - a.1);
    let n = ((len / spacing) - 1e-9).ceil().max(0.0) as usize;
    if n == 0 {
        return vec![a];
    }
    (0..=n)
        .map(|i| {
            let f = i as f64 / n as f64;
            (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1))
        })
        .collect()
}

pub fn gen_culdesac(cfg: &CuldesacConfig) -> World {
    let w = cfg.half_width;
    let mut pts = wall((cfg.rear_x, -w), (cfg.rear_x, w), cfg.spacing);
    for y in [-w, w] {
        let side = wall((cfg.side_start_x, y), (cfg.rear_x, y), cfg.spacing);
        // the corner already belongs to the rear wall
        pts.extend(&side[..side.len() - 1]);
    }
    World::new(pts.into_iter().map(|(x, y)| Obstacle::new(x, y, cfg.radius)).collect()).expect("finite obstacles")
}
