use crate::error::{Error, Result};
use crate::primitives::path::for_each_segment_point;
use crate::primitives::PosePath;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Obstacle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Self {
        Self { cx, cy, r }
    }

    /// Strict interior test; a point exactly on the boundary is free.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        dx * dx + dy * dy < self.r * self.r
    }
}

/// Uniform bucket grid over the obstacles' bounding boxes. Each obstacle is
/// listed in every cell its bounding box touches, so a point only needs the
/// obstacles of its own cell.
#[derive(Clone, Debug, Default)]
struct BucketGrid {
    x0: f64,
    y0: f64,
    inv_cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl BucketGrid {
    fn build(obstacles: &[Obstacle]) -> Self {
        if obstacles.is_empty() {
            return Self::default();
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        let mut r_max = 0.0f64;
        for o in obstacles {
            x0 = x0.min(o.cx - o.r);
            y0 = y0.min(o.cy - o.r);
            x1 = x1.max(o.cx + o.r);
            y1 = y1.max(o.cy + o.r);
            r_max = r_max.max(o.r);
        }
        let cell = (2.0 * r_max).max((x1 - x0).max(y1 - y0) / 256.0).max(1e-6);
        let inv_cell = 1.0 / cell;
        let nx = (((x1 - x0) * inv_cell).floor() as usize) + 1;
        let ny = (((y1 - y0) * inv_cell).floor() as usize) + 1;
        let cell_range = |lo: f64, hi: f64, origin: f64, n: usize| {
            let a = (((lo - origin) * inv_cell).floor().max(0.0) as usize).min(n - 1);
            let b = (((hi - origin) * inv_cell).floor().max(0.0) as usize).min(n - 1);
            a..=b
        };
        let mut buckets = vec![Vec::new(); nx * ny];
        for (k, o) in obstacles.iter().enumerate() {
            // padded so rounding at the rim cannot drop a containing obstacle
            let pad = o.r * (1.0 + 1e-9) + 1e-12;
            for i in cell_range(o.cx - pad, o.cx + pad, x0, nx) {
                for j in cell_range(o.cy - pad, o.cy + pad, y0, ny) {
                    buckets[i * ny + j].push(k as u32);
                }
            }
        }
        let mut starts = Vec::with_capacity(nx * ny + 1);
        let mut items = Vec::new();
        for b in &buckets {
            starts.push(items.len() as u32);
            items.extend_from_slice(b);
        }
        starts.push(items.len() as u32);
        Self {
            x0,
            y0,
            inv_cell,
            nx,
            ny,
            starts,
            items,
        }
    }

    #[inline]
    fn candidates(&self, x: f64, y: f64) -> &[u32] {
        if self.nx == 0 {
            return &[];
        }
        let fx = (x - self.x0) * self.inv_cell;
        let fy = (y - self.y0) * self.inv_cell;
        // also rejects NaN
        if !(fx >= 0.0 && fy >= 0.0) {
            return &[];
        }
        let (i, j) = (fx as usize, fy as usize);
        if i >= self.nx || j >= self.ny {
            return &[];
        }
        let c = i * self.ny + j;
        &self.items[self.starts[c] as usize..self.starts[c + 1] as usize]
    }
}

/// A planar map of circular obstacles.
#[derive(Clone, Debug, Default)]
pub struct World {
    obstacles: Vec<Obstacle>,
    grid: BucketGrid,
}

impl PartialEq for World {
    fn eq(&self, other: &Self) -> bool {
        self.obstacles == other.obstacles
    }
}

impl World {
    pub fn new(obstacles: Vec<Obstacle>) -> Result<Self> {
        if let Some(o) = obstacles
            .iter()
            .find(|o| !(o.r > 0.0 && o.r.is_finite() && o.cx.is_finite() && o.cy.is_finite()))
        {
            return Err(Error::InvalidParams(format!("invalid obstacle {o:?}")));
        }
        let grid = BucketGrid::build(&obstacles);
        Ok(Self { obstacles, grid })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    #[inline]
    pub fn collides(&self, x: f64, y: f64) -> bool {
        self.grid
            .candidates(x, y)
            .iter()
            .any(|&k| self.obstacles[k as usize].contains(x, y))
    }

    /// Reads `cx,cy,r` rows; blank lines and `#` comments are skipped, as is a
    /// leading header row.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut obstacles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("cx") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::format("world CSV", format!("line {}: {e}", lineno + 1)))
            };
            if fields.len() != 3 {
                return Err(Error::format(
                    "world CSV",
                    format!("line {}: expected 3 fields, got {}", lineno + 1, fields.len()),
                ));
            }
            obstacles.push(Obstacle::new(parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
        }
        World::new(obstacles)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("cx,cy,r\n");
        for o in &self.obstacles {
            s.push_str(&format!("{},{},{}\n", o.cx, o.cy, o.r));
        }
        s
    }
}

/// True iff `(x, y)` lies strictly inside some obstacle.
pub fn point_collides(x: f64, y: f64, world: &World) -> bool {
    world.collides(x, y)
}

/// Dense check of a path: every segment is subdivided at spacing `<= ds`.
pub fn path_collides(path: &PosePath, world: &World, ds: f64) -> bool {
    if world.is_empty() {
        return false;
    }
    let s = path.samples();
    if world.collides(s[0].x, s[0].y) {
        return true;
    }
    s.windows(2).any(|w| segment_collides(&w[0], &w[1], world, ds))
}

pub(crate) fn segment_collides(
    a: &crate::primitives::PathSample,
    b: &crate::primitives::PathSample,
    world: &World,
    ds: f64,
) -> bool {
    let mut hit = false;
    for_each_segment_point(a, b, ds, |x, y| hit = hit || world.collides(x, y));
    hit
}
