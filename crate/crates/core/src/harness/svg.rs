//! Deterministic SVG plots. World coordinates are written with four decimals
//! inside a y-flipped group, so files diff cleanly between runs.

use std::fmt::Write as _;

use crate::geometry::Pose;
use crate::mask::AtomicGrid;
use crate::primitives::PosePath;
use crate::vehicle::World;

const STYLE: &str = "\
.obstacle{fill:#555;fill-opacity:0.8}
.roi{fill:none;stroke:#1b7;stroke-width:0.01;stroke-dasharray:0.04 0.03}
.sample{fill:none;stroke:#69c;stroke-width:0.006;stroke-opacity:0.35}
.rejected{fill:none;stroke:#d64;stroke-width:0.006;stroke-opacity:0.25}
.chosen{fill:none;stroke:#c11;stroke-width:0.03}
.plan{fill:none;stroke:#e90;stroke-width:0.012;stroke-opacity:0.7}
.trajectory{fill:none;stroke:#111;stroke-width:0.025}
.start{fill:#1b7}";

pub struct Svg {
    min: [f64; 2],
    max: [f64; 2],
    body: String,
}

impl Default for Svg {
    fn default() -> Self {
        Self::new()
    }
}

impl Svg {
    pub fn new() -> Self {
        Self {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
            body: String::new(),
        }
    }

    fn grow(&mut self, x: f64, y: f64, r: f64) {
        self.min = [self.min[0].min(x - r), self.min[1].min(y - r)];
        self.max = [self.max[0].max(x + r), self.max[1].max(y + r)];
    }

    fn points(&mut self, pts: &[(f64, f64)]) -> String {
        let mut s = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            self.grow(x, y, 0.0);
            if i > 0 {
                s.push(' ');
            }
            write!(s, "{x:.4},{y:.4}").unwrap();
        }
        s
    }

    fn xy(path: &PosePath) -> Vec<(f64, f64)> {
        path.samples().iter().map(|s| (s.x, s.y)).collect()
    }

    pub fn obstacles(&mut self, world: &World) {
        for o in world.obstacles() {
            self.grow(o.cx, o.cy, o.r);
            writeln!(self.body, r#"<circle class="obstacle" cx="{:.4}" cy="{:.4}" r="{:.4}"/>"#, o.cx, o.cy, o.r).unwrap();
        }
    }

    /// Outline of the masking window at `pose`.
    pub fn roi(&mut self, grid: &AtomicGrid, pose: &Pose) {
        let corners: Vec<(f64, f64)> = [
            (grid.x_min, grid.y_min),
            (grid.x_max, grid.y_min),
            (grid.x_max, grid.y_max),
            (grid.x_min, grid.y_max),
        ]
        .iter()
        .map(|&(x, y)| pose.transform_point(x, y))
        .collect();
        let pts = self.points(&corners);
        writeln!(self.body, r#"<polygon class="roi" points="{pts}"/>"#).unwrap();
    }

    pub fn start(&mut self, x: f64, y: f64) {
        self.grow(x, y, 0.05);
        writeln!(self.body, r#"<circle class="start" cx="{x:.4}" cy="{y:.4}" r="0.05"/>"#).unwrap();
    }

    pub fn polyline(&mut self, class: &str, path: &PosePath) {
        let pts = self.points(&Self::xy(path));
        writeln!(self.body, r#"<polyline class="{class}" points="{pts}"/>"#).unwrap();
    }

    pub fn path(&mut self, class: &str, path: &PosePath) {
        let pts = self.points(&Self::xy(path));
        writeln!(self.body, r#"<path class="{class}" d="M{pts}"/>"#).unwrap();
    }

    /// The finished document; the view box covers everything drawn plus a
    /// 0.25 m margin.
    pub fn finish(self) -> String {
        let (min, max) = if self.min[0].is_finite() {
            (self.min, self.max)
        } else {
            ([0.0; 2], [1.0; 2])
        };
        let m = 0.25;
        let (x0, y0) = (min[0] - m, -(max[1] + m));
        let (w, h) = (max[0] - min[0] + 2.0 * m, max[1] - min[1] + 2.0 * m);
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.4} {y0:.4} {w:.4} {h:.4}" width="{:.0}" height="{:.0}">"#,
            w * 100.0,
            h * 100.0
        )
        .unwrap();
        writeln!(out, "<style>\n{STYLE}\n</style>").unwrap();
        writeln!(out, r#"<g transform="scale(1,-1)">"#).unwrap();
        out.push_str(&self.body);
        out.push_str("</g>\n</svg>\n");
        out
    }
}

/// Number of elements of `class` in an SVG produced by [`Svg`].
pub fn count_class(svg: &str, class: &str) -> usize {
    svg.matches(&format!(r#"class="{class}""#)).count()
}
