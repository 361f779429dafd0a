use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::flow::DIM;

/// Largest supported bins-per-dimension; keeps `K^4` well inside `u32`.
pub const MAX_BINS: usize = 200;

/// Equal-probability partition of the 4-D standard normal prior.
///
/// Bin edges along every axis are the prior quantiles `Φ⁻¹(j/K)`, so each of
/// the `K^4` cells carries prior mass `K^-4`. Cells are numbered row-major:
/// `((i0·K + i1)·K + i2)·K + i3`.
#[derive(Clone, Debug, PartialEq)]
pub struct InputGrid {
    k: usize,
    /// `K + 1` edges, `-inf` and `+inf` at the ends.
    edges: Vec<f64>,
    /// Probability midpoints `Φ⁻¹((j + ½)/K)`.
    mids: Vec<f64>,
}

fn std_normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

/// Quantiles of `(j + offset)/k` for `j in 0..n`, mirrored so that `q(p)` and
/// `q(1 - p)` are exact negatives.
fn symmetric_quantiles(k: usize, n: usize, offset: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n).map(|j| std_normal_quantile((j as f64 + offset) / k as f64)).collect();
    for j in 0..n {
        let mirror = n - 1 - j;
        if mirror < j {
            out[j] = -out[mirror];
        } else if mirror == j {
            out[j] = 0.0;
        }
    }
    out
}

impl InputGrid {
    pub fn new(k: usize) -> Result<Self> {
        if !(1..=MAX_BINS).contains(&k) {
            return Err(Error::Config(format!("bins per dimension must be in 1..={MAX_BINS}, got {k}")));
        }
        let mut edges = symmetric_quantiles(k, k + 1, 0.0);
        edges[0] = f64::NEG_INFINITY;
        edges[k] = f64::INFINITY;
        let mids = symmetric_quantiles(k, k, 0.5);
        Ok(Self { k, edges, mids })
    }

    pub fn bins(&self) -> usize {
        self.k
    }

    pub fn n_cells(&self) -> usize {
        self.k.pow(DIM as u32)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bin of a scalar coordinate: the number of interior edges `<= v`.
    #[inline]
    pub fn bin_of(&self, v: f64) -> usize {
        self.edges[1..self.k].partition_point(|e| *e <= v)
    }

    #[inline]
    pub fn cell_of(&self, z: &[f64; DIM]) -> usize {
        z.iter().fold(0, |acc, &v| acc * self.k + self.bin_of(v))
    }

    pub fn cell_bins(&self, cell: usize) -> [usize; DIM] {
        let mut out = [0; DIM];
        let mut rest = cell;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.k;
            rest /= self.k;
        }
        out
    }

    pub fn centroid(&self, cell: usize) -> [f64; DIM] {
        self.cell_bins(cell).map(|b| self.mids[b])
    }
}

/// Body-frame region of interest and the lattice of atomic obstacle centers.
///
/// Grid point `(ix, iy)` sits at `(x_min + ix·sx, y_min + iy·sy)` with
/// `sx = (x_max - x_min)/(nx - 1)`, so the lattice reaches every ROI edge.
/// Atomic index is `ix·ny + iy`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomicGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub r_atom: f64,
}

impl Default for AtomicGrid {
    fn default() -> Self {
        Self {
            x_min: 0.75,
            x_max: 1.75,
            y_min: -0.5,
            y_max: 0.5,
            nx: 40,
            ny: 40,
            r_atom: 0.15,
        }
    }
}

impl AtomicGrid {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max, self.r_atom]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::Config("atomic grid: ROI extents must be finite and non-empty".into()));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::Config("atomic grid: need at least 2 points per axis".into()));
        }
        if self.r_atom <= 0.0 {
            return Err(Error::Config("atomic grid: r_atom must be positive".into()));
        }
        if 0.5 * self.cell_diagonal() >= self.r_atom {
            return Err(Error::Config(
                "atomic grid: spacing too coarse, atomic discs would not cover the ROI".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> (f64, f64) {
        (
            (self.x_max - self.x_min) / (self.nx - 1) as f64,
            (self.y_max - self.y_min) / (self.ny - 1) as f64,
        )
    }

    pub fn cell_diagonal(&self) -> f64 {
        let (sx, sy) = self.spacing();
        sx.hypot(sy)
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny + iy
    }

    #[inline]
    pub fn point_xy(&self, ix: usize, iy: usize) -> (f64, f64) {
        let (sx, sy) = self.spacing();
        (self.x_min + ix as f64 * sx, self.y_min + iy as f64 * sy)
    }

    pub fn point(&self, index: usize) -> (f64, f64) {
        self.point_xy(index / self.ny, index % self.ny)
    }

    /// Euclidean distance from `(x, y)` to the ROI rectangle (0 inside).
    pub fn distance_to_roi(&self, x: f64, y: f64) -> f64 {
        let dx = (self.x_min - x).max(x - self.x_max).max(0.0);
        let dy = (self.y_min - y).max(y - self.y_max).max(0.0);
        dx.hypot(dy)
    }

    pub fn clamp_to_roi(&self, x: f64, y: f64) -> (f64, f64) {
        (x.clamp(self.x_min, self.x_max), y.clamp(self.y_min, self.y_max))
    }

    /// Inclusive index range along one axis whose points may lie within `r`
    /// of `v`; empty when the range misses the lattice.
    pub(crate) fn axis_range(v: f64, r: f64, min: f64, step: f64, n: usize) -> Option<(usize, usize)> {
        let lo = ((v - r - min) / step).floor() - 1.0;
        let hi = ((v + r - min) / step).ceil() + 1.0;
        if hi < 0.0 || lo > (n - 1) as f64 {
            return None;
        }
        Some((lo.max(0.0) as usize, (hi as usize).min(n - 1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Inverse normal CDF by bisection on a Simpson-integrated CDF.
    fn quantile_oracle(p: f64) -> f64 {
        let cdf = |x: f64| {
            // Simpson integration of the density from 0 to x
            let n = 20_000;
            let h = x / n as f64;
            let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let mut s = pdf(0.0) + pdf(x);
            for i in 1..n {
                s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            0.5 + s * h / 3.0
        };
        let (mut lo, mut hi) = (-8.0, 8.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quantile_edges_match_oracle() {
        let g = InputGrid::new(4).unwrap();
        assert!((g.edges()[1] - quantile_oracle(0.25)).abs() < 1e-9);
        assert!((g.edges()[1] + 0.674_489_750_196_081_7).abs() < 1e-12);
        assert_eq!(g.edges()[2], 0.0);
        assert_eq!(g.edges()[3], -g.edges()[1]);
        let g2 = InputGrid::new(2).unwrap();
        assert!((g2.centroid(0)[0] - quantile_oracle(0.25)).abs() < 1e-9);
        assert!((g2.centroid(g2.n_cells() - 1)[3] - quantile_oracle(0.75)).abs() < 1e-9);
    }

    #[test]
    fn edges_strictly_increase() {
        for k in [1, 2, 3, 6, 12, 40] {
            let g = InputGrid::new(k).unwrap();
            assert!(g.edges().windows(2).all(|w| w[0] < w[1]), "k={k}");
            assert_eq!(g.n_cells(), k.pow(4));
        }
        assert!(InputGrid::new(0).is_err());
    }

    #[test]
    fn origin_lands_right_of_median() {
        let g = InputGrid::new(12).unwrap();
        assert_eq!(g.cell_bins(g.cell_of(&[0.0; 4])), [6; 4]);
        assert_eq!(g.cell_of(&[-1e9, -1e9, -1e9, -1e9]), 0);
        assert_eq!(g.cell_of(&[1e9, 1e9, 1e9, 1e9]), g.n_cells() - 1);
        // row-major: the last coordinate varies fastest
        assert_eq!(g.cell_of(&[-9.0, -9.0, -9.0, 9.0]), 11);
        assert_eq!(g.cell_of(&[9.0, -9.0, -9.0, -9.0]), 11 * 12 * 12 * 12);
    }

    #[test]
    fn centroids_are_in_their_cells_and_mirror() {
        for k in [1, 2, 5, 6] {
            let g = InputGrid::new(k).unwrap();
            for c in 0..g.n_cells() {
                let z = g.centroid(c);
                assert_eq!(g.cell_of(&z), c);
                let mirror = g.cell_of(&z.map(|v| -v));
                assert_eq!(g.centroid(mirror), z.map(|v| -v));
            }
        }
    }

    #[test]
    fn occupancy_is_uniform() {
        let g = InputGrid::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200_000;
        let mut counts = vec![0usize; g.n_cells()];
        for _ in 0..n {
            counts[g.cell_of(&crate::flow::draw_prior(&mut rng))] += 1;
        }
        let p = 1.0 / g.n_cells() as f64;
        let se = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 5.0 * se);
        }
    }

    #[test]
    fn atomic_lattice_reaches_roi_edges() {
        let a = AtomicGrid::default();
        a.validate().unwrap();
        assert_eq!(a.point(0), (0.75, -0.5));
        let (x, y) = a.point(a.len() - 1);
        assert!((x - 1.75).abs() < 1e-12 && (y - 0.5).abs() < 1e-12);
        assert_eq!(a.point(a.index(3, 7)), a.point_xy(3, 7));
        assert!((a.spacing().0 - 1.0 / 39.0).abs() < 1e-15);
        assert_eq!(a.distance_to_roi(1.0, 0.0), 0.0);
        assert!((a.distance_to_roi(0.0, 1.5) - 0.75f64.hypot(1.0)).abs() < 1e-12);
        let coarse = AtomicGrid { nx: 3, ny: 3, ..a };
        assert!(coarse.validate().is_err());
    }

    proptest! {
        #[test]
        fn bin_matches_linear_scan(v in -5.0f64..5.0, k in 1usize..30) {
            let g = InputGrid::new(k).unwrap();
            let b = g.bin_of(v);
            prop_assert!(g.edges()[b] <= v && v < g.edges()[b + 1]);
        }
    }
}
