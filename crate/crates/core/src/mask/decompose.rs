use super::grid::AtomicGrid;
use crate::geometry::Pose;
use crate::vehicle::World;

/// Relative slack on covering radii so rounding never drops a required point.
const COVER_SLACK: f64 = 1e-12;

/// Atomic maps whose union over-covers the part of `world` inside the ROI,
/// seen from `pose`. Returned indices are sorted and unique.
///
/// For an obstacle at body-frame center `c` with radius `r`, the selected
/// lattice points are those within
/// `diag + dist(c, ROI) + max(0, r - r_atom)` of `c`, where `diag` is the
/// lattice cell diagonal. Every ROI point `p` of the disc then lies strictly
/// inside a selected atomic disc: step from `c` toward `p` by
/// `diag/2 + max(0, r - r_atom)`, project onto the ROI and take the nearest
/// lattice point. Projection is non-expansive and the lattice covering radius
/// is `diag/2`, which bounds both that point's distance to `p` (below
/// `r_atom`) and to `c` (the radius above). Obstacles with
/// `r + diag/2 <= r_atom` are covered by the single lattice point nearest to
/// their ROI-clamped center.
pub fn decompose(world: &World, pose: &Pose, grid: &AtomicGrid) -> Vec<usize> {
    let mut selected = vec![false; grid.len()];
    let (sx, sy) = grid.spacing();
    let diag = grid.cell_diagonal();
    for o in world.obstacles() {
        let (cx, cy) = pose.inverse_transform_point(o.cx, o.cy);
        let dist = grid.distance_to_roi(cx, cy);
        if dist >= o.r {
            continue;
        }
        if o.r + 0.5 * diag <= grid.r_atom {
            let (qx, qy) = grid.clamp_to_roi(cx, cy);
            let ix = (((qx - grid.x_min) / sx).round() as usize).min(grid.nx - 1);
            let iy = (((qy - grid.y_min) / sy).round() as usize).min(grid.ny - 1);
            selected[grid.index(ix, iy)] = true;
            continue;
        }
        let r_cover = (diag + dist + (o.r - grid.r_atom).max(0.0)) * (1.0 + COVER_SLACK);
        let Some((x0, x1)) = AtomicGrid::axis_range(cx, r_cover, grid.x_min, sx, grid.nx) else {
            continue;
        };
        let Some((y0, y1)) = AtomicGrid::axis_range(cy, r_cover, grid.y_min, sy, grid.ny) else {
            continue;
        };
        for ix in x0..=x1 {
            for iy in y0..=y1 {
                let (gx, gy) = grid.point_xy(ix, iy);
                if (gx - cx).hypot(gy - cy) <= r_cover {
                    selected[grid.index(ix, iy)] = true;
                }
            }
        }
    }
    selected
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| s.then_some(i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::Obstacle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn covered(grid: &AtomicGrid, atoms: &[usize], x: f64, y: f64) -> bool {
        atoms.iter().any(|&i| {
            let (gx, gy) = grid.point(i);
            Obstacle::new(gx, gy, grid.r_atom).contains(x, y)
        })
    }

    /// Draws uniform points of the disc that fall inside the ROI and checks
    /// each is inside some selected atomic disc.
    fn check_cover(grid: &AtomicGrid, world: &World, pose: &Pose, rng: &mut ChaCha8Rng, n: usize) -> usize {
        let atoms = decompose(world, pose, grid);
        let mut tested = 0;
        for o in world.obstacles() {
            for _ in 0..n {
                let rho = o.r * rng.random::<f64>().sqrt();
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let (wx, wy) = (o.cx + rho * a.cos(), o.cy + rho * a.sin());
                if !o.contains(wx, wy) {
                    continue;
                }
                let (bx, by) = pose.inverse_transform_point(wx, wy);
                if grid.distance_to_roi(bx, by) > 0.0 {
                    continue;
                }
                tested += 1;
                assert!(covered(grid, &atoms, bx, by), "uncovered point ({bx}, {by}) of {o:?}");
            }
        }
        tested
    }

    #[test]
    fn centered_on_grid_point_selects_it_and_neighbours() {
        let grid = AtomicGrid::default();
        let (gx, gy) = grid.point_xy(10, 20);
        let world = World::new(vec![Obstacle::new(gx, gy, grid.r_atom)]).unwrap();
        let atoms = decompose(&world, &Pose::ORIGIN, &grid);
        assert!(atoms.contains(&grid.index(10, 20)));
        assert_eq!(atoms.len(), 9);
        for ix in 9..=11 {
            for iy in 19..=21 {
                assert!(atoms.contains(&grid.index(ix, iy)));
            }
        }
    }

    #[test]
    fn far_obstacle_selects_nothing() {
        let grid = AtomicGrid::default();
        let world = World::new(vec![Obstacle::new(3.0, 0.0, 0.15), Obstacle::new(1.2, -0.9, 0.15)]).unwrap();
        assert!(decompose(&world, &Pose::ORIGIN, &grid).is_empty());
        assert!(decompose(&World::empty(), &Pose::ORIGIN, &grid).is_empty());
    }

    #[test]
    fn tangent_to_roi_is_ignored_and_strict_overlap_is_not() {
        let grid = AtomicGrid::default();
        let touching = World::new(vec![Obstacle::new(2.0, 0.0, 0.25)]).unwrap();
        assert!(decompose(&touching, &Pose::ORIGIN, &grid).is_empty());
        let overlapping = World::new(vec![Obstacle::new(1.99, 0.0, 0.25)]).unwrap();
        assert!(!decompose(&overlapping, &Pose::ORIGIN, &grid).is_empty());
    }

    #[test]
    fn monte_carlo_cover_of_random_obstacles() {
        let grid = AtomicGrid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut tested = 0;
        while tested < 10_000 {
            let o = Obstacle::new(rng.random_range(0.5..2.0), rng.random_range(-0.75..0.75), 0.15);
            let world = World::new(vec![o]).unwrap();
            tested += check_cover(&grid, &world, &Pose::ORIGIN, &mut rng, 200);
        }
    }

    #[test]
    fn cover_near_roi_boundary_and_with_other_radii() {
        let grid = AtomicGrid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for r in [0.01, 0.05, 0.13, 0.15, 0.3, 0.6] {
            for _ in 0..200 {
                // centers hugging the ROI edges are the hard case
                let cx = [0.75, 1.75][rng.random_range(0..2)] + rng.random_range(-r..r);
                let cy = rng.random_range(-0.5 - r..0.5 + r);
                let world = World::new(vec![Obstacle::new(cx, cy, r)]).unwrap();
                check_cover(&grid, &world, &Pose::ORIGIN, &mut rng, 100);
            }
        }
    }

    proptest! {
        #[test]
        fn cover_holds_in_any_vehicle_frame(
            x in -3.0f64..3.0, y in -3.0f64..3.0, h in -3.2f64..3.2,
            d in 0.5f64..2.0, lat in -0.7f64..0.7, seed in 0u64..1000,
        ) {
            let grid = AtomicGrid::default();
            let pose = Pose::new(x, y, h);
            let (cx, cy) = pose.transform_point(d, lat);
            let world = World::new(vec![Obstacle::new(cx, cy, 0.15)]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            check_cover(&grid, &world, &pose, &mut rng, 300);
        }
    }
}
