//! Least-squares fitting of primitive parameters to an observed path.

use super::{PosePath, PrimitiveParams, KAPPA_MAX};
use crate::error::{Error, Result};
use crate::geometry::wrap_angle;
use crate::linalg::solve4;

const MAX_ITERS: usize = 100;
const MIN_DECREASE: f64 = 1e-10;
const JACOBIAN_STEP: f64 = 1e-5;
const MIN_SAMPLES: usize = 8;
const MIN_DISPLACEMENT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOutcome {
    pub params: PrimitiveParams,
    /// Sum of squared position residuals, m².
    pub cost: f64,
    /// Root-mean-square position error per sample, m.
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Problem {
    /// (fraction of duration, x, y) per sample, in the path's initial frame.
    targets: Vec<(f64, f64, f64)>,
}

impl Problem {
    fn residuals(&self, theta: &PrimitiveParams, out: &mut [f64]) {
        for (k, &(f, x, y)) in self.targets.iter().enumerate() {
            let p = theta.pose_at(theta.alpha * f);
            out[2 * k] = p.x - x;
            out[2 * k + 1] = p.y - y;
        }
    }

    fn cost(&self, theta: &PrimitiveParams, buf: &mut [f64]) -> f64 {
        self.residuals(theta, buf);
        buf.iter().map(|r| r * r).sum()
    }
}

fn project(v: [f64; 4]) -> PrimitiveParams {
    PrimitiveParams::new(
        v[0].max(1e-6),
        v[1].clamp(-KAPPA_MAX, KAPPA_MAX),
        v[2].clamp(-KAPPA_MAX, KAPPA_MAX),
        v[3].clamp(-KAPPA_MAX, KAPPA_MAX),
    )
}

/// Initial guess: polyline length, and per-third heading change over arc length.
fn initial_guess(path: &PosePath) -> PrimitiveParams {
    let samples = path.samples();
    let alpha = path.polyline_length();
    let mut unwrapped = Vec::with_capacity(samples.len());
    let mut acc = samples[0].heading;
    unwrapped.push(acc);
    for w in samples.windows(2) {
        acc += wrap_angle(w[1].heading - w[0].heading);
        unwrapped.push(acc);
    }
    let duration = path.duration();
    let heading_at = |f: f64| {
        let (i, frac) = path.segment_at(f * duration);
        if i + 1 < unwrapped.len() {
            unwrapped[i] + frac * (unwrapped[i + 1] - unwrapped[i])
        } else {
            unwrapped[i]
        }
    };
    let seg = alpha / 3.0;
    let mut kappa = [0.0; 3];
    for (i, k) in kappa.iter_mut().enumerate() {
        let dh = heading_at((i + 1) as f64 / 3.0) - heading_at(i as f64 / 3.0);
        *k = (dh / seg).clamp(-KAPPA_MAX, KAPPA_MAX);
    }
    PrimitiveParams { alpha, kappa }
}

/// Gauss-Newton fit of `theta` minimizing the summed squared position error
/// between `reconstruct(theta)` and `path` (after moving `path` into the frame
/// of its first pose). Samples are matched by time, assuming constant speed.
///
/// A run that exhausts the iteration budget still returns the best iterate,
/// with `converged = false`.
pub fn fit_params(path: &PosePath) -> Result<FitOutcome> {
    if path.len() < MIN_SAMPLES {
        return Err(Error::Fit(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            path.len()
        )));
    }
    let local = path.normalized();
    let end = local.last();
    if end.x.hypot(end.y) <= MIN_DISPLACEMENT {
        return Err(Error::Fit("path has near-zero displacement".into()));
    }
    let duration = local.duration();
    let problem = Problem {
        targets: local
            .samples()
            .iter()
            .map(|s| (s.t / duration, s.x, s.y))
            .collect(),
    };

    let m = 2 * problem.targets.len();
    let mut r = vec![0.0; m];
    let mut r_plus = vec![0.0; m];
    let mut r_minus = vec![0.0; m];
    let mut jac = vec![[0.0f64; 4]; m];

    let mut theta = project(initial_guess(&local).to_array());
    let mut cost = problem.cost(&theta, &mut r);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_ITERS {
        iterations += 1;
        problem.residuals(&theta, &mut r);
        let base = theta.to_array();
        for j in 0..4 {
            let mut hi = base;
            let mut lo = base;
            hi[j] += JACOBIAN_STEP;
            lo[j] -= JACOBIAN_STEP;
            problem.residuals(&PrimitiveParams::from_array(hi), &mut r_plus);
            problem.residuals(&PrimitiveParams::from_array(lo), &mut r_minus);
            for i in 0..m {
                jac[i][j] = (r_plus[i] - r_minus[i]) / (2.0 * JACOBIAN_STEP);
            }
        }

        let mut normal = [[0.0f64; 4]; 4];
        let mut rhs = [0.0f64; 4];
        for (row, &res) in jac.iter().zip(&r) {
            for a in 0..4 {
                rhs[a] -= row[a] * res;
                for b in 0..4 {
                    normal[a][b] += row[a] * row[b];
                }
            }
        }
        let delta = match solve4(normal, rhs) {
            Some(d) => d,
            None => {
                let scale = (0..4).map(|i| normal[i][i]).fold(0.0, f64::max);
                for (i, row) in normal.iter_mut().enumerate() {
                    row[i] += 1e-9 * scale + 1e-15;
                }
                match solve4(normal, rhs) {
                    Some(d) => d,
                    None => break,
                }
            }
        };

        // backtrack until the cost decreases
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut v = base;
            for j in 0..4 {
                v[j] += step * delta[j];
            }
            let candidate = project(v);
            let c = problem.cost(&candidate, &mut r_plus);
            if c < cost {
                accepted = Some((candidate, c));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, c)) = accepted else {
            converged = true;
            break;
        };
        let decrease = cost - c;
        theta = candidate;
        cost = c;
        if decrease < MIN_DECREASE {
            converged = true;
            break;
        }
    }

    Ok(FitOutcome {
        params: theta,
        cost,
        rms: (cost / problem.targets.len() as f64).sqrt(),
        iterations,
        converged,
    })
}
