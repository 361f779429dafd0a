//! Model predictive path integral control with AR(1)-correlated exploration
//! noise and exponentiated-reward averaging.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::{euler_step, ControlInput, VehicleLimits, VehicleState, World};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MppiConfig {
    pub horizon_s: f64,
    /// Control and rollout rate, Hz.
    pub rate_hz: f64,
    pub n_rollouts: usize,
    /// Standard deviation of the acceleration noise.
    pub sigma_a: f64,
    /// Standard deviation of the steering-rate noise.
    pub sigma_psidot: f64,
    /// Noise correlation factor: `eps_t = beta·delta_t + (1 - beta)·eps_{t-1}`.
    pub beta: f64,
    /// Inverse temperature of the reward weighting.
    pub gamma: f64,
    /// Reward subtracted per colliding rollout step.
    pub penalty: f64,
}

impl Default for MppiConfig {
    fn default() -> Self {
        Self {
            horizon_s: 2.0,
            rate_hz: 50.0,
            n_rollouts: 1024,
            sigma_a: 2.0,
            sigma_psidot: 3.2 * PI,
            beta: 0.25,
            gamma: 1.0,
            penalty: 1e3,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.horizon_s > 0.0
            && self.rate_hz > 0.0
            && self.n_rollouts > 0
            && self.sigma_a >= 0.0
            && self.sigma_psidot >= 0.0
            && (0.0..=1.0).contains(&self.beta)
            && self.gamma > 0.0
            && self.penalty >= 0.0
            && [self.horizon_s, self.rate_hz, self.sigma_a, self.sigma_psidot, self.gamma, self.penalty]
                .iter()
                .all(|v| v.is_finite());
        if !ok || self.steps() == 0 {
            return Err(Error::Config(format!("mppi: invalid parameters {self:?}")));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn steps(&self) -> usize {
        (self.horizon_s * self.rate_hz).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MppiState {
    pub nominal: Vec<ControlInput>,
}

impl MppiState {
    /// All-zero nominal sequence.
    pub fn new(cfg: &MppiConfig) -> Self {
        Self {
            nominal: vec![ControlInput::ZERO; cfg.steps()],
        }
    }
}

/// One rollout's exploration noise: `steps` AR(1) draws per channel.
pub fn correlated_noise(cfg: &MppiConfig, steps: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(steps);
    let mut prev = [0.0; 2];
    for t in 0..steps {
        let d: [f64; 2] = [
            cfg.sigma_a * rng.sample::<f64, _>(StandardNormal),
            cfg.sigma_psidot * rng.sample::<f64, _>(StandardNormal),
        ];
        let e = if t == 0 {
            d
        } else {
            [
                cfg.beta * d[0] + (1.0 - cfg.beta) * prev[0],
                cfg.beta * d[1] + (1.0 - cfg.beta) * prev[1],
            ]
        };
        out.push(e);
        prev = e;
    }
    out
}

/// Terminal x minus `penalty` per colliding state of `states`.
pub fn rollout_reward(states: &[VehicleState], world: &World, penalty: f64) -> f64 {
    let Some(last) = states.last() else {
        return 0.0;
    };
    let hits = states.iter().filter(|s| world.collides(s.x, s.y)).count();
    last.x - penalty * hits as f64
}

/// Simulates `controls` from `start` with Euler steps and scores the
/// resulting states (excluding `start`).
pub fn simulate_reward(
    start: &VehicleState,
    controls: &[ControlInput],
    world: &World,
    cfg: &MppiConfig,
    limits: &VehicleLimits,
) -> f64 {
    let dt = cfg.dt();
    let mut s = *start;
    let mut hits = 0usize;
    for u in controls {
        s = euler_step(&s, u, dt, limits);
        hits += world.collides(s.x, s.y) as usize;
    }
    s.x - cfg.penalty * hits as f64
}

/// Normalized weights `exp(gamma·(R - max R))`.
pub fn reward_weights(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let max = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = rewards.iter().map(|r| (gamma * (r - max)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// One control update. Returns the control to apply now and the shifted
/// nominal sequence for the next call.
pub fn mppi_step(
    state: &VehicleState,
    world: &World,
    ms: &MppiState,
    cfg: &MppiConfig,
    limits: &VehicleLimits,
    rng: &mut impl Rng,
) -> (ControlInput, MppiState) {
    let steps = ms.nominal.len();
    let candidates: Vec<Vec<ControlInput>> = (0..cfg.n_rollouts)
        .map(|_| {
            correlated_noise(cfg, steps, rng)
                .iter()
                .zip(&ms.nominal)
                .map(|(e, u)| ControlInput::new(u.u_a + e[0], u.u_psidot + e[1]).clamped(limits))
                .collect()
        })
        .collect();
    let rewards: Vec<f64> = candidates
        .par_iter()
        .map(|c| simulate_reward(state, c, world, cfg, limits))
        .collect();
    let nominal = weighted_average(&candidates, &reward_weights(&rewards, cfg.gamma), steps);
    let first = nominal.first().copied().unwrap_or(ControlInput::ZERO);
    let mut next = nominal;
    if !next.is_empty() {
        next.remove(0);
        next.push(*next.last().unwrap_or(&first));
    }
    (first, MppiState { nominal: next })
}

fn weighted_average(candidates: &[Vec<ControlInput>], w: &[f64], steps: usize) -> Vec<ControlInput> {
    let mut out = vec![ControlInput::ZERO; steps];
    for (c, &wk) in candidates.iter().zip(w) {
        for (o, u) in out.iter_mut().zip(c) {
            o.u_a += wk * u.u_a;
            o.u_psidot += wk * u.u_psidot;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::Obstacle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> MppiConfig {
        MppiConfig {
            n_rollouts: 64,
            ..MppiConfig::default()
        }
    }

    #[test]
    fn white_noise_at_beta_one() {
        let c = MppiConfig { beta: 1.0, ..cfg() };
        let eps = correlated_noise(&c, 50, &mut ChaCha8Rng::seed_from_u64(1));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for e in eps {
            let d0: f64 = rng.sample(StandardNormal);
            let d1: f64 = rng.sample(StandardNormal);
            assert_eq!(e, [c.sigma_a * d0, c.sigma_psidot * d1]);
        }
    }

    #[test]
    fn constant_noise_at_beta_zero() {
        let c = MppiConfig { beta: 0.0, ..cfg() };
        let eps = correlated_noise(&c, 50, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(eps.iter().all(|e| *e == eps[0]));
    }

    #[test]
    fn lag_one_autocorrelation_matches_ar1() {
        let c = MppiConfig {
            sigma_a: 1.0,
            sigma_psidot: 1.0,
            ..cfg()
        };
        let eps = correlated_noise(&c, 100_000, &mut ChaCha8Rng::seed_from_u64(3));
        // drop the transient from eps_0 = delta_0
        let x: Vec<f64> = eps[100..].iter().map(|e| e[0]).collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        let cov = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>();
        // stationary AR(1) x_t = a·x_{t-1} + b·d_t has lag-1 autocorrelation a
        let a = 1.0 - c.beta;
        assert!((cov / var - a).abs() < 0.02, "{}", cov / var);
        // and variance b²/(1 - a²)
        let stationary = c.beta * c.beta / (1.0 - a * a);
        assert!((var / x.len() as f64 - stationary).abs() < 0.05 * stationary);
    }

    #[test]
    fn straight_rollout_reward() {
        let c = cfg();
        let s = VehicleState::new(0.0, 0.0, 2.5, 0.0, 0.0);
        let r = simulate_reward(&s, &vec![ControlInput::ZERO; 100], &World::empty(), &c, &VehicleLimits::default());
        assert!((r - 5.0).abs() < 1e-9);
        let wall = World::new(vec![Obstacle::new(3.0, 0.0, 0.15)]).unwrap();
        let hit = simulate_reward(&s, &vec![ControlInput::ZERO; 100], &wall, &c, &VehicleLimits::default());
        assert!(hit < r - c.penalty);
    }

    #[test]
    fn state_path_reward_counts_colliding_states() {
        let wall = World::new(vec![Obstacle::new(1.0, 0.0, 0.15)]).unwrap();
        let states: Vec<VehicleState> = (0..=10).map(|i| VehicleState::new(i as f64 * 0.2, 0.0, 1.0, 0.0, 0.0)).collect();
        // x = 1.0 only
        assert!((rollout_reward(&states, &wall, 1e3) - (2.0 - 1e3)).abs() < 1e-9);
        assert_eq!(rollout_reward(&states, &World::empty(), 1e3), 2.0);
    }

    #[test]
    fn zero_sigma_keeps_nominal() {
        let c = MppiConfig {
            sigma_a: 0.0,
            sigma_psidot: 0.0,
            ..cfg()
        };
        let mut ms = MppiState::new(&c);
        for (i, u) in ms.nominal.iter_mut().enumerate() {
            *u = ControlInput::new(0.01 * i as f64, -0.02 * i as f64);
        }
        let s = VehicleState::new(0.0, 0.0, 2.5, 0.0, 0.0);
        let (u, next) = mppi_step(&s, &World::empty(), &ms, &c, &VehicleLimits::default(), &mut ChaCha8Rng::seed_from_u64(4));
        assert!((u.u_a - ms.nominal[0].u_a).abs() < 1e-12);
        for t in 0..next.nominal.len() - 1 {
            assert!((next.nominal[t].u_a - ms.nominal[t + 1].u_a).abs() < 1e-12);
            assert!((next.nominal[t].u_psidot - ms.nominal[t + 1].u_psidot).abs() < 1e-12);
        }
        assert_eq!(next.nominal[next.nominal.len() - 1], next.nominal[next.nominal.len() - 2]);
    }

    #[test]
    fn weights_normalize_and_follow_reward() {
        let r = [1.0, 5.0, -3.0, 4.75];
        let w = reward_weights(&r, 1.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let argmax = |v: &[f64]| v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(argmax(&w), 1);
        // a power-of-two shift keeps every difference exact
        let shifted: Vec<f64> = r.iter().map(|x| x + 1024.0).collect();
        assert_eq!(reward_weights(&shifted, 1.0), w);
    }

    #[test]
    fn large_gamma_selects_best_candidate() {
        let c = MppiConfig { gamma: 1e3, ..cfg() };
        let lim = VehicleLimits::default();
        let s = VehicleState::new(0.0, 0.0, 2.5, 0.0, 0.0);
        let world = World::new(vec![Obstacle::new(2.5, 0.1, 0.15)]).unwrap();
        let ms = MppiState::new(&c);
        // replay the same draws to find the best candidate directly
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut best = (f64::NEG_INFINITY, ControlInput::ZERO);
        for _ in 0..c.n_rollouts {
            let cand: Vec<ControlInput> = correlated_noise(&c, c.steps(), &mut rng)
                .iter()
                .map(|e| ControlInput::new(e[0], e[1]).clamped(&lim))
                .collect();
            let r = simulate_reward(&s, &cand, &world, &c, &lim);
            if r > best.0 {
                best = (r, cand[0]);
            }
        }
        let (u, _) = mppi_step(&s, &world, &ms, &c, &lim, &mut ChaCha8Rng::seed_from_u64(5));
        assert!((u.u_a - best.1.u_a).abs() < 1e-3);
        assert!((u.u_psidot - best.1.u_psidot).abs() < 1e-3);
    }

    #[test]
    fn executed_controls_respect_limits_and_are_deterministic() {
        let c = cfg();
        let lim = VehicleLimits::default();
        let s = VehicleState::new(0.0, 0.0, 2.5, 0.0, 0.0);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let mut ms = MppiState::new(&c);
            let mut out = Vec::new();
            for _ in 0..5 {
                let (u, next) = mppi_step(&s, &World::empty(), &ms, &c, &lim, &mut rng);
                ms = next;
                out.push(u);
            }
            out
        };
        let a = run();
        assert_eq!(a, run());
        for u in a {
            assert!(u.u_a.abs() <= lim.a_max && u.u_psidot.abs() <= lim.psidot_max);
        }
    }
}
