//! A 4-D coupling-layer normalizing flow between the standard Gaussian prior
//! and primitive-parameter space.
//!
//! The generative direction (`forward`) maps a prior draw `z` through the
//! coupling stack to a standardized vector `u`, then un-whitens it with fixed
//! per-coordinate statistics: `theta = shift + scale ⊙ u`. Log-determinants are
//! accumulated in closed form for both directions.

mod coupling;
mod io;
mod train;

pub use coupling::{CouplingLayer, TransformKind, SCALE_BOUND};
pub use io::{ArtifactMeta, FLOW_MAGIC, FLOW_VERSION};
pub use train::{train, whitening_stats, TrainConfig, TrainReport, MIN_DATASET};

use rand::Rng;
use rand_distr::StandardNormal;

use coupling::InverseTrace;

/// Dimension of the prior and of primitive-parameter space.
pub const DIM: usize = 4;

const LOG_2PI: f64 = 1.837_877_066_409_345_3;

/// Coordinate masks cycled through the stack; each layer flips which half is
/// transformed, and the pairing changes every two layers.
const MASKS: [u8; 4] = [0b0011, 0b1100, 0b0101, 0b1010];

/// Log-density of the standard normal in `DIM` dimensions.
pub fn std_normal_log_pdf(z: &[f64; DIM]) -> f64 {
    -0.5 * z.iter().map(|v| v * v).sum::<f64>() - 0.5 * DIM as f64 * LOG_2PI
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowModel {
    layers: Vec<CouplingLayer>,
    shift: [f64; DIM],
    scale: [f64; DIM],
}

impl FlowModel {
    /// Identity-initialized couplings around the given whitening statistics.
    pub fn new(n_layers: usize, hidden: usize, shift: [f64; DIM], scale: [f64; DIM], rng: &mut impl Rng) -> Self {
        assert!(scale.iter().all(|s| *s > 0.0 && s.is_finite()), "whitening scales must be positive");
        let layers = (0..n_layers)
            .map(|l| CouplingLayer::identity(MASKS[l % MASKS.len()], hidden, rng))
            .collect();
        Self { layers, shift, scale }
    }

    pub(crate) fn from_parts(layers: Vec<CouplingLayer>, shift: [f64; DIM], scale: [f64; DIM]) -> Self {
        Self { layers, shift, scale }
    }

    pub fn layers(&self) -> &[CouplingLayer] {
        &self.layers
    }

    pub fn hidden(&self) -> usize {
        self.layers.first().map_or(0, |l| l.hidden)
    }

    pub fn whitening(&self) -> ([f64; DIM], [f64; DIM]) {
        (self.shift, self.scale)
    }

    fn whitening_logdet(&self) -> f64 {
        self.scale.iter().map(|s| s.ln()).sum()
    }

    /// `theta = f(z)` and `log |det ∂f/∂z|`.
    pub fn forward(&self, z: &[f64; DIM]) -> ([f64; DIM], f64) {
        let mut hidden = vec![0.0; self.hidden()];
        self.forward_with(z, &mut hidden)
    }

    fn forward_with(&self, z: &[f64; DIM], hidden: &mut [f64]) -> ([f64; DIM], f64) {
        let mut x = *z;
        let mut logdet = self.whitening_logdet();
        for layer in &self.layers {
            let (y, ld) = layer.forward(&x, hidden);
            x = y;
            logdet += ld;
        }
        for i in 0..DIM {
            x[i] = self.shift[i] + self.scale[i] * x[i];
        }
        (x, logdet)
    }

    /// `z = f⁻¹(theta)` and `log |det ∂f⁻¹/∂theta|`.
    pub fn inverse(&self, theta: &[f64; DIM]) -> ([f64; DIM], f64) {
        let mut hidden = vec![0.0; self.hidden()];
        let mut x = [0.0; DIM];
        for i in 0..DIM {
            x[i] = (theta[i] - self.shift[i]) / self.scale[i];
        }
        let mut logdet = -self.whitening_logdet();
        for layer in self.layers.iter().rev() {
            let (y, ld) = layer.inverse(&x, &mut hidden);
            x = y;
            logdet += ld;
        }
        (x, logdet)
    }

    pub fn log_prob(&self, theta: &[f64; DIM]) -> f64 {
        let (z, logdet) = self.inverse(theta);
        std_normal_log_pdf(&z) + logdet
    }

    /// Pushes a batch of prior draws through the flow, layer by layer.
    pub fn forward_batch(&self, zs: &[[f64; DIM]]) -> Vec<[f64; DIM]> {
        let mut hidden = vec![0.0; self.hidden()];
        let mut out = zs.to_vec();
        for layer in &self.layers {
            for x in out.iter_mut() {
                *x = layer.forward(x, &mut hidden).0;
            }
        }
        for x in out.iter_mut() {
            for i in 0..DIM {
                x[i] = self.shift[i] + self.scale[i] * x[i];
            }
        }
        out
    }

    /// `n` iid draws from the model.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<[f64; DIM]> {
        let zs: Vec<[f64; DIM]> = (0..n).map(|_| draw_prior(rng)).collect();
        self.forward_batch(&zs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.params.iter().copied()).collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.params.len();
            l.params.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    /// Mean negative log-likelihood of `batch` and its gradient with respect to
    /// `params()`, by reverse-mode differentiation through the inverse pass.
    pub fn nll_and_grad(&self, batch: &[[f64; DIM]]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.param_count()];
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let o = *acc;
                *acc += l.params.len();
                Some(o)
            })
            .collect();
        let mut traces = vec![InverseTrace::default(); self.layers.len()];
        let mut total = 0.0;
        for theta in batch {
            let mut x = [0.0; DIM];
            for i in 0..DIM {
                x[i] = (theta[i] - self.shift[i]) / self.scale[i];
            }
            let mut logdet = -self.whitening_logdet();
            for (l, layer) in self.layers.iter().enumerate().rev() {
                let (y, ld) = layer.inverse_traced(&x, &mut traces[l]);
                x = y;
                logdet += ld;
            }
            total += -(std_normal_log_pdf(&x) + logdet);
            // d(½|z|²)/dz = z
            let mut g = x;
            for (l, layer) in self.layers.iter().enumerate() {
                let n = layer.params.len();
                g = layer.inverse_backward(&traces[l], &g, &mut grad[offsets[l]..offsets[l] + n]);
            }
        }
        let inv = 1.0 / batch.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        (total * inv, grad)
    }

    /// Mean negative log-likelihood.
    pub fn nll(&self, data: &[[f64; DIM]]) -> f64 {
        -data.iter().map(|t| self.log_prob(t)).sum::<f64>() / data.len().max(1) as f64
    }
}

pub fn draw_prior(rng: &mut impl Rng) -> [f64; DIM] {
    let mut z = [0.0; DIM];
    for v in z.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perturbed_model(seed: u64) -> FlowModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = FlowModel::new(4, 16, [3.0, 0.1, -0.1, 0.0], [1.2, 0.3, 0.25, 0.2], &mut rng);
        let mut p = m.params();
        let n = rand_distr::Normal::new(0.0, 0.3).unwrap();
        for v in p.iter_mut() {
            *v += rand_distr::Distribution::sample(&n, &mut rng);
        }
        m.set_params(&p);
        m
    }

    #[test]
    fn identity_init_is_whitening_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shift = [3.0, 0.1, -0.2, 0.05];
        let scale = [1.5, 0.2, 0.3, 0.4];
        let m = FlowModel::new(4, 16, shift, scale, &mut rng);
        let z = [0.3, -1.2, 2.0, 0.0];
        let (theta, logdet) = m.forward(&z);
        for i in 0..DIM {
            assert!((theta[i] - (shift[i] + scale[i] * z[i])).abs() < 1e-15);
        }
        let expected: f64 = scale.iter().map(|s| s.ln()).sum();
        assert!((logdet - expected).abs() < 1e-15);

        // log density at the mode
        let lp = m.log_prob(&shift);
        assert!((lp - (-2.0 * (2.0 * std::f64::consts::PI).ln() - expected)).abs() < 1e-12);
    }

    #[test]
    fn bijection_and_logdet_cancel() {
        let m = perturbed_model(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let z = draw_prior(&mut rng);
            let (theta, ld_f) = m.forward(&z);
            let (back, ld_i) = m.inverse(&theta);
            for i in 0..DIM {
                assert!((back[i] - z[i]).abs() < 1e-6);
            }
            assert!((ld_f + ld_i).abs() < 1e-6);
        }
    }

    #[test]
    fn batch_matches_single() {
        let m = perturbed_model(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zs: Vec<_> = (0..64).map(|_| draw_prior(&mut rng)).collect();
        for (z, t) in zs.iter().zip(m.forward_batch(&zs)) {
            assert_eq!(m.forward(z).0, t);
        }
        assert!(m.sample(0, &mut rng).is_empty());
    }

    #[test]
    fn forward_logdet_matches_numeric_jacobian() {
        let m = perturbed_model(6);
        let z = [0.4, -0.7, 1.1, 0.2];
        let h = 1e-6;
        let mut jac = [[0.0; DIM]; DIM];
        for j in 0..DIM {
            let (mut a, mut b) = (z, z);
            a[j] += h;
            b[j] -= h;
            let (fa, fb) = (m.forward(&a).0, m.forward(&b).0);
            for i in 0..DIM {
                jac[i][j] = (fa[i] - fb[i]) / (2.0 * h);
            }
        }
        let det = det4(jac);
        assert!((det.abs().ln() - m.forward(&z).1).abs() < 1e-6);
    }

    fn det4(m: [[f64; 4]; 4]) -> f64 {
        // Laplace expansion along the first row
        let minor = |skip: usize| -> f64 {
            let rows: Vec<[f64; 3]> = (1..4)
                .map(|r| {
                    let v: Vec<f64> = (0..4).filter(|&c| c != skip).map(|c| m[r][c]).collect();
                    [v[0], v[1], v[2]]
                })
                .collect();
            rows[0][0] * (rows[1][1] * rows[2][2] - rows[1][2] * rows[2][1])
                - rows[0][1] * (rows[1][0] * rows[2][2] - rows[1][2] * rows[2][0])
                + rows[0][2] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0])
        };
        (0..4).map(|c| if c % 2 == 0 { 1.0 } else { -1.0 } * m[0][c] * minor(c)).sum()
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let m = perturbed_model(7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let batch: Vec<_> = m.sample(32, &mut rng);
        let (_, grad) = m.nll_and_grad(&batch);
        let base = m.params();
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let k = rand::Rng::random_range(&mut rng, 0..base.len());
            let mut probe = m.clone();
            let mut p = base.clone();
            p[k] += eps;
            probe.set_params(&p);
            let up = probe.nll(&batch);
            p[k] -= 2.0 * eps;
            probe.set_params(&p);
            let down = probe.nll(&batch);
            let fd = (up - down) / (2.0 * eps);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }
}
