//! Affine coupling layer with a one-hidden-layer tanh conditioner.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::DIM;

const HALF: usize = DIM / 2;
/// Log-scales are squashed into `(-SCALE_BOUND, SCALE_BOUND)`.
pub const SCALE_BOUND: f64 = 5.0;

/// Transform applied to the non-conditioning coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum TransformKind {
    Affine = 0,
}

impl TransformKind {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(TransformKind::Affine),
            _ => None,
        }
    }
}

/// Intermediate values of one inverse evaluation, kept for backpropagation.
#[derive(Clone, Debug, Default)]
pub(crate) struct InverseTrace {
    y_cond: [f64; HALF],
    hidden: Vec<f64>,
    squash: [f64; HALF],
    scale: [f64; HALF],
    x_trans: [f64; HALF],
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingLayer {
    pub(crate) kind: TransformKind,
    /// Bit `i` set: coordinate `i` passes through and conditions the others.
    pub(crate) mask: u8,
    cond: [usize; HALF],
    trans: [usize; HALF],
    pub(crate) hidden: usize,
    /// `w1 [hidden × HALF] | b1 [hidden] | w2 [2·HALF × hidden] | b2 [2·HALF]`
    pub(crate) params: Vec<f64>,
}

pub(crate) fn param_count(hidden: usize) -> usize {
    hidden * HALF + hidden + 2 * HALF * hidden + 2 * HALF
}

fn split_mask(mask: u8) -> Option<([usize; HALF], [usize; HALF])> {
    let cond: Vec<usize> = (0..DIM).filter(|i| mask & (1 << i) != 0).collect();
    let trans: Vec<usize> = (0..DIM).filter(|i| mask & (1 << i) == 0).collect();
    if cond.len() != HALF || trans.len() != HALF || mask >> DIM != 0 {
        return None;
    }
    Some((cond.try_into().ok()?, trans.try_into().ok()?))
}

impl CouplingLayer {
    /// A layer whose output weights are zero, i.e. the identity map.
    pub fn identity(mask: u8, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut layer = Self::from_params(TransformKind::Affine, mask, hidden, vec![0.0; param_count(hidden)])
            .expect("valid mask");
        let w = Normal::new(0.0, (1.0 / HALF as f64).sqrt()).expect("finite std");
        for p in &mut layer.params[..hidden * HALF] {
            *p = w.sample(rng);
        }
        layer
    }

    pub(crate) fn from_params(kind: TransformKind, mask: u8, hidden: usize, params: Vec<f64>) -> Option<Self> {
        let (cond, trans) = split_mask(mask)?;
        if params.len() != param_count(hidden) || hidden == 0 {
            return None;
        }
        Some(Self {
            kind,
            mask,
            cond,
            trans,
            hidden,
            params,
        })
    }

    #[inline]
    fn offsets(&self) -> (usize, usize, usize) {
        let h = self.hidden;
        let b1 = h * HALF;
        let w2 = b1 + h;
        let b2 = w2 + 2 * HALF * h;
        (b1, w2, b2)
    }

    /// Runs the conditioner. Fills `hidden` with tanh activations and returns
    /// `(raw log-scale squash = tanh(raw / B), shift)`.
    #[inline]
    fn condition(&self, xc: &[f64; HALF], hidden: &mut [f64]) -> ([f64; HALF], [f64; HALF]) {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        for (j, hj) in hidden.iter_mut().enumerate() {
            let mut a = p[b1 + j];
            for c in 0..HALF {
                a += p[j * HALF + c] * xc[c];
            }
            *hj = a.tanh();
        }
        let mut out = [0.0; 2 * HALF];
        for (o, out_o) in out.iter_mut().enumerate() {
            let row = &p[w2 + o * self.hidden..w2 + (o + 1) * self.hidden];
            *out_o = p[b2 + o] + row.iter().zip(hidden.iter()).map(|(w, h)| w * h).sum::<f64>();
        }
        let mut squash = [0.0; HALF];
        let mut shift = [0.0; HALF];
        for j in 0..HALF {
            squash[j] = (out[j] / SCALE_BOUND).tanh();
            shift[j] = out[HALF + j];
        }
        (squash, shift)
    }

    fn gather(&self, v: &[f64; DIM], idx: &[usize; HALF]) -> [f64; HALF] {
        let mut out = [0.0; HALF];
        for (o, &i) in out.iter_mut().zip(idx) {
            *o = v[i];
        }
        out
    }

    /// Prior-side to data-side: `y_t = x_t · exp(s) + t`.
    pub fn forward(&self, x: &[f64; DIM], hidden: &mut [f64]) -> ([f64; DIM], f64) {
        let xc = self.gather(x, &self.cond);
        let (squash, shift) = self.condition(&xc, hidden);
        let mut y = *x;
        let mut logdet = 0.0;
        for j in 0..HALF {
            let s = SCALE_BOUND * squash[j];
            let i = self.trans[j];
            y[i] = x[i] * s.exp() + shift[j];
            logdet += s;
        }
        (y, logdet)
    }

    /// Data-side to prior-side: `x_t = (y_t - t) · exp(-s)`.
    pub fn inverse(&self, y: &[f64; DIM], hidden: &mut [f64]) -> ([f64; DIM], f64) {
        let yc = self.gather(y, &self.cond);
        let (squash, shift) = self.condition(&yc, hidden);
        let mut x = *y;
        let mut logdet = 0.0;
        for j in 0..HALF {
            let s = SCALE_BOUND * squash[j];
            let i = self.trans[j];
            x[i] = (y[i] - shift[j]) * (-s).exp();
            logdet -= s;
        }
        (x, logdet)
    }

    pub(crate) fn inverse_traced(&self, y: &[f64; DIM], trace: &mut InverseTrace) -> ([f64; DIM], f64) {
        trace.hidden.resize(self.hidden, 0.0);
        trace.y_cond = self.gather(y, &self.cond);
        let (squash, shift) = self.condition(&trace.y_cond, &mut trace.hidden);
        let mut x = *y;
        let mut logdet = 0.0;
        for j in 0..HALF {
            let s = SCALE_BOUND * squash[j];
            let i = self.trans[j];
            let e = (-s).exp();
            x[i] = (y[i] - shift[j]) * e;
            trace.squash[j] = squash[j];
            trace.scale[j] = e;
            trace.x_trans[j] = x[i];
            logdet -= s;
        }
        (x, logdet)
    }

    /// Backpropagates through one inverse evaluation of the loss
    /// `L(x) + sum(s)` (the second term is minus this layer's inverse
    /// log-determinant). `gx` is dL/dx; returns dL/dy and accumulates the
    /// parameter gradient into `grad`.
    pub(crate) fn inverse_backward(&self, trace: &InverseTrace, gx: &[f64; DIM], grad: &mut [f64]) -> [f64; DIM] {
        let (b1, w2, b2) = self.offsets();
        let h = self.hidden;
        let p = &self.params;
        let mut gy = *gx;
        let mut g_out = [0.0; 2 * HALF];
        for j in 0..HALF {
            let i = self.trans[j];
            let e = trace.scale[j];
            gy[i] = gx[i] * e;
            let g_shift = -gx[i] * e;
            let g_s = -gx[i] * trace.x_trans[j] + 1.0;
            g_out[j] = g_s * (1.0 - trace.squash[j] * trace.squash[j]);
            g_out[HALF + j] = g_shift;
        }
        let mut g_hidden = vec![0.0; h];
        for (o, &go) in g_out.iter().enumerate() {
            grad[b2 + o] += go;
            let base = w2 + o * h;
            for k in 0..h {
                grad[base + k] += go * trace.hidden[k];
                g_hidden[k] += p[base + k] * go;
            }
        }
        let mut g_cond = [0.0; HALF];
        for k in 0..h {
            let ga = g_hidden[k] * (1.0 - trace.hidden[k] * trace.hidden[k]);
            grad[b1 + k] += ga;
            for c in 0..HALF {
                grad[k * HALF + c] += ga * trace.y_cond[c];
                g_cond[c] += p[k * HALF + c] * ga;
            }
        }
        for (c, &i) in self.cond.iter().enumerate() {
            gy[i] += g_cond[c];
        }
        gy
    }
}
