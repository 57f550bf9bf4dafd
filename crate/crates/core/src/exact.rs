//! Brute-force enumeration of the Boltzmann distribution.
//!
//! Only usable on tiny models: every `(v, h, label)` configuration is
//! visited and weighted by `exp(-E)` computed from [`ModelParams::energy`].
//! Nothing here goes through the closed-form conditionals, so it serves as
//! the reference the sampler, the conditionals and the trainer are checked
//! against.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{ChainState, Layout, ModelParams};
use crate::numerics::log_sum_exp;
use crate::stats::{MomentAccumulator, MomentStats};

/// Default ceiling on `q^n_visible * 2^n_hidden * n_labels`.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 22;

/// Number of joint configurations, or `None` on overflow.
pub fn configuration_count(layout: &Layout) -> Option<u128> {
    let q = layout.n_states as u128;
    let mut total: u128 = 1;
    for _ in 0..layout.n_visible {
        total = total.checked_mul(q)?;
    }
    let hidden = 1u128.checked_shl(u32::try_from(layout.n_hidden).ok()?)?;
    total.checked_mul(hidden)?.checked_mul(layout.n_labels as u128)
}

/// Partition function `Z` by full enumeration.
pub fn exact_partition_function(params: &ModelParams, cap: u128) -> Result<f64> {
    Ok(ExactModel::new(params, cap)?.log_partition().exp())
}

/// Decodes a visible configuration from its mixed-radix index (site 0 least significant).
pub fn decode_visible(layout: &Layout, mut index: usize) -> Vec<u8> {
    let q = layout.n_states;
    (0..layout.n_visible)
        .map(|_| {
            let s = (index % q) as u8;
            index /= q;
            s
        })
        .collect()
}

pub fn encode_visible(layout: &Layout, visible: &[u8]) -> usize {
    visible
        .iter()
        .rev()
        .fold(0, |acc, &s| acc * layout.n_states + s as usize)
}

pub fn decode_hidden(layout: &Layout, index: usize) -> Vec<u8> {
    (0..layout.n_hidden).map(|mu| ((index >> mu) & 1) as u8).collect()
}

pub fn encode_hidden(hidden: &[u8]) -> usize {
    hidden
        .iter()
        .enumerate()
        .fold(0, |acc, (mu, &h)| acc | ((h as usize) << mu))
}

/// The full joint distribution of a tiny model.
#[derive(Debug, Clone)]
pub struct ExactModel {
    layout: Layout,
    n_visible_configs: usize,
    n_hidden_configs: usize,
    /// `-E(v, h, l)` indexed by `(v * n_hidden_configs + h) * n_labels + l`.
    log_weights: Vec<f64>,
    log_z: f64,
}

impl ExactModel {
    pub fn new(params: &ModelParams, cap: u128) -> Result<Self> {
        let layout = params.layout;
        let needed = configuration_count(&layout).unwrap_or(u128::MAX);
        if needed > cap {
            return Err(Error::EnumerationCap { needed, cap });
        }
        let n_visible_configs = layout.n_states.pow(layout.n_visible as u32);
        let n_hidden_configs = 1usize << layout.n_hidden;
        let mut log_weights = Vec::with_capacity(needed as usize);
        let mut state = ChainState::zeros(&layout);
        for v in 0..n_visible_configs {
            state.visible = decode_visible(&layout, v);
            for h in 0..n_hidden_configs {
                state.hidden = decode_hidden(&layout, h);
                for l in 0..layout.n_labels {
                    state.label = l;
                    log_weights.push(-params.energy(&state)?);
                }
            }
        }
        let log_z = log_sum_exp(&log_weights);
        Ok(ExactModel {
            layout,
            n_visible_configs,
            n_hidden_configs,
            log_weights,
            log_z,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn n_visible_configs(&self) -> usize {
        self.n_visible_configs
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    #[inline]
    fn index(&self, v: usize, h: usize, l: usize) -> usize {
        (v * self.n_hidden_configs + h) * self.layout.n_labels + l
    }

    /// `p(v, h, l)`.
    pub fn joint(&self, v: usize, h: usize, l: usize) -> f64 {
        (self.log_weights[self.index(v, h, l)] - self.log_z).exp()
    }

    /// `log sum_h exp(-E(v, h, l))` by enumeration.
    pub fn log_unnormalized_marginal(&self, v: usize, l: usize) -> f64 {
        let terms: Vec<f64> = (0..self.n_hidden_configs)
            .map(|h| self.log_weights[self.index(v, h, l)])
            .collect();
        log_sum_exp(&terms)
    }

    /// `p(v, l)` indexed by `v * n_labels + l`.
    pub fn visible_label_marginal(&self) -> Vec<f64> {
        let nl = self.layout.n_labels;
        let mut out = vec![0.0; self.n_visible_configs * nl];
        for v in 0..self.n_visible_configs {
            for l in 0..nl {
                out[v * nl + l] = (self.log_unnormalized_marginal(v, l) - self.log_z).exp();
            }
        }
        out
    }

    /// `p(v | l = label)` indexed by visible configuration.
    pub fn visible_given_label(&self, label: usize) -> Vec<f64> {
        let nl = self.layout.n_labels;
        let joint = self.visible_label_marginal();
        let mut out: Vec<f64> = (0..self.n_visible_configs).map(|v| joint[v * nl + label]).collect();
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= total);
        out
    }

    /// `p(l | v)`.
    pub fn label_given_visible(&self, visible: &[u8]) -> Vec<f64> {
        let v = encode_visible(&self.layout, visible);
        let logs: Vec<f64> = (0..self.layout.n_labels)
            .map(|l| self.log_unnormalized_marginal(v, l))
            .collect();
        let norm = log_sum_exp(&logs);
        logs.iter().map(|x| (x - norm).exp()).collect()
    }

    /// `p(h_mu = 1 | v, l)` for every hidden unit, summing over hidden configurations.
    pub fn hidden_given(&self, visible: &[u8], label: usize) -> Vec<f64> {
        let v = encode_visible(&self.layout, visible);
        let norm = self.log_unnormalized_marginal(v, label);
        let mut out = vec![0.0; self.layout.n_hidden];
        for h in 0..self.n_hidden_configs {
            let p = (self.log_weights[self.index(v, h, label)] - norm).exp();
            for (mu, o) in out.iter_mut().enumerate() {
                if (h >> mu) & 1 == 1 {
                    *o += p;
                }
            }
        }
        out
    }

    /// `p(v_i = s | h)`, shape `(n_visible, n_states)`, marginalizing the joint over `v` and `l`.
    pub fn visible_given_hidden(&self, hidden: &[u8]) -> Array2<f64> {
        let h = encode_hidden(hidden);
        let l = &self.layout;
        let mut out = Array2::zeros((l.n_visible, l.n_states));
        let mut total = 0.0;
        for v in 0..self.n_visible_configs {
            let visible = decode_visible(l, v);
            for label in 0..l.n_labels {
                let p = (self.log_weights[self.index(v, h, label)] - self.log_z).exp();
                total += p;
                for (i, &s) in visible.iter().enumerate() {
                    out[[i, s as usize]] += p;
                }
            }
        }
        out.mapv_inplace(|x| x / total);
        out
    }

    /// `p(l | h)` from the joint.
    pub fn label_given_hidden(&self, hidden: &[u8]) -> Vec<f64> {
        let h = encode_hidden(hidden);
        let mut out = vec![0.0; self.layout.n_labels];
        for v in 0..self.n_visible_configs {
            for (label, o) in out.iter_mut().enumerate() {
                *o += (self.log_weights[self.index(v, h, label)] - self.log_z).exp();
            }
        }
        let total: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= total);
        out
    }

    fn moments_where(&self, keep: impl Fn(usize, usize) -> bool) -> MomentStats {
        let l = self.layout;
        let mut acc = MomentAccumulator::new(l);
        let hidden_values: Vec<Vec<f64>> = (0..self.n_hidden_configs)
            .map(|h| decode_hidden(&l, h).into_iter().map(f64::from).collect())
            .collect();
        for v in 0..self.n_visible_configs {
            let visible = decode_visible(&l, v);
            for (h, hv) in hidden_values.iter().enumerate() {
                for label in 0..l.n_labels {
                    if keep(v, label) {
                        let p = self.joint(v, h, label);
                        acc.add(&visible, label, hv, p);
                    }
                }
            }
        }
        acc.finish()
    }

    /// Moments under the model's Boltzmann measure.
    pub fn moments(&self) -> MomentStats {
        self.moments_where(|_, _| true)
    }

    /// Moments under `p(v, h | l = label)`.
    pub fn moments_given_label(&self, label: usize) -> MomentStats {
        self.moments_where(|_, l| l == label)
    }

    /// Moments under `p(h, l | v)` with `v` fixed.
    pub fn moments_given_visible(&self, visible: &[u8]) -> MomentStats {
        let target = encode_visible(&self.layout, visible);
        self.moments_where(|v, _| v == target)
    }

    /// Moments under `p(h | v, l)` with both `v` and `l` fixed.
    pub fn moments_given_pair(&self, visible: &[u8], label: usize) -> MomentStats {
        let target = encode_visible(&self.layout, visible);
        self.moments_where(|v, l| v == target && l == label)
    }

    /// Average log-likelihood `1/M sum_m log p(v_m, l_m)`.
    pub fn log_likelihood<'a, I>(&self, data: I) -> f64
    where
        I: IntoIterator<Item = (&'a [u8], usize)>,
    {
        let mut total = 0.0;
        let mut count = 0usize;
        for (visible, label) in data {
            let v = encode_visible(&self.layout, visible);
            total += self.log_unnormalized_marginal(v, label) - self.log_z;
            count += 1;
        }
        total / count as f64
    }
}
