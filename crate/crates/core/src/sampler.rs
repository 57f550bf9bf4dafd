//! Block-Gibbs sampling over `(v, h, label)` with optional clamping.
//!
//! One sweep refreshes the hidden layer from `(v, label)` and then the
//! unclamped blocks from `h`, in the order h -> v -> label. Each chain owns
//! its random stream, so results do not depend on how chains are spread
//! over worker threads.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{check_label, ChainState, Layout, ModelParams};
use crate::numerics::{argmax, logistic};
use crate::rng::{chain_rng, ChainRng};

/// Which block, if any, is held fixed during sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClampMode {
    /// Sample `h`, then `v` and the label.
    Free,
    /// Conditional generation: the label never changes.
    ClampLabel,
    /// Label prediction: the visible layer never changes.
    ClampVisible,
}

/// How a predicted label is read from a visible-clamped chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Readout {
    /// `argmax_m p(label = m | h)` at the final hidden configuration.
    #[default]
    FinalArgmax,
    /// The label sampled in the final sweep.
    FinalSample,
}

/// A set of independent Markov chains sharing one layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPool {
    layout: Layout,
    states: Vec<ChainState>,
    rngs: Vec<ChainRng>,
    seed: u64,
    step_counter: u64,
}

impl ChainPool {
    /// Draws `pool_size` chains from the uniform initial distribution.
    pub fn init_random(pool_size: usize, layout: Layout, seed: u64) -> Result<Self> {
        if pool_size == 0 {
            return Err(Error::Config("chain pool must contain at least one chain".into()));
        }
        layout.validate()?;
        let (states, rngs) = (0..pool_size)
            .map(|c| {
                let mut rng = chain_rng(seed, c as u64);
                let visible = (0..layout.n_visible)
                    .map(|_| rng.random_range(0..layout.n_states) as u8)
                    .collect();
                let hidden = (0..layout.n_hidden).map(|_| rng.random_range(0..2u8)).collect();
                let label = rng.random_range(0..layout.n_labels);
                (
                    ChainState {
                        visible,
                        hidden,
                        label,
                    },
                    rng,
                )
            })
            .unzip();
        Ok(ChainPool {
            layout,
            states,
            rngs,
            seed,
            step_counter: 0,
        })
    }

    /// Reassembles a pool from stored parts (used when resuming from a checkpoint).
    pub fn from_parts(
        layout: Layout,
        states: Vec<ChainState>,
        rngs: Vec<ChainRng>,
        seed: u64,
        step_counter: u64,
    ) -> Result<Self> {
        if states.is_empty() || states.len() != rngs.len() {
            return Err(Error::Config("pool needs one RNG per chain and at least one chain".into()));
        }
        for s in &states {
            s.validate(&layout)?;
        }
        Ok(ChainPool {
            layout,
            states,
            rngs,
            seed,
            step_counter,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn rngs(&self) -> &[ChainRng] {
        &self.rngs
    }

    /// Overwrites every chain's label.
    pub fn set_labels(&mut self, labels: &[usize]) -> Result<()> {
        if labels.len() != self.states.len() {
            return Err(Error::Config(format!(
                "{} labels for {} chains",
                labels.len(),
                self.states.len()
            )));
        }
        for (state, &label) in self.states.iter_mut().zip(labels) {
            check_label(&self.layout, label)?;
            state.label = label;
        }
        Ok(())
    }

    /// Overwrites every chain's visible layer with the rows of `visible`.
    pub fn set_visible(&mut self, visible: ArrayView2<u8>) -> Result<()> {
        if visible.nrows() != self.states.len() || visible.ncols() != self.layout.n_visible {
            return Err(Error::Config(format!(
                "visible block {:?} does not match pool of {} chains x {} sites",
                visible.dim(),
                self.states.len(),
                self.layout.n_visible
            )));
        }
        if visible.iter().any(|&s| s as usize >= self.layout.n_states) {
            return Err(Error::Config("visible state outside the alphabet".into()));
        }
        for (state, row) in self.states.iter_mut().zip(visible.axis_iter(Axis(0))) {
            state.visible.clear();
            state.visible.extend(row.iter().copied());
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<usize> {
        self.states.iter().map(|s| s.label).collect()
    }

    pub fn visible_matrix(&self) -> Array2<u8> {
        let mut out = Array2::zeros((self.states.len(), self.layout.n_visible));
        for (mut row, s) in out.axis_iter_mut(Axis(0)).zip(&self.states) {
            row.iter_mut().zip(&s.visible).for_each(|(o, &v)| *o = v);
        }
        out
    }

    pub fn hidden_matrix(&self) -> Array2<u8> {
        let mut out = Array2::zeros((self.states.len(), self.layout.n_hidden));
        for (mut row, s) in out.axis_iter_mut(Axis(0)).zip(&self.states) {
            row.iter_mut().zip(&s.hidden).for_each(|(o, &h)| *o = h);
        }
        out
    }
}

/// Read-only sampling kernel: the parameters plus a hidden-major copy of the weights.
struct Kernel<'a> {
    params: &'a ModelParams,
    /// Shape `(n_hidden, n_columns)`.
    weights_t: Vec<f64>,
}

struct Scratch {
    hidden_field: Vec<f64>,
    visible_base: Vec<f64>,
    visible_field: Vec<f64>,
    label_logits: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(params: &'a ModelParams) -> Self {
        let nh = params.layout.n_hidden;
        let ncol = params.layout.n_columns();
        let w = params.weights_flat();
        let mut weights_t = vec![0.0; nh * ncol];
        for col in 0..ncol {
            for mu in 0..nh {
                weights_t[mu * ncol + col] = w[col * nh + mu];
            }
        }
        Kernel { params, weights_t }
    }

    fn scratch(&self) -> Scratch {
        let l = &self.params.layout;
        Scratch {
            hidden_field: vec![0.0; l.n_hidden],
            visible_base: vec![0.0; l.n_hidden],
            visible_field: vec![0.0; l.n_columns()],
            label_logits: vec![0.0; l.n_labels],
        }
    }

    fn run_chain(&self, state: &mut ChainState, rng: &mut ChainRng, mode: ClampMode, k: usize, s: &mut Scratch) {
        let params = self.params;
        let layout = &params.layout;
        let nh = layout.n_hidden;
        if mode == ClampVisible && k > 0 {
            params.hidden_field_visible_part(&state.visible, &mut s.visible_base);
        }
        for _ in 0..k {
            if mode == ClampVisible {
                let d = &params.label_weights_flat()[state.label * nh..(state.label + 1) * nh];
                for ((f, base), dm) in s.hidden_field.iter_mut().zip(&s.visible_base).zip(d) {
                    *f = base + dm;
                }
            } else {
                params.hidden_field_into(&state.visible, state.label, &mut s.hidden_field);
            }
            for (h, &field) in state.hidden.iter_mut().zip(&s.hidden_field) {
                *h = u8::from(rng.random::<f64>() < logistic(field));
            }
            if mode != ClampVisible {
                self.sample_visible(state, rng, s);
            }
            if mode != ClampLabel {
                params.label_logits_into(&state.hidden, &mut s.label_logits);
                state.label = sample_categorical(&mut s.label_logits, rng);
            }
        }
    }

    fn sample_visible(&self, state: &mut ChainState, rng: &mut ChainRng, s: &mut Scratch) {
        let layout = &self.params.layout;
        let ncol = layout.n_columns();
        let field = &mut s.visible_field;
        field.copy_from_slice(self.params.visible_bias_flat());
        for (mu, &h) in state.hidden.iter().enumerate() {
            if h == 1 {
                let row = &self.weights_t[mu * ncol..(mu + 1) * ncol];
                for (f, w) in field.iter_mut().zip(row) {
                    *f += w;
                }
            }
        }
        if layout.is_binary() {
            for (v, &x) in state.visible.iter_mut().zip(field.iter()) {
                *v = u8::from(rng.random::<f64>() < logistic(x));
            }
        } else {
            let q = layout.n_states;
            for (v, logits) in state.visible.iter_mut().zip(field.chunks_exact_mut(q)) {
                *v = sample_categorical(logits, rng) as u8;
            }
        }
    }
}

use ClampMode::{ClampLabel, ClampVisible};

/// Draws an index from `softmax(logits)`; `logits` is used as scratch.
fn sample_categorical(logits: &mut [f64], rng: &mut ChainRng) -> usize {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in logits.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in logits.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // Only reachable through rounding in the cumulative sum.
    logits.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn check_pool(pool: &ChainPool, params: &ModelParams) -> Result<()> {
    if pool.layout != params.layout {
        return Err(Error::Config(format!(
            "pool layout {:?} does not match model layout {:?}",
            pool.layout, params.layout
        )));
    }
    Ok(())
}

/// Applies one sweep to every chain of the pool.
pub fn gibbs_sweep(pool: &mut ChainPool, params: &ModelParams, mode: ClampMode) -> Result<()> {
    run(pool, params, mode, 1)
}

/// Applies `k` sweeps to every chain; `k = 0` leaves the pool untouched.
pub fn run(pool: &mut ChainPool, params: &ModelParams, mode: ClampMode, k: usize) -> Result<()> {
    check_pool(pool, params)?;
    if k == 0 {
        return Ok(());
    }
    let kernel = Kernel::new(params);
    pool.states
        .par_iter_mut()
        .zip(pool.rngs.par_iter_mut())
        .for_each_init(
            || kernel.scratch(),
            |scratch, (state, rng)| kernel.run_chain(state, rng, mode, k, scratch),
        );
    pool.step_counter += k as u64;
    Ok(())
}

/// Labels currently held by a visible-clamped pool, read out as requested.
pub fn readout_labels(pool: &ChainPool, params: &ModelParams, readout: Readout) -> Result<Vec<usize>> {
    check_pool(pool, params)?;
    Ok(match readout {
        Readout::FinalSample => pool.labels(),
        Readout::FinalArgmax => pool
            .states
            .par_iter()
            .map(|s| {
                let mut logits = vec![0.0; params.layout.n_labels];
                params.label_logits_into(&s.hidden, &mut logits);
                argmax(&logits)
            })
            .collect(),
    })
}

/// Pool whose visible layers are clamped to `samples`, with random hidden units and labels.
pub fn prediction_pool(samples: ArrayView2<u8>, layout: Layout, seed: u64) -> Result<ChainPool> {
    let mut pool = ChainPool::init_random(samples.nrows(), layout, seed)?;
    pool.set_visible(samples)?;
    Ok(pool)
}

/// Predicts a label for each row of `samples` by `k` visible-clamped sweeps from a random label.
pub fn predict_labels(
    samples: ArrayView2<u8>,
    params: &ModelParams,
    k: usize,
    readout: Readout,
    seed: u64,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Config("label prediction needs at least one sweep".into()));
    }
    if samples.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut pool = prediction_pool(samples, params.layout, seed)?;
    run(&mut pool, params, ClampVisible, k)?;
    readout_labels(&pool, params, readout)
}

/// Pool with one randomly initialized chain per requested label.
pub fn generation_pool(labels: &[usize], layout: Layout, seed: u64) -> Result<ChainPool> {
    let mut pool = ChainPool::init_random(labels.len(), layout, seed)?;
    pool.set_labels(labels)?;
    Ok(pool)
}

/// Conditional generation: one chain per label, `k` label-clamped sweeps from random.
///
/// The returned pool holds the final visible and hidden configurations.
pub fn generate_conditional(labels: &[usize], params: &ModelParams, k: usize, seed: u64) -> Result<ChainPool> {
    if k == 0 {
        return Err(Error::Config("conditional generation needs at least one sweep".into()));
    }
    let mut pool = generation_pool(labels, params.layout, seed)?;
    run(&mut pool, params, ClampLabel, k)?;
    Ok(pool)
}
