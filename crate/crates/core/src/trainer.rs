//! Stochastic gradient ascent on the log-likelihood.
//!
//! The gradient of every parameter is the difference between its data
//! moment (positive phase) and a model moment (negative phase). Three
//! negative-phase estimators are provided:
//!
//! * **F&F** (`Regime::Ff`): two out-of-equilibrium estimates taken after
//!   exactly `k` sweeps from random chains, one with the labels clamped to
//!   the minibatch labels (generation) and one with the visible layer
//!   clamped to the minibatch samples (prediction).
//! * **F&F, generation only** (`Regime::FfGenerationOnly`): the first of the two.
//! * **PCD** (`Regime::Pcd`): `k` free sweeps of a persistent pool that is
//!   carried over from one update to the next.
//!
//! Hidden statistics always use conditional means `p(h = 1 | v, label)`.

use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{Layout, ModelParams};
use crate::rng::{derive_seed, tags};
use crate::sampler::{self, ChainPool, ClampMode, Readout};
use crate::stats::MomentStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Ff,
    FfGenerationOnly,
    Pcd,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Ff => "ff",
            Regime::FfGenerationOnly => "ff-gen-only",
            Regime::Pcd => "pcd",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "ff" => Some(Regime::Ff),
            "ff-gen-only" => Some(Regime::FfGenerationOnly),
            "pcd" => Some(Regime::Pcd),
            _ => None,
        }
    }

    /// Default sweeps per update.
    pub fn default_k(self) -> usize {
        match self {
            Regime::Ff | Regime::FfGenerationOnly => 10,
            Regime::Pcd => 100,
        }
    }
}

/// How the generation and prediction gradients of F&F are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientCombination {
    /// Both gradients, averaged, in every update.
    #[default]
    Average,
    /// Odd updates use the generation gradient, even updates the prediction gradient.
    Alternate,
}

/// Dataset families with reference hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetPreset {
    Mnist,
    Hgd,
    Gh30,
    Sam,
    Cmpc,
}

impl DatasetPreset {
    pub fn name(self) -> &'static str {
        match self {
            DatasetPreset::Mnist => "mnist",
            DatasetPreset::Hgd => "hgd",
            DatasetPreset::Gh30 => "gh30",
            DatasetPreset::Sam => "sam",
            DatasetPreset::Cmpc => "cmpc",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Self::Mnist, Self::Hgd, Self::Gh30, Self::Sam, Self::Cmpc]
            .into_iter()
            .find(|p| p.name() == name)
    }

    /// `(minibatch size, total updates, hidden units)` for the given regime.
    pub fn hyperparameters(self, regime: Regime) -> (usize, u64, usize) {
        let pcd = regime == Regime::Pcd;
        match self {
            DatasetPreset::Mnist => (500, 600_000, 1024),
            DatasetPreset::Hgd => (4507, 30_000, 1024),
            DatasetPreset::Gh30 => (1961, 60_000, 1024),
            // Both 100 and 1000 hidden units were used; 100 trains well under both regimes.
            DatasetPreset::Sam => (1000, 120_000, 100),
            DatasetPreset::Cmpc => (2000, 270_000, if pcd { 500 } else { 1024 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub regime: Regime,
    /// Gibbs sweeps per negative-phase estimate.
    pub k: usize,
    pub learning_rate: f64,
    pub minibatch_size: usize,
    pub total_updates: u64,
    pub n_hidden: usize,
    pub seed: u64,
    /// Update indices at which the model is handed to the observer. The
    /// final model is always emitted.
    pub checkpoint_schedule: Vec<u64>,
    pub combination: GradientCombination,
    /// Label readout used when the trained model is evaluated.
    pub readout: Readout,
}

impl TrainConfig {
    pub fn new(regime: Regime, n_hidden: usize) -> Self {
        TrainConfig {
            regime,
            k: regime.default_k(),
            learning_rate: 1e-2,
            minibatch_size: 500,
            total_updates: 1000,
            n_hidden,
            seed: 0,
            checkpoint_schedule: Vec::new(),
            combination: GradientCombination::Average,
            readout: Readout::FinalArgmax,
        }
    }

    pub fn from_preset(preset: DatasetPreset, regime: Regime) -> Self {
        let (minibatch_size, total_updates, n_hidden) = preset.hyperparameters(regime);
        TrainConfig {
            minibatch_size,
            total_updates,
            ..Self::new(regime, n_hidden)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.minibatch_size == 0 {
            return Err(Error::Config("minibatch size must be at least 1".into()));
        }
        if self.n_hidden == 0 {
            return Err(Error::Config("n_hidden must be at least 1".into()));
        }
        Ok(())
    }
}

/// A labeled minibatch in categorical encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub visible: Array2<u8>,
    pub labels: Vec<usize>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// L2 norm of the applied gradient per parameter group (a, b, c, w, d).
pub type GradientNorms = [f64; 5];

/// Data moments, hidden units replaced by their conditional means.
pub fn positive_stats(batch: &Minibatch, params: &ModelParams) -> Result<MomentStats> {
    if batch.is_empty() {
        return Err(Error::Config("positive phase needs a nonempty batch".into()));
    }
    check_batch(batch.visible.view(), Some(&batch.labels), &params.layout)?;
    Ok(MomentStats::from_conditional_means(params, batch.visible.view(), &batch.labels))
}

/// Moments after `k` label-clamped sweeps from random visible configurations.
pub fn negative_stats_generation(labels: &[usize], params: &ModelParams, k: usize, seed: u64) -> Result<MomentStats> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let pool = sampler::generate_conditional(labels, params, k, seed)?;
    Ok(MomentStats::from_conditional_means(params, pool.visible_matrix().view(), labels))
}

/// Moments after `k` visible-clamped sweeps from random labels.
pub fn negative_stats_prediction(visible: ArrayView2<u8>, params: &ModelParams, k: usize, seed: u64) -> Result<MomentStats> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut pool = sampler::prediction_pool(visible, params.layout, seed)?;
    sampler::run(&mut pool, params, ClampMode::ClampVisible, k)?;
    Ok(MomentStats::from_conditional_means(params, visible, &pool.labels()))
}

/// `theta += lr * mean_j (positive - negative_j)`, group by group.
///
/// With a single negative phase this is the plain moment-difference step;
/// with two it is their average. Fails if any parameter stops being finite.
pub fn apply_moment_gradient(
    params: &mut ModelParams,
    positive: &MomentStats,
    negatives: &[&MomentStats],
    learning_rate: f64,
    update: u64,
) -> Result<GradientNorms> {
    let layout = params.layout;
    if negatives.is_empty() {
        return Err(Error::Config("at least one negative phase is required".into()));
    }
    if !positive.layout_matches(&layout) || negatives.iter().any(|n| !n.layout_matches(&layout)) {
        return Err(Error::Config("moment statistics do not match the model layout".into()));
    }
    let n = negatives.len() as f64;
    let pos_groups = positive.groups();
    let neg_groups: Vec<_> = negatives.iter().map(|s| s.groups()).collect();
    let mut norms = [0.0; 5];
    for (g, (name, theta)) in params.groups_mut().into_iter().enumerate() {
        let pos = pos_groups[g].1;
        let mut sq = 0.0;
        for (idx, t) in theta.iter_mut().enumerate() {
            let mut grad = 0.0;
            for neg in &neg_groups {
                grad += pos[idx] - neg[g].1[idx];
            }
            grad /= n;
            sq += grad * grad;
            *t += learning_rate * grad;
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { update, group: name });
        }
        norms[g] = sq.sqrt();
    }
    Ok(norms)
}

/// Applies an F&F step from precomputed moments.
///
/// `prediction` is ignored for the generation-only regime. Under
/// [`GradientCombination::Alternate`] the update index picks which phase is used.
pub fn ff_step_from_stats(
    params: &mut ModelParams,
    positive: &MomentStats,
    generation: Option<&MomentStats>,
    prediction: Option<&MomentStats>,
    config: &TrainConfig,
    update: u64,
) -> Result<GradientNorms> {
    let negatives: Vec<&MomentStats> = match config.regime {
        Regime::FfGenerationOnly => generation.into_iter().collect(),
        Regime::Ff => match ff_phases(config.combination, update) {
            (true, true) => generation.into_iter().chain(prediction).collect(),
            (true, false) => generation.into_iter().collect(),
            (false, true) => prediction.into_iter().collect(),
            (false, false) => unreachable!(),
        },
        Regime::Pcd => return Err(Error::Config("ff_step_from_stats called with the PCD regime".into())),
    };
    let expected = match (config.regime, config.combination) {
        (Regime::Ff, GradientCombination::Average) => 2,
        _ => 1,
    };
    if negatives.len() != expected {
        return Err(Error::Config("missing negative-phase statistics for this update".into()));
    }
    apply_moment_gradient(params, positive, &negatives, config.learning_rate, update)
}

/// Which of the (generation, prediction) phases an F&F update uses.
fn ff_phases(combination: GradientCombination, update: u64) -> (bool, bool) {
    match combination {
        GradientCombination::Average => (true, true),
        GradientCombination::Alternate if update % 2 == 1 => (true, false),
        GradientCombination::Alternate => (false, true),
    }
}

/// One F&F update on `batch`; `seed` seeds this update's fresh chains.
pub fn ff_update(
    params: &mut ModelParams,
    batch: &Minibatch,
    config: &TrainConfig,
    update: u64,
    seed: u64,
) -> Result<GradientNorms> {
    if config.regime == Regime::Pcd {
        return Err(Error::Config("ff_update requires an F&F regime".into()));
    }
    let positive = positive_stats(batch, params)?;
    let (use_gen, use_pred) = match config.regime {
        Regime::FfGenerationOnly => (true, false),
        _ => ff_phases(config.combination, update),
    };
    let generation = use_gen
        .then(|| negative_stats_generation(&batch.labels, params, config.k, derive_seed(seed, tags::GENERATION)))
        .transpose()?;
    let prediction = use_pred
        .then(|| negative_stats_prediction(batch.visible.view(), params, config.k, derive_seed(seed, tags::PREDICTION)))
        .transpose()?;
    ff_step_from_stats(params, &positive, generation.as_ref(), prediction.as_ref(), config, update)
}

/// One PCD update: `k` free sweeps continue the persistent pool.
pub fn pcd_update(
    params: &mut ModelParams,
    batch: &Minibatch,
    pool: &mut ChainPool,
    config: &TrainConfig,
    update: u64,
) -> Result<GradientNorms> {
    if config.regime != Regime::Pcd {
        return Err(Error::Config("pcd_update requires the PCD regime".into()));
    }
    if pool.len() < batch.len() {
        return Err(Error::Config(format!(
            "persistent pool of {} chains is smaller than the minibatch of {}",
            pool.len(),
            batch.len()
        )));
    }
    let positive = positive_stats(batch, params)?;
    sampler::run(pool, params, ClampMode::Free, config.k)?;
    let negative = MomentStats::from_conditional_means(params, pool.visible_matrix().view(), &pool.labels());
    apply_moment_gradient(params, &positive, &[&negative], config.learning_rate, update)
}

fn check_batch(visible: ArrayView2<u8>, labels: Option<&[usize]>, layout: &Layout) -> Result<()> {
    if visible.ncols() != layout.n_visible {
        return Err(Error::Config(format!(
            "batch has {} sites, model expects {}",
            visible.ncols(),
            layout.n_visible
        )));
    }
    if visible.iter().any(|&s| s as usize >= layout.n_states) {
        return Err(Error::Config("batch contains a state outside the alphabet".into()));
    }
    if let Some(labels) = labels {
        if labels.len() != visible.nrows() {
            return Err(Error::Config("one label per batch row is required".into()));
        }
        if labels.iter().any(|&l| l >= layout.n_labels) {
            return Err(Error::Config("batch label outside the model's label range".into()));
        }
    }
    Ok(())
}

/// Mixing weight of the uniform distribution in the regularized frequencies
/// used to initialize the fields.
const INIT_PSEUDOCOUNT: f64 = 1e-3;
const INIT_WEIGHT_STD: f64 = 1e-2;

/// Initial parameters: independent-site fields from the data, small random
/// couplings, zero hidden fields.
pub fn init_params(visible: ArrayView2<u8>, labels: &[usize], layout: Layout, seed: u64) -> Result<ModelParams> {
    layout.validate()?;
    check_batch(visible, Some(labels), &layout)?;
    if labels.is_empty() {
        return Err(Error::Config("cannot initialize from an empty dataset".into()));
    }
    let m = labels.len() as f64;
    let q = layout.n_states;
    let mut params = ModelParams::zeros(layout);

    let mut counts = Array2::<f64>::zeros((layout.n_visible, q));
    for row in visible.axis_iter(Axis(0)) {
        for (i, &s) in row.iter().enumerate() {
            counts[[i, s as usize]] += 1.0;
        }
    }
    let regularize = |count: f64, states: usize| (1.0 - INIT_PSEUDOCOUNT) * count / m + INIT_PSEUDOCOUNT / states as f64;
    for i in 0..layout.n_visible {
        if layout.is_binary() {
            let f = regularize(counts[[i, 1]], 2);
            params.visible_bias[[i, 0]] = (f / (1.0 - f)).ln();
        } else {
            for s in 0..q {
                params.visible_bias[[i, s]] = regularize(counts[[i, s]], q).ln();
            }
        }
    }
    let mut label_counts = vec![0.0; layout.n_labels];
    for &l in labels {
        label_counts[l] += 1.0;
    }
    for (c, &n) in params.label_bias.iter_mut().zip(&label_counts) {
        *c = regularize(n, layout.n_labels).ln();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_WEIGHT_STD).expect("finite std");
    params.weights.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
    params.label_weights.iter_mut().for_each(|d| *d = normal.sample(&mut rng));
    Ok(params)
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub update: u64,
    pub wall_ms: u128,
    pub gradient_norms: GradientNorms,
    pub parameter_norm: f64,
}

impl LogRecord {
    pub const HEADER: &'static str = "update\twall_ms\tgrad_a\tgrad_b\tgrad_c\tgrad_w\tgrad_d\tparam_l2";

    /// Tab-separated line matching [`LogRecord::HEADER`].
    pub fn to_line(&self) -> String {
        let g = &self.gradient_norms;
        format!(
            "{}\t{}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.6e}",
            self.update, self.wall_ms, g[0], g[1], g[2], g[3], g[4], self.parameter_norm
        )
    }
}

/// Hooks called during [`train`]. Both default to doing nothing.
pub trait TrainObserver {
    fn on_update(&mut self, _record: &LogRecord) -> Result<()> {
        Ok(())
    }

    fn on_checkpoint(&mut self, _update: u64, _params: &ModelParams, _pool: Option<&ChainPool>) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Where a run picks up: fresh, or from a saved model (and pool, for PCD).
#[derive(Debug, Clone, Default)]
pub struct ResumeState {
    pub params: Option<ModelParams>,
    pub pool: Option<ChainPool>,
    pub update: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub pool: Option<ChainPool>,
    pub log: Vec<LogRecord>,
}

/// Layout of a model with `n_hidden` hidden units fitted to `dataset`.
pub fn layout_for(dataset: &LabeledDataset, n_hidden: usize) -> Result<Layout> {
    Layout::new(dataset.n_visible(), dataset.alphabet.len(), n_hidden, dataset.label_names.len())
}

/// Deterministic minibatch schedule: each epoch is a fresh seeded
/// permutation cut into `n / batch` slices (the remainder is dropped), so
/// the batch of any update index can be recomputed when resuming.
struct BatchSchedule {
    n: usize,
    batch: usize,
    per_epoch: u64,
    seed: u64,
    epoch: Option<u64>,
    order: Vec<usize>,
}

impl BatchSchedule {
    fn new(n: usize, batch: usize, seed: u64) -> Self {
        let batch = batch.min(n);
        BatchSchedule {
            n,
            batch,
            per_epoch: (n / batch) as u64,
            seed,
            epoch: None,
            order: Vec::new(),
        }
    }

    /// Dataset row indices of 1-based update `update`.
    fn indices(&mut self, update: u64) -> &[usize] {
        let epoch = (update - 1) / self.per_epoch;
        let slot = ((update - 1) % self.per_epoch) as usize;
        if self.epoch != Some(epoch) {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, epoch));
            self.order = (0..self.n).collect();
            self.order.shuffle(&mut rng);
            self.epoch = Some(epoch);
        }
        &self.order[slot * self.batch..(slot + 1) * self.batch]
    }
}

/// Runs the training loop from scratch.
pub fn train(dataset: &LabeledDataset, config: &TrainConfig, observer: &mut dyn TrainObserver) -> Result<TrainOutcome> {
    train_from(dataset, config, ResumeState::default(), observer)
}

/// Runs (or continues) the training loop up to `config.total_updates`.
pub fn train_from(
    dataset: &LabeledDataset,
    config: &TrainConfig,
    resume: ResumeState,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    if !dataset.is_labeled() {
        return Err(Error::Config("training dataset carries no labels".into()));
    }
    let layout = layout_for(dataset, config.n_hidden)?;
    let mut params = match resume.params {
        Some(p) => {
            p.validate()?;
            if p.layout != layout {
                return Err(Error::Config(format!(
                    "resumed model layout {:?} does not match dataset layout {layout:?}",
                    p.layout
                )));
            }
            p
        }
        None => init_params(
            dataset.samples.view(),
            &dataset.labels,
            layout,
            derive_seed(config.seed, tags::INIT),
        )?,
    };
    let mut schedule = BatchSchedule::new(dataset.len(), config.minibatch_size, derive_seed(config.seed, tags::SHUFFLE));
    let mut pool = match (config.regime, resume.pool) {
        (Regime::Pcd, Some(pool)) => Some(pool),
        (Regime::Pcd, None) => Some(ChainPool::init_random(
            schedule.batch,
            layout,
            derive_seed(config.seed, tags::PERSISTENT),
        )?),
        _ => None,
    };

    let emit = |observer: &mut dyn TrainObserver, update: u64, params: &ModelParams, pool: Option<&ChainPool>| {
        observer
            .on_checkpoint(update, params, pool)
            .map_err(|e| Error::CheckpointWrite {
                update,
                source: Box::new(e),
            })
    };

    let start = Instant::now();
    let mut log = Vec::new();
    let first = resume.update;
    if config.checkpoint_schedule.contains(&first) && first < config.total_updates {
        emit(observer, first, &params, pool.as_ref())?;
    }
    for update in first + 1..=config.total_updates {
        let rows = schedule.indices(update);
        let batch = Minibatch {
            visible: dataset.samples.select(Axis(0), rows),
            labels: rows.iter().map(|&r| dataset.labels[r]).collect(),
        };
        let seed = derive_seed(config.seed, tags::UPDATE_BASE + update);
        let gradient_norms = match pool.as_mut() {
            Some(pool) => pcd_update(&mut params, &batch, pool, config, update)?,
            None => ff_update(&mut params, &batch, config, update, seed)?,
        };
        let parameter_norm = params
            .groups()
            .iter()
            .flat_map(|(_, g)| g.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        let record = LogRecord {
            update,
            wall_ms: start.elapsed().as_millis(),
            gradient_norms,
            parameter_norm,
        };
        observer.on_update(&record)?;
        log.push(record);
        if update < config.total_updates && config.checkpoint_schedule.contains(&update) {
            emit(observer, update, &params, pool.as_ref())?;
        }
    }
    emit(observer, config.total_updates.max(first), &params, pool.as_ref())?;
    Ok(TrainOutcome { params, pool, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny_layout() -> Layout {
        Layout::new(4, 2, 3, 2).unwrap()
    }

    #[test]
    fn identical_moments_leave_params_bitwise_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layout = Layout::new(5, 3, 4, 3).unwrap();
        let mut params = ModelParams::random_gaussian(layout, 0.5, &mut rng);
        let before = params.clone();
        let batch = Minibatch {
            visible: array![[0u8, 1, 2, 0, 1], [2, 2, 1, 0, 0]],
            labels: vec![2, 0],
        };
        let stats = positive_stats(&batch, &params).unwrap();
        let config = TrainConfig::new(Regime::Ff, 4);
        ff_step_from_stats(&mut params, &stats, Some(&stats), Some(&stats), &config, 1).unwrap();
        assert_eq!(params, before);
        for (a, b) in params.groups().iter().zip(before.groups().iter()) {
            assert!(a.1.iter().zip(b.1).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn zero_params_positive_phase() {
        let params = ModelParams::zeros(tiny_layout());
        let batch = Minibatch {
            visible: array![[1u8, 0, 1, 1], [0, 0, 1, 0], [1, 1, 1, 0]],
            labels: vec![0, 1, 1],
        };
        let s = positive_stats(&batch, &params).unwrap();
        assert!(s.hidden.iter().all(|&h| h == 0.5));
        for i in 0..4 {
            for mu in 0..3 {
                assert_eq!(s.visible_hidden[[i, 0, mu]], 0.5 * s.visible[[i, 0]]);
            }
        }
    }

    #[test]
    fn one_sample_positive_phase_is_that_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = ModelParams::random_gaussian(tiny_layout(), 0.5, &mut rng);
        let v = [1u8, 0, 0, 1];
        let batch = Minibatch {
            visible: array![[1u8, 0, 0, 1]],
            labels: vec![1],
        };
        let s = positive_stats(&batch, &params).unwrap();
        let ph = params.hidden_activation(&v, 1).unwrap();
        assert_eq!(s.hidden, ph);
        assert_eq!(s.label.to_vec(), vec![0.0, 1.0]);
        assert_eq!(s.visible.column(0).to_vec(), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.label_hidden.row(1), ph);
    }

    #[test]
    fn empty_batch_is_rejected() {
        let params = ModelParams::zeros(tiny_layout());
        let batch = Minibatch {
            visible: Array2::zeros((0, 4)),
            labels: vec![],
        };
        assert!(positive_stats(&batch, &params).is_err());
    }

    #[test]
    fn generation_phase_label_moments_match_batch_histogram() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ModelParams::random_gaussian(Layout::new(4, 2, 3, 3).unwrap(), 0.5, &mut rng);
        let labels = vec![0, 2, 2, 1, 2, 0, 0, 0];
        let s = negative_stats_generation(&labels, &params, 3, 9).unwrap();
        assert_eq!(s.label.to_vec(), vec![0.5, 0.125, 0.375]);
    }

    #[test]
    fn prediction_phase_visible_moments_match_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = ModelParams::random_gaussian(tiny_layout(), 0.5, &mut rng);
        let batch = Minibatch {
            visible: array![[1u8, 0, 1, 1], [0, 0, 1, 0], [1, 1, 1, 0]],
            labels: vec![0, 1, 1],
        };
        let pos = positive_stats(&batch, &params).unwrap();
        let neg = negative_stats_prediction(batch.visible.view(), &params, 5, 3).unwrap();
        assert_eq!(pos.visible, neg.visible);
    }

    #[test]
    fn divergence_is_reported() {
        let layout = tiny_layout();
        let mut params = ModelParams::zeros(layout);
        params.hidden_bias.fill(f64::MAX);
        let mut pos = MomentStats::zeros(&layout);
        pos.hidden.fill(1.0);
        let neg = MomentStats::zeros(&layout);
        let err = apply_moment_gradient(&mut params, &pos, &[&neg], f64::MAX, 7).unwrap_err();
        assert!(matches!(err, Error::Diverged { update: 7, group: "b" }));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::new(Regime::Ff, 8);
        assert!(c.validate().is_ok());
        c.k = 0;
        assert!(c.validate().is_err());
        c.k = 10;
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        c.learning_rate = 0.01;
        c.minibatch_size = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn presets_match_reference_values() {
        let c = TrainConfig::from_preset(DatasetPreset::Mnist, Regime::Ff);
        assert_eq!((c.k, c.learning_rate, c.minibatch_size, c.total_updates, c.n_hidden), (10, 1e-2, 500, 600_000, 1024));
        let p = TrainConfig::from_preset(DatasetPreset::Gh30, Regime::Pcd);
        assert_eq!((p.k, p.minibatch_size, p.total_updates), (100, 1961, 60_000));
        let s = TrainConfig::from_preset(DatasetPreset::Sam, Regime::Ff);
        assert_eq!((s.k, s.learning_rate), (10, 1e-2));
        assert_eq!(DatasetPreset::Cmpc.hyperparameters(Regime::Pcd).2, 500);
    }

    #[test]
    fn batch_schedule_covers_each_epoch_once() {
        let mut schedule = BatchSchedule::new(10, 3, 4);
        let mut seen: Vec<usize> = (1..=3).flat_map(|u| schedule.indices(u).to_vec()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 9);
        let again = BatchSchedule::new(10, 3, 4).indices(2).to_vec();
        assert_eq!(schedule.indices(2), again.as_slice());
    }
}
