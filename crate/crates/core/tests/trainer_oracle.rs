//! Gradient estimators and the training loop against enumeration.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssrbm::data::LabeledDataset;
use ssrbm::exact::{ExactModel, DEFAULT_ENUMERATION_CAP};
use ssrbm::sampler::{self, ChainPool, ClampMode};
use ssrbm::stats::MomentStats;
use ssrbm::trainer::{
    self, apply_moment_gradient, negative_stats_generation, negative_stats_prediction, positive_stats, GradientCombination,
    Minibatch, Regime, ResumeState, TrainConfig, TrainObserver,
};
use ssrbm::{Layout, ModelParams};

fn random_model(layout: Layout, std_dev: f64, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ModelParams::random_gaussian(layout, std_dev, &mut rng)
}

fn random_batch(layout: Layout, m: usize, seed: u64) -> Minibatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Minibatch {
        visible: Array2::from_shape_fn((m, layout.n_visible), |_| rng.random_range(0..layout.n_states) as u8),
        labels: (0..m).map(|_| rng.random_range(0..layout.n_labels)).collect(),
    }
}

fn flat(stats: &MomentStats) -> Vec<f64> {
    stats.groups().iter().flat_map(|(_, g)| g.iter().copied()).collect()
}

fn exact_ll(params: &ModelParams, batch: &Minibatch) -> f64 {
    let exact = ExactModel::new(params, DEFAULT_ENUMERATION_CAP).unwrap();
    exact.log_likelihood(
        batch
            .visible
            .rows()
            .into_iter()
            .map(|r| r.to_slice().unwrap())
            .zip(batch.labels.iter().copied()),
    )
}

#[test]
fn moment_gradient_matches_finite_differences() {
    for (n, layout) in [Layout::new(4, 2, 3, 2).unwrap(), Layout::new(3, 3, 2, 3).unwrap()]
        .into_iter()
        .enumerate()
    {
        let params = random_model(layout, 0.5, n as u64);
        let batch = random_batch(layout, 12, 100 + n as u64);
        let pos = positive_stats(&batch, &params).unwrap();
        let neg = ExactModel::new(&params, DEFAULT_ENUMERATION_CAP).unwrap().moments();
        let analytic: Vec<f64> = flat(&pos).iter().zip(flat(&neg)).map(|(p, q)| p - q).collect();
        let step = 1e-5;
        let mut idx = 0;
        for g in 0..5 {
            let len = params.groups()[g].1.len();
            for i in 0..len {
                let mut plus = params.clone();
                plus.groups_mut()[g].1[i] += step;
                let mut minus = params.clone();
                minus.groups_mut()[g].1[i] -= step;
                let fd = (exact_ll(&plus, &batch) - exact_ll(&minus, &batch)) / (2.0 * step);
                let a = analytic[idx];
                let rel = (fd - a).abs() / a.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-4, "group {g} coordinate {i}: analytic {a}, finite difference {fd}");
                idx += 1;
            }
        }
    }
}

#[test]
fn exact_gradient_ascent_increases_likelihood() {
    let layout = Layout::new(4, 2, 3, 2).unwrap();
    let mut params = random_model(layout, 0.1, 7);
    let batch = random_batch(layout, 20, 8);
    let mut previous = exact_ll(&params, &batch);
    for update in 1..=500 {
        let pos = positive_stats(&batch, &params).unwrap();
        let neg = ExactModel::new(&params, DEFAULT_ENUMERATION_CAP).unwrap().moments();
        apply_moment_gradient(&mut params, &pos, &[&neg], 0.05, update).unwrap();
        let ll = exact_ll(&params, &batch);
        assert!(ll >= previous - 1e-12, "update {update}: {ll} < {previous}");
        previous = ll;
    }
}

/// Per-chain statistics of a finished pool, for standard errors.
fn per_chain(params: &ModelParams, visible: &Array2<u8>, labels: &[usize]) -> Vec<Vec<f64>> {
    (0..labels.len())
        .map(|r| {
            let row = visible.slice(ndarray::s![r..r + 1, ..]);
            flat(&MomentStats::from_conditional_means(params, row, &labels[r..r + 1]))
        })
        .collect()
}

fn assert_within_standard_errors(samples: &[Vec<f64>], expected: &[f64], k_sigma: f64) {
    let n = samples.len() as f64;
    for (j, e) in expected.iter().enumerate() {
        let mean = samples.iter().map(|s| s[j]).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - e).abs() <= k_sigma * se + 1e-12, "stat {j}: {mean} vs {e} (se {se})");
    }
}

#[test]
fn generation_estimator_is_consistent() {
    let layout = Layout::new(4, 2, 3, 2).unwrap();
    let params = random_model(layout, 0.5, 21);
    let exact = ExactModel::new(&params, DEFAULT_ENUMERATION_CAP).unwrap();
    let labels: Vec<usize> = (0..2000).map(|i| i % 2).collect();
    let pool = sampler::generate_conditional(&labels, &params, 10_000, 5).unwrap();
    let samples = per_chain(&params, &pool.visible_matrix(), &labels);
    let per_label: Vec<Vec<f64>> = (0..2).map(|l| flat(&exact.moments_given_label(l))).collect();
    let expected: Vec<f64> = (0..per_label[0].len()).map(|j| 0.5 * (per_label[0][j] + per_label[1][j])).collect();
    assert_within_standard_errors(&samples, &expected, 3.0);

    let direct = negative_stats_generation(&labels, &params, 10, 3).unwrap();
    assert_eq!(direct.label.to_vec(), vec![0.5, 0.5]);
}

#[test]
fn prediction_estimator_is_consistent() {
    let layout = Layout::new(4, 2, 3, 3).unwrap();
    let params = random_model(layout, 0.8, 22);
    let exact = ExactModel::new(&params, DEFAULT_ENUMERATION_CAP).unwrap();
    let batch = random_batch(layout, 4, 9);
    let n_rep = 500;
    let visible = Array2::from_shape_fn((4 * n_rep, layout.n_visible), |(r, j)| batch.visible[[r % 4, j]]);
    let mut pool = sampler::prediction_pool(visible.view(), layout, 77).unwrap();
    sampler::run(&mut pool, &params, ClampMode::ClampVisible, 200).unwrap();
    let labels = pool.labels();
    for l in 0..3 {
        let expected: f64 = (0..4)
            .map(|r| exact.label_given_visible(batch.visible.row(r).as_slice().unwrap())[l])
            .sum::<f64>()
            / 4.0;
        let ind: Vec<Vec<f64>> = labels.iter().map(|&x| vec![f64::from(u8::from(x == l))]).collect();
        assert_within_standard_errors(&ind, &[expected], 3.0);
    }

    let pos = positive_stats(&batch, &params).unwrap();
    let neg = negative_stats_prediction(batch.visible.view(), &params, 10, 4).unwrap();
    assert_eq!(pos.visible, neg.visible);
}

#[test]
fn decoupled_label_stays_uniform() {
    let layout = Layout::new(5, 2, 4, 4).unwrap();
    let mut params = random_model(layout, 0.5, 23);
    params.label_weights.fill(0.0);
    params.label_bias.fill(0.0);
    let m = 8000;
    let visible = Array2::from_shape_fn((m, 5), |(r, j)| ((r >> j) & 1) as u8);
    for k in [1, 25] {
        let neg = negative_stats_prediction(visible.view(), &params, k, 11).unwrap();
        let se = (0.25f64 * 0.75 / m as f64).sqrt();
        for &p in neg.label.iter() {
            assert!((p - 0.25).abs() < 4.0 * se, "k {k}: {p}");
        }
    }
}

#[test]
fn pcd_pool_is_carried_between_updates() {
    let layout = Layout::new(6, 3, 4, 2).unwrap();
    let mut params = random_model(layout, 0.3, 31);
    let mut config = TrainConfig::new(Regime::Pcd, 4);
    config.k = 7;
    let mut pool = ChainPool::init_random(5, layout, 3).unwrap();
    for update in 1..=3 {
        let batch = random_batch(layout, 5, update);
        let before_params = params.clone();
        let mut expected = pool.clone();
        sampler::run(&mut expected, &before_params, ClampMode::Free, config.k).unwrap();
        trainer::pcd_update(&mut params, &batch, &mut pool, &config, update).unwrap();
        assert_eq!(pool, expected);
        assert_eq!(pool.step_counter(), 7 * update);
    }
}

fn toy_dataset(m: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = (0..m).map(|i| ["x", "y", "z"][i % 3].to_string()).collect();
    LabeledDataset::from_named_labels(
        Array2::from_shape_fn((m, 8), |(r, j)| u8::from(rng.random_bool(if (r % 3) * 3 <= j { 0.8 } else { 0.2 }))),
        Some(names),
        vec!['0', '1'],
        (0..m).map(|i| i.to_string()).collect(),
        vec![],
    )
    .unwrap()
}

#[derive(Default)]
struct Recorder {
    checkpoints: Vec<(u64, ModelParams, Option<ChainPool>)>,
    updates: Vec<u64>,
}

impl TrainObserver for Recorder {
    fn on_update(&mut self, record: &trainer::LogRecord) -> ssrbm::Result<()> {
        self.updates.push(record.update);
        Ok(())
    }

    fn on_checkpoint(&mut self, update: u64, params: &ModelParams, pool: Option<&ChainPool>) -> ssrbm::Result<()> {
        self.checkpoints.push((update, params.clone(), pool.cloned()));
        Ok(())
    }
}

fn small_config(regime: Regime) -> TrainConfig {
    let mut c = TrainConfig::new(regime, 5);
    c.k = 3;
    c.minibatch_size = 7;
    c.total_updates = 12;
    c.seed = 99;
    c
}

#[test]
fn schedule_controls_emitted_models() {
    let data = toy_dataset(30, 1);
    let mut rec = Recorder::default();
    trainer::train(&data, &small_config(Regime::Ff), &mut rec).unwrap();
    assert_eq!(rec.checkpoints.iter().map(|c| c.0).collect::<Vec<_>>(), vec![12]);
    assert_eq!(rec.updates, (1..=12).collect::<Vec<_>>());

    let mut config = small_config(Regime::Ff);
    config.checkpoint_schedule = vec![0, 5, 12];
    let mut rec = Recorder::default();
    trainer::train(&data, &config, &mut rec).unwrap();
    assert_eq!(rec.checkpoints.iter().map(|c| c.0).collect::<Vec<_>>(), vec![0, 5, 12]);

    config.total_updates = 0;
    let mut rec = Recorder::default();
    let out = trainer::train(&data, &config, &mut rec).unwrap();
    assert_eq!(rec.checkpoints.len(), 1);
    assert_eq!(rec.checkpoints[0].0, 0);
    assert!(out.log.is_empty());
}

#[test]
fn training_is_deterministic_and_resumable() {
    let data = toy_dataset(30, 2);
    for regime in [Regime::Ff, Regime::FfGenerationOnly, Regime::Pcd] {
        let mut config = small_config(regime);
        config.checkpoint_schedule = vec![5];
        let mut rec = Recorder::default();
        let full = trainer::train(&data, &config, &mut rec).unwrap();
        let again = trainer::train(&data, &config, &mut ()).unwrap();
        assert_eq!(full.params, again.params, "{regime:?}");

        let (_, mid_params, mid_pool) = rec.checkpoints[0].clone();
        let resumed = trainer::train_from(
            &data,
            &config,
            ResumeState {
                params: Some(mid_params),
                pool: mid_pool,
                update: 5,
            },
            &mut (),
        )
        .unwrap();
        assert_eq!(full.params, resumed.params, "{regime:?}");
        assert_eq!(full.pool, resumed.pool, "{regime:?}");
    }
}

#[test]
fn alternate_combination_uses_one_phase_per_update() {
    let layout = Layout::new(5, 2, 3, 2).unwrap();
    let params = random_model(layout, 0.3, 41);
    let batch = random_batch(layout, 6, 42);
    let mut config = TrainConfig::new(Regime::Ff, 3);
    config.combination = GradientCombination::Alternate;
    config.k = 2;
    let pos = positive_stats(&batch, &params).unwrap();
    // Odd updates ignore the prediction phase, even ones the generation phase.
    let gen = negative_stats_generation(&batch.labels, &params, 2, 1).unwrap();
    let mut a = params.clone();
    trainer::ff_step_from_stats(&mut a, &pos, Some(&gen), None, &config, 1).unwrap();
    let mut b = params.clone();
    apply_moment_gradient(&mut b, &pos, &[&gen], config.learning_rate, 1).unwrap();
    assert_eq!(a, b);
    assert!(trainer::ff_step_from_stats(&mut a, &pos, Some(&gen), None, &config, 2).is_err());
}

#[test]
fn initialization_matches_independent_site_fit() {
    let data = toy_dataset(300, 3);
    let layout = trainer::layout_for(&data, 16).unwrap();
    let params = trainer::init_params(data.samples.view(), &data.labels, layout, 5).unwrap();
    for i in 0..8 {
        let f = data.samples.column(i).iter().filter(|&&s| s == 1).count() as f64 / 300.0;
        let f = (1.0 - 1e-3) * f + 1e-3 / 2.0;
        assert!((params.visible_bias[[i, 0]] - (f / (1.0 - f)).ln()).abs() < 1e-12);
    }
    let std = (params.weights.iter().map(|w| w * w).sum::<f64>() / params.weights.len() as f64).sqrt();
    assert!((std - 0.01).abs() < 0.002, "{std}");
    assert!(params.hidden_bias.iter().all(|&b| b == 0.0));
    let c = &params.label_bias;
    assert!((c[0] - c[1]).abs() < 1e-12 && (c[1] - c[2]).abs() < 1e-12);
}
