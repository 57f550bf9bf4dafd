//! Closed-form conditionals and the Gibbs sampler against brute-force enumeration.

use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssrbm::exact::{decode_hidden, decode_visible, encode_visible, ExactModel, DEFAULT_ENUMERATION_CAP};
use ssrbm::sampler::{self, ChainPool, ClampMode, Readout};
use ssrbm::stats::MomentStats;
use ssrbm::{Layout, ModelParams};

fn random_model(layout: Layout, std_dev: f64, seed: u64) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ModelParams::random_gaussian(layout, std_dev, &mut rng)
}

fn layouts() -> Vec<Layout> {
    vec![
        Layout::new(4, 2, 3, 2).unwrap(),
        Layout::new(3, 3, 2, 3).unwrap(),
        Layout::new(2, 5, 3, 2).unwrap(),
    ]
}

fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[test]
fn conditionals_match_enumeration() {
    for (n, layout) in layouts().into_iter().enumerate() {
        let params = random_model(layout, 0.8, n as u64);
        let exact = ExactModel::new(&params, DEFAULT_ENUMERATION_CAP).unwrap();
        for v in 0..exact.n_visible_configs() {
            let visible = decode_visible(&layout, v);
            let p_label = exact.label_given_visible(&visible);
            for label in 0..layout.n_labels {
                let h = params.hidden_activation(&visible, label).unwrap();
                for (a, b) in h.iter().zip(exact.hidden_given(&visible, label)) {
                    assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
                }
                let f = params.free_energy(&visible, label).unwrap();
                let log_p = exact.log_unnormalized_marginal(v, label);
                assert_abs_diff_eq!(-f, log_p, epsilon = 1e-10);
                // p(l | v) from free energies.
                let logits: Vec<f64> = (0..layout.n_labels)
                    .map(|m| -params.free_energy(&visible, m).unwrap())
                    .collect();
                let norm = ssrbm::numerics::log_sum_exp(&logits);
                assert_abs_diff_eq!((logits[label] - norm).exp(), p_label[label], epsilon = 1e-10);
            }
        }
        for hidx in 0..1usize << layout.n_hidden {
            let hidden = decode_hidden(&layout, hidx);
            let pv = params.visible_activation(&hidden).unwrap();
            let ev = exact.visible_given_hidden(&hidden);
            for (a, b) in pv.iter().zip(ev.iter()) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
            }
            let pl = params.label_activation(&hidden).unwrap();
            for (a, b) in pl.iter().zip(exact.label_given_hidden(&hidden)) {
                assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
            }
        }
    }
}

#[test]
fn positive_phase_matches_enumerated_posterior() {
    for (n, layout) in layouts().into_iter().enumerate() {
        let params = random_model(layout, 0.8, 10 + n as u64);
        let exact = ExactModel::new(&params, DEFAULT_ENUMERATION_CAP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let pool = ChainPool::init_random(7, layout, rand::Rng::random(&mut rng)).unwrap();
        let visible = pool.visible_matrix();
        let labels = pool.labels();
        let stats = MomentStats::from_conditional_means(&params, visible.view(), &labels);
        // Oracle: average of enumerated posterior moments.
        let mut expected = vec![0.0; flat(&stats).len()];
        for (r, &l) in labels.iter().enumerate() {
            let m = exact.moments_given_pair(visible.row(r).as_slice().unwrap(), l);
            for (e, x) in expected.iter_mut().zip(flat(&m)) {
                *e += x / labels.len() as f64;
            }
        }
        for (x, y) in flat(&stats).iter().zip(&expected) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-10);
        }
    }
}

fn flat(stats: &MomentStats) -> Vec<f64> {
    stats.groups().iter().flat_map(|(_, g)| g.iter().copied()).collect()
}

/// Empirical `(v, label)` histogram of a pool sampled every sweep.
fn sampled_marginal(pool: &mut ChainPool, params: &ModelParams, mode: ClampMode, burn_in: usize, sweeps: usize) -> Vec<f64> {
    let layout = params.layout;
    let nl = layout.n_labels;
    let n_configs = layout.n_states.pow(layout.n_visible as u32) * nl;
    let mut counts = vec![0.0; n_configs];
    sampler::run(pool, params, mode, burn_in).unwrap();
    for _ in 0..sweeps {
        sampler::run(pool, params, mode, 1).unwrap();
        for s in pool.states() {
            counts[encode_visible(&layout, &s.visible) * nl + s.label] += 1.0;
        }
    }
    let total: f64 = counts.iter().sum();
    counts.iter_mut().for_each(|c| *c /= total);
    counts
}

#[test]
fn free_sampler_matches_joint_marginal() {
    for (n, layout) in layouts().into_iter().enumerate() {
        let params = random_model(layout, 0.5, 20 + n as u64);
        let exact = ExactModel::new(&params, DEFAULT_ENUMERATION_CAP).unwrap();
        let mut pool = ChainPool::init_random(20, layout, n as u64).unwrap();
        let empirical = sampled_marginal(&mut pool, &params, ClampMode::Free, 100, 10_000);
        let tv = total_variation(&empirical, &exact.visible_label_marginal());
        assert!(tv < 0.02, "layout {layout:?}: TV {tv}");
    }
}

#[test]
fn label_clamped_sampler_matches_conditional() {
    let layout = Layout::new(4, 2, 3, 3).unwrap();
    let params = random_model(layout, 0.7, 31);
    let exact = ExactModel::new(&params, DEFAULT_ENUMERATION_CAP).unwrap();
    for label in 0..3 {
        let mut pool = sampler::generation_pool(&vec![label; 20], layout, 5 + label as u64).unwrap();
        let joint = sampled_marginal(&mut pool, &params, ClampMode::ClampLabel, 100, 10_000);
        let visible: Vec<f64> = joint.chunks(3).map(|c| c[label]).collect();
        let tv = total_variation(&visible, &exact.visible_given_label(label));
        assert!(tv < 0.02, "label {label}: TV {tv}");
    }
}

#[test]
fn sampled_label_readout_matches_posterior() {
    let layout = Layout::new(3, 3, 3, 3).unwrap();
    let params = random_model(layout, 1.0, 41);
    let exact = ExactModel::new(&params, DEFAULT_ENUMERATION_CAP).unwrap();
    let visible = [2u8, 0, 1];
    let n = 20_000;
    let samples = ndarray::Array2::from_shape_fn((n, 3), |(_, j)| visible[j]);
    let predicted = sampler::predict_labels(samples.view(), &params, 50, Readout::FinalSample, 7).unwrap();
    let expected = exact.label_given_visible(&visible);
    for (l, p) in expected.iter().enumerate() {
        let freq = predicted.iter().filter(|&&x| x == l).count() as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * sigma + 1e-12, "label {l}: {freq} vs {p}");
    }
}

#[test]
fn argmax_readout_follows_a_dominant_label() {
    let layout = Layout::new(4, 2, 4, 3).unwrap();
    let mut params = ModelParams::zeros(layout);
    // Label 2 is favored whenever site 0 is on, label 1 otherwise.
    params.label_weights[[2, 0]] = 6.0;
    params.label_weights[[1, 0]] = -6.0;
    params.label_bias[1] = 3.0;
    params.weights[[0, 0, 0]] = 12.0;
    params.hidden_bias[0] = -6.0;
    let samples = ndarray::array![[1u8, 0, 0, 1], [0, 1, 1, 0], [1, 1, 1, 1], [0, 0, 0, 0]];
    let predicted = sampler::predict_labels(samples.view(), &params, 100, Readout::FinalArgmax, 3).unwrap();
    assert_eq!(predicted, vec![2, 1, 2, 1]);
}

#[test]
fn thread_count_does_not_change_chains() {
    let layout = Layout::new(30, 4, 10, 3).unwrap();
    let params = random_model(layout, 0.3, 51);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut chains = ChainPool::init_random(37, layout, 8).unwrap();
            sampler::run(&mut chains, &params, ClampMode::Free, 25).unwrap();
            chains
        })
    };
    assert_eq!(run(1), run(4));
}
