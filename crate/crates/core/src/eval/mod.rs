//! Generation-quality scores, classification metrics and PCA export.
//!
//! * spectrum error: squared differences of the singular values of the
//!   real and generated data matrices;
//! * entropy error: relative difference of their deflate-compressed sizes;
//! * adversarial accuracy error: how often nearest neighbors stay within
//!   their own set.
//!
//! All three are zero for a perfect generator.

mod aai;
mod classify;
mod entropy;
mod pca;
mod spectrum;

use ndarray::{Array2, ArrayView2, Axis};

use crate::data::{canonical_bytes, LabeledDataset};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{derive_seed, tags};
use crate::sampler::{self, ClampMode, Readout};

pub use aai::{aai_error, adversarial_accuracy, nearest_neighbors, AdversarialAccuracy};
pub use classify::{classification_report, ClassificationReport};
pub use entropy::{compressed_size, entropy_error, entropy_error_from_sizes, DEFLATE_LEVEL};
pub use pca::{pca_project, PcaProjection};
pub use spectrum::{score_matrix, singular_values, spectrum_error, spectrum_error_from_values};

/// Label name used for scores over the pooled sets.
pub const ALL_LABELS: &str = "all";

/// The three scores of one generated set against its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub t_gen: u64,
    /// Category name, or [`ALL_LABELS`].
    pub label: String,
    pub spectrum_error: f64,
    pub entropy_error: f64,
    pub aai_error: f64,
    pub n_real: usize,
    pub n_gen: usize,
}

impl ScoreReport {
    pub const HEADER: &'static str = "t_gen\tlabel\tspectrum_error\tentropy_error\taai_error\tn_real\tn_gen";

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{:.6e}\t{:.6e}\t{:.6e}\t{}\t{}",
            self.t_gen, self.label, self.spectrum_error, self.entropy_error, self.aai_error, self.n_real, self.n_gen
        )
    }
}

/// Scores `generated` against `real` (same width and alphabet size).
pub fn score_sets(
    real: ArrayView2<u8>,
    generated: ArrayView2<u8>,
    n_states: usize,
    t_gen: u64,
    label: &str,
    seed: u64,
) -> Result<ScoreReport> {
    Ok(ScoreReport {
        t_gen,
        label: label.to_string(),
        spectrum_error: spectrum_error(score_matrix(real, n_states).view(), score_matrix(generated, n_states).view())?,
        entropy_error: entropy_error(&canonical_bytes(real), &canonical_bytes(generated))?,
        aai_error: aai_error(real, generated, seed)?,
        n_real: real.nrows(),
        n_gen: generated.nrows(),
    })
}

/// Reference quantities reused at every generation time.
struct Reference {
    name: String,
    rows: Vec<usize>,
    samples: Array2<u8>,
    singular_values: Vec<f64>,
    compressed: usize,
}

impl Reference {
    fn new(name: String, rows: Vec<usize>, all: ArrayView2<u8>, n_states: usize) -> Self {
        let samples = all.select(Axis(0), &rows);
        Reference {
            singular_values: singular_values(score_matrix(samples.view(), n_states).view()),
            compressed: compressed_size(&canonical_bytes(samples.view())),
            name,
            rows,
            samples,
        }
    }

    fn score(&self, generated: ArrayView2<u8>, n_states: usize, t_gen: u64, seed: u64) -> Result<ScoreReport> {
        let gen = generated.select(Axis(0), &self.rows);
        Ok(ScoreReport {
            t_gen,
            label: self.name.clone(),
            spectrum_error: spectrum_error_from_values(
                &self.singular_values,
                &singular_values(score_matrix(gen.view(), n_states).view()),
            ),
            entropy_error: entropy_error_from_sizes(self.compressed, compressed_size(&canonical_bytes(gen.view()))),
            aai_error: aai_error(self.samples.view(), gen.view(), seed)?,
            n_real: self.rows.len(),
            n_gen: self.rows.len(),
        })
    }
}

fn check_grid(grid: &[u64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Usage("generation-time grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("generation-time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Scores along one continued label-clamped run.
///
/// One chain is started per reference row with that row's label, so the
/// generated set has exactly the reference label histogram. At each grid
/// time the current configurations are scored against the reference, pooled
/// (label [`ALL_LABELS`]) and, if `per_label`, per category. Labels with
/// fewer than two reference rows are skipped with a warning. `reference`
/// labels must index `params`' labels.
pub fn score_curve(
    params: &ModelParams,
    reference: &LabeledDataset,
    grid: &[u64],
    per_label: bool,
    seed: u64,
) -> Result<Vec<ScoreReport>> {
    check_grid(grid)?;
    let layout = params.layout;
    if !reference.is_labeled() {
        return Err(Error::Usage("score curves need a labeled reference set".into()));
    }
    if reference.n_visible() != layout.n_visible || reference.n_states() != layout.n_states {
        return Err(Error::Config(format!(
            "reference is {}x{} states, model expects {}x{}",
            reference.n_visible(),
            reference.n_states(),
            layout.n_visible,
            layout.n_states
        )));
    }
    if reference.label_names.len() > layout.n_labels {
        return Err(Error::Config("reference has more labels than the model".into()));
    }
    let q = layout.n_states;
    let all = reference.samples.view();
    let mut groups = Vec::new();
    if reference.len() >= 2 {
        groups.push(Reference::new(ALL_LABELS.into(), (0..reference.len()).collect(), all, q));
    } else {
        log::warn!("reference set has fewer than two rows; pooled scores skipped");
    }
    if per_label {
        for (l, name) in reference.label_names.iter().enumerate() {
            let rows = reference.rows_with_label(l);
            if rows.len() < 2 {
                log::warn!("label `{name}` has {} reference rows; skipped", rows.len());
                continue;
            }
            groups.push(Reference::new(name.clone(), rows, all, q));
        }
    }

    let mut pool = sampler::generation_pool(&reference.labels, layout, derive_seed(seed, tags::GENERATION))?;
    let score_seed = derive_seed(seed, tags::SUBSAMPLE);
    let mut reports = Vec::new();
    let mut t = 0;
    for &t_gen in grid {
        sampler::run(&mut pool, params, ClampMode::ClampLabel, (t_gen - t) as usize)?;
        t = t_gen;
        let generated = pool.visible_matrix();
        for g in &groups {
            reports.push(g.score(generated.view(), q, t_gen, score_seed)?);
        }
    }
    Ok(reports)
}

/// Test accuracy at each grid time along one continued visible-clamped run.
pub fn accuracy_curve(
    params: &ModelParams,
    dataset: &LabeledDataset,
    grid: &[u64],
    readout: Readout,
    seed: u64,
) -> Result<Vec<(u64, f64)>> {
    check_grid(grid)?;
    if !dataset.is_labeled() {
        return Err(Error::Usage("accuracy needs a labeled dataset".into()));
    }
    let mut pool = sampler::prediction_pool(dataset.samples.view(), params.layout, seed)?;
    let mut out = Vec::with_capacity(grid.len());
    let mut t = 0;
    for &steps in grid {
        sampler::run(&mut pool, params, ClampMode::ClampVisible, (steps - t) as usize)?;
        t = steps;
        let predicted = sampler::readout_labels(&pool, params, readout)?;
        out.push((steps, classification_report(&predicted, &dataset.labels, params.layout.n_labels)?.accuracy));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Layout;
    use ndarray::array;

    #[test]
    fn score_sets_of_identical_data() {
        let x = array![[0u8, 1, 1], [1, 0, 1], [1, 1, 0]];
        let r = score_sets(x.view(), x.view(), 2, 0, ALL_LABELS, 0).unwrap();
        assert_eq!((r.spectrum_error, r.entropy_error, r.aai_error), (0.0, 0.0, 0.25));
    }

    #[test]
    fn grid_validation() {
        assert!(check_grid(&[]).is_err());
        assert!(check_grid(&[10, 5]).is_err());
        assert!(check_grid(&[0, 1, 10]).is_ok());
    }

    #[test]
    fn curve_rows_per_label_and_pooled() {
        let layout = Layout::new(3, 2, 2, 3).unwrap();
        let params = ModelParams::zeros(layout);
        let reference = LabeledDataset::from_named_labels(
            array![[0u8, 1, 1], [1, 0, 1], [1, 1, 0], [0, 0, 0], [1, 1, 1]],
            Some(vec!["a".into(), "a".into(), "b".into(), "b".into(), "c".into()]),
            vec!['0', '1'],
            (0..5).map(|i| i.to_string()).collect(),
            vec![],
        )
        .unwrap();
        let curve = score_curve(&params, &reference, &[0, 3], true, 1).unwrap();
        let labels: Vec<&str> = curve.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["all", "a", "b", "all", "a", "b"]);
        assert!(curve.iter().all(|r| r.aai_error <= 0.25 && r.spectrum_error >= 0.0));
        assert_eq!(curve[0].n_gen, 5);
    }
}
