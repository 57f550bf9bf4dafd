use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Per-label train/test split.
///
/// Each label contributes `round_half_up(n_label * test_fraction)` rows to
/// the test set, drawn with a per-label seeded shuffle. A label with a
/// single sample stays in train. Both halves keep the original row order.
/// Unlabeled data is split as one group.
pub fn stratified_split(
    dataset: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Usage(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let groups: Vec<Vec<usize>> = if dataset.is_labeled() {
        (0..dataset.label_names.len()).map(|l| dataset.rows_with_label(l)).collect()
    } else {
        vec![(0..dataset.len()).collect()]
    };
    let mut in_test = vec![false; dataset.len()];
    for (g, rows) in groups.iter().enumerate() {
        if rows.len() == 1 {
            let name = dataset.label_names.get(g).map(String::as_str).unwrap_or("(unlabeled)");
            log::warn!("label `{name}` has a single sample; it goes to the training set");
            continue;
        }
        let n_test = (rows.len() as f64 * test_fraction + 0.5).floor() as usize;
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, g as u64)));
        for &r in &shuffled[..n_test.min(rows.len())] {
            in_test[r] = true;
        }
    }
    let train: Vec<usize> = (0..dataset.len()).filter(|&r| !in_test[r]).collect();
    let test: Vec<usize> = (0..dataset.len()).filter(|&r| in_test[r]).collect();
    Ok((dataset.select(&train), dataset.select(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn balanced(per_label: &[usize]) -> LabeledDataset {
        let names: Vec<String> = per_label
            .iter()
            .enumerate()
            .flat_map(|(l, &n)| std::iter::repeat(format!("L{l:02}")).take(n))
            .collect();
        let m = names.len();
        LabeledDataset::from_named_labels(
            Array2::from_shape_fn((m, 2), |(r, j)| ((r >> j) & 1) as u8),
            Some(names),
            vec!['0', '1'],
            (0..m).map(|r| r.to_string()).collect(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn hundred_samples_two_labels() {
        let d = balanced(&[50, 50]);
        let (train, test) = stratified_split(&d, 0.2, 3).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
        assert_eq!(train.label_counts(), vec![40, 40]);
        assert_eq!(test.label_counts(), vec![10, 10]);
    }

    #[test]
    fn deterministic_given_seed() {
        let d = balanced(&[30, 17, 5]);
        let a = stratified_split(&d, 0.3, 11).unwrap();
        let b = stratified_split(&d, 0.3, 11).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&d, 0.3, 12).unwrap();
        assert_ne!(a.1.ids, c.1.ids);
    }

    #[test]
    fn singleton_label_stays_in_train() {
        let d = balanced(&[1, 10]);
        let (train, test) = stratified_split(&d, 0.5, 0).unwrap();
        assert_eq!(train.label_counts(), vec![1, 5]);
        assert_eq!(test.label_counts(), vec![0, 5]);
    }

    #[test]
    fn fraction_bounds() {
        let d = balanced(&[4]);
        assert!(stratified_split(&d, 0.0, 0).is_err());
        assert!(stratified_split(&d, 1.0, 0).is_err());
    }
}
