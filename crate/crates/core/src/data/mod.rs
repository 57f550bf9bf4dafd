//! Labeled categorical datasets and their file formats.
//!
//! Samples are stored as small integers, one byte per site. One-hot
//! matrices only appear at the evaluation boundary.
//!
//! Alphabets are fixed so state integers are stable across runs:
//!
//! | kind    | states                                          |
//! |---------|-------------------------------------------------|
//! | protein | `ACDEFGHIKLMNPQRSTVWY` then gap `-` (state 20)  |
//! | RNA     | `ACGU` then gap `-` (state 4)                   |
//! | binary  | `0`, `1`                                        |

mod binmat;
mod fasta;
mod idx;
mod split;

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use binmat::{load_binary_matrix, write_binary_matrix, BinaryLabels};
pub use fasta::{load_fasta_msa, write_fasta, FastaLabels, UnknownPolicy};
pub use idx::{load_mnist_idx, write_mnist_idx, DEFAULT_THRESHOLD};
pub use split::stratified_split;

pub const PROTEIN_SYMBOLS: &str = "ACDEFGHIKLMNPQRSTVWY-";
pub const RNA_SYMBOLS: &str = "ACGU-";
pub const BINARY_SYMBOLS: &str = "01";
pub const GAP: char = '-';
/// Default maximal gap fraction kept by [`LabeledDataset::clean_gap_columns`].
pub const DEFAULT_GAP_THRESHOLD: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphabetKind {
    Protein21,
    Rna5,
    Binary,
}

impl AlphabetKind {
    pub fn symbols(self) -> Vec<char> {
        match self {
            AlphabetKind::Protein21 => PROTEIN_SYMBOLS.chars().collect(),
            AlphabetKind::Rna5 => RNA_SYMBOLS.chars().collect(),
            AlphabetKind::Binary => BINARY_SYMBOLS.chars().collect(),
        }
    }

    pub fn from_symbols(symbols: &[char]) -> Option<Self> {
        let s: String = symbols.iter().collect();
        match s.as_str() {
            PROTEIN_SYMBOLS => Some(AlphabetKind::Protein21),
            RNA_SYMBOLS => Some(AlphabetKind::Rna5),
            BINARY_SYMBOLS => Some(AlphabetKind::Binary),
            _ => None,
        }
    }
}

/// Aligned categorical samples with optional labels.
///
/// An empty `labels` vector (with empty `label_names`) marks an unlabeled
/// dataset, such as prediction input.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Array2<u8>,
    pub labels: Vec<usize>,
    /// Sorted category names; `labels` index into this list.
    pub label_names: Vec<String>,
    pub alphabet: Vec<char>,
    /// One identifier per row.
    pub ids: Vec<String>,
    pub source_meta: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset from string labels; names are sorted to fix indices.
    pub fn from_named_labels(
        samples: Array2<u8>,
        names: Option<Vec<String>>,
        alphabet: Vec<char>,
        ids: Vec<String>,
        source_meta: Vec<String>,
    ) -> Result<Self> {
        let (labels, label_names) = match names {
            None => (Vec::new(), Vec::new()),
            Some(names) => {
                let dict: BTreeMap<&str, usize> = names.iter().map(|n| (n.as_str(), 0)).collect();
                let label_names: Vec<String> = dict.keys().map(|s| s.to_string()).collect();
                let labels = names
                    .iter()
                    .map(|n| label_names.binary_search(n).expect("name collected above"))
                    .collect();
                (labels, label_names)
            }
        };
        let dataset = LabeledDataset {
            samples,
            labels,
            label_names,
            alphabet,
            ids,
            source_meta,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.alphabet.len();
        if !(2..=256).contains(&q) {
            return Err(Error::Config(format!("alphabet must have 2 to 256 symbols, got {q}")));
        }
        if let Some(s) = self.samples.iter().find(|&&s| s as usize >= q) {
            return Err(Error::Config(format!("state {s} outside the {q}-symbol alphabet")));
        }
        if !self.labels.is_empty() && self.labels.len() != self.len() {
            return Err(Error::Config(format!(
                "{} labels for {} samples",
                self.labels.len(),
                self.len()
            )));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l >= self.label_names.len()) {
            return Err(Error::Config(format!(
                "label index {l} outside {} label names",
                self.label_names.len()
            )));
        }
        if self.ids.len() != self.len() {
            return Err(Error::Config(format!("{} ids for {} samples", self.ids.len(), self.len())));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_visible(&self) -> usize {
        self.samples.ncols()
    }

    pub fn n_states(&self) -> usize {
        self.alphabet.len()
    }

    pub fn is_labeled(&self) -> bool {
        !self.label_names.is_empty() && self.labels.len() == self.len()
    }

    /// Number of rows per label index.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row indices carrying label `label`.
    pub fn rows_with_label(&self, label: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Rows `rows` in the given order, keeping names and alphabet.
    pub fn select(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: self.samples.select(Axis(0), rows),
            labels: if self.labels.is_empty() {
                Vec::new()
            } else {
                rows.iter().map(|&r| self.labels[r]).collect()
            },
            label_names: self.label_names.clone(),
            alphabet: self.alphabet.clone(),
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            source_meta: self.source_meta.clone(),
        }
    }

    /// Re-indexes labels against `names` (e.g. a model's label list).
    pub fn remap_labels(&self, names: &[String]) -> Result<LabeledDataset> {
        let mut map = Vec::with_capacity(self.label_names.len());
        for name in &self.label_names {
            match names.iter().position(|n| n == name) {
                Some(i) => map.push(i),
                None => {
                    return Err(Error::Usage(format!(
                        "unknown label `{name}`; valid labels: {}",
                        names.join(", ")
                    )))
                }
            }
        }
        let mut out = self.clone();
        out.labels = self.labels.iter().map(|&l| map[l]).collect();
        out.label_names = names.to_vec();
        Ok(out)
    }

    /// Canonical serialization: one byte per state, row-major, no header.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical_bytes(self.samples.view())
    }

    /// 64-bit digest of shape, alphabet, samples and labels.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update((self.len() as u64).to_le_bytes());
        hasher.update((self.n_visible() as u64).to_le_bytes());
        hasher.update(self.alphabet.iter().collect::<String>().as_bytes());
        hasher.update(self.canonical_bytes());
        for &l in &self.labels {
            hasher.update((l as u64).to_le_bytes());
        }
        for name in &self.label_names {
            hasher.update(name.as_bytes());
            hasher.update([0]);
        }
        let digest = hasher.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    pub fn one_hot(&self) -> Array2<f64> {
        one_hot(self.samples.view(), self.n_states())
    }

    /// Drops alignment columns whose gap fraction exceeds `threshold`.
    ///
    /// Returns the cleaned dataset and the kept column indices.
    pub fn clean_gap_columns(&self, threshold: f64) -> Result<(LabeledDataset, Vec<usize>)> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Usage(format!("gap threshold must be in [0, 1], got {threshold}")));
        }
        let gap = match self.alphabet.iter().position(|&c| c == GAP) {
            Some(g) => g as u8,
            None => return Err(Error::Usage("gap cleaning needs an alphabet with a gap symbol".into())),
        };
        let m = self.len().max(1) as f64;
        let kept: Vec<usize> = (0..self.n_visible())
            .filter(|&j| {
                let gaps = self.samples.column(j).iter().filter(|&&s| s == gap).count();
                gaps as f64 / m <= threshold
            })
            .collect();
        let mut out = self.clone();
        out.samples = self.samples.select(Axis(1), &kept);
        out.source_meta.push(format!(
            "gap-clean threshold={threshold}: kept {} of {} columns",
            kept.len(),
            self.n_visible()
        ));
        Ok((out, kept))
    }
}

pub fn canonical_bytes(samples: ArrayView2<u8>) -> Vec<u8> {
    samples.iter().copied().collect()
}

/// Expands each site into `n_states` indicator columns.
pub fn one_hot(samples: ArrayView2<u8>, n_states: usize) -> Array2<f64> {
    let (m, n) = samples.dim();
    let mut out = Array2::zeros((m, n * n_states));
    for (r, row) in samples.axis_iter(Axis(0)).enumerate() {
        for (i, &s) in row.iter().enumerate() {
            out[[r, i * n_states + s as usize]] = 1.0;
        }
    }
    out
}

/// Inverse of [`one_hot`]; fails unless every site block has exactly one 1.
pub fn from_one_hot(matrix: ArrayView2<f64>, n_states: usize) -> Result<Array2<u8>> {
    if n_states == 0 || matrix.ncols() % n_states != 0 {
        return Err(Error::Usage(format!(
            "{} columns are not a multiple of {n_states} states",
            matrix.ncols()
        )));
    }
    let n = matrix.ncols() / n_states;
    let mut out = Array2::zeros((matrix.nrows(), n));
    for (r, row) in matrix.axis_iter(Axis(0)).enumerate() {
        for i in 0..n {
            let block = row.slice(ndarray::s![i * n_states..(i + 1) * n_states]);
            let ones: Vec<usize> = block.iter().enumerate().filter(|(_, &x)| x == 1.0).map(|(s, _)| s).collect();
            let zeros = block.iter().filter(|&&x| x == 0.0).count();
            if ones.len() != 1 || zeros != n_states - 1 {
                return Err(Error::Usage(format!("row {r}, site {i} is not one-hot")));
            }
            out[[r, i]] = ones[0] as u8;
        }
    }
    Ok(out)
}
