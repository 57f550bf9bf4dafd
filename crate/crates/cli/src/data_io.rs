//! Dataset flags shared by the subcommands, and format-aware reading and writing.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use ndarray::Axis;
use serde::{Deserialize, Serialize};
use ssrbm::data::{
    self, AlphabetKind, BinaryLabels, FastaLabels, LabeledDataset, UnknownPolicy, DEFAULT_THRESHOLD,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Fasta,
    Binmat,
    Idx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alphabet {
    Protein,
    Rna,
}

impl Alphabet {
    fn kind(self) -> AlphabetKind {
        match self {
            Alphabet::Protein => AlphabetKind::Protein21,
            Alphabet::Rna => AlphabetKind::Rna5,
        }
    }
}

/// How input files are parsed. The same options apply to every dataset a command reads.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataOpts {
    /// Input format; guessed from the file name when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Residue alphabet of FASTA input [default: the model's alphabet, else protein].
    #[arg(long, value_enum)]
    pub alphabet: Option<Alphabet>,
    /// Label sidecar: `id<TAB>label` lines for FASTA, one label per row for
    /// a binary matrix, an IDX label file for IDX images.
    #[arg(long)]
    pub labels_file: Option<PathBuf>,
    /// Header column holding labels in a binary matrix (default: `label` if present).
    #[arg(long)]
    pub label_column: Option<String>,
    /// Header delimiter between sequence id and label in FASTA input.
    #[arg(long, default_value_t = '|')]
    #[serde(default = "default_delimiter")]
    pub label_delimiter: char,
    /// Pixel binarization threshold for IDX images, as a fraction of 255.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Fail on residues outside the alphabet instead of mapping them to gaps.
    #[arg(long)]
    #[serde(default)]
    pub strict_residues: bool,
    /// Keep only the alignment columns listed in this file (one index per line),
    /// as written by `train --gap-clean`.
    #[arg(long)]
    pub keep_columns: Option<PathBuf>,
}

impl Default for DataOpts {
    fn default() -> Self {
        DataOpts {
            format: None,
            alphabet: None,
            labels_file: None,
            label_column: None,
            label_delimiter: default_delimiter(),
            threshold: default_threshold(),
            strict_residues: false,
            keep_columns: None,
        }
    }
}

fn default_delimiter() -> char {
    '|'
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

/// Guesses the format from a file name.
pub fn guess_format(path: &Path) -> Option<Format> {
    let name = path.file_name()?.to_string_lossy().to_ascii_lowercase();
    let name = name.strip_suffix(".gz").unwrap_or(&name);
    if name.contains("idx3") || name.ends_with(".idx") {
        Some(Format::Idx)
    } else if [".fa", ".fasta", ".afa", ".fas", ".aln"].iter().any(|e| name.ends_with(e)) {
        Some(Format::Fasta)
    } else if [".tsv", ".csv", ".txt", ".dat"].iter().any(|e| name.ends_with(e)) {
        Some(Format::Binmat)
    } else {
        None
    }
}

impl DataOpts {
    pub fn resolve_format(&self, path: &Path) -> Result<Format> {
        match self.format.or_else(|| guess_format(path)) {
            Some(f) => Ok(f),
            None => bail!(
                "cannot tell the format of {}; pass --format fasta|binmat|idx",
                path.display()
            ),
        }
    }

    /// Reads a dataset. `labels_file` is only applied when `use_sidecar` is
    /// set; `model_alphabet` picks the FASTA alphabet when none was given.
    pub fn load(&self, path: &Path, use_sidecar: bool, model_alphabet: Option<&[char]>) -> Result<LabeledDataset> {
        let format = self.resolve_format(path)?;
        let sidecar = self.labels_file.as_ref().filter(|_| use_sidecar);
        let ds = match format {
            Format::Fasta => {
                let labels = match sidecar {
                    Some(p) => FastaLabels::Sidecar(p.clone()),
                    None => FastaLabels::Inline(self.label_delimiter),
                };
                let policy = if self.strict_residues {
                    UnknownPolicy::Strict
                } else {
                    UnknownPolicy::Gap
                };
                let kind = match (self.alphabet, model_alphabet.and_then(AlphabetKind::from_symbols)) {
                    (Some(a), _) => a.kind(),
                    (None, Some(k)) if k != AlphabetKind::Binary => k,
                    _ => AlphabetKind::Protein21,
                };
                data::load_fasta_msa(path, kind, &labels, policy)?
            }
            Format::Binmat => {
                let labels = match (&self.label_column, sidecar) {
                    (Some(_), Some(_)) => bail!("--label-column and --labels-file are mutually exclusive"),
                    (Some(c), None) => BinaryLabels::Column(c.clone()),
                    (None, Some(p)) => BinaryLabels::Sidecar(p.clone()),
                    (None, None) if header_has_label_column(path)? => BinaryLabels::Column("label".into()),
                    (None, None) => BinaryLabels::None,
                };
                data::load_binary_matrix(path, &labels)?
            }
            Format::Idx => data::load_mnist_idx(path, sidecar.map(PathBuf::as_path), self.threshold)?,
        };
        let ds = match &self.keep_columns {
            Some(p) => keep_columns(&ds, &read_columns(p)?)?,
            None => ds,
        };
        log::info!(
            "{}: {} rows, {} sites, {} states, {} labels",
            path.display(),
            ds.len(),
            ds.n_visible(),
            ds.n_states(),
            ds.label_names.len()
        );
        Ok(ds)
    }
}

fn header_has_label_column(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    Ok(first.split(['\t', ',', ' ']).any(|c| c.trim() == "label"))
}

pub fn read_columns(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse().with_context(|| format!("{}: bad column index `{l}`", path.display())))
        .collect()
}

pub fn write_columns(path: &Path, columns: &[usize]) -> Result<()> {
    let text: String = columns.iter().map(|c| format!("{c}\n")).collect();
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn keep_columns(ds: &LabeledDataset, columns: &[usize]) -> Result<LabeledDataset> {
    if let Some(&c) = columns.iter().find(|&&c| c >= ds.n_visible()) {
        bail!("kept column {c} is outside the {}-site input", ds.n_visible());
    }
    let mut out = ds.clone();
    out.samples = ds.samples.select(Axis(1), columns);
    Ok(out)
}

/// Output format matching an alphabet: FASTA for sequences, a delimited matrix for binary data.
pub fn natural_format(alphabet: &[char]) -> Format {
    match AlphabetKind::from_symbols(alphabet) {
        Some(AlphabetKind::Binary) | None => Format::Binmat,
        Some(_) => Format::Fasta,
    }
}

/// Writes a dataset; IDX output also writes a label file next to the images.
pub fn write(ds: &LabeledDataset, path: &Path, format: Format) -> Result<Vec<PathBuf>> {
    match format {
        Format::Fasta => {
            if ds.n_states() == 2 {
                bail!("FASTA output needs a sequence alphabet; use --out-format binmat");
            }
            data::write_fasta(ds, path)?;
            Ok(vec![path.to_path_buf()])
        }
        Format::Binmat => {
            data::write_binary_matrix(ds, path)?;
            Ok(vec![path.to_path_buf()])
        }
        Format::Idx => {
            let labels = ds.is_labeled().then(|| idx_label_path(path));
            data::write_mnist_idx(ds, path, labels.as_deref())?;
            Ok([Some(path.to_path_buf()), labels].into_iter().flatten().collect())
        }
    }
}

fn idx_label_path(images: &Path) -> PathBuf {
    let name = images.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let label_name = if name.contains("images-idx3") {
        name.replace("images-idx3", "labels-idx1")
    } else {
        format!("{name}.labels")
    };
    images.with_file_name(label_name)
}

/// Default file extension for a format.
pub fn extension(format: Format) -> &'static str {
    match format {
        Format::Fasta => "fasta",
        Format::Binmat => "tsv",
        Format::Idx => "idx3-ubyte",
    }
}
