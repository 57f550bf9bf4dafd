//! Subcommand implementations and the pieces they share.

pub mod evaluate;
pub mod generate;
pub mod predict;
pub mod project;
pub mod split;
pub mod train;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use ssrbm::data::LabeledDataset;
use ssrbm::store::{self, Checkpoint};
use ssrbm::trainer::{DatasetPreset, GradientCombination, Regime};
use ssrbm::Readout;

/// Where a command writes its files.
#[derive(Debug, Clone)]
pub struct Context {
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(out_dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(Context { out_dir })
    }

    /// `path` if absolute, otherwise relative to the output directory.
    pub fn output_path(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir.join(path)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeArg {
    Ff,
    Pcd,
    FfGenOnly,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Ff => Regime::Ff,
            RegimeArg::Pcd => Regime::Pcd,
            RegimeArg::FfGenOnly => Regime::FfGenerationOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetArg {
    Mnist,
    Hgd,
    Gh30,
    Sam,
    Cmpc,
}

impl From<PresetArg> for DatasetPreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Mnist => DatasetPreset::Mnist,
            PresetArg::Hgd => DatasetPreset::Hgd,
            PresetArg::Gh30 => DatasetPreset::Gh30,
            PresetArg::Sam => DatasetPreset::Sam,
            PresetArg::Cmpc => DatasetPreset::Cmpc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinationArg {
    Average,
    Alternate,
}

impl From<CombinationArg> for GradientCombination {
    fn from(c: CombinationArg) -> Self {
        match c {
            CombinationArg::Average => GradientCombination::Average,
            CombinationArg::Alternate => GradientCombination::Alternate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutArg {
    Argmax,
    Sample,
}

impl From<ReadoutArg> for Readout {
    fn from(r: ReadoutArg) -> Self {
        match r {
            ReadoutArg::Argmax => Readout::FinalArgmax,
            ReadoutArg::Sample => Readout::FinalSample,
        }
    }
}

pub fn readout_name(r: Readout) -> &'static str {
    match r {
        Readout::FinalArgmax => "argmax",
        Readout::FinalSample => "sample",
    }
}

pub fn combination_name(c: GradientCombination) -> &'static str {
    match c {
        GradientCombination::Average => "average",
        GradientCombination::Alternate => "alternate",
    }
}

pub fn load_model(path: &Path) -> Result<Checkpoint> {
    let ck = store::load(path)?;
    log::info!(
        "{}: {} model, {} updates, {} visible x {} states, {} hidden, {} labels",
        path.display(),
        ck.meta.regime.name(),
        ck.meta.update_count,
        ck.layout().n_visible,
        ck.layout().n_states,
        ck.layout().n_hidden,
        ck.layout().n_labels
    );
    Ok(ck)
}

/// Fails unless `ds` has the model's width and alphabet; relabels it with the model's label names.
pub fn fit_to_model(ds: LabeledDataset, ck: &Checkpoint, path: &Path) -> Result<LabeledDataset> {
    let layout = ck.layout();
    if ds.n_visible() != layout.n_visible || ds.n_states() != layout.n_states {
        bail!(
            "{} has {} sites x {} states, but the model expects {} sites x {} states",
            path.display(),
            ds.n_visible(),
            ds.n_states(),
            layout.n_visible,
            layout.n_states
        );
    }
    if ds.alphabet != ck.alphabet {
        bail!(
            "{} uses alphabet `{}`, the model was trained on `{}`",
            path.display(),
            ds.alphabet.iter().collect::<String>(),
            ck.alphabet.iter().collect::<String>()
        );
    }
    if ds.is_labeled() {
        Ok(ds.remap_labels(&ck.label_names)?)
    } else {
        Ok(ds)
    }
}

/// Parses a comma-separated, strictly increasing list of sweep counts.
pub fn parse_grid(text: &str, what: &str) -> Result<Vec<u64>> {
    let grid = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<u64>().with_context(|| format!("{what}: `{s}` is not a non-negative integer")))
        .collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        bail!("{what} is empty");
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        bail!("{what} must be strictly increasing");
    }
    Ok(grid)
}

/// Writes `lines` after `header`, newline-terminated.
pub fn write_tsv(path: &Path, header: &str, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "{header}")?;
    for line in lines {
        writeln!(out, "{line}")?;
    }
    out.flush().with_context(|| format!("writing {}", path.display()))
}
