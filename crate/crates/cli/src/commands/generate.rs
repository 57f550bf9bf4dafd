//! `generate`: label-conditioned samples from a checkpoint.

use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::Args;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use ssrbm::data::LabeledDataset;
use ssrbm::rng::{derive_seed, tags};
use ssrbm::sampler;

use super::{fit_to_model, load_model, Context};
use crate::data_io::{self, DataOpts, Format};
use crate::manifest::Recorder;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(group(clap::ArgGroup::new("counts").required(true).args(["labels", "match_data"])))]
pub struct GenerateArgs {
    /// Checkpoint to sample from.
    #[arg(long)]
    pub model: PathBuf,
    /// Samples per category as NAME=COUNT, comma-separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub labels: Vec<String>,
    /// Mirror the label histogram of this dataset, row by row.
    #[arg(long = "match")]
    pub match_data: Option<PathBuf>,
    #[command(flatten)]
    pub data_opts: DataOpts,
    /// Gibbs sweeps from the random start [default: the model's training k].
    #[arg(long)]
    pub tgen: Option<usize>,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    /// Output file [default: generated.<ext> in the output directory].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format [default: FASTA for sequences, matrix for binary data].
    #[arg(long, value_enum)]
    pub out_format: Option<Format>,
}

/// Label index per requested sample, in label-name order.
fn requested_labels(specs: &[String], names: &[String]) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; names.len()];
    for spec in specs {
        let Some((name, count)) = spec.split_once('=') else {
            bail!("--labels entry `{spec}` is not NAME=COUNT");
        };
        let Some(l) = names.iter().position(|n| n == name.trim()) else {
            bail!("unknown label `{}`; valid labels: {}", name.trim(), names.join(", "));
        };
        counts[l] += count
            .trim()
            .parse::<usize>()
            .with_context(|| format!("--labels entry `{spec}`: bad count"))?;
    }
    Ok(counts
        .iter()
        .enumerate()
        .flat_map(|(l, &n)| std::iter::repeat_n(l, n))
        .collect())
}

pub fn run(args: &GenerateArgs, ctx: &Context) -> Result<()> {
    let mut rec = Recorder::new("generate", args, &ctx.out_dir)?;
    let ck = load_model(&args.model)?;
    rec.input("model", &args.model)?;
    let labels = match &args.match_data {
        Some(path) => {
            let ds = args.data_opts.load(path, true, Some(&ck.alphabet))?;
            rec.input("match", path)?;
            if !ds.is_labeled() {
                bail!("{} carries no labels to match", path.display());
            }
            // Only the label histogram is used, so the width may differ from the model's.
            let ds = if ds.n_visible() == ck.layout().n_visible {
                fit_to_model(ds, &ck, path)?
            } else {
                ds.remap_labels(&ck.label_names)?
            };
            ds.labels
        }
        None => requested_labels(&args.labels, &ck.label_names)?,
    };
    let t_gen = args.tgen.unwrap_or(ck.meta.k as usize);
    if t_gen == 0 {
        bail!("--tgen must be at least 1");
    }
    let format = args.out_format.unwrap_or_else(|| data_io::natural_format(&ck.alphabet));
    let out = ctx.output_path(
        args.out
            .as_deref()
            .unwrap_or(&PathBuf::from(format!("generated.{}", data_io::extension(format)))),
    );
    rec.seed(args.seed);
    rec.resolve("t_gen", t_gen);
    rec.resolve("format", format);
    rec.resolve("n_samples", labels.len());
    let mut counts = vec![0usize; ck.label_names.len()];
    labels.iter().for_each(|&l| counts[l] += 1);
    rec.resolve(
        "label_counts",
        ck.label_names.iter().zip(&counts).collect::<std::collections::BTreeMap<_, _>>(),
    );

    let samples = if labels.is_empty() {
        Array2::zeros((0, ck.layout().n_visible))
    } else {
        let pool = sampler::generate_conditional(&labels, &ck.params, t_gen, derive_seed(args.seed, tags::GENERATION))?;
        pool.visible_matrix()
    };
    log::info!("generated {} samples with {t_gen} sweeps", labels.len());
    let generated = LabeledDataset {
        samples,
        ids: (0..labels.len()).map(|i| format!("gen{i}")).collect(),
        labels,
        label_names: ck.label_names.clone(),
        alphabet: ck.alphabet.clone(),
        source_meta: vec![format!("generated t_gen={t_gen}")],
    };
    for p in data_io::write(&generated, &out, format)? {
        rec.output(&p);
    }
    rec.finish()?;
    Ok(())
}
