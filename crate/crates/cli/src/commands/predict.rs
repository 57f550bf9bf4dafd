//! `predict`: label inference by visible-clamped sampling.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use ssrbm::eval::classification_report;
use ssrbm::rng::{derive_seed, tags};
use ssrbm::sampler;

use super::{fit_to_model, load_model, readout_name, write_tsv, Context, ReadoutArg};
use crate::data_io::DataOpts;
use crate::manifest::Recorder;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Samples to classify; labels, if present, are used as ground truth.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub data_opts: DataOpts,
    /// Gibbs sweeps with the visible layer clamped.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Label readout [default: the one stored with the model].
    #[arg(long, value_enum)]
    pub readout: Option<ReadoutArg>,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    /// Predictions file [default: predictions.tsv in the output directory].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &PredictArgs, ctx: &Context) -> Result<()> {
    let mut rec = Recorder::new("predict", args, &ctx.out_dir)?;
    let ck = load_model(&args.model)?;
    rec.input("model", &args.model)?;
    let ds = args.data_opts.load(&args.data, true, Some(&ck.alphabet))?;
    rec.input("data", &args.data)?;
    if let Some(p) = &args.data_opts.labels_file {
        rec.input("labels", p)?;
    }
    let ds = fit_to_model(ds, &ck, &args.data)?;
    if args.steps == 0 {
        anyhow::bail!("--steps must be at least 1");
    }
    let readout = args.readout.map(Into::into).unwrap_or(ck.meta.readout);
    rec.seed(args.seed);
    rec.resolve("steps", args.steps);
    rec.resolve("readout", readout_name(readout));
    rec.resolve("n_samples", ds.len());

    let predicted = sampler::predict_labels(
        ds.samples.view(),
        &ck.params,
        args.steps,
        readout,
        derive_seed(args.seed, tags::PREDICTION),
    )?;
    let names = &ck.label_names;
    let out = ctx.output_path(args.out.as_deref().unwrap_or(&PathBuf::from("predictions.tsv")));
    let labeled = ds.is_labeled();
    let header = if labeled { "id\tpredicted\ttrue" } else { "id\tpredicted" };
    let lines = predicted.iter().enumerate().map(|(r, &p)| {
        if labeled {
            format!("{}\t{}\t{}", ds.ids[r], names[p], names[ds.labels[r]])
        } else {
            format!("{}\t{}", ds.ids[r], names[p])
        }
    });
    write_tsv(&out, header, lines)?;
    rec.output(&out);

    if labeled {
        let report = classification_report(&predicted, &ds.labels, names.len())?;
        let confusion = ctx.out_dir.join("confusion.tsv");
        std::fs::write(&confusion, report.confusion_tsv(names))?;
        rec.output(&confusion);
        rec.resolve("accuracy", report.accuracy);
        log::info!("accuracy {:.4} on {} samples", report.accuracy, ds.len());
        println!("accuracy\t{:.6}", report.accuracy);
    }
    rec.finish()?;
    Ok(())
}
