//! `project`: coordinates on the reference set's top two principal components.

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use ssrbm::data::LabeledDataset;
use ssrbm::eval::{pca_project, score_matrix};

use super::{write_tsv, Context};
use crate::data_io::DataOpts;
use crate::manifest::Recorder;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ProjectArgs {
    /// Data defining the principal components.
    #[arg(long)]
    pub reference: PathBuf,
    /// Data projected onto the reference components (e.g. generated samples).
    #[arg(long)]
    pub query: Option<PathBuf>,
    #[command(flatten)]
    pub data_opts: DataOpts,
    /// Coordinates file [default: projection.tsv in the output directory].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn label_of(ds: &LabeledDataset, r: usize) -> &str {
    if ds.is_labeled() {
        &ds.label_names[ds.labels[r]]
    } else {
        "-"
    }
}

pub fn run(args: &ProjectArgs, ctx: &Context) -> Result<()> {
    let mut rec = Recorder::new("project", args, &ctx.out_dir)?;
    let reference = args.data_opts.load(&args.reference, true, None)?;
    rec.input("reference", &args.reference)?;
    let query = match &args.query {
        Some(q) => {
            rec.input("query", q)?;
            let ds = args.data_opts.load(q, false, Some(&reference.alphabet))?;
            if ds.alphabet != reference.alphabet {
                anyhow::bail!("query and reference use different alphabets");
            }
            Some(ds)
        }
        None => None,
    };
    let q = reference.n_states();
    let ref_matrix = score_matrix(reference.samples.view(), q);
    let query_matrix = match &query {
        Some(ds) => score_matrix(ds.samples.view(), q),
        None => ndarray::Array2::zeros((0, ref_matrix.ncols())),
    };
    let proj = pca_project(ref_matrix.view(), query_matrix.view())?;
    rec.resolve("variances", proj.variances);

    let mut lines = Vec::new();
    for (set, ds, coords) in [("reference", Some(&reference), &proj.reference), ("query", query.as_ref(), &proj.query)] {
        let Some(ds) = ds else { continue };
        for (r, row) in coords.rows().into_iter().enumerate() {
            lines.push(format!("{set}\t{}\t{}\t{:.6e}\t{:.6e}", ds.ids[r], label_of(ds, r), row[0], row[1]));
        }
    }
    let out = ctx.output_path(args.out.as_deref().unwrap_or(Path::new("projection.tsv")));
    write_tsv(&out, "set\tid\tlabel\tpc1\tpc2", lines)?;
    rec.output(&out);
    rec.finish()?;
    println!("component\tvariance");
    for (i, v) in proj.variances.iter().enumerate() {
        println!("pc{}\t{v:.6e}", i + 1);
    }
    Ok(())
}
