//! `split`: stratified train/test split, written in the input's format.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use ssrbm::data::stratified_split;

use super::Context;
use crate::data_io::{self, DataOpts};
use crate::manifest::Recorder;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub data_opts: DataOpts,
    /// Fraction of each category sent to the test set.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
}

pub fn run(args: &SplitArgs, ctx: &Context) -> Result<()> {
    let mut rec = Recorder::new("split", args, &ctx.out_dir)?;
    let format = args.data_opts.resolve_format(&args.data)?;
    let ds = args.data_opts.load(&args.data, true, None)?;
    rec.input("data", &args.data)?;
    let (train, test) = stratified_split(&ds, args.test_fraction, args.seed)?;
    rec.seed(args.seed);
    rec.resolve("format", format);
    rec.resolve("n_train", train.len());
    rec.resolve("n_test", test.len());
    log::info!("{} train rows, {} test rows", train.len(), test.len());
    for (name, part) in [("train", &train), ("test", &test)] {
        let path = ctx.out_dir.join(match format {
            data_io::Format::Idx => format!("{name}-images-idx3-ubyte.gz"),
            f => format!("{name}.{}", data_io::extension(f)),
        });
        for p in data_io::write(part, &path, format)? {
            rec.output(&p);
        }
    }
    rec.finish()?;
    Ok(())
}
