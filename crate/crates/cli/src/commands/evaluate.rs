//! `evaluate`: score curves over generation time, for one model or a directory of checkpoints.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use ssrbm::eval::{self, ScoreReport};
use ssrbm::rng::{derive_seed, tags};

use super::{fit_to_model, load_model, parse_grid, readout_name, write_tsv, Context, ReadoutArg};
use crate::data_io::DataOpts;
use crate::manifest::Recorder;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[command(group(clap::ArgGroup::new("models").required(true).args(["model", "model_dir"])))]
pub struct EvaluateArgs {
    /// One checkpoint.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Every `*.ckpt` in this directory, in order of training age.
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    /// Labeled reference data (usually the test set).
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub data_opts: DataOpts,
    /// Comma-separated, increasing generation times.
    #[arg(long)]
    pub tgen_grid: String,
    /// Also score each category separately.
    #[arg(long)]
    #[serde(default)]
    pub per_label: bool,
    /// Comma-separated prediction sweep counts; writes accuracy.tsv.
    #[arg(long)]
    pub accuracy_grid: Option<String>,
    /// Label readout for --accuracy-grid [default: the one stored with each model].
    #[arg(long, value_enum)]
    pub readout: Option<ReadoutArg>,
    #[arg(long, default_value_t = 0)]
    #[serde(default)]
    pub seed: u64,
    /// Scores file [default: scores.tsv in the output directory].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn checkpoints_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "ckpt"));
    paths.sort();
    if paths.is_empty() {
        bail!("no *.ckpt files in {}", dir.display());
    }
    Ok(paths)
}

pub fn run(args: &EvaluateArgs, ctx: &Context) -> Result<()> {
    let mut rec = Recorder::new("evaluate", args, &ctx.out_dir)?;
    let grid = parse_grid(&args.tgen_grid, "--tgen-grid")?;
    let accuracy_grid = args
        .accuracy_grid
        .as_deref()
        .map(|g| parse_grid(g, "--accuracy-grid"))
        .transpose()?;
    let paths = match (&args.model, &args.model_dir) {
        (Some(m), _) => vec![m.clone()],
        (None, Some(dir)) => checkpoints_in(dir)?,
        (None, None) => unreachable!("clap requires one of --model, --model-dir"),
    };
    let mut models = Vec::with_capacity(paths.len());
    for p in &paths {
        rec.input("model", p)?;
        models.push((p, load_model(p)?));
    }
    models.sort_by_key(|(p, ck)| (ck.meta.update_count, (*p).clone()));

    let raw = args.data_opts.load(&args.data, true, Some(&models[0].1.alphabet))?;
    rec.input("data", &args.data)?;
    if let Some(p) = &args.data_opts.labels_file {
        rec.input("labels", p)?;
    }
    if !raw.is_labeled() {
        bail!("{} carries no labels; scores are computed against a labeled reference", args.data.display());
    }
    rec.seed(args.seed);
    rec.resolve("tgen_grid", &grid);
    rec.resolve("accuracy_grid", &accuracy_grid);
    rec.resolve("per_label", args.per_label);
    rec.resolve("models", models.iter().map(|(p, _)| p).collect::<Vec<_>>());

    let mut score_lines = Vec::new();
    let mut accuracy_lines = Vec::new();
    for (path, ck) in &models {
        let ds = fit_to_model(raw.clone(), ck, &args.data)?;
        let age = ck.meta.update_count;
        log::info!("scoring {} (t_age {age})", path.display());
        let reports = eval::score_curve(&ck.params, &ds, &grid, args.per_label, derive_seed(args.seed, age))?;
        score_lines.extend(reports.iter().map(|r| format!("{age}\t{}", r.to_line())));
        if let Some(steps) = &accuracy_grid {
            let readout = args.readout.map(Into::into).unwrap_or(ck.meta.readout);
            let seed = derive_seed(derive_seed(args.seed, age), tags::PREDICTION);
            for (s, acc) in eval::accuracy_curve(&ck.params, &ds, steps, readout, seed)? {
                accuracy_lines.push(format!("{age}\t{s}\t{}\t{acc:.6}", readout_name(readout)));
            }
        }
    }
    let out = ctx.output_path(args.out.as_deref().unwrap_or(Path::new("scores.tsv")));
    write_tsv(&out, &format!("t_age\t{}", ScoreReport::HEADER), score_lines)?;
    rec.output(&out);
    if accuracy_grid.is_some() {
        let path = ctx.out_dir.join("accuracy.tsv");
        write_tsv(&path, "t_age\tsteps\treadout\taccuracy", accuracy_lines)?;
        rec.output(&path);
    }
    rec.finish()?;
    Ok(())
}
