//! `train`: fit a model and write checkpoints plus a per-update log.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use ssrbm::data::{AlphabetKind, LabeledDataset};
use ssrbm::sampler::ChainPool;
use ssrbm::store::{self, Checkpoint, TrainingMeta};
use ssrbm::trainer::{self, DatasetPreset, LogRecord, Regime, ResumeState, TrainConfig, TrainObserver};
use ssrbm::ModelParams;

use super::{combination_name, load_model, readout_name, CombinationArg, Context, PresetArg, ReadoutArg, RegimeArg};
use crate::data_io::{self, DataOpts, Format};
use crate::manifest::Recorder;

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Labeled training data.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub data_opts: DataOpts,
    /// Hyper-parameter family for unspecified --batch, --updates and --hidden
    /// [default: mnist for IDX, hgd for binary matrices, gh30 for protein and
    /// sam for RNA alignments].
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    /// Training regime [default: ff, or the resumed model's].
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    /// Gibbs sweeps per update [default: 10 for ff, 100 for pcd].
    #[arg(long)]
    pub k: Option<usize>,
    /// Learning rate [default: 0.01].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Minibatch size.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Total gradient updates; 0 writes the initialized model.
    #[arg(long)]
    pub updates: Option<u64>,
    /// Hidden units.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Master seed [default: 0, or the resumed model's].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write a checkpoint every N updates.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Also write checkpoints at these update counts (comma-separated).
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub checkpoint_at: Vec<u64>,
    /// How ff combines its two gradients.
    #[arg(long, value_enum)]
    pub combination: Option<CombinationArg>,
    /// Label readout stored with the model for later prediction.
    #[arg(long, value_enum)]
    pub readout: Option<ReadoutArg>,
    /// Drop alignment columns whose gap fraction exceeds this value.
    #[arg(long)]
    pub gap_clean: Option<f64>,
    /// Continue training from this checkpoint up to --updates.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Write one log row every N updates.
    #[arg(long, default_value_t = 1)]
    #[serde(default = "one")]
    pub log_every: u64,
}

fn one() -> u64 {
    1
}

pub fn checkpoint_name(update: u64) -> String {
    format!("model_{update:08}.ckpt")
}

fn default_preset(format: Format, alphabet: &[char]) -> DatasetPreset {
    match (format, AlphabetKind::from_symbols(alphabet)) {
        (Format::Idx, _) => DatasetPreset::Mnist,
        (_, Some(AlphabetKind::Rna5)) => DatasetPreset::Sam,
        (_, Some(AlphabetKind::Protein21)) => DatasetPreset::Gh30,
        _ => DatasetPreset::Hgd,
    }
}

/// Checkpoint update indices below `total` requested by the flags.
fn schedule(every: Option<u64>, at: &[u64], total: u64) -> Result<Vec<u64>> {
    let mut out: Vec<u64> = Vec::new();
    if let Some(n) = every {
        if n == 0 {
            bail!("--checkpoint-every must be at least 1");
        }
        out.extend((1..).map(|i| i * n).take_while(|&t| t < total));
    }
    for &t in at {
        if t > total {
            log::warn!("--checkpoint-at {t} is past --updates {total}; ignored");
        } else if t < total {
            out.push(t);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

struct Observer<'a> {
    ctx: &'a Context,
    config: &'a TrainConfig,
    fingerprint: u64,
    alphabet: &'a [char],
    label_names: &'a [String],
    log: BufWriter<File>,
    log_path: PathBuf,
    log_every: u64,
    total: u64,
    written: Vec<PathBuf>,
}

impl TrainObserver for Observer<'_> {
    fn on_update(&mut self, record: &LogRecord) -> ssrbm::Result<()> {
        if record.update % self.log_every == 0 || record.update == self.total {
            writeln!(self.log, "{}", record.to_line()).map_err(|e| io_error(&self.log_path, e))?;
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, update: u64, params: &ModelParams, pool: Option<&ChainPool>) -> ssrbm::Result<()> {
        let path = self.ctx.out_dir.join(checkpoint_name(update));
        let ck = Checkpoint {
            params: params.clone(),
            meta: TrainingMeta::from_config(self.config, update, self.fingerprint),
            alphabet: self.alphabet.to_vec(),
            label_names: self.label_names.to_vec(),
            pool: pool.cloned(),
        };
        store::save(&ck, &path)?;
        log::info!("update {update}: wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }
}

fn io_error(path: &std::path::Path, source: std::io::Error) -> ssrbm::Error {
    ssrbm::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn run(args: &TrainArgs, ctx: &Context) -> Result<()> {
    let mut rec = Recorder::new("train", args, &ctx.out_dir)?;
    let format = args.data_opts.resolve_format(&args.data)?;
    if args.log_every == 0 {
        bail!("--log-every must be at least 1");
    }
    if let Some(lr) = args.lr {
        if !(lr > 0.0 && lr.is_finite()) {
            bail!("--lr must be positive, got {lr}");
        }
    }
    let resumed = match &args.resume {
        Some(p) => {
            rec.input("resume", p)?;
            Some(load_model(p)?)
        }
        None => None,
    };

    let mut dataset = args
        .data_opts
        .load(&args.data, true, resumed.as_ref().map(|c| c.alphabet.as_slice()))?;
    rec.input("data", &args.data)?;
    if let Some(p) = &args.data_opts.labels_file {
        rec.input("labels", p)?;
    }
    if !dataset.is_labeled() {
        bail!("{} carries no labels; training needs one label per sample", args.data.display());
    }
    if let Some(frac) = args.gap_clean {
        let (cleaned, kept) = dataset.clean_gap_columns(frac)?;
        log::info!("gap cleaning kept {} of {} columns", kept.len(), dataset.n_visible());
        let path = ctx.out_dir.join("kept_columns.txt");
        data_io::write_columns(&path, &kept)?;
        rec.output(&path);
        dataset = cleaned;
    }
    if let Some(ck) = &resumed {
        dataset = check_resume(dataset, ck)?;
    }

    let preset = args
        .preset
        .map(DatasetPreset::from)
        .unwrap_or_else(|| default_preset(format, &dataset.alphabet));
    let meta = resumed.as_ref().map(|c| &c.meta);
    let regime = args
        .regime
        .map(Regime::from)
        .or(meta.map(|m| m.regime))
        .unwrap_or(Regime::Ff);
    let (preset_batch, preset_updates, preset_hidden) = preset.hyperparameters(regime);
    let same_regime = meta.filter(|m| m.regime == regime);
    let n_hidden = match (&resumed, args.hidden) {
        (Some(ck), Some(h)) if h != ck.layout().n_hidden => {
            bail!("--hidden {h} does not match the resumed model's {} hidden units", ck.layout().n_hidden)
        }
        (Some(ck), _) => ck.layout().n_hidden,
        (None, h) => h.unwrap_or(preset_hidden),
    };
    let total_updates = args.updates.unwrap_or(preset_updates);
    let start = meta.map_or(0, |m| m.update_count);
    if start > total_updates {
        bail!("the resumed model is at update {start}, past --updates {total_updates}");
    }
    let config = TrainConfig {
        regime,
        k: args.k.or(same_regime.map(|m| m.k as usize)).unwrap_or(regime.default_k()),
        learning_rate: args.lr.or(meta.map(|m| m.learning_rate)).unwrap_or(1e-2),
        minibatch_size: args
            .batch
            .or(meta.map(|m| m.minibatch_size as usize))
            .unwrap_or(preset_batch),
        total_updates,
        n_hidden,
        seed: args.seed.or(meta.map(|m| m.seed)).unwrap_or(0),
        checkpoint_schedule: schedule(args.checkpoint_every, &args.checkpoint_at, total_updates)?,
        combination: args
            .combination
            .map(Into::into)
            .or(meta.map(|m| m.combination))
            .unwrap_or_default(),
        readout: args.readout.map(Into::into).or(meta.map(|m| m.readout)).unwrap_or_default(),
    };
    config.validate()?;
    if config.minibatch_size > dataset.len() {
        log::warn!(
            "minibatch {} exceeds the {} training rows; using full-batch updates",
            config.minibatch_size,
            dataset.len()
        );
    }

    rec.seed(config.seed);
    rec.resolve("format", format);
    rec.resolve("preset", preset.name());
    rec.resolve("regime", regime.name());
    rec.resolve("k", config.k);
    rec.resolve("learning_rate", config.learning_rate);
    rec.resolve("minibatch_size", config.minibatch_size.min(dataset.len()));
    rec.resolve("total_updates", config.total_updates);
    rec.resolve("start_update", start);
    rec.resolve("n_hidden", config.n_hidden);
    rec.resolve("n_visible", dataset.n_visible());
    rec.resolve("n_states", dataset.n_states());
    rec.resolve("label_names", &dataset.label_names);
    rec.resolve("n_samples", dataset.len());
    rec.resolve("checkpoint_schedule", &config.checkpoint_schedule);
    rec.resolve("combination", combination_name(config.combination));
    rec.resolve("readout", readout_name(config.readout));
    rec.resolve("dataset_fingerprint", format!("{:016x}", dataset.fingerprint()));
    log::info!(
        "training {} (k={}, lr={}, batch={}, hidden={}) for updates {}..{}",
        regime.name(),
        config.k,
        config.learning_rate,
        config.minibatch_size.min(dataset.len()),
        config.n_hidden,
        start + 1,
        config.total_updates
    );

    let log_path = ctx.out_dir.join("train_log.tsv");
    let mut log = BufWriter::new(File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?);
    writeln!(log, "{}", LogRecord::HEADER)?;
    let mut observer = Observer {
        ctx,
        config: &config,
        fingerprint: dataset.fingerprint(),
        alphabet: &dataset.alphabet,
        label_names: &dataset.label_names,
        log,
        log_path: log_path.clone(),
        log_every: args.log_every,
        total: config.total_updates,
        written: Vec::new(),
    };
    let resume = match resumed {
        Some(ck) => ResumeState {
            params: Some(ck.params),
            pool: ck.pool,
            update: start,
        },
        None => ResumeState::default(),
    };
    trainer::train_from(&dataset, &config, resume, &mut observer)?;
    observer.log.flush().with_context(|| format!("writing {}", log_path.display()))?;
    rec.output(&log_path);
    let written = std::mem::take(&mut observer.written);
    for p in &written {
        rec.output(p);
    }
    rec.finish()?;
    if let Some(last) = written.last() {
        println!("{}", last.display());
    }
    Ok(())
}

/// Aligns the training data with a resumed model's alphabet and labels.
fn check_resume(dataset: LabeledDataset, ck: &Checkpoint) -> Result<LabeledDataset> {
    let layout = ck.layout();
    if dataset.n_visible() != layout.n_visible || dataset.alphabet != ck.alphabet {
        bail!(
            "training data has {} sites x {} states, the resumed model {} x {}",
            dataset.n_visible(),
            dataset.n_states(),
            layout.n_visible,
            layout.n_states
        );
    }
    if dataset.label_names != ck.label_names {
        bail!(
            "training labels ({}) differ from the resumed model's ({})",
            dataset.label_names.join(", "),
            ck.label_names.join(", ")
        );
    }
    ck.check_fingerprint(&dataset);
    if ck.meta.regime == Regime::Pcd && ck.pool.is_none() {
        log::warn!("resumed PCD model has no stored chains; starting a fresh persistent pool");
    }
    Ok(dataset)
}
