//! The `respira` command line.
//!
//! Exit codes: 0 on success, 1 when data or numerics fail (missing audio,
//! empty task sides, mismatched checkpoints, failed gradient check), 2 for
//! usage and configuration errors.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::RunConfig;

use crate::audio::encode_wav;
use crate::augment::{apply_augmentation_set, replay, AugmentationRecord, AugmentationSet, NoiseScene};
use crate::features::{ddae_train, DdaeConfig, DdaeModel, FeatureKind};
use crate::neuralnet::train::EpochReport;
use crate::neuralnet::{grad_check, Checkpoint, GradCheckOptions, ModelConfig, Network, Tensor};
use crate::pipeline::corpus::MANIFEST_NAME;
use crate::pipeline::workflow::{
    augmented_features, check_feature_match, collect_spectra, default_noise_bank, evaluate_task, feature_meta,
    labeled_features, recorded_feature_kind, task_splits,
};
use crate::pipeline::{
    builtin_task, extract_dataset_features, load_manifest, predict_clip, read_clip, split_dataset, to_canonical,
    train_classifier, write_corpus, write_manifest, Classifier, CorpusSpec, EvalReport, Extractor, FeatureCache,
    FeatureConfig, ManifestEntry,
};
use crate::{fsutil, rng, Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const SPLIT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);
const DEFAULT_OUT: &str = "out";
const DDAE_FILE: &str = "ddae.ckpt";
const CLASSIFIER_FILE: &str = "classifier.ckpt";
const GRADCHECK_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "respira", version, about = "Respiratory sound classification toolkit")]
struct Cli {
    /// Seed for every random choice [default: 20210611]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Suppress progress messages on stderr
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic ten-class corpus and its manifest
    Synth(SynthArgs),
    /// Write augmented copies of every recording with provenance sidecars
    Augment(AugmentArgs),
    /// Train the denoising autoencoder on spectra of the training split
    TrainDdae(TrainDdaeArgs),
    /// Extract and cache per-frame features for every recording
    Features(FeaturesArgs),
    /// Train a classifier for one diagnosis task
    Train(TrainArgs),
    /// Evaluate a classifier on the test split and write a JSON report
    Eval(EvalArgs),
    /// Classify individual WAV files
    Predict(PredictArgs),
    /// Compare analytic and finite-difference gradients of a downsized profile
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// JSON-lines manifest of recordings
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Directory manifest paths are relative to [default: the manifest's directory]
    #[arg(long, value_name = "DIR")]
    audio_root: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeatureArgs {
    /// Feature kind: ddae or mfcc [default: ddae]
    #[arg(long)]
    features: Option<FeatureKind>,
    /// Trained autoencoder checkpoint for ddae features
    #[arg(long, value_name = "PATH")]
    ddae: Option<PathBuf>,
    /// Mel filters for mfcc features
    #[arg(long, default_value_t = crate::features::DEFAULT_MELS)]
    n_mels: usize,
    /// Cepstral coefficients kept for mfcc features
    #[arg(long, default_value_t = crate::features::DEFAULT_COEFFS)]
    n_coeffs: usize,
}

#[derive(Debug, Args)]
struct DdaeArgs {
    /// Autoencoder training epochs
    #[arg(long, default_value_t = DdaeConfig::default().epochs)]
    ddae_epochs: usize,
    /// Largest number of spectra the autoencoder trains on (seeded subsample)
    #[arg(long, default_value_t = 4000)]
    max_spectra: usize,
    /// Fraction of spectrum bins zeroed by the corruption
    #[arg(long, default_value_t = crate::features::DEFAULT_CORRUPTION)]
    corruption: f64,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Recordings per class
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Recording length in seconds
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    /// Recordings sharing one simulated user
    #[arg(long, default_value_t = 2)]
    clips_per_user: usize,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated augmentation sets: ST, SP1, SP2, CRD, BN
    #[arg(long, value_delimiter = ',')]
    sets: Vec<AugmentationSet>,
    /// Directory of WAV background scenes for BN [default: built-in scenes]
    #[arg(long, value_name = "DIR")]
    noise_dir: Option<PathBuf>,
    /// Regenerate every output in the output directory from its sidecar and
    /// fail if any differs
    #[arg(long)]
    replay: bool,
}

#[derive(Debug, Args)]
struct TrainDdaeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    ddae: DdaeArgs,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    ddae: DdaeArgs,
    /// Train the autoencoder first instead of loading one with --ddae
    #[arg(long)]
    train_ddae: bool,
    /// Task id, 1 to 5 [default: 1]
    #[arg(long)]
    task: Option<u32>,
    /// Model profile: paper, paper-5 or paper-3 [default: paper]
    #[arg(long)]
    profile: Option<String>,
    /// Classifier epochs [default: from the profile]
    #[arg(long)]
    epochs: Option<usize>,
    /// Minibatch size [default: from the profile]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Adam learning rate [default: from the profile]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Comma-separated augmentation sets applied to training recordings
    #[arg(long, value_delimiter = ',')]
    augment: Vec<AugmentationSet>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Classifier checkpoint
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    /// Task id [default: the task the checkpoint was trained for]
    #[arg(long)]
    task: Option<u32>,
    /// Expected feature kind; fails when the checkpoint used another
    #[arg(long)]
    features: Option<FeatureKind>,
    /// Autoencoder checkpoint [default: ddae.ckpt beside the classifier]
    #[arg(long, value_name = "PATH")]
    ddae: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Classifier checkpoint
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
    /// Autoencoder checkpoint [default: ddae.ckpt beside the classifier]
    #[arg(long, value_name = "PATH")]
    ddae: Option<PathBuf>,
    /// WAV files to classify
    #[arg(required = true, value_name = "WAV")]
    files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Model profile to downsize and check
    #[arg(long, default_value = "paper")]
    profile: String,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Check a seeded random subset of this many parameters
    #[arg(long)]
    max_params: Option<usize>,
    #[arg(long, hide = true)]
    corrupt_gradient: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(m) => Failure::Usage(m),
            other => Failure::Data(other),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

struct Ctx {
    seed: u64,
    out: PathBuf,
    quiet: bool,
    cfg: RunConfig,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    /// Creates the output directory; failure is a usage error.
    fn out_dir(&self) -> std::result::Result<&Path, Failure> {
        if self.out.exists() && !self.out.is_dir() {
            return Err(Failure::Usage(format!("output {} is not a directory", self.out.display())));
        }
        std::fs::create_dir_all(&self.out)
            .map_err(|e| Failure::Usage(format!("cannot create output directory {}: {e}", self.out.display())))?;
        Ok(&self.out)
    }

    fn manifest(&self, data: &DataArgs) -> std::result::Result<(Vec<ManifestEntry>, PathBuf), Failure> {
        let path = data
            .manifest
            .clone()
            .or_else(|| self.cfg.manifest.clone())
            .ok_or_else(|| Failure::Usage("--manifest is required".into()))?;
        let root = data
            .audio_root
            .clone()
            .or_else(|| self.cfg.audio_root.clone())
            .unwrap_or_else(|| path.parent().map(Path::to_path_buf).unwrap_or_default());
        Ok((load_manifest(&path)?, root))
    }
}

/// Parses `std::env::args` and runs the command.
pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Runs the command line given by `args` (program name first) and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Outcome {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed).unwrap_or(crate::DEFAULT_SEED),
        out: cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| DEFAULT_OUT.into()),
        quiet: cli.quiet,
        cfg,
    };
    match cli.command {
        Command::Synth(a) => cmd_synth(&ctx, &a),
        Command::Augment(a) => cmd_augment(&ctx, &a),
        Command::TrainDdae(a) => cmd_train_ddae(&ctx, &a),
        Command::Features(a) => cmd_features(&ctx, &a),
        Command::Train(a) => cmd_train(&ctx, &a),
        Command::Eval(a) => cmd_eval(&ctx, &a),
        Command::Predict(a) => cmd_predict(&ctx, &a),
        Command::Gradcheck(a) => cmd_gradcheck(&ctx, &a),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fsutil::write_atomic(path, text.as_bytes())
}

fn cmd_synth(ctx: &Ctx, a: &SynthArgs) -> Outcome {
    if a.count == 0 {
        return Err(Failure::Usage("--count must be positive".into()));
    }
    let dir = ctx.out_dir()?;
    let spec = CorpusSpec {
        per_class: a.count,
        clips_per_user: a.clips_per_user,
        duration: a.duration,
        seed: ctx.seed,
    };
    let entries = write_corpus(dir, &spec).map_err(|e| match e {
        Error::Io { path, source } => Failure::Usage(format!("cannot write {}: {source}", path.display())),
        other => other.into(),
    })?;
    println!("wrote {} recordings and {}", entries.len(), dir.join(MANIFEST_NAME).display());
    Ok(())
}

fn missing_audio(entries: &[ManifestEntry], root: &Path) -> Outcome {
    let missing: Vec<String> = entries
        .iter()
        .map(|e| e.resolve(root))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(Error::EmptyInput(format!(
            "{} audio file(s) not found:\n  {}",
            missing.len(),
            missing.join("\n  ")
        ))))
    }
}

fn noise_bank(dir: Option<&Path>) -> Result<Vec<NoiseScene>> {
    let Some(dir) = dir else {
        return Ok(default_noise_bank());
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyInput(format!("no WAV scenes in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            Ok(NoiseScene {
                name: p.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
                clip: to_canonical(read_clip(&p)?)?,
            })
        })
        .collect()
}

fn output_stem(manifest_path: &str) -> String {
    let p = Path::new(manifest_path).with_extension("");
    p.to_string_lossy().replace(['/', '\\'], "_")
}

fn cmd_augment(ctx: &Ctx, a: &AugmentArgs) -> Outcome {
    if a.replay {
        return replay_outputs(ctx, a);
    }
    if a.sets.is_empty() {
        return Err(Failure::Usage("no augmentation sets given (use --sets ST,SP1,SP2,CRD,BN)".into()));
    }
    let (entries, root) = ctx.manifest(&a.data)?;
    missing_audio(&entries, &root)?;
    let dir = ctx.out_dir()?;
    let bank = noise_bank(a.noise_dir.as_deref())?;
    let mut produced = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let source = e.resolve(&root);
        let clip = to_canonical(read_clip(&source)?)?;
        for &set in &a.sets {
            let seed = rng::mix_keys(&[ctx.seed, i as u64, rng::str_key(set.as_str())]);
            let source_name = source.to_string_lossy();
            for (out, record) in apply_augmentation_set(&clip, &source_name, set, &bank, seed)? {
                let name = format!("{}.{}.{}", output_stem(&e.path), set, record.output_index);
                fsutil::write_atomic(&dir.join(format!("{name}.wav")), &encode_wav(&out))?;
                fsutil::write_atomic(&dir.join(format!("{name}.json")), record.to_json().as_bytes())?;
                produced.push(ManifestEntry {
                    path: format!("{name}.wav"),
                    ..e.clone()
                });
            }
        }
        ctx.log(format!("[{}/{}] {}", i + 1, entries.len(), e.path));
    }
    write_manifest(&dir.join(MANIFEST_NAME), &produced)?;
    println!("wrote {} augmented recordings to {}", produced.len(), dir.display());
    Ok(())
}

fn replay_outputs(ctx: &Ctx, a: &AugmentArgs) -> Outcome {
    let dir = &ctx.out;
    let bank = noise_bank(a.noise_dir.as_deref())?;
    let mut sidecars: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    sidecars.sort();
    if sidecars.is_empty() {
        return Err(Failure::Data(Error::EmptyInput(format!("no sidecars in {}", dir.display()))));
    }
    let mut mismatched = Vec::new();
    for side in &sidecars {
        let text = std::fs::read_to_string(side).map_err(|e| Error::io(side, e))?;
        let record = AugmentationRecord::from_json(&text)?;
        let source = to_canonical(read_clip(Path::new(&record.source_path))?)?;
        let regenerated = encode_wav(&replay(&record, &source, &bank)?);
        let wav = side.with_extension("wav");
        let stored = std::fs::read(&wav).map_err(|e| Error::io(&wav, e))?;
        if stored != regenerated {
            mismatched.push(wav.display().to_string());
        }
    }
    if !mismatched.is_empty() {
        return Err(Failure::Data(Error::Numeric(format!(
            "{} of {} outputs differ from their replay:\n  {}",
            mismatched.len(),
            sidecars.len(),
            mismatched.join("\n  ")
        ))));
    }
    println!("replayed {} outputs, all identical", sidecars.len());
    Ok(())
}

fn ddae_config(ctx: &Ctx, a: &DdaeArgs) -> DdaeConfig {
    DdaeConfig {
        epochs: a.ddae_epochs,
        corruption_level: a.corruption,
        seed: ctx.seed,
        ..DdaeConfig::default()
    }
}

/// Trains the autoencoder on spectra of the training split and saves it
/// with its loss history in the output directory.
fn train_ddae(ctx: &Ctx, a: &DdaeArgs, entries: &[ManifestEntry], root: &Path) -> std::result::Result<DdaeModel, Failure> {
    let dir = ctx.out_dir()?;
    let train = split_dataset(entries, SPLIT_RATIOS, ctx.seed)?.train;
    missing_audio(&train, root)?;
    let spectra = collect_spectra(&train, root, a.max_spectra, ctx.seed)?;
    ctx.log(format!("training autoencoder on {} spectra", spectra.len()));
    let model = ddae_train(&spectra, ddae_config(ctx, a), &mut |epoch, loss| {
        ctx.log(format!("ddae epoch {epoch}: loss {loss:.6}"));
    })?;
    model.save(&dir.join(DDAE_FILE))?;
    write_json(&dir.join("ddae_history.json"), &json!({ "loss": model.history() }))?;
    Ok(model)
}

fn cmd_train_ddae(ctx: &Ctx, a: &TrainDdaeArgs) -> Outcome {
    let (entries, root) = ctx.manifest(&a.data)?;
    let model = train_ddae(ctx, &a.ddae, &entries, &root)?;
    let h = model.history();
    println!(
        "autoencoder loss {:.6} -> {:.6}; saved {}",
        h[0],
        h[h.len() - 1],
        ctx.out.join(DDAE_FILE).display()
    );
    Ok(())
}

fn feature_kind(ctx: &Ctx, a: &FeatureArgs) -> FeatureKind {
    a.features.or(ctx.cfg.features).unwrap_or(FeatureKind::Ddae)
}

fn load_ddae(path: Option<PathBuf>) -> std::result::Result<DdaeModel, Failure> {
    let path = path.ok_or_else(|| Failure::Usage("ddae features need --ddae CHECKPOINT or --train-ddae".into()))?;
    Ok(DdaeModel::load(&path)?)
}

fn cmd_features(ctx: &Ctx, a: &FeaturesArgs) -> Outcome {
    let (entries, root) = ctx.manifest(&a.data)?;
    missing_audio(&entries, &root)?;
    let kind = feature_kind(ctx, &a.features);
    let model = match kind {
        FeatureKind::Ddae => Some(load_ddae(a.features.ddae.clone().or_else(|| ctx.cfg.ddae_checkpoint.clone()))?),
        FeatureKind::Mfcc => None,
    };
    let config = FeatureConfig {
        kind,
        n_mels: a.features.n_mels,
        n_coeffs: a.features.n_coeffs,
    };
    let extractor = Extractor::new(config, model.as_ref())?;
    let dir = ctx.out_dir()?;
    let cache = FeatureCache::new(dir.join("cache"))?;
    let feats = extract_dataset_features(&entries, &root, &extractor, Some(&cache))?;
    let hits = feats.iter().filter(|f| f.cache_hit).count();
    let clips: Vec<serde_json::Value> = entries
        .iter()
        .zip(&feats)
        .map(|(e, f)| json!({ "path": e.path, "frames": f.frames.len() }))
        .collect();
    write_json(
        &dir.join("features.json"),
        &json!({ "feature_tag": extractor.tag(), "dim": extractor.dim(), "clips": clips }),
    )?;
    println!(
        "{} features for {} recordings ({} from cache)",
        kind.as_str(),
        feats.len(),
        hits
    );
    Ok(())
}

fn model_config(ctx: &Ctx, a: &TrainArgs) -> Result<ModelConfig> {
    let name = a.profile.clone().or_else(|| ctx.cfg.profile.clone()).unwrap_or_else(|| "paper".into());
    let mut m = ModelConfig::profile(&name)?;
    if let Some(e) = a.epochs.or(ctx.cfg.epochs) {
        m.epochs = e;
    }
    if let Some(b) = a.batch_size.or(ctx.cfg.batch_size) {
        m.batch_size = b;
    }
    if let Some(lr) = a.learning_rate.or(ctx.cfg.learning_rate) {
        m.optimizer.learning_rate = lr;
    }
    m.seed = ctx.seed;
    m.validate()?;
    Ok(m)
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> Outcome {
    let model_cfg = model_config(ctx, a)?;
    let kind = feature_kind(ctx, &a.features);
    let task = builtin_task(a.task.or(ctx.cfg.task).unwrap_or(1))?;
    let (entries, root) = ctx.manifest(&a.data)?;
    let splits = task_splits(&entries, &task, SPLIT_RATIOS, ctx.seed)?;
    missing_audio(&[splits.train.clone(), splits.val.clone()].concat(), &root)?;
    let dir = ctx.out_dir()?.to_path_buf();
    let ddae = match kind {
        FeatureKind::Mfcc => None,
        FeatureKind::Ddae if a.train_ddae => Some(train_ddae(ctx, &a.ddae, &entries, &root)?),
        FeatureKind::Ddae => Some(load_ddae(a.features.ddae.clone().or_else(|| ctx.cfg.ddae_checkpoint.clone()))?),
    };
    let config = FeatureConfig {
        kind,
        n_mels: a.features.n_mels,
        n_coeffs: a.features.n_coeffs,
    };
    let extractor = Extractor::new(config, ddae.as_ref())?;
    let cache = FeatureCache::new(dir.join("cache"))?;
    ctx.log(format!(
        "task {} ({}): {} train, {} val recordings",
        task.task_id,
        task.name,
        splits.train.len(),
        splits.val.len()
    ));
    let mut train = labeled_features(&splits.train, &splits.train_labels, &root, &extractor, Some(&cache))?;
    if !a.augment.is_empty() {
        train.extend(augmented_features(
            &splits.train,
            &splits.train_labels,
            &root,
            &extractor,
            &a.augment,
            ctx.seed,
        )?);
    }
    let val = labeled_features(&splits.val, &splits.val_labels, &root, &extractor, Some(&cache))?;
    if val.is_empty() {
        return Err(Failure::Data(Error::TaskData(format!(
            "task {}: the validation split has no recordings",
            task.task_id
        ))));
    }
    let mut meta = feature_meta(&extractor, &task);
    meta.insert("split_seed".into(), ctx.seed.to_string());
    let outcome = train_classifier(&train, &val, model_cfg, meta, &mut |r: &EpochReport| {
        ctx.log(format!(
            "epoch {}: loss {:.4}, accuracy {:.2}%, val accuracy {:.2}%",
            r.epoch,
            r.loss,
            r.accuracy,
            r.val_accuracy.unwrap_or(f64::NAN)
        ));
    })?;
    let ckpt = &outcome.checkpoint;
    ckpt.save(&dir.join(CLASSIFIER_FILE))?;
    let h = &ckpt.history;
    write_json(
        &dir.join("history.json"),
        &json!({
            "loss": h.loss,
            "accuracy": h.accuracy,
            "val_accuracy": h.val_accuracy,
            "best_epoch": outcome.best_epoch,
        }),
    )?;
    match h.val_accuracy.last() {
        Some(last) => println!(
            "final val accuracy {last:.2}% (best epoch {}); saved {}",
            outcome.best_epoch,
            dir.join(CLASSIFIER_FILE).display()
        ),
        None => println!("no epochs run; saved initialization to {}", dir.join(CLASSIFIER_FILE).display()),
    }
    Ok(())
}

fn load_classifier(ctx: &Ctx, path: Option<PathBuf>) -> std::result::Result<(Classifier, PathBuf), Failure> {
    let path = path
        .or_else(|| ctx.cfg.checkpoint.clone())
        .ok_or_else(|| Failure::Usage("--checkpoint is required".into()))?;
    let ckpt = Checkpoint::load(&path)?;
    Ok((Classifier::from_checkpoint(&ckpt)?, path))
}

/// The autoencoder a classifier needs, from `explicit`, the run config or
/// the classifier's directory.
fn classifier_ddae(ctx: &Ctx, classifier: &Classifier, ckpt: &Path, explicit: Option<PathBuf>) -> std::result::Result<Option<DdaeModel>, Failure> {
    if recorded_feature_kind(classifier) != Some(FeatureKind::Ddae) {
        return Ok(None);
    }
    let path = explicit
        .or_else(|| ctx.cfg.ddae_checkpoint.clone())
        .unwrap_or_else(|| ckpt.parent().unwrap_or(Path::new(".")).join(DDAE_FILE));
    Ok(Some(DdaeModel::load(&path)?))
}

fn recorded_extractor<'a>(classifier: &Classifier, ddae: Option<&'a DdaeModel>) -> Result<Extractor<'a>> {
    let meta = classifier.meta();
    let num = |key: &str, default: usize| meta.get(key).and_then(|v| v.parse().ok()).unwrap_or(default);
    let config = FeatureConfig {
        kind: recorded_feature_kind(classifier)
            .ok_or_else(|| Error::Checkpoint("classifier does not record its feature kind".into()))?,
        n_mels: num("n_mels", crate::features::DEFAULT_MELS),
        n_coeffs: num("n_coeffs", crate::features::DEFAULT_COEFFS),
    };
    let extractor = Extractor::new(config, ddae)?;
    check_feature_match(classifier, &extractor)?;
    Ok(extractor)
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> Outcome {
    let (classifier, ckpt_path) = load_classifier(ctx, a.checkpoint.clone())?;
    let recorded = recorded_feature_kind(&classifier);
    if let Some(expected) = a.features.or(ctx.cfg.features) {
        if recorded != Some(expected) {
            return Err(Failure::Data(Error::Checkpoint(format!(
                "checkpoint was trained on {} features, not {}",
                recorded.map_or("unknown", FeatureKind::as_str),
                expected.as_str()
            ))));
        }
    }
    let ddae = classifier_ddae(ctx, &classifier, &ckpt_path, a.ddae.clone())?;
    let extractor = recorded_extractor(&classifier, ddae.as_ref())?;
    let meta = classifier.meta();
    let task_id = match a.task.or(ctx.cfg.task) {
        Some(t) => t,
        None => meta
            .get("task_id")
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Failure::Usage("checkpoint records no task; pass --task".into()))?,
    };
    let task = builtin_task(task_id)?;
    let split_seed = meta.get("split_seed").and_then(|s| s.parse().ok()).unwrap_or(ctx.seed);
    let (entries, root) = ctx.manifest(&a.data)?;
    let splits = task_splits(&entries, &task, SPLIT_RATIOS, split_seed)?;
    if splits.test.is_empty() {
        return Err(Failure::Data(Error::TaskData(format!(
            "task {}: the test split has no recordings",
            task.task_id
        ))));
    }
    missing_audio(&splits.test, &root)?;
    let clips = labeled_features(&splits.test, &splits.test_labels, &root, &extractor, None)?;
    let report = EvalReport {
        tasks: vec![evaluate_task(&classifier, &clips, &task, extractor.config().kind)?],
    };
    let dir = ctx.out_dir()?;
    fsutil::write_atomic(&dir.join("report.json"), report.to_json().as_bytes())?;
    print!("{}", report.to_table());
    Ok(())
}

fn cmd_predict(ctx: &Ctx, a: &PredictArgs) -> Outcome {
    let (classifier, ckpt_path) = load_classifier(ctx, a.checkpoint.clone())?;
    let ddae = classifier_ddae(ctx, &classifier, &ckpt_path, a.ddae.clone())?;
    let extractor = recorded_extractor(&classifier, ddae.as_ref())?;
    for path in &a.files {
        let p = predict_clip(&classifier, &read_clip(path)?, &extractor)?;
        println!(
            "{}",
            json!({ "path": path.display().to_string(), "label": p.label, "probabilities": p.probabilities })
        );
    }
    Ok(())
}

/// Seeded unit-variance inputs with alternating labels.
fn gradcheck_batch(dim: usize, n: usize, seed: u64) -> Result<(Tensor, Vec<usize>)> {
    use rand_distr::{Distribution, StandardNormal};
    let mut g = rng::stream(&[seed, 0x4743_4241]);
    let data = (0..n * dim).map(|_| StandardNormal.sample(&mut g)).collect();
    Ok((Tensor::new(vec![n, dim], data)?, (0..n).map(|i| i % 2).collect()))
}

fn cmd_gradcheck(ctx: &Ctx, a: &GradcheckArgs) -> Outcome {
    let mut cfg = ModelConfig::profile(&a.profile)?.downsized(3, 8);
    cfg.seed = ctx.seed;
    let net = Network::new(cfg)?;
    let (x, y) = gradcheck_batch(net.config().input_dim, 3, ctx.seed)?;
    let opts = GradCheckOptions {
        epsilon: a.epsilon,
        max_params: a.max_params,
        seed: ctx.seed,
        corrupt_gradient: a.corrupt_gradient,
    };
    let report = grad_check(&net, &x, &y, &opts)?;
    println!(
        "max relative error {:.3e} over {} parameters (worst: {}[{}])",
        report.max_relative_error, report.checked, report.worst.0, report.worst.1
    );
    if report.max_relative_error < GRADCHECK_THRESHOLD {
        Ok(())
    } else {
        Err(Failure::Data(Error::Numeric(format!(
            "gradient check failed: {:.3e} is not below {GRADCHECK_THRESHOLD:e}",
            report.max_relative_error
        ))))
    }
}
