//! Command-line front end: argument definitions and the `cmd_*` entry points.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ser_audit::data::load_manifest;
use ser_audit::perturb::{augment_dataset, AugmentationKind};
use ser_audit::predictor::{
    collect_predictions, train_baseline, CollectOptions, PredictorHandle, PredictorSpec,
    TrainConfig,
};
use ser_audit::report::{
    compare, digest_file, evaluate, AuditReport, EvaluateOptions, TrainingReport, TrainingRun,
    REPORT_VERSION, TOOL_VERSION,
};
use ser_audit::synth::{generate_dataset, SynthConfig};
use ser_audit::LabelScale;

/// Exit status of a run that completed without section gaps or sample errors.
pub const EXIT_OK: i32 = 0;
/// Exit status when outputs were written but some samples or sections failed.
pub const EXIT_INCOMPLETE: i32 = 1;
/// Exit status for fatal errors (bad arguments, unreadable inputs).
pub const EXIT_FATAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ser-audit", version, about = "Audit speech emotion models for correctness, robustness and fairness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write augmented copies of every clip plus a draw log and manifest.
    Augment(AugmentArgs),
    /// Score a predictor and write the audit report.
    Evaluate(EvaluateArgs),
    /// Train the built-in baseline, optionally over several training fractions.
    TrainBaseline(TrainArgs),
    /// Collect predictions into a prediction file.
    Predict(PredictArgs),
    /// Compare two audit reports.
    Compare(CompareArgs),
    /// Generate a synthetic labelled corpus.
    Synth(SynthArgs),
}

/// Parsed `--kinds` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KindList(pub Vec<AugmentationKind>);

fn parse_kind_list(s: &str) -> Result<KindList, String> {
    parse_kinds(s).map(KindList)
}

/// Comma list of augmentation kinds; `all` and `none` are accepted.
pub fn parse_kinds(s: &str) -> Result<Vec<AugmentationKind>, String> {
    match s.trim() {
        "all" => return Ok(AugmentationKind::ALL.to_vec()),
        "none" | "" => return Ok(Vec::new()),
        _ => {}
    }
    let mut kinds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let kind: AugmentationKind = part.parse().map_err(|e: ser_audit::Error| e.to_string())?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    Ok(kinds)
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let f: f64 = s.trim().parse().map_err(|_| format!("bad fraction `{s}`"))?;
    if f > 0.0 && f <= 1.0 {
        Ok(f)
    } else {
        Err(format!("fraction {f} outside (0, 1]"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct SeedArg {
    /// Global seed for augmentation draws, bootstrap and training.
    #[arg(long, env = "SER_AUDIT_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_parser = parse_kind_list, default_value = "all")]
    pub kinds: KindList,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output directory; the augmented manifest is written beside it as `<dir>.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// file:<path> | exec:<cmdline> | baseline:<model-path>
    #[arg(long)]
    pub predictor: PredictorSpec,
    #[arg(long, value_parser = parse_kind_list, default_value = "all")]
    pub kinds: KindList,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
    #[arg(long, default_value_t = 200)]
    pub min_speaker_samples: usize,
    #[arg(long, default_value_t = 200)]
    pub bootstrap_draws: usize,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap_reps: usize,
    /// Pipelining depth for external predictors.
    #[arg(long, default_value_t = 1)]
    pub max_inflight: usize,
    /// Keep augmented audio sent to external predictors here.
    #[arg(long)]
    pub workdir: Option<PathBuf>,
    /// Report JSON path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Dev manifest used for checkpoint selection.
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// One fraction or a comma list for a sweep, e.g. `1.0,0.5,0.25`.
    #[arg(long, value_delimiter = ',', value_parser = parse_fraction, default_value = "1.0")]
    pub train_fraction: Vec<f64>,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Model path. In a sweep each fraction gets `<stem>.frac-<f>.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Training report path; defaults to `<stem>.training.json` beside the model.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub predictor: PredictorSpec,
    /// Augmented variants to predict besides the clean clip.
    #[arg(long, value_parser = parse_kind_list, default_value = "none")]
    pub kinds: KindList,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, default_value_t = 1)]
    pub max_inflight: usize,
    /// Prediction file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    pub report_a: PathBuf,
    pub report_b: PathBuf,
    /// Write the comparison as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    #[arg(long, default_value_t = 2)]
    pub speakers: usize,
    #[arg(long, default_value_t = 0.02)]
    pub label_noise: f64,
    #[arg(long, default_value_t = 0.3)]
    pub dev_fraction: f64,
    #[arg(long, default_value = "seven-point")]
    pub scale: LabelScale,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output directory for `audio/`, `all.csv`, `train.csv` and `dev.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

/// What a command produced, for callers that do not go through `main`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    /// Human-readable summary printed on stdout.
    pub summary: String,
}

impl Outcome {
    fn new(ok: bool, summary: String) -> Self {
        Self {
            exit_code: if ok { EXIT_OK } else { EXIT_INCOMPLETE },
            summary,
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Augment(a) => cmd_augment(&a),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|(o, _)| o),
        Command::TrainBaseline(a) => cmd_train_baseline(&a).map(|(o, _)| o),
        Command::Predict(a) => cmd_predict(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn sibling_manifest(out_dir: &Path) -> anyhow::Result<PathBuf> {
    let name = out_dir
        .file_name()
        .with_context(|| format!("{} has no directory name", out_dir.display()))?;
    Ok(out_dir.with_file_name(format!("{}.csv", name.to_string_lossy())))
}

pub fn cmd_augment(args: &AugmentArgs) -> anyhow::Result<Outcome> {
    if args.kinds.0.is_empty() {
        bail!("no augmentation kinds selected");
    }
    let manifest = load_manifest(&args.manifest)?;
    let outcome = augment_dataset(&manifest, &args.kinds.0, args.seed.seed, &args.out)?;
    let manifest_path = sibling_manifest(&args.out)?;
    if let Some(m) = &outcome.manifest {
        m.save(&manifest_path)?;
    }
    let mut summary = format!(
        "wrote {} files to {}\ndraw log: {}\n",
        outcome.files.len(),
        args.out.display(),
        outcome.draw_log.display()
    );
    if outcome.manifest.is_some() {
        summary += &format!("manifest: {}\n", manifest_path.display());
    }
    for (id, kind, message) in &outcome.errors {
        let kind = kind.map(|k| k.name()).unwrap_or("*");
        summary += &format!("error {id}/{kind}: {message}\n");
    }
    Ok(Outcome::new(outcome.is_clean(), summary))
}

/// Ends the predictor session; a failure is noted in the summary.
fn close_quietly(handle: PredictorHandle, summary: &mut String) -> bool {
    match handle.close() {
        Ok(()) => true,
        Err(e) => {
            summary.push_str(&format!("predictor shutdown failed: {e}\n"));
            false
        }
    }
}

fn predictor_inputs(spec: &PredictorSpec) -> anyhow::Result<Vec<ser_audit::report::InputDigest>> {
    Ok(match spec {
        PredictorSpec::File(p) => vec![digest_file("predictions", p)?],
        PredictorSpec::Baseline(p) => vec![digest_file("model", p)?],
        PredictorSpec::Exec(_) => Vec::new(),
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<(Outcome, AuditReport)> {
    let manifest = load_manifest(&args.manifest)?;
    let mut inputs = vec![digest_file("manifest", &args.manifest)?];
    inputs.extend(predictor_inputs(&args.predictor)?);
    let mut handle = PredictorHandle::open_with(&args.predictor, args.max_inflight)
        .with_context(|| format!("opening predictor {}", args.predictor))?;
    let opts = EvaluateOptions {
        kinds: args.kinds.0.clone(),
        seed: args.seed.seed,
        threshold: args.threshold,
        min_speaker_samples: args.min_speaker_samples,
        bootstrap_draws: args.bootstrap_draws,
        bootstrap_reps: args.bootstrap_reps,
        workdir: args.workdir.clone(),
        inputs,
    };
    let report = evaluate(&manifest, &mut handle, &opts)?;
    report.save(&args.out)?;
    let mut summary = report.summary();
    let closed = close_quietly(handle, &mut summary);
    Ok((Outcome::new(report.is_complete() && closed, summary), report))
}

fn fraction_model_path(out: &Path, fraction: f64) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    out.with_file_name(format!("{stem}.frac-{fraction}.json"))
}

pub fn cmd_train_baseline(args: &TrainArgs) -> anyhow::Result<(Outcome, TrainingReport)> {
    let fractions = &args.train_fraction;
    if fractions.is_empty() {
        bail!("no training fraction given");
    }
    let train = load_manifest(&args.manifest)?;
    let dev = load_manifest(&args.dev)?;
    let mut runs = Vec::new();
    for &fraction in fractions {
        let cfg = TrainConfig {
            learning_rate: args.learning_rate,
            epochs: args.epochs,
            batch_size: args.batch_size,
            train_fraction: fraction,
            seed: args.seed.seed,
        };
        let outcome = train_baseline(&train, &dev, &cfg)
            .with_context(|| format!("training with fraction {fraction}"))?;
        let model_path = if fractions.len() == 1 {
            args.out.clone()
        } else {
            fraction_model_path(&args.out, fraction)
        };
        outcome.model.save(&model_path)?;
        runs.push(TrainingRun {
            fraction,
            model: model_path.display().to_string(),
            log: outcome.log,
        });
    }
    let report = TrainingReport {
        report_version: REPORT_VERSION,
        tool_version: TOOL_VERSION.into(),
        inputs: vec![
            digest_file("train_manifest", &args.manifest)?,
            digest_file("dev_manifest", &args.dev)?,
        ],
        runs,
    };
    let report_path = args.report.clone().unwrap_or_else(|| {
        let stem = args
            .out
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        args.out.with_file_name(format!("{stem}.training.json"))
    });
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    std::fs::write(&report_path, json)
        .with_context(|| format!("writing {}", report_path.display()))?;
    let summary = format!("{}training report: {}\n", report.summary(), report_path.display());
    Ok((Outcome::new(true, summary), report))
}

pub fn cmd_predict(args: &PredictArgs) -> anyhow::Result<Outcome> {
    let manifest = load_manifest(&args.manifest)?;
    let mut handle = PredictorHandle::open_with(&args.predictor, args.max_inflight)
        .with_context(|| format!("opening predictor {}", args.predictor))?;
    let collected = collect_predictions(
        &manifest,
        &mut handle,
        &CollectOptions {
            kinds: args.kinds.0.clone(),
            seed: args.seed.seed,
            workdir: None,
        },
    )?;
    collected.predictions.save(&args.out)?;
    let mut summary = format!(
        "wrote {} predictions to {}\n",
        collected.predictions.len(),
        args.out.display()
    );
    for f in &collected.failures {
        summary += &format!("error {}/{}: {}\n", f.sample_id, f.variant, f.message);
    }
    for (id, variant) in &collected.unmatched {
        summary += &format!("unmatched {id}/{variant}\n");
    }
    let closed = close_quietly(handle, &mut summary);
    Ok(Outcome::new(collected.failures.is_empty() && closed, summary))
}

pub fn cmd_compare(args: &CompareArgs) -> anyhow::Result<Outcome> {
    let a = AuditReport::load(&args.report_a)?;
    let b = AuditReport::load(&args.report_b)?;
    let comparison = compare(&a, &b);
    if let Some(out) = &args.out {
        let mut json = serde_json::to_string_pretty(&comparison)?;
        json.push('\n');
        std::fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(Outcome::new(true, comparison.summary()))
}

pub fn cmd_synth(args: &SynthArgs) -> anyhow::Result<Outcome> {
    let cfg = SynthConfig {
        count: args.count,
        seed: args.seed.seed,
        speakers: args.speakers,
        label_noise: args.label_noise,
        dev_fraction: args.dev_fraction,
        scale: args.scale,
    };
    let ds = generate_dataset(&cfg, &args.out)?;
    Ok(Outcome::new(
        true,
        format!(
            "wrote {} clips ({} train, {} dev) to {}\n",
            ds.all.len(),
            ds.train.len(),
            ds.dev.len(),
            args.out.display()
        ),
    ))
}
