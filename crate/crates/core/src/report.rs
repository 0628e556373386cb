//! Audit reports: evaluation of one predictor, comparison of two reports and
//! the record of a training sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{filter_speakers_min_samples, DatasetManifest, Dimension, PerDimension, Sex};
use crate::error::{Error, Result};
use crate::metrics::{
    ccc, robustness_score, spearman, speaker_bootstrap_ccc, BootstrapConfig, BootstrapEstimate,
    DimensionFairness, FairnessReport, PairedSeries, RobustnessConfig,
};
use crate::perturb::AugmentationKind;
use crate::predictor::{collect_predictions, CollectOptions, PredictorHandle, TrainingLog, CLEAN};

pub const REPORT_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "ser-audit";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// SHA-256 of a file's bytes.
pub fn digest_file(role: &str, path: &Path) -> Result<InputDigest> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let sha256 = hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
    Ok(InputDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub kinds: Vec<String>,
    pub threshold: f64,
    pub min_speaker_samples: usize,
    pub bootstrap_draws: usize,
    pub bootstrap_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSection {
    pub threshold: f64,
    pub per_augmentation: BTreeMap<String, PerDimension<f64>>,
    /// Mean over the augmentations present in `per_augmentation`.
    pub mean: PerDimension<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessSection {
    pub female_samples: usize,
    pub male_samples: usize,
    pub excluded_unknown_sex: usize,
    pub dimensions: FairnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerRow {
    pub speaker_id: String,
    pub sex: Sex,
    pub samples: usize,
    pub bootstrap: PerDimension<BootstrapEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerSection {
    pub min_samples: usize,
    pub draw_size: usize,
    pub repetitions: usize,
    pub rows: Vec<SpeakerRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportError {
    pub section: String,
    pub sample_id: Option<String>,
    pub variant: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmatchedPrediction {
    pub sample_id: String,
    pub variant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub report_version: u32,
    pub predictor: String,
    pub provenance: Provenance,
    pub samples: usize,
    pub correctness: Option<PerDimension<f64>>,
    pub robustness: Option<RobustnessSection>,
    pub fairness: Option<FairnessSection>,
    pub speakers: Option<SpeakerSection>,
    /// Sections computed from partial inputs or not computed at all, e.g.
    /// `robustness/gain`.
    pub incomplete: Vec<String>,
    pub errors: Vec<ReportError>,
    pub unmatched_predictions: Vec<UnmatchedPrediction>,
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub kinds: Vec<AugmentationKind>,
    pub seed: u64,
    pub threshold: f64,
    pub min_speaker_samples: usize,
    pub bootstrap_draws: usize,
    pub bootstrap_reps: usize,
    pub workdir: Option<PathBuf>,
    /// Digests recorded in the provenance block.
    pub inputs: Vec<InputDigest>,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        let boot = BootstrapConfig::default();
        Self {
            kinds: AugmentationKind::ALL.to_vec(),
            seed: 0,
            threshold: RobustnessConfig::default().threshold,
            min_speaker_samples: 200,
            bootstrap_draws: boot.draw_size,
            bootstrap_reps: boot.repetitions,
            workdir: None,
            inputs: Vec::new(),
        }
    }
}

fn series(
    idx: &[usize],
    truth: &[[f64; 3]],
    pred: &[[f64; 3]],
    dim: Dimension,
) -> Result<PairedSeries> {
    let d = dim.index();
    PairedSeries::new(
        idx.iter().map(|&i| truth[i][d]).collect(),
        idx.iter().map(|&i| pred[i][d]).collect(),
    )
}

/// Runs the full audit of `handle` on `manifest`.
///
/// Missing predictions and failed sections do not abort the run; they are
/// listed in `errors` and flagged in `incomplete`.
pub fn evaluate(
    manifest: &DatasetManifest,
    handle: &mut PredictorHandle,
    opts: &EvaluateOptions,
) -> Result<AuditReport> {
    let robust_cfg = RobustnessConfig::new(opts.threshold)?;
    let boot_cfg = BootstrapConfig {
        draw_size: opts.bootstrap_draws,
        repetitions: opts.bootstrap_reps,
        seed: opts.seed,
    };
    boot_cfg.validate()?;

    let collected = collect_predictions(
        manifest,
        handle,
        &CollectOptions {
            kinds: opts.kinds.clone(),
            seed: opts.seed,
            workdir: opts.workdir.clone(),
        },
    )?;
    let preds = &collected.predictions;
    let n = manifest.len();
    let truth: Vec<[f64; 3]> = manifest.labels().iter().map(|t| t.to_array()).collect();
    let variant_preds = |variant: &str| -> Vec<Option<[f64; 3]>> {
        manifest
            .records
            .iter()
            .map(|r| preds.get(&r.sample_id, variant).map(|t| t.to_array()))
            .collect()
    };
    let clean = variant_preds(CLEAN);
    let clean_or_nan: Vec<[f64; 3]> = clean.iter().map(|p| p.unwrap_or([f64::NAN; 3])).collect();

    let mut incomplete = BTreeSet::new();
    let mut errors: Vec<ReportError> = collected
        .failures
        .iter()
        .map(|f| ReportError {
            section: "predictions".into(),
            sample_id: Some(f.sample_id.clone()),
            variant: Some(f.variant.clone()),
            message: f.message.clone(),
        })
        .collect();
    let mut section_error = |section: &str, e: Error, incomplete: &mut BTreeSet<String>| {
        incomplete.insert(section.to_string());
        errors.push(ReportError {
            section: section.to_string(),
            sample_id: None,
            variant: None,
            message: e.to_string(),
        });
    };

    // correctness
    let have_clean: Vec<usize> = (0..n).filter(|&i| clean[i].is_some()).collect();
    if have_clean.len() < n {
        incomplete.insert("correctness".into());
    }
    let correctness = match PerDimension::try_from_fn(|d| {
        ccc(&series(&have_clean, &truth, &clean_or_nan, d)?)
    }) {
        Ok(v) => Some(v),
        Err(e) => {
            section_error("correctness", e, &mut incomplete);
            None
        }
    };

    // robustness
    let robustness = if opts.kinds.is_empty() {
        None
    } else {
        let mut per_augmentation = BTreeMap::new();
        for &kind in &opts.kinds {
            let section = format!("robustness/{}", kind.name());
            let aug = variant_preds(kind.name());
            let both: Vec<usize> = (0..n)
                .filter(|&i| clean[i].is_some() && aug[i].is_some())
                .collect();
            if both.len() < n {
                incomplete.insert(section.clone());
            }
            if both.is_empty() {
                continue;
            }
            let result = PerDimension::try_from_fn(|d| {
                let c: Vec<f64> = both.iter().map(|&i| clean_or_nan[i][d.index()]).collect();
                let a: Vec<f64> = both.iter().map(|&i| aug[i].unwrap()[d.index()]).collect();
                robustness_score(&c, &a, &robust_cfg)
            });
            match result {
                Ok(v) => {
                    per_augmentation.insert(kind.name().to_string(), v);
                }
                Err(e) => section_error(&section, e, &mut incomplete),
            }
        }
        let k = per_augmentation.len() as f64;
        let mean = PerDimension::from_fn(|d| {
            per_augmentation.values().map(|v| *v.get(d)).sum::<f64>() / k
        });
        (!per_augmentation.is_empty()).then_some(RobustnessSection {
            threshold: opts.threshold,
            per_augmentation,
            mean,
        })
    };

    // fairness
    let by_sex = |sex: Sex| -> (usize, Vec<usize>) {
        let all: Vec<usize> = (0..n).filter(|&i| manifest.records[i].sex == sex).collect();
        let have = all.iter().copied().filter(|&i| clean[i].is_some()).collect();
        (all.len(), have)
    };
    let (f_total, female) = by_sex(Sex::Female);
    let (m_total, male) = by_sex(Sex::Male);
    if female.len() < f_total || male.len() < m_total {
        incomplete.insert("fairness".into());
    }
    let fairness = match PerDimension::try_from_fn(|d| {
        DimensionFairness::compute(
            &series(&female, &truth, &clean_or_nan, d)?,
            &series(&male, &truth, &clean_or_nan, d)?,
        )
    }) {
        Ok(dimensions) => Some(FairnessSection {
            female_samples: female.len(),
            male_samples: male.len(),
            excluded_unknown_sex: n - f_total - m_total,
            dimensions,
        }),
        Err(e) => {
            section_error("fairness", e, &mut incomplete);
            None
        }
    };

    // per-speaker bootstrap
    let mut rows = Vec::new();
    if let Ok(kept) = filter_speakers_min_samples(manifest, opts.min_speaker_samples) {
        for speaker in kept.speaker_counts().keys() {
            let section = format!("speakers/{speaker}");
            let all: Vec<usize> = (0..n)
                .filter(|&i| manifest.records[i].speaker_id == *speaker)
                .collect();
            let have: Vec<usize> = all.iter().copied().filter(|&i| clean[i].is_some()).collect();
            if have.len() < all.len() {
                incomplete.insert(section.clone());
            }
            let result = PerDimension::try_from_fn(|d| {
                speaker_bootstrap_ccc(speaker, &series(&have, &truth, &clean_or_nan, d)?, &boot_cfg)
            });
            match result {
                Ok(bootstrap) => rows.push(SpeakerRow {
                    speaker_id: speaker.to_string(),
                    sex: manifest.records[all[0]].sex,
                    samples: have.len(),
                    bootstrap,
                }),
                Err(e) => section_error(&section, e, &mut incomplete),
            }
        }
    }
    let speakers = Some(SpeakerSection {
        min_samples: opts.min_speaker_samples,
        draw_size: opts.bootstrap_draws,
        repetitions: opts.bootstrap_reps,
        rows,
    });

    Ok(AuditReport {
        report_version: REPORT_VERSION,
        predictor: handle.identity().to_string(),
        provenance: Provenance {
            tool: TOOL_NAME.into(),
            tool_version: TOOL_VERSION.into(),
            inputs: opts.inputs.clone(),
            seed: opts.seed,
            kinds: opts.kinds.iter().map(|k| k.name().to_string()).collect(),
            threshold: opts.threshold,
            min_speaker_samples: opts.min_speaker_samples,
            bootstrap_draws: opts.bootstrap_draws,
            bootstrap_reps: opts.bootstrap_reps,
        },
        samples: n,
        correctness,
        robustness,
        fairness,
        speakers,
        incomplete: incomplete.into_iter().collect(),
        errors,
        unmatched_predictions: collected
            .unmatched
            .into_iter()
            .map(|(sample_id, variant)| UnmatchedPrediction { sample_id, variant })
            .collect(),
    })
}

/// Formats a number exactly as it appears in the JSON report.
pub fn json_number(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| "null".into())
}

impl AuditReport {
    pub fn is_complete(&self) -> bool {
        self.incomplete.is_empty() && self.errors.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: AuditReport = serde_json::from_str(&text)?;
        if report.report_version != REPORT_VERSION {
            return Err(Error::Config(format!(
                "{}: report_version {} is not supported",
                path.display(),
                report.report_version
            )));
        }
        Ok(report)
    }

    /// Plain-text digest of the report; every number is copied from the JSON
    /// rendering.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let triple = |v: &PerDimension<f64>| {
            format!(
                "arousal {}  dominance {}  valence {}",
                json_number(v.arousal),
                json_number(v.dominance),
                json_number(v.valence)
            )
        };
        let _ = writeln!(out, "predictor: {}", self.predictor);
        let _ = writeln!(out, "samples: {}", self.samples);
        match &self.correctness {
            Some(c) => {
                let _ = writeln!(out, "CCC: {}", triple(c));
            }
            None => out.push_str("CCC: not computed\n"),
        }
        if let Some(r) = &self.robustness {
            let _ = writeln!(out, "robustness (threshold {}):", json_number(r.threshold));
            for (kind, v) in &r.per_augmentation {
                let _ = writeln!(out, "  {kind}: {}", triple(v));
            }
            let _ = writeln!(out, "  mean: {}", triple(&r.mean));
        }
        if let Some(f) = &self.fairness {
            let _ = writeln!(
                out,
                "fairness ({} female, {} male):",
                f.female_samples, f.male_samples
            );
            for d in Dimension::ALL {
                let x = f.dimensions.get(d);
                let _ = writeln!(
                    out,
                    "  {}: score {}  bias {}",
                    d.name(),
                    json_number(x.fairness_score),
                    json_number(x.fairness_bias)
                );
            }
        }
        if let Some(s) = &self.speakers {
            let _ = writeln!(
                out,
                "speakers with more than {} samples: {}",
                s.min_samples,
                s.rows.len()
            );
            for row in &s.rows {
                let _ = write!(out, "  {} ({}, n={}):", row.speaker_id, row.sex.code(), row.samples);
                for d in Dimension::ALL {
                    let b = row.bootstrap.get(d);
                    let _ = write!(
                        out,
                        " {} {} ± {}",
                        d.name(),
                        json_number(b.mean),
                        json_number(b.std)
                    );
                }
                out.push('\n');
            }
        }
        if !self.unmatched_predictions.is_empty() {
            let _ = writeln!(
                out,
                "unmatched prediction rows: {}",
                self.unmatched_predictions.len()
            );
        }
        if !self.incomplete.is_empty() {
            let _ = writeln!(out, "incomplete: {}", self.incomplete.join(", "));
        }
        if !self.errors.is_empty() {
            let _ = writeln!(out, "errors: {}", self.errors.len());
            for e in self.errors.iter().take(20) {
                let _ = writeln!(
                    out,
                    "  [{}] {}{}: {}",
                    e.section,
                    e.sample_id.as_deref().unwrap_or("-"),
                    e.variant.as_deref().map(|v| format!("/{v}")).unwrap_or_default(),
                    e.message
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub correctness: Option<PerDimension<f64>>,
    pub robustness_mean: Option<PerDimension<f64>>,
    pub fairness_score: Option<PerDimension<f64>>,
    pub fairness_bias: Option<PerDimension<f64>>,
}

/// Agreement between two reports. Deltas are `b - a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub report_version: u32,
    pub predictor_a: String,
    pub predictor_b: String,
    pub shared_speakers: Vec<String>,
    /// Spearman correlation of per-speaker bootstrap means.
    pub speaker_spearman: Option<PerDimension<f64>>,
    pub deltas: Deltas,
    pub notes: Vec<String>,
}

fn delta(a: Option<&PerDimension<f64>>, b: Option<&PerDimension<f64>>) -> Option<PerDimension<f64>> {
    let (a, b) = (a?, b?);
    Some(PerDimension::from_fn(|d| b.get(d) - a.get(d)))
}

pub fn compare(a: &AuditReport, b: &AuditReport) -> Comparison {
    let mut notes = Vec::new();
    let rows = |r: &AuditReport| -> BTreeMap<String, PerDimension<f64>> {
        r.speakers
            .iter()
            .flat_map(|s| &s.rows)
            .map(|row| (row.speaker_id.clone(), row.bootstrap.map(|e| e.mean)))
            .collect()
    };
    let (ra, rb) = (rows(a), rows(b));
    let shared: Vec<String> = ra.keys().filter(|k| rb.contains_key(*k)).cloned().collect();
    let speaker_spearman = if shared.len() < 2 {
        notes.push(format!(
            "{} shared speaker(s); Spearman needs at least 2",
            shared.len()
        ));
        None
    } else {
        let result = PerDimension::try_from_fn(|d| {
            let xa: Vec<f64> = shared.iter().map(|s| *ra[s].get(d)).collect();
            let xb: Vec<f64> = shared.iter().map(|s| *rb[s].get(d)).collect();
            spearman(&xa, &xb)
        });
        match result {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(format!("Spearman undefined: {e}"));
                None
            }
        }
    };
    let fair = |r: &AuditReport, f: fn(&DimensionFairness) -> f64| {
        r.fairness.as_ref().map(|s| s.dimensions.map(f))
    };
    Comparison {
        report_version: REPORT_VERSION,
        predictor_a: a.predictor.clone(),
        predictor_b: b.predictor.clone(),
        shared_speakers: shared,
        speaker_spearman,
        deltas: Deltas {
            correctness: delta(a.correctness.as_ref(), b.correctness.as_ref()),
            robustness_mean: delta(
                a.robustness.as_ref().map(|r| &r.mean),
                b.robustness.as_ref().map(|r| &r.mean),
            ),
            fairness_score: delta(
                fair(a, |x| x.fairness_score).as_ref(),
                fair(b, |x| x.fairness_score).as_ref(),
            ),
            fairness_bias: delta(
                fair(a, |x| x.fairness_bias).as_ref(),
                fair(b, |x| x.fairness_bias).as_ref(),
            ),
        },
        notes,
    }
}

impl Comparison {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "a: {}", self.predictor_a);
        let _ = writeln!(out, "b: {}", self.predictor_b);
        let _ = writeln!(out, "shared speakers: {}", self.shared_speakers.len());
        let line = |label: &str, v: &Option<PerDimension<f64>>| match v {
            Some(v) => format!(
                "{label}: arousal {}  dominance {}  valence {}\n",
                json_number(v.arousal),
                json_number(v.dominance),
                json_number(v.valence)
            ),
            None => format!("{label}: n/a\n"),
        };
        out += &line("speaker Spearman", &self.speaker_spearman);
        out += &line("delta CCC", &self.deltas.correctness);
        out += &line("delta robustness", &self.deltas.robustness_mean);
        out += &line("delta fairness score", &self.deltas.fairness_score);
        out += &line("delta fairness bias", &self.deltas.fairness_bias);
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRun {
    pub fraction: f64,
    pub model: String,
    pub log: TrainingLog,
}

/// One entry per training fraction, in the order given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub report_version: u32,
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    pub runs: Vec<TrainingRun>,
}

impl TrainingReport {
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for run in &self.runs {
            let c = &run.log.best_dev_ccc;
            let _ = writeln!(
                out,
                "fraction {}: {} training samples, best epoch {}, dev CCC arousal {}  dominance {}  valence {}",
                json_number(run.fraction),
                run.log.train_size,
                run.log.best_epoch,
                json_number(c.arousal),
                json_number(c.dominance),
                json_number(c.valence)
            );
        }
        out
    }
}
