use std::collections::HashSet;
use std::path::PathBuf;

use rayon::prelude::*;

use super::file::{PredictionSet, CLEAN};
use super::PredictorHandle;
use crate::audio::{read_wav, write_wav, WavEncoding};
use crate::data::{DatasetManifest, DimensionTriple};
use crate::error::{Error, Result};
use crate::perturb::{apply, draw_params, AugmentationKind};

#[derive(Debug, Clone, Default)]
pub struct CollectOptions {
    pub kinds: Vec<AugmentationKind>,
    pub seed: u64,
    /// Where augmented audio for external predictors is written; a temporary
    /// directory is used when unset.
    pub workdir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionFailure {
    pub sample_id: String,
    pub variant: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Collected {
    /// Manifest order; per record the clean row first, then kinds in order.
    pub predictions: PredictionSet,
    pub failures: Vec<PredictionFailure>,
    /// Prediction-file rows whose sample is not in the manifest or whose
    /// variant is neither clean nor a known augmentation.
    pub unmatched: Vec<(String, String)>,
}

type Row = (String, String, Result<DimensionTriple>);

/// Obtains clean and augmented predictions for every manifest record.
///
/// Augmented inputs are produced with [`draw_params`] under `opts.seed`, the
/// same draws `augment_dataset` would write to disk.
pub fn collect_predictions(
    manifest: &DatasetManifest,
    handle: &mut PredictorHandle,
    opts: &CollectOptions,
) -> Result<Collected> {
    let variants: Vec<String> = std::iter::once(CLEAN.to_string())
        .chain(opts.kinds.iter().map(|k| k.name().to_string()))
        .collect();

    let rows: Vec<Row> = if let Some(set) = handle.predictions() {
        manifest
            .records
            .iter()
            .flat_map(|r| {
                variants
                    .iter()
                    .map(move |v| (r.sample_id.clone(), v.clone(), set.lookup(&r.sample_id, v)))
            })
            .collect()
    } else if let Some(model) = handle.model() {
        manifest
            .records
            .par_iter()
            .map(|r| {
                let clip = read_wav(&manifest.audio_path(r));
                let mut out = Vec::with_capacity(variants.len());
                let clip = match clip {
                    Ok(c) => c,
                    Err(e) => {
                        let msg = e.to_string();
                        for v in &variants {
                            out.push((r.sample_id.clone(), v.clone(), Err(Error::Degenerate(msg.clone()))));
                        }
                        return out;
                    }
                };
                out.push((r.sample_id.clone(), CLEAN.to_string(), model.predict_clip(&clip)));
                for &kind in &opts.kinds {
                    let drawn = draw_params(kind, opts.seed, &r.sample_id);
                    let result = apply(&clip, &drawn.params).and_then(|aug| model.predict_clip(&aug));
                    out.push((r.sample_id.clone(), kind.name().to_string(), result));
                }
                out
            })
            .flatten()
            .collect()
    } else {
        collect_external(manifest, handle, opts, &variants)?
    };

    let mut collected = Collected::default();
    for (sample_id, variant, result) in rows {
        match result {
            Ok(t) => collected.predictions.insert(&sample_id, &variant, t)?,
            Err(e) => collected.failures.push(PredictionFailure {
                sample_id,
                variant,
                message: e.to_string(),
            }),
        }
    }
    if let Some(set) = handle.predictions() {
        let ids: HashSet<&str> = manifest.records.iter().map(|r| r.sample_id.as_str()).collect();
        let known = |v: &str| v == CLEAN || AugmentationKind::ALL.iter().any(|k| k.name() == v);
        collected.unmatched = set
            .iter()
            .filter(|(s, v, _)| !ids.contains(s) || !known(v))
            .map(|(s, v, _)| (s.to_string(), v.to_string()))
            .collect();
    }
    Ok(collected)
}

fn collect_external(
    manifest: &DatasetManifest,
    handle: &mut PredictorHandle,
    opts: &CollectOptions,
    variants: &[String],
) -> Result<Vec<Row>> {
    let tmp;
    let workdir = match &opts.workdir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            dir.clone()
        }
        None => {
            tmp = tempfile::tempdir().map_err(|e| Error::io("temporary directory", e))?;
            tmp.path().to_path_buf()
        }
    };

    // (sample, variant, path to send or the preparation error)
    let prepared: Vec<(String, String, Result<PathBuf>)> = manifest
        .records
        .par_iter()
        .map(|r| {
            let clean_path = manifest.audio_path(r);
            let mut out = vec![(r.sample_id.clone(), CLEAN.to_string(), Ok(clean_path.clone()))];
            if opts.kinds.is_empty() {
                return out;
            }
            let clip = read_wav(&clean_path);
            for &kind in &opts.kinds {
                let result = clip.as_ref().map_err(|e| Error::Degenerate(e.to_string())).and_then(|clip| {
                    let drawn = draw_params(kind, opts.seed, &r.sample_id);
                    let aug = apply(clip, &drawn.params)?;
                    let path = workdir.join(format!("{}.{}.wav", r.sample_id, kind.name()));
                    write_wav(&aug, &path, WavEncoding::Float32)?;
                    Ok(path)
                });
                out.push((r.sample_id.clone(), kind.name().to_string(), result));
            }
            out
        })
        .flatten()
        .collect();
    debug_assert_eq!(prepared.len(), manifest.len() * variants.len());

    let session = handle.session().expect("external backing");
    let paths: Vec<PathBuf> = prepared
        .iter()
        .filter_map(|(_, _, p)| p.as_ref().ok().cloned())
        .collect();
    let mut answers = session.predict_many(&paths).into_iter();
    Ok(prepared
        .into_iter()
        .map(|(s, v, p)| {
            let result = match p {
                Ok(_) => answers.next().expect("one answer per path"),
                Err(e) => Err(e),
            };
            (s, v, result)
        })
        .collect())
}
