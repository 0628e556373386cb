use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{apply, draw_params, AugmentationKind, DrawnParams};
use crate::audio::{read_wav, write_wav, WavEncoding};
use crate::data::{DatasetManifest, SampleRecord};
use crate::error::{Error, Result};

/// Header of the draw log written next to the augmented audio.
pub const DRAW_LOG_HEADER: &str = "sample_id,kind,param_json,global_seed";

/// File name of the draw log inside the output directory.
pub const DRAW_LOG_NAME: &str = "draws.csv";

#[derive(Debug, Clone)]
pub struct AugmentedFile {
    pub sample_id: String,
    pub path: PathBuf,
    pub drawn: DrawnParams,
}

#[derive(Debug)]
pub struct AugmentOutcome {
    /// Written files in manifest order, kinds in the requested order.
    pub files: Vec<AugmentedFile>,
    /// Manifest of the augmented files. Audio paths are relative to the
    /// parent of the output directory; ids are `<sample_id>.<kind>`.
    pub manifest: Option<DatasetManifest>,
    /// `(sample_id, kind, message)` for every failed item.
    pub errors: Vec<(String, Option<AugmentationKind>, String)>,
    pub draw_log: PathBuf,
}

impl AugmentOutcome {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

type SampleResult = (
    Vec<(AugmentedFile, SampleRecord)>,
    Vec<(String, Option<AugmentationKind>, String)>,
);

/// Writes `<sample_id>.<kind>.wav` (32-bit float) for every record and kind,
/// plus the draw log. Failures are collected; the run continues.
pub fn augment_dataset(
    manifest: &DatasetManifest,
    kinds: &[AugmentationKind],
    global_seed: u64,
    out_dir: &Path,
) -> Result<AugmentOutcome> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let dir_name = out_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| ".".into());

    let per_sample: Vec<SampleResult> = manifest
        .records
        .par_iter()
        .map(|record| {
            let mut done = Vec::new();
            let mut errors = Vec::new();
            let clip = match read_wav(&manifest.audio_path(record)) {
                Ok(clip) => clip,
                Err(e) => {
                    errors.push((record.sample_id.clone(), None, e.to_string()));
                    return (done, errors);
                }
            };
            for &kind in kinds {
                let drawn = draw_params(kind, global_seed, &record.sample_id);
                let file_name = format!("{}.{}.wav", record.sample_id, kind.name());
                let path = out_dir.join(&file_name);
                let result = apply(&clip, &drawn.params)
                    .and_then(|aug| write_wav(&aug, &path, WavEncoding::Float32));
                match result {
                    Ok(()) => {
                        let aug_record = SampleRecord {
                            sample_id: format!("{}.{}", record.sample_id, kind.name()),
                            audio_path: format!("{dir_name}/{file_name}"),
                            ..record.clone()
                        };
                        done.push((
                            AugmentedFile {
                                sample_id: record.sample_id.clone(),
                                path,
                                drawn,
                            },
                            aug_record,
                        ));
                    }
                    Err(e) => errors.push((record.sample_id.clone(), Some(kind), e.to_string())),
                }
            }
            (done, errors)
        })
        .collect();

    let mut files = Vec::new();
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (done, errs) in per_sample {
        for (file, record) in done {
            files.push(file);
            records.push(record);
        }
        errors.extend(errs);
    }

    let draw_log = out_dir.join(DRAW_LOG_NAME);
    write_draw_log(&draw_log, &files)?;

    let manifest = if records.is_empty() {
        None
    } else {
        let mut m = DatasetManifest::new(manifest.scale, manifest.split, records)?;
        m.base_dir = out_dir.parent().map(Path::to_path_buf).unwrap_or_default();
        Some(m)
    };
    Ok(AugmentOutcome {
        files,
        manifest,
        errors,
        draw_log,
    })
}

fn write_draw_log(path: &Path, files: &[AugmentedFile]) -> Result<()> {
    let io_err = |e| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{DRAW_LOG_HEADER}").map_err(io_err)?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for f in files {
        let json = serde_json::to_string(&f.drawn.params)?;
        writer
            .write_record([
                f.sample_id.as_str(),
                f.drawn.kind().name(),
                &json,
                &f.drawn.seed_trace.global_seed.to_string(),
            ])
            .map_err(|e| Error::io(path, e.into()))?;
    }
    writer.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{AudioClip, SAMPLE_RATE};
    use crate::data::{LabelScale, Sex};

    fn fixture(dir: &Path, n: usize) -> DatasetManifest {
        let mut records = Vec::new();
        for i in 0..n {
            let samples: Vec<f64> = (0..4000)
                .map(|t| 0.2 * ((t as f64) * 0.05 * (i + 1) as f64).sin())
                .collect();
            let name = format!("s{i}.wav");
            write_wav(
                &AudioClip::new(samples, SAMPLE_RATE).unwrap(),
                &dir.join(&name),
                WavEncoding::Int16,
            )
            .unwrap();
            records.push(SampleRecord {
                sample_id: format!("s{i}"),
                audio_path: name,
                speaker_id: "spk".into(),
                sex: Sex::Female,
                raw_labels: [4.0; 3],
                duration_s: None,
            });
        }
        let mut m = DatasetManifest::new(LabelScale::SevenPoint, None, records).unwrap();
        m.base_dir = dir.to_path_buf();
        m
    }

    #[test]
    fn writes_one_file_per_sample_and_kind() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path(), 2);
        let out = dir.path().join("aug");
        let outcome = augment_dataset(&m, &AugmentationKind::ALL, 5, &out).unwrap();
        assert!(outcome.is_clean());
        assert_eq!(outcome.files.len(), 16);
        let log = std::fs::read_to_string(&outcome.draw_log).unwrap();
        assert_eq!(log.lines().count(), 17);
        assert_eq!(log.lines().next().unwrap(), DRAW_LOG_HEADER);
        assert!(out.join("s1.white_noise.wav").exists());
        let aug = outcome.manifest.unwrap();
        assert_eq!(aug.len(), 16);
        assert_eq!(aug.records[0].sample_id, "s0.additive_tone");
        assert!(aug.audio_path(&aug.records[0]).exists());
    }

    #[test]
    fn missing_audio_is_collected() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fixture(dir.path(), 3);
        m.records[1].audio_path = "nope.wav".into();
        let outcome =
            augment_dataset(&m, &[AugmentationKind::Gain], 1, &dir.path().join("aug")).unwrap();
        assert_eq!(outcome.files.len(), 2);
        assert_eq!(outcome.errors.len(), 1);
        assert_eq!(outcome.errors[0].0, "s1");
    }
}
