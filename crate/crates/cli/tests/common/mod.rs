#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use ser_audit::data::{DatasetManifest, LabelScale, SampleRecord, Sex};
use ser_audit::{write_wav, AudioClip, WavEncoding, SAMPLE_RATE};

pub const BIN: &str = env!("CARGO_BIN_EXE_ser-audit");
pub const ECHO: &str = env!("CARGO_BIN_EXE_ser-audit-echo");

pub fn schema_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas/audit_report.schema.json")
}

/// Validation messages of `report` against the shipped report schema.
pub fn schema_errors(report: &serde_json::Value) -> Vec<String> {
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path()).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    let result = compiled.validate(report);
    match result {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{}: {}", e.instance_path, e)).collect(),
    }
}

/// `n` short clips with labels spread over the seven-point scale, alternating
/// female and male speakers.
pub fn fixture(dir: &Path, n: usize) -> PathBuf {
    let mut records = Vec::new();
    for i in 0..n {
        let f = 200.0 + 150.0 * i as f64;
        let samples: Vec<f64> = (0..8000)
            .map(|t| (0.1 + 0.05 * i as f64) * (2.0 * std::f64::consts::PI * f * t as f64 / 16000.0).sin())
            .collect();
        let name = format!("c{i}.wav");
        write_wav(
            &AudioClip::new(samples, SAMPLE_RATE).unwrap(),
            &dir.join(&name),
            WavEncoding::Int16,
        )
        .unwrap();
        records.push(SampleRecord {
            sample_id: format!("c{i}"),
            audio_path: name,
            speaker_id: format!("s{}", i % 2),
            sex: if i % 2 == 0 { Sex::Female } else { Sex::Male },
            raw_labels: [
                1.0 + (i % 7) as f64,
                1.0 + ((i * 3) % 7) as f64,
                1.0 + ((i * 5) % 7) as f64,
            ],
            duration_s: None,
        });
    }
    let m = DatasetManifest::new(LabelScale::SevenPoint, None, records).unwrap();
    let path = dir.join("manifest.csv");
    m.save(&path).unwrap();
    path
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(args: &[&str]) -> Run {
    run_env(args, &[])
}

pub fn run_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("SER_AUDIT_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
