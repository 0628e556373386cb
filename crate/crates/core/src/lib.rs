//! Robustness and fairness auditing for dimensional speech emotion recognition.

pub mod audio;
pub mod data;
pub mod error;
pub mod metrics;
pub mod perturb;
pub mod predictor;
pub mod report;
pub mod rng;
pub mod synth;

pub use audio::{read_wav, write_wav, AudioClip, WavEncoding, SAMPLE_RATE};
pub use data::{
    load_manifest, DatasetManifest, Dimension, DimensionTriple, LabelScale, PerDimension,
    SampleRecord, Sex,
};
pub use error::{Error, Result};
pub use metrics::{ccc, PairedSeries};
pub use perturb::{apply, draw_params, AugmentationKind, AugmentationParams};
pub use predictor::{PredictorHandle, PredictorSpec};
pub use report::{AuditReport, EvaluateOptions};
