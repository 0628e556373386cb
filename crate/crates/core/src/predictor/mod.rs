//! Models under audit: prediction files, external processes and the
//! built-in baseline, behind one handle.

mod baseline;
mod collect;
mod external;
mod features;
mod file;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use baseline::{
    extract_dataset, subsample_indices, subsample_size, train_baseline, train_on_features,
    BaselineModel, EpochLog, FeatureSpec, TrainConfig, TrainOutcome, TrainingLog,
};
pub use collect::{collect_predictions, CollectOptions, Collected, PredictionFailure};
pub use external::{
    ChildMessage, ExternalSession, ParentMessage, SessionConfig, SessionStats, PROTOCOL_VERSION,
};
pub use features::{
    extract_features, FeatureVector, FEATURE_COUNT, FEATURE_NAMES, FFT_LEN, FRAME_LEN, HOP_LEN,
};
pub use file::{load_predictions, parse_predictions, PredictionSet, CLEAN, PREDICTION_HEADER};

use crate::audio::{read_wav, AudioClip};
use crate::data::DimensionTriple;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    FileBacked,
    ExternalProcess,
    BuiltinBaseline,
}

/// `file:<path>`, `exec:<command line>` or `baseline:<model path>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictorSpec {
    File(PathBuf),
    Exec(Vec<String>),
    Baseline(PathBuf),
}

impl FromStr for PredictorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "predictor must be file:<path>, exec:<cmdline> or baseline:<model>, got `{s}`"
            ))
        };
        let (scheme, rest) = s.split_once(':').ok_or_else(bad)?;
        if rest.trim().is_empty() {
            return Err(bad());
        }
        match scheme {
            "file" => Ok(PredictorSpec::File(PathBuf::from(rest))),
            "baseline" => Ok(PredictorSpec::Baseline(PathBuf::from(rest))),
            "exec" => {
                let argv = shlex::split(rest)
                    .filter(|a| !a.is_empty())
                    .ok_or_else(|| Error::Config(format!("cannot split command line `{rest}`")))?;
                Ok(PredictorSpec::Exec(argv))
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorSpec::File(p) => write!(f, "file:{}", p.display()),
            PredictorSpec::Baseline(p) => write!(f, "baseline:{}", p.display()),
            PredictorSpec::Exec(argv) => {
                let joined = shlex::try_join(argv.iter().map(String::as_str))
                    .unwrap_or_else(|_| argv.join(" "));
                write!(f, "exec:{joined}")
            }
        }
    }
}

/// What a predictor is asked about.
#[derive(Debug, Clone, Copy)]
pub struct PredictInput<'a> {
    pub sample_id: &'a str,
    pub variant: &'a str,
    pub audio_path: Option<&'a Path>,
    pub clip: Option<&'a AudioClip>,
}

enum Backing {
    File(PredictionSet),
    External(ExternalSession),
    Baseline(BaselineModel),
}

pub struct PredictorHandle {
    identity: String,
    backing: Backing,
}

impl fmt::Debug for PredictorHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PredictorHandle")
            .field("identity", &self.identity)
            .field("kind", &self.kind())
            .finish()
    }
}

impl PredictorHandle {
    pub fn open(spec: &PredictorSpec) -> Result<Self> {
        Self::open_with(spec, 1)
    }

    /// Like [`open`](Self::open); `max_inflight` bounds pipelining for
    /// external predictors and is ignored otherwise.
    pub fn open_with(spec: &PredictorSpec, max_inflight: usize) -> Result<Self> {
        let identity = spec.to_string();
        let backing = match spec {
            PredictorSpec::File(path) => Backing::File(load_predictions(path)?),
            PredictorSpec::Baseline(path) => Backing::Baseline(BaselineModel::load(path)?),
            PredictorSpec::Exec(argv) => {
                let cfg = SessionConfig {
                    max_inflight,
                    ..SessionConfig::new(argv)?
                };
                Backing::External(ExternalSession::start(&cfg)?)
            }
        };
        Ok(Self { identity, backing })
    }

    pub fn from_predictions(set: PredictionSet, identity: impl Into<String>) -> Self {
        Self {
            identity: identity.into(),
            backing: Backing::File(set),
        }
    }

    pub fn from_model(model: BaselineModel, identity: impl Into<String>) -> Self {
        Self {
            identity: identity.into(),
            backing: Backing::Baseline(model),
        }
    }

    pub fn from_session(session: ExternalSession) -> Self {
        Self {
            identity: format!("exec:{}", session.name()),
            backing: Backing::External(session),
        }
    }

    pub fn identity(&self) -> &str {
        &self.identity
    }

    pub fn kind(&self) -> PredictorKind {
        match self.backing {
            Backing::File(_) => PredictorKind::FileBacked,
            Backing::External(_) => PredictorKind::ExternalProcess,
            Backing::Baseline(_) => PredictorKind::BuiltinBaseline,
        }
    }

    pub(crate) fn predictions(&self) -> Option<&PredictionSet> {
        match &self.backing {
            Backing::File(set) => Some(set),
            _ => None,
        }
    }

    pub(crate) fn model(&self) -> Option<&BaselineModel> {
        match &self.backing {
            Backing::Baseline(m) => Some(m),
            _ => None,
        }
    }

    /// Exchange counters of an external session.
    pub fn session_stats(&self) -> Option<SessionStats> {
        match &self.backing {
            Backing::External(s) => Some(s.stats()),
            _ => None,
        }
    }

    pub(crate) fn session(&mut self) -> Option<&mut ExternalSession> {
        match &mut self.backing {
            Backing::External(s) => Some(s),
            _ => None,
        }
    }

    /// One prediction, clamped to `[0, 1]`.
    pub fn predict(&mut self, input: &PredictInput<'_>) -> Result<DimensionTriple> {
        let triple = match &mut self.backing {
            Backing::File(set) => set.lookup(input.sample_id, input.variant)?,
            Backing::Baseline(model) => match input.clip {
                Some(clip) => model.predict_clip(clip)?,
                None => {
                    let path = input.audio_path.ok_or_else(|| {
                        Error::Config(format!("{}: no audio for the baseline", input.sample_id))
                    })?;
                    model.predict_clip(&read_wav(path)?)?
                }
            },
            Backing::External(session) => {
                let path = input.audio_path.ok_or_else(|| {
                    Error::Config(format!(
                        "{}: external predictors need an audio path",
                        input.sample_id
                    ))
                })?;
                session.predict(path)?
            }
        };
        Ok(DimensionTriple::clamped(
            triple.arousal,
            triple.dominance,
            triple.valence,
        ))
    }

    /// Ends an external session cleanly; a no-op for other backings.
    pub fn close(self) -> Result<()> {
        if let Backing::External(session) = self.backing {
            session.close()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_specs() {
        assert_eq!(
            "file:p.csv".parse::<PredictorSpec>().unwrap(),
            PredictorSpec::File("p.csv".into())
        );
        assert_eq!(
            "exec:python3 bridge.py --keep-layers '12'".parse::<PredictorSpec>().unwrap(),
            PredictorSpec::Exec(vec![
                "python3".into(),
                "bridge.py".into(),
                "--keep-layers".into(),
                "12".into()
            ])
        );
        assert!("baseline:".parse::<PredictorSpec>().is_err());
        assert!("http://x".parse::<PredictorSpec>().is_err());
        let spec: PredictorSpec = "exec:a 'b c'".parse().unwrap();
        assert_eq!(spec.to_string(), "exec:a 'b c'");
    }

    #[test]
    fn file_backed_lookup() {
        let mut set = PredictionSet::new();
        set.insert("a", CLEAN, DimensionTriple::from_array([0.1, 0.2, 0.3]))
            .unwrap();
        let mut h = PredictorHandle::from_predictions(set, "file:x");
        let input = PredictInput {
            sample_id: "a",
            variant: CLEAN,
            audio_path: None,
            clip: None,
        };
        assert_eq!(h.predict(&input).unwrap().valence, 0.3);
        let missing = PredictInput {
            variant: "gain",
            ..input
        };
        assert!(matches!(h.predict(&missing), Err(Error::MissingPrediction { .. })));
        assert_eq!(h.kind(), PredictorKind::FileBacked);
    }
}
