//! Client side of the line-delimited JSON predictor protocol.
//!
//! ```text
//! parent: {"type":"hello","protocol":1}
//! child:  {"type":"hello","protocol":1,"name":"..."}
//! parent: {"type":"predict","id":"1","audio_path":"/data/a.wav"}
//! child:  {"type":"prediction","id":"1","arousal":0.5,"dominance":0.4,"valence":0.6}
//!     or  {"type":"error","id":"1","message":"..."}
//! parent: {"type":"bye"}
//! child:  {"type":"bye"}
//! ```

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, ExitStatus, Stdio};

use serde::{Deserialize, Serialize};

use crate::data::DimensionTriple;
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ParentMessage {
    Hello { protocol: u32 },
    Predict { id: String, audio_path: String },
    Bye,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ChildMessage {
    Hello { protocol: u32, name: String },
    Prediction {
        id: String,
        arousal: f64,
        dominance: f64,
        valence: f64,
    },
    Error { id: String, message: String },
    Bye,
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub program: String,
    pub args: Vec<String>,
    pub env: Vec<(String, String)>,
    pub max_inflight: usize,
}

impl SessionConfig {
    pub fn new(argv: &[String]) -> Result<Self> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| Error::Config("empty predictor command line".into()))?;
        Ok(Self {
            program: program.clone(),
            args: args.to_vec(),
            env: Vec::new(),
            max_inflight: 1,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub sent: usize,
    pub received: usize,
    /// Responses that arrived before an earlier outstanding request's.
    pub reordered: usize,
}

/// A running external predictor. Dropping an open session kills the child.
pub struct ExternalSession {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    name: String,
    max_inflight: usize,
    next_id: u64,
    stats: SessionStats,
    closed: bool,
}

impl std::fmt::Debug for ExternalSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalSession")
            .field("name", &self.name)
            .field("pid", &self.child.id())
            .field("stats", &self.stats)
            .finish()
    }
}

impl ExternalSession {
    /// Spawns the child and completes the handshake.
    pub fn start(cfg: &SessionConfig) -> Result<Self> {
        if cfg.max_inflight == 0 {
            return Err(Error::Config("max_inflight must be at least 1".into()));
        }
        let mut child = Command::new(&cfg.program)
            .args(&cfg.args)
            .envs(cfg.env.iter().map(|(k, v)| (k, v)))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::io(&cfg.program, e))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut session = Self {
            child,
            stdin: Some(stdin),
            stdout,
            name: String::new(),
            max_inflight: cfg.max_inflight,
            next_id: 1,
            stats: SessionStats::default(),
            closed: false,
        };
        session.send(&ParentMessage::Hello {
            protocol: PROTOCOL_VERSION,
        })?;
        match session.receive()? {
            ChildMessage::Hello { protocol, name } if protocol == PROTOCOL_VERSION => {
                session.name = name;
                Ok(session)
            }
            ChildMessage::Hello { protocol, name } => {
                let _ = session.child.kill();
                let _ = session.child.wait();
                session.closed = true;
                Err(Error::IncompatiblePredictor(format!(
                    "{name} speaks protocol {protocol}, expected {PROTOCOL_VERSION}"
                )))
            }
            other => Err(Error::Protocol {
                message: "expected hello".into(),
                offending: serde_json::to_string(&other)?,
            }),
        }
    }

    /// Name the child announced in its hello.
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stats(&self) -> SessionStats {
        self.stats
    }

    fn broken(&mut self, context: &str) -> Error {
        let _ = self.stdin.take();
        let status = match self.child.try_wait() {
            Ok(Some(status)) => status.to_string(),
            _ => match self.child.wait() {
                Ok(status) => status.to_string(),
                Err(e) => format!("unknown status ({e})"),
            },
        };
        self.closed = true;
        Error::BrokenSession(format!("{context}; child {status}"))
    }

    fn send(&mut self, msg: &ParentMessage) -> Result<()> {
        let mut line = serde_json::to_string(msg)?;
        line.push('\n');
        let Some(stdin) = self.stdin.as_mut() else {
            return Err(Error::BrokenSession("session already closed".into()));
        };
        if stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()).is_err() {
            return Err(self.broken("write to predictor failed"));
        }
        Ok(())
    }

    fn receive(&mut self) -> Result<ChildMessage> {
        let mut line = String::new();
        loop {
            line.clear();
            match self.stdout.read_line(&mut line) {
                Ok(0) | Err(_) => return Err(self.broken("predictor closed its output")),
                Ok(_) if line.trim().is_empty() => continue,
                Ok(_) => break,
            }
        }
        serde_json::from_str(line.trim()).map_err(|e| Error::Protocol {
            message: format!("unparseable message: {e}"),
            offending: line.trim().to_string(),
        })
    }

    pub fn predict(&mut self, audio_path: &Path) -> Result<DimensionTriple> {
        self.predict_many(&[audio_path.to_path_buf()])
            .pop()
            .expect("one result per request")
    }

    /// Sends every path, keeping at most `max_inflight` requests outstanding.
    /// Results come back in request order.
    pub fn predict_many(&mut self, paths: &[PathBuf]) -> Vec<Result<DimensionTriple>> {
        let mut results: Vec<Option<Result<DimensionTriple>>> = (0..paths.len()).map(|_| None).collect();
        let mut pending: HashMap<String, usize> = HashMap::new();
        let mut order: Vec<String> = Vec::new();
        let mut next = 0;
        let mut fatal: Option<Error> = None;

        while next < paths.len() || !pending.is_empty() {
            while fatal.is_none() && next < paths.len() && pending.len() < self.max_inflight {
                let id = self.next_id.to_string();
                self.next_id += 1;
                let msg = ParentMessage::Predict {
                    id: id.clone(),
                    audio_path: paths[next].to_string_lossy().into_owned(),
                };
                if let Err(e) = self.send(&msg) {
                    fatal = Some(e);
                    break;
                }
                self.stats.sent += 1;
                pending.insert(id.clone(), next);
                order.push(id);
                next += 1;
            }
            if fatal.is_some() {
                break;
            }
            let msg = match self.receive() {
                Ok(m) => m,
                Err(e) => {
                    fatal = Some(e);
                    break;
                }
            };
            let (id, outcome) = match msg {
                ChildMessage::Prediction {
                    id,
                    arousal,
                    dominance,
                    valence,
                } => {
                    let triple = if [arousal, dominance, valence].iter().all(|v| v.is_finite()) {
                        Ok(DimensionTriple::clamped(arousal, dominance, valence))
                    } else {
                        Err(Error::Protocol {
                            message: "non-finite prediction".into(),
                            offending: format!("{arousal},{dominance},{valence}"),
                        })
                    };
                    (id, triple)
                }
                ChildMessage::Error { id, message } => {
                    let e = Error::PredictorError {
                        id: id.clone(),
                        message,
                    };
                    (id, Err(e))
                }
                other => {
                    let offending = serde_json::to_string(&other).unwrap_or_default();
                    fatal = Some(Error::Protocol {
                        message: "expected prediction or error".into(),
                        offending,
                    });
                    break;
                }
            };
            let Some(slot) = pending.remove(&id) else {
                fatal = Some(Error::Protocol {
                    message: "response for unknown id".into(),
                    offending: id,
                });
                break;
            };
            if order.iter().position(|o| *o == id).is_some_and(|p| p > 0) {
                self.stats.reordered += 1;
            }
            order.retain(|o| *o != id);
            self.stats.received += 1;
            results[slot] = Some(outcome);
        }

        // the first unanswered request carries the failure itself
        let summary = fatal
            .as_ref()
            .map_or_else(|| "no response".to_string(), |e| e.to_string());
        let mut fatal = fatal;
        results
            .into_iter()
            .map(|r| match r {
                Some(r) => r,
                None => Err(fatal
                    .take()
                    .unwrap_or_else(|| Error::BrokenSession(summary.clone()))),
            })
            .collect()
    }

    /// Sends bye, waits for the child's bye and its exit.
    pub fn close(mut self) -> Result<ExitStatus> {
        self.send(&ParentMessage::Bye)?;
        let reply = self.receive();
        let _ = self.stdin.take();
        let status = self.child.wait().map_err(|e| Error::io("predictor", e))?;
        self.closed = true;
        match reply {
            Ok(ChildMessage::Bye) => Ok(status),
            Ok(other) => Err(Error::Protocol {
                message: "expected bye".into(),
                offending: serde_json::to_string(&other)?,
            }),
            Err(e) => Err(e),
        }
    }
}

impl Drop for ExternalSession {
    fn drop(&mut self) {
        if !self.closed {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        assert_eq!(
            serde_json::to_string(&ParentMessage::Hello { protocol: 1 }).unwrap(),
            r#"{"type":"hello","protocol":1}"#
        );
        assert_eq!(
            serde_json::to_string(&ParentMessage::Predict {
                id: "7".into(),
                audio_path: "a.wav".into()
            })
            .unwrap(),
            r#"{"type":"predict","id":"7","audio_path":"a.wav"}"#
        );
        assert_eq!(serde_json::to_string(&ParentMessage::Bye).unwrap(), r#"{"type":"bye"}"#);
        let msg: ChildMessage = serde_json::from_str(
            r#"{"type":"prediction","id":"1","arousal":0.5,"dominance":0.25,"valence":1,"extra":[1]}"#,
        )
        .unwrap();
        assert_eq!(
            msg,
            ChildMessage::Prediction {
                id: "1".into(),
                arousal: 0.5,
                dominance: 0.25,
                valence: 1.0
            }
        );
    }

    fn script(body: &str) -> SessionConfig {
        SessionConfig::new(&["sh".into(), "-c".into(), body.into()]).unwrap()
    }

    #[test]
    fn rejects_wrong_version() {
        let cfg = script(r#"read l; echo '{"type":"hello","protocol":99,"name":"x"}'; cat >/dev/null"#);
        assert!(matches!(
            ExternalSession::start(&cfg),
            Err(Error::IncompatiblePredictor(_))
        ));
    }

    #[test]
    fn child_exit_breaks_session() {
        let cfg = script(r#"read l; echo '{"type":"hello","protocol":1,"name":"x"}'; read l; exit 3"#);
        let mut s = ExternalSession::start(&cfg).unwrap();
        match s.predict(Path::new("a.wav")) {
            Err(Error::BrokenSession(msg)) => assert!(msg.contains('3'), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn garbage_is_a_protocol_error() {
        let cfg = script(r#"read l; echo 'not json'"#);
        assert!(matches!(ExternalSession::start(&cfg), Err(Error::Protocol { .. })));
    }
}
