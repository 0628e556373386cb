use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use ser_audit::predictor::{
    ExternalSession, PredictorHandle, PredictorSpec, SessionConfig, PROTOCOL_VERSION,
};
use ser_audit::Error;

const ECHO: &str = env!("CARGO_BIN_EXE_ser-audit-echo");

fn tone() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/tone.wav")
}

fn echo(args: &[&str], max_inflight: usize) -> SessionConfig {
    let mut argv = vec![ECHO.to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    SessionConfig {
        max_inflight,
        ..SessionConfig::new(&argv).unwrap()
    }
}

#[test]
fn thousand_requests_match_in_order() {
    let mut s = ExternalSession::start(&echo(&["--triple", "0.1,0.2,0.3"], 1)).unwrap();
    assert_eq!(s.name(), "echo");
    let paths = vec![tone(); 1000];
    let results = s.predict_many(&paths);
    assert_eq!(results.len(), 1000);
    for r in &results {
        let t = r.as_ref().unwrap();
        assert_eq!(t.to_array(), [0.1, 0.2, 0.3]);
    }
    let stats = s.stats();
    assert_eq!((stats.sent, stats.received, stats.reordered), (1000, 1000, 0));
    assert!(s.close().unwrap().success());
}

#[test]
fn pipelined_requests() {
    let mut s = ExternalSession::start(&echo(&["--no-read"], 8)).unwrap();
    let results = s.predict_many(&vec![PathBuf::from("x.wav"); 100]);
    assert!(results.iter().all(|r| r.is_ok()));
    assert_eq!(s.stats().reordered, 0);
    s.close().unwrap();
}

#[test]
fn version_mismatch_is_incompatible() {
    let err = ExternalSession::start(&echo(&["--protocol", "99"], 1)).unwrap_err();
    assert!(matches!(err, Error::IncompatiblePredictor(_)), "{err}");
    assert!(err.to_string().contains("99"));
    ExternalSession::start(&echo(&["--protocol", &PROTOCOL_VERSION.to_string()], 1))
        .unwrap()
        .close()
        .unwrap();
}

#[test]
fn unreadable_path_gets_error_response() {
    let mut s = ExternalSession::start(&echo(&[], 1)).unwrap();
    let results = s.predict_many(&[tone(), PathBuf::from("/nonexistent/a.wav"), tone()]);
    assert!(results[0].is_ok());
    match &results[1] {
        Err(Error::PredictorError { id, message }) => {
            assert_eq!(id, "2");
            assert!(message.contains("/nonexistent/a.wav"));
        }
        other => panic!("{other:?}"),
    }
    assert!(results[2].is_ok());
    s.close().unwrap();
}

#[test]
fn child_death_breaks_the_session() {
    let mut s = ExternalSession::start(&echo(&["--die-after", "2"], 1)).unwrap();
    let results = s.predict_many(&vec![tone(); 5]);
    assert!(results[0].is_ok() && results[1].is_ok());
    for r in &results[2..] {
        let err = r.as_ref().unwrap_err();
        assert!(matches!(err, Error::BrokenSession(_)), "{err}");
        assert!(err.to_string().contains("exit status: 3"), "{err}");
    }
}

#[test]
fn handle_clamps_and_reports_identity() {
    let spec: PredictorSpec = format!("exec:{ECHO} --triple 1.5,-0.2,0.5").parse().unwrap();
    let mut h = PredictorHandle::open(&spec).unwrap();
    assert!(h.identity().starts_with("exec:"));
    let path = tone();
    let t = h
        .predict(&ser_audit::predictor::PredictInput {
            sample_id: "a",
            variant: "clean",
            audio_path: Some(&path),
            clip: None,
        })
        .unwrap();
    assert_eq!(t.to_array(), [1.0, 0.0, 0.5]);
    assert_eq!(h.session_stats().unwrap().received, 1);
    h.close().unwrap();
}

/// Replays the recorded exchange against the echo predictor byte for byte.
#[test]
fn golden_transcript() {
    let text = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/echo_session.jsonl"),
    )
    .unwrap();
    let mut sent = String::new();
    let mut expected = String::new();
    for line in text.lines() {
        if let Some(l) = line.strip_prefix("> ") {
            sent += l;
            sent.push('\n');
        } else if let Some(l) = line.strip_prefix("< ") {
            expected += l;
            expected.push('\n');
        }
    }
    let mut child = Command::new(ECHO)
        .args(["--triple", "0.25,0.5,0.75"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(sent.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
}
