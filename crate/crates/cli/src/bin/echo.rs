//! Reference predictor speaking the line-delimited JSON protocol.
//!
//! Answers every readable 16 kHz mono WAV with a fixed triple and every other
//! path with an error response. Used to exercise the client side.

use std::io::{BufRead, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use ser_audit::predictor::{ChildMessage, ParentMessage, PROTOCOL_VERSION};
use ser_audit::read_wav;

#[derive(Debug, Parser)]
#[command(name = "ser-audit-echo")]
struct Args {
    /// Protocol version announced in the hello reply.
    #[arg(long, default_value_t = PROTOCOL_VERSION)]
    protocol: u32,
    #[arg(long, default_value = "echo")]
    name: String,
    /// Triple returned for every readable clip.
    #[arg(long, value_parser = parse_triple, default_value = "0.5,0.5,0.5")]
    triple: [f64; 3],
    /// Exit with status 3 after answering this many requests.
    #[arg(long)]
    die_after: Option<usize>,
    /// Answer without opening the audio file.
    #[arg(long)]
    no_read: bool,
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected 3 values, got {}", v.len()))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    let mut answered = 0usize;
    let send = |msg: &ChildMessage, out: &mut std::io::StdoutLock| {
        let line = serde_json::to_string(msg).expect("serializable");
        writeln!(out, "{line}").and_then(|_| out.flush()).is_ok()
    };
    for line in stdin.lock().lines() {
        let Ok(line) = line else { return ExitCode::from(2) };
        if line.trim().is_empty() {
            continue;
        }
        let msg: ParentMessage = match serde_json::from_str(&line) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("ser-audit-echo: bad message: {e}");
                return ExitCode::from(2);
            }
        };
        let reply = match msg {
            ParentMessage::Hello { .. } => ChildMessage::Hello {
                protocol: args.protocol,
                name: args.name.clone(),
            },
            ParentMessage::Bye => {
                send(&ChildMessage::Bye, &mut out);
                return ExitCode::SUCCESS;
            }
            ParentMessage::Predict { id, audio_path } => {
                if args.die_after.is_some_and(|n| answered >= n) {
                    return ExitCode::from(3);
                }
                answered += 1;
                let readable = args.no_read || read_wav(Path::new(&audio_path)).is_ok();
                if readable {
                    ChildMessage::Prediction {
                        id,
                        arousal: args.triple[0],
                        dominance: args.triple[1],
                        valence: args.triple[2],
                    }
                } else {
                    ChildMessage::Error {
                        id,
                        message: format!("cannot read {audio_path}"),
                    }
                }
            }
        };
        if !send(&reply, &mut out) {
            return ExitCode::from(2);
        }
    }
    ExitCode::SUCCESS
}
