//! Plugging an out-of-process model into the engine. Any program that
//! speaks the line-delimited JSON protocol on stdin/stdout can score
//! erasure variants; the engine treats it like the built-in model.
//!
//! With no arguments this serves the bundled stub in memory and prints the
//! exchange. Given a command line it spawns that plugin instead:
//!
//!     cargo run --example external_scorer
//!     cargo build && cargo run --example external_scorer -- "target/debug/u3e stub-scorer --fixed 1.0,-1.0"

use std::io::Cursor;

use u3e::corpus::Sample;
use u3e::erasure::changes;
use u3e::scorer::protocol::{serve, StubModel};
use u3e::scorer::{ExternalScorer, ScoreVector};

fn main() -> u3e::Result<()> {
    match std::env::args().nth(1) {
        Some(command) => spawned(&command),
        None => run(),
    }
}

pub fn run() -> u3e::Result<()> {
    let requests = [
        r#"{"type":"predict","id":"1","option":"o","sentences":["a","b"]}"#,
        r#"{"type":"list_checkpoints","id":"2"}"#,
        r#"{"type":"predict","id":"3""#,
    ]
    .join("\n");
    let mut model = StubModel::Fixed(ScoreVector::new(1.0, -1.0));
    let mut out = Vec::new();
    serve(Cursor::new(requests.clone()), &mut out, &mut model).map_err(|e| u3e::Error::io("<memory>", e))?;
    for (req, resp) in requests.lines().zip(String::from_utf8_lossy(&out).lines()) {
        println!("-> {req}\n<- {resp}");
    }
    Ok(())
}

fn spawned(command: &str) -> u3e::Result<()> {
    let scorer = ExternalScorer::spawn(command)?;
    let sample = Sample::new("x", "option", vec!["first.".into(), "second.".into(), "third.".into()], 1);
    let cv = changes(&scorer, &sample, 0)?;
    println!("changes from `{command}`: {:?}", cv.values);
    Ok(())
}
