//! Line-delimited JSON protocol spoken between the engine and an external
//! scorer process over its stdin/stdout. One response line per request
//! line, answered in order.
//!
//! ```text
//! -> {"type":"predict","id":"1","option":"...","sentences":["..."]}
//! <- {"type":"scores","id":"1","scores":[r0,r1]}
//! -> {"type":"list_checkpoints","id":"2"}
//! <- {"type":"checkpoints","id":"2","epochs":[1,2,3]}
//! -> {"type":"select_checkpoint","id":"3","epoch":2}
//! <- {"type":"ok","id":"3"}
//! <- {"type":"error","id":"..","message":".."}
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Checkpoint, ScoreVector, Scorer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Request {
    Predict {
        id: String,
        option: String,
        sentences: Vec<String>,
    },
    ListCheckpoints {
        id: String,
    },
    SelectCheckpoint {
        id: String,
        epoch: u32,
    },
}

impl Request {
    pub fn id(&self) -> &str {
        match self {
            Request::Predict { id, .. } | Request::ListCheckpoints { id } | Request::SelectCheckpoint { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Response {
    Scores { id: String, scores: Vec<f64> },
    Checkpoints { id: String, epochs: Vec<u32> },
    Ok { id: String },
    Error { id: String, message: String },
}

impl Response {
    pub fn id(&self) -> &str {
        match self {
            Response::Scores { id, .. }
            | Response::Checkpoints { id, .. }
            | Response::Ok { id }
            | Response::Error { id, .. } => id,
        }
    }
}

/// Server side of the protocol.
pub trait Handler {
    fn handle(&mut self, request: Request) -> Response;
}

/// Answers requests from `input` until end of input. Malformed lines get an
/// error response (echoing the id when one can be recovered) and the loop
/// continues.
pub fn serve<R: BufRead, W: Write, H: Handler>(input: R, mut output: W, handler: &mut H) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(request) => handler.handle(request),
            Err(e) => Response::Error {
                id: recover_id(&line),
                message: format!("malformed request: {e}"),
            },
        };
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

fn recover_id(line: &str) -> String {
    serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(str::to_string))
        .unwrap_or_default()
}

/// Reference model for protocol conformance: either constant scores, or a
/// mirror of the built-in linear model over a set of checkpoints.
#[derive(Debug, Clone)]
pub enum StubModel {
    Fixed(ScoreVector),
    Mirror { checkpoints: Vec<Checkpoint>, selected: usize },
}

impl StubModel {
    /// Mirror mode starts on the last checkpoint.
    pub fn mirror(checkpoints: Vec<Checkpoint>) -> Self {
        let selected = checkpoints.len().saturating_sub(1);
        StubModel::Mirror { checkpoints, selected }
    }
}

impl Handler for StubModel {
    fn handle(&mut self, request: Request) -> Response {
        let id = request.id().to_string();
        let error = |message: String| Response::Error { id: id.clone(), message };
        match (self, request) {
            (StubModel::Fixed(r), Request::Predict { .. }) => Response::Scores {
                id,
                scores: r.0.to_vec(),
            },
            (StubModel::Fixed(_), Request::ListCheckpoints { .. }) => Response::Checkpoints { id, epochs: vec![] },
            (StubModel::Fixed(_), Request::SelectCheckpoint { epoch, .. }) => {
                error(format!("fixed model has no checkpoint {epoch}"))
            }
            (StubModel::Mirror { checkpoints, selected }, Request::Predict { option, sentences, .. }) => {
                match checkpoints.get(*selected) {
                    Some(ckpt) => match ckpt.predict(&option, &sentences) {
                        Ok(r) => Response::Scores {
                            id,
                            scores: r.0.to_vec(),
                        },
                        Err(e) => error(e.to_string()),
                    },
                    None => error("no checkpoint loaded".into()),
                }
            }
            (StubModel::Mirror { checkpoints, .. }, Request::ListCheckpoints { .. }) => Response::Checkpoints {
                id,
                epochs: checkpoints.iter().map(|c| c.epoch).collect(),
            },
            (StubModel::Mirror { checkpoints, selected }, Request::SelectCheckpoint { epoch, .. }) => {
                match checkpoints.iter().position(|c| c.epoch == epoch) {
                    Some(i) => {
                        *selected = i;
                        Response::Ok { id }
                    }
                    None => error(format!("unknown epoch {epoch}")),
                }
            }
        }
    }
}
