use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use super::protocol::{Request, Response};
use super::{ScoreVector, Scorer, NUM_CLASSES};
use crate::error::{Error, Result};

struct Connection {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    next_id: u64,
}

/// A scorer living in a child process that speaks the line-delimited JSON
/// protocol. Requests are serialized through one connection; run several
/// handles for parallelism.
pub struct ExternalScorer {
    command: String,
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for ExternalScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalScorer").field("command", &self.command).finish()
    }
}

impl ExternalScorer {
    /// Starts `command_line` (whitespace-separated program and arguments).
    pub fn spawn(command_line: &str) -> Result<Self> {
        let mut parts = command_line.split_whitespace();
        let program = parts.next().ok_or_else(|| Error::Protocol {
            message: "empty scorer command".into(),
            exchange: String::new(),
        })?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol {
                message: format!("failed to start `{command_line}`: {e}"),
                exchange: String::new(),
            })?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalScorer {
            command: command_line.to_string(),
            conn: Mutex::new(Connection {
                child,
                stdin,
                stdout,
                next_id: 1,
            }),
        })
    }

    fn call(&self, make: impl FnOnce(String) -> Request) -> Result<Response> {
        let mut conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        let id = conn.next_id.to_string();
        conn.next_id += 1;
        let request = serde_json::to_string(&make(id.clone()))?;
        let violation = |message: String, response: &str| Error::Protocol {
            message,
            exchange: format!("-> {request} <- {response}"),
        };

        let stdin = conn.stdin.as_mut().ok_or_else(|| violation("stdin closed".into(), ""))?;
        writeln!(stdin, "{request}")
            .and_then(|_| stdin.flush())
            .map_err(|e| violation(format!("write failed: {e}"), ""))?;
        let mut line = String::new();
        let n = conn
            .stdout
            .read_line(&mut line)
            .map_err(|e| violation(format!("read failed: {e}"), ""))?;
        if n == 0 {
            return Err(violation("scorer closed its output".into(), ""));
        }
        let line = line.trim_end();
        let response: Response =
            serde_json::from_str(line).map_err(|e| violation(format!("unparseable response: {e}"), line))?;
        if response.id() != id {
            return Err(violation(format!("response id `{}` != request id `{id}`", response.id()), line));
        }
        if let Response::Error { message, .. } = &response {
            return Err(violation(format!("scorer error: {message}"), line));
        }
        Ok(response)
    }

    pub fn list_checkpoints(&self) -> Result<Vec<u32>> {
        match self.call(|id| Request::ListCheckpoints { id })? {
            Response::Checkpoints { epochs, .. } => Ok(epochs),
            other => Err(unexpected(&other)),
        }
    }

    pub fn select_checkpoint(&self, epoch: u32) -> Result<()> {
        match self.call(|id| Request::SelectCheckpoint { id, epoch })? {
            Response::Ok { .. } => Ok(()),
            other => Err(unexpected(&other)),
        }
    }
}

fn unexpected(response: &Response) -> Error {
    Error::Protocol {
        message: "unexpected response type".into(),
        exchange: serde_json::to_string(response).unwrap_or_default(),
    }
}

impl Scorer for ExternalScorer {
    fn predict(&self, option: &str, sentences: &[String]) -> Result<ScoreVector> {
        let response = self.call(|id| Request::Predict {
            id,
            option: option.to_string(),
            sentences: sentences.to_vec(),
        })?;
        match response {
            Response::Scores { scores, .. } if scores.len() == NUM_CLASSES => {
                let r = ScoreVector([scores[0], scores[1]]);
                if r.is_finite() {
                    Ok(r)
                } else {
                    Err(unexpected(&Response::Scores { id: String::new(), scores }))
                }
            }
            other => Err(unexpected(&other)),
        }
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        let conn = self.conn.get_mut().unwrap_or_else(|p| p.into_inner());
        // closing stdin signals end of input to the plugin
        conn.stdin.take();
        for _ in 0..100 {
            if let Ok(Some(_)) = conn.child.try_wait() {
                return;
            }
            std::thread::sleep(std::time::Duration::from_millis(10));
        }
        let _ = conn.child.kill();
        let _ = conn.child.wait();
    }
}
