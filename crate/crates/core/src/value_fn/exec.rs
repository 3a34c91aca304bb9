use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread;

use log::warn;

use super::protocol::{Request, Response};
use super::{check_length, LogitVector, ValueFunction};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

type Reply = (u64, Result<LogitVector>);

#[derive(Default)]
struct Pending {
    waiters: HashMap<u64, Sender<Reply>>,
    closed: Option<String>,
}

/// Model hosted by a child process that speaks the protocol over stdio.
///
/// Requests from any number of threads are pipelined through one pipe; a
/// reader thread routes each response to its caller by id.
pub struct ExecModel {
    class_names: Vec<String>,
    pool_size: usize,
    stdin: Mutex<ChildStdin>,
    pending: Arc<Mutex<Pending>>,
    next_id: AtomicU64,
    child: Mutex<Child>,
}

impl std::fmt::Debug for ExecModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExecModel")
            .field("class_names", &self.class_names)
            .field("pool_size", &self.pool_size)
            .finish_non_exhaustive()
    }
}

impl ExecModel {
    pub fn spawn(command_line: &str, pool_size: usize) -> Result<Self> {
        let argv = split_command(command_line);
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| Error::InvalidModelSpec(format!("exec:{command_line}")))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::EvaluatorUnavailable(format!("cannot start '{program}': {e}")))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = BufReader::new(child.stdout.take().expect("piped stdout"));

        writeln!(stdin, "{}", Request::Hello.to_line())
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::HandshakeFailed(e.to_string()))?;
        let mut line = String::new();
        let n = stdout
            .read_line(&mut line)
            .map_err(|e| Error::HandshakeFailed(e.to_string()))?;
        if n == 0 {
            let _ = child.kill();
            return Err(Error::HandshakeFailed(
                "model process closed its output".into(),
            ));
        }
        let class_names = match Response::parse(&line).and_then(Response::into_classes) {
            Ok(c) => c,
            Err(e) => {
                let _ = child.kill();
                return Err(match e {
                    Error::MalformedResponse(m) => Error::HandshakeFailed(m),
                    other => other,
                });
            }
        };

        let pending = Arc::new(Mutex::new(Pending::default()));
        let reader_pending = Arc::clone(&pending);
        thread::Builder::new()
            .name("exec-model-reader".into())
            .spawn(move || read_responses(stdout, reader_pending))
            .map_err(|e| Error::EvaluatorUnavailable(e.to_string()))?;

        Ok(Self {
            class_names,
            pool_size: pool_size.max(1),
            stdin: Mutex::new(stdin),
            pending,
            next_id: AtomicU64::new(1),
            child: Mutex::new(child),
        })
    }

    fn send(&self, img: &RasterImage, reply: &Sender<Reply>) -> Result<u64> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let line = Request::predict(id, img)?.to_line();
        {
            let mut pending = self.pending.lock().expect("pending lock");
            if let Some(reason) = &pending.closed {
                return Err(Error::EvaluatorUnavailable(reason.clone()));
            }
            pending.waiters.insert(id, reply.clone());
        }
        let mut stdin = self.stdin.lock().expect("stdin lock");
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::EvaluatorUnavailable(e.to_string()))?;
        Ok(id)
    }

    fn receive(&self, rx: &Receiver<Reply>) -> Result<Reply> {
        rx.recv()
            .map_err(|_| Error::EvaluatorUnavailable("model process stopped responding".into()))
    }
}

fn read_responses(stdout: impl BufRead, pending: Arc<Mutex<Pending>>) {
    let mut reason = "model process exited".to_string();
    for line in stdout.lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                reason = e.to_string();
                break;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let (id, result) = match Response::parse(&line) {
            Ok(Response::Logits { id, values }) => (id, LogitVector::new(values)),
            Ok(Response::Error { id, message }) => (id, Err(Error::EvaluatorFailed(message))),
            Ok(Response::Hello { .. }) => {
                warn!("ignoring unexpected hello from model process");
                continue;
            }
            Err(e) => {
                warn!("ignoring unparsable model output: {e}");
                continue;
            }
        };
        let waiter = pending.lock().expect("pending lock").waiters.remove(&id);
        match waiter {
            Some(tx) => {
                let _ = tx.send((id, result));
            }
            None => warn!("response for unknown request id {id}"),
        }
    }
    let mut pending = pending.lock().expect("pending lock");
    pending.closed = Some(reason.clone());
    for (id, tx) in pending.waiters.drain() {
        let _ = tx.send((id, Err(Error::EvaluatorUnavailable(reason.clone()))));
    }
}

impl ValueFunction for ExecModel {
    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn evaluate(&self, img: &RasterImage) -> Result<LogitVector> {
        self.evaluate_batch(std::slice::from_ref(img))
            .map(|mut v| v.remove(0))
            .map_err(|e| match e {
                Error::BatchItem { source, .. } => *source,
                other => other,
            })
    }

    fn evaluate_batch(&self, imgs: &[RasterImage]) -> Result<Vec<LogitVector>> {
        let (tx, rx) = mpsc::channel();
        let mut slots: Vec<Option<LogitVector>> = vec![None; imgs.len()];
        let mut index_of = HashMap::new();
        let mut next = 0;
        let mut done = 0;
        let fail = |index: usize, e: Error| Error::BatchItem {
            index,
            source: Box::new(e),
        };
        while done < imgs.len() {
            while next < imgs.len() && index_of.len() < self.pool_size {
                let id = self.send(&imgs[next], &tx).map_err(|e| fail(next, e))?;
                index_of.insert(id, next);
                next += 1;
            }
            let (id, result) = self.receive(&rx)?;
            let index = index_of
                .remove(&id)
                .ok_or_else(|| Error::MalformedResponse(format!("unexpected id {id}")))?;
            let logits = result
                .and_then(|l| check_length(&l, self.class_names.len()).map(|_| l))
                .map_err(|e| fail(index, e))?;
            slots[index] = Some(logits);
            done += 1;
        }
        Ok(slots.into_iter().map(|s| s.expect("filled")).collect())
    }
}

impl Drop for ExecModel {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Splits a command line on whitespace, honouring single and double quotes.
fn split_command(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut in_word = false;
    for ch in line.chars() {
        match (quote, ch) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), c) => cur.push(c),
            (None, '"' | '\'') => {
                quote = Some(ch);
                in_word = true;
            }
            (None, c) if c.is_whitespace() => {
                if in_word {
                    out.push(std::mem::take(&mut cur));
                    in_word = false;
                }
            }
            (None, c) => {
                cur.push(c);
                in_word = true;
            }
        }
    }
    if in_word {
        out.push(cur);
    }
    out
}
