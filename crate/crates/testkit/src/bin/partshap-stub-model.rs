//! Scriptable model server speaking the partshap wire protocol, used to
//! exercise the external clients.
//!
//! ```text
//! partshap-stub-model [--classes N] [--constant a,b,..] [--additive CONFIG]
//!                     [--reverse N] [--fail-id ID] [--die-after N] [--http ADDR]
//! ```
//!
//! Without `--http` it serves stdin/stdout. `--reverse N` holds replies
//! until N are queued and sends them newest first.

use std::io::{self, BufRead, Write};
use std::path::Path;
use std::process::ExitCode;

use partshap::value_fn::protocol::{Request, Response};
use partshap::value_fn::{AdditiveToyModel, ValueFunction};

#[derive(Default)]
struct Options {
    classes: Option<usize>,
    constant: Option<Vec<f64>>,
    additive: Option<AdditiveToyModel>,
    reverse: usize,
    fail_id: Option<u64>,
    die_after: Option<usize>,
    http: Option<String>,
}

fn parse_args() -> Result<Options, String> {
    let mut opts = Options {
        reverse: 1,
        ..Default::default()
    };
    let mut args = std::env::args().skip(1);
    while let Some(flag) = args.next() {
        let mut value = || args.next().ok_or(format!("{flag} needs a value"));
        match flag.as_str() {
            "--classes" => opts.classes = Some(value()?.parse().map_err(|e| format!("{e}"))?),
            "--constant" => {
                opts.constant = Some(
                    value()?
                        .split(',')
                        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{e}")))
                        .collect::<Result<_, _>>()?,
                )
            }
            "--additive" => {
                opts.additive = Some(
                    AdditiveToyModel::from_file(Path::new(&value()?)).map_err(|e| e.to_string())?,
                )
            }
            "--reverse" => opts.reverse = value()?.parse().map_err(|e| format!("{e}"))?,
            "--fail-id" => opts.fail_id = Some(value()?.parse().map_err(|e| format!("{e}"))?),
            "--die-after" => opts.die_after = Some(value()?.parse().map_err(|e| format!("{e}"))?),
            "--http" => opts.http = Some(value()?),
            other => return Err(format!("unknown flag {other}")),
        }
    }
    opts.reverse = opts.reverse.max(1);
    Ok(opts)
}

impl Options {
    fn class_names(&self) -> Vec<String> {
        if let Some(m) = &self.additive {
            return m.class_names().to_vec();
        }
        let n = self
            .classes
            .or(self.constant.as_ref().map(Vec::len))
            .unwrap_or(2);
        (0..n).map(|c| format!("c{c}")).collect()
    }

    fn answer(&self, request: &Request) -> Response {
        match request {
            Request::Hello => {
                let class_names = self.class_names();
                Response::Hello {
                    num_classes: self.classes.unwrap_or(class_names.len()),
                    class_names,
                }
            }
            Request::Predict { id, .. } => {
                let id = *id;
                if self.fail_id == Some(id) {
                    return Response::Error {
                        id,
                        message: format!("refusing request {id}"),
                    };
                }
                let values = match (&self.additive, &self.constant) {
                    (Some(m), _) => request
                        .decode_image()
                        .and_then(|img| m.evaluate(&img))
                        .map(|l| l.into_inner()),
                    (None, Some(c)) => Ok(c.clone()),
                    (None, None) => Ok(vec![0.0; self.class_names().len()]),
                };
                match values {
                    Ok(values) => Response::Logits { id, values },
                    Err(e) => Response::Error {
                        id,
                        message: e.to_string(),
                    },
                }
            }
        }
    }
}

fn serve_stdio(opts: &Options) -> io::Result<()> {
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    let mut queued = Vec::new();
    let mut predictions = 0usize;
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(r) => {
                if matches!(r, Request::Predict { .. }) {
                    if opts.die_after == Some(predictions) {
                        return Ok(());
                    }
                    predictions += 1;
                }
                opts.answer(&r)
            }
            Err(e) => Response::Error {
                id: 0,
                message: format!("bad request: {e}"),
            },
        };
        if matches!(response, Response::Hello { .. }) {
            writeln!(out, "{}", response.to_line())?;
            out.flush()?;
            continue;
        }
        queued.push(response);
        if queued.len() >= opts.reverse {
            for r in queued.drain(..).rev() {
                writeln!(out, "{}", r.to_line())?;
            }
            out.flush()?;
        }
    }
    for r in queued.drain(..).rev() {
        writeln!(out, "{}", r.to_line())?;
    }
    out.flush()
}

fn serve_http(opts: &Options, addr: &str) -> Result<(), String> {
    let server = tiny_http::Server::http(addr).map_err(|e| e.to_string())?;
    let bound = server
        .server_addr()
        .to_ip()
        .ok_or("server is not bound to an IP address")?;
    println!("listening on http://{bound}");
    io::stdout().flush().map_err(|e| e.to_string())?;
    let mut predictions = 0usize;
    for mut request in server.incoming_requests() {
        let mut body = String::new();
        if request.as_reader().read_to_string(&mut body).is_err() {
            continue;
        }
        let (status, response) = match serde_json::from_str::<Request>(body.trim()) {
            Ok(r) => {
                if matches!(r, Request::Predict { .. }) {
                    if opts.die_after == Some(predictions) {
                        return Ok(());
                    }
                    predictions += 1;
                }
                (200, opts.answer(&r))
            }
            Err(e) => (
                400,
                Response::Error {
                    id: 0,
                    message: format!("bad request: {e}"),
                },
            ),
        };
        let reply = tiny_http::Response::from_string(response.to_line()).with_status_code(status);
        let _ = request.respond(reply);
    }
    Ok(())
}

fn main() -> ExitCode {
    let opts = match parse_args() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("partshap-stub-model: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match &opts.http {
        Some(addr) => serve_http(&opts, addr),
        None => serve_stdio(&opts).map_err(|e| e.to_string()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("partshap-stub-model: {e}");
            ExitCode::FAILURE
        }
    }
}
