use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::protocol::{Request, Response};
use super::{check_length, LogitVector, ValueFunction};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Model served over HTTP: every message is a `POST /predict` whose body is
/// one protocol line and whose response body is the reply line.
pub struct HttpModel {
    url: String,
    agent: ureq::Agent,
    class_names: Vec<String>,
    pool_size: usize,
    next_id: AtomicU64,
}

impl std::fmt::Debug for HttpModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpModel")
            .field("url", &self.url)
            .field("class_names", &self.class_names)
            .field("pool_size", &self.pool_size)
            .finish_non_exhaustive()
    }
}

impl HttpModel {
    pub fn connect(base_url: &str, pool_size: usize) -> Result<Self> {
        let trimmed = base_url.trim_end_matches('/');
        let url = if trimmed.ends_with("/predict") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/predict")
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        let mut model = Self {
            url,
            agent,
            class_names: Vec::new(),
            pool_size: pool_size.max(1),
            next_id: AtomicU64::new(1),
        };
        let reply = model.exchange(&Request::Hello).map_err(|e| match e {
            Error::EvaluatorUnavailable(m) | Error::MalformedResponse(m) => {
                Error::HandshakeFailed(m)
            }
            other => other,
        })?;
        model.class_names = reply.into_classes()?;
        Ok(model)
    }

    fn exchange(&self, req: &Request) -> Result<Response> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(req.to_line())
            .map_err(|e| Error::EvaluatorUnavailable(format!("{}: {e}", self.url)))?;
        let status = resp.status();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::EvaluatorUnavailable(e.to_string()))?;
        match Response::parse(&body) {
            Ok(r) => Ok(r),
            Err(_) if !status.is_success() => Err(Error::EvaluatorUnavailable(format!(
                "{} answered {status}",
                self.url
            ))),
            Err(e) => Err(e),
        }
    }

    fn predict(&self, img: &RasterImage) -> Result<LogitVector> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        match self.exchange(&Request::predict(id, img)?)? {
            Response::Logits { id: got, values } if got == id => {
                let logits = LogitVector::new(values)?;
                check_length(&logits, self.class_names.len())?;
                Ok(logits)
            }
            Response::Logits { id: got, .. } => Err(Error::MalformedResponse(format!(
                "response id {got} does not match request id {id}"
            ))),
            Response::Error { message, .. } => Err(Error::EvaluatorFailed(message)),
            Response::Hello { .. } => {
                Err(Error::MalformedResponse("hello in reply to predict".into()))
            }
        }
    }
}

impl ValueFunction for HttpModel {
    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn evaluate(&self, img: &RasterImage) -> Result<LogitVector> {
        self.predict(img)
    }

    fn evaluate_batch(&self, imgs: &[RasterImage]) -> Result<Vec<LogitVector>> {
        let slots: Vec<Mutex<Option<Result<LogitVector>>>> =
            imgs.iter().map(|_| Mutex::new(None)).collect();
        let cursor = AtomicUsize::new(0);
        let workers = self.pool_size.min(imgs.len());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    if i >= imgs.len() {
                        break;
                    }
                    let result = self.predict(&imgs[i]);
                    let failed = result.is_err();
                    *slots[i].lock().expect("slot lock") = Some(result);
                    if failed {
                        // stop handing out work; earlier items still finish
                        cursor.fetch_max(imgs.len(), Ordering::Relaxed);
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(imgs.len());
        for (index, slot) in slots.into_iter().enumerate() {
            match slot.into_inner().expect("slot lock") {
                Some(Ok(l)) => out.push(l),
                Some(Err(e)) => {
                    return Err(Error::BatchItem {
                        index,
                        source: Box::new(e),
                    })
                }
                None => unreachable!("batch stopped before a failure was recorded"),
            }
        }
        Ok(out)
    }
}
