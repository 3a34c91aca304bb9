//! Classifiers seen as value functions: image in, logit vector out.
//!
//! Backends are registered by scheme in a [`ModelRegistry`] and opened from
//! a spec string such as `toy:additive:model.json` or `exec:python serve.py`.

mod exec;
mod http;
pub mod protocol;
mod toy;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

pub use exec::ExecModel;
pub use http::HttpModel;
pub use toy::{AdditiveToyModel, PresenceDetector, TableToyModel, DEFAULT_PRESENCE_THRESHOLD};

/// Finite real scores, one per class.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLogit(i));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest logit; the first one wins a tie.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for LogitVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        LogitVector::new(Vec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl std::ops::Index<usize> for LogitVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A deterministic classifier queried as a black box.
pub trait ValueFunction: Send + Sync {
    fn class_names(&self) -> &[String];

    fn num_classes(&self) -> usize {
        self.class_names().len()
    }

    fn evaluate(&self, img: &RasterImage) -> Result<LogitVector>;

    /// Evaluates every image, preserving order. The first failure is
    /// reported together with its position.
    fn evaluate_batch(&self, imgs: &[RasterImage]) -> Result<Vec<LogitVector>> {
        imgs.iter()
            .enumerate()
            .map(|(index, img)| {
                self.evaluate(img).map_err(|e| Error::BatchItem {
                    index,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

impl<V: ValueFunction + ?Sized> ValueFunction for Arc<V> {
    fn class_names(&self) -> &[String] {
        (**self).class_names()
    }

    fn evaluate(&self, img: &RasterImage) -> Result<LogitVector> {
        (**self).evaluate(img)
    }

    fn evaluate_batch(&self, imgs: &[RasterImage]) -> Result<Vec<LogitVector>> {
        (**self).evaluate_batch(imgs)
    }
}

impl<V: ValueFunction + ?Sized> ValueFunction for Box<V> {
    fn class_names(&self) -> &[String] {
        (**self).class_names()
    }

    fn evaluate(&self, img: &RasterImage) -> Result<LogitVector> {
        (**self).evaluate(img)
    }

    fn evaluate_batch(&self, imgs: &[RasterImage]) -> Result<Vec<LogitVector>> {
        (**self).evaluate_batch(imgs)
    }
}

pub(crate) fn check_length(logits: &LogitVector, expected: usize) -> Result<()> {
    if logits.len() != expected {
        return Err(Error::MalformedResponse(format!(
            "expected {expected} logits, got {}",
            logits.len()
        )));
    }
    Ok(())
}

/// Wraps a value function and counts the images it is asked to score.
pub struct CountingEvaluator<V> {
    inner: V,
    calls: AtomicUsize,
}

impl<V: ValueFunction> CountingEvaluator<V> {
    pub fn new(inner: V) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &V {
        &self.inner
    }
}

impl<V: ValueFunction> ValueFunction for CountingEvaluator<V> {
    fn class_names(&self) -> &[String] {
        self.inner.class_names()
    }

    fn evaluate(&self, img: &RasterImage) -> Result<LogitVector> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(img)
    }

    fn evaluate_batch(&self, imgs: &[RasterImage]) -> Result<Vec<LogitVector>> {
        self.calls.fetch_add(imgs.len(), Ordering::SeqCst);
        self.inner.evaluate_batch(imgs)
    }
}

/// Where an out-of-process model lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// Command line of a child process speaking the protocol over stdio.
    Exec(String),
    /// Base URL of an HTTP server exposing `POST /predict`.
    Http(String),
}

/// Opens a connection to an external model and checks its class count.
pub fn connect_external(
    endpoint: &Endpoint,
    num_classes: Option<usize>,
    pool_size: usize,
) -> Result<Arc<dyn ValueFunction>> {
    let model: Arc<dyn ValueFunction> = match endpoint {
        Endpoint::Exec(cmd) => Arc::new(ExecModel::spawn(cmd, pool_size)?),
        Endpoint::Http(url) => Arc::new(HttpModel::connect(url, pool_size)?),
    };
    if let Some(expected) = num_classes {
        if model.num_classes() != expected {
            return Err(Error::ClassCountMismatch {
                expected,
                actual: model.num_classes(),
            });
        }
    }
    Ok(model)
}

#[derive(Debug, Clone)]
pub struct ModelOptions {
    /// Maximum number of requests in flight for external models.
    pub pool_size: usize,
    /// Class count the caller expects, checked after the handshake.
    pub expected_classes: Option<usize>,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            pool_size: 4,
            expected_classes: None,
        }
    }
}

type Factory = Box<dyn Fn(&str, &ModelOptions) -> Result<Arc<dyn ValueFunction>> + Send + Sync>;

/// Named model backends. A spec `"<scheme>:<argument>"` is dispatched to the
/// factory registered under the longest matching scheme.
pub struct ModelRegistry {
    factories: BTreeMap<String, Factory>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, scheme: &str, factory: F) -> &mut Self
    where
        F: Fn(&str, &ModelOptions) -> Result<Arc<dyn ValueFunction>> + Send + Sync + 'static,
    {
        self.factories.insert(scheme.to_string(), Box::new(factory));
        self
    }

    pub fn schemes(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn open(&self, spec: &str, opts: &ModelOptions) -> Result<Arc<dyn ValueFunction>> {
        let (scheme, arg) = self
            .factories
            .keys()
            .filter_map(|s| {
                spec.strip_prefix(s.as_str())
                    .and_then(|rest| rest.strip_prefix(':'))
                    .map(|rest| (s, rest))
            })
            .max_by_key(|(s, _)| s.len())
            .ok_or_else(|| Error::InvalidModelSpec(spec.to_string()))?;
        if arg.is_empty() {
            return Err(Error::InvalidModelSpec(spec.to_string()));
        }
        let model = (self.factories[scheme])(arg, opts)?;
        if let Some(expected) = opts.expected_classes {
            if model.num_classes() != expected {
                return Err(Error::ClassCountMismatch {
                    expected,
                    actual: model.num_classes(),
                });
            }
        }
        Ok(model)
    }
}

impl Default for ModelRegistry {
    /// Registers `toy:additive`, `toy:table`, `exec` and `http`.
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register("toy:additive", |arg, _| {
            Ok(Arc::new(AdditiveToyModel::from_file(Path::new(arg))?) as Arc<dyn ValueFunction>)
        })
        .register("toy:table", |arg, _| {
            Ok(Arc::new(TableToyModel::from_file(Path::new(arg))?) as Arc<dyn ValueFunction>)
        })
        .register("exec", |arg, opts| {
            connect_external(&Endpoint::Exec(arg.to_string()), None, opts.pool_size)
        })
        .register("http", |arg, opts| {
            // accept both "http:http://host" and the bare "http://host"
            let url = if arg.starts_with("//") {
                format!("http:{arg}")
            } else {
                arg.to_string()
            };
            connect_external(&Endpoint::Http(url), None, opts.pool_size)
        });
        reg
    }
}
