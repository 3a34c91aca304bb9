//! Part-level Shapley attribution for one sample.
//!
//! Estimators share the [`ShapleyEstimator`] trait and are looked up by name
//! in an [`EstimatorRegistry`]: `exact` enumerates the full power set,
//! `permutation` averages marginals over sampled join orders.

mod exact;
mod permutation;
mod summation;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::masking::{generate_set, CoalitionImageSet, PartSet};
use crate::raster::RasterImage;
use crate::value_fn::{LogitVector, ValueFunction};

pub use exact::{exact_shapley, ExactShapley};
pub use permutation::PermutationShapley;
pub use summation::pairwise_sum;

/// Coalitions rendered and sent to the model per batch.
pub(crate) const RENDER_CHUNK: usize = 256;

/// `values[k][c]` is the Shapley value of part `k` for the logit of class `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartShapleyMatrix {
    pub values: Vec<Vec<f64>>,
    pub part_names: Vec<String>,
    pub class_names: Vec<String>,
    /// Logits of the unmasked image.
    pub full_logits: LogitVector,
    /// Logits with every part masked.
    pub empty_logits: LogitVector,
}

impl PartShapleyMatrix {
    pub fn parts(&self) -> usize {
        self.values.len()
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn column(&self, class: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[class]).collect()
    }

    /// Class predicted on the unmasked image.
    pub fn predicted_class(&self) -> usize {
        self.full_logits.argmax()
    }

    /// `f(full)[c] - f(empty)[c]`, the total every column must sum to.
    pub fn total_gain(&self, class: usize) -> f64 {
        self.full_logits[class] - self.empty_logits[class]
    }
}

/// Logit vectors of evaluated coalitions, ordered by bit pattern.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoalitionLogits {
    entries: BTreeMap<Coalition, LogitVector>,
}

impl CoalitionLogits {
    pub fn get(&self, c: Coalition) -> Option<&LogitVector> {
        self.entries.get(&c)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Coalition, &LogitVector)> {
        self.entries.iter()
    }

    pub(crate) fn insert(&mut self, c: Coalition, l: LogitVector) {
        self.entries.insert(c, l);
    }
}

/// Renders and evaluates `coalitions` in order, batching model calls.
pub fn evaluate_coalitions(
    vf: &dyn ValueFunction,
    set: &CoalitionImageSet,
    coalitions: &[Coalition],
) -> Result<CoalitionLogits> {
    let mut out = CoalitionLogits::default();
    for chunk in coalitions.chunks(RENDER_CHUNK) {
        let images = chunk
            .iter()
            .map(|&c| set.render(c))
            .collect::<Result<Vec<_>>>()?;
        let logits = vf.evaluate_batch(&images)?;
        if logits.len() != chunk.len() {
            return Err(Error::MalformedResponse(format!(
                "{} results for a batch of {}",
                logits.len(),
                chunk.len()
            )));
        }
        for (&c, l) in chunk.iter().zip(logits) {
            if l.len() != vf.num_classes() {
                return Err(Error::MalformedResponse(format!(
                    "expected {} logits, got {}",
                    vf.num_classes(),
                    l.len()
                )));
            }
            out.insert(c, l);
        }
    }
    Ok(out)
}

/// Result of explaining one sample.
#[derive(Debug, Clone)]
pub struct Explanation {
    pub matrix: PartShapleyMatrix,
    /// Every coalition the estimator evaluated.
    pub logits: CoalitionLogits,
}

pub trait ShapleyEstimator: Send + Sync {
    fn name(&self) -> &str;

    fn explain(&self, vf: &dyn ValueFunction, set: &CoalitionImageSet) -> Result<Explanation>;
}

/// Exact part Shapley matrix for one image: evaluates each of the `2^K`
/// coalition images once.
pub fn explain_sample(
    vf: &dyn ValueFunction,
    img: RasterImage,
    parts: PartSet,
) -> Result<PartShapleyMatrix> {
    let set = generate_set(img, parts)?;
    Ok(ExactShapley.explain(vf, &set)?.matrix)
}

/// Permutation-sampling estimate; enumerates every join order when
/// `num_permutations >= K!`.
pub fn estimate_shapley_mc(
    vf: &dyn ValueFunction,
    img: RasterImage,
    parts: PartSet,
    num_permutations: usize,
    seed: u64,
) -> Result<PartShapleyMatrix> {
    let set = generate_set(img, parts)?;
    Ok(PermutationShapley::new(num_permutations, seed)?
        .explain(vf, &set)?
        .matrix)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EstimatorOptions {
    pub permutations: usize,
    pub seed: u64,
}

type EstimatorFactory =
    Box<dyn Fn(&EstimatorOptions) -> Result<Box<dyn ShapleyEstimator>> + Send + Sync>;

pub struct EstimatorRegistry {
    factories: BTreeMap<String, EstimatorFactory>,
}

impl EstimatorRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, name: &str, factory: F) -> &mut Self
    where
        F: Fn(&EstimatorOptions) -> Result<Box<dyn ShapleyEstimator>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, opts: &EstimatorOptions) -> Result<Box<dyn ShapleyEstimator>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::Usage(format!("unknown estimator '{name}'")))?;
        factory(opts)
    }
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        let mut reg = Self::empty();
        reg.register("exact", |_| Ok(Box::new(ExactShapley)))
            .register("permutation", |o| {
                Ok(Box::new(PermutationShapley::new(o.permutations, o.seed)?))
            });
        reg
    }
}

/// Which logit column forms the sample histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "class")]
pub enum TargetMode {
    /// Class predicted on the unmasked image.
    Predicted,
    /// Fixed class index.
    Label(usize),
}

/// Histogram of part contributions for one class of one sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleContribution {
    pub histogram: Vec<f64>,
    pub target_class: usize,
    pub mode: TargetMode,
    /// `histogram / max(histogram)`; the raw histogram when the max is not
    /// positive, flagged by `degenerate_normalization`.
    pub normalized: Vec<f64>,
    pub degenerate_normalization: bool,
    /// First index attaining the maximum.
    pub argmax_part: usize,
}

pub fn select_target(matrix: &PartShapleyMatrix, mode: TargetMode) -> Result<SampleContribution> {
    let target_class = match mode {
        TargetMode::Predicted => matrix.predicted_class(),
        TargetMode::Label(c) if c < matrix.classes() => c,
        TargetMode::Label(c) => return Err(Error::UnknownClass(c.to_string())),
    };
    let histogram = matrix.column(target_class);
    Ok(contribution_from_histogram(histogram, target_class, mode))
}

pub(crate) fn contribution_from_histogram(
    histogram: Vec<f64>,
    target_class: usize,
    mode: TargetMode,
) -> SampleContribution {
    let argmax_part = first_argmax(&histogram);
    let max = histogram[argmax_part];
    let (normalized, degenerate_normalization) = if max > 0.0 {
        (histogram.iter().map(|v| v / max).collect(), false)
    } else {
        (histogram.clone(), true)
    };
    SampleContribution {
        histogram,
        target_class,
        mode,
        normalized,
        degenerate_normalization,
        argmax_part,
    }
}

pub(crate) fn first_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
