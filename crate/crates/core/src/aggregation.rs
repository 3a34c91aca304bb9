//! Class- and task-level part histograms built from per-sample results.
//!
//! A class histogram counts how often each part is a sample's top
//! contributor and divides by the number of contributing samples. The task
//! histogram is the elementwise sum of the class histograms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-sample outcome, indexed over the full part vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub true_label: usize,
    pub predicted_label: usize,
    /// Class whose logit column forms the histogram.
    pub target_class: usize,
    pub argmax_part: usize,
    /// Shapley value per vocabulary part; `None` where the sample has no
    /// annotation for that part.
    pub histogram: Vec<Option<f64>>,
    pub normalized: Vec<Option<f64>>,
    pub degenerate_normalization: bool,
}

impl SampleRecord {
    pub fn is_correct(&self) -> bool {
        self.true_label == self.predicted_label
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFilter {
    /// Only samples whose prediction matches their label.
    #[default]
    CorrectOnly,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub class: usize,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    pub samples: usize,
    /// Mean raw Shapley value per part over the contributing samples that
    /// annotate it. Auxiliary summary alongside the argmax counts.
    pub mean_contribution: Vec<Option<f64>>,
}

impl ClassHistogram {
    pub fn parts(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskHistogram {
    pub values: Vec<f64>,
    pub contributing_classes: usize,
}

/// Histogram of top-contributing parts among samples labelled `class`.
///
/// A class with no contributing samples yields an all-zero histogram with
/// `samples == 0` rather than an error.
pub fn class_histogram(
    records: &[SampleRecord],
    class: usize,
    filter: SampleFilter,
    parts: usize,
) -> Result<ClassHistogram> {
    let mut counts = vec![0u64; parts];
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); parts];
    let mut samples = 0;
    for r in records {
        if r.histogram.len() != parts {
            return Err(Error::PartCountMismatch {
                expected: parts,
                actual: r.histogram.len(),
            });
        }
        if r.argmax_part >= parts {
            return Err(Error::PartIndexOutOfRange {
                index: r.argmax_part,
                parts,
            });
        }
        let selected = r.true_label == class
            && match filter {
                SampleFilter::CorrectOnly => r.predicted_label == class,
                SampleFilter::All => true,
            };
        if !selected {
            continue;
        }
        samples += 1;
        counts[r.argmax_part] += 1;
        for (k, v) in r.histogram.iter().enumerate() {
            if let Some(v) = v {
                values[k].push(*v);
            }
        }
    }
    let frequencies = counts
        .iter()
        .map(|&n| {
            if samples == 0 {
                0.0
            } else {
                n as f64 / samples as f64
            }
        })
        .collect();
    // summed in sorted order so the mean does not depend on record order
    let mean_contribution = values
        .iter_mut()
        .map(|v| {
            v.sort_by(f64::total_cmp);
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    Ok(ClassHistogram {
        class,
        counts,
        frequencies,
        samples,
        mean_contribution,
    })
}

/// Elementwise sum of class histogram frequencies.
pub fn task_histogram(classes: &[ClassHistogram]) -> Result<TaskHistogram> {
    let parts = classes.first().map(ClassHistogram::parts).unwrap_or(0);
    let mut values = vec![0.0; parts];
    for h in classes {
        if h.parts() != parts {
            return Err(Error::PartCountMismatch {
                expected: parts,
                actual: h.parts(),
            });
        }
        for (v, f) in values.iter_mut().zip(&h.frequencies) {
            *v += f;
        }
    }
    Ok(TaskHistogram {
        values,
        contributing_classes: classes.iter().filter(|h| !h.is_empty()).count(),
    })
}

/// Cosine similarity of two histograms, clamped to `[-1, 1]`.
pub fn histogram_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::PartCountMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
