//! Validation runs for part rankings.
//!
//! Inclusion keeps a single part (plus everything outside the annotated
//! boxes) and exclusion masks a single part; both measure per-class
//! accuracy over the same samples for every part. The annotation comparison
//! recomputes class histograms under a second set of boxes and reports the
//! cosine similarity per class.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::aggregation::{histogram_similarity, ClassHistogram, SampleFilter, TaskHistogram};
use crate::coalition::Coalition;
use crate::dataset::Manifest;
use crate::error::{Error, Result};
use crate::explain::{check_model_classes, class_histograms, explain_dataset};
use crate::masking::generate_set;
use crate::shapley::{ShapleyEstimator, TargetMode};
use crate::value_fn::ValueFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SanityMode {
    Inclusion,
    Exclusion,
}

/// Accuracy with one part kept (inclusion) or removed (exclusion).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartAccuracy {
    pub mode: SanityMode,
    /// `per_class[k][c]`; `None` when class `c` has no samples.
    pub per_class: Vec<Vec<Option<f64>>>,
    /// Accuracy per part over all samples.
    pub overall: Vec<f64>,
    pub class_samples: Vec<usize>,
    /// Accuracy on the unmasked images.
    pub baseline: Vec<Option<f64>>,
    pub baseline_overall: f64,
}

pub fn run_inclusion(vf: &dyn ValueFunction, manifest: &Manifest) -> Result<PartAccuracy> {
    run(vf, manifest, SanityMode::Inclusion)
}

pub fn run_exclusion(vf: &dyn ValueFunction, manifest: &Manifest) -> Result<PartAccuracy> {
    run(vf, manifest, SanityMode::Exclusion)
}

fn run(vf: &dyn ValueFunction, manifest: &Manifest, mode: SanityMode) -> Result<PartAccuracy> {
    let vocab = manifest.vocabulary().len();
    if vocab < 2 {
        return Err(Error::Usage(format!(
            "{} runs need a part vocabulary of at least 2 parts, found {vocab}",
            match mode {
                SanityMode::Inclusion => "inclusion",
                SanityMode::Exclusion => "exclusion",
            }
        )));
    }
    if manifest.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_model_classes(vf, manifest)?;

    // per sample: (label, [hit per part], baseline hit)
    let outcomes = manifest
        .records
        .par_iter()
        .map(|record| -> Result<(usize, Vec<bool>, bool)> {
            let local = manifest.sample_parts(record)?;
            let k = local.parts.len();
            let set = generate_set(manifest.load_image(record)?, local.parts.clone())?;
            let mut coalitions = Vec::with_capacity(vocab + 1);
            for v in 0..vocab {
                let c = match (mode, local.local_index(v)) {
                    (SanityMode::Inclusion, Some(j)) => Coalition::from_members(&[j], k)?,
                    // a part the sample lacks cannot be shown on its own
                    (SanityMode::Inclusion, None) => set.empty(),
                    (SanityMode::Exclusion, Some(j)) => set.full().without(j),
                    (SanityMode::Exclusion, None) => set.full(),
                };
                coalitions.push(c);
            }
            coalitions.push(set.full());
            let images = coalitions
                .iter()
                .map(|&c| set.render(c))
                .collect::<Result<Vec<_>>>()?;
            let logits = vf.evaluate_batch(&images)?;
            let label = manifest.label_of(record);
            let hits: Vec<bool> = logits.iter().map(|l| l.argmax() == label).collect();
            let baseline = hits[vocab];
            Ok((label, hits[..vocab].to_vec(), baseline))
        })
        .collect::<Result<Vec<_>>>()?;

    let classes = manifest.classes().len();
    let mut class_samples = vec![0usize; classes];
    let mut hits = vec![vec![0usize; classes]; vocab];
    let mut baseline_hits = vec![0usize; classes];
    for (label, part_hits, base) in &outcomes {
        class_samples[*label] += 1;
        baseline_hits[*label] += *base as usize;
        for (k, &h) in part_hits.iter().enumerate() {
            hits[k][*label] += h as usize;
        }
    }
    let ratio = |n: usize, d: usize| (d > 0).then(|| n as f64 / d as f64);
    let total = outcomes.len();
    Ok(PartAccuracy {
        mode,
        per_class: hits
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&class_samples)
                    .map(|(&h, &n)| ratio(h, n))
                    .collect()
            })
            .collect(),
        overall: hits
            .iter()
            .map(|row| row.iter().sum::<usize>() as f64 / total as f64)
            .collect(),
        baseline: baseline_hits
            .iter()
            .zip(&class_samples)
            .map(|(&h, &n)| ratio(h, n))
            .collect(),
        baseline_overall: baseline_hits.iter().sum::<usize>() as f64 / total as f64,
        class_samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartEntry {
    pub part: usize,
    pub name: String,
    /// Class-level (or task-level, for the overall table) histogram value.
    pub contribution: f64,
    pub mean_shapley: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: usize,
    pub name: String,
    pub samples: usize,
    pub baseline_accuracy: Option<f64>,
    /// Sorted by descending contribution.
    pub parts: Vec<PartEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionExclusionReport {
    pub mode: SanityMode,
    pub classes: Vec<ClassReport>,
    pub overall_baseline_accuracy: f64,
    /// All samples pooled, sorted by descending task-level contribution.
    pub overall: Vec<PartEntry>,
}

impl InclusionExclusionReport {
    pub fn build(
        accuracy: &PartAccuracy,
        histograms: &[ClassHistogram],
        task: &TaskHistogram,
        manifest: &Manifest,
    ) -> Self {
        let vocab = manifest.vocabulary();
        let classes = histograms
            .iter()
            .map(|h| {
                let c = h.class;
                let mut parts: Vec<PartEntry> = (0..vocab.len())
                    .map(|k| PartEntry {
                        part: k,
                        name: vocab[k].clone(),
                        contribution: h.frequencies[k],
                        mean_shapley: h.mean_contribution[k],
                        accuracy: accuracy.per_class[k][c],
                    })
                    .collect();
                sort_entries(&mut parts);
                ClassReport {
                    class: c,
                    name: manifest.classes()[c].clone(),
                    samples: accuracy.class_samples[c],
                    baseline_accuracy: accuracy.baseline[c],
                    parts,
                }
            })
            .collect();
        let mut overall: Vec<PartEntry> = (0..vocab.len())
            .map(|k| PartEntry {
                part: k,
                name: vocab[k].clone(),
                contribution: task.values[k],
                mean_shapley: None,
                accuracy: Some(accuracy.overall[k]),
            })
            .collect();
        sort_entries(&mut overall);
        Self {
            mode: accuracy.mode,
            classes,
            overall_baseline_accuracy: accuracy.baseline_overall,
            overall,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,rank,part,contribution,mean_shapley,accuracy\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let rows = self
            .classes
            .iter()
            .map(|c| (c.name.as_str(), &c.parts))
            .chain(std::iter::once(("*", &self.overall)));
        for (class, parts) in rows {
            for (rank, e) in parts.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    csv_field(class),
                    rank + 1,
                    csv_field(&e.name),
                    e.contribution,
                    opt(e.mean_shapley),
                    opt(e.accuracy)
                );
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn sort_entries(entries: &mut [PartEntry]) {
    entries.sort_by(|a, b| {
        b.contribution
            .total_cmp(&a.contribution)
            .then_with(|| match (a.mean_shapley, b.mean_shapley) {
                (Some(x), Some(y)) => y.total_cmp(&x),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            })
            .then(a.part.cmp(&b.part))
    });
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationComparison {
    pub class_names: Vec<String>,
    /// Cosine similarity per class; `None` when either source leaves the
    /// class without contributing samples.
    pub per_class: Vec<Option<f64>>,
    /// Mean over the classes with a similarity.
    pub average: Option<f64>,
    pub histograms_a: Vec<ClassHistogram>,
    pub histograms_b: Vec<ClassHistogram>,
}

/// Class histograms under two annotation sources for the same samples.
pub fn compare_annotation_sources(
    vf: &dyn ValueFunction,
    estimator: &dyn ShapleyEstimator,
    a: &Manifest,
    b: &Manifest,
    filter: SampleFilter,
) -> Result<AnnotationComparison> {
    if a.classes() != b.classes() {
        return Err(Error::VocabularyMismatch("class lists differ".into()));
    }
    if a.vocabulary() != b.vocabulary() {
        return Err(Error::VocabularyMismatch("part vocabularies differ".into()));
    }
    let samples = |m: &Manifest| -> BTreeMap<String, String> {
        m.records
            .iter()
            .map(|r| (r.id.clone(), r.label.clone()))
            .collect()
    };
    if samples(a) != samples(b) {
        return Err(Error::VocabularyMismatch(
            "sources cover different samples or labels".into(),
        ));
    }
    let histograms = |m: &Manifest| -> Result<Vec<ClassHistogram>> {
        let records: Vec<_> = explain_dataset(vf, estimator, m, TargetMode::Predicted)?
            .into_iter()
            .map(|e| e.record)
            .collect();
        class_histograms(&records, m, filter)
    };
    let histograms_a = histograms(a)?;
    let histograms_b = histograms(b)?;
    let per_class = histograms_a
        .iter()
        .zip(&histograms_b)
        .map(|(x, y)| {
            if x.is_empty() || y.is_empty() {
                Ok(None)
            } else {
                histogram_similarity(&x.frequencies, &y.frequencies).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let average = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(AnnotationComparison {
        class_names: a.classes().to_vec(),
        per_class,
        average,
        histograms_a,
        histograms_b,
    })
}
