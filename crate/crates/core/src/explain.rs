//! Explaining manifest samples and lifting results onto the part vocabulary.

use log::warn;
use rayon::prelude::*;

use crate::aggregation::{class_histogram, ClassHistogram, SampleFilter, SampleRecord};
use crate::dataset::{Manifest, ManifestRecord};
use crate::error::{Error, Result};
use crate::masking::generate_set;
use crate::shapley::{
    select_target, CoalitionLogits, PartShapleyMatrix, ShapleyEstimator, TargetMode,
};
use crate::value_fn::ValueFunction;

#[derive(Debug, Clone)]
pub struct SampleExplanation {
    pub record: SampleRecord,
    pub matrix: PartShapleyMatrix,
    pub logits: CoalitionLogits,
    /// Vocabulary index of each local part of the sample.
    pub vocab_index: Vec<usize>,
}

/// Fails unless the model scores exactly the manifest's classes.
pub fn check_model_classes(vf: &dyn ValueFunction, manifest: &Manifest) -> Result<()> {
    if vf.num_classes() != manifest.classes().len() {
        return Err(Error::ClassCountMismatch {
            expected: manifest.classes().len(),
            actual: vf.num_classes(),
        });
    }
    if vf.class_names() != manifest.classes() {
        warn!(
            "model class names {:?} differ from manifest classes {:?}; matching by position",
            vf.class_names(),
            manifest.classes()
        );
    }
    Ok(())
}

/// Explains one sample over the parts it annotates. Parts of the vocabulary
/// the sample lacks are reported as `None`.
pub fn explain_record(
    vf: &dyn ValueFunction,
    estimator: &dyn ShapleyEstimator,
    manifest: &Manifest,
    record: &ManifestRecord,
    mode: TargetMode,
) -> Result<SampleExplanation> {
    let local = manifest.sample_parts(record)?;
    let img = manifest.load_image(record)?;
    let set = generate_set(img, local.parts)?;
    let explanation = estimator.explain(vf, &set)?;
    let contribution = select_target(&explanation.matrix, mode)?;

    let vocab = manifest.vocabulary().len();
    let mut histogram = vec![None; vocab];
    let mut normalized = vec![None; vocab];
    for (j, &v) in local.vocab_index.iter().enumerate() {
        histogram[v] = Some(contribution.histogram[j]);
        normalized[v] = Some(contribution.normalized[j]);
    }
    let record = SampleRecord {
        sample_id: record.id.clone(),
        true_label: manifest.label_of(record),
        predicted_label: explanation.matrix.predicted_class(),
        target_class: contribution.target_class,
        argmax_part: local.vocab_index[contribution.argmax_part],
        histogram,
        normalized,
        degenerate_normalization: contribution.degenerate_normalization,
    };
    Ok(SampleExplanation {
        record,
        matrix: explanation.matrix,
        logits: explanation.logits,
        vocab_index: local.vocab_index,
    })
}

/// Explains every sample of the manifest. Samples run in parallel on the
/// current rayon pool; results keep manifest order.
pub fn explain_dataset(
    vf: &dyn ValueFunction,
    estimator: &dyn ShapleyEstimator,
    manifest: &Manifest,
    mode: TargetMode,
) -> Result<Vec<SampleExplanation>> {
    if manifest.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_model_classes(vf, manifest)?;
    manifest
        .records
        .par_iter()
        .map(|r| explain_record(vf, estimator, manifest, r, mode))
        .collect()
}

/// One class histogram per manifest class.
pub fn class_histograms(
    records: &[SampleRecord],
    manifest: &Manifest,
    filter: SampleFilter,
) -> Result<Vec<ClassHistogram>> {
    (0..manifest.classes().len())
        .map(|c| class_histogram(records, c, filter, manifest.vocabulary().len()))
        .collect()
}
