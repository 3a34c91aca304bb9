//! Result store: every file of a run is written through [`Store`] from the
//! main thread after the parallel work has finished.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use partshap::aggregation::SampleRecord;
use partshap::explain::SampleExplanation;
use partshap::{Error, Result};
use serde::Serialize;

pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_text(&self, rel: &str, text: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(rel, &text)
    }
}

/// Sample ids become file names; anything outside `[A-Za-z0-9._-]` is
/// replaced.
pub fn file_stem(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("_{s}")
    } else {
        s
    }
}

#[derive(Serialize)]
pub struct SampleFile<'a> {
    #[serde(flatten)]
    pub record: &'a SampleRecord,
    pub label: &'a str,
    pub predicted: &'a str,
    pub target: &'a str,
    pub image: &'a str,
    pub estimator: &'a str,
    /// Parts the sample annotates, in vocabulary order.
    pub parts: Vec<&'a str>,
    pub classes: &'a [String],
    /// `shapley[k][c]` over the sample's own parts.
    pub shapley: &'a [Vec<f64>],
    pub full_logits: &'a [f64],
    pub empty_logits: &'a [f64],
    /// Logits of every evaluated coalition, keyed by presence string
    /// (first character = first part).
    pub coalition_logits: BTreeMap<String, &'a [f64]>,
}

impl<'a> SampleFile<'a> {
    pub fn new(
        e: &'a SampleExplanation,
        image: &'a str,
        label: &'a str,
        estimator: &'a str,
    ) -> Self {
        let m = &e.matrix;
        Self {
            record: &e.record,
            label,
            predicted: &m.class_names[e.record.predicted_label],
            target: &m.class_names[e.record.target_class],
            image,
            estimator,
            parts: m.part_names.iter().map(String::as_str).collect(),
            classes: &m.class_names,
            shapley: &m.values,
            full_logits: m.full_logits.values(),
            empty_logits: m.empty_logits.values(),
            coalition_logits: e
                .logits
                .iter()
                .map(|(c, l)| (c.to_presence_string(), l.values()))
                .collect(),
        }
    }
}
