//! Newline-delimited JSON dataset manifests.
//!
//! The first line is a header naming the classes and the part vocabulary;
//! every following line is one sample:
//!
//! ```text
//! {"classes":["female","male"],"part_vocabulary":["hair","eye","foot"]}
//! {"id":"s1","image":"img/s1.png","label":"female","parts":[{"name":"hair","box":[4,2,20,10]}]}
//! ```
//!
//! Image paths are relative to the manifest's directory. Samples may omit
//! parts of the vocabulary.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masking::{PartAnnotation, PartSet};
use crate::raster::RasterImage;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub classes: Vec<String>,
    pub part_vocabulary: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    pub image: String,
    pub label: String,
    pub parts: Vec<PartAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<ManifestRecord>,
    base_dir: PathBuf,
}

/// Parts one sample annotates, in vocabulary order.
#[derive(Debug, Clone)]
pub struct SampleParts {
    pub parts: PartSet,
    /// Vocabulary index of each local part.
    pub vocab_index: Vec<usize>,
}

impl SampleParts {
    /// Local index of vocabulary part `vocab`, if the sample annotates it.
    pub fn local_index(&self, vocab: usize) -> Option<usize> {
        self.vocab_index.iter().position(|&v| v == vocab)
    }
}

impl Manifest {
    pub fn new(
        header: ManifestHeader,
        records: Vec<ManifestRecord>,
        base_dir: impl Into<PathBuf>,
    ) -> Result<Self> {
        let m = Self {
            header,
            records,
            base_dir: base_dir.into(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(Error::Manifest {
            line: 1,
            message: "missing header".into(),
        })?;
        let header: ManifestHeader = serde_json::from_str(first).map_err(|e| Error::Manifest {
            line: 1,
            message: format!("bad header: {e}"),
        })?;
        let records = lines
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| Error::Manifest {
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<ManifestRecord>>>()?;
        Self::new(header, records, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let err = |line: usize, message: String| Error::Manifest { line, message };
        let h = &self.header;
        if h.classes.len() < 2 {
            return Err(err(1, "at least two classes are required".into()));
        }
        if has_duplicates(&h.classes) {
            return Err(err(1, "duplicate class name".into()));
        }
        if h.part_vocabulary.is_empty() || has_duplicates(&h.part_vocabulary) {
            return Err(err(
                1,
                "part vocabulary must be non-empty and unique".into(),
            ));
        }
        let mut ids = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            let line = i + 2;
            if !ids.insert(r.id.as_str()) {
                return Err(err(line, format!("duplicate sample id '{}'", r.id)));
            }
            if !h.classes.contains(&r.label) {
                return Err(err(
                    line,
                    format!("label '{}' is not a declared class", r.label),
                ));
            }
            let mut seen = HashSet::new();
            for p in &r.parts {
                if !h.part_vocabulary.contains(&p.name) {
                    return Err(err(
                        line,
                        format!("part '{}' is not in the vocabulary", p.name),
                    ));
                }
                if !seen.insert(p.name.as_str()) {
                    return Err(err(line, format!("part '{}' annotated twice", p.name)));
                }
            }
        }
        Ok(())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn classes(&self) -> &[String] {
        &self.header.classes
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.header.part_vocabulary
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sample(&self, id: &str) -> Result<&ManifestRecord> {
        self.records
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| Error::SampleNotFound(id.to_string()))
    }

    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.header
            .classes
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn label_of(&self, record: &ManifestRecord) -> usize {
        self.class_index(&record.label).expect("validated label")
    }

    pub fn image_path(&self, record: &ManifestRecord) -> PathBuf {
        self.base_dir.join(&record.image)
    }

    pub fn load_image(&self, record: &ManifestRecord) -> Result<RasterImage> {
        RasterImage::load(&self.image_path(record))
    }

    /// Annotated parts of `record`, reordered to follow the vocabulary.
    pub fn sample_parts(&self, record: &ManifestRecord) -> Result<SampleParts> {
        let mut indexed: Vec<(usize, &PartAnnotation)> = record
            .parts
            .iter()
            .map(|p| {
                let v = self
                    .vocabulary()
                    .iter()
                    .position(|n| *n == p.name)
                    .expect("validated vocabulary");
                (v, p)
            })
            .collect();
        indexed.sort_by_key(|(v, _)| *v);
        if indexed.is_empty() {
            return Err(Error::InvalidPart(format!(
                "sample '{}' has no annotated parts",
                record.id
            )));
        }
        Ok(SampleParts {
            vocab_index: indexed.iter().map(|(v, _)| *v).collect(),
            parts: PartSet::new(indexed.into_iter().map(|(_, p)| p.clone()).collect())?,
        })
    }
}

fn has_duplicates(names: &[String]) -> bool {
    let mut seen = HashSet::new();
    names.iter().any(|n| !seen.insert(n))
}
