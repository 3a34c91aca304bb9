//! Analytic models that read part presence back from pixels.
//!
//! A masked part's box is flat: every pixel carries the same fill colour.
//! The detector calls a part absent when a single colour covers at least
//! `threshold` of its box, which also tolerates small overlaps with the
//! masks of neighbouring parts.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::Deserialize;

use super::{LogitVector, ValueFunction};
use crate::coalition::{Coalition, CoalitionSpace};
use crate::error::{Error, Result};
use crate::masking::PartSet;
use crate::raster::RasterImage;

pub const DEFAULT_PRESENCE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct PresenceDetector {
    parts: PartSet,
    threshold: f64,
}

impl PresenceDetector {
    pub fn new(parts: PartSet, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::ModelConfig(format!(
                "presence threshold {threshold} must lie in (0, 1]"
            )));
        }
        Ok(Self { parts, threshold })
    }

    pub fn parts(&self) -> &PartSet {
        &self.parts
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_present(&self, img: &RasterImage, part: usize) -> bool {
        let bbox = self.parts.get(part).expect("part index").bbox;
        if !bbox.fits(img.width(), img.height()) {
            return false;
        }
        let c = img.channels();
        let mut counts: HashMap<&[u8], usize> = HashMap::new();
        for y in bbox.y_min..bbox.y_max {
            for px in img.row_span(y, bbox.x_min, bbox.x_max).chunks_exact(c) {
                *counts.entry(px).or_default() += 1;
            }
        }
        let modal = counts.values().copied().max().unwrap_or(0);
        (modal as f64) < self.threshold * bbox.area() as f64
    }

    /// Coalition of parts that look present in `img`.
    pub fn decode(&self, img: &RasterImage) -> Coalition {
        let members: Vec<usize> = (0..self.parts.len())
            .filter(|&k| self.is_present(img, k))
            .collect();
        Coalition::from_members(&members, self.parts.len()).expect("valid part count")
    }
}

/// `logit[c] = bias[c] + Σ_{k present} weights[k][c]`.
#[derive(Debug, Clone)]
pub struct AdditiveToyModel {
    detector: PresenceDetector,
    class_names: Vec<String>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdditiveConfig {
    classes: Vec<String>,
    parts: PartSet,
    weights: Vec<Vec<f64>>,
    bias: Option<Vec<f64>>,
    threshold: Option<f64>,
}

impl AdditiveToyModel {
    pub fn new(
        parts: PartSet,
        class_names: Vec<String>,
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
        threshold: f64,
    ) -> Result<Self> {
        let c = class_names.len();
        if c < 2 {
            return Err(Error::ModelConfig(
                "at least two classes are required".into(),
            ));
        }
        if weights.len() != parts.len() {
            return Err(Error::ModelConfig(format!(
                "{} weight rows for {} parts",
                weights.len(),
                parts.len()
            )));
        }
        if weights.iter().any(|row| row.len() != c) || bias.len() != c {
            return Err(Error::ModelConfig(format!(
                "weights and bias need {c} columns"
            )));
        }
        if weights
            .iter()
            .flatten()
            .chain(&bias)
            .any(|v| !v.is_finite())
        {
            return Err(Error::ModelConfig("weights must be finite".into()));
        }
        Ok(Self {
            detector: PresenceDetector::new(parts, threshold)?,
            class_names,
            weights,
            bias,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: AdditiveConfig =
            serde_json::from_str(text).map_err(|e| Error::ModelConfig(e.to_string()))?;
        let bias = cfg.bias.unwrap_or_else(|| vec![0.0; cfg.classes.len()]);
        Self::new(
            cfg.parts,
            cfg.classes,
            cfg.weights,
            bias,
            cfg.threshold.unwrap_or(DEFAULT_PRESENCE_THRESHOLD),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "classes": self.class_names,
            "parts": self.detector.parts(),
            "weights": self.weights,
            "bias": self.bias,
            "threshold": self.detector.threshold(),
        })
    }

    pub fn parts(&self) -> &PartSet {
        self.detector.parts()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Logits the model returns for an image showing exactly `coalition`.
    pub fn logits_for(&self, coalition: Coalition) -> Vec<f64> {
        let mut out = self.bias.clone();
        for k in coalition.members() {
            for (o, w) in out.iter_mut().zip(&self.weights[k]) {
                *o += w;
            }
        }
        out
    }
}

impl ValueFunction for AdditiveToyModel {
    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn evaluate(&self, img: &RasterImage) -> Result<LogitVector> {
        LogitVector::new(self.logits_for(self.detector.decode(img)))
    }
}

/// Arbitrary game: one logit vector per coalition.
#[derive(Debug, Clone)]
pub struct TableToyModel {
    detector: PresenceDetector,
    class_names: Vec<String>,
    table: Vec<LogitVector>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableConfig {
    classes: Vec<String>,
    parts: PartSet,
    table: BTreeMap<String, LogitVector>,
    threshold: Option<f64>,
}

impl TableToyModel {
    /// `table[bits]` holds the logits of the coalition with that bit pattern.
    pub fn new(
        parts: PartSet,
        class_names: Vec<String>,
        table: Vec<LogitVector>,
        threshold: f64,
    ) -> Result<Self> {
        let space = CoalitionSpace::new(parts.len())?;
        if table.len() != space.len() {
            return Err(Error::ModelConfig(format!(
                "table has {} entries, {} coalitions expected",
                table.len(),
                space.len()
            )));
        }
        if class_names.len() < 2 {
            return Err(Error::ModelConfig(
                "at least two classes are required".into(),
            ));
        }
        if let Some(bad) = table.iter().find(|v| v.len() != class_names.len()) {
            return Err(Error::ModelConfig(format!(
                "table entry has {} logits, {} expected",
                bad.len(),
                class_names.len()
            )));
        }
        Ok(Self {
            detector: PresenceDetector::new(parts, threshold)?,
            class_names,
            table,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TableConfig =
            serde_json::from_str(text).map_err(|e| Error::ModelConfig(e.to_string()))?;
        let k = cfg.parts.len();
        let mut slots: Vec<Option<LogitVector>> = vec![None; CoalitionSpace::new(k)?.len()];
        for (key, logits) in cfg.table {
            let c = Coalition::from_presence_string(&key)
                .ok()
                .filter(|c| c.parts() == k)
                .ok_or_else(|| Error::ModelConfig(format!("bad coalition key '{key}'")))?;
            slots[c.index()] = Some(logits);
        }
        let table = slots
            .into_iter()
            .enumerate()
            .map(|(bits, v)| {
                v.ok_or_else(|| {
                    let c = Coalition::new(bits as u64, k).expect("in range");
                    Error::ModelConfig(format!("table is missing coalition {c}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            cfg.parts,
            cfg.classes,
            table,
            cfg.threshold.unwrap_or(DEFAULT_PRESENCE_THRESHOLD),
        )
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let k = self.detector.parts().len();
        let table: BTreeMap<String, &LogitVector> = self
            .table
            .iter()
            .enumerate()
            .map(|(bits, v)| {
                let c = Coalition::new(bits as u64, k).expect("in range");
                (c.to_presence_string(), v)
            })
            .collect();
        serde_json::json!({
            "classes": self.class_names,
            "parts": self.detector.parts(),
            "table": table,
            "threshold": self.detector.threshold(),
        })
    }

    pub fn parts(&self) -> &PartSet {
        self.detector.parts()
    }

    pub fn lookup(&self, coalition: Coalition) -> &LogitVector {
        &self.table[coalition.index()]
    }
}

impl ValueFunction for TableToyModel {
    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn evaluate(&self, img: &RasterImage) -> Result<LogitVector> {
        Ok(self.lookup(self.detector.decode(img)).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::{generate_set, PartAnnotation, PartBox};

    fn textured(w: u32, h: u32) -> RasterImage {
        let px = (0..w * h).map(|i| (i * 37 % 251) as u8).collect();
        RasterImage::new(w, h, 1, px).unwrap()
    }

    fn parts(k: usize) -> PartSet {
        PartSet::new(
            (0..k)
                .map(|i| {
                    let x = (i as u32 % 4) * 8 + 1;
                    let y = (i as u32 / 4) * 8 + 1;
                    PartAnnotation::new(format!("p{i}"), PartBox::new(x, y, x + 6, y + 6))
                })
                .collect(),
        )
        .unwrap()
    }

    fn classes() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn detector_recovers_every_coalition() {
        let set = generate_set(textured(32, 16), parts(5)).unwrap();
        let det = PresenceDetector::new(parts(5), DEFAULT_PRESENCE_THRESHOLD).unwrap();
        for c in set.space().unwrap().coalitions() {
            assert_eq!(det.decode(&set.render(c).unwrap()), c);
        }
    }

    #[test]
    fn additive_model_full_and_empty() {
        let model = AdditiveToyModel::new(
            parts(2),
            classes(),
            vec![vec![2.0, -2.0], vec![1.0, -1.0]],
            vec![0.5, 0.25],
            DEFAULT_PRESENCE_THRESHOLD,
        )
        .unwrap();
        let set = generate_set(textured(32, 16), parts(2)).unwrap();
        let full = model.evaluate(&set.render(set.full()).unwrap()).unwrap();
        assert_eq!(full.values(), &[3.5, -2.75]);
        let empty = model.evaluate(&set.render(set.empty()).unwrap()).unwrap();
        assert_eq!(empty.values(), &[0.5, 0.25]);
    }

    #[test]
    fn table_model_looks_up_coalition() {
        let table: Vec<LogitVector> = (0..8)
            .map(|i| LogitVector::new(vec![i as f64, -(i as f64)]).unwrap())
            .collect();
        let model =
            TableToyModel::new(parts(3), classes(), table, DEFAULT_PRESENCE_THRESHOLD).unwrap();
        let set = generate_set(textured(32, 16), parts(3)).unwrap();
        let c = Coalition::from_presence_string("101").unwrap();
        let out = model.evaluate(&set.render(c).unwrap()).unwrap();
        assert_eq!(out.values(), &[5.0, -5.0]);
    }

    #[test]
    fn configs_round_trip_through_json() {
        let additive = AdditiveToyModel::new(
            parts(2),
            classes(),
            vec![vec![2.0, -2.0], vec![1.0, -1.0]],
            vec![0.0, 0.0],
            0.5,
        )
        .unwrap();
        let again = AdditiveToyModel::from_json(&additive.to_json().to_string()).unwrap();
        assert_eq!(again.weights(), additive.weights());

        let table: Vec<LogitVector> = (0..4)
            .map(|i| LogitVector::new(vec![i as f64 * 0.1, 1.0]).unwrap())
            .collect();
        let model = TableToyModel::new(parts(2), classes(), table, 0.9).unwrap();
        let again = TableToyModel::from_json(&model.to_json().to_string()).unwrap();
        let c = Coalition::from_presence_string("01").unwrap();
        assert_eq!(again.lookup(c), model.lookup(c));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(AdditiveToyModel::new(
            parts(2),
            classes(),
            vec![vec![1.0, 1.0]],
            vec![0.0; 2],
            0.9
        )
        .is_err());
        assert!(AdditiveToyModel::new(
            parts(1),
            vec!["only".into()],
            vec![vec![1.0]],
            vec![0.0],
            0.9
        )
        .is_err());
        assert!(PresenceDetector::new(parts(1), 0.0).is_err());
        let missing = r#"{"classes":["a","b"],"parts":[{"name":"p","box":[0,0,1,1]}],
            "table":{"1":[0,0]}}"#;
        assert!(TableToyModel::from_json(missing).is_err());
        let non_finite_free = r#"{"classes":["a","b"],"parts":[{"name":"p","box":[0,0,1,1]}],
            "table":{"0":[0,0],"1":[1,2]}}"#;
        assert!(TableToyModel::from_json(non_finite_free).is_ok());
    }
}
