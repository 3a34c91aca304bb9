//! Synthetic part datasets with a known ground truth.
//!
//! Every image is a grid of part cells on a flat background. A present part
//! is random texture inside its box; an absent part is plain background.
//! Class `c` owns one discriminative part that is present in all of its
//! samples and absent from every other class; the remaining (neutral) parts
//! are present at random. The matched additive model gives the
//! discriminative part a large weight for its class and the neutral parts
//! small ones, so each class histogram is one-hot on its own part.

use std::fs;
use std::path::Path;

use partshap::dataset::{Manifest, ManifestHeader, ManifestRecord};
use partshap::masking::{PartAnnotation, PartBox, PartSet};
use partshap::raster::RasterImage;
use partshap::value_fn::AdditiveToyModel;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::games::{grid_box, grid_size};
use crate::TestkitError;

pub const MAX_SYNTHETIC_PARTS: usize = 8;
pub const BACKGROUND: u8 = 40;
/// Weight of a class's discriminative part.
pub const DISCRIMINATIVE_WEIGHT: f64 = 3.0;
/// Neutral weights are drawn from `[-NEUTRAL_WEIGHT, NEUTRAL_WEIGHT]`.
pub const NEUTRAL_WEIGHT: f64 = 0.2;
/// Presence threshold for the matched model; tolerant of a few pixels of
/// box jitter.
pub const MATCHED_THRESHOLD: f64 = 0.5;

const PART_NAMES: [&str; 7] = ["hair", "eye", "nose", "mouth", "ear", "neck", "hand"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub parts: usize,
    pub classes: usize,
    pub per_class: usize,
    /// Chance that a neutral part is drawn.
    pub neutral_presence: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            parts: 4,
            classes: 2,
            per_class: 10,
            neutral_presence: 0.75,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: SyntheticConfig,
    /// Manifest with image paths relative to the dataset directory.
    pub manifest: Manifest,
    pub images: Vec<RasterImage>,
    pub layout: PartSet,
    /// Discriminative part of each class.
    pub discriminative: Vec<usize>,
    /// `weights[k][c]` of the matched model.
    pub weights: Vec<Vec<f64>>,
}

/// Part names for a vocabulary of `k` parts; the last one is always "foot".
pub fn part_names(k: usize) -> Vec<String> {
    PART_NAMES[..k - 1]
        .iter()
        .map(|s| s.to_string())
        .chain(std::iter::once("foot".to_string()))
        .collect()
}

pub fn class_names(c: usize) -> Vec<String> {
    if c == 2 {
        vec!["female".into(), "male".into()]
    } else {
        (0..c).map(|i| format!("class{i}")).collect()
    }
}

/// Spreads the discriminative parts of `classes` classes over `parts` parts:
/// the first class gets part 0 and the last class the last part.
pub fn discriminative_parts(parts: usize, classes: usize) -> Vec<usize> {
    (0..classes)
        .map(|c| c * (parts - 1) / (classes - 1))
        .collect()
}

pub fn make_synthetic_dataset(config: SyntheticConfig) -> Result<SyntheticDataset, TestkitError> {
    let SyntheticConfig {
        seed,
        parts: k,
        classes: c,
        per_class,
        neutral_presence,
    } = config;
    if !(2..=MAX_SYNTHETIC_PARTS).contains(&k) {
        return Err(TestkitError::Config(format!(
            "parts must be in 2..=8, got {k}"
        )));
    }
    if c < 2 || c > k {
        return Err(TestkitError::Config(format!(
            "classes must be in 2..={k}, got {c}"
        )));
    }
    if !(0.0..=1.0).contains(&neutral_presence) {
        return Err(TestkitError::Config(
            "neutral_presence must be in [0, 1]".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = part_names(k);
    let layout = PartSet::new(
        names
            .iter()
            .enumerate()
            .map(|(i, n)| PartAnnotation::new(n.clone(), grid_box(i)))
            .collect(),
    )
    .expect("distinct names");
    let discriminative = discriminative_parts(k, c);
    let weights: Vec<Vec<f64>> = (0..k)
        .map(|part| {
            (0..c)
                .map(
                    |class| match discriminative.iter().position(|&d| d == part) {
                        Some(owner) if owner == class => DISCRIMINATIVE_WEIGHT,
                        Some(_) => 0.0,
                        None => rng.random_range(-NEUTRAL_WEIGHT..=NEUTRAL_WEIGHT),
                    },
                )
                .collect()
        })
        .collect();

    let classes = class_names(c);
    let (width, height) = grid_size(k);
    let mut records = Vec::with_capacity(c * per_class);
    let mut images = Vec::with_capacity(c * per_class);
    for i in 0..per_class {
        for (class, label) in classes.iter().enumerate() {
            let present: Vec<bool> = (0..k)
                .map(
                    |part| match discriminative.iter().position(|&d| d == part) {
                        Some(owner) => owner == class,
                        None => rng.random_bool(neutral_presence),
                    },
                )
                .collect();
            let mut img = RasterImage::filled(width, height, &[BACKGROUND; 3]).expect("valid size");
            for (part, on) in present.iter().enumerate() {
                if *on {
                    paint_texture(&mut img, &layout.get(part).expect("part").bbox, &mut rng);
                }
            }
            let id = format!("s{:04}", i * c + class);
            records.push(ManifestRecord {
                image: format!("images/{id}.png"),
                id,
                label: label.clone(),
                parts: layout.iter().cloned().collect(),
            });
            images.push(img);
        }
    }
    let manifest = Manifest::new(
        ManifestHeader {
            classes,
            part_vocabulary: names,
        },
        records,
        "",
    )
    .map_err(|e| TestkitError::Config(e.to_string()))?;
    Ok(SyntheticDataset {
        config,
        manifest,
        images,
        layout,
        discriminative,
        weights,
    })
}

fn paint_texture(img: &mut RasterImage, bbox: &PartBox, rng: &mut ChaCha8Rng) {
    for y in bbox.y_min..bbox.y_max {
        for x in bbox.x_min..bbox.x_max {
            let px = [
                rng.random_range(90..=250),
                rng.random_range(90..=250),
                rng.random_range(90..=250),
            ];
            img.set_pixel(x, y, &px);
        }
    }
}

impl SyntheticDataset {
    pub fn matched_model(&self) -> AdditiveToyModel {
        AdditiveToyModel::new(
            self.layout.clone(),
            self.manifest.classes().to_vec(),
            self.weights.clone(),
            vec![0.0; self.config.classes],
            MATCHED_THRESHOLD,
        )
        .expect("consistent model")
    }

    /// Writes `manifest.jsonl` and `images/*.png` under `dir` and returns the
    /// manifest rooted there. Regenerating with the same config writes the
    /// same bytes.
    pub fn write_to(&self, dir: &Path) -> Result<Manifest, TestkitError> {
        fs::create_dir_all(dir.join("images"))?;
        for (record, img) in self.manifest.records.iter().zip(&self.images) {
            img.save_png(&dir.join(&record.image))
                .map_err(|e| TestkitError::Config(e.to_string()))?;
        }
        self.write_manifest(&self.manifest, dir, "manifest.jsonl")
    }

    /// Writes another manifest over the same images, e.g. a jittered one.
    pub fn write_manifest(
        &self,
        manifest: &Manifest,
        dir: &Path,
        name: &str,
    ) -> Result<Manifest, TestkitError> {
        let path = dir.join(name);
        fs::write(&path, manifest.to_jsonl())?;
        Manifest::load(&path).map_err(|e| TestkitError::Config(e.to_string()))
    }

    /// Copy of the manifest with every box translated by up to `px` pixels
    /// in each direction, staying inside the image.
    pub fn jittered_manifest(&self, px: u32, seed: u64) -> Manifest {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (width, height) = grid_size(self.config.parts);
        let px = px as i64;
        let mut records = self.manifest.records.clone();
        for record in &mut records {
            for part in &mut record.parts {
                let b = part.bbox;
                let dx = rng.random_range(-px..=px);
                let dy = rng.random_range(-px..=px);
                let dx = dx.clamp(-(b.x_min as i64), (width - b.x_max) as i64);
                let dy = dy.clamp(-(b.y_min as i64), (height - b.y_max) as i64);
                part.bbox = PartBox::new(
                    (b.x_min as i64 + dx) as u32,
                    (b.y_min as i64 + dy) as u32,
                    (b.x_max as i64 + dx) as u32,
                    (b.y_max as i64 + dy) as u32,
                );
            }
        }
        Manifest::new(
            self.manifest.header.clone(),
            records,
            self.manifest.base_dir(),
        )
        .expect("jitter keeps the manifest valid")
    }
}
