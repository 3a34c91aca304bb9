//! Part-level Shapley explanations for black-box image classifiers.
//!
//! An image annotated with K named part boxes is rendered in all `2^K`
//! combinations of present and masked parts. The classifier's logits on
//! those renders define a cooperative game whose Shapley values measure how
//! much each part contributes to the decision. Per-sample results roll up
//! into class-level and task-level histograms of top-contributing parts.
//!
//! ```no_run
//! use partshap::masking::{PartAnnotation, PartBox, PartSet};
//! use partshap::raster::RasterImage;
//! use partshap::shapley::{explain_sample, select_target, TargetMode};
//! use partshap::value_fn::{ModelOptions, ModelRegistry};
//!
//! # fn main() -> partshap::Result<()> {
//! let model = ModelRegistry::default().open("toy:additive:model.json", &ModelOptions::default())?;
//! let img = RasterImage::load("drawing.png".as_ref())?;
//! let parts = PartSet::new(vec![
//!     PartAnnotation::new("hair", PartBox::new(10, 0, 50, 12)),
//!     PartAnnotation::new("foot", PartBox::new(20, 50, 40, 64)),
//! ])?;
//! let matrix = explain_sample(model.as_ref(), img, parts)?;
//! let sample = select_target(&matrix, TargetMode::Predicted)?;
//! println!("top part: {}", matrix.part_names[sample.argmax_part]);
//! # Ok(())
//! # }
//! ```

pub mod aggregation;
pub mod coalition;
pub mod dataset;
pub mod error;
pub mod explain;
pub mod masking;
pub mod raster;
pub mod sanity;
pub mod shapley;
pub mod value_fn;

pub use error::{Error, ErrorKind, Result};
