//! Part annotations and the coalition image set.
//!
//! Every excluded part has its whole box painted with the per-channel mean
//! of the original image. Boxes of excluded parts are painted even where
//! they overlap an included part, and everything outside the annotated boxes
//! is left untouched.

use serde::{Deserialize, Serialize};

use crate::coalition::{Coalition, CoalitionSpace, MAX_WIDTH};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Axis-aligned box, inclusive on the min edge and exclusive on the max edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct PartBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl PartBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> u32 {
        self.x_max.saturating_sub(self.x_min)
    }

    pub fn height(&self) -> u32 {
        self.y_max.saturating_sub(self.y_min)
    }

    pub fn area(&self) -> usize {
        self.width() as usize * self.height() as usize
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    pub fn fits(&self, width: u32, height: u32) -> bool {
        self.x_min < self.x_max
            && self.y_min < self.y_max
            && self.x_max <= width
            && self.y_max <= height
    }
}

impl From<[u32; 4]> for PartBox {
    fn from(v: [u32; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<PartBox> for [u32; 4] {
    fn from(b: PartBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartAnnotation {
    pub name: String,
    #[serde(rename = "box")]
    pub bbox: PartBox,
}

impl PartAnnotation {
    pub fn new(name: impl Into<String>, bbox: PartBox) -> Self {
        Self {
            name: name.into(),
            bbox,
        }
    }
}

/// Ordered parts of one sample. Position in the list is the coalition bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct PartSet {
    parts: Vec<PartAnnotation>,
}

impl PartSet {
    pub fn new(parts: Vec<PartAnnotation>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidPart(
                "a part set needs at least one part".into(),
            ));
        }
        for (i, p) in parts.iter().enumerate() {
            if p.name.is_empty() {
                return Err(Error::InvalidPart(format!("part {i} has an empty name")));
            }
            if parts[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidPart(format!(
                    "duplicate part name '{}'",
                    p.name
                )));
            }
        }
        Ok(Self { parts })
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&PartAnnotation> {
        self.parts.get(index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PartAnnotation> {
        self.parts.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.parts.iter().map(|p| p.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.parts.iter().position(|p| p.name == name)
    }

    /// Reports the first part whose box does not fit a `width`x`height` image.
    pub fn check_bounds(&self, width: u32, height: u32) -> Result<()> {
        match self.parts.iter().find(|p| !p.bbox.fits(width, height)) {
            Some(p) => Err(Error::BoxOutOfBounds {
                part: p.name.clone(),
                width,
                height,
            }),
            None => Ok(()),
        }
    }
}

impl<'de> Deserialize<'de> for PartSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let parts = Vec::<PartAnnotation>::deserialize(d)?;
        PartSet::new(parts).map_err(serde::de::Error::custom)
    }
}

impl<'a> IntoIterator for &'a PartSet {
    type Item = &'a PartAnnotation;
    type IntoIter = std::slice::Iter<'a, PartAnnotation>;

    fn into_iter(self) -> Self::IntoIter {
        self.parts.iter()
    }
}

/// Per-channel mean over all pixels, rounded half-up.
pub fn compute_fill_value(img: &RasterImage) -> Result<Vec<u8>> {
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    let channels = img.channels();
    let mut sums = vec![0u64; channels];
    for px in img.pixels().chunks_exact(channels) {
        for (s, &v) in sums.iter_mut().zip(px) {
            *s += v as u64;
        }
    }
    let n = img.pixel_count() as u64;
    Ok(sums
        .into_iter()
        .map(|s| ((2 * s + n) / (2 * n)) as u8)
        .collect())
}

/// The `2^K` masked variants of one image, rendered on demand.
#[derive(Debug, Clone)]
pub struct CoalitionImageSet {
    base: RasterImage,
    parts: PartSet,
    fill: Vec<u8>,
}

impl CoalitionImageSet {
    pub fn base(&self) -> &RasterImage {
        &self.base
    }

    pub fn parts(&self) -> &PartSet {
        &self.parts
    }

    pub fn fill_value(&self) -> &[u8] {
        &self.fill
    }

    /// Power set for exact enumeration; fails beyond the exact part cap.
    pub fn space(&self) -> Result<CoalitionSpace> {
        CoalitionSpace::new(self.parts.len())
    }

    pub fn full(&self) -> Coalition {
        Coalition::full(self.parts.len()).expect("validated width")
    }

    pub fn empty(&self) -> Coalition {
        Coalition::empty(self.parts.len()).expect("validated width")
    }

    pub fn render(&self, coalition: Coalition) -> Result<RasterImage> {
        if coalition.parts() != self.parts.len() {
            return Err(Error::InvalidCoalition {
                bits: coalition.bits(),
                parts: self.parts.len(),
            });
        }
        let mut out = self.base.clone();
        for (k, part) in self.parts.iter().enumerate() {
            if !coalition.contains(k) {
                paint_box(&mut out, &part.bbox, &self.fill);
            }
        }
        Ok(out)
    }
}

/// Builds the coalition image set for `img` annotated with `parts`.
pub fn generate_set(img: RasterImage, parts: PartSet) -> Result<CoalitionImageSet> {
    if parts.len() > MAX_WIDTH {
        return Err(Error::PartCountOutOfRange(parts.len()));
    }
    parts.check_bounds(img.width(), img.height())?;
    let fill = compute_fill_value(&img)?;
    Ok(CoalitionImageSet {
        base: img,
        parts,
        fill,
    })
}

fn paint_box(img: &mut RasterImage, bbox: &PartBox, fill: &[u8]) {
    for y in bbox.y_min..bbox.y_max {
        for px in img
            .row_span_mut(y, bbox.x_min, bbox.x_max)
            .chunks_exact_mut(fill.len())
        {
            px.copy_from_slice(fill);
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn gray(w: u32, h: u32, px: Vec<u8>) -> RasterImage {
        RasterImage::new(w, h, 1, px).unwrap()
    }

    fn noise(w: u32, h: u32, channels: u8, seed: u32) -> RasterImage {
        let mut state = seed.wrapping_mul(2654435761).wrapping_add(1);
        let px = (0..w * h * channels as u32)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 17;
                state ^= state << 5;
                (state >> 8) as u8
            })
            .collect();
        RasterImage::new(w, h, channels, px).unwrap()
    }

    fn three_parts() -> PartSet {
        PartSet::new(vec![
            PartAnnotation::new("hair", PartBox::new(2, 0, 10, 3)),
            PartAnnotation::new("eye", PartBox::new(3, 4, 9, 6)),
            PartAnnotation::new("nose", PartBox::new(5, 7, 7, 10)),
        ])
        .unwrap()
    }

    #[test]
    fn fill_value_rounds_half_up() {
        assert_eq!(
            compute_fill_value(&gray(2, 1, vec![0, 255])).unwrap(),
            vec![128]
        );
        assert_eq!(
            compute_fill_value(&gray(3, 1, vec![77; 3])).unwrap(),
            vec![77]
        );
        assert_eq!(
            compute_fill_value(&gray(2, 2, vec![10, 20, 30, 40])).unwrap(),
            vec![25]
        );
        let rgb = RasterImage::new(2, 1, 3, vec![0, 10, 255, 1, 20, 254]).unwrap();
        assert_eq!(compute_fill_value(&rgb).unwrap(), vec![1, 15, 255]);
        let empty = RasterImage::new(0, 0, 1, vec![]).unwrap();
        assert!(matches!(compute_fill_value(&empty), Err(Error::EmptyImage)));
    }

    #[test]
    fn full_coalition_is_identity_and_empty_masks_everything() {
        let img = noise(12, 12, 3, 7);
        let set = generate_set(img.clone(), three_parts()).unwrap();
        assert_eq!(set.space().unwrap().len(), 8);
        assert_eq!(set.render(set.full()).unwrap(), img);

        let whole =
            PartSet::new(vec![PartAnnotation::new("all", PartBox::new(0, 0, 12, 12))]).unwrap();
        let set = generate_set(img.clone(), whole).unwrap();
        assert_eq!(set.space().unwrap().len(), 2);
        let masked = set.render(set.empty()).unwrap();
        let fill = compute_fill_value(&img).unwrap();
        assert_eq!(masked, RasterImage::filled(12, 12, &fill).unwrap());
    }

    #[test]
    fn one_zero_one_masks_only_the_eye() {
        let img = noise(12, 12, 1, 3);
        let set = generate_set(img.clone(), three_parts()).unwrap();
        let c = Coalition::from_presence_string("101").unwrap();
        let out = set.render(c).unwrap();
        let eye = three_parts().get(1).unwrap().bbox;
        for y in 0..12 {
            for x in 0..12 {
                if eye.contains(x, y) {
                    assert_eq!(out.pixel(x, y), set.fill_value());
                } else {
                    assert_eq!(out.pixel(x, y), img.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn excluded_box_wins_over_included_overlap() {
        let img = noise(10, 10, 1, 11);
        let parts = PartSet::new(vec![
            PartAnnotation::new("face", PartBox::new(0, 0, 8, 8)),
            PartAnnotation::new("eye", PartBox::new(2, 2, 4, 4)),
        ])
        .unwrap();
        let set = generate_set(img.clone(), parts).unwrap();
        // face excluded, eye included: the eye region lies inside the face box
        let out = set
            .render(Coalition::from_members(&[1], 2).unwrap())
            .unwrap();
        assert_eq!(out.pixel(3, 3), set.fill_value());
        assert_eq!(out.pixel(9, 9), img.pixel(9, 9));
    }

    #[test]
    fn reports_offending_box() {
        let parts = PartSet::new(vec![
            PartAnnotation::new("hair", PartBox::new(0, 0, 4, 4)),
            PartAnnotation::new("foot", PartBox::new(2, 2, 11, 4)),
        ])
        .unwrap();
        match generate_set(noise(10, 10, 1, 1), parts) {
            Err(Error::BoxOutOfBounds { part, .. }) => assert_eq!(part, "foot"),
            other => panic!("unexpected {other:?}"),
        }
        let degenerate =
            PartSet::new(vec![PartAnnotation::new("x", PartBox::new(3, 3, 3, 5))]).unwrap();
        assert!(generate_set(noise(10, 10, 1, 1), degenerate).is_err());
    }

    #[test]
    fn rejects_wrong_width_coalition() {
        let set = generate_set(noise(12, 12, 1, 2), three_parts()).unwrap();
        assert!(set.render(Coalition::full(2).unwrap()).is_err());
    }

    #[test]
    fn part_set_validation() {
        assert!(PartSet::new(vec![]).is_err());
        let b = PartBox::new(0, 0, 1, 1);
        assert!(PartSet::new(vec![
            PartAnnotation::new("a", b),
            PartAnnotation::new("a", b)
        ])
        .is_err());
        assert!(PartSet::new(vec![PartAnnotation::new("", b)]).is_err());
        let json = r#"[{"name":"hair","box":[1,2,3,4]}]"#;
        let parsed: PartSet = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.get(0).unwrap().bbox, PartBox::new(1, 2, 3, 4));
        assert_eq!(serde_json::to_string(&parsed).unwrap(), json);
    }

    fn arb_box(w: u32, h: u32) -> impl Strategy<Value = PartBox> {
        (0..w, 0..h).prop_flat_map(move |(x0, y0)| {
            (x0 + 1..=w, y0 + 1..=h).prop_map(move |(x1, y1)| PartBox::new(x0, y0, x1, y1))
        })
    }

    proptest! {
        #[test]
        fn pixels_outside_excluded_boxes_are_untouched(
            boxes in prop::collection::vec(arb_box(16, 12), 1..6),
            bits in any::<u64>(),
            seed in any::<u32>(),
            channels in prop::sample::select(vec![1u8, 3]),
        ) {
            let img = noise(16, 12, channels, seed);
            let parts = PartSet::new(
                boxes.iter().enumerate().map(|(i, b)| PartAnnotation::new(format!("p{i}"), *b)).collect(),
            ).unwrap();
            let k = parts.len();
            let c = Coalition::new(bits & ((1 << k) - 1), k).unwrap();
            let set = generate_set(img.clone(), parts).unwrap();
            let out = set.render(c).unwrap();
            prop_assert_eq!(&out, &set.render(c).unwrap());
            for y in 0..12 {
                for x in 0..16 {
                    let masked = boxes.iter().enumerate().any(|(i, b)| !c.contains(i) && b.contains(x, y));
                    if masked {
                        prop_assert_eq!(out.pixel(x, y), set.fill_value());
                    } else {
                        prop_assert_eq!(out.pixel(x, y), img.pixel(x, y));
                    }
                }
            }
        }
    }
}
