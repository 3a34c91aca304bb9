//! 8-bit grayscale and RGB rasters, with PNG and binary PNM ingestion.

use std::io::Cursor;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};

/// Row-major interleaved 8-bit raster with 1 or 3 channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: u8,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: u8, pixels: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "unsupported channel count {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if pixels.len() != expected {
            return Err(Error::InvalidImage(format!(
                "buffer holds {} samples, {width}x{height}x{channels} needs {expected}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// Image filled with one colour. `value.len()` selects the channel count.
    pub fn filled(width: u32, height: u32, value: &[u8]) -> Result<Self> {
        let pixels = value
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * value.len())
            .collect();
        Self::new(width, height, value.len() as u8, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels as usize
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels()
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let at = self.offset(x, y);
        &self.pixels[at..at + self.channels()]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, value: &[u8]) {
        let at = self.offset(x, y);
        let c = self.channels();
        self.pixels[at..at + c].copy_from_slice(value);
    }

    /// Row slice covering columns `x0..x1` of row `y`.
    pub(crate) fn row_span_mut(&mut self, y: u32, x0: u32, x1: u32) -> &mut [u8] {
        let start = self.offset(x0, y);
        let end = self.offset(x1, y);
        &mut self.pixels[start..end]
    }

    pub(crate) fn row_span(&self, y: u32, x0: u32, x1: u32) -> &[u8] {
        &self.pixels[self.offset(x0, y)..self.offset(x1, y)]
    }

    /// Decodes PNG or binary PGM/PPM bytes. Other containers, alpha channels
    /// and 16-bit samples are rejected.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let reader = ImageReader::new(Cursor::new(bytes))
            .with_guessed_format()
            .map_err(|e| Error::InvalidImage(e.to_string()))?;
        match reader.format() {
            Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
            Some(other) => {
                return Err(Error::UnsupportedImageFormat(format!("{other:?}")));
            }
            None => return Err(Error::UnsupportedImageFormat("unrecognised".into())),
        }
        let decoded = reader
            .decode()
            .map_err(|e| Error::InvalidImage(e.to_string()))?;
        Self::from_dynamic(decoded)
    }

    fn from_dynamic(img: DynamicImage) -> Result<Self> {
        let (width, height) = (img.width(), img.height());
        match img.color() {
            ColorType::L8 => Self::new(width, height, 1, img.into_luma8().into_raw()),
            ColorType::Rgb8 => Self::new(width, height, 3, img.into_rgb8().into_raw()),
            other => Err(Error::UnsupportedImageFormat(format!(
                "pixel layout {other:?} (only 8-bit gray and RGB are accepted)"
            ))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes).map_err(|e| match e {
            Error::InvalidImage(m) => Error::InvalidImage(format!("{}: {m}", path.display())),
            Error::UnsupportedImageFormat(m) => {
                Error::UnsupportedImageFormat(format!("{}: {m}", path.display()))
            }
            other => other,
        })
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let color = if self.channels == 1 {
            image::ExtendedColorType::L8
        } else {
            image::ExtendedColorType::Rgb8
        };
        let mut out = Vec::new();
        image::write_buffer_with_format(
            &mut Cursor::new(&mut out),
            &self.pixels,
            self.width,
            self.height,
            color,
            ImageFormat::Png,
        )
        .map_err(|e| Error::InvalidImage(e.to_string()))?;
        Ok(out)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes = self.encode_png()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Binary PGM (P5) or PPM (P6) encoding.
    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(channels: u8) -> RasterImage {
        let (w, h) = (5u32, 4u32);
        let pixels = (0..w * h * channels as u32)
            .map(|i| (i * 7 % 256) as u8)
            .collect();
        RasterImage::new(w, h, channels, pixels).unwrap()
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(RasterImage::new(2, 2, 1, vec![0; 3]).is_err());
        assert!(RasterImage::new(2, 2, 4, vec![0; 16]).is_err());
    }

    #[test]
    fn png_round_trip_is_lossless() {
        for c in [1, 3] {
            let img = gradient(c);
            let back = RasterImage::decode(&img.encode_png().unwrap()).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn pnm_decodes() {
        for c in [1, 3] {
            let img = gradient(c);
            assert_eq!(RasterImage::decode(&img.encode_pnm()).unwrap(), img);
        }
    }

    #[test]
    fn rejects_unknown_and_alpha_formats() {
        assert!(matches!(
            RasterImage::decode(b"not an image at all"),
            Err(Error::UnsupportedImageFormat(_))
        ));
        // JPEG magic bytes are recognised and refused before decoding.
        assert!(matches!(
            RasterImage::decode(&[0xFF, 0xD8, 0xFF, 0xE0, 0, 0x10, b'J', b'F', b'I', b'F', 0]),
            Err(Error::UnsupportedImageFormat(_))
        ));
        let mut rgba = Vec::new();
        image::write_buffer_with_format(
            &mut Cursor::new(&mut rgba),
            &[1, 2, 3, 4],
            1,
            1,
            image::ExtendedColorType::Rgba8,
            ImageFormat::Png,
        )
        .unwrap();
        assert!(matches!(
            RasterImage::decode(&rgba),
            Err(Error::UnsupportedImageFormat(_))
        ));
    }
}
