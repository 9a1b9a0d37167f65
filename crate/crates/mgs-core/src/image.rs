//! RGB raster images with `f64` channels and PNG I/O.
//!
//! Pixels are stored row-major with three interleaved channels. Channel
//! values are continuous; rendered output stays in `[0, 1]`, while gradient
//! rasters reuse the same container with unbounded values.
//!
//! PNG I/O maps 8-bit samples linearly to `[0, 1]` (`v / 255`) and back
//! (`round(v * 255)`), with no gamma transform.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl Image {
    /// All-black image.
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    /// Image with every pixel set to `rgb`.
    pub fn filled(width: u32, height: u32, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..(width as usize * height as usize) {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Wraps an interleaved RGB buffer; `data.len()` must be `width * height * 3`.
    pub fn from_raw(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{expected} channel values"),
                actual: format!("{}", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        3 * (y as usize * self.width as usize + x as usize)
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        let i = self.index(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [f64; 3]) {
        let i = self.index(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Largest absolute per-channel difference between two same-sized images.
    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        assert!(self.same_dims(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Scales every channel in place.
    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    /// Reads an 8-bit PNG (grayscale, grayscale+alpha, RGB or RGBA; alpha is dropped).
    pub fn load_png(path: &Path) -> Result<Image> {
        let file = std::io::BufReader::new(File::open(path)?);
        let decoder = png::Decoder::new(file);
        let mut reader = decoder
            .read_info()
            .map_err(|e| Error::Png(format!("{path:?}: {e}")))?;
        let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::Png(format!("{path:?}: {e}")))?;
        if info.bit_depth != png::BitDepth::Eight {
            return Err(Error::Png(format!(
                "{path:?}: only 8-bit PNGs are supported, got {:?}",
                info.bit_depth
            )));
        }
        let (width, height) = (info.width, info.height);
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        let push = |data: &mut Vec<f64>, r: u8, g: u8, b: u8| {
            data.push(r as f64 / 255.0);
            data.push(g as f64 / 255.0);
            data.push(b as f64 / 255.0);
        };
        match info.color_type {
            png::ColorType::Rgb => {
                for px in buf[..n * 3].chunks_exact(3) {
                    push(&mut data, px[0], px[1], px[2]);
                }
            }
            png::ColorType::Rgba => {
                for px in buf[..n * 4].chunks_exact(4) {
                    push(&mut data, px[0], px[1], px[2]);
                }
            }
            png::ColorType::Grayscale => {
                for &v in &buf[..n] {
                    push(&mut data, v, v, v);
                }
            }
            png::ColorType::GrayscaleAlpha => {
                for px in buf[..n * 2].chunks_exact(2) {
                    push(&mut data, px[0], px[0], px[0]);
                }
            }
            other => {
                return Err(Error::Png(format!(
                    "{path:?}: unsupported color type {other:?}"
                )));
            }
        }
        Image::from_raw(width, height, data)
    }

    /// Writes an 8-bit RGB PNG; channels are clamped to `[0, 1]` first.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let writer = BufWriter::new(file);
        let mut encoder = png::Encoder::new(writer, self.width, self.height);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut png_writer = encoder
            .write_header()
            .map_err(|e| Error::Png(format!("{path:?}: {e}")))?;
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        png_writer
            .write_image_data(&bytes)
            .map_err(|e| Error::Png(format!("{path:?}: {e}")))?;
        Ok(())
    }
}
