//! 128x128 RGB image made of an intensity stripe on top of a spectrogram.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::data::PerturbationId;
use crate::error::{Error, Result};

pub const IMAGE_WIDTH: usize = 128;
pub const IMAGE_HEIGHT: usize = 128;
/// Rows `0..STRIPE_ROWS` hold the intensity stripe.
pub const STRIPE_ROWS: usize = 16;
/// Rows `STRIPE_ROWS..IMAGE_HEIGHT` hold the spectrogram.
pub const SPEC_ROWS: usize = IMAGE_HEIGHT - STRIPE_ROWS;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub window_id: String,
    pub perturbation: PerturbationId,
}

/// Row-major RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpectroImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    pub provenance: Provenance,
}

impl SpectroImage {
    pub fn blank(provenance: Provenance) -> Self {
        Self {
            width: IMAGE_WIDTH,
            height: IMAGE_HEIGHT,
            pixels: vec![0; IMAGE_WIDTH * IMAGE_HEIGHT * 3],
            provenance,
        }
    }

    /// Fails unless the image is exactly 128x128 RGB.
    pub fn check_dimensions(&self) -> Result<()> {
        if self.width != IMAGE_WIDTH
            || self.height != IMAGE_HEIGHT
            || self.pixels.len() != IMAGE_WIDTH * IMAGE_HEIGHT * 3
        {
            return Err(Error::Argument(format!(
                "expected {IMAGE_WIDTH}x{IMAGE_HEIGHT} RGB image, got {}x{} with {} bytes",
                self.width,
                self.height,
                self.pixels.len()
            )));
        }
        Ok(())
    }

    pub fn pixel(&self, row: usize, col: usize) -> Rgb {
        let i = (row * self.width + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: Rgb) {
        let i = (row * self.width + col) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Overwrites the stripe rows with grayscale intensities, one per column.
    pub fn paint_stripe(&mut self, stripe: &[u8; IMAGE_WIDTH]) {
        for row in 0..STRIPE_ROWS {
            for (col, &v) in stripe.iter().enumerate() {
                self.set_pixel(row, col, [v, v, v]);
            }
        }
    }

    /// Number of pixels whose RGB triple differs from `other`.
    pub fn pixel_diff_count(&self, other: &SpectroImage) -> usize {
        self.pixels
            .chunks_exact(3)
            .zip(other.pixels.chunks_exact(3))
            .filter(|(a, b)| a != b)
            .count()
    }

    /// `{window_id}_{perturbation}.png`
    pub fn file_name(&self) -> String {
        format!("{}_{}.png", self.provenance.window_id, self.provenance.perturbation)
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        self.check_dimensions()?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_compression(png::Compression::Fast);
        let png_err = |source| Error::Png {
            path: path.to_path_buf(),
            source,
        };
        let mut writer = encoder.write_header().map_err(png_err)?;
        writer.write_image_data(&self.pixels).map_err(png_err)?;
        writer.finish().map_err(png_err)
    }

    pub fn read_png(path: &Path, provenance: Provenance) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let decoder = png::Decoder::new(std::io::BufReader::new(file));
        let bad = |msg: String| Error::Argument(format!("{}: {msg}", path.display()));
        let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
        if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
            return Err(bad(format!(
                "expected RGB8, found {:?}/{:?}",
                info.color_type, info.bit_depth
            )));
        }
        buf.truncate(info.buffer_size());
        let img = SpectroImage {
            width: info.width as usize,
            height: info.height as usize,
            pixels: buf,
            provenance,
        };
        img.check_dimensions()?;
        Ok(img)
    }
}
