//! Shared 8-bit RGB frame helpers.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType as PngFilter, PngEncoder};
use image::imageops::{self, FilterType};
use image::{ImageEncoder, RgbImage};

use crate::error::{Error, Result};

/// Row-major 8-bit RGB frame at native resolution.
pub type Frame = RgbImage;

pub fn load_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(img.to_rgb8())
}

/// Writes a PNG with fixed encoder settings so identical frames give identical bytes.
pub fn save_png(path: &Path, frame: &Frame) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = PngEncoder::new_with_quality(
        BufWriter::new(file),
        CompressionType::Fast,
        PngFilter::Sub,
    );
    encoder
        .write_image(
            frame.as_raw(),
            frame.width(),
            frame.height(),
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// ITU-R BT.601 luma.
#[inline]
pub fn luma601(r: u8, g: u8, b: u8) -> f32 {
    0.299 * r as f32 + 0.587 * g as f32 + 0.114 * b as f32
}

/// Linear-filter resize (area-aware when shrinking).
pub fn resize_linear(frame: &Frame, width: u32, height: u32) -> Frame {
    if frame.width() == width && frame.height() == height {
        return frame.clone();
    }
    imageops::resize(frame, width.max(1), height.max(1), FilterType::Triangle)
}

pub fn solid(width: u32, height: u32, rgb: [u8; 3]) -> Frame {
    RgbImage::from_pixel(width, height, image::Rgb(rgb))
}
