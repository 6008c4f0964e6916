//! 8-bit grayscale and RGB PNG.

use std::path::Path;

use deformreg_core::{ImageBuffer, ImageMeta};
use image::{DynamicImage, ExtendedColorType, ImageFormat};

use crate::error::{Error, Result};

const PNG_SIGNATURE: &[u8] = &[0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

pub fn read_image(path: &Path) -> Result<ImageBuffer> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if !bytes.starts_with(PNG_SIGNATURE) {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: "not a PNG file".into(),
        });
    }
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png).map_err(|e| {
        Error::DecodeFailure {
            path: path.to_path_buf(),
            detail: e.to_string(),
        }
    })?;
    let (channels, pixels, w, h) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.as_raw().clone(), b.width(), b.height()),
        DynamicImage::ImageRgb8(b) => (3, b.as_raw().clone(), b.width(), b.height()),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                detail: format!("{:?} (expected 8-bit gray or RGB)", other.color()),
            })
        }
    };
    let meta = ImageMeta::new(w, h).map_err(|e| Error::core(path.display().to_string(), e))?;
    ImageBuffer::new(meta, channels, pixels).map_err(|e| Error::core(path.display().to_string(), e))
}

pub fn write_image(img: &ImageBuffer, path: &Path) -> Result<()> {
    let color = if img.channels() == 1 {
        ExtendedColorType::L8
    } else {
        ExtendedColorType::Rgb8
    };
    image::save_buffer_with_format(path, img.pixels(), img.width(), img.height(), color, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(source) => Error::io(path, source),
            other => Error::DecodeFailure {
                path: path.to_path_buf(),
                detail: other.to_string(),
            },
        })
}
