//! 16-bit PNG I/O for intensity images; values map linearly to [0, 1].

use image::{ImageBuffer, Luma, Rgb};
use std::path::Path;

use crate::error::CoreError;
use crate::image::FloatImage;

pub fn write_png16(img: &FloatImage, path: &Path) -> Result<(), CoreError> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let quant = |v: f64| (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
    match img.channels() {
        1 => {
            let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_fn(w, h, |x, y| Luma([quant(img.get(x as usize, y as usize, 0))]));
            buf.save(path)
                .map_err(|e| CoreError::Format(format!("png write: {e}")))
        }
        3 => {
            let buf: ImageBuffer<Rgb<u16>, Vec<u16>> = ImageBuffer::from_fn(w, h, |x, y| {
                let (x, y) = (x as usize, y as usize);
                Rgb([
                    quant(img.get(x, y, 0)),
                    quant(img.get(x, y, 1)),
                    quant(img.get(x, y, 2)),
                ])
            });
            buf.save(path)
                .map_err(|e| CoreError::Format(format!("png write: {e}")))
        }
        n => Err(CoreError::Format(format!(
            "16-bit PNG supports 1 or 3 channels, got {n}"
        ))),
    }
}

pub fn read_png16(path: &Path) -> Result<FloatImage, CoreError> {
    let dynimg = image::open(path).map_err(|e| CoreError::Format(format!("png read: {e}")))?;
    let scale = 1.0 / 65535.0;
    match dynimg {
        image::DynamicImage::ImageLuma16(buf) => {
            let mut img = FloatImage::new(buf.width() as usize, buf.height() as usize, 1);
            for (x, y, p) in buf.enumerate_pixels() {
                img.set(x as usize, y as usize, 0, p[0] as f64 * scale);
            }
            Ok(img)
        }
        image::DynamicImage::ImageRgb16(buf) => {
            let mut img = FloatImage::new(buf.width() as usize, buf.height() as usize, 3);
            for (x, y, p) in buf.enumerate_pixels() {
                for c in 0..3 {
                    img.set(x as usize, y as usize, c, p[c] as f64 * scale);
                }
            }
            Ok(img)
        }
        other => {
            // 8-bit masks also come through here.
            let buf = other.to_luma8();
            let mut img = FloatImage::new(buf.width() as usize, buf.height() as usize, 1);
            for (x, y, p) in buf.enumerate_pixels() {
                img.set(x as usize, y as usize, 0, p[0] as f64 / 255.0);
            }
            Ok(img)
        }
    }
}

/// 0/255 8-bit mask output.
pub fn write_mask_png(mask: &crate::image::BinaryImage, path: &Path) -> Result<(), CoreError> {
    let buf: ImageBuffer<image::Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(mask.width() as u32, mask.height() as u32, |x, y| {
            image::Luma([if mask.get(x as usize, y as usize) { 255 } else { 0 }])
        });
    buf.save(path)
        .map_err(|e| CoreError::Format(format!("png write: {e}")))
}
