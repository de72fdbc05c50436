//! PFM reader/writer ("Pf" grayscale, "PF" 3-channel).
//!
//! Samples are written as little-endian 32-bit floats (negative scale in the
//! header), rows bottom-to-top per the format convention. Round trips are
//! bit-exact for f32-representable data.

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::CoreError;
use crate::image::FloatImage;

pub fn write_pfm(img: &FloatImage, path: &Path) -> Result<(), CoreError> {
    let channels = img.channels();
    let magic = match channels {
        1 => "Pf",
        3 => "PF",
        n => {
            return Err(CoreError::Format(format!(
                "PFM supports 1 or 3 channels, got {n}"
            )))
        }
    };
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "{magic}\n{} {}\n-1.0\n", img.width(), img.height())?;
    for y in (0..img.height()).rev() {
        for x in 0..img.width() {
            for c in 0..channels {
                w.write_f32::<LittleEndian>(img.get(x, y, c) as f32)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<FloatImage, CoreError> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);

    let magic = read_token(&mut r)?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(CoreError::Format(format!("bad PFM magic {other:?}"))),
    };
    let width: usize = read_token(&mut r)?
        .parse()
        .map_err(|_| CoreError::Format("bad PFM width".into()))?;
    let height: usize = read_token(&mut r)?
        .parse()
        .map_err(|_| CoreError::Format("bad PFM height".into()))?;
    let scale: f64 = read_token(&mut r)?
        .parse()
        .map_err(|_| CoreError::Format("bad PFM scale".into()))?;
    let little_endian = scale < 0.0;

    let mut img = FloatImage::new(width, height, channels);
    for y in (0..height).rev() {
        for x in 0..width {
            for c in 0..channels {
                let v = if little_endian {
                    r.read_f32::<LittleEndian>()
                } else {
                    r.read_f32::<byteorder::BigEndian>()
                }
                .map_err(|_| CoreError::Format("truncated PFM data".into()))?;
                img.set(x, y, c, v as f64);
            }
        }
    }
    Ok(img)
}

/// Reads one whitespace-delimited header token.
fn read_token(r: &mut impl Read) -> Result<String, CoreError> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match r.read_exact(&mut byte) {
            Ok(()) => {}
            Err(_) => {
                if tok.is_empty() {
                    return Err(CoreError::Format("truncated PFM header".into()));
                }
                break;
            }
        }
        if byte[0].is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(byte[0]);
        if tok.len() > 32 {
            return Err(CoreError::Format("oversized PFM header token".into()));
        }
    }
    String::from_utf8(tok).map_err(|_| CoreError::Format("non-utf8 PFM header".into()))
}
