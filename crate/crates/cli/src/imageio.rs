//! Image files: 8/16-bit PNG, ASCII PGM/PPM and raw `.pnpd` float frames.
//!
//! Display formats map to `[0, 1]` on read and are clipped on write. `.pnpd`
//! files hold one 32-bit planar frame in the external-denoiser wire format
//! and store any real values, which is what Poisson counts need.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};
use pnppds_core::protocol::Frame;
use pnppds_core::{Image, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Png,
    Pnm,
    Raw,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        Ok(match ext.as_str() {
            "png" => Format::Png,
            "pgm" | "ppm" | "pnm" => Format::Pnm,
            "pnpd" => Format::Raw,
            _ => bail!("unsupported image extension for {}: use .png, .pgm, .ppm or .pnpd", path.display()),
        })
    }

    /// Whether values outside `[0, 1]` survive a write.
    pub fn is_lossless_for_reals(self) -> bool {
        self == Format::Raw
    }
}

pub fn read_image(path: &Path) -> Result<Image> {
    match Format::from_path(path)? {
        Format::Raw => read_raw(path),
        Format::Png | Format::Pnm => {
            let img = image::ImageReader::open(path)
                .with_context(|| format!("opening {}", path.display()))?
                .with_guessed_format()?
                .decode()
                .with_context(|| format!("decoding {}", path.display()))?;
            Ok(from_dynamic(&img))
        }
    }
}

fn from_dynamic(img: &DynamicImage) -> Image {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = !img.color().has_color();
    let (channels, samples) = if gray {
        (1, img.to_luma16().into_raw())
    } else {
        (3, img.to_rgb16().into_raw())
    };
    let shape = Shape::new(w, h, channels);
    // interleaved -> planar
    Image::from_fn(shape, |c, r, col| samples[(r * w + col) * channels + c] as f64 / 65535.0)
}

fn read_raw(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    match Frame::decode(&bytes).with_context(|| format!("parsing {}", path.display()))? {
        Frame::Ok(x) | Frame::Denoise(x) => Ok(x.cast()),
        Frame::Error { message, .. } => bail!("{} holds an error frame: {message}", path.display()),
    }
}

/// Writes `x`, clipping to `[0, 1]` for display formats. `bits` selects 8- or
/// 16-bit samples for PNG/PNM and is ignored for `.pnpd`.
pub fn write_image(path: &Path, x: &Image, bits: u8) -> Result<()> {
    let format = Format::from_path(path)?;
    if format == Format::Raw {
        let bytes = Frame::Ok(x.cast::<f32>()).encode();
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        return Ok(());
    }
    let shape = x.shape();
    let color = match (shape.channels, bits) {
        (1, 8) => ExtendedColorType::L8,
        (1, 16) => ExtendedColorType::L16,
        (3, 8) => ExtendedColorType::Rgb8,
        (3, 16) => ExtendedColorType::Rgb16,
        (c, 8 | 16) => bail!("cannot store {c} channels in {}", path.display()),
        (_, b) => bail!("bit depth must be 8 or 16, got {b}"),
    };
    let max = if bits == 8 { 255.0 } else { 65535.0 };
    let (w, h, c) = (shape.width, shape.height, shape.channels);
    let mut samples = vec![0u16; x.len()];
    for ch in 0..c {
        for (i, &v) in x.plane(ch).iter().enumerate() {
            samples[i * c + ch] = (v.clamp(0.0, 1.0) * max).round() as u16;
        }
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    let (w32, h32) = (w as u32, h as u32);
    match format {
        Format::Png => {
            let enc = image::codecs::png::PngEncoder::new(&mut out);
            if bits == 8 {
                let bytes: Vec<u8> = samples.iter().map(|&s| s as u8).collect();
                enc.write_image(&bytes, w32, h32, color)?;
            } else {
                // 16-bit samples go in as native-endian bytes
                let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_ne_bytes()).collect();
                enc.write_image(&bytes, w32, h32, color)?;
            }
        }
        Format::Pnm => {
            // plain PGM/PPM; the image crate's encoder has no 16-bit pixmaps
            writeln!(out, "{}\n{w} {h}\n{}", if c == 1 { "P2" } else { "P3" }, max as u32)?;
            for row in samples.chunks(w * c) {
                let line: Vec<String> = row.iter().map(u16::to_string).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
        }
        Format::Raw => unreachable!(),
    }
    out.flush()?;
    Ok(())
}
