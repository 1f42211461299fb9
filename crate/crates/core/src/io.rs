//! SPCT tensor/mask container and PNG conversion.
//!
//! SPCT layout, all integers little-endian:
//!
//! ```text
//! magic        4 bytes  "SPCT"
//! version      u32      1
//! payload_kind u8       0 = f64 tensor, 1 = u8 mask
//! ndim         u32
//! dims         ndim x u64
//! payload      f64 LE per entry, or one byte per entry (1 observed, 0 missing)
//! ```
//!
//! Entries are stored in canonical order (first index fastest).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Result, SpcError};
use crate::tensor::{DenseTensor, Mask};

pub const MAGIC: &[u8; 4] = b"SPCT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum PayloadKind {
    Float64 = 0,
    Mask = 1,
}

/// Parsed SPCT header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorFileHeader {
    pub kind: PayloadKind,
    pub dims: Vec<usize>,
}

impl TensorFileHeader {
    pub fn encoded_len(&self) -> usize {
        4 + 4 + 1 + 4 + 8 * self.dims.len()
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }

    /// Parses the header and returns it with the payload bytes.
    pub fn decode(bytes: &[u8]) -> Result<(Self, &[u8])> {
        let fixed = 4 + 4 + 1 + 4;
        if bytes.len() < fixed {
            return Err(SpcError::Format(format!(
                "file of {} bytes is shorter than the {fixed}-byte header",
                bytes.len()
            )));
        }
        if &bytes[..4] != MAGIC {
            return Err(SpcError::Format(format!("bad magic {:?}", &bytes[..4])));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(SpcError::Format(format!("unsupported version {version}")));
        }
        let kind = match bytes[8] {
            0 => PayloadKind::Float64,
            1 => PayloadKind::Mask,
            k => return Err(SpcError::Format(format!("unknown payload kind {k}"))),
        };
        let ndim = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
        let dims_end = ndim
            .checked_mul(8)
            .and_then(|n| n.checked_add(fixed))
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| SpcError::Format(format!("truncated header for ndim {ndim}")))?;
        let dims: Vec<usize> = bytes[fixed..dims_end]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")) as usize)
            .collect();
        if ndim == 0 || dims.contains(&0) {
            return Err(SpcError::Format(format!("invalid dims {dims:?}")));
        }
        Ok((Self { kind, dims }, &bytes[dims_end..]))
    }

    fn element_count(&self) -> Result<usize> {
        self.dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| SpcError::Format(format!("dims {:?} overflow", self.dims)))
    }
}

pub fn encode_tensor(t: &DenseTensor<f64>) -> Result<Vec<u8>> {
    if !t.all_finite() {
        return Err(SpcError::NonFinite("tensor written to SPCT".into()));
    }
    let header = TensorFileHeader {
        kind: PayloadKind::Float64,
        dims: t.dims().to_vec(),
    };
    let mut out = Vec::with_capacity(header.encoded_len() + 8 * t.len());
    header.encode(&mut out);
    for &x in t.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<DenseTensor<f64>> {
    let (header, payload) = TensorFileHeader::decode(bytes)?;
    if header.kind != PayloadKind::Float64 {
        return Err(SpcError::Format("expected a float64 tensor payload".into()));
    }
    let count = header.element_count()?;
    if Some(payload.len()) != count.checked_mul(8) {
        return Err(SpcError::Format(format!(
            "payload has {} bytes, {count} float64 entries declared",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseTensor::from_vec(&header.dims, data)
}

pub fn encode_mask(mask: &Mask) -> Vec<u8> {
    let header = TensorFileHeader {
        kind: PayloadKind::Mask,
        dims: mask.dims().to_vec(),
    };
    let mut out = Vec::with_capacity(header.encoded_len() + mask.len());
    header.encode(&mut out);
    out.extend(mask.as_slice().iter().map(|&o| o as u8));
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let (header, payload) = TensorFileHeader::decode(bytes)?;
    if header.kind != PayloadKind::Mask {
        return Err(SpcError::Format("expected a mask payload".into()));
    }
    let count = header.element_count()?;
    if payload.len() != count {
        return Err(SpcError::Format(format!(
            "payload has {} bytes, {count} mask entries declared",
            payload.len()
        )));
    }
    let observed = payload
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(SpcError::Format(format!("mask byte {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    Mask::from_vec(&header.dims, observed)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

pub fn write_tensor(path: impl AsRef<Path>, t: &DenseTensor<f64>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_tensor(t)?)
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor<f64>> {
    decode_tensor(&std::fs::read(path)?)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    write_bytes(path.as_ref(), &encode_mask(mask))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    decode_mask(&std::fs::read(path)?)
}

/// Decoded 8-bit image as `height x width x channels` bytes in row-major
/// pixel order, `channels` being 1 (gray) or 3 (RGB). Alpha is discarded.
struct RawImage {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<u8>,
}

fn decode_png(path: &Path) -> Result<RawImage> {
    use png::{BitDepth, ColorType, Transformations};
    let mut decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| SpcError::UnsupportedImage(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| SpcError::UnsupportedImage("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| SpcError::UnsupportedImage(e.to_string()))?;
    if info.bit_depth != BitDepth::Eight {
        return Err(SpcError::UnsupportedImage(format!(
            "bit depth {:?}; only 8-bit images are supported",
            info.bit_depth
        )));
    }
    let (stride, keep) = match info.color_type {
        ColorType::Grayscale => (1, 1),
        ColorType::GrayscaleAlpha => (2, 1),
        ColorType::Rgb => (3, 3),
        ColorType::Rgba => (4, 3),
        ColorType::Indexed => {
            return Err(SpcError::UnsupportedImage("palette images are not supported".into()))
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);
    let mut pixels = Vec::with_capacity(width * height * keep);
    for row in buf[..info.line_size * height].chunks_exact(info.line_size) {
        for px in row[..width * stride].chunks_exact(stride) {
            pixels.extend_from_slice(&px[..keep]);
        }
    }
    Ok(RawImage {
        height,
        width,
        channels: keep,
        pixels,
    })
}

/// Reads an 8-bit gray or RGB PNG as an `H x W x 3` tensor with values
/// 0..=255; gray images are replicated over the three channels.
pub fn png_to_tensor(path: impl AsRef<Path>) -> Result<DenseTensor<f64>> {
    let img = decode_png(path.as_ref())?;
    let (h, w) = (img.height, img.width);
    DenseTensor::from_fn(&[h, w, 3], |i| {
        let c = if img.channels == 1 { 0 } else { i[2] };
        f64::from(img.pixels[(i[0] * w + i[1]) * img.channels + c])
    })
}

/// Converts a value to an 8-bit sample: clamp to [0, 255], then round half
/// away from zero.
pub fn to_u8_sample(x: f64) -> u8 {
    x.clamp(0.0, 255.0).round() as u8
}

/// Writes an `H x W`, `H x W x 1`, or `H x W x 3` tensor as an 8-bit PNG.
pub fn tensor_to_png(t: &DenseTensor<f64>, path: impl AsRef<Path>) -> Result<()> {
    let (h, w, c) = match *t.dims() {
        [h, w] => (h, w, 1),
        [h, w, c @ (1 | 3)] => (h, w, c),
        _ => {
            return Err(SpcError::InvalidParameter(format!(
                "cannot write dims {:?} as PNG",
                t.dims()
            )))
        }
    };
    if t.as_slice().iter().any(|x| x.is_nan()) {
        return Err(SpcError::NonFinite("tensor written to PNG".into()));
    }
    let mut pixels = Vec::with_capacity(h * w * c);
    for row in 0..h {
        for col in 0..w {
            for ch in 0..c {
                pixels.push(to_u8_sample(t.as_slice()[row + h * col + h * w * ch]));
            }
        }
    }
    let file = BufWriter::new(File::create(path.as_ref())?);
    let mut encoder = png::Encoder::new(file, w as u32, h as u32);
    encoder.set_color(if c == 1 {
        png::ColorType::Grayscale
    } else {
        png::ColorType::Rgb
    });
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| SpcError::Format(e.to_string()))?;
    writer
        .write_image_data(&pixels)
        .map_err(|e| SpcError::Format(e.to_string()))?;
    writer.finish().map_err(|e| SpcError::Format(e.to_string()))?;
    Ok(())
}

/// How a mask image marks missing pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskRule {
    /// Pixels whose every channel is 0 are missing.
    ZeroIsMissing,
    /// Pixels with any nonzero channel are missing.
    NonzeroIsMissing,
}

/// Builds a mask for a tensor of `target_dims` (`H x W` or `H x W x C`) from a
/// mask image of the same height and width. The per-pixel decision applies to
/// every channel.
pub fn mask_from_image(path: impl AsRef<Path>, rule: MaskRule, target_dims: &[usize]) -> Result<Mask> {
    let img = decode_png(path.as_ref())?;
    let (h, w, c) = match *target_dims {
        [h, w] => (h, w, 1),
        [h, w, c] => (h, w, c),
        _ => {
            return Err(SpcError::InvalidParameter(format!(
                "mask images apply to 2-D or 3-D tensors, got {target_dims:?}"
            )))
        }
    };
    if (img.height, img.width) != (h, w) {
        return Err(SpcError::DimensionMismatch {
            expected: vec![h, w],
            found: vec![img.height, img.width],
        });
    }
    let mut mask = Mask::all_observed(target_dims)?;
    let plane = h * w;
    for row in 0..h {
        for col in 0..w {
            let start = (row * w + col) * img.channels;
            let px = &img.pixels[start..start + img.channels];
            let zero = px.iter().all(|&v| v == 0);
            let missing = match rule {
                MaskRule::ZeroIsMissing => zero,
                MaskRule::NonzeroIsMissing => !zero,
            };
            if missing {
                for ch in 0..c {
                    mask.set(row + h * col + plane * ch, false);
                }
            }
        }
    }
    Ok(mask)
}
