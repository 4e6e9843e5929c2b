//! Netpbm rasters: binary PPM (P6) color images, PGM masks (P5 or P2, maxval
//! 255, `>= 128` is true) and 16-bit PGM depth maps (P5, maxval 65535,
//! big-endian samples).

use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, DepthImage, RgbImage};

/// Upper bound on either dimension; larger headers are treated as corrupt.
const MAX_DIM: usize = 1 << 15;

const MASK_THRESHOLD: u8 = 128;

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    /// Offset of the first raster byte (binary) or token (ASCII).
    data_start: usize,
}

#[inline]
fn is_ws(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r')
}

fn parse_header(bytes: &[u8], format: &'static str) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::format(format, "missing 'P' magic number"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    let names = ["width", "height", "maxval"];
    for (slot, name) in fields.iter_mut().zip(names) {
        // Whitespace and comments before each field.
        let mut saw_sep = false;
        loop {
            match bytes.get(pos) {
                Some(&b) if is_ws(b) => {
                    saw_sep = true;
                    pos += 1;
                }
                Some(b'#') => {
                    saw_sep = true;
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(Error::format(format, format!("truncated header before {name}"))),
            }
        }
        if !saw_sep {
            return Err(Error::format(format, format!("missing separator before {name}")));
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(format, format!("{name} is not a decimal number")));
        }
        if pos - start > 6 {
            return Err(Error::format(format, format!("{name} is too large")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *slot = text.parse().map_err(|_| Error::format(format, format!("bad {name}")))?;
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(pos) {
        Some(&b) if is_ws(b) => pos += 1,
        Some(_) => return Err(Error::format(format, "maxval not followed by whitespace")),
        None => return Err(Error::format(format, "truncated header after maxval")),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::format(format, "zero image dimension"));
    }
    if width > MAX_DIM || height > MAX_DIM {
        return Err(Error::format(format, format!("dimensions {width}x{height} exceed {MAX_DIM}")));
    }
    Ok(Header {
        magic,
        width,
        height,
        maxval,
        data_start: pos,
    })
}

fn binary_payload<'a>(bytes: &'a [u8], h: &Header, bytes_per_pixel: usize, format: &'static str) -> Result<&'a [u8]> {
    let need = h.width * h.height * bytes_per_pixel;
    let data = &bytes[h.data_start..];
    if data.len() < need {
        return Err(Error::format(
            format,
            format!("truncated raster: need {need} bytes, found {}", data.len()),
        ));
    }
    if data.len() > need {
        return Err(Error::format(format, format!("{} trailing bytes after raster", data.len() - need)));
    }
    Ok(data)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    let h = parse_header(bytes, "PPM")?;
    if &h.magic != b"P6" {
        return Err(Error::format("PPM", "expected magic P6"));
    }
    if h.maxval != 255 {
        return Err(Error::format("PPM", format!("maxval {} unsupported, expected 255", h.maxval)));
    }
    let data = binary_payload(bytes, &h, 3, "PPM")?;
    RgbImage::from_raw(h.width, h.height, data.to_vec())
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn decode_mask_pgm(bytes: &[u8]) -> Result<BinaryMask> {
    let h = parse_header(bytes, "PGM")?;
    if h.maxval != 255 {
        return Err(Error::format("PGM", format!("mask maxval {} unsupported, expected 255", h.maxval)));
    }
    let values: Vec<bool> = match &h.magic {
        b"P5" => binary_payload(bytes, &h, 1, "PGM")?.iter().map(|&b| b >= MASK_THRESHOLD).collect(),
        b"P2" => decode_ascii_samples(&bytes[h.data_start..], h.width * h.height, 255)?
            .into_iter()
            .map(|v| v >= MASK_THRESHOLD as u32)
            .collect(),
        _ => return Err(Error::format("PGM", "expected magic P5 or P2")),
    };
    BinaryMask::from_raw(h.width, h.height, values)
}

fn decode_ascii_samples(data: &[u8], count: usize, maxval: u32) -> Result<Vec<u32>> {
    let text = std::str::from_utf8(data).map_err(|_| Error::format("PGM", "non-ASCII sample data"))?;
    let mut out = Vec::with_capacity(count);
    for tok in text.split(|c: char| c.is_ascii() && is_ws(c as u8)).filter(|t| !t.is_empty()) {
        if out.len() == count {
            return Err(Error::format("PGM", "trailing samples after raster"));
        }
        if !tok.bytes().all(|b| b.is_ascii_digit()) || tok.len() > 5 {
            return Err(Error::format("PGM", format!("bad sample {tok:?}")));
        }
        let v: u32 = tok.parse().map_err(|_| Error::format("PGM", format!("bad sample {tok:?}")))?;
        if v > maxval {
            return Err(Error::format("PGM", format!("sample {v} exceeds maxval {maxval}")));
        }
        out.push(v);
    }
    if out.len() != count {
        return Err(Error::format(
            "PGM",
            format!("truncated raster: need {count} samples, found {}", out.len()),
        ));
    }
    Ok(out)
}

/// Binary P5 with 0 / 255 samples.
pub fn encode_mask_pgm(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.data.iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

pub fn decode_depth_pgm16(bytes: &[u8]) -> Result<DepthImage> {
    let h = parse_header(bytes, "PGM16")?;
    if &h.magic != b"P5" {
        return Err(Error::format("PGM16", "expected magic P5"));
    }
    if h.maxval != 65535 {
        return Err(Error::format(
            "PGM16",
            format!("depth maxval {} unsupported, expected 65535", h.maxval),
        ));
    }
    let data = binary_payload(bytes, &h, 2, "PGM16")?;
    let samples = data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    DepthImage::from_raw(h.width, h.height, samples)
}

pub fn encode_depth_pgm16(depth: &DepthImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n65535\n", depth.width, depth.height).into_bytes();
    for d in &depth.data {
        out.extend_from_slice(&d.to_be_bytes());
    }
    out
}

pub fn read_image_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    decode_ppm(&super::read_bytes(path)?)
}

pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode_mask_pgm(&super::read_bytes(path)?)
}

pub fn read_depth_pgm16(path: impl AsRef<Path>) -> Result<DepthImage> {
    decode_depth_pgm16(&super::read_bytes(path)?)
}

pub fn write_image_ppm(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    super::write_bytes(path, &encode_ppm(img))
}

pub fn write_mask_pgm(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    super::write_bytes(path, &encode_mask_pgm(mask))
}

pub fn write_depth_pgm16(depth: &DepthImage, path: impl AsRef<Path>) -> Result<()> {
    super::write_bytes(path, &encode_depth_pgm16(depth))
}
