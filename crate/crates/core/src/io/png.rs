//! Minimal PNG encoder (8-bit RGB, stored deflate blocks) and the grid
//! overlay drawn on images sent to the vision-language model.

use std::path::Path;

use crate::error::Result;
use crate::grounding::GridSpec;
use crate::raster::RgbImage;

const SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];
const MAX_STORED: usize = 65_535;

pub const GRID_COLOR: [u8; 3] = [255, 48, 48];
pub const TAG_COLOR: [u8; 3] = [24, 24, 24];
pub const TEXT_COLOR: [u8; 3] = [255, 255, 255];

/// Encodes an RGB image as PNG with filter type 0 on every row.
pub fn encode_png_rgb(img: &RgbImage) -> Vec<u8> {
    let mut png = Vec::with_capacity(img.data.len() + img.height + 128);
    png.extend_from_slice(&SIGNATURE);

    let mut ihdr = Vec::with_capacity(13);
    ihdr.extend_from_slice(&(img.width as u32).to_be_bytes());
    ihdr.extend_from_slice(&(img.height as u32).to_be_bytes());
    ihdr.extend_from_slice(&[8, 2, 0, 0, 0]); // depth 8, RGB, deflate, no filter, no interlace
    write_chunk(&mut png, b"IHDR", &ihdr);

    let row = img.width * 3;
    let mut raw = Vec::with_capacity((row + 1) * img.height);
    for y in 0..img.height {
        raw.push(0);
        raw.extend_from_slice(&img.data[y * row..(y + 1) * row]);
    }
    write_chunk(&mut png, b"IDAT", &zlib_stored(&raw));
    write_chunk(&mut png, b"IEND", &[]);
    png
}

fn write_chunk(out: &mut Vec<u8>, kind: &[u8; 4], data: &[u8]) {
    out.extend_from_slice(&(data.len() as u32).to_be_bytes());
    let start = out.len();
    out.extend_from_slice(kind);
    out.extend_from_slice(data);
    let crc = crc32(&out[start..]);
    out.extend_from_slice(&crc.to_be_bytes());
}

fn zlib_stored(data: &[u8]) -> Vec<u8> {
    let blocks = data.len().div_ceil(MAX_STORED).max(1);
    let mut out = Vec::with_capacity(data.len() + blocks * 5 + 6);
    out.extend_from_slice(&[0x78, 0x01]);
    let mut chunks = data.chunks(MAX_STORED).peekable();
    if chunks.peek().is_none() {
        out.extend_from_slice(&[0x01, 0x00, 0x00, 0xFF, 0xFF]);
    }
    while let Some(block) = chunks.next() {
        out.push(u8::from(chunks.peek().is_none()));
        let len = block.len() as u16;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&(!len).to_le_bytes());
        out.extend_from_slice(block);
    }
    out.extend_from_slice(&adler32(data).to_be_bytes());
    out
}

pub fn crc32(bytes: &[u8]) -> u32 {
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            let mask = (crc & 1).wrapping_neg();
            crc = (crc >> 1) ^ (0xEDB8_8320 & mask);
        }
    }
    !crc
}

pub fn adler32(bytes: &[u8]) -> u32 {
    const MOD: u32 = 65_521;
    let (mut a, mut b) = (1u32, 0u32);
    // 5552 is the largest run that cannot overflow u32 before reduction.
    for chunk in bytes.chunks(5552) {
        for &x in chunk {
            a += x as u32;
            b += a;
        }
        a %= MOD;
        b %= MOD;
    }
    (b << 16) | a
}

/// 5×7 digit glyphs, one byte per row, bit 4 is the leftmost column.
const DIGITS: [[u8; 7]; 10] = [
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
    [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
    [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
];

/// Glyph scale so the text is about a fifth of the cell height.
pub fn label_scale(cell_height: usize) -> usize {
    ((cell_height as f64 / 5.0 / 7.0).round() as usize).max(1)
}

fn fill_rect(img: &mut RgbImage, x0: usize, y0: usize, w: usize, h: usize, color: [u8; 3]) {
    for y in y0..(y0 + h).min(img.height) {
        for x in x0..(x0 + w).min(img.width) {
            img.put(x, y, color);
        }
    }
}

fn draw_label(img: &mut RgbImage, x0: usize, y0: usize, label: usize, scale: usize) {
    let text = label.to_string();
    let glyph_w = 5 * scale;
    let gap = scale;
    let pad = scale;
    let text_w = text.len() * glyph_w + (text.len() - 1) * gap;
    fill_rect(img, x0, y0, text_w + 2 * pad, 7 * scale + 2 * pad, TAG_COLOR);
    for (i, ch) in text.bytes().enumerate() {
        let glyph = &DIGITS[(ch - b'0') as usize];
        let gx = x0 + pad + i * (glyph_w + gap);
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..5 {
                if bits & (0x10 >> col) != 0 {
                    fill_rect(img, gx + col * scale, y0 + pad + row * scale, scale, scale, TEXT_COLOR);
                }
            }
        }
    }
}

/// Copy of `img` with 1 px cell borders and a numeric tag in each cell's
/// top-left corner.
pub fn annotate_grid(img: &RgbImage, grid: &GridSpec) -> RgbImage {
    let mut out = img.clone();
    for cell in &grid.cells {
        let r = cell.rect;
        fill_rect(&mut out, r.x, r.y, r.w, 1, GRID_COLOR);
        fill_rect(&mut out, r.x, r.y + r.h - 1, r.w, 1, GRID_COLOR);
        fill_rect(&mut out, r.x, r.y, 1, r.h, GRID_COLOR);
        fill_rect(&mut out, r.x + r.w - 1, r.y, 1, r.h, GRID_COLOR);
    }
    for cell in &grid.cells {
        let r = cell.rect;
        let inset = 2;
        draw_label(&mut out, r.x + inset, r.y + inset, cell.label, label_scale(r.h));
    }
    out
}

pub fn annotated_png_bytes(img: &RgbImage, grid: &GridSpec) -> Vec<u8> {
    encode_png_rgb(&annotate_grid(img, grid))
}

pub fn write_annotated_png(img: &RgbImage, grid: &GridSpec, path: impl AsRef<Path>) -> Result<()> {
    super::write_bytes(path, &annotated_png_bytes(img, grid))
}
