//! Point clouds as PLY. The writer emits `binary_little_endian 1.0` with
//! double `x y z`, optional `uint u v` pixel coordinates and an optional
//! `uchar label`. The reader also accepts ASCII and big-endian files with any
//! scalar property types, as long as the vertex element carries `x y z`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};

const FMT: &str = "PLY";
/// Refuse vertex counts beyond this; guards allocation on corrupt headers.
const MAX_VERTICES: usize = 50_000_000;

const KNOWN_VERTEX_PROPS: &[&str] = &[
    "x",
    "y",
    "z",
    "u",
    "v",
    "label",
    "nx",
    "ny",
    "nz",
    "red",
    "green",
    "blue",
    "alpha",
    "intensity",
];

#[derive(Clone, Debug, PartialEq)]
pub struct PlyCloud {
    pub cloud: PointCloud<f64>,
    pub labels: Option<Vec<u8>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, ScalarType::F32 | ScalarType::F64)
    }

    fn read_binary(self, b: &[u8], enc: Encoding) -> f64 {
        macro_rules! rd {
            ($t:ty, $n:expr) => {{
                let arr: [u8; $n] = b[..$n].try_into().expect("sized slice");
                if enc == Encoding::BinaryBe {
                    <$t>::from_be_bytes(arr) as f64
                } else {
                    <$t>::from_le_bytes(arr) as f64
                }
            }};
        }
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => rd!(i16, 2),
            ScalarType::U16 => rd!(u16, 2),
            ScalarType::I32 => rd!(i32, 4),
            ScalarType::U32 => rd!(u32, 4),
            ScalarType::F32 => rd!(f32, 4),
            ScalarType::F64 => rd!(f64, 8),
        }
    }

    fn parse_ascii(self, tok: &str) -> Option<f64> {
        if self.is_integer() {
            let v: i64 = tok.parse().ok()?;
            let (lo, hi) = match self {
                ScalarType::I8 => (i8::MIN as i64, i8::MAX as i64),
                ScalarType::U8 => (0, u8::MAX as i64),
                ScalarType::I16 => (i16::MIN as i64, i16::MAX as i64),
                ScalarType::U16 => (0, u16::MAX as i64),
                ScalarType::I32 => (i32::MIN as i64, i32::MAX as i64),
                _ => (0, u32::MAX as i64),
            };
            (lo..=hi).contains(&v).then_some(v as f64)
        } else {
            let v: f64 = tok.parse().ok()?;
            if self == ScalarType::F32 {
                Some(v as f32 as f64)
            } else {
                Some(v)
            }
        }
    }
}

struct Property {
    name: String,
    ty: ScalarType,
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    body_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let end_marker = b"end_header\n";
    let end = bytes
        .windows(end_marker.len())
        .position(|w| w == end_marker)
        .ok_or_else(|| Error::format(FMT, "missing end_header"))?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::format(FMT, "header is not UTF-8"))?;
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(Error::format(FMT, "missing 'ply' magic line"));
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", fmt, "1.0"] => {
                if encoding.is_some() {
                    return Err(Error::format(FMT, "duplicate format line"));
                }
                encoding = Some(match *fmt {
                    "ascii" => Encoding::Ascii,
                    "binary_little_endian" => Encoding::BinaryLe,
                    "binary_big_endian" => Encoding::BinaryBe,
                    other => return Err(Error::format(FMT, format!("unknown format {other:?}"))),
                });
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                if count.len() > 9 || !count.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(Error::format(FMT, format!("bad element count {count:?}")));
                }
                let count: usize = count.parse().map_err(|_| Error::format(FMT, "bad element count"))?;
                if count > MAX_VERTICES {
                    return Err(Error::format(FMT, format!("element count {count} too large")));
                }
                if elements.iter().any(|e| e.name == *name) {
                    return Err(Error::format(FMT, format!("duplicate element {name:?}")));
                }
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            ["property", "list", ..] => {
                return Err(Error::format(FMT, "list properties are not supported"));
            }
            ["property", ty, name] => {
                let ty = ScalarType::parse(ty).ok_or_else(|| Error::format(FMT, format!("unknown property type {ty:?}")))?;
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::format(FMT, "property before any element"))?;
                if el.props.iter().any(|p| p.name == *name) {
                    return Err(Error::format(FMT, format!("duplicate property {name:?}")));
                }
                el.props.push(Property {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => return Err(Error::format(FMT, format!("unrecognized header line {line:?}"))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::format(FMT, "missing format line"))?;
    Ok(Header {
        encoding,
        elements,
        body_start: end + end_marker.len(),
    })
}

pub fn decode_ply(bytes: &[u8]) -> Result<PlyCloud> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.body_start..];
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut vertex_props: Vec<&Property> = Vec::new();
    let mut seen_vertex = false;

    match header.encoding {
        Encoding::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| Error::format(FMT, "ASCII body is not UTF-8"))?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            for el in &header.elements {
                let is_vertex = el.name == "vertex";
                for i in 0..el.count {
                    let line = lines
                        .next()
                        .ok_or_else(|| Error::format(FMT, format!("truncated {} element at row {i}", el.name)))?;
                    let toks: Vec<&str> = line.split_whitespace().collect();
                    if toks.len() != el.props.len() {
                        return Err(Error::format(
                            FMT,
                            format!("{} row {i} has {} values, expected {}", el.name, toks.len(), el.props.len()),
                        ));
                    }
                    let mut row = Vec::with_capacity(toks.len());
                    for (tok, p) in toks.iter().zip(&el.props) {
                        row.push(
                            p.ty.parse_ascii(tok)
                                .ok_or_else(|| Error::format(FMT, format!("bad {} value {tok:?}", p.name)))?,
                        );
                    }
                    if is_vertex {
                        rows.push(row);
                    }
                }
                if is_vertex {
                    seen_vertex = true;
                    vertex_props = el.props.iter().collect();
                }
            }
            if lines.next().is_some() {
                return Err(Error::format(FMT, "trailing data after last element"));
            }
        }
        Encoding::BinaryLe | Encoding::BinaryBe => {
            let mut pos = 0usize;
            for el in &header.elements {
                let stride: usize = el.props.iter().map(|p| p.ty.size()).sum();
                let need = stride
                    .checked_mul(el.count)
                    .ok_or_else(|| Error::format(FMT, "element size overflow"))?;
                if body.len() - pos < need {
                    return Err(Error::format(
                        FMT,
                        format!("truncated {} data: need {need} bytes, found {}", el.name, body.len() - pos),
                    ));
                }
                if el.name == "vertex" {
                    seen_vertex = true;
                    vertex_props = el.props.iter().collect();
                    rows.reserve(el.count);
                    for r in 0..el.count {
                        let mut off = pos + r * stride;
                        let mut row = Vec::with_capacity(el.props.len());
                        for p in &el.props {
                            row.push(p.ty.read_binary(&body[off..], header.encoding));
                            off += p.ty.size();
                        }
                        rows.push(row);
                    }
                }
                pos += need;
            }
            if pos != body.len() {
                return Err(Error::format(
                    FMT,
                    format!("{} trailing bytes after last element", body.len() - pos),
                ));
            }
        }
    }

    if !seen_vertex {
        return Err(Error::format(FMT, "no vertex element"));
    }
    let col = |name: &str| vertex_props.iter().position(|p| p.name == name);
    let (ix, iy, iz) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::format(FMT, "vertex element lacks x, y or z")),
    };
    let uv = match (col("u"), col("v")) {
        (Some(u), Some(v)) => Some((u, v)),
        (None, None) => None,
        _ => return Err(Error::format(FMT, "vertex element has only one of u, v")),
    };
    let il = col("label");
    if let Some(p) = vertex_props.iter().find(|p| !KNOWN_VERTEX_PROPS.contains(&p.name.as_str())) {
        return Err(Error::format(FMT, format!("unknown vertex property {:?}", p.name)));
    }

    let mut points = Vec::with_capacity(rows.len());
    let mut pixels = uv.map(|_| Vec::with_capacity(rows.len()));
    let mut labels = il.map(|_| Vec::with_capacity(rows.len()));
    for (i, row) in rows.iter().enumerate() {
        let p = Vec3::new(row[ix], row[iy], row[iz]);
        if !p.is_finite() {
            return Err(Error::format(FMT, format!("vertex {i} has a non-finite coordinate")));
        }
        points.push(p);
        if let (Some((iu, iv)), Some(px)) = (uv, pixels.as_mut()) {
            let (u, v) = (row[iu], row[iv]);
            if !(u >= 0.0 && v >= 0.0 && u <= u32::MAX as f64 && v <= u32::MAX as f64 && u.fract() == 0.0 && v.fract() == 0.0) {
                return Err(Error::format(FMT, format!("vertex {i} has invalid pixel coordinates")));
            }
            px.push((u as u32, v as u32));
        }
        if let (Some(il), Some(ls)) = (il, labels.as_mut()) {
            let l = row[il];
            if !(0.0..=255.0).contains(&l) || l.fract() != 0.0 {
                return Err(Error::format(FMT, format!("vertex {i} has invalid label")));
            }
            ls.push(l as u8);
        }
    }
    Ok(PlyCloud {
        cloud: PointCloud { points, pixels },
        labels,
    })
}

pub fn encode_ply(cloud: &PointCloud<f64>, labels: Option<&[u8]>) -> Result<Vec<u8>> {
    if let Some(l) = labels {
        if l.len() != cloud.len() {
            return Err(Error::DimensionMismatch(format!("{} points but {} labels", cloud.len(), l.len())));
        }
    }
    let mut out = String::from("ply\nformat binary_little_endian 1.0\n");
    out.push_str(&format!("element vertex {}\n", cloud.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.pixels.is_some() {
        out.push_str("property uint u\nproperty uint v\n");
    }
    if labels.is_some() {
        out.push_str("property uchar label\n");
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    for (i, p) in cloud.points.iter().enumerate() {
        for c in [p.x, p.y, p.z] {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(px) = &cloud.pixels {
            bytes.extend_from_slice(&px[i].0.to_le_bytes());
            bytes.extend_from_slice(&px[i].1.to_le_bytes());
        }
        if let Some(l) = labels {
            bytes.push(l[i]);
        }
    }
    Ok(bytes)
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PlyCloud> {
    decode_ply(&super::read_bytes(path)?)
}

pub fn write_ply(cloud: &PointCloud<f64>, labels: Option<&[u8]>, path: impl AsRef<Path>) -> Result<()> {
    super::write_bytes(path, &encode_ply(cloud, labels)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ascii_cloud_with_extra_element() {
        let text = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty int a\nend_header\n0 0 1 255\n0.5 -0.25 2 0\n7\n";
        let c = decode_ply(text.as_bytes()).unwrap();
        assert_eq!(c.cloud.points, vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.5, -0.25, 2.0)]);
        assert!(c.cloud.pixels.is_none());
        assert!(c.labels.is_none());
    }

    #[test]
    fn rejects_structural_errors() {
        assert!(decode_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nend_header\n1\n").is_err());
        assert!(decode_ply(
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2\n"
        )
        .is_err());
        assert!(decode_ply(b"ply\nformat ascii 1.0\nelement vertex 1\nproperty list uchar int idx\nend_header\n").is_err());
        assert!(decode_ply(b"plx\nformat ascii 1.0\nend_header\n").is_err());
        assert!(decode_ply(
            b"ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\nnan 0 0\n"
        )
        .is_err());
    }

    #[test]
    fn big_endian_floats() {
        let mut b =
            b"ply\nformat binary_big_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n"
                .to_vec();
        for v in [1.5f32, -2.0, 0.25] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        assert_eq!(decode_ply(&b).unwrap().cloud.points[0], Vec3::new(1.5, -2.0, 0.25));
    }

    proptest! {
        #[test]
        fn binary_round_trip(pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..5.0, 0u32..640, 0u32..480, any::<u8>()), 0..40)) {
            let points: Vec<_> = pts.iter().map(|t| Vec3::new(t.0, t.1, t.2)).collect();
            let pixels: Vec<_> = pts.iter().map(|t| (t.3, t.4)).collect();
            let labels: Vec<u8> = pts.iter().map(|t| t.5).collect();
            let cloud = PointCloud::with_pixels(points, pixels).unwrap();
            let bytes = encode_ply(&cloud, Some(&labels)).unwrap();
            let back = decode_ply(&bytes).unwrap();
            prop_assert_eq!(&back.cloud, &cloud);
            prop_assert_eq!(back.labels.as_deref(), Some(&labels[..]));
        }
    }
}
