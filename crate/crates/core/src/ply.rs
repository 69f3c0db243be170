//! Minimal PLY reader/writer for voxelized colored point clouds.
//!
//! Reads ASCII and binary little-endian files whose vertex element carries
//! x, y, z coordinates (any scalar type, but integer-valued) and
//! red, green, blue components in [0, 255]; extra scalar vertex properties
//! are skipped. Writes binary little-endian with float coordinates and
//! 8-bit color, which round-trips through the reader.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::color::{rgb_to_yuv, yuv_to_rgb};
use crate::frame::{FrameError, PointCloudFrame};

#[derive(Debug, Error)]
pub enum PlyError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),
    #[error("file ends before all vertex data")]
    Truncated,
    #[error("malformed vertex data: {0}")]
    MalformedData(String),
    #[error("coordinate {0} is not an integer voxel position")]
    NonIntegerCoordinate(f64),
    #[error("color component {0} is not an integer in [0, 255]")]
    BadColorValue(f64),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ScalarType {
    U8,
    I8,
    U16,
    I16,
    U32,
    I32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(token: &str) -> Option<Self> {
        Some(match token {
            "uchar" | "uint8" => ScalarType::U8,
            "char" | "int8" => ScalarType::I8,
            "ushort" | "uint16" => ScalarType::U16,
            "short" | "int16" => ScalarType::I16,
            "uint" | "uint32" => ScalarType::U32,
            "int" | "int32" => ScalarType::I32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::U8 | ScalarType::I8 => 1,
            ScalarType::U16 | ScalarType::I16 => 2,
            ScalarType::U32 | ScalarType::I32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            ScalarType::U8 => bytes[0] as f64,
            ScalarType::I8 => bytes[0] as i8 as f64,
            ScalarType::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
}

struct VertexLayout {
    format: Format,
    count: usize,
    properties: Vec<(String, ScalarType)>,
}

impl VertexLayout {
    fn index_of(&self, name: &str) -> Option<usize> {
        self.properties.iter().position(|(n, _)| n == name)
    }

    fn stride(&self) -> usize {
        self.properties.iter().map(|(_, t)| t.size()).sum()
    }

    fn offset_of(&self, idx: usize) -> usize {
        self.properties[..idx].iter().map(|(_, t)| t.size()).sum()
    }
}

/// Loads a colored frame; red/green/blue are required.
pub fn load_ply(path: &Path, frame_index: usize) -> Result<PointCloudFrame, PlyError> {
    load_impl(path, frame_index, true)
}

/// Loads a frame for its geometry; colors are used when present and
/// default to neutral (Y=0, U=V=128) otherwise.
pub fn load_ply_geometry(path: &Path, frame_index: usize) -> Result<PointCloudFrame, PlyError> {
    load_impl(path, frame_index, false)
}

fn load_impl(
    path: &Path,
    frame_index: usize,
    require_colors: bool,
) -> Result<PointCloudFrame, PlyError> {
    let raw = fs::read(path)?;
    let (layout, body) = parse_header(&raw)?;

    let xyz = ["x", "y", "z"].map(|n| layout.index_of(n));
    let (xi, yi, zi) = match xyz {
        [Some(x), Some(y), Some(z)] => (x, y, z),
        _ => {
            return Err(PlyError::MalformedHeader(
                "vertex element lacks x/y/z properties".into(),
            ))
        }
    };
    let rgb = ["red", "green", "blue"].map(|n| layout.index_of(n));
    let color_idx = match rgb {
        [Some(r), Some(g), Some(b)] => Some((r, g, b)),
        _ if require_colors => {
            return Err(PlyError::MalformedHeader(
                "vertex element lacks red/green/blue properties".into(),
            ))
        }
        _ => None,
    };

    let rows = read_rows(&layout, body)?;
    let mut coords = Vec::with_capacity(layout.count);
    let mut colors = Vec::with_capacity(layout.count);
    for row in rows {
        coords.push([
            integer_coord(row[xi])?,
            integer_coord(row[yi])?,
            integer_coord(row[zi])?,
        ]);
        colors.push(match color_idx {
            Some((r, g, b)) => rgb_to_yuv([
                color_byte(row[r])?,
                color_byte(row[g])?,
                color_byte(row[b])?,
            ]),
            None => [0.0, 128.0, 128.0],
        });
    }
    Ok(PointCloudFrame::new(frame_index, coords, colors)?)
}

fn integer_coord(v: f64) -> Result<i32, PlyError> {
    if v.fract() != 0.0 || !(i32::MIN as f64..=i32::MAX as f64).contains(&v) {
        return Err(PlyError::NonIntegerCoordinate(v));
    }
    Ok(v as i32)
}

fn color_byte(v: f64) -> Result<u8, PlyError> {
    if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
        return Err(PlyError::BadColorValue(v));
    }
    Ok(v as u8)
}

/// Splits the header from the body and parses the vertex layout. The
/// vertex element must be the first element so the body offset of its data
/// is known without decoding other elements; trailing elements are ignored.
fn parse_header(raw: &[u8]) -> Result<(VertexLayout, &[u8]), PlyError> {
    let marker: &[u8] = b"end_header\n";
    let header_end = raw
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| PlyError::MalformedHeader("no end_header line".into()))?;
    let header = std::str::from_utf8(&raw[..header_end])
        .map_err(|_| PlyError::MalformedHeader("header is not valid text".into()))?;
    let body = &raw[header_end + marker.len()..];

    let mut lines = header.lines().map(|l| l.trim_end_matches('\r'));
    if lines.next().map(str::trim) != Some("ply") {
        return Err(PlyError::MalformedHeader("missing ply signature".into()));
    }

    let mut format = None;
    let mut layout: Option<VertexLayout> = None;
    let mut past_vertex_element = false;
    for line in lines {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                format = Some(match tok.next() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLe,
                    Some(other) => {
                        return Err(PlyError::UnsupportedLayout(format!(
                            "format {other} not supported"
                        )))
                    }
                    None => return Err(PlyError::MalformedHeader("bare format line".into())),
                });
            }
            Some("comment") | Some("obj_info") | Some("") | None => {}
            Some("element") => {
                let name = tok.next().unwrap_or("");
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| PlyError::MalformedHeader("bad element count".into()))?;
                if name == "vertex" {
                    if layout.is_some() {
                        return Err(PlyError::MalformedHeader("duplicate vertex element".into()));
                    }
                    layout = Some(VertexLayout {
                        format: Format::Ascii, // fixed up below
                        count,
                        properties: Vec::new(),
                    });
                } else if layout.is_none() {
                    return Err(PlyError::UnsupportedLayout(format!(
                        "element {name} precedes vertex data"
                    )));
                } else {
                    past_vertex_element = true;
                }
            }
            Some("property") => {
                if past_vertex_element {
                    continue; // properties of trailing elements we ignore
                }
                let Some(layout) = layout.as_mut() else {
                    return Err(PlyError::MalformedHeader(
                        "property before any element".into(),
                    ));
                };
                let ty_tok = tok.next().unwrap_or("");
                if ty_tok == "list" {
                    return Err(PlyError::UnsupportedLayout(
                        "list-typed vertex properties".into(),
                    ));
                }
                let ty = ScalarType::parse(ty_tok).ok_or_else(|| {
                    PlyError::MalformedHeader(format!("unknown property type {ty_tok}"))
                })?;
                let name = tok
                    .next()
                    .ok_or_else(|| PlyError::MalformedHeader("unnamed property".into()))?;
                layout.properties.push((name.to_string(), ty));
            }
            Some(other) => {
                return Err(PlyError::MalformedHeader(format!(
                    "unrecognized header line: {other}"
                )))
            }
        }
    }

    let format = format.ok_or_else(|| PlyError::MalformedHeader("no format line".into()))?;
    let mut layout = layout.ok_or_else(|| PlyError::MalformedHeader("no vertex element".into()))?;
    layout.format = format;
    Ok((layout, body))
}

/// Reads all vertex rows as f64 property values.
fn read_rows(layout: &VertexLayout, body: &[u8]) -> Result<Vec<Vec<f64>>, PlyError> {
    let nprops = layout.properties.len();
    let mut rows = Vec::with_capacity(layout.count);
    match layout.format {
        Format::Ascii => {
            let text = std::str::from_utf8(body)
                .map_err(|_| PlyError::MalformedData("vertex text is not valid utf-8".into()))?;
            let mut tokens = text.split_whitespace();
            for _ in 0..layout.count {
                let mut row = Vec::with_capacity(nprops);
                for (name, _) in &layout.properties {
                    let tok = tokens.next().ok_or(PlyError::Truncated)?;
                    let v: f64 = tok.parse().map_err(|_| {
                        PlyError::MalformedData(format!("bad value {tok:?} for {name}"))
                    })?;
                    row.push(v);
                }
                rows.push(row);
            }
        }
        Format::BinaryLe => {
            let stride = layout.stride();
            if body.len() < stride * layout.count {
                return Err(PlyError::Truncated);
            }
            for i in 0..layout.count {
                let base = i * stride;
                let row = (0..nprops)
                    .map(|p| {
                        let off = base + layout.offset_of(p);
                        layout.properties[p].1.read_le(&body[off..])
                    })
                    .collect();
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Writes a frame as binary little-endian PLY: float x/y/z plus uchar
/// red/green/blue, converting the YUV attributes back to RGB.
pub fn save_ply(path: &Path, frame: &PointCloudFrame) -> Result<(), PlyError> {
    let mut out = Vec::with_capacity(128 + frame.len() * 15);
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {}\n", frame.len()).as_bytes());
    out.extend_from_slice(
        b"property float x\nproperty float y\nproperty float z\n\
          property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
    );
    for (coord, yuv) in frame.coords().iter().zip(frame.colors()) {
        for &c in coord {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
        out.extend_from_slice(&yuv_to_rgb(*yuv));
    }
    fs::write(path, out)?;
    Ok(())
}
