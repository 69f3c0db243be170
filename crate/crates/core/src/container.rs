//! Bitstream container: stream header plus per-frame records.
//!
//! All multi-byte fields are little-endian. Layout:
//!
//! ```text
//! header: "PCAC" | version u8 | block_size u8 | gof_size u16 |
//!         frame_count u32 | qstep f64-bits | kmax u8 |
//!         overhead_codec_id u8 | basis_build_tag u32
//! frame:  frame_type u8 | block_count u32 |
//!         mv_compressed_len u32 + bytes | k_compressed_len u32 + bytes |
//!         3 × (coeff_bit_len u64 + bytes padded to whole bytes)
//! ```
//!
//! The container is purely structural: it checks lengths and tags, while
//! semantic validation (expected stream sizes per block count, intra
//! frames carrying no motion) belongs to the codec that owns the geometry.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::overhead::OverheadCodec;

pub const MAGIC: [u8; 4] = *b"PCAC";
pub const FORMAT_VERSION: u8 = 1;
/// Serialized header size in bytes.
pub const HEADER_BYTES: u64 = 26;

/// Upper bound on any embedded stream length; a corrupt length field fails
/// fast instead of attempting an absurd allocation.
const MAX_STREAM_BYTES: u64 = 1 << 30;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic {0:02x?}, not an attribute bitstream")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("bitstream truncated")]
    Truncated,
    #[error("implausible embedded stream length {0}")]
    ImplausibleLength(u64),
    #[error("invalid frame type byte {0}")]
    InvalidFrameType(u8),
    #[error("unknown overhead codec id {0}")]
    UnknownOverheadCodec(u8),
    #[error("frame declares {got} blocks but geometry implies {expected}")]
    BlockCountMismatch { got: u32, expected: u32 },
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for ContainerError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            ContainerError::Truncated
        } else {
            ContainerError::Io(e)
        }
    }
}

/// Sequence-level parameters, written once at the front of the stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamHeader {
    pub block_size: u8,
    pub gof_size: u16,
    pub frame_count: u32,
    pub qstep: f64,
    pub kmax: u8,
    pub overhead_codec: OverheadCodec,
    /// Identifies the transform-basis construction of the encoding build;
    /// a differing decoder build cannot promise bit-exact reconstructions.
    pub basis_build_tag: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameType {
    Intra,
    Inter,
}

impl FrameType {
    fn to_byte(self) -> u8 {
        match self {
            FrameType::Intra => 0,
            FrameType::Inter => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self, ContainerError> {
        match b {
            0 => Ok(FrameType::Intra),
            1 => Ok(FrameType::Inter),
            other => Err(ContainerError::InvalidFrameType(other)),
        }
    }
}

/// One entropy-coded coefficient plane with its exact bit length.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CoeffPlane {
    pub bytes: Vec<u8>,
    pub bit_len: u64,
}

/// Everything the decoder needs for one frame, given the geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBitstream {
    pub frame_type: FrameType,
    pub block_count: u32,
    /// Compressed motion vectors: 3 × i16 per block, Morton block order.
    /// Empty for intra frames.
    pub mv_stream: Vec<u8>,
    /// Compressed filter counts: one u8 per block, Morton block order.
    /// Empty for intra frames.
    pub k_stream: Vec<u8>,
    /// Y, U, V coefficient planes.
    pub coeff_planes: [CoeffPlane; 3],
}

impl FrameBitstream {
    /// Exact serialized size in bytes.
    pub fn serialized_bytes(&self) -> u64 {
        let mut total = 1 + 4; // frame type + block count
        total += 4 + self.mv_stream.len() as u64;
        total += 4 + self.k_stream.len() as u64;
        for plane in &self.coeff_planes {
            total += 8 + plane.bytes.len() as u64;
        }
        total
    }

    /// Exact serialized size in bits; this is the frame's contribution to
    /// the rate accounting.
    pub fn total_bits(&self) -> u64 {
        self.serialized_bytes() * 8
    }
}

pub fn write_header(sink: &mut impl Write, h: &StreamHeader) -> Result<(), ContainerError> {
    sink.write_all(&MAGIC)?;
    sink.write_all(&[FORMAT_VERSION, h.block_size])?;
    sink.write_all(&h.gof_size.to_le_bytes())?;
    sink.write_all(&h.frame_count.to_le_bytes())?;
    sink.write_all(&h.qstep.to_bits().to_le_bytes())?;
    sink.write_all(&[h.kmax, h.overhead_codec.id()])?;
    sink.write_all(&h.basis_build_tag.to_le_bytes())?;
    Ok(())
}

pub fn read_header(source: &mut impl Read) -> Result<StreamHeader, ContainerError> {
    let mut magic = [0u8; 4];
    source.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(ContainerError::BadMagic(magic));
    }
    let version = read_u8(source)?;
    if version != FORMAT_VERSION {
        return Err(ContainerError::UnsupportedVersion(version));
    }
    let block_size = read_u8(source)?;
    let gof_size = u16::from_le_bytes(read_array(source)?);
    let frame_count = u32::from_le_bytes(read_array(source)?);
    let qstep = f64::from_bits(u64::from_le_bytes(read_array(source)?));
    let kmax = read_u8(source)?;
    let codec_id = read_u8(source)?;
    let overhead_codec = OverheadCodec::from_id(codec_id)
        .map_err(|_| ContainerError::UnknownOverheadCodec(codec_id))?;
    let basis_build_tag = u32::from_le_bytes(read_array(source)?);
    Ok(StreamHeader {
        block_size,
        gof_size,
        frame_count,
        qstep,
        kmax,
        overhead_codec,
        basis_build_tag,
    })
}

pub fn write_frame(sink: &mut impl Write, fb: &FrameBitstream) -> Result<(), ContainerError> {
    sink.write_all(&[fb.frame_type.to_byte()])?;
    sink.write_all(&fb.block_count.to_le_bytes())?;
    sink.write_all(&(fb.mv_stream.len() as u32).to_le_bytes())?;
    sink.write_all(&fb.mv_stream)?;
    sink.write_all(&(fb.k_stream.len() as u32).to_le_bytes())?;
    sink.write_all(&fb.k_stream)?;
    for plane in &fb.coeff_planes {
        debug_assert_eq!(plane.bytes.len() as u64, plane.bit_len.div_ceil(8));
        sink.write_all(&plane.bit_len.to_le_bytes())?;
        sink.write_all(&plane.bytes)?;
    }
    Ok(())
}

/// Reads one frame record. When `expected_blocks` is given (derived from
/// the losslessly shared geometry) the declared block count must match.
pub fn read_frame(
    source: &mut impl Read,
    expected_blocks: Option<u32>,
) -> Result<FrameBitstream, ContainerError> {
    let frame_type = FrameType::from_byte(read_u8(source)?)?;
    let block_count = u32::from_le_bytes(read_array(source)?);
    if let Some(expected) = expected_blocks {
        if block_count != expected {
            return Err(ContainerError::BlockCountMismatch {
                got: block_count,
                expected,
            });
        }
    }
    let mv_stream = read_sized(source)?;
    let k_stream = read_sized(source)?;
    let mut coeff_planes: [CoeffPlane; 3] = Default::default();
    for plane in coeff_planes.iter_mut() {
        let bit_len = u64::from_le_bytes(read_array(source)?);
        let byte_len = bit_len.div_ceil(8);
        if byte_len > MAX_STREAM_BYTES {
            return Err(ContainerError::ImplausibleLength(byte_len));
        }
        let mut bytes = vec![0u8; byte_len as usize];
        source.read_exact(&mut bytes)?;
        *plane = CoeffPlane { bytes, bit_len };
    }
    Ok(FrameBitstream {
        frame_type,
        block_count,
        mv_stream,
        k_stream,
        coeff_planes,
    })
}

/// Writes the header followed by every frame record.
pub fn write_stream(
    sink: &mut impl Write,
    header: &StreamHeader,
    frames: &[FrameBitstream],
) -> Result<(), ContainerError> {
    write_header(sink, header)?;
    for fb in frames {
        write_frame(sink, fb)?;
    }
    Ok(())
}

/// Reads a whole stream written by [`write_stream`]: the header, then as
/// many frame records as it announces.
pub fn read_stream(
    source: &mut impl Read,
) -> Result<(StreamHeader, Vec<FrameBitstream>), ContainerError> {
    let header = read_header(source)?;
    let mut frames = Vec::with_capacity(header.frame_count.min(4096) as usize);
    for _ in 0..header.frame_count {
        frames.push(read_frame(source, None)?);
    }
    Ok((header, frames))
}

fn read_u8(source: &mut impl Read) -> Result<u8, ContainerError> {
    let mut b = [0u8; 1];
    source.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_array<const N: usize>(source: &mut impl Read) -> Result<[u8; N], ContainerError> {
    let mut buf = [0u8; N];
    source.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_sized(source: &mut impl Read) -> Result<Vec<u8>, ContainerError> {
    let len = u32::from_le_bytes(read_array(source)?) as u64;
    if len > MAX_STREAM_BYTES {
        return Err(ContainerError::ImplausibleLength(len));
    }
    let mut bytes = vec![0u8; len as usize];
    source.read_exact(&mut bytes)?;
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn sample_header() -> StreamHeader {
        StreamHeader {
            block_size: 16,
            gof_size: 8,
            frame_count: 24,
            qstep: 0.1,
            kmax: 5,
            overhead_codec: OverheadCodec::Lzma,
            basis_build_tag: 0x0100_0023,
        }
    }

    fn random_frame(rng: &mut StdRng, frame_type: FrameType) -> FrameBitstream {
        let blocks = rng.random_range(1..50u32);
        let side =
            |rng: &mut StdRng, n: usize| -> Vec<u8> { (0..n).map(|_| rng.random()).collect() };
        let (mv, k) = match frame_type {
            FrameType::Intra => (Vec::new(), Vec::new()),
            FrameType::Inter => (side(rng, blocks as usize * 6), side(rng, blocks as usize)),
        };
        let plane = |rng: &mut StdRng| {
            let bit_len = rng.random_range(0..200u64);
            CoeffPlane {
                bytes: side(rng, bit_len.div_ceil(8) as usize),
                bit_len,
            }
        };
        FrameBitstream {
            frame_type,
            block_count: blocks,
            mv_stream: mv,
            k_stream: k,
            coeff_planes: [plane(rng), plane(rng), plane(rng)],
        }
    }

    #[test]
    fn header_round_trips_exactly() {
        let h = sample_header();
        let mut buf = Vec::new();
        write_header(&mut buf, &h).unwrap();
        assert_eq!(buf.len() as u64, HEADER_BYTES);
        let back = read_header(&mut buf.as_slice()).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.qstep.to_bits(), h.qstep.to_bits());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut buf = Vec::new();
        write_header(&mut buf, &sample_header()).unwrap();
        buf[0] = b'X';
        assert!(matches!(
            read_header(&mut buf.as_slice()),
            Err(ContainerError::BadMagic(_))
        ));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut buf = Vec::new();
        write_header(&mut buf, &sample_header()).unwrap();
        buf[4] = FORMAT_VERSION + 1;
        assert!(matches!(
            read_header(&mut buf.as_slice()),
            Err(ContainerError::UnsupportedVersion(_))
        ));
    }

    #[test]
    fn frames_round_trip_field_by_field() {
        let mut rng = StdRng::seed_from_u64(113);
        for _ in 0..50 {
            let ft = if rng.random_bool(0.5) {
                FrameType::Intra
            } else {
                FrameType::Inter
            };
            let fb = random_frame(&mut rng, ft);
            let mut buf = Vec::new();
            write_frame(&mut buf, &fb).unwrap();
            assert_eq!(buf.len() as u64, fb.serialized_bytes());
            assert_eq!(fb.total_bits(), buf.len() as u64 * 8);
            let back = read_frame(&mut buf.as_slice(), Some(fb.block_count)).unwrap();
            assert_eq!(back, fb);
        }
    }

    #[test]
    fn intra_frames_carry_no_side_streams() {
        let mut rng = StdRng::seed_from_u64(127);
        let fb = random_frame(&mut rng, FrameType::Intra);
        assert!(fb.mv_stream.is_empty() && fb.k_stream.is_empty());
        let mut buf = Vec::new();
        write_frame(&mut buf, &fb).unwrap();
        let back = read_frame(&mut buf.as_slice(), None).unwrap();
        assert!(back.mv_stream.is_empty() && back.k_stream.is_empty());
    }

    #[test]
    fn truncation_is_detected() {
        let mut rng = StdRng::seed_from_u64(131);
        let fb = random_frame(&mut rng, FrameType::Inter);
        let mut buf = Vec::new();
        write_frame(&mut buf, &fb).unwrap();
        for cut in [1, buf.len() / 2, buf.len() - 1] {
            assert!(matches!(
                read_frame(&mut &buf[..cut], None),
                Err(ContainerError::Truncated)
            ));
        }
    }

    #[test]
    fn block_count_mismatch_is_detected() {
        let mut rng = StdRng::seed_from_u64(137);
        let fb = random_frame(&mut rng, FrameType::Inter);
        let mut buf = Vec::new();
        write_frame(&mut buf, &fb).unwrap();
        assert!(matches!(
            read_frame(&mut buf.as_slice(), Some(fb.block_count + 1)),
            Err(ContainerError::BlockCountMismatch { .. })
        ));
    }

    #[test]
    fn whole_stream_round_trips() {
        let mut rng = StdRng::seed_from_u64(139);
        let h = sample_header();
        let frames: Vec<FrameBitstream> = (0..4)
            .map(|i| {
                random_frame(
                    &mut rng,
                    if i == 0 {
                        FrameType::Intra
                    } else {
                        FrameType::Inter
                    },
                )
            })
            .collect();
        let mut buf = Vec::new();
        write_header(&mut buf, &h).unwrap();
        for fb in &frames {
            write_frame(&mut buf, fb).unwrap();
        }
        let mut src = buf.as_slice();
        let hh = read_header(&mut src).unwrap();
        assert_eq!(hh, h);
        for fb in &frames {
            let back = read_frame(&mut src, Some(fb.block_count)).unwrap();
            assert_eq!(&back, fb);
        }
        assert!(src.is_empty());
    }
}
