//! Lossless compression of the small per-frame side streams (motion
//! vectors and filter counts), selected by a one-byte codec id carried in
//! the stream header.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OverheadError {
    #[error("unknown overhead codec id {0}")]
    UnknownCodec(u8),
    #[error("stored stream is {got} bytes, expected {expected}")]
    StoredLengthMismatch { got: usize, expected: usize },
    #[error("decompressed stream is {got} bytes, expected {expected}")]
    DecompressedLengthMismatch { got: usize, expected: usize },
    #[error("corrupt compressed stream: {0}")]
    CorruptStream(String),
}

/// How the side streams are packed. `Store` is the mandatory passthrough;
/// `Lzma` trades a little CPU for markedly smaller overhead.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OverheadCodec {
    Store,
    Lzma,
}

impl OverheadCodec {
    pub fn id(self) -> u8 {
        match self {
            OverheadCodec::Store => 0,
            OverheadCodec::Lzma => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Self, OverheadError> {
        match id {
            0 => Ok(OverheadCodec::Store),
            1 => Ok(OverheadCodec::Lzma),
            other => Err(OverheadError::UnknownCodec(other)),
        }
    }
}

/// Compresses `data`; deterministic for a fixed input and codec.
pub fn overhead_compress(codec: OverheadCodec, data: &[u8]) -> Vec<u8> {
    match codec {
        OverheadCodec::Store => data.to_vec(),
        OverheadCodec::Lzma => {
            let mut out = Vec::new();
            lzma_rs::lzma_compress(&mut &data[..], &mut out)
                .expect("in-memory compression cannot fail");
            out
        }
    }
}

/// Decompresses `data`, insisting on exactly `expected_len` output bytes.
pub fn overhead_decompress(
    codec: OverheadCodec,
    data: &[u8],
    expected_len: usize,
) -> Result<Vec<u8>, OverheadError> {
    let out = match codec {
        OverheadCodec::Store => {
            if data.len() != expected_len {
                return Err(OverheadError::StoredLengthMismatch {
                    got: data.len(),
                    expected: expected_len,
                });
            }
            data.to_vec()
        }
        OverheadCodec::Lzma => {
            let mut out = Vec::new();
            lzma_rs::lzma_decompress(&mut &data[..], &mut out)
                .map_err(|e| OverheadError::CorruptStream(format!("{e:?}")))?;
            out
        }
    };
    if out.len() != expected_len {
        return Err(OverheadError::DecompressedLengthMismatch {
            got: out.len(),
            expected: expected_len,
        });
    }
    Ok(out)
}
