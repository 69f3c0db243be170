//! MSB-first bit-level reading and writing over byte buffers.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitsError {
    #[error("bitstream ended while more bits were expected")]
    UnexpectedEnd,
}

/// Accumulates bits most-significant-first into a byte buffer.
#[derive(Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    bit_len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push_bit(&mut self, bit: bool) {
        let offset = (self.bit_len % 8) as u8;
        if offset == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> offset;
        }
        self.bit_len += 1;
    }

    /// Pushes the low `count` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, count: u32) {
        debug_assert!(count <= 64);
        for i in (0..count).rev() {
            self.push_bit((value >> i) & 1 == 1);
        }
    }

    #[inline]
    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    /// The buffer (zero-padded to a whole byte) and the exact bit count.
    pub fn finish(self) -> (Vec<u8>, u64) {
        (self.bytes, self.bit_len)
    }
}

/// Reads bits most-significant-first; refuses to read past `bit_len` even
/// when padding bytes would physically allow it.
pub struct BitReader<'a> {
    bytes: &'a [u8],
    bit_len: u64,
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], bit_len: u64) -> Self {
        debug_assert!(bit_len <= bytes.len() as u64 * 8);
        BitReader {
            bytes,
            bit_len,
            pos: 0,
        }
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<bool, BitsError> {
        if self.pos >= self.bit_len {
            return Err(BitsError::UnexpectedEnd);
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = byte >> (7 - (self.pos % 8) as u8) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, count: u32) -> Result<u64, BitsError> {
        debug_assert!(count <= 64);
        let mut value = 0u64;
        for _ in 0..count {
            value = value << 1 | u64::from(self.read_bit()?);
        }
        Ok(value)
    }

    #[inline]
    pub fn bits_left(&self) -> u64 {
        self.bit_len - self.pos
    }
}
