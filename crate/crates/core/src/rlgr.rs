//! Backward-adaptive run-length Golomb–Rice coding of signed integers.
//!
//! Two modes driven by an adaptive parameter k = kp≫3. While k > 0 the
//! coder is in run mode: a complete run of 2ᵏ zeros costs a single 0 bit
//! (and k grows), while a 1 bit terminates a partial run and carries the
//! run length, the ending value's sign, and its magnitude−1 as a
//! Golomb–Rice code (and k shrinks). At k = 0 each value is zigzag-mapped
//! and Golomb–Rice coded directly. The Rice parameter kr = krp≫3 adapts
//! from the coded quotients; quotients the unary prefix would make
//! unreasonably long are escaped into a length-prefixed binary form. All
//! adaptation is backward (driven by emitted symbols only), so the decoder
//! tracks state with no side information.
//!
//! A run still open at the end of input is flushed as one final 0 bit even
//! when shorter than 2ᵏ; the decoder never materializes more values than
//! the count it was asked for, which makes the flush unambiguous.

use crate::bits::{BitReader, BitWriter, BitsError};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RlgrError {
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error("encoded data is inconsistent with the expected value count")]
    Corrupt,
}

const KPMAX: u32 = 80;
const LSGR: u32 = 3;
const UP_GR: u32 = 4;
const DN_GR: u32 = 6;
const UQ_GR: u32 = 3;
const DQ_GR: u32 = 3;
const KP_INIT: u32 = 8;
const KRP_INIT: u32 = 8;
/// Quotients at or above this never go out in unary: an escape prefix of
/// exactly this many 1 bits announces a length-prefixed binary value
/// instead, so one outlier costs at most ~120 bits rather than `value ≫
/// kr` of them.
const GR_ESCAPE: u64 = 48;

#[inline]
fn zigzag(v: i64) -> u64 {
    // Shift in u64 so the sign bit of v cannot overflow.
    ((v as u64) << 1) ^ ((v >> 63) as u64)
}

#[inline]
fn unzigzag(u: u64) -> i64 {
    ((u >> 1) as i64) ^ -((u & 1) as i64)
}

/// Adaptive Golomb–Rice state shared by both directions.
struct GrState {
    krp: u32,
}

impl GrState {
    fn new() -> Self {
        GrState { krp: KRP_INIT }
    }

    #[inline]
    fn kr(&self) -> u32 {
        self.krp >> LSGR
    }

    /// Backward adaptation from the quotient of the just-coded value.
    #[inline]
    fn adapt(&mut self, quotient: u64) {
        if quotient == 0 {
            self.krp = self.krp.saturating_sub(2);
        } else if quotient > 1 {
            self.krp = (self.krp + quotient.min(KPMAX as u64) as u32).min(KPMAX);
        }
    }

    fn encode(&mut self, w: &mut BitWriter, value: u64) {
        let kr = self.kr();
        let quotient = value >> kr;
        if quotient < GR_ESCAPE {
            for _ in 0..quotient {
                w.push_bit(true);
            }
            w.push_bit(false);
            w.push_bits(value & ((1u64 << kr) - 1), kr);
        } else {
            for _ in 0..GR_ESCAPE {
                w.push_bit(true);
            }
            w.push_bit(false);
            let width = 64 - value.leading_zeros(); // value ≥ GR_ESCAPE > 0
            w.push_bits(u64::from(width - 1), 6);
            w.push_bits(value, width);
        }
        self.adapt(quotient);
    }

    fn decode(&mut self, r: &mut BitReader) -> Result<u64, RlgrError> {
        let kr = self.kr();
        let mut quotient = 0u64;
        while quotient < GR_ESCAPE && r.read_bit()? {
            quotient += 1;
        }
        let value = if quotient == GR_ESCAPE {
            // The escape prefix still carries its terminating 0 bit.
            if r.read_bit()? {
                return Err(RlgrError::Corrupt);
            }
            let width = r.read_bits(6)? as u32 + 1;
            r.read_bits(width)?
        } else {
            quotient << kr | r.read_bits(kr)?
        };
        self.adapt(value >> kr);
        Ok(value)
    }
}

/// Encodes `values` into a padded byte buffer plus its exact bit length.
/// Any value above `i64::MIN` is codable (the magnitude side of the run
/// terminator cannot carry `i64::MIN`); quantized coefficients sit many
/// orders of magnitude inside that bound.
pub fn rlgr_encode(values: &[i64]) -> (Vec<u8>, u64) {
    debug_assert!(values.iter().all(|&v| v > i64::MIN));
    let mut w = BitWriter::new();
    let mut kp = KP_INIT;
    let mut gr = GrState::new();

    let mut i = 0;
    while i < values.len() {
        let k = kp >> LSGR;
        if k > 0 {
            // Run mode: count zeros ahead, emit complete runs of 2^k.
            let mut run = 0usize;
            while i + run < values.len() && values[i + run] == 0 {
                run += 1;
            }
            loop {
                let k_now = kp >> LSGR;
                let full = 1usize << k_now;
                if run < full {
                    break;
                }
                w.push_bit(false);
                kp = (kp + UP_GR).min(KPMAX);
                i += full;
                run -= full;
            }
            if i + run == values.len() {
                if run > 0 {
                    // Flush the partial trailing run as one complete-run
                    // bit; the decoder clamps to the value count.
                    w.push_bit(false);
                }
                i += run;
            } else {
                // Partial run terminated by a nonzero value.
                let k_now = kp >> LSGR;
                let v = values[i + run];
                w.push_bit(true);
                w.push_bits(run as u64, k_now);
                w.push_bit(v < 0);
                gr.encode(&mut w, v.unsigned_abs() - 1);
                kp = kp.saturating_sub(DN_GR);
                i += run + 1;
            }
        } else {
            // Golomb–Rice mode: every value coded individually.
            let u = zigzag(values[i]);
            gr.encode(&mut w, u);
            if u == 0 {
                kp = (kp + UQ_GR).min(KPMAX);
            } else {
                kp = kp.saturating_sub(DQ_GR);
            }
            i += 1;
        }
    }

    let (bytes, bit_len) = w.finish();
    (bytes, bit_len)
}

/// Decodes exactly `count` values from `bytes`/`bit_len`.
pub fn rlgr_decode(bytes: &[u8], bit_len: u64, count: usize) -> Result<Vec<i64>, RlgrError> {
    let mut r = BitReader::new(bytes, bit_len);
    let mut kp = KP_INIT;
    let mut gr = GrState::new();
    let mut out = Vec::with_capacity(count);

    while out.len() < count {
        let k = kp >> LSGR;
        if k > 0 {
            if !r.read_bit()? {
                // Complete run, clamped at the tail where the encoder may
                // have flushed a shorter one.
                let full = (1usize << k).min(count - out.len());
                out.extend(std::iter::repeat_n(0, full));
                kp = (kp + UP_GR).min(KPMAX);
            } else {
                let run = r.read_bits(k)? as usize;
                if out.len() + run + 1 > count {
                    return Err(RlgrError::Corrupt);
                }
                out.extend(std::iter::repeat_n(0, run));
                let negative = r.read_bit()?;
                let mag = gr
                    .decode(&mut r)?
                    .checked_add(1)
                    .ok_or(RlgrError::Corrupt)?;
                if mag > i64::MAX as u64 {
                    return Err(RlgrError::Corrupt);
                }
                let v = mag as i64;
                out.push(if negative { -v } else { v });
                kp = kp.saturating_sub(DN_GR);
            }
        } else {
            let u = gr.decode(&mut r)?;
            out.push(unzigzag(u));
            if u == 0 {
                kp = (kp + UQ_GR).min(KPMAX);
            } else {
                kp = kp.saturating_sub(DQ_GR);
            }
        }
    }
    Ok(out)
}
