//! Rate/distortion measurement over coded sequences.
//!
//! Distortion is luma PSNR computed from per-frame normalized squared
//! error averaged across the sequence; rate is bits per voxel over the
//! whole stream, with the stream header charged to the first frame.

use thiserror::Error;

use crate::codec::{encode_sequence, CodecConfig, CodecError, FrameStats};
use crate::frame::{FrameSequence, PointCloudFrame};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("sequences have {a} and {b} frames")]
    FrameCountMismatch { a: usize, b: usize },
    #[error("frame {frame}: point counts differ")]
    PointCountMismatch { frame: usize },
    #[error("frame {frame}: geometries differ")]
    CoordinateMismatch { frame: usize },
    #[error("csv line {line}: {message}")]
    CsvParse { line: usize, message: String },
}

/// Luma PSNR in dB between two sequences of the same geometry: the
/// per-frame squared luma error is normalized by 255²·(points in that
/// frame), averaged across frames, and converted to dB. Identical
/// sequences give +∞.
pub fn compute_psnr_y(
    original: &[PointCloudFrame],
    reconstructed: &[PointCloudFrame],
) -> Result<f64, MetricsError> {
    if original.len() != reconstructed.len() {
        return Err(MetricsError::FrameCountMismatch {
            a: original.len(),
            b: reconstructed.len(),
        });
    }
    let mut acc = 0.0;
    for (t, (org, rec)) in original.iter().zip(reconstructed).enumerate() {
        if org.len() != rec.len() {
            return Err(MetricsError::PointCountMismatch { frame: t });
        }
        if org.coords() != rec.coords() {
            return Err(MetricsError::CoordinateMismatch { frame: t });
        }
        let mut sse = 0.0;
        for (a, b) in org.colors().iter().zip(rec.colors()) {
            let d = a[0] - b[0];
            sse += d * d;
        }
        acc += sse / (255.0 * 255.0 * org.len() as f64);
    }
    let mean = acc / original.len() as f64;
    if mean == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mean.log10())
}

/// Bits per voxel: total coded bits over total points, both summed across
/// the whole sequence.
pub fn compute_bpv(stats: &[FrameStats]) -> f64 {
    let bits: u64 = stats.iter().map(|s| s.total_bits).sum();
    let points: usize = stats.iter().map(|s| s.point_count).sum();
    bits as f64 / points as f64
}

/// One operating point of a rate/distortion sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RdRow {
    pub qstep: f64,
    pub bpv: f64,
    pub psnr_y: f64,
    pub coeff_bits: u64,
    pub mv_bits: u64,
    pub k_bits: u64,
    pub other_bits: u64,
}

/// Encodes the sequence once per quantization step and measures each
/// operating point against the original colors.
pub fn rd_sweep(
    seq: &FrameSequence,
    base: &CodecConfig,
    qsteps: &[f64],
) -> Result<Vec<RdRow>, CodecError> {
    let mut rows = Vec::with_capacity(qsteps.len());
    for &qstep in qsteps {
        let cfg = CodecConfig {
            qstep,
            ..base.clone()
        };
        let out = encode_sequence(seq, &cfg)?;
        let psnr_y = compute_psnr_y(seq.frames(), &out.reconstruction)
            .expect("encoder output preserves the frame geometry");
        rows.push(RdRow {
            qstep,
            bpv: compute_bpv(&out.stats),
            psnr_y,
            coeff_bits: out.stats.iter().map(|s| s.coeff_bits).sum(),
            mv_bits: out.stats.iter().map(|s| s.mv_bits).sum(),
            k_bits: out.stats.iter().map(|s| s.k_bits).sum(),
            other_bits: out.stats.iter().map(|s| s.other_bits).sum(),
        });
    }
    Ok(rows)
}

const CSV_HEADER: &str = "qstep,bpv,psnr_y,coeff_bits,mv_bits,k_bits,other_bits";

/// Renders sweep rows as CSV. Floats use the shortest round-tripping
/// form, so parsing the text back recovers them exactly.
pub fn format_rd_csv(rows: &[RdRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.qstep, r.bpv, r.psnr_y, r.coeff_bits, r.mv_bits, r.k_bits, r.other_bits
        ));
    }
    out
}

/// Parses CSV produced by [`format_rd_csv`].
pub fn parse_rd_csv(text: &str) -> Result<Vec<RdRow>, MetricsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CSV_HEADER => {}
        _ => {
            return Err(MetricsError::CsvParse {
                line: 1,
                message: format!("expected header {CSV_HEADER:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(MetricsError::CsvParse {
                line: i + 1,
                message: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let float = |s: &str| -> Result<f64, MetricsError> {
            s.trim().parse().map_err(|_| MetricsError::CsvParse {
                line: i + 1,
                message: format!("bad float {s:?}"),
            })
        };
        let int = |s: &str| -> Result<u64, MetricsError> {
            s.trim().parse().map_err(|_| MetricsError::CsvParse {
                line: i + 1,
                message: format!("bad integer {s:?}"),
            })
        };
        rows.push(RdRow {
            qstep: float(fields[0])?,
            bpv: float(fields[1])?,
            psnr_y: float(fields[2])?,
            coeff_bits: int(fields[3])?,
            mv_bits: int(fields[4])?,
            k_bits: int(fields[5])?,
            other_bits: int(fields[6])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::FrameStats;
    use crate::container::FrameType;

    fn flat_frame(t: usize, y: f64, n: usize) -> PointCloudFrame {
        let coords = (0..n as i32).map(|i| [i, 0, 0]).collect();
        let colors = vec![[y, 128.0, 128.0]; n];
        PointCloudFrame::new(t, coords, colors).unwrap()
    }

    #[test]
    fn identical_sequences_have_infinite_psnr() {
        let a = vec![flat_frame(0, 100.0, 4)];
        assert_eq!(compute_psnr_y(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn full_scale_error_gives_zero_db() {
        let a = vec![flat_frame(0, 255.0, 4)];
        let b = vec![flat_frame(0, 0.0, 4)];
        assert_eq!(compute_psnr_y(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn frames_are_averaged_after_normalization() {
        // One ruined single-point frame plus one perfect three-point frame:
        // the per-frame normalized errors are 1 and 0, so the mean is 1/2
        // — a pooled-over-points average would give 1/4 instead.
        let a = vec![flat_frame(0, 255.0, 1), flat_frame(1, 40.0, 3)];
        let b = vec![flat_frame(0, 0.0, 1), flat_frame(1, 40.0, 3)];
        let psnr = compute_psnr_y(&a, &b).unwrap();
        assert!((psnr - 3.010299956639812).abs() < 1e-12);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let a = vec![flat_frame(0, 10.0, 2)];
        let b = vec![flat_frame(0, 10.0, 3)];
        assert!(matches!(
            compute_psnr_y(&a, &b).unwrap_err(),
            MetricsError::PointCountMismatch { frame: 0 }
        ));
        let c = vec![flat_frame(0, 10.0, 2), flat_frame(1, 10.0, 2)];
        assert!(matches!(
            compute_psnr_y(&a, &c).unwrap_err(),
            MetricsError::FrameCountMismatch { a: 1, b: 2 }
        ));
    }

    fn stats_stub(bits: u64, points: usize) -> FrameStats {
        FrameStats {
            frame_index: 0,
            frame_type: FrameType::Intra,
            point_count: points,
            total_bits: bits,
            coeff_bits: bits,
            mv_bits: 0,
            k_bits: 0,
            other_bits: 0,
            blocks: Vec::new(),
        }
    }

    #[test]
    fn bits_per_voxel_pools_bits_and_points() {
        let stats = [stats_stub(100, 10), stats_stub(50, 15)];
        assert_eq!(compute_bpv(&stats), 6.0);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let rows = vec![
            RdRow {
                qstep: 8.0,
                bpv: 1.2345678901234567,
                psnr_y: 38.71,
                coeff_bits: 123456,
                mv_bits: 789,
                k_bits: 42,
                other_bits: 248,
            },
            RdRow {
                qstep: 64.0,
                bpv: 0.25,
                psnr_y: f64::INFINITY,
                coeff_bits: 0,
                mv_bits: 0,
                k_bits: 0,
                other_bits: 248,
            },
        ];
        let text = format_rd_csv(&rows);
        assert_eq!(parse_rd_csv(&text).unwrap(), rows);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(parse_rd_csv("nope\n1,2,3").is_err());
        let bad_fields = format!("{CSV_HEADER}\n1,2,3\n");
        assert!(matches!(
            parse_rd_csv(&bad_fields).unwrap_err(),
            MetricsError::CsvParse { line: 2, .. }
        ));
    }

    #[test]
    fn sweep_trades_rate_for_distortion() {
        let frames: Vec<PointCloudFrame> = (0..2)
            .map(|t| {
                let mut coords = Vec::new();
                let mut colors = Vec::new();
                for x in 0..5i32 {
                    for y in 0..5i32 {
                        for z in 0..5i32 {
                            coords.push([x + t as i32, y, z]);
                            colors.push([
                                100.0 + 20.0 * ((x + y) as f64 * 0.8).sin(),
                                128.0,
                                120.0 + 10.0 * (z as f64 * 0.6).cos(),
                            ]);
                        }
                    }
                }
                PointCloudFrame::new(t, coords, colors).unwrap()
            })
            .collect();
        let seq = FrameSequence::new(frames, 2).unwrap();
        let cfg = CodecConfig {
            block_size: 4,
            ..CodecConfig::default()
        };
        let rows = rd_sweep(&seq, &cfg, &[4.0, 64.0]).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].bpv > rows[1].bpv);
        assert!(rows[0].psnr_y > rows[1].psnr_y);
    }
}
