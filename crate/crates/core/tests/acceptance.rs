//! End-to-end acceptance checks. Each test covers one release criterion
//! and prints a single `acceptance: <name> ... PASS|FAIL` line; the lines
//! are written straight to stdout so they show up even under the test
//! harness's output capture.

use std::io::Write as _;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use pcac_core::codec::{decode_sequence, encode_sequence, CodecConfig};
use pcac_core::container::{read_stream, write_stream, CoeffPlane, FrameBitstream, FrameType};
use pcac_core::frame::{FrameSequence, PointCloudFrame};
use pcac_core::graph::{build_block_graph, one_hop_filter, spectral_response, BlockGraph};
use pcac_core::metrics::{compute_bpv, compute_psnr_y, rd_sweep};
use pcac_core::morton::morton3_coords;
use pcac_core::motion::{color_icp, mc_predict, refine_motion, MeConfig, MeMode};
use pcac_core::overhead::OverheadCodec;
use pcac_core::rlgr::{rlgr_decode, rlgr_encode};
use pcac_core::spatial::{geom_dist2, hybrid_delta, signal_sse, RefIndex};
use pcac_core::transform::{dequantize_value, quantize_value, GftBasis};

/// Prints the criterion verdict past output capture, then fails the test
/// if anything was collected.
#[allow(clippy::explicit_write)] // println! would be swallowed by capture
fn report(name: &str, failures: &[String]) {
    let verdict = if failures.is_empty() { "PASS" } else { "FAIL" };
    writeln!(std::io::stdout(), "acceptance: {name} ... {verdict}").unwrap();
    assert!(
        failures.is_empty(),
        "{name}: {} violation(s), first few: {:#?}",
        failures.len(),
        &failures[..failures.len().min(5)]
    );
}

#[allow(clippy::explicit_write)] // println! would be swallowed by capture
fn skip(name: &str, why: &str) {
    writeln!(std::io::stdout(), "acceptance: {name} ... SKIP ({why})").unwrap();
}

/// Collects at most a handful of violation messages so a broken build
/// doesn't drown the output.
struct Check {
    failures: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check {
            failures: Vec::new(),
        }
    }

    fn ok(&mut self, cond: bool, msg: impl FnOnce() -> String) {
        if !cond && self.failures.len() < 32 {
            self.failures.push(msg());
        }
    }
}

// ---------------------------------------------------------------------------
// Shared generators
// ---------------------------------------------------------------------------

/// Distinct random voxels in a `[0, extent)³` box.
fn random_cluster(rng: &mut StdRng, n: usize, extent: i32) -> Vec<[i32; 3]> {
    let mut seen = std::collections::HashSet::new();
    let mut coords = Vec::with_capacity(n);
    while coords.len() < n {
        let c = [
            rng.random_range(0..extent),
            rng.random_range(0..extent),
            rng.random_range(0..extent),
        ];
        if seen.insert(c) {
            coords.push(c);
        }
    }
    coords
}

fn random_signal(rng: &mut StdRng, n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            [
                rng.random_range(0.0..255.0),
                rng.random_range(0.0..255.0),
                rng.random_range(0.0..255.0),
            ]
        })
        .collect()
}

/// Smoothly textured hollow cube shell (thickness 1) with the pattern tied
/// to shape-local coordinates, so it rides along under translation; `gain`
/// adds a small frame-dependent brightness drift to keep inter residuals
/// non-trivial even under exact geometric motion.
fn shell_frame(t: usize, side: i32, origin: [i32; 3], gain: f64) -> PointCloudFrame {
    let mut coords = Vec::new();
    let mut colors = Vec::new();
    for x in 0..side {
        for y in 0..side {
            for z in 0..side {
                let on_surface =
                    x == 0 || y == 0 || z == 0 || x == side - 1 || y == side - 1 || z == side - 1;
                if !on_surface {
                    continue;
                }
                coords.push([origin[0] + x, origin[1] + y, origin[2] + z]);
                let (xf, yf, zf) = (x as f64, y as f64, z as f64);
                colors.push([
                    128.0
                        + 55.0 * (0.23 * xf + 0.11 * yf).sin() * (0.19 * zf - 0.07 * xf).cos()
                        + gain * (0.05 * (xf + yf + zf)).sin(),
                    128.0 + 35.0 * (0.13 * xf - 0.17 * zf).sin(),
                    128.0 + 35.0 * (0.11 * yf + 0.21 * zf).cos(),
                ]);
            }
        }
    }
    PointCloudFrame::new(t, coords, colors).unwrap()
}

/// Shell sequence translating by a seeded 2–6 voxels per frame along a
/// cycling axis.
fn drifting_shell_sequence(frames: usize, side: i32, gof: usize, seed: u64) -> FrameSequence {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut origin = [40, 40, 40];
    let list = (0..frames)
        .map(|t| {
            if t > 0 {
                origin[t % 3] += rng.random_range(2..=6);
            }
            shell_frame(t, side, origin, 0.0)
        })
        .collect();
    FrameSequence::new(list, gof).unwrap()
}

/// Colors on a coarse lattice: any two distinct indices differ by ≥ 50 in
/// some channel, so blended matching pairs points one-to-one.
fn separated_colors(n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|i| {
            [
                ((i % 6) * 50) as f64,
                (((i / 6) % 6) * 50) as f64,
                (((i / 36) % 6) * 50) as f64,
            ]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

/// Dense one-hop oracle computed as x − (Dx − Wx)/(2D) from explicitly
/// materialized dense matrices — an algebraically equal but numerically
/// independent path from the production filter.
fn dense_one_hop(g: &BlockGraph, x: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let n = g.vertex_count();
    let mut w = vec![vec![0.0; n]; n];
    let mut d = vec![0.0; n];
    for &(a, b, wt) in g.edges() {
        w[a as usize][b as usize] = wt;
        w[b as usize][a as usize] = wt;
        d[a as usize] += wt;
        d[b as usize] += wt;
    }
    (0..n)
        .map(|a| {
            if d[a] == 0.0 {
                return x[a];
            }
            let mut out = [0.0; 3];
            for ch in 0..3 {
                let mut wx = 0.0;
                for b in 0..n {
                    wx += w[a][b] * x[b][ch];
                }
                out[ch] = x[a][ch] - (d[a] * x[a][ch] - wx) / (2.0 * d[a]);
            }
            out
        })
        .collect()
}

#[test]
fn filter_correctness() {
    let mut rng = StdRng::seed_from_u64(11);
    let mut c = Check::new();
    for case in 0..200 {
        let n = rng.random_range(1..=80);
        let coords = random_cluster(&mut rng, n, 6);
        let g = build_block_graph(&coords);
        let x = random_signal(&mut rng, n);

        let constant = vec![[37.5, 120.25, 9.0]; n];
        for (i, y) in one_hop_filter(&g, &constant).iter().enumerate() {
            for ch in 0..3 {
                c.ok((y[ch] - constant[0][ch]).abs() <= 1e-12, || {
                    format!("case {case}: constant input moved at vertex {i} channel {ch}")
                });
            }
        }

        let y = one_hop_filter(&g, &x);
        for ch in 0..3 {
            let lo = x.iter().map(|p| p[ch]).fold(f64::INFINITY, f64::min);
            let hi = x.iter().map(|p| p[ch]).fold(f64::NEG_INFINITY, f64::max);
            for (i, p) in y.iter().enumerate() {
                c.ok(p[ch] >= lo - 1e-12 && p[ch] <= hi + 1e-12, || {
                    format!("case {case}: output escaped the input range at vertex {i}")
                });
            }
        }

        let oracle = dense_one_hop(&g, &x);
        for i in 0..n {
            for ch in 0..3 {
                c.ok((y[i][ch] - oracle[i][ch]).abs() <= 1e-10, || {
                    format!(
                        "case {case}: filter disagrees with the dense oracle at vertex {i}: \
                         {} vs {}",
                        y[i][ch], oracle[i][ch]
                    )
                });
            }
        }
    }
    report("filter-correctness", &c.failures);
}

#[test]
fn spectral_response_shape() {
    let mut c = Check::new();
    let grid: Vec<f64> = (0..100).map(|i| 2.0 * i as f64 / 99.0).collect();
    let responses: Vec<Vec<f64>> = (0..=5)
        .map(|k| spectral_response(k, &grid).unwrap())
        .collect();
    for (k, h) in responses.iter().enumerate() {
        c.ok((h[0] - 1.0).abs() <= 1e-15, || {
            format!("k={k}: response at the smoothest frequency is {}", h[0])
        });
        if k >= 1 {
            c.ok(h[99].abs() <= 1e-15, || {
                format!("k={k}: response at the roughest frequency is {}", h[99])
            });
        }
    }
    for k in 1..=5usize {
        for (i, (&cur, &prev)) in responses[k].iter().zip(&responses[k - 1]).enumerate() {
            c.ok(cur.abs() <= prev.abs() + 1e-15, || {
                format!("k={k}: |response| grew at grid point {i}")
            });
        }
    }
    report("spectral-response-shape", &c.failures);
}

#[test]
fn icp_shift_recovery() {
    let mut rng = StdRng::seed_from_u64(23);
    let mut c = Check::new();
    let cfg = MeConfig::default();
    for case in 0..50 {
        let n = rng.random_range(40..=90);
        let rel = random_cluster(&mut rng, n, 8);
        let colors = separated_colors(n);
        let shift = [
            rng.random_range(-20..=20),
            rng.random_range(-20..=20),
            rng.random_range(-20..=20),
        ];
        let ref_coords: Vec<[i32; 3]> = rel
            .iter()
            .map(|p| [p[0] + 30, p[1] + 30, p[2] + 30])
            .collect();
        let cur_coords: Vec<[i32; 3]> = ref_coords
            .iter()
            .map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]])
            .collect();

        let ref_index = RefIndex::build(&ref_coords, Some(&colors));
        let center = [0, 1, 2].map(|a| {
            let lo = cur_coords.iter().map(|p| p[a]).min().unwrap();
            let hi = cur_coords.iter().map(|p| p[a]).max().unwrap();
            (lo + hi) / 2
        });
        let region = ref_index.extract_region(center, cfg.region_side).unwrap();
        let icp = color_icp(&cur_coords, &colors, &region, &cfg).unwrap();
        c.ok(!icp.fallback, || format!("case {case}: region was empty"));
        let refined =
            refine_motion(&cur_coords, &colors, &ref_index, &colors, icp.motion, &cfg).unwrap();
        let expected = [-shift[0], -shift[1], -shift[2]];
        c.ok(refined.motion.0 == expected, || {
            format!(
                "case {case}: recovered {:?}, shift was {:?}",
                refined.motion.0, shift
            )
        });
        let predicted = mc_predict(&cur_coords, &ref_index, &colors, refined.motion).unwrap();
        let sse = signal_sse(&colors, &predicted);
        c.ok(sse == 0.0, || {
            format!("case {case}: compensated prediction left error {sse}")
        });
    }
    report("icp-shift-recovery", &c.failures);
}

#[test]
fn dominance_properties() {
    let mut c = Check::new();
    let seq = drifting_shell_sequence(5, 24, 5, 71);
    let mut inter_blocks = 0usize;
    for qstep in [8.0, 32.0] {
        let cfg = CodecConfig {
            qstep,
            ..CodecConfig::default()
        };
        let out = encode_sequence(&seq, &cfg).unwrap();
        for fs in &out.stats {
            for (b, bs) in fs.blocks.iter().enumerate() {
                inter_blocks += 1;
                c.ok(bs.sse_pred_refined <= bs.sse_pred_start, || {
                    format!(
                        "qstep {qstep} frame {} block {b}: refinement worsened the \
                         prediction ({} > {})",
                        fs.frame_index, bs.sse_pred_refined, bs.sse_pred_start
                    )
                });
                c.ok(bs.sse_filtered <= bs.sse_unfiltered, || {
                    format!(
                        "qstep {qstep} frame {} block {b}: chosen filter worsened the \
                         prediction ({} > {})",
                        fs.frame_index, bs.sse_filtered, bs.sse_unfiltered
                    )
                });
            }
        }
    }
    c.ok(inter_blocks > 0, || "no inter blocks were coded".into());
    report("dominance-properties", &c.failures);
}

#[test]
fn transform_and_entropy_losslessness() {
    let mut rng = StdRng::seed_from_u64(31);
    let mut c = Check::new();

    for case in 0..100 {
        let n = rng.random_range(1..=48);
        let coords = random_cluster(&mut rng, n, 5);
        let basis = GftBasis::from_graph(&build_block_graph(&coords));
        let x = random_signal(&mut rng, n);
        let back = basis.inverse(&basis.forward(&x));
        for i in 0..n {
            for ch in 0..3 {
                c.ok((back[i][ch] - x[i][ch]).abs() <= 1e-8, || {
                    format!("case {case}: transform round trip drifted at point {i}")
                });
            }
        }
    }

    for case in 0..1000 {
        let x = rng.random_range(-1e4..1e4);
        let qstep = [0.01, 0.5, 1.0, 8.0, 64.0][case % 5];
        let err = (dequantize_value(quantize_value(x, qstep), qstep) - x).abs();
        c.ok(err <= qstep / 2.0 + 1e-9, || {
            format!("case {case}: quantizer error {err} exceeds half of {qstep}")
        });
    }

    for case in 0..1000 {
        let len = rng.random_range(0..300);
        let values: Vec<i64> = (0..len)
            .map(|_| match case % 3 {
                0 => {
                    if rng.random_bool(0.85) {
                        0
                    } else {
                        rng.random_range(-6..=6)
                    }
                }
                1 => rng.random_range(-40..=40),
                _ => rng.random_range(-1_000_000..=1_000_000),
            })
            .collect();
        let (bytes, bit_len) = rlgr_encode(&values);
        let back = rlgr_decode(&bytes, bit_len, values.len()).unwrap();
        c.ok(back == values, || {
            format!("case {case}: entropy round trip changed the data")
        });
    }

    for case in 0..1000 {
        let mut frames = Vec::new();
        for f in 0..rng.random_range(1..=2u32) {
            let plane = |rng: &mut StdRng| {
                let bit_len = rng.random_range(0..200u64);
                CoeffPlane {
                    bytes: (0..bit_len.div_ceil(8)).map(|_| rng.random()).collect(),
                    bit_len,
                }
            };
            frames.push(FrameBitstream {
                frame_type: if f == 0 {
                    FrameType::Intra
                } else {
                    FrameType::Inter
                },
                block_count: rng.random_range(0..50),
                mv_stream: (0..rng.random_range(0..60)).map(|_| rng.random()).collect(),
                k_stream: (0..rng.random_range(0..20)).map(|_| rng.random()).collect(),
                coeff_planes: [plane(&mut rng), plane(&mut rng), plane(&mut rng)],
            });
        }
        let header = pcac_core::container::StreamHeader {
            block_size: rng.random_range(2..=64),
            gof_size: rng.random_range(1..=16),
            frame_count: frames.len() as u32,
            qstep: [0.5, 8.0, 64.0][case % 3],
            kmax: rng.random_range(0..=9),
            overhead_codec: if case % 2 == 0 {
                OverheadCodec::Store
            } else {
                OverheadCodec::Lzma
            },
            basis_build_tag: rng.random(),
        };
        let mut stream = Vec::new();
        write_stream(&mut stream, &header, &frames).unwrap();
        let (h2, f2) = read_stream(&mut &stream[..]).unwrap();
        c.ok(h2 == header && f2 == frames, || {
            format!("case {case}: container round trip changed the stream")
        });
    }

    report("transform-and-entropy-losslessness", &c.failures);
}

/// True when both frames carry the same geometry and bit-identical colors.
fn frames_bit_identical(a: &PointCloudFrame, b: &PointCloudFrame) -> bool {
    a.coords() == b.coords()
        && a.colors()
            .iter()
            .zip(b.colors())
            .all(|(x, y)| (0..3).all(|ch| x[ch].to_bits() == y[ch].to_bits()))
}

#[test]
fn closed_loop_bit_exactness() {
    let mut c = Check::new();
    // Translate by exactly the block size each frame: the occupancy
    // patterns repeat so the basis cache stays hot, while a small
    // brightness drift keeps the coded residuals non-trivial.
    let mut origin = [40, 40, 40];
    let frames: Vec<PointCloudFrame> = (0..8)
        .map(|t| {
            if t > 0 {
                origin[t % 3] += 16;
            }
            shell_frame(t, 91, origin, 3.0 * t as f64)
        })
        .collect();
    let voxels = frames[0].len();
    c.ok((45_000..55_000).contains(&voxels), || {
        format!("shell has {voxels} voxels, wanted ~50k")
    });
    let seq = FrameSequence::new(frames, 8).unwrap();

    for qstep in [8.0, 16.0, 32.0, 64.0] {
        let cfg = CodecConfig {
            qstep,
            ..CodecConfig::default()
        };
        let out = encode_sequence(&seq, &cfg).unwrap();
        let mut stream = Vec::new();
        write_stream(&mut stream, &out.header, &out.frames).unwrap();
        let (header, records) = read_stream(&mut &stream[..]).unwrap();
        let decoded = decode_sequence(&header, &records, seq.frames()).unwrap();
        for (t, (dec, enc)) in decoded.iter().zip(&out.reconstruction).enumerate() {
            c.ok(frames_bit_identical(dec, enc), || {
                format!("qstep {qstep}: frame {t} reconstruction differs between ends")
            });
        }
    }
    report("closed-loop-bit-exactness", &c.failures);
}

#[test]
fn inter_coding_benefit() {
    let mut c = Check::new();
    let seq = drifting_shell_sequence(8, 48, 8, 43);
    let intra_seq = FrameSequence::new(seq.frames().to_vec(), 1).unwrap();

    let inter_cfg = CodecConfig {
        qstep: 16.0,
        ..CodecConfig::default()
    };
    let inter = encode_sequence(&seq, &inter_cfg).unwrap();
    let bpv_inter = compute_bpv(&inter.stats);
    let psnr_inter = compute_psnr_y(seq.frames(), &inter.reconstruction).unwrap();

    let mut zmv_cfg = inter_cfg.clone();
    zmv_cfg.me.mode = MeMode::ZeroMotion;
    let zmv = encode_sequence(&seq, &zmv_cfg).unwrap();
    let bpv_zmv = compute_bpv(&zmv.stats);
    c.ok(bpv_inter < bpv_zmv, || {
        format!("full search ({bpv_inter:.4} bpv) did not beat zero motion ({bpv_zmv:.4} bpv)")
    });

    // Find an all-intra operating point matching the inter PSNR within
    // ±0.2 dB by bisecting the quantization step (PSNR falls as it grows).
    let intra_at = |qstep: f64| {
        let out = encode_sequence(
            &intra_seq,
            &CodecConfig {
                qstep,
                ..CodecConfig::default()
            },
        )
        .unwrap();
        let psnr = compute_psnr_y(intra_seq.frames(), &out.reconstruction).unwrap();
        (compute_bpv(&out.stats), psnr)
    };
    let (mut lo, mut hi) = (2.0f64, 128.0f64);
    let mut matched = None;
    for _ in 0..12 {
        let mid = (lo * hi).sqrt();
        let (bpv, psnr) = intra_at(mid);
        if (psnr - psnr_inter).abs() <= 0.2 {
            matched = Some((bpv, psnr));
            break;
        }
        if psnr > psnr_inter {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    match matched {
        None => c.ok(false, || {
            format!("no intra quantization step matched {psnr_inter:.2} dB within 0.2 dB")
        }),
        Some((bpv_intra, psnr_intra)) => {
            c.ok(bpv_inter <= 0.8 * bpv_intra, || {
                format!(
                    "inter saved only {:.1}% over intra at matched quality \
                     ({bpv_inter:.4} vs {bpv_intra:.4} bpv at {psnr_inter:.2} vs \
                     {psnr_intra:.2} dB)",
                    100.0 * (1.0 - bpv_inter / bpv_intra)
                )
            });
        }
    }
    report("inter-coding-benefit", &c.failures);
}

#[test]
fn nearest_neighbor_oracle_equivalence() {
    let mut rng = StdRng::seed_from_u64(53);
    let mut c = Check::new();
    let palette = [0.0, 60.0, 120.0, 180.0, 240.0];
    for batch in 0..100 {
        let n = rng.random_range(1..=250);
        let coords = random_cluster(&mut rng, n, 12);
        let colors: Vec<[f64; 3]> = (0..n)
            .map(|_| [0; 3].map(|_| palette[rng.random_range(0..palette.len())]))
            .collect();
        let index = RefIndex::build(&coords, Some(&colors));

        for q in 0..30 {
            // Half the queries sit exactly on the grid to force distance
            // ties that only the Morton/index ordering can resolve.
            let query = if q % 2 == 0 {
                [0; 3].map(|_| rng.random_range(-2..14) as f64)
            } else {
                [0; 3].map(|_| rng.random_range(-2.0..14.0))
            };
            let got = index.nearest_geometric(query).unwrap();
            let want = coords
                .iter()
                .enumerate()
                .map(|(i, c)| (geom_dist2(query, *c), morton3_coords(*c), i))
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .unwrap();
            c.ok(got.index == want.2, || {
                format!(
                    "batch {batch}: geometric query picked {} over {}",
                    got.index, want.2
                )
            });

            let alpha = [0.0, 0.1, 0.5, 1.0][q % 4];
            let q_color = [0; 3].map(|_| palette[rng.random_range(0..palette.len())]);
            let got = index.nearest_hybrid(query, q_color, alpha).unwrap();
            let want = coords
                .iter()
                .zip(&colors)
                .enumerate()
                .map(|(i, (co, cl))| {
                    let d = hybrid_delta(
                        alpha,
                        query,
                        q_color,
                        [co[0] as f64, co[1] as f64, co[2] as f64],
                        *cl,
                    );
                    (d, morton3_coords(*co), i)
                })
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .unwrap();
            c.ok(got.index == want.2, || {
                format!(
                    "batch {batch}: hybrid query picked {} over {}",
                    got.index, want.2
                )
            });
        }
    }
    report("nearest-neighbor-oracle-equivalence", &c.failures);
}

#[test]
fn real_dataset_rd_shape() {
    let name = "real-dataset-rd-shape";
    let Some(dir) = std::env::var_os("PCAC_8IVFB_DIR") else {
        skip(
            name,
            "set PCAC_8IVFB_DIR to a directory of frame .ply files",
        );
        return;
    };
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .expect("dataset directory is readable")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ply"))
        .collect();
    paths.sort();
    if paths.len() < 8 {
        skip(name, "fewer than 8 .ply frames in PCAC_8IVFB_DIR");
        return;
    }

    let mut c = Check::new();
    let frames: Vec<PointCloudFrame> = paths[..8]
        .iter()
        .enumerate()
        .map(|(t, p)| pcac_core::ply::load_ply(p, t).expect("dataset frame loads"))
        .collect();
    let seq = FrameSequence::new(frames, 8).unwrap();
    let rows = rd_sweep(&seq, &CodecConfig::default(), &[8.0, 16.0, 32.0, 64.0]).unwrap();
    for pair in rows.windows(2) {
        c.ok(pair[0].bpv > pair[1].bpv, || {
            format!(
                "rate did not fall with coarser quantization: {} then {}",
                pair[0].bpv, pair[1].bpv
            )
        });
        c.ok(pair[0].psnr_y > pair[1].psnr_y, || {
            format!(
                "quality did not fall with coarser quantization: {} then {}",
                pair[0].psnr_y, pair[1].psnr_y
            )
        });
    }
    for row in &rows {
        if (0.3..=2.5).contains(&row.bpv) {
            c.ok((30.0..=45.0).contains(&row.psnr_y), || {
                format!(
                    "operating point ({:.3} bpv, {:.2} dB) sits outside the expected band",
                    row.bpv, row.psnr_y
                )
            });
        }
    }
    report(name, &c.failures);
}
