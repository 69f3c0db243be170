//! Per-block integer motion: an iterative closest point estimate driven by
//! a blended geometry+color match cost, a local exhaustive refinement on
//! decoded reference colors, and motion-compensated color prediction.
//!
//! The estimate and refinement run only at the encoder (the chosen vector
//! is transmitted); prediction runs at both ends and therefore leans on the
//! fully deterministic nearest-neighbor tie-breaks of [`crate::spatial`].

use thiserror::Error;

use crate::morton::morton3_coords;
use crate::spatial::{signal_sse, RefIndex, SpatialError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MotionError {
    #[error("translation fit needs at least one matched pair")]
    NoPairs,
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// Integer translation taking a current-frame block onto the reference
/// frame: a block point v predicts from reference points near v + m.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct MotionVector(pub [i32; 3]);

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector([0, 0, 0]);

    #[inline]
    pub fn offset(self, d: [i32; 3]) -> MotionVector {
        MotionVector([self.0[0] + d[0], self.0[1] + d[1], self.0[2] + d[2]])
    }
}

/// Which motion estimator the encoder runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeMode {
    /// Full pipeline: iterative estimate plus local refinement.
    Full,
    /// Always transmit (0,0,0); prediction only, no search.
    ZeroMotion,
}

/// Motion-estimation knobs with their standard defaults.
#[derive(Clone, Copy, Debug)]
pub struct MeConfig {
    /// Geometry weight in the blended match cost, in [0,1].
    pub alpha: f64,
    /// Refinement radius: displacements in [−beta, beta]³ are tried.
    pub beta: u32,
    /// Edge length of the cubic search region, odd.
    pub region_side: u32,
    pub max_icp_iters: u32,
    /// Stop when an iteration's translation falls below this length.
    pub icp_tol: f64,
    pub mode: MeMode,
}

impl Default for MeConfig {
    fn default() -> Self {
        MeConfig {
            alpha: 0.1,
            beta: 1,
            region_side: 61,
            max_icp_iters: 30,
            icp_tol: 1e-3,
            mode: MeMode::Full,
        }
    }
}

/// Blended match cost between two (coordinates, color) points:
/// `alpha`·‖v₁−v₂‖² + (1−`alpha`)·‖c₁−c₂‖².
#[inline]
pub fn hybrid_distance(v1: [f64; 3], c1: [f64; 3], v2: [f64; 3], c2: [f64; 3], alpha: f64) -> f64 {
    crate::spatial::hybrid_delta(alpha, v1, c1, v2, c2)
}

/// Best translation for a fixed set of matches: the coordinate-wise mean of
/// (v′_j − v_j), which minimizes the mean squared alignment error.
pub fn icp_translation(pairs: &[([f64; 3], [f64; 3])]) -> Result<[f64; 3], MotionError> {
    if pairs.is_empty() {
        return Err(MotionError::NoPairs);
    }
    let mut sum = [0.0; 3];
    for (v, vp) in pairs {
        for axis in 0..3 {
            sum[axis] += vp[axis] - v[axis];
        }
    }
    let n = pairs.len() as f64;
    Ok([sum[0] / n, sum[1] / n, sum[2] / n])
}

/// Outcome of the iterative estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IcpOutcome {
    pub motion: MotionVector,
    /// True when the search region was empty and no matching ran; the
    /// caller decides how to widen the search.
    pub fallback: bool,
    pub iterations: u32,
}

/// Iteratively matches the block's points into `region` under the blended
/// cost and re-fits a translation until it stalls, then rounds the
/// accumulated translation half away from zero per component.
///
/// `block_coords`/`block_colors` are the current block's voxels and its
/// original colors, in block point order; `region` must carry colors (the
/// codec passes the reference frame's original colors, so the pairing is
/// not biased by coding noise). In zero-motion mode, or when the region is
/// empty, no iteration runs.
pub fn color_icp(
    block_coords: &[[i32; 3]],
    block_colors: &[[f64; 3]],
    region: &RefIndex,
    cfg: &MeConfig,
) -> Result<IcpOutcome, MotionError> {
    if cfg.mode == MeMode::ZeroMotion {
        return Ok(IcpOutcome {
            motion: MotionVector::ZERO,
            fallback: false,
            iterations: 0,
        });
    }
    if region.is_empty() {
        return Ok(IcpOutcome {
            motion: MotionVector::ZERO,
            fallback: true,
            iterations: 0,
        });
    }

    let mut working: Vec<[f64; 3]> = block_coords
        .iter()
        .map(|&[x, y, z]| [x as f64, y as f64, z as f64])
        .collect();
    let mut accumulated = [0.0; 3];
    let mut iterations = 0;
    for _ in 0..cfg.max_icp_iters {
        iterations += 1;
        // Matching step: best blended match per point.
        let mut step_sum = [0.0; 3];
        for (w, c) in working.iter().zip(block_colors) {
            let m = region.nearest_hybrid(*w, *c, cfg.alpha)?;
            for axis in 0..3 {
                step_sum[axis] += m.coords[axis] as f64 - w[axis];
            }
        }
        // Translation step: mean displacement of the matches.
        let n = working.len() as f64;
        let step = [step_sum[0] / n, step_sum[1] / n, step_sum[2] / n];
        for axis in 0..3 {
            accumulated[axis] += step[axis];
        }
        for w in working.iter_mut() {
            for axis in 0..3 {
                w[axis] += step[axis];
            }
        }
        let len = (step[0] * step[0] + step[1] * step[1] + step[2] * step[2]).sqrt();
        if len < cfg.icp_tol {
            break;
        }
    }

    // f64::round is round-half-away-from-zero.
    let motion = MotionVector([
        accumulated[0].round() as i32,
        accumulated[1].round() as i32,
        accumulated[2].round() as i32,
    ]);
    Ok(IcpOutcome {
        motion,
        fallback: false,
        iterations,
    })
}

/// All (2β+1)³ integer displacements with components in [−β, β].
pub fn candidate_displacements(beta: u32) -> Vec<[i32; 3]> {
    let b = beta as i32;
    let mut out = Vec::with_capacity(((2 * beta + 1).pow(3)) as usize);
    for dx in -b..=b {
        for dy in -b..=b {
            for dz in -b..=b {
                out.push([dx, dy, dz]);
            }
        }
    }
    out
}

/// Outcome of the local refinement.
#[derive(Clone, Debug)]
pub struct RefineResult {
    pub motion: MotionVector,
    /// Prediction squared error of `motion` (all channels).
    pub sse: f64,
    /// Prediction squared error of the unrefined starting vector.
    pub sse_start: f64,
}

/// Exhaustively tries every displacement in [−β, β]³ around `start`,
/// scoring each by the squared error between the block's original colors
/// and the motion-compensated prediction drawn from the DECODED reference
/// (`ref_index` over its geometry, `ref_colors` its decoded colors).
/// Ties prefer the smaller ‖Δ‖², then the smaller Morton code of Δ+(β,β,β);
/// Δ = 0 is always a candidate, so the result never scores worse than
/// `start`.
pub fn refine_motion(
    block_coords: &[[i32; 3]],
    block_colors: &[[f64; 3]],
    ref_index: &RefIndex,
    ref_colors: &[[f64; 3]],
    start: MotionVector,
    cfg: &MeConfig,
) -> Result<RefineResult, MotionError> {
    let b = cfg.beta as i32;
    let mut best: Option<(f64, i64, u64, MotionVector)> = None;
    let mut sse_start = 0.0;
    for delta in candidate_displacements(cfg.beta) {
        let m = start.offset(delta);
        let predicted = mc_predict(block_coords, ref_index, ref_colors, m)?;
        let sse = signal_sse(block_colors, &predicted);
        if delta == [0, 0, 0] {
            sse_start = sse;
        }
        let radius2 =
            (delta[0] as i64).pow(2) + (delta[1] as i64).pow(2) + (delta[2] as i64).pow(2);
        let morton = morton3_coords([delta[0] + b, delta[1] + b, delta[2] + b]);
        let key = (sse, radius2, morton);
        let better = match &best {
            None => true,
            Some((bs, br, bm, _)) => key < (*bs, *br, *bm),
        };
        if better {
            best = Some((sse, radius2, morton, m));
        }
    }
    let (sse, _, _, motion) = best.expect("at least the zero displacement is evaluated");
    Ok(RefineResult {
        motion,
        sse,
        sse_start,
    })
}

/// Motion-compensated prediction: each block point takes the decoded color
/// of its geometrically nearest reference point after translating by `m`.
/// Output follows block point order. Runs identically at both codec ends.
pub fn mc_predict(
    block_coords: &[[i32; 3]],
    ref_index: &RefIndex,
    ref_colors: &[[f64; 3]],
    m: MotionVector,
) -> Result<Vec<[f64; 3]>, MotionError> {
    let mut out = Vec::with_capacity(block_coords.len());
    for &[x, y, z] in block_coords {
        let q = [
            (x + m.0[0]) as f64,
            (y + m.0[1]) as f64,
            (z + m.0[2]) as f64,
        ];
        let n = ref_index.nearest_geometric(q)?;
        out.push(ref_colors[n.index]);
    }
    Ok(out)
}
