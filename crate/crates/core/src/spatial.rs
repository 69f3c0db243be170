//! Exact nearest-neighbor and cube-region queries over a reference frame.
//!
//! Queries must agree with a linear scan down to the tie-break, because both
//! codec ends re-run them independently and any divergence desynchronizes
//! the prediction loop. Ties are broken by smallest Morton code of the
//! candidate's coordinates, then smallest point index; the tree prunes only
//! on strictly larger bounds so equal-distance candidates are always
//! reached.

use thiserror::Error;

use crate::morton::morton3_coords;

const LEAF_SIZE: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpatialError {
    #[error("nearest-neighbor query on an empty index")]
    EmptyIndex,
    #[error("hybrid query requires an index built with colors attached")]
    MissingColors,
    #[error("region side must be odd and at least 1, got {0}")]
    InvalidRegionSide(u32),
}

/// Squared Euclidean distance between a real query point and a voxel.
///
/// The per-axis terms are accumulated in x, y, z order; every caller that
/// compares distances (tree, oracles, motion search) goes through this one
/// function so equal inputs give bitwise-equal outputs.
#[inline]
pub fn geom_dist2(q: [f64; 3], c: [i32; 3]) -> f64 {
    let dx = q[0] - c[0] as f64;
    let dy = q[1] - c[1] as f64;
    let dz = q[2] - c[2] as f64;
    dx * dx + dy * dy + dz * dz
}

/// Squared Euclidean distance between two color triples, Y, U, V order.
#[inline]
pub fn color_dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dy = a[0] - b[0];
    let du = a[1] - b[1];
    let dv = a[2] - b[2];
    dy * dy + du * du + dv * dv
}

/// Sum of squared differences between two equal-length color signals over
/// all three channels, accumulated point-major. Every squared-error
/// comparison in the codec (motion refinement, filter-strength selection,
/// reported block statistics) uses this one accumulation order, so
/// "candidate A beats candidate B" means the same thing everywhere.
#[inline]
pub fn signal_sse(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    assert_eq!(a.len(), b.len(), "signal length mismatch");
    let mut acc = 0.0;
    for (pa, pb) in a.iter().zip(b) {
        acc += color_dist2(*pa, *pb);
    }
    acc
}

/// Blended point-matching cost: `alpha`·(squared coordinate distance) +
/// (1−`alpha`)·(squared color distance). Symmetric in its two points.
#[inline]
pub fn hybrid_delta(alpha: f64, v1: [f64; 3], c1: [f64; 3], v2: [f64; 3], c2: [f64; 3]) -> f64 {
    let dx = v1[0] - v2[0];
    let dy = v1[1] - v2[1];
    let dz = v1[2] - v2[2];
    let geo = dx * dx + dy * dy + dz * dz;
    alpha * geo + (1.0 - alpha) * color_dist2(c1, c2)
}

/// A nearest-neighbor answer. `dist2` is the squared geometric distance for
/// geometric queries and the blended cost for hybrid queries; `index` is the
/// point's index in the frame the index was built from (region sub-indexes
/// keep the original frame indices).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub index: usize,
    pub dist2: f64,
    pub coords: [i32; 3],
}

#[derive(Debug)]
enum NodeKind {
    Leaf { start: u32, len: u32 },
    Inner { left: u32, right: u32 },
}

#[derive(Debug)]
struct Node {
    coord_min: [i32; 3],
    coord_max: [i32; 3],
    color_min: [f64; 3],
    color_max: [f64; 3],
    kind: NodeKind,
}

/// Immutable kd-tree over a reference frame's voxels, with point indices
/// retained and colors optionally attached for hybrid queries.
#[derive(Debug)]
pub struct RefIndex {
    ids: Vec<usize>,
    coords: Vec<[i32; 3]>,
    colors: Option<Vec<[f64; 3]>>,
    mortons: Vec<u64>,
    nodes: Vec<Node>,
    root: u32,
}

/// One entry during tree construction; kept together so the build can
/// permute all per-point data with a single sort key.
struct BuildEntry {
    id: usize,
    coords: [i32; 3],
    color: [f64; 3],
    morton: u64,
}

impl RefIndex {
    /// Builds an index over `coords`, remembering each point's position in
    /// the input slice. Attach `colors` (same length) to enable hybrid
    /// queries. An empty input yields an empty index. Coordinates must be
    /// non-negative (frame-validated voxels): the tie-break keys are their
    /// Morton codes.
    pub fn build(coords: &[[i32; 3]], colors: Option<&[[f64; 3]]>) -> Self {
        let ids: Vec<usize> = (0..coords.len()).collect();
        Self::build_subset(&ids, coords, colors)
    }

    /// Builds an index over the points listed in `ids`, keeping those ids as
    /// the reported indices. `coords`/`colors` are indexed by the ids.
    pub fn build_subset(ids: &[usize], coords: &[[i32; 3]], colors: Option<&[[f64; 3]]>) -> Self {
        if let Some(c) = colors {
            assert_eq!(coords.len(), c.len(), "coords/colors length mismatch");
        }
        let mut entries: Vec<BuildEntry> = ids
            .iter()
            .map(|&id| BuildEntry {
                id,
                coords: coords[id],
                color: colors.map_or([0.0; 3], |c| c[id]),
                morton: morton3_coords(coords[id]),
            })
            .collect();

        let mut nodes = Vec::new();
        let root = if entries.is_empty() {
            0
        } else {
            let n = entries.len();
            build_node(&mut entries, 0, n, &mut nodes)
        };

        RefIndex {
            ids: entries.iter().map(|e| e.id).collect(),
            coords: entries.iter().map(|e| e.coords).collect(),
            colors: colors.map(|_| entries.iter().map(|e| e.color).collect()),
            mortons: entries.iter().map(|e| e.morton).collect(),
            nodes,
            root,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn has_colors(&self) -> bool {
        self.colors.is_some()
    }

    /// Indices (into the originating frame) of every point in this index.
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Closest voxel to `q` by squared Euclidean distance; ties go to the
    /// smallest Morton code, then the smallest point index.
    pub fn nearest_geometric(&self, q: [f64; 3]) -> Result<Nearest, SpatialError> {
        if self.is_empty() {
            return Err(SpatialError::EmptyIndex);
        }
        let mut best = Best::none();
        self.search_geometric(self.root, q, &mut best);
        Ok(best.into_nearest(self))
    }

    /// Closest voxel to the (coordinates, color) pair under the blended
    /// cost; same tie-break as [`Self::nearest_geometric`]. The index must
    /// have been built with colors.
    pub fn nearest_hybrid(
        &self,
        q_coords: [f64; 3],
        q_color: [f64; 3],
        alpha: f64,
    ) -> Result<Nearest, SpatialError> {
        if self.is_empty() {
            return Err(SpatialError::EmptyIndex);
        }
        if self.colors.is_none() {
            return Err(SpatialError::MissingColors);
        }
        let mut best = Best::none();
        self.search_hybrid(self.root, q_coords, q_color, alpha, &mut best);
        Ok(best.into_nearest(self))
    }

    /// Sub-index over the points whose coordinates all lie within
    /// ±(side−1)/2 of `center` (inclusive). May be empty; colors carry over.
    pub fn extract_region(&self, center: [i32; 3], side: u32) -> Result<RefIndex, SpatialError> {
        if side == 0 || side.is_multiple_of(2) {
            return Err(SpatialError::InvalidRegionSide(side));
        }
        let r = ((side - 1) / 2) as i32;
        let lo = [center[0] - r, center[1] - r, center[2] - r];
        let hi = [center[0] + r, center[1] + r, center[2] + r];

        let mut kept_ids = Vec::new();
        let mut kept_coords = Vec::new();
        let mut kept_colors = self.colors.as_ref().map(|_| Vec::new());
        if !self.is_empty() {
            self.collect_in_box(self.root, lo, hi, &mut |slot: usize| {
                kept_ids.push(self.ids[slot]);
                kept_coords.push(self.coords[slot]);
                if let (Some(out), Some(all)) = (kept_colors.as_mut(), self.colors.as_ref()) {
                    out.push(all[slot]);
                }
            });
        }
        // Re-key to the compact kept_* arrays, preserving original ids.
        let local_ids: Vec<usize> = (0..kept_ids.len()).collect();
        let mut sub = RefIndex::build_subset(&local_ids, &kept_coords, kept_colors.as_deref());
        for slot_id in sub.ids.iter_mut() {
            *slot_id = kept_ids[*slot_id];
        }
        Ok(sub)
    }

    fn collect_in_box(&self, node: u32, lo: [i32; 3], hi: [i32; 3], emit: &mut impl FnMut(usize)) {
        let nd = &self.nodes[node as usize];
        for axis in 0..3 {
            if nd.coord_min[axis] > hi[axis] || nd.coord_max[axis] < lo[axis] {
                return;
            }
        }
        match nd.kind {
            NodeKind::Leaf { start, len } => {
                for slot in start as usize..(start + len) as usize {
                    let c = self.coords[slot];
                    if (0..3).all(|a| c[a] >= lo[a] && c[a] <= hi[a]) {
                        emit(slot);
                    }
                }
            }
            NodeKind::Inner { left, right } => {
                self.collect_in_box(left, lo, hi, emit);
                self.collect_in_box(right, lo, hi, emit);
            }
        }
    }

    fn search_geometric(&self, node: u32, q: [f64; 3], best: &mut Best) {
        let nd = &self.nodes[node as usize];
        match nd.kind {
            NodeKind::Leaf { start, len } => {
                for slot in start as usize..(start + len) as usize {
                    let d2 = geom_dist2(q, self.coords[slot]);
                    best.offer(d2, self.mortons[slot], self.ids[slot], slot);
                }
            }
            NodeKind::Inner { left, right } => {
                let (first, second) = self.child_visit_order(q, left, right);
                for child in [first, second] {
                    let nd = &self.nodes[child as usize];
                    let bound = coord_box_dist2(q, nd.coord_min, nd.coord_max);
                    // `>` not `>=`: an equal bound can still hide a point
                    // that wins the Morton/index tie-break.
                    if best.is_set() && bound > best.dist2 {
                        continue;
                    }
                    self.search_geometric(child, q, best);
                }
            }
        }
    }

    fn search_hybrid(
        &self,
        node: u32,
        q_coords: [f64; 3],
        q_color: [f64; 3],
        alpha: f64,
        best: &mut Best,
    ) {
        let colors = self.colors.as_ref().unwrap();
        let nd = &self.nodes[node as usize];
        match nd.kind {
            NodeKind::Leaf { start, len } => {
                let (start, end) = (start as usize, (start + len) as usize);
                for (slot, &c) in (start..end).zip(&self.coords[start..end]) {
                    let d = hybrid_delta(
                        alpha,
                        q_coords,
                        q_color,
                        [c[0] as f64, c[1] as f64, c[2] as f64],
                        colors[slot],
                    );
                    best.offer(d, self.mortons[slot], self.ids[slot], slot);
                }
            }
            NodeKind::Inner { left, right } => {
                let (first, second) = self.child_visit_order(q_coords, left, right);
                for child in [first, second] {
                    let nd = &self.nodes[child as usize];
                    let geo = coord_box_dist2(q_coords, nd.coord_min, nd.coord_max);
                    let col = color_box_dist2(q_color, nd.color_min, nd.color_max);
                    let bound = alpha * geo + (1.0 - alpha) * col;
                    if best.is_set() && bound > best.dist2 {
                        continue;
                    }
                    self.search_hybrid(child, q_coords, q_color, alpha, best);
                }
            }
        }
    }

    /// Visit the child whose coordinate box is closer to the query first;
    /// purely a traversal-speed heuristic — correctness never depends on
    /// visit order because the winner comparison is a total order.
    fn child_visit_order(&self, q: [f64; 3], left: u32, right: u32) -> (u32, u32) {
        let l = &self.nodes[left as usize];
        let r = &self.nodes[right as usize];
        let dl = coord_box_dist2(q, l.coord_min, l.coord_max);
        let dr = coord_box_dist2(q, r.coord_min, r.coord_max);
        if dl <= dr {
            (left, right)
        } else {
            (right, left)
        }
    }
}

/// Running best candidate ordered by (distance, Morton code, point index).
struct Best {
    dist2: f64,
    morton: u64,
    id: usize,
    slot: usize,
    set: bool,
}

impl Best {
    fn none() -> Self {
        Best {
            dist2: f64::INFINITY,
            morton: u64::MAX,
            id: usize::MAX,
            slot: usize::MAX,
            set: false,
        }
    }

    #[inline]
    fn is_set(&self) -> bool {
        self.set
    }

    #[inline]
    fn offer(&mut self, dist2: f64, morton: u64, id: usize, slot: usize) {
        let better = !self.set
            || dist2 < self.dist2
            || (dist2 == self.dist2
                && (morton < self.morton || (morton == self.morton && id < self.id)));
        if better {
            self.dist2 = dist2;
            self.morton = morton;
            self.id = id;
            self.slot = slot;
            self.set = true;
        }
    }

    fn into_nearest(self, index: &RefIndex) -> Nearest {
        Nearest {
            index: self.id,
            dist2: self.dist2,
            coords: index.coords[self.slot],
        }
    }
}

/// Squared distance from `q` to the closest point of an axis-aligned
/// integer box; 0 when `q` is inside. A lower bound on `geom_dist2` to any
/// point in the box, including under floating-point rounding (the rounding
/// of each step is monotone).
#[inline]
fn coord_box_dist2(q: [f64; 3], lo: [i32; 3], hi: [i32; 3]) -> f64 {
    let mut acc = 0.0;
    for axis in 0..3 {
        let l = lo[axis] as f64;
        let h = hi[axis] as f64;
        let d = if q[axis] < l {
            l - q[axis]
        } else if q[axis] > h {
            q[axis] - h
        } else {
            0.0
        };
        acc += d * d;
    }
    acc
}

#[inline]
fn color_box_dist2(q: [f64; 3], lo: [f64; 3], hi: [f64; 3]) -> f64 {
    let mut acc = 0.0;
    for ch in 0..3 {
        let d = if q[ch] < lo[ch] {
            lo[ch] - q[ch]
        } else if q[ch] > hi[ch] {
            q[ch] - hi[ch]
        } else {
            0.0
        };
        acc += d * d;
    }
    acc
}

/// Recursively builds the subtree for `entries[start..start+len]`, pushing
/// nodes onto `nodes` and returning the subtree root's node id. Splits the
/// widest coordinate axis at the median; the split key is total (coordinate,
/// Morton, id), so the tree shape is a pure function of the point set.
fn build_node(entries: &mut [BuildEntry], start: usize, len: usize, nodes: &mut Vec<Node>) -> u32 {
    let slice = &entries[start..start + len];
    let mut coord_min = [i32::MAX; 3];
    let mut coord_max = [i32::MIN; 3];
    let mut color_min = [f64::INFINITY; 3];
    let mut color_max = [f64::NEG_INFINITY; 3];
    for e in slice {
        for axis in 0..3 {
            coord_min[axis] = coord_min[axis].min(e.coords[axis]);
            coord_max[axis] = coord_max[axis].max(e.coords[axis]);
            color_min[axis] = color_min[axis].min(e.color[axis]);
            color_max[axis] = color_max[axis].max(e.color[axis]);
        }
    }

    let widest = {
        let mut w = 0;
        for axis in 1..3 {
            if coord_max[axis] - coord_min[axis] > coord_max[w] - coord_min[w] {
                w = axis;
            }
        }
        w
    };

    // A leaf when small or degenerate (all points at one coordinate).
    if len <= LEAF_SIZE || coord_min == coord_max {
        nodes.push(Node {
            coord_min,
            coord_max,
            color_min,
            color_max,
            kind: NodeKind::Leaf {
                start: start as u32,
                len: len as u32,
            },
        });
        return (nodes.len() - 1) as u32;
    }

    let mid = len / 2;
    entries[start..start + len].select_nth_unstable_by(mid, |a, b| {
        (a.coords[widest], a.morton, a.id).cmp(&(b.coords[widest], b.morton, b.id))
    });

    let left = build_node(entries, start, mid, nodes);
    let right = build_node(entries, start + mid, len - mid, nodes);
    nodes.push(Node {
        coord_min,
        coord_max,
        color_min,
        color_max,
        kind: NodeKind::Inner { left, right },
    });
    (nodes.len() - 1) as u32
}
