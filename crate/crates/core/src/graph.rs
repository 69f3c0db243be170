//! Per-block voxel graphs and the adaptive one-hop low-pass filter.
//!
//! Vertices are a block's occupied voxels in block point order; edges join
//! voxels at Euclidean distance ≤ 1 with weight 1/distance. On an integer
//! grid that is exactly the 6-neighborhood with unit weights, but weights
//! are carried explicitly so the structure states its own rule.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::spatial::signal_sse;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("filter response is only defined for eigenvalues in [0, 2], got {0}")]
    LambdaOutOfRange(f64),
}

/// Undirected weighted graph over one block's voxels.
pub struct BlockGraph {
    n: usize,
    /// Each undirected edge once, as (a, b, weight) with a < b.
    edges: Vec<(u32, u32, f64)>,
    /// Per-vertex neighbor list, both directions.
    adjacency: Vec<Vec<(u32, f64)>>,
    /// Weighted degree D_aa = Σ_b W_ab; 0.0 for isolated vertices.
    degrees: Vec<f64>,
}

/// Builds the distance-threshold graph over `coords`, which must be the
/// block's voxel coordinates in block point order (vertex v == point v).
pub fn build_block_graph(coords: &[[i32; 3]]) -> BlockGraph {
    let n = coords.len();
    let mut slot = std::collections::HashMap::with_capacity(n);
    for (i, &c) in coords.iter().enumerate() {
        slot.insert(c, i as u32);
    }

    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); n];
    let mut degrees = vec![0.0; n];
    // Distance ≤ 1 on an integer grid leaves only the unit axis offsets;
    // probing the three positive ones visits each undirected pair once.
    for (a, &[x, y, z]) in coords.iter().enumerate() {
        for nb in [[x + 1, y, z], [x, y + 1, z], [x, y, z + 1]] {
            if let Some(&b) = slot.get(&nb) {
                let (a, b) = (a as u32, b);
                let w = 1.0; // 1/distance with distance exactly 1
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                edges.push((lo, hi, w));
                adjacency[a as usize].push((b, w));
                adjacency[b as usize].push((a, w));
                degrees[a as usize] += w;
                degrees[b as usize] += w;
            }
        }
    }
    edges.sort_unstable_by_key(|x| (x.0, x.1));

    BlockGraph {
        n,
        edges,
        adjacency,
        degrees,
    }
}

impl BlockGraph {
    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn neighbors(&self, a: usize) -> &[(u32, f64)] {
        &self.adjacency[a]
    }

    /// Dense combinatorial Laplacian L = D − W.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for a in 0..self.n {
            l[(a, a)] = self.degrees[a];
        }
        for &(a, b, w) in &self.edges {
            l[(a as usize, b as usize)] = -w;
            l[(b as usize, a as usize)] = -w;
        }
        l
    }

    /// Dense random-walk Laplacian D⁻¹L; rows of isolated vertices are
    /// zero, so I − ½·(this) passes such vertices through unchanged.
    pub fn random_walk_laplacian(&self) -> DMatrix<f64> {
        let mut l = self.laplacian();
        for a in 0..self.n {
            let d = self.degrees[a];
            if d == 0.0 {
                continue;
            }
            for b in 0..self.n {
                l[(a, b)] /= d;
            }
        }
        l
    }
}

/// One application of the vertex-domain low-pass filter: each vertex moves
/// halfway toward the weighted average of its neighbors,
/// y(a) = (D_aa·x(a) + Σ_b W_ab·x(b)) / (2·D_aa),
/// independently per channel. Isolated vertices pass through unchanged.
/// Sparse accumulation only — no matrices, no eigenvectors.
pub fn one_hop_filter(g: &BlockGraph, x: &[[f64; 3]]) -> Vec<[f64; 3]> {
    assert_eq!(x.len(), g.n, "signal rows must match vertex count");
    let mut y = vec![[0.0; 3]; g.n];
    for a in 0..g.n {
        let d = g.degrees[a];
        if d == 0.0 {
            y[a] = x[a];
            continue;
        }
        for ch in 0..3 {
            let mut acc = d * x[a][ch];
            for &(b, w) in &g.adjacency[a] {
                acc += w * x[b as usize][ch];
            }
            y[a][ch] = acc / (2.0 * d);
        }
    }
    y
}

/// `k`-fold composition of [`one_hop_filter`]; k = 0 is the identity.
pub fn apply_k_filter(g: &BlockGraph, x: &[[f64; 3]], k: u8) -> Vec<[f64; 3]> {
    let mut cur = x.to_vec();
    for _ in 0..k {
        cur = one_hop_filter(g, &cur);
    }
    cur
}

/// Result of the per-block filter-strength search.
pub struct SelectK {
    /// Chosen filter count, the smallest k attaining the minimum error.
    pub k: u8,
    /// The predictor filtered k times.
    pub filtered: Vec<[f64; 3]>,
    /// Squared error of `filtered` against the target, all channels.
    pub sse: f64,
    /// Squared error of the unfiltered predictor (k = 0).
    pub sse_unfiltered: f64,
}

/// Picks the filter count k ∈ [0, kmax] minimizing the squared error
/// between `target` and the k-times-filtered `predictor`, summed over all
/// three channels. Ties keep the smaller k, so k = 0 wins when filtering
/// never strictly helps and the plain predictor is recovered.
pub fn select_k(g: &BlockGraph, target: &[[f64; 3]], predictor: &[[f64; 3]], kmax: u8) -> SelectK {
    let mut cur = predictor.to_vec();
    let sse_unfiltered = signal_sse(target, &cur);
    let mut best_k = 0u8;
    let mut best_sse = sse_unfiltered;
    let mut best_signal = cur.clone();
    for k in 1..=kmax {
        cur = one_hop_filter(g, &cur);
        let sse = signal_sse(target, &cur);
        if sse < best_sse {
            best_k = k;
            best_sse = sse;
            best_signal = cur.clone();
        }
    }
    SelectK {
        k: best_k,
        filtered: best_signal,
        sse: best_sse,
        sse_unfiltered,
    }
}

/// Frequency response (1 − λ/2)ᵏ of the k-fold filter, evaluated at each
/// eigenvalue in `lambdas`; all must lie in [0, 2].
pub fn spectral_response(k: u8, lambdas: &[f64]) -> Result<Vec<f64>, GraphError> {
    lambdas
        .iter()
        .map(|&l| {
            if !(0.0..=2.0).contains(&l) {
                Err(GraphError::LambdaOutOfRange(l))
            } else {
                Ok((1.0 - l / 2.0).powi(k as i32))
            }
        })
        .collect()
}
