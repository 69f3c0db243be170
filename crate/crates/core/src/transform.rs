//! Orthonormal per-block transform from the graph Laplacian, plus uniform
//! scalar quantization of the resulting coefficients.
//!
//! The basis is the eigendecomposition of the combinatorial Laplacian
//! L = D − W of the block graph, with a fully pinned ordering and sign rule
//! so that both codec ends, running the same build on the same geometry,
//! construct bit-identical bases. Cross-build identity is NOT guaranteed
//! (eigensolvers may differ); the stream carries [`BASIS_BUILD_TAG`] so a
//! decoder can warn when its basis construction differs from the encoder's.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::graph::BlockGraph;

/// Identifies the basis-construction procedure baked into this build.
/// Bump whenever the eigendecomposition backend or the ordering/sign
/// canonicalization changes observably.
pub const BASIS_BUILD_TAG: u32 = 0x0100_0023;

/// Orthonormal basis for one block: eigenvectors of the block graph's
/// combinatorial Laplacian as columns, ascending eigenvalue order.
pub struct GftBasis {
    eigenvalues: Vec<f64>,
    /// Column r is the basis vector for `eigenvalues[r]`.
    vectors: DMatrix<f64>,
}

impl GftBasis {
    /// Eigendecomposes L = D − W and canonicalizes the result: columns
    /// sorted by ascending eigenvalue (ties keep the solver's column
    /// order), then each column's sign fixed so its largest-magnitude
    /// entry is positive (ties → first such entry).
    pub fn from_graph(g: &BlockGraph) -> Self {
        let n = g.vertex_count();
        let eig = SymmetricEigen::new(g.laplacian());

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .expect("Laplacian eigenvalues are finite")
                .then(a.cmp(&b))
        });

        let mut eigenvalues = Vec::with_capacity(n);
        let mut vectors = DMatrix::zeros(n, n);
        for (r, &src) in order.iter().enumerate() {
            eigenvalues.push(eig.eigenvalues[src]);
            let col = eig.eigenvectors.column(src);
            let mut lead = 0;
            for a in 1..n {
                if col[a].abs() > col[lead].abs() {
                    lead = a;
                }
            }
            let flip = if col[lead] < 0.0 { -1.0 } else { 1.0 };
            for a in 0..n {
                vectors[(a, r)] = flip * col[a];
            }
        }

        GftBasis {
            eigenvalues,
            vectors,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// Analysis: coefficients = Uᵀ·x per channel, coefficient r in the
    /// ascending-eigenvalue slot r. Energy is preserved (orthonormality).
    pub fn forward(&self, x: &[[f64; 3]]) -> Vec<[f64; 3]> {
        let n = self.len();
        assert_eq!(x.len(), n, "signal rows must match basis size");
        let mut coeffs = vec![[0.0; 3]; n];
        for (r, out) in coeffs.iter_mut().enumerate() {
            for ch in 0..3 {
                let mut acc = 0.0;
                for (a, row) in x.iter().enumerate() {
                    acc += self.vectors[(a, r)] * row[ch];
                }
                out[ch] = acc;
            }
        }
        coeffs
    }

    /// Synthesis: x = U·coefficients per channel; exact inverse of
    /// [`Self::forward`] up to floating-point rounding.
    pub fn inverse(&self, coeffs: &[[f64; 3]]) -> Vec<[f64; 3]> {
        let n = self.len();
        assert_eq!(coeffs.len(), n, "coefficient rows must match basis size");
        let mut x = vec![[0.0; 3]; n];
        for (a, out) in x.iter_mut().enumerate() {
            for ch in 0..3 {
                let mut acc = 0.0;
                for (r, row) in coeffs.iter().enumerate() {
                    acc += self.vectors[(a, r)] * row[ch];
                }
                out[ch] = acc;
            }
        }
        x
    }
}

/// Midtread scalar quantizer, half away from zero: round(x / qstep).
#[inline]
pub fn quantize_value(x: f64, qstep: f64) -> i64 {
    debug_assert!(qstep > 0.0);
    (x / qstep).round() as i64
}

#[inline]
pub fn dequantize_value(k: i64, qstep: f64) -> f64 {
    k as f64 * qstep
}

pub fn quantize(xs: &[f64], qstep: f64) -> Vec<i64> {
    assert!(qstep > 0.0, "quantizer step must be positive");
    xs.iter().map(|&x| quantize_value(x, qstep)).collect()
}

pub fn dequantize(ks: &[i64], qstep: f64) -> Vec<f64> {
    assert!(qstep > 0.0, "quantizer step must be positive");
    ks.iter().map(|&k| dequantize_value(k, qstep)).collect()
}
