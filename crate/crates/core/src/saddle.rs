//! Block vectors and the discrete norms of the saddle problem.
//!
//! A `BlockVec` stacks the two coefficient vectors (p, y) of one level.
//! Flattened layout is [p; y], matching `SaddleOps::k_csr`.
//!
//! `MeshNorms` evaluates the two mesh-dependent norms used by the theory:
//!
//! * |||u|||_0 = sqrt(w_k) |u|_2, the weighted Euclidean norm, and
//! * |||u|||_1 = sqrt((K u)^T Ghat^{-1} (K u)) with Ghat = blockdiag(G, G),
//!
//! where the Ghat solve is exact (sparse Cholesky of G). The operator norm
//! measured by the spectral harness is taken in |||.|||_1, whose Gram matrix
//! is S = K Ghat^{-1} K.

use crate::error::Result;
use crate::hierarchy::SaddleOps;
use crate::linalg::{self, SpdFactor};

#[derive(Clone, Debug)]
pub struct BlockVec {
    pub p: Vec<f64>,
    pub y: Vec<f64>,
}

impl BlockVec {
    pub fn zeros(n: usize) -> Self {
        BlockVec {
            p: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    /// Deterministic unit vector for iteration starts.
    pub fn seeded(n: usize, seed: u64) -> Self {
        let flat = linalg::seeded_unit_vector(2 * n, seed);
        BlockVec::from_flat(&flat)
    }

    pub fn n(&self) -> usize {
        debug_assert_eq!(self.p.len(), self.y.len());
        self.p.len()
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        let n = flat.len() / 2;
        assert_eq!(flat.len(), 2 * n);
        BlockVec {
            p: flat[..n].to_vec(),
            y: flat[n..].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(2 * self.n());
        flat.extend_from_slice(&self.p);
        flat.extend_from_slice(&self.y);
        flat
    }

    pub fn dot(&self, other: &BlockVec) -> f64 {
        linalg::dot(&self.p, &other.p) + linalg::dot(&self.y, &other.y)
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// self += alpha * other.
    pub fn axpy(&mut self, alpha: f64, other: &BlockVec) {
        linalg::axpy(&mut self.p, alpha, &other.p);
        linalg::axpy(&mut self.y, alpha, &other.y);
    }

    pub fn scale(&mut self, alpha: f64) {
        linalg::scale(&mut self.p, alpha);
        linalg::scale(&mut self.y, alpha);
    }

    pub fn minus(&self, other: &BlockVec) -> BlockVec {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }
}

/// The explicit inf-sup witness: for u = (p, y) the pair w = (p - y, -y - p)
/// turns the saddle form into the pair norm,
///
///   <K u, w> = u^T Ghat u   and   |||w|||^2 = 2 |||u|||^2,
///
/// so the returned ratio <K u, w> / (|||u||| |||w|||) equals 1/sqrt(2)
/// exactly, independent of beta and the level. (The metric weight w_k
/// cancels: [D^{-1}K u, w]_k = <K u, w>.)
pub fn inf_sup_witness(ops: &SaddleOps, k: usize, u: &BlockVec) -> (BlockVec, f64) {
    let n = u.n();
    assert_eq!(n, ops.n(k));
    let mut w = BlockVec::zeros(n);
    for i in 0..n {
        w.p[i] = u.p[i] - u.y[i];
        w.y[i] = -u.y[i] - u.p[i];
    }
    let ku = ops.apply_k(k, u);
    let num = ku.dot(&w);
    let den = ops.pair_h1beta_norm(k, u) * ops.pair_h1beta_norm(k, &w);
    (w, num / den)
}

/// Exact norm evaluator for one level. Holds a Cholesky factor of G_k.
pub struct MeshNorms {
    pub level: usize,
    n: usize,
    weight: f64,
    g_chol: SpdFactor,
}

impl MeshNorms {
    pub fn new(ops: &SaddleOps, level: usize) -> Result<Self> {
        let g_chol = SpdFactor::new(&ops.g[level], "level G matrix")?;
        Ok(MeshNorms {
            level,
            n: ops.n(level),
            weight: ops.weight(level),
            g_chol,
        })
    }

    pub fn norm_0(&self, u: &BlockVec) -> f64 {
        self.weight.sqrt() * u.norm2()
    }

    /// Ghat^{-1} u, blockwise exact solve.
    pub fn ghat_solve(&self, u: &BlockVec) -> BlockVec {
        BlockVec {
            p: self.g_chol.solve(&u.p),
            y: self.g_chol.solve(&u.y),
        }
    }

    /// S u = K Ghat^{-1} K u, the Gram operator of |||.|||_1.
    pub fn s_apply(&self, ops: &SaddleOps, u: &BlockVec) -> BlockVec {
        assert_eq!(u.n(), self.n);
        let ku = ops.apply_k(self.level, u);
        let z = self.ghat_solve(&ku);
        ops.apply_k(self.level, &z)
    }

    pub fn norm_1(&self, ops: &SaddleOps, u: &BlockVec) -> f64 {
        assert_eq!(u.n(), self.n);
        let ku = ops.apply_k(self.level, u);
        let z = self.ghat_solve(&ku);
        ku.dot(&z).max(0.0).sqrt()
    }
}
