//! Inner multigrid preconditioner for G = sqrt(beta) A + M.
//!
//! One application N of the preconditioner is a single V(nu, nu) cycle on
//! G_k with damped Jacobi smoothing, zero initial guess and an exact solve
//! on level 0. N is symmetric positive definite and spectrally equivalent
//! to G^{-1} uniformly in beta and the level, which is all the outer
//! smoother needs.
//!
//! Scaled variants: `apply_linv` approximates the inverse of the metric
//! operator L = G / w_k (so it multiplies by w_k first), and `apply_cinv`
//! applies w_k N to both blocks of a pair, approximating the inverse of
//! C = blockdiag(L, L).

use crate::error::Result;
use crate::hierarchy::SaddleOps;
use crate::linalg::{self, SpdFactor};
use crate::saddle::BlockVec;

/// Damped Jacobi weight for the inner smoother, by space dimension.
pub fn jacobi_omega(dim: usize) -> f64 {
    match dim {
        2 => 2.0 / 3.0,
        3 => 4.0 / 7.0,
        _ => unreachable!("meshes are 2d or 3d"),
    }
}

pub struct InnerSolver {
    pub nu: usize,
    pub omega: f64,
    beta: f64,
    /// Cholesky factor of G_0; None when level 0 has no interior vertex.
    coarse: Option<SpdFactor>,
}

#[derive(Clone, Copy, Debug)]
pub struct ContractionEstimate {
    pub value: f64,
    pub iters: usize,
    pub converged: bool,
}

impl InnerSolver {
    pub fn new(ops: &SaddleOps, nu: usize) -> Result<Self> {
        Self::with_omega(ops, nu, jacobi_omega(ops.dim()))
    }

    pub fn with_omega(ops: &SaddleOps, nu: usize, omega: f64) -> Result<Self> {
        assert!(nu >= 1, "inner cycle needs at least one smoothing step");
        let coarse = if ops.n(0) > 0 {
            Some(SpdFactor::new(&ops.g[0], "coarse G matrix")?)
        } else {
            None
        };
        Ok(InnerSolver {
            nu,
            omega,
            beta: ops.beta,
            coarse,
        })
    }

    fn check(&self, ops: &SaddleOps) {
        assert!(
            self.beta == ops.beta,
            "inner solver built for beta {} used with beta {}",
            self.beta,
            ops.beta
        );
    }

    /// One V(nu, nu) cycle for G_k x = rhs from a zero initial guess.
    pub fn apply(&self, ops: &SaddleOps, k: usize, rhs: &[f64]) -> Vec<f64> {
        self.check(ops);
        self.vcycle(ops, k, rhs)
    }

    fn vcycle(&self, ops: &SaddleOps, k: usize, b: &[f64]) -> Vec<f64> {
        if k == 0 {
            return match &self.coarse {
                Some(f) => f.solve(b),
                None => Vec::new(),
            };
        }
        let g = &ops.g[k];
        let d = &ops.g_diag[k];
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = vec![0.0; n];
        for _ in 0..self.nu {
            self.jacobi_step(g, d, b, &mut x, &mut r);
        }
        g.matvec(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let rc = ops.hier.p[k].matvec_transpose_alloc(&r);
        let ec = self.vcycle(ops, k - 1, &rc);
        let ef = ops.hier.p[k].matvec_alloc(&ec);
        linalg::axpy(&mut x, 1.0, &ef);
        for _ in 0..self.nu {
            self.jacobi_step(g, d, b, &mut x, &mut r);
        }
        x
    }

    fn jacobi_step(&self, g: &linalg::Csr, d: &[f64], b: &[f64], x: &mut [f64], r: &mut [f64]) {
        g.matvec(x, r);
        for i in 0..x.len() {
            x[i] += self.omega * (b[i] - r[i]) / d[i];
        }
    }

    /// Approximate inverse of L_k = G_k / w_k: rhs is a function-space
    /// residual, so scale by w_k and run the cycle.
    pub fn apply_linv(&self, ops: &SaddleOps, k: usize, rhs: &[f64]) -> Vec<f64> {
        let w = ops.weight(k);
        let scaled: Vec<f64> = rhs.iter().map(|v| w * v).collect();
        self.apply(ops, k, &scaled)
    }

    /// Approximate inverse of C = blockdiag(L, L) on a pair.
    pub fn apply_cinv(&self, ops: &SaddleOps, k: usize, u: &BlockVec) -> BlockVec {
        BlockVec {
            p: self.apply_linv(ops, k, &u.p),
            y: self.apply_linv(ops, k, &u.y),
        }
    }

    /// Raw blockwise N (no metric scaling).
    pub fn apply_blocks(&self, ops: &SaddleOps, k: usize, u: &BlockVec) -> BlockVec {
        BlockVec {
            p: self.apply(ops, k, &u.p),
            y: self.apply(ops, k, &u.y),
        }
    }

    /// G-norm contraction factor of the inner error operator I - N G_k,
    /// estimated by power iteration on the G-symmetric operator.
    pub fn estimate_contraction(
        &self,
        ops: &SaddleOps,
        k: usize,
        tol: f64,
        max_iters: usize,
        seed: u64,
    ) -> ContractionEstimate {
        self.check(ops);
        let n = ops.n(k);
        if n == 0 {
            return ContractionEstimate {
                value: 0.0,
                iters: 0,
                converged: true,
            };
        }
        let g = &ops.g[k];
        let mut v = linalg::seeded_unit_vector(n, seed);
        let mut last = f64::INFINITY;
        let mut stable = 0;
        let mut q = 0.0;
        let mut iters = 0;
        for it in 1..=max_iters {
            iters = it;
            let gv = g.matvec_alloc(&v);
            let ngv = self.apply(ops, k, &gv);
            // ev = (I - N G) v
            let ev: Vec<f64> = v.iter().zip(&ngv).map(|(a, b)| a - b).collect();
            let den = linalg::dot(&v, &gv);
            q = linalg::dot(&ev, &gv).abs() / den;
            if (q - last).abs() <= tol * q.max(1e-300) {
                stable += 1;
                if stable >= 3 {
                    return ContractionEstimate {
                        value: q,
                        iters: it,
                        converged: true,
                    };
                }
            } else {
                stable = 0;
            }
            last = q;
            let nrm = linalg::norm2(&ev);
            if nrm == 0.0 {
                return ContractionEstimate {
                    value: 0.0,
                    iters: it,
                    converged: true,
                };
            }
            v = ev;
            linalg::scale(&mut v, 1.0 / nrm);
        }
        ContractionEstimate {
            value: q,
            iters,
            converged: false,
        }
    }
}
