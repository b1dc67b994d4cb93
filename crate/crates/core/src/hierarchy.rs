//! Level hierarchy: meshes with their assembled operators.
//!
//! `Hierarchy` holds everything that does not depend on the regularization
//! parameter (meshes, stiffness, mass, prolongations). `SaddleOps` adds the
//! beta-dependent pieces: the saddle block matrix
//!
//! ```text
//!     K = [ sqrt(beta) A      -M          ]
//!         [     -M        -sqrt(beta) A   ]
//! ```
//!
//! acting on stacked coefficient pairs (p, y), and the reaction-diffusion
//! matrix G = sqrt(beta) A + M used by the inner preconditioner and the
//! norm machinery. K is symmetric and quasidefinite, so it factors stably.

use crate::error::Result;
use crate::fem;
use crate::linalg::Csr;
use crate::mesh::{self, Domain, MeshLevel};
use crate::saddle::BlockVec;

pub struct Hierarchy {
    pub domain: Domain,
    pub meshes: Vec<MeshLevel>,
    pub a: Vec<Csr>,
    pub m: Vec<Csr>,
    /// p[k] prolongs interior DOFs of level k-1 to level k; p[0] is 0 x 0.
    pub p: Vec<Csr>,
}

impl Hierarchy {
    pub fn build(domain: Domain, max_level: usize) -> Result<Self> {
        let meshes = mesh::hierarchy(domain, max_level);
        let mut a = Vec::with_capacity(meshes.len());
        let mut m = Vec::with_capacity(meshes.len());
        let mut p = vec![Csr::zeros(meshes[0].n_interior(), 0)];
        for mesh in &meshes {
            a.push(fem::stiffness(mesh)?);
            m.push(fem::mass(mesh)?);
        }
        for k in 1..meshes.len() {
            p.push(fem::prolongation(&meshes[k], &meshes[k - 1])?);
        }
        Ok(Hierarchy {
            domain,
            meshes,
            a,
            m,
            p,
        })
    }

    pub fn max_level(&self) -> usize {
        self.meshes.len() - 1
    }

    pub fn n(&self, k: usize) -> usize {
        self.meshes[k].n_interior()
    }
}

/// Beta-specific operators over a hierarchy.
pub struct SaddleOps<'h> {
    pub hier: &'h Hierarchy,
    pub beta: f64,
    pub sqrt_beta: f64,
    /// G_k = sqrt(beta) A_k + M_k per level.
    pub g: Vec<Csr>,
    pub g_diag: Vec<Vec<f64>>,
}

impl<'h> SaddleOps<'h> {
    pub fn new(hier: &'h Hierarchy, beta: f64) -> Self {
        let sqrt_beta = beta.sqrt();
        let g: Vec<Csr> = hier
            .a
            .iter()
            .zip(&hier.m)
            .map(|(a, m)| Csr::linear_combination(sqrt_beta, a, 1.0, m))
            .collect();
        let g_diag = g.iter().map(|g| g.diagonal()).collect();
        SaddleOps {
            hier,
            beta,
            sqrt_beta,
            g,
            g_diag,
        }
    }

    pub fn max_level(&self) -> usize {
        self.hier.max_level()
    }

    pub fn n(&self, k: usize) -> usize {
        self.hier.n(k)
    }

    pub fn h(&self, k: usize) -> f64 {
        self.hier.meshes[k].h
    }

    pub fn weight(&self, k: usize) -> f64 {
        fem::metric_weight(&self.hier.meshes[k])
    }

    pub fn dim(&self) -> usize {
        self.hier.domain.dim()
    }

    /// y = K_k x.
    pub fn apply_k(&self, k: usize, x: &BlockVec) -> BlockVec {
        let a = &self.hier.a[k];
        let m = &self.hier.m[k];
        let n = self.n(k);
        let mut out = BlockVec::zeros(n);
        let mut tmp = vec![0.0; n];
        a.matvec(&x.p, &mut out.p);
        for v in out.p.iter_mut() {
            *v *= self.sqrt_beta;
        }
        m.matvec(&x.y, &mut tmp);
        for (o, t) in out.p.iter_mut().zip(&tmp) {
            *o -= t;
        }
        m.matvec(&x.p, &mut out.y);
        for v in out.y.iter_mut() {
            *v = -*v;
        }
        a.matvec(&x.y, &mut tmp);
        for (o, t) in out.y.iter_mut().zip(&tmp) {
            *o -= self.sqrt_beta * t;
        }
        out
    }

    /// Operator form of the saddle problem: D^{-1} K = K / w_k.
    pub fn apply_b(&self, k: usize, x: &BlockVec) -> BlockVec {
        let mut out = self.apply_k(k, x);
        out.scale(1.0 / self.weight(k));
        out
    }

    /// Residual b - K_k x.
    pub fn residual(&self, k: usize, b: &BlockVec, x: &BlockVec) -> BlockVec {
        let mut r = self.apply_k(k, x);
        r.scale(-1.0);
        r.axpy(1.0, b);
        r
    }

    /// Assembled 2n x 2n saddle matrix with block layout [p; y].
    pub fn k_csr(&self, k: usize) -> Csr {
        let a = &self.hier.a[k];
        let m = &self.hier.m[k];
        let n = self.n(k);
        let mut triplets = Vec::with_capacity(2 * a.nnz() + 2 * m.nnz());
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push((i, j, self.sqrt_beta * v));
                triplets.push((n + i, n + j, -self.sqrt_beta * v));
            }
            let (cols, vals) = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push((i, n + j, -v));
                triplets.push((n + i, j, -v));
            }
        }
        Csr::from_triplets(2 * n, 2 * n, &triplets)
    }

    /// Blockwise algebraic restriction P_k^T to level k-1.
    pub fn restrict(&self, k: usize, fine: &BlockVec) -> BlockVec {
        let p = &self.hier.p[k];
        BlockVec {
            p: p.matvec_transpose_alloc(&fine.p),
            y: p.matvec_transpose_alloc(&fine.y),
        }
    }

    /// Blockwise prolongation P_k from level k-1.
    pub fn prolong(&self, k: usize, coarse: &BlockVec) -> BlockVec {
        let p = &self.hier.p[k];
        BlockVec {
            p: p.matvec_alloc(&coarse.p),
            y: p.matvec_alloc(&coarse.y),
        }
    }

    /// Norm induced by blockdiag(G, G): the H^1-beta pair norm
    /// sqrt(|p|^2 + |y|^2) with |v|^2 = v^T (M + sqrt(beta) A) v.
    pub fn pair_h1beta_norm(&self, k: usize, u: &BlockVec) -> f64 {
        let g = &self.g[k];
        let gp = g.matvec_alloc(&u.p);
        let gy = g.matvec_alloc(&u.y);
        (crate::linalg::dot(&u.p, &gp) + crate::linalg::dot(&u.y, &gy)).sqrt()
    }
}
