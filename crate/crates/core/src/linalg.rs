//! Sparse and dense linear algebra shared across the solver.
//!
//! The CSR type carries everything assembly produces; factorizations and
//! dense eigenproblems are delegated to faer. The Lanczos routine estimates
//! extreme eigenvalues of symmetric operators given only a matvec closure.

use faer::sparse::{SparseColMat, Triplet};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

static SEQUENTIAL_BACKEND: std::sync::Once = std::sync::Once::new();

/// Pins the dense backend to one thread. Problem sizes here are small, and
/// a sweep cell must not fan out onto worker threads: results stay bitwise
/// identical no matter how many cells run concurrently.
pub(crate) fn pin_sequential_backend() {
    SEQUENTIAL_BACKEND.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Compressed sparse row matrix with explicit entries (duplicates summed at build).
#[derive(Debug, Clone)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Csr {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; n_rows];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for &(i, j, v) in &entries {
            assert!(i < n_rows && j < n_cols, "triplet out of bounds");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                vals.push(v);
                row_counts[i] += 1;
                last = Some((i, j));
            }
        }
        let mut row_ptr = vec![0usize; n_rows + 1];
        for i in 0..n_rows {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        Csr {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.vals[lo..hi])
    }

    /// Entry lookup by binary search; absent entries read as zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[idx] * x[self.col_idx[idx]];
            }
            y[i] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    /// y = A^T x
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        y.fill(0.0);
        for i in 0..self.n_rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[idx]] += self.vals[idx] * xi;
            }
        }
    }

    pub fn matvec_transpose_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_cols];
        self.matvec_transpose(x, &mut y);
        y
    }

    /// alpha * A + beta * B with arbitrary (possibly different) patterns.
    pub fn linear_combination(alpha: f64, a: &Csr, beta: f64, b: &Csr) -> Csr {
        assert_eq!(a.n_rows, b.n_rows);
        assert_eq!(a.n_cols, b.n_cols);
        let mut triplets = Vec::with_capacity(a.nnz() + b.nnz());
        for i in 0..a.n_rows {
            let (ca, va) = a.row(i);
            for (&j, &v) in ca.iter().zip(va) {
                triplets.push((i, j, alpha * v));
            }
            let (cb, vb) = b.row(i);
            for (&j, &v) in cb.iter().zip(vb) {
                triplets.push((i, j, beta * v));
            }
        }
        Csr::from_triplets(a.n_rows, a.n_cols, &triplets)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, i)).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if (v - self.get(j, i)).abs() > tol * (1.0 + v.abs()) {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.n_rows, self.n_cols, &triplets)
            .expect("valid triplets")
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Sparse Cholesky wrapper for symmetric positive definite systems.
pub struct SpdFactor {
    n: usize,
    factor: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl SpdFactor {
    pub fn new(a: &Csr, what: &'static str) -> Result<Self> {
        pin_sequential_backend();
        let f = a
            .to_faer()
            .sp_cholesky(faer::Side::Lower)
            .map_err(|_| Error::Singular { what })?;
        Ok(SpdFactor {
            n: a.n_rows,
            factor: f,
        })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        use faer::linalg::solvers::Solve;
        assert_eq!(x.len(), self.n);
        let col = faer::MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.factor.solve_in_place(col);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Sparse LU wrapper for the symmetric indefinite saddle matrices.
pub struct LuFactor {
    n: usize,
    factor: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl LuFactor {
    pub fn new(a: &Csr, what: &'static str) -> Result<Self> {
        pin_sequential_backend();
        let f = a
            .to_faer()
            .sp_lu()
            .map_err(|_| Error::Singular { what })?;
        Ok(LuFactor {
            n: a.n_rows,
            factor: f,
        })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        use faer::linalg::solvers::Solve;
        assert_eq!(x.len(), self.n);
        let col = faer::MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.factor.solve_in_place(col);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(x: &mut [f64], alpha: f64) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Deterministic pseudo-random unit vector; the seed fixes it exactly.
pub fn seeded_unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nrm = norm2(&v);
    if nrm > 0.0 {
        scale(&mut v, 1.0 / nrm);
    }
    v
}

/// Extreme eigenvalue estimates from a Lanczos run.
#[derive(Debug, Clone, Copy)]
pub struct SpectralBounds {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub restarts: usize,
}

/// Lanczos with full reorthogonalization for a symmetric operator.
///
/// Breakdown (an invariant subspace was hit) restarts with a fresh seed,
/// at most three times; if the subspace covers the whole space the current
/// tridiagonal already holds the exact extremes and is used directly.
pub fn lanczos_extremes<F>(
    n: usize,
    mut apply: F,
    max_steps: usize,
    seed: u64,
) -> Result<SpectralBounds>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if n == 0 {
        return Err(Error::Eigen("empty operator".into()));
    }
    pin_sequential_backend();
    if n == 1 {
        let mut y = [0.0];
        apply(&[1.0], &mut y);
        return Ok(SpectralBounds {
            min: y[0],
            max: y[0],
            steps: 1,
            restarts: 0,
        });
    }

    let steps = max_steps.min(n);
    let mut restarts = 0usize;
    loop {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut v = seeded_unit_vector(n, seed.wrapping_add(restarts as u64));
        let mut w = vec![0.0; n];
        let mut broke_down = false;

        for _ in 0..steps {
            apply(&v, &mut w);
            let alpha = dot(&v, &w);
            alphas.push(alpha);
            axpy(&mut w, -alpha, &v);
            if let Some(prev) = basis.last() {
                axpy(&mut w, -betas.last().unwrap(), prev);
            }
            basis.push(v.clone());
            // full reorthogonalization keeps the Ritz values trustworthy
            for q in &basis {
                let c = dot(&w, q);
                axpy(&mut w, -c, q);
            }
            let beta = norm2(&w);
            if beta < 1e-12 {
                broke_down = true;
                break;
            }
            betas.push(beta);
            scale(&mut w, 1.0 / beta);
            std::mem::swap(&mut v, &mut w);
        }

        let m = alphas.len();
        if broke_down && m < 3 && m < n && restarts < 3 {
            restarts += 1;
            continue;
        }

        let mut t = faer::Mat::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let evd = t
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|_| Error::Eigen("tridiagonal eigendecomposition failed".into()))?;
        let s = evd.S();
        return Ok(SpectralBounds {
            min: s[0],
            max: s[m - 1],
            steps: m,
            restarts,
        });
    }
}
