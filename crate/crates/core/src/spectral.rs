//! Spectral harness: contraction numbers of the outer cycles.
//!
//! One cycle started from zero acts as a preconditioner Z, with error
//! operator E = I - Z K. The smoother pair satisfies S^T K = K R, which
//! makes Z^T equal to the preconditioner of the *reversed* cycle (pre- and
//! post-smoothing counts swapped, on every level). The adjoint of E is
//! therefore available without forming anything:
//!
//!   E v   = v - Z K v        (one cycle with rhs K v)
//!   E^T v = v - K Z_rev v    (one reversed cycle with rhs v)
//!
//! For symmetric cycles (m1 = m2) the two cycles coincide.
//!
//! The operator norm is taken in the mesh norm |||.|||_1 with Gram matrix
//! S = K Ghat^{-1} K, Ghat = blockdiag(G, G) solved exactly. Small levels
//! build E column by column and take the SVD of S^{1/2} E S^{-1/2}; large
//! levels run a power iteration on S^{-1} E^T S E, which needs one sparse
//! LU of K per level for the S^{-1} application.

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hierarchy::{Hierarchy, SaddleOps};
use crate::linalg::LuFactor;
use crate::mesh::Domain;
use crate::multigrid::{build_damping, Cycle, CycleSpec, DampingConfig, MgContext};
use crate::precond::InnerSolver;
use crate::saddle::{BlockVec, MeshNorms};

/// E v = v - Z K v, the error of one cycle applied to the exact solution v.
pub fn apply_error(
    ops: &SaddleOps,
    ctx: &MgContext,
    spec: CycleSpec,
    k: usize,
    v: &BlockVec,
) -> Result<BlockVec> {
    let kv = ops.apply_k(k, v);
    let z = ctx.cycle(ops, spec, k, &kv, &BlockVec::zeros(v.n()))?;
    Ok(v.minus(&z))
}

/// E^T v = v - K Z_rev v via the reversed cycle.
pub fn apply_error_adjoint(
    ops: &SaddleOps,
    ctx: &MgContext,
    spec: CycleSpec,
    k: usize,
    v: &BlockVec,
) -> Result<BlockVec> {
    let rev = CycleSpec::new(spec.cycle, spec.m2, spec.m1);
    let z = ctx.cycle(ops, rev, k, v, &BlockVec::zeros(v.n()))?;
    let kz = ops.apply_k(k, &z);
    Ok(v.minus(&kz))
}

/// Norm machinery of one level: exact Ghat solves plus a sparse LU of K
/// for the inverse Gram application.
pub struct NormContext {
    pub norms: MeshNorms,
    k_lu: LuFactor,
}

impl NormContext {
    pub fn new(ops: &SaddleOps, level: usize) -> Result<Self> {
        let norms = MeshNorms::new(ops, level)?;
        let k_lu = LuFactor::new(&ops.k_csr(level), "level saddle matrix")?;
        Ok(NormContext { norms, k_lu })
    }

    /// S^{-1} u = K^{-1} Ghat K^{-1} u.
    pub fn sinv_apply(&self, ops: &SaddleOps, u: &BlockVec) -> BlockVec {
        let k = self.norms.level;
        let z = BlockVec::from_flat(&self.k_lu.solve(&u.to_flat()));
        let gz = BlockVec {
            p: ops.g[k].matvec_alloc(&z.p),
            y: ops.g[k].matvec_alloc(&z.y),
        };
        BlockVec::from_flat(&self.k_lu.solve(&gz.to_flat()))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PowerConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            tol: 1e-4,
            max_iters: 200,
            seed: 1,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NormEstimate {
    pub norm: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Power iteration for |||E|||: largest eigenvalue of S^{-1} E^T S E,
/// which is the square of the norm. The metric image S v is carried along
/// so each iteration costs one cycle, one reversed cycle, one S apply and
/// one S^{-1} apply.
pub fn operator_norm_power(
    ops: &SaddleOps,
    ctx: &MgContext,
    nc: &NormContext,
    spec: CycleSpec,
    k: usize,
    cfg: &PowerConfig,
) -> Result<NormEstimate> {
    assert_eq!(nc.norms.level, k);
    let n = ops.n(k);
    if n == 0 || k == 0 {
        return Ok(NormEstimate {
            norm: 0.0,
            iters: 0,
            converged: true,
        });
    }
    let mut v = BlockVec::seeded(n, cfg.seed);
    let mut sv = nc.norms.s_apply(ops, &v);
    let mut den = v.dot(&sv);
    let mut last = f64::INFINITY;
    let mut stable = 0;
    let mut norm_est = 0.0;
    for it in 1..=cfg.max_iters {
        let ev = apply_error(ops, ctx, spec, k, &v)?;
        let sev = nc.norms.s_apply(ops, &ev);
        let q = (ev.dot(&sev) / den).max(0.0);
        norm_est = q.sqrt();
        if norm_est == 0.0 {
            return Ok(NormEstimate {
                norm: 0.0,
                iters: it,
                converged: true,
            });
        }
        if (norm_est - last).abs() <= cfg.tol * norm_est {
            stable += 1;
            if stable >= 3 {
                return Ok(NormEstimate {
                    norm: norm_est,
                    iters: it,
                    converged: true,
                });
            }
        } else {
            stable = 0;
        }
        last = norm_est;
        let t = apply_error_adjoint(ops, ctx, spec, k, &sev)?;
        let vn = nc.sinv_apply(ops, &t);
        let alpha = vn.norm2();
        if alpha == 0.0 {
            return Ok(NormEstimate {
                norm: 0.0,
                iters: it,
                converged: true,
            });
        }
        v = vn;
        v.scale(1.0 / alpha);
        sv = t;
        sv.scale(1.0 / alpha);
        den = v.dot(&sv);
    }
    Ok(NormEstimate {
        norm: norm_est,
        iters: cfg.max_iters,
        converged: false,
    })
}

/// Exact norm on a small level: materialize E, transform into the metric
/// and take the largest singular value.
pub fn operator_norm_dense(
    ops: &SaddleOps,
    ctx: &MgContext,
    norms: &MeshNorms,
    spec: CycleSpec,
    k: usize,
) -> Result<f64> {
    assert_eq!(norms.level, k);
    let n = ops.n(k);
    if n == 0 || k == 0 {
        return Ok(0.0);
    }
    crate::linalg::pin_sequential_backend();
    let n2 = 2 * n;
    let mut e = faer::Mat::<f64>::zeros(n2, n2);
    let mut basis = vec![0.0; n2];
    for j in 0..n2 {
        basis[j] = 1.0;
        let u = BlockVec::from_flat(&basis);
        basis[j] = 0.0;
        let col = apply_error(ops, ctx, spec, k, &u)?.to_flat();
        for (i, c) in col.iter().enumerate() {
            e[(i, j)] = *c;
        }
    }
    let kd = ops.k_csr(k).to_dense();
    let mut x = faer::Mat::<f64>::zeros(n2, n2);
    for j in 0..n2 {
        let col: Vec<f64> = (0..n2).map(|i| kd[(i, j)]).collect();
        let z = norms.ghat_solve(&BlockVec::from_flat(&col)).to_flat();
        for (i, c) in z.iter().enumerate() {
            x[(i, j)] = *c;
        }
    }
    let s = &kd * &x;
    // symmetrize to strip factorization roundoff before the eigensolve
    let s = faer::Mat::from_fn(n2, n2, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let evd = s
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::Eigen("metric Gram eigendecomposition failed".into()))?;
    let lam = evd.S();
    let u = evd.U();
    if lam[0] <= 0.0 {
        return Err(Error::Eigen(format!(
            "metric Gram matrix lost positivity: min eigenvalue {}",
            lam[0]
        )));
    }
    let half = faer::Mat::from_fn(n2, n2, |i, j| if i == j { lam[i].sqrt() } else { 0.0 });
    let ihalf = faer::Mat::from_fn(
        n2,
        n2,
        |i, j| if i == j { 1.0 / lam[i].sqrt() } else { 0.0 },
    );
    let s_half = u * &half * u.transpose();
    let s_inv_half = u * &ihalf * u.transpose();
    let b = &s_half * &e * &s_inv_half;
    let svd = b
        .svd()
        .map_err(|_| Error::Eigen("singular value decomposition failed".into()))?;
    Ok(svd.S()[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Dense,
    Power,
}

#[derive(Clone, Copy, Debug)]
pub struct LevelMeasurement {
    pub norm: f64,
    pub method: Method,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct MeasureConfig {
    /// Levels with at most this many interior vertices per variable use the
    /// dense path.
    pub dense_threshold: usize,
    pub power: PowerConfig,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            dense_threshold: 2500,
            power: PowerConfig::default(),
        }
    }
}

pub fn contraction_norm(
    ops: &SaddleOps,
    ctx: &MgContext,
    spec: CycleSpec,
    k: usize,
    cfg: &MeasureConfig,
) -> Result<LevelMeasurement> {
    let n = ops.n(k);
    if n == 0 || k == 0 {
        return Ok(LevelMeasurement {
            norm: 0.0,
            method: Method::Dense,
            iters: 0,
            converged: true,
        });
    }
    if n <= cfg.dense_threshold {
        let norms = MeshNorms::new(ops, k)?;
        let norm = operator_norm_dense(ops, ctx, &norms, spec, k)?;
        Ok(LevelMeasurement {
            norm,
            method: Method::Dense,
            iters: 0,
            converged: true,
        })
    } else {
        let nc = NormContext::new(ops, k)?;
        let est = operator_norm_power(ops, ctx, &nc, spec, k, &cfg.power)?;
        Ok(LevelMeasurement {
            norm: est.norm,
            method: Method::Power,
            iters: est.iters,
            converged: est.converged,
        })
    }
}

/// Median wall time of one cycle after a warmup run.
pub fn time_cycle(
    ops: &SaddleOps,
    ctx: &MgContext,
    spec: CycleSpec,
    k: usize,
    seed: u64,
) -> Result<f64> {
    let b = BlockVec::seeded(ops.n(k), seed);
    let x0 = BlockVec::zeros(ops.n(k));
    ctx.cycle(ops, spec, k, &b, &x0)?;
    let mut times = [0.0f64; 3];
    for t in times.iter_mut() {
        let start = Instant::now();
        ctx.cycle(ops, spec, k, &b, &x0)?;
        *t = start.elapsed().as_secs_f64();
    }
    times.sort_by(f64::total_cmp);
    Ok(times[1])
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub domain: Domain,
    pub betas: Vec<f64>,
    pub max_level: usize,
    pub cycle: Cycle,
    /// (m1, m2) pairs to measure.
    pub smoothing: Vec<(usize, usize)>,
    pub nu: usize,
    pub seed: u64,
    pub measure: MeasureConfig,
    pub timing: bool,
    pub jobs: usize,
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub domain: String,
    pub beta: f64,
    pub cycle: Cycle,
    pub m1: usize,
    pub m2: usize,
    pub level: usize,
    pub norm: f64,
    pub converged: bool,
    pub seconds_per_cycle: f64,
}

/// Measure |||E_k||| for every requested (beta, smoothing, level) cell.
/// Rows are ordered by beta, then smoothing pair, then level, regardless
/// of how many worker threads run.
pub fn contraction_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.max_level > cfg.domain.max_level() {
        return Err(Error::Config(format!(
            "level {} exceeds the supported maximum {} for {}",
            cfg.max_level,
            cfg.domain.max_level(),
            cfg.domain.name()
        )));
    }
    if cfg.smoothing.is_empty() || cfg.betas.is_empty() {
        return Err(Error::Config(
            "contraction sweep needs at least one beta and one smoothing pair".into(),
        ));
    }
    let hier = Hierarchy::build(cfg.domain, cfg.max_level)?;
    let mut rows = Vec::new();
    for &beta in &cfg.betas {
        let ops = SaddleOps::new(&hier, beta);
        let inner = InnerSolver::new(&ops, cfg.nu)?;
        let damping = build_damping(
            &ops,
            &inner,
            DampingConfig {
                seed: cfg.seed,
                ..DampingConfig::default()
            },
        )?;
        let ctx = MgContext::new(&ops, inner, damping)?;
        let mut cells = Vec::new();
        for (mi, _) in cfg.smoothing.iter().enumerate() {
            for k in 1..=cfg.max_level {
                cells.push((mi, k));
            }
        }
        let compute = |&(mi, k): &(usize, usize)| -> Result<SweepRow> {
            let (m1, m2) = cfg.smoothing[mi];
            let spec = CycleSpec::new(cfg.cycle, m1, m2);
            let meas = contraction_norm(&ops, &ctx, spec, k, &cfg.measure)?;
            let seconds = if cfg.timing {
                time_cycle(&ops, &ctx, spec, k, cfg.seed)?
            } else {
                0.0
            };
            Ok(SweepRow {
                domain: cfg.domain.name().to_string(),
                beta,
                cycle: cfg.cycle,
                m1,
                m2,
                level: k,
                norm: meas.norm,
                converged: meas.converged,
                seconds_per_cycle: seconds,
            })
        };
        let beta_rows: Result<Vec<SweepRow>> = if cfg.jobs > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.jobs)
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
            pool.install(|| cells.par_iter().map(compute).collect())
        } else {
            cells.iter().map(compute).collect()
        };
        rows.extend(beta_rows?);
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "domain,beta,cycle,m1,m2,level,norm_Ek,converged,seconds_per_cycle";

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{},{},{},{},{:.6e},{},{:.6e}\n",
            r.domain,
            r.beta,
            r.cycle,
            r.m1,
            r.m2,
            r.level,
            r.norm,
            r.converged,
            r.seconds_per_cycle
        ));
    }
    out
}
