//! Outer multigrid cycles for the saddle system.
//!
//! The smoother is a damped preconditioned Richardson pair built from the
//! inner solver N (one inner V-cycle per block):
//!
//!   pre:   x += (lambda/w) N K (b - K x)
//!   post:  x += (lambda/w) K N (b - K x)
//!
//! whose error operators S = I - (lambda/w) N K^2 and R = I - (lambda/w) K N K
//! satisfy S^T K = K R, so a cycle with m pre- and m post-steps started from
//! zero is a symmetric preconditioner in the Euclidean sense. The coarse-grid
//! correction uses plain transpose restriction; because the spaces are nested,
//! the assembled coarse matrices coincide with the Galerkin products and all
//! metric weights cancel from the cycle.
//!
//! The damping factor lambda is chosen per level from Lanczos estimates of
//! the extremes of T = K N K / w: the optimal 2/(min+max) while
//! sqrt(beta)/h^2 < 1, and the robust 1/(Cdag (1 + sqrt(beta)/h^2)) once the
//! mesh outruns the regularization, with Cdag calibrated once per hierarchy.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::hierarchy::SaddleOps;
use crate::linalg::{self, LuFactor};
use crate::precond::InnerSolver;
use crate::saddle::BlockVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cycle {
    W,
    V,
    TwoGrid,
}

impl fmt::Display for Cycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cycle::W => "w",
            Cycle::V => "v",
            Cycle::TwoGrid => "two-grid",
        })
    }
}

impl FromStr for Cycle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w" => Ok(Cycle::W),
            "v" => Ok(Cycle::V),
            "two-grid" => Ok(Cycle::TwoGrid),
            other => Err(Error::Config(format!(
                "unknown cycle '{other}' (expected w, v or two-grid)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CycleSpec {
    pub cycle: Cycle,
    /// Pre-smoothing steps.
    pub m1: usize,
    /// Post-smoothing steps.
    pub m2: usize,
}

impl CycleSpec {
    pub fn new(cycle: Cycle, m1: usize, m2: usize) -> Self {
        CycleSpec { cycle, m1, m2 }
    }

    pub fn symmetric(cycle: Cycle, m: usize) -> Self {
        CycleSpec {
            cycle,
            m1: m,
            m2: m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// sqrt(beta)/h^2 < 1: spectrum of T is level-independent.
    WellConditioned,
    /// sqrt(beta)/h^2 >= 1: the top of the spectrum grows like sqrt(beta)/h^2.
    IllConditioned,
}

#[derive(Clone, Debug)]
pub struct DampingTable {
    pub lambda: Vec<f64>,
    pub est_min: Vec<f64>,
    pub est_max: Vec<f64>,
    pub regime: Vec<Regime>,
    pub c_dagger: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct DampingConfig {
    pub lanczos_steps: usize,
    pub seed: u64,
    pub safety: f64,
}

impl Default for DampingConfig {
    fn default() -> Self {
        DampingConfig {
            lanczos_steps: 40,
            seed: 1,
            safety: 1.1,
        }
    }
}

/// Estimate the spectrum of T_k = K N K / w on every level and derive the
/// damping factors.
pub fn build_damping(
    ops: &SaddleOps,
    inner: &InnerSolver,
    cfg: DampingConfig,
) -> Result<DampingTable> {
    let levels = ops.max_level() + 1;
    let mut est_min = vec![0.0; levels];
    let mut est_max = vec![0.0; levels];
    let mut regime = Vec::with_capacity(levels);
    for k in 0..levels {
        let cond = ops.sqrt_beta / (ops.h(k) * ops.h(k));
        regime.push(if cond < 1.0 {
            Regime::WellConditioned
        } else {
            Regime::IllConditioned
        });
        let n = ops.n(k);
        if n == 0 {
            continue;
        }
        let w = ops.weight(k);
        let apply = |v: &[f64], out: &mut [f64]| {
            let u = BlockVec::from_flat(v);
            let t = ops.apply_k(k, &u);
            let t = inner.apply_blocks(ops, k, &t);
            let t = ops.apply_k(k, &t);
            for (o, a) in out[..n].iter_mut().zip(&t.p) {
                *o = *a / w;
            }
            for (o, a) in out[n..].iter_mut().zip(&t.y) {
                *o = *a / w;
            }
        };
        let bounds = linalg::lanczos_extremes(
            2 * n,
            apply,
            cfg.lanczos_steps,
            cfg.seed.wrapping_add(k as u64),
        )?;
        est_min[k] = bounds.min;
        est_max[k] = bounds.max;
    }

    let mut c_dagger: f64 = 0.0;
    for k in 0..levels {
        if ops.n(k) == 0 {
            continue;
        }
        let denom = 1.0 + ops.sqrt_beta / (ops.h(k) * ops.h(k));
        c_dagger = c_dagger.max(est_max[k] / denom);
    }
    c_dagger *= cfg.safety;
    if !(c_dagger > 0.0) {
        return Err(Error::Eigen("damping calibration found no spectrum".into()));
    }

    let mut lambda = vec![0.0; levels];
    for k in 0..levels {
        if ops.n(k) == 0 {
            continue;
        }
        lambda[k] = match regime[k] {
            Regime::WellConditioned => 2.0 / (est_min[k] + est_max[k]),
            Regime::IllConditioned => {
                let denom = 1.0 + ops.sqrt_beta / (ops.h(k) * ops.h(k));
                1.0 / (c_dagger * denom)
            }
        };
    }

    Ok(DampingTable {
        lambda,
        est_min,
        est_max,
        regime,
        c_dagger,
    })
}

/// Everything one outer cycle needs, independent of the smoothing counts:
/// the inner solver, the damping table and the coarse factorizations.
pub struct MgContext {
    beta: f64,
    pub inner: InnerSolver,
    pub damping: DampingTable,
    coarse0: Option<LuFactor>,
    two_grid_factors: Mutex<HashMap<usize, Arc<LuFactor>>>,
}

#[derive(Debug)]
pub struct FmgResult {
    pub solutions: Vec<BlockVec>,
    /// Cycles spent on each level.
    pub cycles: Vec<usize>,
    /// Relative residuals per level, including the final accepted one.
    pub residual_history: Vec<Vec<f64>>,
}

impl MgContext {
    pub fn new(ops: &SaddleOps, inner: InnerSolver, damping: DampingTable) -> Result<Self> {
        let coarse0 = if ops.n(0) > 0 {
            Some(LuFactor::new(&ops.k_csr(0), "coarse saddle matrix")?)
        } else {
            None
        };
        Ok(MgContext {
            beta: ops.beta,
            inner,
            damping,
            coarse0,
            two_grid_factors: Mutex::new(HashMap::new()),
        })
    }

    fn check(&self, ops: &SaddleOps) {
        assert!(
            self.beta == ops.beta,
            "context built for beta {} used with beta {}",
            self.beta,
            ops.beta
        );
    }

    pub fn coarse_solve(&self, b: &BlockVec) -> BlockVec {
        match &self.coarse0 {
            Some(f) => BlockVec::from_flat(&f.solve(&b.to_flat())),
            None => BlockVec::zeros(0),
        }
    }

    /// Exact solve on an intermediate level; used by the two-grid cycle.
    /// Factors are computed on first use and cached.
    fn exact_solve(&self, ops: &SaddleOps, k: usize, b: &BlockVec) -> Result<BlockVec> {
        if k == 0 {
            return Ok(self.coarse_solve(b));
        }
        let factor = {
            let mut map = self.two_grid_factors.lock().unwrap();
            if let Some(f) = map.get(&k) {
                Arc::clone(f)
            } else {
                let f = Arc::new(LuFactor::new(&ops.k_csr(k), "level saddle matrix")?);
                map.insert(k, Arc::clone(&f));
                f
            }
        };
        Ok(BlockVec::from_flat(&factor.solve(&b.to_flat())))
    }

    pub fn smooth_pre(&self, ops: &SaddleOps, k: usize, x: &mut BlockVec, b: &BlockVec, steps: usize) {
        let scale = self.damping.lambda[k] / ops.weight(k);
        for _ in 0..steps {
            let r = ops.residual(k, b, x);
            let kr = ops.apply_k(k, &r);
            let c = self.inner.apply_blocks(ops, k, &kr);
            x.axpy(scale, &c);
        }
    }

    pub fn smooth_post(&self, ops: &SaddleOps, k: usize, x: &mut BlockVec, b: &BlockVec, steps: usize) {
        let scale = self.damping.lambda[k] / ops.weight(k);
        for _ in 0..steps {
            let r = ops.residual(k, b, x);
            let nr = self.inner.apply_blocks(ops, k, &r);
            let c = ops.apply_k(k, &nr);
            x.axpy(scale, &c);
        }
    }

    /// One outer cycle for K_k x = b starting from x0.
    pub fn cycle(
        &self,
        ops: &SaddleOps,
        spec: CycleSpec,
        k: usize,
        b: &BlockVec,
        x0: &BlockVec,
    ) -> Result<BlockVec> {
        self.check(ops);
        if k == 0 {
            return Ok(self.coarse_solve(b));
        }
        let mut x = x0.clone();
        self.smooth_pre(ops, k, &mut x, b, spec.m1);
        let r = ops.residual(k, b, &x);
        let bc = ops.restrict(k, &r);
        let e = match spec.cycle {
            Cycle::TwoGrid => self.exact_solve(ops, k - 1, &bc)?,
            Cycle::V => self.cycle(ops, spec, k - 1, &bc, &BlockVec::zeros(ops.n(k - 1)))?,
            Cycle::W => {
                let first = self.cycle(ops, spec, k - 1, &bc, &BlockVec::zeros(ops.n(k - 1)))?;
                self.cycle(ops, spec, k - 1, &bc, &first)?
            }
        };
        let ef = ops.prolong(k, &e);
        x.axpy(1.0, &ef);
        self.smooth_post(ops, k, &mut x, b, spec.m2);
        Ok(x)
    }

    /// Full multigrid: exact solve on level 0, then prolong and iterate
    /// cycles on each level until the relative Euclidean residual drops
    /// below `tol`.
    pub fn fmg(
        &self,
        ops: &SaddleOps,
        spec: CycleSpec,
        rhs: &[BlockVec],
        tol: f64,
        max_cycles: usize,
    ) -> Result<FmgResult> {
        self.check(ops);
        assert!(!rhs.is_empty());
        let mut solutions = Vec::with_capacity(rhs.len());
        let mut cycles = vec![0usize; rhs.len()];
        let mut residual_history = vec![Vec::new(); rhs.len()];
        solutions.push(self.coarse_solve(&rhs[0]));
        for k in 1..rhs.len() {
            let bnorm = rhs[k].norm2();
            if bnorm == 0.0 {
                solutions.push(BlockVec::zeros(ops.n(k)));
                continue;
            }
            let mut x = ops.prolong(k, &solutions[k - 1]);
            loop {
                let rel = ops.residual(k, &rhs[k], &x).norm2() / bnorm;
                residual_history[k].push(rel);
                if rel <= tol {
                    break;
                }
                if cycles[k] >= max_cycles {
                    return Err(Error::FmgStalled {
                        level: k,
                        residuals: residual_history[k].clone(),
                    });
                }
                x = self.cycle(ops, spec, k, &rhs[k], &x)?;
                cycles[k] += 1;
            }
            solutions.push(x);
        }
        Ok(FmgResult {
            solutions,
            cycles,
            residual_history,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem;
    use crate::hierarchy::Hierarchy;
    use crate::mesh::Domain;

    #[test]
    fn damping_spectrum_is_exact_on_single_vertex_level() {
        // level 0 of the unit square has one interior vertex, so T_0 is a
        // 2x2 multiple of the identity with eigenvalue 4 (a^2+m^2)/(a+m)
        let hier = Hierarchy::build(Domain::UnitSquare, 1).unwrap();
        let beta = 1e-2;
        let ops = SaddleOps::new(&hier, beta);
        let inner = InnerSolver::new(&ops, 4).unwrap();
        let table = build_damping(&ops, &inner, DampingConfig::default()).unwrap();
        let a = 4.0 * beta.sqrt();
        let m = 0.125;
        let exact = 4.0 * (a * a + m * m) / (a + m);
        assert!((table.est_min[0] - exact).abs() < 1e-10);
        assert!((table.est_max[0] - exact).abs() < 1e-10);
        assert_eq!(table.regime[0], Regime::WellConditioned);
        assert!((table.lambda[0] - 1.0 / exact).abs() < 1e-10);
    }

    #[test]
    fn cycles_converge_as_iterative_solvers() {
        let hier = Hierarchy::build(Domain::UnitSquare, 3).unwrap();
        let ops = SaddleOps::new(&hier, 1e-2);
        let inner = InnerSolver::new(&ops, 4).unwrap();
        let damping = build_damping(&ops, &inner, DampingConfig::default()).unwrap();
        let ctx = MgContext::new(&ops, inner, damping).unwrap();
        let k = 3;
        let n = ops.n(k);
        let b = BlockVec::seeded(n, 5);
        let exact = BlockVec::from_flat(
            &LuFactor::new(&ops.k_csr(k), "test matrix")
                .unwrap()
                .solve(&b.to_flat()),
        );
        for cycle in [Cycle::TwoGrid, Cycle::V, Cycle::W] {
            let spec = CycleSpec::symmetric(cycle, 2);
            let mut x = BlockVec::zeros(n);
            for _ in 0..12 {
                x = ctx.cycle(&ops, spec, k, &b, &x).unwrap();
            }
            let err = x.minus(&exact).norm2() / exact.norm2();
            assert!(err < 1e-3, "{cycle}: relative error {err}");
        }
    }

    #[test]
    fn fmg_reaches_the_requested_residual() {
        let hier = Hierarchy::build(Domain::UnitSquare, 3).unwrap();
        let ops = SaddleOps::new(&hier, 1e-4);
        let inner = InnerSolver::new(&ops, 4).unwrap();
        let damping = build_damping(&ops, &inner, DampingConfig::default()).unwrap();
        let ctx = MgContext::new(&ops, inner, damping).unwrap();
        let rhs: Vec<BlockVec> = hier
            .meshes
            .iter()
            .map(|mesh| BlockVec {
                p: fem::load(mesh, |x| 1.0 + x[0]).unwrap(),
                y: vec![0.0; mesh.n_interior()],
            })
            .collect();
        let spec = CycleSpec::symmetric(Cycle::W, 2);
        let res = ctx.fmg(&ops, spec, &rhs, 1e-8, 100).unwrap();
        for k in 1..rhs.len() {
            let rel = ops.residual(k, &rhs[k], &res.solutions[k]).norm2() / rhs[k].norm2();
            assert!(rel <= 1e-8, "level {k}: residual {rel}");
            assert!(res.cycles[k] > 0);
        }
    }

    #[test]
    fn fmg_zero_rhs_returns_zero_without_cycles() {
        let hier = Hierarchy::build(Domain::UnitSquare, 2).unwrap();
        let ops = SaddleOps::new(&hier, 1e-2);
        let inner = InnerSolver::new(&ops, 4).unwrap();
        let damping = build_damping(&ops, &inner, DampingConfig::default()).unwrap();
        let ctx = MgContext::new(&ops, inner, damping).unwrap();
        let rhs: Vec<BlockVec> = (0..=2).map(|k| BlockVec::zeros(ops.n(k))).collect();
        let res = ctx.fmg(&ops, CycleSpec::symmetric(Cycle::W, 2), &rhs, 1e-8, 100).unwrap();
        assert_eq!(res.cycles, vec![0, 0, 0]);
        for (k, x) in res.solutions.iter().enumerate() {
            assert_eq!(x.n(), ops.n(k));
            assert!(x.norm2() == 0.0);
        }
    }

    #[test]
    fn fmg_stall_reports_history() {
        let hier = Hierarchy::build(Domain::UnitSquare, 2).unwrap();
        let ops = SaddleOps::new(&hier, 1e-2);
        let inner = InnerSolver::new(&ops, 4).unwrap();
        let damping = build_damping(&ops, &inner, DampingConfig::default()).unwrap();
        let ctx = MgContext::new(&ops, inner, damping).unwrap();
        let rhs: Vec<BlockVec> = (0..=2).map(|k| BlockVec::seeded(ops.n(k), k as u64)).collect();
        let err = ctx
            .fmg(&ops, CycleSpec::symmetric(Cycle::W, 1), &rhs, 1e-30, 2)
            .unwrap_err();
        match err {
            Error::FmgStalled { level, residuals } => {
                assert_eq!(level, 1);
                assert_eq!(residuals.len(), 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
