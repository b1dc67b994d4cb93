//! End-to-end solve of the distributed control problem.
//!
//! The discrete optimality system in the natural unknowns (pbar, ybar),
//!
//!   A pbar - M ybar = -(y_d, phi_i),    M pbar + beta A ybar = 0,
//!
//! is balanced by pbar = beta^{1/4} ptilde, ybar = beta^{-1/4} ytilde into
//! the symmetric quasidefinite form solved by the cycles:
//!
//!   [ sqrt(beta) A   -M            ] [ptilde]   [ -beta^{1/4} (y_d, phi) ]
//!   [ -M             -sqrt(beta) A ] [ytilde] = [ 0                      ]
//!
//! Full multigrid runs on the balanced system level by level; the result is
//! mapped back at the end. The optimal control is ubar = -pbar / beta.

use crate::error::Result;
use crate::fem;
use crate::hierarchy::{Hierarchy, SaddleOps};
use crate::multigrid::{build_damping, CycleSpec, DampingConfig, MgContext};
use crate::precond::InnerSolver;
use crate::reference::DesiredState;
use crate::saddle::BlockVec;

#[derive(Clone, Copy, Debug)]
pub struct SolveConfig {
    pub beta: f64,
    pub yd: DesiredState,
    pub spec: CycleSpec,
    pub nu: usize,
    pub seed: u64,
    pub fmg_tol: f64,
    pub max_cycles: usize,
}

impl SolveConfig {
    pub fn new(beta: f64, yd: DesiredState, spec: CycleSpec) -> Self {
        SolveConfig {
            beta,
            yd,
            spec,
            nu: 4,
            seed: 1,
            fmg_tol: 1e-8,
            max_cycles: 100,
        }
    }
}

#[derive(Debug)]
pub struct SolveOutcome {
    /// Adjoint variable on the finest level, natural scaling.
    pub pbar: Vec<f64>,
    /// State variable on the finest level, natural scaling.
    pub ybar: Vec<f64>,
    /// Cycles full multigrid spent per level.
    pub cycles: Vec<usize>,
    /// Final relative residual of the balanced system per level.
    pub residuals: Vec<f64>,
}

/// Assemble the balanced right hand sides for every level.
pub fn balanced_rhs(hier: &Hierarchy, beta: f64, yd: DesiredState) -> Result<Vec<BlockVec>> {
    let beta_q = beta.sqrt().sqrt();
    let mut rhs = Vec::with_capacity(hier.meshes.len());
    for mesh in &hier.meshes {
        let mut p = fem::load(mesh, |x| yd.eval(x[0], x[1]))?;
        for v in p.iter_mut() {
            *v *= -beta_q;
        }
        let n = mesh.n_interior();
        rhs.push(BlockVec { p, y: vec![0.0; n] });
    }
    Ok(rhs)
}

pub fn solve_control(hier: &Hierarchy, cfg: &SolveConfig) -> Result<SolveOutcome> {
    let ops = SaddleOps::new(hier, cfg.beta);
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
    let rhs = balanced_rhs(hier, cfg.beta, cfg.yd)?;
    let res = ctx.fmg(&ops, cfg.spec, &rhs, cfg.fmg_tol, cfg.max_cycles)?;

    let beta_q = cfg.beta.sqrt().sqrt();
    let top = res.solutions.last().unwrap();
    let pbar: Vec<f64> = top.p.iter().map(|v| beta_q * v).collect();
    let ybar: Vec<f64> = top.y.iter().map(|v| v / beta_q).collect();
    let residuals = res
        .residual_history
        .iter()
        .map(|h| h.last().copied().unwrap_or(0.0))
        .collect();
    Ok(SolveOutcome {
        pbar,
        ybar,
        cycles: res.cycles,
        residuals,
    })
}
