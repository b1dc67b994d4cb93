//! Shared helpers for the integration suites: context construction and the
//! published contraction numbers used as comparison anchors.

#![allow(dead_code)]

use kktmg::multigrid::{build_damping, DampingConfig, MgContext};
use kktmg::precond::InnerSolver;
use kktmg::{Domain, Hierarchy, SaddleOps};

/// Inner V(nu,nu) smoothing depth used throughout the experiments.
pub const INNER_NU: usize = 4;

/// Build the inner solver, damping table and cycle context for one beta.
pub fn context(ops: &SaddleOps, nu: usize) -> MgContext {
    let inner = InnerSolver::new(ops, nu).expect("inner solver");
    let damping = build_damping(ops, &inner, DampingConfig::default()).expect("damping table");
    MgContext::new(ops, inner, damping).expect("cycle context")
}

pub fn square(max_level: usize) -> Hierarchy {
    Hierarchy::build(Domain::UnitSquare, max_level).expect("unit square hierarchy")
}

/// Symmetric W-cycle contraction numbers reported for the unit square,
/// m = 1, levels k = 1..7, inner V(4,4) preconditioner.
pub const SQUARE_W_M1_B1E2: [f64; 7] = [3.00e-1, 6.88e-1, 6.70e-1, 6.31e-1, 6.19e-1, 6.16e-1, 6.15e-1];
pub const SQUARE_W_M1_B1E4: [f64; 7] = [7.01e-2, 2.20e-1, 6.50e-1, 7.10e-1, 6.56e-1, 6.24e-1, 6.17e-1];
pub const SQUARE_W_M1_B1E6: [f64; 7] = [2.55e-1, 4.38e-1, 3.89e-1, 5.68e-1, 8.92e-1, 8.66e-1, 8.36e-1];

/// W-cycle on the unit square at beta = 1e-2, level 4, m = 1, 2, 4, 8, 16.
pub const SQUARE_W_K4_B1E2_BY_M: [f64; 5] = [6.31e-1, 4.45e-1, 2.67e-1, 1.20e-1, 4.94e-2];

/// W-cycle on the unit square at beta = 1e-4, level 2: m = 1 and m = 2.
pub const SQUARE_W_K2_B1E4_M1: f64 = 2.20e-1;
pub const SQUARE_W_K2_B1E4_M2: f64 = 6.31e-2;

/// Symmetric W-cycle on the unit cube at beta = 1e-6, m = 1, levels 1..5.
pub const CUBE_W_M1_B1E6: [f64; 5] = [2.52e-1, 3.15e-1, 7.92e-1, 8.96e-1, 8.75e-1];

/// Outer V(1,1) cycle with an inner V(1,1) preconditioner on the unit
/// square at beta = 1e-2, levels 1..7.
pub const SQUARE_V11_INNER1_B1E2: [f64; 7] =
    [2.15e-1, 7.92e-1, 8.20e-1, 8.24e-1, 8.29e-1, 8.33e-1, 8.36e-1];

/// Published relative errors for y_d = 1, h = 2^-6: (H1-semi of pbar,
/// L2 of pbar, H1-semi of ybar, L2 of ybar) per beta.
pub const TABLE1_ONE_B1E2: [f64; 4] = [1.65e-2, 6.92e-4, 1.17e-2, 6.31e-4];
pub const TABLE1_ONE_B1E4: [f64; 4] = [5.62e-2, 4.64e-3, 1.92e-2, 9.29e-4];
pub const TABLE1_ONE_B1E6: [f64; 4] = [1.87e-1, 3.99e-2, 6.13e-1, 4.51e-3];
