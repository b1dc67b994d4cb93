//! Geometric multigrid for the saddle point system of elliptic distributed
//! optimal control problems, robust in the regularization parameter beta.
//!
//! The library discretizes
//!
//!   min 1/2 |y - y_d|^2 + beta/2 |u|^2   s.t.  -Laplace y = u,  y = 0 on
//!   the boundary
//!
//! with P1 elements on nested simplicial meshes, balances the optimality
//! system into a symmetric quasidefinite form, and solves it with W-, V-,
//! two-grid and full multigrid cycles whose smoother is preconditioned by an
//! inner multigrid operator for sqrt(beta) A + M. A spectral harness
//! measures the contraction number |||E_k||| of each cycle in the
//! mesh-dependent norm the convergence theory uses.
//!
//! Module map:
//! * [`mesh`]: domains, refinement, interior numbering
//! * [`fem`]: P1 assembly, quadrature, transfer operators
//! * [`hierarchy`]: per-level operators and the beta-dependent saddle blocks
//! * [`saddle`]: block vectors and discrete norms
//! * [`precond`]: the inner multigrid preconditioner
//! * [`multigrid`]: outer cycles, damping calibration, full multigrid
//! * [`spectral`]: contraction-number measurement and sweeps
//! * [`reference`]: closed-form solutions on the unit square
//! * [`driver`]: end-to-end solve with recovery of the natural variables

pub mod driver;
pub mod error;
pub mod fem;
pub mod hierarchy;
pub mod linalg;
pub mod mesh;
pub mod multigrid;
pub mod precond;
pub mod reference;
pub mod saddle;
pub mod spectral;

pub use error::{Error, Result};
pub use hierarchy::{Hierarchy, SaddleOps};
pub use mesh::Domain;
pub use multigrid::{Cycle, CycleSpec, MgContext};
pub use saddle::BlockVec;
