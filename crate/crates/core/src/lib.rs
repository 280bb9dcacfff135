//! Finite element solver for a coupled pair of linear parabolic equations,
//! together with a harness that evaluates the explicit stability,
//! continuous-dependence and convergence estimates known for it.
//!
//! Unknowns are `[p, z]`: `p` carries a natural (Neumann) boundary condition,
//! `z` a homogeneous Dirichlet one. Data is the sextet `[a, b, μ, λ, ω, A]`.

pub mod analysis;
pub mod cli;
pub mod coefficients;
pub mod kwc;
pub mod linalg;
pub mod spatial;
pub mod stepper;
