//! Residual operator, independent oracle solvers, and evaluation of the
//! explicit estimates on discrete runs.
//!
//! Every check returns an [`EstimateReport`] with both sides of the
//! inequality. Exact solutions are never available, so the continuous
//! estimates are evaluated on discrete trajectories; each such report
//! carries a caveat saying so.

mod convergence;
mod estimates;
mod mms;
mod oracles;
mod residual;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::coefficients::{CoefficientError, CoefficientSextet, Forcing, ForcingSlices, SextetSlices, SliceMode};
use crate::spatial::{Discretization, SpatialError};
use crate::stepper::{project_initial, run_scheme, DiscreteTrajectory, StepError, TauGuard};

pub use convergence::{tau_refinement_study, ConvergenceProblem, ConvergenceRow, ConvergenceTable};
pub use estimates::{check_apriori, check_continuous_dependence, check_isomorphism_sandwich, r_star, RStarInputs};
pub use mms::{mms_forcing, MmsCoefficients, MmsEntry, MmsValues};
pub use oracles::{dense_oracle_step, minimize_energy_oracle, MinimizeOutcome, DENSE_CAP};
pub use residual::{apply_t, operator_bound_check, Quadruple, Residual, ResidualReport};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("system has {dofs} dofs, the dense oracle is capped at {cap}")]
    TooLarge { dofs: usize, cap: usize },
    #[error("matrix is singular at elimination row {0}")]
    Singular(usize),
    #[error("energy minimization stopped after {iterations} iterations with gradient norm {grad_norm:.3e}")]
    NoConvergence { iterations: usize, grad_norm: f64 },
    #[error("runs do not match: {0}")]
    Mismatch(String),
    #[error("a refinement study needs at least 3 step sizes, got {0}")]
    TooFewTaus(usize),
    #[error("step sizes must be strictly decreasing")]
    NotDecreasing,
    #[error("manufactured z does not vanish on the boundary (|z| = {0:.3e})")]
    Dirichlet(f64),
    #[error("{0}")]
    Step(#[from] StepError),
    #[error("{0}")]
    Coefficient(#[from] CoefficientError),
    #[error("{0}")]
    Spatial(#[from] SpatialError),
}

/// Both sides of an evaluated inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    /// False when the preconditions of the estimate are not met; the sides
    /// are still evaluated.
    pub applicable: bool,
    pub constants: BTreeMap<String, f64>,
    pub caveat: Option<String>,
}

impl EstimateReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin,
            pass: passes(lhs, rhs),
            applicable: true,
            constants: BTreeMap::new(),
            caveat: None,
        }
    }

    pub fn with_constant(mut self, key: &str, value: f64) -> Self {
        self.constants.insert(key.to_string(), value);
        self
    }

    pub fn with_caveat(mut self, caveat: &str) -> Self {
        self.caveat = Some(caveat.to_string());
        self
    }
}

/// `lhs ≤ rhs` up to `1e-10·max(1, rhs)`.
pub fn passes(lhs: f64, rhs: f64) -> bool {
    rhs - lhs >= -1e-10 * rhs.abs().max(1.0)
}

pub(crate) const DISCRETE_CAVEAT: &str =
    "evaluated on discrete trajectories standing in for exact solutions";

/// How a run is discretized in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub tau: f64,
    pub nu: f64,
    pub tol: f64,
    pub mode: SliceMode,
    pub guard: TauGuard,
}

/// Data, slices and the resulting trajectory of one scheme run.
#[derive(Debug, Clone)]
pub struct Run {
    pub sextet: CoefficientSextet,
    pub slices: SextetSlices,
    pub forcing: ForcingSlices,
    pub traj: DiscreteTrajectory,
    pub nu: f64,
}

impl Run {
    /// Slices the data, projects the nodal initial values and marches the
    /// scheme.
    pub fn execute(
        disc: &Discretization,
        sextet: &CoefficientSextet,
        forcing: &Forcing,
        initial: (&[f64], &[f64]),
        settings: &RunSettings,
    ) -> Result<Self, AnalysisError> {
        let slices = sextet.discretize(settings.tau, settings.mode)?;
        let loads = forcing.discretize(disc, settings.tau, settings.mode)?;
        Self::execute_sliced(disc, sextet, slices, loads, initial, settings)
    }

    pub fn execute_sliced(
        disc: &Discretization,
        sextet: &CoefficientSextet,
        slices: SextetSlices,
        forcing: ForcingSlices,
        initial: (&[f64], &[f64]),
        settings: &RunSettings,
    ) -> Result<Self, AnalysisError> {
        let (p0, z0) = project_initial(disc, initial.0, initial.1);
        let traj = run_scheme(disc, &slices, &forcing, (&p0, &z0), settings.tau, settings.nu, settings.tol, settings.guard)?;
        Ok(Self { sextet: sextet.clone(), slices, forcing, traj, nu: settings.nu })
    }

    pub fn tau(&self) -> f64 {
        self.traj.tau
    }

    /// `T` used in the exponential factors: the end of the last step.
    pub fn horizon(&self) -> f64 {
        self.traj.t_end.max(self.traj.n_steps() as f64 * self.traj.tau)
    }
}
