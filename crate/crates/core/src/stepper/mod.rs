//! One step of the semi-implicit scheme, its governing energy, and the full
//! time march.
//!
//! Step `i` solves, for `[p_i, z_i] ∈ V_h × V₀,h`,
//! ```text
//! [ M/τ + K + M_μ + M_λ      B_ω                 ] [p_i]   [ M/τ p_{i−1} + h_i   ]
//! [ B_ωᵀ                     M_a/τ + M_b + K_A + νK₀ ] [z_i] = [ M_a/τ z_{i−1} + k_i ]
//! ```
//! which is the stationarity system of the quadratic energy [`energy`].

mod trajectory;

use thiserror::Error;

use crate::coefficients::{CoefficientSlice, ForcingSlices, SextetSlices};
use crate::linalg::{dot, pcg, DofSpace, LinalgError, SparseOperator, TripletBuilder};
use crate::spatial::{Discretization, FormSet, SpatialError};

pub use trajectory::{project_initial, DiscreteTrajectory, StepDiagnostics};

/// Default relative residual for the step solver.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("step size {tau:.6e} is not below the coercivity threshold tau_* = {tau_star:.6e}")]
    TauGuard { tau: f64, tau_star: f64 },
    #[error("step matrix is not positive definite (curvature {curvature:.3e}); tau exceeds the effective stability bound")]
    Indefinite { curvature: f64 },
    #[error("step solver did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("step matrix is not symmetric (asymmetry {0:.3e}); is A symmetric?")]
    Asymmetric(f64),
    #[error("vector length {got} does not match {expected}")]
    Length { expected: usize, got: usize },
    #[error("{0}")]
    Spatial(#[from] SpatialError),
    #[error("step {index}: {source}")]
    AtStep {
        index: usize,
        #[source]
        source: Box<StepError>,
    },
}

impl From<LinalgError> for StepError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NegativeCurvature { curvature, .. } => StepError::Indefinite { curvature },
            LinalgError::NotPositiveDefinite { pivot, .. } => StepError::Indefinite { curvature: pivot },
            LinalgError::NoConvergence { iterations, residual } => StepError::NoConvergence { iterations, residual },
            LinalgError::Dimension { expected, got } => StepError::Length { expected, got },
        }
    }
}

/// Step-size policy: refuse `τ ≥ τ_*` unless overridden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauGuard {
    pub tau_star: f64,
    pub override_guard: bool,
}

impl TauGuard {
    pub fn strict(tau_star: f64) -> Self {
        Self { tau_star, override_guard: false }
    }

    pub fn off() -> Self {
        Self { tau_star: f64::INFINITY, override_guard: true }
    }

    pub fn check(&self, tau: f64) -> Result<(), StepError> {
        if !self.override_guard && tau >= self.tau_star {
            return Err(StepError::TauGuard { tau, tau_star: self.tau_star });
        }
        Ok(())
    }
}

/// Assembled system of one step together with everything needed to evaluate
/// its energy.
#[derive(Debug, Clone)]
pub struct StepSystem {
    pub matrix: SparseOperator,
    pub rhs: Vec<f64>,
    pub tau: f64,
    pub nu: f64,
    pub slice_index: usize,
    pub forms: FormSet,
    pub p_prev: Vec<f64>,
    pub z_prev: Vec<f64>,
    pub h: Vec<f64>,
    pub k: Vec<f64>,
}

impl StepSystem {
    pub fn n_p(&self) -> usize {
        self.p_prev.len()
    }

    pub fn n_z(&self) -> usize {
        self.z_prev.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_p() + self.n_z()
    }

    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.n_p())
    }
}

/// Solution of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub p: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl StepSolution {
    pub fn block(&self) -> Vec<f64> {
        [self.p.as_slice(), self.z.as_slice()].concat()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_step_system(
    disc: &Discretization,
    slice: &CoefficientSlice<'_>,
    slice_index: usize,
    prev: (&[f64], &[f64]),
    loads: (&[f64], &[f64]),
    tau: f64,
    nu: f64,
    guard: TauGuard,
) -> Result<StepSystem, StepError> {
    guard.check(tau)?;
    let (np, nz) = (disc.n_p(), disc.n_z());
    for (v, n) in [(prev.0, np), (prev.1, nz), (loads.0, np), (loads.1, nz)] {
        if v.len() != n {
            return Err(StepError::Length { expected: n, got: v.len() });
        }
    }
    let forms = disc.assemble_forms(slice)?;
    let pp = SparseOperator::combine(&[(1.0 / tau, &forms.m), (1.0, &forms.k), (1.0, &forms.m_mu), (1.0, &forms.m_lambda)]);
    let zz = SparseOperator::combine(&[
        (1.0 / tau, &forms.m_a),
        (1.0, &forms.m_b),
        (1.0, &forms.k_a),
        (nu, &forms.k0),
    ]);
    let mut b = TripletBuilder::with_capacity(np + nz, np + nz, pp.nnz() + zz.nnz() + 2 * forms.b_omega.nnz());
    b.push_matrix(&pp, 0, 0, 1.0, false);
    b.push_matrix(&forms.b_omega, 0, np, 1.0, false);
    b.push_matrix(&forms.b_omega, np, 0, 1.0, true);
    b.push_matrix(&zz, np, np, 1.0, false);
    let matrix = b.build(DofSpace::Block, DofSpace::Block).mark_symmetric().map_err(StepError::Asymmetric)?;
    let mut rhs = forms.m.mul_vec(prev.0);
    rhs.iter_mut().zip(loads.0).for_each(|(r, h)| *r = *r / tau + h);
    let mut rz = forms.m_a.mul_vec(prev.1);
    rz.iter_mut().zip(loads.1).for_each(|(r, k)| *r = *r / tau + k);
    rhs.extend(rz);
    Ok(StepSystem {
        matrix,
        rhs,
        tau,
        nu,
        slice_index,
        forms,
        p_prev: prev.0.to_vec(),
        z_prev: prev.1.to_vec(),
        h: loads.0.to_vec(),
        k: loads.1.to_vec(),
    })
}

/// Jacobi-preconditioned CG on the block system, at most `10·dofs`
/// iterations. Negative curvature is reported as [`StepError::Indefinite`].
pub fn solve_step(sys: &StepSystem, tol: f64, start: Option<&[f64]>) -> Result<StepSolution, StepError> {
    let out = pcg(&sys.matrix, &sys.rhs, start, tol, 10 * sys.n_dofs().max(1))?;
    let (p, z) = sys.split(&out.solution);
    Ok(StepSolution { p: p.to_vec(), z: z.to_vec(), iterations: out.iterations, relative_residual: out.relative_residual })
}

/// Governing energy of the step, assembled term by term from the separate
/// forms (not from the block matrix).
pub fn energy(sys: &StepSystem, p: &[f64], z: &[f64]) -> Result<f64, StepError> {
    check_shapes(sys, p, z)?;
    let f = &sys.forms;
    let dp: Vec<f64> = p.iter().zip(&sys.p_prev).map(|(a, b)| a - b).collect();
    let dz: Vec<f64> = z.iter().zip(&sys.z_prev).map(|(a, b)| a - b).collect();
    let inertia = (f.m.quad(&dp) + f.m_a.quad(&dz)) / (2.0 * sys.tau);
    let diffusion = 0.5 * (f.k.quad(p) + f.k_a.quad(z) + sys.nu * f.k0.quad(z));
    let reaction = 0.5 * (f.m_mu.quad(p) + f.m_lambda.quad(p) + f.m_b.quad(z));
    let coupling = f.b_omega.bilinear(p, z);
    Ok(inertia + diffusion + reaction + coupling - dot(&sys.h, p) - dot(&sys.k, z))
}

/// Gradient of [`energy`], i.e. `S x − rhs`, again from the separate forms.
pub fn energy_gradient(sys: &StepSystem, p: &[f64], z: &[f64]) -> Result<Vec<f64>, StepError> {
    check_shapes(sys, p, z)?;
    let f = &sys.forms;
    let dp: Vec<f64> = p.iter().zip(&sys.p_prev).map(|(a, b)| a - b).collect();
    let dz: Vec<f64> = z.iter().zip(&sys.z_prev).map(|(a, b)| a - b).collect();
    let tau = sys.tau;
    let mut gp = f.m.mul_vec(&dp);
    let kp = f.k.mul_vec(p);
    let mp = f.m_mu.mul_vec(p);
    let lp = f.m_lambda.mul_vec(p);
    let bz = f.b_omega.mul_vec(z);
    for i in 0..gp.len() {
        gp[i] = gp[i] / tau + kp[i] + mp[i] + lp[i] + bz[i] - sys.h[i];
    }
    let mut gz = f.m_a.mul_vec(&dz);
    let az = f.k_a.mul_vec(z);
    let kz = f.k0.mul_vec(z);
    let bz = f.m_b.mul_vec(z);
    let btp = f.b_omega.mul_transpose_vec(p);
    for i in 0..gz.len() {
        gz[i] = gz[i] / tau + az[i] + sys.nu * kz[i] + bz[i] + btp[i] - sys.k[i];
    }
    gp.extend(gz);
    Ok(gp)
}

fn check_shapes(sys: &StepSystem, p: &[f64], z: &[f64]) -> Result<(), StepError> {
    if p.len() != sys.n_p() {
        return Err(StepError::Length { expected: sys.n_p(), got: p.len() });
    }
    if z.len() != sys.n_z() {
        return Err(StepError::Length { expected: sys.n_z(), got: z.len() });
    }
    Ok(())
}

/// Marches the scheme over every slice. Each step is warm-started from the
/// previous state.
#[allow(clippy::too_many_arguments)]
pub fn run_scheme(
    disc: &Discretization,
    coefficients: &SextetSlices,
    forcing: &ForcingSlices,
    initial: (&[f64], &[f64]),
    tau: f64,
    nu: f64,
    tol: f64,
    guard: TauGuard,
) -> Result<DiscreteTrajectory, StepError> {
    let n = coefficients.n_steps();
    if forcing.n_steps() != n {
        return Err(StepError::Length { expected: n, got: forcing.n_steps() });
    }
    let at = |index: usize| move |e: StepError| StepError::AtStep { index, source: Box::new(e) };
    let mut traj = DiscreteTrajectory::new(tau, coefficients.a.t_end, initial.0.to_vec(), initial.1.to_vec());
    for i in 1..=n {
        let (pp, zp) = traj.state(i - 1);
        let sys = assemble_step_system(
            disc,
            &coefficients.slice(i),
            i,
            (pp, zp),
            (&forcing.h[i], &forcing.k[i]),
            tau,
            nu,
            guard,
        )
        .map_err(at(i))?;
        let start = [pp, zp].concat();
        let sol = solve_step(&sys, tol, Some(&start)).map_err(at(i))?;
        let e = energy(&sys, &sol.p, &sol.z).map_err(at(i))?;
        traj.push(disc, sol, e);
    }
    Ok(traj)
}
