use serde::Serialize;

use super::StepSolution;
use crate::coefficients::{interpolant_eval, CoefficientError, InterpolantKind};
use crate::spatial::Discretization;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub index: usize,
    pub t: f64,
    pub p_h: f64,
    pub z_h: f64,
    pub energy: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// States `[p_i, z_i]`, `i = 0…n`, of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrajectory {
    pub tau: f64,
    pub t_end: f64,
    pub p: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Nodal interpolation of initial data; `z₀` loses its boundary values.
pub fn project_initial(disc: &Discretization, p0: &[f64], z0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (disc.v.restrict(p0), disc.v0.restrict(z0))
}

impl DiscreteTrajectory {
    pub fn new(tau: f64, t_end: f64, p0: Vec<f64>, z0: Vec<f64>) -> Self {
        Self { tau, t_end, p: vec![p0], z: vec![z0], diagnostics: Vec::new() }
    }

    pub(crate) fn push(&mut self, disc: &Discretization, sol: StepSolution, energy: f64) {
        let index = self.p.len();
        self.diagnostics.push(StepDiagnostics {
            index,
            t: index as f64 * self.tau,
            p_h: disc.v.h_norm(&sol.p),
            z_h: disc.v0.h_norm(&sol.z),
            energy,
            iterations: sol.iterations,
            relative_residual: sol.relative_residual,
        });
        self.p.push(sol.p);
        self.z.push(sol.z);
    }

    pub fn n_steps(&self) -> usize {
        self.p.len() - 1
    }

    pub fn state(&self, i: usize) -> (&[f64], &[f64]) {
        (&self.p[i], &self.z[i])
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.tau
    }

    /// Interpolant of the state sequence at time `t`.
    pub fn interpolant(&self, kind: InterpolantKind, t: f64) -> Result<(Vec<f64>, Vec<f64>), CoefficientError> {
        Ok((
            interpolant_eval(&self.p, self.tau, self.t_end, kind, t)?,
            interpolant_eval(&self.z, self.tau, self.t_end, kind, t)?,
        ))
    }

    /// Slope `(x_i − x_{i−1})/τ` of the linear interpolant on step `i`.
    pub fn slope(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) / self.tau).collect();
        (d(&self.p[i], &self.p[i - 1]), d(&self.z[i], &self.z[i - 1]))
    }

    /// `α·self + β·other`, state by state.
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        let mix = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            x.iter().zip(y).map(|(u, v)| u.iter().zip(v).map(|(a, b)| alpha * a + beta * b).collect()).collect()
        };
        Self { tau: self.tau, t_end: self.t_end, p: mix(&self.p, &other.p), z: mix(&self.z, &other.z), diagnostics: vec![] }
    }

    /// Largest nodal difference to another trajectory over all states.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| {
            x.iter().zip(y).flat_map(|(u, v)| u.iter().zip(v).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max)
        };
        d(&self.p, &other.p).max(d(&self.z, &other.z))
    }

    /// Per-step records `i, t_i, |p_i|_H, |z_i|_H, E_i, iterations, residual`.
    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from("i,t,p_h,z_h,energy,iterations,relative_residual\n");
        for d in &self.diagnostics {
            s.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.3e}\n",
                d.index, d.t, d.p_h, d.z_h, d.energy, d.iterations, d.relative_residual
            ));
        }
        s
    }
}
