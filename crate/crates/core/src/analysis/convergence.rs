use std::fmt::Write as _;

use serde::Serialize;

use super::mms::MmsEntry;
use super::{AnalysisError, Run, RunSettings};
use crate::coefficients::{CoefficientSextet, Forcing, InterpolantKind, SliceMode};
use crate::spatial::Discretization;
use crate::stepper::{DiscreteTrajectory, TauGuard};

/// Data for a τ-refinement study on a fixed mesh. `initial` is nodal.
#[derive(Debug, Clone)]
pub struct ConvergenceProblem<'a> {
    pub disc: &'a Discretization,
    pub sextet: &'a CoefficientSextet,
    pub forcing: &'a Forcing,
    pub initial: (&'a [f64], &'a [f64]),
    pub nu: f64,
    pub tol: f64,
    pub mode: SliceMode,
    pub guard: TauGuard,
    /// Exact solution, if manufactured.
    pub exact: Option<MmsEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub tau: f64,
    /// `max_i (|e_p(t_i)|_H + |e_z(t_i)|_H)`.
    pub err_c_h: f64,
    /// `(Σ_i τ(|e_p,i|²_V + |e_z,i|²_{V₀}))^{1/2}`.
    pub err_v: f64,
    /// `(Σ_i τ(|e_p,i|²_H + |e_z,i|²_H))^{1/2}`.
    pub err_h: f64,
    pub ratio_c_h: Option<f64>,
    pub ratio_v: Option<f64>,
    pub ratio_h: Option<f64>,
    /// `C([0,T];H)` distance to the previous (coarser) run at its grid times.
    pub cauchy: Option<f64>,
    pub cauchy_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub against_exact: bool,
    pub rows: Vec<ConvergenceRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,err_c_h,err_v,err_h,ratio_c_h,ratio_v,ratio_h,cauchy,cauchy_ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.12e},{:.12e},{:.12e},{:.12e},{},{},{},{},{}",
                r.tau,
                r.err_c_h,
                r.err_v,
                r.err_h,
                opt(r.ratio_c_h),
                opt(r.ratio_v),
                opt(r.ratio_h),
                opt(r.cauchy),
                opt(r.cauchy_ratio)
            );
        }
        s
    }

    fn column(&self, f: impl Fn(&ConvergenceRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    /// Whether each of the three error columns strictly decreases.
    pub fn errors_decreasing(&self) -> bool {
        [self.column(|r| r.err_c_h), self.column(|r| r.err_v), self.column(|r| r.err_h)]
            .iter()
            .all(|c| c.windows(2).all(|w| w[1] < w[0]))
    }

    /// Successive Cauchy ratios.
    pub fn cauchy_ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.cauchy_ratio).collect()
    }
}

/// `(e_p, e_z)` of a state against a reference state on the same spaces.
fn state_errors(disc: &Discretization, p: &[f64], z: &[f64], rp: &[f64], rz: &[f64]) -> (f64, f64, f64, f64) {
    let ep: Vec<f64> = p.iter().zip(rp).map(|(a, b)| a - b).collect();
    let ez: Vec<f64> = z.iter().zip(rz).map(|(a, b)| a - b).collect();
    (
        disc.v.mass().quad(&ep).max(0.0),
        disc.v0.mass().quad(&ez).max(0.0),
        disc.v.gram().quad(&ep).max(0.0),
        disc.v0.gram().quad(&ez).max(0.0),
    )
}

/// Reference state at `t`, either exact (nodal interpolant) or read off a
/// finer trajectory's linear interpolant.
fn reference(
    disc: &Discretization,
    exact: Option<MmsEntry>,
    fine: &DiscreteTrajectory,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    match exact {
        Some(e) => {
            let (p, z) = e.nodal(&disc.mesh, t);
            Ok((disc.v.restrict(&p), disc.v0.restrict(&z)))
        }
        None => Ok(fine.interpolant(InterpolantKind::Linear, t)?),
    }
}

fn c_h_distance(disc: &Discretization, coarse: &DiscreteTrajectory, fine: &DiscreteTrajectory) -> Result<f64, AnalysisError> {
    let mut m: f64 = 0.0;
    for i in 0..=coarse.n_steps() {
        let t = coarse.time(i).min(fine.time(fine.n_steps()));
        let (rp, rz) = fine.interpolant(InterpolantKind::Linear, t)?;
        let (hp, hz, _, _) = state_errors(disc, &coarse.p[i], &coarse.z[i], &rp, &rz);
        m = m.max(hp.sqrt() + hz.sqrt());
    }
    Ok(m)
}

/// Runs the scheme for every τ and tabulates errors and Cauchy differences.
pub fn tau_refinement_study(problem: &ConvergenceProblem<'_>, taus: &[f64]) -> Result<ConvergenceTable, AnalysisError> {
    if taus.len() < 3 {
        return Err(AnalysisError::TooFewTaus(taus.len()));
    }
    if taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(AnalysisError::NotDecreasing);
    }
    let runs = taus
        .iter()
        .map(|&tau| {
            let settings = RunSettings { tau, nu: problem.nu, tol: problem.tol, mode: problem.mode, guard: problem.guard };
            Run::execute(problem.disc, problem.sextet, problem.forcing, problem.initial, &settings).map(|r| r.traj)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let finest = runs.last().expect("at least three runs");
    let disc = problem.disc;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(runs.len());
    for (k, traj) in runs.iter().enumerate() {
        let tau = traj.tau;
        let (mut c_h, mut v_sq, mut h_sq): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for i in 0..=traj.n_steps() {
            let t = traj.time(i);
            let (rp, rz) = reference(disc, problem.exact, finest, t.min(finest.time(finest.n_steps())))?;
            let (hp, hz, vp, vz) = state_errors(disc, &traj.p[i], &traj.z[i], &rp, &rz);
            c_h = c_h.max(hp.sqrt() + hz.sqrt());
            if i > 0 {
                v_sq += tau * (vp + vz);
                h_sq += tau * (hp + hz);
            }
        }
        let (err_v, err_h) = (v_sq.sqrt(), h_sq.sqrt());
        let cauchy = if k > 0 { Some(c_h_distance(disc, &runs[k - 1], traj)?) } else { None };
        let prev = rows.last();
        let ratio = |f: fn(&ConvergenceRow) -> f64, now: f64| prev.map(|p| f(p) / now);
        rows.push(ConvergenceRow {
            tau,
            err_c_h: c_h,
            err_v,
            err_h,
            ratio_c_h: ratio(|r| r.err_c_h, c_h),
            ratio_v: ratio(|r| r.err_v, err_v),
            ratio_h: ratio(|r| r.err_h, err_h),
            cauchy,
            cauchy_ratio: prev.and_then(|p| p.cauchy.zip(cauchy).map(|(a, b)| a / b)),
        });
    }
    Ok(ConvergenceTable { against_exact: problem.exact.is_some(), rows })
}

#[cfg(test)]
mod tests {
    use super::super::fixture;
    use super::*;

    #[test]
    fn study_shape_and_errors() {
        let disc = fixture::disc();
        let sextet = fixture::sextet(&disc, 0.0);
        let forcing = fixture::forcing(&disc, 1.0);
        let (p0, z0) = fixture::initial(&disc);
        let s = fixture::settings(0.1);
        let problem = ConvergenceProblem {
            disc: &disc,
            sextet: &sextet,
            forcing: &forcing,
            initial: (&p0, &z0),
            nu: s.nu,
            tol: s.tol,
            mode: SliceMode::Point,
            guard: s.guard,
            exact: None,
        };
        assert!(matches!(tau_refinement_study(&problem, &[0.1, 0.05]), Err(AnalysisError::TooFewTaus(2))));
        assert!(matches!(tau_refinement_study(&problem, &[0.1, 0.05, 0.05]), Err(AnalysisError::NotDecreasing)));
        let table = tau_refinement_study(&problem, &[0.05, 0.025, 0.0125, 0.00625]).unwrap();
        assert_eq!(table.rows.len(), 4);
        assert!(!table.against_exact);
        // The finest run is its own reference.
        assert!(table.rows[3].err_c_h <= 1e-12);
        assert!(table.rows[0].cauchy.is_none() && table.rows[1].cauchy_ratio.is_none());
        assert!(table.cauchy_ratios().iter().all(|r| *r > 1.5), "{:?}", table.cauchy_ratios());
        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("tau,err_c_h,err_v,err_h,"));
    }
}
