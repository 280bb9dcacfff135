use super::AnalysisError;
use crate::linalg::{dot, norm2};
use crate::stepper::{energy, energy_gradient, StepSystem};

/// Largest system the dense oracle accepts.
pub const DENSE_CAP: usize = 200;

/// Densifies the block matrix and solves by Gaussian elimination with
/// partial pivoting. Indifferent to definiteness.
pub fn dense_oracle_step(sys: &StepSystem) -> Result<(Vec<f64>, Vec<f64>), AnalysisError> {
    let n = sys.n_dofs();
    if n > DENSE_CAP {
        return Err(AnalysisError::TooLarge { dofs: n, cap: DENSE_CAP });
    }
    let mut a = vec![vec![0.0; n + 1]; n];
    for (r, c, v) in sys.matrix.iter() {
        a[r][c] += v;
    }
    for (r, row) in a.iter_mut().enumerate() {
        row[n] = sys.rhs[r];
    }
    let scale = a.iter().flat_map(|r| r[..n].iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        if a[piv][col].abs() <= 1e-300f64.max(1e-15 * scale) {
            return Err(AnalysisError::Singular(col));
        }
        a.swap(col, piv);
        let (top, bottom) = a.split_at_mut(col + 1);
        let pivot = &top[col];
        for row in bottom {
            let f = row[col] / pivot[col];
            if f != 0.0 {
                row[col..].iter_mut().zip(&pivot[col..]).for_each(|(x, p)| *x -= f * p);
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    let z = x.split_off(sys.n_p());
    Ok((x, z))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOutcome {
    pub p: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Energy at every accepted iterate, starting point included.
    pub energies: Vec<f64>,
}

/// Steepest descent on the step energy with Armijo backtracking, stopping
/// once `‖∇E‖₂ ≤ 1e-8`. Accepted energies never increase by more than the
/// rounding error of evaluating `E` (relative `1e-13`).
pub fn minimize_energy_oracle(
    sys: &StepSystem,
    start: (&[f64], &[f64]),
    max_iter: usize,
) -> Result<MinimizeOutcome, AnalysisError> {
    const GTOL: f64 = 1e-8;
    const C: f64 = 1e-4;
    let np = sys.n_p();
    let mut x = [start.0, start.1].concat();
    let eval = |x: &[f64]| -> Result<(f64, Vec<f64>), AnalysisError> {
        let (p, z) = x.split_at(np);
        Ok((energy(sys, p, z)?, energy_gradient(sys, p, z)?))
    };
    let (mut e, mut g) = eval(&x)?;
    let mut energies = vec![e];
    let mut step = 1.0;
    for it in 0..max_iter {
        let gn = norm2(&g);
        if gn <= GTOL {
            let z = x.split_off(np);
            return Ok(MinimizeOutcome { p: x, z, iterations: it, grad_norm: gn, energies });
        }
        let gg = gn * gn;
        let mut trial_step = step;
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - trial_step * b).collect();
            let (et, gt) = eval(&trial)?;
            // Near the minimizer the energy decrease drops below the
            // resolution of `E`; there the Armijo test is replaced by its
            // exact equivalent for quadratics, `gᵀg(trial) ≥ −(1 − 2c)|g|²`.
            let armijo = et <= e - C * trial_step * gg && et < e;
            let unresolved = (e - et).abs() <= 1e-13 * e.abs().max(1.0);
            let slope_ok = dot(&g, &gt) >= -(1.0 - 2.0 * C) * gg;
            if armijo || (unresolved && slope_ok) {
                x = trial;
                e = et;
                g = gt;
                energies.push(e);
                // Let the step grow again after easy acceptances.
                step = trial_step * 2.0;
                break;
            }
            trial_step *= 0.5;
            if trial_step < 1e-300 {
                return Err(AnalysisError::NoConvergence { iterations: it, grad_norm: gn });
            }
        }
    }
    Err(AnalysisError::NoConvergence { iterations: max_iter, grad_norm: norm2(&g) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientSextet, SliceMode, TimeGrid};
    use crate::linalg::{norm2, sub};
    use crate::spatial::{Discretization, Domain};
    use crate::stepper::{assemble_step_system, solve_step, TauGuard};

    fn system(seed: u64, cells: usize) -> StepSystem {
        let disc = Discretization::build(Domain::Interval { x0: 0.0, x1: 1.0 }, cells).unwrap();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let r = |k: u64| ((seed * 31 + k * 17) % 97) as f64 / 97.0;
        let s = CoefficientSextet::constant(&disc.mesh, grid, 0.5 + r(1), r(2) - 0.5, r(3), r(4) - 0.5, &[r(5) - 0.5], &[0.3 + r(6)])
            .unwrap();
        let slices = s.discretize(0.01, SliceMode::Point).unwrap();
        let (np, nz) = (disc.n_p(), disc.n_z());
        let v = |n: usize, k: u64| (0..n).map(|i| ((i as f64 + 1.0) * (r(k) + 0.1)).sin()).collect::<Vec<_>>();
        assemble_step_system(&disc, &slices.slice(1), 1, (&v(np, 7), &v(nz, 8)), (&v(np, 9), &v(nz, 10)), 0.01, 0.8, TauGuard::off())
            .unwrap()
    }

    #[test]
    fn dense_oracle_matches_cg() {
        for seed in 0..30 {
            let sys = system(seed, 6 + (seed as usize % 5));
            let (p, z) = dense_oracle_step(&sys).unwrap();
            let sol = solve_step(&sys, 1e-13, None).unwrap();
            let d = norm2(&sub(&[p, z].concat(), &sol.block()));
            assert!(d <= 1e-9 * (1.0 + norm2(&sol.block())), "seed {seed}: {d:e}");
        }
    }

    #[test]
    fn dense_oracle_is_capped() {
        let sys = system(1, DENSE_CAP);
        assert!(matches!(dense_oracle_step(&sys), Err(AnalysisError::TooLarge { .. })));
    }

    #[test]
    fn descent_energies_never_increase() {
        let sys = system(3, 6);
        let start = (vec![0.0; sys.n_p()], vec![0.0; sys.n_z()]);
        let out = minimize_energy_oracle(&sys, (&start.0, &start.1), 100_000).unwrap();
        let worst = out.energies.windows(2).map(|w| (w[1] - w[0]) / w[0].abs().max(1.0)).fold(f64::MIN, f64::max);
        assert!(worst <= 1e-13, "energy rose by {worst:e}");
        assert!(out.energies.last() < out.energies.first());
        assert!(out.grad_norm <= 1e-8);
        let (p, z) = dense_oracle_step(&sys).unwrap();
        assert!(norm2(&sub(&[out.p, out.z].concat(), &[p, z].concat())) < 1e-6);
    }
}
