use serde::{Deserialize, Serialize};

use super::{CoefficientError, SpaceTimeField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceMode {
    /// `γ_i = (1/|Δ_i|) ∫_{Δ_i} γ`, composite midpoint on the field's grid.
    Average,
    /// `γ_i = γ(min(t_i, T))`.
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolantKind {
    /// Piecewise constant, `γ_i` on `(t_{i−1}, t_i]`.
    Forward,
    /// Piecewise constant, `γ_{i−1}` on `(t_{i−1}, t_i]`.
    Backward,
    /// Piecewise linear through the `γ_i`.
    Linear,
}

/// Number of steps of size `tau` needed to cover `[0, t_end]`; a trailing
/// partial step counts as one.
pub fn n_steps(t_end: f64, tau: f64) -> usize {
    ((t_end / tau) - 1e-9).ceil().max(1.0) as usize
}

/// Per-index values `γ_0 … γ_n` of a field, `n = ⌈T/τ⌉`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSlices {
    pub tau: f64,
    pub t_end: f64,
    pub slices: Vec<Vec<f64>>,
}

impl TimeSlices {
    pub fn n_steps(&self) -> usize {
        self.slices.len() - 1
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.slices[i]
    }

    pub fn eval(&self, kind: InterpolantKind, t: f64) -> Result<Vec<f64>, CoefficientError> {
        interpolant_eval(&self.slices, self.tau, self.t_end, kind, t)
    }
}

fn check_tau(tau: f64) -> Result<(), CoefficientError> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(CoefficientError::Tau(tau));
    }
    Ok(())
}

/// Slices a field onto the step grid `t_i = iτ`. `γ_0` is the value at
/// `t = 0` in both modes; the last step is truncated at `T` when `τ` does not
/// divide `T`.
pub fn discretize_time(field: &SpaceTimeField, tau: f64, mode: SliceMode) -> Result<TimeSlices, CoefficientError> {
    check_tau(tau)?;
    let grid = field.grid();
    let t_end = grid.t_end;
    let n = n_steps(t_end, tau);
    let mut slices = Vec::with_capacity(n + 1);
    slices.push(field.value_at(0.0));
    for i in 1..=n {
        let lo = ((i - 1) as f64 * tau).min(t_end);
        let hi = (i as f64 * tau).min(t_end);
        match mode {
            SliceMode::Point => slices.push(field.value_at(hi)),
            SliceMode::Average => slices.push(interval_mean(field, lo, hi)),
        }
    }
    Ok(TimeSlices { tau, t_end, slices })
}

/// Midpoint rule on every piece of `[lo, hi]` cut by the field's time grid.
/// Exact for fields that are affine between grid instants.
fn interval_mean(field: &SpaceTimeField, lo: f64, hi: f64) -> Vec<f64> {
    let grid = field.grid();
    let dt = grid.dt();
    let mut cuts = vec![lo];
    let first = (lo / dt).floor() as usize + 1;
    for m in first..grid.n_times() {
        let t = grid.time(m);
        if t >= hi - 1e-12 * dt {
            break;
        }
        if t > lo + 1e-12 * dt {
            cuts.push(t);
        }
    }
    cuts.push(hi);
    let mut acc = vec![0.0; field.n_nodes() * field.components()];
    for w in cuts.windows(2) {
        let v = field.value_at(0.5 * (w[0] + w[1]));
        for (a, x) in acc.iter_mut().zip(v) {
            *a += (w[1] - w[0]) * x;
        }
    }
    let len = hi - lo;
    acc.iter_mut().for_each(|a| *a /= len);
    acc
}

/// Evaluates an interpolant of `values[0..=n]` on the grid `t_i = iτ`.
/// Times within `1e-9·τ` of a grid point are snapped onto it.
pub fn interpolant_eval(
    values: &[Vec<f64>],
    tau: f64,
    t_end: f64,
    kind: InterpolantKind,
    t: f64,
) -> Result<Vec<f64>, CoefficientError> {
    let n = values.len().saturating_sub(1);
    let t_max = n as f64 * tau;
    if values.is_empty() || !(t >= -1e-12 && t <= t_end.max(t_max) + 1e-12) {
        return Err(CoefficientError::TimeOutOfRange { t, t_end });
    }
    let s = t / tau;
    let r = s.round();
    let s = if (s - r).abs() < 1e-9 { r } else { s };
    if s <= 0.0 || n == 0 {
        return Ok(values[0].clone());
    }
    // Index i with t ∈ (t_{i−1}, t_i].
    let i = (s.ceil() as usize).clamp(1, n);
    Ok(match kind {
        InterpolantKind::Forward => values[i].clone(),
        InterpolantKind::Backward => values[i - 1].clone(),
        InterpolantKind::Linear => {
            let w = (s - (i - 1) as f64).clamp(0.0, 1.0);
            values[i - 1].iter().zip(&values[i]).map(|(a, b)| (1.0 - w) * a + w * b).collect()
        }
    })
}
