use serde::{Deserialize, Serialize};

use super::{CoefficientError, SextetNorms};
use crate::spatial::{embedding_constant, Discretization, EmbeddingTarget, SpatialError};

/// Discrete embedding constants of the two P1 spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConstants {
    /// `V ⊂ L⁴`.
    pub cv4: f64,
    /// `V₀ ⊂ L⁴`.
    pub cv04: f64,
    /// `V₀ ⊂ H`; also the constant of `H ⊂ V₀*`.
    pub cv0h: f64,
    /// `V ⊂ H`; also the constant of `H ⊂ V*`.
    pub cvh: f64,
}

impl EmbeddingConstants {
    pub fn compute(disc: &Discretization, seed: u64) -> Result<Self, SpatialError> {
        Ok(Self {
            cv4: embedding_constant(&disc.v, EmbeddingTarget::L4, seed)?,
            cv04: embedding_constant(&disc.v0, EmbeddingTarget::L4, seed)?,
            cv0h: embedding_constant(&disc.v0, EmbeddingTarget::H, seed)?,
            cvh: embedding_constant(&disc.v, EmbeddingTarget::H, seed)?,
        })
    }
}

fn check(norms: &SextetNorms, nu: f64) -> Result<f64, CoefficientError> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(CoefficientError::Nu(nu));
    }
    if norms.delta_star.is_nan() || norms.delta_star <= 0.0 {
        return Err(CoefficientError::NotPositive(norms.delta_star));
    }
    Ok(1.0f64.min(nu).min(norms.delta_star))
}

/// Step-size threshold below which every step system is coercive.
pub fn tau_star(norms: &SextetNorms, nu: f64) -> Result<f64, CoefficientError> {
    let m = check(norms, nu)?;
    Ok(m / (16.0
        * (1.0 + nu + norms.delta_star)
        * (1.0 + norms.b_inf + norms.lambda_inf + norms.omega_inf * norms.omega_inf)))
}

fn c_common(norms: &SextetNorms, nu: f64, emb: &EmbeddingConstants) -> Result<f64, CoefficientError> {
    let m = check(norms, nu)?;
    let c4 = emb.cv4 * emb.cv4;
    Ok(9.0 * (1.0 + nu) / m * (1.0 + c4 + c4 * c4 + emb.cv04 * emb.cv04))
}

/// Continuous-dependence constant (uses `|a|_{W^{1,∞}(Q)}`).
pub fn c_star(norms: &SextetNorms, nu: f64, emb: &EmbeddingConstants) -> Result<f64, CoefficientError> {
    Ok(c_common(norms, nu, emb)?
        * (1.0 + norms.a_w1inf + norms.b_inf + norms.lambda_inf + norms.omega_inf * norms.omega_inf))
}

/// The same constant without the `a` term.
pub fn c_tilde_star(norms: &SextetNorms, nu: f64, emb: &EmbeddingConstants) -> Result<f64, CoefficientError> {
    Ok(c_common(norms, nu, emb)? * (1.0 + norms.b_inf + norms.lambda_inf + norms.omega_inf * norms.omega_inf))
}

/// Bounds `M₀`, `M₁` of the residual operator and of its inverse's time
/// derivative part.
pub fn operator_bounds(norms: &SextetNorms, nu: f64, emb: &EmbeddingConstants) -> Result<(f64, f64), CoefficientError> {
    check(norms, nu)?;
    let lead = 2.0 * (1.0 + nu) * (1.0 + emb.cv4 * emb.cv4 + emb.cv0h);
    let m0 = lead
        * (1.0
            + norms.a_inf
            + norms.grad_a_inf
            + norms.b_inf
            + norms.mu_linf_h
            + norms.lambda_inf
            + norms.omega_inf
            + norms.amat_inf);
    let d = norms.delta_star;
    let m1 = lead
        * (1.0 + (1.0 + emb.cv0h) * (norms.a_inf + norms.grad_a_inf) / (d * d))
        * (1.0 + norms.b_inf + norms.mu_linf_h + norms.lambda_inf + norms.omega_inf + norms.amat_inf);
    Ok((m0, m1))
}

/// `C₁* = (2(1 + C₀* + |a|_∞) e^{6C₀*T + 1} / min{1, ν, δ_*})^{1/2}`.
pub fn c1_star(norms: &SextetNorms, nu: f64, emb: &EmbeddingConstants, t_end: f64) -> Result<f64, CoefficientError> {
    let m = check(norms, nu)?;
    let c0 = c_star(norms, nu, emb)?;
    Ok((2.0 * (1.0 + c0 + norms.a_inf) * (6.0 * c0 * t_end + 1.0).exp() / m).sqrt())
}

/// Half of `min{τ_*, 1/(6C₀*)}`, so both strict inequalities hold.
pub fn delta0(tau_star: f64, c0_star: f64) -> f64 {
    0.5 * tau_star.min(1.0 / (6.0 * c0_star))
}

/// Every explicit constant for one data set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeConstants {
    pub nu: f64,
    pub t_end: f64,
    pub tau_star: f64,
    pub delta0: f64,
    pub c_star: f64,
    pub c_tilde_star: f64,
    /// `C*` of the sextet itself; identical to `c_star` here and kept under
    /// its own name because the a-priori bound refers to it.
    pub c0_star: f64,
    pub c1_star: f64,
    pub m0: f64,
    pub m1: f64,
    pub m0_star: f64,
    pub m1_star: f64,
    pub cv4: f64,
    pub cv04: f64,
    pub cv0h: f64,
    pub cvh: f64,
}

impl SchemeConstants {
    pub fn compute(
        norms: &SextetNorms,
        nu: f64,
        t_end: f64,
        emb: &EmbeddingConstants,
    ) -> Result<Self, CoefficientError> {
        let ts = tau_star(norms, nu)?;
        let cs = c_star(norms, nu, emb)?;
        let (m0, m1) = operator_bounds(norms, nu, emb)?;
        let m1_star = 4.0 * m1 * (1.0 + t_end) * (1.0 + emb.cvh + emb.cv0h) * (1.0 + cs * (1.5 * cs * t_end).exp());
        Ok(Self {
            nu,
            t_end,
            tau_star: ts,
            delta0: delta0(ts, cs),
            c_star: cs,
            c_tilde_star: c_tilde_star(norms, nu, emb)?,
            c0_star: cs,
            c1_star: c1_star(norms, nu, emb, t_end)?,
            m0,
            m1,
            m0_star: 1.0 / m0,
            m1_star,
            cv4: emb.cv4,
            cv04: emb.cv04,
            cv0h: emb.cv0h,
            cvh: emb.cvh,
        })
    }
}
