use serde::Serialize;

use super::{AnalysisError, EstimateReport};
use crate::coefficients::{operator_bounds, EmbeddingConstants, SextetNorms, SextetSlices};
use crate::linalg::dot;
use crate::spatial::{Discretization, FeSpace};

/// A discrete element `[p, p̃, z, z̃]` of the trial space: `p`, `z` are read
/// as forward (piecewise constant) interpolants of their entries `1…n`,
/// `p̃`, `z̃` as linear interpolants of entries `0…n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadruple {
    pub tau: f64,
    pub p: Vec<Vec<f64>>,
    pub p_tilde: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub z_tilde: Vec<Vec<f64>>,
}

impl Quadruple {
    pub fn n_steps(&self) -> usize {
        self.p_tilde.len() - 1
    }

    /// `[p̄, p, z̄, z]` of a scheme trajectory.
    pub fn from_states(tau: f64, p: &[Vec<f64>], z: &[Vec<f64>]) -> Self {
        Self { tau, p: p.to_vec(), p_tilde: p.to_vec(), z: z.to_vec(), z_tilde: z.to_vec() }
    }

    /// `Σ_{i≥1} τ |x_i|²_space`.
    fn forward_sq(space: &FeSpace, tau: f64, xs: &[Vec<f64>]) -> f64 {
        xs.iter().skip(1).map(|x| tau * space.gram().quad(x)).sum()
    }

    /// `∫|x̃|²_{*} + ∫|∂_t x̃|²_{*}` of the linear interpolant, with `H`
    /// functions mapped into the dual by the mass matrix. The first integral
    /// is exact (Simpson on a quadratic).
    fn w12_dual_sq(space: &FeSpace, tau: f64, xs: &[Vec<f64>]) -> f64 {
        let fs: Vec<Vec<f64>> = xs.iter().map(|x| space.as_functional(x)).collect();
        let rs: Vec<Vec<f64>> = fs.iter().map(|f| space.riesz(f)).collect();
        let mut total = 0.0;
        for i in 1..xs.len() {
            let (a, b) = (dot(&fs[i - 1], &rs[i - 1]), dot(&fs[i], &rs[i]));
            let ab = dot(&fs[i - 1], &rs[i]);
            total += tau / 3.0 * (a + ab + b);
            let df: Vec<f64> = fs[i].iter().zip(&fs[i - 1]).map(|(u, v)| (u - v) / tau).collect();
            total += tau * space.dual_inner(&df, &df).max(0.0);
        }
        total
    }

    /// Norm of the product space, Hilbert sum of the four components.
    pub fn x_norm(&self, disc: &Discretization) -> f64 {
        (Self::forward_sq(&disc.v, self.tau, &self.p)
            + Self::w12_dual_sq(&disc.v, self.tau, &self.p_tilde)
            + Self::forward_sq(&disc.v0, self.tau, &self.z)
            + Self::w12_dual_sq(&disc.v0, self.tau, &self.z_tilde))
        .sqrt()
    }
}

/// Per-step residual functionals `(first, second)`.
pub type Residual = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Per-step load vectors `(h, k)` subtracted from a residual.
pub type Loads<'a> = (&'a [Vec<f64>], &'a [Vec<f64>]);

/// Per-step dual norms of the two residual components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    /// `(Σ_i τ(first_i² + second_i²))^{1/2}`.
    pub y_norm: f64,
}

/// Residual functionals of the quadruple on every step `i = 1…n`, using the
/// coefficient slice `i`:
/// ```text
/// first_i  = M ∂_t p̃ + K p_i + M_μ p_i + M_λ p_i + B z_i
/// second_i = M_a ∂_t z̃ + M_b z_i + (K_A + νK₀) z_i + Bᵀ p_i
/// ```
/// Index 0 of the returned vectors is empty.
pub fn apply_t(
    disc: &Discretization,
    slices: &SextetSlices,
    x: &Quadruple,
    nu: f64,
) -> Result<Residual, AnalysisError> {
    let n = x.n_steps();
    if slices.n_steps() < n || x.p.len() != n + 1 || x.z.len() != n + 1 || x.z_tilde.len() != n + 1 {
        return Err(AnalysisError::Mismatch("quadruple and slices cover different step counts".into()));
    }
    let tau = x.tau;
    let mut first = vec![Vec::new()];
    let mut second = vec![Vec::new()];
    for i in 1..=n {
        let f = disc.assemble_forms(&slices.slice(i))?;
        let dp: Vec<f64> = x.p_tilde[i].iter().zip(&x.p_tilde[i - 1]).map(|(a, b)| (a - b) / tau).collect();
        let dz: Vec<f64> = x.z_tilde[i].iter().zip(&x.z_tilde[i - 1]).map(|(a, b)| (a - b) / tau).collect();
        let (p, z) = (&x.p[i], &x.z[i]);
        let mut r1 = f.m.mul_vec(&dp);
        for v in [f.k.mul_vec(p), f.m_mu.mul_vec(p), f.m_lambda.mul_vec(p), f.b_omega.mul_vec(z)] {
            r1.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        let mut r2 = f.m_a.mul_vec(&dz);
        let k0z: Vec<f64> = f.k0.mul_vec(z).iter().map(|v| nu * v).collect();
        for v in [f.m_b.mul_vec(z), f.k_a.mul_vec(z), k0z, f.b_omega.mul_transpose_vec(p)] {
            r2.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        }
        first.push(r1);
        second.push(r2);
    }
    Ok((first, second))
}

impl ResidualReport {
    /// Dual norms of `residual − subtract` (pass zero loads for the plain
    /// residual).
    pub fn new(
        disc: &Discretization,
        tau: f64,
        residual: &Residual,
        subtract: Option<Loads<'_>>,
    ) -> Self {
        let n = residual.0.len() - 1;
        let mut first = Vec::with_capacity(n);
        let mut second = Vec::with_capacity(n);
        for i in 1..=n {
            let mut r1 = residual.0[i].clone();
            let mut r2 = residual.1[i].clone();
            if let Some((h, k)) = subtract {
                r1.iter_mut().zip(&h[i]).for_each(|(a, b)| *a -= b);
                r2.iter_mut().zip(&k[i]).for_each(|(a, b)| *a -= b);
            }
            first.push(disc.v.dual_inner(&r1, &r1).max(0.0).sqrt());
            second.push(disc.v0.dual_inner(&r2, &r2).max(0.0).sqrt());
        }
        let y = first.iter().zip(&second).map(|(a, b)| tau * (a * a + b * b)).sum::<f64>().sqrt();
        Self { first, second, y_norm: y }
    }
}

/// `|𝒯x|_𝒴 ≤ M₀ |x|_𝒳` for one quadruple.
pub fn operator_bound_check(
    disc: &Discretization,
    slices: &SextetSlices,
    norms: &SextetNorms,
    emb: &EmbeddingConstants,
    x: &Quadruple,
    nu: f64,
) -> Result<EstimateReport, AnalysisError> {
    let (m0, _) = operator_bounds(norms, nu, emb)?;
    let r = apply_t(disc, slices, x, nu)?;
    let y = ResidualReport::new(disc, x.tau, &r, None).y_norm;
    let xn = x.x_norm(disc);
    Ok(EstimateReport::new("operator bound", y, m0 * xn).with_constant("M0", m0).with_constant("x_norm", xn))
}
