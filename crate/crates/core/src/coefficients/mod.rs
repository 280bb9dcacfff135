//! Problem data: the coefficient sextet `[a, b, μ, λ, ω, A]`, forcing
//! `[h, k]`, initial data, their time slicing, and the explicit constants
//! that depend on them.
//!
//! Every sup-norm here is a discrete maximum over the sampling lattice.
//! Vector and matrix norms are sums of the componentwise norms, which
//! dominate the pointwise Euclidean and spectral norms.

mod constants;
mod expr;
mod field;
pub mod io;
mod time;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::spatial::{integrate_product, Discretization, Mesh};

pub use constants::{
    c1_star, c_star, c_tilde_star, delta0, operator_bounds, tau_star, EmbeddingConstants, SchemeConstants,
};
pub use expr::{Expr, TrigFunction};
pub use field::{FieldKind, SpaceTimeField, TimeGrid};
pub use time::{discretize_time, interpolant_eval, n_steps, InterpolantKind, SliceMode, TimeSlices};

#[derive(Debug, Error)]
pub enum CoefficientError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite sample at flat index {0}")]
    NonFinite(usize),
    #[error("invalid time grid: {0}")]
    TimeGrid(String),
    #[error("step size must lie in (0, 1), got {0}")]
    Tau(f64),
    #[error("time {t} outside [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },
    #[error("empty sample set")]
    Empty,
    #[error("nu must be positive, got {0}")]
    Nu(f64),
    #[error("coefficient a is not bounded away from zero (delta_* = {0})")]
    NotPositive(f64),
    #[error("field file: {0}")]
    Io(String),
}

/// Nodal values of the six coefficients at one time index.
#[derive(Debug, Clone, Copy)]
pub struct CoefficientSlice<'a> {
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub mu: &'a [f64],
    pub lambda: &'a [f64],
    /// `[node][dim]`.
    pub omega: &'a [f64],
    /// `[node][row][col]`.
    pub amat: &'a [f64],
}

/// Lattice norms of a sextet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SextetNorms {
    pub a_inf: f64,
    pub grad_a_inf: f64,
    pub dt_a_inf: f64,
    /// `|a|_∞ + |∇a|_∞ + |∂_t a|_∞`.
    pub a_w1inf: f64,
    pub b_inf: f64,
    pub mu_linf_h: f64,
    pub lambda_inf: f64,
    pub omega_inf: f64,
    pub amat_inf: f64,
    pub delta_star: f64,
}

#[derive(Debug, Clone)]
pub struct CoefficientSextet {
    a: SpaceTimeField,
    b: SpaceTimeField,
    mu: SpaceTimeField,
    lambda: SpaceTimeField,
    omega: SpaceTimeField,
    amat: SpaceTimeField,
    norms: SextetNorms,
}

/// Minimum over every sample of a scalar field.
pub fn delta_star(field: &SpaceTimeField) -> Result<f64, CoefficientError> {
    if field.kind() != FieldKind::Scalar {
        return Err(CoefficientError::Shape("delta_star needs a scalar field".into()));
    }
    field.values().iter().copied().reduce(f64::min).ok_or(CoefficientError::Empty)
}

fn sup(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// `Σ_k max |F_k|` over components `k` of a vector or matrix field.
fn component_sup(field: &SpaceTimeField) -> f64 {
    let nc = field.components();
    (0..nc).map(|k| field.values().iter().skip(k).step_by(nc).fold(0.0f64, |m, v| m.max(v.abs()))).sum()
}

/// `Σ_k max_{t, cell} |∂_k a|` from elementwise gradients.
fn grad_sup(mesh: &Mesh, field: &SpaceTimeField) -> f64 {
    let dim = mesh.dim();
    let mut per_axis = vec![0.0f64; dim];
    for s in field.samples() {
        for c in 0..mesh.n_cells() {
            for (d, g) in mesh.cell_gradient(c, s).iter().enumerate() {
                per_axis[d] = per_axis[d].max(g.abs());
            }
        }
    }
    per_axis.iter().sum()
}

fn h_norm_nodal(mesh: &Mesh, v: &[f64]) -> f64 {
    (0..mesh.n_cells()).map(|c| integrate_product(mesh, c, &[v, v])).sum::<f64>().max(0.0).sqrt()
}

impl CoefficientSextet {
    /// Checks that all six fields share the mesh and time grid and that `ω`,
    /// `A` match the mesh dimension, then caches the lattice norms.
    pub fn new(
        mesh: &Mesh,
        a: SpaceTimeField,
        b: SpaceTimeField,
        mu: SpaceTimeField,
        lambda: SpaceTimeField,
        omega: SpaceTimeField,
        amat: SpaceTimeField,
    ) -> Result<Self, CoefficientError> {
        let dim = mesh.dim();
        let expect = [
            ("a", &a, FieldKind::Scalar),
            ("b", &b, FieldKind::Scalar),
            ("mu", &mu, FieldKind::Scalar),
            ("lambda", &lambda, FieldKind::Scalar),
            ("omega", &omega, FieldKind::Vector(dim)),
            ("A", &amat, FieldKind::Matrix(dim)),
        ];
        for (name, f, kind) in expect {
            if f.kind() != kind {
                return Err(CoefficientError::Shape(format!("{name} is {:?}, expected {kind:?}", f.kind())));
            }
            if f.n_nodes() != mesh.n_nodes() {
                return Err(CoefficientError::Shape(format!(
                    "{name} has {} nodes, mesh has {}",
                    f.n_nodes(),
                    mesh.n_nodes()
                )));
            }
            if f.grid() != a.grid() {
                return Err(CoefficientError::Shape(format!("{name} is sampled on a different time grid")));
            }
        }
        let dt = a.grid().dt();
        let n = mesh.n_nodes();
        let mut dt_a: f64 = 0.0;
        for m in 0..a.grid().intervals {
            let (s0, s1) = (a.sample(m), a.sample(m + 1));
            for i in 0..n {
                dt_a = dt_a.max(((s1[i] - s0[i]) / dt).abs());
            }
        }
        let a_inf = sup(a.values());
        let grad_a_inf = grad_sup(mesh, &a);
        let norms = SextetNorms {
            a_inf,
            grad_a_inf,
            dt_a_inf: dt_a,
            a_w1inf: a_inf + grad_a_inf + dt_a,
            b_inf: sup(b.values()),
            mu_linf_h: mu.samples().map(|s| h_norm_nodal(mesh, s)).fold(0.0, f64::max),
            lambda_inf: sup(lambda.values()),
            omega_inf: component_sup(&omega),
            amat_inf: component_sup(&amat),
            delta_star: delta_star(&a)?,
        };
        Ok(Self { a, b, mu, lambda, omega, amat, norms })
    }

    /// Constant-in-time, constant-in-space sextet.
    #[allow(clippy::too_many_arguments)]
    pub fn constant(
        mesh: &Mesh,
        grid: TimeGrid,
        a: f64,
        b: f64,
        mu: f64,
        lambda: f64,
        omega: &[f64],
        amat: &[f64],
    ) -> Result<Self, CoefficientError> {
        let n = mesh.n_nodes();
        let d = mesh.dim();
        let s = |v: f64| SpaceTimeField::constant(FieldKind::Scalar, n, grid, &[v]);
        Self::new(
            mesh,
            s(a)?,
            s(b)?,
            s(mu)?,
            s(lambda)?,
            SpaceTimeField::constant(FieldKind::Vector(d), n, grid, omega)?,
            SpaceTimeField::constant(FieldKind::Matrix(d), n, grid, amat)?,
        )
    }

    pub fn a(&self) -> &SpaceTimeField {
        &self.a
    }
    pub fn b(&self) -> &SpaceTimeField {
        &self.b
    }
    pub fn mu(&self) -> &SpaceTimeField {
        &self.mu
    }
    pub fn lambda(&self) -> &SpaceTimeField {
        &self.lambda
    }
    pub fn omega(&self) -> &SpaceTimeField {
        &self.omega
    }
    pub fn amat(&self) -> &SpaceTimeField {
        &self.amat
    }

    pub fn norms(&self) -> &SextetNorms {
        &self.norms
    }

    pub fn grid(&self) -> TimeGrid {
        self.a.grid()
    }

    pub fn fields(&self) -> [(&'static str, &SpaceTimeField); 6] {
        [
            ("a", &self.a),
            ("b", &self.b),
            ("mu", &self.mu),
            ("lambda", &self.lambda),
            ("omega", &self.omega),
            ("A", &self.amat),
        ]
    }

    /// Slices all six fields onto the step grid.
    pub fn discretize(&self, tau: f64, mode: SliceMode) -> Result<SextetSlices, CoefficientError> {
        Ok(SextetSlices {
            tau,
            a: discretize_time(&self.a, tau, mode)?,
            b: discretize_time(&self.b, tau, mode)?,
            mu: discretize_time(&self.mu, tau, mode)?,
            lambda: discretize_time(&self.lambda, tau, mode)?,
            omega: discretize_time(&self.omega, tau, mode)?,
            amat: discretize_time(&self.amat, tau, mode)?,
        })
    }
}

/// The per-step coefficient slices `[a_i, b_i, μ_i, λ_i, ω_i, A_i]`.
#[derive(Debug, Clone)]
pub struct SextetSlices {
    pub tau: f64,
    pub a: TimeSlices,
    pub b: TimeSlices,
    pub mu: TimeSlices,
    pub lambda: TimeSlices,
    pub omega: TimeSlices,
    pub amat: TimeSlices,
}

impl SextetSlices {
    pub fn n_steps(&self) -> usize {
        self.a.n_steps()
    }

    pub fn slice(&self, i: usize) -> CoefficientSlice<'_> {
        CoefficientSlice {
            a: self.a.get(i),
            b: self.b.get(i),
            mu: self.mu.get(i),
            lambda: self.lambda.get(i),
            omega: self.omega.get(i),
            amat: self.amat.get(i),
        }
    }
}

/// Where a condition failed: time sample, node, and the offending value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub time_index: usize,
    pub node: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub pass: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub conditions: Vec<Condition>,
    pub norms: SextetNorms,
    pub delta_star: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.pass)
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn argmin(field: &SpaceTimeField) -> Witness {
    let nc = field.components();
    let n = field.n_nodes();
    let (idx, value) = field
        .values()
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) });
    Witness { time_index: idx / (n * nc), node: (idx / nc) % n, value }
}

fn finite_condition(name: &'static str, norm: f64) -> Condition {
    Condition { name, pass: norm.is_finite(), witness: None }
}

/// Checks the admissibility conditions on the lattice.
pub fn validate_sextet(sextet: &CoefficientSextet) -> ValidationReport {
    let norms = *sextet.norms();
    let mut conditions = vec![finite_condition("a ∈ W^{1,∞}(Q)", norms.a_w1inf)];
    let amin = argmin(&sextet.a);
    conditions.push(Condition {
        name: "log a ∈ L^∞",
        pass: amin.value > 0.0,
        witness: (amin.value <= 0.0).then_some(amin),
    });
    conditions.push(finite_condition("b ∈ L^∞(Q)", norms.b_inf));
    conditions.push(finite_condition("μ ∈ L^∞(0,T;H)", norms.mu_linf_h));
    let mumin = argmin(&sextet.mu);
    conditions.push(Condition {
        name: "μ ≥ 0",
        pass: mumin.value >= 0.0,
        witness: (mumin.value < 0.0).then_some(mumin),
    });
    conditions.push(finite_condition("λ ∈ L^∞(Q)", norms.lambda_inf));
    conditions.push(finite_condition("ω ∈ L^∞(Q)^N", norms.omega_inf));
    conditions.push(finite_condition("A ∈ L^∞(Q)^{N×N}", norms.amat_inf));

    let amat = &sextet.amat;
    let d = amat.kind().dim();
    let n = amat.n_nodes();
    let mut sym_fail: Option<Witness> = None;
    let mut pd_fail: Option<Witness> = None;
    for m in 0..amat.grid().n_times() {
        let s = amat.sample(m);
        for node in 0..n {
            let block = &s[node * d * d..(node + 1) * d * d];
            let scale = sup(block).max(f64::MIN_POSITIVE);
            let mut asym: f64 = 0.0;
            for r in 0..d {
                for c in 0..d {
                    asym = asym.max((block[r * d + c] - block[c * d + r]).abs());
                }
            }
            if asym > 1e-12 * scale && sym_fail.is_none_or(|w| asym > w.value) {
                sym_fail = Some(Witness { time_index: m, node, value: asym });
            }
            let mat = DMatrix::from_fn(d, d, |r, c| 0.5 * (block[r * d + c] + block[c * d + r]));
            let lmin = SymmetricEigen::new(mat).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            if lmin <= 0.0 && pd_fail.is_none_or(|w| lmin < w.value) {
                pd_fail = Some(Witness { time_index: m, node, value: lmin });
            }
        }
    }
    conditions.push(Condition { name: "A symmetric", pass: sym_fail.is_none(), witness: sym_fail });
    conditions.push(Condition { name: "A positive definite", pass: pd_fail.is_none(), witness: pd_fail });
    ValidationReport { conditions, norms, delta_star: norms.delta_star }
}

/// Forcing `[h, k]`: L² densities plus optional divergence-form parts
/// `−div g` given by nodal vector fields.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub h: SpaceTimeField,
    pub h_flux: Option<SpaceTimeField>,
    pub k: SpaceTimeField,
    pub k_flux: Option<SpaceTimeField>,
}

impl Forcing {
    pub fn zero(n_nodes: usize, grid: TimeGrid) -> Self {
        Self {
            h: SpaceTimeField::zeros(FieldKind::Scalar, n_nodes, grid),
            h_flux: None,
            k: SpaceTimeField::zeros(FieldKind::Scalar, n_nodes, grid),
            k_flux: None,
        }
    }

    pub fn densities(h: SpaceTimeField, k: SpaceTimeField) -> Self {
        Self { h, h_flux: None, k, k_flux: None }
    }

    /// Load vectors `⟨h_i, φ⟩` on `V_h` and `⟨k_i, ψ⟩` on `V₀,h`.
    pub fn discretize(
        &self,
        disc: &Discretization,
        tau: f64,
        mode: SliceMode,
    ) -> Result<ForcingSlices, CoefficientError> {
        let dim = disc.mesh.dim();
        for f in [&self.h, &self.k] {
            if f.kind() != FieldKind::Scalar || f.n_nodes() != disc.mesh.n_nodes() {
                return Err(CoefficientError::Shape("forcing density must be a nodal scalar field".into()));
            }
        }
        for f in [&self.h_flux, &self.k_flux].into_iter().flatten() {
            if f.kind() != FieldKind::Vector(dim) || f.n_nodes() != disc.mesh.n_nodes() {
                return Err(CoefficientError::Shape("forcing flux must be a nodal vector field".into()));
            }
        }
        let hs = discretize_time(&self.h, tau, mode)?;
        let ks = discretize_time(&self.k, tau, mode)?;
        let hf = self.h_flux.as_ref().map(|f| discretize_time(f, tau, mode)).transpose()?;
        let kf = self.k_flux.as_ref().map(|f| discretize_time(f, tau, mode)).transpose()?;
        let n = hs.n_steps();
        let h = (0..=n).map(|i| disc.load(&disc.v, hs.get(i), hf.as_ref().map(|f| f.get(i)))).collect();
        let k = (0..=n).map(|i| disc.load(&disc.v0, ks.get(i), kf.as_ref().map(|f| f.get(i)))).collect();
        Ok(ForcingSlices { tau, h, k })
    }
}

/// Per-step load vectors; index 0 is carried for alignment and unused by
/// the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSlices {
    pub tau: f64,
    pub h: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
}

impl ForcingSlices {
    pub fn zero(disc: &Discretization, tau: f64, n_steps: usize) -> Self {
        Self { tau, h: vec![vec![0.0; disc.n_p()]; n_steps + 1], k: vec![vec![0.0; disc.n_z()]; n_steps + 1] }
    }

    pub fn n_steps(&self) -> usize {
        self.h.len() - 1
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &ForcingSlices, beta: f64) -> Self {
        let mix = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            x.iter().zip(y).map(|(u, v)| u.iter().zip(v).map(|(a, b)| alpha * a + beta * b).collect()).collect()
        };
        Self { tau: self.tau, h: mix(&self.h, &other.h), k: mix(&self.k, &other.k) }
    }

    /// `Σ_{j=1}^{n} τ (|h_j|²_{V*} + |k_j|²_{V₀*})`.
    pub fn y_norm_sq(&self, disc: &Discretization) -> f64 {
        (1..self.h.len())
            .map(|j| self.tau * (disc.v.dual_inner(&self.h[j], &self.h[j]) + disc.v0.dual_inner(&self.k[j], &self.k[j])))
            .sum()
    }
}
