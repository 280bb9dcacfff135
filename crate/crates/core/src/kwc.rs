//! Coefficient sextets of the linearized and adjoint systems attached to a
//! regularized orientation phase-field model, built from a pair `(η, θ)`.
//!
//! With `f_ε(ξ) = (ε² + |ξ|²)^{1/2}` the linearized sextet is
//! ```text
//! a = α₀, b = 0, μ = α''(η) f_ε(∇θ), λ = g'(η), ω = α'(η) ∇f_ε(∇θ), A = α(η) ∇²f_ε(∇θ)
//! ```
//! and the adjoint one is its time reversal with `b = ∂_t α₀(T − t)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{CoefficientError, CoefficientSextet, FieldKind, SpaceTimeField};
use crate::spatial::Mesh;

#[derive(Debug, Error)]
pub enum KwcError {
    #[error("regularization eps must be positive, got {0}")]
    Eps(f64),
    #[error("alpha'' = {value:.3e} < 0 at time index {time_index}, node {node}: mu would be negative")]
    NegativeCurvature { time_index: usize, node: usize, value: f64 },
    #[error("mobility alpha = {value:.3e} is not positive at time index {time_index}, node {node}")]
    Mobility { time_index: usize, node: usize, value: f64 },
    #[error("theta = {value:.3e} on boundary node {node} at time index {time_index}")]
    Boundary { time_index: usize, node: usize, value: f64 },
    #[error("{0}")]
    Field(String),
    #[error("{0}")]
    Coefficient(#[from] CoefficientError),
}

/// Value, gradient and row-major hessian of `f_ε` at `ξ`.
pub fn f_eps(xi: &[f64], eps: f64) -> Result<(f64, Vec<f64>, Vec<f64>), KwcError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(KwcError::Eps(eps));
    }
    let d = xi.len();
    let f = (eps * eps + xi.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let grad = xi.iter().map(|v| v / f).collect();
    let f3 = f * f * f;
    let mut hess = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let id = if i == j { f * f } else { 0.0 };
            hess[i * d + j] = (id - xi[i] * xi[j]) / f3;
        }
    }
    Ok((f, grad, hess))
}

/// Mobility `α` of the orientation term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mobility {
    /// `min + r²`.
    Quadratic { min: f64 },
    /// `min + amplitude · exp(−r²/(2 width²))`. Concave near `r = 0`.
    Gaussian { min: f64, amplitude: f64, width: f64 },
}

impl Mobility {
    /// `(α, α', α'')` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        match *self {
            Mobility::Quadratic { min } => (min + r * r, 2.0 * r, 2.0),
            Mobility::Gaussian { min, amplitude, width } => {
                let w2 = width * width;
                let e = amplitude * (-r * r / (2.0 * w2)).exp();
                (min + e, -r / w2 * e, (r * r / w2 - 1.0) / w2 * e)
            }
        }
    }
}

/// Lipschitz perturbation `g`; only `g'` enters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation {
    Linear { slope: f64 },
    /// `tanh(scale · r)`.
    Tanh { scale: f64 },
}

impl Perturbation {
    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            Perturbation::Linear { slope } => slope,
            Perturbation::Tanh { scale } => scale / (scale * r).cosh().powi(2),
        }
    }
}

/// Model functions of the phase-field system.
#[derive(Debug, Clone)]
pub struct ModelFunctions {
    pub mobility: Mobility,
    pub g: Perturbation,
    pub alpha0: SpaceTimeField,
    /// `∂_t α₀`; difference quotients of `alpha0` on its lattice when absent.
    pub alpha0_dt: Option<SpaceTimeField>,
    pub eps: f64,
}

impl ModelFunctions {
    /// `α = 0.01 + r²`, `g = r`, `α₀ ≡ 1`, `ε = 0.05`.
    pub fn defaults(n_nodes: usize, grid: crate::coefficients::TimeGrid) -> Self {
        Self {
            mobility: Mobility::Quadratic { min: 0.01 },
            g: Perturbation::Linear { slope: 1.0 },
            alpha0: SpaceTimeField::constant(FieldKind::Scalar, n_nodes, grid, &[1.0]).expect("scalar constant"),
            alpha0_dt: None,
            eps: 0.05,
        }
    }

    fn alpha0_dt(&self) -> Result<SpaceTimeField, KwcError> {
        if let Some(f) = &self.alpha0_dt {
            return Ok(f.clone());
        }
        let f = &self.alpha0;
        let grid = f.grid();
        let (n, nt, dt) = (f.n_nodes(), grid.n_times(), grid.dt());
        let mut values = Vec::with_capacity(nt * n);
        for m in 0..nt {
            // Central in the interior, one-sided at the ends.
            let (lo, hi) = (m.saturating_sub(1), (m + 1).min(nt - 1));
            let span = (hi - lo) as f64 * dt;
            values.extend(f.sample(hi).iter().zip(f.sample(lo)).map(|(a, b)| (a - b) / span));
        }
        Ok(SpaceTimeField::from_samples(FieldKind::Scalar, n, grid, values)?)
    }
}

/// Phase fields `η` (orientation order) and `θ` (orientation angle).
#[derive(Debug, Clone)]
pub struct PhaseFieldPair {
    pub eta: SpaceTimeField,
    pub theta: SpaceTimeField,
}

impl PhaseFieldPair {
    pub fn new(mesh: &Mesh, eta: SpaceTimeField, theta: SpaceTimeField) -> Result<Self, KwcError> {
        for (name, f) in [("eta", &eta), ("theta", &theta)] {
            if f.kind() != FieldKind::Scalar || f.n_nodes() != mesh.n_nodes() {
                return Err(KwcError::Field(format!("{name} must be a nodal scalar field on the mesh")));
            }
        }
        if eta.grid() != theta.grid() {
            return Err(KwcError::Field("eta and theta are sampled on different time grids".into()));
        }
        Ok(Self { eta, theta })
    }

    /// Checks `θ = 0` on the boundary up to `tol`.
    pub fn check_dirichlet(&self, mesh: &Mesh, tol: f64) -> Result<(), KwcError> {
        for m in 0..self.theta.grid().n_times() {
            let s = self.theta.sample(m);
            for i in mesh.boundary_nodes() {
                if s[i].abs() > tol {
                    return Err(KwcError::Boundary { time_index: m, node: i, value: s[i] });
                }
            }
        }
        Ok(())
    }
}

/// A built sextet together with its (zero) initial data.
#[derive(Debug, Clone)]
pub struct KwcSystem {
    pub sextet: CoefficientSextet,
    pub p0: Vec<f64>,
    pub z0: Vec<f64>,
}

fn check_grid(pair: &PhaseFieldPair, funcs: &ModelFunctions) -> Result<(), KwcError> {
    if funcs.alpha0.grid() != pair.eta.grid() || funcs.alpha0.n_nodes() != pair.eta.n_nodes() {
        return Err(KwcError::Field("alpha0 must share the mesh and time grid of (eta, theta)".into()));
    }
    Ok(())
}

pub fn build_linearized(mesh: &Mesh, pair: &PhaseFieldPair, funcs: &ModelFunctions) -> Result<KwcSystem, KwcError> {
    check_grid(pair, funcs)?;
    let d = mesh.dim();
    let n = mesh.n_nodes();
    let grid = pair.eta.grid();
    let nt = grid.n_times();
    let mut mu = Vec::with_capacity(nt * n);
    let mut lambda = Vec::with_capacity(nt * n);
    let mut omega = Vec::with_capacity(nt * n * d);
    let mut amat = Vec::with_capacity(nt * n * d * d);
    for m in 0..nt {
        let eta = pair.eta.sample(m);
        let grad = mesh.nodal_gradient(pair.theta.sample(m));
        for i in 0..n {
            let (alpha, d1, d2) = funcs.mobility.eval(eta[i]);
            if d2 < 0.0 {
                return Err(KwcError::NegativeCurvature { time_index: m, node: i, value: d2 });
            }
            if alpha.is_nan() || alpha <= 0.0 {
                return Err(KwcError::Mobility { time_index: m, node: i, value: alpha });
            }
            let (f, fg, fh) = f_eps(&grad[i * d..(i + 1) * d], funcs.eps)?;
            mu.push(d2 * f);
            lambda.push(funcs.g.derivative(eta[i]));
            omega.extend(fg.iter().map(|v| d1 * v));
            amat.extend(fh.iter().map(|v| alpha * v));
        }
    }
    let scalar = |v| SpaceTimeField::from_samples(FieldKind::Scalar, n, grid, v);
    let sextet = CoefficientSextet::new(
        mesh,
        funcs.alpha0.clone(),
        SpaceTimeField::zeros(FieldKind::Scalar, n, grid),
        scalar(mu)?,
        scalar(lambda)?,
        SpaceTimeField::from_samples(FieldKind::Vector(d), n, grid, omega)?,
        SpaceTimeField::from_samples(FieldKind::Matrix(d), n, grid, amat)?,
    )?;
    Ok(KwcSystem { sextet, p0: vec![0.0; n], z0: vec![0.0; n] })
}

pub fn build_adjoint(mesh: &Mesh, pair: &PhaseFieldPair, funcs: &ModelFunctions) -> Result<KwcSystem, KwcError> {
    let lin = build_linearized(mesh, pair, funcs)?;
    let s = &lin.sextet;
    let sextet = CoefficientSextet::new(
        mesh,
        s.a().time_reversed(),
        funcs.alpha0_dt()?.time_reversed(),
        s.mu().time_reversed(),
        s.lambda().time_reversed(),
        s.omega().time_reversed(),
        s.amat().time_reversed(),
    )?;
    Ok(KwcSystem { sextet, ..lin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{validate_sextet, TimeGrid};
    use crate::spatial::{build_mesh, Domain};

    #[test]
    fn f_eps_at_origin() {
        let (f, g, h) = f_eps(&[0.0, 0.0], 0.1).unwrap();
        assert!((f - 0.1).abs() < 1e-15);
        assert_eq!(g, vec![0.0, 0.0]);
        assert!((h[0] - 10.0).abs() < 1e-12 && (h[3] - 10.0).abs() < 1e-12 && h[1] == 0.0);
        assert!(f_eps(&[1.0], 0.0).is_err());
    }

    #[test]
    fn f_eps_is_within_eps_of_norm() {
        for xi in [[0.0, 0.0], [3.0, 4.0], [1e-3, -2.0]] {
            let (f, _, _) = f_eps(&xi, 0.05).unwrap();
            assert!(f - xi[0].hypot(xi[1]) <= 0.05 + 1e-15);
        }
    }

    #[test]
    fn mobility_derivatives_match_differences() {
        let h = 1e-5;
        for m in [Mobility::Quadratic { min: 0.01 }, Mobility::Gaussian { min: 0.1, amplitude: 0.5, width: 0.7 }] {
            for r in [-0.8, 0.0, 0.3, 1.4] {
                let (_, d1, d2) = m.eval(r);
                let (p, q) = (m.eval(r + h), m.eval(r - h));
                assert!(((p.0 - q.0) / (2.0 * h) - d1).abs() < 1e-8);
                assert!(((p.1 - q.1) / (2.0 * h) - d2).abs() < 1e-8);
            }
        }
        let g = Perturbation::Tanh { scale: 2.0 };
        assert!((((2.0f64 * 0.31).tanh() - (2.0f64 * 0.29).tanh()) / 0.02 - g.derivative(0.3)).abs() < 1e-3);
    }

    #[test]
    fn constant_pair_gives_closed_form_sextet() {
        let mesh = build_mesh(Domain::Interval { x0: 0.0, x1: 1.0 }, 4).unwrap();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let zero = SpaceTimeField::zeros(FieldKind::Scalar, mesh.n_nodes(), grid);
        let pair = PhaseFieldPair::new(&mesh, zero.clone(), zero).unwrap();
        let funcs = ModelFunctions { eps: 0.1, ..ModelFunctions::defaults(mesh.n_nodes(), grid) };
        let sys = build_linearized(&mesh, &pair, &funcs).unwrap();
        let s = &sys.sextet;
        assert!(s.mu().values().iter().all(|v| (v - 0.2).abs() < 1e-14));
        assert!(s.omega().values().iter().all(|v| *v == 0.0));
        assert!(s.amat().values().iter().all(|v| (v - 0.1).abs() < 1e-14));
        assert!(s.b().values().iter().all(|v| *v == 0.0));
        assert!(sys.p0.iter().chain(&sys.z0).all(|v| *v == 0.0));
        assert!(validate_sextet(s).passed());
    }

    #[test]
    fn adjoint_of_linear_alpha0() {
        let mesh = build_mesh(Domain::Interval { x0: 0.0, x1: 1.0 }, 4).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let zero = SpaceTimeField::zeros(FieldKind::Scalar, mesh.n_nodes(), grid);
        let pair = PhaseFieldPair::new(&mesh, zero.clone(), zero).unwrap();
        let alpha0 = SpaceTimeField::from_fn(FieldKind::Scalar, &mesh, grid, |t, _, o| o[0] = 1.0 + t / 2.0).unwrap();
        let funcs = ModelFunctions { alpha0, ..ModelFunctions::defaults(mesh.n_nodes(), grid) };
        let adj = build_adjoint(&mesh, &pair, &funcs).unwrap();
        for m in 0..grid.n_times() {
            let t = grid.time(m);
            assert!(adj.sextet.a().sample(m).iter().all(|v| (v - (1.0 + (1.0 - t) / 2.0)).abs() < 1e-14));
            assert!(adj.sextet.b().sample(m).iter().all(|v| (v - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn concave_mobility_is_rejected() {
        let mesh = build_mesh(Domain::Interval { x0: 0.0, x1: 1.0 }, 4).unwrap();
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let zero = SpaceTimeField::zeros(FieldKind::Scalar, mesh.n_nodes(), grid);
        let pair = PhaseFieldPair::new(&mesh, zero.clone(), zero).unwrap();
        let funcs = ModelFunctions {
            mobility: Mobility::Gaussian { min: 0.1, amplitude: 1.0, width: 1.0 },
            ..ModelFunctions::defaults(mesh.n_nodes(), grid)
        };
        let err = build_linearized(&mesh, &pair, &funcs).unwrap_err();
        assert!(matches!(err, KwcError::NegativeCurvature { time_index: 0, node: 0, .. }));
    }

    #[test]
    fn dirichlet_flag_detects_boundary_values() {
        let mesh = build_mesh(Domain::Interval { x0: 0.0, x1: 1.0 }, 4).unwrap();
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let one = SpaceTimeField::constant(FieldKind::Scalar, mesh.n_nodes(), grid, &[1.0]).unwrap();
        let pair = PhaseFieldPair::new(&mesh, one.clone(), one).unwrap();
        assert!(matches!(pair.check_dirichlet(&mesh, 1e-12), Err(KwcError::Boundary { .. })));
    }
}
