use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::coefficients::{CoefficientSextet, FieldKind, Forcing, SpaceTimeField, TimeGrid};
use crate::spatial::{Domain, Mesh};

/// Manufactured solutions with closed-form derivatives. With `s_d` the
/// coordinate rescaled to `[0, 1]` along axis `d`, `Exp` is
/// `p = Π cos(π s_d) e^{−t}`, `z = Π sin(π s_d) e^{−t}`; `p` has zero normal
/// derivative and `z` vanishes on the boundary of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MmsEntry {
    Zero,
    Exp,
}

/// Values and derivatives of `(p, z)` at one point. Hessians are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MmsValues {
    pub p: f64,
    pub p_t: f64,
    pub grad_p: Vec<f64>,
    pub hess_p: Vec<f64>,
    pub z: f64,
    pub z_t: f64,
    pub grad_z: Vec<f64>,
    pub hess_z: Vec<f64>,
}

/// Value, first and second derivative of `f(π(x − x₀)/L)` in `x`.
fn axis(f_is_sin: bool, x: f64, x0: f64, len: f64) -> [f64; 3] {
    let w = PI / len;
    let s = w * (x - x0);
    if f_is_sin {
        [s.sin(), w * s.cos(), -w * w * s.sin()]
    } else {
        [s.cos(), -w * s.sin(), -w * w * s.cos()]
    }
}

/// Value, gradient and hessian of a tensor product of axis factors.
fn product(factors: &[[f64; 3]]) -> (f64, Vec<f64>, Vec<f64>) {
    let d = factors.len();
    let val: f64 = factors.iter().map(|f| f[0]).product();
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut v = 1.0;
            for (k, f) in factors.iter().enumerate() {
                v *= match (k == i, k == j) {
                    (true, true) => f[2],
                    (true, false) | (false, true) => f[1],
                    (false, false) => f[0],
                };
            }
            hess[i * d + j] = v;
        }
        grad[i] = factors.iter().enumerate().map(|(k, f)| if k == i { f[1] } else { f[0] }).product();
    }
    (val, grad, hess)
}

impl MmsEntry {
    pub fn values(&self, domain: &Domain, t: f64, x: &[f64]) -> MmsValues {
        let ext = domain.extents();
        let d = ext.len();
        match self {
            MmsEntry::Zero => MmsValues {
                p: 0.0,
                p_t: 0.0,
                grad_p: vec![0.0; d],
                hess_p: vec![0.0; d * d],
                z: 0.0,
                z_t: 0.0,
                grad_z: vec![0.0; d],
                hess_z: vec![0.0; d * d],
            },
            MmsEntry::Exp => {
                let e = (-t).exp();
                let cos: Vec<[f64; 3]> = ext.iter().zip(x).map(|(&(x0, l), &xi)| axis(false, xi, x0, l)).collect();
                let sin: Vec<[f64; 3]> = ext.iter().zip(x).map(|(&(x0, l), &xi)| axis(true, xi, x0, l)).collect();
                let (p, gp, hp) = product(&cos);
                let (z, gz, hz) = product(&sin);
                let sc = |v: Vec<f64>| v.into_iter().map(|a| a * e).collect();
                MmsValues {
                    p: p * e,
                    p_t: -p * e,
                    grad_p: sc(gp),
                    hess_p: sc(hp),
                    z: z * e,
                    z_t: -z * e,
                    grad_z: sc(gz),
                    hess_z: sc(hz),
                }
            }
        }
    }

    /// Exact `(p, z)` at every mesh node.
    pub fn nodal(&self, mesh: &Mesh, t: f64) -> (Vec<f64>, Vec<f64>) {
        let domain = mesh.domain();
        (0..mesh.n_nodes())
            .map(|i| {
                let v = self.values(&domain, t, mesh.node(i));
                (v.p, v.z)
            })
            .unzip()
    }
}

/// Space-time constant coefficients for manufactured problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmsCoefficients {
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub lambda: f64,
    pub omega: Vec<f64>,
    /// Row-major.
    pub amat: Vec<f64>,
}

impl MmsCoefficients {
    /// `a ≡ 1`, `A ≡ 0`, everything else zero.
    pub fn heat(dim: usize) -> Self {
        Self { a: 1.0, b: 0.0, mu: 0.0, lambda: 0.0, omega: vec![0.0; dim], amat: vec![0.0; dim * dim] }
    }

    pub fn sextet(&self, mesh: &Mesh, grid: TimeGrid) -> Result<CoefficientSextet, AnalysisError> {
        Ok(CoefficientSextet::constant(mesh, grid, self.a, self.b, self.mu, self.lambda, &self.omega, &self.amat)?)
    }

    /// `(h, k)` of the manufactured pair at one point.
    pub fn residual(&self, v: &MmsValues, nu: f64) -> (f64, f64) {
        let d = v.grad_p.len();
        let lap_p: f64 = (0..d).map(|i| v.hess_p[i * d + i]).sum();
        let w_gz: f64 = self.omega.iter().zip(&v.grad_z).map(|(a, b)| a * b).sum();
        let w_gp: f64 = self.omega.iter().zip(&v.grad_p).map(|(a, b)| a * b).sum();
        let mut diffusion = 0.0;
        for i in 0..d {
            for j in 0..d {
                let c = self.amat[i * d + j] + if i == j { nu } else { 0.0 };
                diffusion += c * v.hess_z[i * d + j];
            }
        }
        let h = v.p_t - lap_p + (self.mu + self.lambda) * v.p + w_gz;
        let k = self.a * v.z_t + self.b * v.z - diffusion - w_gp;
        (h, k)
    }
}

/// Forcing that makes `entry` the exact solution for the given constant
/// coefficients, as closed-form fields sampled on the mesh.
pub fn mms_forcing(
    entry: MmsEntry,
    mesh: &Mesh,
    grid: TimeGrid,
    coeffs: &MmsCoefficients,
    nu: f64,
) -> Result<Forcing, AnalysisError> {
    let domain = mesh.domain();
    let bmax = (0..grid.n_times())
        .flat_map(|m| mesh.boundary_nodes().into_iter().map(move |i| (m, i)))
        .map(|(m, i)| entry.values(&domain, grid.time(m), mesh.node(i)).z.abs())
        .fold(0.0, f64::max);
    if bmax > 1e-12 {
        return Err(AnalysisError::Dirichlet(bmax));
    }
    let make = |second: bool| {
        let c = coeffs.clone();
        SpaceTimeField::from_fn(FieldKind::Scalar, mesh, grid, move |t, x, out| {
            let (h, k) = c.residual(&entry.values(&domain, t, x), nu);
            out[0] = if second { k } else { h };
        })
    };
    Ok(Forcing::densities(make(false)?, make(true)?))
}
