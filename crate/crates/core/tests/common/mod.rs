//! Random smooth admissible data shared by the integration and acceptance
//! targets.
#![allow(dead_code)]

use std::f64::consts::PI;

use kwc_parabolic::coefficients::{CoefficientSextet, FieldKind, Forcing, SpaceTimeField, TimeGrid};
use kwc_parabolic::spatial::Mesh;
use rand::Rng;

use std::ops::Range;

fn draw(rng: &mut impl Rng, r: Range<f64>) -> f64 {
    if r.start < r.end {
        rng.gen_range(r)
    } else {
        r.start
    }
}

/// `c + s · sin(k·x + r t + φ)` with random wave, rate and phase.
#[derive(Debug, Clone, Copy)]
pub struct Wave {
    pub c: f64,
    pub s: f64,
    pub k: [f64; 2],
    pub r: f64,
    pub phase: f64,
}

impl Wave {
    /// Offset drawn from `c`, amplitude from `s`.
    pub fn random(rng: &mut impl Rng, c: Range<f64>, s: Range<f64>) -> Self {
        Self {
            c: draw(rng, c),
            s: draw(rng, s),
            k: [rng.gen_range(-2.0..2.0) * PI, rng.gen_range(-2.0..2.0) * PI],
            r: rng.gen_range(-3.0..3.0),
            phase: rng.gen_range(0.0..2.0 * PI),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let arg: f64 = x.iter().zip(&self.k).map(|(a, b)| a * b).sum::<f64>() + self.r * t + self.phase;
        self.c + self.s * arg.sin()
    }

    pub fn field(self, mesh: &Mesh, grid: TimeGrid) -> SpaceTimeField {
        SpaceTimeField::from_fn(FieldKind::Scalar, mesh, grid, move |t, x, o| o[0] = self.eval(t, x)).unwrap()
    }
}

/// Random coefficients of one admissible sextet. `A` is diagonal plus a
/// symmetric off-diagonal part kept below the diagonal margin.
#[derive(Debug, Clone)]
pub struct SextetRecipe {
    pub a: Wave,
    pub b: Wave,
    pub mu: Wave,
    pub lambda: Wave,
    pub omega: Vec<Wave>,
    pub amat_diag: Vec<Wave>,
    pub amat_off: Wave,
}

impl SextetRecipe {
    pub fn random(rng: &mut impl Rng, dim: usize) -> Self {
        Self {
            a: Wave::random(rng, 0.8..1.5, 0.0..0.3),
            b: Wave::random(rng, -0.5..0.5, 0.0..0.3),
            mu: Wave::random(rng, 0.5..1.0, 0.0..0.2),
            lambda: Wave::random(rng, -0.5..0.5, 0.0..0.3),
            omega: (0..dim).map(|_| Wave::random(rng, -0.5..0.5, 0.0..0.3)).collect(),
            amat_diag: (0..dim).map(|_| Wave::random(rng, 0.4..1.0, 0.0..0.15)).collect(),
            amat_off: Wave::random(rng, -0.1..0.1, 0.0..0.1),
        }
    }

    /// The same recipe with offsets and amplitudes of every wave moved by
    /// at most `amp`. Admissibility is kept in 1D for `amp ≤ 0.1`.
    pub fn perturbed(&self, rng: &mut impl Rng, amp: f64) -> Self {
        let mut p = |w: &Wave| Wave {
            c: w.c + amp * rng.gen_range(-1.0..1.0),
            s: (w.s + amp * rng.gen_range(-1.0..1.0)).max(0.0),
            ..*w
        };
        Self {
            a: p(&self.a),
            b: p(&self.b),
            mu: p(&self.mu),
            lambda: p(&self.lambda),
            omega: self.omega.iter().map(&mut p).collect(),
            amat_diag: self.amat_diag.iter().map(&mut p).collect(),
            amat_off: p(&self.amat_off),
        }
    }

    pub fn build(&self, mesh: &Mesh, grid: TimeGrid) -> CoefficientSextet {
        let d = mesh.dim();
        let om = self.omega.clone();
        let diag = self.amat_diag.clone();
        let off = self.amat_off;
        let omega = SpaceTimeField::from_fn(FieldKind::Vector(d), mesh, grid, move |t, x, o| {
            for (k, w) in om.iter().enumerate() {
                o[k] = w.eval(t, x);
            }
        })
        .unwrap();
        let amat = SpaceTimeField::from_fn(FieldKind::Matrix(d), mesh, grid, move |t, x, o| {
            for i in 0..d {
                for j in 0..d {
                    o[i * d + j] = if i == j { diag[i].eval(t, x) } else { off.eval(t, x) };
                }
            }
        })
        .unwrap();
        CoefficientSextet::new(
            mesh,
            self.a.field(mesh, grid),
            self.b.field(mesh, grid),
            self.mu.field(mesh, grid),
            self.lambda.field(mesh, grid),
            omega,
            amat,
        )
        .unwrap()
    }
}

/// Random smooth forcing densities of size about `scale`.
pub fn random_forcing(rng: &mut impl Rng, mesh: &Mesh, grid: TimeGrid, scale: f64) -> Forcing {
    let h = Wave::random(rng, -scale..scale, 0.0..scale);
    let k = Wave::random(rng, -scale..scale, 0.0..scale);
    Forcing::densities(h.field(mesh, grid), k.field(mesh, grid))
}

/// Random smooth nodal initial data.
pub fn random_initial(rng: &mut impl Rng, mesh: &Mesh, scale: f64) -> (Vec<f64>, Vec<f64>) {
    let p = Wave::random(rng, -scale..scale, scale..scale);
    let z = Wave::random(rng, 0.0..0.0, scale..scale);
    let nodes = 0..mesh.n_nodes();
    (nodes.clone().map(|i| p.eval(0.0, mesh.node(i))).collect(), nodes.map(|i| z.eval(0.0, mesh.node(i))).collect())
}

/// `(α·x + β·y)` entrywise.
pub fn mix(alpha: f64, x: &[f64], beta: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| alpha * a + beta * b).collect()
}

/// Backward Euler for `M u' + c K u = f` on a uniform 1D P1 mesh, coded
/// from scratch with tridiagonal (Thomas) solves.
pub struct HeatOracle {
    pub h: f64,
    pub n: usize,
    pub dirichlet: bool,
}

impl HeatOracle {
    /// Tridiagonal bands `(lower, diag, upper)` of `M/τ + cK` on the free nodes.
    fn bands(&self, tau: f64, c: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let nodes = self.n + 1;
        let (mut lo, mut di, mut up) = (vec![0.0; nodes], vec![0.0; nodes], vec![0.0; nodes]);
        for e in 0..self.n {
            let (m_d, m_o) = (self.h / 3.0, self.h / 6.0);
            let (k_d, k_o) = (1.0 / self.h, -1.0 / self.h);
            di[e] += m_d / tau + c * k_d;
            di[e + 1] += m_d / tau + c * k_d;
            up[e] += m_o / tau + c * k_o;
            lo[e + 1] += m_o / tau + c * k_o;
        }
        if self.dirichlet {
            (lo[2..nodes - 1].to_vec(), di[1..nodes - 1].to_vec(), up[1..nodes - 2].to_vec())
        } else {
            (lo[1..].to_vec(), di, up[..nodes - 1].to_vec())
        }
    }

    fn mass_apply(&self, u: &[f64]) -> Vec<f64> {
        let (d, o) = (2.0 * self.h / 3.0, self.h / 6.0);
        let m = u.len();
        (0..m)
            .map(|i| {
                let edge = !self.dirichlet && (i == 0 || i == m - 1);
                let di = if edge { d / 2.0 } else { d };
                di * u[i] + if i > 0 { o * u[i - 1] } else { 0.0 } + if i + 1 < m { o * u[i + 1] } else { 0.0 }
            })
            .collect()
    }

    fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Vec<f64> {
        let n = di.len();
        let (mut c, mut d) = (vec![0.0; n], vec![0.0; n]);
        c[0] = if n > 1 { up[0] / di[0] } else { 0.0 };
        d[0] = rhs[0] / di[0];
        for i in 1..n {
            let m = di[i] - lo[i - 1] * c[i - 1];
            if i + 1 < n {
                c[i] = up[i] / m;
            }
            d[i] = (rhs[i] - lo[i - 1] * d[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }

    pub fn march(&self, u0: &[f64], loads: &[Vec<f64>], tau: f64, c: f64) -> Vec<Vec<f64>> {
        let (lo, di, up) = self.bands(tau, c);
        let mut out = vec![u0.to_vec()];
        for f in &loads[1..] {
            let mu = self.mass_apply(out.last().unwrap());
            let rhs: Vec<f64> = mu.iter().zip(f).map(|(a, b)| a / tau + b).collect();
            out.push(Self::thomas(&lo, &di, &up, &rhs));
        }
        out
    }
}
