use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::CoefficientError;
use crate::spatial::Mesh;

/// Shape of the value a field takes at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "dim", rename_all = "kebab-case")]
pub enum FieldKind {
    Scalar,
    Vector(usize),
    Matrix(usize),
}

impl FieldKind {
    pub fn components(&self) -> usize {
        match *self {
            FieldKind::Scalar => 1,
            FieldKind::Vector(n) => n,
            FieldKind::Matrix(n) => n * n,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            FieldKind::Scalar => 1,
            FieldKind::Vector(n) | FieldKind::Matrix(n) => n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Scalar => "scalar",
            FieldKind::Vector(_) => "vector",
            FieldKind::Matrix(_) => "matrix",
        }
    }
}

/// Uniform grid of `intervals + 1` instants covering `[0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub intervals: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, intervals: usize) -> Result<Self, CoefficientError> {
        if !(t_end.is_finite() && t_end > 0.0) || intervals == 0 {
            return Err(CoefficientError::TimeGrid(format!("t_end = {t_end}, intervals = {intervals}")));
        }
        Ok(Self { t_end, intervals })
    }

    pub fn n_times(&self) -> usize {
        self.intervals + 1
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.intervals as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        if m == self.intervals {
            self.t_end
        } else {
            self.t_end * m as f64 / self.intervals as f64
        }
    }
}

type EvalFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Closed-form evaluator `(t, x) ↦ value`, bound to the node coordinates of
/// the mesh it was sampled on.
#[derive(Clone)]
pub struct Analytic {
    coords: Arc<Vec<f64>>,
    dim: usize,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for Analytic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Analytic").field("nodes", &(self.coords.len() / self.dim)).finish()
    }
}

/// Nodal samples of a scalar, vector or matrix field on a uniform time grid,
/// laid out `[time][node][component]`.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    kind: FieldKind,
    n_nodes: usize,
    grid: TimeGrid,
    values: Vec<f64>,
    analytic: Option<Analytic>,
}

impl SpaceTimeField {
    pub fn from_samples(
        kind: FieldKind,
        n_nodes: usize,
        grid: TimeGrid,
        values: Vec<f64>,
    ) -> Result<Self, CoefficientError> {
        if !(1..=3).contains(&kind.dim()) {
            return Err(CoefficientError::Shape(format!("field dimension {} not in 1..=3", kind.dim())));
        }
        let expected = grid.n_times() * n_nodes * kind.components();
        if values.len() != expected {
            return Err(CoefficientError::Shape(format!(
                "{} field has {} samples, expected {expected}",
                kind.name(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoefficientError::NonFinite(pos));
        }
        Ok(Self { kind, n_nodes, grid, values, analytic: None })
    }

    /// Samples `f` on the mesh nodes at every grid instant and keeps `f` as
    /// the evaluator for off-grid times.
    pub fn from_fn<F>(kind: FieldKind, mesh: &Mesh, grid: TimeGrid, f: F) -> Result<Self, CoefficientError>
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let dim = mesh.dim();
        let coords: Vec<f64> = (0..mesh.n_nodes()).flat_map(|i| mesh.node(i).to_vec()).collect();
        let analytic = Analytic { coords: Arc::new(coords), dim, eval: Arc::new(f) };
        let nc = kind.components();
        let mut values = vec![0.0; grid.n_times() * mesh.n_nodes() * nc];
        for m in 0..grid.n_times() {
            let block = &mut values[m * mesh.n_nodes() * nc..(m + 1) * mesh.n_nodes() * nc];
            eval_nodes(&analytic, grid.time(m), nc, block);
        }
        let mut field = Self::from_samples(kind, mesh.n_nodes(), grid, values)?;
        field.analytic = Some(analytic);
        Ok(field)
    }

    /// Same value at every node and time.
    pub fn constant(kind: FieldKind, n_nodes: usize, grid: TimeGrid, value: &[f64]) -> Result<Self, CoefficientError> {
        if value.len() != kind.components() {
            return Err(CoefficientError::Shape(format!(
                "constant {} value has {} components",
                kind.name(),
                value.len()
            )));
        }
        let values = value.iter().copied().cycle().take(grid.n_times() * n_nodes * value.len()).collect();
        Self::from_samples(kind, n_nodes, grid, values)
    }

    pub fn zeros(kind: FieldKind, n_nodes: usize, grid: TimeGrid) -> Self {
        Self::constant(kind, n_nodes, grid, &vec![0.0; kind.components()]).expect("zero field is well formed")
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    pub fn is_analytic(&self) -> bool {
        self.analytic.is_some()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nodal values at grid instant `m`.
    pub fn sample(&self, m: usize) -> &[f64] {
        let w = self.n_nodes * self.components();
        &self.values[m * w..(m + 1) * w]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_nodes * self.components())
    }

    /// Nodal values at an arbitrary `t ∈ [0, T]`: the closed form when one is
    /// attached, otherwise linear interpolation between samples.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(0.0, self.grid.t_end);
        let nc = self.components();
        let w = self.n_nodes * nc;
        if let Some(an) = &self.analytic {
            let mut out = vec![0.0; w];
            eval_nodes(an, t, nc, &mut out);
            return out;
        }
        let s = t / self.grid.dt();
        let m = (s.floor() as usize).min(self.grid.intervals - 1);
        let theta = (s - m as f64).clamp(0.0, 1.0);
        let (lo, hi) = (self.sample(m), self.sample(m + 1));
        lo.iter().zip(hi).map(|(a, b)| (1.0 - theta) * a + theta * b).collect()
    }

    /// Field `t ↦ γ(T − t)`. Samples are reversed by index, so the result is
    /// exact on the lattice.
    pub fn time_reversed(&self) -> Self {
        let w = self.n_nodes * self.components();
        let mut values = Vec::with_capacity(self.values.len());
        for m in (0..self.grid.n_times()).rev() {
            values.extend_from_slice(&self.values[m * w..(m + 1) * w]);
        }
        let analytic = self.analytic.as_ref().map(|an| {
            let inner = an.eval.clone();
            let t_end = self.grid.t_end;
            Analytic {
                coords: an.coords.clone(),
                dim: an.dim,
                eval: Arc::new(move |t: f64, x: &[f64], out: &mut [f64]| inner(t_end - t, x, out)) as Arc<EvalFn>,
            }
        });
        Self { kind: self.kind, n_nodes: self.n_nodes, grid: self.grid, values, analytic }
    }

    /// Sample-wise `Σ c_k F_k`. Closed forms are combined as well when every
    /// term carries one.
    pub fn linear_combination(terms: &[(f64, &SpaceTimeField)]) -> Result<Self, CoefficientError> {
        let first = terms.first().ok_or_else(|| CoefficientError::Shape("empty combination".into()))?.1;
        for (_, f) in terms {
            if f.kind != first.kind || f.n_nodes != first.n_nodes || f.grid != first.grid {
                return Err(CoefficientError::Shape("combined fields differ in shape or time grid".into()));
            }
        }
        let mut values = vec![0.0; first.values.len()];
        for (c, f) in terms {
            for (v, x) in values.iter_mut().zip(&f.values) {
                *v += c * x;
            }
        }
        let mut out = Self::from_samples(first.kind, first.n_nodes, first.grid, values)?;
        if terms.iter().all(|(_, f)| f.analytic.is_some()) {
            let parts: Vec<(f64, Arc<EvalFn>)> =
                terms.iter().map(|(c, f)| (*c, f.analytic.as_ref().unwrap().eval.clone())).collect();
            let an = first.analytic.as_ref().unwrap();
            let nc = first.components();
            out.analytic = Some(Analytic {
                coords: an.coords.clone(),
                dim: an.dim,
                eval: Arc::new(move |t: f64, x: &[f64], o: &mut [f64]| {
                    let mut buf = vec![0.0; nc];
                    o.iter_mut().for_each(|v| *v = 0.0);
                    for (c, e) in &parts {
                        e(t, x, &mut buf);
                        for (v, b) in o.iter_mut().zip(&buf) {
                            *v += c * b;
                        }
                    }
                }),
            });
        }
        Ok(out)
    }

    /// Applies `f` to every nodal sample, dropping any closed form.
    pub fn map_samples(&self, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let nc = self.components();
        let mut values = vec![0.0; self.values.len()];
        for (src, dst) in self.values.chunks(nc).zip(values.chunks_mut(nc)) {
            f(src, dst);
        }
        Self { kind: self.kind, n_nodes: self.n_nodes, grid: self.grid, values, analytic: None }
    }
}

fn eval_nodes(an: &Analytic, t: f64, nc: usize, out: &mut [f64]) {
    let n = an.coords.len() / an.dim;
    for i in 0..n {
        let x = &an.coords[i * an.dim..(i + 1) * an.dim];
        an.eval.as_ref()(t, x, &mut out[i * nc..(i + 1) * nc]);
    }
}
