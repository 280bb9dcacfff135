use serde::{Deserialize, Serialize};

use super::SpatialError;

/// Computational domain. Only axis-aligned intervals and rectangles are meshed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    Interval { x0: f64, x1: f64 },
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { x0, x1 } => x1 - x0,
            Domain::Rectangle { x0, x1, y0, y1 } => (x1 - x0) * (y1 - y0),
        }
    }

    /// Lower corner and extents per axis.
    pub fn extents(&self) -> Vec<(f64, f64)> {
        match *self {
            Domain::Interval { x0, x1 } => vec![(x0, x1 - x0)],
            Domain::Rectangle { x0, x1, y0, y1 } => vec![(x0, x1 - x0), (y0, y1 - y0)],
        }
    }
}

/// Simplicial mesh: intervals in 1D, right triangles in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    domain: Domain,
    coords: Vec<f64>,
    cells: Vec<usize>,
    boundary: Vec<bool>,
    measures: Vec<f64>,
    // Per cell: (dim+1) × dim gradients of the barycentric coordinates.
    grads: Vec<f64>,
}

/// Uniform mesh with `resolution` cells per axis. 2D squares are split along
/// the diagonal from the lower-left to the upper-right corner.
pub fn build_mesh(domain: Domain, resolution: usize) -> Result<Mesh, SpatialError> {
    if resolution < 2 {
        return Err(SpatialError::Resolution(resolution));
    }
    for (lo, ext) in domain.extents() {
        if !(ext.is_finite() && lo.is_finite() && ext > 0.0) {
            return Err(SpatialError::DegenerateDomain(domain));
        }
    }
    let n = resolution;
    let (coords, cells, boundary) = match domain {
        Domain::Interval { x0, x1 } => {
            let h = (x1 - x0) / n as f64;
            let coords: Vec<f64> = (0..=n).map(|i| if i == n { x1 } else { x0 + i as f64 * h }).collect();
            let cells = (0..n).flat_map(|i| [i, i + 1]).collect();
            let boundary = (0..=n).map(|i| i == 0 || i == n).collect();
            (coords, cells, boundary)
        }
        Domain::Rectangle { x0, x1, y0, y1 } => {
            let hx = (x1 - x0) / n as f64;
            let hy = (y1 - y0) / n as f64;
            let mut coords = Vec::with_capacity(2 * (n + 1) * (n + 1));
            let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
            for j in 0..=n {
                for i in 0..=n {
                    let x = if i == n { x1 } else { x0 + i as f64 * hx };
                    let y = if j == n { y1 } else { y0 + j as f64 * hy };
                    coords.push(x);
                    coords.push(y);
                    boundary.push(i == 0 || j == 0 || i == n || j == n);
                }
            }
            let id = |i: usize, j: usize| j * (n + 1) + i;
            let mut cells = Vec::with_capacity(6 * n * n);
            for j in 0..n {
                for i in 0..n {
                    let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                    cells.extend_from_slice(&[a, b, c]);
                    cells.extend_from_slice(&[a, c, d]);
                }
            }
            (coords, cells, boundary)
        }
    };
    Mesh::from_parts(domain, coords, cells, boundary)
}

impl Mesh {
    fn from_parts(
        domain: Domain,
        coords: Vec<f64>,
        cells: Vec<usize>,
        boundary: Vec<bool>,
    ) -> Result<Self, SpatialError> {
        let dim = domain.dim();
        let nv = dim + 1;
        let ncells = cells.len() / nv;
        let mut measures = Vec::with_capacity(ncells);
        let mut grads = Vec::with_capacity(ncells * nv * dim);
        for c in 0..ncells {
            let v = &cells[c * nv..(c + 1) * nv];
            let p = |k: usize, d: usize| coords[v[k] * dim + d];
            match dim {
                1 => {
                    let h = p(1, 0) - p(0, 0);
                    if h <= 0.0 {
                        return Err(SpatialError::DegenerateCell(c));
                    }
                    measures.push(h);
                    grads.extend_from_slice(&[-1.0 / h, 1.0 / h]);
                }
                2 => {
                    let (ax, ay) = (p(1, 0) - p(0, 0), p(1, 1) - p(0, 1));
                    let (bx, by) = (p(2, 0) - p(0, 0), p(2, 1) - p(0, 1));
                    let det = ax * by - ay * bx;
                    if det <= 0.0 {
                        return Err(SpatialError::DegenerateCell(c));
                    }
                    measures.push(0.5 * det);
                    // Rows of J^{-T}: gradients of λ1, λ2; λ0 = 1 − λ1 − λ2.
                    let g1 = [by / det, -bx / det];
                    let g2 = [-ay / det, ax / det];
                    grads.extend_from_slice(&[-g1[0] - g2[0], -g1[1] - g2[1], g1[0], g1[1], g2[0], g2[1]]);
                }
                _ => unreachable!("only 1D and 2D meshes are built"),
            }
        }
        Ok(Self { dim, domain, coords, cells, boundary, measures, grads })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn n_nodes(&self) -> usize {
        self.boundary.len()
    }

    pub fn n_cells(&self) -> usize {
        self.measures.len()
    }

    pub fn verts_per_cell(&self) -> usize {
        self.dim + 1
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }

    pub fn measure(&self, c: usize) -> f64 {
        self.measures[c]
    }

    /// Gradient of the barycentric coordinate of local vertex `k` on cell `c`.
    pub fn bary_grad(&self, c: usize, k: usize) -> &[f64] {
        let nv = self.dim + 1;
        let base = (c * nv + k) * self.dim;
        &self.grads[base..base + self.dim]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| self.boundary[i]).collect()
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Largest cell diameter proxy: `measure^{1/dim}`.
    pub fn mesh_size(&self) -> f64 {
        self.measures.iter().fold(0.0f64, |m, v| m.max(v.powf(1.0 / self.dim as f64)))
    }

    /// Constant gradient of the P1 interpolant of nodal `values` on cell `c`.
    pub fn cell_gradient(&self, c: usize, values: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (k, &v) in self.cell(c).iter().enumerate() {
            let bg = self.bary_grad(c, k);
            for d in 0..self.dim {
                g[d] += values[v] * bg[d];
            }
        }
        g
    }

    /// Measure-weighted average of cell gradients at each node, flattened
    /// `[node][dim]`.
    pub fn nodal_gradient(&self, values: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_nodes() * self.dim];
        let mut weight = vec![0.0; self.n_nodes()];
        for c in 0..self.n_cells() {
            let g = self.cell_gradient(c, values);
            let m = self.measure(c);
            for &v in self.cell(c) {
                weight[v] += m;
                for d in 0..self.dim {
                    acc[v * self.dim + d] += m * g[d];
                }
            }
        }
        for (i, w) in weight.iter().enumerate() {
            for d in 0..self.dim {
                acc[i * self.dim + d] /= w;
            }
        }
        acc
    }

    /// Node table (`index x [y]`) followed by a cell table (`index v0 v1 [v2]`).
    pub fn to_text(&self) -> String {
        let mut s = format!("nodes {} {}\n", self.n_nodes(), self.dim);
        for i in 0..self.n_nodes() {
            let xs: Vec<String> = self.node(i).iter().map(|x| format!("{x:.17e}")).collect();
            s.push_str(&format!("{i} {} {}\n", xs.join(" "), u8::from(self.boundary[i])));
        }
        s.push_str(&format!("cells {} {}\n", self.n_cells(), self.verts_per_cell()));
        for c in 0..self.n_cells() {
            let vs: Vec<String> = self.cell(c).iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("{c} {}\n", vs.join(" ")));
        }
        s
    }
}
