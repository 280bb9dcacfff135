//! Meshes, the two P1 spaces and everything assembled on them.
//!
//! `V_h` carries a value at every node and realizes the natural (Neumann)
//! boundary condition of the first equation. `V₀,h` drops the boundary nodes,
//! so the homogeneous Dirichlet condition of the second equation holds by
//! elimination. Both spaces are normed by `(∇u,∇v) + (u,v)`.
//!
//! All element integrals are evaluated in closed form with the barycentric
//! moment formula, so every form is exact for P1 trial/test functions against
//! P1 coefficient interpolants.

mod embedding;
mod mesh;

use std::sync::Arc;

use thiserror::Error;

use crate::coefficients::CoefficientSlice;
use crate::linalg::{BandedCholesky, DofSpace, LinalgError, SparseOperator, TripletBuilder};

pub use embedding::{embedding_constant, EmbeddingTarget};
pub use mesh::{build_mesh, Domain, Mesh};

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("resolution must be at least 2 cells per axis, got {0}")]
    Resolution(usize),
    #[error("degenerate domain {0:?}")]
    DegenerateDomain(Domain),
    #[error("cell {0} has non-positive measure")]
    DegenerateCell(usize),
    #[error("space has no degrees of freedom")]
    EmptySpace,
    #[error("vector length {got} does not match {expected} degrees of freedom")]
    Length { expected: usize, got: usize },
    #[error("coefficient field `{name}` has {got} entries, expected {expected}")]
    CoefficientShape { name: &'static str, expected: usize, got: usize },
    #[error("Gram matrix factorization failed: {0}")]
    Gram(#[from] LinalgError),
    #[error("embedding constant iteration did not converge in {0} iterations")]
    NoConvergence(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Neumann,
    Dirichlet0,
}

/// `∫_T λ^α = d!·|T|·Πα_k! / (d + |α|)!` for a `d`-simplex.
pub fn barycentric_moment(dim: usize, measure: f64, powers: &[usize]) -> f64 {
    fn fact(n: usize) -> f64 {
        (1..=n).fold(1.0, |acc, k| acc * k as f64)
    }
    let total: usize = powers.iter().sum();
    measure * fact(dim) * powers.iter().map(|&p| fact(p)).product::<f64>() / fact(dim + total)
}

/// Table of `∫_T Π_j λ_{k_j} / |T|` over all index tuples of a given length.
#[derive(Debug, Clone)]
struct MomentTable {
    nv: usize,
    arity: usize,
    values: Vec<f64>,
}

impl MomentTable {
    fn new(dim: usize, arity: usize) -> Self {
        let nv = dim + 1;
        let count = nv.pow(arity as u32);
        let mut values = Vec::with_capacity(count);
        for flat in 0..count {
            let mut powers = vec![0usize; nv];
            let mut rem = flat;
            for _ in 0..arity {
                powers[rem % nv] += 1;
                rem /= nv;
            }
            values.push(barycentric_moment(dim, 1.0, &powers));
        }
        Self { nv, arity, values }
    }

    /// Moment for the tuple `idx` (least significant index first).
    #[inline]
    fn get(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.arity);
        let mut flat = 0;
        for &k in idx.iter().rev() {
            flat = flat * self.nv + k;
        }
        self.values[flat]
    }
}

/// Exact integral over cell `c` of the product of P1 interpolants of the
/// given nodal fields (one to four factors).
pub fn integrate_product(mesh: &Mesh, c: usize, factors: &[&[f64]]) -> f64 {
    let verts = mesh.cell(c);
    let nv = verts.len();
    let m = factors.len();
    assert!((1..=4).contains(&m), "between one and four factors");
    let mut idx = vec![0usize; m];
    let mut total = 0.0;
    let count = nv.pow(m as u32);
    for flat in 0..count {
        let mut rem = flat;
        let mut prod = 1.0;
        for j in 0..m {
            idx[j] = rem % nv;
            rem /= nv;
            prod *= factors[j][verts[idx[j]]];
        }
        if prod != 0.0 {
            let mut powers = vec![0usize; nv];
            for &k in &idx {
                powers[k] += 1;
            }
            total += prod * barycentric_moment(mesh.dim(), mesh.measure(c), &powers);
        }
    }
    total
}

/// A P1 finite element space on a shared mesh, with its Gram matrix and a
/// factorization of it for Riesz maps.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    bc: BoundaryCondition,
    dof_of_node: Vec<Option<usize>>,
    node_of_dof: Vec<usize>,
    mass: SparseOperator,
    stiffness: SparseOperator,
    gram: SparseOperator,
    gram_factor: BandedCholesky,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, bc: BoundaryCondition) -> Result<Self, SpatialError> {
        let mut dof_of_node = Vec::with_capacity(mesh.n_nodes());
        let mut node_of_dof = Vec::new();
        for i in 0..mesh.n_nodes() {
            if bc == BoundaryCondition::Dirichlet0 && mesh.is_boundary(i) {
                dof_of_node.push(None);
            } else {
                dof_of_node.push(Some(node_of_dof.len()));
                node_of_dof.push(i);
            }
        }
        if node_of_dof.is_empty() {
            return Err(SpatialError::EmptySpace);
        }
        let ones = vec![1.0; mesh.n_nodes()];
        let space_tag = space_tag(bc);
        let mass = assemble_mass_on(&mesh, &dof_of_node, node_of_dof.len(), space_tag, &ones);
        let stiffness = assemble_stiffness_on(&mesh, &dof_of_node, node_of_dof.len(), space_tag, None);
        let gram = SparseOperator::combine(&[(1.0, &mass), (1.0, &stiffness)]);
        let gram_factor = BandedCholesky::factor(&gram)?;
        Ok(Self { mesh, bc, dof_of_node, node_of_dof, mass, stiffness, gram, gram_factor })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn n_dofs(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        self.node_of_dof[dof]
    }

    pub(crate) fn dof_map(&self) -> &[Option<usize>] {
        &self.dof_of_node
    }

    /// `(u, v)_H` Gram matrix.
    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    /// `(∇u, ∇v)` matrix.
    pub fn stiffness(&self) -> &SparseOperator {
        &self.stiffness
    }

    pub fn gram(&self) -> &SparseOperator {
        &self.gram
    }

    /// Nodal values on every mesh node → dof vector (boundary values dropped
    /// for the Dirichlet space).
    pub fn restrict(&self, nodal: &[f64]) -> Vec<f64> {
        self.node_of_dof.iter().map(|&n| nodal[n]).collect()
    }

    /// Dof vector → nodal values, zero on eliminated boundary nodes.
    pub fn extend(&self, dofs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.n_nodes()];
        for (d, &n) in self.node_of_dof.iter().enumerate() {
            out[n] = dofs[d];
        }
        out
    }

    pub fn h_norm(&self, x: &[f64]) -> f64 {
        self.mass.quad(x).max(0.0).sqrt()
    }

    /// `(|∇u|² + |u|²)^{1/2}`.
    pub fn norm(&self, x: &[f64]) -> f64 {
        self.gram.quad(x).max(0.0).sqrt()
    }

    /// Riesz representative `G⁻¹ f` of a functional given by its action on
    /// the basis.
    pub fn riesz(&self, f: &[f64]) -> Vec<f64> {
        self.gram_factor.solve(f)
    }

    /// Dual pairing `fᵀ G⁻¹ g`.
    pub fn dual_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        crate::linalg::dot(f, &self.riesz(g))
    }

    /// Functional `v ↦ (u, v)_H` of an H-function given by dofs.
    pub fn as_functional(&self, u: &[f64]) -> Vec<f64> {
        self.mass.mul_vec(u)
    }
}

fn space_tag(bc: BoundaryCondition) -> DofSpace {
    match bc {
        BoundaryCondition::Neumann => DofSpace::Full,
        BoundaryCondition::Dirichlet0 => DofSpace::Interior,
    }
}

/// Discrete dual norm `sqrt(fᵀ G⁻¹ f)` of a functional given by its values
/// on the basis functions of `space`.
pub fn dual_norm(f: &[f64], space: &FeSpace) -> Result<f64, SpatialError> {
    if f.len() != space.n_dofs() {
        return Err(SpatialError::Length { expected: space.n_dofs(), got: f.len() });
    }
    Ok(space.dual_inner(f, f).max(0.0).sqrt())
}

/// Fresh assembly of the space's Gram matrix, flagged symmetric.
pub fn assemble_gram(space: &FeSpace) -> SparseOperator {
    let ones = vec![1.0; space.mesh.n_nodes()];
    let tag = space_tag(space.bc);
    let m = assemble_mass_on(&space.mesh, &space.dof_of_node, space.n_dofs(), tag, &ones);
    let k = assemble_stiffness_on(&space.mesh, &space.dof_of_node, space.n_dofs(), tag, None);
    SparseOperator::combine(&[(1.0, &m), (1.0, &k)])
        .mark_symmetric()
        .expect("Gram matrix is symmetric by construction")
}

/// `∫ c φ_j φ_i` with `c` the P1 interpolant of nodal values.
fn assemble_mass_on(
    mesh: &Mesh,
    dofs: &[Option<usize>],
    n: usize,
    tag: DofSpace,
    coef: &[f64],
) -> SparseOperator {
    let nv = mesh.verts_per_cell();
    let table = MomentTable::new(mesh.dim(), 3);
    let mut b = TripletBuilder::with_capacity(n, n, mesh.n_cells() * nv * nv);
    for c in 0..mesh.n_cells() {
        let verts = mesh.cell(c);
        let meas = mesh.measure(c);
        for i in 0..nv {
            let Some(di) = dofs[verts[i]] else { continue };
            for j in 0..nv {
                let Some(dj) = dofs[verts[j]] else { continue };
                let mut v = 0.0;
                for k in 0..nv {
                    v += coef[verts[k]] * table.get(&[i, j, k]);
                }
                b.push(di, dj, meas * v);
            }
        }
    }
    b.build(tag, tag).mark_symmetric().expect("mass matrices are symmetric")
}

/// `∫ (Ā∇φ_j)·∇φ_i` with `Ā` the cell mean of a nodal `dim × dim` field
/// (identity when `None`).
fn assemble_stiffness_on(
    mesh: &Mesh,
    dofs: &[Option<usize>],
    n: usize,
    tag: DofSpace,
    amat: Option<&[f64]>,
) -> SparseOperator {
    let dim = mesh.dim();
    let nv = mesh.verts_per_cell();
    let mut b = TripletBuilder::with_capacity(n, n, mesh.n_cells() * nv * nv);
    let mut abar = vec![0.0; dim * dim];
    for c in 0..mesh.n_cells() {
        let verts = mesh.cell(c);
        let meas = mesh.measure(c);
        match amat {
            Some(a) => {
                abar.iter_mut().for_each(|x| *x = 0.0);
                for &v in verts {
                    for e in 0..dim * dim {
                        abar[e] += a[v * dim * dim + e] / nv as f64;
                    }
                }
            }
            None => {
                for r in 0..dim {
                    for s in 0..dim {
                        abar[r * dim + s] = if r == s { 1.0 } else { 0.0 };
                    }
                }
            }
        }
        for i in 0..nv {
            let Some(di) = dofs[verts[i]] else { continue };
            let gi = mesh.bary_grad(c, i);
            for j in 0..nv {
                let Some(dj) = dofs[verts[j]] else { continue };
                let gj = mesh.bary_grad(c, j);
                let mut v = 0.0;
                for r in 0..dim {
                    for s in 0..dim {
                        v += gi[r] * abar[r * dim + s] * gj[s];
                    }
                }
                b.push(di, dj, meas * v);
            }
        }
    }
    b.build(tag, tag)
}

/// The matrices of one time slice.
#[derive(Debug, Clone)]
pub struct FormSet {
    /// `(p, φ)` on `V_h`.
    pub m: SparseOperator,
    /// `(∇p, ∇φ)` on `V_h`.
    pub k: SparseOperator,
    /// `∫ μ p φ`.
    pub m_mu: SparseOperator,
    /// `(λ p, φ)`.
    pub m_lambda: SparseOperator,
    /// `(a z, ψ)` on `V₀,h`.
    pub m_a: SparseOperator,
    /// `(b z, ψ)`.
    pub m_b: SparseOperator,
    /// `∫ (A∇z)·∇ψ`.
    pub k_a: SparseOperator,
    /// `(∇z, ∇ψ)` on `V₀,h`.
    pub k0: SparseOperator,
    /// `B[i][j] = ∫ φ_i ω·∇ψ_j`: rows in `V_h`, columns in `V₀,h`. The first
    /// equation uses `B z`, the second `Bᵀ p`.
    pub b_omega: SparseOperator,
}

/// Both spaces on one mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub v: FeSpace,
    pub v0: FeSpace,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Result<Self, SpatialError> {
        let mesh = Arc::new(mesh);
        let v = FeSpace::new(mesh.clone(), BoundaryCondition::Neumann)?;
        let v0 = FeSpace::new(mesh.clone(), BoundaryCondition::Dirichlet0)?;
        Ok(Self { mesh, v, v0 })
    }

    pub fn build(domain: Domain, resolution: usize) -> Result<Self, SpatialError> {
        Self::new(build_mesh(domain, resolution)?)
    }

    pub fn n_p(&self) -> usize {
        self.v.n_dofs()
    }

    pub fn n_z(&self) -> usize {
        self.v0.n_dofs()
    }

    fn check_len(&self, name: &'static str, got: usize, per_node: usize) -> Result<(), SpatialError> {
        let expected = self.mesh.n_nodes() * per_node;
        if got != expected {
            return Err(SpatialError::CoefficientShape { name, expected, got });
        }
        Ok(())
    }

    /// Assembles every coefficient-dependent matrix of a slice.
    pub fn assemble_forms(&self, slice: &CoefficientSlice<'_>) -> Result<FormSet, SpatialError> {
        let dim = self.mesh.dim();
        self.check_len("a", slice.a.len(), 1)?;
        self.check_len("b", slice.b.len(), 1)?;
        self.check_len("mu", slice.mu.len(), 1)?;
        self.check_len("lambda", slice.lambda.len(), 1)?;
        self.check_len("omega", slice.omega.len(), dim)?;
        self.check_len("A", slice.amat.len(), dim * dim)?;
        let mesh = &self.mesh;
        let (np, nz) = (self.n_p(), self.n_z());
        let vm = self.v.dof_map();
        let zm = self.v0.dof_map();
        let (full, interior) = (DofSpace::Full, DofSpace::Interior);
        let sym = |m: SparseOperator| m.mark_symmetric().expect("weighted mass matrices are symmetric");
        let m_mu = sym(assemble_mass_on(mesh, vm, np, full, slice.mu));
        let m_lambda = sym(assemble_mass_on(mesh, vm, np, full, slice.lambda));
        let m_a = sym(assemble_mass_on(mesh, zm, nz, interior, slice.a));
        let m_b = sym(assemble_mass_on(mesh, zm, nz, interior, slice.b));
        // Symmetry of K_A follows that of A; it is checked by the step system.
        let k_a = assemble_stiffness_on(mesh, zm, nz, interior, Some(slice.amat));
        let b_omega = self.assemble_coupling(slice.omega);
        Ok(FormSet {
            m: self.v.mass.clone(),
            k: self.v.stiffness.clone(),
            m_mu,
            m_lambda,
            m_a,
            m_b,
            k_a,
            k0: self.v0.stiffness.clone(),
            b_omega,
        })
    }

    fn assemble_coupling(&self, omega: &[f64]) -> SparseOperator {
        let mesh = &self.mesh;
        let dim = mesh.dim();
        let nv = mesh.verts_per_cell();
        let table = MomentTable::new(dim, 2);
        let mut b = TripletBuilder::with_capacity(self.n_p(), self.n_z(), mesh.n_cells() * nv * nv);
        for c in 0..mesh.n_cells() {
            let verts = mesh.cell(c);
            let meas = mesh.measure(c);
            for i in 0..nv {
                let Some(di) = self.v.dof_of_node(verts[i]) else { continue };
                for j in 0..nv {
                    let Some(dj) = self.v0.dof_of_node(verts[j]) else { continue };
                    let gj = mesh.bary_grad(c, j);
                    let mut v = 0.0;
                    for k in 0..nv {
                        let wk = &omega[verts[k] * dim..(verts[k] + 1) * dim];
                        let w_dot_g: f64 = wk.iter().zip(gj).map(|(a, b)| a * b).sum();
                        v += w_dot_g * table.get(&[i, k]);
                    }
                    b.push(di, dj, meas * v);
                }
            }
        }
        b.build(DofSpace::Full, DofSpace::Interior)
    }

    /// Load vector `⟨f, φ_i⟩ = ∫ f φ_i + ∫ g·∇φ_i` on the given space, where
    /// `density` is nodal and `flux` (optional) is a nodal vector field
    /// representing the divergence-form part `−div g`.
    pub fn load(&self, space: &FeSpace, density: &[f64], flux: Option<&[f64]>) -> Vec<f64> {
        let mesh = &self.mesh;
        let dim = mesh.dim();
        let nv = mesh.verts_per_cell();
        let table = MomentTable::new(dim, 2);
        let mut out = vec![0.0; space.n_dofs()];
        for c in 0..mesh.n_cells() {
            let verts = mesh.cell(c);
            let meas = mesh.measure(c);
            for i in 0..nv {
                let Some(di) = space.dof_of_node(verts[i]) else { continue };
                let mut v = 0.0;
                for k in 0..nv {
                    v += density[verts[k]] * table.get(&[i, k]);
                }
                let mut acc = meas * v;
                if let Some(g) = flux {
                    let gi = mesh.bary_grad(c, i);
                    for d in 0..dim {
                        let gbar: f64 = verts.iter().map(|&n| g[n * dim + d]).sum::<f64>() / nv as f64;
                        acc += meas * gbar * gi[d];
                    }
                }
                out[di] += acc;
            }
        }
        out
    }
}
