//! Sparse matrices and the small set of linear solvers used by the stepper
//! and the norm computations.
//!
//! Everything here is plain compressed-row storage over `f64`. Matrices are
//! assembled from triplets, summed on duplicate entries, and never modified
//! afterwards.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("negative or zero curvature {curvature:.3e} in conjugate gradients at iteration {iteration}")]
    NegativeCurvature { iteration: usize, curvature: f64 },
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Row or column space a matrix acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofSpace {
    /// Nodal values on every mesh node (the Neumann space).
    Full,
    /// Nodal values on interior nodes only (the Dirichlet space).
    Interior,
    /// Concatenated `[p, z]` block vector of a step system.
    Block,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed on build.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Appends every stored entry of `m`, shifted by `(row_offset, col_offset)`
    /// and scaled by `scale`. When `transpose` is set the entries of `mᵀ` are
    /// appended instead.
    pub fn push_matrix(
        &mut self,
        m: &SparseOperator,
        row_offset: usize,
        col_offset: usize,
        scale: f64,
        transpose: bool,
    ) {
        for (r, c, v) in m.iter() {
            let (r, c) = if transpose { (c, r) } else { (r, c) };
            self.push(r + row_offset, c + col_offset, scale * v);
        }
    }

    pub fn build(mut self, row_space: DofSpace, col_space: DofSpace) -> SparseOperator {
        // Stable sort keeps the summation order of duplicates deterministic.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseOperator {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
            row_space,
            col_space,
            symmetric: false,
        }
    }
}

/// Compressed-row sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    row_space: DofSpace,
    col_space: DofSpace,
    symmetric: bool,
}

impl SparseOperator {
    pub fn zeros(nrows: usize, ncols: usize, row_space: DofSpace, col_space: DofSpace) -> Self {
        TripletBuilder::new(nrows, ncols).build(row_space, col_space)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_space(&self) -> DofSpace {
        self.row_space
    }

    pub fn col_space(&self) -> DofSpace {
        self.col_space
    }

    /// Whether symmetry was claimed and verified by [`Self::mark_symmetric`].
    pub fn is_marked_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Verifies `‖S − Sᵀ‖_max ≤ 1e-12 · ‖S‖_max` and records the flag.
    /// Returns the observed asymmetry on failure.
    pub fn mark_symmetric(mut self) -> Result<Self, f64> {
        let asym = self.asymmetry();
        if asym <= 1e-12 * self.max_abs().max(f64::MIN_POSITIVE) {
            self.symmetric = true;
            Ok(self)
        } else {
            Err(asym)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max |S_ij − S_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.iter().fold(0.0f64, |m, (r, c, v)| m.max((v - self.get(c, r)).abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "operand length");
        assert_eq!(y.len(), self.nrows, "output length");
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    /// `Sᵀ x`.
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "operand length");
        let mut y = vec![0.0; self.ncols];
        for (r, c, v) in self.iter() {
            y[c] += v * x[r];
        }
        y
    }

    /// `xᵀ S y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        b.push_matrix(self, 0, 0, 1.0, true);
        b.build(self.col_space, self.row_space)
    }

    /// Linear combination `Σ cᵢ Sᵢ` of equally shaped matrices.
    pub fn combine(terms: &[(f64, &SparseOperator)]) -> SparseOperator {
        let first = terms.first().expect("at least one term").1;
        let cap = terms.iter().map(|(_, m)| m.nnz()).sum();
        let mut b = TripletBuilder::with_capacity(first.nrows, first.ncols, cap);
        for (c, m) in terms {
            assert_eq!((m.nrows, m.ncols), (first.nrows, first.ncols), "shape mismatch in combine");
            b.push_matrix(m, 0, 0, *c, false);
        }
        let symmetric = terms.iter().all(|(_, m)| m.symmetric);
        let mut out = b.build(first.row_space, first.col_space);
        out.symmetric = symmetric;
        out
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.iter() {
            d[r][c] += v;
        }
        d
    }

    /// Half bandwidth: `max |i − j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.iter().map(|(r, c, _)| r.abs_diff(c)).max().unwrap_or(0)
    }

    /// Coordinate text export: one `row col value` line per stored entry.
    pub fn to_coordinate_text(&self) -> String {
        let mut s = format!("% {} {} {}\n", self.nrows, self.ncols, self.nnz());
        for (r, c, v) in self.iter() {
            s.push_str(&format!("{r} {c} {v:.17e}\n"));
        }
        s
    }
}

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y ← y + alpha·x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

pub fn scale(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

/// Banded Cholesky factorization `S = L Lᵀ` of a symmetric positive definite
/// sparse matrix. Used for Gram matrices, whose bandwidth is small on the
/// structured meshes built here.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    // Row i stores L[i][i-bw..=i] at offsets 0..=bw.
    band: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(s: &SparseOperator) -> Result<Self, LinalgError> {
        if s.nrows() != s.ncols() {
            return Err(LinalgError::Dimension { expected: s.nrows(), got: s.ncols() });
        }
        let n = s.nrows();
        let bw = s.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        // Lower triangle only.
        for (r, c, v) in s.iter() {
            if c <= r {
                band[r * w + (c + bw - r)] += v;
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut sum = band[i * w + (j + bw - i)];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    sum -= band[i * w + (k + bw - i)] * band[j * w + (k + bw - j)];
                }
                if j == i {
                    if sum <= 0.0 || !sum.is_finite() {
                        return Err(LinalgError::NotPositiveDefinite { row: i, pivot: sum });
                    }
                    band[i * w + bw] = sum.sqrt();
                } else {
                    band[i * w + (j + bw - i)] = sum / band[j * w + bw];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for (k, yk) in y.iter().enumerate().take(i).skip(i.saturating_sub(bw)) {
                s -= self.band[i * w + (k + bw - i)] * yk;
            }
            y[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for (k, yk) in y.iter().enumerate().take(n.min(i + bw + 1)).skip(i + 1) {
                s -= self.band[k * w + (i + bw - k)] * yk;
            }
            y[i] = s / self.band[i * w + bw];
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b − Sx‖ / ‖b‖`.
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric matrix.
///
/// Stops once `‖b − Sx‖₂ ≤ tol·‖b‖₂`. Any search direction with
/// `dᵀSd ≤ 0` aborts with [`LinalgError::NegativeCurvature`], which is how
/// indefinite step systems are detected.
pub fn pcg(
    s: &SparseOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome, LinalgError> {
    let n = s.nrows();
    if b.len() != n {
        return Err(LinalgError::Dimension { expected: n, got: b.len() });
    }
    let bnorm = norm2(b);
    let mut x = match x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(LinalgError::Dimension { expected: n, got: x0.len() });
            }
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    if bnorm == 0.0 && x0.is_none() {
        return Ok(CgOutcome { solution: x, iterations: 0, relative_residual: 0.0 });
    }
    let scale_ref = if bnorm > 0.0 { bnorm } else { 1.0 };
    let diag = s.diagonal();
    let mut inv_diag = Vec::with_capacity(n);
    for (i, d) in diag.iter().enumerate() {
        if *d <= 0.0 {
            return Err(LinalgError::NegativeCurvature { iteration: 0, curvature: diag[i] });
        }
        inv_diag.push(1.0 / d);
    }
    let mut r = b.to_vec();
    let sx = s.mul_vec(&x);
    axpy(-1.0, &sx, &mut r);
    let mut res = norm2(&r) / scale_ref;
    if res <= tol {
        return Ok(CgOutcome { solution: x, iterations: 0, relative_residual: res });
    }
    let mut zv: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
    let mut d = zv.clone();
    let mut rz = dot(&r, &zv);
    let mut sd = vec![0.0; n];
    for it in 1..=max_iter {
        s.mul_vec_into(&d, &mut sd);
        let curv = dot(&d, &sd);
        if curv <= 0.0 || !curv.is_finite() {
            return Err(LinalgError::NegativeCurvature { iteration: it, curvature: curv });
        }
        let alpha = rz / curv;
        axpy(alpha, &d, &mut x);
        axpy(-alpha, &sd, &mut r);
        res = norm2(&r) / scale_ref;
        if res <= tol {
            // Recompute the true residual to guard against drift in the
            // recursively updated one.
            let mut true_r = b.to_vec();
            axpy(-1.0, &s.mul_vec(&x), &mut true_r);
            let true_res = norm2(&true_r) / scale_ref;
            if true_res <= tol {
                return Ok(CgOutcome { solution: x, iterations: it, relative_residual: true_res });
            }
            r = true_r;
            res = true_res;
        }
        for i in 0..n {
            zv[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &zv);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            d[i] = zv[i] + beta * d[i];
        }
    }
    Err(LinalgError::NoConvergence { iterations: max_iter, residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, d: f64, o: f64) -> SparseOperator {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, d);
            if i + 1 < n {
                t.push(i, i + 1, o);
                t.push(i + 1, i, o);
            }
        }
        t.build(DofSpace::Full, DofSpace::Full)
    }

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 1, 1.5);
        t.push(0, 1, 2.0);
        t.push(1, 0, 3.5);
        let s = t.build(DofSpace::Full, DofSpace::Full);
        assert_eq!(s.get(0, 1), 3.5);
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.asymmetry(), 0.0);
        assert_eq!(s.mul_vec(&[1.0, 2.0]), vec![7.0, 3.5]);
        assert_eq!(s.mul_transpose_vec(&[1.0, 2.0]), vec![7.0, 3.5]);
    }

    #[test]
    fn cholesky_and_cg_agree() {
        let s = tridiag(40, 4.0, -1.0);
        let b: Vec<f64> = (0..40).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let x = BandedCholesky::factor(&s).unwrap().solve(&b);
        assert!(norm2(&sub(&s.mul_vec(&x), &b)) < 1e-12);
        let cg = pcg(&s, &b, None, 1e-13, 400).unwrap();
        assert!(cg.relative_residual <= 1e-13);
        assert!(norm2(&sub(&cg.solution, &x)) < 1e-11);
    }

    #[test]
    fn indefinite_matrices_are_detected() {
        let s = tridiag(10, 1.0, -2.0);
        assert!(matches!(BandedCholesky::factor(&s), Err(LinalgError::NotPositiveDefinite { .. })));
        let b = vec![1.0; 10];
        assert!(matches!(pcg(&s, &b, None, 1e-12, 100), Err(LinalgError::NegativeCurvature { .. })));
    }

    #[test]
    fn cg_on_zero_rhs_returns_zero() {
        let s = tridiag(5, 2.0, -1.0);
        let out = pcg(&s, &[0.0; 5], None, 1e-12, 50).unwrap();
        assert!(out.solution.iter().all(|v| *v == 0.0));
    }
}
