//! Hermitian operators on `sites x C^N`, the finite-difference Laplacian and
//! negative-eigenvalue counting by inertia.

use nalgebra::DMatrix;

use super::grid::{Boundary, GridSpec};
use super::{dense_budget, MAX_SPARSE_DIM};
use crate::error::{Error, Result};
use crate::matcore::{hermiticity_residual, CMatrix, HermitianMatrix, C64};

/// Relative zero band for eigenvalue counting: eigenvalues below
/// `-ZERO_RTOL * ||H||` count as negative.
pub const ZERO_RTOL: f64 = 1e-10;

/// Row-compressed Hermitian matrix storing both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    /// `rows[i]` holds `(j, H_ij)` sorted by `j`.
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseHermitian {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    /// Adds `value` at `(i, j)` and its conjugate at `(j, i)`.
    pub fn add_hermitian_pair(&mut self, i: usize, j: usize, value: C64) {
        if i == j {
            self.add_entry(i, i, C64::new(value.re, 0.0));
        } else {
            self.add_entry(i, j, value);
            self.add_entry(j, i, value.conj());
        }
    }

    fn add_entry(&mut self, i: usize, j: usize, value: C64) {
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(pos) => row[pos].1 += value,
            Err(pos) => row.insert(pos, (j, value)),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |&(c, _)| c)
            .map(|pos| row[pos].1)
            .unwrap_or_default()
    }

    pub fn row(&self, i: usize) -> &[(usize, C64)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn half_bandwidth(&self) -> usize {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    Sparse(SparseHermitian),
    Dense(CMatrix),
}

/// Hermitian operator on `sites x C^N` (index `site * N + component`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    dim: usize,
    storage: Storage,
}

impl DiscreteOperator {
    pub fn from_sparse(m: SparseHermitian) -> Self {
        Self {
            dim: m.dim,
            storage: Storage::Sparse(m),
        }
    }

    /// Wraps a dense matrix after checking Hermiticity.
    pub fn from_dense(m: CMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(m)?;
        Ok(Self {
            dim: h.dim(),
            storage: Storage::Dense(h.into_inner()),
        })
    }

    pub fn empty() -> Self {
        Self {
            dim: 0,
            storage: Storage::Dense(CMatrix::zeros(0, 0)),
        }
    }

    /// Diagonal operator with real entries.
    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = SparseHermitian::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.add_hermitian_pair(i, i, C64::new(v, 0.0));
        }
        Self::from_sparse(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match &self.storage {
            Storage::Sparse(s) => s.get(i, j),
            Storage::Dense(d) => d[(i, j)],
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Sparse(s) => {
                let mut d = CMatrix::zeros(self.dim, self.dim);
                for (i, row) in s.rows.iter().enumerate() {
                    for &(j, v) in row {
                        d[(i, j)] = v;
                    }
                }
                d
            }
        }
    }

    /// Largest absolute row sum, an upper bound on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        match &self.storage {
            Storage::Sparse(s) => s
                .rows
                .iter()
                .map(|row| row.iter().map(|(_, v)| v.norm()).sum::<f64>())
                .fold(0.0, f64::max),
            Storage::Dense(d) => d
                .row_iter()
                .map(|row| row.iter().map(|v| v.norm()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }

    pub fn hermiticity_residual(&self) -> f64 {
        hermiticity_residual(&self.to_dense())
    }

    pub fn half_bandwidth(&self) -> usize {
        match &self.storage {
            Storage::Sparse(s) => s.half_bandwidth(),
            Storage::Dense(_) => self.dim.saturating_sub(1),
        }
    }

    fn check_dense_budget(&self, what: &'static str) -> Result<()> {
        let limit = dense_budget();
        if self.dim > limit {
            return Err(Error::BudgetExceeded {
                what,
                required: self.dim as u128,
                limit: limit as u128,
                hint: "raise CLRLAB_DENSE_BUDGET or use a smaller grid",
            });
        }
        Ok(())
    }

    /// All eigenvalues in ascending order (dense path, budget-checked).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if self.dim == 0 {
            return Ok(Vec::new());
        }
        self.check_dense_budget("dense eigendecomposition")?;
        Ok(HermitianMatrix::hermitize(&self.to_dense()).eigenvalues())
    }

    /// `self - blockdiag(blocks)` where each block is `N x N`.
    pub fn minus_block_diagonal(&self, blocks: &[HermitianMatrix]) -> Result<Self> {
        let n = blocks.first().map_or(1, HermitianMatrix::dim);
        if blocks.len() * n != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: blocks.len() * n,
            });
        }
        let mut out = self.clone();
        for (site, b) in blocks.iter().enumerate() {
            let base = site * n;
            for i in 0..n {
                for j in i..n {
                    let v = -b.as_matrix()[(i, j)];
                    if v != C64::default() {
                        out.add_pair(base + i, base + j, v);
                    }
                }
            }
        }
        Ok(out)
    }

    fn add_pair(&mut self, i: usize, j: usize, v: C64) {
        match &mut self.storage {
            Storage::Sparse(s) => s.add_hermitian_pair(i, j, v),
            Storage::Dense(d) => {
                if i == j {
                    d[(i, i)] += C64::new(v.re, 0.0);
                } else {
                    d[(i, j)] += v;
                    d[(j, i)] += v.conj();
                }
            }
        }
    }
}

/// `-Δ` with the `2d + 1`-point stencil, acting as the identity on the `C^N` fibre.
pub fn build_laplacian(grid: &GridSpec, fiber: usize) -> Result<DiscreteOperator> {
    grid.validate()?;
    if fiber == 0 {
        return Err(Error::Config("fibre dimension must be positive".into()));
    }
    let dim = grid.sites() * fiber;
    if dim > MAX_SPARSE_DIM {
        return Err(Error::BudgetExceeded {
            what: "sparse operator dimension",
            required: dim as u128,
            limit: MAX_SPARSE_DIM as u128,
            hint: "use a coarser grid",
        });
    }
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let strides = grid.strides();
    let mut m = SparseHermitian::zeros(dim);
    for site in 0..grid.sites() {
        let coords = grid.site_coords(site);
        let mut diag = 0.0;
        for axis in 0..grid.d {
            diag += 2.0 * inv_h2;
            let len = grid.points[axis];
            let c = coords[axis];
            // forward neighbour only, so that each bond is added once
            let forward = if c + 1 < len {
                Some(site + strides[axis])
            } else if grid.boundary == Boundary::Periodic {
                Some(site + strides[axis] - len * strides[axis])
            } else {
                None
            };
            if let Some(nb) = forward {
                for k in 0..fiber {
                    let (i, j) = (site * fiber + k, nb * fiber + k);
                    let v = C64::new(-inv_h2, 0.0);
                    if i == j {
                        // one-point periodic axis: the bond wraps onto itself
                        m.add_hermitian_pair(i, i, v + v);
                    } else {
                        m.add_hermitian_pair(i, j, v);
                    }
                }
            }
        }
        for k in 0..fiber {
            m.add_hermitian_pair(site * fiber + k, site * fiber + k, C64::new(diag, 0.0));
        }
    }
    Ok(DiscreteOperator::from_sparse(m))
}

/// Real dense matrix of the scalar (`N = 1`) Laplacian.
pub fn scalar_laplacian_dense(grid: &GridSpec) -> Result<DMatrix<f64>> {
    let l = build_laplacian(grid, 1)?;
    let n = l.dim();
    Ok(DMatrix::from_fn(n, n, |i, j| l.get(i, j).re))
}

/// Counts of negative, zero and positive eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

/// Pivot-free banded `LDL^H` factorisation of `H + shift I`; `None` on
/// breakdown or excessive element growth.
pub fn ldl_inertia(op: &DiscreteOperator, shift: f64) -> Option<Inertia> {
    let n = op.dim();
    if n == 0 {
        return Some(Inertia {
            negative: 0,
            zero: 0,
            positive: 0,
        });
    }
    let b = op.half_bandwidth();
    let scale = op.norm_bound() + shift.abs();
    let pivot_floor = 1e-14 * scale.max(f64::MIN_POSITIVE);
    let growth_cap = 1e10 * scale.max(1.0);
    // band[i][b - (i - j)] = L_ij for j in [i - b, i)
    let width = b + 1;
    let mut band = vec![C64::default(); n * width];
    let mut d = vec![0.0f64; n];
    // scratch: w[k] = L_ik d_k for the current row
    let mut w = vec![C64::default(); width];
    let mut inertia = Inertia {
        negative: 0,
        zero: 0,
        positive: 0,
    };
    for i in 0..n {
        let lo = i.saturating_sub(b);
        for j in lo..i {
            let mut s = op.get(i, j);
            let kmin = lo.max(j.saturating_sub(b));
            for k in kmin..j {
                s -= w[k - lo] * band[j * width + (b - (j - k))].conj();
            }
            let lij = s / d[j];
            band[i * width + (b - (i - j))] = lij;
            w[j - lo] = lij * d[j];
        }
        let mut di = op.get(i, i).re + shift;
        for k in lo..i {
            di -= (band[i * width + (b - (i - k))] * w[k - lo].conj()).re;
        }
        if di.abs() <= pivot_floor || !di.is_finite() {
            return None;
        }
        for k in lo..i {
            let lik = band[i * width + (b - (i - k))];
            if lik.norm_sqr() * d[k].abs() > growth_cap {
                return None;
            }
        }
        d[i] = di;
        if di < 0.0 {
            inertia.negative += 1;
        } else {
            inertia.positive += 1;
        }
    }
    Some(inertia)
}

fn zero_tolerance(op: &DiscreteOperator) -> f64 {
    ZERO_RTOL * op.norm_bound()
}

/// Negative-eigenvalue count by `LDL^H` inertia of `H + tol I`.
pub fn count_negative_inertia(op: &DiscreteOperator) -> Option<usize> {
    ldl_inertia(op, zero_tolerance(op)).map(|i| i.negative)
}

/// Negative-eigenvalue count from dense eigenvalues.
pub fn count_negative_dense(op: &DiscreteOperator) -> Result<usize> {
    let tol = zero_tolerance(op);
    Ok(op.eigenvalues()?.iter().filter(|&&e| e < -tol).count())
}

/// Number of eigenvalues below `-1e-10 ||H||`; inertia first, dense fallback.
pub fn count_negative(op: &DiscreteOperator) -> Result<usize> {
    match count_negative_inertia(op) {
        Some(c) => Ok(c),
        None => count_negative_dense(op),
    }
}

/// `sum_{e < 0} |e|^gamma` over eigenvalues of `H`.
pub fn riesz_mean(op: &DiscreteOperator, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    let tol = zero_tolerance(op);
    Ok(op
        .eigenvalues()?
        .iter()
        .filter(|&&e| e < -tol)
        .map(|e| e.abs().powf(gamma))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::random::{random_hermitian, seeded};

    #[test]
    fn three_point_dirichlet() {
        let g = GridSpec::cube(1, 3, 1.0).unwrap();
        let l = build_laplacian(&g, 1).unwrap();
        let d = l.to_dense();
        assert_eq!(d[(0, 0)].re, 2.0);
        assert_eq!(d[(0, 1)].re, -1.0);
        assert_eq!(d[(0, 2)].re, 0.0);
        let e = l.eigenvalues().unwrap();
        let s2 = 2f64.sqrt();
        for (got, want) in e.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert!((got - want).abs() < 1e-13);
        }
    }

    #[test]
    fn periodic_kernel_contains_constants() {
        for m in [1usize, 2, 5] {
            let g = GridSpec::new(vec![m], 0.7, Boundary::Periodic).unwrap();
            let l = build_laplacian(&g, 2).unwrap();
            let d = l.to_dense();
            for i in 0..d.nrows() {
                let row_sum: C64 = d.row(i).iter().sum();
                assert!(row_sum.norm() < 1e-12, "m={m}");
            }
        }
    }

    #[test]
    fn dirichlet_tensor_sum_and_lower_bound() {
        let g1 = GridSpec::cube(1, 4, 0.5).unwrap();
        let e1 = build_laplacian(&g1, 1).unwrap().eigenvalues().unwrap();
        let g2 = GridSpec::cube(2, 4, 0.5).unwrap();
        let e2 = build_laplacian(&g2, 1).unwrap().eigenvalues().unwrap();
        let mut sums: Vec<f64> = e1.iter().flat_map(|a| e1.iter().map(move |b| a + b)).collect();
        sums.sort_by(f64::total_cmp);
        for (a, b) in e2.iter().zip(&sums) {
            assert!((a - b).abs() < 1e-11);
        }
        let h: f64 = 0.5;
        let bound = 2.0 * 4.0 / (h * h) * (std::f64::consts::PI / 10.0).sin().powi(2);
        assert!(e2[0] >= bound - 1e-11 && e2[0] > 0.0);
    }

    #[test]
    fn laplacian_is_identity_on_fibre() {
        let g = GridSpec::cube(2, 3, 1.0).unwrap();
        let l3 = build_laplacian(&g, 3).unwrap();
        let l1 = build_laplacian(&g, 1).unwrap();
        for s in 0..g.sites() {
            for t in 0..g.sites() {
                for a in 0..3 {
                    for b in 0..3 {
                        let want = if a == b { l1.get(s, t) } else { C64::default() };
                        assert_eq!(l3.get(3 * s + a, 3 * t + b), want);
                    }
                }
            }
        }
        assert_eq!(l3.hermiticity_residual(), 0.0);
    }

    #[test]
    fn count_simple_cases() {
        let g = GridSpec::cube(2, 4, 1.0).unwrap();
        let l = build_laplacian(&g, 2).unwrap();
        assert_eq!(count_negative(&l).unwrap(), 0);
        let d = DiscreteOperator::diagonal(&[-1.0, -2.0, 3.0]);
        assert_eq!(count_negative(&d).unwrap(), 2);
        assert_eq!(count_negative_dense(&d).unwrap(), 2);
    }

    #[test]
    fn inertia_matches_dense_on_random_shifted_laplacians() {
        let mut rng = seeded(99);
        let g = GridSpec::cube(2, 4, 1.0).unwrap();
        let l = build_laplacian(&g, 2).unwrap();
        for _ in 0..20 {
            let blocks: Vec<_> = (0..g.sites())
                .map(|_| random_hermitian(&mut rng, 2, 4.0))
                .collect();
            let h = l.minus_block_diagonal(&blocks).unwrap();
            let dense = count_negative_dense(&h).unwrap();
            if let Some(inertia) = count_negative_inertia(&h) {
                assert_eq!(inertia, dense);
            }
            assert_eq!(count_negative(&h).unwrap(), dense);
        }
    }

    #[test]
    fn inertia_breaks_down_on_zero_pivot() {
        // [[0, 1], [1, 0]] has a zero leading pivot but inertia (1, 0, 1)
        let mut m = SparseHermitian::zeros(2);
        m.add_hermitian_pair(0, 1, C64::new(1.0, 0.0));
        let op = DiscreteOperator::from_sparse(m);
        assert!(ldl_inertia(&op, 0.0).is_none());
        assert_eq!(count_negative(&op).unwrap(), 1);
    }

    #[test]
    fn riesz_means() {
        let d = DiscreteOperator::diagonal(&[-2.0, -1.0, 5.0]);
        assert!((riesz_mean(&d, 1.0).unwrap() - 3.0).abs() < 1e-14);
        let small = riesz_mean(&d, 1e-6).unwrap();
        assert!((small - 2.0).abs() < 1e-4 * 2.0);
        assert!(riesz_mean(&d, 0.0).is_err());
    }
}
