//! Dense Hermitian linear algebra: eigendecomposition, spectral functional
//! calculus, positive/negative parts and trace utilities.

pub mod random;

use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Default cap on the fibre dimension `N` for time-ordering work.
pub const DEFAULT_MAX_DIM: usize = 16;

/// Relative Hermiticity tolerance applied at construction.
const HERMITIAN_RTOL: f64 = 1e-12;

/// Eigenvalues closer than `CLUSTER_RTOL * (1 + ||A||)` form one cluster.
pub const CLUSTER_RTOL: f64 = 1e-9;

/// A real-valued function of one real variable, applied to spectra.
pub trait ScalarFunction {
    fn eval(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64> ScalarFunction for F {
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Largest `|A_ij - conj(A_ji)|`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest singular value of a (possibly non-Hermitian) complex matrix.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0, |acc: f64, &s| acc.max(s))
}

/// Dense `N x N` complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: CMatrix,
}

impl HermitianMatrix {
    /// Validates squareness and Hermiticity; non-Hermitian input is rejected.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Precondition("matrix dimension must be positive".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Precondition("matrix has non-finite entries".into()));
        }
        let residual = hermiticity_residual(&m);
        let tolerance = HERMITIAN_RTOL * (1.0 + max_abs(&m));
        if residual > tolerance {
            return Err(Error::NotHermitian { residual, tolerance });
        }
        Ok(Self { m })
    }

    /// Returns `(M + M^H) / 2`.
    pub fn hermitize(m: &CMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "hermitize needs a square matrix");
        Self {
            m: (m + m.adjoint()).scale(0.5),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            m: CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    C64::new(diag[i], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: CMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: CMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_inner(self) -> CMatrix {
        self.m
    }

    /// `tr A`, which is real for Hermitian `A`.
    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.m)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            m: self.m.map(|z| z * c),
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            m: &self.m + &other.m,
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self {
            m: &self.m - &other.m,
        })
    }

    /// Operator norm of the commutator `[A, B]`.
    pub fn commutator_norm(&self, other: &Self) -> f64 {
        let c = &self.m * &other.m - &other.m * &self.m;
        spectral_norm(&c)
    }

    pub fn eig(&self) -> Result<EigenDecomposition> {
        eig_hermitian(self)
    }

    /// Ascending eigenvalues without eigenvectors.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self.m.clone().symmetric_eigenvalues().iter().copied().collect();
        w.sort_by(f64::total_cmp);
        w
    }

    /// Spectral radius, which is the operator norm for Hermitian matrices.
    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(self.eig()?.spectral_radius())
    }

    /// Smallest eigenvalue not below `-tol * (1 + ||A||)`.
    pub fn is_psd(&self, rtol: f64) -> Result<bool> {
        let e = self.eig()?;
        Ok(e.eigenvalues[0] >= -rtol * (1.0 + e.spectral_radius()))
    }
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Spectral representation `A = sum_k w_k v_k v_k^H` with ascending `w_k`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `eigenvalues`.
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |acc: f64, w| acc.max(w.abs()))
    }

    /// Rank-one projector `v_k v_k^H`.
    pub fn projector(&self, k: usize) -> CMatrix {
        let v = self.vectors.column(k);
        v * v.adjoint()
    }

    /// `sum_k g(w_k) v_k v_k^H` without any domain checks.
    pub fn compose(&self, g: impl Fn(f64) -> f64) -> CMatrix {
        let values: Vec<f64> = self.eigenvalues.iter().map(|&w| g(w)).collect();
        self.compose_values(&values)
    }

    /// `sum_k values[k] v_k v_k^H`.
    pub fn compose_values(&self, values: &[f64]) -> CMatrix {
        assert_eq!(values.len(), self.dim());
        let mut scaled = self.vectors.clone();
        for (k, &gw) in values.iter().enumerate() {
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= gw);
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.compose(|w| w)
    }

    /// Index ranges of eigenvalues that are numerically degenerate.
    pub fn clusters(&self) -> Vec<Range<usize>> {
        let tol = CLUSTER_RTOL * (1.0 + self.spectral_radius());
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.dim() {
            if k == self.dim() || self.eigenvalues[k] - self.eigenvalues[k - 1] > tol {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// Orthogonal projector onto a cluster's eigenspace.
    pub fn cluster_projector(&self, cluster: Range<usize>) -> CMatrix {
        let cols = self.vectors.columns(cluster.start, cluster.len());
        cols * cols.adjoint()
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
pub fn eig_hermitian(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    let n = a.dim();
    let eig = a
        .m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 1000 * n.max(1))
        .ok_or_else(|| Error::EigenNonConvergence {
            dim: n,
            max_entry: a.max_abs(),
            frobenius: a.m.norm(),
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition {
        eigenvalues,
        vectors,
    })
}

/// `f(A) = sum_k f(w_k) P_k`.
pub fn apply_spectral<F: ScalarFunction + ?Sized>(
    f: &F,
    a: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    let e = a.eig()?;
    apply_spectral_with(f, &e)
}

/// Functional calculus on an already computed decomposition.
pub fn apply_spectral_with<F: ScalarFunction + ?Sized>(
    f: &F,
    e: &EigenDecomposition,
) -> Result<HermitianMatrix> {
    let mut values = Vec::with_capacity(e.dim());
    for &w in &e.eigenvalues {
        let value = f.eval(w);
        if !value.is_finite() {
            return Err(Error::SpectralDomain {
                eigenvalue: w,
                value,
            });
        }
        values.push(value);
    }
    let m = e.compose_values(&values);
    Ok(HermitianMatrix::hermitize(&m))
}

/// `A_+ = (|A| + A) / 2`.
pub fn positive_part(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    apply_spectral(&|w: f64| w.max(0.0), a)
}

/// `A_- = (|A| - A) / 2`, so that `A = A_+ - A_-`.
pub fn negative_part(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    apply_spectral(&|w: f64| (-w).max(0.0), a)
}

/// Matrix power by repeated multiplication.
pub fn matrix_power(a: &CMatrix, k: u32) -> CMatrix {
    let mut out = CMatrix::identity(a.nrows(), a.ncols());
    let mut base = a.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    out
}

/// Tolerance below which a PSD input's eigenvalue is treated as rounding.
pub(crate) const PSD_RTOL: f64 = 1e-12;

pub(crate) fn require_psd(w: &HermitianMatrix, label: &str) -> Result<EigenDecomposition> {
    let e = w.eig()?;
    let floor = -PSD_RTOL * (1.0 + e.spectral_radius());
    if e.eigenvalues[0] < floor {
        return Err(Error::Precondition(format!(
            "{label} has negative eigenvalue {:.6e}",
            e.eigenvalues[0]
        )));
    }
    Ok(e)
}

/// Both sides of Hölder's inequality for traces:
/// `Re tr(W_1^{j_1} ... W_n^{j_n}) <= prod_i (tr W_i^k)^{j_i / k}`.
pub fn holder_trace_product(ws: &[HermitianMatrix], js: &[u32]) -> Result<(f64, f64)> {
    if ws.is_empty() {
        return Err(Error::Precondition("need at least one matrix".into()));
    }
    check_dims(ws.len(), js.len())?;
    let n = ws[0].dim();
    let k: u32 = js.iter().sum();
    if k == 0 {
        return Err(Error::Precondition("exponents must sum to k >= 1".into()));
    }
    let mut prod = CMatrix::identity(n, n);
    let mut rhs = 1.0;
    for (i, (w, &j)) in ws.iter().zip(js).enumerate() {
        check_dims(n, w.dim())?;
        let e = require_psd(w, &format!("W_{}", i + 1))?;
        prod *= matrix_power(w.as_matrix(), j);
        let tr_k: f64 = e.eigenvalues.iter().map(|&x| x.max(0.0).powi(k as i32)).sum();
        rhs *= tr_k.powf(j as f64 / k as f64);
    }
    Ok((prod.trace().re, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::random::{random_hermitian, random_psd, seeded};

    fn diag(v: &[f64]) -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(v)
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            HermitianMatrix::new(m.clone()),
            Err(Error::NotHermitian { .. })
        ));
        let h = HermitianMatrix::hermitize(&m);
        assert_eq!(h.as_matrix()[(0, 1)], C64::new(0.5, 0.0));
        assert_eq!(h.as_matrix()[(1, 0)], C64::new(0.5, 0.0));
    }

    #[test]
    fn identity_spectrum() {
        let e = HermitianMatrix::identity(3).eig().unwrap();
        assert_eq!(e.eigenvalues.len(), 3);
        for &w in &e.eigenvalues {
            assert!((w - 1.0).abs() < 1e-14);
        }
        let sum: CMatrix = (0..3).map(|k| e.projector(k)).fold(CMatrix::zeros(3, 3), |a, b| a + b);
        assert!(max_abs(&(sum - CMatrix::identity(3, 3))) < 1e-12);
        assert_eq!(e.clusters(), vec![0..3]);
    }

    #[test]
    fn diagonal_spectrum() {
        let e = diag(&[2.0, -1.0]).eig().unwrap();
        assert_eq!(e.eigenvalues, vec![-1.0, 2.0]);
        let p0 = e.projector(0);
        assert!((p0[(1, 1)].re - 1.0).abs() < 1e-14);
        assert!(p0[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn random_reconstruction_and_projectors() {
        let mut rng = seeded(7);
        let a = random_hermitian(&mut rng, 4, 1.0);
        let e = a.eig().unwrap();
        let radius = e.spectral_radius();
        let err = spectral_norm(&(e.reconstruct() - a.as_matrix()));
        assert!(err < 1e-10 * (1.0 + radius), "reconstruction {err}");
        for k in 0..4 {
            for l in 0..4 {
                let pkpl = e.projector(k) * e.projector(l);
                let expect = if k == l { e.projector(k) } else { CMatrix::zeros(4, 4) };
                assert!(max_abs(&(pkpl - expect)) < 1e-10);
            }
        }
        assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn spectral_identity_and_square() {
        let mut rng = seeded(11);
        let a = random_hermitian(&mut rng, 3, 2.0);
        let fa = apply_spectral(&|x: f64| x, &a).unwrap();
        assert!(max_abs(&(fa.as_matrix() - a.as_matrix())) < 1e-12);

        let sq = apply_spectral(&|x: f64| x * x, &diag(&[1.0, -2.0])).unwrap();
        assert!(max_abs(&(sq.as_matrix() - diag(&[1.0, 4.0]).as_matrix())) < 1e-13);
    }

    #[test]
    fn exponential_matches_power_series() {
        let mut rng = seeded(3);
        let a = random_hermitian(&mut rng, 3, 1.0);
        let ea = apply_spectral(&f64::exp, &a).unwrap();
        // scaling and squaring around a truncated Taylor series
        let s = 4;
        let scaled = a.as_matrix().map(|z| z / f64::from(1u32 << s));
        let mut term = CMatrix::identity(3, 3);
        let mut sum = term.clone();
        for j in 1..30 {
            term = &term * &scaled / C64::new(j as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        assert!(max_abs(&(sum - ea.as_matrix())) < 1e-9);
        // commutes with A
        let c = ea.as_matrix() * a.as_matrix() - a.as_matrix() * ea.as_matrix();
        assert!(max_abs(&c) < 1e-10);
    }

    #[test]
    fn spectral_domain_error_names_eigenvalue() {
        let err = apply_spectral(&|x: f64| 1.0 / x, &diag(&[0.0, 1.0])).unwrap_err();
        match err {
            Error::SpectralDomain { eigenvalue, .. } => assert_eq!(eigenvalue, 0.0),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn positive_part_cases() {
        let p = positive_part(&diag(&[3.0, -5.0])).unwrap();
        assert!(max_abs(&(p.as_matrix() - diag(&[3.0, 0.0]).as_matrix())) < 1e-14);

        let mut rng = seeded(5);
        let w = random_psd(&mut rng, 3, 1.0);
        let pw = positive_part(&w).unwrap();
        assert!(max_abs(&(pw.as_matrix() - w.as_matrix())) < 1e-12);

        let a = random_hermitian(&mut rng, 4, 1.0);
        let ap = positive_part(&a).unwrap();
        let am = negative_part(&a).unwrap();
        assert!((ap.as_matrix() * am.as_matrix()).trace().norm() < 1e-10);
        assert!(max_abs(&(ap.as_matrix() - am.as_matrix() - a.as_matrix())) < 1e-12);
        assert!(ap.is_psd(1e-12).unwrap());
    }

    #[test]
    fn holder_simple_cases() {
        let mut rng = seeded(9);
        let w = random_psd(&mut rng, 3, 1.0);
        let (lhs, rhs) = holder_trace_product(std::slice::from_ref(&w), &[3]).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs));

        let id = HermitianMatrix::identity(2);
        let (lhs, rhs) = holder_trace_product(&[id.clone(), id], &[1, 1]).unwrap();
        assert!((lhs - 2.0).abs() < 1e-14 && (rhs - 2.0).abs() < 1e-14);
    }

    #[test]
    fn holder_rejects_indefinite() {
        let err = holder_trace_product(&[diag(&[1.0, -1.0])], &[2]).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn matrix_power_matches_repeated_product() {
        let mut rng = seeded(1);
        let a = random_hermitian(&mut rng, 3, 1.0);
        let m = a.as_matrix();
        let p5 = matrix_power(m, 5);
        let direct = m * m * m * m * m;
        assert!(max_abs(&(p5 - direct)) < 1e-12);
        assert_eq!(matrix_power(m, 0), CMatrix::identity(3, 3));
    }
}
