//! The Trotter approximation `T_n(t) = V^{1/2} (e^{-tL/n} e^{-t alpha V/n})^n V^{1/2}`
//! of `V^{1/2} e^{-t(L + alpha V)} V^{1/2}`, and the resolvent
//! `V^{1/2} (L + alpha V)^{-1} V^{1/2}` it integrates to.
//!
//! Because `V` commutes with `e^{-t alpha V/n}`, `tr T_n(t)` equals the trace of
//! the symmetric splitting `V (E_V^{1/2} E_L E_V^{1/2})^n`, so the traced error
//! decays like `n^{-2}` even though the operator error is only `O(1/n)`.

use std::cell::RefCell;

use nalgebra::{DMatrix, SymmetricEigen};

use super::bs::birman_schwinger;
use super::dense_budget;
use super::operator::scalar_laplacian_dense;
use super::potential::MatrixPotential;
use crate::error::{Error, Result};
use crate::matcore::{apply_spectral, matrix_power, CMatrix, HermitianMatrix, C64};
use crate::transforms::quad::{integrate_to_infinity, QuadOptions, Quadrature};

/// Dense machinery for one potential and coupling `alpha`.
///
/// Holds the Laplacian eigenbasis, the eigenbasis of `L + alpha V` and the
/// last exponential `e^{-sL}`. Not shared across threads.
pub struct TrotterWorkspace {
    v: MatrixPotential,
    alpha: f64,
    lap: SymmetricEigen<f64, nalgebra::Dyn>,
    /// Eigenvalues of `L + alpha V` and `<u_k, V u_k>` for its eigenvectors.
    full_values: Vec<f64>,
    full_weights: Vec<f64>,
    lap_cache: RefCell<Option<(u64, DMatrix<f64>)>>,
}

impl TrotterWorkspace {
    pub fn new(v: &MatrixPotential, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        let dim = v.dim();
        let limit = dense_budget();
        if dim > limit {
            return Err(Error::BudgetExceeded {
                what: "dense Trotter workspace",
                required: dim as u128,
                limit: limit as u128,
                hint: "raise CLRLAB_DENSE_BUDGET or use a smaller grid",
            });
        }
        // also rejects potentials that are not PSD
        v.sqrt_blocks()?;
        let lap = SymmetricEigen::new(scalar_laplacian_dense(&v.grid)?);
        let h = v.scale(-alpha).hamiltonian()?;
        let e = HermitianMatrix::hermitize(&h.to_dense()).eig()?;
        let n = v.fiber_dim();
        let full_weights = (0..dim)
            .map(|k| {
                let u = e.vectors.column(k);
                let mut w = C64::default();
                for s in v.support() {
                    let vs = v.site(s).as_matrix();
                    for i in 0..n {
                        for j in 0..n {
                            w += u[s * n + i].conj() * vs[(i, j)] * u[s * n + j];
                        }
                    }
                }
                w.re
            })
            .collect();
        Ok(Self {
            v: v.clone(),
            alpha,
            lap,
            full_values: e.eigenvalues,
            full_weights,
            lap_cache: RefCell::new(None),
        })
    }

    pub fn potential(&self) -> &MatrixPotential {
        &self.v
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `e^{-sL}` for the scalar Laplacian.
    fn exp_laplacian(&self, s: f64) -> DMatrix<f64> {
        let key = s.to_bits();
        if let Some((k, m)) = self.lap_cache.borrow().as_ref() {
            if *k == key {
                return m.clone();
            }
        }
        let u = &self.lap.eigenvectors;
        let decay = self.lap.eigenvalues.map(|l| (-s * l).exp());
        let m = u * DMatrix::from_diagonal(&decay) * u.transpose();
        *self.lap_cache.borrow_mut() = Some((key, m.clone()));
        m
    }

    /// One Trotter step `e^{-sL} e^{-s alpha V}` on `sites x C^N`.
    pub fn step(&self, s: f64) -> Result<CMatrix> {
        let el = self.exp_laplacian(s);
        let n = self.v.fiber_dim();
        let ev = self
            .v
            .values()
            .iter()
            .map(|x| apply_spectral(&|w: f64| (-s * self.alpha * w).exp(), x))
            .collect::<Result<Vec<_>>>()?;
        let dim = self.v.dim();
        Ok(CMatrix::from_fn(dim, dim, |r, c| {
            let (x, i) = (r / n, r % n);
            let (y, j) = (c / n, c % n);
            ev[y].as_matrix()[(i, j)] * el[(x, y)]
        }))
    }

    /// `tr T_n(t)`.
    pub fn trotter_trace(&self, t: f64, n: u32) -> Result<f64> {
        check_time(t)?;
        if n == 0 {
            return Err(Error::Domain("Trotter steps must be positive".into()));
        }
        let p = matrix_power(&self.step(t / f64::from(n))?, n);
        Ok(self.sandwich_trace(&p))
    }

    /// `Re tr[V^{1/2} P V^{1/2}] = Re tr[V P]`, summed over the support.
    fn sandwich_trace(&self, p: &CMatrix) -> f64 {
        let n = self.v.fiber_dim();
        let mut tr = C64::default();
        for s in self.v.support() {
            let vs = self.v.site(s).as_matrix();
            for i in 0..n {
                for j in 0..n {
                    tr += vs[(i, j)] * p[(s * n + j, s * n + i)];
                }
            }
        }
        tr.re
    }

    /// `tr[V^{1/2} e^{-t(L + alpha V)} V^{1/2}]` from the cached eigenbasis.
    pub fn exact_trace(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("time must be non-negative, got {t}")));
        }
        Ok(self
            .full_values
            .iter()
            .zip(&self.full_weights)
            .map(|(&mu, &w)| w * (-t * mu).exp())
            .sum())
    }

    /// `|tr T_n(t) - exact|` for each `n`.
    pub fn trotter_errors(&self, t: f64, ns: &[u32]) -> Result<Vec<(u32, f64)>> {
        let exact = self.exact_trace(t)?;
        ns.iter()
            .map(|&n| Ok((n, (self.trotter_trace(t, n)? - exact).abs())))
            .collect()
    }

    /// `int_0^inf tr T_n(t) dt` by adaptive quadrature.
    pub fn trotter_time_integral(&self, n: u32, rel_tol: f64) -> Result<Quadrature> {
        let mut failure = None;
        let q = integrate_to_infinity(
            |t| match self.trotter_trace(t.max(f64::MIN_POSITIVE), n) {
                Ok(x) => x,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            },
            0.0,
            QuadOptions {
                abs_tol: 0.0,
                rel_tol,
                max_intervals: 2000,
            },
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(q),
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    Ok(())
}

/// `tr T_n(t)` for a one-off evaluation.
pub fn trotter_trace(v: &MatrixPotential, alpha: f64, t: f64, n: u32) -> Result<f64> {
    TrotterWorkspace::new(v, alpha)?.trotter_trace(t, n)
}

/// `tr[V^{1/2} e^{-t(L + alpha V)} V^{1/2}]`.
pub fn exact_trace(v: &MatrixPotential, alpha: f64, t: f64) -> Result<f64> {
    TrotterWorkspace::new(v, alpha)?.exact_trace(t)
}

/// `tr[V^{1/2} (L + alpha V)^{-1} V^{1/2}]` by a Cholesky solve.
pub fn resolvent_trace(v: &MatrixPotential, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let support = v.support();
    if support.is_empty() {
        return Ok(0.0);
    }
    let dim = v.dim();
    let limit = dense_budget();
    if dim > limit {
        return Err(Error::BudgetExceeded {
            what: "dense resolvent",
            required: dim as u128,
            limit: limit as u128,
            hint: "raise CLRLAB_DENSE_BUDGET or use a smaller grid",
        });
    }
    let roots = v.sqrt_blocks()?;
    let h = v.scale(-alpha).hamiltonian()?.to_dense();
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::Precondition("L + alpha V is not positive definite".into()))?;
    let n = v.fiber_dim();
    let mut rhs = CMatrix::zeros(dim, support.len() * n);
    for (c, &s) in support.iter().enumerate() {
        let r = roots[s].as_matrix();
        for i in 0..n {
            for j in 0..n {
                rhs[(s * n + i, c * n + j)] = r[(i, j)];
            }
        }
    }
    let x = chol.solve(&rhs);
    // tr[R^H X] over the stacked columns
    Ok(rhs.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum())
}

/// `sum_k lambda_k / (1 + alpha lambda_k)` over the eigenvalues of `K`.
pub fn resolvent_bs_side(v: &MatrixPotential, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let k = birman_schwinger(v)?;
    Ok(k.eigenvalues()?
        .iter()
        .map(|&l| {
            let l = l.max(0.0);
            l / (1.0 + alpha * l)
        })
        .sum())
}

/// Least-squares slope of `ln err` against `ln n`.
pub fn loglog_slope(points: &[(u32, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| *e > 0.0 && e.is_finite())
        .map(|&(n, e)| (f64::from(n).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Precondition("need two positive errors to fit a slope".into()));
    }
    let m = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Trotter step counts `4, 8, ..., 256`.
pub const CONVERGENCE_STEPS: [u32; 7] = [4, 8, 16, 32, 64, 128, 256];
