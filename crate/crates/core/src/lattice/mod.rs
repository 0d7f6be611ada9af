//! Finite-dimensional realisations on grids: the discrete Laplacian, matrix
//! Schrödinger operators `L - V`, eigenvalue counting, the Birman–Schwinger
//! operator, the heat kernel and the Trotter trace approximation.
//!
//! Identities that hold exactly in finite dimension (Birman–Schwinger counting,
//! the resolvent identity) are tested as such; comparisons with continuum
//! bounds are monitors only.
//!
//! The free heat kernel is `(4 pi t)^{-d/2} exp(-|x - y|^2 / (4t))`. A version
//! with `+` in the exponent circulates but is not integrable.

pub mod bs;
pub mod grid;
pub mod operator;
pub mod potential;
pub mod trotter;

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matcore::ScalarFunction;
use crate::transforms::quad::{integrate_real_line, QuadOptions};
use crate::transforms::{classical_constant, corollary_constant};

pub use bs::{birman_schwinger, bs_bound, count_above_one, BsCount};
pub use grid::{Boundary, GridSpec};
pub use operator::{
    build_laplacian, count_negative, count_negative_dense, count_negative_inertia, riesz_mean,
    DiscreteOperator,
};
pub use potential::MatrixPotential;
pub use trotter::{exact_trace, resolvent_trace, trotter_trace, TrotterWorkspace};

/// Default cap on `sites * N` for dense paths.
pub const DEFAULT_DENSE_BUDGET: usize = 4096;

/// Environment variable overriding [`DEFAULT_DENSE_BUDGET`].
pub const DENSE_BUDGET_ENV: &str = "CLRLAB_DENSE_BUDGET";

/// Cap on `sites * N` for sparse construction.
pub const MAX_SPARSE_DIM: usize = 1 << 22;

/// Dense-dimension cap, read from `CLRLAB_DENSE_BUDGET` when set and valid.
pub fn dense_budget() -> usize {
    std::env::var(DENSE_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&v: &usize| v > 0)
        .unwrap_or(DEFAULT_DENSE_BUDGET)
}

/// `(4 pi t)^{-d/2} exp(-|x - y|^2 / (4t))`.
pub fn heat_kernel_free(x: &[f64], y: &[f64], t: f64, d: usize) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if x.len() != d { x.len() } else { y.len() },
        });
    }
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((4.0 * PI * t).powf(-(d as f64) / 2.0) * (-r2 / (4.0 * t)).exp())
}

/// `R L^cl_{0,d} h^d sum_x tr V_+(x)^{d/2}`.
pub fn clr_rhs(v: &MatrixPotential, r: f64) -> Result<f64> {
    let d = v.grid.d;
    Ok(r * classical_constant(0.0, d as u32)? * v.moment(d as f64 / 2.0)?)
}

/// `(4 pi t)^{-d/2} h^d sum_x tr f(t V(x))`.
pub fn heat_diagonal_step<F: ScalarFunction + ?Sized>(
    v: &MatrixPotential,
    f: &F,
    t: f64,
) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("heat diagonal needs t > 0, got {t}")));
    }
    let eigs = v.site_eigenvalues();
    heat_diagonal_from_eigs(&eigs, v.grid.d, v.grid.cell_volume(), f, t)
}

fn heat_diagonal_from_eigs<F: ScalarFunction + ?Sized>(
    eigs: &[f64],
    d: usize,
    cell: f64,
    f: &F,
    t: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for &e in eigs {
        if e < 0.0 {
            return Err(Error::Precondition(format!(
                "potential must be PSD at every site, found eigenvalue {e:.3e}"
            )));
        }
        sum += f.eval(t * e);
    }
    Ok((4.0 * PI * t).powf(-(d as f64) / 2.0) * cell * sum)
}

/// `int_0^inf heat_diagonal_step(V, f, t) dt / t`, by quadrature in `ln t`.
pub fn heat_diagonal_integral<F: ScalarFunction + ?Sized>(v: &MatrixPotential, f: &F) -> Result<f64> {
    let eigs: Vec<f64> = v
        .site_eigenvalues()
        .into_iter()
        .map(|e| if e.abs() <= 1e-12 * (1.0 + v.max_norm()) { 0.0 } else { e })
        .collect();
    if eigs.iter().all(|&e| e == 0.0) {
        // f(0) = 0 is required for convergence; the integrand vanishes
        return Ok(0.0);
    }
    let (d, cell) = (v.grid.d, v.grid.cell_volume());
    let mut failure = None;
    let q = integrate_real_line(
        |u| {
            if u.abs() > 150.0 {
                return 0.0;
            }
            match heat_diagonal_from_eigs(&eigs, d, cell, f, u.exp()) {
                Ok(x) if x.is_finite() => x,
                Ok(_) => 0.0,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        QuadOptions::with_tol(1e-14, 1e-10),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.value)
}

/// `(4 pi)^{-d/2} C(f, d) h^d sum_x tr V(x)^{d/2}`, the closed form of
/// [`heat_diagonal_integral`] by the scaling `t -> s / v`.
pub fn heat_diagonal_closed_form<F: ScalarFunction + ?Sized>(
    v: &MatrixPotential,
    f: &F,
) -> Result<f64> {
    let d = v.grid.d;
    let c = corollary_constant(f, d as u32)?;
    Ok((4.0 * PI).powf(-(d as f64) / 2.0) * c * v.moment(d as f64 / 2.0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::HermitianMatrix;
    use crate::transforms::quad::integrate_real_line;
    use crate::transforms::f_a_eval;

    #[test]
    fn heat_kernel_normalised_and_semigroup() {
        let x = [0.4];
        let opts = QuadOptions::with_tol(1e-13, 1e-12);
        let mass = integrate_real_line(|y| heat_kernel_free(&x, &[y], 0.3, 1).unwrap(), opts).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-8);
        let (s, t, z) = (0.2, 0.5, [-0.7]);
        let conv = integrate_real_line(
            |y| heat_kernel_free(&x, &[y], s, 1).unwrap() * heat_kernel_free(&[y], &z, t, 1).unwrap(),
            opts,
        )
        .unwrap();
        let direct = heat_kernel_free(&x, &z, s + t, 1).unwrap();
        assert!((conv.value - direct).abs() < 1e-8);
        for d in 1..=3 {
            let p = vec![0.3; d];
            let k = heat_kernel_free(&p, &p, 0.7, d).unwrap();
            assert!((k - (4.0 * PI * 0.7f64).powf(-(d as f64) / 2.0)).abs() < 1e-15);
        }
        assert!(heat_kernel_free(&x, &x, 0.0, 1).is_err());
        assert!(heat_kernel_free(&x, &x, -1.0, 1).is_err());
    }

    fn single_site(d: usize, v: f64) -> MatrixPotential {
        let g = GridSpec::cube(d, 1, 0.5).unwrap();
        MatrixPotential::new(g, 1, vec![HermitianMatrix::from_real_diagonal(&[v])]).unwrap()
    }

    #[test]
    fn clr_rhs_cases() {
        let zero = MatrixPotential::zeros(GridSpec::cube(3, 2, 1.0).unwrap(), 2);
        assert_eq!(clr_rhs(&zero, 10.332).unwrap(), 0.0);
        let v = single_site(3, 2.5);
        let want = 10.332 / (6.0 * PI * PI) * 0.125 * 2.5f64.powf(1.5);
        assert!((clr_rhs(&v, 10.332).unwrap() - want).abs() < 1e-14 * want);
    }

    #[test]
    fn heat_diagonal_scaling_identity() {
        let a = 1.13;
        let f = move |mu: f64| f_a_eval(a, mu);
        for v in [0.3, 1.0, 7.0] {
            let pot = single_site(3, v);
            let integral = heat_diagonal_integral(&pot, &f).unwrap();
            let closed = heat_diagonal_closed_form(&pot, &f).unwrap();
            assert!((integral - closed).abs() < 1e-6 * closed, "v={v}");
            // v^{d/2} scaling against the closed form pi / sqrt(a)
            let want = (4.0 * PI).powf(-1.5) * PI / a.sqrt() * 0.125 * v.powf(1.5);
            assert!((integral - want).abs() < 1e-6 * want);
        }
        let zero = MatrixPotential::zeros(GridSpec::cube(2, 3, 1.0).unwrap(), 2);
        assert_eq!(heat_diagonal_step(&zero, &f, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn dense_budget_default() {
        if std::env::var(DENSE_BUDGET_ENV).is_err() {
            assert_eq!(dense_budget(), DEFAULT_DENSE_BUDGET);
        }
    }
}
