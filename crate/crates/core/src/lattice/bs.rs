//! The Birman–Schwinger operator `K = V^{1/2} L^{-1} V^{1/2}` and the counting
//! bound `#(L - V) <= F(1)^{-1} tr F(K)`.

use nalgebra::DMatrix;

use super::dense_budget;
use super::grid::Boundary;
use super::operator::{scalar_laplacian_dense, DiscreteOperator};
use super::potential::MatrixPotential;
use crate::error::{Error, Result};
use crate::matcore::{CMatrix, HermitianMatrix, ScalarFunction, C64};
use crate::transforms::big_f_a;

/// `L^{-1}` restricted to the rows and columns in `sites` (scalar Laplacian).
pub fn green_block(v: &MatrixPotential, sites: &[usize]) -> Result<DMatrix<f64>> {
    if v.grid.boundary != Boundary::Dirichlet {
        return Err(Error::Precondition(
            "the periodic Laplacian is singular; use a Dirichlet grid for Birman-Schwinger".into(),
        ));
    }
    let n = v.grid.sites();
    let limit = dense_budget();
    if n > limit {
        return Err(Error::BudgetExceeded {
            what: "dense Laplacian inverse",
            required: n as u128,
            limit: limit as u128,
            hint: "raise CLRLAB_DENSE_BUDGET or use a smaller grid",
        });
    }
    let chol = scalar_laplacian_dense(&v.grid)?
        .cholesky()
        .ok_or_else(|| Error::Precondition("Dirichlet Laplacian is not positive definite".into()))?;
    let mut rhs = DMatrix::<f64>::zeros(n, sites.len());
    for (c, &s) in sites.iter().enumerate() {
        rhs[(s, c)] = 1.0;
    }
    let g = chol.solve(&rhs);
    Ok(DMatrix::from_fn(sites.len(), sites.len(), |i, j| g[(sites[i], j)]))
}

/// `K = V^{1/2} L^{-1} V^{1/2}` on the span of the sites where `V != 0`.
///
/// The potential must be PSD at every site. Rows are ordered by support site,
/// then fibre component.
pub fn birman_schwinger(v: &MatrixPotential) -> Result<DiscreteOperator> {
    let support = v.support();
    if v.grid.boundary != Boundary::Dirichlet {
        // checked before the empty shortcut so that the contract does not depend on V
        return Err(Error::Precondition(
            "the periodic Laplacian is singular; use a Dirichlet grid for Birman-Schwinger".into(),
        ));
    }
    if support.is_empty() {
        return Ok(DiscreteOperator::empty());
    }
    let roots = v.sqrt_blocks()?;
    let g = green_block(v, &support)?;
    let n = v.fiber_dim();
    let dim = support.len() * n;
    let mut k = CMatrix::zeros(dim, dim);
    for (a, &sa) in support.iter().enumerate() {
        for (b, &sb) in support.iter().enumerate().skip(a) {
            let block = roots[sa].as_matrix() * roots[sb].as_matrix() * C64::new(g[(a, b)], 0.0);
            for i in 0..n {
                for j in 0..n {
                    k[(a * n + i, b * n + j)] = block[(i, j)];
                    k[(b * n + j, a * n + i)] = block[(i, j)].conj();
                }
            }
        }
    }
    DiscreteOperator::from_dense(HermitianMatrix::hermitize(&k).into_inner())
}

/// Eigenvalues of `K` strictly above one, and how close the nearest eigenvalue is to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsCount {
    pub above: usize,
    /// `min_k |lambda_k - 1|`; infinite for an empty operator.
    pub distance_to_one: f64,
}

pub fn count_above_one(k: &DiscreteOperator) -> Result<BsCount> {
    let eigs = k.eigenvalues()?;
    Ok(BsCount {
        above: eigs.iter().filter(|&&e| e > 1.0).count(),
        distance_to_one: eigs.iter().map(|e| (e - 1.0).abs()).fold(f64::INFINITY, f64::min),
    })
}

/// `F(1)^{-1} sum_k F(lambda_k(K))`.
///
/// `F` must be non-negative and non-decreasing; this is checked on the
/// spectrum of `K` together with the point 1.
pub fn bs_bound<F: ScalarFunction + ?Sized>(f: &F, k: &DiscreteOperator) -> Result<f64> {
    let f1 = f.eval(1.0);
    if !(f1 > 0.0) || !f1.is_finite() {
        return Err(Error::Precondition(format!("F(1) must be positive, got {f1}")));
    }
    let eigs = k.eigenvalues()?;
    let mut points: Vec<f64> = eigs.iter().map(|&e| e.max(0.0)).collect();
    points.push(1.0);
    points.sort_by(f64::total_cmp);
    let mut prev = f.eval(0.0).max(0.0);
    for &x in &points {
        let fx = f.eval(x);
        if !fx.is_finite() || fx < 0.0 {
            return Err(Error::Precondition(format!("F({x}) = {fx} is not a non-negative number")));
        }
        if fx < prev - 1e-12 * (1.0 + prev.abs()) {
            return Err(Error::Precondition(format!("F decreases near {x}")));
        }
        prev = fx;
    }
    let sum: f64 = eigs.iter().map(|&e| f.eval(e.max(0.0))).sum();
    Ok(sum / f1)
}

/// `F_a` as a function handle, zero on `lambda <= 0`.
pub fn f_a_handle(a: f64) -> impl Fn(f64) -> f64 {
    move |lambda| big_f_a(a, lambda).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::grid::GridSpec;
    use crate::lattice::operator::{count_negative, count_negative_dense};
    use crate::matcore::random::{random_psd, random_psd_rank, seeded};
    use rand::Rng;

    fn random_instance(seed: u64, d: usize, m: usize, n: usize, scale: f64) -> MatrixPotential {
        let mut rng = seeded(seed);
        let g = GridSpec::cube(d, m, 1.0).unwrap();
        MatrixPotential::from_fn(g, n, |_| {
            if rng.random::<f64>() < 0.4 {
                HermitianMatrix::zeros(n)
            } else {
                let rank = rng.random_range(1..=n);
                random_psd_rank(&mut rng, n, rank, scale)
            }
        })
        .unwrap()
    }

    #[test]
    fn empty_and_single_site() {
        let g = GridSpec::cube(1, 5, 1.0).unwrap();
        let zero = MatrixPotential::zeros(g.clone(), 2);
        assert_eq!(birman_schwinger(&zero).unwrap().dim(), 0);
        let mut v = MatrixPotential::zeros(g, 1);
        v.set_site(2, HermitianMatrix::from_real_diagonal(&[3.0])).unwrap();
        let k = birman_schwinger(&v).unwrap();
        assert_eq!(k.dim(), 1);
        // (L^{-1})_{ss} for the 5-point path at the centre is 3 * 3 / 6
        assert!((k.get(0, 0).re - 3.0 * 1.5).abs() < 1e-13);
    }

    #[test]
    fn periodic_is_rejected() {
        let g = GridSpec::new(vec![4], 1.0, Boundary::Periodic).unwrap();
        let v = MatrixPotential::zeros(g, 1);
        assert!(matches!(birman_schwinger(&v), Err(Error::Precondition(_))));
    }

    #[test]
    fn counting_principle_on_random_instances() {
        let mut checked = 0;
        for seed in 0..40u64 {
            let (d, m) = if seed % 2 == 0 { (1, 12) } else { (3, 3) };
            let v = random_instance(seed, d, m, 1 + (seed % 3) as usize, 6.0);
            let k = birman_schwinger(&v).unwrap();
            let bs = count_above_one(&k).unwrap();
            if bs.distance_to_one < 1e-9 {
                continue;
            }
            let h = v.hamiltonian().unwrap();
            let count = count_negative_dense(&h).unwrap();
            assert_eq!(count, bs.above, "seed {seed}");
            assert_eq!(count_negative(&h).unwrap(), count);
            for a in [0.7, 1.13, 2.0] {
                let bound = bs_bound(&f_a_handle(a), &k).unwrap();
                assert!(bound + 1e-9 >= count as f64, "seed {seed} a {a}");
            }
            checked += 1;
        }
        assert!(checked >= 35);
    }

    #[test]
    fn k_is_psd() {
        let v = random_instance(3, 2, 4, 3, 2.0);
        let e = birman_schwinger(&v).unwrap().eigenvalues().unwrap();
        assert!(e[0] > -1e-12);
    }

    #[test]
    fn steep_f_matches_count() {
        let mut rng = seeded(4);
        let g = GridSpec::cube(1, 10, 1.0).unwrap();
        let v = MatrixPotential::from_fn(g, 2, |_| random_psd(&mut rng, 2, 3.0)).unwrap();
        let k = birman_schwinger(&v).unwrap();
        let e = k.eigenvalues().unwrap();
        let exact = e.iter().filter(|&&x| x >= 1.0).count() as f64;
        let bound = bs_bound(&|x: f64| x.powi(40), &k).unwrap();
        assert!(bound >= exact);
        // eigenvalues away from 1 contribute almost nothing or almost a full unit
        let gap = e.iter().map(|x| (x - 1.0).abs()).fold(f64::INFINITY, f64::min);
        if gap > 0.3 {
            assert!(bound - exact < 0.05 * (1.0 + exact));
        }
    }

    #[test]
    fn bs_bound_validates_f() {
        let k = DiscreteOperator::diagonal(&[0.2, 0.5]);
        assert!(bs_bound(&|_x: f64| 0.0, &k).is_err());
        assert!(bs_bound(&|x: f64| 1.0 - x, &k).is_err());
        assert!(bs_bound(&|x: f64| x - 0.9, &k).is_err());
        let b = bs_bound(&f_a_handle(1.13), &k).unwrap();
        assert!(b >= 0.0);
        assert_eq!(count_above_one(&k).unwrap().above, 0);
    }
}
