//! Time-ordered matrix functions `T f(W_1, ..., W_n)`, their closed forms for
//! monomials and exponentials, and the time-ordered Jensen gap.
//!
//! `T f` evaluates `f` on sums of eigenvalues `w_{k_1}^{(1)} + ... + w_{k_n}^{(n)}`
//! while multiplying the matching spectral projectors in the fixed factor
//! order `P_{k_1}^{(1)} ... P_{k_n}^{(n)}`. The result is generally not
//! Hermitian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{
    apply_spectral, matrix_power, require_psd, CMatrix, EigenDecomposition, HermitianMatrix,
    ScalarFunction, C64,
};

/// Default cap on the number of enumerated multi-indices `N^n`.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 1_000_000;

/// Largest monomial degree accepted by [`time_ordered_monomial`].
pub const MAX_MONOMIAL_DEGREE: u32 = 12;

/// One term `weight * exp(-rate * mu)` of the exponential part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpAtom {
    pub weight: f64,
    pub rate: f64,
}

/// `f(mu) = sum_j poly[j] mu^j + sum_k atoms[k].weight * exp(-atoms[k].rate * mu)`.
///
/// The function is admissible for the time-ordered Jensen inequality when
/// `poly[j] >= 0` for `j >= 2` and every atom weight is non-negative. The
/// first two polynomial coefficients are unrestricted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScalarFunctionClass {
    pub poly_coeffs: Vec<f64>,
    pub exp_atoms: Vec<ExpAtom>,
}

impl ScalarFunctionClass {
    /// Builds an admissible function, rejecting anything else.
    pub fn new(poly_coeffs: Vec<f64>, exp_atoms: Vec<ExpAtom>) -> Result<Self> {
        let f = Self {
            poly_coeffs,
            exp_atoms,
        };
        f.check_admissible()?;
        Ok(f)
    }

    /// `mu^k`.
    pub fn monomial(k: usize) -> Self {
        let mut poly_coeffs = vec![0.0; k + 1];
        poly_coeffs[k] = 1.0;
        Self {
            poly_coeffs,
            exp_atoms: Vec::new(),
        }
    }

    /// `exp(alpha * mu)`.
    pub fn exponential(alpha: f64) -> Self {
        Self {
            poly_coeffs: Vec::new(),
            exp_atoms: vec![ExpAtom {
                weight: 1.0,
                rate: -alpha,
            }],
        }
    }

    pub fn check_admissible(&self) -> Result<()> {
        for (j, &c) in self.poly_coeffs.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::Precondition(format!("coefficient alpha_{j} is not finite")));
            }
            if j >= 2 && c < 0.0 {
                return Err(Error::Precondition(format!(
                    "coefficient alpha_{j} = {c} is negative"
                )));
            }
        }
        for (k, atom) in self.exp_atoms.iter().enumerate() {
            if !(atom.weight.is_finite() && atom.rate.is_finite()) {
                return Err(Error::Precondition(format!("atom {k} is not finite")));
            }
            if atom.weight < 0.0 {
                return Err(Error::Precondition(format!(
                    "atom {k} has negative weight {}",
                    atom.weight
                )));
            }
        }
        Ok(())
    }

    /// `f(0) = alpha_0 + sum_k beta_k`.
    pub fn value_at_zero(&self) -> f64 {
        self.poly_coeffs.first().copied().unwrap_or(0.0)
            + self.exp_atoms.iter().map(|a| a.weight).sum::<f64>()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            poly_coeffs: self.poly_coeffs.iter().map(|x| c * x).collect(),
            exp_atoms: self
                .exp_atoms
                .iter()
                .map(|a| ExpAtom {
                    weight: c * a.weight,
                    rate: a.rate,
                })
                .collect(),
        }
    }

    pub fn sum(&self, other: &Self) -> Self {
        let len = self.poly_coeffs.len().max(other.poly_coeffs.len());
        let coeff = |p: &[f64], j: usize| p.get(j).copied().unwrap_or(0.0);
        Self {
            poly_coeffs: (0..len)
                .map(|j| coeff(&self.poly_coeffs, j) + coeff(&other.poly_coeffs, j))
                .collect(),
            exp_atoms: self.exp_atoms.iter().chain(&other.exp_atoms).copied().collect(),
        }
    }
}

impl ScalarFunction for ScalarFunctionClass {
    fn eval(&self, mu: f64) -> f64 {
        // f(mu) = f(0) + sum_{j>=1} alpha_j mu^j + sum_k beta_k (e^{-r_k mu} - 1),
        // which stays accurate near mu = 0 when f(0) cancels.
        let poly = self
            .poly_coeffs
            .iter()
            .skip(1)
            .rev()
            .fold(0.0, |acc, &c| acc * mu + c)
            * mu;
        let atoms: f64 = self
            .exp_atoms
            .iter()
            .map(|a| a.weight * (-a.rate * mu).exp_m1())
            .sum();
        self.value_at_zero() + poly + atoms
    }
}

/// The matrix `T f(W_1, ..., W_n)` together with `Re tr`.
#[derive(Debug, Clone)]
pub struct TimeOrderedResult {
    pub matrix: CMatrix,
    pub real_trace: f64,
}

impl TimeOrderedResult {
    fn from_matrix(matrix: CMatrix) -> Self {
        let real_trace = matrix.trace().re;
        Self { matrix, real_trace }
    }
}

fn common_dim(ws: &[HermitianMatrix]) -> Result<usize> {
    let first = ws
        .first()
        .ok_or_else(|| Error::Precondition("need at least one factor".into()))?;
    let n = first.dim();
    for w in ws {
        if w.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: w.dim(),
            });
        }
    }
    Ok(n)
}

/// `T f` by direct enumeration of all `N^n` eigenbasis multi-indices.
pub fn time_ordered_apply<F: ScalarFunction + ?Sized>(
    f: &F,
    ws: &[HermitianMatrix],
) -> Result<TimeOrderedResult> {
    time_ordered_apply_with_budget(f, ws, DEFAULT_ENUMERATION_BUDGET)
}

pub fn time_ordered_apply_with_budget<F: ScalarFunction + ?Sized>(
    f: &F,
    ws: &[HermitianMatrix],
    budget: u128,
) -> Result<TimeOrderedResult> {
    let dim = common_dim(ws)?;
    let terms = (dim as u128).checked_pow(ws.len() as u32).unwrap_or(u128::MAX);
    if terms > budget {
        return Err(Error::BudgetExceeded {
            what: "time-ordered enumeration",
            required: terms,
            limit: budget,
            hint: "use time_ordered_monomial, time_ordered_exponential or time_ordered_mu_exp",
        });
    }
    let eigs: Vec<EigenDecomposition> = ws.iter().map(|w| w.eig()).collect::<Result<_>>()?;
    // overlaps[j][(a, b)] = <v_a^{(j)}, v_b^{(j+1)}>
    let overlaps: Vec<CMatrix> = eigs
        .windows(2)
        .map(|p| p[0].vectors.adjoint() * &p[1].vectors)
        .collect();

    let mut core = CMatrix::zeros(dim, dim);
    let mut walk = Walk {
        f,
        eigs: &eigs,
        overlaps: &overlaps,
        core: &mut core,
    };
    for k in 0..dim {
        walk.descend(1, k, k, eigs[0].eigenvalues[k], C64::new(1.0, 0.0));
    }
    let last = &eigs[eigs.len() - 1];
    let matrix = &eigs[0].vectors * core * last.vectors.adjoint();
    Ok(TimeOrderedResult::from_matrix(matrix))
}

struct Walk<'a, F: ScalarFunction + ?Sized> {
    f: &'a F,
    eigs: &'a [EigenDecomposition],
    overlaps: &'a [CMatrix],
    core: &'a mut CMatrix,
}

impl<F: ScalarFunction + ?Sized> Walk<'_, F> {
    fn descend(&mut self, depth: usize, first: usize, prev: usize, sum: f64, weight: C64) {
        if depth == self.eigs.len() {
            self.core[(first, prev)] += weight * self.f.eval(sum);
            return;
        }
        let eig = &self.eigs[depth];
        for k in 0..eig.dim() {
            let w = weight * self.overlaps[depth - 1][(prev, k)];
            self.descend(depth + 1, first, k, sum + eig.eigenvalues[k], w);
        }
    }
}

/// Closed form for `f(mu) = mu^k`:
/// `sum_{j_1 + ... + j_n = k} k! / (j_1! ... j_n!) W_1^{j_1} ... W_n^{j_n}`.
pub fn time_ordered_monomial(k: u32, ws: &[HermitianMatrix]) -> Result<TimeOrderedResult> {
    let dim = common_dim(ws)?;
    if k == 0 {
        return Ok(TimeOrderedResult::from_matrix(CMatrix::identity(dim, dim)));
    }
    if k > MAX_MONOMIAL_DEGREE {
        return Err(Error::BudgetExceeded {
            what: "monomial degree",
            required: k as u128,
            limit: MAX_MONOMIAL_DEGREE as u128,
            hint: "reduce the degree",
        });
    }
    let k = k as usize;
    // tail[r] = sum over compositions of r into the remaining factors of
    // prod_i W_i^{j_i} / j_i!
    let scaled_powers = |w: &HermitianMatrix| -> Vec<CMatrix> {
        let mut out = Vec::with_capacity(k + 1);
        let mut p = CMatrix::identity(dim, dim);
        out.push(p.clone());
        for j in 1..=k {
            p = &p * w.as_matrix() / C64::new(j as f64, 0.0);
            out.push(p.clone());
        }
        out
    };
    let mut tail = scaled_powers(&ws[ws.len() - 1]);
    for w in ws[..ws.len() - 1].iter().rev() {
        let powers = scaled_powers(w);
        tail = (0..=k)
            .map(|r| {
                (0..=r).fold(CMatrix::zeros(dim, dim), |acc, j| {
                    acc + &powers[j] * &tail[r - j]
                })
            })
            .collect();
    }
    let factorial: f64 = (1..=k).map(|i| i as f64).product();
    Ok(TimeOrderedResult::from_matrix(tail[k].map(|z| z * factorial)))
}

fn exp_factors(alpha: f64, ws: &[HermitianMatrix]) -> Result<Vec<CMatrix>> {
    ws.iter()
        .map(|w| apply_spectral(&|x: f64| (alpha * x).exp(), w).map(HermitianMatrix::into_inner))
        .collect()
}

/// Closed form for `f(mu) = exp(alpha mu)`: `e^{alpha W_1} ... e^{alpha W_n}`.
pub fn time_ordered_exponential(alpha: f64, ws: &[HermitianMatrix]) -> Result<TimeOrderedResult> {
    let dim = common_dim(ws)?;
    let product = exp_factors(alpha, ws)?
        .iter()
        .fold(CMatrix::identity(dim, dim), |acc, e| acc * e);
    Ok(TimeOrderedResult::from_matrix(product))
}

/// Closed form for `f(mu) = mu exp(alpha mu)`: the sum over positions `m` of
/// the exponential product with `W_m` inserted in front of `e^{alpha W_m}`.
pub fn time_ordered_mu_exp(alpha: f64, ws: &[HermitianMatrix]) -> Result<TimeOrderedResult> {
    let dim = common_dim(ws)?;
    let factors = exp_factors(alpha, ws)?;
    let n = factors.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(CMatrix::identity(dim, dim));
    for e in &factors {
        let next = prefix.last().unwrap() * e;
        prefix.push(next);
    }
    let mut suffix = vec![CMatrix::identity(dim, dim); n + 1];
    for m in (0..n).rev() {
        suffix[m] = &factors[m] * &suffix[m + 1];
    }
    let mut total = CMatrix::zeros(dim, dim);
    for m in 0..n {
        total += &prefix[m] * ws[m].as_matrix() * &suffix[m];
    }
    Ok(TimeOrderedResult::from_matrix(total))
}

/// Both sides of the time-ordered Jensen inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JensenSides {
    /// `Re tr T f(W_1, ..., W_n)`.
    pub lhs: f64,
    /// `(1/n) sum_j tr f(n W_j)`.
    pub rhs: f64,
}

impl JensenSides {
    pub fn gap(&self) -> f64 {
        self.rhs - self.lhs
    }
}

fn jensen_sides_for<F: ScalarFunction + ?Sized>(f: &F, ws: &[HermitianMatrix]) -> Result<JensenSides> {
    common_dim(ws)?;
    for (j, w) in ws.iter().enumerate() {
        require_psd(w, &format!("W_{}", j + 1))?;
    }
    let n = ws.len() as f64;
    let lhs = time_ordered_apply(f, ws)?.real_trace;
    let mut rhs = 0.0;
    for w in ws {
        rhs += apply_spectral(f, &w.scale(n))?.trace();
    }
    Ok(JensenSides { lhs, rhs: rhs / n })
}

pub fn jensen_sides(f: &ScalarFunctionClass, ws: &[HermitianMatrix]) -> Result<JensenSides> {
    f.check_admissible()?;
    jensen_sides_for(f, ws)
}

/// `(1/n) sum_j tr f(n W_j) - Re tr T f(W_1, ..., W_n)`; non-negative up to
/// rounding for admissible `f` and PSD inputs.
pub fn jensen_gap(f: &ScalarFunctionClass, ws: &[HermitianMatrix]) -> Result<f64> {
    Ok(jensen_sides(f, ws)?.gap())
}

/// Jensen gap for the hinge `(mu - kink)_+`, which is convex but not of the
/// admissible form. No sign is asserted.
pub fn convex_probe(kink: f64, ws: &[HermitianMatrix]) -> Result<f64> {
    if !(kink > 0.0 && kink.is_finite()) {
        return Err(Error::Domain(format!("hinge kink must be positive, got {kink}")));
    }
    let hinge = move |mu: f64| (mu - kink).max(0.0);
    Ok(jensen_sides_for(&hinge, ws)?.gap())
}

/// Intermediate Hölder step for `f(mu) = mu^k`:
/// returns `(Re tr T f, f(sum_j (tr W_j^k)^{1/k}))`.
pub fn holder_chain(k: u32, ws: &[HermitianMatrix]) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::Precondition("degree must be at least 1".into()));
    }
    let mut root_sum = 0.0;
    for (j, w) in ws.iter().enumerate() {
        let e = require_psd(w, &format!("W_{}", j + 1))?;
        let tr: f64 = e.eigenvalues.iter().map(|&x| x.max(0.0).powi(k as i32)).sum();
        root_sum += tr.powf(1.0 / k as f64);
    }
    let lhs = time_ordered_monomial(k, ws)?.real_trace;
    Ok((lhs, root_sum.powi(k as i32)))
}

/// `W^j` for PSD `W`; kept for callers that want plain powers of factors.
pub fn factor_power(w: &HermitianMatrix, j: u32) -> CMatrix {
    matrix_power(w.as_matrix(), j)
}
