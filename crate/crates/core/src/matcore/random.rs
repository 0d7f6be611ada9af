//! Seeded random Hermitian and PSD matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{CMatrix, HermitianMatrix, C64};

pub type LabRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex Ginibre matrix with i.i.d. standard normal real and imaginary parts.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// GUE-like Hermitian matrix scaled so typical eigenvalues are O(`scale`).
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> HermitianMatrix {
    let g = ginibre(rng, n, n);
    let h = HermitianMatrix::hermitize(&g);
    h.scale(scale / (n as f64).sqrt())
}

/// Wishart-type PSD matrix `G G^H` scaled so `tr W / n` is about `scale`.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> HermitianMatrix {
    let g = ginibre(rng, n, n);
    HermitianMatrix::hermitize(&(&g * g.adjoint())).scale(scale / (2.0 * n as f64))
}

/// PSD matrix of the given rank (rank-deficient inputs exercise degeneracy).
pub fn random_psd_rank<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    rank: usize,
    scale: f64,
) -> HermitianMatrix {
    let g = ginibre(rng, n, rank.max(1));
    HermitianMatrix::hermitize(&(&g * g.adjoint())).scale(scale / (2.0 * n as f64))
}
