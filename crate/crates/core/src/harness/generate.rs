//! Seeded potential generators. Every style produces a sitewise PSD potential.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{GridSpec, MatrixPotential};
use crate::matcore::random::{random_psd, seeded, LabRng};
use crate::matcore::HermitianMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialStyle {
    GaussianBumps,
    RandomPsdField,
    ScalarEmbed,
}

impl PotentialStyle {
    pub const ALL: [PotentialStyle; 3] = [
        PotentialStyle::GaussianBumps,
        PotentialStyle::RandomPsdField,
        PotentialStyle::ScalarEmbed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PotentialStyle::GaussianBumps => "gaussian-bumps",
            PotentialStyle::RandomPsdField => "random-psd-field",
            PotentialStyle::ScalarEmbed => "scalar-embed",
        }
    }
}

/// Largest fibre dimension accepted by the generators.
pub const MAX_GENERATED_FIBER: usize = 8;

/// Default peak strength in units of `1 / extent^2`, the scale of the lowest
/// Dirichlet eigenvalue; a few bound states are typical.
pub const DEFAULT_STRENGTH: f64 = 40.0;

/// One Gaussian term `A exp(-|x - c|^2 / sigma^2)` with `A` PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub amplitude: HermitianMatrix,
}

/// A continuous potential, so that the same field can be sampled on several grids.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpField {
    pub n: usize,
    pub bumps: Vec<Bump>,
}

impl BumpField {
    /// One to three bumps centred in the middle half of the box.
    pub fn random(rng: &mut LabRng, grid: &GridSpec, n: usize, strength: f64) -> Self {
        let extent = grid.extent();
        let lo: Vec<f64> = (0..grid.d)
            .map(|a| grid.origin.get(a).copied().unwrap_or(0.0))
            .collect();
        let size = extent.iter().copied().fold(f64::INFINITY, f64::min);
        let peak = strength / (size * size);
        let count = rng.random_range(1..=3);
        let bumps = (0..count)
            .map(|_| Bump {
                center: (0..grid.d)
                    .map(|a| lo[a] + extent[a] * rng.random_range(0.25..0.75))
                    .collect(),
                sigma: size * rng.random_range(0.12..0.3),
                amplitude: random_psd(rng, n, peak),
            })
            .collect();
        Self { n, bumps }
    }

    pub fn eval(&self, x: &[f64]) -> HermitianMatrix {
        let mut out = HermitianMatrix::zeros(self.n);
        for b in &self.bumps {
            let r2: f64 = x.iter().zip(&b.center).map(|(p, c)| (p - c) * (p - c)).sum();
            let w = (-r2 / (b.sigma * b.sigma)).exp();
            out = out.try_add(&b.amplitude.scale(w)).expect("bump dimensions agree");
        }
        out
    }

    pub fn sample(&self, grid: &GridSpec) -> Result<MatrixPotential> {
        MatrixPotential::from_fn(grid.clone(), self.n, |x| self.eval(x))
    }
}

fn check_caps(grid: &GridSpec, n: usize) -> Result<()> {
    grid.validate()?;
    if n == 0 || n > MAX_GENERATED_FIBER {
        return Err(Error::Config(format!(
            "fibre dimension must be in 1..={MAX_GENERATED_FIBER}, got {n}"
        )));
    }
    Ok(())
}

/// Potential of the given style with [`DEFAULT_STRENGTH`].
pub fn generate_potential(
    seed: u64,
    grid: &GridSpec,
    n: usize,
    style: PotentialStyle,
) -> Result<MatrixPotential> {
    generate_potential_with_strength(seed, grid, n, style, DEFAULT_STRENGTH)
}

pub fn generate_potential_with_strength(
    seed: u64,
    grid: &GridSpec,
    n: usize,
    style: PotentialStyle,
    strength: f64,
) -> Result<MatrixPotential> {
    check_caps(grid, n)?;
    if !(strength > 0.0) || !strength.is_finite() {
        return Err(Error::Config(format!("strength must be positive, got {strength}")));
    }
    let mut rng = seeded(seed);
    match style {
        PotentialStyle::GaussianBumps => BumpField::random(&mut rng, grid, n, strength).sample(grid),
        PotentialStyle::ScalarEmbed => BumpField::random(&mut rng, grid, 1, strength)
            .sample(grid)?
            .tensor_identity(n),
        PotentialStyle::RandomPsdField => {
            let size = grid.extent().iter().copied().fold(f64::INFINITY, f64::min);
            // i.i.d. draws average down under smoothing, so start stronger
            let peak = 2.0 * strength / (size * size);
            let raw: Vec<HermitianMatrix> =
                (0..grid.sites()).map(|_| random_psd(&mut rng, n, peak)).collect();
            smooth(grid, n, &raw)
        }
    }
}

/// One pass of nearest-neighbour averaging, `V'(x) = mean of V over x and its neighbours`.
fn smooth(grid: &GridSpec, n: usize, raw: &[HermitianMatrix]) -> Result<MatrixPotential> {
    let strides = grid.strides();
    let values = (0..grid.sites())
        .map(|s| {
            let coords = grid.site_coords(s);
            let mut acc = raw[s].clone();
            let mut count = 1.0;
            for axis in 0..grid.d {
                let c = coords[axis];
                if c > 0 {
                    acc = acc.try_add(&raw[s - strides[axis]])?;
                    count += 1.0;
                }
                if c + 1 < grid.points[axis] {
                    acc = acc.try_add(&raw[s + strides[axis]])?;
                    count += 1.0;
                }
            }
            Ok(acc.scale(1.0 / count))
        })
        .collect::<Result<Vec<_>>>()?;
    MatrixPotential::new(grid.clone(), n, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::count_negative;

    #[test]
    fn all_styles_are_psd_and_deterministic() {
        let g = GridSpec::cube(2, 5, 0.5).unwrap();
        for style in PotentialStyle::ALL {
            let a = generate_potential(9, &g, 2, style).unwrap();
            let b = generate_potential(9, &g, 2, style).unwrap();
            assert!(a.is_psd(1e-12), "{}", style.name());
            assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
            assert!(a.max_norm() > 0.0);
        }
    }

    #[test]
    fn scalar_embed_doubles_the_count() {
        let g = GridSpec::cube(1, 20, 0.25).unwrap();
        let one = generate_potential(3, &g, 1, PotentialStyle::ScalarEmbed).unwrap();
        let two = generate_potential(3, &g, 2, PotentialStyle::ScalarEmbed).unwrap();
        assert_eq!(two, one.tensor_identity(2).unwrap());
        let c1 = count_negative(&one.hamiltonian().unwrap()).unwrap();
        let c2 = count_negative(&two.hamiltonian().unwrap()).unwrap();
        assert!(c1 > 0);
        assert_eq!(c2, 2 * c1);
    }

    #[test]
    fn bump_field_resamples_on_refined_grids() {
        let g = GridSpec::cube(1, 3, 1.0).unwrap();
        let field = BumpField::random(&mut seeded(1), &g, 2, 40.0);
        let coarse = field.sample(&g).unwrap();
        let fine = field.sample(&g.refined(2).unwrap()).unwrap();
        assert_eq!(coarse.site(1), fine.site(3));
    }

    #[test]
    fn caps_are_enforced() {
        let g = GridSpec::cube(1, 3, 1.0).unwrap();
        assert!(generate_potential(0, &g, 0, PotentialStyle::GaussianBumps).is_err());
        assert!(generate_potential(0, &g, 9, PotentialStyle::GaussianBumps).is_err());
        assert!(generate_potential_with_strength(0, &g, 1, PotentialStyle::ScalarEmbed, -1.0).is_err());
    }
}
