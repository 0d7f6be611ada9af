use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::operator::{build_laplacian, DiscreteOperator};
use crate::error::{Error, Result};
use crate::matcore::{apply_spectral, positive_part, CMatrix, HermitianMatrix, C64};

/// Sites whose potential has `max |V_ij| <= SUPPORT_TOL` count as empty.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Eigenvalues in `[-SQRT_CLIP, 0)` are clipped to zero before square roots.
pub const SQRT_CLIP: f64 = 1e-12;

/// Hermitian `N x N` potential on every site of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPotential {
    pub grid: GridSpec,
    n: usize,
    values: Vec<HermitianMatrix>,
}

impl MatrixPotential {
    pub fn new(grid: GridSpec, n: usize, values: Vec<HermitianMatrix>) -> Result<Self> {
        grid.validate()?;
        if n == 0 {
            return Err(Error::Config("fibre dimension must be positive".into()));
        }
        if values.len() != grid.sites() {
            return Err(Error::DimensionMismatch {
                expected: grid.sites(),
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|v| v.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.dim(),
            });
        }
        Ok(Self { grid, n, values })
    }

    pub fn zeros(grid: GridSpec, n: usize) -> Self {
        let values = vec![HermitianMatrix::zeros(n); grid.sites()];
        Self { grid, n, values }
    }

    /// Samples `f(position)` at every site.
    pub fn from_fn(
        grid: GridSpec,
        n: usize,
        mut f: impl FnMut(&[f64]) -> HermitianMatrix,
    ) -> Result<Self> {
        let values = (0..grid.sites()).map(|s| f(&grid.position(s))).collect();
        Self::new(grid, n, values)
    }

    pub fn fiber_dim(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[HermitianMatrix] {
        &self.values
    }

    pub fn site(&self, s: usize) -> &HermitianMatrix {
        &self.values[s]
    }

    pub fn set_site(&mut self, s: usize, v: HermitianMatrix) -> Result<()> {
        if v.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.dim(),
            });
        }
        self.values[s] = v;
        Ok(())
    }

    /// Operator dimension `sites * N`.
    pub fn dim(&self) -> usize {
        self.values.len() * self.n
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(HermitianMatrix::max_abs).fold(0.0, f64::max)
    }

    pub fn positive_part(&self) -> Result<Self> {
        let values = self.values.iter().map(positive_part).collect::<Result<_>>()?;
        Ok(Self {
            grid: self.grid.clone(),
            n: self.n,
            values,
        })
    }

    /// Sitewise sum; both potentials must live on the same grid and fibre.
    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid || self.n != other.n {
            return Err(Error::Precondition("potentials live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.try_add(b))
            .collect::<Result<_>>()?;
        Ok(Self {
            grid: self.grid.clone(),
            n: self.n,
            values,
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            n: self.n,
            values: self.values.iter().map(|v| v.scale(c)).collect(),
        }
    }

    /// `V(x) (x) I_k`: each scalar entry becomes a `k x k` multiple of the identity.
    pub fn tensor_identity(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let n = self.n * k;
        let values = self
            .values
            .iter()
            .map(|v| {
                let m = v.as_matrix();
                let big = CMatrix::from_fn(n, n, |i, j| {
                    if i % k == j % k {
                        m[(i / k, j / k)]
                    } else {
                        C64::default()
                    }
                });
                HermitianMatrix::hermitize(&big)
            })
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            n,
            values,
        })
    }

    /// Eigenvalues of every site, concatenated in site order.
    pub fn site_eigenvalues(&self) -> Vec<f64> {
        self.values.iter().flat_map(HermitianMatrix::eigenvalues).collect()
    }

    /// Smallest eigenvalue over all sites is at least `-rtol * (1 + max |V|)`.
    pub fn is_psd(&self, rtol: f64) -> bool {
        let floor = -rtol * (1.0 + self.max_norm());
        self.site_eigenvalues().iter().all(|&e| e >= floor)
    }

    /// `h^d sum_x tr V_+(x)^p`.
    pub fn moment(&self, p: f64) -> Result<f64> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::Domain(format!("moment exponent must be positive, got {p}")));
        }
        let s: f64 = self
            .site_eigenvalues()
            .iter()
            .map(|&e| e.max(0.0).powf(p))
            .sum();
        Ok(self.grid.cell_volume() * s)
    }

    /// Sites with `max |V_ij| > SUPPORT_TOL`, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&s| self.values[s].max_abs() > SUPPORT_TOL)
            .collect()
    }

    /// `V(x)^{1/2}` at every site; eigenvalues in `[-SQRT_CLIP * scale, 0)` are
    /// clipped, anything more negative is an error.
    pub fn sqrt_blocks(&self) -> Result<Vec<HermitianMatrix>> {
        let floor = -SQRT_CLIP * (1.0 + self.max_norm());
        let mut out = Vec::with_capacity(self.values.len());
        for (s, v) in self.values.iter().enumerate() {
            if v.max_abs() <= SUPPORT_TOL {
                out.push(HermitianMatrix::zeros(self.n));
                continue;
            }
            if let Some(&e) = v.eigenvalues().first() {
                if e < floor {
                    return Err(Error::Precondition(format!(
                        "potential is not PSD at site {s}: eigenvalue {e:.3e}"
                    )));
                }
            }
            out.push(apply_spectral(&|w: f64| w.max(0.0).sqrt(), v)?);
        }
        Ok(out)
    }

    /// `L - V` with `L` the Laplacian of this grid.
    pub fn hamiltonian(&self) -> Result<DiscreteOperator> {
        build_laplacian(&self.grid, self.n)?.minus_block_diagonal(&self.values)
    }

    pub fn to_file_format(&self) -> PotentialFile {
        let sites = (0..self.values.len())
            .filter(|&s| self.values[s].max_abs() != 0.0)
            .map(|s| SiteEntry {
                index: self.grid.site_coords(s),
                matrix: self.values[s]
                    .as_matrix()
                    .transpose()
                    .iter()
                    .map(|z| [z.re, z.im])
                    .collect(),
            })
            .collect();
        PotentialFile {
            grid: self.grid.clone(),
            n: self.n,
            sites,
        }
    }

    pub fn from_file_format(file: PotentialFile) -> Result<Self> {
        let mut v = Self::zeros(file.grid, file.n);
        if v.n == 0 {
            return Err(Error::Config("fibre dimension must be positive".into()));
        }
        v.grid.validate()?;
        for entry in file.sites {
            let s = v.grid.site_index(&entry.index)?;
            if entry.matrix.len() != v.n * v.n {
                return Err(Error::Config(format!(
                    "site {:?}: expected {} matrix entries, found {}",
                    entry.index,
                    v.n * v.n,
                    entry.matrix.len()
                )));
            }
            let m = CMatrix::from_fn(v.n, v.n, |i, j| {
                let [re, im] = entry.matrix[i * v.n + j];
                C64::new(re, im)
            });
            v.values[s] = HermitianMatrix::new(m)
                .map_err(|e| Error::Config(format!("site {:?}: {e}", entry.index)))?;
        }
        Ok(v)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file_format())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file_format(serde_json::from_str(s)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()? + "\n")?)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk layout of a potential; omitted sites are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFile {
    pub grid: GridSpec,
    #[serde(rename = "N")]
    pub n: usize,
    pub sites: Vec<SiteEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteEntry {
    pub index: Vec<usize>,
    /// Row-major `[re, im]` pairs.
    pub matrix: Vec<[f64; 2]>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::random::{random_hermitian, random_psd, seeded};

    fn random_potential(seed: u64) -> MatrixPotential {
        let mut rng = seeded(seed);
        let g = GridSpec::cube(2, 3, 0.5).unwrap();
        MatrixPotential::from_fn(g, 2, |_| random_hermitian(&mut rng, 2, 1.0)).unwrap()
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let mut v = random_potential(5);
        v.set_site(4, HermitianMatrix::zeros(2)).unwrap();
        let s = v.to_json().unwrap();
        assert!(s.contains("\"N\": 2"));
        assert!(s.contains("\"dirichlet\""));
        let back = MatrixPotential::from_json(&s).unwrap();
        assert_eq!(back, v);
        assert_eq!(v.to_file_format().sites.len(), 8);
    }

    #[test]
    fn json_rejects_bad_input() {
        let g = r#"{"d":1,"points":[2],"h":1.0,"boundary":"dirichlet"}"#;
        let wrong_len = format!(r#"{{"grid":{g},"N":1,"sites":[{{"index":[0],"matrix":[[1,0],[0,0]]}}]}}"#);
        assert!(MatrixPotential::from_json(&wrong_len).is_err());
        let out_of_range = format!(r#"{{"grid":{g},"N":1,"sites":[{{"index":[2],"matrix":[[1,0]]}}]}}"#);
        assert!(MatrixPotential::from_json(&out_of_range).is_err());
        let not_hermitian = format!(r#"{{"grid":{g},"N":1,"sites":[{{"index":[1],"matrix":[[1,0.5]]}}]}}"#);
        assert!(MatrixPotential::from_json(&not_hermitian).is_err());
        let ok = format!(r#"{{"grid":{g},"N":1,"sites":[{{"index":[1],"matrix":[[3,0]]}}]}}"#);
        let v = MatrixPotential::from_json(&ok).unwrap();
        assert_eq!(v.site(0).max_abs(), 0.0);
        assert_eq!(v.site(1).trace(), 3.0);
    }

    #[test]
    fn moments_and_support() {
        let g = GridSpec::cube(1, 3, 0.5).unwrap();
        let v = MatrixPotential::new(
            g,
            2,
            vec![
                HermitianMatrix::from_real_diagonal(&[4.0, -1.0]),
                HermitianMatrix::zeros(2),
                HermitianMatrix::from_real_diagonal(&[1.0, 9.0]),
            ],
        )
        .unwrap();
        assert_eq!(v.support(), vec![0, 2]);
        let m = v.moment(0.5).unwrap();
        assert!((m - 0.5 * (2.0 + 1.0 + 3.0)).abs() < 1e-14);
        assert!(!v.is_psd(1e-12));
        assert!(v.positive_part().unwrap().is_psd(0.0));
        assert!(v.sqrt_blocks().is_err());
        assert!(v.moment(0.0).is_err());
    }

    #[test]
    fn sqrt_blocks_square_back() {
        let mut rng = seeded(8);
        let g = GridSpec::cube(1, 4, 1.0).unwrap();
        let v = MatrixPotential::from_fn(g, 3, |_| random_psd(&mut rng, 3, 2.0)).unwrap();
        for (r, x) in v.sqrt_blocks().unwrap().iter().zip(v.values()) {
            let sq = r.as_matrix() * r.as_matrix();
            assert!((sq - x.as_matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn tensor_identity_blocks() {
        let v = random_potential(2);
        let w = v.tensor_identity(2).unwrap();
        assert_eq!(w.fiber_dim(), 4);
        let mut ev = v.site_eigenvalues();
        ev.extend(v.site_eigenvalues());
        let mut ew = w.site_eigenvalues();
        ev.sort_by(f64::total_cmp);
        ew.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&ew) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
