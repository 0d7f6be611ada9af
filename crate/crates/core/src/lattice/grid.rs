use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// Uniform grid on a box in `d = 1, 2, 3` dimensions. Sites are numbered in
/// row-major order with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub points: Vec<usize>,
    pub h: f64,
    pub boundary: Boundary,
    /// Lower corner of the box; empty means the origin. Dirichlet sites sit at
    /// `origin + (i + 1) h` (the walls are not sites), periodic sites at `origin + i h`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub origin: Vec<f64>,
}

impl GridSpec {
    pub fn new(points: Vec<usize>, h: f64, boundary: Boundary) -> Result<Self> {
        let g = Self {
            d: points.len(),
            points,
            h,
            boundary,
            origin: Vec::new(),
        };
        g.validate()?;
        Ok(g)
    }

    /// Dirichlet cube with `m` points per axis.
    pub fn cube(d: usize, m: usize, h: f64) -> Result<Self> {
        Self::new(vec![m; d], h, Boundary::Dirichlet)
    }

    pub fn with_origin(mut self, origin: Vec<f64>) -> Result<Self> {
        self.origin = origin;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::Config(format!("grid dimension must be 1, 2 or 3, got {}", self.d)));
        }
        if self.points.len() != self.d {
            return Err(Error::Config(format!(
                "grid has d = {} but {} axis lengths",
                self.d,
                self.points.len()
            )));
        }
        if self.points.contains(&0) {
            return Err(Error::Config("every axis needs at least one point".into()));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!("spacing must be positive, got {}", self.h)));
        }
        if !self.origin.is_empty() && self.origin.len() != self.d {
            return Err(Error::Config("origin length must equal d".into()));
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.points.iter().product()
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.d];
        for axis in (0..self.d.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * self.points[axis + 1];
        }
        strides
    }

    pub fn site_index(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.d {
            return Err(Error::Config(format!(
                "site index {index:?} does not have {} components",
                self.d
            )));
        }
        let mut site = 0;
        for (axis, (&i, &m)) in index.iter().zip(&self.points).enumerate() {
            if i >= m {
                return Err(Error::Config(format!(
                    "site index {index:?} out of range on axis {axis}"
                )));
            }
            site = site * m + i;
        }
        Ok(site)
    }

    pub fn site_coords(&self, mut site: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        for axis in (0..self.d).rev() {
            out[axis] = site % self.points[axis];
            site /= self.points[axis];
        }
        out
    }

    pub fn position(&self, site: usize) -> Vec<f64> {
        let offset = match self.boundary {
            Boundary::Dirichlet => 1.0,
            Boundary::Periodic => 0.0,
        };
        self.site_coords(site)
            .iter()
            .enumerate()
            .map(|(axis, &i)| {
                self.origin.get(axis).copied().unwrap_or(0.0) + (i as f64 + offset) * self.h
            })
            .collect()
    }

    /// Side lengths of the box, `(m + 1) h` for Dirichlet and `m h` for periodic axes.
    pub fn extent(&self) -> Vec<f64> {
        let extra = match self.boundary {
            Boundary::Dirichlet => 1.0,
            Boundary::Periodic => 0.0,
        };
        self.points.iter().map(|&m| (m as f64 + extra) * self.h).collect()
    }

    /// Same box sampled with spacing `h / factor`; the extent is unchanged, so
    /// every original site is also a site of the refined grid.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Config("refinement factor must be positive".into()));
        }
        let points = self
            .points
            .iter()
            .map(|&m| match self.boundary {
                Boundary::Dirichlet => (m + 1) * factor - 1,
                Boundary::Periodic => m * factor,
            })
            .collect();
        let mut g = Self::new(points, self.h / factor as f64, self.boundary)?;
        g.origin = self.origin.clone();
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = GridSpec::new(vec![2, 3, 4], 0.5, Boundary::Dirichlet).unwrap();
        assert_eq!(g.sites(), 24);
        for s in 0..g.sites() {
            assert_eq!(g.site_index(&g.site_coords(s)).unwrap(), s);
        }
        assert_eq!(g.site_index(&[1, 2, 3]).unwrap(), 23);
        assert_eq!(g.strides(), vec![12, 4, 1]);
        assert!(g.site_index(&[2, 0, 0]).is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(vec![], 1.0, Boundary::Dirichlet).is_err());
        assert!(GridSpec::new(vec![3; 4], 1.0, Boundary::Dirichlet).is_err());
        assert!(GridSpec::new(vec![3], 0.0, Boundary::Dirichlet).is_err());
        assert!(GridSpec::new(vec![0], 1.0, Boundary::Dirichlet).is_err());
    }

    #[test]
    fn refinement_keeps_extent() {
        let g = GridSpec::cube(1, 3, 1.0).unwrap();
        let r = g.refined(2).unwrap();
        assert_eq!(r.points, vec![7]);
        assert_eq!(r.h, 0.5);
        assert_eq!(r.extent(), g.extent());
        // site 1 of the coarse grid is site 3 of the fine one
        assert_eq!(g.position(1), r.position(3));
        let p = GridSpec::new(vec![4], 1.0, Boundary::Periodic).unwrap();
        assert_eq!(p.refined(3).unwrap().points, vec![12]);
    }
}
