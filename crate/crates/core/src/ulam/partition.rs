use serde::{Deserialize, Serialize};

use crate::dynamics::PhasePoint;
use crate::error::{Error, Result};
use crate::geometry::{Table, TWO_PI};

/// Uniform grid in `(φ, sin θ)` on every obstacle. In these coordinates the
/// Liouville measure is `r_k dφ ds / (4π Σ r_j)`, so each cell of obstacle `k`
/// carries mass `r_k / (Σ r_j · n_phi · n_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    n_phi: usize,
    n_s: usize,
    radii: Vec<f64>,
}

/// One cell: obstacle, `φ` range and `s = sin θ` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBounds {
    pub obstacle: usize,
    pub phi: (f64, f64),
    pub s: (f64, f64),
}

impl Partition {
    pub fn new(table: &Table, n_phi: usize, n_s: usize) -> Result<Self> {
        Partition::from_radii(table.discs().iter().map(|d| d.radius).collect(), n_phi, n_s)
    }

    pub fn from_radii(radii: Vec<f64>, n_phi: usize, n_s: usize) -> Result<Self> {
        if n_phi == 0 || n_s == 0 || radii.is_empty() {
            return Err(Error::InvalidArgument("partition needs at least one cell per obstacle".into()));
        }
        let cells = radii.len() * n_phi * n_s;
        if cells > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("{cells} cells exceed the u32 index range")));
        }
        Ok(Partition { n_phi, n_s, radii })
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn cells_per_obstacle(&self) -> usize {
        self.n_phi * self.n_s
    }

    pub fn n_cells(&self) -> usize {
        self.radii.len() * self.cells_per_obstacle()
    }

    /// The same partition refined by `factor` in each direction.
    pub fn refined(&self, factor: usize) -> Partition {
        Partition {
            n_phi: self.n_phi * factor,
            n_s: self.n_s * factor,
            radii: self.radii.clone(),
        }
    }

    pub fn mass(&self, cell: usize) -> f64 {
        let k = cell / self.cells_per_obstacle();
        let total: f64 = self.radii.iter().sum();
        self.radii[k] / (total * self.cells_per_obstacle() as f64)
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.n_cells()).map(|c| self.mass(c)).collect()
    }

    pub fn cell_of(&self, x: &PhasePoint) -> usize {
        let i_phi = ((x.phi / TWO_PI) * self.n_phi as f64).floor();
        let i_phi = (i_phi.max(0.0) as usize).min(self.n_phi - 1);
        let s = x.theta.sin();
        let i_s = (((s + 1.0) * 0.5) * self.n_s as f64).floor();
        let i_s = (i_s.max(0.0) as usize).min(self.n_s - 1);
        x.obstacle * self.cells_per_obstacle() + i_phi * self.n_s + i_s
    }

    pub fn bounds(&self, cell: usize) -> CellBounds {
        let per = self.cells_per_obstacle();
        let obstacle = cell / per;
        let rest = cell % per;
        let (i_phi, i_s) = (rest / self.n_s, rest % self.n_s);
        let dphi = TWO_PI / self.n_phi as f64;
        let ds = 2.0 / self.n_s as f64;
        CellBounds {
            obstacle,
            phi: (i_phi as f64 * dphi, (i_phi + 1) as f64 * dphi),
            s: (-1.0 + i_s as f64 * ds, -1.0 + (i_s + 1) as f64 * ds),
        }
    }

    /// Draws from `μ` conditioned on the cell.
    pub fn sample_in_cell<R: rand::Rng + ?Sized>(&self, cell: usize, rng: &mut R) -> PhasePoint {
        let b = self.bounds(cell);
        let phi = b.phi.0 + (b.phi.1 - b.phi.0) * rng.random::<f64>();
        let s = b.s.0 + (b.s.1 - b.s.0) * rng.random::<f64>();
        PhasePoint {
            obstacle: b.obstacle,
            phi,
            theta: s.clamp(-1.0, 1.0).asin(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::reference_table;
    use crate::rng;

    #[test]
    fn masses_sum_to_one() {
        let p = Partition::new(&reference_table(), 128, 128).unwrap();
        let total: f64 = p.masses().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(p.n_cells(), 2 * 128 * 128);
        assert!((p.mass(0) / p.mass(p.n_cells() - 1) - 0.4 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn samples_land_in_their_cell() {
        let p = Partition::new(&reference_table(), 16, 8).unwrap();
        let mut r = rng::stream(0, rng::TAG_TEST, 1);
        for cell in 0..p.n_cells() {
            for _ in 0..5 {
                let x = p.sample_in_cell(cell, &mut r);
                assert_eq!(p.cell_of(&x), cell);
            }
        }
        assert!(Partition::new(&reference_table(), 0, 3).is_err());
    }
}
