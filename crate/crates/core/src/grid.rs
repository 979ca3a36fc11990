use serde::{Deserialize, Serialize};

use crate::error::{HomogError, Result};

/// Uniform periodic sampling of the cell `Y x Z = (-1/2, 1/2)^d x (-1/2, 1/2)`.
///
/// Points are `y_m = -1/2 + m/M` per axis and `tau_k = -1/2 + k/K`; the right
/// endpoint is never duplicated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    dim: usize,
    m: usize,
    k: usize,
}

impl PeriodicGrid {
    pub fn new(dim: usize, m: usize, k: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(HomogError::InvalidGrid(format!(
                "dimension {dim} is not supported (1 or 2)"
            )));
        }
        if m < 4 || !m.is_power_of_two() {
            return Err(HomogError::InvalidGrid(format!(
                "M = {m} must be a power of two and at least 4"
            )));
        }
        if k == 0 {
            return Err(HomogError::InvalidGrid("K must be at least 1".into()));
        }
        Ok(Self { dim, m, k })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Samples per y-axis.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Samples in tau.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of points in one tau slice (`M^d`).
    pub fn slice_len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    /// Number of points on `Y x Z`.
    pub fn len(&self) -> usize {
        self.slice_len() * self.k
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn y_coord(&self, index: usize) -> f64 {
        -0.5 + index as f64 / self.m as f64
    }

    pub fn tau(&self, slice: usize) -> f64 {
        -0.5 + slice as f64 / self.k as f64
    }

    /// Coordinates of the spatial point with flat index `p` (axis 0 slowest).
    pub fn y_point(&self, p: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.y_coord(p), 0.0],
            _ => [self.y_coord(p / self.m), self.y_coord(p % self.m)],
        }
    }

    /// Quadrature weight of each point on `Y x Z` (trapezoid on a periodic grid).
    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(PeriodicGrid::new(1, 6, 1).is_err());
        assert!(PeriodicGrid::new(1, 2, 1).is_err());
        assert!(PeriodicGrid::new(1, 8, 0).is_err());
        assert!(PeriodicGrid::new(3, 8, 1).is_err());
        assert!(PeriodicGrid::new(2, 8, 3).is_ok());
    }

    #[test]
    fn points_have_no_duplicate_endpoint() {
        let g = PeriodicGrid::new(2, 8, 4).unwrap();
        assert_eq!(g.y_coord(0), -0.5);
        assert_eq!(g.y_coord(7), 0.375);
        assert_eq!(g.tau(3), 0.25);
        assert_eq!(g.y_point(8 * 3 + 5), [g.y_coord(3), g.y_coord(5)]);
        assert_eq!(g.len(), 256);
    }
}
