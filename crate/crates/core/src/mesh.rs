//! Uniform meshes of the unit interval.

use crate::error::{Error, Result};

/// Uniform partition of `[0, 1]` into `n_cells` cells of width `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1d {
    /// Number of cells.
    pub n_cells: usize,
    /// Cell width `1 / n_cells`.
    pub h: f64,
}

impl Mesh1d {
    /// Uniform mesh with `n_cells >= 1` cells.
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::invalid("mesh needs at least one cell"));
        }
        Ok(Mesh1d {
            n_cells,
            h: 1.0 / n_cells as f64,
        })
    }

    /// Left endpoint of cell `c`.
    #[inline]
    pub fn x_left(&self, c: usize) -> f64 {
        c as f64 * self.h
    }

    /// Index of the cell containing `x`; points on interior vertices belong
    /// to the cell on their right, and `x = 1` to the last cell.
    pub fn cell_of(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidValue(format!(
                "point {x} outside the unit interval"
            )));
        }
        Ok(((x * self.n_cells as f64) as usize).min(self.n_cells - 1))
    }

    /// Maps `x` in cell `c` to the reference coordinate on `[0, 1]`.
    #[inline]
    pub fn to_reference(&self, c: usize, x: f64) -> f64 {
        (x - self.x_left(c)) / self.h
    }

    /// Maps the reference coordinate `r` of cell `c` to a physical point.
    #[inline]
    pub fn from_reference(&self, c: usize, r: f64) -> f64 {
        self.x_left(c) + r * self.h
    }
}
