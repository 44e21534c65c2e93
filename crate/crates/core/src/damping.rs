//! The damping coefficient `a(x)` and its bounds.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh1d;

/// Spatially varying damping coefficient with known pointwise bounds
/// `0 < lower <= a(x) <= upper`.
#[derive(Clone)]
pub struct Damping {
    kind: DampingKind,
    /// Lower bound on `a(x)`.
    pub lower: f64,
    /// Upper bound on `a(x)`.
    pub upper: f64,
}

#[derive(Clone)]
enum DampingKind {
    Constant(f64),
    PiecewiseConstant(Vec<f64>),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Damping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DampingKind::Constant(c) => write!(f, "Damping::Constant({c})"),
            DampingKind::PiecewiseConstant(v) => {
                write!(f, "Damping::PiecewiseConstant({} cells)", v.len())
            }
            DampingKind::Function(_) => write!(
                f,
                "Damping::Function(bounds [{}, {}])",
                self.lower, self.upper
            ),
        }
    }
}

fn check_bounds(lower: f64, upper: f64) -> Result<()> {
    if !(lower.is_finite() && upper.is_finite()) || lower <= 0.0 || upper < lower {
        return Err(Error::InvalidValue(format!(
            "damping bounds must satisfy 0 < lower <= upper and be finite, got [{lower}, {upper}]"
        )));
    }
    Ok(())
}

impl Damping {
    /// Constant damping `a(x) = c` with `c > 0`.
    pub fn constant(c: f64) -> Result<Self> {
        check_bounds(c, c)?;
        Ok(Damping {
            kind: DampingKind::Constant(c),
            lower: c,
            upper: c,
        })
    }

    /// One value per mesh cell; all values must be positive and finite.
    pub fn piecewise_constant(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("piecewise damping needs at least one cell"));
        }
        let lower = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let upper = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        check_bounds(lower, upper)?;
        Ok(Damping {
            kind: DampingKind::PiecewiseConstant(values),
            lower,
            upper,
        })
    }

    /// Arbitrary coefficient given as a callable together with valid
    /// pointwise bounds supplied by the caller.
    pub fn from_fn(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lower: f64,
        upper: f64,
    ) -> Result<Self> {
        check_bounds(lower, upper)?;
        Ok(Damping {
            kind: DampingKind::Function(Arc::new(f)),
            lower,
            upper,
        })
    }

    /// Value at physical point `x`, with `cell` the mesh cell containing it
    /// (needed to disambiguate piecewise-constant coefficients on vertices).
    pub fn eval_in_cell(&self, cell: usize, x: f64) -> f64 {
        match &self.kind {
            DampingKind::Constant(c) => *c,
            DampingKind::PiecewiseConstant(v) => v[cell.min(v.len() - 1)],
            DampingKind::Function(f) => f(x),
        }
    }

    /// Value at physical point `x` on the given mesh.
    pub fn eval(&self, mesh: &Mesh1d, x: f64) -> Result<f64> {
        Ok(self.eval_in_cell(mesh.cell_of(x)?, x))
    }

    /// Checks compatibility with a mesh (piecewise data must have one value
    /// per cell).
    pub fn check_mesh(&self, mesh: &Mesh1d) -> Result<()> {
        if let DampingKind::PiecewiseConstant(v) = &self.kind {
            if v.len() != mesh.n_cells {
                return Err(Error::DimensionMismatch(format!(
                    "piecewise damping has {} values but the mesh has {} cells",
                    v.len(),
                    mesh.n_cells
                )));
            }
        }
        Ok(())
    }

    /// True when the coefficient is constant in space.
    pub fn is_constant(&self) -> bool {
        matches!(self.kind, DampingKind::Constant(_))
    }
}
