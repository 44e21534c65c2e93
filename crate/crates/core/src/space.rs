//! Lagrange finite element spaces on uniform meshes.
//!
//! The mixed pair consists of continuous piecewise polynomials of degree
//! `k + 1` (the displacement space) and discontinuous piecewise polynomials
//! of degree `k` (the flux space). Both use equispaced Lagrange nodes on the
//! reference cell; the degree-zero broken space uses the midpoint node.

use crate::error::{Error, Result};
use crate::mesh::Mesh1d;
use crate::quadrature::QuadRule;

/// Largest supported coupling index `k`; the continuous space then has
/// degree `k + 1`.
pub const MAX_DEGREE_K: usize = 4;

/// Scalar Lagrange basis on the reference cell `[0, 1]` with equispaced
/// nodes (midpoint node for degree zero).
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    /// Polynomial degree.
    pub degree: usize,
    /// Interpolation nodes in `[0, 1]`.
    pub nodes: Vec<f64>,
}

impl LagrangeBasis {
    /// Equispaced-node basis of the given degree.
    pub fn new(degree: usize) -> Self {
        let nodes = if degree == 0 {
            vec![0.5]
        } else {
            (0..=degree).map(|j| j as f64 / degree as f64).collect()
        };
        LagrangeBasis { degree, nodes }
    }

    /// Number of basis functions (`degree + 1`).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True only for an empty basis, which cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of basis function `i` at reference coordinate `r`.
    pub fn eval(&self, i: usize, r: f64) -> f64 {
        let xi = self.nodes[i];
        let mut v = 1.0;
        for (m, &xm) in self.nodes.iter().enumerate() {
            if m != i {
                v *= (r - xm) / (xi - xm);
            }
        }
        v
    }

    /// Derivative of basis function `i` at reference coordinate `r`.
    pub fn eval_deriv(&self, i: usize, r: f64) -> f64 {
        let xi = self.nodes[i];
        let mut s = 0.0;
        for (l, &xl) in self.nodes.iter().enumerate() {
            if l == i {
                continue;
            }
            let mut v = 1.0 / (xi - xl);
            for (m, &xm) in self.nodes.iter().enumerate() {
                if m != i && m != l {
                    v *= (r - xm) / (xi - xm);
                }
            }
            s += v;
        }
        s
    }

    /// Values and derivatives of all basis functions at the rule's points,
    /// flattened as `[i * n_points + q]`.
    pub fn tabulate(&self, rule: &QuadRule) -> BasisTable {
        let nb = self.len();
        let np = rule.len();
        let mut values = vec![0.0; nb * np];
        let mut derivs = vec![0.0; nb * np];
        for i in 0..nb {
            for (q, &r) in rule.points.iter().enumerate() {
                values[i * np + q] = self.eval(i, r);
                derivs[i * np + q] = self.eval_deriv(i, r);
            }
        }
        BasisTable {
            n_basis: nb,
            n_points: np,
            values,
            derivs,
        }
    }
}

/// Tabulated basis values at a fixed set of reference points.
#[derive(Debug, Clone)]
pub struct BasisTable {
    /// Number of basis functions.
    pub n_basis: usize,
    /// Number of evaluation points.
    pub n_points: usize,
    /// `values[i * n_points + q]` = value of basis `i` at point `q`.
    pub values: Vec<f64>,
    /// `derivs[i * n_points + q]` = reference derivative of basis `i` at `q`.
    pub derivs: Vec<f64>,
}

impl BasisTable {
    /// Value of basis `i` at tabulated point `q`.
    #[inline]
    pub fn value(&self, i: usize, q: usize) -> f64 {
        self.values[i * self.n_points + q]
    }

    /// Reference derivative of basis `i` at tabulated point `q`.
    #[inline]
    pub fn deriv(&self, i: usize, q: usize) -> f64 {
        self.derivs[i * self.n_points + q]
    }
}

fn check_degree(k: usize) -> Result<()> {
    if k > MAX_DEGREE_K {
        return Err(Error::invalid(format!(
            "degree index k={k} exceeds the supported maximum {MAX_DEGREE_K}"
        )));
    }
    Ok(())
}

/// Continuous piecewise-polynomial space of degree `k + 1` on a uniform
/// mesh, with equispaced Lagrange nodes shared across cell interfaces.
#[derive(Debug, Clone)]
pub struct SpaceV {
    /// Underlying mesh.
    pub mesh: Mesh1d,
    /// Coupling index; the polynomial degree is `k + 1`.
    pub k: usize,
    /// Reference basis of degree `k + 1`.
    pub basis: LagrangeBasis,
}

impl SpaceV {
    /// Continuous space of degree `k + 1` on `mesh`.
    pub fn new(mesh: Mesh1d, k: usize) -> Result<Self> {
        check_degree(k)?;
        Ok(SpaceV {
            mesh,
            k,
            basis: LagrangeBasis::new(k + 1),
        })
    }

    /// Global dimension `n_cells (k + 1) + 1`.
    pub fn dim(&self) -> usize {
        self.mesh.n_cells * (self.k + 1) + 1
    }

    /// Number of local degrees of freedom per cell (`k + 2`).
    pub fn dofs_per_cell(&self) -> usize {
        self.k + 2
    }

    /// Global index of local degree of freedom `j` in cell `c`.
    #[inline]
    pub fn cell_dof(&self, c: usize, j: usize) -> usize {
        c * (self.k + 1) + j
    }

    /// Physical coordinate of global node `g`.
    pub fn node_x(&self, g: usize) -> f64 {
        g as f64 * self.mesh.h / (self.k + 1) as f64
    }
}

/// Discontinuous piecewise-polynomial space of degree `k` on a uniform mesh.
#[derive(Debug, Clone)]
pub struct SpaceQ {
    /// Underlying mesh.
    pub mesh: Mesh1d,
    /// Polynomial degree per cell.
    pub k: usize,
    /// Reference basis of degree `k`.
    pub basis: LagrangeBasis,
}

impl SpaceQ {
    /// Broken space of degree `k` on `mesh`.
    pub fn new(mesh: Mesh1d, k: usize) -> Result<Self> {
        check_degree(k)?;
        Ok(SpaceQ {
            mesh,
            k,
            basis: LagrangeBasis::new(k),
        })
    }

    /// Global dimension `n_cells (k + 1)`.
    pub fn dim(&self) -> usize {
        self.mesh.n_cells * (self.k + 1)
    }

    /// Number of local degrees of freedom per cell (`k + 1`).
    pub fn dofs_per_cell(&self) -> usize {
        self.k + 1
    }

    /// Global index of local degree of freedom `j` in cell `c`.
    #[inline]
    pub fn cell_dof(&self, c: usize, j: usize) -> usize {
        c * (self.k + 1) + j
    }
}

/// Function in the continuous space: a coefficient vector over its nodes.
#[derive(Debug, Clone)]
pub struct VFunction {
    /// The space the coefficients refer to.
    pub space: SpaceV,
    /// Nodal coefficients, length `space.dim()`.
    pub coeffs: Vec<f64>,
}

impl VFunction {
    /// Wraps coefficients after checking the length.
    pub fn new(space: SpaceV, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::DimensionMismatch(format!(
                "continuous-space function needs {} coefficients, got {}",
                space.dim(),
                coeffs.len()
            )));
        }
        Ok(VFunction { space, coeffs })
    }

    /// Point value at `x` in `[0, 1]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let c = self.space.mesh.cell_of(x)?;
        let r = self.space.mesh.to_reference(c, x);
        let mut s = 0.0;
        for j in 0..self.space.dofs_per_cell() {
            s += self.coeffs[self.space.cell_dof(c, j)] * self.space.basis.eval(j, r);
        }
        Ok(s)
    }

    /// Derivative value at `x`; on interior vertices the right-cell branch
    /// is used (the derivative may jump there).
    pub fn eval_deriv(&self, x: f64) -> Result<f64> {
        let c = self.space.mesh.cell_of(x)?;
        let r = self.space.mesh.to_reference(c, x);
        let mut s = 0.0;
        for j in 0..self.space.dofs_per_cell() {
            s += self.coeffs[self.space.cell_dof(c, j)] * self.space.basis.eval_deriv(j, r);
        }
        Ok(s / self.space.mesh.h)
    }
}

/// Function in the broken space: a coefficient vector over per-cell nodes.
#[derive(Debug, Clone)]
pub struct QFunction {
    /// The space the coefficients refer to.
    pub space: SpaceQ,
    /// Nodal coefficients, length `space.dim()`.
    pub coeffs: Vec<f64>,
}

impl QFunction {
    /// Wraps coefficients after checking the length.
    pub fn new(space: SpaceQ, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::DimensionMismatch(format!(
                "broken-space function needs {} coefficients, got {}",
                space.dim(),
                coeffs.len()
            )));
        }
        Ok(QFunction { space, coeffs })
    }

    /// Point value at `x`; on interior vertices the right-cell branch is
    /// used (broken functions may jump there).
    pub fn eval(&self, x: f64) -> Result<f64> {
        let c = self.space.mesh.cell_of(x)?;
        let r = self.space.mesh.to_reference(c, x);
        let mut s = 0.0;
        for j in 0..self.space.dofs_per_cell() {
            s += self.coeffs[self.space.cell_dof(c, j)] * self.space.basis.eval(j, r);
        }
        Ok(s)
    }
}
