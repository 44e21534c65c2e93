//! Direct solvers for the stationary saddle-point problem
//!
//! ```text
//!   A u - B' p = f,      B u = g,
//! ```
//!
//! where `A` is the damping-weighted mass matrix on the continuous space and
//! `B` the coupling matrix. The boundary condition on `p` is carried weakly
//! by the integration-by-parts structure of the coupling term; the broken
//! space has no boundary degrees of freedom to constrain.

use crate::assembly::Operators;
use crate::error::{Error, Result};
use crate::linalg::DenseCholesky;
use crate::space::{QFunction, VFunction};

/// Which factorization solves the saddle-point system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StationaryMethod {
    /// Banded LU of the full indefinite block matrix.
    Direct,
    /// Schur complement on the flux unknown: eliminate `u` through the
    /// positive definite damping matrix and solve `B A^{-1} B' p = B A^{-1} f - g`.
    SchurDamping,
}

/// Solution of the stationary problem with its algebraic residuals.
#[derive(Debug, Clone)]
pub struct StationarySolution {
    /// Displacement-like unknown.
    pub u: VFunction,
    /// Flux-like unknown.
    pub p: QFunction,
    /// Euclidean norm of `A u - B' p - f`.
    pub residual_u: f64,
    /// Euclidean norm of `B u - g`.
    pub residual_q: f64,
}

fn euclidean(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves the stationary saddle-point problem for the given load vectors.
pub fn solve_stationary(
    ops: &Operators,
    f: &[f64],
    g: &[f64],
    method: StationaryMethod,
) -> Result<StationarySolution> {
    if f.len() != ops.dim_v() || g.len() != ops.dim_q() {
        return Err(Error::DimensionMismatch(format!(
            "load lengths ({}, {}) do not match operators ({}, {})",
            f.len(),
            g.len(),
            ops.dim_v(),
            ops.dim_q()
        )));
    }
    if !f.iter().chain(g.iter()).all(|v| v.is_finite()) {
        return Err(Error::InvalidValue("non-finite load vector".into()));
    }

    let (u, p) = match method {
        StationaryMethod::Direct => {
            let mat = ops.assemble_coupled(0.0, 1.0, -1.0, 1.0, 0.0)?;
            let lu = mat.factor_lu()?;
            let map = ops.mono_map();
            let mut packed = vec![0.0; map.dim()];
            map.scatter(f, g, &mut packed);
            lu.solve_in_place(&mut packed);
            let mut u = vec![0.0; ops.dim_v()];
            let mut p = vec![0.0; ops.dim_q()];
            map.gather(&packed, &mut u, &mut p);
            (u, p)
        }
        StationaryMethod::SchurDamping => {
            let nq = ops.dim_q();
            let chol_a = ops.damping_v.factor_cholesky()?;
            let a_inv_f = chol_a.solve(f);
            let mut b_ainv_f = vec![0.0; nq];
            ops.apply_coupling(&a_inv_f, &mut b_ainv_f);

            let mut schur = vec![0.0; nq * nq];
            let mut unit = vec![0.0; nq];
            let mut bt = vec![0.0; ops.dim_v()];
            let mut col = vec![0.0; nq];
            for j in 0..nq {
                unit.fill(0.0);
                unit[j] = 1.0;
                ops.apply_coupling_t(&unit, &mut bt);
                chol_a.solve_in_place(&mut bt);
                ops.apply_coupling(&bt, &mut col);
                for i in 0..nq {
                    schur[i * nq + j] = col[i];
                }
            }
            let schur_chol = DenseCholesky::new(&schur, nq)?;
            let mut p: Vec<f64> = (0..nq).map(|i| g[i] - b_ainv_f[i]).collect();
            schur_chol.solve_in_place(&mut p);

            let mut rhs_u = vec![0.0; ops.dim_v()];
            ops.apply_coupling_t(&p, &mut rhs_u);
            for (r, &fv) in rhs_u.iter_mut().zip(f.iter()) {
                *r += fv;
            }
            chol_a.solve_in_place(&mut rhs_u);
            (rhs_u, p)
        }
    };

    let mut res_u = vec![0.0; ops.dim_v()];
    ops.damping_v.matvec(&u, &mut res_u);
    let mut bt_p = vec![0.0; ops.dim_v()];
    ops.apply_coupling_t(&p, &mut bt_p);
    for i in 0..res_u.len() {
        res_u[i] -= bt_p[i] + f[i];
    }
    let mut res_q = vec![0.0; ops.dim_q()];
    ops.apply_coupling(&u, &mut res_q);
    for (r, &gv) in res_q.iter_mut().zip(g.iter()) {
        *r -= gv;
    }

    Ok(StationarySolution {
        u: VFunction::new(ops.space_v.clone(), u)?,
        p: QFunction::new(ops.space_q.clone(), p)?,
        residual_u: euclidean(&res_u),
        residual_q: euclidean(&res_q),
    })
}
