//! Assembly of the discrete operators of the mixed pair.
//!
//! For the continuous space V (degree k+1) and the broken space Q (degree k)
//! on a uniform mesh, this module builds
//!
//! - the mass matrix `M_V` and the weighted damping matrix `A` (both
//!   symmetric banded with half-bandwidth k+1),
//! - the broken mass matrix `M_Q` (block diagonal with one repeated block),
//! - the coupling matrix `B` with entries `(d v_j / dx, q_i)`, stored as a
//!   single per-cell block because the mesh is uniform,
//!
//! along with load vectors, L2 projections onto both spaces, norms, and an
//! interleaved cell-major ordering that makes the coupled two-by-two block
//! systems banded with half-bandwidth 2k+2.

use crate::damping::Damping;
use crate::error::Result;
use crate::linalg::{Banded, BlockDiag};
use crate::mesh::Mesh1d;
use crate::quadrature::{gauss_rule, QuadRule};
use crate::space::{QFunction, SpaceQ, SpaceV, VFunction};

/// Extra quadrature points (beyond the assembly rule) used for load vectors
/// and projections of general functions.
pub const LOAD_EXTRA_POINTS: usize = 4;

/// Extra quadrature points used when measuring errors against a smooth
/// reference function.
pub const ERROR_EXTRA_POINTS: usize = 2;

/// Per-cell coupling block of `B`: entries `(d v_j / dx, q_r)` restricted to
/// one cell. On a uniform mesh the block is the same in every cell and does
/// not depend on the cell width.
#[derive(Debug, Clone)]
pub struct CellCoupling {
    /// Rows: broken-space degrees of freedom per cell (k+1).
    pub rows: usize,
    /// Columns: continuous-space degrees of freedom per cell (k+2).
    pub cols: usize,
    block: Vec<f64>,
}

impl CellCoupling {
    /// Entry `(r, j)` of the repeated block.
    #[inline]
    pub fn entry(&self, r: usize, j: usize) -> f64 {
        self.block[r * self.cols + j]
    }
}

/// Assembled operators of the mixed discretization on one mesh.
#[derive(Debug, Clone)]
pub struct Operators {
    /// Continuous space for the displacement-like unknown.
    pub space_v: SpaceV,
    /// Broken space for the flux-like unknown.
    pub space_q: SpaceQ,
    /// Damping coefficient used for `A`.
    pub damping: Damping,
    /// Mass matrix of V (symmetric, half-bandwidth k+1).
    pub mass_v: Banded,
    /// Damping-weighted mass matrix of V (symmetric, half-bandwidth k+1).
    pub damping_v: Banded,
    /// Mass matrix of Q (block diagonal, one repeated block).
    pub mass_q: BlockDiag,
    /// Coupling block of `B` (same in every cell).
    pub coupling: CellCoupling,
}

/// Assembles all operators for degree index `k` on `mesh`.
pub fn assemble(mesh: Mesh1d, k: usize, damping: Damping) -> Result<Operators> {
    damping.check_mesh(&mesh)?;
    let space_v = SpaceV::new(mesh, k)?;
    let space_q = SpaceQ::new(mesh, k)?;
    let rule = gauss_rule(k + 2)?;
    let tab_v = space_v.basis.tabulate(&rule);
    let tab_q = space_q.basis.tabulate(&rule);
    let h = mesh.h;
    let nv_loc = space_v.dofs_per_cell();
    let nq_loc = space_q.dofs_per_cell();

    let mut mass_v = Banded::new(space_v.dim(), k + 1, k + 1)?;
    let mut damping_v = Banded::new(space_v.dim(), k + 1, k + 1)?;
    for c in 0..mesh.n_cells {
        for (q, (&r, &w)) in rule.points.iter().zip(rule.weights.iter()).enumerate() {
            let x = mesh.from_reference(c, r);
            let a_val = damping.eval_in_cell(c, x);
            for i in 0..nv_loc {
                let gi = space_v.cell_dof(c, i);
                let vi = tab_v.value(i, q);
                for j in 0..nv_loc {
                    let gj = space_v.cell_dof(c, j);
                    let vij = h * w * vi * tab_v.value(j, q);
                    mass_v.add(gi, gj, vij)?;
                    damping_v.add(gi, gj, a_val * vij)?;
                }
            }
        }
    }

    let mut mq_block = vec![0.0; nq_loc * nq_loc];
    let mut b_block = vec![0.0; nq_loc * nv_loc];
    for (q, (_, &w)) in rule.points.iter().zip(rule.weights.iter()).enumerate() {
        for r in 0..nq_loc {
            let qr = tab_q.value(r, q);
            for s in 0..nq_loc {
                mq_block[r * nq_loc + s] += h * w * qr * tab_q.value(s, q);
            }
            for j in 0..nv_loc {
                b_block[r * nv_loc + j] += w * qr * tab_v.deriv(j, q);
            }
        }
    }
    let mass_q = BlockDiag::new(mesh.n_cells, nq_loc, mq_block)?;
    let coupling = CellCoupling {
        rows: nq_loc,
        cols: nv_loc,
        block: b_block,
    };

    Ok(Operators {
        space_v,
        space_q,
        damping,
        mass_v,
        damping_v,
        mass_q,
        coupling,
    })
}

impl Operators {
    /// Dimension of the continuous space.
    pub fn dim_v(&self) -> usize {
        self.space_v.dim()
    }

    /// Dimension of the broken space.
    pub fn dim_q(&self) -> usize {
        self.space_q.dim()
    }

    /// Degree index `k`.
    pub fn k(&self) -> usize {
        self.space_v.k
    }

    /// Underlying mesh.
    pub fn mesh(&self) -> Mesh1d {
        self.space_v.mesh
    }

    fn rule_with_extra(&self, extra: usize) -> Result<QuadRule> {
        gauss_rule((self.k() + 2 + extra).min(10))
    }

    /// `y = B u` (flux test functions against `du/dx`).
    pub fn apply_coupling(&self, u: &[f64], y: &mut [f64]) {
        assert_eq!(u.len(), self.dim_v(), "coupling input length");
        assert_eq!(y.len(), self.dim_q(), "coupling output length");
        let b = &self.coupling;
        for c in 0..self.mesh().n_cells {
            for r in 0..b.rows {
                let mut s = 0.0;
                for j in 0..b.cols {
                    s += b.entry(r, j) * u[self.space_v.cell_dof(c, j)];
                }
                y[self.space_q.cell_dof(c, r)] = s;
            }
        }
    }

    /// `y = B' p`.
    pub fn apply_coupling_t(&self, p: &[f64], y: &mut [f64]) {
        assert_eq!(p.len(), self.dim_q(), "coupling input length");
        assert_eq!(y.len(), self.dim_v(), "coupling output length");
        let b = &self.coupling;
        y.fill(0.0);
        for c in 0..self.mesh().n_cells {
            for r in 0..b.rows {
                let pr = p[self.space_q.cell_dof(c, r)];
                for j in 0..b.cols {
                    y[self.space_v.cell_dof(c, j)] += b.entry(r, j) * pr;
                }
            }
        }
    }

    /// Load vector `(f, v_i)` over the continuous space.
    pub fn load_v(&self, f: impl Fn(f64) -> f64, extra: usize) -> Result<Vec<f64>> {
        let rule = self.rule_with_extra(extra)?;
        let tab = self.space_v.basis.tabulate(&rule);
        let mesh = self.mesh();
        let mut out = vec![0.0; self.dim_v()];
        for c in 0..mesh.n_cells {
            for (q, (&r, &w)) in rule.points.iter().zip(rule.weights.iter()).enumerate() {
                let fw = mesh.h * w * f(mesh.from_reference(c, r));
                for j in 0..self.space_v.dofs_per_cell() {
                    out[self.space_v.cell_dof(c, j)] += fw * tab.value(j, q);
                }
            }
        }
        Ok(out)
    }

    /// Load vector `(g, q_i)` over the broken space.
    pub fn load_q(&self, g: impl Fn(f64) -> f64, extra: usize) -> Result<Vec<f64>> {
        let rule = self.rule_with_extra(extra)?;
        let tab = self.space_q.basis.tabulate(&rule);
        let mesh = self.mesh();
        let mut out = vec![0.0; self.dim_q()];
        for c in 0..mesh.n_cells {
            for (q, (&r, &w)) in rule.points.iter().zip(rule.weights.iter()).enumerate() {
                let gw = mesh.h * w * g(mesh.from_reference(c, r));
                for j in 0..self.space_q.dofs_per_cell() {
                    out[self.space_q.cell_dof(c, j)] += gw * tab.value(j, q);
                }
            }
        }
        Ok(out)
    }

    /// L2 projection onto the continuous space.
    pub fn project_v(&self, f: impl Fn(f64) -> f64) -> Result<VFunction> {
        let rhs = self.load_v(f, LOAD_EXTRA_POINTS)?;
        let chol = self.mass_v.factor_cholesky()?;
        VFunction::new(self.space_v.clone(), chol.solve(&rhs))
    }

    /// L2 projection onto the broken space.
    pub fn project_q(&self, g: impl Fn(f64) -> f64) -> Result<QFunction> {
        let mut rhs = self.load_q(g, LOAD_EXTRA_POINTS)?;
        self.mass_q.solve_in_place(&mut rhs);
        QFunction::new(self.space_q.clone(), rhs)
    }

    /// Mass norm `sqrt(u' M_V u)` of continuous-space coefficients.
    pub fn norm_v(&self, u: &[f64]) -> f64 {
        self.mass_v.bilinear(u, u).max(0.0).sqrt()
    }

    /// Mass norm `sqrt(p' M_Q p)` of broken-space coefficients.
    pub fn norm_q(&self, p: &[f64]) -> f64 {
        self.mass_q.bilinear(p, p).max(0.0).sqrt()
    }

    /// Mass inner product on the continuous space.
    pub fn inner_v(&self, u: &[f64], w: &[f64]) -> f64 {
        self.mass_v.bilinear(u, w)
    }

    /// Mass inner product on the broken space.
    pub fn inner_q(&self, p: &[f64], w: &[f64]) -> f64 {
        self.mass_q.bilinear(p, w)
    }

    /// L2 distance between continuous-space coefficients and a reference
    /// function, by cellwise quadrature.
    pub fn error_v(&self, u: &[f64], exact: impl Fn(f64) -> f64) -> Result<f64> {
        assert_eq!(u.len(), self.dim_v(), "error input length");
        let rule = self.rule_with_extra(ERROR_EXTRA_POINTS)?;
        let tab = self.space_v.basis.tabulate(&rule);
        let mesh = self.mesh();
        let mut s = 0.0;
        for c in 0..mesh.n_cells {
            for (q, (&r, &w)) in rule.points.iter().zip(rule.weights.iter()).enumerate() {
                let mut uh = 0.0;
                for j in 0..self.space_v.dofs_per_cell() {
                    uh += u[self.space_v.cell_dof(c, j)] * tab.value(j, q);
                }
                let d = uh - exact(mesh.from_reference(c, r));
                s += mesh.h * w * d * d;
            }
        }
        Ok(s.sqrt())
    }

    /// L2 distance between broken-space coefficients and a reference
    /// function, by cellwise quadrature.
    pub fn error_q(&self, p: &[f64], exact: impl Fn(f64) -> f64) -> Result<f64> {
        assert_eq!(p.len(), self.dim_q(), "error input length");
        let rule = self.rule_with_extra(ERROR_EXTRA_POINTS)?;
        let tab = self.space_q.basis.tabulate(&rule);
        let mesh = self.mesh();
        let mut s = 0.0;
        for c in 0..mesh.n_cells {
            for (q, (&r, &w)) in rule.points.iter().zip(rule.weights.iter()).enumerate() {
                let mut ph = 0.0;
                for j in 0..self.space_q.dofs_per_cell() {
                    ph += p[self.space_q.cell_dof(c, j)] * tab.value(j, q);
                }
                let d = ph - exact(mesh.from_reference(c, r));
                s += mesh.h * w * d * d;
            }
        }
        Ok(s.sqrt())
    }

    /// Interleaved ordering of the coupled unknowns.
    pub fn mono_map(&self) -> MonoMap {
        MonoMap {
            k: self.k(),
            n_cells: self.mesh().n_cells,
        }
    }

    /// Assembles the banded coupled matrix
    /// `[[c_mv M_V + c_a A, c_bt B'], [c_b B, c_mq M_Q]]`
    /// in the interleaved ordering (half-bandwidth 2k+2).
    pub fn assemble_coupled(
        &self,
        c_mv: f64,
        c_a: f64,
        c_bt: f64,
        c_b: f64,
        c_mq: f64,
    ) -> Result<Banded> {
        let map = self.mono_map();
        let hb = map.half_bandwidth();
        let mut m = Banded::new(map.dim(), hb, hb)?;
        for i in 0..self.dim_v() {
            let (lo, hi) = self.mass_v.row_range(i);
            for j in lo..hi {
                let v = c_mv * self.mass_v.get(i, j) + c_a * self.damping_v.get(i, j);
                m.add(map.v_index(i), map.v_index(j), v)?;
            }
        }
        let b = &self.coupling;
        for c in 0..self.mesh().n_cells {
            for r in 0..b.rows {
                let qi = map.q_index(self.space_q.cell_dof(c, r));
                for j in 0..b.cols {
                    let vi = map.v_index(self.space_v.cell_dof(c, j));
                    let e = b.entry(r, j);
                    m.add(qi, vi, c_b * e)?;
                    m.add(vi, qi, c_bt * e)?;
                }
                for s in 0..b.rows {
                    let qj = map.q_index(self.space_q.cell_dof(c, s));
                    m.add(qi, qj, c_mq * self.mass_q.block_entry(r, s))?;
                }
            }
        }
        Ok(m)
    }

    /// Assembles the symmetric banded matrix
    /// `c_mv M_V + c_a A + c_btb B' M_Q^{-1} B`
    /// on the continuous space alone (half-bandwidth k+1).
    pub fn assemble_schur_v(&self, c_mv: f64, c_a: f64, c_btb: f64) -> Result<Banded> {
        let nv_loc = self.space_v.dofs_per_cell();
        let nq_loc = self.space_q.dofs_per_cell();
        let b = &self.coupling;
        // Local block B_c' (M_Q block)^{-1} B_c, identical for every cell up
        // to the 1/h factor carried by the mass block.
        let mut minv_b = vec![0.0; nq_loc * nv_loc];
        for j in 0..nv_loc {
            let mut col: Vec<f64> = (0..nq_loc).map(|r| b.entry(r, j)).collect();
            let mut padded = vec![0.0; self.mass_q.dim()];
            padded[..nq_loc].copy_from_slice(&col);
            self.mass_q.solve_in_place(&mut padded);
            col.copy_from_slice(&padded[..nq_loc]);
            for r in 0..nq_loc {
                minv_b[r * nv_loc + j] = col[r];
            }
        }
        let mut local = vec![0.0; nv_loc * nv_loc];
        for i in 0..nv_loc {
            for j in 0..nv_loc {
                let mut s = 0.0;
                for r in 0..nq_loc {
                    s += b.entry(r, i) * minv_b[r * nv_loc + j];
                }
                local[i * nv_loc + j] = s;
            }
        }

        let mut m = Banded::new(self.dim_v(), self.k() + 1, self.k() + 1)?;
        for i in 0..self.dim_v() {
            let (lo, hi) = self.mass_v.row_range(i);
            for j in lo..hi {
                m.add(
                    i,
                    j,
                    c_mv * self.mass_v.get(i, j) + c_a * self.damping_v.get(i, j),
                )?;
            }
        }
        for c in 0..self.mesh().n_cells {
            for i in 0..nv_loc {
                let gi = self.space_v.cell_dof(c, i);
                for j in 0..nv_loc {
                    let gj = self.space_v.cell_dof(c, j);
                    m.add(gi, gj, c_btb * local[i * nv_loc + j])?;
                }
            }
        }
        Ok(m)
    }
}

/// Interleaved cell-major ordering of the coupled vector `(u, p)`: cell `c`
/// contributes its k+1 leading continuous nodes, then its k+1 broken nodes;
/// the final continuous node of the mesh comes last.
#[derive(Debug, Clone, Copy)]
pub struct MonoMap {
    /// Degree index `k`.
    pub k: usize,
    /// Number of mesh cells.
    pub n_cells: usize,
}

impl MonoMap {
    /// Total coupled dimension `dim V + dim Q`.
    pub fn dim(&self) -> usize {
        self.n_cells * (2 * self.k + 2) + 1
    }

    /// Half-bandwidth of coupled matrices in this ordering.
    pub fn half_bandwidth(&self) -> usize {
        2 * self.k + 2
    }

    /// Interleaved position of continuous-space degree of freedom `g`.
    #[inline]
    pub fn v_index(&self, g: usize) -> usize {
        let per = self.k + 1;
        if g == self.n_cells * per {
            self.n_cells * (2 * per)
        } else {
            (g / per) * (2 * per) + g % per
        }
    }

    /// Interleaved position of broken-space degree of freedom `g`.
    #[inline]
    pub fn q_index(&self, g: usize) -> usize {
        let per = self.k + 1;
        (g / per) * (2 * per) + per + g % per
    }

    /// Packs `(u, p)` into one interleaved vector.
    pub fn scatter(&self, u: &[f64], p: &[f64], out: &mut [f64]) {
        assert_eq!(out.len(), self.dim(), "scatter output length");
        for (g, &v) in u.iter().enumerate() {
            out[self.v_index(g)] = v;
        }
        for (g, &v) in p.iter().enumerate() {
            out[self.q_index(g)] = v;
        }
    }

    /// Unpacks an interleaved vector into `(u, p)`.
    pub fn gather(&self, packed: &[f64], u: &mut [f64], p: &mut [f64]) {
        assert_eq!(packed.len(), self.dim(), "gather input length");
        for (g, v) in u.iter_mut().enumerate() {
            *v = packed[self.v_index(g)];
        }
        for (g, v) in p.iter_mut().enumerate() {
            *v = packed[self.q_index(g)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ops(n: usize, k: usize, a: f64) -> Operators {
        assemble(Mesh1d::new(n).unwrap(), k, Damping::constant(a).unwrap()).unwrap()
    }

    #[test]
    fn linear_mass_matrix_matches_hand_values() {
        let o = ops(2, 0, 1.0);
        let h = 0.5;
        let expect = [
            [h / 3.0, h / 6.0, 0.0],
            [h / 6.0, 2.0 * h / 3.0, h / 6.0],
            [0.0, h / 6.0, h / 3.0],
        ];
        for (i, row) in expect.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!((o.mass_v.get(i, j) - e).abs() < 1e-15, "({i},{j})");
            }
        }
        assert!(o.mass_v.asymmetry() < 1e-15);
    }

    #[test]
    fn unit_damping_equals_mass() {
        let o = ops(5, 1, 1.0);
        for i in 0..o.dim_v() {
            let (lo, hi) = o.mass_v.row_range(i);
            for j in lo..hi {
                assert!((o.mass_v.get(i, j) - o.damping_v.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn quadratic_mass_block_matches_closed_form() {
        let o = ops(3, 1, 2.0);
        let h = 1.0 / 3.0;
        let scale = h / 30.0;
        // Local quadratic mass block is (h/30) [[4, 2, -1], [2, 16, 2],
        // [-1, 2, 4]]; the trailing diagonal entry doubles at the shared
        // vertex node.
        let expect = [[4.0, 2.0, -1.0], [2.0, 16.0, 2.0], [-1.0, 2.0, 8.0]];
        for (i, row) in expect.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!((o.mass_v.get(i, j) - scale * e).abs() < 1e-15, "({i},{j})");
            }
        }
        for i in 0..o.dim_v() {
            let (lo, hi) = o.damping_v.row_range(i);
            for j in lo..hi {
                assert!((o.damping_v.get(i, j) - 2.0 * o.mass_v.get(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn broken_mass_block_matches_closed_form() {
        let o = ops(4, 1, 1.0);
        let h = 0.25;
        assert_eq!(o.mass_q.block_size, 2);
        assert!((o.mass_q.block_entry(0, 0) - h / 3.0).abs() < 1e-15);
        assert!((o.mass_q.block_entry(0, 1) - h / 6.0).abs() < 1e-15);
        assert!((o.mass_q.block_entry(1, 1) - h / 3.0).abs() < 1e-15);
        let o0 = ops(4, 0, 1.0);
        assert!((o0.mass_q.block_entry(0, 0) - h).abs() < 1e-15);
    }

    #[test]
    fn coupling_block_matches_closed_form() {
        let o = ops(2, 0, 1.0);
        assert_eq!(o.coupling.rows, 1);
        assert_eq!(o.coupling.cols, 2);
        assert!((o.coupling.entry(0, 0) + 1.0).abs() < 1e-14);
        assert!((o.coupling.entry(0, 1) - 1.0).abs() < 1e-14);

        let o1 = ops(2, 1, 1.0);
        let expect = [
            [-5.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
            [-1.0 / 6.0, -2.0 / 3.0, 5.0 / 6.0],
        ];
        for (r, row) in expect.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert!((o1.coupling.entry(r, j) - e).abs() < 1e-14, "({r},{j})");
            }
        }
    }

    #[test]
    fn coupling_reproduces_exact_derivatives() {
        // The broken space contains d/dx of the continuous space, so the
        // projection of du/dx must equal du/dx pointwise.
        for k in 0..=2usize {
            let o = ops(6, k, 1.0);
            let coeffs: Vec<f64> = (0..o.dim_v())
                .map(|g| (0.3 + g as f64 * 0.17).sin())
                .collect();
            let u = VFunction::new(o.space_v.clone(), coeffs.clone()).unwrap();
            let mut bu = vec![0.0; o.dim_q()];
            o.apply_coupling(&coeffs, &mut bu);
            o.mass_q.solve_in_place(&mut bu);
            let p = QFunction::new(o.space_q.clone(), bu).unwrap();
            for &x in &[0.03, 0.31, 0.5, 0.62, 0.97] {
                let exact = u.eval_deriv(x).unwrap();
                let got = p.eval(x).unwrap();
                assert!((got - exact).abs() < 1e-11, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn loads_of_unity_match_basis_integrals() {
        let o = ops(2, 0, 1.0);
        let lv = o.load_v(|_| 1.0, 0).unwrap();
        for (g, &expect) in [0.25, 0.5, 0.25].iter().enumerate() {
            assert!((lv[g] - expect).abs() < 1e-14);
        }
        let lq = o.load_q(|_| 1.0, 0).unwrap();
        for &v in &lq {
            assert!((v - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn projections_reproduce_members_of_the_spaces() {
        let o = ops(7, 1, 3.0);
        let f = |x: f64| 1.5 * x * x - 0.25 * x + 2.0;
        let pv = o.project_v(f).unwrap();
        for &x in &[0.1, 0.45, 0.8] {
            assert!((pv.eval(x).unwrap() - f(x)).abs() < 1e-11);
        }
        let g = |x: f64| 3.0 * x - 1.0;
        let pq = o.project_q(g).unwrap();
        for &x in &[0.2, 0.5, 0.9] {
            assert!((pq.eval(x).unwrap() - g(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn degree_zero_projection_takes_cell_averages() {
        let o = ops(4, 0, 1.0);
        let pq = o.project_q(|x| x).unwrap();
        for c in 0..4 {
            let mid = 0.125 + 0.25 * c as f64;
            assert!((pq.coeffs[c] - mid).abs() < 1e-14);
        }
    }

    #[test]
    fn cosine_projection_errors_match_frozen_values() {
        let exact = |x: f64| (PI * x).cos();
        let o1 = ops(64, 1, 1.0);
        let p1 = o1.project_v(exact).unwrap();
        let e1 = o1.error_v(&p1.coeffs, exact).unwrap();
        assert!((e1 - 4.8076e-7).abs() < 1e-10, "quadratic error {e1:e}");
        assert!(e1 < 2.4e-4);

        let o0 = ops(64, 0, 1.0);
        let p0 = o0.project_v(exact).unwrap();
        let e0 = o0.error_v(&p0.coeffs, exact).unwrap();
        assert!((e0 - 6.3516e-5).abs() < 5e-9, "linear error {e0:e}");
    }

    #[test]
    fn norms_match_quadrature_of_known_functions() {
        let o = ops(32, 1, 1.0);
        let f = |x: f64| (PI * x).sin();
        let pv = o.project_v(f).unwrap();
        let n = o.norm_v(&pv.coeffs);
        assert!((n - (0.5f64).sqrt()).abs() < 1e-6);
        let pq = o.project_q(f).unwrap();
        let nq = o.norm_q(&pq.coeffs);
        assert!((nq - (0.5f64).sqrt()).abs() < 1e-4);
        assert!((o.inner_v(&pv.coeffs, &pv.coeffs) - n * n).abs() < 1e-14);
    }

    #[test]
    fn spectral_bounds_of_damping_hold() {
        let a =
            Damping::piecewise_constant((0..6).map(|c| 1.0 + (c % 3) as f64).collect()).unwrap();
        let o = assemble(Mesh1d::new(6).unwrap(), 1, a).unwrap();
        let mut x: Vec<f64> = (0..o.dim_v()).map(|g| (g as f64 * 0.7).cos()).collect();
        x[3] += 0.5;
        let am = o.damping_v.bilinear(&x, &x);
        let mm = o.mass_v.bilinear(&x, &x);
        assert!(am >= o.damping.lower * mm - 1e-12);
        assert!(am <= o.damping.upper * mm + 1e-12);
    }

    #[test]
    fn mono_map_interleaves_cells() {
        let map = MonoMap { k: 0, n_cells: 3 };
        assert_eq!(map.dim(), 7);
        assert_eq!(map.half_bandwidth(), 2);
        assert_eq!(map.v_index(0), 0);
        assert_eq!(map.q_index(0), 1);
        assert_eq!(map.v_index(1), 2);
        assert_eq!(map.q_index(1), 3);
        assert_eq!(map.v_index(3), 6);

        let map1 = MonoMap { k: 1, n_cells: 2 };
        assert_eq!(map1.dim(), 9);
        let mut seen = [false; 9];
        for g in 0..5 {
            seen[map1.v_index(g)] = true;
        }
        for g in 0..4 {
            seen[map1.q_index(g)] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn scatter_gather_roundtrip() {
        let map = MonoMap { k: 1, n_cells: 4 };
        let u: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let p: Vec<f64> = (0..8).map(|i| 100.0 + i as f64).collect();
        let mut packed = vec![0.0; map.dim()];
        map.scatter(&u, &p, &mut packed);
        let mut u2 = vec![0.0; 9];
        let mut p2 = vec![0.0; 8];
        map.gather(&packed, &mut u2, &mut p2);
        assert_eq!(u, u2);
        assert_eq!(p, p2);
    }

    #[test]
    fn coupled_matrix_matches_blocks() {
        let o = ops(3, 1, 2.5);
        let map = o.mono_map();
        let m = o.assemble_coupled(2.0, 0.5, -0.25, 0.25, 3.0).unwrap();
        for i in 0..o.dim_v() {
            let (lo, hi) = o.mass_v.row_range(i);
            for j in lo..hi {
                let expect = 2.0 * o.mass_v.get(i, j) + 0.5 * o.damping_v.get(i, j);
                assert!((m.get(map.v_index(i), map.v_index(j)) - expect).abs() < 1e-14);
            }
        }
        let mut ei = vec![0.0; o.dim_v()];
        for g in 0..o.dim_v() {
            ei.fill(0.0);
            ei[g] = 1.0;
            let mut bu = vec![0.0; o.dim_q()];
            o.apply_coupling(&ei, &mut bu);
            for (gq, &v) in bu.iter().enumerate() {
                assert!((m.get(map.q_index(gq), map.v_index(g)) - 0.25 * v).abs() < 1e-14);
                assert!((m.get(map.v_index(g), map.q_index(gq)) + 0.25 * v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn schur_matrix_is_spd_and_matches_definition() {
        let o = ops(4, 1, 1.5);
        let s = o.assemble_schur_v(3.0, 1.0, 0.7).unwrap();
        assert!(s.asymmetry() < 1e-13);
        assert!(s.factor_cholesky().is_ok());
        let x: Vec<f64> = (0..o.dim_v()).map(|g| (g as f64 * 0.31).sin()).collect();
        let mut bu = vec![0.0; o.dim_q()];
        o.apply_coupling(&x, &mut bu);
        let mut minv_bu = bu.clone();
        o.mass_q.solve_in_place(&mut minv_bu);
        let btb: f64 = bu.iter().zip(minv_bu.iter()).map(|(a, b)| a * b).sum();
        let expect = 3.0 * o.mass_v.bilinear(&x, &x) + o.damping_v.bilinear(&x, &x) + 0.7 * btb;
        let got = s.bilinear(&x, &x);
        assert!((got - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn piecewise_damping_must_match_mesh() {
        let a = Damping::piecewise_constant(vec![1.0, 2.0]).unwrap();
        assert!(assemble(Mesh1d::new(3).unwrap(), 0, a).is_err());
    }
}
