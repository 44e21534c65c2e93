//! Theta-scheme time stepping for the coupled system.
//!
//! One step maps `(u, p)` at time level n-1 to level n by solving
//!
//! ```text
//!   [ M_V/tau + theta A   -theta B' ] [u^n]   [ M_V/tau - (1-theta) A   (1-theta) B' ] [u^{n-1}]   [f^n]
//!   [ theta B              M_Q/tau  ] [p^n] = [ -(1-theta) B            M_Q/tau      ] [p^{n-1}] + [g^n]
//! ```
//!
//! The left-hand matrix is factored once per stepper, either monolithically
//! (banded LU in the interleaved ordering) or through the symmetric positive
//! definite Schur complement on the continuous space obtained by eliminating
//! `p^n` with the block-diagonal broken mass matrix. The module also defines
//! the backward-difference energies `E^{k,n}` of any order, the modified
//! energy with cross term, and the two sides of the per-step energy identity.

use crate::assembly::{MonoMap, Operators};
use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, BandedLu};

/// Energy growth factor relative to the initial energy beyond which a run is
/// aborted as blown up (absolute threshold 1e12 when starting from zero).
pub const BLOW_UP_FACTOR: f64 = 1e12;

/// Largest supported backward-difference order for energies.
pub const MAX_ENERGY_ORDER: usize = 8;

/// Time discretization parameters of the theta scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// Implicitness weight in `[0, 1]`.
    pub theta: f64,
    /// Time step size.
    pub tau: f64,
}

impl SchemeParams {
    /// Fixed weight `theta` in `[0, 1]` and step `tau > 0`.
    pub fn fixed(theta: f64, tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau <= 0.0 {
            return Err(Error::InvalidValue(format!(
                "time step must be positive and finite, got {tau}"
            )));
        }
        if !theta.is_finite() || !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidValue(format!(
                "theta must lie in [0, 1], got {theta}"
            )));
        }
        Ok(SchemeParams { theta, tau })
    }

    /// Adaptive weight `theta = 1/2 + lambda tau`, which keeps second-order
    /// accuracy while restoring uniform exponential stability.
    pub fn adaptive(lambda: f64, tau: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidValue(format!(
                "adaptive weight factor must be nonnegative, got {lambda}"
            )));
        }
        Self::fixed(0.5 + lambda * tau, tau)
    }

    /// Shifted midpoint rule `theta = 1/2 + tau`.
    pub fn shifted_midpoint(tau: f64) -> Result<Self> {
        Self::adaptive(1.0, tau)
    }

    /// Crank-Nicolson rule `theta = 1/2`.
    pub fn crank_nicolson(tau: f64) -> Result<Self> {
        Self::fixed(0.5, tau)
    }

    /// Implicit Euler rule `theta = 1`.
    pub fn implicit_euler(tau: f64) -> Result<Self> {
        Self::fixed(1.0, tau)
    }
}

/// Discrete state: coefficient vectors of both unknowns at one time level.
#[derive(Debug, Clone)]
pub struct State {
    /// Continuous-space coefficients.
    pub u: Vec<f64>,
    /// Broken-space coefficients.
    pub p: Vec<f64>,
    /// Time level `n` (the state belongs to time `n tau`).
    pub time_index: usize,
}

impl State {
    /// Zero state at time level 0.
    pub fn zeros(ops: &Operators) -> Self {
        State {
            u: vec![0.0; ops.dim_v()],
            p: vec![0.0; ops.dim_q()],
            time_index: 0,
        }
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|v| v.is_finite()) && self.p.iter().all(|v| v.is_finite())
    }
}

/// Builds the level-0 state by L2 projection of the initial data.
pub fn initial_state(
    ops: &Operators,
    u0: impl Fn(f64) -> f64,
    p0: impl Fn(f64) -> f64,
) -> Result<State> {
    Ok(State {
        u: ops.project_v(u0)?.coeffs,
        p: ops.project_q(p0)?.coeffs,
        time_index: 0,
    })
}

/// Which factorization carries the step solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    /// Banded LU of the full interleaved system.
    Monolithic,
    /// Cholesky of the Schur complement on the continuous space, with `p`
    /// recovered through the block-diagonal broken mass matrix.
    SchurMass,
}

/// Factor-once time stepper.
#[derive(Debug)]
pub struct Stepper {
    /// Assembled spatial operators.
    pub ops: Operators,
    /// Scheme parameters.
    pub params: SchemeParams,
    /// Active solve path.
    pub path: SolverPath,
    map: MonoMap,
    mono_lu: BandedLu,
    schur_chol: Option<BandedCholesky>,
    mass_v_chol: BandedCholesky,
}

impl Stepper {
    /// Assembles and factors the step matrix once.
    pub fn new(ops: Operators, params: SchemeParams, path: SolverPath) -> Result<Self> {
        let (theta, tau) = (params.theta, params.tau);
        let map = ops.mono_map();
        let mono = ops.assemble_coupled(1.0 / tau, theta, -theta, theta, 1.0 / tau)?;
        let mono_lu = mono.factor_lu()?;
        let schur_chol = match path {
            SolverPath::Monolithic => None,
            SolverPath::SchurMass => {
                let s = ops.assemble_schur_v(1.0 / tau, theta, tau * theta * theta)?;
                Some(s.factor_cholesky()?)
            }
        };
        let mass_v_chol = ops.mass_v.factor_cholesky()?;
        Ok(Stepper {
            ops,
            params,
            path,
            map,
            mono_lu,
            schur_chol,
            mass_v_chol,
        })
    }

    /// Convenience constructor with the monolithic path.
    pub fn monolithic(ops: Operators, params: SchemeParams) -> Result<Self> {
        Self::new(ops, params, SolverPath::Monolithic)
    }

    fn rhs(&self, state: &State, loads: Option<(&[f64], &[f64])>) -> (Vec<f64>, Vec<f64>) {
        let (theta, tau) = (self.params.theta, self.params.tau);
        let one_m = 1.0 - theta;
        let nv = self.ops.dim_v();
        let nq = self.ops.dim_q();
        let mut r_u = vec![0.0; nv];
        let mut r_q = vec![0.0; nq];
        let mut tmp_v = vec![0.0; nv];
        let mut tmp_q = vec![0.0; nq];

        self.ops.mass_v.matvec(&state.u, &mut r_u);
        for v in r_u.iter_mut() {
            *v /= tau;
        }
        if one_m != 0.0 {
            self.ops.damping_v.matvec(&state.u, &mut tmp_v);
            let mut bt_p = vec![0.0; nv];
            self.ops.apply_coupling_t(&state.p, &mut bt_p);
            for i in 0..nv {
                r_u[i] += one_m * (bt_p[i] - tmp_v[i]);
            }
        }

        self.ops.mass_q.matvec(&state.p, &mut r_q);
        for v in r_q.iter_mut() {
            *v /= tau;
        }
        if one_m != 0.0 {
            self.ops.apply_coupling(&state.u, &mut tmp_q);
            for i in 0..nq {
                r_q[i] -= one_m * tmp_q[i];
            }
        }

        if let Some((f, g)) = loads {
            for i in 0..nv {
                r_u[i] += f[i];
            }
            for i in 0..nq {
                r_q[i] += g[i];
            }
        }
        (r_u, r_q)
    }

    /// Advances one step; `loads` are assembled load vectors at the new time
    /// level.
    pub fn step(&self, state: &State, loads: Option<(&[f64], &[f64])>) -> Result<State> {
        if state.u.len() != self.ops.dim_v() || state.p.len() != self.ops.dim_q() {
            return Err(Error::DimensionMismatch(format!(
                "state dimensions ({}, {}) do not match operators ({}, {})",
                state.u.len(),
                state.p.len(),
                self.ops.dim_v(),
                self.ops.dim_q()
            )));
        }
        if let Some((f, g)) = loads {
            if f.len() != self.ops.dim_v() || g.len() != self.ops.dim_q() {
                return Err(Error::DimensionMismatch(
                    "load vector dimensions do not match operators".into(),
                ));
            }
        }
        let (r_u, r_q) = self.rhs(state, loads);
        let (theta, tau) = (self.params.theta, self.params.tau);
        let next = match self.path {
            SolverPath::Monolithic => {
                let mut packed = vec![0.0; self.map.dim()];
                self.map.scatter(&r_u, &r_q, &mut packed);
                self.mono_lu.solve_in_place(&mut packed);
                let mut u = vec![0.0; self.ops.dim_v()];
                let mut p = vec![0.0; self.ops.dim_q()];
                self.map.gather(&packed, &mut u, &mut p);
                State {
                    u,
                    p,
                    time_index: state.time_index + 1,
                }
            }
            SolverPath::SchurMass => {
                let mut minv_rq = r_q.clone();
                self.ops.mass_q.solve_in_place(&mut minv_rq);
                let mut rhs_u = vec![0.0; self.ops.dim_v()];
                self.ops.apply_coupling_t(&minv_rq, &mut rhs_u);
                for i in 0..rhs_u.len() {
                    rhs_u[i] = r_u[i] + tau * theta * rhs_u[i];
                }
                let chol = self.schur_chol.as_ref().expect("Schur path factored");
                chol.solve_in_place(&mut rhs_u);
                let u = rhs_u;
                let mut bu = vec![0.0; self.ops.dim_q()];
                self.ops.apply_coupling(&u, &mut bu);
                let mut p = vec![0.0; self.ops.dim_q()];
                for i in 0..p.len() {
                    p[i] = r_q[i] - theta * bu[i];
                }
                self.ops.mass_q.solve_in_place(&mut p);
                for v in p.iter_mut() {
                    *v *= tau;
                }
                State {
                    u,
                    p,
                    time_index: state.time_index + 1,
                }
            }
        };
        if !next.is_finite() {
            return Err(Error::BlowUp {
                step: next.time_index,
                energy: f64::INFINITY,
            });
        }
        Ok(next)
    }

    /// One homogeneous step: the discrete evolution map applied to a state.
    pub fn forward(&self, state: &State) -> Result<State> {
        self.step(state, None)
    }

    /// Adjoint of [`Stepper::forward`] in the mass-weighted inner product of
    /// the product space.
    pub fn adjoint(&self, state: &State) -> Result<State> {
        let (theta, tau) = (self.params.theta, self.params.tau);
        let one_m = 1.0 - theta;
        let nv = self.ops.dim_v();
        let nq = self.ops.dim_q();
        let mut w_u = vec![0.0; nv];
        let mut w_q = vec![0.0; nq];
        self.ops.mass_v.matvec(&state.u, &mut w_u);
        self.ops.mass_q.matvec(&state.p, &mut w_q);

        let mut packed = vec![0.0; self.map.dim()];
        self.map.scatter(&w_u, &w_q, &mut packed);
        self.mono_lu.solve_transposed_in_place(&mut packed);
        let mut v_u = vec![0.0; nv];
        let mut v_p = vec![0.0; nq];
        self.map.gather(&packed, &mut v_u, &mut v_p);

        let mut y_u = vec![0.0; nv];
        self.ops.mass_v.matvec(&v_u, &mut y_u);
        for v in y_u.iter_mut() {
            *v /= tau;
        }
        let mut tmp_v = vec![0.0; nv];
        if one_m != 0.0 {
            self.ops.damping_v.matvec(&v_u, &mut tmp_v);
            let mut bt = vec![0.0; nv];
            self.ops.apply_coupling_t(&v_p, &mut bt);
            for i in 0..nv {
                y_u[i] -= one_m * (tmp_v[i] + bt[i]);
            }
        }
        let mut y_p = vec![0.0; nq];
        self.ops.mass_q.matvec(&v_p, &mut y_p);
        for v in y_p.iter_mut() {
            *v /= tau;
        }
        if one_m != 0.0 {
            let mut bu = vec![0.0; nq];
            self.ops.apply_coupling(&v_u, &mut bu);
            for i in 0..nq {
                y_p[i] += one_m * bu[i];
            }
        }

        self.mass_v_chol.solve_in_place(&mut y_u);
        self.ops.mass_q.solve_in_place(&mut y_p);
        Ok(State {
            u: y_u,
            p: y_p,
            time_index: state.time_index,
        })
    }

    /// Runs `n_steps` homogeneous steps from `init`, recording the requested
    /// backward-difference energies and, optionally, every `stride`-th state.
    pub fn run(
        &self,
        init: State,
        n_steps: usize,
        energy_orders: &[usize],
        snapshot_stride: Option<usize>,
    ) -> Result<RunResult> {
        self.run_with_loads(init, n_steps, energy_orders, snapshot_stride, |_| None)
    }

    /// Like [`Stepper::run`] with per-step assembled load vectors: `loads(n)`
    /// supplies `(f^n, g^n)` for levels `n = 1..=n_steps`.
    pub fn run_with_loads(
        &self,
        init: State,
        n_steps: usize,
        energy_orders: &[usize],
        snapshot_stride: Option<usize>,
        loads: impl Fn(usize) -> Option<(Vec<f64>, Vec<f64>)>,
    ) -> Result<RunResult> {
        for &o in energy_orders {
            if o > MAX_ENERGY_ORDER {
                return Err(Error::invalid(format!(
                    "energy order {o} exceeds the supported maximum {MAX_ENERGY_ORDER}"
                )));
            }
        }
        if let Some(s) = snapshot_stride {
            if s == 0 {
                return Err(Error::invalid("snapshot stride must be positive"));
            }
        }
        let max_order = energy_orders.iter().copied().max().unwrap_or(0);
        let tau = self.params.tau;
        let mut energies: Vec<EnergySeries> = energy_orders
            .iter()
            .map(|&o| EnergySeries {
                order: o,
                tau,
                first_step: o,
                values: Vec::with_capacity(n_steps + 1 - o.min(n_steps)),
            })
            .collect();
        let mut snapshots = Vec::new();

        let mut window: Vec<State> = Vec::with_capacity(max_order + 1);
        window.push(init);
        let e_init = energy(&self.ops, tau, &window, 0)?;
        let threshold = if e_init > 0.0 {
            BLOW_UP_FACTOR * e_init
        } else {
            BLOW_UP_FACTOR
        };

        let record = |window: &Vec<State>,
                      step: usize,
                      energies: &mut Vec<EnergySeries>,
                      snapshots: &mut Vec<State>|
         -> Result<()> {
            for series in energies.iter_mut() {
                if step >= series.order {
                    series
                        .values
                        .push(energy(&self.ops, tau, window, series.order)?);
                }
            }
            if let Some(s) = snapshot_stride {
                if step.is_multiple_of(s) {
                    snapshots.push(window[0].clone());
                }
            }
            Ok(())
        };
        record(&window, 0, &mut energies, &mut snapshots)?;

        for n in 1..=n_steps {
            let load = loads(n);
            let next = self.step(
                &window[0],
                load.as_ref().map(|(f, g)| (f.as_slice(), g.as_slice())),
            )?;
            window.insert(0, next);
            window.truncate(max_order + 1);
            let e0 = energy(&self.ops, tau, &window, 0)?;
            if !e0.is_finite() || e0 > threshold {
                return Err(Error::BlowUp {
                    step: n,
                    energy: e0,
                });
            }
            record(&window, n, &mut energies, &mut snapshots)?;
        }

        Ok(RunResult {
            final_state: window[0].clone(),
            energies,
            snapshots,
        })
    }
}

/// Output of a time-stepping run.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// State at the final time level.
    pub final_state: State,
    /// One recorded series per requested energy order.
    pub energies: Vec<EnergySeries>,
    /// States recorded at the snapshot stride (always includes level 0).
    pub snapshots: Vec<State>,
}

impl RunResult {
    /// The recorded series of the given order, if requested.
    pub fn energy_series(&self, order: usize) -> Option<&EnergySeries> {
        self.energies.iter().find(|s| s.order == order)
    }
}

/// Discrete energy values `E^{k,n}` for `n >= k`, with the time step they
/// refer to.
#[derive(Debug, Clone)]
pub struct EnergySeries {
    /// Backward-difference order `k`.
    pub order: usize,
    /// Time step size.
    pub tau: f64,
    /// Time level of the first value (equals `order`).
    pub first_step: usize,
    /// Energy values at levels `first_step, first_step + 1, ...`.
    pub values: Vec<f64>,
}

impl EnergySeries {
    /// Number of recorded values.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when nothing was recorded.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Physical time of the i-th recorded value.
    pub fn time(&self, i: usize) -> f64 {
        (self.first_step + i) as f64 * self.tau
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for j in 0..k {
        v = v * (n - j) as f64 / (j + 1) as f64;
    }
    v
}

/// Backward difference quotient of the given order from a newest-first
/// window of states; writes the `u` and `p` parts separately.
pub fn difference_quotient(
    window: &[State],
    tau: f64,
    order: usize,
    out_u: &mut [f64],
    out_p: &mut [f64],
) -> Result<()> {
    if window.len() < order + 1 {
        return Err(Error::invalid(format!(
            "difference quotient of order {order} needs {} states, got {}",
            order + 1,
            window.len()
        )));
    }
    let scale = tau.powi(order as i32).recip();
    out_u.fill(0.0);
    out_p.fill(0.0);
    for (j, w) in window.iter().enumerate().take(order + 1) {
        let c = scale * binomial(order, j) * if j % 2 == 0 { 1.0 } else { -1.0 };
        for (o, &v) in out_u.iter_mut().zip(w.u.iter()) {
            *o += c * v;
        }
        for (o, &v) in out_p.iter_mut().zip(w.p.iter()) {
            *o += c * v;
        }
    }
    Ok(())
}

/// Discrete energy `E^{k,n} = (|d^k u|^2 + |d^k p|^2)/2` in the mass norms,
/// where `d^k` is the order-`k` backward difference quotient and `window`
/// lists states newest-first ending at level n.
pub fn energy(ops: &Operators, tau: f64, window: &[State], order: usize) -> Result<f64> {
    let mut du = vec![0.0; ops.dim_v()];
    let mut dp = vec![0.0; ops.dim_q()];
    difference_quotient(window, tau, order, &mut du, &mut dp)?;
    Ok(0.5 * (ops.mass_v.bilinear(&du, &du) + ops.mass_q.bilinear(&dp, &dp)))
}

/// Modified first-order energy `E^{1,n} + eps (d u^n, u^{n,theta})` with the
/// theta-weighted state `u^{n,theta} = theta u^n + (1-theta) u^{n-1}`.
pub fn modified_energy(
    ops: &Operators,
    params: SchemeParams,
    window: &[State],
    eps: f64,
) -> Result<f64> {
    if window.len() < 2 {
        return Err(Error::invalid(
            "modified energy needs the two newest states",
        ));
    }
    let base = energy(ops, params.tau, window, 1)?;
    let nv = ops.dim_v();
    let mut du = vec![0.0; nv];
    let mut dp = vec![0.0; ops.dim_q()];
    difference_quotient(window, params.tau, 1, &mut du, &mut dp)?;
    let theta = params.theta;
    let u_theta: Vec<f64> = window[0]
        .u
        .iter()
        .zip(window[1].u.iter())
        .map(|(&a, &b)| theta * a + (1.0 - theta) * b)
        .collect();
    Ok(base + eps * ops.inner_v(&du, &u_theta))
}

/// Both sides of the per-step energy identity for the order-`k` energy:
/// the left side is the backward difference `(E^{k,n} - E^{k,n-1})/tau`, the
/// right side is the dissipation
/// `-(theta - 1/2) tau (|d^{k+1} u|^2 + |d^{k+1} p|^2) - (a d^k u^{n,theta}, d^k u^{n,theta})`.
/// The window must hold `k + 2` states newest-first.
pub fn energy_identity_sides(
    ops: &Operators,
    params: SchemeParams,
    window: &[State],
    order: usize,
) -> Result<(f64, f64)> {
    if window.len() < order + 2 {
        return Err(Error::invalid(format!(
            "energy identity of order {order} needs {} states, got {}",
            order + 2,
            window.len()
        )));
    }
    let tau = params.tau;
    let theta = params.theta;
    let e_now = energy(ops, tau, window, order)?;
    let e_prev = energy(ops, tau, &window[1..], order)?;
    let lhs = (e_now - e_prev) / tau;

    let nv = ops.dim_v();
    let nq = ops.dim_q();
    let mut du1 = vec![0.0; nv];
    let mut dp1 = vec![0.0; nq];
    difference_quotient(window, tau, order + 1, &mut du1, &mut dp1)?;
    let diss_num = ops.mass_v.bilinear(&du1, &du1) + ops.mass_q.bilinear(&dp1, &dp1);

    let mut du_now = vec![0.0; nv];
    let mut dp_now = vec![0.0; nq];
    difference_quotient(window, tau, order, &mut du_now, &mut dp_now)?;
    let mut du_prev = vec![0.0; nv];
    let mut dp_prev = vec![0.0; nq];
    difference_quotient(&window[1..], tau, order, &mut du_prev, &mut dp_prev)?;
    let du_theta: Vec<f64> = du_now
        .iter()
        .zip(du_prev.iter())
        .map(|(&a, &b)| theta * a + (1.0 - theta) * b)
        .collect();
    let rhs = -(theta - 0.5) * tau * diss_num - ops.damping_v.bilinear(&du_theta, &du_theta);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::damping::Damping;
    use crate::mesh::Mesh1d;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ops(n: usize, k: usize, a: f64) -> Operators {
        assemble(Mesh1d::new(n).unwrap(), k, Damping::constant(a).unwrap()).unwrap()
    }

    fn random_state(ops: &Operators, seed: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        State {
            u: (0..ops.dim_v()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            p: (0..ops.dim_q()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            time_index: 0,
        }
    }

    #[test]
    fn scheme_params_validate_inputs() {
        assert!(SchemeParams::fixed(0.5, 0.1).is_ok());
        assert!(SchemeParams::fixed(-0.1, 0.1).is_err());
        assert!(SchemeParams::fixed(1.1, 0.1).is_err());
        assert!(SchemeParams::fixed(0.5, 0.0).is_err());
        let s = SchemeParams::adaptive(1.0, 0.01).unwrap();
        assert!((s.theta - 0.51).abs() < 1e-15);
        assert!(SchemeParams::adaptive(1.0, 0.6).is_err());
        assert_eq!(SchemeParams::implicit_euler(0.1).unwrap().theta, 1.0);
        assert_eq!(SchemeParams::crank_nicolson(0.1).unwrap().theta, 0.5);
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let st = Stepper::monolithic(ops(4, 0, 10.0), SchemeParams::crank_nicolson(0.1).unwrap())
            .unwrap();
        let mut s = State::zeros(&st.ops);
        for _ in 0..3 {
            s = st.forward(&s).unwrap();
            assert!(s.u.iter().all(|&v| v == 0.0));
            assert!(s.p.iter().all(|&v| v == 0.0));
        }
        assert_eq!(s.time_index, 3);
    }

    #[test]
    fn step_is_linear() {
        let st =
            Stepper::monolithic(ops(6, 1, 3.0), SchemeParams::fixed(0.7, 0.05).unwrap()).unwrap();
        let s1 = random_state(&st.ops, 1);
        let s2 = random_state(&st.ops, 2);
        let (al, be) = (1.7, -0.6);
        let combo = State {
            u: s1
                .u
                .iter()
                .zip(&s2.u)
                .map(|(&a, &b)| al * a + be * b)
                .collect(),
            p: s1
                .p
                .iter()
                .zip(&s2.p)
                .map(|(&a, &b)| al * a + be * b)
                .collect(),
            time_index: 0,
        };
        let r1 = st.forward(&s1).unwrap();
        let r2 = st.forward(&s2).unwrap();
        let rc = st.forward(&combo).unwrap();
        for i in 0..rc.u.len() {
            assert!((rc.u[i] - (al * r1.u[i] + be * r2.u[i])).abs() < 1e-12);
        }
        for i in 0..rc.p.len() {
            assert!((rc.p[i] - (al * r1.p[i] + be * r2.p[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn schur_path_matches_monolithic() {
        for k in 0..=2usize {
            let o = ops(5, k, 7.0);
            let params = SchemeParams::fixed(0.8, 0.07).unwrap();
            let mono = Stepper::new(o.clone(), params, SolverPath::Monolithic).unwrap();
            let schur = Stepper::new(o, params, SolverPath::SchurMass).unwrap();
            let s = random_state(&mono.ops, 5);
            let f: Vec<f64> = (0..mono.ops.dim_v())
                .map(|i| (i as f64).sin() * 0.1)
                .collect();
            let g: Vec<f64> = (0..mono.ops.dim_q())
                .map(|i| (i as f64).cos() * 0.1)
                .collect();
            let r1 = mono.step(&s, Some((&f, &g))).unwrap();
            let r2 = schur.step(&s, Some((&f, &g))).unwrap();
            for i in 0..r1.u.len() {
                assert!((r1.u[i] - r2.u[i]).abs() < 1e-10, "k={k} u[{i}]");
            }
            for i in 0..r1.p.len() {
                assert!((r1.p[i] - r2.p[i]).abs() < 1e-10, "k={k} p[{i}]");
            }
        }
    }

    #[test]
    fn step_satisfies_scheme_equations() {
        // Residual of the theta-scheme equations tested against every basis
        // function, using only matrix-vector products.
        let o = ops(8, 1, 4.0);
        let params = SchemeParams::fixed(0.75, 0.04).unwrap();
        let st = Stepper::monolithic(o, params).unwrap();
        let prev = random_state(&st.ops, 9);
        let f: Vec<f64> = (0..st.ops.dim_v())
            .map(|i| 0.3 * (i as f64 * 0.2).sin())
            .collect();
        let g: Vec<f64> = (0..st.ops.dim_q())
            .map(|i| 0.2 * (i as f64 * 0.4).cos())
            .collect();
        let next = st.step(&prev, Some((&f, &g))).unwrap();
        let (theta, tau) = (params.theta, params.tau);
        let nv = st.ops.dim_v();
        let nq = st.ops.dim_q();

        let u_theta: Vec<f64> = next
            .u
            .iter()
            .zip(&prev.u)
            .map(|(&a, &b)| theta * a + (1.0 - theta) * b)
            .collect();
        let p_theta: Vec<f64> = next
            .p
            .iter()
            .zip(&prev.p)
            .map(|(&a, &b)| theta * a + (1.0 - theta) * b)
            .collect();
        let du: Vec<f64> = next
            .u
            .iter()
            .zip(&prev.u)
            .map(|(&a, &b)| (a - b) / tau)
            .collect();
        let dp: Vec<f64> = next
            .p
            .iter()
            .zip(&prev.p)
            .map(|(&a, &b)| (a - b) / tau)
            .collect();

        let mut r1 = vec![0.0; nv];
        st.ops.mass_v.matvec(&du, &mut r1);
        let mut tmp = vec![0.0; nv];
        st.ops.damping_v.matvec(&u_theta, &mut tmp);
        let mut bt = vec![0.0; nv];
        st.ops.apply_coupling_t(&p_theta, &mut bt);
        let mut max1: f64 = 0.0;
        for i in 0..nv {
            max1 = max1.max((r1[i] + tmp[i] - bt[i] - f[i]).abs());
        }
        assert!(max1 < 1e-11, "first equation residual {max1:e}");

        let mut r2 = vec![0.0; nq];
        st.ops.mass_q.matvec(&dp, &mut r2);
        let mut bu = vec![0.0; nq];
        st.ops.apply_coupling(&u_theta, &mut bu);
        let mut max2: f64 = 0.0;
        for i in 0..nq {
            max2 = max2.max((r2[i] + bu[i] - g[i]).abs());
        }
        assert!(max2 < 1e-11, "second equation residual {max2:e}");
    }

    #[test]
    fn energy_decreases_for_damped_implicit_runs() {
        let o = ops(16, 0, 10.0);
        let st = Stepper::monolithic(o, SchemeParams::implicit_euler(0.05).unwrap()).unwrap();
        let init = initial_state(&st.ops, |x| (PI * x).cos(), |x| (PI * x).sin()).unwrap();
        let res = st.run(init, 100, &[0], None).unwrap();
        let e = &res.energy_series(0).unwrap().values;
        for i in 1..e.len() {
            assert!(e[i] <= e[i - 1] * (1.0 + 1e-13), "step {i}");
        }
        assert!(e[e.len() - 1] < e[0] * 1e-3);
    }

    #[test]
    fn explicit_scheme_with_large_step_blows_up() {
        let o = ops(64, 0, 1.0);
        let st = Stepper::monolithic(o, SchemeParams::fixed(0.0, 0.05).unwrap()).unwrap();
        let init = initial_state(&st.ops, |x| (PI * x).cos(), |_| 0.0).unwrap();
        match st.run(init, 2000, &[0], None) {
            Err(Error::BlowUp { step, .. }) => assert!(step > 0),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn energies_of_known_windows() {
        let o = ops(32, 0, 10.0);
        let tau = 0.1;
        let s0 = random_state(&o, 3);
        let zero = State::zeros(&o);
        assert_eq!(
            energy(&o, tau, std::slice::from_ref(&zero), 0).unwrap(),
            0.0
        );
        let e0 = energy(&o, tau, std::slice::from_ref(&s0), 0).unwrap();
        let expect = 0.5 * (o.mass_v.bilinear(&s0.u, &s0.u) + o.mass_q.bilinear(&s0.p, &s0.p));
        assert!((e0 - expect).abs() < 1e-14);
        let e1 = energy(&o, tau, &[s0.clone(), s0.clone()], 1).unwrap();
        assert!(e1 == 0.0);
        assert!(energy(&o, tau, std::slice::from_ref(&s0), 1).is_err());
    }

    #[test]
    fn initial_energy_matches_analytic_value() {
        let o = ops(1000, 0, 10.0);
        let amp = -(5.0 + (25.0 - PI * PI).sqrt()) / PI;
        let init = initial_state(&o, |x| (PI * x).cos(), move |x| amp * (PI * x).sin()).unwrap();
        let e0 = energy(&o, 1e-3, &[init], 0).unwrap();
        let exact = 0.25 * (1.0 + amp * amp);
        assert!((e0 - exact).abs() < 1e-4 * exact, "{e0} vs {exact}");
        assert!((exact - 2.25).abs() < 0.002);
    }

    #[test]
    fn modified_energy_reduces_to_first_order_energy() {
        let o = ops(8, 1, 5.0);
        let params = SchemeParams::fixed(0.8, 0.05).unwrap();
        let w = [random_state(&o, 11), random_state(&o, 12)];
        let m0 = modified_energy(&o, params, &w, 0.0).unwrap();
        let e1 = energy(&o, params.tau, &w, 1).unwrap();
        assert!((m0 - e1).abs() < 1e-15);
        let zero = [State::zeros(&o), State::zeros(&o)];
        assert_eq!(modified_energy(&o, params, &zero, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn energy_identity_holds_along_runs() {
        for &(k_poly, theta) in &[(0usize, 0.5), (0, 0.75), (1, 1.0)] {
            let o = ops(8, k_poly, 10.0);
            let params = SchemeParams::fixed(theta, 0.02).unwrap();
            let st = Stepper::monolithic(o, params).unwrap();
            let init = random_state(&st.ops, 21);
            let res = st.run(init, 30, &[], Some(1)).unwrap();
            for order in 0..=1usize {
                for n in (order + 2)..res.snapshots.len() {
                    let window: Vec<State> = (0..=(order + 1))
                        .map(|j| res.snapshots[n - j].clone())
                        .collect();
                    let (lhs, rhs) =
                        energy_identity_sides(&st.ops, params, &window, order).unwrap();
                    let denom = lhs.abs().max(rhs.abs()).max(1e-300);
                    assert!(
                        ((lhs - rhs) / denom).abs() < 1e-10,
                        "k={k_poly} theta={theta} order={order} n={n}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn adjoint_is_gram_adjoint_of_forward() {
        for &theta in &[0.5, 0.8, 1.0] {
            let o = ops(6, 1, 4.0);
            let params = SchemeParams::fixed(theta, 0.1).unwrap();
            let st = Stepper::monolithic(o, params).unwrap();
            let x = random_state(&st.ops, 31);
            let y = random_state(&st.ops, 32);
            let sx = st.forward(&x).unwrap();
            let sty = st.adjoint(&y).unwrap();
            let lhs = st.ops.inner_v(&sx.u, &y.u) + st.ops.inner_q(&sx.p, &y.p);
            let rhs = st.ops.inner_v(&x.u, &sty.u) + st.ops.inner_q(&x.p, &sty.p);
            assert!(
                (lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0),
                "theta={theta}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn run_records_snapshots_and_series_shapes() {
        let o = ops(4, 0, 10.0);
        let st = Stepper::monolithic(o, SchemeParams::implicit_euler(0.1).unwrap()).unwrap();
        let init = random_state(&st.ops, 41);
        let res = st.run(init, 10, &[0, 1, 2], Some(5)).unwrap();
        assert_eq!(res.energy_series(0).unwrap().values.len(), 11);
        assert_eq!(res.energy_series(1).unwrap().values.len(), 10);
        assert_eq!(res.energy_series(2).unwrap().values.len(), 9);
        assert_eq!(res.energy_series(1).unwrap().first_step, 1);
        assert!((res.energy_series(2).unwrap().time(0) - 0.2).abs() < 1e-15);
        let idx: Vec<usize> = res.snapshots.iter().map(|s| s.time_index).collect();
        assert_eq!(idx, vec![0, 5, 10]);
        assert_eq!(res.final_state.time_index, 10);
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let st = Stepper::monolithic(ops(4, 0, 1.0), SchemeParams::implicit_euler(0.1).unwrap())
            .unwrap();
        let bad = State {
            u: vec![0.0; 3],
            p: vec![0.0; 4],
            time_index: 0,
        };
        assert!(st.step(&bad, None).is_err());
        let good = State::zeros(&st.ops);
        let f = vec![0.0; 2];
        let g = vec![0.0; 4];
        assert!(st.step(&good, Some((&f, &g))).is_err());
    }
}
