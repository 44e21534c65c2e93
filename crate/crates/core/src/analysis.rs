//! Closed-form constants, the analytic reference solution, decay-rate
//! fitting, operator norms, error norms and convergence studies.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble, Operators};
use crate::damping::Damping;
use crate::error::{Error, Result};
use crate::mesh::Mesh1d;
use crate::quadrature::gauss_rule;
use crate::space::VFunction;
use crate::stepper::{initial_state, EnergySeries, SchemeParams, State, Stepper};

use std::f64::consts::PI;

/// Analytic energy decay rate `g(a) = a/2 - Re sqrt(a^2/4 - pi^2)` of the
/// lowest Fourier mode under constant damping `a > 0`.
pub fn decay_rate(a: f64) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::InvalidValue(format!(
            "damping constant must be positive, got {a}"
        )));
    }
    let disc = a * a / 4.0 - PI * PI;
    Ok(if disc > 0.0 {
        a / 2.0 - disc.sqrt()
    } else {
        a / 2.0
    })
}

/// Separable exact solution `u = e^{lambda t} cos(pi x)`,
/// `p = amp_p e^{lambda t} sin(pi x)` for constant damping `a >= 2 pi`
/// (the overdamped regime where `lambda` is real).
#[derive(Debug, Clone, Copy)]
pub struct AnalyticSolution {
    /// Damping constant.
    pub a: f64,
    /// Real decay exponent `-a/2 + sqrt(a^2/4 - pi^2)`.
    pub lambda: f64,
    /// Amplitude of the flux component.
    pub amp_p: f64,
}

impl AnalyticSolution {
    /// Builds the solution; errors for `a < 2 pi` where the exponent turns
    /// complex and this closed form does not apply.
    pub fn new(a: f64) -> Result<Self> {
        if !a.is_finite() || a < 2.0 * PI {
            return Err(Error::InvalidValue(format!(
                "analytic solution requires damping a >= 2 pi, got {a}"
            )));
        }
        let root = (a * a / 4.0 - PI * PI).sqrt();
        Ok(AnalyticSolution {
            a,
            lambda: -a / 2.0 + root,
            amp_p: (-a / 2.0 - root) / PI,
        })
    }

    /// Displacement component at `(x, t)`.
    pub fn u(&self, x: f64, t: f64) -> f64 {
        (self.lambda * t).exp() * (PI * x).cos()
    }

    /// Flux component at `(x, t)`.
    pub fn p(&self, x: f64, t: f64) -> f64 {
        self.amp_p * (self.lambda * t).exp() * (PI * x).sin()
    }

    /// Exact energy `E(t) = (1 + amp_p^2)/4 * e^{2 lambda t}`.
    pub fn energy(&self, t: f64) -> f64 {
        0.25 * (1.0 + self.amp_p * self.amp_p) * (2.0 * self.lambda * t).exp()
    }

    /// Energy decay rate `-2 lambda = 2 g(a)`.
    pub fn energy_rate(&self) -> f64 {
        -2.0 * self.lambda
    }
}

/// Closed-form stability constants for damping bounds `0 < a0 <= a1`.
#[derive(Debug, Clone, Copy)]
pub struct StabilityConstants {
    /// Damping lower bound.
    pub a0: f64,
    /// Damping upper bound.
    pub a1: f64,
    /// Scheme weight the step bound refers to.
    pub theta: f64,
    /// Decay rate of the continuous-in-time energy.
    pub alpha_cont: f64,
    /// Decay rate of the fully discrete energy.
    pub alpha_disc: f64,
    /// Modified-energy coefficient bound.
    pub eps0: f64,
    /// Maximal uniformly stable step size for the given `theta`
    /// (finite only for `theta > 1/2`).
    pub tau0: f64,
}

impl StabilityConstants {
    /// Computes all constants. `tau0` requires `1/2 < theta <= 1`; outside
    /// that range it is reported as infinity (no step bound applies).
    pub fn new(a0: f64, a1: f64, theta: f64) -> Result<Self> {
        if !(a0.is_finite() && a1.is_finite()) || a0 <= 0.0 || a1 < a0 {
            return Err(Error::InvalidValue(format!(
                "damping bounds must satisfy 0 < a0 <= a1, got ({a0}, {a1})"
            )));
        }
        if !theta.is_finite() || !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidValue(format!(
                "theta must lie in [0, 1], got {theta}"
            )));
        }
        let a0_3 = a0 * a0 * a0;
        let denom_cont = 8.0 * a0 * a0 + 4.0 * a0 * a0 * a1 + 2.0 * a0 * a1 + a1.powi(4);
        let denom_disc = 8.0 * a0 * a0 + 4.0 * a0 * a0 * a1 + 3.0 * a0 * a1 + 4.0 * a1.powi(4);
        let alpha_cont = (4.0 / 3.0) * a0_3 / denom_cont;
        let alpha_disc = (2.0 / 3.0) * a0_3 / denom_disc;
        let eps0 = 2.0 * a0_3 / denom_disc;
        let tau0 = if theta > 0.5 {
            let bracket = 1.25 * theta * theta
                + (a1 / (2.0 * a0)) * theta * theta
                + (1.0 - theta) * (1.0 - theta) / 4.0
                + theta * (1.0 - theta) / 2.0;
            (theta - 0.5) / (eps0 * bracket)
        } else {
            f64::INFINITY
        };
        Ok(StabilityConstants {
            a0,
            a1,
            theta,
            alpha_cont,
            alpha_disc,
            eps0,
            tau0,
        })
    }
}

/// Exponential rate fitted to an energy series by least squares on `ln E`.
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    /// Fitted rate: `E(t) ~ C e^{-alpha t}`.
    pub alpha: f64,
    /// Fitted `ln C`.
    pub intercept: f64,
    /// Time levels of the first and last samples used.
    pub window: (usize, usize),
    /// Root-mean-square residual of the linear fit in log space.
    pub residual: f64,
}

/// Fits `ln E` against time over `window = (t_lo, t_hi)`; without a window
/// the first 10% of the samples are dropped. All energies in the window must
/// be positive.
pub fn fit_decay_rate(series: &EnergySeries, window: Option<(f64, f64)>) -> Result<RateFit> {
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    let mut steps = Vec::new();
    let skip = if window.is_none() {
        series.values.len().div_ceil(10)
    } else {
        0
    };
    for (i, &e) in series.values.iter().enumerate() {
        let t = series.time(i);
        if let Some((lo, hi)) = window {
            if t < lo - 1e-12 || t > hi + 1e-12 {
                continue;
            }
        } else if i < skip {
            continue;
        }
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::InvalidValue(format!(
                "non-positive energy {e} at t = {t} in fit window"
            )));
        }
        ts.push(t);
        ys.push(e.ln());
        steps.push(series.first_step + i);
    }
    if ts.len() < 2 {
        return Err(Error::invalid(
            "rate fit needs at least two samples in the window",
        ));
    }
    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&t, &y) in ts.iter().zip(ys.iter()) {
        sxx += (t - t_mean) * (t - t_mean);
        sxy += (t - t_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(Error::invalid("rate fit window has zero time extent"));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let mut ss = 0.0;
    for (&t, &y) in ts.iter().zip(ys.iter()) {
        let r = y - (intercept + slope * t);
        ss += r * r;
    }
    Ok(RateFit {
        alpha: -slope,
        intercept,
        window: (steps[0], steps[steps.len() - 1]),
        residual: (ss / n).sqrt(),
    })
}

/// Operator norm estimate from power iteration.
#[derive(Debug, Clone, Copy)]
pub struct OperatorNorm {
    /// Largest singular value of the n-step evolution in the mass-weighted
    /// product norm.
    pub value: f64,
    /// Power iterations used.
    pub iterations: usize,
}

/// Mass-weighted norm of the n-step evolution operator, by power iteration
/// on the Gram-adjoint composition. Converges when successive estimates
/// agree to `tol` relative; errors after `max_iter` iterations.
pub fn operator_norm(
    stepper: &Stepper,
    n_steps: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<OperatorNorm> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidValue(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    if n_steps == 0 {
        return Ok(OperatorNorm {
            value: 1.0,
            iterations: 0,
        });
    }
    let ops = &stepper.ops;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = State {
        u: (0..ops.dim_v()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        p: (0..ops.dim_q()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        time_index: 0,
    };
    let g_norm = |s: &State| (ops.inner_v(&s.u, &s.u) + ops.inner_q(&s.p, &s.p)).sqrt();
    let scale = g_norm(&x);
    if scale == 0.0 {
        return Err(Error::invalid("degenerate start vector"));
    }
    for v in x.u.iter_mut() {
        *v /= scale;
    }
    for v in x.p.iter_mut() {
        *v /= scale;
    }

    let mut sigma_prev = f64::NAN;
    for it in 1..=max_iter {
        let mut y = x.clone();
        for _ in 0..n_steps {
            y = stepper.forward(&y)?;
        }
        let sigma = g_norm(&y);
        if sigma == 0.0 {
            return Ok(OperatorNorm {
                value: 0.0,
                iterations: it,
            });
        }
        let mut z = y;
        for _ in 0..n_steps {
            z = stepper.adjoint(&z)?;
        }
        let zn = g_norm(&z);
        if zn == 0.0 {
            return Ok(OperatorNorm {
                value: sigma,
                iterations: it,
            });
        }
        for v in z.u.iter_mut() {
            *v /= zn;
        }
        for v in z.p.iter_mut() {
            *v /= zn;
        }
        x = z;
        if sigma_prev.is_finite() && (sigma - sigma_prev).abs() <= tol * sigma {
            return Ok(OperatorNorm {
                value: sigma,
                iterations: it,
            });
        }
        sigma_prev = sigma;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: sigma_prev,
    })
}

/// Error norms of a discrete state against the analytic solution at time `t`.
#[derive(Debug, Clone, Copy)]
pub struct ErrorSample {
    /// Mass-norm distance to the projected exact solution,
    /// `sqrt(|u - proj u|^2 + |p - proj p|^2)`.
    pub discrete: f64,
    /// Full L2 error of the displacement against the exact function.
    pub l2_u: f64,
    /// Full L2 error of the flux against the exact function.
    pub l2_p: f64,
}

/// Measures a state against the analytic solution at time `t`.
pub fn error_norms(
    ops: &Operators,
    state: &State,
    t: f64,
    sol: &AnalyticSolution,
) -> Result<ErrorSample> {
    let proj_u = ops.project_v(|x| sol.u(x, t))?;
    let proj_p = ops.project_q(|x| sol.p(x, t))?;
    let du: Vec<f64> = state
        .u
        .iter()
        .zip(proj_u.coeffs.iter())
        .map(|(&a, &b)| a - b)
        .collect();
    let dp: Vec<f64> = state
        .p
        .iter()
        .zip(proj_p.coeffs.iter())
        .map(|(&a, &b)| a - b)
        .collect();
    let discrete = (ops.norm_v(&du).powi(2) + ops.norm_q(&dp).powi(2)).sqrt();
    Ok(ErrorSample {
        discrete,
        l2_u: ops.error_v(&state.u, |x| sol.u(x, t))?,
        l2_p: ops.error_q(&state.p, |x| sol.p(x, t))?,
    })
}

/// How the scheme weight is chosen across a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaRule {
    /// Fixed weight for every step size.
    Fixed(f64),
    /// Shifted midpoint weight `theta = 1/2 + tau`.
    ShiftedMidpoint,
}

impl ThetaRule {
    /// Scheme parameters for a concrete step size.
    pub fn params(&self, tau: f64) -> Result<SchemeParams> {
        match *self {
            ThetaRule::Fixed(theta) => SchemeParams::fixed(theta, tau),
            ThetaRule::ShiftedMidpoint => SchemeParams::shifted_midpoint(tau),
        }
    }

    /// Display label for reports.
    pub fn label(&self) -> String {
        match *self {
            ThetaRule::Fixed(theta) => format!("theta={theta}"),
            ThetaRule::ShiftedMidpoint => "theta=1/2+tau".into(),
        }
    }
}

/// Which discretization parameter a convergence sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Vary the mesh size `h` at fixed `tau`.
    Spatial,
    /// Vary the step size `tau` at fixed `h`.
    Temporal,
}

/// Configuration of one convergence sweep against the analytic solution.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Varied parameter.
    pub kind: SweepKind,
    /// Values of the varied parameter (h or tau), in sweep order.
    pub values: Vec<f64>,
    /// The fixed other parameter (tau or h).
    pub fixed: f64,
    /// Constant damping (must be >= 2 pi for the analytic oracle).
    pub a: f64,
    /// Degree index of the mixed pair.
    pub degree_k: usize,
    /// Scheme weight rule.
    pub theta_rule: ThetaRule,
    /// Final time at which errors are measured.
    pub t_final: f64,
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy)]
pub struct ErrorRow {
    /// Mesh size.
    pub h: f64,
    /// Step size.
    pub tau: f64,
    /// Scheme weight actually used.
    pub theta: f64,
    /// Errors at the final time.
    pub errors: ErrorSample,
}

/// Convergence table with observed rates between consecutive rows.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    /// Varied parameter.
    pub kind: SweepKind,
    /// Table rows in sweep order.
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    /// Observed rates `log(e_prev/e_cur) / log(v_prev/v_cur)` of the
    /// discrete error between consecutive rows.
    pub fn rates(&self) -> Vec<f64> {
        let param = |r: &ErrorRow| match self.kind {
            SweepKind::Spatial => r.h,
            SweepKind::Temporal => r.tau,
        };
        self.rows
            .windows(2)
            .map(|w| {
                (w[0].errors.discrete / w[1].errors.discrete).ln()
                    / (param(&w[0]) / param(&w[1])).ln()
            })
            .collect()
    }
}

fn cells_from_h(h: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidValue(format!("mesh size out of range: {h}")));
    }
    let n = (1.0 / h).round();
    if ((n * h) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidValue(format!(
            "mesh size {h} does not divide the unit interval"
        )));
    }
    Ok(n as usize)
}

fn steps_from_tau(tau: f64, t_final: f64) -> Result<usize> {
    if !(tau.is_finite() && tau > 0.0 && t_final.is_finite() && t_final > 0.0) {
        return Err(Error::InvalidValue(format!(
            "invalid step/final time: tau={tau}, T={t_final}"
        )));
    }
    let n = (t_final / tau).round();
    if (n * tau - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidValue(format!(
            "step size {tau} does not divide the final time {t_final}"
        )));
    }
    Ok(n as usize)
}

/// Runs one sweep of the discretization against the analytic solution and
/// reports errors at the final time.
pub fn convergence_study(cfg: &SweepConfig) -> Result<ErrorReport> {
    let sol = AnalyticSolution::new(cfg.a)?;
    let mut rows = Vec::with_capacity(cfg.values.len());
    for &v in &cfg.values {
        let (h, tau) = match cfg.kind {
            SweepKind::Spatial => (v, cfg.fixed),
            SweepKind::Temporal => (cfg.fixed, v),
        };
        let n_cells = cells_from_h(h)?;
        let n_steps = steps_from_tau(tau, cfg.t_final)?;
        let params = cfg.theta_rule.params(tau)?;
        let ops = assemble(
            Mesh1d::new(n_cells)?,
            cfg.degree_k,
            Damping::constant(cfg.a)?,
        )?;
        let stepper = Stepper::monolithic(ops, params)?;
        let init = initial_state(&stepper.ops, |x| sol.u(x, 0.0), |x| sol.p(x, 0.0))?;
        let run = stepper.run(init, n_steps, &[], None)?;
        let errors = error_norms(&stepper.ops, &run.final_state, cfg.t_final, &sol)?;
        rows.push(ErrorRow {
            h,
            tau,
            theta: params.theta,
            errors,
        });
    }
    Ok(ErrorReport {
        kind: cfg.kind,
        rows,
    })
}

/// Both sides of the generalized Poincare inequality
/// `|u| <= (1/pi)(1 + |a - abar| / abar) |du/dx| + (1/abar) |(a, u)|`
/// for a continuous-space function and a positive damping field, evaluated
/// by fine cellwise quadrature (`abar` is the mean of `a`).
pub fn poincare_sides(u: &VFunction, a: &Damping) -> Result<(f64, f64)> {
    let mesh = u.space.mesh;
    a.check_mesh(&mesh)?;
    let rule = gauss_rule(10)?;
    let tab = u.space.basis.tabulate(&rule);
    let nloc = u.space.dofs_per_cell();

    let mut a_mean = 0.0;
    for c in 0..mesh.n_cells {
        for (&r, &w) in rule.points.iter().zip(rule.weights.iter()) {
            a_mean += mesh.h * w * a.eval_in_cell(c, mesh.from_reference(c, r));
        }
    }
    if a_mean.abs() < 1e-300 {
        return Err(Error::InvalidValue("mean damping is zero".into()));
    }

    let mut norm_u2 = 0.0;
    let mut norm_du2 = 0.0;
    let mut norm_afluc2 = 0.0;
    let mut pair_au = 0.0;
    for c in 0..mesh.n_cells {
        for (q, (&r, &w)) in rule.points.iter().zip(rule.weights.iter()).enumerate() {
            let x = mesh.from_reference(c, r);
            let mut uv = 0.0;
            let mut duv = 0.0;
            for j in 0..nloc {
                let coeff = u.coeffs[u.space.cell_dof(c, j)];
                uv += coeff * tab.value(j, q);
                duv += coeff * tab.deriv(j, q);
            }
            duv /= mesh.h;
            let av = a.eval_in_cell(c, x);
            norm_u2 += mesh.h * w * uv * uv;
            norm_du2 += mesh.h * w * duv * duv;
            norm_afluc2 += mesh.h * w * (av - a_mean) * (av - a_mean);
            pair_au += mesh.h * w * av * uv;
        }
    }
    let lhs = norm_u2.sqrt();
    let rhs =
        (1.0 / PI) * (1.0 + norm_afluc2.sqrt() / a_mean) * norm_du2.sqrt() + pair_au.abs() / a_mean;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SpaceV;

    #[test]
    fn decay_rate_examples() {
        assert!((decay_rate(2.0 * PI).unwrap() - PI).abs() < 1e-12);
        assert!((decay_rate(10.0).unwrap() - 1.1102191).abs() < 1e-7);
        assert!((decay_rate(1024.0).unwrap() - 9.638e-3).abs() < 1e-6);
        assert!((decay_rate(0.5).unwrap() - 0.25).abs() < 1e-15);
        assert!(decay_rate(0.0).is_err());
        assert!(decay_rate(-1.0).is_err());
    }

    #[test]
    fn analytic_solution_satisfies_the_system() {
        let sol = AnalyticSolution::new(10.0).unwrap();
        assert!((sol.u(0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((sol.amp_p + 2.8297052).abs() < 1e-7);
        assert!((sol.energy(0.0) - 2.25).abs() < 2e-3);
        assert!((sol.energy(2.0) - 2.65e-2).abs() < 1e-4);
        // Characteristic polynomial and amplitude relation of the mode.
        for &a in &[2.0 * PI, 7.0, 10.0, 100.0, 1024.0] {
            let s = AnalyticSolution::new(a).unwrap();
            assert!(
                (s.lambda * s.lambda + a * s.lambda + PI * PI).abs() < 1e-10,
                "a={a}"
            );
            assert!((s.amp_p * s.lambda - PI).abs() < 1e-10, "a={a}");
        }
        // Finite-difference residual of both equations at sample points.
        let (dx, dt) = (1e-6, 1e-6);
        for &(x, t) in &[(0.3, 0.5), (0.7, 1.5), (0.1, 0.0)] {
            let du_dt = (sol.u(x, t + dt) - sol.u(x, t - dt)) / (2.0 * dt);
            let dp_dx = (sol.p(x + dx, t) - sol.p(x - dx, t)) / (2.0 * dx);
            let r1 = du_dt + dp_dx + 10.0 * sol.u(x, t);
            assert!(r1.abs() < 1e-6, "first equation residual {r1:e}");
            let dp_dt = (sol.p(x, t + dt) - sol.p(x, t - dt)) / (2.0 * dt);
            let du_dx = (sol.u(x + dx, t) - sol.u(x - dx, t)) / (2.0 * dx);
            let r2 = dp_dt + du_dx;
            assert!(r2.abs() < 1e-6, "second equation residual {r2:e}");
        }
        assert!(AnalyticSolution::new(6.0).is_err());
    }

    #[test]
    fn stability_constants_match_frozen_arithmetic() {
        let c = StabilityConstants::new(10.0, 10.0, 1.0).unwrap();
        assert!((c.alpha_cont - 0.0888889).abs() < 1e-6);
        assert!((c.alpha_disc - 0.0147820).abs() < 1e-6);
        assert!((c.eps0 - 0.0443459).abs() < 1e-6);
        assert!((c.tau0 - 6.4433).abs() < 1e-3);
        assert!(c.alpha_disc < c.alpha_cont);
        assert!(c.alpha_cont > 0.0 && c.eps0 > 0.0);
        let cn = StabilityConstants::new(10.0, 10.0, 0.5).unwrap();
        assert!(cn.tau0.is_infinite());
        assert!(StabilityConstants::new(0.0, 1.0, 1.0).is_err());
        assert!(StabilityConstants::new(2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rates_increase_with_the_damping_floor() {
        // At a fixed ceiling a1, both rates grow monotonically in a0.
        for &a1 in &[1.0, 10.0, 100.0] {
            let mut prev = (0.0, 0.0);
            for i in 1..=20 {
                let a0 = a1 * i as f64 / 20.0;
                let c = StabilityConstants::new(a0, a1, 1.0).unwrap();
                assert!(c.alpha_cont > prev.0, "a1={a1} a0={a0}");
                assert!(c.alpha_disc > prev.1, "a1={a1} a0={a0}");
                prev = (c.alpha_cont, c.alpha_disc);
            }
        }
    }

    #[test]
    fn rates_dominate_min_of_linear_and_reciprocal_bounds() {
        // With equal bounds a0 = a1 = a, the rate exceeds
        // min(c' a, c'' / a) once the coefficients are calibrated at the
        // crossover a = 1.
        fn cont(a: f64) -> f64 {
            StabilityConstants::new(a, a, 1.0).unwrap().alpha_cont
        }
        fn disc(a: f64) -> f64 {
            StabilityConstants::new(a, a, 1.0).unwrap().alpha_disc
        }
        type Rate = fn(f64) -> f64;
        let cal = StabilityConstants::new(1.0, 1.0, 1.0).unwrap();
        let cases: [(f64, Rate); 2] = [(cal.alpha_cont, cont), (cal.alpha_disc, disc)];
        for (cprime, value) in cases {
            for e in -5..=10i32 {
                let a = 2.0f64.powi(e);
                let bound = (cprime * a).min(cprime / a);
                assert!(
                    value(a) >= bound * (1.0 - 1e-12),
                    "a=2^{e}: {} < {bound}",
                    value(a)
                );
            }
        }
    }

    #[test]
    fn fit_recovers_exact_exponentials() {
        let series = EnergySeries {
            order: 0,
            tau: 0.1,
            first_step: 0,
            values: (0..100)
                .map(|n| 3.0 * (-2.0 * 0.1 * n as f64).exp())
                .collect(),
        };
        let fit = fit_decay_rate(&series, None).unwrap();
        assert!((fit.alpha - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-12);
        assert!(fit.residual < 1e-13);
        assert_eq!(fit.window.0, 10);

        let flat = EnergySeries {
            order: 0,
            tau: 0.5,
            first_step: 0,
            values: vec![7.0; 20],
        };
        let fit = fit_decay_rate(&flat, None).unwrap();
        assert!(fit.alpha.abs() < 1e-14);
    }

    #[test]
    fn fit_on_analytic_energies_recovers_twice_the_rate() {
        for &a in &[7.0, 10.0, 64.0] {
            let sol = AnalyticSolution::new(a).unwrap();
            let tau = 0.05;
            let series = EnergySeries {
                order: 0,
                tau,
                first_step: 0,
                values: (0..=200).map(|n| sol.energy(n as f64 * tau)).collect(),
            };
            let fit = fit_decay_rate(&series, Some((0.0, 10.0))).unwrap();
            let expect = 2.0 * decay_rate(a).unwrap();
            assert!(
                ((fit.alpha - expect) / expect).abs() < 1e-6,
                "a={a}: {} vs {expect}",
                fit.alpha
            );
        }
    }

    #[test]
    fn fit_rejects_bad_windows() {
        let series = EnergySeries {
            order: 0,
            tau: 0.1,
            first_step: 0,
            values: vec![1.0, 0.0, 0.5],
        };
        assert!(fit_decay_rate(&series, Some((0.0, 0.3))).is_err());
        assert!(fit_decay_rate(&series, Some((5.0, 6.0))).is_err());
    }

    #[test]
    fn operator_norm_of_identity_is_one() {
        let ops = assemble(Mesh1d::new(4).unwrap(), 0, Damping::constant(10.0).unwrap()).unwrap();
        let st = Stepper::monolithic(ops, SchemeParams::implicit_euler(0.5).unwrap()).unwrap();
        let nrm = operator_norm(&st, 0, 1e-8, 100, 1).unwrap();
        assert_eq!(nrm.value, 1.0);
        assert_eq!(nrm.iterations, 0);
    }

    #[test]
    fn operator_norm_is_seed_insensitive() {
        let ops = assemble(Mesh1d::new(6).unwrap(), 0, Damping::constant(10.0).unwrap()).unwrap();
        let st = Stepper::monolithic(ops, SchemeParams::implicit_euler(0.25).unwrap()).unwrap();
        let n1 = operator_norm(&st, 3, 1e-10, 500, 7).unwrap();
        let n2 = operator_norm(&st, 3, 1e-10, 500, 1234).unwrap();
        assert!((n1.value - n2.value).abs() < 1e-8 * n1.value);
        assert!(n1.value < 1.0);
    }

    #[test]
    fn error_norms_vanish_on_projected_exact_state() {
        let sol = AnalyticSolution::new(10.0).unwrap();
        let ops = assemble(
            Mesh1d::new(16).unwrap(),
            0,
            Damping::constant(10.0).unwrap(),
        )
        .unwrap();
        let t = 0.7;
        let state = State {
            u: ops.project_v(|x| sol.u(x, t)).unwrap().coeffs,
            p: ops.project_q(|x| sol.p(x, t)).unwrap().coeffs,
            time_index: 0,
        };
        let e = error_norms(&ops, &state, t, &sol).unwrap();
        assert!(e.discrete < 1e-13);
        assert!(e.l2_u < 2e-3 && e.l2_p < 0.2 * sol.p(0.5, t).abs().max(1e-3));
    }

    #[test]
    fn convergence_study_validates_parameters() {
        let cfg = SweepConfig {
            kind: SweepKind::Spatial,
            values: vec![0.3],
            fixed: 0.1,
            a: 10.0,
            degree_k: 0,
            theta_rule: ThetaRule::Fixed(1.0),
            t_final: 1.0,
        };
        assert!(convergence_study(&cfg).is_err());
        let cfg2 = SweepConfig {
            kind: SweepKind::Temporal,
            values: vec![0.3],
            fixed: 0.25,
            a: 10.0,
            degree_k: 0,
            theta_rule: ThetaRule::Fixed(1.0),
            t_final: 1.0,
        };
        assert!(convergence_study(&cfg2).is_err());
    }

    #[test]
    fn small_convergence_sweep_shows_second_order_space() {
        let cfg = SweepConfig {
            kind: SweepKind::Spatial,
            values: vec![0.25, 0.125, 0.0625],
            fixed: 1e-4,
            a: 10.0,
            degree_k: 0,
            theta_rule: ThetaRule::ShiftedMidpoint,
            t_final: 0.1,
        };
        let report = convergence_study(&cfg).unwrap();
        let rates = report.rates();
        assert_eq!(rates.len(), 2);
        for r in rates {
            assert!((r - 2.0).abs() < 0.35, "spatial rate {r}");
        }
    }

    #[test]
    fn poincare_inequality_examples() {
        let mesh = Mesh1d::new(32).unwrap();
        let space = SpaceV::new(mesh, 1).unwrap();
        let a = Damping::constant(1.0).unwrap();

        let constant = VFunction::new(space.clone(), vec![2.5; space.dim()]).unwrap();
        let (lhs, rhs) = poincare_sides(&constant, &a).unwrap();
        assert!((lhs - 2.5).abs() < 1e-12);
        assert!((rhs - 2.5).abs() < 1e-12);

        let ops = assemble(mesh, 1, a.clone()).unwrap();
        let sine = ops.project_v(|x| (2.0 * PI * x).sin()).unwrap();
        let (lhs, rhs) = poincare_sides(&sine, &a).unwrap();
        assert!((lhs - 0.5f64.sqrt()).abs() < 1e-4);
        assert!((rhs - 2.0f64.sqrt()).abs() < 1e-3);
        assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn poincare_holds_for_random_functions_and_damping() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..100 {
            let n = 4 + (trial % 5) * 3;
            let mesh = Mesh1d::new(n).unwrap();
            let k = trial % 3;
            let space = SpaceV::new(mesh, k).unwrap();
            let coeffs: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let u = VFunction::new(space, coeffs).unwrap();
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..5.0)).collect();
            let a = Damping::piecewise_constant(vals).unwrap();
            let (lhs, rhs) = poincare_sides(&u, &a).unwrap();
            assert!(lhs <= rhs + 1e-12, "trial {trial}: {lhs} vs {rhs}");
        }
    }
}
