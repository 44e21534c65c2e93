//! The experiment drivers: each resolves its configuration, runs the solver
//! library, and renders a CSV table (plus an optional SVG plot).

use std::f64::consts::PI;

use dampedwave_core::analysis::{
    convergence_study, decay_rate, fit_decay_rate, operator_norm, AnalyticSolution, SweepConfig,
    SweepKind, ThetaRule,
};
use dampedwave_core::assembly::{assemble, Operators};
use dampedwave_core::damping::Damping;
use dampedwave_core::mesh::Mesh1d;
use dampedwave_core::stationary::{solve_stationary, StationaryMethod};
use dampedwave_core::stepper::{initial_state, EnergySeries, SchemeParams, Stepper};

use crate::config::{ResolvedConfig, Settings};
use crate::svg::{log_linear_plot, Series};
use crate::CliError;

/// Rendered experiment artifacts.
pub struct Output {
    pub csv: String,
    pub svg: Option<String>,
}

/// Scientific notation with six significant digits, the output format of
/// every numeric CSV cell.
fn fmt(x: f64) -> String {
    format!("{x:.5e}")
}

fn damping_from(settings: &Settings, default_a: f64) -> Result<(Damping, String), CliError> {
    if let Some(vals) = &settings.a_values {
        let label = vals
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        Ok((Damping::piecewise_constant(vals.clone())?, label))
    } else {
        let a = settings.a_const.unwrap_or(default_a);
        Ok((Damping::constant(a)?, a.to_string()))
    }
}

fn constant_a(settings: &Settings, default_a: f64) -> Result<f64, CliError> {
    if settings.a_values.is_some() {
        return Err(CliError::config(
            "this experiment requires constant damping; use a-const",
        ));
    }
    Ok(settings.a_const.unwrap_or(default_a))
}

fn scheme_rules(settings: &Settings) -> Result<Vec<ThetaRule>, CliError> {
    match (settings.theta, settings.lambda) {
        (Some(theta), None) => Ok(vec![ThetaRule::Fixed(theta)]),
        (None, Some(lambda)) => {
            if lambda == 1.0 {
                Ok(vec![ThetaRule::ShiftedMidpoint])
            } else {
                Err(CliError::config(format!(
                    "only lambda = 1 (theta = 1/2 + tau) is supported here, got {lambda}"
                )))
            }
        }
        (None, None) => Ok(vec![ThetaRule::Fixed(1.0), ThetaRule::ShiftedMidpoint]),
        (Some(_), Some(_)) => unreachable!("rejected while merging settings"),
    }
}

fn reject_svg(settings: &Settings, experiment: &str) -> Result<(), CliError> {
    if settings.svg.is_some() {
        return Err(CliError::config(format!(
            "svg output is not available for the {experiment} experiment"
        )));
    }
    Ok(())
}

fn initial_preset(name: &str, a: f64) -> Result<Box<dyn Fn(f64) -> f64>, CliError> {
    match name {
        "zero" => Ok(Box::new(|_| 0.0)),
        "cosine" => Ok(Box::new(|x| (PI * x).cos())),
        "sine" => Ok(Box::new(|x| (PI * x).sin())),
        "hat" => Ok(Box::new(|x| 1.0 - (2.0 * x - 1.0).abs())),
        "mode" => {
            let sol = AnalyticSolution::new(a)?;
            Ok(Box::new(move |x| sol.p(x, 0.0)))
        }
        _ => Err(CliError::config(format!(
            "unknown initial-data preset {name:?} (use zero, cosine, sine, hat, or mode)"
        ))),
    }
}

fn fit_or_nan(series: &EnergySeries) -> String {
    match fit_decay_rate(series, None) {
        Ok(fit) => fmt(fit.alpha),
        Err(_) => "nan".into(),
    }
}

/// Energy decay table: exact and discrete energies at t = 0, 2, ..., 10 for
/// each scheme variant, with a fitted-decay-rate footer row.
pub fn decay_table(settings: &Settings) -> Result<Output, CliError> {
    let a = constant_a(settings, 10.0)?;
    let sol = AnalyticSolution::new(a)?;
    let n_cells = settings.resolve_n_cells(1000)?;
    let k = settings.degree.unwrap_or(0);
    let tau = settings.tau.unwrap_or(1e-3);
    let t_final = 10.0;
    if let Some(t) = settings.t_final {
        if (t - t_final).abs() > 1e-12 {
            return Err(CliError::config(
                "the decay table is defined on t in [0, 10]; t-final cannot be changed",
            ));
        }
    }
    let n_steps = ((t_final / tau).round() as usize).max(1);
    if (n_steps as f64 * tau - t_final).abs() > 1e-9 {
        return Err(CliError::config(format!(
            "tau = {tau} does not divide the final time 10"
        )));
    }
    let rules = scheme_rules(settings)?;
    let u0_name = settings.u0.clone().unwrap_or_else(|| "cosine".into());
    let p0_name = settings.p0.clone().unwrap_or_else(|| "mode".into());
    let u0 = initial_preset(&u0_name, a)?;
    let p0 = initial_preset(&p0_name, a)?;

    let mut config = ResolvedConfig::new("decay-table");
    config.push("a-const", a);
    config.push("n-cells", n_cells);
    config.push("degree", k);
    config.push("tau", tau);
    config.push("t-final", t_final);
    config.push("u0", &u0_name);
    config.push("p0", &p0_name);
    config.push(
        "schemes",
        rules
            .iter()
            .map(|r| r.label())
            .collect::<Vec<_>>()
            .join("|"),
    );

    let mut columns: Vec<(String, EnergySeries)> = Vec::new();
    let exact = EnergySeries {
        order: 0,
        tau,
        first_step: 0,
        values: (0..=n_steps).map(|n| sol.energy(n as f64 * tau)).collect(),
    };
    for rule in &rules {
        let params = rule.params(tau)?;
        let ops = assemble(Mesh1d::new(n_cells)?, k, Damping::constant(a)?)?;
        let stepper = Stepper::monolithic(ops, params)?;
        let init = initial_state(&stepper.ops, &u0, &p0)?;
        let run = stepper.run(init, n_steps, &[0], None)?;
        columns.push((rule.label(), run.energies.into_iter().next().unwrap()));
    }

    let mut csv = config.comment_row();
    csv.push('\n');
    csv.push_str("t,E_exact");
    for (label, _) in &columns {
        csv.push_str(&format!(",E[{label}]"));
    }
    csv.push('\n');
    for t_row in [0.0f64, 2.0, 4.0, 6.0, 8.0, 10.0] {
        let idx = (t_row / tau).round() as usize;
        let mut line = format!("{},{}", fmt(t_row), fmt(exact.values[idx.min(n_steps)]));
        for (_, series) in &columns {
            line.push_str(&format!(",{}", fmt(series.values[idx.min(n_steps)])));
        }
        csv.push_str(&line);
        csv.push('\n');
    }
    let mut footer = format!("alpha,{}", fit_or_nan(&exact));
    for (_, series) in &columns {
        footer.push_str(&format!(",{}", fit_or_nan(series)));
    }
    csv.push_str(&footer);
    csv.push('\n');

    let svg = settings.svg.as_ref().map(|_| {
        let mut series = vec![Series {
            label: "exact".into(),
            points: exact
                .values
                .iter()
                .enumerate()
                .map(|(i, &e)| (exact.time(i), e))
                .collect(),
        }];
        for (label, s) in &columns {
            series.push(Series {
                label: label.clone(),
                points: s
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| (s.time(i), e))
                    .collect(),
            });
        }
        log_linear_plot("energy decay", "t", &series)
    });
    Ok(Output { csv, svg })
}

/// Convergence table: final-time errors and observed rates for the spatial
/// and/or temporal sweep, one error/rate column pair per scheme.
pub fn convergence(settings: &Settings) -> Result<Output, CliError> {
    reject_svg(settings, "convergence")?;
    let a = constant_a(settings, 10.0)?;
    let k = settings.degree.unwrap_or(0);
    let rules = scheme_rules(settings)?;
    let sweep = settings.sweep.clone().unwrap_or_else(|| "both".into());
    let kinds: Vec<SweepKind> = match sweep.as_str() {
        "spatial" => vec![SweepKind::Spatial],
        "temporal" => vec![SweepKind::Temporal],
        "both" => vec![SweepKind::Spatial, SweepKind::Temporal],
        other => {
            return Err(CliError::config(format!(
                "unknown sweep {other:?} (use spatial, temporal, or both)"
            )))
        }
    };
    let values = vec![0.5, 0.25, 0.125, 0.0625];

    let mut config = ResolvedConfig::new("convergence");
    config.push("a-const", a);
    config.push("degree", k);
    config.push("sweep", &sweep);
    config.push(
        "schemes",
        rules
            .iter()
            .map(|r| r.label())
            .collect::<Vec<_>>()
            .join("|"),
    );

    let mut csv_body = String::new();
    for kind in &kinds {
        let (fixed, t_final, param_name) = match kind {
            SweepKind::Spatial => (settings.tau.unwrap_or(1e-5), 0.5, "h"),
            SweepKind::Temporal => {
                let n = settings.resolve_n_cells(10_000)?;
                (1.0 / n as f64, 1.0, "tau")
            }
        };
        let t_final = settings.t_final.unwrap_or(t_final);
        config.push(
            match kind {
                SweepKind::Spatial => "spatial-tau",
                SweepKind::Temporal => "temporal-h",
            },
            fixed,
        );
        config.push(
            match kind {
                SweepKind::Spatial => "spatial-t-final",
                SweepKind::Temporal => "temporal-t-final",
            },
            t_final,
        );
        let mut reports = Vec::new();
        for rule in &rules {
            let report = convergence_study(&SweepConfig {
                kind: *kind,
                values: values.clone(),
                fixed,
                a,
                degree_k: k,
                theta_rule: *rule,
                t_final,
            })?;
            let rates = report.rates();
            reports.push((report, rates));
        }
        for (i, &v) in values.iter().enumerate() {
            let kind_name = match kind {
                SweepKind::Spatial => "spatial",
                SweepKind::Temporal => "temporal",
            };
            let mut line = format!("{kind_name}[{param_name}],{}", fmt(v));
            for (report, rates) in &reports {
                line.push_str(&format!(",{}", fmt(report.rows[i].errors.discrete)));
                if i == 0 {
                    line.push(',');
                } else {
                    line.push_str(&format!(",{}", fmt(rates[i - 1])));
                }
            }
            csv_body.push_str(&line);
            csv_body.push('\n');
        }
    }

    let mut csv = config.comment_row();
    csv.push('\n');
    csv.push_str("sweep,param");
    for rule in &rules {
        let label = rule.label();
        csv.push_str(&format!(",error[{label}],rate[{label}]"));
    }
    csv.push('\n');
    csv.push_str(&csv_body);
    Ok(Output { csv, svg: None })
}

/// Energy histories contrasting the plain midpoint scheme with its shifted
/// variant on a sequence of fine meshes, hat-function initial flux.
pub fn cn_demo(settings: &Settings) -> Result<Output, CliError> {
    let a = constant_a(settings, 10.0)?;
    let k = settings.degree.unwrap_or(0);
    let tau = settings.tau.unwrap_or(1e-2);
    let n_steps = settings.resolve_n_steps(tau, 10.0)?;
    let exponents = [7u32, 8, 9];
    let hat = |x: f64| 1.0 - (2.0 * x - 1.0).abs();

    let mut config = ResolvedConfig::new("cn-demo");
    config.push("a-const", a);
    config.push("degree", k);
    config.push("tau", tau);
    config.push("n-steps", n_steps);
    config.push("h", "2^-7|2^-8|2^-9");
    config.push("u0", "zero");
    config.push("p0", "hat");
    config.push("schemes", "theta=1/2|theta=1/2+tau");

    let mut runs = Vec::new();
    for &e in &exponents {
        let n_cells = 1usize << e;
        for (scheme_label, params) in [
            ("theta=1/2", SchemeParams::crank_nicolson(tau)?),
            ("theta=1/2+tau", SchemeParams::shifted_midpoint(tau)?),
        ] {
            let ops = assemble(Mesh1d::new(n_cells)?, k, Damping::constant(a)?)?;
            let stepper = Stepper::monolithic(ops, params)?;
            let init = initial_state(&stepper.ops, |_| 0.0, hat)?;
            let run = stepper.run(init, n_steps, &[0, 1], None)?;
            runs.push((format!("h=2^-{e},{scheme_label}"), run));
        }
    }

    let mut csv = config.comment_row();
    csv.push('\n');
    csv.push('t');
    for (label, _) in &runs {
        csv.push_str(&format!(",E0[{label}],E1[{label}]"));
    }
    csv.push('\n');
    for n in 0..=n_steps {
        let mut line = fmt(n as f64 * tau);
        for (_, run) in &runs {
            let e0 = &run.energies[0];
            let e1 = &run.energies[1];
            line.push_str(&format!(",{}", fmt(e0.values[n])));
            if n >= e1.first_step {
                line.push_str(&format!(",{}", fmt(e1.values[n - e1.first_step])));
            } else {
                line.push(',');
            }
        }
        csv.push_str(&line);
        csv.push('\n');
    }

    let svg = settings.svg.as_ref().map(|_| {
        let series: Vec<Series> = runs
            .iter()
            .map(|(label, run)| Series {
                label: label.clone(),
                points: run.energies[0]
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| (run.energies[0].time(i), e))
                    .collect(),
            })
            .collect();
        log_linear_plot("midpoint vs shifted midpoint energy", "t", &series)
    });
    Ok(Output { csv, svg })
}

/// Fitted decay rate of the evolution operator versus the analytic rate
/// formula over a dyadic grid of damping constants.
pub fn arate(settings: &Settings) -> Result<Output, CliError> {
    if settings.a_const.is_some() || settings.a_values.is_some() {
        return Err(CliError::config(
            "the rate experiment sweeps its own damping grid; a-const/a-values do not apply",
        ));
    }
    let n_cells = settings.resolve_n_cells(20)?;
    let k = settings.degree.unwrap_or(0);
    let tau = settings.tau.unwrap_or(0.05);
    let n_steps = settings.resolve_n_steps(tau, 10.0)?;
    let t_final = n_steps as f64 * tau;
    let seed = settings.seed.unwrap_or(42);
    let params = SchemeParams::shifted_midpoint(tau)?;

    let mut config = ResolvedConfig::new("arate");
    config.push("n-cells", n_cells);
    config.push("degree", k);
    config.push("tau", tau);
    config.push("t-final", t_final);
    config.push("seed", seed);
    config.push("a-grid", "2^-5..2^10");
    config.push("schemes", "theta=1/2+tau");

    let mut rows = Vec::new();
    for e in -5..=10i32 {
        let a = 2f64.powi(e);
        let ops = assemble(Mesh1d::new(n_cells)?, k, Damping::constant(a)?)?;
        let stepper = Stepper::monolithic(ops, params)?;
        let norm = operator_norm(&stepper, n_steps, 1e-8, 5000, seed)?;
        let fitted = -norm.value.ln() / t_final;
        rows.push((a, decay_rate(a)?, fitted));
    }

    let mut csv = config.comment_row();
    csv.push('\n');
    csv.push_str("a,g_analytic,fitted_rate\n");
    for &(a, g, fitted) in &rows {
        csv.push_str(&format!("{},{},{}\n", fmt(a), fmt(g), fmt(fitted)));
    }

    let svg = settings.svg.as_ref().map(|_| {
        let series = vec![
            Series {
                label: "analytic".into(),
                points: rows.iter().map(|&(a, g, _)| (a.log2(), g)).collect(),
            },
            Series {
                label: "fitted".into(),
                points: rows.iter().map(|&(a, _, f)| (a.log2(), f)).collect(),
            },
        ];
        log_linear_plot("decay rate vs damping", "log2(a)", &series)
    });
    Ok(Output { csv, svg })
}

/// Stationary solve with cosine/sine loads, sampled on a uniform grid. Both
/// factorization paths are run and must agree.
pub fn stationary(settings: &Settings) -> Result<Output, CliError> {
    reject_svg(settings, "stationary")?;
    let n_cells = settings.resolve_n_cells(64)?;
    let k = settings.degree.unwrap_or(0);
    let (damping, damping_label) = damping_from(settings, 10.0)?;
    let f_amp = settings.f_amp.unwrap_or(1.0);
    let g_amp = settings.g_amp.unwrap_or(0.0);
    let n_samples = settings.n_samples.unwrap_or(101).max(2);

    let ops = assemble(Mesh1d::new(n_cells)?, k, damping)?;
    let f = ops.load_v(|x| f_amp * (PI * x).cos(), 4)?;
    let g = ops.load_q(|x| g_amp * (PI * x).sin(), 4)?;
    let direct = solve_stationary(&ops, &f, &g, StationaryMethod::Direct)?;
    let schur = solve_stationary(&ops, &f, &g, StationaryMethod::SchurDamping)?;
    let mut gap = 0.0f64;
    let mut scale = 1.0f64;
    for (x, y) in direct
        .u
        .coeffs
        .iter()
        .zip(schur.u.coeffs.iter())
        .chain(direct.p.coeffs.iter().zip(schur.p.coeffs.iter()))
    {
        gap = gap.max((x - y).abs());
        scale = scale.max(x.abs());
    }
    if gap > 1e-10 * scale {
        return Err(CliError::numerical(format!(
            "stationary factorization paths disagree by {gap:.2e}"
        )));
    }

    let mut config = ResolvedConfig::new("stationary");
    config.push("a", damping_label);
    config.push("n-cells", n_cells);
    config.push("degree", k);
    config.push("f-amp", f_amp);
    config.push("g-amp", g_amp);
    config.push("n-samples", n_samples);

    let mut csv = config.comment_row();
    csv.push('\n');
    csv.push_str("x,u,p\n");
    for i in 0..n_samples {
        let x = i as f64 / (n_samples - 1) as f64;
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt(x),
            fmt(direct.u.eval(x)?),
            fmt(direct.p.eval(x)?)
        ));
    }
    Ok(Output { csv, svg: None })
}

/// General time-stepping driver: snapshots of the solution on a uniform
/// sample grid at a fixed step stride.
pub fn simulate(settings: &Settings) -> Result<Output, CliError> {
    let n_cells = settings.resolve_n_cells(100)?;
    let k = settings.degree.unwrap_or(0);
    let tau = settings.tau.unwrap_or(1e-2);
    let n_steps = settings.resolve_n_steps(tau, 1.0)?;
    let (damping, damping_label) = damping_from(settings, 10.0)?;
    let a_for_preset = settings.a_const.unwrap_or(10.0);
    let params = match (settings.theta, settings.lambda) {
        (Some(theta), None) => SchemeParams::fixed(theta, tau)?,
        (None, Some(lambda)) => SchemeParams::adaptive(lambda, tau)?,
        (None, None) => SchemeParams::implicit_euler(tau)?,
        (Some(_), Some(_)) => unreachable!("rejected while merging settings"),
    };
    let u0_name = settings.u0.clone().unwrap_or_else(|| "cosine".into());
    let p0_name = settings.p0.clone().unwrap_or_else(|| "zero".into());
    let u0 = initial_preset(&u0_name, a_for_preset)?;
    let p0 = initial_preset(&p0_name, a_for_preset)?;
    let stride = settings
        .snapshot_stride
        .unwrap_or_else(|| (n_steps / 10).max(1));
    if stride == 0 {
        return Err(CliError::config("snapshot-stride must be positive"));
    }
    let n_samples = settings.n_samples.unwrap_or(101).max(2);

    let mut config = ResolvedConfig::new("simulate");
    config.push("a", damping_label);
    config.push("n-cells", n_cells);
    config.push("degree", k);
    config.push("tau", tau);
    config.push("n-steps", n_steps);
    config.push("theta", params.theta);
    config.push("u0", &u0_name);
    config.push("p0", &p0_name);
    config.push("snapshot-stride", stride);
    config.push("n-samples", n_samples);

    let ops: Operators = assemble(Mesh1d::new(n_cells)?, k, damping)?;
    let stepper = Stepper::monolithic(ops, params)?;
    let init = initial_state(&stepper.ops, &u0, &p0)?;
    let run = stepper.run(init, n_steps, &[0], Some(stride))?;

    let mut csv = config.comment_row();
    csv.push('\n');
    csv.push_str("t,x,u,p\n");
    for snapshot in &run.snapshots {
        let t = snapshot.time_index as f64 * tau;
        let u = dampedwave_core::space::VFunction::new(
            stepper.ops.space_v.clone(),
            snapshot.u.clone(),
        )?;
        let p = dampedwave_core::space::QFunction::new(
            stepper.ops.space_q.clone(),
            snapshot.p.clone(),
        )?;
        for i in 0..n_samples {
            let x = i as f64 / (n_samples - 1) as f64;
            csv.push_str(&format!(
                "{},{},{},{}\n",
                fmt(t),
                fmt(x),
                fmt(u.eval(x)?),
                fmt(p.eval(x)?)
            ));
        }
    }

    let svg = settings.svg.as_ref().map(|_| {
        let e0 = &run.energies[0];
        let series = vec![Series {
            label: "E0".into(),
            points: e0
                .values
                .iter()
                .enumerate()
                .map(|(i, &e)| (e0.time(i), e))
                .collect(),
        }];
        log_linear_plot("energy history", "t", &series)
    });
    Ok(Output { csv, svg })
}
