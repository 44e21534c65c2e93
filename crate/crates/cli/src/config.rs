//! Layered experiment configuration: built-in defaults, then a flat
//! `key = value` config file, then command-line flags, with validation of
//! the combined result.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use crate::CliError;

/// Command-line overrides shared by every experiment. Each long flag name
/// matches the corresponding config-file key.
#[derive(Debug, Clone, Args)]
pub struct Overrides {
    /// Flat key = value config file read before applying flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Number of mesh cells.
    #[arg(long, value_name = "N")]
    pub n_cells: Option<usize>,
    /// Mesh size (alternative to --n-cells; must divide the unit interval).
    #[arg(long, value_name = "H")]
    pub h: Option<f64>,
    /// Polynomial degree index k of the mixed pair.
    #[arg(long, value_name = "K")]
    pub degree: Option<usize>,
    /// Time step.
    #[arg(long, value_name = "TAU")]
    pub tau: Option<f64>,
    /// Fixed scheme weight (mutually exclusive with --lambda).
    #[arg(long, value_name = "THETA")]
    pub theta: Option<f64>,
    /// Adaptive scheme weight theta = 1/2 + lambda * tau.
    #[arg(long, value_name = "LAMBDA")]
    pub lambda: Option<f64>,
    /// Constant damping coefficient.
    #[arg(long, value_name = "A")]
    pub a_const: Option<f64>,
    /// Piecewise-constant damping, one comma-separated value per cell.
    #[arg(long, value_name = "LIST")]
    pub a_values: Option<String>,
    /// Final time.
    #[arg(long, value_name = "T")]
    pub t_final: Option<f64>,
    /// Number of time steps (alternative to --t-final).
    #[arg(long, value_name = "N")]
    pub n_steps: Option<usize>,
    /// Seed for randomized starting vectors.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Convergence sweep selection: spatial, temporal, or both.
    #[arg(long, value_name = "KIND")]
    pub sweep: Option<String>,
    /// Initial displacement preset: zero, cosine, sine, or hat.
    #[arg(long, value_name = "NAME")]
    pub u0: Option<String>,
    /// Initial flux preset: zero, cosine, sine, hat, or mode (the analytic
    /// flux amplitude times sin(pi x)).
    #[arg(long, value_name = "NAME")]
    pub p0: Option<String>,
    /// Amplitude of the stationary volume load f(x) = f_amp * cos(pi x).
    #[arg(long, value_name = "AMP")]
    pub f_amp: Option<f64>,
    /// Amplitude of the stationary flux load g(x) = g_amp * sin(pi x).
    #[arg(long, value_name = "AMP")]
    pub g_amp: Option<f64>,
    /// Number of spatial sample points for solution output.
    #[arg(long, value_name = "N")]
    pub n_samples: Option<usize>,
    /// Record a snapshot every this many steps.
    #[arg(long, value_name = "N")]
    pub snapshot_stride: Option<usize>,
    /// Output CSV path (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Optional SVG plot path.
    #[arg(long, value_name = "FILE")]
    pub svg: Option<PathBuf>,
}

/// Raw option set merged from defaults, file, and flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub n_cells: Option<usize>,
    pub h: Option<f64>,
    pub degree: Option<usize>,
    pub tau: Option<f64>,
    pub theta: Option<f64>,
    pub lambda: Option<f64>,
    pub a_const: Option<f64>,
    pub a_values: Option<Vec<f64>>,
    pub t_final: Option<f64>,
    pub n_steps: Option<usize>,
    pub seed: Option<u64>,
    pub sweep: Option<String>,
    pub u0: Option<String>,
    pub p0: Option<String>,
    pub f_amp: Option<f64>,
    pub g_amp: Option<f64>,
    pub n_samples: Option<usize>,
    pub snapshot_stride: Option<usize>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::config(format!("invalid value for {key}: {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(|v| parse(key, v.trim()))
        .collect::<Result<Vec<f64>, _>>()
}

impl Settings {
    /// Reads a flat `key = value` file; `#` starts a comment, blank lines
    /// are skipped, keys match the long flag names.
    pub fn from_file(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut settings = Settings::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!(
                    "{}:{}: expected key = value, got {raw:?}",
                    path.display(),
                    line_no + 1
                ))
            })?;
            settings.set(key.trim(), value.trim())?;
        }
        Ok(settings)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "n-cells" => self.n_cells = Some(parse(key, value)?),
            "h" => self.h = Some(parse(key, value)?),
            "degree" => self.degree = Some(parse(key, value)?),
            "tau" => self.tau = Some(parse(key, value)?),
            "theta" => self.theta = Some(parse(key, value)?),
            "lambda" => self.lambda = Some(parse(key, value)?),
            "a-const" => self.a_const = Some(parse(key, value)?),
            "a-values" => self.a_values = Some(parse_list(key, value)?),
            "t-final" => self.t_final = Some(parse(key, value)?),
            "n-steps" => self.n_steps = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "sweep" => self.sweep = Some(value.to_string()),
            "u0" => self.u0 = Some(value.to_string()),
            "p0" => self.p0 = Some(value.to_string()),
            "f-amp" => self.f_amp = Some(parse(key, value)?),
            "g-amp" => self.g_amp = Some(parse(key, value)?),
            "n-samples" => self.n_samples = Some(parse(key, value)?),
            "snapshot-stride" => self.snapshot_stride = Some(parse(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "svg" => self.svg = Some(PathBuf::from(value)),
            _ => return Err(CliError::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// File settings overlaid with command-line flags (flags win).
    pub fn merge(overrides: &Overrides) -> Result<Self, CliError> {
        let mut s = match &overrides.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        if let Some(v) = overrides.n_cells {
            s.n_cells = Some(v);
        }
        if let Some(v) = overrides.h {
            s.h = Some(v);
        }
        if let Some(v) = overrides.degree {
            s.degree = Some(v);
        }
        if let Some(v) = overrides.tau {
            s.tau = Some(v);
        }
        if let Some(v) = overrides.theta {
            s.theta = Some(v);
        }
        if let Some(v) = overrides.lambda {
            s.lambda = Some(v);
        }
        if let Some(v) = overrides.a_const {
            s.a_const = Some(v);
        }
        if let Some(v) = &overrides.a_values {
            s.a_values = Some(parse_list("a-values", v)?);
        }
        if let Some(v) = overrides.t_final {
            s.t_final = Some(v);
        }
        if let Some(v) = overrides.n_steps {
            s.n_steps = Some(v);
        }
        if let Some(v) = overrides.seed {
            s.seed = Some(v);
        }
        if let Some(v) = &overrides.sweep {
            s.sweep = Some(v.clone());
        }
        if let Some(v) = &overrides.u0 {
            s.u0 = Some(v.clone());
        }
        if let Some(v) = &overrides.p0 {
            s.p0 = Some(v.clone());
        }
        if let Some(v) = overrides.f_amp {
            s.f_amp = Some(v);
        }
        if let Some(v) = overrides.g_amp {
            s.g_amp = Some(v);
        }
        if let Some(v) = overrides.n_samples {
            s.n_samples = Some(v);
        }
        if let Some(v) = overrides.snapshot_stride {
            s.snapshot_stride = Some(v);
        }
        if let Some(v) = &overrides.out {
            s.out = Some(v.clone());
        }
        if let Some(v) = &overrides.svg {
            s.svg = Some(v.clone());
        }
        if s.theta.is_some() && s.lambda.is_some() {
            return Err(CliError::config(
                "theta and lambda are mutually exclusive; set exactly one",
            ));
        }
        if let (Some(n), Some(h)) = (s.n_cells, s.h) {
            if (n as f64 * h - 1.0).abs() > 1e-9 {
                return Err(CliError::config(format!(
                    "n-cells = {n} and h = {h} are inconsistent (need n-cells * h = 1)"
                )));
            }
        }
        if let (Some(t), Some(n), Some(tau)) = (s.t_final, s.n_steps, s.tau) {
            if (n as f64 * tau - t).abs() > 1e-9 * t.max(1.0) {
                return Err(CliError::config(format!(
                    "t-final = {t}, n-steps = {n} and tau = {tau} are inconsistent"
                )));
            }
        }
        Ok(s)
    }

    /// Number of cells, preferring an explicit count over a mesh size.
    pub fn resolve_n_cells(&self, default: usize) -> Result<usize, CliError> {
        if let Some(n) = self.n_cells {
            if n == 0 {
                return Err(CliError::config("n-cells must be positive"));
            }
            return Ok(n);
        }
        if let Some(h) = self.h {
            if !(h > 0.0 && h <= 1.0) {
                return Err(CliError::config(format!("h out of range: {h}")));
            }
            let n = (1.0 / h).round();
            if (n * h - 1.0).abs() > 1e-9 {
                return Err(CliError::config(format!(
                    "h = {h} does not divide the unit interval"
                )));
            }
            return Ok(n as usize);
        }
        Ok(default)
    }

    /// Step count from n-steps or t-final, with the given defaults.
    pub fn resolve_n_steps(&self, tau: f64, default_t: f64) -> Result<usize, CliError> {
        if let Some(n) = self.n_steps {
            if n == 0 {
                return Err(CliError::config("n-steps must be positive"));
            }
            return Ok(n);
        }
        let t = self.t_final.unwrap_or(default_t);
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::config(format!("t-final out of range: {t}")));
        }
        let n = (t / tau).round();
        if n < 1.0 || (n * tau - t).abs() > 1e-9 * t.max(1.0) {
            return Err(CliError::config(format!(
                "tau = {tau} does not divide t-final = {t}"
            )));
        }
        Ok(n as usize)
    }
}

/// Resolved key/value pairs echoed into the CSV comment header, in a fixed
/// order so identical configurations serialize identically.
#[derive(Debug, Clone, Default)]
pub struct ResolvedConfig {
    entries: BTreeMap<String, String>,
}

impl ResolvedConfig {
    pub fn new(experiment: &str) -> Self {
        let mut r = ResolvedConfig::default();
        r.push("experiment", experiment);
        r
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Single `#`-prefixed comment row with the full resolved config.
    pub fn comment_row(&self) -> String {
        let mut line = String::from("#");
        for (k, v) in &self.entries {
            let _ = write!(line, " {k}={v}");
        }
        line
    }
}
