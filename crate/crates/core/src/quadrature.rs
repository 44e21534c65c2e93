//! Gauss–Legendre quadrature on the reference cell `[0, 1]`.

use crate::error::{Error, Result};

/// Quadrature rule on `[0, 1]` with positive weights.
#[derive(Debug, Clone)]
pub struct QuadRule {
    /// Quadrature points in ascending order.
    pub points: Vec<f64>,
    /// Matching weights; they sum to one.
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True if the rule has no points (never the case for constructed rules).
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss–Legendre rule with `n` points on `[0, 1]`, exact for polynomials of
/// degree `2n - 1`. Supports `1 <= n <= 10`.
pub fn gauss_rule(n: usize) -> Result<QuadRule> {
    if !(1..=10).contains(&n) {
        return Err(Error::invalid(format!(
            "Gauss rule supports 1..=10 points, got {n}"
        )));
    }
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev initial guess for the i-th root of the Legendre
        // polynomial on [-1, 1], refined by Newton iteration.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[i] = (1.0 - x) / 2.0;
        points[n - 1 - i] = (1.0 + x) / 2.0;
        weights[i] = w / 2.0;
        weights[n - 1 - i] = w / 2.0;
    }
    Ok(QuadRule { points, weights })
}
