//! Ensemble estimates and log-log regression.

use serde::Serialize;

use crate::ensemble::{proportion_stderr, Moments};
use crate::error::{invalid, Result};

/// Fits with `r^2` below this are flagged.
pub const POOR_FIT_R2: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleEstimate {
    pub label: String,
    pub n: u64,
    pub value: f64,
    pub stderr: f64,
    pub replicas: u64,
}

impl EnsembleEstimate {
    pub fn from_moments(label: impl Into<String>, n: u64, m: &Moments) -> Self {
        Self {
            label: label.into(),
            n,
            value: m.mean,
            stderr: m.stderr(),
            replicas: m.count,
        }
    }

    pub fn from_proportion(label: impl Into<String>, n: u64, hits: u64, trials: u64) -> Self {
        Self {
            label: label.into(),
            n,
            value: if trials == 0 { f64::NAN } else { hits as f64 / trials as f64 },
            stderr: proportion_stderr(hits, trials),
            replicas: trials,
        }
    }

    /// The same estimate divided by a constant.
    pub fn scaled(&self, label: impl Into<String>, divisor: f64) -> Self {
        Self {
            label: label.into(),
            value: self.value / divisor,
            stderr: self.stderr / divisor,
            ..self.clone()
        }
    }

    pub fn point(&self) -> (u64, f64, f64) {
        (self.n, self.value, self.stderr)
    }

    /// `|a - b|` in units of the combined standard error.
    pub fn z_score(&self, other: &Self) -> f64 {
        z_score(self.value, self.stderr, other.value, other.stderr)
    }
}

pub fn z_score(a: f64, sa: f64, b: f64, sb: f64) -> f64 {
    let se = (sa * sa + sb * sb).sqrt();
    let d = (a - b).abs();
    if se == 0.0 {
        if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        d / se
    }
}

/// `2^lo, 2^(lo+1), ..., 2^hi`.
pub fn dyadic_grid(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|e| 1u64 << e).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub amplitude: f64,
    pub n_lo: u64,
    pub n_hi: u64,
    pub points: usize,
    pub r_squared: f64,
    /// Residuals of `log value` in point order.
    pub residuals: Vec<f64>,
    pub weighted: bool,
    pub poor_fit: bool,
}

/// Weighted least squares for `y = X b` with a dense design; returns the
/// coefficients, their covariance scaled by the residual variance, the
/// residuals and the weighted `r^2`.
struct Wls {
    coef: Vec<f64>,
    cov: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    r_squared: f64,
}

fn solve_wls(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Wls> {
    let k = x[0].len();
    let n = y.len();
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for i in 0..n {
        for r in 0..k {
            b[r] += w[i] * x[i][r] * y[i];
            for c in 0..k {
                a[r][c] += w[i] * x[i][r] * x[i][c];
            }
        }
    }
    let inv = invert(a).ok_or_else(|| invalid("degenerate design in least-squares fit"))?;
    let coef: Vec<f64> = (0..k).map(|r| (0..k).map(|c| inv[r][c] * b[c]).sum()).collect();
    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - (0..k).map(|c| x[i][c] * coef[c]).sum::<f64>())
        .collect();
    let sw: f64 = w.iter().sum();
    let ybar = (0..n).map(|i| w[i] * y[i]).sum::<f64>() / sw;
    let ss_res: f64 = (0..n).map(|i| w[i] * residuals[i] * residuals[i]).sum();
    let ss_tot: f64 = (0..n).map(|i| w[i] * (y[i] - ybar).powi(2)).sum();
    let s2 = if n > k { ss_res / (n - k) as f64 } else { 0.0 };
    let cov = inv.iter().map(|row| row.iter().map(|v| v * s2).collect()).collect();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(Wls {
        coef,
        cov,
        residuals,
        r_squared,
    })
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let k = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut inv: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| (i == j) as u8 as f64).collect()).collect();
    for col in 0..k {
        let pivot = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let d = a[col][col];
        for j in 0..k {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..k {
            if i != col {
                let f = a[i][col];
                for j in 0..k {
                    a[i][j] -= f * a[col][j];
                    inv[i][j] -= f * inv[col][j];
                }
            }
        }
    }
    Some(inv)
}

fn check_points(points: &[(u64, f64, f64)], min: usize) -> Result<()> {
    if points.len() < min {
        return Err(invalid(format!("fit needs at least {min} points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| p.1 <= 0.0 || !p.1.is_finite()) {
        return Err(invalid(format!("fit needs positive values, got {} at n={}", p.1, p.0)));
    }
    if points.iter().any(|p| p.0 == 0) {
        return Err(invalid("fit needs n >= 1"));
    }
    Ok(())
}

/// Inverse-variance weights of `log value`; uniform when any error is zero.
fn log_weights(points: &[(u64, f64, f64)]) -> (Vec<f64>, bool) {
    if points.iter().all(|p| p.2 > 0.0 && p.2.is_finite()) {
        (points.iter().map(|p| (p.1 / p.2).powi(2)).collect(), true)
    } else {
        (vec![1.0; points.len()], false)
    }
}

/// Weighted least squares of `log value` on `log n` over `(n, value, stderr)`.
pub fn fit_power_law(points: &[(u64, f64, f64)]) -> Result<PowerLawFit> {
    check_points(points, 4)?;
    let (w, weighted) = log_weights(points);
    let x: Vec<Vec<f64>> = points.iter().map(|p| vec![1.0, (p.0 as f64).ln()]).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = solve_wls(&x, &y, &w)?;
    Ok(PowerLawFit {
        exponent: fit.coef[1],
        exponent_stderr: fit.cov[1][1].max(0.0).sqrt(),
        amplitude: fit.coef[0].exp(),
        n_lo: points.iter().map(|p| p.0).min().expect("non-empty"),
        n_hi: points.iter().map(|p| p.0).max().expect("non-empty"),
        points: points.len(),
        r_squared: fit.r_squared,
        residuals: fit.residuals,
        weighted,
        poor_fit: fit.r_squared < POOR_FIT_R2,
    })
}

/// Points with `lo <= n <= hi`.
pub fn window(points: &[(u64, f64, f64)], lo: u64, hi: u64) -> Vec<(u64, f64, f64)> {
    points.iter().copied().filter(|p| p.0 >= lo && p.0 <= hi).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogCorrectedFit {
    /// `b` in `log v = a + b log n + c log log n`.
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub log_coefficient: f64,
    pub log_coefficient_stderr: f64,
    /// The exponent held at `fixed_exponent`, fitting only `a` and `c`.
    pub fixed_exponent: f64,
    pub fixed_log_coefficient: f64,
    pub fixed_log_coefficient_stderr: f64,
}

/// Fits `log v = a + b log n + c log log n`, and again with `b` fixed.
pub fn fit_log_corrected(points: &[(u64, f64, f64)], fixed_exponent: f64) -> Result<LogCorrectedFit> {
    check_points(points, 4)?;
    if points.iter().any(|p| p.0 < 3) {
        return Err(invalid("log-corrected fit needs n >= 3"));
    }
    let (w, _) = log_weights(points);
    let ln = |p: &(u64, f64, f64)| (p.0 as f64).ln();
    let x: Vec<Vec<f64>> = points.iter().map(|p| vec![1.0, ln(p), ln(p).ln()]).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let full = solve_wls(&x, &y, &w)?;
    let x2: Vec<Vec<f64>> = points.iter().map(|p| vec![1.0, ln(p).ln()]).collect();
    let y2: Vec<f64> = points.iter().map(|p| p.1.ln() - fixed_exponent * ln(p)).collect();
    let fixed = solve_wls(&x2, &y2, &w)?;
    Ok(LogCorrectedFit {
        exponent: full.coef[1],
        exponent_stderr: full.cov[1][1].max(0.0).sqrt(),
        log_coefficient: full.coef[2],
        log_coefficient_stderr: full.cov[2][2].max(0.0).sqrt(),
        fixed_exponent,
        fixed_log_coefficient: fixed.coef[1],
        fixed_log_coefficient_stderr: fixed.cov[1][1].max(0.0).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub stderr: f64,
}

/// Amplitude `A` of `v ≈ A n^exponent` with the exponent held fixed: the
/// weighted geometric mean of `v n^(-exponent)`.
///
/// Estimates along one censored sample are nested and positively correlated,
/// so the error is that of the most precise single point rather than the
/// (much smaller) independent-points formula.
pub fn fit_amplitude(points: &[(u64, f64, f64)], exponent: f64) -> Result<AmplitudeFit> {
    check_points(points, 1)?;
    let (w, _) = log_weights(points);
    let sw: f64 = w.iter().sum();
    let log_a = points
        .iter()
        .zip(&w)
        .map(|(p, wi)| wi * (p.1.ln() - exponent * (p.0 as f64).ln()))
        .sum::<f64>()
        / sw;
    let amplitude = log_a.exp();
    let rel = points
        .iter()
        .map(|p| p.2 / p.1)
        .fold(f64::INFINITY, f64::min);
    Ok(AmplitudeFit {
        exponent,
        amplitude,
        stderr: amplitude * rel,
    })
}

/// Linear-interpolation quantiles of a sample.
pub fn quantiles(sample: &[f64], probs: &[f64]) -> Vec<(f64, f64)> {
    if sample.is_empty() {
        return probs.iter().map(|&p| (p, f64::NAN)).collect();
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    probs
        .iter()
        .map(|&p| {
            let h = p.clamp(0.0, 1.0) * (s.len() - 1) as f64;
            let i = h.floor() as usize;
            let j = (i + 1).min(s.len() - 1);
            (p, s[i] + (h - i as f64) * (s[j] - s[i]))
        })
        .collect()
}
