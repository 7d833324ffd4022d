//! Fitting `log_cost ≈ ρ/T^τ + c (+ κ ln T)` over a sweep of horizons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit at one fixed exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedTauFit {
    pub tau: f64,
    pub rho: f64,
    pub intercept: f64,
    /// Coefficient of `ln T` when that column is included.
    pub log_t_coef: Option<f64>,
    /// Sum of squared residuals.
    pub residual: f64,
}

/// Best fit over an exponent grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFit {
    pub tau_hat: f64,
    pub rho_hat: f64,
    pub intercept: f64,
    pub log_t_coef: Option<f64>,
    /// Least-squares objective at `tau_hat`.
    pub residual: f64,
    /// Objective at every grid exponent.
    pub scan: Vec<FixedTauFit>,
}

impl CostFit {
    /// Objective at the grid exponent closest to `tau`.
    pub fn residual_at(&self, tau: f64) -> Option<f64> {
        self.scan
            .iter()
            .min_by(|a, b| (a.tau - tau).abs().total_cmp(&(b.tau - tau).abs()))
            .map(|f| f.residual)
    }
}

fn validate(t: &[f64], y: &[f64], min_len: usize) -> Result<()> {
    if t.len() != y.len() {
        return Err(Error::InvalidParameter("T and log-cost lists differ in length".into()));
    }
    if t.len() < min_len {
        return Err(Error::InvalidParameter(format!(
            "need at least {min_len} samples, got {}",
            t.len()
        )));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) || t.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter("samples must be finite with T > 0".into()));
    }
    let mut s = t.to_vec();
    s.sort_by(f64::total_cmp);
    if s.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("T values must be distinct".into()));
    }
    Ok(())
}

/// Householder least squares for a tall matrix given by columns.
fn least_squares(cols: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = y.len();
    let n = cols.len();
    // Column scaling so the conditioning test is scale free.
    let scale: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if scale.iter().any(|&s| s == 0.0) {
        return Err(Error::IllConditioned("zero design column".into()));
    }
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..n).map(|j| cols[j][i] / scale[j]).collect())
        .collect();
    let mut b = y.to_vec();
    for k in 0..n {
        let norm: f64 = (k..m).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::IllConditioned(format!("column {k} is numerically dependent")));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vn: f64 = v.iter().map(|x| x * x).sum();
        for j in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * a[i][j]).sum();
            let f = 2.0 * dot / vn;
            for i in k..m {
                a[i][j] -= f * v[i - k];
            }
        }
        let dot: f64 = (k..m).map(|i| v[i - k] * b[i]).sum();
        let f = 2.0 * dot / vn;
        for i in k..m {
            b[i] -= f * v[i - k];
        }
    }
    let diag_max = (0..n).map(|k| a[k][k].abs()).fold(0.0, f64::max);
    let diag_min = (0..n).map(|k| a[k][k].abs()).fold(f64::INFINITY, f64::min);
    if diag_min < 1e-10 * diag_max {
        return Err(Error::IllConditioned(format!(
            "design condition estimate {:e}",
            diag_max / diag_min
        )));
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    let residual: f64 = b[n..].iter().map(|r| r * r).sum();
    Ok(((0..n).map(|j| x[j] / scale[j]).collect(), residual))
}

/// Least squares of `y` on `T^{−τ}`, `1` and optionally `ln T` at fixed `τ`.
pub fn fit_fixed_tau(t: &[f64], y: &[f64], tau: f64, with_log_t: bool) -> Result<FixedTauFit> {
    validate(t, y, if with_log_t { 4 } else { 3 })?;
    let mut cols = vec![t.iter().map(|v| v.powf(-tau)).collect::<Vec<_>>(), vec![1.0; t.len()]];
    if with_log_t {
        cols.push(t.iter().map(|v| v.ln()).collect());
    }
    let (x, residual) = least_squares(&cols, y)?;
    Ok(FixedTauFit {
        tau,
        rho: x[0],
        intercept: x[1],
        log_t_coef: with_log_t.then(|| x[2]),
        residual,
    })
}

/// Scans `tau_grid` and returns the exponent with the smallest residual.
pub fn fit_scaling(t: &[f64], y: &[f64], tau_grid: &[f64], with_log_t: bool) -> Result<CostFit> {
    validate(t, y, 4)?;
    if tau_grid.is_empty() || tau_grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParameter("tau grid must hold positive exponents".into()));
    }
    let scan = tau_grid
        .iter()
        .map(|&tau| fit_fixed_tau(t, y, tau, with_log_t))
        .collect::<Result<Vec<_>>>()?;
    let best = scan
        .iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .copied()
        .expect("non-empty grid");
    Ok(CostFit {
        tau_hat: best.tau,
        rho_hat: best.rho,
        intercept: best.intercept,
        log_t_coef: best.log_t_coef,
        residual: best.residual,
        scan,
    })
}

/// Uniform grid `lo, lo+step, …, hi`.
pub fn tau_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TS: [f64; 7] = [0.6, 0.5, 0.4, 0.3, 0.25, 0.2, 0.15];

    #[test]
    fn exact_model_recovery() {
        let y: Vec<f64> = TS.iter().map(|t| 3.0 / (t * t)).collect();
        let f = fit_scaling(&TS, &y, &tau_grid(0.5, 4.0, 0.05), false).unwrap();
        assert_relative_eq!(f.tau_hat, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.rho_hat, 3.0, max_relative = 1e-10);
        assert!(f.intercept.abs() < 1e-9);
        assert!(f.residual < 1e-18);
    }

    #[test]
    fn constant_cost_has_zero_slope() {
        let y = vec![4.2; TS.len()];
        let f = fit_scaling(&TS, &y, &tau_grid(0.5, 3.0, 0.25), false).unwrap();
        assert!(f.rho_hat.abs() < 1e-10);
        assert_relative_eq!(f.intercept, 4.2, max_relative = 1e-12);
    }

    #[test]
    fn with_log_term() {
        let y: Vec<f64> = TS.iter().map(|t| 0.9 / (t * t) + 1.5 * t.ln() - 0.3).collect();
        let f = fit_scaling(&TS, &y, &tau_grid(1.0, 3.0, 0.01), true).unwrap();
        assert_relative_eq!(f.tau_hat, 2.0, epsilon = 1e-9);
        assert_relative_eq!(f.log_t_coef.unwrap(), 1.5, max_relative = 1e-8);
    }

    #[test]
    fn noisy_recovery_monte_carlo() {
        let grid = tau_grid(1.0, 3.0, 0.01);
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = TS
                .iter()
                .map(|t| 0.9 / (t * t) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
                .collect();
            let f = fit_scaling(&TS, &y, &grid, false).unwrap();
            assert!((1.8..=2.2).contains(&f.tau_hat), "seed {seed}: {}", f.tau_hat);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_scaling(&[0.5], &[1.0], &[2.0], false).is_err());
        assert!(fit_scaling(&[0.5, 0.5, 0.4, 0.3], &[1.0; 4], &[2.0], false).is_err());
        assert!(fit_scaling(&TS, &[1.0; 7], &[], false).is_err());
    }

    #[test]
    fn dependent_columns_signalled() {
        // τ → 0 makes T^{−τ} collinear with the intercept column.
        let y: Vec<f64> = TS.to_vec();
        assert!(matches!(fit_fixed_tau(&TS, &y, 1e-14, false), Err(Error::IllConditioned(_))));
    }
}
