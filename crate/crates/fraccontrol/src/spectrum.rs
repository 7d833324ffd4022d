//! Eigen-structure of the spectral fractional Dirichlet Laplacian on (0, 1).
//!
//! Eigenfunctions are the orthonormal sines `φ_k(x) = √2 sin(πkx)` with
//! eigenvalues `λ_k = (πk)^{2s}`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Which evolution equation is being controlled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Heat,
    Schrodinger,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heat" => Ok(ModelKind::Heat),
            "schrodinger" | "schroedinger" => Ok(ModelKind::Schrodinger),
            other => Err(Error::InvalidParameter(format!("unknown model `{other}`"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Heat => "heat",
            ModelKind::Schrodinger => "schrodinger",
        })
    }
}

/// A problem instance: fractional order and the exponents derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracModel {
    pub s: f64,
    /// `2s`
    pub alpha: f64,
    /// `2s - 1`
    pub beta: f64,
    /// `1 / (2s - 1)`, the cost blow-up exponent.
    pub tau: f64,
    /// `1 / (alpha - 1)`, the Gevrey exponent of the multiplier window.
    pub mu: f64,
    pub kind: ModelKind,
}

impl FracModel {
    /// Builds the model; `s` must lie in `(1/2, 1]`.
    pub fn new(s: f64, kind: ModelKind) -> Result<Self> {
        if !(s > 0.5 && s <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fractional order s = {s} outside (1/2, 1]"
            )));
        }
        let alpha = 2.0 * s;
        let beta = alpha - 1.0;
        Ok(FracModel {
            s,
            alpha,
            beta,
            tau: 1.0 / beta,
            mu: 1.0 / beta,
            kind,
        })
    }

    /// Asymptotic constant `a` in `λ_k ~ a k^α`.
    pub fn a_coef(&self) -> f64 {
        PI.powf(self.alpha)
    }

    /// Single eigenvalue `λ_k = (πk)^{2s}`.
    pub fn lambda(&self, k: usize) -> f64 {
        (PI * k as f64).powf(self.alpha)
    }
}

/// Stored eigenvalue range of a [`FracModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenData {
    pub n_modes: usize,
    /// `λ_k` for `k = 1..=n_modes` (index 0 holds `λ_1`).
    pub lambda: Vec<f64>,
    /// Laplacian eigenvalues `γ_k = π²k²`.
    pub gamma_n: Vec<f64>,
    pub a_coef: f64,
    pub alpha: f64,
}

impl EigenData {
    /// `λ_k` with 1-based `k`.
    pub fn lambda_k(&self, k: usize) -> f64 {
        self.lambda[k - 1]
    }
}

/// Eigenvalues `λ_k = (πk)^{2s}` for `k = 1..=n`.
pub fn eigenvalues(model: &FracModel, n: usize) -> Result<EigenData> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one mode".into()));
    }
    // Re-validate: the struct fields are public and may have been edited.
    FracModel::new(model.s, model.kind)?;
    let lambda = (1..=n).map(|k| model.lambda(k)).collect();
    let gamma_n = (1..=n).map(|k| (PI * k as f64).powi(2)).collect();
    Ok(EigenData {
        n_modes: n,
        lambda,
        gamma_n,
        a_coef: model.a_coef(),
        alpha: model.alpha,
    })
}

/// Gap and asymptotic statistics of a stored eigenvalue range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    /// `min_{k≠n} |λ_k − λ_n|`.
    pub gap: f64,
    /// `max_k |λ_k − a k^α| / k^{α−1}`.
    pub gamma1: f64,
    /// `max_k k^α / λ_k`.
    pub gamma2: f64,
}

pub fn gap_stats(e: &EigenData) -> Result<GapStats> {
    if e.n_modes < 2 {
        return Err(Error::InvalidParameter(
            "gap statistics need at least two modes".into(),
        ));
    }
    let gap = e
        .lambda
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::INFINITY, f64::min);
    let mut gamma1: f64 = 0.0;
    let mut gamma2: f64 = 0.0;
    for (i, &l) in e.lambda.iter().enumerate() {
        let k = (i + 1) as f64;
        let ka = k.powf(e.alpha);
        gamma1 = gamma1.max((l - e.a_coef * ka).abs() / k.powf(e.alpha - 1.0));
        gamma2 = gamma2.max(ka / l);
    }
    Ok(GapStats {
        gap,
        gamma1,
        gamma2,
    })
}

/// Boundary trace `φ_k'(1) = √2 πk (−1)^k` of the orthonormal eigenfunction.
pub fn boundary_trace(k: usize) -> f64 {
    let v = std::f64::consts::SQRT_2 * PI * k as f64;
    if k % 2 == 0 {
        v
    } else {
        -v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model(s: f64) -> FracModel {
        FracModel::new(s, ModelKind::Heat).unwrap()
    }

    #[test]
    fn derived_exponents() {
        let m = model(0.75);
        assert_eq!(m.alpha, 1.5);
        assert_relative_eq!(m.tau * m.beta, 1.0);
        assert_relative_eq!(m.mu * (m.alpha - 1.0), 1.0);
        assert_relative_eq!(m.mu / (m.mu + 1.0), 1.0 / m.alpha, epsilon = 1e-15);
    }

    #[test]
    fn rejects_out_of_range_order() {
        for s in [0.5, 0.2, 1.01, f64::NAN] {
            assert!(FracModel::new(s, ModelKind::Heat).is_err());
        }
        assert!(FracModel::new(1.0, ModelKind::Heat).is_ok());
    }

    #[test]
    fn eigenvalue_examples() {
        let e = eigenvalues(&model(1.0), 3).unwrap();
        assert_relative_eq!(e.lambda_k(2), 4.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(e.lambda_k(2), 39.478418, epsilon = 1e-6);
        let e = eigenvalues(&model(0.75), 1).unwrap();
        assert_relative_eq!(e.lambda[0], 5.568328, epsilon = 1e-6);
    }

    #[test]
    fn eigenvalue_matches_log_evaluation() {
        // (10π)^{1.2} via exp(1.2 ln(10π)), evaluated independently.
        let e = eigenvalues(&model(0.6), 10).unwrap();
        let oracle = (1.2 * (10.0 * PI).ln()).exp();
        assert_relative_eq!(e.lambda_k(10), oracle, max_relative = 1e-14);
        // High-precision reference value of (10π)^{1.2}.
        assert_relative_eq!(e.lambda_k(10), 62.600_794_806_326_37, max_relative = 1e-14);
    }

    #[test]
    fn gap_examples() {
        let g = gap_stats(&eigenvalues(&model(1.0), 3).unwrap()).unwrap();
        assert_relative_eq!(g.gap, 3.0 * PI * PI, max_relative = 1e-14);
        let g = gap_stats(&eigenvalues(&model(0.75), 100).unwrap()).unwrap();
        assert!(g.gamma1 < 1e-10 * PI.powf(1.5));
        let brute = (1..=100)
            .map(|k| (k as f64).powf(1.5) / (PI * k as f64).powf(1.5))
            .fold(0.0, f64::max);
        assert_relative_eq!(g.gamma2, brute, max_relative = 1e-14);
        assert_relative_eq!(g.gamma2, PI.powf(-1.5), max_relative = 1e-13);
        assert!(gap_stats(&eigenvalues(&model(0.75), 1).unwrap()).is_err());
    }

    #[test]
    fn trace_signs() {
        let r2 = std::f64::consts::SQRT_2;
        assert_relative_eq!(boundary_trace(1), -r2 * PI);
        assert_relative_eq!(boundary_trace(2), 2.0 * r2 * PI);
        assert_relative_eq!(boundary_trace(3), -3.0 * r2 * PI);
    }

    proptest! {
        #[test]
        fn lambda_is_power_of_gamma(s in 0.51f64..=1.0, n in 2usize..200) {
            let e = eigenvalues(&model(s), n).unwrap();
            for (l, g) in e.lambda.iter().zip(&e.gamma_n) {
                prop_assert!((l - g.powf(s)).abs() <= 1e-12 * l);
            }
            prop_assert!(e.lambda.windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn gap_attained_at_first_pair(s in 0.51f64..=1.0, n in 2usize..1000) {
            let e = eigenvalues(&model(s), n).unwrap();
            let g = gap_stats(&e).unwrap();
            prop_assert_eq!(g.gap, e.lambda[1] - e.lambda[0]);
            prop_assert!(g.gamma1 <= 1e-10 * e.a_coef);
        }
    }
}
