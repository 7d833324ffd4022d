//! Closed-form constants of the cost estimates, each paired with an
//! independent evaluation.
//!
//! `θ_α`, `κ_α`, `P_α` and `Q_α` are integrals with known closed forms; the
//! report compares quadrature against the closed form. `ν_s` and `μ_s` have
//! two algebraically different expressions; the report compares them.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{integrate, integrate_half_line, integrate_pv};
use crate::spectrum::ModelKind;

/// Absolute tolerance used for the quadrature-backed constants.
pub const QUADRATURE_TOL: f64 = 1e-8;
/// Relative tolerance between the two expressions of `ν_s` and `μ_s`.
pub const DUAL_FORM_RTOL: f64 = 1e-10;
/// Absolute tolerance on `Q_2`.
pub const Q2_TOL: f64 = 1e-6;

/// One constant evaluated two ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub name: String,
    /// `α` or `s`, whichever the constant is indexed by.
    pub parameter: f64,
    pub closed_form: f64,
    /// Second evaluation: quadrature, or the alternative expression for `ν_s`/`μ_s`.
    pub quadrature: f64,
    pub abs_err: f64,
    pub tol: f64,
    pub pass: bool,
}

impl ConstantReport {
    pub fn new(name: &str, parameter: f64, closed_form: f64, quadrature: f64, tol: f64) -> Self {
        let abs_err = (closed_form - quadrature).abs();
        ConstantReport {
            name: name.to_string(),
            parameter,
            closed_form,
            quadrature,
            abs_err,
            tol,
            pass: abs_err <= tol,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must exceed 1, got {alpha}")))
    }
}

fn check_open_s(s: f64) -> Result<()> {
    if s > 0.5 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("s must lie in (1/2, 1), got {s}")))
    }
}

/// `∫_0^∞ ln(1 + x^{−p}) dx`, evaluated without overflow on either side of 1.
fn log_one_plus_inverse_power(p: f64, tol: f64) -> Result<f64> {
    integrate_half_line(
        |x| {
            if x < 1.0 {
                x.powf(p).ln_1p() - p * x.ln()
            } else {
                x.powf(-p).ln_1p()
            }
        },
        tol,
    )
}

/// `π/(2 sin(π/(2α)))`.
pub fn theta_closed(alpha: f64) -> f64 {
    PI / (2.0 * (PI / (2.0 * alpha)).sin())
}

/// `π/sin(π/α)`.
pub fn kappa_closed(alpha: f64) -> f64 {
    PI / (PI / alpha).sin()
}

/// `θ_α = ½∫_0^∞ ln(1 + x^{−2α}) dx`.
pub fn theta(alpha: f64) -> Result<ConstantReport> {
    check_alpha(alpha)?;
    let q = 0.5 * log_one_plus_inverse_power(2.0 * alpha, 1e-11)?;
    Ok(ConstantReport::new("theta", alpha, theta_closed(alpha), q, QUADRATURE_TOL))
}

/// `κ_α = −∫_0^∞ ln(x^α/(x^α + 1)) dx`.
pub fn kappa(alpha: f64) -> Result<ConstantReport> {
    check_alpha(alpha)?;
    let q = log_one_plus_inverse_power(alpha, 1e-11)?;
    Ok(ConstantReport::new("kappa", alpha, kappa_closed(alpha), q, QUADRATURE_TOL))
}

/// `(c/π)^{1+1/β} (2/(β+1))^{1/β} β/(1+β)` with `β = 2s − 1`.
fn rescaled_form(c: f64, s: f64) -> f64 {
    let beta = 2.0 * s - 1.0;
    (c / PI).powf(1.0 + 1.0 / beta) * (2.0 / (beta + 1.0)).powf(1.0 / beta) * beta / (1.0 + beta)
}

/// `½(2s − 1)(1/(2s sin(π/(4s))))^{2s/(2s−1)}`.
pub fn nu_s_value(s: f64) -> f64 {
    0.5 * (2.0 * s - 1.0) * (1.0 / (2.0 * s * (PI / (4.0 * s)).sin())).powf(2.0 * s / (2.0 * s - 1.0))
}

/// `½(2s − 1)(1/(s sin(π/(2s))))^{2s/(2s−1)}`.
pub fn mu_s_value(s: f64) -> f64 {
    0.5 * (2.0 * s - 1.0) * (1.0 / (s * (PI / (2.0 * s)).sin())).powf(2.0 * s / (2.0 * s - 1.0))
}

/// Schrödinger lower-bound constant; the second value is the `θ_{2s}` form.
pub fn nu_s(s: f64) -> Result<ConstantReport> {
    check_open_s(s)?;
    let a = nu_s_value(s);
    let b = rescaled_form(theta_closed(2.0 * s), s);
    Ok(ConstantReport::new("nu_s", s, a, b, DUAL_FORM_RTOL * a.abs()))
}

/// Heat lower-bound constant; the second value is the `κ_{2s}` form.
pub fn mu_s(s: f64) -> Result<ConstantReport> {
    check_open_s(s)?;
    let a = mu_s_value(s);
    let b = rescaled_form(kappa_closed(2.0 * s), s);
    Ok(ConstantReport::new("mu_s", s, a, b, DUAL_FORM_RTOL * a.abs()))
}

/// `ρ = 2^{1/β} β (c_α/(a^{1/α}(1+β)))^{1+β}`, `β = α − 1`, with
/// `c_α = θ_α` (Schrödinger) or `κ_α` (heat).
pub fn rho(alpha: f64, a: f64, kind: ModelKind) -> Result<f64> {
    check_alpha(alpha)?;
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!("a must be positive, got {a}")));
    }
    let beta = alpha - 1.0;
    let c = match kind {
        ModelKind::Schrodinger => theta_closed(alpha),
        ModelKind::Heat => kappa_closed(alpha),
    };
    Ok(2f64.powf(1.0 / beta) * beta * (c / (a.powf(1.0 / alpha) * (1.0 + beta))).powf(1.0 + beta))
}

/// `π/sin(π/α)`: Beta-integral value of `P_α`.
pub fn p_alpha_closed(alpha: f64) -> f64 {
    PI / (PI / alpha).sin()
}

/// `π/tan(π/α)`: Beta-integral value of `Q_α`.
pub fn q_alpha_closed(alpha: f64) -> f64 {
    PI / (PI / alpha).tan()
}

/// `P_α = ∫_0^∞ dv/(v^{1−1/α}(v + 1))`.
pub fn p_alpha(alpha: f64) -> Result<ConstantReport> {
    check_alpha(alpha)?;
    let e = 1.0 / alpha - 1.0;
    // (0, 1) directly, (1, ∞) via v = 1/w: ∫_0^1 w^{−1/α}/(w + 1) dw.
    let head = integrate(|v| v.powf(e) / (1.0 + v), 0.0, 1.0, 1e-12)?;
    let tail = integrate(|w| w.powf(-1.0 / alpha) / (1.0 + w), 0.0, 1.0, 1e-12)?;
    Ok(ConstantReport::new("P_alpha", alpha, p_alpha_closed(alpha), head + tail, QUADRATURE_TOL))
}

/// `Q_α = p.v.∫_0^∞ dv/(v^{1−1/α}(1 − v))`.
pub fn q_alpha(alpha: f64) -> Result<ConstantReport> {
    check_alpha(alpha)?;
    let e = 1.0 / alpha - 1.0;
    let pv = integrate_pv(|v| v.powf(e) / (1.0 - v), 1.0, 0.0, 2.0, 1e-10)?;
    // (2, ∞) via v = 1/w: ∫_0^{1/2} w^{−1/α}/(w − 1) dw.
    let tail = integrate(|w| w.powf(-1.0 / alpha) / (w - 1.0), 0.0, 0.5, 1e-12)?;
    let closed = q_alpha_closed(alpha);
    let tol = if (alpha - 2.0).abs() < 1e-15 { Q2_TOL } else { QUADRATURE_TOL };
    Ok(ConstantReport::new("Q_alpha", alpha, closed, pv.value + tail, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const ALPHAS: [f64; 5] = [1.2, 1.5, 2.0, 3.0, 5.0];

    #[test]
    fn theta_and_kappa_examples() {
        assert_relative_eq!(theta_closed(2.0), PI / 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(theta_closed(1.5), PI / 3f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(kappa_closed(2.0), PI, max_relative = 1e-15);
        assert_relative_eq!(kappa_closed(1.5), 2.0 * PI / 3f64.sqrt(), max_relative = 1e-15);
        let r = theta(3.0).unwrap();
        assert!((r.quadrature - PI).abs() < 1e-8);
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        for &a in &ALPHAS {
            for r in [theta(a).unwrap(), kappa(a).unwrap()] {
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn kappa_double_is_twice_theta() {
        for &a in &ALPHAS {
            assert!((kappa_closed(2.0 * a) - 2.0 * theta_closed(a)).abs() < 1e-12);
        }
    }

    #[test]
    fn divergent_orders_rejected() {
        assert!(theta(1.0).is_err());
        assert!(kappa(0.5).is_err());
        assert!(nu_s(0.5).is_err());
        assert!(mu_s(1.0).is_err());
    }

    #[test]
    fn dual_forms_agree() {
        for &s in &[0.6, 0.7, 0.75, 0.9] {
            assert!(nu_s(s).unwrap().pass);
            assert!(mu_s(s).unwrap().pass);
        }
        // ½·½·(1/(¾ sin(2π/3)))³
        let expected = 0.25 * (1.0 / (0.75 * (2.0 * PI / 3.0).sin())).powi(3);
        assert_relative_eq!(mu_s_value(0.75), expected, max_relative = 1e-14);
        assert!((mu_s_value(0.75) - 0.9123).abs() < 1e-4);
    }

    #[test]
    fn rho_examples() {
        assert_relative_eq!(rho(2.0, 1.0, ModelKind::Schrodinger).unwrap(), PI * PI / 4.0, max_relative = 1e-14);
        assert_relative_eq!(rho(2.0, 1.0, ModelKind::Heat).unwrap(), PI * PI / 2.0, max_relative = 1e-14);
        assert!(rho(2.0, 1e12, ModelKind::Heat).unwrap() < 1e-10);
        assert!(rho(2.0, 0.0, ModelKind::Heat).is_err());
    }

    #[test]
    fn p_and_q_against_beta_identities() {
        assert!((p_alpha(2.0).unwrap().quadrature - PI).abs() < 1e-8);
        assert!(q_alpha(2.0).unwrap().quadrature.abs() < 1e-6);
        let q = q_alpha(1.5).unwrap();
        assert!((q.quadrature + PI / 3f64.sqrt()).abs() < 1e-8, "{q:?}");
        assert!(q.quadrature < 0.0);
        assert!(q_alpha(3.0).unwrap().quadrature > 0.0);
        for &a in &ALPHAS {
            assert!(p_alpha(a).unwrap().pass, "P at {a}");
            assert!(q_alpha(a).unwrap().pass, "Q at {a}");
        }
    }

    proptest! {
        #[test]
        fn mu_exceeds_nu(s in 0.51f64..0.99) {
            prop_assert!(mu_s_value(s) > nu_s_value(s));
        }

        #[test]
        fn theta_quadrature_tracks_closed_form(alpha in 1.1f64..6.0) {
            let r = theta(alpha).unwrap();
            prop_assert!(r.abs_err < 1e-8, "{:?}", r);
        }
    }
}
