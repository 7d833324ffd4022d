//! Quadrature kernels.
//!
//! * [`integrate`]: tanh-sinh (double-exponential) rule, nested by halving
//!   the step, with nodes clustered at both endpoints. Handles integrable
//!   endpoint singularities and the flat Gevrey window alike.
//! * [`integrate_adaptive`]: adaptive composite Gauss–Legendre for smooth but
//!   oscillatory integrands, generic over real and complex values.
//! * [`integrate_half_line`]: `(0, ∞)` split at 1 with `v = 1/x` on the tail.
//! * [`integrate_pv`]: Cauchy principal value by symmetric excision and
//!   Richardson extrapolation in the excision radius.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Nodes and positive weights on `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Number of nodes; the rule is exact for polynomials of degree `2·order − 1`.
    pub order: usize,
}

impl QuadRule {
    /// Gauss–Legendre rule with `n` nodes (Newton iteration on `P_n`).
    pub fn gauss_legendre(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        QuadRule {
            nodes,
            weights,
            order: n,
        }
    }

    /// Applies the rule on `[a, b]`.
    pub fn apply<T: QuadValue, F: Fn(f64) -> T>(&self, f: &F, a: f64, b: f64) -> T {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(c + h * x) * (w * h);
        }
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Value together with an error estimate and the work spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Controls for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Number of equal panels before refinement starts.
    pub initial_panels: usize,
    /// Refinement budget in panels.
    pub max_panels: usize,
    /// Gauss–Legendre nodes per panel.
    pub nodes_per_panel: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            initial_panels: 8,
            max_panels: 200_000,
            nodes_per_panel: 16,
        }
    }
}

/// Adaptive composite Gauss–Legendre on `[a, b]`.
///
/// Each panel is compared against its two halves; panels whose difference
/// exceeds their share of the tolerance are split.
pub fn integrate_adaptive<T, F>(f: F, a: f64, b: f64, opts: &AdaptiveOptions) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("adaptive quadrature needs a finite interval".into()));
    }
    if a == b {
        return Ok(QuadResult {
            value: T::zero(),
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let rule = QuadRule::gauss_legendre(opts.nodes_per_panel.max(2));
    let n0 = opts.initial_panels.max(1);
    let width = (b - a) / n0 as f64;
    let mut stack: Vec<(f64, f64, T)> = Vec::with_capacity(4 * n0);
    let mut scale = 0.0;
    let peak = std::cell::Cell::new(0.0f64);
    let mut evals = 0;
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 { b } else { lo + width };
        let v = rule.apply(
            &|x| {
                let y = f(x);
                peak.set(peak.get().max(y.magnitude()));
                y
            },
            lo,
            hi,
        );
        evals += rule.order;
        scale += v.magnitude();
        stack.push((lo, hi, v));
    }
    let tol = opts.abs_tol.max(opts.rel_tol * scale);
    // Rounding floor per unit length: below this, splitting cannot help.
    let floor_density = 64.0 * f64::EPSILON * peak.get();
    let total_len = (b - a).abs();
    let mut value = T::zero();
    let mut err = 0.0;
    let mut panels = n0;
    while let Some((lo, hi, whole)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.apply(&f, lo, mid);
        let right = rule.apply(&f, mid, hi);
        evals += 2 * rule.order;
        let halves = left + right;
        let diff = (halves - whole).magnitude();
        if !diff.is_finite() {
            return Err(Error::NonConvergence(format!(
                "non-finite integrand on [{lo}, {hi}]"
            )));
        }
        let share = tol * ((hi - lo).abs() / total_len);
        if diff <= share.max(floor_density * (hi - lo).abs()) || (hi - lo).abs() <= 1e-14 * total_len {
            value = value + halves;
            err += diff;
            continue;
        }
        panels += 1;
        if panels > opts.max_panels {
            return Err(Error::NonConvergence(format!(
                "adaptive quadrature exceeded {} panels",
                opts.max_panels
            )));
        }
        stack.push((lo, mid, left));
        stack.push((mid, hi, right));
    }
    Ok(QuadResult {
        value,
        error_estimate: err,
        evaluations: evals,
    })
}

const TS_TMAX: f64 = 6.0;
const TS_MAX_LEVEL: usize = 12;

/// Tanh-sinh quadrature of `f` over finite `[a, b]` to absolute tolerance `tol`.
///
/// Nodes approach the endpoints as `a + d` and `b − d` with `d` computed
/// directly, so integrable endpoint singularities are resolved.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    integrate_with_estimate(f, a, b, tol).map(|r| r.value)
}

/// [`integrate`] with its error estimate.
pub fn integrate_with_estimate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<QuadResult<f64>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("tanh-sinh needs a finite interval".into()));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
        });
    }
    let hw = 0.5 * (b - a);
    let mut evals = 0;
    // Contribution of the node pair at parameter t > 0 (or the centre at t = 0).
    let pair = |t: f64, evals: &mut usize| -> Result<f64> {
        let u = FRAC_PI_2 * t.sinh();
        let q = (-2.0 * u).exp();
        let comp = 2.0 * q / (1.0 + q); // 1 − tanh(u)
        let sech2 = 4.0 * q / ((1.0 + q) * (1.0 + q));
        let w = hw * FRAC_PI_2 * t.cosh() * sech2;
        if t == 0.0 {
            *evals += 1;
            let v = f(a + hw) * w;
            return finite(v, a + hw);
        }
        let d = hw * comp;
        if d == 0.0 || w == 0.0 {
            return Ok(0.0);
        }
        *evals += 2;
        let xl = a + d;
        let xr = b - d;
        let v = (f(xl) + f(xr)) * w;
        finite(v, xl)
    };
    let mut h = 1.0;
    let mut sum = pair(0.0, &mut evals)?;
    let mut k = 1;
    while (k as f64) * h <= TS_TMAX {
        sum += pair(k as f64 * h, &mut evals)?;
        k += 1;
    }
    let mut estimate = sum * h;
    let mut err = f64::INFINITY;
    for _level in 1..=TS_MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= TS_TMAX {
            sum += pair(k as f64 * h, &mut evals)?;
            k += 2;
        }
        let next = sum * h;
        err = (next - estimate).abs();
        estimate = next;
        if err <= tol.max(4.0 * f64::EPSILON * estimate.abs()) {
            return Ok(QuadResult {
                value: estimate,
                error_estimate: err,
                evaluations: evals,
            });
        }
    }
    Err(Error::NonConvergence(format!(
        "tanh-sinh on [{a}, {b}] stalled at estimated error {err:e}"
    )))
}

fn finite(v: f64, x: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonConvergence(format!("non-finite integrand near x = {x}")))
    }
}

/// `∫_0^∞ f(x) dx` as `∫_0^1 f(x) dx + ∫_0^1 f(1/v)/v² dv`.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> Result<f64> {
    let head = integrate(&f, 0.0, 1.0, 0.5 * tol)?;
    let tail = integrate(
        |v: f64| {
            let x = 1.0 / v;
            let y = f(x);
            if y == 0.0 {
                0.0
            } else {
                // v² underflows long before y·x² overflows.
                y * x * x
            }
        },
        0.0,
        1.0,
        0.5 * tol,
    )?;
    Ok(head + tail)
}

/// Principal value with its extrapolation residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PvResult {
    pub value: f64,
    pub error_estimate: f64,
}

/// Cauchy principal value of `∫_a^b f` for `f` with a simple pole at `c`.
///
/// The excised integral `I(δ)` over `[a, c−δ] ∪ [c+δ, b]` differs from the
/// limit by an odd power series in `δ`; six radii halving from
/// `δ₀ = min(c−a, b−c)/4` feed a Richardson table removing `δ, δ³, …, δ⁹`.
/// The error estimate is the change between the last two diagonal entries.
pub fn integrate_pv<F: Fn(f64) -> f64>(f: F, c: f64, a: f64, b: f64, tol: f64) -> Result<PvResult> {
    if !(a < c && c < b) {
        return Err(Error::Domain(format!(
            "pole {c} must lie strictly inside ({a}, {b})"
        )));
    }
    const LEVELS: usize = 6;
    let d0 = 0.25 * (c - a).min(b - c);
    let inner_tol = (tol * 1e-3).max(1e-15);
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    for i in 0..LEVELS {
        let d = d0 / (1u32 << i) as f64;
        let left = integrate(&f, a, c - d, inner_tol)?;
        let right = integrate(&f, c + d, b, inner_tol)?;
        table[i][0] = left + right;
        for j in 1..=i {
            let factor = 2f64.powi(2 * j as i32 - 1);
            table[i][j] = (factor * table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0);
        }
    }
    let value = table[LEVELS - 1][LEVELS - 1];
    let error_estimate = (value - table[LEVELS - 2][LEVELS - 2]).abs();
    if !(error_estimate <= tol) {
        return Err(Error::NonConvergence(format!(
            "principal value did not stabilise: residual {error_estimate:e} > {tol:e}"
        )));
    }
    Ok(PvResult {
        value,
        error_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_weights_and_exactness() {
        for n in [1, 2, 5, 16, 33] {
            let r = QuadRule::gauss_legendre(n);
            let s: f64 = r.weights.iter().sum();
            assert_relative_eq!(s, 2.0, max_relative = 1e-14);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for p in 0..(2 * n) {
                let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
                let got = r.apply(&|x: f64| x.powi(p as i32), -1.0, 1.0);
                assert!((got - exact).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn monomials_on_unit_interval() {
        for p in 0..=10 {
            let v = integrate(|x| x.powi(p), 0.0, 1.0, 1e-14).unwrap();
            assert!((v - 1.0 / (p as f64 + 1.0)).abs() < 1e-12, "p={p}");
            let opts = AdaptiveOptions::default();
            let v = integrate_adaptive(|x: f64| x.powi(p), 0.0, 1.0, &opts).unwrap().value;
            assert!((v - 1.0 / (p as f64 + 1.0)).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn half_line_log_integrand() {
        // ½∫_0^∞ ln(1 + x^{-4}) dx = π/√2
        let f = |x: f64| {
            if x < 1.0 {
                0.5 * (x.powi(4).ln_1p() - 4.0 * x.ln())
            } else {
                0.5 * x.powi(-4).ln_1p()
            }
        };
        let v = integrate_half_line(f, 1e-12).unwrap();
        assert_relative_eq!(v, PI / 2f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-0.8} dx = 5
        let v = integrate(|x| x.powf(-0.8), 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(v, 5.0, epsilon = 1e-9);
    }

    #[test]
    fn gevrey_window_against_dense_trapezoid() {
        let sigma = |t: f64| (-1.0 / (1.0 - t) - 1.0 / (1.0 + t)).exp();
        let v = integrate(|t| if t.abs() < 1.0 { sigma(t) } else { 0.0 }, -1.0, 1.0, 1e-14).unwrap();
        // The window is flat at ±1, so the trapezoid rule converges spectrally.
        let n = 20_000;
        let h = 2.0 / n as f64;
        let trap: f64 = (1..n).map(|i| sigma(-1.0 + i as f64 * h)).sum::<f64>() * h;
        assert!(v > 0.0);
        assert!((v - trap).abs() < 1e-9, "{v} vs {trap}");
    }

    #[test]
    fn complex_adaptive_oscillatory() {
        // ∫_{-1}^{1} e^{i 200 t} dt = 2 sin(200)/200
        let opts = AdaptiveOptions {
            initial_panels: 64,
            ..Default::default()
        };
        let v = integrate_adaptive(|t: f64| Complex64::new(0.0, 200.0 * t).exp(), -1.0, 1.0, &opts).unwrap();
        assert!((v.value - Complex64::new(2.0 * 200f64.sin() / 200.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pv_odd_symmetric_is_zero() {
        let r = integrate_pv(|v| 1.0 / (1.0 - v), 1.0, 0.0, 2.0, 1e-10).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn pv_against_folded_oracle() {
        // p.v.∫_0^3 e^v/(1−v) dv; the folded form integrates the smooth
        // (g(1−t) − g(1+t))/t over (0, 1), then adds the regular remainder.
        let g = |v: f64| v.exp();
        let pv = integrate_pv(|v| g(v) / (1.0 - v), 1.0, 0.0, 3.0, 1e-10).unwrap().value;
        let folded = integrate(|t| (g(1.0 - t) - g(1.0 + t)) / t, 0.0, 1.0, 1e-14).unwrap()
            + integrate(|v| g(v) / (1.0 - v), 2.0, 3.0, 1e-14).unwrap();
        assert!((pv - folded).abs() < 1e-9, "{pv} vs {folded}");
    }

    #[test]
    fn pv_rejects_outside_pole() {
        assert!(integrate_pv(|v| 1.0 / (1.0 - v), 3.0, 0.0, 2.0, 1e-8).is_err());
    }

    proptest! {
        #[test]
        fn tanh_sinh_power_singularities(p in -0.9f64..3.0) {
            let v = integrate(|x| x.powf(p), 0.0, 1.0, 1e-12).unwrap();
            prop_assert!((v - 1.0 / (p + 1.0)).abs() < 1e-8 / (p + 1.0));
        }
    }
}
