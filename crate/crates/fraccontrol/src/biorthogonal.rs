//! Interpolating families for the moment problem.
//!
//! A function `g_n` of exponential type `T/2` with `g_n(node_k) = δ_{nk}` is
//! built as a canonical product vanishing at every node but the `n`-th,
//! times the Fourier transform `H` of a Gevrey window that restores decay on
//! the real axis:
//!
//! * heat, nodes `iλ_k`: `g_n(z) = Ψ_n(z) H(z)/H(iλ_n)` with
//!   `Ψ_n(z) = ∏_{k≠n} (1 + iz/λ_k)/(1 − λ_n/λ_k)`;
//! * Schrödinger, nodes `−λ_k`: `g_n(z) = Ψ_n(−z) H(z + λ_n)/H(0)` with
//!   `Ψ_n(z) = ∏_{k≠n} (1 − z/λ_k)/(1 − λ_n/λ_k)`.
//!
//! All products are evaluated as `P_n(λ_n + d) = ∏_{k≠n} (1 − d/(λ_k − λ_n))`
//! over `k ≤ K`, plus a power-series correction for `k > K` driven by
//! `S_p = Σ_{k>K} λ_k^{−p} = a^{−p} ζ(αp, K + 1)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::{p_alpha_closed, q_alpha_closed};
use crate::error::{Error, Result};
use crate::exec;
use crate::numerics::special::hurwitz_zeta;
use crate::numerics::{fourier_integral, FourierOptions, FourierValue, LogComplex, Window};
use crate::spectrum::{eigenvalues, EigenData, FracModel, ModelKind};

/// Default truncation of the canonical products.
pub const DEFAULT_TRUNC: usize = 2000;
/// Default number of tail-series terms.
pub const DEFAULT_TAIL_TERMS: usize = 12;
/// Largest admissible `max(|ζ|, λ_n)/λ_{K+1}` for the tail series.
const MAX_TAIL_RATIO: f64 = 0.5;
/// Log-scale accuracy demanded of products inside the family.
pub const FAMILY_PRODUCT_TOL: f64 = 1e-6;

/// A truncated canonical product in log form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductEval {
    pub n: usize,
    pub trunc: usize,
    pub log_value: LogComplex,
    /// Bound on the first omitted tail-series term, in nats.
    pub tail_bound: f64,
    /// Accumulated rounding estimate of the explicit sum, in nats.
    pub rounding: f64,
}

/// Eigenvalues up to `K` plus the tail sums `S_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTable {
    lambda: Vec<f64>,
    lambda_next: f64,
    /// `S_p` for `p = 1..=tail_terms + 1` (index `p − 1`).
    tail_sums: Vec<f64>,
    tail_terms: usize,
    alpha: f64,
    a: f64,
}

impl ProductTable {
    pub fn new(model: &FracModel, trunc: usize) -> Result<Self> {
        Self::from_eigen(&eigenvalues(model, trunc)?, DEFAULT_TAIL_TERMS)
    }

    /// Uses the stored range of `e` as the truncation `K`.
    ///
    /// The tail assumes `λ_k = a k^α` beyond `K`, which holds exactly here.
    pub fn from_eigen(e: &EigenData, tail_terms: usize) -> Result<Self> {
        let k = e.n_modes;
        if k < 2 {
            return Err(Error::InvalidParameter("product truncation needs K ≥ 2".into()));
        }
        let tail_sums = (1..=tail_terms + 1)
            .map(|p| {
                let p = p as f64;
                hurwitz_zeta(e.alpha * p, k as f64 + 1.0).map(|z| z * e.a_coef.powf(-p))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ProductTable {
            lambda: e.lambda.clone(),
            lambda_next: e.a_coef * (k as f64 + 1.0).powf(e.alpha),
            tail_sums,
            tail_terms,
            alpha: e.alpha,
            a: e.a_coef,
        })
    }

    pub fn trunc(&self) -> usize {
        self.lambda.len()
    }

    pub fn tail_terms(&self) -> usize {
        self.tail_terms
    }

    /// `λ_k`, 1-based.
    pub fn lambda(&self, k: usize) -> f64 {
        self.lambda[k - 1]
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.lambda.len() {
            return Err(Error::InvalidParameter(format!(
                "mode index {n} outside 1..={}",
                self.lambda.len()
            )));
        }
        Ok(())
    }

    /// `∏_{k≠n} (1 − d/(λ_k − λ_n))`, i.e. `P_n(λ_n + d)`.
    pub fn shifted_product(&self, n: usize, d: Complex64, tol: f64) -> Result<ProductEval> {
        self.check_index(n)?;
        let ln = self.lambda[n - 1];
        let zeta = Complex64::new(ln, 0.0) + d;
        let r = zeta.norm().max(ln) / self.lambda_next;
        if !(r < MAX_TAIL_RATIO) {
            return Err(Error::Tolerance(format!(
                "|ζ| = {:e} too large for truncation K = {}; increase K",
                zeta.norm(),
                self.trunc()
            )));
        }
        let zero = |rounding| ProductEval {
            n,
            trunc: self.trunc(),
            log_value: LogComplex::ZERO,
            tail_bound: 0.0,
            rounding,
        };
        let mut log_mag = 0.0;
        let mut rounding = 0.0;
        let mut phase = 0.0;
        if d.im == 0.0 {
            // Real argument: sign changes counted exactly.
            let dr = d.re;
            let mut negative = 0usize;
            for (i, &lk) in self.lambda.iter().enumerate() {
                if i + 1 == n {
                    continue;
                }
                let w = -dr / (lk - ln);
                let f = 1.0 + w;
                if f == 0.0 {
                    return Ok(zero(rounding));
                }
                let l = if f < 0.0 {
                    negative += 1;
                    (-f).ln()
                } else if w.abs() < 0.5 {
                    w.ln_1p()
                } else {
                    f.ln()
                };
                log_mag += l;
                rounding += l.abs() + 1.0;
            }
            if negative % 2 == 1 {
                phase = PI;
            }
        } else {
            for (i, &lk) in self.lambda.iter().enumerate() {
                if i + 1 == n {
                    continue;
                }
                let w = -d / (lk - ln);
                let f = Complex64::new(1.0, 0.0) + w;
                if f.re == 0.0 && f.im == 0.0 {
                    return Ok(zero(rounding));
                }
                let l = if w.norm() < 0.5 {
                    0.5 * (2.0 * w.re + w.norm_sqr()).ln_1p()
                } else {
                    f.norm().ln()
                };
                log_mag += l;
                phase += w.im.atan2(1.0 + w.re);
                rounding += l.abs() + 1.0;
            }
        }
        // Σ_{k>K} ln(1 − ζ/λ_k) − ln(1 − λ_n/λ_k) = −Σ_p (ζ^p − λ_n^p) S_p / p.
        let mut tail = Complex64::new(0.0, 0.0);
        let mut diff = d; // ζ^p − λ_n^p
        let mut ln_pow = ln; // λ_n^p
        let mut tail_bound = 0.0;
        for p in 1..=self.tail_terms + 1 {
            let term = -diff * (self.tail_sums[p - 1] / p as f64);
            if p <= self.tail_terms {
                tail += term;
            } else {
                tail_bound = term.norm() / (1.0 - r);
            }
            diff = zeta * diff + d * ln_pow;
            ln_pow *= ln;
        }
        if !(tail_bound <= tol) {
            return Err(Error::Tolerance(format!(
                "product tail bound {tail_bound:e} exceeds tolerance {tol:e} at K = {}",
                self.trunc()
            )));
        }
        log_mag += tail.re;
        if d.im != 0.0 {
            phase += tail.im;
        }
        Ok(ProductEval {
            n,
            trunc: self.trunc(),
            log_value: LogComplex::new(log_mag, phase),
            tail_bound,
            rounding: rounding * f64::EPSILON,
        })
    }

    /// `Φ_n(z) = ∏_{k≠n} (1 − z/(λ_k − λ_n))`.
    pub fn log_phi(&self, n: usize, z: Complex64, tol: f64) -> Result<ProductEval> {
        self.shifted_product(n, z, tol)
    }

    /// `Ψ_n(z) = Φ_n(z − λ_n)` (Schrödinger).
    pub fn psi_schrodinger(&self, n: usize, z: Complex64, tol: f64) -> Result<ProductEval> {
        self.check_index(n)?;
        self.shifted_product(n, z - self.lambda[n - 1], tol)
    }

    /// `Ψ_n(z) = Φ_n(−iz − λ_n)` (heat).
    pub fn psi_heat(&self, n: usize, z: Complex64, tol: f64) -> Result<ProductEval> {
        self.check_index(n)?;
        self.shifted_product(n, Complex64::new(0.0, -1.0) * z - self.lambda[n - 1], tol)
    }

    /// `ln ∏_j (1 + λ_n/λ_j)` and `ln ∏_{j≠n} |1 − λ_n/λ_j|` over all `j`,
    /// normalised by `λ_n^{1/α}`, next to their limits `a^{−1/α}P_α` and
    /// `a^{−1/α}Q_α`.
    pub fn counting_products(&self, n: usize) -> Result<CountingProducts> {
        self.check_index(n)?;
        let ln = self.lambda[n - 1];
        if !(ln / self.lambda_next < MAX_TAIL_RATIO) {
            return Err(Error::Tolerance("truncation too small for the counting products".into()));
        }
        let mut plus = 0.0;
        let mut minus = 0.0;
        for (i, &lj) in self.lambda.iter().enumerate() {
            let q = ln / lj;
            plus += q.ln_1p();
            if i + 1 != n {
                minus += (1.0 - q).abs().ln();
            }
        }
        let mut pow = 1.0;
        for p in 1..=self.tail_terms {
            pow *= ln;
            let t = pow * self.tail_sums[p - 1] / p as f64;
            plus += if p % 2 == 1 { t } else { -t };
            minus -= t;
        }
        let scale = ln.powf(1.0 / self.alpha);
        let norm = self.a.powf(-1.0 / self.alpha);
        Ok(CountingProducts {
            n,
            trunc: self.trunc(),
            ratio_plus: plus / scale,
            ratio_minus: minus / scale,
            limit_plus: norm * p_alpha_closed(self.alpha),
            limit_minus: norm * q_alpha_closed(self.alpha),
        })
    }
}

/// Normalised counting-function products at one index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingProducts {
    pub n: usize,
    pub trunc: usize,
    pub ratio_plus: f64,
    pub ratio_minus: f64,
    pub limit_plus: f64,
    pub limit_minus: f64,
}

impl CountingProducts {
    pub fn rel_err_plus(&self) -> f64 {
        ((self.ratio_plus - self.limit_plus) / self.limit_plus).abs()
    }

    pub fn rel_err_minus(&self) -> f64 {
        ((self.ratio_minus - self.limit_minus) / self.limit_minus).abs()
    }
}

/// `Φ_n(z)` truncated at the stored range of `e`.
pub fn log_phi(n: usize, z: Complex64, e: &EigenData, tol: f64) -> Result<ProductEval> {
    ProductTable::from_eigen(e, DEFAULT_TAIL_TERMS)?.log_phi(n, z, tol)
}

/// The Gevrey window `σ(t) = exp(−ν^μ/(1−t)^μ − ν^μ/(1+t)^μ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevreyWindow {
    pub nu_mu: f64,
    pub mu: f64,
}

impl Window for GevreyWindow {
    fn log_value_sides(&self, one_minus_t: Complex64, one_plus_t: Complex64) -> Complex64 {
        -self.nu_mu * (one_minus_t.powf(-self.mu) + one_plus_t.powf(-self.mu))
    }

    fn max_depth(&self) -> f64 {
        // Keep the endpoint approach angle well inside |arg| < π/(2μ).
        0.5 * (0.9 * PI / (2.0 * self.mu)).min(1.3).tan()
    }
}

/// Window and multiplier parameters for one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierConfig {
    /// Half-width `T/2`.
    pub b: f64,
    /// Window sharpness `ν`.
    pub nu: f64,
    /// Gevrey exponent `μ = 1/(α − 1)`.
    pub mu: f64,
    /// `g₀ = ν b`.
    pub g0: f64,
    /// `ln H(0)`; the Schrödinger family divides by `H(0)`.
    pub log_h0: f64,
}

impl MultiplierConfig {
    pub fn new(model: &FracModel, t: f64, g0: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) || !(g0 > 0.0 && g0.is_finite()) {
            return Err(Error::InvalidParameter(format!("need T > 0 and g0 > 0 (T={t}, g0={g0})")));
        }
        let b = 0.5 * t;
        let mut cfg = MultiplierConfig {
            b,
            nu: g0 / b,
            mu: model.mu,
            g0,
            log_h0: 0.0,
        };
        cfg.log_h0 = cfg.h(Complex64::new(0.0, 0.0))?.value.log_mag;
        Ok(cfg)
    }

    pub fn window(&self) -> GevreyWindow {
        GevreyWindow {
            nu_mu: self.nu.powf(self.mu),
            mu: self.mu,
        }
    }

    /// `H(z) = ∫_{−1}^{1} σ(t) e^{−i b z t} dt`.
    pub fn h(&self, z: Complex64) -> Result<FourierValue> {
        fourier_integral(&self.window(), self.b, z, &FourierOptions::default())
    }

    /// `¼ e^{−2^{μ+1}ν^μ} e^{bx/4}` in log form: lower bound for `H(ix)`, `x ≥ 0`.
    pub fn log_h_imag_lower_bound(&self, x: f64) -> f64 {
        (0.25f64).ln() - 2f64.powf(self.mu + 1.0) * self.nu.powf(self.mu) + 0.25 * self.b * x
    }
}

/// `σ(t)` for the window of `cfg`; exactly 0 below the double range.
pub fn sigma(t: f64, cfg: &MultiplierConfig) -> Result<f64> {
    if !(t.abs() < 1.0) {
        return Err(Error::Domain(format!("window evaluated at |t| = {} ≥ 1", t.abs())));
    }
    let w = cfg.window();
    let v = -w.nu_mu * ((1.0 - t).powf(-w.mu) + (1.0 + t).powf(-w.mu));
    Ok(if v < -745.0 { 0.0 } else { v.exp() })
}

/// Biorthogonal family `g_1, …, g_{n_max}` for one model and horizon.
#[derive(Debug, Clone)]
pub struct MomentFamily {
    pub model: FracModel,
    pub t: f64,
    pub cfg: MultiplierConfig,
    pub products: ProductTable,
    pub n_max: usize,
    /// `ln H(iλ_n)` (heat) or `ln H(0)` repeated (Schrödinger).
    log_norm: Vec<f64>,
}

impl MomentFamily {
    pub fn new(model: &FracModel, t: f64, g0: f64, trunc: usize, n_max: usize) -> Result<Self> {
        if n_max == 0 || n_max > trunc {
            return Err(Error::InvalidParameter(format!(
                "family size {n_max} must lie in 1..=K (K = {trunc})"
            )));
        }
        let cfg = MultiplierConfig::new(model, t, g0)?;
        let products = ProductTable::new(model, trunc)?;
        let log_norm = match model.kind {
            ModelKind::Heat => exec::map_range(n_max, |i| {
                cfg.h(Complex64::new(0.0, products.lambda(i + 1))).map(|v| v.value.log_mag)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?,
            ModelKind::Schrodinger => vec![cfg.log_h0; n_max],
        };
        Ok(MomentFamily {
            model: *model,
            t,
            cfg,
            products,
            n_max,
            log_norm,
        })
    }

    /// Interpolation node of mode `k`: `iλ_k` (heat) or `−λ_k` (Schrödinger).
    pub fn node(&self, k: usize) -> Complex64 {
        let l = self.model.lambda(k);
        match self.model.kind {
            ModelKind::Heat => Complex64::new(0.0, l),
            ModelKind::Schrodinger => Complex64::new(-l, 0.0),
        }
    }

    /// `ln H(iλ_n)` (heat) or `ln H(0)` (Schrödinger): the normaliser of `g_n`.
    pub fn log_norm(&self, n: usize) -> Result<f64> {
        self.check(n)?;
        Ok(self.log_norm[n - 1])
    }

    fn check(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.n_max {
            return Err(Error::InvalidParameter(format!("g_{n} outside family 1..={}", self.n_max)));
        }
        Ok(())
    }

    /// `g_n(z)`.
    pub fn g(&self, n: usize, z: Complex64) -> Result<LogComplex> {
        self.check(n)?;
        let (psi, h_arg) = match self.model.kind {
            ModelKind::Heat => (self.products.psi_heat(n, z, FAMILY_PRODUCT_TOL)?, z),
            ModelKind::Schrodinger => (
                self.products.psi_schrodinger(n, -z, FAMILY_PRODUCT_TOL)?,
                z + self.products.lambda(n),
            ),
        };
        if psi.log_value.is_zero() {
            return Ok(LogComplex::ZERO);
        }
        let h = self.cfg.h(h_arg)?.value;
        Ok((psi.log_value * h).scale_log(-self.log_norm[n - 1]))
    }

    /// `g_n(x)` on the real axis.
    pub fn g_real(&self, n: usize, x: f64) -> Result<LogComplex> {
        self.g(n, Complex64::new(x, 0.0))
    }

    /// `|g_n(node_k) − δ_{nk}|` for `n, k ≤ size`.
    pub fn kronecker_errors(&self, size: usize) -> Result<Vec<Vec<f64>>> {
        if size > self.n_max {
            return Err(Error::InvalidParameter(format!("size {size} exceeds family {}", self.n_max)));
        }
        exec::map_range(size, |i| {
            (1..=size)
                .map(|k| {
                    let v = self.g(i + 1, self.node(k))?;
                    let delta = if i + 1 == k { 1.0 } else { 0.0 };
                    Ok((v.to_complex() - delta).norm())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .into_iter()
        .collect()
    }
}

/// `g_n(z) = Ψ_n(−z) H(z + λ_n)/H(0)`.
pub fn g_schrodinger(fam: &MomentFamily, n: usize, x: f64) -> Result<LogComplex> {
    if fam.model.kind != ModelKind::Schrodinger {
        return Err(Error::InvalidParameter("family was built for the heat equation".into()));
    }
    fam.g_real(n, x)
}

/// `g_n(z) = Ψ_n(z) H(z)/H(iλ_n)`.
pub fn g_heat(fam: &MomentFamily, n: usize, x: f64) -> Result<LogComplex> {
    if fam.model.kind != ModelKind::Heat {
        return Err(Error::InvalidParameter("family was built for the Schrödinger equation".into()));
    }
    fam.g_real(n, x)
}

/// One rung of the `g₀` ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G0Candidate {
    pub g0: f64,
    /// `ln ‖g_1‖_{L²(ℝ)}` estimated on a geometric grid.
    pub log_l2: f64,
    /// Largest `ln |g_1(x)|` seen on the grid.
    pub peak_log: f64,
    /// First grid point beyond which `g_1` stayed below `peak − DECAY_NATS`.
    pub x_decay: Option<f64>,
}

/// Outcome of [`calibrate_g0`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G0Calibration {
    pub g0: f64,
    pub log_l2: f64,
    pub peak_log: f64,
    /// Whether the chosen `g_1` decayed within the admissible grid.
    pub decayed: bool,
    pub ladder: Vec<G0Candidate>,
}

/// Dynamic range below the peak at which `g_1` counts as negligible.
pub const DECAY_NATS: f64 = 36.0;

fn l2_candidate(model: &FracModel, t: f64, g0: f64, trunc: usize) -> Result<G0Candidate> {
    let fam = MomentFamily::new(model, t, g0, trunc, 1)?;
    let x_cap = 0.25 * fam.products.lambda_next;
    let mut xs = Vec::new();
    let mut logs = Vec::new();
    let mut peak = f64::NEG_INFINITY;
    let mut below = 0;
    let mut x_decay = None;
    let mut i = -4i32;
    loop {
        let x = 2f64.powf(i as f64 / 2.0);
        if x > x_cap {
            break;
        }
        let l = fam.g_real(1, x)?.log_mag;
        xs.push(x);
        logs.push(l);
        peak = peak.max(l);
        // Two consecutive samples below threshold, so a real zero of g_1
        // cannot fake decay.
        if l < peak - DECAY_NATS && x > 1.0 {
            below += 1;
            if below == 2 {
                x_decay = Some(x);
                break;
            }
        } else {
            below = 0;
        }
        i += 1;
    }
    // ∫_0^∞ |g|² dx ≈ |g(x_0)|² x_0 + trapezoid in ln x of |g|² x.
    let mut terms = vec![2.0 * logs[0] + xs[0].ln()];
    let h = 0.5 * 2f64.ln();
    for j in 0..xs.len() {
        let w = if j == 0 || j + 1 == xs.len() { 0.5 * h } else { h };
        terms.push(2.0 * logs[j] + xs[j].ln() + w.ln());
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|v| (v - m).exp()).sum();
    // Both half-lines: |g_1(−x)| = |g_1(x)| only for heat, so this is an estimate.
    let log_l2 = 0.5 * (m + s.ln() + 2f64.ln());
    Ok(G0Candidate {
        g0,
        log_l2,
        peak_log: peak,
        x_decay,
    })
}

/// Chooses `g₀ = ν T/2` on the ladder `0.25·2^{j/4}`, `j = 0..=rungs`.
///
/// Among candidates whose `g_1` decays by [`DECAY_NATS`] inside the range
/// covered by the truncation, the one with the smallest `L²` norm wins; if
/// none decays, the smallest norm overall is returned with `decayed = false`.
pub fn calibrate_g0(model: &FracModel, t: f64, trunc: usize, rungs: usize) -> Result<G0Calibration> {
    let ladder = exec::map_range(rungs + 1, |j| {
        l2_candidate(model, t, 0.25 * 2f64.powf(j as f64 / 4.0), trunc)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let pick = |only_decayed: bool| {
        ladder
            .iter()
            .filter(|c| !only_decayed || c.x_decay.is_some())
            .min_by(|a, b| a.log_l2.total_cmp(&b.log_l2))
            .copied()
    };
    let (best, decayed) = match pick(true) {
        Some(c) => (c, true),
        None => (pick(false).expect("non-empty ladder"), false),
    };
    Ok(G0Calibration {
        g0: best.g0,
        log_l2: best.log_l2,
        peak_log: best.peak_log,
        decayed,
        ladder,
    })
}

/// Decay-exponent fit of `−ln|H(x)/H(0)|` against `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    /// `(x, −ln|H(x)/H(0)|)` envelope samples used in the fit.
    pub points: Vec<(f64, f64)>,
}

/// Fits `−ln|H(x)/H(0)| ≈ C x^κ` on the dyadic grid `x_lo·2^j ≤ x_hi`.
///
/// `H` is real and changes sign on the real axis, so each grid value is the
/// envelope (largest `|H|`) over a window covering one oscillation.
pub fn h_decay_fit(cfg: &MultiplierConfig, x_lo: f64, x_hi: f64) -> Result<DecayFit> {
    if !(x_lo > 0.0 && x_hi >= 4.0 * x_lo) {
        return Err(Error::InvalidParameter("decay fit needs 0 < 4·x_lo ≤ x_hi".into()));
    }
    let mut grid = Vec::new();
    let mut x = x_lo;
    while x <= x_hi * (1.0 + 1e-12) {
        grid.push(x);
        x *= 2.0;
    }
    let period = 2.0 * PI / cfg.b;
    let points = exec::map_slice(&grid, |&x| {
        let mut best = f64::NEG_INFINITY;
        for i in 0..9 {
            let xi = x + period * i as f64 / 8.0;
            best = best.max(cfg.h(Complex64::new(xi, 0.0))?.value.log_mag);
        }
        Ok((x, cfg.log_h0 - best))
    })
    .into_iter()
    .collect::<Result<Vec<(f64, f64)>>>()?;
    if points.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::Domain("envelope not below H(0); start the grid further out".into()));
    }
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0.ln(), a.1 + p.1.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |a, p| {
        let dx = p.0.ln() - mx;
        (a.0 + dx * (p.1.ln() - my), a.1 + dx * dx)
    });
    Ok(DecayFit {
        exponent: sxy / sxx,
        points,
    })
}

/// `(x, ln H(ix), ln bound)` on `n` equispaced points of `[0, x_max]`.
pub fn h_imag_lower_bound(cfg: &MultiplierConfig, x_max: f64, n: usize) -> Result<Vec<(f64, f64, f64)>> {
    let n = n.max(2);
    exec::map_range(n, |i| {
        let x = x_max * i as f64 / (n - 1) as f64;
        let h = cfg.h(Complex64::new(0.0, x))?.value.log_mag;
        Ok((x, h, cfg.log_h_imag_lower_bound(x)))
    })
    .into_iter()
    .collect()
}
