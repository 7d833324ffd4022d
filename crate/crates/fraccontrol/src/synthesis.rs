//! Null-control synthesis.
//!
//! Two routes produce a control `u ∈ L²(0, T)`:
//!
//! * the moment method: coefficients `c_k`, interpolant `V = Σ c_n g_n`, and
//!   inversion of `V` as the Fourier transform of `v` supported in
//!   `[−T/2, T/2]`, with `u(t) = v(t − T/2)`;
//! * the minimum-norm Gramian control over the first `N` modes.
//!
//! Moment conventions: `V(z) = ∫ v(s) e^{−izs} ds`. For the heat equation the
//! nodes are `iλ_k` and `c_k = a_k e^{−λ_k T/2}/φ_k'(1)`; for the
//! Schrödinger equation the nodes are `−λ_k` and
//! `c_k = −i a_k e^{−iλ_k T/2}/φ_k'(1)`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use crate::biorthogonal::{calibrate_g0, G0Calibration, MomentFamily, DEFAULT_TRUNC};
use crate::error::{Error, Result};
use crate::exec;
use crate::numerics::mp::{heat_control_samples, heat_truncated_auto};
use crate::numerics::{solve_min_norm, LogComplex};
use crate::simulator::duhamel_integral;
use crate::spectrum::{boundary_trace, FracModel, ModelKind};

pub use crate::numerics::CostFit;

/// Modal coefficients `a_k = ⟨y₀, φ_k⟩`, `k = 1..=n_modes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalState {
    pub n_modes: usize,
    pub coeffs: Vec<Complex64>,
}

impl ModalState {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        ModalState {
            n_modes: coeffs.len(),
            coeffs,
        }
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); n_modes])
    }

    /// The eigenfunction `φ_k` padded to `n_modes`.
    pub fn eigenmode(k: usize, n_modes: usize) -> Result<Self> {
        if k == 0 || k > n_modes {
            return Err(Error::InvalidParameter(format!("mode {k} outside 1..={n_modes}")));
        }
        let mut s = Self::zeros(n_modes);
        s.coeffs[k - 1] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// `a_k` with 1-based `k`; zero beyond the stored range.
    pub fn coeff(&self, k: usize) -> Complex64 {
        self.coeffs.get(k - 1).copied().unwrap_or_default()
    }

    /// `‖y₀‖_{L²(0,1)}`.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest index with a nonzero coefficient (0 for the zero state).
    pub fn support(&self) -> usize {
        self.coeffs.iter().rposition(|c| c.norm_sqr() > 0.0).map_or(0, |i| i + 1)
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }

    fn validate(self) -> Result<Self> {
        if self.coeffs.len() != self.n_modes {
            return Err(Error::Config(format!(
                "n_modes = {} but {} coefficients given",
                self.n_modes,
                self.coeffs.len()
            )));
        }
        if self.coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Config("non-finite modal coefficient".into()));
        }
        Ok(self)
    }

    pub fn from_json(r: impl Read) -> Result<Self> {
        let s: ModalState = serde_json::from_reader(r)?;
        s.validate()
    }

    pub fn to_json(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_json(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Quadrature rule attached to a sampled control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleRule {
    /// Composite trapezoid; the simulator reads the samples as piecewise linear.
    Trapezoid,
}

/// A control sampled on `n` uniform points `t_i = iT/(n−1)` of `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub t_end: f64,
    pub samples: Vec<Complex64>,
    pub rule: SampleRule,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    re_u: f64,
    im_u: f64,
}

impl ControlSignal {
    pub fn new(t_end: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon T = {t_end} must be positive")));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidParameter("a control needs at least two samples".into()));
        }
        Ok(ControlSignal {
            t_end,
            samples,
            rule: SampleRule::Trapezoid,
        })
    }

    pub fn zeros(t_end: f64, n: usize) -> Result<Self> {
        Self::new(t_end, vec![Complex64::new(0.0, 0.0); n])
    }

    /// Samples `f` on the grid.
    pub fn from_fn(t_end: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let h = t_end / (n.max(2) - 1) as f64;
        Self::new(t_end, (0..n).map(|i| f(i as f64 * h)).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.t_end / (self.samples.len() - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.samples.len() {
            self.t_end
        } else {
            i as f64 * self.step()
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        let n = self.samples.len();
        let h = self.step();
        (0..n)
            .map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h })
            .collect()
    }

    pub fn is_real(&self) -> bool {
        self.samples.iter().all(|u| u.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|u| u.norm()).fold(0.0, f64::max)
    }

    /// Every other sample; requires an odd sample count.
    pub fn coarsened(&self) -> Option<Self> {
        let n = self.samples.len();
        if n < 5 || n % 2 == 0 {
            return None;
        }
        Some(ControlSignal {
            t_end: self.t_end,
            samples: self.samples.iter().step_by(2).copied().collect(),
            rule: self.rule,
        })
    }

    /// Splits at sample `i` into `[0, t_i]` and `[t_i, T]`, sharing sample `i`.
    pub fn split_at(&self, i: usize) -> Result<(Self, Self)> {
        if i == 0 || i + 1 >= self.samples.len() {
            return Err(Error::InvalidParameter(format!("split index {i} is not interior")));
        }
        let ti = self.time(i);
        Ok((
            Self::new(ti, self.samples[..=i].to_vec())?,
            Self::new(self.t_end - ti, self.samples[i..].to_vec())?,
        ))
    }

    /// CSV with columns `t, re_u, im_u`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for (i, u) in self.samples.iter().enumerate() {
            wr.serialize(CsvRow {
                t: self.time(i),
                re_u: u.re,
                im_u: u.im,
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the CSV written by [`ControlSignal::write_csv`]; the grid must
    /// start at 0 and be uniform.
    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let rows = rd.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>()?;
        if rows.len() < 2 {
            return Err(Error::Config("control file holds fewer than two samples".into()));
        }
        let t_end = rows[rows.len() - 1].t;
        let h = t_end / (rows.len() - 1) as f64;
        for (i, r) in rows.iter().enumerate() {
            if (r.t - i as f64 * h).abs() > 1e-9 * t_end.abs().max(1.0) {
                return Err(Error::Config(format!("sample {i} at t = {} breaks the uniform grid", r.t)));
            }
            if !(r.re_u.is_finite() && r.im_u.is_finite()) {
                return Err(Error::Config(format!("non-finite control value at sample {i}")));
            }
        }
        Self::new(t_end, rows.iter().map(|r| Complex64::new(r.re_u, r.im_u)).collect())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// `‖u‖_{L²(0,T)}` by the attached rule.
pub fn control_cost(u: &ControlSignal) -> f64 {
    u.weights()
        .iter()
        .zip(&u.samples)
        .map(|(w, v)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Moment coefficients `c_k`, `k = 1..=y0.n_modes`, in log form.
pub fn moment_coeffs(y0: &ModalState, t: f64, model: &FracModel) -> Vec<LogComplex> {
    (1..=y0.n_modes)
        .map(|k| {
            let base = LogComplex::from_complex(y0.coeff(k) / boundary_trace(k));
            let l = model.lambda(k);
            match model.kind {
                ModelKind::Heat => base.scale_log(-0.5 * l * t),
                ModelKind::Schrodinger => {
                    base * LogComplex::new(0.0, -0.5 * PI) * LogComplex::exp(Complex64::new(0.0, -0.5 * l * t))
                }
            }
        })
        .collect()
}

/// `V(x)` with its summands.
#[derive(Debug, Clone, PartialEq)]
pub struct VEval {
    pub value: LogComplex,
    /// `ln |c_n g_n(x)|` for `n = 1..=N` (`−∞` where `c_n = 0`).
    pub term_logs: Vec<f64>,
}

/// `V(x) = Σ_{n ≤ N} c_n g_n(x)`.
///
/// Coefficients beyond the family size are a truncation failure unless they
/// vanish.
pub fn build_v(x: f64, coeffs: &[LogComplex], fam: &MomentFamily) -> Result<VEval> {
    if let Some(n) = coeffs.iter().skip(fam.n_max).position(|c| !c.is_zero()) {
        return Err(Error::Tolerance(format!(
            "coefficient c_{} is nonzero but the family stops at {}",
            fam.n_max + n + 1,
            fam.n_max
        )));
    }
    let z = Complex64::new(x, 0.0);
    let n_top = coeffs.len().min(fam.n_max);
    // H(x) is shared by every heat summand.
    let h_heat = match fam.model.kind {
        ModelKind::Heat if coeffs.iter().any(|c| !c.is_zero()) => Some(fam.cfg.h(z)?.value),
        _ => None,
    };
    let mut terms = Vec::with_capacity(n_top);
    for n in 1..=n_top {
        let c = coeffs[n - 1];
        if c.is_zero() {
            terms.push(LogComplex::ZERO);
            continue;
        }
        let g = match h_heat {
            Some(h) => {
                let psi = fam.products.psi_heat(n, z, crate::biorthogonal::FAMILY_PRODUCT_TOL)?;
                (psi.log_value * h).scale_log(-fam.log_norm(n)?)
            }
            None => fam.g_real(n, x)?,
        };
        terms.push(c * g);
    }
    Ok(VEval {
        value: LogComplex::sum(terms.iter().copied()),
        term_logs: terms.iter().map(|t| t.log_mag).collect(),
    })
}

/// Settings of [`invert_to_control`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    /// Samples of `u` on `[0, T]`.
    pub n_t: usize,
    /// Stop once a block of `V` samples stays below this fraction of the peak.
    pub tail_tol: f64,
    /// `V` samples evaluated per block on each side.
    pub block: usize,
    /// Hard cap on the nonnegative-frequency samples.
    pub max_points: usize,
    /// `V(−x) = conj V(x)`, so `u` is real and only `x ≥ 0` is sampled.
    pub hermitian: bool,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            n_t: (1 << 16) + 1,
            tail_tol: 1e-8,
            block: 256,
            max_points: 1 << 15,
            hermitian: false,
        }
    }
}

/// Diagnostics of one inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    /// Frequency spacing `π/T`.
    pub dx: f64,
    /// Largest `|x|` sampled.
    pub x_max: f64,
    /// Nonnegative-frequency samples used.
    pub points: usize,
    /// `ln max |V|`.
    pub log_peak: f64,
    /// `Σ|V|` over the last block relative to `Σ|V|` overall.
    pub tail_rel: f64,
    /// `‖v‖` outside `[−T/2, T/2]` relative to `‖v‖` inside.
    pub support_violation: f64,
    /// `max |Im u| / max |u|` before a Hermitian `u` is made real.
    pub imag_residual: f64,
}

/// `u(t) = v(t − T/2)` with `v(s) = (1/2π)∫ V(x) e^{ixs} dx`.
///
/// The integral is a trapezoid sum on `x_j = jπ/T`, extended block by block
/// until `|V|` has fallen below `tail_tol` times its peak for two
/// consecutive blocks. The sum is carried out by one inverse FFT of length
/// `L = 2(n_t − 1)`, whose output also covers `v` on `(T/2, 3T/2)`; the
/// energy there measures the support violation.
pub fn invert_to_control<F>(v: F, t: f64, opts: &InversionOptions) -> Result<(ControlSignal, InversionReport)>
where
    F: Fn(f64) -> Result<LogComplex> + Sync + Send,
{
    if !(t > 0.0) || opts.n_t < 3 || opts.block == 0 || !(opts.tail_tol > 0.0) {
        return Err(Error::InvalidParameter("invalid inversion settings".into()));
    }
    let dx = PI / t;
    let log_tol = opts.tail_tol.ln();
    let mut pos: Vec<LogComplex> = Vec::new();
    let mut neg: Vec<LogComplex> = Vec::new();
    let mut peak = f64::NEG_INFINITY;
    let mut quiet = 0;
    let mut last_block;
    loop {
        let j0 = pos.len();
        if j0 >= opts.max_points {
            return Err(Error::Tolerance(format!(
                "cutoff too small: |V| above {:e} of its peak at x = {:.3e}",
                opts.tail_tol,
                j0 as f64 * dx
            )));
        }
        let j1 = (j0 + opts.block).min(opts.max_points);
        let p: Vec<Result<LogComplex>> = exec::map_range(j1 - j0, |i| v((j0 + i) as f64 * dx));
        pos.extend(p.into_iter().collect::<Result<Vec<_>>>()?);
        if !opts.hermitian {
            if neg.is_empty() {
                neg.push(LogComplex::ZERO); // j = 0 lives in `pos`
            }
            let first = j0.max(1);
            let q: Vec<Result<LogComplex>> = exec::map_range(j1 - first, |i| v(-((first + i) as f64) * dx));
            neg.extend(q.into_iter().collect::<Result<Vec<_>>>()?);
        }
        let block_max = pos[j0..j1]
            .iter()
            .chain(if opts.hermitian { &neg[0..0] } else { &neg[j0.max(1)..j1] })
            .map(|z| z.log_mag)
            .fold(f64::NEG_INFINITY, f64::max);
        peak = peak.max(block_max);
        last_block = (j0, j1);
        if peak == f64::NEG_INFINITY {
            break;
        }
        if block_max < peak + log_tol {
            quiet += 1;
            if quiet == 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let n_t = opts.n_t;
    let l = 2 * (n_t - 1);
    let points = pos.len();
    let report_zero = InversionReport {
        dx,
        x_max: (points - 1) as f64 * dx,
        points,
        log_peak: peak,
        tail_rel: 0.0,
        support_violation: 0.0,
        imag_residual: 0.0,
    };
    if peak == f64::NEG_INFINITY {
        return Ok((ControlSignal::zeros(t, n_t)?, report_zero));
    }
    if peak > 700.0 {
        return Err(Error::Overflow(format!("|V| reaches e^{peak:.1}; u is not representable")));
    }
    let scale = |z: LogComplex| z.to_complex_scaled(peak);
    let sum_abs = |r: std::ops::Range<usize>| -> f64 {
        let s: f64 = pos[r.clone()].iter().map(|z| (z.log_mag - peak).exp()).sum();
        let m: f64 = if opts.hermitian {
            s
        } else {
            neg[r.start.max(1)..r.end].iter().map(|z| (z.log_mag - peak).exp()).sum()
        };
        s + m
    };
    let tail_rel = sum_abs(last_block.0..last_block.1) / sum_abs(0..points);

    // b[j mod L] += V_j e^{−ijπ/2}; j < 0 handled through neg or conjugation.
    let rot = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for (j, z) in pos.iter().enumerate() {
        buf[j % l] += scale(*z) * rot[j % 4];
    }
    for j in 1..points {
        let z = if opts.hermitian { scale(pos[j]).conj() } else { scale(neg[j]) };
        // e^{+ijπ/2} for index −j.
        let idx = (l - j % l) % l;
        buf[idx] += z * rot[(4 - j % 4) % 4];
    }
    FftPlanner::<f64>::new().plan_fft_inverse(l).process(&mut buf);
    let factor = dx / (2.0 * PI) * peak.exp();
    let inside: f64 = buf[..n_t].iter().map(|z| z.norm_sqr()).sum();
    let outside: f64 = buf[n_t..].iter().map(|z| z.norm_sqr()).sum();
    let mut samples: Vec<Complex64> = buf[..n_t].iter().map(|z| z * factor).collect();
    let umax = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let imag_residual = if umax > 0.0 {
        samples.iter().map(|z| z.im.abs()).fold(0.0, f64::max) / umax
    } else {
        0.0
    };
    if opts.hermitian {
        for z in samples.iter_mut() {
            z.im = 0.0;
        }
    }
    let report = InversionReport {
        tail_rel,
        support_violation: if inside > 0.0 { (outside / inside).sqrt() } else { 0.0 },
        imag_residual,
        ..report_zero
    };
    Ok((ControlSignal::new(t, samples)?, report))
}

/// Settings of [`moment_control`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentOptions {
    /// Multiplier parameter `g₀ = νT/2`; calibrated when absent.
    pub g0: Option<f64>,
    /// Explicit factors `K` in the product `Ψ`.
    pub trunc: usize,
    /// Rungs of the `g₀` ladder tried by the calibration.
    pub rungs: usize,
    pub inversion: InversionOptions,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions {
            g0: None,
            trunc: DEFAULT_TRUNC,
            rungs: 12,
            inversion: InversionOptions::default(),
        }
    }
}

/// A moment-method control with its provenance.
#[derive(Debug, Clone)]
pub struct MomentControl {
    pub control: ControlSignal,
    /// `ln ‖u‖_{L²}`.
    pub log_cost: f64,
    pub g0: f64,
    pub calibration: Option<G0Calibration>,
    pub inversion: InversionReport,
}

/// Moment-method null-control of `y0`: `c_k`, `V`, then inversion.
pub fn moment_control(y0: &ModalState, t: f64, model: &FracModel, opts: &MomentOptions) -> Result<MomentControl> {
    let n = y0.support();
    let mut inv = opts.inversion;
    inv.hermitian = model.kind == ModelKind::Heat && y0.is_real();
    if n == 0 {
        let control = ControlSignal::zeros(t, inv.n_t)?;
        let (_, report) = invert_to_control(|_| Ok(LogComplex::ZERO), t, &inv)?;
        return Ok(MomentControl {
            control,
            log_cost: f64::NEG_INFINITY,
            g0: opts.g0.unwrap_or(f64::NAN),
            calibration: None,
            inversion: report,
        });
    }
    let (g0, calibration) = match opts.g0 {
        Some(g) => (g, None),
        None => {
            let c = calibrate_g0(model, t, opts.trunc, opts.rungs)?;
            (c.g0, Some(c))
        }
    };
    let fam = MomentFamily::new(model, t, g0, opts.trunc, n)?;
    let coeffs = moment_coeffs(y0, t, model);
    let (control, inversion) = invert_to_control(|x| build_v(x, &coeffs, &fam).map(|e| e.value), t, &inv)?;
    Ok(MomentControl {
        log_cost: control_cost(&control).ln(),
        control,
        g0,
        calibration,
        inversion,
    })
}

/// Default truncation of the Gramian problem: heat keeps every mode with
/// `e^{−λ_N T} ≥ 10⁻¹⁶ e^{−λ_1 T}`; Schrödinger keeps the support of `y₀`.
pub fn default_truncation(y0: &ModalState, t: f64, model: &FracModel) -> usize {
    let support = y0.support().max(1);
    match model.kind {
        ModelKind::Heat => {
            let target = model.lambda(1) * t + 16.0 * 10f64.ln();
            let mut n = 1;
            while model.lambda(n) * t < target {
                n += 1;
            }
            n.max(support)
        }
        ModelKind::Schrodinger => support,
    }
}

/// Pivot floor below which the heat Gramian is re-solved in multiprecision.
pub const F64_PIVOT_FLOOR: f64 = 1e-8;
/// Agreement required between successive precision levels.
pub const MP_COST_TOL: f64 = 1e-10;
/// Largest precision tried by the multiprecision Gramian solve.
pub const MP_MAX_BITS: usize = 8192;

/// A minimum-norm Gramian control.
#[derive(Debug, Clone)]
pub struct GramianControl {
    pub control: ControlSignal,
    /// `½ ln(c^H G⁻¹ c)`; `−∞` for the zero state.
    pub log_cost: f64,
    pub n: usize,
    /// Set when the solve ran in multiprecision.
    pub precision_bits: Option<usize>,
    /// Smallest scaled pivot of the double-precision factorisation.
    pub min_pivot: Option<f64>,
}

/// Targets of the `N` moment equations in the stable form used by the
/// Gramian: heat `e^{−λ_k T} a_k/φ_k'(1)` against `e^{−λ_k(T−t)}`,
/// Schrödinger `−i a_k/φ_k'(1)` against `e^{iλ_k t}`.
pub fn gramian_targets(y0: &ModalState, t: f64, model: &FracModel, n: usize) -> Vec<Complex64> {
    (1..=n)
        .map(|k| {
            let a = y0.coeff(k) / boundary_trace(k);
            match model.kind {
                ModelKind::Heat => a * (-model.lambda(k) * t).exp(),
                ModelKind::Schrodinger => Complex64::new(0.0, -1.0) * a,
            }
        })
        .collect()
}

fn heat_gramian_f64(lam: &[f64], t: f64) -> Vec<Vec<f64>> {
    lam.iter()
        .map(|&lj| {
            lam.iter()
                .map(|&lk| -(-(lj + lk) * t).exp_m1() / (lj + lk))
                .collect()
        })
        .collect()
}

fn schrodinger_gramian(lam: &[f64], t: f64) -> Vec<Vec<Complex64>> {
    lam.iter()
        .map(|&lj| {
            lam.iter()
                .map(|&lk| {
                    if lj == lk {
                        Complex64::new(t, 0.0)
                    } else {
                        // ∫_0^T e^{i(λ_j − λ_k)t} dt
                        let d = lj - lk;
                        let (s, c) = (d * t).sin_cos();
                        Complex64::new(s / d, (1.0 - c) / d)
                    }
                })
                .collect()
        })
        .collect()
}

/// Minimum-norm control enforcing the first `n` moment equations.
///
/// The heat Gramian is tried in double precision and re-solved in
/// multiprecision when its scaled pivots fall below [`F64_PIVOT_FLOOR`] or
/// it is numerically rank deficient. The Schrödinger Gramian stays in double
/// precision; rank collapse there is reported as an error advising a smaller `n`.
pub fn min_norm_control(y0: &ModalState, t: f64, n: usize, model: &FracModel, n_t: usize) -> Result<GramianControl> {
    if n == 0 {
        return Err(Error::InvalidParameter("truncation N must be at least 1".into()));
    }
    if let Some(k) = (n + 1..=y0.n_modes).find(|&k| y0.coeff(k).norm_sqr() > 0.0) {
        return Err(Error::InvalidParameter(format!("y0 has a nonzero mode {k} beyond N = {n}")));
    }
    if y0.support() == 0 {
        return Ok(GramianControl {
            control: ControlSignal::zeros(t, n_t)?,
            log_cost: f64::NEG_INFINITY,
            n,
            precision_bits: None,
            min_pivot: None,
        });
    }
    let lam: Vec<f64> = (1..=n).map(|k| model.lambda(k)).collect();
    let targets = gramian_targets(y0, t, model, n);
    match model.kind {
        ModelKind::Schrodinger => {
            let g = schrodinger_gramian(&lam, t);
            let sol = solve_min_norm(&g, &targets).map_err(|e| match e {
                Error::RankDeficient { rank, size } => Error::IllConditioned(format!(
                    "Schrödinger Gramian has numerical rank {rank} of {size}; reduce N"
                )),
                other => other,
            })?;
            let beta = sol.coeffs;
            let control = ControlSignal::from_fn(t, n_t, |tt| {
                lam.iter()
                    .zip(&beta)
                    .map(|(l, b)| b * Complex64::from_polar(1.0, -l * tt))
                    .sum()
            })?;
            Ok(GramianControl {
                control,
                log_cost: sol.log_cost,
                n,
                precision_bits: None,
                min_pivot: Some(sol.min_pivot),
            })
        }
        ModelKind::Heat => {
            let g = heat_gramian_f64(&lam, t);
            let parts: [Vec<f64>; 2] = [
                targets.iter().map(|c| c.re).collect(),
                targets.iter().map(|c| c.im).collect(),
            ];
            let f64_sols: Vec<Option<_>> = parts
                .iter()
                .map(|p| {
                    if p.iter().all(|&v| v == 0.0) {
                        return Ok(None);
                    }
                    match solve_min_norm(&g, p) {
                        Ok(s) => Ok(Some(s)),
                        Err(Error::RankDeficient { .. }) => Ok(None),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<_>>()?;
            let nonzero = |i: usize| parts[i].iter().any(|&v| v != 0.0);
            let f64_ok = (0..2).all(|i| !nonzero(i) || f64_sols[i].as_ref().is_some_and(|s| s.min_pivot >= F64_PIVOT_FLOOR));
            if f64_ok {
                let mut samples = vec![Complex64::new(0.0, 0.0); n_t];
                let mut cost2 = 0.0;
                let mut min_pivot = f64::INFINITY;
                for (i, sol) in f64_sols.iter().enumerate() {
                    let Some(sol) = sol else { continue };
                    let unit = if i == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
                    let h = t / (n_t - 1) as f64;
                    for (m, s) in samples.iter_mut().enumerate() {
                        let back = t - m as f64 * h;
                        let v: f64 = lam.iter().zip(&sol.coeffs).map(|(l, b)| b * (-l * back).exp()).sum();
                        *s += unit * v;
                    }
                    cost2 += (2.0 * sol.log_cost).exp();
                    min_pivot = min_pivot.min(sol.min_pivot);
                }
                return Ok(GramianControl {
                    control: ControlSignal::new(t, samples)?,
                    log_cost: 0.5 * cost2.ln(),
                    n,
                    precision_bits: None,
                    min_pivot: Some(min_pivot),
                });
            }
            // Multiprecision: a holds a_k so the solver's targets match `targets`.
            let mut samples = vec![Complex64::new(0.0, 0.0); n_t];
            let mut log_terms = Vec::new();
            let mut bits = 0;
            for (i, unit) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)].iter().enumerate() {
                let a: Vec<f64> = (1..=n)
                    .map(|k| if i == 0 { y0.coeff(k).re } else { y0.coeff(k).im })
                    .collect();
                if a.iter().all(|&v| v == 0.0) {
                    continue;
                }
                let sol = heat_truncated_auto(model.alpha, t, &a, n, MP_COST_TOL, MP_MAX_BITS)?;
                let u = heat_control_samples(&sol, t, n_t)?;
                for (s, v) in samples.iter_mut().zip(u) {
                    *s += unit * v;
                }
                log_terms.push(2.0 * sol.log_cost);
                bits = bits.max(sol.precision_bits);
            }
            let m = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_cost = 0.5 * (m + log_terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln());
            Ok(GramianControl {
                control: ControlSignal::new(t, samples)?,
                log_cost,
                n,
                precision_bits: Some(bits),
                min_pivot: None,
            })
        }
    }
}

/// `|M_k(u) − m_k| / max_j |m_j|` for `k = 1..=k_max`, where `M_k` are the
/// moment integrals of `u` in the Gramian's stable form and `m_k` their
/// targets for `y0`. `M_k` integrates the piecewise-linear interpolant of `u`
/// exactly.
pub fn moment_residuals(u: &ControlSignal, y0: &ModalState, model: &FracModel, k_max: usize) -> Result<Vec<f64>> {
    let t = u.t_end;
    let targets = gramian_targets(y0, t, model, k_max);
    let scale = targets.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let moments = exec::map_range(k_max, |i| {
        let l = model.lambda(i + 1);
        match model.kind {
            ModelKind::Heat => duhamel_integral(u, Complex64::new(l, 0.0)),
            // ∫ e^{iλt} u = e^{iλT} ∫ e^{−iλ(T−t)} u
            ModelKind::Schrodinger => duhamel_integral(u, Complex64::new(0.0, l))
                .map(|v| v * Complex64::from_polar(1.0, l * t)),
        }
    });
    let denom = if scale > 0.0 { scale } else { 1.0 };
    moments
        .into_iter()
        .zip(&targets)
        .map(|(m, c)| m.map(|m| (m - c).norm() / denom))
        .collect()
}
