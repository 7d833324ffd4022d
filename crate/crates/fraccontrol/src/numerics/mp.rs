//! Multiprecision kernels for the heat Gramian.
//!
//! The heat moment matrix `G_jk = (1 − e_j e_k)/(λ_j + λ_k)`, `e_j = e^{−λ_j T}`,
//! is a perturbed Cauchy matrix whose condition number grows like
//! `exp(c·N^{α})`; double precision loses all digits by `N ≈ 10`. These
//! routines run the factorizations in binary floating point of selectable
//! precision (astro-float) and convert only final quantities back to `f64`.
//!
//! [`heat_log_cost_exact_tail`] removes the mode truncation altogether: for
//! modes `m > M` with `e_m` below the working precision the constraint rows
//! are exactly Cauchy, and eliminating infinitely many of them leaves the
//! Schur complement `S_jk = (w_j w_k − e_j e_k)/(λ_j + λ_k)` with
//! `w_j = ∏_{m>M} (λ_m − λ_j)/(λ_m + λ_j)`. The infinite product is evaluated
//! as an explicit product up to `K`, times `exp(−2 Σ_{p odd} λ_j^p Z_p / p)`
//! with `Z_p = Σ_{m>K} λ_m^{−p} = π^{−αp} ζ(αp, K+1)` from Euler–Maclaurin.

use astro_float::{BigFloat, Consts, RoundingMode, Sign};

use crate::error::{Error, Result};
use crate::exec;

const RM: RoundingMode = RoundingMode::ToEven;

/// Multiprecision arithmetic context at a fixed precision (bits).
pub struct Ctx {
    pub p: usize,
    cc: Consts,
}

impl Ctx {
    pub fn new(p: usize) -> Result<Self> {
        let cc = Consts::new().map_err(|e| Error::Domain(format!("multiprecision constants: {e:?}")))?;
        Ok(Ctx { p, cc })
    }
    pub fn f(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, self.p)
    }
    pub fn u(&self, n: u64) -> BigFloat {
        BigFloat::from_u64(n, self.p)
    }
    pub fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.p, RM)
    }
    pub fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.p, RM)
    }
    pub fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.p, RM)
    }
    pub fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.p, RM)
    }
    pub fn exp(&mut self, a: &BigFloat) -> BigFloat {
        a.exp(self.p, RM, &mut self.cc)
    }
    pub fn ln(&mut self, a: &BigFloat) -> BigFloat {
        a.ln(self.p, RM, &mut self.cc)
    }
    pub fn pi(&mut self) -> BigFloat {
        self.cc.pi(self.p, RM)
    }
}

/// Nearest double (infinities on overflow, zero on underflow).
pub fn to_f64(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    match x.as_raw_parts() {
        None => {
            if x.is_inf_pos() {
                f64::INFINITY
            } else if x.is_inf_neg() {
                f64::NEG_INFINITY
            } else {
                f64::NAN
            }
        }
        Some((m, _, s, e, _)) => {
            let (hi, lo) = top_words(m);
            let frac = hi as f64 * 2f64.powi(-64) + lo as f64 * 2f64.powi(-128);
            // Split the exponent so neither factor leaves the double range early.
            let e1 = e / 2;
            let v = frac * 2f64.powi(e1) * 2f64.powi(e - e1);
            if s == Sign::Neg {
                -v
            } else {
                v
            }
        }
    }
}

fn top_words(m: &[u64]) -> (u64, u64) {
    let n = m.len();
    (m[n - 1], if n >= 2 { m[n - 2] } else { 0 })
}

/// `ln |x|` as a double, valid far outside the double range of `x`.
pub fn ln_abs(x: &BigFloat) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    match x.as_raw_parts() {
        None => f64::NAN,
        Some((m, _, _, e, _)) => {
            let (hi, lo) = top_words(m);
            let frac = hi as f64 * 2f64.powi(-64) + lo as f64 * 2f64.powi(-128);
            frac.ln() + e as f64 * std::f64::consts::LN_2
        }
    }
}

fn check(x: &BigFloat, what: &str) -> Result<()> {
    if x.is_nan() || x.is_inf() {
        Err(Error::Domain(format!("multiprecision {what} produced a non-finite value")))
    } else {
        Ok(())
    }
}

/// Solution of an SPD system in multiprecision.
#[derive(Debug, Clone)]
pub struct MpSolve {
    pub x: Vec<BigFloat>,
    /// `cᵀ G⁻¹ c`
    pub quad_form: BigFloat,
}

/// Solves `G x = c` for symmetric positive-definite `G` by `LDLᵀ`.
///
/// A non-positive pivot means the precision is insufficient for this
/// matrix and is reported as rank deficiency.
pub fn ldl_solve(ctx: &Ctx, g: &[Vec<BigFloat>], c: &[BigFloat]) -> Result<MpSolve> {
    let n = g.len();
    let mut l: Vec<Vec<BigFloat>> = Vec::with_capacity(n);
    // ld[j][i] = l[j][i]·d[i], cached so the inner loops need one product.
    let mut ld: Vec<Vec<BigFloat>> = Vec::with_capacity(n);
    let mut d: Vec<BigFloat> = Vec::with_capacity(n);
    for k in 0..n {
        let mut row: Vec<BigFloat> = Vec::with_capacity(k);
        for j in 0..k {
            let mut s = g[k][j].clone();
            for i in 0..j {
                s = ctx.sub(&s, &ctx.mul(&row[i], &ld[j][i]));
            }
            row.push(ctx.div(&s, &d[j]));
        }
        let row_d: Vec<BigFloat> = row.iter().zip(&d).map(|(x, di)| ctx.mul(x, di)).collect();
        let mut piv = g[k][k].clone();
        for i in 0..k {
            piv = ctx.sub(&piv, &ctx.mul(&row[i], &row_d[i]));
        }
        check(&piv, "pivot")?;
        if !piv.is_positive() || piv.is_zero() {
            return Err(Error::RankDeficient { rank: k, size: n });
        }
        d.push(piv);
        l.push(row);
        ld.push(row_d);
    }
    let mut y = c.to_vec();
    for i in 0..n {
        for j in 0..i {
            let t = ctx.mul(&l[i][j], &y[j]);
            y[i] = ctx.sub(&y[i], &t);
        }
    }
    let mut quad = ctx.u(0);
    for i in 0..n {
        quad = ctx.add(&quad, &ctx.div(&ctx.mul(&y[i], &y[i]), &d[i]));
    }
    let mut x: Vec<BigFloat> = (0..n).map(|i| ctx.div(&y[i], &d[i])).collect();
    for i in (0..n).rev() {
        for j in i + 1..n {
            let t = ctx.mul(&l[j][i], &x[j]);
            x[i] = ctx.sub(&x[i], &t);
        }
    }
    Ok(MpSolve { x, quad_form: quad })
}

/// `λ_k = (πk)^α` for `k = 1..=n`, plus `e_k = exp(−λ_k T)`.
fn spectrum(ctx: &mut Ctx, alpha: f64, t: f64, n: usize) -> (Vec<BigFloat>, Vec<BigFloat>) {
    let al = ctx.f(alpha);
    let pi = ctx.pi();
    let ln_pi = ctx.ln(&pi);
    let mut lam = Vec::with_capacity(n);
    let mut e = Vec::with_capacity(n);
    let mt = ctx.f(-t);
    for k in 1..=n {
        let lk = ctx.ln(&ctx.u(k as u64));
        let l = ctx.exp(&ctx.mul(&al, &ctx.add(&ln_pi, &lk)));
        e.push(ctx.exp(&ctx.mul(&l, &mt)));
        lam.push(l);
    }
    (lam, e)
}

/// Heat min-norm solution restricted to the first `N` modes.
#[derive(Debug, Clone)]
pub struct HeatTruncated {
    /// Coefficients of `e^{−λ_j (T − t)}` in the control.
    pub beta: Vec<BigFloat>,
    pub lambda: Vec<BigFloat>,
    pub log_cost: f64,
    pub precision_bits: usize,
}

/// Minimum-norm heat control enforcing modes `1..=N` at precision `p`.
///
/// `a` holds the real modal coefficients of the initial state (modes beyond
/// `a.len()` are zero). The constraint for mode `k` is
/// `∫_0^T e^{−λ_k (T − t)} u dt = e^{−λ_k T} a_k / φ_k'(1)`.
pub fn heat_truncated(alpha: f64, t: f64, a: &[f64], n: usize, p: usize) -> Result<HeatTruncated> {
    let mut ctx = Ctx::new(p)?;
    let (lam, e) = spectrum(&mut ctx, alpha, t, n);
    let one = ctx.u(1);
    let g: Vec<Vec<BigFloat>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| ctx.div(&ctx.sub(&one, &ctx.mul(&e[j], &e[k])), &ctx.add(&lam[j], &lam[k])))
                .collect()
        })
        .collect();
    let d: Vec<BigFloat> = (0..n)
        .map(|k| {
            let ak = a.get(k).copied().unwrap_or(0.0);
            let trace = crate::spectrum::boundary_trace(k + 1);
            ctx.mul(&e[k], &ctx.f(ak / trace))
        })
        .collect();
    let sol = ldl_solve(&ctx, &g, &d)?;
    Ok(HeatTruncated {
        beta: sol.x,
        lambda: lam,
        log_cost: 0.5 * ln_abs(&sol.quad_form),
        precision_bits: p,
    })
}

/// [`heat_truncated`] with automatic precision: the solve is repeated at
/// increasing precision until two consecutive log-costs agree to `tol`.
pub fn heat_truncated_auto(alpha: f64, t: f64, a: &[f64], n: usize, tol: f64, max_bits: usize) -> Result<HeatTruncated> {
    let mut p = 192;
    let mut prev: Option<HeatTruncated> = None;
    while p <= max_bits {
        match heat_truncated(alpha, t, a, n, p) {
            Ok(sol) => {
                if let Some(pr) = &prev {
                    if (pr.log_cost - sol.log_cost).abs() <= tol * sol.log_cost.abs().max(1.0) {
                        return Ok(sol);
                    }
                }
                prev = Some(sol);
            }
            Err(Error::RankDeficient { .. }) => prev = None,
            Err(e) => return Err(e),
        }
        p += p / 2;
    }
    Err(Error::Tolerance(format!(
        "heat Gramian with N = {n} did not stabilise below {max_bits} bits"
    )))
}

/// Samples `u(t_i) = Σ_j β_j e^{−λ_j (T − t_i)}` on `n` uniform points of `[0, T]`.
///
/// The sum cancels massively, so it is accumulated in multiprecision; each
/// chunk of samples starts from fresh exponentials and advances them by the
/// constant factors `e^{λ_j h}`.
pub fn heat_control_samples(sol: &HeatTruncated, t_end: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let p = sol.precision_bits;
    let h = t_end / (n - 1) as f64;
    let steps: Vec<BigFloat> = {
        let mut ctx = Ctx::new(p)?;
        let hh = ctx.f(h);
        sol.lambda.iter().map(|l| ctx.exp(&ctx.mul(l, &hh))).collect()
    };
    const CHUNK: usize = 2048;
    let n_chunks = n.div_ceil(CHUNK);
    let chunks: Vec<Result<Vec<f64>>> = exec::map_range(n_chunks, |ci| {
        let mut ctx = Ctx::new(p)?;
        let i0 = ci * CHUNK;
        let i1 = (i0 + CHUNK).min(n);
        let back = ctx.f(-(t_end - i0 as f64 * h));
        let mut cur: Vec<BigFloat> = sol
            .lambda
            .iter()
            .zip(&sol.beta)
            .map(|(l, b)| {
                let e = ctx.exp(&ctx.mul(l, &back));
                ctx.mul(b, &e)
            })
            .collect();
        let mut out = Vec::with_capacity(i1 - i0);
        for i in i0..i1 {
            if i > i0 {
                for (c, s) in cur.iter_mut().zip(&steps) {
                    *c = ctx.mul(c, s);
                }
            }
            let mut acc = ctx.u(0);
            for c in &cur {
                acc = ctx.add(&acc, c);
            }
            out.push(to_f64(&acc));
        }
        Ok(out)
    });
    let mut samples = Vec::with_capacity(n);
    for c in chunks {
        samples.extend(c?);
    }
    Ok(samples)
}

/// `B_{2j}/(2j)!` for `j = 1..=count` at precision `p`, via tangent numbers.
///
/// Tangent numbers are integers and are built exactly with the
/// Brent–Zimmermann recurrence at a precision wide enough to hold them.
pub fn bernoulli_over_factorial(count: usize, p: usize) -> Result<Vec<BigFloat>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    // log2((2n)!) bounds the size of T_n.
    let bits = (1..=2 * count).map(|k| (k as f64).log2()).sum::<f64>() as usize + 2 * count + 128;
    let wide = Ctx::new(bits.max(p))?;
    let mut tn: Vec<BigFloat> = vec![wide.u(0); count + 1];
    tn[1] = wide.u(1);
    for k in 2..=count {
        tn[k] = wide.mul(&tn[k - 1], &wide.u(k as u64 - 1));
    }
    for k in 2..=count {
        for j in k..=count {
            let a = wide.mul(&tn[j - 1], &wide.u((j - k) as u64));
            let b = wide.mul(&tn[j], &wide.u((j - k + 2) as u64));
            tn[j] = wide.add(&a, &b);
        }
    }
    let ctx = Ctx::new(p)?;
    let mut out = Vec::with_capacity(count);
    let mut fact = ctx.u(1);
    let mut four = ctx.u(1);
    for k in 1..=count {
        fact = ctx.mul(&fact, &ctx.u((2 * k - 1) as u64));
        fact = ctx.mul(&fact, &ctx.u((2 * k) as u64));
        four = ctx.mul(&four, &ctx.u(4));
        // B_{2k} = (−1)^{k−1} 2k T_k / (4^k (4^k − 1))
        let denom = ctx.mul(&four, &ctx.sub(&four, &ctx.u(1)));
        let num = ctx.mul(&BigFloat::from_u64(2 * k as u64, p), &tn[k]);
        let mut b = ctx.div(&ctx.div(&num, &denom), &fact);
        if k % 2 == 0 {
            b = b.neg();
        }
        out.push(b);
    }
    Ok(out)
}

/// Hurwitz zeta `ζ(s, a)` in multiprecision by Euler–Maclaurin at the
/// base point `a` (no shifting), for large `a`.
pub fn hurwitz_zeta_mp(ctx: &mut Ctx, s: &BigFloat, ln_a: &BigFloat, a: &BigFloat, bern: &[BigFloat]) -> Result<BigFloat> {
    let one = ctx.u(1);
    let a_ms = ctx.exp(&ctx.mul(s, ln_a).neg()); // a^{-s}
    let mut sum = ctx.div(&ctx.mul(&a_ms, a), &ctx.sub(s, &one));
    sum = ctx.add(&sum, &ctx.div(&a_ms, &ctx.u(2)));
    let a2 = ctx.mul(a, a);
    let mut pow = ctx.div(&a_ms, a); // a^{-s-1}
    let mut rising = s.clone();
    let eps_bits = ctx.p as i64 + 8;
    for (j, c) in bern.iter().enumerate() {
        if j > 0 {
            let m = ctx.u(2 * j as u64);
            let f1 = ctx.sub(&ctx.add(s, &m), &one);
            let f2 = ctx.add(s, &m);
            rising = ctx.mul(&rising, &ctx.mul(&f1, &f2));
            pow = ctx.div(&pow, &a2);
        }
        let term = ctx.mul(&ctx.mul(c, &rising), &pow);
        sum = ctx.add(&sum, &term);
        let small = match (term.exponent(), sum.exponent()) {
            (Some(et), Some(es)) => (es as i64 - et as i64) > eps_bits,
            _ => term.is_zero(),
        };
        if small {
            return Ok(sum);
        }
    }
    Err(Error::Tolerance("Euler–Maclaurin series exhausted its Bernoulli table".into()))
}

/// Result of [`heat_log_cost_exact_tail`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExactTailCost {
    pub log_cost: f64,
    /// Modes carried with their exact `e^{−λ T}` factor.
    pub free_modes: usize,
    /// Explicit factors in the tail product run to this mode.
    pub product_cutoff: usize,
    pub precision_bits: usize,
    /// Change in `log_cost` against the previous precision level.
    pub precision_delta: f64,
}

fn exact_tail_at(alpha: f64, t: f64, a: &[f64], p: usize) -> Result<ExactTailCost> {
    let pi = std::f64::consts::PI;
    // e_M below 2^{-p} with a safety margin.
    let need = (p as f64 * std::f64::consts::LN_2 + 40.0) / t;
    let mut m = (need.powf(1.0 / alpha) / pi).ceil() as usize;
    m = m.max(a.len()).max(2);
    let k_cut = ((m as f64) * 10f64.powf(1.0 / alpha)).ceil() as usize + 1;
    let mut ctx = Ctx::new(p)?;
    let (lam, e) = spectrum(&mut ctx, alpha, t, k_cut);
    // Explicit product over M < m ≤ K.
    let mut w: Vec<BigFloat> = vec![ctx.u(1); m];
    for mm in m..k_cut {
        for (j, wj) in w.iter_mut().enumerate() {
            let num = ctx.sub(&lam[mm], &lam[j]);
            let den = ctx.add(&lam[mm], &lam[j]);
            *wj = ctx.mul(wj, &ctx.div(&num, &den));
        }
    }
    // Tail exp(−2 Σ_{p odd} λ_j^p Z_p / p).
    let ratio = to_f64(&lam[m - 1]) / to_f64(&lam[k_cut - 1]);
    let pmax = ((p as f64 * std::f64::consts::LN_2 + 20.0 + (k_cut as f64).ln()) / (-ratio.ln())).ceil() as usize + 2;
    // Euler–Maclaurin terms shrink by about ((s + 2j)/(2πa))² per step. The
    // base point is shifted past K + 1 until every step gains at least a
    // factor e for the largest exponent; skipped terms are summed directly.
    let s_max = alpha * pmax as f64;
    let target = p as f64 * std::f64::consts::LN_2 + 20.0;
    let n_guess = target.ceil();
    let base_min = (std::f64::consts::E.sqrt() * (s_max + 2.0 * n_guess + 2.0) / (2.0 * pi)).ceil() as usize;
    let shift = base_min.saturating_sub(k_cut + 1);
    let base = k_cut + 1 + shift;
    let two_pi_a = 2.0 * pi * base as f64;
    let mut n_bern = 0usize;
    let mut decayed = 0.0;
    while decayed < target {
        let step = 2.0 * (two_pi_a / (s_max + 2.0 * n_bern as f64 + 2.0)).ln();
        if step < 1.0 {
            return Err(Error::Tolerance("Euler–Maclaurin tail did not reach its target".into()));
        }
        decayed += step;
        n_bern += 1;
    }
    n_bern += 8;
    let a_pt = ctx.u(base as u64);
    let ln_a = ctx.ln(&a_pt);
    let ln_head: Vec<BigFloat> = (0..shift).map(|k| {
        let v = ctx.u((k_cut + 1 + k) as u64);
        ctx.ln(&v)
    }).collect();
    let bern = bernoulli_over_factorial(n_bern, p)?;
    let pi_bf = ctx.pi();
    let ln_pi = ctx.ln(&pi_bf);
    let al = ctx.f(alpha);
    let mut tail = vec![ctx.u(0); m];
    let mut lam_pow: Vec<BigFloat> = lam[..m].to_vec();
    let lam_sq: Vec<BigFloat> = lam[..m].iter().map(|l| ctx.mul(l, l)).collect();
    let mut pp = 1usize;
    while pp <= pmax {
        let s = ctx.mul(&al, &ctx.u(pp as u64));
        let mut z = hurwitz_zeta_mp(&mut ctx, &s, &ln_a, &a_pt, &bern)?;
        for l in &ln_head {
            let term = ctx.exp(&ctx.mul(&s, l).neg());
            z = ctx.add(&z, &term);
        }
        // Z_p = π^{−αp} ζ(αp, K+1)
        let pi_pow = ctx.exp(&ctx.mul(&s, &ln_pi).neg());
        let zp = ctx.mul(&z, &pi_pow);
        let zp_over_p = ctx.div(&zp, &ctx.u(pp as u64));
        for j in 0..m {
            let term = ctx.mul(&lam_pow[j], &zp_over_p);
            tail[j] = ctx.add(&tail[j], &term);
            lam_pow[j] = ctx.mul(&lam_pow[j], &lam_sq[j]);
        }
        pp += 2;
    }
    let two = ctx.u(2);
    for j in 0..m {
        let f = ctx.exp(&ctx.mul(&two, &tail[j]).neg());
        w[j] = ctx.mul(&w[j], &f);
        check(&w[j], "tail product")?;
    }
    let s_mat: Vec<Vec<BigFloat>> = (0..m)
        .map(|j| {
            (0..m)
                .map(|k| {
                    let num = ctx.sub(&ctx.mul(&w[j], &w[k]), &ctx.mul(&e[j], &e[k]));
                    ctx.div(&num, &ctx.add(&lam[j], &lam[k]))
                })
                .collect()
        })
        .collect();
    let d: Vec<BigFloat> = (0..m)
        .map(|k| {
            let ak = a.get(k).copied().unwrap_or(0.0);
            let trace = crate::spectrum::boundary_trace(k + 1);
            ctx.mul(&e[k], &ctx.f(ak / trace))
        })
        .collect();
    let sol = ldl_solve(&ctx, &s_mat, &d)?;
    Ok(ExactTailCost {
        log_cost: 0.5 * ln_abs(&sol.quad_form),
        free_modes: m,
        product_cutoff: k_cut,
        precision_bits: p,
        precision_delta: f64::NAN,
    })
}

/// Minimum-norm heat null-control cost over *all* modes, in log form.
///
/// Runs at increasing precision (×1.5 per level, starting at 256 bits) until
/// two consecutive levels agree to `tol` in `log_cost`; the number of free
/// modes grows with the precision so the comparison also checks the
/// cut between free and Cauchy-eliminated modes.
pub fn heat_log_cost_exact_tail(alpha: f64, t: f64, a: &[f64], tol: f64, max_bits: usize) -> Result<ExactTailCost> {
    if !(t > 0.0) || !(alpha > 1.0) {
        return Err(Error::InvalidParameter(format!("need T > 0 and alpha > 1 (T={t}, alpha={alpha})")));
    }
    if a.iter().all(|&x| x == 0.0) {
        return Ok(ExactTailCost {
            log_cost: f64::NEG_INFINITY,
            free_modes: 0,
            product_cutoff: 0,
            precision_bits: 0,
            precision_delta: 0.0,
        });
    }
    let mut p = 256;
    let mut prev: Option<ExactTailCost> = None;
    while p <= max_bits {
        match exact_tail_at(alpha, t, a, p) {
            Ok(mut cur) => {
                if let Some(pr) = prev {
                    let delta = (cur.log_cost - pr.log_cost).abs();
                    if delta <= tol * cur.log_cost.abs().max(1.0) {
                        cur.precision_delta = delta;
                        return Ok(cur);
                    }
                }
                prev = Some(cur);
            }
            Err(Error::RankDeficient { .. }) | Err(Error::Domain(_)) => prev = None,
            Err(e) => return Err(e),
        }
        p += (p / 2).next_multiple_of(64);
    }
    Err(Error::Tolerance(format!(
        "exact-tail heat cost at T = {t} did not stabilise below {max_bits} bits"
    )))
}
