//! Special functions in double precision.

use crate::error::{Error, Result};

/// `B_{2j}/(2j)!` for `j = 1..=8`.
const BERNOULLI_OVER_FACTORIAL: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

/// Hurwitz zeta `ζ(s, q) = Σ_{k≥0} (q + k)^{−s}` for `s > 1`, `q > 0`.
///
/// Direct summation until the shifted argument exceeds `max(12, s)`, then
/// Euler–Maclaurin with eight Bernoulli corrections.
pub fn hurwitz_zeta(s: f64, q: f64) -> Result<f64> {
    if !(s > 1.0) || !(q > 0.0) {
        return Err(Error::Domain(format!("hurwitz_zeta needs s > 1, q > 0 (s={s}, q={q})")));
    }
    let shift_to = 12f64.max(s);
    let mut head = 0.0;
    let mut a = q;
    while a < shift_to {
        head += a.powf(-s);
        a += 1.0;
    }
    let a_s = a.powf(-s);
    let mut tail = a * a_s / (s - 1.0) + 0.5 * a_s;
    // term_j = B_{2j}/(2j)! · s(s+1)…(s+2j−2) · a^{−s−2j+1}
    let mut rising = s;
    let mut pow = a_s / a;
    for (j, c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        if j > 0 {
            let m = (2 * j) as f64;
            rising *= (s + m - 1.0) * (s + m);
            pow /= a * a;
        }
        tail += c * rising * pow;
    }
    Ok(head + tail)
}
