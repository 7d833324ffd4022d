//! Complex numbers stored as (log-magnitude, phase).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Div, Mul, Neg};

/// A complex value `exp(log_mag + i·phase)` with phase in `(−π, π]`.
///
/// Zero is `log_mag = −∞`. Products and quotients never overflow; sums are
/// formed relative to the larger operand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub log_mag: f64,
    pub phase: f64,
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(p: f64) -> f64 {
    if p > -PI && p <= PI {
        return p;
    }
    let r = (p + PI).rem_euclid(2.0 * PI) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex {
        log_mag: f64::NEG_INFINITY,
        phase: 0.0,
    };
    pub const ONE: LogComplex = LogComplex {
        log_mag: 0.0,
        phase: 0.0,
    };

    pub fn new(log_mag: f64, phase: f64) -> Self {
        if log_mag == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        LogComplex {
            log_mag,
            phase: wrap_phase(phase),
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.re == 0.0 && z.im == 0.0 {
            return Self::ZERO;
        }
        Self::new(z.norm().ln(), z.arg())
    }

    pub fn from_real(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else if x > 0.0 {
            Self::new(x.ln(), 0.0)
        } else {
            Self::new((-x).ln(), PI)
        }
    }

    /// `exp(w)` for complex `w`.
    pub fn exp(w: Complex64) -> Self {
        Self::new(w.re, w.im)
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    /// Converts back; magnitudes beyond the double range give infinities.
    pub fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.log_mag.exp(), self.phase)
    }

    /// Converts back after multiplying by `exp(-shift)`.
    pub fn to_complex_scaled(self, shift: f64) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar((self.log_mag - shift).exp(), self.phase)
    }

    /// Conversion that refuses to overflow.
    pub fn try_to_complex(self) -> Option<Complex64> {
        if self.log_mag > 709.0 {
            None
        } else {
            Some(self.to_complex())
        }
    }

    pub fn abs(self) -> f64 {
        self.log_mag.exp()
    }

    pub fn conj(self) -> Self {
        Self::new(self.log_mag, -self.phase)
    }

    pub fn inv(self) -> Self {
        Self::new(-self.log_mag, -self.phase)
    }

    /// Multiplies by `exp(l)` for real `l`.
    pub fn scale_log(self, l: f64) -> Self {
        if self.is_zero() {
            return self;
        }
        Self::new(self.log_mag + l, self.phase)
    }

    /// Sum of two values, exact up to rounding for any magnitudes.
    pub fn add(self, other: Self) -> Self {
        Self::sum([self, other])
    }

    /// Sum of many values, scaled by the largest magnitude.
    pub fn sum<I: IntoIterator<Item = LogComplex>>(items: I) -> Self {
        let items: Vec<LogComplex> = items.into_iter().collect();
        let m = items
            .iter()
            .map(|z| z.log_mag)
            .fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let s: Complex64 = items.iter().map(|z| z.to_complex_scaled(m)).sum();
        Self::from_complex(s).scale_log(m)
    }
}

impl Mul for LogComplex {
    type Output = LogComplex;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.log_mag + rhs.log_mag, self.phase + rhs.phase)
    }
}

impl Div for LogComplex {
    type Output = LogComplex;
    fn div(self, rhs: Self) -> Self {
        self * rhs.inv()
    }
}

impl Neg for LogComplex {
    type Output = LogComplex;
    fn neg(self) -> Self {
        if self.is_zero() {
            return self;
        }
        Self::new(self.log_mag, self.phase + PI)
    }
}
