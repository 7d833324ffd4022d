//! Minimum-norm solves with symmetric/Hermitian positive-definite Gram matrices.

use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Field scalars supported by [`solve_min_norm`]: `f64` and `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn norm_sqr(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
}

/// Output of [`solve_min_norm`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinNormSolution<S> {
    /// `β` with `G β = c`.
    pub coeffs: Vec<S>,
    /// `½ ln(c^H G⁻¹ c)`; `−∞` for `c = 0`.
    pub log_cost: f64,
    /// Smallest pivot of the scaled factorization (largest is 1).
    pub min_pivot: f64,
}

/// Relative pivot threshold below which the scaled matrix is declared rank deficient.
pub fn rank_threshold(n: usize) -> f64 {
    10.0 * n as f64 * f64::EPSILON
}

/// Solves `G β = c` for Hermitian positive-definite `G` and returns the
/// minimum-norm cost `√(c^H G⁻¹ c)` in log form.
///
/// The system is scaled symmetrically to unit diagonal, `D⁻¹ G D⁻¹` with
/// `D = diag(√G_kk)`, then factored by diagonally pivoted Cholesky. The cost
/// is the norm of the forward-substituted right-hand side, a sum of squares,
/// so no cancellation occurs in its evaluation.
pub fn solve_min_norm<S: Scalar>(g: &[Vec<S>], c: &[S]) -> Result<MinNormSolution<S>> {
    let n = g.len();
    if n == 0 || c.len() != n || g.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter(format!(
            "Gram matrix must be square and match the right-hand side (n = {n}, len(c) = {})",
            c.len()
        )));
    }
    let d: Vec<f64> = (0..n).map(|i| g[i][i].re()).collect();
    if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::RankDeficient { rank: 0, size: n });
    }
    let ds: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
    let mut a: Vec<Vec<S>> = (0..n)
        .map(|i| (0..n).map(|j| g[i][j] * S::from_real(1.0 / (ds[i] * ds[j]))).collect())
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    let thresh = rank_threshold(n);
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let (p, piv) = (k..n)
            .map(|i| (i, a[i][i].re()))
            .fold((k, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(piv > thresh) {
            return Err(Error::RankDeficient { rank: k, size: n });
        }
        min_pivot = min_pivot.min(piv);
        if p != k {
            a.swap(p, k);
            for row in a.iter_mut() {
                row.swap(p, k);
            }
            perm.swap(p, k);
        }
        let l = piv.sqrt();
        a[k][k] = S::from_real(l);
        for i in k + 1..n {
            a[i][k] = a[i][k] / S::from_real(l);
        }
        // Full trailing update: symmetric pivoting reads entries from both triangles.
        for j in k + 1..n {
            let ajk = a[j][k].conj();
            for i in k + 1..n {
                let v = a[i][k] * ajk;
                a[i][j] = a[i][j] - v;
            }
        }
    }
    // Forward: L y = P D⁻¹ c.
    let mut y: Vec<S> = perm.iter().map(|&i| c[i] * S::from_real(1.0 / ds[i])).collect();
    for i in 0..n {
        let mut s = y[i];
        for j in 0..i {
            s = s - a[i][j] * y[j];
        }
        y[i] = s / a[i][i];
    }
    let cost2: f64 = y.iter().map(|v| v.norm_sqr()).sum();
    // Backward: L^H x = y.
    let mut x = y;
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s = s - a[j][i].conj() * x[j];
        }
        x[i] = s / a[i][i];
    }
    let mut coeffs = vec![S::zero(); n];
    for (k, &i) in perm.iter().enumerate() {
        coeffs[i] = x[k] * S::from_real(1.0 / ds[i]);
    }
    Ok(MinNormSolution {
        coeffs,
        log_cost: 0.5 * cost2.ln(),
        min_pivot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gauss–Jordan inverse with partial pivoting (oracle).
    fn inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = m.len();
        let mut a: Vec<Vec<f64>> = m
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = r.clone();
                row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                row
            })
            .collect();
        for col in 0..n {
            let p = (col..n)
                .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
                .unwrap();
            a.swap(col, p);
            let pv = a[col][col];
            for v in a[col].iter_mut() {
                *v /= pv;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r][col];
                    for k in 0..2 * n {
                        a[r][k] -= f * a[col][k];
                    }
                }
            }
        }
        a.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    #[test]
    fn identity_cost_one() {
        let g = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let s = solve_min_norm(&g, &[1.0, 0.0]).unwrap();
        assert!(s.log_cost.abs() < 1e-15);
        assert_eq!(s.coeffs, vec![1.0, 0.0]);
    }

    #[test]
    fn hilbert_two_by_two() {
        let g = vec![vec![1.0, 0.5], vec![0.5, 1.0 / 3.0]];
        let s = solve_min_norm(&g, &[1.0, 0.0]).unwrap();
        assert_relative_eq!((2.0 * s.log_cost).exp(), 4.0, max_relative = 1e-14);
        assert_relative_eq!(s.coeffs[0], 4.0, max_relative = 1e-13);
        assert_relative_eq!(s.coeffs[1], -6.0, max_relative = 1e-13);
    }

    #[test]
    fn rank_deficient_is_signalled() {
        let g = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        match solve_min_norm(&g, &[1.0, 0.0]) {
            Err(Error::RankDeficient { rank, size }) => {
                assert_eq!((rank, size), (1, 2));
            }
            other => panic!("expected rank signal, got {other:?}"),
        }
    }

    #[test]
    fn hermitian_complex_system() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let g = vec![vec![2.0 * one, i], vec![-i, 2.0 * one]];
        let c = vec![one, i];
        let s = solve_min_norm(&g, &c).unwrap();
        for r in 0..2 {
            let lhs = g[r][0] * s.coeffs[0] + g[r][1] * s.coeffs[1];
            assert!((lhs - c[r]).norm() < 1e-14);
        }
        let cost2: Complex64 = c.iter().zip(&s.coeffs).map(|(ci, bi)| ci.conj() * bi).sum();
        assert_relative_eq!((2.0 * s.log_cost).exp(), cost2.re, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn random_spd_against_dense_inverse(seed in 0u64..10_000, n in 1usize..=20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let g: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| {
                    (0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 }
                }).collect())
                .collect();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = solve_min_norm(&g, &c).unwrap();
            let inv = inverse(&g);
            let oracle: f64 = (0..n).map(|i| (0..n).map(|j| c[i] * inv[i][j] * c[j]).sum::<f64>()).sum();
            prop_assert!(((2.0 * s.log_cost).exp() - oracle).abs() <= 1e-8 * oracle);
        }
    }
}
