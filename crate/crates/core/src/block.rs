//! The 3-state reversible building block on states (-1, 0, +1).
//!
//! Every 3-vector and 3x3 matrix here is indexed in the fixed order
//! `[-1, 0, +1]`.

use rand::Rng as _;
use serde::Serialize;
use thiserror::Error;

use crate::rng;
use crate::scalar::{robust_floor, Real};

pub const STATES: [i8; 3] = [-1, 0, 1];

pub type Mat3<T> = [[T; 3]; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlockError {
    #[error("{name} = {value} is outside (0, 1/9]")]
    Range { name: &'static str, value: f64 },
    #[error("n = 0 is not accepted by {0}")]
    ZeroLag(&'static str),
    #[error("n = {0} exceeds the supported bound 10^6")]
    LagTooLarge(u64),
    #[error("inconsistent kernel: {0}")]
    Kernel(String),
}

/// Parameters (epsilon, theta, theta*, I) of one building block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockParams<T> {
    pub epsilon: T,
    pub theta: T,
    pub theta_star: T,
    pub i_cap: u64,
}

/// Transition matrix, stationary marginal and one-step joint law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kernel3<T> {
    pub transition: Mat3<T>,
    pub marginal: [T; 3],
    pub joint: Mat3<T>,
    /// `transition - 1 * marginal`, whose powers give `P^n - 1 * marginal`.
    centered: Mat3<T>,
}

fn in_regime<T: Real>(name: &'static str, x: T) -> Result<(), BlockError> {
    let ninth = T::one() / T::of(9.0);
    let slack = ninth * T::epsilon() * T::of(4.0);
    if x > T::zero() && x <= ninth + slack {
        Ok(())
    } else {
        Err(BlockError::Range { name, value: x.to_f64().unwrap_or(f64::NAN) })
    }
}

impl<T: Real> BlockParams<T> {
    pub fn new(epsilon: T, theta: T) -> Result<Self, BlockError> {
        in_regime("epsilon", epsilon)?;
        in_regime("theta", theta)?;
        let theta_star = theta / (T::one() - epsilon);
        let e = epsilon.to_f64().unwrap();
        let ts = theta.to_f64().unwrap() / (1.0 - e);
        let tol = (T::epsilon().to_f64().unwrap() * 16.0).max(1e-12);
        let i_cap = robust_floor(1.0 / (ts * e), tol) as u64;
        Ok(BlockParams { epsilon, theta, theta_star, i_cap })
    }
}

/// Builds the block with the given epsilon and theta.
pub fn construct_block<T: Real>(epsilon: T, theta: T) -> Result<(BlockParams<T>, Kernel3<T>), BlockError> {
    let params = BlockParams::new(epsilon, theta)?;
    Ok((params, Kernel3::from_params(&params)))
}

impl<T: Real> Kernel3<T> {
    pub fn from_params(b: &BlockParams<T>) -> Self {
        let one = T::one();
        let half = T::of(0.5);
        let (e, th, ts) = (b.epsilon, b.theta, b.theta_star);
        let z = T::zero();
        let side = th * e * half;
        let stay = (one - th) * e * half;
        let joint = [[stay, side, z], [side, one - e - th * e, side], [z, side, stay]];
        let marginal = [e * half, one - e, e * half];
        let transition = [
            [one - th, th, z],
            [ts * e * half, one - ts * e, ts * e * half],
            [z, th, one - th],
        ];
        let away = (one - ts) * e;
        let centered = [
            [one - th - e * half, th - (one - e), -e * half],
            [-away * half, away, -away * half],
            [-e * half, th - (one - e), one - th - e * half],
        ];
        Kernel3 { transition, marginal, joint, centered }
    }

    /// Generic kernel from a transition matrix and its stationary marginal.
    pub fn from_parts(transition: Mat3<T>, marginal: [T; 3]) -> Result<Self, BlockError> {
        let tol = T::of(1e-12);
        for (i, row) in transition.iter().enumerate() {
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(BlockError::Kernel(format!("row {i} sums to {s}")));
            }
        }
        for j in 0..3 {
            let s: T = (0..3).map(|i| marginal[i] * transition[i][j]).sum();
            if (s - marginal[j]).abs() > tol {
                return Err(BlockError::Kernel(format!("marginal not invariant at column {j}")));
            }
        }
        let mut joint = [[T::zero(); 3]; 3];
        let mut centered = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                joint[i][j] = marginal[i] * transition[i][j];
                centered[i][j] = transition[i][j] - marginal[j];
            }
        }
        Ok(Kernel3 { transition, marginal, joint, centered })
    }

    /// `P(X_0 = i, X_n = j) - P(X_0 = i) P(X_0 = j)`.
    pub fn deviation(&self, n: u64) -> Mat3<T> {
        if n == 0 {
            let mut d = [[T::zero(); 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let diag = if i == j { self.marginal[i] } else { T::zero() };
                    d[i][j] = diag - self.marginal[i] * self.marginal[j];
                }
            }
            return d;
        }
        let c = mat_pow(&self.centered, n);
        let mut d = c;
        for (i, row) in d.iter_mut().enumerate() {
            for x in row.iter_mut() {
                *x = *x * self.marginal[i];
            }
        }
        d
    }

    pub fn product(&self) -> Mat3<T> {
        let mut p = [[T::zero(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                p[i][j] = self.marginal[i] * self.marginal[j];
            }
        }
        p
    }
}

pub fn mat_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// `a^n` by repeated squaring.
pub fn mat_pow<T: Real>(a: &Mat3<T>, mut n: u64) -> Mat3<T> {
    let mut result = [[T::zero(); 3]; 3];
    for (i, row) in result.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let mut base = *a;
    while n > 0 {
        if n & 1 == 1 {
            result = mat_mul(&result, &base);
        }
        n >>= 1;
        if n > 0 {
            base = mat_mul(&base, &base);
        }
    }
    result
}

fn check_lag(n: u64) -> Result<(), BlockError> {
    if n > 1_000_000 {
        Err(BlockError::LagTooLarge(n))
    } else {
        Ok(())
    }
}

/// Joint law of `(X_0, X_n)`.
pub fn n_step_joint<T: Real>(kernel: &Kernel3<T>, n: u64) -> Result<Mat3<T>, BlockError> {
    check_lag(n)?;
    if n == 1 {
        return Ok(kernel.joint);
    }
    let dev = kernel.deviation(n);
    let prod = kernel.product();
    let mut out = prod;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = prod[i][j] + dev[i][j];
        }
    }
    Ok(out)
}

/// `E(X_0 X_n)`, which is also the covariance since the mean is zero.
pub fn exact_cov<T: Real>(kernel: &Kernel3<T>, n: u64) -> Result<T, BlockError> {
    check_lag(n)?;
    let d = kernel.deviation(n);
    let mean: T = (0..3).map(|i| T::of(STATES[i] as f64) * kernel.marginal[i]).sum();
    let mut s = mean * mean;
    for i in 0..3 {
        for j in 0..3 {
            s = s + T::of((STATES[i] * STATES[j]) as f64) * d[i][j];
        }
    }
    Ok(s)
}

/// Absolute regularity coefficient between `sigma(X_0)` and `sigma(X_n)`.
pub fn exact_beta<T: Real>(kernel: &Kernel3<T>, n: u64) -> Result<T, BlockError> {
    if n == 0 {
        return Err(BlockError::ZeroLag("exact_beta"));
    }
    check_lag(n)?;
    let d = kernel.deviation(n);
    Ok(T::of(0.5) * d.iter().flatten().map(|x| x.abs()).sum::<T>())
}

/// Strong mixing coefficient, maximized over all 64 event pairs.
pub fn exact_alpha<T: Real>(kernel: &Kernel3<T>, n: u64) -> Result<T, BlockError> {
    if n == 0 {
        return Err(BlockError::ZeroLag("exact_alpha"));
    }
    check_lag(n)?;
    let d = kernel.deviation(n);
    let mut best = T::zero();
    for a in 0u8..8 {
        for b in 0u8..8 {
            let mut s = T::zero();
            for i in 0..3 {
                for j in 0..3 {
                    if a >> i & 1 == 1 && b >> j & 1 == 1 {
                        s = s + d[i][j];
                    }
                }
            }
            best = best.max(s.abs());
        }
    }
    Ok(best)
}

/// `Var(S_n) / epsilon` for a block with parameter `theta`:
/// `n + 2 sum_{m<n} (n-m)(1-theta)^m`. `n` may exceed the integer range of u64.
pub fn variance_factor(n: f64, theta: f64) -> f64 {
    let l = (-theta).ln_1p();
    let x = n * theta;
    let s = if x < 1e-4 {
        n * (n - 1.0) / 2.0 + l * (n * n * n - n) / 6.0 + l * l * n * n * (n * n - 1.0) / 24.0
    } else {
        let r = 1.0 - theta;
        let one_minus_rn = -(n * l).exp_m1();
        r * (x - one_minus_rn) / (theta * theta)
    };
    n + 2.0 * s
}

/// `Var(X_1 + ... + X_n)`.
pub fn partial_sum_variance<T: Real>(block: &BlockParams<T>, n: u64) -> T {
    let e = block.epsilon.to_f64().unwrap();
    let th = block.theta.to_f64().unwrap();
    T::of(e * variance_factor(n as f64, th))
}

/// Stationary path of length `n`; the first state is drawn from the marginal.
pub fn sample_block_path<T: Real>(kernel: &Kernel3<T>, n: usize, seed: u64) -> Vec<i8> {
    let mut rng = rng::stream(seed, 0, 0);
    let cdf = |row: &[T; 3]| {
        let a = row[0].to_f64().unwrap();
        [a, a + row[1].to_f64().unwrap()]
    };
    let start = cdf(&kernel.marginal);
    let rows: Vec<[f64; 2]> = kernel.transition.iter().map(cdf).collect();
    let pick = |c: &[f64; 2], u: f64| -> usize {
        if u < c[0] {
            0
        } else if u < c[1] {
            1
        } else {
            2
        }
    };
    let mut path = Vec::with_capacity(n);
    let mut s = pick(&start, rng.random::<f64>());
    for k in 0..n {
        if k > 0 {
            s = pick(&rows[s], rng.random::<f64>());
        }
        path.push(STATES[s]);
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn k(e: f64, t: f64) -> (BlockParams<f64>, Kernel3<f64>) {
        construct_block(e, t).unwrap()
    }

    #[test]
    fn ninth_ninth_entries() {
        let (b, kern) = k(1.0 / 9.0, 1.0 / 9.0);
        assert_eq!(b.i_cap, 72);
        assert_relative_eq!(b.theta_star, 0.125, epsilon = 1e-15);
        assert_relative_eq!(kern.marginal[0], 1.0 / 18.0, epsilon = 1e-16);
        assert_relative_eq!(kern.marginal[1], 8.0 / 9.0, epsilon = 1e-16);
        assert_relative_eq!(kern.transition[1][1], 71.0 / 72.0, epsilon = 1e-15);
        assert_relative_eq!(kern.joint[1][1], 71.0 / 81.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_out_of_regime() {
        assert!(matches!(construct_block(0.2f64, 0.1), Err(BlockError::Range { name: "epsilon", .. })));
        assert!(matches!(construct_block(0.1f64, 0.0), Err(BlockError::Range { name: "theta", .. })));
    }

    #[test]
    fn small_lag_joints() {
        let (_, kern) = k(1.0 / 9.0, 1.0 / 9.0);
        let j0 = n_step_joint(&kern, 0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { kern.marginal[i] } else { 0.0 };
                assert!((j0[i][j] - want).abs() < 1e-16);
            }
        }
        assert_eq!(n_step_joint(&kern, 1).unwrap(), kern.joint);
        // two-step paths enumerated explicitly
        let j2 = n_step_joint(&kern, 2).unwrap();
        for a in 0..3 {
            for c in 0..3 {
                let brute: f64 = (0..3).map(|b| kern.marginal[a] * kern.transition[a][b] * kern.transition[b][c]).sum();
                assert!((j2[a][c] - brute).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn covariance_examples() {
        let (_, kern) = k(1.0 / 9.0, 1.0 / 9.0);
        assert_relative_eq!(exact_cov(&kern, 0).unwrap(), 1.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(exact_cov(&kern, 1).unwrap(), 8.0 / 81.0, max_relative = 1e-14);
        let (_, kern) = k(1.0 / 27.0, 1.0 / 81.0);
        let j5 = n_step_joint(&kern, 5).unwrap();
        let brute: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| (STATES[i] * STATES[j]) as f64 * j5[i][j]).sum();
        let want = (1.0 / 27.0) * (80.0f64 / 81.0).powi(5);
        assert_relative_eq!(exact_cov(&kern, 5).unwrap(), want, max_relative = 1e-12);
        assert_relative_eq!(brute, want, max_relative = 1e-10);
    }

    #[test]
    fn beta_and_alpha() {
        let (_, kern) = k(1.0 / 9.0, 1.0 / 9.0);
        let b1 = exact_beta(&kern, 1).unwrap();
        assert!(b1 <= 16.0 / 27.0);
        assert!(2.0 * exact_alpha(&kern, 1).unwrap() <= b1 + 1e-15);
        let j3 = n_step_joint(&kern, 3).unwrap();
        let p = kern.product();
        let brute: f64 = 0.5 * (0..9).map(|c| (j3[c / 3][c % 3] - p[c / 3][c % 3]).abs()).sum::<f64>();
        assert_relative_eq!(exact_beta(&kern, 3).unwrap(), brute, max_relative = 1e-10);
        assert_eq!(exact_beta(&kern, 0), Err(BlockError::ZeroLag("exact_beta")));
    }

    #[test]
    fn alpha_of_independent_kernel_is_zero() {
        let m = [0.25, 0.5, 0.25];
        let kern = Kernel3::from_parts([m, m, m], m).unwrap();
        assert!(exact_alpha(&kern, 1).unwrap() < 1e-16);
        assert!(exact_beta(&kern, 4).unwrap() < 1e-16);
    }

    #[test]
    fn alpha_matches_event_enumeration() {
        let (_, kern) = k(1.0 / 9.0, 1.0 / 9.0);
        let j2 = n_step_joint(&kern, 2).unwrap();
        let m = kern.marginal;
        let mut best: f64 = 0.0;
        for a in 0..8u8 {
            for b in 0..8u8 {
                let inside = |s: u8, i: usize| s >> i & 1 == 1;
                let pab: f64 = (0..9).filter(|c| inside(a, c / 3) && inside(b, c % 3)).map(|c| j2[c / 3][c % 3]).sum();
                let pa: f64 = (0..3).filter(|&i| inside(a, i)).map(|i| m[i]).sum();
                let pb: f64 = (0..3).filter(|&i| inside(b, i)).map(|i| m[i]).sum();
                best = best.max((pab - pa * pb).abs());
            }
        }
        assert_relative_eq!(exact_alpha(&kern, 2).unwrap(), best, max_relative = 1e-10);
    }

    #[test]
    fn variance_examples() {
        let (b, kern) = k(1.0 / 9.0, 1.0 / 9.0);
        assert_relative_eq!(partial_sum_variance(&b, 1), 1.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(partial_sum_variance(&b, 2), 34.0 / 81.0, max_relative = 1e-14);
        let by_cov = 2.0 * exact_cov(&kern, 0).unwrap() + 2.0 * exact_cov(&kern, 1).unwrap();
        assert_relative_eq!(partial_sum_variance(&b, 2), by_cov, max_relative = 1e-14);
        let n = 100_000;
        assert!((partial_sum_variance(&b, n) / n as f64 - 17.0 / 9.0).abs() < 1e-3);
    }

    #[test]
    fn variance_factor_matches_direct_sum() {
        for &theta in &[0.1f64, 1e-3, 1e-7, 1e-12] {
            for &n in &[1u64, 2, 7, 50, 3000] {
                let direct = n as f64 + 2.0 * (1..n).map(|m| (n - m) as f64 * (1.0 - theta).powi(m as i32)).sum::<f64>();
                assert_relative_eq!(variance_factor(n as f64, theta), direct, max_relative = 1e-11);
            }
        }
        assert_eq!(variance_factor(1e70, 0.0), 1e140);
    }

    #[test]
    fn generic_f32_kernel() {
        let (b, kern) = construct_block(1.0f32 / 9.0, 1.0f32 / 9.0).unwrap();
        assert_eq!(b.i_cap, 72);
        let c = exact_cov(&kern, 3).unwrap();
        assert!((c - (1.0f32 / 9.0) * (8.0f32 / 9.0).powi(3)).abs() < 1e-6);
    }

    #[test]
    fn sampling_is_deterministic() {
        let (_, kern) = k(1.0 / 9.0, 1.0 / 9.0);
        assert_eq!(sample_block_path(&kern, 500, 3), sample_block_path(&kern, 500, 3));
        assert_ne!(sample_block_path(&kern, 500, 3), sample_block_path(&kern, 500, 4));
    }
}
