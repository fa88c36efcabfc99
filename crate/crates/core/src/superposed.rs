//! Truncated superposition `X_k = sum_{j<=J} h_j X_k^(j)` of independent blocks.
//!
//! The chain state is the tuple of level states; the real value is only an
//! output map ([`SuperChain::encode`]). Levels whose parameters leave the f64
//! range are handled in the log domain: exact variances and mixing bounds use
//! closed forms, and simulation draws geometric sojourn times.

use std::f64::consts::LN_2;

use serde::Serialize;
use thiserror::Error;

use crate::block::{n_step_joint, BlockError, BlockParams, Kernel3, STATES};
use crate::limit::DiscreteDist;
use crate::rng::{self, open_uniform};
use crate::scalar::LogNum;
use crate::schedule::{LevelRecord, LevelSchedule, ScheduleKind};

/// Default cost budget: expected number of simulated sojourns.
pub const DEFAULT_BUDGET: f64 = 1e9;
pub const MAX_EXACT_LEVELS: usize = 6;
pub const MAX_LAW_HORIZON: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuperError {
    #[error("truncation {truncation} outside 1..={available}")]
    Truncation { truncation: usize, available: usize },
    #[error("amplitude ratio h_{next}/h_{j} = {ratio:e} violates the separation required for {kind}")]
    Separation { j: usize, next: usize, ratio: f64, kind: &'static str },
    #[error("config has {got} levels, chain has {want}")]
    Length { got: usize, want: usize },
    #[error("level {0} state must be -1, 0 or 1")]
    State(usize),
    #[error("level {0} has parameters outside the f64 range")]
    Unrepresentable(usize),
    #[error("exact enumeration limited to {MAX_EXACT_LEVELS} levels, got {0}")]
    TooManyLevels(usize),
    #[error("horizon {0} exceeds {MAX_LAW_HORIZON}")]
    Horizon(u64),
    #[error("estimated cost {estimate:e} sojourns exceeds the budget {budget:e}")]
    Budget { estimate: f64, budget: f64 },
    #[error("level {0}: I_j does not fit an integer horizon")]
    Horizonless(usize),
    #[error(transparent)]
    Block(#[from] BlockError),
}

/// States of levels `1..=J` at one time, each in {-1, 0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct LevelConfig {
    pub states: Vec<i8>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuperChain {
    pub schedule: LevelSchedule,
    pub truncation_j: usize,
    /// f64 kernel of each level, when its parameters are representable.
    pub level_kernels: Vec<Option<Kernel3<f64>>>,
    /// Bound on `sum_{j>J} epsilon_j`.
    pub trunc_eps_tail: LogNum,
    /// Bound on `sum_{j>J} h_j^2 epsilon_j`.
    pub trunc_var_tail: LogNum,
}

/// Bounds on the levels beyond the last one stored in the schedule.
fn beyond_schedule(s: &LevelSchedule) -> (LogNum, LogNum) {
    let Some(last) = s.levels.last() else {
        return (LogNum::ZERO, LogNum::ZERO);
    };
    let l = last.j as f64;
    let ninth_pow = LogNum::from_ln(-l * 9f64.ln());
    match s.kind {
        ScheduleKind::Custom => (LogNum::ZERO, LogNum::ZERO),
        // eps_j <= 9^-j and h_j = 3^-j
        ScheduleKind::Variance => (ninth_pow / LogNum::new(8.0), LogNum::from_ln(-l * 81f64.ln()) / LogNum::new(80.0)),
        // eps_j <= 9^-j / I_{j-1} with I nondecreasing
        ScheduleKind::Mixing => (
            ninth_pow / (LogNum::new(8.0) * last.i_cap),
            LogNum::from_ln(-l * 81f64.ln()) / LogNum::new(80.0),
        ),
        // h_j^2 eps_j <= 2^-j
        ScheduleKind::Tail => (ninth_pow / (LogNum::new(8.0) * last.i_cap), LogNum::from_ln(-l * LN_2)),
    }
}

impl SuperChain {
    pub fn new(schedule: LevelSchedule, truncation_j: usize) -> Result<SuperChain, SuperError> {
        let available = schedule.levels.len();
        if truncation_j == 0 || truncation_j > available {
            return Err(SuperError::Truncation { truncation: truncation_j, available });
        }
        let lv = &schedule.levels[..truncation_j];
        let ln3 = 3f64.ln();
        let rising = match schedule.kind {
            ScheduleKind::Tail => Some(true),
            ScheduleKind::Variance | ScheduleKind::Mixing => Some(false),
            ScheduleKind::Custom => lv.get(1).map(|b| b.h > lv[0].h),
        };
        if let Some(up) = rising {
            for w in lv.windows(2) {
                let r = w[1].h.ln() - w[0].h.ln();
                let ok = if up { r >= ln3 * (1.0 - 1e-12) } else { r <= -ln3 * (1.0 - 1e-12) };
                if !ok {
                    return Err(SuperError::Separation {
                        j: w[0].j,
                        next: w[1].j,
                        ratio: r.exp(),
                        kind: if up { "increasing amplitudes (ratio >= 3)" } else { "decreasing amplitudes (ratio <= 1/3)" },
                    });
                }
            }
        }
        let level_kernels = lv.iter().map(|r| r.block().map(|b| Kernel3::from_params(&b))).collect();
        let rest = &schedule.levels[truncation_j..];
        let (eps_beyond, var_beyond) = beyond_schedule(&schedule);
        let trunc_eps_tail = rest.iter().map(|r| r.epsilon).sum::<LogNum>() + eps_beyond;
        let trunc_var_tail = rest.iter().map(|r| r.h * r.h * r.epsilon).sum::<LogNum>() + var_beyond;
        Ok(SuperChain { schedule, truncation_j, level_kernels, trunc_eps_tail, trunc_var_tail })
    }

    /// Chain built from explicit f64 blocks and amplitudes.
    pub fn from_blocks(blocks: &[(f64, f64, f64)]) -> Result<SuperChain, SuperError> {
        for &(e, t, _) in blocks {
            BlockParams::new(e, t)?;
        }
        SuperChain::new(crate::schedule::custom_schedule("explicit blocks", blocks), blocks.len())
    }

    pub fn levels(&self) -> &[LevelRecord] {
        &self.schedule.levels[..self.truncation_j]
    }

    fn amplitudes(&self) -> Result<Vec<f64>, SuperError> {
        self.levels()
            .iter()
            .map(|r| if r.h.fits_f64() { Ok(r.h.value()) } else { Err(SuperError::Unrepresentable(r.j)) })
            .collect()
    }

    fn kernel(&self, i: usize) -> Result<&Kernel3<f64>, SuperError> {
        self.level_kernels[i].as_ref().ok_or(SuperError::Unrepresentable(self.levels()[i].j))
    }

    /// `sum_j h_j s_j`.
    pub fn encode(&self, config: &LevelConfig) -> Result<f64, SuperError> {
        if config.states.len() != self.truncation_j {
            return Err(SuperError::Length { got: config.states.len(), want: self.truncation_j });
        }
        let h = self.amplitudes()?;
        let mut x = 0.0;
        for (i, (&s, hj)) in config.states.iter().zip(&h).enumerate() {
            if !(-1..=1).contains(&s) {
                return Err(SuperError::State(i + 1));
            }
            x += hj * s as f64;
        }
        Ok(x)
    }

    /// `Var(S_n) = sum_j h_j^2 Var(S_n^(j))`, exact; `n` may be astronomically large.
    pub fn super_variance(&self, n: LogNum) -> LogNum {
        self.levels().iter().map(|r| r.h * r.h * block_variance(r.epsilon, r.theta, n)).sum()
    }

    /// `sum_{j<=J} beta_j(n) + 6 sum_{j>J} epsilon_j`, an upper bound on the
    /// beta-mixing coefficient of the untruncated chain.
    pub fn super_beta_bound(&self, n: u64) -> LogNum {
        let exact: LogNum = self.levels().iter().map(|r| block_beta(r.epsilon, r.theta, n)).sum();
        exact + LogNum::new(6.0) * self.trunc_eps_tail
    }

    /// Exact beta coefficient of the truncated chain by enumerating the
    /// `3^J x 3^J` joint law of the level tuple at times 0 and `n`.
    pub fn super_beta_exact_small(&self, n: u64) -> Result<f64, SuperError> {
        let (joints, margs) = self.level_laws(n)?;
        let mut total = 0.0;
        for_each_pair(&joints, &margs, |j, p| total += (j - p).abs());
        Ok(0.5 * total)
    }

    /// Largest `|P(a, b) - P(b, a)|` over the exact joint law of the level
    /// tuples at times 0 and `n`.
    pub fn two_time_asymmetry(&self, n: u64) -> Result<f64, SuperError> {
        let (joints, _) = self.level_laws(n)?;
        let k = joints.len();
        let size = 3usize.pow(k as u32);
        let mut worst = 0.0f64;
        for a in 0..size {
            for b in 0..a {
                let (mut pab, mut pba) = (1.0, 1.0);
                let (mut x, mut y) = (a, b);
                for jl in &joints {
                    let (i, j) = (x % 3, y % 3);
                    pab *= jl[i][j];
                    pba *= jl[j][i];
                    x /= 3;
                    y /= 3;
                }
                worst = worst.max((pab - pba).abs());
            }
        }
        Ok(worst)
    }

    fn level_laws(&self, n: u64) -> Result<(Vec<[[f64; 3]; 3]>, Vec<[f64; 3]>), SuperError> {
        if self.truncation_j > MAX_EXACT_LEVELS {
            return Err(SuperError::TooManyLevels(self.truncation_j));
        }
        let mut joints = Vec::new();
        let mut margs = Vec::new();
        for i in 0..self.truncation_j {
            let k = self.kernel(i)?;
            joints.push(n_step_joint(k, n)?);
            margs.push(k.marginal);
        }
        Ok((joints, margs))
    }

    /// `P(X_0 = 0)` of the truncated chain.
    pub fn prob_zero(&self) -> LogNum {
        self.levels().iter().fold(LogNum::ONE, |p, r| p * r.epsilon.one_minus())
    }

    /// `E(X_0^2) = sum h_j^2 epsilon_j`.
    pub fn second_moment(&self) -> LogNum {
        self.levels().iter().map(|r| r.h * r.h * r.epsilon).sum()
    }

    /// Expected number of sojourns needed to simulate `n_rep` windows of length `n`.
    /// Levels with a zero coefficient are not simulated.
    pub fn sojourn_cost(&self, n: u64, n_rep: usize, coef: &[f64]) -> f64 {
        let n = n as f64;
        let per: f64 = self
            .levels()
            .iter()
            .zip(coef)
            .filter(|(_, c)| **c != 0.0)
            .map(|(r, _)| 1.0 + n * 2.0 * (r.theta * r.epsilon).value())
            .sum();
        per * n_rep as f64
    }

    /// One stationary path `X_0, ..., X_{n-1}` (replicate `rep` of `seed`).
    pub fn sample_super_path(&self, n: usize, seed: u64, rep: u64) -> Result<Vec<f64>, SuperError> {
        let h = self.amplitudes()?;
        let mut path = vec![0.0; n];
        for (i, r) in self.levels().iter().enumerate() {
            let mut g = rng::stream(seed, r.j as u64, rep);
            let mut k = 0usize;
            Sojourns::new(r).walk(&mut g, n as u64, |s, len| {
                for x in &mut path[k..k + len as usize] {
                    *x += h[i] * s as f64;
                }
                k += len as usize;
            });
        }
        Ok(path)
    }

    /// Partial sum `S_n^(j)` of one level in replicate `rep`.
    pub fn level_sum(&self, level: usize, n: u64, seed: u64, rep: u64) -> i64 {
        let r = &self.levels()[level - 1];
        let mut g = rng::stream(seed, r.j as u64, rep);
        let mut s = 0i64;
        Sojourns::new(r).walk(&mut g, n, |st, len| s += st as i64 * len as i64);
        s
    }

    /// `n_rep` replicates of `sum_j c_j S_n^(j)`; replicate `i` uses streams `(seed, j, i)`.
    pub fn weighted_sums(&self, n: u64, coef: &[f64], n_rep: usize, seed: u64, budget: f64) -> Result<Vec<f64>, SuperError> {
        let estimate = self.sojourn_cost(n, n_rep, coef);
        if estimate > budget {
            return Err(SuperError::Budget { estimate, budget });
        }
        Ok(par_map(n_rep, |i| {
            coef.iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(l, c)| c * self.level_sum(l + 1, n, seed, i as u64) as f64)
                .sum()
        }))
    }

    /// Replicates of `S_n / sqrt(n)`.
    pub fn scaled_sums(&self, n: u64, n_rep: usize, seed: u64, budget: f64) -> Result<Vec<f64>, SuperError> {
        let root = (n as f64).sqrt();
        let coef: Vec<f64> = self.amplitudes()?.iter().map(|h| h / root).collect();
        self.weighted_sums(n, &coef, n_rep, seed, budget)
    }

    fn horizon(&self, level_j: usize) -> Result<(u64, LogNum), SuperError> {
        if level_j == 0 || level_j > self.truncation_j {
            return Err(SuperError::Truncation { truncation: level_j, available: self.truncation_j });
        }
        let r = &self.levels()[level_j - 1];
        let n = r.i_exact.ok_or(SuperError::Horizonless(level_j))?;
        Ok((n, r.theta / r.h))
    }

    /// Replicates of `(theta_j / h_j) sum_{k=1}^{I_j} X_k`.
    pub fn normalized_sum_samples(&self, level_j: usize, n_rep: usize, seed: u64, budget: f64) -> Result<Vec<f64>, SuperError> {
        let (n, scale) = self.horizon(level_j)?;
        let coef: Vec<f64> = self.levels().iter().map(|l| (scale * l.h).value()).collect();
        self.weighted_sums(n, &coef, n_rep, seed, budget)
    }

    /// The level-`j` part `theta_j sum_{k=1}^{I_j} X_k^(j)` of the normalized sum,
    /// on the same random streams as [`SuperChain::normalized_sum_samples`].
    pub fn level_normalized_sums(&self, level_j: usize, n_rep: usize, seed: u64, budget: f64) -> Result<Vec<f64>, SuperError> {
        let (n, _) = self.horizon(level_j)?;
        let mut coef = vec![0.0; self.truncation_j];
        coef[level_j - 1] = self.levels()[level_j - 1].theta.value();
        self.weighted_sums(n, &coef, n_rep, seed, budget)
    }

    /// Size of the other levels' part of the normalized level-`j` sum: the
    /// standard deviation from levels below `j`, and a bound on the probability
    /// that any level above `j` leaves 0 within the window.
    pub fn normalized_contamination(&self, level_j: usize) -> Result<(LogNum, LogNum), SuperError> {
        let (n, scale) = self.horizon(level_j)?;
        let nl = LogNum::new(n as f64);
        let lower: LogNum = self.levels()[..level_j - 1]
            .iter()
            .map(|l| scale * scale * l.h * l.h * block_variance(l.epsilon, l.theta, nl))
            .sum();
        let upper: LogNum = self.levels()[level_j..]
            .iter()
            .map(|l| l.epsilon + nl * l.theta_star * l.epsilon)
            .sum::<LogNum>()
            + self.trunc_eps_tail * (LogNum::ONE + nl);
        Ok((lower.sqrt(), upper.min(LogNum::ONE)))
    }
}

fn for_each_pair(joints: &[[[f64; 3]; 3]], margs: &[[f64; 3]], mut f: impl FnMut(f64, f64)) {
    let k = joints.len();
    let size = 3usize.pow(k as u32);
    for a in 0..size {
        for b in 0..size {
            let (mut pj, mut pp) = (1.0, 1.0);
            let (mut x, mut y) = (a, b);
            for l in 0..k {
                let (i, j) = (x % 3, y % 3);
                pj *= joints[l][i][j];
                pp *= margs[l][i] * margs[l][j];
                x /= 3;
                y /= 3;
            }
            f(pj, pp);
        }
    }
}

/// Deterministic parallel map over `0..n`.
pub fn par_map<T: Send, F: Fn(usize) -> T + Sync>(n: usize, f: F) -> Vec<T> {
    let threads = std::thread::available_parallelism().map_or(1, |t| t.get()).min(n.max(1));
    if threads <= 1 || n < 64 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(threads);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| s.spawn(move || (t * chunk..((t + 1) * chunk).min(n)).map(f).collect::<Vec<T>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// `-ln(1 - p)` for `p` in (0, 1).
fn neg_ln_one_minus(p: LogNum) -> LogNum {
    if p.ln() > -18.0 {
        LogNum::new(-(-p.value()).ln_1p())
    } else {
        p
    }
}

/// Geometric sojourn sampler of one block.
struct Sojourns {
    ln_eps: f64,
    leave_side: LogNum,
    leave_zero: LogNum,
}

impl Sojourns {
    fn new(r: &LevelRecord) -> Sojourns {
        Sojourns {
            ln_eps: r.epsilon.ln(),
            leave_side: neg_ln_one_minus(r.theta),
            leave_zero: neg_ln_one_minus(r.theta_star * r.epsilon),
        }
    }

    /// Holding time `T >= 1` with `P(T > m) = e^{-m rate}`, capped at `cap`.
    fn hold<R: rand::Rng>(g: &mut R, rate: LogNum, cap: u64) -> u64 {
        let e = -open_uniform(g).ln();
        let ln_q = e.ln() - rate.ln();
        if ln_q >= (cap as f64).ln() {
            return cap;
        }
        (1 + ln_q.exp().floor() as u64).min(cap)
    }

    /// Calls `f(state, length)` for consecutive sojourns covering `n` steps
    /// of a stationary path.
    fn walk<R: rand::Rng>(&self, g: &mut R, n: u64, mut f: impl FnMut(i8, u64)) {
        let u = open_uniform(g);
        let mut s: i8 = if u.ln() < self.ln_eps { if g.random::<bool>() { 1 } else { -1 } } else { 0 };
        let mut left = n;
        while left > 0 {
            let rate = if s == 0 { self.leave_zero } else { self.leave_side };
            let len = Self::hold(g, rate, left);
            f(s, len);
            left -= len;
            s = if s != 0 {
                0
            } else if g.random::<bool>() {
                1
            } else {
                -1
            };
        }
    }
}

/// Exact `Var(X_1 + ... + X_n)` of one block, for any representable `n`.
pub fn block_variance(eps: LogNum, theta: LogNum, n: LogNum) -> LogNum {
    let nf = n.value();
    if nf <= 1e15 && theta.value() >= 1e-300 {
        return eps * LogNum::new(crate::block::variance_factor(nf.round(), theta.value()));
    }
    let ln_x = n.ln() + theta.ln();
    if theta.value() < 1e-8 {
        // factor / n^2 = 1/n + 2 (1 - theta) (x - 1 + e^{-x}) / x^2, x = n theta
        let x = ln_x.exp();
        let g = if x < 1e-3 {
            0.5 - x / 6.0 + x * x / 24.0
        } else if x.is_finite() {
            (x - 1.0 + (-x).exp()) / (x * x)
        } else {
            0.0
        };
        let body = if g > 0.0 { LogNum::new(2.0 * g) * theta.one_minus() } else { LogNum::from_ln(LN_2 - ln_x) };
        let per = n.recip() + body;
        return eps * n * n * per;
    }
    // n theta huge: factor = n (2/theta - 1) - 2 (1 - theta)(1 - (1-theta)^n) / theta^2
    let th = theta.value();
    let lead = 2.0 / th - 1.0 - 2.0 * (1.0 - th) / (th * th) / nf;
    eps * n * LogNum::new(lead)
}

/// Exact `beta(n)` of one block:
/// `(3/2) eps (1 - eps) (1 - theta - theta* eps)^n + (eps/2) (1 - theta)^n`.
pub fn block_beta(eps: LogNum, theta: LogNum, n: u64) -> LogNum {
    let theta_star = theta / eps.one_minus();
    let lam = theta + theta_star * eps;
    let nf = n as f64;
    let decay = |p: LogNum| LogNum::from_ln(-nf * neg_ln_one_minus(p).value());
    LogNum::new(1.5) * eps * eps.one_minus() * decay(lam) + LogNum::new(0.5) * eps * decay(theta)
}

/// Exact law of `X_1 + ... + X_n` for a stationary block, by forward dynamic
/// programming over (state, running sum).
pub fn block_sum_law(kernel: &Kernel3<f64>, n: u64) -> Result<DiscreteDist<f64>, SuperError> {
    if n == 0 {
        return Err(BlockError::ZeroLag("block_sum_law").into());
    }
    if n > MAX_LAW_HORIZON {
        return Err(SuperError::Horizon(n));
    }
    let n = n as usize;
    let width = 2 * n + 1;
    let mut cur = vec![vec![0.0f64; width]; 3];
    for s in 0..3 {
        cur[s][(n as i64 + STATES[s] as i64) as usize] = kernel.marginal[s];
    }
    let mut next = vec![vec![0.0f64; width]; 3];
    for k in 1..n {
        let (lo, hi) = (n - k, n + k);
        for row in next.iter_mut() {
            row[lo - 1..=hi + 1].iter_mut().for_each(|x| *x = 0.0);
        }
        for s in 0..3 {
            for t in 0..3 {
                let p = kernel.transition[s][t];
                if p == 0.0 {
                    continue;
                }
                let shift = STATES[t] as i64;
                let src = &cur[s];
                let dst = &mut next[t];
                for idx in lo..=hi {
                    let v = src[idx];
                    if v != 0.0 {
                        dst[(idx as i64 + shift) as usize] += v * p;
                    }
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let mut support = Vec::new();
    let mut probs = Vec::new();
    for idx in 0..width {
        let p: f64 = (0..3).map(|s| cur[s][idx]).sum();
        if p > 0.0 {
            support.push(idx as f64 - n as f64);
            probs.push(p);
        }
    }
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(DiscreteDist::new(support, probs, 0.0).expect("normalized law"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::{construct_block, exact_beta, partial_sum_variance};

    fn two_level() -> SuperChain {
        SuperChain::from_blocks(&[(1.0 / 9.0, 1.0 / 9.0, 1.0 / 3.0), (1.0 / 27.0, 1.0 / 27.0, 1.0 / 9.0)]).unwrap()
    }

    #[test]
    fn encode_examples() {
        let c = two_level();
        assert_eq!(c.encode(&LevelConfig { states: vec![0, 0] }).unwrap(), 0.0);
        let v = c.encode(&LevelConfig { states: vec![1, -1] }).unwrap();
        assert!((v - 2.0 / 9.0).abs() < 1e-16);
        assert!(c.encode(&LevelConfig { states: vec![1] }).is_err());
    }

    #[test]
    fn closed_form_beta_matches_matrices() {
        for &(e, t) in &[(1.0 / 9.0, 1.0 / 9.0), (1.0 / 81.0, 1.0 / 27.0), (1.0 / 243.0, 1.0 / 9.0)] {
            let (_, k) = construct_block(e, t).unwrap();
            for n in [1u64, 2, 7, 50, 200] {
                let a = exact_beta(&k, n).unwrap();
                let b = block_beta(LogNum::new(e), LogNum::new(t), n).value();
                assert!((a - b).abs() <= 1e-12 * a.max(1e-300), "{e} {t} {n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn log_variance_matches_direct() {
        let (b, _) = construct_block(1.0 / 9.0, 1.0 / 27.0).unwrap();
        for n in [1u64, 10, 1000, 100_000] {
            let d = partial_sum_variance(&b, n);
            let l = block_variance(LogNum::new(b.epsilon), LogNum::new(b.theta), LogNum::new(n as f64)).value();
            assert!((d - l).abs() < 1e-12 * d);
        }
        // tiny theta: Var ~ eps n^2
        let v = block_variance(LogNum::new(0.1), LogNum::from_ln(-5000.0), LogNum::from_ln(160.0));
        assert!((v.ln() - (0.1f64.ln() + 320.0)).abs() < 1e-12);
        // moderate theta, huge n: Var ~ eps n (2/theta - 1)
        let v = block_variance(LogNum::new(0.1), LogNum::new(0.01), LogNum::from_ln(100.0));
        assert!((v.ln() - (0.1f64.ln() + 100.0 + 199f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn sum_law_small_cases() {
        let (_, k) = construct_block(1.0 / 9.0, 1.0 / 9.0).unwrap();
        let d1 = block_sum_law(&k, 1).unwrap();
        assert_eq!(d1.support, vec![-1.0, 0.0, 1.0]);
        assert!((d1.probs[0] - 1.0 / 18.0).abs() < 1e-16);
        let d2 = block_sum_law(&k, 2).unwrap();
        assert!((d2.mass_at(2.0) - 4.0 / 81.0).abs() < 1e-16);
        let (b, k) = construct_block(1.0 / 27.0, 1.0 / 9.0).unwrap();
        let d = block_sum_law(&k, 20).unwrap();
        assert!(d.mean().abs() < 1e-12);
        assert!((d.variance() - partial_sum_variance(&b, 20)).abs() < 1e-10);
        assert!(block_sum_law(&k, MAX_LAW_HORIZON + 1).is_err());
    }

    #[test]
    fn exact_beta_small_bounded_by_sum() {
        let c = two_level();
        let exact = c.super_beta_exact_small(3).unwrap();
        let bound = c.super_beta_bound(3).value();
        assert!(exact <= bound + 1e-15 && exact > 0.0);
        let one = SuperChain::from_blocks(&[(1.0 / 9.0, 1.0 / 9.0, 1.0)]).unwrap();
        let (_, k) = construct_block(1.0 / 9.0, 1.0 / 9.0).unwrap();
        assert!((one.super_beta_exact_small(5).unwrap() - exact_beta(&k, 5).unwrap()).abs() < 1e-15);
        assert!(c.super_beta_exact_small(1000).unwrap() < 1e-6);
    }

    #[test]
    fn paths_are_seeded() {
        let c = two_level();
        let a = c.sample_super_path(500, 3, 0).unwrap();
        assert_eq!(a, c.sample_super_path(500, 3, 0).unwrap());
        assert_ne!(a, c.sample_super_path(500, 4, 0).unwrap());
        let allowed = [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0].map(|k: f64| k / 9.0);
        assert!(a.iter().all(|x| allowed.iter().any(|y| (x - y).abs() < 1e-12)));
    }

    #[test]
    fn sojourn_steps_match_transition_rates() {
        let c = SuperChain::from_blocks(&[(1.0 / 9.0, 1.0 / 9.0, 1.0)]).unwrap();
        let path = c.sample_super_path(400_000, 11, 0).unwrap();
        let (mut stay_side, mut side) = (0usize, 0usize);
        for w in path.windows(2) {
            if w[0] != 0.0 {
                side += 1;
                stay_side += (w[1] == w[0]) as usize;
            }
        }
        let p = stay_side as f64 / side as f64;
        assert!((p - 8.0 / 9.0).abs() < 0.01, "{p}");
        let zero = path.iter().filter(|x| **x == 0.0).count() as f64 / path.len() as f64;
        assert!((zero - 8.0 / 9.0).abs() < 0.01, "{zero}");
    }

    #[test]
    fn reversible_two_time_law() {
        let c = two_level();
        assert!(c.two_time_asymmetry(1).unwrap() < 1e-15);
    }

    #[test]
    fn budget_is_enforced() {
        let c = two_level();
        let err = c.weighted_sums(1000, &[1.0, 1.0], 10, 1, 10.0).unwrap_err();
        assert!(matches!(err, SuperError::Budget { .. }));
    }
}
