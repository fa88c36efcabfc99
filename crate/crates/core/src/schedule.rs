//! Per-level parameter schedules `(epsilon_j, theta_j, h_j)` for superposed
//! chains, built by three recursions:
//!
//! * [`variance_schedule`]: partial-sum variance eventually exceeds `q_n n^2`
//!   for a given `q_n -> 0` (bounded values, `h_j = 3^-j`);
//! * [`mixing_schedule`]: beta-mixing coefficients at most `g_n / n` for a given
//!   `g_n -> inf` (bounded values, `h_j = 3^-j`);
//! * [`tail_schedule`]: beta-mixing at most `f(n)` with a matching quantile
//!   tail bound (unbounded values, `h_j` increasing).
//!
//! Quantities routinely leave the f64 range (thresholds like `e^189`), so every
//! record field is a [`LogNum`].

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block::BlockParams;
use crate::rates::{ConvexRate, NegSlope, PowerRate, RateFn};
use crate::report::{worst_at_most, Check};
use crate::scalar::{robust_floor, LogNum};
use crate::tangent::{build_h, find_t_ln, find_t_star_ln, search_up, tangent_at_ln, TangentError, DEFAULT_LN_CAP};

fn ln3() -> f64 {
    3f64.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// Variance faster than `q_n n^2`, bounded values.
    Variance,
    /// beta-mixing rate `g_n / n`, bounded values.
    Mixing,
    /// beta-mixing rate `f(n)` with a quantile tail bound, unbounded values.
    Tail,
    /// Hand-picked levels.
    Custom,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleKind::Variance => "variance",
            ScheduleKind::Mixing => "mixing",
            ScheduleKind::Tail => "tail",
            ScheduleKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "variance" => Ok(ScheduleKind::Variance),
            "mixing" => Ok(ScheduleKind::Mixing),
            "tail" => Ok(ScheduleKind::Tail),
            "custom" => Ok(ScheduleKind::Custom),
            _ => Err(format!("unknown schedule kind {s:?} (variance, mixing, tail, custom)")),
        }
    }
}

/// One level. `ln_*` fields are natural logarithms on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub j: usize,
    #[serde(rename = "ln_epsilon")]
    pub epsilon: LogNum,
    #[serde(rename = "ln_theta")]
    pub theta: LogNum,
    #[serde(rename = "ln_theta_star")]
    pub theta_star: LogNum,
    #[serde(rename = "ln_i_cap")]
    pub i_cap: LogNum,
    /// `I_j` as an integer when below 2^52.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_exact: Option<u64>,
    #[serde(rename = "ln_h")]
    pub h: LogNum,
    #[serde(default, rename = "ln_b", skip_serializing_if = "Option::is_none")]
    pub b: Option<LogNum>,
    #[serde(default, rename = "ln_t", skip_serializing_if = "Option::is_none")]
    pub t: Option<LogNum>,
    #[serde(default, rename = "ln_m", skip_serializing_if = "Option::is_none")]
    pub m: Option<LogNum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_exact: Option<u64>,
    #[serde(default, rename = "ln_eps_star", skip_serializing_if = "Option::is_none")]
    pub eps_star: Option<LogNum>,
    /// Tangent intercept at `t_j` used to define `epsilon_j`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
}

impl LevelRecord {
    pub fn new(j: usize, epsilon: LogNum, theta: LogNum, h: LogNum) -> LevelRecord {
        let theta_star = theta / epsilon.one_minus();
        let inv = (theta_star * epsilon).recip();
        let (i_cap, i_exact) = if inv.ln() < 52.0 * LN_2 {
            let i = match BlockParams::new(epsilon.value(), theta.value()) {
                Ok(b) if epsilon.fits_f64() && theta.fits_f64() => b.i_cap as f64,
                _ => robust_floor(inv.value(), 1e-12),
            };
            (LogNum::new(i), Some(i as u64))
        } else {
            (inv, None)
        };
        LevelRecord {
            j,
            epsilon,
            theta,
            theta_star,
            i_cap,
            i_exact,
            h,
            b: None,
            t: None,
            m: None,
            m_exact: None,
            eps_star: None,
            intercept: None,
        }
    }

    /// Whether the block can be simulated with f64 probabilities.
    pub fn fits_f64(&self) -> bool {
        self.epsilon.fits_f64() && self.theta.fits_f64() && self.h.fits_f64()
    }

    pub fn block(&self) -> Option<BlockParams<f64>> {
        if !self.epsilon.fits_f64() || !self.theta.fits_f64() {
            return None;
        }
        BlockParams::new(self.epsilon.value(), self.theta.value()).ok()
    }

    /// `h^2 epsilon / theta`.
    pub fn weight_ratio(&self) -> LogNum {
        self.h * self.h * self.epsilon / self.theta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub kind: ScheduleKind,
    pub inputs: String,
    /// Point from which `x f(x)` is nonincreasing (tail kind).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
    #[serde(default, rename = "ln_delta", skip_serializing_if = "Option::is_none")]
    pub delta: Option<LogNum>,
    /// `M_{J+1}` (variance kind), needed by the last level's constraint.
    #[serde(default, rename = "ln_m_after_last", skip_serializing_if = "Option::is_none")]
    pub m_after_last: Option<LogNum>,
    /// Level 0 (`epsilon = theta = 1/9`, `I = h = 1`) seeding the recursion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<LevelRecord>,
    #[serde(default, rename = "level")]
    pub levels: Vec<LevelRecord>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("hypothesis {name} fails: {detail}")]
    Hypothesis { name: &'static str, detail: String },
    #[error("level {level}: {reason}")]
    Level { level: usize, reason: String, partial: Box<LevelSchedule> },
    #[error("schedule text: {0}")]
    Parse(String),
}

impl ScheduleError {
    /// Levels completed before a level failure.
    pub fn partial(&self) -> Option<&LevelSchedule> {
        match self {
            ScheduleError::Level { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

fn level_error(level: usize, reason: impl std::fmt::Display, partial: &LevelSchedule) -> ScheduleError {
    ScheduleError::Level { level, reason: reason.to_string(), partial: Box::new(partial.clone()) }
}

/// `ceil` that ignores rounding noise just above an integer.
fn ceil_tol(x: f64) -> f64 {
    (x - 4.0 * f64::EPSILON * x.abs().max(1.0)).ceil()
}

fn seed_level() -> LevelRecord {
    let mut r = LevelRecord::new(0, LogNum::new(1.0 / 9.0), LogNum::new(1.0 / 9.0), LogNum::ONE);
    r.i_cap = LogNum::ONE;
    r.i_exact = Some(1);
    r
}

/// Smallest `n` with `q_m <= c` for all `m >= n`, for nonincreasing `q`.
fn first_index_below(q: &dyn RateFn, ln_c: f64) -> Result<(LogNum, Option<u64>), TangentError> {
    let below = |v: f64| -> Result<bool, TangentError> {
        let lq = q.ln_value_at_ln(v);
        if lq.is_nan() {
            return Err(TangentError::NonFinite { what: "q".into(), ln_x: v });
        }
        Ok(lq <= ln_c)
    };
    let v = if below(0.0)? { 0.0 } else { search_up(0.0, LN_2, DEFAULT_LN_CAP, "q_n below threshold", below)? };
    for i in 0..40 {
        let w = v + LN_2 * (1u64 << i) as f64;
        if w > DEFAULT_LN_CAP {
            break;
        }
        if !below(w)? {
            return Err(TangentError::Verification { what: "q_n rises above the threshold again".into(), ln_x: w });
        }
    }
    if v < 36.0 {
        let mut n = v.exp().ceil().max(1.0) as u64;
        while n > 1 && q.value((n - 1) as f64).ln() <= ln_c {
            n -= 1;
        }
        while q.value(n as f64).ln() > ln_c {
            n += 1;
        }
        Ok((LogNum::new(n as f64), Some(n)))
    } else {
        Ok((LogNum::from_ln(v), None))
    }
}

/// Schedule for which the partial-sum variance eventually exceeds `q_n n^2`.
///
/// `h_j = 3^-j`; `epsilon_j`, `theta_j` are the largest powers of 1/3 meeting
/// every constraint; `M_j` is the first index from which `q_n <= h_j^2 eps_j / 2`.
pub fn variance_schedule(q: &dyn RateFn, j_max: usize) -> Result<LevelSchedule, ScheduleError> {
    if j_max == 0 {
        return Err(ScheduleError::Input("j_max must be positive".into()));
    }
    let l3 = ln3();
    let mut sched = LevelSchedule {
        kind: ScheduleKind::Variance,
        inputs: q.describe(),
        w: None,
        delta: None,
        m_after_last: None,
        seed: None,
        levels: Vec::new(),
    };

    // eps_j = 3^-k_j
    let mut k: Vec<f64> = Vec::with_capacity(j_max + 1);
    for j in 1..=j_max + 1 {
        let jf = j as f64;
        let mut kj = (2.0 * jf).max(k.last().copied().unwrap_or(0.0));
        for (l0, &kl) in k.iter().enumerate() {
            let l = (l0 + 1) as f64;
            kj = kj.max(ceil_tol(2.0 * l + 2.0 * kl - 2.0 * jf + jf * LN_2 / l3));
        }
        k.push(kj);
    }

    let mut ms: Vec<(LogNum, Option<u64>)> = Vec::with_capacity(j_max + 1);
    for j in 1..=j_max + 1 {
        let ln_c = -(2.0 * j as f64 + k[j - 1]) * l3 - LN_2;
        let (mut m, mut exact) = first_index_below(q, ln_c).map_err(|e| level_error(j, e, &sched))?;
        if let Some(&(prev, prev_exact)) = ms.last() {
            match (exact, prev_exact) {
                (Some(n), Some(p)) if n <= p => {
                    exact = Some(p + 1);
                    m = LogNum::new((p + 1) as f64);
                }
                (None, _) if m <= prev => {
                    return Err(level_error(j, "M_j not increasing beyond f64 resolution", &sched));
                }
                _ => {}
            }
        }
        ms.push((m, exact));
    }

    // theta_j = 3^-m_j; ratio_sum = sum_{u<j} h_u^2 eps_u / theta_u
    let mut ratio_sum = LogNum::ZERO;
    let mut prev_m = 0.0f64;
    for j in 1..=j_max {
        let jf = j as f64;
        let kj = k[j - 1];
        let mut mj = (2.0 * jf).max(prev_m);
        mj = mj.max(ceil_tol((ms[j].0.ln() + LN_2) / l3));
        if j >= 2 {
            let need = 2.0 * jf + kj + (jf.ln() + (LogNum::ONE + ratio_sum).ln()) / l3;
            mj = mj.max(ceil_tol(need));
        }
        prev_m = mj;
        let mut rec = LevelRecord::new(j, LogNum::from_ln(-kj * l3), LogNum::from_ln(-mj * l3), LogNum::from_ln(-jf * l3));
        rec.m = Some(ms[j - 1].0);
        rec.m_exact = ms[j - 1].1;
        ratio_sum = ratio_sum + rec.weight_ratio();
        sched.levels.push(rec);
    }
    sched.m_after_last = Some(ms[j_max].0);
    Ok(sched)
}

/// `psi(x)`: affine interpolation of `ln g_n` between consecutive integers.
pub struct LogInterpolant<'a>(pub &'a dyn RateFn);

impl RateFn for LogInterpolant<'_> {
    fn value(&self, x: f64) -> f64 {
        if x >= 4503599627370496.0 {
            return self.0.ln_value_at_ln(x.ln());
        }
        let n = x.floor().max(1.0);
        let a = self.0.value(n).ln();
        let b = self.0.value(n + 1.0).ln();
        a + (x - n) * (b - a)
    }
    fn value_at_ln(&self, u: f64) -> f64 {
        if u < 36.0 {
            self.value(u.exp())
        } else {
            self.0.ln_value_at_ln(u)
        }
    }
    fn describe(&self) -> String {
        format!("affine interpolant of ln [{}]", self.0.describe())
    }
}

/// Schedule whose chain has `beta(n) <= g_n / n`, `g_n >= 1`, `g_n -> inf`.
pub fn mixing_schedule(g: &dyn RateFn, j_max: usize) -> Result<LevelSchedule, ScheduleError> {
    if j_max == 0 {
        return Err(ScheduleError::Input("j_max must be positive".into()));
    }
    if !(g.value(1.0) >= 1.0) {
        return Err(ScheduleError::Input("g_n must be at least 1".into()));
    }
    let l3 = ln3();
    let phi = PowerRate { p: 1.0 };
    let psi = LogInterpolant(g);
    let seed = seed_level();
    let mut sched = LevelSchedule {
        kind: ScheduleKind::Mixing,
        inputs: g.describe(),
        w: None,
        delta: None,
        m_after_last: None,
        seed: Some(seed.clone()),
        levels: Vec::new(),
    };
    // sum_{u<j} h_u^2 eps_u / theta_u, including level 0
    let mut ratio_sum = seed.weight_ratio();
    let mut prev = seed;
    for j in 1..=j_max {
        let jf = j as f64;
        let b = (jf + 2.0) + jf.ln() + 2.0 * jf * l3 + ratio_sum.ln();
        let d = (-2.0 * jf * l3 - prev.i_cap.ln()).min(prev.epsilon.ln() - LN_2);
        let ln_s = (-2.0 * jf * l3).min(prev.theta.ln() - LN_2);
        let ts = find_t_star_ln(&phi, &psi, b, d, ln_s).map_err(|e| level_error(j, e, &sched))?;
        let intercept = ts.tangent.intercept;
        let eps = LogNum::from_ln(intercept + b - (jf + 2.0));
        let theta = ts.y.recip();
        let mut rec = LevelRecord::new(j, eps, theta, LogNum::from_ln(-jf * l3));
        rec.b = Some(LogNum::from_ln(b.ln()));
        rec.t = Some(ts.y);
        rec.intercept = Some(intercept);
        ratio_sum = ratio_sum + rec.weight_ratio();
        prev = rec.clone();
        sched.levels.push(rec);
    }
    Ok(sched)
}

/// Point `w` (a power of two) from which `1 + x phi'(x) <= 0`, i.e. `x f(x)`
/// is nonincreasing, checked on a doubling grid up to `2^40` past it.
pub fn find_w(phi: &dyn ConvexRate) -> Result<f64, ScheduleError> {
    let ok = |u: f64| phi.ln_elasticity_at_ln(u) >= 0.0;
    let start = (1..=60).find(|&e| (e..e + 41).all(|k| ok(k as f64 * LN_2)));
    match start {
        Some(e) => Ok(2f64.powi(e)),
        None => Err(ScheduleError::Hypothesis {
            name: "x f(x) eventually nonincreasing",
            detail: "no power of two up to 2^60 works".into(),
        }),
    }
}

/// Grid checks of the hypotheses on `f = exp(phi)`: values in (0, 1],
/// strictly decreasing to 0, smooth, slower than any exponential, `x f(x)`
/// eventually nonincreasing, `log f` convex. Returns `w`.
pub fn check_tail_hypotheses(phi: &dyn ConvexRate) -> Result<f64, ScheduleError> {
    let grid: Vec<f64> = (0..=400).map(|k| 1.0 + (k as f64 / 10.0).exp2() - 1.0 + k as f64 * 0.0).collect();
    for &x in &grid {
        let v = phi.value(x);
        if !(v <= 1e-12) || !v.is_finite() {
            return Err(ScheduleError::Hypothesis { name: "0 < f <= 1", detail: format!("log f({x}) = {v}") });
        }
    }
    for w in grid.windows(2) {
        if !(phi.value(w[1]) < phi.value(w[0])) {
            return Err(ScheduleError::Hypothesis { name: "f strictly decreasing", detail: format!("at x = {}", w[1]) });
        }
    }
    if !(phi.value_at_ln(40.0 * LN_2) < phi.value(1.0) - 5.0) {
        return Err(ScheduleError::Hypothesis { name: "f tends to 0", detail: "log f(2^40) barely below log f(1)".into() });
    }
    for &x in grid.iter().skip(1) {
        let hstep = 1e-5 * x;
        let fd = (phi.value(x + hstep) - phi.value(x - hstep)) / (2.0 * hstep);
        let d = phi.derivative(x);
        if !(d < 0.0) || (fd - d).abs() > 1e-4 * d.abs().max(1e-8) + 1e-9 {
            return Err(ScheduleError::Hypothesis {
                name: "f smooth with matching derivative",
                detail: format!("at x = {x}: derivative {d}, difference quotient {fd}"),
            });
        }
    }
    let ratios: Vec<f64> = (10..=40).map(|e| -phi.value_at_ln(e as f64 * LN_2) / 2f64.powi(e)).collect();
    if !(ratios.last().copied().unwrap_or(1.0) < 1e-3) || ratios.windows(2).skip(5).any(|r| r[1] > r[0] * (1.0 + 1e-9)) {
        return Err(ScheduleError::Hypothesis {
            name: "f slower than any exponential",
            detail: format!("-log f(x)/x along 2^10..2^40 = {ratios:?}"),
        });
    }
    for w in grid.windows(2) {
        if phi.derivative(w[1]) < phi.derivative(w[0]) - 1e-12 * phi.derivative(w[0]).abs() {
            return Err(ScheduleError::Hypothesis { name: "log f convex", detail: format!("slope decreases at x = {}", w[1]) });
        }
    }
    for k in 1..400 {
        let (a, b, c) = ((k - 1) as f64 * 0.25 + 1.0, k as f64 * 0.25 + 1.0, (k + 1) as f64 * 0.25 + 1.0);
        let second = phi.value(a) - 2.0 * phi.value(b) + phi.value(c);
        if second < -1e-12 * phi.value(b).abs().max(1.0) {
            return Err(ScheduleError::Hypothesis { name: "log f convex", detail: format!("second difference < 0 at x = {b}") });
        }
    }
    find_w(phi)
}

/// Whether `g(x) * (-phi'(x))` is already nonincreasing on a geometric grid.
fn product_nonincreasing(phi: &dyn ConvexRate, g: &dyn RateFn) -> bool {
    let mut prev = f64::INFINITY;
    for k in 0..=2000 {
        let u = 200.0 * k as f64 / 2000.0;
        let p = g.ln_value_at_ln(u) + phi.ln_neg_slope_at_ln(u);
        if p > prev + 1e-12 * prev.abs().max(1.0) {
            return false;
        }
        prev = p;
    }
    true
}

/// Schedule whose chain has `beta(n) <= f(n)` and quantile tail integral at
/// most `g(x) (-f'(x)/f(x))`, with `phi = log f`.
pub fn tail_schedule(phi: &dyn ConvexRate, g: &dyn RateFn, j_max: usize) -> Result<LevelSchedule, ScheduleError> {
    if j_max == 0 {
        return Err(ScheduleError::Input("j_max must be positive".into()));
    }
    if !(g.value(1.0) >= 1.0) {
        return Err(ScheduleError::Input("g must be at least 1".into()));
    }
    let w = check_tail_hypotheses(phi)?;
    let lw = w.ln();
    let ln_delta = tangent_at_ln(phi, lw).map_err(|e| ScheduleError::Input(e.to_string()))?.intercept
        - phi.ln_neg_slope_at_ln(lw);
    let delta = LogNum::from_ln(ln_delta);

    let neg_slope = NegSlope(phi);
    let use_g_directly = product_nonincreasing(phi, g);
    let mut h_rate = if use_g_directly {
        None
    } else {
        Some(build_h(&neg_slope, g).map_err(|e| ScheduleError::Input(format!("multiplier build: {e}")))?)
    };

    let seed = seed_level();
    let mut sched = LevelSchedule {
        kind: ScheduleKind::Tail,
        inputs: format!(
            "{} ; {}{}",
            phi.describe(),
            g.describe(),
            if use_g_directly { "" } else { " (replaced by slower multiplier)" }
        ),
        w: Some(w),
        delta: Some(delta),
        m_after_last: None,
        seed: Some(seed.clone()),
        levels: Vec::new(),
    };
    let l3 = ln3();
    let mut ratio_sum = seed.weight_ratio();
    let mut prev = seed;
    for j in 1..=j_max {
        let jf = j as f64;
        let b = LogNum::new(9.0) * prev.h * prev.h * delta;
        let b = b.max(LogNum::new(jf) * ratio_sum);
        let cap = (prev.epsilon.ln() - l3).min(-2.0 * jf * l3 - prev.i_cap.ln()).min(-2.0 * l3);
        let eps_star = LogNum::from_ln(-ceil_tol(-cap / l3) * l3);
        let ln_s = (-(9f64.ln())).min(prev.theta.ln() - LN_2).min(-jf * LN_2 - b.ln());
        let t_a = find_t_ln(phi, eps_star.ln(), ln_s).map_err(|e| level_error(j, e, &sched))?;
        let ln_k = (jf + 6.0) * LN_2 + (jf + 2.0) + b.ln();
        let t_b = match h_rate.as_mut() {
            None => {
                let reach = |v: f64| -> Result<bool, TangentError> { Ok(g.ln_value_at_ln(v) >= ln_k) };
                if g.ln_value_at_ln(0.0) >= ln_k {
                    0.0
                } else {
                    search_up(0.0, LN_2, DEFAULT_LN_CAP, "g above the level threshold", reach)
                        .map_err(|e| level_error(j, e, &sched))?
                }
            }
            Some(h) => {
                let k = ln_k.exp();
                h.ln_inverse(k).map_err(|e| level_error(j, format!("multiplier threshold {k:e}: {e}"), &sched))?
            }
        };
        let ln_t = lw.max(t_a.ln()).max(t_b);
        let tangent = tangent_at_ln(phi, ln_t).map_err(|e| level_error(j, e, &sched))?;
        let eps = LogNum::from_ln(tangent.intercept - (jf + 2.0));
        let theta = LogNum::from_ln(tangent.ln_neg_slope);
        if !eps.ln().is_finite() || !theta.ln().is_finite() {
            return Err(level_error(j, format!("parameters leave the representable range at ln t = {ln_t:e}"), &sched));
        }
        let h = (b * theta / eps).sqrt();
        let mut rec = LevelRecord::new(j, eps, theta, h);
        rec.b = Some(b);
        rec.t = Some(LogNum::from_ln(ln_t));
        rec.eps_star = Some(eps_star);
        rec.intercept = Some(tangent.intercept);
        ratio_sum = ratio_sum + rec.weight_ratio();
        prev = rec.clone();
        sched.levels.push(rec);
    }
    Ok(sched)
}

/// Levels with the largest parameters the block allows at level 1 and small
/// `I_j` afterwards: `theta_j = 3^-(j+1)`, `epsilon_1 = 1/9`,
/// `epsilon_j = 3^-(4j-1)` for `j >= 2`,
/// `h_j = 3^((j-1)(j+5))`, so each level's `h^2 eps / theta` dwarfs all lower ones.
pub fn engineered_schedule(levels: usize) -> LevelSchedule {
    let l3 = ln3();
    let levels = (1..=levels)
        .map(|j| {
            let jf = j as f64;
            LevelRecord::new(
                j,
                LogNum::from_ln(-(if j == 1 { 2.0 } else { 4.0 * jf - 1.0 }) * l3),
                LogNum::from_ln(-(jf + 1.0) * l3),
                LogNum::from_ln((jf - 1.0) * (jf + 5.0) * l3),
            )
        })
        .collect();
    LevelSchedule {
        kind: ScheduleKind::Custom,
        inputs: "engineered: theta_j = 3^-(j+1), epsilon_1 = 1/9, epsilon_j = 3^-(4j-1), h_j = 3^((j-1)(j+5))".into(),
        w: None,
        delta: None,
        m_after_last: None,
        seed: None,
        levels,
    }
}

/// Schedule from explicit `(epsilon, theta, h)` triples.
pub fn custom_schedule(inputs: &str, triples: &[(f64, f64, f64)]) -> LevelSchedule {
    LevelSchedule {
        kind: ScheduleKind::Custom,
        inputs: inputs.into(),
        w: None,
        delta: None,
        m_after_last: None,
        seed: None,
        levels: triples
            .iter()
            .enumerate()
            .map(|(i, &(e, t, h))| LevelRecord::new(i + 1, LogNum::new(e), LogNum::new(t), LogNum::new(h)))
            .collect(),
    }
}

const LN_TOL: f64 = 1e-9;

fn lbl(j: usize) -> String {
    format!("level {j}")
}

/// Recomputes every structural inequality of the schedule from the stored
/// values. Comparisons are made on logarithms with relative tolerance `1e-9`.
pub fn validate_schedule(s: &LevelSchedule) -> Vec<Check> {
    let lv = &s.levels;
    if lv.is_empty() {
        return vec![Check::flag("levels_present", "schedule has levels", true, "warning: empty schedule, all checks vacuous")];
    }
    let l3 = ln3();
    let mut out = Vec::new();
    let ninth = -(9f64.ln());
    let each = |f: &dyn Fn(&LevelRecord) -> (f64, f64)| -> Vec<(String, f64, f64)> {
        lv.iter()
            .map(|r| {
                let (m, b) = f(r);
                (lbl(r.j), m, b)
            })
            .collect()
    };
    let pairs = |f: &dyn Fn(&LevelRecord, &LevelRecord) -> (f64, f64)| -> Vec<(String, f64, f64)> {
        lv.windows(2)
            .map(|w| {
                let (m, b) = f(&w[0], &w[1]);
                (lbl(w[1].j), m, b)
            })
            .collect()
    };

    // ranges
    out.push(worst_at_most("ln_epsilon_le_ln_1_9", "epsilon_j in (0, 1/9]", LN_TOL, each(&|r| (r.epsilon.ln(), ninth))));
    out.push(worst_at_most("ln_theta_le_ln_1_9", "theta_j in (0, 1/9]", LN_TOL, each(&|r| (r.theta.ln(), ninth))));
    out.push(worst_at_most(
        "ln_theta_star_le_ln_1_8",
        "theta*_j in (0, 1/8]",
        LN_TOL,
        each(&|r| (r.theta_star.ln(), -(8f64.ln()))),
    ));
    out.push(worst_at_most("ln_72_le_ln_i_cap", "I_j >= 72", LN_TOL, each(&|r| (72f64.ln(), r.i_cap.ln()))));
    out.push(Check::flag(
        "positive_parameters",
        "epsilon_j, theta_j, h_j > 0",
        lv.iter().all(|r| !r.epsilon.is_zero() && !r.theta.is_zero() && !r.h.is_zero()),
        "",
    ));

    // monotonicity
    let strict = |a: f64, b: f64| if a < b { (a, b) } else { (a, b - 1e-300 - LN_TOL * b.abs().max(1.0) * 2.0) };
    out.push(worst_at_most(
        "epsilon_strictly_decreasing",
        "epsilon_j strictly decreasing",
        LN_TOL,
        pairs(&|a, b| strict(b.epsilon.ln(), a.epsilon.ln())),
    ));
    out.push(worst_at_most(
        "theta_strictly_decreasing",
        "theta_j strictly decreasing",
        LN_TOL,
        pairs(&|a, b| strict(b.theta.ln(), a.theta.ln())),
    ));
    out.push(worst_at_most(
        "theta_star_nonincreasing",
        "theta*_j nonincreasing",
        LN_TOL,
        pairs(&|a, b| (b.theta_star.ln(), a.theta_star.ln())),
    ));
    out.push(worst_at_most("i_cap_nondecreasing", "I_j nondecreasing", LN_TOL, pairs(&|a, b| (a.i_cap.ln(), b.i_cap.ln()))));

    // floor relations
    out.push(Check::flag(
        "theta_below_theta_star",
        "theta_j / theta*_j = 1 - epsilon_j < 1",
        lv.iter().all(|r| r.theta.ln() <= r.theta_star.ln() && r.epsilon.ln() < 0.0),
        "",
    ));
    out.push(worst_at_most(
        "ln_theta_star_eps_i_le_0",
        "theta*_j epsilon_j I_j <= 1",
        LN_TOL,
        each(&|r| (r.theta_star.ln() + r.epsilon.ln() + r.i_cap.ln(), 0.0)),
    ));
    out.push(floor_gap_check(lv));
    out.push(worst_at_most(
        "ln_theta_over_h_le_ln_3_pow_minus_j",
        "theta_j / h_j <= 3^-j, so theta_j / h_j -> 0",
        LN_TOL,
        each(&|r| (r.theta.ln() - r.h.ln(), -(r.j as f64) * l3)),
    ));

    // sums
    let eps_sum: LogNum = lv.iter().map(|r| r.epsilon).sum();
    let weighted: LogNum = lv.iter().map(|r| r.h * r.h * r.epsilon).sum();
    out.push(Check::at_most("ln_sum_epsilon_le_ln_1_8", "sum of epsilon_j <= 1/8", eps_sum.ln(), -(8f64.ln()), LN_TOL));
    match s.kind {
        ScheduleKind::Tail | ScheduleKind::Custom => out.push(Check::at_most(
            "ln_sum_h2_epsilon_le_0",
            "sum of h_j^2 epsilon_j <= 1",
            weighted.ln(),
            0.0,
            LN_TOL,
        )),
        _ => out.push(Check::at_most(
            "ln_sum_h2_epsilon_lt_ln_sum_epsilon",
            "sum of h_j^2 epsilon_j < sum of epsilon_j",
            weighted.ln(),
            eps_sum.ln() - 1e-300,
            0.0,
        )),
    }

    // ratio growth
    let mut growth = Vec::new();
    let mut acc = LogNum::ZERO;
    for r in lv {
        if r.j >= 2 {
            let need = LogNum::new(r.j as f64) * (LogNum::ONE + acc);
            growth.push((lbl(r.j), need.ln(), r.weight_ratio().ln()));
        }
        acc = acc + r.weight_ratio();
    }
    out.push(worst_at_most(
        "ratio_growth",
        "h_j^2 eps_j / theta_j >= j (1 + sum_{u<j} h_u^2 eps_u / theta_u), j >= 2",
        LN_TOL,
        growth,
    ));
    if matches!(s.kind, ScheduleKind::Mixing | ScheduleKind::Tail) {
        out.push(worst_at_most(
            "epsilon_le_9_pow_minus_j_over_prev_i",
            "epsilon_j <= 9^-j / I_{j-1}",
            LN_TOL,
            pairs(&|a, b| (b.epsilon.ln(), -2.0 * b.j as f64 * l3 - a.i_cap.ln())),
        ));
    }

    match s.kind {
        ScheduleKind::Variance => out.extend(variance_checks(s)),
        ScheduleKind::Mixing => out.extend(mixing_checks(s)),
        ScheduleKind::Tail => out.extend(tail_checks(s)),
        ScheduleKind::Custom => {}
    }
    out
}

/// `0 <= 1 - theta* eps I < theta* eps`, the floor in `I_j`.
fn floor_gap_check(lv: &[LevelRecord]) -> Check {
    let mut ok = true;
    let mut worst = f64::INFINITY;
    let mut approx = 0;
    for r in lv {
        match r.i_exact {
            Some(i) => {
                let x = (r.theta_star * r.epsilon).value();
                let gap = 1.0 - x * i as f64;
                let margin = x - gap;
                worst = worst.min(margin / x);
                if gap < -1e-9 || margin <= -1e-9 * x {
                    ok = false;
                }
            }
            None => approx += 1,
        }
    }
    let mut c = Check::flag("floor_gap_below_theta_star_eps", "0 <= 1 - theta* eps I < theta* eps", ok, "");
    c.measured = worst;
    c.bound = 0.0;
    if approx > 0 {
        c.note = format!("{approx} level(s) with I beyond 2^52 use 1/(theta* eps) itself");
    }
    c
}

fn variance_checks(s: &LevelSchedule) -> Vec<Check> {
    let lv = &s.levels;
    let l3 = ln3();
    let mut out = Vec::new();
    let mut ratio = Vec::new();
    for (i, r) in lv.iter().enumerate() {
        for l in &lv[..i] {
            let lhs = 2.0 * r.h.ln() + r.epsilon.ln() - 2.0 * l.h.ln() - 2.0 * l.epsilon.ln();
            ratio.push((format!("levels {} over {}", r.j, l.j), lhs, -(r.j as f64) * LN_2));
        }
    }
    out.push(worst_at_most(
        "epsilon_ratio_condition",
        "h_j^2 eps_j / (h_l^2 eps_l^2) <= 2^-j for l < j",
        LN_TOL,
        ratio,
    ));
    out.push(worst_at_most(
        "epsilon_le_9_pow_minus_j",
        "epsilon_j <= 9^-j",
        LN_TOL,
        lv.iter().map(|r| (lbl(r.j), r.epsilon.ln(), -2.0 * r.j as f64 * l3)).collect::<Vec<_>>(),
    ));
    out.push(worst_at_most(
        "theta_le_9_pow_minus_j",
        "theta_j <= 9^-j",
        LN_TOL,
        lv.iter().map(|r| (lbl(r.j), r.theta.ln(), -2.0 * r.j as f64 * l3)).collect::<Vec<_>>(),
    ));
    let ms: Vec<Option<LogNum>> = lv.iter().map(|r| r.m).chain([s.m_after_last]).collect();
    if ms.iter().all(Option::is_some) {
        let ms: Vec<LogNum> = ms.into_iter().flatten().collect();
        out.push(worst_at_most(
            "theta_times_next_m_le_half",
            "theta_j M_{j+1} <= 1/2",
            LN_TOL,
            lv.iter().map(|r| (lbl(r.j), r.theta.ln(), -ms[r.j].ln() - LN_2)).collect::<Vec<_>>(),
        ));
        let mut inc = true;
        for (w, r) in ms.windows(2).zip(lv) {
            let exact = (r.m_exact, lv.get(r.j).and_then(|n| n.m_exact));
            inc &= match exact {
                (Some(a), Some(b)) => a < b,
                _ => w[0] < w[1],
            };
        }
        out.push(Check::flag("m_strictly_increasing", "1 <= M_1 < M_2 < ...", inc, ""));
    } else {
        out.push(Check::skipped("theta_times_next_m_le_half", "theta_j M_{j+1} <= 1/2", "M_j not stored"));
    }
    out
}

fn mixing_checks(s: &LevelSchedule) -> Vec<Check> {
    let lv = &s.levels;
    let l3 = ln3();
    let mut out = Vec::new();
    let prevs: Vec<&LevelRecord> = s.seed.iter().chain(lv.iter()).collect();
    out.push(worst_at_most(
        "epsilon_halving",
        "epsilon_j <= epsilon_{j-1} / 2",
        LN_TOL,
        prevs.windows(2).map(|w| (lbl(w[1].j), w[1].epsilon.ln(), w[0].epsilon.ln() - LN_2)).collect::<Vec<_>>(),
    ));
    out.push(worst_at_most(
        "theta_halving",
        "theta_j <= theta_{j-1} / 2",
        LN_TOL,
        prevs.windows(2).map(|w| (lbl(w[1].j), w[1].theta.ln(), w[0].theta.ln() - LN_2)).collect::<Vec<_>>(),
    ));
    out.push(worst_at_most(
        "theta_le_9_pow_minus_j",
        "theta_j <= 9^-j",
        LN_TOL,
        lv.iter().map(|r| (lbl(r.j), r.theta.ln(), -2.0 * r.j as f64 * l3)).collect::<Vec<_>>(),
    ));
    let mut ident = Vec::new();
    let mut missing = false;
    for r in lv {
        match (r.intercept, r.b) {
            (Some(i), Some(b)) => {
                let want = i + b.value() - (r.j as f64 + 2.0);
                let d = (r.epsilon.ln() - want).abs();
                ident.push((lbl(r.j), d, 1e-10 * want.abs().max(1.0)));
            }
            _ => missing = true,
        }
    }
    if missing {
        out.push(Check::skipped("epsilon_identity", "ln eps_j = L_j(0) + B_j - (j + 2)", "intercept or B not stored"));
    } else {
        out.push(worst_at_most("epsilon_identity", "|ln eps_j - (L_j(0) + B_j - (j + 2))| <= 1e-10 rel", 0.0, ident));
    }
    out
}

fn tail_checks(s: &LevelSchedule) -> Vec<Check> {
    let lv = &s.levels;
    let mut out = Vec::new();
    if let Some(delta) = s.delta {
        out.push(worst_at_most(
            "epsilon_over_theta_lt_delta",
            "epsilon_j / theta_j < Delta",
            LN_TOL,
            lv.iter().map(|r| (lbl(r.j), (r.epsilon / r.theta).ln(), delta.ln())).collect::<Vec<_>>(),
        ));
    }
    let prevs: Vec<&LevelRecord> = s.seed.iter().chain(lv.iter()).collect();
    out.push(worst_at_most(
        "h_tripling",
        "h_j >= 3 h_{j-1}",
        LN_TOL,
        prevs.windows(2).map(|w| (lbl(w[1].j), 3f64.ln() + w[0].h.ln(), w[1].h.ln())).collect::<Vec<_>>(),
    ));
    out.push(worst_at_most(
        "h2_epsilon_le_2_pow_minus_j",
        "h_j^2 epsilon_j <= 2^-j",
        LN_TOL,
        lv.iter().map(|r| (lbl(r.j), (r.h * r.h * r.epsilon).ln(), -(r.j as f64) * LN_2)).collect::<Vec<_>>(),
    ));
    out.push(worst_at_most(
        "epsilon_third",
        "epsilon_j < epsilon_{j-1} / 3",
        LN_TOL,
        prevs.windows(2).map(|w| (lbl(w[1].j), w[1].epsilon.ln(), w[0].epsilon.ln() - 3f64.ln())).collect::<Vec<_>>(),
    ));
    out.push(worst_at_most(
        "theta_halving",
        "theta_j <= theta_{j-1} / 2",
        LN_TOL,
        prevs.windows(2).map(|w| (lbl(w[1].j), w[1].theta.ln(), w[0].theta.ln() - LN_2)).collect::<Vec<_>>(),
    ));
    let b_ok: Vec<_> = lv
        .iter()
        .filter_map(|r| r.b.map(|b| (lbl(r.j), (r.weight_ratio().ln() - b.ln()).abs(), 1e-9 * b.ln().abs().max(1.0))))
        .collect();
    out.push(worst_at_most("ratio_equals_b", "h_j^2 eps_j / theta_j = B_j", 0.0, b_ok));
    out
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn write_level(out: &mut String, header: &str, r: &LevelRecord) {
    let _ = writeln!(out, "\n{header}");
    let _ = writeln!(out, "j = {}", r.j);
    for (name, v) in [
        ("ln_epsilon", r.epsilon),
        ("ln_theta", r.theta),
        ("ln_theta_star", r.theta_star),
        ("ln_i_cap", r.i_cap),
        ("ln_h", r.h),
    ] {
        let _ = writeln!(out, "{name} = {}", fmt_f(v.ln()));
    }
    if let Some(i) = r.i_exact {
        let _ = writeln!(out, "i_exact = {i}");
    }
    for (name, v) in [("ln_b", r.b), ("ln_t", r.t), ("ln_m", r.m), ("ln_eps_star", r.eps_star)] {
        if let Some(v) = v {
            let _ = writeln!(out, "{name} = {}", fmt_f(v.ln()));
        }
    }
    if let Some(m) = r.m_exact {
        let _ = writeln!(out, "m_exact = {m}");
    }
    if let Some(i) = r.intercept {
        let _ = writeln!(out, "intercept = {}", fmt_f(i));
    }
    for (name, v) in [("epsilon", r.epsilon), ("theta", r.theta), ("h", r.h)] {
        if v.fits_f64() {
            let _ = writeln!(out, "{name} = {}", fmt_f(v.value()));
        }
    }
}

impl LevelSchedule {
    /// Number of levels.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// First `j` levels.
    pub fn truncated(&self, j: usize) -> LevelSchedule {
        let mut s = self.clone();
        s.levels.truncate(j);
        if j < self.levels.len() {
            s.m_after_last = self.levels[j].m;
        }
        s
    }

    /// Structured text (TOML) with one table per level and 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "kind = {}", quote(self.kind.name()));
        let _ = writeln!(out, "inputs = {}", quote(&self.inputs));
        if let Some(w) = self.w {
            let _ = writeln!(out, "w = {}", fmt_f(w));
        }
        if let Some(d) = self.delta {
            let _ = writeln!(out, "ln_delta = {}", fmt_f(d.ln()));
        }
        if let Some(m) = self.m_after_last {
            let _ = writeln!(out, "ln_m_after_last = {}", fmt_f(m.ln()));
        }
        if let Some(seed) = &self.seed {
            write_level(&mut out, "[seed]", seed);
        }
        for r in &self.levels {
            write_level(&mut out, "[[level]]", r);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<LevelSchedule, ScheduleError> {
        toml::from_str(text).map_err(|e| ScheduleError::Parse(e.to_string()))
    }
}
