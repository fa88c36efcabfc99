//! Tangent lines to convex rates, the thresholds `T` and `T*`, and the builder
//! of slowly growing multipliers `h`.
//!
//! All searches run over `u = ln x`, so thresholds far beyond the f64 range of
//! `x` are still located (their `ln` is returned as a [`LogNum`]).

use thiserror::Error;

use crate::rates::{ConvexRate, RateFn};
use crate::scalar::LogNum;

/// Searches give up once `ln x` passes this value.
pub const DEFAULT_LN_CAP: f64 = 1e300;

/// Most breakpoint levels [`HRate`] will build.
pub const MAX_H_LEVELS: usize = 10_000_000;

const REL_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TangentError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unbounded search: {what} not reached below ln x = {ln_cap:e}")]
    Unbounded { what: String, ln_cap: f64 },
    #[error("non-finite evaluation of {what} at ln x = {ln_x}")]
    NonFinite { what: String, ln_x: f64 },
    #[error("verification failed at ln x = {ln_x}: {what}")]
    Verification { what: String, ln_x: f64 },
    #[error("construction failed on ln x in [{lo}, {hi}]: {what}")]
    Construction { what: String, lo: f64, hi: f64 },
}

type Result<T> = std::result::Result<T, TangentError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineLine {
    pub intercept: f64,
    pub slope: f64,
}

impl AffineLine {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Tangent line at `y = e^{ln_y}` with its slope kept as a logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent {
    pub ln_y: f64,
    pub phi_y: f64,
    /// `ln(-slope)`.
    pub ln_neg_slope: f64,
    pub intercept: f64,
}

impl Tangent {
    pub fn line(&self) -> AffineLine {
        AffineLine { intercept: self.intercept, slope: -self.ln_neg_slope.exp() }
    }

    /// Line value at `x = e^v`.
    pub fn at_ln(&self, v: f64) -> f64 {
        self.intercept - (v + self.ln_neg_slope).exp()
    }
}

pub fn tangent_at(phi: &dyn ConvexRate, y: f64) -> Result<AffineLine> {
    if !(y > 1.0) {
        return Err(TangentError::Precondition(format!("tangent point must exceed 1, got {y}")));
    }
    let d = phi.derivative(y);
    let v = phi.value(y);
    if !d.is_finite() || !v.is_finite() {
        return Err(TangentError::NonFinite { what: "phi or phi'".into(), ln_x: y.ln() });
    }
    Ok(AffineLine { intercept: v - y * d, slope: d })
}

/// Tangent at `x = e^u`, evaluated without forming `x`.
pub fn tangent_at_ln(phi: &dyn ConvexRate, u: f64) -> Result<Tangent> {
    let phi_y = phi.value_at_ln(u);
    let ln_neg_slope = phi.ln_neg_slope_at_ln(u);
    let intercept = phi.intercept_at_ln(u);
    if phi_y.is_nan() || ln_neg_slope.is_nan() || !intercept.is_finite() {
        return Err(TangentError::NonFinite { what: "tangent".into(), ln_x: u });
    }
    Ok(Tangent { ln_y: u, phi_y, ln_neg_slope, intercept })
}

/// First `u > lo` where the monotone predicate holds: steps of doubling size
/// from `lo`, then bisection down to relative width `1e-13`.
pub(crate) fn search_up(
    lo: f64,
    first_step: f64,
    ln_cap: f64,
    what: &str,
    mut pred: impl FnMut(f64) -> Result<bool>,
) -> Result<f64> {
    let mut lo = lo;
    let mut step = first_step;
    let mut hi = lo + step;
    while !pred(hi)? {
        lo = hi;
        step *= 2.0;
        hi = lo + step;
        if hi > ln_cap {
            return Err(TangentError::Unbounded { what: what.into(), ln_cap });
        }
    }
    for _ in 0..4000 {
        if hi - lo <= REL_TOL * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn slack(x: f64) -> f64 {
    1e-9 * x.abs().max(1.0)
}

/// Whether the tangent at `e^u` has slope in `[-s, 0)` and intercept `<= d`.
fn threshold_holds(phi: &dyn ConvexRate, u: f64, ln_s: f64, d: f64) -> Result<bool> {
    let t = tangent_at_ln(phi, u)?;
    Ok(t.ln_neg_slope <= ln_s && t.intercept <= d)
}

/// `T(phi, D, s)`: a point past which all tangents have slope in `[-s, 0)`
/// and intercept at most `D`.
pub fn find_t(phi: &dyn ConvexRate, d_bound: f64, s_bound: f64) -> Result<LogNum> {
    find_t_capped(phi, d_bound, s_bound.ln(), DEFAULT_LN_CAP)
}

/// [`find_t`] with the slope bound given as `ln s`.
pub fn find_t_ln(phi: &dyn ConvexRate, d_bound: f64, ln_s: f64) -> Result<LogNum> {
    find_t_capped(phi, d_bound, ln_s, DEFAULT_LN_CAP)
}

pub fn find_t_capped(phi: &dyn ConvexRate, d_bound: f64, ln_s: f64, ln_cap: f64) -> Result<LogNum> {
    if !(d_bound < 0.0) || ln_s.is_nan() || ln_s == f64::NEG_INFINITY {
        return Err(TangentError::Precondition(format!(
            "need D < 0 and s > 0, got D = {d_bound}, ln s = {ln_s}"
        )));
    }
    let u = search_up(0.0, std::f64::consts::LN_2, ln_cap, "tangent threshold", |u| {
        threshold_holds(phi, u, ln_s, d_bound)
    })?;
    verify_threshold(phi, u, ln_s, d_bound)?;
    Ok(LogNum::from_ln(u))
}

/// Conditions hold at `y, 2y, 4y, ...` and the intercept does not increase.
fn verify_threshold(phi: &dyn ConvexRate, u: f64, ln_s: f64, d: f64) -> Result<()> {
    let mut prev = f64::INFINITY;
    let ln2 = std::f64::consts::LN_2;
    let points = (0..4).map(|k| u + k as f64 * ln2).chain((2..24).map(|k| u + ln2 * (1u64 << k) as f64));
    for v in points {
        let t = match tangent_at_ln(phi, v) {
            Ok(t) => t,
            // beyond f64 evaluation range of phi: nothing left to check
            Err(TangentError::NonFinite { .. }) if v > u + 64.0 => break,
            Err(e) => return Err(e),
        };
        if t.ln_neg_slope > ln_s + slack(ln_s) {
            return Err(TangentError::Verification { what: "slope below -s".into(), ln_x: v });
        }
        if t.intercept > d + slack(d) {
            return Err(TangentError::Verification { what: "intercept above D".into(), ln_x: v });
        }
        if t.intercept > prev + slack(prev) {
            return Err(TangentError::Verification { what: "intercept increased".into(), ln_x: v });
        }
        prev = t.intercept;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TStar {
    pub y: LogNum,
    /// Point past which `psi >= b`.
    pub q: LogNum,
    pub tangent: Tangent,
}

/// `T*(phi, psi, B, D, s) = T(phi, D - B + phi(q), s)` where `psi >= B` past `q`.
pub fn find_t_star(phi: &dyn ConvexRate, psi: &dyn RateFn, b: f64, d_bound: f64, s_bound: f64) -> Result<TStar> {
    if !(s_bound > 0.0) {
        return Err(TangentError::Precondition(format!("s must be positive, got {s_bound}")));
    }
    find_t_star_ln(phi, psi, b, d_bound, s_bound.ln())
}

/// [`find_t_star`] with the slope bound given as `ln s`.
pub fn find_t_star_ln(phi: &dyn ConvexRate, psi: &dyn RateFn, b: f64, d_bound: f64, ln_s: f64) -> Result<TStar> {
    if !(b > 0.0) {
        return Err(TangentError::Precondition(format!("B must be positive, got {b}")));
    }
    if !(d_bound < 0.0) {
        return Err(TangentError::Precondition(format!("D must be negative, got {d_bound}")));
    }
    let reaches = |v: f64| -> Result<bool> {
        let p = psi.value_at_ln(v);
        if p.is_nan() {
            return Err(TangentError::NonFinite { what: "psi".into(), ln_x: v });
        }
        Ok(p >= b)
    };
    let ln_q = if reaches(0.0)? {
        0.0
    } else {
        search_up(0.0, std::f64::consts::LN_2, DEFAULT_LN_CAP, "psi >= B", reaches)?
    };
    let d_shift = d_bound - b + phi.value_at_ln(ln_q);
    let y = find_t_ln(phi, d_shift, ln_s)?;
    let tangent = tangent_at_ln(phi, y.ln())?;
    verify_t_star(phi, psi, &tangent, b, d_bound, ln_q)?;
    Ok(TStar { y, q: LogNum::from_ln(ln_q), tangent })
}

/// `L(0) + B <= D` and `L(x) + B <= phi(x) + psi(x)` on a geometric grid.
fn verify_t_star(phi: &dyn ConvexRate, psi: &dyn RateFn, t: &Tangent, b: f64, d: f64, ln_q: f64) -> Result<()> {
    if t.intercept + b > d + slack(d) {
        return Err(TangentError::Verification { what: "L(0) + B > D".into(), ln_x: t.ln_y });
    }
    let top = t.ln_y.max(ln_q) + 20.0 * std::f64::consts::LN_2;
    let n = 400;
    let grid = (0..=n)
        .map(|k| top * k as f64 / n as f64)
        .chain([ln_q, t.ln_y, t.ln_y + std::f64::consts::LN_2]);
    for v in grid {
        let lhs = t.at_ln(v) + b;
        let rhs = phi.value_at_ln(v) + psi.value_at_ln(v);
        if lhs > rhs + slack(rhs) {
            return Err(TangentError::Verification { what: "L(x) + B > phi(x) + psi(x)".into(), ln_x: v });
        }
    }
    Ok(())
}

/// Continuous nondecreasing `h` with `1 <= h <= g`, `h f` nonincreasing and
/// `h -> inf`, built from alternating breakpoints `t_1 < u_1 < t_2 < ...`:
/// `h = j` on `[t_j, u_j]` and `h = j f(u_j) / f` on `[u_j, t_{j+1}]`.
/// Breakpoints are stored as logarithms and built lazily.
pub struct HRate<'a> {
    f: &'a dyn RateFn,
    g: &'a dyn RateFn,
    ln_t: Vec<f64>,
    ln_u: Vec<f64>,
    ln_f_u: Vec<f64>,
    ln_cap: f64,
}

pub fn build_h<'a>(f: &'a dyn RateFn, g: &'a dyn RateFn) -> Result<HRate<'a>> {
    if !(g.value(1.0) >= 1.0) {
        return Err(TangentError::Precondition("g must be at least 1".into()));
    }
    if !(f.value(1.0) > 0.0) {
        return Err(TangentError::Precondition("f must be positive".into()));
    }
    let mut h = HRate { f, g, ln_t: vec![0.0], ln_u: Vec::new(), ln_f_u: Vec::new(), ln_cap: DEFAULT_LN_CAP };
    h.extend()?;
    Ok(h)
}

impl HRate<'_> {
    /// Completed levels `j` (those with `u_j` and `t_{j+1}` known).
    pub fn levels(&self) -> usize {
        self.ln_u.len()
    }

    /// `(ln t_j, ln u_j)` for every completed level.
    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ln_t.iter().copied().zip(self.ln_u.iter().copied())
    }

    fn extend(&mut self) -> Result<()> {
        let j = self.ln_u.len() + 1;
        if j > MAX_H_LEVELS {
            return Err(TangentError::Unbounded { what: format!("h level {j}"), ln_cap: self.ln_cap });
        }
        let lt = *self.ln_t.last().expect("t_1 present");
        let start = if lt > 0.0 { lt + (-lt).exp().ln_1p() } else { (lt.exp() + 1.0).ln() };
        let g = self.g;
        let need = (j + 1) as f64;
        let lu = search_up(start, std::f64::consts::LN_2, self.ln_cap, "g >= j + 1", |v| {
            let x = g.value_at_ln(v);
            if x.is_nan() {
                return Err(TangentError::NonFinite { what: "g".into(), ln_x: v });
            }
            Ok(x >= need)
        })?;
        let lfu = self.ln_f(lu)?;
        let target = lfu + (j as f64 / (j + 1) as f64).ln();
        let lt_next = search_up(lu, std::f64::consts::LN_2, self.ln_cap, "f falls by j/(j+1)", |v| {
            Ok(self.ln_f(v)? <= target)
        })
        .map_err(|e| match e {
            TangentError::Unbounded { .. } => TangentError::Construction {
                what: "f does not decrease enough".into(),
                lo: lu,
                hi: self.ln_cap,
            },
            e => e,
        })?;
        let reached = self.ln_f(lt_next)?;
        if target - reached > 1e-9 * target.abs().max(1.0) {
            return Err(TangentError::Construction { what: "f jumps past its target".into(), lo: lu, hi: lt_next });
        }
        self.ln_u.push(lu);
        self.ln_f_u.push(lfu);
        self.ln_t.push(lt_next);
        Ok(())
    }

    fn ln_f(&self, v: f64) -> Result<f64> {
        let r = self.f.ln_value_at_ln(v);
        if r.is_nan() || r == f64::INFINITY {
            return Err(TangentError::NonFinite { what: "f".into(), ln_x: v });
        }
        Ok(r)
    }

    fn cover(&mut self, v: f64) -> Result<()> {
        while *self.ln_t.last().expect("nonempty") <= v {
            self.extend()?;
        }
        Ok(())
    }

    /// `h(e^v)`.
    pub fn at_ln(&mut self, v: f64) -> Result<f64> {
        if v <= 0.0 {
            return Ok(1.0);
        }
        self.cover(v)?;
        let j = self.ln_t.partition_point(|&t| t <= v);
        let (lu, lfu) = (self.ln_u[j - 1], self.ln_f_u[j - 1]);
        if v <= lu {
            return Ok(j as f64);
        }
        let jf = j as f64;
        Ok((jf * (lfu - self.ln_f(v)?).exp()).clamp(jf, jf + 1.0))
    }

    pub fn value(&mut self, x: f64) -> Result<f64> {
        self.at_ln(x.ln())
    }

    /// `ln` of the smallest `x` with `h(x) >= k`.
    pub fn ln_inverse(&mut self, k: f64) -> Result<f64> {
        if k <= 1.0 {
            return Ok(0.0);
        }
        if !(k < MAX_H_LEVELS as f64) {
            return Err(TangentError::Unbounded { what: format!("h >= {k}"), ln_cap: self.ln_cap });
        }
        let j = k.floor() as usize;
        while self.ln_u.len() < j {
            self.extend()?;
        }
        if k == j as f64 {
            return Ok(self.ln_t[j - 1]);
        }
        let target = self.ln_f_u[j - 1] + (j as f64 / k).ln();
        search_up(self.ln_u[j - 1], std::f64::consts::LN_2, self.ln_cap, "h >= k", |v| Ok(self.ln_f(v)? <= target))
    }
}

/// Outcome of checking the conclusions on `h` over a grid of `ln x` values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HChecks {
    pub bounded_by_one_and_g: bool,
    pub nondecreasing: bool,
    pub product_nonincreasing: bool,
    pub unbounded: bool,
    pub continuous: bool,
}

impl HChecks {
    pub fn all(&self) -> bool {
        self.bounded_by_one_and_g && self.nondecreasing && self.product_nonincreasing && self.unbounded && self.continuous
    }
}

/// Checks `1 <= h <= g`, monotonicity of `h` and `h f`, growth, and
/// continuity at each breakpoint, on the increasing grid `ln_grid`.
pub fn check_h(h: &mut HRate<'_>, ln_grid: &[f64], tol: f64) -> Result<HChecks> {
    let mut c = HChecks { bounded_by_one_and_g: true, nondecreasing: true, product_nonincreasing: true, ..Default::default() };
    let mut prev_h = f64::NEG_INFINITY;
    let mut prev_p = f64::INFINITY;
    for &v in ln_grid {
        let hv = h.at_ln(v)?;
        let gv = h.g.value_at_ln(v);
        if hv < 1.0 - tol || hv > gv * (1.0 + tol) {
            c.bounded_by_one_and_g = false;
        }
        if hv < prev_h * (1.0 - tol) {
            c.nondecreasing = false;
        }
        // compare ln(h f) so tiny f does not hide changes
        let p = hv.ln() + h.ln_f(v)?;
        if p > prev_p + tol * prev_p.abs().max(1.0) {
            c.product_nonincreasing = false;
        }
        prev_h = hv;
        prev_p = p;
    }
    let last = *ln_grid.last().unwrap_or(&0.0);
    c.unbounded = h.at_ln(last)? > h.at_ln(0.0)? + 1.0 - tol || h.ln_inverse(h.levels() as f64 + 2.0).is_ok();
    c.continuous = true;
    let levels = h.levels();
    for i in 0..levels {
        let (lt, lu) = (h.ln_t[i], h.ln_u[i]);
        let lt_next = h.ln_t[i + 1];
        for &edge in &[lt, lu, lt_next] {
            if edge <= 0.0 || edge > last {
                continue;
            }
            let d = 1e-9 * edge.abs().max(1.0);
            let (a, b) = (h.at_ln(edge - d)?, h.at_ln(edge + d)?);
            if (a - b).abs() > 1e-6 * a.max(1.0) {
                c.continuous = false;
            }
        }
    }
    Ok(c)
}

/// Largest `L(x) - phi(x)` over `xs` for the tangent at `y`.
pub fn max_tangent_violation(phi: &dyn ConvexRate, y: f64, xs: &[f64]) -> Result<f64> {
    let line = tangent_at(phi, y)?;
    Ok(xs.iter().map(|&x| line.at(x) - phi.value(x)).fold(f64::NEG_INFINITY, f64::max))
}
