//! Quantile functions, tail integrals, concentration functions and the
//! verification harnesses that turn a superposed chain into a [`RunReport`].

use serde::Serialize;
use thiserror::Error;

use crate::limit::{ks_distance, sample_mu_p1sl, DiscreteDist};
use crate::rates::{ConvexRate, RateFn};
use crate::report::{worst_at_most, Check, Status};
use crate::scalar::{LogNum, Weight};
use crate::schedule::{validate_schedule, ScheduleKind};
use crate::superposed::{SuperChain, SuperError, DEFAULT_BUDGET};

pub const MAX_ENUMERATED_LEVELS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagError {
    #[error("quantile functions need nonnegative support, found {0}")]
    NegativeSupport(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Chain(#[from] SuperError),
}

/// Upper-tail quantile `Q(u) = inf{t >= 0 : P(W > t) <= u}` of a finite law,
/// stored as a step function: `Q(u) = values[k]` for
/// `thresholds[k-1] <= u < thresholds[k]` (with `thresholds[-1] = 0`), and
/// `Q(u) = 0` past the last threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileFn<T> {
    pub thresholds: Vec<T>,
    pub values: Vec<T>,
}

pub fn quantile_of<T: Weight>(dist: &DiscreteDist<T>) -> Result<QuantileFn<T>, DiagError> {
    if let Some(x) = dist.support.first() {
        if *x < T::zero() {
            return Err(DiagError::NegativeSupport(x.to_f()));
        }
    }
    let mut thresholds = Vec::new();
    let mut values = Vec::new();
    let mut acc = T::zero();
    for (x, p) in dist.support.iter().zip(&dist.probs).rev() {
        if *x == T::zero() {
            break;
        }
        if *p == T::zero() {
            continue;
        }
        acc = acc + *p;
        thresholds.push(acc);
        values.push(*x);
    }
    Ok(QuantileFn { thresholds, values })
}

impl<T: Weight> QuantileFn<T> {
    pub fn eval(&self, u: T) -> T {
        let k = self.thresholds.partition_point(|g| *g <= u);
        self.values.get(k).copied().unwrap_or_else(T::zero)
    }

    /// `int_0^c Q(u)^2 du`.
    pub fn tail_integral(&self, c: T) -> T {
        let mut lo = T::zero();
        let mut total = T::zero();
        for (g, v) in self.thresholds.iter().zip(&self.values) {
            if lo >= c {
                break;
            }
            let hi = if *g < c { *g } else { c };
            total = total + *v * *v * (hi - lo);
            lo = *g;
        }
        total
    }
}

/// Largest fraction of samples inside an open window `(r - width, r + width)`.
pub fn concentration(samples: &[f64], width: f64) -> f64 {
    assert!(!samples.is_empty(), "concentration of an empty sample");
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..x.len() {
        while x[hi] - x[lo] >= 2.0 * width {
            lo += 1;
        }
        best = best.max(hi + 1 - lo);
    }
    best as f64 / x.len() as f64
}

/// Exact law of `|X_0|` for the truncated chain (`3^J` level configurations).
pub fn abs_law(chain: &SuperChain) -> Result<DiscreteDist<LogNum>, DiagError> {
    let lv = chain.levels();
    if lv.len() > MAX_ENUMERATED_LEVELS {
        return Err(DiagError::Precondition(format!("{} levels exceed {MAX_ENUMERATED_LEVELS}", lv.len())));
    }
    let half = LogNum::new(0.5);
    let mut pairs = Vec::with_capacity(3usize.pow(lv.len() as u32));
    for code in 0..3usize.pow(lv.len() as u32) {
        let (mut pos, mut neg, mut p) = (LogNum::ZERO, LogNum::ZERO, LogNum::ONE);
        let mut c = code;
        for r in lv {
            match c % 3 {
                0 => p = p * r.epsilon.one_minus(),
                1 => {
                    pos = pos + r.h;
                    p = p * r.epsilon * half;
                }
                _ => {
                    neg = neg + r.h;
                    p = p * r.epsilon * half;
                }
            }
            c /= 3;
        }
        let v = if pos >= neg { pos - neg } else { neg - pos };
        pairs.push((v, p));
    }
    DiscreteDist::from_pairs(pairs).map_err(|e| DiagError::Precondition(e.to_string()))
}

/// Quantile-interval checks for `Y = sum_j h_j 1(A_j)` with independent events:
/// `Q_Y = 0` on `[a_1, 1)` and `Q_Y <= 2 h_j` on `[a_{j+1}, a_j)`, `a_j = 2 P(A_j)`.
pub fn verify_quantile_intervals(h: &[f64], probs: &[f64]) -> Result<Vec<Check>, DiagError> {
    if h.is_empty() || h.len() != probs.len() {
        return Err(DiagError::Precondition("h and probabilities must be nonempty and equally long".into()));
    }
    if h.len() > 20 {
        return Err(DiagError::Precondition("at most 20 levels".into()));
    }
    if !(probs[0] > 0.0 && probs[0] < 0.5) {
        return Err(DiagError::Precondition(format!("P(A_1) = {} must lie in (0, 1/2)", probs[0])));
    }
    for j in 1..h.len() {
        if !(probs[j] > 0.0 && probs[j] <= probs[j - 1] / 2.0) {
            return Err(DiagError::Precondition(format!("P(A_{}) must be at most P(A_{}) / 2", j + 1, j)));
        }
        if !(h[j - 1] > 0.0 && h[j - 1] <= h[j] / 2.0) {
            return Err(DiagError::Precondition(format!("h_{} must be at most h_{} / 2", j, j + 1)));
        }
    }
    let mut pairs = Vec::with_capacity(1 << h.len());
    for mask in 0u32..(1 << h.len()) {
        let mut y = 0.0;
        let mut p = 1.0;
        for (j, (&hj, &pj)) in h.iter().zip(probs).enumerate() {
            if mask >> j & 1 == 1 {
                y += hj;
                p *= pj;
            } else {
                p *= 1.0 - pj;
            }
        }
        pairs.push((y, p));
    }
    let law = DiscreteDist::from_pairs(pairs).map_err(|e| DiagError::Precondition(e.to_string()))?;
    let q = quantile_of(&law)?;
    let a: Vec<f64> = probs.iter().map(|p| 2.0 * p).collect();
    let mut out = vec![Check::at_most("quantile_zero_above_a1", "Q_Y(u) = 0 on [a_1, 1)", q.eval(a[0]), 0.0, 0.0)];
    let mut items = Vec::new();
    for j in 0..h.len() {
        // Q is nonincreasing and right-continuous: its sup on [lo, a_j) is Q(lo)
        let lo = a.get(j + 1).copied().unwrap_or(0.0);
        let sup = if lo > 0.0 { q.eval(lo) } else { q.values.first().copied().unwrap_or(0.0) };
        items.push((format!("[a_{}, a_{})", j + 2, j + 1), sup, 2.0 * h[j]));
    }
    out.push(worst_at_most("quantile_interval_bound", "Q_Y(u) <= 2 h_j on [a_{j+1}, a_j)", 0.0, items));
    Ok(out)
}

/// Tail-integral bound `int_0^{f(x)} Q_{|X_0|}^2 <= g(x) (-phi'(x))` on a
/// grid, plus the per-level bound `h_j^2 min(f(x), eps_j) <= 2^-(j+6) g(x) (-phi'(x))`.
pub fn verify_tail_quantile_bound(
    chain: &SuperChain,
    phi: &dyn ConvexRate,
    g: &dyn RateFn,
    xs: &[f64],
) -> Result<Vec<Check>, DiagError> {
    let q = quantile_of(&abs_law(chain)?)?;
    let mut whole = Vec::new();
    let mut per_level = Vec::new();
    for &x in xs {
        if !(x > 1.0) {
            return Err(DiagError::Precondition(format!("grid point {x} must exceed 1")));
        }
        let fx = LogNum::from_ln(phi.value(x));
        let bound = LogNum::new(g.value(x)) * LogNum::new(-phi.derivative(x));
        whole.push((format!("x = {x}"), q.tail_integral(fx).ln(), bound.ln()));
        for r in chain.levels() {
            let lhs = r.h * r.h * fx.min(r.epsilon);
            let rhs = bound * LogNum::from_ln(-((r.j + 6) as f64) * std::f64::consts::LN_2);
            per_level.push((format!("level {} at x = {x}", r.j), lhs.ln(), rhs.ln()));
        }
    }
    let note = format!(
        "levels beyond J = {} each obey the per-level bound, adding at most 8 sum_(j>J) 2^-(j+6) = 2^-(J+3) of the right side",
        chain.truncation_j
    );
    Ok(vec![
        worst_at_most("ln_tail_quantile_integral", "int_0^f(x) Q^2 <= g(x) (-phi'(x)), logarithms", 1e-9, whole)
            .with_note(note),
        worst_at_most(
            "ln_level_quantile_integral",
            "h_j^2 min(f(x), eps_j) <= 2^-(j+6) g(x) (-phi'(x)), logarithms",
            1e-9,
            per_level,
        ),
    ])
}

/// Distances of one level's normalized sums to the limit law.
#[derive(Debug, Clone, Serialize)]
pub struct LevelKs {
    pub level: usize,
    pub horizon: u64,
    /// KS distance of the level-`j` part `theta_j S_{I_j}^(j)`.
    pub ks: f64,
    /// KS distance of the whole normalized sum, when affordable.
    pub chain_ks: Option<f64>,
    /// Standard deviation contributed by the lower levels.
    pub lower_sd: f64,
    /// Bound on the probability that a higher level is active in the window.
    pub upper_active: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitTrend {
    pub levels: Vec<LevelKs>,
    pub skipped: Vec<(usize, String)>,
}

/// Compound Poisson(1)-Laplace reference sample used by the limit-law checks,
/// on a stream disjoint from the chain's.
pub fn limit_reference_sample(seed: u64, n_rep: usize) -> Vec<f64> {
    sample_mu_p1sl(seed ^ 0x11D1_7A11_0F5E_ED00, n_rep)
}

/// Normalized level sums `(theta_j / h_j) S_{I_j}` against a compound
/// Poisson(1)-Laplace reference sample, over the levels whose horizon `I_j`
/// is strictly larger than every earlier one and whose cost fits the budget.
///
/// The limit law has an atom at 0; the other levels add a small continuous
/// perturbation that vanishes in probability but moves that atom, so the KS
/// distance is taken on the level-`j` part and the perturbation is reported
/// by its exact standard deviation.
pub fn limit_law_trend(chain: &SuperChain, n_rep: usize, seed: u64, budget: f64) -> LimitTrend {
    let reference = limit_reference_sample(seed, n_rep);
    let mut levels = Vec::new();
    let mut skipped = Vec::new();
    let mut last_i = 0u64;
    for r in chain.levels() {
        let Some(i) = r.i_exact else {
            skipped.push((r.j, format!("I_j = e^{:.1} is beyond simulation", r.i_cap.ln())));
            continue;
        };
        if i <= last_i {
            skipped.push((r.j, format!("I_j = {i} does not increase")));
            continue;
        }
        match chain.level_normalized_sums(r.j, n_rep, seed, budget) {
            Ok(s) => {
                last_i = i;
                let chain_ks = chain.normalized_sum_samples(r.j, n_rep, seed, budget).ok().map(|c| ks_distance(&c, &reference));
                let (lower, upper) = chain.normalized_contamination(r.j).unwrap_or((LogNum::ZERO, LogNum::ONE));
                levels.push(LevelKs {
                    level: r.j,
                    horizon: i,
                    ks: ks_distance(&s, &reference),
                    chain_ks,
                    lower_sd: lower.value(),
                    upper_active: upper.value(),
                });
            }
            Err(e) => skipped.push((r.j, e.to_string())),
        }
    }
    LimitTrend { levels, skipped }
}

/// Checks on a limit trend: strictly decreasing KS and final distance at most `tol`.
pub fn limit_trend_checks(t: &LimitTrend, tol: f64) -> Vec<Check> {
    let note = if t.skipped.is_empty() {
        String::new()
    } else {
        let s: Vec<String> = t.skipped.iter().map(|(j, why)| format!("level {j}: {why}")).collect();
        format!("skipped {}", s.join("; "))
    };
    let Some(last) = t.levels.last() else {
        return vec![Check::skipped("limit_law_ks", "KS to the compound Poisson-Laplace law", note)];
    };
    let trace: Vec<String> = t
        .levels
        .iter()
        .map(|l| {
            let whole = l.chain_ks.map_or("not simulated".to_string(), |k| format!("{k:.4}"));
            format!(
                "level {}: {:.4} (whole sum {whole}, lower levels sd {:.2e}, higher levels active w.p. <= {:.2e})",
                l.level, l.ks, l.lower_sd, l.upper_active
            )
        })
        .collect();
    let mut out = Vec::new();
    if t.levels.len() >= 2 {
        let items = t.levels.windows(2).map(|w| (format!("level {}", w[1].level), w[1].ks, w[0].ks - 1e-300));
        let mut c = worst_at_most("limit_law_ks_decreasing", "KS distance strictly decreasing in the level", 0.0, items);
        c.note = trace.join(", ");
        out.push(c);
    }
    out.push(
        Check::at_most("limit_law_ks_final", "KS distance at the largest feasible level", last.ks, tol, 0.0)
            .with_note(if note.is_empty() { trace.join(", ") } else { format!("{}; {note}", trace.join(", ")) }),
    );
    out
}

/// Concentration of `S_n / sqrt(n)` at width 1 for each `n`.
pub fn dissipation_profile(
    chain: &SuperChain,
    ns: &[u64],
    n_rep: usize,
    seed: u64,
    budget: f64,
) -> Result<Vec<(u64, f64)>, SuperError> {
    ns.iter()
        .map(|&n| chain.scaled_sums(n, n_rep, seed, budget).map(|s| (n, concentration(&s, 1.0))))
        .collect()
}

pub fn dissipation_check(profile: &[(u64, f64)], slack: f64) -> Check {
    let items = profile.windows(2).map(|w| (format!("n = {}", w[1].0), w[1].1, w[0].1));
    let mut c = worst_at_most("concentration_nonincreasing", "concentration of S_n/sqrt(n) at width 1 nonincreasing in n", 0.0, items);
    c.tolerance = slack;
    c.status = if c.slack >= -slack || c.slack.is_nan() { Status::Pass } else { Status::Fail };
    let trace: Vec<String> = profile.iter().map(|(n, v)| format!("n = {n}: {v:.4}")).collect();
    c.note = trace.join(", ");
    c
}

/// Rate functions matching a schedule kind.
pub enum Rates<'a> {
    Variance { q: &'a dyn RateFn },
    Mixing { g: &'a dyn RateFn },
    Tail { phi: &'a dyn ConvexRate, g: &'a dyn RateFn },
}

impl Rates<'_> {
    pub fn kind(&self) -> ScheduleKind {
        match self {
            Rates::Variance { .. } => ScheduleKind::Variance,
            Rates::Mixing { .. } => ScheduleKind::Mixing,
            Rates::Tail { .. } => ScheduleKind::Tail,
        }
    }
}

/// Sizes and cost limits of the Monte Carlo and grid checks.
#[derive(Debug, Clone, Serialize)]
pub struct Budget {
    /// Expected simulated sojourns allowed per Monte Carlo check.
    pub max_sojourns: f64,
    pub replicates: usize,
    pub limit_replicates: usize,
    pub dissipation_ns: Vec<u64>,
    pub dissipation_slack: f64,
    pub limit_tolerance: f64,
    pub beta_n_max: u64,
    pub variance_window: u64,
    pub x_grid: Vec<f64>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_sojourns: DEFAULT_BUDGET,
            replicates: 10_000,
            limit_replicates: 100_000,
            dissipation_ns: vec![100, 1000, 10_000],
            dissipation_slack: 0.02,
            limit_tolerance: 0.05,
            beta_n_max: 500,
            variance_window: 1000,
            x_grid: (1..=512).map(|k| 2.0 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationBounds {
    pub levels: usize,
    pub eps_tail: f64,
    pub ln_eps_tail: f64,
    pub beta_tail: f64,
    pub var_tail: f64,
    pub ln_var_tail: f64,
}

/// Outcome of a verification run. Field order is the serialization order.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub kind: String,
    pub version: String,
    pub config_digest: String,
    pub inputs: String,
    pub seeds: Vec<u64>,
    pub truncation: TruncationBounds,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl RunReport {
    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail).collect()
    }
}

fn truncation_bounds(chain: &SuperChain) -> TruncationBounds {
    TruncationBounds {
        levels: chain.truncation_j,
        eps_tail: chain.trunc_eps_tail.value(),
        ln_eps_tail: chain.trunc_eps_tail.ln(),
        beta_tail: 6.0 * chain.trunc_eps_tail.value(),
        var_tail: chain.trunc_var_tail.value(),
        ln_var_tail: chain.trunc_var_tail.ln(),
    }
}

fn prefixed(prefix: &str, checks: Vec<Check>) -> impl Iterator<Item = Check> + '_ {
    checks.into_iter().map(move |mut c| {
        c.name = format!("{prefix}/{}", c.name);
        c
    })
}

/// `|X_k| <= sum h_j <= 1/2` for bounded-value schedules.
fn bounded_values_check(chain: &SuperChain) -> Check {
    let total: LogNum = chain.levels().iter().map(|r| r.h).sum();
    Check::at_most("sup_abs_value", "sum of h_j <= 1/2 bounds |X_k|", total.value(), 0.5, 1e-15)
}

fn second_moment_check(chain: &SuperChain) -> Check {
    let want = chain.second_moment();
    match abs_law(chain).and_then(|l| quantile_of(&l)) {
        Ok(q) => {
            let got = q.tail_integral(LogNum::ONE);
            let d = (got.ln() - want.ln()).abs();
            Check::at_most("second_moment_identity", "int_0^1 Q_|X_0|^2 = sum h_j^2 eps_j (relative)", d, 0.0, 1e-10)
                .with_note(format!("ln E(X_0^2) = {:.12}", want.ln()))
        }
        Err(e) => Check::skipped("second_moment_identity", "int_0^1 Q^2 = E(X_0^2)", e.to_string()),
    }
}

fn variance_growth_check(chain: &SuperChain, q: &dyn RateFn, window: u64) -> Check {
    let Some(m1) = chain.levels()[0].m else {
        return Check::skipped("variance_growth", "Var(S_n) >= q_n n^2 from M_1 on", "M_1 not stored");
    };
    let mut items = Vec::new();
    for k in 0..=window {
        let n = m1 + LogNum::new(k as f64);
        let lhs = chain.super_variance(n).ln();
        let rhs = q.ln_value_at_ln(n.ln()) + 2.0 * n.ln();
        items.push((format!("n = M_1 + {k}"), rhs, lhs));
    }
    let mut c = worst_at_most(
        "variance_growth",
        "q_n n^2 <= Var(S_n) for n in [M_1, M_1 + window], logarithms",
        1e-12,
        items,
    );
    if m1.ln() > 53.0 * std::f64::consts::LN_2 {
        c.note = format!("{}; M_1 = e^{:.6} exceeds 2^53, so every n in the window rounds to M_1", c.note, m1.ln());
    }
    c
}

fn beta_bound_check(chain: &SuperChain, n_max: u64, rate: &dyn Fn(u64) -> f64, what: &str) -> Check {
    let items = (1..=n_max).map(|n| (format!("n = {n}"), chain.super_beta_bound(n).ln(), rate(n)));
    worst_at_most("beta_bound", &format!("sum_j beta_j(n) + 6 sum_(j>J) eps_j <= {what}, n <= {n_max}, logarithms"), 1e-12, items)
}

fn exact_beta_consistency(chain: &SuperChain) -> Check {
    if chain.truncation_j > 4 || chain.level_kernels.iter().any(Option::is_none) {
        return Check::skipped("beta_exact_below_bound", "exact truncated beta <= level sum", "needs J <= 4 representable levels");
    }
    let mut items = Vec::new();
    for n in [1u64, 2, 5, 10, 50] {
        match chain.super_beta_exact_small(n) {
            Ok(b) => {
                let sum: f64 = chain.levels().iter().map(|r| crate::superposed::block_beta(r.epsilon, r.theta, n).value()).sum();
                items.push((format!("n = {n}"), b, sum));
            }
            Err(e) => return Check::skipped("beta_exact_below_bound", "exact truncated beta <= level sum", e.to_string()),
        }
    }
    worst_at_most("beta_exact_below_bound", "exact beta of the truncated chain <= sum of level betas", 1e-12, items)
}

/// Runs every check that applies to the chain's schedule kind.
pub fn verify_theorem(chain: &SuperChain, rates: &Rates, budget: &Budget, seed: u64) -> RunReport {
    let mut checks: Vec<Check> = Vec::new();
    if chain.schedule.kind != rates.kind() {
        checks.push(Check::flag(
            "kind_matches",
            "schedule kind matches the requested verification",
            false,
            format!("schedule is {}, rates are {}", chain.schedule.kind.name(), rates.kind().name()),
        ));
    }
    let mut truncated = chain.schedule.clone();
    truncated.levels.truncate(chain.truncation_j);
    checks.extend(prefixed("schedule", validate_schedule(&truncated)));
    checks.push(second_moment_check(chain));

    match rates {
        Rates::Variance { q } => {
            checks.push(bounded_values_check(chain));
            checks.push(variance_growth_check(chain, *q, budget.variance_window));
        }
        Rates::Mixing { g } => {
            checks.push(bounded_values_check(chain));
            checks.push(beta_bound_check(chain, budget.beta_n_max, &|n| g.ln_value_at_ln((n as f64).ln()) - (n as f64).ln(), "g_n / n"));
            checks.push(exact_beta_consistency(chain));
        }
        Rates::Tail { phi, g } => {
            checks.push(beta_bound_check(chain, budget.beta_n_max, &|n| phi.value(n as f64), "f(n)"));
            match verify_tail_quantile_bound(chain, *phi, *g, &budget.x_grid) {
                Ok(cs) => checks.extend(cs),
                Err(e) => checks.push(Check::skipped("ln_tail_quantile_integral", "quantile tail bound", e.to_string())),
            }
        }
    }

    let ns = &budget.dissipation_ns;
    match dissipation_profile(chain, ns, budget.replicates, seed, budget.max_sojourns) {
        Ok(p) => checks.push(dissipation_check(&p, budget.dissipation_slack)),
        Err(e) => checks.push(Check::skipped("concentration_nonincreasing", "concentration of S_n/sqrt(n)", e.to_string())),
    }
    let trend = limit_law_trend(chain, budget.limit_replicates, seed, budget.max_sojourns);
    checks.extend(limit_trend_checks(&trend, budget.limit_tolerance));

    let passed = checks.iter().all(Check::passed);
    RunReport {
        kind: chain.schedule.kind.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_digest: String::new(),
        inputs: chain.schedule.inputs.clone(),
        seeds: vec![seed],
        truncation: truncation_bounds(chain),
        checks,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_two_point() {
        let d = DiscreteDist::new(vec![0.0f64, 1.0], vec![0.9, 0.1], 0.0).unwrap();
        let q = quantile_of(&d).unwrap();
        assert_eq!(q.eval(0.05), 1.0);
        assert_eq!(q.eval(0.1), 0.0);
        assert_eq!(q.eval(0.5), 0.0);
        assert!((q.tail_integral(1.0) - 0.1).abs() < 1e-16);
        assert!((q.tail_integral(0.05) - 0.05).abs() < 1e-16);
        let z = quantile_of(&DiscreteDist::point(0.0)).unwrap();
        assert_eq!(z.eval(0.3), 0.0);
        let neg = DiscreteDist::new(vec![-1.0, 1.0], vec![0.5, 0.5], 0.0).unwrap();
        assert!(quantile_of(&neg).is_err());
    }

    #[test]
    fn concentration_examples() {
        assert_eq!(concentration(&[2.0; 10], 1.0), 1.0);
        let grid: Vec<f64> = (0..=10_000).map(|k| k as f64 / 100.0).collect();
        let c = concentration(&grid, 1.0);
        assert!((c - 0.02).abs() < 0.001, "{c}");
        assert!(concentration(&grid, 2.0) >= c);
    }

    #[test]
    fn quantile_intervals_pass() {
        let checks = verify_quantile_intervals(&[1.0, 2.0, 4.0, 8.0], &[0.25, 0.0625, 0.015625, 0.00390625]).unwrap();
        assert!(checks.iter().all(Check::passed), "{checks:#?}");
        let one = verify_quantile_intervals(&[3.0], &[0.49]).unwrap();
        assert!(one.iter().all(Check::passed));
        assert!(verify_quantile_intervals(&[3.0], &[0.5]).is_err());
    }

    #[test]
    fn abs_law_moment_identity() {
        let c = SuperChain::from_blocks(&[(1.0 / 9.0, 1.0 / 9.0, 1.0), (1.0 / 81.0, 1.0 / 27.0, 3.0), (1.0 / 729.0, 1.0 / 81.0, 9.0)]).unwrap();
        let q = quantile_of(&abs_law(&c).unwrap()).unwrap();
        let want = 1.0 / 9.0 + 9.0 / 81.0 + 81.0 / 729.0;
        assert!((q.tail_integral(LogNum::ONE).value() - want).abs() < 1e-12);
    }
}
