//! The family g_{a,p}, the compound Poisson(1)-Laplace law and distances
//! between distributions.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::Serialize;
use thiserror::Error;

use crate::rng::{self, open_uniform};
use crate::scalar::Weight;

#[derive(Debug, Error, PartialEq)]
pub enum LimitError {
    #[error("{name} = {value} must lie in (0, 1)")]
    Param { name: &'static str, value: f64 },
    #[error("truncated mass {tail:e} exceeds the precision limit 1e-6")]
    Precision { tail: f64 },
    #[error("distribution support must be integer valued")]
    NotInteger,
    #[error("invalid distribution: {0}")]
    Invalid(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Finite distribution: strictly increasing support, probabilities, and the
/// mass dropped by truncation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDist<T> {
    pub support: Vec<T>,
    pub probs: Vec<T>,
    pub tail_mass: T,
}

impl<T: Weight> DiscreteDist<T> {
    pub fn new(support: Vec<T>, probs: Vec<T>, tail_mass: T) -> Result<Self, LimitError> {
        if support.len() != probs.len() {
            return Err(LimitError::Invalid("support and probs differ in length".into()));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(LimitError::Invalid("support not strictly increasing".into()));
        }
        if probs.iter().any(|p| !(*p >= T::zero())) {
            return Err(LimitError::Invalid("negative probability".into()));
        }
        let total = probs.iter().fold(tail_mass, |a, &b| a + b).to_f();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LimitError::Invalid(format!("total mass {total}")));
        }
        Ok(DiscreteDist { support, probs, tail_mass })
    }

    /// Sorts and merges equal support points.
    pub fn from_pairs(mut pairs: Vec<(T, T)>) -> Result<Self, LimitError> {
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("comparable support"));
        let mut support: Vec<T> = Vec::with_capacity(pairs.len());
        let mut probs: Vec<T> = Vec::with_capacity(pairs.len());
        for (x, p) in pairs {
            match support.last() {
                Some(last) if *last == x => {
                    let q = probs.last_mut().unwrap();
                    *q = *q + p;
                }
                _ => {
                    support.push(x);
                    probs.push(p);
                }
            }
        }
        Self::new(support, probs, T::zero())
    }

    pub fn point(x: T) -> Self {
        DiscreteDist { support: vec![x], probs: vec![T::one()], tail_mass: T::zero() }
    }

    pub fn mass_at(&self, x: T) -> T {
        match self.support.binary_search_by(|s| s.partial_cmp(&x).unwrap()) {
            Ok(i) => self.probs[i],
            Err(_) => T::zero(),
        }
    }
}

impl DiscreteDist<f64> {
    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support.iter().zip(&self.probs).map(|(x, p)| (x - m) * (x - m) * p).sum()
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<(), LimitError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(LimitError::Param { name, value: v })
    }
}

/// Probability function of g_{a,p}: `1 - a` at 0, `(a/2) p (1-p)^{|k|-1}` elsewhere.
pub fn g_pmf(a: f64, p: f64, k: i64) -> Result<f64, LimitError> {
    check_unit("a", a)?;
    check_unit("p", p)?;
    Ok(if k == 0 { 1.0 - a } else { 0.5 * a * p * ((k.unsigned_abs() - 1) as f64 * (-p).ln_1p()).exp() })
}

/// g_{a,p} restricted to `|k| <= K` with the geometric remainder `a (1-p)^K`
/// recorded as tail mass; `K` is the smallest value with remainder below `tail`.
pub fn g_dist(a: f64, p: f64, tail: f64) -> Result<DiscreteDist<f64>, LimitError> {
    check_unit("a", a)?;
    check_unit("p", p)?;
    let l = (-p).ln_1p();
    let k_max = ((tail / a).ln() / l).ceil().max(1.0) as i64;
    let support: Vec<f64> = (-k_max..=k_max).map(|k| k as f64).collect();
    let probs: Vec<f64> = (-k_max..=k_max).map(|k| g_pmf(a, p, k).unwrap()).collect();
    let tail_mass = a * (k_max as f64 * l).exp();
    Ok(DiscreteDist { support, probs, tail_mass })
}

/// Magnitude of a g_{a,p} draw given that it is nonzero: geometric on {1, 2, ...}.
fn geometric_from_uniform(u: f64, log_q: f64) -> i64 {
    1 + (u.ln() / log_q).floor() as i64
}

/// `count` independent draws from g_{a,p}.
pub fn g_sampler(a: f64, p: f64, seed: u64, count: usize) -> Result<Vec<i64>, LimitError> {
    check_unit("a", a)?;
    check_unit("p", p)?;
    let mut rng = rng::stream(seed, 0, 0);
    let log_q = (-p).ln_1p();
    Ok((0..count)
        .map(|_| {
            if rng.random::<f64>() >= a {
                return 0;
            }
            let m = geometric_from_uniform(open_uniform(&mut rng), log_q);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect())
}

/// Draws of `Y = eta_1 + ... + eta_N`, `N ~ Poisson(1)`, `eta_k` iid Laplace.
pub fn sample_mu_p1sl(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = rng::stream(seed, 0, 0);
    let poisson = Poisson::new(1.0).expect("valid mean");
    (0..count)
        .map(|_| {
            let n = poisson.sample(&mut rng) as u64;
            (0..n)
                .map(|_| {
                    let e: f64 = Exp1.sample(&mut rng);
                    if rng.random::<bool>() {
                        e
                    } else {
                        -e
                    }
                })
                .sum()
        })
        .collect()
}

/// Characteristic function of the compound Poisson(1)-Laplace law.
pub fn mu_p1sl_cf(t: f64) -> f64 {
    (-t * t / (1.0 + t * t)).exp()
}

struct Dense {
    offset: i64,
    probs: Vec<f64>,
    tail: f64,
}

impl Dense {
    fn from_dist(d: &DiscreteDist<f64>) -> Result<Self, LimitError> {
        if d.support.iter().any(|x| x.fract() != 0.0) {
            return Err(LimitError::NotInteger);
        }
        let lo = d.support[0] as i64;
        let hi = *d.support.last().unwrap() as i64;
        let mut probs = vec![0.0; (hi - lo + 1) as usize];
        for (x, p) in d.support.iter().zip(&d.probs) {
            probs[(*x as i64 - lo) as usize] = *p;
        }
        Ok(Dense { offset: lo, probs, tail: d.tail_mass })
    }

    fn convolve(&self, other: &Dense, drop: f64) -> Dense {
        let mut out = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, &a) in self.probs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, &b) in out[i..].iter_mut().zip(&other.probs) {
                *o += a * b;
            }
        }
        let tail = self.tail + other.tail - self.tail * other.tail;
        let mut d = Dense { offset: self.offset + other.offset, probs: out, tail };
        d.trim(drop);
        d
    }

    /// Drops outer cells whose cumulative mass from either end stays below `drop`.
    fn trim(&mut self, drop: f64) {
        let mut lo = 0;
        let mut acc = 0.0;
        while lo + 1 < self.probs.len() && acc + self.probs[lo] < drop {
            acc += self.probs[lo];
            lo += 1;
        }
        let mut hi = self.probs.len();
        let mut acc_hi = 0.0;
        while hi > lo + 1 && acc_hi + self.probs[hi - 1] < drop {
            acc_hi += self.probs[hi - 1];
            hi -= 1;
        }
        self.tail += acc + acc_hi;
        self.probs = self.probs[lo..hi].to_vec();
        self.offset += lo as i64;
    }

    fn into_dist(self) -> DiscreteDist<f64> {
        let mut support = Vec::new();
        let mut probs = Vec::new();
        for (i, p) in self.probs.into_iter().enumerate() {
            if p > 0.0 {
                support.push((self.offset + i as i64) as f64);
                probs.push(p);
            }
        }
        DiscreteDist { support, probs, tail_mass: self.tail }
    }
}

/// Law of the sum of `count` independent copies of `base`; outer cells with
/// cumulative mass below `drop` are moved to the tail.
pub fn compound_pmf(base: &DiscreteDist<f64>, count: u64, drop: f64) -> Result<DiscreteDist<f64>, LimitError> {
    if count == 0 {
        return Err(LimitError::Precondition("count must be positive".into()));
    }
    if count == 1 {
        return Ok(base.clone());
    }
    let mut power = Dense::from_dist(base)?;
    let mut acc: Option<Dense> = None;
    let mut n = count;
    while n > 0 {
        if n & 1 == 1 {
            acc = Some(match acc {
                None => Dense { offset: power.offset, probs: power.probs.clone(), tail: power.tail },
                Some(a) => a.convolve(&power, drop),
            });
        }
        n >>= 1;
        if n > 0 {
            power = power.convolve(&power, drop);
        }
    }
    let out = acc.unwrap().into_dist();
    if out.tail_mass > 1e-6 {
        return Err(LimitError::Precision { tail: out.tail_mass });
    }
    Ok(out)
}

/// Total variation distance between integer laws, with both truncated tails
/// added as an upper-bound allowance.
pub fn tv_distance(x: &DiscreteDist<f64>, y: &DiscreteDist<f64>) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut s = 0.0;
    while i < x.support.len() || j < y.support.len() {
        let xi = x.support.get(i).copied().unwrap_or(f64::INFINITY);
        let yj = y.support.get(j).copied().unwrap_or(f64::INFINITY);
        if xi == yj {
            s += (x.probs[i] - y.probs[j]).abs();
            i += 1;
            j += 1;
        } else if xi < yj {
            s += x.probs[i];
            i += 1;
        } else {
            s += y.probs[j];
            j += 1;
        }
    }
    (0.5 * s + 0.5 * (x.tail_mass + y.tail_mass)).min(1.0)
}

/// Sup distance between the two empirical distribution functions.
pub fn ks_distance(sample: &[f64], reference: &[f64]) -> f64 {
    assert!(!sample.is_empty() && !reference.is_empty(), "ks_distance needs nonempty samples");
    let mut a = sample.to_vec();
    let mut b = reference.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d.max((i as f64 / na - j as f64 / nb).abs())
}

/// Sup distance between the empirical distribution function of `sample` and `cdf`.
pub fn ks_to_cdf(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!sample.is_empty(), "ks_to_cdf needs a nonempty sample");
    let mut a = sample.to_vec();
    a.sort_by(f64::total_cmp);
    let n = a.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < a.len() {
        let x = a[i];
        let lo = i as f64 / n;
        while i < a.len() && a[i] == x {
            i += 1;
        }
        let f = cdf(x);
        d = d.max((f - lo).abs()).max((i as f64 / n - f).abs());
    }
    d
}

/// KS distance to the centered normal law with standard deviation `sd`.
pub fn ks_to_normal(sample: &[f64], sd: f64) -> f64 {
    let law = statrs::distribution::Normal::new(0.0, sd).expect("positive finite sd");
    ks_to_cdf(sample, |x| statrs::distribution::ContinuousCDF::cdf(&law, x))
}

/// Inverse-CDF binomial draw from one uniform.
fn binomial_from_uniform(u: f64, n: u64, a: f64) -> u64 {
    let mut pk = (n as f64 * (-a).ln_1p()).exp();
    let mut cdf = pk;
    let ratio = a / (1.0 - a);
    let mut k = 0;
    while cdf < u && k < n {
        pk *= (n - k) as f64 / (k + 1) as f64 * ratio;
        k += 1;
        cdf += pk;
    }
    k
}

/// Scaled sums `p * (zeta_1 + ... + zeta_J)` with `zeta` iid g_{a,p}.
///
/// Replicate `r` uses the stream `(seed, 1, r)` whatever `(a, p, J)` is, so
/// runs over a sequence of parameters share their random numbers.
pub fn scaled_g_sums(a: f64, p: f64, j_count: u64, seed: u64, n_rep: usize) -> Result<Vec<f64>, LimitError> {
    check_unit("a", a)?;
    check_unit("p", p)?;
    let log_q = (-p).ln_1p();
    Ok((0..n_rep)
        .map(|r| {
            let mut rng = rng::stream(seed, 1, r as u64);
            let k = binomial_from_uniform(rng.random::<f64>(), j_count, a);
            let mut s = 0i64;
            for _ in 0..k {
                let m = geometric_from_uniform(open_uniform(&mut rng), log_q);
                s += if rng.random::<bool>() { m } else { -m };
            }
            p * s as f64
        })
        .collect())
}

/// KS distance between scaled g_{a,p} sums and an independent reference
/// sample of the compound Poisson(1)-Laplace law of the same size.
pub fn compound_convergence_ks(a: f64, p: f64, j_count: u64, seed: u64, n_rep: usize) -> Result<f64, LimitError> {
    let aj = a * j_count as f64;
    if !(0.5..=2.0).contains(&aj) {
        return Err(LimitError::Precondition(format!("a * J = {aj} outside [0.5, 2]")));
    }
    let sums = scaled_g_sums(a, p, j_count, seed, n_rep)?;
    let reference = sample_mu_p1sl(seed ^ 0x005E_ED0F_4EF5, n_rep);
    Ok(ks_distance(&sums, &reference))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_to_cdf_on_a_grid() {
        // Points k/n against the uniform law sit 1/n from the staircase.
        let xs: Vec<f64> = (1..=100).map(|k| k as f64 / 100.0).collect();
        let d = ks_to_cdf(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.01).abs() < 1e-12, "{d}");
        assert!(ks_to_normal(&[0.0], 1.0) == 0.5);
    }
    use approx::assert_relative_eq;

    #[test]
    fn g_pmf_examples() {
        assert_eq!(g_pmf(0.5, 0.5, 0).unwrap(), 0.5);
        assert_relative_eq!(g_pmf(0.5, 0.5, 2).unwrap(), 0.0625, max_relative = 1e-15);
        assert_eq!(g_pmf(0.5, 0.5, -3).unwrap(), g_pmf(0.5, 0.5, 3).unwrap());
        assert!(g_pmf(1.0, 0.5, 0).is_err());
        assert!(g_pmf(0.5, 0.0, 0).is_err());
    }

    #[test]
    fn g_dist_mass_is_one() {
        for &(a, p) in &[(0.5, 0.5), (0.01, 0.3), (1e-3, 1e-2)] {
            let d = g_dist(a, p, 1e-12).unwrap();
            let total: f64 = d.probs.iter().sum::<f64>() + d.tail_mass;
            assert!((total - 1.0).abs() < 1e-12);
            assert!(d.tail_mass < 1e-12);
        }
    }

    #[test]
    fn g_sampler_frequencies() {
        let draws = g_sampler(0.3, 0.4, 11, 1_000_000).unwrap();
        let zeros = draws.iter().filter(|&&z| z == 0).count() as f64 / 1e6;
        assert!((zeros - 0.7).abs() < 0.002);
        let mean = draws.iter().sum::<i64>() as f64 / 1e6;
        let var: f64 = draws.iter().map(|&z| (z * z) as f64).sum::<f64>() / 1e6;
        assert!(mean.abs() < 3.0 * (var / 1e6).sqrt());
        assert_eq!(g_sampler(0.3, 0.4, 11, 50).unwrap(), g_sampler(0.3, 0.4, 11, 50).unwrap());
    }

    #[test]
    fn compound_examples() {
        let base = g_dist(0.5, 0.5, 1e-15).unwrap();
        assert_eq!(compound_pmf(&base, 1, 0.0).unwrap(), base);
        let point = DiscreteDist::point(0.0);
        let p5 = compound_pmf(&point, 5, 0.0).unwrap();
        assert_eq!(p5.support, vec![0.0]);
        assert_eq!(p5.probs, vec![1.0]);
        let two = compound_pmf(&base, 2, 0.0).unwrap();
        let at0: f64 = base.probs.iter().map(|p| p * p).sum();
        assert_relative_eq!(two.mass_at(0.0), at0, max_relative = 1e-12);
        let sym = two.mass_at(3.0) - two.mass_at(-3.0);
        assert!(sym.abs() < 1e-16);
    }

    #[test]
    fn compound_reports_precision_failure() {
        let base = g_dist(0.5, 0.5, 1e-15).unwrap();
        assert!(matches!(compound_pmf(&base, 8, 1e-3), Err(LimitError::Precision { .. })));
    }

    #[test]
    fn tv_examples() {
        let x = DiscreteDist::new(vec![0.0, 1.0], vec![0.5, 0.5], 0.0).unwrap();
        let y = DiscreteDist::new(vec![0.0, 1.0], vec![0.25, 0.75], 0.0).unwrap();
        assert_relative_eq!(tv_distance(&x, &y), 0.25);
        assert_eq!(tv_distance(&x, &x), 0.0);
        let z = DiscreteDist::new(vec![5.0], vec![1.0], 0.0).unwrap();
        assert_eq!(tv_distance(&x, &z), 1.0);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_distance(&[0.0], &[1.0]), 1.0);
        assert_relative_eq!(ks_distance(&[0.0, 1.0], &[0.5]), 0.5);
    }

    #[test]
    fn mu_reference_samples_agree() {
        let a = sample_mu_p1sl(1, 100_000);
        let b = sample_mu_p1sl(2, 100_000);
        assert!(ks_distance(&a, &b) <= 0.01);
    }

    #[test]
    fn compound_convergence_robust_cases() {
        assert!(compound_convergence_ks(0.99, 0.5, 1, 3, 2000).unwrap() > 0.05);
        assert!(compound_convergence_ks(0.1, 0.1, 100, 3, 10).is_err());
        let d = compound_convergence_ks(0.02, 0.001, 50, 3, 20_000).unwrap();
        assert!(d < 0.05, "{d}");
    }

    #[test]
    fn binomial_inverse_cdf_edges() {
        assert_eq!(binomial_from_uniform(0.0, 10, 0.1), 0);
        assert_eq!(binomial_from_uniform(1.0, 10, 0.1), 10);
    }
}
