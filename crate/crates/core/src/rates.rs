//! Rate functions and sequences driving the schedule recursions.
//!
//! Every function can be evaluated at `x = e^u` given only `u`, so searches can
//! run far past the f64 range of `x` itself.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

/// A real function on `[1, inf)` (also used for sequences, read at integers).
pub trait RateFn: Send + Sync {
    fn value(&self, x: f64) -> f64;

    fn value_at_ln(&self, u: f64) -> f64 {
        self.value(u.exp())
    }

    fn ln_value_at_ln(&self, u: f64) -> f64 {
        self.value_at_ln(u).ln()
    }

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateTag {
    LogPower,
    LogOfF,
    UserSupplied,
}

/// Convex, strictly decreasing `phi <= 0` on `[1, inf)` with its derivative.
pub trait ConvexRate: Send + Sync {
    fn value(&self, x: f64) -> f64;

    fn derivative(&self, x: f64) -> f64;

    fn value_at_ln(&self, u: f64) -> f64 {
        self.value(u.exp())
    }

    /// `ln(-phi'(e^u))`.
    fn ln_neg_slope_at_ln(&self, u: f64) -> f64 {
        (-self.derivative(u.exp())).ln()
    }

    /// `ln(x * -phi'(x))` at `x = e^u`.
    fn ln_elasticity_at_ln(&self, u: f64) -> f64 {
        u + self.ln_neg_slope_at_ln(u)
    }

    /// Tangent intercept `phi(x) + x * (-phi'(x))` at `x = e^u`.
    fn intercept_at_ln(&self, u: f64) -> f64 {
        self.value_at_ln(u) + self.ln_elasticity_at_ln(u).exp()
    }

    fn tag(&self) -> RateTag;

    fn describe(&self) -> String;
}

/// `q_n = 1 / log(n + 2)`.
#[derive(Debug, Clone, Copy)]
pub struct LogInverse;

impl RateFn for LogInverse {
    fn value(&self, x: f64) -> f64 {
        1.0 / (x + 2.0).ln()
    }
    fn value_at_ln(&self, u: f64) -> f64 {
        1.0 / ln_x_plus(u, 2.0)
    }
    fn describe(&self) -> String {
        "log-inverse: q_n = 1/log(n+2)".into()
    }
}

/// `ln(e^u + c)` without forming `e^u`.
fn ln_x_plus(u: f64, c: f64) -> f64 {
    if u > 0.0 {
        u + (c * (-u).exp()).ln_1p()
    } else {
        (u.exp() + c).ln()
    }
}

/// `g(x) = log(x + shift)`; shift 3 is the `log` sequence preset, shift e the
/// continuous companion used with quantile tail bounds.
#[derive(Debug, Clone, Copy)]
pub struct LogShift {
    pub shift: f64,
}

impl RateFn for LogShift {
    fn value(&self, x: f64) -> f64 {
        (x + self.shift).ln()
    }
    fn value_at_ln(&self, u: f64) -> f64 {
        ln_x_plus(u, self.shift)
    }
    fn ln_value_at_ln(&self, u: f64) -> f64 {
        self.value_at_ln(u).ln()
    }
    fn describe(&self) -> String {
        if self.shift == 3.0 {
            "log: g_n = log(n+3)".into()
        } else if self.shift == std::f64::consts::E {
            "log: g(x) = log(e+x)".into()
        } else {
            format!("log: g(x) = log(x+{})", self.shift)
        }
    }
}

/// `g(x) = x`.
#[derive(Debug, Clone, Copy)]
pub struct Linear;

impl RateFn for Linear {
    fn value(&self, x: f64) -> f64 {
        x
    }
    fn value_at_ln(&self, u: f64) -> f64 {
        u.exp()
    }
    fn ln_value_at_ln(&self, u: f64) -> f64 {
        u
    }
    fn describe(&self) -> String {
        "linear: g(x) = x".into()
    }
}

/// `phi(x) = -p log x`, i.e. `f(x) = x^{-p}`.
#[derive(Debug, Clone, Copy)]
pub struct PowerRate {
    pub p: f64,
}

impl ConvexRate for PowerRate {
    fn value(&self, x: f64) -> f64 {
        -self.p * x.ln()
    }
    fn derivative(&self, x: f64) -> f64 {
        -self.p / x
    }
    fn value_at_ln(&self, u: f64) -> f64 {
        -self.p * u
    }
    fn ln_neg_slope_at_ln(&self, u: f64) -> f64 {
        self.p.ln() - u
    }
    fn ln_elasticity_at_ln(&self, _u: f64) -> f64 {
        self.p.ln()
    }
    fn tag(&self) -> RateTag {
        RateTag::LogPower
    }
    fn describe(&self) -> String {
        format!("power:{} (f(x) = x^-{})", self.p, self.p)
    }
}

/// `phi(x) = -x^q`, i.e. `f(x) = exp(-x^q)`, `0 < q < 1`.
#[derive(Debug, Clone, Copy)]
pub struct SubexpRate {
    pub q: f64,
}

impl ConvexRate for SubexpRate {
    fn value(&self, x: f64) -> f64 {
        -x.powf(self.q)
    }
    fn derivative(&self, x: f64) -> f64 {
        -self.q * x.powf(self.q - 1.0)
    }
    fn value_at_ln(&self, u: f64) -> f64 {
        -(self.q * u).exp()
    }
    fn ln_neg_slope_at_ln(&self, u: f64) -> f64 {
        self.q.ln() + (self.q - 1.0) * u
    }
    fn ln_elasticity_at_ln(&self, u: f64) -> f64 {
        self.q.ln() + self.q * u
    }
    fn tag(&self) -> RateTag {
        RateTag::LogOfF
    }
    fn describe(&self) -> String {
        format!("subexp:{} (f(x) = exp(-x^{}))", self.q, self.q)
    }
}

type Scalar1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Convex rate given by closures for the value and the derivative.
#[derive(Clone)]
pub struct UserRate {
    pub name: String,
    pub value: Scalar1,
    pub derivative: Scalar1,
}

impl fmt::Debug for UserRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UserRate({})", self.name)
    }
}

impl ConvexRate for UserRate {
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }
    fn tag(&self) -> RateTag {
        RateTag::UserSupplied
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Real function given by a closure.
#[derive(Clone)]
pub struct UserFn {
    pub name: String,
    pub f: Scalar1,
}

impl RateFn for UserFn {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// `-phi'` of a convex rate, a positive nonincreasing function.
pub struct NegSlope<'a>(pub &'a dyn ConvexRate);

impl RateFn for NegSlope<'_> {
    fn value(&self, x: f64) -> f64 {
        -self.0.derivative(x)
    }
    fn value_at_ln(&self, u: f64) -> f64 {
        self.0.ln_neg_slope_at_ln(u).exp()
    }
    fn ln_value_at_ln(&self, u: f64) -> f64 {
        self.0.ln_neg_slope_at_ln(u)
    }
    fn describe(&self) -> String {
        format!("-d/dx [{}]", self.0.describe())
    }
}

/// `f = exp(phi)` of a convex rate.
pub struct ExpOf<'a>(pub &'a dyn ConvexRate);

impl RateFn for ExpOf<'_> {
    fn value(&self, x: f64) -> f64 {
        self.0.value(x).exp()
    }
    fn value_at_ln(&self, u: f64) -> f64 {
        self.0.value_at_ln(u).exp()
    }
    fn ln_value_at_ln(&self, u: f64) -> f64 {
        self.0.value_at_ln(u)
    }
    fn describe(&self) -> String {
        format!("exp of [{}]", self.0.describe())
    }
}
