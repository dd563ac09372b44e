//! Exponential integral Ei.
//!
//! The BBED variance needs `Ei` on `[-2 ln k, 0)`. Negative arguments are
//! evaluated through `Ei(x) = -E1(-x)`: a power series for `-1 <= x < 0` and
//! a continued fraction for `x < -1`, where the power series loses digits to
//! alternating cancellation. Positive arguments use the power series up to 40
//! and the asymptotic expansion beyond.

use crate::error::{Error, Result};

/// Euler-Mascheroni constant, 20 significant digits.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_61;

const MAX_ABS_ARG: f64 = 700.0;
const EPS: f64 = 1e-17;

/// Principal-value exponential integral `Ei(x) = -PV int_{-x}^inf e^{-u}/u du`.
pub fn expint_ei(x: f64) -> Result<f64> {
    if x == 0.0 || x.is_nan() {
        return Err(Error::EiDomain);
    }
    if x.abs() > MAX_ABS_ARG {
        return Err(Error::EiOverflow(x.abs()));
    }
    Ok(if x < 0.0 {
        let u = -x;
        if u <= 1.0 {
            series(x)
        } else {
            -e1_continued_fraction(u)
        }
    } else if x <= 40.0 {
        series(x)
    } else {
        asymptotic(x)
    })
}

/// `gamma + ln|x| + sum x^n / (n n!)`
fn series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for n in 1..500 {
        let nf = n as f64;
        term *= x / nf;
        let contrib = term / nf;
        sum += contrib;
        if contrib.abs() <= EPS * sum.abs() {
            break;
        }
    }
    EULER_GAMMA + x.abs().ln() + sum
}

/// E1(u) for u > 1, modified Lentz evaluation of
/// `e^{-u} / (u + 1 - 1^2/(u + 3 - 2^2/(u + 5 - ...)))`.
fn e1_continued_fraction(u: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = u + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h * (-u).exp()
}

/// `e^x / x * sum k! / x^k`, truncated at the smallest term.
fn asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..(x as usize) {
        let next = term * k as f64 / x;
        if next > term {
            break;
        }
        term = next;
        sum += term;
        if term < EPS * sum {
            break;
        }
    }
    x.exp() / x * sum
}
