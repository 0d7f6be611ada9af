//! Exponential integral `E1` and the scaled form `e^x E1(x)`.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this argument the power series is used, above it the continued fraction.
pub const E1_SWITCH: f64 = 1.5;

fn e1_series(x: f64) -> f64 {
    // E1(x) = -gamma - ln x + sum_{k>=1} (-1)^{k+1} x^k / (k k!)
    let mut term = 1.0; // x^k / k!
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= x / kf;
        let contrib = term / kf;
        if k % 2 == 1 {
            sum += contrib;
        } else {
            sum -= contrib;
        }
        if contrib < 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

/// `e^x E1(x)` by the modified Lentz continued fraction, valid for `x > 0`
/// and fast for `x` above about one.
fn scaled_e1_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `E1(a) = int_a^inf e^{-s} / s ds` for `a > 0`.
pub fn exp_integral_e1(a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("E1 needs a finite positive argument, got {a}")));
    }
    if a <= E1_SWITCH {
        Ok(e1_series(a))
    } else {
        Ok(scaled_e1_continued_fraction(a) * (-a).exp())
    }
}

/// `e^a E1(a)` without overflow for large `a`.
pub fn scaled_exp_integral_e1(a: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("E1 needs a finite positive argument, got {a}")));
    }
    if a <= E1_SWITCH {
        Ok(a.exp() * e1_series(a))
    } else {
        Ok(scaled_e1_continued_fraction(a))
    }
}

/// `1 - x e^x E1(x)` for `x > 0`, accurate also when `x` is large and the
/// difference is close to `1/x`.
pub fn one_minus_x_scaled_e1(x: f64) -> Result<f64> {
    if x >= 50.0 {
        // asymptotic: sum_{k>=1} (-1)^{k+1} k! / x^k
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..=30 {
            term *= k as f64 / x;
            if k % 2 == 1 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        return Ok(sum);
    }
    Ok(1.0 - x * scaled_exp_integral_e1(x)?)
}
