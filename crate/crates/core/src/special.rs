//! Special functions for the non-steep density example: the upper incomplete
//! gamma function at order `-1/2` and the integral
//! `C(θ, a) = ∫_0^∞ (a+x)^{-3/2} e^{-θx} dx`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// A value in `(-∞, +∞]`; divergent integrals are data, not errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(*v),
            Extended::Infinite => None,
        }
    }

    /// `f64` view, `+∞` for divergent values.
    pub fn to_f64(&self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

// below this the erfc identity loses at most ~1 digit to cancellation
const IDENTITY_CUTOFF: f64 = 8.0;

/// `e^x Γ(-1/2, x)` for `x > 0`.
fn scaled_upper_gamma_half(x: f64) -> f64 {
    if x <= IDENTITY_CUTOFF {
        // Γ(-1/2,x) = 2 x^{-1/2} e^{-x} - 2√π (1 - P(1/2,x)),  1 - P(1/2,x) = erfc(√x)
        2.0 / x.sqrt() - 2.0 * SQRT_PI * x.exp() * libm::erfc(x.sqrt())
    } else {
        // Legendre continued fraction, modified Lentz
        let a = -0.5;
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        x.powf(a) * h
    }
}

/// Upper incomplete gamma `Γ(-1/2, x) = ∫_x^∞ s^{-3/2} e^{-s} ds` for `x > 0`.
pub fn upper_incomplete_gamma_half(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "incomplete gamma needs finite x > 0, got {x}"
        )));
    }
    Ok((-x).exp() * scaled_upper_gamma_half(x))
}

/// `C(θ, a) = ∫_0^∞ (a+x)^{-3/2} e^{-θx} dx`, infinite for `θ < 0`.
pub fn c_integral(theta: f64, a: f64) -> Result<Extended> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("C(θ,a) needs a > 0, got {a}")));
    }
    if theta.is_nan() {
        return Err(Error::InvalidArgument("θ is NaN".into()));
    }
    Ok(if theta < 0.0 {
        Extended::Infinite
    } else if theta == 0.0 {
        Extended::Finite(2.0 / a.sqrt())
    } else {
        Extended::Finite(theta.sqrt() * scaled_upper_gamma_half(theta * a))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_arguments() {
        assert!(upper_incomplete_gamma_half(0.0).is_err());
        assert!(upper_incomplete_gamma_half(-1.0).is_err());
        assert!(c_integral(1.0, 0.0).is_err());
    }

    #[test]
    fn tail_vanishes() {
        let v = upper_incomplete_gamma_half(50.0).unwrap();
        assert!(v > 0.0 && v < 1e-23);
    }

    #[test]
    fn branches_agree_at_cutoff() {
        let x = IDENTITY_CUTOFF;
        let identity = 2.0 / x.sqrt() - 2.0 * SQRT_PI * x.exp() * libm::erfc(x.sqrt());
        let cf = scaled_upper_gamma_half(x * (1.0 + 1e-15));
        assert!((identity - cf).abs() / cf < 1e-12, "{identity} vs {cf}");
    }

    #[test]
    fn c_integral_cases() {
        assert_eq!(c_integral(0.0, 4.0).unwrap(), Extended::Finite(1.0));
        assert_eq!(c_integral(-0.1, 4.0).unwrap(), Extended::Infinite);
        assert!(c_integral(1.0, 0.5).unwrap().is_finite());
    }
}
