use serde::{Deserialize, Serialize};

/// The tabulated Young pairs `(Φ, Φ_*)` with `Φ(x) = ∫_0^|x| φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YoungPair {
    /// `φ = log(1+u)`, `Φ_* = e^|y| - 1 - |y|`.
    A,
    /// `φ = asinh u`, `Φ_* = cosh y - 1`.
    B,
    /// `φ = log⁺ u`, `Φ_* = e^|y| - 1`.
    C,
    /// `φ = u`, `Φ = x²/2`.
    Two,
    /// `Φ = cosh x - 1`, the conjugate side of pair (b).
    CoshMinusOne,
}

/// One side of a Young pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct YoungFunction {
    pub pair: YoungPair,
    pub conjugate: bool,
}

// (1+x)log(1+x) - x
fn phi_a(x: f64) -> f64 {
    if x < 1e-3 {
        x * x * (0.5 - x / 6.0 + x * x / 12.0)
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

// e^y - 1 - y
fn phi_a_star(y: f64) -> f64 {
    if y < 1e-3 {
        y * y * (0.5 + y / 6.0 + y * y / 24.0)
    } else {
        y.exp_m1() - y
    }
}

// x asinh x - sqrt(1+x^2) + 1
fn phi_b(x: f64) -> f64 {
    if x < 1e-3 {
        x * x * (0.5 - x * x / 24.0)
    } else {
        x * x.asinh() - x.hypot(1.0) + 1.0
    }
}

// cosh y - 1
fn cosh_m1(y: f64) -> f64 {
    let s = (0.5 * y).sinh();
    2.0 * s * s
}

fn phi_c(x: f64) -> f64 {
    if x <= 1.0 {
        0.0
    } else {
        x * x.ln() - (x - 1.0)
    }
}

impl YoungFunction {
    pub const fn new(pair: YoungPair) -> Self {
        Self {
            pair,
            conjugate: false,
        }
    }

    pub const fn cosh_minus_one() -> Self {
        Self::new(YoungPair::CoshMinusOne)
    }

    /// The other element of the pair.
    pub const fn conjugate(self) -> Self {
        Self {
            pair: self.pair,
            conjugate: !self.conjugate,
        }
    }

    fn primal(pair: YoungPair, x: f64) -> f64 {
        match pair {
            YoungPair::A => phi_a(x),
            YoungPair::B => phi_b(x),
            YoungPair::C => phi_c(x),
            YoungPair::Two => 0.5 * x * x,
            YoungPair::CoshMinusOne => cosh_m1(x),
        }
    }

    fn dual(pair: YoungPair, y: f64) -> f64 {
        match pair {
            YoungPair::A => phi_a_star(y),
            YoungPair::B => cosh_m1(y),
            YoungPair::C => y.exp_m1(),
            YoungPair::Two => 0.5 * y * y,
            YoungPair::CoshMinusOne => phi_b(y),
        }
    }

    fn derivative(pair: YoungPair, u: f64) -> f64 {
        match pair {
            YoungPair::A => u.ln_1p(),
            YoungPair::B => u.asinh(),
            YoungPair::C => u.ln().max(0.0),
            YoungPair::Two => u,
            YoungPair::CoshMinusOne => u.sinh(),
        }
    }

    fn derivative_inv(pair: YoungPair, v: f64) -> f64 {
        match pair {
            YoungPair::A => v.exp_m1(),
            YoungPair::B => v.sinh(),
            YoungPair::C => v.exp(),
            YoungPair::Two => v,
            YoungPair::CoshMinusOne => v.asinh(),
        }
    }

    /// `Φ(x)`, even in `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        if self.conjugate {
            Self::dual(self.pair, x)
        } else {
            Self::primal(self.pair, x)
        }
    }

    /// `Φ_*(y)`.
    pub fn eval_conjugate(&self, y: f64) -> f64 {
        self.conjugate().eval(y)
    }

    /// `φ(u) = Φ'(u)` for `u ≥ 0`.
    pub fn derivative_at(&self, u: f64) -> f64 {
        if self.conjugate {
            Self::derivative_inv(self.pair, u)
        } else {
            Self::derivative(self.pair, u)
        }
    }

    /// `φ^{-1}(v)` for `v ≥ 0` (the right-continuous inverse for pair (c)).
    pub fn derivative_inverse(&self, v: f64) -> f64 {
        if self.conjugate {
            Self::derivative(self.pair, v)
        } else {
            Self::derivative_inv(self.pair, v)
        }
    }

    /// `Φ^{-1}(y)` for `y > 0`, by bisection.
    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if !y.is_finite() {
            return f64::INFINITY;
        }
        let mut hi = 1.0;
        while self.eval(hi) < y {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn label(&self) -> String {
        let base = match self.pair {
            YoungPair::A => "a",
            YoungPair::B => "b",
            YoungPair::C => "c",
            YoungPair::Two => "two",
            YoungPair::CoshMinusOne => "cosh_minus_one",
        };
        if self.conjugate {
            format!("{base}*")
        } else {
            base.to_string()
        }
    }
}

impl std::str::FromStr for YoungFunction {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        let (name, conj) = match s.strip_suffix('*') {
            Some(n) => (n, true),
            None => (s, false),
        };
        let pair = match name {
            "a" => YoungPair::A,
            "b" => YoungPair::B,
            "c" => YoungPair::C,
            "two" | "2" => YoungPair::Two,
            "cosh" | "cosh_minus_one" | "cosh-1" => YoungPair::CoshMinusOne,
            other => {
                return Err(crate::Error::InvalidArgument(format!(
                    "unknown Young function {other:?}"
                )))
            }
        };
        let f = Self::new(pair);
        Ok(if conj { f.conjugate() } else { f })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [YoungPair; 5] = [
        YoungPair::A,
        YoungPair::B,
        YoungPair::C,
        YoungPair::Two,
        YoungPair::CoshMinusOne,
    ];

    fn grid() -> impl Iterator<Item = f64> {
        (-400..=400).map(|i| i as f64 * 0.02)
    }

    #[test]
    fn zero_even_convex() {
        for pair in ALL {
            for f in [YoungFunction::new(pair), YoungFunction::new(pair).conjugate()] {
                assert_eq!(f.eval(0.0), 0.0);
                let xs: Vec<f64> = grid().collect();
                for w in xs.windows(3) {
                    assert_eq!(f.eval(w[1]), f.eval(-w[1]));
                    let mid = f.eval(w[1]);
                    let chord = 0.5 * (f.eval(w[0]) + f.eval(w[2]));
                    assert!(mid <= chord + 1e-12 * chord.abs().max(1.0), "{f:?} at {}", w[1]);
                }
            }
        }
    }

    #[test]
    fn young_inequality_and_equality_case() {
        for pair in ALL {
            let f = YoungFunction::new(pair);
            for x in (0..60).map(|i| i as f64 * 0.1) {
                for y in (0..60).map(|i| i as f64 * 0.1) {
                    let lhs = x * y;
                    let rhs = f.eval(x) + f.eval_conjugate(y);
                    assert!(lhs <= rhs + 1e-10 * rhs.max(1.0), "{pair:?} {x} {y}");
                }
                if pair != YoungPair::C || x > 1.0 {
                    let y = f.derivative_at(x);
                    let rhs = f.eval(x) + f.eval_conjugate(y);
                    assert!((x * y - rhs).abs() <= 1e-9 * rhs.max(1.0), "{pair:?} equality at {x}");
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for pair in ALL {
            let f = YoungFunction::new(pair);
            for x in [0.3, 1.5, 2.5, 4.0] {
                let h = 1e-6;
                let fd = (f.eval(x + h) - f.eval(x - h)) / (2.0 * h);
                assert!((fd - f.derivative_at(x)).abs() < 1e-6, "{pair:?} {x}");
                let v = f.derivative_at(x);
                assert!((f.derivative_inverse(v) - x).abs() < 1e-9 || pair == YoungPair::C);
            }
        }
    }

    #[test]
    fn pairs_a_and_b_are_equivalent() {
        let a = YoungFunction::new(YoungPair::A);
        let b = YoungFunction::new(YoungPair::B);
        for x in (1..2000).map(|i| i as f64 * 0.05) {
            assert!(a.eval(x) <= b.eval(x) + 1e-15);
            for factor in [1.5, 2.0, 4.0] {
                assert!(b.eval(x) <= factor * a.eval(x) * (1.0 + 1e-12), "{x} {factor}");
            }
        }
    }

    #[test]
    fn delta2_for_pair_a() {
        let a = YoungFunction::new(YoungPair::A);
        for factor in [1.5, 2.0, 3.0, 10.0] {
            for x in (1..500).map(|i| i as f64 * 0.1) {
                assert!(a.eval(factor * x) <= factor * factor * a.eval(x) * (1.0 + 1e-12));
            }
        }
        // the conjugate fails Δ₂: Φ_*(2y)/Φ_*(y) grows without bound
        let s = a.conjugate();
        assert!(s.eval(40.0) / s.eval(20.0) > 1e8);
    }

    #[test]
    fn ordering_a_two_a_star() {
        let a = YoungFunction::new(YoungPair::A);
        let two = YoungFunction::new(YoungPair::Two);
        for x in (0..300).map(|i| i as f64 * 0.05) {
            assert!(a.eval(x) <= two.eval(x) + 1e-15);
            assert!(two.eval(x) <= a.eval_conjugate(x) + 1e-15);
        }
    }

    #[test]
    fn inverse_and_parse() {
        let f: YoungFunction = "cosh".parse().unwrap();
        assert!((f.inverse(1.0) - 2f64.acosh()).abs() < 1e-13);
        let g: YoungFunction = "a*".parse().unwrap();
        assert!(g.conjugate);
        assert!("zzz".parse::<YoungFunction>().is_err());
    }
}
