//! Deformed logarithms `ln_φ(v) = ∫_1^v dx/φ(x)`, their inverses, and the
//! model built on them: φ-norms, escort expectations, φ-connected arcs and
//! the φ-cumulant functional.

use serde::{Deserialize, Serialize};

use crate::measure::{check_base, Density, RandomVariable};
use crate::special::Extended;
use crate::{Error, Result};

const MAX_ITER: usize = 200;

/// A deformed-logarithm family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Family {
    /// `φ(x) = x^q`, `q ∈ (0, 1]`.
    Tsallis { q: f64 },
    /// `φ(x) = 2x / (x^κ + x^{-κ})`, `κ ∈ [0, 1)`.
    Kaniadakis { kappa: f64 },
    /// `φ(x) = x / (x + 1)`, so `ln_φ v = v - 1 + ln v`.
    Newton,
    /// `φ(x) = x`.
    Classical,
}

/// `φ`, `ln_φ` and `exp_φ` for one family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformedLogarithm {
    family: Family,
}

/// Builds a family from its tag (`tsallis`, `kaniadakis`, `newton`,
/// `classical`) and parameter.
pub fn make_deformed(tag: &str, param: Option<f64>) -> Result<DeformedLogarithm> {
    let need = |name: &str| {
        param.ok_or_else(|| Error::InvalidArgument(format!("{name} needs a parameter")))
    };
    let family = match tag {
        "tsallis" => Family::Tsallis { q: need("tsallis")? },
        "kaniadakis" => Family::Kaniadakis {
            kappa: need("kaniadakis")?,
        },
        "newton" => Family::Newton,
        "classical" => Family::Classical,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown deformed family {other:?}"
            )))
        }
    };
    DeformedLogarithm::new(family)
}

// ln v = e^s - 1 + s with s = ln v; solve g(s) = e^s + s - 1 - u = 0
fn newton_exp(u: f64) -> f64 {
    let (mut lo, mut hi) = if u >= 0.0 {
        (0.0, u.ln_1p())
    } else {
        (u, (u + 1.0).min(0.0))
    };
    let g = |s: f64| s.exp() + s - 1.0 - u;
    let mut s = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let gs = g(s);
        if gs.abs() <= 1e-15 * u.abs().max(1.0) {
            break;
        }
        if gs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let step = s - gs / (s.exp() + 1.0);
        s = if step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * s.abs().max(1e-300) {
            break;
        }
    }
    s.exp()
}

impl DeformedLogarithm {
    pub fn new(family: Family) -> Result<Self> {
        match family {
            Family::Tsallis { q } if !(q > 0.0 && q <= 1.0) => Err(Error::InvalidArgument(
                format!("Tsallis parameter {q} outside (0, 1]"),
            )),
            Family::Kaniadakis { kappa } if !(0.0..1.0).contains(&kappa) => Err(
                Error::InvalidArgument(format!("Kaniadakis parameter {kappa} outside [0, 1)")),
            ),
            _ => Ok(Self { family }),
        }
    }

    pub fn classical() -> Self {
        Self {
            family: Family::Classical,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn label(&self) -> String {
        match self.family {
            Family::Tsallis { q } => format!("tsallis({q})"),
            Family::Kaniadakis { kappa } => format!("kaniadakis({kappa})"),
            Family::Newton => "newton".into(),
            Family::Classical => "classical".into(),
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        match self.family {
            Family::Tsallis { q } => x.powf(q),
            Family::Kaniadakis { kappa } => x / (kappa * x.ln()).cosh(),
            Family::Newton => x / (x + 1.0),
            Family::Classical => x,
        }
    }

    /// `m = ∫_0^1 dx/φ(x)`; `ln_φ` maps onto `(-m, +∞)`.
    pub fn lower_bound(&self) -> f64 {
        match self.family {
            Family::Tsallis { q } if q < 1.0 => 1.0 / (1.0 - q),
            _ => f64::INFINITY,
        }
    }

    pub fn ln(&self, v: f64) -> f64 {
        match self.family {
            Family::Tsallis { q } if q < 1.0 => ((1.0 - q) * v.ln()).exp_m1() / (1.0 - q),
            Family::Kaniadakis { kappa } if kappa > 0.0 => (kappa * v.ln()).sinh() / kappa,
            Family::Newton => v - 1.0 + v.ln(),
            _ => v.ln(),
        }
    }

    /// `exp_φ(u)`, or `None` when `u ≤ -m` lies outside the range of `ln_φ`.
    pub fn try_exp(&self, u: f64) -> Option<f64> {
        match self.family {
            Family::Tsallis { q } if q < 1.0 => {
                let base = (1.0 - q) * u;
                if base <= -1.0 {
                    None
                } else {
                    Some((base.ln_1p() / (1.0 - q)).exp())
                }
            }
            Family::Kaniadakis { kappa } if kappa > 0.0 => Some(((kappa * u).asinh() / kappa).exp()),
            Family::Newton => Some(newton_exp(u)),
            _ => Some(u.exp()),
        }
    }

    pub fn exp(&self, u: f64) -> Result<f64> {
        self.try_exp(u).ok_or_else(|| {
            Error::ChartDomain(format!(
                "{} is outside the range of the {} logarithm",
                u,
                self.label()
            ))
        })
    }

    /// Affine majorant `φ(x) ≤ A x + B` fitted on the sample points.
    pub fn affine_bound(&self, xs: &[f64]) -> (f64, f64) {
        let slope = xs
            .iter()
            .filter(|x| **x >= 1.0)
            .map(|x| self.phi(*x) / x)
            .fold(0.0f64, f64::max);
        let intercept = xs
            .iter()
            .map(|x| self.phi(*x) - slope * x)
            .fold(0.0f64, f64::max);
        (slope, intercept)
    }
}

/// `∫ exp_φ(v + ln_φ p) dμ`.
pub fn phi_moment(p: &Density, v: &RandomVariable, d: &DeformedLogarithm) -> Result<f64> {
    check_base(p.base(), v.base())?;
    let mut total = 0.0;
    for ((p, v), w) in p.values().iter().zip(v.values()).zip(p.base().weights()) {
        total += w * d.exp(v + d.ln(*p))?;
    }
    Ok(total)
}

/// `inf{r > 0 : ∫ exp_φ(|u|/r + ln_φ p) dμ ≤ 2}`.
pub fn phi_norm(p: &Density, u: &RandomVariable, d: &DeformedLogarithm) -> Result<f64> {
    check_base(p.base(), u.base())?;
    let sup = u.sup_norm();
    if sup == 0.0 {
        return Ok(0.0);
    }
    let abs = u.map(f64::abs);
    let g = |r: f64| -> f64 {
        match phi_moment(p, &abs.scale(1.0 / r), d) {
            Ok(m) if m.is_finite() => m,
            _ => f64::INFINITY,
        }
    };
    let mut hi = sup;
    let mut expansions = 0;
    while g(hi) > 2.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 2000 {
            return Err(Error::NoBracket("φ-modular stays above 2".into()));
        }
    }
    let mut lo = hi;
    while g(lo) <= 2.0 {
        hi = lo;
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Ok(hi);
        }
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 2.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The escort measure `φ(p)·μ` of a density.
#[derive(Debug, Clone, PartialEq)]
pub struct EscortDensity {
    of: Density,
    values: Vec<f64>,
    mass: f64,
}

impl EscortDensity {
    pub fn new(p: &Density, d: &DeformedLogarithm) -> Self {
        let values: Vec<f64> = p.values().iter().map(|x| d.phi(*x)).collect();
        let mass = p.base().integrate(&values);
        Self {
            of: p.clone(),
            values,
            mass,
        }
    }

    pub fn of(&self) -> &Density {
        &self.of
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `∫ φ(p) dμ`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Unnormalized pairing `∫ u φ(p) dμ`.
    pub fn pairing(&self, u: &RandomVariable) -> Result<f64> {
        check_base(self.of.base(), u.base())?;
        Ok(self
            .values
            .iter()
            .zip(u.values())
            .zip(self.of.base().weights())
            .map(|((e, u), w)| e * u * w)
            .sum())
    }

    /// `∫ u φ(p) dμ / ∫ φ(p) dμ`.
    pub fn expect(&self, u: &RandomVariable) -> Result<f64> {
        Ok(self.pairing(u)? / self.mass)
    }
}

/// Escort expectation of `u` at `p`.
pub fn escort_expect(p: &Density, u: &RandomVariable, d: &DeformedLogarithm) -> Result<f64> {
    EscortDensity::new(p, d).expect(u)
}

fn ln_values(p: &Density, d: &DeformedLogarithm) -> Vec<f64> {
    p.values().iter().map(|x| d.ln(*x)).collect()
}

/// `∫ exp_φ((1-t) ln_φ p + t ln_φ q) dμ` at one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcMass {
    pub t: f64,
    /// `Infinite` also when the exponent leaves the range of `ln_φ`.
    pub mass: Extended,
    pub in_domain: bool,
}

fn arc_mass(lp: &[f64], lq: &[f64], weights: &[f64], d: &DeformedLogarithm, t: f64) -> ArcMass {
    let mut total = 0.0;
    for ((a, b), w) in lp.iter().zip(lq).zip(weights) {
        match d.try_exp((1.0 - t) * a + t * b) {
            Some(v) => total += w * v,
            None => {
                return ArcMass {
                    t,
                    mass: Extended::Infinite,
                    in_domain: false,
                }
            }
        }
    }
    ArcMass {
        t,
        mass: if total.is_finite() {
            Extended::Finite(total)
        } else {
            Extended::Infinite
        },
        in_domain: true,
    }
}

/// Arc masses on `t_grid`; on `[0, 1]` they never exceed one.
pub fn phi_connected(
    p: &Density,
    q: &Density,
    d: &DeformedLogarithm,
    t_grid: &[f64],
) -> Result<Vec<ArcMass>> {
    check_base(p.base(), q.base())?;
    let lp = ln_values(p, d);
    let lq = ln_values(q, d);
    Ok(t_grid
        .iter()
        .map(|t| arc_mass(&lp, &lq, p.base().weights(), d, *t))
        .collect())
}

/// Largest open interval of `t` on which the arc exponent stays in the range
/// of `ln_φ` at every support point; the whole line when that range is unbounded.
pub fn connection_interval(p: &Density, q: &Density, d: &DeformedLogarithm) -> Result<(f64, f64)> {
    check_base(p.base(), q.base())?;
    let m = d.lower_bound();
    if !m.is_finite() {
        return Ok((f64::NEG_INFINITY, f64::INFINITY));
    }
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (a, b) in ln_values(p, d).into_iter().zip(ln_values(q, d)) {
        // a + t (b - a) > -m
        let slope = b - a;
        if slope > 0.0 {
            lo = lo.max((-m - a) / slope);
        } else if slope < 0.0 {
            hi = hi.min((-m - a) / slope);
        }
    }
    Ok((lo, hi))
}

/// Interval on which `p, r` are connected given `p, q` on `]a, b[` and
/// `q, r` on `]c, d[`: `]ac/(a+c-1), bd/(b+d-1)[`.
pub fn transitive_interval(pq: (f64, f64), qr: (f64, f64)) -> Result<(f64, f64)> {
    let ((a, b), (c, d)) = (pq, qr);
    if !(a < 0.0 && b > 1.0 && c < 0.0 && d > 1.0) {
        return Err(Error::InvalidArgument(
            "open arcs must strictly contain [0, 1]".into(),
        ));
    }
    let lower = if a.is_finite() && c.is_finite() {
        a * c / (a + c - 1.0)
    } else if a.is_finite() {
        a
    } else if c.is_finite() {
        c
    } else {
        f64::NEG_INFINITY
    };
    let upper = if b.is_finite() && d.is_finite() {
        b * d / (b + d - 1.0)
    } else if b.is_finite() {
        b
    } else if d.is_finite() {
        d
    } else {
        f64::INFINITY
    };
    Ok((lower, upper))
}

/// The `k` with `∫ exp_φ(u - k + ln_φ p) dμ = 1`, of either sign.
pub fn phi_unit_mass_level(p: &Density, u: &RandomVariable, d: &DeformedLogarithm) -> Result<f64> {
    check_base(p.base(), u.base())?;
    let lp = ln_values(p, d);
    let weights = p.base().weights();
    // exp_φ extended by 0 below the range keeps the mass continuous in k
    let g = |k: f64| -> f64 {
        lp.iter()
            .zip(u.values())
            .zip(weights)
            .map(|((a, u), w)| w * d.try_exp(u - k + a).unwrap_or(0.0))
            .sum()
    };
    let g0 = g(0.0);
    if !g0.is_finite() {
        return Err(Error::Divergent("φ-moment is infinite at k = 0".into()));
    }
    if g0 == 1.0 {
        return Ok(0.0);
    }
    let step = if g0 > 1.0 { 1.0 } else { -1.0 };
    let (mut near, mut far) = (0.0, step);
    while (g(far) > 1.0) == (g0 > 1.0) {
        near = far;
        far *= 2.0;
        if !far.is_finite() {
            return Err(Error::NoBracket("φ unit-mass level".into()));
        }
    }
    let (mut lo, mut hi) = if near < far { (near, far) } else { (far, near) };
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    if lp.iter().zip(u.values()).any(|(a, u)| d.try_exp(u - k + a).is_none()) {
        return Err(Error::ChartDomain(format!(
            "the unit-mass level k = {k} pushes some exponent below the range of the {} logarithm",
            d.label()
        )));
    }
    Ok(k)
}

/// `K_p(u)` for `u` centered under the escort measure of `p`.
pub fn phi_cumulant(p: &Density, u: &RandomVariable, d: &DeformedLogarithm) -> Result<f64> {
    let g0 = phi_moment(p, u, d)?;
    if !g0.is_finite() {
        return Err(Error::Divergent("φ-moment is infinite at k = 0".into()));
    }
    if g0 < 1.0 - 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "φ-moment {g0} < 1 at k = 0: u is not centered under the escort measure"
        )));
    }
    if g0 <= 1.0 {
        return Ok(0.0);
    }
    phi_unit_mass_level(p, u, d)
}

/// Derivative of `K_p` at `u` along `v`: the escort expectation of `v` at `q = φ-patch(p, u)`.
pub fn phi_cumulant_derivative(
    p: &Density,
    u: &RandomVariable,
    v: &RandomVariable,
    d: &DeformedLogarithm,
) -> Result<f64> {
    let q = phi_patch(p, u, d)?;
    escort_expect(&q, v, d)
}

/// `exp_φ(u - K_p(u) + ln_φ p)`.
pub fn phi_patch(p: &Density, u: &RandomVariable, d: &DeformedLogarithm) -> Result<Density> {
    patch_at_level(p, u, phi_cumulant(p, u, d)?, d)
}

fn patch_at_level(p: &Density, u: &RandomVariable, k: f64, d: &DeformedLogarithm) -> Result<Density> {
    let values = p
        .values()
        .iter()
        .zip(u.values())
        .map(|(p, u)| d.exp(u - k + d.ln(*p)))
        .collect::<Result<Vec<_>>>()?;
    Density::new(p.base().clone(), values)
}

/// Chart statistic of `q` at `p` and its cumulant.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiChart {
    /// `ln_φ q - ln_φ p - ∫ φ(p)(ln_φ q - ln_φ p) dμ`.
    pub u: RandomVariable,
    /// `∫ φ(p)(ln_φ p - ln_φ q) dμ`.
    pub k: f64,
    /// The unit-mass level of `u`, found by root finding.
    pub k_root: f64,
    /// Largest pointwise gap between `φ-patch(p, u)` and `q`.
    pub reconstruction_defect: f64,
}

pub fn phi_chart(p: &Density, q: &Density, d: &DeformedLogarithm) -> Result<PhiChart> {
    check_base(p.base(), q.base())?;
    let diff = RandomVariable::new(
        p.base().clone(),
        ln_values(q, d)
            .into_iter()
            .zip(ln_values(p, d))
            .map(|(a, b)| a - b)
            .collect(),
    )?;
    let pairing = EscortDensity::new(p, d).pairing(&diff)?;
    let u = diff.shift(-pairing);
    let k_root = phi_unit_mass_level(p, &u, d)?;
    let rebuilt = patch_at_level(p, &u, k_root, d)?;
    Ok(PhiChart {
        u,
        k: -pairing,
        k_root,
        reconstruction_defect: rebuilt.sup_distance(q)?,
    })
}

/// One point of the φ-arc between `p0` and `p1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiArcPoint {
    pub t: f64,
    /// `∫ exp_φ((1-t) ln_φ p0 + t ln_φ p1) dμ`.
    pub mass: f64,
    /// The normalized arc density `p(t)`.
    pub density: Density,
    /// `∫ φ(p0)(ln_φ p(t) - ln_φ p0) dμ`.
    pub psi_printed: f64,
    /// Unit-mass level of `t u`, with `u` the chart statistic of `p1` at `p0`.
    pub psi_unit_mass: f64,
    /// `exp_φ(t u - K_{p0}(t u) + ln_φ p0)`, unit mass by construction.
    pub model_density: Density,
    /// Largest pointwise gap between the two densities.
    pub model_gap: f64,
}

pub fn phi_arc(p0: &Density, p1: &Density, d: &DeformedLogarithm, t: f64) -> Result<PhiArcPoint> {
    check_base(p0.base(), p1.base())?;
    let l0 = ln_values(p0, d);
    let l1 = ln_values(p1, d);
    let raw = l0
        .iter()
        .zip(&l1)
        .map(|(a, b)| {
            d.try_exp((1.0 - t) * a + t * b)
                .ok_or_else(|| Error::Divergent(format!("arc leaves the φ-range at t = {t}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mass = p0.base().integrate(&raw);
    if !mass.is_finite() {
        return Err(Error::Divergent(format!("arc mass is infinite at t = {t}")));
    }
    let density = Density::normalize(p0.base().clone(), raw)?;
    let escort = EscortDensity::new(p0, d);
    let shift = RandomVariable::new(
        p0.base().clone(),
        ln_values(&density, d).into_iter().zip(&l0).map(|(a, b)| a - b).collect(),
    )?;
    let psi_printed = escort.pairing(&shift)?;
    let chart = phi_chart(p0, p1, d)?;
    let tu = chart.u.scale(t);
    let psi_unit_mass = phi_unit_mass_level(p0, &tu, d)?;
    let model_density = patch_at_level(p0, &tu, psi_unit_mass, d)?;
    let model_gap = model_density.sup_distance(&density)?;
    Ok(PhiArcPoint {
        t,
        mass,
        density,
        psi_printed,
        psi_unit_mass,
        model_density,
        model_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Measure;

    fn all() -> Vec<DeformedLogarithm> {
        vec![
            make_deformed("tsallis", Some(0.5)).unwrap(),
            make_deformed("tsallis", Some(1.0)).unwrap(),
            make_deformed("kaniadakis", Some(0.3)).unwrap(),
            make_deformed("kaniadakis", Some(0.0)).unwrap(),
            make_deformed("newton", None).unwrap(),
            DeformedLogarithm::classical(),
        ]
    }

    #[test]
    fn parameter_ranges() {
        assert!(make_deformed("tsallis", Some(0.0)).is_err());
        assert!(make_deformed("tsallis", Some(1.5)).is_err());
        assert!(make_deformed("kaniadakis", Some(1.0)).is_err());
        assert!(make_deformed("kaniadakis", None).is_err());
        assert!(make_deformed("renyi", Some(0.5)).is_err());
    }

    #[test]
    fn log_exp_inverse_and_anchors() {
        for d in all() {
            assert_eq!(d.ln(1.0), 0.0, "{}", d.label());
            assert!((d.exp(0.0).unwrap() - 1.0).abs() < 1e-15);
            for k in -40..=40 {
                let v = 10f64.powf(k as f64 / 10.0);
                let back = d.exp(d.ln(v)).unwrap();
                assert!((back - v).abs() <= 1e-10 * v, "{} at {v}: {back}", d.label());
            }
        }
    }

    #[test]
    fn ln_derivative_is_reciprocal_phi() {
        for d in all() {
            for v in [0.2, 0.9, 1.7, 6.0] {
                let h = 1e-6 * v;
                let fd = (d.ln(v + h) - d.ln(v - h)) / (2.0 * h);
                assert!((fd * d.phi(v) - 1.0).abs() < 1e-8, "{}", d.label());
            }
        }
    }

    #[test]
    fn kaniadakis_zero_is_exp() {
        let d = make_deformed("kaniadakis", Some(0.0)).unwrap();
        for u in [-3.0, -0.1, 0.0, 0.5, 4.0] {
            assert_eq!(d.exp(u).unwrap(), u.exp());
        }
    }

    #[test]
    fn tsallis_domain_edge() {
        let d = make_deformed("tsallis", Some(0.5)).unwrap();
        assert_eq!(d.lower_bound(), 2.0);
        assert!(d.try_exp(-2.0).is_none());
        assert!(d.try_exp(-1.999).is_some());
        assert!(matches!(d.exp(-3.0), Err(Error::ChartDomain(_))));
    }

    #[test]
    fn affine_bound_holds() {
        let xs: Vec<f64> = (1..200).map(|i| i as f64 * 0.05).collect();
        for d in all() {
            let (a, b) = d.affine_bound(&xs);
            assert!(xs.iter().all(|x| d.phi(*x) <= a * x + b + 1e-12));
        }
    }

    #[test]
    fn zero_vector_cases() {
        let base = Measure::counting_n(4).unwrap();
        let p = Density::normalize(base.clone(), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = RandomVariable::constant(base, 0.0);
        for d in all() {
            assert_eq!(phi_norm(&p, &z, &d).unwrap(), 0.0);
            assert_eq!(phi_cumulant(&p, &z, &d).unwrap(), 0.0);
            assert!(phi_patch(&p, &z, &d).unwrap().sup_distance(&p).unwrap() < 1e-15);
            let c = phi_chart(&p, &p, &d).unwrap();
            assert_eq!(c.k, 0.0);
            assert!(c.u.sup_norm() == 0.0);
        }
    }

    #[test]
    fn transitive_interval_formula() {
        let (lo, hi) = transitive_interval((-1.0, 2.0), (-0.5, 3.0)).unwrap();
        assert!((lo + 0.2).abs() < 1e-15);
        assert!((hi - 6.0 / 4.0).abs() < 1e-15);
        assert!(transitive_interval((0.5, 2.0), (-1.0, 2.0)).is_err());
    }
}
