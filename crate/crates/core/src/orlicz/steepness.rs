use serde::{Deserialize, Serialize};

use super::YoungFunction;
use crate::measure::{check_base, Density, Measure, MeasureKind, QuadratureRule, RandomVariable};
use crate::quadrature::exponential_tail_cutoff;
use crate::special::{c_integral, Extended};
use crate::{Error, Result};

/// One point `(α, E_p[Φ(α u)])` of a steepness profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub alpha: f64,
    pub value: Extended,
}

/// The density `p(x) ∝ (a+x)^{-3/2} e^{-x}` on `x > 0` with `u(x) = x`: its
/// `cosh - 1` profile is finite exactly on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonSteepExample {
    a: f64,
    normalizer: f64,
}

impl NonSteepExample {
    pub fn new(a: f64) -> Result<Self> {
        let normalizer = c_integral(1.0, a)?
            .finite()
            .ok_or_else(|| Error::Numerical("C(1,a) is finite for a > 0".into()))?;
        Ok(Self { a, normalizer })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// `C(1, a) = e^a Γ(-1/2, a)`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn density_at(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            (self.a + x).powf(-1.5) * (-x).exp() / self.normalizer
        }
    }

    /// `E_p[cosh(α u) - 1] = (C(1-α,a) + C(1+α,a)) / (2 C(1,a)) - 1`.
    pub fn expected_phi(&self, alpha: f64) -> Result<Extended> {
        let lo = c_integral(1.0 - alpha, self.a)?;
        let hi = c_integral(1.0 + alpha, self.a)?;
        Ok(match (lo, hi) {
            (Extended::Finite(l), Extended::Finite(h)) => {
                Extended::Finite((l + h) / (2.0 * self.normalizer) - 1.0)
            }
            _ => Extended::Infinite,
        })
    }

    pub fn profile(&self, alphas: &[f64]) -> Result<Vec<ProfileRow>> {
        alphas
            .iter()
            .map(|&alpha| {
                Ok(ProfileRow {
                    alpha,
                    value: self.expected_phi(alpha)?,
                })
            })
            .collect()
    }

    /// Truncation length after which the neglected mass is below `tol`.
    pub fn truncation(&self, tol: f64) -> Result<f64> {
        exponential_tail_cutoff(self.a.powf(-1.5) / self.normalizer, 1.0, tol)
    }

    /// The density and `u(x) = x` on a Gauss–Legendre grid over `[0, length]`.
    pub fn discretize(
        &self,
        length: f64,
        panels: usize,
        order: usize,
    ) -> Result<(Density, RandomVariable)> {
        let base = Measure::gauss_legendre(0.0, length, panels, order)?;
        let values = base.real_points().iter().map(|x| self.density_at(*x)).collect();
        let p = Density::new(base.clone(), values)?;
        let u = RandomVariable::from_fn(base, |x| x)?;
        Ok((p, u))
    }
}

/// `α ↦ E_p[Φ(α u)]` by quadrature on the base of `p`.
///
/// On composite Gauss–Legendre grids the per-panel contributions at the right
/// end are inspected: a non-decaying last panel is reported as
/// [`Extended::Infinite`]; a decaying one gets a geometric tail correction.
pub fn steepness_profile(
    p: &Density,
    u: &RandomVariable,
    phi: YoungFunction,
    alphas: &[f64],
) -> Result<Vec<ProfileRow>> {
    check_base(p.base(), u.base())?;
    let base = p.base();
    let panel_order = match base.kind() {
        MeasureKind::Grid1d {
            rule: QuadratureRule::GaussLegendre { panels, order },
            ..
        } if *panels >= 3 => Some(*order),
        _ => None,
    };
    alphas
        .iter()
        .map(|&alpha| {
            let terms: Vec<f64> = p
                .values()
                .iter()
                .zip(u.values())
                .zip(base.weights())
                .map(|((p, u), w)| p * w * phi.eval(alpha * u))
                .collect();
            let total: f64 = terms.iter().sum();
            let value = if !total.is_finite() {
                Extended::Infinite
            } else if let Some(order) = panel_order {
                let panel: Vec<f64> = terms.chunks(order).map(|c| c.iter().sum()).collect();
                let last = panel[panel.len() - 1];
                let prev = panel[panel.len() - 2];
                if last > 0.0 && last >= prev {
                    Extended::Infinite
                } else if last > 0.0 && prev > 0.0 {
                    let ratio = last / prev;
                    Extended::Finite(total + last * ratio / (1.0 - ratio))
                } else {
                    Extended::Finite(total)
                }
            } else {
                Extended::Finite(total)
            };
            Ok(ProfileRow { alpha, value })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_edges() {
        let ex = NonSteepExample::new(0.5).unwrap();
        assert_eq!(ex.expected_phi(0.0).unwrap(), Extended::Finite(0.0));
        assert_eq!(ex.expected_phi(1.1).unwrap(), Extended::Infinite);
        assert_eq!(ex.expected_phi(-1.1).unwrap(), Extended::Infinite);
        let at_one = ex.expected_phi(1.0).unwrap().to_f64();
        let at_minus_one = ex.expected_phi(-1.0).unwrap().to_f64();
        assert_eq!(at_one, at_minus_one);
        assert!((at_one - 0.8037381).abs() < 1e-7);
    }

    #[test]
    fn grid_profile_detects_divergence() {
        let ex = NonSteepExample::new(0.5).unwrap();
        let (p, u) = ex.discretize(120.0, 240, 12).unwrap();
        let rows = steepness_profile(&p, &u, YoungFunction::cosh_minus_one(), &[0.0, 0.5, 1.2])
            .unwrap();
        assert_eq!(rows[0].value, Extended::Finite(0.0));
        let exact = ex.expected_phi(0.5).unwrap().to_f64();
        assert!((rows[1].value.to_f64() - exact).abs() < 1e-9);
        assert_eq!(rows[2].value, Extended::Infinite);
    }
}
