//! Exponential and mixture charts on positive densities.
//!
//! At a density `p` the exponential patch maps a centered `u` to
//! `e^{u - K_p(u)} p` with cumulant `K_p(u) = log E_p[e^u]`; the mixture chart
//! maps `q` to `q/p - 1`. On finite bases every moment generating function is
//! finite, so every centered `u` is a valid coordinate.

use serde::{Deserialize, Serialize};

use crate::measure::{
    check_base, covariance, expect, log_expect_exp, CotangentVector, Density, RandomVariable,
    TangentVector,
};
use crate::{Error, Result};

// relative pointwise agreement for "the same density"
const SAME_DENSITY_TOL: f64 = 1e-12;

pub(crate) fn check_at(p: &Density, at: &Density) -> Result<()> {
    check_base(p.base(), at.base())?;
    let close = p
        .values()
        .iter()
        .zip(at.values())
        .all(|(a, b)| (a - b).abs() <= SAME_DENSITY_TOL * a.abs().max(b.abs()));
    if close {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "vector is attached to a different density".into(),
        ))
    }
}

/// A point of the maximal exponential model, in the chart centered at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct EChartPoint {
    coord: TangentVector,
    cumulant: f64,
}

impl EChartPoint {
    pub fn new(coord: TangentVector) -> Result<Self> {
        let cumulant = cumulant(coord.at(), &coord)?;
        if !cumulant.is_finite() {
            return Err(Error::ChartDomain("cumulant is not finite".into()));
        }
        Ok(Self { coord, cumulant })
    }

    pub fn base(&self) -> &Density {
        self.coord.at()
    }

    pub fn coord(&self) -> &TangentVector {
        &self.coord
    }

    pub fn cumulant(&self) -> f64 {
        self.cumulant
    }

    pub fn density(&self) -> Result<Density> {
        patch_e(self.base(), &self.coord)
    }
}

/// A unit-mass (possibly signed) function `(1 + v) p` in the mixture chart at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct MChartPoint {
    coord: CotangentVector,
}

impl MChartPoint {
    pub fn new(coord: CotangentVector) -> Self {
        Self { coord }
    }

    pub fn base(&self) -> &Density {
        self.coord.at()
    }

    pub fn coord(&self) -> &CotangentVector {
        &self.coord
    }

    /// `(1 + v) p`, unit mass but not necessarily positive.
    pub fn unit_mass_function(&self) -> RandomVariable {
        patch_m(self.base(), &self.coord)
    }

    /// The point as a density, when it is positive.
    pub fn density(&self) -> Result<Density> {
        let f = self.unit_mass_function();
        Density::with_tolerance(f.base().clone(), f.into_values(), 1e-10)
    }
}

/// `K_p(u) = log E_p[e^u]`.
pub fn cumulant(p: &Density, u: &TangentVector) -> Result<f64> {
    check_at(p, u.at())?;
    log_expect_exp(p, u.rv())
}

/// First and second derivatives of the cumulant at `u` along a list of directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantDerivatives {
    /// `DK_p(u) v_i = E_q[v_i]`.
    pub first: Vec<f64>,
    /// `D²K_p(u)(v_i, v_j) = Cov_q(v_i, v_j)`.
    pub second: Vec<Vec<f64>>,
}

pub fn cumulant_derivatives(
    p: &Density,
    u: &TangentVector,
    dirs: &[TangentVector],
) -> Result<CumulantDerivatives> {
    let q = patch_e(p, u)?;
    let mut first = Vec::with_capacity(dirs.len());
    for d in dirs {
        check_at(p, d.at())?;
        first.push(expect(&q, d.rv())?);
    }
    let mut second = vec![vec![0.0; dirs.len()]; dirs.len()];
    for i in 0..dirs.len() {
        for j in 0..=i {
            let c = covariance(&q, dirs[i].rv(), dirs[j].rv())?;
            second[i][j] = c;
            second[j][i] = c;
        }
    }
    Ok(CumulantDerivatives { first, second })
}

/// `∇K_p(u) = q/p - 1` with `q = e_p(u)`, the gradient for the pairing `E_p[·]`.
pub fn cumulant_gradient(p: &Density, u: &TangentVector) -> Result<CotangentVector> {
    let q = patch_e(p, u)?;
    chart_m(p, &q.as_rv())
}

/// Derivative of `∇K_p` at `u` along `w`: `(q/p)(w - E_q[w])`.
pub fn cumulant_gradient_derivative(
    p: &Density,
    u: &TangentVector,
    w: &TangentVector,
) -> Result<RandomVariable> {
    check_at(p, w.at())?;
    let q = patch_e(p, u)?;
    let mean = expect(&q, w.rv())?;
    q.ratio(p)?.zip_with(w.rv(), |ratio, w| ratio * (w - mean))
}

/// Exponential patch `e_p(u) = e^{u - K_p(u)} p`.
pub fn patch_e(p: &Density, u: &TangentVector) -> Result<Density> {
    check_at(p, u.at())?;
    let logs: Vec<f64> = p
        .values()
        .iter()
        .zip(u.values())
        .map(|(p, u)| p.ln() + u)
        .collect();
    Density::from_log(p.base().clone(), &logs)
}

/// Exponential chart `s_p(q) = log(q/p) - E_p[log(q/p)]`.
pub fn chart_s(p: &Density, q: &Density) -> Result<TangentVector> {
    check_base(p.base(), q.base())?;
    let log_ratio = q.ln().sub(&p.ln())?;
    TangentVector::centered(p.clone(), log_ratio)
}

/// Change of exponential chart: `u ↦ u + log(p1/p2) - E_{p2}[u + log(p1/p2)]`.
pub fn transition_e(p1: &Density, p2: &Density, u: &TangentVector) -> Result<TangentVector> {
    check_at(p1, u.at())?;
    check_base(p1.base(), p2.base())?;
    let shifted = u.rv().add(&p1.ln().sub(&p2.ln())?)?;
    TangentVector::centered(p2.clone(), shifted)
}

/// Exponential transport `u ↦ u - E_q[u]`.
pub fn transport_e(p: &Density, q: &Density, u: &TangentVector) -> Result<TangentVector> {
    check_at(p, u.at())?;
    TangentVector::centered(q.clone(), u.rv().clone())
}

/// Mixture transport `v ↦ (p/q) v`.
pub fn transport_m(p: &Density, q: &Density, v: &CotangentVector) -> Result<CotangentVector> {
    check_at(p, v.at())?;
    let moved = p.ratio(q)?.mul(v.rv())?;
    CotangentVector::centered(q.clone(), moved)
}

/// Mixture chart `η_p(q) = q/p - 1` for a unit-mass function `q`.
pub fn chart_m(p: &Density, q: &RandomVariable) -> Result<CotangentVector> {
    check_base(p.base(), q.base())?;
    let mass = p.base().integrate(q.values());
    let tol = p.base().mass_tolerance();
    if (mass - 1.0).abs() > tol {
        return Err(Error::NotNormalized { mass, tol });
    }
    let v = q.zip_with(&p.as_rv(), |q, p| q / p - 1.0)?;
    CotangentVector::centered(p.clone(), v)
}

/// Mixture patch `v ↦ (1 + v) p`.
pub fn patch_m(p: &Density, v: &CotangentVector) -> RandomVariable {
    v.rv()
        .zip_with(&p.as_rv(), |v, p| (1.0 + v) * p)
        .expect("cotangent vector shares the base of its density")
}

/// Change of mixture chart: `v ↦ v p1/p2 + p1/p2 - 1`.
pub fn transition_m(p1: &Density, p2: &Density, v: &CotangentVector) -> Result<CotangentVector> {
    check_at(p1, v.at())?;
    let ratio = p1.ratio(p2)?;
    let moved = v.rv().zip_with(&ratio, |v, r| v * r + r - 1.0)?;
    CotangentVector::centered(p2.clone(), moved)
}

/// `D(q ‖ r) = E_q[log(q/r)]`, computed directly and as a Bregman divergence
/// of the cumulant in the chart centered at `chart_center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub direct: f64,
    pub bregman: f64,
}

/// `E_q[log(q/r)]`.
pub fn kl(q: &Density, r: &Density) -> Result<f64> {
    let log_ratio = q.ln().sub(&r.ln())?;
    expect(q, &log_ratio)
}

pub fn divergence_at(chart_center: &Density, q: &Density, r: &Density) -> Result<Divergence> {
    let direct = kl(q, r)?;
    let u = chart_s(chart_center, q)?;
    let v = chart_s(chart_center, r)?;
    let ku = cumulant(chart_center, &u)?;
    let kv = cumulant(chart_center, &v)?;
    let grad = expect(q, &v.rv().sub(u.rv())?)?;
    Ok(Divergence {
        direct,
        bregman: kv - ku - grad,
    })
}

/// Divergence with the Bregman form taken in the chart at the uniform density.
pub fn divergence(q: &Density, r: &Density) -> Result<Divergence> {
    check_base(q.base(), r.base())?;
    divergence_at(&Density::uniform(q.base().clone()), q, r)
}

/// Derivative of `u ↦ D(e_p(u) ‖ r)` along `w`: `Cov_q(u - v, w)` with `v = s_p(r)`.
pub fn divergence_directional_derivative(
    p: &Density,
    q: &Density,
    r: &Density,
    w: &TangentVector,
) -> Result<f64> {
    check_at(p, w.at())?;
    let u = chart_s(p, q)?;
    let v = chart_s(p, r)?;
    covariance(q, &u.rv().sub(v.rv())?, w.rv())
}

/// Pairing `E_p[η_p(r) s_p(q)]` and the defect of the identity
/// `D(r‖q) = D(r‖p) + D(p‖q) - pairing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pythagorean {
    pub pairing: f64,
    pub defect: f64,
    pub d_rq: f64,
    pub d_rp: f64,
    pub d_pq: f64,
}

pub fn pythagorean_check(p: &Density, q: &Density, r: &Density) -> Result<Pythagorean> {
    let eta = chart_m(p, &r.as_rv())?;
    let s = chart_s(p, q)?;
    let pairing = expect(p, &eta.rv().mul(s.rv())?)?;
    let d_rq = kl(r, q)?;
    let d_rp = kl(r, p)?;
    let d_pq = kl(p, q)?;
    Ok(Pythagorean {
        pairing,
        defect: d_rq - d_rp - d_pq + pairing,
        d_rq,
        d_rp,
        d_pq,
    })
}

/// `(E_p|f|^α)^{1/α}`.
fn lebesgue_norm(p: &Density, f: &RandomVariable, alpha: f64) -> Result<f64> {
    let m = expect(p, &f.map(|v| v.abs().powf(alpha)))?;
    Ok(m.powf(1.0 / alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EConvergenceRow {
    pub index: usize,
    pub alpha: f64,
    /// `‖p_n/p - 1‖_{L^α(p)}`.
    pub forward: f64,
    /// `‖p/p_n - 1‖_{L^α(p)}`.
    pub backward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EConvergenceTable {
    pub rows: Vec<EConvergenceRow>,
    /// Exponents for which the larger of the two norms does not decrease
    /// from the first to the last element of the sequence.
    pub non_convergent_alphas: Vec<f64>,
}

impl EConvergenceTable {
    pub fn flagged(&self) -> bool {
        !self.non_convergent_alphas.is_empty()
    }
}

/// Tabulates the `L^α(p)` distances whose vanishing characterizes
/// e-convergence of `seq` to `p`.
pub fn e_convergence_diagnostic(
    seq: &[Density],
    p: &Density,
    alphas: &[f64],
) -> Result<EConvergenceTable> {
    if let Some(a) = alphas.iter().find(|a| !(**a >= 1.0)) {
        return Err(Error::InvalidArgument(format!("exponent {a} is below 1")));
    }
    let mut rows = Vec::with_capacity(seq.len() * alphas.len());
    for (index, pn) in seq.iter().enumerate() {
        let fwd = pn.ratio(p)?.shift(-1.0);
        let bwd = p.ratio(pn)?.shift(-1.0);
        for &alpha in alphas {
            rows.push(EConvergenceRow {
                index,
                alpha,
                forward: lebesgue_norm(p, &fwd, alpha)?,
                backward: lebesgue_norm(p, &bwd, alpha)?,
            });
        }
    }
    let worst = |index: usize, alpha: f64| {
        rows.iter()
            .find(|r| r.index == index && r.alpha == alpha)
            .map(|r| r.forward.max(r.backward))
            .unwrap_or(0.0)
    };
    let non_convergent_alphas = if seq.len() < 2 {
        Vec::new()
    } else {
        alphas
            .iter()
            .copied()
            .filter(|&a| {
                let first = worst(0, a);
                let last = worst(seq.len() - 1, a);
                last > 0.0 && last >= first
            })
            .collect()
    };
    Ok(EConvergenceTable {
        rows,
        non_convergent_alphas,
    })
}
