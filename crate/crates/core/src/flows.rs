//! Vector fields on positive densities and their integral curves, integrated
//! in the exponential chart at the initial density.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exp_manifold::{patch_e, transition_e};
use crate::measure::{
    check_base, covariance, expect, CotangentVector, Density, MeasureKind, QuadratureRule,
    RandomVariable, TangentVector,
};
use crate::random;
use crate::{Error, Result};

type Evaluator = dyn Fn(&Density) -> Result<RandomVariable> + Send + Sync;
type Domain = dyn Fn(&Density) -> bool + Send + Sync;

/// A vector field `p ↦ F(p)`, represented in the moving frame: `F(p)` is
/// centered under `p`.
#[derive(Clone)]
pub struct VectorField {
    evaluator: Arc<Evaluator>,
    domain: Option<Arc<Domain>>,
}

impl std::fmt::Debug for VectorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorField")
            .field("restricted_domain", &self.domain.is_some())
            .finish()
    }
}

impl VectorField {
    /// Field from an evaluator; its values are centered under the evaluation point.
    pub fn new(f: impl Fn(&Density) -> Result<RandomVariable> + Send + Sync + 'static) -> Self {
        Self {
            evaluator: Arc::new(f),
            domain: None,
        }
    }

    pub fn with_domain(mut self, pred: impl Fn(&Density) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(pred));
        self
    }

    pub fn zero() -> Self {
        Self::new(|p| Ok(RandomVariable::constant(p.base().clone(), 0.0)))
    }

    /// `q ↦ f - E_q[f]`, whose integral curves are exponential families.
    pub fn exponential_family(f: RandomVariable) -> Self {
        Self::new(move |q| {
            check_base(q.base(), f.base())?;
            Ok(f.clone())
        })
    }

    /// `p ↦ p''/p` with the periodic second-difference stencil.
    pub fn heat() -> Self {
        Self::new(|p| {
            let h = periodic_spacing(p)?;
            let d2 = second_difference(p.values(), h);
            RandomVariable::new(
                p.base().clone(),
                d2.iter().zip(p.values()).map(|(d, p)| d / p).collect(),
            )
        })
    }

    pub fn contains(&self, p: &Density) -> bool {
        self.domain.as_ref().is_none_or(|d| d(p))
    }

    /// `F(p)` as a tangent vector at `p`.
    pub fn eval(&self, p: &Density) -> Result<TangentVector> {
        if !self.contains(p) {
            return Err(Error::ChartDomain("density outside the field's domain".into()));
        }
        let raw = (self.evaluator)(p)?;
        TangentVector::centered(p.clone(), raw)
    }
}

/// Times, densities, chart coordinates and velocities of an integral curve.
///
/// `chart_coords[i]` is attached to the chart center in use at step `i`,
/// which changes only when the integrator re-anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    pub times: Vec<f64>,
    pub densities: Vec<Density>,
    pub chart_coords: Vec<TangentVector>,
    /// `δp(t) = ṗ(t)/p(t)`, centered under `p(t)`.
    pub velocities: Vec<TangentVector>,
}

impl CurveRecord {
    pub fn last(&self) -> &Density {
        self.densities.last().expect("a curve has at least one point")
    }

    /// Largest `|∫ p(t) dμ - 1|` along the curve.
    pub fn mass_drift(&self) -> f64 {
        self.densities
            .iter()
            .map(|d| (d.mass() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,x0,x1,...` and one row of density values per time.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        if let Some(first) = self.densities.first() {
            for x in first.base().real_points() {
                out.push_str(&format!(",{x}"));
            }
        }
        out.push('\n');
        for (t, d) in self.times.iter().zip(&self.densities) {
            out.push_str(&t.to_string());
            for v in d.values() {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Options for [`integrate_e_chart_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Move the chart center to the current density once `‖u‖_∞` exceeds this.
    pub reanchor_above: f64,
    /// Record every `stride`-th step (the final step is always recorded).
    pub stride: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            reanchor_above: f64::INFINITY,
            stride: 1,
        }
    }
}

fn step_count(t_end: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_end >= 0.0 && t_end.is_finite()) || !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need T >= 0 and dt > 0, got T = {t_end}, dt = {dt}"
        )));
    }
    let n = (t_end / dt).round().max(if t_end > 0.0 { 1.0 } else { 0.0 }) as usize;
    Ok((n, if n == 0 { 0.0 } else { t_end / n as f64 }))
}

/// Integrates `u̇ = F(p) - E_{p0}[F(p)]`, `p = e_{p0}(u)`, by classical RK4.
pub fn integrate_e_chart(field: &VectorField, p0: &Density, t_end: f64, dt: f64) -> Result<CurveRecord> {
    integrate_e_chart_with(field, p0, t_end, dt, IntegrateOptions::default())
}

pub fn integrate_e_chart_with(
    field: &VectorField,
    p0: &Density,
    t_end: f64,
    dt: f64,
    opts: IntegrateOptions,
) -> Result<CurveRecord> {
    let (steps, h) = step_count(t_end, dt)?;
    let stride = opts.stride.max(1);
    let mut anchor = p0.clone();
    let mut u = TangentVector::zero(anchor.clone());

    // u̇ in the chart at `anchor`, plus the density and δp at u
    let rhs = |anchor: &Density, u: &RandomVariable| -> Result<(RandomVariable, Density, TangentVector)> {
        let coord = TangentVector::centered(anchor.clone(), u.clone())?;
        let p = patch_e(anchor, &coord)?;
        let f = field.eval(&p)?;
        if f.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Stability("non-finite field value".into()));
        }
        let mean = expect(anchor, f.rv())?;
        Ok((f.rv().shift(-mean), p, f))
    };

    let mut record = CurveRecord {
        times: Vec::new(),
        densities: Vec::new(),
        chart_coords: Vec::new(),
        velocities: Vec::new(),
    };
    let (_, p_start, v_start) = rhs(&anchor, u.rv())?;
    record.times.push(0.0);
    record.densities.push(p_start);
    record.chart_coords.push(u.clone());
    record.velocities.push(v_start);

    for step in 1..=steps {
        let x = u.rv();
        let (k1, _, _) = rhs(&anchor, x)?;
        let (k2, _, _) = rhs(&anchor, &x.lin_comb(1.0, &k1, 0.5 * h)?)?;
        let (k3, _, _) = rhs(&anchor, &x.lin_comb(1.0, &k2, 0.5 * h)?)?;
        let (k4, _, _) = rhs(&anchor, &x.lin_comb(1.0, &k3, h)?)?;
        let incr = k1
            .lin_comb(1.0, &k2, 2.0)?
            .lin_comb(1.0, &k3, 2.0)?
            .lin_comb(1.0, &k4, 1.0)?;
        let next = x.lin_comb(1.0, &incr, h / 6.0)?;
        if next.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Stability(format!("non-finite coordinate at step {step}")));
        }
        u = TangentVector::centered(anchor.clone(), next)?;
        if u.rv().sup_norm() > opts.reanchor_above {
            let p_now = patch_e(&anchor, &u)?;
            u = transition_e(&anchor, &p_now, &u)?;
            anchor = p_now;
        }
        if step % stride == 0 || step == steps {
            let (_, p, v) = rhs(&anchor, u.rv())?;
            record.times.push(step as f64 * h);
            record.densities.push(p);
            record.chart_coords.push(u.clone());
            record.velocities.push(v);
        }
    }
    Ok(record)
}

/// `e^{t f - K_p(t f)} p`.
pub fn e_geodesic(p: &Density, f: &TangentVector, t: f64) -> Result<Density> {
    let tf = TangentVector::centered(f.at().clone(), f.rv().scale(t))?;
    patch_e(p, &tf)
}

/// A point `p (1 + t f)` of a mixture geodesic.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePoint {
    /// Unit-mass, possibly signed, values.
    pub values: RandomVariable,
    pub positive: bool,
}

pub fn m_geodesic(p: &Density, f: &CotangentVector, t: f64) -> Result<MixturePoint> {
    check_base(p.base(), f.rv().base())?;
    let values = f.rv().zip_with(&p.as_rv(), |f, p| p * (1.0 + t * f))?;
    let positive = values.values().iter().all(|v| *v > 0.0);
    Ok(MixturePoint { values, positive })
}

/// Open interval of `t` on which `1 + t f > 0` everywhere.
pub fn m_geodesic_positivity_interval(f: &CotangentVector) -> (f64, f64) {
    let (lo, hi) = f
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let t_max = if lo < 0.0 { -1.0 / lo } else { f64::INFINITY };
    let t_min = if hi > 0.0 { -1.0 / hi } else { f64::NEG_INFINITY };
    (t_min, t_max)
}

/// `Cov_q(v, F)` with `q = e_p(u)`: derivative of `u ↦ E_{e_p(u)}[F]` along `v`.
pub fn hessian_expectation(
    p: &Density,
    u: &TangentVector,
    objective: &RandomVariable,
    v: &TangentVector,
) -> Result<f64> {
    let q = patch_e(p, u)?;
    covariance(&q, v.rv(), objective)
}

/// Gram-system jitter for the projected gradient.
pub const GRAM_JITTER: f64 = 1e-10;

/// Trajectory and objective trace of a natural-gradient ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentRecord {
    pub curve: CurveRecord,
    /// `E_{q_k}[F]` for `k = 0..=iters`.
    pub objective: Vec<f64>,
    /// True if some Gram matrix was not numerically positive definite.
    pub regularized: bool,
}

/// Direction of steepest ascent of `E_q[F]` in the model spanned by `basis`
/// (the whole tangent space when `None`), centered under `q`.
pub fn ascent_direction(
    q: &Density,
    objective: &RandomVariable,
    basis: Option<&[TangentVector]>,
) -> Result<(TangentVector, bool)> {
    let Some(basis) = basis else {
        return Ok((TangentVector::centered(q.clone(), objective.clone())?, false));
    };
    let n = basis.len();
    if n == 0 {
        return Ok((TangentVector::zero(q.clone()), false));
    }
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..n {
        rhs[i] = covariance(q, basis[i].rv(), objective)?;
        for j in 0..=i {
            let c = covariance(q, basis[i].rv(), basis[j].rv())?;
            gram[(i, j)] = c;
            gram[(j, i)] = c;
        }
    }
    let regularized = Cholesky::new(gram.clone()).is_none();
    for i in 0..n {
        gram[(i, i)] += GRAM_JITTER;
    }
    let chol = Cholesky::new(gram)
        .ok_or_else(|| Error::Numerical("Gram matrix is not positive definite".into()))?;
    let coeffs = chol.solve(&rhs);
    let mut dir = RandomVariable::constant(q.base().clone(), 0.0);
    for (c, v) in coeffs.iter().zip(basis) {
        dir = dir.lin_comb(1.0, v.rv(), *c)?;
    }
    Ok((TangentVector::centered(q.clone(), dir)?, regularized))
}

/// Iterates `u ← u + γ (d_k - E_{p0}[d_k])` with `d_k` the steepest-ascent
/// direction of `E_q[F]` at `q_k = e_{p0}(u)`.
pub fn natural_gradient_ascent(
    objective: &RandomVariable,
    p0: &Density,
    basis: Option<&[TangentVector]>,
    gamma: f64,
    iters: usize,
) -> Result<AscentRecord> {
    check_base(p0.base(), objective.base())?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("step {gamma} must be positive")));
    }
    let mut u = TangentVector::zero(p0.clone());
    let mut curve = CurveRecord {
        times: Vec::with_capacity(iters + 1),
        densities: Vec::with_capacity(iters + 1),
        chart_coords: Vec::with_capacity(iters + 1),
        velocities: Vec::with_capacity(iters + 1),
    };
    let mut trace = Vec::with_capacity(iters + 1);
    let mut regularized = false;
    for k in 0..=iters {
        let q = patch_e(p0, &u)?;
        let (dir, reg) = ascent_direction(&q, objective, basis)?;
        regularized |= reg;
        trace.push(expect(&q, objective)?);
        curve.times.push(k as f64 * gamma);
        curve.densities.push(q);
        curve.chart_coords.push(u.clone());
        curve.velocities.push(dir.clone());
        if k < iters {
            let moved = TangentVector::centered(p0.clone(), dir.into_rv())?;
            let next = u.rv().lin_comb(1.0, moved.rv(), gamma)?;
            u = TangentVector::centered(p0.clone(), next)?;
        }
    }
    Ok(AscentRecord {
        curve,
        objective: trace,
        regularized,
    })
}

/// Sampled sup of `Cov_p(𝐅(u) - 𝐅(v), u - v) / E_p[(u - v)²]` over random
/// coordinate pairs, with `𝐅(u) = F(e_p(u)) - E_p[F(e_p(u))]`.
pub fn one_sided_lipschitz_probe<R: Rng + ?Sized>(
    field: &VectorField,
    p: &Density,
    trials: usize,
    scale: f64,
    rng: &mut R,
) -> Result<f64> {
    let chart_field = |u: &TangentVector| -> Result<RandomVariable> {
        let q = patch_e(p, u)?;
        Ok(field.eval(&q)?.into_rv())
    };
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let u = random::tangent(p, rng, scale);
        let v = random::tangent(p, rng, scale);
        let diff = u.rv().sub(v.rv())?;
        let norm2 = covariance(p, &diff, &diff)?;
        if !(norm2 > 0.0) {
            continue;
        }
        let df = chart_field(&u)?.sub(&chart_field(&v)?)?;
        worst = worst.max(covariance(p, &df, &diff)? / norm2);
    }
    Ok(if worst.is_finite() { worst } else { 0.0 })
}

fn periodic_spacing(p: &Density) -> Result<f64> {
    match p.base().kind() {
        MeasureKind::Grid1d {
            lo,
            hi,
            rule: QuadratureRule::PeriodicTrapezoid,
        } => Ok((hi - lo) / p.len() as f64),
        _ => Err(Error::InvalidArgument(
            "heat flow needs a periodic uniform grid".into(),
        )),
    }
}

fn second_difference(p: &[f64], h: f64) -> Vec<f64> {
    let n = p.len();
    (0..n)
        .map(|i| (p[(i + 1) % n] - 2.0 * p[i] + p[(i + n - 1) % n]) / (h * h))
        .collect()
}

fn forward_difference(p: &[f64], h: f64) -> Vec<f64> {
    let n = p.len();
    (0..n).map(|i| (p[(i + 1) % n] - p[i]) / h).collect()
}

/// Chart solution of the heat equation next to an explicit finite-difference
/// reference on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatReport {
    pub curve: CurveRecord,
    /// Reference densities at `curve.times`.
    pub reference: Vec<Vec<f64>>,
    /// Largest sup-norm gap between the two solutions.
    pub max_gap: f64,
    pub mass_drift: f64,
    /// Largest `|E_p[δp v] + E_p[(p'/p) v']|` over recorded times and the
    /// test functions `cos kx`, `sin kx`, `k = 1..=4`.
    pub weak_residual: f64,
}

/// Summary suitable for serialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatSummary {
    pub max_gap: f64,
    pub mass_drift: f64,
    pub weak_residual: f64,
}

impl HeatReport {
    pub fn summary(&self) -> HeatSummary {
        HeatSummary {
            max_gap: self.max_gap,
            mass_drift: self.mass_drift,
            weak_residual: self.weak_residual,
        }
    }
}

/// Chart coordinates are re-anchored above this sup norm during heat flow.
pub const HEAT_REANCHOR: f64 = 30.0;

pub fn heat_flow(p0: &Density, t_end: f64, dt: f64) -> Result<HeatReport> {
    let h = periodic_spacing(p0)?;
    if dt > 0.5 * h * h {
        return Err(Error::Stability(format!(
            "dt = {dt} exceeds the explicit stability limit h²/2 = {}",
            0.5 * h * h
        )));
    }
    let curve = integrate_e_chart_with(
        &VectorField::heat(),
        p0,
        t_end,
        dt,
        IntegrateOptions {
            reanchor_above: HEAT_REANCHOR,
            stride: 1,
        },
    )?;
    let (steps, step) = step_count(t_end, dt)?;
    let mut reference = Vec::with_capacity(steps + 1);
    let mut fd = p0.values().to_vec();
    reference.push(fd.clone());
    for _ in 0..steps {
        let d2 = second_difference(&fd, h);
        fd.iter_mut().zip(&d2).for_each(|(p, d)| *p += step * d);
        reference.push(fd.clone());
    }
    let max_gap = curve
        .densities
        .iter()
        .zip(&reference)
        .map(|(d, r)| {
            d.values()
                .iter()
                .zip(r)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        })
        .fold(0.0, f64::max);

    let points = p0.base().real_points();
    let tests: Vec<Vec<f64>> = (1..=4)
        .flat_map(|k| {
            let k = k as f64;
            [
                points.iter().map(|x| (k * x).cos()).collect::<Vec<_>>(),
                points.iter().map(|x| (k * x).sin()).collect::<Vec<_>>(),
            ]
        })
        .collect();
    let mut weak_residual = 0.0f64;
    for (p, dp) in curve.densities.iter().zip(&curve.velocities) {
        let dpx = forward_difference(p.values(), h);
        for v in &tests {
            let dv = forward_difference(v, h);
            let mut r = 0.0;
            for i in 0..v.len() {
                let pw = p.values()[i] * p0.base().weights()[i];
                r += pw * dp.values()[i] * v[i] + pw * (dpx[i] / p.values()[i]) * dv[i];
            }
            weak_residual = weak_residual.max(r.abs());
        }
    }
    let mass_drift = curve.mass_drift();
    Ok(HeatReport {
        curve,
        reference,
        max_gap,
        mass_drift,
        weak_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Measure;

    #[test]
    fn zero_field_gives_constant_curve() {
        let base = Measure::counting_n(4).unwrap();
        let p = Density::normalize(base, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c = integrate_e_chart(&VectorField::zero(), &p, 0.5, 0.1).unwrap();
        assert_eq!(c.times.len(), 6);
        assert!(c.densities.iter().all(|d| d.sup_distance(&p).unwrap() < 1e-15));
    }

    #[test]
    fn two_point_geodesic() {
        let base = Measure::counting(vec![-1.0, 1.0]).unwrap();
        let p = Density::uniform(base.clone());
        let x = TangentVector::new(p.clone(), RandomVariable::from_fn(base, |x| x).unwrap()).unwrap();
        let t = 0.7f64;
        let q = e_geodesic(&p, &x, t).unwrap();
        let z = 2.0 * t.cosh();
        assert!((q.values()[0] - (-t).exp() / z).abs() < 1e-15);
        assert!((q.values()[1] - t.exp() / z).abs() < 1e-15);
    }

    #[test]
    fn positivity_interval() {
        let base = Measure::counting_n(3).unwrap();
        let p = Density::uniform(base.clone());
        let f = CotangentVector::new(p.clone(), RandomVariable::new(base, vec![-0.5, 0.0, 0.5]).unwrap()).unwrap();
        let (lo, hi) = m_geodesic_positivity_interval(&f);
        assert_eq!((lo, hi), (-2.0, 2.0));
        assert!(m_geodesic(&p, &f, 1.99).unwrap().positive);
        assert!(!m_geodesic(&p, &f, 2.01).unwrap().positive);
        let mass = base_mass(&m_geodesic(&p, &f, 5.0).unwrap().values);
        assert!((mass - 1.0).abs() < 1e-15);
    }

    fn base_mass(v: &RandomVariable) -> f64 {
        v.base().integrate(v.values())
    }

    #[test]
    fn heat_rejects_unstable_step() {
        let base = Measure::periodic(0.0, std::f64::consts::TAU, 16).unwrap();
        let p = Density::uniform(base);
        let h = std::f64::consts::TAU / 16.0;
        assert!(matches!(heat_flow(&p, 0.1, 0.6 * h * h), Err(Error::Stability(_))));
        let r = heat_flow(&p, 0.05, 0.25 * h * h).unwrap();
        assert!(r.max_gap < 1e-15);
    }

    #[test]
    fn constant_objective_is_a_fixed_point() {
        let base = Measure::counting_n(5).unwrap();
        let p = Density::normalize(base.clone(), vec![1.0, 2.0, 1.0, 3.0, 1.0]).unwrap();
        let f = RandomVariable::constant(base, 2.0);
        let r = natural_gradient_ascent(&f, &p, None, 0.5, 3).unwrap();
        assert!(r.curve.last().sup_distance(&p).unwrap() < 1e-15);
        assert!(r.objective.iter().all(|v| (v - 2.0).abs() < 1e-14));
    }
}
