//! The unit sphere of `L²(μ)`, the square-root embedding of densities, and
//! the isometric transports built on it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::exp_manifold::check_at;
use crate::measure::{check_base, expect, Density, Measure, MeasureKind, QuadratureRule};
pub use crate::measure::HilbertVector;
use crate::measure::{RandomVariable, TangentVector};
use crate::{Error, Result};

/// Tolerance for `⟨x,x⟩ = 1` and `⟨u,x⟩ = 0`.
pub const SPHERE_TOL: f64 = 1e-12;
/// Default finite-difference step for derivatives on the sphere.
pub const DEFAULT_STEP: f64 = 1e-5;

fn inner_raw(base: &Measure, a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(base.weights()).map(|((a, b), w)| a * b * w).sum()
}

/// A point `x` with `∫ x² dμ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    base: Arc<Measure>,
    values: Vec<f64>,
}

/// A vector `u` with `⟨u, x⟩ = 0`, tangent at the point `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereTangent {
    at: SpherePoint,
    values: Vec<f64>,
}

fn check_len(base: &Measure, values: &[f64]) -> Result<()> {
    if values.len() != base.len() {
        return Err(Error::LengthMismatch {
            expected: base.len(),
            got: values.len(),
        });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

impl SpherePoint {
    pub fn new(base: Arc<Measure>, values: Vec<f64>) -> Result<Self> {
        check_len(&base, &values)?;
        let norm2 = inner_raw(&base, &values, &values);
        if (norm2 - 1.0).abs() > SPHERE_TOL {
            return Err(Error::InvalidArgument(format!(
                "point is off the unit sphere: squared norm {norm2}"
            )));
        }
        Ok(Self { base, values })
    }

    /// Radial projection `f / ‖f‖`.
    pub fn normalize(base: Arc<Measure>, values: Vec<f64>) -> Result<Self> {
        check_len(&base, &values)?;
        let norm = inner_raw(&base, &values, &values).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidArgument("cannot normalize the zero function".into()));
        }
        let values = values.into_iter().map(|v| v / norm).collect();
        Ok(Self { base, values })
    }

    pub fn base(&self) -> &Arc<Measure> {
        &self.base
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn inner(&self, other: &[f64]) -> f64 {
        inner_raw(&self.base, &self.values, other)
    }

    /// Orthogonal projection `Π_x f = f - ⟨f,x⟩ x` onto the tangent space.
    pub fn project(&self, f: &[f64]) -> Result<SphereTangent> {
        check_len(&self.base, f)?;
        let c = self.inner(f);
        let values = f.iter().zip(&self.values).map(|(f, x)| f - c * x).collect();
        Ok(SphereTangent {
            at: self.clone(),
            values,
        })
    }

    /// The density `x²`.
    pub fn density(&self) -> Result<Density> {
        Density::with_tolerance(
            self.base.clone(),
            self.values.iter().map(|x| x * x).collect(),
            1e-10,
        )
    }
}

impl SphereTangent {
    pub fn new(at: SpherePoint, values: Vec<f64>) -> Result<Self> {
        check_len(&at.base, &values)?;
        let dot = at.inner(&values);
        let scale = inner_raw(&at.base, &values, &values).sqrt().max(1.0);
        if dot.abs() > SPHERE_TOL * scale {
            return Err(Error::InvalidArgument(format!(
                "vector is not tangent: <u,x> = {dot}"
            )));
        }
        Ok(Self { at, values })
    }

    pub fn zero(at: SpherePoint) -> Self {
        let values = vec![0.0; at.values.len()];
        Self { at, values }
    }

    pub fn at(&self) -> &SpherePoint {
        &self.at
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn inner(&self, other: &SphereTangent) -> f64 {
        inner_raw(&self.at.base, &self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }
}

/// `p ↦ √p`.
pub fn embed_sqrt(p: &Density) -> SpherePoint {
    SpherePoint {
        base: p.base().clone(),
        values: p.values().iter().map(|v| v.sqrt()).collect(),
    }
}

/// `w ↦ w √p`, the isometry of `L²_0(p)` onto the tangent space at `√p`.
pub fn lift(u: &HilbertVector) -> SphereTangent {
    let x = embed_sqrt(u.at());
    let values = u.values().iter().zip(&x.values).map(|(u, s)| u * s).collect();
    SphereTangent { at: x, values }
}

/// Inverse of [`lift`]: `v ↦ v / x` at the density `x²`.
pub fn unlift(v: &SphereTangent) -> Result<HilbertVector> {
    let p = v.at.density()?;
    let rv = RandomVariable::new(
        p.base().clone(),
        v.values.iter().zip(&v.at.values).map(|(v, x)| v / x).collect(),
    )?;
    HilbertVector::centered(p, rv)
}

/// Projection chart `s_x(y) = Π_x y`, defined for `⟨x,y⟩ > 0`.
pub fn sphere_chart(x: &SpherePoint, y: &SpherePoint) -> Result<SphereTangent> {
    check_base(&x.base, &y.base)?;
    let c = x.inner(&y.values);
    if !(c > 0.0) {
        return Err(Error::ChartDomain(format!("<x,y> = {c} is not positive")));
    }
    x.project(&y.values)
}

/// Patch `u ↦ u + √(1 - ⟨u,u⟩) x`, defined for `⟨u,u⟩ < 1`.
pub fn sphere_patch(u: &SphereTangent) -> Result<SpherePoint> {
    let n2 = u.inner(u);
    if !(n2 < 1.0) {
        return Err(Error::ChartDomain(format!("<u,u> = {n2} is not below 1")));
    }
    let c = (1.0 - n2).sqrt();
    let values = u.values.iter().zip(&u.at.values).map(|(u, x)| u + c * x).collect();
    Ok(SpherePoint {
        base: u.at.base.clone(),
        values,
    })
}

/// `U_x^y u = u - (1 + ⟨x,y⟩)^{-1} ⟨u,y⟩ (x + y)`.
pub fn sphere_transport(y: &SpherePoint, u: &SphereTangent) -> Result<SphereTangent> {
    let x = &u.at;
    check_base(&x.base, &y.base)?;
    let denom = 1.0 + x.inner(&y.values);
    if !(denom > SPHERE_TOL) {
        return Err(Error::ChartDomain("antipodal points".into()));
    }
    let c = y.inner(&u.values) / denom;
    let values = u
        .values
        .iter()
        .zip(x.values.iter().zip(&y.values))
        .map(|(u, (x, y))| u - c * (x + y))
        .collect();
    Ok(SphereTangent {
        at: y.clone(),
        values,
    })
}

/// Chart of the tangent bundle at `x`: `(y, v) ↦ (Π_x y, U_y^x v)`.
pub fn tangent_bundle_chart(
    x: &SpherePoint,
    v: &SphereTangent,
) -> Result<(SphereTangent, SphereTangent)> {
    Ok((sphere_chart(x, &v.at)?, sphere_transport(x, v)?))
}

/// Transition of tangent-bundle charts from the center of `u` to `x2`.
pub fn tangent_bundle_transition(
    x2: &SpherePoint,
    u: &SphereTangent,
    v: &SphereTangent,
) -> Result<(SphereTangent, SphereTangent)> {
    let y = sphere_patch(u)?;
    Ok((x2.project(&y.values)?, sphere_transport(x2, v)?))
}

/// `Π_x d_w F(x)`, with `d_w F` by central differences of `F` along the
/// radially normalized points `(x ± h w)/‖x ± h w‖`.
pub fn covariant_derivative_sphere<F>(field: F, w: &SphereTangent, h: f64) -> Result<SphereTangent>
where
    F: Fn(&SpherePoint) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step {h} must be positive")));
    }
    let x = &w.at;
    let shifted = |s: f64| -> Result<Vec<f64>> {
        let pt = SpherePoint::normalize(
            x.base.clone(),
            x.values.iter().zip(&w.values).map(|(x, w)| x + s * w).collect(),
        )?;
        let f = field(&pt)?;
        check_len(&x.base, &f)?;
        Ok(f)
    };
    let plus = shifted(h)?;
    let minus = shifted(-h)?;
    let d: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect();
    x.project(&d)
}

/// `U_p^q u = √(p/q) u - (1 + E_q[√(p/q)])^{-1} (1 + √(p/q)) E_q[√(p/q) u]`.
pub fn hilbert_transport(q: &Density, u: &HilbertVector) -> Result<HilbertVector> {
    let p = u.at();
    check_base(p.base(), q.base())?;
    let root = RandomVariable::new(
        p.base().clone(),
        p.values().iter().zip(q.values()).map(|(p, q)| (p / q).sqrt()).collect(),
    )?;
    let m = expect(q, &root)?;
    let c = expect(q, &root.mul(u.rv())?)? / (1.0 + m);
    let moved = root.zip_with(u.rv(), |r, u| r * u - c * (1.0 + r))?;
    HilbertVector::centered(q.clone(), moved)
}

/// Metric derivative `Ḟ(0) + ½F(0)w - E_p[Ḟ(0) + ½F(0)w]` of a curve in the
/// Hilbert bundle with `F(0) = f0`, rate `f0_dot` and score `δp(0) = w`.
pub fn metric_derivative(
    f0: &HilbertVector,
    f0_dot: &RandomVariable,
    w: &TangentVector,
) -> Result<HilbertVector> {
    let p = f0.at();
    check_at(p, w.at())?;
    let raw = f0.rv().mul(w.rv())?.lin_comb(0.5, f0_dot, 1.0)?;
    HilbertVector::centered(p.clone(), raw)
}

/// Outcome of transporting the Hermite basis `H_1..H_n` from `1` to `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteReport {
    /// `⟨U H_i, U H_j⟩` for `i, j = 1..=n_max`.
    pub gram: Vec<Vec<f64>>,
    pub max_off_diagonal: f64,
    /// Largest `|⟨U H_n, U H_n⟩ / n! - 1|`.
    pub max_diagonal_error: f64,
    /// Largest `|⟨U H_n, Y⟩|`: the transported vectors are tangent at `Y`.
    pub max_tangency: f64,
}

fn hermite_values(x: f64, n_max: usize) -> Vec<f64> {
    let mut h = vec![1.0, x];
    for n in 1..n_max {
        let next = x * h[n] - n as f64 * h[n - 1];
        h.push(next);
    }
    h.truncate(n_max + 1);
    h
}

/// Transports `H_n ↦ H_n - (1 + E[Y])^{-1} E[Y H_n] (1 + Y)` under the
/// Gauss–Hermite realization of the standard normal law and reports the
/// Gram matrix of the result.
pub fn hermite_transport_demo(y: &RandomVariable, n_max: usize) -> Result<HermiteReport> {
    let base = y.base();
    if !matches!(
        base.kind(),
        MeasureKind::Grid1d {
            rule: QuadratureRule::GaussHermite,
            ..
        }
    ) {
        return Err(Error::InvalidArgument(
            "Hermite demo needs a Gauss-Hermite base".into(),
        ));
    }
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    if base.len() < 2 * n_max + 2 {
        return Err(Error::Underresolved(format!(
            "{} nodes cannot integrate degree {} exactly",
            base.len(),
            2 * n_max + 2
        )));
    }
    let e = |f: &[f64]| base.integrate(f);
    let yv = y.values();
    let y2: Vec<f64> = yv.iter().map(|v| v * v).collect();
    if (e(&y2) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("E[Y²] = {} is not 1", e(&y2))));
    }
    let mean_y = e(yv);
    if !(1.0 + mean_y > SPHERE_TOL) {
        return Err(Error::ChartDomain("Y is antipodal to 1".into()));
    }
    let points = base.real_points();
    let table: Vec<Vec<f64>> = points.iter().map(|x| hermite_values(*x, n_max)).collect();
    let transported: Vec<Vec<f64>> = (1..=n_max)
        .map(|n| {
            let hn: Vec<f64> = table.iter().map(|row| row[n]).collect();
            let yh: Vec<f64> = hn.iter().zip(yv).map(|(h, y)| h * y).collect();
            let c = e(&yh) / (1.0 + mean_y);
            hn.iter().zip(yv).map(|(h, y)| h - c * (1.0 + y)).collect()
        })
        .collect();
    let mut gram = vec![vec![0.0; n_max]; n_max];
    let mut max_off_diagonal = 0.0f64;
    let mut max_diagonal_error = 0.0f64;
    let mut factorial = 1.0;
    for i in 0..n_max {
        factorial *= (i + 1) as f64;
        for j in 0..n_max {
            let prod: Vec<f64> = transported[i].iter().zip(&transported[j]).map(|(a, b)| a * b).collect();
            gram[i][j] = e(&prod);
            if i != j {
                max_off_diagonal = max_off_diagonal.max(gram[i][j].abs());
            }
        }
        max_diagonal_error = max_diagonal_error.max((gram[i][i] / factorial - 1.0).abs());
    }
    let max_tangency = transported
        .iter()
        .map(|t| {
            let prod: Vec<f64> = t.iter().zip(yv).map(|(a, b)| a * b).collect();
            e(&prod).abs()
        })
        .fold(0.0, f64::max);
    Ok(HermiteReport {
        gram,
        max_off_diagonal,
        max_diagonal_error,
        max_tangency,
    })
}
