//! Reference measures, densities and random variables.
//!
//! A [`Measure`] is either a finite weighted support or a 1-D quadrature
//! grid; in both cases integrals reduce to weighted sums `Σ f(x_i) w_i`.
//! Boolean supports `{+1,-1}^n` store each configuration as an integer code
//! whose bit `i` is set when `x_i = -1`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::quadrature;
use crate::{Error, Result};

/// Default mass tolerance for densities on finite supports.
pub const FINITE_MASS_TOL: f64 = 1e-12;
/// Default mass tolerance for densities on quadrature grids.
pub const GRID_MASS_TOL: f64 = 1e-8;
/// Default centering tolerance, scaled by `max(1, sup|u|)`.
pub const CENTER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum QuadratureRule {
    GaussLegendre { panels: usize, order: usize },
    PeriodicTrapezoid,
    GaussHermite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    Finite,
    Grid1d {
        lo: f64,
        hi: f64,
        rule: QuadratureRule,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Points {
    Reals(Vec<f64>),
    Bits { sites: usize, codes: Vec<u64> },
}

impl Points {
    pub fn len(&self) -> usize {
        match self {
            Points::Reals(x) => x.len(),
            Points::Bits { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    kind: MeasureKind,
    points: Points,
    weights: Vec<f64>,
}

impl Measure {
    fn validated(kind: MeasureKind, points: Points, weights: Vec<f64>) -> Result<Arc<Self>> {
        if points.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidMeasure(format!(
                "weight {i} is not strictly positive: {}",
                weights[i]
            )));
        }
        match (&kind, &points) {
            (MeasureKind::Finite, Points::Reals(x)) => {
                let mut sorted = x.clone();
                sorted.sort_by(f64::total_cmp);
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidMeasure("support points are not distinct".into()));
                }
            }
            (MeasureKind::Finite, Points::Bits { sites, codes }) => {
                if *sites > 30 {
                    return Err(Error::InvalidMeasure("too many boolean sites".into()));
                }
                let mut sorted = codes.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidMeasure("boolean codes are not distinct".into()));
                }
                if codes.iter().any(|c| *c >= 1u64 << sites) {
                    return Err(Error::InvalidMeasure("boolean code out of range".into()));
                }
            }
            (MeasureKind::Grid1d { .. }, Points::Reals(x)) => {
                if x.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidMeasure("grid nodes not strictly increasing".into()));
                }
            }
            (MeasureKind::Grid1d { .. }, Points::Bits { .. }) => {
                return Err(Error::InvalidMeasure("grid nodes must be reals".into()));
            }
        }
        Ok(Arc::new(Self {
            kind,
            points,
            weights,
        }))
    }

    /// Finite support with arbitrary positive weights.
    pub fn finite(points: Vec<f64>, weights: Vec<f64>) -> Result<Arc<Self>> {
        Self::validated(MeasureKind::Finite, Points::Reals(points), weights)
    }

    /// Counting measure on the given points.
    pub fn counting(points: Vec<f64>) -> Result<Arc<Self>> {
        let w = vec![1.0; points.len()];
        Self::finite(points, w)
    }

    /// Counting measure on `{0, 1, ..., n-1}`.
    pub fn counting_n(n: usize) -> Result<Arc<Self>> {
        Self::counting((0..n).map(|i| i as f64).collect())
    }

    /// Counting measure on the full boolean cube `{+1,-1}^sites`.
    pub fn boolean(sites: usize) -> Result<Arc<Self>> {
        if sites == 0 || sites > 24 {
            return Err(Error::InvalidMeasure(format!(
                "boolean cube needs 1..=24 sites, got {sites}"
            )));
        }
        let n = 1usize << sites;
        Self::validated(
            MeasureKind::Finite,
            Points::Bits {
                sites,
                codes: (0..n as u64).collect(),
            },
            vec![1.0; n],
        )
    }

    /// Composite Gauss–Legendre grid on the truncated domain `[lo, hi]`.
    pub fn gauss_legendre(lo: f64, hi: f64, panels: usize, order: usize) -> Result<Arc<Self>> {
        let (nodes, weights) = quadrature::composite_gauss_legendre(lo, hi, panels, order)?;
        Self::validated(
            MeasureKind::Grid1d {
                lo,
                hi,
                rule: QuadratureRule::GaussLegendre { panels, order },
            },
            Points::Reals(nodes),
            weights,
        )
    }

    /// Uniform periodic grid on `[lo, hi)` with `n` nodes and weight `h = (hi-lo)/n`.
    pub fn periodic(lo: f64, hi: f64, n: usize) -> Result<Arc<Self>> {
        if n < 3 || !(lo < hi) {
            return Err(Error::InvalidMeasure("periodic grid needs n >= 3 and lo < hi".into()));
        }
        let h = (hi - lo) / n as f64;
        Self::validated(
            MeasureKind::Grid1d {
                lo,
                hi,
                rule: QuadratureRule::PeriodicTrapezoid,
            },
            Points::Reals((0..n).map(|i| lo + i as f64 * h).collect()),
            vec![h; n],
        )
    }

    /// The standard normal law realized by an `n`-node Gauss–Hermite rule.
    pub fn gauss_hermite(n: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return Err(Error::InvalidMeasure("need at least one node".into()));
        }
        let (nodes, weights) = quadrature::gauss_hermite_probabilists(n);
        Self::validated(
            MeasureKind::Grid1d {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                rule: QuadratureRule::GaussHermite,
            },
            Points::Reals(nodes),
            weights,
        )
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.kind, MeasureKind::Grid1d { .. })
    }

    /// Support points as reals; boolean codes are returned as their integer value.
    pub fn real_points(&self) -> Vec<f64> {
        match &self.points {
            Points::Reals(x) => x.clone(),
            Points::Bits { codes, .. } => codes.iter().map(|c| *c as f64).collect(),
        }
    }

    /// Number of sites when the support is boolean.
    pub fn sites(&self) -> Option<usize> {
        match &self.points {
            Points::Bits { sites, .. } => Some(*sites),
            Points::Reals(_) => None,
        }
    }

    /// Spin `x_site ∈ {+1,-1}` of the support point at `index`.
    pub fn spin(&self, index: usize, site: usize) -> Result<f64> {
        match &self.points {
            Points::Bits { sites, codes } if site < *sites => {
                Ok(if codes[index] >> site & 1 == 1 { -1.0 } else { 1.0 })
            }
            Points::Bits { .. } => Err(Error::InvalidArgument(format!("site {site} out of range"))),
            Points::Reals(_) => Err(Error::NotBoolean),
        }
    }

    /// True when the support is the full cube `{+1,-1}^n` in code order.
    pub fn is_full_cube(&self) -> bool {
        match &self.points {
            Points::Bits { sites, codes } => {
                codes.len() == 1usize << sites && codes.iter().enumerate().all(|(i, c)| *c == i as u64)
            }
            Points::Reals(_) => false,
        }
    }

    /// `∫ f dμ` for `f` given by its values on the support.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    /// Default mass tolerance for densities on this measure.
    pub fn mass_tolerance(&self) -> f64 {
        if self.is_grid() {
            GRID_MASS_TOL
        } else {
            FINITE_MASS_TOL
        }
    }

    /// Total mass `μ(Ω)`.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub(crate) fn same_base(a: &Arc<Measure>, b: &Arc<Measure>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn check_base(a: &Arc<Measure>, b: &Arc<Measure>) -> Result<()> {
    if same_base(a, b) {
        Ok(())
    } else {
        Err(Error::BaseMismatch)
    }
}

fn check_values(base: &Measure, values: &[f64]) -> Result<()> {
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

/// A real function on the support of a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    base: Arc<Measure>,
    values: Vec<f64>,
}

impl RandomVariable {
    pub fn new(base: Arc<Measure>, values: Vec<f64>) -> Result<Self> {
        check_values(&base, &values)?;
        Ok(Self { base, values })
    }

    pub fn constant(base: Arc<Measure>, c: f64) -> Self {
        let values = vec![c; base.len()];
        Self { base, values }
    }

    /// Evaluates `f` at every real support point (boolean codes as integers).
    pub fn from_fn(base: Arc<Measure>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = base.real_points().into_iter().map(f).collect();
        Self::new(base, values)
    }

    /// The coordinate function `x ↦ x_site` on a boolean support.
    pub fn spin(base: Arc<Measure>, site: usize) -> Result<Self> {
        let values = (0..base.len())
            .map(|i| base.spin(i, site))
            .collect::<Result<Vec<_>>>()?;
        Self::new(base, values)
    }

    pub fn base(&self) -> &Arc<Measure> {
        &self.base
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            base: self.base.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_base(&self.base, &other.base)?;
        Ok(Self {
            base: self.base.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.zip_with(other, |x, y| a * x + b * y)
    }
}

/// A strictly positive unit-mass function on a measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    base: Arc<Measure>,
    values: Vec<f64>,
}

impl Density {
    /// Validates positivity and unit mass within the measure's default tolerance.
    pub fn new(base: Arc<Measure>, values: Vec<f64>) -> Result<Self> {
        let tol = base.mass_tolerance();
        Self::with_tolerance(base, values, tol)
    }

    pub fn with_tolerance(base: Arc<Measure>, values: Vec<f64>, tol: f64) -> Result<Self> {
        check_values(&base, &values)?;
        if let Some(index) = values.iter().position(|v| *v <= 0.0) {
            return Err(Error::NonPositive {
                index,
                value: values[index],
            });
        }
        let mass = base.integrate(&values);
        if (mass - 1.0).abs() > tol {
            return Err(Error::NotNormalized { mass, tol });
        }
        Ok(Self { base, values })
    }

    /// Normalizes positive values to unit mass.
    pub fn normalize(base: Arc<Measure>, values: Vec<f64>) -> Result<Self> {
        check_values(&base, &values)?;
        if let Some(index) = values.iter().position(|v| *v <= 0.0) {
            return Err(Error::NonPositive {
                index,
                value: values[index],
            });
        }
        let mass = base.integrate(&values);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Numerical(format!("cannot normalize mass {mass}")));
        }
        let values = values.into_iter().map(|v| v / mass).collect();
        Ok(Self { base, values })
    }

    /// Density proportional to `exp(log_values)`, normalized with a max shift.
    pub fn from_log(base: Arc<Measure>, log_values: &[f64]) -> Result<Self> {
        check_values(&base, log_values)?;
        let shift = log_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = log_values.iter().map(|l| (l - shift).exp()).collect();
        let mass = base.integrate(&raw);
        let values: Vec<f64> = raw.into_iter().map(|v| v / mass).collect();
        if let Some(index) = values.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Numerical(format!(
                "underflow: density vanishes at index {index}"
            )));
        }
        Ok(Self { base, values })
    }

    /// Uniform density `1/μ(Ω)`.
    pub fn uniform(base: Arc<Measure>) -> Self {
        let c = 1.0 / base.total_mass();
        let values = vec![c; base.len()];
        Self { base, values }
    }

    pub fn base(&self) -> &Arc<Measure> {
        &self.base
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.base.integrate(&self.values)
    }

    pub fn as_rv(&self) -> RandomVariable {
        RandomVariable {
            base: self.base.clone(),
            values: self.values.clone(),
        }
    }

    pub fn ln(&self) -> RandomVariable {
        RandomVariable {
            base: self.base.clone(),
            values: self.values.iter().map(|v| v.ln()).collect(),
        }
    }

    /// Ratio `self / other` as a random variable.
    pub fn ratio(&self, other: &Density) -> Result<RandomVariable> {
        check_base(&self.base, &other.base)?;
        Ok(RandomVariable {
            base: self.base.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a / b)
                .collect(),
        })
    }

    /// `(1-λ)·self + λ·other`.
    pub fn mixture(&self, other: &Density, lambda: f64) -> Result<Density> {
        check_base(&self.base, &other.base)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect();
        Density::with_tolerance(self.base.clone(), values, 1e-10)
    }

    /// Largest pointwise difference to another density.
    pub fn sup_distance(&self, other: &Density) -> Result<f64> {
        check_base(&self.base, &other.base)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn to_record(&self) -> DensityRecord {
        DensityRecord::new(&self.base, Some(&self.values))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("density record serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: DensityRecord =
            serde_json::from_str(s).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let base = rec.measure()?;
        let values = rec
            .values
            .ok_or_else(|| Error::InvalidArgument("record has no density values".into()))?;
        Density::new(base, values)
    }

    /// CSV with header `point,weight,value`, one row per support point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("point,weight,value\n");
        for ((x, w), v) in self
            .base
            .real_points()
            .iter()
            .zip(self.base.weights())
            .zip(&self.values)
        {
            out.push_str(&format!("{x},{w},{v}\n"));
        }
        out
    }
}

fn centering_tol(values: &[f64]) -> f64 {
    CENTER_TOL * values.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

macro_rules! centered_vector {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            at: Density,
            rv: RandomVariable,
        }

        impl $name {
            /// Checks that `rv` is centered under `at`.
            pub fn new(at: Density, rv: RandomVariable) -> Result<Self> {
                let mean = expect(&at, &rv)?;
                if mean.abs() > centering_tol(rv.values()) {
                    return Err(Error::NotCentered { mean });
                }
                Ok(Self { at, rv })
            }

            /// Subtracts the mean of `rv` under `at`.
            pub fn centered(at: Density, rv: RandomVariable) -> Result<Self> {
                let mean = expect(&at, &rv)?;
                let rv = rv.shift(-mean);
                Ok(Self { at, rv })
            }

            pub fn zero(at: Density) -> Self {
                let rv = RandomVariable::constant(at.base().clone(), 0.0);
                Self { at, rv }
            }

            pub fn at(&self) -> &Density {
                &self.at
            }

            pub fn rv(&self) -> &RandomVariable {
                &self.rv
            }

            pub fn values(&self) -> &[f64] {
                self.rv.values()
            }

            pub fn into_rv(self) -> RandomVariable {
                self.rv
            }
        }
    };
}

centered_vector!(
    /// A random variable centered under its base density: an element of the
    /// model space at that density, used as exponential-chart coordinate.
    TangentVector
);

centered_vector!(
    /// A random variable centered under its base density in the mixture
    /// (dual) role.
    CotangentVector
);

centered_vector!(
    /// A centered square-integrable random variable, element of the Hilbert
    /// fiber `L²_0(p)` at its base density.
    HilbertVector
);

/// `E_p[u] = Σ u_i p_i w_i`.
pub fn expect(p: &Density, u: &RandomVariable) -> Result<f64> {
    check_base(p.base(), u.base())?;
    Ok(p.values
        .iter()
        .zip(&u.values)
        .zip(p.base.weights())
        .map(|((p, u), w)| p * u * w)
        .sum())
}

/// `Cov_p(u, v) = E_p[(u - E_p u)(v - E_p v)]`.
pub fn covariance(p: &Density, u: &RandomVariable, v: &RandomVariable) -> Result<f64> {
    let mu = expect(p, u)?;
    let mv = expect(p, v)?;
    check_base(u.base(), v.base())?;
    Ok(p.values
        .iter()
        .zip(u.values.iter().zip(&v.values))
        .zip(p.base.weights())
        .map(|((p, (u, v)), w)| p * (u - mu) * (v - mv) * w)
        .sum())
}

/// `log E_p[e^u]`, evaluated with a max shift.
pub fn log_expect_exp(p: &Density, u: &RandomVariable) -> Result<f64> {
    check_base(p.base(), u.base())?;
    let shift = u.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = p
        .values
        .iter()
        .zip(&u.values)
        .zip(p.base.weights())
        .map(|((p, u), w)| p * w * (u - shift).exp())
        .sum();
    Ok(shift + s.ln())
}

/// Serialized form `{kind, points, weights, values}` of a measure or density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridRecord>,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub nodes: usize,
    #[serde(flatten)]
    pub rule: QuadratureRule,
}

impl DensityRecord {
    pub fn new(base: &Measure, values: Option<&[f64]>) -> Self {
        let (kind, grid) = match base.kind() {
            MeasureKind::Finite => ("finite".to_string(), None),
            MeasureKind::Grid1d { lo, hi, rule } => (
                "grid1d".to_string(),
                Some(GridRecord {
                    lo: lo.is_finite().then_some(*lo),
                    hi: hi.is_finite().then_some(*hi),
                    nodes: base.len(),
                    rule: rule.clone(),
                }),
            ),
        };
        Self {
            kind,
            sites: base.sites(),
            grid,
            points: base.real_points(),
            weights: base.weights().to_vec(),
            values: values.map(<[f64]>::to_vec),
        }
    }

    /// Rebuilds the measure described by the record.
    pub fn measure(&self) -> Result<Arc<Measure>> {
        match (self.kind.as_str(), &self.grid) {
            ("finite", _) => match self.sites {
                Some(sites) => {
                    let codes = self
                        .points
                        .iter()
                        .map(|x| {
                            if *x >= 0.0 && x.fract() == 0.0 {
                                Ok(*x as u64)
                            } else {
                                Err(Error::InvalidMeasure(format!("bad boolean code {x}")))
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Measure::validated(
                        MeasureKind::Finite,
                        Points::Bits { sites, codes },
                        self.weights.clone(),
                    )
                }
                None => Measure::finite(self.points.clone(), self.weights.clone()),
            },
            ("grid1d", Some(g)) => Measure::validated(
                MeasureKind::Grid1d {
                    lo: g.lo.unwrap_or(f64::NEG_INFINITY),
                    hi: g.hi.unwrap_or(f64::INFINITY),
                    rule: g.rule.clone(),
                },
                Points::Reals(self.points.clone()),
                self.weights.clone(),
            ),
            (kind, _) => Err(Error::InvalidMeasure(format!("unknown measure kind {kind:?}"))),
        }
    }
}

impl Measure {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&DensityRecord::new(self, None)).expect("measure record serializes")
    }

    pub fn from_json(s: &str) -> Result<Arc<Self>> {
        let rec: DensityRecord =
            serde_json::from_str(s).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        rec.measure()
    }

    /// CSV with header `point,weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("point,weight\n");
        for (x, w) in self.real_points().iter().zip(&self.weights) {
            out.push_str(&format!("{x},{w}\n"));
        }
        out
    }
}
