//! Seeded random instances for property checks and the CLI trials.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::measure::{Density, Measure, RandomVariable, TangentVector};

/// Density with log-values drawn from `N(0, spread²)`, then normalized.
pub fn density<R: Rng + ?Sized>(base: &Arc<Measure>, rng: &mut R, spread: f64) -> Density {
    let logs: Vec<f64> = (0..base.len())
        .map(|_| spread * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Density::from_log(base.clone(), &logs).expect("finite log-values give a density")
}

/// Random variable with i.i.d. `N(0, scale²)` values.
pub fn random_variable<R: Rng + ?Sized>(
    base: &Arc<Measure>,
    rng: &mut R,
    scale: f64,
) -> RandomVariable {
    let values = (0..base.len())
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    RandomVariable::new(base.clone(), values).expect("finite values")
}

/// Gaussian random variable centered under `p`.
pub fn tangent<R: Rng + ?Sized>(p: &Density, rng: &mut R, scale: f64) -> TangentVector {
    let rv = random_variable(p.base(), rng, scale);
    TangentVector::centered(p.clone(), rv).expect("same base")
}
