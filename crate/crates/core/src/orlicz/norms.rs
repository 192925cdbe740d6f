use super::YoungFunction;
use crate::measure::{check_base, Density, RandomVariable};
use crate::{Error, Result};

const MAX_ITER: usize = 200;

/// Modular `E_p[Φ(c·u)]`.
pub fn modular(p: &Density, u: &RandomVariable, phi: YoungFunction, c: f64) -> Result<f64> {
    check_base(p.base(), u.base())?;
    Ok(p.values()
        .iter()
        .zip(u.values())
        .zip(p.base().weights())
        .map(|((p, u), w)| p * w * phi.eval(c * u))
        .sum())
}

/// Smallest `r` (up to bisection resolution) with `g(r) ≤ 1`, for
/// `g` non-increasing, starting from the bracket `[lo, hi]`.
fn bisect_level(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let mut expansions = 0;
    while g(hi) > 1.0 {
        hi *= 10.0;
        expansions += 1;
        if expansions > 60 || !hi.is_finite() {
            return Err(Error::NoBracket(
                "modular stays above 1 for every finite radius".into(),
            ));
        }
    }
    lo = lo.min(hi);
    while lo > 0.0 && g(lo) <= 1.0 {
        hi = lo;
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Ok(hi);
        }
    }
    for _ in 0..MAX_ITER {
        let mid = if hi > 2.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(hi)
}

/// Luxemburg norm `inf{r > 0 : E_p[Φ(u/r)] ≤ 1}`.
pub fn luxemburg_norm(p: &Density, u: &RandomVariable, phi: YoungFunction) -> Result<f64> {
    check_base(p.base(), u.base())?;
    let sup = u.sup_norm();
    if sup == 0.0 {
        return Ok(0.0);
    }
    let min_mass = p
        .values()
        .iter()
        .zip(p.base().weights())
        .map(|(p, w)| p * w)
        .fold(f64::INFINITY, f64::min);
    let lo = sup / phi.inverse(1.0 / min_mass);
    let lo = if lo.is_finite() && lo > 0.0 { lo } else { sup * 1e-6 };
    let g = |r: f64| modular(p, u, phi, 1.0 / r).unwrap_or(f64::INFINITY);
    bisect_level(lo, sup * 1e6, |r| {
        let v = g(r);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    })
}

/// Dual norm `sup{E_p[u v] : E_p[Φ(u)] ≤ 1}`.
///
/// The maximizer satisfies `u_i = sign(v_i) φ^{-1}(|v_i|/λ)` with `λ` chosen
/// so the constraint is active.
pub fn dual_norm(p: &Density, v: &RandomVariable, phi: YoungFunction) -> Result<f64> {
    check_base(p.base(), v.base())?;
    let sup = v.sup_norm();
    if sup == 0.0 {
        return Ok(0.0);
    }
    let maximizer = |lambda: f64| -> RandomVariable {
        v.map(|vi| {
            if vi == 0.0 {
                0.0
            } else {
                vi.signum() * phi.derivative_inverse(vi.abs() / lambda)
            }
        })
    };
    let constraint = |lambda: f64| -> f64 {
        let u = maximizer(lambda);
        match modular(p, &u, phi, 1.0) {
            Ok(m) if m.is_finite() => m,
            _ => f64::INFINITY,
        }
    };
    let lambda = bisect_level(sup * 1e-3, sup, constraint)?;
    let u = maximizer(lambda);
    Ok(p.values()
        .iter()
        .zip(u.values())
        .zip(v.values())
        .zip(p.base().weights())
        .map(|(((p, u), v), w)| p * u * v * w)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Measure;
    use crate::orlicz::YoungPair;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn signs() -> (Density, RandomVariable) {
        let base = Measure::counting(vec![1.0, -1.0]).unwrap();
        let x = RandomVariable::from_fn(base.clone(), |x| x).unwrap();
        (Density::uniform(base), x)
    }

    #[test]
    fn zero_has_zero_norms() {
        let (p, x) = signs();
        let z = x.scale(0.0);
        let phi = YoungFunction::cosh_minus_one();
        assert_eq!(luxemburg_norm(&p, &z, phi).unwrap(), 0.0);
        assert_eq!(dual_norm(&p, &z, phi).unwrap(), 0.0);
    }

    #[test]
    fn signs_under_cosh() {
        let (p, x) = signs();
        let n = luxemburg_norm(&p, &x, YoungFunction::cosh_minus_one()).unwrap();
        assert!((n - 1.0 / 2f64.acosh()).abs() < 1e-12);
    }

    #[test]
    fn quadratic_norm_is_scaled_l2() {
        let base = Measure::counting_n(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random::density(&base, &mut rng, 0.5);
        let u = random::random_variable(&base, &mut rng, 1.0);
        let two = YoungFunction::new(YoungPair::Two);
        let l2 = crate::expect(&p, &u.mul(&u).unwrap()).unwrap().sqrt();
        let n = luxemburg_norm(&p, &u, two).unwrap();
        assert!((n - l2 / 2f64.sqrt()).abs() < 1e-12 * l2);
        // self-dual up to the same constant: sup E[uv] s.t. E[u²] ≤ 2 is √2·‖v‖₂
        let d = dual_norm(&p, &u, two).unwrap();
        assert!((d - 2f64.sqrt() * l2).abs() < 1e-10 * l2);
    }

    #[test]
    fn homogeneous_on_a_grid() {
        let base = Measure::gauss_legendre(0.0, 1.0, 4, 6).unwrap();
        let p = Density::normalize(base.clone(), base.real_points().iter().map(|x| 1.0 + x).collect()).unwrap();
        let u = RandomVariable::from_fn(base, |x| x - 0.5).unwrap();
        for phi in [YoungFunction::new(YoungPair::A), YoungFunction::cosh_minus_one()] {
            let n1 = luxemburg_norm(&p, &u, phi).unwrap();
            let n3 = luxemburg_norm(&p, &u.scale(-3.0), phi).unwrap();
            assert!((n3 - 3.0 * n1).abs() < 1e-12 * n3);
            assert!((modular(&p, &u, phi, 1.0 / n1).unwrap() - 1.0).abs() < 1e-10);
        }
    }
}
