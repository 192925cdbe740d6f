use std::sync::Arc;

use crate::measure::{Measure, RandomVariable};
use crate::{Error, Result};

/// Largest Walsh support for which the parity classes are enumerated.
pub const MAX_ENUMERATED_SUPPORT: usize = 24;

// coefficients below this fraction of the largest are butterfly round-off
const SUPPORT_RELATIVE_TOL: f64 = 1e-14;

/// Walsh coefficients `û(α)` of a pseudo-boolean function, `α` encoded as an
/// `n`-bit mask (bit `i` set when `α_i = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct WalshSpectrum {
    sites: usize,
    coeffs: Vec<f64>,
}

fn butterfly(values: &mut [f64]) {
    let n = values.len();
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for j in start..start + h {
                let (a, b) = (values[j], values[j + h]);
                values[j] = a + b;
                values[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

impl WalshSpectrum {
    /// Dense spectrum with `2^sites` coefficients.
    pub fn new(sites: usize, coeffs: Vec<f64>) -> Result<Self> {
        if sites == 0 || sites > 30 {
            return Err(Error::InvalidArgument(format!("bad site count {sites}")));
        }
        if coeffs.len() != 1usize << sites {
            return Err(Error::LengthMismatch {
                expected: 1usize << sites,
                got: coeffs.len(),
            });
        }
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { sites, coeffs })
    }

    /// Spectrum with the listed `(mask, coefficient)` pairs, zero elsewhere.
    pub fn from_sparse(sites: usize, terms: &[(u64, f64)]) -> Result<Self> {
        if sites == 0 || sites > 30 {
            return Err(Error::InvalidArgument(format!("bad site count {sites}")));
        }
        let mut coeffs = vec![0.0; 1usize << sites];
        for (mask, c) in terms {
            let slot = coeffs
                .get_mut(*mask as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("mask {mask} out of range")))?;
            *slot += c;
        }
        Self::new(sites, coeffs)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, mask: u64) -> f64 {
        self.coeffs.get(mask as usize).copied().unwrap_or(0.0)
    }

    /// Nonzero coefficients, ignoring round-off relative to the largest one.
    pub fn support(&self) -> Vec<(u64, f64)> {
        let max = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let cut = SUPPORT_RELATIVE_TOL * max;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > cut)
            .map(|(a, c)| (a as u64, *c))
            .collect()
    }

    /// Values `u(x) = Σ_α û(α) x^α` in code order.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut v = self.coeffs.clone();
        butterfly(&mut v);
        v
    }

    /// The function as a random variable on the full cube.
    pub fn to_random_variable(&self, base: Arc<Measure>) -> Result<RandomVariable> {
        if base.sites() != Some(self.sites) || !base.is_full_cube() {
            return Err(Error::NotBoolean);
        }
        RandomVariable::new(base, self.reconstruct())
    }
}

/// Walsh coefficients `û(α) = 2^{-n} Σ_x u(x) x^α` by a fast butterfly.
pub fn walsh_transform(u: &RandomVariable) -> Result<WalshSpectrum> {
    let base = u.base();
    let sites = base.sites().ok_or(Error::NotBoolean)?;
    if !base.is_full_cube() {
        return Err(Error::NotBoolean);
    }
    let mut v = u.values().to_vec();
    butterfly(&mut v);
    let scale = 1.0 / v.len() as f64;
    v.iter_mut().for_each(|c| *c *= scale);
    WalshSpectrum::new(sites, v)
}

/// Subsets `B` of the Walsh support with `Σ_{α∈B} α ≡ 0 (mod 2)`, stored as
/// a GF(2) basis of the kernel of the site-by-support matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityClasses {
    /// `(mask, coefficient)` for each support element, column order.
    pub support: Vec<(u64, f64)>,
    /// Kernel basis; bit `j` selects support element `j`.
    pub kernel: Vec<u32>,
}

impl ParityClasses {
    /// Number of subsets in the class, `2^{dim ker}`.
    pub fn count(&self) -> u64 {
        1u64 << self.kernel.len()
    }

    /// Every member subset, in Gray-code order starting from the empty set.
    pub fn members(&self) -> impl Iterator<Item = u32> + '_ {
        let basis = &self.kernel;
        let mut current = 0u32;
        (0..self.count()).map(move |k| {
            if k > 0 {
                current ^= basis[k.trailing_zeros() as usize];
            }
            current
        })
    }
}

/// Gaussian elimination over GF(2) on the support masks.
pub fn parity_classes(spec: &WalshSpectrum) -> Result<ParityClasses> {
    let support = spec.support();
    if support.len() > MAX_ENUMERATED_SUPPORT {
        return Err(Error::SupportTooLarge {
            size: support.len(),
            max: MAX_ENUMERATED_SUPPORT,
        });
    }
    // pivots[bit] = (reduced mask with leading bit `bit`, combination)
    let mut pivots: Vec<Option<(u64, u32)>> = vec![None; 64];
    let mut kernel = Vec::new();
    for (j, (mask, _)) in support.iter().enumerate() {
        let mut v = *mask;
        let mut comb = 1u32 << j;
        while v != 0 {
            let bit = 63 - v.leading_zeros() as usize;
            match pivots[bit] {
                Some((pv, pc)) => {
                    v ^= pv;
                    comb ^= pc;
                }
                None => {
                    pivots[bit] = Some((v, comb));
                    break;
                }
            }
        }
        if v == 0 {
            kernel.push(comb);
        }
    }
    Ok(ParityClasses { support, kernel })
}

fn class_sum(classes: &ParityClasses, t: f64, even_only: bool) -> f64 {
    let c: Vec<f64> = classes.support.iter().map(|(_, a)| (t * a).cosh()).collect();
    let s: Vec<f64> = classes.support.iter().map(|(_, a)| (t * a).sinh()).collect();
    classes
        .members()
        .filter(|b| !even_only || b.count_ones() % 2 == 0)
        .map(|b| {
            (0..c.len())
                .map(|j| if b >> j & 1 == 1 { s[j] } else { c[j] })
                .product::<f64>()
        })
        .sum()
}

/// `E[e^{t u}]` under the uniform law on the cube, from the Walsh spectrum:
/// `Σ_B Π_{α∉B} cosh(t û(α)) Π_{α∈B} sinh(t û(α))` over the parity classes.
pub fn boolean_mgf(spec: &WalshSpectrum, t: f64) -> Result<f64> {
    let classes = parity_classes(spec)?;
    Ok(class_sum(&classes, t, false))
}

/// `E[cosh(t u)] - 1 = (M(t) + M(-t))/2 - 1` under the uniform law.
pub fn boolean_cosh_moment(spec: &WalshSpectrum, t: f64) -> Result<f64> {
    let classes = parity_classes(spec)?;
    Ok(0.5 * (class_sum(&classes, t, false) + class_sum(&classes, -t, false)) - 1.0)
}

/// The same moment summed over the even-cardinality parity classes only.
pub fn boolean_cosh_moment_even_classes(spec: &WalshSpectrum, t: f64) -> Result<f64> {
    let classes = parity_classes(spec)?;
    Ok(class_sum(&classes, t, true) - 1.0)
}
