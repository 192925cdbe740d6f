//! Quadrature rules backing `grid1d` measures.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule: `panels` equal panels on `[lo, hi]`, `order` nodes each.
pub fn composite_gauss_legendre(
    lo: f64,
    hi: f64,
    panels: usize,
    order: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidMeasure(format!("bad interval [{lo}, {hi}]")));
    }
    if panels == 0 || order == 0 {
        return Err(Error::InvalidMeasure("panels and order must be positive".into()));
    }
    let (ref_nodes, ref_weights) = gauss_legendre(order);
    let width = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for k in 0..panels {
        let a = lo + k as f64 * width;
        let mid = a + 0.5 * width;
        for (x, w) in ref_nodes.iter().zip(&ref_weights) {
            nodes.push(mid + 0.5 * width * x);
            weights.push(0.5 * width * w);
        }
    }
    Ok((nodes, weights))
}

/// Gauss–Hermite rule for the standard normal law (weights sum to one),
/// via the Golub–Welsch eigenproblem.
pub fn gauss_hermite_probabilists(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrize: the rule is exactly symmetric about zero
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        let w = 0.5 * (weights[i] + weights[j]);
        nodes[i] = -x;
        nodes[j] = x;
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    (nodes, weights)
}

/// Smallest `L` with `prefactor * exp(-rate * L) / rate < tol`, i.e. the
/// truncation point after which an exponential tail bound drops below `tol`.
pub fn exponential_tail_cutoff(prefactor: f64, rate: f64, tol: f64) -> Result<f64> {
    if !(prefactor > 0.0 && rate > 0.0 && tol > 0.0) {
        return Err(Error::InvalidArgument(
            "tail cutoff needs positive prefactor, rate and tolerance".into(),
        ));
    }
    Ok(((prefactor / (rate * tol)).ln() / rate).max(0.0))
}
