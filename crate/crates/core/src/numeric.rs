//! Small numerical helpers shared by the modules: quadrature rules,
//! regression and complex least squares.

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::num::NonZeroUsize;

use crate::{Error, Result};

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    rule.as_node_weight_pairs().iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
}

/// Gauss–Hermite nodes and weights for the weight `e^{-x^2}`.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let rule = GaussHermite::new(NonZeroUsize::new(n.max(1)).unwrap());
    rule.as_node_weight_pairs().to_vec()
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly).1
}

/// Ordinary least-squares line `y = a + b x`, returned as `(a, b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Complex least squares `min |A c - y|` via SVD. Returns the coefficients
/// and the residual vector. Fails when the smallest singular value falls
/// below `rcond` times the largest.
pub fn complex_lstsq(
    a: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    rcond: f64,
) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin < rcond * smax {
        return Err(Error::IllConditioned(format!("singular values span [{smin:e}, {smax:e}]")));
    }
    let c = svd.solve(y, 0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
    let r = y - a * &c;
    Ok((c, r))
}

/// Log-binomial coefficients `ln C(n, k)` for `k = 0..=n`.
pub fn ln_binomials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    (0..=n).map(|k| lf[n] - lf[k] - lf[n - k]).collect()
}

/// `ln k!` for `k = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n + 1];
    for k in 1..=n {
        lf[k] = lf[k - 1] + (k as f64).ln();
    }
    lf
}

/// Pairwise summation of complex values, deterministic regardless of how
/// the slice was produced.
pub fn pairwise_sum(v: &[Complex64]) -> Complex64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}
