//! Near-diagonal scaling: rescaled kernels in Heisenberg coordinates compared
//! with the level-one Heisenberg kernel.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::HeisenbergChart;
use crate::models::{heisenberg_model_kernel, SectionSpace};
use crate::numeric::{complex_lstsq, linear_fit, loglog_slope};
use crate::report::{Check, Criterion};
use crate::{Error, Result};

type C = Complex64;

/// `N^{-m} Π_N(ρ(u/√N, θ/N), ρ(v/√N, φ/N))`.
pub fn rescaled_kernel(
    space: &dyn SectionSpace,
    chart: &HeisenbergChart,
    u: &[C],
    v: &[C],
    theta: f64,
    phi: f64,
) -> Result<C> {
    let n = space.level() as f64;
    let s = n.sqrt();
    let zu: Vec<C> = u.iter().map(|a| a / s).collect();
    let zv: Vec<C> = v.iter().map(|a| a / s).collect();
    let x = chart.point(&zu, theta / n)?;
    let y = chart.point(&zv, phi / n)?;
    Ok(space.kernel(&x, &y) / n.powi(chart.dim() as i32))
}

/// One grid entry `(u, v, θ, φ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub u: Vec<C>,
    pub v: Vec<C>,
    pub theta: f64,
    pub phi: f64,
}

/// The residual grid: `u, v` on the step-0.5 lattice inside `|·| ≤ radius`
/// with `θ = φ = 0`, plus a slice with `(θ, φ) = (0.7, -0.4)`.
pub fn default_grid(m: usize, radius: f64) -> Vec<GridPoint> {
    let mut ones = Vec::new();
    let k = (radius / 0.5).floor() as i64;
    for a in -k..=k {
        for b in -k..=k {
            let z = C::new(0.5 * a as f64, 0.5 * b as f64);
            if z.norm() <= radius + 1e-12 {
                ones.push(z);
            }
        }
    }
    let pts: Vec<Vec<C>> = if m == 1 {
        ones.iter().map(|z| vec![*z]).collect()
    } else {
        // Coarser product grid in two dimensions.
        let coarse: Vec<C> =
            ones.iter().copied().filter(|z| (z.re * 2.0) as i64 % 2 == 0 && (z.im * 2.0) as i64 % 2 == 0).collect();
        coarse
            .iter()
            .flat_map(|a| coarse.iter().map(move |b| vec![*a, *b]))
            .filter(|p: &Vec<C>| p.iter().map(|z| z.norm_sqr()).sum::<f64>() <= radius * radius + 1e-12)
            .collect()
    };
    let mut grid = Vec::new();
    for u in &pts {
        for v in &pts {
            grid.push(GridPoint { u: u.clone(), v: v.clone(), theta: 0.0, phi: 0.0 });
        }
    }
    for (i, u) in pts.iter().enumerate().step_by(3) {
        let v = &pts[(i * 7 + 5) % pts.len()];
        grid.push(GridPoint { u: u.clone(), v: v.clone(), theta: 0.7, phi: -0.4 });
    }
    grid
}

/// Sup over the grid of `|rescaled kernel − Π^H₁|`.
pub fn universality_residual(space: &dyn SectionSpace, chart: &HeisenbergChart, grid: &[GridPoint]) -> Result<f64> {
    let vals: Result<Vec<f64>> = grid
        .par_iter()
        .map(|g| {
            let r = rescaled_kernel(space, chart, &g.u, &g.v, g.theta, g.phi)?;
            Ok((r - heisenberg_model_kernel(&g.u, g.theta, &g.v, g.phi)).norm())
        })
        .collect();
    Ok(vals?.into_iter().fold(0.0, f64::max))
}

/// Least-squares coefficients of `rescaled/Π^H₁ − 1 ≈ Σ_{r=1}^K b_r N^{-r/2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub levels: Vec<usize>,
    pub coefficients: Vec<C>,
    pub fit_residual: f64,
}

/// Fits `b̂_1..b̂_K` at one point `(u, v)` from kernels at several levels.
pub fn fit_expansion_coefficients(
    spaces: &[&dyn SectionSpace],
    chart: &HeisenbergChart,
    u: &[C],
    v: &[C],
    k: usize,
) -> Result<ExpansionFit> {
    if k == 0 || spaces.len() < k + 2 {
        return Err(Error::IllConditioned(format!("{} levels for {} coefficients", spaces.len(), k)));
    }
    let mut levels: Vec<usize> = spaces.iter().map(|s| s.level()).collect();
    levels.sort_unstable();
    levels.dedup();
    if levels.len() != spaces.len() {
        return Err(Error::IllConditioned("repeated levels".into()));
    }
    let h = heisenberg_model_kernel(u, 0.0, v, 0.0);
    let mut a = DMatrix::<C>::zeros(spaces.len(), k);
    let mut y = DVector::<C>::zeros(spaces.len());
    for (i, s) in spaces.iter().enumerate() {
        let n = s.level() as f64;
        for r in 0..k {
            a[(i, r)] = C::new(n.powf(-((r + 1) as f64) / 2.0), 0.0);
        }
        y[i] = rescaled_kernel(*s, chart, u, v, 0.0, 0.0)? / h - 1.0;
    }
    // Column scaling keeps the conditioning test meaningful.
    let scales: Vec<f64> = (0..k).map(|r| a.column(r).norm()).collect();
    for r in 0..k {
        let sc = scales[r];
        a.column_mut(r).iter_mut().for_each(|z| *z /= sc);
    }
    let (c, res) = complex_lstsq(&a, &y, 1e-10)?;
    Ok(ExpansionFit {
        levels: spaces.iter().map(|s| s.level()).collect(),
        coefficients: c.iter().zip(&scales).map(|(z, s)| z / *s).collect(),
        fit_residual: res.norm(),
    })
}

/// Fit of `N^{-m} Π_N(x, x) ≈ a₀ + a₁/N`.
pub fn diagonal_fit(spaces: &[&dyn SectionSpace], p: &[C]) -> (f64, f64) {
    let m = p.len() as i32;
    let xs: Vec<f64> = spaces.iter().map(|s| 1.0 / s.level() as f64).collect();
    let ys: Vec<f64> = spaces.iter().map(|s| s.diagonal(p) / (s.level() as f64).powi(m)).collect();
    linear_fit(&xs, &ys)
}

/// Residuals at several levels, with ratios and a fitted decay exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub model: String,
    pub center: Vec<C>,
    pub grid_size: usize,
    pub levels: Vec<usize>,
    pub residuals: Vec<f64>,
    pub ratios: Vec<f64>,
    pub fitted_exponent: Option<f64>,
    pub checks: Vec<Check>,
}

/// Acceptance band for `residual(2N)/residual(N)`.
pub const RATIO_BAND: (f64, f64) = (0.3, 0.85);

/// Residual table over levels (doubling progression expected).
pub fn scaling_report(
    spaces: &[&dyn SectionSpace],
    chart: &HeisenbergChart,
    grid: &[GridPoint],
) -> Result<ScalingReport> {
    let mut residuals = Vec::new();
    for s in spaces {
        residuals.push(universality_residual(*s, chart, grid)?);
    }
    let levels: Vec<usize> = spaces.iter().map(|s| s.level()).collect();
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[1] / w[0]).collect();
    let fitted_exponent = if residuals.len() >= 3 {
        let xs: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
        Some(loglog_slope(&xs, &residuals))
    } else {
        None
    };
    let checks = ratios
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Check::new(
                format!("residual ratio N={}→{}", levels[i], levels[i + 1]),
                *r,
                Criterion::Within { low: RATIO_BAND.0, high: RATIO_BAND.1 },
            )
        })
        .collect();
    Ok(ScalingReport {
        model: spaces[0].model().id(),
        center: chart.chart().center.clone(),
        grid_size: grid.len(),
        levels,
        residuals,
        ratios,
        fitted_exponent,
        checks,
    })
}
