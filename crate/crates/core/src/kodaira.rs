//! Kodaira maps: lifts, the pulled-back Fubini–Study form, Tian's
//! almost-isometry error, the localization profile `f_N` and injectivity.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geometry::{heisenberg_chart, HeisenbergChart};
use crate::models::{BundlePoint, Model, SectionSpace};
use crate::numeric::loglog_slope;
use crate::{Error, Result};

type C = Complex64;

/// `Φ̃_N(x) = (Ŝ_1(x), …, Ŝ_d(x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KodairaLift {
    pub level: usize,
    pub components: Vec<C>,
}

impl KodairaLift {
    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|z| z.norm_sqr()).sum()
    }
}

pub fn kodaira_lift(space: &dyn SectionSpace, x: &BundlePoint) -> KodairaLift {
    KodairaLift { level: space.level(), components: space.lift_at(x) }
}

/// Fubini–Study distance between the lines spanned by two lifts.
pub fn projective_angle(a: &[C], b: &[C]) -> f64 {
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let ip: C = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    let phase = if ip.norm() > 0.0 { ip / ip.norm() } else { C::new(1.0, 0.0) };
    let chord = a.iter().zip(b).map(|(x, y)| (x / na - y * phase / nb).norm_sqr()).sum::<f64>().sqrt();
    2.0 * (0.5 * chord).min(1.0).asin()
}

/// Base step of the mixed differences in chart units, before the `1/√N`
/// rescaling.
pub const PULLBACK_STEP: f64 = 1e-3;

/// `(i/2) d¹d² log Π_N` on the diagonal at the chart point `z`, as a real
/// antisymmetric matrix in chart coordinates. Mixed central differences with
/// step `h = 1e-3/√N`, Richardson-combined with step `2h`.
pub fn pullback_fs_form(space: &dyn SectionSpace, chart: &HeisenbergChart, z: &[C]) -> Result<DMatrix<f64>> {
    let m = z.len();
    let d = 2 * m;
    let h = PULLBACK_STEP / (space.level() as f64).sqrt();
    let x0 = chart.point(z, 0.0)?;
    if !(space.diagonal(&x0.pos) > 1e-300) {
        return Err(Error::NotPositive("kernel diagonal vanishes".into()));
    }
    let shifted = |a: usize, s: f64| -> Result<BundlePoint> {
        let mut zz = z.to_vec();
        if a % 2 == 0 {
            zz[a / 2] += C::new(s, 0.0);
        } else {
            zz[a / 2] += C::new(0.0, s);
        }
        chart.point(&zz, 0.0)
    };
    let mixed = |a: usize, b: usize, h: f64| -> Result<C> {
        let ap = shifted(a, h)?;
        let am = shifted(a, -h)?;
        let bp = shifted(b, h)?;
        let bm = shifted(b, -h)?;
        let f = |x: &BundlePoint, y: &BundlePoint| space.kernel(x, y).ln();
        Ok((f(&ap, &bp) - f(&ap, &bm) - f(&am, &bp) + f(&am, &bm)) / (4.0 * h * h))
    };
    let mut hm = DMatrix::<C>::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let h1 = mixed(a, b, h)?;
            let h2 = mixed(a, b, 2.0 * h)?;
            hm[(a, b)] = (4.0 * h1 - h2) / 3.0;
        }
    }
    let i = C::new(0.0, 1.0);
    let form = DMatrix::from_fn(d, d, |a, b| 0.5 * i * (hm[(a, b)] - hm[(b, a)]));
    let imag = form.iter().fold(0.0f64, |acc, v| acc.max(v.im.abs()));
    let scale = form.iter().fold(0.0f64, |acc, v| acc.max(v.re.abs()));
    if imag > 1e-6 * scale.max(1.0) {
        return Err(Error::NotConverged(format!("pullback has imaginary part {imag:e}")));
    }
    Ok(form.map(|v| v.re))
}

/// `‖G^{-1/2} E G^{-1/2}‖` for a 2-form difference `E` and metric `G`.
pub fn form_norm(e: &DMatrix<f64>, g: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(g.clone());
    let s = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let t = &s * e * &s;
    t.singular_values().max()
}

/// One sample point of a Tian report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TianSample {
    pub level: usize,
    pub point: Vec<C>,
    pub pullback_over_n: Vec<f64>,
    pub omega: Vec<f64>,
    pub error: f64,
}

/// C⁰ error of `(1/N)Φ_N*ω_FS − ω` over sample points, per level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TianReport {
    pub model: String,
    pub norm: String,
    pub levels: Vec<usize>,
    pub errors: Vec<f64>,
    pub fitted_order: Option<f64>,
    pub samples: Vec<TianSample>,
}

/// Tian error at every sample point, each in its own Heisenberg chart.
pub fn tian_error(spaces: &[&dyn SectionSpace], points: &[Vec<C>]) -> Result<TianReport> {
    if spaces.len() < 2 {
        return Err(Error::InvalidParameter("Tian report needs at least two levels".into()));
    }
    let model = spaces[0].model().clone();
    let charts: Vec<HeisenbergChart> =
        points.iter().map(|p| heisenberg_chart(&model, &BundlePoint::base(p.clone()))).collect::<Result<_>>()?;
    let mut samples = Vec::new();
    let mut errors = Vec::new();
    for s in spaces {
        let n = s.level() as f64;
        let row: Vec<TianSample> = charts
            .par_iter()
            .zip(points)
            .map(|(ch, p)| {
                let zero = vec![C::new(0.0, 0.0); p.len()];
                let pb = pullback_fs_form(*s, ch, &zero)? / n;
                let om = ch.chart().omega_at(&zero);
                let g = ch.chart().metric_at(&zero);
                let err = form_norm(&(&pb - &om), &g);
                Ok(TianSample {
                    level: s.level(),
                    point: p.clone(),
                    pullback_over_n: pb.iter().copied().collect(),
                    omega: om.iter().copied().collect(),
                    error: err,
                })
            })
            .collect::<Result<_>>()?;
        errors.push(row.iter().map(|t| t.error).fold(0.0, f64::max));
        samples.extend(row);
    }
    let levels: Vec<usize> = spaces.iter().map(|s| s.level()).collect();
    let xs: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    let fitted_order = if errors.iter().all(|e| *e > 0.0) { Some(loglog_slope(&xs, &errors)) } else { None };
    Ok(TianReport { model: model.id(), norm: "C0, g-operator norm".into(), levels, errors, fitted_order, samples })
}

/// `f_N(t) = |Π_N(0, tv/√N)|² / (Π_N(0,0) Π_N(tv/√N, tv/√N))` in a chart.
pub fn fn_profile(space: &dyn SectionSpace, chart: &HeisenbergChart, v: &[C], ts: &[f64]) -> Result<Vec<f64>> {
    if v.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::InvalidParameter("direction v must be nonzero".into()));
    }
    let s = (space.level() as f64).sqrt();
    let x0 = chart.point(&vec![C::new(0.0, 0.0); v.len()], 0.0)?;
    let d0 = space.diagonal(&x0.pos);
    ts.iter()
        .map(|&t| {
            let z: Vec<C> = v.iter().map(|a| a * (t / s)).collect();
            let x = chart.point(&z, 0.0)?;
            Ok(space.kernel(&x0, &x).norm_sqr() / (d0 * space.diagonal(&x.pos)))
        })
        .collect()
}

/// Result of an injectivity scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub level: usize,
    pub pairs: usize,
    pub collisions: usize,
    pub min_angle: f64,
    pub floor: f64,
}

/// Projective collision floor.
pub const COLLISION_FLOOR: f64 = 1e-9;

/// Checks that lifts of distinct points span distinct lines.
pub fn injectivity_scan(space: &dyn SectionSpace, pairs: &[(Vec<C>, Vec<C>)]) -> InjectivityReport {
    let angles: Vec<(f64, bool)> = pairs
        .par_iter()
        .map(|(p, q)| {
            let a = space.lift(p);
            let b = space.lift(q);
            let distinct = p.iter().zip(q).any(|(x, y)| x != y);
            (projective_angle(&a, &b), distinct)
        })
        .collect();
    let collisions = angles.iter().filter(|(a, d)| *d && *a < COLLISION_FLOOR).count();
    let min_angle = angles.iter().filter(|(_, d)| *d).map(|(a, _)| *a).fold(f64::INFINITY, f64::min);
    InjectivityReport { level: space.level(), pairs: pairs.len(), collisions, min_angle, floor: COLLISION_FLOOR }
}

/// A uniformly distributed point of a compact model.
pub fn random_point(model: &Model, rng: &mut ChaCha8Rng) -> Vec<C> {
    match model {
        Model::Torus { tau } => vec![rng.random::<f64>() + *tau * rng.random::<f64>()],
        Model::BargmannFock { m } => {
            (0..*m).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
        }
        _ => {
            let t: f64 = rng.random_range(-0.98..1.0);
            let r = ((1.0 - t) / (1.0 + t)).sqrt();
            vec![C::from_polar(r, rng.random_range(0.0..2.0 * PI))]
        }
    }
}

/// Point pairs covering both regimes: half at separation `r√N ∈ [0.05, 2]`
/// (metric units, through the preferred chart, capped at 0.9 of the chart
/// radius), half independent uniform.
pub fn sample_pairs(model: &Model, level: usize, count: usize, seed: u64) -> Result<Vec<(Vec<C>, Vec<C>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let p = random_point(model, &mut rng);
        if i % 2 == 0 {
            let ch = crate::geometry::build_preferred_chart(model, &p)?;
            let r = (rng.random_range(0.05..2.0) / (level as f64).sqrt()).min(0.9 * ch.radius);
            let dir = C::from_polar(r, rng.random_range(0.0..2.0 * PI));
            let mut z = vec![C::new(0.0, 0.0); p.len()];
            z[0] = dir;
            out.push((p, ch.to_model(&z)?));
        } else {
            out.push((p, random_point(model, &mut rng)));
        }
    }
    Ok(out)
}

/// `√N · sup_t |f_N(t) − e^{−|v|²t²}|`, the constant of the Gaussian envelope
/// `f_N(t) = e^{−|v|²t²} + O(N^{-1/2})`.
pub fn envelope_constant(profile: &[f64], ts: &[f64], v: &[C], level: usize) -> f64 {
    let v2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let dev = profile.iter().zip(ts).map(|(f, t)| (f - (-v2 * t * t).exp()).abs()).fold(0.0, f64::max);
    dev * (level as f64).sqrt()
}
