//! Peak sections and their decay, the `1/√N` lattice, zero location on
//! curves, quantitative transversality `|∂s| ≥ η√N` on the zero set, a seeded
//! search over lattice combinations, and adjunction-formula genus arithmetic.
//!
//! Sections of level `N` are stored as coefficient vectors in the orthonormal
//! basis of a [`SectionSpace`]; the peak section at `p` has coefficients
//! `conj(Ŝ_j(p))/Π_N(p,p)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::geometry::{build_preferred_chart, heisenberg_chart, HeisenbergChart};
use crate::models::{BundlePoint, Model, SectionSpace};
use crate::report::{Check, Criterion};
use crate::{Error, Result};

type C = Complex64;
const I: C = C::new(0.0, 1.0);

/// A level-`N` section `Σ_j a_j S_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSection {
    pub level: usize,
    pub coeffs: Vec<C>,
}

impl LevelSection {
    pub fn new(level: usize, coeffs: Vec<C>) -> Self {
        LevelSection { level, coeffs }
    }

    fn check(&self, space: &dyn SectionSpace) -> Result<()> {
        if space.level() != self.level {
            return Err(Error::LevelMismatch(self.level, space.level()));
        }
        if space.dim() != self.coeffs.len() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for a space of dimension {}",
                self.coeffs.len(),
                space.dim()
            )));
        }
        Ok(())
    }

    /// Lift `ŝ(w, 0)`.
    pub fn value(&self, space: &dyn SectionSpace, w: &[C]) -> C {
        space.lift(w).iter().zip(&self.coeffs).map(|(s, a)| s * a).sum()
    }

    /// `Σ a_j ∂f_j/∂w_k ‖e‖^N` for each `k`.
    pub fn dw(&self, space: &dyn SectionSpace, w: &[C]) -> Vec<C> {
        let m = w.len();
        let d = space.lift_dw(w);
        (0..m).map(|k| self.coeffs.iter().enumerate().map(|(j, a)| a * d[j * m + k]).sum()).collect()
    }

    /// Lift at a bundle point.
    pub fn value_at(&self, space: &dyn SectionSpace, x: &BundlePoint) -> C {
        self.value(space, &x.pos) * C::from_polar(1.0, self.level as f64 * x.theta)
    }

    pub fn scaled(&self, c: C) -> LevelSection {
        LevelSection { level: self.level, coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }
}

/// The normalized coherent state `σ_p^N = Π_N(·, p)/Π_N(p, p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakSection {
    pub center: Vec<C>,
    pub section: LevelSection,
    /// `Π_N(p, p)`.
    pub diagonal: f64,
}

pub fn peak_section(space: &dyn SectionSpace, p: &[C]) -> Result<PeakSection> {
    let lift = space.lift(p);
    let diag: f64 = lift.iter().map(|z| z.norm_sqr()).sum();
    if !(diag > 0.0) {
        return Err(Error::NotPositive(format!("Π_N(p,p) = {diag:e}")));
    }
    Ok(PeakSection {
        center: p.to_vec(),
        section: LevelSection::new(space.level(), lift.iter().map(|z| z.conj() / diag).collect()),
        diagonal: diag,
    })
}

impl PeakSection {
    /// `|σ_p^N(q)|`, independent of the fiber angle.
    pub fn modulus(&self, space: &dyn SectionSpace, q: &[C]) -> f64 {
        self.section.value(space, q).norm()
    }
}

/// Value and horizontal derivatives of a section at the centre of a
/// Heisenberg chart, in the orthonormal real frame `(x₁, y₁, …)` there.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalJet {
    pub value: C,
    /// `X_a^h ŝ` at the centre.
    pub first: Vec<C>,
    /// `X_a^h X_b^h ŝ` at the centre.
    pub second: DMatrix<C>,
}

impl HorizontalJet {
    /// `|∇s|`.
    pub fn grad_norm(&self) -> f64 {
        self.first.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Components of `∂s` and `∂̄s` along `∂/∂z_j` and `∂/∂z̄_j`.
    pub fn dz(&self) -> (Vec<C>, Vec<C>) {
        let m = self.first.len() / 2;
        let d = (0..m).map(|j| 0.5 * (self.first[2 * j] - I * self.first[2 * j + 1])).collect();
        let db = (0..m).map(|j| 0.5 * (self.first[2 * j] + I * self.first[2 * j + 1])).collect();
        (d, db)
    }

    /// `|∂s|` as the norm of a covector: `√2 (Σ|∂_j s|²)^{1/2}`.
    pub fn del_norm(&self) -> f64 {
        (2.0 * self.dz().0.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn delbar_norm(&self) -> f64 {
        (2.0 * self.dz().1.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `|∇²s|`, Frobenius norm.
    pub fn hessian_norm(&self) -> f64 {
        self.second.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `|∇∂̄s|`, from the derivatives of the `∂̄` components.
    pub fn grad_delbar_norm(&self) -> f64 {
        let m = self.first.len() / 2;
        let mut s = 0.0;
        for a in 0..2 * m {
            for j in 0..m {
                let v = 0.5 * (self.second[(a, 2 * j)] + I * self.second[(a, 2 * j + 1)]);
                s += 2.0 * v.norm_sqr();
            }
        }
        s.sqrt()
    }
}

/// Step for horizontal finite differences, in units of `1/√N`.
pub const HORIZONTAL_STEP: f64 = 2e-3;

/// Horizontal derivatives of `ŝ` at the centre of `chart`, by central
/// differences of `F(z) = ŝ(ρ(z, 0))` corrected with the vertical parts of the
/// horizontal lifts: `X_aX_b ŝ = ∂_a∂_b F + iN (∂_a c_b) F` at `z = 0`, where
/// `X_a^h = ∂_a + c_a ∂_θ` and `c_a(0) = 0`.
pub fn horizontal_jet(space: &dyn SectionSpace, s: &LevelSection, chart: &HeisenbergChart) -> Result<HorizontalJet> {
    s.check(space)?;
    let m = chart.dim();
    let d = 2 * m;
    let n = space.level() as f64;
    let h = HORIZONTAL_STEP / n.sqrt();
    let shift = |a: usize, t: f64, z: &mut [C]| {
        if a % 2 == 0 {
            z[a / 2] += C::new(t, 0.0);
        } else {
            z[a / 2] += C::new(0.0, t);
        }
    };
    let f = |z: &[C]| -> Result<C> { Ok(s.value_at(space, &chart.point(z, 0.0)?)) };
    let real_c = |z: &[C]| -> Result<Vec<f64>> {
        let co = chart.horizontal_lift_coeffs(z)?;
        let mut out = Vec::with_capacity(d);
        for (cz, czb) in co {
            out.push((cz + czb).re);
            out.push((I * (cz - czb)).re);
        }
        Ok(out)
    };
    let zero = vec![C::new(0.0, 0.0); m];
    let f0 = f(&zero)?;
    let mut first = vec![C::new(0.0, 0.0); d];
    let mut second = DMatrix::<C>::zeros(d, d);
    let pt = |moves: &[(usize, f64)]| -> Vec<C> {
        let mut z = zero.clone();
        for &(a, t) in moves {
            shift(a, t, &mut z);
        }
        z
    };
    for a in 0..d {
        let fp = f(&pt(&[(a, h)]))?;
        let fm = f(&pt(&[(a, -h)]))?;
        let fp2 = f(&pt(&[(a, 2.0 * h)]))?;
        let fm2 = f(&pt(&[(a, -2.0 * h)]))?;
        first[a] = (8.0 * (fp - fm) - (fp2 - fm2)) / (12.0 * h);
        second[(a, a)] = (16.0 * (fp + fm) - (fp2 + fm2) - 30.0 * f0) / (12.0 * h * h);
        for b in 0..a {
            let g = |t: f64| -> Result<C> {
                Ok(f(&pt(&[(a, t), (b, t)]))? - f(&pt(&[(a, t), (b, -t)]))? - f(&pt(&[(a, -t), (b, t)]))?
                    + f(&pt(&[(a, -t), (b, -t)]))?)
            };
            let v = (4.0 * g(h)? / (4.0 * h * h) - g(2.0 * h)? / (16.0 * h * h)) / 3.0;
            second[(a, b)] = v;
            second[(b, a)] = v;
        }
    }
    for a in 0..d {
        let cp = real_c(&pt(&[(a, h)]))?;
        let cm = real_c(&pt(&[(a, -h)]))?;
        for b in 0..d {
            let dc = (cp[b] - cm[b]) / (2.0 * h);
            second[(a, b)] += I * n * dc * f0;
        }
    }
    Ok(HorizontalJet { value: f0, first, second })
}

// ---------------------------------------------------------------------------
// Decay of peak sections

/// One sample of a decay table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub level: usize,
    pub center: Vec<C>,
    pub point: Vec<C>,
    /// Scaled distance `d_N = √N d(q, p)`.
    pub d_n: f64,
    pub modulus: f64,
    pub lower: f64,
    pub upper: f64,
    /// `N^{-1/2}|∇σ|` and `N^{-1}|∇²σ|` over `e^{-(1-ε)d²/2}`.
    pub scaled_grad_ratio: f64,
    pub scaled_hessian_ratio: f64,
    pub delbar: f64,
}

/// Scaled distance from `p` to `q`, closed form when available and the
/// preferred-chart norm otherwise.
pub fn scaled_distance(model: &Model, level: usize, p: &[C], q: &[C]) -> Result<f64> {
    let d = match model.distance(p, q) {
        Some(d) => d,
        None => {
            let ch = build_preferred_chart(model, p)?;
            ch.from_model(q).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
        }
    };
    Ok(d * (level as f64).sqrt())
}

/// For the exact projective line, the image of `p` under the isometry
/// `w ↦ −1/w` when `|p| > 1`. Peak sections are carried to peak sections, so
/// every pointwise norm can be evaluated near `w = 0`, where the affine chart
/// is well conditioned.
pub fn projective_reflection(model: &Model, p: &[C]) -> Option<Vec<C>> {
    match model {
        Model::ProjectiveLine if p[0].norm() > 1.0 => Some(vec![-1.0 / p[0]]),
        _ => None,
    }
}

/// Number of directions sampled per radius.
pub const DECAY_DIRECTIONS: usize = 8;

/// Samples `σ_p^N` at scaled radii `d_N` in `DECAY_DIRECTIONS` directions,
/// with the lower and upper envelopes of the decay estimate for a given `C`.
pub fn decay_profile(
    space: &dyn SectionSpace,
    peak: &PeakSection,
    radii: &[f64],
    eps: f64,
    c: f64,
    derivatives: bool,
) -> Result<Vec<DecayRow>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("ε = {eps} outside (0, 1)")));
    }
    let n = space.level() as f64;
    let limit = n.powf(1.0 / 6.0);
    if let Some(r) = radii.iter().find(|&&r| !(0.0..=limit + 1e-12).contains(&r)) {
        return Err(Error::InvalidParameter(format!("radius {r} beyond the regime d_N ≤ N^(1/6) = {limit:.4}")));
    }
    let model = space.model();
    let reflected = projective_reflection(model, &peak.center);
    let local;
    let peak = match &reflected {
        Some(p) => {
            local = peak_section(space, p)?;
            &local
        }
        None => peak,
    };
    let chart = build_preferred_chart(model, &peak.center)?;
    let mut jobs = Vec::new();
    for &r in radii {
        let dirs = if r == 0.0 { 1 } else { DECAY_DIRECTIONS };
        for k in 0..dirs {
            let mut z = vec![C::new(0.0, 0.0); chart.dim()];
            z[0] = C::from_polar(r / n.sqrt(), 2.0 * PI * k as f64 / dirs as f64 + 0.1);
            jobs.push(z);
        }
    }
    jobs.par_iter()
        .map(|z| {
            let q = chart.to_model(z)?;
            let d = scaled_distance(model, space.level(), &peak.center, &q)?;
            let modulus = peak.modulus(space, &q);
            let (g, hs, db) = if derivatives {
                let hc = heisenberg_chart(model, &BundlePoint::base(q.clone()))?;
                let j = horizontal_jet(space, &peak.section, &hc)?;
                let env = (-(1.0 - eps) * d * d / 2.0).exp();
                (j.grad_norm() / n.sqrt() / env, j.hessian_norm() / n / env, j.delbar_norm())
            } else {
                (0.0, 0.0, 0.0)
            };
            let (center, point) = match &reflected {
                Some(_) => (vec![-1.0 / peak.center[0]], vec![-1.0 / q[0]]),
                None => (peak.center.clone(), q),
            };
            Ok(DecayRow {
                level: space.level(),
                center,
                point,
                d_n: d,
                modulus,
                lower: (1.0 - c * d / n.sqrt()) * (-(1.0 + eps) * d * d / 2.0).exp(),
                upper: (1.0 + c * d / n.sqrt()) * (-(1.0 - eps) * d * d / 2.0).exp(),
                scaled_grad_ratio: g,
                scaled_hessian_ratio: hs,
                delbar: db,
            })
        })
        .collect()
}

/// Smallest `C ≥ 0` for which both envelopes hold on the rows.
pub fn fit_decay_constant(rows: &[DecayRow], eps: f64) -> f64 {
    rows.iter()
        .filter(|r| r.d_n > 1e-12)
        .map(|r| {
            let sn = (r.level as f64).sqrt();
            let lo = sn * (1.0 - r.modulus * ((1.0 + eps) * r.d_n * r.d_n / 2.0).exp()) / r.d_n;
            let hi = sn * (r.modulus * ((1.0 - eps) * r.d_n * r.d_n / 2.0).exp() - 1.0) / r.d_n;
            lo.max(hi).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Slack allowed in the upper envelope for the `≲` relation.
pub const DECAY_SLACK: f64 = 1e-12;

/// Rows violating the envelopes of [`decay_profile`].
pub fn decay_violations(rows: &[DecayRow]) -> Vec<&DecayRow> {
    rows.iter().filter(|r| r.modulus < r.lower - DECAY_SLACK || r.modulus > r.upper + DECAY_SLACK).collect()
}

/// Largest `|σ_p^N(q)|` over a uniform sample of `q` with `d_N(q, p) ≥ d_min`.
pub fn far_field_max(
    space: &dyn SectionSpace,
    peak: &PeakSection,
    d_min: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let model = space.model();
    if !model.is_compact() {
        return Err(Error::Unsupported("far-field sampling needs a compact model".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<C>> = (0..samples).map(|_| crate::kodaira::random_point(model, &mut rng)).collect();
    let vals: Result<Vec<f64>> = pts
        .par_iter()
        .map(|q| {
            let d = scaled_distance(model, space.level(), &peak.center, q)?;
            Ok(if d >= d_min { peak.modulus(space, q) } else { 0.0 })
        })
        .collect();
    Ok(vals?.into_iter().fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Lattices

/// Points `p_i` whose balls `B(p_i, D/√N)` cover `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub model: Model,
    pub level: usize,
    pub d: f64,
    pub points: Vec<Vec<C>>,
}

/// Torus: an `n × n` grid in the periods with every cell inside a ball of
/// radius `D/√N`. Projective line: latitude rings at spacing `D/√N` in the
/// Fubini–Study distance `ρ = arctan|w|`, ring points spaced by at most `D/√N`.
pub fn build_lattice(model: &Model, level: usize, d: f64) -> Result<Lattice> {
    if !(d >= 1.0) {
        return Err(Error::InvalidParameter(format!("D = {d} must be at least 1")));
    }
    if level == 0 {
        return Err(Error::InvalidParameter("level N must be at least 1".into()));
    }
    let h = d / (level as f64).sqrt();
    let points = match model {
        Model::Torus { tau } => {
            let g = (PI / tau.im).sqrt();
            let diag = (1.0 + tau).norm().max((1.0 - tau).norm());
            let n = (diag * g / (2.0 * h)).ceil().max(1.0) as usize;
            let mut pts = Vec::with_capacity(n * n);
            for a in 0..n {
                for b in 0..n {
                    pts.push(vec![C::new(a as f64 / n as f64, 0.0) + tau * (b as f64 / n as f64)]);
                }
            }
            pts
        }
        Model::ProjectiveLine => {
            let rings = ((PI / 2.0) / h).ceil() as usize;
            let step = (PI / 2.0) / rings as f64;
            let mut pts = vec![vec![C::new(0.0, 0.0)]];
            for k in 1..=rings {
                // The last ring sits half a step from the pole w = ∞.
                let rho = if k == rings { PI / 2.0 - step / 2.0 } else { k as f64 * step };
                let circ = PI * (2.0 * rho).sin();
                let count = (circ / step).ceil().max(1.0) as usize;
                let off = if k % 2 == 0 { 0.0 } else { 0.5 };
                for j in 0..count {
                    let phi = 2.0 * PI * (j as f64 + off) / count as f64;
                    pts.push(vec![C::from_polar(rho.tan(), phi)]);
                }
            }
            pts
        }
        _ => return Err(Error::Unsupported(format!("no lattice construction for {}", model.id()))),
    };
    Ok(Lattice { model: model.clone(), level, d, points })
}

/// Coverage and overlap at sample points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeCheck {
    pub samples: usize,
    pub min_count: usize,
    pub max_count: usize,
    pub overlap_bound: f64,
    pub cardinality: usize,
    pub cardinality_ratio: f64,
}

/// Counts lattice balls `B(p_i, D/√N)` through random points.
pub fn check_lattice(lattice: &Lattice, samples: usize, seed: u64) -> Result<LatticeCheck> {
    let model = &lattice.model;
    let r = lattice.d / (lattice.level as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<C>> = (0..samples).map(|_| crate::kodaira::random_point(model, &mut rng)).collect();
    let counts: Vec<usize> = pts
        .par_iter()
        .map(|q| lattice.points.iter().filter(|p| model.distance(p, q).map(|dist| dist < r).unwrap_or(false)).count())
        .collect();
    let m = model.complex_dim() as i32;
    Ok(LatticeCheck {
        samples,
        min_count: counts.iter().copied().min().unwrap_or(0),
        max_count: counts.iter().copied().max().unwrap_or(0),
        overlap_bound: (2.0 * lattice.d + 2.0).powi(2 * m),
        cardinality: lattice.points.len(),
        cardinality_ratio: lattice.points.len() as f64 / (lattice.level as f64).powi(m),
    })
}

/// `s_N = Σ_i w_i σ_{p_i}^N` with `|w_i| < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSection {
    pub level: usize,
    pub points: Vec<Vec<C>>,
    pub weights: Vec<C>,
}

/// Peak sections of all lattice points as columns of a coefficient matrix.
pub fn peak_matrix(space: &dyn SectionSpace, lattice: &Lattice) -> Result<DMatrix<C>> {
    if lattice.level != space.level() {
        return Err(Error::LevelMismatch(lattice.level, space.level()));
    }
    let cols: Vec<PeakSection> = lattice.points.par_iter().map(|p| peak_section(space, p)).collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(space.dim(), cols.len(), |j, i| cols[i].section.coeffs[j]))
}

impl LatticeSection {
    pub fn new(lattice: &Lattice, weights: Vec<C>) -> Result<Self> {
        if weights.len() != lattice.points.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} lattice points",
                weights.len(),
                lattice.points.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.norm() < 1.0)) {
            return Err(Error::InvalidParameter(format!("weight {w} violates |w_i| < 1")));
        }
        Ok(LatticeSection { level: lattice.level, points: lattice.points.clone(), weights })
    }

    pub fn to_section(&self, peaks: &DMatrix<C>) -> LevelSection {
        let w = DVector::from_column_slice(&self.weights);
        LevelSection::new(self.level, (peaks * w).iter().copied().collect())
    }
}

// ---------------------------------------------------------------------------
// Zeros on curves

/// A located zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub w: C,
    /// Winding index of the cell loop.
    pub index: i32,
    /// `|∂s|` at the zero.
    pub del_norm: f64,
    pub polished: bool,
}

/// All zeros of a section with their signed count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroSet {
    pub level: usize,
    pub zeros: Vec<Zero>,
    pub signed_count: i64,
    pub expected: i64,
    /// False when a loop step exceeded the phase limit, Newton stalled, or
    /// two cells polished to the same zero.
    pub reliable: bool,
    pub cells_per_side: usize,
}

/// One coordinate patch of the scan.
#[derive(Clone, Copy, Debug)]
enum Patch {
    /// `w = u + vτ`, `(u, v) ∈ [0, 1)²`.
    Periods(C),
    /// `w = ζ` on the square of half-width `half`; zeros kept when `|w| ≤ 1`.
    Inner(f64),
    /// `w = 1/ζ` on the same square; zeros kept when `|w| > 1`.
    Outer(f64),
}

impl Patch {
    fn to_model(self, u: f64, v: f64) -> C {
        match self {
            Patch::Periods(tau) => C::new(u, 0.0) + tau * v,
            Patch::Inner(_) => C::new(u, v),
            Patch::Outer(_) => 1.0 / C::new(u, v),
        }
    }

    fn bounds(self) -> (f64, f64) {
        match self {
            Patch::Periods(_) => (0.0, 1.0),
            Patch::Inner(h) | Patch::Outer(h) => (-h, h),
        }
    }

    /// Metric length of a side of the patch, bounding cell sizes.
    fn side_length(self) -> f64 {
        match self {
            Patch::Periods(tau) => (PI / tau.im).sqrt() * tau.norm().max(1.0),
            Patch::Inner(h) | Patch::Outer(h) => 2.0 * h,
        }
    }

    /// Unit factor making the patch function continuous: on the outer patch
    /// the lift picks up `(|ζ|/ζ)^N`, which is undone here.
    fn phase(self, u: f64, v: f64, level: usize) -> C {
        match self {
            Patch::Outer(_) => {
                let z = C::new(u, v);
                (z / z.norm()).powu(level as u32)
            }
            _ => C::new(1.0, 0.0),
        }
    }

    /// `(∂φ, ∂²φ)` of a potential in the patch coordinate at `(u, v)`, used
    /// for the local gauge `e^{-iN Im P}` that slows the phase inside a cell.
    fn local_potential(self, model: &Model, u: f64, v: f64) -> (C, C) {
        match self {
            Patch::Periods(_) | Patch::Inner(_) => {
                let j = model.jet(&[self.to_model(u, v)]);
                (j.d[0], j.dd[(0, 0)])
            }
            Patch::Outer(_) => {
                // Fubini–Study in ζ; any smooth choice preserves windings.
                let z = C::new(u, v);
                let r = 1.0 + z.norm_sqr();
                (z.conj() / r, -(z.conj() * z.conj()) / (r * r))
            }
        }
    }
}

fn patches(model: &Model) -> Result<Vec<Patch>> {
    match model {
        Model::Torus { tau } => Ok(vec![Patch::Periods(*tau)]),
        Model::ProjectiveLine | Model::PerturbedProjectiveLine { .. } => {
            Ok(vec![Patch::Inner(1.05), Patch::Outer(1.05)])
        }
        Model::BargmannFock { .. } => Err(Error::Unsupported("zero location needs a compact curve".into())),
    }
}

/// Scan resolution: cells per unit of scaled length `√N · d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanDensity(pub f64);

impl Default for ScanDensity {
    fn default() -> Self {
        ScanDensity(3.0)
    }
}

/// Largest phase step allowed between consecutive loop points.
const MAX_LOOP_STEP: f64 = 2.0 * PI / 3.0;

/// Bisections allowed per loop segment before the cell is declared unresolved.
const BISECTION_DEPTH: u32 = 12;

/// Precomputed basis lifts on the half-step node grid of one patch.
struct PatchGrid {
    patch: Patch,
    n: usize,
    lo: f64,
    step: f64,
    /// Row-major `(2n+1)² × dim`, including the patch phase.
    lifts: DMatrix<C>,
    /// Per cell: centre and `(∂φ, ∂²φ)` of the local gauge.
    gauge: Vec<(C, C, C)>,
    level: usize,
}

const RING: [(usize, usize); 8] = [(0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

impl PatchGrid {
    fn new(space: &dyn SectionSpace, patch: Patch, n: usize) -> Self {
        let (lo, hi) = patch.bounds();
        let nodes = 2 * n + 1;
        let step = (hi - lo) / (2 * n) as f64;
        // Offset keeps nodes away from ζ = 0 on the outer patch.
        let lo = match patch {
            Patch::Periods(_) => lo,
            _ => lo + 0.37 * step,
        };
        let level = space.level();
        let rows: Vec<Vec<C>> = (0..nodes * nodes)
            .into_par_iter()
            .map(|k| {
                let (u, v) = (lo + (k / nodes) as f64 * step, lo + (k % nodes) as f64 * step);
                let ph = patch.phase(u, v, level);
                space.lift(&[patch.to_model(u, v)]).into_iter().map(|x| x * ph).collect()
            })
            .collect();
        let lifts = DMatrix::from_fn(nodes * nodes, space.dim(), |r, c| rows[r][c]);
        let model = space.model();
        let gauge = (0..n * n)
            .into_par_iter()
            .map(|cell| {
                let (ci, cj) = (cell / n, cell % n);
                let (uc, vc) = (lo + (2 * ci + 1) as f64 * step, lo + (2 * cj + 1) as f64 * step);
                let (d1, d2) = patch.local_potential(model, uc, vc);
                (patch_coord(patch, uc, vc), d1, d2)
            })
            .collect();
        PatchGrid { patch, n, lo, step, lifts, gauge, level }
    }

    /// `e^{-iN Im P_c}` for cell `cell` at the patch point `(u, v)`.
    fn gauge_at(&self, cell: usize, u: f64, v: f64) -> C {
        let (wc, d1, d2) = self.gauge[cell];
        let dz = patch_coord(self.patch, u, v) - wc;
        let p = d1 * dz + 0.5 * d2 * dz * dz;
        C::from_polar(1.0, -(self.level as f64) * p.im)
    }

    /// Gauged patch function at an arbitrary point of a cell.
    fn eval(&self, space: &dyn SectionSpace, s: &LevelSection, cell: usize, u: f64, v: f64) -> C {
        s.value(space, &[self.patch.to_model(u, v)]) * self.patch.phase(u, v, self.level) * self.gauge_at(cell, u, v)
    }

    /// Phase change along the segment `a → b` of a cell loop, bisecting
    /// while a step exceeds the limit. `None` when bisection runs out or the
    /// function vanishes on the segment.
    fn segment_phase(
        &self,
        space: &dyn SectionSpace,
        s: &LevelSection,
        cell: usize,
        a: ((f64, f64), C),
        b: ((f64, f64), C),
        depth: u32,
    ) -> Option<f64> {
        let (pa, fa) = a;
        let (pb, fb) = b;
        if fa == C::new(0.0, 0.0) || fb == C::new(0.0, 0.0) {
            return None;
        }
        let d = (fb / fa).arg();
        if d.abs() <= MAX_LOOP_STEP {
            return Some(d);
        }
        if depth == 0 {
            return None;
        }
        let pm = (0.5 * (pa.0 + pb.0), 0.5 * (pa.1 + pb.1));
        let fm = self.eval(space, s, cell, pm.0, pm.1);
        Some(
            self.segment_phase(space, s, cell, a, (pm, fm), depth - 1)?
                + self.segment_phase(space, s, cell, (pm, fm), b, depth - 1)?,
        )
    }

    fn coord(&self, i: usize, j: usize) -> (f64, f64) {
        (self.lo + i as f64 * self.step, self.lo + j as f64 * self.step)
    }
}

/// Complex coordinate in which the patch potential is written.
fn patch_coord(patch: Patch, u: f64, v: f64) -> C {
    match patch {
        Patch::Periods(_) => patch.to_model(u, v),
        _ => C::new(u, v),
    }
}

/// Scan grids for every patch of a model at a given level.
pub struct ZeroScanner {
    grids: Vec<PatchGrid>,
    level: usize,
    expected: i64,
}

/// A cell with nonzero winding: patch index, centre, winding.
type WindingCell = (usize, f64, f64, i32);

impl ZeroScanner {
    pub fn new(space: &dyn SectionSpace, density: ScanDensity) -> Result<Self> {
        let model = space.model();
        let n_level = space.level() as f64;
        let grids = patches(model)?
            .into_iter()
            .map(|p| {
                let n = (density.0 * n_level.sqrt() * p.side_length()).ceil().max(4.0) as usize;
                PatchGrid::new(space, p, n)
            })
            .collect();
        let deg = model.degree().unwrap_or(0);
        Ok(ZeroScanner { grids, level: space.level(), expected: deg * space.level() as i64 })
    }

    /// Cells with nonzero winding, and whether every loop was resolved.
    fn cells(&self, space: &dyn SectionSpace, s: &LevelSection) -> (Vec<WindingCell>, bool) {
        let a = DVector::from_column_slice(&s.coeffs);
        let mut out = Vec::new();
        let mut reliable = true;
        for (gi, g) in self.grids.iter().enumerate() {
            let vals = &g.lifts * &a;
            let nodes = 2 * g.n + 1;
            let found: Vec<(Option<WindingCell>, bool)> = (0..g.n * g.n)
                .into_par_iter()
                .map(|cell| {
                    let (ci, cj) = (cell / g.n, cell % g.n);
                    let ring: Vec<((f64, f64), C)> = RING
                        .iter()
                        .map(|&(a, b)| {
                            let (u, v) = g.coord(2 * ci + a, 2 * cj + b);
                            ((u, v), vals[(2 * ci + a) * nodes + 2 * cj + b] * g.gauge_at(cell, u, v))
                        })
                        .collect();
                    let mut total = 0.0;
                    for k in 0..8 {
                        match g.segment_phase(space, s, cell, ring[k], ring[(k + 1) % 8], BISECTION_DEPTH) {
                            Some(d) => total += d,
                            None => return (None, false),
                        }
                    }
                    let wind = (total / (2.0 * PI)).round() as i32;
                    let hit = (wind != 0).then(|| {
                        let (u, v) = g.coord(2 * ci + 1, 2 * cj + 1);
                        (gi, u, v, wind)
                    });
                    (hit, true)
                })
                .collect();
            for (hit, ok) in found {
                reliable &= ok;
                out.extend(hit);
            }
        }
        (out, reliable)
    }

    /// Finds zeros by cell winding, polishes them with Newton's method and
    /// assigns each to exactly one patch.
    pub fn locate(&self, space: &dyn SectionSpace, s: &LevelSection) -> Result<ZeroSet> {
        s.check(space)?;
        if space.level() != self.level {
            return Err(Error::LevelMismatch(self.level, space.level()));
        }
        let (cells, mut reliable) = self.cells(space, s);
        let polished: Vec<(Patch, C, i32, bool)> = cells
            .par_iter()
            .map(|&(gi, u, v, wind)| {
                let g = &self.grids[gi];
                let w0 = g.patch.to_model(u, v);
                let (w, ok) = newton_polish(space, s, w0, g.patch, g.step);
                (g.patch, w, wind, ok)
            })
            .collect();
        let mut zeros: Vec<Zero> = Vec::new();
        for (patch, w, wind, ok) in polished {
            let w = canonical_point(space.model(), w);
            let keep = match patch {
                Patch::Periods(_) => true,
                Patch::Inner(_) => w.norm() <= 1.0,
                Patch::Outer(_) => w.norm() > 1.0,
            };
            if !keep {
                continue;
            }
            reliable &= ok;
            if zeros.iter().any(|z| same_point(space.model(), z.w, w)) {
                reliable = false;
                continue;
            }
            zeros.push(Zero { w, index: wind, del_norm: del_norm_at(space, s, w), polished: ok });
        }
        zeros.sort_by(|a, b| a.w.re.total_cmp(&b.w.re).then(a.w.im.total_cmp(&b.w.im)));
        Ok(ZeroSet {
            level: self.level,
            signed_count: zeros.iter().map(|z| z.index as i64).sum(),
            zeros,
            expected: self.expected,
            reliable,
            cells_per_side: self.grids[0].n,
        })
    }
}

/// Representative in the period parallelogram for the torus.
fn canonical_point(model: &Model, w: C) -> C {
    match model {
        Model::Torus { tau } => {
            let v = w.im / tau.im;
            let u = w.re - v * tau.re;
            C::new(u.rem_euclid(1.0), 0.0) + tau * v.rem_euclid(1.0)
        }
        _ => w,
    }
}

fn same_point(model: &Model, a: C, b: C) -> bool {
    match model.distance(&[a], &[b]) {
        Some(d) => d < 1e-8,
        None => (a - b).norm() < 1e-8 * (1.0 + a.norm()),
    }
}

/// Newton's method for `f` in `w`, with `ŝ = f‖e‖^N` and `Dŝ = f'‖e‖^N`, so
/// the step `−ŝ/Dŝ` is exactly the Newton step for the holomorphic `f`.
fn newton_polish(space: &dyn SectionSpace, s: &LevelSection, w0: C, patch: Patch, cell: f64) -> (C, bool) {
    // Allowed drift in the model coordinate.
    let scale = match patch {
        Patch::Outer(_) => cell * w0.norm_sqr(),
        _ => cell * (1.0 + w0.norm()),
    };
    let mut w = w0;
    for _ in 0..50 {
        let f = s.value(space, &[w]);
        let d = s.dw(space, &[w])[0];
        if d == C::new(0.0, 0.0) || !d.is_finite() {
            return (w0, false);
        }
        let step = f / d;
        w -= step;
        if (w - w0).norm() > 4.0 * scale || !w.is_finite() {
            return (w0, false);
        }
        if step.norm() <= 1e-14 * (1.0 + w.norm()) {
            return (w, true);
        }
    }
    (w, false)
}

/// `|∇s|` in the model coordinate for the Chern connection,
/// `∇ŝ = (f' − Nφ_w f)‖e‖^N`, divided by `√λ` for the conformal metric
/// `λ|dw|²`. Equals `|f'|‖e‖^N/√λ` at a zero.
fn del_norm_at(space: &dyn SectionSpace, s: &LevelSection, w: C) -> f64 {
    let model = space.model();
    let d = s.dw(space, &[w])[0] - space.level() as f64 * model.jet(&[w]).d[0] * s.value(space, &[w]);
    let lambda = model.metric_real(&[w])[(0, 0)];
    d.norm() / lambda.sqrt()
}

/// Locates zeros, refining the scan up to three times until the signed count
/// matches `N · deg L` with reliable loops.
pub fn zero_locate(space: &dyn SectionSpace, s: &LevelSection, density: ScanDensity) -> Result<ZeroSet> {
    let mut d = density.0;
    let mut last = None;
    for _ in 0..4 {
        let z = ZeroScanner::new(space, ScanDensity(d))?.locate(space, s)?;
        if z.reliable && z.signed_count == z.expected {
            return Ok(z);
        }
        last = Some(z);
        d *= 2.0;
    }
    Ok(last.expect("at least one scan"))
}

/// Outcome of an `η` measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaMeasurement {
    /// `min |∂s|/√N` over the zeros; `None` when no zero was found.
    pub eta: Option<f64>,
    pub zero_count: usize,
    pub signed_count: i64,
    pub reliable: bool,
}

pub fn eta_of(zeros: &ZeroSet) -> EtaMeasurement {
    let n = (zeros.level as f64).sqrt();
    let eta =
        zeros.zeros.iter().map(|z| z.del_norm / n).fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    EtaMeasurement { eta, zero_count: zeros.zeros.len(), signed_count: zeros.signed_count, reliable: zeros.reliable }
}

/// `η = min_{s = 0} |∂s|/√N`.
pub fn eta_transversality(space: &dyn SectionSpace, s: &LevelSection, density: ScanDensity) -> Result<EtaMeasurement> {
    Ok(eta_of(&zero_locate(space, s, density)?))
}

/// `η` estimated without Newton: `|∂s|` at the centres of winding cells of a
/// grid refined by `refine`.
pub fn eta_cell_centers(
    space: &dyn SectionSpace,
    s: &LevelSection,
    density: ScanDensity,
    refine: f64,
) -> Result<Option<f64>> {
    let sc = ZeroScanner::new(space, ScanDensity(density.0 * refine))?;
    let (cells, _) = sc.cells(space, s);
    let n = (space.level() as f64).sqrt();
    Ok(cells
        .iter()
        .filter(|&&(gi, u, v, _)| {
            let w = sc.grids[gi].patch.to_model(u, v);
            match sc.grids[gi].patch {
                Patch::Periods(_) => true,
                Patch::Inner(_) => w.norm() <= 1.0,
                Patch::Outer(_) => w.norm() > 1.0,
            }
        })
        .map(|&(gi, u, v, _)| del_norm_at(space, s, sc.grids[gi].patch.to_model(u, v)) / n)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v)))))
}

/// `‖∂̄s‖_∞` over a grid of patch nodes, via `∂̄s = (∂_w̄ ŝ + (N/2) ∂_w̄φ ŝ) dw̄`
/// with central differences.
pub fn delbar_sup(space: &dyn SectionSpace, s: &LevelSection, samples_per_side: usize) -> Result<f64> {
    let model = space.model();
    let n = space.level() as f64;
    let pts: Vec<C> = match model {
        Model::Torus { tau } => (0..samples_per_side * samples_per_side)
            .map(|k| {
                let (a, b) = (k / samples_per_side, k % samples_per_side);
                C::new((a as f64 + 0.5) / samples_per_side as f64, 0.0)
                    + tau * ((b as f64 + 0.5) / samples_per_side as f64)
            })
            .collect(),
        _ => (0..samples_per_side * samples_per_side)
            .map(|k| {
                let (a, b) = (k / samples_per_side, k % samples_per_side);
                let f = |t: usize| -1.5 + 3.0 * (t as f64 + 0.5) / samples_per_side as f64;
                C::new(f(a), f(b))
            })
            .collect(),
    };
    let h = 1e-4 / n.sqrt();
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|&w| {
            let f = |z: C| s.value(space, &[z]);
            let dx = (f(w + h) - f(w - h)) / (2.0 * h);
            let dy = (f(w + I * h) - f(w - I * h)) / (2.0 * h);
            let dwbar = 0.5 * (dx + I * dy);
            let phi_wbar = model.jet(&[w]).d[0].conj();
            let lambda = model.metric_real(&[w])[(0, 0)];
            (dwbar + 0.5 * n * phi_wbar * f(w)).norm() / lambda.sqrt()
        })
        .collect();
    Ok(vals.into_iter().fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Search

/// Parameters of [`donaldson_search`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub seed: u64,
    pub iterations: usize,
    /// Radius of a coordinate proposal.
    pub step: f64,
    /// Iterations without improvement before an annealing restart.
    pub restart_after: usize,
    pub initial_temperature: f64,
    pub density: ScanDensity,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            seed: 1,
            iterations: 500,
            step: 0.5,
            restart_after: 60,
            initial_temperature: 0.02,
            density: ScanDensity::default(),
        }
    }
}

/// Largest weight modulus used by the search.
pub const WEIGHT_CAP: f64 = 0.999;

/// Result of a transversality search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub model: String,
    pub level: usize,
    pub seed: u64,
    pub lattice_size: usize,
    pub eta: f64,
    pub delbar_sup: f64,
    pub zero_count: usize,
    pub signed_count: i64,
    pub expected_count: i64,
    pub iterations: usize,
    pub restarts: usize,
    /// Best `η` after each iteration.
    pub best_eta_trace: Vec<f64>,
    pub checks: Vec<Check>,
}

fn clamp_weight(w: C) -> C {
    if w.norm() > WEIGHT_CAP {
        w * (WEIGHT_CAP / w.norm())
    } else {
        w
    }
}

/// Seeded search over lattice weights maximizing `η`: coordinate proposals
/// accepted by a Metropolis rule at a decreasing temperature, with restarts
/// from the best point after stagnation. Sections whose zero count differs
/// from `N · deg L` score zero.
pub fn donaldson_search(
    space: &dyn SectionSpace,
    lattice: &Lattice,
    params: &SearchParams,
) -> Result<(LatticeSection, TransversalityReport)> {
    if lattice.level != space.level() {
        return Err(Error::LevelMismatch(lattice.level, space.level()));
    }
    if params.iterations == 0 {
        return Err(Error::InvalidParameter("at least one iteration is required".into()));
    }
    let peaks = peak_matrix(space, lattice)?;
    let scanner = ZeroScanner::new(space, params.density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let k = lattice.points.len();
    let score = |w: &[C]| -> Result<f64> {
        let s = LevelSection::new(space.level(), (&peaks * DVector::from_column_slice(w)).iter().copied().collect());
        let z = scanner.locate(space, &s)?;
        let e = eta_of(&z);
        Ok(if z.signed_count == z.expected && z.reliable { e.eta.unwrap_or(0.0) } else { 0.0 })
    };
    let mut cur: Vec<C> = (0..k)
        .map(|_| clamp_weight(C::from_polar(rng.random_range(0.2..0.9), rng.random_range(0.0..2.0 * PI))))
        .collect();
    let mut cur_score = score(&cur)?;
    let mut best = cur.clone();
    let mut best_score = cur_score;
    let mut trace = Vec::with_capacity(params.iterations);
    let mut stale = 0;
    let mut restarts = 0;
    for it in 0..params.iterations {
        let temp = params.initial_temperature * (1.0 - it as f64 / params.iterations as f64);
        let i = rng.random_range(0..k);
        let mut cand = cur.clone();
        let prop = C::from_polar(params.step * rng.random::<f64>().sqrt(), rng.random_range(0.0..2.0 * PI));
        cand[i] = clamp_weight(cand[i] + prop);
        let sc = score(&cand)?;
        let accept = sc >= cur_score || (temp > 0.0 && rng.random::<f64>() < ((sc - cur_score) / temp).exp());
        if accept {
            cur = cand;
            cur_score = sc;
        }
        if cur_score > best_score {
            best = cur.clone();
            best_score = cur_score;
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= params.restart_after {
            restarts += 1;
            stale = 0;
            cur = best
                .iter()
                .map(|w| clamp_weight(w + C::from_polar(0.3 * rng.random::<f64>(), rng.random_range(0.0..2.0 * PI))))
                .collect();
            cur_score = score(&cur)?;
        }
        trace.push(best_score);
    }
    let section = LatticeSection::new(lattice, best)?;
    let s = section.to_section(&peaks);
    let zeros = zero_locate(space, &s, params.density)?;
    let eta = eta_of(&zeros).eta.unwrap_or(0.0);
    let dbar = delbar_sup(space, &s, 24)?;
    let checks = vec![
        Check::new("eta positive", eta, Criterion::AtLeast { bound: f64::MIN_POSITIVE }),
        Check::new(
            "signed zero count minus N·deg L",
            (zeros.signed_count - zeros.expected) as f64,
            Criterion::Near { target: 0.0, tol: 0.0 },
        ),
    ];
    let report = TransversalityReport {
        model: space.model().id(),
        level: space.level(),
        seed: params.seed,
        lattice_size: k,
        eta,
        delbar_sup: dbar,
        zero_count: zeros.zeros.len(),
        signed_count: zeros.signed_count,
        expected_count: zeros.expected,
        iterations: params.iterations,
        restarts,
        best_eta_trace: trace,
        checks,
    };
    Ok((section, report))
}

// ---------------------------------------------------------------------------
// The sum of the G-functions

/// `𝒢 = |σ| + |∂̄σ| + N^{-1/2}|∇σ| + N^{-1/2}|∇∂̄σ| + N^{-1}|∇²σ|` summed over
/// the lattice at a point `q`.
pub fn g_sum(space: &dyn SectionSpace, lattice: &Lattice, peaks: &DMatrix<C>, q: &[C]) -> Result<f64> {
    let model = space.model();
    let chart = heisenberg_chart(model, &BundlePoint::base(q.to_vec()))?;
    let n = space.level() as f64;
    let mut total = 0.0;
    for i in 0..lattice.points.len() {
        let s = LevelSection::new(space.level(), peaks.column(i).iter().copied().collect());
        let j = horizontal_jet(space, &s, &chart)?;
        total += j.value.norm()
            + j.delbar_norm()
            + j.grad_norm() / n.sqrt()
            + j.grad_delbar_norm() / n.sqrt()
            + j.hessian_norm() / n;
    }
    Ok(total)
}

/// Largest `Σ_i 𝒢_{p_i}^N(q)` over random points. On the exact projective
/// line, points with `|q| > 1` are evaluated after the reflection `w ↦ −1/w`
/// of both `q` and the lattice.
pub fn g_sum_max(space: &dyn SectionSpace, lattice: &Lattice, points: &[Vec<C>]) -> Result<f64> {
    let peaks = peak_matrix(space, lattice)?;
    let model = space.model();
    let mirror = Lattice {
        // The pole stands in for the image of w = 0.
        points: lattice
            .points
            .iter()
            .map(|p| vec![if p[0].norm() > 0.0 { -1.0 / p[0] } else { C::new(1e100, 0.0) }])
            .collect(),
        ..lattice.clone()
    };
    let mirror_peaks = match model {
        Model::ProjectiveLine => Some(peak_matrix(space, &mirror)?),
        _ => None,
    };
    let vals: Vec<f64> = points
        .par_iter()
        .map(|q| match (projective_reflection(model, q), &mirror_peaks) {
            (Some(q2), Some(mp)) => g_sum(space, &mirror, mp, &q2),
            _ => g_sum(space, lattice, &peaks, q),
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Genus arithmetic

/// Intersection numbers for the genus formulas.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChernData {
    /// Complex dimension of `M`.
    pub m: u32,
    /// `c₁(L)^m`.
    pub c1l_m: i64,
    /// `c₁(M)·c₁(L)^{m−1}`.
    pub c1m_c1l: i64,
    pub twist: Option<TwistData>,
}

/// Pairings `X · c_{m−1−j}(E) · c₁(L)^j` for `j = 0..m`, with `X` equal to
/// `c₁(L)`, `c₁(E)` and `c₁(M)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwistData {
    pub rank: u32,
    pub l_terms: Vec<i64>,
    pub e_terms: Vec<i64>,
    pub m_terms: Vec<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenusVariant {
    /// A curve in a surface.
    Surface,
    /// Common zeros of `m − 1` sections.
    Codimension,
    /// Zeros of a section of `E ⊗ L^N` with `rank E = m − 1`.
    Twisted,
}

fn elementary_symmetric(b: &[i64]) -> Vec<i64> {
    let mut e = vec![0i64; b.len() + 1];
    e[0] = 1;
    for (i, &x) in b.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += e[k - 1] * x;
        }
    }
    e
}

impl ChernData {
    pub fn new(m: u32, c1l_m: i64, c1m_c1l: i64) -> Self {
        ChernData { m, c1l_m, c1m_c1l, twist: None }
    }

    /// `M = CP^m`, `L = O(a)`, and `E = ⊕ O(b_i)` of rank `m − 1`.
    pub fn projective(m: u32, a: i64, b: &[i64]) -> Result<Self> {
        if m < 2 || b.len() != (m - 1) as usize {
            return Err(Error::InconsistentChernData(format!("E must have rank m − 1 = {}", m.saturating_sub(1))));
        }
        let e = elementary_symmetric(b);
        let c1e: i64 = b.iter().sum();
        let mm = m as usize;
        let pow = |j: usize| a.pow(j as u32);
        let l_terms = (0..mm).map(|j| e[mm - 1 - j] * pow(j + 1)).collect();
        let e_terms = (0..mm).map(|j| c1e * e[mm - 1 - j] * pow(j)).collect();
        let m_terms = (0..mm).map(|j| (m as i64 + 1) * e[mm - 1 - j] * pow(j)).collect();
        Ok(ChernData {
            m,
            c1l_m: pow(mm),
            c1m_c1l: (m as i64 + 1) * pow(mm - 1),
            twist: Some(TwistData { rank: m - 1, l_terms, e_terms, m_terms }),
        })
    }
}

/// `2g − 2` for the chosen variant.
pub fn euler_char_defect(chern: &ChernData, n: i64, variant: GenusVariant) -> Result<i128> {
    if n < 1 {
        return Err(Error::InvalidParameter(format!("N = {n} must be at least 1")));
    }
    let nn = n as i128;
    let m = chern.m;
    match variant {
        GenusVariant::Surface => {
            if m != 2 {
                return Err(Error::InconsistentChernData(format!("surface formula needs m = 2, got {m}")));
            }
            Ok(chern.c1l_m as i128 * nn * nn - chern.c1m_c1l as i128 * nn)
        }
        GenusVariant::Codimension => {
            if m < 2 {
                return Err(Error::InconsistentChernData(format!("codimension formula needs m ≥ 2, got {m}")));
            }
            let p = nn.pow(m - 1);
            Ok((m as i128 - 1) * chern.c1l_m as i128 * p * nn - chern.c1m_c1l as i128 * p)
        }
        GenusVariant::Twisted => {
            let t = chern
                .twist
                .as_ref()
                .ok_or_else(|| Error::InconsistentChernData("twisted formula needs pairings with c(E)".into()))?;
            let len = m as usize;
            if m < 2 || t.rank != m - 1 || [&t.l_terms, &t.e_terms, &t.m_terms].iter().any(|v| v.len() != len) {
                return Err(Error::InconsistentChernData(format!(
                    "twisted formula needs rank E = m − 1 and {len} pairings of each kind"
                )));
            }
            let mut s = 0i128;
            for j in 0..len {
                let term = (m as i128 - 1) * nn * t.l_terms[j] as i128 + t.e_terms[j] as i128 - t.m_terms[j] as i128;
                s += term * nn.pow(j as u32);
            }
            Ok(s)
        }
    }
}

/// Genus `g_N` of the zero curve from the adjunction formula.
pub fn genus_adjunction(chern: &ChernData, n: i64, variant: GenusVariant) -> Result<i64> {
    let d = euler_char_defect(chern, n, variant)?;
    if d % 2 != 0 {
        return Err(Error::InconsistentChernData(format!("2g − 2 = {d} is odd")));
    }
    i64::try_from(d / 2 + 1).map_err(|_| Error::InconsistentChernData("genus overflows i64".into()))
}
