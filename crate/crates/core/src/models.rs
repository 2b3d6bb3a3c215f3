//! Model line bundles with computable level-`N` section spaces.
//!
//! Every model is described in one global holomorphic coordinate `w` (an
//! affine chart for the projective line, the universal cover for the torus)
//! together with a frame `e` of `L` whose pointwise norm is `‖e‖² = e^{-φ}`.
//! The Kähler form is `ω = (i/2)∂∂̄φ`. A point of the circle bundle `X` is
//! stored as `(w, θ)`, meaning the unit covector `e^{iθ}‖e‖ e*(w)`. A section
//! `f·e^N` lifts to the equivariant function `e^{iNθ} f(w) ‖e‖^N`.

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::numeric::{gauss_hermite, gauss_legendre, ln_binomials, ln_factorials};
use crate::{Error, Result};

type C = Complex64;
const I: C = C::new(0.0, 1.0);

/// A Gaussian bump `χ(w) = exp(-|w - c|²/s²)` on the affine line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: C,
    pub width: f64,
}

impl Default for Bump {
    fn default() -> Self {
        Bump { center: C::new(0.3, 0.0), width: 0.5 }
    }
}

impl Bump {
    fn value(&self, w: C) -> f64 {
        (-(w - self.center).norm_sqr() / (self.width * self.width)).exp()
    }
}

/// The bundled geometries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    /// `C^m` with `φ = |w|²`.
    BargmannFock { m: usize },
    /// `CP¹` with the Fubini–Study metric, `φ = log(1 + |w|²)`.
    ProjectiveLine,
    /// `CP¹` with `φ = log(1 + |w|²) + ε χ(w)`.
    PerturbedProjectiveLine { eps: f64, bump: Bump },
    /// `C/(Z + τZ)` with `φ = 2π (Im w)² / Im τ`, degree one.
    Torus { tau: C },
}

/// Value and derivatives of the potential `φ` at a point.
///
/// `d[j] = ∂φ/∂w_j`, `dd[(j,k)] = ∂²φ/∂w_j∂w_k`, `ddbar[(j,k)] = ∂²φ/∂w_j∂w̄_k`.
#[derive(Clone, Debug)]
pub struct PotentialJet {
    pub phi: f64,
    pub d: Vec<C>,
    pub dd: DMatrix<C>,
    pub ddbar: DMatrix<C>,
}

impl Model {
    pub fn perturbed(eps: f64) -> Model {
        Model::PerturbedProjectiveLine { eps, bump: Bump::default() }
    }

    pub fn square_torus() -> Model {
        Model::Torus { tau: I }
    }

    /// Short identifier used in reports and cache keys.
    pub fn id(&self) -> String {
        match self {
            Model::BargmannFock { m } => format!("bargmann_fock_m{m}"),
            Model::ProjectiveLine => "projective_line".into(),
            Model::PerturbedProjectiveLine { eps, bump } => {
                format!("projective_line_perturbed_eps{eps}_c{}_{}_s{}", bump.center.re, bump.center.im, bump.width)
            }
            Model::Torus { tau } => format!("torus_tau{}_{}", tau.re, tau.im),
        }
    }

    pub fn complex_dim(&self) -> usize {
        match self {
            Model::BargmannFock { m } => *m,
            _ => 1,
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self, Model::BargmannFock { .. })
    }

    /// Total volume `∫_M ω^m/m!`, `None` for the non-compact model.
    pub fn volume(&self) -> Option<f64> {
        if self.is_compact() {
            Some(PI)
        } else {
            None
        }
    }

    /// `c₁(L)[M]` for the compact curves.
    pub fn degree(&self) -> Option<i64> {
        if self.is_compact() {
            Some(1)
        } else {
            None
        }
    }

    /// Checks parameters and, for the perturbed metric, positivity of `ω`.
    pub fn validate(&self) -> Result<()> {
        match self {
            Model::BargmannFock { m } if *m == 0 || *m > 2 => {
                Err(Error::InvalidParameter(format!("Bargmann–Fock dimension {m} not in 1..=2")))
            }
            Model::Torus { tau } if !(tau.im > 0.0) || !tau.re.is_finite() => {
                Err(Error::InvalidParameter(format!("torus modulus {tau} must have Im τ > 0")))
            }
            Model::PerturbedProjectiveLine { eps, bump } => {
                if !eps.is_finite() || !(bump.width > 0.0) {
                    return Err(Error::InvalidParameter("bad perturbation parameters".into()));
                }
                // ω_ε/ω_FS = 1 + ε χ_{ww̄} (1+|w|²)²; the bump is concentrated
                // where this is sampled densely.
                let n = 400;
                let mut min_ratio = f64::INFINITY;
                for a in 0..n {
                    let t = -1.0 + (2.0 * a as f64 + 1.0) / n as f64;
                    let r = ((1.0 - t) / (1.0 + t)).sqrt();
                    for b in 0..n {
                        let w = C::from_polar(r, 2.0 * PI * b as f64 / n as f64);
                        min_ratio = min_ratio.min(self.volume_density_ratio(w));
                    }
                }
                if min_ratio <= 0.0 {
                    return Err(Error::NotPositive(format!(
                        "perturbed form degenerates (min ω_ε/ω_FS = {min_ratio:.3e})"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The potential `φ` and its derivatives up to order two.
    pub fn jet(&self, p: &[C]) -> PotentialJet {
        match self {
            Model::BargmannFock { m } => PotentialJet {
                phi: p.iter().map(|z| z.norm_sqr()).sum(),
                d: p.iter().map(|z| z.conj()).collect(),
                dd: DMatrix::zeros(*m, *m),
                ddbar: DMatrix::identity(*m, *m),
            },
            Model::ProjectiveLine => fs_jet(p[0]),
            Model::PerturbedProjectiveLine { eps, bump } => {
                let w = p[0];
                let mut j = fs_jet(w);
                let chi = bump.value(w);
                let s2 = bump.width * bump.width;
                let u = (w - bump.center).conj();
                j.phi += eps * chi;
                j.d[0] += eps * chi * (-u / s2);
                j.dd[(0, 0)] += eps * chi * u * u / (s2 * s2);
                j.ddbar[(0, 0)] += eps * chi * ((w - bump.center).norm_sqr() / (s2 * s2) - 1.0 / s2);
                j
            }
            Model::Torus { tau } => {
                let y = p[0].im;
                let k = PI / tau.im;
                PotentialJet {
                    phi: 2.0 * k * y * y,
                    d: vec![-2.0 * I * k * y],
                    dd: DMatrix::from_element(1, 1, C::new(-k, 0.0)),
                    ddbar: DMatrix::from_element(1, 1, C::new(k, 0.0)),
                }
            }
        }
    }

    pub fn potential(&self, p: &[C]) -> f64 {
        match self {
            Model::BargmannFock { .. } => p.iter().map(|z| z.norm_sqr()).sum(),
            Model::ProjectiveLine => p[0].norm_sqr().ln_1p(),
            Model::PerturbedProjectiveLine { eps, bump } => p[0].norm_sqr().ln_1p() + eps * bump.value(p[0]),
            Model::Torus { tau } => 2.0 * PI * p[0].im * p[0].im / tau.im,
        }
    }

    /// The polarization `φ(z, w̄)`, holomorphic in `z` and antiholomorphic in
    /// `w`, with `φ(z, z̄) = φ(z)`. Available for the real-analytic models
    /// with closed-form extensions.
    pub fn polarized_potential(&self, z: &[C], w: &[C]) -> Option<C> {
        match self {
            Model::BargmannFock { .. } => Some(z.iter().zip(w).map(|(a, b)| a * b.conj()).sum()),
            Model::ProjectiveLine => Some((1.0 + z[0] * w[0].conj()).ln()),
            Model::Torus { tau } => {
                let d = z[0] - w[0].conj();
                Some(-(PI / (2.0 * tau.im)) * d * d)
            }
            Model::PerturbedProjectiveLine { .. } => None,
        }
    }

    /// Symplectic form in the real coordinates `(x₁, y₁, …)` of `w`.
    pub fn omega_real(&self, p: &[C]) -> DMatrix<f64> {
        hermitian_to_omega(&self.jet(p).ddbar)
    }

    /// Riemannian metric `g(u, v) = ω(u, Jv)` in real coordinates.
    pub fn metric_real(&self, p: &[C]) -> DMatrix<f64> {
        let om = self.omega_real(p);
        &om * standard_j(self.complex_dim())
    }

    /// Ratio `ω_ε/ω_FS` for the perturbed line, `1` otherwise on `CP¹`.
    pub fn volume_density_ratio(&self, w: C) -> f64 {
        match self {
            Model::PerturbedProjectiveLine { eps, bump } => {
                let s2 = bump.width * bump.width;
                let chi = bump.value(w);
                let chi_wwbar = chi * ((w - bump.center).norm_sqr() / (s2 * s2) - 1.0 / s2);
                1.0 + eps * chi_wwbar * (1.0 + w.norm_sqr()).powi(2)
            }
            _ => 1.0,
        }
    }

    /// Riemannian distance when a closed form is available.
    pub fn distance(&self, p: &[C], q: &[C]) -> Option<f64> {
        match self {
            Model::BargmannFock { .. } => {
                // g = 2·Re(dz dz̄)/2 = dx² + dy² for φ = |z|².
                Some(p.iter().zip(q).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
            }
            Model::ProjectiveLine => {
                let (w, v) = (p[0], q[0]);
                Some((w - v).norm().atan2((1.0 + w * v.conj()).norm()))
            }
            Model::Torus { tau } => {
                let d = p[0] - q[0];
                let scale = (PI / tau.im).sqrt();
                // Reduce to the fundamental domain and search neighbours.
                let b = (d.im / tau.im).round();
                let d0 = d - b * tau;
                let a = d0.re.round();
                let d0 = d0 - a;
                let mut best = f64::INFINITY;
                for i in -2..=2 {
                    for j in -2..=2 {
                        best = best.min((d0 - i as f64 - j as f64 * tau).norm());
                    }
                }
                Some(scale * best)
            }
            Model::PerturbedProjectiveLine { .. } => None,
        }
    }

    /// Half the injectivity scale, in units where the metric is the identity
    /// at the chart center.
    pub fn chart_radius(&self) -> f64 {
        match self {
            Model::BargmannFock { .. } => 50.0,
            Model::ProjectiveLine => PI / 4.0,
            Model::PerturbedProjectiveLine { .. } => PI / 6.0,
            Model::Torus { tau } => {
                let short = (1.0f64).min(tau.norm()).min((1.0 - tau).norm()).min((1.0 + tau).norm());
                0.25 * short * (PI / tau.im).sqrt()
            }
        }
    }
}

fn fs_jet(w: C) -> PotentialJet {
    let r = 1.0 + w.norm_sqr();
    PotentialJet {
        phi: r.ln(),
        d: vec![w.conj() / r],
        dd: DMatrix::from_element(1, 1, -(w.conj() * w.conj()) / (r * r)),
        ddbar: DMatrix::from_element(1, 1, C::new(1.0 / (r * r), 0.0)),
    }
}

/// The complex structure of `C^m` acting on real coordinates `(x₁, y₁, …)`.
pub fn standard_j(m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

/// The standard symplectic matrix `Σ dx_k ∧ dy_k`.
pub fn standard_omega(m: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        o[(2 * k, 2 * k + 1)] = 1.0;
        o[(2 * k + 1, 2 * k)] = -1.0;
    }
    o
}

/// Real matrix of `(i/2) Σ h_{jk̄} dw_j ∧ dw̄_k`.
pub fn hermitian_to_omega(h: &DMatrix<C>) -> DMatrix<f64> {
    let m = h.nrows();
    let dw = |j: usize, a: usize| -> C {
        if a / 2 != j {
            C::new(0.0, 0.0)
        } else if a % 2 == 0 {
            C::new(1.0, 0.0)
        } else {
            I
        }
    };
    DMatrix::from_fn(2 * m, 2 * m, |a, b| {
        let mut s = C::new(0.0, 0.0);
        for j in 0..m {
            for k in 0..m {
                s += h[(j, k)] * (dw(j, a) * dw(k, b).conj() - dw(j, b) * dw(k, a).conj());
            }
        }
        (0.5 * I * s).re
    })
}

/// A point of the circle bundle: base coordinates and fiber angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundlePoint {
    pub pos: Vec<C>,
    pub theta: f64,
}

impl BundlePoint {
    pub fn new(pos: Vec<C>, theta: f64) -> Self {
        BundlePoint { pos, theta }
    }

    pub fn base(pos: Vec<C>) -> Self {
        BundlePoint { pos, theta: 0.0 }
    }

    /// The circle action `r_φ`.
    pub fn rotate(&self, phi: f64) -> Self {
        BundlePoint { pos: self.pos.clone(), theta: self.theta + phi }
    }
}

/// A level-`N` space of sections with an orthonormal basis.
pub trait SectionSpace: Send + Sync {
    fn model(&self) -> &Model;
    fn level(&self) -> usize;
    /// Number of basis elements.
    fn dim(&self) -> usize;
    /// Whether the basis is a truncation of an infinite one.
    fn is_truncated(&self) -> bool {
        false
    }
    /// `Ŝ_j(w, 0) = f_j(w)‖e‖^N` for every basis element.
    fn lift(&self, p: &[C]) -> Vec<C>;
    /// `∂f_j/∂w_k · ‖e‖^N`, stored at index `j·m + k`.
    fn lift_dw(&self, p: &[C]) -> Vec<C>;
    /// Largest deviation of the numerical Gram matrix from the identity.
    fn gram_residual(&self) -> f64;
    /// Human readable description of the quadrature used to build the basis.
    fn grid_info(&self) -> String {
        "closed form".into()
    }

    /// `Π_N((p,0),(q,0))`.
    fn kernel_base(&self, p: &[C], q: &[C]) -> C {
        let a = self.lift(p);
        let b = self.lift(q);
        a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum()
    }

    /// `Π_N(x, y) = Σ_j Ŝ_j(x) conj(Ŝ_j(y))`.
    fn kernel(&self, x: &BundlePoint, y: &BundlePoint) -> C {
        let phase = C::from_polar(1.0, self.level() as f64 * (x.theta - y.theta));
        self.kernel_base(&x.pos, &y.pos) * phase
    }

    fn diagonal(&self, p: &[C]) -> f64 {
        self.kernel_base(p, p).re
    }

    /// Equivariant lift at an arbitrary bundle point.
    fn lift_at(&self, x: &BundlePoint) -> Vec<C> {
        let phase = C::from_polar(1.0, self.level() as f64 * x.theta);
        self.lift(&x.pos).into_iter().map(|v| v * phase).collect()
    }
}

/// Builds the level-`N` section space of a model.
pub fn basis_sections(model: &Model, n: usize) -> Result<Box<dyn SectionSpace>> {
    if n == 0 {
        return Err(Error::InvalidParameter("level N must be at least 1".into()));
    }
    model.validate()?;
    Ok(match model {
        Model::BargmannFock { m } => Box::new(FockSpace::new(*m, n)),
        Model::ProjectiveLine => Box::new(ProjectiveSpace::exact(n)),
        Model::PerturbedProjectiveLine { .. } => Box::new(ProjectiveSpace::perturbed(model, n, None)?),
        Model::Torus { tau } => Box::new(ThetaSpace::new(*tau, n)),
    })
}

/// The reduced Heisenberg kernel of level one,
/// `π^{-m} e^{i(θ-φ) + u·v̄ - (|u|²+|v|²)/2}`.
pub fn heisenberg_model_kernel(u: &[C], theta: f64, v: &[C], phi: f64) -> C {
    let m = u.len() as i32;
    let uv: C = u.iter().zip(v).map(|(a, b)| a * b.conj()).sum();
    let nu: f64 = u.iter().map(|a| a.norm_sqr()).sum();
    let nv: f64 = v.iter().map(|a| a.norm_sqr()).sum();
    (I * (theta - phi) + uv - 0.5 * (nu + nv)).exp() / PI.powi(m)
}

// ---------------------------------------------------------------------------
// Bargmann–Fock

/// Fock space of `C^m` at level `N`. The kernel is evaluated in closed form;
/// the basis is truncated at total degree [`FockSpace::truncation`], enough
/// for lifts to be accurate to `1e-15` relative on `|w|√N ≤ 6`.
pub struct FockSpace {
    model: Model,
    m: usize,
    n: usize,
    trunc: usize,
    indices: Vec<Vec<usize>>,
    log_norms: Vec<f64>,
}

impl FockSpace {
    pub fn new(m: usize, n: usize) -> Self {
        let trunc = 130;
        let lf = ln_factorials(trunc);
        let mut indices = Vec::new();
        if m == 1 {
            for a in 0..=trunc {
                indices.push(vec![a]);
            }
        } else {
            for total in 0..=trunc {
                for a in 0..=total {
                    indices.push(vec![a, total - a]);
                }
            }
        }
        let nf = n as f64;
        let log_norms = indices
            .iter()
            .map(|al: &Vec<usize>| {
                let deg: usize = al.iter().sum();
                let lfa: f64 = al.iter().map(|&a| lf[a]).sum();
                0.5 * ((deg + m) as f64 * nf.ln() - m as f64 * PI.ln() - lfa)
            })
            .collect();
        FockSpace { model: Model::BargmannFock { m }, m, n, trunc, indices, log_norms }
    }

    pub fn truncation(&self) -> usize {
        self.trunc
    }

    fn monomial(&self, p: &[C], al: &[usize], shift: Option<usize>) -> C {
        let mut v = C::new(1.0, 0.0);
        for (k, (&a, z)) in al.iter().zip(p).enumerate() {
            let e = match shift {
                Some(s) if s == k => {
                    if a == 0 {
                        return C::new(0.0, 0.0);
                    }
                    v *= a as f64;
                    a - 1
                }
                _ => a,
            };
            v *= z.powu(e as u32);
        }
        v
    }
}

impl SectionSpace for FockSpace {
    fn model(&self) -> &Model {
        &self.model
    }
    fn level(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.indices.len()
    }
    fn is_truncated(&self) -> bool {
        true
    }
    fn gram_residual(&self) -> f64 {
        0.0
    }
    fn grid_info(&self) -> String {
        format!("closed-form kernel; basis truncated at total degree {}", self.trunc)
    }
    fn lift(&self, p: &[C]) -> Vec<C> {
        let g = (-(self.n as f64) * 0.5 * p.iter().map(|z| z.norm_sqr()).sum::<f64>()).exp();
        self.indices.iter().zip(&self.log_norms).map(|(al, ln)| self.monomial(p, al, None) * (ln.exp() * g)).collect()
    }
    fn lift_dw(&self, p: &[C]) -> Vec<C> {
        let g = (-(self.n as f64) * 0.5 * p.iter().map(|z| z.norm_sqr()).sum::<f64>()).exp();
        let mut out = Vec::with_capacity(self.indices.len() * self.m);
        for (al, ln) in self.indices.iter().zip(&self.log_norms) {
            for k in 0..self.m {
                out.push(self.monomial(p, al, Some(k)) * (ln.exp() * g));
            }
        }
        out
    }
    fn kernel_base(&self, p: &[C], q: &[C]) -> C {
        let nf = self.n as f64;
        let pq: C = p.iter().zip(q).map(|(a, b)| a * b.conj()).sum();
        let np: f64 = p.iter().map(|a| a.norm_sqr()).sum();
        let nq: f64 = q.iter().map(|a| a.norm_sqr()).sum();
        (nf * (pq - 0.5 * (np + nq))).exp() * (nf / PI).powi(self.m as i32)
    }
    fn diagonal(&self, _p: &[C]) -> f64 {
        (self.n as f64 / PI).powi(self.m as i32)
    }
}

// ---------------------------------------------------------------------------
// Projective line

/// Serializable orthonormalization data of the perturbed projective line:
/// the inverse Cholesky factor `M` with `M G M* = I`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedTable {
    pub level: usize,
    pub grid: (usize, usize),
    pub residual: f64,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Sections of `O(N)` on `CP¹`: monomials `w^k` orthonormalized for the
/// Fubini–Study metric, or for the perturbed metric through a Cholesky
/// factor of the quadrature Gram matrix.
pub struct ProjectiveSpace {
    model: Model,
    n: usize,
    log_coef: Vec<f64>,
    transform: Option<DMatrix<C>>,
    residual: f64,
    grid: Option<(usize, usize)>,
}

/// Gram residual threshold for the perturbed basis.
pub const PERTURBED_GRAM_TOL: f64 = 1e-8;

impl ProjectiveSpace {
    pub fn exact(n: usize) -> Self {
        let lb = ln_binomials(n);
        let c0 = ((n + 1) as f64 / PI).ln();
        ProjectiveSpace {
            model: Model::ProjectiveLine,
            n,
            log_coef: lb.iter().map(|l| 0.5 * (c0 + l)).collect(),
            transform: None,
            residual: 0.0,
            grid: None,
        }
    }

    /// Perturbed basis. A cached table is reused when its level matches;
    /// otherwise the Gram matrix is assembled and checked against a refined
    /// quadrature.
    pub fn perturbed(model: &Model, n: usize, table: Option<&PerturbedTable>) -> Result<Self> {
        model.validate()?;
        let mut base = ProjectiveSpace::exact(n);
        base.model = model.clone();
        if let Some(t) = table {
            if t.level == n && t.re.len() == (n + 1) * (n + 1) && t.residual <= PERTURBED_GRAM_TOL {
                let mat = DMatrix::from_fn(n + 1, n + 1, |i, j| C::new(t.re[i * (n + 1) + j], t.im[i * (n + 1) + j]));
                base.transform = Some(mat);
                base.residual = t.residual;
                base.grid = Some(t.grid);
                return Ok(base);
            }
        }
        let mut nt = n + 48;
        let mut nphi = 2 * n + 64;
        for _ in 0..5 {
            let g = perturbed_gram(&base, nt, nphi);
            let l = Cholesky::new(g).ok_or_else(|| Error::Underresolved("Gram matrix not positive definite".into()))?;
            let linv = l
                .l()
                .solve_lower_triangular(&DMatrix::identity(n + 1, n + 1))
                .ok_or_else(|| Error::Underresolved("singular Cholesky factor".into()))?;
            let (rt, rp) = ((nt * 3).div_ceil(2), (nphi * 3).div_ceil(2));
            let g2 = perturbed_gram(&base, rt, rp);
            let check = &linv * g2 * linv.adjoint();
            let res = (check - DMatrix::<C>::identity(n + 1, n + 1)).iter().fold(0.0f64, |a, z| a.max(z.norm()));
            if res <= PERTURBED_GRAM_TOL {
                base.transform = Some(linv);
                base.residual = res;
                base.grid = Some((nt, nphi));
                return Ok(base);
            }
            nt = (nt * 3).div_ceil(2);
            nphi = (nphi * 3).div_ceil(2);
        }
        Err(Error::Underresolved(format!("perturbed Gram residual above {PERTURBED_GRAM_TOL:e} at grid {nt}x{nphi}")))
    }

    /// Orthonormalization data for caching.
    pub fn table(&self) -> Option<PerturbedTable> {
        let m = self.transform.as_ref()?;
        let n1 = self.n + 1;
        let mut re = Vec::with_capacity(n1 * n1);
        let mut im = Vec::with_capacity(n1 * n1);
        for i in 0..n1 {
            for j in 0..n1 {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        Some(PerturbedTable { level: self.n, grid: self.grid?, residual: self.residual, re, im })
    }

    /// Fubini–Study normalized monomials `ŝ_k` and their derivative lifts.
    fn fs_values(&self, w: C, deriv: bool) -> Vec<C> {
        let n = self.n;
        let r2 = w.norm_sqr();
        let lw = -(n as f64) * 0.5 * r2.ln_1p();
        let mut out = vec![C::new(0.0, 0.0); n + 1];
        if r2 == 0.0 {
            let k = if deriv { 1 } else { 0 };
            if k <= n {
                let f = if deriv { 1.0 } else { 0.0 };
                let v = self.log_coef[k].exp();
                out[k] = C::new(if deriv { v * f } else { v }, 0.0);
            }
            return out;
        }
        let lr = 0.5 * r2.ln();
        let arg = w.arg();
        for (k, o) in out.iter_mut().enumerate() {
            if deriv {
                if k == 0 {
                    continue;
                }
                let mag = (self.log_coef[k] + (k as f64).ln() + (k - 1) as f64 * lr + lw).exp();
                *o = C::from_polar(mag, (k - 1) as f64 * arg);
            } else {
                let mag = (self.log_coef[k] + k as f64 * lr + lw).exp();
                *o = C::from_polar(mag, k as f64 * arg);
            }
        }
        out
    }

    fn perturbation_factor(&self, w: C) -> f64 {
        match &self.model {
            Model::PerturbedProjectiveLine { eps, bump } => (-(self.n as f64) * eps * bump.value(w) * 0.5).exp(),
            _ => 1.0,
        }
    }

    fn apply(&self, v: Vec<C>, w: C) -> Vec<C> {
        match &self.transform {
            None => v,
            Some(m) => {
                let f = self.perturbation_factor(w);
                (0..v.len()).map(|i| (0..=i).map(|k| m[(i, k)] * v[k]).sum::<C>() * f).collect()
            }
        }
    }
}

/// `G_{jk} = ∫ ŝ_j conj(ŝ_k) e^{-Nεχ} dV_ε` on the sphere `w = tan(ϑ/2)e^{iϕ}`,
/// Gauss–Legendre in `t = cos ϑ` and trapezoid in `ϕ`.
fn perturbed_gram(space: &ProjectiveSpace, nt: usize, nphi: usize) -> DMatrix<C> {
    let n = space.n;
    let model = &space.model;
    let lb = ln_binomials(n);
    let c0 = ((n + 1) as f64 / PI).ln();
    let roots: Vec<C> = (0..nphi).map(|r| C::from_polar(1.0, 2.0 * PI * r as f64 / nphi as f64)).collect();
    let nodes = gauss_legendre(nt, -1.0, 1.0);
    let chunks: Vec<&[(f64, f64)]> = nodes.chunks(nt.div_ceil(16).max(1)).collect();
    let partial: Vec<DMatrix<C>> = chunks
        .par_iter()
        .map(|chunk| {
            let mut g = DMatrix::<C>::zeros(n + 1, n + 1);
            let mut what = vec![C::new(0.0, 0.0); 2 * n + 1];
            for &(t, wt) in chunk.iter() {
                let r = ((1.0 - t) / (1.0 + t)).sqrt();
                let weights: Vec<f64> = (0..nphi)
                    .map(|b| {
                        let w = r * roots[b];
                        let f = space.perturbation_factor(w);
                        f * f * model.volume_density_ratio(w)
                    })
                    .collect();
                for (li, wh) in what.iter_mut().enumerate() {
                    let l = li as i64 - n as i64;
                    let mut s = C::new(0.0, 0.0);
                    for (b, wb) in weights.iter().enumerate() {
                        let idx = ((l * b as i64).rem_euclid(nphi as i64)) as usize;
                        s += roots[idx] * *wb;
                    }
                    *wh = s * (2.0 * PI / nphi as f64);
                }
                let lp = (0.5 * (1.0 - t)).ln();
                let lm = (0.5 * (1.0 + t)).ln();
                let rad: Vec<f64> =
                    (0..=n).map(|j| (0.5 * (c0 + lb[j] + j as f64 * lp + (n - j) as f64 * lm)).exp()).collect();
                for j in 0..=n {
                    for k in 0..=n {
                        g[(j, k)] += what[j + n - k] * (0.25 * wt * rad[j] * rad[k]);
                    }
                }
            }
            g
        })
        .collect();
    partial.into_iter().fold(DMatrix::zeros(n + 1, n + 1), |a, b| a + b)
}

impl SectionSpace for ProjectiveSpace {
    fn model(&self) -> &Model {
        &self.model
    }
    fn level(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.n + 1
    }
    fn gram_residual(&self) -> f64 {
        self.residual
    }
    fn grid_info(&self) -> String {
        match self.grid {
            Some((a, b)) => format!("Gauss–Legendre {a} in cos ϑ × trapezoid {b} in ϕ (check at 1.5×)"),
            None => "closed form".into(),
        }
    }
    fn lift(&self, p: &[C]) -> Vec<C> {
        self.apply(self.fs_values(p[0], false), p[0])
    }
    fn lift_dw(&self, p: &[C]) -> Vec<C> {
        self.apply(self.fs_values(p[0], true), p[0])
    }
    fn kernel_base(&self, p: &[C], q: &[C]) -> C {
        if self.transform.is_some() {
            let a = self.lift(p);
            let b = self.lift(q);
            return a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum();
        }
        let (w, v) = (p[0], q[0]);
        let nf = self.n as f64;
        let num = (1.0 + w * v.conj()).powf(nf);
        let den = ((1.0 + w.norm_sqr()) * (1.0 + v.norm_sqr())).powf(0.5 * nf);
        num / den * ((nf + 1.0) / PI)
    }
}

// ---------------------------------------------------------------------------
// Torus

/// Level-`N` theta functions `θ_j(w) = Σ_n exp(πiNτ(n+j/N)² + 2πiN(n+j/N)w)`,
/// normalized by `(2N Im τ)^{1/4}/√π`.
pub struct ThetaSpace {
    model: Model,
    tau: C,
    n: usize,
    norm: f64,
}

impl ThetaSpace {
    pub fn new(tau: C, n: usize) -> Self {
        let norm = (2.0 * n as f64 * tau.im).powf(0.25) / PI.sqrt();
        ThetaSpace { model: Model::Torus { tau }, tau, n, norm }
    }

    /// Lifted values and derivative lifts of all basis elements.
    pub fn values(&self, w: C, deriv: bool) -> (Vec<C>, Vec<C>) {
        let nf = self.n as f64;
        let (x, y) = (w.re, w.im);
        let ti = self.tau.im;
        let tr = self.tau.re;
        let mut vals = Vec::with_capacity(self.n);
        let mut ders = Vec::with_capacity(if deriv { self.n } else { 0 });
        for j in 0..self.n {
            let frac = j as f64 / nf;
            let n0 = (-y / ti - frac).round();
            let term = |k: f64| -> (C, f64) {
                let q = n0 + k + frac;
                let re = -(PI * nf / ti) * (ti * q + y).powi(2);
                let im = PI * nf * tr * q * q + 2.0 * PI * nf * q * x;
                (C::from_polar(re.exp(), im), q)
            };
            let (t0, q0) = term(0.0);
            let mut s = t0;
            let mut d = t0 * q0;
            for dir in [1.0, -1.0] {
                let mut k = dir;
                loop {
                    let (t, q) = term(k);
                    s += t;
                    d += t * q;
                    if t.norm() < 1e-17 * s.norm().max(1e-300) {
                        break;
                    }
                    k += dir;
                }
            }
            vals.push(s * self.norm);
            if deriv {
                ders.push(d * (2.0 * PI * nf * self.norm) * I);
            }
        }
        (vals, ders)
    }

    pub fn tau(&self) -> C {
        self.tau
    }
}

impl SectionSpace for ThetaSpace {
    fn model(&self) -> &Model {
        &self.model
    }
    fn level(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn gram_residual(&self) -> f64 {
        0.0
    }
    fn grid_info(&self) -> String {
        "theta series, terms dropped below 1e-17 of the partial sum".into()
    }
    fn lift(&self, p: &[C]) -> Vec<C> {
        self.values(p[0], false).0
    }
    fn lift_dw(&self, p: &[C]) -> Vec<C> {
        self.values(p[0], true).1
    }
}

// ---------------------------------------------------------------------------
// Quadrature and inner products

/// A quadrature rule on `M`: points with weights summing to the volume.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub points: Vec<Vec<C>>,
    pub weights: Vec<f64>,
    pub description: String,
}

impl Quadrature {
    /// Tensor rule on `CP¹`: Gauss–Legendre in `cos ϑ` and trapezoid in `ϕ`,
    /// with the density of the model's volume form.
    pub fn sphere(model: &Model, nt: usize, nphi: usize) -> Quadrature {
        let mut points = Vec::with_capacity(nt * nphi);
        let mut weights = Vec::with_capacity(nt * nphi);
        for (t, wt) in gauss_legendre(nt, -1.0, 1.0) {
            let r = ((1.0 - t) / (1.0 + t)).sqrt();
            for b in 0..nphi {
                let w = C::from_polar(r, 2.0 * PI * b as f64 / nphi as f64);
                weights.push(0.25 * wt * 2.0 * PI / nphi as f64 * model.volume_density_ratio(w));
                points.push(vec![w]);
            }
        }
        Quadrature { points, weights, description: format!("sphere GL{nt} x trapezoid{nphi}") }
    }

    /// Uniform grid on the torus fundamental domain.
    pub fn torus(tau: C, n: usize) -> Quadrature {
        let mut points = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                points.push(vec![a as f64 / n as f64 + tau * (b as f64 / n as f64)]);
            }
        }
        let w = PI / (n * n) as f64;
        Quadrature { weights: vec![w; n * n], points, description: format!("torus uniform {n}x{n}") }
    }

    /// Tensor Gauss–Hermite rule on `C^m` adapted to integrands decaying
    /// like `e^{-N|w|²}`.
    pub fn fock(m: usize, n: usize, level: usize) -> Quadrature {
        let gh = gauss_hermite(n);
        let s = (level as f64).sqrt();
        let one: Vec<(C, f64)> = gh
            .iter()
            .flat_map(|&(a, wa)| {
                gh.iter().map(move |&(b, wb)| (C::new(a, b) / s, wa * wb * (a * a + b * b).exp() / level as f64))
            })
            .collect();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if m == 1 {
            for (z, w) in &one {
                points.push(vec![*z]);
                weights.push(*w);
            }
        } else {
            for (z1, w1) in &one {
                for (z2, w2) in &one {
                    points.push(vec![*z1, *z2]);
                    weights.push(w1 * w2);
                }
            }
        }
        Quadrature { points, weights, description: format!("Gauss–Hermite {n}^{} (scaled)", 2 * m) }
    }

    /// A rule exact for the level-`N` kernel products on compact models.
    pub fn for_level(model: &Model, level: usize) -> Quadrature {
        match model {
            Model::ProjectiveLine => Quadrature::sphere(model, level + 2, 2 * level + 3),
            Model::PerturbedProjectiveLine { .. } => Quadrature::sphere(model, level + 60, 2 * level + 80),
            Model::Torus { tau } => Quadrature::torus(*tau, (4 * level).max(32)),
            Model::BargmannFock { m } => Quadrature::fock(*m, if *m == 1 { 80 } else { 40 }, level),
        }
    }
}

/// An `e^{iNθ}`-equivariant function on `X`.
pub struct EquivariantFn<'a> {
    pub level: usize,
    pub f: Box<dyn Fn(&BundlePoint) -> C + Sync + 'a>,
}

impl<'a> EquivariantFn<'a> {
    pub fn new(level: usize, f: impl Fn(&BundlePoint) -> C + Sync + 'a) -> Self {
        EquivariantFn { level, f: Box::new(f) }
    }

    /// The lift of basis element `j` of a section space.
    pub fn basis_element(space: &'a dyn SectionSpace, j: usize) -> Self {
        EquivariantFn::new(space.level(), move |x| space.lift_at(x)[j])
    }
}

/// `(1/2π)∫_X F₁ conj(F₂) dV_X`, reduced to an integral over `M` on the
/// slice `θ = 0`.
pub fn inner_product(f1: &EquivariantFn, f2: &EquivariantFn, quad: &Quadrature) -> Result<C> {
    if f1.level != f2.level {
        return Err(Error::LevelMismatch(f1.level, f2.level));
    }
    let terms: Vec<C> = quad
        .points
        .par_iter()
        .zip(&quad.weights)
        .map(|(p, w)| {
            let x = BundlePoint::base(p.clone());
            (f1.f)(&x) * (f2.f)(&x).conj() * *w
        })
        .collect();
    Ok(crate::numeric::pairwise_sum(&terms))
}

/// Full Gram matrix of a section space under a quadrature rule.
pub fn gram_matrix(space: &dyn SectionSpace, quad: &Quadrature) -> DMatrix<C> {
    let d = space.dim();
    let lifts: Vec<Vec<C>> = quad.points.par_iter().map(|p| space.lift(p)).collect();
    let cols: Vec<Vec<C>> = (0..d)
        .into_par_iter()
        .map(|j| {
            (0..d)
                .map(|k| {
                    let terms: Vec<C> = lifts.iter().zip(&quad.weights).map(|(v, w)| v[j] * v[k].conj() * *w).collect();
                    crate::numeric::pairwise_sum(&terms)
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(d, d, |j, k| cols[j][k])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_dev_from_identity(g: &DMatrix<C>) -> f64 {
        let n = g.nrows();
        (g - DMatrix::<C>::identity(n, n)).iter().fold(0.0, |a, z| a.max(z.norm()))
    }

    #[test]
    fn fs_gram_is_identity() {
        for n in [1, 3, 10] {
            let s = ProjectiveSpace::exact(n);
            let g = gram_matrix(&s, &Quadrature::sphere(&Model::ProjectiveLine, n + 2, 2 * n + 3));
            assert!(max_dev_from_identity(&g) < 1e-12, "N={n}");
        }
    }

    #[test]
    fn theta_gram_is_identity() {
        let s = ThetaSpace::new(I, 5);
        let g = gram_matrix(&s, &Quadrature::torus(I, 64));
        assert!(max_dev_from_identity(&g) < 1e-10);
        let tau = C::new(0.3, 1.2);
        let s = ThetaSpace::new(tau, 4);
        let g = gram_matrix(&s, &Quadrature::torus(tau, 64));
        assert!(max_dev_from_identity(&g) < 1e-10);
    }

    #[test]
    fn theta_derivative_matches_difference() {
        let s = ThetaSpace::new(C::new(0.2, 0.9), 6);
        let w = C::new(0.31, 0.47);
        let (v0, d0) = s.values(w, true);
        let h = 1e-6;
        let (vp, _) = s.values(w + h, false);
        let (vm, _) = s.values(w - h, false);
        // The lift carries e^{-Nφ/2}, which depends on Im w only, so an
        // x-difference of the lift is the holomorphic derivative.
        for j in 0..6 {
            let fd = (vp[j] - vm[j]) / (2.0 * h);
            assert!((fd - d0[j]).norm() < 1e-6 * (1.0 + d0[j].norm()), "{j} {fd} {}", d0[j]);
            assert!(v0[j].norm().is_finite());
        }
    }

    #[test]
    fn fs_kernel_closed_form_matches_basis_sum() {
        let s = ProjectiveSpace::exact(7);
        let p = [C::new(0.3, -0.8)];
        let q = [C::new(-1.2, 0.4)];
        let a = s.lift(&p);
        let b = s.lift(&q);
        let direct: C = a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum();
        assert!((direct - s.kernel_base(&p, &q)).norm() < 1e-13);
    }

    #[test]
    fn perturbed_basis_is_orthonormal() {
        let model = Model::perturbed(0.1);
        let s = ProjectiveSpace::perturbed(&model, 12, None).unwrap();
        assert!(s.gram_residual() <= PERTURBED_GRAM_TOL);
        let g = gram_matrix(&s, &Quadrature::sphere(&model, 140, 200));
        assert!(max_dev_from_identity(&g) < 1e-8);
    }

    #[test]
    fn strongly_perturbed_metric_is_rejected() {
        let model = Model::perturbed(0.5);
        assert!(matches!(model.validate(), Err(Error::NotPositive(_))));
    }

    #[test]
    fn omega_of_standard_potential_is_dx_dy() {
        let om = Model::BargmannFock { m: 2 }.omega_real(&[C::new(0.1, 0.2), C::new(0.0, 1.0)]);
        assert!((om - standard_omega(2)).norm() < 1e-15);
        let g = Model::BargmannFock { m: 1 }.metric_real(&[C::new(0.0, 0.0)]);
        assert!((g - DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);
    }
}
