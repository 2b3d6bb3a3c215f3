//! The oscillatory integral `I₁ = N ∫∫ e^{iNΨ(t,θ)} A(t,θ) dθ dt` with phase
//! `Ψ = it(1 − e^{iθ}) − θ`, evaluated by quadrature and by complex
//! stationary phase at its unique critical point `(1, 0)`.
//!
//! The expansion is `γ Σ_j N^{-j} L_j A` with
//! `L_j u = Σ_{ν−μ=j, 2ν≥3μ} i^{-j} 2^{-ν} L^ν(R^μ u)(1,0) / (μ! ν!)`, where
//! `R` is `Ψ` minus its second-order Taylor polynomial at `(1, 0)` and
//! `L = ⟨Ψ''(1,0)^{-1} D, D⟩` with `D = −i∂`.

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::jet::Jet2;
use crate::numeric::{gauss_legendre, ln_factorials, pairwise_sum};
use crate::{Error, Result};

type C = Complex64;
const I: C = C::new(0.0, 1.0);

/// `Ψ(t, θ)`.
pub fn psi(t: f64, theta: f64) -> C {
    I * t * (1.0 - C::from_polar(1.0, theta)) - theta
}

/// `(∂Ψ/∂t, ∂Ψ/∂θ) = (i(1 − e^{iθ}), te^{iθ} − 1)`.
pub fn psi_gradient(t: f64, theta: f64) -> (C, C) {
    let e = C::from_polar(1.0, theta);
    (I * (1.0 - e), t * e - 1.0)
}

/// Hessian of `Ψ` in `(t, θ)`.
pub fn psi_hessian(t: f64, theta: f64) -> Matrix2<C> {
    let e = C::from_polar(1.0, theta);
    Matrix2::new(C::new(0.0, 0.0), e, e, I * t * e)
}

/// Grid points where `|∇Ψ|` has a local minimum below `tol` on
/// `[t0, t1] × (−π, π]`.
pub fn critical_point_scan(t0: f64, t1: f64, nt: usize, ntheta: usize, tol: f64) -> Vec<(f64, f64)> {
    let g = |i: usize, k: usize| {
        let t = t0 + (t1 - t0) * i as f64 / (nt - 1) as f64;
        let th = -PI + 2.0 * PI * k as f64 / ntheta as f64;
        let (a, b) = psi_gradient(t, th);
        (t, th, (a.norm_sqr() + b.norm_sqr()).sqrt())
    };
    let mut out = Vec::new();
    for i in 1..nt - 1 {
        for k in 0..ntheta {
            let (t, th, v) = g(i, k);
            if v >= tol {
                continue;
            }
            let nb = [(i - 1, k), (i + 1, k), (i, (k + 1) % ntheta), (i, (k + ntheta - 1) % ntheta)];
            if nb.iter().all(|&(a, b)| g(a, b).2 >= v) {
                out.push((t, th));
            }
        }
    }
    out
}

/// Which second-order operator plays the role of `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianConvention {
    /// `⟨Ψ''^{-1}D, D⟩` with `D = −i∂`, which equals `i∂_t² − 2∂_t∂_θ`.
    Definition,
    /// `2∂_t∂_θ − i∂_t²`, the opposite sign.
    Opposite,
}

/// Coefficients `(α, β, γ)` of `L = α∂_t² + β∂_t∂_θ + γ∂_θ²`.
pub fn hessian_operator(conv: HessianConvention) -> (C, C, C) {
    let h = psi_hessian(1.0, 0.0);
    let hi = h.try_inverse().expect("nondegenerate Hessian");
    // ⟨H⁻¹D, D⟩ with D = −i∂ is −Σ (H⁻¹)_{ab} ∂_a∂_b.
    let (a, b, c) = (-hi[(0, 0)], -2.0 * hi[(0, 1)], -hi[(1, 1)]);
    match conv {
        HessianConvention::Definition => (a, b, c),
        HessianConvention::Opposite => (-a, -b, -c),
    }
}

/// An amplitude `A(t, θ)`, `2π`-periodic in `θ`.
pub trait Amplitude: Sync {
    fn eval(&self, t: f64, theta: f64) -> C;
    /// Taylor coefficients at `(1, 0)` up to total degree `deg`, if known in
    /// closed form.
    fn jet(&self, _deg: usize) -> Option<Jet2> {
        None
    }
    /// Finite Fourier expansion in `θ` at fixed `t`, if available.
    fn fourier(&self, _t: f64) -> Option<Vec<(i64, C)>> {
        None
    }
    /// Interval in `t` outside of which `A` vanishes.
    fn support(&self) -> (f64, f64);
    fn name(&self) -> String;
}

fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// The cutoff `ρ₁`: zero for `t ≤ 0.1` and `t ≥ 2.9`, identically one on
/// `[0.25, 2.75]`.
pub fn cutoff(t: f64) -> f64 {
    smooth_step((t - 0.1) / 0.15) * smooth_step((2.9 - t) / 0.15)
}

/// Amplitudes bundled for testing, all multiplied by the cutoff `ρ₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BundledAmplitude {
    /// `ρ₁(t)`.
    Cutoff,
    /// `ρ₁(t) t^n e^{ikθ}`; its integral is known in closed form.
    Monomial { n: u32, k: i32 },
    /// `ρ₁(t) t² (1 + ½ sin θ)`.
    Polynomial,
    /// `ρ₁(t) (t + cos θ)`.
    Trigonometric,
    /// `ρ₁(t) exp(c t e^{iθ})` with `c = 0.4 − 0.3i`.
    Exponential,
    /// `ρ₁(t) e^{−(t−1)²/2} cos θ`.
    Gaussian,
    /// `ρ₁(t) e^{it/2} (1 + ½ sin θ)`.
    Chirp,
}

const EXP_C: C = C::new(0.4, -0.3);

impl BundledAmplitude {
    /// Amplitudes whose expansions do not terminate, so every order is
    /// visible in the error.
    pub const TEST_SET: [BundledAmplitude; 3] =
        [BundledAmplitude::Exponential, BundledAmplitude::Gaussian, BundledAmplitude::Chirp];

    /// Exact `∫_0^∞∫ N e^{iNΨ} t^n e^{ikθ} dθ dt = 2π (N−k+n)! / ((N−k)! N^n)`
    /// for the monomial amplitude without cutoff.
    pub fn monomial_exact(n: u32, k: i32, level: usize) -> C {
        let big = level as i64 - k as i64;
        if big < 0 {
            return C::new(0.0, 0.0);
        }
        let lf = ln_factorials((big + n as i64) as usize);
        let l = lf[(big + n as i64) as usize] - lf[big as usize] - n as f64 * (level as f64).ln();
        C::new(2.0 * PI * l.exp(), 0.0)
    }
}

impl Amplitude for BundledAmplitude {
    fn eval(&self, t: f64, th: f64) -> C {
        let r = cutoff(t);
        if r == 0.0 {
            return C::new(0.0, 0.0);
        }
        r * match *self {
            BundledAmplitude::Cutoff => C::new(1.0, 0.0),
            BundledAmplitude::Monomial { n, k } => t.powi(n as i32) * C::from_polar(1.0, k as f64 * th),
            BundledAmplitude::Polynomial => C::new(t * t * (1.0 + 0.5 * th.sin()), 0.0),
            BundledAmplitude::Trigonometric => C::new(t + th.cos(), 0.0),
            BundledAmplitude::Exponential => (EXP_C * t * C::from_polar(1.0, th)).exp(),
            BundledAmplitude::Gaussian => C::new((-0.5 * (t - 1.0).powi(2)).exp() * th.cos(), 0.0),
            BundledAmplitude::Chirp => C::from_polar(1.0 + 0.5 * th.sin(), 0.5 * t),
        }
    }

    fn jet(&self, deg: usize) -> Option<Jet2> {
        // ρ₁ ≡ 1 near t = 1, so only the analytic factor contributes.
        let t = &Jet2::constant(deg, C::new(1.0, 0.0)) + &Jet2::s(deg);
        let eith = Jet2::theta(deg).scale(I).exp();
        let emith = Jet2::theta(deg).scale(-I).exp();
        let one = Jet2::constant(deg, C::new(1.0, 0.0));
        Some(match *self {
            BundledAmplitude::Cutoff => one,
            BundledAmplitude::Monomial { n, k } => {
                let e = Jet2::theta(deg).scale(I * k as f64).exp();
                &t.powu(n as usize) * &e
            }
            BundledAmplitude::Polynomial => {
                let sin = (&eith - &emith).scale(-0.5 * I);
                &(&t * &t) * &(&one + &sin.scale(C::new(0.5, 0.0)))
            }
            BundledAmplitude::Trigonometric => &t + &(&eith + &emith).scale(C::new(0.5, 0.0)),
            BundledAmplitude::Exponential => (&t * &eith).scale(EXP_C).exp(),
            BundledAmplitude::Gaussian => {
                let s = Jet2::s(deg);
                let g = (&s * &s).scale(C::new(-0.5, 0.0)).exp();
                &g * &(&eith + &emith).scale(C::new(0.5, 0.0))
            }
            BundledAmplitude::Chirp => {
                let sin = (&eith - &emith).scale(-0.5 * I);
                &t.scale(0.5 * I).exp() * &(&one + &sin.scale(C::new(0.5, 0.0)))
            }
        })
    }

    fn fourier(&self, t: f64) -> Option<Vec<(i64, C)>> {
        let r = cutoff(t);
        Some(match *self {
            BundledAmplitude::Cutoff => vec![(0, C::new(r, 0.0))],
            BundledAmplitude::Monomial { n, k } => vec![(k as i64, C::new(r * t.powi(n as i32), 0.0))],
            BundledAmplitude::Polynomial => {
                let a = r * t * t;
                vec![(0, C::new(a, 0.0)), (1, -0.25 * I * a), (-1, 0.25 * I * a)]
            }
            BundledAmplitude::Trigonometric => {
                vec![(0, C::new(r * t, 0.0)), (1, C::new(0.5 * r, 0.0)), (-1, C::new(0.5 * r, 0.0))]
            }
            BundledAmplitude::Gaussian => {
                let a = 0.5 * r * (-0.5 * (t - 1.0).powi(2)).exp();
                vec![(1, C::new(a, 0.0)), (-1, C::new(a, 0.0))]
            }
            BundledAmplitude::Chirp => {
                let a = r * C::from_polar(1.0, 0.5 * t);
                vec![(0, a), (1, -0.25 * I * a), (-1, 0.25 * I * a)]
            }
            BundledAmplitude::Exponential => {
                let mut out = Vec::new();
                let mut c = C::new(r, 0.0);
                for k in 0..80 {
                    if k > 0 {
                        c *= EXP_C * t / k as f64;
                    }
                    out.push((k as i64, c));
                    if c.norm() < 1e-18 * r.max(1e-300) {
                        break;
                    }
                }
                out
            }
        })
    }

    fn support(&self) -> (f64, f64) {
        (0.1, 2.9)
    }

    fn name(&self) -> String {
        match self {
            BundledAmplitude::Monomial { n, k } => format!("monomial_t{n}_k{k}"),
            other => format!("{other:?}").to_lowercase(),
        }
    }
}

/// A black-box amplitude with jets from nested central differences.
pub struct SampledAmplitude<F: Fn(f64, f64) -> C + Sync> {
    pub f: F,
    pub support: (f64, f64),
}

/// Highest derivative order obtainable by finite differences.
pub const SAMPLED_JET_DEGREE: usize = 2;

impl<F: Fn(f64, f64) -> C + Sync> Amplitude for SampledAmplitude<F> {
    fn eval(&self, t: f64, th: f64) -> C {
        if t <= self.support.0 || t >= self.support.1 {
            return C::new(0.0, 0.0);
        }
        (self.f)(t, th)
    }

    fn jet(&self, deg: usize) -> Option<Jet2> {
        if deg > SAMPLED_JET_DEGREE {
            return None;
        }
        let f = |s: f64, th: f64| (self.f)(1.0 + s, th);
        let d = |h: f64| -> [C; 5] {
            let ds = (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h);
            let dt = (f(0.0, h) - f(0.0, -h)) / (2.0 * h);
            let dss = (f(h, 0.0) - 2.0 * f(0.0, 0.0) + f(-h, 0.0)) / (h * h);
            let dtt = (f(0.0, h) - 2.0 * f(0.0, 0.0) + f(0.0, -h)) / (h * h);
            let dst = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
            [ds, dt, dss, dst, dtt]
        };
        let (a, b) = (d(1e-3), d(5e-4));
        let r: Vec<C> = (0..5).map(|i| (4.0 * b[i] - a[i]) / 3.0).collect();
        let mut j = Jet2::zero(deg);
        j.set(0, 0, f(0.0, 0.0));
        if deg >= 1 {
            j.set(1, 0, r[0]);
            j.set(0, 1, r[1]);
        }
        if deg >= 2 {
            j.set(2, 0, r[2] / 2.0);
            j.set(1, 1, r[3]);
            j.set(0, 2, r[4] / 2.0);
        }
        Some(j)
    }

    fn support(&self) -> (f64, f64) {
        self.support
    }

    fn name(&self) -> String {
        "sampled".into()
    }
}

/// A quadrature value with its convergence data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureValue {
    pub value: C,
    pub error_estimate: f64,
    pub t_panels: usize,
    pub n_theta: usize,
}

/// Gauss–Legendre nodes per panel in `t`.
const PANEL_NODES: usize = 24;

fn integrate_grid(amp: &dyn Amplitude, level: usize, panels: usize, ntheta: usize) -> C {
    let (a, b) = amp.support();
    let n = level as f64;
    let width = (b - a) / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| gauss_legendre(PANEL_NODES, a + p as f64 * width, a + (p + 1) as f64 * width))
        .collect();
    let dth = 2.0 * PI / ntheta as f64;
    let rows: Vec<C> = nodes
        .par_iter()
        .map(|&(t, wt)| {
            let vals: Vec<C> = (0..ntheta)
                .map(|k| {
                    let th = -PI + dth * k as f64;
                    let re = -n * t * (1.0 - th.cos());
                    if re < -745.0 {
                        return C::new(0.0, 0.0);
                    }
                    let ph = C::new(re, n * t * th.sin() - n * th).exp();
                    ph * amp.eval(t, th)
                })
                .collect();
            pairwise_sum(&vals) * (wt * dth * n)
        })
        .collect();
    pairwise_sum(&rows)
}

/// `I₁` by Gauss–Legendre panels in `t` and the trapezoid rule in `θ`, both
/// doubled until successive values agree to `1e-11` relative.
pub fn oscillatory_integral(amp: &dyn Amplitude, level: usize) -> Result<QuadratureValue> {
    if level < 8 {
        return Err(Error::InvalidParameter(format!("N = {level} is below the resolvable range (N ≥ 8)")));
    }
    let mut panels = (level / 4).max(16);
    let mut ntheta = 8 * level + 64;
    let mut prev = integrate_grid(amp, level, panels, ntheta);
    for _ in 0..5 {
        panels *= 2;
        ntheta *= 2;
        let cur = integrate_grid(amp, level, panels, ntheta);
        let diff = (cur - prev).norm();
        if diff <= 1e-11 * cur.norm() || (cur.norm() < 1e-300 && prev.norm() < 1e-300) {
            return Ok(QuadratureValue { value: cur, error_estimate: diff, t_panels: panels, n_theta: ntheta });
        }
        prev = cur;
    }
    Err(Error::NotConverged(format!(
        "oscillatory integral at N = {level} still changing at {panels} panels × {ntheta} angles"
    )))
}

/// `I₁` with the `θ`-integral done exactly mode by mode:
/// `∫ e^{iNΨ} e^{ikθ} dθ = 2π e^{-Nt} (Nt)^{N−k}/(N−k)!`.
pub fn oscillatory_integral_fourier(amp: &dyn Amplitude, level: usize, t_range: (f64, f64)) -> Option<C> {
    let n = level as f64;
    let lf = ln_factorials(level + 200);
    let panels = 64;
    let (a, b) = t_range;
    let width = (b - a) / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| gauss_legendre(PANEL_NODES, a + p as f64 * width, a + (p + 1) as f64 * width))
        .collect();
    let rows: Option<Vec<C>> = nodes
        .iter()
        .map(|&(t, wt)| {
            let modes = amp.fourier(t)?;
            let mut s = C::new(0.0, 0.0);
            for (k, c) in modes {
                let big = level as i64 - k;
                if big < 0 || c == C::new(0.0, 0.0) {
                    continue;
                }
                let l = -n * t + big as f64 * (n * t).ln() - lf[big as usize];
                s += c * (2.0 * PI * l.exp());
            }
            Some(s * (wt * n))
        })
        .collect();
    Some(pairwise_sum(&rows?))
}

/// `L_j A` at `(1, 0)` for `j = 0..=J`.
pub fn expansion_terms(amp: &dyn Amplitude, jmax: usize, conv: HessianConvention) -> Result<Vec<C>> {
    let deg = (6 * jmax).max(2);
    let u = match amp.jet(deg) {
        Some(u) => u,
        None => {
            // Only derivatives up to order 2J enter L_j for j ≤ J.
            let small = amp.jet(2 * jmax).ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "order J = {jmax} needs amplitude derivatives of order {} (finite differences give {})",
                    2 * jmax,
                    SAMPLED_JET_DEGREE
                ))
            })?;
            let mut j = Jet2::zero(deg);
            for t in 0..=2 * jmax {
                for b in 0..=t {
                    j.set(t - b, b, small.coeff(t - b, b));
                }
            }
            j
        }
    };
    let (al, be, ga) = hessian_operator(conv);
    // R = Ψ(1+s, θ) minus its Taylor polynomial of order two.
    let one = Jet2::constant(deg, C::new(1.0, 0.0));
    let t = &one + &Jet2::s(deg);
    let e = Jet2::theta(deg).scale(I).exp();
    let psi = &(&t * &(&one - &e)).scale(I) - &Jet2::theta(deg);
    let r = psi.drop_below(3);
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    let mut out = Vec::with_capacity(jmax + 1);
    for j in 0..=jmax {
        let mut total = C::new(0.0, 0.0);
        for mu in 0..=2 * j {
            let nu = j + mu;
            if 2 * nu < 3 * mu {
                continue;
            }
            let mut f = &r.powu(mu) * &u;
            for _ in 0..nu {
                f = f.apply_second_order(al, be, ga);
            }
            total += f.value() / (2f64.powi(nu as i32) * fact(mu) * fact(nu));
        }
        out.push(total * I.powi(-(j as i32)));
    }
    Ok(out)
}

/// `N (det(NΨ''/2πi))^{-1/2}` with the branch continuous from the identity
/// along `(1−s)I + s(Ψ''/i)`; equals `2π` for this phase.
pub fn gamma_from_hessian() -> C {
    let h = psi_hessian(1.0, 0.0) / I;
    let det = |s: f64| {
        let m = Matrix2::identity() * C::new(1.0 - s, 0.0) + h * C::new(s, 0.0);
        m.determinant()
    };
    // Track the square root continuously.
    let mut root = C::new(1.0, 0.0);
    let steps = 1000;
    for i in 1..=steps {
        let d = det(i as f64 / steps as f64);
        let cand = d.sqrt();
        root = if (cand - root).norm() <= (cand + root).norm() { cand } else { -cand };
    }
    // det(NΨ''/2πi) = (N/2π)² det(Ψ''/i) in two variables.
    C::new(2.0 * PI, 0.0) / root
}

/// `(2π/i)^{1/2}`, the prefactor of a one-variable phase with `Ψ'' = 1`; it
/// does not apply to this two-variable phase.
pub fn one_variable_gamma() -> C {
    (C::new(0.0, -2.0 * PI)).sqrt()
}

/// `γ̂ = I₁/A(1,0)` for the cutoff amplitude at a reference level; the
/// higher terms vanish for an amplitude that is constant near `(1, 0)`.
pub fn calibrate_gamma(reference_level: usize) -> Result<C> {
    let q = oscillatory_integral(&BundledAmplitude::Cutoff, reference_level)?;
    Ok(q.value)
}

/// Partial sums against the quadrature reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatPhaseResult {
    pub amplitude: String,
    pub level: usize,
    pub gamma: C,
    pub terms: Vec<C>,
    pub partial_sums: Vec<C>,
    pub quadrature: C,
    pub quadrature_error: f64,
    pub errors: Vec<f64>,
    /// `N^{-(J+1)}` for each `J`, the scale of the stated remainder.
    pub remainder_scale: Vec<f64>,
}

pub fn stationary_phase_expansion(
    amp: &dyn Amplitude,
    level: usize,
    jmax: usize,
    gamma: C,
    conv: HessianConvention,
) -> Result<StatPhaseResult> {
    let terms = expansion_terms(amp, jmax, conv)?;
    let q = oscillatory_integral(amp, level)?;
    let n = level as f64;
    let mut partial = Vec::new();
    let mut acc = C::new(0.0, 0.0);
    for (j, l) in terms.iter().enumerate() {
        acc += l * n.powi(-(j as i32));
        partial.push(gamma * acc);
    }
    Ok(StatPhaseResult {
        amplitude: amp.name(),
        level,
        gamma,
        errors: partial.iter().map(|p| (p - q.value).norm()).collect(),
        remainder_scale: (0..=jmax).map(|j| n.powi(-(j as i32 + 1))).collect(),
        terms,
        partial_sums: partial,
        quadrature: q.value,
        quadrature_error: q.error_estimate,
    })
}

/// A bump supported on `t ∈ [2, 4]`, constant in `θ`.
pub struct TailBump;

impl Amplitude for TailBump {
    fn eval(&self, t: f64, _th: f64) -> C {
        let x = t - 3.0;
        if x.abs() >= 1.0 {
            C::new(0.0, 0.0)
        } else {
            C::new((-1.0 / (1.0 - x * x)).exp(), 0.0)
        }
    }
    fn fourier(&self, t: f64) -> Option<Vec<(i64, C)>> {
        Some(vec![(0, self.eval(t, 0.0))])
    }
    fn support(&self) -> (f64, f64) {
        (2.0, 4.0)
    }
    fn name(&self) -> String {
        "tail_bump".into()
    }
}

/// `|I₂|` over `t ≥ 2` and the constant `C_k = |I₂| / N^{m+1−k}` (`m = 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub level: usize,
    pub k: u32,
    pub magnitude: f64,
    pub constant: f64,
}

/// Tail integral for amplitudes with a finite Fourier expansion in `θ`,
/// using exact `θ`-integration so that tiny values are resolved.
pub fn i2_tail_bound(amp: &dyn Amplitude, level: usize, k: u32) -> Result<TailBound> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let (a, b) = amp.support();
    let v = oscillatory_integral_fourier(amp, level, (a.max(2.0), b))
        .ok_or_else(|| Error::Unsupported("tail amplitude needs a Fourier expansion".into()))?;
    let mag = v.norm();
    Ok(TailBound { level, k, magnitude: mag, constant: mag / (level as f64).powi(2 - k as i32) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_at_critical_point() {
        let h = psi_hessian(1.0, 0.0);
        assert_eq!(h, Matrix2::new(C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(1.0, 0.0), I));
        assert!((h.determinant() + 1.0).norm() < 1e-15);
    }

    #[test]
    fn definition_operator_is_i_dtt_minus_2_dtdtheta() {
        let (a, b, c) = hessian_operator(HessianConvention::Definition);
        assert!((a - I).norm() < 1e-15 && (b + 2.0).norm() < 1e-15 && c.norm() < 1e-15);
    }

    #[test]
    fn gamma_from_hessian_is_two_pi() {
        assert!((gamma_from_hessian() - 2.0 * PI).norm() < 1e-12);
    }

    #[test]
    fn expansion_of_t_squared() {
        // (N+1)(N+2)/N² = 1 + 3/N + 2/N².
        let t = expansion_terms(&BundledAmplitude::Monomial { n: 2, k: 0 }, 2, HessianConvention::Definition).unwrap();
        assert!((t[0] - 1.0).norm() < 1e-13);
        assert!((t[1] - 3.0).norm() < 1e-13);
        assert!((t[2] - 2.0).norm() < 1e-13);
    }
}
