//! Symbols on the cotangent bundle of a circle bundle over a ball in `C^m`
//! carrying an almost complex structure compatible with the standard
//! symplectic form.
//!
//! The base is the ball with real coordinates `(x_1, y_1, …, x_m, y_m)` and
//! `ω = Σ dx_j ∧ dy_j`. The circle bundle is the product with the contact
//! form `α = dθ + β`, `β = ½ Σ (x_j dy_j − y_j dx_j)`, so `dα = π*ω`. An
//! almost complex structure is given by its `(0,1)` space, spanned by
//!
//! ```text
//! W_j = √2 (∂/∂z̄_j + Σ_k B_jk(z) ∂/∂z_k)
//! ```
//!
//! with `B` symmetric (so the span is Lagrangean) and `‖B‖ < 1` (so it is
//! positive). The frame `Z̄_j` is `W` orthonormalized by the Cholesky factor
//! of `iω(W_j, W̄_k) = I − B B*`.
//!
//! The Poisson bracket is `{f, g} = Σ ∂_p f ∂_q g − ∂_q f ∂_p g` in Darboux
//! coordinates `(q, p) = ((x, θ), (ξ, p_θ))`, so linear symbols satisfy
//! `{σ_V, σ_W} = σ_[V,W]`.
//!
//! With these conventions the ideal generated by `ζ⁽¹⁾_j = ⟨ξ, Z̄_j⟩`
//! satisfies `{ζ⁽¹⁾_j, ζ⁽¹⁾_k} ≡ −Σ_p 𝒩̄^p_jk ζ̄⁽¹⁾_p` modulo the ideal, where
//! `𝒩 = ½N` and `N(Z_j, Z_k) = −2[Z_j, Z_k]^(0,1) = Σ N^p_jk Z̄_p`. The second
//! order generators are built from `𝒩`; see [`IdealNormalization`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::models::{BundlePoint, Model};
use crate::numeric::{complex_lstsq, loglog_slope};
use crate::{Error, Result};

type C = Complex64;

const I: C = C::new(0.0, 1.0);

/// The polynomial `B` defining an almost complex structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Deformation {
    /// `B = 0`: the standard integrable structure.
    Flat,
    /// The bundled witness on the 4-ball:
    ///
    /// ```text
    /// B_11 = z̄_2 + ½ z_1 z̄_1
    /// B_12 = B_21 = 0.3 z̄_1² + 0.2 z_2
    /// B_22 = −0.4 z̄_1 + 0.25 z_1 z̄_2
    /// ```
    ///
    /// The `z̄`-linear terms make `[W_1, W_2]` leave the `(0,1)` span at the
    /// origin, so the Nijenhuis tensor does not vanish there.
    Witness,
    /// A witness on the 6-ball, `B_jk = z̄_{(j+k) mod 3} + 0.2 z_j z_k`,
    /// where the cyclic Nijenhuis identity is not implied by antisymmetry.
    Witness3,
}

/// An almost complex structure `B(z)` on the ball of radius `radius` in
/// `C^m`, scaled by `strength`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmostComplexBall {
    pub m: usize,
    pub radius: f64,
    pub strength: f64,
    pub deformation: Deformation,
}

impl AlmostComplexBall {
    pub fn standard(m: usize) -> Self {
        AlmostComplexBall { m, radius: 0.9, strength: 0.0, deformation: Deformation::Flat }
    }

    /// The bundled non-integrable structure on the 4-ball.
    pub fn witness() -> Self {
        AlmostComplexBall { m: 2, radius: 0.9, strength: 0.4, deformation: Deformation::Witness }
    }

    pub fn witness3() -> Self {
        AlmostComplexBall { m: 3, radius: 0.6, strength: 0.3, deformation: Deformation::Witness3 }
    }

    /// The same structure with `B` scaled to `strength`; strength zero is
    /// the standard structure.
    pub fn with_strength(&self, strength: f64) -> Self {
        AlmostComplexBall { strength, ..self.clone() }
    }

    pub fn is_integrable_by_construction(&self) -> bool {
        self.strength == 0.0 || self.deformation == Deformation::Flat
    }

    fn complex_point(&self, x: &[f64]) -> Result<Vec<C>> {
        if x.len() != 2 * self.m {
            return Err(Error::InvalidParameter(format!("expected {} real coordinates, got {}", 2 * self.m, x.len())));
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= self.radius) {
            return Err(Error::OutsideChart { norm, radius: self.radius });
        }
        Ok((0..self.m).map(|j| C::new(x[2 * j], x[2 * j + 1])).collect())
    }

    /// `B(z)`.
    pub fn b_matrix(&self, x: &[f64]) -> Result<DMatrix<C>> {
        let z = self.complex_point(x)?;
        let m = self.m;
        let mut b = DMatrix::<C>::zeros(m, m);
        match self.deformation {
            Deformation::Flat => {}
            Deformation::Witness => {
                let (z1, z2) = (z[0], z[1]);
                b[(0, 0)] = z2.conj() + 0.5 * z1 * z1.conj();
                b[(0, 1)] = 0.3 * z1.conj() * z1.conj() + 0.2 * z2;
                b[(1, 0)] = b[(0, 1)];
                b[(1, 1)] = -0.4 * z1.conj() + 0.25 * z1 * z2.conj();
            }
            Deformation::Witness3 => {
                for j in 0..m {
                    for k in 0..m {
                        b[(j, k)] = z[(j + k) % m].conj() + 0.2 * z[j] * z[k];
                    }
                }
            }
        }
        Ok(b * C::new(self.strength, 0.0))
    }

    /// The orthonormal `(0,1)` frame: row `j` holds the components of `Z̄_j`
    /// in the real basis `(∂x_1, ∂y_1, …)`.
    pub fn frame(&self, x: &[f64]) -> Result<DMatrix<C>> {
        let m = self.m;
        let b = self.b_matrix(x)?;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // √2 ∂/∂z̄ = (∂x + i∂y)/√2, √2 ∂/∂z = (∂x − i∂y)/√2.
        let mut w = DMatrix::<C>::zeros(m, 2 * m);
        for j in 0..m {
            w[(j, 2 * j)] += C::new(s, 0.0);
            w[(j, 2 * j + 1)] += C::new(0.0, s);
            for k in 0..m {
                w[(j, 2 * k)] += b[(j, k)] * s;
                w[(j, 2 * k + 1)] -= b[(j, k)] * C::new(0.0, s);
            }
        }
        let h = DMatrix::<C>::identity(m, m) - &b * b.adjoint();
        let chol = h.cholesky().ok_or(Error::DegenerateMetric)?;
        let linv = chol.l().try_inverse().ok_or(Error::DegenerateMetric)?;
        Ok(linv * w)
    }

    /// The structure as a real matrix: `J Z = iZ`, `J Z̄ = −iZ̄`.
    pub fn j_matrix(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let p = basis(&self.frame(x)?);
        let m = self.m;
        let d = DMatrix::from_fn(2 * m, 2 * m, |a, b| {
            if a != b {
                C::new(0.0, 0.0)
            } else if a < m {
                I
            } else {
                -I
            }
        });
        let pinv = p.clone().try_inverse().ok_or(Error::DegenerateMetric)?;
        Ok((&p * d * pinv).map(|v| v.re))
    }

    /// Components of `β` in the real basis.
    pub fn beta(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m).flat_map(|j| [-0.5 * x[2 * j + 1], 0.5 * x[2 * j]]).collect()
    }

    /// `ω(u, v) = uᵀ Ω v`.
    pub fn omega_matrix(&self) -> DMatrix<f64> {
        let mut o = DMatrix::zeros(2 * self.m, 2 * self.m);
        for j in 0..self.m {
            o[(2 * j, 2 * j + 1)] = 1.0;
            o[(2 * j + 1, 2 * j)] = -1.0;
        }
        o
    }
}

/// Columns `Z_1 … Z_m, Z̄_1 … Z̄_m` of a frame given as rows `Z̄_j`.
fn basis(frame: &DMatrix<C>) -> DMatrix<C> {
    let m = frame.nrows();
    DMatrix::from_fn(2 * m, 2 * m, |a, c| if c < m { frame[(c, a)].conj() } else { frame[(c - m, a)] })
}

/// Base step of the spatial differences.
pub const FRAME_STEP: f64 = 2e-3;

/// Values that can be combined linearly by the difference formulas.
trait Linear: Sized {
    fn lin(&self, a: f64, other: &Self, b: f64) -> Self;
}

impl Linear for C {
    fn lin(&self, a: f64, o: &Self, b: f64) -> Self {
        self * a + o * b
    }
}

impl Linear for DMatrix<C> {
    fn lin(&self, a: f64, o: &Self, b: f64) -> Self {
        self * C::new(a, 0.0) + o * C::new(b, 0.0)
    }
}

impl Linear for DMatrix<f64> {
    fn lin(&self, a: f64, o: &Self, b: f64) -> Self {
        self * a + o * b
    }
}

/// Central difference of `f` along coordinate `a`, Richardson-combined over
/// steps `h` and `h/2`.
fn richardson<T: Linear, F: Fn(&[f64]) -> Result<T>>(x: &[f64], a: usize, h: f64, f: F) -> Result<T> {
    let diff = |h: f64| -> Result<T> {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[a] += h;
        xm[a] -= h;
        Ok(f(&xp)?.lin(0.5 / h, &f(&xm)?, -0.5 / h))
    };
    let d1 = diff(h)?;
    let d2 = diff(0.5 * h)?;
    Ok(d2.lin(4.0 / 3.0, &d1, -1.0 / 3.0))
}

/// Components `N^p_jk`, indexed `(p, j, k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    pub m: usize,
    pub c: Vec<C>,
}

impl Tensor3 {
    pub fn zeros(m: usize) -> Self {
        Tensor3 { m, c: vec![C::new(0.0, 0.0); m * m * m] }
    }

    pub fn get(&self, p: usize, j: usize, k: usize) -> C {
        self.c[(p * self.m + j) * self.m + k]
    }

    pub fn set(&mut self, p: usize, j: usize, k: usize, v: C) {
        self.c[(p * self.m + j) * self.m + k] = v;
    }

    pub fn scaled(&self, s: f64) -> Self {
        Tensor3 { m: self.m, c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |N^p_jk + N^p_kj|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let m = self.m;
        let mut d = 0.0f64;
        for p in 0..m {
            for j in 0..m {
                for k in 0..m {
                    d = d.max((self.get(p, j, k) + self.get(p, k, j)).norm());
                }
            }
        }
        d
    }

    /// `max |N^p_jk + N^k_pj + N^j_kp|`.
    pub fn cyclic_defect(&self) -> f64 {
        let m = self.m;
        let mut d = 0.0f64;
        for p in 0..m {
            for j in 0..m {
                for k in 0..m {
                    d = d.max((self.get(p, j, k) + self.get(k, p, j) + self.get(j, k, p)).norm());
                }
            }
        }
        d
    }
}

/// `N^p_jk` from `N(Z_j, Z_k) = −2[Z_j, Z_k]^(0,1)`, with the Lie bracket of
/// the frame fields taken by finite differences.
pub fn nijenhuis(ball: &AlmostComplexBall, x: &[f64]) -> Result<Tensor3> {
    let m = ball.m;
    let frame = ball.frame(x)?;
    let p = basis(&frame);
    let lu = p.clone().lu();
    // ∂_a Z_k, as conjugates of ∂_a Z̄_k.
    let dz: Vec<DMatrix<C>> = (0..2 * m)
        .map(|a| richardson(x, a, FRAME_STEP, |y| ball.frame(y)).map(|d| d.map(|v| v.conj())))
        .collect::<Result<_>>()?;
    let z = frame.map(|v| v.conj());
    let mut n = Tensor3::zeros(m);
    for j in 0..m {
        for k in 0..m {
            let br = DVector::from_fn(2 * m, |c, _| {
                (0..2 * m).map(|a| z[(j, a)] * dz[a][(k, c)] - z[(k, a)] * dz[a][(j, c)]).sum::<C>()
            });
            let coef = lu.solve(&br).ok_or(Error::DegenerateMetric)?;
            for q in 0..m {
                n.set(q, j, k, -2.0 * coef[m + q]);
            }
        }
    }
    Ok(n)
}

/// The real Nijenhuis tensor
/// `N^c_ab = ½(J^d_a ∂_d J^c_b − J^d_b ∂_d J^c_a − J^c_d(∂_a J^d_b − ∂_b J^d_a))`,
/// indexed `[c][a][b]`.
pub fn nijenhuis_real(ball: &AlmostComplexBall, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    let n = 2 * ball.m;
    let j = ball.j_matrix(x)?;
    let dj: Vec<DMatrix<f64>> =
        (0..n).map(|a| richardson(x, a, FRAME_STEP, |y| ball.j_matrix(y))).collect::<Result<_>>()?;
    Ok((0..n)
        .map(|c| {
            DMatrix::from_fn(n, n, |a, b| {
                let mut v = 0.0;
                for d in 0..n {
                    v += j[(d, a)] * dj[d][(c, b)] - j[(d, b)] * dj[d][(c, a)];
                    v -= j[(c, d)] * (dj[a][(d, b)] - dj[b][(d, a)]);
                }
                0.5 * v
            })
        })
        .collect())
}

/// `N^p_jk` from the real tensor contracted with `Z_j, Z_k`, and the size of
/// the `(1,0)` part of `N(Z_j, Z_k)`, which must vanish.
pub fn nijenhuis_from_j(ball: &AlmostComplexBall, x: &[f64]) -> Result<(Tensor3, f64)> {
    let m = ball.m;
    let frame = ball.frame(x)?;
    let lu = basis(&frame).lu();
    let real = nijenhuis_real(ball, x)?;
    let z = frame.map(|v| v.conj());
    let mut n = Tensor3::zeros(m);
    let mut leak = 0.0f64;
    for j in 0..m {
        for k in 0..m {
            let v = DVector::from_fn(2 * m, |c, _| {
                let mut s = C::new(0.0, 0.0);
                for a in 0..2 * m {
                    for b in 0..2 * m {
                        s += z[(j, a)] * z[(k, b)] * real[c][(a, b)];
                    }
                }
                s
            });
            let coef = lu.solve(&v).ok_or(Error::DegenerateMetric)?;
            for q in 0..m {
                leak = leak.max(coef[q].norm());
                n.set(q, j, k, coef[m + q]);
            }
        }
    }
    Ok((n, leak))
}

/// How the Nijenhuis tensor enters the second order generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdealNormalization {
    /// `𝒩 = ½N`, the coefficient for which `{ζ⁽¹⁾_j, ζ⁽¹⁾_k} ≡ −Σ 𝒩̄^p_jk ζ̄⁽¹⁾_p`.
    Half,
    /// `N` itself. The resulting `ζ⁽²⁾` does not remove the first order
    /// bracket defect.
    Full,
}

/// The tensor whose conjugate enters `ν` under a normalization.
pub fn ideal_torsion(n: &Tensor3, normalization: IdealNormalization) -> Tensor3 {
    match normalization {
        IdealNormalization::Half => n.scaled(0.5),
        IdealNormalization::Full => n.clone(),
    }
}

/// `ν_p^{jk} = (i/6p_θ)(T̄^k_pj + T̄^j_pk)`, indexed `(p, j, k)`.
pub fn nu_coefficients(t: &Tensor3, p_theta: f64) -> Result<Tensor3> {
    if p_theta == 0.0 || !p_theta.is_finite() {
        return Err(Error::InvalidParameter("p_θ vanishes at the cone tip".into()));
    }
    let m = t.m;
    let c = I / (6.0 * p_theta);
    let mut nu = Tensor3::zeros(m);
    for p in 0..m {
        for j in 0..m {
            for k in 0..m {
                nu.set(p, j, k, c * (t.get(k, p, j).conj() + t.get(j, p, k).conj()));
            }
        }
    }
    Ok(nu)
}

/// Defects of the `ν` relations: symmetry in the upper pair, the cyclic sum,
/// and `ν_j^{pk} − ν_k^{pj} = (i/2p_θ) T̄^p_jk`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuDefects {
    pub symmetry: f64,
    pub cyclic: f64,
    pub commutator: f64,
}

pub fn nu_defects(nu: &Tensor3, t: &Tensor3, p_theta: f64) -> NuDefects {
    let m = nu.m;
    let mut d = NuDefects { symmetry: 0.0, cyclic: 0.0, commutator: 0.0 };
    for p in 0..m {
        for j in 0..m {
            for k in 0..m {
                d.symmetry = d.symmetry.max((nu.get(p, j, k) - nu.get(p, k, j)).norm());
                d.cyclic = d.cyclic.max((nu.get(p, j, k) + nu.get(k, p, j) + nu.get(j, k, p)).norm());
                let lhs = nu.get(j, p, k) - nu.get(k, p, j);
                let rhs = I / (2.0 * p_theta) * t.get(p, j, k).conj();
                d.commutator = d.commutator.max((lhs - rhs).norm());
            }
        }
    }
    d
}

// ---------------------------------------------------------------------------
// Symbols

/// A point of `T*X` in Darboux coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CotangentPoint {
    pub x: Vec<f64>,
    pub theta: f64,
    pub xi: Vec<f64>,
    pub p_theta: f64,
}

impl CotangentPoint {
    /// `(x, rα_x)`, a point of the cone `Σ`.
    pub fn on_cone(ball: &AlmostComplexBall, x: &[f64], r: f64) -> Self {
        CotangentPoint { x: x.to_vec(), theta: 0.0, xi: ball.beta(x).iter().map(|b| r * b).collect(), p_theta: r }
    }

    fn coords(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.push(self.theta);
        v.extend(&self.xi);
        v.push(self.p_theta);
        v
    }

    fn from_coords(v: &[f64]) -> Self {
        let n = v.len() / 2;
        CotangentPoint { x: v[..n - 1].to_vec(), theta: v[n - 1], xi: v[n..2 * n - 1].to_vec(), p_theta: v[2 * n - 1] }
    }
}

/// A complex function on `T*X`.
pub trait Symbol: Sync {
    fn eval(&self, pt: &CotangentPoint) -> Result<C>;

    /// Degree of homogeneity in the fiber.
    fn degree(&self) -> i32 {
        1
    }
}

/// `ζ⁽¹⁾_j(x, ξ) = ⟨ξ, Z̄_j^h⟩` for the horizontal lift `Z̄^h = Z̄ − β(Z̄)∂_θ`.
pub fn zeta1(ball: &AlmostComplexBall, pt: &CotangentPoint) -> Result<Vec<C>> {
    let f = ball.frame(&pt.x)?;
    let beta = ball.beta(&pt.x);
    Ok((0..ball.m).map(|j| (0..2 * ball.m).map(|a| f[(j, a)] * (pt.xi[a] - pt.p_theta * beta[a])).sum()).collect())
}

/// `ζ⁽²⁾_p = ζ⁽¹⁾_p + Σ_jk ν_p^{jk} ζ̄⁽¹⁾_j ζ̄⁽¹⁾_k`.
pub fn zeta2(ball: &AlmostComplexBall, pt: &CotangentPoint, normalization: IdealNormalization) -> Result<Vec<C>> {
    let z = zeta1(ball, pt)?;
    if ball.is_integrable_by_construction() {
        return Ok(z);
    }
    let t = ideal_torsion(&nijenhuis(ball, &pt.x)?, normalization);
    let nu = nu_coefficients(&t, pt.p_theta)?;
    let m = ball.m;
    Ok((0..m)
        .map(|p| {
            let mut r = C::new(0.0, 0.0);
            for j in 0..m {
                for k in 0..m {
                    r += nu.get(p, j, k) * z[j].conj() * z[k].conj();
                }
            }
            z[p] + r
        })
        .collect())
}

/// `q(x, ξ) = ½ g⁻¹(ξ_h, ξ_h)` for `g = ω(·, J·)` and `ξ_h(V) = ⟨ξ, V^h⟩`.
pub fn q_symbol(ball: &AlmostComplexBall, pt: &CotangentPoint) -> Result<f64> {
    let j = ball.j_matrix(&pt.x)?;
    let g = ball.omega_matrix() * j;
    let ginv = g.try_inverse().ok_or(Error::DegenerateMetric)?;
    let beta = ball.beta(&pt.x);
    let xh = DVector::from_iterator(2 * ball.m, (0..2 * ball.m).map(|a| pt.xi[a] - pt.p_theta * beta[a]));
    Ok(0.5 * (xh.transpose() * ginv * &xh)[(0, 0)])
}

/// Which generators a [`GeneratorSymbol`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generators {
    First,
    Second(IdealNormalization),
}

/// One generator `ζ_j`, optionally conjugated.
pub struct GeneratorSymbol<'a> {
    pub ball: &'a AlmostComplexBall,
    pub generators: Generators,
    pub index: usize,
    pub conjugate: bool,
}

impl Symbol for GeneratorSymbol<'_> {
    fn eval(&self, pt: &CotangentPoint) -> Result<C> {
        let v = match self.generators {
            Generators::First => zeta1(self.ball, pt)?,
            Generators::Second(n) => zeta2(self.ball, pt, n)?,
        };
        Ok(if self.conjugate { v[self.index].conj() } else { v[self.index] })
    }
}

/// `p_θ`.
pub struct PTheta;

impl Symbol for PTheta {
    fn eval(&self, pt: &CotangentPoint) -> Result<C> {
        Ok(C::new(pt.p_theta, 0.0))
    }
}

/// A symbol given by a closure.
pub struct FnSymbol<F>(pub F, pub i32);

impl<F: Fn(&CotangentPoint) -> Result<C> + Sync> Symbol for FnSymbol<F> {
    fn eval(&self, pt: &CotangentPoint) -> Result<C> {
        (self.0)(pt)
    }

    fn degree(&self) -> i32 {
        self.1
    }
}

/// `{f, g}` as a symbol, for nested brackets.
pub struct Bracket<'a>(pub &'a dyn Symbol, pub &'a dyn Symbol);

impl Symbol for Bracket<'_> {
    fn eval(&self, pt: &CotangentPoint) -> Result<C> {
        poisson_bracket(self.0, self.1, pt)
    }

    fn degree(&self) -> i32 {
        self.0.degree() + self.1.degree() - 1
    }
}

/// Step of the bracket differences.
pub const BRACKET_STEP: f64 = 2e-3;

/// `{f, g} = Σ ∂_p f ∂_q g − ∂_q f ∂_p g`, with Richardson-combined central
/// differences in every Darboux coordinate.
pub fn poisson_bracket(f: &dyn Symbol, g: &dyn Symbol, pt: &CotangentPoint) -> Result<C> {
    let v = pt.coords();
    let n = v.len() / 2;
    let d = |s: &dyn Symbol, a: usize| -> Result<C> {
        richardson(&v, a, BRACKET_STEP, |y| s.eval(&CotangentPoint::from_coords(y)))
    };
    let mut out = C::new(0.0, 0.0);
    for i in 0..n {
        let (q, p) = (i, n + i);
        out += d(f, p)? * d(g, q)? - d(f, q)? * d(g, p)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Ideal membership

/// Bracket residual at one distance from the cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealResidual {
    pub delta: f64,
    /// Largest RMS fit residual over the pairs `j < k`.
    pub residual: f64,
    pub samples: usize,
}

/// Directions used to leave the cone.
pub const IDEAL_DIRECTIONS: usize = 16;

/// Residual of `{ζ_j, ζ_k}` after least squares onto
/// `span{ζ_p} ⊕ span{ζ̄_p ζ̄_q}` with constant coefficients, over the points
/// `(x, α_x + δη)` for unit spatial covectors `η`.
///
/// A bracket in the ideal modulo `I_Σ²` leaves an `O(δ²)` residual; a `ζ̄`
/// term leaves `O(δ)`.
pub fn ideal_residual(
    ball: &AlmostComplexBall,
    x: &[f64],
    delta: f64,
    generators: Generators,
    seed: u64,
) -> Result<IdealResidual> {
    if !(delta > 0.0 && delta <= 0.1) {
        return Err(Error::InvalidParameter(format!("δ = {delta} outside (0, 0.1]")));
    }
    let m = ball.m;
    if m < 2 {
        return Err(Error::InvalidParameter("brackets need m ≥ 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = CotangentPoint::on_cone(ball, x, 1.0);
    let pts: Vec<CotangentPoint> = (0..IDEAL_DIRECTIONS)
        .map(|_| {
            let eta: Vec<f64> = (0..2 * m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut pt = base.clone();
            for (a, e) in eta.iter().enumerate() {
                pt.xi[a] += delta * e / norm;
            }
            pt
        })
        .collect();
    let gens: Vec<GeneratorSymbol> =
        (0..m).map(|j| GeneratorSymbol { ball, generators, index: j, conjugate: false }).collect();
    let values: Vec<Vec<C>> = pts.iter().map(|pt| gens.iter().map(|g| g.eval(pt)).collect()).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|p| (p..m).map(move |q| (p, q))).collect();
    let cols = m + pairs.len();
    let a = DMatrix::from_fn(pts.len(), cols, |s, c| {
        if c < m {
            values[s][c]
        } else {
            let (p, q) = pairs[c - m];
            values[s][p].conj() * values[s][q].conj()
        }
    });
    // Column scaling keeps the two orders comparable in the solve.
    let scales: Vec<f64> = (0..cols).map(|c| a.column(c).norm()).collect();
    let a = DMatrix::from_fn(pts.len(), cols, |s, c| a[(s, c)] / scales[c]);
    let mut worst = 0.0f64;
    for j in 0..m {
        for k in j + 1..m {
            let y = DVector::from_iterator(
                pts.len(),
                pts.iter().map(|pt| poisson_bracket(&gens[j], &gens[k], pt)).collect::<Result<Vec<C>>>()?,
            );
            let (_, r) = complex_lstsq(&a, &y, 1e-12)?;
            worst = worst.max(r.norm() / (pts.len() as f64).sqrt());
        }
    }
    Ok(IdealResidual { delta, residual: worst, samples: pts.len() })
}

/// Residuals over a sweep of `δ` with the fitted log-log slope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdealSweep {
    pub generators: Generators,
    pub point: Vec<f64>,
    pub residuals: Vec<IdealResidual>,
    pub slope: f64,
}

/// The default sweep `δ ∈ {1e−1, …, 1e−3}`, two points per decade.
pub fn default_deltas() -> Vec<f64> {
    (0..5).map(|k| 0.1 * 10f64.powf(-0.5 * k as f64)).collect()
}

pub fn ideal_sweep(
    ball: &AlmostComplexBall,
    x: &[f64],
    deltas: &[f64],
    generators: Generators,
    seed: u64,
) -> Result<IdealSweep> {
    let residuals: Vec<IdealResidual> =
        deltas.iter().map(|&d| ideal_residual(ball, x, d, generators, seed)).collect::<Result<_>>()?;
    let slope = loglog_slope(deltas, &residuals.iter().map(|r| r.residual).collect::<Vec<_>>());
    Ok(IdealSweep { generators, point: x.to_vec(), residuals, slope })
}

// ---------------------------------------------------------------------------
// The phase

/// The extension `a(z, w)` of `a = e^φ`, holomorphic in `z` and
/// antiholomorphic in `w`, in each integrable model's standard frame.
pub fn kernel_extension(model: &Model, z: &[C], w: &[C]) -> Result<C> {
    let a = match model {
        Model::BargmannFock { .. } => z.iter().zip(w).map(|(a, b)| a * b.conj()).sum::<C>().exp(),
        Model::ProjectiveLine => 1.0 + z[0] * w[0].conj(),
        Model::Torus { tau } => {
            let (z, w) = (z[0], w[0].conj());
            (std::f64::consts::PI / tau.im * (z * w - 0.5 * (z * z + w * w))).exp()
        }
        Model::PerturbedProjectiveLine { .. } => {
            return Err(Error::Unsupported("no closed-form extension of the perturbed potential".into()))
        }
    };
    if !a.is_finite() || a.norm() == 0.0 {
        return Err(Error::InvalidParameter("points too far apart for the extension".into()));
    }
    Ok(a)
}

/// `ψ(x, y) = i(1 − λ μ̄ a(z, w))` with `λ = a(z)^{-1/2} e^{iθ_x}`,
/// `μ = a(w)^{-1/2} e^{iθ_y}`.
pub fn phase_psi(model: &Model, x: &BundlePoint, y: &BundlePoint) -> Result<C> {
    let azw = kernel_extension(model, &x.pos, &y.pos)?;
    let az = kernel_extension(model, &x.pos, &x.pos)?.re;
    let aw = kernel_extension(model, &y.pos, &y.pos)?.re;
    let phase = C::from_polar(1.0, x.theta - y.theta);
    Ok(I * (1.0 - phase * azw / (az * aw).sqrt()))
}

/// `α = dθ + β` with `β = −(i/2)(∂ − ∂̄)φ`, in the real basis
/// `(∂x_1, ∂y_1, …, ∂θ)`.
pub fn contact_form(model: &Model, z: &[C]) -> Vec<f64> {
    let d = model.jet(z).d;
    let mut out: Vec<f64> = d.iter().flat_map(|p| [p.im, p.re]).collect();
    out.push(1.0);
    out
}

/// Finite-difference `d_xψ` and `−d_yψ` at `x = y`, in the basis of
/// [`contact_form`].
pub fn phase_differential(model: &Model, x: &BundlePoint, h: f64) -> Result<(Vec<C>, Vec<C>)> {
    let m = x.pos.len();
    let shift = |p: &BundlePoint, a: usize, s: f64| {
        let mut q = p.clone();
        if a == 2 * m {
            q.theta += s;
        } else if a % 2 == 0 {
            q.pos[a / 2] += C::new(s, 0.0);
        } else {
            q.pos[a / 2] += C::new(0.0, s);
        }
        q
    };
    let mut dx = Vec::with_capacity(2 * m + 1);
    let mut dy = Vec::with_capacity(2 * m + 1);
    for a in 0..=2 * m {
        dx.push((phase_psi(model, &shift(x, a, h), x)? - phase_psi(model, &shift(x, a, -h), x)?) / (2.0 * h));
        dy.push(-(phase_psi(model, x, &shift(x, a, h))? - phase_psi(model, x, &shift(x, a, -h))?) / (2.0 * h));
    }
    Ok((dx, dy))
}
