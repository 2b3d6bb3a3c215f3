//! Preferred coordinates, preferred frames and Heisenberg charts.
//!
//! A [`PreferredChart`] is an affine map `w = P₀ + T z` in which `ω` and `g`
//! are standard at `P₀`. A [`PreferredFrame`] is the model frame times
//! `exp H`, with `H` holomorphic and fixed by the 2-jet of the potential so
//! that `log ‖e_L‖^{-2} = |z|² + O(|z|³)`. A [`HeisenbergChart`] combines both
//! into coordinates `(z, θ)` on the circle bundle.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::models::{standard_j, standard_omega, BundlePoint, Model};
use crate::{Error, Result};

type C = Complex64;
const I: C = C::new(0.0, 1.0);

/// Affine preferred coordinates at a point.
#[derive(Clone, Debug)]
pub struct PreferredChart {
    pub model: Model,
    pub center: Vec<C>,
    /// Real Jacobian: model displacement `= T · (x₁, y₁, …)`.
    pub jacobian: DMatrix<f64>,
    /// The same map as a complex `m×m` matrix; preferred charts of Kähler
    /// models are complex linear.
    pub complex_jacobian: DMatrix<C>,
    pub radius: f64,
}

/// Builds the preferred chart at `p0` by taking the inverse square root of
/// the metric and then rotating so that `ω` becomes `Σ dx∧dy`.
pub fn build_preferred_chart(model: &Model, p0: &[C]) -> Result<PreferredChart> {
    let m = model.complex_dim();
    if p0.len() != m || p0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("point not in the model atlas".into()));
    }
    let omega = model.omega_real(p0);
    let g = model.metric_real(p0);
    let eig = SymmetricEigen::new(g.clone());
    let lmax = eig.eigenvalues.max();
    if !(eig.eigenvalues.min() > 1e-12 * lmax) {
        return Err(Error::DegenerateMetric);
    }
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let om1 = &inv_sqrt * &omega * &inv_sqrt;
    let mut q = DMatrix::<f64>::zeros(2 * m, 2 * m);
    let mut filled = 0;
    for cand in 0..2 * m {
        if filled == 2 * m {
            break;
        }
        let mut v = nalgebra::DVector::<f64>::zeros(2 * m);
        v[cand] = 1.0;
        for c in 0..filled {
            let col = q.column(c).into_owned();
            v -= col.dot(&v) * col;
        }
        let nv = v.norm();
        if nv < 1e-8 {
            continue;
        }
        v /= nv;
        let partner = -(&om1 * &v);
        q.set_column(filled, &v);
        q.set_column(filled + 1, &partner);
        filled += 2;
    }
    if filled != 2 * m {
        return Err(Error::DegenerateMetric);
    }
    let t = &inv_sqrt * q;
    // Conditions (ω, g standard) are checked here because failure means the
    // model data is not a compatible triple.
    let om_check = t.transpose() * &omega * &t - standard_omega(m);
    let g_check = t.transpose() * &g * &t - DMatrix::<f64>::identity(2 * m, 2 * m);
    if om_check.amax() > 1e-10 || g_check.amax() > 1e-10 {
        return Err(Error::DegenerateMetric);
    }
    let jm = standard_j(m);
    if (&t * &jm - &jm * &t).amax() > 1e-9 * t.amax() {
        return Err(Error::DegenerateMetric);
    }
    let complex_jacobian = DMatrix::from_fn(m, m, |j, k| C::new(t[(2 * j, 2 * k)], t[(2 * j + 1, 2 * k)]));
    Ok(PreferredChart {
        model: model.clone(),
        center: p0.to_vec(),
        jacobian: t,
        complex_jacobian,
        radius: model.chart_radius(),
    })
}

impl PreferredChart {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Model coordinates of the chart point `z`.
    pub fn to_model(&self, z: &[C]) -> Result<Vec<C>> {
        let nz = z.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(nz <= self.radius) {
            return Err(Error::OutsideChart { norm: nz, radius: self.radius });
        }
        Ok(self.to_model_unchecked(z))
    }

    pub(crate) fn to_model_unchecked(&self, z: &[C]) -> Vec<C> {
        let m = self.dim();
        (0..m).map(|j| self.center[j] + (0..m).map(|k| self.complex_jacobian[(j, k)] * z[k]).sum::<C>()).collect()
    }

    /// Chart coordinates of a model point.
    pub fn from_model(&self, w: &[C]) -> Vec<C> {
        let d: nalgebra::DVector<C> =
            nalgebra::DVector::from_iterator(self.dim(), w.iter().zip(&self.center).map(|(a, b)| a - b));
        let inv = self.complex_jacobian.clone().try_inverse().expect("chart Jacobian is invertible");
        (inv * d).iter().copied().collect()
    }

    /// `ω` pulled back to chart coordinates at the chart point `z`.
    pub fn omega_at(&self, z: &[C]) -> DMatrix<f64> {
        let w = self.to_model_unchecked(z);
        self.jacobian.transpose() * self.model.omega_real(&w) * &self.jacobian
    }

    /// `g` pulled back to chart coordinates at the chart point `z`.
    pub fn metric_at(&self, z: &[C]) -> DMatrix<f64> {
        let w = self.to_model_unchecked(z);
        self.jacobian.transpose() * self.model.metric_real(&w) * &self.jacobian
    }

    /// The same chart rotated by a unitary map, `z ↦ U z`; still preferred.
    pub fn rotated(&self, u: &DMatrix<C>) -> PreferredChart {
        let cj = &self.complex_jacobian * u;
        let m = self.dim();
        let jac = DMatrix::from_fn(2 * m, 2 * m, |a, b| {
            let v = cj[(a / 2, b / 2)];
            match (a % 2, b % 2) {
                (0, 0) => v.re,
                (1, 0) => v.im,
                (0, 1) => -v.im,
                _ => v.re,
            }
        });
        PreferredChart { jacobian: jac, complex_jacobian: cj, ..self.clone() }
    }
}

/// A holomorphic polynomial gauge `h(w) = Σ a_k (w - P₀)^k` multiplying the
/// model frame before normalization; `m = 1` only. Different choices give
/// different preferred frames that agree to third order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PreGauge {
    pub coeffs: Vec<C>,
}

impl PreGauge {
    fn value(&self, d: C) -> C {
        self.coeffs.iter().rev().fold(C::new(0.0, 0.0), |acc, a| acc * d + a)
    }
    fn derivative(&self, d: C) -> C {
        self.coeffs.iter().enumerate().skip(1).rev().fold(C::new(0.0, 0.0), |acc, (k, a)| acc * d + a * k as f64)
    }
    fn second_derivative(&self, d: C) -> C {
        self.coeffs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(C::new(0.0, 0.0), |acc, (k, a)| acc * d + a * (k * (k - 1)) as f64)
    }
}

/// Preferred frame `e_L = e · exp(h(w) + G(z))` with
/// `G(z) = φ'(0)/2 + Σ φ'_j z_j + ½ Σ φ'_{jk} z_j z_k`, where `φ' = φ - 2 Re h`
/// in chart coordinates.
#[derive(Clone, Debug)]
pub struct PreferredFrame {
    pub chart: PreferredChart,
    pub pre_gauge: PreGauge,
    pub g0: f64,
    pub g1: Vec<C>,
    pub g2: DMatrix<C>,
}

/// Preferred frame from the model frame.
pub fn build_preferred_frame(model: &Model, chart: &PreferredChart) -> PreferredFrame {
    build_preferred_frame_with(model, chart, PreGauge::default())
}

/// Preferred frame obtained from the model frame multiplied by `exp h`.
pub fn build_preferred_frame_with(model: &Model, chart: &PreferredChart, pre: PreGauge) -> PreferredFrame {
    let m = chart.dim();
    let jet = model.jet(&chart.center);
    let cj = &chart.complex_jacobian;
    let zero = C::new(0.0, 0.0);
    let (h0, h1, h2) =
        if m == 1 { (pre.value(zero), pre.derivative(zero), pre.second_derivative(zero)) } else { (zero, zero, zero) };
    let mut d = jet.d.clone();
    let mut dd = jet.dd.clone();
    if m == 1 {
        d[0] -= h1;
        dd[(0, 0)] -= h2;
    }
    let g1: Vec<C> = (0..m).map(|j| (0..m).map(|a| d[a] * cj[(a, j)]).sum()).collect();
    let g2 = cj.transpose() * dd * cj;
    PreferredFrame { chart: chart.clone(), pre_gauge: pre, g0: 0.5 * (jet.phi - 2.0 * h0.re), g1, g2 }
}

impl PreferredFrame {
    /// Total holomorphic gauge `H = h + G` at the chart point `z`.
    pub fn gauge(&self, z: &[C]) -> C {
        let m = z.len();
        let mut g = C::new(self.g0, 0.0);
        for j in 0..m {
            g += self.g1[j] * z[j];
            for k in 0..m {
                g += 0.5 * self.g2[(j, k)] * z[j] * z[k];
            }
        }
        if m == 1 {
            let w = self.chart.to_model_unchecked(z);
            g += self.pre_gauge.value(w[0] - self.chart.center[0]);
        }
        g
    }

    /// `log a(z) = -log ‖e_L‖²_h`.
    pub fn log_a(&self, z: &[C]) -> f64 {
        let w = self.chart.to_model_unchecked(z);
        self.chart.model.potential(&w) - 2.0 * self.gauge(z).re
    }

    /// The weight `a(z) = ‖e_L*‖²`.
    pub fn a(&self, z: &[C]) -> f64 {
        self.log_a(z).exp()
    }

    /// `‖e_L‖_h`.
    pub fn norm(&self, z: &[C]) -> f64 {
        (-0.5 * self.log_a(z)).exp()
    }

    /// `∂ log a / ∂z_j`.
    pub fn dlog_a(&self, z: &[C]) -> Vec<C> {
        let m = z.len();
        let w = self.chart.to_model_unchecked(z);
        let jet = self.chart.model.jet(&w);
        let cj = &self.chart.complex_jacobian;
        let mut d = jet.d.clone();
        if m == 1 {
            d[0] -= self.pre_gauge.derivative(w[0] - self.chart.center[0]);
        }
        (0..m)
            .map(|j| {
                let mut v: C = (0..m).map(|a| d[a] * cj[(a, j)]).sum();
                v -= self.g1[j];
                for k in 0..m {
                    v -= self.g2[(j, k)] * z[k];
                }
                v
            })
            .collect()
    }
}

/// Heisenberg coordinates `ρ(z, θ) = e^{iθ} a(z)^{-1/2} e_L*(z)` centred at a
/// circle-bundle point `x₀`.
#[derive(Clone, Debug)]
pub struct HeisenbergChart {
    pub frame: PreferredFrame,
    /// Fiber offset so that `ρ(0, 0) = x₀`.
    pub kappa: f64,
}

/// Heisenberg chart at `x₀` with the default preferred frame.
pub fn heisenberg_chart(model: &Model, x0: &BundlePoint) -> Result<HeisenbergChart> {
    let chart = build_preferred_chart(model, &x0.pos)?;
    let frame = build_preferred_frame(model, &chart);
    Ok(HeisenbergChart::from_frame(frame, x0.theta))
}

impl HeisenbergChart {
    pub fn from_frame(frame: PreferredFrame, theta0: f64) -> Self {
        let zero = vec![C::new(0.0, 0.0); frame.chart.dim()];
        let kappa = theta0 + frame.gauge(&zero).im;
        HeisenbergChart { frame, kappa }
    }

    pub fn chart(&self) -> &PreferredChart {
        &self.frame.chart
    }

    pub fn dim(&self) -> usize {
        self.frame.chart.dim()
    }

    pub fn radius(&self) -> f64 {
        self.frame.chart.radius
    }

    /// The bundle point `ρ(z, θ)`.
    pub fn point(&self, z: &[C], theta: f64) -> Result<BundlePoint> {
        let w = self.frame.chart.to_model(z)?;
        Ok(BundlePoint { pos: w, theta: theta - self.frame.gauge(z).im + self.kappa })
    }

    /// Inverse of [`HeisenbergChart::point`]; `θ` is returned unreduced.
    pub fn coordinates(&self, x: &BundlePoint) -> (Vec<C>, f64) {
        let z = self.frame.chart.from_model(&x.pos);
        let theta = x.theta + self.frame.gauge(&z).im - self.kappa;
        (z, theta)
    }

    pub fn a(&self, z: &[C]) -> f64 {
        self.frame.a(z)
    }

    /// Connection coefficients `A_j = -(i/2) ∂ log a/∂z_j`, so that
    /// `α = dθ + Σ (A_j dz_j + Ā_j dz̄_j)`.
    pub fn connection(&self, z: &[C]) -> Vec<C> {
        self.frame.dlog_a(z).into_iter().map(|d| -0.5 * I * d).collect()
    }

    /// Vertical components of `∂ʰ/∂z_j` and `∂ʰ/∂z̄_j`: `(-A_j, -Ā_j)`.
    pub fn horizontal_lift_coeffs(&self, z: &[C]) -> Result<Vec<(C, C)>> {
        let nz = z.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(nz <= self.radius()) {
            return Err(Error::OutsideChart { norm: nz, radius: self.radius() });
        }
        Ok(self.connection(z).into_iter().map(|a| (-a, -a.conj())).collect())
    }

    /// `α` evaluated on a real tangent vector `(v_x₁, v_y₁, …, v_θ)` at `z`.
    pub fn contact_form(&self, z: &[C], v: &[f64]) -> f64 {
        let a = self.connection(z);
        let m = z.len();
        let mut s = v[2 * m];
        for j in 0..m {
            let dz = C::new(v[2 * j], v[2 * j + 1]);
            s += 2.0 * (a[j] * dz).re;
        }
        s
    }
}
