use std::f64::consts::PI;

use proptest::prelude::*;
use szego::jet::Jet2;
use szego::statphase::{
    calibrate_gamma, critical_point_scan, cutoff, expansion_terms, gamma_from_hessian, oscillatory_integral,
    oscillatory_integral_fourier, psi, psi_gradient, psi_hessian, Amplitude, BundledAmplitude, HessianConvention,
    SampledAmplitude,
};
use szego::Complex64 as C;

const ALL: [BundledAmplitude; 7] = [
    BundledAmplitude::Cutoff,
    BundledAmplitude::Monomial { n: 3, k: 1 },
    BundledAmplitude::Polynomial,
    BundledAmplitude::Trigonometric,
    BundledAmplitude::Exponential,
    BundledAmplitude::Gaussian,
    BundledAmplitude::Chirp,
];

/// `Σ c_i A_i`, evaluated and differentiated term by term.
struct Combination(Vec<(C, BundledAmplitude)>);

impl Amplitude for Combination {
    fn eval(&self, t: f64, th: f64) -> C {
        self.0.iter().map(|(c, a)| c * a.eval(t, th)).sum()
    }
    fn jet(&self, deg: usize) -> Option<Jet2> {
        let mut acc = Jet2::zero(deg);
        for (c, a) in &self.0 {
            acc = &acc + &a.jet(deg)?.scale(*c);
        }
        Some(acc)
    }
    fn fourier(&self, t: f64) -> Option<Vec<(i64, C)>> {
        let mut out = Vec::new();
        for (c, a) in &self.0 {
            out.extend(a.fourier(t)?.into_iter().map(|(k, v)| (k, c * v)));
        }
        Some(out)
    }
    fn support(&self) -> (f64, f64) {
        (0.1, 2.9)
    }
    fn name(&self) -> String {
        "combination".into()
    }
}

/// Five-point central difference with step 1e-3.
fn diff5(f: impl Fn(f64) -> C, x: f64) -> C {
    let h = 1e-3;
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Elementary symmetric polynomials `e_0..e_n` of `xs`.
fn elementary_symmetric(xs: &[f64]) -> Vec<f64> {
    let mut e = vec![1.0];
    for &x in xs {
        e.push(0.0);
        for j in (1..e.len()).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// `2π Π_{i=1}^n (1 + (i−k)/N)` expands with coefficients `e_j(1−k, …, n−k)`,
/// and γ = 2π, so the `j`-th expansion term is that coefficient.
#[test]
fn expansion_terms_match_exact_monomial_integrals() {
    for n in 0u32..5 {
        for k in -2i32..=2 {
            let roots: Vec<f64> = (1..=n as i32).map(|i| (i - k) as f64).collect();
            let e = elementary_symmetric(&roots);
            let terms =
                expansion_terms(&BundledAmplitude::Monomial { n, k }, 3, HessianConvention::Definition).unwrap();
            for j in 0..=3 {
                let expected = e.get(j).copied().unwrap_or(0.0);
                assert!((terms[j] - expected).norm() < 1e-10, "t^{n} e^{{i{k}θ}} term {j}: {} vs {expected}", terms[j]);
            }
        }
    }
}

#[test]
fn exact_monomial_formula_matches_its_product_form() {
    for (n, k, level) in [(2u32, 0i32, 10usize), (3, 1, 7), (0, -2, 5)] {
        let prod: f64 = (1..=n as i32).map(|i| 1.0 + (i - k) as f64 / level as f64).product();
        let v = BundledAmplitude::monomial_exact(n, k, level);
        assert!((v - 2.0 * PI * prod).norm() < 1e-12 * v.norm());
    }
}

#[test]
fn quadrature_agrees_with_fourier_reduction() {
    for amp in ALL {
        for level in [16usize, 64] {
            let q = oscillatory_integral(&amp, level).unwrap();
            let f = oscillatory_integral_fourier(&amp, level, amp.support()).unwrap();
            assert!((q.value - f).norm() <= 1e-9 * f.norm().max(1.0), "{amp:?} N={level}: {} vs {f}", q.value);
        }
    }
}

#[test]
fn gamma_by_two_routes() {
    let g = gamma_from_hessian();
    assert!((g - 2.0 * PI).norm() < 1e-12);
    let cal = calibrate_gamma(64).unwrap();
    assert!((cal - g).norm() < 1e-6, "{cal}");
}

#[test]
fn only_critical_point_is_one_zero() {
    let pts = critical_point_scan(0.05, 3.0, 60, 64, 0.2);
    assert_eq!(pts.len(), 1);
    let (t, th) = pts[0];
    assert!((t - 1.0).abs() < 0.06 && th.abs() < 0.1);
    let (a, b) = psi_gradient(1.0, 0.0);
    assert!(a.norm() < 1e-15 && b.norm() < 1e-15);
    assert!(psi(1.0, 0.0).norm() < 1e-15);
}

#[test]
fn cutoff_shape() {
    assert_eq!(cutoff(0.05), 0.0);
    assert_eq!(cutoff(2.95), 0.0);
    for t in [0.25, 1.0, 2.0, 2.75] {
        assert!((cutoff(t) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn sampled_jets_agree_with_closed_forms() {
    let amp = BundledAmplitude::Exponential;
    let sampled = SampledAmplitude { f: |t: f64, th: f64| amp.eval(t, th), support: (0.1, 2.9) };
    let exact = expansion_terms(&amp, 1, HessianConvention::Definition).unwrap();
    let approx = expansion_terms(&sampled, 1, HessianConvention::Definition).unwrap();
    for j in 0..2 {
        assert!((exact[j] - approx[j]).norm() < 1e-6, "{j}: {} vs {}", exact[j], approx[j]);
    }
    assert!(expansion_terms(&sampled, 2, HessianConvention::Definition).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phase_derivatives_match_differences(t in 0.05f64..3.0, th in -3.1f64..3.1) {
        let (gt, gth) = psi_gradient(t, th);
        prop_assert!((gt - diff5(|s| psi(s, th), t)).norm() < 1e-10);
        prop_assert!((gth - diff5(|s| psi(t, s), th)).norm() < 1e-10);
        let hs = psi_hessian(t, th);
        prop_assert!((hs[(0, 0)] - diff5(|s| psi_gradient(s, th).0, t)).norm() < 1e-10);
        prop_assert!((hs[(0, 1)] - diff5(|s| psi_gradient(t, s).0, th)).norm() < 1e-10);
        prop_assert!((hs[(1, 0)] - diff5(|s| psi_gradient(s, th).1, t)).norm() < 1e-10);
        prop_assert!((hs[(1, 1)] - diff5(|s| psi_gradient(t, s).1, th)).norm() < 1e-10);
    }

    #[test]
    fn phase_has_nonnegative_imaginary_part(t in 0.0f64..5.0, th in -3.2f64..3.2) {
        prop_assert!(psi(t, th).im >= -1e-15);
        prop_assert!((psi(t, th).im - t * (1.0 - th.cos())).abs() < 1e-13);
    }

    #[test]
    fn evaluators_are_linear(
        coeffs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 3),
        picks in prop::collection::vec(0usize..7, 3),
    ) {
        let parts: Vec<(C, BundledAmplitude)> =
            coeffs.iter().zip(&picks).map(|(&(a, b), &i)| (C::new(a, b), ALL[i])).collect();
        let combo = Combination(parts.clone());
        let terms = expansion_terms(&combo, 2, HessianConvention::Definition).unwrap();
        let mut sum = [C::new(0.0, 0.0); 3];
        let mut scale = 0.0f64;
        for (c, a) in &parts {
            let t = expansion_terms(a, 2, HessianConvention::Definition).unwrap();
            for j in 0..3 {
                sum[j] += c * t[j];
                scale = scale.max((c * t[j]).norm());
            }
        }
        for j in 0..3 {
            prop_assert!((terms[j] - sum[j]).norm() <= 1e-12 * scale.max(1.0));
        }
        let level = 32;
        let direct = oscillatory_integral_fourier(&combo, level, (0.1, 2.9)).unwrap();
        let mut split = C::new(0.0, 0.0);
        let mut mag = 0.0f64;
        for (c, a) in &parts {
            let v = c * oscillatory_integral_fourier(a, level, (0.1, 2.9)).unwrap();
            split += v;
            mag = mag.max(v.norm());
        }
        prop_assert!((direct - split).norm() <= 1e-12 * mag.max(1.0));
    }
}

#[test]
fn adaptive_quadrature_is_linear() {
    let parts = vec![(C::new(0.7, -0.2), BundledAmplitude::Gaussian), (C::new(-1.3, 0.4), BundledAmplitude::Chirp)];
    let combo = Combination(parts.clone());
    let level = 48;
    let direct = oscillatory_integral(&combo, level).unwrap();
    let split: C = parts.iter().map(|(c, a)| c * oscillatory_integral(a, level).unwrap().value).sum();
    // Each value is converged to about 1e-11 relative, so linearity holds to that level.
    assert!((direct.value - split).norm() <= 1e-10 * split.norm(), "{} vs {split}", direct.value);
}
