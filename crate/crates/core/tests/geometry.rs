use nalgebra::DMatrix;
use proptest::prelude::*;
use szego::geometry::{
    build_preferred_chart, build_preferred_frame, build_preferred_frame_with, heisenberg_chart, PreGauge,
};
use szego::models::{standard_j, standard_omega, BundlePoint, Model};
use szego::numeric::gauss_legendre;
use szego::Complex64 as C;

const H: f64 = 1e-4;

fn models() -> Vec<Model> {
    vec![
        Model::ProjectiveLine,
        Model::perturbed(0.1),
        Model::square_torus(),
        Model::Torus { tau: C::new(0.3, 1.2) },
        Model::BargmannFock { m: 1 },
        Model::BargmannFock { m: 2 },
    ]
}

fn point(model: &Model, coords: &[f64]) -> Vec<C> {
    (0..model.complex_dim()).map(|j| C::new(coords[2 * j], coords[2 * j + 1])).collect()
}

/// Displaces chart coordinates along real direction `a` (0 = x₁, 1 = y₁, …).
fn shift(z: &[C], a: usize, t: f64) -> Vec<C> {
    let mut out = z.to_vec();
    if a % 2 == 0 {
        out[a / 2] += C::new(t, 0.0);
    } else {
        out[a / 2] += C::new(0.0, t);
    }
    out
}

/// Real Hessian of `f` at `z` by central differences.
fn real_hessian(f: &dyn Fn(&[C]) -> f64, z: &[C]) -> DMatrix<f64> {
    let n = 2 * z.len();
    DMatrix::from_fn(n, n, |a, b| {
        let pp = f(&shift(&shift(z, a, H), b, H));
        let pm = f(&shift(&shift(z, a, H), b, -H));
        let mp = f(&shift(&shift(z, a, -H), b, H));
        let mm = f(&shift(&shift(z, a, -H), b, -H));
        (pp - pm - mp + mm) / (4.0 * H * H)
    })
}

/// The four jet relations of the weight at the chart centre:
/// `a(0) = 1`, `da = 0`, `∂²a/∂z_j∂z_k = 0`, `∂²a/∂z_j∂z̄_k = δ_jk`.
fn jet_defects(model: &Model, p0: &[C]) -> [f64; 4] {
    let h = heisenberg_chart(model, &BundlePoint::base(p0.to_vec())).unwrap();
    let m = p0.len();
    let zero = vec![C::new(0.0, 0.0); m];
    let a = |z: &[C]| h.a(z);
    let value = (a(&zero) - 1.0).abs();
    let grad =
        (0..2 * m).map(|d| ((a(&shift(&zero, d, H)) - a(&shift(&zero, d, -H))) / (2.0 * H)).abs()).fold(0.0, f64::max);
    let hess = real_hessian(&a, &zero);
    let mut holo = 0.0f64;
    let mut mixed = 0.0f64;
    for j in 0..m {
        for k in 0..m {
            let (xx, yy) = (hess[(2 * j, 2 * k)], hess[(2 * j + 1, 2 * k + 1)]);
            let (xy, yx) = (hess[(2 * j, 2 * k + 1)], hess[(2 * j + 1, 2 * k)]);
            let dzdz = 0.25 * C::new(xx - yy, -(xy + yx));
            let dzdzbar = 0.25 * C::new(xx + yy, xy - yx);
            let delta = if j == k { 1.0 } else { 0.0 };
            holo = holo.max(dzdz.norm());
            mixed = mixed.max((dzdzbar - delta).norm());
        }
    }
    [value, grad, holo, mixed]
}

fn coords() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weight_jet_relations_hold_at_random_centres(c in coords(), which in 0usize..6) {
        let model = &models()[which];
        let p0 = point(model, &c);
        let d = jet_defects(model, &p0);
        prop_assert!(d.iter().all(|&x| x < 1e-6), "{} at {:?}: {:?}", model.id(), p0, d);
    }

    #[test]
    fn chart_is_standard_at_its_centre(c in coords(), which in 0usize..6) {
        let model = &models()[which];
        let p0 = point(model, &c);
        let ch = build_preferred_chart(model, &p0).unwrap();
        let m = model.complex_dim();
        let zero = vec![C::new(0.0, 0.0); m];
        prop_assert!((ch.omega_at(&zero) - standard_omega(m)).amax() < 1e-10);
        prop_assert!((ch.metric_at(&zero) - DMatrix::<f64>::identity(2 * m, 2 * m)).amax() < 1e-10);
    }

    #[test]
    fn metric_is_compatible_and_positive(c in coords(), which in 0usize..6) {
        let model = &models()[which];
        let p = point(model, &c);
        let m = model.complex_dim();
        let om = model.omega_real(&p);
        let g = model.metric_real(&p);
        prop_assert!((&g - &om * standard_j(m)).amax() < 1e-14);
        prop_assert!((&g - g.transpose()).amax() < 1e-12 * g.amax());
        let eig = nalgebra::SymmetricEigen::new(g).eigenvalues;
        prop_assert!(eig.min() > 0.0);
    }

    #[test]
    fn connection_is_linear_to_second_order(c in coords(), which in 0usize..4, dir in 0.0f64..6.3) {
        let model = &models()[which];
        let h = heisenberg_chart(model, &BundlePoint::base(point(model, &c))).unwrap();
        let zero = [C::new(0.0, 0.0)];
        prop_assert!(h.connection(&zero)[0].norm() < 1e-12);
        // A(z) + (i/2) z̄ = O(|z|²): the quotient by |z|² stays bounded.
        let quotient = |r: f64| {
            let z = [C::from_polar(r, dir)];
            (h.connection(&z)[0] + 0.5 * C::new(0.0, 1.0) * z[0].conj()).norm() / (r * r)
        };
        let (q1, q2) = (quotient(0.02), quotient(0.01));
        prop_assert!(q2 <= 1.5 * q1 + 1e-6, "{q1} {q2}");
    }
}

#[test]
fn chart_construction_is_deterministic() {
    for model in models() {
        let p0 = point(&model, &[0.37, -0.21, 0.11, 0.4]);
        let a = build_preferred_chart(&model, &p0).unwrap();
        let b = build_preferred_chart(&model, &p0).unwrap();
        let bits = |m: &DMatrix<f64>| m.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.jacobian), bits(&b.jacobian));
        let fa = build_preferred_frame(&model, &a);
        let fb = build_preferred_frame(&model, &b);
        assert_eq!(fa.g0.to_bits(), fb.g0.to_bits());
        assert_eq!(fa.g1, fb.g1);
    }
}

#[test]
fn gauge_choices_agree_to_third_order() {
    let pre = PreGauge { coeffs: vec![C::new(0.3, -0.2), C::new(0.5, 0.4), C::new(-0.7, 0.1), C::new(0.9, -0.6)] };
    for model in [Model::ProjectiveLine, Model::perturbed(0.1), Model::square_torus()] {
        let ch = build_preferred_chart(&model, &[C::new(0.4, -0.3)]).unwrap();
        let f1 = build_preferred_frame(&model, &ch);
        let f2 = build_preferred_frame_with(&model, &ch, pre.clone());
        for dir in [0.0, 1.1, 2.5, 4.0] {
            let diff = |r: f64| {
                let z = [C::from_polar(r, dir)];
                (f1.log_a(&z) - f2.log_a(&z)).abs()
            };
            let (d1, d2, d3) = (diff(0.04), diff(0.02), diff(0.01));
            // Third differences: halving r divides the gap by about eight.
            assert!(d2 / 0.02f64.powi(3) <= 1.3 * d1 / 0.04f64.powi(3) + 1e-6, "{} {d1} {d2}", model.id());
            assert!(d3 / 0.01f64.powi(3) <= 1.3 * d2 / 0.02f64.powi(3) + 1e-6, "{} {d2} {d3}", model.id());
            assert!(d1 > 1e-9, "gauges should differ at third order");
        }
    }
}

#[test]
fn symplectic_area_is_pi_times_degree() {
    // Sphere: w = tan(s) e^{iφ}, dx dy = r dr dφ with dr = sec² s ds.
    let radial = gauss_legendre(200, 0.0, std::f64::consts::FRAC_PI_2);
    let angular = gauss_legendre(64, 0.0, 2.0 * std::f64::consts::PI);
    for model in [Model::ProjectiveLine, Model::perturbed(0.1)] {
        let mut area = 0.0;
        for &(s, ws) in &radial {
            let r = s.tan();
            let jac = r / s.cos().powi(2);
            for &(phi, wp) in &angular {
                let om = model.omega_real(&[C::from_polar(r, phi)]);
                area += ws * wp * jac * om[(0, 1)];
            }
        }
        let expected = std::f64::consts::PI * model.degree().unwrap() as f64;
        assert!((area - expected).abs() < 1e-8, "{}: {area}", model.id());
    }
    for tau in [C::new(0.0, 1.0), C::new(0.3, 1.2)] {
        let model = Model::Torus { tau };
        // ω is constant; the fundamental domain has Euclidean area Im τ.
        let om = model.omega_real(&[C::new(0.2, 0.1)]);
        let area = om[(0, 1)] * tau.im;
        assert!((area - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(model.degree(), Some(1));
    }
}
