use std::f64::consts::PI;

use proptest::prelude::*;
use szego::models::{
    basis_sections, gram_matrix, heisenberg_model_kernel, inner_product, BundlePoint, EquivariantFn, Model, Quadrature,
    SectionSpace,
};
use szego::Complex64 as C;

fn compact_models() -> Vec<Model> {
    vec![Model::ProjectiveLine, Model::perturbed(0.1), Model::square_torus(), Model::Torus { tau: C::new(0.3, 1.2) }]
}

fn all_models() -> Vec<Model> {
    let mut v = compact_models();
    v.push(Model::BargmannFock { m: 1 });
    v.push(Model::BargmannFock { m: 2 });
    v
}

fn point(model: &Model, c: &[f64]) -> Vec<C> {
    (0..model.complex_dim()).map(|j| C::new(c[2 * j], c[2 * j + 1])).collect()
}

/// `∫_X Π_N(x,y)Π_N(y,z) dV_X(y) = ⟨Π_N(·,z), Π_N(·,x)⟩`.
fn reproduced(space: &dyn SectionSpace, quad: &Quadrature, x: &BundlePoint, z: &BundlePoint) -> C {
    let n = space.level();
    let f1 = EquivariantFn::new(n, |y| space.kernel(y, z));
    let f2 = EquivariantFn::new(n, |y| space.kernel(y, x));
    inner_product(&f1, &f2, quad).unwrap()
}

#[test]
fn reproducing_property_on_exact_models() {
    let models =
        [Model::ProjectiveLine, Model::square_torus(), Model::BargmannFock { m: 1 }, Model::BargmannFock { m: 2 }];
    for model in models {
        for n in [4usize, 16, 32] {
            if matches!(model, Model::BargmannFock { m: 2 }) && n > 16 {
                continue;
            }
            let space = basis_sections(&model, n).unwrap();
            let quad = Quadrature::for_level(&model, n);
            // Fock space is dilation invariant, so its points are kept at a
            // fixed distance in units of 1/√N.
            let scale = match model {
                Model::BargmannFock { m: 2 } => 0.3,
                Model::BargmannFock { .. } => 0.6f64.min(2.4 / (n as f64).sqrt()),
                _ => 0.6,
            };
            let pts: Vec<BundlePoint> = (0..5)
                .map(|k| {
                    let t = k as f64 - 2.0;
                    let c = [scale * t / 2.0, 0.2 * t, -0.1 * t, scale * 0.25];
                    BundlePoint::new(point(&model, &c), 0.3 * t)
                })
                .collect();
            let tol = 1e-6 * (n as f64).powi(model.complex_dim() as i32);
            for x in &pts {
                for z in &pts {
                    let err = (reproduced(space.as_ref(), &quad, x, z) - space.kernel(x, z)).norm();
                    assert!(err <= tol, "{} N={n}: {err}", model.id());
                }
            }
        }
    }
}

#[test]
fn diagonal_integrates_to_the_dimension() {
    for model in compact_models() {
        for n in [1usize, 5, 16, 32] {
            let space = basis_sections(&model, n).unwrap();
            let quad = Quadrature::for_level(&model, n);
            let total: f64 = quad.points.iter().zip(&quad.weights).map(|(p, w)| w * space.diagonal(p)).sum();
            let d = space.dim() as f64;
            assert!((total - d).abs() <= 1e-6 * d, "{} N={n}: {total} vs {d}", model.id());
        }
    }
}

#[test]
fn dimensions_match_counts() {
    // Degree-N binary forms have one monomial per split a + b = N.
    for n in [1usize, 3, 7] {
        let forms = (0..=n).flat_map(|a| (0..=n).map(move |b| (a, b))).filter(|(a, b)| a + b == n).count();
        assert_eq!(basis_sections(&Model::ProjectiveLine, n).unwrap().dim(), forms);
        assert_eq!(basis_sections(&Model::perturbed(0.1), n).unwrap().dim(), forms);
        assert_eq!(basis_sections(&Model::square_torus(), n).unwrap().dim(), n);
    }
    assert_eq!(basis_sections(&Model::ProjectiveLine, 3).unwrap().dim(), 4);
}

#[test]
fn torus_gram_on_a_64_grid() {
    let space = basis_sections(&Model::square_torus(), 5).unwrap();
    let g = gram_matrix(space.as_ref(), &Quadrature::torus(C::new(0.0, 1.0), 64));
    let mut dev = 0.0f64;
    for j in 0..5 {
        for k in 0..5 {
            let id = if j == k { 1.0 } else { 0.0 };
            dev = dev.max((g[(j, k)] - id).norm());
        }
    }
    assert!(dev <= 1e-10, "{dev}");
    assert!(space.gram_residual() <= 1e-10);
}

#[test]
fn torus_norm_matches_a_fine_grid() {
    let tau = C::new(0.0, 1.0);
    let space = basis_sections(&Model::Torus { tau }, 3).unwrap();
    let f = EquivariantFn::basis_element(space.as_ref(), 1);
    let coarse = inner_product(&f, &f, &Quadrature::torus(tau, 32)).unwrap();
    let fine = inner_product(&f, &f, &Quadrature::torus(tau, 256)).unwrap();
    assert!((coarse - fine).norm() < 1e-9);
}

#[test]
fn level_one_gram_is_identity() {
    for model in compact_models() {
        let space = basis_sections(&model, 1).unwrap();
        let g = gram_matrix(space.as_ref(), &Quadrature::for_level(&model, 1));
        for j in 0..space.dim() {
            for k in 0..space.dim() {
                let id = if j == k { 1.0 } else { 0.0 };
                assert!((g[(j, k)] - id).norm() < 1e-8, "{}", model.id());
            }
        }
    }
}

#[test]
fn closed_form_diagonals() {
    let fs = basis_sections(&Model::ProjectiveLine, 9).unwrap();
    for w in [C::new(0.0, 0.0), C::new(0.7, -1.3), C::new(-4.0, 2.0)] {
        assert!((fs.diagonal(&[w]) - 10.0 / PI).abs() < 1e-12);
    }
    for m in [1usize, 2] {
        let bf = basis_sections(&Model::BargmannFock { m }, 1).unwrap();
        let zero = vec![C::new(0.0, 0.0); m];
        assert!((bf.diagonal(&zero) - PI.powi(-(m as i32))).abs() < 1e-12);
    }
}

#[test]
fn heisenberg_kernel_values() {
    let z = [C::new(0.0, 0.0)];
    assert!((heisenberg_model_kernel(&z, 0.0, &z, 0.0) - 1.0 / PI).norm() < 1e-15);
    let u = [C::new(0.4, -0.9), C::new(0.1, 0.2)];
    assert!((heisenberg_model_kernel(&u, 0.5, &u, 0.5).norm() - PI.powi(-2)).abs() < 1e-15);
    let (a, b) = ([C::new(0.3, 0.8)], [C::new(-0.5, 0.1)]);
    let expected = (-(a[0] - b[0]).norm_sqr() / 2.0).exp() / PI;
    assert!((heisenberg_model_kernel(&a, 0.0, &b, 0.0).norm() - expected).abs() < 1e-15);
}

#[test]
fn perturbed_kernel_is_linear_in_eps() {
    let exact = basis_sections(&Model::ProjectiveLine, 8).unwrap();
    let x = [C::new(0.2, 0.1)];
    let y = [C::new(0.5, -0.3)];
    let gap = |eps: f64| {
        let s = basis_sections(&Model::perturbed(eps), 8).unwrap();
        (s.kernel_base(&x, &y) - exact.kernel_base(&x, &y)).norm()
    };
    let ratio = gap(1e-2) / gap(5e-3);
    assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
}

#[test]
fn invalid_models_are_rejected() {
    assert!(basis_sections(&Model::Torus { tau: C::new(0.0, -1.0) }, 3).is_err());
    assert!(basis_sections(&Model::BargmannFock { m: 3 }, 3).is_err());
    assert!(basis_sections(&Model::ProjectiveLine, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernel_is_hermitian_and_equivariant(
        c in prop::collection::vec(-1.2f64..1.2, 8),
        th in -3.0f64..3.0,
        phi in -3.0f64..3.0,
        rot in -3.0f64..3.0,
        which in 0usize..6,
        n in 1usize..12,
    ) {
        let model = &all_models()[which];
        let space = basis_sections(model, n).unwrap();
        let x = BundlePoint::new(point(model, &c[..4]), th);
        let y = BundlePoint::new(point(model, &c[4..]), phi);
        let k = space.kernel(&x, &y);
        let scale = space.diagonal(&x.pos).max(space.diagonal(&y.pos));
        prop_assert!((k - space.kernel(&y, &x).conj()).norm() <= 1e-12 * scale);
        let turned = space.kernel(&x.rotate(rot), &y);
        prop_assert!((turned - C::from_polar(1.0, n as f64 * rot) * k).norm() <= 1e-12 * scale);
        // Cauchy–Schwarz and positivity of the diagonal.
        prop_assert!(space.diagonal(&x.pos) > 0.0);
        prop_assert!(k.norm() <= (space.diagonal(&x.pos) * space.diagonal(&y.pos)).sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn lifts_are_equivariant(c in prop::collection::vec(-1.2f64..1.2, 4), th in -3.0f64..3.0, which in 0usize..6) {
        let model = &all_models()[which];
        let space = basis_sections(model, 5).unwrap();
        let base = BundlePoint::base(point(model, &c));
        let a = space.lift_at(&base.rotate(th));
        let b = space.lift(&base.pos);
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - C::from_polar(1.0, 5.0 * th) * v).norm() <= 1e-12 * (1.0 + v.norm()));
        }
    }
}
