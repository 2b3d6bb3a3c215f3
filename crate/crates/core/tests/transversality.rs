use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use szego::kodaira::random_point;
use szego::models::{basis_sections, Model};
use szego::transversality::{
    build_lattice, decay_profile, delbar_sup, donaldson_search, eta_cell_centers, eta_of, euler_char_defect,
    fit_decay_constant, g_sum_max, genus_adjunction, peak_section, zero_locate, ChernData, DecayRow, GenusVariant,
    LevelSection, ScanDensity, SearchParams, TwistData, DECAY_SLACK,
};
use szego::Complex64 as C;

fn random_section(n: usize, dim: usize, seed: u64) -> LevelSection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LevelSection::new(n, (0..dim).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
}

#[test]
fn signed_zero_count_is_the_degree() {
    for model in [Model::ProjectiveLine, Model::square_torus()] {
        for n in 1..=16usize {
            let space = basis_sections(&model, n).unwrap();
            let s = random_section(n, space.dim(), 100 + n as u64);
            let z = zero_locate(space.as_ref(), &s, ScanDensity::default()).unwrap();
            assert!(z.reliable, "{} N={n}", model.id());
            assert_eq!(z.signed_count, n as i64 * model.degree().unwrap(), "{} N={n}", model.id());
            assert_eq!(z.expected, z.signed_count);
        }
    }
}

/// A single theta function is invariant up to phase under `w ↦ w + 1/N`, so
/// its zeros form one orbit of that translation. At the default density they
/// sit on cell corners and the scan must say so.
#[test]
fn theta_section_has_five_positive_zeros() {
    let space = basis_sections(&Model::square_torus(), 5).unwrap();
    let mut coeffs = vec![C::new(0.0, 0.0); 5];
    coeffs[2] = C::new(1.0, 0.0);
    let s = LevelSection::new(5, coeffs);
    assert!(!zero_locate(space.as_ref(), &s, ScanDensity::default()).unwrap().reliable);
    let z = zero_locate(space.as_ref(), &s, ScanDensity(4.11)).unwrap();
    assert!(z.reliable);
    assert_eq!(z.zeros.len(), 5);
    assert!(z.zeros.iter().all(|x| x.index == 1));
    let mut re: Vec<f64> = z.zeros.iter().map(|x| x.w.re).collect();
    re.sort_by(f64::total_cmp);
    for k in 1..5 {
        assert!((re[k] - re[k - 1] - 0.2).abs() < 1e-8, "{re:?}");
        assert!((z.zeros[k].w.im - z.zeros[0].w.im).abs() < 1e-8);
    }
}

/// Two monomials `a + b w³` vanish on one orbit of the cube roots of unity.
#[test]
fn binomial_zeros_are_cube_roots() {
    let space = basis_sections(&Model::ProjectiveLine, 3).unwrap();
    let coeffs = vec![C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(-0.7, 0.4)];
    let z = zero_locate(space.as_ref(), &LevelSection::new(3, coeffs), ScanDensity::default()).unwrap();
    assert_eq!(z.zeros.len(), 3);
    let cubes: Vec<C> = z.zeros.iter().map(|x| x.w.powu(3)).collect();
    for c in &cubes[1..] {
        assert!((c - cubes[0]).norm() <= 1e-8 * cubes[0].norm(), "{cubes:?}");
    }
    let mut args: Vec<f64> = z.zeros.iter().map(|x| x.w.arg()).collect();
    args.sort_by(f64::total_cmp);
    for k in 1..3 {
        assert!((args[k] - args[k - 1] - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-8);
    }
}

#[test]
fn eta_scales_with_the_section_and_ignores_its_phase() {
    for model in [Model::ProjectiveLine, Model::square_torus()] {
        let space = basis_sections(&model, 9).unwrap();
        let s = random_section(9, space.dim(), 5);
        let base = zero_locate(space.as_ref(), &s, ScanDensity::default()).unwrap();
        let eta = eta_of(&base).eta.unwrap();
        let scaled = eta_of(&zero_locate(space.as_ref(), &s.scaled(C::new(2.5, 0.0)), ScanDensity::default()).unwrap());
        assert!((scaled.eta.unwrap() - 2.5 * eta).abs() <= 1e-9 * eta, "{} {eta}", model.id());
        let turned = zero_locate(space.as_ref(), &s.scaled(C::from_polar(1.0, 1.1)), ScanDensity::default()).unwrap();
        assert!((eta_of(&turned).eta.unwrap() - eta).abs() <= 1e-9 * eta);
        assert_eq!(turned.zeros.len(), base.zeros.len());
        for a in &base.zeros {
            assert!(turned.zeros.iter().any(|b| (a.w - b.w).norm() < 1e-9), "{}", a.w);
        }
    }
}

#[test]
fn eta_agrees_with_a_refined_cell_scan() {
    let space = basis_sections(&Model::square_torus(), 16).unwrap();
    let s = random_section(16, 16, 11);
    let eta = eta_of(&zero_locate(space.as_ref(), &s, ScanDensity::default()).unwrap()).eta.unwrap();
    let cells = eta_cell_centers(space.as_ref(), &s, ScanDensity::default(), 4.0).unwrap().unwrap();
    assert!((cells - eta).abs() <= 0.05 * eta, "{cells} vs {eta}");
}

#[test]
fn peak_sections_are_one_at_their_centres() {
    for model in [Model::ProjectiveLine, Model::square_torus()] {
        let space = basis_sections(&model, 16).unwrap();
        let lattice = build_lattice(&model, 16, 1.0).unwrap();
        for p in &lattice.points {
            let pk = peak_section(space.as_ref(), p).unwrap();
            assert!((pk.modulus(space.as_ref(), p) - 1.0).abs() < 1e-10, "{} {p:?}", model.id());
        }
    }
}

#[test]
fn lattice_size_grows_like_the_level() {
    for model in [Model::ProjectiveLine, Model::square_torus()] {
        let a = build_lattice(&model, 16, 1.0).unwrap().points.len() as f64 / 16.0;
        let b = build_lattice(&model, 64, 1.0).unwrap().points.len() as f64 / 64.0;
        assert!((b / a - 1.0).abs() <= 0.5, "{} {a} {b}", model.id());
    }
}

fn violations(rows: &[DecayRow], c: f64, eps: f64) -> usize {
    rows.iter()
        .filter(|r| {
            let sn = (r.level as f64).sqrt();
            let d = r.d_n;
            let lo = (1.0 - c * d / sn) * (-(1.0 + eps) * d * d / 2.0).exp();
            let hi = (1.0 + c * d / sn) * (-(1.0 - eps) * d * d / 2.0).exp();
            r.modulus < lo - DECAY_SLACK || r.modulus > hi + DECAY_SLACK
        })
        .count()
}

/// One constant, fitted on the coarser level, bounds the decay at every
/// lattice point of both levels.
#[test]
fn peak_decay_sandwich() {
    let eps = 0.2;
    let radii: Vec<f64> = (0..9).map(|k| k as f64 * 0.25).collect();
    for model in [Model::ProjectiveLine, Model::square_torus()] {
        let rows: Vec<Vec<DecayRow>> = [64usize, 256]
            .iter()
            .map(|&n| {
                let space = basis_sections(&model, n).unwrap();
                let lattice = build_lattice(&model, n, 1.0).unwrap();
                lattice
                    .points
                    .iter()
                    .step_by(7)
                    .flat_map(|p| {
                        let pk = peak_section(space.as_ref(), p).unwrap();
                        decay_profile(space.as_ref(), &pk, &radii, eps, 0.0, false).unwrap()
                    })
                    .collect()
            })
            .collect();
        let c = fit_decay_constant(&rows[0], eps);
        assert!(c.is_finite() && c < 10.0, "{} C = {c}", model.id());
        for r in &rows {
            assert_eq!(violations(r, c, eps), 0, "{} C = {c}", model.id());
        }
    }
}

#[test]
fn g_sum_is_bounded_in_the_level() {
    for model in [Model::ProjectiveLine, Model::square_torus()] {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts: Vec<Vec<C>> = (0..100).map(|_| random_point(&model, &mut rng)).collect();
        let g: Vec<f64> = [16usize, 64]
            .iter()
            .map(|&n| {
                let space = basis_sections(&model, n).unwrap();
                g_sum_max(space.as_ref(), &build_lattice(&model, n, 1.0).unwrap(), &pts).unwrap()
            })
            .collect();
        let ratio = g[1].max(g[0]) / g[1].min(g[0]);
        assert!(ratio <= 1.25, "{} {g:?}", model.id());
    }
}

#[test]
fn search_finds_a_transverse_section() {
    let model = Model::square_torus();
    let space = basis_sections(&model, 16).unwrap();
    let lattice = build_lattice(&model, 16, 1.0).unwrap();
    let params = SearchParams { seed: 3, iterations: 200, ..SearchParams::default() };
    let (sec, rep) = donaldson_search(space.as_ref(), &lattice, &params).unwrap();
    assert!(rep.eta >= 0.05, "{}", rep.eta);
    assert_eq!(rep.signed_count, rep.expected_count);
    assert!(rep.best_eta_trace.windows(2).all(|w| w[1] >= w[0]));
    assert!(sec.weights.iter().all(|w| w.norm() < 1.0));
    // Holomorphic models have ∂̄s = 0; what remains is the truncation of the
    // difference step against terms of size N|s|.
    assert!(rep.delbar_sup < 1e-3, "{}", rep.delbar_sup);
    let s = random_section(16, 16, 2);
    assert!(delbar_sup(space.as_ref(), &s, 12).unwrap() < 1e-3);
}

#[test]
fn classical_genera() {
    assert_eq!(genus_adjunction(&ChernData::new(2, 1, 3), 3, GenusVariant::Surface).unwrap(), 1);
    assert_eq!(genus_adjunction(&ChernData::new(2, 1, 3), 4, GenusVariant::Surface).unwrap(), 3);
    assert_eq!(genus_adjunction(&ChernData::new(3, 1, 4), 1, GenusVariant::Codimension).unwrap(), 0);
    assert!(genus_adjunction(&ChernData::new(2, 1, 3), 0, GenusVariant::Surface).is_err());
    assert!(genus_adjunction(&ChernData::new(1, 1, 2), 2, GenusVariant::Codimension).is_err());
}

/// Plane curves of degree d have genus (d − 1)(d − 2)/2.
#[test]
fn plane_curves_follow_degree_genus() {
    for d in 1..12i64 {
        let g = genus_adjunction(&ChernData::new(2, 1, 3), d, GenusVariant::Surface).unwrap();
        assert_eq!(g, (d - 1) * (d - 2) / 2);
    }
}

fn trivial_twist(chern: &ChernData) -> ChernData {
    let m = chern.m as usize;
    let mut l_terms = vec![0; m];
    let mut m_terms = vec![0; m];
    l_terms[m - 1] = chern.c1l_m;
    m_terms[m - 1] = chern.c1m_c1l;
    ChernData { twist: Some(TwistData { rank: chern.m - 1, l_terms, e_terms: vec![0; m], m_terms }), ..chern.clone() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    /// On `CP^m` with `L = O(a)` and `E = ⊕O(b_i)`, the zero curve of a
    /// section of `E ⊗ L^N` has `2g − 2 = (Σ(b_i + Na) − m − 1) Π(b_i + Na)`.
    #[test]
    fn twisted_genus_matches_the_split_expansion(m in 2u32..5, a in 1i64..4, b in prop::collection::vec(0i64..4, 4), n in 1i64..6) {
        let b = &b[..(m - 1) as usize];
        let chern = ChernData::projective(m, a, b).unwrap();
        let roots: Vec<i128> = b.iter().map(|&bi| (bi + n * a) as i128).collect();
        let expected = (roots.iter().sum::<i128>() - m as i128 - 1) * roots.iter().product::<i128>();
        prop_assert_eq!(euler_char_defect(&chern, n, GenusVariant::Twisted).unwrap(), expected);
    }

    /// A trivial bundle reduces the twisted formula to the codimension one,
    /// and for surfaces both agree with the surface formula.
    #[test]
    fn genus_variants_are_consistent(m in 2u32..5, l in 1i64..20, k in -20i64..20, n in 1i64..8) {
        let chern = ChernData::new(m, l, k);
        let codim = euler_char_defect(&chern, n, GenusVariant::Codimension).unwrap();
        prop_assert_eq!(euler_char_defect(&trivial_twist(&chern), n, GenusVariant::Twisted).unwrap(), codim);
        if m == 2 {
            prop_assert_eq!(euler_char_defect(&chern, n, GenusVariant::Surface).unwrap(), codim);
        }
        let nn = n as i128;
        let expected = (m as i128 - 1) * l as i128 * nn.pow(m) - k as i128 * nn.pow(m - 1);
        prop_assert_eq!(codim, expected);
    }
}
