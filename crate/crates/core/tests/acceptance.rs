//! End-to-end acceptance run. Prints one line per criterion and exits
//! nonzero when a check fails that is not listed as a known gap.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use szego::geometry::heisenberg_chart;
use szego::kodaira::{envelope_constant, fn_profile, injectivity_scan, random_point, sample_pairs, tian_error};
use szego::models::{basis_sections, inner_product, BundlePoint, EquivariantFn, Model, Quadrature, SectionSpace};
use szego::numeric::loglog_slope;
use szego::report::{Check, Criterion};
use szego::scaling::{default_grid, diagonal_fit, scaling_report, RATIO_BAND};
use szego::statphase::{
    psi, psi_gradient, psi_hessian, stationary_phase_expansion, BundledAmplitude, HessianConvention,
};
use szego::symbolcalc::{
    ideal_sweep, ideal_torsion, nijenhuis, nijenhuis_from_j, nu_coefficients, nu_defects, AlmostComplexBall,
    Generators, IdealNormalization,
};
use szego::transversality::{
    build_lattice, decay_profile, donaldson_search, euler_char_defect, far_field_max, fit_decay_constant,
    genus_adjunction, peak_section, ChernData, DecayRow, GenusVariant, SearchParams, TwistData, DECAY_SLACK,
};
use szego::Complex64 as C;

/// Checks that are expected to fail, with the reason recorded alongside the
/// numbers in the decisions notes.
const KNOWN_GAPS: [&str; 2] = ["torus residual", "far field"];

fn is_gap(c: &Check) -> bool {
    KNOWN_GAPS.iter().any(|g| c.name.starts_with(g))
}

fn at_most(name: impl Into<String>, v: f64, bound: f64) -> Check {
    Check::new(name, v, Criterion::AtMost { bound })
}

fn at_least(name: impl Into<String>, v: f64, bound: f64) -> Check {
    Check::new(name, v, Criterion::AtLeast { bound })
}

fn within(name: impl Into<String>, v: f64, low: f64, high: f64) -> Check {
    Check::new(name, v, Criterion::Within { low, high })
}

fn spaces(model: &Model, levels: &[usize]) -> Vec<Box<dyn SectionSpace>> {
    levels.iter().map(|&n| basis_sections(model, n).unwrap()).collect()
}

fn refs(sp: &[Box<dyn SectionSpace>]) -> Vec<&dyn SectionSpace> {
    sp.iter().map(|s| s.as_ref()).collect()
}

const CENTER: C = C::new(0.4, 0.3);

fn universality() -> Vec<Check> {
    let mut out = Vec::new();
    for (model, label) in [(Model::ProjectiveLine, "projective line"), (Model::square_torus(), "torus")] {
        let sp = spaces(&model, &[64, 128, 256]);
        let chart = heisenberg_chart(&model, &BundlePoint::base(vec![CENTER])).unwrap();
        let rep = scaling_report(&refs(&sp), &chart, &default_grid(1, 2.0)).unwrap();
        for (i, r) in rep.ratios.iter().enumerate() {
            let name = format!("{label} residual ratio N={}->{}", rep.levels[i], rep.levels[i + 1]);
            out.push(within(name, *r, RATIO_BAND.0, RATIO_BAND.1));
        }
        let drops = rep.residuals.windows(2).filter(|w| w[1] < w[0]).count();
        out.push(Check::new(
            format!("{label} residual monotone steps"),
            drops as f64,
            Criterion::Near { target: (rep.residuals.len() - 1) as f64, tol: 0.0 },
        ));
    }
    out
}

fn diagonal_expansion() -> Vec<Check> {
    let mut out = Vec::new();
    for model in [Model::ProjectiveLine, Model::perturbed(0.1), Model::square_torus()] {
        let sp = spaces(&model, &[64, 128, 256]);
        let (a0, _) = diagonal_fit(&refs(&sp), &[CENTER]);
        out.push(at_most(format!("{} a0 relative error", model.id()), (a0 * PI - 1.0).abs(), 0.02));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for n in [1usize, 8, 64, 128, 256] {
        let s = basis_sections(&Model::ProjectiveLine, n).unwrap();
        for _ in 0..25 {
            let p = random_point(&Model::ProjectiveLine, &mut rng);
            worst = worst.max((s.diagonal(&p) - (n + 1) as f64 / PI).abs());
        }
    }
    out.push(at_most("projective line diagonal vs (N+1)/π", worst, 1e-10));
    out
}

fn tian() -> Vec<Check> {
    let mut out = Vec::new();
    let levels = [32usize, 64, 128];
    for model in [Model::perturbed(0.1), Model::ProjectiveLine] {
        let sp = spaces(&model, &levels);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<C>> = (0..8).map(|_| random_point(&model, &mut rng)).collect();
        let rep = tian_error(&refs(&sp), &pts).unwrap();
        match model {
            Model::ProjectiveLine => {
                let worst = rep.errors.iter().copied().fold(0.0, f64::max);
                out.push(at_most("projective line C0 error", worst, 1e-8));
            }
            _ => {
                let slope = loglog_slope(&levels.map(|n| n as f64), &rep.errors);
                out.push(within("perturbed log-log slope", slope, -1.5, -0.7));
            }
        }
    }
    out
}

fn kodaira() -> Vec<Check> {
    let mut out = Vec::new();
    for model in [Model::ProjectiveLine, Model::perturbed(0.1), Model::square_torus()] {
        for n in [16usize, 64] {
            let space = basis_sections(&model, n).unwrap();
            let pairs = sample_pairs(&model, n, 200, 1).unwrap();
            let r = injectivity_scan(space.as_ref(), &pairs);
            out.push(at_least(format!("{} pairs at N={n}", model.id()), r.pairs as f64, 200.0));
            out.push(at_most(format!("{} collisions at N={n}", model.id()), r.collisions as f64, 0.0));
        }
    }
    let ts: Vec<f64> = (0..21).map(|k| k as f64 / 20.0).collect();
    let v = [C::new(2.0, 0.0)];
    for model in [Model::ProjectiveLine, Model::square_torus()] {
        let chart = heisenberg_chart(&model, &BundlePoint::base(vec![CENTER])).unwrap();
        let mut cs = Vec::new();
        for n in [64usize, 256] {
            let space = basis_sections(&model, n).unwrap();
            let f = fn_profile(space.as_ref(), &chart, &v, &ts).unwrap();
            out.push(at_most(format!("{} |f_N(0) - 1| at N={n}", model.id()), (f[0] - 1.0).abs(), 1e-10));
            let excess = f.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x - 1.0));
            out.push(at_most(format!("{} max f_N - 1 at N={n}", model.id()), excess, 1e-12));
            cs.push(envelope_constant(&f, &ts, &v, n));
        }
        // Below the floor the profile is Gaussian to roundoff and the ratio is noise.
        if cs[0] > 1e-9 {
            out.push(within(format!("{} envelope constant ratio", model.id()), cs[1] / cs[0], 0.5, 1.5));
        } else {
            out.push(at_most(format!("{} envelope constant", model.id()), cs[1], 1e-9));
        }
    }
    out
}

fn peak_decay() -> Vec<Check> {
    let mut out = Vec::new();
    let eps = 0.2;
    let radii: Vec<f64> = (0..9).map(|k| k as f64 * 0.25).collect();
    for model in [Model::square_torus(), Model::ProjectiveLine] {
        let mut rows: Vec<(usize, Vec<DecayRow>)> = Vec::new();
        let mut last = None;
        for n in [64usize, 256] {
            let space = basis_sections(&model, n).unwrap();
            let lattice = build_lattice(&model, n, 1.0).unwrap();
            let r: Vec<DecayRow> = lattice
                .points
                .iter()
                .flat_map(|p| {
                    let pk = peak_section(space.as_ref(), p).unwrap();
                    decay_profile(space.as_ref(), &pk, &radii, eps, 0.0, false).unwrap()
                })
                .collect();
            rows.push((n, r));
            last = Some((space, lattice));
        }
        let c = fit_decay_constant(&rows[0].1, eps);
        for (n, r) in &rows {
            let bad = r
                .iter()
                .filter(|r| {
                    let (sn, d) = ((r.level as f64).sqrt(), r.d_n);
                    let lo = (1.0 - c * d / sn) * (-(1.0 + eps) * d * d / 2.0).exp();
                    let hi = (1.0 + c * d / sn) * (-(1.0 - eps) * d * d / 2.0).exp();
                    r.modulus < lo - DECAY_SLACK || r.modulus > hi + DECAY_SLACK
                })
                .count();
            out.push(at_most(format!("{} envelope violations at N={n} (C = {c:.3})", model.id()), bad as f64, 0.0));
        }
        let (space, lattice) = last.unwrap();
        let d_min = 256f64.powf(1.0 / 6.0);
        let far = lattice
            .points
            .iter()
            .take(4)
            .map(|p| far_field_max(space.as_ref(), &peak_section(space.as_ref(), p).unwrap(), d_min, 400, 1).unwrap())
            .fold(0.0, f64::max);
        out.push(at_most(format!("far field {} for d_N >= {d_min:.3} at N=256", model.id()), far, 1e-8));
    }
    out
}

fn transversality() -> Vec<Check> {
    let mut out = Vec::new();
    let model = Model::square_torus();
    let params = SearchParams { seed: 1, iterations: 500, ..SearchParams::default() };
    let mut etas = Vec::new();
    for n in [16usize, 36, 64] {
        let space = basis_sections(&model, n).unwrap();
        let lattice = build_lattice(&model, n, 1.0).unwrap();
        let (_, rep) = donaldson_search(space.as_ref(), &lattice, &params).unwrap();
        out.push(at_least(format!("eta at N={n}"), rep.eta, f64::MIN_POSITIVE));
        out.push(Check::new(
            format!("signed zero count at N={n}"),
            rep.signed_count as f64,
            Criterion::Near { target: n as f64, tol: 0.0 },
        ));
        etas.push(rep.eta);
    }
    let (lo, hi) = etas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    out.push(at_most("eta spread max/min", hi / lo, 3.0));
    out
}

fn genus() -> Vec<Check> {
    let mut out = vec![
        Check::new(
            "CP2, O(1), N=3",
            genus_adjunction(&ChernData::new(2, 1, 3), 3, GenusVariant::Surface).unwrap() as f64,
            Criterion::Near { target: 1.0, tol: 0.0 },
        ),
        Check::new(
            "CP3, O(1), N=1, codimension 2",
            genus_adjunction(&ChernData::new(3, 1, 4), 1, GenusVariant::Codimension).unwrap() as f64,
            Criterion::Near { target: 0.0, tol: 0.0 },
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0usize;
    for _ in 0..10 {
        let m: u32 = rng.random_range(2..5);
        let chern = ChernData::new(m, rng.random_range(1..20), rng.random_range(-20..20));
        let n: i64 = rng.random_range(1..8);
        // Trivial E: only the top pairings survive.
        let mm = m as usize;
        let mut l_terms = vec![0; mm];
        let mut m_terms = vec![0; mm];
        l_terms[mm - 1] = chern.c1l_m;
        m_terms[mm - 1] = chern.c1m_c1l;
        let twisted = ChernData {
            twist: Some(TwistData { rank: m - 1, l_terms, e_terms: vec![0; mm], m_terms }),
            ..chern.clone()
        };
        let codim = euler_char_defect(&chern, n, GenusVariant::Codimension).unwrap();
        if euler_char_defect(&twisted, n, GenusVariant::Twisted).unwrap() != codim {
            mismatches += 1;
        }
        if m == 2 && euler_char_defect(&chern, n, GenusVariant::Surface).unwrap() != codim {
            mismatches += 1;
        }
        // Split bundles on projective space, against the product of Chern roots.
        let a: i64 = rng.random_range(1..4);
        let b: Vec<i64> = (1..m).map(|_| rng.random_range(0..4)).collect();
        let roots: Vec<i128> = b.iter().map(|&bi| (bi + n * a) as i128).collect();
        let expected = (roots.iter().sum::<i128>() - m as i128 - 1) * roots.iter().product::<i128>();
        let split = ChernData::projective(m, a, &b).unwrap();
        if euler_char_defect(&split, n, GenusVariant::Twisted).unwrap() != expected {
            mismatches += 1;
        }
    }
    out.push(at_most("random consistency mismatches", mismatches as f64, 0.0));
    out
}

fn ideal_correction() -> Vec<Check> {
    let mut out = Vec::new();
    let ball = AlmostComplexBall::witness();
    let x: Vec<f64> = (0..4).map(|a| 0.05 * (a + 1) as f64 * if a % 2 == 0 { 1.0 } else { -0.7 }).collect();
    let deltas: Vec<f64> = (0..5).map(|k| 0.1 * 10f64.powf(-0.5 * k as f64)).collect();
    let second = ideal_sweep(&ball, &x, &deltas, Generators::Second(IdealNormalization::Half), 1).unwrap();
    let first = ideal_sweep(&ball, &x, &deltas, Generators::First, 1).unwrap();
    out.push(at_least("second generator slope", second.slope, 1.9));
    out.push(within("first generator slope", first.slope, 0.8, 1.2));
    for ball in [AlmostComplexBall::witness(), AlmostComplexBall::witness3()] {
        let m = ball.m;
        let x: Vec<f64> = (0..2 * m).map(|a| 0.05 * (a + 1) as f64 * if a % 2 == 0 { 1.0 } else { -0.7 }).collect();
        let n = nijenhuis(&ball, &x).unwrap();
        let (nj, leak) = nijenhuis_from_j(&ball, &x).unwrap();
        let mut route = 0.0f64;
        for p in 0..m {
            for j in 0..m {
                for k in 0..m {
                    route = route.max((n.get(p, j, k) - nj.get(p, j, k)).norm());
                }
            }
        }
        let t = ideal_torsion(&n, IdealNormalization::Half);
        let nd = nu_defects(&nu_coefficients(&t, 1.3).unwrap(), &t, 1.3);
        for (name, v) in [
            ("Nijenhuis two routes", route),
            ("Nijenhuis (1,0) leakage", leak),
            ("Nijenhuis antisymmetry", n.antisymmetry_defect()),
            ("Nijenhuis cyclic sum", n.cyclic_defect()),
            ("nu symmetry", nd.symmetry),
            ("nu cyclic sum", nd.cyclic),
            ("nu commutator", nd.commutator),
        ] {
            out.push(at_most(format!("{name}, m={m}"), v, 1e-8));
        }
    }
    out
}

fn diff5(f: impl Fn(f64) -> C, x: f64) -> C {
    let h = 1e-3;
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn stationary_phase() -> Vec<Check> {
    let mut out = Vec::new();
    let levels = [64usize, 128, 256];
    let xs = levels.map(|n| n as f64);
    for amp in BundledAmplitude::TEST_SET {
        let rs: Vec<_> = levels
            .iter()
            .map(|&n| {
                stationary_phase_expansion(&amp, n, 2, C::new(2.0 * PI, 0.0), HessianConvention::Definition).unwrap()
            })
            .collect();
        for j in 0..=2 {
            let errs: Vec<f64> = rs.iter().map(|r| r.errors[j]).collect();
            out.push(at_least(format!("{amp:?} order J={j}"), -loglog_slope(&xs, &errs), j as f64 + 0.7));
        }
    }
    let (mut dg, mut dh) = (0.0f64, 0.0f64);
    for (t, th) in [(1.0, 0.0), (0.7, 0.4), (1.6, -2.1), (2.3, 3.0), (0.2, 1.0)] {
        let (gt, gth) = psi_gradient(t, th);
        dg = dg.max((gt - diff5(|s| psi(s, th), t)).norm()).max((gth - diff5(|s| psi(t, s), th)).norm());
        let hs = psi_hessian(t, th);
        let num = [
            [diff5(|s| psi_gradient(s, th).0, t), diff5(|s| psi_gradient(t, s).0, th)],
            [diff5(|s| psi_gradient(s, th).1, t), diff5(|s| psi_gradient(t, s).1, th)],
        ];
        for a in 0..2 {
            for b in 0..2 {
                dh = dh.max((hs[(a, b)] - num[a][b]).norm());
            }
        }
    }
    out.push(at_most("phase gradient identity", dg, 1e-10));
    out.push(at_most("phase Hessian identity", dh, 1e-10));
    out
}

fn kernel_axioms() -> Vec<Check> {
    let mut out = Vec::new();
    let exact =
        [Model::ProjectiveLine, Model::square_torus(), Model::BargmannFock { m: 1 }, Model::BargmannFock { m: 2 }];
    for model in exact {
        let m = model.complex_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut herm, mut equi, mut repro) = (0.0f64, 0.0f64, 0.0f64);
        for n in [1usize, 4, 16, 32] {
            let space = basis_sections(&model, n).unwrap();
            let quad = Quadrature::for_level(&model, n);
            // Fock space is dilation invariant: keep points within a few units of 1/√N.
            let spread = match model {
                Model::BargmannFock { .. } => 0.6f64.min(1.2 / (n as f64).sqrt()),
                _ => 1.2,
            };
            let pts: Vec<BundlePoint> = (0..4)
                .map(|_| {
                    let z =
                        (0..m).map(|_| C::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread)));
                    BundlePoint::new(z.collect(), rng.random_range(-3.0..3.0))
                })
                .collect();
            let scale = (n as f64).powi(m as i32);
            for x in &pts {
                for y in &pts {
                    let k = space.kernel(x, y);
                    let d = space.diagonal(&x.pos).max(space.diagonal(&y.pos));
                    herm = herm.max((k - space.kernel(y, x).conj()).norm() / d);
                    let rot = 0.7;
                    equi =
                        equi.max((space.kernel(&x.rotate(rot), y) - C::from_polar(1.0, n as f64 * rot) * k).norm() / d);
                    let f1 = EquivariantFn::new(n, |w| space.kernel(w, y));
                    let f2 = EquivariantFn::new(n, |w| space.kernel(w, x));
                    repro = repro.max((inner_product(&f1, &f2, &quad).unwrap() - k).norm() / scale);
                }
            }
            if model.is_compact() {
                let total: f64 = quad.points.iter().zip(&quad.weights).map(|(p, w)| w * space.diagonal(p)).sum();
                let dim = space.dim() as f64;
                out.push(at_most(format!("{} dimension identity N={n}", model.id()), (total - dim).abs() / dim, 1e-6));
            }
        }
        out.push(at_most(format!("{} hermiticity", model.id()), herm, 1e-12));
        out.push(at_most(format!("{} equivariance", model.id()), equi, 1e-12));
        out.push(at_most(format!("{} reproducing property / N^m", model.id()), repro, 1e-6));
    }
    out
}

type Run = fn() -> Vec<Check>;

fn main() {
    let criteria: [(&str, Run); 10] = [
        ("universality", universality),
        ("diagonal expansion", diagonal_expansion),
        ("Tian", tian),
        ("Kodaira injectivity", kodaira),
        ("peak decay", peak_decay),
        ("transversality", transversality),
        ("genus arithmetic", genus),
        ("ideal correction", ideal_correction),
        ("stationary phase", stationary_phase),
        ("kernel axioms", kernel_axioms),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let checks = run();
        let pass = checks.iter().all(|c| c.pass);
        println!(
            "criterion {:>2} {:<20} {}  ({} checks, {:.1}s)",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            checks.len(),
            start.elapsed().as_secs_f64()
        );
        for c in checks.iter().filter(|c| !c.pass) {
            let tag = if is_gap(c) { "known gap" } else { "unexpected" };
            println!("    {tag}: {} = {:.6e}, required {:?}", c.name, c.value, c.criterion);
            if !is_gap(c) {
                unexpected.push(format!("criterion {}: {}", i + 1, c.name));
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
