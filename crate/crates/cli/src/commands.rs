//! The subcommands. Each returns a payload, its checks and CSV tables; the
//! driver in `lib.rs` wraps them into a report.

use std::time::Instant;

use num_complex::Complex64 as C;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use szego::geometry::heisenberg_chart;
use szego::kodaira::{
    envelope_constant, fn_profile, injectivity_scan, projective_angle, random_point, sample_pairs, tian_error,
};
use szego::models::{
    basis_sections, heisenberg_model_kernel, BundlePoint, Model, ProjectiveSpace, SectionSpace, PERTURBED_GRAM_TOL,
};
use szego::numeric::loglog_slope;
use szego::report::{Check, Criterion};
use szego::scaling::{default_grid, diagonal_fit, rescaled_kernel, scaling_report};
use szego::statphase::{
    gamma_from_hessian, psi, psi_gradient, psi_hessian, stationary_phase_expansion, BundledAmplitude, HessianConvention,
};
use szego::symbolcalc::{
    ideal_sweep, ideal_torsion, nijenhuis, nijenhuis_from_j, nu_coefficients, nu_defects, phase_psi, poisson_bracket,
    AlmostComplexBall, CotangentPoint, GeneratorSymbol, Generators, IdealNormalization,
};
use szego::transversality::{
    build_lattice, decay_profile, donaldson_search, far_field_max, fit_decay_constant, genus_adjunction, peak_section,
    zero_locate, ChernData, DecayRow, GenusVariant, LevelSection, ScanDensity, SearchParams, DECAY_SLACK,
};
use szego::Error;

use crate::cache::{Cache, CacheKey};
use crate::config::{parse_ball, parse_model, ConfigError, Defaults, GridSpec, RunConfig};
use crate::report::{num, Table, Timings};

/// Why a subcommand stopped.
#[derive(Debug)]
pub enum CmdError {
    Config(ConfigError),
    Compute(Error),
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Config(e)
    }
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(m) | Error::Unsupported(m) => CmdError::Config(ConfigError(m)),
            e => CmdError::Compute(e),
        }
    }
}

type CmdResult = Result<Outcome, CmdError>;

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub payload: serde_json::Value,
    pub checks: Vec<Check>,
    pub tables: Vec<(String, Table)>,
    /// Replaces the check listing on stdout when set.
    pub stdout: Option<String>,
}

/// Shared state of one invocation.
pub struct Ctx {
    pub cfg: RunConfig,
    pub cache: Cache,
    pub timings: Timings,
    pub cache_hits: usize,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> Self {
        let cache = Cache::new(cfg.cache_dir.clone());
        Ctx { cfg, cache, timings: Timings::default(), cache_hits: 0 }
    }

    fn phase(&mut self, name: impl Into<String>, start: Instant) {
        self.timings.phases.insert(name.into(), start.elapsed().as_secs_f64());
    }

    fn model(&self) -> Result<Model, ConfigError> {
        parse_model(&self.cfg.model)
    }
}

/// Grid specification hashed into the cache key of perturbed tables.
pub fn gram_grid_spec() -> String {
    format!("perturbed-gram:v1:start=(N+48,2N+64):growth=3/2:tol={PERTURBED_GRAM_TOL:e}")
}

/// Section space at one level; perturbed Gram factors go through the cache.
pub fn section_space(ctx: &mut Ctx, model: &Model, n: usize) -> Result<Box<dyn SectionSpace>, CmdError> {
    let start = Instant::now();
    let space: Box<dyn SectionSpace> = match model {
        Model::PerturbedProjectiveLine { .. } => {
            let key = CacheKey::new(model.id(), n, &gram_grid_spec());
            let (table, hit) = ctx.cache.get_or_compute(
                &key,
                || {
                    ProjectiveSpace::perturbed(model, n, None)
                        .map(|s| s.table().expect("perturbed spaces carry a table"))
                },
                |w| eprintln!("warning: {w}"),
            )?;
            ctx.cache_hits += hit as usize;
            Box::new(ProjectiveSpace::perturbed(model, n, Some(&table))?)
        }
        _ => basis_sections(model, n)?,
    };
    ctx.phase(format!("basis N={n}"), start);
    Ok(space)
}

fn section_spaces(ctx: &mut Ctx, model: &Model) -> Result<Vec<Box<dyn SectionSpace>>, CmdError> {
    let levels = ctx.cfg.levels.clone();
    levels.iter().map(|&n| section_space(ctx, model, n)).collect()
}

fn refs(spaces: &[Box<dyn SectionSpace>]) -> Vec<&dyn SectionSpace> {
    spaces.iter().map(|s| s.as_ref()).collect()
}

/// Chart centre used by the near-diagonal commands.
pub fn default_center(model: &Model) -> Vec<C> {
    match model {
        Model::BargmannFock { m } => vec![C::new(0.0, 0.0); *m],
        _ => vec![C::new(0.4, 0.3)],
    }
}

fn fmt_point(p: &[C]) -> String {
    p.iter().map(|z| format!("{:?}{:+?}i", z.re, z.im)).collect::<Vec<_>>().join(";")
}

fn to_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report values serialize")
}

const fn grid(radius: f64, samples: usize, steps: usize) -> GridSpec {
    GridSpec { radius, samples, steps }
}

// ---------------------------------------------------------------------------
// scaling

pub const SCALING: Defaults = Defaults {
    model: "torus",
    levels: &[64, 128, 256],
    grid: grid(2.0, 0, 0),
    tolerances: &[("ratio_low", 0.3), ("ratio_high", 0.85), ("a0_rel", 0.02)],
};

pub fn scaling(ctx: &mut Ctx) -> CmdResult {
    let model = ctx.model()?;
    let spaces = section_spaces(ctx, &model)?;
    let center = default_center(&model);
    let chart = heisenberg_chart(&model, &BundlePoint::base(center.clone()))?;
    let pts = default_grid(model.complex_dim(), ctx.cfg.grid.radius);
    let start = Instant::now();
    let mut report = scaling_report(&refs(&spaces), &chart, &pts)?;
    let mut table = Table::new(&["level", "u", "v", "theta", "phi", "residual"]);
    for s in &spaces {
        for g in &pts {
            let r = rescaled_kernel(s.as_ref(), &chart, &g.u, &g.v, g.theta, g.phi)?;
            let res = (r - heisenberg_model_kernel(&g.u, g.theta, &g.v, g.phi)).norm();
            table.push(vec![
                s.level().to_string(),
                fmt_point(&g.u),
                fmt_point(&g.v),
                num(g.theta),
                num(g.phi),
                num(res),
            ]);
        }
    }
    ctx.phase("residuals", start);
    let (lo, hi) = (ctx.cfg.tol("ratio_low"), ctx.cfg.tol("ratio_high"));
    report.checks = report
        .ratios
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Check::new(
                format!("residual ratio N={}->{}", report.levels[i], report.levels[i + 1]),
                *r,
                Criterion::Within { low: lo, high: hi },
            )
        })
        .collect();
    let mut checks = report.checks.clone();
    let m = model.complex_dim() as i32;
    let target = std::f64::consts::PI.powi(-m);
    let (a0, a1) = diagonal_fit(&refs(&spaces), &center);
    checks.push(Check::new(
        "diagonal a0 relative error",
        (a0 - target).abs() / target,
        Criterion::AtMost { bound: ctx.cfg.tol("a0_rel") },
    ));
    Ok(Outcome {
        payload: json!({ "scaling": report, "diagonal": { "center": center, "a0": a0, "a1": a1, "a0_target": target } }),
        checks,
        tables: vec![("scaling".into(), table)],
        stdout: None,
    })
}

// ---------------------------------------------------------------------------
// tian

pub const TIAN: Defaults = Defaults {
    model: "perturbed",
    levels: &[32, 64, 128],
    grid: grid(1.0, 8, 0),
    tolerances: &[("exact_bound", 1e-8), ("slope_low", -1.5), ("slope_high", -0.7), ("torus_factor", 1.0)],
};

pub fn tian(ctx: &mut Ctx) -> CmdResult {
    let model = ctx.model()?;
    let spaces = section_spaces(ctx, &model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
    let points: Vec<Vec<C>> = (0..ctx.cfg.grid.samples.max(1)).map(|_| random_point(&model, &mut rng)).collect();
    let start = Instant::now();
    let report = tian_error(&refs(&spaces), &points)?;
    ctx.phase("pullbacks", start);
    let mut checks = Vec::new();
    match model {
        Model::PerturbedProjectiveLine { .. } => checks.push(Check::new(
            "log-log slope of the C0 error",
            report.fitted_order.unwrap_or(f64::INFINITY).min(f64::MAX),
            Criterion::Within { low: ctx.cfg.tol("slope_low"), high: ctx.cfg.tol("slope_high") },
        )),
        Model::Torus { .. } => {
            for (n, e) in report.levels.iter().zip(&report.errors) {
                checks.push(Check::new(
                    format!("C0 error at N={n}"),
                    *e,
                    Criterion::AtMost { bound: ctx.cfg.tol("torus_factor") / *n as f64 },
                ));
            }
        }
        _ => {
            for (n, e) in report.levels.iter().zip(&report.errors) {
                checks.push(Check::new(
                    format!("C0 error at N={n}"),
                    *e,
                    Criterion::AtMost { bound: ctx.cfg.tol("exact_bound") },
                ));
            }
        }
    }
    let mut table = Table::new(&["level", "point", "error"]);
    for s in &report.samples {
        table.push(vec![s.level.to_string(), fmt_point(&s.point), num(s.error)]);
    }
    Ok(Outcome { payload: to_value(&report), checks, tables: vec![("tian".into(), table)], stdout: None })
}

// ---------------------------------------------------------------------------
// kodaira-injectivity

pub const INJECTIVITY: Defaults =
    Defaults { model: "torus", levels: &[16, 64], grid: grid(1.0, 200, 0), tolerances: &[("collisions", 0.0)] };

pub fn injectivity(ctx: &mut Ctx) -> CmdResult {
    let model = ctx.model()?;
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    let mut table = Table::new(&["level", "pairs", "collisions", "min_angle"]);
    for n in ctx.cfg.levels.clone() {
        let space = section_space(ctx, &model, n)?;
        let pairs = sample_pairs(&model, n, ctx.cfg.grid.samples, ctx.cfg.seed)?;
        let r = injectivity_scan(space.as_ref(), &pairs);
        checks.push(Check::new(
            format!("projective collisions at N={n}"),
            r.collisions as f64,
            Criterion::AtMost { bound: ctx.cfg.tol("collisions") },
        ));
        table.push(vec![n.to_string(), r.pairs.to_string(), r.collisions.to_string(), num(r.min_angle)]);
        reports.push(r);
    }
    Ok(Outcome {
        payload: json!({ "model": model.id(), "scans": reports }),
        checks,
        tables: vec![("kodaira-injectivity".into(), table)],
        stdout: None,
    })
}

// ---------------------------------------------------------------------------
// fn-profile

pub const FN_PROFILE: Defaults = Defaults {
    model: "projective-line",
    levels: &[64, 256],
    grid: grid(2.0, 0, 21),
    tolerances: &[("origin", 1e-10), ("excess", 1e-12), ("stability", 0.5), ("envelope_floor", 1e-9)],
};

pub fn profile(ctx: &mut Ctx) -> CmdResult {
    let model = ctx.model()?;
    let center = default_center(&model);
    let chart = heisenberg_chart(&model, &BundlePoint::base(center.clone()))?;
    let mut v = vec![C::new(0.0, 0.0); model.complex_dim()];
    v[0] = C::new(ctx.cfg.grid.radius, 0.0);
    let steps = ctx.cfg.grid.steps.max(2);
    let ts: Vec<f64> = (0..steps).map(|k| k as f64 / (steps - 1) as f64).collect();
    let mut table = Table::new(&["level", "t", "f", "gaussian"]);
    let mut checks = Vec::new();
    let mut profiles = Vec::new();
    let mut first_c: Option<f64> = None;
    let floor = ctx.cfg.tol("envelope_floor");
    for n in ctx.cfg.levels.clone() {
        let space = section_space(ctx, &model, n)?;
        let f = fn_profile(space.as_ref(), &chart, &v, &ts)?;
        let c = envelope_constant(&f, &ts, &v, n);
        checks.push(Check::new(
            format!("|f_N(0) - 1| at N={n}"),
            (f[0] - 1.0).abs(),
            Criterion::AtMost { bound: ctx.cfg.tol("origin") },
        ));
        let excess = f.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x - 1.0));
        checks.push(Check::new(
            format!("max f_N - 1 at N={n}"),
            excess,
            Criterion::AtMost { bound: ctx.cfg.tol("excess") },
        ));
        match first_c {
            None => first_c = Some(c),
            Some(c0) if c0 > floor => {
                let s = ctx.cfg.tol("stability");
                checks.push(Check::new(
                    format!("envelope constant ratio at N={n}"),
                    c / c0,
                    Criterion::Within { low: 1.0 - s, high: 1.0 + s },
                ));
            }
            Some(_) => checks.push(Check::new(
                format!("envelope constant at N={n} (below floor)"),
                c,
                Criterion::AtMost { bound: floor },
            )),
        }
        let v2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        for (t, x) in ts.iter().zip(&f) {
            table.push(vec![n.to_string(), num(*t), num(*x), num((-v2 * t * t).exp())]);
        }
        profiles.push(json!({ "level": n, "t": ts, "f": f, "envelope_constant": c }));
    }
    Ok(Outcome {
        payload: json!({ "model": model.id(), "center": center, "direction": v, "profiles": profiles }),
        checks,
        tables: vec![("fn-profile".into(), table)],
        stdout: None,
    })
}

// ---------------------------------------------------------------------------
// peak-decay

/// Lattice spacing constant `D` for `peak-decay` and `transversality`.
pub const LATTICE_D: f64 = 1.0;
/// Lattice centres probed for the far field.
pub const FAR_FIELD_CENTERS: usize = 4;

pub const PEAK_DECAY: Defaults = Defaults {
    model: "torus",
    levels: &[64, 256],
    grid: grid(2.0, 400, 9),
    tolerances: &[("eps", 0.2), ("far_field", 1e-8)],
};

/// Envelope bounds of a row for a given constant.
fn rebound(r: &DecayRow, c: f64, eps: f64) -> (f64, f64) {
    let sn = (r.level as f64).sqrt();
    let d = r.d_n;
    ((1.0 - c * d / sn) * (-(1.0 + eps) * d * d / 2.0).exp(), (1.0 + c * d / sn) * (-(1.0 - eps) * d * d / 2.0).exp())
}

pub fn peak_decay(ctx: &mut Ctx) -> CmdResult {
    let model = ctx.model()?;
    let eps = ctx.cfg.tol("eps");
    let steps = ctx.cfg.grid.steps.max(2);
    let radii: Vec<f64> = (0..steps).map(|k| ctx.cfg.grid.radius * k as f64 / (steps - 1) as f64).collect();
    let mut rows_by_level: Vec<(usize, usize, Vec<DecayRow>)> = Vec::new();
    let mut last = None;
    for n in ctx.cfg.levels.clone() {
        let space = section_space(ctx, &model, n)?;
        let start = Instant::now();
        let lattice = build_lattice(&model, n, LATTICE_D)?;
        let mut rows = Vec::new();
        for p in &lattice.points {
            let peak = peak_section(space.as_ref(), p)?;
            rows.extend(decay_profile(space.as_ref(), &peak, &radii, eps, 0.0, false)?);
        }
        ctx.phase(format!("decay N={n}"), start);
        rows_by_level.push((n, lattice.points.len(), rows));
        last = Some((space, lattice));
    }
    // The constant is fitted on the first level and held fixed for the rest.
    let c = fit_decay_constant(&rows_by_level[0].2, eps);
    let mut checks = Vec::new();
    let mut table = Table::new(&["level", "center", "point", "d_n", "modulus", "lower", "upper"]);
    let mut summary = Vec::new();
    for (n, centers, rows) in &rows_by_level {
        let mut violations = 0usize;
        for r in rows {
            let (lo, hi) = rebound(r, c, eps);
            if r.modulus < lo - DECAY_SLACK || r.modulus > hi + DECAY_SLACK {
                violations += 1;
            }
            table.push(vec![
                n.to_string(),
                fmt_point(&r.center),
                fmt_point(&r.point),
                num(r.d_n),
                num(r.modulus),
                num(lo),
                num(hi),
            ]);
        }
        checks.push(Check::new(
            format!("decay envelope violations at N={n}"),
            violations as f64,
            Criterion::AtMost { bound: 0.0 },
        ));
        summary.push(json!({ "level": n, "centers": centers, "rows": rows.len(), "violations": violations }));
    }
    let (space, lattice) = last.expect("at least one level");
    let n = space.level() as f64;
    let d_min = n.powf(1.0 / 6.0);
    let start = Instant::now();
    let mut far = 0.0f64;
    for p in lattice.points.iter().take(FAR_FIELD_CENTERS) {
        let peak = peak_section(space.as_ref(), p)?;
        far = far.max(far_field_max(space.as_ref(), &peak, d_min, ctx.cfg.grid.samples, ctx.cfg.seed)?);
    }
    ctx.phase("far field", start);
    checks.push(Check::new(
        format!("far field max |sigma| for d_N >= {d_min:.4} at N={n}"),
        far,
        Criterion::AtMost { bound: ctx.cfg.tol("far_field") },
    ));
    Ok(Outcome {
        payload: json!({
            "model": model.id(),
            "eps": eps,
            "lattice_d": LATTICE_D,
            "fitted_c": c,
            "fitted_on_level": rows_by_level[0].0,
            "levels": summary,
            "far_field": { "level": space.level(), "d_min": d_min, "max": far, "gaussian_at_d_min": (-d_min * d_min / 2.0).exp() },
        }),
        checks,
        tables: vec![("peak-decay".into(), table)],
        stdout: None,
    })
}

// ---------------------------------------------------------------------------
// transversality

pub const TRANSVERSALITY: Defaults = Defaults {
    model: "torus",
    levels: &[16, 36, 64],
    grid: grid(1.0, 500, 0),
    tolerances: &[("eta_min", 1e-12), ("eta_ratio", 3.0)],
};

pub fn transversality(ctx: &mut Ctx) -> CmdResult {
    let model = ctx.model()?;
    let params = SearchParams { seed: ctx.cfg.seed, iterations: ctx.cfg.grid.samples, ..SearchParams::default() };
    let mut reports = Vec::new();
    let mut checks = Vec::new();
    let mut table = Table::new(&["level", "iteration", "best_eta"]);
    for n in ctx.cfg.levels.clone() {
        let space = section_space(ctx, &model, n)?;
        let start = Instant::now();
        let lattice = build_lattice(&model, n, LATTICE_D)?;
        let (_, rep) = donaldson_search(space.as_ref(), &lattice, &params)?;
        ctx.phase(format!("search N={n}"), start);
        checks.push(Check::new(format!("eta at N={n}"), rep.eta, Criterion::AtLeast { bound: ctx.cfg.tol("eta_min") }));
        checks.push(Check::new(
            format!("signed zero count at N={n}"),
            rep.signed_count as f64,
            Criterion::Near { target: rep.expected_count as f64, tol: 0.0 },
        ));
        for (i, e) in rep.best_eta_trace.iter().enumerate() {
            table.push(vec![n.to_string(), i.to_string(), num(*e)]);
        }
        reports.push(rep);
    }
    let etas: Vec<f64> = reports.iter().map(|r| r.eta).collect();
    let (lo, hi) = etas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &e| (a.min(e), b.max(e)));
    let spread = if lo > 0.0 { hi / lo } else { f64::MAX };
    checks.push(Check::new(
        "best eta spread across N (max/min)",
        spread,
        Criterion::AtMost { bound: ctx.cfg.tol("eta_ratio") },
    ));
    Ok(Outcome {
        payload: json!({ "model": model.id(), "lattice_d": LATTICE_D, "params": params, "searches": reports }),
        checks,
        tables: vec![("transversality".into(), table)],
        stdout: None,
    })
}

// ---------------------------------------------------------------------------
// zeros

pub const ZEROS: Defaults = Defaults { model: "torus", levels: &[8], grid: grid(1.0, 0, 0), tolerances: &[] };

/// A section with independent uniform coefficients in the unit square.
pub fn random_section(n: usize, dim: usize, seed: u64) -> LevelSection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    LevelSection::new(n, (0..dim).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
}

pub fn zeros(ctx: &mut Ctx) -> CmdResult {
    let model = ctx.model()?;
    let mut sets = Vec::new();
    let mut checks = Vec::new();
    let mut table = Table::new(&["level", "w_re", "w_im", "index", "del_norm", "polished"]);
    for n in ctx.cfg.levels.clone() {
        let space = section_space(ctx, &model, n)?;
        let s = random_section(n, space.dim(), ctx.cfg.seed);
        let z = zero_locate(space.as_ref(), &s, ScanDensity::default())?;
        checks.push(Check::new(
            format!("signed zero count at N={n}"),
            z.signed_count as f64,
            Criterion::Near { target: z.expected as f64, tol: 0.0 },
        ));
        checks.push(Check::new(
            format!("scan reliable at N={n}"),
            z.reliable as u8 as f64,
            Criterion::Near { target: 1.0, tol: 0.0 },
        ));
        for zero in &z.zeros {
            table.push(vec![
                n.to_string(),
                num(zero.w.re),
                num(zero.w.im),
                zero.index.to_string(),
                num(zero.del_norm),
                zero.polished.to_string(),
            ]);
        }
        sets.push(z);
    }
    Ok(Outcome {
        payload: json!({ "model": model.id(), "zero_sets": sets }),
        checks,
        tables: vec![("zeros".into(), table)],
        stdout: None,
    })
}

// ---------------------------------------------------------------------------
// genus

pub const GENUS: Defaults = Defaults { model: "none", levels: &[1], grid: grid(1.0, 0, 0), tolerances: &[] };

pub fn genus(ctx: &mut Ctx, chern: &ChernData, variant: GenusVariant) -> CmdResult {
    let mut lines = Vec::new();
    let mut results = Vec::new();
    let mut checks = Vec::new();
    for n in ctx.cfg.levels.clone() {
        let g = genus_adjunction(chern, n as i64, variant).map_err(|e| CmdError::Config(ConfigError(e.to_string())))?;
        lines.push(g.to_string());
        results.push(json!({ "level": n, "genus": g }));
        if variant == GenusVariant::Surface {
            // For surfaces the codimension formula specializes to the same number.
            let other = genus_adjunction(chern, n as i64, GenusVariant::Codimension)?;
            checks.push(Check::new(
                format!("surface vs codimension formula at N={n}"),
                (g - other) as f64,
                Criterion::Near { target: 0.0, tol: 0.0 },
            ));
        }
    }
    Ok(Outcome {
        payload: json!({ "chern": chern, "variant": variant, "genera": results }),
        checks,
        tables: Vec::new(),
        stdout: Some(lines.join("\n")),
    })
}

// ---------------------------------------------------------------------------
// ideal-check

pub const IDEAL: Defaults = Defaults {
    model: "witness",
    levels: &[1],
    grid: grid(1.0, 0, 5),
    tolerances: &[("first_low", 0.8), ("first_high", 1.2), ("second_min", 1.9), ("identity", 1e-8)],
};

/// Base point of the ideal sweep: small, inside every bundled ball.
pub fn ideal_point(ball: &AlmostComplexBall) -> Vec<f64> {
    (0..2 * ball.m).map(|a| 0.05 * (a + 1) as f64 * if a % 2 == 0 { 1.0 } else { -0.7 }).collect()
}

pub fn ideal_check(ctx: &mut Ctx) -> CmdResult {
    let ball = parse_ball(&ctx.cfg.model)?;
    let x = ideal_point(&ball);
    let deltas: Vec<f64> = (0..ctx.cfg.grid.steps.max(2)).map(|k| 0.1 * 10f64.powf(-0.5 * k as f64)).collect();
    let tol = ctx.cfg.tol("identity");
    let start = Instant::now();
    let n = nijenhuis(&ball, &x)?;
    let (nj, leak) = nijenhuis_from_j(&ball, &x)?;
    let route = (0..ball.m)
        .flat_map(|p| (0..ball.m).flat_map(move |j| (0..ball.m).map(move |k| (p, j, k))))
        .map(|(p, j, k)| (n.get(p, j, k) - nj.get(p, j, k)).norm())
        .fold(0.0, f64::max);
    let p_theta = 1.3;
    let t = ideal_torsion(&n, IdealNormalization::Half);
    let nu = nu_coefficients(&t, p_theta)?;
    let nd = nu_defects(&nu, &t, p_theta);
    ctx.phase("identities", start);
    let mut checks = vec![
        Check::new("Nijenhuis frame route vs J route", route, Criterion::AtMost { bound: tol }),
        Check::new("Nijenhuis (1,0) leakage", leak, Criterion::AtMost { bound: tol }),
        Check::new("Nijenhuis antisymmetry", n.antisymmetry_defect(), Criterion::AtMost { bound: tol }),
        Check::new("Nijenhuis cyclic sum", n.cyclic_defect(), Criterion::AtMost { bound: tol }),
        Check::new("nu symmetry", nd.symmetry, Criterion::AtMost { bound: tol }),
        Check::new("nu cyclic sum", nd.cyclic, Criterion::AtMost { bound: tol }),
        Check::new("nu commutator", nd.commutator, Criterion::AtMost { bound: tol }),
    ];
    let start = Instant::now();
    let seed = ctx.cfg.seed;
    let first = ideal_sweep(&ball, &x, &deltas, Generators::First, seed)?;
    let second = ideal_sweep(&ball, &x, &deltas, Generators::Second(IdealNormalization::Half), seed)?;
    let full = ideal_sweep(&ball, &x, &deltas, Generators::Second(IdealNormalization::Full), seed)?;
    ctx.phase("sweeps", start);
    checks.push(Check::new(
        "first generator slope",
        first.slope,
        Criterion::Within { low: ctx.cfg.tol("first_low"), high: ctx.cfg.tol("first_high") },
    ));
    checks.push(Check::new(
        "second generator slope",
        second.slope,
        Criterion::AtLeast { bound: ctx.cfg.tol("second_min") },
    ));
    let mut table = Table::new(&["delta", "first", "second", "second_full"]);
    for i in 0..deltas.len() {
        table.push(vec![
            num(deltas[i]),
            num(first.residuals[i].residual),
            num(second.residuals[i].residual),
            num(full.residuals[i].residual),
        ]);
    }
    let csv = table.to_csv();
    Ok(Outcome {
        payload: json!({
            "m": ball.m,
            "point": x,
            "integrable": ball.is_integrable_by_construction(),
            "nu_defects": nd,
            "sweeps": { "first": first, "second": second, "second_full": full },
        }),
        checks,
        tables: vec![("ideal-check".into(), table)],
        stdout: Some(csv.trim_end().to_string()),
    })
}

// ---------------------------------------------------------------------------
// statphase

pub const STATPHASE: Defaults = Defaults {
    model: "none",
    levels: &[64, 128, 256],
    grid: grid(1.0, 0, 2),
    tolerances: &[("order_margin", 0.7), ("identity", 1e-10)],
};

/// Five-point central difference.
fn diff5(f: impl Fn(f64) -> C, x: f64, h: f64) -> C {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Largest deviation of the analytic gradient and Hessian of the phase from
/// finite differences over a few sample points.
pub fn phase_identity_defects() -> (f64, f64) {
    let h = 1e-3;
    let pts = [(1.0, 0.0), (0.7, 0.4), (1.6, -2.1), (2.3, 3.0)];
    let mut dg = 0.0f64;
    let mut dh = 0.0f64;
    for (t, th) in pts {
        let (gt, gth) = psi_gradient(t, th);
        dg = dg.max((gt - diff5(|s| psi(s, th), t, h)).norm()).max((gth - diff5(|s| psi(t, s), th, h)).norm());
        let hs = psi_hessian(t, th);
        let num_h = [
            [diff5(|s| psi_gradient(s, th).0, t, h), diff5(|s| psi_gradient(t, s).0, th, h)],
            [diff5(|s| psi_gradient(s, th).1, t, h), diff5(|s| psi_gradient(t, s).1, th, h)],
        ];
        for a in 0..2 {
            for b in 0..2 {
                dh = dh.max((hs[(a, b)] - num_h[a][b]).norm());
            }
        }
    }
    (dg, dh)
}

pub fn statphase(ctx: &mut Ctx) -> CmdResult {
    let jmax = ctx.cfg.grid.steps;
    let levels = ctx.cfg.levels.clone();
    if levels.len() < 2 {
        return Err(CmdError::Config(ConfigError("statphase needs at least two levels".into())));
    }
    let gamma = gamma_from_hessian();
    let mut results = Vec::new();
    let mut checks = Vec::new();
    let mut table = Table::new(&["amplitude", "level", "J", "error", "remainder_scale"]);
    let xs: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    for amp in BundledAmplitude::TEST_SET {
        let start = Instant::now();
        let rs: Vec<_> = levels
            .iter()
            .map(|&n| stationary_phase_expansion(&amp, n, jmax, gamma, HessianConvention::Definition))
            .collect::<Result<_, _>>()?;
        ctx.phase(format!("{amp:?}"), start);
        for j in 0..=jmax {
            let errs: Vec<f64> = rs.iter().map(|r| r.errors[j]).collect();
            let order = -loglog_slope(&xs, &errs);
            checks.push(Check::new(
                format!("{amp:?} error order, J={j}"),
                order,
                Criterion::AtLeast { bound: j as f64 + ctx.cfg.tol("order_margin") },
            ));
            for r in &rs {
                table.push(vec![
                    format!("{amp:?}"),
                    r.level.to_string(),
                    j.to_string(),
                    num(r.errors[j]),
                    num(r.remainder_scale[j]),
                ]);
            }
        }
        results.push(rs);
    }
    let (dg, dh) = phase_identity_defects();
    let crit = psi_gradient(1.0, 0.0);
    let tol = ctx.cfg.tol("identity");
    checks.push(Check::new(
        "phase gradient at the critical point",
        crit.0.norm().max(crit.1.norm()),
        Criterion::AtMost { bound: tol },
    ));
    checks.push(Check::new("phase gradient vs differences", dg, Criterion::AtMost { bound: tol }));
    checks.push(Check::new("phase Hessian vs differences", dh, Criterion::AtMost { bound: tol }));
    Ok(Outcome {
        payload: json!({ "gamma": gamma, "jmax": jmax, "results": results }),
        checks,
        tables: vec![("statphase".into(), table)],
        stdout: None,
    })
}

// ---------------------------------------------------------------------------
// selftest

pub const SELFTEST: Defaults = Defaults { model: "none", levels: &[1], grid: grid(1.0, 0, 0), tolerances: &[] };

/// Fast identities that hold by construction.
pub fn selftest(ctx: &mut Ctx) -> CmdResult {
    let mut checks = Vec::new();
    let at_most = |b: f64| Criterion::AtMost { bound: b };

    let g = genus_adjunction(&ChernData::new(2, 1, 3), 3, GenusVariant::Surface)?;
    checks.push(Check::new("plane cubic genus", g as f64, Criterion::Near { target: 1.0, tol: 0.0 }));

    let fs = basis_sections(&Model::ProjectiveLine, 4)?;
    let x = BundlePoint::new(vec![C::new(0.3, -0.2)], 0.4);
    let y = BundlePoint::new(vec![C::new(-0.5, 0.1)], -1.1);
    let herm = (fs.kernel(&x, &y) - fs.kernel(&y, &x).conj()).norm();
    checks.push(Check::new("kernel hermiticity", herm, at_most(1e-12)));
    let rot = (fs.kernel(&x.rotate(0.7), &y) - C::from_polar(1.0, 4.0 * 0.7) * fs.kernel(&x, &y)).norm();
    checks.push(Check::new("kernel equivariance", rot, at_most(1e-12)));

    let lift = fs.lift(&x.pos);
    checks.push(Check::new("projective distance of a point to itself", projective_angle(&lift, &lift), at_most(1e-7)));

    let torus = basis_sections(&Model::square_torus(), 6)?;
    let p = vec![C::new(0.3, 0.6)];
    let peak = peak_section(torus.as_ref(), &p)?;
    checks.push(Check::new(
        "peak section at its centre",
        (peak.section.value(torus.as_ref(), &p) - 1.0).norm(),
        at_most(1e-12),
    ));

    let bf = Model::BargmannFock { m: 1 };
    checks.push(Check::new("phase vanishes on the diagonal", phase_psi(&bf, &x, &x)?.norm(), at_most(1e-14)));

    let flat = AlmostComplexBall::standard(2);
    checks.push(Check::new(
        "flat structure is integrable",
        nijenhuis(&flat, &[0.1, 0.2, -0.1, 0.05])?.max_abs(),
        at_most(1e-10),
    ));

    let ball = AlmostComplexBall::witness();
    let pt = CotangentPoint::on_cone(&ball, &[0.05, -0.035, 0.15, -0.14], 1.3);
    let z = GeneratorSymbol { ball: &ball, generators: Generators::First, index: 0, conjugate: false };
    checks.push(Check::new("bracket of a symbol with itself", poisson_bracket(&z, &z, &pt)?.norm(), at_most(1e-12)));

    let dir = tempfile::tempdir().map_err(|e| CmdError::Compute(Error::NotConverged(e.to_string())))?;
    let cache = Cache::new(dir.path());
    let key = CacheKey::new("selftest", 1, "grid");
    let table = vec![0.25f64, -1.0e-300, 3.5];
    let stored = cache.store(&key, &table).is_ok();
    let hit = matches!(cache.lookup::<Vec<f64>>(&key), crate::cache::Lookup::Hit(ref t) if *t == table);
    checks.push(Check::new(
        "cache store then lookup",
        (stored && hit) as u8 as f64,
        Criterion::Near { target: 1.0, tol: 0.0 },
    ));
    let _ = ctx;
    Ok(Outcome { payload: json!({ "checks_run": checks.len() }), checks, tables: Vec::new(), stdout: None })
}
