use anyhow::Result;
use magicfn::analysis::{
    convergence_grid, default_grid, fprime_check, match_roots, mellin_symmetry_check, mellin_value, ratio_formula,
    root_atlas, taylor_coefficients, RootAtlas,
};
use magicfn::eigensingle::{
    build_single, build_single_leech, closed_form_u, default_ratio_samples, extra_root_deviation, extra_root_discriminant, extra_root_variant, ExtraRootForm,
    imaginary_roots, ratio_deviation, single_atlas, EigenSingle,
};
use magicfn::energy::{build_h, energy_slope_discrepancy, duality_transform, validate_energy_signs};
use magicfn::lattice::{LatticeKind, LatticeSpec};
use magicfn::magic::{density_bound_with, RadialPair, Side, SignCheck};
use magicfn::mpnum::{to_decimal, PrecisionContext};
use magicfn::schedule::{schedule, ScheduleKind};
use rug::{Complex, Float, Rational};
use serde_json::{json, Value};

use crate::args::*;
use crate::cache::{PolyCache, PolyCacheEntry};
use crate::report::Run;
use crate::UsageError;

/// A resolved request for one pair.
#[derive(Debug, Clone)]
struct PairSpec {
    n_text: String,
    n: Rational,
    lattice: LatticeKind,
    kind: ScheduleKind,
    k: usize,
}

impl PairSpec {
    fn new(n_text: &str, k: usize, lattice: Option<LatticeKind>, kind: ScheduleKind) -> Result<Self> {
        let n = parse_rational(n_text)?;
        if n <= 0 {
            return Err(UsageError(format!("dimension must be positive, got {n}")).into());
        }
        if k == 0 {
            return Err(UsageError("k must be at least 1".into()).into());
        }
        let lattice = match lattice {
            Some(l) => l,
            None => integral(&n)
                .and_then(LatticeKind::for_dimension)
                .ok_or_else(|| UsageError(format!("--lattice is required for n = {n}")))?,
        };
        Ok(PairSpec { n_text: n.to_string(), n, lattice, kind, k })
    }

    fn from_args(a: &PairArgs) -> Result<Self> {
        Self::new(&a.n, a.k, a.lattice, a.schedule)
    }

    fn record(&self, run: &mut Run, ctx: &PrecisionContext) {
        run.param("n", self.n_text.clone())
            .param("k", self.k)
            .param("lattice", self.lattice.to_string())
            .param("schedule", self.kind.to_string())
            .param("digits", ctx.digits());
    }
}

fn open_cache(common: &Common) -> Result<Option<PolyCache>> {
    if common.no_cache {
        return Ok(None);
    }
    match &common.cache_dir {
        Some(dir) => Ok(Some(PolyCache::new(dir)?)),
        None => PolyCache::from_env(),
    }
}

/// Builds the pair or loads it from the cache; returns the cache key used.
fn obtain_pair(spec: &PairSpec, ctx: &PrecisionContext, cache: Option<&PolyCache>) -> Result<(RadialPair, Option<String>)> {
    let sched = schedule(spec.lattice, spec.kind, spec.k)?;
    let n = ctx.rational(&spec.n);
    if let Some(cache) = cache {
        if let Some((key, entry)) = cache.lookup(&spec.n_text, &sched, ctx.digits())? {
            return Ok((entry.to_pair(&n, &sched, ctx)?, Some(key)));
        }
    }
    let pair = magicfn::magic::build_pair(&n, &sched, ctx)?;
    let key = match cache {
        Some(cache) => Some(cache.store(&PolyCacheEntry::from_pair(&spec.n_text, &pair), &sched)?),
        None => None,
    };
    Ok((pair, key))
}

fn dec(x: &Float, ctx: &PrecisionContext) -> String {
    to_decimal(x, ctx.digits() as usize)
}

fn complex_json(z: &Complex, ctx: &PrecisionContext) -> Value {
    json!([dec(z.real(), ctx), dec(z.imag(), ctx)])
}

pub fn bound(a: &BoundArgs) -> Result<()> {
    let mut run = Run::new("bound");
    let spec = PairSpec::from_args(&a.pair)?;
    let ctx = a.common.context(spec.k)?;
    spec.record(&mut run, &ctx);
    run.param("signs", format!("{:?}", a.signs).to_lowercase());
    let cache = open_cache(&a.common)?;
    let (pair, key) = obtain_pair(&spec, &ctx, cache.as_ref())?;
    run.cache_key(key);
    let check = match a.signs {
        SignsArg::Full => SignCheck::Full,
        SignsArg::Sampled => SignCheck::Sampled,
        SignsArg::Skip => SignCheck::Skip,
    };
    let report = density_bound_with(&pair, check)?;
    let mut results = report.to_json(ctx.digits() as usize);
    results["forced_residual_log10"] = json!(format!("{:.2}", pair.forced_residual()));
    run.finish(results, a.common.out.as_deref())
}

fn sweep_value(a: &SweepArgs, k: usize, cache: Option<&PolyCache>) -> Result<(String, Option<String>)> {
    let spec = PairSpec::new(&a.n, k, a.lattice, a.schedule)?;
    let ctx = a.common.context(k)?;
    let digits = ctx.digits() as usize;
    if a.task == SweepTask::Slope {
        let n = integral(&spec.n).unwrap_or(0);
        let c = parse_real(&a.c, &ctx)?;
        let build = build_h(n, &c, k, &ctx)?;
        return Ok((to_decimal(&energy_slope_discrepancy(&build), 20), None));
    }
    if a.task == SweepTask::Convergence {
        if k <= a.step {
            return Err(UsageError(format!("k = {k} leaves nothing to compare with at step {}", a.step)).into());
        }
        let (hi, key) = obtain_pair(&spec, &ctx, cache)?;
        let lo_spec = PairSpec { k: k - a.step, ..spec };
        let (lo, _) = obtain_pair(&lo_spec, &ctx, cache)?;
        let grid = convergence_grid(&hi, &lo, &default_grid(&ctx));
        return Ok((format!("{:.6}", grid.minimum), key));
    }
    let (pair, key) = obtain_pair(&spec, &ctx, cache)?;
    let value = match a.task {
        SweepTask::Bound => to_decimal(&density_bound_with(&pair, SignCheck::Skip)?.bound_vs_lattice, digits),
        SweepTask::Taylor => {
            if a.order % 2 == 1 {
                return Err(UsageError("Taylor order must be even".into()).into());
            }
            let t = taylor_coefficients(pair.side(a.side), a.order / 2)?;
            to_decimal(&t[a.order / 2], digits)
        }
        SweepTask::Minimag => match root_atlas(&pair, a.side)?.min_imag {
            Some(m) => to_decimal(&m, 20),
            None => String::new(),
        },
        SweepTask::Fprime => to_decimal(&fprime_check(&pair, spec.lattice.kissing()), digits),
        SweepTask::Mellin => {
            let s = match &a.s {
                Some(s) => parse_rational(s)?,
                None => Rational::from(&spec.n / 2u32),
            };
            to_decimal(&mellin_value(pair.side(a.side), &s)?.value, digits)
        }
        SweepTask::Slope | SweepTask::Convergence => unreachable!("handled above"),
    };
    Ok((value, key))
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let mut run = Run::new("sweep");
    let mut ks = a.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    run.param("n", a.n.clone())
        .param("ks", ks.clone())
        .param("task", format!("{:?}", a.task).to_lowercase())
        .param("schedule", a.schedule.to_string())
        .param("side", a.side.to_string());
    match a.task {
        SweepTask::Taylor => {
            run.param("order", a.order);
        }
        SweepTask::Mellin => {
            run.param("s", a.s.clone());
        }
        SweepTask::Slope => {
            run.param("c", a.c.clone());
        }
        SweepTask::Convergence => {
            run.param("step", a.step);
        }
        _ => {}
    }
    if let Some(d) = a.common.digits {
        run.param("digits", d);
    }
    let cache = open_cache(&a.common)?;
    let jobs = a.jobs.max(1).min(ks.len().max(1));
    let mut rows: Vec<(usize, Result<(String, Option<String>)>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                let ks = &ks;
                let cache = cache.as_ref();
                scope.spawn(move || {
                    ks.iter()
                        .enumerate()
                        .filter(|(i, _)| i % jobs == w)
                        .map(|(i, &k)| (i, sweep_value(a, k, cache)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    rows.sort_by_key(|(i, _)| *i);
    let mut csv = String::from("k,value,error\n");
    let mut out = Vec::new();
    let mut failures = 0;
    for (i, row) in rows {
        let k = ks[i];
        match row {
            Ok((value, key)) => {
                run.cache_key(key);
                csv.push_str(&format!("{k},{value},\n"));
                out.push(json!({"k": k, "value": value, "error": Value::Null}));
            }
            Err(e) => {
                failures += 1;
                let msg = format!("{e:#}").replace([',', '\n'], ";");
                csv.push_str(&format!("{k},,{msg}\n"));
                out.push(json!({"k": k, "value": Value::Null, "error": msg}));
            }
        }
    }
    if let Some(path) = &a.csv {
        run.write_output(path, &csv)?;
    }
    let all_failed = failures == ks.len();
    run.finish(json!({ "rows": out }), a.common.out.as_deref())?;
    if all_failed {
        anyhow::bail!(magicfn::Error::InternalInconsistency("every sweep row failed".into()));
    }
    Ok(())
}

fn atlas_summary(atlas: &RootAtlas, ctx: &PrecisionContext) -> Value {
    let imaginary: Vec<String> = atlas
        .negative_real_u()
        .iter()
        .map(|u| to_decimal(&Float::with_val(ctx.bits(), -u).sqrt(), 20))
        .collect();
    json!({
        "side": atlas.side.to_string(),
        "u_roots": atlas.u_roots.len(),
        "x_roots": atlas.x_roots.len(),
        "forced": atlas.u_roots.iter().filter(|r| r.forced).count(),
        "min_imag": atlas.min_imag.as_ref().map(|m| to_decimal(m, 20)),
        "imaginary_axis_roots": imaginary,
    })
}

pub fn atlas(a: &AtlasArgs) -> Result<()> {
    let mut run = Run::new("atlas");
    let spec = PairSpec::from_args(&a.pair)?;
    let ctx = a.common.context(spec.k)?;
    spec.record(&mut run, &ctx);
    run.param("side", format!("{:?}", a.side).to_lowercase());
    let cache = open_cache(&a.common)?;
    let (pair, key) = obtain_pair(&spec, &ctx, cache.as_ref())?;
    run.cache_key(key);
    let sides: Vec<Side> = match a.side {
        AtlasSide::F => vec![Side::F],
        AtlasSide::Fhat => vec![Side::Fhat],
        AtlasSide::Both => vec![Side::F, Side::Fhat],
    };
    let atlases: Vec<RootAtlas> = sides.iter().map(|&s| root_atlas(&pair, s)).collect::<magicfn::Result<_>>()?;
    let mut results = json!({ "atlases": atlases.iter().map(|t| atlas_summary(t, &ctx)).collect::<Vec<_>>() });
    if let [f, fhat] = atlases.as_slice() {
        run.param("match_tol", a.match_tol);
        let unmatched = match_roots(f, fhat, a.match_tol);
        let max_re = unmatched
            .a
            .iter()
            .chain(&unmatched.b)
            .map(|z| z.real().to_f64().abs())
            .fold(0.0, f64::max);
        let extent = f.x_roots.iter().map(|r| r.z.real().to_f64().abs()).fold(0.0, f64::max);
        let fmt = |v: &[Complex]| v.iter().map(|z| complex_json(z, &PrecisionContext::new(30).unwrap())).collect::<Vec<_>>();
        results["matching"] = json!({
            "unmatched_f": fmt(&unmatched.a),
            "unmatched_fhat": fmt(&unmatched.b),
            "max_abs_re_unmatched": format!("{max_re:.6}"),
            "atlas_extent": format!("{extent:.6}"),
        });
    }
    if let Some(path) = &a.csv {
        let mut text = String::new();
        for (i, t) in atlases.iter().enumerate() {
            let csv = t.to_csv(a.csv_digits);
            text.push_str(if i == 0 { &csv } else { csv.split_once('\n').map_or("", |(_, body)| body) });
        }
        run.write_output(path, &text)?;
    }
    run.finish(results, a.common.out.as_deref())
}

pub fn values(a: &ValuesArgs) -> Result<()> {
    let mut run = Run::new("values");
    let spec = PairSpec::from_args(&a.pair)?;
    let k_max = spec.k.max(a.compare_k.unwrap_or(0));
    let ctx = a.common.context(k_max)?;
    spec.record(&mut run, &ctx);
    let cache = open_cache(&a.common)?;
    let (pair, key) = obtain_pair(&spec, &ctx, cache.as_ref())?;
    run.cache_key(key);
    let points: Vec<Complex> = a
        .at
        .iter()
        .map(|p| parse_point(p).map(|(re, im)| Complex::with_val(ctx.bits(), (&re, &im))))
        .collect::<Result<_>>()?;
    run.param("at", a.at.clone());
    let mut results = json!({});
    let mut rows = Vec::new();
    for z in &points {
        let u = Complex::with_val(ctx.bits(), z.square_ref());
        rows.push(json!({
            "x": complex_json(z, &ctx),
            "f": complex_json(&pair.f().eval(z), &ctx),
            "fhat": complex_json(&pair.fhat().eval(z), &ctx),
            "f_poly": complex_json(&pair.f().mono().eval_complex(&u), &ctx),
            "fhat_poly": complex_json(&pair.fhat().mono().eval_complex(&u), &ctx),
        }));
    }
    results["points"] = json!(rows);
    if let Some(k2) = a.compare_k {
        run.param("compare_k", k2);
        let other = PairSpec { k: k2, ..spec };
        let (lo, key) = obtain_pair(&other, &ctx, cache.as_ref())?;
        run.cache_key(key);
        let grid = if points.is_empty() { default_grid(&ctx) } else { points.clone() };
        let g = convergence_grid(&pair, &lo, &grid);
        results["agreement_digits"] = json!(format!("{:.6}", g.minimum));
        if let Some(path) = &a.csv {
            run.write_output(path, &g.to_csv())?;
        }
    }
    run.finish(results, a.common.out.as_deref())
}

pub fn taylor(a: &TaylorArgs) -> Result<()> {
    let mut run = Run::new("taylor");
    let spec = PairSpec::from_args(&a.pair)?;
    let ctx = a.common.context(spec.k)?;
    spec.record(&mut run, &ctx);
    run.param("side", a.side.to_string()).param("order", a.order);
    let cache = open_cache(&a.common)?;
    let (pair, key) = obtain_pair(&spec, &ctx, cache.as_ref())?;
    run.cache_key(key);
    let coeffs = taylor_coefficients(pair.side(a.side), a.order / 2)?;
    let list: Vec<Value> = coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| json!({"power": 2 * m, "coefficient": dec(c, &ctx)}))
        .collect();
    run.finish(json!({ "coefficients": list }), a.common.out.as_deref())
}

pub fn mellin(a: &MellinArgs) -> Result<()> {
    let mut run = Run::new("mellin");
    let spec = PairSpec::from_args(&a.pair)?;
    let ctx = a.common.context(spec.k)?;
    spec.record(&mut run, &ctx);
    let s = parse_rational(&a.s)?;
    run.param("side", a.side.to_string()).param("s", s.to_string());
    let cache = open_cache(&a.common)?;
    let (pair, key) = obtain_pair(&spec, &ctx, cache.as_ref())?;
    run.cache_key(key);
    let m = mellin_value(pair.side(a.side), &s)?;
    let mut results = json!({ "s": m.s.to_string(), "value": dec(&m.value, &ctx) });
    if a.symmetry {
        results["symmetry_discrepancy"] = json!(to_decimal(&mellin_symmetry_check(&pair, &s)?, 10));
    }
    run.finish(results, a.common.out.as_deref())
}

pub fn fprime(a: &PairCmd) -> Result<()> {
    let mut run = Run::new("fprime");
    let spec = PairSpec::from_args(&a.pair)?;
    let ctx = a.common.context(spec.k)?;
    spec.record(&mut run, &ctx);
    let cache = open_cache(&a.common)?;
    let (pair, key) = obtain_pair(&spec, &ctx, cache.as_ref())?;
    run.cache_key(key);
    let rho = fprime_check(&pair, spec.lattice.kissing());
    let dev = Float::with_val(ctx.bits(), &rho - 1u32);
    run.finish(
        json!({ "rho": dec(&rho, &ctx), "rho_minus_one": to_decimal(&dev, 20), "kissing": spec.lattice.kissing() }),
        a.common.out.as_deref(),
    )
}

pub fn ratio(a: &RatioArgs) -> Result<()> {
    let mut run = Run::new("ratio");
    let n = parse_rational(&a.n)?;
    run.param("n", n.to_string()).param("lattice", a.lattice.to_string());
    let formula = ratio_formula(&n, a.lattice)?;
    let ctx = a.common.context(a.k.unwrap_or(0))?;
    let predicted = ctx.rational(&formula);
    let mut results = json!({ "formula": formula.to_string(), "formula_decimal": dec(&predicted, &ctx) });
    if let Some(k) = a.k {
        run.param("k", k).param("digits", ctx.digits());
        let spec = PairSpec::new(&a.n, k, Some(a.lattice), ScheduleKind::Modified)?;
        let cache = open_cache(&a.common)?;
        let (pair, key) = obtain_pair(&spec, &ctx, cache.as_ref())?;
        run.cache_key(key);
        let actual = pair.f().value_at_zero() / pair.fhat().value_at_zero();
        let diff = Float::with_val(ctx.bits(), &actual - &predicted).abs();
        results["ratio"] = json!(dec(&actual, &ctx));
        results["abs_difference"] = json!(to_decimal(&diff, 20));
    }
    run.finish(results, a.common.out.as_deref())
}

pub fn energy(a: &EnergyArgs) -> Result<()> {
    let mut run = Run::new("energy");
    let ctx = a.common.context(a.k)?;
    let c = parse_real(&a.c, &ctx)?;
    run.param("n", a.n).param("c", a.c.clone()).param("k", a.k).param("digits", ctx.digits());
    let build = build_h(a.n, &c, a.k, &ctx)?;
    let digits = ctx.digits() as usize;
    let mut results = build.to_json(digits)?;
    results["hhat0"] = json!(to_decimal(&build.hhat0(), digits));
    results["psi_energy"] = json!(to_decimal(&build.psi_energy, digits));
    if a.signs {
        let s = validate_energy_signs(&build);
        results["signs"] = json!({
            "h_below_phi": s.h_below_phi,
            "hhat_nonnegative": s.hhat_nonnegative,
            "samples": s.samples,
            "tangency_residual_log10": format!("{:.2}", s.tangency_residual),
            "valid": s.valid(),
        });
    }
    if a.dual {
        let d = duality_transform(&build)?;
        results["dual"] = json!({
            "g0": to_decimal(&d.g0, digits),
            "ghat0": to_decimal(&d.ghat0, digits),
            "bound": to_decimal(&d.bound, digits),
            "dual_energy": to_decimal(&d.dual_energy, digits),
            "identity_residual": to_decimal(&d.identity_residual, 10),
        });
    }
    run.finish(results, a.common.out.as_deref())
}

fn single_closed_form(g: &EigenSingle, n: &Rational, ctx: &PrecisionContext) -> Result<Value> {
    let n = integral(n)
        .ok_or_else(|| magicfn::Error::OutOfScope(format!("closed forms need integral n, got {n}")))?;
    let samples = default_ratio_samples(ctx);
    let values: Vec<Float> = samples.iter().map(|u| g.eval_u(u)).collect();
    let closed: Vec<Float> = samples.iter().map(|u| closed_form_u(n, g.eps, u, ctx)).collect::<magicfn::Result<_>>()?;
    Ok(json!(format!("{:e}", ratio_deviation(&values, &closed)?)))
}

pub fn single(a: &SingleArgs) -> Result<()> {
    let mut run = Run::new("single");
    let ctx = a.common.context(a.k)?;
    let n = parse_rational(&a.n)?;
    run.param("n", n.to_string())
        .param("k", a.k)
        .param("eps", a.eps)
        .param("leech", a.leech)
        .param("digits", ctx.digits());
    let g = match &a.extra_root {
        Some(c) => {
            if n != 4 || a.eps != 0 || a.leech {
                return Err(UsageError("the extra-root variant is defined for n = 4, eps = 0".into()).into());
            }
            let c = parse_rational(c)?;
            run.param("extra_root", c.to_string());
            extra_root_variant(&c, a.k, &ctx)?
        }
        None if a.leech => build_single_leech(&ctx.rational(&n), a.k, a.eps, &ctx)?,
        None => build_single(&ctx.rational(&n), a.k, a.eps, &ctx)?,
    };
    let lag: Vec<String> = g.func().lag_coeffs().iter().map(|c| dec(c, &ctx)).collect();
    let mut results = json!({
        "eigenrelation_exact": g.eigenrelation_holds(),
        "forced_residual_log10": format!("{:.2}", g.forced_residual()),
        "degree": g.r_poly().degree(),
        "lag_coeffs": lag,
    });
    if a.imag_roots > 0 {
        let roots = imaginary_roots(&g, a.imag_roots)?;
        results["imaginary_root_squares"] = json!(roots.iter().map(|u| to_decimal(u, 25)).collect::<Vec<_>>());
    }
    if a.closed_form {
        results["closed_form_deviation"] = match &a.extra_root {
            Some(c) => {
                let c = parse_rational(c)?;
                let samples = default_ratio_samples(&ctx);
                let mut out = json!({});
                for (label, form) in [("displayed", ExtraRootForm::Displayed), ("corrected", ExtraRootForm::Corrected)] {
                    let disc = extra_root_discriminant(&c, form, &ctx);
                    out[label] = json!({
                        "deviation": format!("{:e}", extra_root_deviation(&g, &c, &samples, form)?),
                        "discriminant": to_decimal(&disc, 20),
                        "extraneous_real": !disc.is_sign_negative(),
                    });
                }
                out
            }
            None => single_closed_form(&g, &n, &ctx)?,
        };
    }
    if let Some(path) = &a.atlas {
        let atlas = single_atlas(&g)?;
        run.write_output(path, &atlas.to_csv_labeled(20, "g"))?;
        let extra: Vec<Value> = atlas
            .x_roots
            .iter()
            .filter(|r| r.z.imag().is_zero() && !r.forced && !r.z.real().is_zero() && r.z.real().is_sign_positive())
            .map(|r| json!(to_decimal(r.z.real(), 20)))
            .collect();
        results["extraneous_real_roots"] = json!(extra);
    }
    run.finish(results, a.common.out.as_deref())
}

pub fn shells(a: &ShellsArgs) -> Result<()> {
    let mut run = Run::new("shells");
    run.param("lattice", a.lattice.to_string()).param("max_j", a.max_j);
    let spec = LatticeSpec::new(a.lattice);
    let csv = spec.shells_csv(a.max_j)?;
    let counts: Vec<String> = spec.shell_counts(a.max_j)?.iter().map(|c| c.to_string()).collect();
    if let Some(path) = &a.csv {
        run.write_output(path, &csv)?;
    }
    run.finish(json!({ "counts": counts }), a.common.out.as_deref())
}
