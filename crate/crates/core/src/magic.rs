//! Forced-root approximants `f_k` and their Fourier transforms.
//!
//! `f(x) = q(|x|^2) exp(-pi |x|^2)` with `deg q = 4k - 1`, where `f` vanishes
//! to order one at `r_1` and order two at `r_2 .. r_k`, and `f^` vanishes to
//! order two at every `r_m`. Writing `q = q0 + q1` with `q0` even and `q1` odd
//! in the Laguerre basis turns this into two half-size linear systems.

use std::sync::Arc;

use rug::{Complex, Float, Rational};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::LatticeKind;
use crate::mpnum::{log10_abs, poly_roots, solve_linear_owned, to_decimal, BigPoly, PrecisionContext};
use crate::polybasis::{build_basis, LaguerreBasis, RadialFunction};
use crate::schedule::{RootSchedule, ScheduleKind};

#[derive(Debug, Clone)]
pub struct RadialPair {
    n: Float,
    schedule: RootSchedule,
    q0: RadialFunction,
    q1: RadialFunction,
    f: RadialFunction,
    fhat: RadialFunction,
}

impl RadialPair {
    /// Assembles a pair from the Laguerre coefficients of its eigencomponents.
    pub fn from_components(
        n: &Float,
        schedule: RootSchedule,
        q0: Vec<Float>,
        q1: Vec<Float>,
        ctx: &PrecisionContext,
    ) -> Result<Self> {
        let len = 4 * schedule.k();
        if q0.len() != len || q1.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "expected {len} coefficients per component, got {} and {}",
                q0.len(),
                q1.len()
            )));
        }
        let basis = build_basis(n, len - 1, ctx)?;
        Self::assemble(basis, schedule, q0, q1)
    }

    pub(crate) fn assemble(basis: Arc<LaguerreBasis>, schedule: RootSchedule, q0: Vec<Float>, q1: Vec<Float>) -> Result<Self> {
        let n = basis.n().clone();
        let q0 = RadialFunction::from_laguerre(basis.clone(), q0)?;
        let q1 = RadialFunction::from_laguerre(basis, q1)?;
        let f = q0.combine(&q1, false);
        let fhat = q0.combine(&q1, true);
        Ok(Self { n, schedule, q0, q1, f, fhat })
    }

    pub fn n(&self) -> &Float {
        &self.n
    }

    pub fn k(&self) -> usize {
        self.schedule.k()
    }

    pub fn schedule(&self) -> &RootSchedule {
        &self.schedule
    }

    pub fn ctx(&self) -> &PrecisionContext {
        self.f.ctx()
    }

    /// The `+1` eigencomponent.
    pub fn q0(&self) -> &RadialFunction {
        &self.q0
    }

    /// The `-1` eigencomponent.
    pub fn q1(&self) -> &RadialFunction {
        &self.q1
    }

    pub fn f(&self) -> &RadialFunction {
        &self.f
    }

    pub fn fhat(&self) -> &RadialFunction {
        &self.fhat
    }

    pub fn side(&self, side: Side) -> &RadialFunction {
        match side {
            Side::F => &self.f,
            Side::Fhat => &self.fhat,
        }
    }

    /// Largest absolute residual of the forcing conditions, relative to the
    /// size of the terms that cancel in each condition.
    pub fn forced_residual(&self) -> f64 {
        let ctx = self.ctx();
        let basis = self.f.basis();
        let len = self.f.lag_coeffs().len();
        let mut worst = f64::NEG_INFINITY;
        for (m, u) in self.schedule.norms_at(ctx).iter().enumerate() {
            let (vals, ders) = basis.values_and_derivatives(u, len);
            for side in [&self.f, &self.fhat] {
                let c = side.lag_coeffs();
                let checks: &[&Vec<Float>] = if m == 0 && std::ptr::eq(side, &self.f) { &[&vals] } else { &[&vals, &ders] };
                for row in checks {
                    let (sum, scale) = dot_with_scale(c, row, ctx.bits());
                    if !scale.is_zero() {
                        worst = worst.max(log10_abs(&sum) - log10_abs(&scale));
                    }
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    F,
    Fhat,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::F => "f",
            Side::Fhat => "fhat",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f" => Ok(Side::F),
            "fhat" => Ok(Side::Fhat),
            other => Err(Error::Parse(format!("unknown side {other:?}"))),
        }
    }
}

fn dot_with_scale(c: &[Float], row: &[Float], bits: u32) -> (Float, Float) {
    let mut sum = Float::new(bits);
    let mut scale = Float::new(bits);
    for (a, b) in c.iter().zip(row) {
        let t = Float::with_val(bits, a * b);
        scale += Float::with_val(bits, t.abs_ref());
        sum += t;
    }
    (sum, scale)
}

/// Nullspace direction of an `r x (r+1)` system: pin one unknown to 1 and
/// solve for the rest, starting from the last unknown and moving down when
/// the reduced system is singular.
pub(crate) fn pin_and_solve(rows: &[Vec<Float>], ctx: &PrecisionContext) -> Result<Vec<Float>> {
    let unknowns = rows.first().map_or(1, Vec::len);
    if rows.iter().any(|r| r.len() != unknowns) || rows.len() + 1 != unknowns {
        return Err(Error::DimensionMismatch(format!(
            "{} homogeneous rows for {unknowns} unknowns",
            rows.len()
        )));
    }
    let mut last_err = Error::SingularMatrix { column: 0 };
    for pin in (0..unknowns).rev() {
        let a: Vec<Vec<Float>> = rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|&(j, _)| j != pin).map(|(_, x)| x.clone()).collect())
            .collect();
        let b: Vec<Float> = rows.iter().map(|r| -r[pin].clone()).collect();
        match solve_linear_owned(a, b, ctx) {
            Ok(mut x) => {
                x.insert(pin, ctx.one());
                return Ok(x);
            }
            Err(e @ Error::SingularMatrix { .. }) => last_err = e,
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

/// Builds `(f_k, f^_k)` for the given schedule, normalized so that `f(0) = 1`.
pub fn build_pair(n: &Float, schedule: &RootSchedule, ctx: &PrecisionContext) -> Result<RadialPair> {
    let k = schedule.k();
    let len = 4 * k;
    let basis = build_basis(n, len - 1, ctx)?;
    let norms = schedule.norms_at(ctx);
    let evals: Vec<(Vec<Float>, Vec<Float>)> =
        norms.iter().map(|u| basis.values_and_derivatives(u, len)).collect();

    let mut comps = Vec::with_capacity(2);
    for eps in 0..2 {
        let cols: Vec<usize> = (0..2 * k).map(|i| 2 * i + eps).collect();
        let pick = |row: &Vec<Float>| cols.iter().map(|&j| row[j].clone()).collect::<Vec<_>>();
        let mut rows = Vec::with_capacity(2 * k - 1);
        for (m, (vals, ders)) in evals.iter().enumerate() {
            rows.push(pick(vals));
            if m > 0 {
                rows.push(pick(ders));
            }
        }
        let sol = pin_and_solve(&rows, ctx)?;
        let mut lag = vec![ctx.zero(); len];
        for (c, &j) in sol.into_iter().zip(&cols) {
            lag[j] = c;
        }
        comps.push(lag);
    }
    let mut q1 = comps.pop().expect("two components");
    let mut q0 = comps.pop().expect("two components");

    // (q0 - lambda q1)'(r_1^2) = 0 gives f^ its double root at r_1
    let ders = &evals[0].1;
    let (d0, s0) = dot_with_scale(&q0, ders, ctx.bits());
    let (d1, s1) = dot_with_scale(&q1, ders, ctx.bits());
    let tiny = |d: &Float, s: &Float| s.is_zero() || log10_abs(d) - log10_abs(s) < -(ctx.digits() as f64 - 10.0);
    if tiny(&d1, &s1) {
        return Err(Error::ScalingDegenerate);
    }
    if tiny(&d0, &s0) {
        return Err(Error::ScalingDegenerate);
    }
    let lambda = Float::with_val(ctx.bits(), &d0 / &d1);
    for c in q1.iter_mut() {
        *c *= &lambda;
    }
    normalize_at_zero(&basis, &mut q0, &mut q1)?;
    RadialPair::assemble(basis, schedule.clone(), q0, q1)
}

fn normalize_at_zero(basis: &LaguerreBasis, q0: &mut [Float], q1: &mut [Float]) -> Result<()> {
    let zero = basis.values_at_zero(q0.len());
    let bits = basis.ctx().bits();
    let mut total = Float::new(bits);
    for ((a, b), z) in q0.iter().zip(q1.iter()).zip(&zero) {
        total += Float::with_val(bits, a + b) * z;
    }
    if total.is_zero() {
        return Err(Error::InternalInconsistency("f(0) vanishes; cannot normalize".into()));
    }
    for c in q0.iter_mut().chain(q1.iter_mut()) {
        *c /= &total;
    }
    Ok(())
}

/// The same pair from one `4k x 4k` system in all coefficients of `q`,
/// including the normalization `q(0) = 1`.
pub fn build_pair_full(n: &Float, schedule: &RootSchedule, ctx: &PrecisionContext) -> Result<RadialPair> {
    let k = schedule.k();
    let len = 4 * k;
    let basis = build_basis(n, len - 1, ctx)?;
    let flip = |row: &Vec<Float>| -> Vec<Float> {
        row.iter().enumerate().map(|(j, x)| if j % 2 == 1 { -x.clone() } else { x.clone() }).collect()
    };
    let mut a = Vec::with_capacity(len);
    for (m, u) in schedule.norms_at(ctx).iter().enumerate() {
        let (vals, ders) = basis.values_and_derivatives(u, len);
        a.push(flip(&vals));
        a.push(flip(&ders));
        a.push(vals);
        if m > 0 {
            a.push(ders);
        }
    }
    a.push(basis.values_at_zero(len));
    let mut b = vec![ctx.zero(); len];
    b[len - 1] = ctx.one();
    let c = solve_linear_owned(a, b, ctx)?;
    let (q0, q1): (Vec<Float>, Vec<Float>) = c
        .into_iter()
        .enumerate()
        .map(|(j, x)| if j % 2 == 0 { (x, ctx.zero()) } else { (ctx.zero(), x) })
        .unzip();
    RadialPair::assemble(basis, schedule.clone(), q0, q1)
}

/// How much work [`density_bound_with`] spends on the sign conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignCheck {
    /// Sampling scan, then a full root analysis if sampling finds nothing.
    Full,
    /// Sampling scan only. Can prove invalidity, never validity.
    Sampled,
    Skip,
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    pub n: Float,
    pub k: usize,
    pub kind: ScheduleKind,
    pub fhat0: Float,
    pub ratio: Float,
    pub bound_vs_lattice: Float,
    /// `None` when the signs were not checked or sampling was inconclusive.
    pub signs_valid: Option<bool>,
    pub signs: Option<SignReport>,
}

impl BoundReport {
    pub fn to_json(&self, digits: usize) -> serde_json::Value {
        let one = Float::with_val(self.ratio.prec(), 1);
        let excess = Float::with_val(self.ratio.prec(), &self.bound_vs_lattice - &one);
        serde_json::json!({
            "n": match self.n.to_integer() {
                Some(i) if Float::with_val(self.n.prec(), &i) == self.n => i.to_string(),
                _ => to_decimal(&self.n, 30),
            },
            "k": self.k,
            "schedule": self.kind,
            "fhat0": to_decimal(&self.fhat0, digits),
            "ratio": to_decimal(&self.ratio, digits),
            "bound_vs_lattice": to_decimal(&self.bound_vs_lattice, digits),
            "excess": to_decimal(&excess, digits),
            "signs_valid": self.signs_valid,
            "signs": self.signs.as_ref().map(|s| s.to_json()),
        })
    }
}

pub fn density_bound(pair: &RadialPair) -> Result<BoundReport> {
    density_bound_with(pair, SignCheck::Full)
}

pub fn density_bound_with(pair: &RadialPair, check: SignCheck) -> Result<BoundReport> {
    let ctx = pair.ctx();
    let fhat0 = pair.fhat.value_at_zero();
    let f0 = pair.f.value_at_zero();
    let ratio = Float::with_val(ctx.bits(), &f0 / &fhat0);
    // (r_1 / l_1)^n, which is 1 for both schedules
    let lattice = pair.schedule.lattice();
    let r1 = &pair.schedule.norms()[0];
    let l1 = Rational::from(lattice.min_norm());
    let rel = ctx.rational(&Rational::from(r1 / &l1));
    let half_n = Float::with_val(ctx.bits(), &pair.n / 2u32);
    let bound_vs_lattice = Float::with_val(ctx.bits(), rug::ops::Pow::pow(rel, &half_n)) * &ratio;
    let signs = match check {
        SignCheck::Skip => None,
        SignCheck::Sampled => Some(sample_signs(pair)),
        SignCheck::Full => Some(validate_signs(pair)?),
    };
    let mut signs_valid = signs.as_ref().and_then(|s| s.valid);
    // the lattice itself attains ratio 1, so a smaller bound cannot come from
    // a function meeting the sign conditions
    if signs.is_some() && bound_vs_lattice < 1u32 {
        signs_valid = Some(false);
    }
    Ok(BoundReport {
        n: pair.n.clone(),
        k: pair.k(),
        kind: pair.schedule.kind(),
        fhat0,
        ratio,
        bound_vs_lattice,
        signs_valid,
        signs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SignMethod {
    Sampling,
    Roots,
}

/// Sign conditions of the density bound: `f <= 0` for `|x| >= r_1` and
/// `f^ >= 0` everywhere.
#[derive(Debug, Clone)]
pub struct SignReport {
    pub f_ok: Option<bool>,
    pub fhat_ok: Option<bool>,
    /// Non-forced real roots (as radii `|x|`) found on each side.
    pub extra_f: Vec<Float>,
    pub extra_fhat: Vec<Float>,
    pub method: SignMethod,
    pub valid: Option<bool>,
}

impl SignReport {
    pub fn to_json(&self) -> serde_json::Value {
        let fmt = |v: &[Float]| v.iter().map(|x| to_decimal(x, 20)).collect::<Vec<_>>();
        serde_json::json!({
            "f_nonpositive": self.f_ok,
            "fhat_nonnegative": self.fhat_ok,
            "extra_roots_f": fmt(&self.extra_f),
            "extra_roots_fhat": fmt(&self.extra_fhat),
            "method": self.method,
        })
    }
}

/// Full sign analysis: a sampling scan first (a wrong sign anywhere settles
/// the question), then exact root accounting with `poly_roots`.
pub fn validate_signs(pair: &RadialPair) -> Result<SignReport> {
    let sampled = sample_signs(pair);
    if sampled.valid == Some(false) {
        return Ok(sampled);
    }
    let ctx = pair.ctx();
    let norms = pair.schedule.norms_at(ctx);
    let (f_ok, extra_f) = root_sign_scan(pair.f.mono(), &norms, true, ctx)?;
    let (fhat_ok, extra_fhat) = root_sign_scan(pair.fhat.mono(), &norms, false, ctx)?;
    Ok(SignReport {
        f_ok: Some(f_ok),
        fhat_ok: Some(fhat_ok),
        extra_f,
        extra_fhat,
        method: SignMethod::Roots,
        valid: Some(f_ok && fhat_ok),
    })
}

/// Cheap scan of both sides on a grid of `u` values. Reports `valid =
/// Some(false)` with the odd-order crossings it bracketed, or `None`.
pub fn sample_signs(pair: &RadialPair) -> SignReport {
    let ctx = pair.ctx();
    let norms = pair.schedule.norms_at(ctx);
    let (f_ok, extra_f) = sample_side(pair.f.mono(), &norms, true, ctx);
    let (fhat_ok, extra_fhat) = sample_side(pair.fhat.mono(), &norms, false, ctx);
    let valid = if f_ok && fhat_ok { None } else { Some(false) };
    SignReport {
        f_ok: if f_ok { None } else { Some(false) },
        fhat_ok: if fhat_ok { None } else { Some(false) },
        extra_f,
        extra_fhat,
        method: SignMethod::Sampling,
        valid,
    }
}

/// Upper bound for the positive real roots of `q` (Fujiwara).
fn positive_root_bound(q: &BigPoly) -> f64 {
    let c = q.coeffs();
    let d = c.len() - 1;
    let lead = log10_abs(&c[d]);
    let mut best = f64::NEG_INFINITY;
    for (i, ci) in c.iter().enumerate().take(d) {
        if ci.is_zero() {
            continue;
        }
        let mut e = (log10_abs(ci) - lead) / (d - i) as f64;
        if i == 0 {
            e -= 2f64.log10() / d as f64;
        }
        best = best.max(e);
    }
    2.0 * 10f64.powf(best)
}

fn sample_side(q: &BigPoly, norms: &[Float], is_f: bool, ctx: &PrecisionContext) -> (bool, Vec<Float>) {
    let bits = ctx.bits();
    let start = if is_f { norms[0].clone() } else { ctx.zero() };
    let mut knots = vec![start];
    for u in norms {
        if *u > knots[knots.len() - 1] {
            knots.push(u.clone());
        }
    }
    // f vanishes at its start by construction; f^ must be checked at 0 too
    let mut points = if is_f { Vec::new() } else { vec![knots[0].clone()] };
    for w in knots.windows(2) {
        for i in 1..8u32 {
            let t = Float::with_val(bits, &w[1] - &w[0]) * i / 8u32;
            points.push(t + &w[0]);
        }
    }
    let last = knots[knots.len() - 1].to_f64();
    let top = positive_root_bound(q).max(2.0 * last);
    let count = 4 * q.degree().max(8);
    let ratio = (top / last).ln() / count as f64;
    for i in 1..=count {
        points.push(ctx.real(last * (ratio * i as f64).exp()));
    }
    let wrong = |v: &Float| if is_f { v.is_sign_positive() && !v.is_zero() } else { v.is_sign_negative() && !v.is_zero() };
    let mut extra = Vec::new();
    let mut prev: Option<(Float, Float)> = None;
    let mut ok = true;
    for u in points {
        let v = q.eval(&u);
        if wrong(&v) {
            ok = false;
        }
        if let Some((pu, pv)) = &prev {
            if pv.is_sign_positive() != v.is_sign_positive() && !pv.is_zero() && !v.is_zero() {
                extra.push(bisect(q, pu.clone(), u.clone(), ctx).sqrt());
            }
        }
        prev = Some((u, v));
    }
    (ok, extra)
}

fn bisect(q: &BigPoly, mut lo: Float, mut hi: Float, ctx: &PrecisionContext) -> Float {
    let lo_pos = q.eval(&lo).is_sign_positive();
    for _ in 0..80 {
        let mid = Float::with_val(ctx.bits(), &lo + &hi) / 2u32;
        if q.eval(&mid).is_sign_positive() == lo_pos {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Float::with_val(ctx.bits(), &lo + &hi) / 2u32
}

/// Locates every real root of `q` in the relevant range and checks the sign
/// between consecutive ones. Returns the sign verdict and the non-forced roots.
fn root_sign_scan(q: &BigPoly, norms: &[Float], is_f: bool, ctx: &PrecisionContext) -> Result<(bool, Vec<Float>)> {
    let bits = ctx.bits();
    let roots = poly_roots(q, ctx)?;
    let real_tol = ctx.root_tolerance();
    let start = if is_f { norms[0].clone() } else { ctx.zero() };
    let clusters = roots.clusters(&real_tol);
    let mut real: Vec<Float> = Vec::new();
    for c in &clusters {
        let z = &c.center;
        let scale = Float::with_val(bits, z.real().abs_ref()).max(&ctx.one());
        if Float::with_val(bits, z.imag().abs_ref()) <= Float::with_val(bits, &real_tol * &scale) && *z.real() >= start {
            real.push(z.real().clone());
        }
    }
    real.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));
    let forced = |u: &Float| {
        norms.iter().any(|r| {
            let d = Float::with_val(bits, u - r).abs();
            d <= Float::with_val(bits, &real_tol * r)
        })
    };
    let extra: Vec<Float> = real.iter().filter(|u| !forced(u)).map(|u| Float::with_val(bits, u.sqrt_ref())).collect();

    let mut knots = vec![start.clone()];
    // a root located a hair above the start is the start itself; probing
    // between the two would only read rounding noise
    let floor = Float::with_val(bits, &real_tol * start.clone().max(&ctx.one())) + &start;
    knots.extend(real.iter().filter(|u| **u > floor).cloned());
    let mut probes: Vec<Float> = knots.windows(2).map(|w| Float::with_val(bits, &w[0] + &w[1]) / 2u32).collect();
    probes.push(Float::with_val(bits, &knots[knots.len() - 1] * 2u32) + 1u32);
    let ok = probes.iter().all(|u| {
        let v = q.eval(u);
        if is_f {
            !v.is_sign_positive() || v.is_zero()
        } else {
            !v.is_sign_negative() || v.is_zero()
        }
    });
    Ok((ok, extra))
}

/// Value of a side at a complex radius, for reports.
pub fn eval_side(pair: &RadialPair, side: Side, x: &Complex) -> Complex {
    pair.side(side).eval(x)
}

pub fn lattice_for(n: &Float) -> Option<LatticeKind> {
    n.to_u32_saturating().filter(|v| Float::with_val(n.prec(), *v) == *n).and_then(LatticeKind::for_dimension)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{modified_schedule, naive_schedule};

    #[test]
    fn single_root_pair_matches_full_system() {
        let ctx = PrecisionContext::new(60).unwrap();
        let s = naive_schedule(LatticeKind::E8, 1).unwrap();
        let n = ctx.real(8);
        let a = build_pair(&n, &s, &ctx).unwrap();
        let b = build_pair_full(&n, &s, &ctx).unwrap();
        for (x, y) in a.f().lag_coeffs().iter().zip(b.f().lag_coeffs()) {
            assert!(log10_abs(&Float::with_val(ctx.bits(), x - y)) < -50.0);
        }
        assert!(log10_abs(&(a.f().value_at_zero() - 1u32)) < -50.0);
        assert!(a.forced_residual() < -50.0);
    }

    #[test]
    fn small_modified_build_is_consistent() {
        let ctx = PrecisionContext::new(120).unwrap();
        let s = modified_schedule(LatticeKind::E8, 5).unwrap();
        let pair = build_pair(&ctx.real(8), &s, &ctx).unwrap();
        assert_eq!(pair.f().mono().degree(), 19);
        assert!(pair.forced_residual() < -100.0);
        let t = pair.f().transform();
        assert_eq!(t.lag_coeffs(), pair.fhat().lag_coeffs());
    }
}
