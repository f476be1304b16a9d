//! Fourier eigenfunctions with forced single roots.
//!
//! `g(x) = r(|x|^2) exp(-pi |x|^2)` where `r` is a combination of
//! `p_eps, p_{2+eps}, .., p_{2k+eps}` vanishing at `u = 2, 4, .., 2k`, so that
//! `g^ = (-1)^eps g`. The scale is fixed by making the coefficient of the
//! highest basis element equal to 1.

use std::sync::Arc;

use rug::{Complex, Float, Rational};

use crate::analysis::{root_atlas_with_norms, RootAtlas};
use crate::error::{Error, Result};
use crate::lattice::LatticeKind;
use crate::magic::pin_and_solve;
use crate::mpnum::{log10_abs, poly_roots, BigPoly, PrecisionContext};
use crate::polybasis::{build_basis, LaguerreBasis, RadialFunction};

#[derive(Debug, Clone)]
pub struct EigenSingle {
    pub k: usize,
    pub eps: u32,
    /// Forced roots in `u`.
    pub norms: Vec<Rational>,
    func: RadialFunction,
}

impl EigenSingle {
    pub fn n(&self) -> &Float {
        self.func.basis().n()
    }

    pub fn func(&self) -> &RadialFunction {
        &self.func
    }

    pub fn r_poly(&self) -> &BigPoly {
        self.func.mono()
    }

    pub fn ctx(&self) -> &PrecisionContext {
        self.func.ctx()
    }

    /// `g(x)` at radius `|x|^2 = u`.
    pub fn eval_u(&self, u: &Float) -> Float {
        self.func.eval_u(u)
    }

    /// Largest `|r(u_m)|` relative to the size of the terms summed at `u_m`.
    pub fn forced_residual(&self) -> f64 {
        let ctx = self.ctx();
        let basis = self.func.basis();
        let c = self.func.lag_coeffs();
        let mut worst = f64::NEG_INFINITY;
        for u in &self.norms {
            let vals = basis.values(&ctx.rational(u), c.len());
            let mut sum = ctx.zero();
            let mut scale = ctx.zero();
            for (a, b) in c.iter().zip(&vals) {
                let t = Float::with_val(ctx.bits(), a * b);
                scale += Float::with_val(ctx.bits(), t.abs_ref());
                sum += t;
            }
            worst = worst.max(log10_abs(&sum) - log10_abs(&scale));
        }
        worst
    }

    /// True when the transform maps the coefficients to `(-1)^eps` times
    /// themselves exactly.
    pub fn eigenrelation_holds(&self) -> bool {
        let t = self.func.transform();
        t.lag_coeffs().iter().zip(self.func.lag_coeffs()).all(|(a, b)| {
            if self.eps == 0 {
                a == b
            } else {
                *a == Float::with_val(b.prec(), -b)
            }
        })
    }
}

/// Builds `g^eps_{n,k}` with roots at `2, 4, .., 2k`.
pub fn build_single(n: &Float, k: usize, eps: u32, ctx: &PrecisionContext) -> Result<EigenSingle> {
    let norms: Vec<Rational> = (1..=k).map(|m| Rational::from(2 * m as u64)).collect();
    build_with_roots(n, eps, norms, k, ctx)
}

/// The analogue with forced roots at the Leech norms `4, 6, .., 2k+2`.
pub fn build_single_leech(n: &Float, k: usize, eps: u32, ctx: &PrecisionContext) -> Result<EigenSingle> {
    build_with_roots(n, eps, LatticeKind::Leech.norms(k), k, ctx)
}

/// The `n = 4`, `eps = 0` function with an extra forced root at `u = c`.
pub fn extra_root_variant(c: &Rational, k: usize, ctx: &PrecisionContext) -> Result<EigenSingle> {
    if *c <= 0 {
        return Err(Error::OutOfRange(format!("extra root {c} must be positive")));
    }
    if *c.denom() == 1 && c.numer().is_even() {
        return Err(Error::OutOfRange(format!("extra root {c} coincides with a forced root")));
    }
    let mut norms: Vec<Rational> = (1..=k).map(|m| Rational::from(2 * m as u64)).collect();
    norms.push(c.clone());
    build_with_roots(&ctx.real(4), 0, norms, k + 1, ctx)
}

fn build_with_roots(n: &Float, eps: u32, norms: Vec<Rational>, terms: usize, ctx: &PrecisionContext) -> Result<EigenSingle> {
    if eps > 1 {
        return Err(Error::UnsupportedArgument(format!("eps must be 0 or 1, got {eps}")));
    }
    if norms.is_empty() {
        return Err(Error::OutOfRange("need at least one forced root".into()));
    }
    let e = eps as usize;
    let len = 2 * terms + e + 1;
    let basis: Arc<LaguerreBasis> = build_basis(n, len - 1, ctx)?;
    let rows: Vec<Vec<Float>> = norms
        .iter()
        .map(|u| basis.values(&ctx.rational(u), len).into_iter().skip(e).step_by(2).collect())
        .collect();
    let mut sol = match pin_and_solve(&rows, ctx) {
        Err(Error::SingularMatrix { .. }) => return Err(Error::DegenerateNullspace),
        other => other?,
    };
    let top = sol[sol.len() - 1].clone();
    if top.is_zero() {
        return Err(Error::DegenerateNullspace);
    }
    for c in sol.iter_mut() {
        *c /= &top;
    }
    let mut lag = vec![ctx.zero(); len];
    for (i, c) in sol.into_iter().enumerate() {
        lag[2 * i + e] = c;
    }
    let func = RadialFunction::from_laguerre(basis, lag)?;
    Ok(EigenSingle { k: norms.len(), eps, norms, func })
}

/// Closed form conjectured for the limit, evaluated at `u = |x|^2` (up to an
/// overall scale). Defined for `n` a multiple of 4 and `eps != n/4 (mod 2)`.
pub fn closed_form_u(n: u32, eps: u32, u: &Float, ctx: &PrecisionContext) -> Result<Float> {
    if n == 0 || n % 4 != 0 {
        return Err(Error::OutOfScope(format!("n = {n} is not a positive multiple of 4")));
    }
    if eps % 2 == (n / 4) % 2 {
        return Err(Error::OutOfScope(format!("eps = {eps} has the same parity as n/4 = {}", n / 4)));
    }
    let bits = ctx.bits();
    let pi = ctx.pi();
    let sqrt3 = ctx.real(3).sqrt();
    let half_pi_u = Float::with_val(bits, pi * u) / 2u32;
    let decay = Float::with_val(bits, -(Float::with_val(bits, pi * &sqrt3) * u / 2u32)).exp();
    let sine = Float::with_val(bits, half_pi_u.sin_ref());
    if n == 4 {
        let sinc = if u.is_zero() { ctx.one() } else { sine / &half_pi_u };
        return Ok(sinc * decay);
    }
    let nf = ctx.real(n);
    let factor = match n % 3 {
        0 => ctx.one(),
        1 => {
            let shift = Float::with_val(bits, &nf + 2u32) * &sqrt3 / Float::with_val(bits, pi * 6u32);
            let width = Float::with_val(bits, &nf + 2u32) / Float::with_val(bits, pi.square_ref()) / 6u32;
            Float::with_val(bits, u - &shift).square() - width
        }
        _ => {
            let shift = nf / Float::with_val(bits, pi * &sqrt3) / 2u32;
            Float::with_val(bits, u - &shift)
        }
    };
    Ok(sine * factor * decay)
}

/// [`closed_form_u`] at radii `|x|`.
pub fn closed_form_g(n: u32, eps: u32, samples: &[Float], ctx: &PrecisionContext) -> Result<Vec<Float>> {
    samples
        .iter()
        .map(|x| closed_form_u(n, eps, &Float::with_val(ctx.bits(), x.square_ref()), ctx))
        .collect()
}

/// The `u` values `0.5, 1.0, .., 6.0` without the even integers.
pub fn default_ratio_samples(ctx: &PrecisionContext) -> Vec<Float> {
    (1..=12u32).filter(|i| i % 4 != 0).map(|i| ctx.real(i) / 2u32).collect()
}

/// Largest relative deviation of `numeric / closed` from its median over the
/// sample values of `u`.
pub fn ratio_deviation(values: &[Float], closed: &[Float]) -> Result<f64> {
    let mut ratios: Vec<f64> = values
        .iter()
        .zip(closed)
        .map(|(a, b)| Float::with_val(a.prec(), a / b).to_f64())
        .collect();
    if ratios.is_empty() {
        return Err(Error::OutOfRange("no sample points".into()));
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    ratios.iter_mut().for_each(|r| *r = (*r / median - 1.0).abs());
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Builds `g^eps_{n,k}` and compares it with the closed form at `samples`
/// (values of `u`).
pub fn closed_form_ratio_test(n: u32, eps: u32, k: usize, samples: &[Float], ctx: &PrecisionContext) -> Result<f64> {
    let g = build_single(&ctx.real(n), k, eps, ctx)?;
    let values: Vec<Float> = samples.iter().map(|u| g.eval_u(u)).collect();
    let closed: Vec<Float> = samples.iter().map(|u| closed_form_u(n, eps, u, ctx)).collect::<Result<_>>()?;
    ratio_deviation(&values, &closed)
}

/// Which constant term to use in the extraneous quadratic factor
/// `pi^2 u^2 + b u + c0` with `b = c pi^2 - 2 pi sqrt 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtraRootForm {
    /// `c0 = c b`, as usually written down.
    Displayed,
    /// `c0 = c b + 2`, which is what the numerics converge to.
    Corrected,
}

/// Conjectured limit of the extra-root variant at `u`:
/// `g_4(u) (u - c) (pi^2 u^2 + b u + c0)`.
pub fn extra_root_closed_form(c: &Rational, u: &Float, form: ExtraRootForm, ctx: &PrecisionContext) -> Result<Float> {
    let bits = ctx.bits();
    let (b, c0) = extra_root_quadratic(c, form, ctx);
    let pi2 = Float::with_val(bits, ctx.pi().square_ref());
    let quad = Float::with_val(bits, &pi2 * u) * u + Float::with_val(bits, &b * u) + c0;
    let lin = Float::with_val(bits, u - ctx.rational(c));
    Ok(closed_form_u(4, 0, u, ctx)? * lin * quad)
}

/// `(b, c0)` of the extraneous quadratic factor `pi^2 u^2 + b u + c0`.
pub fn extra_root_quadratic(c: &Rational, form: ExtraRootForm, ctx: &PrecisionContext) -> (Float, Float) {
    let bits = ctx.bits();
    let cf = ctx.rational(c);
    let two_pi_sqrt3 = Float::with_val(bits, ctx.pi() * 2u32) * ctx.real(3).sqrt();
    let b = Float::with_val(bits, &cf * Float::with_val(bits, ctx.pi().square_ref())) - two_pi_sqrt3;
    let c0 = Float::with_val(bits, &cf * &b);
    match form {
        ExtraRootForm::Displayed => (b, c0),
        ExtraRootForm::Corrected => (b, c0 + 2u32),
    }
}

/// Discriminant of the extraneous quadratic factor; negative means the
/// extraneous roots are not real.
pub fn extra_root_discriminant(c: &Rational, form: ExtraRootForm, ctx: &PrecisionContext) -> Float {
    let bits = ctx.bits();
    let (b, c0) = extra_root_quadratic(c, form, ctx);
    let pi2 = Float::with_val(bits, ctx.pi().square_ref());
    Float::with_val(bits, b.square_ref()) - pi2 * c0 * 4u32
}

/// Ratio test of the extra-root variant against its conjectured limit.
/// Samples within 0.1 of `c` are skipped.
pub fn extra_root_ratio_test(
    c: &Rational,
    k: usize,
    samples: &[Float],
    form: ExtraRootForm,
    ctx: &PrecisionContext,
) -> Result<f64> {
    let g = extra_root_variant(c, k, ctx)?;
    extra_root_deviation(&g, c, samples, form)
}

/// Ratio deviation of an already built extra-root variant.
pub fn extra_root_deviation(g: &EigenSingle, c: &Rational, samples: &[Float], form: ExtraRootForm) -> Result<f64> {
    let ctx = g.ctx();
    let cf = ctx.rational(c);
    let keep: Vec<&Float> = samples
        .iter()
        .filter(|u| Float::with_val(ctx.bits(), *u - &cf).abs() > 0.1)
        .collect();
    let values: Vec<Float> = keep.iter().map(|u| g.eval_u(u)).collect();
    let closed: Vec<Float> = keep
        .iter()
        .map(|u| extra_root_closed_form(c, u, form, ctx))
        .collect::<Result<_>>()?;
    ratio_deviation(&values, &closed)
}

/// Root atlas of `g`; the side label is meaningless here.
pub fn single_atlas(g: &EigenSingle) -> Result<RootAtlas> {
    let ctx = g.ctx();
    let norms: Vec<Float> = g.norms.iter().map(|u| ctx.rational(u)).collect();
    root_atlas_with_norms(&g.func, &norms, g.k, ctx)
}

/// All roots of `r` in the `u` variable.
pub fn single_roots(g: &EigenSingle) -> Result<Vec<Complex>> {
    Ok(poly_roots(g.r_poly(), g.ctx())?.roots().to_vec())
}

/// The `count` negative real `u` roots closest to 0, ordered by `|u|`.
pub fn imaginary_roots(g: &EigenSingle, count: usize) -> Result<Vec<Float>> {
    let ctx = g.ctx();
    let tol = ctx.root_tolerance();
    // odd builds have a root that only reaches the origin as k grows
    let origin = ctx.pow10(-3);
    let mut out: Vec<Float> = single_roots(g)?
        .into_iter()
        .filter(|z| {
            let scale = Float::with_val(ctx.bits(), z.real().abs_ref()).max(&ctx.one());
            z.real().is_sign_negative()
                && Float::with_val(ctx.bits(), z.real().abs_ref()) > origin
                && Float::with_val(ctx.bits(), z.imag().abs_ref()) <= Float::with_val(ctx.bits(), &tol * &scale)
        })
        .map(|z| z.real().clone())
        .collect();
    out.sort_by(|a, b| b.partial_cmp(a).expect("finite roots"));
    out.dedup_by(|a, b| Float::with_val(a.prec(), &*a - &*b).abs() <= tol);
    out.truncate(count);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_case_by_hand() {
        let ctx = PrecisionContext::new(40).unwrap();
        let g = build_single(&ctx.real(4), 1, 0, &ctx).unwrap();
        // p_0 = 1, p_2(2) = L_2^1(4 pi); r = p_2 - p_2(2) p_0
        let basis = g.func().basis();
        let p2 = basis.values(&ctx.real(2), 3)[2].clone();
        let c = g.func().lag_coeffs();
        assert_eq!(c[2], 1);
        assert!(log10_abs(&(c[0].clone() + &p2)) < -35.0);
        assert!(g.eigenrelation_holds());
        assert!(g.forced_residual() < -30.0);
    }

    #[test]
    fn closed_forms_at_simple_points() {
        let ctx = PrecisionContext::new(40).unwrap();
        let two = ctx.real(2);
        assert!(log10_abs(&closed_form_u(4, 0, &two, &ctx).unwrap()) < -35.0);
        let one = ctx.one();
        let want = Float::with_val(ctx.bits(), -(Float::with_val(ctx.bits(), ctx.pi() * ctx.real(3).sqrt()) / 2u32)).exp();
        let got = closed_form_u(12, 0, &one, &ctx).unwrap();
        assert!(log10_abs(&(got - &want)) < -35.0);
        assert!(matches!(closed_form_u(8, 0, &one, &ctx), Err(Error::OutOfScope(_))));
        assert!(matches!(closed_form_u(6, 1, &one, &ctx), Err(Error::OutOfScope(_))));
    }

    #[test]
    fn even_integer_extra_root_is_rejected() {
        let ctx = PrecisionContext::new(40).unwrap();
        assert!(extra_root_variant(&Rational::from(2), 3, &ctx).is_err());
    }
}
