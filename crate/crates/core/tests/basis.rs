use std::sync::Arc;

use magicfn::mpnum::{log10_abs, BigPoly, PrecisionContext};
use magicfn::polybasis::{build_basis, LaguerreBasis, RadialFunction};
use proptest::prelude::*;
use rug::ops::Pow;
use rug::{Complex, Float};

fn diff(a: &Float, b: &Float) -> f64 {
    log10_abs(&Float::with_val(a.prec(), a - b))
}

/// Composite Simpson rule on `[a, b]` with `m` (even) intervals.
fn simpson(f: impl Fn(&Float) -> Float, a: f64, b: f64, m: u32, bits: u32) -> Float {
    let h = Float::with_val(bits, b - a) / m;
    let mut acc = f(&Float::with_val(bits, a)) + f(&Float::with_val(bits, b));
    for i in 1..m {
        let x = Float::with_val(bits, &h * i) + a;
        let w = if i % 2 == 1 { 4u32 } else { 2u32 };
        acc += f(&x) * w;
    }
    acc * h / 3u32
}

fn basis8(max: usize) -> Arc<LaguerreBasis> {
    let ctx = PrecisionContext::new(60).unwrap();
    build_basis(&ctx.real(8), max, &ctx).unwrap()
}

#[test]
fn first_polynomials() {
    let b = basis8(4);
    let ctx = b.ctx().clone();
    let p0 = b.poly(0);
    assert_eq!(p0.coeffs(), &[ctx.one()][..]);
    let p1 = b.poly(1);
    assert_eq!(p1.coeffs()[0], 4);
    let two_pi = Float::with_val(ctx.bits(), ctx.pi() * 2u32);
    assert!(diff(&p1.coeffs()[1], &(-two_pi)) < -55.0);
}

#[test]
fn laguerre_orthogonality_by_quadrature() {
    // int_0^inf L_i^3(t) L_j^3(t) t^3 e^-t dt = delta_ij Gamma(i + 4) / i!
    let b = basis8(4);
    let ctx = b.ctx().clone();
    let bits = ctx.bits();
    let two_pi = Float::with_val(bits, ctx.pi() * 2u32);
    let lag = |j: usize, t: &Float| b.poly(j).eval(&Float::with_val(bits, t / &two_pi));
    let weight = |t: &Float| Float::with_val(bits, t.pow(3u32)) * Float::with_val(bits, -t).exp();
    let cross = simpson(|t| lag(2, t) * lag(4, t) * weight(t), 0.0, 90.0, 40000, bits);
    assert!(log10_abs(&cross) < -9.0, "cross term {cross}");
    let norm = simpson(|t| lag(2, t) * lag(2, t) * weight(t), 0.0, 90.0, 40000, bits);
    assert!(diff(&norm, &ctx.real(60)) < -9.0, "norm {norm}");
}

/// `J_3(z)` from its power series.
fn bessel_j3(z: &Float) -> Float {
    let bits = z.prec();
    let half = Float::with_val(bits, z / 2u32);
    let h2 = Float::with_val(bits, half.square_ref());
    let mut term = Float::with_val(bits, (&half).pow(3u32)) / 6u32;
    let mut acc = term.clone();
    for m in 1..400u32 {
        term *= &h2;
        term /= m * (m + 3);
        term = -term;
        acc += &term;
        if log10_abs(&term) < -60.0 {
            break;
        }
    }
    acc
}

#[test]
fn eigenfunctions_under_the_hankel_transform() {
    // For radial f on R^8: f^(s) = 2 pi s^-3 int_0^inf f(r) J_3(2 pi r s) r^4 dr.
    let ctx = PrecisionContext::new(60).unwrap();
    let bits = ctx.bits();
    let basis = build_basis(&ctx.real(8), 4, &ctx).unwrap();
    let s = ctx.real(0.8);
    let two_pi_s = Float::with_val(bits, ctx.pi() * 2u32) * &s;
    for j in 0..=4usize {
        let mut lag = vec![ctx.zero(); j + 1];
        lag[j] = ctx.one();
        let f = RadialFunction::from_laguerre(basis.clone(), lag).unwrap();
        let integral = simpson(
            |r| f.eval_real(r) * bessel_j3(&Float::with_val(bits, &two_pi_s * r)) * Float::with_val(bits, r.pow(4u32)),
            0.0,
            7.0,
            4000,
            bits,
        );
        let hat = integral * Float::with_val(bits, ctx.pi() * 2u32) / Float::with_val(bits, (&s).pow(3u32));
        let mut want = f.eval_real(&s);
        if j % 2 == 1 {
            want = -want;
        }
        assert!(diff(&hat, &want) < -9.0, "j = {j}: {hat} vs {want}");
        assert_eq!(f.transform().eval_real(&s), want);
    }
}

#[test]
fn transform_signs() {
    let b = basis8(3);
    let ctx = b.ctx().clone();
    let f = RadialFunction::from_laguerre(b.clone(), vec![ctx.one(), ctx.zero(), ctx.zero()]).unwrap();
    assert_eq!(f.transform().lag_coeffs(), f.lag_coeffs());
    let g = RadialFunction::from_laguerre(b, vec![ctx.zero(), ctx.one(), ctx.zero()]).unwrap();
    let t = g.transform();
    assert_eq!(t.lag_coeffs()[1], -1);
    assert!(t.lag_coeffs()[0].is_zero() && t.lag_coeffs()[2].is_zero());
}

#[test]
fn self_dual_gaussian_in_one_dimension() {
    let ctx = PrecisionContext::new(40).unwrap();
    let b = build_basis(&ctx.real(1), 2, &ctx).unwrap();
    let f = RadialFunction::from_laguerre(b, vec![ctx.one()]).unwrap();
    let t = f.transform();
    assert_eq!(t.lag_coeffs(), f.lag_coeffs());
    let x = ctx.real(0.3);
    let gauss = Float::with_val(ctx.bits(), -(Float::with_val(ctx.bits(), x.square_ref()) * ctx.pi())).exp();
    assert!(diff(&t.eval_real(&x), &gauss) < -35.0);
}

#[test]
fn values_and_derivatives() {
    let b = basis8(5);
    let ctx = b.ctx().clone();
    let f = RadialFunction::from_laguerre(b, vec![ctx.real(2), ctx.real(-1), ctx.real(0.5)]).unwrap();
    assert_eq!(f.eval(&Complex::new(ctx.bits())).real(), &f.value_at_zero());
    assert!(f.radial_derivative(&ctx.zero()).is_zero());

    let g = RadialFunction::from_laguerre(f.basis().clone(), vec![ctx.one()]).unwrap();
    let want = Float::with_val(ctx.bits(), -(Float::with_val(ctx.bits(), ctx.pi() * 2u32))) * Float::with_val(ctx.bits(), -ctx.pi()).exp();
    assert!(diff(&g.radial_derivative(&ctx.one()), &want) < -55.0);

    // central difference with step 10^-20
    let x = ctx.real(1.3);
    let h = ctx.pow10(-20);
    let up = f.eval_real(&Float::with_val(ctx.bits(), &x + &h));
    let down = f.eval_real(&Float::with_val(ctx.bits(), &x - &h));
    let fd = (up - down) / Float::with_val(ctx.bits(), &h * 2u32);
    assert!(diff(&fd, &f.radial_derivative(&x)) < -18.0);
}

proptest! {
    #[test]
    fn transform_is_an_involution(coeffs in prop::collection::vec(-1000i32..1000, 1..12), n in 1u32..30) {
        let ctx = PrecisionContext::new(50).unwrap();
        let b = build_basis(&ctx.real(n), coeffs.len(), &ctx).unwrap();
        let lag: Vec<Float> = coeffs.iter().map(|&c| ctx.real(c) / 7u32).collect();
        let f = RadialFunction::from_laguerre(b, lag).unwrap();
        let back = f.transform().transform();
        prop_assert_eq!(back.lag_coeffs(), f.lag_coeffs());
    }

    #[test]
    fn monomial_round_trip(coeffs in prop::collection::vec(-1000i32..1000, 1..12)) {
        let ctx = PrecisionContext::new(60).unwrap();
        let b = build_basis(&ctx.real(24), coeffs.len(), &ctx).unwrap();
        let mono = BigPoly::new(coeffs.iter().map(|&c| ctx.real(c)).collect());
        let lag = b.from_monomial(&mono).unwrap();
        let back = b.to_monomial(&lag).unwrap();
        for (x, y) in back.coeffs().iter().zip(mono.coeffs()) {
            prop_assert!(diff(x, y) < -40.0);
        }
    }
}
