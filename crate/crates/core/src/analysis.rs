//! Measurements on a built pair: Taylor and Mellin data, the derivative
//! identity at the first root, the conjectured limiting ratio, complex root
//! atlases and convergence between consecutive builds.

use std::fmt::Write as _;

use rug::ops::Pow;
use rug::{Complex, Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::lattice::LatticeKind;
use crate::magic::{RadialPair, Side};
use crate::mpnum::{complex_abs, gamma_half_integer, log10_abs, poly_roots, to_decimal, PrecisionContext};
use crate::polybasis::RadialFunction;
use crate::schedule::RootSchedule;

/// Coefficients of `x^0, x^2, .., x^max_order` in the expansion of the side
/// about the origin, divided by its value at 0.
pub fn taylor_coefficients(side: &RadialFunction, max_order: usize) -> Result<Vec<Float>> {
    if max_order % 2 == 1 {
        return Err(Error::UnsupportedArgument(format!("odd Taylor order {max_order}")));
    }
    let ctx = side.ctx();
    let bits = ctx.bits();
    let q = side.mono().coeffs();
    let terms = max_order / 2 + 1;
    // (-pi)^b / b!
    let mut gauss = Vec::with_capacity(terms);
    let mut g = ctx.one();
    for b in 0..terms {
        if b > 0 {
            g *= ctx.pi();
            g /= b as u32;
            g = -g;
        }
        gauss.push(g.clone());
    }
    let at_zero = side.value_at_zero();
    if at_zero.is_zero() {
        return Err(Error::InternalInconsistency("side vanishes at the origin".into()));
    }
    let mut out = Vec::with_capacity(terms);
    for m in 0..terms {
        let mut acc = Float::new(bits);
        for a in 0..=m.min(q.len().saturating_sub(1)) {
            acc += Float::with_val(bits, &q[a] * &gauss[m - a]);
        }
        out.push(acc / &at_zero);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct MellinValue {
    pub s: Rational,
    pub value: Float,
}

fn check_half_integer(s: &Rational) -> Result<()> {
    if *s <= 0 || !(*s.denom() == 1 || *s.denom() == 2) {
        return Err(Error::UnsupportedArgument(format!("Mellin argument {s} must be a positive (half-)integer")));
    }
    Ok(())
}

/// `M(s) = int_0^inf f(x) x^(s-1) dx`, term by term:
/// `int x^(2m+s-1) e^(-pi x^2) dx = Gamma(s/2+m) / (2 pi^(s/2+m))`.
pub fn mellin_value(side: &RadialFunction, s: &Rational) -> Result<MellinValue> {
    check_half_integer(s)?;
    let ctx = side.ctx();
    let bits = ctx.bits();
    let half = Rational::from(s / 2u32);
    let mut gamma = gamma_of(&half, ctx)?;
    let a = ctx.rational(&half);
    let mut pi_pow = Float::with_val(bits, ctx.pi().pow(&a));
    let mut acc = Float::new(bits);
    for (m, q) in side.mono().coeffs().iter().enumerate() {
        if m > 0 {
            gamma *= Float::with_val(bits, &a + (m - 1) as u32);
            pi_pow *= ctx.pi();
        }
        acc += Float::with_val(bits, q * &gamma) / &pi_pow;
    }
    Ok(MellinValue { s: s.clone(), value: acc / 2u32 })
}

/// Exact recurrence at integers and half-integers, MPFR elsewhere.
fn gamma_of(x: &Rational, ctx: &PrecisionContext) -> Result<Float> {
    if *x.denom() <= 2 {
        gamma_half_integer(x, ctx)
    } else {
        Ok(ctx.rational(x).gamma())
    }
}

fn integral_dimension(n: &Float) -> Result<u32> {
    match n.to_u32_saturating() {
        Some(v) if Float::with_val(n.prec(), v) == *n => Ok(v),
        _ => Err(Error::UnsupportedArgument(format!("dimension {n} is not an integer"))),
    }
}

/// `|LHS - RHS| / |LHS|` for
/// `M_fhat(s) = pi^(n/2-s) Gamma(s/2) / Gamma((n-s)/2) M_f(n-s)`.
pub fn mellin_symmetry_check(pair: &RadialPair, s: &Rational) -> Result<Float> {
    let ctx = pair.ctx();
    let bits = ctx.bits();
    let n = integral_dimension(pair.n())?;
    let dual = Rational::from(n) - s;
    check_half_integer(s)?;
    check_half_integer(&dual)?;
    let lhs = mellin_value(pair.fhat(), s)?.value;
    let mf = mellin_value(pair.f(), &dual)?.value;
    let g_num = gamma_of(&Rational::from(s / 2u32), ctx)?;
    let g_den = gamma_of(&Rational::from(&dual / 2u32), ctx)?;
    let expo = ctx.rational(&(Rational::from((n, 2)) - s));
    let factor = Float::with_val(bits, ctx.pi().pow(&expo)) * g_num / g_den;
    let rhs = factor * mf;
    let diff = Float::with_val(bits, &lhs - &rhs).abs();
    Ok(diff / lhs.abs())
}

/// `rho = f'(r_1) N r_1 / (-n f^(0))`, predicted to tend to 1.
pub fn fprime_check(pair: &RadialPair, kissing: u64) -> Float {
    let ctx = pair.ctx();
    let bits = ctx.bits();
    let r1 = pair.schedule().roots(ctx).swap_remove(0);
    let d = pair.f().radial_derivative(&r1);
    let num = d * Float::with_val(bits, kissing) * &r1;
    let den = Float::with_val(bits, pair.n() * pair.fhat().value_at_zero());
    -(num / den)
}

fn horner_q(coeffs: &[i64], n: &Rational) -> Rational {
    coeffs.iter().rev().fold(Rational::new(), |acc, &c| acc * n + Integer::from(c))
}

const E8_NUM: [i64; 5] = [40320, -11200, 1184, -56, 1];
const LEECH_NUM: [i64; 9] = [
    2_574_499_479_552,
    -577_142_292_480,
    56_651_266_048,
    -3_180_064_256,
    111_652_352,
    -2_510_720,
    35_312,
    -284,
    1,
];
const LEECH_CUBIC: [i64; 4] = [-57024, 4480, -116, 1];

/// Conjectured limit of `f(0)/f^(0)` when forcing roots at the lattice's
/// vector lengths in dimension `n`, as an exact rational.
pub fn ratio_formula(n: &Rational, lattice: LatticeKind) -> Result<Rational> {
    let (lo, hi) = match lattice {
        LatticeKind::E8 => (0, 10),
        LatticeKind::Leech => (0, 26),
    };
    if *n <= lo || *n >= hi {
        return Err(Error::OutOfRange(format!("n = {n} outside ({lo}, {hi}) for {lattice}")));
    }
    let lin = |c: i64| Rational::from(n - Integer::from(c));
    let value = match lattice {
        LatticeKind::E8 => {
            let den = lin(10) * lin(14) * lin(18) * 16u32;
            horner_q(&E8_NUM, n) / den
        }
        LatticeKind::Leech => {
            let den = lin(26) * lin(34) * lin(38) * lin(42) * horner_q(&LEECH_CUBIC, n) * 32u32;
            horner_q(&LEECH_NUM, n) / den
        }
    };
    Ok(-value)
}

/// [`ratio_formula`] at a real dimension.
pub fn ratio_formula_real(n: &Float, lattice: LatticeKind, ctx: &PrecisionContext) -> Result<Float> {
    let exact = n
        .to_rational()
        .ok_or_else(|| Error::OutOfRange(format!("dimension {n} is not finite")))?;
    Ok(ctx.rational(&ratio_formula(&exact, lattice)?))
}

/// A located root with its multiplicity.
#[derive(Debug, Clone)]
pub struct AtlasRoot {
    pub z: Complex,
    pub multiplicity: usize,
    pub forced: bool,
}

#[derive(Debug, Clone)]
pub struct RootAtlas {
    pub side: Side,
    pub n: Float,
    pub k: usize,
    /// Roots of the polynomial in `u = |x|^2`.
    pub u_roots: Vec<AtlasRoot>,
    /// Both square roots of every `u` root.
    pub x_roots: Vec<AtlasRoot>,
    /// Smallest `|Im x|` over the non-real `x` roots.
    pub min_imag: Option<Float>,
}

impl RootAtlas {
    pub fn forced_mask(&self) -> Vec<bool> {
        self.u_roots.iter().map(|r| r.forced).collect()
    }

    /// CSV with columns `re,im,mult,forced,side` over the `x` roots.
    pub fn to_csv(&self, digits: usize) -> String {
        self.to_csv_labeled(digits, &self.side.to_string())
    }

    pub fn to_csv_labeled(&self, digits: usize, label: &str) -> String {
        let mut out = String::from("re,im,mult,forced,side\n");
        for r in &self.x_roots {
            writeln!(
                out,
                "{},{},{},{},{}",
                to_decimal(r.z.real(), digits),
                to_decimal(r.z.imag(), digits),
                r.multiplicity,
                r.forced,
                label
            )
            .expect("write to string");
        }
        out
    }

    /// Non-real `u` roots that lie on the negative real axis, i.e. purely
    /// imaginary `x` roots, as values of `u`.
    pub fn negative_real_u(&self) -> Vec<Float> {
        let bits = self.n.prec();
        self.u_roots
            .iter()
            .filter(|r| r.z.real().is_sign_negative() && Float::with_val(bits, r.z.imag().abs_ref()) < 1e-20)
            .map(|r| r.z.real().clone())
            .collect()
    }
}

/// Root atlas of one side of a pair.
pub fn root_atlas(pair: &RadialPair, side: Side) -> Result<RootAtlas> {
    let mut atlas = root_atlas_of(pair.side(side), pair.schedule(), pair.ctx())?;
    atlas.side = side;
    atlas.k = pair.k();
    Ok(atlas)
}

/// Roots of `side`'s polynomial, clustered at [`PrecisionContext::root_tolerance`] and
/// flagged as forced when they sit on a schedule norm.
pub fn root_atlas_of(side: &RadialFunction, schedule: &RootSchedule, ctx: &PrecisionContext) -> Result<RootAtlas> {
    root_atlas_with_norms(side, &schedule.norms_at(ctx), schedule.k(), ctx)
}

/// Root atlas of a radial function whose forced roots sit at the given `u`
/// values.
pub fn root_atlas_with_norms(side: &RadialFunction, norms: &[Float], k: usize, ctx: &PrecisionContext) -> Result<RootAtlas> {
    let bits = ctx.bits();
    let roots = poly_roots(side.mono(), ctx)?;
    let radius = ctx.root_tolerance();
    let real_tol = Float::with_val(bits, &radius);
    let mut u_roots = Vec::new();
    for c in roots.clusters(&radius) {
        let mut z = c.center;
        let scale = complex_abs(&z).max(&ctx.one());
        if Float::with_val(bits, z.imag().abs_ref()) <= Float::with_val(bits, &real_tol * &scale) {
            *z.mut_imag() = ctx.zero();
        }
        let forced = z.imag().is_zero()
            && norms.iter().any(|r| {
                let d = Float::with_val(bits, z.real() - r).abs();
                d <= Float::with_val(bits, &radius * r)
            });
        u_roots.push(AtlasRoot { z, multiplicity: c.multiplicity, forced });
    }
    let mut x_roots = Vec::with_capacity(2 * u_roots.len());
    for r in &u_roots {
        if r.z.is_zero() {
            x_roots.push(AtlasRoot { z: r.z.clone(), multiplicity: 2 * r.multiplicity, forced: r.forced });
            continue;
        }
        let mut x = Complex::with_val(bits, r.z.sqrt_ref());
        if r.z.imag().is_zero() {
            // exact branch for real u: real or purely imaginary x
            if r.z.real().is_sign_negative() {
                x = Complex::with_val(bits, (0, Float::with_val(bits, -r.z.real()).sqrt()));
            } else {
                x = Complex::with_val(bits, (r.z.real().clone().sqrt(), 0));
            }
        }
        let neg = Complex::with_val(bits, -&x);
        x_roots.push(AtlasRoot { z: x, multiplicity: r.multiplicity, forced: r.forced });
        x_roots.push(AtlasRoot { z: neg, multiplicity: r.multiplicity, forced: r.forced });
    }
    x_roots.sort_by(|a, b| {
        a.z.real()
            .partial_cmp(b.z.real())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.z.imag().partial_cmp(b.z.imag()).unwrap_or(std::cmp::Ordering::Equal))
    });
    let min_imag = x_roots
        .iter()
        .filter(|r| !r.z.imag().is_zero())
        .map(|r| Float::with_val(bits, r.z.imag().abs_ref()))
        .min_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(RootAtlas { side: Side::F, n: side.basis().n().clone(), k, u_roots, x_roots, min_imag })
}

/// Roots of either atlas without a partner in the other.
#[derive(Debug, Clone, Default)]
pub struct Unmatched {
    pub a: Vec<Complex>,
    pub b: Vec<Complex>,
}

/// Greedy nearest-neighbour matching of the distinct `x` roots: candidate
/// pairs closer than `tol` in both coordinates are taken in order of
/// distance, each root used at most once.
pub fn match_roots(a: &RootAtlas, b: &RootAtlas, tol: f64) -> Unmatched {
    let coords = |atlas: &RootAtlas| -> Vec<(f64, f64)> {
        atlas.x_roots.iter().map(|r| (r.z.real().to_f64(), r.z.imag().to_f64())).collect()
    };
    let pa = coords(a);
    let pb = coords(b);
    // sort b by real part so each a only scans a window
    let mut order: Vec<usize> = (0..pb.len()).collect();
    order.sort_by(|&i, &j| pb[i].0.total_cmp(&pb[j].0));
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &(re, im)) in pa.iter().enumerate() {
        let start = order.partition_point(|&j| pb[j].0 < re - tol);
        for &j in &order[start..] {
            let (rb, ib) = pb[j];
            if rb > re + tol {
                break;
            }
            if (ib - im).abs() <= tol {
                cands.push((((rb - re).powi(2) + (ib - im).powi(2)).sqrt(), i, j));
            }
        }
    }
    cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; pa.len()];
    let mut used_b = vec![false; pb.len()];
    for (_, i, j) in cands {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
        }
    }
    Unmatched {
        a: a.x_roots.iter().zip(&used_a).filter(|(_, u)| !**u).map(|(r, _)| r.z.clone()).collect(),
        b: b.x_roots.iter().zip(&used_b).filter(|(_, u)| !**u).map(|(r, _)| r.z.clone()).collect(),
    }
}

/// The points `x/10 + (y/10) i` for integers `0 <= x <= 50`, `0 <= y <= 2`.
pub fn default_grid(ctx: &PrecisionContext) -> Vec<Complex> {
    let mut out = Vec::with_capacity(153);
    for y in 0..=2u32 {
        for x in 0..=50u32 {
            let re = Float::with_val(ctx.bits(), x) / 10u32;
            let im = Float::with_val(ctx.bits(), y) / 10u32;
            out.push(Complex::with_val(ctx.bits(), (re, im)));
        }
    }
    out
}

/// Number of digits to which two values agree, `-log10 |a - b| / max(|a|, |b|)`.
/// Points where both values are below `zero` are forced roots and are skipped.
fn agreement(a: &Complex, b: &Complex, zero: f64, cap: f64) -> Option<f64> {
    let prec = a.prec().0;
    let scale = log10_abs(&complex_abs(a)).max(log10_abs(&complex_abs(b)));
    if scale < zero {
        return None;
    }
    let diff = complex_abs(&Complex::with_val(prec, a - b));
    if diff.is_zero() {
        return Some(cap);
    }
    Some((scale - log10_abs(&diff)).min(cap))
}

/// Per-point agreement between two builds on both sides. Skipped points hold
/// `None`.
#[derive(Debug, Clone)]
pub struct ConvergenceGrid {
    pub points: Vec<Complex>,
    pub f_digits: Vec<Option<f64>>,
    pub fhat_digits: Vec<Option<f64>>,
    pub minimum: f64,
}

impl ConvergenceGrid {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,f_digits,fhat_digits\n");
        let cell = |d: &Option<f64>| d.map(|v| format!("{v:.6}")).unwrap_or_default();
        for ((z, a), b) in self.points.iter().zip(&self.f_digits).zip(&self.fhat_digits) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                to_decimal(z.real(), 6),
                to_decimal(z.imag(), 6),
                cell(a),
                cell(b)
            ));
        }
        out
    }
}

pub fn convergence_grid(hi: &RadialPair, lo: &RadialPair, grid: &[Complex]) -> ConvergenceGrid {
    let digits = hi.ctx().digits().min(lo.ctx().digits()) as f64;
    let zero = -digits / 2.0;
    let mut f_digits = Vec::with_capacity(grid.len());
    let mut fhat_digits = Vec::with_capacity(grid.len());
    for z in grid {
        f_digits.push(agreement(&hi.f().eval(z), &lo.f().eval(z), zero, digits));
        fhat_digits.push(agreement(&hi.fhat().eval(z), &lo.fhat().eval(z), zero, digits));
    }
    let minimum = f_digits.iter().chain(&fhat_digits).flatten().copied().fold(digits, f64::min);
    ConvergenceGrid { points: grid.to_vec(), f_digits, fhat_digits, minimum }
}

/// Minimum agreement digits over the grid and both sides.
pub fn convergence_digits(hi: &RadialPair, lo: &RadialPair, grid: &[Complex]) -> f64 {
    convergence_grid(hi, lo, grid).minimum
}
