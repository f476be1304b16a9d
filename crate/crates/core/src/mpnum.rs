//! Multiprecision substrate: working-precision policy, dense solves,
//! simultaneous polynomial root finding and half-integer Gamma values.
//!
//! Everything above this module works with [`rug::Float`] values at the
//! precision carried by a [`PrecisionContext`].

use std::cmp::Ordering;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Assign, Complex, Float, Rational};

use crate::error::{Error, Result};

const LOG2_10: f64 = std::f64::consts::LOG2_10;
const GUARD_BITS: u32 = 16;

/// Decimal working precision plus the constants every module needs at it.
#[derive(Debug, Clone)]
pub struct PrecisionContext {
    digits: u32,
    bits: u32,
    pi: Float,
}

impl PrecisionContext {
    pub const MIN_DIGITS: u32 = 30;

    pub fn new(digits: u32) -> Result<Self> {
        if digits < Self::MIN_DIGITS {
            return Err(Error::InvalidPrecision(digits));
        }
        let bits = digits_to_bits(digits);
        let pi = Float::with_val(bits, Constant::Pi);
        Ok(Self { digits, bits, pi })
    }

    /// The default policy for builds with `k` forced roots: `8k + 75` digits.
    pub fn default_digits(k: usize) -> u32 {
        8 * k as u32 + 75
    }

    pub fn for_roots(k: usize) -> Self {
        Self::new(Self::default_digits(k)).expect("default precision is above the minimum")
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn pi(&self) -> &Float {
        &self.pi
    }

    pub fn sqrt_pi(&self) -> Float {
        Float::with_val(self.bits, self.pi.sqrt_ref())
    }

    pub fn zero(&self) -> Float {
        Float::new(self.bits)
    }

    pub fn one(&self) -> Float {
        Float::with_val(self.bits, 1)
    }

    pub fn real<T>(&self, value: T) -> Float
    where
        Float: Assign<T>,
    {
        Float::with_val(self.bits, value)
    }

    pub fn complex<T>(&self, value: T) -> Complex
    where
        Complex: Assign<T>,
    {
        Complex::with_val(self.bits, value)
    }

    pub fn rational(&self, value: &Rational) -> Float {
        Float::with_val(self.bits, value)
    }

    pub fn parse(&self, text: &str) -> Result<Float> {
        let parsed = Float::parse(text.trim()).map_err(|e| Error::Parse(format!("{text:?}: {e}")))?;
        Ok(Float::with_val(self.bits, parsed))
    }

    /// `10^exponent` at working precision.
    pub fn pow10(&self, exponent: i32) -> Float {
        Float::with_val(self.bits, 10).pow(exponent)
    }

    /// Distance below which located roots are treated as real or as one
    /// multiple root. High-degree root finds lose about half the digits to
    /// conditioning and double roots split by the square root of that.
    pub fn root_tolerance(&self) -> Float {
        self.pow10(-(self.digits as i32 / 8))
    }

    /// The same context at a different number of digits.
    pub fn with_digits(&self, digits: u32) -> Result<Self> {
        Self::new(digits)
    }
}

pub fn digits_to_bits(digits: u32) -> u32 {
    (digits as f64 * LOG2_10).ceil() as u32 + GUARD_BITS
}

/// Decimal rendering with `digits` significant digits, locale independent.
pub fn to_decimal(x: &Float, digits: usize) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let s = x.to_string_radix(10, Some(digits.max(1)));
    // rug uses "e" for the exponent and "." as the separator regardless of locale
    normalize_exponent(&s)
}

fn normalize_exponent(s: &str) -> String {
    match s.split_once('e') {
        Some((mant, exp)) => {
            let exp: i64 = exp.parse().unwrap_or(0);
            // plain notation for moderate exponents keeps CSV output readable
            if (-6..=21).contains(&exp) {
                shift_decimal(mant, exp)
            } else {
                format!("{mant}e{exp}")
            }
        }
        None => s.to_string(),
    }
}

fn shift_decimal(mant: &str, exp: i64) -> String {
    let (sign, body) = match mant.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mant),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    let digits: String = format!("{int_part}{frac_part}");
    let point = int_part.len() as i64 + exp;
    let mut out = String::from(sign);
    if point <= 0 {
        out.push_str("0.");
        out.extend(std::iter::repeat('0').take((-point) as usize));
        out.push_str(&digits);
    } else if point as usize >= digits.len() {
        out.push_str(&digits);
        out.extend(std::iter::repeat('0').take(point as usize - digits.len()));
    } else {
        out.push_str(&digits[..point as usize]);
        out.push('.');
        out.push_str(&digits[point as usize..]);
    }
    out
}

/// `log10 |x|` as an `f64`; `-inf` for zero. Safe for exponents far outside `f64`.
pub fn log10_abs(x: &Float) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (m, e) = x.to_f64_exp();
    m.abs().log10() + e as f64 * std::f64::consts::LOG10_2
}

pub fn complex_abs(z: &Complex) -> Float {
    Float::with_val(z.prec().0, z.abs_ref())
}

/// Dense polynomial with real coefficients in ascending degree.
#[derive(Debug, Clone, PartialEq)]
pub struct BigPoly {
    coeffs: Vec<Float>,
}

impl BigPoly {
    pub fn new(mut coeffs: Vec<Float>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero(prec: u32) -> Self {
        Self { coeffs: vec![Float::new(prec)] }
    }

    pub fn coeffs(&self) -> &[Float] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Float> {
        self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn prec(&self) -> u32 {
        self.coeffs.first().map_or(64, |c| c.prec())
    }

    pub fn eval(&self, x: &Float) -> Float {
        let mut acc = Float::new(self.prec().max(x.prec()));
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn eval_complex(&self, z: &Complex) -> Complex {
        let mut acc = Complex::new(z.prec());
        for c in self.coeffs.iter().rev() {
            acc *= z;
            *acc.mut_real() += c;
        }
        acc
    }

    /// Value and first derivative by a single Horner pass.
    pub fn eval_with_derivative(&self, x: &Float) -> (Float, Float) {
        let prec = self.prec().max(x.prec());
        let mut p = Float::new(prec);
        let mut dp = Float::new(prec);
        for c in self.coeffs.iter().rev() {
            dp *= x;
            dp += &p;
            p *= x;
            p += c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> BigPoly {
        if self.coeffs.len() <= 1 {
            return BigPoly::zero(self.prec());
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| Float::with_val(c.prec(), c * i as u32))
            .collect();
        BigPoly::new(coeffs)
    }

    /// Monic-times-leading expansion of `lead * prod (u - z_i)`; used to check root sets.
    pub fn from_roots(lead: &Float, roots: &[Complex]) -> Vec<Complex> {
        let prec = lead.prec();
        let mut acc = vec![Complex::with_val(prec, lead)];
        for z in roots {
            let mut next = vec![Complex::new(prec); acc.len() + 1];
            for (i, a) in acc.iter().enumerate() {
                next[i + 1] += a;
                let prod = Complex::with_val(prec, a * z);
                next[i] -= prod;
            }
            acc = next;
        }
        acc
    }

    fn max_abs_coeff(&self) -> Float {
        let mut best = Float::new(self.prec());
        for c in &self.coeffs {
            if c.cmp_abs(&best) == Some(Ordering::Greater) {
                best.assign(c.abs_ref());
            }
        }
        best
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Pivot order is deterministic: largest magnitude, ties to the lowest row.
/// A pivot smaller than `10^-(digits-10)` times the largest entry of its
/// original row is reported as [`Error::SingularMatrix`].
pub fn solve_linear(a: &[Vec<Float>], b: &[Float], ctx: &PrecisionContext) -> Result<Vec<Float>> {
    solve_linear_owned(a.to_vec(), b.to_vec(), ctx)
}

pub fn solve_linear_owned(
    mut a: Vec<Vec<Float>>,
    mut b: Vec<Float>,
    ctx: &PrecisionContext,
) -> Result<Vec<Float>> {
    let n = a.len();
    if b.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{:?}, right-hand side has {} entries",
            n,
            a.first().map(Vec::len),
            b.len()
        )));
    }
    let bits = ctx.bits();
    let threshold = ctx.pow10(-(ctx.digits() as i32 - 10));
    let row_scale: Vec<Float> = a
        .iter()
        .map(|row| {
            let mut m = Float::new(bits);
            for x in row {
                if x.cmp_abs(&m) == Some(Ordering::Greater) {
                    m.assign(x.abs_ref());
                }
            }
            m
        })
        .collect();
    let mut perm_scale: Vec<usize> = (0..n).collect();

    let mut factor = Float::new(bits);
    let mut tmp = Float::new(bits);
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r][col].cmp_abs(&a[pivot][col]) == Some(Ordering::Greater) {
                pivot = r;
            }
        }
        let limit = Float::with_val(bits, &row_scale[perm_scale[pivot]] * &threshold);
        if a[pivot][col].is_zero() || a[pivot][col].cmp_abs(&limit) == Some(Ordering::Less) {
            return Err(Error::SingularMatrix { column: col });
        }
        if pivot != col {
            a.swap(pivot, col);
            b.swap(pivot, col);
            perm_scale.swap(pivot, col);
        }
        let (upper, lower) = a.split_at_mut(col + 1);
        let prow = &upper[col];
        let (b_upper, b_lower) = b.split_at_mut(col + 1);
        let pb = &b_upper[col];
        for (row, rb) in lower.iter_mut().zip(b_lower.iter_mut()) {
            if row[col].is_zero() {
                continue;
            }
            factor.assign(&row[col] / &prow[col]);
            for j in col + 1..n {
                tmp.assign(&factor * &prow[j]);
                row[j] -= &tmp;
            }
            tmp.assign(&factor * pb);
            *rb -= &tmp;
            row[col].assign(0);
        }
    }

    let mut x = vec![Float::new(bits); n];
    for i in (0..n).rev() {
        let mut acc = b[i].clone();
        for j in i + 1..n {
            tmp.assign(&a[i][j] * &x[j]);
            acc -= &tmp;
        }
        x[i] = acc / &a[i][i];
    }
    Ok(x)
}

/// Roots of a real polynomial, with repetition, sorted by (real, imaginary).
#[derive(Debug, Clone)]
pub struct RootSet {
    roots: Vec<Complex>,
}

/// A group of numerically coincident roots.
#[derive(Debug, Clone)]
pub struct RootCluster {
    pub center: Complex,
    pub multiplicity: usize,
}

impl RootSet {
    pub fn roots(&self) -> &[Complex] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Groups roots lying within `radius * max(1, |z|)` of each other.
    pub fn clusters(&self, radius: &Float) -> Vec<RootCluster> {
        let mut used = vec![false; self.roots.len()];
        let mut out = Vec::new();
        for i in 0..self.roots.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            let zi = &self.roots[i];
            let scale = complex_abs(zi).max(&Float::with_val(radius.prec(), 1));
            let tol = Float::with_val(radius.prec(), radius * &scale);
            let mut members = vec![i];
            for (j, zj) in self.roots.iter().enumerate().skip(i + 1) {
                if used[j] {
                    continue;
                }
                let d = complex_abs(&Complex::with_val(zi.prec(), zi - zj));
                if d <= tol {
                    used[j] = true;
                    members.push(j);
                }
            }
            let mut center = Complex::new(zi.prec());
            for &m in &members {
                center += &self.roots[m];
            }
            center /= members.len() as u32;
            out.push(RootCluster { center, multiplicity: members.len() });
        }
        out
    }
}

/// Approximation of one root (or a merged cluster) during the iteration.
struct Approx {
    z: Complex,
    multiplicity: u32,
    done: bool,
    /// Previous relative step and the number of sweeps without quadratic
    /// progress, used to detect a stalled merged root.
    last_step: f64,
    stalls: u32,
}

/// All roots of `p` by Aberth–Ehrlich simultaneous iteration.
///
/// Starting points come from the Newton polygon of `log |c_i|`, which places
/// approximations on circles whose radii follow the root moduli. The iteration
/// runs on a ladder of increasing precisions (eighth, quarter, half, full); each
/// rung starts from the previous rung's roots. Pairs of approximations that
/// collapse onto one another are merged and iterated with multiplicity 2,
/// which keeps convergence cubic at the forced double roots.
pub fn poly_roots(p: &BigPoly, ctx: &PrecisionContext) -> Result<RootSet> {
    let deg = p.degree();
    if deg == 0 {
        return Err(Error::UnsupportedArgument("polynomial of degree 0 has no roots".into()));
    }
    let lead = &p.coeffs()[deg];
    let scale = p.max_abs_coeff();
    let lead_floor = Float::with_val(ctx.bits(), &scale * ctx.pow10(-(ctx.digits() as i32 - 10)));
    if lead.cmp_abs(&lead_floor) != Some(Ordering::Greater) {
        return Err(Error::UnsupportedArgument("leading coefficient is negligible".into()));
    }

    // exact zero roots at the bottom of the coefficient list
    let zeros = p.coeffs().iter().take_while(|c| c.is_zero()).count();
    let reduced: Vec<Float> = p.coeffs()[zeros..].to_vec();
    let red_deg = reduced.len() - 1;

    let mut approx: Vec<Approx> = initial_guesses(&reduced, ctx.bits())
        .into_iter()
        .map(|z| Approx { z, multiplicity: 1, done: false, last_step: f64::INFINITY, stalls: 0 })
        .collect();

    if red_deg > 0 {
        let mut rungs = Vec::new();
        let mut b = ctx.bits();
        rungs.push(b);
        while b / 2 >= 256 && rungs.len() < 4 {
            b /= 2;
            rungs.push(b);
        }
        rungs.reverse();
        let cap = 50 * red_deg;
        let mut used = 0usize;
        for &bits in &rungs {
            let coeffs: Vec<Float> = reduced.iter().map(|c| Float::with_val(bits, c)).collect();
            for a in approx.iter_mut() {
                a.z.set_prec(bits);
                a.done = false;
                a.last_step = f64::INFINITY;
                a.stalls = 0;
            }
            used += aberth(&coeffs, &mut approx, bits, cap - used.min(cap))?;
        }
    }

    let mut roots: Vec<Complex> = Vec::with_capacity(deg);
    for _ in 0..zeros {
        roots.push(Complex::new(ctx.bits()));
    }
    for a in approx {
        for _ in 0..a.multiplicity {
            roots.push(Complex::with_val(ctx.bits(), &a.z));
        }
    }
    roots.sort_by(|x, y| {
        x.real()
            .partial_cmp(y.real())
            .unwrap_or(Ordering::Equal)
            .then(x.imag().partial_cmp(y.imag()).unwrap_or(Ordering::Equal))
    });
    Ok(RootSet { roots })
}

fn initial_guesses(coeffs: &[Float], bits: u32) -> Vec<Complex> {
    let deg = coeffs.len() - 1;
    let pts: Vec<(usize, f64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(i, c)| (i, log10_abs(c)))
        .collect();
    // upper convex hull of (i, log|c_i|)
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for &pt in &pts {
        while hull.len() >= 2 {
            let (i1, y1) = hull[hull.len() - 2];
            let (i2, y2) = hull[hull.len() - 1];
            let cross = (i2 as f64 - i1 as f64) * (pt.1 - y1) - (y2 - y1) * (pt.0 as f64 - i1 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let two_pi = std::f64::consts::TAU;
    let sigma = 0.7;
    let mut out = Vec::with_capacity(deg);
    for (seg, w) in hull.windows(2).enumerate() {
        let (i1, y1) = w[0];
        let (i2, y2) = w[1];
        let count = i2 - i1;
        let log_r = (y1 - y2) / count as f64;
        let radius = Float::with_val(bits, 10).pow(Float::with_val(bits, log_r));
        for j in 0..count {
            let theta = two_pi * j as f64 / count as f64 + two_pi * seg as f64 / deg as f64 + sigma;
            let re = Float::with_val(bits, &radius * theta.cos());
            let im = Float::with_val(bits, &radius * theta.sin());
            out.push(Complex::with_val(bits, (re, im)));
        }
    }
    out
}

/// One rung of the Aberth iteration at `bits` of precision. Returns sweeps used.
fn aberth(coeffs: &[Float], approx: &mut Vec<Approx>, bits: u32, cap: usize) -> Result<usize> {
    let deg = coeffs.len() - 1;
    let low = 64u32;
    let eps_log2 = -(bits as i64) + 8 + (deg as f64).log2().ceil() as i64;
    let abs_coeffs: Vec<Float> = coeffs.iter().map(|c| Float::with_val(low, c.abs_ref())).collect();

    let mut p = Complex::new(bits);
    let mut dp = Complex::new(bits);
    let mut diff = Complex::new(bits);
    let mut corr = Complex::new(bits);
    let mut sweeps = 0usize;
    let mut nearest: Vec<(usize, Float)> = Vec::new();

    while approx.iter().any(|a| !a.done) {
        if sweeps >= cap {
            return Err(Error::NoConvergence {
                iterations: sweeps,
                unconverged: approx.iter().filter(|a| !a.done).count(),
            });
        }
        sweeps += 1;
        nearest.clear();
        nearest.resize(approx.len(), (usize::MAX, Float::with_val(low, rug::float::Special::Infinity)));

        for i in 0..approx.len() {
            // Aberth sum at low precision; the differences themselves are exact.
            let mut s_re = Float::new(low);
            let mut s_im = Float::new(low);
            for j in 0..approx.len() {
                if j == i {
                    continue;
                }
                diff.assign(&approx[i].z - &approx[j].z);
                let dr = Float::with_val(low, diff.real());
                let di = Float::with_val(low, diff.imag());
                let norm = Float::with_val(low, dr.square_ref()) + Float::with_val(low, di.square_ref());
                if norm.is_zero() {
                    continue;
                }
                let dist = Float::with_val(low, norm.sqrt_ref());
                if dist < nearest[i].1 {
                    nearest[i] = (j, dist);
                }
                if approx[i].done {
                    continue;
                }
                let m = approx[j].multiplicity;
                let inv = Float::with_val(low, m) / norm;
                s_re += Float::with_val(low, &dr * &inv);
                s_im -= Float::with_val(low, &di * &inv);
            }
            if approx[i].done {
                continue;
            }

            let z = &approx[i].z;
            p.assign(0);
            dp.assign(0);
            let mut bound = Float::new(low);
            let zabs = Float::with_val(low, z.abs_ref());
            for c in coeffs.iter().rev() {
                dp *= z;
                dp += &p;
                p *= z;
                *p.mut_real() += c;
            }
            for c in abs_coeffs.iter().rev() {
                bound *= &zabs;
                bound += c;
            }
            let pabs = Float::with_val(low, p.abs_ref());
            // backward error: z is a root of a polynomial perturbed at rounding level
            let mut noise = bound.clone();
            noise <<= eps_log2 as i32;
            if pabs <= noise {
                approx[i].done = true;
                continue;
            }
            if dp.is_zero() {
                continue;
            }
            // z <- z - m / (p'/p - S)
            corr.assign(&dp / &p);
            let s = Complex::with_val(bits, (&s_re, &s_im));
            corr -= &s;
            if corr.is_zero() {
                approx[i].done = true;
                continue;
            }
            let mut step = Complex::with_val(bits, corr.recip_ref());
            step *= approx[i].multiplicity;
            approx[i].z -= &step;
            let step_abs = Float::with_val(low, step.abs_ref());
            let zabs_new = Float::with_val(low, approx[i].z.abs_ref()).to_f64().max(f64::MIN_POSITIVE);
            let rel = step_abs.to_f64() / zabs_new;
            if rel <= (-(bits as f64) + 4.0).exp2() {
                approx[i].done = true;
            } else if approx[i].multiplicity > 1 {
                // A merged pair that is really two roots a distance d apart
                // wanders at scale d instead of converging; accept it there.
                if rel <= (-(bits as f64) / 8.0).exp2() && rel > 0.25 * approx[i].last_step {
                    approx[i].stalls += 1;
                    if approx[i].stalls >= 3 {
                        approx[i].done = true;
                    }
                }
            }
            approx[i].last_step = rel;
        }
        merge_double_roots(coeffs, approx, &nearest, bits);
    }
    Ok(sweeps)
}

/// Merges mutually-nearest pairs that sit much closer to each other than to
/// anything else and whose centroid has a Newton step smaller than their gap.
fn merge_double_roots(coeffs: &[Float], approx: &mut Vec<Approx>, nearest: &[(usize, Float)], bits: u32) {
    let n = approx.len();
    if n < 3 {
        return;
    }
    let low = 64u32;
    let mut remove = vec![false; n];
    for i in 0..n {
        let (j, ref dij) = nearest[i];
        if j == usize::MAX || j <= i || remove[i] || remove[j] || nearest[j].0 != i {
            continue;
        }
        if approx[i].multiplicity + approx[j].multiplicity > 2 {
            continue;
        }
        // separation from every third approximation
        let mut third = Float::with_val(low, rug::float::Special::Infinity);
        for (k, a) in approx.iter().enumerate() {
            if k == i || k == j {
                continue;
            }
            let d = Float::with_val(low, Complex::with_val(low, &approx[i].z - &a.z).abs_ref());
            if d < third {
                third = d;
            }
        }
        let ratio = Float::with_val(low, dij / &third);
        if ratio > 1e-3 {
            continue;
        }
        let mut c = Complex::with_val(bits, &approx[i].z + &approx[j].z);
        c /= 2u32;
        let mut p = Complex::new(bits);
        let mut dp = Complex::new(bits);
        for coef in coeffs.iter().rev() {
            dp *= &c;
            dp += &p;
            p *= &c;
            *p.mut_real() += coef;
        }
        let newton = if dp.is_zero() {
            Float::new(low)
        } else {
            Float::with_val(low, Complex::with_val(bits, &p / &dp).abs_ref())
        };
        if newton < *dij {
            approx[i].z = c;
            approx[i].multiplicity += approx[j].multiplicity;
            approx[i].done = false;
            approx[i].last_step = f64::INFINITY;
            approx[i].stalls = 0;
            remove[j] = true;
        }
    }
    let mut idx = 0;
    approx.retain(|_| {
        let keep = !remove[idx];
        idx += 1;
        keep
    });
}

/// `Gamma(s)` for positive integers and half-integers by upward recurrence.
pub fn gamma_half_integer(s: &Rational, ctx: &PrecisionContext) -> Result<Float> {
    let den = s.denom();
    if *s <= 0 || !(*den == 1 || *den == 2) {
        return Err(Error::UnsupportedArgument(format!(
            "Gamma({s}) is only available for positive integers and half-integers"
        )));
    }
    let mut acc;
    let mut x;
    if *den == 1 {
        acc = ctx.one();
        x = Rational::from(1);
    } else {
        acc = ctx.sqrt_pi();
        x = Rational::from((1, 2));
    }
    while x < *s {
        acc *= ctx.rational(&x);
        x += 1;
    }
    Ok(acc)
}
