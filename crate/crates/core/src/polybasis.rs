//! Rescaled Laguerre eigenbasis of the radial Fourier transform.
//!
//! With `alpha = n/2 - 1` and `p_j(u) = L_j^alpha(2 pi u)`, the function
//! `p_j(|x|^2) exp(-pi |x|^2)` on `R^n` is a radial Fourier eigenfunction with
//! eigenvalue `(-1)^j`. A [`RadialFunction`] stores its polynomial part both in
//! this basis and in monomials of `u = |x|^2`.

use std::sync::Arc;

use rug::{Assign, Complex, Float};

use crate::error::{Error, Result};
use crate::mpnum::{BigPoly, PrecisionContext};

#[derive(Debug)]
pub struct LaguerreBasis {
    n: Float,
    alpha: Float,
    ctx: PrecisionContext,
    /// Monomial coefficients (in `u`) of `p_0 ..= p_max`.
    polys: Vec<Vec<Float>>,
}

impl LaguerreBasis {
    pub fn n(&self) -> &Float {
        &self.n
    }

    pub fn alpha(&self) -> &Float {
        &self.alpha
    }

    pub fn ctx(&self) -> &PrecisionContext {
        &self.ctx
    }

    pub fn max_degree(&self) -> usize {
        self.polys.len() - 1
    }

    pub fn poly(&self, j: usize) -> BigPoly {
        BigPoly::new(self.polys[j].clone())
    }

    /// `p_j(0) = binom(j + alpha, j)` for `j = 0 .. count`.
    pub fn values_at_zero(&self, count: usize) -> Vec<Float> {
        let bits = self.ctx.bits();
        let mut out = Vec::with_capacity(count);
        let mut acc = Float::with_val(bits, 1);
        for j in 0..count {
            if j > 0 {
                acc *= Float::with_val(bits, &self.alpha + j as u32);
                acc /= j as u32;
            }
            out.push(acc.clone());
        }
        out
    }

    /// `p_0(u) .. p_{count-1}(u)` by the three-term recurrence.
    pub fn values(&self, u: &Float, count: usize) -> Vec<Float> {
        laguerre_values(&self.alpha, &self.t_of(u), count, self.ctx.bits())
    }

    /// Values and `u`-derivatives, using `d/dt L_j^a = -L_{j-1}^{a+1}`.
    pub fn values_and_derivatives(&self, u: &Float, count: usize) -> (Vec<Float>, Vec<Float>) {
        let bits = self.ctx.bits();
        let t = self.t_of(u);
        let vals = laguerre_values(&self.alpha, &t, count, bits);
        let alpha1 = Float::with_val(bits, &self.alpha + 1u32);
        let shifted = laguerre_values(&alpha1, &t, count.saturating_sub(1), bits);
        let two_pi = Float::with_val(bits, self.ctx.pi() * 2u32);
        let mut ders = Vec::with_capacity(count);
        if count > 0 {
            ders.push(Float::new(bits));
        }
        for l in shifted {
            ders.push(-Float::with_val(bits, &two_pi * &l));
        }
        (vals, ders)
    }

    fn t_of(&self, u: &Float) -> Float {
        Float::with_val(self.ctx.bits(), self.ctx.pi() * u) * 2u32
    }

    /// Monomial form of `sum_j lag[j] p_j`.
    pub fn to_monomial(&self, lag: &[Float]) -> Result<BigPoly> {
        if lag.len() > self.polys.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} Laguerre coefficients for a basis of degree {}",
                lag.len(),
                self.max_degree()
            )));
        }
        let bits = self.ctx.bits();
        let mut out = vec![Float::new(bits); lag.len().max(1)];
        let mut tmp = Float::new(bits);
        for (j, c) in lag.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (i, pc) in self.polys[j].iter().enumerate() {
                tmp.assign(c * pc);
                out[i] += &tmp;
            }
        }
        Ok(BigPoly::new(out))
    }

    /// Laguerre coefficients of a monomial-form polynomial (back substitution
    /// against the triangular coefficient matrix of the basis).
    pub fn from_monomial(&self, mono: &BigPoly) -> Result<Vec<Float>> {
        let deg = mono.degree();
        if deg > self.max_degree() {
            return Err(Error::DimensionMismatch(format!(
                "polynomial of degree {deg} exceeds basis degree {}",
                self.max_degree()
            )));
        }
        let bits = self.ctx.bits();
        let mut rest: Vec<Float> = mono.coeffs().iter().map(|c| Float::with_val(bits, c)).collect();
        let mut lag = vec![Float::new(bits); deg + 1];
        let mut tmp = Float::new(bits);
        for j in (0..=deg).rev() {
            let c = Float::with_val(bits, &rest[j] / &self.polys[j][j]);
            for (i, pc) in self.polys[j].iter().enumerate().take(j + 1) {
                tmp.assign(&c * pc);
                rest[i] -= &tmp;
            }
            lag[j] = c;
        }
        Ok(lag)
    }

    /// Direct evaluation of `sum_j lag[j] p_j(u)` without the monomial form.
    pub fn eval_laguerre(&self, lag: &[Float], u: &Float) -> Float {
        let vals = self.values(u, lag.len());
        let mut acc = Float::new(self.ctx.bits());
        for (c, v) in lag.iter().zip(&vals) {
            acc += Float::with_val(self.ctx.bits(), c * v);
        }
        acc
    }
}

fn laguerre_values(alpha: &Float, t: &Float, count: usize, bits: u32) -> Vec<Float> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(Float::with_val(bits, 1));
    if count == 1 {
        return out;
    }
    out.push(Float::with_val(bits, alpha + 1u32) - t);
    let mut a = Float::new(bits);
    let mut b = Float::new(bits);
    for j in 1..count - 1 {
        // (j+1) L_{j+1} = (2j+1+alpha-t) L_j - (j+alpha) L_{j-1}
        a.assign(alpha + (2 * j + 1) as u32);
        a -= t;
        a *= &out[j];
        b.assign(alpha + j as u32);
        b *= &out[j - 1];
        a -= &b;
        a /= (j + 1) as u32;
        out.push(a.clone());
    }
    out
}

/// Laguerre basis in dimension `n` (not necessarily an integer) up to `max_degree`.
pub fn build_basis(n: &Float, max_degree: usize, ctx: &PrecisionContext) -> Result<Arc<LaguerreBasis>> {
    if *n <= 0 {
        return Err(Error::OutOfRange(format!("dimension must be positive, got {n}")));
    }
    let bits = ctx.bits();
    let n = Float::with_val(bits, n);
    let alpha = Float::with_val(bits, &n / 2u32) - 1u32;
    let two_pi = Float::with_val(bits, ctx.pi() * 2u32);

    let mut polys: Vec<Vec<Float>> = Vec::with_capacity(max_degree + 1);
    polys.push(vec![Float::with_val(bits, 1)]);
    if max_degree >= 1 {
        polys.push(vec![Float::with_val(bits, &alpha + 1u32), Float::with_val(bits, -&two_pi)]);
    }
    let mut scratch = Float::new(bits);
    for j in 1..max_degree {
        let lin = Float::with_val(bits, &alpha + (2 * j + 1) as u32);
        let back = Float::with_val(bits, &alpha + j as u32);
        let prev = &polys[j - 1];
        let cur = &polys[j];
        let mut next = vec![Float::new(bits); j + 2];
        for (i, c) in cur.iter().enumerate() {
            scratch.assign(&lin * c);
            next[i] += &scratch;
            scratch.assign(&two_pi * c);
            next[i + 1] -= &scratch;
        }
        for (i, c) in prev.iter().enumerate() {
            scratch.assign(&back * c);
            next[i] -= &scratch;
        }
        for c in next.iter_mut() {
            *c /= (j + 1) as u32;
        }
        polys.push(next);
    }
    Ok(Arc::new(LaguerreBasis { n, alpha, ctx: ctx.clone(), polys }))
}

/// `x -> q(|x|^2) exp(-pi |x|^2)` with `q` held in both bases.
#[derive(Debug, Clone)]
pub struct RadialFunction {
    basis: Arc<LaguerreBasis>,
    lag: Vec<Float>,
    mono: BigPoly,
}

impl RadialFunction {
    pub fn from_laguerre(basis: Arc<LaguerreBasis>, lag: Vec<Float>) -> Result<Self> {
        let mono = basis.to_monomial(&lag)?;
        Ok(Self { basis, lag, mono })
    }

    pub fn from_monomial(basis: Arc<LaguerreBasis>, mono: BigPoly) -> Result<Self> {
        let lag = basis.from_monomial(&mono)?;
        Ok(Self { basis, lag, mono })
    }

    pub fn basis(&self) -> &Arc<LaguerreBasis> {
        &self.basis
    }

    pub fn lag_coeffs(&self) -> &[Float] {
        &self.lag
    }

    pub fn mono(&self) -> &BigPoly {
        &self.mono
    }

    pub fn ctx(&self) -> &PrecisionContext {
        self.basis.ctx()
    }

    /// `q(0)`, which is also the value of the function at the origin.
    pub fn value_at_zero(&self) -> Float {
        self.mono.coeffs()[0].clone()
    }

    /// Fourier transform: negate the odd Laguerre coefficients.
    pub fn transform(&self) -> RadialFunction {
        let lag: Vec<Float> = self
            .lag
            .iter()
            .enumerate()
            .map(|(j, c)| if j % 2 == 1 { Float::with_val(c.prec(), -c) } else { c.clone() })
            .collect();
        let mono = self.basis.to_monomial(&lag).expect("same length as before");
        RadialFunction { basis: self.basis.clone(), lag, mono }
    }

    pub fn scaled(&self, factor: &Float) -> RadialFunction {
        let bits = self.ctx().bits();
        let lag = self.lag.iter().map(|c| Float::with_val(bits, c * factor)).collect();
        let mono = BigPoly::new(self.mono.coeffs().iter().map(|c| Float::with_val(bits, c * factor)).collect());
        RadialFunction { basis: self.basis.clone(), lag, mono }
    }

    /// `self + sign * other`, computed coefficientwise in both bases.
    pub fn combine(&self, other: &RadialFunction, subtract: bool) -> RadialFunction {
        let bits = self.ctx().bits();
        let lag = zip_longest(&self.lag, &other.lag, bits, subtract);
        let mono = BigPoly::new(zip_longest(self.mono.coeffs(), other.mono.coeffs(), bits, subtract));
        RadialFunction { basis: self.basis.clone(), lag, mono }
    }

    /// Value at a complex radial argument: `q(x^2) exp(-pi x^2)`.
    pub fn eval(&self, x: &Complex) -> Complex {
        let bits = self.ctx().bits();
        let u = Complex::with_val(bits, x.square_ref());
        let q = self.mono.eval_complex(&u);
        let mut g = Complex::with_val(bits, &u * self.ctx().pi());
        g = -g;
        g.exp_mut();
        q * g
    }

    pub fn eval_real(&self, x: &Float) -> Float {
        let bits = self.ctx().bits();
        let u = Float::with_val(bits, x.square_ref());
        self.eval_u(&u)
    }

    /// `q(u) exp(-pi u)` for real `u`.
    pub fn eval_u(&self, u: &Float) -> Float {
        let bits = self.ctx().bits();
        let q = self.mono.eval(u);
        let g = Float::with_val(bits, -(Float::with_val(bits, u * self.ctx().pi()))).exp();
        q * g
    }

    /// `d/dx [q(x^2) exp(-pi x^2)] = 2x (q'(x^2) - pi q(x^2)) exp(-pi x^2)`.
    pub fn radial_derivative(&self, x: &Float) -> Float {
        let bits = self.ctx().bits();
        let u = Float::with_val(bits, x.square_ref());
        let (q, dq) = self.mono.eval_with_derivative(&u);
        let inner = dq - Float::with_val(bits, &q * self.ctx().pi());
        let g = Float::with_val(bits, -(Float::with_val(bits, &u * self.ctx().pi()))).exp();
        inner * g * x * 2u32
    }
}

fn zip_longest(a: &[Float], b: &[Float], bits: u32, subtract: bool) -> Vec<Float> {
    let len = a.len().max(b.len());
    (0..len)
        .map(|i| {
            let mut acc = a.get(i).map_or_else(|| Float::new(bits), |x| Float::with_val(bits, x));
            if let Some(y) = b.get(i) {
                if subtract {
                    acc -= y;
                } else {
                    acc += y;
                }
            }
            acc
        })
        .collect()
}
