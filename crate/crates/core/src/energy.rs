//! Linear programming bounds for the Gaussian potential `exp(-c |x|^2)`.
//!
//! The auxiliary function `h(x) = q(|x|^2) exp(-pi |x|^2)` interpolates the
//! potential to second order at the modified root locations while `h^` has
//! double roots there. Since `q = q0 + q1` and `Tq = q0 - q1`, the conditions
//! split as `q0 = q1 = v/2` and `q0' = q1' = v'/2` with `v(u) = exp((pi-c)u)`.

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::lattice::{LatticeKind, LatticeSpec};
use crate::magic::RadialPair;
use crate::mpnum::{log10_abs, solve_linear_owned, to_decimal, PrecisionContext};
use crate::polybasis::build_basis;
use crate::schedule::{modified_schedule, RootSchedule};

#[derive(Debug, Clone)]
pub struct EnergyBuild {
    pub n: u32,
    pub c: Float,
    pub h: RadialPair,
    /// `h^(0) - h(0)`.
    pub bound: Float,
    /// `E_phi` of the lattice: `sum_j N_j exp(-2cj)`.
    pub lattice_energy: Float,
    /// `E_psi` for `psi(x) = |x|^2 phi(x)`.
    pub psi_energy: Float,
}

impl EnergyBuild {
    pub fn k(&self) -> usize {
        self.h.k()
    }

    pub fn schedule(&self) -> &RootSchedule {
        self.h.schedule()
    }

    pub fn ctx(&self) -> &PrecisionContext {
        self.h.ctx()
    }

    pub fn gap(&self) -> Float {
        Float::with_val(self.ctx().bits(), &self.lattice_energy - &self.bound)
    }

    pub fn hhat0(&self) -> Float {
        self.h.fhat().value_at_zero()
    }

    pub fn to_json(&self, digits: usize) -> Result<serde_json::Value> {
        Ok(serde_json::json!({
            "n": self.n,
            "c": to_decimal(&self.c, digits),
            "k": self.k(),
            "bound": to_decimal(&self.bound, digits),
            "lattice_energy": to_decimal(&self.lattice_energy, digits),
            "gap": to_decimal(&self.gap(), digits),
            "slope_discrepancy": to_decimal(&energy_slope_discrepancy(self), 10),
        }))
    }

    /// `phi(x) - h(x)` at radius `|x|^2 = u`.
    pub fn phi_minus_h(&self, u: &Float) -> Float {
        let bits = self.ctx().bits();
        let phi = Float::with_val(bits, -(Float::with_val(bits, &self.c * u))).exp();
        phi - self.h.f().eval_u(u)
    }
}

/// Builds `h` for `phi(x) = exp(-c |x|^2)` in dimension 8 or 24 with `k`
/// modified root locations.
pub fn build_h(n: u32, c: &Float, k: usize, ctx: &PrecisionContext) -> Result<EnergyBuild> {
    let lattice = LatticeKind::for_dimension(n)
        .ok_or_else(|| Error::UnsupportedArgument(format!("energy bounds need n = 8 or 24, got {n}")))?;
    if *c <= 0 {
        return Err(Error::OutOfRange(format!("steepness c = {c} must be positive")));
    }
    let schedule = modified_schedule(lattice, k)?;
    let h = build_interpolant(n, c, &schedule, ctx)?;
    let bits = ctx.bits();
    let bound = Float::with_val(bits, h.fhat().value_at_zero() - h.f().value_at_zero());
    let spec = LatticeSpec::new(lattice);
    let lattice_energy = spec.lattice_sum(|u| Float::with_val(bits, -(Float::with_val(bits, c * u))).exp(), ctx)?;
    let psi_energy = spec.lattice_sum(
        |u| Float::with_val(bits, -(Float::with_val(bits, c * u))).exp() * u,
        ctx,
    )?;
    Ok(EnergyBuild { n, c: Float::with_val(bits, c), h, bound, lattice_energy, psi_energy })
}

fn build_interpolant(n: u32, c: &Float, schedule: &RootSchedule, ctx: &PrecisionContext) -> Result<RadialPair> {
    let bits = ctx.bits();
    let k = schedule.k();
    let len = 4 * k;
    let basis = build_basis(&ctx.real(n), len - 1, ctx)?;
    let rate = Float::with_val(bits, ctx.pi() - c);
    let mut rows: [Vec<Vec<Float>>; 2] = [Vec::new(), Vec::new()];
    let mut rhs = Vec::with_capacity(2 * k);
    for u in schedule.norms_at(ctx) {
        let (vals, ders) = basis.values_and_derivatives(&u, len);
        for (eps, block) in rows.iter_mut().enumerate() {
            block.push(vals.iter().skip(eps).step_by(2).cloned().collect());
            block.push(ders.iter().skip(eps).step_by(2).cloned().collect());
        }
        let v = Float::with_val(bits, &rate * &u).exp() / 2u32;
        let dv = Float::with_val(bits, &v * &rate);
        rhs.push(v);
        rhs.push(dv);
    }
    let [even, odd] = rows;
    let mut comps = Vec::with_capacity(2);
    for (eps, block) in [even, odd].into_iter().enumerate() {
        let sol = solve_linear_owned(block, rhs.clone(), ctx)?;
        let mut lag = vec![ctx.zero(); len];
        for (i, x) in sol.into_iter().enumerate() {
            lag[2 * i + eps] = x;
        }
        comps.push(lag);
    }
    let q1 = comps.pop().expect("two components");
    let q0 = comps.pop().expect("two components");
    RadialPair::assemble(basis, schedule.clone(), q0, q1)
}

/// `|h^(0) - (2c/n) E_psi| / |h^(0)|`.
pub fn energy_slope_discrepancy(build: &EnergyBuild) -> Float {
    let bits = build.ctx().bits();
    let hhat0 = build.hhat0();
    let predicted = Float::with_val(bits, &build.c * 2u32) / build.n * &build.psi_energy;
    let diff = Float::with_val(bits, &hhat0 - &predicted).abs();
    diff / hhat0.abs()
}

/// The certificate `g = phi^ - h^` for the dual potential
/// `phi^(t) = (pi/c)^(n/2) exp(-pi^2 |t|^2 / c)`.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    /// `g(0) = (pi/c)^(n/2) - h^(0)`.
    pub g0: Float,
    /// `g^(0) = 1 - h(0)`.
    pub ghat0: Float,
    /// `g^(0) - g(0)`.
    pub bound: Float,
    /// `E_phi^` over the (self-dual) lattice.
    pub dual_energy: Float,
    /// `|(bound_h - E_phi) - (bound_g - E_phi^)|`.
    pub identity_residual: Float,
    dual_scale: Float,
    dual_rate: Float,
}

impl DualCertificate {
    /// `g(x)` at radius `|x|^2 = u`.
    pub fn eval_g(&self, build: &EnergyBuild, u: &Float) -> Float {
        let bits = build.ctx().bits();
        let phi_hat = Float::with_val(bits, -(Float::with_val(bits, &self.dual_rate * u))).exp() * &self.dual_scale;
        phi_hat - build.h.fhat().eval_u(u)
    }
}

pub fn duality_transform(build: &EnergyBuild) -> Result<DualCertificate> {
    let ctx = build.ctx();
    let bits = ctx.bits();
    let ratio = Float::with_val(bits, ctx.pi() / &build.c);
    let dual_scale = Float::with_val(bits, (&ratio).pow(build.n / 2));
    let dual_rate = Float::with_val(bits, ctx.pi() * &ratio);
    let g0 = Float::with_val(bits, &dual_scale - build.hhat0());
    let ghat0 = Float::with_val(bits, 1 - build.h.f().value_at_zero());
    let bound = Float::with_val(bits, &ghat0 - &g0);
    let lattice = LatticeSpec::new(LatticeKind::for_dimension(build.n).expect("checked at build time"));
    let dual_energy = lattice.lattice_sum(
        |u| Float::with_val(bits, -(Float::with_val(bits, &dual_rate * u))).exp() * &dual_scale,
        ctx,
    )?;
    let lhs = Float::with_val(bits, &build.bound - &build.lattice_energy);
    let rhs = Float::with_val(bits, &bound - &dual_energy);
    let identity_residual = Float::with_val(bits, lhs - rhs).abs();
    Ok(DualCertificate { g0, ghat0, bound, dual_energy, identity_residual, dual_scale, dual_rate })
}

/// Outcome of the sampled sign conditions `h <= phi` and `h^ >= 0`.
#[derive(Debug, Clone)]
pub struct EnergySigns {
    pub h_below_phi: bool,
    pub hhat_nonnegative: bool,
    pub samples: usize,
    /// Largest `log10 |phi - h|'` relative residual at the root locations.
    pub tangency_residual: f64,
}

impl EnergySigns {
    pub fn valid(&self) -> bool {
        self.h_below_phi && self.hhat_nonnegative
    }
}

/// Samples `phi - h` and `h^` on a geometric grid of `u = |x|^2` values out to
/// where both functions are below `10^-digits`, and checks the tangency of
/// `h` to `phi` at the root locations.
pub fn validate_energy_signs(build: &EnergyBuild) -> EnergySigns {
    let ctx = build.ctx();
    let bits = ctx.bits();
    let digits = ctx.digits() as f64;
    let norms = build.schedule().norms_at(ctx);
    let last = norms[norms.len() - 1].to_f64();
    let mut top = 2.0 * last;
    loop {
        let u = ctx.real(top);
        let h = build.h.f().eval_u(&u);
        let hh = build.h.fhat().eval_u(&u);
        let phi = log10_abs(&Float::with_val(bits, -(Float::with_val(bits, &build.c * &u))).exp());
        if log10_abs(&h).max(log10_abs(&hh)).max(phi) < -digits || top > 1e6 {
            break;
        }
        top *= 2.0;
    }
    // values at the tangency points are only meaningful to about half the digits
    let slack = -digits / 2.0;
    let samples = 1000;
    let start: f64 = 1e-4;
    let step = (top / start).ln() / (samples - 1) as f64;
    let mut h_ok = true;
    let mut hat_ok = true;
    let mut points = vec![ctx.zero()];
    points.extend((0..samples).map(|i| ctx.real(start * (step * i as f64).exp())));
    for u in &points {
        let gap = build.phi_minus_h(u);
        if gap.is_sign_negative() && log10_abs(&gap) > slack {
            h_ok = false;
        }
        let hh = build.h.fhat().eval_u(u);
        if hh.is_sign_negative() && log10_abs(&hh) > slack {
            hat_ok = false;
        }
    }
    let mut tangency = f64::NEG_INFINITY;
    for u in &norms {
        let gap = build.phi_minus_h(u);
        let scale = Float::with_val(bits, -(Float::with_val(bits, &build.c * u))).exp();
        tangency = tangency.max(log10_abs(&gap) - log10_abs(&scale));
    }
    EnergySigns { h_below_phi: h_ok, hhat_nonnegative: hat_ok, samples: points.len(), tangency_residual: tangency }
}
