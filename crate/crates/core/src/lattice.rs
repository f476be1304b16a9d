//! E8 and Leech lattice data: vector lengths, kissing numbers and theta
//! series shell counts, plus truncated lattice sums.
//!
//! Both lattices are even unimodular, so every shell has norm `2j` and the
//! lattices already have covolume 1.

use std::fmt::Write as _;
use std::sync::RwLock;

use rug::{Assign, Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mpnum::{log10_abs, PrecisionContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    E8,
    Leech,
}

impl LatticeKind {
    pub fn dimension(self) -> u32 {
        match self {
            Self::E8 => 8,
            Self::Leech => 24,
        }
    }

    pub fn kissing(self) -> u64 {
        match self {
            Self::E8 => 240,
            Self::Leech => 196_560,
        }
    }

    /// Minimal norm (squared length): 2 for E8, 4 for Leech.
    pub fn min_norm(self) -> u32 {
        match self {
            Self::E8 => 2,
            Self::Leech => 4,
        }
    }

    /// The first `count` nonzero norms `l_1^2 < l_2^2 < ...`.
    pub fn norms(self, count: usize) -> Vec<Rational> {
        let skip = match self {
            Self::E8 => 0,
            Self::Leech => 1,
        };
        (1..=count).map(|m| Rational::from(2 * (m + skip) as u64)).collect()
    }

    pub fn for_dimension(n: u32) -> Option<Self> {
        match n {
            8 => Some(Self::E8),
            24 => Some(Self::Leech),
            _ => None,
        }
    }
}

impl std::fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::E8 => "e8",
            Self::Leech => "leech",
        })
    }
}

impl std::str::FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "e8" => Ok(Self::E8),
            "leech" => Ok(Self::Leech),
            other => Err(Error::Parse(format!("unknown lattice {other:?}"))),
        }
    }
}

/// Hexagonal lattice constants at unit density, for display only.
pub fn hexagonal_min_length(ctx: &PrecisionContext) -> Float {
    let r = ctx.rational(&Rational::from((4, 3)));
    r.sqrt().sqrt()
}

pub const HEXAGONAL_KISSING: u64 = 6;

/// A lattice together with lazily extended shell counts `N_j` (vectors of
/// norm `2j`, `j >= 1`).
#[derive(Debug)]
pub struct LatticeSpec {
    kind: LatticeKind,
    shells: RwLock<Vec<Integer>>,
}

impl Clone for LatticeSpec {
    fn clone(&self) -> Self {
        Self { kind: self.kind, shells: RwLock::new(self.shells.read().expect("shell lock").clone()) }
    }
}

impl LatticeSpec {
    pub fn new(kind: LatticeKind) -> Self {
        Self { kind, shells: RwLock::new(Vec::new()) }
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn dimension(&self) -> u32 {
        self.kind.dimension()
    }

    pub fn kissing(&self) -> u64 {
        self.kind.kissing()
    }

    pub fn min_length(&self, ctx: &PrecisionContext) -> Float {
        ctx.real(self.kind.min_norm()).sqrt()
    }

    /// `l_1 < ... < l_count`.
    pub fn vector_lengths(&self, count: usize, ctx: &PrecisionContext) -> Vec<Float> {
        self.kind.norms(count).iter().map(|r| ctx.rational(r).sqrt()).collect()
    }

    /// `N_1 .. N_max_j`.
    pub fn shell_counts(&self, max_j: usize) -> Result<Vec<Integer>> {
        self.ensure(max_j)?;
        Ok(self.shells.read().expect("shell lock")[..max_j].to_vec())
    }

    fn ensure(&self, max_j: usize) -> Result<()> {
        if self.shells.read().expect("shell lock").len() >= max_j {
            return Ok(());
        }
        let mut guard = self.shells.write().expect("shell lock");
        if guard.len() < max_j {
            // recomputing from scratch keeps the code simple; grow geometrically
            let target = max_j.max(2 * guard.len());
            *guard = match self.kind {
                LatticeKind::E8 => e8_counts(target),
                LatticeKind::Leech => leech_counts(target)?,
            };
        }
        Ok(())
    }

    /// `sum_{j >= 1} N_j w(2j)`, truncated once both the current term and a
    /// geometric estimate of the tail are below `10^-(digits+10)`.
    pub fn lattice_sum<W>(&self, weight: W, ctx: &PrecisionContext) -> Result<Float>
    where
        W: Fn(&Float) -> Float,
    {
        let bits = ctx.bits();
        let cutoff = -(ctx.digits() as f64 + 10.0);
        let max_shells = 10 * ctx.digits() as usize;
        let mut sum = Float::new(bits);
        let mut prev: Option<Float> = None;
        let mut term = Float::new(bits);
        let mut chunk = 64usize;
        let mut j = 1usize;
        while j <= max_shells {
            self.ensure(chunk.min(max_shells))?;
            let shells = self.shells.read().expect("shell lock");
            while j <= chunk.min(max_shells) {
                let count = &shells[j - 1];
                if *count == 0 {
                    j += 1;
                    continue;
                }
                let w = weight(&ctx.real(2 * j as u64));
                term.assign(&w * count);
                sum += &term;
                if let Some(p) = &prev {
                    let ratio = Float::with_val(53, &term / p).to_f64().abs();
                    let small = log10_abs(&term) < cutoff;
                    if small && ratio < 1.0 {
                        let tail = log10_abs(&term) + (ratio / (1.0 - ratio)).log10();
                        if tail < cutoff {
                            return Ok(sum);
                        }
                    }
                }
                prev = Some(term.clone());
                j += 1;
            }
            chunk *= 2;
        }
        Err(Error::NoDecay { shells: max_shells })
    }

    /// CSV with columns `j,norm,count`.
    pub fn shells_csv(&self, max_j: usize) -> Result<String> {
        let counts = self.shell_counts(max_j)?;
        let mut out = String::from("j,norm,count\n");
        for (i, c) in counts.iter().enumerate() {
            let j = i + 1;
            writeln!(out, "{j},{},{c}", 2 * j).expect("write to string");
        }
        Ok(out)
    }
}

/// `sigma_p(j)` for `j = 1..=max`, by a divisor sieve.
fn divisor_sums(max: usize, power: u32) -> Vec<Integer> {
    let mut out = vec![Integer::new(); max + 1];
    for d in 1..=max {
        let dp = Integer::from(Integer::u_pow_u(d as u32, power));
        let mut m = d;
        while m <= max {
            out[m] += &dp;
            m += d;
        }
    }
    out
}

fn e8_counts(max_j: usize) -> Vec<Integer> {
    let sigma = divisor_sums(max_j, 3);
    (1..=max_j).map(|j| Integer::from(&sigma[j] * 240u32)).collect()
}

/// Coefficients of `prod_{m >= 1} (1 - q^m)^24` up to `q^len-1`.
///
/// The Euler product is sparse (pentagonal numbers), so the 24th power is
/// taken with the power recurrence `i a_0 b_i = sum_k ((p+1)k - i) a_k b_{i-k}`.
fn eta24(len: usize) -> Vec<Integer> {
    let mut euler: Vec<(usize, i64)> = Vec::new();
    for m in 0i64.. {
        let mut any = false;
        for g in [m * (3 * m - 1) / 2, m * (3 * m + 1) / 2] {
            if (g as usize) < len {
                any = true;
                let sign = if m % 2 == 0 { 1 } else { -1 };
                euler.push((g as usize, sign));
            }
        }
        if !any {
            break;
        }
    }
    euler.sort_unstable();
    euler.dedup();
    let mut b = vec![Integer::new(); len];
    b[0] = Integer::from(1);
    let mut acc = Integer::new();
    for i in 1..len {
        acc.assign(0);
        for &(k, a) in euler.iter().skip(1) {
            if k > i {
                break;
            }
            let factor = 25 * k as i64 - i as i64;
            if factor != 0 {
                acc += Integer::from(&b[i - k] * (factor * a));
            }
        }
        b[i] = Integer::from(acc.div_exact_u_ref(i as u32));
    }
    b
}

/// Ramanujan `tau(1..=max)`.
pub fn ramanujan_tau(max: usize) -> Vec<Integer> {
    eta24(max)
}

fn leech_counts(max_j: usize) -> Result<Vec<Integer>> {
    let sigma = divisor_sums(max_j, 11);
    let tau = ramanujan_tau(max_j);
    (1..=max_j)
        .map(|j| {
            let diff = Integer::from(&sigma[j] - &tau[j - 1]) * 65520u32;
            if !diff.is_divisible_u(691) {
                return Err(Error::InternalInconsistency(format!("Leech shell {j} is not integral")));
            }
            Ok(diff.div_exact_u(691))
        })
        .collect()
}
