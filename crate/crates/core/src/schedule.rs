//! Forced root locations.
//!
//! Norms (squared root locations) are kept as exact rationals; square roots
//! are only taken when a caller asks for radii at some precision.

use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeKind;
use crate::mpnum::{to_decimal, PrecisionContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Naive,
    Modified,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Self::Naive),
            "modified" => Ok(Self::Modified),
            other => Err(Error::Parse(format!("unknown schedule kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Naive => "naive",
            Self::Modified => "modified",
        })
    }
}

/// Shape of the modified schedule: the leading `kept` fraction of the roots
/// stays put and the last norm is stretched by `stretch * l_k^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModifiedParams {
    pub kept: Rational,
    pub stretch: Rational,
}

impl Default for ModifiedParams {
    fn default() -> Self {
        Self { kept: Rational::from((2, 3)), stretch: Rational::from((1, 4)) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootSchedule {
    kind: ScheduleKind,
    lattice: LatticeKind,
    params: ModifiedParams,
    norms: Vec<Rational>,
}

impl RootSchedule {
    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn lattice(&self) -> LatticeKind {
        self.lattice
    }

    pub fn k(&self) -> usize {
        self.norms.len()
    }

    /// Exact squared root locations `r_1^2 < ... < r_k^2`.
    pub fn norms(&self) -> &[Rational] {
        &self.norms
    }

    pub fn norms_at(&self, ctx: &PrecisionContext) -> Vec<Float> {
        self.norms.iter().map(|r| ctx.rational(r)).collect()
    }

    pub fn roots(&self, ctx: &PrecisionContext) -> Vec<Float> {
        self.norms.iter().map(|r| ctx.rational(r).sqrt()).collect()
    }

    pub fn params(&self) -> &ModifiedParams {
        &self.params
    }

    /// Canonical JSON used for cache keys and reports.
    pub fn to_json(&self, digits: u32) -> serde_json::Value {
        let ctx = PrecisionContext::new(digits.max(PrecisionContext::MIN_DIGITS)).expect("valid digits");
        let roots: Vec<String> = self.roots(&ctx).iter().map(|r| to_decimal(r, digits as usize)).collect();
        let norms: Vec<String> = self.norms.iter().map(|r| r.to_string()).collect();
        let mut value = serde_json::json!({
            "kind": self.kind,
            "k": self.k(),
            "lattice": self.lattice,
            "norms": norms,
            "roots": roots,
        });
        if self.kind == ScheduleKind::Modified {
            value["kept"] = self.params.kept.to_string().into();
            value["stretch"] = self.params.stretch.to_string().into();
        }
        value
    }
}

/// The first `k` nonzero vector lengths of the lattice.
pub fn naive_schedule(lattice: LatticeKind, k: usize) -> Result<RootSchedule> {
    if k == 0 {
        return Err(Error::OutOfRange("a schedule needs at least one root".into()));
    }
    Ok(RootSchedule {
        kind: ScheduleKind::Naive,
        lattice,
        params: ModifiedParams::default(),
        norms: lattice.norms(k),
    })
}

pub fn modified_schedule(lattice: LatticeKind, k: usize) -> Result<RootSchedule> {
    modified_schedule_with(lattice, k, ModifiedParams::default())
}

/// `r_m^2 = l_m^2 + stretch * l_k^2 * ((m - F) / (k - F))^2` for `m >= F`,
/// where `F = floor(kept * k)`; earlier roots are the lattice lengths.
pub fn modified_schedule_with(lattice: LatticeKind, k: usize, params: ModifiedParams) -> Result<RootSchedule> {
    let mut schedule = naive_schedule(lattice, k)?;
    schedule.params = params.clone();
    if k <= 1 {
        return Ok(schedule);
    }
    if params.kept <= 0 {
        return Err(Error::DegenerateSchedule(format!("kept fraction {} is not positive", params.kept)));
    }
    let floor = Integer::from(params.kept.numer() * Integer::from(k)) / params.kept.denom();
    let first = floor
        .to_usize()
        .ok_or_else(|| Error::DegenerateSchedule(format!("kept fraction {} is out of range", params.kept)))?;
    if first >= k {
        return Err(Error::DegenerateSchedule(format!("k - floor({} k) = 0 for k = {k}", params.kept)));
    }
    if first < 1 {
        return Err(Error::DegenerateSchedule(format!(
            "floor({} k) = 0 for k = {k} would move the first root",
            params.kept
        )));
    }
    let last = schedule.norms[k - 1].clone();
    let span = Integer::from(k - first);
    for m in first..=k {
        let t = Rational::from((Integer::from(m - first), span.clone()));
        let offset = Rational::from(&params.stretch * &last) * t.clone() * t;
        schedule.norms[m - 1] += offset;
    }
    schedule.kind = ScheduleKind::Modified;
    if schedule.norms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::DegenerateSchedule("modified norms are not increasing".into()));
    }
    Ok(schedule)
}

pub fn schedule(lattice: LatticeKind, kind: ScheduleKind, k: usize) -> Result<RootSchedule> {
    match kind {
        ScheduleKind::Naive => naive_schedule(lattice, k),
        ScheduleKind::Modified => modified_schedule(lattice, k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> Rational {
        Rational::from((a, b))
    }

    #[test]
    fn naive_lists_lattice_norms() {
        let s = naive_schedule(LatticeKind::E8, 5).unwrap();
        assert_eq!(s.norms(), &[q(2, 1), q(4, 1), q(6, 1), q(8, 1), q(10, 1)]);
        let l = naive_schedule(LatticeKind::Leech, 1).unwrap();
        assert_eq!(l.norms(), &[q(4, 1)]);
    }

    #[test]
    fn modified_small_cases() {
        let s = modified_schedule(LatticeKind::E8, 3).unwrap();
        assert_eq!(s.norms(), &[q(2, 1), q(4, 1), q(15, 2)]);
        let s = modified_schedule(LatticeKind::E8, 6).unwrap();
        // F = 4: offsets 0, 12/4 * (1/2)^2, 12/4
        assert_eq!(s.norms()[3], q(8, 1));
        assert_eq!(s.norms()[4], Rational::from(10) + q(3, 4));
        assert_eq!(s.norms()[5], q(15, 1));
    }

    #[test]
    fn k_one_falls_back() {
        let s = modified_schedule(LatticeKind::E8, 1).unwrap();
        assert_eq!(s.kind(), ScheduleKind::Naive);
        assert_eq!(s.norms(), &[q(2, 1)]);
    }

    #[test]
    fn degenerate_parameters() {
        let params = ModifiedParams { kept: q(1, 1), stretch: q(1, 4) };
        assert!(matches!(
            modified_schedule_with(LatticeKind::E8, 4, params),
            Err(Error::DegenerateSchedule(_))
        ));
    }

    #[test]
    fn json_is_stable() {
        let s = modified_schedule(LatticeKind::Leech, 3).unwrap();
        let a = s.to_json(40).to_string();
        assert_eq!(a, s.clone().to_json(40).to_string());
        assert!(a.contains("\"kind\":\"modified\""));
        assert!(a.contains("\"lattice\":\"leech\""));
    }
}
