//! On-disk cache of built pairs.
//!
//! One file per build: a JSON header line, then the Laguerre coefficients of
//! the even component followed by the odd one, one decimal string per line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use magicfn::magic::RadialPair;
use magicfn::mpnum::{to_decimal, PrecisionContext};
use magicfn::schedule::RootSchedule;
use rug::Float;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FORMAT_VERSION: u32 = 1;
pub const CACHE_ENV: &str = "MAGICFN_CACHE_DIR";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CacheHeader {
    pub format_version: u32,
    pub n: String,
    pub k: usize,
    pub schedule: serde_json::Value,
    pub digits: u32,
    pub terms: usize,
}

#[derive(Debug, Clone)]
pub struct PolyCacheEntry {
    pub header: CacheHeader,
    pub q0: Vec<String>,
    pub q1: Vec<String>,
}

/// Schedule identity used in keys: everything but the rendered roots, which
/// depend on the digits they were printed at.
fn schedule_identity(schedule: &RootSchedule) -> serde_json::Value {
    let mut v = schedule.to_json(30);
    if let Some(obj) = v.as_object_mut() {
        obj.remove("roots");
    }
    v
}

pub fn cache_key(n: &str, schedule: &RootSchedule, digits: u32) -> String {
    let mut h = Sha256::new();
    h.update(n.as_bytes());
    h.update(b"\n");
    h.update(schedule_identity(schedule).to_string().as_bytes());
    h.update(b"\n");
    h.update(digits.to_string().as_bytes());
    h.update(b"\n");
    h.update(FORMAT_VERSION.to_string().as_bytes());
    hex::encode(h.finalize())
}

/// Enough decimal digits to reproduce a value at `bits` of precision exactly.
fn roundtrip_digits(bits: u32) -> usize {
    (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2
}

impl PolyCacheEntry {
    pub fn from_pair(n: &str, pair: &RadialPair) -> Self {
        let digits = roundtrip_digits(pair.ctx().bits());
        let fmt = |v: &[Float]| v.iter().map(|x| to_decimal(x, digits)).collect::<Vec<_>>();
        let q0 = fmt(pair.q0().lag_coeffs());
        let q1 = fmt(pair.q1().lag_coeffs());
        PolyCacheEntry {
            header: CacheHeader {
                format_version: FORMAT_VERSION,
                n: n.to_string(),
                k: pair.k(),
                schedule: schedule_identity(pair.schedule()),
                digits: pair.ctx().digits(),
                terms: q0.len(),
            },
            q0,
            q1,
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for line in self.q0.iter().chain(&self.q1) {
            out.push_str(line);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: CacheHeader = serde_json::from_str(lines.next().context("empty cache file")?)?;
        let body: Vec<String> = lines.map(str::to_string).collect();
        if body.len() != 2 * header.terms {
            bail!("cache body has {} lines, expected {}", body.len(), 2 * header.terms);
        }
        let (q0, q1) = body.split_at(header.terms);
        Ok(PolyCacheEntry { q0: q0.to_vec(), q1: q1.to_vec(), header })
    }

    /// Rebuilds the pair at the precision of `ctx`.
    pub fn to_pair(&self, n: &Float, schedule: &RootSchedule, ctx: &PrecisionContext) -> Result<RadialPair> {
        let parse = |v: &[String]| v.iter().map(|s| ctx.parse(s)).collect::<magicfn::Result<Vec<_>>>();
        Ok(RadialPair::from_components(n, schedule.clone(), parse(&self.q0)?, parse(&self.q1)?, ctx)?)
    }
}

#[derive(Debug, Clone)]
pub struct PolyCache {
    dir: PathBuf,
}

impl PolyCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).with_context(|| format!("creating cache directory {}", dir.display()))?;
        Ok(PolyCache { dir })
    }

    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => Ok(Some(Self::new(dir)?)),
            _ => Ok(None),
        }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.poly"))
    }

    /// An entry for the same `n` and schedule at `digits` or more, preferring
    /// the exact key and then the lowest sufficient precision.
    pub fn lookup(&self, n: &str, schedule: &RootSchedule, digits: u32) -> Result<Option<(String, PolyCacheEntry)>> {
        let key = cache_key(n, schedule, digits);
        if let Ok(text) = fs::read_to_string(self.path(&key)) {
            return Ok(Some((key, PolyCacheEntry::parse(&text)?)));
        }
        let identity = schedule_identity(schedule);
        let mut best: Option<(u32, PathBuf)> = None;
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("poly") {
                continue;
            }
            let Some(header) = read_header(&path) else { continue };
            if header.format_version == FORMAT_VERSION
                && header.n == n
                && header.schedule == identity
                && header.digits >= digits
                && best.as_ref().map_or(true, |(d, _)| header.digits < *d)
            {
                best = Some((header.digits, path));
            }
        }
        match best {
            Some((d, path)) => {
                let text = fs::read_to_string(&path)?;
                Ok(Some((cache_key(n, schedule, d), PolyCacheEntry::parse(&text)?)))
            }
            None => Ok(None),
        }
    }

    pub fn store(&self, entry: &PolyCacheEntry, schedule: &RootSchedule) -> Result<String> {
        let key = cache_key(&entry.header.n, schedule, entry.header.digits);
        let target = self.path(&key);
        let tmp = self.dir.join(format!(".{key}.{}.tmp", std::process::id()));
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(entry.to_text()?.as_bytes())?;
            file.sync_all()?;
        }
        fs::rename(&tmp, &target)?;
        Ok(key)
    }
}

fn read_header(path: &Path) -> Option<CacheHeader> {
    use std::io::BufRead;
    let file = fs::File::open(path).ok()?;
    let mut line = String::new();
    std::io::BufReader::new(file).read_line(&mut line).ok()?;
    serde_json::from_str(&line).ok()
}
