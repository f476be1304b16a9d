use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use magicfn::lattice::LatticeKind;
use magicfn::magic::Side;
use magicfn::mpnum::PrecisionContext;
use magicfn::schedule::ScheduleKind;
use rug::{Float, Integer, Rational};

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(name = "magicfn", version, about = "Forced-root approximations to the sphere packing magic functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Density bound of one build.
    Bound(BoundArgs),
    /// One scalar per k, as CSV.
    Sweep(SweepArgs),
    /// Complex roots of f and/or f^.
    Atlas(AtlasArgs),
    /// Values at complex points, or agreement between two builds.
    Values(ValuesArgs),
    /// Taylor coefficients about 0.
    Taylor(TaylorArgs),
    /// Mellin transform values.
    Mellin(MellinArgs),
    /// Derivative at the first forced root against f^(0).
    Fprime(PairCmd),
    /// Conjectured f(0)/f^(0) for non-lattice dimensions.
    Ratio(RatioArgs),
    /// Energy bound for a Gaussian potential.
    Energy(EnergyArgs),
    /// Fourier eigenfunctions with forced single roots.
    Single(SingleArgs),
    /// Theta series shell counts.
    Shells(ShellsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Working precision in decimal digits (default 8k+75).
    #[arg(long, global = true)]
    pub digits: Option<u32>,
    /// Allow --digits below the default policy.
    #[arg(long, global = true)]
    pub force_digits: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Cache directory; overrides MAGICFN_CACHE_DIR.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub no_cache: bool,
}

impl Common {
    /// Precision for a build with `k` forced roots.
    pub fn context(&self, k: usize) -> Result<PrecisionContext> {
        let default = PrecisionContext::default_digits(k);
        let digits = match self.digits {
            Some(d) if d < default && !self.force_digits => {
                return Err(UsageError(format!(
                    "--digits {d} is below the default {default} for k = {k}; pass --force-digits to allow it"
                ))
                .into())
            }
            Some(d) => d,
            None => default,
        };
        Ok(PrecisionContext::new(digits)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    /// Dimension; any positive rational such as 8, 4.5 or 9/2.
    #[arg(long)]
    pub n: String,
    #[arg(long)]
    pub k: usize,
    /// Lattice whose vector lengths give the forced roots (default from n).
    #[arg(long)]
    pub lattice: Option<LatticeKind>,
    #[arg(long, default_value = "modified")]
    pub schedule: ScheduleKind,
}

#[derive(Debug, Args)]
pub struct PairCmd {
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SignsArg {
    Full,
    Sampled,
    Skip,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, value_enum, default_value = "full")]
    pub signs: SignsArg,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepTask {
    Bound,
    Taylor,
    Minimag,
    Fprime,
    Mellin,
    Slope,
    Convergence,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub n: String,
    /// Comma separated list of k.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ks: Vec<usize>,
    #[arg(long, value_enum)]
    pub task: SweepTask,
    #[arg(long)]
    pub lattice: Option<LatticeKind>,
    #[arg(long, default_value = "modified")]
    pub schedule: ScheduleKind,
    #[arg(long, default_value = "f")]
    pub side: Side,
    /// Taylor order (power of x).
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Mellin argument (default n/2).
    #[arg(long)]
    pub s: Option<String>,
    /// Gaussian steepness for slope.
    #[arg(long, default_value = "pi")]
    pub c: String,
    /// Offset of the comparison build for convergence.
    #[arg(long, default_value_t = 5)]
    pub step: usize,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Also write the rows as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AtlasSide {
    F,
    Fhat,
    Both,
}

#[derive(Debug, Args)]
pub struct AtlasArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, value_enum, default_value = "f")]
    pub side: AtlasSide,
    /// Matching tolerance between the two sides when --side both.
    #[arg(long, default_value_t = 1e-6)]
    pub match_tol: f64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Digits of the root coordinates in the CSV.
    #[arg(long, default_value_t = 20)]
    pub csv_digits: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ValuesArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Point `re,im` in the x plane; repeatable.
    #[arg(long = "at", allow_hyphen_values = true)]
    pub at: Vec<String>,
    /// Compare with the build at this k on the standard grid (or the --at points).
    #[arg(long)]
    pub compare_k: Option<usize>,
    /// Per-point agreement CSV when comparing.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TaylorArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, default_value = "f")]
    pub side: Side,
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MellinArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, default_value = "f")]
    pub side: Side,
    /// Integer or half-integer argument.
    #[arg(long)]
    pub s: String,
    /// Also check the functional equation relating the two sides at s.
    #[arg(long)]
    pub symmetry: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RatioArgs {
    #[arg(long)]
    pub n: String,
    #[arg(long)]
    pub lattice: LatticeKind,
    /// Compare with the build at this k.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[arg(long)]
    pub n: u32,
    /// Steepness of exp(-c |x|^2); decimal, rational, or a multiple of pi like 2pi.
    #[arg(long)]
    pub c: String,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub dual: bool,
    #[arg(long)]
    pub signs: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SingleArgs {
    #[arg(long)]
    pub n: String,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub eps: u32,
    /// Force roots at 4, 6, 8, .. instead of 2, 4, 6, ...
    #[arg(long)]
    pub leech: bool,
    /// Extra forced root for the four-dimensional variant.
    #[arg(long)]
    pub extra_root: Option<String>,
    /// Write the root atlas CSV here.
    #[arg(long)]
    pub atlas: Option<PathBuf>,
    /// Report this many negative real roots in u closest to 0.
    #[arg(long, default_value_t = 0)]
    pub imag_roots: usize,
    /// Compare with the conjectured closed form.
    #[arg(long)]
    pub closed_form: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ShellsArgs {
    #[arg(long)]
    pub lattice: LatticeKind,
    #[arg(long, default_value_t = 10)]
    pub max_j: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

/// Exact rational from `a/b`, an integer, or a decimal with optional exponent.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let bad = || UsageError(format!("not a rational number: {text:?}"));
    let t = text.trim();
    if t.contains('/') {
        return Rational::from_str(t).map_err(|_| bad().into());
    }
    let (mant, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (int_part, frac) = mant.split_once('.').unwrap_or((mant, ""));
    let digits = format!("{int_part}{frac}");
    let numer = Integer::from_str(&digits).map_err(|_| bad())?;
    let shift = exp - frac.len() as i32;
    let scale = Integer::from(Integer::u_pow_u(10, shift.unsigned_abs()));
    Ok(if shift >= 0 { Rational::from(numer * scale) } else { Rational::from((numer, scale)) })
}

/// `n` as a `u32` when it is a non-negative integer that fits.
pub fn integral(n: &Rational) -> Option<u32> {
    if *n.denom() == 1 {
        n.numer().to_u32()
    } else {
        None
    }
}

/// A real given as a rational, or as a rational multiple of pi (`pi`, `2pi`,
/// `2*pi`, `pi/2`).
pub fn parse_real(text: &str, ctx: &PrecisionContext) -> Result<Float> {
    let t = text.trim().replace(' ', "");
    if let Some(i) = t.find("pi") {
        let before = t[..i].trim_end_matches('*');
        let after = &t[i + 2..];
        let mut coef = if before.is_empty() { Rational::from(1) } else { parse_rational(before)? };
        if let Some(d) = after.strip_prefix('/') {
            coef /= parse_rational(d)?;
        } else if !after.is_empty() {
            return Err(UsageError(format!("cannot parse {text:?}")).into());
        }
        return Ok(ctx.rational(&coef) * ctx.pi());
    }
    Ok(ctx.rational(&parse_rational(&t)?))
}

/// A point `re,im` of the complex plane.
pub fn parse_point(text: &str) -> Result<(Rational, Rational)> {
    let (re, im) = text
        .split_once(',')
        .ok_or_else(|| UsageError(format!("point {text:?} is not of the form re,im")))?;
    Ok((parse_rational(re)?, parse_rational(im)?))
}
