//! Flat `key = value` experiment configs.
//!
//! Lines are `key = value`; `#` starts a comment; lists are comma separated.
//! Decimal numbers are read as exact rationals (`0.4` is `2/5`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use sha2::{Digest, Sha256};

use retlab_core::ergodic_averaging::{Observable, TestPoint, TestSystem};
use retlab_core::exact_arith::{CfSource, CfStream, DigitSource, DigitStream, RealPoint, RotationAngle};
use retlab_core::return_sequences::ReturnSequence;
use retlab_core::source_dynamics::markov::MarkovChain;
use retlab_core::source_dynamics::{SourcePoint, SourceSystem, TargetSet};
use retlab_core::target_families::TargetFamily;
use retlab_core::verification::RateModel;

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parsed key/value pairs plus the hash of the source text.
#[derive(Clone, Debug)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    sha256: String,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key = value", i + 1)))?;
            let k = k.trim().to_string();
            if values.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(bad(format!("line {}: duplicate key {k}", i + 1)));
            }
        }
        let sha256 = format!("{:x}", Sha256::digest(text.as_bytes()));
        Ok(RawConfig { values, sha256 })
    }

    pub fn sha256(&self) -> &str {
        &self.sha256
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_number(v).ok_or_else(|| bad(format!("{key}: cannot parse {v:?}"))),
        }
    }

    pub fn rational(&self, key: &str, default: Option<&str>) -> Result<BigRational> {
        let v = match (self.get(key), default) {
            (Some(v), _) | (None, Some(v)) => v,
            (None, None) => return Err(bad(format!("missing key {key}"))),
        };
        parse_rational(v).ok_or_else(|| bad(format!("{key}: {v:?} is not a rational")))
    }

    pub fn real(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_rational(v)
                .and_then(|q| q.to_f64())
                .ok_or_else(|| bad(format!("{key}: {v:?} is not a number"))),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                split_list(v)
                    .map(|s| s.parse::<T>().map_err(|_| bad(format!("{key}: bad element {s:?}"))))
                    .collect()
            })
            .transpose()
    }
}

/// Integers may be written with `_` separators or as `1e6`.
fn parse_number<T: FromStr>(v: &str) -> Option<T> {
    let clean = v.replace('_', "");
    if let Ok(x) = clean.parse::<T>() {
        return Some(x);
    }
    let (m, e) = clean.split_once(['e', 'E'])?;
    let m: u64 = m.parse().ok()?;
    let e: u32 = e.parse().ok()?;
    m.checked_mul(10u64.checked_pow(e)?)?.to_string().parse().ok()
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// `3`, `-2/5`, `0.125`, `1e-3`.
pub fn parse_rational(v: &str) -> Option<BigRational> {
    let v = v.trim();
    if let Some((n, d)) = v.split_once('/') {
        let n = BigInt::from_str(n.trim()).ok()?;
        let d = BigInt::from_str(d.trim()).ok()?;
        return (!d.is_zero()).then(|| BigRational::new(n, d));
    }
    let (mantissa, exp) = match v.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (v, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let num = BigInt::from_str(&format!("{int}{frac}")).ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut q = BigRational::from_integer(num);
    if scale >= 0 {
        q *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        q /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -q } else { q })
}

/// `golden`, `seeded`, or `periodic:1,2` (optionally `prefix:3;periodic:1,2`).
fn parse_cf(v: &str, seed: u64) -> Result<CfStream> {
    let v = v.trim();
    if v == "golden" {
        return Ok(CfStream::golden());
    }
    if v == "seeded" {
        return Ok(CfStream::new(CfSource::SeededUniform, seed)?);
    }
    let mut prefix = Vec::new();
    let mut period = Vec::new();
    for part in v.split(';') {
        let (tag, list) = part.split_once(':').ok_or_else(|| bad(format!("bad continued fraction {v:?}")))?;
        let xs = split_list(list)
            .map(|s| s.parse::<u64>().map_err(|_| bad(format!("bad partial quotient {s:?}"))))
            .collect::<Result<Vec<u64>>>()?;
        match tag.trim() {
            "prefix" => prefix = xs,
            "periodic" => period = xs,
            t => return Err(bad(format!("unknown continued fraction tag {t:?}"))),
        }
    }
    if period.is_empty() {
        return Err(bad("an irrational angle needs a non-empty period"));
    }
    Ok(CfStream::new(CfSource::Periodic { prefix, period }, seed)?)
}

fn angle(raw: &RawConfig, key: &str) -> Result<Arc<RotationAngle>> {
    let seed = raw.parsed("angle_seed", 0u64)?;
    let cf = parse_cf(raw.get(key).unwrap_or("golden"), seed)?;
    Ok(Arc::new(RotationAngle::new(cf)?))
}

/// Rows separated by `;`, entries by whitespace or commas.
pub fn parse_chain(v: &str) -> Result<MarkovChain> {
    let rows = v
        .split(';')
        .map(|row| {
            row.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| parse_rational(s).ok_or_else(|| bad(format!("bad chain entry {s:?}"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarkovChain::new(rows)?)
}

fn chain(raw: &RawConfig, default: &str) -> Result<Arc<MarkovChain>> {
    let text = match (raw.get("chain"), raw.get("chain_file")) {
        (Some(v), _) => v.to_string(),
        (None, Some(path)) => std::fs::read_to_string(path).map_err(|e| bad(format!("chain_file {path}: {e}")))?,
        (None, None) => default.to_string(),
    };
    let rows: Vec<&str> = text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty()).collect();
    Ok(Arc::new(parse_chain(&rows.join(";"))?))
}

fn event(raw: &RawConfig) -> Result<BTreeSet<usize>> {
    Ok(raw.list::<usize>("event")?.unwrap_or_else(|| vec![1]).into_iter().collect())
}

pub fn thue_morse(len: usize) -> Vec<u32> {
    (0..len).map(|k| (k as u32).count_ones() % 2).collect()
}

/// How a return sequence is produced.
#[derive(Clone, Debug)]
pub enum SequenceChoice {
    Returns,
    Bernoulli { a: f64, c: f64 },
}

#[derive(Clone, Debug)]
pub enum PointChoice {
    Seeded,
    Digits(Vec<u32>),
    Rational(BigRational),
}

#[derive(Clone, Debug)]
pub enum XChoice {
    Seeded,
    Residue(u64),
    Rational(BigRational),
    /// `y + q` for a rotation source observed on the same rotation
    Translate(BigRational),
}

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub raw: RawConfig,
    pub source: SourceSystem,
    pub family: TargetFamily,
    pub sequence: SequenceChoice,
    pub y: PointChoice,
    pub test_system: Option<TestSystem>,
    pub observable: Option<Observable>,
    pub x: XChoice,
    pub seeds: Vec<u64>,
    pub n_max: u64,
    pub k_max: u64,
    pub gamma: f64,
    pub epsilon: f64,
    pub horizon: u64,
}

const DEFAULT_CHAIN: &str = "3/4 1/4; 1/4 3/4";

impl ExperimentConfig {
    pub fn from_raw(raw: RawConfig, seed_override: Option<u64>) -> Result<Self> {
        let source = match raw.get("source").unwrap_or("power") {
            "power" => SourceSystem::power_map(raw.parsed("p", 2u32)?)?,
            "gauss" => SourceSystem::GaussMap,
            "rotation" => SourceSystem::RotationMap(angle(&raw, "alpha_cf")?),
            "markov" => SourceSystem::MarkovShift {
                chain: chain(&raw, DEFAULT_CHAIN)?,
                event: event(&raw)?,
            },
            s => return Err(bad(format!("unknown source {s:?}"))),
        };
        let a = raw.rational("a", Some("2/5"))?;
        let family = match raw.get("target").unwrap_or("shrinking") {
            "shrinking" => TargetFamily::shrinking_interval(raw.rational("c", Some("1"))?, a.clone())?,
            "gauss_shrinking" => TargetFamily::gauss_shrinking(raw.rational("b", Some("2"))?, a.clone())?,
            "ball" => TargetFamily::centered_ball(a.clone())?,
            "constant" => {
                let set = if let SourceSystem::MarkovShift { event, .. } = &source {
                    TargetSet::Symbols(event.clone())
                } else {
                    let bounds = raw.get("target_set").unwrap_or("0,1");
                    let parts: Vec<&str> = split_list(bounds).collect();
                    let [lo, hi] = parts[..] else {
                        return Err(bad("target_set must be lo,hi"));
                    };
                    let lo = parse_rational(lo).ok_or_else(|| bad("target_set: bad lower end"))?;
                    let hi = parse_rational(hi).ok_or_else(|| bad("target_set: bad upper end"))?;
                    TargetSet::interval(lo, hi)
                };
                TargetFamily::constant(set)?
            }
            t => return Err(bad(format!("unknown target {t:?}"))),
        };
        family.check_compatible(&source)?;

        let sequence = match raw.get("sequence").unwrap_or("returns") {
            "returns" => SequenceChoice::Returns,
            "bernoulli" => SequenceChoice::Bernoulli {
                a: a.to_f64().unwrap_or(f64::NAN),
                c: raw.real("c", 1.0)?,
            },
            s => return Err(bad(format!("unknown sequence {s:?}"))),
        };

        let y = match raw.get("y").unwrap_or("seeded") {
            "seeded" => PointChoice::Seeded,
            v => {
                if let Some(list) = v.strip_prefix("digits:") {
                    let ds = split_list(list)
                        .map(|s| s.parse::<u32>().map_err(|_| bad(format!("bad digit {s:?}"))))
                        .collect::<Result<Vec<_>>>()?;
                    PointChoice::Digits(ds)
                } else if let Some(n) = v.strip_prefix("thue-morse:") {
                    let len = n.trim().parse::<usize>().map_err(|_| bad("thue-morse length"))?;
                    PointChoice::Digits(thue_morse(len))
                } else if let Some(q) = v.strip_prefix("rational:") {
                    PointChoice::Rational(parse_rational(q).ok_or_else(|| bad("y: bad rational"))?)
                } else {
                    return Err(bad(format!("unknown y {v:?}")));
                }
            }
        };

        let test_system = match raw.get("test_system") {
            None => None,
            Some("cyclic") => Some(TestSystem::cyclic(raw.parsed("k", 2u64)?, raw.parsed("j", 1i64)?)?),
            Some("rotation") => Some(TestSystem::IrrationalRotation(angle(&raw, "beta_cf")?)),
            Some("power") => Some(TestSystem::power(raw.parsed("test_p", 2u32)?)?),
            Some(t) => return Err(bad(format!("unknown test_system {t:?}"))),
        };
        let observable = match raw.get("observable") {
            None => None,
            Some("indicator") => Some(Observable::closed_indicator(
                raw.rational("lo", Some("0"))?,
                raw.rational("hi", Some("1/4"))?,
            )),
            Some("character") => Some(Observable::Character(raw.parsed("m", 1i64)?)),
            Some("table") => {
                let values = match (raw.list::<f64>("table")?, raw.get("table_file")) {
                    (Some(v), _) => v,
                    (None, Some(path)) => read_table(path)?,
                    (None, None) => return Err(bad("table observable needs table or table_file")),
                };
                Some(Observable::Table(values))
            }
            Some(o) => return Err(bad(format!("unknown observable {o:?}"))),
        };
        let x = match raw.get("x").unwrap_or("seeded") {
            "seeded" => XChoice::Seeded,
            v => {
                if let Some(r) = v.strip_prefix("residue:") {
                    XChoice::Residue(r.trim().parse().map_err(|_| bad("x: bad residue"))?)
                } else if let Some(q) = v.strip_prefix("rational:") {
                    XChoice::Rational(parse_rational(q).ok_or_else(|| bad("x: bad rational"))?)
                } else if let Some(q) = v.strip_prefix("y+") {
                    XChoice::Translate(parse_rational(q).ok_or_else(|| bad("x: bad translation"))?)
                } else {
                    return Err(bad(format!("unknown x {v:?}")));
                }
            }
        };

        let seeds = match seed_override {
            Some(s) => vec![s],
            None => match raw.list::<u64>("seeds")? {
                Some(s) if !s.is_empty() => s,
                Some(_) => return Err(bad("seeds list is empty")),
                None => {
                    let base = raw.parsed("seed_base", 1u64)?;
                    let count = raw.parsed("seed_count", 1u64)?;
                    (base..base + count).collect()
                }
            },
        };

        let gamma = raw.real("gamma", 1.1)?;
        if !(gamma > 1.0 && gamma <= 2.0) {
            return Err(bad("gamma must lie in (1, 2]"));
        }
        let epsilon = raw.real("epsilon", 0.1)?;
        let a_f = a.to_f64().unwrap_or(f64::NAN);
        if !(epsilon > 0.0 && epsilon < 1.0 - 2.0 * a_f) {
            return Err(bad("epsilon must lie in (0, 1 - 2a)"));
        }
        if a.is_negative() || a.is_zero() || a >= BigRational::new(BigInt::one(), BigInt::from(2)) {
            return Err(bad("a must lie in (0, 1/2)"));
        }

        Ok(ExperimentConfig {
            source,
            family,
            sequence,
            y,
            test_system,
            observable,
            x,
            seeds,
            n_max: raw.parsed("n_max", 100_000u64)?,
            k_max: raw.parsed("k_max", 1000u64)?,
            gamma,
            epsilon,
            horizon: raw.parsed("horizon", retlab_core::return_sequences::DEFAULT_SCAN_HORIZON)?,
            raw,
        })
    }

    pub fn a(&self) -> f64 {
        self.family.exponent()
    }

    /// The seeded source point `y`.
    pub fn source_point(&self, seed: u64) -> Result<SourcePoint> {
        Ok(match (&self.y, &self.source) {
            (PointChoice::Seeded, s) => SourcePoint::seeded(s, seed)?,
            (PointChoice::Digits(ds), SourceSystem::PowerMap(p)) => {
                SourcePoint::Digits(DigitStream::new(*p, DigitSource::FixedList(ds.clone()), seed)?)
            }
            (PointChoice::Rational(q), SourceSystem::PowerMap(p)) => {
                SourcePoint::Digits(DigitStream::new(*p, DigitSource::Expansion(q.clone()), seed)?)
            }
            (PointChoice::Rational(q), SourceSystem::RotationMap(_)) => SourcePoint::Real(RealPoint::rational(q.clone())),
            _ => return Err(bad("y representation does not match the source")),
        })
    }

    pub fn sequence(&self, seed: u64) -> Result<ReturnSequence> {
        let seq = match &self.sequence {
            SequenceChoice::Returns => {
                ReturnSequence::return_times(self.source.clone(), self.family.clone(), self.source_point(seed)?)?
            }
            SequenceChoice::Bernoulli { a, c } => ReturnSequence::bernoulli(*a, *c, seed)?,
        };
        Ok(seq.with_horizon(self.horizon))
    }

    pub fn test_system(&self) -> Result<&TestSystem> {
        self.test_system.as_ref().ok_or_else(|| bad("missing key test_system"))
    }

    pub fn observable(&self) -> Result<&Observable> {
        self.observable.as_ref().ok_or_else(|| bad("missing key observable"))
    }

    /// The point `x` of the test system for a seed.
    pub fn test_point(&self, seed: u64) -> Result<TestPoint> {
        let sys = self.test_system()?;
        let x_seed = seed ^ 0x5851_f42d_4c95_7f2d;
        Ok(match (&self.x, sys) {
            (XChoice::Residue(r), TestSystem::CyclicRotation { .. }) => TestPoint::Residue(*r),
            (XChoice::Seeded, TestSystem::CyclicRotation { k, .. }) => TestPoint::Residue(x_seed % k),
            (XChoice::Seeded, TestSystem::IrrationalRotation(_)) => TestPoint::Real(RealPoint::seeded(x_seed)),
            (XChoice::Rational(q), TestSystem::IrrationalRotation(_)) => TestPoint::Real(RealPoint::rational(q.clone())),
            (XChoice::Seeded, TestSystem::PowerTarget { p }) => {
                TestPoint::Digits(DigitStream::new(*p, DigitSource::SeededUniform, x_seed)?)
            }
            (XChoice::Rational(q), TestSystem::PowerTarget { p }) => {
                TestPoint::Digits(DigitStream::new(*p, DigitSource::Expansion(q.clone()), x_seed)?)
            }
            (XChoice::Translate(q), TestSystem::IrrationalRotation(_)) => match self.source_point(seed)? {
                SourcePoint::Real(y) => TestPoint::Real(y.translated(q)),
                _ => return Err(bad("x = y+q needs a rotation source")),
            },
            _ => return Err(bad("x does not match the test system")),
        })
    }
}

fn read_table(path: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("table_file {path}: {e}")))?;
    text.split([',', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty() && !s.starts_with('#'))
        .map(|s| s.parse::<f64>().map_err(|_| bad(format!("table_file: bad value {s:?}"))))
        .collect()
}

/// Parameters of the `verify` suite, each with a default.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub chain: Arc<MarkovChain>,
    pub event: BTreeSet<usize>,
    pub rate: RateModel,
    pub p_n_max: u64,
    pub p_k_max: usize,
    pub split_cases: usize,
    pub vdc_cases: usize,
    pub lln_tolerance: f64,
    pub cov_n_max: u64,
    pub vn_samples: usize,
    pub vn_n_max: u64,
}

impl VerifyConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let rate = match raw.get("rate").unwrap_or("geometric") {
            "geometric" => RateModel::geometric(raw.rational("rate_c", Some("2"))?, raw.rational("rate_lambda", Some("1/2"))?)?,
            "harmonic" => RateModel::harmonic(raw.rational("rate_c", Some("1"))?)?,
            r => return Err(bad(format!("unknown rate {r:?}"))),
        };
        Ok(VerifyConfig {
            chain: chain(raw, DEFAULT_CHAIN)?,
            event: event(raw)?,
            rate,
            p_n_max: raw.parsed("p_n_max", 30u64)?,
            p_k_max: raw.parsed("p_k_max", 3usize)?,
            split_cases: raw.parsed("split_cases", 100usize)?,
            vdc_cases: raw.parsed("vdc_cases", 1000usize)?,
            lln_tolerance: raw.real("lln_tolerance", 0.05)?,
            cov_n_max: raw.parsed("cov_n_max", 1_000_000u64)?,
            vn_samples: raw.parsed("vn_samples", 32usize)?,
            vn_n_max: raw.parsed("vn_n_max", 100_000u64)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_rational("0.4"), Some(rat(2, 5)));
        assert_eq!(parse_rational("-1.25"), Some(rat(-5, 4)));
        assert_eq!(parse_rational("3/6"), Some(rat(1, 2)));
        assert_eq!(parse_rational("1e-3"), Some(rat(1, 1000)));
        assert_eq!(parse_rational("7"), Some(rat(7, 1)));
        assert_eq!(parse_rational("."), None);
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
    }

    #[test]
    fn comments_lists_and_duplicates() {
        let raw = RawConfig::parse("# header\nseeds = 1, 2,3 # trailing\nn_max = 1e6\n").unwrap();
        assert_eq!(raw.list::<u64>("seeds").unwrap(), Some(vec![1, 2, 3]));
        assert_eq!(raw.parsed("n_max", 0u64).unwrap(), 1_000_000);
        assert!(RawConfig::parse("a = 1\na = 2\n").is_err());
        assert!(RawConfig::parse("no equals sign\n").is_err());
    }

    #[test]
    fn hash_tracks_text() {
        let a = RawConfig::parse("a = 0.4\n").unwrap();
        let b = RawConfig::parse("a = 0.40\n").unwrap();
        assert_eq!(a.sha256().len(), 64);
        assert_ne!(a.sha256(), b.sha256());
    }

    #[test]
    fn validation_rejects_bad_ranges() {
        let cfg = |t: &str| ExperimentConfig::from_raw(RawConfig::parse(t).unwrap(), None);
        assert!(cfg("a = 0.5\n").is_err());
        assert!(cfg("gamma = 2.5\n").is_err());
        assert!(cfg("a = 0.4\nepsilon = 0.2\n").is_err());
        assert!(cfg("source = gauss\ntarget = shrinking\n").is_err());
        assert!(cfg("source = gauss\ntarget = gauss_shrinking\nb = 3/2\n").is_ok());
    }

    #[test]
    fn seeds_from_count_and_override() {
        let raw = RawConfig::parse("seed_base = 5\nseed_count = 3\n").unwrap();
        let c = ExperimentConfig::from_raw(raw.clone(), None).unwrap();
        assert_eq!(c.seeds, vec![5, 6, 7]);
        let c = ExperimentConfig::from_raw(raw, Some(42)).unwrap();
        assert_eq!(c.seeds, vec![42]);
    }

    #[test]
    fn chains_and_angles_parse() {
        let c = parse_chain("0.75 0.25; 1/4, 3/4").unwrap();
        assert_eq!(c.stationary(), &[rat(1, 2), rat(1, 2)]);
        assert!(parse_cf("periodic:1,2", 0).is_ok());
        assert!(parse_cf("prefix:3;periodic:1", 0).is_ok());
        assert!(parse_cf("periodic:", 0).is_err());
    }
}
