//! Streaming sparse sequences: return times `r_n(y, 𝓔)`, the independent
//! Bernoulli baseline and deterministic comparison sequences.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::source_dynamics::{orbit_membership, SourcePoint, SourceSystem};
use crate::stats::least_squares_slope;
use crate::target_families::TargetFamily;

/// Default scan horizon for [`ReturnSequence::next_return`].
pub const DEFAULT_SCAN_HORIZON: u64 = 100_000_000;

/// Closed-form comparison sequences.
#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    /// `⌊n^(1/(1-a))⌋`
    PowerLaw { a: BigRational },
    /// `n²`
    Square,
    /// `n`
    Linear,
}

impl Formula {
    /// The `n`-th term (1-based).
    pub fn term(&self, n: u64) -> u64 {
        match self {
            Formula::Linear => n,
            Formula::Square => n.checked_mul(n).expect("n² overflows u64"),
            Formula::PowerLaw { a } => {
                // n^(q/(q-p)) = (n^q)^(1/(q-p)) for a = p/q
                let p = a.numer().to_u32().expect("small numerator");
                let q = a.denom().to_u32().expect("small denominator");
                let v = BigUint::from(n).pow(q).nth_root(q - p);
                v.to_u64().expect("term fits in u64")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum SequenceKind {
    ReturnTimes {
        system: SourceSystem,
        family: TargetFamily,
    },
    /// independent `X_n ~ Bernoulli(min(1, c·n^(-a)))`
    Bernoulli { a: f64, c: f64, seed: u64 },
    Deterministic(Formula),
}

/// `X_n(ω)` for the Bernoulli baseline: word `2(n-1)` of the seeded ChaCha8
/// stream, compared against `p_n·2^64`. Addressable without replaying the
/// prefix.
pub fn bernoulli_indicator(seed: u64, a: f64, c: f64, n: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(2 * (n as u128 - 1));
    bernoulli_hit(rng.next_u64(), a, c, n)
}

fn bernoulli_hit(u: u64, a: f64, c: f64, n: u64) -> bool {
    let p = c * (n as f64).powf(-a);
    if p >= 1.0 {
        return true;
    }
    // u / 2^64 < p
    (u as f64) < p * 18446744073709551616.0
}

#[derive(Clone, Debug)]
pub struct ReturnSequence {
    kind: SequenceKind,
    point: Option<SourcePoint>,
    rng: Option<ChaCha8Rng>,
    terms: Vec<u64>,
    scanned: u64,
    horizon: u64,
}

impl ReturnSequence {
    /// Return times of `y` to the targets of `family` under `system`.
    pub fn return_times(system: SourceSystem, family: TargetFamily, y: SourcePoint) -> Result<Self> {
        family.check_compatible(&system)?;
        Ok(Self::build(SequenceKind::ReturnTimes { system, family }, Some(y), None))
    }

    /// Return times of a seeded random point.
    pub fn return_times_seeded(system: SourceSystem, family: TargetFamily, seed: u64) -> Result<Self> {
        let y = SourcePoint::seeded(&system, seed)?;
        Self::return_times(system, family, y)
    }

    pub fn bernoulli(a: f64, c: f64, seed: u64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) || !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid("Bernoulli baseline needs 0 < a < 1 and c > 0"));
        }
        let rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::build(SequenceKind::Bernoulli { a, c, seed }, None, Some(rng)))
    }

    pub fn deterministic(formula: Formula) -> Result<Self> {
        if let Formula::PowerLaw { a } = &formula {
            if !a.is_positive() || a >= &BigRational::one() || a.denom() > &64.into() {
                return Err(Error::invalid("power-law sequence needs a = p/q in (0, 1) with q <= 64"));
            }
        }
        Ok(Self::build(SequenceKind::Deterministic(formula), None, None))
    }

    fn build(kind: SequenceKind, point: Option<SourcePoint>, rng: Option<ChaCha8Rng>) -> Self {
        ReturnSequence {
            kind,
            point,
            rng,
            terms: Vec::new(),
            scanned: 0,
            horizon: DEFAULT_SCAN_HORIZON,
        }
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Terms emitted so far.
    pub fn emitted(&self) -> usize {
        self.terms.len()
    }

    pub fn last_term(&self) -> Option<u64> {
        self.terms.last().copied()
    }

    /// Largest `n` whose membership has been decided.
    pub fn scanned(&self) -> u64 {
        self.scanned
    }

    pub fn terms(&self) -> &[u64] {
        &self.terms
    }

    /// Short descriptor for provenance records.
    pub fn describe(&self) -> String {
        match &self.kind {
            SequenceKind::ReturnTimes { system, family } => {
                format!("returns[{} / {}]", system.describe(), family.describe())
            }
            SequenceKind::Bernoulli { a, c, seed } => format!("bernoulli(a={a}, c={c}, seed={seed})"),
            SequenceKind::Deterministic(f) => format!("deterministic({f:?})"),
        }
    }

    /// Decide whether `n = scanned + 1` is a hit and advance.
    fn scan_one(&mut self) -> Result<bool> {
        let n = self.scanned + 1;
        let hit = match &self.kind {
            SequenceKind::ReturnTimes { system, family } => {
                let y = self.point.as_mut().expect("return times carry a point");
                orbit_membership(system, y, n, &family.target_set(n))?
            }
            SequenceKind::Bernoulli { a, c, .. } => {
                let u = self.rng.as_mut().expect("Bernoulli carries an rng").next_u64();
                bernoulli_hit(u, *a, *c, n)
            }
            SequenceKind::Deterministic(_) => unreachable!("formulas are not scanned"),
        };
        self.scanned = n;
        if hit {
            self.terms.push(n);
        }
        Ok(hit)
    }

    /// The smallest hit beyond the last emitted term.
    pub fn next_return(&mut self) -> Result<u64> {
        if let SequenceKind::Deterministic(f) = &self.kind {
            let t = f.term(self.terms.len() as u64 + 1);
            self.terms.push(t);
            self.scanned = t;
            return Ok(t);
        }
        loop {
            if self.scanned >= self.horizon {
                return Err(Error::ScanLimit {
                    horizon: self.horizon,
                    last_term: self.last_term().unwrap_or(0),
                    emitted: self.terms.len(),
                });
            }
            if self.scan_one()? {
                return Ok(self.scanned);
            }
        }
    }

    /// Term `r_i` (1-based), generating as needed.
    pub fn term(&mut self, i: usize) -> Result<u64> {
        assert!(i >= 1, "terms are 1-based");
        while self.terms.len() < i {
            self.next_return()?;
        }
        Ok(self.terms[i - 1])
    }

    /// Scan every `n ≤ N` (or generate every formula term `≤ N`).
    fn extend_to(&mut self, n_max: u64) -> Result<()> {
        if let SequenceKind::Deterministic(f) = &self.kind {
            loop {
                let t = f.term(self.terms.len() as u64 + 1);
                if t > n_max {
                    break;
                }
                self.terms.push(t);
            }
            self.scanned = self.scanned.max(n_max);
            return Ok(());
        }
        while self.scanned < n_max {
            self.scan_one()?;
        }
        Ok(())
    }

    /// `𝐖_N(ω) = #{n ≤ N : n is a hit}`.
    pub fn count_up_to(&mut self, n_max: u64) -> Result<usize> {
        self.extend_to(n_max)?;
        Ok(self.terms.partition_point(|&t| t <= n_max))
    }

    /// All hits `≤ N` and their count.
    pub fn returns_up_to(&mut self, n_max: u64) -> Result<(Vec<u64>, usize)> {
        let k = self.count_up_to(n_max)?;
        Ok((self.terms[..k].to_vec(), k))
    }

    /// Least-squares slope of `log r_n` against `log n` for
    /// `n_min ≤ n ≤ n_max`.
    pub fn growth_exponent(&mut self, n_min: usize, n_max: usize) -> Result<f64> {
        if n_min < 1 || n_max < 2 * n_min {
            return Err(Error::invalid("growth exponent needs 1 <= n_min and n_max >= 2 n_min"));
        }
        let count = n_max - n_min + 1;
        if count < 100 {
            return Err(Error::InsufficientTerms { needed: 100, have: count });
        }
        self.term(n_max)?;
        let xs: Vec<f64> = (n_min..=n_max).map(|n| (n as f64).ln()).collect();
        let ys: Vec<f64> = self.terms[n_min - 1..n_max].iter().map(|&r| (r as f64).ln()).collect();
        least_squares_slope(&xs, &ys).ok_or(Error::InsufficientTerms { needed: 100, have: count })
    }

    /// Re-check membership of an emitted term with a fresh copy of the point.
    pub fn recheck(&self, r: u64) -> Result<bool> {
        match &self.kind {
            SequenceKind::ReturnTimes { system, family } => {
                let mut y = self.point.clone().expect("return times carry a point");
                orbit_membership(system, &mut y, r, &family.target_set(r))
            }
            SequenceKind::Bernoulli { a, c, seed } => Ok(bernoulli_indicator(*seed, *a, *c, r)),
            SequenceKind::Deterministic(_) => Ok(self.terms.contains(&r)),
        }
    }
}
