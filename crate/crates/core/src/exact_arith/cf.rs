//! Lazily materialised continued fractions `[0; a_1, a_2, …]`. The Gauss map
//! acts as the shift of partial quotients.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::compare::{self, Enclosure, Refinable};
use super::threshold::Threshold;
use crate::error::{Error, Result};

/// Default number of partial quotients past the shift before giving up.
pub const DEFAULT_QUOTIENT_CAP: usize = 512;

/// Initial bits drawn for a sampled real.
pub const SAMPLER_BASE_BITS: u64 = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum CfSource {
    /// Quotients of a Lebesgue-uniform real drawn bit by bit from a seeded
    /// stream.
    SeededUniform,
    /// A finite continued fraction; the tail past the list is `0`.
    FixedList(Vec<u64>),
    /// `prefix` once, then `period` repeated forever.
    Periodic { prefix: Vec<u64>, period: Vec<u64> },
}

/// Möbius state of the uniform sampler. With `y ∈ (Y, Y+1) / 2^B` and
/// convergent denominators `q_k, q_{k-1}`, the Gauss tail at the lower end
/// is `r / s` (both of equal sign) and at the upper end
/// `(r - q_k) / (s + q_{k-1})`.
#[derive(Clone, Debug)]
struct Sampler {
    rng: ChaCha8Rng,
    bits: u64,
    r: BigInt,
    s: BigInt,
    q: BigInt,
    q_prev: BigInt,
}

impl Sampler {
    fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bits: 0,
            r: BigInt::zero(),
            s: BigInt::from(-1),
            q: BigInt::one(),
            q_prev: BigInt::zero(),
        }
    }

    fn budget(k: usize) -> u64 {
        SAMPLER_BASE_BITS.max(SAMPLER_BASE_BITS + (6.84 * k as f64).ceil() as u64)
    }

    /// Append 64 fresh bits to `Y`.
    fn extend(&mut self) {
        let u = BigInt::from(self.rng.next_u64());
        self.r = (&self.r << 64u32) - &self.q * &u;
        self.s = (&self.s << 64u32) + &self.q_prev * &u;
        self.bits += 64;
    }

    /// `floor(s / r)` when it is the same integer throughout the open
    /// interval of admissible reals.
    fn determined(&self) -> Option<BigInt> {
        let r_hi = &self.r - &self.q;
        let s_hi = &self.s + &self.q_prev;
        if self.r.is_zero() || r_hi.is_zero() || self.r.sign() != r_hi.sign() {
            return None;
        }
        let (m_lo, rem_lo) = self.s.div_mod_floor(&self.r);
        let (m_hi, rem_hi) = s_hi.div_mod_floor(&r_hi);
        // floor(s/r) over the open interval between the two endpoint values
        match (&m_hi - &m_lo).to_i8() {
            Some(0) => Some(m_lo),
            Some(1) if rem_hi.is_zero() => Some(m_lo),
            Some(-1) if rem_lo.is_zero() => Some(m_hi),
            _ => None,
        }
    }

    fn next_quotient(&mut self, k: usize) -> Result<u64> {
        let budget = Self::budget(k);
        if self.bits == 0 {
            self.extend();
        }
        loop {
            if let Some(a) = self.determined() {
                let a_u = a.to_u64().ok_or_else(|| Error::PrecisionExhausted {
                    what: "gauss sampler quotient size",
                    position: k as u64,
                    cap: 64,
                })?;
                let r_next = &a * &self.r - &self.s;
                self.s = -std::mem::take(&mut self.r);
                self.r = r_next;
                let q_next = &a * &self.q + &self.q_prev;
                self.q_prev = std::mem::replace(&mut self.q, q_next);
                return Ok(a_u);
            }
            if self.bits >= budget {
                return Err(Error::PrecisionExhausted {
                    what: "gauss sampler bit budget",
                    position: k as u64,
                    cap: budget as usize,
                });
            }
            self.extend();
        }
    }
}

#[derive(Clone, Debug)]
enum Producer {
    Sampler(Box<Sampler>),
    List(Vec<u64>),
    Periodic { prefix: Vec<u64>, period: Vec<u64> },
}

#[derive(Clone, Debug)]
pub struct CfStream {
    source: CfSource,
    seed: u64,
    quotients: Vec<u64>,
    producer: Producer,
    convergents: Vec<(BigInt, BigInt)>,
    cap: usize,
}

impl CfStream {
    pub fn new(source: CfSource, seed: u64) -> Result<Self> {
        let producer = match &source {
            CfSource::SeededUniform => Producer::Sampler(Box::new(Sampler::new(seed))),
            CfSource::FixedList(qs) => {
                if qs.contains(&0) {
                    return Err(Error::invalid("partial quotients must be >= 1"));
                }
                Producer::List(qs.clone())
            }
            CfSource::Periodic { prefix, period } => {
                if period.is_empty() {
                    return Err(Error::invalid("period must be non-empty"));
                }
                if prefix.contains(&0) || period.contains(&0) {
                    return Err(Error::invalid("partial quotients must be >= 1"));
                }
                Producer::Periodic {
                    prefix: prefix.clone(),
                    period: period.clone(),
                }
            }
        };
        Ok(CfStream {
            source,
            seed,
            quotients: Vec::new(),
            producer,
            convergents: Vec::new(),
            cap: DEFAULT_QUOTIENT_CAP,
        })
    }

    /// `[0; 1, 1, 1, …] = (√5 - 1)/2`.
    pub fn golden() -> Self {
        Self::new(
            CfSource::Periodic {
                prefix: vec![],
                period: vec![1],
            },
            0,
        )
        .expect("valid periodic source")
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self
    }

    pub fn source(&self) -> &CfSource {
        &self.source
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn materialized_len(&self) -> usize {
        self.quotients.len()
    }

    /// Number of partial quotients, if finite.
    pub fn finite_len(&self) -> Option<usize> {
        match &self.source {
            CfSource::FixedList(qs) => Some(qs.len()),
            _ => None,
        }
    }

    /// Largest partial quotient, when bounded by construction.
    pub fn quotient_bound(&self) -> Option<u64> {
        match &self.source {
            CfSource::Periodic { prefix, period } => prefix.iter().chain(period).copied().max(),
            CfSource::FixedList(qs) => qs.iter().copied().max().or(Some(1)),
            CfSource::SeededUniform => None,
        }
    }

    fn ensure(&mut self, len: usize) -> Result<()> {
        if let Some(l) = self.finite_len() {
            let len = len.min(l);
            if self.quotients.len() < len {
                if let Producer::List(qs) = &self.producer {
                    self.quotients = qs[..len].to_vec();
                }
            }
            return Ok(());
        }
        while self.quotients.len() < len {
            let k = self.quotients.len();
            let a = match &mut self.producer {
                Producer::Sampler(s) => s.next_quotient(k)?,
                Producer::Periodic { prefix, period } => {
                    if k < prefix.len() {
                        prefix[k]
                    } else {
                        period[(k - prefix.len()) % period.len()]
                    }
                }
                Producer::List(_) => unreachable!("finite list handled above"),
            };
            self.quotients.push(a);
        }
        Ok(())
    }

    /// Partial quotient `a_k` (1-based); `None` past the end of a finite CF.
    pub fn quotient(&mut self, k: usize) -> Result<Option<u64>> {
        assert!(k >= 1, "partial quotients are 1-based");
        self.ensure(k)?;
        Ok(self.quotients.get(k - 1).copied())
    }

    /// `a_{from+1} … a_{from+len}`, truncated at the end of a finite CF.
    pub fn quotients(&mut self, from: usize, len: usize) -> Result<&[u64]> {
        self.ensure(from + len)?;
        let end = (from + len).min(self.quotients.len());
        let start = from.min(end);
        Ok(&self.quotients[start..end])
    }

    /// Convergent `p_k / q_k` (`k ≥ 0`, with `p_0/q_0 = 0/1`).
    pub fn convergent(&mut self, k: usize) -> Result<Option<(BigInt, BigInt)>> {
        self.ensure(k)?;
        if k > self.quotients.len() {
            return Ok(None);
        }
        if self.convergents.is_empty() {
            self.convergents.push((BigInt::zero(), BigInt::one()));
        }
        while self.convergents.len() <= k {
            let j = self.convergents.len();
            let a = BigInt::from(self.quotients[j - 1]);
            let (p1, q1) = &self.convergents[j - 1];
            let (p2, q2) = if j >= 2 {
                self.convergents[j - 2].clone()
            } else {
                (BigInt::one(), BigInt::zero())
            };
            let next = (&a * p1 + p2, &a * q1 + q2);
            self.convergents.push(next);
        }
        Ok(Some(self.convergents[k].clone()))
    }

    /// Exact value of the tail `[0; a_{shift+1}, …]` when rational (finite CF).
    pub fn exact_tail(&self, shift: u64) -> Option<BigRational> {
        let CfSource::FixedList(qs) = &self.source else {
            return None;
        };
        let start = (shift as usize).min(qs.len());
        Some(finite_cf(&qs[start..]))
    }

    /// Rigorous enclosure of the whole value from quotients `a_1..a_k`.
    pub fn value_enclosure(&mut self, k: usize) -> Result<(BigRational, BigRational)> {
        if let Some(v) = self.exact_tail(0) {
            return Ok((v.clone(), v));
        }
        let k = k.max(2);
        let (p1, q1) = self.convergent(k - 1)?.expect("infinite CF");
        let (p2, q2) = self.convergent(k)?.expect("infinite CF");
        let a = BigRational::new(p1, q1);
        let b = BigRational::new(p2, q2);
        Ok(if a < b { (a, b) } else { (b, a) })
    }
}

fn finite_cf(qs: &[u64]) -> BigRational {
    let mut v = BigRational::zero();
    for &a in qs.iter().rev() {
        v = (BigRational::from_integer(BigInt::from(a)) + v).recip();
    }
    v
}

/// Tail convergents `P_j/Q_j` of `[0; b_1, …, b_j]`.
fn tail_convergents_big(qs: &[u64]) -> ((BigInt, BigInt), (BigInt, BigInt)) {
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p, mut q) = (BigInt::zero(), BigInt::one());
    for &a in qs {
        let a = BigInt::from(a);
        let pn = &a * &p + &p_prev;
        let qn = &a * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, pn);
        q_prev = std::mem::replace(&mut q, qn);
    }
    ((p_prev, q_prev), (p, q))
}

struct CfTail<'a> {
    stream: &'a mut CfStream,
    shift: u64,
}

impl Refinable for CfTail<'_> {
    fn float_bounds(&mut self) -> Result<Option<(f64, f64)>> {
        if self.stream.finite_len().is_some() {
            return Ok(None);
        }
        let from = self.shift as usize;
        let (mut p_prev, mut q_prev) = (1u128, 0u128);
        let (mut p, mut q) = (0u128, 1u128);
        let mut j = 0usize;
        while q <= 1 << 26 {
            j += 1;
            if j > 64 {
                return Ok(None);
            }
            let a = self.stream.quotients(from + j - 1, 1)?[0] as u128;
            let (Some(pn), Some(qn)) = (
                a.checked_mul(p).and_then(|x| x.checked_add(p_prev)),
                a.checked_mul(q).and_then(|x| x.checked_add(q_prev)),
            ) else {
                return Ok(None);
            };
            p_prev = std::mem::replace(&mut p, pn);
            q_prev = std::mem::replace(&mut q, qn);
        }
        if q > 1 << 53 || q_prev == 0 {
            return Ok(None);
        }
        let x = p as f64 / q as f64;
        let y = p_prev as f64 / q_prev as f64;
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        Ok(Some(compare::widen(lo, hi)))
    }

    fn exact(&mut self) -> Result<Option<BigRational>> {
        Ok(self.stream.exact_tail(self.shift))
    }

    fn refine(&mut self, level: u32) -> Result<Option<Enclosure>> {
        let cap = self.stream.cap;
        let prev = if level == 0 { 0 } else { 16usize << (level - 1) };
        if prev >= cap {
            return Ok(None);
        }
        let k = (16usize << level).min(cap);
        let qs = self.stream.quotients(self.shift as usize, k)?.to_vec();
        let ((p1, q1), (p2, q2)) = tail_convergents_big(&qs);
        let bits = 2 * q2.bits().min(u32::MAX as u64 / 4) as u32 + 8;
        let (lo, hi) = if compare::cmp_frac(&p1, &q1, &p2, &q2).is_lt() {
            ((p1, q1), (p2, q2))
        } else {
            ((p2, q2), (p1, q1))
        };
        Ok(Some(Enclosure {
            lo_num: lo.0,
            lo_den: lo.1,
            hi_num: hi.0,
            hi_den: hi.1,
            bits,
        }))
    }

    fn exhaustion(&self) -> Error {
        Error::PrecisionExhausted {
            what: "continued-fraction tail",
            position: self.shift,
            cap: self.stream.cap,
        }
    }
}

/// Sign of `G^shift(y) - thr`.
pub fn compare_cf_tail(stream: &mut CfStream, shift: u64, thr: &Threshold) -> Result<std::cmp::Ordering> {
    compare::compare(&mut CfTail { stream, shift }, thr)
}

/// Whether `[0; a_{shift+1}, a_{shift+2}, …]` lies strictly inside `(lo, hi)`.
pub fn cf_tail_in_interval(stream: &mut CfStream, shift: u64, lo: &Threshold, hi: &Threshold) -> Result<bool> {
    compare::in_open_interval(&mut CfTail { stream, shift }, lo, hi)
}
