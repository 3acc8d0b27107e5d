//! Lazily materialised base-`B` digit expansions. The orbit of `y` under
//! `y ↦ B·y mod 1` is the tail shift of its digits, so membership of `S^n y`
//! in an interval is a question about the tail `0.d_{n+1} d_{n+2} …`.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::compare::{self, Enclosure, Refinable};
use super::threshold::Threshold;
use crate::error::{Error, Result};

/// Default number of digits past the shift before a comparison gives up.
pub const DEFAULT_DIGIT_CAP: usize = 4096;

/// How the digits of a stream are produced.
#[derive(Clone, Debug, PartialEq)]
pub enum DigitSource {
    /// i.i.d. uniform digits from a seeded ChaCha8 stream.
    SeededUniform,
    /// The listed digits followed by zeros.
    FixedList(Vec<u32>),
    /// `prefix` once, then `period` repeated forever.
    EventuallyPeriodic { prefix: Vec<u32>, period: Vec<u32> },
    /// Expansion of a rational in `[0, 1]` by long division (`1` expands to
    /// all `B - 1`).
    Expansion(BigRational),
}

#[derive(Clone, Debug)]
enum Producer {
    Random { rng: ChaCha8Rng, pending: u64, left: u32, chunk: u32 },
    List(Vec<u32>),
    Periodic { prefix: Vec<u32>, period: Vec<u32> },
    /// remainder `num / den` after the materialised digits
    Division { num: BigInt, den: BigInt },
}

#[derive(Clone, Debug)]
pub struct DigitStream {
    base: u32,
    source: DigitSource,
    seed: u64,
    digits: Vec<u32>,
    producer: Producer,
    offset: u64,
    cap: usize,
    /// digits per exact-`f64` window: `base^window ≤ 2^52`
    window: usize,
    base_pow_window: f64,
}

pub fn make_digit_stream(base: u32, source: DigitSource, seed: u64) -> Result<DigitStream> {
    DigitStream::new(base, source, seed)
}

impl DigitStream {
    pub fn new(base: u32, source: DigitSource, seed: u64) -> Result<Self> {
        if base < 2 {
            return Err(Error::invalid(format!("digit base must be >= 2, got {base}")));
        }
        let check = |ds: &[u32]| -> Result<()> {
            match ds.iter().find(|&&d| d >= base) {
                Some(d) => Err(Error::invalid(format!("digit {d} out of range for base {base}"))),
                None => Ok(()),
            }
        };
        let producer = match &source {
            DigitSource::SeededUniform => {
                let chunk = if base.is_power_of_two() && 64 % base.trailing_zeros() == 0 {
                    base.trailing_zeros()
                } else {
                    0
                };
                Producer::Random {
                    rng: ChaCha8Rng::seed_from_u64(seed),
                    pending: 0,
                    left: 0,
                    chunk,
                }
            }
            DigitSource::FixedList(ds) => {
                check(ds)?;
                Producer::List(ds.clone())
            }
            DigitSource::EventuallyPeriodic { prefix, period } => {
                check(prefix)?;
                check(period)?;
                if period.is_empty() {
                    return Err(Error::invalid("period must be non-empty"));
                }
                Producer::Periodic {
                    prefix: prefix.clone(),
                    period: period.clone(),
                }
            }
            DigitSource::Expansion(q) => {
                if q.is_negative() || q > &BigRational::one() {
                    return Err(Error::invalid("expansion source must lie in [0, 1]"));
                }
                Producer::Division {
                    num: q.numer().clone(),
                    den: q.denom().clone(),
                }
            }
        };
        let mut window = 0usize;
        let mut pow = 1f64;
        while pow * base as f64 <= (1u64 << 52) as f64 {
            pow *= base as f64;
            window += 1;
        }
        Ok(DigitStream {
            base,
            source,
            seed,
            digits: Vec::new(),
            producer,
            offset: 0,
            cap: DEFAULT_DIGIT_CAP,
            window,
            base_pow_window: pow,
        })
    }

    /// Hard cap on digits examined past the shift in a comparison.
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn source(&self) -> &DigitSource {
        &self.source
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Digits computed so far (including any skipped by a shifted view).
    pub fn materialized_len(&self) -> usize {
        self.digits.len()
    }

    /// A view whose digit `k` is this stream's digit `k + m`.
    pub fn shifted(&self, m: u64) -> DigitStream {
        let mut v = self.clone();
        v.offset += m;
        v
    }

    fn produce(&mut self) -> u32 {
        let base = self.base;
        let idx = self.digits.len();
        match &mut self.producer {
            Producer::Random {
                rng,
                pending,
                left,
                chunk,
            } => {
                if *chunk == 0 {
                    return rng.random_range(0..base);
                }
                if *left == 0 {
                    *pending = rng.next_u64();
                    *left = 64 / *chunk;
                }
                let d = (*pending >> (64 - *chunk)) as u32;
                *pending <<= *chunk;
                *left -= 1;
                d
            }
            Producer::List(ds) => ds.get(idx).copied().unwrap_or(0),
            Producer::Periodic { prefix, period } => {
                if idx < prefix.len() {
                    prefix[idx]
                } else {
                    period[(idx - prefix.len()) % period.len()]
                }
            }
            Producer::Division { num, den } => {
                if num == den {
                    return base - 1;
                }
                let scaled = &*num * BigInt::from(base);
                let (d, r) = scaled.div_rem(den);
                *num = r;
                u32::try_from(d).expect("digit below base")
            }
        }
    }

    fn ensure_abs(&mut self, len: usize) {
        while self.digits.len() < len {
            let d = self.produce();
            self.digits.push(d);
        }
    }

    /// Digit `d_k` (1-based) of this view.
    pub fn digit(&mut self, k: u64) -> u32 {
        assert!(k >= 1, "digits are 1-based");
        let abs = (self.offset + k - 1) as usize;
        self.ensure_abs(abs + 1);
        self.digits[abs]
    }

    /// Digits `d_1 … d_len` of this view.
    pub fn prefix(&mut self, len: usize) -> Vec<u32> {
        let start = self.offset as usize;
        self.ensure_abs(start + len);
        self.digits[start..start + len].to_vec()
    }

    fn abs_slice(&mut self, start: usize, len: usize) -> &[u32] {
        self.ensure_abs(start + len);
        &self.digits[start..start + len]
    }

    /// Exact value of the tail after `shift` digits of this view, when the
    /// source makes it a known rational.
    pub fn exact_tail(&self, shift: u64) -> Option<BigRational> {
        let b = BigInt::from(self.base);
        let pos = self.offset + shift;
        match &self.source {
            DigitSource::SeededUniform => None,
            DigitSource::FixedList(ds) => {
                let start = pos.min(ds.len() as u64) as usize;
                Some(finite_value(&ds[start..], &b))
            }
            DigitSource::EventuallyPeriodic { prefix, period } => {
                let l = period.len();
                let (head, rot) = if (pos as usize) < prefix.len() {
                    (&prefix[pos as usize..], 0)
                } else {
                    (&prefix[..0], (pos as usize - prefix.len()) % l)
                };
                let rotated: Vec<u32> = (0..l).map(|i| period[(rot + i) % l]).collect();
                let cycle = finite_value(&rotated, &b);
                let cycle_den = BigRational::one() - BigRational::from_integer(b.pow(l as u32)).recip();
                let tail = cycle / cycle_den;
                let scale = BigRational::from_integer(b.pow(head.len() as u32));
                Some(finite_value(head, &b) + tail / scale)
            }
            DigitSource::Expansion(q) => {
                if q.is_one() {
                    return Some(q.clone());
                }
                let den = q.denom();
                let m = BigUint::from(self.base).modpow(&BigUint::from(pos), den.magnitude());
                let num = (q.numer() * BigInt::from(m)).mod_floor(den);
                Some(BigRational::new(num, den.clone()))
            }
        }
    }

    /// Tail enclosure `[W, W+1] / B^d` from the next `d` digits.
    fn tail_window(&mut self, shift: u64, d: usize) -> BigInt {
        let start = (self.offset + shift) as usize;
        let b = BigInt::from(self.base);
        let mut w = BigInt::zero();
        // accumulate in u64 chunks that fit below 2^52
        let per = self.window.clamp(1, 18);
        let ds = self.abs_slice(start, d).to_vec();
        for chunk in ds.chunks(per) {
            let mut acc = 0u64;
            for &dig in chunk {
                acc = acc * self.base as u64 + dig as u64;
            }
            w = w * b.pow(chunk.len() as u32) + acc;
        }
        w
    }

    fn float_window(&mut self, shift: u64) -> (f64, f64) {
        let start = (self.offset + shift) as usize;
        let m = self.window;
        let base = self.base as u64;
        let ds = self.abs_slice(start, m);
        let mut w = 0u64;
        for &d in ds {
            w = w * base + d as u64;
        }
        let p = self.base_pow_window;
        compare::widen(w as f64 / p, (w + 1) as f64 / p)
    }
}

fn finite_value(ds: &[u32], b: &BigInt) -> BigRational {
    let mut num = BigInt::zero();
    for &d in ds {
        num = num * b + d;
    }
    BigRational::new(num, b.pow(ds.len() as u32))
}

struct DigitTail<'a> {
    stream: &'a mut DigitStream,
    shift: u64,
}

impl Refinable for DigitTail<'_> {
    fn float_bounds(&mut self) -> Result<Option<(f64, f64)>> {
        Ok(Some(self.stream.float_window(self.shift)))
    }

    fn exact(&mut self) -> Result<Option<BigRational>> {
        Ok(self.stream.exact_tail(self.shift))
    }

    fn refine(&mut self, level: u32) -> Result<Option<Enclosure>> {
        let cap = self.stream.cap;
        let d = 64usize.checked_shl(level).unwrap_or(usize::MAX);
        let prev = if level == 0 { 0 } else { 64usize << (level - 1) };
        if prev >= cap {
            return Ok(None);
        }
        let d = d.min(cap);
        let w = self.stream.tail_window(self.shift, d);
        let den = BigInt::from(self.stream.base).pow(d as u32);
        let bits = (d as f64 * (self.stream.base as f64).log2()).ceil() as u32 + 8;
        Ok(Some(Enclosure {
            lo_num: w.clone(),
            lo_den: den.clone(),
            hi_num: w + 1,
            hi_den: den,
            bits,
        }))
    }

    fn exhaustion(&self) -> Error {
        Error::PrecisionExhausted {
            what: "digit tail",
            position: self.shift,
            cap: self.stream.cap,
        }
    }
}

/// Sign of `tail(shift) - thr`.
pub fn compare_tail(stream: &mut DigitStream, shift: u64, thr: &Threshold) -> Result<std::cmp::Ordering> {
    compare::compare(&mut DigitTail { stream, shift }, thr)
}

/// Whether `0.d_{shift+1} d_{shift+2} …` lies strictly inside `(lo, hi)`.
pub fn tail_in_interval(stream: &mut DigitStream, shift: u64, lo: &Threshold, hi: &Threshold) -> Result<bool> {
    compare::in_open_interval(&mut DigitTail { stream, shift }, lo, hi)
}

/// `f64` approximation of the tail (for observables that tolerate rounding).
pub fn tail_approx(stream: &mut DigitStream, shift: u64) -> f64 {
    let (lo, hi) = stream.float_window(shift);
    0.5 * (lo + hi)
}
