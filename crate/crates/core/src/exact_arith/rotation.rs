//! Points `frac(offset + 0.b_1 b_2 …₂)` and irrational angles, with exact
//! evaluation of `frac(x + n·α)`.
//!
//! A fixed-point pass in `u128` arithmetic (where wrapping addition is
//! reduction mod 1) decides almost every comparison; the rest fall back to
//! `BigInt` fixed point at doubling widths up to the angle's precision.

use std::cmp::Ordering;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::cf::{CfSource, CfStream};
use super::compare::{self, Enclosure, Refinable};
use super::digits::{DigitSource, DigitStream};
use super::dyadic::{ceil_scaled, floor_scaled, floor_shr};
use super::threshold::Threshold;
use crate::error::{Error, Result};

/// Default fixed-point width of a rotation angle.
pub const DEFAULT_ANGLE_BITS: u32 = 4160;

const TWO_POW_128: f64 = 340282366920938463463374607431768211456.0;

/// An irrational rotation number given by its continued fraction.
#[derive(Clone, Debug)]
pub struct RotationAngle {
    source: CfSource,
    bits: u32,
    /// `α ∈ [lo, hi] / 2^bits`
    lo: BigInt,
    hi: BigInt,
    fast_lo: u128,
    fast_width: u128,
    quotient_bound: Option<u64>,
    approx: f64,
}

impl RotationAngle {
    /// Angle with [`DEFAULT_ANGLE_BITS`] of precision.
    pub fn new(cf: CfStream) -> Result<Self> {
        Self::with_bits(cf, DEFAULT_ANGLE_BITS)
    }

    pub fn golden() -> Self {
        Self::new(CfStream::golden()).expect("golden angle")
    }

    pub fn with_bits(mut cf: CfStream, bits: u32) -> Result<Self> {
        if cf.finite_len().is_some() {
            return Err(Error::invalid("rotation angle needs infinitely many partial quotients"));
        }
        if bits < 192 {
            return Err(Error::invalid("rotation angle precision must be at least 192 bits"));
        }
        // walk convergents until q_k q_{k+1} > 2^(bits+2)
        let mut k = 1usize;
        let target = BigInt::one() << (bits + 2);
        loop {
            let (_, q1) = cf.convergent(k)?.expect("infinite CF");
            let (_, q2) = cf.convergent(k + 1)?.expect("infinite CF");
            if q1 * q2 > target {
                break;
            }
            k += 1;
        }
        let (a, b) = cf.value_enclosure(k + 1)?;
        let lo = floor_scaled(&a, bits);
        let hi = ceil_scaled(&b, bits);
        let shift = bits - 128;
        let fast_lo = floor_shr(&lo, shift).to_u128().expect("angle below 1");
        let fast_hi = super::dyadic::ceil_shr(&hi, shift)
            .to_u128()
            .unwrap_or(u128::MAX);
        let approx = BigRational::new(lo.clone(), BigInt::one() << bits)
            .to_f64()
            .unwrap_or(f64::NAN);
        Ok(RotationAngle {
            quotient_bound: cf.quotient_bound(),
            source: cf.source().clone(),
            bits,
            lo,
            hi,
            fast_lo,
            fast_width: fast_hi - fast_lo,
            approx,
        })
    }

    pub fn source(&self) -> &CfSource {
        &self.source
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn approx(&self) -> f64 {
        self.approx
    }

    /// Bounded partial quotients (badly approximable angle).
    pub fn is_badly_approximable(&self) -> bool {
        self.quotient_bound.is_some()
    }

    pub fn quotient_bound(&self) -> Option<u64> {
        self.quotient_bound
    }

    fn at(&self, w: u32) -> (BigInt, BigInt) {
        let s = self.bits - w;
        (floor_shr(&self.lo, s), super::dyadic::ceil_shr(&self.hi, s))
    }
}

/// A point `frac(offset + Σ b_k 2^-k)` of the circle. The binary part is
/// optional, so rationals are represented exactly.
#[derive(Clone, Debug)]
pub struct RealPoint {
    offset: Arc<BigRational>,
    digits: Option<DigitStream>,
    fast_lo: u128,
    fast_width: u128,
}

impl RealPoint {
    /// The rational `frac(q)`.
    pub fn rational(q: BigRational) -> Self {
        Self::build(q, None)
    }

    /// A Lebesgue-random point from seeded binary digits.
    pub fn seeded(seed: u64) -> Self {
        let ds = DigitStream::new(2, DigitSource::SeededUniform, seed).expect("base 2");
        Self::build(BigRational::zero(), Some(ds))
    }

    /// `frac(offset + digits)` where `digits` must be a base-2 stream.
    pub fn from_parts(offset: BigRational, digits: Option<DigitStream>) -> Result<Self> {
        if let Some(d) = &digits {
            if d.base() != 2 {
                return Err(Error::invalid("real points use base-2 digit streams"));
            }
        }
        Ok(Self::build(offset, digits))
    }

    fn build(offset: BigRational, mut digits: Option<DigitStream>) -> Self {
        let floor = offset.floor();
        let offset = offset - floor;
        let off_lo = floor_scaled(&offset, 128).to_u128().expect("fraction below 1");
        let off_w = (ceil_scaled(&offset, 128) - floor_scaled(&offset, 128))
            .to_u128()
            .unwrap_or(1);
        let (dig_lo, dig_w) = match &mut digits {
            Some(ds) => {
                let mut w = 0u128;
                for b in ds.prefix(128) {
                    w = (w << 1) | b as u128;
                }
                (w, 1)
            }
            None => (0, 0),
        };
        RealPoint {
            offset: Arc::new(offset),
            digits,
            fast_lo: off_lo.wrapping_add(dig_lo),
            fast_width: off_w + dig_w,
        }
    }

    /// `frac(self + q)`: same digits, shifted offset.
    pub fn translated(&self, q: &BigRational) -> Self {
        Self::build(self.offset.as_ref() + q, self.digits.clone())
    }

    pub fn offset(&self) -> &BigRational {
        &self.offset
    }

    pub fn has_digits(&self) -> bool {
        self.digits.is_some()
    }

    /// `f64` approximation of the point.
    pub fn approx(&self) -> f64 {
        self.fast_lo as f64 / TWO_POW_128
    }

    /// `[lo, hi] / 2^w` enclosing the point before reduction mod 1.
    fn enclosure(&mut self, w: u32) -> (BigInt, BigInt) {
        let off_lo = floor_scaled(&self.offset, w);
        let off_hi = ceil_scaled(&self.offset, w);
        match &mut self.digits {
            Some(ds) => {
                let mut d = BigInt::zero();
                for b in ds.prefix(w as usize) {
                    d = (d << 1u32) + b;
                }
                (off_lo + &d, off_hi + d + 1)
            }
            None => (off_lo, off_hi),
        }
    }
}

/// `frac(x + n·α)` as a refinable value.
struct OrbitPoint<'a> {
    angle: &'a RotationAngle,
    point: &'a mut RealPoint,
    n: u64,
}

impl OrbitPoint<'_> {
    /// Fixed-point enclosure `[lo, lo + width] / 2^128` with no wrap.
    fn fast(&self) -> Option<(u128, u128)> {
        let n = self.n as u128;
        let width = n
            .checked_mul(self.angle.fast_width)?
            .checked_add(self.point.fast_width)?;
        let lo = self.point.fast_lo.wrapping_add(n.wrapping_mul(self.angle.fast_lo));
        lo.checked_add(width)?;
        Some((lo, width))
    }
}

impl Refinable for OrbitPoint<'_> {
    fn float_bounds(&mut self) -> Result<Option<(f64, f64)>> {
        Ok(self.fast().map(|(lo, w)| {
            compare::widen(lo as f64 / TWO_POW_128, (lo + w) as f64 / TWO_POW_128)
        }))
    }

    fn exact(&mut self) -> Result<Option<BigRational>> {
        if self.n == 0 && !self.point.has_digits() {
            return Ok(Some(self.point.offset().clone()));
        }
        Ok(None)
    }

    fn refine(&mut self, level: u32) -> Result<Option<Enclosure>> {
        let max = self.angle.bits;
        let prev = if level == 0 { 0 } else { (256u32 << (level - 1)).min(max) };
        if prev >= max {
            return Ok(None);
        }
        let w = (256u32 << level).min(max);
        let (y_lo, y_hi) = self.point.enclosure(w);
        let (a_lo, a_hi) = self.angle.at(w);
        let n = BigInt::from(self.n);
        let lo = y_lo + &n * a_lo;
        let hi = y_hi + n * a_hi;
        let k = floor_shr(&lo, w);
        let den = BigInt::one() << w;
        if floor_shr(&hi, w) != k {
            // straddles an integer: no information at this width
            return Ok(Some(Enclosure {
                lo_num: BigInt::zero(),
                lo_den: BigInt::one(),
                hi_num: BigInt::one(),
                hi_den: BigInt::one(),
                bits: w,
            }));
        }
        let base = &k << w;
        Ok(Some(Enclosure {
            lo_num: lo - &base,
            lo_den: den.clone(),
            hi_num: hi - base,
            hi_den: den,
            bits: w,
        }))
    }

    fn exhaustion(&self) -> Error {
        Error::PrecisionExhausted {
            what: "rotation orbit point",
            position: self.n,
            cap: self.angle.bits as usize,
        }
    }
}

/// Sign of `frac(x + n·α) - thr`.
pub fn compare_rotation(
    angle: &RotationAngle,
    x: &mut RealPoint,
    n: u64,
    thr: &Threshold,
) -> Result<Ordering> {
    compare::compare(&mut OrbitPoint { angle, point: x, n }, thr)
}

/// Whether `frac(x + n·α)` lies strictly inside `(lo, hi)`.
pub fn rotation_in_interval(
    angle: &RotationAngle,
    x: &mut RealPoint,
    n: u64,
    lo: &Threshold,
    hi: &Threshold,
) -> Result<bool> {
    compare::in_open_interval(&mut OrbitPoint { angle, point: x, n }, lo, hi)
}

/// `f64` approximation of `frac(x + n·α)`, accurate to about `n·2^-120`.
pub fn rotation_approx(angle: &RotationAngle, x: &RealPoint, n: u64) -> f64 {
    let v = x
        .fast_lo
        .wrapping_add((n as u128).wrapping_mul(angle.fast_lo));
    v as f64 / TWO_POW_128
}

/// Exact enclosure of `frac(x + n·α)` at width `w` bits, or `None` when it
/// straddles an integer. Exposed for identity checks.
pub fn rotation_enclosure(
    angle: &RotationAngle,
    x: &mut RealPoint,
    n: u64,
    w: u32,
) -> Option<(BigRational, BigRational)> {
    let w = w.min(angle.bits);
    let (y_lo, y_hi) = x.enclosure(w);
    let (a_lo, a_hi) = angle.at(w);
    let n = BigInt::from(n);
    let lo = y_lo + &n * a_lo;
    let hi = y_hi + n * a_hi;
    let k = floor_shr(&lo, w);
    if floor_shr(&hi, w) != k {
        return None;
    }
    let base = &k << w;
    let den = BigInt::one() << w;
    Some((
        BigRational::new(lo - &base, den.clone()),
        BigRational::new(hi - base, den),
    ))
}

/// Convenience for tests and configs: a rotation angle from a CF source.
pub fn angle_from_source(source: CfSource, seed: u64) -> Result<RotationAngle> {
    RotationAngle::new(CfStream::new(source, seed)?)
}

impl PartialEq for RotationAngle {
    fn eq(&self, other: &Self) -> bool {
        self.bits == other.bits && self.lo == other.lo && self.hi == other.hi
    }
}
