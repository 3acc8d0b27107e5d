//! Precision-escalating comparison of a lazily refinable real against a
//! [`Threshold`].

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::threshold::Threshold;
use crate::error::{Error, Result};

/// Closed rational enclosure `[lo_num/lo_den, hi_num/hi_den]` with positive
/// denominators. Fractions are left unreduced.
#[derive(Clone, Debug)]
pub struct Enclosure {
    pub lo_num: BigInt,
    pub lo_den: BigInt,
    pub hi_num: BigInt,
    pub hi_den: BigInt,
    /// absolute accuracy (bits) worth requesting from the threshold side
    pub bits: u32,
}

/// A real number that can be bracketed ever more tightly.
pub trait Refinable {
    /// Cheap `f64` bracket, if one is available.
    fn float_bounds(&mut self) -> Result<Option<(f64, f64)>>;
    /// The exact value when it is a known rational.
    fn exact(&mut self) -> Result<Option<BigRational>>;
    /// Enclosure at refinement `level` (0, 1, 2, …); `None` once the
    /// configured cap is reached.
    fn refine(&mut self, level: u32) -> Result<Option<Enclosure>>;
    /// Description used in exhaustion errors.
    fn exhaustion(&self) -> Error;
}

/// `a/b` vs `c/d` for positive denominators.
pub(crate) fn cmp_frac(a: &BigInt, b: &BigInt, c: &BigInt, d: &BigInt) -> Ordering {
    (a * d).cmp(&(c * b))
}

/// Sign of `value - threshold`. Exact equality is reported only when both
/// sides are known rationals; otherwise refinement continues until the
/// enclosures separate or the cap is hit.
pub fn compare<V: Refinable + ?Sized>(value: &mut V, thr: &Threshold) -> Result<Ordering> {
    if let Some((lo, hi)) = value.float_bounds()? {
        let (tl, th) = thr.approx_bounds();
        if hi < tl {
            return Ok(Ordering::Less);
        }
        if lo > th {
            return Ok(Ordering::Greater);
        }
    }
    if let Some(q) = value.exact()? {
        if let Some(t) = thr.exact_value() {
            return Ok(q.cmp(&t));
        }
        // irrational threshold: only the threshold side needs refining
        let mut bits = 64u32;
        for _ in 0..12 {
            let t = thr.raw_enclosure(bits);
            let scale = BigInt::from(1) << t.bits;
            if cmp_frac(q.numer(), q.denom(), &t.lo, &scale) == Ordering::Less {
                return Ok(Ordering::Less);
            }
            if cmp_frac(q.numer(), q.denom(), &t.hi, &scale) == Ordering::Greater {
                return Ok(Ordering::Greater);
            }
            bits *= 2;
        }
        return Err(value.exhaustion());
    }
    let exact_thr = thr.exact_value();
    let mut level = 0;
    loop {
        let Some(enc) = value.refine(level)? else {
            return Err(value.exhaustion());
        };
        let (tl_num, tl_den, th_num, th_den) = match &exact_thr {
            Some(t) => (
                t.numer().clone(),
                t.denom().clone(),
                t.numer().clone(),
                t.denom().clone(),
            ),
            None => {
                let t = thr.raw_enclosure(enc.bits + 8);
                let scale = BigInt::from(1) << t.bits;
                (t.lo, scale.clone(), t.hi, scale)
            }
        };
        if cmp_frac(&enc.hi_num, &enc.hi_den, &tl_num, &tl_den) == Ordering::Less {
            return Ok(Ordering::Less);
        }
        if cmp_frac(&enc.lo_num, &enc.lo_den, &th_num, &th_den) == Ordering::Greater {
            return Ok(Ordering::Greater);
        }
        level += 1;
    }
}

/// Membership of a refinable real in the open interval `(lo, hi)`; an exact
/// endpoint hit counts as outside.
pub fn in_open_interval<V: Refinable + ?Sized>(
    value: &mut V,
    lo: &Threshold,
    hi: &Threshold,
) -> Result<bool> {
    if compare(value, lo)? != Ordering::Greater {
        return Ok(false);
    }
    Ok(compare(value, hi)? == Ordering::Less)
}

/// Outward-rounded `f64` bracket of `num / 2^bits` style quantities: widen by
/// one ulp on each side.
pub(crate) fn widen(lo: f64, hi: f64) -> (f64, f64) {
    (lo.next_down(), hi.next_up())
}
