//! Threshold expressions: the interval endpoints of shrinking targets.
//!
//! A threshold is `offset ± core` where `core` is one of the closed forms
//! `c·n^(-a)`, `b^(n^(-a)) - 1`, `n^(-a)/2` or a constant. Parameters are
//! exact rationals; evaluation yields rigorous dyadic enclosures, plus a
//! cheap `f64` estimate with a guaranteed error radius used as a filter.

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::dyadic::{self, Dyadic};
use crate::error::{Error, Result};

/// Relative radius covering libm error in the `f64` estimate (pow, exp_m1
/// and ln are accurate to about one ulp; this leaves a wide margin).
const FLOAT_RADIUS: f64 = 1.0 / (1u64 << 36) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdForm {
    Constant,
    /// `c · n^(-a)`
    ScaledPower,
    /// `b^(n^(-a)) - 1`
    ExpPowerMinusOne,
    /// `n^(-a) / 2`
    HalfPower,
}

/// Shared exact parameters plus their `f64` mirrors.
#[derive(Debug)]
pub struct ThresholdParams {
    /// constant value for `Constant`, the factor `c` for `ScaledPower`
    pub c: BigRational,
    pub a: BigRational,
    pub b: BigRational,
    c_f: f64,
    a_f: f64,
    ln_b_f: f64,
}

impl ThresholdParams {
    pub fn new(c: BigRational, a: BigRational, b: BigRational) -> Arc<Self> {
        let c_f = c.to_f64().unwrap_or(f64::NAN);
        let a_f = a.to_f64().unwrap_or(f64::NAN);
        let ln_b_f = b.to_f64().map(f64::ln).unwrap_or(f64::NAN);
        Arc::new(ThresholdParams {
            c,
            a,
            b,
            c_f,
            a_f,
            ln_b_f,
        })
    }
}

#[derive(Clone, Debug)]
enum Affine {
    Identity,
    /// `1 - core`
    OneMinus,
    /// `offset + core`
    Shift(Arc<BigRational>),
}

#[derive(Clone, Debug)]
pub struct Threshold {
    form: ThresholdForm,
    params: Arc<ThresholdParams>,
    n: u64,
    affine: Affine,
}

fn zero_q() -> BigRational {
    BigRational::zero()
}

impl Threshold {
    pub fn constant(value: BigRational) -> Self {
        Threshold {
            form: ThresholdForm::Constant,
            params: ThresholdParams::new(value, zero_q(), zero_q()),
            n: 1,
            affine: Affine::Identity,
        }
    }

    pub fn from_integer(v: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(v)))
    }

    /// `c · n^(-a)` with `c > 0`, `a > 0`, `n ≥ 1`.
    pub fn scaled_power(c: BigRational, a: BigRational, n: u64) -> Result<Self> {
        if !c.is_positive() || !a.is_positive() || n == 0 {
            return Err(Error::invalid("scaled power needs c > 0, a > 0, n >= 1"));
        }
        Ok(Self::with_params(
            ThresholdForm::ScaledPower,
            ThresholdParams::new(c, a, zero_q()),
            n,
        ))
    }

    /// `b^(n^(-a)) - 1` with `b > 1`.
    pub fn exp_power_minus_one(b: BigRational, a: BigRational, n: u64) -> Result<Self> {
        if b <= BigRational::one() || !a.is_positive() || n == 0 {
            return Err(Error::invalid("b^(n^-a) - 1 needs b > 1, a > 0, n >= 1"));
        }
        Ok(Self::with_params(
            ThresholdForm::ExpPowerMinusOne,
            ThresholdParams::new(BigRational::one(), a, b),
            n,
        ))
    }

    /// `n^(-a) / 2`.
    pub fn half_power(a: BigRational, n: u64) -> Result<Self> {
        if !a.is_positive() || n == 0 {
            return Err(Error::invalid("n^(-a)/2 needs a > 0, n >= 1"));
        }
        Ok(Self::with_params(
            ThresholdForm::HalfPower,
            ThresholdParams::new(BigRational::one(), a, zero_q()),
            n,
        ))
    }

    /// Build from pre-shared parameters (used by target families so the hot
    /// path only clones an `Arc`).
    pub fn with_params(form: ThresholdForm, params: Arc<ThresholdParams>, n: u64) -> Self {
        Threshold {
            form,
            params,
            n,
            affine: Affine::Identity,
        }
    }

    /// `1 - self`.
    pub fn one_minus(mut self) -> Self {
        self.affine = match self.affine {
            Affine::Identity => Affine::OneMinus,
            _ => panic!("one_minus applies to a bare threshold"),
        };
        self
    }

    /// `offset + self`.
    pub fn shifted(mut self, offset: Arc<BigRational>) -> Self {
        self.affine = match self.affine {
            Affine::Identity => Affine::Shift(offset),
            _ => panic!("shifted applies to a bare threshold"),
        };
        self
    }

    pub fn form(&self) -> ThresholdForm {
        self.form
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    fn core_f64(&self) -> f64 {
        let p = &self.params;
        match self.form {
            ThresholdForm::Constant => p.c_f,
            ThresholdForm::ScaledPower => p.c_f * (self.n as f64).powf(-p.a_f),
            ThresholdForm::HalfPower => 0.5 * (self.n as f64).powf(-p.a_f),
            ThresholdForm::ExpPowerMinusOne => {
                ((self.n as f64).powf(-p.a_f) * p.ln_b_f).exp_m1()
            }
        }
    }

    /// `f64` estimate of the value.
    pub fn approx(&self) -> f64 {
        let core = self.core_f64();
        match &self.affine {
            Affine::Identity => core,
            Affine::OneMinus => 1.0 - core,
            Affine::Shift(o) => o.to_f64().unwrap_or(f64::NAN) + core,
        }
    }

    /// Interval guaranteed to contain the exact value.
    pub fn approx_bounds(&self) -> (f64, f64) {
        let core = self.core_f64();
        let (v, scale) = match &self.affine {
            Affine::Identity => (core, core.abs()),
            Affine::OneMinus => (1.0 - core, 1.0 + core.abs()),
            Affine::Shift(o) => {
                let of = o.to_f64().unwrap_or(f64::NAN);
                (of + core, of.abs() + core.abs())
            }
        };
        if !v.is_finite() {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let r = FLOAT_RADIUS * scale;
        (v - r, v + r)
    }

    /// Exact value when it is rational.
    pub fn exact_value(&self) -> Option<BigRational> {
        let core = self.exact_core()?;
        Some(match &self.affine {
            Affine::Identity => core,
            Affine::OneMinus => BigRational::one() - core,
            Affine::Shift(o) => o.as_ref() + core,
        })
    }

    /// `n^(-a)` when rational: `1/r` with `n^p = r^q`.
    fn exact_inverse_power(&self) -> Option<BigUint> {
        if self.n == 1 {
            return Some(BigUint::one());
        }
        let a = &self.params.a;
        let p = a.numer().to_u32()?;
        let q = a.denom().to_u32()?;
        let n_bits = 64 - self.n.leading_zeros() as u64;
        if q > 64 || (p as u64) * n_bits > 1 << 16 {
            return None;
        }
        dyadic::exact_root(&BigUint::from(self.n).pow(p), q)
    }

    fn exact_core(&self) -> Option<BigRational> {
        let p = &self.params;
        match self.form {
            ThresholdForm::Constant => Some(p.c.clone()),
            ThresholdForm::ScaledPower => {
                let r = self.exact_inverse_power()?;
                Some(&p.c / BigRational::from_integer(BigInt::from(r)))
            }
            ThresholdForm::HalfPower => {
                let r = self.exact_inverse_power()?;
                Some(BigRational::new(BigInt::one(), BigInt::from(r) * 2))
            }
            ThresholdForm::ExpPowerMinusOne => {
                // b^(1/r) is rational iff numerator and denominator are r-th powers
                let r = self.exact_inverse_power()?.to_u32()?;
                if r > 64 {
                    return None;
                }
                let num = dyadic::exact_root(p.b.numer().magnitude(), r)?;
                let den = dyadic::exact_root(p.b.denom().magnitude(), r)?;
                Some(BigRational::new(BigInt::from(num), BigInt::from(den)) - BigRational::one())
            }
        }
    }

    fn core_enclosure(&self, bits: u32) -> Dyadic {
        let p = &self.params;
        match self.form {
            ThresholdForm::Constant => Dyadic::from_rational(&p.c, bits),
            ThresholdForm::ScaledPower => {
                let extra = 8 + p.c.numer().bits().min(4096) as u32;
                dyadic::inverse_power(self.n, &p.a, bits + extra)
                    .mul_rational(&p.c)
                    .rescale(bits)
            }
            ThresholdForm::HalfPower => {
                // same integers, one more fractional bit: halves the value
                let e = dyadic::inverse_power(self.n, &p.a, bits + 1);
                Dyadic {
                    lo: e.lo,
                    hi: e.hi,
                    bits: bits + 2,
                }
            }
            ThresholdForm::ExpPowerMinusOne => {
                let w = bits + 16 + p.b.numer().bits().min(4096) as u32;
                let x = dyadic::inverse_power(self.n, &p.a, w);
                let ln_b = dyadic::ln_rational(&p.b, w);
                let e = dyadic::exp_interval(&x.mul_nonneg(&ln_b));
                let one = BigInt::one() << w;
                Dyadic {
                    lo: e.lo - &one,
                    hi: e.hi - one,
                    bits: w,
                }
                .rescale(bits)
            }
        }
    }

    /// Outward-rounded enclosure of the value with roughly `bits` bits of
    /// absolute accuracy. Used by the comparison kernel.
    pub fn raw_enclosure(&self, bits: u32) -> Dyadic {
        let core = self.core_enclosure(bits);
        match &self.affine {
            Affine::Identity => core,
            Affine::OneMinus => Dyadic::point(BigInt::one() << core.bits, core.bits).add(&core.neg()),
            Affine::Shift(o) => Dyadic::from_rational(o, core.bits).add(&core),
        }
    }

    /// Enclosure `(lo, hi)` with `hi - lo = 2^-precision_bits`: the dyadic
    /// cell containing the value. Cells are nested across precisions.
    pub fn eval(&self, precision_bits: u32) -> Result<(BigRational, BigRational)> {
        let p = precision_bits;
        let scale = BigInt::one() << p;
        let cell = |k: BigInt| {
            (
                BigRational::new(k.clone(), scale.clone()),
                BigRational::new(k + 1, scale.clone()),
            )
        };
        if let Some(v) = self.exact_value() {
            return Ok(cell(dyadic::floor_scaled(&v, p)));
        }
        let mut extra = 16u32;
        while extra <= 8192 {
            let e = self.raw_enclosure(p + extra);
            let s = e.bits - p;
            let k = dyadic::floor_shr(&e.lo, s);
            // the upper end must sit strictly below the next grid point
            if (&e.hi >> s) == k && e.hi < ((&k + 1) << s) {
                return Ok(cell(k));
            }
            extra *= 2;
        }
        Err(Error::PrecisionExhausted {
            what: "threshold cell",
            position: self.n,
            cap: 8192,
        })
    }
}

/// Free-function form of [`Threshold::eval`].
pub fn threshold_eval(expr: &Threshold, precision_bits: u32) -> Result<(BigRational, BigRational)> {
    expr.eval(precision_bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn contains(enc: &(BigRational, BigRational), v: &BigRational) -> bool {
        &enc.0 <= v && v <= &enc.1
    }

    #[test]
    fn scaled_power_at_one_is_c() {
        let t = Threshold::scaled_power(rat(1, 1), rat(2, 5), 1).unwrap();
        let e = t.eval(40).unwrap();
        assert!(contains(&e, &rat(1, 1)));
        assert_eq!(t.exact_value(), Some(rat(1, 1)));
    }

    #[test]
    fn sixteen_to_minus_half() {
        let t = Threshold::scaled_power(rat(1, 1), rat(1, 2), 16).unwrap();
        assert!(contains(&t.eval(64).unwrap(), &rat(1, 4)));
    }

    #[test]
    fn thirty_two_to_minus_two_fifths() {
        // 32^0.4 = 2^2
        let t = Threshold::scaled_power(rat(1, 1), rat(2, 5), 32).unwrap();
        let e = t.eval(100).unwrap();
        assert!(contains(&e, &rat(1, 4)));
        assert_eq!(&e.1 - &e.0, BigRational::new(BigInt::one(), BigInt::one() << 100u32));
    }

    #[test]
    fn gauss_threshold_value() {
        // 2^(32^-0.4) - 1 = 2^(1/4) - 1
        let t = Threshold::exp_power_minus_one(rat(2, 1), rat(2, 5), 32).unwrap();
        let e = t.eval(60).unwrap();
        let v = 2f64.powf(0.25) - 1.0;
        assert!((e.0.to_f64().unwrap() - v).abs() < 1e-15);
        assert!((0.18921 - v).abs() < 1e-5);
        assert!(t.exact_value().is_none());
        // 2^(1/1) - 1 at n = 1 is exact
        let one = Threshold::exp_power_minus_one(rat(4, 1), rat(2, 5), 1).unwrap();
        assert_eq!(one.exact_value(), Some(rat(3, 1)));
        // 4^(1/2) - 1 = 1 at n = 4, a = 1/2
        let sq = Threshold::exp_power_minus_one(rat(4, 1), rat(1, 2), 4).unwrap();
        assert_eq!(sq.exact_value(), Some(rat(1, 1)));
    }

    #[test]
    fn irrational_cells_are_nested() {
        let t = Threshold::half_power(rat(2, 5), 7).unwrap().one_minus();
        let mut prev = t.eval(8).unwrap();
        for p in [9u32, 20, 53, 64, 120, 300] {
            let e = t.eval(p).unwrap();
            assert!(prev.0 <= e.0 && e.1 <= prev.1, "p={p}");
            prev = e;
        }
        let v = 1.0 - 0.5 * 7f64.powf(-0.4);
        assert!((prev.0.to_f64().unwrap() - v).abs() < 1e-15);
    }

    #[test]
    fn approx_bounds_contain_exact_enclosure() {
        for n in [1u64, 2, 3, 17, 1000, 123_456_789] {
            for t in [
                Threshold::scaled_power(rat(3, 4), rat(2, 5), n).unwrap(),
                Threshold::half_power(rat(9, 20), n).unwrap().one_minus(),
                Threshold::exp_power_minus_one(rat(3, 2), rat(1, 3), n).unwrap(),
                Threshold::scaled_power(rat(1, 8), rat(1, 4), n)
                    .unwrap()
                    .shifted(Arc::new(rat(1, 2))),
            ] {
                let (lo, hi) = t.approx_bounds();
                let e = t.raw_enclosure(80);
                assert!(lo <= e.lo_rational().to_f64().unwrap());
                assert!(hi >= e.hi_rational().to_f64().unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Threshold::scaled_power(rat(0, 1), rat(1, 2), 3).is_err());
        assert!(Threshold::scaled_power(rat(1, 1), rat(-1, 2), 3).is_err());
        assert!(Threshold::exp_power_minus_one(rat(1, 1), rat(1, 2), 3).is_err());
        assert!(Threshold::half_power(rat(1, 2), 0).is_err());
    }
}
