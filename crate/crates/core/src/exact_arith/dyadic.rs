//! Fixed-point interval kernels.
//!
//! A [`Dyadic`] is a closed interval `[lo, hi] · 2^-bits` with integer
//! endpoints. Every routine here rounds outward, so the true value is always
//! inside the returned interval; tightness is the caller's concern (ask for
//! more bits).

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dyadic {
    pub lo: BigInt,
    pub hi: BigInt,
    pub bits: u32,
}

pub(crate) fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

pub(crate) fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

pub(crate) fn floor_shr(a: &BigInt, s: u32) -> BigInt {
    floor_div(a, &(BigInt::one() << s))
}

pub(crate) fn ceil_shr(a: &BigInt, s: u32) -> BigInt {
    ceil_div(a, &(BigInt::one() << s))
}

/// `floor(q · 2^bits)`.
pub(crate) fn floor_scaled(q: &BigRational, bits: u32) -> BigInt {
    floor_div(&(q.numer() << bits), q.denom())
}

/// `ceil(q · 2^bits)`.
pub(crate) fn ceil_scaled(q: &BigRational, bits: u32) -> BigInt {
    ceil_div(&(q.numer() << bits), q.denom())
}

impl Dyadic {
    pub fn point(v: BigInt, bits: u32) -> Self {
        Dyadic {
            lo: v.clone(),
            hi: v,
            bits,
        }
    }

    pub fn from_rational(q: &BigRational, bits: u32) -> Self {
        Dyadic {
            lo: floor_scaled(q, bits),
            hi: ceil_scaled(q, bits),
            bits,
        }
    }

    /// Re-express at another precision, rounding outward when coarsening.
    pub fn rescale(&self, bits: u32) -> Self {
        if bits >= self.bits {
            let s = bits - self.bits;
            Dyadic {
                lo: &self.lo << s,
                hi: &self.hi << s,
                bits,
            }
        } else {
            let s = self.bits - bits;
            Dyadic {
                lo: floor_shr(&self.lo, s),
                hi: ceil_shr(&self.hi, s),
                bits,
            }
        }
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        let bits = self.bits.max(other.bits);
        let a = self.rescale(bits);
        let b = other.rescale(bits);
        Dyadic {
            lo: a.lo + b.lo,
            hi: a.hi + b.hi,
            bits,
        }
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic {
            lo: -&self.hi,
            hi: -&self.lo,
            bits: self.bits,
        }
    }

    /// Multiply by a rational of either sign.
    pub fn mul_rational(&self, q: &BigRational) -> Dyadic {
        let (n, d) = (q.numer(), q.denom());
        let a = &self.lo * n;
        let b = &self.hi * n;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        Dyadic {
            lo: floor_div(&lo, d),
            hi: ceil_div(&hi, d),
            bits: self.bits,
        }
    }

    /// Product of two intervals with non-negative endpoints.
    pub fn mul_nonneg(&self, other: &Dyadic) -> Dyadic {
        debug_assert!(!self.lo.is_negative() && !other.lo.is_negative());
        let bits = self.bits.max(other.bits);
        let a = self.rescale(bits);
        let b = other.rescale(bits);
        Dyadic {
            lo: floor_shr(&(&a.lo * &b.lo), bits),
            hi: ceil_shr(&(&a.hi * &b.hi), bits),
            bits,
        }
    }

    pub fn width(&self) -> BigInt {
        &self.hi - &self.lo
    }

    pub fn lo_rational(&self) -> BigRational {
        BigRational::new(self.lo.clone(), BigInt::one() << self.bits)
    }

    pub fn hi_rational(&self) -> BigRational {
        BigRational::new(self.hi.clone(), BigInt::one() << self.bits)
    }

    pub fn midpoint_f64(&self) -> f64 {
        let sum = &self.lo + &self.hi;
        let r = BigRational::new(sum, BigInt::one() << (self.bits + 1));
        r.to_f64().unwrap_or(f64::NAN)
    }

    pub fn contains_rational(&self, q: &BigRational) -> bool {
        let scaled_lo = &self.lo * q.denom();
        let scaled_hi = &self.hi * q.denom();
        let v = q.numer() << self.bits;
        scaled_lo <= v && v <= scaled_hi
    }
}

/// `Σ z^(2j+1)/(2j+1)` for a non-negative fixed-point `z ≤ 2^w/3 (1 + 2^-w)`,
/// rounded down (`upper = false`) or up (`upper = true`).
fn atanh_series(z: &BigInt, w: u32, upper: bool) -> BigInt {
    let shr = |v: BigInt| if upper { ceil_shr(&v, w) } else { floor_shr(&v, w) };
    let z2 = shr(z * z);
    let mut pow = z.clone();
    let mut sum = BigInt::zero();
    let mut j: u64 = 0;
    loop {
        let d = BigInt::from(2 * j + 1);
        sum += if upper {
            ceil_div(&pow, &d)
        } else {
            floor_div(&pow, &d)
        };
        if upper {
            // remaining terms are below pow · Σ (1/8)^i / 3 < 1 ulp once pow ≤ 1
            if pow <= BigInt::one() {
                sum += 2;
                break;
            }
        } else if pow.is_zero() {
            break;
        }
        pow = shr(&pow * &z2);
        j += 1;
    }
    sum
}

/// Enclosure of `ln 2` at `bits` fractional bits.
pub fn ln2(bits: u32) -> Dyadic {
    let w = bits + 16;
    let one = BigInt::one() << w;
    let third = BigInt::from(3);
    let lo = atanh_series(&floor_div(&one, &third), w, false) * 2;
    let hi = atanh_series(&ceil_div(&one, &third), w, true) * 2;
    Dyadic { lo, hi, bits: w }.rescale(bits)
}

/// Enclosure of `ln x` for a rational `x ≥ 1`.
pub fn ln_rational(x: &BigRational, bits: u32) -> Dyadic {
    assert!(*x >= BigRational::one(), "ln_rational expects x >= 1");
    let p = x.numer();
    let q = x.denom();
    // k = floor(log2 x)
    let mut k = p.bits() as i64 - q.bits() as i64;
    if k < 0 {
        k = 0;
    }
    let mut k = k as u32;
    while k > 0 && p < &(q << k) {
        k -= 1;
    }
    while p >= &(q << (k + 1)) {
        k += 1;
    }
    let scaled_q: BigInt = q << k;
    let z = BigRational::new(p - &scaled_q, p + &scaled_q);
    let guard = 24 + (64 - u64::from(k).leading_zeros());
    let w = bits + guard;
    let atanh_lo = atanh_series(&floor_scaled(&z, w), w, false) * 2;
    let atanh_hi = atanh_series(&ceil_scaled(&z, w), w, true) * 2;
    let l2 = ln2(w);
    let kk = BigInt::from(k);
    Dyadic {
        lo: &kk * &l2.lo + atanh_lo,
        hi: &kk * &l2.hi + atanh_hi,
        bits: w,
    }
    .rescale(bits)
}

/// `exp(y)` for a non-negative fixed-point `y`, rounded in one direction.
fn exp_nonneg(y: &BigInt, w: u32, upper: bool) -> BigInt {
    debug_assert!(!y.is_negative());
    // argument reduction: r = y / 2^s ≤ 1/2
    let int_bits = y.bits() as i64 - w as i64;
    let s: u32 = if int_bits + 2 > 0 { (int_bits + 2) as u32 } else { 0 };
    let guard = 24 + s;
    let ww = w + guard;
    // exact: r·2^ww = y · 2^(guard - s)
    let r: BigInt = y << (guard - s);
    let shr = |v: BigInt| if upper { ceil_shr(&v, ww) } else { floor_shr(&v, ww) };
    let one = BigInt::one() << ww;
    let mut sum = one.clone();
    let mut term = one;
    let mut i: u64 = 1;
    loop {
        let t = shr(&term * &r);
        let d = BigInt::from(i);
        term = if upper {
            ceil_div(&t, &d)
        } else {
            floor_div(&t, &d)
        };
        sum += &term;
        if upper {
            // r ≤ 1/2: the tail after this term is below term · Σ 2^-k ≤ term
            if term <= BigInt::one() {
                sum += 2;
                break;
            }
        } else if term.is_zero() {
            break;
        }
        i += 1;
    }
    for _ in 0..s {
        sum = shr(&sum * &sum);
    }
    if upper {
        ceil_shr(&sum, guard)
    } else {
        floor_shr(&sum, guard)
    }
}

fn exp_fixed(y: &BigInt, w: u32, upper: bool) -> BigInt {
    if !y.is_negative() {
        return exp_nonneg(y, w, upper);
    }
    // exp(y) = 1 / exp(-y); reciprocal flips the rounding direction
    let ww = w + 8;
    let e = exp_nonneg(&(-(y << 8u32)), ww, !upper);
    let num = BigInt::one() << (2 * ww);
    let r = if upper {
        ceil_div(&num, &e)
    } else {
        floor_div(&num, &e)
    };
    if upper {
        ceil_shr(&r, 8)
    } else {
        floor_shr(&r, 8)
    }
}

/// Enclosure of `exp` over an interval argument.
pub fn exp_interval(y: &Dyadic) -> Dyadic {
    Dyadic {
        lo: exp_fixed(&y.lo, y.bits, false),
        hi: exp_fixed(&y.hi, y.bits, true),
        bits: y.bits,
    }
}

/// Enclosure of `n^(-a)` for an integer `n ≥ 1` and rational `a > 0`.
///
/// Small denominators go through an exact integer root; everything else
/// through `exp(-a ln n)`.
pub fn inverse_power(n: u64, a: &BigRational, bits: u32) -> Dyadic {
    if n == 1 {
        return Dyadic::point(BigInt::one() << bits, bits);
    }
    let p = a.numer().to_u64();
    let q = a.denom().to_u64();
    if let (Some(p), Some(q)) = (p, q) {
        let n_bits = 64 - n.leading_zeros() as u64;
        if q <= 64 && p.saturating_mul(n_bits) <= 1 << 16 {
            // t = floor((2^(bits q) / n^p)^(1/q)) = nth_root(floor(2^(bits q)/n^p), q)
            let np = BigUint::from(n).pow(p as u32);
            let x = (BigUint::one() << (bits as u64 * q)) / np;
            let t = BigInt::from(x.nth_root(q as u32));
            return Dyadic {
                hi: &t + 1,
                lo: t,
                bits,
            };
        }
    }
    let w = bits + 16;
    let ln_n = ln_rational(&BigRational::from_integer(BigInt::from(n)), w);
    let y = ln_n.mul_rational(a).neg();
    exp_interval(&y).rescale(bits)
}

/// `Some(r)` when `v` is a perfect `k`-th power `r^k`.
pub(crate) fn exact_root(v: &BigUint, k: u32) -> Option<BigUint> {
    let r = v.nth_root(k);
    if r.pow(k) == *v {
        Some(r)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn assert_encloses(d: &Dyadic, v: f64, tol: f64) {
        let lo = d.lo_rational().to_f64().unwrap();
        let hi = d.hi_rational().to_f64().unwrap();
        assert!(lo <= v + tol && v - tol <= hi, "{lo} {hi} vs {v}");
        assert!(hi - lo < 1e-12, "too wide: {}", hi - lo);
    }

    #[test]
    fn ln2_matches_constant() {
        let d = ln2(80);
        assert_encloses(&d, std::f64::consts::LN_2, 1e-16);
        assert!(d.width() <= BigInt::from(4));
    }

    #[test]
    fn ln_of_rationals() {
        for (n, d) in [(1, 1), (3, 2), (10, 1), (1_000_003, 7), (7, 3)] {
            let q = rat(n, d);
            let e = ln_rational(&q, 70);
            assert_encloses(&e, (n as f64 / d as f64).ln(), 1e-15);
        }
    }

    #[test]
    fn exp_of_intervals() {
        for y in [-20.5f64, -3.0, -0.25, 0.0, 0.001, 1.0, 2.75] {
            let q = BigRational::from_float(y).unwrap();
            let d = exp_interval(&Dyadic::from_rational(&q, 80));
            let lo = d.lo_rational().to_f64().unwrap();
            let hi = d.hi_rational().to_f64().unwrap();
            let v = y.exp();
            assert!(lo <= v * (1.0 + 1e-15) && v * (1.0 - 1e-15) <= hi);
            assert!((hi - lo) <= 1e-15 * v.max(1.0));
        }
    }

    #[test]
    fn inverse_power_root_and_exp_routes_agree() {
        for n in [2u64, 3, 10, 32, 999, 1_000_000] {
            let a = rat(2, 5);
            let root = inverse_power(n, &a, 90);
            let w = 106;
            let via_exp = exp_interval(
                &ln_rational(&BigRational::from_integer(BigInt::from(n)), w)
                    .mul_rational(&a)
                    .neg(),
            )
            .rescale(90);
            // both enclose the same real, so they must overlap
            assert!(root.lo <= via_exp.hi && via_exp.lo <= root.hi, "n={n}");
            assert_encloses(&root, (n as f64).powf(-0.4), 1e-15);
        }
    }

    #[test]
    fn inverse_power_of_perfect_power() {
        let d = inverse_power(32, &rat(2, 5), 64);
        assert!(d.contains_rational(&rat(1, 4)));
        let d = inverse_power(16, &rat(1, 2), 64);
        assert!(d.contains_rational(&rat(1, 4)));
    }

    #[test]
    fn exact_root_detects_powers() {
        assert_eq!(exact_root(&BigUint::from(1024u32), 5), Some(BigUint::from(4u32)));
        assert_eq!(exact_root(&BigUint::from(1000u32), 2), None);
    }
}
