//! Target systems `(X, μ, T)`, observables and exact invariant projections.

use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exact_arith::digits::{compare_tail, tail_approx, DigitStream};
use crate::exact_arith::rotation::{compare_rotation, rotation_approx, RealPoint, RotationAngle};
use crate::exact_arith::threshold::Threshold;

#[derive(Clone, Debug)]
pub enum TestSystem {
    /// `x ↦ x + j mod k` on `Z_k`
    CyclicRotation { k: u64, j: i64 },
    /// `x ↦ x + β mod 1`
    IrrationalRotation(Arc<RotationAngle>),
    /// `x ↦ p·x mod 1`
    PowerTarget { p: u32 },
    /// coordinatewise action; ergodicity is declared
    Product { factors: Vec<TestSystem>, ergodic: bool },
}

impl TestSystem {
    pub fn cyclic(k: u64, j: i64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("cyclic rotation needs k >= 1"));
        }
        Ok(TestSystem::CyclicRotation { k, j })
    }

    pub fn power(p: u32) -> Result<Self> {
        if p < 2 {
            return Err(Error::invalid("power target needs p >= 2"));
        }
        Ok(TestSystem::PowerTarget { p })
    }

    pub fn is_ergodic(&self) -> bool {
        match self {
            TestSystem::CyclicRotation { k, j } => orbit_step(*k, *j) == 1,
            TestSystem::IrrationalRotation(_) | TestSystem::PowerTarget { .. } => true,
            TestSystem::Product { ergodic, .. } => *ergodic,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TestSystem::CyclicRotation { k, j } => format!("cyclic(k={k}, j={j})"),
            TestSystem::IrrationalRotation(a) => format!("rotation(beta={:.12})", a.approx()),
            TestSystem::PowerTarget { p } => format!("power(p={p})"),
            TestSystem::Product { factors, ergodic } => format!(
                "product[{}](ergodic={ergodic})",
                factors.iter().map(|f| f.describe()).collect::<Vec<_>>().join(" x ")
            ),
        }
    }
}

/// `gcd(j mod k, k)`: orbits of the cyclic rotation are cosets of this step.
fn orbit_step(k: u64, j: i64) -> u64 {
    let jm = (j as i128).rem_euclid(k as i128) as u64;
    jm.gcd(&k)
}

/// A point of a test system.
#[derive(Clone, Debug)]
pub enum TestPoint {
    Residue(u64),
    Real(RealPoint),
    Digits(DigitStream),
    Tuple(Vec<TestPoint>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    /// indicator of an interval of `[0, 1)` (of `x/k` on `Z_k`)
    IndicatorInterval {
        lo: BigRational,
        hi: BigRational,
        closed_lo: bool,
        closed_hi: bool,
    },
    /// `e^(2πi·m·x)` (with `x/k` on `Z_k`)
    Character(i64),
    /// values on `Z_k`
    Table(Vec<f64>),
    /// an observable of one factor of a product
    Coordinate(Box<Observable>, usize),
}

impl Observable {
    /// `1_{[lo, hi]}`.
    pub fn closed_indicator(lo: BigRational, hi: BigRational) -> Self {
        Observable::IndicatorInterval {
            lo,
            hi,
            closed_lo: true,
            closed_hi: true,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Observable::IndicatorInterval { .. } | Observable::Character(_) => 1.0,
            Observable::Table(v) => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Observable::Coordinate(inner, _) => inner.sup_norm(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Observable::IndicatorInterval {
                lo,
                hi,
                closed_lo,
                closed_hi,
            } => format!(
                "indicator{}{lo}, {hi}{}",
                if *closed_lo { "[" } else { "(" },
                if *closed_hi { "]" } else { ")" }
            ),
            Observable::Character(m) => format!("character(m={m})"),
            Observable::Table(v) => format!("table(len={})", v.len()),
            Observable::Coordinate(inner, i) => format!("coord{i}:{}", inner.describe()),
        }
    }
}

fn incompatible(system: &TestSystem, f: &Observable) -> Error {
    Error::Incompatible(format!(
        "observable {} does not apply to {}",
        f.describe(),
        system.describe()
    ))
}

/// Validate the `(system, observable, point)` triple once, up front.
pub fn check_compatible(system: &TestSystem, f: &Observable, x: &TestPoint) -> Result<()> {
    match (system, f, x) {
        (TestSystem::CyclicRotation { k, .. }, Observable::Table(v), TestPoint::Residue(r)) => {
            if v.len() as u64 != *k {
                return Err(Error::invalid(format!("table has {} entries, expected {k}", v.len())));
            }
            residue_ok(*k, *r)
        }
        (TestSystem::CyclicRotation { k, .. }, Observable::Character(_) | Observable::IndicatorInterval { .. }, TestPoint::Residue(r)) => {
            residue_ok(*k, *r)
        }
        (TestSystem::IrrationalRotation(_), Observable::Character(_) | Observable::IndicatorInterval { .. }, TestPoint::Real(_)) => Ok(()),
        (TestSystem::PowerTarget { p }, Observable::Character(_) | Observable::IndicatorInterval { .. }, TestPoint::Digits(d)) => {
            if d.base() != *p {
                return Err(Error::invalid("digit base must equal the power-map multiplier"));
            }
            Ok(())
        }
        (TestSystem::Product { factors, .. }, Observable::Coordinate(inner, i), TestPoint::Tuple(xs)) => {
            if factors.len() != xs.len() {
                return Err(Error::invalid("point arity does not match product"));
            }
            let (Some(sys), Some(pt)) = (factors.get(*i), xs.get(*i)) else {
                return Err(Error::invalid(format!("coordinate {i} out of range")));
            };
            check_compatible(sys, inner, pt)
        }
        _ => Err(incompatible(system, f)),
    }
}

fn residue_ok(k: u64, r: u64) -> Result<()> {
    if r >= k {
        return Err(Error::invalid(format!("residue {r} outside Z_{k}")));
    }
    Ok(())
}

fn in_interval(cmp: &mut dyn FnMut(&Threshold) -> Result<Ordering>, f: &Observable) -> Result<bool> {
    let Observable::IndicatorInterval {
        lo,
        hi,
        closed_lo,
        closed_hi,
    } = f
    else {
        unreachable!("indicator only")
    };
    let c_lo = cmp(&Threshold::constant(lo.clone()))?;
    let lo_ok = c_lo == Ordering::Greater || (*closed_lo && c_lo == Ordering::Equal);
    if !lo_ok {
        return Ok(false);
    }
    let c_hi = cmp(&Threshold::constant(hi.clone()))?;
    Ok(c_hi == Ordering::Less || (*closed_hi && c_hi == Ordering::Equal))
}

fn cis(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * t)
}

fn indicator(b: bool) -> Complex64 {
    Complex64::new(if b { 1.0 } else { 0.0 }, 0.0)
}

/// `f(T^r x)`, with exact orbit arithmetic and exact indicator decisions.
pub fn evaluate(system: &TestSystem, f: &Observable, x: &mut TestPoint, r: u64) -> Result<Complex64> {
    match (system, f, x) {
        (TestSystem::CyclicRotation { k, j }, _, TestPoint::Residue(x0)) => {
            let y = (*x0 as i128 + r as i128 * *j as i128).rem_euclid(*k as i128) as u64;
            cyclic_value(*k, f, y).ok_or_else(|| incompatible(system, f))
        }
        (TestSystem::IrrationalRotation(angle), Observable::Character(m), TestPoint::Real(p)) => {
            let t = rotation_approx(angle, p, r);
            Ok(cis((*m as f64 * t).fract()))
        }
        (TestSystem::IrrationalRotation(angle), Observable::IndicatorInterval { .. }, TestPoint::Real(p)) => {
            Ok(indicator(in_interval(&mut |t| compare_rotation(angle, p, r, t), f)?))
        }
        (TestSystem::PowerTarget { .. }, Observable::Character(m), TestPoint::Digits(d)) => {
            let t = tail_approx(d, r);
            Ok(cis((*m as f64 * t).fract()))
        }
        (TestSystem::PowerTarget { .. }, Observable::IndicatorInterval { .. }, TestPoint::Digits(d)) => {
            Ok(indicator(in_interval(&mut |t| compare_tail(d, r, t), f)?))
        }
        (TestSystem::Product { factors, .. }, Observable::Coordinate(inner, i), TestPoint::Tuple(xs)) => {
            match (factors.get(*i), xs.get_mut(*i)) {
                (Some(sys), Some(pt)) => evaluate(sys, inner, pt, r),
                _ => Err(incompatible(system, f)),
            }
        }
        _ => Err(incompatible(system, f)),
    }
}

fn cyclic_value(k: u64, f: &Observable, y: u64) -> Option<Complex64> {
    match f {
        Observable::Table(v) => v.get(y as usize).map(|&t| Complex64::new(t, 0.0)),
        Observable::Character(m) => {
            let e = (*m as i128 * y as i128).rem_euclid(k as i128) as f64 / k as f64;
            Some(cis(e))
        }
        Observable::IndicatorInterval {
            lo,
            hi,
            closed_lo,
            closed_hi,
        } => {
            let v = BigRational::new((y as i64).into(), (k as i64).into());
            let lo_ok = &v > lo || (*closed_lo && &v == lo);
            let hi_ok = &v < hi || (*closed_hi && &v == hi);
            Some(indicator(lo_ok && hi_ok))
        }
        Observable::Coordinate(..) => None,
    }
}

/// Lebesgue integral of an observable on the circle.
fn circle_integral(f: &Observable) -> Option<Complex64> {
    match f {
        Observable::IndicatorInterval { lo, hi, .. } => {
            let zero = BigRational::zero();
            let one = BigRational::one();
            let l = lo.clone().max(zero.clone()).min(one.clone());
            let h = hi.clone().max(zero).min(one);
            let len = if h > l { h - l } else { BigRational::zero() };
            Some(Complex64::new(len.to_f64()?, 0.0))
        }
        Observable::Character(m) => Some(if *m == 0 { Complex64::new(1.0, 0.0) } else { Complex64::zero() }),
        _ => None,
    }
}

/// `E_μ(f | I(T))(x)`: the integral for ergodic systems, the orbit mean on
/// non-ergodic cyclic rotations, and the factor projection for coordinates.
pub fn project_invariant(system: &TestSystem, f: &Observable, x: &TestPoint) -> Result<Complex64> {
    check_compatible(system, f, x)?;
    match (system, f, x) {
        (TestSystem::CyclicRotation { k, j }, Observable::Table(t), TestPoint::Residue(x0))
            if is_invariant_table(*k, *j, t) =>
        {
            Ok(Complex64::new(t[(*x0 % *k) as usize], 0.0))
        }
        (TestSystem::CyclicRotation { k, j }, _, TestPoint::Residue(x0)) => {
            let g = orbit_step(*k, *j);
            let len = *k / g;
            let mut s = Complex64::zero();
            for t in 0..len {
                let y = (*x0 + t * g) % *k;
                s += cyclic_value(*k, f, y).ok_or_else(|| incompatible(system, f))?;
            }
            Ok(s / len as f64)
        }
        (TestSystem::IrrationalRotation(_) | TestSystem::PowerTarget { .. }, _, _) => {
            circle_integral(f).ok_or_else(|| incompatible(system, f))
        }
        (TestSystem::Product { factors, .. }, Observable::Coordinate(inner, i), TestPoint::Tuple(xs)) => {
            project_invariant(&factors[*i], inner, &xs[*i])
        }
        _ => Err(incompatible(system, f)),
    }
}

/// Whether `f` is `T`-invariant on the cyclic rotation (constant on orbits).
pub fn is_invariant_table(k: u64, j: i64, table: &[f64]) -> bool {
    let g = orbit_step(k, j);
    (0..k).all(|y| table[y as usize] == table[(y % g) as usize])
}

/// Rational `frac(q)`, used to build translated points.
pub fn frac(q: &BigRational) -> BigRational {
    let f = q - q.floor();
    if f.is_negative() {
        f + BigRational::one()
    } else {
        f
    }
}
