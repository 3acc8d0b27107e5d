//! Source systems `(Y, ν, S)` whose orbits generate return times.

pub mod markov;

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub use markov::{joint_event_probability, MarkovChain, MarkovPath, PathStart};

use crate::error::{Error, Result};
use crate::exact_arith::cf::{cf_tail_in_interval, CfStream};
use crate::exact_arith::digits::{tail_in_interval, DigitStream};
use crate::exact_arith::dyadic;
use crate::exact_arith::rotation::{rotation_in_interval, RealPoint, RotationAngle};
use crate::exact_arith::threshold::Threshold;

/// Open interval with threshold endpoints.
#[derive(Clone, Debug)]
pub struct OpenInterval {
    pub lo: Threshold,
    pub hi: Threshold,
}

impl OpenInterval {
    pub fn new(lo: Threshold, hi: Threshold) -> Self {
        OpenInterval { lo, hi }
    }

    /// Interval with rational endpoints.
    pub fn rational(lo: BigRational, hi: BigRational) -> Self {
        OpenInterval::new(Threshold::constant(lo), Threshold::constant(hi))
    }
}

/// A set `E ⊂ Y`: a finite union of disjoint open intervals of `[0, 1]`, or
/// a set of symbols for Markov shifts.
#[derive(Clone, Debug)]
pub enum TargetSet {
    Intervals(Vec<OpenInterval>),
    Symbols(BTreeSet<usize>),
}

impl TargetSet {
    pub fn interval(lo: BigRational, hi: BigRational) -> Self {
        TargetSet::Intervals(vec![OpenInterval::rational(lo, hi)])
    }

    pub fn symbols(xs: &[usize]) -> Self {
        TargetSet::Symbols(xs.iter().copied().collect())
    }

    /// Number of components (intervals or symbols).
    pub fn component_count(&self) -> usize {
        match self {
            TargetSet::Intervals(v) => v.len(),
            TargetSet::Symbols(s) => s.len(),
        }
    }
}

/// The invariant measure carried by a source system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureKind {
    Lebesgue,
    Gauss,
    Stationary,
}

#[derive(Clone, Debug)]
pub enum SourceSystem {
    /// `y ↦ p·y mod 1`
    PowerMap(u32),
    /// `y ↦ 1/y mod 1`
    GaussMap,
    /// `y ↦ y + α mod 1`
    RotationMap(Arc<RotationAngle>),
    /// the shift on paths of a finite chain, with a distinguished event
    MarkovShift {
        chain: Arc<MarkovChain>,
        event: BTreeSet<usize>,
    },
}

impl SourceSystem {
    pub fn power_map(p: u32) -> Result<Self> {
        if p < 2 {
            return Err(Error::invalid("power map needs p >= 2"));
        }
        Ok(SourceSystem::PowerMap(p))
    }

    pub fn measure_kind(&self) -> MeasureKind {
        match self {
            SourceSystem::PowerMap(_) | SourceSystem::RotationMap(_) => MeasureKind::Lebesgue,
            SourceSystem::GaussMap => MeasureKind::Gauss,
            SourceSystem::MarkovShift { .. } => MeasureKind::Stationary,
        }
    }

    /// Short descriptor for provenance records.
    pub fn describe(&self) -> String {
        match self {
            SourceSystem::PowerMap(p) => format!("power(p={p})"),
            SourceSystem::GaussMap => "gauss".into(),
            SourceSystem::RotationMap(a) => format!("rotation(alpha={:.12})", a.approx()),
            SourceSystem::MarkovShift { chain, event } => {
                format!("markov(states={}, event={:?})", chain.state_count(), event)
            }
        }
    }
}

/// A point of a source system.
#[derive(Clone, Debug)]
pub enum SourcePoint {
    Digits(DigitStream),
    Cf(CfStream),
    Real(RealPoint),
    Path(MarkovPath),
}

impl SourcePoint {
    /// A seeded random point for the given system: i.i.d. digits, a uniform
    /// real's continued fraction, uniform binary digits, or a stationary path.
    pub fn seeded(system: &SourceSystem, seed: u64) -> Result<Self> {
        use crate::exact_arith::cf::CfSource;
        use crate::exact_arith::digits::DigitSource;
        Ok(match system {
            SourceSystem::PowerMap(p) => {
                SourcePoint::Digits(DigitStream::new(*p, DigitSource::SeededUniform, seed)?)
            }
            SourceSystem::GaussMap => SourcePoint::Cf(CfStream::new(CfSource::SeededUniform, seed)?),
            SourceSystem::RotationMap(_) => SourcePoint::Real(RealPoint::seeded(seed)),
            SourceSystem::MarkovShift { chain, .. } => {
                SourcePoint::Path(MarkovPath::new(chain.clone(), PathStart::Stationary, seed)?)
            }
        })
    }
}

fn mismatch(system: &SourceSystem) -> Error {
    Error::Incompatible(format!("point representation does not match {}", system.describe()))
}

/// Exact truth of `S^n y ∈ E`.
pub fn orbit_membership(
    system: &SourceSystem,
    y: &mut SourcePoint,
    n: u64,
    e: &TargetSet,
) -> Result<bool> {
    match (system, e) {
        (SourceSystem::MarkovShift { .. }, TargetSet::Symbols(s)) => match y {
            SourcePoint::Path(path) => Ok(s.contains(&path.state(n))),
            _ => Err(mismatch(system)),
        },
        (SourceSystem::MarkovShift { .. }, TargetSet::Intervals(_)) => Err(Error::Incompatible(
            "Markov shifts take symbol events, not intervals".into(),
        )),
        (_, TargetSet::Symbols(_)) => Err(Error::Incompatible(
            "symbol events apply to Markov shifts only".into(),
        )),
        (_, TargetSet::Intervals(parts)) => {
            for iv in parts {
                let hit = match (system, &mut *y) {
                    (SourceSystem::PowerMap(p), SourcePoint::Digits(ds)) if ds.base() == *p => {
                        tail_in_interval(ds, n, &iv.lo, &iv.hi)?
                    }
                    (SourceSystem::GaussMap, SourcePoint::Cf(cf)) => {
                        cf_tail_in_interval(cf, n, &iv.lo, &iv.hi)?
                    }
                    (SourceSystem::RotationMap(a), SourcePoint::Real(x)) => {
                        rotation_in_interval(a, x, n, &iv.lo, &iv.hi)?
                    }
                    _ => return Err(mismatch(system)),
                };
                if hit {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

const MEASURE_BITS: u32 = 96;

/// Order of two thresholds, `None` if not separated by 512-bit enclosures.
pub fn threshold_cmp(a: &Threshold, b: &Threshold) -> Option<Ordering> {
    if let (Some(x), Some(y)) = (a.exact_value(), b.exact_value()) {
        return Some(x.cmp(&y));
    }
    let (al, ah) = a.approx_bounds();
    let (bl, bh) = b.approx_bounds();
    if ah < bl {
        return Some(Ordering::Less);
    }
    if al > bh {
        return Some(Ordering::Greater);
    }
    let (ea, eb) = (a.raw_enclosure(512), b.raw_enclosure(512));
    if ea.hi_rational() < eb.lo_rational() {
        Some(Ordering::Less)
    } else if ea.lo_rational() > eb.hi_rational() {
        Some(Ordering::Greater)
    } else {
        None
    }
}

/// Check that components are ordered, disjoint and inside `[0, 1]`.
pub fn validate_intervals(parts: &[OpenInterval]) -> Result<()> {
    let zero = Threshold::from_integer(0);
    let one = Threshold::from_integer(1);
    let mut prev_hi = &zero;
    for (i, iv) in parts.iter().enumerate() {
        let ordered = threshold_cmp(&iv.lo, &iv.hi) == Some(Ordering::Less);
        let after = matches!(threshold_cmp(prev_hi, &iv.lo), Some(Ordering::Less | Ordering::Equal));
        let inside = matches!(threshold_cmp(&iv.hi, &one), Some(Ordering::Less | Ordering::Equal));
        if !ordered || !after || !inside {
            return Err(Error::invalid(format!(
                "interval components must be sorted, disjoint and inside [0,1] (component {i})"
            )));
        }
        prev_hi = &iv.hi;
    }
    Ok(())
}

fn enclosure_rationals(t: &Threshold) -> (BigRational, BigRational) {
    let d = t.raw_enclosure(MEASURE_BITS);
    (d.lo_rational(), d.hi_rational())
}

/// `log₂(hi_r / lo_r)` enclosure for `1 ≤ lo_r ≤ hi_r` rational bounds.
fn log2_ratio_enclosure(num_lo: &BigRational, num_hi: &BigRational, den_lo: &BigRational, den_hi: &BigRational) -> (BigRational, BigRational) {
    let one = BigRational::one();
    let r_lo = (num_lo / den_hi).max(one.clone());
    let r_hi = (num_hi / den_lo).max(one);
    let ln_lo = dyadic::ln_rational(&r_lo, MEASURE_BITS);
    let ln_hi = dyadic::ln_rational(&r_hi, MEASURE_BITS);
    let ln2 = dyadic::ln2(MEASURE_BITS);
    (
        (ln_lo.lo_rational() / ln2.hi_rational()).max(BigRational::zero()),
        ln_hi.hi_rational() / ln2.lo_rational(),
    )
}

/// Rigorous enclosure of `ν(E)`.
pub fn invariant_measure_enclosure(system: &SourceSystem, e: &TargetSet) -> Result<(BigRational, BigRational)> {
    match (system.measure_kind(), e) {
        (MeasureKind::Stationary, TargetSet::Symbols(s)) => {
            let SourceSystem::MarkovShift { chain, .. } = system else {
                unreachable!("stationary measure belongs to Markov shifts")
            };
            chain.check_event(s)?;
            let m = chain.event_mass(s);
            Ok((m.clone(), m))
        }
        (MeasureKind::Stationary, TargetSet::Intervals(_)) | (_, TargetSet::Symbols(_)) => {
            Err(Error::Incompatible(format!("set type does not match {}", system.describe())))
        }
        (kind, TargetSet::Intervals(parts)) => {
            validate_intervals(parts)?;
            let mut lo_sum = BigRational::zero();
            let mut hi_sum = BigRational::zero();
            for iv in parts {
                let (al, ah) = enclosure_rationals(&iv.lo);
                let (bl, bh) = enclosure_rationals(&iv.hi);
                match kind {
                    MeasureKind::Lebesgue => {
                        lo_sum += (&bl - &ah).max(BigRational::zero());
                        hi_sum += bh - al;
                    }
                    MeasureKind::Gauss => {
                        let one = BigRational::one();
                        let (l, h) = log2_ratio_enclosure(&(&one + &bl), &(&one + &bh), &(&one + &al), &(&one + &ah));
                        lo_sum += l;
                        hi_sum += h;
                    }
                    MeasureKind::Stationary => unreachable!(),
                }
            }
            Ok((lo_sum, hi_sum))
        }
    }
}

/// `ν(E)`: exact for rational-endpoint Lebesgue sets, otherwise the
/// midpoint of an enclosure of width below `2^-80`.
pub fn invariant_measure_of(system: &SourceSystem, e: &TargetSet) -> Result<f64> {
    if let (MeasureKind::Lebesgue, TargetSet::Intervals(parts)) = (system.measure_kind(), e) {
        if let Some(q) = exact_lebesgue(parts) {
            validate_intervals(parts)?;
            return Ok(q.to_f64().unwrap_or(f64::NAN));
        }
    }
    let (lo, hi) = invariant_measure_enclosure(system, e)?;
    let mid = (lo + hi) / BigRational::from_integer(BigInt::from(2));
    Ok(mid.to_f64().unwrap_or(f64::NAN))
}

/// Lebesgue measure of a set with rational endpoints.
pub fn exact_lebesgue(parts: &[OpenInterval]) -> Option<BigRational> {
    let mut s = BigRational::zero();
    for iv in parts {
        s += iv.hi.exact_value()? - iv.lo.exact_value()?;
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::digits::DigitSource;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn thue_morse(len: usize) -> Vec<u32> {
        (0..len).map(|k| (k as u32).count_ones() % 2).collect()
    }

    #[test]
    fn power_map_membership() {
        let sys = SourceSystem::power_map(2).unwrap();
        let ds = DigitStream::new(2, DigitSource::FixedList(thue_morse(64)), 0).unwrap();
        let mut y = SourcePoint::Digits(ds);
        let e = TargetSet::interval(rat(0, 1), rat(1, 2));
        assert!(orbit_membership(&sys, &mut y, 3, &e).unwrap());
        assert!(!orbit_membership(&sys, &mut y, 2, &e).unwrap());
    }

    #[test]
    fn rotation_full_interval() {
        let sys = SourceSystem::RotationMap(Arc::new(RotationAngle::golden()));
        let mut y = SourcePoint::seeded(&sys, 3).unwrap();
        let e = TargetSet::interval(rat(0, 1), rat(1, 1));
        for n in [1u64, 10, 1_000_000] {
            assert!(orbit_membership(&sys, &mut y, n, &e).unwrap());
        }
    }

    #[test]
    fn markov_alternating() {
        let chain = Arc::new(MarkovChain::from_rows(&[&[(0, 1), (1, 1)], &[(1, 1), (0, 1)]]).unwrap());
        let event: BTreeSet<usize> = [1].into_iter().collect();
        let sys = SourceSystem::MarkovShift { chain: chain.clone(), event: event.clone() };
        let mut y = SourcePoint::Path(MarkovPath::new(chain, PathStart::State(0), 0).unwrap());
        let e = TargetSet::Symbols(event);
        assert!(orbit_membership(&sys, &mut y, 1, &e).unwrap());
        assert!(!orbit_membership(&sys, &mut y, 2, &e).unwrap());
    }

    #[test]
    fn mismatched_point_is_rejected() {
        let sys = SourceSystem::GaussMap;
        let mut y = SourcePoint::Real(RealPoint::seeded(1));
        let e = TargetSet::interval(rat(0, 1), rat(1, 1));
        assert!(matches!(orbit_membership(&sys, &mut y, 1, &e), Err(Error::Incompatible(_))));
    }

    #[test]
    fn measures() {
        let leb = SourceSystem::power_map(2).unwrap();
        assert_eq!(invariant_measure_of(&leb, &TargetSet::interval(rat(0, 1), rat(1, 4))).unwrap(), 0.25);
        let g = SourceSystem::GaussMap;
        let full = invariant_measure_of(&g, &TargetSet::interval(rat(0, 1), rat(1, 1))).unwrap();
        assert!((full - 1.0).abs() < 1e-15);
        // (0, 2^(n^-a) - 1) has Gauss measure n^-a
        for n in [1u64, 7, 32, 1000] {
            let t = Threshold::exp_power_minus_one(rat(2, 1), rat(2, 5), n).unwrap();
            let e = TargetSet::Intervals(vec![OpenInterval::new(Threshold::from_integer(0), t)]);
            let m = invariant_measure_of(&g, &e).unwrap();
            assert!((m - (n as f64).powf(-0.4)).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn overlapping_components_rejected() {
        let sys = SourceSystem::power_map(3).unwrap();
        let e = TargetSet::Intervals(vec![
            OpenInterval::rational(rat(0, 1), rat(1, 2)),
            OpenInterval::rational(rat(1, 3), rat(2, 3)),
        ]);
        assert!(invariant_measure_of(&sys, &e).is_err());
        // touching open intervals are fine
        let e = TargetSet::Intervals(vec![
            OpenInterval::rational(rat(0, 1), rat(1, 2)),
            OpenInterval::rational(rat(1, 2), rat(1, 1)),
        ]);
        assert_eq!(invariant_measure_of(&sys, &e).unwrap(), 1.0);
    }

    #[test]
    fn markov_measure() {
        let chain = Arc::new(MarkovChain::two_state(rat(1, 10), rat(3, 10)).unwrap());
        let event: BTreeSet<usize> = [1].into_iter().collect();
        let sys = SourceSystem::MarkovShift { chain, event: event.clone() };
        assert_eq!(invariant_measure_of(&sys, &TargetSet::Symbols(event)).unwrap(), 0.25);
    }
}
