//! Shrinking target sequences `E_n` with exact endpoints and closed-form
//! measures `ν(E_n) = c·n^(-a)`.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exact_arith::threshold::{Threshold, ThresholdForm, ThresholdParams};
use crate::source_dynamics::{
    invariant_measure_of, validate_intervals, MeasureKind, OpenInterval, SourceSystem, TargetSet,
};
use crate::stats::CompensatedSum;

#[derive(Clone, Debug)]
pub enum FamilyKind {
    /// `E_n = (0, c·n^(-a))`, `0 < c ≤ 1`
    ShrinkingInterval { c: BigRational, a: BigRational },
    /// `E_n = (0, b^(n^(-a)) - 1)`, `1 < b ≤ 2`
    GaussShrinking { b: BigRational, a: BigRational },
    /// `E_n = (0, r) ∪ (1 - r, 1)` with `r = n^(-a)/2`
    CenteredBall { a: BigRational },
    /// the same set for every `n`
    ConstantSet(TargetSet),
    /// `E_n = ⋃ (o_i, o_i + c_i·n^(-a))`
    FiniteUnion {
        components: Vec<(BigRational, BigRational)>,
        a: BigRational,
    },
}

#[derive(Clone, Debug)]
pub struct TargetFamily {
    kind: FamilyKind,
    params: Vec<Arc<ThresholdParams>>,
    offsets: Vec<Arc<BigRational>>,
    a_f: f64,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn check_exponent(a: &BigRational) -> Result<()> {
    if !a.is_positive() || a >= &rat(1, 2) {
        return Err(Error::invalid(format!("exponent a must lie in (0, 1/2), got {a}")));
    }
    Ok(())
}

impl TargetFamily {
    pub fn shrinking_interval(c: BigRational, a: BigRational) -> Result<Self> {
        check_exponent(&a)?;
        if !c.is_positive() || c > BigRational::one() {
            return Err(Error::invalid(format!("c must lie in (0, 1], got {c}")));
        }
        let params = vec![ThresholdParams::new(c.clone(), a.clone(), BigRational::zero())];
        Ok(Self::build(FamilyKind::ShrinkingInterval { c, a }, params, vec![]))
    }

    pub fn gauss_shrinking(b: BigRational, a: BigRational) -> Result<Self> {
        check_exponent(&a)?;
        if b <= BigRational::one() || b > rat(2, 1) {
            return Err(Error::invalid(format!("b must lie in (1, 2], got {b}")));
        }
        let params = vec![ThresholdParams::new(BigRational::one(), a.clone(), b.clone())];
        Ok(Self::build(FamilyKind::GaussShrinking { b, a }, params, vec![]))
    }

    pub fn centered_ball(a: BigRational) -> Result<Self> {
        check_exponent(&a)?;
        let params = vec![ThresholdParams::new(BigRational::one(), a.clone(), BigRational::zero())];
        Ok(Self::build(FamilyKind::CenteredBall { a }, params, vec![]))
    }

    pub fn constant(set: TargetSet) -> Result<Self> {
        if let TargetSet::Intervals(parts) = &set {
            validate_intervals(parts)?;
        }
        Ok(Self::build(FamilyKind::ConstantSet(set), vec![], vec![]))
    }

    /// Components `(o_i, o_i + c_i·n^(-a))`, which must be disjoint inside
    /// `[0, 1]` already at `n = 1`.
    pub fn finite_union(mut components: Vec<(BigRational, BigRational)>, a: BigRational) -> Result<Self> {
        check_exponent(&a)?;
        if components.is_empty() {
            return Err(Error::invalid("finite union needs at least one component"));
        }
        components.sort_by(|x, y| x.0.cmp(&y.0));
        let mut end = BigRational::zero();
        for (o, c) in &components {
            if !c.is_positive() || o < &end {
                return Err(Error::invalid("finite-union components must be disjoint with c > 0"));
            }
            end = o + c;
        }
        if end > BigRational::one() {
            return Err(Error::invalid("finite-union components must lie inside [0, 1]"));
        }
        let params = components
            .iter()
            .map(|(_, c)| ThresholdParams::new(c.clone(), a.clone(), BigRational::zero()))
            .collect();
        let offsets = components.iter().map(|(o, _)| Arc::new(o.clone())).collect();
        Ok(Self::build(FamilyKind::FiniteUnion { components, a }, params, offsets))
    }

    fn build(kind: FamilyKind, params: Vec<Arc<ThresholdParams>>, offsets: Vec<Arc<BigRational>>) -> Self {
        let a_f = match &kind {
            FamilyKind::ShrinkingInterval { a, .. }
            | FamilyKind::GaussShrinking { a, .. }
            | FamilyKind::CenteredBall { a }
            | FamilyKind::FiniteUnion { a, .. } => a.to_f64().unwrap_or(f64::NAN),
            FamilyKind::ConstantSet(_) => 0.0,
        };
        TargetFamily {
            kind,
            params,
            offsets,
            a_f,
        }
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    /// Decay exponent `a` (0 for constant sets).
    pub fn exponent(&self) -> f64 {
        self.a_f
    }

    pub fn exponent_exact(&self) -> Option<&BigRational> {
        match &self.kind {
            FamilyKind::ShrinkingInterval { a, .. }
            | FamilyKind::GaussShrinking { a, .. }
            | FamilyKind::CenteredBall { a }
            | FamilyKind::FiniteUnion { a, .. } => Some(a),
            FamilyKind::ConstantSet(_) => None,
        }
    }

    /// Upper bound `ℓ` on the number of components of any `E_n`.
    pub fn component_bound(&self) -> usize {
        match &self.kind {
            FamilyKind::ShrinkingInterval { .. } | FamilyKind::GaussShrinking { .. } => 1,
            FamilyKind::CenteredBall { .. } => 2,
            FamilyKind::ConstantSet(s) => s.component_count().max(1),
            FamilyKind::FiniteUnion { components, .. } => components.len(),
        }
    }

    /// Short descriptor for provenance records.
    pub fn describe(&self) -> String {
        match &self.kind {
            FamilyKind::ShrinkingInterval { c, a } => format!("shrinking(c={c}, a={a})"),
            FamilyKind::GaussShrinking { b, a } => format!("gauss_shrinking(b={b}, a={a})"),
            FamilyKind::CenteredBall { a } => format!("ball(a={a})"),
            FamilyKind::ConstantSet(_) => "constant".into(),
            FamilyKind::FiniteUnion { components, a } => {
                format!("union(components={}, a={a})", components.len())
            }
        }
    }

    /// `E_n` as open intervals with threshold endpoints (or symbols).
    pub fn target_set(&self, n: u64) -> TargetSet {
        assert!(n >= 1, "targets are indexed from 1");
        let zero = || Threshold::from_integer(0);
        match &self.kind {
            FamilyKind::ShrinkingInterval { .. } => {
                let hi = Threshold::with_params(ThresholdForm::ScaledPower, self.params[0].clone(), n);
                TargetSet::Intervals(vec![OpenInterval::new(zero(), hi)])
            }
            FamilyKind::GaussShrinking { .. } => {
                let hi = Threshold::with_params(ThresholdForm::ExpPowerMinusOne, self.params[0].clone(), n);
                TargetSet::Intervals(vec![OpenInterval::new(zero(), hi)])
            }
            FamilyKind::CenteredBall { .. } => {
                let r = Threshold::with_params(ThresholdForm::HalfPower, self.params[0].clone(), n);
                let lo = r.clone().one_minus();
                TargetSet::Intervals(vec![
                    OpenInterval::new(zero(), r),
                    OpenInterval::new(lo, Threshold::from_integer(1)),
                ])
            }
            FamilyKind::ConstantSet(s) => s.clone(),
            FamilyKind::FiniteUnion { .. } => TargetSet::Intervals(
                self.params
                    .iter()
                    .zip(&self.offsets)
                    .map(|(p, o)| {
                        let hi = Threshold::with_params(ThresholdForm::ScaledPower, p.clone(), n)
                            .shifted(o.clone());
                        OpenInterval::new(Threshold::constant(o.as_ref().clone()), hi)
                    })
                    .collect(),
            ),
        }
    }

    /// Reject families whose geometry does not match the system's measure.
    pub fn check_compatible(&self, system: &SourceSystem) -> Result<()> {
        let kind = system.measure_kind();
        let ok = match &self.kind {
            FamilyKind::ShrinkingInterval { .. }
            | FamilyKind::CenteredBall { .. }
            | FamilyKind::FiniteUnion { .. } => kind == MeasureKind::Lebesgue,
            FamilyKind::GaussShrinking { .. } => kind == MeasureKind::Gauss,
            FamilyKind::ConstantSet(TargetSet::Symbols(_)) => kind == MeasureKind::Stationary,
            FamilyKind::ConstantSet(TargetSet::Intervals(_)) => kind != MeasureKind::Stationary,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Incompatible(format!(
                "target family {} does not match source {}",
                self.describe(),
                system.describe()
            )))
        }
    }

    /// `ν(E_n)` computed from the geometry of `E_n`.
    pub fn target_measure(&self, n: u64, system: &SourceSystem) -> Result<f64> {
        self.check_compatible(system)?;
        invariant_measure_of(system, &self.target_set(n))
    }

    /// `(c, a)` with `ν(E_n) = c·n^(-a)`; constant sets give `(ν(E), 0)`.
    pub fn power_law(&self, system: &SourceSystem) -> Result<(f64, f64)> {
        self.check_compatible(system)?;
        let c = match &self.kind {
            FamilyKind::ShrinkingInterval { c, .. } => c.to_f64().unwrap_or(f64::NAN),
            FamilyKind::GaussShrinking { b, .. } => b.to_f64().unwrap_or(f64::NAN).log2(),
            FamilyKind::CenteredBall { .. } => 1.0,
            FamilyKind::FiniteUnion { components, .. } => components
                .iter()
                .map(|(_, c)| c.to_f64().unwrap_or(f64::NAN))
                .sum(),
            FamilyKind::ConstantSet(s) => invariant_measure_of(system, s)?,
        };
        Ok((c, self.a_f))
    }

    /// `W_N = Σ_{n ≤ N} ν(E_n)`.
    pub fn cumulative_expected(&self, n_max: u64, system: &SourceSystem) -> Result<f64> {
        let mut acc = CumulativeMeasure::new(self, system)?;
        Ok(acc.advance_to(n_max))
    }
}

/// Incrementally extended `W_N`; advancing never revisits earlier terms.
#[derive(Clone, Debug)]
pub struct CumulativeMeasure {
    c: f64,
    a: f64,
    n: u64,
    sum: CompensatedSum,
}

impl CumulativeMeasure {
    pub fn new(family: &TargetFamily, system: &SourceSystem) -> Result<Self> {
        let (c, a) = family.power_law(system)?;
        Ok(CumulativeMeasure {
            c,
            a,
            n: 0,
            sum: CompensatedSum::new(),
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `W_N`; `n_max` below the current position returns the current value.
    pub fn advance_to(&mut self, n_max: u64) -> f64 {
        while self.n < n_max {
            self.n += 1;
            let term = if self.a == 0.0 {
                self.c
            } else {
                self.c * (self.n as f64).powf(-self.a)
            };
            self.sum.add(term);
        }
        self.sum.value()
    }

    pub fn value(&self) -> f64 {
        self.sum.value()
    }
}

/// `W_N` for every `N` in an increasing grid.
pub fn cumulative_on_grid(family: &TargetFamily, system: &SourceSystem, grid: &[u64]) -> Result<Vec<f64>> {
    let mut acc = CumulativeMeasure::new(family, system)?;
    Ok(grid.iter().map(|&n| acc.advance_to(n)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::rotation::RotationAngle;

    fn lebesgue() -> SourceSystem {
        SourceSystem::power_map(2).unwrap()
    }

    #[test]
    fn exponent_range_enforced() {
        assert!(TargetFamily::shrinking_interval(rat(1, 1), rat(1, 2)).is_err());
        assert!(TargetFamily::shrinking_interval(rat(1, 1), rat(0, 1)).is_err());
        assert!(TargetFamily::shrinking_interval(rat(3, 2), rat(1, 4)).is_err());
        assert!(TargetFamily::gauss_shrinking(rat(1, 1), rat(1, 4)).is_err());
        assert!(TargetFamily::centered_ball(rat(2, 5)).is_ok());
    }

    #[test]
    fn shrinking_interval_sets() {
        let f = TargetFamily::shrinking_interval(rat(1, 1), rat(49, 100)).unwrap();
        let TargetSet::Intervals(parts) = f.target_set(1) else { panic!() };
        assert_eq!(parts[0].hi.exact_value(), Some(rat(1, 1)));
        let f = TargetFamily::shrinking_interval(rat(1, 1), rat(1, 4)).unwrap();
        let TargetSet::Intervals(parts) = f.target_set(16) else { panic!() };
        assert_eq!(parts[0].hi.exact_value(), Some(rat(1, 2)));
    }

    #[test]
    fn centered_ball_at_one() {
        let f = TargetFamily::centered_ball(rat(2, 5)).unwrap();
        let TargetSet::Intervals(parts) = f.target_set(1) else { panic!() };
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].hi.exact_value(), Some(rat(1, 2)));
        assert_eq!(parts[1].lo.exact_value(), Some(rat(1, 2)));
        let rot = SourceSystem::RotationMap(Arc::new(RotationAngle::golden()));
        for n in [1u64, 2, 100, 12345] {
            let m = f.target_measure(n, &rot).unwrap();
            assert!((m - (n as f64).powf(-0.4)).abs() < 1e-15);
        }
    }

    #[test]
    fn gauss_shrinking_measure() {
        let f = TargetFamily::gauss_shrinking(rat(2, 1), rat(2, 5)).unwrap();
        let TargetSet::Intervals(parts) = f.target_set(32) else { panic!() };
        assert!((parts[0].hi.approx() - 0.189207).abs() < 1e-6);
        for n in [1u64, 5, 32, 10_000] {
            let m = f.target_measure(n, &SourceSystem::GaussMap).unwrap();
            assert!((m - (n as f64).powf(-0.4)).abs() < 1e-14);
        }
        assert!(matches!(f.target_measure(3, &lebesgue()), Err(Error::Incompatible(_))));
    }

    #[test]
    fn cumulative_values() {
        let f = TargetFamily::shrinking_interval(rat(1, 1), rat(49, 100)).unwrap();
        let g = TargetFamily::constant(TargetSet::interval(rat(0, 1), rat(1, 4))).unwrap();
        assert_eq!(g.cumulative_expected(8, &lebesgue()).unwrap(), 2.0);
        let w = f.cumulative_expected(4, &lebesgue()).unwrap();
        let direct: f64 = (1..=4).map(|n: i32| (n as f64).powf(-0.49)).sum();
        assert!((w - direct).abs() < 1e-15);
    }

    #[test]
    fn finite_union_geometry() {
        let f = TargetFamily::finite_union(
            vec![(rat(0, 1), rat(1, 4)), (rat(1, 2), rat(1, 8))],
            rat(1, 3),
        )
        .unwrap();
        assert_eq!(f.component_bound(), 2);
        let m = f.target_measure(8, &lebesgue()).unwrap();
        assert!((m - 0.375 / 2.0).abs() < 1e-15);
        assert!(TargetFamily::finite_union(vec![(rat(0, 1), rat(3, 4)), (rat(1, 2), rat(1, 8))], rat(1, 3)).is_err());
    }
}
