//! Averages `(1/K) Σ_{n≤K} f(T^{r_n} x)` along return sequences.

mod systems;

pub use systems::{
    check_compatible, evaluate, frac, is_invariant_table, project_invariant, Observable, TestPoint, TestSystem,
};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::return_sequences::ReturnSequence;
use crate::stats::{lacunary_grid, ComplexSum};

pub const DEFAULT_GAMMA: f64 = 1.1;

/// Averages recorded on a lacunary checkpoint grid.
#[derive(Clone, Debug, Serialize)]
pub struct AverageTrace {
    pub checkpoints: Vec<u64>,
    #[serde(serialize_with = "ser_complex")]
    pub values: Vec<Complex64>,
    #[serde(serialize_with = "ser_one")]
    pub projection: Complex64,
    pub sequence: String,
    pub system: String,
    pub observable: String,
}

fn ser_complex<S: serde::Serializer>(v: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|z| (z.re, z.im)))
}

fn ser_one<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&(z.re, z.im), s)
}

impl AverageTrace {
    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    /// `|A_K - E(f|I)(x)|` at every checkpoint.
    pub fn gaps(&self) -> Vec<f64> {
        self.values.iter().map(|v| (v - self.projection).norm()).collect()
    }

    pub fn last(&self) -> Option<(u64, Complex64)> {
        Some((*self.checkpoints.last()?, *self.values.last()?))
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 1.0 && gamma <= 2.0) {
        return Err(Error::invalid(format!("lacunary base {gamma} outside (1, 2]")));
    }
    Ok(())
}

/// Stream `f(T^{r_n} x)` for `n = 1..=k_max` and record `A_K` on the grid
/// `⌊γ^i⌋ ∪ {k_max}`.
pub fn average_along(
    seq: &mut ReturnSequence,
    system: &TestSystem,
    f: &Observable,
    x: &mut TestPoint,
    k_max: u64,
    gamma: f64,
) -> Result<AverageTrace> {
    if k_max == 0 {
        return Err(Error::invalid("K_max must be at least 1"));
    }
    check_gamma(gamma)?;
    check_compatible(system, f, x)?;
    let projection = project_invariant(system, f, x)?;
    let grid = lacunary_grid(1, k_max, gamma);
    let mut values = Vec::with_capacity(grid.len());
    let mut sum = ComplexSum::default();
    let mut next = grid.iter().peekable();
    for k in 1..=k_max {
        let r = seq.term(k as usize)?;
        sum.add(evaluate(system, f, x, r)?);
        if next.peek() == Some(&&k) {
            next.next();
            values.push(sum.value() / k as f64);
        }
    }
    Ok(AverageTrace {
        checkpoints: grid,
        values,
        projection,
        sequence: seq.describe(),
        system: system.describe(),
        observable: f.describe(),
    })
}

/// Empirical distribution of `r_n mod m` over the first `k` terms.
pub fn residue_distribution(seq: &mut ReturnSequence, m: u64, k: u64) -> Result<Vec<f64>> {
    if m == 0 || k == 0 {
        return Err(Error::invalid("residue_distribution needs m >= 1 and K >= 1"));
    }
    let mut counts = vec![0u64; m as usize];
    for i in 1..=k {
        counts[(seq.term(i as usize)? % m) as usize] += 1;
    }
    Ok(counts.into_iter().map(|c| c as f64 / k as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::rotation::{RealPoint, RotationAngle};
    use crate::return_sequences::Formula;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use std::sync::Arc;

    fn naturals() -> ReturnSequence {
        ReturnSequence::deterministic(Formula::Linear).unwrap()
    }

    #[test]
    fn full_orbit_average_on_cyclic() {
        let sys = TestSystem::cyclic(4, 1).unwrap();
        let f = Observable::Table(vec![1.0, 3.0, -2.0, 6.0]);
        let tr = average_along(&mut naturals(), &sys, &f, &mut TestPoint::Residue(0), 4, 1.1).unwrap();
        let (k, v) = tr.last().unwrap();
        assert_eq!(k, 4);
        assert!((v.re - 2.0).abs() < 1e-15);
        assert!(tr.gaps().last().unwrap().abs() < 1e-15);
    }

    #[test]
    fn rotation_character_geometric_bound() {
        let angle = Arc::new(RotationAngle::golden());
        let beta = angle.approx();
        let sys = TestSystem::IrrationalRotation(angle);
        let mut x = TestPoint::Real(RealPoint::rational(BigRational::from_integer(BigInt::from(0))));
        let tr = average_along(&mut naturals(), &sys, &Observable::Character(1), &mut x, 5000, 1.1).unwrap();
        let denom = (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, std::f64::consts::TAU * beta)).norm();
        for (k, v) in tr.checkpoints.iter().zip(&tr.values) {
            assert!(v.norm() <= 2.0 / (*k as f64 * denom) + 1e-9, "K={k}");
        }
    }

    #[test]
    fn thue_morse_parities() {
        let mut seq = ReturnSequence::deterministic(Formula::Linear).unwrap();
        // r_n = n on Z_2 with x = 0 and f = (0, 1) gives the odd fraction
        let sys = TestSystem::cyclic(2, 1).unwrap();
        let f = Observable::Table(vec![0.0, 1.0]);
        let tr = average_along(&mut seq, &sys, &f, &mut TestPoint::Residue(0), 7, 1.5).unwrap();
        assert!((tr.last().unwrap().1.re - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn residue_frequencies() {
        let d = residue_distribution(&mut naturals(), 2, 100).unwrap();
        assert_eq!(d, vec![0.5, 0.5]);
        let mut sq = ReturnSequence::deterministic(Formula::Square).unwrap();
        let d = residue_distribution(&mut sq, 4, 1000).unwrap();
        assert_eq!(d[2], 0.0);
        assert_eq!(d[3], 0.0);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_range_enforced() {
        let sys = TestSystem::cyclic(2, 1).unwrap();
        let f = Observable::Table(vec![0.0, 1.0]);
        assert!(average_along(&mut naturals(), &sys, &f, &mut TestPoint::Residue(0), 10, 1.0).is_err());
        assert!(average_along(&mut naturals(), &sys, &f, &mut TestPoint::Residue(0), 10, 2.5).is_err());
    }
}
