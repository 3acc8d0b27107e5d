//! Monte Carlo diagnostics: the ratio `𝐖_N(ω)/W_N` and the decay of
//! `V̂_N = mean_x |N^(a−1)·Σ_{n≤N}(X_n − σ_n)·f(T^n x)|²`.

use num_complex::Complex64;
use serde::Serialize;

use crate::ergodic_averaging::{check_compatible, check_gamma, evaluate, Observable, TestPoint, TestSystem};
use crate::error::{Error, Result};
use crate::return_sequences::ReturnSequence;
use crate::source_dynamics::SourceSystem;
use crate::stats::{lacunary_grid, least_squares_slope, ComplexSum};
use crate::target_families::{cumulative_on_grid, TargetFamily};

pub const LLN_MIN_N: u64 = 1000;
pub const VN_MIN_SAMPLES: usize = 32;
/// Checkpoints below this are skipped in the `V̂_N` slope fit.
pub const VN_FIT_START: u64 = 100;

#[derive(Clone, Debug, Serialize)]
pub struct LlnTrace {
    pub checkpoints: Vec<u64>,
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl LlnTrace {
    pub fn final_ratio(&self) -> f64 {
        *self.ratios.last().expect("non-empty trace")
    }
}

/// `𝐖_N(ω)/W_N` on the grid `⌊γ^i⌋ ∪ {N_max}`.
pub fn lln_ratio_trace(
    seq: &mut ReturnSequence,
    family: &TargetFamily,
    system: &SourceSystem,
    n_max: u64,
    gamma: f64,
) -> Result<LlnTrace> {
    if n_max < LLN_MIN_N {
        return Err(Error::invalid(format!("ratio trace needs N_max >= {LLN_MIN_N}")));
    }
    check_gamma(gamma)?;
    let checkpoints = lacunary_grid(1, n_max, gamma);
    let expected = cumulative_on_grid(family, system, &checkpoints)?;
    let mut observed = Vec::with_capacity(checkpoints.len());
    for &n in &checkpoints {
        observed.push(seq.count_up_to(n)? as u64);
    }
    let ratios = observed.iter().zip(&expected).map(|(&o, &e)| o as f64 / e).collect();
    Ok(LlnTrace {
        checkpoints,
        observed,
        expected,
        ratios,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VnTrace {
    pub checkpoints: Vec<u64>,
    pub values: Vec<f64>,
    /// log-log slope over checkpoints `≥ 100` with positive `V̂_N`
    /// (`None` when `V̂_N` vanishes)
    pub slope: Option<f64>,
}

/// Estimate `V̂_N` over the given sample points of the target system.
/// `X_n` are the hits of `seq`, `σ_n = ν(E_n)` from `family` on `source`.
#[allow(clippy::too_many_arguments)]
pub fn vn_decay_diagnostic(
    seq: &mut ReturnSequence,
    family: &TargetFamily,
    source: &SourceSystem,
    target: &TestSystem,
    f: &Observable,
    points: &mut [TestPoint],
    n_max: u64,
    gamma: f64,
) -> Result<VnTrace> {
    if points.len() < VN_MIN_SAMPLES {
        return Err(Error::invalid(format!("V_N diagnostic needs at least {VN_MIN_SAMPLES} sample points")));
    }
    check_gamma(gamma)?;
    for x in points.iter() {
        check_compatible(target, f, x)?;
    }
    let (c, a) = family.power_law(source)?;
    let (hits, _) = seq.returns_up_to(n_max)?;
    let mut x_n = vec![false; n_max as usize + 1];
    for r in hits {
        x_n[r as usize] = true;
    }
    let sigma: Vec<f64> = (0..=n_max)
        .map(|n| if a == 0.0 { c } else { c * (n.max(1) as f64).powf(-a) })
        .collect();
    let checkpoints = lacunary_grid(1, n_max, gamma);
    let mut totals = vec![0.0; checkpoints.len()];
    for x in points.iter_mut() {
        let mut sum = ComplexSum::default();
        let mut next = 0;
        for n in 1..=n_max {
            let y = x_n[n as usize] as u8 as f64 - sigma[n as usize];
            if y != 0.0 {
                let v: Complex64 = evaluate(target, f, x, n)?;
                sum.add(v * y);
            }
            if checkpoints[next] == n {
                let scaled = sum.value() * (n as f64).powf(a - 1.0);
                totals[next] += scaled.norm_sqr();
                next += 1;
            }
        }
    }
    let values: Vec<f64> = totals.iter().map(|t| t / points.len() as f64).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = checkpoints
        .iter()
        .zip(&values)
        .filter(|(&n, &v)| n >= VN_FIT_START && v > 0.0)
        .map(|(&n, &v)| ((n as f64).ln(), v.ln()))
        .unzip();
    Ok(VnTrace {
        checkpoints,
        values,
        slope: least_squares_slope(&xs, &ys),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::rotation::{RealPoint, RotationAngle};
    use crate::source_dynamics::TargetSet;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use std::sync::Arc;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn full() -> TargetFamily {
        TargetFamily::constant(TargetSet::interval(rat(0, 1), rat(1, 1))).unwrap()
    }

    #[test]
    fn constant_family_ratio_is_one() {
        let sys = SourceSystem::power_map(2).unwrap();
        let mut seq = ReturnSequence::return_times_seeded(sys.clone(), full(), 3).unwrap();
        let tr = lln_ratio_trace(&mut seq, &full(), &sys, 2000, 1.1).unwrap();
        assert!(tr.ratios.iter().all(|&r| r == 1.0), "{:?}", tr.ratios);
    }

    #[test]
    fn constant_family_has_zero_vn() {
        let sys = SourceSystem::power_map(2).unwrap();
        let mut seq = ReturnSequence::return_times_seeded(sys.clone(), full(), 3).unwrap();
        let target = TestSystem::IrrationalRotation(Arc::new(RotationAngle::golden()));
        let mut pts: Vec<TestPoint> = (0..32).map(|i| TestPoint::Real(RealPoint::seeded(i))).collect();
        let tr = vn_decay_diagnostic(&mut seq, &full(), &sys, &target, &Observable::Character(1), &mut pts, 500, 1.2)
            .unwrap();
        assert!(tr.values.iter().all(|&v| v == 0.0));
        assert!(tr.slope.is_none());
    }

    #[test]
    fn bernoulli_ratio_near_one() {
        let sys = SourceSystem::power_map(2).unwrap();
        let fam = TargetFamily::shrinking_interval(rat(1, 1), rat(2, 5)).unwrap();
        let mut seq = ReturnSequence::bernoulli(0.4, 1.0, 5).unwrap();
        let tr = lln_ratio_trace(&mut seq, &fam, &sys, 100_000, 1.1).unwrap();
        let w = *tr.expected.last().unwrap();
        assert!((tr.final_ratio() - 1.0).abs() <= 4.0 / w.sqrt());
    }

    #[test]
    fn too_few_samples_rejected() {
        let sys = SourceSystem::power_map(2).unwrap();
        let mut seq = ReturnSequence::return_times_seeded(sys.clone(), full(), 3).unwrap();
        let target = TestSystem::cyclic(3, 1).unwrap();
        let mut pts = vec![TestPoint::Residue(0); 4];
        assert!(vn_decay_diagnostic(&mut seq, &full(), &sys, &target, &Observable::Character(1), &mut pts, 100, 1.2)
            .is_err());
    }
}
