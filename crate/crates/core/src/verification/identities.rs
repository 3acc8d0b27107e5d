//! The four-fold covariance expansion on finite probability spaces and the
//! Van der Corput inequality.

use std::collections::BTreeSet;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub const MAX_ATOMS: usize = 1 << 16;

/// A probability vector over atoms `0..len`.
#[derive(Clone, Debug)]
pub struct FiniteSpace {
    weights: Vec<BigRational>,
}

impl FiniteSpace {
    pub fn new(weights: Vec<BigRational>) -> Result<Self> {
        if weights.is_empty() || weights.len() > MAX_ATOMS {
            return Err(Error::invalid(format!("finite space needs 1..={MAX_ATOMS} atoms")));
        }
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::invalid("atom weights must be non-negative"));
        }
        if weights.iter().sum::<BigRational>() != BigRational::one() {
            return Err(Error::invalid("atom weights must sum to 1"));
        }
        Ok(FiniteSpace { weights })
    }

    pub fn uniform(atoms: usize) -> Result<Self> {
        let w = BigRational::new(1.into(), (atoms as i64).into());
        Self::new(vec![w; atoms])
    }

    pub fn atoms(&self) -> usize {
        self.weights.len()
    }

    pub fn prob(&self, set: &BTreeSet<usize>) -> BigRational {
        set.iter().filter_map(|&i| self.weights.get(i)).sum()
    }

    /// `ℙ(E_{i₁} ∩ ⋯)`.
    pub fn joint(&self, sets: &[&BTreeSet<usize>]) -> BigRational {
        self.weights
            .iter()
            .enumerate()
            .filter(|(i, _)| sets.iter().all(|s| s.contains(i)))
            .map(|(_, w)| w)
            .sum()
    }

    /// `Cov(1_{E₁}, Π 1_{E_j})`.
    pub fn cov_with_product(&self, first: &BTreeSet<usize>, rest: &[&BTreeSet<usize>]) -> BigRational {
        let mut all = vec![first];
        all.extend_from_slice(rest);
        self.joint(&all) - self.prob(first) * self.joint(rest)
    }
}

/// `(E[Y₁Y₂Y₃Y₄], seven-term covariance expansion)` with `Y_i = 1_{E_i} − ℙ(E_i)`.
pub fn fourfold_identity(space: &FiniteSpace, sets: [&BTreeSet<usize>; 4]) -> (BigRational, BigRational) {
    let [e1, e2, e3, e4] = sets;
    let s: Vec<BigRational> = sets.iter().map(|e| space.prob(e)).collect();

    let mut lhs = BigRational::zero();
    for (atom, w) in space.weights.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let mut y = w.clone();
        for (e, p) in sets.iter().zip(&s) {
            let x = if e.contains(&atom) { BigRational::one() } else { BigRational::zero() };
            y *= x - p;
        }
        lhs += y;
    }

    let cov = |rest: &[&BTreeSet<usize>]| space.cov_with_product(e1, rest);
    let (s2, s3, s4) = (&s[1], &s[2], &s[3]);
    let rhs = cov(&[e2, e3, e4]) - s4 * cov(&[e2, e3]) - s3 * cov(&[e2, e4]) + s3 * s4 * cov(&[e2])
        - s2 * cov(&[e3, e4])
        + s2 * s4 * cov(&[e3])
        + s2 * s3 * cov(&[e4]);
    (lhs, rhs)
}

fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

/// `(‖Σv_n‖², 2M⁻¹N·Σ‖v_n‖² + 4M⁻¹N·Σ_{m≤M}|Σ_{n≤N−m}⟨v_{n+m}, v_n⟩|)`.
pub fn vdc_check(vectors: &[Vec<Complex64>], m: usize) -> Result<(f64, f64)> {
    let n = vectors.len();
    if m < 1 || m > n {
        return Err(Error::invalid(format!("M = {m} outside 1..={n}")));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("vectors must share a dimension"));
    }
    let mut total = vec![Complex64::zero(); dim];
    for v in vectors {
        for (t, x) in total.iter_mut().zip(v) {
            *t += x;
        }
    }
    let lhs = inner(&total, &total).re;
    let scale = n as f64 / m as f64;
    let norms: f64 = vectors.iter().map(|v| inner(v, v).re).sum();
    let mut corr = 0.0;
    for shift in 1..=m {
        let s: Complex64 = (0..n - shift).map(|i| inner(&vectors[i + shift], &vectors[i])).sum();
        corr += s.norm();
    }
    Ok((lhs, 2.0 * scale * norms + 4.0 * scale * corr))
}

/// `lhs ≤ rhs` up to `1e-12` relative float slack.
pub fn vdc_holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + 1e-12 * rhs.abs().max(1.0)
}
