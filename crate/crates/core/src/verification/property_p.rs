//! Exhaustive exact check of the decorrelation property
//! `|ℙ(E_{n₁}∩⋯∩E_{n_k}) − ℙ(E_{n₁})ℙ(E_{n₂}∩⋯∩E_{n_k})| ≤ ρ(n₂−n₁)·ℙ(E_{n₂}∩⋯∩E_{n_k})`
//! for events `E_n = {x_n ∈ E}` of a stationary Markov chain.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::source_dynamics::markov::MarkovChain;

pub const MAX_TUPLE_END: u64 = 40;
pub const MAX_TUPLE_LEN: usize = 4;

/// Decorrelation rate `ρ(m)`.
#[derive(Clone, Debug, PartialEq)]
pub enum RateModel {
    /// `C·λ^m`
    Geometric { c: BigRational, lambda: BigRational },
    /// `C/m`
    Harmonic { c: BigRational },
}

impl RateModel {
    pub fn geometric(c: BigRational, lambda: BigRational) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::invalid("rate constant must be positive"));
        }
        if !lambda.is_positive() || lambda >= BigRational::from_integer(1.into()) {
            return Err(Error::invalid("rate base must lie in (0, 1)"));
        }
        Ok(RateModel::Geometric { c, lambda })
    }

    pub fn harmonic(c: BigRational) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::invalid("rate constant must be positive"));
        }
        Ok(RateModel::Harmonic { c })
    }

    pub fn constant(&self) -> &BigRational {
        match self {
            RateModel::Geometric { c, .. } | RateModel::Harmonic { c } => c,
        }
    }

    /// `ρ(m) / C`.
    fn shape(&self, m: u64) -> BigRational {
        match self {
            RateModel::Geometric { lambda, .. } => pow(lambda, m),
            RateModel::Harmonic { .. } => BigRational::new(BigInt::from(1), BigInt::from(m)),
        }
    }

    pub fn eval(&self, m: u64) -> BigRational {
        self.constant() * self.shape(m)
    }

    pub fn describe(&self) -> String {
        match self {
            RateModel::Geometric { c, lambda } => format!("{c}*({lambda})^m"),
            RateModel::Harmonic { c } => format!("{c}/m"),
        }
    }
}

fn pow(x: &BigRational, e: u64) -> BigRational {
    num_traits::pow(x.clone(), e as usize)
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyPReport {
    pub chain: String,
    pub rate: String,
    /// representative tuples, all starting at `n₁ = 1`
    pub checked_tuples: Vec<Vec<u64>>,
    /// tuples covered by stationarity: every shift with `n_k ≤ n_max`
    pub covered_tuples: u64,
    pub max_violation: f64,
    pub pass: bool,
    /// tuple attaining the maximal violation
    pub witness: Vec<u64>,
    /// `max |L − ℙ(E)Q| / (shape(n₂−n₁)·Q)`: the smallest admissible `C`
    /// for the rate's shape
    pub smallest_constant: f64,
    pub smallest_constant_exact: String,
    /// whether every left-hand side vanished
    pub all_left_sides_zero: bool,
}

/// Check every tuple `n₁ < ⋯ < n_k`, `2 ≤ k ≤ k_max`, `n_k ≤ n_max`.
///
/// The chain is started from its stationary law, so joint probabilities
/// depend only on the gaps; each gap pattern is evaluated once with
/// `n₁ = 1` and stands for all of its shifts.
pub fn check_property_p(
    chain: &MarkovChain,
    event: &BTreeSet<usize>,
    n_max: u64,
    k_max: usize,
    rate: &RateModel,
) -> Result<PropertyPReport> {
    if n_max > MAX_TUPLE_END || k_max > MAX_TUPLE_LEN {
        return Err(Error::BudgetExceeded(format!(
            "property check limited to n_max <= {MAX_TUPLE_END}, k_max <= {MAX_TUPLE_LEN}"
        )));
    }
    if k_max < 2 || n_max < 2 {
        return Err(Error::invalid("property check needs k_max >= 2 and n_max >= 2"));
    }
    chain.check_event(event)?;
    let mass = chain.event_mass(event);
    let mut state = Search {
        chain,
        event,
        rate,
        mass,
        n_max,
        checked: Vec::new(),
        covered: 0,
        worst: None,
        c_min: BigRational::zero(),
        all_zero: true,
    };
    // suffix vectors are built from the tail, so enumerate tails first
    let one: Vec<BigRational> = (0..chain.state_count())
        .map(|i| BigRational::from_integer(BigInt::from(event.contains(&i) as u8)))
        .collect();
    state.extend(&mut Vec::new(), &one, 0, k_max - 1);
    let (violation, witness) = state.worst.expect("at least one tuple");
    Ok(PropertyPReport {
        chain: describe_chain(chain),
        rate: rate.describe(),
        covered_tuples: state.covered,
        checked_tuples: state.checked,
        max_violation: violation.to_f64().unwrap_or(f64::NAN),
        pass: !violation.is_positive(),
        witness,
        smallest_constant: state.c_min.to_f64().unwrap_or(f64::NAN),
        smallest_constant_exact: state.c_min.to_string(),
        all_left_sides_zero: state.all_zero,
    })
}

pub(crate) fn describe_chain(chain: &MarkovChain) -> String {
    let rows: Vec<String> = chain
        .transition_matrix()
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
        .collect();
    format!("markov[{}]", rows.join("; "))
}

struct Search<'a> {
    chain: &'a MarkovChain,
    event: &'a BTreeSet<usize>,
    rate: &'a RateModel,
    mass: BigRational,
    n_max: u64,
    checked: Vec<Vec<u64>>,
    covered: u64,
    worst: Option<(BigRational, Vec<u64>)>,
    c_min: BigRational,
    all_zero: bool,
}

impl Search<'_> {
    /// `tail` holds gaps `g₂, …` (in order) whose suffix vector is `h`;
    /// `span` is their sum; up to `more` further gaps may be prepended.
    fn extend(&mut self, tail: &mut Vec<u64>, h: &[BigRational], span: u64, more: usize) {
        if more == 0 {
            return;
        }
        let q = self.chain.stationary_dot(h);
        let mut g = 1;
        while span + g < self.n_max {
            let h_next = self.chain.apply_power(g as usize, h, self.event);
            let joint = self.chain.stationary_dot(&h_next);
            self.record(g, tail, &joint, &q, span + g);
            tail.insert(0, g);
            self.extend(tail, &h_next, span + g, more - 1);
            tail.remove(0);
            g += 1;
        }
    }

    fn record(&mut self, g1: u64, tail: &[u64], joint: &BigRational, q: &BigRational, span: u64) {
        let mut tuple = vec![1u64, 1 + g1];
        for g in tail {
            tuple.push(tuple.last().unwrap() + g);
        }
        let lhs = (joint - &self.mass * q).abs();
        if !lhs.is_zero() {
            self.all_zero = false;
        }
        let shape = self.rate.shape(g1);
        let violation = &lhs - self.rate.constant() * &shape * q;
        if q.is_positive() {
            let c = &lhs / (shape * q);
            if c > self.c_min {
                self.c_min = c;
            }
        }
        if self.worst.as_ref().is_none_or(|(w, _)| violation > *w) {
            self.worst = Some((violation, tuple.clone()));
        }
        self.covered += self.n_max - span;
        self.checked.push(tuple);
    }
}
