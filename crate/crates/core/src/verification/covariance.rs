//! Pair covariance sums `Σ_{n<m≤N} Cov(X_n, X_m)` for `X_n = 1{x_n ∈ E}`
//! on a stationary Markov chain, and the `N^(2−2a−ε)` growth check.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::source_dynamics::markov::MarkovChain;
use crate::stats::{lacunary_grid, least_squares_slope};

/// Largest `N` handled by exact transfer-matrix summation.
pub const EXACT_SUM_LIMIT: u64 = 10_000;
/// First point of the grid used by [`covariance_sum_bound`].
pub const BOUND_GRID_START: u64 = 100;
/// Four grid points per decade.
const BOUND_GRID_RATIO: f64 = 1.778_279_410_038_923;
/// Allowed least-squares slope of `log(sum/N^e)` against `log N`.
pub const TREND_SLOPE_LIMIT: f64 = 0.05;

/// Exact sum for `N ≤ 10⁴`.
///
/// With `P = A/L` for an integer matrix `A`, `Σ_d (N−d)·π D P^d 1_E` is
/// accumulated as one integer vector by Horner's rule in `L` and divided
/// by `L^(N−1)` once at the end.
pub fn covariance_sum_exact(chain: &MarkovChain, event: &BTreeSet<usize>, n: u64) -> Result<BigRational> {
    chain.check_event(event)?;
    if n > EXACT_SUM_LIMIT {
        return Err(Error::BudgetExceeded(format!("exact covariance sum limited to N <= {EXACT_SUM_LIMIT}")));
    }
    if n < 2 {
        return Ok(BigRational::zero());
    }
    let p = chain.transition_matrix();
    let k = p.len();
    let l = p
        .iter()
        .flatten()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let a: Vec<Vec<BigInt>> = p
        .iter()
        .map(|row| row.iter().map(|v| v.numer() * (&l / v.denom())).collect())
        .collect();
    let mut w: Vec<BigInt> = (0..k).map(|i| BigInt::from(event.contains(&i) as u8)).collect();
    let mut acc = vec![BigInt::zero(); k];
    for d in 1..n {
        w = a
            .iter()
            .map(|row| row.iter().zip(&w).filter(|(x, _)| !x.is_zero()).map(|(x, y)| x * y).sum())
            .collect();
        let weight = BigInt::from(n - d);
        for (s, wi) in acc.iter_mut().zip(&w) {
            *s = &*s * &l + &weight * wi;
        }
    }
    let pi = chain.stationary();
    let dot: BigRational = event.iter().map(|&i| &pi[i] * BigRational::from_integer(acc[i].clone())).sum();
    let joint = dot / BigRational::from_integer(num_traits::pow(l, (n - 1) as usize));
    let mass = chain.event_mass(event);
    let pairs = BigRational::from_integer(BigInt::from(n) * BigInt::from(n - 1) / 2);
    Ok(joint - &mass * &mass * pairs)
}

/// Closed form for two-state chains:
/// `π₀π₁·λ/(1−λ)·(N − (1−λ^N)/(1−λ))` with `λ = 1 − p − q`.
pub fn covariance_sum_closed_form(chain: &MarkovChain, event: &BTreeSet<usize>, n: u64) -> Result<f64> {
    chain.check_event(event)?;
    let lambda = chain
        .two_state_lambda()
        .ok_or_else(|| Error::invalid("closed form needs a two-state chain"))?;
    if event.len() != 1 || n < 2 {
        return Ok(0.0);
    }
    let pi = chain.stationary();
    let v = (&pi[0] * &pi[1]).to_f64().unwrap_or(f64::NAN);
    let l = lambda.to_f64().unwrap_or(f64::NAN);
    let nf = n as f64;
    let geo = (1.0 - l.powf(nf)) / (1.0 - l);
    Ok(v * l / (1.0 - l) * (nf - geo))
}

/// Exact path up to `N = 10⁴`, the two-state closed form beyond.
pub fn covariance_sum(chain: &MarkovChain, event: &BTreeSet<usize>, n: u64) -> Result<f64> {
    if n <= EXACT_SUM_LIMIT {
        return Ok(covariance_sum_exact(chain, event, n)?.to_f64().unwrap_or(f64::NAN));
    }
    if chain.state_count() == 2 {
        return covariance_sum_closed_form(chain, event, n);
    }
    Err(Error::BudgetExceeded(format!(
        "covariance sums beyond N = {EXACT_SUM_LIMIT} need a two-state chain"
    )))
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceBoundReport {
    pub exponent: f64,
    pub grid: Vec<u64>,
    pub sums: Vec<f64>,
    /// `|sum| / N^exponent`
    pub ratios: Vec<f64>,
    /// `C`, calibrated at the first grid point
    pub constant: f64,
    /// least-squares slope of `log ratio` against `log N` (0 when every sum vanishes)
    pub slope: f64,
    pub below_bound: bool,
    pub pass: bool,
}

/// Compare the covariance sum with `C·N^(2−2a−ε)` on a log grid from
/// `10²` to `n_max`, `C` taken at the first grid point.
pub fn covariance_sum_bound(
    chain: &MarkovChain,
    event: &BTreeSet<usize>,
    n_max: u64,
    a: f64,
    eps: f64,
) -> Result<CovarianceBoundReport> {
    if !(a > 0.0 && a < 0.5) {
        return Err(Error::invalid("a must lie in (0, 1/2)"));
    }
    if !(eps > 0.0 && eps < 1.0 - 2.0 * a) {
        return Err(Error::invalid("epsilon must lie in (0, 1 - 2a)"));
    }
    if n_max < BOUND_GRID_START {
        return Err(Error::invalid(format!("grid needs N >= {BOUND_GRID_START}")));
    }
    let exponent = 2.0 - 2.0 * a - eps;
    let grid = lacunary_grid(BOUND_GRID_START, n_max, BOUND_GRID_RATIO);
    let mut sums = Vec::with_capacity(grid.len());
    for &n in &grid {
        sums.push(covariance_sum(chain, event, n)?);
    }
    let ratios: Vec<f64> = grid
        .iter()
        .zip(&sums)
        .map(|(&n, s)| s.abs() / (n as f64).powf(exponent))
        .collect();
    let constant = ratios[0];
    let below_bound = ratios.iter().all(|&r| r <= constant * (1.0 + 1e-12));
    let slope = if ratios.iter().all(|&r| r > 0.0) {
        let xs: Vec<f64> = grid.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
        least_squares_slope(&xs, &ys).unwrap_or(0.0)
    } else {
        0.0
    };
    Ok(CovarianceBoundReport {
        exponent,
        grid,
        sums,
        ratios,
        constant,
        slope,
        below_bound,
        pass: below_bound && slope <= TREND_SLOPE_LIMIT,
    })
}
