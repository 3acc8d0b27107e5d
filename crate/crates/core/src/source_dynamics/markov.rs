//! Finite Markov shifts with exact rational transition matrices.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Matrix = Vec<Vec<BigRational>>;

/// An irreducible chain on `{0, …, k-1}` with its stationary law.
#[derive(Debug)]
pub struct MarkovChain {
    p: Matrix,
    stationary: Vec<BigRational>,
    period: usize,
    lambda2: f64,
    lambda2_exact: Option<BigRational>,
    /// cumulative row thresholds scaled to `2^64` for path sampling
    cumulative: Vec<Vec<u128>>,
    powers: Mutex<Vec<Arc<Matrix>>>,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let k = a.len();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let mut s = BigRational::zero();
                    for (l, bl) in b.iter().enumerate() {
                        if !a[i][l].is_zero() && !bl[j].is_zero() {
                            s += &a[i][l] * &bl[j];
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

fn identity(k: usize) -> Matrix {
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
        .collect()
}

/// Solve `π (P - I) = 0`, `Σ π = 1` by exact Gaussian elimination.
fn solve_stationary(p: &Matrix) -> Option<Vec<BigRational>> {
    let k = p.len();
    // unknowns π_0..π_{k-1}; equations: columns of (P - I) for j < k-1, plus normalisation
    let mut a: Vec<Vec<BigRational>> = Vec::with_capacity(k);
    for j in 0..k - 1 {
        let mut row: Vec<BigRational> = (0..k)
            .map(|i| {
                let mut v = p[i][j].clone();
                if i == j {
                    v -= BigRational::one();
                }
                v
            })
            .collect();
        row.push(BigRational::zero());
        a.push(row);
    }
    let mut norm = vec![BigRational::one(); k + 1];
    norm[k] = BigRational::one();
    a.push(norm);
    for col in 0..k {
        let pivot = (col..k).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let inv = a[col][col].recip();
        for v in a[col].iter_mut() {
            *v *= &inv;
        }
        for r in 0..k {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in col..=k {
                    let t = &f * &a[col][c];
                    a[r][c] -= t;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[k].clone()).collect())
}

fn strongly_connected(p: &Matrix) -> bool {
    let k = p.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; k];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                let edge = if forward { &p[i][j] } else { &p[j][i] };
                if !edge.is_zero() && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    };
    reach(true) && reach(false)
}

/// Period of an irreducible chain: gcd of `level(i) + 1 - level(j)` over edges.
fn period_of(p: &Matrix) -> usize {
    let k = p.len();
    let mut level = vec![usize::MAX; k];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for j in 0..k {
            if !p[i][j].is_zero() && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    let mut g = 0usize;
    for i in 0..k {
        for j in 0..k {
            if !p[i][j].is_zero() {
                let d = (level[i] as i64 + 1 - level[j] as i64).unsigned_abs() as usize;
                g = g.gcd(&d);
            }
        }
    }
    g.max(1)
}

fn second_modulus(p: &Matrix) -> f64 {
    let k = p.len();
    let m = DMatrix::from_fn(k, k, |i, j| p[i][j].to_f64().unwrap_or(0.0));
    let mut moduli: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    // the leading eigenvalue is 1; clamp rounding noise
    moduli.get(1).copied().unwrap_or(0.0).min(1.0)
}

impl MarkovChain {
    pub fn new(p: Matrix) -> Result<Self> {
        let k = p.len();
        if k < 2 {
            return Err(Error::invalid("a Markov chain needs at least 2 states"));
        }
        for (i, row) in p.iter().enumerate() {
            if row.len() != k {
                return Err(Error::invalid("transition matrix must be square"));
            }
            if row.iter().any(|v| v.is_negative()) {
                return Err(Error::invalid(format!("negative entry in row {i}")));
            }
            let s: BigRational = row.iter().sum();
            if !s.is_one() {
                return Err(Error::invalid(format!("row {i} sums to {s}, not 1")));
            }
        }
        if !strongly_connected(&p) {
            return Err(Error::invalid("transition matrix must be irreducible"));
        }
        let stationary = solve_stationary(&p)
            .ok_or_else(|| Error::invalid("stationary distribution is not unique"))?;
        let period = period_of(&p);
        let lambda2_exact = if k == 2 {
            Some((&p[0][0] + &p[1][1] - BigRational::one()).abs())
        } else {
            None
        };
        let lambda2 = if period > 1 {
            1.0
        } else {
            match &lambda2_exact {
                Some(l) => l.to_f64().unwrap_or(f64::NAN),
                None => second_modulus(&p),
            }
        };
        let two64 = BigInt::one() << 64u32;
        let cumulative = p
            .iter()
            .map(|row| {
                let mut acc = BigRational::zero();
                row.iter()
                    .map(|v| {
                        acc += v;
                        let t = (acc.numer() * &two64).div_ceil(acc.denom());
                        t.to_u128().expect("at most 2^64")
                    })
                    .collect()
            })
            .collect();
        Ok(MarkovChain {
            powers: Mutex::new(vec![Arc::new(identity(k)), Arc::new(p.clone())]),
            p,
            stationary,
            period,
            lambda2,
            lambda2_exact,
            cumulative,
        })
    }

    /// Chain from a row-major list of `num/den` strings or integers.
    pub fn from_rows(rows: &[&[(i64, i64)]]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| r.iter().map(|&(n, d)| rat(n, d)).collect())
                .collect(),
        )
    }

    /// `[[1-p, p], [q, 1-q]]`.
    pub fn two_state(p: BigRational, q: BigRational) -> Result<Self> {
        let one = BigRational::one();
        Self::new(vec![
            vec![&one - &p, p],
            vec![q.clone(), one - q],
        ])
    }

    /// Every row equal to `row`: an i.i.d. sequence.
    pub fn independent(row: Vec<BigRational>) -> Result<Self> {
        Self::new(vec![row.clone(); row.len()])
    }

    pub fn state_count(&self) -> usize {
        self.p.len()
    }

    pub fn transition_matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn stationary(&self) -> &[BigRational] {
        &self.stationary
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn is_aperiodic(&self) -> bool {
        self.period == 1
    }

    /// Second largest eigenvalue modulus (1 for periodic chains).
    pub fn second_eigenvalue_modulus(&self) -> f64 {
        self.lambda2
    }

    /// `|λ₂|` as an exact rational for two-state chains.
    pub fn second_eigenvalue_exact(&self) -> Option<&BigRational> {
        self.lambda2_exact.as_ref()
    }

    /// Signed second eigenvalue `1 - p - q` of a two-state chain.
    pub fn two_state_lambda(&self) -> Option<BigRational> {
        (self.p.len() == 2).then(|| &self.p[0][0] + &self.p[1][1] - BigRational::one())
    }

    /// `P^g`, cached.
    pub fn power(&self, g: usize) -> Arc<Matrix> {
        let mut cache = self.powers.lock().expect("power cache");
        while cache.len() <= g {
            let next = mat_mul(cache.last().expect("non-empty"), &self.p);
            cache.push(Arc::new(next));
        }
        cache[g].clone()
    }

    /// Stationary mass of a symbol set.
    pub fn event_mass(&self, event: &BTreeSet<usize>) -> BigRational {
        event.iter().filter_map(|&s| self.stationary.get(s)).sum()
    }

    pub(crate) fn check_event(&self, event: &BTreeSet<usize>) -> Result<()> {
        match event.iter().find(|&&s| s >= self.p.len()) {
            Some(s) => Err(Error::invalid(format!("symbol {s} outside the state space"))),
            None => Ok(()),
        }
    }

    /// Column vector `D P^{g_2} D ⋯ P^{g_r} D 1` for the given gaps.
    pub fn suffix_vector(&self, gaps: &[usize], event: &BTreeSet<usize>) -> Vec<BigRational> {
        let k = self.p.len();
        let mut h: Vec<BigRational> = (0..k)
            .map(|i| if event.contains(&i) { BigRational::one() } else { BigRational::zero() })
            .collect();
        for &g in gaps.iter().rev() {
            h = self.apply_power(g, &h, event);
        }
        h
    }

    /// `D P^g h`.
    pub fn apply_power(&self, g: usize, h: &[BigRational], event: &BTreeSet<usize>) -> Vec<BigRational> {
        let pg = self.power(g);
        (0..self.p.len())
            .map(|i| {
                if !event.contains(&i) {
                    return BigRational::zero();
                }
                let mut s = BigRational::zero();
                for (j, hj) in h.iter().enumerate() {
                    if !hj.is_zero() && !pg[i][j].is_zero() {
                        s += &pg[i][j] * hj;
                    }
                }
                s
            })
            .collect()
    }

    /// `π · h`.
    pub fn stationary_dot(&self, h: &[BigRational]) -> BigRational {
        self.stationary
            .iter()
            .zip(h)
            .filter(|(_, v)| !v.is_zero())
            .map(|(a, b)| a * b)
            .sum()
    }

    fn sample_next(&self, from: usize, u: u64) -> usize {
        let row = &self.cumulative[from];
        row.iter().position(|&t| (u as u128) < t).unwrap_or(row.len() - 1)
    }

    fn sample_stationary(&self, u: u64) -> usize {
        let two64 = BigInt::one() << 64u32;
        let mut acc = BigRational::zero();
        for (i, v) in self.stationary.iter().enumerate() {
            acc += v;
            let t = (acc.numer() * &two64).div_ceil(acc.denom());
            if BigInt::from(u) < t {
                return i;
            }
        }
        self.stationary.len() - 1
    }
}

/// `ℙ(x_{n_1} ∈ E, …, x_{n_k} ∈ E)` for the stationary chain, exactly.
pub fn joint_event_probability(
    chain: &MarkovChain,
    times: &[u64],
    event: &BTreeSet<usize>,
) -> Result<BigRational> {
    if times.is_empty() {
        return Err(Error::invalid("at least one time is required"));
    }
    chain.check_event(event)?;
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("times must be strictly increasing"));
    }
    let gaps: Vec<usize> = times.windows(2).map(|w| (w[1] - w[0]) as usize).collect();
    let h = chain.suffix_vector(&gaps, event);
    Ok(chain.stationary_dot(&h))
}

/// Where a sampled path starts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PathStart {
    State(usize),
    Stationary,
}

/// A lazily sampled path `x_0, x_1, …`; the shift acts by dropping states.
#[derive(Clone, Debug)]
pub struct MarkovPath {
    chain: Arc<MarkovChain>,
    rng: ChaCha8Rng,
    states: Vec<usize>,
    seed: u64,
}

impl MarkovPath {
    pub fn new(chain: Arc<MarkovChain>, start: PathStart, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = match start {
            PathStart::State(s) if s < chain.state_count() => s,
            PathStart::State(s) => return Err(Error::invalid(format!("start state {s} out of range"))),
            PathStart::Stationary => chain.sample_stationary(rng.next_u64()),
        };
        Ok(MarkovPath {
            chain,
            rng,
            states: vec![x0],
            seed,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn chain(&self) -> &Arc<MarkovChain> {
        &self.chain
    }

    /// State `x_n`.
    pub fn state(&mut self, n: u64) -> usize {
        while self.states.len() as u64 <= n {
            let last = *self.states.last().expect("non-empty");
            let next = self.chain.sample_next(last, self.rng.next_u64());
            self.states.push(next);
        }
        self.states[n as usize]
    }
}
