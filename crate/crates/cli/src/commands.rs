//! One runner per subcommand. Seeds run in parallel; files are written
//! afterwards in seed order so output bytes do not depend on scheduling.

use std::collections::BTreeSet;
use std::path::PathBuf;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use retlab_core::ergodic_averaging::{average_along, evaluate, residue_distribution, AverageTrace, Observable, TestPoint, TestSystem};
use retlab_core::exact_arith::RealPoint;
use retlab_core::source_dynamics::SourceSystem;
use retlab_core::target_families::FamilyKind;
use retlab_core::verification::{
    check_property_p, covariance_sum_bound, fourfold_identity, lln_ratio_trace, vdc_check, vdc_holds,
    vn_decay_diagnostic, FiniteSpace, VerificationRecord,
};

use crate::config::{ExperimentConfig, VerifyConfig, XChoice};
use crate::error::CliError;
use crate::output::{num, out_path, write_json, CsvWriter, Provenance};

type Result<T> = std::result::Result<T, CliError>;

pub struct Context {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub pool: rayon::ThreadPool,
}

impl Context {
    fn per_seed<T: Send>(&self, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
        self.pool.install(|| self.cfg.seeds.par_iter().map(|&s| f(s)).collect())
    }

    fn sha(&self) -> &str {
        self.cfg.raw.sha256()
    }

    fn provenance(&self) -> Provenance {
        Provenance::new(self.sha(), &self.cfg.seeds)
    }

    fn trace_csv(&self, name: &str, seed: u64, trace: &AverageTrace) -> Result<()> {
        let mut w = CsvWriter::create(
            &out_path(&self.out, name),
            self.sha(),
            &[seed],
            &["K", "re_A_K", "im_A_K", "projection", "gap"],
        )?;
        for ((k, v), gap) in trace.checkpoints.iter().zip(&trace.values).zip(trace.gaps()) {
            w.row(&[k.to_string(), num(v.re), num(v.im), num(trace.projection.re), num(gap)])?;
        }
        w.finish()
    }
}

#[derive(Serialize)]
struct Runs<T: Serialize> {
    runs: Vec<T>,
}

#[derive(Serialize)]
struct ReturnsSummary {
    seed: u64,
    count: usize,
    complete: bool,
    growth_exponent: Option<f64>,
}

pub fn run_returns(ctx: &Context) -> Result<()> {
    let results = ctx.per_seed(|seed| -> Result<(Vec<u64>, Option<f64>, Option<CliError>)> {
        let mut seq = ctx.cfg.sequence(seed)?;
        let err = seq.returns_up_to(ctx.cfg.n_max).err().map(CliError::from);
        let count = seq.terms().partition_point(|&t| t <= ctx.cfg.n_max);
        let terms = seq.terms()[..count].to_vec();
        let growth = if err.is_none() && count >= 200 {
            seq.growth_exponent(100, count).ok()
        } else {
            None
        };
        Ok((terms, growth, err))
    });
    let mut summaries = Vec::new();
    let mut first_err = None;
    for (&seed, res) in ctx.cfg.seeds.iter().zip(results) {
        let (terms, growth, err) = res?;
        let mut w = CsvWriter::create(&out_path(&ctx.out, &format!("returns_seed{seed}.csv")), ctx.sha(), &[seed], &["n", "r_n"])?;
        for (i, r) in terms.iter().enumerate() {
            w.row(&[(i + 1).to_string(), r.to_string()])?;
        }
        w.finish()?;
        summaries.push(ReturnsSummary {
            seed,
            count: terms.len(),
            complete: err.is_none(),
            growth_exponent: growth,
        });
        if first_err.is_none() {
            first_err = err;
        }
    }
    write_json(&out_path(&ctx.out, "returns_summary.json"), &ctx.provenance(), &Runs { runs: summaries })?;
    first_err.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct AverageSummary {
    seed: u64,
    k: u64,
    re: f64,
    im: f64,
    projection: f64,
    gap: f64,
}

pub fn run_average(ctx: &Context) -> Result<()> {
    let sys = ctx.cfg.test_system()?;
    let f = ctx.cfg.observable()?;
    let traces = ctx.per_seed(|seed| -> Result<AverageTrace> {
        let mut seq = ctx.cfg.sequence(seed)?;
        let mut x = ctx.cfg.test_point(seed)?;
        Ok(average_along(&mut seq, sys, f, &mut x, ctx.cfg.k_max, ctx.cfg.gamma)?)
    });
    let mut summaries = Vec::new();
    for (&seed, tr) in ctx.cfg.seeds.iter().zip(traces) {
        let tr = tr?;
        ctx.trace_csv(&format!("average_seed{seed}.csv"), seed, &tr)?;
        let (k, v) = tr.last().expect("K_max >= 1");
        summaries.push(AverageSummary {
            seed,
            k,
            re: v.re,
            im: v.im,
            projection: tr.projection.re,
            gap: *tr.gaps().last().expect("non-empty"),
        });
    }
    write_json(&out_path(&ctx.out, "average_summary.json"), &ctx.provenance(), &Runs { runs: summaries })
}

#[derive(Serialize)]
struct RatioSummary {
    seed: u64,
    n: u64,
    observed: u64,
    expected: f64,
    ratio: f64,
}

pub fn run_bc_ratio(ctx: &Context) -> Result<()> {
    let traces = ctx.per_seed(|seed| -> Result<_> {
        let mut seq = ctx.cfg.sequence(seed)?;
        Ok(lln_ratio_trace(&mut seq, &ctx.cfg.family, &ctx.cfg.source, ctx.cfg.n_max, ctx.cfg.gamma)?)
    });
    let mut summaries = Vec::new();
    for (&seed, tr) in ctx.cfg.seeds.iter().zip(traces) {
        let tr = tr?;
        let mut w = CsvWriter::create(
            &out_path(&ctx.out, &format!("bc_ratio_seed{seed}.csv")),
            ctx.sha(),
            &[seed],
            &["N", "observed", "expected", "ratio"],
        )?;
        for i in 0..tr.checkpoints.len() {
            w.row(&[
                tr.checkpoints[i].to_string(),
                tr.observed[i].to_string(),
                num(tr.expected[i]),
                num(tr.ratios[i]),
            ])?;
        }
        w.finish()?;
        summaries.push(RatioSummary {
            seed,
            n: *tr.checkpoints.last().expect("non-empty"),
            observed: *tr.observed.last().expect("non-empty"),
            expected: *tr.expected.last().expect("non-empty"),
            ratio: tr.final_ratio(),
        });
    }
    write_json(&out_path(&ctx.out, "bc_ratio_summary.json"), &ctx.provenance(), &Runs { runs: summaries })
}

#[derive(Serialize)]
struct ResidueSummary {
    seed: u64,
    m: u64,
    k: u64,
    max_deviation: f64,
}

pub fn run_residues(ctx: &Context) -> Result<()> {
    let m = ctx.cfg.raw.parsed("residue_m", 3u64)?;
    let k = ctx.cfg.k_max;
    let dists = ctx.per_seed(|seed| -> Result<Vec<f64>> {
        let mut seq = ctx.cfg.sequence(seed)?;
        Ok(residue_distribution(&mut seq, m, k)?)
    });
    let mut w = CsvWriter::create(&out_path(&ctx.out, "residues.csv"), ctx.sha(), &ctx.cfg.seeds, &["seed", "residue", "frequency"])?;
    let mut summaries = Vec::new();
    for (&seed, d) in ctx.cfg.seeds.iter().zip(dists) {
        let d = d?;
        for (r, p) in d.iter().enumerate() {
            w.row(&[seed.to_string(), r.to_string(), num(*p)])?;
        }
        let max_deviation = d.iter().map(|p| (p - 1.0 / m as f64).abs()).fold(0.0, f64::max);
        summaries.push(ResidueSummary { seed, m, k, max_deviation });
    }
    w.finish()?;
    write_json(&out_path(&ctx.out, "residues_summary.json"), &ctx.provenance(), &Runs { runs: summaries })
}

#[derive(Serialize)]
struct CounterexampleSummary {
    seed: u64,
    returns: usize,
    /// every return `r ≥ 3` has `f(T^r x) = 0`, decided exactly
    containment: bool,
    /// `A_K ≤ 2/K` at every `K`
    two_over_k: bool,
    final_average: f64,
    projection: f64,
    final_gap: f64,
}

pub fn run_counterexample(ctx: &Context) -> Result<()> {
    let SourceSystem::RotationMap(angle) = &ctx.cfg.source else {
        return Err(CliError::Config("counterexample needs source = rotation".into()));
    };
    if !matches!(ctx.cfg.family.kind(), FamilyKind::CenteredBall { .. }) {
        return Err(CliError::Config("counterexample needs target = ball".into()));
    }
    let target = TestSystem::IrrationalRotation(angle.clone());
    let f = match &ctx.cfg.observable {
        Some(o @ Observable::IndicatorInterval { .. }) => o.clone(),
        None => Observable::closed_indicator(BigRational::zero(), BigRational::new(BigInt::from(1), BigInt::from(4))),
        Some(_) => return Err(CliError::Config("counterexample needs an indicator observable".into())),
    };
    let shift = match &ctx.cfg.x {
        XChoice::Translate(q) => q.clone(),
        XChoice::Seeded => BigRational::new(BigInt::from(3), BigInt::from(5)),
        _ => return Err(CliError::Config("counterexample needs x = y+q".into())),
    };
    let results = ctx.per_seed(|seed| -> Result<(CounterexampleSummary, Option<AverageTrace>)> {
        let mut seq = ctx.cfg.sequence(seed)?;
        let (terms, k) = seq.returns_up_to(ctx.cfg.n_max)?;
        let y = match ctx.cfg.source_point(seed)? {
            retlab_core::source_dynamics::SourcePoint::Real(y) => y,
            _ => unreachable!("rotation sources use real points"),
        };
        let x = TestPoint::Real(y.translated(&shift));
        let mut probe = x.clone();
        let mut containment = true;
        let mut two_over_k = true;
        let mut sum = 0.0;
        for &r in &terms {
            let v = evaluate(&target, &f, &mut probe, r)?;
            if r >= 3 && v != Complex64::zero() {
                containment = false;
            }
            sum += v.re;
            if sum > 2.0 {
                two_over_k = false;
            }
        }
        let trace = if k > 0 {
            let mut x = x;
            Some(average_along(&mut seq, &target, &f, &mut x, k as u64, ctx.cfg.gamma)?)
        } else {
            None
        };
        let (final_average, projection, final_gap) = match &trace {
            Some(t) => (t.last().expect("non-empty").1.re, t.projection.re, *t.gaps().last().expect("non-empty")),
            None => (0.0, f64::NAN, f64::NAN),
        };
        Ok((
            CounterexampleSummary {
                seed,
                returns: k,
                containment,
                two_over_k,
                final_average,
                projection,
                final_gap,
            },
            trace,
        ))
    });
    let mut summaries = Vec::new();
    for (&seed, res) in ctx.cfg.seeds.iter().zip(results) {
        let (summary, trace) = res?;
        if let Some(t) = trace {
            ctx.trace_csv(&format!("counterexample_seed{seed}.csv"), seed, &t)?;
        }
        summaries.push(summary);
    }
    let failed = summaries.iter().filter(|s| !s.containment).count();
    write_json(&out_path(&ctx.out, "counterexample_summary.json"), &ctx.provenance(), &Runs { runs: summaries })?;
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(())
}

#[derive(Serialize)]
struct Report {
    passed: usize,
    failed: usize,
    records: Vec<VerificationRecord>,
}

fn split_record(cases: usize, seed: u64) -> VerificationRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..cases {
        let atoms = rng.random_range(1..=16usize);
        let raw: Vec<i64> = (0..atoms).map(|_| rng.random_range(1..=20)).collect();
        let total: i64 = raw.iter().sum();
        let w = raw.iter().map(|&r| BigRational::new(BigInt::from(r), BigInt::from(total))).collect();
        let space = FiniteSpace::new(w).expect("normalized weights");
        let sets: Vec<BTreeSet<usize>> = (0..4).map(|_| (0..atoms).filter(|_| rng.random_bool(0.5)).collect()).collect();
        let (l, r) = fourfold_identity(&space, [&sets[0], &sets[1], &sets[2], &sets[3]]);
        if l != r {
            failures += 1;
        }
    }
    VerificationRecord::new("split_identity", failures == 0, failures as f64, 0.0)
        .param("cases", cases)
        .param("seed", seed)
}

fn vdc_record(cases: usize, seed: u64) -> VerificationRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut witness = None;
    for case in 0..cases {
        let n = rng.random_range(1..=64usize);
        let dim = rng.random_range(1..=8usize);
        let vs: Vec<Vec<Complex64>> = (0..n)
            .map(|_| (0..dim).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
            .collect();
        for m in 1..=n {
            let (l, r) = vdc_check(&vs, m).expect("valid M");
            worst = worst.max(l / r);
            if !vdc_holds(l, r) {
                failures += 1;
                witness.get_or_insert(format!("case={case} N={n} M={m}"));
            }
        }
    }
    let rec = VerificationRecord::new("van_der_corput", failures == 0, worst, 1.0)
        .param("cases", cases)
        .param("seed", seed);
    match witness {
        Some(w) => rec.with_witness(w),
        None => rec,
    }
}

pub fn run_verify(ctx: &Context) -> Result<()> {
    let v = VerifyConfig::from_raw(&ctx.cfg.raw)?;
    let cfg = &ctx.cfg;
    let base_seed = cfg.seeds[0];
    let mut records = Vec::new();

    let p = check_property_p(&v.chain, &v.event, v.p_n_max, v.p_k_max, &v.rate)?;
    records.push(
        VerificationRecord::new("property_P", p.pass, p.max_violation, 0.0)
            .param("chain", &p.chain)
            .param("rate", &p.rate)
            .param("n_max", v.p_n_max)
            .param("k_max", v.p_k_max)
            .param("tuples", p.checked_tuples.len())
            .param("smallest_constant", &p.smallest_constant_exact)
            .param("all_left_sides_zero", p.all_left_sides_zero)
            .with_witness(format!("{:?}", p.witness)),
    );
    records.push(split_record(v.split_cases, base_seed));
    records.push(vdc_record(v.vdc_cases, base_seed));

    let lln = ctx.per_seed(|seed| -> Result<_> {
        let mut seq = cfg.sequence(seed)?;
        Ok(lln_ratio_trace(&mut seq, &cfg.family, &cfg.source, cfg.n_max, cfg.gamma)?)
    });
    for (&seed, tr) in cfg.seeds.iter().zip(lln) {
        let tr = tr?;
        let dev = (tr.final_ratio() - 1.0).abs();
        records.push(
            VerificationRecord::new("lln_ratio", dev <= v.lln_tolerance, dev, v.lln_tolerance)
                .param("seed", seed)
                .param("n_max", cfg.n_max)
                .param("ratio", tr.final_ratio()),
        );
    }

    let cov = covariance_sum_bound(&v.chain, &v.event, v.cov_n_max, cfg.a(), cfg.epsilon)?;
    records.push(
        VerificationRecord::new("covariance_bound", cov.pass, cov.slope, retlab_core::verification::TREND_SLOPE_LIMIT)
            .param("exponent", cov.exponent)
            .param("constant", cov.constant)
            .param("below_bound", cov.below_bound)
            .param("n_max", v.cov_n_max),
    );

    let rotation = match &cfg.test_system {
        Some(t @ TestSystem::IrrationalRotation(_)) => t.clone(),
        _ => TestSystem::IrrationalRotation(std::sync::Arc::new(retlab_core::exact_arith::RotationAngle::golden())),
    };
    let vn = ctx.per_seed(|seed| -> Result<_> {
        let mut seq = cfg.sequence(seed)?;
        let mut pts: Vec<TestPoint> = (0..v.vn_samples as u64)
            .map(|i| TestPoint::Real(RealPoint::seeded(seed.wrapping_mul(1_000_003).wrapping_add(i))))
            .collect();
        Ok(vn_decay_diagnostic(
            &mut seq,
            &cfg.family,
            &cfg.source,
            &rotation,
            &Observable::Character(1),
            &mut pts,
            v.vn_n_max,
            cfg.gamma,
        )?)
    });
    for (&seed, tr) in cfg.seeds.iter().zip(vn) {
        let tr = tr?;
        // a vanishing V_N trivially decays
        let slope = tr.slope.unwrap_or(f64::NEG_INFINITY);
        records.push(
            VerificationRecord::new("vn_decay", slope < 0.0, slope, 0.0)
                .param("seed", seed)
                .param("samples", v.vn_samples)
                .param("n_max", v.vn_n_max),
        );
    }

    let failed = records.iter().filter(|r| !r.pass).count();
    let report = Report {
        passed: records.len() - failed,
        failed,
        records,
    };
    write_json(&out_path(&ctx.out, "verify.json"), &ctx.provenance(), &report)?;
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(())
}
