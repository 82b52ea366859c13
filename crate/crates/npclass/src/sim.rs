//! Simulated examples, oracle risks and the Monte Carlo replication harness.

use std::io::Write;

use npclass_core::classify::{train, NPClassifier};
use npclass_core::data::{split_sizes, LabeledDataset, Matrix};
use npclass_core::rng::{derive_seed, seeded_rng, NpRng};
use npclass_core::screen::screen;
use npclass_core::{NPConfig, NpError, Variant};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use statrs::distribution::{ContinuousCDF, Normal};

/// Number of leading coordinates that carry signal in both examples.
pub const SIGNAL_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Example {
    /// Class 1 is `N(0.5·(1₁₀, 0), I)`, class 0 is `N(0, I)`.
    Ex1MeanShift,
    /// Class 1 is an equal mixture of `N(±a, Σ)`, class 0 is `N(0, I)`.
    Ex2Mixture,
    /// Example 2 with an independent mixture sign in each signal coordinate: same marginals,
    /// but the class-1 coordinates are independent.
    Ex2MixturePerCoordinate,
}

impl Example {
    pub fn from_id(id: u32) -> Option<Example> {
        match id {
            1 => Some(Example::Ex1MeanShift),
            2 => Some(Example::Ex2Mixture),
            _ => None,
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Example::Ex1MeanShift => 1,
            Example::Ex2Mixture | Example::Ex2MixturePerCoordinate => 2,
        }
    }
}

fn std_normal(rng: &mut NpRng) -> f64 {
    StandardNormal.sample(rng)
}

fn check_dim(d: usize) -> Result<(), NpError> {
    if d < SIGNAL_DIM {
        return Err(NpError::Domain(format!(
            "simulated examples need d >= {SIGNAL_DIM}, got {d}"
        )));
    }
    Ok(())
}

fn fill(d: usize, n_rows: usize, seed: u64, mut row: impl FnMut(&mut NpRng, &mut [f64])) -> Matrix {
    let mut rng = seeded_rng(seed);
    let mut x = Matrix::zeros(n_rows, d);
    for i in 0..n_rows {
        row(&mut rng, x.row_mut(i));
    }
    x
}

pub fn gen_example1(d: usize, n_rows: usize, class: u8, seed: u64) -> Result<Matrix, NpError> {
    check_dim(d)?;
    let shift = if class == 1 { 0.5 } else { 0.0 };
    Ok(fill(d, n_rows, seed, |rng, row| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = std_normal(rng) + if j < SIGNAL_DIM { shift } else { 0.0 };
        }
    }))
}

/// Component mean `3/√10` of the class-1 mixture.
pub fn ex2_component_mean() -> f64 {
    3.0 / 10f64.sqrt()
}

pub fn gen_example2(d: usize, n_rows: usize, class: u8, seed: u64) -> Result<Matrix, NpError> {
    mixture(d, n_rows, class, seed, false)
}

/// Example 2 marginals with one mixture sign per signal coordinate.
pub fn gen_example2_per_coordinate(
    d: usize,
    n_rows: usize,
    class: u8,
    seed: u64,
) -> Result<Matrix, NpError> {
    mixture(d, n_rows, class, seed, true)
}

fn mixture(
    d: usize,
    n_rows: usize,
    class: u8,
    seed: u64,
    per_coordinate: bool,
) -> Result<Matrix, NpError> {
    check_dim(d)?;
    if class == 0 {
        return Ok(fill(d, n_rows, seed, |rng, row| {
            row.iter_mut().for_each(|v| *v = std_normal(rng))
        }));
    }
    let a = ex2_component_mean();
    let sd = 0.1f64.sqrt();
    Ok(fill(d, n_rows, seed, |rng, row| {
        let mut sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for (j, v) in row.iter_mut().enumerate() {
            if per_coordinate && j > 0 && j < SIGNAL_DIM {
                sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            }
            let z = std_normal(rng);
            *v = if j < SIGNAL_DIM { sign * a + sd * z } else { z };
        }
    }))
}

pub fn generate(
    example: Example,
    d: usize,
    n_rows: usize,
    class: u8,
    seed: u64,
) -> Result<Matrix, NpError> {
    match example {
        Example::Ex1MeanShift => gen_example1(d, n_rows, class, seed),
        Example::Ex2Mixture => gen_example2(d, n_rows, class, seed),
        Example::Ex2MixturePerCoordinate => gen_example2_per_coordinate(d, n_rows, class, seed),
    }
}

/// Class mean vector (class 0 is centred in both examples, as is the class-1 mixture).
pub fn class_mean(example: Example, d: usize, class: u8) -> Vec<f64> {
    let mut mu = vec![0.0; d];
    if example == Example::Ex1MeanShift && class == 1 {
        mu[..SIGNAL_DIM].iter_mut().for_each(|v| *v = 0.5);
    }
    mu
}

/// Which density ratio defines the oracle classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleRatio {
    /// Product of the per-coordinate marginal ratios `Π p_j(x_j)/q_j(x_j)`.
    NaiveBayes,
    /// Ratio of the joint densities.
    Joint,
}

fn log_mixture_pair(plus: f64, minus: f64) -> f64 {
    let hi = plus.max(minus);
    hi + ((plus - hi).exp() + (minus - hi).exp()).ln()
}

/// Log density ratio `log p(x)/q(x)`; only the first ten coordinates matter. The two forms agree
/// whenever the class-1 coordinates are independent.
pub fn true_log_ratio(example: Example, ratio: OracleRatio, x: &[f64]) -> f64 {
    let x = &x[..SIGNAL_DIM];
    match (example, ratio) {
        (Example::Ex1MeanShift, _) => 0.5 * x.iter().sum::<f64>() - 1.25,
        (Example::Ex2Mixture, OracleRatio::Joint) => {
            let a = ex2_component_mean();
            let (mut plus, mut minus, mut sq) = (0.0, 0.0, 0.0);
            for &v in x {
                plus -= (v - a) * (v - a) / 0.2;
                minus -= (v + a) * (v + a) / 0.2;
                sq += v * v;
            }
            // log of ½φ(x;a,0.1I) + ½φ(x;-a,0.1I) over φ(x;0,I)
            log_mixture_pair(plus, minus) - 2f64.ln() - 0.5 * SIGNAL_DIM as f64 * 0.1f64.ln()
                + 0.5 * sq
        }
        (Example::Ex2Mixture, OracleRatio::NaiveBayes) | (Example::Ex2MixturePerCoordinate, _) => {
            let a = ex2_component_mean();
            x.iter()
                .map(|&v| {
                    let mix = log_mixture_pair(-(v - a) * (v - a) / 0.2, -(v + a) * (v + a) / 0.2);
                    mix - 2f64.ln() - 0.5 * 0.1f64.ln() + 0.5 * v * v
                })
                .sum()
        }
    }
}

fn z_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Closed-form oracle `(R0*, R1*)` for Example 1: `log r ~ N(∓1.25, 2.5)` under class 0/1.
pub fn oracle_risks_ex1(alpha: f64) -> (f64, f64) {
    let sd = 2.5f64.sqrt();
    let std = Normal::standard();
    (alpha, std.cdf(z_quantile(1.0 - alpha) - sd))
}

/// Monte Carlo oracle: `C_α` is the empirical `(1-α)`-quantile of `log r` over `draws` class-0 rows,
/// `R1*` the fraction of `draws` class-1 rows scoring below it.
pub fn oracle_risks_mc(
    example: Example,
    ratio: OracleRatio,
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64), NpError> {
    if !(alpha > 0.0 && alpha < 1.0) || draws == 0 {
        return Err(NpError::Domain(
            "oracle needs alpha in (0,1) and draws >= 1".into(),
        ));
    }
    const CHUNK: usize = 1 << 16;
    let chunks = draws.div_ceil(CHUNK);
    let scores = |class: u8, stream: u64| -> Result<Vec<f64>, NpError> {
        let parts: Result<Vec<Vec<f64>>, NpError> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let rows = CHUNK.min(draws - c * CHUNK);
                let x = generate(
                    example,
                    SIGNAL_DIM,
                    rows,
                    class,
                    derive_seed(derive_seed(seed, stream), c as u64),
                )?;
                Ok(x.rows()
                    .map(|r| true_log_ratio(example, ratio, r))
                    .collect())
            })
            .collect();
        Ok(parts?.concat())
    };
    let mut s0 = scores(0, 0)?;
    let rank = ((1.0 - alpha) * draws as f64)
        .ceil()
        .clamp(1.0, draws as f64) as usize;
    let (_, c_alpha, _) = s0.select_nth_unstable_by(rank - 1, f64::total_cmp);
    let c_alpha = *c_alpha;
    let r0 = s0.iter().filter(|&&s| s >= c_alpha).count() as f64 / draws as f64;
    let s1 = scores(1, 1)?;
    let r1 = s1.iter().filter(|&&s| s < c_alpha).count() as f64 / draws as f64;
    Ok((r0, r1))
}

/// Oracle risks of the naive-Bayes ratio: closed form for Example 1, Monte Carlo with `mc_draws`
/// draws for Example 2.
pub fn oracle_risks(
    example: Example,
    alpha: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<(f64, f64), NpError> {
    match example {
        Example::Ex1MeanShift => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(NpError::Domain(format!("alpha={alpha} must lie in (0,1)")));
            }
            Ok(oracle_risks_ex1(alpha))
        }
        Example::Ex2Mixture | Example::Ex2MixturePerCoordinate => {
            oracle_risks_mc(example, OracleRatio::NaiveBayes, alpha, mc_draws, seed)
        }
    }
}

/// One simulation scenario.
#[derive(Debug, Clone)]
pub struct SimSpec {
    pub example: Example,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub reps: usize,
    pub test_per_class: usize,
    pub cfg: NPConfig,
    pub base_seed: u64,
    /// Fresh class-0 draws used to estimate population R0 for KDE models (0 disables).
    pub r0_draws: usize,
    /// Monte Carlo draws for the Example-2 oracle (0 skips it).
    pub oracle_draws: usize,
}

impl SimSpec {
    pub fn new(example: Example, d: usize, m: usize, n: usize, reps: usize, cfg: NPConfig) -> Self {
        Self {
            example,
            d,
            m,
            n,
            reps,
            test_per_class: 1000,
            cfg,
            base_seed: 0,
            r0_draws: 0,
            oracle_draws: 0,
        }
    }

    pub fn validate(&self) -> Result<(), NpError> {
        check_dim(self.d)?;
        if self.reps == 0 || self.m == 0 || self.n == 0 {
            return Err(NpError::InvalidConfig(
                "reps, m and n must be positive".into(),
            ));
        }
        self.cfg.validate()
    }
}

fn variant_name<S: Serializer>(v: &Variant, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(v.name())
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    #[serde(serialize_with = "variant_name")]
    pub variant: Variant,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    /// Population type I error (closed form for affine scores, fresh draws for KDE when enabled).
    pub r0_analytic: Option<f64>,
    pub r0_test: Option<f64>,
    pub r1_test: Option<f64>,
    pub n_selected: usize,
    pub n_missed: usize,
    pub n_false_pos: usize,
    pub seed: u64,
    /// Population type I error of the classical `⌈m3(1-α)⌉` threshold on the same fit.
    pub r0_baseline: Option<f64>,
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
    pub count: usize,
}

impl MeanSe {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let count = v.len();
        if count == 0 {
            return Self {
                mean: f64::NAN,
                sd: f64::NAN,
                se: f64::NAN,
                count,
            };
        }
        let mean = v.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            sd,
            se: sd / (count as f64).sqrt(),
            count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScreeningSummary {
    pub selected: MeanSe,
    pub missed: MeanSe,
    pub false_pos: MeanSe,
}

impl ScreeningSummary {
    fn of(counts: &[(usize, usize, usize)]) -> Self {
        Self {
            selected: MeanSe::of(counts.iter().map(|c| c.0 as f64)),
            missed: MeanSe::of(counts.iter().map(|c| c.1 as f64)),
            false_pos: MeanSe::of(counts.iter().map(|c| c.2 as f64)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub example: Example,
    #[serde(serialize_with = "variant_name")]
    pub variant: Variant,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
    pub delta3: f64,
    pub reps: usize,
    pub records: Vec<RepRecord>,
    /// Replications that failed, with the error message.
    pub failures: Vec<(usize, String)>,
    pub r0_analytic: MeanSe,
    pub r0_test: MeanSe,
    pub r1_test: MeanSe,
    /// Fraction of successful replications whose type I error exceeds α (population R0 when
    /// available, otherwise test-set R0).
    pub violation_rate: f64,
    pub violation_uses_population: bool,
    pub baseline_violation_rate: Option<f64>,
    pub screening: Option<ScreeningSummary>,
    pub oracle: Option<(f64, f64)>,
}

fn signal_counts(selected: &[usize]) -> (usize, usize, usize) {
    let hits = selected.iter().filter(|&&j| j < SIGNAL_DIM).count();
    (selected.len(), SIGNAL_DIM - hits, selected.len() - hits)
}

fn labeled(x0: &Matrix, x1: &Matrix) -> LabeledDataset {
    LabeledDataset::from_classes(x0, x1).expect("generated blocks share a width")
}

fn population_r0(
    spec: &SimSpec,
    clf: &NPClassifier,
    threshold: f64,
    seed: u64,
) -> Result<Option<f64>, NpError> {
    if let Some(r0) = clf.analytic_exceedance(threshold, &class_mean(spec.example, spec.d, 0)) {
        return Ok(Some(r0));
    }
    if spec.r0_draws == 0 {
        return Ok(None);
    }
    let fresh = generate(spec.example, spec.d, spec.r0_draws, 0, seed)?;
    let over = fresh.rows().filter(|r| clf.score(r) >= threshold).count();
    Ok(Some(over as f64 / spec.r0_draws as f64))
}

/// Runs one replication with seed `derive_seed(base_seed, rep)`.
pub fn run_replication(spec: &SimSpec, rep: usize) -> Result<RepRecord, NpError> {
    let seed = derive_seed(spec.base_seed, rep as u64);
    let stream = |s: u64| derive_seed(seed, s);
    let x0 = generate(spec.example, spec.d, spec.m, 0, stream(0))?;
    let x1 = generate(spec.example, spec.d, spec.n, 1, stream(1))?;
    let cfg = NPConfig {
        seed: stream(2),
        ..spec.cfg.clone()
    };
    let clf = train(&labeled(&x0, &x1), &cfg)?;

    let t0 = generate(spec.example, spec.d, spec.test_per_class, 0, stream(3))?;
    let t1 = generate(spec.example, spec.d, spec.test_per_class, 1, stream(4))?;
    let (r0_test, r1_test) = if spec.test_per_class > 0 {
        clf.empirical_errors(&labeled(&t0, &t1))?
    } else {
        (None, None)
    };
    let r0_analytic = population_r0(spec, &clf, clf.c_hat(), stream(5))?;
    let r0_baseline = population_r0(spec, &clf, clf.classical_threshold(), stream(5))?;
    let (n_selected, n_missed, n_false_pos) = signal_counts(clf.selected());
    Ok(RepRecord {
        rep,
        variant: cfg.variant(),
        d: spec.d,
        m: spec.m,
        n: spec.n,
        r0_analytic,
        r0_test,
        r1_test,
        n_selected,
        n_missed,
        n_false_pos,
        seed,
        r0_baseline,
        feasible: clf.feasible(),
    })
}

/// Thread pool capped by the `NP_THREADS` environment variable when set.
pub fn thread_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("NP_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool")
}

fn violation_fraction(values: &[f64], alpha: f64) -> f64 {
    values.iter().filter(|&&r| r > alpha).count() as f64 / values.len().max(1) as f64
}

/// Aggregates replication records in replication order.
pub fn summarize(
    spec: &SimSpec,
    mut records: Vec<RepRecord>,
    mut failures: Vec<(usize, String)>,
) -> McReport {
    records.sort_by_key(|r| r.rep);
    failures.sort_by_key(|f| f.0);
    let alpha = spec.cfg.alpha;
    let analytic: Vec<f64> = records.iter().filter_map(|r| r.r0_analytic).collect();
    let test0: Vec<f64> = records.iter().filter_map(|r| r.r0_test).collect();
    let use_population = !records.is_empty() && analytic.len() == records.len();
    let violation_rate = violation_fraction(if use_population { &analytic } else { &test0 }, alpha);
    let baseline: Vec<f64> = records.iter().filter_map(|r| r.r0_baseline).collect();
    let baseline_violation_rate = (!records.is_empty() && baseline.len() == records.len())
        .then(|| violation_fraction(&baseline, alpha));
    let screening = spec.cfg.screening_enabled().then(|| {
        ScreeningSummary::of(
            &records
                .iter()
                .map(|r| (r.n_selected, r.n_missed, r.n_false_pos))
                .collect::<Vec<_>>(),
        )
    });
    McReport {
        example: spec.example,
        variant: spec.cfg.variant(),
        d: spec.d,
        m: spec.m,
        n: spec.n,
        alpha,
        delta3: spec.cfg.delta3,
        reps: spec.reps,
        r0_analytic: MeanSe::of(analytic.iter().copied()),
        r0_test: MeanSe::of(test0.iter().copied()),
        r1_test: MeanSe::of(records.iter().filter_map(|r| r.r1_test)),
        violation_rate,
        violation_uses_population: use_population,
        baseline_violation_rate,
        screening,
        oracle: None,
        records,
        failures,
    }
}

/// Runs all replications in parallel and aggregates them.
pub fn run_mc(spec: &SimSpec) -> Result<McReport, NpError> {
    spec.validate()?;
    let outcomes: Vec<Result<RepRecord, (usize, String)>> = thread_pool().install(|| {
        (0..spec.reps)
            .into_par_iter()
            .map(|rep| run_replication(spec, rep).map_err(|e| (rep, e.to_string())))
            .collect()
    });
    let mut records = Vec::with_capacity(spec.reps);
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    let mut report = summarize(spec, records, failures);
    report.oracle = match spec.example {
        Example::Ex1MeanShift => Some(oracle_risks_ex1(spec.cfg.alpha)),
        _ if spec.oracle_draws > 0 => Some(oracle_risks(
            spec.example,
            spec.cfg.alpha,
            spec.oracle_draws,
            derive_seed(spec.base_seed, u64::MAX),
        )?),
        _ => None,
    };
    Ok(report)
}

/// Screening-only study: draws just the `m1` / `n1` screening rows of each replication.
pub fn screening_study(
    example: Example,
    d: usize,
    m: usize,
    n: usize,
    reps: usize,
    cfg: &NPConfig,
    base_seed: u64,
) -> Result<(ScreeningSummary, usize), NpError> {
    check_dim(d)?;
    cfg.validate()?;
    let sizes = split_sizes(m, n, d, cfg.delta1, true)?;
    let outcomes: Vec<Option<(usize, usize, usize)>> = thread_pool().install(|| {
        (0..reps)
            .into_par_iter()
            .map(|rep| {
                let seed = derive_seed(base_seed, rep as u64);
                let x0 = generate(example, d, sizes.m1, 0, derive_seed(seed, 0)).ok()?;
                let x1 = generate(example, d, sizes.n1, 1, derive_seed(seed, 1)).ok()?;
                match screen(&x0, &x1, cfg, derive_seed(seed, 2)) {
                    Ok(r) => Some(signal_counts(&r.selected)),
                    Err(NpError::NoFeaturesSurvive { .. }) => Some((0, SIGNAL_DIM, 0)),
                    Err(_) => None,
                }
            })
            .collect()
    });
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    let counts: Vec<_> = outcomes.into_iter().flatten().collect();
    Ok((ScreeningSummary::of(&counts), failures))
}

/// Header of the per-replication CSV.
pub const REP_CSV_HEADER: [&str; 12] = [
    "rep",
    "variant",
    "d",
    "m",
    "n",
    "r0_analytic",
    "r0_test",
    "r1_test",
    "n_selected",
    "n_missed",
    "n_false_pos",
    "seed",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one CSV row per replication; absent error rates are empty cells.
pub fn write_rep_csv<W: Write>(records: &[RepRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REP_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.rep.to_string(),
            r.variant.name().to_string(),
            r.d.to_string(),
            r.m.to_string(),
            r.n.to_string(),
            opt(r.r0_analytic),
            opt(r.r0_test),
            opt(r.r1_test),
            r.n_selected.to_string(),
            r.n_missed.to_string(),
            r.n_false_pos.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Kolmogorov–Smirnov distance of a sample from a continuous cdf.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = sample.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the one-sample KS statistic `dn` at sample size `n` (Stephens' correction).
pub fn ks_pvalue(dn: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * dn;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
