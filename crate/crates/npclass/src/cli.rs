//! `npclass` command-line front end.
//!
//! Exit codes: 0 ok, 1 usage, 2 data, 3 infeasible guarantee, 4 theory mismatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use npclass_core::classify::{minimal_feasible_m3, train_detailed, NPClassifier};
use npclass_core::config::{BandwidthRule, Exceedance, Kernel, QuantileRank, TStatForm};
use npclass_core::data::{validate, LabeledDataset};
use npclass_core::numerics::{EmptySetConvention, ThresholdParams};
use npclass_core::{NPConfig, NpError, Variant};
use serde::Deserialize;

use crate::io::{write_predictions, CsvTable, DataError};
use crate::model_file::{ModelArtifactFile, ModelFileError};
use crate::sim::{run_mc, write_rep_csv, Example, SimSpec};
use crate::theory::{
    chernoff_table, duality_check, k_min_grid, table_agrees, PUBLISHED_CHERNOFF_TABLE,
};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_THEORY: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Infeasible(String),
    Theory(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Theory(_) => EXIT_THEORY,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Data(m)
            | CliError::Infeasible(m)
            | CliError::Theory(m) => m,
        }
    }
}

impl From<NpError> for CliError {
    fn from(e: NpError) -> Self {
        match e {
            NpError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "npclass",
    version,
    about = "Neyman-Pearson naive-Bayes classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier on a labeled CSV and write the model JSON.
    Train(TrainArgs),
    /// Score and classify the rows of a CSV.
    Predict(PredictArgs),
    /// Empirical type I/II errors of a model on a labeled CSV.
    Evaluate(EvaluateArgs),
    /// Monte Carlo replications on a simulated example.
    Simulate(SimulateArgs),
    /// Recompute the threshold-rank checks and compare with the expected values.
    VerifyTheory(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    Nsn2,
    Psn2,
    Nn2,
    Pn2,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Nsn2 => Variant::Nsn2,
            VariantArg::Psn2 => Variant::Psn2,
            VariantArg::Nn2 => Variant::Nn2,
            VariantArg::Pn2 => Variant::Pn2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelArg {
    Gaussian,
    Epanechnikov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthArg {
    LogRate,
    Silverman,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TFormArg {
    Welch,
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankArg {
    Floor,
    Ceil,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExceedanceArg {
    Strict,
    Inclusive,
}

/// Procedure settings shared by `train` and `simulate`; flags override `--config`.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigArgs {
    /// TOML file with any of the settings below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Target type I error.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Screening failure probability.
    #[arg(long)]
    pub delta1: Option<f64>,
    /// Tolerated probability of exceeding alpha.
    #[arg(long)]
    pub delta3: Option<f64>,
    /// Permutation screening quantile.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Label permutations averaged into the screening cutoff.
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long, value_enum)]
    pub t_form: Option<TFormArg>,
    #[arg(long, value_enum)]
    pub quantile_rank: Option<RankArg>,
    #[arg(long, value_enum)]
    pub exceedance: Option<ExceedanceArg>,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    #[arg(long, value_enum)]
    pub bandwidth: Option<BandwidthArg>,
    #[arg(long)]
    pub density_floor: Option<f64>,
}

impl ConfigArgs {
    fn overlay(self, base: ConfigArgs) -> ConfigArgs {
        ConfigArgs {
            config: self.config,
            variant: self.variant.or(base.variant),
            alpha: self.alpha.or(base.alpha),
            delta1: self.delta1.or(base.delta1),
            delta3: self.delta3.or(base.delta3),
            q: self.q.or(base.q),
            seed: self.seed.or(base.seed),
            permutations: self.permutations.or(base.permutations),
            t_form: self.t_form.or(base.t_form),
            quantile_rank: self.quantile_rank.or(base.quantile_rank),
            exceedance: self.exceedance.or(base.exceedance),
            kernel: self.kernel.or(base.kernel),
            bandwidth: self.bandwidth.or(base.bandwidth),
            density_floor: self.density_floor.or(base.density_floor),
        }
    }

    /// Flags over the TOML file over defaults, validated.
    pub fn resolve(&self) -> Result<NPConfig, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                toml::from_str::<ConfigArgs>(&text)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => ConfigArgs::default(),
        };
        let a = self.clone().overlay(file);
        let d = NPConfig::for_variant(a.variant.map(Variant::from).unwrap_or(Variant::Nsn2));
        let cfg = NPConfig {
            alpha: a.alpha.unwrap_or(d.alpha),
            delta1: a.delta1.unwrap_or(d.delta1),
            delta3: a.delta3.unwrap_or(d.delta3),
            q_quantile: a.q.unwrap_or(d.q_quantile),
            seed: a.seed.unwrap_or(d.seed),
            permutations: a.permutations.unwrap_or(d.permutations),
            t_form: match a.t_form {
                Some(TFormArg::Welch) => TStatForm::Welch,
                Some(TFormArg::Pooled) => TStatForm::Pooled,
                None => d.t_form,
            },
            quantile_rank: match a.quantile_rank {
                Some(RankArg::Floor) => QuantileRank::Floor,
                Some(RankArg::Ceil) => QuantileRank::Ceil,
                None => d.quantile_rank,
            },
            exceedance: match a.exceedance {
                Some(ExceedanceArg::Strict) => Exceedance::Strict,
                Some(ExceedanceArg::Inclusive) => Exceedance::Inclusive,
                None => d.exceedance,
            },
            kernel: match a.kernel {
                Some(KernelArg::Gaussian) => Kernel::Gaussian,
                Some(KernelArg::Epanechnikov) => Kernel::Epanechnikov,
                None => d.kernel,
            },
            bandwidth: match a.bandwidth {
                Some(BandwidthArg::LogRate) => BandwidthRule::LogRate,
                Some(BandwidthArg::Silverman) => BandwidthRule::Silverman,
                None => d.bandwidth,
            },
            density_floor: a.density_floor.unwrap_or(d.density_floor),
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label_col: String,
    /// Label value of the class whose error is controlled.
    #[arg(long)]
    pub class0_value: String,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Write the model even when no order statistic certifies the guarantee.
    #[arg(long)]
    pub allow_infeasible: bool,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub label_col: String,
    #[arg(long)]
    pub class0_value: String,
    /// JSON report; stdout summary only when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// 1 (mean shift) or 2 (mixture).
    #[arg(long)]
    pub example: u32,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Report directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub test_per_class: usize,
    /// Fresh class-0 draws per replication for the population type I error of KDE models.
    #[arg(long, default_value_t = 100_000)]
    pub r0_draws: usize,
    /// Monte Carlo draws for the Example-2 oracle (0 skips it).
    #[arg(long, default_value_t = 1_000_000)]
    pub oracle_draws: usize,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    /// Every grid combination counts; an empty Chernoff set never wins.
    All,
    /// Only combinations where both rank sets are nonempty count.
    Nonempty,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = ConventionArg::All)]
    pub convention: ConventionArg,
    /// Reduced brute-force and quadrature grids.
    #[arg(long)]
    pub grid_small: bool,
}

fn read_labeled(
    path: &Path,
    label_col: &str,
    class0: &str,
    names: Option<&[String]>,
) -> Result<LabeledDataset, CliError> {
    let data = CsvTable::from_path(path)?.labeled(label_col, class0, names)?;
    let issues = validate(&data);
    let fatal: Vec<String> = issues
        .iter()
        .filter(|i| i.is_fatal())
        .map(|i| i.to_string())
        .collect();
    for issue in issues.iter().filter(|i| !i.is_fatal()) {
        eprintln!("warning: {issue}");
    }
    if !fatal.is_empty() {
        return Err(CliError::Data(fatal.join("; ")));
    }
    Ok(data)
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = a.cfg.resolve()?;
    let data = read_labeled(&a.data, &a.label_col, &a.class0_value, None)?;
    let trained = train_detailed(&data, &cfg)?;
    let clf = &trained.classifier;
    let params = ThresholdParams::new(cfg.alpha, cfg.delta3, clf.m3())?;
    let w = |out: &mut dyn Write, s: String| {
        writeln!(out, "{s}").map_err(|e| CliError::Data(e.to_string()))
    };
    w(out, format!("variant: {}", clf.variant()))?;
    w(out, format!("m3: {}", clf.m3()))?;
    w(out, format!("k_min: {}", params.k_min()))?;
    w(out, format!("k_used: {}", clf.k_used()))?;
    w(out, format!("feasible: {}", clf.feasible()))?;
    w(
        out,
        format!("selected: {} of {}", clf.selected().len(), clf.dim()),
    )?;
    w(out, format!("c_hat: {}", clf.c_hat()))?;
    if !clf.feasible() {
        let need = minimal_feasible_m3(cfg.alpha, cfg.delta3)?;
        let msg = format!(
            "m3={} is too small for the type I guarantee at alpha={}, delta3={}; need m3 >= {need}",
            clf.m3(),
            cfg.alpha,
            cfg.delta3
        );
        if !a.allow_infeasible {
            return Err(CliError::Infeasible(format!(
                "{msg} (pass --allow-infeasible to keep the model)"
            )));
        }
        eprintln!("warning: {msg}; guarantee void");
    }
    ModelArtifactFile::new(clf, &cfg, &data).save(&a.out)?;
    w(out, format!("model: {}", a.out.display()))
}

fn load_model(path: &Path) -> Result<(ModelArtifactFile, NPClassifier), CliError> {
    let file = ModelArtifactFile::load(path)?;
    let clf = file.to_classifier()?;
    Ok((file, clf))
}

fn cmd_predict(a: PredictArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (file, clf) = load_model(&a.model)?;
    let x = CsvTable::from_path(&a.data)?.matrix(&file.feature_names)?;
    if let Some(i) = (0..x.n_rows()).find(|&i| x.row(i).iter().any(|v| !v.is_finite())) {
        return Err(CliError::Data(format!(
            "row {} has a non-finite value",
            i + 1
        )));
    }
    let scores = clf.model().score_rows(&x);
    let preds = clf.predict_rows(&x);
    match &a.out {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(io_err(path))?;
            write_predictions(std::io::BufWriter::new(f), &scores, &preds)
        }
        None => write_predictions(out, &scores, &preds),
    }
    .map_err(|e| CliError::Data(e.to_string()))
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "undefined".into(), |v| v.to_string())
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (file, clf) = load_model(&a.model)?;
    let data = read_labeled(
        &a.data,
        &a.label_col,
        &a.class0_value,
        Some(&file.feature_names),
    )?;
    let (r0, r1) = clf.empirical_errors(&data)?;
    let (b0, b1) = clf.empirical_errors_at(&data, clf.classical_threshold())?;
    let report = serde_json::json!({
        "n_class0": data.class_count(0),
        "n_class1": data.class_count(1),
        "alpha": clf.alpha(),
        "c_hat": clf.c_hat(),
        "r0": r0,
        "r1": r1,
        "classical_threshold": clf.classical_threshold(),
        "classical_r0": b0,
        "classical_r1": b1,
    });
    writeln!(out, "r0: {}\nr1: {}", fmt_rate(r0), fmt_rate(r1))
        .map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(
        out,
        "classical r0: {}\nclassical r1: {}",
        fmt_rate(b0),
        fmt_rate(b1)
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    if let Some(path) = &a.out {
        std::fs::write(
            path,
            serde_json::to_string_pretty(&report).expect("finite report"),
        )
        .map_err(io_err(path))?;
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let example = Example::from_id(a.example).ok_or_else(|| {
        CliError::Usage(format!("unknown example {}; expected 1 or 2", a.example))
    })?;
    let cfg = a.cfg.resolve()?;
    let mut spec = SimSpec::new(example, a.d, a.m, a.n, a.reps, cfg.clone());
    spec.test_per_class = a.test_per_class;
    spec.base_seed = cfg.seed;
    spec.r0_draws = a.r0_draws;
    spec.oracle_draws = a.oracle_draws;
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_mc(&spec).map_err(|e| CliError::Usage(e.to_string()))?;

    std::fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let reps_path = a.out.join("reps.csv");
    let f = std::fs::File::create(&reps_path).map_err(io_err(&reps_path))?;
    write_rep_csv(&report.records, std::io::BufWriter::new(f))
        .map_err(|e| CliError::Data(e.to_string()))?;
    let mut agg = serde_json::to_value(&report).expect("serializable report");
    if let Some(obj) = agg.as_object_mut() {
        obj.remove("records");
    }
    let agg_path = a.out.join("aggregate.json");
    std::fs::write(
        &agg_path,
        serde_json::to_string_pretty(&agg).expect("finite report"),
    )
    .map_err(io_err(&agg_path))?;

    let p = |out: &mut dyn Write, s: String| {
        writeln!(out, "{s}").map_err(|e| CliError::Data(e.to_string()))
    };
    p(
        out,
        format!(
            "replications: {} ok, {} failed",
            report.records.len(),
            report.failures.len()
        ),
    )?;
    p(
        out,
        format!(
            "r0_test: {:.4} (se {:.4})",
            report.r0_test.mean, report.r0_test.se
        ),
    )?;
    p(
        out,
        format!(
            "r1_test: {:.4} (se {:.4})",
            report.r1_test.mean, report.r1_test.se
        ),
    )?;
    if report.r0_analytic.count > 0 {
        p(
            out,
            format!("r0_population: {:.4}", report.r0_analytic.mean),
        )?;
    }
    p(out, format!("violation rate: {:.4}", report.violation_rate))?;
    if let Some(s) = &report.screening {
        p(
            out,
            format!(
                "selected {:.2} missed {:.2} false_pos {:.2}",
                s.selected.mean, s.missed.mean, s.false_pos.mean
            ),
        )?;
    }
    if let Some((r0, r1)) = report.oracle {
        p(out, format!("oracle: r0 {r0:.4} r1 {r1:.4}"))?;
    }
    p(
        out,
        format!("wrote {} and {}", reps_path.display(), agg_path.display()),
    )
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let w = |out: &mut dyn Write, s: String| {
        writeln!(out, "{s}").map_err(|e| CliError::Data(e.to_string()))
    };
    let convention = match a.convention {
        ConventionArg::All => EmptySetConvention::AllCombinations,
        ConventionArg::Nonempty => EmptySetConvention::NonEmptyBoth,
    };
    let mut failures = Vec::new();

    w(
        out,
        format!(
            "#{{k_chern < k_min}} over alpha in 0.01..0.10, m3 in 100..1000 ({:?}):",
            a.convention
        ),
    )?;
    let table = chernoff_table(convention)?;
    for ((delta3, count), expected) in table.iter().zip(PUBLISHED_CHERNOFF_TABLE) {
        let mark = if *count == expected {
            ""
        } else {
            "  <- expected "
        };
        let tail = if mark.is_empty() {
            String::new()
        } else {
            format!("{mark}{expected}")
        };
        w(out, format!("δ3={delta3:.2}: {count}{tail}"))?;
    }
    let counts: Vec<usize> = table.iter().map(|c| c.1).collect();
    if !table_agrees(&counts) {
        failures.push("comparison table".to_string());
    }

    let (cells, bad) = k_min_grid(a.grid_small)?;
    w(
        out,
        format!(
            "k_min vs brute force: {} of {cells} agree",
            cells - bad.len()
        ),
    )?;
    for b in &bad {
        w(
            out,
            format!(
                "  alpha={} delta3={} m3={}: formula {} brute force {}",
                b.alpha, b.delta3, b.m3, b.formula, b.brute_force
            ),
        )?;
    }
    if !bad.is_empty() {
        failures.push("k_min".to_string());
    }

    let dual = duality_check(if a.grid_small { 60 } else { 200 })?;
    w(
        out,
        format!(
            "duality vs quadrature: max |error| {:.3e} over {} cases (worst k={}, n={}, p={})",
            dual.max_error, dual.cases, dual.worst.0, dual.worst.1, dual.worst.2
        ),
    )?;
    if !(dual.max_error < 1e-9) {
        failures.push("duality".to_string());
    }

    if failures.is_empty() {
        w(out, "all checks passed".into())
    } else {
        Err(CliError::Theory(format!(
            "mismatch: {}",
            failures.join(", ")
        )))
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::VerifyTheory(a) => cmd_verify(a, out),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
