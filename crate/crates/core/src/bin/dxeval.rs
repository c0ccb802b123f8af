use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use dxeval::baseline::{fit_logistic, FitOptions, Predictor, WHO_SIRI};
use dxeval::calibration::{expected_calibration_error, reliability_curve, Binning};
use dxeval::cohort::{parse_cohort, write_cohort, ColumnMapping, Role};
use dxeval::curves::{pr_curve, roc_curve};
use dxeval::dca::{dca_curve, DcaOptions, DecisionRule};
use dxeval::inference::{bootstrap_ci, delong_compare, delong_interval, BootstrapConfig, CiMethod, DeLongMode};
use dxeval::report::{self, svg, RunConfig};
use dxeval::synth::{
    generate_binormal, generate_calibrated, generate_clinical, BinormalSpec, CalibratedSpec, ClinicalSpec,
    FeatureDistributions, ScoreDistribution,
};
use dxeval::thresholds::{parse_grid, threshold_sweep};
use dxeval::{Error, Result};

/// Evaluate and compare binary diagnostic classifiers.
#[derive(Parser)]
#[command(name = "dxeval", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the logistic baseline on a training cohort.
    FitBaseline(FitBaselineArgs),
    /// Confusion-derived metrics over a threshold grid.
    Sweep(SweepArgs),
    /// ROC and precision-recall points plus SVG renderings.
    Curves(CurvesArgs),
    /// Bootstrap and DeLong AUC inference, with a DeLong test for two models.
    Compare(CompareArgs),
    /// Reliability bins and expected calibration error.
    Calibrate(CalibrateArgs),
    /// Net-benefit decision curve with bootstrap bands.
    Dca(DcaArgs),
    /// Write a synthetic cohort CSV.
    Synth(SynthArgs),
    /// Full multi-model report from a config file or flags.
    Report(ReportArgs),
    /// Generate the bundled synthetic demo and report on it.
    Demo(DemoArgs),
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Cohort CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "case_id")]
    id_col: String,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long)]
    pct_normal_col: Option<String>,
    #[arg(long)]
    neut_col: Option<String>,
    #[arg(long)]
    mono_col: Option<String>,
    #[arg(long)]
    lymph_col: Option<String>,
    #[arg(long)]
    siri_col: Option<String>,
}

impl InputArgs {
    fn mapping(&self, scores: &[String]) -> ColumnMapping {
        ColumnMapping {
            case_id: self.id_col.clone(),
            label: self.label_col.clone(),
            scores: scores.to_vec(),
            pct_normal: self.pct_normal_col.clone(),
            neutrophils: self.neut_col.clone(),
            monocytes: self.mono_col.clone(),
            lymphocytes: self.lymph_col.clone(),
            siri: self.siri_col.clone(),
        }
    }

    fn load(&self, scores: &[String], role: Role) -> Result<dxeval::Cohort> {
        parse_cohort(&self.input, &self.mapping(scores), role)
    }
}

#[derive(Args, Clone)]
struct BootstrapArgs {
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long = "ci", value_enum, default_value_t = CiArg::Bca)]
    ci: CiArg,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// Worker threads for resampling; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

impl BootstrapArgs {
    fn config(&self) -> BootstrapConfig {
        BootstrapConfig {
            replicates: self.replicates,
            seed: self.seed,
            method: self.ci.into(),
            confidence: self.confidence,
            workers: self.workers,
            bounds: None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CiArg {
    Bca,
    Percentile,
}

impl From<CiArg> for CiMethod {
    fn from(c: CiArg) -> Self {
        match c {
            CiArg::Bca => CiMethod::Bca,
            CiArg::Percentile => CiMethod::Percentile,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Paired,
    Unpaired,
}

impl From<ModeArg> for DeLongMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Paired => DeLongMode::Paired,
            ModeArg::Unpaired => DeLongMode::Unpaired,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BinningArg {
    Equal,
    Quantile,
}

impl From<BinningArg> for Binning {
    fn from(b: BinningArg) -> Self {
        match b {
            BinningArg::Equal => Binning::EqualWidth,
            BinningArg::Quantile => Binning::Quantile,
        }
    }
}

#[derive(Args)]
struct FitBaselineArgs {
    /// Training cohort CSV.
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value = "case_id")]
    id_col: String,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long, default_value = "pct_normal")]
    pct_normal_col: String,
    #[arg(long)]
    neut_col: Option<String>,
    #[arg(long)]
    mono_col: Option<String>,
    #[arg(long)]
    lymph_col: Option<String>,
    #[arg(long)]
    siri_col: Option<String>,
    /// Predictors, in order (pct_normal, siri).
    #[arg(long = "predictor", value_delimiter = ',')]
    predictors: Vec<String>,
    /// Ridge penalty on non-intercept coefficients.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    score_col: String,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0:0.5:0.1")]
    grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurvesArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    score_col: String,
    /// Prefix for `<prefix>roc.csv`, `<prefix>pr.csv` and their SVGs.
    #[arg(long, default_value = "")]
    out_prefix: String,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    input: InputArgs,
    /// One or two score columns.
    #[arg(long = "score-col", required = true, num_args = 1)]
    score_cols: Vec<String>,
    /// DeLong pairing; required when two models are given.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[command(flatten)]
    bootstrap: BootstrapArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    score_col: String,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long, value_enum, default_value_t = BinningArg::Equal)]
    binning: BinningArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reliability diagram; defaults to the CSV path with an .svg extension.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct DcaArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    score_col: String,
    #[arg(long, default_value = "0.01:0.5:0.01")]
    grid: String,
    /// Classify at one fixed cutoff instead of at each threshold probability.
    #[arg(long)]
    fixed_cutoff: Option<f64>,
    /// Skip bootstrap bands.
    #[arg(long)]
    no_bands: bool,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long = "ci", value_enum, default_value_t = CiArg::Percentile)]
    ci: CiArg,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(subcommand)]
    kind: SynthKind,
}

#[derive(Subcommand)]
enum SynthKind {
    /// Normal latent scores per class mapped through the logistic function.
    Binormal(BinormalArgs),
    /// Scores from a distribution, labels Bernoulli(score).
    Calibrated(CalibratedArgs),
    /// Uniform clinical features with logistic labels.
    Clinical(ClinicalArgs),
}

#[derive(Args)]
struct SynthCommon {
    /// TOML or JSON file holding the full generator spec; overrides flags.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BinormalArgs {
    #[command(flatten)]
    common: SynthCommon,
    #[arg(long, default_value_t = 500)]
    n_pos: usize,
    #[arg(long, default_value_t = 500)]
    n_neg: usize,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    mu_pos: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu_neg: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_pos: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma_neg: f64,
}

#[derive(Args)]
struct CalibratedArgs {
    #[command(flatten)]
    common: SynthCommon,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
}

#[derive(Args)]
struct ClinicalArgs {
    #[command(flatten)]
    common: SynthCommon,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Intercept, pct_normal and SIRI coefficients.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [-4.0, 0.5, -0.8], allow_hyphen_values = true)]
    betas: Vec<f64>,
}

#[derive(Args)]
struct ReportArgs {
    /// TOML run configuration; other flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "case_id")]
    id_col: String,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long = "score-col")]
    score_cols: Vec<String>,
    /// Training cohort for the logistic baseline.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    pct_normal_col: Option<String>,
    #[arg(long)]
    neut_col: Option<String>,
    #[arg(long)]
    mono_col: Option<String>,
    #[arg(long)]
    lymph_col: Option<String>,
    #[arg(long)]
    siri_col: Option<String>,
    #[arg(long, value_enum, default_value_t = ModeArg::Paired)]
    mode: ModeArg,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long = "ci", value_enum, default_value_t = CiArg::Bca)]
    ci: CiArg,
    /// Output directory; falls back to $DXEVAL_OUT_DIR, then ./dxeval-out.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    /// Directory for the demo cohort, config and report.
    #[arg(long, default_value = "dxeval-demo")]
    dir: PathBuf,
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

fn read_params<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }
}

fn fit_baseline(a: FitBaselineArgs) -> Result<()> {
    let mapping = ColumnMapping {
        case_id: a.id_col,
        label: a.label_col,
        scores: Vec::new(),
        pct_normal: Some(a.pct_normal_col),
        neutrophils: a.neut_col,
        monocytes: a.mono_col,
        lymphocytes: a.lymph_col,
        siri: a.siri_col,
    };
    let predictors = if a.predictors.is_empty() {
        WHO_SIRI.to_vec()
    } else {
        a.predictors.iter().map(|p| Predictor::parse(p)).collect::<Result<_>>()?
    };
    let train = parse_cohort(&a.train, &mapping, Role::Train)?;
    let opts = FitOptions {
        ridge: a.ridge,
        ..FitOptions::default()
    };
    let fit = fit_logistic(&train, &predictors, &opts)?;
    write_json(a.out.as_deref(), &fit)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let scored = a.input.load(std::slice::from_ref(&a.score_col), Role::Evaluate)?.scored(&a.score_col)?;
    let rows = threshold_sweep(&scored.scores, &scored.labels, &parse_grid(&a.grid)?)?;
    write_text(a.out.as_deref(), &report::sweep_csv(&rows)?)
}

fn curves(a: CurvesArgs) -> Result<()> {
    let scored = a.input.load(std::slice::from_ref(&a.score_col), Role::Evaluate)?.scored(&a.score_col)?;
    let prevalence = scored.n_positive() as f64 / scored.len() as f64;
    let roc = roc_curve(&scored.scores, &scored.labels)?;
    let pr = pr_curve(&scored.scores, &scored.labels)?;
    let p = &a.out_prefix;
    let out = |suffix: &str| PathBuf::from(format!("{p}{suffix}"));
    write_text(Some(&out("roc.csv")), &report::curve_csv(&roc)?)?;
    write_text(Some(&out("pr.csv")), &report::curve_csv(&pr)?)?;
    write_text(
        Some(&out("roc.svg")),
        &svg::curve_svg(&roc, &format!("ROC - {}", a.score_col), prevalence, None),
    )?;
    write_text(
        Some(&out("pr.svg")),
        &svg::curve_svg(&pr, &format!("Precision-recall - {}", a.score_col), prevalence, None),
    )?;
    println!("roc_auc\t{}\naverage_precision\t{}", roc.area, pr.area);
    Ok(())
}

#[derive(Serialize)]
struct ModelAuc {
    model: String,
    n: usize,
    bootstrap: dxeval::inference::IntervalEstimate,
    delong: dxeval::inference::IntervalEstimate,
}

#[derive(Serialize)]
struct CompareOutput {
    models: Vec<ModelAuc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<dxeval::inference::DeLongResult>,
}

fn compare(a: CompareArgs) -> Result<()> {
    if a.score_cols.len() > 2 {
        return Err(Error::Config("compare takes one or two --score-col values".into()));
    }
    let mode = match (a.score_cols.len(), a.mode) {
        (2, None) => return Err(Error::Config("--mode paired|unpaired is required for two models".into())),
        (_, m) => m.map(DeLongMode::from),
    };
    let cohort = a.input.load(&a.score_cols, Role::Evaluate)?;
    let cfg = a.bootstrap.config().unit_interval();
    let mut models = Vec::new();
    let mut scored = Vec::new();
    for name in &a.score_cols {
        let s = cohort.scored(name)?;
        let data: Vec<(f64, bool)> = s.scores.iter().copied().zip(s.labels.iter().copied()).collect();
        let boot = bootstrap_ci(
            &data,
            |sample: &[(f64, bool)]| {
                let (x, y): (Vec<f64>, Vec<bool>) = sample.iter().copied().unzip();
                dxeval::curves::roc_auc(&x, &y).ok()
            },
            &cfg,
        )?;
        let delong = delong_interval(&s.scores, &s.labels, cfg.confidence)?;
        models.push(ModelAuc {
            model: name.clone(),
            n: s.len(),
            bootstrap: boot,
            delong,
        });
        scored.push(s);
    }
    let comparison = match mode {
        Some(DeLongMode::Paired) if scored.len() == 2 => {
            let (x, y, labels) = cohort.paired(&a.score_cols[0], &a.score_cols[1])?;
            Some(delong_compare(
                &dxeval::Scored::new(x, labels.clone())?,
                &dxeval::Scored::new(y, labels)?,
                DeLongMode::Paired,
            )?)
        }
        Some(m) if scored.len() == 2 => Some(delong_compare(&scored[0], &scored[1], m)?),
        _ => None,
    };
    write_json(a.out.as_deref(), &CompareOutput { models, comparison })
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let scored = a.input.load(std::slice::from_ref(&a.score_col), Role::Evaluate)?.scored(&a.score_col)?;
    let bins = reliability_curve(&scored.scores, &scored.labels, a.binning.into(), a.bins)?;
    let ece = expected_calibration_error(&bins)?;
    write_text(a.out.as_deref(), &report::calibration_csv(&bins)?)?;
    let svg_path = a.svg.or_else(|| a.out.as_ref().map(|p| p.with_extension("svg")));
    if let Some(p) = svg_path {
        write_text(
            Some(&p),
            &svg::calibration_svg(&bins, &format!("Reliability - {}", a.score_col), None),
        )?;
    }
    eprintln!("ece\t{ece}");
    Ok(())
}

fn dca(a: DcaArgs) -> Result<()> {
    let scored = a.input.load(std::slice::from_ref(&a.score_col), Role::Evaluate)?.scored(&a.score_col)?;
    let opts = DcaOptions {
        rule: a.fixed_cutoff.map_or(DecisionRule::AtThreshold, DecisionRule::FixedCutoff),
        bootstrap: (!a.no_bands).then(|| BootstrapConfig {
            replicates: a.replicates,
            seed: a.seed,
            method: a.ci.into(),
            ..BootstrapConfig::default()
        }),
    };
    let curve = dca_curve(&scored.scores, &scored.labels, &parse_grid(&a.grid)?, &opts)?;
    write_text(a.out.as_deref(), &report::dca_csv(&curve)?)?;
    let svg_path = a.svg.or_else(|| a.out.as_ref().map(|p| p.with_extension("svg")));
    if let Some(p) = svg_path {
        write_text(
            Some(&p),
            &svg::dca_svg(&curve, &format!("Decision curve - {}", a.score_col), None),
        )?;
    }
    Ok(())
}

fn write_cohort_file(cohort: &dxeval::Cohort, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_cohort(cohort, file)?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let (cohort, out) = match a.kind {
        SynthKind::Binormal(b) => {
            let spec = match &b.common.params {
                Some(p) => read_params(p)?,
                None => BinormalSpec {
                    n_pos: b.n_pos,
                    n_neg: b.n_neg,
                    mu_pos: b.mu_pos,
                    mu_neg: b.mu_neg,
                    sigma_pos: b.sigma_pos,
                    sigma_neg: b.sigma_neg,
                    seed: b.common.seed,
                },
            };
            (generate_binormal(&spec)?, b.common.out)
        }
        SynthKind::Calibrated(c) => {
            let spec = match &c.common.params {
                Some(p) => read_params(p)?,
                None => CalibratedSpec {
                    n: c.n,
                    distribution: ScoreDistribution::Uniform { lo: c.lo, hi: c.hi },
                    seed: c.common.seed,
                },
            };
            (generate_calibrated(&spec)?, c.common.out)
        }
        SynthKind::Clinical(c) => {
            let spec = match &c.common.params {
                Some(p) => read_params(p)?,
                None => ClinicalSpec {
                    n: c.n,
                    betas: [c.betas[0], c.betas[1], c.betas[2]],
                    features: FeatureDistributions::default(),
                    seed: c.common.seed,
                },
            };
            (generate_clinical(&spec)?, c.common.out)
        }
    };
    write_cohort_file(&cohort, &out)
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let input = a
                .input
                .clone()
                .ok_or_else(|| Error::Config("report needs --config or --input".into()))?;
            let mapping = ColumnMapping {
                case_id: a.id_col.clone(),
                label: a.label_col.clone(),
                scores: a.score_cols.clone(),
                pct_normal: a.pct_normal_col.clone(),
                neutrophils: a.neut_col.clone(),
                monocytes: a.mono_col.clone(),
                lymphocytes: a.lymph_col.clone(),
                siri: a.siri_col.clone(),
            };
            let mut cfg = RunConfig::new(input, mapping);
            cfg.delong_mode = a.mode.into();
            cfg.bootstrap.replicates = a.replicates;
            cfg.bootstrap.seed = a.seed;
            cfg.bootstrap.method = a.ci.into();
            cfg.baseline = a.train.clone().map(|train| report::BaselineRequest {
                train,
                ..Default::default()
            });
            cfg
        }
    };
    if a.out_dir.is_some() {
        cfg.output_dir = a.out_dir.clone();
    }
    let dir = cfg.resolved_output_dir();
    let summary = report::run_comparison(&cfg)?;
    print!("{}", report::render_tables(&summary).performance.to_text());
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn demo(a: DemoArgs) -> Result<()> {
    let mut cfg = report::write_demo(&a.dir)?;
    cfg.output_dir = Some(a.dir.join("report"));
    let summary = report::run_comparison(&cfg)?;
    let tables = report::render_tables(&summary);
    for (_, t) in tables.all() {
        println!("{}", t.to_text());
    }
    eprintln!("wrote {}", a.dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::FitBaseline(a) => fit_baseline(a),
        Command::Sweep(a) => sweep(a),
        Command::Curves(a) => curves(a),
        Command::Compare(a) => compare(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Dca(a) => dca(a),
        Command::Synth(a) => synth(a),
        Command::Report(a) => report_cmd(a),
        Command::Demo(a) => demo(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
