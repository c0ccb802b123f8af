//! Full comparison runs: configuration, the JSON summary, and everything
//! rendered from it (tables, per-model CSVs, SVG figures).
//!
//! `summary.json` is the single source of truth. Tables and plots are
//! derived from a `RunSummary` without recomputing any statistic, and a run
//! is a pure function of its configuration and inputs, so repeating it
//! reproduces the same bytes.

pub mod format;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{fit_logistic, predict_proba, FitOptions, LogisticFit, Predictor, WHO_SIRI};
use crate::calibration::{expected_calibration_error, reliability_curve, Binning, ReliabilityBin};
use crate::cohort::{check_disjoint, parse_cohort, prevalence, Cohort, ColumnMapping, Role};
use crate::curves::{average_precision, pr_curve, roc_auc, roc_curve, CurveSeries};
use crate::dca::{dca_curve, default_dca_grid, DcaOptions, DecisionRule, NetBenefitCurve};
use crate::error::{Error, Result, StageExt};
use crate::inference::{
    bootstrap_ci, delong_compare, delong_interval, BootstrapConfig, CiMethod, DeLongMode, DeLongResult, IntervalEstimate,
};
use crate::thresholds::{best_f1_operating_point, default_sweep_grid, threshold_sweep, SweepRow};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DXEVAL_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputConfig {
    pub path: PathBuf,
    #[serde(flatten)]
    pub columns: ColumnMapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineRequest {
    /// Training cohort; must share no case ids with the evaluation input.
    pub train: PathBuf,
    /// Column mapping for the training file; defaults to the input mapping.
    pub columns: Option<ColumnMapping>,
    /// Score column name given to the fitted model's predictions.
    pub name: String,
    pub predictors: Vec<Predictor>,
    pub ridge: f64,
}

impl Default for BaselineRequest {
    fn default() -> Self {
        BaselineRequest {
            train: PathBuf::new(),
            columns: None,
            name: "who_siri".into(),
            predictors: WHO_SIRI.to_vec(),
            ridge: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub bins: usize,
    pub binning: Binning,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            bins: 10,
            binning: Binning::EqualWidth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcaConfig {
    pub grid: Vec<f64>,
    pub rule: DecisionRule,
    /// Bootstrap bands around the model curve.
    pub bands: bool,
    pub band_method: CiMethod,
}

impl Default for DcaConfig {
    fn default() -> Self {
        DcaConfig {
            grid: default_dca_grid(),
            rule: DecisionRule::AtThreshold,
            bands: true,
            band_method: CiMethod::Percentile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputConfig,
    /// Score columns to evaluate. Empty means every mapped score column plus
    /// the baseline, if requested.
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub baseline: Option<BaselineRequest>,
    #[serde(default = "default_sweep_grid")]
    pub sweep_grid: Vec<f64>,
    /// Operating point shown in the overall-performance and confusion tables.
    #[serde(default)]
    pub table_threshold: f64,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub dca: DcaConfig,
    #[serde(default = "default_mode")]
    pub delong_mode: DeLongMode,
    /// Not echoed into the summary, so runs into different directories
    /// still produce identical summaries.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
    /// Embed the run time in the summary and SVGs. Off by default because
    /// it breaks byte-for-byte reproducibility.
    #[serde(default)]
    pub include_timestamps: bool,
}

fn default_mode() -> DeLongMode {
    DeLongMode::Paired
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, columns: ColumnMapping) -> Self {
        RunConfig {
            input: InputConfig {
                path: input.into(),
                columns,
            },
            models: Vec::new(),
            baseline: None,
            sweep_grid: default_sweep_grid(),
            table_threshold: 0.0,
            bootstrap: BootstrapConfig::default(),
            calibration: CalibrationConfig::default(),
            dca: DcaConfig::default(),
            delong_mode: DeLongMode::Paired,
            output_dir: None,
            include_timestamps: false,
        }
    }

    /// Read a TOML config; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.input.path);
        if let Some(b) = cfg.baseline.as_mut() {
            resolve(&mut b.train);
        }
        if let Some(o) = cfg.output_dir.as_mut() {
            resolve(o);
        }
        Ok(cfg)
    }

    /// Explicit setting, then `DXEVAL_OUT_DIR`, then `./dxeval-out`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("dxeval-out"))
    }

    fn model_list(&self) -> Vec<String> {
        let mut models = if self.models.is_empty() {
            self.input.columns.scores.clone()
        } else {
            self.models.clone()
        };
        if let Some(b) = &self.baseline {
            if !models.contains(&b.name) {
                models.push(b.name.clone());
            }
        }
        models
    }

    fn validate(&self) -> Result<()> {
        if self.model_list().is_empty() {
            return Err(Error::Config("no models to evaluate".into()));
        }
        if !(0.0..=1.0).contains(&self.table_threshold) {
            return Err(Error::InvalidThreshold(self.table_threshold));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortInfo {
    pub n_cases: usize,
    pub n_positive: usize,
    pub prevalence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub name: String,
    pub fit: LogisticFit,
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub binning: Binning,
    pub bins: Vec<ReliabilityBin>,
    pub ece: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub name: String,
    pub n: usize,
    pub n_positive: usize,
    pub prevalence: f64,
    pub roc_auc: IntervalEstimate,
    pub roc_auc_delong: IntervalEstimate,
    pub pr_auc: IntervalEstimate,
    /// Integrator used for `pr_auc`.
    pub pr_integration: String,
    pub operating_point: SweepRow,
    pub sweep: Vec<SweepRow>,
    pub best_f1: Option<SweepRow>,
    pub calibration: CalibrationSummary,
    pub dca: NetBenefitCurve,
    pub roc: CurveSeries,
    pub pr: CurveSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSummary {
    pub model_a: String,
    pub model_b: String,
    pub n_cases: usize,
    pub delong: DeLongResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at_unix: Option<u64>,
    pub cohort: CohortInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineSummary>,
    pub models: Vec<ModelSummary>,
    /// Absent when only one model is evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<Vec<PairwiseSummary>>,
}

impl RunSummary {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

fn pairs_of(scores: &[f64], labels: &[bool]) -> Vec<(f64, bool)> {
    scores.iter().copied().zip(labels.iter().copied()).collect()
}

fn split(sample: &[(f64, bool)]) -> (Vec<f64>, Vec<bool>) {
    sample.iter().copied().unzip()
}

fn auc_statistic(sample: &[(f64, bool)]) -> Option<f64> {
    let (s, l) = split(sample);
    roc_auc(&s, &l).ok()
}

fn ap_statistic(sample: &[(f64, bool)]) -> Option<f64> {
    let (s, l) = split(sample);
    average_precision(&s, &l).ok()
}

/// Every per-model analysis for one score column.
pub fn evaluate_model(cohort: &Cohort, model: &str, cfg: &RunConfig) -> Result<ModelSummary> {
    let scored = cohort.scored(model).stage("select scores")?;
    let (scores, labels) = (&scored.scores, &scored.labels);
    let n_positive = scored.n_positive();
    let data = pairs_of(scores, labels);
    let boot = cfg.bootstrap.unit_interval();

    let roc = roc_curve(scores, labels).stage("roc curve")?;
    let pr = pr_curve(scores, labels).stage("pr curve")?;
    let roc_ci = bootstrap_ci(&data, auc_statistic, &boot).stage("roc-auc bootstrap")?;
    let pr_ci = bootstrap_ci(&data, ap_statistic, &boot).stage("pr-auc bootstrap")?;
    let delong = delong_interval(scores, labels, boot.confidence).stage("roc-auc delong")?;

    let sweep = threshold_sweep(scores, labels, &cfg.sweep_grid).stage("threshold sweep")?;
    let best_f1 = best_f1_operating_point(&sweep).ok().cloned();
    let operating_point = threshold_sweep(scores, labels, &[cfg.table_threshold])
        .stage("operating point")?
        .remove(0);

    let bins = reliability_curve(scores, labels, cfg.calibration.binning, cfg.calibration.bins).stage("calibration")?;
    let ece = expected_calibration_error(&bins).stage("calibration")?;

    let dca_opts = DcaOptions {
        rule: cfg.dca.rule,
        bootstrap: cfg.dca.bands.then_some(BootstrapConfig {
            method: cfg.dca.band_method,
            bounds: None,
            ..cfg.bootstrap
        }),
    };
    let dca = dca_curve(scores, labels, &cfg.dca.grid, &dca_opts).stage("decision curve")?;

    Ok(ModelSummary {
        name: model.to_string(),
        n: scores.len(),
        n_positive,
        prevalence: n_positive as f64 / scores.len() as f64,
        roc_auc: roc_ci,
        roc_auc_delong: delong,
        pr_auc: pr_ci,
        pr_integration: "average_precision_step".into(),
        operating_point,
        sweep,
        best_f1,
        calibration: CalibrationSummary {
            binning: cfg.calibration.binning,
            bins,
            ece,
        },
        dca,
        roc,
        pr,
    })
}

fn compare_pair(cohort: &Cohort, a: &str, b: &str, mode: DeLongMode) -> Result<PairwiseSummary> {
    let (sa, sb) = match mode {
        DeLongMode::Paired => {
            let (x, y, labels) = cohort.paired(a, b)?;
            (
                crate::cohort::Scored::new(x, labels.clone())?,
                crate::cohort::Scored::new(y, labels)?,
            )
        }
        DeLongMode::Unpaired => (cohort.scored(a)?, cohort.scored(b)?),
    };
    let delong = delong_compare(&sa, &sb, mode)?;
    Ok(PairwiseSummary {
        model_a: a.to_string(),
        model_b: b.to_string(),
        n_cases: sa.len().max(sb.len()),
        delong,
    })
}

/// Load inputs, fit the baseline if requested, and return the cohort to
/// evaluate along with the baseline summary.
pub fn prepare_cohort(cfg: &RunConfig) -> Result<(Cohort, Option<BaselineSummary>)> {
    let mut columns = cfg.input.columns.clone();
    let baseline_name = cfg.baseline.as_ref().map(|b| b.name.clone());
    for m in cfg.model_list() {
        if Some(&m) != baseline_name.as_ref() && !columns.scores.contains(&m) {
            columns.scores.push(m);
        }
    }
    let cohort = parse_cohort(&cfg.input.path, &columns, Role::Evaluate).stage("load input")?;

    let Some(req) = &cfg.baseline else {
        return Ok((cohort, None));
    };
    let train_cols = req.columns.clone().unwrap_or_else(|| ColumnMapping {
        scores: Vec::new(),
        ..cfg.input.columns.clone()
    });
    let train = parse_cohort(&req.train, &train_cols, Role::Train).stage("load baseline training data")?;
    if let Some(id) = check_disjoint(&train, &cohort).into_iter().next() {
        return Err(Error::DuplicateCaseId(id).in_stage("train/evaluate overlap"));
    }
    let opts = FitOptions {
        ridge: req.ridge,
        ..FitOptions::default()
    };
    let fit = fit_logistic(&train, &req.predictors, &opts).stage("baseline fit")?;
    let scored = cohort
        .with_scores(&req.name, |c| predict_proba(&fit, c).map(Some))
        .stage("baseline scoring")?;
    Ok((
        scored,
        Some(BaselineSummary {
            name: req.name.clone(),
            fit,
            n_train: train.len(),
        }),
    ))
}

/// Compute the summary without touching the filesystem beyond reading inputs.
pub fn compute_summary(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let (cohort, baseline) = prepare_cohort(cfg)?;
    let models = cfg.model_list();

    let per_model: Vec<ModelSummary> = models
        .par_iter()
        .map(|m| evaluate_model(&cohort, m, cfg).map_err(|e| e.in_stage(format!("model `{m}`"))))
        .collect::<Result<_>>()?;

    let pairwise = if models.len() < 2 {
        None
    } else {
        let mut out = Vec::new();
        for i in 0..models.len() {
            for j in i + 1..models.len() {
                out.push(
                    compare_pair(&cohort, &models[i], &models[j], cfg.delong_mode)
                        .map_err(|e| e.in_stage(format!("compare `{}` vs `{}`", models[i], models[j])))?,
                );
            }
        }
        Some(out)
    };

    let n_positive = cohort.cases().iter().filter(|c| c.label).count();
    Ok(RunSummary {
        schema_version: SCHEMA_VERSION,
        tool: ToolInfo {
            name: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
        config: cfg.clone(),
        generated_at_unix: cfg.include_timestamps.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        }),
        cohort: CohortInfo {
            n_cases: cohort.len(),
            n_positive,
            prevalence: prevalence(&cohort)?,
        },
        baseline,
        models: per_model,
        pairwise,
    })
}

/// A rendered table: header plus string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(title: &str, header: &[&str]) -> Self {
        Table {
            title: title.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }

    /// Column-aligned plain text.
    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                std::iter::once(&self.header[c])
                    .chain(self.rows.iter().map(|r| &r[c]))
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = format!("{}\n{}\n", self.title, line(&self.header));
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedTables {
    /// Overall performance at the configured operating point.
    pub performance: Table,
    /// Threshold sweep.
    pub thresholds: Table,
    /// Confusion counts at the operating point.
    pub confusion: Table,
    /// ROC-AUC with bootstrap interval.
    pub auc: Table,
    /// Pairwise DeLong comparisons; `None` for single-model runs.
    pub comparisons: Option<Table>,
}

impl RenderedTables {
    pub fn all(&self) -> Vec<(&'static str, &Table)> {
        let mut v = vec![
            ("table1_performance", &self.performance),
            ("table2_thresholds", &self.thresholds),
            ("table3_confusion", &self.confusion),
            ("table4_auc", &self.auc),
        ];
        if let Some(c) = &self.comparisons {
            v.push(("table4_comparisons", c));
        }
        v
    }
}

/// Format the summary into the four report tables. Reads summary fields
/// only; nothing is recomputed here.
pub fn render_tables(summary: &RunSummary) -> RenderedTables {
    let mut performance = Table::new(
        "Overall classification performance",
        &["Model", "N", "ROC-AUC (95% CI)", "PR-AUC (95% CI)", "Sensitivity", "Specificity", "F1-score"],
    );
    let mut thresholds = Table::new(
        "Decision threshold analysis",
        &["Model", "Threshold", "Sensitivity", "Specificity", "PPV", "NPV", "F1-score", "Flagged %"],
    );
    let mut confusion = Table::new("Confusion matrices", &["Model", "TP", "FP", "TN", "FN", "Threshold"]);
    let mut auc = Table::new("ROC-AUC with 95% confidence intervals", &["Model", "ROC-AUC", "95% CI", "Method"]);

    for m in &summary.models {
        let op = &m.operating_point;
        performance.rows.push(vec![
            m.name.clone(),
            m.n.to_string(),
            format::auc_with_ci(&m.roc_auc),
            format::auc_with_ci(&m.pr_auc),
            format::sensitivity(op.metrics.sensitivity),
            format::sensitivity(op.metrics.specificity),
            format::f1(op.metrics.f1),
        ]);
        for row in &m.sweep {
            thresholds.rows.push(vec![
                m.name.clone(),
                format::threshold(row.threshold),
                format::sensitivity(row.metrics.sensitivity),
                format::rate(row.metrics.specificity),
                format::rate(row.metrics.ppv),
                format::rate(row.metrics.npv),
                format::f1(row.metrics.f1),
                format::flagged_pct(row.metrics.flagged_fraction),
            ]);
        }
        let c = &op.counts;
        confusion.rows.push(vec![
            m.name.clone(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.tn.to_string(),
            c.fn_.to_string(),
            format::threshold(op.threshold),
        ]);
        let method = match m.roc_auc.method {
            crate::inference::IntervalMethod::Bca => "bootstrap BCa",
            crate::inference::IntervalMethod::Percentile => "bootstrap percentile",
            crate::inference::IntervalMethod::Delong => "DeLong",
        };
        auc.rows.push(vec![
            m.name.clone(),
            format::auc(m.roc_auc.point),
            format::interval(&m.roc_auc),
            method.to_string(),
        ]);
        auc.rows.push(vec![
            m.name.clone(),
            format::auc(m.roc_auc_delong.point),
            format::interval(&m.roc_auc_delong),
            "DeLong".to_string(),
        ]);
    }

    let comparisons = summary.pairwise.as_ref().map(|pairs| {
        let mut t = Table::new(
            "Pairwise ROC-AUC comparisons (two-sided DeLong test)",
            &["Comparison", "Difference", "z", "p", "Mode", "N"],
        );
        for p in pairs {
            t.rows.push(vec![
                format!("{} vs {}", p.model_a, p.model_b),
                format::auc(p.delong.difference()),
                format!("{:.2}", p.delong.z),
                format::p_value(p.delong.p_two_sided),
                match p.delong.mode {
                    DeLongMode::Paired => "paired".to_string(),
                    DeLongMode::Unpaired => "unpaired".to_string(),
                },
                p.n_cases.to_string(),
            ]);
        }
        t
    });

    RenderedTables {
        performance,
        thresholds,
        confusion,
        auc,
        comparisons,
    }
}

/// Sweep CSV: threshold, sensitivity, specificity, ppv, npv, f1, accuracy,
/// flagged_pct, tp, fp, tn, fn. Undefined metrics are empty cells.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "threshold",
        "sensitivity",
        "specificity",
        "ppv",
        "npv",
        "f1",
        "accuracy",
        "flagged_pct",
        "tp",
        "fp",
        "tn",
        "fn",
    ])?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.threshold.to_string(),
            format::raw(m.sensitivity),
            format::raw(m.specificity),
            format::raw(m.ppv),
            format::raw(m.npv),
            format::raw(m.f1),
            format::raw(m.accuracy),
            format::raw(m.flagged_fraction.map(|f| f * 100.0)),
            r.counts.tp.to_string(),
            r.counts.fp.to_string(),
            r.counts.tn.to_string(),
            r.counts.fn_.to_string(),
        ])?;
    }
    finish_csv(w)
}

/// Curve points CSV: x, y, threshold (empty for the ROC origin).
pub fn curve_csv(curve: &CurveSeries) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y", "threshold"])?;
    for p in &curve.points {
        w.write_record([p.x.to_string(), p.y.to_string(), format::raw(p.threshold)])?;
    }
    finish_csv(w)
}

pub fn calibration_csv(bins: &[ReliabilityBin]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["lo", "hi", "n", "mean_predicted", "observed_frequency"])?;
    for b in bins {
        w.write_record([
            b.lo.to_string(),
            b.hi.to_string(),
            b.n.to_string(),
            format::raw(b.mean_predicted),
            format::raw(b.observed_frequency),
        ])?;
    }
    finish_csv(w)
}

pub fn dca_csv(curve: &NetBenefitCurve) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["threshold", "model_nb", "treat_all_nb", "treat_none_nb", "band_lo", "band_hi"])?;
    for i in 0..curve.thresholds.len() {
        let band = curve.bands.as_ref().map(|b| b[i]);
        w.write_record([
            curve.thresholds[i].to_string(),
            curve.model_nb[i].to_string(),
            curve.treat_all_nb[i].to_string(),
            curve.treat_none_nb[i].to_string(),
            format::raw(band.map(|b| b.lo)),
            format::raw(band.map(|b| b.hi)),
        ])?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

/// File-name-safe version of a model name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Write summary.json, the tables and per-model CSV/SVG files. Returns the
/// paths written, in write order.
pub fn write_outputs(summary: &RunSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = vec![write(dir, "summary.json", &summary.to_json()?)?];

    let tables = render_tables(summary);
    let mut text = String::new();
    for (stem, table) in tables.all() {
        written.push(write(dir, &format!("{stem}.csv"), &table.to_csv()?)?);
        text.push_str(&table.to_text());
        text.push('\n');
    }
    written.push(write(dir, "tables.txt", &text)?);

    let metadata = summary
        .generated_at_unix
        .map(|t| format!("{} {} generated at unix time {t}", summary.tool.name, summary.tool.version));
    let meta = metadata.as_deref();
    for m in &summary.models {
        let stem = file_stem(&m.name);
        written.push(write(dir, &format!("{stem}_sweep.csv"), &sweep_csv(&m.sweep)?)?);
        written.push(write(dir, &format!("{stem}_roc.csv"), &curve_csv(&m.roc)?)?);
        written.push(write(dir, &format!("{stem}_pr.csv"), &curve_csv(&m.pr)?)?);
        written.push(write(dir, &format!("{stem}_calibration.csv"), &calibration_csv(&m.calibration.bins)?)?);
        written.push(write(dir, &format!("{stem}_dca.csv"), &dca_csv(&m.dca)?)?);
        written.push(write(
            dir,
            &format!("{stem}_roc.svg"),
            &svg::curve_svg(&m.roc, &format!("ROC - {}", m.name), m.prevalence, meta),
        )?);
        written.push(write(
            dir,
            &format!("{stem}_pr.svg"),
            &svg::curve_svg(&m.pr, &format!("Precision-recall - {}", m.name), m.prevalence, meta),
        )?);
        written.push(write(
            dir,
            &format!("{stem}_calibration.svg"),
            &svg::calibration_svg(&m.calibration.bins, &format!("Reliability - {}", m.name), meta),
        )?);
        written.push(write(
            dir,
            &format!("{stem}_dca.svg"),
            &svg::dca_svg(&m.dca, &format!("Decision curve - {}", m.name), meta),
        )?);
    }
    Ok(written)
}

/// Compute the summary and write every artifact to the output directory.
pub fn run_comparison(cfg: &RunConfig) -> Result<RunSummary> {
    let summary = compute_summary(cfg)?;
    write_outputs(&summary, &cfg.resolved_output_dir()).stage("write outputs")?;
    Ok(summary)
}

/// Two-model synthetic cohort used by the demo: 29 positives and 690
/// negatives, a strong scorer `cnn` (AUC 0.95) and a weak one `who_siri`
/// (AUC 0.70) on shared cases.
pub fn demo_cohort(seed: u64) -> Result<Cohort> {
    use crate::synth::{generate_binormal_models, BinormalModel};
    // Shift latent means down so negatives sit near probability 0.12.
    let shifted = |name: &str, auc: f64| {
        let mut m = BinormalModel::with_auc(name, auc);
        m.mu_pos -= 2.0;
        m.mu_neg -= 2.0;
        m
    };
    generate_binormal_models(29, 690, &[shifted("cnn", 0.95), shifted("who_siri", 0.70)], seed)
}

/// Write the demo cohort CSV and a matching config into `dir`.
pub fn write_demo(dir: &Path) -> Result<RunConfig> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cohort = demo_cohort(20_240_601)?;
    let input = dir.join("demo_cohort.csv");
    let file = fs::File::create(&input).map_err(|e| Error::io(&input, e))?;
    let mapping = crate::cohort::write_cohort(&cohort, file)?;
    let mut cfg = RunConfig::new("demo_cohort.csv", mapping);
    cfg.models = vec!["cnn".into(), "who_siri".into()];
    let text = toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?;
    let cfg_path = dir.join("run.toml");
    fs::write(&cfg_path, text).map_err(|e| Error::io(&cfg_path, e))?;
    cfg.input.path = input;
    Ok(cfg)
}
