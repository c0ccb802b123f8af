//! Python bindings for `dxeval`.
//!
//! Plain vectors in, dicts (or the `Cohort` / `LogisticFit` classes) out.
//! Structured results go through their serde form so field names match the
//! JSON written by the command-line tool.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use dxeval::baseline::{self, FitOptions, Predictor};
use dxeval::calibration::{self, Binning};
use dxeval::cohort::{self, ColumnMapping, Role};
use dxeval::dca::{self, DcaOptions, DecisionRule};
use dxeval::inference::{self, BootstrapConfig, CiMethod, DeLongMode};
use dxeval::report::{self, RunConfig};
use dxeval::synth;
use dxeval::{curves, thresholds, Error};

create_exception!(pydxeval, DxevalError, PyException);
create_exception!(pydxeval, DegenerateError, DxevalError);

fn err(e: Error) -> PyErr {
    match e.exit_code() {
        3 => DegenerateError::new_err(e.to_string()),
        _ => DxevalError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| DxevalError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn labels_from(labels: Vec<i64>) -> PyResult<Vec<bool>> {
    labels
        .into_iter()
        .map(|l| match l {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(PyValueError::new_err(format!("labels must be 0 or 1, got {other}"))),
        })
        .collect()
}

fn bootstrap_config(replicates: usize, seed: u64, method: &str, workers: Option<usize>) -> PyResult<BootstrapConfig> {
    Ok(BootstrapConfig {
        replicates,
        seed,
        method: CiMethod::parse(method).map_err(err)?,
        workers,
        ..BootstrapConfig::default()
    })
}

/// An immutable cohort of labelled cases.
#[pyclass(name = "Cohort", module = "pydxeval", frozen)]
struct PyCohort {
    inner: dxeval::Cohort,
}

#[pymethods]
impl PyCohort {
    /// Read a CSV. `columns` maps logical fields (label, scores, pct_normal,
    /// neutrophils, ...) to header names.
    #[staticmethod]
    #[pyo3(signature = (path, scores=Vec::new(), label="label", case_id="case_id", pct_normal=None, neutrophils=None, monocytes=None, lymphocytes=None, siri=None))]
    #[allow(clippy::too_many_arguments)]
    fn read_csv(
        path: PathBuf,
        scores: Vec<String>,
        label: &str,
        case_id: &str,
        pct_normal: Option<String>,
        neutrophils: Option<String>,
        monocytes: Option<String>,
        lymphocytes: Option<String>,
        siri: Option<String>,
    ) -> PyResult<Self> {
        let mapping = ColumnMapping {
            case_id: case_id.into(),
            label: label.into(),
            scores,
            pct_normal,
            neutrophils,
            monocytes,
            lymphocytes,
            siri,
        };
        let inner = cohort::parse_cohort(path, &mapping, Role::Evaluate).map_err(err)?;
        Ok(PyCohort { inner })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        let file = std::fs::File::create(&path).map_err(|e| err(Error::io(&path, e)))?;
        cohort::write_cohort(&self.inner, file).map_err(err)?;
        Ok(())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn case_ids(&self) -> Vec<String> {
        self.inner.cases().iter().map(|c| c.case_id.clone()).collect()
    }

    fn labels(&self) -> Vec<bool> {
        self.inner.cases().iter().map(|c| c.label).collect()
    }

    fn model_names(&self) -> Vec<String> {
        self.inner.model_names()
    }

    /// `(scores, labels)` for cases scored by `model`.
    fn scores(&self, model: &str) -> PyResult<(Vec<f64>, Vec<bool>)> {
        let s = self.inner.scored(model).map_err(err)?;
        Ok((s.scores, s.labels))
    }

    fn prevalence(&self) -> PyResult<f64> {
        cohort::prevalence(&self.inner).map_err(err)
    }

    /// Add a score column with the baseline's predicted probabilities.
    fn with_baseline_scores(&self, fit: &PyLogisticFit, name: &str) -> PyResult<Self> {
        let inner = self
            .inner
            .with_scores(name, |c| baseline::predict_proba(&fit.inner, c).map(Some))
            .map_err(err)?;
        Ok(PyCohort { inner })
    }

    fn __repr__(&self) -> String {
        format!("Cohort(n={}, models={:?})", self.inner.len(), self.inner.model_names())
    }
}

/// Fitted logistic baseline.
#[pyclass(name = "LogisticFit", module = "pydxeval", frozen)]
struct PyLogisticFit {
    inner: baseline::LogisticFit,
}

#[pymethods]
impl PyLogisticFit {
    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients.clone()
    }

    #[getter]
    fn std_errors(&self) -> Vec<f64> {
        self.inner.std_errors.clone()
    }

    #[getter]
    fn predictors(&self) -> Vec<String> {
        self.inner.predictors.iter().map(|p| p.name().to_string()).collect()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn deviance(&self) -> f64 {
        self.inner.final_deviance
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("LogisticFit(coefficients={:?})", self.inner.coefficients)
    }
}

#[pyfunction]
#[pyo3(signature = (train, predictors=vec!["pct_normal".to_string(), "siri".to_string()], ridge=0.0))]
fn fit_logistic(train: &PyCohort, predictors: Vec<String>, ridge: f64) -> PyResult<PyLogisticFit> {
    let preds = predictors
        .iter()
        .map(|p| Predictor::parse(p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let opts = FitOptions {
        ridge,
        ..FitOptions::default()
    };
    let inner = baseline::fit_logistic(&train.inner, &preds, &opts).map_err(err)?;
    Ok(PyLogisticFit { inner })
}

#[pyfunction]
fn compute_siri(neutrophils: f64, monocytes: f64, lymphocytes: f64) -> PyResult<f64> {
    let panel = dxeval::cohort::BloodPanel::new(neutrophils, monocytes, lymphocytes).map_err(err)?;
    baseline::compute_siri(&panel).map_err(err)
}

/// True when the sample is teratozoospermic under the strict 4% rule.
#[pyfunction]
fn who_strict_abnormal(pct_normal: f64) -> PyResult<bool> {
    Ok(baseline::who_strict_flag(pct_normal).map_err(err)? == baseline::WhoClass::Teratozoospermic)
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<i64>) -> PyResult<f64> {
    curves::roc_auc(&scores, &labels_from(labels)?).map_err(err)
}

#[pyfunction]
fn average_precision(scores: Vec<f64>, labels: Vec<i64>) -> PyResult<f64> {
    curves::average_precision(&scores, &labels_from(labels)?).map_err(err)
}

#[pyfunction]
fn roc_curve(py: Python<'_>, scores: Vec<f64>, labels: Vec<i64>) -> PyResult<Py<PyAny>> {
    to_py(py, &curves::roc_curve(&scores, &labels_from(labels)?).map_err(err)?)
}

#[pyfunction]
fn pr_curve(py: Python<'_>, scores: Vec<f64>, labels: Vec<i64>) -> PyResult<Py<PyAny>> {
    to_py(py, &curves::pr_curve(&scores, &labels_from(labels)?).map_err(err)?)
}

/// Metrics from raw counts: sensitivity, specificity, ppv, npv, f1,
/// accuracy, flagged_fraction. Undefined values are `None`.
#[pyfunction]
#[pyo3(name = "metrics_from", signature = (tp, fp, tn, fn_))]
fn metrics_from_counts(py: Python<'_>, tp: u64, fp: u64, tn: u64, fn_: u64) -> PyResult<Py<PyAny>> {
    let counts = thresholds::ConfusionCounts::new(tp, fp, tn, fn_, f64::NAN);
    to_py(py, &thresholds::metrics_from(&counts))
}

#[pyfunction]
fn confusion_at(py: Python<'_>, scores: Vec<f64>, labels: Vec<i64>, threshold: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &thresholds::confusion_at(&scores, &labels_from(labels)?, threshold).map_err(err)?)
}

#[pyfunction]
fn threshold_sweep(py: Python<'_>, scores: Vec<f64>, labels: Vec<i64>, grid: Vec<f64>) -> PyResult<Py<PyAny>> {
    to_py(py, &thresholds::threshold_sweep(&scores, &labels_from(labels)?, &grid).map_err(err)?)
}

/// Bootstrap interval for ROC-AUC.
#[pyfunction]
#[pyo3(signature = (scores, labels, replicates=1000, seed=42, method="bca", workers=None))]
fn bootstrap_auc(
    py: Python<'_>,
    scores: Vec<f64>,
    labels: Vec<i64>,
    replicates: usize,
    seed: u64,
    method: &str,
    workers: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let data: Vec<(f64, bool)> = scores.into_iter().zip(labels_from(labels)?).collect();
    let cfg = bootstrap_config(replicates, seed, method, workers)?.unit_interval();
    let ci = py
        .detach(|| {
            inference::bootstrap_ci(
                &data,
                |s: &[(f64, bool)]| {
                    let (x, y): (Vec<f64>, Vec<bool>) = s.iter().copied().unzip();
                    curves::roc_auc(&x, &y).ok()
                },
                &cfg,
            )
        })
        .map_err(err)?;
    to_py(py, &ci)
}

/// `(auc, variance)` from DeLong placements.
#[pyfunction]
fn delong_variance(scores: Vec<f64>, labels: Vec<i64>) -> PyResult<(f64, f64)> {
    inference::delong_variance(&scores, &labels_from(labels)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (scores, labels, confidence=0.95))]
fn delong_interval(py: Python<'_>, scores: Vec<f64>, labels: Vec<i64>, confidence: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &inference::delong_interval(&scores, &labels_from(labels)?, confidence).map_err(err)?)
}

/// DeLong test of AUC(a) against AUC(b). Paired mode requires identical
/// label vectors.
#[pyfunction]
fn delong_compare(
    py: Python<'_>,
    scores_a: Vec<f64>,
    labels_a: Vec<i64>,
    scores_b: Vec<f64>,
    labels_b: Vec<i64>,
    mode: &str,
) -> PyResult<Py<PyAny>> {
    let a = dxeval::Scored::new(scores_a, labels_from(labels_a)?).map_err(err)?;
    let b = dxeval::Scored::new(scores_b, labels_from(labels_b)?).map_err(err)?;
    let mode = DeLongMode::parse(mode).map_err(err)?;
    to_py(py, &inference::delong_compare(&a, &b, mode).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (scores, labels, n_bins=10, binning="equal_width"))]
fn reliability_curve(py: Python<'_>, scores: Vec<f64>, labels: Vec<i64>, n_bins: usize, binning: &str) -> PyResult<Py<PyAny>> {
    let binning = Binning::parse(binning).map_err(err)?;
    to_py(
        py,
        &calibration::reliability_curve(&scores, &labels_from(labels)?, binning, n_bins).map_err(err)?,
    )
}

#[pyfunction]
#[pyo3(signature = (scores, labels, n_bins=10, binning="equal_width"))]
fn expected_calibration_error(scores: Vec<f64>, labels: Vec<i64>, n_bins: usize, binning: &str) -> PyResult<f64> {
    let binning = Binning::parse(binning).map_err(err)?;
    let bins = calibration::reliability_curve(&scores, &labels_from(labels)?, binning, n_bins).map_err(err)?;
    calibration::expected_calibration_error(&bins).map_err(err)
}

#[pyfunction]
fn net_benefit(scores: Vec<f64>, labels: Vec<i64>, threshold: f64) -> PyResult<f64> {
    dca::net_benefit(&scores, &labels_from(labels)?, threshold).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (scores, labels, grid=None, fixed_cutoff=None, replicates=None, seed=42, method="percentile"))]
#[allow(clippy::too_many_arguments)]
fn dca_curve(
    py: Python<'_>,
    scores: Vec<f64>,
    labels: Vec<i64>,
    grid: Option<Vec<f64>>,
    fixed_cutoff: Option<f64>,
    replicates: Option<usize>,
    seed: u64,
    method: &str,
) -> PyResult<Py<PyAny>> {
    let opts = DcaOptions {
        rule: fixed_cutoff.map_or(DecisionRule::AtThreshold, DecisionRule::FixedCutoff),
        bootstrap: replicates
            .map(|r| bootstrap_config(r, seed, method, None))
            .transpose()?,
    };
    let grid = grid.unwrap_or_else(dca::default_dca_grid);
    let labels = labels_from(labels)?;
    let curve = py.detach(|| dca::dca_curve(&scores, &labels, &grid, &opts)).map_err(err)?;
    to_py(py, &curve)
}

#[pyfunction]
#[pyo3(signature = (n_pos, n_neg, mu_pos=1.0, mu_neg=0.0, sigma_pos=1.0, sigma_neg=1.0, seed=42))]
fn generate_binormal(
    n_pos: usize,
    n_neg: usize,
    mu_pos: f64,
    mu_neg: f64,
    sigma_pos: f64,
    sigma_neg: f64,
    seed: u64,
) -> PyResult<PyCohort> {
    let spec = synth::BinormalSpec {
        n_pos,
        n_neg,
        mu_pos,
        mu_neg,
        sigma_pos,
        sigma_neg,
        seed,
    };
    Ok(PyCohort {
        inner: synth::generate_binormal(&spec).map_err(err)?,
    })
}

/// Uniform scores on `[lo, hi]` with labels Bernoulli(score).
#[pyfunction]
#[pyo3(signature = (n, lo=0.0, hi=1.0, seed=42))]
fn generate_calibrated(n: usize, lo: f64, hi: f64, seed: u64) -> PyResult<PyCohort> {
    let spec = synth::CalibratedSpec {
        n,
        distribution: synth::ScoreDistribution::Uniform { lo, hi },
        seed,
    };
    Ok(PyCohort {
        inner: synth::generate_calibrated(&spec).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (n, betas=(-4.0, 0.5, -0.8), seed=42))]
fn generate_clinical(n: usize, betas: (f64, f64, f64), seed: u64) -> PyResult<PyCohort> {
    let spec = synth::ClinicalSpec {
        n,
        betas: [betas.0, betas.1, betas.2],
        features: synth::FeatureDistributions::default(),
        seed,
    };
    Ok(PyCohort {
        inner: synth::generate_clinical(&spec).map_err(err)?,
    })
}

/// Run a full report from a TOML config and return the summary as a dict.
#[pyfunction]
#[pyo3(signature = (config, output_dir=None))]
fn run_comparison(py: Python<'_>, config: PathBuf, output_dir: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let mut cfg = RunConfig::load(config).map_err(err)?;
    if output_dir.is_some() {
        cfg.output_dir = output_dir;
    }
    let summary = py.detach(|| report::run_comparison(&cfg)).map_err(err)?;
    to_py(py, &summary)
}

#[pymodule]
fn pydxeval(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DxevalError", m.py().get_type::<DxevalError>())?;
    m.add("DegenerateError", m.py().get_type::<DegenerateError>())?;
    m.add_class::<PyCohort>()?;
    m.add_class::<PyLogisticFit>()?;
    m.add_function(wrap_pyfunction!(fit_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(compute_siri, m)?)?;
    m.add_function(wrap_pyfunction!(who_strict_abnormal, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(roc_curve, m)?)?;
    m.add_function(wrap_pyfunction!(pr_curve, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_from_counts, m)?)?;
    m.add_function(wrap_pyfunction!(confusion_at, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap_auc, m)?)?;
    m.add_function(wrap_pyfunction!(delong_variance, m)?)?;
    m.add_function(wrap_pyfunction!(delong_interval, m)?)?;
    m.add_function(wrap_pyfunction!(delong_compare, m)?)?;
    m.add_function(wrap_pyfunction!(reliability_curve, m)?)?;
    m.add_function(wrap_pyfunction!(expected_calibration_error, m)?)?;
    m.add_function(wrap_pyfunction!(net_benefit, m)?)?;
    m.add_function(wrap_pyfunction!(dca_curve, m)?)?;
    m.add_function(wrap_pyfunction!(generate_binormal, m)?)?;
    m.add_function(wrap_pyfunction!(generate_calibrated, m)?)?;
    m.add_function(wrap_pyfunction!(generate_clinical, m)?)?;
    m.add_function(wrap_pyfunction!(run_comparison, m)?)?;
    Ok(())
}
