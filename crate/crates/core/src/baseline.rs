//! The clinical baseline: SIRI, the WHO strict-morphology rule and a
//! logistic model on percent-normal forms and SIRI.
//!
//! The logistic model is fit by iteratively reweighted least squares
//! (Newton–Raphson on the log-likelihood) on unstandardized predictors, so
//! each coefficient stays a per-unit log-odds change.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cohort::{BloodPanel, CaseRecord, Cohort};
use crate::error::{Error, Result};

/// Percent-normal cutoff of the WHO strict criteria, inclusive.
pub const WHO_NORMAL_CUTOFF_PCT: f64 = 4.0;

/// Systemic inflammation response index: neutrophils × monocytes / lymphocytes.
pub fn compute_siri(panel: &BloodPanel) -> Result<f64> {
    if panel.lymphocytes == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(panel.neutrophils * panel.monocytes / panel.lymphocytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhoClass {
    Normal,
    Teratozoospermic,
}

pub fn who_strict_flag(pct_normal: f64) -> Result<WhoClass> {
    if !(0.0..=100.0).contains(&pct_normal) {
        return Err(Error::OutOfRange {
            what: "pct_normal",
            value: pct_normal,
        });
    }
    Ok(if pct_normal >= WHO_NORMAL_CUTOFF_PCT {
        WhoClass::Normal
    } else {
        WhoClass::Teratozoospermic
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    PctNormal,
    Siri,
}

impl Predictor {
    pub fn name(self) -> &'static str {
        match self {
            Predictor::PctNormal => "pct_normal",
            Predictor::Siri => "siri",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pct_normal" => Ok(Predictor::PctNormal),
            "siri" => Ok(Predictor::Siri),
            other => Err(Error::Config(format!("unknown predictor `{other}`"))),
        }
    }

    /// The predictor's value for one case. SIRI falls back to the blood
    /// panel when not supplied directly.
    pub fn value(self, case: &CaseRecord) -> Result<f64> {
        let missing = || Error::MissingFeature {
            case_id: case.case_id.clone(),
            feature: self.name().to_string(),
        };
        match self {
            Predictor::PctNormal => case.pct_normal.ok_or_else(missing),
            Predictor::Siri => match (case.siri, &case.blood) {
                (Some(s), _) => Ok(s),
                (None, Some(panel)) => compute_siri(panel),
                (None, None) => Err(missing()),
            },
        }
    }
}

/// The WHO(+SIRI) predictor set.
pub const WHO_SIRI: [Predictor; 2] = [Predictor::PctNormal, Predictor::Siri];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Convergence threshold on the absolute change in deviance.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Any |β| above this is treated as divergence due to separation.
    pub divergence_bound: f64,
    /// L2 penalty on the non-intercept coefficients; 0 disables it.
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tolerance: 1e-8,
            max_iterations: 100,
            divergence_bound: 20.0,
            ridge: 0.0,
        }
    }
}

/// A fitted (or hand-specified) logistic model.
///
/// `coefficients[0]` is the intercept; `coefficients[i + 1]` belongs to
/// `predictors[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub predictors: Vec<Predictor>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_iterations: usize,
    pub converged: bool,
    pub final_deviance: f64,
    pub ridge: f64,
    pub n_cases: usize,
}

impl LogisticFit {
    /// A model with fixed coefficients and no fit diagnostics.
    pub fn from_coefficients(predictors: Vec<Predictor>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != predictors.len() + 1 {
            return Err(Error::LengthMismatch {
                left: coefficients.len(),
                right: predictors.len() + 1,
            });
        }
        Ok(LogisticFit {
            std_errors: vec![f64::NAN; coefficients.len()],
            predictors,
            coefficients,
            n_iterations: 0,
            converged: false,
            final_deviance: f64::NAN,
            ridge: 0.0,
            n_cases: 0,
        })
    }

    pub fn beta0(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn coefficient(&self, p: Predictor) -> Option<f64> {
        self.predictors
            .iter()
            .position(|&q| q == p)
            .map(|i| self.coefficients[i + 1])
    }

    pub fn linear_predictor(&self, features: &[f64]) -> f64 {
        self.coefficients[0]
            + self.coefficients[1..]
                .iter()
                .zip(features)
                .map(|(b, x)| b * x)
                .sum::<f64>()
    }
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Probability of the positive class for one case.
pub fn predict_proba(fit: &LogisticFit, case: &CaseRecord) -> Result<f64> {
    let features = fit
        .predictors
        .iter()
        .map(|p| p.value(case))
        .collect::<Result<Vec<_>>>()?;
    Ok(logistic(fit.linear_predictor(&features)))
}

/// Feature rows (without the intercept column) and labels.
pub fn design_rows(cohort: &Cohort, predictors: &[Predictor]) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    let mut rows = Vec::with_capacity(cohort.len());
    let mut labels = Vec::with_capacity(cohort.len());
    for case in cohort.cases() {
        rows.push(predictors.iter().map(|p| p.value(case)).collect::<Result<Vec<_>>>()?);
        labels.push(case.label);
    }
    Ok((rows, labels))
}

/// Log-likelihood of `coefficients` (intercept first) on the given rows.
pub fn log_likelihood(rows: &[Vec<f64>], labels: &[bool], coefficients: &[f64]) -> f64 {
    rows.iter()
        .zip(labels)
        .map(|(x, &y)| {
            let eta = eta(coefficients, x);
            if y {
                -softplus(-eta)
            } else {
                -softplus(eta)
            }
        })
        .sum()
}

/// Gradient of the (unpenalized) log-likelihood: Xᵀ(y − p).
pub fn score_vector(rows: &[Vec<f64>], labels: &[bool], coefficients: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; coefficients.len()];
    for (x, &y) in rows.iter().zip(labels) {
        let r = f64::from(u8::from(y)) - logistic(eta(coefficients, x));
        g[0] += r;
        for (gj, xj) in g[1..].iter_mut().zip(x) {
            *gj += r * xj;
        }
    }
    g
}

fn eta(coefficients: &[f64], x: &[f64]) -> f64 {
    coefficients[0]
        + coefficients[1..]
            .iter()
            .zip(x)
            .map(|(b, v)| b * v)
            .sum::<f64>()
}

/// Fit `logit P(label) = β0 + Σ βi·predictor_i` on a training cohort.
pub fn fit_logistic(train: &Cohort, predictors: &[Predictor], opts: &FitOptions) -> Result<LogisticFit> {
    let (rows, labels) = design_rows(train, predictors)?;
    let raw = fit_rows(&rows, &labels, opts)?;
    Ok(LogisticFit {
        predictors: predictors.to_vec(),
        coefficients: raw.coefficients,
        std_errors: raw.std_errors,
        n_iterations: raw.n_iterations,
        converged: raw.converged,
        final_deviance: raw.final_deviance,
        ridge: opts.ridge,
        n_cases: rows.len(),
    })
}

/// Result of a fit on a bare design.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_iterations: usize,
    pub converged: bool,
    pub final_deviance: f64,
}

/// IRLS on explicit feature rows; an intercept column is prepended.
// Negated comparisons below send NaN down the failure branch.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn fit_rows(rows: &[Vec<f64>], labels: &[bool], opts: &FitOptions) -> Result<RawFit> {
    if rows.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: labels.len(),
        });
    }
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len) + 1;
    if n == 0 {
        return Err(Error::EmptyCohort);
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::SingleClass);
    }
    if n <= k {
        return Err(Error::Singular);
    }

    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let y = DVector::from_iterator(n, labels.iter().map(|&l| f64::from(u8::from(l))));

    let gram = x.transpose() * &x;
    let sv = gram.clone().singular_values();
    let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
    if !(smin > smax * 1e-12) {
        return Err(Error::Singular);
    }

    let mut penalty = DMatrix::<f64>::identity(k, k) * opts.ridge;
    penalty[(0, 0)] = 0.0;

    let objective = |beta: &DVector<f64>| {
        let eta = &x * beta;
        let dev: f64 = eta
            .iter()
            .zip(y.iter())
            .map(|(&e, &yi)| 2.0 * if yi > 0.5 { softplus(-e) } else { softplus(e) })
            .sum();
        dev + opts.ridge * beta.rows(1, k - 1).norm_squared()
    };

    let mut beta = DVector::<f64>::zeros(k);
    let mut dev = objective(&beta);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let p = (&x * &beta).map(logistic);
        let w = p.map(|pi| pi * (1.0 - pi));
        let grad = x.transpose() * (&y - &p) - &penalty * &beta;
        let hessian = weighted_gram(&x, &w) + &penalty;
        let Some(chol) = hessian.cholesky() else {
            return Err(Error::Separation {
                max_abs_beta: beta.amax(),
            });
        };
        let step = chol.solve(&grad);

        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut cand_dev = objective(&candidate);
        while !(cand_dev <= dev + 1e-12 * dev.abs().max(1.0)) && scale > 1e-6 {
            scale *= 0.5;
            candidate = &beta + &step * scale;
            cand_dev = objective(&candidate);
        }

        let change = (dev - cand_dev).abs();
        beta = candidate;
        dev = cand_dev;
        if beta.amax() > opts.divergence_bound || !dev.is_finite() {
            return Err(Error::Separation {
                max_abs_beta: beta.amax(),
            });
        }
        if change < opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged { iterations });
    }

    let p = (&x * &beta).map(logistic);
    let w = p.map(|pi| pi * (1.0 - pi));
    let information = weighted_gram(&x, &w) + &penalty;
    let covariance = information
        .try_inverse()
        .ok_or(Error::Separation { max_abs_beta: beta.amax() })?;
    let std_errors: Vec<f64> = (0..k).map(|i| covariance[(i, i)].sqrt()).collect();
    if std_errors.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::Separation {
            max_abs_beta: beta.amax(),
        });
    }

    Ok(RawFit {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        n_iterations: iterations,
        converged,
        final_deviance: dev - opts.ridge * beta.rows(1, k - 1).norm_squared(),
    })
}

/// XᵀWX with W = diag(w).
fn weighted_gram(x: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut xw = x.clone();
    for (mut row, &wi) in xw.row_iter_mut().zip(w.iter()) {
        row *= wi;
    }
    x.transpose() * xw
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::Role;
    use approx::assert_abs_diff_eq;

    #[test]
    fn siri_examples() {
        assert_eq!(compute_siri(&BloodPanel::new(2.0, 0.5, 1.0).unwrap()).unwrap(), 1.0);
        assert_abs_diff_eq!(compute_siri(&BloodPanel::new(4.2, 0.6, 1.8).unwrap()).unwrap(), 1.4, epsilon = 1e-12);
        assert!(matches!(
            compute_siri(&BloodPanel::new(3.0, 0.4, 0.0).unwrap()),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn who_boundary_is_inclusive() {
        assert_eq!(who_strict_flag(4.0).unwrap(), WhoClass::Normal);
        assert_eq!(who_strict_flag(3.9).unwrap(), WhoClass::Teratozoospermic);
        assert_eq!(who_strict_flag(0.0).unwrap(), WhoClass::Teratozoospermic);
        assert_eq!(who_strict_flag(100.0).unwrap(), WhoClass::Normal);
        assert!(matches!(who_strict_flag(-0.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(who_strict_flag(100.5), Err(Error::OutOfRange { .. })));
    }

    fn case(pct: f64, siri: f64) -> CaseRecord {
        CaseRecord::new("x", false).with_pct_normal(pct).with_siri(siri)
    }

    #[test]
    fn predict_examples() {
        let fit = LogisticFit::from_coefficients(WHO_SIRI.to_vec(), vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(predict_proba(&fit, &case(37.0, 2.5)).unwrap(), 0.5);

        let fit = LogisticFit::from_coefficients(WHO_SIRI.to_vec(), vec![-2.1972, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(predict_proba(&fit, &case(1.0, 1.0)).unwrap(), 0.1, epsilon = 1e-5);

        let fit = LogisticFit::from_coefficients(WHO_SIRI.to_vec(), vec![0.0, 0.1, -0.5]).unwrap();
        assert_abs_diff_eq!(predict_proba(&fit, &case(10.0, 2.0)).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn siri_falls_back_to_blood_panel() {
        let fit = LogisticFit::from_coefficients(vec![Predictor::Siri], vec![0.0, 1.0]).unwrap();
        let c = CaseRecord::new("x", true).with_blood(BloodPanel::new(2.0, 0.5, 1.0).unwrap());
        assert_abs_diff_eq!(predict_proba(&fit, &c).unwrap(), logistic(1.0), epsilon = 1e-15);
        let bare = CaseRecord::new("y", true);
        match predict_proba(&fit, &bare) {
            Err(Error::MissingFeature { case_id, feature }) => {
                assert_eq!(case_id, "y");
                assert_eq!(feature, "siri");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn monotone_in_predictors() {
        let fit = LogisticFit::from_coefficients(WHO_SIRI.to_vec(), vec![-3.0, 0.4, -0.7]).unwrap();
        let mut last = 0.0;
        for pct in 0..=20 {
            let p = predict_proba(&fit, &case(pct as f64, 1.0)).unwrap();
            assert!(p > last);
            last = p;
        }
        let mut last = 1.0;
        for s in 0..=20 {
            let p = predict_proba(&fit, &case(5.0, s as f64 * 0.25)).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn intercept_only_matches_log_odds() {
        let labels: Vec<bool> = (0..40).map(|i| i < 7).collect();
        let rows = vec![Vec::new(); labels.len()];
        let fit = fit_rows(&rows, &labels, &FitOptions::default()).unwrap();
        let p: f64 = 7.0 / 40.0;
        assert_abs_diff_eq!(fit.coefficients[0], (p / (1.0 - p)).ln(), epsilon = 1e-8);
        assert!(fit.converged);
    }

    #[test]
    fn binary_predictor_matches_log_odds_ratio() {
        // 2x2 table: exposed (x=1) a positives, b negatives; unexposed c positives, d negatives.
        let (a, b, c, d) = (12usize, 5usize, 9usize, 30usize);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (x, pos, neg) in [(1.0, a, b), (0.0, c, d)] {
            for _ in 0..pos {
                rows.push(vec![x]);
                labels.push(true);
            }
            for _ in 0..neg {
                rows.push(vec![x]);
                labels.push(false);
            }
        }
        let fit = fit_rows(&rows, &labels, &FitOptions::default()).unwrap();
        let odds_ratio = (a * d) as f64 / (b * c) as f64;
        assert_abs_diff_eq!(fit.coefficients[1], odds_ratio.ln(), epsilon = 1e-7);
        assert_abs_diff_eq!(fit.coefficients[0], (c as f64 / d as f64).ln(), epsilon = 1e-7);
        // Woolf standard error of the log odds ratio.
        let woolf = (1.0 / a as f64 + 1.0 / b as f64 + 1.0 / c as f64 + 1.0 / d as f64).sqrt();
        assert_abs_diff_eq!(fit.std_errors[1], woolf, epsilon = 1e-6);
    }

    #[test]
    fn separated_data_is_reported() {
        let mut cases = Vec::new();
        for i in 0..10 {
            cases.push(
                CaseRecord::new(format!("p{i}"), true)
                    .with_pct_normal(6.0 + i as f64)
                    .with_siri(1.0 + 0.1 * i as f64),
            );
            cases.push(
                CaseRecord::new(format!("n{i}"), false)
                    .with_pct_normal(0.2 * i as f64)
                    .with_siri(1.5 - 0.05 * i as f64),
            );
        }
        let cohort = Cohort::new(cases, Role::Train).unwrap();
        assert!(matches!(
            fit_logistic(&cohort, &WHO_SIRI, &FitOptions::default()),
            Err(Error::Separation { .. })
        ));
        let ridge = FitOptions {
            ridge: 1.0,
            ..FitOptions::default()
        };
        let fit = fit_logistic(&cohort, &WHO_SIRI, &ridge).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficient(Predictor::PctNormal).unwrap() > 0.0);
    }

    #[test]
    fn rank_deficient_design() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let labels: Vec<bool> = (0..10).map(|i| i % 3 == 0).collect();
        assert!(matches!(fit_rows(&rows, &labels, &FitOptions::default()), Err(Error::Singular)));
        let constant: Vec<Vec<f64>> = (0..10).map(|_| vec![3.0]).collect();
        assert!(matches!(fit_rows(&constant, &labels, &FitOptions::default()), Err(Error::Singular)));
    }

    #[test]
    fn preconditions() {
        let rows = vec![vec![1.0]; 5];
        assert!(matches!(fit_rows(&rows, &[true; 5], &FitOptions::default()), Err(Error::SingleClass)));
        let rows = vec![vec![1.0], vec![2.0]];
        assert!(matches!(fit_rows(&rows, &[true, false], &FitOptions::default()), Err(Error::Singular)));
        let cohort = Cohort::new(
            vec![CaseRecord::new("a", true).with_pct_normal(3.0), CaseRecord::new("b", false)],
            Role::Train,
        )
        .unwrap();
        assert!(matches!(
            fit_logistic(&cohort, &[Predictor::PctNormal], &FitOptions::default()),
            Err(Error::MissingFeature { .. })
        ));
    }

    #[test]
    fn iteration_cap() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0]).collect();
        let labels: Vec<bool> = (0..30).map(|i| (i * 7) % 5 < 2).collect();
        let opts = FitOptions {
            max_iterations: 1,
            ..FitOptions::default()
        };
        assert!(matches!(fit_rows(&rows, &labels, &opts), Err(Error::NotConverged { iterations: 1 })));
    }

    #[test]
    fn refit_is_bit_identical() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 13) as f64, (i % 7) as f64 * 0.3]).collect();
        let labels: Vec<bool> = (0..60).map(|i| (i * 11) % 9 < 3 + (i % 13) / 5).collect();
        let a = fit_rows(&rows, &labels, &FitOptions::default()).unwrap();
        let b = fit_rows(&rows, &labels, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
