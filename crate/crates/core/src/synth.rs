//! Synthetic cohorts with known ground truth.
//!
//! Each generator reads a single sequential stream, `substream(seed, 0)`,
//! so the same spec and seed always produce the same cohort.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::baseline::{compute_siri, logistic};
use crate::cohort::{BloodPanel, CaseRecord, Cohort, Role};
use crate::error::{Error, Result};
use crate::rng::substream;

fn case_id(i: usize) -> String {
    format!("case-{i:06}")
}

/// Latent score of one model, normal within each class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinormalModel {
    pub name: String,
    pub mu_pos: f64,
    pub mu_neg: f64,
    pub sigma_pos: f64,
    pub sigma_neg: f64,
}

impl BinormalModel {
    /// Unit-variance model whose population AUC is `auc`.
    pub fn with_auc(name: impl Into<String>, auc: f64) -> Self {
        let shift = Normal::standard().inverse_cdf(auc) * std::f64::consts::SQRT_2;
        BinormalModel {
            name: name.into(),
            mu_pos: shift,
            mu_neg: 0.0,
            sigma_pos: 1.0,
            sigma_neg: 1.0,
        }
    }

    pub fn true_auc(&self) -> f64 {
        let d = (self.mu_pos - self.mu_neg) / (self.sigma_pos.powi(2) + self.sigma_neg.powi(2)).sqrt();
        Normal::standard().cdf(d)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma_pos > 0.0 && self.sigma_neg > 0.0) {
            return Err(Error::InvalidSpec(format!("model `{}` needs positive sigmas", self.name)));
        }
        if !(self.mu_pos.is_finite() && self.mu_neg.is_finite()) {
            return Err(Error::InvalidSpec(format!("model `{}` has non-finite means", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinormalSpec {
    pub n_pos: usize,
    pub n_neg: usize,
    pub mu_pos: f64,
    pub mu_neg: f64,
    pub sigma_pos: f64,
    pub sigma_neg: f64,
    pub seed: u64,
}

impl BinormalSpec {
    pub fn model(&self, name: &str) -> BinormalModel {
        BinormalModel {
            name: name.to_string(),
            mu_pos: self.mu_pos,
            mu_neg: self.mu_neg,
            sigma_pos: self.sigma_pos,
            sigma_neg: self.sigma_neg,
        }
    }

    pub fn true_auc(&self) -> f64 {
        self.model("score").true_auc()
    }
}

fn check_counts(n_pos: usize, n_neg: usize) -> Result<()> {
    if n_pos < 2 || n_neg < 2 {
        return Err(Error::InvalidSpec(format!(
            "need at least two cases per class, got {n_pos} positive / {n_neg} negative"
        )));
    }
    Ok(())
}

/// Latent scores (before the logistic map) for several models on shared
/// labels. Positives come first. Models are conditionally independent given
/// the label.
pub fn binormal_latent(n_pos: usize, n_neg: usize, models: &[BinormalModel], seed: u64) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    check_counts(n_pos, n_neg)?;
    if models.is_empty() {
        return Err(Error::InvalidSpec("no models".into()));
    }
    for m in models {
        m.validate()?;
    }
    let mut rng = substream(seed, 0);
    let n = n_pos + n_neg;
    let labels: Vec<bool> = (0..n).map(|i| i < n_pos).collect();
    let mut latent = vec![Vec::with_capacity(models.len()); n];
    for (i, row) in latent.iter_mut().enumerate() {
        for m in models {
            let z: f64 = StandardNormal.sample(&mut rng);
            row.push(if labels[i] { m.mu_pos + m.sigma_pos * z } else { m.mu_neg + m.sigma_neg * z });
        }
    }
    Ok((latent, labels))
}

/// Cohort with one score column per model, each the logistic image of its
/// latent draw.
pub fn generate_binormal_models(n_pos: usize, n_neg: usize, models: &[BinormalModel], seed: u64) -> Result<Cohort> {
    let (latent, labels) = binormal_latent(n_pos, n_neg, models, seed)?;
    let cases = latent
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (row, label))| {
            let mut c = CaseRecord::new(case_id(i), label);
            for (m, z) in models.iter().zip(row) {
                c.scores.insert(m.name.clone(), logistic(z));
            }
            c
        })
        .collect();
    Cohort::new(cases, Role::Evaluate)
}

/// Single-model binormal cohort; the score column is named `score`.
pub fn generate_binormal(spec: &BinormalSpec) -> Result<Cohort> {
    generate_binormal_models(spec.n_pos, spec.n_neg, &[spec.model("score")], spec.seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScoreDistribution {
    Uniform { lo: f64, hi: f64 },
    Constant { value: f64 },
    Beta { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedSpec {
    pub n: usize,
    pub distribution: ScoreDistribution,
    pub seed: u64,
}

/// Scores from the stated distribution, labels Bernoulli(score).
pub fn generate_calibrated(spec: &CalibratedSpec) -> Result<Cohort> {
    if spec.n == 0 {
        return Err(Error::InvalidSpec("n must be at least 1".into()));
    }
    let mut rng = substream(spec.seed, 0);
    let beta = match spec.distribution {
        ScoreDistribution::Uniform { lo, hi } if !(0.0 <= lo && lo <= hi && hi <= 1.0) => {
            return Err(Error::InvalidSpec(format!("uniform bounds [{lo}, {hi}] not within [0, 1]")))
        }
        ScoreDistribution::Constant { value } if !(0.0..=1.0).contains(&value) => {
            return Err(Error::InvalidSpec(format!("constant score {value} outside [0, 1]")))
        }
        ScoreDistribution::Beta { alpha, beta } => {
            Some(Beta::new(alpha, beta).map_err(|e| Error::InvalidSpec(e.to_string()))?)
        }
        _ => None,
    };
    let cases = (0..spec.n)
        .map(|i| {
            let score = match spec.distribution {
                ScoreDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
                ScoreDistribution::Constant { value } => value,
                ScoreDistribution::Beta { .. } => beta.as_ref().expect("built above").sample(&mut rng),
            };
            let label = rng.random::<f64>() < score;
            CaseRecord::new(case_id(i), label).with_score("score", score)
        })
        .collect();
    Cohort::new(cases, Role::Evaluate)
}

/// Half-open uniform range `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureDistributions {
    pub pct_normal: Range,
    pub neutrophils: Range,
    pub monocytes: Range,
    pub lymphocytes: Range,
}

impl Default for FeatureDistributions {
    fn default() -> Self {
        FeatureDistributions {
            pct_normal: Range::new(0.0, 15.0),
            neutrophils: Range::new(2.0, 7.0),
            monocytes: Range::new(0.2, 1.0),
            lymphocytes: Range::new(1.0, 3.0),
        }
    }
}

impl FeatureDistributions {
    fn validate(&self) -> Result<()> {
        let checks = [
            ("pct_normal", self.pct_normal, 0.0, 100.0),
            ("neutrophils", self.neutrophils, 0.0, f64::INFINITY),
            ("monocytes", self.monocytes, 0.0, f64::INFINITY),
            ("lymphocytes", self.lymphocytes, f64::MIN_POSITIVE, f64::INFINITY),
        ];
        for (name, r, min, max) in checks {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi && r.lo >= min && r.hi <= max) {
                return Err(Error::InvalidSpec(format!("{name} range [{}, {}] is invalid", r.lo, r.hi)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalSpec {
    pub n: usize,
    /// Intercept, percent-normal and SIRI coefficients.
    pub betas: [f64; 3],
    pub features: FeatureDistributions,
    pub seed: u64,
}

/// Independent uniform features, SIRI from the drawn panel, and labels
/// Bernoulli(logistic(β0 + β1·pct_normal + β2·SIRI)).
pub fn generate_clinical(spec: &ClinicalSpec) -> Result<Cohort> {
    if spec.n == 0 {
        return Err(Error::InvalidSpec("n must be at least 1".into()));
    }
    spec.features.validate()?;
    let mut rng = substream(spec.seed, 0);
    let f = &spec.features;
    let [b0, b1, b2] = spec.betas;
    let mut cases = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let pct = f.pct_normal.sample(&mut rng);
        let panel = BloodPanel::new(
            f.neutrophils.sample(&mut rng),
            f.monocytes.sample(&mut rng),
            f.lymphocytes.sample(&mut rng),
        )?;
        let siri = compute_siri(&panel)?;
        let p = logistic(b0 + b1 * pct + b2 * siri);
        let label = rng.random::<f64>() < p;
        cases.push(CaseRecord::new(case_id(i), label).with_pct_normal(pct).with_blood(panel));
    }
    Cohort::new(cases, Role::Evaluate)
}
