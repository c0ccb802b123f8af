//! Decision curve analysis.
//!
//! Net benefit at threshold probability `t` weighs false positives by the
//! threshold odds: NB(t) = TP/N − (FP/N)·t/(1−t).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{interval_from_replicates, jackknife, replicate, BootstrapConfig, CiMethod};
use crate::thresholds::round_to_lattice;

/// How the model turns a score into a decision at threshold probability `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "cutoff")]
pub enum DecisionRule {
    /// Treat when `score >= t`.
    #[default]
    AtThreshold,
    /// Treat when `score >= cutoff`, whatever `t` is.
    FixedCutoff(f64),
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::ThresholdOutOfRange(t));
    }
    Ok(())
}

fn odds(t: f64) -> f64 {
    t / (1.0 - t)
}

/// Net benefit from raw counts.
pub fn net_benefit_from_counts(tp: u64, fp: u64, n: u64, t: f64) -> f64 {
    tp as f64 / n as f64 - fp as f64 / n as f64 * odds(t)
}

/// Net benefit of treating cases with `score >= t`.
pub fn net_benefit(scores: &[f64], labels: &[bool], t: f64) -> Result<f64> {
    check_t(t)?;
    let sorted = SortedScores::new(scores, labels)?;
    Ok(sorted.net_benefit(t, DecisionRule::AtThreshold))
}

/// Treat-all net benefit for prevalence π: π − (1−π)·t/(1−t).
pub fn treat_all_net_benefit(prevalence: f64, t: f64) -> f64 {
    prevalence - (1.0 - prevalence) * odds(t)
}

struct SortedScores {
    pos: Vec<f64>,
    neg: Vec<f64>,
}

impl SortedScores {
    fn new(scores: &[f64], labels: &[bool]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: labels.len(),
            });
        }
        if scores.is_empty() {
            return Err(Error::EmptyCohort);
        }
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (&s, &y) in scores.iter().zip(labels) {
            if y {
                pos.push(s);
            } else {
                neg.push(s);
            }
        }
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        Ok(SortedScores { pos, neg })
    }

    fn from_pairs(pairs: &[(f64, bool)]) -> Self {
        let mut pos: Vec<f64> = pairs.iter().filter(|p| p.1).map(|p| p.0).collect();
        let mut neg: Vec<f64> = pairs.iter().filter(|p| !p.1).map(|p| p.0).collect();
        pos.sort_by(f64::total_cmp);
        neg.sort_by(f64::total_cmp);
        SortedScores { pos, neg }
    }

    fn n(&self) -> u64 {
        (self.pos.len() + self.neg.len()) as u64
    }

    fn prevalence(&self) -> f64 {
        self.pos.len() as f64 / self.n() as f64
    }

    fn net_benefit(&self, t: f64, rule: DecisionRule) -> f64 {
        let cutoff = match rule {
            DecisionRule::AtThreshold => t,
            DecisionRule::FixedCutoff(c) => c,
        };
        let above = |v: &[f64]| (v.len() - v.partition_point(|&s| s < cutoff)) as u64;
        net_benefit_from_counts(above(&self.pos), above(&self.neg), self.n(), t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetBenefitCurve {
    pub thresholds: Vec<f64>,
    pub model_nb: Vec<f64>,
    pub treat_all_nb: Vec<f64>,
    pub treat_none_nb: Vec<f64>,
    pub prevalence: f64,
    pub rule: DecisionRule,
    pub bands: Option<Vec<Band>>,
    pub band_replicates: Option<usize>,
    pub band_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcaOptions {
    pub rule: DecisionRule,
    /// Bootstrap bands; `None` skips them.
    pub bootstrap: Option<BootstrapConfig>,
}

impl Default for DcaOptions {
    fn default() -> Self {
        DcaOptions {
            rule: DecisionRule::AtThreshold,
            bootstrap: None,
        }
    }
}

/// Default decision-curve grid: 0.01, 0.02, …, 0.50.
pub fn default_dca_grid() -> Vec<f64> {
    (1..=50).map(|i| round_to_lattice(i as f64 * 0.01)).collect()
}

pub fn dca_curve(scores: &[f64], labels: &[bool], grid: &[f64], opts: &DcaOptions) -> Result<NetBenefitCurve> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid("empty decision-curve grid".into()));
    }
    for &t in grid {
        check_t(t)?;
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid("thresholds must be strictly increasing".into()));
    }
    if let DecisionRule::FixedCutoff(c) = opts.rule {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidThreshold(c));
        }
    }
    let sorted = SortedScores::new(scores, labels)?;
    let prevalence = sorted.prevalence();
    let model_nb: Vec<f64> = grid.iter().map(|&t| sorted.net_benefit(t, opts.rule)).collect();
    let treat_all_nb: Vec<f64> = grid.iter().map(|&t| treat_all_net_benefit(prevalence, t)).collect();

    let mut curve = NetBenefitCurve {
        thresholds: grid.to_vec(),
        model_nb,
        treat_all_nb,
        treat_none_nb: vec![0.0; grid.len()],
        prevalence,
        rule: opts.rule,
        bands: None,
        band_replicates: None,
        band_seed: None,
    };

    if let Some(cfg) = &opts.bootstrap {
        if cfg.replicates < crate::inference::MIN_REPLICATES {
            return Err(Error::InvalidReplicateCount(cfg.replicates));
        }
        let pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
        let rule = opts.rule;
        let stat = |sample: &[(f64, bool)]| {
            let s = SortedScores::from_pairs(sample);
            Some(grid.iter().map(|&t| s.net_benefit(t, rule)).collect::<Vec<f64>>())
        };
        let reps = replicate(&pairs, &stat, cfg.replicates, cfg.seed, cfg.workers)?;
        let jack: Option<Vec<Vec<f64>>> = (cfg.method == CiMethod::Bca).then(|| {
            (0..grid.len())
                .map(|j| jackknife(&pairs, &|s: &[(f64, bool)]| stat(s).map(|v| v[j])))
                .collect()
        });
        let bands = (0..grid.len())
            .map(|j| {
                let column: Vec<f64> = reps.values.iter().map(|v| v[j]).collect();
                let ci = interval_from_replicates(
                    curve.model_nb[j],
                    &column,
                    jack.as_ref().map(|jk| jk[j].as_slice()),
                    cfg,
                    reps.redraws,
                );
                Band { lo: ci.lo, hi: ci.hi }
            })
            .collect();
        curve.bands = Some(bands);
        curve.band_replicates = Some(cfg.replicates);
        curve.band_seed = Some(cfg.seed);
    }
    Ok(curve)
}
