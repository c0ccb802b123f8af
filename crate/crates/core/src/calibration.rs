//! Reliability curves and expected calibration error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    #[default]
    #[serde(alias = "equal")]
    EqualWidth,
    Quantile,
}

impl Binning {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "equal" | "equal_width" => Ok(Binning::EqualWidth),
            "quantile" => Ok(Binning::Quantile),
            other => Err(Error::Config(format!("unknown binning `{other}`"))),
        }
    }
}

/// One bin `[lo, hi)`; the last bin is closed at its upper edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// `None` for an empty bin.
    pub mean_predicted: Option<f64>,
    pub observed_frequency: Option<f64>,
}

fn bin_edges(scores: &[f64], binning: Binning, n_bins: usize) -> Vec<f64> {
    match binning {
        Binning::EqualWidth => (0..=n_bins).map(|i| i as f64 / n_bins as f64).collect(),
        Binning::Quantile => {
            let mut sorted = scores.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mut edges = vec![0.0];
            for k in 1..n_bins {
                let q = crate::inference::quantile_sorted(&sorted, k as f64 / n_bins as f64);
                if q > *edges.last().unwrap() && q < 1.0 {
                    edges.push(q);
                }
            }
            edges.push(1.0);
            edges
        }
    }
}

pub fn reliability_curve(scores: &[f64], labels: &[bool], binning: Binning, n_bins: usize) -> Result<Vec<ReliabilityBin>> {
    if n_bins < 2 {
        return Err(Error::InvalidBinCount(n_bins));
    }
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyCohort);
    }
    if let Some(&bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::OutOfRange {
            what: "score",
            value: bad,
        });
    }

    let edges = bin_edges(scores, binning, n_bins);
    let k = edges.len() - 1;
    let mut n = vec![0usize; k];
    let mut sum_pred = vec![0.0; k];
    let mut sum_pos = vec![0usize; k];
    for (&s, &y) in scores.iter().zip(labels) {
        // Index of the last edge <= s, capped so 1.0 lands in the final bin.
        let idx = (edges.partition_point(|&e| e <= s) - 1).min(k - 1);
        n[idx] += 1;
        sum_pred[idx] += s;
        sum_pos[idx] += usize::from(y);
    }
    Ok((0..k)
        .map(|i| ReliabilityBin {
            lo: edges[i],
            hi: edges[i + 1],
            n: n[i],
            mean_predicted: (n[i] > 0).then(|| sum_pred[i] / n[i] as f64),
            observed_frequency: (n[i] > 0).then(|| sum_pos[i] as f64 / n[i] as f64),
        })
        .collect())
}

/// Σ (n_b / N)·|observed_b − mean_predicted_b| over non-empty bins.
pub fn expected_calibration_error(bins: &[ReliabilityBin]) -> Result<f64> {
    let total: usize = bins.iter().map(|b| b.n).sum();
    if total == 0 {
        return Err(Error::AllBinsEmpty);
    }
    Ok(bins
        .iter()
        .filter_map(|b| match (b.observed_frequency, b.mean_predicted) {
            (Some(o), Some(m)) if b.n > 0 => Some(b.n as f64 / total as f64 * (o - m).abs()),
            _ => None,
        })
        .sum())
}
