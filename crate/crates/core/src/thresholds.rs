//! Confusion counts and threshold-dependent metrics.
//!
//! A case is called positive when `score >= threshold`, so a threshold of
//! zero flags every case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub threshold: f64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64, threshold: f64) -> Self {
        ConfusionCounts {
            tp,
            fp,
            tn,
            fn_,
            threshold,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.tn + self.fp
    }
}

/// Threshold-dependent metrics. `None` marks a 0/0 ratio; it is rendered
/// as "--" and never silently becomes zero or NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub flagged_fraction: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics_from(c: &ConfusionCounts) -> MetricBundle {
    let n = c.total();
    MetricBundle {
        sensitivity: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
        ppv: ratio(c.tp, c.tp + c.fp),
        npv: ratio(c.tn, c.tn + c.fn_),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        accuracy: ratio(c.tp + c.tn, n),
        flagged_fraction: ratio(c.tp + c.fp, n),
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidThreshold(t));
    }
    Ok(())
}

fn check_aligned(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyCohort);
    }
    Ok(())
}

pub fn confusion_at(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionCounts> {
    check_aligned(scores, labels)?;
    check_threshold(threshold)?;
    let mut c = ConfusionCounts::new(0, 0, 0, 0, threshold);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub metrics: MetricBundle,
}

/// Confusion counts and metrics at each grid threshold, in grid order.
pub fn threshold_sweep(scores: &[f64], labels: &[bool], grid: &[f64]) -> Result<Vec<SweepRow>> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    for &t in grid {
        check_threshold(t)?;
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidGrid("thresholds must be sorted ascending".into()));
    }
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    check_aligned(scores, labels)?;

    let mut pos: Vec<f64> = Vec::new();
    let mut neg: Vec<f64> = Vec::new();
    for (&s, &y) in scores.iter().zip(labels) {
        if y {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let at_or_above = |v: &[f64], t: f64| (v.len() - v.partition_point(|&s| s < t)) as u64;

    Ok(grid
        .iter()
        .map(|&t| {
            let tp = at_or_above(&pos, t);
            let fp = at_or_above(&neg, t);
            let counts = ConfusionCounts::new(tp, fp, neg.len() as u64 - fp, pos.len() as u64 - tp, t);
            SweepRow {
                threshold: t,
                counts,
                metrics: metrics_from(&counts),
            }
        })
        .collect())
}

/// Row with the highest defined F1; ties go to the larger threshold.
pub fn best_f1_operating_point(sweep: &[SweepRow]) -> Result<&SweepRow> {
    let mut best: Option<(&SweepRow, f64)> = None;
    for row in sweep {
        let Some(f1) = row.metrics.f1 else { continue };
        match best {
            Some((b, bf)) if f1 < bf || (f1 == bf && row.threshold < b.threshold) => {}
            _ => best = Some((row, f1)),
        }
    }
    best.map(|(r, _)| r).ok_or(Error::AllUndefined)
}

/// Threshold grid from `start:stop:step` (inclusive of `stop` when it falls
/// on the lattice) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::InvalidGrid(format!("`{spec}`: {msg}"));
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad("not a number"))
    };
    if spec.trim().is_empty() {
        return Ok(Vec::new());
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(bad("expected start:stop:step"));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step <= 0.0 || stop < start {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=count).map(|i| round_to_lattice(start + i as f64 * step)).collect())
    } else {
        spec.split(',').map(num).collect()
    }
}

/// Snap lattice arithmetic (0.30000000000000004) back to its decimal value.
pub fn round_to_lattice(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// 0.0, 0.1, …, 0.5.
pub fn default_sweep_grid() -> Vec<f64> {
    (0..=5).map(|i| round_to_lattice(i as f64 * 0.1)).collect()
}
