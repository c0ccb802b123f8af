//! ROC and precision–recall curves.
//!
//! Both curves walk the cases in descending score order and emit one vertex
//! per distinct score, so tied scores move the curve diagonally instead of
//! through an arbitrary staircase. Each vertex keeps its cumulative TP/FP
//! counts; the ROC area is computed from those integers and therefore equals
//! the tie-corrected Mann–Whitney statistic exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Roc,
    Pr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
    /// Score cutoff producing this vertex; `None` for the ROC origin.
    pub threshold: Option<f64>,
    pub tp: u64,
    pub fp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub kind: CurveKind,
    pub points: Vec<CurvePoint>,
    pub area: f64,
}

/// Cumulative (threshold, tp, fp) after each distinct score, highest first.
fn cumulative(scores: &[f64], labels: &[bool]) -> Vec<(f64, u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out: Vec<(f64, u64, u64)> = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_group {
            out.push((scores[i], tp, fp));
        }
    }
    out
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if let Some(&bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::OutOfRange {
            what: "score",
            value: bad,
        });
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    Ok((pos, labels.len() as u64 - pos))
}

pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<CurveSeries> {
    let (p, n) = check(scores, labels)?;
    if p == 0 || n == 0 {
        return Err(Error::SingleClass);
    }
    let mut points = vec![CurvePoint {
        x: 0.0,
        y: 0.0,
        threshold: None,
        tp: 0,
        fp: 0,
    }];
    points.extend(cumulative(scores, labels).into_iter().map(|(t, tp, fp)| CurvePoint {
        x: fp as f64 / n as f64,
        y: tp as f64 / p as f64,
        threshold: Some(t),
        tp,
        fp,
    }));
    let mut curve = CurveSeries {
        kind: CurveKind::Roc,
        points,
        area: 0.0,
    };
    curve.area = auc(&curve);
    Ok(curve)
}

/// Area under a curve: trapezoids for ROC, the average-precision step sum
/// for PR.
pub fn auc(curve: &CurveSeries) -> f64 {
    match curve.kind {
        CurveKind::Roc => {
            let Some(last) = curve.points.last() else { return 0.0 };
            let (p, n) = (last.tp as u128, last.fp as u128);
            if p == 0 || n == 0 {
                return 0.0;
            }
            // Twice the trapezoid sum in count units: 2·concordant + ties.
            let twice: u128 = curve
                .points
                .windows(2)
                .map(|w| (w[1].fp - w[0].fp) as u128 * (w[1].tp + w[0].tp) as u128)
                .sum();
            twice as f64 / (2 * p * n) as f64
        }
        CurveKind::Pr => {
            // The lowest threshold flags every case, so the last point holds P.
            let Some(last) = curve.points.last() else { return 0.0 };
            let p = last.tp as f64;
            let mut prev_tp = 0;
            let mut area = 0.0;
            for pt in &curve.points {
                area += (pt.tp - prev_tp) as f64 / p * pt.y;
                prev_tp = pt.tp;
            }
            area
        }
    }
}

pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<CurveSeries> {
    let (p, _) = check(scores, labels)?;
    if p == 0 {
        return Err(Error::NoPositives);
    }
    let points = cumulative(scores, labels)
        .into_iter()
        .map(|(t, tp, fp)| CurvePoint {
            x: tp as f64 / p as f64,
            y: tp as f64 / (tp + fp) as f64,
            threshold: Some(t),
            tp,
            fp,
        })
        .collect();
    let mut curve = CurveSeries {
        kind: CurveKind::Pr,
        points,
        area: 0.0,
    };
    curve.area = auc(&curve);
    Ok(curve)
}

pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    roc_curve(scores, labels).map(|c| c.area)
}

pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    pr_curve(scores, labels).map(|c| c.area)
}
