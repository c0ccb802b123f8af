//! Number formatting for rendered tables.
//!
//! AUCs and specificity/PPV/NPV carry three decimals, sensitivity and F1
//! two, flagged share one decimal as a percentage. Undefined values print
//! as `--`.

use crate::inference::IntervalEstimate;

pub const UNDEFINED: &str = "--";

fn fixed(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.decimals$}"),
        _ => UNDEFINED.to_string(),
    }
}

pub fn auc(v: f64) -> String {
    fixed(Some(v), 3)
}

pub fn rate(v: Option<f64>) -> String {
    fixed(v, 3)
}

pub fn sensitivity(v: Option<f64>) -> String {
    fixed(v, 2)
}

pub fn f1(v: Option<f64>) -> String {
    fixed(v, 2)
}

/// Fraction rendered as a percentage with one decimal, e.g. `1.9%`.
pub fn flagged_pct(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{:.1}%", x * 100.0),
        _ => UNDEFINED.to_string(),
    }
}

pub fn interval(ci: &IntervalEstimate) -> String {
    format!("[{}, {}]", auc(ci.lo), auc(ci.hi))
}

pub fn auc_with_ci(ci: &IntervalEstimate) -> String {
    format!("{} {}", auc(ci.point), interval(ci))
}

pub fn p_value(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

/// Thresholds keep at least one decimal: `0.0`, `0.1`, `0.05`.
pub fn threshold(t: f64) -> String {
    let s = format!("{}", crate::thresholds::round_to_lattice(t));
    if s.contains('.') {
        s
    } else {
        format!("{t:.1}")
    }
}

/// Full-precision cell for machine-readable CSV; empty when undefined.
pub fn raw(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
