//! Uncertainty for every reported estimate: case-level bootstrap intervals
//! (percentile and BCa) and DeLong's structural-component variance for AUC.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::cohort::Scored;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Minimum replicate count accepted by the bootstrap.
pub const MIN_REPLICATES: usize = 100;
/// Total attempts allowed per requested replicate before giving up.
pub const RETRY_FACTOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Percentile,
    #[default]
    Bca,
}

impl CiMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "percentile" => Ok(CiMethod::Percentile),
            "bca" => Ok(CiMethod::Bca),
            other => Err(Error::Config(format!("unknown interval method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalMethod {
    Percentile,
    Bca,
    Delong,
}

impl From<CiMethod> for IntervalMethod {
    fn from(m: CiMethod) -> Self {
        match m {
            CiMethod::Percentile => IntervalMethod::Percentile,
            CiMethod::Bca => IntervalMethod::Bca,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub method: IntervalMethod,
    pub confidence: f64,
    /// Bootstrap replicates kept; `None` for analytic intervals.
    pub n_replicates: Option<usize>,
    pub seed: Option<u64>,
    /// Resamples on which the statistic was undefined and had to be redrawn.
    pub redraws: usize,
    pub std_error: f64,
    /// Bounds were pulled back into the statistic's natural range.
    pub clipped: bool,
    /// `lo <= point <= hi` does not hold. Reported, never corrected.
    pub point_outside: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub method: CiMethod,
    pub confidence: f64,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Natural range of the statistic, e.g. `(0, 1)` for AUC.
    pub bounds: Option<(f64, f64)>,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 1000,
            seed: 42,
            method: CiMethod::Bca,
            confidence: 0.95,
            workers: None,
            bounds: None,
        }
    }
}

impl BootstrapConfig {
    pub fn unit_interval(mut self) -> Self {
        self.bounds = Some((0.0, 1.0));
        self
    }
}

/// Replicate values indexed by replicate number.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicates<V> {
    pub values: Vec<V>,
    pub redraws: usize,
}

fn in_pool<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Internal(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Draw `n` resamples (with replacement, same size as `data`) and evaluate
/// `statistic` on each. Replicate `i` draws from substream `i` of `seed`,
/// redrawing within that stream while the statistic is undefined.
pub fn replicate<T, V, F>(data: &[T], statistic: &F, n: usize, seed: u64, workers: Option<usize>) -> Result<Replicates<V>>
where
    T: Clone + Send + Sync,
    V: Send,
    F: Fn(&[T]) -> Option<V> + Sync,
{
    if data.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let cap = RETRY_FACTOR * n;
    let draws: Vec<(Option<V>, usize)> = in_pool(workers, || {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed, i as u64);
                let mut sample = Vec::with_capacity(data.len());
                for attempt in 1..=cap {
                    sample.clear();
                    sample.extend((0..data.len()).map(|_| data[rng.random_range(0..data.len())].clone()));
                    if let Some(v) = statistic(&sample) {
                        return (Some(v), attempt);
                    }
                }
                (None, cap)
            })
            .collect()
    })?;
    let attempts: usize = draws.iter().map(|(_, a)| a).sum();
    let redraws = attempts - n;
    if attempts > cap || draws.iter().any(|(v, _)| v.is_none()) {
        return Err(Error::TooManyDegenerateReplicates { redraws, cap });
    }
    Ok(Replicates {
        values: draws.into_iter().map(|(v, _)| v.expect("checked above")).collect(),
        redraws,
    })
}

/// Leave-one-out values of `statistic`; undefined ones are dropped.
pub fn jackknife<T, F>(data: &[T], statistic: &F) -> Vec<f64>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> Option<f64> + Sync,
{
    (0..data.len())
        .into_par_iter()
        .filter_map(|i| {
            let mut rest = Vec::with_capacity(data.len() - 1);
            rest.extend_from_slice(&data[..i]);
            rest.extend_from_slice(&data[i + 1..]);
            statistic(&rest)
        })
        .collect()
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Bias-correction z₀ from the share of replicates below the point
/// estimate (ties count half).
pub fn bias_correction(point: f64, replicates: &[f64]) -> f64 {
    let b = replicates.len() as f64;
    let below = replicates.iter().filter(|&&r| r < point).count() as f64;
    let ties = replicates.iter().filter(|&&r| r == point).count() as f64;
    let share = ((below + 0.5 * ties) / b).clamp(0.5 / b, 1.0 - 0.5 / b);
    std_normal().inverse_cdf(share)
}

/// Jackknife acceleration Σd³ / (6·(Σd²)^{3/2}) with d = mean − θ₍ᵢ₎.
pub fn acceleration(jack: &[f64]) -> f64 {
    if jack.is_empty() {
        return 0.0;
    }
    let mean = jack.iter().sum::<f64>() / jack.len() as f64;
    let (mut s2, mut s3) = (0.0, 0.0);
    for &j in jack {
        let d = mean - j;
        s2 += d * d;
        s3 += d * d * d;
    }
    if s2 <= 0.0 {
        0.0
    } else {
        s3 / (6.0 * s2.powf(1.5))
    }
}

/// Percentile bounds at the BCa-adjusted levels.
pub fn bca_levels(z0: f64, accel: f64, confidence: f64) -> (f64, f64) {
    let normal = std_normal();
    let alpha = (1.0 - confidence) / 2.0;
    let adjust = |z: f64| {
        let denom = 1.0 - accel * (z0 + z);
        if denom <= 0.0 {
            if z < 0.0 {
                0.0
            } else {
                1.0
            }
        } else {
            normal.cdf(z0 + (z0 + z) / denom)
        }
    };
    (adjust(normal.inverse_cdf(alpha)), adjust(normal.inverse_cdf(1.0 - alpha)))
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Assemble an interval from replicate values. `jack` is required for BCa.
pub fn interval_from_replicates(
    point: f64,
    replicates: &[f64],
    jack: Option<&[f64]>,
    cfg: &BootstrapConfig,
    redraws: usize,
) -> IntervalEstimate {
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let alpha = (1.0 - cfg.confidence) / 2.0;
    let (qlo, qhi) = match cfg.method {
        CiMethod::Percentile => (alpha, 1.0 - alpha),
        CiMethod::Bca => {
            let z0 = bias_correction(point, &sorted);
            let a = jack.map_or(0.0, acceleration);
            bca_levels(z0, a, cfg.confidence)
        }
    };
    let (mut lo, mut hi) = (quantile_sorted(&sorted, qlo), quantile_sorted(&sorted, qhi));
    let mut clipped = false;
    if let Some((min, max)) = cfg.bounds {
        if lo < min || hi > max {
            clipped = true;
            lo = lo.max(min);
            hi = hi.min(max);
        }
    }
    IntervalEstimate {
        point,
        lo,
        hi,
        method: cfg.method.into(),
        confidence: cfg.confidence,
        n_replicates: Some(replicates.len()),
        seed: Some(cfg.seed),
        redraws,
        std_error: sample_sd(replicates),
        clipped,
        point_outside: !(lo <= point && point <= hi),
    }
}

/// Bootstrap confidence interval for `statistic` over the cases in `data`.
///
/// The statistic must be pure: it returns `None` where it is undefined
/// (e.g. a resample holding a single class), which triggers a redraw.
pub fn bootstrap_ci<T, F>(data: &[T], statistic: F, cfg: &BootstrapConfig) -> Result<IntervalEstimate>
where
    T: Clone + Send + Sync,
    F: Fn(&[T]) -> Option<f64> + Sync,
{
    if cfg.replicates < MIN_REPLICATES {
        return Err(Error::InvalidReplicateCount(cfg.replicates));
    }
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) {
        return Err(Error::Config(format!("confidence {} outside (0, 1)", cfg.confidence)));
    }
    let point = statistic(data).ok_or(Error::UndefinedStatistic)?;
    let reps = replicate(data, &statistic, cfg.replicates, cfg.seed, cfg.workers)?;
    let jack = match cfg.method {
        CiMethod::Bca => Some(in_pool(cfg.workers, || jackknife(data, &statistic))?),
        CiMethod::Percentile => None,
    };
    Ok(interval_from_replicates(point, &reps.values, jack.as_deref(), cfg, reps.redraws))
}

/// Midranks (1-based, ties averaged) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// DeLong placement values for one scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct Placements {
    pub auc: f64,
    /// Per positive: share of negatives it outscores (ties ½).
    pub positive: Vec<f64>,
    /// Per negative: share of positives that outscore it (ties ½).
    pub negative: Vec<f64>,
}

pub fn placements(scores: &[f64], labels: &[bool]) -> Result<Placements> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    let (m, n) = (pos.len(), neg.len());
    if m == 0 || n == 0 {
        return Err(Error::SingleClass);
    }
    let mut all = pos.clone();
    all.extend_from_slice(&neg);
    let r_all = midranks(&all);
    let r_pos = midranks(&pos);
    let r_neg = midranks(&neg);

    let positive: Vec<f64> = (0..m).map(|i| (r_all[i] - r_pos[i]) / n as f64).collect();
    let negative: Vec<f64> = (0..n).map(|j| 1.0 - (r_all[m + j] - r_neg[j]) / m as f64).collect();
    let rank_sum: f64 = r_all[..m].iter().sum();
    let auc = (rank_sum - (m * (m + 1)) as f64 / 2.0) / (m * n) as f64;
    Ok(Placements { auc, positive, negative })
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

fn require_two_per_class(labels: &[bool]) -> Result<()> {
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    if positives < 2 || negatives < 2 {
        return Err(Error::DegenerateClassSize { positives, negatives });
    }
    Ok(())
}

/// AUC and its DeLong variance S₁₀/P + S₀₁/N.
pub fn delong_variance(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    require_two_per_class(labels)?;
    let p = placements(scores, labels)?;
    let var = covariance(&p.positive, &p.positive) / p.positive.len() as f64
        + covariance(&p.negative, &p.negative) / p.negative.len() as f64;
    Ok((p.auc, var.max(0.0)))
}

/// Normal-theory interval auc ± z·√var, clipped to [0, 1].
pub fn delong_interval(scores: &[f64], labels: &[bool], confidence: f64) -> Result<IntervalEstimate> {
    let (auc, var) = delong_variance(scores, labels)?;
    let z = std_normal().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let se = var.sqrt();
    let (lo, hi) = (auc - z * se, auc + z * se);
    Ok(IntervalEstimate {
        point: auc,
        lo: lo.max(0.0),
        hi: hi.min(1.0),
        method: IntervalMethod::Delong,
        confidence,
        n_replicates: None,
        seed: None,
        redraws: 0,
        std_error: se,
        clipped: lo < 0.0 || hi > 1.0,
        point_outside: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeLongMode {
    Paired,
    Unpaired,
}

impl DeLongMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paired" => Ok(DeLongMode::Paired),
            "unpaired" => Ok(DeLongMode::Unpaired),
            other => Err(Error::Config(format!("unknown DeLong mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeLongResult {
    pub auc_a: f64,
    pub auc_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub covariance: f64,
    pub z: f64,
    pub p_two_sided: f64,
    pub mode: DeLongMode,
}

impl DeLongResult {
    pub fn difference(&self) -> f64 {
        self.auc_a - self.auc_b
    }
}

fn finish(auc_a: f64, auc_b: f64, var_a: f64, var_b: f64, cov: f64, mode: DeLongMode) -> Result<DeLongResult> {
    let diff = auc_a - auc_b;
    let var = (var_a + var_b - 2.0 * cov).max(0.0);
    let (z, p) = if diff == 0.0 {
        (0.0, 1.0)
    } else if var == 0.0 {
        return Err(Error::ZeroVariance);
    } else {
        let z = diff / var.sqrt();
        (z, erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
    };
    Ok(DeLongResult {
        auc_a,
        auc_b,
        var_a,
        var_b,
        covariance: cov,
        z,
        p_two_sided: p,
        mode,
    })
}

/// Two scorers on the same cases; correlation enters through the
/// covariance of their placement values.
pub fn delong_paired(scores_a: &[f64], scores_b: &[f64], labels: &[bool]) -> Result<DeLongResult> {
    if scores_a.len() != scores_b.len() {
        return Err(Error::LengthMismatch {
            left: scores_a.len(),
            right: scores_b.len(),
        });
    }
    let (auc_a, var_a) = delong_variance(scores_a, labels)?;
    let (auc_b, var_b) = delong_variance(scores_b, labels)?;
    let pa = placements(scores_a, labels)?;
    let pb = placements(scores_b, labels)?;
    let cov = covariance(&pa.positive, &pb.positive) / pa.positive.len() as f64
        + covariance(&pa.negative, &pb.negative) / pa.negative.len() as f64;
    finish(auc_a, auc_b, var_a, var_b, cov, DeLongMode::Paired)
}

/// Two scorers evaluated on independent cohorts.
pub fn delong_unpaired(a: &Scored, b: &Scored) -> Result<DeLongResult> {
    let (auc_a, var_a) = delong_variance(&a.scores, &a.labels)?;
    let (auc_b, var_b) = delong_variance(&b.scores, &b.labels)?;
    finish(auc_a, auc_b, var_a, var_b, 0.0, DeLongMode::Unpaired)
}

/// Paired mode requires both sets to describe the same cases, i.e. equal
/// label vectors.
pub fn delong_compare(a: &Scored, b: &Scored, mode: DeLongMode) -> Result<DeLongResult> {
    match mode {
        DeLongMode::Paired => {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch {
                    left: a.len(),
                    right: b.len(),
                });
            }
            if a.labels != b.labels {
                return Err(Error::Config("paired DeLong needs identical labels for both models".into()));
            }
            delong_paired(&a.scores, &b.scores, &a.labels)
        }
        DeLongMode::Unpaired => delong_unpaired(a, b),
    }
}
