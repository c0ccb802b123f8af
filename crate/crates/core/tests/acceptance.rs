//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line with
//! the measured quantities, then asserts.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to see
//! the lines; the heavier criteria also pass in debug builds.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::Rng;

use dxeval::baseline::{design_rows, fit_logistic, log_likelihood, score_vector, FitOptions, WHO_SIRI};
use dxeval::calibration::{expected_calibration_error, reliability_curve, Binning};
use dxeval::cohort::{write_cohort, CaseRecord, Cohort, Role};
use dxeval::curves::{average_precision, roc_auc};
use dxeval::dca::{dca_curve, net_benefit, treat_all_net_benefit, DcaOptions};
use dxeval::inference::{
    bootstrap_ci, delong_compare, delong_variance, BootstrapConfig, CiMethod, DeLongMode,
};
use dxeval::report::{self, format, RunConfig};
use dxeval::rng::substream;
use dxeval::synth::{
    binormal_latent, generate_binormal, generate_calibrated, generate_clinical, BinormalModel, BinormalSpec,
    CalibratedSpec, ClinicalSpec, FeatureDistributions, ScoreDistribution,
};
use dxeval::thresholds::{confusion_at, metrics_from, ConfusionCounts};
use dxeval::Scored;

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn pairs(scores: &[f64], labels: &[bool]) -> Vec<(f64, bool)> {
    scores.iter().copied().zip(labels.iter().copied()).collect()
}

fn auc_stat(s: &[(f64, bool)]) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<bool>) = s.iter().copied().unzip();
    roc_auc(&x, &y).ok()
}

fn rendered(c: &ConfusionCounts) -> [String; 6] {
    let m = metrics_from(c);
    [
        format::sensitivity(m.sensitivity),
        format::rate(m.specificity),
        format::rate(m.ppv),
        format::rate(m.npv),
        format::f1(m.f1),
        format::flagged_pct(m.flagged_fraction),
    ]
}

#[test]
fn criterion_01_golden_who_metrics() {
    let got = rendered(&ConfusionCounts::new(2, 12, 678, 27, 0.1));
    let want = ["0.07", "0.983", "0.143", "0.962", "0.09", "1.9%"];
    verdict(1, got == want, &format!("rendered {got:?}, expected {want:?}"));
}

#[test]
fn criterion_02_golden_cnn_metrics() {
    let got = rendered(&ConfusionCounts::new(24, 1, 7, 1, 0.5));
    let want = ["0.96", "0.875", "0.960", "0.875", "0.96", "75.8%"];
    let who_t0 = metrics_from(&ConfusionCounts::new(29, 690, 0, 0, 0.0));
    let f1 = who_t0.f1.unwrap();
    let f1_ok = (f1 - 58.0 / 748.0).abs() < 1e-15 && format::f1(Some(f1)) == "0.08";
    verdict(
        2,
        got == want && f1_ok,
        &format!("rendered {got:?}, expected {want:?}; WHO t=0 F1 {f1} -> {}", format::f1(Some(f1))),
    );
}

/// Mann-Whitney count over every positive/negative pair, ties counted half.
fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut twice, mut p, mut n) = (0u64, 0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if li {
            p += 1;
        } else {
            n += 1;
        }
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    twice as f64 / (2 * p * n) as f64
}

/// Walk the ranked list from the top score down, closing a step at the end
/// of each tie block: AP = sum over blocks of (new positives / P) x precision.
fn ranked_walk_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    let p = labels.iter().filter(|&&l| l).count() as f64;
    let (mut tp, mut fp, mut prev_tp, mut ap) = (0u64, 0u64, 0u64, 0.0);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let block_ends = order.get(k + 1).is_none_or(|&next| scores[next] != scores[i]);
        if block_ends {
            ap += (tp - prev_tp) as f64 / p * (tp as f64 / (tp + fp) as f64);
            prev_tp = tp;
        }
    }
    ap
}

#[test]
fn criterion_03_auc_oracle() {
    let mut rng = substream(3, 0);
    let (mut checked, mut mismatches) = (0, Vec::new());
    while checked < 200 {
        let n = rng.random_range(2..=12);
        // Coarse score lattice so ties are common.
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64 / 5.0).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let npos = labels.iter().filter(|&&l| l).count();
        if npos == 0 || npos == n {
            continue;
        }
        checked += 1;
        let (auc, oracle_auc) = (roc_auc(&scores, &labels).unwrap(), pair_count_auc(&scores, &labels));
        let (ap, oracle_ap) = (average_precision(&scores, &labels).unwrap(), ranked_walk_ap(&scores, &labels));
        if auc != oracle_auc || ap != oracle_ap {
            mismatches.push((scores, labels, auc, oracle_auc, ap, oracle_ap));
        }
    }
    verdict(
        3,
        mismatches.is_empty(),
        &format!("{checked} instances, {} mismatches {:?}", mismatches.len(), mismatches.first()),
    );
}

#[test]
fn criterion_04_binormal_recovery() {
    let truth = statrs::function::erf::erfc(-0.5) / 2.0; // Phi(1/sqrt 2)
    let mut aucs = Vec::new();
    for seed in [11, 22, 33, 44, 55] {
        let spec = BinormalSpec {
            n_pos: 10_000,
            n_neg: 10_000,
            mu_pos: 1.0,
            mu_neg: 0.0,
            sigma_pos: 1.0,
            sigma_neg: 1.0,
            seed,
        };
        let s = generate_binormal(&spec).unwrap().scored("score").unwrap();
        aucs.push(roc_auc(&s.scores, &s.labels).unwrap());
    }
    let worst = aucs.iter().map(|a| (a - truth).abs()).fold(0.0, f64::max);
    verdict(
        4,
        worst <= 0.01 && (truth - 0.7602).abs() < 1e-4,
        &format!("true AUC {truth:.6}, empirical {aucs:.4?}, max deviation {worst:.4}"),
    );
}

#[test]
fn criterion_05_delong_vs_bootstrap() {
    // N = 500, prevalence 0.3, population AUC 0.8.
    let model = BinormalModel::with_auc("m", 0.8);
    let (latent, labels) = binormal_latent(150, 350, std::slice::from_ref(&model), 2024).unwrap();
    let scores: Vec<f64> = latent.iter().map(|r| r[0]).collect();
    let (_, var) = delong_variance(&scores, &labels).unwrap();
    let delong_se = var.sqrt();
    let cfg = BootstrapConfig {
        replicates: 1000,
        seed: 42,
        method: CiMethod::Bca,
        ..BootstrapConfig::default()
    }
    .unit_interval();
    let boot = bootstrap_ci(&pairs(&scores, &labels), auc_stat, &cfg).unwrap();
    let rel = (boot.std_error - delong_se).abs() / delong_se;

    // Two independent models from the same generator share every case, so
    // the paired null of equal AUC holds.
    let trials = 1000;
    let mut rejections = 0;
    for t in 0..trials {
        let (latent, labels) = binormal_latent(150, 350, &[model.clone(), model.clone()], 10_000 + t).unwrap();
        let a = Scored::new(latent.iter().map(|r| r[0]).collect(), labels.clone()).unwrap();
        let b = Scored::new(latent.iter().map(|r| r[1]).collect(), labels).unwrap();
        if delong_compare(&a, &b, DeLongMode::Paired).unwrap().p_two_sided < 0.05 {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    verdict(
        5,
        rel <= 0.15 && (rate - 0.05).abs() <= 0.02,
        &format!(
            "DeLong SE {delong_se:.5}, BCa bootstrap SE {:.5} (relative gap {rel:.3}); type-I error {rate:.3} over {trials} trials",
            boot.std_error
        ),
    );
}

#[test]
fn criterion_06_bootstrap_determinism() {
    let cohort = generate_binormal(&BinormalSpec {
        n_pos: 60,
        n_neg: 240,
        mu_pos: 1.2,
        mu_neg: 0.0,
        sigma_pos: 1.0,
        sigma_neg: 1.3,
        seed: 6,
    })
    .unwrap();
    let s = cohort.scored("score").unwrap();
    let data = pairs(&s.scores, &s.labels);
    let run = |workers: usize, method: CiMethod| {
        let cfg = BootstrapConfig {
            replicates: 1000,
            seed: 42,
            method,
            workers: Some(workers),
            ..BootstrapConfig::default()
        }
        .unit_interval();
        bootstrap_ci(&data, auc_stat, &cfg).unwrap()
    };
    let mut ok = true;
    for method in [CiMethod::Bca, CiMethod::Percentile] {
        let (a, b, c) = (run(1, method), run(1, method), run(8, method));
        ok &= a == b && a == c && a.lo.to_bits() == c.lo.to_bits() && a.hi.to_bits() == c.hi.to_bits();
    }
    let bands = |workers| {
        let opts = DcaOptions {
            bootstrap: Some(BootstrapConfig {
                replicates: 300,
                seed: 42,
                workers: Some(workers),
                ..BootstrapConfig::default()
            }),
            ..DcaOptions::default()
        };
        dca_curve(&s.scores, &s.labels, &[0.1, 0.2, 0.3, 0.4], &opts).unwrap()
    };
    ok &= bands(1) == bands(8);
    let bca = run(8, CiMethod::Bca);
    verdict(
        6,
        ok,
        &format!("seed 42, 1 vs 8 workers: BCa [{:.17}, {:.17}] identical across runs", bca.lo, bca.hi),
    );
}

#[test]
fn criterion_07_logistic_recovery() {
    let truth = [-4.0, 0.5, -0.8];
    let cohort = generate_clinical(&ClinicalSpec {
        n: 20_000,
        betas: truth,
        features: FeatureDistributions::default(),
        seed: 7,
    })
    .unwrap();
    let fit = fit_logistic(&cohort, &WHO_SIRI, &FitOptions::default()).unwrap();
    let max_dev = fit
        .coefficients
        .iter()
        .zip(truth)
        .map(|(b, t)| (b - t).abs())
        .fold(0.0, f64::max);

    let (rows, labels) = design_rows(&cohort, &WHO_SIRI).unwrap();
    let score_norm = score_vector(&rows, &labels, &fit.coefficients)
        .iter()
        .map(|g| g.abs())
        .fold(0.0, f64::max);

    // Central differences of the log-likelihood away from the optimum.
    let at = [-3.5, 0.4, -0.6];
    let analytic = score_vector(&rows, &labels, &at);
    let mut worst_rel: f64 = 0.0;
    for j in 0..3 {
        let h = 1e-5;
        let (mut up, mut down) = (at, at);
        up[j] += h;
        down[j] -= h;
        let numeric = (log_likelihood(&rows, &labels, &up) - log_likelihood(&rows, &labels, &down)) / (2.0 * h);
        worst_rel = worst_rel.max((numeric - analytic[j]).abs() / analytic[j].abs().max(1.0));
    }
    let z: Vec<f64> = fit
        .coefficients
        .iter()
        .zip(truth)
        .zip(&fit.std_errors)
        .map(|((b, t), se)| (b - t) / se)
        .collect();
    verdict(
        7,
        max_dev <= 0.1 && score_norm <= 1e-6 && worst_rel <= 1e-4,
        &format!(
            "fitted {:.4?} vs {truth:?} (max deviation {max_dev:.4}; standard errors {:.4?}, z {z:.2?}); |score| {score_norm:.2e} at optimum; gradient check relative error {worst_rel:.2e}",
            fit.coefficients, fit.std_errors
        ),
    );
}

#[test]
fn criterion_08_calibration_oracle() {
    let cohort = generate_calibrated(&CalibratedSpec {
        n: 50_000,
        distribution: ScoreDistribution::Uniform { lo: 0.0, hi: 1.0 },
        seed: 8,
    })
    .unwrap();
    let s = cohort.scored("score").unwrap();
    let bins = reliability_curve(&s.scores, &s.labels, Binning::EqualWidth, 10).unwrap();
    let ece = expected_calibration_error(&bins).unwrap();

    // Bin k holds 32 cases scored j/32 with exactly j positives, so every
    // bin's observed frequency equals its mean prediction with no rounding.
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for j in [1u32, 4, 7, 10, 13, 17, 20, 23, 26, 30] {
        for i in 0..32 {
            scores.push(f64::from(j) / 32.0);
            labels.push(i < j);
        }
    }
    let exact_bins = reliability_curve(&scores, &labels, Binning::EqualWidth, 10).unwrap();
    let exact = expected_calibration_error(&exact_bins).unwrap();
    verdict(
        8,
        ece <= 0.02 && exact == 0.0,
        &format!("uniform n=50000 ECE {ece:.5}; constructed bins ECE {exact}"),
    );
}

#[test]
fn criterion_09_dca_identities() {
    let cohort = generate_binormal(&BinormalSpec {
        n_pos: 130,
        n_neg: 370,
        mu_pos: 1.0,
        mu_neg: -1.0,
        sigma_pos: 1.0,
        sigma_neg: 1.0,
        seed: 9,
    })
    .unwrap();
    let s = cohort.scored("score").unwrap();
    let prevalence = 130.0 / 500.0;
    let crossing = treat_all_net_benefit(prevalence, prevalence).abs();

    let perfect: Vec<f64> = s.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let grid: Vec<f64> = (1..=99).map(|i| i as f64 / 100.0).collect();
    let flat = dca_curve(&perfect, &s.labels, &grid, &DcaOptions::default()).unwrap();
    let flat_dev = flat.model_nb.iter().map(|v| (v - prevalence).abs()).fold(0.0, f64::max);

    let curve = dca_curve(&s.scores, &s.labels, &grid, &DcaOptions::default()).unwrap();
    let mut recompute_dev: f64 = 0.0;
    for (i, &t) in grid.iter().enumerate() {
        let c = confusion_at(&s.scores, &s.labels, t).unwrap();
        let n = c.total() as f64;
        let expected = c.tp as f64 / n - c.fp as f64 / n * t / (1.0 - t);
        recompute_dev = recompute_dev
            .max((curve.model_nb[i] - expected).abs())
            .max((net_benefit(&s.scores, &s.labels, t).unwrap() - expected).abs());
    }
    verdict(
        9,
        crossing < 1e-12 && flat_dev < 1e-12 && recompute_dev < 1e-12,
        &format!(
            "treat-all at t=prevalence {crossing:.1e}; perfect-classifier deviation {flat_dev:.1e}; recompute deviation {recompute_dev:.1e}"
        ),
    );
}

fn write_counts_cohort(path: &Path, groups: &[(usize, bool, f64)]) {
    let mut cases = Vec::new();
    for &(count, label, score) in groups {
        for _ in 0..count {
            cases.push(CaseRecord::new(format!("c{:04}", cases.len()), label).with_score("score", score));
        }
    }
    let cohort = Cohort::new(cases, Role::Evaluate).unwrap();
    write_cohort(&cohort, fs::File::create(path).unwrap()).unwrap();
}

fn table_rows(tables: &report::RenderedTables, threshold: &str) -> Vec<String> {
    tables
        .thresholds
        .rows
        .iter()
        .find(|r| r[1] == threshold)
        .map(|r| r[2..].to_vec())
        .unwrap()
}

#[test]
fn criterion_10_report_determinism_and_formatting() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = report::write_demo(tmp.path()).unwrap();
    cfg.output_dir = Some(tmp.path().join("a"));
    report::run_comparison(&cfg).unwrap();
    cfg.output_dir = Some(tmp.path().join("b"));
    report::run_comparison(&cfg).unwrap();
    let a = fs::read(tmp.path().join("a/summary.json")).unwrap();
    let b = fs::read(tmp.path().join("b/summary.json")).unwrap();
    let identical = a == b;
    let files = |d: &str| -> BTreeSet<_> {
        fs::read_dir(tmp.path().join(d)).unwrap().map(|e| e.unwrap().file_name()).collect()
    };
    let mut all_identical = files("a") == files("b");
    for f in files("a") {
        all_identical &= fs::read(tmp.path().join("a").join(&f)).unwrap() == fs::read(tmp.path().join("b").join(&f)).unwrap();
    }

    // WHO-like scores: 14 cases above 0.1, none above 0.2.
    let who = tmp.path().join("who.csv");
    write_counts_cohort(&who, &[(2, true, 0.15), (12, false, 0.15), (27, true, 0.05), (678, false, 0.05)]);
    let mut who_cfg = RunConfig::new(&who, dxeval::ColumnMapping::default().with_scores(["score"]));
    who_cfg.bootstrap.replicates = 200;
    let who_tables = report::render_tables(&report::compute_summary(&who_cfg).unwrap());
    let who_t01 = table_rows(&who_tables, "0.1");
    let undefined_ppv = ["0.2", "0.3", "0.4", "0.5"]
        .iter()
        .all(|t| table_rows(&who_tables, t)[2] == "--" && table_rows(&who_tables, t)[0] == "0.00");
    let who_f1_t0 = who_tables.performance.rows[0][6].clone();

    let cnn = tmp.path().join("cnn.csv");
    write_counts_cohort(&cnn, &[(24, true, 0.9), (1, false, 0.9), (1, true, 0.3), (7, false, 0.3)]);
    let mut cnn_cfg = RunConfig::new(&cnn, dxeval::ColumnMapping::default().with_scores(["score"]));
    cnn_cfg.bootstrap.replicates = 200;
    let cnn_tables = report::render_tables(&report::compute_summary(&cnn_cfg).unwrap());
    let (cnn_t04, cnn_t05) = (table_rows(&cnn_tables, "0.4"), table_rows(&cnn_tables, "0.5"));

    let formatting = who_t01 == ["0.07", "0.983", "0.143", "0.962", "0.09", "1.9%"]
        && cnn_t04 == ["0.96", "0.875", "0.960", "0.875", "0.96", "75.8%"]
        && cnn_t04 == cnn_t05
        && undefined_ppv
        && who_f1_t0 == "0.08"
        && format::auc(0.97549) == "0.975";
    verdict(
        10,
        identical && all_identical && formatting,
        &format!(
            "summary.json identical {identical} ({} bytes), all artifacts identical {all_identical}; WHO t=0.1 {who_t01:?}, PPV '--' above 0.1 {undefined_ppv}, WHO t=0 F1 {who_f1_t0}; CNN t=0.4/0.5 {cnn_t04:?}",
            a.len()
        ),
    );
}
