use std::fs;

use dxeval::cohort::{write_cohort, ColumnMapping};
use dxeval::inference::{delong_compare, DeLongMode};
use dxeval::report::{self, RunConfig};
use dxeval::synth::{generate_binormal_models, generate_clinical, BinormalModel, ClinicalSpec, FeatureDistributions};
use dxeval::Scored;

/// A strong and a weak scorer on the demo's class sizes should be told apart
/// by the paired test in nearly every seeded run.
#[test]
fn paired_delong_detects_strong_vs_weak() {
    let models = [BinormalModel::with_auc("strong", 0.95), BinormalModel::with_auc("weak", 0.70)];
    let runs = 100;
    let mut detected = 0;
    for seed in 0..runs {
        let cohort = generate_binormal_models(29, 690, &models, seed).unwrap();
        let (a, b, labels) = cohort.paired("strong", "weak").unwrap();
        let r = delong_compare(
            &Scored::new(a, labels.clone()).unwrap(),
            &Scored::new(b, labels).unwrap(),
            DeLongMode::Paired,
        )
        .unwrap();
        if r.p_two_sided < 0.01 {
            detected += 1;
        }
    }
    assert!(detected >= 95, "detected {detected}/{runs}");
}

#[test]
fn tables_match_summary_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = {
        let mut c = report::write_demo(tmp.path()).unwrap();
        c.bootstrap.replicates = 200;
        c
    };
    let summary = report::compute_summary(&cfg).unwrap();
    let tables = report::render_tables(&summary);
    for (m, row) in summary.models.iter().zip(&tables.performance.rows) {
        assert_eq!(row[0], m.name);
        assert_eq!(row[2], report::format::auc_with_ci(&m.roc_auc));
        assert_eq!(row[6], report::format::f1(m.operating_point.metrics.f1));
    }
    assert_eq!(tables.thresholds.rows.len(), 2 * cfg.sweep_grid.len());
    let cmp = tables.comparisons.unwrap();
    let pair = &summary.pairwise.as_ref().unwrap()[0];
    assert_eq!(cmp.rows[0][3], report::format::p_value(pair.delong.p_two_sided));
    assert!(tables.performance.to_csv().unwrap().starts_with("Model,N,ROC-AUC (95% CI)"));
}

#[test]
fn baseline_is_fit_on_training_data_and_scored() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = |n, seed| ClinicalSpec {
        n,
        betas: [-4.0, 0.5, -0.8],
        features: FeatureDistributions::default(),
        seed,
    };
    let train = generate_clinical(&spec(2000, 1)).unwrap();
    // Rename evaluation ids so the cohorts are disjoint.
    let eval = generate_clinical(&spec(600, 2)).unwrap();
    let eval_cases: Vec<_> = eval
        .cases()
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.case_id = format!("eval-{}", c.case_id);
            c
        })
        .collect();
    let eval = dxeval::Cohort::new(eval_cases, dxeval::Role::Evaluate).unwrap();
    let mapping = write_cohort(&train, fs::File::create(tmp.path().join("train.csv")).unwrap()).unwrap();
    write_cohort(&eval, fs::File::create(tmp.path().join("eval.csv")).unwrap()).unwrap();

    let mut cfg = RunConfig::new(tmp.path().join("eval.csv"), ColumnMapping { scores: Vec::new(), ..mapping });
    cfg.bootstrap.replicates = 200;
    cfg.baseline = Some(report::BaselineRequest {
        train: tmp.path().join("train.csv"),
        ..Default::default()
    });
    let summary = report::compute_summary(&cfg).unwrap();
    let baseline = summary.baseline.as_ref().unwrap();
    assert_eq!(baseline.n_train, 2000);
    assert_eq!(summary.models.len(), 1);
    assert_eq!(summary.models[0].name, "who_siri");
    assert!(summary.models[0].roc_auc.point > 0.7);

    // Overlapping cohorts are rejected.
    cfg.input.path = tmp.path().join("train.csv");
    let err = report::compute_summary(&cfg).unwrap_err();
    assert!(err.to_string().contains("overlap"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn failing_stage_is_named() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.csv"), "case_id,label,s\na,1,0.5\nb,1,0.2\nc,1,0.9\n").unwrap();
    let mut cfg = RunConfig::new(tmp.path().join("c.csv"), ColumnMapping::default().with_scores(["s"]));
    cfg.output_dir = Some(tmp.path().join("out"));
    let err = report::run_comparison(&cfg).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("model `s`"), "{msg}");
    assert_eq!(err.exit_code(), 3);
    assert!(!tmp.path().join("out/summary.json").exists());
}
