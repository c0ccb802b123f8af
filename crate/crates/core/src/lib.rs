//! Evaluation toolkit for binary diagnostic classifiers.
//!
//! Scores are compared against labels with threshold sweeps, ROC and
//! precision-recall curves, DeLong and bootstrap inference, calibration
//! diagnostics and decision-curve analysis. A logistic baseline can be fit on
//! a training cohort, and synthetic cohorts with known properties are
//! available for testing.
//!
//! ```
//! use dxeval::curves::roc_auc;
//! let auc = roc_auc(&[0.9, 0.4, 0.5, 0.1], &[true, true, false, false]).unwrap();
//! assert_eq!(auc, 0.75);
//! ```

pub mod baseline;
pub mod calibration;
pub mod cohort;
pub mod curves;
pub mod dca;
pub mod error;
pub mod inference;
pub mod report;
pub mod rng;
pub mod synth;
pub mod thresholds;

pub use cohort::{CaseRecord, Cohort, ColumnMapping, Role, Scored};
pub use error::{Error, Result};
