//! Evaluation datasets: case records, CSV ingestion and validation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Differential blood counts, ×10⁹/L.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BloodPanel {
    pub neutrophils: f64,
    pub monocytes: f64,
    pub lymphocytes: f64,
}

impl BloodPanel {
    pub fn new(neutrophils: f64, monocytes: f64, lymphocytes: f64) -> Result<Self> {
        let panel = BloodPanel {
            neutrophils,
            monocytes,
            lymphocytes,
        };
        panel.validate()?;
        Ok(panel)
    }

    fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("neutrophils", self.neutrophils),
            ("monocytes", self.monocytes),
            ("lymphocytes", self.lymphocytes),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::OutOfRange { what, value: v });
            }
        }
        Ok(())
    }
}

/// One subject or image under evaluation.
///
/// `label` is `true` for the positive class (morphologically normal).
/// `scores` maps a model name to that model's probability for this case; a
/// model that did not score the case simply has no entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub label: bool,
    pub pct_normal: Option<f64>,
    pub blood: Option<BloodPanel>,
    /// Precomputed SIRI, used when no blood panel is supplied.
    pub siri: Option<f64>,
    pub scores: BTreeMap<String, f64>,
}

impl CaseRecord {
    pub fn new(case_id: impl Into<String>, label: bool) -> Self {
        CaseRecord {
            case_id: case_id.into(),
            label,
            pct_normal: None,
            blood: None,
            siri: None,
            scores: BTreeMap::new(),
        }
    }

    pub fn with_score(mut self, model: impl Into<String>, score: f64) -> Self {
        self.scores.insert(model.into(), score);
        self
    }

    pub fn with_pct_normal(mut self, pct: f64) -> Self {
        self.pct_normal = Some(pct);
        self
    }

    pub fn with_blood(mut self, panel: BloodPanel) -> Self {
        self.blood = Some(panel);
        self
    }

    pub fn with_siri(mut self, siri: f64) -> Self {
        self.siri = Some(siri);
        self
    }

    pub fn score(&self, model: &str) -> Option<f64> {
        self.scores.get(model).copied()
    }

    fn validate(&self) -> Result<()> {
        if let Some(p) = self.pct_normal {
            if !(0.0..=100.0).contains(&p) {
                return Err(Error::OutOfRange {
                    what: "pct_normal",
                    value: p,
                });
            }
        }
        if let Some(b) = &self.blood {
            b.validate()?;
        }
        if let Some(s) = self.siri {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::OutOfRange {
                    what: "siri",
                    value: s,
                });
            }
        }
        for &s in self.scores.values() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::OutOfRange {
                    what: "score",
                    value: s,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    #[default]
    Evaluate,
}

/// A validated, immutable set of cases with unique identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    cases: Vec<CaseRecord>,
    role: Role,
}

impl Cohort {
    pub fn new(cases: Vec<CaseRecord>, role: Role) -> Result<Self> {
        if cases.is_empty() {
            return Err(Error::EmptyCohort);
        }
        let mut seen = HashSet::with_capacity(cases.len());
        for case in &cases {
            case.validate()?;
            if !seen.insert(case.case_id.as_str()) {
                return Err(Error::DuplicateCaseId(case.case_id.clone()));
            }
        }
        Ok(Cohort { cases, role })
    }

    pub fn cases(&self) -> &[CaseRecord] {
        &self.cases
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    /// Same cases with every label inverted.
    pub fn flipped_labels(&self) -> Cohort {
        let cases = self
            .cases
            .iter()
            .map(|c| CaseRecord {
                label: !c.label,
                ..c.clone()
            })
            .collect();
        Cohort {
            cases,
            role: self.role,
        }
    }

    /// Attach a score column computed per case. Cases for which `f` yields
    /// `None` get no entry.
    pub fn with_scores<F>(&self, model: &str, mut f: F) -> Result<Cohort>
    where
        F: FnMut(&CaseRecord) -> Result<Option<f64>>,
    {
        let mut cases = self.cases.clone();
        for case in &mut cases {
            if let Some(s) = f(case)? {
                case.scores.insert(model.to_string(), s);
            }
        }
        Cohort::new(cases, self.role)
    }

    /// Sorted union of the model names scored anywhere in the cohort.
    pub fn model_names(&self) -> Vec<String> {
        let names: BTreeSet<&String> = self.cases.iter().flat_map(|c| c.scores.keys()).collect();
        names.into_iter().cloned().collect()
    }

    /// Scores and labels for the cases carrying `model`, in cohort order.
    pub fn scored(&self, model: &str) -> Result<Scored> {
        if !self.cases.iter().any(|c| c.scores.contains_key(model)) {
            return Err(Error::MissingColumn(model.to_string()));
        }
        let mut out = Scored::default();
        for c in &self.cases {
            if let Some(s) = c.score(model) {
                out.scores.push(s);
                out.labels.push(c.label);
            }
        }
        Ok(out)
    }

    /// Scores of two models over the cases carrying both, with shared labels.
    pub fn paired(&self, model_a: &str, model_b: &str) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
        for m in [model_a, model_b] {
            if !self.cases.iter().any(|c| c.scores.contains_key(m)) {
                return Err(Error::MissingColumn(m.to_string()));
            }
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut labels = Vec::new();
        for c in &self.cases {
            if let (Some(x), Some(y)) = (c.score(model_a), c.score(model_b)) {
                a.push(x);
                b.push(y);
                labels.push(c.label);
            }
        }
        Ok((a, b, labels))
    }
}

/// Aligned score and label vectors for one model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl Scored {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: labels.len(),
            });
        }
        Ok(Scored { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Maps logical fields onto CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub case_id: String,
    pub label: String,
    pub scores: Vec<String>,
    pub pct_normal: Option<String>,
    pub neutrophils: Option<String>,
    pub monocytes: Option<String>,
    pub lymphocytes: Option<String>,
    pub siri: Option<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            case_id: "case_id".into(),
            label: "label".into(),
            scores: Vec::new(),
            pct_normal: None,
            neutrophils: None,
            monocytes: None,
            lymphocytes: None,
            siri: None,
        }
    }
}

impl ColumnMapping {
    pub fn with_scores<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.scores = names.into_iter().map(Into::into).collect();
        self
    }

    /// Mapping that names every column `write_cohort` would emit.
    pub fn standard(scores: Vec<String>) -> Self {
        ColumnMapping {
            scores,
            pct_normal: Some("pct_normal".into()),
            neutrophils: Some("neutrophils".into()),
            monocytes: Some("monocytes".into()),
            lymphocytes: Some("lymphocytes".into()),
            siri: Some("siri".into()),
            ..ColumnMapping::default()
        }
    }
}

/// Parse a cohort CSV from disk.
pub fn parse_cohort(path: impl AsRef<Path>, mapping: &ColumnMapping, role: Role) -> Result<Cohort> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_cohort(file, mapping, role)
}

/// Parse a cohort CSV from any reader. Optional columns named in the
/// mapping but absent from the header are treated as absent for every case;
/// the id, label and score columns are required.
pub fn read_cohort<R: Read>(reader: R, mapping: &ColumnMapping, role: Role) -> Result<Cohort> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));

    let id_idx = require(&mapping.case_id)?;
    let label_idx = require(&mapping.label)?;
    let score_idx: Vec<(String, usize)> = mapping
        .scores
        .iter()
        .map(|s| require(s).map(|i| (s.clone(), i)))
        .collect::<Result<_>>()?;
    let optional = |name: &Option<String>| name.as_deref().and_then(find);
    let pct_idx = optional(&mapping.pct_normal);
    let neut_idx = optional(&mapping.neutrophils);
    let mono_idx = optional(&mapping.monocytes);
    let lymph_idx = optional(&mapping.lymphocytes);
    let siri_idx = optional(&mapping.siri);

    let mut cases = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cell = |idx: usize| record.get(idx).unwrap_or("");
        let malformed = |column: &str, detail: String| Error::MalformedValue {
            row,
            column: column.to_string(),
            detail,
        };
        let number = |idx: Option<usize>, column: &str| -> Result<Option<f64>> {
            let Some(idx) = idx else { return Ok(None) };
            let raw = cell(idx);
            if raw.is_empty() {
                return Ok(None);
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(malformed(column, format!("`{raw}` is not a finite number"))),
            }
        };

        let case_id = cell(id_idx).to_string();
        if case_id.is_empty() {
            return Err(malformed(&mapping.case_id, "empty case id".into()));
        }
        let label = match cell(label_idx) {
            "1" => true,
            "0" => false,
            other => {
                return Err(malformed(&mapping.label, format!("label `{other}` not in {{0,1}}")))
            }
        };
        let mut case = CaseRecord::new(case_id, label);

        if let Some(p) = number(pct_idx, mapping.pct_normal.as_deref().unwrap_or(""))? {
            if !(0.0..=100.0).contains(&p) {
                return Err(malformed(mapping.pct_normal.as_deref().unwrap_or(""), format!("{p} outside [0, 100]")));
            }
            case.pct_normal = Some(p);
        }

        let neut = number(neut_idx, mapping.neutrophils.as_deref().unwrap_or(""))?;
        let mono = number(mono_idx, mapping.monocytes.as_deref().unwrap_or(""))?;
        let lymph = number(lymph_idx, mapping.lymphocytes.as_deref().unwrap_or(""))?;
        match (neut, mono, lymph) {
            (Some(n), Some(m), Some(l)) => {
                let panel = BloodPanel::new(n, m, l)
                    .map_err(|e| malformed("blood panel", e.to_string()))?;
                case.blood = Some(panel);
            }
            (None, None, None) => {}
            _ => return Err(malformed("blood panel", "incomplete blood panel".into())),
        }

        if let Some(s) = number(siri_idx, mapping.siri.as_deref().unwrap_or(""))? {
            if s < 0.0 {
                return Err(malformed(mapping.siri.as_deref().unwrap_or(""), format!("{s} is negative")));
            }
            case.siri = Some(s);
        }

        for (name, idx) in &score_idx {
            if let Some(s) = number(Some(*idx), name)? {
                if !(0.0..=1.0).contains(&s) {
                    return Err(malformed(name, format!("score {s} outside [0, 1]")));
                }
                case.scores.insert(name.clone(), s);
            }
        }
        cases.push(case);
    }
    Cohort::new(cases, role)
}

/// Serialize to the standard CSV layout. Optional feature columns are only
/// written when at least one case carries them. Returns the mapping that
/// reads the file back.
pub fn write_cohort<W: Write>(cohort: &Cohort, writer: W) -> Result<ColumnMapping> {
    let cases = cohort.cases();
    let has_pct = cases.iter().any(|c| c.pct_normal.is_some());
    let has_blood = cases.iter().any(|c| c.blood.is_some());
    let has_siri = cases.iter().any(|c| c.siri.is_some());
    let models = cohort.model_names();

    let mut mapping = ColumnMapping::default().with_scores(models.clone());
    let mut header = vec!["case_id".to_string(), "label".to_string()];
    if has_pct {
        header.push("pct_normal".into());
        mapping.pct_normal = Some("pct_normal".into());
    }
    if has_blood {
        for col in ["neutrophils", "monocytes", "lymphocytes"] {
            header.push(col.into());
        }
        mapping.neutrophils = Some("neutrophils".into());
        mapping.monocytes = Some("monocytes".into());
        mapping.lymphocytes = Some("lymphocytes".into());
    }
    if has_siri {
        header.push("siri".into());
        mapping.siri = Some("siri".into());
    }
    header.extend(models.iter().cloned());

    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in cases {
        let mut row = vec![c.case_id.clone(), if c.label { "1" } else { "0" }.to_string()];
        if has_pct {
            row.push(opt(c.pct_normal));
        }
        if has_blood {
            row.push(opt(c.blood.map(|b| b.neutrophils)));
            row.push(opt(c.blood.map(|b| b.monocytes)));
            row.push(opt(c.blood.map(|b| b.lymphocytes)));
        }
        if has_siri {
            row.push(opt(c.siri));
        }
        for m in &models {
            row.push(opt(c.score(m)));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<cohort output>", e))?;
    Ok(mapping)
}

/// Case ids present in both cohorts, sorted. Empty means no leakage.
pub fn check_disjoint(a: &Cohort, b: &Cohort) -> Vec<String> {
    let ids_b: HashSet<&str> = b.cases.iter().map(|c| c.case_id.as_str()).collect();
    let shared: BTreeSet<&str> = a
        .cases
        .iter()
        .map(|c| c.case_id.as_str())
        .filter(|id| ids_b.contains(id))
        .collect();
    shared.into_iter().map(String::from).collect()
}

/// Fraction of positive cases.
pub fn prevalence(cohort: &Cohort) -> Result<f64> {
    if cohort.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let pos = cohort.cases.iter().filter(|c| c.label).count();
    Ok(pos as f64 / cohort.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str, mapping: &ColumnMapping) -> Result<Cohort> {
        read_cohort(text.as_bytes(), mapping, Role::Evaluate)
    }

    fn ids(ids: &[&str]) -> Cohort {
        Cohort::new(ids.iter().map(|i| CaseRecord::new(*i, false)).collect(), Role::Evaluate).unwrap()
    }

    #[test]
    fn parses_score_columns() {
        let text = "case_id,label,cnn_score\na,1,0.9\nb,0,0.2\nc,0,0.4\n";
        let mapping = ColumnMapping::default().with_scores(["cnn_score"]);
        let c = parse(text, &mapping).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.cases()[0].score("cnn_score"), Some(0.9));
        assert_eq!(c.cases()[2].case_id, "c");
        assert!(c.cases()[0].pct_normal.is_none());
    }

    #[test]
    fn label_outside_domain_is_malformed() {
        let text = "case_id,label,cnn_score\na,1,0.9\nb,2,0.2\n";
        let mapping = ColumnMapping::default().with_scores(["cnn_score"]);
        match parse(text, &mapping) {
            Err(Error::MalformedValue { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "label");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_is_an_error_not_a_dropped_row() {
        let text = "case_id,label,s\na,1,0.9\nb,0,abc\n";
        let mapping = ColumnMapping::default().with_scores(["s"]);
        assert!(matches!(parse(text, &mapping), Err(Error::MalformedValue { row: 2, .. })));
        let text = "case_id,label,s\na,1,1.5\n";
        assert!(matches!(parse(text, &mapping), Err(Error::MalformedValue { .. })));
    }

    #[test]
    fn missing_column_and_duplicates() {
        let mapping = ColumnMapping::default().with_scores(["cnn"]);
        assert!(matches!(
            parse("case_id,label\na,1\n", &mapping),
            Err(Error::MissingColumn(c)) if c == "cnn"
        ));
        let mapping = ColumnMapping::default();
        assert!(matches!(
            parse("case_id,label\na,1\na,0\n", &mapping),
            Err(Error::DuplicateCaseId(id)) if id == "a"
        ));
        assert!(matches!(parse("case_id,label\n", &mapping), Err(Error::EmptyCohort)));
    }

    #[test]
    fn empty_score_cell_means_unscored() {
        let text = "case_id,label,who,cnn\na,1,0.3,0.9\nb,0,0.1,\n";
        let mapping = ColumnMapping::default().with_scores(["who", "cnn"]);
        let c = parse(text, &mapping).unwrap();
        assert_eq!(c.scored("who").unwrap().len(), 2);
        assert_eq!(c.scored("cnn").unwrap().len(), 1);
        let (a, b, l) = c.paired("who", "cnn").unwrap();
        assert_eq!((a, b, l), (vec![0.3], vec![0.9], vec![true]));
    }

    #[test]
    fn clinical_columns() {
        let text = "id,y,pct,n,m,l\na,1,5.5,2,0.5,1\nb,0,,,,\n";
        let mapping = ColumnMapping {
            case_id: "id".into(),
            label: "y".into(),
            pct_normal: Some("pct".into()),
            neutrophils: Some("n".into()),
            monocytes: Some("m".into()),
            lymphocytes: Some("l".into()),
            siri: Some("siri".into()),
            ..ColumnMapping::default()
        };
        let c = parse(text, &mapping).unwrap();
        assert_eq!(c.cases()[0].pct_normal, Some(5.5));
        assert_eq!(c.cases()[0].blood, Some(BloodPanel::new(2.0, 0.5, 1.0).unwrap()));
        assert!(c.cases()[1].blood.is_none());
        assert!(c.cases()[0].siri.is_none());

        let partial = "id,y,pct,n,m,l\na,1,5.5,2,,1\n";
        assert!(matches!(parse(partial, &mapping), Err(Error::MalformedValue { .. })));
        let over = "id,y,pct,n,m,l\na,1,101,2,1,1\n";
        assert!(matches!(parse(over, &mapping), Err(Error::MalformedValue { .. })));
    }

    #[test]
    fn imbalanced_class_split_prevalence() {
        let mut text = String::from("case_id,label\n");
        for i in 0..719 {
            text.push_str(&format!("img{i},{}\n", u8::from(i < 29)));
        }
        let c = parse(&text, &ColumnMapping::default()).unwrap();
        let p = prevalence(&c).unwrap();
        assert!((p - 29.0 / 719.0).abs() < 1e-15);
        assert!((p - 0.0403).abs() < 5e-5);
    }

    #[test]
    fn prevalence_examples() {
        let all = Cohort::new(vec![CaseRecord::new("a", true), CaseRecord::new("b", true)], Role::Evaluate).unwrap();
        assert_eq!(prevalence(&all).unwrap(), 1.0);
        let half: Vec<_> = (0..10).map(|i| CaseRecord::new(i.to_string(), i % 2 == 0)).collect();
        assert_eq!(prevalence(&Cohort::new(half, Role::Evaluate).unwrap()).unwrap(), 0.5);
    }

    #[test]
    fn disjoint_examples() {
        assert!(check_disjoint(&ids(&["a", "b"]), &ids(&["c", "d"])).is_empty());
        assert_eq!(check_disjoint(&ids(&["a", "b"]), &ids(&["b", "a", "c"])), vec!["a", "b"]);
        assert_eq!(check_disjoint(&ids(&["s1", "s2"]), &ids(&["s2", "s3"])), vec!["s2"]);
    }

    fn arb_cohort() -> impl Strategy<Value = Cohort> {
        prop::collection::vec(
            (
                any::<bool>(),
                prop::option::of(0.0f64..=100.0),
                prop::option::of((0.01f64..10.0, 0.0f64..3.0, 0.01f64..5.0)),
                prop::option::of(0.0f64..1.0),
                prop::option::of(0.0f64..=1.0),
            ),
            1..30,
        )
        .prop_map(|rows| {
            let cases = rows
                .into_iter()
                .enumerate()
                .map(|(i, (label, pct, blood, a, b))| {
                    let mut c = CaseRecord::new(format!("case-{i}"), label);
                    c.pct_normal = pct;
                    c.blood = blood.map(|(n, m, l)| BloodPanel::new(n, m, l).unwrap());
                    if let Some(a) = a {
                        c.scores.insert("model_a".into(), a);
                    }
                    if let Some(b) = b {
                        c.scores.insert("model_b".into(), b);
                    }
                    c
                })
                .collect();
            Cohort::new(cases, Role::Evaluate).unwrap()
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip(cohort in arb_cohort()) {
            let mut buf = Vec::new();
            let mapping = write_cohort(&cohort, &mut buf).unwrap();
            let back = read_cohort(buf.as_slice(), &mapping, Role::Evaluate).unwrap();
            prop_assert_eq!(back, cohort);
        }

        #[test]
        fn prevalence_complements_flip(cohort in arb_cohort()) {
            let p = prevalence(&cohort).unwrap();
            let q = prevalence(&cohort.flipped_labels()).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!((p + q - 1.0).abs() < 1e-12);
        }

        #[test]
        fn disjoint_is_symmetric(a in prop::collection::btree_set(0u8..20, 1..10), b in prop::collection::btree_set(0u8..20, 1..10)) {
            let ca = ids(&a.iter().map(|i| i.to_string()).collect::<Vec<_>>().iter().map(String::as_str).collect::<Vec<_>>());
            let cb = ids(&b.iter().map(|i| i.to_string()).collect::<Vec<_>>().iter().map(String::as_str).collect::<Vec<_>>());
            prop_assert_eq!(check_disjoint(&ca, &cb), check_disjoint(&cb, &ca));
        }
    }
}
