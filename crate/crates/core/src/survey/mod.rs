//! Respondent tables, engagement composites and per-target regression views.

mod io;
mod split;
mod stats;
mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbrt::FeatureMatrix;

pub use io::{parse_survey_csv, write_survey_csv};
pub use split::{split, split_indices};
pub use stats::{descriptive_stats, summarize, ColumnStats, StatsTable};
pub use synth::{synthesize, MeasureSpec, SynthSpec};

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    Parse {
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error("row {row}, column `{column}`: value {value} is outside {allowed}")]
    OutOfRange {
        row: usize,
        column: &'static str,
        value: f64,
        allowed: &'static str,
    },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("survey table is empty")]
    Empty,
    #[error("composite engagement scores have not been computed")]
    CompositesMissing,
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("invalid synthesis spec: {0}")]
    InvalidSynth(String),
}

/// Every column a survey table can carry, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Column {
    Gender,
    AgeBand,
    Bl,
    BAct,
    BInt,
    BGro,
    CMgt,
    CCom,
    EInt,
    ESat,
    Be,
    Ce,
    Ee,
}

impl Column {
    pub const RAW: [Column; 10] = [
        Column::Gender,
        Column::AgeBand,
        Column::Bl,
        Column::BAct,
        Column::BInt,
        Column::BGro,
        Column::CMgt,
        Column::CCom,
        Column::EInt,
        Column::ESat,
    ];

    pub const MEASURES: [Column; 7] = [
        Column::BAct,
        Column::BInt,
        Column::BGro,
        Column::CMgt,
        Column::CCom,
        Column::EInt,
        Column::ESat,
    ];

    pub const COMPOSITES: [Column; 3] = [Column::Be, Column::Ce, Column::Ee];

    /// Lowercase CSV header name.
    pub fn key(self) -> &'static str {
        match self {
            Column::Gender => "gender",
            Column::AgeBand => "age_band",
            Column::Bl => "bl",
            Column::BAct => "b_act",
            Column::BInt => "b_int",
            Column::BGro => "b_gro",
            Column::CMgt => "c_mgt",
            Column::CCom => "c_com",
            Column::EInt => "e_int",
            Column::ESat => "e_sat",
            Column::Be => "be",
            Column::Ce => "ce",
            Column::Ee => "ee",
        }
    }

    /// Human-facing name used in reports and feature lists.
    pub fn label(self) -> &'static str {
        match self {
            Column::Gender => "Gender",
            Column::AgeBand => "Age",
            Column::Bl => "BL",
            Column::BAct => "B-Act",
            Column::BInt => "B-Int",
            Column::BGro => "B-Gro",
            Column::CMgt => "C-Mgt",
            Column::CCom => "C-Com",
            Column::EInt => "E-Int",
            Column::ESat => "E-Sat",
            Column::Be => "BE",
            Column::Ce => "CE",
            Column::Ee => "EE",
        }
    }

    pub fn from_label(label: &str) -> Option<Column> {
        Column::RAW
            .iter()
            .chain(Column::COMPOSITES.iter())
            .copied()
            .find(|c| c.label().eq_ignore_ascii_case(label) || c.key().eq_ignore_ascii_case(label))
    }

    pub fn is_composite(self) -> bool {
        matches!(self, Column::Be | Column::Ce | Column::Ee)
    }
}

/// Engagement dimension used as a regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Be,
    Ce,
    Ee,
}

impl Target {
    /// Canonical report order.
    pub const ALL: [Target; 3] = [Target::Be, Target::Ce, Target::Ee];

    pub fn column(self) -> Column {
        match self {
            Target::Be => Column::Be,
            Target::Ce => Column::Ce,
            Target::Ee => Column::Ee,
        }
    }

    pub fn key(self) -> &'static str {
        self.column().key()
    }

    pub fn label(self) -> &'static str {
        self.column().label()
    }

    pub fn parse(s: &str) -> Option<Target> {
        match s.to_ascii_lowercase().as_str() {
            "be" => Some(Target::Be),
            "ce" => Some(Target::Ce),
            "ee" => Some(Target::Ee),
            _ => None,
        }
    }

    /// Measures averaged into this composite.
    pub fn constituents(self) -> &'static [Column] {
        match self {
            Target::Be => &[Column::BAct, Column::BInt, Column::BGro],
            Target::Ce => &[Column::CMgt, Column::CCom],
            Target::Ee => &[Column::EInt, Column::ESat],
        }
    }

    /// Regression inputs for this target, in report order.
    pub fn features(self) -> &'static [Column] {
        use Column::*;
        match self {
            Target::Ce => &[Gender, AgeBand, Bl, BAct, BInt, BGro, EInt, ESat, Be, Ee],
            Target::Be => &[Gender, AgeBand, Bl, CMgt, CCom, EInt, ESat, Ce, Ee],
            Target::Ee => &[Gender, AgeBand, Bl, BAct, BInt, BGro, CMgt, CCom, Be, Ce],
        }
    }
}

/// One respondent. Measure scores are Likert aggregates in `[1, 7]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub gender: u8,
    pub age_band: u8,
    pub bl: u8,
    pub b_act: f64,
    pub b_int: f64,
    pub b_gro: f64,
    pub c_mgt: f64,
    pub c_com: f64,
    pub e_int: f64,
    pub e_sat: f64,
}

impl SurveyRecord {
    /// Raw value of a non-composite column; `None` for composites.
    pub fn get(&self, column: Column) -> Option<f64> {
        Some(match column {
            Column::Gender => f64::from(self.gender),
            Column::AgeBand => f64::from(self.age_band),
            Column::Bl => f64::from(self.bl),
            Column::BAct => self.b_act,
            Column::BInt => self.b_int,
            Column::BGro => self.b_gro,
            Column::CMgt => self.c_mgt,
            Column::CCom => self.c_com,
            Column::EInt => self.e_int,
            Column::ESat => self.e_sat,
            Column::Be | Column::Ce | Column::Ee => return None,
        })
    }

    fn mean_of(&self, columns: &[Column]) -> f64 {
        let sum: f64 = columns.iter().map(|&c| self.get(c).unwrap_or(0.0)).sum();
        sum / columns.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Composites {
    pub be: f64,
    pub ce: f64,
    pub ee: f64,
}

/// Ordered respondent records, optionally with derived composites.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurveyTable {
    records: Vec<SurveyRecord>,
    composites: Option<Vec<Composites>>,
}

impl SurveyTable {
    pub fn from_records(records: Vec<SurveyRecord>) -> Self {
        Self {
            records,
            composites: None,
        }
    }

    pub fn records(&self) -> &[SurveyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn composites_present(&self) -> bool {
        self.composites.is_some()
    }

    pub fn composites(&self) -> Option<&[Composites]> {
        self.composites.as_deref()
    }

    pub fn value(&self, row: usize, column: Column) -> Option<f64> {
        match column {
            Column::Be => self.composites.as_ref().map(|c| c[row].be),
            Column::Ce => self.composites.as_ref().map(|c| c[row].ce),
            Column::Ee => self.composites.as_ref().map(|c| c[row].ee),
            raw => self.records[row].get(raw),
        }
    }

    pub fn column(&self, column: Column) -> Option<Vec<f64>> {
        if column.is_composite() && !self.composites_present() {
            return None;
        }
        (0..self.len()).map(|r| self.value(r, column)).collect()
    }

    /// Columns currently available, in canonical order.
    pub fn columns(&self) -> Vec<Column> {
        let mut cols = Column::RAW.to_vec();
        if self.composites_present() {
            cols.extend(Column::COMPOSITES);
        }
        cols
    }

    /// Rows at `indices`, in the order given.
    pub fn select(&self, indices: &[usize]) -> SurveyTable {
        SurveyTable {
            records: indices.iter().map(|&i| self.records[i]).collect(),
            composites: self
                .composites
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }
}

/// Fills BE/CE/EE with the arithmetic mean of their measures.
pub fn compute_composites(table: &SurveyTable) -> SurveyTable {
    let composites = table
        .records
        .iter()
        .map(|r| Composites {
            be: r.mean_of(Target::Be.constituents()),
            ce: r.mean_of(Target::Ce.constituents()),
            ee: r.mean_of(Target::Ee.constituents()),
        })
        .collect();
    SurveyTable {
        records: table.records.clone(),
        composites: Some(composites),
    }
}

/// Features and target for one engagement dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub target: Target,
    pub features: Vec<Column>,
    pub x: FeatureMatrix,
    pub y: Vec<f64>,
}

impl RegressionProblem {
    pub fn feature_names(&self) -> Vec<String> {
        self.features
            .iter()
            .map(|c| c.label().to_string())
            .collect()
    }
}

pub fn target_view(table: &SurveyTable, target: Target) -> Result<RegressionProblem, SurveyError> {
    if !table.composites_present() {
        return Err(SurveyError::CompositesMissing);
    }
    let features = target.features().to_vec();
    let mut data = Vec::with_capacity(table.len() * features.len());
    for row in 0..table.len() {
        for &col in &features {
            data.push(table.value(row, col).expect("composites checked above"));
        }
    }
    let y = table
        .column(target.column())
        .expect("composites checked above");
    Ok(RegressionProblem {
        target,
        x: FeatureMatrix::from_row_major(table.len(), features.len(), data),
        features,
        y,
    })
}

/// The three regression problems, in BE, CE, EE order.
pub fn make_target_views(table: &SurveyTable) -> Result<[RegressionProblem; 3], SurveyError> {
    Ok([
        target_view(table, Target::Be)?,
        target_view(table, Target::Ce)?,
        target_view(table, Target::Ee)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(bl: u8, scores: [f64; 7]) -> SurveyRecord {
        SurveyRecord {
            gender: 1,
            age_band: 1,
            bl,
            b_act: scores[0],
            b_int: scores[1],
            b_gro: scores[2],
            c_mgt: scores[3],
            c_com: scores[4],
            e_int: scores[5],
            e_sat: scores[6],
        }
    }

    #[test]
    fn equal_measures_give_equal_composite() {
        let t = SurveyTable::from_records(vec![record(0, [4.0, 4.0, 4.0, 2.0, 6.0, 5.0, 7.0])]);
        let t = compute_composites(&t);
        let c = t.composites().unwrap()[0];
        assert_eq!(c.be, 4.0);
        assert_eq!(c.ce, 4.0);
        assert_eq!(c.ee, 6.0);
    }

    #[test]
    fn composite_of_column_means_matches_reported_means() {
        let be = (4.6693 + 4.6614 + 4.5748) / 3.0;
        assert!((be - 4.6352_f64).abs() < 1e-4, "{be}");
        let ee = (4.8661 + 4.669) / 2.0;
        assert!((ee - 4.7676_f64).abs() < 1e-3, "{ee}");
    }

    #[test]
    fn views_follow_setup_table() {
        let t = compute_composites(&SurveyTable::from_records(vec![record(1, [5.0; 7])]));
        let [be, ce, ee] = make_target_views(&t).unwrap();
        assert_eq!(
            ce.feature_names(),
            ["Gender", "Age", "BL", "B-Act", "B-Int", "B-Gro", "E-Int", "E-Sat", "BE", "EE"]
        );
        assert_eq!(
            be.feature_names(),
            ["Gender", "Age", "BL", "C-Mgt", "C-Com", "E-Int", "E-Sat", "CE", "EE"]
        );
        assert_eq!(ee.x.n_features(), 10);
        for view in [&be, &ce, &ee] {
            assert!(!view.features.contains(&view.target.column()));
            for c in view.target.constituents() {
                assert!(!view.features.contains(c));
            }
        }
    }

    #[test]
    fn views_require_composites() {
        let t = SurveyTable::from_records(vec![record(1, [5.0; 7])]);
        assert!(matches!(
            make_target_views(&t),
            Err(SurveyError::CompositesMissing)
        ));
    }

    #[test]
    fn labels_round_trip() {
        for c in Column::RAW.iter().chain(Column::COMPOSITES.iter()) {
            assert_eq!(Column::from_label(c.label()), Some(*c));
            assert_eq!(Column::from_label(c.key()), Some(*c));
        }
    }
}
