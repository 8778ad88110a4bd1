//! Analytic hierarchy process over a ranked feature list.
//!
//! A ranking is cut into importance tiers, every tier pair gets a Saaty
//! intensity, and the resulting reciprocal matrix is reduced to weights by
//! the row geometric-mean ("square root") method. Consistency is checked
//! through λmax, CI and CR.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// CR at or above this is rejected.
pub const CR_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum AhpError {
    #[error("empty ranking")]
    EmptyRanking,
    #[error("{preset} needs at least {needed} features, got {found}")]
    TooFewFeatures {
        preset: &'static str,
        needed: usize,
        found: usize,
    },
    #[error("scale {value} between tiers {upper} and {lower} is outside 2..=9")]
    ScaleOutOfRange {
        upper: usize,
        lower: usize,
        value: u8,
    },
    #[error("invalid tier layout: {0}")]
    InvalidTiers(String),
    #[error("invalid pairwise matrix: {0}")]
    InvalidMatrix(String),
    #[error("weights must be positive and match the matrix size")]
    InvalidWeights,
    #[error("consistency index needs n >= 2, got {0}")]
    TooSmall(usize),
    #[error("no random index for n = {0}")]
    NoRandomIndex(usize),
    #[error("pairwise matrix is inconsistent: CR = {cr:.4} >= {CR_THRESHOLD}")]
    Inconsistent { cr: f64, result: Box<AhpResult> },
}

/// Saaty's verbal labels for intensities 1 through 9.
pub fn saaty_label(intensity: u8) -> Option<&'static str> {
    Some(match intensity {
        1 => "Equal",
        2 => "Weak",
        3 => "Moderate",
        4 => "Moderate plus",
        5 => "Strong",
        6 => "Strong plus",
        7 => "Demonstrate",
        8 => "Demonstrate plus",
        9 => "Extremely preferred",
        _ => return None,
    })
}

/// True when `value` is an integer intensity 1..=9 or the reciprocal of one.
pub fn is_saaty_value(value: f64) -> bool {
    (1..=9u8).any(|k| {
        let k = f64::from(k);
        (value - k).abs() < 1e-12 || (value - 1.0 / k).abs() < 1e-12
    })
}

/// Upper-triangular tier-pair intensities; `rows[i][j - i - 1]` is the
/// intensity of tier `i` over tier `j > i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScaleTable {
    rows: Vec<Vec<u8>>,
}

impl ScaleTable {
    pub fn new(rows: Vec<Vec<u8>>) -> Self {
        Self { rows }
    }

    pub fn get(&self, upper: usize, lower: usize) -> Option<u8> {
        if lower <= upper {
            return None;
        }
        self.rows.get(upper)?.get(lower - upper - 1).copied()
    }

    /// Checks shape, range and monotonicity for `n_tiers` tiers.
    pub fn validate(&self, n_tiers: usize) -> Result<(), AhpError> {
        if self.rows.len() + 1 < n_tiers {
            return Err(AhpError::InvalidTiers(format!(
                "scale table has {} rows for {} tiers",
                self.rows.len(),
                n_tiers
            )));
        }
        for i in 0..n_tiers {
            let mut prev = 0;
            for j in i + 1..n_tiers {
                let value = self.get(i, j).ok_or_else(|| {
                    AhpError::InvalidTiers(format!("missing scale for tiers {i} and {j}"))
                })?;
                if !(2..=9).contains(&value) {
                    return Err(AhpError::ScaleOutOfRange {
                        upper: i,
                        lower: j,
                        value,
                    });
                }
                if value < prev {
                    return Err(AhpError::InvalidTiers(format!(
                        "scale from tier {i} decreases toward lower tiers"
                    )));
                }
                prev = value;
            }
        }
        Ok(())
    }
}

/// How a ranking is cut into tiers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AhpPreset {
    /// top-1 | middle | bottom-1, scales 7 / 9 / 3.
    BeStyle,
    /// top-1 | middle | second-from-bottom | bottom-1, scales 7 8 9 / 2 3 / 3.
    CeEeStyle,
    /// Tiers start at each of `cuts` (ranking positions, ascending, first > 0).
    Custom {
        cuts: Vec<usize>,
        scales: ScaleTable,
    },
}

impl AhpPreset {
    pub fn name(&self) -> &'static str {
        match self {
            AhpPreset::BeStyle => "be_style",
            AhpPreset::CeEeStyle => "ce_ee_style",
            AhpPreset::Custom { .. } => "custom",
        }
    }

    pub fn parse(name: &str) -> Option<AhpPreset> {
        match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "be" | "be_style" => Some(AhpPreset::BeStyle),
            "ce_ee" | "ce_ee_style" | "ce" | "ee" => Some(AhpPreset::CeEeStyle),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TierAssignment {
    /// Tier 0 is the most important. Only the middle tier of `be_style`
    /// may be empty.
    pub tiers: Vec<Vec<String>>,
    pub scales: ScaleTable,
}

pub fn assign_tiers<S: AsRef<str>>(
    ranking: &[S],
    preset: &AhpPreset,
) -> Result<TierAssignment, AhpError> {
    if ranking.is_empty() {
        return Err(AhpError::EmptyRanking);
    }
    let names: Vec<String> = ranking.iter().map(|s| s.as_ref().to_string()).collect();
    let n = names.len();
    let need = |preset: &'static str, needed: usize| {
        if n < needed {
            Err(AhpError::TooFewFeatures {
                preset,
                needed,
                found: n,
            })
        } else {
            Ok(())
        }
    };
    let (tiers, scales) = match preset {
        AhpPreset::BeStyle => {
            need("be_style", 2)?;
            (
                vec![
                    names[..1].to_vec(),
                    names[1..n - 1].to_vec(),
                    names[n - 1..].to_vec(),
                ],
                ScaleTable::new(vec![vec![7, 9], vec![3]]),
            )
        }
        AhpPreset::CeEeStyle => {
            need("ce_ee_style", 4)?;
            (
                vec![
                    names[..1].to_vec(),
                    names[1..n - 2].to_vec(),
                    names[n - 2..n - 1].to_vec(),
                    names[n - 1..].to_vec(),
                ],
                ScaleTable::new(vec![vec![7, 8, 9], vec![2, 3], vec![3]]),
            )
        }
        AhpPreset::Custom { cuts, scales } => {
            if cuts.first() == Some(&0)
                || cuts.windows(2).any(|w| w[0] >= w[1])
                || cuts.last().is_some_and(|&c| c >= n)
            {
                return Err(AhpError::InvalidTiers(format!(
                    "cuts {cuts:?} must be strictly increasing within 1..{n}"
                )));
            }
            let mut bounds = vec![0];
            bounds.extend(cuts);
            bounds.push(n);
            let tiers = bounds
                .windows(2)
                .map(|w| names[w[0]..w[1]].to_vec())
                .collect();
            (tiers, scales.clone())
        }
    };
    scales.validate(tiers.len())?;
    Ok(TierAssignment { tiers, scales })
}

/// Positive reciprocal comparison matrix with row/column labels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseMatrix {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    /// Validates squareness, unit diagonal, positivity and reciprocity.
    #[allow(clippy::needless_range_loop)]
    pub fn new(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, AhpError> {
        let n = labels.len();
        if n == 0 || values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(AhpError::InvalidMatrix(format!(
                "expected a {n}x{n} matrix"
            )));
        }
        for i in 0..n {
            if (values[i][i] - 1.0).abs() > 1e-12 {
                return Err(AhpError::InvalidMatrix(format!(
                    "diagonal entry {i} is not 1"
                )));
            }
            for j in 0..n {
                let a = values[i][j];
                if !(a.is_finite() && a > 0.0) {
                    return Err(AhpError::InvalidMatrix(format!(
                        "entry ({i}, {j}) = {a} is not positive"
                    )));
                }
                if (a * values[j][i] - 1.0).abs() > 1e-12 {
                    return Err(AhpError::InvalidMatrix(format!(
                        "entries ({i}, {j}) and ({j}, {i}) are not reciprocal"
                    )));
                }
            }
        }
        Ok(Self { labels, values })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Table layout with reciprocal intensities written as `1/k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Feature");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.values) {
            out.push_str(label);
            for &a in row {
                out.push(',');
                out.push_str(&format_entry(a));
            }
            out.push('\n');
        }
        out
    }
}

fn format_entry(a: f64) -> String {
    let k = a.round();
    if (a - k).abs() < 1e-9 {
        return format!("{}", k as i64);
    }
    let inv = (1.0 / a).round();
    if (1.0 / a - inv).abs() < 1e-9 {
        return format!("1/{}", inv as i64);
    }
    a.to_string()
}

pub fn build_pairwise(tiers: &TierAssignment) -> Result<PairwiseMatrix, AhpError> {
    tiers.scales.validate(tiers.tiers.len())?;
    let members: Vec<(usize, &String)> = tiers
        .tiers
        .iter()
        .enumerate()
        .flat_map(|(t, names)| names.iter().map(move |n| (t, n)))
        .collect();
    let values = members
        .iter()
        .map(|&(ti, _)| {
            members
                .iter()
                .map(|&(tj, _)| match ti.cmp(&tj) {
                    std::cmp::Ordering::Equal => 1.0,
                    std::cmp::Ordering::Less => f64::from(tiers.scales.get(ti, tj).unwrap()),
                    std::cmp::Ordering::Greater => {
                        1.0 / f64::from(tiers.scales.get(tj, ti).unwrap())
                    }
                })
                .collect()
        })
        .collect();
    PairwiseMatrix::new(
        members.into_iter().map(|(_, n)| n.clone()).collect(),
        values,
    )
}

/// Row geometric means `(Π_j a_ij)^(1/n)`, accumulated in log space.
pub fn geometric_mean_weights(matrix: &PairwiseMatrix) -> Result<Vec<f64>, AhpError> {
    let n = matrix.len() as f64;
    matrix
        .values
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if row.iter().any(|&a| a.is_nan() || a <= 0.0) {
                return Err(AhpError::InvalidMatrix(format!(
                    "row {i} has a non-positive entry"
                )));
            }
            Ok((row.iter().map(|a| a.ln()).sum::<f64>() / n).exp())
        })
        .collect()
}

/// Percentages `100 w_i / Σ w`.
pub fn normalize_weights(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| 100.0 * w / total).collect()
}

/// `(1/n) Σ_i (A w)_i / w_i` with `w` rescaled to sum to 1.
pub fn lambda_max(matrix: &PairwiseMatrix, weights: &[f64]) -> Result<f64, AhpError> {
    if weights.len() != matrix.len() || weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
        return Err(AhpError::InvalidWeights);
    }
    let total: f64 = weights.iter().sum();
    let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
    let sum: f64 = matrix
        .values
        .iter()
        .zip(&w)
        .map(|(row, wi)| row.iter().zip(&w).map(|(a, wj)| a * wj).sum::<f64>() / wi)
        .sum();
    Ok(sum / matrix.len() as f64)
}

pub fn consistency_index(lambda_max: f64, n: usize) -> Result<f64, AhpError> {
    if n < 2 {
        return Err(AhpError::TooSmall(n));
    }
    Ok((lambda_max - n as f64) / (n as f64 - 1.0))
}

/// Saaty's random consistency index.
pub fn random_index(n: usize) -> Option<f64> {
    Some(match n {
        1 | 2 => 0.0,
        3 => 0.58,
        4 => 0.90,
        5 => 1.12,
        6 => 1.24,
        7 => 1.32,
        8 => 1.41,
        9 => 1.45,
        10 => 1.49,
        _ => return None,
    })
}

/// `CI / RI(n)`, defined as 0 for n <= 2.
pub fn consistency_ratio(ci: f64, n: usize) -> Result<f64, AhpError> {
    if n <= 2 {
        return Ok(0.0);
    }
    random_index(n)
        .map(|ri| ci / ri)
        .ok_or(AhpError::NoRandomIndex(n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AhpResult {
    pub labels: Vec<String>,
    /// Unnormalized row geometric means.
    pub weight_scores: Vec<f64>,
    pub percentages: Vec<f64>,
    pub lambda_max: f64,
    pub ci: f64,
    pub cr: f64,
    pub consistent: bool,
}

impl AhpResult {
    pub fn weight_of(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.weight_scores[i])
    }

    pub fn top(&self) -> Option<&str> {
        let mut best: Option<usize> = None;
        for (i, w) in self.weight_scores.iter().enumerate() {
            if best.is_none_or(|b| *w > self.weight_scores[b]) {
                best = Some(i);
            }
        }
        best.map(|i| self.labels[i].as_str())
    }
}

/// Perron vector of a positive matrix, scaled to sum 1, by repeated
/// squaring: `A^(2^k)` tends to a rank-one matrix whose row sums are
/// proportional to the principal eigenvector.
pub fn principal_eigenvector(matrix: &PairwiseMatrix) -> Vec<f64> {
    let n = matrix.len();
    let mut power: Vec<Vec<f64>> = matrix.values.clone();
    let mut vector = vec![1.0 / n as f64; n];
    for _ in 0..64 {
        let mut squared = vec![vec![0.0; n]; n];
        for (row, out) in power.iter().zip(squared.iter_mut()) {
            for (a, inner) in row.iter().zip(&power) {
                for (o, b) in out.iter_mut().zip(inner) {
                    *o += a * b;
                }
            }
        }
        let total: f64 = squared.iter().flatten().sum();
        squared.iter_mut().flatten().for_each(|a| *a /= total);
        let next: Vec<f64> = squared.iter().map(|r| r.iter().sum()).collect();
        let delta: f64 = next.iter().zip(&vector).map(|(a, b)| (a - b).abs()).sum();
        power = squared;
        vector = next;
        if delta < 1e-15 {
            break;
        }
    }
    vector
}

/// Weights and consistency measures of a matrix, without rejecting it.
/// Weights are row geometric means; λmax is the principal eigenvalue.
pub fn assess(matrix: &PairwiseMatrix) -> Result<AhpResult, AhpError> {
    let n = matrix.len();
    let weight_scores = geometric_mean_weights(matrix)?;
    let percentages = normalize_weights(&weight_scores);
    let (lambda, ci, cr) = if n == 1 {
        (1.0, 0.0, 0.0)
    } else {
        let lambda = lambda_max(matrix, &principal_eigenvector(matrix))?;
        let ci = consistency_index(lambda, n)?;
        (lambda, ci, consistency_ratio(ci, n)?)
    };
    Ok(AhpResult {
        labels: matrix.labels.clone(),
        weight_scores,
        percentages,
        lambda_max: lambda,
        ci,
        cr,
        consistent: cr < CR_THRESHOLD,
    })
}

/// Tiers, matrix, weights and consistency in one step; rejects CR >= 0.1.
pub fn evaluate<S: AsRef<str>>(
    ranking: &[S],
    preset: &AhpPreset,
) -> Result<(PairwiseMatrix, AhpResult), AhpError> {
    let matrix = build_pairwise(&assign_tiers(ranking, preset)?)?;
    let result = assess(&matrix)?;
    if !result.consistent {
        return Err(AhpError::Inconsistent {
            cr: result.cr,
            result: Box::new(result),
        });
    }
    Ok((matrix, result))
}
