//! CART regression trees and squared-error gradient boosting.

mod ensemble;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::{
    fit_ensemble, predict_ensemble, staged_deviance, BoostedEnsemble, LossCurve, StageLoss,
    TrainConfig,
};
pub use tree::{best_split, fit_tree, Node, RegressionTree, SplitCandidate, TreeConfig};

#[derive(Debug, Error, PartialEq)]
pub enum GbrtError {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no samples")]
    Empty,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("input row has {found} features but the model needs {needed}")]
    MissingFeature { needed: usize, found: usize },
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_features: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_row_major(n_rows: usize, n_features: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_features, "matrix shape mismatch");
        Self {
            n_rows,
            n_features,
            data,
        }
    }

    /// Panics if rows are ragged.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n_features = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * n_features);
        for r in rows {
            assert_eq!(r.as_ref().len(), n_features, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self::from_row_major(rows.len(), n_features, data)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn get(&self, row: usize, feature: usize) -> f64 {
        self.data[row * self.n_features + feature]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, feature: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, feature)).collect()
    }

    /// Copy with column `feature` replaced by `values`.
    pub fn with_column(&self, feature: usize, values: &[f64]) -> FeatureMatrix {
        assert_eq!(values.len(), self.n_rows);
        let mut out = self.clone();
        for (i, &v) in values.iter().enumerate() {
            out.data[i * self.n_features + feature] = v;
        }
        out
    }

    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::from_row_major(indices.len(), self.n_features, data)
    }
}

/// Mean squared error `(1/n) Σ (y_i - ŷ_i)²`.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64, GbrtError> {
    if y.len() != y_hat.len() {
        return Err(GbrtError::LengthMismatch {
            expected: y.len(),
            found: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(GbrtError::Empty);
    }
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sse / y.len() as f64)
}
