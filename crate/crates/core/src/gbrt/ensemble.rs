use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::tree::{fit_presorted, Presorted};
use super::{mse, FeatureMatrix, GbrtError, RegressionTree, TreeConfig};
use crate::seed::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of training rows drawn (without replacement) for each stage.
    pub subsample: f64,
    /// Only consumed when `subsample < 1`.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_stages: 500,
            learning_rate: 0.01,
            max_depth: 4,
            min_samples_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GbrtError> {
        let bad = |m: String| Err(GbrtError::InvalidConfig(m));
        if self.n_stages == 0 {
            return bad("n_stages must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!(
                "learning_rate {} not in (0, 1]",
                self.learning_rate
            ));
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1".into());
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be at least 1".into());
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!("subsample {} not in (0, 1]", self.subsample));
        }
        Ok(())
    }

    fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
        }
    }
}

/// `F(x) = f0 + learning_rate * Σ_m tree_m(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble {
    pub f0: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    pub feature_names: Vec<String>,
}

impl BoostedEnsemble {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64, GbrtError> {
        if x.len() < self.n_features() {
            return Err(GbrtError::MissingFeature {
                needed: self.n_features(),
                found: x.len(),
            });
        }
        Ok(self.predict_row_unchecked(x))
    }

    // Stage-by-stage accumulation, in the same order staged_deviance uses.
    pub(crate) fn predict_row_unchecked(&self, x: &[f64]) -> f64 {
        self.trees.iter().fold(self.f0, |acc, t| {
            acc + self.learning_rate * t.predict_row(x)
        })
    }

    /// Inspection document: `{f0, learning_rate, feature_names, trees: [{max_depth, root}]}`
    /// with nested `{feature, threshold, n_samples, impurity_decrease, left, right}`
    /// split records and `{value, n_samples}` leaves.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "f0": self.f0,
            "learning_rate": self.learning_rate,
            "feature_names": self.feature_names,
            "trees": self.trees.iter().map(RegressionTree::to_json).collect::<Vec<_>>(),
        })
    }
}

pub fn fit_ensemble(
    x: &FeatureMatrix,
    y: &[f64],
    feature_names: &[String],
    config: &TrainConfig,
) -> Result<BoostedEnsemble, GbrtError> {
    config.validate()?;
    if y.len() != x.n_rows() {
        return Err(GbrtError::LengthMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    if feature_names.len() != x.n_features() {
        return Err(GbrtError::LengthMismatch {
            expected: x.n_features(),
            found: feature_names.len(),
        });
    }
    if y.is_empty() {
        return Err(GbrtError::Empty);
    }

    let n = y.len();
    let f0 = y.iter().sum::<f64>() / n as f64;
    let presorted = Presorted::new(x);
    let mut current = vec![f0; n];
    let mut residuals = vec![0.0; n];
    let mut trees = Vec::with_capacity(config.n_stages);

    let draw = ((n as f64 * config.subsample).round() as usize).clamp(1, n);
    let mut rng = (draw < n).then(|| rng_from(config.seed));
    let mut mask = vec![true; n];

    for _ in 0..config.n_stages {
        for ((r, yi), fi) in residuals.iter_mut().zip(y).zip(&current) {
            *r = yi - fi;
        }
        let tree = match rng.as_mut() {
            None => fit_presorted(x, &residuals, &presorted, None, config.tree_config()),
            Some(rng) => {
                mask.iter_mut().for_each(|m| *m = false);
                for i in index::sample(rng, n, draw) {
                    mask[i] = true;
                }
                fit_presorted(x, &residuals, &presorted, Some(&mask), config.tree_config())
            }
        };
        for (fi, row) in current.iter_mut().zip(x.rows()) {
            *fi += config.learning_rate * tree.predict_row(row);
        }
        trees.push(tree);
    }

    Ok(BoostedEnsemble {
        f0,
        learning_rate: config.learning_rate,
        trees,
        feature_names: feature_names.to_vec(),
    })
}

pub fn predict_ensemble(
    ensemble: &BoostedEnsemble,
    x: &FeatureMatrix,
) -> Result<Vec<f64>, GbrtError> {
    if x.n_features() < ensemble.n_features() {
        return Err(GbrtError::MissingFeature {
            needed: ensemble.n_features(),
            found: x.n_features(),
        });
    }
    Ok(x.rows()
        .map(|r| ensemble.predict_row_unchecked(r))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageLoss {
    pub stage: usize,
    pub train_mse: f64,
    pub test_mse: f64,
}

/// Per-stage train/test MSE, stages numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub stages: Vec<StageLoss>,
}

impl LossCurve {
    /// Entry for 1-based `stage`.
    pub fn at(&self, stage: usize) -> Option<&StageLoss> {
        stage.checked_sub(1).and_then(|i| self.stages.get(i))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,train_mse,test_mse\n");
        for s in &self.stages {
            out.push_str(&format!("{},{},{}\n", s.stage, s.train_mse, s.test_mse));
        }
        out
    }
}

pub fn staged_deviance(
    ensemble: &BoostedEnsemble,
    train: (&FeatureMatrix, &[f64]),
    test: (&FeatureMatrix, &[f64]),
) -> Result<LossCurve, GbrtError> {
    for (x, y) in [train, test] {
        if x.n_rows() != y.len() {
            return Err(GbrtError::LengthMismatch {
                expected: x.n_rows(),
                found: y.len(),
            });
        }
        if x.n_features() < ensemble.n_features() {
            return Err(GbrtError::MissingFeature {
                needed: ensemble.n_features(),
                found: x.n_features(),
            });
        }
    }
    let mut train_pred = vec![ensemble.f0; train.1.len()];
    let mut test_pred = vec![ensemble.f0; test.1.len()];
    let mut stages = Vec::with_capacity(ensemble.trees.len());
    for (m, tree) in ensemble.trees.iter().enumerate() {
        for (x, pred) in [(train.0, &mut train_pred), (test.0, &mut test_pred)] {
            for (p, row) in pred.iter_mut().zip(x.rows()) {
                *p += ensemble.learning_rate * tree.predict_row(row);
            }
        }
        stages.push(StageLoss {
            stage: m + 1,
            train_mse: mse(train.1, &train_pred)?,
            test_mse: mse(test.1, &test_pred)?,
        });
    }
    Ok(LossCurve { stages })
}
