//! Mean-decrease-impurity and permutation feature importance, and the
//! consensus ranking built from both.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbrt::{predict_ensemble, BoostedEnsemble, FeatureMatrix, GbrtError, Node};
use crate::seed::{derive_seed, rng_from};

/// Method ranks further apart than this are flagged.
pub const DISAGREEMENT_GAP: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum ImportanceError {
    #[error("ensemble has no trees")]
    NotFitted,
    #[error("permutation importance needs at least 2 test rows, got {0}")]
    TooFewRows(usize),
    #[error("test target has zero variance, so r2 is undefined; use the neg_mse scorer")]
    DegenerateScorer,
    #[error("importance vectors cover different features")]
    FeatureMismatch,
    #[error("invalid permutation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] GbrtError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    Mdi,
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceVector {
    pub method: ImportanceMethod,
    pub features: Vec<String>,
    pub scores: Vec<f64>,
    /// Set when no tree splits anywhere; scores are then all zero.
    pub all_zero: bool,
}

impl ImportanceVector {
    pub fn score(&self, feature: &str) -> Option<f64> {
        self.features
            .iter()
            .position(|f| f == feature)
            .map(|i| self.scores[i])
    }

    pub fn argmax(&self) -> Option<&str> {
        let mut best: Option<usize> = None;
        for (i, s) in self.scores.iter().enumerate() {
            if best.is_none_or(|b| *s > self.scores[b]) {
                best = Some(i);
            }
        }
        best.map(|i| self.features[i].as_str())
    }
}

/// Impurity importance: per feature, the sum over every split node of
/// `n_node / n_root * impurity_decrease`, averaged over trees and scaled to sum to 1.
pub fn mdi(ensemble: &BoostedEnsemble) -> Result<ImportanceVector, ImportanceError> {
    if ensemble.trees.is_empty() {
        return Err(ImportanceError::NotFitted);
    }
    let mut totals = vec![0.0; ensemble.n_features()];
    for tree in &ensemble.trees {
        let n_root = tree.root().n_samples() as f64;
        for node in tree.nodes() {
            if let Node::Split {
                feature,
                n_samples,
                impurity_decrease,
                ..
            } = *node
            {
                totals[feature] += n_samples as f64 / n_root * impurity_decrease;
            }
        }
    }
    let n_trees = ensemble.trees.len() as f64;
    totals.iter_mut().for_each(|t| *t /= n_trees);
    let sum: f64 = totals.iter().sum();
    let all_zero = sum <= 0.0;
    if !all_zero {
        totals.iter_mut().for_each(|t| *t /= sum);
    }
    Ok(ImportanceVector {
        method: ImportanceMethod::Mdi,
        features: ensemble.feature_names.clone(),
        scores: totals,
        all_zero,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    R2,
    NegMse,
}

impl Scorer {
    fn score(self, y: &[f64], pred: &[f64]) -> f64 {
        let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
        match self {
            Scorer::NegMse => -sse / y.len() as f64,
            Scorer::R2 => 1.0 - sse / total_sum_of_squares(y),
        }
    }
}

fn total_sum_of_squares(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean) * (v - mean)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermutationConfig {
    pub repeats: usize,
    pub seed: u64,
    pub scorer: Scorer,
}

impl Default for PermutationConfig {
    fn default() -> Self {
        Self {
            repeats: 10,
            seed: 0,
            scorer: Scorer::R2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationOutcome {
    pub importance: ImportanceVector,
    /// Score on the intact test data.
    pub baseline: f64,
    /// `permuted[j][k]`: score after the k-th shuffle of feature j.
    pub permuted: Vec<Vec<f64>>,
}

impl PermutationOutcome {
    /// Long format: `feature,repetition,baseline,permuted,drop`.
    pub fn repeats_csv(&self) -> String {
        let mut out = String::from("feature,repetition,baseline,permuted,drop\n");
        for (name, scores) in self.importance.features.iter().zip(&self.permuted) {
            for (k, s) in scores.iter().enumerate() {
                out.push_str(&format!(
                    "{name},{},{},{s},{}\n",
                    k + 1,
                    self.baseline,
                    self.baseline - s
                ));
            }
        }
        out
    }
}

/// `i_j = s - (1/K) Σ_k s_{k,j}`, where `s_{k,j}` scores the test set after
/// the k-th shuffle of column j. Each (feature, repetition) pair draws from
/// its own stream derived from `config.seed`, so the result does not depend
/// on scheduling.
pub fn permutation_importance(
    ensemble: &BoostedEnsemble,
    x_test: &FeatureMatrix,
    y_test: &[f64],
    config: &PermutationConfig,
) -> Result<PermutationOutcome, ImportanceError> {
    if ensemble.trees.is_empty() {
        return Err(ImportanceError::NotFitted);
    }
    if config.repeats == 0 {
        return Err(ImportanceError::InvalidConfig(
            "repeats must be at least 1".into(),
        ));
    }
    if y_test.len() != x_test.n_rows() {
        return Err(GbrtError::LengthMismatch {
            expected: x_test.n_rows(),
            found: y_test.len(),
        }
        .into());
    }
    if y_test.len() < 2 {
        return Err(ImportanceError::TooFewRows(y_test.len()));
    }
    if config.scorer == Scorer::R2 && total_sum_of_squares(y_test) == 0.0 {
        return Err(ImportanceError::DegenerateScorer);
    }

    let baseline = config
        .scorer
        .score(y_test, &predict_ensemble(ensemble, x_test)?);
    let permuted: Vec<Vec<f64>> = (0..ensemble.n_features())
        .into_par_iter()
        .map(|j| {
            let column = x_test.column(j);
            (0..config.repeats)
                .map(|k| {
                    let seed = derive_seed(
                        config.seed,
                        &["permutation", &j.to_string(), &k.to_string()],
                    );
                    let mut shuffled = column.clone();
                    shuffled.shuffle(&mut rng_from(seed));
                    let pred = predict_ensemble(ensemble, &x_test.with_column(j, &shuffled))?;
                    Ok(config.scorer.score(y_test, &pred))
                })
                .collect::<Result<Vec<f64>, GbrtError>>()
        })
        .collect::<Result<_, _>>()?;

    // mean of per-repetition drops, so an untouched feature gives exactly 0
    let scores = permuted
        .iter()
        .map(|reps| reps.iter().map(|s| baseline - s).sum::<f64>() / reps.len() as f64)
        .collect();
    Ok(PermutationOutcome {
        importance: ImportanceVector {
            method: ImportanceMethod::Permutation,
            features: ensemble.feature_names.clone(),
            scores,
            all_zero: false,
        },
        baseline,
        permuted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankEntry {
    pub feature: String,
    pub mdi: f64,
    pub permutation: f64,
    pub mdi_rank: usize,
    pub perm_rank: usize,
    pub avg_rank: f64,
    pub disagreement: bool,
}

/// Features from most to least important, with per-method detail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    /// Ranked order, most important first.
    pub entries: Vec<RankEntry>,
}

impl Ranking {
    pub fn order(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.feature.as_str()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("feature,mdi,permutation,mdi_rank,perm_rank,avg_rank,disagreement_flag\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.feature,
                e.mdi,
                e.permutation,
                e.mdi_rank,
                e.perm_rank,
                e.avg_rank,
                u8::from(e.disagreement)
            ));
        }
        out
    }
}

/// Dense descending ranks starting at 1; equal scores share a rank.
fn dense_ranks(scores: &[f64]) -> Vec<usize> {
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    scores
        .iter()
        .map(|s| distinct.iter().position(|d| d == s).unwrap_or(0) + 1)
        .collect()
}

/// Orders by mean of the two dense ranks; ties go to the larger MDI score,
/// then to the earlier feature.
pub fn combined_ranking(
    mdi: &ImportanceVector,
    perm: &ImportanceVector,
) -> Result<Ranking, ImportanceError> {
    if mdi.features != perm.features {
        return Err(ImportanceError::FeatureMismatch);
    }
    let mdi_ranks = dense_ranks(&mdi.scores);
    let perm_ranks = dense_ranks(&perm.scores);
    let mut entries: Vec<(usize, RankEntry)> = mdi
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            (
                i,
                RankEntry {
                    feature: f.clone(),
                    mdi: mdi.scores[i],
                    permutation: perm.scores[i],
                    mdi_rank: mdi_ranks[i],
                    perm_rank: perm_ranks[i],
                    avg_rank: (mdi_ranks[i] + perm_ranks[i]) as f64 / 2.0,
                    disagreement: mdi_ranks[i].abs_diff(perm_ranks[i]) > DISAGREEMENT_GAP,
                },
            )
        })
        .collect();
    entries.sort_by(|(ia, a), (ib, b)| {
        a.avg_rank
            .total_cmp(&b.avg_rank)
            .then(b.mdi.total_cmp(&a.mdi))
            .then(ia.cmp(ib))
    });
    Ok(Ranking {
        entries: entries.into_iter().map(|(_, e)| e).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbrt::{fit_ensemble, RegressionTree, TrainConfig};

    fn vector(method: ImportanceMethod, pairs: &[(&str, f64)]) -> ImportanceVector {
        ImportanceVector {
            method,
            features: pairs.iter().map(|p| p.0.to_string()).collect(),
            scores: pairs.iter().map(|p| p.1).collect(),
            all_zero: false,
        }
    }

    fn ensemble_of(trees: Vec<RegressionTree>, n_features: usize) -> BoostedEnsemble {
        BoostedEnsemble {
            f0: 0.0,
            learning_rate: 1.0,
            trees,
            feature_names: (0..n_features).map(|i| format!("x{i}")).collect(),
        }
    }

    /// Root splits on x0 with decrease 8 over 8 rows; its left child splits
    /// on x1 with decrease 2 over 4 rows.
    fn hand_tree() -> RegressionTree {
        RegressionTree::from_nodes(
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    n_samples: 8,
                    impurity_decrease: 8.0,
                    left: 1,
                    right: 2,
                },
                Node::Split {
                    feature: 1,
                    threshold: 0.5,
                    n_samples: 4,
                    impurity_decrease: 2.0,
                    left: 3,
                    right: 4,
                },
                Node::Leaf {
                    value: 1.0,
                    n_samples: 4,
                },
                Node::Leaf {
                    value: -1.0,
                    n_samples: 2,
                },
                Node::Leaf {
                    value: 0.0,
                    n_samples: 2,
                },
            ],
            2,
            2,
        )
    }

    #[test]
    fn hand_weighted_tree() {
        let imp = mdi(&ensemble_of(vec![hand_tree()], 2)).unwrap();
        assert!((imp.scores[0] - 8.0 / 9.0).abs() < 1e-12);
        assert!((imp.scores[1] - 1.0 / 9.0).abs() < 1e-12);
        assert_eq!(imp.argmax(), Some("x0"));
    }

    #[test]
    fn single_feature_gets_all_importance() {
        let x = FeatureMatrix::from_rows(&[[0.0, 5.0], [1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]);
        let y = [1.0, 2.0, 4.0, 8.0];
        let names = vec!["a".to_string(), "b".to_string()];
        let ens = fit_ensemble(
            &x,
            &y,
            &names,
            &TrainConfig {
                n_stages: 20,
                learning_rate: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        let imp = mdi(&ens).unwrap();
        assert_eq!(imp.scores, vec![1.0, 0.0]);
    }

    #[test]
    fn stump_free_ensemble_is_flagged() {
        let imp = mdi(&ensemble_of(vec![RegressionTree::leaf(0.0, 4, 3)], 3)).unwrap();
        assert!(imp.all_zero);
        assert_eq!(imp.scores, vec![0.0; 3]);
        assert_eq!(
            mdi(&ensemble_of(vec![], 3)),
            Err(ImportanceError::NotFitted)
        );
    }

    fn stump_on_x0() -> BoostedEnsemble {
        let tree = RegressionTree::from_nodes(
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    n_samples: 4,
                    impurity_decrease: 1.0,
                    left: 1,
                    right: 2,
                },
                Node::Leaf {
                    value: 0.0,
                    n_samples: 2,
                },
                Node::Leaf {
                    value: 1.0,
                    n_samples: 2,
                },
            ],
            1,
            2,
        );
        ensemble_of(vec![tree], 2)
    }

    #[test]
    fn separable_stump_enumerated() {
        // Test rows (x0, x1) -> y: (0,0)->0, (0,1)->0, (1,0)->1, (1,1)->1.
        // Over the 4!=24 orderings of x0 the expected r2 after shuffling is
        // the average over orderings; enumerate it and compare with K large.
        let x = FeatureMatrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let ens = stump_on_x0();

        let perms = permutations(&[0.0, 0.0, 1.0, 1.0]);
        let mean_r2: f64 = perms
            .iter()
            .map(|p| {
                let sse: f64 = p.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
                1.0 - sse / 1.0
            })
            .sum::<f64>()
            / perms.len() as f64;
        // every shuffle keeps two zeros and two ones, so E[sse] = 4 * P(mismatch) = 2
        assert!((mean_r2 + 1.0).abs() < 1e-12);

        let out = permutation_importance(
            &ens,
            &x,
            &y,
            &PermutationConfig {
                repeats: 4000,
                seed: 1,
                scorer: Scorer::R2,
            },
        )
        .unwrap();
        assert_eq!(out.baseline, 1.0);
        let i0 = out.importance.scores[0];
        assert!(i0 > 0.0);
        assert!((i0 - (1.0 - mean_r2)).abs() < 0.1, "{i0}");
        assert_eq!(out.importance.scores[1], 0.0);
    }

    fn permutations(values: &[f64]) -> Vec<Vec<f64>> {
        if values.len() <= 1 {
            return vec![values.to_vec()];
        }
        let mut out = Vec::new();
        for i in 0..values.len() {
            let mut rest = values.to_vec();
            let head = rest.remove(i);
            for mut tail in permutations(&rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }

    #[test]
    fn unused_feature_scores_exactly_zero_for_any_seed() {
        let x =
            FeatureMatrix::from_rows(&[[0.0, 3.0], [0.2, 1.0], [0.9, 2.0], [1.0, 7.0], [0.4, 0.5]]);
        let y = [0.1, 0.3, 0.8, 1.1, 0.35];
        for seed in 0..20 {
            for scorer in [Scorer::R2, Scorer::NegMse] {
                let out = permutation_importance(
                    &stump_on_x0(),
                    &x,
                    &y,
                    &PermutationConfig {
                        repeats: 1 + seed as usize % 4,
                        seed,
                        scorer,
                    },
                )
                .unwrap();
                assert_eq!(out.importance.scores[1], 0.0);
            }
        }
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let x = FeatureMatrix::from_rows(&[
            [0.0, 3.0],
            [0.2, 1.0],
            [0.9, 2.0],
            [1.0, 7.0],
            [0.4, 0.5],
            [0.7, 0.1],
        ]);
        let y = [0.1, 0.3, 0.8, 1.1, 0.35, 0.7];
        let names = vec!["a".to_string(), "b".to_string()];
        let ens = fit_ensemble(
            &x,
            &y,
            &names,
            &TrainConfig {
                n_stages: 30,
                learning_rate: 0.3,
                ..Default::default()
            },
        )
        .unwrap();
        let cfg = PermutationConfig {
            repeats: 7,
            seed: 99,
            scorer: Scorer::R2,
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| permutation_importance(&ens, &x, &y, &cfg).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn degenerate_r2_is_refused() {
        let x = FeatureMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]);
        let err = permutation_importance(
            &stump_on_x0(),
            &x,
            &[2.0, 2.0],
            &PermutationConfig::default(),
        );
        assert_eq!(err.unwrap_err(), ImportanceError::DegenerateScorer);
        let ok = permutation_importance(
            &stump_on_x0(),
            &x,
            &[2.0, 2.0],
            &PermutationConfig {
                scorer: Scorer::NegMse,
                ..Default::default()
            },
        );
        assert!(ok.is_ok());
        let one = FeatureMatrix::from_rows(&[[0.0, 0.0]]);
        assert_eq!(
            permutation_importance(&stump_on_x0(), &one, &[1.0], &PermutationConfig::default())
                .unwrap_err(),
            ImportanceError::TooFewRows(1)
        );
    }

    #[test]
    fn identical_orders_are_kept() {
        let m = vector(ImportanceMethod::Mdi, &[("A", 0.5), ("B", 0.3), ("C", 0.2)]);
        let p = vector(
            ImportanceMethod::Permutation,
            &[("A", 0.4), ("B", 0.2), ("C", 0.1)],
        );
        assert_eq!(combined_ranking(&m, &p).unwrap().order(), ["A", "B", "C"]);
    }

    #[test]
    fn swapped_top_pair_breaks_tie_by_mdi() {
        let m = vector(ImportanceMethod::Mdi, &[("A", 0.5), ("B", 0.3), ("C", 0.2)]);
        let p = vector(
            ImportanceMethod::Permutation,
            &[("A", 0.2), ("B", 0.4), ("C", 0.1)],
        );
        let r = combined_ranking(&m, &p).unwrap();
        assert_eq!(r.order(), ["A", "B", "C"]);
        assert_eq!(r.entries[0].avg_rank, 1.5);
        assert_eq!(r.entries[1].avg_rank, 1.5);
        assert!(!r.entries[0].disagreement);
    }

    #[test]
    fn ties_share_dense_ranks_and_far_apart_ranks_are_flagged() {
        let m = vector(
            ImportanceMethod::Mdi,
            &[("A", 0.4), ("B", 0.4), ("C", 0.1), ("D", 0.05), ("E", 0.05)],
        );
        let p = vector(
            ImportanceMethod::Permutation,
            &[("A", 0.0), ("B", 0.3), ("C", 0.2), ("D", 0.1), ("E", 0.05)],
        );
        let r = combined_ranking(&m, &p).unwrap();
        let a = r.entries.iter().find(|e| e.feature == "A").unwrap();
        assert_eq!((a.mdi_rank, a.perm_rank), (1, 5));
        assert!(a.disagreement);
        let e = r.entries.iter().find(|e| e.feature == "E").unwrap();
        assert_eq!(e.mdi_rank, 3);
        assert_eq!(r.order()[0], "B");
    }

    #[test]
    fn mismatched_features_are_rejected() {
        let m = vector(ImportanceMethod::Mdi, &[("A", 0.5)]);
        let p = vector(ImportanceMethod::Permutation, &[("B", 0.5)]);
        assert_eq!(
            combined_ranking(&m, &p),
            Err(ImportanceError::FeatureMismatch)
        );
    }

    #[test]
    fn csv_layout() {
        let m = vector(ImportanceMethod::Mdi, &[("A", 0.75), ("B", 0.25)]);
        let p = vector(ImportanceMethod::Permutation, &[("A", 0.5), ("B", -0.125)]);
        let csv = combined_ranking(&m, &p).unwrap().to_csv();
        assert_eq!(
            csv,
            "feature,mdi,permutation,mdi_rank,perm_rank,avg_rank,disagreement_flag\n\
             A,0.75,0.5,1,1,1,0\nB,0.25,-0.125,2,2,2,0\n"
        );
    }
}
