use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, GbrtError};

/// Relative slack under which two impurity decreases count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: 4,
            min_samples_leaf: 1,
        }
    }
}

/// A candidate split. `impurity_decrease` is the drop in sum of squared
/// deviations: parent SSE minus the children's SSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
    pub n_left: usize,
    pub n_right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        n_samples: usize,
        /// Node-level decrease of the mean-squared impurity,
        /// `imp(t) - n_l/n_t imp(l) - n_r/n_t imp(r)`, i.e. SSE decrease / n_t.
        impurity_decrease: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

impl Node {
    pub fn n_samples(&self) -> usize {
        match *self {
            Node::Split { n_samples, .. } | Node::Leaf { n_samples, .. } => n_samples,
        }
    }
}

/// Arena-allocated regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    max_depth: usize,
    n_features: usize,
}

impl RegressionTree {
    pub fn leaf(value: f64, n_samples: usize, n_features: usize) -> Self {
        Self {
            nodes: vec![Node::Leaf { value, n_samples }],
            max_depth: 0,
            n_features,
        }
    }

    /// Builds a tree from explicit nodes (root first). Used for hand-built
    /// fixtures; children indices must point inside `nodes`.
    pub fn from_nodes(nodes: Vec<Node>, max_depth: usize, n_features: usize) -> Self {
        assert!(!nodes.is_empty(), "a tree needs a root");
        Self {
            nodes,
            max_depth,
            n_features,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, GbrtError> {
        if x.len() < self.n_features {
            return Err(GbrtError::MissingFeature {
                needed: self.n_features,
                found: x.len(),
            });
        }
        Ok(self.predict_row(x))
    }

    pub(crate) fn predict_row(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub(crate) fn to_json(&self) -> serde_json::Value {
        fn node(nodes: &[Node], i: usize) -> serde_json::Value {
            match nodes[i] {
                Node::Leaf { value, n_samples } => {
                    serde_json::json!({ "value": value, "n_samples": n_samples })
                }
                Node::Split {
                    feature,
                    threshold,
                    n_samples,
                    impurity_decrease,
                    left,
                    right,
                } => serde_json::json!({
                    "feature": feature,
                    "threshold": threshold,
                    "n_samples": n_samples,
                    "impurity_decrease": impurity_decrease,
                    "left": node(nodes, left),
                    "right": node(nodes, right),
                }),
            }
        }
        serde_json::json!({ "max_depth": self.max_depth, "root": node(&self.nodes, 0) })
    }
}

/// Scans the thresholds of one feature, whose node samples are given in
/// ascending feature-value order, and replaces `best` on strict improvement.
/// Callers visit features in ascending index order so that ties keep the
/// lower feature and, within a feature, the smaller threshold.
fn scan_feature(
    x: &FeatureMatrix,
    y: &[f64],
    feature: usize,
    ordered: &[usize],
    min_samples_leaf: usize,
    best: &mut Option<SplitCandidate>,
) {
    let n = ordered.len();
    let min_leaf = min_samples_leaf.max(1);
    if n < 2 * min_leaf {
        return;
    }
    let total: f64 = ordered.iter().map(|&s| y[s]).sum();
    let mut left_sum = 0.0;
    for i in 1..n {
        left_sum += y[ordered[i - 1]];
        if i < min_leaf || n - i < min_leaf {
            continue;
        }
        let lo = x.get(ordered[i - 1], feature);
        let hi = x.get(ordered[i], feature);
        if lo >= hi {
            continue;
        }
        let (nl, nr) = (i as f64, (n - i) as f64);
        let diff = left_sum / nl - (total - left_sum) / nr;
        // parent SSE - children SSE = n_l n_r / n (mean_l - mean_r)^2
        let decrease = nl * nr / n as f64 * diff * diff;
        let better = match best {
            None => decrease > 0.0,
            Some(b) => decrease > b.impurity_decrease * (1.0 + TIE_TOLERANCE),
        };
        if better {
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            *best = Some(SplitCandidate {
                feature,
                threshold,
                impurity_decrease: decrease,
                n_left: i,
                n_right: n - i,
            });
        }
    }
}

fn is_constant(y: &[f64], samples: &[usize]) -> bool {
    samples
        .split_first()
        .is_none_or(|(&first, rest)| rest.iter().all(|&s| y[s] == y[first]))
}

fn order_by_feature(x: &FeatureMatrix, samples: &[usize], feature: usize) -> Vec<usize> {
    let mut ordered = samples.to_vec();
    ordered.sort_by(|&a, &b| x.get(a, feature).total_cmp(&x.get(b, feature)));
    ordered
}

/// Best SSE-reducing split of the rows in `samples`, or `None` when no
/// threshold reduces SSE while leaving `min_samples_leaf` rows per side.
pub fn best_split(
    x: &FeatureMatrix,
    y: &[f64],
    samples: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitCandidate> {
    if samples.len() < 2 || is_constant(y, samples) {
        return None;
    }
    let mut best = None;
    for f in 0..x.n_features() {
        let ordered = order_by_feature(x, samples, f);
        scan_feature(x, y, f, &ordered, min_samples_leaf, &mut best);
    }
    best
}

/// Per-feature orderings of the full row set, computed once and reused by
/// every tree of an ensemble.
pub(crate) struct Presorted {
    orders: Vec<Vec<usize>>,
}

impl Presorted {
    pub(crate) fn new(x: &FeatureMatrix) -> Self {
        let all: Vec<usize> = (0..x.n_rows()).collect();
        Self {
            orders: (0..x.n_features())
                .map(|f| order_by_feature(x, &all, f))
                .collect(),
        }
    }
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [f64],
    config: TreeConfig,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, samples: Vec<usize>, orders: Vec<Vec<usize>>, depth: usize) -> usize {
        let n = samples.len();
        let id = self.nodes.len();
        let value = samples.iter().map(|&s| self.y[s]).sum::<f64>() / n as f64;
        self.nodes.push(Node::Leaf {
            value,
            n_samples: n,
        });
        if depth >= self.config.max_depth || n < 2 || is_constant(self.y, &samples) {
            return id;
        }
        let mut best = None;
        for (f, ordered) in orders.iter().enumerate() {
            scan_feature(
                self.x,
                self.y,
                f,
                ordered,
                self.config.min_samples_leaf,
                &mut best,
            );
        }
        let Some(split) = best else { return id };

        let goes_left = |s: &usize| self.x.get(*s, split.feature) <= split.threshold;
        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) =
            samples.iter().partition(|s| goes_left(s));
        let mut left_orders = Vec::with_capacity(orders.len());
        let mut right_orders = Vec::with_capacity(orders.len());
        for ordered in orders {
            let (l, r): (Vec<usize>, Vec<usize>) = ordered.into_iter().partition(|s| goes_left(s));
            left_orders.push(l);
            right_orders.push(r);
        }
        let left = self.grow(left_samples, left_orders, depth + 1);
        let right = self.grow(right_samples, right_orders, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            n_samples: n,
            impurity_decrease: split.impurity_decrease / n as f64,
            left,
            right,
        };
        id
    }
}

/// Fits on the rows flagged in `mask` (all rows when `None`).
pub(crate) fn fit_presorted(
    x: &FeatureMatrix,
    y: &[f64],
    presorted: &Presorted,
    mask: Option<&[bool]>,
    config: TreeConfig,
) -> RegressionTree {
    let keep = |s: &usize| mask.is_none_or(|m| m[*s]);
    let samples: Vec<usize> = (0..x.n_rows()).filter(keep).collect();
    let orders = presorted
        .orders
        .iter()
        .map(|o| o.iter().copied().filter(keep).collect())
        .collect();
    let mut builder = Builder {
        x,
        y,
        config,
        nodes: Vec::new(),
    };
    builder.grow(samples, orders, 0);
    RegressionTree {
        nodes: builder.nodes,
        max_depth: config.max_depth,
        n_features: x.n_features(),
    }
}

/// Greedy recursive CART fit under squared error.
pub fn fit_tree(
    x: &FeatureMatrix,
    y: &[f64],
    config: &TreeConfig,
) -> Result<RegressionTree, GbrtError> {
    if y.len() != x.n_rows() {
        return Err(GbrtError::LengthMismatch {
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    if y.is_empty() {
        return Err(GbrtError::Empty);
    }
    Ok(fit_presorted(x, y, &Presorted::new(x), None, *config))
}
