use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ForestParams;

/// Two decreases closer than this (times the node weight) count as a tie.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    /// Rows with `value <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted Gini decrease `W·G − W_l·G_l − W_r·G_r` of this split.
        impurity_decrease: f64,
    },
    /// `[negative, positive]` class-weighted proportions.
    Leaf { scores: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_for(&self, row: &[f64]) -> &[f64; 2] {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => idx = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { scores } => return scores,
            }
        }
    }

    /// Positive-class score of the leaf `row` lands in.
    pub fn positive_score(&self, row: &[f64]) -> f64 {
        self.leaf_for(row)[1]
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

/// Class-weighted Gini from integer class counts: weights are exact
/// multiples of the class weight, independent of summation order.
fn weighted_gini_term(n_pos: usize, n_neg: usize, cw: f64) -> (f64, f64) {
    let wp = n_pos as f64 * cw;
    let wn = n_neg as f64;
    let w = wp + wn;
    if w == 0.0 {
        return (0.0, 0.0);
    }
    // W·G = W − (wp² + wn²)/W
    (w, w - (wp * wp + wn * wn) / w)
}

pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

pub(crate) struct TreeBuilder<'a> {
    pub columns: &'a [Vec<f64>],
    pub positive: &'a [bool],
    pub params: &'a ForestParams,
    pub n_candidates: usize,
    pub importances: Vec<f64>,
    pub nodes: Vec<Node>,
    sort_buf: Vec<(f64, bool)>,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(columns: &'a [Vec<f64>], positive: &'a [bool], params: &'a ForestParams, n_candidates: usize) -> Self {
        Self {
            columns,
            positive,
            params,
            n_candidates,
            importances: vec![0.0; columns.len()],
            nodes: Vec::new(),
            sort_buf: Vec::new(),
        }
    }

    fn counts(&self, samples: &[usize]) -> (usize, usize) {
        let pos = samples.iter().filter(|&&s| self.positive[s]).count();
        (pos, samples.len() - pos)
    }

    /// Best split of `samples` over `features` (ascending), or `None` when
    /// every candidate is constant or violates `min_samples_leaf`.
    pub fn best_split(&mut self, samples: &[usize], features: &[usize]) -> Option<SplitChoice> {
        let cw = self.params.class_weight_positive;
        let min_leaf = self.params.min_samples_leaf;
        let n = samples.len();
        let (n_pos, n_neg) = self.counts(samples);
        let (w_node, wg_node) = weighted_gini_term(n_pos, n_neg, cw);
        let tol = TIE_TOLERANCE * w_node.max(1.0);
        let mut best: Option<SplitChoice> = None;

        for &f in features {
            let col = &self.columns[f];
            self.sort_buf.clear();
            self.sort_buf.extend(samples.iter().map(|&s| (col[s], self.positive[s])));
            self.sort_buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let buf = &self.sort_buf;

            let (mut left_pos, mut left_neg) = (0usize, 0usize);
            for i in 0..n - 1 {
                if buf[i].1 {
                    left_pos += 1;
                } else {
                    left_neg += 1;
                }
                let (lo, hi) = (buf[i].0, buf[i + 1].0);
                if lo >= hi {
                    continue;
                }
                let n_left = i + 1;
                if n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let (_, wg_left) = weighted_gini_term(left_pos, left_neg, cw);
                let (_, wg_right) = weighted_gini_term(n_pos - left_pos, n_neg - left_neg, cw);
                let decrease = wg_node - wg_left - wg_right;
                let better = match &best {
                    None => true,
                    Some(b) => decrease > b.decrease + tol,
                };
                if better {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi || !threshold.is_finite() {
                        threshold = lo;
                    }
                    best = Some(SplitChoice {
                        feature: f,
                        threshold,
                        decrease,
                    });
                }
            }
        }
        best
    }

    fn leaf(&mut self, samples: &[usize]) -> usize {
        let (n_pos, n_neg) = self.counts(samples);
        let wp = n_pos as f64 * self.params.class_weight_positive;
        let wn = n_neg as f64;
        let total = wp + wn;
        let scores = if total > 0.0 { [wn / total, wp / total] } else { [0.5, 0.5] };
        self.nodes.push(Node::Leaf { scores });
        self.nodes.len() - 1
    }

    fn candidate_features<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        let p = self.columns.len();
        let mut feats = if self.n_candidates >= p {
            (0..p).collect()
        } else {
            index::sample(rng, p, self.n_candidates).into_vec()
        };
        feats.sort_unstable();
        feats
    }

    pub fn grow<R: Rng>(&mut self, samples: &mut [usize], depth: usize, rng: &mut R) -> usize {
        let (n_pos, n_neg) = self.counts(samples);
        let at_max_depth = self.params.max_depth.is_some_and(|d| depth >= d);
        if n_pos == 0 || n_neg == 0 || at_max_depth || samples.len() < 2 * self.params.min_samples_leaf {
            return self.leaf(samples);
        }
        let features = self.candidate_features(rng);
        let mut split = self.best_split(samples, &features);
        if split.is_none() && features.len() < self.columns.len() {
            // Nothing usable among the drawn features: look at the rest.
            let rest: Vec<usize> = (0..self.columns.len()).filter(|f| features.binary_search(f).is_err()).collect();
            split = self.best_split(samples, &rest);
        }
        let Some(split) = split else {
            return self.leaf(samples);
        };
        self.importances[split.feature] += split.decrease;

        let col = &self.columns[split.feature];
        let mut mid = 0;
        for i in 0..samples.len() {
            if col[samples[i]] <= split.threshold {
                samples.swap(i, mid);
                mid += 1;
            }
        }
        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf { scores: [0.0, 0.0] });
        let (left_samples, right_samples) = samples.split_at_mut(mid);
        let left = self.grow(left_samples, depth + 1, rng);
        let right = self.grow(right_samples, depth + 1, rng);
        self.nodes[idx] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            impurity_decrease: split.decrease,
        };
        idx
    }
}
