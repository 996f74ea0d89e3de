//! Binary decision trees and the shared greedy grower used by the forest
//! (Gini) and by gradient boosting (second-order gain).

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl Node {
    /// Number of training rows that reached this node.
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

/// Nodes in pre-order; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.nodes[self.leaf(x)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Cover-weighted mean leaf value.
    pub fn expected_value(&self) -> f64 {
        let total = self.nodes[0].cover();
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { value, cover } => Some(value * cover),
                Node::Split { .. } => None,
            })
            .sum::<f64>()
            / total
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Features referenced by any split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// How node statistics `(a, b)` summed over rows are scored and turned into
/// leaf values.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Criterion {
    /// `a` = positives, `b` = rows. Maximizing Σ (a² + (b−a)²)/b over the
    /// children is minimizing their weighted Gini impurity.
    Gini,
    /// `a` = Σ gradient, `b` = Σ hessian of the log-loss.
    Newton { lambda: f64, learning_rate: f64 },
}

impl Criterion {
    #[inline]
    fn score(self, a: f64, b: f64) -> f64 {
        match self {
            Criterion::Gini => (a * a + (b - a) * (b - a)) / b,
            Criterion::Newton { lambda, .. } => a * a / (b + lambda),
        }
    }

    fn leaf_value(self, a: f64, b: f64) -> f64 {
        match self {
            Criterion::Gini => a / b,
            Criterion::Newton { lambda, learning_rate } => {
                let denom = b + lambda;
                if denom > 1e-300 {
                    -learning_rate * a / denom
                } else {
                    0.0
                }
            }
        }
    }

    fn is_terminal(self, a: f64, b: f64) -> bool {
        match self {
            Criterion::Gini => a == 0.0 || a == b,
            Criterion::Newton { .. } => false,
        }
    }

    fn accepts(self, gain: f64) -> bool {
        match self {
            // impure Gini nodes split even at zero gain (e.g. XOR)
            Criterion::Gini => gain.is_finite(),
            Criterion::Newton { .. } => gain > 0.0,
        }
    }
}

pub(crate) struct Grower<'a> {
    pub x: &'a Matrix,
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub criterion: Criterion,
    pub max_depth: usize,
    /// Candidate features per split; all features when ≥ n_cols.
    pub mtry: usize,
    pub rng: Option<&'a mut ChaCha8Rng>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    /// Grow a tree on `rows` (indices may repeat, e.g. a bootstrap sample).
    pub fn grow(mut self, rows: Vec<usize>) -> Tree {
        let mut nodes = Vec::new();
        self.grow_node(rows, 0, &mut nodes);
        Tree { nodes }
    }

    fn sums(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(a, b), &i| (a + self.a[i], b + self.b[i]))
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.n_cols();
        if self.mtry >= p {
            return (0..p).collect();
        }
        let rng = self.rng.as_mut().expect("feature subsampling needs an rng");
        let mut f = sample(*rng, p, self.mtry).into_vec();
        f.sort_unstable();
        f
    }

    fn grow_node(&mut self, rows: Vec<usize>, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let (a, b) = self.sums(&rows);
        let cover = rows.len() as f64;
        let id = nodes.len();
        nodes.push(Node::Leaf { value: self.criterion.leaf_value(a, b), cover });
        if depth >= self.max_depth || rows.len() < 2 || self.criterion.is_terminal(a, b) {
            return id;
        }
        let features = self.candidate_features();
        let Some(best) = self.best_split(&rows, &features, a, b) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.x.get(i, best.feature) <= best.threshold);
        let left = self.grow_node(left_rows, depth + 1, nodes);
        let right = self.grow_node(right_rows, depth + 1, nodes);
        nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right, cover };
        id
    }

    /// Highest-gain split; ties keep the lowest feature, then lowest threshold.
    fn best_split(&self, rows: &[usize], features: &[usize], a: f64, b: f64) -> Option<BestSplit> {
        let parent = self.criterion.score(a, b);
        let mut best: Option<BestSplit> = None;
        let mut sorted = rows.to_vec();
        for &f in features {
            sorted.sort_unstable_by(|&i, &j| self.x.get(i, f).total_cmp(&self.x.get(j, f)).then(i.cmp(&j)));
            let (mut al, mut bl) = (0.0, 0.0);
            for k in 0..sorted.len() - 1 {
                let i = sorted[k];
                al += self.a[i];
                bl += self.b[i];
                let v = self.x.get(i, f);
                let next = self.x.get(sorted[k + 1], f);
                if v == next {
                    continue;
                }
                let gain = self.criterion.score(al, bl) + self.criterion.score(a - al, b - bl) - parent;
                if !self.criterion.accepts(gain) {
                    continue;
                }
                if best.as_ref().is_none_or(|bs| gain > bs.gain) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(BestSplit { feature: f, threshold, gain });
                }
            }
        }
        best
    }
}
