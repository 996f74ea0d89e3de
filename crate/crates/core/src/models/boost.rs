use serde::{Deserialize, Serialize};

use super::tree::{Criterion, Grower, Tree};
use super::Matrix;
use crate::util::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostParams {
    pub trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    #[serde(default = "default_l2")]
    pub l2_leaf_penalty: f64,
}

fn default_l2() -> f64 {
    1.0
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams { trees: 50, max_depth: 37, learning_rate: 0.3, l2_leaf_penalty: 1.0 }
    }
}

/// Logit of the training base rate.
pub(crate) fn base_margin(y: &[bool]) -> f64 {
    let p = y.iter().filter(|&&v| v).count() as f64 / y.len() as f64;
    (p / (1.0 - p)).ln()
}

/// Newton boosting on the logistic loss. Leaf values already include the
/// learning rate.
pub(crate) fn train_boost(params: &BoostParams, x: &Matrix, y: &[bool], base: f64) -> Vec<Tree> {
    let n = x.n_rows();
    let mut margin = vec![base; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let criterion = Criterion::Newton { lambda: params.l2_leaf_penalty, learning_rate: params.learning_rate };
    let mut trees = Vec::with_capacity(params.trees);
    for _ in 0..params.trees {
        for i in 0..n {
            let p = sigmoid(margin[i]);
            grad[i] = p - y[i] as u8 as f64;
            hess[i] = p * (1.0 - p);
        }
        let tree =
            Grower { x, a: &grad, b: &hess, criterion, max_depth: params.max_depth, mtry: usize::MAX, rng: None }
                .grow((0..n).collect());
        for (i, m) in margin.iter_mut().enumerate() {
            *m += tree.predict(x.row(i));
        }
        trees.push(tree);
    }
    trees
}
