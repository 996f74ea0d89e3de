use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, Grower, Tree};
use super::Matrix;
use crate::util::derive_indexed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    /// Requested candidate features per split; clamped to the feature count.
    pub max_features: usize,
    /// Draw a bootstrap sample per tree. Disabling it grows every tree on
    /// the full training set.
    #[serde(default = "default_true")]
    pub bootstrap: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { trees: 50, max_depth: 28, max_features: 10, bootstrap: true }
    }
}

impl ForestParams {
    pub fn mtry(&self, n_features: usize) -> usize {
        self.max_features.min(n_features)
    }
}

/// Each tree gets its own seed derived from `seed` and its index, so the
/// forest is identical for any number of worker threads.
pub(crate) fn train_forest(params: &ForestParams, x: &Matrix, y: &[bool], seed: u64) -> Vec<Tree> {
    let a: Vec<f64> = y.iter().map(|&v| v as u8 as f64).collect();
    let b = vec![1.0; y.len()];
    let n = x.n_rows();
    let mtry = params.mtry(x.n_cols());
    (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed(seed, "forest-tree", t as u64));
            let rows: Vec<usize> =
                if params.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
            Grower {
                x,
                a: &a,
                b: &b,
                criterion: Criterion::Gini,
                max_depth: params.max_depth,
                mtry,
                rng: Some(&mut rng),
            }
            .grow(rows)
        })
        .collect()
}

/// Mean leaf class fraction.
pub(crate) fn forest_fraction(trees: &[Tree], x: &[f64]) -> f64 {
    trees.iter().map(|t| t.predict(x)).sum::<f64>() / trees.len() as f64
}
