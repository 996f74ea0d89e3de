use crate::models::{Node, Tree};

#[derive(Debug, Clone, Copy, Default)]
struct PathElem {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

/// Append an element to `path[..d]`, making it `path[..=d]`.
fn extend(path: &mut [PathElem], d: usize, zero: f64, one: f64, feature: Option<usize>) {
    path[d] = PathElem { feature, zero, one, weight: if d == 0 { 1.0 } else { 0.0 } };
    let dp1 = (d + 1) as f64;
    for i in (0..d).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / dp1;
        path[i].weight = zero * path[i].weight * (d - i) as f64 / dp1;
    }
}

/// Remove element `k` from `path[..=d]`.
fn unwind(path: &mut [PathElem], d: usize, k: usize) {
    let PathElem { zero, one, .. } = path[k];
    let dp1 = (d + 1) as f64;
    let mut next = path[d].weight;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * dp1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (d - i) as f64 / dp1;
        } else {
            path[i].weight = path[i].weight * dp1 / (zero * (d - i) as f64);
        }
    }
    for i in k..d {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
}

/// Total permutation weight of `path[..=d]` with element `k` removed.
fn unwound_sum(path: &[PathElem], d: usize, k: usize) -> f64 {
    let PathElem { zero, one, .. } = path[k];
    let dp1 = (d + 1) as f64;
    let mut next = path[d].weight;
    let mut total = 0.0;
    for i in (0..d).rev() {
        if one != 0.0 {
            let tmp = next * dp1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (d - i) as f64 / dp1;
        } else if zero != 0.0 {
            total += path[i].weight / zero * dp1 / (d - i) as f64;
        }
    }
    total
}

struct Walk<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    phi: &'a mut [f64],
}

impl Walk<'_> {
    /// `parent` holds the path so far; this node's path is built in the
    /// head of `scratch` and its children use the rest.
    fn recurse(
        &mut self,
        node: usize,
        parent: &[PathElem],
        scratch: &mut [PathElem],
        zero: f64,
        one: f64,
        feature: Option<usize>,
    ) {
        let mut d = parent.len();
        let (path, rest) = scratch.split_at_mut(d + 1);
        path[..d].copy_from_slice(parent);
        extend(path, d, zero, one, feature);
        match &self.tree.nodes[node] {
            Node::Leaf { value, .. } => {
                for k in 1..=d {
                    let e = path[k];
                    let w = unwound_sum(path, d, k);
                    self.phi[e.feature.expect("only the root lacks a feature")] += w * (e.one - e.zero) * value;
                }
            }
            Node::Split { feature: f, threshold, left, right, cover } => {
                let (hot, cold) = if self.x[*f] <= *threshold { (*left, *right) } else { (*right, *left) };
                let hot_zero = self.tree.nodes[hot].cover() / cover;
                let cold_zero = self.tree.nodes[cold].cover() / cover;
                let (mut in_zero, mut in_one) = (1.0, 1.0);
                if let Some(k) = path[..=d].iter().position(|e| e.feature == Some(*f)) {
                    in_zero = path[k].zero;
                    in_one = path[k].one;
                    unwind(path, d, k);
                    d -= 1;
                }
                let current = &path[..=d];
                self.recurse(hot, current, rest, hot_zero * in_zero, in_one, Some(*f));
                self.recurse(cold, current, rest, cold_zero * in_zero, 0.0, Some(*f));
            }
        }
    }
}

/// Add the tree's path-dependent Shapley values for `x` into `phi` and
/// return the tree's cover-weighted expected value.
pub fn tree_shap_values(tree: &Tree, x: &[f64], phi: &mut [f64]) -> f64 {
    let levels = tree.depth() + 2;
    let mut scratch = vec![PathElem::default(); levels * (levels + 1) / 2];
    Walk { tree, x, phi }.recurse(0, &[], &mut scratch, 1.0, 1.0, None);
    tree.expected_value()
}
