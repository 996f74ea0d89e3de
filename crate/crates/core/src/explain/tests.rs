use super::*;
use crate::models::{train, BoostParams, ForestParams, Matrix, ModelSpec, Node, TrainedModel, Tree};
use crate::preprocess::Label;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// E[f(x) | x_S] with absent features integrated out by training cover.
fn conditional(tree: &Tree, x: &[f64], present: u32, node: usize) -> f64 {
    match &tree.nodes[node] {
        Node::Leaf { value, .. } => *value,
        Node::Split { feature, threshold, left, right, cover } => {
            if present & (1 << feature) != 0 {
                conditional(tree, x, present, if x[*feature] <= *threshold { *left } else { *right })
            } else {
                let wl = tree.nodes[*left].cover() / cover;
                let wr = tree.nodes[*right].cover() / cover;
                wl * conditional(tree, x, present, *left) + wr * conditional(tree, x, present, *right)
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Shapley values of v(S) = Σ_t E[t(x) | x_S] by enumerating all subsets.
fn brute_force(trees: &[Tree], x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let v = |s: u32| trees.iter().map(|t| conditional(t, x, s, 0)).sum::<f64>();
    (0..m)
        .map(|i| {
            let mut phi = 0.0;
            for s in 0..(1u32 << m) {
                if s & (1 << i) != 0 {
                    continue;
                }
                let k = s.count_ones() as usize;
                let w = factorial(k) * factorial(m - k - 1) / factorial(m);
                phi += w * (v(s | (1 << i)) - v(s));
            }
            phi
        })
        .collect()
}

fn raw_shap(trees: &[Tree], x: &[f64]) -> (Vec<f64>, f64) {
    let mut phi = vec![0.0; x.len()];
    let base = trees.iter().map(|t| tree_shap_values(t, x, &mut phi)).sum();
    (phi, base)
}

fn random_problem(n: usize, p: usize, seed: u64) -> (Matrix, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(0..8) as f64).collect()).collect();
    let y = rows.iter().map(|r| r[0] + r[p - 1] + rng.random_range(-3.0..3.0) > 7.0).collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("f{j}")).collect()
}

fn refs(n: &[String]) -> Vec<&str> {
    n.iter().map(String::as_str).collect()
}

fn stump(feature: usize, threshold: f64, left: f64, right: f64, covers: (f64, f64)) -> Tree {
    Tree {
        nodes: vec![
            Node::Split { feature, threshold, left: 1, right: 2, cover: covers.0 + covers.1 },
            Node::Leaf { value: left, cover: covers.0 },
            Node::Leaf { value: right, cover: covers.1 },
        ],
    }
}

fn fv(values: [f64; N_FEATURES]) -> FeatureVector {
    FeatureVector { participant_id: "P001".into(), window_start: 0, values, label: Label::NonHyperarousal }
}

fn boost_model(trees: Vec<Tree>, base_margin: f64) -> TrainedModel {
    TrainedModel {
        spec: ModelSpec::gradient_boost(),
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        training_seed: 0,
        standardizer: None,
        params: ModelParams::Boost { base_margin, trees },
    }
}

#[test]
fn stump_attribution_is_leaf_minus_expectation() {
    let t = stump(2, 50.0, -1.0, 3.0, (30.0, 10.0));
    let expected = (-30.0 + 30.0) / 40.0;
    let mut x = [0.0; N_FEATURES];
    x[2] = 40.0;
    let (phi, base) = raw_shap(std::slice::from_ref(&t), &x);
    assert_eq!(base, expected);
    assert!((phi[2] - (-1.0 - expected)).abs() < 1e-12);
    assert!(phi.iter().enumerate().all(|(j, v)| j == 2 || *v == 0.0));
    let oracle = brute_force(std::slice::from_ref(&t), &x);
    assert!(phi.iter().zip(&oracle).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn repeated_feature_on_path_matches_brute_force() {
    // f0 reused below itself, f1 in between
    let t = Tree {
        nodes: vec![
            Node::Split { feature: 0, threshold: 1.0, left: 1, right: 6, cover: 20.0 },
            Node::Split { feature: 1, threshold: 0.0, left: 2, right: 3, cover: 12.0 },
            Node::Leaf { value: 0.3, cover: 5.0 },
            Node::Split { feature: 0, threshold: -1.0, left: 4, right: 5, cover: 7.0 },
            Node::Leaf { value: -2.0, cover: 3.0 },
            Node::Leaf { value: 1.5, cover: 4.0 },
            Node::Leaf { value: 0.9, cover: 8.0 },
        ],
    };
    for x in [[-2.0, 1.0, 0.0], [0.0, 1.0, 5.0], [0.0, -1.0, 0.0], [3.0, 3.0, 3.0]] {
        let (phi, base) = raw_shap(std::slice::from_ref(&t), &x);
        let oracle = brute_force(std::slice::from_ref(&t), &x);
        for (a, b) in phi.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "{phi:?} vs {oracle:?}");
        }
        assert!((base + phi.iter().sum::<f64>() - t.predict(&x)).abs() < 1e-12);
        assert_eq!(phi[2], 0.0);
    }
}

#[test]
fn trained_ensembles_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20 {
        let p = 2 + (seed as usize % 3);
        let (x, y) = random_problem(80, p, seed);
        let spec = if seed % 2 == 0 {
            ModelSpec::GradientBoost(BoostParams { trees: 3, max_depth: 3, ..BoostParams::default() })
        } else {
            ModelSpec::RandomForest(ForestParams { trees: 3, max_depth: 3, max_features: p, bootstrap: true })
        };
        let Ok(m) = train(&spec, &x, &y, &refs(&names(p)), seed) else { continue };
        let trees = m.trees().unwrap();
        for _ in 0..10 {
            let probe: Vec<f64> = (0..p).map(|_| rng.random_range(-1..9) as f64 + 0.5).collect();
            let (phi, _) = raw_shap(trees, &probe);
            let oracle = brute_force(trees, &probe);
            for (a, b) in phi.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn forest_explanations_are_additive_in_margin_space() {
    let (x, y) = random_problem(200, 4, 7);
    let m = train(
        &ModelSpec::RandomForest(ForestParams { trees: 20, ..ForestParams::default() }),
        &x,
        &y,
        &refs(&names(4)),
        1,
    )
    .unwrap();
    for row in x.rows() {
        let (phi, base) = explain_row(&m, row).unwrap();
        assert!((base + phi.iter().sum::<f64>() - m.margin_row(row)).abs() < 1e-8);
    }
}

#[test]
fn constant_boost_model_has_zero_attributions() {
    let (x, y) = random_problem(100, 9, 8);
    let spec = ModelSpec::GradientBoost(BoostParams { learning_rate: 0.0, trees: 4, ..BoostParams::default() });
    let m = train(&spec, &x, &y, &FEATURE_NAMES, 0).unwrap();
    let ModelParams::Boost { base_margin, .. } = m.params else { panic!() };
    for row in x.rows() {
        let (phi, base) = explain_row(&m, row).unwrap();
        assert!(phi.iter().all(|v| *v == 0.0));
        assert_eq!(base, base_margin);
    }
}

#[test]
fn duplicated_column_gets_equal_attribution() {
    // identical splits on features 0 and 1, covers equal
    let trees = vec![stump(0, 0.5, -1.0, 1.0, (5.0, 5.0)), stump(1, 0.5, -1.0, 1.0, (5.0, 5.0))];
    for v in [0.0, 1.0] {
        let (phi, _) = raw_shap(&trees, &[v, v, 7.0]);
        assert_eq!(phi[0], phi[1]);
        assert_eq!(phi[2], 0.0);
    }
}

#[test]
fn non_tree_models_are_rejected() {
    let (x, y) = random_problem(60, 9, 9);
    let m = train(&ModelSpec::logistic_regression(), &x, &y, &FEATURE_NAMES, 0).unwrap();
    assert!(matches!(tree_shap(&m, &fv([1.0; 9])), Err(Error::UnsupportedModel(_))));
}

#[test]
fn summary_ordering_and_ties() {
    let data = vec![fv([1.0; 9]), fv([2.0; 9])];
    let zero =
        vec![
            ShapExplanation { participant_id: "P001".into(), window_start: 0, values: vec![0.0; 9], base_value: 0.0 };
            2
        ];
    let s = summarize(&zero, &data).unwrap();
    let order: Vec<&str> = s.features.iter().map(|f| f.feature.name()).collect();
    let mut alphabetical = FEATURE_NAMES.to_vec();
    alphabetical.sort();
    assert_eq!(order, alphabetical);

    let mut one = zero.clone();
    one[1].values[Feature::LinAccMean.index()] = -0.4;
    let s = summarize(&one, &data).unwrap();
    assert_eq!(s.features[0].feature, Feature::LinAccMean);
    assert!((s.features[0].mean_abs_shap - 0.2).abs() < 1e-15);
    assert!(summarize(&one, &data[..1]).is_err());
    let csv = summary_csv(&s);
    assert_eq!(csv.lines().nth(1), Some("linaccmean,2.0000000000000001e-1,1"));
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn stump_dependence_has_two_levels() {
    let theta = 60.0;
    let j = Feature::HrMin.index();
    let m = boost_model(vec![stump(j, theta, -0.5, 1.5, (3.0, 1.0))], -1.0);
    let expected = (-1.5 + 1.5) / 4.0;
    let data: Vec<FeatureVector> = (0..20)
        .map(|i| {
            let mut v = [0.0; 9];
            v[j] = 50.0 + i as f64;
            fv(v)
        })
        .collect();
    let ex = explain_all(&m, &data).unwrap();
    let d = dependence(&ex, &data, "hrmin").unwrap();
    assert_eq!(d.points.len(), data.len());
    for (value, shap) in d.points {
        let want = if value <= theta { -0.5 - expected } else { 1.5 - expected };
        assert!((shap - want).abs() < 1e-12);
    }
    assert!(dependence(&ex, &data, "hrmedian").is_err());
    assert_eq!(values_csv(&ex, &data).unwrap().lines().count(), 1 + 9 * data.len());
    let svg = dependence_svg(&dependence(&ex, &data, "hrmin").unwrap());
    assert!(svg.starts_with("<svg") && svg.matches("<circle").count() == data.len());
    let svg = summary_svg(&summarize(&ex, &data).unwrap());
    assert_eq!(svg.matches("<circle").count(), 9 * data.len());
}

#[test]
fn hr_signal_ranks_hr_features_first() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..9).map(|_| rng.random::<f64>()).collect()).collect();
    let y: Vec<bool> = rows.iter().map(|r| r[0] + r[3] > 1.0).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let m = train(
        &ModelSpec::GradientBoost(BoostParams { trees: 20, max_depth: 3, ..BoostParams::default() }),
        &x,
        &y,
        &FEATURE_NAMES,
        0,
    )
    .unwrap();
    let data: Vec<FeatureVector> = rows.iter().map(|r| fv(r.clone().try_into().unwrap())).collect();
    let ex = explain_all(&m, &data).unwrap();
    let s = summarize(&ex, &data).unwrap();
    let top: Vec<Feature> = s.features[..2].iter().map(|f| f.feature).collect();
    assert!(top.contains(&Feature::HrMean) && top.contains(&Feature::HrSd), "{top:?}");
    // oracle: direct mean |φ|
    for f in &s.features {
        let direct = ex.iter().map(|e| e.values[f.feature.index()].abs()).sum::<f64>() / ex.len() as f64;
        assert_eq!(f.mean_abs_shap, direct);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]
    #[test]
    fn local_accuracy_and_null_player(seed in 0u64..1000, probe in proptest::collection::vec(-1.0f64..9.0, 9)) {
        let (x, y) = random_problem(120, 9, seed);
        prop_assume!(y.iter().any(|&v| v) && y.iter().any(|&v| !v));
        let spec = ModelSpec::GradientBoost(BoostParams { trees: 8, max_depth: 4, ..BoostParams::default() });
        let m = train(&spec, &x, &y, &FEATURE_NAMES, seed).unwrap();
        let (phi, base) = explain_row(&m, &probe).unwrap();
        prop_assert!((base + phi.iter().sum::<f64>() - m.margin_row(&probe)).abs() <= 1e-8);
        let used: std::collections::BTreeSet<usize> = m.trees().unwrap().iter().flat_map(|t| t.used_features()).collect();
        for j in 0..9 {
            if !used.contains(&j) {
                prop_assert_eq!(phi[j], 0.0);
            }
        }
    }
}
