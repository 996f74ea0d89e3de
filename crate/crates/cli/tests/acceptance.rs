//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p arousal-cli --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use arousal_cli::{stages, RunConfig};
use arousal_core::data::{EventMark, Recording, Sample};
use arousal_core::eval::{self, matrix_at_operating_point, matrix_at_threshold, CvComparison, Regime};
use arousal_core::explain::{explain_row, tree_shap_values};
use arousal_core::features::N_FEATURES;
use arousal_core::models::{
    kkt_violation, solve_smo, train, BoostParams, ForestParams, LogisticObjective, LogisticParams, Matrix, ModelSpec,
    Node, SvmParams, Tree,
};
use arousal_core::preprocess::impute_series;
use arousal_core::{
    make_windows, upsample_minority, FeatureVector, ImputationConfig, Label, ResampleSpec, WindowConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, Box<dyn Fn() -> Check>);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------- 1 & 2 ----------

fn upsample_arithmetic() -> Check {
    let mut data = Vec::new();
    for i in 0..9486 + 372 {
        data.push(FeatureVector {
            participant_id: format!("P{:03}", i % 70),
            window_start: i as i64 * 30,
            values: [i as f64; N_FEATURES],
            label: Label::from_flag(i >= 9486),
        });
    }
    let out = upsample_minority(&data, &ResampleSpec::new(4, 3, 17)).map_err(|e| e.to_string())?;
    let minority = out.iter().filter(|v| v.label.is_positive()).count();
    let majority = out.len() - minority;
    ensure(minority == 7114 && majority == 9486, format!("minority {minority} (want 7114), majority {majority}"))
}

fn complete_recording(span: i64) -> Recording {
    let samples = (0..span)
        .map(|t| Sample { timestamp: t, hr: Some(70.0), acc_x: Some(0.1), acc_y: Some(0.2), acc_z: Some(0.3) })
        .collect();
    Recording { participant_id: "P001".into(), samples, events: Vec::<EventMark>::new() }
}

fn window_counts() -> Check {
    let spans = [59, 60, 90, 600];
    let counts: Vec<usize> = spans
        .iter()
        .map(|&t| make_windows(&complete_recording(t), &ImputationConfig::default(), &WindowConfig::default()).len())
        .collect();
    ensure(counts == [0, 1, 2, 19], format!("spans {spans:?} -> {counts:?} (want [0, 1, 2, 19])"))
}

// ---------- 3 & 4 ----------

fn random_scores(rng: &mut ChaCha8Rng, max_len: usize) -> (Vec<f64>, Vec<bool>) {
    let n = rng.random_range(2..=max_len);
    let levels = rng.random_range(2..=40);
    let rate = rng.random_range(0.1..0.9);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(rate)).collect();
    labels[0] = true;
    labels[1] = false;
    let scores = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
    (scores, labels)
}

fn pair_counting_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                den += 2;
                num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    num as f64 / den as f64
}

fn auc_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (s, l) = random_scores(&mut rng, 200);
        let auc = eval::roc_auc(&s, &l).map_err(|e| e.to_string())?.auc;
        worst = worst.max((auc - pair_counting_auc(&s, &l)).abs());
    }
    ensure(worst <= 1e-12, format!("max |trapezoid - pair count| = {worst:.3e} over 200 sets"))
}

fn operating_points() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        let (s, l) = random_scores(&mut rng, 1000);
        let mut thresholds: Vec<f64> = s.clone();
        thresholds.push(f64::INFINITY);
        thresholds.push(f64::NEG_INFINITY);
        for regime in Regime::standard_set() {
            let m = matrix_at_operating_point(&s, &l, regime).map_err(|e| e.to_string())?;
            if !regime.is_satisfied_by(&m) {
                return Err(format!("set {case}: {regime} violated by {m:?}"));
            }
            for &t in &thresholds {
                let c = matrix_at_threshold(&s, &l, t);
                let better = match regime {
                    Regime::TprFloor(f) => c.tpr >= f && c.fpr < m.fpr,
                    Regime::FprCap(cap) => c.fpr <= cap && c.tpr > m.tpr,
                };
                if better {
                    return Err(format!("set {case}: threshold {t} beats {regime} choice {}", m.threshold));
                }
            }
        }
    }
    Ok("100 sets x 3 regimes feasible, no strictly better threshold".into())
}

// ---------- 5 ----------

fn conditional(tree: &Tree, x: &[f64], present: u32, node: usize) -> f64 {
    match &tree.nodes[node] {
        Node::Leaf { value, .. } => *value,
        Node::Split { feature, threshold, left, right, cover } => {
            if present >> feature & 1 == 1 {
                conditional(tree, x, present, if x[*feature] <= *threshold { *left } else { *right })
            } else {
                (tree.nodes[*left].cover() * conditional(tree, x, present, *left)
                    + tree.nodes[*right].cover() * conditional(tree, x, present, *right))
                    / cover
            }
        }
    }
}

fn brute_force_shapley(trees: &[Tree], x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    let v = |s: u32| trees.iter().map(|t| conditional(t, x, s, 0)).sum::<f64>();
    (0..m)
        .map(|i| {
            (0..1u32 << m)
                .filter(|s| s >> i & 1 == 0)
                .map(|s| {
                    let k = s.count_ones() as usize;
                    fact(k) * fact(m - k - 1) / fact(m) * (v(s | 1 << i) - v(s))
                })
                .sum()
        })
        .collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Matrix, Vec<bool>) {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y = rows.iter().map(|r| r[0] - 0.5 * r[p - 1] + rng.random_range(-1.0..1.0) > 0.0).collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn tree_shap() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let names: Vec<String> = (0..N_FEATURES).map(|j| format!("f{j}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let (x, y) = random_matrix(&mut rng, 400, N_FEATURES);
    let mut worst_local = 0.0f64;
    let specs = [
        ModelSpec::GradientBoost(BoostParams { trees: 20, ..BoostParams::default() }),
        ModelSpec::RandomForest(ForestParams { trees: 20, ..ForestParams::default() }),
    ];
    for (k, spec) in specs.iter().enumerate() {
        let m = train(spec, &x, &y, &refs, k as u64).map_err(|e| e.to_string())?;
        for _ in 0..500 {
            let probe: Vec<f64> = (0..N_FEATURES).map(|_| rng.random_range(-2.5..2.5)).collect();
            let (phi, base) = explain_row(&m, &probe).map_err(|e| e.to_string())?;
            worst_local = worst_local.max((base + phi.iter().sum::<f64>() - m.margin_row(&probe)).abs());
        }
    }
    let mut worst_brute = 0.0f64;
    for case in 0..60u64 {
        let p = 2 + (case % 3) as usize;
        let (x, y) = random_matrix(&mut rng, 60, p);
        let spec = if case % 2 == 0 {
            ModelSpec::GradientBoost(BoostParams { trees: 3, max_depth: 3, ..BoostParams::default() })
        } else {
            ModelSpec::RandomForest(ForestParams { trees: 3, max_depth: 3, max_features: p, bootstrap: true })
        };
        let m = train(&spec, &x, &y, &refs[..p], case).map_err(|e| e.to_string())?;
        let trees = m.trees().expect("tree ensemble");
        for _ in 0..5 {
            let probe: Vec<f64> = (0..p).map(|_| rng.random_range(-2.5..2.5)).collect();
            let mut phi = vec![0.0; p];
            for t in trees {
                tree_shap_values(t, &probe, &mut phi);
            }
            for (a, b) in phi.iter().zip(brute_force_shapley(trees, &probe)) {
                worst_brute = worst_brute.max((a - b).abs());
            }
        }
    }
    ensure(
        worst_local <= 1e-8 && worst_brute <= 1e-8,
        format!("local accuracy {worst_local:.2e} on 1000 instances, brute force {worst_brute:.2e} on 300 instances"),
    )
}

// ---------- 6 ----------

fn optimizers() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (x, y) = random_matrix(&mut rng, 300, 5);
    let obj = LogisticObjective { x: &x, y: &y, lambda: 0.0324 };
    let mut worst_fd = 0.0f64;
    for _ in 0..20 {
        let theta: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = obj.gradient(&theta);
        for k in 0..6 {
            let h = 1e-5;
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[k] += h;
            dn[k] -= h;
            let fd = (obj.loss(&up) - obj.loss(&dn)) / (2.0 * h);
            worst_fd = worst_fd.max((fd - g[k]).abs() / g[k].abs().max(1e-2));
        }
    }
    let theta = arousal_core::models::fit_logistic(&obj, &LogisticParams::default(), vec![0.0; 6])
        .map_err(|e| e.to_string())?;
    let grad_inf = obj.gradient(&theta).iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let (mut worst_bound, mut worst_balance, mut worst_kkt) = (0.0f64, 0.0f64, 0.0f64);
    for params in [SvmParams::default(), SvmParams { c: 1.0, sigma: 0.5, ..SvmParams::default() }] {
        let sol = solve_smo(&x, &y, &params).map_err(|e| e.to_string())?;
        for &a in &sol.alpha {
            worst_bound = worst_bound.max((-a).max(a - params.c).max(0.0));
        }
        let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, &l)| if l { *a } else { -*a }).sum();
        worst_balance = worst_balance.max(balance.abs());
        worst_kkt = worst_kkt.max(kkt_violation(&sol, &y, params.c));
    }
    ensure(
        worst_fd <= 1e-6 && grad_inf <= 1e-6 && worst_bound == 0.0 && worst_balance <= 1e-8 && worst_kkt <= 1e-3,
        format!(
            "fd rel err {worst_fd:.2e}, |grad|inf {grad_inf:.2e}, box violation {worst_bound:.1e}, |sum a*y| {worst_balance:.2e}, KKT {worst_kkt:.2e}"
        ),
    )
}

// ---------- 7 ----------

fn cv5x2() -> Check {
    let d: [[f64; 2]; 5] = [[0.031, 0.012], [-0.004, 0.019], [0.022, 0.027], [0.008, -0.011], [0.015, 0.002]];
    let mut var_sum = 0.0f64;
    for r in &d {
        let mean = (r[0] + r[1]) / 2.0;
        var_sum += (r[0] - mean).powi(2) + (r[1] - mean).powi(2);
    }
    let direct = d[0][0] / (var_sum / 5.0).sqrt();
    let c = CvComparison::from_differences(d);
    let zero = CvComparison::from_differences([[0.0; 2]; 5]);
    let err = (c.t_statistic - direct).abs();
    ensure(
        err <= 1e-12
            && c.degrees_of_freedom == 5
            && (0.0..=1.0).contains(&c.p_value)
            && zero.t_statistic == 0.0
            && zero.p_value == 1.0,
        format!(
            "|t - direct| = {err:.1e} (t = {:.6}, p = {:.6}); identical: t = {}, p = {}",
            c.t_statistic, c.p_value, zero.t_statistic, zero.p_value
        ),
    )
}

// ---------- 8 & 9 ----------

fn signal_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig { seed: Some(2024), out: out.to_path_buf(), ..RunConfig::default() };
    cfg.synth.participants = 20;
    cfg.synth.duration = 4 * 3600;
    cfg.synth.event_hr_shift = 25.0;
    cfg.synth.event_hr_sd_multiplier = 2.0;
    cfg.synth.event_activity_multiplier = 0.3;
    cfg
}

fn end_to_end(root: &Path) -> Check {
    let mut lines = Vec::new();
    let mut ok = true;

    let start = Instant::now();
    let cfg = signal_config(&root.join("signal"));
    let summary = stages::pipeline(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let auc = |name: &str| summary.evaluations.iter().find(|e| e.model == name).map(|e| e.roc.auc).unwrap_or(f64::NAN);
    let gb = auc("gradient_boost");
    let others: Vec<(String, f64)> = summary
        .evaluations
        .iter()
        .filter(|e| e.model != "gradient_boost")
        .map(|e| (e.model.clone(), e.roc.auc))
        .collect();
    ok &= gb >= 0.90 && others.iter().all(|(_, a)| gb >= a - 0.05) && elapsed < Duration::from_secs(120);
    let listed: Vec<String> = others.iter().map(|(n, a)| format!("{n} {a:.4}")).collect();
    lines.push(format!("signal: gradient_boost {gb:.4}, {} ({:.0} s)", listed.join(", "), elapsed.as_secs_f64()));

    let mut null = RunConfig { out: root.join("null"), ..signal_config(&root.join("null")) };
    null.synth.event_hr_shift = 0.0;
    null.synth.event_hr_sd_multiplier = 1.0;
    null.synth.event_activity_multiplier = 1.0;
    null.evaluation.compare = false;
    null.explain.enabled = false;
    let start = Instant::now();
    let summary = stages::pipeline(&null).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let aucs: Vec<String> = summary.evaluations.iter().map(|e| format!("{} {:.4}", e.model, e.roc.auc)).collect();
    ok &= summary.evaluations.iter().all(|e| (e.roc.auc - 0.5).abs() <= 0.05) && elapsed < Duration::from_secs(120);
    lines.push(format!("null: {} ({:.0} s)", aucs.join(", "), elapsed.as_secs_f64()));
    ensure(ok, lines.join("; "))
}

fn run_binary(out: &Path, threads: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_arousal"))
        .args(["pipeline", "--seed", "99", "--threads", &threads.to_string(), "--out"])
        .arg(out)
        .env("RUST_LOG", "warn")
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("pipeline --threads {threads} exited with {status}"))
    }
}

fn files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism(root: &Path) -> Check {
    let start = Instant::now();
    let (a, b) = (root.join("threads1"), root.join("threads4"));
    run_binary(&a, 1)?;
    run_binary(&b, 4)?;
    let (fa, fb) = (files(&a), files(&b));
    if fa != fb {
        return Err(format!("artifact sets differ: {fa:?} vs {fb:?}"));
    }
    let differing: Vec<String> = fa
        .iter()
        .filter(|f| std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok())
        .map(|f| f.display().to_string())
        .collect();
    let elapsed = start.elapsed();
    ensure(
        differing.is_empty() && fa.iter().any(|f| f.ends_with("report.txt")) && elapsed < Duration::from_secs(300),
        format!("{} artifacts compared, differing {differing:?} ({:.0} s)", fa.len(), elapsed.as_secs_f64()),
    )
}

// ---------- 10 ----------

fn imputation_rules() -> Check {
    let cfg = ImputationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        let n = rng.random_range(2..300);
        let series: Vec<Option<f64>> =
            (0..n).map(|_| rng.random_bool(0.7).then(|| rng.random_range(40.0..180.0))).collect();
        let out = impute_series(&series, &cfg);
        for (i, (a, b)) in series.iter().zip(&out).enumerate() {
            if let Some(v) = a {
                if b.map(f64::to_bits) != Some(v.to_bits()) {
                    return Err(format!("observed value at {i} changed"));
                }
            }
        }
        // runs longer than max_gap stay missing
        let mut i = 0;
        while i < n {
            if series[i].is_none() {
                let j = (i..n).find(|&k| series[k].is_some()).unwrap_or(n);
                if j - i > cfg.max_gap && out[i..j].iter().any(Option::is_some) {
                    return Err(format!("gap of {} at {i} was filled", j - i));
                }
                i = j;
            } else {
                i += 1;
            }
        }
    }
    let mut constant: Vec<Option<f64>> = vec![Some(72.5); 40];
    constant[10..15].iter_mut().for_each(|v| *v = None);
    let filled = impute_series(&constant, &cfg);
    let worst = filled[10..15].iter().map(|v| v.map_or(f64::INFINITY, |v| (v - 72.5).abs())).fold(0.0, f64::max);
    ensure(worst <= 1e-9, format!("observed bits kept, long gaps left missing, constant gap error {worst:.1e}"))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let root = dir.path().to_path_buf();
    let criteria: Vec<Criterion> = vec![
        ("upsampling arithmetic 9486:372 at 4:3", Duration::from_secs(1), Box::new(upsample_arithmetic)),
        ("window counts for spans 59/60/90/600 s", Duration::from_secs(1), Box::new(window_counts)),
        ("AUC equals pair-counting oracle", Duration::from_secs(5), Box::new(auc_oracle)),
        ("operating-point optimality", Duration::from_secs(10), Box::new(operating_points)),
        ("TreeSHAP local accuracy and brute force", Duration::from_secs(30), Box::new(tree_shap)),
        ("optimizer soundness", Duration::from_secs(30), Box::new(optimizers)),
        ("5x2cv statistic", Duration::from_secs(5), Box::new(cv5x2)),
        (
            "end-to-end synthetic discrimination",
            Duration::from_secs(240),
            Box::new({
                let root = root.clone();
                move || end_to_end(&root)
            }),
        ),
        (
            "pipeline determinism across --threads",
            Duration::from_secs(300),
            Box::new({
                let root = root.clone();
                move || determinism(&root)
            }),
        ),
        ("imputation rules", Duration::from_secs(5), Box::new(imputation_rules)),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (verdict, detail) = match result {
            Ok(d) if elapsed <= *budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {:.2} s, budget {} s", elapsed.as_secs_f64(), budget.as_secs())),
            Err(d) => ("FAIL", d),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("{verdict} [{:>2}] {name}: {detail} [{:.2} s]", i + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
