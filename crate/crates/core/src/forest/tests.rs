use super::*;
use crate::features::{FeatureDescriptor, FeatureSlot, Statistic, WindowConfig};
use crate::metrics::{contingency, tss};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

fn descriptor(j: usize) -> FeatureDescriptor {
    FeatureDescriptor {
        parameter: format!("F{j:02}"),
        scale: WindowConfig::new(2, 1).unwrap(),
        slot: FeatureSlot::Interval(0),
        statistic: Statistic::Mean,
    }
}

/// Row-major `rows` with boolean labels.
fn matrix(rows: &[Vec<f64>], positive: &[bool]) -> FeatureMatrix {
    let p = rows.first().map_or(0, Vec::len);
    FeatureMatrix::new(
        (0..p).map(descriptor).collect(),
        rows.iter().flatten().copied().collect(),
        (0..rows.len()).map(|i| format!("r{i:04}")).collect(),
        vec!["P1".to_string(); rows.len()],
        positive
            .iter()
            .map(|&b| if b { BinaryLabel::Flaring } else { BinaryLabel::NonFlaring })
            .collect(),
    )
    .unwrap()
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

fn stump() -> ForestParams {
    ForestParams {
        n_trees: 1,
        max_depth: Some(1),
        min_samples_leaf: 1,
        max_features: MaxFeatures::All,
        bootstrap_rows: false,
        ..ForestParams::default()
    }
}

/// Exhaustive weighted-Gini search written straight from the definition:
/// every feature, every midpoint, impurity via `1 − p² − q²`.
fn oracle_root_split(rows: &[Vec<f64>], positive: &[bool], cw: f64) -> Option<(usize, f64, f64)> {
    let weight = |idx: &[usize]| -> (f64, f64) {
        let wp: f64 = idx.iter().filter(|&&i| positive[i]).map(|_| cw).sum();
        let wn: f64 = idx.iter().filter(|&&i| !positive[i]).map(|_| 1.0).sum();
        (wp, wn)
    };
    let term = |idx: &[usize]| -> f64 {
        let (wp, wn) = weight(idx);
        if wp + wn == 0.0 {
            0.0
        } else {
            (wp + wn) * gini_impurity(wp, wn).unwrap()
        }
    };
    let all: Vec<usize> = (0..rows.len()).collect();
    let (wp, wn) = weight(&all);
    let parent = term(&all);
    let mut candidates = Vec::new();
    for f in 0..rows[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for pair in vals.windows(2) {
            let thr = pair[0] + (pair[1] - pair[0]) / 2.0;
            let left: Vec<usize> = all.iter().copied().filter(|&i| rows[i][f] <= thr).collect();
            let right: Vec<usize> = all.iter().copied().filter(|&i| rows[i][f] > thr).collect();
            candidates.push((f, thr, parent - term(&left) - term(&right)));
        }
    }
    let best = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (wp + wn).max(1.0);
    candidates
        .into_iter()
        .filter(|c| c.2 >= best - tol)
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
}

fn root_split(model: &ForestModel) -> Option<(usize, f64, f64)> {
    match &model.trees[0].nodes[0] {
        Node::Split {
            feature,
            threshold,
            impurity_decrease,
            ..
        } => Some((*feature, *threshold, *impurity_decrease)),
        Node::Leaf { .. } => None,
    }
}

#[test]
fn gini_anchors() {
    assert_eq!(gini_impurity(1.0, 1.0).unwrap(), 0.5);
    assert_eq!(gini_impurity(1.0, 0.0).unwrap(), 0.0);
    assert!((gini_impurity(3.0, 1.0).unwrap() - 0.375).abs() < 1e-15);
    assert!(matches!(gini_impurity(0.0, 0.0), Err(Error::Argument(_))));
}

#[test]
fn max_features_rules() {
    assert_eq!(MaxFeatures::Sqrt.resolve(864), 29);
    assert_eq!(MaxFeatures::Log2.resolve(864), 9);
    assert_eq!(MaxFeatures::All.resolve(7), 7);
    assert_eq!(MaxFeatures::Fixed(50).resolve(7), 7);
    assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
    assert_eq!("12".parse::<MaxFeatures>().unwrap(), MaxFeatures::Fixed(12));
    assert!("0".parse::<MaxFeatures>().is_err());
    assert!("half".parse::<MaxFeatures>().is_err());
}

#[test]
fn separable_single_feature() {
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![if i < 10 { 0.0 } else { 10.0 }]).collect();
    let labels: Vec<bool> = (0..20).map(|i| i >= 10).collect();
    let fm = matrix(&rows, &labels);
    let model = train_forest(&fm, &ForestParams { n_trees: 10, ..ForestParams::default() }).unwrap();
    let preds = model.predict_labels(&fm).unwrap();
    assert_eq!(preds, fm.labels());
    assert_eq!(model.importances, vec![1.0]);
    assert_eq!(root_split(&model).unwrap().1, 5.0);
}

#[test]
fn rejects_bad_training_input() {
    let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
    let fm = matrix(&rows, &[true, true, true]);
    assert!(matches!(train_forest(&fm, &ForestParams::default()), Err(Error::Training(_))));
    let fm = matrix(&rows[..1], &[true]);
    assert!(matches!(train_forest(&fm, &ForestParams::default()), Err(Error::Training(_))));
    let fm = matrix(&rows, &[true, false, true]);
    let bad = ForestParams { class_weight_positive: 0.0, ..ForestParams::default() };
    assert!(matches!(train_forest(&fm, &bad), Err(Error::Argument(_))));
    let bad = ForestParams { n_trees: 0, ..ForestParams::default() };
    assert!(matches!(train_forest(&fm, &bad), Err(Error::Argument(_))));
}

#[test]
fn stump_matches_oracle_on_fixed_fixture() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows = random_rows(&mut rng, 20, 3);
    let labels: Vec<bool> = rows.iter().map(|r| r[1] + 0.3 * r[2] > 0.2).collect();
    for cw in [1.0, 2.5, 0.4] {
        let fm = matrix(&rows, &labels);
        let model = train_forest(&fm, &ForestParams { class_weight_positive: cw, ..stump() }).unwrap();
        let (f, thr, dec) = root_split(&model).unwrap();
        let (of, othr, odec) = oracle_root_split(&rows, &labels, cw).unwrap();
        assert_eq!((f, thr), (of, othr));
        assert!((dec - odec).abs() < 1e-10);
    }
}

#[test]
fn ties_go_to_lowest_feature_then_threshold() {
    // Features 0 and 1 are identical, so every split on 1 ties one on 0.
    let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
    let labels = [false, false, true, true, false, false, true, true];
    let model = train_forest(&matrix(&rows, &labels), &stump()).unwrap();
    let (f, thr, _) = root_split(&model).unwrap();
    let (of, othr, _) = oracle_root_split(&rows, &labels, 1.0).unwrap();
    assert_eq!((f, thr), (of, othr));
    assert_eq!(f, 0);
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows = random_rows(&mut rng, 120, 12);
    let labels: Vec<bool> = rows.iter().map(|r| r[4] - r[7] > 0.5).collect();
    let fm = matrix(&rows, &labels);
    let params = ForestParams { n_trees: 25, seed: 99, ..ForestParams::default() };
    let a = train_forest(&fm, &params).unwrap();
    let b = train_forest(&fm, &params).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = train_forest(&fm, &ForestParams { seed: 100, ..params }).unwrap();
    assert_ne!(a.trees, c.trees);
}

#[test]
fn importances_normalized_and_unused_features_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rows = random_rows(&mut rng, 150, 6);
    rows.iter_mut().for_each(|r| r[2] = 1.0);
    let labels: Vec<bool> = rows.iter().map(|r| r[0] > 0.0).collect();
    let model = train_forest(&matrix(&rows, &labels), &ForestParams { n_trees: 30, ..ForestParams::default() }).unwrap();
    assert!((model.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(model.importances.iter().all(|&v| v >= 0.0));
    assert_eq!(model.importances[2], 0.0);
    assert_eq!(model.ranked_importances()[0].0, "F00|w2s1|int0|mean");
}

#[test]
fn memorizes_without_bootstrap() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows = random_rows(&mut rng, 60, 5);
    let labels: Vec<bool> = (0..60).map(|_| rng.random_bool(0.4)).collect();
    let fm = matrix(&rows, &labels);
    let params = ForestParams {
        n_trees: 7,
        max_depth: None,
        min_samples_leaf: 1,
        bootstrap_rows: false,
        ..ForestParams::default()
    };
    let model = train_forest(&fm, &params).unwrap();
    for r in 0..fm.n_rows() {
        let (label, score) = model.predict(fm.row(r)).unwrap();
        assert_eq!(label, fm.labels()[r]);
        assert!(score == 0.0 || score == 1.0);
    }
}

#[test]
fn single_tree_scores_come_from_its_leaves() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let rows = random_rows(&mut rng, 80, 4);
    let labels: Vec<bool> = rows.iter().map(|r| r[0] + r[1] > 0.0).collect();
    let fm = matrix(&rows, &labels);
    let model = train_forest(&fm, &ForestParams { n_trees: 1, ..ForestParams::default() }).unwrap();
    let leaves: Vec<f64> = model.trees[0]
        .nodes
        .iter()
        .filter_map(|n| match n {
            Node::Leaf { scores } => {
                assert!((scores[0] + scores[1] - 1.0).abs() < 1e-12);
                Some(scores[1])
            }
            _ => None,
        })
        .collect();
    let probe = random_rows(&mut rng, 30, 4);
    for row in &probe {
        assert!(leaves.contains(&model.score(row).unwrap()));
    }
}

/// Walks the serialized JSON by hand rather than through `DecisionTree`.
#[test]
fn score_matches_manual_traversal_of_serialized_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows = random_rows(&mut rng, 100, 6);
    let labels: Vec<bool> = rows.iter().map(|r| r[3] > 0.3 || r[5] < -1.0).collect();
    let fm = matrix(&rows, &labels);
    let model = train_forest(&fm, &ForestParams { n_trees: 9, ..ForestParams::default() }).unwrap();
    let json: serde_json::Value = serde_json::to_value(&model).unwrap();
    for row in random_rows(&mut rng, 10, 6) {
        let mut total = 0.0;
        let trees = json["trees"].as_array().unwrap();
        for tree in trees {
            let nodes = tree["nodes"].as_array().unwrap();
            let mut i = 0;
            while nodes[i]["kind"] == "split" {
                let f = nodes[i]["feature"].as_u64().unwrap() as usize;
                let t = nodes[i]["threshold"].as_f64().unwrap();
                let key = if row[f] <= t { "left" } else { "right" };
                i = nodes[i][key].as_u64().unwrap() as usize;
            }
            total += nodes[i]["scores"][1].as_f64().unwrap();
        }
        let manual = total / trees.len() as f64;
        assert!((model.score(&row).unwrap() - manual).abs() < 1e-12);
    }
}

#[test]
fn prediction_errors_and_alignment() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows = random_rows(&mut rng, 10, 3);
    let labels: Vec<bool> = rows.iter().map(|r| r[0] > 0.0).collect();
    let fm = matrix(&rows, &labels);
    let model = train_forest(&fm, &ForestParams { n_trees: 5, min_samples_leaf: 1, ..ForestParams::default() }).unwrap();
    assert!(matches!(model.predict(&[0.0, 1.0]), Err(Error::Argument(_))));
    assert!(matches!(model.predict(&[0.0, f64::NAN, 1.0]), Err(Error::Argument(_))));

    let preds = model.predict_dataset(&fm).unwrap();
    assert_eq!(preds.len(), 10);
    for (p, id) in preds.iter().zip(fm.instance_ids()) {
        assert_eq!(&p.instance_id, id);
    }
    assert!(model.predict_dataset(&fm.select_rows(&[])).unwrap().is_empty());

    let dup = fm.select_rows(&[3, 3]);
    let out = model.predict_dataset(&dup).unwrap();
    assert_eq!((out[0].label, out[0].score), (out[1].label, out[1].score));

    let (_, s) = model.predict(fm.row(0)).unwrap();
    assert_eq!(model.predict_with_threshold(fm.row(0), s).unwrap().0, BinaryLabel::Flaring);
    assert_eq!(
        model.predict_with_threshold(fm.row(0), s + 1e-9).unwrap().0,
        BinaryLabel::NonFlaring
    );
}

#[test]
fn predict_dataset_rejects_misaligned_columns() {
    let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 0.5], vec![0.2, 0.9]];
    let fm = matrix(&rows, &[true, false, true, false]);
    let model = train_forest(&fm, &stump()).unwrap();
    let swapped = FeatureMatrix::new(
        vec![descriptor(1), descriptor(0)],
        rows.iter().flatten().copied().collect(),
        fm.instance_ids().to_vec(),
        fm.partition_ids().to_vec(),
        fm.labels().to_vec(),
    )
    .unwrap();
    assert!(matches!(model.predict_dataset(&swapped), Err(Error::Argument(_))));
}

#[test]
fn bundle_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rows = random_rows(&mut rng, 50, 4);
    let labels: Vec<bool> = rows.iter().map(|r| r[2] > 0.0).collect();
    let model = train_forest(&matrix(&rows, &labels), &ForestParams { n_trees: 4, ..ForestParams::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    assert_eq!(ForestModel::load(&path).unwrap(), model);
    assert!(matches!(
        ForestModel::load(&dir.path().join("absent.json")),
        Err(Error::MissingInput(_))
    ));
}

#[test]
fn class_weight_never_reduces_positive_calls() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let rows = random_rows(&mut rng, 300, 6);
    let labels: Vec<bool> = rows
        .iter()
        .map(|r| r[0] + 0.8 * rng.sample::<f64, _>(StandardNormal) > 1.4)
        .collect();
    let fm = matrix(&rows, &labels);
    let probe = matrix(&random_rows(&mut rng, 300, 6), &labels);
    for seed in 0..5 {
        let mut last = 0;
        for cw in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let params = ForestParams { n_trees: 50, seed, class_weight_positive: cw, ..ForestParams::default() };
            let model = train_forest(&fm, &params).unwrap();
            let calls = model.predict_labels(&probe).unwrap().iter().filter(|l| l.is_flaring()).count();
            assert!(calls >= last, "seed {seed} cw {cw}: {calls} < {last}");
            last = calls;
        }
    }
}

#[test]
fn shuffled_labels_carry_no_skill() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let train_rows = random_rows(&mut rng, 400, 8);
    let test_rows = random_rows(&mut rng, 1000, 8);
    let base: Vec<bool> = (0..1400).map(|i| i % 2 == 0).collect();
    for seed in 0..20u64 {
        let mut labels = base.clone();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(1000 + seed));
        let train = matrix(&train_rows, &labels[..400]);
        let test = matrix(&test_rows, &labels[400..]);
        let model = train_forest(&train, &ForestParams { n_trees: 30, seed, ..ForestParams::default() }).unwrap();
        let pred = model.predict_labels(&test).unwrap();
        let t = tss(&contingency(test.labels(), &pred).unwrap()).unwrap();
        assert!(t.abs() < 0.15, "seed {seed}: TSS {t}");
    }
}

#[test]
fn shuffled_label_importances_are_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let rows = random_rows(&mut rng, 200, 10);
    let uniform = 1.0 / 10.0;
    let mut dominated = [0usize; 10];
    for seed in 0..50u64 {
        let mut labels: Vec<bool> = (0..200).map(|i| i % 3 == 0).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let model = train_forest(&matrix(&rows, &labels), &ForestParams { n_trees: 20, seed, ..ForestParams::default() }).unwrap();
        for (j, &imp) in model.importances.iter().enumerate() {
            if imp > 3.0 * uniform {
                dominated[j] += 1;
            }
        }
    }
    assert!(dominated.iter().all(|&c| c < 40), "{dominated:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn stump_matches_exhaustive_search(
        n in 2usize..80,
        p in 1usize..8,
        seed in any::<u64>(),
        cw in 0.2f64..6.0,
        integer_grid in any::<bool>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = random_rows(&mut rng, n, p);
        if integer_grid {
            // Coarse values make many tied splits.
            rows.iter_mut().flatten().for_each(|v| *v = (*v * 2.0).round());
        }
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.35)).collect();
        labels[0] = true;
        labels[1] = false;
        let fm = matrix(&rows, &labels);
        let model = train_forest(&fm, &ForestParams { class_weight_positive: cw, ..stump() }).unwrap();
        match (root_split(&model), oracle_root_split(&rows, &labels, cw)) {
            (Some((f, t, d)), Some((of, ot, od))) => {
                prop_assert_eq!((f, t), (of, ot));
                prop_assert!((d - od).abs() < 1e-10);
            }
            (None, None) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }
}
