use super::*;
use crate::synthetic::PlantedSignal;
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn dataset(n: usize, p: usize, t: usize) -> Dataset {
    PlantedSignal {
        n_instances: n,
        n_parameters: p,
        timesteps: t,
        planted_parameter: 0,
        signal_window: (0, t.min(4)),
        n_partitions: 1,
        ..PlantedSignal::default()
    }
    .generate()
    .unwrap()
}

fn grid(s: &str) -> ScaleGrid {
    s.parse().unwrap()
}

#[test]
fn intervals_cover_expected_ranges() {
    let one = generate_intervals(10, WindowConfig::new(10, 1).unwrap()).unwrap();
    assert_eq!(one, vec![(0, 10)]);

    let iv = generate_intervals(60, WindowConfig::new(12, 6).unwrap()).unwrap();
    assert_eq!(iv.len(), 9);
    let starts: Vec<usize> = iv.iter().map(|r| r.0).collect();
    assert_eq!(starts, vec![0, 6, 12, 18, 24, 30, 36, 42, 48]);
    assert!(iv.iter().all(|&(s, e)| e - s == 12 && e <= 60));

    assert!(matches!(
        generate_intervals(5, WindowConfig::new(6, 1).unwrap()),
        Err(Error::Argument(_))
    ));
}

#[test]
fn window_config_rejects_degenerate_sizes() {
    assert!(WindowConfig::new(1, 1).is_err());
    assert!(WindowConfig::new(4, 0).is_err());
    assert!("0:6".parse::<WindowConfig>().is_err());
    assert!("12".parse::<WindowConfig>().is_err());
    assert!("12:6,12:6".parse::<ScaleGrid>().is_err());
    assert!("".parse::<ScaleGrid>().is_err());
    assert_eq!(grid("12:6, 20:10").to_string(), "12:6,20:10");

    let json = serde_json::to_string(&grid("12:6")).unwrap();
    assert_eq!(serde_json::from_str::<ScaleGrid>(&json).unwrap(), grid("12:6"));
    assert!(serde_json::from_str::<ScaleGrid>(r#"[{"window":1,"step":1}]"#).is_err());
}

#[test]
fn default_grid_for_sixty_steps() {
    assert_eq!(ScaleGrid::default_for(60).unwrap(), grid("12:6,20:10,30:15"));
    assert_eq!(ScaleGrid::default_for(4).unwrap(), grid("2:1"));
}

#[test]
fn interval_stats_anchors() {
    let s = interval_stats(&[2.0, 2.0, 2.0, 2.0], (0, 4)).unwrap();
    assert_eq!((s.mean, s.std, s.slope), (2.0, 0.0, 0.0));

    let s = interval_stats(&[0.0, 1.0, 2.0, 3.0], (0, 4)).unwrap();
    assert_eq!(s.mean, 1.5);
    assert!(close(s.slope, 1.0, 1e-15));
    assert!(close(s.std, (5.0f64 / 3.0).sqrt(), 1e-15));
    assert!(close(s.std, 1.290994, 1e-6));

    let s = interval_stats(&[3.0, 1.0], (0, 2)).unwrap();
    assert_eq!(s.mean, 2.0);
    assert!(close(s.slope, -2.0, 1e-15));
    assert!(close(s.std, std::f64::consts::SQRT_2, 1e-15));

    assert!(interval_stats(&[1.0, 2.0, 3.0], (1, 2)).is_err());
    assert!(interval_stats(&[1.0, 2.0, 3.0], (1, 4)).is_err());
}

#[test]
fn pooling_anchors() {
    let one = IntervalStats { mean: 1.0, std: 2.0, slope: -3.0 };
    let p = pool_stats(&[one]).unwrap();
    for stat in Statistic::ALL {
        for pool in PoolKind::ALL {
            assert_eq!(p.get(stat, pool), one.get(stat));
        }
    }
    let three: Vec<IntervalStats> = [1.0, 3.0, 5.0]
        .iter()
        .map(|&m| IntervalStats { mean: m, std: 0.0, slope: 0.0 })
        .collect();
    let p = pool_stats(&three).unwrap();
    assert_eq!(p.get(Statistic::Mean, PoolKind::Max), 5.0);
    assert_eq!(p.get(Statistic::Mean, PoolKind::Min), 1.0);
    assert_eq!(p.get(Statistic::Mean, PoolKind::Mean), 3.0);
    assert!(pool_stats(&[]).is_err());
}

// Brute-force recomputation for a sine series: each interval's statistics
// from explicit textbook formulas (sum of squares, normal-equation slope).
#[test]
fn pooled_sine_matches_spreadsheet_recomputation() {
    let series: Vec<f64> = (0..60).map(|t| (t as f64 * 0.3).sin() * 4.0 + 0.1 * t as f64).collect();
    let cfg = WindowConfig::new(12, 6).unwrap();
    let intervals = generate_intervals(60, cfg).unwrap();
    assert_eq!(intervals.len(), 9);

    let mut oracle = Vec::new();
    for &(s, e) in &intervals {
        let ys = &series[s..e];
        let n = ys.len() as f64;
        let sum: f64 = ys.iter().sum();
        let sum_sq: f64 = ys.iter().map(|y| y * y).sum();
        let var = (sum_sq - sum * sum / n) / (n - 1.0);
        let ts: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
        let st: f64 = ts.iter().sum();
        let stt: f64 = ts.iter().map(|t| t * t).sum();
        let sty: f64 = ts.iter().zip(ys).map(|(t, y)| t * y).sum();
        let slope = (n * sty - st * sum) / (n * stt - st * st);
        oracle.push((sum / n, var.sqrt(), slope));
    }
    let stats: Vec<IntervalStats> = intervals.iter().map(|&iv| interval_stats(&series, iv).unwrap()).collect();
    for (s, o) in stats.iter().zip(&oracle) {
        assert!(close(s.mean, o.0, 1e-12));
        assert!(close(s.std, o.1, 1e-9));
        assert!(close(s.slope, o.2, 1e-9));
    }
    let pooled = pool_stats(&stats).unwrap();
    let col = |k: usize| oracle.iter().map(move |o| [o.0, o.1, o.2][k]);
    for (k, stat) in Statistic::ALL.into_iter().enumerate() {
        let max = col(k).fold(f64::MIN, f64::max);
        let min = col(k).fold(f64::MAX, f64::min);
        let mean = col(k).sum::<f64>() / 9.0;
        assert!(close(pooled.get(stat, PoolKind::Max), max, 1e-9));
        assert!(close(pooled.get(stat, PoolKind::Min), min, 1e-9));
        assert!(close(pooled.get(stat, PoolKind::Mean), mean, 1e-9));
    }
}

#[test]
fn feature_counts_follow_layout_formula() {
    let ds = dataset(3, 2, 60);
    let (v, d) = featurize_instance(&ds.instances()[0], &grid("12:6")).unwrap();
    assert_eq!(v.len(), 72);
    assert_eq!(d.len(), 72);

    let ds24 = dataset(2, 24, 60);
    let (v, _) = featurize_instance(&ds24.instances()[0], &grid("12:6")).unwrap();
    assert_eq!(v.len(), 864);
    let (v, _) = featurize_instance(&ds24.instances()[0], &grid("12:6,20:10")).unwrap();
    assert_eq!(v.len(), 1440);

    let tiny = dataset(2, 1, 4);
    let (v, d) = featurize_instance(&tiny.instances()[0], &grid("4:1")).unwrap();
    assert_eq!(v.len(), 12);
    assert!(matches!(d[0].slot, FeatureSlot::Interval(0)));
    for stat in Statistic::ALL {
        let interval = v[stat as usize];
        for pool in PoolKind::ALL {
            assert_eq!(v[3 + 3 * stat as usize + pool as usize], interval);
        }
    }

    assert!(featurize_instance(&tiny.instances()[0], &grid("5:1")).is_err());
}

#[test]
fn canonical_ids_round_trip() {
    let ds = dataset(2, 3, 20);
    let (_, descs) = featurize_instance(&ds.instances()[0], &grid("4:2,10:5")).unwrap();
    let ids: BTreeSet<String> = descs.iter().map(FeatureDescriptor::canonical_id).collect();
    assert_eq!(ids.len(), descs.len());
    for d in &descs {
        assert_eq!(&FeatureDescriptor::parse(&d.canonical_id()).unwrap(), d);
    }
    assert_eq!(descs[0].canonical_id(), "TOTUSJH|w4s2|int0|mean");
    assert!(FeatureDescriptor::parse("a|w4|int0|mean").is_err());
    assert!(FeatureDescriptor::parse("a|w4s2|poolmedian|mean").is_err());
}

#[test]
fn pipe_in_parameter_name_is_rejected() {
    let ds = dataset(2, 1, 10);
    let mut inst = ds.instances()[0].clone();
    inst.parameter_names = vec!["A|B".into()];
    assert!(matches!(featurize_instance(&inst, &grid("4:2")), Err(Error::Argument(_))));
}

#[test]
fn dataset_featurization() {
    let ds = dataset(10, 2, 60);
    let fm = featurize_dataset(&ds, &grid("12:6")).unwrap();
    assert_eq!((fm.n_rows(), fm.n_features()), (10, 72));
    for (i, inst) in ds.instances().iter().enumerate() {
        assert_eq!(fm.row(i), featurize_instance(inst, &grid("12:6")).unwrap().0.as_slice());
        assert_eq!(fm.instance_ids()[i], inst.instance_id);
    }

    let same = Dataset::from_instances(
        (0..3)
            .map(|k| TimeSeriesInstance {
                instance_id: format!("dup{k}"),
                ..ds.instances()[0].clone()
            })
            .collect(),
    )
    .unwrap();
    let fm = featurize_dataset(&same, &grid("12:6")).unwrap();
    assert_eq!(fm.row(0), fm.row(1));
    assert_eq!(fm.row(1), fm.row(2));
}

#[test]
fn dataset_featurization_rejects_bad_inputs() {
    let ds = dataset(4, 2, 30);
    let mut insts = ds.clone().into_instances();
    insts[2].values[1][5] = f64::NAN;
    let with_nan = Dataset::from_instances(insts).unwrap();
    assert!(matches!(featurize_dataset(&with_nan, &grid("6:3")), Err(Error::Validation(_))));

    let mut insts = ds.into_instances();
    for row in insts[1].values.iter_mut() {
        row.truncate(20);
    }
    insts[1].timestamps.truncate(20);
    let mixed = Dataset::from_instances(insts).unwrap();
    assert!(matches!(featurize_dataset(&mixed, &grid("6:3")), Err(Error::Validation(_))));
}

#[test]
fn column_selection() {
    let ds = dataset(10, 24, 60);
    let fm = featurize_dataset(&ds, &grid("12:6")).unwrap();
    assert_eq!(fm.n_features(), 864);
    let all: BTreeSet<String> = fm.feature_ids().into_iter().collect();
    assert_eq!(select_columns(&fm, &all).unwrap(), fm);

    let nine: BTreeSet<String> = fm.feature_ids().into_iter().step_by(97).take(9).collect();
    let sub = select_columns(&fm, &nine).unwrap();
    assert_eq!((sub.n_rows(), sub.n_features()), (10, 9));
    let order: Vec<String> = fm.feature_ids().into_iter().filter(|id| nine.contains(id)).collect();
    assert_eq!(sub.feature_ids(), order);
    assert_eq!(sub.instance_ids(), fm.instance_ids());

    assert!(matches!(select_columns(&fm, &BTreeSet::new()), Err(Error::Argument(_))));
    let bogus: BTreeSet<String> = ["nope|w1s1|int0|mean".to_string()].into();
    assert!(matches!(select_columns(&fm, &bogus), Err(Error::Argument(_))));

    let reversed: Vec<String> = sub.feature_ids().into_iter().rev().collect();
    let proj = project_columns(&fm, &reversed).unwrap();
    assert_eq!(proj.feature_ids(), reversed);
    assert_eq!(proj.value(3, 0), sub.value(3, 8));
    assert!(matches!(project_columns(&fm, &["nope".to_string()]), Err(Error::Argument(_))));
}

#[test]
fn matrix_files_round_trip_exactly() {
    let ds = dataset(6, 2, 30);
    let fm = featurize_dataset(&ds, &grid("6:3,10:10")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    write_feature_matrix(&fm, tmp.path()).unwrap();
    let back = read_feature_matrix(tmp.path()).unwrap();
    assert_eq!(back, fm);
}

#[test]
fn every_entry_recomputes_from_its_descriptor() {
    let ds = dataset(3, 3, 25);
    let g = grid("5:2,8:8,25:1");
    for inst in ds.instances() {
        let (v, d) = featurize_instance(inst, &g).unwrap();
        for (value, desc) in v.iter().zip(&d) {
            assert_eq!(value.to_bits(), feature_value(inst, desc).unwrap().to_bits(), "{}", desc.canonical_id());
        }
    }
}

proptest! {
    #[test]
    fn interval_count_property(t in 2usize..500, w_frac in 0.0f64..1.0, s in 1usize..50) {
        let w = 2 + ((t - 2) as f64 * w_frac) as usize;
        let cfg = WindowConfig::new(w, s).unwrap();
        let iv = generate_intervals(t, cfg).unwrap();
        prop_assert_eq!(iv.len(), (t - w) / s + 1);
        prop_assert!(iv.iter().all(|&(a, b)| b - a == w && b <= t));
    }

    #[test]
    fn pooled_bounds(means in prop::collection::vec(-1e3f64..1e3, 1..20)) {
        let stats: Vec<IntervalStats> = means.iter().map(|&m| IntervalStats { mean: m, std: m.abs(), slope: -m }).collect();
        let p = pool_stats(&stats).unwrap();
        for stat in Statistic::ALL {
            let (mx, mn, me) = (p.get(stat, PoolKind::Max), p.get(stat, PoolKind::Min), p.get(stat, PoolKind::Mean));
            prop_assert!(mn <= me + 1e-9 && me <= mx + 1e-9);
        }
    }

    #[test]
    fn shift_and_scale(series in prop::collection::vec(-100.0f64..100.0, 2..40),
                       c in -100.0f64..100.0, lambda in -10.0f64..10.0) {
        let iv = (0, series.len());
        let base = interval_stats(&series, iv).unwrap();
        let shifted: Vec<f64> = series.iter().map(|v| v + c).collect();
        let s = interval_stats(&shifted, iv).unwrap();
        prop_assert!(close(s.mean, base.mean + c, 1e-12));
        prop_assert!(close(s.std, base.std, 1e-12));
        prop_assert!(close(s.slope, base.slope, 1e-12));

        let scaled: Vec<f64> = series.iter().map(|v| v * lambda).collect();
        let s = interval_stats(&scaled, iv).unwrap();
        let tol = 1e-11 * (1.0 + lambda.abs()) * 100.0;
        prop_assert!(close(s.mean, lambda * base.mean, tol));
        prop_assert!(close(s.std, lambda.abs() * base.std, tol));
        prop_assert!(close(s.slope, lambda * base.slope, tol));
    }
}
