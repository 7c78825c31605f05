//! A small bootstrap campaign at two class weights, followed by ex-ante
//! evaluation of the selected features.

use std::collections::BTreeSet;

use slimtsf::bootstrap::{ex_ante_evaluate_matrices, run_bootstrap_matrices, write_campaigns, BootstrapConfig};
use slimtsf::features::{featurize_dataset, ScaleGrid};
use slimtsf::forest::ForestParams;
use slimtsf::metrics::format_score;
use slimtsf::synthetic::PlantedSignal;

fn main() -> slimtsf::Result<()> {
    let spec = PlantedSignal::default();
    let ds = spec.generate()?;
    let grid = ScaleGrid::default_for(spec.timesteps)?;
    let fm = featurize_dataset(&ds, &grid)?;
    let test_part = BTreeSet::from(["P5".to_string()]);
    let train_parts: BTreeSet<String> = ds.partitions().difference(&test_part).cloned().collect();
    let train = fm.select_rows(&fm.rows_in_partitions(&train_parts));
    let test = fm.select_rows(&fm.rows_in_partitions(&test_part));

    let cfg = BootstrapConfig {
        n_runs: 12,
        subsample_fraction: 0.8,
        forest: ForestParams { n_trees: 30, ..Default::default() },
        scale_grid: Some(grid),
        class_weights: vec![1.0, 3.0],
        master_seed: 2024,
        ..Default::default()
    };
    let campaigns = run_bootstrap_matrices(&train, &test, &cfg)?;

    let planted = spec.planted_parameter_name();
    for c in &campaigns {
        let s = &c.summary;
        let tss = s.metric("tss", "test").unwrap();
        println!(
            "cw {}: test TSS {} +/- {} over {} runs ({} failed); {planted} participation {:.2}",
            s.class_weight,
            format_score(tss.mean),
            format_score(tss.std),
            tss.n,
            s.n_failed,
            s.participation.get(&planted).copied().unwrap_or(0.0)
        );
        let params = ForestParams { class_weight_positive: c.class_weight, ..cfg.forest.clone() };
        let all: BTreeSet<String> = train.feature_ids().into_iter().collect();
        let reduced = ex_ante_evaluate_matrices(&train, &test, &s.final_selection, &params, &[1.0])?;
        let full = ex_ante_evaluate_matrices(&train, &test, &all, &params, &[1.0])?;
        println!(
            "  {} selected features: TSS {:.3} vs {:.3} with all {}",
            s.final_selection.len(),
            reduced.tss,
            full.tss,
            all.len()
        );
    }

    let dir = std::env::temp_dir().join("slimtsf-example-campaign");
    write_campaigns(&dir, &cfg, &campaigns)?;
    println!("campaign written to {}", dir.display());
    Ok(())
}
