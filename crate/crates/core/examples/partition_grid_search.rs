//! Leave-one-partition-out grid search, with a leakage audit on every fold.

use std::sync::Mutex;


use slimtsf::features::ScaleGrid;
use slimtsf::forest::ForestParams;
use slimtsf::selection::{
    grid_search_observed, make_fold_plan, write_registry, FoldAudit, FoldScheme, ForestAxes, SearchGrid,
};
use slimtsf::synthetic::PlantedSignal;

fn main() -> slimtsf::Result<()> {
    let ds = PlantedSignal { n_instances: 250, ..Default::default() }.generate()?;
    let plan = make_fold_plan(&ds, &FoldScheme::LeaveOnePartitionOut)?;

    let base = ForestParams { n_trees: 25, ..Default::default() };
    let mut grid = SearchGrid {
        scale_grids: vec![ScaleGrid::default_for(60)?, "12:6".parse()?],
        forest: ForestAxes::single(&base),
        ..Default::default()
    };
    grid.forest.class_weight_positive = vec![1.0, 4.0];

    let violations = Mutex::new(0usize);
    let audit = |a: &FoldAudit| {
        let overlap = a.train_ids.iter().filter(|id| a.validation_ids.contains(id)).count()
            + a.train_partitions.iter().filter(|p| a.validation_partitions.contains(p)).count();
        *violations.lock().unwrap() += overlap;
    };
    let outcome = grid_search_observed(&ds, &grid, &plan, 3, &audit)?;

    println!("{} grid points x {} folds", outcome.index.len(), plan.len());
    for e in &outcome.index {
        println!("  {}  mean TSS {:?}  features {}", &e.config_digest[..12], e.mean_score, e.n_features);
    }
    println!("best {}  leakage violations: {}", &outcome.best.config_digest[..12], violations.into_inner().unwrap());

    let dir = std::env::temp_dir().join("slimtsf-example-registry");
    write_registry(&dir, &ds, &plan, &outcome)?;
    println!("registry in {}", dir.display());
    Ok(())
}
