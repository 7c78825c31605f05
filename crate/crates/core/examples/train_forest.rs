//! Train a forest on four partitions, score the fifth, save and reload it.

use std::collections::BTreeSet;

use slimtsf::features::{featurize_dataset, ScaleGrid};
use slimtsf::forest::{train_forest, ForestModel, ForestParams};
use slimtsf::metrics::skill_report;
use slimtsf::synthetic::PlantedSignal;

fn main() -> slimtsf::Result<()> {
    let ds = PlantedSignal::default().generate()?;
    let fm = featurize_dataset(&ds, &ScaleGrid::default_for(60)?)?;

    let test_part = BTreeSet::from(["P5".to_string()]);
    let train_parts: BTreeSet<String> = ds.partitions().difference(&test_part).cloned().collect();
    let train = fm.select_rows(&fm.rows_in_partitions(&train_parts));
    let test = fm.select_rows(&fm.rows_in_partitions(&test_part));

    let params = ForestParams { n_trees: 50, class_weight_positive: 2.0, seed: 11, ..Default::default() };
    let model = train_forest(&train, &params)?;
    let predicted = model.predict_labels(&test)?;
    let report = skill_report(test.labels(), &predicted, &[0.5, 1.5])?;
    println!("held-out P5: TSS {:.3}  HSS {:.3}", report.tss, report.hss);
    for w in &report.wtss {
        println!("  wTSS(alpha={}) {:.3}", w.alpha, w.value);
    }

    println!("top features:");
    for (id, imp) in model.ranked_importances().iter().take(5) {
        println!("  {imp:.4}  {id}");
    }

    let path = std::env::temp_dir().join("slimtsf-example-model.json");
    model.save(&path)?;
    let back = ForestModel::load(&path)?;
    assert_eq!(back.predict_labels(&test)?, predicted);
    println!("saved and reloaded {}", path.display());
    Ok(())
}
