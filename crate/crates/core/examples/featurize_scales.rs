//! Multi-scale interval features for one instance and for a whole dataset.

use slimtsf::features::{
    featurize_dataset, generate_intervals, interval_stats, FeatureDescriptor, ScaleGrid, Statistic,
};
use slimtsf::synthetic::PlantedSignal;

fn main() -> slimtsf::Result<()> {
    let ds = PlantedSignal { n_instances: 50, n_parameters: 3, planted_parameter: 1, ..Default::default() }
        .generate()?;
    let t = ds.uniform_timesteps().expect("synthetic series share a length");

    let grid = ScaleGrid::default_for(t)?;
    println!("T = {t}, default scales: {grid}");
    for cfg in grid.scales() {
        let intervals = generate_intervals(t, *cfg)?;
        println!("  {cfg}: {} intervals, first {:?}, last {:?}", intervals.len(), intervals[0], intervals.last().unwrap());
    }

    let series = ds.instances()[0].series(&ds.parameter_names()[1]).unwrap();
    let stats = interval_stats(series, (24, 36))?;
    println!(
        "stats over [24, 36): mean {:.3} std {:.3} slope {:.4}",
        stats.get(Statistic::Mean),
        stats.get(Statistic::Std),
        stats.get(Statistic::Slope)
    );

    let fm = featurize_dataset(&ds, &grid)?;
    println!("matrix: {} rows x {} features", fm.n_rows(), fm.n_features());
    for id in fm.feature_ids().iter().take(4) {
        let d = FeatureDescriptor::parse(id)?;
        println!("  {id} -> parameter {} at {}", d.parameter, d.scale);
    }
    Ok(())
}
