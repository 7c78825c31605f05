//! Writes a planted-signal dataset bundle with a few gaps, reads it back and
//! imputes the gaps.
//!
//! ```text
//! cargo run --example synthetic_bundle -- /tmp/planted
//! slimtsf ingest /tmp/planted --out /tmp/planted-clean
//! ```

use std::path::PathBuf;

use slimtsf::data::{impute_dataset, load_dataset, write_dataset, Dataset, ImputePolicy, IngestSchema};
use slimtsf::synthetic::PlantedSignal;

fn main() -> slimtsf::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("slimtsf-planted"));

    let spec = PlantedSignal { n_instances: 200, ..PlantedSignal::default() };
    let clean = spec.generate()?;

    // Punch holes: a short gap in every 10th instance, and one parameter
    // missing outright in the first instance.
    let mut instances = clean.into_instances();
    for (i, inst) in instances.iter_mut().enumerate() {
        if i % 10 == 0 {
            for v in &mut inst.values[0][10..14] {
                *v = f64::NAN;
            }
        }
    }
    instances[0].values[1].iter_mut().for_each(|v| *v = f64::NAN);
    let gappy = Dataset::new(spec.parameter_names(), instances)?;

    write_dataset(&gappy, &dir)?;
    let loaded = load_dataset(&dir, &IngestSchema::default())?;
    let (imputed, report) = impute_dataset(&loaded, ImputePolicy::Linear)?;

    println!("bundle: {}", dir.display());
    println!("instances: {}  partitions: {:?}", imputed.len(), imputed.partitions());
    println!("planted parameter: {}", spec.planted_parameter_name());
    for (id, params) in &report.flagged {
        println!("flagged {id}: {} entirely missing, zero-filled", params.join(", "));
    }
    let finite = imputed.instances().iter().all(|i| i.is_finite());
    println!("all values finite after imputation: {finite}");
    Ok(())
}
