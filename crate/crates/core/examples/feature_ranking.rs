//! Rank importances, keep the top log2(n), and tally selections across
//! experiments into frequency and per-interval counting vectors.

use slimtsf::features::FeatureDescriptor;
use slimtsf::ranking::{
    aggregate_sfs, counting_vector, log_filter_k, participation_ratio, parameters_of, rank_features,
    select_final, top_k,
};

fn main() -> slimtsf::Result<()> {
    let experiments = [
        vec![("A|w4s2|int0|mean", 0.40), ("A|w4s2|int1|mean", 0.25), ("B|w4s2|int0|std", 0.20), ("C|w4s2|poolmax|slope", 0.15)],
        vec![("A|w4s2|int1|mean", 0.50), ("B|w4s2|int0|std", 0.30), ("A|w4s2|int0|mean", 0.10), ("C|w4s2|poolmax|slope", 0.10)],
        vec![("C|w4s2|poolmax|slope", 0.45), ("A|w4s2|int1|mean", 0.35), ("A|w4s2|int0|mean", 0.10), ("B|w4s2|int0|std", 0.10)],
    ];

    let k = log_filter_k(4);
    let mut members = Vec::new();
    let mut history = Vec::new();
    for (i, imps) in experiments.iter().enumerate() {
        let pairs: Vec<(String, f64)> = imps.iter().map(|(id, v)| (id.to_string(), *v)).collect();
        let ranking = rank_features(&pairs)?;
        let m = top_k(&ranking, k)?.tagged(format!("run{i}"));
        println!("run{i} keeps {:?}", m.members);
        history.push(parameters_of(&m.members));
        members.push(m);
    }

    let sfs = aggregate_sfs(&members)?;
    println!("selection counts: {:?}", sfs.ranked());
    println!("final top-{k}: {:?}", select_final(&sfs, k)?);

    let descriptors = sfs.counts.keys().map(|id| FeatureDescriptor::parse(id)).collect::<Result<Vec<_>, _>>()?;
    for (slot, n) in &counting_vector(&sfs, &descriptors)?.counts {
        println!("  slot {slot}: {n}");
    }
    println!("participation: {:?}", participation_ratio(&history, history.len())?);
    Ok(())
}
