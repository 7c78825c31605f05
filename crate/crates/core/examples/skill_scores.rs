//! Skill scores from a contingency table, including the degenerate cases.

use slimtsf::data::BinaryLabel::{Flaring as F, NonFlaring as N};
use slimtsf::metrics::{contingency, hss, tss, weighted_tss, ContingencyTable, ScoreSet};

fn main() -> slimtsf::Result<()> {
    // tp, fn, fp, tn
    let t = ContingencyTable::new(50, 10, 20, 120);
    println!("TSS  {:.6}", tss(&t)?);
    println!("HSS  {:.6}", hss(&t)?);
    for alpha in [0.5, 1.0, 1.5] {
        println!("wTSS alpha={alpha}: {:.6}", weighted_tss(&t, alpha)?);
    }

    // TSS ignores the class ratio; HSS does not.
    let t10 = ContingencyTable::new(t.tp, t.fn_, t.fp * 10, t.tn * 10);
    println!("negatives x10: TSS {:.6}  HSS {:.6}", tss(&t10)?, hss(&t10)?);

    let truth = [F, F, N, N, N];
    let guess = [F, N, N, F, N];
    println!("from labels: {:?}", contingency(&truth, &guess)?);

    // No positives: TSS is undefined, reported as None rather than an error.
    let quiet = ScoreSet::from_table(ContingencyTable::new(0, 0, 3, 7), &[1.0])?;
    for (name, v) in quiet.named() {
        println!("quiet {name}: {v:?}");
    }
    Ok(())
}
