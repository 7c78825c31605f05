//! Forecast skill scores over a 2×2 contingency table.
//!
//! Flaring is the positive class. `P = TP + FN` are the actual positives and
//! `N = FP + TN` the actual negatives.
//!
//! * TSS = TP/(TP+FN) − FP/(FP+TN) = TPR + TNR − 1
//! * weighted TSS = α·TPR + (2 − α)·TNR − 1, with α ∈ (0, 2). α/2 is the
//!   relative importance of detecting flares; α/2 = 0.75 makes a hit three
//!   times as important as a correct quiet forecast.
//! * HSS = 2(TP·TN − FN·FP) / (P·(FN+TN) + N·(TP+FP))
//!
//! Scores whose denominators vanish return [`Error::UndefinedScore`] rather
//! than a silent 0 or NaN.

use serde::{Deserialize, Serialize};

use crate::data::BinaryLabel;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ContingencyTable {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self { tp, fn_, fp, tn }
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }

    pub fn total(&self) -> u64 {
        self.positives() + self.negatives()
    }

    /// Every cell multiplied by `k`.
    pub fn scaled(&self, k: u64) -> Self {
        Self::new(self.tp * k, self.fn_ * k, self.fp * k, self.tn * k)
    }

    /// The table obtained by flipping every prediction.
    pub fn with_predictions_flipped(&self) -> Self {
        Self::new(self.fn_, self.tp, self.tn, self.fp)
    }

    /// Probability of detection, TP / P.
    pub fn tpr(&self) -> Result<f64> {
        if self.positives() == 0 {
            return Err(Error::UndefinedScore("no actual positives".into()));
        }
        Ok(self.tp as f64 / self.positives() as f64)
    }

    pub fn tnr(&self) -> Result<f64> {
        if self.negatives() == 0 {
            return Err(Error::UndefinedScore("no actual negatives".into()));
        }
        Ok(self.tn as f64 / self.negatives() as f64)
    }

    /// Probability of false detection, FP / N.
    pub fn pofd(&self) -> Result<f64> {
        if self.negatives() == 0 {
            return Err(Error::UndefinedScore("no actual negatives".into()));
        }
        Ok(self.fp as f64 / self.negatives() as f64)
    }
}

pub fn contingency(y_true: &[BinaryLabel], y_pred: &[BinaryLabel]) -> Result<ContingencyTable> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Argument(format!(
            "{} truths vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Argument("no predictions".into()));
    }
    let mut t = ContingencyTable::default();
    for (truth, pred) in y_true.iter().zip(y_pred) {
        match (truth.is_flaring(), pred.is_flaring()) {
            (true, true) => t.tp += 1,
            (true, false) => t.fn_ += 1,
            (false, true) => t.fp += 1,
            (false, false) => t.tn += 1,
        }
    }
    Ok(t)
}

pub fn tss(t: &ContingencyTable) -> Result<f64> {
    Ok(t.tpr()? - t.pofd()?)
}

pub fn weighted_tss(t: &ContingencyTable, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::Argument(format!("alpha {alpha} outside (0, 2)")));
    }
    if alpha == 1.0 {
        return tss(t);
    }
    Ok(alpha * t.tpr()? + (2.0 - alpha) * t.tnr()? - 1.0)
}

pub fn hss(t: &ContingencyTable) -> Result<f64> {
    let (tp, fn_, fp, tn) = (t.tp as f64, t.fn_ as f64, t.fp as f64, t.tn as f64);
    let p = tp + fn_;
    let n = fp + tn;
    let denom = p * (fn_ + tn) + n * (tp + fp);
    if denom == 0.0 {
        return Err(Error::UndefinedScore("HSS denominator is zero".into()));
    }
    Ok(2.0 * (tp * tn - fn_ * fp) / denom)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedTss {
    pub alpha: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillReport {
    pub table: ContingencyTable,
    pub tss: f64,
    pub hss: f64,
    pub wtss: Vec<WeightedTss>,
    pub tpr: f64,
    pub tnr: f64,
    pub pofd: f64,
}

impl SkillReport {
    pub fn from_table(table: ContingencyTable, alphas: &[f64]) -> Result<Self> {
        let wtss = alphas
            .iter()
            .map(|&alpha| Ok(WeightedTss { alpha, value: weighted_tss(&table, alpha)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            table,
            tss: tss(&table)?,
            hss: hss(&table)?,
            wtss,
            tpr: table.tpr()?,
            tnr: table.tnr()?,
            pofd: table.pofd()?,
        })
    }
}

pub fn skill_report(y_true: &[BinaryLabel], y_pred: &[BinaryLabel], alphas: &[f64]) -> Result<SkillReport> {
    SkillReport::from_table(contingency(y_true, y_pred)?, alphas)
}

/// Scores that may individually be undefined; used where one empty class
/// should not abort a whole experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub table: ContingencyTable,
    pub tss: Option<f64>,
    pub hss: Option<f64>,
    /// (alpha, value) pairs in the order requested.
    pub wtss: Vec<(f64, Option<f64>)>,
}

impl ScoreSet {
    pub fn from_table(table: ContingencyTable, alphas: &[f64]) -> Result<Self> {
        for &a in alphas {
            if !(a > 0.0 && a < 2.0) {
                return Err(Error::Argument(format!("alpha {a} outside (0, 2)")));
            }
        }
        Ok(Self {
            table,
            tss: tss(&table).ok(),
            hss: hss(&table).ok(),
            wtss: alphas.iter().map(|&a| (a, weighted_tss(&table, a).ok())).collect(),
        })
    }

    /// (metric name, value) pairs: `tss`, `hss`, then `wtss@<alpha>`.
    pub fn named(&self) -> Vec<(String, Option<f64>)> {
        let mut out = vec![("tss".to_string(), self.tss), ("hss".to_string(), self.hss)];
        out.extend(self.wtss.iter().map(|(a, v)| (format!("wtss@{a}"), *v)));
        out
    }
}

pub fn format_score(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}
