use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Prediction;
use crate::error::{Error, Result};

fn unknown(item_id: &str) -> Error {
    Error::Integrity(format!("prediction for unknown item `{item_id}`"))
}

/// Mean over items of average precision truncated at `k`, normalized by
/// `min(k, |gold|)`.
pub fn map_at_k(predictions: &[Prediction], golds: &BTreeMap<String, BTreeSet<String>>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if predictions.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in predictions {
        let gold = golds.get(&p.item_id).ok_or_else(|| unknown(&p.item_id))?;
        let denom = k.min(gold.len());
        if denom == 0 {
            continue;
        }
        let mut hits = 0usize;
        let mut sum = 0.0;
        let mut found = BTreeSet::new();
        for (rank, label) in p.ranked_labels.iter().take(k).enumerate() {
            // A repeated label is relevant only at its first rank.
            if gold.contains(label) && found.insert(label) {
                hits += 1;
                sum += hits as f64 / (rank + 1) as f64;
            }
        }
        total += sum / denom as f64;
    }
    Ok(total / predictions.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    /// Empty predictions, counted as negatives.
    pub misses: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 for the positive class. A prediction is positive
/// when its top label is `true`.
pub fn prf1(predictions: &[Prediction], golds: &BTreeMap<String, bool>) -> Result<Prf> {
    let (mut tp, mut fp, mut fn_, mut tn, mut misses) = (0, 0, 0, 0, 0);
    for p in predictions {
        let gold = *golds.get(&p.item_id).ok_or_else(|| unknown(&p.item_id))?;
        if p.ranked_labels.is_empty() {
            misses += 1;
        }
        match (p.top() == Some("true"), gold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf {
        precision,
        recall,
        f1,
        tp,
        fp,
        fn_,
        tn,
        misses,
    })
}
