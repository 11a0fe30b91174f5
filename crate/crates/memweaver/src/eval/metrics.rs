//! Evaluation metrics: accuracy + macro-F1 for classification, MAE/RMSE for
//! rating prediction, ROUGE-1 and ROUGE-L for generation.
//!
//! ROUGE tokenization is lowercase alphanumeric runs; Porter stemming sits
//! behind a flag (off by default) since the reference implementation stems.
//! F-measures use beta = 1.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::stem::porter_stem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    fn from_counts(overlap: usize, cand_len: usize, ref_len: usize) -> RougeScore {
        if cand_len == 0 || ref_len == 0 {
            return RougeScore::ZERO;
        }
        let precision = overlap as f64 / cand_len as f64;
        let recall = overlap as f64 / ref_len as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RougeScore {
            precision,
            recall,
            f1,
        }
    }
}

/// Exact-match fraction plus unweighted macro-F1 over `labels`.
pub fn classification_metrics(
    preds: &[String],
    golds: &[String],
    labels: &[String],
) -> Result<ClassificationMetrics> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    let accuracy = hits as f64 / preds.len() as f64;

    let mut f1_sum = 0.0;
    for label in labels {
        let tp = preds
            .iter()
            .zip(golds)
            .filter(|(p, g)| *p == label && *g == label)
            .count() as f64;
        let fp = preds
            .iter()
            .zip(golds)
            .filter(|(p, g)| *p == label && *g != label)
            .count() as f64;
        let fn_ = preds
            .iter()
            .zip(golds)
            .filter(|(p, g)| *p != label && *g == label)
            .count() as f64;
        let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
        let recall = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
        f1_sum += if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
    }
    let macro_f1 = if labels.is_empty() {
        0.0
    } else {
        f1_sum / labels.len() as f64
    };
    Ok(ClassificationMetrics { accuracy, macro_f1 })
}

pub fn regression_metrics(preds: &[f64], golds: &[f64]) -> Result<RegressionMetrics> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = preds.len() as f64;
    let mae = preds.iter().zip(golds).map(|(p, g)| (p - g).abs()).sum::<f64>() / n;
    let mse = preds.iter().zip(golds).map(|(p, g)| (p - g) * (p - g)).sum::<f64>() / n;
    Ok(RegressionMetrics {
        mae,
        rmse: mse.sqrt(),
    })
}

/// Lowercase alphanumeric runs, optionally Porter-stemmed.
pub fn rouge_tokens(text: &str, stem: bool) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    if stem {
        tokens.iter().map(|t| porter_stem(t)).collect()
    } else {
        tokens
    }
}

/// ROUGE-1 via clipped unigram overlap.
pub fn rouge1(candidate: &str, reference: &str, stem: bool) -> RougeScore {
    let cand = rouge_tokens(candidate, stem);
    let refr = rouge_tokens(reference, stem);
    if cand.is_empty() || refr.is_empty() {
        return RougeScore::ZERO;
    }
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in &refr {
        *ref_counts.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for t in &cand {
        if let Some(c) = ref_counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    RougeScore::from_counts(overlap, cand.len(), refr.len())
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            row[j + 1] = if x == y {
                prev[j] + 1
            } else {
                row[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// ROUGE-L via longest common subsequence.
pub fn rouge_l(candidate: &str, reference: &str, stem: bool) -> RougeScore {
    let cand = rouge_tokens(candidate, stem);
    let refr = rouge_tokens(reference, stem);
    if cand.is_empty() || refr.is_empty() {
        return RougeScore::ZERO;
    }
    let lcs = lcs_len(&cand, &refr);
    RougeScore::from_counts(lcs, cand.len(), refr.len())
}
