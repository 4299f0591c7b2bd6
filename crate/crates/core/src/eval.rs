//! Ranking and calibration metrics.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{nnz_stats, predict, Theta};
use crate::objective::PROB_EPS;
use crate::sparse_data::{fmt_real, Dataset};

/// Area under the ROC curve. Tied scores share their average rank.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs at least one positive and one negative label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (0-based) averaged, then shifted to 1-based
        let avg_rank = (start + end + 1) as f64 / 2.0;
        let pos_in_tie = order[start..end].iter().filter(|&&k| labels[k]).count();
        rank_sum_pos += avg_rank * pos_in_tie as f64;
        start = end;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean negative log-likelihood with probabilities clamped to
/// `[PROB_EPS, 1 - PROB_EPS]`.
pub fn mean_logloss(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need equal, non-zero lengths (got {} scores, {} labels)",
            scores.len(),
            labels.len()
        )));
    }
    let total: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let q = if y { p } else { 1.0 - p };
            -q.clamp(PROB_EPS, 1.0 - PROB_EPS).ln()
        })
        .sum();
    Ok(total / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Absent when the data holds a single class.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    pub logloss: f64,
    pub n: usize,
    pub nnz_params: usize,
    pub nnz_features: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// One `key=value` per line.
impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(auc) = self.auc {
            writeln!(f, "auc={}", fmt_real(auc))?;
        }
        writeln!(f, "logloss={}", fmt_real(self.logloss))?;
        writeln!(f, "n={}", self.n)?;
        writeln!(f, "nnz_params={}", self.nnz_params)?;
        write!(f, "nnz_features={}", self.nnz_features)
    }
}

pub fn scores(theta: &Theta, data: &Dataset) -> Result<Vec<f64>> {
    data.instances
        .iter()
        .map(|inst| predict(theta, &inst.features).map(|o| o.p))
        .collect()
}

pub fn evaluate(theta: &Theta, data: &Dataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("evaluation data is empty".into()));
    }
    let scores = scores(theta, data)?;
    let labels = data.labels();
    let auc = match auc(&scores, &labels) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    let (nnz_params, nnz_features) = nnz_stats(theta);
    Ok(EvalReport {
        auc,
        logloss: mean_logloss(&scores, &labels)?,
        n: data.len(),
        nnz_params,
        nnz_features,
    })
}
