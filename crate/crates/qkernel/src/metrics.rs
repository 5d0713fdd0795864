//! Binary classification accuracy metrics.
//!
//! Class 1 is the positive class. Metrics that would divide by zero raise
//! typed errors instead of returning 0 or NaN, so a missing class can never
//! silently skew a comparison table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Confusion counts of a binary classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionCounts {
    pub fn from_labels(y_true: &[u8], y_pred: &[u8]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::DimensionMismatch {
                what: "prediction vector",
                expected: y_true.len(),
                got: y_pred.len(),
            });
        }
        let mut counts = ConfusionCounts {
            true_pos: 0,
            false_pos: 0,
            true_neg: 0,
            false_neg: 0,
        };
        for (t, p) in y_true.iter().zip(y_pred) {
            match (t, p) {
                (1, 1) => counts.true_pos += 1,
                (0, 1) => counts.false_pos += 1,
                (0, 0) => counts.true_neg += 1,
                (1, 0) => counts.false_neg += 1,
                _ => {
                    return Err(Error::Dataset(format!(
                        "labels must be 0 or 1, got ({t}, {p})"
                    )))
                }
            }
        }
        Ok(counts)
    }

    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    /// True positive rate TP/(TP+FN).
    pub fn tpr<R: Real>(&self) -> Result<R> {
        let positives = self.true_pos + self.false_neg;
        if positives == 0 {
            return Err(Error::UndefinedMetric("tpr with no positive samples"));
        }
        Ok(R::cast(self.true_pos as f64) / R::cast(positives as f64))
    }

    /// True negative rate TN/(TN+FP).
    pub fn tnr<R: Real>(&self) -> Result<R> {
        let negatives = self.true_neg + self.false_pos;
        if negatives == 0 {
            return Err(Error::UndefinedMetric("tnr with no negative samples"));
        }
        Ok(R::cast(self.true_neg as f64) / R::cast(negatives as f64))
    }

    /// (TPR + TNR) / 2.
    pub fn balanced_accuracy<R: Real>(&self) -> Result<R> {
        Ok((self.tpr::<R>()? + self.tnr::<R>()?) * R::cast(0.5))
    }

    /// TP / (TP + (FP + FN)/2).
    pub fn f1<R: Real>(&self) -> Result<R> {
        let denom_counts = 2 * self.true_pos + self.false_pos + self.false_neg;
        if denom_counts == 0 {
            return Err(Error::UndefinedMetric("f1 with no positive activity"));
        }
        Ok(R::cast(2.0 * self.true_pos as f64) / R::cast(denom_counts as f64))
    }

    /// min(TPR, TNR): the accuracy of the worse-served class.
    pub fn lowest_class_accuracy<R: Real>(&self) -> Result<R> {
        Ok(self.tpr::<R>()?.min(self.tnr::<R>()?))
    }

    pub fn report<R: Real>(&self) -> Result<MetricsReport<R>> {
        Ok(MetricsReport {
            tpr: self.tpr()?,
            tnr: self.tnr()?,
            balanced_accuracy: self.balanced_accuracy()?,
            f1: self.f1()?,
            lowest_class_accuracy: self.lowest_class_accuracy()?,
        })
    }
}

/// All headline metrics of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport<R> {
    pub tpr: R,
    pub tnr: R,
    pub balanced_accuracy: R,
    pub f1: R,
    pub lowest_class_accuracy: R,
}
