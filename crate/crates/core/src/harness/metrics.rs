use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::Class;

/// Binary confusion matrix with High as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn new(tn: usize, fp: usize, fn_: usize, tp: usize) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn from_predictions(actual: &[Class], predicted: &[Class]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: actual.len(),
                actual: predicted.len(),
            });
        }
        let mut cm = ConfusionMatrix::default();
        for (&a, &p) in actual.iter().zip(predicted) {
            cm.record(a, p);
        }
        Ok(cm)
    }

    pub fn record(&mut self, actual: Class, predicted: Class) {
        match (actual, predicted) {
            (Class::High, Class::High) => self.tp += 1,
            (Class::Low, Class::High) => self.fp += 1,
            (Class::High, Class::Low) => self.fn_ += 1,
            (Class::Low, Class::Low) => self.tn += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// F1 for the High class. When there are no true positives the score is
    /// 0 and the flag reports whether precision or recall was undefined.
    pub fn f1(&self) -> (f64, bool) {
        let predicted_pos = self.tp + self.fp;
        let actual_pos = self.tp + self.fn_;
        if self.tp == 0 {
            return (0.0, predicted_pos == 0 || actual_pos == 0);
        }
        // 2PR/(P+R) simplifies to 2tp/(2tp+fp+fn)
        (2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub f1: f64,
    pub f1_undefined: bool,
    pub config_hash: String,
    pub seed: u64,
}

impl EvaluationReport {
    pub fn from_confusion(confusion: ConfusionMatrix, config_hash: impl Into<String>, seed: u64) -> Result<Self> {
        if confusion.total() == 0 {
            return Err(Error::EmptyInput("cannot evaluate on an empty test set"));
        }
        let (f1, f1_undefined) = confusion.f1();
        Ok(EvaluationReport {
            confusion,
            accuracy: confusion.accuracy(),
            f1,
            f1_undefined,
            config_hash: config_hash.into(),
            seed,
        })
    }
}
