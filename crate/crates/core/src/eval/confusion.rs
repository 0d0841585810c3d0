use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `counts[t][p]`: rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if c == 0 || counts.iter().any(|r| r.len() != c) {
            return Err(Error::ShapeMismatch("confusion matrix must be square and non-empty".into()));
        }
        Ok(Self { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn tp(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    pub fn fp(&self, c: usize) -> u64 {
        (0..self.classes()).filter(|&t| t != c).map(|t| self.counts[t][c]).sum()
    }

    pub fn fn_(&self, c: usize) -> u64 {
        (0..self.classes()).filter(|&p| p != c).map(|p| self.counts[c][p]).sum()
    }

    pub fn tn(&self, c: usize) -> u64 {
        self.total() - self.tp(c) - self.fp(c) - self.fn_(c)
    }

    /// CSV with a header row of predicted-class names and one row per true class.
    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut s = String::from("true\\pred");
        for n in names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (t, row) in self.counts.iter().enumerate() {
            s.push_str(names.get(t).copied().unwrap_or("?"));
            for v in row {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= classes || p >= classes {
            return Err(Error::InvalidArgument(format!(
                "label out of range: ({t}, {p}) with {classes} classes"
            )));
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// trace / total
    pub accuracy_standard: f64,
    /// Σ_c (TP_c + TN_c) / Σ_c (TP_c + FP_c + FN_c + TN_c)
    pub accuracy_paper: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<ClassificationMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    let c = cm.classes();
    let per_class: Vec<ClassMetrics> = (0..c)
        .map(|k| {
            let precision = ratio(cm.tp(k), cm.tp(k) + cm.fp(k));
            let recall = ratio(cm.tp(k), cm.tp(k) + cm.fn_(k));
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics { precision, recall, f1 }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / c as f64;
    let trace: u64 = (0..c).map(|k| cm.tp(k)).sum();
    let agree: u64 = (0..c).map(|k| cm.tp(k) + cm.tn(k)).sum();
    Ok(ClassificationMetrics {
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        accuracy_standard: ratio(trace, total),
        accuracy_paper: ratio(agree, total * c as u64),
        per_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting() {
        let cm = confusion_matrix(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let cm = confusion_matrix(&[2, 2], &[2, 1], 3).unwrap();
        assert_eq!((cm.counts[2][2], cm.counts[2][1]), (1, 1));
        assert_eq!(confusion_matrix(&[], &[], 3).unwrap().total(), 0);
        assert!(confusion_matrix(&[0], &[], 3).is_err());
        assert!(confusion_matrix(&[3], &[0], 3).is_err());
    }

    #[test]
    fn worked_example() {
        let cm = ConfusionMatrix::from_counts(vec![vec![2, 0, 0], vec![0, 3, 1], vec![0, 0, 4]]).unwrap();
        let m = classification_metrics(&cm).unwrap();
        assert_eq!(m.accuracy_standard, 9.0 / 10.0);
        assert_eq!(m.accuracy_paper, 28.0 / 30.0);
        assert_eq!(m.per_class[2].precision, 4.0 / 5.0);
        assert_eq!(m.per_class[2].recall, 1.0);
        assert!(classification_metrics(&ConfusionMatrix::zeros(3)).is_err());
    }

    #[test]
    fn perfect_and_zero_division() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 0, 0], vec![0, 2, 0], vec![0, 0, 5]]).unwrap();
        let m = classification_metrics(&cm).unwrap();
        assert_eq!((m.macro_precision, m.macro_recall, m.macro_f1), (1.0, 1.0, 1.0));
        assert_eq!((m.accuracy_standard, m.accuracy_paper), (1.0, 1.0));
        // class 1 never predicted and never present
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 0, 0], vec![0, 0, 0], vec![1, 0, 5]]).unwrap();
        let m = classification_metrics(&cm).unwrap();
        assert_eq!(m.per_class[1], ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0 });
    }

    #[test]
    fn csv_layout() {
        let cm = ConfusionMatrix::from_counts(vec![vec![1, 2], vec![3, 4]]).unwrap();
        assert_eq!(cm.to_csv(&["a", "b"]), "true\\pred,a,b\na,1,2\nb,3,4\n");
    }
}
