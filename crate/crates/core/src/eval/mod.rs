//! Test-set evaluation: confusion-matrix metrics, one-vs-rest ROC/AUC,
//! malignant-first model selection and the embedding-mean domain-shift indicator.

pub mod confusion;
pub mod roc;
pub mod selection;

pub use confusion::{classification_metrics, confusion_matrix, ClassMetrics, ClassificationMetrics, ConfusionMatrix};
pub use roc::{roc_auc, RocCurve, RocPoint};
pub use selection::{select_best_model, Selection};

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassLabel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Per-class one-vs-rest AUCs and their unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassAuc {
    pub per_class: Vec<f64>,
    pub macro_auc: f64,
    pub curves: Vec<RocCurve>,
}

/// One-vs-rest ROC for every class from its own score column.
pub fn multiclass_auc(scores: &[[f64; NUM_CLASSES]], y_true: &[ClassLabel]) -> Result<MulticlassAuc> {
    if scores.len() != y_true.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: scores.len(),
        });
    }
    let mut per_class = Vec::with_capacity(NUM_CLASSES);
    let mut curves = Vec::with_capacity(NUM_CLASSES);
    for class in ClassLabel::ALL {
        let pos: Vec<bool> = y_true.iter().map(|&y| y == class).collect();
        if !pos.contains(&true) {
            return Err(Error::ClassMissing(format!("no {class} samples for ROC")));
        }
        let col: Vec<f64> = scores.iter().map(|s| s[class.index()]).collect();
        let (mut curve, auc) = roc_auc(&col, &pos)?;
        curve.positive_class = Some(class.index());
        per_class.push(auc);
        curves.push(curve);
    }
    Ok(MulticlassAuc {
        macro_auc: per_class.iter().sum::<f64>() / NUM_CLASSES as f64,
        per_class,
        curves,
    })
}

/// Spread of the selection metrics across CV folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldVariance {
    pub malignant_recall: f64,
    pub macro_auc: f64,
    pub accuracy: f64,
}

impl FoldVariance {
    /// Population variance of each metric over per-fold reports.
    pub fn from_folds(folds: &[EvalReport]) -> Option<Self> {
        if folds.is_empty() {
            return None;
        }
        let var = |f: fn(&EvalReport) -> f64| {
            let n = folds.len() as f64;
            let m = folds.iter().map(f).sum::<f64>() / n;
            folds.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / n
        };
        Some(Self {
            malignant_recall: var(|r| r.malignant_recall),
            macro_auc: var(|r| r.macro_auc),
            accuracy: var(|r| r.metrics.accuracy_standard),
        })
    }

    pub fn mean(&self) -> f64 {
        (self.malignant_recall + self.macro_auc + self.accuracy) / 3.0
    }
}

/// Everything reported for one model on one evaluation set.
///
/// `latency_seconds` is machine-dependent and deliberately left out of the
/// serialized form so metric files stay byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: ClassificationMetrics,
    pub per_class_auc: Vec<f64>,
    pub macro_auc: f64,
    pub malignant_recall: f64,
    pub malignant_auc: f64,
    pub fold_variance: Option<FoldVariance>,
    #[serde(skip)]
    pub latency_seconds: f64,
    #[serde(skip)]
    pub roc: Vec<RocCurve>,
}

impl EvalReport {
    pub fn build(
        y_true: &[ClassLabel],
        y_pred: &[ClassLabel],
        scores: &[[f64; NUM_CLASSES]],
        latency_seconds: f64,
    ) -> Result<Self> {
        let t: Vec<usize> = y_true.iter().map(|l| l.index()).collect();
        let p: Vec<usize> = y_pred.iter().map(|l| l.index()).collect();
        let confusion = confusion_matrix(&t, &p, NUM_CLASSES)?;
        let metrics = classification_metrics(&confusion)?;
        let auc = multiclass_auc(scores, y_true)?;
        let m = ClassLabel::Malignant.index();
        Ok(Self {
            n_samples: y_true.len(),
            malignant_recall: metrics.per_class[m].recall,
            malignant_auc: auc.per_class[m],
            per_class_auc: auc.per_class,
            macro_auc: auc.macro_auc,
            confusion,
            metrics,
            fold_variance: None,
            latency_seconds,
            roc: auc.curves,
        })
    }

    pub fn accuracy(&self) -> f64 {
        self.metrics.accuracy_standard
    }
}

/// L2 distance between the mean embeddings of two sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainShiftIndicator {
    pub delta_mu: f64,
}

pub fn mean_vector(rows: &[FeatureVector]) -> Result<Vec<f64>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot average an empty set".into()))?;
    let d = first.len();
    let mut mean = vec![0.0; d];
    for r in rows {
        if r.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: r.len() });
        }
        for (m, v) in mean.iter_mut().zip(&r.values) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows.len() as f64);
    Ok(mean)
}

pub fn delta_between_means(a: &[f64], b: &[f64]) -> Result<DomainShiftIndicator> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(DomainShiftIndicator { delta_mu: d2.sqrt() })
}

pub fn domain_shift_delta(train: &[FeatureVector], external: &[FeatureVector]) -> Result<DomainShiftIndicator> {
    delta_between_means(&mean_vector(train)?, &mean_vector(external)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClassLabel::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::from_values("z", v.to_vec()).unwrap()
    }

    /// Fraction of positive/negative pairs ranked correctly, ties counted ½.
    fn pairwise_auc(scores: &[f64], pos: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if pos[i] && !pos[j] {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn one_hot_scores_are_perfect() {
        let y = [Normal, Benign, Malignant, Benign];
        let s: Vec<[f64; 3]> = y.iter().map(|l| {
            let mut r = [0.0; 3];
            r[l.index()] = 1.0;
            r
        }).collect();
        let m = multiclass_auc(&s, &y).unwrap();
        assert_eq!(m.per_class, vec![1.0; 3]);
        assert_eq!(m.macro_auc, 1.0);
        let flat = vec![[0.3; 3]; 4];
        assert_eq!(multiclass_auc(&flat, &y).unwrap().per_class, vec![0.5; 3]);
        assert!(multiclass_auc(&s[..2], &y[..2]).is_err());
    }

    #[test]
    fn small_multiclass_matches_pairwise_oracle() {
        let y = [Normal, Benign, Malignant, Malignant, Benign, Normal, Malignant];
        let s = [
            [0.6, 0.3, 0.1],
            [0.2, 0.5, 0.3],
            [0.1, 0.4, 0.5],
            [0.3, 0.3, 0.4],
            [0.4, 0.4, 0.2],
            [0.3, 0.5, 0.2],
            [0.2, 0.2, 0.6],
        ];
        let m = multiclass_auc(&s, &y).unwrap();
        for c in 0..3 {
            let col: Vec<f64> = s.iter().map(|r| r[c]).collect();
            let pos: Vec<bool> = y.iter().map(|l| l.index() == c).collect();
            assert!((m.per_class[c] - pairwise_auc(&col, &pos)).abs() < 1e-9);
        }
    }

    #[test]
    fn report_fields() {
        let y = [Normal, Benign, Malignant, Malignant];
        let p = [Normal, Malignant, Malignant, Malignant];
        let s = [[0.8, 0.1, 0.1], [0.1, 0.3, 0.6], [0.0, 0.1, 0.9], [0.1, 0.2, 0.7]];
        let r = EvalReport::build(&y, &p, &s, 0.01).unwrap();
        assert_eq!(r.malignant_recall, 1.0);
        assert_eq!(r.metrics.per_class[2].recall, r.malignant_recall);
        assert_eq!(r.accuracy(), 0.75);
        let json = serde_json::to_string(&r).unwrap();
        assert!(!json.contains("latency"));
    }

    #[test]
    fn fold_variance() {
        let y = [Normal, Benign, Malignant];
        let s = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let a = EvalReport::build(&y, &y, &s, 0.0).unwrap();
        let b = EvalReport::build(&y, &[Normal, Benign, Benign], &s, 0.0).unwrap();
        let v = FoldVariance::from_folds(&[a.clone(), b]).unwrap();
        assert_eq!(v.malignant_recall, 0.25);
        assert_eq!(FoldVariance::from_folds(&[a]).unwrap().mean(), 0.0);
        assert!(FoldVariance::from_folds(&[]).is_none());
    }

    #[test]
    fn domain_shift_examples() {
        let a = [fv(&[1.0, 2.0]), fv(&[3.0, 4.0])];
        assert_eq!(domain_shift_delta(&a, &a).unwrap().delta_mu, 0.0);
        let z = [fv(&[-1.0, 0.0]), fv(&[1.0, 0.0])];
        let t = [fv(&[3.0, 4.0])];
        assert_eq!(domain_shift_delta(&z, &t).unwrap().delta_mu, 5.0);
        let rev = [a[1].clone(), a[0].clone()];
        assert_eq!(domain_shift_delta(&a, &t).unwrap(), domain_shift_delta(&rev, &t).unwrap());
        assert!(domain_shift_delta(&[], &t).is_err());
        assert!(domain_shift_delta(&a, &[fv(&[1.0])]).is_err());
    }
}
