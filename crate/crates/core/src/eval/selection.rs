use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::error::{Error, Result};

/// Differences at or below this are ties.
pub const METRIC_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub winner: String,
    pub index: usize,
    /// One line per comparison that changed or confirmed the leader.
    pub rationale: Vec<String>,
}

fn cmp_metric(a: f64, b: f64) -> Ordering {
    if (a - b).abs() <= METRIC_TOLERANCE {
        Ordering::Equal
    } else if a > b {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

/// Ordering of `a` against `b` (Greater = `a` preferred) and the deciding key.
fn compare(a: &EvalReport, b: &EvalReport) -> (Ordering, &'static str) {
    let keys: [(&str, f64, f64); 3] = [
        ("malignant recall", a.malignant_recall, b.malignant_recall),
        ("macro AUC", a.macro_auc, b.macro_auc),
        ("accuracy", a.accuracy(), b.accuracy()),
    ];
    for (name, x, y) in keys {
        let o = cmp_metric(x, y);
        if o != Ordering::Equal {
            return (o, name);
        }
    }
    let var = |r: &EvalReport| r.fold_variance.map_or(f64::INFINITY, |v| v.mean());
    let (va, vb) = (var(a), var(b));
    if va != vb {
        // lower variance preferred
        return (vb.total_cmp(&va), "fold variance");
    }
    if a.latency_seconds != b.latency_seconds {
        return (b.latency_seconds.total_cmp(&a.latency_seconds), "latency");
    }
    (Ordering::Equal, "input order")
}

/// Lexicographic choice: malignant recall, then macro AUC, then accuracy
/// (each with [`METRIC_TOLERANCE`]), then lower mean fold variance, then
/// lower latency, then the earlier entry.
pub fn select_best_model(reports: &[(String, EvalReport)]) -> Result<Selection> {
    let (first_name, _) = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("no reports to select from".into()))?;
    let mut best = 0;
    let mut rationale = vec![format!("start with `{first_name}`")];
    for (i, (name, r)) in reports.iter().enumerate().skip(1) {
        let (o, key) = compare(r, &reports[best].1);
        let leader = &reports[best].0;
        match o {
            Ordering::Greater => {
                rationale.push(format!("`{name}` beats `{leader}` on {key}"));
                best = i;
            }
            Ordering::Less => rationale.push(format!("`{leader}` beats `{name}` on {key}")),
            Ordering::Equal => rationale.push(format!("`{leader}` kept over `{name}` by {key}")),
        }
    }
    Ok(Selection {
        winner: reports[best].0.clone(),
        index: best,
        rationale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::FoldVariance;

    fn report(rec: f64, auc: f64, acc: f64) -> EvalReport {
        use crate::eval::{ClassMetrics, ClassificationMetrics, ConfusionMatrix};
        let cm = ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0 };
        EvalReport {
            n_samples: 1,
            confusion: ConfusionMatrix::zeros(3),
            metrics: ClassificationMetrics {
                per_class: vec![cm; 3],
                macro_precision: 0.0,
                macro_recall: 0.0,
                macro_f1: 0.0,
                accuracy_standard: acc,
                accuracy_paper: acc,
            },
            per_class_auc: vec![auc; 3],
            macro_auc: auc,
            malignant_recall: rec,
            malignant_auc: auc,
            fold_variance: None,
            latency_seconds: 0.0,
            roc: vec![],
        }
    }

    fn named(v: Vec<EvalReport>) -> Vec<(String, EvalReport)> {
        v.into_iter().enumerate().map(|(i, r)| (format!("m{i}"), r)).collect()
    }

    #[test]
    fn malignant_recall_dominates() {
        let s = select_best_model(&named(vec![report(1.0, 0.99, 0.98), report(0.99, 0.999, 0.999)])).unwrap();
        assert_eq!(s.winner, "m0");
    }

    #[test]
    fn variance_then_order() {
        let mut a = report(1.0, 0.9, 0.9);
        let mut b = a.clone();
        let fv = |v| FoldVariance { malignant_recall: v, macro_auc: v, accuracy: v };
        a.fold_variance = Some(fv(0.01));
        b.fold_variance = Some(fv(0.001));
        assert_eq!(select_best_model(&named(vec![a.clone(), b])).unwrap().index, 1);
        assert_eq!(select_best_model(&named(vec![a.clone(), a.clone()])).unwrap().index, 0);
        assert!(select_best_model(&[]).is_err());
    }

    #[test]
    fn tolerance_and_latency() {
        let mut a = report(0.95, 0.9, 0.9);
        let mut b = report(0.95 + 5e-5, 0.9, 0.9);
        a.latency_seconds = 0.2;
        b.latency_seconds = 0.1;
        assert_eq!(select_best_model(&named(vec![a.clone(), b.clone()])).unwrap().index, 1);
        // rescaling latency units keeps the choice
        a.latency_seconds *= 1000.0;
        b.latency_seconds *= 1000.0;
        assert_eq!(select_best_model(&named(vec![a, b])).unwrap().index, 1);
    }

    #[test]
    fn dominated_entry_changes_nothing() {
        let base = named(vec![report(0.9, 0.95, 0.9), report(0.95, 0.9, 0.85), report(0.95, 0.91, 0.8)]);
        let w = select_best_model(&base).unwrap().winner;
        for pos in 0..=base.len() {
            let mut v = base.clone();
            v.insert(pos, ("dominated".into(), report(0.5, 0.5, 0.5)));
            assert_eq!(select_best_model(&v).unwrap().winner, w);
        }
    }
}
