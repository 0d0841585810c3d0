use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive; the first point uses `+∞`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve from (0,0) to (1,1), FPR nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub positive_class: Option<usize>,
}

impl RocCurve {
    /// `threshold,fpr,tpr` rows; the sentinel threshold is written as `inf`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for p in &self.points {
            let t = if p.threshold.is_infinite() {
                "inf".to_string()
            } else {
                p.threshold.to_string()
            };
            s.push_str(&format!("{t},{},{}\n", p.fpr, p.tpr));
        }
        s
    }

    /// Trapezoidal area, summed over consecutive points.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| 0.5 * (w[0].tpr + w[1].tpr) * (w[1].fpr - w[0].fpr))
            .sum()
    }
}

/// Sweeps every distinct score as a threshold (equal scores enter together)
/// and integrates TPR over FPR with the trapezoid rule.
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<(RocCurve, f64)> {
    if scores.len() != positives.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: positives.len(),
        });
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("score {s} is not a number")));
    }
    let p = positives.iter().filter(|&&b| b).count();
    let n = positives.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClass("ROC needs positives and negatives".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if positives[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
        });
    }
    let curve = RocCurve {
        points,
        positive_class: None,
    };
    let auc = curve.area();
    Ok((curve, auc))
}
