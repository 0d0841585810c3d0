//! Confusion-matrix metrics, ROC/AUC and malignant-first model selection.

use sonocad::dataset::ClassLabel::{self, *};
use sonocad::nn::train::argmax;
use sonocad::eval::{classification_metrics, delta_between_means, roc_auc, select_best_model, ConfusionMatrix, EvalReport};

fn main() -> sonocad::Result<()> {
    let cm = ConfusionMatrix::from_counts(vec![vec![2, 0, 0], vec![0, 3, 1], vec![0, 0, 4]])?;
    let m = classification_metrics(&cm)?;
    println!("accuracy (trace) {:.4}  accuracy (per-class aggregate) {:.4}", m.accuracy_standard, m.accuracy_paper);
    println!("malignant precision {:.2} recall {:.2}", m.per_class[2].precision, m.per_class[2].recall);
    print!("{}", cm.to_csv(&["normal", "benign", "malignant"]));

    let (curve, auc) = roc_auc(&[0.9, 0.5, 0.2, 0.1], &[true, false, true, false])?;
    println!("AUC {auc} over {} points", curve.points.len());
    print!("{}", curve.to_csv());

    let y: Vec<ClassLabel> = vec![Normal, Benign, Malignant, Malignant, Benign, Normal];
    let sharp: Vec<[f64; 3]> = y.iter().map(|l| { let mut s = [0.1; 3]; s[l.index()] = 0.8; s }).collect();
    let mut dull = sharp.clone();
    dull.swap(2, 4);
    let pred = |s: &[[f64; 3]]| -> Vec<ClassLabel> { s.iter().map(|r| ClassLabel::from_index(argmax(r)).unwrap()).collect() };
    let a = EvalReport::build(&y, &pred(&sharp), &sharp, 0.002)?;
    let b = EvalReport::build(&y, &pred(&dull), &dull, 0.001)?;
    let sel = select_best_model(&[("sharp".into(), a), ("dull".into(), b)])?;
    println!("selected {}: {:?}", sel.winner, sel.rationale);

    println!("delta mu {}", delta_between_means(&[0.0, 0.0], &[3.0, 4.0])?.delta_mu);
    Ok(())
}
