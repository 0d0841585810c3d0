//! Stratified k-fold model selection for the classical classifiers.

use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::knn::{KnnModel, DEFAULT_EPSILON};
use super::svm::{SvmOvrModel, SvmParams};
use super::Classifier;
use crate::dataset::{stratified_kfold_labels, ClassLabel, Fold};
use crate::error::{Error, Result};

pub const DEFAULT_C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_GAMMA_GRID: [f64; 4] = [0.001, 0.01, 0.1, 1.0];

fn subset<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

fn fold_accuracy(model: &dyn Classifier, x: &[Vec<f64>], y: &[ClassLabel], fold: &Fold) -> Result<f64> {
    let mut hits = 0;
    for &i in &fold.val {
        if model.predict(&x[i])? == y[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / fold.val.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub c: f64,
    pub gamma: Option<f64>,
    pub cv_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

/// Exhaustive (C, γ) search for the one-vs-rest SVM. A linear kernel is
/// requested with an empty γ grid. Ties go to the smaller C, then smaller γ.
pub fn svm_grid_search(
    x: &[Vec<f64>],
    y: &[ClassLabel],
    c_grid: &[f64],
    gamma_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<GridResult> {
    if c_grid.is_empty() {
        return Err(Error::InvalidArgument("empty C grid".into()));
    }
    let fold_list = stratified_kfold_labels(y, folds, seed)?;
    let mut cs = c_grid.to_vec();
    cs.sort_by(f64::total_cmp);
    let mut gammas: Vec<Option<f64>> = gamma_grid.iter().map(|&g| Some(g)).collect();
    gammas.sort_by(|a, b| a.unwrap().total_cmp(&b.unwrap()));
    if gammas.is_empty() {
        gammas.push(None);
    }
    let mut best: Option<GridResult> = None;
    for &c in &cs {
        for &gamma in &gammas {
            let kernel = match gamma {
                Some(g) => KernelSpec::rbf(g)?,
                None => KernelSpec::Linear,
            };
            let params = SvmParams { seed, ..SvmParams::new(c, kernel) };
            let mut accs = Vec::with_capacity(fold_list.len());
            for f in &fold_list {
                let m = SvmOvrModel::fitted(params, &subset(x, &f.train), &subset(y, &f.train))?;
                accs.push(fold_accuracy(&m, x, y, f)?);
            }
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            if best.as_ref().is_none_or(|b| mean > b.cv_accuracy) {
                best = Some(GridResult { c, gamma, cv_accuracy: mean, fold_accuracies: accs });
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    pub cv_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

/// Picks `k` by mean stratified-CV accuracy; ties go to the smaller `k`.
pub fn knn_select_k(
    x: &[Vec<f64>],
    y: &[ClassLabel],
    k_range: &[usize],
    folds: usize,
    seed: u64,
) -> Result<KSelection> {
    let mut ks = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let max_k = *ks.last().ok_or_else(|| Error::InvalidArgument("empty k range".into()))?;
    if ks[0] == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let fold_list = stratified_kfold_labels(y, folds, seed)?;
    let smallest = fold_list.iter().map(|f| f.train.len()).min().unwrap_or(0);
    if max_k > smallest {
        return Err(Error::InvalidArgument(format!(
            "k={max_k} exceeds the smallest training fold ({smallest})"
        )));
    }
    let mut best: Option<KSelection> = None;
    for &k in &ks {
        let mut accs = Vec::with_capacity(fold_list.len());
        for f in &fold_list {
            let m = KnnModel::fit(subset(x, &f.train), subset(y, &f.train), k, DEFAULT_EPSILON)?;
            accs.push(fold_accuracy(&m, x, y, f)?);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        if best.as_ref().is_none_or(|b| mean > b.cv_accuracy) {
            best = Some(KSelection { k, cv_accuracy: mean, fold_accuracies: accs });
        }
    }
    Ok(best.expect("non-empty k range"))
}
