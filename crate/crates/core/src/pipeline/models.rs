use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ModelKind;
use crate::classic::{Classifier, KnnModel, SvmOvrModel};
use crate::dataset::{stratified_kfold_labels, ClassLabel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::eval::{EvalReport, FoldVariance};
use crate::features::{FeatureVector, HandcraftedConfig, MinMaxScaler};
use crate::nn::CnnModel;
use crate::preprocess::PreprocessRecipe;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ClassicModel {
    Svm(SvmOvrModel),
    Knn(KnnModel),
}

impl Classifier for ClassicModel {
    fn scores(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        match self {
            ClassicModel::Svm(m) => m.scores(x),
            ClassicModel::Knn(m) => m.scores(x),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<ClassLabel> {
        match self {
            ClassicModel::Svm(m) => m.predict(x),
            ClassicModel::Knn(m) => m.predict(x),
        }
    }
}

/// A fitted classical model with everything needed to featurize new images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicArtifact {
    pub kind: ModelKind,
    pub preprocess: PreprocessRecipe,
    pub features: HandcraftedConfig,
    /// Present for handcrafted inputs only.
    pub scaler: Option<MinMaxScaler>,
    pub model: ClassicModel,
}

impl ClassicArtifact {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

/// Predictions, scores and median per-sample latency over a test set.
pub struct Scored {
    pub y_pred: Vec<ClassLabel>,
    pub scores: Vec<[f64; NUM_CLASSES]>,
    pub latency_seconds: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs `f` on every input, timing each call.
pub fn score_all<T>(inputs: &[T], mut f: impl FnMut(&T) -> Result<[f64; NUM_CLASSES]>) -> Result<Scored> {
    let mut scores = Vec::with_capacity(inputs.len());
    let mut times = Vec::with_capacity(inputs.len());
    for x in inputs {
        let t = Instant::now();
        scores.push(f(x)?);
        times.push(t.elapsed().as_secs_f64());
    }
    let y_pred = scores
        .iter()
        .map(|s| ClassLabel::from_index(crate::classic::svm::argmax_lowest(s)))
        .collect::<Result<_>>()?;
    Ok(Scored {
        y_pred,
        scores,
        latency_seconds: median(times),
    })
}

/// Softmax probabilities of a CNN for one preprocessed image.
pub fn cnn_scores(model: &CnnModel, img: &crate::image::GrayImage) -> Result<[f64; NUM_CLASSES]> {
    let p = model.predict_proba(img)?;
    let mut out = [0.0; NUM_CLASSES];
    if p.len() != NUM_CLASSES {
        return Err(Error::DimensionMismatch {
            expected: NUM_CLASSES,
            got: p.len(),
        });
    }
    out.copy_from_slice(&p);
    Ok(out)
}

pub fn report_from(y_true: &[ClassLabel], s: &Scored) -> Result<EvalReport> {
    EvalReport::build(y_true, &s.y_pred, &s.scores, s.latency_seconds)
}

/// Per-fold spread of the selection metrics for a fixed training recipe.
/// `None` when a fold cannot be scored (for instance a class missing).
pub fn cv_fold_variance(
    x: &[Vec<f64>],
    y: &[ClassLabel],
    folds: usize,
    seed: u64,
    fit: impl Fn(&[Vec<f64>], &[ClassLabel]) -> Result<ClassicModel>,
) -> Option<FoldVariance> {
    let fold_list = stratified_kfold_labels(y, folds, seed).ok()?;
    let mut reports = Vec::with_capacity(fold_list.len());
    for f in &fold_list {
        let xt: Vec<Vec<f64>> = f.train.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<ClassLabel> = f.train.iter().map(|&i| y[i]).collect();
        let m = fit(&xt, &yt).ok()?;
        let xv: Vec<&Vec<f64>> = f.val.iter().map(|&i| &x[i]).collect();
        let yv: Vec<ClassLabel> = f.val.iter().map(|&i| y[i]).collect();
        let s = score_all(&xv, |v| m.scores(v)).ok()?;
        reports.push(report_from(&yv, &s).ok()?);
    }
    FoldVariance::from_folds(&reports)
}

pub fn rows(v: &[FeatureVector]) -> Vec<Vec<f64>> {
    v.iter().map(|f| f.values.clone()).collect()
}

