//! Single-stage entry points behind the CLI subcommands.

use std::path::Path;

use super::config::{ModelKind, RunConfig, SeedStage};
use super::data::{handcrafted_rows, Dataset, Prepared};
use super::models::{cnn_scores, report_from, rows, score_all, ClassicArtifact};
use super::run::{effective_train_config, embeddings, fit_classic, train_cnn, write_file};
use crate::classic::Classifier;
use crate::dataset::{stratified_split, ClassLabel, SplitSpec};
use crate::error::{Error, Result, StageExt};
use crate::eval::{mean_vector, EvalReport};
use crate::features::{FeatureVector, MinMaxScaler};
use crate::gradcam::{grad_cam, upsample_overlay};
use crate::image::{save_mask, save_pgm};
use crate::nn::{Checkpoint, TrainHistory};

/// Train/val/test indices per the config: the manifest's own column when
/// `split.official`, otherwise a stratified draw from the run seed.
pub fn split_dataset(cfg: &RunConfig, data: &Dataset) -> Result<SplitSpec> {
    if cfg.split.official {
        return SplitSpec::from_official(&data.samples);
    }
    let s = &cfg.split;
    stratified_split(&data.samples, (s.train, s.val, s.test), cfg.stage_seed(SeedStage::Split))
}

/// Feature rows keyed by sample, as written by the `features` and `embed` subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub labels: Vec<ClassLabel>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn new(set: &[Prepared], rows: Vec<FeatureVector>) -> Result<Self> {
        if set.len() != rows.len() {
            return Err(Error::DimensionMismatch { expected: set.len(), got: rows.len() });
        }
        Ok(Self {
            ids: set.iter().map(|p| p.id.clone()).collect(),
            labels: set.iter().map(|p| p.label).collect(),
            rows,
        })
    }

    /// Header `id,<feature names...>,label`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        let names = self.rows.first().map(|r| r.names.clone()).unwrap_or_default();
        let mut header = vec!["id".to_string()];
        header.extend(names);
        header.push("label".into());
        w.write_record(&header)?;
        for ((id, label), r) in self.ids.iter().zip(&self.labels).zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(r.values.iter().map(|v| v.to_string()));
            rec.push(label.name().into());
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[0] != "id" || header[header.len() - 1] != "label" {
            return Err(Error::Manifest("feature table needs `id,<features...>,label` columns".into()));
        }
        let names = header[1..header.len() - 1].to_vec();
        let mut t = Self { ids: vec![], labels: vec![], rows: vec![] };
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::DimensionMismatch { expected: header.len(), got: rec.len() });
            }
            let values = (1..rec.len() - 1)
                .map(|j| {
                    rec[j]
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Manifest(format!("bad number `{}`", &rec[j])))
                })
                .collect::<Result<Vec<_>>>()?;
            t.ids.push(rec[0].to_string());
            t.labels.push(rec[rec.len() - 1].parse()?);
            t.rows.push(FeatureVector::new(names.clone(), values)?);
        }
        if t.rows.is_empty() {
            return Err(Error::EmptyManifest);
        }
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_csv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

pub fn handcrafted_table(cfg: &RunConfig, data: &Dataset) -> Result<FeatureTable> {
    let set = data.prepare_all(&cfg.preprocess).stage("preprocess")?;
    let rows = handcrafted_rows(&set, &cfg.features).stage("features")?;
    FeatureTable::new(&set, rows)
}

/// Penultimate-layer embeddings under the checkpoint's own preprocessing.
pub fn embedding_table(ck: &Checkpoint, data: &Dataset) -> Result<FeatureTable> {
    let model = ck.model().stage("checkpoint")?;
    let set = data.prepare_all(&ck.preprocess).stage("preprocess")?;
    let rows = embeddings(&model, &set).stage("embed")?;
    FeatureTable::new(&set, rows)
}

/// Fits a classical model on a feature table. Handcrafted inputs get a
/// min-max scaler fitted here and stored in the artifact.
pub fn train_classic_on(kind: ModelKind, cfg: &RunConfig, table: &FeatureTable) -> Result<ClassicArtifact> {
    if kind == ModelKind::Cnn {
        return Err(Error::InvalidArgument("use train-cnn for the CNN".into()));
    }
    let (x, scaler) = if kind.uses_deep_features() {
        (rows(&table.rows), None)
    } else {
        let sc = MinMaxScaler::fit(&table.rows).stage("features")?;
        let scaled = table.rows.iter().map(|f| sc.apply(f)).collect::<Result<Vec<_>>>()?;
        (rows(&scaled), Some(sc))
    };
    let (model, _) = fit_classic(kind, cfg, &x, &table.labels).stage("train-classic")?;
    Ok(ClassicArtifact {
        kind,
        preprocess: cfg.preprocess.clone(),
        features: cfg.features.clone(),
        scaler,
        model,
    })
}

/// Scores a saved classical model on a feature table.
pub fn evaluate_artifact(a: &ClassicArtifact, table: &FeatureTable) -> Result<EvalReport> {
    let x = match &a.scaler {
        Some(sc) => table.rows.iter().map(|f| sc.apply(f)).collect::<Result<Vec<_>>>().stage("features")?,
        None => table.rows.clone(),
    };
    let s = score_all(&rows(&x), |v| a.model.scores(v)).stage("eval")?;
    report_from(&table.labels, &s).stage("eval")
}

/// Trains the CNN on the train part of the split, validating on the val part.
/// The test part is left untouched.
pub fn train_cnn_on(cfg: &RunConfig, data: &Dataset) -> Result<(Checkpoint, TrainHistory)> {
    let spec = split_dataset(cfg, data).stage("split")?;
    let tr = data.prepare(&spec.train, &cfg.preprocess).stage("preprocess")?;
    let va = data.prepare(&spec.val, &cfg.preprocess).stage("preprocess")?;
    if tr.is_empty() || va.is_empty() {
        return Err(Error::InvalidArgument("train and val partitions must be non-empty".into()).in_stage("split"));
    }
    let (model, hist) = train_cnn(cfg, &tr, &va).stage("train-cnn")?;
    let mean = mean_vector(&embeddings(&model, &tr)?).stage("embed")?;
    let ck = Checkpoint::new(&model, effective_train_config(cfg), cfg.preprocess.clone(), mean);
    Ok((ck, hist))
}

/// Scores a CNN checkpoint on a labelled set using its stored preprocessing.
pub fn evaluate_checkpoint(ck: &Checkpoint, data: &Dataset) -> Result<EvalReport> {
    let model = ck.model().stage("checkpoint")?;
    let set = data.prepare_all(&ck.preprocess).stage("preprocess")?;
    let y: Vec<ClassLabel> = set.iter().map(|p| p.label).collect();
    let s = score_all(&set, |p| cnn_scores(&model, &p.image)).stage("eval")?;
    report_from(&y, &s).stage("eval")
}

/// Writes `<id>_c<class>_heat.pgm` and `..._overlay.pgm` per row, explaining the
/// predicted class unless `class` is given. Returns the number of panels.
pub fn gradcam_panels(
    ck: &Checkpoint,
    data: &Dataset,
    class: Option<ClassLabel>,
    alpha: f64,
    out: &Path,
) -> Result<usize> {
    let model = ck.model().stage("checkpoint")?;
    let set = data.prepare_all(&ck.preprocess).stage("preprocess")?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for p in &set {
        let c = match class {
            Some(c) => c.index(),
            None => crate::classic::svm::argmax_lowest(&cnn_scores(&model, &p.image)?),
        };
        let hm = grad_cam(&model, &p.image, c).stage("gradcam")?;
        let ov = upsample_overlay(&hm, &p.image, alpha).stage("gradcam")?;
        save_pgm(&ov.heat, out.join(panel_name(&p.id, c, "heat")))?;
        save_pgm(&ov.blend, out.join(panel_name(&p.id, c, "overlay")))?;
    }
    Ok(set.len())
}

pub(crate) fn panel_name(id: &str, class: usize, what: &str) -> String {
    format!("{id}_c{class}_{what}.pgm")
}

/// Preprocessed images (and resampled masks) written as PGM under `out`.
pub fn write_prepared(set: &[Prepared], out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for p in set {
        save_pgm(&p.image, out.join(format!("{}.pgm", p.id)))?;
        if let Some(m) = &p.mask {
            save_mask(m, out.join(format!("{}_mask.pgm", p.id)))?;
        }
    }
    Ok(())
}

pub fn write_text(path: &Path, body: &str) -> Result<()> {
    write_file(path, body)
}
