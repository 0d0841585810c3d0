use std::path::Path;

use serde::Serialize;

use super::data::Dataset;
use super::models::{cnn_scores, report_from, score_all};
use crate::dataset::ClassLabel;
use crate::error::{Error, Result, StageExt};
use crate::eval::{delta_between_means, mean_vector, DomainShiftIndicator, EvalReport};
use crate::nn::Checkpoint;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExternalValidation {
    pub report: EvalReport,
    pub shift: DomainShiftIndicator,
}

/// Evaluates a checkpoint on another labelled set using the preprocessing
/// stored inside it, and measures how far the set's mean embedding sits from
/// the training mean.
pub fn validate_external(checkpoint: &Checkpoint, data: &Dataset) -> Result<ExternalValidation> {
    if data.samples.is_empty() {
        return Err(Error::EmptyManifest.in_stage("external"));
    }
    let model = checkpoint.model().stage("checkpoint")?;
    if checkpoint.embedding_mean.is_empty() {
        return Err(Error::IncompatibleCheckpoint("no training embedding mean stored".into()).in_stage("checkpoint"));
    }
    let set = data.prepare_all(&checkpoint.preprocess).stage("preprocess")?;
    let y: Vec<ClassLabel> = set.iter().map(|p| p.label).collect();
    let s = score_all(&set, |p| cnn_scores(&model, &p.image)).stage("eval")?;
    let report = report_from(&y, &s).stage("eval")?;
    let emb = set
        .iter()
        .map(|p| model.extract_embedding(&p.image))
        .collect::<Result<Vec<_>>>()
        .stage("embed")?;
    let shift = delta_between_means(&checkpoint.embedding_mean, &mean_vector(&emb)?).stage("shift")?;
    Ok(ExternalValidation { report, shift })
}

pub fn validate_external_paths(checkpoint: impl AsRef<Path>, manifest: impl AsRef<Path>) -> Result<ExternalValidation> {
    let ck = Checkpoint::load(checkpoint).stage("checkpoint")?;
    let data = Dataset::load(manifest).stage("ingest")?;
    validate_external(&ck, &data)
}
