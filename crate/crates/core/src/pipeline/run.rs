use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{CnnInit, Finetune, ModelKind, RunConfig, SeedStage};
use super::data::{handcrafted_rows, Dataset, Prepared};
use super::tasks::{panel_name, split_dataset};
use super::models::{cnn_scores, cv_fold_variance, report_from, rows, score_all, ClassicArtifact, ClassicModel};
use crate::classic::{knn::DEFAULT_EPSILON, knn_select_k, svm_grid_search, Classifier, KernelSpec, KnnModel, SvmOvrModel, SvmParams};
use crate::dataset::{write_manifest, ClassLabel, SplitTag};
use crate::error::{Error, Result, StageExt};
use crate::eval::{mean_vector, select_best_model, EvalReport, Selection};
use crate::features::{FeatureVector, MinMaxScaler};
use crate::gradcam::{grad_cam, peak, upsample_overlay};
use crate::image::save_pgm;
use crate::nn::{pretrain_pretext, train, Checkpoint, CnnModel, TrainConfig, TrainExample, TrainHistory};
use crate::synth::{write_synth, SynthConfig};

/// What a finished run hands back besides the files it wrote.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub reports: Vec<(ModelKind, EvalReport)>,
    pub selection: Selection,
    pub cnn_history: Option<TrainHistory>,
    pub gradcam: Option<Localization>,
    pub checkpoint: Option<PathBuf>,
    /// Test rows with absolute paths, usable as an external manifest.
    pub test_manifest: PathBuf,
}

impl RunSummary {
    pub fn report(&self, kind: ModelKind) -> Option<&EvalReport> {
        self.reports.iter().find(|(k, _)| *k == kind).map(|(_, r)| r)
    }
}

/// Grad-CAM peak-in-box statistics over correctly classified lesion images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Localization {
    pub evaluated: usize,
    pub inside: usize,
    pub fraction: f64,
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn to_json_pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Creates the directory and proves we can write into it.
fn probe_output(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

/// Generates the synthetic set under `dir` (seeded by the run seed) and returns its manifest path.
fn materialize_synth(cfg: &SynthConfig, seed: u64, dir: &Path) -> Result<PathBuf> {
    let cfg = SynthConfig { seed, ..cfg.clone() };
    write_synth(&cfg, dir)?;
    Ok(dir.join("manifest.csv"))
}

fn labels(set: &[Prepared]) -> Vec<ClassLabel> {
    set.iter().map(|p| p.label).collect()
}

/// Training settings with the run seed folded into the user-given seeds.
pub fn effective_train_config(cfg: &RunConfig) -> TrainConfig {
    let mut t = cfg.train.clone();
    t.seed ^= cfg.stage_seed(SeedStage::Train);
    t.augmentation.seed ^= cfg.stage_seed(SeedStage::Augment);
    t
}

/// Pretext (or scratch) initialization followed by 3-way training.
pub fn train_cnn(
    cfg: &RunConfig,
    train_set: &[Prepared],
    val_set: &[Prepared],
) -> Result<(CnnModel, TrainHistory)> {
    let tcfg = effective_train_config(cfg);
    let arch = cfg.arch();
    let start = match cfg.cnn.init {
        CnnInit::Scratch => CnnModel::new(arch, tcfg.seed ^ cfg.stage_seed(SeedStage::Head))?,
        CnnInit::Pretext => {
            let pt: Vec<TrainExample> = train_set.iter().map(Prepared::pretext_example).collect();
            let pv: Vec<TrainExample> = val_set.iter().map(Prepared::pretext_example).collect();
            let pcfg = TrainConfig {
                max_epochs: cfg.cnn.pretext_epochs,
                patience: tcfg.patience.min(cfg.cnn.pretext_epochs),
                ..tcfg.clone()
            };
            let (mut m, _) = pretrain_pretext(&arch, &pt, &pv, &pcfg, arch.num_classes)?;
            if cfg.cnn.finetune == Finetune::Full {
                m.unfreeze_all();
            }
            m
        }
    };
    let t: Vec<TrainExample> = train_set.iter().map(Prepared::example).collect();
    let v: Vec<TrainExample> = val_set.iter().map(Prepared::example).collect();
    train(&start, &t, &v, &tcfg)
}

pub fn embeddings(model: &CnnModel, set: &[Prepared]) -> Result<Vec<FeatureVector>> {
    set.iter().map(|p| model.extract_embedding(&p.image)).collect()
}

/// Fits one classical model on training rows, selecting hyperparameters by CV.
pub fn fit_classic(
    kind: ModelKind,
    cfg: &RunConfig,
    x: &[Vec<f64>],
    y: &[ClassLabel],
) -> Result<(ClassicModel, Option<crate::eval::FoldVariance>)> {
    let c = &cfg.classic;
    let cv_seed = cfg.stage_seed(SeedStage::Cv);
    match kind {
        ModelKind::SvmHandcrafted | ModelKind::SvmDeep => {
            let g = svm_grid_search(x, y, &c.c_grid, &c.gamma_grid, c.folds, cv_seed)?;
            let kernel = match g.gamma {
                Some(gamma) => KernelSpec::rbf(gamma)?,
                None => KernelSpec::Linear,
            };
            let params = SvmParams { seed: cv_seed, ..SvmParams::new(g.c, kernel) };
            let fit = |xt: &[Vec<f64>], yt: &[ClassLabel]| SvmOvrModel::fitted(params, xt, yt).map(ClassicModel::Svm);
            let var = cv_fold_variance(x, y, c.folds, cv_seed, fit);
            Ok((fit(x, y)?, var))
        }
        ModelKind::KnnHandcrafted | ModelKind::KnnDeep => {
            let ks: Vec<usize> = (1..=c.k_max).collect();
            let k = knn_select_k(x, y, &ks, c.folds, cv_seed)?.k;
            let fit = |xt: &[Vec<f64>], yt: &[ClassLabel]| {
                KnnModel::fit(xt.to_vec(), yt.to_vec(), k, DEFAULT_EPSILON).map(ClassicModel::Knn)
            };
            let var = cv_fold_variance(x, y, c.folds, cv_seed, fit);
            Ok((fit(x, y)?, var))
        }
        ModelKind::Cnn => Err(Error::InvalidArgument("the CNN is not a classical model".into())),
    }
}

fn roc_name(kind: ModelKind, class: ClassLabel) -> String {
    format!("{kind}_{}.csv", class.name())
}

/// Grad-CAM panels for the test set and the peak-in-box summary.
fn gradcam_stage(
    cfg: &RunConfig,
    model: &CnnModel,
    test: &[Prepared],
    predicted: &[ClassLabel],
    out: &Path,
) -> Result<Localization> {
    let dir = out.join("gradcam");
    let limit = if cfg.cnn.gradcam_limit == 0 { test.len() } else { cfg.cnn.gradcam_limit };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let (mut evaluated, mut inside) = (0, 0);
    for (i, p) in test.iter().enumerate() {
        let hm = grad_cam(model, &p.image, predicted[i].index())?;
        let ov = upsample_overlay(&hm, &p.image, cfg.cnn.gradcam_alpha)?;
        if i < limit {
            let c = predicted[i].index();
            save_pgm(&ov.heat, dir.join(panel_name(&p.id, c, "heat")))?;
            save_pgm(&ov.blend, dir.join(panel_name(&p.id, c, "overlay")))?;
        }
        // mask coordinates no longer line up with a cropped image
        if cfg.preprocess.roi || p.label == ClassLabel::Normal || predicted[i] != p.label {
            continue;
        }
        if let Some((x0, y0, x1, y1)) = p.mask.as_ref().and_then(|m| m.bounding_box()) {
            let (px, py) = peak(&ov.heat);
            evaluated += 1;
            if (x0..=x1).contains(&px) && (y0..=y1).contains(&py) {
                inside += 1;
            }
        }
    }
    Ok(Localization {
        evaluated,
        inside,
        fraction: if evaluated == 0 { 0.0 } else { inside as f64 / evaluated as f64 },
    })
}

fn metrics_csv(reports: &[(ModelKind, EvalReport)]) -> String {
    let mut s = String::from(
        "model,n,accuracy_standard,accuracy_paper,macro_precision,macro_recall,macro_f1,macro_auc,malignant_recall,malignant_auc\n",
    );
    for (k, r) in reports {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "{k},{},{},{},{},{},{},{},{},{}",
            r.n_samples,
            m.accuracy_standard,
            m.accuracy_paper,
            m.macro_precision,
            m.macro_recall,
            m.macro_f1,
            r.macro_auc,
            r.malignant_recall,
            r.malignant_auc
        );
    }
    s
}

fn selection_text(sel: &Selection, reports: &[(ModelKind, EvalReport)]) -> String {
    let mut s = format!("selected: {}\n\n", sel.winner);
    for line in &sel.rationale {
        let _ = writeln!(s, "- {line}");
    }
    s.push('\n');
    for (k, r) in reports {
        let _ = writeln!(
            s,
            "{k}: malignant recall {:.4}, macro AUC {:.4}, accuracy {:.4}",
            r.malignant_recall,
            r.macro_auc,
            r.accuracy()
        );
    }
    s
}

/// Runs split, preprocessing, features, the model roster, evaluation,
/// Grad-CAM and selection, writing everything under `cfg.output_dir`.
///
/// Metric files are only written once every stage has succeeded.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate().stage("config")?;
    let out = cfg.output_dir.clone();
    probe_output(&out).stage("output")?;

    let manifest = match (&cfg.data.manifest, &cfg.data.synth) {
        (Some(m), _) => m.clone(),
        (None, Some(s)) => materialize_synth(s, cfg.seed, &out.join("data")).stage("synth")?,
        (None, None) => unreachable!("validated"),
    };
    let data = Dataset::load(&manifest).stage("ingest")?;
    let spec = split_dataset(cfg, &data).stage("split")?;
    if spec.train.is_empty() || spec.val.is_empty() || spec.test.is_empty() {
        return Err(Error::InvalidArgument("train, val and test partitions must all be non-empty".into()).in_stage("split"));
    }

    let recipe = &cfg.preprocess;
    let train_set = data.prepare(&spec.train, recipe).stage("preprocess")?;
    let val_set = data.prepare(&spec.val, recipe).stage("preprocess")?;
    let test_set = data.prepare(&spec.test, recipe).stage("preprocess")?;
    let (y_train, y_test) = (labels(&train_set), labels(&test_set));

    let mut timing: Vec<(String, f64)> = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timing: &mut Vec<(String, f64)>| {
        timing.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let wants_handcrafted = cfg.roster.iter().any(|k| matches!(k, ModelKind::SvmHandcrafted | ModelKind::KnnHandcrafted));
    let wants_cnn = cfg.roster.iter().any(|k| *k == ModelKind::Cnn || k.uses_deep_features());

    let handcrafted = if wants_handcrafted {
        let tr = handcrafted_rows(&train_set, &cfg.features).stage("features")?;
        let te = handcrafted_rows(&test_set, &cfg.features).stage("features")?;
        let scaler = MinMaxScaler::fit(&tr).stage("features")?;
        let scale = |v: &[FeatureVector]| v.iter().map(|f| scaler.apply(f)).collect::<Result<Vec<_>>>();
        let (tr, te) = (scale(&tr).stage("features")?, scale(&te).stage("features")?);
        lap("features", &mut timing);
        Some((scaler, rows(&tr), rows(&te)))
    } else {
        None
    };

    let mut cnn = None;
    if wants_cnn {
        let (model, hist) = train_cnn(cfg, &train_set, &val_set).stage("train-cnn")?;
        lap("train-cnn", &mut timing);
        let emb_train = embeddings(&model, &train_set).stage("embed")?;
        let emb_test = embeddings(&model, &test_set).stage("embed")?;
        let mean = mean_vector(&emb_train).stage("embed")?;
        lap("embed", &mut timing);
        cnn = Some((model, hist, rows(&emb_train), rows(&emb_test), mean));
    }

    let mut reports: Vec<(ModelKind, EvalReport)> = Vec::new();
    let mut artifacts: Vec<(ModelKind, ClassicArtifact)> = Vec::new();
    let mut cnn_pred = None;
    for &kind in &cfg.roster {
        let report = if kind == ModelKind::Cnn {
            let (model, ..) = cnn.as_ref().expect("trained above");
            let s = score_all(&test_set, |p| cnn_scores(model, &p.image)).stage("eval")?;
            let r = report_from(&y_test, &s).stage("eval")?;
            cnn_pred = Some(s.y_pred);
            r
        } else {
            let (xtr, xte, scaler) = if kind.uses_deep_features() {
                let (_, _, tr, te, _) = cnn.as_ref().expect("trained above");
                (tr, te, None)
            } else {
                let (sc, tr, te) = handcrafted.as_ref().expect("computed above");
                (tr, te, Some(sc.clone()))
            };
            let (model, var) = fit_classic(kind, cfg, xtr, &y_train).stage("train-classic")?;
            let s = score_all(xte, |x| model.scores(x)).stage("eval")?;
            let mut r = report_from(&y_test, &s).stage("eval")?;
            r.fold_variance = var;
            artifacts.push((
                kind,
                ClassicArtifact {
                    kind,
                    preprocess: cfg.preprocess.clone(),
                    features: cfg.features.clone(),
                    scaler,
                    model,
                },
            ));
            r
        };
        lap(kind.name(), &mut timing);
        reports.push((kind, report));
    }

    let gradcam = match (&cnn, &cnn_pred) {
        (Some((model, ..)), Some(pred)) => {
            let l = gradcam_stage(cfg, model, &test_set, pred, &out).stage("gradcam")?;
            lap("gradcam", &mut timing);
            Some(l)
        }
        _ => None,
    };

    let named: Vec<(String, EvalReport)> = reports.iter().map(|(k, r)| (k.name().to_string(), r.clone())).collect();
    let selection = select_best_model(&named).stage("select")?;

    // everything below only writes results
    let w = |rel: &str, body: &str| write_file(&out.join(rel), body).stage("write");
    w("config.toml", &cfg.to_toml()?)?;
    w("split.json", &to_json_pretty(&spec)?)?;
    let test_rows: Vec<_> = data
        .absolute_rows(&spec.test)
        .into_iter()
        .map(|mut r| {
            r.split = Some(SplitTag::Test);
            r
        })
        .collect();
    let test_manifest = out.join("test_manifest.csv");
    write_manifest(&test_rows, &test_manifest).stage("write")?;

    let mut checkpoint = None;
    if let Some((model, hist, _, _, mean)) = &cnn {
        let ck = Checkpoint::new(model, effective_train_config(cfg), cfg.preprocess.clone(), mean.clone());
        let p = out.join("models/cnn_checkpoint.json");
        write_file(&p, ck.to_json()?).stage("write")?;
        w("cnn_history.json", &to_json_pretty(hist)?)?;
        checkpoint = Some(p);
    }
    for (kind, a) in &artifacts {
        write_file(&out.join(format!("models/{kind}.json")), serde_json::to_string(a)?).stage("write")?;
    }
    let names: Vec<&str> = ClassLabel::ALL.iter().map(|c| c.name()).collect();
    for (kind, r) in &reports {
        w(&format!("metrics/{kind}.json"), &to_json_pretty(r)?)?;
        w(&format!("metrics/{kind}_confusion.csv"), &r.confusion.to_csv(&names))?;
        for (class, curve) in ClassLabel::ALL.iter().zip(&r.roc) {
            w(&format!("roc/{}", roc_name(*kind, *class)), &curve.to_csv())?;
        }
    }
    w("metrics.csv", &metrics_csv(&reports))?;
    if let Some(l) = &gradcam {
        w("gradcam/localization.json", &to_json_pretty(l)?)?;
    }
    w("selection.json", &to_json_pretty(&selection)?)?;
    w("selection.txt", &selection_text(&selection, &reports))?;
    let latency: Vec<(String, f64)> = reports.iter().map(|(k, r)| (k.name().to_string(), r.latency_seconds)).collect();
    w(
        "timing.json",
        &to_json_pretty(&serde_json::json!({ "stage_seconds": timing, "median_latency_seconds": latency }))?,
    )?;

    Ok(RunSummary {
        output_dir: out,
        reports,
        selection,
        cnn_history: cnn.map(|(_, h, ..)| h),
        gradcam,
        checkpoint,
        test_manifest,
    })
}
