use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sonocad::dataset::ClassLabel;
use sonocad::eval::EvalReport;
use sonocad::image::{load_grayscale_image, load_mask, save_pgm};
use sonocad::nn::Checkpoint;
use sonocad::pipeline::{self, tasks::write_text, ClassicArtifact, Dataset, FeatureTable, ModelKind, RunConfig};
use sonocad::preprocess::{augment, extract_roi, median_filter_3x3, normalize_minmax, resize_bilinear};
use sonocad::synth::write_synth;
use sonocad::{Error, Result};

/// Breast-ultrasound classification toolkit.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set train.learning_rate=1e-3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Op {
    Normalize,
    Median,
    Resize,
    Roi,
    Augment,
    /// The full configured chain.
    Recipe,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a synthetic image set (PGM images, masks, manifest.csv).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Stratified train/val/test indices as JSON.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Apply one preprocessing operation to one image.
    Preprocess {
        #[arg(value_enum)]
        op: Op,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Required by `roi`, optional for `recipe`.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Augmentation draw index.
        #[arg(long, default_value_t = 0)]
        draw: u64,
    },
    /// Handcrafted feature table for every manifest row.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an SVM or KNN on a feature table.
    TrainClassic {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the CNN on the train/val part of a manifest.
    TrainCnn {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Penultimate-layer embeddings as a feature table.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a classical model on a feature table.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a CNN checkpoint on a manifest.
    EvalCnn {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grad-CAM heat rasters and overlays for every manifest row.
    Gradcam {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Explain this class instead of the predicted one.
        #[arg(long)]
        class: Option<ClassLabel>,
    },
    /// The whole pipeline into one output directory.
    Run {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrics and embedding shift of a checkpoint on another dataset.
    ValidateExternal {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli, extra: &[(&str, String)]) -> Result<RunConfig> {
    let mut overrides = Vec::new();
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("expected KEY=VALUE, got `{kv}`")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    overrides.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    match &cli.config {
        Some(p) => RunConfig::load(p, &overrides),
        None => RunConfig::from_toml_with("", &overrides),
    }
}

fn seed_override(seed: Option<u64>) -> Vec<(&'static str, String)> {
    seed.map(|s| vec![("seed", s.to_string())]).unwrap_or_default()
}

fn print_report(r: &EvalReport, out: Option<&Path>) -> Result<()> {
    println!(
        "n {}  accuracy {:.4}  macro AUC {:.4}  malignant recall {:.4}  macro F1 {:.4}",
        r.n_samples,
        r.accuracy(),
        r.macro_auc,
        r.malignant_recall,
        r.metrics.macro_f1
    );
    if let Some(p) = out {
        write_text(p, &serde_json::to_string_pretty(r)?)?;
    }
    Ok(())
}

fn preprocess(cfg: &RunConfig, op: Op, input: &Path, output: &Path, mask: Option<&Path>, draw: u64) -> Result<()> {
    let img = load_grayscale_image(input)?;
    let mask = mask.map(load_mask).transpose()?;
    let r = &cfg.preprocess;
    let out = match op {
        Op::Normalize => normalize_minmax(&img),
        Op::Median => median_filter_3x3(&img.to_unit()),
        Op::Resize => resize_bilinear(&img.to_unit(), r.width, r.height)?,
        Op::Roi => {
            let m = mask.ok_or_else(|| Error::InvalidArgument("roi needs --mask".into()))?;
            extract_roi(&img.to_unit(), &m)?
        }
        Op::Augment => augment(&img.to_unit(), &cfg.train.augmentation, draw),
        Op::Recipe => r.apply(&img, mask.as_ref())?.0,
    };
    save_pgm(&out, output)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Synth { out, seed } => {
            let cfg = load_config(cli, &seed_override(*seed))?;
            let synth = cfg.data.synth.clone().unwrap_or_default();
            let rows = write_synth(&sonocad::synth::SynthConfig { seed: cfg.seed, ..synth }, out)?;
            println!("wrote {} samples to {}", rows.len(), out.display());
        }
        Cmd::Split { manifest, out, seed } => {
            let cfg = load_config(cli, &seed_override(*seed))?;
            let spec = pipeline::split_dataset(&cfg, &Dataset::load(manifest)?)?;
            write_text(out, &serde_json::to_string_pretty(&spec)?)?;
            println!("train {}  val {}  test {}", spec.train.len(), spec.val.len(), spec.test.len());
        }
        Cmd::Preprocess { op, input, output, mask, draw } => {
            let cfg = load_config(cli, &[])?;
            preprocess(&cfg, *op, input, output, mask.as_deref(), *draw)?;
        }
        Cmd::Features { manifest, out } => {
            let cfg = load_config(cli, &[])?;
            let t = pipeline::handcrafted_table(&cfg, &Dataset::load(manifest)?)?;
            write_text(out, &t.to_csv()?)?;
            println!("{} rows x {} features", t.rows.len(), t.rows[0].len());
        }
        Cmd::TrainClassic { features, model, out, seed } => {
            let cfg = load_config(cli, &seed_override(*seed))?;
            let a = pipeline::train_classic_on(*model, &cfg, &FeatureTable::load(features)?)?;
            a.save(out)?;
        }
        Cmd::TrainCnn { manifest, out, seed } => {
            let cfg = load_config(cli, &seed_override(*seed))?;
            let (ck, hist) = pipeline::train_cnn_on(&cfg, &Dataset::load(manifest)?)?;
            ck.save(out)?;
            println!("{} epochs, best {}", hist.epochs.len(), hist.best_epoch);
        }
        Cmd::Embed { checkpoint, manifest, out } => {
            let t = pipeline::embedding_table(&Checkpoint::load(checkpoint)?, &Dataset::load(manifest)?)?;
            write_text(out, &t.to_csv()?)?;
        }
        Cmd::Eval { model, features, out } => {
            let a = ClassicArtifact::load(model)?;
            print_report(&pipeline::evaluate_artifact(&a, &FeatureTable::load(features)?)?, out.as_deref())?;
        }
        Cmd::EvalCnn { checkpoint, manifest, out } => {
            let r = pipeline::evaluate_checkpoint(&Checkpoint::load(checkpoint)?, &Dataset::load(manifest)?)?;
            print_report(&r, out.as_deref())?;
        }
        Cmd::Gradcam { checkpoint, manifest, out, class } => {
            let cfg = load_config(cli, &[])?;
            let ck = Checkpoint::load(checkpoint)?;
            let n = pipeline::gradcam_panels(&ck, &Dataset::load(manifest)?, *class, cfg.cnn.gradcam_alpha, out)?;
            println!("wrote {n} panels to {}", out.display());
        }
        Cmd::Run { seed, out } => {
            let mut extra = vec![("seed", seed.to_string())];
            if let Some(o) = out {
                extra.push(("output_dir", format!("{:?}", o.display().to_string())));
            }
            let cfg = load_config(cli, &extra)?;
            let s = pipeline::run_pipeline(&cfg)?;
            for (k, r) in &s.reports {
                println!("{k:<16} accuracy {:.4}  malignant recall {:.4}  macro AUC {:.4}", r.accuracy(), r.malignant_recall, r.macro_auc);
            }
            println!("selected {} -> {}", s.selection.winner, s.output_dir.display());
        }
        Cmd::ValidateExternal { checkpoint, manifest, out } => {
            let v = pipeline::validate_external_paths(checkpoint, manifest)?;
            print_report(&v.report, None)?;
            println!("delta_mu {:.6}", v.shift.delta_mu);
            if let Some(p) = out {
                write_text(p, &serde_json::to_string_pretty(&v)?)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
