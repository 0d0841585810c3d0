//! The whole pipeline on a reduced synthetic set, from a TOML config.
//!
//! cargo run --release --example full_pipeline -- /tmp/sono_run

use sonocad::pipeline::{run_pipeline, RunConfig};

const CONFIG: &str = r#"
seed = 11
roster = ["svm-handcrafted", "svm-deep", "knn-handcrafted", "knn-deep", "cnn"]

[data.synth]
counts = [40, 40, 40]
width = 32
height = 32

[preprocess]
width = 32
height = 32

[classic]
c_grid = [1.0, 10.0]
gamma_grid = [0.1, 1.0]

[cnn]
pretext_epochs = 3

[train]
learning_rate = 1e-3
max_epochs = 12
"#;

fn main() -> sonocad::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "pipeline_out".into());
    let cfg = RunConfig::from_toml_with(CONFIG, &[("output_dir".into(), format!("{out:?}"))])?;
    let summary = run_pipeline(&cfg)?;
    for (kind, r) in &summary.reports {
        println!(
            "{kind:<16} acc {:.3}  macro AUC {:.3}  malignant recall {:.3}  latency {:.2e}s",
            r.accuracy(),
            r.macro_auc,
            r.malignant_recall,
            r.latency_seconds
        );
    }
    if let Some(l) = summary.gradcam {
        println!("grad-cam peak inside lesion box: {}/{}", l.inside, l.evaluated);
    }
    println!("selected {}", summary.selection.winner);
    for line in &summary.selection.rationale {
        println!("  {line}");
    }
    println!("artifacts in {}", summary.output_dir.display());
    Ok(())
}
