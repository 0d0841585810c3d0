//! Trains through the pipeline, then checks the CNN checkpoint on its own
//! test split and on a noisier synthetic set.
//!
//! cargo run --release --example external_validation -- /tmp/sono_ext

use std::path::PathBuf;

use sonocad::pipeline::{run_pipeline, validate_external, validate_external_paths, Dataset, ModelKind, RunConfig};
use sonocad::synth::{write_synth, SynthConfig};
use sonocad::nn::Checkpoint;

fn main() -> sonocad::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "external_out".into()));
    let mut cfg = RunConfig {
        seed: 4,
        output_dir: out.join("run"),
        roster: vec![ModelKind::Cnn],
        ..RunConfig::default()
    };
    cfg.data.synth = Some(SynthConfig { counts: [40, 40, 40], ..SynthConfig::default() });
    cfg.cnn.pretext_epochs = 3;
    cfg.train.learning_rate = 1e-3;
    cfg.train.max_epochs = 10;
    let run = run_pipeline(&cfg)?;
    let ck_path = run.checkpoint.expect("cnn in roster");

    let own = validate_external_paths(&ck_path, &run.test_manifest)?;
    println!("own test split: acc {:.3}  delta mu {:.4}", own.report.accuracy(), own.shift.delta_mu);

    let shifted = SynthConfig { counts: [20, 20, 20], sigma: 0.25, seed: 99, ..SynthConfig::default() };
    write_synth(&shifted, out.join("shifted"))?;
    let ck = Checkpoint::load(&ck_path)?;
    let ext = validate_external(&ck, &Dataset::load(out.join("shifted/manifest.csv"))?)?;
    println!("shifted set:    acc {:.3}  delta mu {:.4}", ext.report.accuracy(), ext.shift.delta_mu);
    Ok(())
}
