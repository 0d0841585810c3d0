//! The file-level workflow behind the CLI: manifest -> feature table ->
//! fitted model file -> evaluation on another table.

use sonocad::pipeline::{evaluate_artifact, handcrafted_table, train_classic_on, ClassicArtifact, Dataset, FeatureTable, ModelKind, RunConfig};
use sonocad::synth::{write_synth, SynthConfig};

fn main() -> sonocad::Result<()> {
    let dir = tempdir();
    write_synth(&SynthConfig { counts: [15, 15, 15], seed: 1, ..SynthConfig::default() }, dir.join("train"))?;
    write_synth(&SynthConfig { counts: [8, 8, 8], seed: 2, ..SynthConfig::default() }, dir.join("test"))?;

    let cfg = RunConfig::default();
    let train = handcrafted_table(&cfg, &Dataset::load(dir.join("train/manifest.csv"))?)?;
    let csv = train.to_csv()?;
    println!("{}", csv.lines().next().unwrap_or_default());
    let train = FeatureTable::from_csv(&csv)?;

    let artifact = train_classic_on(ModelKind::KnnHandcrafted, &cfg, &train)?;
    artifact.save(dir.join("knn.json"))?;
    let back = ClassicArtifact::load(dir.join("knn.json"))?;

    let test = handcrafted_table(&cfg, &Dataset::load(dir.join("test/manifest.csv"))?)?;
    let r = evaluate_artifact(&back, &test)?;
    println!("knn-handcrafted on a fresh set: acc {:.3}  macro F1 {:.3}", r.accuracy(), r.metrics.macro_f1);
    Ok(())
}

fn tempdir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("sonocad_tables_{}", std::process::id()));
    std::fs::create_dir_all(&d).expect("temp dir");
    d
}
