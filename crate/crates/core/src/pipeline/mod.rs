//! End-to-end orchestration: config, dataset preparation, the model roster,
//! artifact writing and external validation.

pub mod config;
pub mod data;
pub mod external;
pub mod models;
pub mod run;
pub mod tasks;

pub use config::{ClassicConfig, CnnConfig, CnnInit, DataConfig, Finetune, ModelKind, RunConfig, SeedStage, SplitConfig};
pub use data::{handcrafted_rows, prepare_one, Dataset, Prepared};
pub use external::{validate_external, validate_external_paths, ExternalValidation};
pub use models::{ClassicArtifact, ClassicModel};
pub use run::{effective_train_config, embeddings, fit_classic, run_pipeline, train_cnn, Localization, RunSummary};
pub use tasks::{
    embedding_table, evaluate_artifact, evaluate_checkpoint, gradcam_panels, handcrafted_table, split_dataset, train_classic_on,
    train_cnn_on, write_prepared, FeatureTable,
};
