use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classic::search::{DEFAULT_C_GRID, DEFAULT_GAMMA_GRID};
use crate::error::{Error, Result};
use crate::features::HandcraftedConfig;
use crate::nn::{ArchSpec, TrainConfig};
use crate::preprocess::PreprocessRecipe;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    SvmHandcrafted,
    SvmDeep,
    KnnHandcrafted,
    KnnDeep,
    Cnn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::SvmHandcrafted,
        ModelKind::SvmDeep,
        ModelKind::KnnHandcrafted,
        ModelKind::KnnDeep,
        ModelKind::Cnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SvmHandcrafted => "svm-handcrafted",
            ModelKind::SvmDeep => "svm-deep",
            ModelKind::KnnHandcrafted => "knn-handcrafted",
            ModelKind::KnnDeep => "knn-deep",
            ModelKind::Cnn => "cnn",
        }
    }

    pub fn uses_deep_features(self) -> bool {
        matches!(self, ModelKind::SvmDeep | ModelKind::KnnDeep)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Manifest CSV; takes precedence over `synth`.
    pub manifest: Option<PathBuf>,
    /// Generated in memory when no manifest is given; its seed is the run seed.
    pub synth: Option<SynthConfig>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            synth: Some(SynthConfig {
                counts: [130, 130, 130],
                ..SynthConfig::default()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    /// Use the manifest's `split` column instead of a random split.
    pub official: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
            official: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicConfig {
    pub c_grid: Vec<f64>,
    /// Empty selects a linear kernel.
    pub gamma_grid: Vec<f64>,
    pub k_max: usize,
    pub folds: usize,
}

impl Default for ClassicConfig {
    fn default() -> Self {
        Self {
            c_grid: DEFAULT_C_GRID.to_vec(),
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
            k_max: 10,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CnnInit {
    /// Binary lesion/no-lesion pretraining, then a fresh 3-way head.
    Pretext,
    Scratch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Finetune {
    /// Every layer trainable from the first epoch, anchored by L2-SP.
    Full,
    /// Head only, releasing one block per plateau.
    Progressive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnConfig {
    pub init: CnnInit,
    pub finetune: Finetune,
    pub pretext_epochs: usize,
    pub conv_channels: Vec<usize>,
    pub residual: bool,
    pub hidden: usize,
    /// Test images rendered as Grad-CAM panels (all when 0).
    pub gradcam_limit: usize,
    pub gradcam_alpha: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        let a = ArchSpec::default();
        Self {
            init: CnnInit::Pretext,
            finetune: Finetune::Full,
            pretext_epochs: 10,
            conv_channels: a.conv_channels,
            residual: a.residual,
            hidden: a.hidden,
            gradcam_limit: 0,
            gradcam_alpha: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub roster: Vec<ModelKind>,
    pub data: DataConfig,
    pub split: SplitConfig,
    pub preprocess: PreprocessRecipe,
    pub features: HandcraftedConfig,
    pub classic: ClassicConfig,
    pub cnn: CnnConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("run"),
            roster: ModelKind::ALL.to_vec(),
            data: DataConfig::default(),
            split: SplitConfig::default(),
            preprocess: PreprocessRecipe::default(),
            features: HandcraftedConfig::default(),
            classic: ClassicConfig::default(),
            cnn: CnnConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Sets `path` (dotted keys) in a TOML tree. The value is parsed as a TOML
/// literal when possible and kept as a string otherwise.
pub fn set_toml_path(root: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let value = parse_literal(raw);
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::InvalidArgument(format!("bad option path `{path}`")));
    }
    let mut table = root;
    for k in &keys[..keys.len() - 1] {
        let entry = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidArgument(format!("`{k}` in `{path}` is not a section")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn parse_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    /// Parses TOML text and applies `key=value` overrides on top.
    pub fn from_toml_with(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Format(format!("config: {e}")))?;
        for (k, v) in overrides {
            set_toml_path(&mut table, k, v)?;
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_with(&text, overrides)?;
        // relative manifest paths follow the config file
        if let (Some(m), Some(dir)) = (cfg.data.manifest.as_mut(), path.parent()) {
            if m.is_relative() {
                *m = dir.join(&*m);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.roster.is_empty() {
            return Err(Error::InvalidArgument("roster is empty".into()));
        }
        if self.data.manifest.is_none() && self.data.synth.is_none() {
            return Err(Error::InvalidArgument("data needs a manifest or a synth section".into()));
        }
        if let Some(s) = &self.data.synth {
            s.validate()?;
        }
        if self.classic.folds < 2 || self.classic.k_max == 0 || self.classic.c_grid.is_empty() {
            return Err(Error::InvalidArgument("classic: folds >= 2, k_max >= 1, nonempty C grid".into()));
        }
        if !(0.0..=1.0).contains(&self.cnn.gradcam_alpha) {
            return Err(Error::InvalidArgument("cnn.gradcam_alpha must be in [0, 1]".into()));
        }
        if self.cnn.pretext_epochs == 0 {
            return Err(Error::InvalidArgument("cnn.pretext_epochs must be positive".into()));
        }
        self.train.validate()
    }

    pub fn arch(&self) -> ArchSpec {
        ArchSpec {
            input_height: self.preprocess.height,
            input_width: self.preprocess.width,
            conv_channels: self.cnn.conv_channels.clone(),
            residual: self.cnn.residual,
            hidden: self.cnn.hidden,
            num_classes: crate::dataset::NUM_CLASSES,
        }
    }

    /// Independent seed for one named pipeline stage.
    pub fn stage_seed(&self, stage: SeedStage) -> u64 {
        crate::rng::mix(self.seed ^ crate::rng::mix(stage as u64 + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStage {
    Split,
    Cv,
    Train,
    Augment,
    Head,
}
