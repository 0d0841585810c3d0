use std::path::{Path, PathBuf};

use crate::dataset::{load_manifest, resolve, ClassLabel, LabeledSample};
use crate::error::{Error, Result};
use crate::features::{handcrafted_features, FeatureVector, HandcraftedConfig};
use crate::image::{BinaryMask, GrayImage};
use crate::nn::TrainExample;
use crate::preprocess::PreprocessRecipe;

/// One sample after the preprocessing recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    /// Image file stem.
    pub id: String,
    pub label: ClassLabel,
    pub image: GrayImage,
    /// Mask resampled onto the working grid.
    pub mask: Option<BinaryMask>,
}

impl Prepared {
    pub fn example(&self) -> TrainExample {
        TrainExample {
            image: self.image.clone(),
            target: self.label.index(),
        }
    }

    /// Binary lesion/no-lesion target for pretext training.
    pub fn pretext_example(&self) -> TrainExample {
        TrainExample {
            image: self.image.clone(),
            target: usize::from(self.label != ClassLabel::Normal),
        }
    }
}

/// Manifest rows with the directory their relative paths hang off.
pub struct Dataset {
    pub base: PathBuf,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn load(manifest: impl AsRef<Path>) -> Result<Self> {
        let manifest = manifest.as_ref();
        let samples = load_manifest(manifest)?;
        let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { base, samples })
    }

    /// Loads and preprocesses the rows at `indices`.
    pub fn prepare(&self, indices: &[usize], recipe: &PreprocessRecipe) -> Result<Vec<Prepared>> {
        indices.iter().map(|&i| prepare_one(&self.base, &self.samples[i], recipe)).collect()
    }

    pub fn prepare_all(&self, recipe: &PreprocessRecipe) -> Result<Vec<Prepared>> {
        let all: Vec<usize> = (0..self.samples.len()).collect();
        self.prepare(&all, recipe)
    }

    /// Copy of the rows with paths made absolute, for manifests written elsewhere.
    pub fn absolute_rows(&self, indices: &[usize]) -> Vec<LabeledSample> {
        indices
            .iter()
            .map(|&i| {
                let mut s = self.samples[i].clone();
                s.image_path = absolute(&resolve(&self.base, &s.image_path));
                s.mask_path = s.mask_path.map(|m| absolute(&resolve(&self.base, &m)));
                s
            })
            .collect()
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

pub fn prepare_one(base: &Path, s: &LabeledSample, recipe: &PreprocessRecipe) -> Result<Prepared> {
    let img = s.load_image(base)?;
    let mask = s.load_mask(base)?;
    if let Some(m) = &mask {
        if (m.width(), m.height()) != (img.width(), img.height()) {
            return Err(Error::ShapeMismatch(format!(
                "mask {}x{} does not match image {}x{} for {}",
                m.width(),
                m.height(),
                img.width(),
                img.height(),
                s.image_path.display()
            )));
        }
    }
    let (image, mask) = recipe.apply(&img, mask.as_ref())?;
    let id = s
        .image_path
        .file_stem()
        .map(|x| x.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Prepared {
        id,
        label: s.label,
        image,
        mask,
    })
}

pub fn handcrafted_rows(set: &[Prepared], cfg: &HandcraftedConfig) -> Result<Vec<FeatureVector>> {
    set.iter().map(|p| handcrafted_features(&p.image, p.mask.as_ref(), cfg)).collect()
}
