//! Grad-CAM on a briefly trained CNN; writes heat and overlay PGMs.
//!
//! cargo run --release --example gradcam_heatmap -- /tmp/sono_cam

use sonocad::dataset::ClassLabel;
use sonocad::gradcam::{grad_cam, peak, upsample_overlay};
use sonocad::image::save_pgm;
use sonocad::nn::{train, ArchSpec, CnnModel, TrainConfig, TrainExample};
use sonocad::preprocess::{AugmentPolicy, PreprocessRecipe};
use sonocad::synth::{generate, SynthConfig};

fn main() -> sonocad::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "gradcam_out".into()));
    std::fs::create_dir_all(&dir).map_err(|e| sonocad::Error::InvalidArgument(e.to_string()))?;
    let recipe = PreprocessRecipe { width: 32, height: 32, ..PreprocessRecipe::default() };
    let synth = |seed, n| SynthConfig { width: 32, height: 32, counts: [n; 3], seed, ..SynthConfig::default() };

    let prep = |seed, n| -> sonocad::Result<Vec<_>> {
        generate(&synth(seed, n))?
            .into_iter()
            .map(|s| {
                let (img, mask) = recipe.apply(&s.image, Some(&s.mask))?;
                Ok((TrainExample { image: img, target: s.label.index() }, mask.unwrap()))
            })
            .collect()
    };
    let tr: Vec<_> = prep(1, 30)?.into_iter().map(|(e, _)| e).collect();
    let va: Vec<_> = prep(2, 5)?.into_iter().map(|(e, _)| e).collect();
    let cfg = TrainConfig { learning_rate: 1e-3, max_epochs: 10, augmentation: AugmentPolicy::identity(), ..TrainConfig::default() };
    let (model, _) = train(&CnnModel::new(ArchSpec::default().with_input(32, 32), 3)?, &tr, &va, &cfg)?;

    for (i, (e, mask)) in prep(9, 2)?.iter().enumerate() {
        let label = ClassLabel::from_index(e.target)?;
        let hm = grad_cam(&model, &e.image, e.target)?;
        let ov = upsample_overlay(&hm, &e.image, 0.4)?;
        let (px, py) = peak(&ov.heat);
        let inside = mask.bounding_box().map(|(x0, y0, x1, y1)| px >= x0 && px <= x1 && py >= y0 && py <= y1);
        println!("{i} {:<9} map {}x{} peak ({px},{py}) inside lesion box: {inside:?}", label.name(), hm.width, hm.height);
        save_pgm(&ov.heat, dir.join(format!("{i}_c{}_heat.pgm", e.target)))?;
        save_pgm(&ov.blend, dir.join(format!("{i}_c{}_overlay.pgm", e.target)))?;
    }
    Ok(())
}
