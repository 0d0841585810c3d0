//! Shape, GLCM and histogram features on benign vs malignant lesions.

use sonocad::dataset::ClassLabel;
use sonocad::features::{handcrafted_features, HandcraftedConfig, MinMaxScaler};
use sonocad::synth::{generate, SynthConfig};

fn main() -> sonocad::Result<()> {
    let set = generate(&SynthConfig { counts: [5, 5, 5], seed: 1, ..SynthConfig::default() })?;
    let cfg = HandcraftedConfig::default();
    let rows = set
        .iter()
        .map(|s| handcrafted_features(&s.image, Some(&s.mask), &cfg))
        .collect::<sonocad::Result<Vec<_>>>()?;
    println!("{} features: {:?} ...", rows[0].len(), &rows[0].names[..8]);

    for class in ClassLabel::ALL {
        let pick: Vec<_> = set.iter().zip(&rows).filter(|(s, _)| s.label == class).map(|(_, r)| r).collect();
        let mean = |name: &str| pick.iter().map(|r| r.get(name).unwrap()).sum::<f64>() / pick.len() as f64;
        println!(
            "{:<9} compactness {:.3}  glcm contrast {:.3}  glcm entropy {:.3}",
            class.name(),
            mean("compactness"),
            mean("glcm_contrast"),
            mean("glcm_entropy")
        );
    }

    let scaler = MinMaxScaler::fit(&rows)?;
    let scaled = scaler.apply(&rows[0])?;
    println!("scaled first row, first 6: {:?}", &scaled.values[..6]);
    Ok(())
}
