//! The preprocessing chain one op at a time, then the same through a recipe.

use sonocad::preprocess::{augment, extract_roi, median_filter_3x3, normalize_minmax, resize_bilinear, AugmentPolicy, PreprocessRecipe};
use sonocad::synth::{generate_one, SynthConfig};
use sonocad::dataset::ClassLabel;

fn main() -> sonocad::Result<()> {
    let cfg = SynthConfig { width: 96, height: 80, sigma: 0.2, seed: 3, ..SynthConfig::default() };
    let s = generate_one(&cfg, ClassLabel::Malignant, 0);

    let n = normalize_minmax(&s.image);
    let m = median_filter_3x3(&n);
    let r = resize_bilinear(&m, 64, 64)?;
    let roi = extract_roi(&m, &s.mask)?;
    println!("raw      {}x{} range {:?}", s.image.width(), s.image.height(), s.image.min_max());
    println!("median   mean {:.4} -> {:.4}", n.mean(), m.mean());
    println!("resized  {}x{}", r.width(), r.height());
    println!("roi crop {}x{}", roi.width(), roi.height());

    let recipe = PreprocessRecipe { roi: true, ..PreprocessRecipe::default() };
    let (out, mask) = recipe.apply(&s.image, Some(&s.mask))?;
    println!("recipe   {}x{} mask area {}", out.width(), out.height(), mask.map_or(0, |m| m.area()));

    let policy = AugmentPolicy { seed: 11, ..AugmentPolicy::default() };
    for i in 0..3 {
        let a = augment(&out, &policy, i);
        println!("draw {i}: {:?}  mean {:.4}", policy.draw(i), a.mean());
    }
    Ok(())
}
