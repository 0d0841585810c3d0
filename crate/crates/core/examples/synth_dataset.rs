//! Writes a small synthetic ultrasound set to disk and summarizes it.
//!
//! cargo run --example synth_dataset -- /tmp/sono_synth

use sonocad::dataset::ClassLabel;
use sonocad::synth::{generate, write_synth, SynthConfig};

fn main() -> sonocad::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "synth_out".into());
    let cfg = SynthConfig {
        counts: [4, 4, 4],
        seed: 7,
        ..SynthConfig::default()
    };
    let rows = write_synth(&cfg, &dir)?;
    println!("{} images written under {dir}", rows.len());

    for s in generate(&cfg)?.iter().step_by(4) {
        let (inside, n) = s
            .image
            .pixels()
            .iter()
            .zip(s.mask.bits())
            .filter(|(_, &m)| m)
            .fold((0.0, 0), |(a, n), (p, _)| (a + p, n + 1));
        let lesion = if n > 0 { format!("{:.3}", inside / n as f64) } else { "-".into() };
        println!(
            "{:<9} mask area {:>4}  mean {:.3}  lesion mean {lesion}",
            s.label.name(),
            s.mask.area(),
            s.image.mean()
        );
    }
    assert!(rows.iter().filter(|r| r.label == ClassLabel::Normal).all(|r| r.mask_path.is_none()));
    Ok(())
}
