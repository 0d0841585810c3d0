//! Pretext pretraining, head replacement and anchored fine-tuning of the
//! mini-CNN on a small synthetic set.

use sonocad::dataset::ClassLabel;
use sonocad::nn::{evaluate_set, loss_ce_l2sp, pretrain_pretext, train, ArchSpec, Checkpoint, TrainConfig, TrainExample, Tensor};
use sonocad::preprocess::{AugmentPolicy, PreprocessRecipe};
use sonocad::synth::{generate, SynthConfig};

fn examples(seed: u64, per_class: usize, binary: bool) -> sonocad::Result<Vec<TrainExample>> {
    let recipe = PreprocessRecipe { width: 32, height: 32, ..PreprocessRecipe::default() };
    let cfg = SynthConfig { width: 32, height: 32, counts: [per_class; 3], seed, ..SynthConfig::default() };
    generate(&cfg)?
        .into_iter()
        .map(|s| {
            let target = if binary { usize::from(s.label != ClassLabel::Normal) } else { s.label.index() };
            Ok(TrainExample { image: recipe.apply(&s.image, None)?.0, target })
        })
        .collect()
}

fn main() -> sonocad::Result<()> {
    let arch = ArchSpec::default().with_input(32, 32);
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        max_epochs: 8,
        patience: 3,
        augmentation: AugmentPolicy::identity(),
        seed: 5,
        ..TrainConfig::default()
    };

    let (model, pre) = pretrain_pretext(&arch, &examples(1, 20, true)?, &examples(2, 5, true)?, &cfg, 3)?;
    println!("pretext: {} epochs, last val acc {:.3}", pre.epochs.len(), pre.epochs.last().unwrap().val_accuracy);

    let train_set = examples(1, 20, false)?;
    let val_set = examples(2, 5, false)?;
    let imgs: Vec<_> = train_set.iter().take(4).map(|e| &e.image).collect();
    let (logits, _) = model.forward(&Tensor::from_images(&imgs)?)?;
    let targets: Vec<usize> = train_set.iter().take(4).map(|e| e.target).collect();
    let l = loss_ce_l2sp(&logits, &targets, &model.theta, &model.anchor, cfg.lambda)?;
    println!("after replace_head: penalty {} (anchor = weights)", l.penalty);

    let mut m = model;
    m.unfreeze_all();
    let (best, hist) = train(&m, &train_set, &val_set, &cfg)?;
    for e in &hist.epochs {
        println!("epoch {:>2}  train {:.4}  val {:.4}  val acc {:.3}", e.epoch, e.train_loss, e.val_loss, e.val_accuracy);
    }
    let (loss, acc) = evaluate_set(&best, &examples(3, 10, false)?)?;
    println!("held-out: loss {loss:.4} acc {acc:.3} (best epoch {})", hist.best_epoch);

    let ck = Checkpoint::new(&best, cfg, PreprocessRecipe { width: 32, height: 32, ..PreprocessRecipe::default() }, vec![]);
    println!("checkpoint json: {} bytes, {} parameters", ck.to_json()?.len(), best.num_params());
    Ok(())
}
