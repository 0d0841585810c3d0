//! SVM grid search and KNN k selection on scaled handcrafted features.

use sonocad::classic::{knn_select_k, svm_grid_search, Classifier, KernelSpec, KnnModel, SvmOvrModel, SvmParams};
use sonocad::dataset::ClassLabel;
use sonocad::features::{handcrafted_features, HandcraftedConfig, MinMaxScaler};
use sonocad::preprocess::PreprocessRecipe;
use sonocad::synth::{generate, SynthConfig};

fn featurize(seed: u64, per_class: usize) -> sonocad::Result<(Vec<sonocad::features::FeatureVector>, Vec<ClassLabel>)> {
    let recipe = PreprocessRecipe::default();
    let cfg = HandcraftedConfig::default();
    let mut x = vec![];
    let mut y = vec![];
    for s in generate(&SynthConfig { counts: [per_class; 3], seed, ..SynthConfig::default() })? {
        let (img, mask) = recipe.apply(&s.image, Some(&s.mask))?;
        x.push(handcrafted_features(&img, mask.as_ref(), &cfg)?);
        y.push(s.label);
    }
    Ok((x, y))
}

fn main() -> sonocad::Result<()> {
    let (train, y) = featurize(1, 20)?;
    let (test, yt) = featurize(2, 10)?;
    let scaler = MinMaxScaler::fit(&train)?;
    let scale = |v: &[sonocad::features::FeatureVector]| -> sonocad::Result<Vec<Vec<f64>>> {
        v.iter().map(|f| scaler.apply(f).map(|f| f.values)).collect()
    };
    let (x, xt) = (scale(&train)?, scale(&test)?);

    let grid = svm_grid_search(&x, &y, &[0.1, 1.0, 10.0], &[0.01, 0.1, 1.0], 5, 0)?;
    println!("svm: C={} gamma={:?} cv acc {:.3}", grid.c, grid.gamma, grid.cv_accuracy);
    let kernel = KernelSpec::rbf(grid.gamma.unwrap())?;
    let svm = SvmOvrModel::fitted(SvmParams::new(grid.c, kernel), &x, &y)?;

    let sel = knn_select_k(&x, &y, &(1..=7).collect::<Vec<_>>(), 5, 0)?;
    println!("knn: k={} cv acc {:.3}", sel.k, sel.cv_accuracy);
    let knn = KnnModel::fit(x.clone(), y.clone(), sel.k, 1e-8)?;

    let acc = |m: &dyn Classifier| -> sonocad::Result<f64> {
        let hits = xt.iter().zip(&yt).filter(|(v, l)| m.predict(v).ok() == Some(**l)).count();
        Ok(hits as f64 / yt.len() as f64)
    };
    println!("test accuracy: svm {:.3}  knn {:.3}", acc(&svm)?, acc(&knn)?);
    println!("svm scores for first test row: {:?}", svm.scores(&xt[0])?);
    Ok(())
}
