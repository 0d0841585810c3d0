//! Labels, dataset manifests, and deterministic stratified partitions.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{self, BinaryMask, GrayImage};
use crate::rng::stream_rng;

/// Diagnostic class. The discriminants are the class indices used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    Normal = 0,
    Benign = 1,
    Malignant = 2,
}

pub const NUM_CLASSES: usize = 3;

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] =
        [ClassLabel::Normal, ClassLabel::Benign, ClassLabel::Malignant];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(i.to_string()))
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "normal",
            ClassLabel::Benign => "benign",
            ClassLabel::Malignant => "malignant",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "0" => Ok(ClassLabel::Normal),
            "benign" | "1" => Ok(ClassLabel::Benign),
            "malignant" | "2" => Ok(ClassLabel::Malignant),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

/// Which partition a manifest row belongs to, when the dataset ships official splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(SplitTag::Train),
            "val" | "valid" | "validation" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            other => Err(Error::Manifest(format!("unknown split tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub image_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub label: ClassLabel,
    pub source: String,
    pub split: Option<SplitTag>,
}

impl LabeledSample {
    pub fn new(image_path: impl Into<PathBuf>, label: ClassLabel) -> Self {
        Self {
            image_path: image_path.into(),
            mask_path: None,
            label,
            source: String::new(),
            split: None,
        }
    }

    pub fn load_image(&self, base: &Path) -> Result<GrayImage> {
        image::load_grayscale_image(resolve(base, &self.image_path))
    }

    pub fn load_mask(&self, base: &Path) -> Result<Option<BinaryMask>> {
        self.mask_path
            .as_ref()
            .map(|p| image::load_mask(resolve(base, p)))
            .transpose()
    }
}

/// Relative manifest paths are taken relative to the manifest's directory.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn reject_comma(field: &str) -> Result<()> {
    if field.contains(',') {
        return Err(Error::Manifest(format!("path contains a comma: `{field}`")));
    }
    Ok(())
}

/// Parses manifest CSV text. Required columns: `image_path`, `label`;
/// optional: `mask_path`, `source`, `split`.
pub fn parse_manifest(text: &str) -> Result<Vec<LabeledSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let image_col = col("image_path")
        .ok_or_else(|| Error::Manifest("missing required column `image_path`".into()))?;
    let label_col =
        col("label").ok_or_else(|| Error::Manifest("missing required column `label`".into()))?;
    let mask_col = col("mask_path");
    let source_col = col("source");
    let split_col = col("split");

    let mut samples = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: Option<usize>| c.and_then(|c| rec.get(c)).unwrap_or("");
        let image_path = field(Some(image_col));
        if image_path.is_empty() {
            return Err(Error::Manifest(format!("row {}: empty image_path", row + 1)));
        }
        reject_comma(image_path)?;
        let mask = field(mask_col);
        reject_comma(mask)?;
        let split = field(split_col);
        samples.push(LabeledSample {
            image_path: PathBuf::from(image_path),
            mask_path: (!mask.is_empty()).then(|| PathBuf::from(mask)),
            label: field(Some(label_col)).parse()?,
            source: field(source_col).to_string(),
            split: if split.is_empty() {
                None
            } else {
                Some(split.parse()?)
            },
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(samples)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

pub fn manifest_to_string(samples: &[LabeledSample]) -> Result<String> {
    let with_split = samples.iter().any(|s| s.split.is_some());
    let mut out = String::from("image_path,label,mask_path,source");
    if with_split {
        out.push_str(",split");
    }
    out.push('\n');
    for s in samples {
        let img = s.image_path.to_string_lossy();
        let mask = s
            .mask_path
            .as_ref()
            .map(|p| p.to_string_lossy().into_owned())
            .unwrap_or_default();
        reject_comma(&img)?;
        reject_comma(&mask)?;
        reject_comma(&s.source)?;
        out.push_str(&format!("{img},{},{mask},{}", s.label, s.source));
        if with_split {
            let tag = match s.split {
                Some(SplitTag::Train) => "train",
                Some(SplitTag::Val) => "val",
                Some(SplitTag::Test) => "test",
                None => "",
            };
            out.push(',');
            out.push_str(tag);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_manifest(samples: &[LabeledSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, manifest_to_string(samples)?).map_err(|e| Error::io(path, e))
}

/// Builds a manifest from a BUSI-style tree: `<root>/<class>/<image>`, with
/// masks recognised by a `_mask` stem suffix next to their image.
pub fn manifest_from_directory(root: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let root = root.as_ref();
    let mut samples = Vec::new();
    for label in ClassLabel::ALL {
        let dir = root.join(label.name());
        if !dir.is_dir() {
            continue;
        }
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                    Some("pgm" | "png")
                )
            })
            .collect();
        files.sort();
        for f in &files {
            let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            if stem.contains("_mask") {
                continue;
            }
            let ext = f.extension().and_then(|e| e.to_str()).unwrap_or("pgm");
            let mask = f.with_file_name(format!("{stem}_mask.{ext}"));
            let rel = |p: &Path| p.strip_prefix(root).unwrap_or(p).to_path_buf();
            samples.push(LabeledSample {
                image_path: rel(f),
                mask_path: mask.exists().then(|| rel(&mask)),
                label,
                source: root
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                split: None,
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(samples)
}

/// Disjoint train/val/test index lists into a sample list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SplitSpec {
    /// Uses the manifest's own `split` column. Every row must carry a tag.
    pub fn from_official(samples: &[LabeledSample]) -> Result<Self> {
        let mut spec = SplitSpec {
            train: vec![],
            val: vec![],
            test: vec![],
            seed: 0,
        };
        for (i, s) in samples.iter().enumerate() {
            match s.split {
                Some(SplitTag::Train) => spec.train.push(i),
                Some(SplitTag::Val) => spec.val.push(i),
                Some(SplitTag::Test) => spec.test.push(i),
                None => {
                    return Err(Error::Manifest(format!(
                        "row {} has no split tag while others do",
                        i + 1
                    )))
                }
            }
        }
        Ok(spec)
    }
}

fn indices_by_class(samples: &[LabeledSample]) -> [Vec<usize>; NUM_CLASSES] {
    let mut by_class: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, s) in samples.iter().enumerate() {
        by_class[s.label.index()].push(i);
    }
    by_class
}

fn shuffled_class(indices: &[usize], seed: u64, class: usize) -> Vec<usize> {
    let mut v = indices.to_vec();
    v.shuffle(&mut stream_rng(seed, class as u64));
    v
}

/// Largest-remainder apportionment of `n` items to `ratios`; ties go to the earlier slot.
fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    // guard against 99.99999 style float noise before flooring
    let mut counts: Vec<usize> = exact.iter().map(|e| (e + 1e-9).floor() as usize).collect();
    let mut left = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - counts[a] as f64;
        let fb = exact[b] - counts[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Stratified train/val/test partition with one seeded shuffle per class.
pub fn stratified_split(
    samples: &[LabeledSample],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<SplitSpec> {
    let r = [ratios.0, ratios.1, ratios.2];
    let clamped = r.map(|x| x.max(0.0));
    if r.iter().any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be in [0,1] and sum to 1, got {ratios:?}"
        )));
    }
    let by_class = indices_by_class(samples);
    let mut spec = SplitSpec {
        train: vec![],
        val: vec![],
        test: vec![],
        seed,
    };
    for (c, idx) in by_class.iter().enumerate() {
        if idx.is_empty() {
            return Err(Error::ClassMissing(ClassLabel::ALL[c].name().into()));
        }
        let shuffled = shuffled_class(idx, seed, c);
        let counts = apportion(shuffled.len(), &clamped);
        let (tr, rest) = shuffled.split_at(counts[0]);
        let (va, te) = rest.split_at(counts[1]);
        spec.train.extend_from_slice(tr);
        spec.val.extend_from_slice(va);
        spec.test.extend_from_slice(te);
    }
    spec.train.sort_unstable();
    spec.val.sort_unstable();
    spec.test.sort_unstable();
    Ok(spec)
}

/// One cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Stratified k-fold over class labels given directly.
pub fn stratified_kfold_labels(labels: &[ClassLabel], k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    let mut by_class: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    let mut assign = vec![0usize; labels.len()];
    // round-robin continues across classes so total fold sizes also stay balanced
    let mut next = 0usize;
    for (c, idx) in by_class.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(Error::ClassMissing(format!(
                "class {} has {} samples, fewer than k={k}",
                ClassLabel::ALL[c],
                idx.len()
            )));
        }
        for i in shuffled_class(idx, seed, c) {
            assign[i] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| Fold {
            train: (0..labels.len()).filter(|&i| assign[i] != f).collect(),
            val: (0..labels.len()).filter(|&i| assign[i] == f).collect(),
        })
        .collect())
}

pub fn stratified_kfold(samples: &[LabeledSample], k: usize, seed: u64) -> Result<Vec<Fold>> {
    let labels: Vec<ClassLabel> = samples.iter().map(|s| s.label).collect();
    stratified_kfold_labels(&labels, k, seed)
}
