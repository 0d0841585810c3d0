//! Soft-margin kernel SVM trained with sequential minimal optimization,
//! extended to three classes by one-vs-rest.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::Classifier;
use crate::dataset::{ClassLabel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Solver settings for one binary problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelSpec,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Consecutive passes without any multiplier change before stopping.
    pub max_passes: usize,
    /// Hard cap on full sweeps over the data.
    pub max_sweeps: usize,
    pub seed: u64,
}

impl SvmParams {
    pub fn new(c: f64, kernel: KernelSpec) -> Self {
        Self {
            c,
            kernel,
            tol: 1e-3,
            max_passes: 10,
            max_sweeps: 20_000,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidArgument(format!("C must be > 0, got {}", self.c)));
        }
        self.kernel.validate()
    }
}

/// Full dual solution over the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub sweeps: usize,
}

const ALPHA_EPS: f64 = 1e-12;

struct Smo<'a> {
    k: Vec<f64>,
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    b: f64,
    // E_i = f(x_i) - y_i
    err: Vec<f64>,
}

impl Smo<'_> {
    fn kk(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.y.len() + j]
    }

    fn snap(&self, a: f64) -> f64 {
        if a < ALPHA_EPS {
            0.0
        } else if a > self.c - ALPHA_EPS * self.c {
            self.c
        } else {
            a
        }
    }

    /// Jointly optimizes `α_i, α_j`; false when the pair cannot move.
    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (y, c) = (self.y, self.c);
        let (ei, ej) = (self.err[i], self.err[j]);
        let (ai_old, aj_old) = (self.alpha[i], self.alpha[j]);
        let (lo, hi) = if y[i] != y[j] {
            ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
        } else {
            ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
        };
        if hi - lo < ALPHA_EPS {
            return false;
        }
        let eta = 2.0 * self.kk(i, j) - self.kk(i, i) - self.kk(j, j);
        if eta >= 0.0 {
            return false;
        }
        let aj = self.snap((aj_old - y[j] * (ei - ej) / eta).clamp(lo, hi));
        if (aj - aj_old).abs() < 1e-12 * (aj + aj_old + 1e-12) {
            return false;
        }
        let ai = self.snap(ai_old + y[i] * y[j] * (aj_old - aj));
        let (di, dj) = ((ai - ai_old) * y[i], (aj - aj_old) * y[j]);
        let b1 = self.b - ei - di * self.kk(i, i) - dj * self.kk(i, j);
        let b2 = self.b - ej - di * self.kk(i, j) - dj * self.kk(j, j);
        let b_new = if ai > 0.0 && ai < c {
            b1
        } else if aj > 0.0 && aj < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = b_new - self.b;
        let n = y.len();
        let (ki, kj) = (&self.k[i * n..(i + 1) * n], &self.k[j * n..(j + 1) * n]);
        for ((e, a), b) in self.err.iter_mut().zip(ki).zip(kj) {
            *e += di * a + dj * b + db;
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        self.b = b_new;
        true
    }
}

/// Solves the soft-margin dual with pairwise updates. Each KKT violator is
/// paired first with the index maximizing `|E_i − E_j|`, then with every other
/// index starting from a seeded random offset; the bias is finally averaged
/// over unbounded support vectors.
pub fn smo_solve(x: &[Vec<f64>], y: &[f64], params: &SvmParams) -> Result<SmoSolution> {
    params.validate()?;
    let n = x.len();
    if n != y.len() {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidArgument("binary labels must be ±1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::SingleClass("both +1 and -1 labels are required".into()));
    }
    if let Some(d) = x.first().map(Vec::len) {
        if let Some(bad) = x.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
    }
    let c = params.c;
    let tol = params.tol;
    let mut rng = stream_rng(params.seed, 0x5310);
    let mut s = Smo {
        k: params.kernel.gram(x),
        y,
        c,
        alpha: vec![0.0; n],
        b: 0.0,
        err: y.iter().map(|&yi| -yi).collect(),
    };

    let mut passes = 0;
    let mut sweeps = 0;
    while passes < params.max_passes && sweeps < params.max_sweeps {
        sweeps += 1;
        let mut changed = 0;
        for i in 0..n {
            let r = y[i] * s.err[i];
            if !((r < -tol && s.alpha[i] < c) || (r > tol && s.alpha[i] > 0.0)) {
                continue;
            }
            let ei = s.err[i];
            let best = (0..n)
                .filter(|&j| j != i)
                .max_by(|&a, &b| (ei - s.err[a]).abs().total_cmp(&(ei - s.err[b]).abs()))
                .expect("n >= 2");
            if s.take_step(i, best) {
                changed += 1;
                continue;
            }
            let start = rng.gen_range(0..n);
            if (0..n).map(|o| (start + o) % n).any(|j| j != best && s.take_step(i, j)) {
                changed += 1;
            }
        }
        passes = if changed == 0 { passes + 1 } else { 0 };
    }

    let Smo { alpha, mut b, k, .. } = s;
    let free: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0 && alpha[i] < c).collect();
    let decision_no_bias = |i: usize| -> f64 { (0..n).map(|t| alpha[t] * y[t] * k[t * n + i]).sum::<f64>() };
    if !free.is_empty() {
        b = free.iter().map(|&i| y[i] - decision_no_bias(i)).sum::<f64>() / free.len() as f64;
    }
    Ok(SmoSolution { alpha, bias: b, sweeps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i · y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c: f64,
}

impl BinarySvmModel {
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if let Some(sv) = self.support_vectors.first() {
            if sv.len() != x.len() {
                return Err(Error::DimensionMismatch { expected: sv.len(), got: x.len() });
            }
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, &a)| a * self.kernel.eval_unchecked(sv, x))
            .sum::<f64>()
            + self.bias)
    }
}

/// Trains one binary soft-margin SVM on ±1 labels.
pub fn svm_train_binary(x: &[Vec<f64>], y: &[f64], params: &SvmParams) -> Result<BinarySvmModel> {
    let sol = smo_solve(x, y, params)?;
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(x[i].clone());
            dual_coef.push(a * y[i]);
        }
    }
    Ok(BinarySvmModel {
        support_vectors,
        dual_coef,
        bias: sol.bias,
        kernel: params.kernel,
        c: params.c,
    })
}

/// One-vs-rest wrapper. Starts unfitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmOvrModel {
    pub params: SvmParams,
    pub models: Option<Vec<BinarySvmModel>>,
}

impl SvmOvrModel {
    pub fn new(params: SvmParams) -> Self {
        Self { params, models: None }
    }

    pub fn fit(&mut self, x: &[Vec<f64>], labels: &[ClassLabel]) -> Result<()> {
        let mut models = Vec::with_capacity(NUM_CLASSES);
        for class in ClassLabel::ALL {
            let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            let params = SvmParams {
                seed: self.params.seed ^ class.index() as u64,
                ..self.params
            };
            models.push(
                svm_train_binary(x, &y, &params)
                    .map_err(|e| Error::SingleClass(format!("{class}-vs-rest: {e}")))?,
            );
        }
        self.models = Some(models);
        Ok(())
    }

    pub fn fitted(params: SvmParams, x: &[Vec<f64>], labels: &[ClassLabel]) -> Result<Self> {
        let mut m = Self::new(params);
        m.fit(x, labels)?;
        Ok(m)
    }

    /// Raw per-class decision values.
    pub fn decision(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        let models = self.models.as_ref().ok_or(Error::NotFitted)?;
        let mut s = [0.0; NUM_CLASSES];
        for (c, m) in models.iter().enumerate() {
            s[c] = m.decision(x)?;
        }
        Ok(s)
    }
}

/// Highest score wins; ties go to the lowest class index.
pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl Classifier for SvmOvrModel {
    fn scores(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        self.decision(x)
    }

    fn predict(&self, x: &[f64]) -> Result<ClassLabel> {
        ClassLabel::from_index(argmax_lowest(&self.decision(x)?))
    }
}
