//! LBG codebook training and squared-Euclidean codebook matching.
//!
//! Training starts from the global centroid and doubles the codebook by
//! splitting every codeword `c` into `c(1 + ε)` and `c(1 - ε)` (an all-zero
//! codeword splits into `±ε`), refining each size with Lloyd iterations
//! until the relative drop in mean distortion falls below the tolerance.
//! Nothing is randomized, so training is reproducible bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mel_features::FeatureMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbgParams {
    pub epsilon_split: f64,
    pub distortion_rel_tol: f64,
    pub max_iters: usize,
}

impl Default for LbgParams {
    fn default() -> Self {
        Self {
            epsilon_split: 0.01,
            distortion_rel_tol: 1e-4,
            max_iters: 100,
        }
    }
}

impl LbgParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_split.is_finite() && self.epsilon_split > 0.0 && self.epsilon_split < 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "split perturbation {} must lie in (0, 1)",
                self.epsilon_split
            )));
        }
        if !(self.distortion_rel_tol.is_finite() && self.distortion_rel_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "distortion tolerance {} must be non-negative",
                self.distortion_rel_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T> {
    codewords: Vec<Vec<T>>,
    dim: usize,
    pub label: String,
    pub train_distortion: T,
    pub params: LbgParams,
    pub config_digest: Option<String>,
}

impl<T: Scalar> Codebook<T> {
    /// Wraps existing codewords; the count must be a power of two.
    pub fn from_codewords(codewords: Vec<Vec<T>>, label: impl Into<String>) -> Result<Self> {
        let dim = codewords.first().map(Vec::len).unwrap_or(0);
        validate_codewords(&codewords, dim)?;
        Ok(Self {
            codewords,
            dim,
            label: label.into(),
            train_distortion: T::zero(),
            params: LbgParams::default(),
            config_digest: None,
        })
    }

    pub fn codewords(&self) -> &[Vec<T>] {
        &self.codewords
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self) -> usize {
        self.codewords.len()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.config_digest = Some(digest.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CodebookFile {
            label: self.label.clone(),
            dim: self.dim,
            codebook_size: self.size(),
            params: self.params,
            train_distortion: self.train_distortion.as_f64(),
            config_digest: self.config_digest.clone(),
            codewords: self
                .codewords
                .iter()
                .map(|c| c.iter().map(|v| v.as_f64()).collect())
                .collect(),
        };
        let mut text =
            serde_json::to_string_pretty(&file).map_err(|e| Error::Serialization(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CodebookFile =
            serde_json::from_str(text).map_err(|e| Error::MalformedCodebook(e.to_string()))?;
        if file.codewords.len() != file.codebook_size {
            return Err(Error::MalformedCodebook(format!(
                "codebook_size {} but {} codewords",
                file.codebook_size,
                file.codewords.len()
            )));
        }
        let codewords: Vec<Vec<T>> = file
            .codewords
            .iter()
            .map(|c| c.iter().map(|&v| T::lit(v)).collect())
            .collect();
        validate_codewords(&codewords, file.dim)?;
        file.params
            .validate()
            .map_err(|e| Error::MalformedCodebook(e.to_string()))?;
        Ok(Self {
            codewords,
            dim: file.dim,
            label: file.label,
            train_distortion: T::lit(file.train_distortion),
            params: file.params,
            config_digest: file.config_digest,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::audio_io::write_text(path.as_ref(), &self.to_json()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

fn validate_codewords<T: Scalar>(codewords: &[Vec<T>], dim: usize) -> Result<()> {
    if codewords.is_empty() || !codewords.len().is_power_of_two() {
        return Err(Error::MalformedCodebook(format!(
            "codebook size {} is not a power of two",
            codewords.len()
        )));
    }
    if dim == 0 {
        return Err(Error::MalformedCodebook(
            "codeword dimension is zero".into(),
        ));
    }
    for (i, c) in codewords.iter().enumerate() {
        if c.len() != dim {
            return Err(Error::MalformedCodebook(format!(
                "codeword {i} has dimension {}, expected {dim}",
                c.len()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedCodebook(format!(
                "codeword {i} is not finite"
            )));
        }
    }
    Ok(())
}

/// On-disk layout of a codebook.
#[derive(Debug, Serialize, Deserialize)]
struct CodebookFile {
    label: String,
    dim: usize,
    codebook_size: usize,
    params: LbgParams,
    train_distortion: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_digest: Option<String>,
    codewords: Vec<Vec<f64>>,
}

/// `Σ (a_i - b_i)²`.
pub fn squared_euclidean<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(sq_dist(a, b))
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Nearest codeword by squared distance; ties go to the lowest index.
fn nearest<T: Scalar>(v: &[T], codewords: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, sq_dist(v, &codewords[0]));
    for (i, c) in codewords.iter().enumerate().skip(1) {
        let d = sq_dist(v, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// `(index, squared distance)` of the codeword nearest to `v`.
pub fn quantize<T: Scalar>(v: &[T], cb: &Codebook<T>) -> Result<(usize, T)> {
    if v.len() != cb.dim() {
        return Err(Error::DimensionMismatch {
            expected: cb.dim(),
            found: v.len(),
        });
    }
    Ok(nearest(v, cb.codewords()))
}

/// Mean nearest-codeword distortion over the frames; lower is a better match.
pub fn score<T: Scalar>(features: &FeatureMatrix<T>, cb: &Codebook<T>) -> Result<T> {
    score_vectors(&features.vectors, cb)
}

pub fn score_vectors<T: Scalar>(vectors: &[Vec<T>], cb: &Codebook<T>) -> Result<T> {
    if vectors.is_empty() {
        return Err(Error::EmptyFeatures);
    }
    let mut total = T::zero();
    for v in vectors {
        total += quantize(v, cb)?.1;
    }
    Ok(total / T::from_usize_lossy(vectors.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recognition<T> {
    pub label: String,
    /// `(label, score)` in model order.
    pub scores: Vec<(String, T)>,
}

impl<T: Scalar> Recognition<T> {
    /// Scores sorted best first; equal scores keep model order.
    pub fn ranked(&self) -> Vec<(String, T)> {
        let mut r = self.scores.clone();
        r.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite scores"));
        r
    }
}

/// Label of the lowest-scoring codebook; ties go to the earlier model.
pub fn recognize<T: Scalar>(
    features: &FeatureMatrix<T>,
    books: &[Codebook<T>],
) -> Result<Recognition<T>> {
    if books.is_empty() {
        return Err(Error::NoModels);
    }
    let scores = books
        .iter()
        .map(|b| {
            Ok((
                b.label.clone(),
                score(features, b).map_err(|e| e.context(format!("model {:?}", b.label)))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if s.1 < scores[best].1 {
            best = i;
        }
    }
    Ok(Recognition {
        label: scores[best].0.clone(),
        scores,
    })
}

/// Distortions of one codebook size: the first entry follows the split, one more per Lloyd pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace<T> {
    pub size: usize,
    pub distortions: Vec<T>,
}

impl<T: Scalar> StageTrace<T> {
    pub fn final_distortion(&self) -> T {
        *self
            .distortions
            .last()
            .expect("every stage records a distortion")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbgOutcome<T> {
    pub codebook: Codebook<T>,
    pub stages: Vec<StageTrace<T>>,
}

fn split<T: Scalar>(codewords: &[Vec<T>], eps: T) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(codewords.len() * 2);
    for c in codewords {
        if c.iter().all(|v| v.is_zero()) {
            out.push(c.iter().map(|_| eps).collect());
            out.push(c.iter().map(|_| -eps).collect());
        } else {
            out.push(c.iter().map(|&v| v * (T::one() + eps)).collect());
            out.push(c.iter().map(|&v| v * (T::one() - eps)).collect());
        }
    }
    out
}

/// Nearest-codeword assignment and its mean distortion.
fn assign<T: Scalar>(vectors: &[Vec<T>], codewords: &[Vec<T>], labels: &mut [usize]) -> T {
    let mut total = T::zero();
    for (v, slot) in vectors.iter().zip(labels.iter_mut()) {
        let (i, d) = nearest(v, codewords);
        *slot = i;
        total += d;
    }
    total / T::from_usize_lossy(vectors.len())
}

/// Moves each codeword to the centroid of its cell. An empty cell's codeword is
/// re-seeded to the training vector farthest from its nearest (already placed) codeword.
fn update_centroids<T: Scalar>(vectors: &[Vec<T>], codewords: &mut [Vec<T>], labels: &[usize]) {
    let dim = codewords[0].len();
    let k = codewords.len();
    let mut sums = vec![vec![T::zero(); dim]; k];
    let mut counts = vec![0usize; k];
    for (v, &l) in vectors.iter().zip(labels) {
        counts[l] += 1;
        for (s, &x) in sums[l].iter_mut().zip(v) {
            *s += x;
        }
    }
    for ((c, s), &n) in codewords.iter_mut().zip(&sums).zip(&counts) {
        if n > 0 {
            let inv = T::from_usize_lossy(n);
            for (ci, &si) in c.iter_mut().zip(s) {
                *ci = si / inv;
            }
        }
    }
    let mut placed: Vec<bool> = counts.iter().map(|&n| n > 0).collect();
    for j in 0..k {
        if placed[j] {
            continue;
        }
        let mut far: Option<(usize, T)> = None;
        for (vi, v) in vectors.iter().enumerate() {
            let d = codewords
                .iter()
                .zip(&placed)
                .filter(|(_, &p)| p)
                .map(|(c, _)| sq_dist(v, c))
                .fold(T::infinity(), T::min);
            if far.is_none_or(|(_, best)| d > best) {
                far = Some((vi, d));
            }
        }
        let (vi, _) = far.expect("training set is non-empty");
        codewords[j] = vectors[vi].clone();
        placed[j] = true;
    }
}

/// Runs LBG up to `target_size` codewords, recording every stage's distortions.
pub fn lbg_train_traced<T: Scalar>(
    vectors: &[Vec<T>],
    target_size: usize,
    params: &LbgParams,
) -> Result<LbgOutcome<T>> {
    params.validate()?;
    if target_size == 0 || !target_size.is_power_of_two() {
        return Err(Error::InvalidConfig(format!(
            "codebook size {target_size} must be a power of two"
        )));
    }
    let first = vectors.first().ok_or(Error::EmptyTrainingSet)?;
    let dim = first.len();
    if dim == 0 {
        return Err(Error::InvalidConfig(
            "training vectors have dimension zero".into(),
        ));
    }
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSignal("training vector is not finite".into()));
        }
    }

    let n = T::from_usize_lossy(vectors.len());
    let mut centroid = vec![T::zero(); dim];
    for v in vectors {
        for (c, &x) in centroid.iter_mut().zip(v) {
            *c += x;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n);
    let mut codewords = vec![centroid];
    let mut labels = vec![0usize; vectors.len()];
    let mut stages = vec![StageTrace {
        size: 1,
        distortions: vec![assign(vectors, &codewords, &mut labels)],
    }];

    let eps = T::lit(params.epsilon_split);
    let tol = T::lit(params.distortion_rel_tol);
    while codewords.len() < target_size {
        codewords = split(&codewords, eps);
        let mut d = assign(vectors, &codewords, &mut labels);
        let mut distortions = vec![d];
        for _ in 0..params.max_iters {
            update_centroids(vectors, &mut codewords, &labels);
            let next = assign(vectors, &codewords, &mut labels);
            distortions.push(next);
            let converged = d.is_zero() || (d - next) / d < tol;
            d = next;
            if converged {
                break;
            }
        }
        stages.push(StageTrace {
            size: codewords.len(),
            distortions,
        });
    }

    let train_distortion = stages
        .last()
        .expect("at least one stage")
        .final_distortion();
    Ok(LbgOutcome {
        codebook: Codebook {
            codewords,
            dim,
            label: String::new(),
            train_distortion,
            params: *params,
            config_digest: None,
        },
        stages,
    })
}

pub fn lbg_train<T: Scalar>(
    vectors: &[Vec<T>],
    target_size: usize,
    params: &LbgParams,
) -> Result<Codebook<T>> {
    lbg_train_traced(vectors, target_size, params).map(|o| o.codebook)
}
