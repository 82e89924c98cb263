// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic scalar and vector primitives.
//!
//! Every reduction in the engine goes through [`Kahan`] in a fixed
//! left-to-right order, so results are reproducible bit-for-bit between runs.
//! Pooling additionally sorts each component's summands before accumulating,
//! which makes it invariant to the order of its inputs.

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, RudderError};

/// Engine-wide threshold below which a vector is treated as having no direction.
pub const EPSILON: f64 = 1e-12;

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum
    }
}

/// Left-to-right compensated sum.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = Kahan::new();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

/// Order-independent sum: summands are sorted by value, then Kahan-accumulated.
pub fn canonical_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    kahan_sum(values.iter().copied())
}

/// Compensated dot product. Panics in debug builds on length mismatch.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Kahan::new();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.total()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `log(1 + e^x)`, split at zero so neither branch can overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function, split at zero so neither branch can overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A non-empty vector of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(RudderError::EmptyVector);
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(RudderError::NonFinite { index, value });
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "RealVector dimension must be positive");
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|v| v * factor).collect())
    }
}

impl Deref for RealVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = RudderError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<RealVector> for Vec<f64> {
    fn from(v: RealVector) -> Self {
        v.0
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(RudderError::DimMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Cosine similarity clipped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    cosine_similarity_eps(a, b, EPSILON)
}

pub fn cosine_similarity_eps(a: &[f64], b: &[f64], epsilon: f64) -> Result<f64> {
    check_dims(a, b)?;
    let na = norm(a);
    let nb = norm(b);
    for n in [na, nb] {
        if !(n >= epsilon) {
            return Err(RudderError::ZeroNormInput { norm: n, epsilon });
        }
    }
    // sqrt(|a|^2 |b|^2) is exact for a == b; fall back to the product of
    // norms when the squared product leaves the normal range.
    let sq = dot(a, a) * dot(b, b);
    let denom = if sq.is_normal() { sq.sqrt() } else { na * nb };
    Ok((dot(a, b) / denom).clamp(-1.0, 1.0))
}

pub fn l2_normalize(v: &[f64]) -> Result<RealVector> {
    l2_normalize_eps(v, EPSILON)
}

pub fn l2_normalize_eps(v: &[f64], epsilon: f64) -> Result<RealVector> {
    let n = norm(v);
    if !(n >= epsilon) {
        return Err(RudderError::ZeroNormInput { norm: n, epsilon });
    }
    RealVector::new(v.iter().map(|x| x / n).collect())
}

/// How a set of residual updates is reduced to a single vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    #[default]
    Mean,
    /// Each member weighted by its own L2 norm.
    NormWeightedMean,
}

/// Pool equal-length vectors. The result does not depend on input order.
pub fn pool<V: AsRef<[f64]>>(vectors: &[V], mode: PoolMode) -> Result<RealVector> {
    let first = vectors.first().ok_or(RudderError::EmptyPool)?.as_ref();
    let dim = first.len();
    if dim == 0 {
        return Err(RudderError::EmptyVector);
    }
    for v in vectors {
        check_dims(first, v.as_ref())?;
    }

    let weights: Vec<f64> = match mode {
        PoolMode::Mean => vec![1.0; vectors.len()],
        PoolMode::NormWeightedMean => vectors.iter().map(|v| norm(v.as_ref())).collect(),
    };
    let total_weight = canonical_sum(&mut weights.clone());
    if !(total_weight >= EPSILON) {
        return Err(RudderError::ZeroNormInput {
            norm: total_weight,
            epsilon: EPSILON,
        });
    }

    let mut column = Vec::with_capacity(vectors.len());
    let mut out = Vec::with_capacity(dim);
    for d in 0..dim {
        column.clear();
        column.extend(vectors.iter().zip(&weights).map(|(v, w)| w * v.as_ref()[d]));
        out.push(canonical_sum(&mut column) / total_weight);
    }
    RealVector::new(out)
}

/// Independent 64-bit seed for item `index` of a named stream.
pub fn derive_seed(base: u64, stream: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(stream.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
