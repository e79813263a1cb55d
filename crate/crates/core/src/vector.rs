//! Dense vectors and the similarity arithmetic every other module builds on.
//!
//! All arithmetic runs in `f64`. Sums are accumulated left to right over
//! storage order so results are reproducible bit-for-bit.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fixed-dimension real vector produced by a dense retriever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Wraps `values`, rejecting NaN and infinities.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self(values))
    }

    /// Widens single-precision retriever output.
    pub fn from_f32(values: &[f32]) -> Result<Self> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
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
        dot(&self.0, &self.0).sqrt()
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.dim(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

impl Deref for Embedding {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

fn check_dims(a: &Embedding, b: &Embedding) -> Result<()> {
    b.ensure_dim(a.dim())
}

/// Dot product of two equal-length embeddings.
pub fn dot_product(a: &Embedding, b: &Embedding) -> Result<f64> {
    check_dims(a, b)?;
    Ok(dot(a, b))
}

/// `(a·b) / (‖a‖‖b‖)`.
///
/// Symmetric bit-for-bit: the product `x*y` commutes and the denominator
/// multiplies the norms in a fixed order chosen by value, not argument position.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    check_dims(a, b)?;
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNormVector);
    }
    let (lo, hi) = if na <= nb { (na, nb) } else { (nb, na) };
    let s = dot(a, b) / (lo * hi);
    Ok(s.clamp(-1.0, 1.0))
}

/// `Σ weights[i] · vectors[i]`.
pub fn weighted_sum(weights: &[f64], vectors: &[&Embedding]) -> Result<Embedding> {
    if weights.len() != vectors.len() {
        return Err(Error::LengthMismatch(weights.len(), vectors.len()));
    }
    let first = vectors.first().ok_or(Error::EmptyInput("weighted_sum"))?;
    let dim = first.dim();
    let mut out = vec![0.0; dim];
    for (w, v) in weights.iter().zip(vectors) {
        v.ensure_dim(dim)?;
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += w * x;
        }
    }
    Embedding::new(out)
}

/// Element-wise `a + scale · b`.
pub fn add_scaled(a: &Embedding, b: &Embedding, scale: f64) -> Result<Embedding> {
    check_dims(a, b)?;
    Embedding::new(a.iter().zip(b.iter()).map(|(x, y)| x + scale * y).collect())
}

/// Element-wise mean.
pub fn mean(vectors: &[&Embedding]) -> Result<Embedding> {
    let first = vectors.first().ok_or(Error::EmptyInput("mean"))?;
    let dim = first.dim();
    let mut out = vec![0.0; dim];
    for v in vectors {
        v.ensure_dim(dim)?;
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += x;
        }
    }
    let n = vectors.len() as f64;
    Embedding::new(out.into_iter().map(|x| x / n).collect())
}

/// Scales `a` to unit Euclidean length.
pub fn l2_normalize(a: &Embedding) -> Result<Embedding> {
    let n = a.norm();
    if n == 0.0 {
        return Err(Error::ZeroNormVector);
    }
    Embedding::new(a.iter().map(|x| x / n).collect())
}

/// Squared Euclidean distance.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| {
        let d = x - y;
        acc + d * d
    })
}
