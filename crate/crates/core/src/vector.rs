//! Shared numeric and domain types: parameter vectors, client updates,
//! and the deterministic vector operations every aggregator builds on.
//!
//! All arithmetic is 64-bit and summation order is fixed (index order for
//! coordinates, client-id order across clients) so repeated runs are
//! bit-identical.

use crate::error::{Error, Result};

/// A flattened model parameter vector.
///
/// Entries are always finite; the vector is never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    /// Validates and wraps a raw vector.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Squared Euclidean norm, summed in index order.
    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.squared_norm().sqrt()
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// One client's submission for a round.
#[derive(Debug, Clone)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub params: ParamVector,
    /// Size of the client's local dataset; weights federated averaging.
    pub sample_count: usize,
}

impl ClientUpdate {
    pub fn new(client_id: usize, params: ParamVector, sample_count: usize) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::InvalidParameter {
                name: "sample_count",
                reason: "must be positive".into(),
            });
        }
        Ok(Self {
            client_id,
            params,
            sample_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }
}

/// Checks that updates are non-empty, carry contiguous client ids 0..K-1
/// in order, and share one dimension.
pub fn validate_updates(updates: &[ClientUpdate]) -> Result<()> {
    if updates.is_empty() {
        return Err(Error::NoUpdates);
    }
    let dim = updates[0].dim();
    for (position, update) in updates.iter().enumerate() {
        if update.client_id != position {
            return Err(Error::BadClientIds {
                expected: updates.len(),
                found: update.client_id,
                position,
            });
        }
        if update.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: update.dim(),
            });
        }
    }
    Ok(())
}

/// Squared Euclidean distance between two vectors of equal dimension,
/// accumulated in index order.
pub fn squared_distance(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let mut sum = 0.0;
    for (x, y) in a.values().iter().zip(b.values()) {
        let d = x - y;
        sum += d * d;
    }
    Ok(sum)
}

/// Weighted centroid of client updates: sum_k w_k x_k / sum_k w_k.
///
/// Accumulation runs over clients in client-id order; zero-weight terms
/// are skipped so that weight 0 times a huge coordinate contributes
/// nothing instead of poisoning the sum.
pub fn weighted_centroid(updates: &[ClientUpdate], weights: &[f64]) -> Result<ParamVector> {
    validate_updates(updates)?;
    if weights.len() != updates.len() {
        return Err(Error::WeightCountMismatch {
            weights: weights.len(),
            updates: updates.len(),
        });
    }
    if let Some(index) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidParameter {
            name: "weights",
            reason: format!("weight at {index} is negative or non-finite"),
        });
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }

    let dim = updates[0].dim();
    let mut acc = vec![0.0; dim];
    for (update, &w) in updates.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (slot, &v) in acc.iter_mut().zip(update.params.values()) {
            *slot += w * v;
        }
    }
    for slot in &mut acc {
        *slot /= total;
    }
    ParamVector::new(acc)
}

/// Unweighted mean of client updates.
pub fn unweighted_mean(updates: &[ClientUpdate]) -> Result<ParamVector> {
    let weights = vec![1.0; updates.len()];
    weighted_centroid(updates, &weights)
}

/// Builds updates from raw vectors with ids 0..K-1 and unit sample counts.
/// Test and oracle plumbing.
pub fn updates_from_vectors(vectors: &[Vec<f64>]) -> Result<Vec<ClientUpdate>> {
    vectors
        .iter()
        .enumerate()
        .map(|(id, v)| ClientUpdate::new(id, ParamVector::new(v.clone())?, 1))
        .collect()
}
