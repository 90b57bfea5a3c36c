//! Datasets, synthetic data generation, and Dirichlet partitioning.

use crate::error::{Error, Result};
use crate::rng::DetRng;

/// Dense labeled dataset with row-major features.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    samples: usize,
    dim: usize,
    classes: usize,
    /// Set when features are flattened images, so pixel-pattern triggers
    /// can be positioned.
    pub image_dims: Option<(usize, usize)>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        dim: usize,
        classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() || dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dataset",
                reason: "needs at least one sample and one feature".into(),
            });
        }
        if features.len() != labels.len() * dim {
            return Err(Error::InvalidParameter {
                name: "dataset",
                reason: format!(
                    "feature length {} != {} samples x {} dims",
                    features.len(),
                    labels.len(),
                    dim
                ),
            });
        }
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        for &label in &labels {
            if label >= classes {
                return Err(Error::LabelOutOfRange { label, classes });
            }
        }
        Ok(Self {
            samples: labels.len(),
            features,
            labels,
            dim,
            classes,
            image_dims: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn feature_row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn set_label(&mut self, i: usize, label: usize) -> Result<()> {
        if label >= self.classes {
            return Err(Error::LabelOutOfRange {
                label,
                classes: self.classes,
            });
        }
        self.labels[i] = label;
        Ok(())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// New dataset holding only the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.feature_row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            samples: indices.len(),
            dim: self.dim,
            classes: self.classes,
            image_dims: self.image_dims,
        }
    }
}

/// Gaussian blobs: class `c` is centered at `2 e_{c mod dim}` with
/// isotropic standard deviation `spread`. Linearly separable for small
/// spreads, so a logistic model reaches near-perfect accuracy.
pub fn make_synthetic_dataset(
    classes: usize,
    dim: usize,
    per_class: usize,
    spread: f64,
    rng: &mut DetRng,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::InvalidParameter {
            name: "classes",
            reason: "need at least two classes".into(),
        });
    }
    if dim == 0 || per_class == 0 || !(spread >= 0.0) || !spread.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dataset",
            reason: "dim and per_class must be positive, spread non-negative".into(),
        });
    }
    let mut features = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for class in 0..classes {
        let center_coord = class % dim;
        for _ in 0..per_class {
            for coord in 0..dim {
                let center = if coord == center_coord { 2.0 } else { 0.0 };
                features.push(center + spread * rng.normal());
            }
            labels.push(class);
        }
    }
    Dataset::new(features, labels, dim, classes)
}

/// Client count and heterogeneity for the data split.
#[derive(Debug, Clone, Copy)]
pub struct PartitionConfig {
    pub clients: usize,
    /// Dirichlet concentration; smaller means more heterogeneous clients.
    pub alpha: f64,
}

/// Splits sample indices across clients: per class, proportions are drawn
/// from a symmetric Dirichlet and samples are assigned multinomially.
/// Clients left empty by the draw receive one sample moved from the
/// currently largest client, since local training needs data.
pub fn dirichlet_partition(
    dataset: &Dataset,
    config: &PartitionConfig,
    rng: &mut DetRng,
) -> Result<Vec<Vec<usize>>> {
    let n = config.clients;
    if n == 0 || !(config.alpha > 0.0) || !config.alpha.is_finite() {
        return Err(Error::InvalidParameter {
            name: "partition",
            reason: "clients must be positive and alpha > 0".into(),
        });
    }
    if n > dataset.len() {
        return Err(Error::PartitionTooSmall {
            samples: dataset.len(),
            clients: n,
        });
    }

    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); n];
    for class in 0..dataset.classes() {
        let class_indices: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.label(i) == class)
            .collect();
        if class_indices.is_empty() {
            continue;
        }
        let proportions = rng.dirichlet(config.alpha, n);
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for p in &proportions {
            acc += p;
            cumulative.push(acc);
        }
        for index in class_indices {
            let u = rng.f64();
            let client = cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(n - 1);
            parts[client].push(index);
        }
    }

    // Repair: every client must end up with at least one sample.
    while let Some(empty) = parts.iter().position(|p| p.is_empty()) {
        let largest = parts
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .expect("clients exist");
        let moved = parts[largest].pop().expect("largest client is non-empty");
        parts[empty].push(moved);
    }

    Ok(parts)
}
