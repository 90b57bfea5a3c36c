//! Classical aggregation rules used as comparison points: federated
//! averaging, coordinate-wise median, trimmed mean, geometric median
//! (Weiszfeld), and Multi-Krum.
//!
//! The robust rules treat clients symmetrically and ignore sample
//! counts, as in their source formulations; only federated averaging
//! weights by local dataset size. Ties always break toward the lowest
//! client id so output is order-independent and deterministic.

use crate::error::{Error, Result};
use crate::vector::{
    squared_distance, unweighted_mean, validate_updates, weighted_centroid, ClientUpdate,
    ParamVector,
};

/// Which baseline rule to run, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    FedAvg,
    Median,
    TrimmedMean,
    GeometricMedian,
    MultiKrum,
}

#[derive(Debug, Clone)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    /// Fraction trimmed per extreme (trimmed mean only).
    pub beta: Option<f64>,
    /// Number of retained updates (Multi-Krum only).
    pub krum_l: Option<usize>,
    pub geomed_tolerance: f64,
    pub geomed_max_iters: usize,
}

impl BaselineSpec {
    fn base(kind: BaselineKind) -> Self {
        Self {
            kind,
            beta: None,
            krum_l: None,
            geomed_tolerance: 1e-10,
            geomed_max_iters: 1000,
        }
    }

    pub fn fedavg() -> Self {
        Self::base(BaselineKind::FedAvg)
    }

    pub fn median() -> Self {
        Self::base(BaselineKind::Median)
    }

    pub fn trimmed_mean(beta: f64) -> Self {
        Self {
            beta: Some(beta),
            ..Self::base(BaselineKind::TrimmedMean)
        }
    }

    pub fn geometric_median() -> Self {
        Self::base(BaselineKind::GeometricMedian)
    }

    pub fn multi_krum(l: usize) -> Self {
        Self {
            krum_l: Some(l),
            ..Self::base(BaselineKind::MultiKrum)
        }
    }

    pub fn aggregate(&self, updates: &[ClientUpdate]) -> Result<ParamVector> {
        match self.kind {
            BaselineKind::FedAvg => aggregate_fedavg(updates),
            BaselineKind::Median => aggregate_median(updates),
            BaselineKind::TrimmedMean => {
                let beta = self.beta.ok_or(Error::InvalidParameter {
                    name: "beta",
                    reason: "beta required for the trimmed mean".into(),
                })?;
                aggregate_trimmed_mean(updates, beta)
            }
            BaselineKind::GeometricMedian => {
                aggregate_geometric_median(updates, self.geomed_tolerance, self.geomed_max_iters)
                    .map(|g| g.point)
            }
            BaselineKind::MultiKrum => {
                let l = self.krum_l.ok_or(Error::InvalidParameter {
                    name: "krum_l",
                    reason: "krum_l required for Multi-Krum".into(),
                })?;
                aggregate_multi_krum(updates, l)
            }
        }
    }
}

/// Sample-count-weighted mean.
pub fn aggregate_fedavg(updates: &[ClientUpdate]) -> Result<ParamVector> {
    let weights: Vec<f64> = updates.iter().map(|u| u.sample_count as f64).collect();
    weighted_centroid(updates, &weights)
}

/// Coordinate-wise median; even counts average the two middle order
/// statistics.
pub fn aggregate_median(updates: &[ClientUpdate]) -> Result<ParamVector> {
    validate_updates(updates)?;
    let k = updates.len();
    let dim = updates[0].dim();
    let mut out = vec![0.0; dim];
    let mut column = vec![0.0; k];
    for (coord, slot) in out.iter_mut().enumerate() {
        for (row, update) in updates.iter().enumerate() {
            column[row] = update.params.values()[coord];
        }
        column.sort_by(|a, b| a.total_cmp(b));
        *slot = if k % 2 == 1 {
            column[k / 2]
        } else {
            (column[k / 2 - 1] + column[k / 2]) / 2.0
        };
    }
    ParamVector::new(out)
}

/// Coordinate-wise trimmed mean: drop `floor(beta * K)` values from each
/// extreme, then average the rest.
pub fn aggregate_trimmed_mean(updates: &[ClientUpdate], beta: f64) -> Result<ParamVector> {
    validate_updates(updates)?;
    if !(0.0..0.5).contains(&beta) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("must lie in [0, 0.5), got {beta}"),
        });
    }
    let k = updates.len();
    let trim = (beta * k as f64).floor() as usize;
    if k <= 2 * trim {
        return Err(Error::OverTrimming { beta, clients: k });
    }
    let kept = k - 2 * trim;
    let dim = updates[0].dim();
    let mut out = vec![0.0; dim];
    let mut column = vec![0.0; k];
    for (coord, slot) in out.iter_mut().enumerate() {
        for (row, update) in updates.iter().enumerate() {
            column[row] = update.params.values()[coord];
        }
        column.sort_by(|a, b| a.total_cmp(b));
        *slot = column[trim..k - trim].iter().sum::<f64>() / kept as f64;
    }
    ParamVector::new(out)
}

/// Geometric median output with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct GeoMedian {
    pub point: ParamVector,
    pub converged: bool,
    pub iterations: usize,
}

const WEISZFELD_EPS: f64 = 1e-12;

// Iterates can anchor onto a data point; below this relative distance a
// point's direction is floating-point noise and it is treated as
// coincident.
const WEISZFELD_NEAR: f64 = 1e-9;

fn weiszfeld_residual(updates: &[ClientUpdate], z: &[f64]) -> (f64, f64) {
    // Returns (objective, minimal subgradient norm). Away from the data
    // the objective is smooth; at a data point the subdifferential
    // contains a unit ball per coincident point, so the minimal-norm
    // element is max(0, ||pull of the others|| - coincident count).
    let dim = z.len();
    let scale = 1.0 + z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let near = WEISZFELD_NEAR * scale;
    let mut objective = 0.0;
    let mut grad = vec![0.0; dim];
    let mut coincident = 0usize;
    for update in updates {
        let values = update.params.values();
        let mut d2 = 0.0;
        for (zi, vi) in z.iter().zip(values) {
            let diff = zi - vi;
            d2 += diff * diff;
        }
        let dist = d2.sqrt();
        objective += dist;
        if dist <= near {
            coincident += 1;
            continue;
        }
        for (g, (zi, vi)) in grad.iter_mut().zip(z.iter().zip(values)) {
            *g += (zi - vi) / dist;
        }
    }
    let far_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let grad_norm = (far_norm - coincident as f64).max(0.0);
    (objective, grad_norm)
}

/// Weiszfeld iteration for the minimizer of the summed Euclidean
/// distances. Returns the best iterate seen; `converged` reports whether
/// the subgradient norm dropped below the tolerance.
pub fn aggregate_geometric_median(
    updates: &[ClientUpdate],
    tolerance: f64,
    max_iters: usize,
) -> Result<GeoMedian> {
    validate_updates(updates)?;
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter {
            name: "geomed_tolerance",
            reason: "must be positive".into(),
        });
    }
    let dim = updates[0].dim();
    let mut z = unweighted_mean(updates)?.into_values();
    let mut best = z.clone();
    let mut best_objective = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iters {
        let (objective, grad_norm) = weiszfeld_residual(updates, &z);
        if objective < best_objective {
            best_objective = objective;
            best.copy_from_slice(&z);
        }
        if grad_norm <= tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut numerator = vec![0.0; dim];
        let mut denominator = 0.0;
        for update in updates {
            let values = update.params.values();
            let mut d2 = 0.0;
            for (zi, vi) in z.iter().zip(values) {
                let diff = zi - vi;
                d2 += diff * diff;
            }
            let w = 1.0 / (d2.sqrt() + WEISZFELD_EPS);
            denominator += w;
            for (slot, vi) in numerator.iter_mut().zip(values) {
                *slot += w * vi;
            }
        }
        for (zi, num) in z.iter_mut().zip(&numerator) {
            *zi = num / denominator;
        }
    }

    if converged {
        best = z;
    }
    Ok(GeoMedian {
        point: ParamVector::new(best)?,
        converged,
        iterations,
    })
}

/// Krum scores and the retained client ids for Multi-Krum.
///
/// With `f = K - L` suspected outliers, client `i` scores the sum of its
/// `K - f - 2` smallest squared distances to the other clients; the `L`
/// lowest-scoring clients are retained.
pub fn multi_krum_selection(
    updates: &[ClientUpdate],
    l: usize,
) -> Result<(Vec<f64>, Vec<usize>)> {
    validate_updates(updates)?;
    let k = updates.len();
    if l < 2 || l > k {
        return Err(Error::InvalidParameter {
            name: "krum_l",
            reason: format!("need 2 <= L <= K, got L={l} with K={k}"),
        });
    }
    let f = k - l;
    // Each client needs K - f - 2 >= 1 scored neighbors.
    if k < f + 3 {
        return Err(Error::KrumTooSmall {
            clients: k,
            excluded: f,
        });
    }
    let neighbors = k - f - 2;

    let mut scores = vec![0.0; k];
    let mut dists = Vec::with_capacity(k - 1);
    for i in 0..k {
        dists.clear();
        for (j, other) in updates.iter().enumerate() {
            if j != i {
                dists.push(squared_distance(&updates[i].params, &other.params)?);
            }
        }
        dists.sort_by(|a, b| a.total_cmp(b));
        scores[i] = dists[..neighbors].iter().sum();
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut selected: Vec<usize> = order[..l].to_vec();
    selected.sort_unstable();
    Ok((scores, selected))
}

/// Multi-Krum: unweighted mean of the `L` retained updates.
pub fn aggregate_multi_krum(updates: &[ClientUpdate], l: usize) -> Result<ParamVector> {
    let (_, selected) = multi_krum_selection(updates, l)?;
    let mut weights = vec![0.0; updates.len()];
    for id in selected {
        weights[id] = 1.0;
    }
    weighted_centroid(updates, &weights)
}
