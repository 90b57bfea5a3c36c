//! Ground-truth machinery: exhaustive solution of the subset-selection
//! objective and an executable robustness certificate.
//!
//! `brute_force_subset` minimizes the within-subset sum of squared
//! distances over every subset of size K - M; it is exact, so it serves
//! as the reference the relaxed aggregator is checked against.
//! `check_robust_bound` verifies that an aggregate stays within the
//! kappa-scaled variance ball of every candidate honest subset, which is
//! the standard (M, kappa)-robustness criterion.

use crate::error::{Error, Result};
use crate::vector::{
    squared_distance, unweighted_mean, validate_updates, weighted_centroid, ClientUpdate,
    ParamVector,
};

/// Enumeration guard: refuse instead of approximating past this many subsets.
pub const MAX_SUBSETS: u128 = 1_000_000;

/// Minimizing subset with its centroid and objective value.
#[derive(Debug, Clone)]
pub struct SubsetSolution {
    /// Sorted client ids, |subset| = K - M.
    pub subset: Vec<usize>,
    pub centroid: ParamVector,
    /// Sum of squared distances from subset members to the centroid.
    pub objective: f64,
}

/// Outcome of checking the robustness inequality over all subsets.
#[derive(Debug, Clone)]
pub struct RobustnessReport {
    pub kappa: f64,
    /// Max over subsets B of lhs/rhs; 0/0 counts as 0.
    pub worst_ratio: f64,
    pub satisfied: bool,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result.saturating_mul((n - i) as u128) / (i + 1) as u128;
    }
    result
}

fn check_enumerable(k: usize, m: usize) -> Result<()> {
    if 2 * m >= k {
        return Err(Error::TooManyMalicious {
            malicious: m,
            clients: k,
        });
    }
    let subsets = binomial(k, k - m);
    if subsets > MAX_SUBSETS {
        return Err(Error::EnumerationGuard {
            subsets,
            limit: MAX_SUBSETS,
        });
    }
    Ok(())
}

/// Visits all size-`r` subsets of `0..n` in lexicographic order.
fn for_each_subset<F: FnMut(&[usize]) -> Result<()>>(n: usize, r: usize, mut f: F) -> Result<()> {
    let mut combo: Vec<usize> = (0..r).collect();
    loop {
        f(&combo)?;
        // Advance to the next combination.
        let mut i = r;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if combo[i] != i + n - r {
                break;
            }
            if i == 0 {
                return Ok(());
            }
        }
        combo[i] += 1;
        for j in i + 1..r {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

fn subset_centroid(updates: &[ClientUpdate], subset: &[usize]) -> Result<ParamVector> {
    let mut weights = vec![0.0; updates.len()];
    for &id in subset {
        weights[id] = 1.0;
    }
    weighted_centroid(updates, &weights)
}

fn subset_objective(updates: &[ClientUpdate], subset: &[usize], centroid: &ParamVector) -> Result<f64> {
    let mut total = 0.0;
    for &id in subset {
        total += squared_distance(&updates[id].params, centroid)?;
    }
    Ok(total)
}

/// Exhaustively minimizes the within-subset sum of squared distances
/// over all subsets of size K - M. Ties break toward the
/// lexicographically smallest subset.
pub fn brute_force_subset(updates: &[ClientUpdate], m: usize) -> Result<SubsetSolution> {
    validate_updates(updates)?;
    let k = updates.len();
    if m == 0 {
        let centroid = unweighted_mean(updates)?;
        let subset: Vec<usize> = (0..k).collect();
        let objective = subset_objective(updates, &subset, &centroid)?;
        return Ok(SubsetSolution {
            subset,
            centroid,
            objective,
        });
    }
    check_enumerable(k, m)?;

    let mut best: Option<SubsetSolution> = None;
    for_each_subset(k, k - m, |subset| {
        let centroid = subset_centroid(updates, subset)?;
        let objective = subset_objective(updates, subset, &centroid)?;
        let better = match &best {
            None => true,
            Some(current) => objective < current.objective,
        };
        if better {
            best = Some(SubsetSolution {
                subset: subset.to_vec(),
                centroid,
                objective,
            });
        }
        Ok(())
    })?;
    Ok(best.expect("at least one subset exists"))
}

/// Robustness constant `4 (1 + M / (K - 2M))`.
pub fn robustness_kappa(k: usize, m: usize) -> Result<f64> {
    if 2 * m >= k {
        return Err(Error::TooManyMalicious {
            malicious: m,
            clients: k,
        });
    }
    Ok(4.0 * (1.0 + m as f64 / (k - 2 * m) as f64))
}

/// Verifies `||aggregate - centroid(B)||^2 <= kappa/(K-M) * spread(B)`
/// for every subset B of size K - M, reporting the worst ratio.
pub fn check_robust_bound(
    aggregate: &ParamVector,
    updates: &[ClientUpdate],
    m: usize,
) -> Result<RobustnessReport> {
    validate_updates(updates)?;
    let k = updates.len();
    if aggregate.dim() != updates[0].dim() {
        return Err(Error::DimensionMismatch {
            left: aggregate.dim(),
            right: updates[0].dim(),
        });
    }
    check_enumerable(k, m)?;
    let kappa = robustness_kappa(k, m)?;
    let scale = kappa / (k - m) as f64;

    let mut worst_ratio: f64 = 0.0;
    for_each_subset(k, k - m, |subset| {
        let centroid = subset_centroid(updates, subset)?;
        let lhs = squared_distance(aggregate, &centroid)?;
        let rhs = scale * subset_objective(updates, subset, &centroid)?;
        let ratio = if rhs == 0.0 {
            if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            lhs / rhs
        };
        worst_ratio = worst_ratio.max(ratio);
        Ok(())
    })?;

    Ok(RobustnessReport {
        kappa,
        worst_ratio,
        satisfied: worst_ratio <= 1.0 + 1e-9,
    })
}
