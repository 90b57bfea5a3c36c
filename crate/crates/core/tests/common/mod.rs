//! Shared instance generators for integration tests.

use brafl_core::rng::DetRng;
use brafl_core::vector::{ClientUpdate, ParamVector};

/// A clustered instance with planted outliers.
pub struct Instance {
    pub updates: Vec<ClientUpdate>,
    /// Sorted ids of the planted outliers.
    #[allow(dead_code)]
    pub malicious: Vec<usize>,
}

/// `k` clients in `d` dimensions: `k - m` honest points in a Gaussian
/// cluster of the given spread around a random center, `m` outliers
/// planted at `ratio * spread * sqrt(d)` from the center in random
/// directions. Outlier ids are chosen at random.
pub fn clustered_instance(
    rng: &mut DetRng,
    k: usize,
    d: usize,
    m: usize,
    spread: f64,
    ratio: f64,
) -> Instance {
    let center: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let mut ids: Vec<usize> = (0..k).collect();
    rng.shuffle(&mut ids);
    let mut malicious: Vec<usize> = ids[..m].to_vec();
    malicious.sort_unstable();

    let updates = (0..k)
        .map(|id| {
            let values: Vec<f64> = if malicious.binary_search(&id).is_ok() {
                let mut direction: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
                let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                let dist = ratio * spread * (d as f64).sqrt();
                direction
                    .iter_mut()
                    .zip(&center)
                    .map(|(dir, c)| c + *dir / norm * dist)
                    .collect()
            } else {
                center.iter().map(|c| c + spread * rng.normal()).collect()
            };
            ClientUpdate::new(id, ParamVector::new(values).unwrap(), 1).unwrap()
        })
        .collect();

    Instance { updates, malicious }
}

/// Reindexes a permuted list of updates with contiguous ids 0..K-1.
pub fn permute_updates(updates: &[ClientUpdate], order: &[usize]) -> Vec<ClientUpdate> {
    order
        .iter()
        .enumerate()
        .map(|(new_id, &old)| {
            ClientUpdate::new(new_id, updates[old].params.clone(), updates[old].sample_count)
                .unwrap()
        })
        .collect()
}

/// Shifts every update by a constant vector.
pub fn translate_updates(updates: &[ClientUpdate], shift: &[f64]) -> Vec<ClientUpdate> {
    updates
        .iter()
        .map(|u| {
            let values: Vec<f64> = u
                .params
                .values()
                .iter()
                .zip(shift)
                .map(|(v, s)| v + s)
                .collect();
            ClientUpdate::new(u.client_id, ParamVector::new(values).unwrap(), u.sample_count)
                .unwrap()
        })
        .collect()
}

/// Scales every update by a constant factor.
pub fn scale_updates(updates: &[ClientUpdate], factor: f64) -> Vec<ClientUpdate> {
    updates
        .iter()
        .map(|u| {
            let values: Vec<f64> = u.params.values().iter().map(|v| v * factor).collect();
            ClientUpdate::new(u.client_id, ParamVector::new(values).unwrap(), u.sample_count)
                .unwrap()
        })
        .collect()
}
