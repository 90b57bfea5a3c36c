//! Instance generation shared by the aggregation benchmarks.

use brafl_core::rng::DetRng;
use brafl_core::vector::{ClientUpdate, ParamVector};

/// Clustered instance with 20 percent planted outliers, the shape the
/// aggregators face in a federated round.
pub fn bench_instance(seed: u64, clients: usize, dim: usize) -> Vec<ClientUpdate> {
    let mut rng = DetRng::new(seed, 0);
    let malicious = clients / 5;
    let center: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    (0..clients)
        .map(|id| {
            let values: Vec<f64> = if id < malicious {
                center.iter().map(|c| c + 10.0 + rng.normal()).collect()
            } else {
                center.iter().map(|c| c + 0.05 * rng.normal()).collect()
            };
            ClientUpdate::new(id, ParamVector::new(values).unwrap(), 1).unwrap()
        })
        .collect()
}
