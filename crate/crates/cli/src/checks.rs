//! Certificate suite and self-test batteries behind the `oracle-check`
//! and `selftest` verbs.

use brafl_core::baselines::{
    aggregate_geometric_median, aggregate_median, aggregate_trimmed_mean, multi_krum_selection,
};
use brafl_core::bra::{aggregate_bra_traced, BraSettings};
use brafl_core::fedsim::data::make_synthetic_dataset;
use brafl_core::fedsim::model::{model_loss_and_grad, param_len};
use brafl_core::oracle::{brute_force_subset, check_robust_bound};
use brafl_core::rng::DetRng;
use brafl_core::vector::{updates_from_vectors, ClientUpdate};

/// Random clustered instance with `m` planted outliers; mixes tight and
/// loose clusters across trials.
pub fn random_instance(
    rng: &mut DetRng,
    k: usize,
    d: usize,
    m: usize,
    spread: f64,
    distance: f64,
) -> Vec<ClientUpdate> {
    let center: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let vectors: Vec<Vec<f64>> = (0..k)
        .map(|id| {
            if id < m {
                let mut dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                dir.iter_mut()
                    .zip(&center)
                    .map(|(x, c)| c + *x / norm * distance)
                    .collect()
            } else {
                center.iter().map(|c| c + spread * rng.normal()).collect()
            }
        })
        .collect();
    updates_from_vectors(&vectors).expect("generated vectors are valid")
}

/// Outcome of the robustness-certificate suite.
#[derive(Debug)]
pub struct OracleCheckReport {
    pub instances: usize,
    pub violations: usize,
    pub worst_ratio: f64,
}

/// Verifies the subset-selection robustness bound on random instances:
/// the exhaustive minimizer's centroid must satisfy the certificate for
/// every admissible subset.
pub fn oracle_check(seed: u64, instances: usize) -> OracleCheckReport {
    let mut rng = DetRng::new(seed, 0xC0DE);
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for trial in 0..instances {
        let k = 4 + trial % 7; // 4..=10
        let d = 1 + trial % 5;
        let m = trial % (k / 2).max(1);
        let spread = if trial % 3 == 0 { 1.0 } else { 0.1 };
        let distance = spread * (5.0 + rng.f64() * 45.0);
        let updates = random_instance(&mut rng, k, d, m, spread, distance);
        let solution = brute_force_subset(&updates, m).expect("within enumeration guard");
        let report =
            check_robust_bound(&solution.centroid, &updates, m).expect("within guard");
        worst_ratio = worst_ratio.max(report.worst_ratio);
        if !report.satisfied {
            violations += 1;
        }
    }
    OracleCheckReport {
        instances,
        violations,
        worst_ratio,
    }
}

pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn suite(name: &'static str, result: Result<String, String>) -> SuiteResult {
    match result {
        Ok(detail) => SuiteResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => SuiteResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn elbo_ascent_suite() -> Result<String, String> {
    let settings = BraSettings::default();
    let mut rng = DetRng::new(0x5EED, 1);
    let mut checked = 0;
    for trial in 0..100 {
        let k = 4 + trial % 12;
        let d = 1 + trial % 8;
        let m = trial % (k / 2).max(1);
        let distance = 0.1 * (10.0 + rng.f64() * 90.0);
        let updates = random_instance(&mut rng, k, d, m, 0.1, distance);
        let (_, trace) = aggregate_bra_traced(&updates, &settings)
            .map_err(|e| format!("aggregation failed: {e}"))?;
        for pair in trace.iterations.windows(2) {
            if pair[1].epsilon_clamped || pair[1].sigma2_floored {
                continue;
            }
            checked += 1;
            if pair[1].elbo < pair[0].elbo - 1e-9 * pair[0].elbo.abs() {
                return Err(format!(
                    "objective fell from {} to {} on trial {trial}",
                    pair[0].elbo, pair[1].elbo
                ));
            }
        }
    }
    Ok(format!("{checked} unconstrained ascent steps monotone"))
}

fn sort_oracle_suite() -> Result<String, String> {
    let mut rng = DetRng::new(0x5EED, 2);
    for trial in 0..50 {
        let k = 3 + trial % 10;
        let d = 1 + trial % 4;
        let vectors: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.normal() * 3.0).collect())
            .collect();
        let updates = updates_from_vectors(&vectors).map_err(|e| e.to_string())?;
        let median = aggregate_median(&updates).map_err(|e| e.to_string())?;
        let beta = 0.25;
        let trimmed = aggregate_trimmed_mean(&updates, beta).map_err(|e| e.to_string())?;
        let trim = (beta * k as f64).floor() as usize;
        for coord in 0..d {
            let mut column: Vec<f64> = vectors.iter().map(|v| v[coord]).collect();
            column.sort_by(|a, b| a.total_cmp(b));
            let expect_median = if k % 2 == 1 {
                column[k / 2]
            } else {
                (column[k / 2 - 1] + column[k / 2]) / 2.0
            };
            if median.values()[coord] != expect_median {
                return Err(format!("median mismatch on trial {trial}"));
            }
            let kept = &column[trim..k - trim];
            let expect_trim = kept.iter().sum::<f64>() / kept.len() as f64;
            if (trimmed.values()[coord] - expect_trim).abs() > 1e-12 {
                return Err(format!("trimmed mean mismatch on trial {trial}"));
            }
        }
    }
    Ok("median and trimmed mean match sort oracles on 50 instances".into())
}

fn krum_oracle_suite() -> Result<String, String> {
    let mut rng = DetRng::new(0x5EED, 3);
    for trial in 0..20 {
        let k = 6 + trial % 8;
        let l = k - 1 - trial % 3;
        let vectors: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..3).map(|_| rng.normal()).collect())
            .collect();
        let updates = updates_from_vectors(&vectors).map_err(|e| e.to_string())?;
        let (scores, _) = multi_krum_selection(&updates, l).map_err(|e| e.to_string())?;
        let neighbors = l - 2;
        for i in 0..k {
            let mut dists: Vec<f64> = (0..k)
                .filter(|&j| j != i)
                .map(|j| {
                    vectors[i]
                        .iter()
                        .zip(&vectors[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                })
                .collect();
            dists.sort_by(|a, b| a.total_cmp(b));
            let expected: f64 = dists[..neighbors].iter().sum();
            if scores[i] != expected {
                return Err(format!("score mismatch for client {i} on trial {trial}"));
            }
        }
    }
    Ok("Krum scores match the quadratic recomputation on 20 instances".into())
}

fn weiszfeld_suite() -> Result<String, String> {
    let mut rng = DetRng::new(0x5EED, 4);
    for trial in 0..50 {
        let k = 3 + 2 * (trial % 4); // odd counts
        let vectors: Vec<Vec<f64>> = (0..k).map(|_| vec![rng.normal() * 5.0]).collect();
        let updates = updates_from_vectors(&vectors).map_err(|e| e.to_string())?;
        let out = aggregate_geometric_median(&updates, 1e-10, 1000).map_err(|e| e.to_string())?;
        let mut column: Vec<f64> = vectors.iter().map(|v| v[0]).collect();
        column.sort_by(|a, b| a.total_cmp(b));
        let median = column[k / 2];
        if (out.point.values()[0] - median).abs() > 1e-8 {
            return Err(format!(
                "1-D geometric median {} vs median {median} on trial {trial}",
                out.point.values()[0]
            ));
        }
    }
    Ok("1-D geometric median equals the coordinate median on 50 instances".into())
}

fn gradient_suite() -> Result<String, String> {
    let mut rng = DetRng::new(0x5EED, 5);
    for trial in 0..10 {
        let classes = 3 + trial % 3;
        let dim = 2 + trial % 4;
        let data = make_synthetic_dataset(classes, dim, 5, 0.5, &mut rng)
            .map_err(|e| e.to_string())?;
        let n = param_len(classes, dim);
        let mut params: Vec<f64> = (0..n).map(|_| 0.3 * rng.normal()).collect();
        let batch: Vec<usize> = (0..data.len()).collect();
        let (_, grad) = model_loss_and_grad(&params, &data, &batch, 1e-4);
        let h = 1e-5;
        for i in (0..n).step_by(3) {
            let orig = params[i];
            params[i] = orig + h;
            let (up, _) = model_loss_and_grad(&params, &data, &batch, 1e-4);
            params[i] = orig - h;
            let (down, _) = model_loss_and_grad(&params, &data, &batch, 1e-4);
            params[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let denom = numeric.abs().max(grad[i].abs()).max(1e-8);
            if (numeric - grad[i]).abs() / denom > 1e-5 {
                return Err(format!(
                    "gradient mismatch at coordinate {i} on trial {trial}"
                ));
            }
        }
    }
    Ok("analytic gradients match central differences on 10 models".into())
}

fn contamination_suite() -> Result<String, String> {
    let settings = BraSettings::default();
    let mut rng = DetRng::new(0x5EED, 6);
    for trial in 0..25 {
        let k = 6 + trial % 5;
        let m = 1 + trial % (k / 2 - 1).max(1);
        let updates = random_instance(&mut rng, k, 3, m, 1e-3, 1.5);
        let (result, _) =
            aggregate_bra_traced(&updates, &settings).map_err(|e| e.to_string())?;
        for (i, &p) in result.pi.iter().enumerate() {
            let malicious = i < m;
            if malicious && p > 0.1 {
                return Err(format!("outlier {i} kept with pi {p} on trial {trial}"));
            }
            if !malicious && p < 0.9 {
                return Err(format!("honest {i} dropped with pi {p} on trial {trial}"));
            }
        }
        if (result.epsilon_hat - m as f64 / k as f64).abs() > 1.0 / k as f64 {
            return Err(format!(
                "epsilon {} vs {}/{k} on trial {trial}",
                result.epsilon_hat, m
            ));
        }
    }
    Ok("posteriors separate planted outliers on 25 instances".into())
}

/// Quick property batteries for the `selftest` verb.
pub fn selftest() -> Vec<SuiteResult> {
    vec![
        suite("elbo-ascent", elbo_ascent_suite()),
        suite("sort-oracles", sort_oracle_suite()),
        suite("krum-oracle", krum_oracle_suite()),
        suite("weiszfeld", weiszfeld_suite()),
        suite("gradient-check", gradient_suite()),
        suite("contamination", contamination_suite()),
    ]
}
