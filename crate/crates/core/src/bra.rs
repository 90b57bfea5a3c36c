//! Bayesian robust aggregation.
//!
//! Treats each client update as either benign or corrupted, with a
//! per-client posterior probability `pi_k` of being benign and a
//! contamination level `epsilon` estimated from the data. An EM-style
//! coordinate ascent alternates three closed-form steps:
//!
//! 1. `epsilon <- 1 - mean(pi)`, clamped to keep the loop adaptive,
//! 2. `pi_k <- logistic(log-likelihood of update k + prior odds)`,
//! 3. location/scale `(mean, sigma2) <- pi-weighted centroid and variance`.
//!
//! The likelihood is a univariate Gaussian on the scalar residual
//! `||w_k - mean||^2 / sigma2`, so the objective stays consistent across
//! model dimensions. Each step maximizes the same evidence lower bound,
//! which therefore ascends whenever neither the epsilon clamp nor the
//! sigma2 floor is active.
//!
//! The posterior update runs in log space: sign-flipped far outliers
//! produce residuals whose density underflows `exp` by hundreds of
//! orders of magnitude, but their logits stay finite.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::vector::{squared_distance, validate_updates, weighted_centroid, ClientUpdate, ParamVector};

/// Knobs for the aggregation loop. Defaults need no tuning per run.
#[derive(Debug, Clone)]
pub struct BraSettings {
    /// Iteration cap for the coordinate ascent.
    pub max_iterations: usize,
    /// Convergence threshold on `max_k |pi_k_new - pi_k_old|`.
    pub pi_tolerance: f64,
    /// Relative variance floor: the working floor is
    /// `sigma2_floor * (1 + mean squared norm of the updates)`.
    pub sigma2_floor: f64,
    /// Contamination clamp `(lo, hi)`. `None` uses `(1/(2K), 0.5)`:
    /// the upper bound encodes the standing assumption of a benign
    /// majority, the lower bound keeps the all-benign point from being
    /// an absorbing state.
    pub epsilon_clamp: Option<(f64, f64)>,
    /// Initial benign probability. A neutral 0.5 breaks the degenerate
    /// fixed point at all-ones (see [`posteriors_for_epsilon`]) while
    /// leaving the first location/scale equal to the unweighted mean
    /// and variance.
    pub pi_init: f64,
}

impl Default for BraSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            pi_tolerance: 1e-8,
            sigma2_floor: 1e-12,
            epsilon_clamp: None,
            pi_init: 0.5,
        }
    }
}

impl BraSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                reason: "must be positive".into(),
            });
        }
        if !(self.pi_tolerance > 0.0) || !self.pi_tolerance.is_finite() {
            return Err(Error::InvalidParameter {
                name: "pi_tolerance",
                reason: "must be positive".into(),
            });
        }
        if !(self.sigma2_floor > 0.0) || !self.sigma2_floor.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma2_floor",
                reason: "must be positive".into(),
            });
        }
        if let Some((lo, hi)) = self.epsilon_clamp {
            if !(0.0 < lo && lo < hi && hi <= 0.5) {
                return Err(Error::InvalidParameter {
                    name: "epsilon_clamp",
                    reason: format!("need 0 < lo < hi <= 0.5, got ({lo}, {hi})"),
                });
            }
        }
        if !(self.pi_init > 0.0 && self.pi_init < 1.0) {
            return Err(Error::InvalidParameter {
                name: "pi_init",
                reason: "must lie strictly inside (0, 1)".into(),
            });
        }
        Ok(())
    }

    /// Effective contamination bounds for `k` clients.
    pub fn epsilon_bounds(&self, k: usize) -> (f64, f64) {
        self.epsilon_clamp
            .unwrap_or((1.0 / (2.0 * k as f64), 0.5))
    }

    /// Working variance floor for a given set of updates.
    pub fn effective_sigma2_floor(&self, updates: &[ClientUpdate]) -> f64 {
        let mean_sq_norm = updates
            .iter()
            .map(|u| u.params.squared_norm())
            .sum::<f64>()
            / updates.len() as f64;
        self.sigma2_floor * (1.0 + mean_sq_norm)
    }
}

/// Aggregated vector plus loop diagnostics.
#[derive(Debug, Clone)]
pub struct AggregationResult {
    pub mean: ParamVector,
    /// Residual variance at the last iteration (floored).
    pub sigma2: f64,
    /// Per-client benign probabilities.
    pub pi: Vec<f64>,
    /// Contamination estimate `1 - mean(pi)` of the final posteriors,
    /// before clamping.
    pub epsilon_hat: f64,
    /// `epsilon_hat` clamped to the configured bounds.
    pub epsilon_clamped: f64,
    pub iterations: usize,
    /// Final evidence lower bound; meaningful for the Bayesian
    /// aggregator only (the simulator fills 0.0 for baseline rules).
    pub elbo: f64,
    pub converged: bool,
}

/// State snapshot at the end of one coordinate-ascent iteration.
#[derive(Debug, Clone)]
pub struct BraIteration {
    pub elbo: f64,
    pub epsilon: f64,
    pub sigma2: f64,
    pub pi: Vec<f64>,
    /// The raw contamination estimate fell outside the clamp this iteration.
    pub epsilon_clamped: bool,
    /// The raw weighted variance fell below the floor this iteration.
    pub sigma2_floored: bool,
}

/// Per-iteration history of a single aggregation call.
#[derive(Debug, Clone, Default)]
pub struct BraTrace {
    pub iterations: Vec<BraIteration>,
}

/// Log density of a univariate Gaussian evaluated through its squared
/// residual: `-(residual2 / sigma2 + ln(2 pi sigma2)) / 2`.
///
/// Callers clamp `sigma2` to their floor first; this only rejects
/// non-positive or non-finite inputs.
pub fn gaussian_loglik(residual2: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParameter {
            name: "sigma2",
            reason: format!("must be positive and finite, got {sigma2}"),
        });
    }
    if residual2 < 0.0 || residual2.is_nan() {
        return Err(Error::InvalidParameter {
            name: "residual2",
            reason: format!("must be non-negative, got {residual2}"),
        });
    }
    Ok(-0.5 * (residual2 / sigma2 + (TAU * sigma2).ln()))
}

/// Contamination estimate `1 - sum(pi) / K`, unclamped.
pub fn estimate_epsilon(pi: &[f64]) -> Result<f64> {
    if pi.is_empty() {
        return Err(Error::InvalidParameter {
            name: "pi",
            reason: "must be non-empty".into(),
        });
    }
    let sum: f64 = pi.iter().sum();
    Ok(1.0 - sum / pi.len() as f64)
}

fn validate_pi(pi: &[f64], expected: usize) -> Result<()> {
    if pi.len() != expected {
        return Err(Error::WeightCountMismatch {
            weights: pi.len(),
            updates: expected,
        });
    }
    if let Some(i) = pi.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter {
            name: "pi",
            reason: format!("entry {i} = {} outside [0, 1]", pi[i]),
        });
    }
    Ok(())
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Posterior update for an explicit contamination level:
/// `pi_k = logistic(log p(w_k | mean, sigma2) + ln((1 - eps) / eps))`.
///
/// Algebraically this is `1 / (1 + (eps/(1-eps)) / p(w_k))`, and when
/// `eps` is the unclamped `1 - sum(pi)/K` the odds factor equals
/// `(K - sum(pi)) / sum(pi)` exactly. At `eps = 0` the prior odds are
/// infinite and every posterior is exactly 1: the all-benign state is a
/// fixed point, which is why the aggregation loop clamps `eps` away
/// from it.
pub fn posteriors_for_epsilon(
    updates: &[ClientUpdate],
    mean: &ParamVector,
    sigma2: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    validate_updates(updates)?;
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must lie in [0, 1], got {epsilon}"),
        });
    }
    let prior_odds = ((1.0 - epsilon) / epsilon).ln();
    updates
        .iter()
        .map(|u| {
            let r2 = squared_distance(&u.params, mean)?;
            let ll = gaussian_loglik(r2, sigma2)?;
            Ok(logistic(ll + prior_odds))
        })
        .collect()
}

/// Posterior update deriving epsilon from the previous posteriors,
/// clamped per the settings.
pub fn update_posteriors(
    updates: &[ClientUpdate],
    mean: &ParamVector,
    sigma2: f64,
    pi_old: &[f64],
    settings: &BraSettings,
) -> Result<Vec<f64>> {
    validate_pi(pi_old, updates.len())?;
    let (lo, hi) = settings.epsilon_bounds(updates.len());
    let epsilon = estimate_epsilon(pi_old)?.clamp(lo, hi);
    posteriors_for_epsilon(updates, mean, sigma2, epsilon)
}

fn location_scale_raw(
    updates: &[ClientUpdate],
    pi: &[f64],
) -> Result<(ParamVector, f64)> {
    validate_pi(pi, updates.len())?;
    let total: f64 = pi.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllClientsRejected);
    }
    let mean = weighted_centroid(updates, pi)?;
    let mut weighted_residual = 0.0;
    for (update, &w) in updates.iter().zip(pi) {
        if w == 0.0 {
            continue;
        }
        weighted_residual += w * squared_distance(&update.params, &mean)?;
    }
    Ok((mean, weighted_residual / total))
}

/// Closed-form location and scale given posteriors: the pi-weighted
/// centroid and the pi-weighted residual variance, floored.
pub fn update_location_scale(
    updates: &[ClientUpdate],
    pi: &[f64],
    settings: &BraSettings,
) -> Result<(ParamVector, f64)> {
    validate_updates(updates)?;
    let (mean, raw) = location_scale_raw(updates, pi)?;
    let floor = settings.effective_sigma2_floor(updates);
    Ok((mean, raw.max(floor)))
}

/// Evidence lower bound: pi-weighted log-likelihood minus the KL
/// divergence between the Bernoulli posteriors and the Bernoulli(1-eps)
/// prior, with the 0 ln 0 = 0 convention.
pub fn elbo(
    updates: &[ClientUpdate],
    mean: &ParamVector,
    sigma2: f64,
    pi: &[f64],
    epsilon: f64,
) -> Result<f64> {
    validate_updates(updates)?;
    validate_pi(pi, updates.len())?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must lie strictly inside (0, 1), got {epsilon}"),
        });
    }
    let mut likelihood = 0.0;
    let mut kl = 0.0;
    for (update, &p) in updates.iter().zip(pi) {
        let r2 = squared_distance(&update.params, mean)?;
        likelihood += p * gaussian_loglik(r2, sigma2)?;
        if p > 0.0 {
            kl += p * (p / (1.0 - epsilon)).ln();
        }
        if p < 1.0 {
            kl += (1.0 - p) * ((1.0 - p) / epsilon).ln();
        }
    }
    Ok(likelihood - kl)
}

/// Runs the aggregation loop and returns the result with its trace.
///
/// Loop order per iteration: clamp epsilon from the current posteriors,
/// refresh the posteriors against the current location/scale, then
/// refresh location/scale from the new posteriors. Terminates when
/// `max_k |delta pi_k|` drops below the tolerance or the iteration cap
/// is hit.
pub fn aggregate_bra_traced(
    updates: &[ClientUpdate],
    settings: &BraSettings,
) -> Result<(AggregationResult, BraTrace)> {
    validate_updates(updates)?;
    settings.validate()?;
    let k = updates.len();
    if k < 2 {
        return Err(Error::TooFewClients { got: k, min: 2 });
    }

    let (lo, hi) = settings.epsilon_bounds(k);
    let floor = settings.effective_sigma2_floor(updates);

    // Unweighted mean and variance seed the loop.
    let uniform = vec![1.0; k];
    let (mut mean, init_raw) = location_scale_raw(updates, &uniform)?;
    let mut sigma2 = init_raw.max(floor);

    let mut pi = vec![settings.pi_init; k];
    let mut trace = BraTrace::default();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..settings.max_iterations {
        iterations += 1;

        let epsilon_raw = estimate_epsilon(&pi)?;
        let epsilon = epsilon_raw.clamp(lo, hi);
        let epsilon_clamped = epsilon_raw < lo || epsilon_raw > hi;

        let new_pi = posteriors_for_epsilon(updates, &mean, sigma2, epsilon)?;
        let delta = new_pi
            .iter()
            .zip(&pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        pi = new_pi;

        let (new_mean, raw) = location_scale_raw(updates, &pi)?;
        let sigma2_floored = raw < floor;
        mean = new_mean;
        sigma2 = raw.max(floor);

        trace.iterations.push(BraIteration {
            elbo: elbo(updates, &mean, sigma2, &pi, epsilon)?,
            epsilon,
            sigma2,
            pi: pi.clone(),
            epsilon_clamped,
            sigma2_floored,
        });

        if delta < settings.pi_tolerance {
            converged = true;
            break;
        }
    }

    let epsilon_hat = estimate_epsilon(&pi)?;
    let result = AggregationResult {
        mean,
        sigma2,
        pi,
        epsilon_hat,
        epsilon_clamped: epsilon_hat.clamp(lo, hi),
        iterations,
        elbo: trace.iterations.last().map(|it| it.elbo).unwrap_or(0.0),
        converged,
    };
    Ok((result, trace))
}

/// Runs the aggregation loop, discarding the trace.
pub fn aggregate_bra(updates: &[ClientUpdate], settings: &BraSettings) -> Result<AggregationResult> {
    aggregate_bra_traced(updates, settings).map(|(result, _)| result)
}
