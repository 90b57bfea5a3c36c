//! Deterministic single-process federated learning loop: data
//! generation and partitioning, local training, server aggregation, and
//! metric evaluation under configurable attacks.
//!
//! Every random draw is keyed by `(master_seed, purpose, round, client)`
//! so runs are bit-identical regardless of execution order. Clients
//! submit full parameter vectors; attack transforms operate on update
//! deltas internally and re-add the global vector before submission.

pub mod data;
pub mod idx;
pub mod model;

use std::path::PathBuf;

use crate::attacks::{
    active_malicious, apply_backdoor, flip_labels, random_update, sign_flip, triggered_eval_set,
    AdversarySchedule, AttackConfig, AttackKind,
};
use crate::baselines::{aggregate_geometric_median, BaselineKind, BaselineSpec};
use crate::bra::{aggregate_bra, AggregationResult, BraSettings};
use crate::error::{Error, Result};
use crate::rng::DetRng;
use crate::vector::{squared_distance, ClientUpdate, ParamVector};

use data::{dirichlet_partition, make_synthetic_dataset, Dataset, PartitionConfig};
use model::{evaluate_acc, evaluate_asr, local_train, param_len, sgd_epochs, TrainingHyperparams};

/// Where the training and test data come from.
#[derive(Debug, Clone)]
pub enum DatasetSpec {
    Synthetic {
        classes: usize,
        dim: usize,
        train_per_class: usize,
        test_per_class: usize,
        spread: f64,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        normalize: Option<(f64, f64)>,
    },
}

/// Server-side aggregation rule for the run.
#[derive(Debug, Clone)]
pub enum AggregatorChoice {
    Baseline(BaselineSpec),
    Bra(BraSettings),
}

impl AggregatorChoice {
    pub fn is_bra(&self) -> bool {
        matches!(self, AggregatorChoice::Bra(_))
    }
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct FedRunConfig {
    pub dataset: DatasetSpec,
    pub partition: PartitionConfig,
    pub training: TrainingHyperparams,
    pub aggregator: AggregatorChoice,
    pub attack: Option<AttackConfig>,
    pub schedule: Option<AdversarySchedule>,
    /// First round in which scheduled adversaries act.
    pub attack_start_round: usize,
    pub rounds: usize,
    pub eval_every: usize,
    pub master_seed: u64,
}

impl FedRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.partition.clients < 2 {
            return Err(Error::TooFewClients {
                got: self.partition.clients,
                min: 2,
            });
        }
        if self.rounds == 0 || self.eval_every == 0 {
            return Err(Error::InvalidParameter {
                name: "rounds",
                reason: "rounds and eval_every must be positive".into(),
            });
        }
        if self.eval_every > self.rounds {
            return Err(Error::InvalidParameter {
                name: "eval_every",
                reason: format!(
                    "{} exceeds {} rounds; no round would be evaluated",
                    self.eval_every, self.rounds
                ),
            });
        }
        self.training.validate()?;
        if let AggregatorChoice::Bra(settings) = &self.aggregator {
            settings.validate()?;
        }
        match (&self.attack, &self.schedule) {
            (Some(attack), Some(schedule)) => {
                attack.validate()?;
                schedule.validate(self.partition.clients)?;
            }
            (None, None) => {}
            _ => {
                return Err(Error::InvalidParameter {
                    name: "attack",
                    reason: "attack and schedule must be configured together".into(),
                });
            }
        }
        Ok(())
    }
}

/// Metrics captured at an evaluated round.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: usize,
    pub acc: f64,
    /// Present only for backdoor runs.
    pub asr: Option<f64>,
    /// Present only when the aggregator is the Bayesian rule.
    pub pi: Option<Vec<f64>>,
    pub epsilon_hat: Option<f64>,
    /// Clients that actually attacked this round, sorted.
    pub actual_malicious: Vec<usize>,
    pub aggregate_norm: f64,
}

// Stream purposes for keyed randomness.
const STREAM_TRAIN_DATA: u64 = 1;
const STREAM_TEST_DATA: u64 = 2;
const STREAM_PARTITION: u64 = 3;
const STREAM_CLIENT: u64 = 4;
const STREAM_ATTACK: u64 = 5;

fn stream_id(purpose: u64, round: usize, client: usize) -> u64 {
    (purpose << 56) | ((round as u64 & 0xffff_ffff) << 24) | (client as u64 & 0xff_ffff)
}

fn build_datasets(config: &FedRunConfig) -> Result<(Dataset, Dataset)> {
    match &config.dataset {
        DatasetSpec::Synthetic {
            classes,
            dim,
            train_per_class,
            test_per_class,
            spread,
        } => {
            let mut train_rng = DetRng::new(config.master_seed, stream_id(STREAM_TRAIN_DATA, 0, 0));
            let train =
                make_synthetic_dataset(*classes, *dim, *train_per_class, *spread, &mut train_rng)?;
            let mut test_rng = DetRng::new(config.master_seed, stream_id(STREAM_TEST_DATA, 0, 0));
            let test =
                make_synthetic_dataset(*classes, *dim, *test_per_class, *spread, &mut test_rng)?;
            Ok((train, test))
        }
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            normalize,
        } => {
            let train = idx::load_idx_dataset(train_images, train_labels, *normalize)?;
            let test = idx::load_idx_dataset(test_images, test_labels, *normalize)?;
            if train.dim() != test.dim() {
                return Err(Error::DimensionMismatch {
                    left: train.dim(),
                    right: test.dim(),
                });
            }
            Ok((train, test))
        }
    }
}

/// Applies the configured rule and wraps baseline outputs with the same
/// diagnostics shape the Bayesian aggregator produces: all-ones
/// posteriors and the unweighted residual variance around the output.
pub fn aggregate_with(
    choice: &AggregatorChoice,
    updates: &[ClientUpdate],
) -> Result<AggregationResult> {
    match choice {
        AggregatorChoice::Bra(settings) => aggregate_bra(updates, settings),
        AggregatorChoice::Baseline(spec) => {
            let (mean, iterations, converged) = match spec.kind {
                BaselineKind::GeometricMedian => {
                    let out = aggregate_geometric_median(
                        updates,
                        spec.geomed_tolerance,
                        spec.geomed_max_iters,
                    )?;
                    (out.point, out.iterations, out.converged)
                }
                _ => (spec.aggregate(updates)?, 0, true),
            };
            let mut variance = 0.0;
            for update in updates {
                variance += squared_distance(&update.params, &mean)?;
            }
            variance /= updates.len() as f64;
            Ok(AggregationResult {
                mean,
                sigma2: variance,
                pi: vec![1.0; updates.len()],
                epsilon_hat: 0.0,
                epsilon_clamped: 0.0,
                iterations,
                elbo: 0.0,
                converged,
            })
        }
    }
}

struct BackdoorState {
    /// Poisoned copy of each malicious client's partition, with the
    /// indices of the triggered rows.
    per_client: Vec<Option<(Dataset, Vec<usize>)>>,
    triggered_test: Dataset,
}

/// Two-step backdoor training: half the local epochs on poisoned rows
/// only, the rest on the full mixed partition, sharing optimizer state.
/// A client whose partition has no source-class rows has nothing to
/// poison and trains on its data as-is.
fn backdoor_train(
    global: &[f64],
    poisoned: &(Dataset, Vec<usize>),
    hp: &TrainingHyperparams,
    rng: &mut DetRng,
) -> Vec<f64> {
    let (data, poison_rows) = poisoned;
    let mut params = global.to_vec();
    let mut velocity = vec![0.0; params.len()];
    let poison_epochs = hp.local_epochs / 2;
    let mixed_epochs = hp.local_epochs - poison_epochs;
    let all_rows: Vec<usize> = (0..data.len()).collect();
    sgd_epochs(
        &mut params,
        &mut velocity,
        data,
        poison_rows,
        poison_epochs,
        hp,
        rng,
    );
    sgd_epochs(
        &mut params,
        &mut velocity,
        data,
        &all_rows,
        mixed_epochs,
        hp,
        rng,
    );
    params
}

/// Runs the federated loop and returns one record per evaluated round.
pub fn run_federated(config: &FedRunConfig) -> Result<Vec<RoundRecord>> {
    config.validate()?;
    let (train, test) = build_datasets(config)?;
    let clients = config.partition.clients;

    let mut partition_rng =
        DetRng::new(config.master_seed, stream_id(STREAM_PARTITION, 0, 0));
    let partitions = dirichlet_partition(&train, &config.partition, &mut partition_rng)?;

    // Per-client views and attack-specific data are fixed across rounds.
    let client_data: Vec<Dataset> = partitions.iter().map(|idx| train.select(idx)).collect();

    let backdoor = match &config.attack {
        Some(attack) if attack.kind == AttackKind::Backdoor => {
            let schedule = config.schedule.as_ref().expect("validated together");
            let mut per_client: Vec<Option<(Dataset, Vec<usize>)>> = vec![None; clients];
            for &id in &schedule.malicious_ids {
                match apply_backdoor(&client_data[id], attack) {
                    Ok(b) => per_client[id] = Some((b.data, b.poisoned)),
                    Err(Error::NoSourceClassSamples { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            Some(BackdoorState {
                per_client,
                triggered_test: triggered_eval_set(&test, attack)?,
            })
        }
        _ => None,
    };

    let flipped_data: Vec<Option<Dataset>> = match &config.attack {
        Some(attack) if attack.kind == AttackKind::LabelFlip => {
            let schedule = config.schedule.as_ref().expect("validated together");
            let mut out: Vec<Option<Dataset>> = vec![None; clients];
            for &id in &schedule.malicious_ids {
                let src = &client_data[id];
                let labels = flip_labels(src.labels(), src.classes())
                    .map_err(|e| e.in_round(0))?;
                let mut flipped = src.clone();
                for (i, &label) in labels.iter().enumerate() {
                    flipped.set_label(i, label)?;
                }
                out[id] = Some(flipped);
            }
            out
        }
        _ => vec![None; clients],
    };

    let dim = param_len(train.classes(), train.dim());
    let mut global = vec![0.0; dim];
    let mut records = Vec::new();

    for round in 0..config.rounds {
        let active: Vec<usize> = match &config.schedule {
            Some(schedule) if round >= config.attack_start_round => {
                active_malicious(round, schedule)
            }
            _ => Vec::new(),
        };

        let mut updates = Vec::with_capacity(clients);
        for client in 0..clients {
            let mut rng =
                DetRng::new(config.master_seed, stream_id(STREAM_CLIENT, round, client));
            let local = &client_data[client];
            let rows: Vec<usize> = (0..local.len()).collect();
            let attacking = active.binary_search(&client).is_ok();

            let params = if !attacking {
                local_train(&global, local, &rows, &config.training, &mut rng)
            } else {
                let attack = config.attack.as_ref().expect("validated together");
                match attack.kind {
                    AttackKind::SignFlip => {
                        let honest =
                            local_train(&global, local, &rows, &config.training, &mut rng);
                        let delta: Vec<f64> =
                            honest.iter().zip(&global).map(|(l, g)| l - g).collect();
                        let flipped = sign_flip(
                            &ParamVector::new(delta).map_err(|e| e.in_round(round))?,
                            attack.gamma,
                        )
                        .map_err(|e| e.in_round(round))?;
                        global
                            .iter()
                            .zip(flipped.values())
                            .map(|(g, d)| g + d)
                            .collect()
                    }
                    AttackKind::RandomUpdate => {
                        let honest =
                            local_train(&global, local, &rows, &config.training, &mut rng);
                        let delta: Vec<f64> =
                            honest.iter().zip(&global).map(|(l, g)| l - g).collect();
                        let mut noise_rng = DetRng::new(
                            config.master_seed,
                            stream_id(STREAM_ATTACK, round, client),
                        );
                        let noise = random_update(
                            &ParamVector::new(delta).map_err(|e| e.in_round(round))?,
                            attack.gamma,
                            &mut noise_rng,
                        )
                        .map_err(|e| e.in_round(round))?;
                        global
                            .iter()
                            .zip(noise.values())
                            .map(|(g, d)| g + d)
                            .collect()
                    }
                    AttackKind::LabelFlip => {
                        let flipped = flipped_data[client]
                            .as_ref()
                            .expect("flipped data prepared for malicious clients");
                        local_train(&global, flipped, &rows, &config.training, &mut rng)
                    }
                    AttackKind::Backdoor => {
                        let state = backdoor.as_ref().expect("backdoor state prepared");
                        match &state.per_client[client] {
                            Some(poisoned) => {
                                backdoor_train(&global, poisoned, &config.training, &mut rng)
                            }
                            // No source-class rows in this partition.
                            None => local_train(&global, local, &rows, &config.training, &mut rng),
                        }
                    }
                }
            };

            let update = ClientUpdate::new(
                client,
                ParamVector::new(params).map_err(|e| e.in_round(round))?,
                local.len(),
            )
            .map_err(|e| e.in_round(round))?;
            updates.push(update);
        }

        let aggregated =
            aggregate_with(&config.aggregator, &updates).map_err(|e| e.in_round(round))?;
        global = aggregated.mean.values().to_vec();

        if (round + 1) % config.eval_every == 0 {
            let acc = evaluate_acc(&global, &test);
            let asr = backdoor
                .as_ref()
                .map(|state| evaluate_asr(&global, &state.triggered_test, config.attack.as_ref().unwrap().target_class));
            let (pi, epsilon_hat) = if config.aggregator.is_bra() {
                (Some(aggregated.pi.clone()), Some(aggregated.epsilon_hat))
            } else {
                (None, None)
            };
            records.push(RoundRecord {
                round,
                acc,
                asr,
                pi,
                epsilon_hat,
                actual_malicious: active.clone(),
                aggregate_norm: aggregated.mean.norm(),
            });
        }
    }

    Ok(records)
}
