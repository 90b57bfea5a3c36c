//! Flat key-value experiment configuration.
//!
//! Syntax: one `key = value` per line, `#` starts a comment, dotted
//! prefixes group related keys (`partition.alpha = 0.5`). Unknown and
//! duplicate keys are rejected. The full key list is documented in the
//! project README.

use std::collections::BTreeMap;
use std::path::PathBuf;

use brafl_core::attacks::{AdversarySchedule, AttackConfig, AttackKind, ScheduleMode, TriggerSpec};
use brafl_core::baselines::BaselineSpec;
use brafl_core::bra::BraSettings;
use brafl_core::fedsim::data::PartitionConfig;
use brafl_core::fedsim::model::TrainingHyperparams;
use brafl_core::fedsim::{AggregatorChoice, DatasetSpec, FedRunConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Synthetic,
    Idx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregatorKind {
    Bra,
    FedAvg,
    Median,
    TrimmedMean,
    GeometricMedian,
    MultiKrum,
}

/// Parsed and validated configuration, still in key-value terms so a
/// sweep can re-derive variants before building the run description.
#[derive(Debug, Clone)]
pub struct ConfigModel {
    pub dataset: DatasetKind,
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub test_per_class: usize,
    pub spread: f64,
    pub idx_paths: Option<IdxPaths>,
    pub normalize: Option<(f64, f64)>,

    pub clients: usize,
    pub alpha: f64,

    pub training: TrainingHyperparams,

    pub aggregator: AggregatorKind,
    pub beta: Option<f64>,
    pub krum_l: Option<usize>,
    pub geomed_tolerance: f64,
    pub geomed_max_iters: usize,
    pub bra: BraSettings,

    pub attack: Option<AttackKind>,
    pub fraction: f64,
    pub gamma: f64,
    pub source_class: usize,
    pub target_class: usize,
    pub trigger_coordinate: Option<usize>,
    pub trigger_value: f64,
    pub attack_start_round: usize,

    pub schedule_mode: ScheduleMode,
    pub active_probability: f64,
    pub schedule_seed: Option<u64>,

    pub rounds: usize,
    pub eval_every: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct IdxPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

fn config_err(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}

struct Keys {
    values: BTreeMap<String, String>,
}

impl Keys {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (number, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_err(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    number + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if value.is_empty() {
                return Err(config_err(format!("key `{key}`: empty value")));
            }
            if values.insert(key.clone(), value).is_some() {
                return Err(config_err(format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { values })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    fn take_parsed<T: std::str::FromStr>(
        &mut self,
        key: &str,
        constraint: &str,
    ) -> Result<Option<T>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                config_err(format!("key `{key}`: cannot parse `{raw}` ({constraint})"))
            }),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some(key) = self.values.keys().next() {
            return Err(config_err(format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

fn require<T>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| config_err(format!("missing required key `{key}`")))
}

fn check(condition: bool, message: impl Into<String>) -> Result<(), CliError> {
    if condition {
        Ok(())
    } else {
        Err(config_err(message))
    }
}

/// Parses the key-value text into a validated model with defaults applied.
pub fn parse_config(text: &str) -> Result<ConfigModel, CliError> {
    let mut keys = Keys::parse(text)?;

    let dataset = match require(keys.take("dataset"), "dataset")?.as_str() {
        "synthetic" => DatasetKind::Synthetic,
        "idx" => DatasetKind::Idx,
        other => return Err(config_err(format!("dataset: `{other}` is not synthetic|idx"))),
    };

    let classes = keys.take_parsed("dataset.classes", "positive integer")?.unwrap_or(10);
    let dim = keys.take_parsed("dataset.dim", "positive integer")?.unwrap_or(16);
    let per_class = keys.take_parsed("dataset.per_class", "positive integer")?.unwrap_or(50);
    let test_per_class = keys
        .take_parsed("dataset.test_per_class", "positive integer")?
        .unwrap_or(20);
    let spread = keys.take_parsed("dataset.spread", "positive real")?.unwrap_or(0.3);

    let idx_key = |keys: &mut Keys, name: &str| keys.take(name).map(PathBuf::from);
    let train_images = idx_key(&mut keys, "dataset.train_images");
    let train_labels = idx_key(&mut keys, "dataset.train_labels");
    let test_images = idx_key(&mut keys, "dataset.test_images");
    let test_labels = idx_key(&mut keys, "dataset.test_labels");
    let normalize_mean: Option<f64> = keys.take_parsed("dataset.normalize_mean", "real")?;
    let normalize_std: Option<f64> = keys.take_parsed("dataset.normalize_std", "positive real")?;

    let idx_paths = match dataset {
        DatasetKind::Idx => Some(IdxPaths {
            train_images: require(train_images, "dataset.train_images")?,
            train_labels: require(train_labels, "dataset.train_labels")?,
            test_images: require(test_images, "dataset.test_images")?,
            test_labels: require(test_labels, "dataset.test_labels")?,
        }),
        DatasetKind::Synthetic => {
            check(
                train_images.is_none()
                    && train_labels.is_none()
                    && test_images.is_none()
                    && test_labels.is_none(),
                "dataset.*_images/labels require dataset = idx",
            )?;
            None
        }
    };
    let normalize = match (normalize_mean, normalize_std) {
        (Some(mean), Some(std)) => {
            check(dataset == DatasetKind::Idx, "normalization requires dataset = idx")?;
            check(std > 0.0, "dataset.normalize_std: must be positive")?;
            Some((mean, std))
        }
        (None, None) => None,
        _ => {
            return Err(config_err(
                "dataset.normalize_mean and dataset.normalize_std must be given together",
            ))
        }
    };

    check(classes >= 2, "dataset.classes: need at least 2")?;
    check(dim >= 1 && per_class >= 1 && test_per_class >= 1, "dataset sizes must be positive")?;
    check(spread > 0.0, "dataset.spread: must be positive")?;

    let clients = keys.take_parsed("partition.clients", "integer >= 2")?.unwrap_or(20);
    let alpha = keys.take_parsed("partition.alpha", "positive real")?.unwrap_or(1.0);
    check(clients >= 2, "partition.clients: need at least 2")?;
    check(alpha > 0.0, "partition.alpha: must be positive")?;

    let training = TrainingHyperparams {
        learning_rate: keys
            .take_parsed("train.learning_rate", "positive real")?
            .unwrap_or(0.01),
        batch_size: keys.take_parsed("train.batch_size", "positive integer")?.unwrap_or(128),
        local_epochs: keys.take_parsed("train.local_epochs", "positive integer")?.unwrap_or(10),
        momentum: keys.take_parsed("train.momentum", "real in [0,1)")?.unwrap_or(0.9),
        weight_decay: keys
            .take_parsed("train.weight_decay", "non-negative real")?
            .unwrap_or(1e-4),
    };
    training.validate().map_err(|e| config_err(e.to_string()))?;

    let aggregator = match require(keys.take("aggregator"), "aggregator")?.as_str() {
        "bra" => AggregatorKind::Bra,
        "fedavg" => AggregatorKind::FedAvg,
        "median" => AggregatorKind::Median,
        "trimmed_mean" => AggregatorKind::TrimmedMean,
        "geometric_median" => AggregatorKind::GeometricMedian,
        "multi_krum" => AggregatorKind::MultiKrum,
        other => {
            return Err(config_err(format!(
                "aggregator: `{other}` is not bra|fedavg|median|trimmed_mean|geometric_median|multi_krum"
            )))
        }
    };

    let beta: Option<f64> = keys.take_parsed("aggregator.beta", "real in [0, 0.5)")?;
    let krum_l: Option<usize> = keys.take_parsed("aggregator.krum_l", "integer")?;
    let geomed_tolerance = keys
        .take_parsed("aggregator.geomed_tolerance", "positive real")?
        .unwrap_or(1e-10);
    let geomed_max_iters = keys
        .take_parsed("aggregator.geomed_max_iters", "positive integer")?
        .unwrap_or(1000);

    if aggregator == AggregatorKind::TrimmedMean {
        let beta = require(beta, "aggregator.beta (beta required for trimmed_mean)")?;
        check(
            (0.0..0.5).contains(&beta),
            format!("aggregator.beta: {beta} outside [0, 0.5)"),
        )?;
        let trim = (beta * clients as f64).floor() as usize;
        check(clients > 2 * trim, "aggregator.beta: trims every client")?;
    } else {
        check(beta.is_none(), "aggregator.beta requires aggregator = trimmed_mean")?;
    }
    if aggregator == AggregatorKind::MultiKrum {
        let l = require(krum_l, "aggregator.krum_l (krum_l required for multi_krum)")?;
        check(
            l >= 3 && l <= clients,
            format!("aggregator.krum_l: need 3 <= L <= {clients}, got {l}"),
        )?;
    } else {
        check(krum_l.is_none(), "aggregator.krum_l requires aggregator = multi_krum")?;
    }

    let mut bra = BraSettings::default();
    if let Some(v) = keys.take_parsed("bra.max_iterations", "positive integer")? {
        bra.max_iterations = v;
    }
    if let Some(v) = keys.take_parsed("bra.pi_tolerance", "positive real")? {
        bra.pi_tolerance = v;
    }
    if let Some(v) = keys.take_parsed("bra.sigma2_floor", "positive real")? {
        bra.sigma2_floor = v;
    }
    if let Some(v) = keys.take_parsed("bra.pi_init", "real in (0,1)")? {
        bra.pi_init = v;
    }
    let eps_lo: Option<f64> = keys.take_parsed("bra.epsilon_lo", "real")?;
    let eps_hi: Option<f64> = keys.take_parsed("bra.epsilon_hi", "real")?;
    match (eps_lo, eps_hi) {
        (Some(lo), Some(hi)) => bra.epsilon_clamp = Some((lo, hi)),
        (None, None) => {}
        _ => {
            return Err(config_err(
                "bra.epsilon_lo and bra.epsilon_hi must be given together",
            ))
        }
    }
    bra.validate().map_err(|e| config_err(e.to_string()))?;

    let attack = match keys.take("attack").as_deref() {
        None | Some("none") => None,
        Some("sign_flip") => Some(AttackKind::SignFlip),
        Some("random_update") => Some(AttackKind::RandomUpdate),
        Some("label_flip") => Some(AttackKind::LabelFlip),
        Some("backdoor") => Some(AttackKind::Backdoor),
        Some(other) => {
            return Err(config_err(format!(
                "attack: `{other}` is not none|sign_flip|random_update|label_flip|backdoor"
            )))
        }
    };

    let fraction: Option<f64> = keys.take_parsed("attack.fraction", "real in [0, 0.5)")?;
    let gamma = keys.take_parsed("attack.gamma", "positive real")?.unwrap_or(4.0);
    let source_class = keys.take_parsed("attack.source_class", "class id")?.unwrap_or(0);
    let target_class = keys.take_parsed("attack.target_class", "class id")?.unwrap_or(8);
    let trigger_coordinate: Option<usize> =
        keys.take_parsed("attack.trigger_coordinate", "feature index")?;
    let trigger_value = keys.take_parsed("attack.trigger_value", "real")?.unwrap_or(5.0);
    let attack_start_round = keys
        .take_parsed("attack.start_round", "non-negative integer")?
        .unwrap_or(0);

    let fraction = match attack {
        Some(_) => {
            let fraction = require(fraction, "attack.fraction")?;
            let malicious = malicious_count(fraction, clients);
            check(
                fraction >= 0.0 && 2 * malicious < clients,
                format!("attack.fraction: {fraction} requires M < K/2"),
            )?;
            fraction
        }
        None => {
            check(fraction.is_none(), "attack.fraction requires an attack")?;
            0.0
        }
    };

    let schedule_mode = match keys.take("schedule.mode").as_deref() {
        None | Some("static") => ScheduleMode::Static,
        Some("dynamic") => ScheduleMode::Dynamic,
        Some(other) => {
            return Err(config_err(format!("schedule.mode: `{other}` is not static|dynamic")))
        }
    };
    let active_probability = keys
        .take_parsed("schedule.active_probability", "real in (0,1]")?
        .unwrap_or(0.5);
    check(
        active_probability > 0.0 && active_probability <= 1.0,
        "schedule.active_probability: must lie in (0, 1]",
    )?;
    let schedule_seed: Option<u64> = keys.take_parsed("schedule.seed", "integer")?;

    let rounds = require(
        keys.take_parsed("rounds", "positive integer")?,
        "rounds",
    )?;
    check(rounds >= 1, "rounds: must be positive")?;
    let eval_every = keys.take_parsed("eval_every", "positive integer")?.unwrap_or(1);
    check(eval_every >= 1, "eval_every: must be positive")?;
    let seed = keys.take_parsed("seed", "integer")?.unwrap_or(1);

    if attack == Some(AttackKind::Backdoor) {
        check(
            source_class != target_class,
            "attack.target_class: must differ from attack.source_class",
        )?;
        check(
            target_class < classes && source_class < classes,
            format!("backdoor classes must lie below dataset.classes = {classes}"),
        )?;
        if dataset == DatasetKind::Synthetic {
            let coord = trigger_coordinate.unwrap_or(dim - 1);
            check(
                coord < dim,
                format!("attack.trigger_coordinate: {coord} outside dimension {dim}"),
            )?;
        }
    }

    keys.finish()?;

    Ok(ConfigModel {
        dataset,
        classes,
        dim,
        per_class,
        test_per_class,
        spread,
        idx_paths,
        normalize,
        clients,
        alpha,
        training,
        aggregator,
        beta,
        krum_l,
        geomed_tolerance,
        geomed_max_iters,
        bra,
        attack,
        fraction,
        gamma,
        source_class,
        target_class,
        trigger_coordinate,
        trigger_value,
        attack_start_round,
        schedule_mode,
        active_probability,
        schedule_seed,
        rounds,
        eval_every,
        seed,
    })
}

pub fn malicious_count(fraction: f64, clients: usize) -> usize {
    (fraction * clients as f64 + 1e-9).floor() as usize
}

impl ConfigModel {
    pub fn is_bra(&self) -> bool {
        self.aggregator == AggregatorKind::Bra
    }

    pub fn is_backdoor(&self) -> bool {
        self.attack == Some(AttackKind::Backdoor)
    }

    /// Sweep variant: same template with a different malicious fraction.
    /// A zero fraction disables the attack entirely.
    pub fn with_fraction(&self, fraction: f64) -> Self {
        let mut model = self.clone();
        model.fraction = fraction;
        model
    }

    /// Builds the executable run description.
    pub fn build(&self) -> Result<FedRunConfig, CliError> {
        let dataset = match self.dataset {
            DatasetKind::Synthetic => DatasetSpec::Synthetic {
                classes: self.classes,
                dim: self.dim,
                train_per_class: self.per_class,
                test_per_class: self.test_per_class,
                spread: self.spread,
            },
            DatasetKind::Idx => {
                let paths = self.idx_paths.as_ref().expect("validated at parse");
                DatasetSpec::Idx {
                    train_images: paths.train_images.clone(),
                    train_labels: paths.train_labels.clone(),
                    test_images: paths.test_images.clone(),
                    test_labels: paths.test_labels.clone(),
                    normalize: self.normalize,
                }
            }
        };

        let aggregator = match self.aggregator {
            AggregatorKind::Bra => AggregatorChoice::Bra(self.bra.clone()),
            AggregatorKind::FedAvg => AggregatorChoice::Baseline(BaselineSpec::fedavg()),
            AggregatorKind::Median => AggregatorChoice::Baseline(BaselineSpec::median()),
            AggregatorKind::TrimmedMean => AggregatorChoice::Baseline(BaselineSpec::trimmed_mean(
                self.beta.expect("validated at parse"),
            )),
            AggregatorKind::GeometricMedian => {
                let mut spec = BaselineSpec::geometric_median();
                spec.geomed_tolerance = self.geomed_tolerance;
                spec.geomed_max_iters = self.geomed_max_iters;
                AggregatorChoice::Baseline(spec)
            }
            AggregatorKind::MultiKrum => AggregatorChoice::Baseline(BaselineSpec::multi_krum(
                self.krum_l.expect("validated at parse"),
            )),
        };

        let malicious = malicious_count(self.fraction, self.clients);
        let (attack, schedule) = match (self.attack, malicious) {
            (Some(kind), m) if m > 0 => {
                let trigger = match self.dataset {
                    DatasetKind::Synthetic => TriggerSpec::Coordinate {
                        index: self.trigger_coordinate.unwrap_or(self.dim - 1),
                        value: self.trigger_value,
                    },
                    DatasetKind::Idx => {
                        // Stamp at full intensity in the loader's output
                        // space: 1.0 for [0,1] pixels, standardized when
                        // normalization is configured.
                        let value = match self.normalize {
                            Some((mean, std)) => (1.0 - mean) / std,
                            None => 1.0,
                        };
                        TriggerSpec::Image {
                            offset: (2, 2),
                            stroke_width: 7,
                            stroke_height: 1,
                            horizontal_gap: 1,
                            vertical_gap: 1,
                            value,
                        }
                    }
                };
                let attack = AttackConfig {
                    kind,
                    gamma: self.gamma,
                    source_class: self.source_class,
                    target_class: self.target_class,
                    trigger,
                };
                let schedule = AdversarySchedule {
                    malicious_ids: (0..m).collect(),
                    mode: self.schedule_mode,
                    active_probability: self.active_probability,
                    schedule_seed: self.schedule_seed.unwrap_or(self.seed),
                };
                (Some(attack), Some(schedule))
            }
            _ => (None, None),
        };

        let config = FedRunConfig {
            dataset,
            partition: PartitionConfig {
                clients: self.clients,
                alpha: self.alpha,
            },
            training: self.training,
            aggregator,
            attack,
            schedule,
            attack_start_round: self.attack_start_round,
            rounds: self.rounds,
            eval_every: self.eval_every,
            master_seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "aggregator = bra\ndataset = synthetic\nrounds = 10\n";

    #[test]
    fn minimal_config_applies_paper_defaults() {
        let model = parse_config(MINIMAL).unwrap();
        assert_eq!(model.clients, 20);
        assert_eq!(model.alpha, 1.0);
        assert_eq!(model.training.learning_rate, 0.01);
        assert_eq!(model.training.local_epochs, 10);
        assert_eq!(model.training.batch_size, 128);
        assert_eq!(model.training.momentum, 0.9);
        assert_eq!(model.training.weight_decay, 1e-4);
        assert_eq!(model.rounds, 10);
        assert!(model.build().is_ok());
    }

    #[test]
    fn trimmed_mean_requires_beta() {
        let err = parse_config("aggregator = trimmed_mean\ndataset = synthetic\nrounds = 5\n")
            .unwrap_err();
        assert!(err.to_string().contains("beta required"), "{err}");
    }

    #[test]
    fn oversized_fraction_is_rejected() {
        let text = "aggregator = bra\ndataset = synthetic\nrounds = 5\nattack = sign_flip\nattack.fraction = 0.6\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("requires M < K/2"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(&format!("{MINIMAL}mystery = 1\n")).unwrap_err();
        assert!(err.to_string().contains("unknown key `mystery`"), "{err}");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = parse_config(&format!("{MINIMAL}rounds = 11\n")).unwrap_err();
        assert!(err.to_string().contains("duplicate key `rounds`"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# experiment\naggregator = bra # adaptive\n\ndataset = synthetic\nrounds = 3\n";
        assert!(parse_config(text).is_ok());
    }

    #[test]
    fn zero_fraction_disables_the_attack() {
        let text = format!("{MINIMAL}attack = sign_flip\nattack.fraction = 0.0\n");
        let model = parse_config(&text).unwrap();
        let config = model.build().unwrap();
        assert!(config.attack.is_none());
        assert!(config.schedule.is_none());
    }

    #[test]
    fn fraction_counts_match_client_count() {
        assert_eq!(malicious_count(0.2, 20), 4);
        assert_eq!(malicious_count(0.4, 20), 8);
        assert_eq!(malicious_count(0.45, 20), 9);
        assert_eq!(malicious_count(0.45, 10), 4);
    }

    #[test]
    fn krum_l_bounds_are_validated() {
        let text = "aggregator = multi_krum\naggregator.krum_l = 25\ndataset = synthetic\nrounds = 3\n";
        assert!(parse_config(text).is_err());
        let text = "aggregator = multi_krum\naggregator.krum_l = 12\ndataset = synthetic\nrounds = 3\n";
        assert!(parse_config(text).is_ok());
    }

    #[test]
    fn idx_requires_paths() {
        let err = parse_config("aggregator = bra\ndataset = idx\nrounds = 3\n").unwrap_err();
        assert!(err.to_string().contains("dataset.train_images"), "{err}");
    }
}
