//! Adversarial client behaviors and attack scheduling.
//!
//! Model-poisoning attacks (sign flip, random update) transform the
//! honest update delta `w_local - w_global`; the simulator re-adds the
//! global vector before submission. Data-poisoning attacks (label flip,
//! backdoor) rewrite the local training data instead.

use crate::error::{Error, Result};
use crate::fedsim::data::Dataset;
use crate::rng::{keyed_f64, DetRng};
use crate::vector::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    SignFlip,
    RandomUpdate,
    LabelFlip,
    Backdoor,
}

/// Trigger stamped onto backdoored samples.
#[derive(Debug, Clone, Copy)]
pub enum TriggerSpec {
    /// Vector data: one designated coordinate forced to a fixed value.
    Coordinate { index: usize, value: f64 },
    /// Image data: a double-equal-sign pattern of four strokes, two per
    /// row, each `stroke_width` x `stroke_height` pixels, separated by
    /// the given gaps and anchored at `offset` from the top-left corner.
    Image {
        offset: (usize, usize),
        stroke_width: usize,
        stroke_height: usize,
        horizontal_gap: usize,
        vertical_gap: usize,
        value: f64,
    },
}

impl TriggerSpec {
    pub fn coordinate(index: usize) -> Self {
        TriggerSpec::Coordinate { index, value: 5.0 }
    }

    pub fn image_default() -> Self {
        TriggerSpec::Image {
            offset: (2, 2),
            stroke_width: 7,
            stroke_height: 1,
            horizontal_gap: 1,
            vertical_gap: 1,
            value: 1.0,
        }
    }

    /// Stamps the trigger onto one feature row.
    pub fn stamp(&self, features: &mut [f64], image_dims: Option<(usize, usize)>) -> Result<()> {
        match *self {
            TriggerSpec::Coordinate { index, value } => {
                if index >= features.len() {
                    return Err(Error::TriggerOutOfBounds {
                        reason: format!(
                            "coordinate {index} outside dimension {}",
                            features.len()
                        ),
                    });
                }
                features[index] = value;
                Ok(())
            }
            TriggerSpec::Image {
                offset: (row0, col0),
                stroke_width,
                stroke_height,
                horizontal_gap,
                vertical_gap,
                value,
            } => {
                let (rows, cols) = image_dims.ok_or_else(|| Error::TriggerOutOfBounds {
                    reason: "image trigger on non-image data".into(),
                })?;
                let height = 2 * stroke_height + vertical_gap;
                let width = 2 * stroke_width + horizontal_gap;
                if row0 + height > rows || col0 + width > cols {
                    return Err(Error::TriggerOutOfBounds {
                        reason: format!(
                            "{width}x{height} pattern at ({row0},{col0}) outside {rows}x{cols}"
                        ),
                    });
                }
                for stroke_row in 0..2 {
                    for stroke_col in 0..2 {
                        let top = row0 + stroke_row * (stroke_height + vertical_gap);
                        let left = col0 + stroke_col * (stroke_width + horizontal_gap);
                        for r in top..top + stroke_height {
                            for c in left..left + stroke_width {
                                features[r * cols + c] = value;
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// Attack family plus its knobs.
#[derive(Debug, Clone)]
pub struct AttackConfig {
    pub kind: AttackKind,
    /// Scale of sign-flip and random-update attacks.
    pub gamma: f64,
    pub source_class: usize,
    pub target_class: usize,
    pub trigger: TriggerSpec,
}

impl AttackConfig {
    pub fn new(kind: AttackKind) -> Self {
        Self {
            kind,
            gamma: 4.0,
            source_class: 0,
            target_class: 8,
            trigger: TriggerSpec::coordinate(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: "must be positive".into(),
            });
        }
        if self.source_class == self.target_class {
            return Err(Error::InvalidParameter {
                name: "target_class",
                reason: "source and target class must differ".into(),
            });
        }
        Ok(())
    }
}

/// Whether a malicious client attacks every round or intermittently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    Static,
    Dynamic,
}

/// Which clients are compromised and when they act.
#[derive(Debug, Clone)]
pub struct AdversarySchedule {
    /// Sorted, deduplicated compromised client ids.
    pub malicious_ids: Vec<usize>,
    pub mode: ScheduleMode,
    /// Per-round activation probability in dynamic mode.
    pub active_probability: f64,
    pub schedule_seed: u64,
}

impl AdversarySchedule {
    pub fn new(mut malicious_ids: Vec<usize>, mode: ScheduleMode, schedule_seed: u64) -> Self {
        malicious_ids.sort_unstable();
        malicious_ids.dedup();
        Self {
            malicious_ids,
            mode,
            active_probability: 0.5,
            schedule_seed,
        }
    }

    pub fn validate(&self, clients: usize) -> Result<()> {
        if let Some(&id) = self.malicious_ids.iter().find(|&&id| id >= clients) {
            return Err(Error::InvalidParameter {
                name: "malicious_ids",
                reason: format!("client id {id} outside 0..{clients}"),
            });
        }
        if 2 * self.malicious_ids.len() >= clients {
            return Err(Error::TooManyMalicious {
                malicious: self.malicious_ids.len(),
                clients,
            });
        }
        if !(self.active_probability > 0.0 && self.active_probability <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "active_probability",
                reason: "must lie in (0, 1]".into(),
            });
        }
        Ok(())
    }
}

/// Sign-flip transform on an update delta: `-gamma * delta`.
pub fn sign_flip(delta: &ParamVector, gamma: f64) -> Result<ParamVector> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: "must be positive".into(),
        });
    }
    ParamVector::new(delta.values().iter().map(|v| -gamma * v).collect())
}

/// Random-update transform: replaces the delta with Gaussian noise whose
/// per-coordinate variance is `gamma ||delta||^2 / d`, so the expected
/// squared norm of the noise is `gamma ||delta||^2` (a plausible update
/// magnitude). A zero honest delta yields zero noise.
pub fn random_update(delta: &ParamVector, gamma: f64, rng: &mut DetRng) -> Result<ParamVector> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: "must be positive".into(),
        });
    }
    let d = delta.dim() as f64;
    let sigma = (gamma * delta.squared_norm() / d).sqrt();
    ParamVector::new((0..delta.dim()).map(|_| sigma * rng.normal()).collect())
}

/// Cyclic label shift `y -> (y + 1) mod classes`.
pub fn flip_labels(labels: &[usize], classes: usize) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|&y| {
            if y >= classes {
                Err(Error::LabelOutOfRange { label: y, classes })
            } else {
                Ok((y + 1) % classes)
            }
        })
        .collect()
}

/// A poisoned copy of a training set plus the rows that were altered.
#[derive(Debug, Clone)]
pub struct BackdoorDataset {
    pub data: Dataset,
    /// Indices (in `data`) of the triggered, relabeled samples.
    pub poisoned: Vec<usize>,
}

/// Stamps the trigger on every source-class sample and relabels it to the
/// target class; other samples are untouched.
pub fn apply_backdoor(dataset: &Dataset, config: &AttackConfig) -> Result<BackdoorDataset> {
    config.validate()?;
    if config.target_class >= dataset.classes() {
        return Err(Error::LabelOutOfRange {
            label: config.target_class,
            classes: dataset.classes(),
        });
    }
    let mut data = dataset.clone();
    let mut poisoned = Vec::new();
    for i in 0..data.len() {
        if data.label(i) == config.source_class {
            let dims = data.image_dims;
            config.trigger.stamp(data.feature_row_mut(i), dims)?;
            data.set_label(i, config.target_class)?;
            poisoned.push(i);
        }
    }
    if poisoned.is_empty() {
        return Err(Error::NoSourceClassSamples {
            class: config.source_class,
        });
    }
    Ok(BackdoorDataset { data, poisoned })
}

/// Evaluation set for the attack success rate: every source-class test
/// sample, triggered and relabeled to the target class.
pub fn triggered_eval_set(testset: &Dataset, config: &AttackConfig) -> Result<Dataset> {
    let source_rows: Vec<usize> = (0..testset.len())
        .filter(|&i| testset.label(i) == config.source_class)
        .collect();
    if source_rows.is_empty() {
        return Err(Error::NoSourceClassSamples {
            class: config.source_class,
        });
    }
    let backdoored = apply_backdoor(&testset.select(&source_rows), config)?;
    Ok(backdoored.data)
}

/// Active malicious clients for a round. Static schedules return the full
/// compromised set; dynamic schedules draw an independent Bernoulli per
/// `(seed, round, client)` key, so the on/off matrix is reproducible and
/// independent of evaluation order.
pub fn active_malicious(round: usize, schedule: &AdversarySchedule) -> Vec<usize> {
    match schedule.mode {
        ScheduleMode::Static => schedule.malicious_ids.clone(),
        ScheduleMode::Dynamic => schedule
            .malicious_ids
            .iter()
            .copied()
            .filter(|&client| {
                keyed_f64(schedule.schedule_seed, round as u64, client as u64)
                    < schedule.active_probability
            })
            .collect(),
    }
}
