//! Learning noise by gradient descent on a privacy bound plus a utility
//! penalty.

mod adam;
mod loss;
mod model;
mod train;

use serde::{Deserialize, Serialize};

use crate::buckets::{BucketConfig, IndexGrad, REFERENCE_HALF_COUNT};
use crate::error::{Error, Result};
use crate::noise::GridSpec;
use crate::worst_case::Scenario;

pub use adam::{Adam, AdamSettings};
pub use loss::{total_loss, utility_grad, utility_loss, LossParts, LossValue};
pub use model::{forward_tape, model_backward, model_forward, model_log_pmf, ModelTape, ParamGrad, SigmoidStackParams};
pub use train::{reference_delta, train, EpochRecord, TrainResult};

/// Bound minimised during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accountant {
    Ma,
    Adp,
    Pdp,
}

impl Accountant {
    pub fn name(&self) -> &'static str {
        match self {
            Accountant::Ma => "ma",
            Accountant::Adp => "adp",
            Accountant::Pdp => "pdp",
        }
    }
}

/// Which direction(s) of the pair enter the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainDirection {
    #[default]
    Ab,
    Ba,
    /// The larger of the two, evaluated every epoch.
    Max,
}

/// `w_t = max(w_start / 2^{t/γ}, w_min)`; a constant `w_start` when decay is
/// off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSchedule {
    pub start: f64,
    pub halving_period: f64,
    pub floor: f64,
    #[serde(default = "yes")]
    pub decay: bool,
}

fn yes() -> bool {
    true
}

impl Default for WeightSchedule {
    fn default() -> Self {
        WeightSchedule {
            start: 0.5,
            halving_period: 2500.0,
            floor: 1e-7,
            decay: true,
        }
    }
}

impl WeightSchedule {
    pub fn weight(&self, epoch: usize) -> f64 {
        if !self.decay {
            return self.start;
        }
        (self.start / 2f64.powf(epoch as f64 / self.halving_period)).max(self.floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub grid: GridSpec,
    pub scenario: Scenario,
    pub accountant: Accountant,
    pub utility_order: u8,
    pub eps: f64,
    pub compositions: u32,
    pub epochs: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    #[serde(default)]
    pub weight: WeightSchedule,
    pub buckets: BucketConfig,
    /// Number of sigmoids is `sigmoids + 1`.
    pub sigmoids: usize,
    pub slope: f64,
    pub seed: u64,
    #[serde(default)]
    pub direction: TrainDirection,
    #[serde(default)]
    pub index_grad: IndexGrad,
    #[serde(default)]
    pub adam: AdamSettings,
    /// Buckets per side of the post-training reference evaluation.
    #[serde(default = "reference_half_count")]
    pub reference_half_count: usize,
}

fn reference_half_count() -> usize {
    REFERENCE_HALF_COUNT
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.scenario.validate(&self.grid)?;
        self.buckets.validate()?;
        let positive = [
            ("eps", self.eps),
            ("learning_rate", self.learning_rate),
            ("lr_decay", self.lr_decay),
            ("slope", self.slope),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !matches!(self.utility_order, 1 | 2) {
            return Err(Error::invalid(format!(
                "utility_order must be 1 or 2, got {}",
                self.utility_order
            )));
        }
        if self.compositions < 1 || self.epochs < 1 || self.sigmoids < 1 {
            return Err(Error::invalid("compositions, epochs and sigmoids must be at least 1"));
        }
        let w = &self.weight;
        if !(w.start >= 0.0 && w.floor >= 0.0 && w.halving_period > 0.0) {
            return Err(Error::invalid("utility weight schedule must be non-negative"));
        }
        if self.reference_half_count < 1 {
            return Err(Error::invalid("reference_half_count must be at least 1"));
        }
        Ok(())
    }
}
