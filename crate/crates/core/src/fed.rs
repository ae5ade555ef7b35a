//! AP-side federated averaging for the learned-access stations.
//!
//! Every period (counted in successful transmissions or in slots) the AP
//! collects a snapshot of each station's weights, averages them parameter
//! by parameter, broadcasts the mean back into every station's live
//! network, and charges the exchange's air time against elapsed time.
//! Target networks are deliberately not touched by a broadcast: they keep
//! their own replacement schedule, otherwise every round collapses the
//! bootstrap lag and dense reward streams drive training into divergence.
//!
//! The mean is computed per parameter over the sorted values so the result
//! is exactly invariant under station reordering, and it is clamped into
//! the componentwise min/max envelope, which also makes averaging identical
//! models return them bit for bit.

use crate::channel::{us_to_ps, ChannelEngine, EngineError};
use crate::frma::FrmaAgent;
use crate::qnn::QnnWeights;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FedError {
    #[error("aggregation needs at least one model")]
    NoModels,
    #[error("aggregation across different architectures")]
    ArchMismatch,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// What advances the round counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerKind {
    SuccessfulTransmissions,
    Slots,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedConfig {
    /// Rounds fire once per `period` trigger counts.
    pub period: u64,
    pub trigger: TriggerKind,
    /// Channel time charged per round, elapsed but never payload.
    pub overhead_us: f64,
}

impl FedConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.period == 0 {
            return Err("federation period must be at least 1".into());
        }
        if !(self.overhead_us >= 0.0) || !self.overhead_us.is_finite() {
            return Err(format!("overhead_us must be non-negative, got {}", self.overhead_us));
        }
        Ok(())
    }
}

/// Parameter-wise mean of the given models.
pub fn aggregate(models: &[QnnWeights]) -> Result<QnnWeights, FedError> {
    let first = models.first().ok_or(FedError::NoModels)?;
    if models.iter().any(|m| m.arch != first.arch) {
        return Err(FedError::ArchMismatch);
    }
    let mut global = first.clone();
    global.version = models.iter().map(|m| m.version).max().unwrap_or(0);
    if models.len() == 1 {
        return Ok(global);
    }

    let n = models.len() as f64;
    let mut values = vec![0.0f64; models.len()];
    for (layer_idx, layer) in global.layers.iter_mut().enumerate() {
        for (slot_idx, out) in layer.w.iter_mut().chain(layer.b.iter_mut()).enumerate() {
            for (v, model) in values.iter_mut().zip(models) {
                let l = &model.layers[layer_idx];
                *v = if slot_idx < l.w.len() { l.w[slot_idx] } else { l.b[slot_idx - l.w.len()] };
            }
            values.sort_unstable_by(f64::total_cmp);
            let lo = values[0];
            let hi = values[values.len() - 1];
            // Centered mean over sorted values: order-independent and exact
            // when the inputs agree.
            let mean = lo + values.iter().map(|v| v - lo).sum::<f64>() / n;
            *out = mean.clamp(lo, hi);
        }
    }
    Ok(global)
}

/// Install the global model into every station's live network.
pub fn broadcast(global: &QnnWeights, stations: &mut [FrmaAgent]) {
    for station in stations {
        station.install_weights(global.clone());
    }
}

/// Round log entry: `round,slot,elapsed_us,participants`.
#[derive(Debug, Clone, PartialEq)]
pub struct FedRound {
    pub round: u64,
    pub slot: u64,
    pub elapsed_ps: u64,
    pub participants: usize,
}

/// AP-side counter and round executor.
#[derive(Debug, Clone)]
pub struct FedCoordinator {
    cfg: FedConfig,
    rounds_done: u64,
    log: Vec<FedRound>,
}

impl FedCoordinator {
    pub fn new(cfg: FedConfig) -> Self {
        Self { cfg, rounds_done: 0, log: Vec::new() }
    }

    pub fn config(&self) -> &FedConfig {
        &self.cfg
    }

    pub fn rounds_done(&self) -> u64 {
        self.rounds_done
    }

    pub fn log(&self) -> &[FedRound] {
        &self.log
    }

    /// Fire every round the trigger counter has earned since the last call:
    /// aggregate, broadcast, and occupy the channel for the overhead.
    ///
    /// The due count is taken before any overhead is charged, so a slot
    /// trigger with a period shorter than the overhead cannot re-trigger
    /// itself within one call.
    pub fn maybe_round(
        &mut self,
        engine: &mut ChannelEngine,
        stations: &mut [FrmaAgent],
    ) -> Result<u64, FedError> {
        let counter = match self.cfg.trigger {
            TriggerKind::SuccessfulTransmissions => engine.metrics().success_count,
            TriggerKind::Slots => engine.slot(),
        };
        let due = counter / self.cfg.period;
        let mut performed = 0;
        while self.rounds_done < due {
            let snapshots: Vec<QnnWeights> =
                stations.iter().map(FrmaAgent::snapshot_weights).collect();
            let global = aggregate(&snapshots)?;
            broadcast(&global, stations);
            engine.occupy_coordination(us_to_ps(self.cfg.overhead_us))?;
            self.rounds_done += 1;
            performed += 1;
            self.log.push(FedRound {
                round: self.rounds_done,
                slot: engine.slot(),
                elapsed_ps: engine.metrics().elapsed_ps,
                participants: stations.len(),
            });
        }
        Ok(performed)
    }
}
