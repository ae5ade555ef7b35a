//! Learned-access station: keeps a ring of action-observation tuples as the
//! Q-network state, picks actions epsilon-greedily, scores transmit
//! decisions with a geometric Monte Carlo accumulation over matched history
//! entries, and trains online from replay.
//!
//! Reward rules:
//! - after a Wait, the reward is 1 if the following observation was Busy
//!   (the station deferred while someone used the channel) and 0 on Idle;
//!   it never reads the feedback log.
//! - after a Transmit, walk the last M epochs oldest to newest; every epoch
//!   whose pre-decision tuple equals the current one and whose action was a
//!   Transmit with resolved feedback folds into
//!   `reward = eta * reward + 1` on ACK / `- 1` on timeout. Matches whose
//!   feedback has not arrived yet are skipped, so the loop stays well
//!   defined online. The resolving epoch itself is the newest match.
//!
//! Feedback for a transmit lands on the first decision slot after the busy
//! period, which is exactly the next epoch, so every decision produces one
//! experience at the following observation.

use crate::channel::{
    ChannelEngine, Decision, FeedbackKind, Observation, TraceEvent, us_to_ps,
};
use crate::fed::{FedCoordinator, FedError};
use crate::channel::{EngineError, RunMetrics};
use crate::qnn::{Experience, QnnError, QnnWeights, Trainer, TrainerConfig, STATE_DIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// History length M: one (action, observation) tuple is two state entries.
pub const HISTORY_LEN: usize = STATE_DIM / 2;

#[derive(Debug, Error)]
pub enum FrmaError {
    #[error("feedback delivered without a pending transmission")]
    NoPendingTransmit,
    #[error("transmit decision resolved without feedback")]
    MissingFeedback,
    #[error("feedback delivered for a wait decision")]
    UnexpectedFeedback,
    #[error("observation delivered before any decision")]
    ObserveBeforeDecide,
    #[error(transparent)]
    Training(#[from] QnnError),
}

#[derive(Debug, Error)]
pub enum FrmaRunError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("station {station}: {source}")]
    Station { station: usize, source: FrmaError },
    #[error(transparent)]
    Fed(#[from] FedError),
}

/// One action-observation tuple `c = (previous action, observation)`.
pub type ActionObs = (Decision, Observation);

/// The all-zeros padding tuple used before any history exists.
pub const ZERO_TUPLE: ActionObs = (Decision::Wait, Observation::Idle);

pub fn action_index(d: Decision) -> usize {
    match d {
        Decision::Wait => 0,
        Decision::Transmit => 1,
    }
}

fn encode_tuple(t: ActionObs) -> (f64, f64) {
    let a = match t.0 {
        Decision::Wait => 0.0,
        Decision::Transmit => 1.0,
    };
    let o = match t.1 {
        Observation::Idle => 0.0,
        Observation::Busy => 1.0,
    };
    (a, o)
}

/// Flatten the newest `HISTORY_LEN` tuples, oldest first, zero-padded at
/// the front while the episode is young.
pub fn encode_state(history: &[ActionObs]) -> [f64; STATE_DIM] {
    debug_assert!(history.len() <= HISTORY_LEN);
    let mut s = [0.0; STATE_DIM];
    let offset = HISTORY_LEN - history.len();
    for (i, &t) in history.iter().enumerate() {
        let (a, o) = encode_tuple(t);
        s[2 * (offset + i)] = a;
        s[2 * (offset + i) + 1] = o;
    }
    s
}

/// Exploration schedule: decays once per completed training step, clamped
/// at the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub min: f64,
    pub decay: f64,
    current: f64,
    steps: u64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, min: f64, decay: f64) -> Self {
        Self { start, min, decay, current: start.max(min), steps: 0 }
    }

    /// Schedule pinned at the floor, for runs that begin from a converged
    /// checkpoint.
    pub fn at_floor(min: f64, decay: f64) -> Self {
        Self::new(min, min, decay)
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn advance(&mut self) {
        self.steps += 1;
        self.current = (self.current * self.decay).max(self.min);
    }
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self::new(1.0, 0.01, 0.995)
    }
}

/// Reward for a Wait decision, given the observation that followed it.
pub fn reward_wait(next_observation: Observation) -> f64 {
    match next_observation {
        Observation::Busy => 1.0,
        Observation::Idle => 0.0,
    }
}

/// One epoch in the matching window: the tuple visible when the decision
/// was made, the decision, and the feedback once it resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub context: ActionObs,
    pub action: Decision,
    pub outcome: Option<FeedbackKind>,
}

/// Monte Carlo reward for a Transmit decision made in `context`.
pub fn reward_transmit(records: &[EpochRecord], context: ActionObs, eta: f64) -> f64 {
    let mut reward = 0.0;
    for rec in records {
        if rec.context != context || rec.action != Decision::Transmit {
            continue;
        }
        match rec.outcome {
            Some(FeedbackKind::Ack) => reward = eta * reward + 1.0,
            Some(FeedbackKind::Timeout) => reward = eta * reward - 1.0,
            None => {} // not resolved yet
        }
    }
    reward
}

/// Diagnostics row for the optional training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogRow {
    pub step: u64,
    pub epsilon: f64,
    pub loss: f64,
    pub reward_mean: f64,
}

#[derive(Debug, Clone)]
pub struct FrmaAgentConfig {
    pub eta: f64,
    pub trainer: TrainerConfig,
    pub replay_capacity: usize,
    pub epsilon: EpsilonSchedule,
    pub collect_training_log: bool,
}

impl Default for FrmaAgentConfig {
    fn default() -> Self {
        Self {
            eta: 0.9,
            trainer: TrainerConfig::default(),
            replay_capacity: 1000,
            epsilon: EpsilonSchedule::default(),
            collect_training_log: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PrevDecision {
    action: Decision,
    state: [f64; STATE_DIM],
}

#[derive(Debug, Clone, Copy)]
struct PendingTx {
    context: ActionObs,
}

/// One station running the learned access policy.
#[derive(Debug, Clone)]
pub struct FrmaAgent {
    history: Vec<ActionObs>,
    records: Vec<EpochRecord>,
    pending: Vec<PendingTx>,
    prev: Option<PrevDecision>,
    trainer: Trainer,
    epsilon: EpsilonSchedule,
    eta: f64,
    rng: ChaCha12Rng,
    decisions_made: u64,
    train_log: Option<Vec<TrainLogRow>>,
}

impl FrmaAgent {
    pub fn new(weights: QnnWeights, cfg: &FrmaAgentConfig, seed: u64) -> Self {
        Self {
            history: Vec::with_capacity(HISTORY_LEN),
            records: Vec::with_capacity(HISTORY_LEN),
            pending: Vec::new(),
            prev: None,
            trainer: Trainer::new(weights, cfg.trainer, cfg.replay_capacity),
            epsilon: cfg.epsilon,
            eta: cfg.eta,
            rng: ChaCha12Rng::seed_from_u64(seed),
            decisions_made: 0,
            train_log: cfg.collect_training_log.then(Vec::new),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.current()
    }

    pub fn decisions_made(&self) -> u64 {
        self.decisions_made
    }

    pub fn trainer(&self) -> &Trainer {
        &self.trainer
    }

    /// Copy of the live weights, for aggregation or checkpointing.
    pub fn snapshot_weights(&self) -> QnnWeights {
        self.trainer.snapshot()
    }

    /// Replace the live weights; the target schedule, replay memory, and
    /// exploration state stay local.
    pub fn install_weights(&mut self, weights: QnnWeights) {
        self.trainer.install_weights(weights);
    }

    pub fn take_train_log(&mut self) -> Vec<TrainLogRow> {
        self.train_log.take().unwrap_or_default()
    }

    /// Pick the next action at an idle decision slot.
    pub fn decide(&mut self) -> Decision {
        let state = encode_state(&self.history);
        let action = self.select_action(&state);
        let context = self.history.last().copied().unwrap_or(ZERO_TUPLE);
        if self.records.len() == HISTORY_LEN {
            self.records.remove(0);
        }
        self.records.push(EpochRecord { context, action, outcome: None });
        if action == Decision::Transmit {
            self.pending.push(PendingTx { context });
        }
        self.prev = Some(PrevDecision { action, state });
        self.decisions_made += 1;
        action
    }

    fn select_action(&mut self, state: &[f64; STATE_DIM]) -> Decision {
        let explore = self.rng.gen::<f64>() < self.epsilon.current();
        if explore {
            if self.rng.gen::<bool>() {
                Decision::Transmit
            } else {
                Decision::Wait
            }
        } else {
            let q = self.trainer.online().forward_full(state).q;
            // Ties break toward Wait: deterministic and collision-averse.
            if q[1] > q[0] {
                Decision::Transmit
            } else {
                Decision::Wait
            }
        }
    }

    /// Ingest the epoch outcome: extends the history, closes the previous
    /// decision into an experience, and runs one training tick.
    pub fn observe_epoch(
        &mut self,
        observation: Observation,
        feedback: Option<FeedbackKind>,
    ) -> Result<(), FrmaError> {
        let prev = self.prev.take().ok_or(FrmaError::ObserveBeforeDecide)?;

        if self.history.len() == HISTORY_LEN {
            self.history.remove(0);
        }
        self.history.push((prev.action, observation));
        let next_state = encode_state(&self.history);

        let reward = match prev.action {
            Decision::Wait => {
                if feedback.is_some() {
                    return Err(FrmaError::UnexpectedFeedback);
                }
                reward_wait(observation)
            }
            Decision::Transmit => {
                let kind = feedback.ok_or(FrmaError::MissingFeedback)?;
                let pending = if self.pending.is_empty() {
                    return Err(FrmaError::NoPendingTransmit);
                } else {
                    self.pending.remove(0)
                };
                // The newest record is the decision this feedback resolves.
                let rec = self.records.last_mut().expect("record exists for the pending decision");
                debug_assert_eq!(rec.action, Decision::Transmit);
                rec.outcome = Some(kind);
                reward_transmit(&self.records, pending.context, self.eta)
            }
        };

        self.trainer.push(Experience {
            state: prev.state,
            action: action_index(prev.action),
            reward,
            next_state,
        });
        self.training_tick()?;
        Ok(())
    }

    /// One training step when the replay buffer can fill a batch; the
    /// exploration rate decays only when a step actually ran.
    fn training_tick(&mut self) -> Result<(), FrmaError> {
        if let Some(report) = self.trainer.tick(&mut self.rng)? {
            self.epsilon.advance();
            if let Some(log) = &mut self.train_log {
                log.push(TrainLogRow {
                    step: self.trainer.total_steps(),
                    epsilon: self.epsilon.current(),
                    loss: report.loss,
                    reward_mean: report.reward_mean,
                });
            }
        }
        Ok(())
    }
}

/// Stop conditions for [`run_frma`]; at least one bound must be set.
#[derive(Debug, Clone, Copy)]
pub struct FrmaRunLimits {
    pub duration_us: Option<f64>,
    pub max_epochs: Option<u64>,
}

/// Per-window payload snapshot for fairness traces.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSnapshot {
    pub window: u64,
    pub slot: u64,
    pub elapsed_delta_ps: u64,
    pub per_station_delta_ps: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct FrmaRunOutput {
    pub metrics: RunMetrics,
    pub windows: Vec<WindowSnapshot>,
    pub epochs: u64,
}

/// Drive a set of learned-access stations, with optional AP-side federated
/// averaging and optional windowed payload snapshots.
pub fn run_frma(
    engine: &mut ChannelEngine,
    agents: &mut [FrmaAgent],
    mut coordinator: Option<&mut FedCoordinator>,
    limits: &FrmaRunLimits,
    window_slots: Option<u64>,
    mut trace: Option<&mut dyn FnMut(TraceEvent)>,
) -> Result<FrmaRunOutput, FrmaRunError> {
    assert!(
        limits.duration_us.is_some() || limits.max_epochs.is_some(),
        "run needs a duration or an epoch bound"
    );
    let duration_ps = limits.duration_us.map(us_to_ps).unwrap_or(u64::MAX);
    let max_epochs = limits.max_epochs.unwrap_or(u64::MAX);
    let duration_slots = duration_ps / engine.timings().slot_ps;

    let mut windows = Vec::new();
    let mut next_boundary = window_slots.unwrap_or(u64::MAX);
    let mut window_index = 0u64;
    let mut last_payload: Vec<u64> = vec![0; agents.len()];
    let mut last_elapsed = 0u64;

    let mut decisions = vec![Decision::Wait; agents.len()];
    let mut epochs = 0u64;
    while engine.metrics().elapsed_ps < duration_ps && epochs < max_epochs {
        for (d, agent) in decisions.iter_mut().zip(agents.iter_mut()) {
            *d = agent.decide();
        }
        let outcome = engine.step(&decisions)?;
        if let Some(cb) = trace.as_deref_mut() {
            let (kind, stations) = match &outcome.outcome {
                None => (crate::channel::TraceKind::Idle, Vec::new()),
                Some(crate::channel::TxOutcome::Success(s)) => {
                    (crate::channel::TraceKind::Success, vec![*s])
                }
                Some(crate::channel::TxOutcome::Collision(set)) => {
                    (crate::channel::TraceKind::Collision, set.clone())
                }
            };
            cb(TraceEvent { slot: engine.slot(), kind, stations, elapsed_ps: engine.metrics().elapsed_ps });
        }
        for (id, agent) in agents.iter_mut().enumerate() {
            let fb = outcome.feedbacks.iter().find(|f| f.station == id).map(|f| f.kind);
            agent
                .observe_epoch(outcome.observation, fb)
                .map_err(|source| FrmaRunError::Station { station: id, source })?;
        }
        if let Some(coord) = coordinator.as_deref_mut() {
            coord.maybe_round(engine, agents)?;
        }
        epochs += 1;

        if let Some(window) = window_slots {
            while engine.slot() >= next_boundary && next_boundary <= duration_slots {
                window_index += 1;
                let metrics = engine.metrics();
                let deltas: Vec<u64> = metrics
                    .per_station_payload_ps
                    .iter()
                    .zip(&last_payload)
                    .map(|(now, before)| now - before)
                    .collect();
                windows.push(WindowSnapshot {
                    window: window_index,
                    slot: next_boundary,
                    elapsed_delta_ps: metrics.elapsed_ps - last_elapsed,
                    per_station_delta_ps: deltas,
                });
                last_payload.copy_from_slice(&metrics.per_station_payload_ps);
                last_elapsed = metrics.elapsed_ps;
                next_boundary += window;
            }
        }
    }

    Ok(FrmaRunOutput { metrics: engine.metrics().clone(), windows, epochs })
}
