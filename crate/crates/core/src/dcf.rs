//! DCF baseline station: binary exponential backoff over idle decision
//! slots.
//!
//! Inter-frame spaces are folded into the engine's busy durations, so the
//! only thing a station does at an idle slot is count its backoff down and
//! transmit when it hits zero. That is exactly the abstraction under which
//! the closed-form model of [`crate::analytic`] is stated.

use crate::analytic::{channel_times, AccessScheme, BackoffParams, PhyTimings};
use crate::channel::{Decision, FeedbackKind, Observation, StationPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Backoff bookkeeping for one frame in flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BebState {
    pub stage: u32,
    pub retries: u32,
    pub backoff_counter: u32,
    pub cw_current: u32,
}

/// A saturated DCF station: always has a frame pending, draws a fresh
/// backoff after every resolution.
#[derive(Debug, Clone)]
pub struct BebAgent {
    params: BackoffParams,
    state: BebState,
    rng: ChaCha12Rng,
    transmit_decisions: u64,
    decision_slots: u64,
}

impl BebAgent {
    pub fn new(params: BackoffParams, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let cw = params.cw_at_stage(0);
        let state = BebState {
            stage: 0,
            retries: 0,
            backoff_counter: rng.gen_range(0..=cw),
            cw_current: cw,
        };
        Self { params, state, rng, transmit_decisions: 0, decision_slots: 0 }
    }

    pub fn state(&self) -> &BebState {
        &self.state
    }

    /// Fraction of idle decision slots at which this station transmitted;
    /// the empirical counterpart of the model's tau.
    pub fn transmit_rate(&self) -> f64 {
        if self.decision_slots == 0 {
            return 0.0;
        }
        self.transmit_decisions as f64 / self.decision_slots as f64
    }

    pub fn decision_slots(&self) -> u64 {
        self.decision_slots
    }

    fn on_idle_slot(&mut self) -> Decision {
        self.decision_slots += 1;
        if self.state.backoff_counter == 0 {
            self.transmit_decisions += 1;
            Decision::Transmit
        } else {
            self.state.backoff_counter -= 1;
            Decision::Wait
        }
    }

    fn on_feedback(&mut self, kind: FeedbackKind) {
        match kind {
            FeedbackKind::Ack => self.reset_for_fresh_frame(),
            FeedbackKind::Timeout => {
                self.state.retries += 1;
                if self.state.retries > self.params.retry_limit {
                    // Frame dropped; saturation queues the next one.
                    self.reset_for_fresh_frame();
                } else {
                    self.state.stage = (self.state.stage + 1).min(self.params.m);
                    self.state.cw_current = self.params.cw_at_stage(self.state.stage);
                    self.state.backoff_counter = self.rng.gen_range(0..=self.state.cw_current);
                }
            }
        }
    }

    fn reset_for_fresh_frame(&mut self) {
        self.state.stage = 0;
        self.state.retries = 0;
        self.state.cw_current = self.params.cw_at_stage(0);
        self.state.backoff_counter = self.rng.gen_range(0..=self.state.cw_current);
    }
}

impl StationPolicy for BebAgent {
    fn decide(&mut self) -> Decision {
        self.on_idle_slot()
    }

    fn observe(&mut self, _observation: Observation, feedback: Option<FeedbackKind>) {
        // Backoff counters freeze during busy periods by construction: the
        // engine only solicits decisions at idle slots.
        if let Some(kind) = feedback {
            self.on_feedback(kind);
        }
    }
}

/// Busy durations for a DCF scheme; same source as the analytic model.
pub fn busy_durations(pt: &PhyTimings, scheme: AccessScheme) -> (f64, f64) {
    channel_times(pt, scheme)
}
