//! Slot-synchronous shared-medium engine.
//!
//! One decision epoch at a time: while the channel is idle every station is
//! asked for a decision, the engine resolves idle/success/collision, occupies
//! the channel for the scheme's busy duration, and schedules ACK/timeout
//! feedback for the first decision slot after the busy period.
//!
//! All engine time is integer picoseconds so that time conservation holds
//! exactly: `elapsed = idle_slots*sigma + successes*T_s + collisions*T_c +
//! coordination overhead`, with no float accumulation drift. Metrics convert
//! back to microseconds only at the reporting boundary.

use crate::analytic::{channel_times, AccessScheme, PhyTimings};
use thiserror::Error;

pub type StationId = usize;

/// Picoseconds per microsecond; engine durations are u64 picoseconds.
pub const PS_PER_US: f64 = 1e6;

pub fn us_to_ps(us: f64) -> u64 {
    (us * PS_PER_US).round() as u64
}

pub fn ps_to_us(ps: u64) -> f64 {
    ps as f64 / PS_PER_US
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("decision solicited while channel busy at slot {slot}")]
    DecisionWhileBusy { slot: u64 },
    #[error("expected decisions for {expected} stations, got {got}")]
    StationCountMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("fairness undefined: all per-station throughputs are zero")]
    UndefinedFairness,
    #[error("fairness needs at least one station")]
    NoStations,
    #[error("throughput values must be non-negative, got {0}")]
    NegativeValue(f64),
    #[error("elapsed time is zero")]
    NoElapsedTime,
}

/// Per-epoch decision of one station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Wait,
    Transmit,
}

/// Shared channel observation for one decision epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    Idle,
    Busy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackKind {
    Ack,
    Timeout,
}

/// What the channel carried during a busy period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TxOutcome {
    Success(StationId),
    /// At least two stations; sorted ascending.
    Collision(Vec<StationId>),
}

/// AP feedback for one transmit decision, delivered on the first decision
/// slot after the busy period ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feedback {
    pub station: StationId,
    pub decision_slot: u64,
    pub delivery_slot: u64,
    pub kind: FeedbackKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelState {
    Idle,
    Busy { remaining_slots: u64, outcome: TxOutcome },
}

/// Busy durations and payload credit for the engine, in picoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineTimings {
    pub slot_ps: u64,
    pub success_ps: u64,
    pub collision_ps: u64,
    /// Payload air time credited to the sender on success.
    pub payload_ps: u64,
}

impl EngineTimings {
    /// Timings for a DCF scheme, shared with the analytic model.
    pub fn for_scheme(pt: &PhyTimings, scheme: AccessScheme) -> Self {
        let (t_s, t_c) = channel_times(pt, scheme);
        Self {
            slot_ps: us_to_ps(pt.slot_us),
            success_ps: us_to_ps(t_s),
            collision_ps: us_to_ps(t_c),
            payload_ps: us_to_ps(pt.payload_us()),
        }
    }

    /// Timings for the learned-access stations: no inter-frame spaces, the
    /// sender holds the channel for header + payload and then the ACK
    /// window, and a collision costs the same period because the timeout is
    /// only declared once the ACK window has passed.
    pub fn for_learned_access(pt: &PhyTimings) -> Self {
        let t = pt.header_us() + pt.payload_us() + pt.prop_delay_us + pt.ack_us + pt.prop_delay_us;
        Self {
            slot_ps: us_to_ps(pt.slot_us),
            success_ps: us_to_ps(t),
            collision_ps: us_to_ps(t),
            payload_ps: us_to_ps(pt.payload_us()),
        }
    }

    pub fn busy_slots(&self, duration_ps: u64) -> u64 {
        duration_ps.div_ceil(self.slot_ps)
    }
}

/// Counters accumulated over a run. Time fields are picoseconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunMetrics {
    pub per_station_payload_ps: Vec<u64>,
    pub success_count: u64,
    pub collision_count: u64,
    pub idle_slots: u64,
    pub elapsed_ps: u64,
    pub coordination_rounds: u64,
    pub coordination_ps: u64,
}

impl RunMetrics {
    fn new(n_stations: usize) -> Self {
        Self {
            per_station_payload_ps: vec![0; n_stations],
            success_count: 0,
            collision_count: 0,
            idle_slots: 0,
            elapsed_ps: 0,
            coordination_rounds: 0,
            coordination_ps: 0,
        }
    }

    pub fn elapsed_us(&self) -> f64 {
        ps_to_us(self.elapsed_ps)
    }

    pub fn per_station_payload_us(&self) -> Vec<f64> {
        self.per_station_payload_ps.iter().map(|&p| ps_to_us(p)).collect()
    }
}

/// Aggregate and per-station throughput in Mb/s.
pub fn throughput(metrics: &RunMetrics, pt: &PhyTimings) -> Result<(f64, Vec<f64>), MetricsError> {
    if metrics.elapsed_ps == 0 {
        return Err(MetricsError::NoElapsedTime);
    }
    let elapsed = metrics.elapsed_ps as f64;
    let per_station: Vec<f64> = metrics
        .per_station_payload_ps
        .iter()
        .map(|&p| p as f64 / elapsed * pt.data_rate_mbps)
        .collect();
    Ok((per_station.iter().sum(), per_station))
}

/// Jain fairness index: (sum x)^2 / (n * sum x^2), 1 under perfect fairness
/// and 1/n under monopoly.
pub fn jain_index(per_station: &[f64]) -> Result<f64, MetricsError> {
    if per_station.is_empty() {
        return Err(MetricsError::NoStations);
    }
    if let Some(&bad) = per_station.iter().find(|&&x| x < 0.0 || !x.is_finite()) {
        return Err(MetricsError::NegativeValue(bad));
    }
    let sum: f64 = per_station.iter().sum();
    let sum_sq: f64 = per_station.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return Err(MetricsError::UndefinedFairness);
    }
    Ok(sum * sum / (per_station.len() as f64 * sum_sq))
}

/// What one decision epoch produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    pub observation: Observation,
    pub outcome: Option<TxOutcome>,
    pub feedbacks: Vec<Feedback>,
}

/// Trace record for the optional per-slot log.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub slot: u64,
    pub kind: TraceKind,
    pub stations: Vec<StationId>,
    pub elapsed_ps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Idle,
    Success,
    Collision,
}

impl TraceKind {
    pub fn label(&self) -> &'static str {
        match self {
            TraceKind::Idle => "idle",
            TraceKind::Success => "success",
            TraceKind::Collision => "collision",
        }
    }
}

/// The shared medium. Owns all per-run mutable state; independent instances
/// may run on different threads.
#[derive(Debug, Clone)]
pub struct ChannelEngine {
    timings: EngineTimings,
    n_stations: usize,
    state: ChannelState,
    slot: u64,
    metrics: RunMetrics,
}

impl ChannelEngine {
    pub fn new(timings: EngineTimings, n_stations: usize) -> Self {
        Self {
            timings,
            n_stations,
            state: ChannelState::Idle,
            slot: 0,
            metrics: RunMetrics::new(n_stations),
        }
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn state(&self) -> &ChannelState {
        &self.state
    }

    pub fn timings(&self) -> &EngineTimings {
        &self.timings
    }

    pub fn metrics(&self) -> &RunMetrics {
        &self.metrics
    }

    pub fn into_metrics(self) -> RunMetrics {
        self.metrics
    }

    /// Resolve one decision epoch.
    ///
    /// With no transmitter a single idle slot elapses. Otherwise the channel
    /// goes busy for the scheme's success or collision duration (occupying
    /// `ceil(duration / slot)` slots), the busy period is consumed, and the
    /// per-transmitter feedback comes back stamped with the slot at which the
    /// channel is next decidable.
    pub fn step(&mut self, decisions: &[Decision]) -> Result<EpochOutcome, EngineError> {
        if let ChannelState::Busy { .. } = self.state {
            return Err(EngineError::DecisionWhileBusy { slot: self.slot });
        }
        if decisions.len() != self.n_stations {
            return Err(EngineError::StationCountMismatch {
                expected: self.n_stations,
                got: decisions.len(),
            });
        }

        let transmitters: Vec<StationId> = decisions
            .iter()
            .enumerate()
            .filter_map(|(i, d)| (*d == Decision::Transmit).then_some(i))
            .collect();

        match transmitters.len() {
            0 => {
                self.slot += 1;
                self.metrics.idle_slots += 1;
                self.metrics.elapsed_ps += self.timings.slot_ps;
                Ok(EpochOutcome { observation: Observation::Idle, outcome: None, feedbacks: Vec::new() })
            }
            1 => {
                let station = transmitters[0];
                let outcome = TxOutcome::Success(station);
                self.begin_busy(self.timings.success_ps, outcome.clone());
                self.metrics.success_count += 1;
                self.metrics.per_station_payload_ps[station] += self.timings.payload_ps;
                let feedbacks = self.finish_busy(FeedbackKind::Ack);
                Ok(EpochOutcome { observation: Observation::Busy, outcome: Some(outcome), feedbacks })
            }
            _ => {
                let outcome = TxOutcome::Collision(transmitters);
                self.begin_busy(self.timings.collision_ps, outcome.clone());
                self.metrics.collision_count += 1;
                let feedbacks = self.finish_busy(FeedbackKind::Timeout);
                Ok(EpochOutcome { observation: Observation::Busy, outcome: Some(outcome), feedbacks })
            }
        }
    }

    fn begin_busy(&mut self, duration_ps: u64, outcome: TxOutcome) {
        self.state = ChannelState::Busy {
            remaining_slots: self.timings.busy_slots(duration_ps),
            outcome,
        };
        self.metrics.elapsed_ps += duration_ps;
    }

    /// Consume the pending busy period and emit feedback stamped with the
    /// first decidable slot after it.
    fn finish_busy(&mut self, kind: FeedbackKind) -> Vec<Feedback> {
        let ChannelState::Busy { remaining_slots, outcome } = std::mem::replace(&mut self.state, ChannelState::Idle)
        else {
            unreachable!("finish_busy without a busy period");
        };
        let decision_slot = self.slot;
        self.slot += remaining_slots;
        let delivery_slot = self.slot;
        let stations: Vec<StationId> = match &outcome {
            TxOutcome::Success(s) => vec![*s],
            TxOutcome::Collision(set) => set.clone(),
        };
        stations
            .into_iter()
            .map(|station| Feedback { station, decision_slot, delivery_slot, kind })
            .collect()
    }

    /// Occupy the channel for a coordination exchange: counts toward elapsed
    /// time but never toward payload.
    pub fn occupy_coordination(&mut self, duration_ps: u64) -> Result<(), EngineError> {
        if let ChannelState::Busy { .. } = self.state {
            return Err(EngineError::DecisionWhileBusy { slot: self.slot });
        }
        self.slot += self.timings.busy_slots(duration_ps);
        self.metrics.elapsed_ps += duration_ps;
        self.metrics.coordination_rounds += 1;
        self.metrics.coordination_ps += duration_ps;
        Ok(())
    }

    fn trace_event(&self, outcome: &EpochOutcome) -> TraceEvent {
        let (kind, stations) = match &outcome.outcome {
            None => (TraceKind::Idle, Vec::new()),
            Some(TxOutcome::Success(s)) => (TraceKind::Success, vec![*s]),
            Some(TxOutcome::Collision(set)) => (TraceKind::Collision, set.clone()),
        };
        TraceEvent { slot: self.slot, kind, stations, elapsed_ps: self.metrics.elapsed_ps }
    }
}

/// A station attached to the engine's decision loop.
pub trait StationPolicy {
    /// Called at every idle decision slot.
    fn decide(&mut self) -> Decision;

    /// Called once per epoch with the shared observation and, if this
    /// station transmitted, the resolved feedback.
    fn observe(&mut self, observation: Observation, feedback: Option<FeedbackKind>);
}

/// Drive a set of policies until `duration_us` of channel time has elapsed.
///
/// Purely deterministic given the policies' internal state: the same agents
/// and engine produce the same metric stream every run.
pub fn run_stations(
    engine: &mut ChannelEngine,
    stations: &mut [Box<dyn StationPolicy>],
    duration_us: f64,
    mut trace: Option<&mut dyn FnMut(TraceEvent)>,
) -> Result<RunMetrics, EngineError> {
    let duration_ps = us_to_ps(duration_us);
    let mut decisions = vec![Decision::Wait; stations.len()];
    while engine.metrics.elapsed_ps < duration_ps {
        for (slot, station) in decisions.iter_mut().zip(stations.iter_mut()) {
            *slot = station.decide();
        }
        let outcome = engine.step(&decisions)?;
        if let Some(cb) = trace.as_deref_mut() {
            cb(engine.trace_event(&outcome));
        }
        for (id, station) in stations.iter_mut().enumerate() {
            let fb = outcome
                .feedbacks
                .iter()
                .find(|f| f.station == id)
                .map(|f| f.kind);
            station.observe(outcome.observation, fb);
        }
    }
    Ok(engine.metrics.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::BackoffParams;

    fn default_engine(n: usize) -> ChannelEngine {
        let pt = PhyTimings::default();
        ChannelEngine::new(EngineTimings::for_scheme(&pt, AccessScheme::Basic), n)
    }

    struct Always(Decision);
    impl StationPolicy for Always {
        fn decide(&mut self) -> Decision {
            self.0
        }
        fn observe(&mut self, _: Observation, _: Option<FeedbackKind>) {}
    }

    #[test]
    fn idle_epoch_advances_one_slot() {
        let mut engine = default_engine(5);
        let out = engine.step(&[Decision::Wait; 5]).unwrap();
        assert_eq!(out.observation, Observation::Idle);
        assert!(out.feedbacks.is_empty());
        assert_eq!(engine.metrics().idle_slots, 1);
        assert_eq!(engine.slot(), 1);
        assert_eq!(engine.metrics().elapsed_ps, engine.timings().slot_ps);
    }

    #[test]
    fn single_transmitter_succeeds_with_ack_after_busy_period() {
        let mut engine = default_engine(5);
        let mut decisions = [Decision::Wait; 5];
        decisions[3] = Decision::Transmit;
        let out = engine.step(&decisions).unwrap();
        assert_eq!(out.observation, Observation::Busy);
        assert_eq!(out.outcome, Some(TxOutcome::Success(3)));
        assert_eq!(out.feedbacks.len(), 1);
        let fb = &out.feedbacks[0];
        assert_eq!(fb.station, 3);
        assert_eq!(fb.kind, FeedbackKind::Ack);
        assert_eq!(fb.decision_slot, 0);
        // T_s^bas = 2190.2 us over 10 us slots -> 220 slots.
        assert_eq!(fb.delivery_slot, 220);
        assert_eq!(engine.metrics().success_count, 1);
        let payload = engine.timings().payload_ps;
        assert_eq!(engine.metrics().per_station_payload_ps[3], payload);
        assert_eq!(engine.metrics().per_station_payload_ps[0], 0);
    }

    #[test]
    fn two_transmitters_collide_and_both_get_timeouts() {
        let mut engine = default_engine(5);
        let mut decisions = [Decision::Wait; 5];
        decisions[1] = Decision::Transmit;
        decisions[4] = Decision::Transmit;
        let out = engine.step(&decisions).unwrap();
        assert_eq!(out.outcome, Some(TxOutcome::Collision(vec![1, 4])));
        assert_eq!(out.feedbacks.len(), 2);
        for fb in &out.feedbacks {
            assert_eq!(fb.kind, FeedbackKind::Timeout);
            assert!(fb.delivery_slot > fb.decision_slot);
        }
        assert_eq!(engine.metrics().collision_count, 1);
        assert_eq!(engine.metrics().success_count, 0);
    }

    #[test]
    fn step_while_busy_is_a_contract_violation() {
        let mut engine = default_engine(2);
        engine.state = ChannelState::Busy { remaining_slots: 3, outcome: TxOutcome::Success(0) };
        let err = engine.step(&[Decision::Wait; 2]).unwrap_err();
        assert!(matches!(err, EngineError::DecisionWhileBusy { .. }));
    }

    #[test]
    fn step_requires_every_station() {
        let mut engine = default_engine(3);
        let err = engine.step(&[Decision::Wait; 2]).unwrap_err();
        assert!(matches!(err, EngineError::StationCountMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn all_wait_run_counts_idle_slots_only() {
        let mut engine = default_engine(4);
        let mut agents: Vec<Box<dyn StationPolicy>> =
            (0..4).map(|_| Box::new(Always(Decision::Wait)) as Box<dyn StationPolicy>).collect();
        let metrics = run_stations(&mut engine, &mut agents, 100.0, None).unwrap();
        assert_eq!(metrics.idle_slots, 10);
        assert_eq!(metrics.success_count + metrics.collision_count, 0);
        assert_eq!(metrics.elapsed_ps, 10 * engine.timings().slot_ps);
    }

    #[test]
    fn lone_greedy_station_hits_renewal_ceiling() {
        let pt = PhyTimings::default();
        let timings = EngineTimings::for_scheme(&pt, AccessScheme::Basic);
        let mut engine = ChannelEngine::new(timings, 1);
        let mut agents: Vec<Box<dyn StationPolicy>> = vec![Box::new(Always(Decision::Transmit))];
        let metrics = run_stations(&mut engine, &mut agents, 1_000_000.0, None).unwrap();
        let (aggregate, per_station) = throughput(&metrics, &pt).unwrap();
        // Every epoch is one T_s busy period: S = E[P] / T_s exactly.
        let expected = pt.payload_us() / 2190.2 * pt.data_rate_mbps;
        assert!((aggregate - expected).abs() < 1e-9, "{aggregate} vs {expected}");
        assert_eq!(per_station.len(), 1);
        assert!((per_station[0] - aggregate).abs() < 1e-12);
    }

    #[test]
    fn two_greedy_stations_starve() {
        let mut engine = default_engine(2);
        let mut agents: Vec<Box<dyn StationPolicy>> =
            (0..2).map(|_| Box::new(Always(Decision::Transmit)) as Box<dyn StationPolicy>).collect();
        let metrics = run_stations(&mut engine, &mut agents, 100_000.0, None).unwrap();
        assert_eq!(metrics.success_count, 0);
        assert!(metrics.collision_count > 0);
        let pt = PhyTimings::default();
        let (aggregate, _) = throughput(&metrics, &pt).unwrap();
        assert_eq!(aggregate, 0.0);
    }

    #[test]
    fn throughput_ratio_arithmetic() {
        let pt = PhyTimings::default();
        let mut metrics = RunMetrics::new(2);
        assert!(matches!(throughput(&metrics, &pt), Err(MetricsError::NoElapsedTime)));
        // One 2000 us payload over 4000 us at 6 Mb/s -> 3 Mb/s.
        metrics.per_station_payload_ps[0] = us_to_ps(2000.0);
        metrics.elapsed_ps = us_to_ps(4000.0);
        let (aggregate, per_station) = throughput(&metrics, &pt).unwrap();
        assert!((aggregate - 3.0).abs() < 1e-12);
        assert!((per_station[0] - 3.0).abs() < 1e-12);
        assert_eq!(per_station[1], 0.0);
        // Aggregate is the sum of per-station values.
        assert!((aggregate - per_station.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn jain_index_cases() {
        assert!((jain_index(&[1.0, 1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((jain_index(&[5.0, 0.0, 0.0, 0.0, 0.0]).unwrap() - 0.2).abs() < 1e-15);
        let j = jain_index(&[1.0, 2.0, 3.0]).unwrap();
        assert!((j - 36.0 / 42.0).abs() < 1e-15, "{j}");
        assert!(matches!(jain_index(&[0.0, 0.0]), Err(MetricsError::UndefinedFairness)));
        assert!(matches!(jain_index(&[]), Err(MetricsError::NoStations)));
        assert!(matches!(jain_index(&[-1.0, 2.0]), Err(MetricsError::NegativeValue(_))));
    }

    #[test]
    fn time_conservation_over_scripted_epochs() {
        // Deterministic pseudo-random decision script, then check the exact
        // decomposition of elapsed time.
        let mut engine = default_engine(3);
        let mut x = 0x243f6a8885a308d3u64;
        for _ in 0..5000 {
            let mut decisions = [Decision::Wait; 3];
            for d in decisions.iter_mut() {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                if x % 7 == 0 {
                    *d = Decision::Transmit;
                }
            }
            engine.step(&decisions).unwrap();
        }
        let m = engine.metrics();
        let t = engine.timings();
        assert_eq!(
            m.elapsed_ps,
            m.idle_slots * t.slot_ps
                + m.success_count * t.success_ps
                + m.collision_count * t.collision_ps
                + m.coordination_ps
        );
    }

    #[test]
    fn feedback_causality_over_scripted_epochs() {
        let mut engine = default_engine(4);
        let mut x = 0x9e3779b97f4a7c15u64;
        let mut transmit_decisions = 0u64;
        let mut feedback_count = 0u64;
        for _ in 0..3000 {
            let mut decisions = [Decision::Wait; 4];
            for d in decisions.iter_mut() {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                if x % 5 == 0 {
                    *d = Decision::Transmit;
                    transmit_decisions += 1;
                }
            }
            let out = engine.step(&decisions).unwrap();
            for fb in &out.feedbacks {
                assert!(fb.delivery_slot > fb.decision_slot);
                feedback_count += 1;
            }
        }
        // Exactly one feedback per transmit decision.
        assert_eq!(feedback_count, transmit_decisions);
    }

    #[test]
    fn coordination_occupancy_counts_time_but_no_payload() {
        let mut engine = default_engine(2);
        engine.occupy_coordination(us_to_ps(2190.2)).unwrap();
        let m = engine.metrics();
        assert_eq!(m.coordination_rounds, 1);
        assert_eq!(m.coordination_ps, us_to_ps(2190.2));
        assert_eq!(m.elapsed_ps, us_to_ps(2190.2));
        assert_eq!(m.per_station_payload_ps, vec![0, 0]);
        assert_eq!(engine.slot(), 220);
    }

    #[test]
    fn deterministic_repeat_runs_match_bit_for_bit() {
        use crate::dcf::BebAgent;
        let pt = PhyTimings::default();
        let bp = BackoffParams::default();
        let run = || {
            let mut engine =
                ChannelEngine::new(EngineTimings::for_scheme(&pt, AccessScheme::Basic), 3);
            let mut agents: Vec<Box<dyn StationPolicy>> = (0..3)
                .map(|i| Box::new(BebAgent::new(bp, 42 + i as u64)) as Box<dyn StationPolicy>)
                .collect();
            run_stations(&mut engine, &mut agents, 200_000.0, None).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn learned_access_timings_share_payload_source() {
        let pt = PhyTimings::default();
        let t = EngineTimings::for_learned_access(&pt);
        assert_eq!(t.success_ps, t.collision_ps);
        assert_eq!(t.success_ps, us_to_ps(100.0 + 2000.0 + 0.1 + 40.0 + 0.1));
        assert_eq!(t.payload_ps, us_to_ps(2000.0));
    }
}
