//! Single-cell WLAN MAC library: a slot-synchronous shared-medium engine,
//! DCF basic and RTS/CTS baseline stations, per-station deep Q-learning
//! stations with Monte Carlo reward estimation and AP-side federated
//! averaging, and the closed-form saturation-throughput model used to
//! validate the simulator.
//!
//! - [`analytic`]: fixed-point transmission probability and normalized
//!   throughput for DCF basic / RTS/CTS.
//! - [`channel`]: the decision-epoch engine, metrics, throughput, fairness.
//! - [`dcf`]: binary-exponential-backoff baseline stations.
//! - [`qnn`]: the residual Q-network, replay, trainer, checkpoints.
//! - [`frma`]: the learned-access station and its run driver.
//! - [`fed`]: federated averaging at the access point.

pub mod analytic;
pub mod channel;
pub mod dcf;
pub mod fed;
pub mod frma;
pub mod qnn;
