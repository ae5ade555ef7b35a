//! Per-station Q-network: a six-hidden-layer residual MLP with manual
//! backpropagation, experience replay, a delayed target copy, and the
//! semi-gradient TD update.
//!
//! Topology (64 units per hidden layer, ReLU, linear output):
//!
//! ```text
//! input(40) -> FC -> FC -> [FC -> FC (+ identity)] -> [FC -> FC (+ identity)] -> out(2)
//! ```
//!
//! Each bracketed block is a residual block: two dense layers whose output
//! is summed with the block input before the activation. Action indices are
//! 0 = Wait, 1 = Transmit.
//!
//! ## Checkpoint layout
//!
//! Little-endian binary file:
//!
//! | offset | field                                   |
//! |--------|-----------------------------------------|
//! | 0      | magic `b"FRMAQNN\0"` (8 bytes)          |
//! | 8      | u32 format version (currently 1)        |
//! | 12     | u32 model revision                      |
//! | 16     | u32 input dim, u32 hidden dim,          |
//! |        | u32 residual block count, u32 output dim|
//! | 32     | per layer, in forward order: weights    |
//! |        | row-major `out*in` f64, then `out` f64  |
//! |        | biases                                  |
//!
//! Loading rejects any architecture mismatch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::collections::VecDeque;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const STATE_DIM: usize = 40;
pub const HIDDEN_DIM: usize = 64;
pub const ACTION_COUNT: usize = 2;
pub const RES_BLOCKS: usize = 2;

const CHECKPOINT_MAGIC: &[u8; 8] = b"FRMAQNN\0";
const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum QnnError {
    #[error("state vector must have {STATE_DIM} finite entries")]
    NonFiniteInput,
    #[error("training diverged: loss = {loss}")]
    TrainingDiverged { loss: f64 },
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("action index {0} out of range")]
    BadAction(usize),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),
    #[error("architecture mismatch: expected {expected:?}, found {found:?}")]
    ArchMismatch { expected: ArchTag, found: ArchTag },
    #[error("checkpoint truncated or oversized")]
    Truncated,
}

/// Shape of the network; convex combinations of weights are only defined
/// between identical tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchTag {
    pub input: u32,
    pub hidden: u32,
    pub res_blocks: u32,
    pub output: u32,
}

impl ArchTag {
    pub fn standard() -> Self {
        Self {
            input: STATE_DIM as u32,
            hidden: HIDDEN_DIM as u32,
            res_blocks: RES_BLOCKS as u32,
            output: ACTION_COUNT as u32,
        }
    }
}

/// One dense layer, weights row-major `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self { w: vec![0.0; in_dim * out_dim], b: vec![0.0; out_dim], in_dim, out_dim }
    }

    fn init_he_uniform(in_dim: usize, out_dim: usize, rng: &mut ChaCha12Rng) -> Self {
        let limit = (6.0 / in_dim as f64).sqrt();
        let mut layer = Self::zeros(in_dim, out_dim);
        for w in layer.w.iter_mut() {
            *w = rng.gen_range(-limit..limit);
        }
        layer
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.w.chunks_exact(self.in_dim)) {
            *o = dot(row, x);
        }
        for (o, b) in out.iter_mut().zip(&self.b) {
            *o += b;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators; fixed order keeps runs bit-identical.
    let chunks = a.len() / 4;
    let mut acc = [0.0f64; 4];
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..a.len() {
        s += a[j] * b[j];
    }
    s
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn relu_inplace(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Layer indices inside [`QnnWeights::layers`].
const L_STEM0: usize = 0;
const L_STEM1: usize = 1;
const L_A1: usize = 2;
const L_A2: usize = 3;
const L_B1: usize = 4;
const L_B2: usize = 5;
const L_OUT: usize = 6;

/// The full parameter set: the unit of training, averaging, and
/// checkpointing.
#[derive(Debug, Clone, PartialEq)]
pub struct QnnWeights {
    pub version: u32,
    pub arch: ArchTag,
    pub layers: Vec<Dense>,
}

/// Post-activation values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Activations {
    y1: [f64; HIDDEN_DIM],
    y2: [f64; HIDDEN_DIM],
    h3: [f64; HIDDEN_DIM],
    y4: [f64; HIDDEN_DIM],
    h5: [f64; HIDDEN_DIM],
    y6: [f64; HIDDEN_DIM],
    pub q: [f64; ACTION_COUNT],
}

impl Default for Activations {
    fn default() -> Self {
        Self {
            y1: [0.0; HIDDEN_DIM],
            y2: [0.0; HIDDEN_DIM],
            h3: [0.0; HIDDEN_DIM],
            y4: [0.0; HIDDEN_DIM],
            h5: [0.0; HIDDEN_DIM],
            y6: [0.0; HIDDEN_DIM],
            q: [0.0; ACTION_COUNT],
        }
    }
}

/// Parameter gradients, same shapes as the layers.
#[derive(Debug, Clone)]
pub struct GradBuf {
    layers: Vec<Dense>,
}

impl GradBuf {
    pub fn new() -> Self {
        Self { layers: layer_dims().map(|(i, o)| Dense::zeros(i, o)).collect() }
    }

    pub fn zero(&mut self) {
        for layer in &mut self.layers {
            layer.w.fill(0.0);
            layer.b.fill(0.0);
        }
    }
}

impl Default for GradBuf {
    fn default() -> Self {
        Self::new()
    }
}

fn layer_dims() -> impl Iterator<Item = (usize, usize)> {
    [
        (STATE_DIM, HIDDEN_DIM),
        (HIDDEN_DIM, HIDDEN_DIM),
        (HIDDEN_DIM, HIDDEN_DIM),
        (HIDDEN_DIM, HIDDEN_DIM),
        (HIDDEN_DIM, HIDDEN_DIM),
        (HIDDEN_DIM, HIDDEN_DIM),
        (HIDDEN_DIM, ACTION_COUNT),
    ]
    .into_iter()
}

impl QnnWeights {
    /// Weights drawn He-uniform by fan-in, zero biases; identical seeds give
    /// identical networks.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let layers = layer_dims().map(|(i, o)| Dense::init_he_uniform(i, o, &mut rng)).collect();
        Self { version: 0, arch: ArchTag::standard(), layers }
    }

    /// All-zero parameters; mostly useful in tests.
    pub fn zeros() -> Self {
        Self {
            version: 0,
            arch: ArchTag::standard(),
            layers: layer_dims().map(|(i, o)| Dense::zeros(i, o)).collect(),
        }
    }

    /// Q-values for both actions. Rejects malformed states.
    pub fn forward(&self, state: &[f64]) -> Result<[f64; ACTION_COUNT], QnnError> {
        if state.len() != STATE_DIM || state.iter().any(|v| !v.is_finite()) {
            return Err(QnnError::NonFiniteInput);
        }
        let mut s = [0.0; STATE_DIM];
        s.copy_from_slice(state);
        Ok(self.forward_full(&s).q)
    }

    /// Forward pass keeping every post-activation for backpropagation.
    pub fn forward_full(&self, state: &[f64; STATE_DIM]) -> Activations {
        let mut act = Activations::default();
        self.layers[L_STEM0].forward_into(state, &mut act.y1);
        relu_inplace(&mut act.y1);
        self.layers[L_STEM1].forward_into(&act.y1, &mut act.y2);
        relu_inplace(&mut act.y2);

        self.layers[L_A1].forward_into(&act.y2, &mut act.h3);
        relu_inplace(&mut act.h3);
        self.layers[L_A2].forward_into(&act.h3, &mut act.y4);
        // Identity shortcut added before the activation.
        axpy(&mut act.y4, 1.0, &act.y2);
        relu_inplace(&mut act.y4);

        self.layers[L_B1].forward_into(&act.y4, &mut act.h5);
        relu_inplace(&mut act.h5);
        self.layers[L_B2].forward_into(&act.h5, &mut act.y6);
        axpy(&mut act.y6, 1.0, &act.y4);
        relu_inplace(&mut act.y6);

        self.layers[L_OUT].forward_into(&act.y6, &mut act.q);
        act
    }

    /// Accumulate `coeff * d q[action] / d theta` into `grads`.
    ///
    /// `act` must come from [`forward_full`] on `state` with these weights.
    pub fn accumulate_gradient(
        &self,
        state: &[f64; STATE_DIM],
        act: &Activations,
        action: usize,
        coeff: f64,
        grads: &mut GradBuf,
    ) {
        let mut d6 = [0.0f64; HIDDEN_DIM];
        let mut d5 = [0.0f64; HIDDEN_DIM];
        let mut d4 = [0.0f64; HIDDEN_DIM];
        let mut d3 = [0.0f64; HIDDEN_DIM];
        let mut d2 = [0.0f64; HIDDEN_DIM];
        let mut d1 = [0.0f64; HIDDEN_DIM];

        // Output layer: q[action] = W_out[action, :] . y6 + b_out[action].
        let out = &self.layers[L_OUT];
        let gout = &mut grads.layers[L_OUT];
        gout.b[action] += coeff;
        axpy(&mut gout.w[action * HIDDEN_DIM..(action + 1) * HIDDEN_DIM], coeff, &act.y6);
        let w_row = &out.w[action * HIDDEN_DIM..(action + 1) * HIDDEN_DIM];
        for (d, &w) in d6.iter_mut().zip(w_row) {
            *d = coeff * w;
        }

        // Residual block B: y6 = relu(L_B2(h5) + y4).
        mask_relu(&mut d6, &act.y6);
        accumulate_dense(&self.layers[L_B2], &mut grads.layers[L_B2], &act.h5, &d6, &mut d5);
        mask_relu(&mut d5, &act.h5);
        accumulate_dense(&self.layers[L_B1], &mut grads.layers[L_B1], &act.y4, &d5, &mut d4);
        // Shortcut contribution.
        axpy(&mut d4, 1.0, &d6);

        // Residual block A: y4 = relu(L_A2(h3) + y2).
        mask_relu(&mut d4, &act.y4);
        accumulate_dense(&self.layers[L_A2], &mut grads.layers[L_A2], &act.h3, &d4, &mut d3);
        mask_relu(&mut d3, &act.h3);
        accumulate_dense(&self.layers[L_A1], &mut grads.layers[L_A1], &act.y2, &d3, &mut d2);
        axpy(&mut d2, 1.0, &d4);

        // Stem.
        mask_relu(&mut d2, &act.y2);
        accumulate_dense(&self.layers[L_STEM1], &mut grads.layers[L_STEM1], &act.y1, &d2, &mut d1);
        mask_relu(&mut d1, &act.y1);
        let g0 = &mut grads.layers[L_STEM0];
        for (o, &d) in d1.iter().enumerate() {
            g0.b[o] += d;
            axpy(&mut g0.w[o * STATE_DIM..(o + 1) * STATE_DIM], d, state);
        }
    }

    /// In-place `theta += scale * grads`.
    pub fn apply_scaled(&mut self, grads: &GradBuf, scale: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            axpy(&mut layer.w, scale, &g.w);
            axpy(&mut layer.b, scale, &g.b);
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flat parameter view, weights before biases per layer, layers in
    /// forward order (matches gradient flattening).
    pub fn get_param(&self, mut idx: usize) -> f64 {
        for layer in &self.layers {
            if idx < layer.w.len() {
                return layer.w[idx];
            }
            idx -= layer.w.len();
            if idx < layer.b.len() {
                return layer.b[idx];
            }
            idx -= layer.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        for layer in &mut self.layers {
            if idx < layer.w.len() {
                layer.w[idx] = value;
                return;
            }
            idx -= layer.w.len();
            if idx < layer.b.len() {
                layer.b[idx] = value;
                return;
            }
            idx -= layer.b.len();
        }
        panic!("parameter index out of range");
    }
}

impl GradBuf {
    /// Flat gradient view matching [`QnnWeights::get_param`] indexing.
    pub fn get_flat(&self, mut idx: usize) -> f64 {
        for layer in &self.layers {
            if idx < layer.w.len() {
                return layer.w[idx];
            }
            idx -= layer.w.len();
            if idx < layer.b.len() {
                return layer.b[idx];
            }
            idx -= layer.b.len();
        }
        panic!("gradient index out of range");
    }
}

#[inline]
fn mask_relu(d: &mut [f64], post: &[f64]) {
    for (di, &y) in d.iter_mut().zip(post) {
        if y <= 0.0 {
            *di = 0.0;
        }
    }
}

/// Dense-layer backward step: given upstream gradient `d_out` (already
/// masked), accumulate weight and bias gradients and write the gradient
/// with respect to the layer input into `d_in`.
fn accumulate_dense(layer: &Dense, grad: &mut Dense, input: &[f64], d_out: &[f64], d_in: &mut [f64]) {
    d_in.fill(0.0);
    for (o, &d) in d_out.iter().enumerate() {
        grad.b[o] += d;
        if d != 0.0 {
            let row = o * layer.in_dim;
            axpy(&mut grad.w[row..row + layer.in_dim], d, input);
            axpy(d_in, d, &layer.w[row..row + layer.in_dim]);
        }
    }
}

/// One MDP transition, the unit the replay buffer stores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experience {
    pub state: [f64; STATE_DIM],
    /// 0 = Wait, 1 = Transmit.
    pub action: usize,
    pub reward: f64,
    pub next_state: [f64; STATE_DIM],
}

/// FIFO ring of experiences with uniform without-replacement sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    /// Uniform sample of `batch_size` distinct items; `None` until the
    /// buffer holds at least that many.
    pub fn sample(&self, batch_size: usize, rng: &mut ChaCha12Rng) -> Option<Vec<Experience>> {
        if self.items.len() < batch_size {
            return None;
        }
        let picks = rand::seq::index::sample(rng, self.items.len(), batch_size);
        Some(picks.into_iter().map(|i| self.items[i]).collect())
    }
}

/// Training hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub target_replace_every: u32,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self { learning_rate: 0.001, gamma: 0.9, batch_size: 32, target_replace_every: 200 }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0) {
            return Err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if self.batch_size == 0 {
            return Err("batch_size must be positive".into());
        }
        if self.target_replace_every == 0 {
            return Err("target_replace_every must be positive".into());
        }
        Ok(())
    }
}

/// Bootstrapped value estimate: `r + gamma * max_a q(s', a; target)`.
///
/// There is no terminal-state masking; channel access is a continuing task.
pub fn td_target(target: &QnnWeights, reward: f64, next_state: &[f64; STATE_DIM], gamma: f64) -> f64 {
    let q = target.forward_full(next_state).q;
    reward + gamma * q[0].max(q[1])
}

/// One semi-gradient update over a batch.
///
/// The target value is a constant during differentiation: gradients flow
/// only through `q(s, a; theta)`. Applies
/// `theta += lr * mean(delta * grad q)` and returns the mean squared
/// `delta`.
pub fn train_step(
    online: &mut QnnWeights,
    target: &QnnWeights,
    batch: &[Experience],
    cfg: &TrainerConfig,
) -> Result<f64, QnnError> {
    let mut grads = GradBuf::new();
    train_step_buffered(online, target, batch, cfg, &mut grads).map(|r| r.loss)
}

pub struct StepReport {
    pub loss: f64,
    pub reward_mean: f64,
}

pub fn train_step_buffered(
    online: &mut QnnWeights,
    target: &QnnWeights,
    batch: &[Experience],
    cfg: &TrainerConfig,
    grads: &mut GradBuf,
) -> Result<StepReport, QnnError> {
    if batch.is_empty() {
        return Err(QnnError::EmptyBatch);
    }
    grads.zero();
    let mut loss = 0.0;
    let mut reward_sum = 0.0;
    for exp in batch {
        if exp.action >= ACTION_COUNT {
            return Err(QnnError::BadAction(exp.action));
        }
        let v = td_target(target, exp.reward, &exp.next_state, cfg.gamma);
        let act = online.forward_full(&exp.state);
        let delta = v - act.q[exp.action];
        loss += delta * delta;
        reward_sum += exp.reward;
        online.accumulate_gradient(&exp.state, &act, exp.action, delta, grads);
    }
    let inv = 1.0 / batch.len() as f64;
    loss *= inv;
    if !loss.is_finite() {
        return Err(QnnError::TrainingDiverged { loss });
    }
    online.apply_scaled(grads, cfg.learning_rate * inv);
    Ok(StepReport { loss, reward_mean: reward_sum * inv })
}

/// Overwrite the target network with a copy of the online one.
pub fn sync_target(online: &QnnWeights, target: &mut QnnWeights) {
    target.clone_from(online);
}

/// Online network, target copy, replay memory, and the replace counter.
#[derive(Debug, Clone)]
pub struct Trainer {
    online: QnnWeights,
    target: QnnWeights,
    replay: ReplayBuffer,
    cfg: TrainerConfig,
    steps_since_sync: u32,
    total_steps: u64,
    grads: GradBuf,
}

impl Trainer {
    pub fn new(weights: QnnWeights, cfg: TrainerConfig, replay_capacity: usize) -> Self {
        let target = weights.clone();
        Self {
            online: weights,
            target,
            replay: ReplayBuffer::new(replay_capacity),
            cfg,
            steps_since_sync: 0,
            total_steps: 0,
            grads: GradBuf::new(),
        }
    }

    pub fn online(&self) -> &QnnWeights {
        &self.online
    }

    pub fn target(&self) -> &QnnWeights {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn push(&mut self, e: Experience) {
        self.replay.push(e);
    }

    /// Install externally supplied weights into the live network. The
    /// target keeps its replacement schedule and picks the new model up at
    /// the next sync: collapsing the target lag at every broadcast turns
    /// the bootstrap into a runaway chase (observed as training divergence
    /// on dense reward streams). Replay memory is untouched.
    pub fn install_weights(&mut self, weights: QnnWeights) {
        self.online = weights;
    }

    /// Snapshot of the live weights.
    pub fn snapshot(&self) -> QnnWeights {
        self.online.clone()
    }

    /// Run one training step if the buffer can fill a batch; syncs the
    /// target copy every `target_replace_every` completed steps.
    pub fn tick(&mut self, rng: &mut ChaCha12Rng) -> Result<Option<StepReport>, QnnError> {
        let Some(batch) = self.replay.sample(self.cfg.batch_size, rng) else {
            return Ok(None);
        };
        let report = train_step_buffered(&mut self.online, &self.target, &batch, &self.cfg, &mut self.grads)?;
        self.total_steps += 1;
        self.steps_since_sync += 1;
        if self.steps_since_sync == self.cfg.target_replace_every {
            sync_target(&self.online, &mut self.target);
            self.steps_since_sync = 0;
        }
        Ok(Some(report))
    }
}

/// Write a checkpoint in the documented byte layout.
pub fn save_checkpoint(path: &Path, weights: &QnnWeights) -> Result<(), CheckpointError> {
    let mut buf = Vec::with_capacity(32 + weights.param_count() * 8);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&weights.version.to_le_bytes());
    for dim in [weights.arch.input, weights.arch.hidden, weights.arch.res_blocks, weights.arch.output] {
        buf.extend_from_slice(&dim.to_le_bytes());
    }
    for layer in &weights.layers {
        for v in layer.w.iter().chain(&layer.b) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Read a checkpoint, rejecting anything that is not this architecture.
pub fn load_checkpoint(path: &Path) -> Result<QnnWeights, CheckpointError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 32 {
        return Err(CheckpointError::Truncated);
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let read_u32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let format = read_u32(8);
    if format != CHECKPOINT_FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(format));
    }
    let version = read_u32(12);
    let found = ArchTag {
        input: read_u32(16),
        hidden: read_u32(20),
        res_blocks: read_u32(24),
        output: read_u32(28),
    };
    let expected = ArchTag::standard();
    if found != expected {
        return Err(CheckpointError::ArchMismatch { expected, found });
    }

    let mut weights = QnnWeights::zeros();
    weights.version = version;
    let expected_len = 32 + weights.param_count() * 8;
    if bytes.len() != expected_len {
        return Err(CheckpointError::Truncated);
    }
    let mut at = 32;
    for layer in &mut weights.layers {
        for v in layer.w.iter_mut().chain(layer.b.iter_mut()) {
            *v = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            at += 8;
        }
    }
    Ok(weights)
}

/// Largest relative error between analytic and central-finite-difference
/// gradients of `q(state, action)`, checking every `stride`-th parameter
/// starting at `offset`.
pub fn gradient_check(
    net: &mut QnnWeights,
    state: &[f64; STATE_DIM],
    action: usize,
    eps: f64,
    stride: usize,
    offset: usize,
) -> f64 {
    let act = net.forward_full(state);
    let mut grads = GradBuf::new();
    net.accumulate_gradient(state, &act, action, 1.0, &mut grads);

    let mut worst = 0.0f64;
    let count = net.param_count();
    let mut idx = offset;
    while idx < count {
        let orig = net.get_param(idx);
        net.set_param(idx, orig + eps);
        let plus = net.forward_full(state).q[action];
        net.set_param(idx, orig - eps);
        let minus = net.forward_full(state).q[action];
        net.set_param(idx, orig);
        let numeric = (plus - minus) / (2.0 * eps);
        let analytic = grads.get_flat(idx);
        let diff = (analytic - numeric).abs();
        // Absolute floor below which differences are noise.
        if diff > 1e-7 {
            let rel = diff / analytic.abs().max(numeric.abs());
            worst = worst.max(rel);
        }
        idx += stride;
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_state(rng: &mut ChaCha12Rng) -> [f64; STATE_DIM] {
        let mut s = [0.0; STATE_DIM];
        for v in s.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        s
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        assert_eq!(QnnWeights::init(9), QnnWeights::init(9));
        assert_ne!(QnnWeights::init(9), QnnWeights::init(10));
    }

    #[test]
    fn output_layer_has_one_q_value_per_action() {
        let net = QnnWeights::init(1);
        let out = &net.layers[L_OUT];
        assert_eq!(out.in_dim, HIDDEN_DIM);
        assert_eq!(out.out_dim, ACTION_COUNT);
        assert_eq!(net.param_count(), 23_554);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = QnnWeights::zeros();
        let q = net.forward(&[0.25; STATE_DIM]).unwrap();
        assert_eq!(q, [0.0, 0.0]);
    }

    #[test]
    fn forward_rejects_bad_states() {
        let net = QnnWeights::init(2);
        assert!(matches!(net.forward(&[0.0; 39]), Err(QnnError::NonFiniteInput)));
        let mut s = [0.0; STATE_DIM];
        s[7] = f64::NAN;
        assert!(matches!(net.forward(&s), Err(QnnError::NonFiniteInput)));
    }

    #[test]
    fn dense_layer_matches_hand_arithmetic() {
        // 2x2 toy: W = [[1, 2], [3, 4]], b = [0.5, -0.5], x = [1, -1].
        let layer = Dense { w: vec![1.0, 2.0, 3.0, 4.0], b: vec![0.5, -0.5], in_dim: 2, out_dim: 2 };
        let mut out = [0.0; 2];
        layer.forward_into(&[1.0, -1.0], &mut out);
        assert_eq!(out, [-0.5, -1.5]);
    }

    #[test]
    fn zeroed_res_blocks_are_the_identity_on_the_stem() {
        let mut net = QnnWeights::init(5);
        for idx in [L_A1, L_A2, L_B1, L_B2] {
            net.layers[idx].w.fill(0.0);
            net.layers[idx].b.fill(0.0);
        }
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..8 {
            let s = random_state(&mut rng);
            let act = net.forward_full(&s);
            // Stem-only computation: blocks must pass y2 straight through.
            let mut y1 = [0.0; HIDDEN_DIM];
            net.layers[L_STEM0].forward_into(&s, &mut y1);
            relu_inplace(&mut y1);
            let mut y2 = [0.0; HIDDEN_DIM];
            net.layers[L_STEM1].forward_into(&y1, &mut y2);
            relu_inplace(&mut y2);
            let mut q = [0.0; ACTION_COUNT];
            net.layers[L_OUT].forward_into(&y2, &mut q);
            for (a, b) in act.q.iter().zip(&q) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn forward_is_locally_lipschitz() {
        let net = QnnWeights::init(11);
        // ReLU is 1-Lipschitz and each shortcut adds 1, so the Frobenius
        // norms give a crude but safe amplification bound.
        let fro = |idx: usize| net.layers[idx].w.iter().map(|w| w * w).sum::<f64>().sqrt();
        let bound = fro(L_STEM0)
            * fro(L_STEM1)
            * (1.0 + fro(L_A1) * fro(L_A2))
            * (1.0 + fro(L_B1) * fro(L_B2))
            * fro(L_OUT);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let s = random_state(&mut rng);
        let base = net.forward(&s).unwrap();
        let mut bumped = s;
        bumped[17] += 1e-9;
        let moved = net.forward(&bumped).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            assert!((a - b).abs() <= 1e-9 * bound, "{} > {}", (a - b).abs(), 1e-9 * bound);
        }
    }

    #[test]
    fn td_target_substitution_cases() {
        // Craft a network whose outputs are its output biases.
        let mut net = QnnWeights::zeros();
        net.layers[L_OUT].b = vec![0.5, -0.2];
        let s = [0.0; STATE_DIM];
        let v = td_target(&net, 1.0, &s, 0.9);
        assert!((v - 1.45).abs() < 1e-15);
        let zero = QnnWeights::zeros();
        assert_eq!(td_target(&zero, 0.0, &s, 0.9), 0.0);
    }

    #[test]
    fn gradients_match_finite_differences_everywhere() {
        let mut net = QnnWeights::init(42);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let s = random_state(&mut rng);
        for action in 0..ACTION_COUNT {
            let worst = gradient_check(&mut net, &s, action, 1e-5, 1, 0);
            assert!(worst < 1e-4, "action {action}: max relative error {worst:e}");
        }
    }

    #[test]
    fn semi_gradient_ignores_target_parameters() {
        // The applied update must depend on the target only through the
        // scalar delta, never through a gradient path.
        let base = QnnWeights::init(3);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let exp = Experience {
            state: random_state(&mut rng),
            action: 1,
            reward: 0.5,
            next_state: random_state(&mut rng),
        };
        let cfg = TrainerConfig::default();

        let run = |target: &QnnWeights| {
            let mut online = base.clone();
            train_step(&mut online, target, &[exp], &cfg).unwrap();
            online
        };

        let t1 = QnnWeights::init(100);
        let mut t2 = t1.clone();
        // Shift both target outputs; v moves by gamma * 0.25 regardless of
        // which action is the argmax, but grad q does not move.
        t2.layers[L_OUT].b[0] += 0.25;
        t2.layers[L_OUT].b[1] += 0.25;
        let v1 = td_target(&t1, exp.reward, &exp.next_state, cfg.gamma);
        let v2 = td_target(&t2, exp.reward, &exp.next_state, cfg.gamma);
        assert!(v1 != v2, "perturbing the target must change the value estimate");

        let updated1 = run(&t1);
        let updated2 = run(&t2);
        let q0 = base.forward_full(&exp.state).q[exp.action];
        let d1 = v1 - q0;
        let d2 = v2 - q0;
        // Same direction, scaled by delta: (theta1 - theta0)/d1 == (theta2 - theta0)/d2.
        for idx in (0..base.param_count()).step_by(97) {
            let step1 = (updated1.get_param(idx) - base.get_param(idx)) / d1;
            let step2 = (updated2.get_param(idx) - base.get_param(idx)) / d2;
            assert!((step1 - step2).abs() < 1e-12, "param {idx}: {step1} vs {step2}");
        }
    }

    #[test]
    fn zero_residual_batch_leaves_weights_unchanged() {
        // With gamma*max q(s') + r == q(s, a) for every item the update is
        // exactly zero. Easiest with an all-zero net and zero rewards.
        let mut online = QnnWeights::zeros();
        let target = QnnWeights::zeros();
        let before = online.clone();
        let exp = Experience { state: [0.1; STATE_DIM], action: 0, reward: 0.0, next_state: [0.2; STATE_DIM] };
        let loss = train_step(&mut online, &target, &[exp; 4], &TrainerConfig::default()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(online, before);
    }

    #[test]
    fn single_item_update_matches_hand_computation() {
        // Zero everything except the output biases: q(s, a) = b_out[a] and
        // grad q is 1 on b_out[a], h on W_out[a] (h = 0 here). One item,
        // a = 1, r = 1, gamma = 0.9:
        //   v = 1 + 0.9 * max(0.3, -0.2) = 1.27
        //   delta = 1.27 - (-0.2) = 1.47
        //   b_out[1] <- -0.2 + 0.001 * 1.47 = -0.19853
        let mut online = QnnWeights::zeros();
        online.layers[L_OUT].b = vec![0.3, -0.2];
        let target = online.clone();
        let exp = Experience { state: [0.0; STATE_DIM], action: 1, reward: 1.0, next_state: [0.0; STATE_DIM] };
        let cfg = TrainerConfig::default();
        let loss = train_step(&mut online, &target, &[exp], &cfg).unwrap();
        assert!((loss - 1.47 * 1.47).abs() < 1e-12);
        assert!((online.layers[L_OUT].b[1] - (-0.19853)).abs() < 1e-15);
        assert_eq!(online.layers[L_OUT].b[0], 0.3);
        // All weight matrices untouched (hidden activations were zero).
        for idx in [L_STEM0, L_STEM1, L_A1, L_A2, L_B1, L_B2, L_OUT] {
            assert!(online.layers[idx].w.iter().all(|&w| w == 0.0));
        }
    }

    #[test]
    fn divergent_loss_is_reported() {
        let mut online = QnnWeights::zeros();
        let target = QnnWeights::zeros();
        let exp = Experience { state: [0.0; STATE_DIM], action: 0, reward: f64::INFINITY, next_state: [0.0; STATE_DIM] };
        let err = train_step(&mut online, &target, &[exp], &TrainerConfig::default()).unwrap_err();
        assert!(matches!(err, QnnError::TrainingDiverged { .. }));
    }

    #[test]
    fn replay_buffer_evicts_fifo() {
        let mut buf = ReplayBuffer::new(1000);
        for i in 0..1001 {
            let mut e = Experience { state: [0.0; STATE_DIM], action: 0, reward: i as f64, next_state: [0.0; STATE_DIM] };
            e.state[0] = i as f64;
            buf.push(e);
        }
        assert_eq!(buf.len(), 1000);
        assert_eq!(buf.iter().next().unwrap().state[0], 1.0, "oldest item evicted");
    }

    #[test]
    fn sampling_a_full_buffer_returns_everything() {
        let mut buf = ReplayBuffer::new(64);
        for i in 0..32 {
            buf.push(Experience { state: [i as f64; STATE_DIM], action: 0, reward: 0.0, next_state: [0.0; STATE_DIM] });
        }
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(buf.sample(33, &mut rng).is_none());
        let batch = buf.sample(32, &mut rng).unwrap();
        let mut seen: Vec<i64> = batch.iter().map(|e| e.state[0] as i64).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..32).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_is_uniform() {
        // 1e5 single-item samples from a 16-item buffer; each item's count
        // within 5 sigma of the binomial expectation.
        let mut buf = ReplayBuffer::new(16);
        for i in 0..16 {
            buf.push(Experience { state: [i as f64; STATE_DIM], action: 0, reward: 0.0, next_state: [0.0; STATE_DIM] });
        }
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let draws = 100_000;
        let mut counts = [0u32; 16];
        for _ in 0..draws {
            let batch = buf.sample(1, &mut rng).unwrap();
            counts[batch[0].state[0] as usize] += 1;
        }
        let p = 1.0 / 16.0;
        let expect = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            assert!((c as f64 - expect).abs() <= 5.0 * sigma, "item {i}: {c}");
        }
    }

    #[test]
    fn target_sync_schedule() {
        let mut trainer = Trainer::new(QnnWeights::init(8), TrainerConfig::default(), 1000);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut mk = |i: usize| Experience {
            state: [(i % 7) as f64 * 0.1; STATE_DIM],
            action: i % 2,
            reward: if i % 3 == 0 { 1.0 } else { -1.0 },
            next_state: [(i % 5) as f64 * 0.1; STATE_DIM],
        };
        // Below batch size: no update happens.
        for i in 0..31 {
            trainer.push(mk(i));
            assert!(trainer.tick(&mut rng).unwrap().is_none());
        }
        trainer.push(mk(31));
        let initial_target = trainer.target().clone();
        for step in 1..=199u32 {
            assert!(trainer.tick(&mut rng).unwrap().is_some());
            assert_eq!(trainer.target(), &initial_target, "target moved early at step {step}");
        }
        trainer.tick(&mut rng).unwrap();
        assert_eq!(trainer.target(), trainer.online(), "target replaced on the 200th step");
        assert_eq!(trainer.steps_since_sync, 0, "counter resets after sync");
        let probe = [0.3; STATE_DIM];
        assert_eq!(trainer.target().forward(&probe).unwrap(), trainer.online().forward(&probe).unwrap());
    }

    #[test]
    fn checkpoint_round_trip_and_rejection() {
        let dir = std::env::temp_dir().join(format!("qnn-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.ckpt");
        let mut net = QnnWeights::init(123);
        net.version = 7;
        save_checkpoint(&path, &net).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, net);

        // Flip an architecture byte: load must refuse.
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[16] = 39;
        let bad = dir.join("bad.ckpt");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&bad), Err(CheckpointError::ArchMismatch { .. })));

        std::fs::write(&bad, b"garbage").unwrap();
        assert!(matches!(load_checkpoint(&bad), Err(CheckpointError::Truncated)));
        std::fs::write(&bad, [b'X'; 40]).unwrap();
        assert!(matches!(load_checkpoint(&bad), Err(CheckpointError::BadMagic)));
        std::fs::remove_dir_all(&dir).ok();
    }
}
