//! Clock-driven integration of the recurrent spiking network.
//!
//! Each step advances the state by `dt` in four phases:
//!
//! 1. deliver delayed current increments scheduled for this step,
//! 2. per-term analytic decay of membrane voltage (toward the per-step
//!    target set by the post-delivery current and external drive) and of
//!    synaptic current,
//! 3. threshold detection, reset, refractory entry, and scheduling of the
//!    emitted spikes' delayed deliveries,
//! 4. trace-based pair plasticity on excitatory-to-excitatory synapses.
//!
//! Deliveries use the weight at emission time, before this step's
//! plasticity updates. Plasticity pairs postsynaptic spike times against
//! presynaptic spike ARRIVAL times (emission plus conduction delay), so
//! heterogeneous delays are visible to the learning rule; the depression
//! event of a synapse fires when the presynaptic spike arrives. Noise is a
//! pure function of (stream seed, neuron, step), so a run is deterministic
//! for a fixed (config, seed) and runs sharing no state may execute
//! concurrently.

use serde::Serialize;
use thiserror::Error;

use crate::config::{DriveParams, NeuronParams, SimConfig, StdpParams};
use crate::network::{self, Topology};
use crate::rng::{split_seed, NoiseStream};

const TOPOLOGY_TAG: u64 = 0x746f_706f;
const NOISE_TAG: u64 = 0x6e6f_6973;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("non-finite state at step {step} (t = {t_ms} ms), neuron {neuron}")]
    NonFiniteState { step: u64, t_ms: f64, neuron: usize },
    #[error("invalid configuration: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Network(#[from] network::NetworkError),
}

/// One spike event: emission time and neuron id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spike {
    pub t_ms: f64,
    pub neuron: u32,
}

/// Time-ordered spike events from one run, sorted by (time, neuron id).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeRecord {
    pub n_neurons: u32,
    pub duration_ms: f64,
    pub spikes: Vec<Spike>,
}

impl SpikeRecord {
    pub fn count_in_window(&self, t_lo_ms: f64, t_hi_ms: f64) -> usize {
        self.spikes
            .iter()
            .filter(|s| s.t_ms >= t_lo_ms && s.t_ms < t_hi_ms)
            .count()
    }
}

/// Depression branch applied when the presynaptic neuron fires.
///
/// `x_post` carries the summed exponential decay of all past postsynaptic
/// spikes, so one call equals the all-to-all sum of the pairwise
/// depression terms. The result is clamped to [0, w_max].
#[inline]
pub fn apply_stdp_on_pre(w: f64, x_post: f64, stdp: &StdpParams, w_max: f64) -> f64 {
    (w - stdp.lambda_p * stdp.a_minus * x_post).clamp(0.0, w_max)
}

/// Potentiation branch applied when the postsynaptic neuron fires;
/// symmetric to [`apply_stdp_on_pre`].
#[inline]
pub fn apply_stdp_on_post(w: f64, x_pre: f64, stdp: &StdpParams, w_max: f64) -> f64 {
    (w + stdp.lambda_p * stdp.a_plus * x_pre).clamp(0.0, w_max)
}

/// Ring buffer of future current increments, one accumulator row per
/// pending timestep. An increment scheduled for absolute step `s` is added
/// to the synaptic currents at the start of step `s`; rows are zeroed as
/// they are consumed, which makes slot reuse after `capacity` steps exact.
#[derive(Debug, Clone)]
pub(crate) struct DelayBuffer {
    capacity: usize,
    n: usize,
    slots: Vec<f64>,
}

impl DelayBuffer {
    pub(crate) fn new(max_delay_steps: u32, n: usize) -> Self {
        let capacity = max_delay_steps as usize + 1;
        Self {
            capacity,
            n,
            slots: vec![0.0; capacity * n],
        }
    }

    #[inline]
    pub(crate) fn schedule(&mut self, delivery_step: u64, neuron: usize, amount: f64) {
        let row = (delivery_step % self.capacity as u64) as usize;
        self.slots[row * self.n + neuron] += amount;
    }

    #[inline]
    pub(crate) fn drain_into(&mut self, step: u64, target: &mut [f64]) {
        let row = (step % self.capacity as u64) as usize;
        let slice = &mut self.slots[row * self.n..(row + 1) * self.n];
        for (acc, slot) in target.iter_mut().zip(slice.iter_mut()) {
            *acc += *slot;
            *slot = 0.0;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct OutEdge {
    post: u32,
    delay_steps: u32,
    edge_idx: u32,
}

/// Live integration state for one network instance. Exclusively owned by
/// one run; stepping is strictly sequential.
pub struct Simulation {
    n: usize,
    n_exc: usize,
    dt_ms: f64,
    neuron: NeuronParams,
    drive: DriveParams,
    stdp: StdpParams,
    w_max_ee: f64,
    sqrt_dt: f64,
    alpha_m: f64,
    alpha_s: f64,
    alpha_plus: f64,
    alpha_minus: f64,
    refrac_steps: u64,

    out_offsets: Vec<u32>,
    out_edges: Vec<OutEdge>,
    in_plastic_offsets: Vec<u32>,
    in_plastic: Vec<(u32, u32)>, // (edge_idx, pre)
    edge_post: Vec<u32>,
    edge_delay_steps: Vec<u32>,
    weights: Vec<f64>,

    v: Vec<f64>,
    i_syn: Vec<f64>,
    refrac_until_step: Vec<u64>,
    x_pre: Vec<f64>,
    x_post: Vec<f64>,
    // x_post after decay but before this step's post increments; what a
    // same-time arrival must read so a zero timing difference never
    // depresses.
    x_post_before_incr: Vec<f64>,
    // Ring of x_pre snapshots, one row per step, so potentiation can read
    // the presynaptic trace as seen through each synapse's delay.
    x_pre_hist: Vec<f64>,
    hist_capacity: usize,
    // Plastic edges whose presynaptic spike arrives at a given step.
    stdp_arrivals: Vec<Vec<u32>>,
    buffer: DelayBuffer,
    noise: NoiseStream,
    step_idx: u64,
    spiking: Vec<u32>,
}

impl Simulation {
    pub fn new(topology: &Topology, cfg: &SimConfig, noise_seed: u64) -> Self {
        let n = topology.n_neurons();
        let n_exc = topology.n_exc;
        let dt = cfg.dt_ms;
        let neuron = cfg.neuron();

        // CSR over outgoing edges, keyed by presynaptic id.
        let mut out_counts = vec![0u32; n + 1];
        for e in &topology.edges {
            out_counts[e.pre as usize + 1] += 1;
        }
        for i in 0..n {
            out_counts[i + 1] += out_counts[i];
        }
        let out_offsets = out_counts;
        let mut cursor = out_offsets.clone();
        let mut out_edges = vec![
            OutEdge {
                post: 0,
                delay_steps: 0,
                edge_idx: 0
            };
            topology.edges.len()
        ];
        for (idx, e) in topology.edges.iter().enumerate() {
            debug_assert!(e.delay_steps >= 1);
            let slot = cursor[e.pre as usize];
            out_edges[slot as usize] = OutEdge {
                post: e.post,
                delay_steps: e.delay_steps,
                edge_idx: idx as u32,
            };
            cursor[e.pre as usize] += 1;
        }

        // CSR over incoming plastic edges, keyed by postsynaptic id.
        let mut in_counts = vec![0u32; n + 1];
        for e in &topology.edges {
            if e.plastic {
                in_counts[e.post as usize + 1] += 1;
            }
        }
        for i in 0..n {
            in_counts[i + 1] += in_counts[i];
        }
        let in_plastic_offsets = in_counts;
        let mut cursor = in_plastic_offsets.clone();
        let mut in_plastic = vec![(0u32, 0u32); *in_plastic_offsets.last().unwrap() as usize];
        for (idx, e) in topology.edges.iter().enumerate() {
            if e.plastic {
                let slot = cursor[e.post as usize];
                in_plastic[slot as usize] = (idx as u32, e.pre);
                cursor[e.post as usize] += 1;
            }
        }

        let hist_capacity = topology.max_delay_steps() as usize + 1;
        Self {
            n,
            n_exc,
            dt_ms: dt,
            neuron,
            drive: cfg.drive(),
            stdp: cfg.stdp(),
            w_max_ee: cfg.w_max_ee,
            sqrt_dt: dt.sqrt(),
            alpha_m: (-dt / neuron.tau_m_ms).exp(),
            alpha_s: (-dt / cfg.tau_s_ms).exp(),
            alpha_plus: (-dt / cfg.tau_plus_ms).exp(),
            alpha_minus: (-dt / cfg.tau_minus_ms).exp(),
            refrac_steps: (neuron.t_refractory_ms / dt).round() as u64,
            out_offsets,
            out_edges,
            in_plastic_offsets,
            in_plastic,
            edge_post: topology.edges.iter().map(|e| e.post).collect(),
            edge_delay_steps: topology.edges.iter().map(|e| e.delay_steps).collect(),
            weights: topology.edges.iter().map(|e| e.weight).collect(),
            v: vec![neuron.v_rest_mv; n],
            i_syn: vec![0.0; n],
            refrac_until_step: vec![0; n],
            x_pre: vec![0.0; n],
            x_post: vec![0.0; n],
            x_post_before_incr: vec![0.0; n],
            x_pre_hist: vec![0.0; hist_capacity * n],
            hist_capacity,
            stdp_arrivals: vec![Vec::new(); hist_capacity],
            buffer: DelayBuffer::new(topology.max_delay_steps(), n),
            noise: NoiseStream::new(noise_seed),
            step_idx: 0,
            spiking: Vec::with_capacity(n),
        }
    }

    pub fn time_ms(&self) -> f64 {
        self.step_idx as f64 * self.dt_ms
    }

    pub fn voltage(&self, neuron: usize) -> f64 {
        self.v[neuron]
    }

    pub fn set_voltage(&mut self, neuron: usize, v: f64) {
        self.v[neuron] = v;
    }

    pub fn synaptic_current(&self, neuron: usize) -> f64 {
        self.i_syn[neuron]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Advances the state by one step and returns the neurons that spiked
    /// at the new current time, in ascending id order.
    pub fn step(&mut self) -> Result<&[u32], SimError> {
        let step = self.step_idx;
        let end_idx = step + 1;
        let sigma = self.drive.sigma_noise;

        self.buffer.drain_into(step, &mut self.i_syn);

        // Depression fires on presynaptic arrival, reading the postsynaptic
        // trace that excludes posts at this exact time.
        if self.stdp.lambda_p != 0.0 {
            let row = (step % self.hist_capacity as u64) as usize;
            let mut arrivals = std::mem::take(&mut self.stdp_arrivals[row]);
            for edge_idx in arrivals.drain(..) {
                let post = self.edge_post[edge_idx as usize] as usize;
                let w = &mut self.weights[edge_idx as usize];
                *w = apply_stdp_on_pre(*w, self.x_post_before_incr[post], &self.stdp, self.w_max_ee);
            }
            self.stdp_arrivals[row] = arrivals;
        }

        let mut bad = usize::MAX;
        for i in 0..self.n {
            if self.refrac_until_step[i] >= end_idx {
                self.v[i] = self.neuron.v_reset_mv;
            } else {
                let noise = if sigma > 0.0 {
                    sigma * self.sqrt_dt * self.noise.normal(i as u32, step)
                } else {
                    0.0
                };
                let target = self.neuron.v_rest_mv + self.i_syn[i] + self.drive.i_dc + noise;
                self.v[i] = target + (self.v[i] - target) * self.alpha_m;
            }
            self.i_syn[i] *= self.alpha_s;
            if !(self.v[i].is_finite() && self.i_syn[i].is_finite()) {
                bad = bad.min(i);
            }
        }
        if bad != usize::MAX {
            return Err(SimError::NonFiniteState {
                step,
                t_ms: end_idx as f64 * self.dt_ms,
                neuron: bad,
            });
        }

        self.spiking.clear();
        for i in 0..self.n {
            if self.v[i] >= self.neuron.v_threshold_mv && self.refrac_until_step[i] < end_idx {
                self.spiking.push(i as u32);
                self.v[i] = self.neuron.v_reset_mv;
                self.refrac_until_step[i] = end_idx + self.refrac_steps;
            }
        }

        let plastic = self.stdp.lambda_p != 0.0;
        for &j in &self.spiking {
            let j_exc = (j as usize) < self.n_exc;
            let sign = if j_exc { 1.0 } else { -1.0 };
            let (lo, hi) = (
                self.out_offsets[j as usize] as usize,
                self.out_offsets[j as usize + 1] as usize,
            );
            for e in &self.out_edges[lo..hi] {
                let delivery = step + 1 + u64::from(e.delay_steps);
                self.buffer.schedule(
                    delivery,
                    e.post as usize,
                    sign * self.weights[e.edge_idx as usize],
                );
                if plastic && j_exc && (e.post as usize) < self.n_exc {
                    let row = (delivery % self.hist_capacity as u64) as usize;
                    self.stdp_arrivals[row].push(e.edge_idx);
                }
            }
        }

        self.update_plasticity(step);
        self.step_idx = end_idx;
        Ok(&self.spiking)
    }

    /// Trace bookkeeping plus the potentiation updates for this step's
    /// postsynaptic spikes.
    ///
    /// Potentiation at a post spike reads the presynaptic trace through the
    /// synapse's own delay (a snapshot from `delay_steps` steps ago), so an
    /// arrival at exactly the post-spike time contributes a full unit: a
    /// zero timing difference takes the potentiation branch. The matching
    /// depression events run at arrival time in `step`, reading
    /// `x_post_before_incr`, which excludes same-time post spikes.
    fn update_plasticity(&mut self, step: u64) {
        for x in &mut self.x_pre {
            *x *= self.alpha_plus;
        }
        for x in &mut self.x_post {
            *x *= self.alpha_minus;
        }
        self.x_post_before_incr.copy_from_slice(&self.x_post);

        let plastic = self.stdp.lambda_p != 0.0;
        if !self.spiking.is_empty() {
            if plastic {
                for &i in &self.spiking {
                    if (i as usize) >= self.n_exc {
                        continue;
                    }
                    let (lo, hi) = (
                        self.in_plastic_offsets[i as usize] as usize,
                        self.in_plastic_offsets[i as usize + 1] as usize,
                    );
                    for &(edge_idx, pre) in &self.in_plastic[lo..hi] {
                        let delay = u64::from(self.edge_delay_steps[edge_idx as usize]);
                        let x_delayed = if step >= delay {
                            let row = ((step - delay) % self.hist_capacity as u64) as usize;
                            self.x_pre_hist[row * self.n + pre as usize]
                        } else {
                            0.0
                        };
                        let w = &mut self.weights[edge_idx as usize];
                        *w = apply_stdp_on_post(*w, x_delayed, &self.stdp, self.w_max_ee);
                    }
                }
            }
            for &j in &self.spiking {
                self.x_pre[j as usize] += 1.0;
            }
            for &i in &self.spiking {
                self.x_post[i as usize] += 1.0;
            }
        }

        if plastic {
            let row = (step % self.hist_capacity as u64) as usize;
            self.x_pre_hist[row * self.n..(row + 1) * self.n].copy_from_slice(&self.x_pre);
        }
    }
}

/// How much the plastic weights moved over a run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeightChangeSummary {
    pub n_plastic: usize,
    pub mean_abs_delta: f64,
    pub max_abs_delta: f64,
    pub mean_initial: f64,
    pub mean_final: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: SpikeRecord,
    pub topology: Topology,
    pub initial_weights: Vec<f64>,
    pub final_weights: Vec<f64>,
    pub weight_change: WeightChangeSummary,
}

/// Simulates one full run. Deterministic for fixed (config, seed): the
/// topology seed and the noise stream are both derived from `seed`, and
/// the noise stream does not depend on plasticity settings, so paired
/// conditions can share identical streams.
pub fn run(cfg: &SimConfig, seed: u64) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let topology = network::build(
        &network::NetParams::from_config(cfg),
        &cfg.delay_spec(),
        split_seed(seed, TOPOLOGY_TAG),
    )?;
    let mut sim = Simulation::new(&topology, cfg, split_seed(seed, NOISE_TAG));
    let initial_weights = sim.weights().to_vec();

    let n_steps = (cfg.duration_ms / cfg.dt_ms).round() as u64;
    let mut spikes = Vec::new();
    for step in 0..n_steps {
        let t = (step + 1) as f64 * cfg.dt_ms;
        for &neuron in sim.step()? {
            spikes.push(Spike { t_ms: t, neuron });
        }
    }

    let final_weights = sim.weights().to_vec();
    let plastic_idx: Vec<usize> = topology
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| e.plastic)
        .map(|(i, _)| i)
        .collect();
    let n_plastic = plastic_idx.len();
    let (mut sum_abs, mut max_abs, mut sum_init, mut sum_final) = (0.0f64, 0.0f64, 0.0, 0.0);
    for &i in &plastic_idx {
        let delta = (final_weights[i] - initial_weights[i]).abs();
        sum_abs += delta;
        max_abs = max_abs.max(delta);
        sum_init += initial_weights[i];
        sum_final += final_weights[i];
    }
    let denom = n_plastic.max(1) as f64;
    let weight_change = WeightChangeSummary {
        n_plastic,
        mean_abs_delta: sum_abs / denom,
        max_abs_delta: max_abs,
        mean_initial: sum_init / denom,
        mean_final: sum_final / denom,
    };

    Ok(RunOutput {
        record: SpikeRecord {
            n_neurons: topology.n_neurons() as u32,
            duration_ms: cfg.duration_ms,
            spikes,
        },
        topology,
        initial_weights,
        final_weights,
        weight_change,
    })
}
