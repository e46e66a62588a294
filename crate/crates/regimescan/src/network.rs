//! Network construction: sparse random topology, initial weights,
//! per-synapse conduction delays, and plasticity flags.
//!
//! Neuron ids follow the convention excitatory = [0, n_exc), inhibitory =
//! [n_exc, n_exc + n_inh). A synapse is plastic iff both endpoints are
//! excitatory. Connectivity is independent Bernoulli per ordered non-self
//! pair; connectivity draws are completed before any delay draw, so two
//! builds from the same seed share the same edge set even when their delay
//! specifications differ.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::config::{DelaySpec, SimConfig};

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("jitter_cv > 0 requires d_base_ms > 0")]
    JitterRequiresBaseDelay,
    #[error("need at least two edges, got {0}")]
    TooFewEdges(usize),
}

/// Structural parameters consumed by `build`.
#[derive(Debug, Clone, Copy)]
pub struct NetParams {
    pub n_exc: usize,
    pub n_inh: usize,
    pub p_connect: f64,
    pub w_ee: f64,
    pub w_ei: f64,
    pub w_ie: f64,
    pub w_ii: f64,
    pub dt_ms: f64,
}

impl NetParams {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            n_exc: cfg.n_exc,
            n_inh: cfg.n_inh,
            p_connect: cfg.p_connect,
            w_ee: cfg.w_ee,
            w_ei: cfg.w_ei,
            w_ie: cfg.w_ie,
            w_ii: cfg.w_ii,
            dt_ms: cfg.dt_ms,
        }
    }
}

/// One directed synapse. `weight` is a non-negative magnitude; the sign is
/// applied at delivery from the presynaptic population. `delay_ms` is the
/// quantized delay, always `delay_steps * dt_ms` with `delay_steps >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub pre: u32,
    pub post: u32,
    pub weight: f64,
    pub delay_ms: f64,
    pub delay_steps: u32,
    pub plastic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    pub n_exc: usize,
    pub n_inh: usize,
    pub p_connect: f64,
    pub dt_ms: f64,
    pub edges: Vec<Edge>,
}

impl Topology {
    pub fn n_neurons(&self) -> usize {
        self.n_exc + self.n_inh
    }

    pub fn max_delay_steps(&self) -> u32 {
        self.edges.iter().map(|e| e.delay_steps).max().unwrap_or(1)
    }
}

/// Rounds a delay to the step grid, never below one step.
pub fn quantize_delay_steps(delay_ms: f64, dt_ms: f64) -> u32 {
    ((delay_ms / dt_ms).round() as i64).max(1) as u32
}

/// Builds the topology reproducibly from `seed`.
///
/// Delays are all `d_base_ms` when `jitter_cv` is zero; otherwise they are
/// drawn i.i.d. from a normal distribution with mean `d_base_ms` and SD
/// `jitter_cv * d_base_ms`, truncated below at `dt_ms` by redraw.
pub fn build(params: &NetParams, delays: &DelaySpec, seed: u64) -> Result<Topology, NetworkError> {
    if delays.jitter_cv > 0.0 && delays.d_base_ms <= 0.0 {
        return Err(NetworkError::JitterRequiresBaseDelay);
    }
    let n = params.n_exc + params.n_inh;
    let n_exc = params.n_exc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Pass 1: connectivity and weights only.
    let mut edges = Vec::new();
    for pre in 0..n {
        for post in 0..n {
            if pre == post {
                continue;
            }
            if rng.gen::<f64>() >= params.p_connect {
                continue;
            }
            let pre_exc = pre < n_exc;
            let post_exc = post < n_exc;
            let weight = match (pre_exc, post_exc) {
                (true, true) => params.w_ee,
                (true, false) => params.w_ei,
                (false, true) => params.w_ie,
                (false, false) => params.w_ii,
            };
            edges.push(Edge {
                pre: pre as u32,
                post: post as u32,
                weight,
                delay_ms: 0.0,
                delay_steps: 0,
                plastic: pre_exc && post_exc,
            });
        }
    }

    // Pass 2: delays.
    if delays.jitter_cv == 0.0 {
        let steps = quantize_delay_steps(delays.d_base_ms, params.dt_ms);
        for e in &mut edges {
            e.delay_steps = steps;
            e.delay_ms = f64::from(steps) * params.dt_ms;
        }
    } else {
        let dist = Normal::new(delays.d_base_ms, delays.jitter_cv * delays.d_base_ms)
            .expect("valid normal parameters");
        for e in &mut edges {
            let mut d = dist.sample(&mut rng);
            while d < params.dt_ms {
                d = dist.sample(&mut rng);
            }
            let steps = quantize_delay_steps(d, params.dt_ms);
            e.delay_steps = steps;
            e.delay_ms = f64::from(steps) * params.dt_ms;
        }
    }

    Ok(Topology {
        n_exc: params.n_exc,
        n_inh: params.n_inh,
        p_connect: params.p_connect,
        dt_ms: params.dt_ms,
        edges,
    })
}

/// Sample coefficient of variation of the edge delays (population SD,
/// i.e. n denominator).
pub fn empirical_delay_cv(topology: &Topology) -> Result<f64, NetworkError> {
    let n = topology.edges.len();
    if n < 2 {
        return Err(NetworkError::TooFewEdges(n));
    }
    let mean = topology.edges.iter().map(|e| e.delay_ms).sum::<f64>() / n as f64;
    let var = topology
        .edges
        .iter()
        .map(|e| (e.delay_ms - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    Ok(var.sqrt() / mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n_exc: usize, n_inh: usize, p: f64) -> NetParams {
        NetParams {
            n_exc,
            n_inh,
            p_connect: p,
            w_ee: 1.0,
            w_ei: 2.0,
            w_ie: 3.0,
            w_ii: 4.0,
            dt_ms: 0.1,
        }
    }

    fn uniform(d: f64) -> DelaySpec {
        DelaySpec {
            d_base_ms: d,
            jitter_cv: 0.0,
        }
    }

    #[test]
    fn build_is_reproducible() {
        let p = params(160, 40, 0.1);
        let a = build(&p, &uniform(6.25), 7).unwrap();
        let b = build(&p, &uniform(6.25), 7).unwrap();
        assert_eq!(a, b);
        let c = build(&p, &uniform(6.25), 8).unwrap();
        assert_ne!(a.edges.len(), 0);
        assert_ne!(a, c);
    }

    #[test]
    fn no_self_connections_and_plastic_mask() {
        let p = params(160, 40, 0.1);
        let t = build(&p, &uniform(2.0), 3).unwrap();
        for e in &t.edges {
            assert_ne!(e.pre, e.post);
            assert_eq!(e.plastic, e.pre < 160 && e.post < 160);
        }
    }

    #[test]
    fn uniform_delays_share_one_quantized_value() {
        let p = params(160, 40, 0.1);
        let t = build(&p, &uniform(6.25), 11).unwrap();
        let steps = quantize_delay_steps(6.25, 0.1);
        let want = f64::from(steps) * 0.1;
        for e in &t.edges {
            assert_eq!(e.delay_steps, steps);
            assert_eq!(e.delay_ms, want);
        }
        assert!((want - 6.25).abs() <= 0.05 + 1e-12);
    }

    #[test]
    fn zero_probability_gives_zero_edges() {
        let p = params(100, 20, 0.0);
        let t = build(&p, &uniform(1.0), 5).unwrap();
        assert!(t.edges.is_empty());
    }

    #[test]
    fn zero_base_delay_maps_to_one_step() {
        let p = params(10, 2, 0.5);
        let t = build(&p, &uniform(0.0), 5).unwrap();
        for e in &t.edges {
            assert_eq!(e.delay_steps, 1);
            assert_eq!(e.delay_ms, 0.1);
        }
    }

    #[test]
    fn edge_count_within_binomial_bounds() {
        // 200 neurons, p = 0.1: mean = 0.1 * 200 * 199 = 3980,
        // SD = sqrt(3980 * 0.9) ~= 59.85, bound = 4 SD.
        let p = params(160, 40, 0.1);
        let mean = 3980.0;
        let sd = (3980.0f64 * 0.9).sqrt();
        for seed in 0..100 {
            let t = build(&p, &uniform(1.0), seed).unwrap();
            let count = t.edges.len() as f64;
            assert!(
                (count - mean).abs() <= 4.0 * sd,
                "seed {seed}: edge count {count} outside 4 SD of {mean}"
            );
        }
    }

    #[test]
    fn jitter_requires_positive_base() {
        let p = params(10, 2, 0.5);
        let err = build(
            &p,
            &DelaySpec {
                d_base_ms: 0.0,
                jitter_cv: 0.2,
            },
            1,
        )
        .unwrap_err();
        assert_eq!(err, NetworkError::JitterRequiresBaseDelay);
    }

    #[test]
    fn connectivity_is_independent_of_delay_spec() {
        let p = params(160, 40, 0.1);
        let plain = build(&p, &uniform(6.25), 21).unwrap();
        let jittered = build(
            &p,
            &DelaySpec {
                d_base_ms: 6.25,
                jitter_cv: 0.2,
            },
            21,
        )
        .unwrap();
        assert_eq!(plain.edges.len(), jittered.edges.len());
        for (a, b) in plain.edges.iter().zip(&jittered.edges) {
            assert_eq!((a.pre, a.post, a.weight.to_bits()), (b.pre, b.post, b.weight.to_bits()));
        }
    }

    #[test]
    fn empirical_cv_uniform_is_zero() {
        let p = params(40, 10, 0.3);
        let t = build(&p, &uniform(5.0), 2).unwrap();
        assert_eq!(empirical_delay_cv(&t).unwrap(), 0.0);
    }

    #[test]
    fn empirical_cv_two_point_convention() {
        // Delays 5 and 15: population SD 5, mean 10, CV 0.5.
        let mut t = build(&params(3, 0, 0.0), &uniform(1.0), 1).unwrap();
        t.edges.push(Edge {
            pre: 0,
            post: 1,
            weight: 1.0,
            delay_ms: 5.0,
            delay_steps: 50,
            plastic: true,
        });
        t.edges.push(Edge {
            pre: 1,
            post: 2,
            weight: 1.0,
            delay_ms: 15.0,
            delay_steps: 150,
            plastic: true,
        });
        assert!((empirical_delay_cv(&t).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empirical_cv_recovers_jitter_target() {
        // Truncation at dt sits ~4.9 SD below the mean, so the sample CV
        // of a build with >= 3000 edges stays within 0.03 of the target.
        let p = params(160, 40, 0.1);
        let t = build(
            &p,
            &DelaySpec {
                d_base_ms: 6.25,
                jitter_cv: 0.2,
            },
            17,
        )
        .unwrap();
        assert!(t.edges.len() >= 3000);
        let cv = empirical_delay_cv(&t).unwrap();
        assert!((cv - 0.2).abs() <= 0.03, "cv = {cv}");
    }

    #[test]
    fn too_few_edges_for_cv() {
        let t = build(&params(2, 0, 0.0), &uniform(1.0), 1).unwrap();
        assert_eq!(empirical_delay_cv(&t).unwrap_err(), NetworkError::TooFewEdges(0));
    }
}
