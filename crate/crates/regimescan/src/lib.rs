//! Deterministic recurrent spiking-network simulator and sweep harness.
//!
//! The crate maps silent (SIL), asynchronous-irregular (AI), and
//! oscillatory (OSC) population regimes of a sparse excitatory-inhibitory
//! leaky integrate-and-fire network across postsynaptic decay, conduction
//! delay, and plasticity rate, with spectral metrics, a linear delayed
//! rate-model reference boundary, and paired control experiments.
//!
//! Determinism is a hard contract: every run is a pure function of
//! (configuration, seed), and sweep outputs do not depend on worker count
//! or scheduling.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod hopf;
pub mod io;
pub mod network;
pub mod rng;
pub mod stats;
pub mod svg;
pub mod sweep;

pub use analysis::{
    analyze_record, classify, population_rate, spectral_summary, welch_psd, ClassifyThresholds,
    RateTrace, RegimeLabel, SpectralSummary,
};
pub use config::{DelaySpec, SimConfig};
pub use dynamics::{
    apply_stdp_on_post, apply_stdp_on_pre, run, RunOutput, SimError, Simulation, Spike,
    SpikeRecord,
};
pub use hopf::{boundary_curve, critical_gain, hopf_frequency, BoundaryPoint, HopfError};
pub use network::{build, empirical_delay_cv, NetParams, Topology};
pub use stats::{hedges_g, percent_delta, summarize, SampleSummary, StatsError};
pub use sweep::{
    derive_seed, run_controls, run_sweep, run_sweep_serial, ControlReport, RegimeCell, RegimeMap,
    SweepGrid,
};
