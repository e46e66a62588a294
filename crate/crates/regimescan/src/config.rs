//! Experiment configuration.
//!
//! One flat JSON namespace describes an entire experiment: neuron, synapse,
//! plasticity, drive, delay, analysis, classifier, sweep-grid, and output
//! settings. Every field has a default; unknown keys are rejected so typos
//! cannot silently fall back to defaults.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Membrane parameters of the leaky integrate-and-fire neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NeuronParams {
    pub tau_m_ms: f64,
    pub v_rest_mv: f64,
    pub v_threshold_mv: f64,
    pub v_reset_mv: f64,
    pub t_refractory_ms: f64,
}

/// Synaptic decay constant and population-pair coupling magnitudes.
///
/// Weights are stored as non-negative magnitudes; inhibitory couplings are
/// applied with negative sign at delivery time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynapseParams {
    pub tau_s_ms: f64,
    pub w_ee: f64,
    pub w_ei: f64,
    pub w_ie: f64,
    pub w_ii: f64,
    pub w_max_ee: f64,
}

/// Pair-based plasticity rule parameters for excitatory-to-excitatory synapses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StdpParams {
    pub lambda_p: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau_plus_ms: f64,
    pub tau_minus_ms: f64,
}

/// External drive: constant current plus per-step Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriveParams {
    pub i_dc: f64,
    pub sigma_noise: f64,
}

/// Conduction-delay specification: a base delay plus optional per-synapse
/// jitter expressed as a coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelaySpec {
    pub d_base_ms: f64,
    pub jitter_cv: f64,
}

/// Frequency bands and thresholds used by spectral analysis and the
/// regime classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisParams {
    pub rate_bin_ms: f64,
    pub kernel_sigma_ms: f64,
    pub psd_segment_ms: f64,
    pub psd_overlap: f64,
    pub prom_band_lo_hz: f64,
    pub prom_band_hi_hz: f64,
    pub f0_band_lo_hz: f64,
    pub f0_band_hi_hz: f64,
    pub rate_sil_hz: f64,
    pub prom_osc: f64,
}

/// Full experiment description. Flat key namespace, documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    // timing
    pub duration_ms: f64,
    pub burn_in_ms: f64,
    pub dt_ms: f64,

    // network
    pub n_exc: usize,
    pub n_inh: usize,
    pub p_connect: f64,

    // neuron
    pub tau_m_ms: f64,
    pub v_rest_mv: f64,
    pub v_threshold_mv: f64,
    pub v_reset_mv: f64,
    pub t_refractory_ms: f64,

    // synapse
    pub tau_s_ms: f64,
    pub w_ee: f64,
    pub w_ei: f64,
    pub w_ie: f64,
    pub w_ii: f64,
    pub w_max_ee: f64,

    // plasticity
    pub lambda_p: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau_plus_ms: f64,
    pub tau_minus_ms: f64,

    // drive
    pub i_dc: f64,
    pub sigma_noise: f64,

    // delays
    pub d_base_ms: f64,
    pub jitter_cv: f64,
    pub control_jitter_cv: f64,

    // analysis
    pub rate_bin_ms: f64,
    pub kernel_sigma_ms: f64,
    pub psd_segment_ms: f64,
    pub psd_overlap: f64,
    pub prom_band_lo_hz: f64,
    pub prom_band_hi_hz: f64,
    pub f0_band_lo_hz: f64,
    pub f0_band_hi_hz: f64,

    // classifier thresholds
    pub rate_sil_hz: f64,
    pub prom_osc: f64,

    // linear-model reference boundary
    pub hopf_gain_ref: f64,

    // sweep grid
    pub grid_tau_s_ms: Vec<f64>,
    pub grid_d_ms: Vec<f64>,
    pub grid_lambda_p: Vec<f64>,
    pub n_seeds: usize,
    pub master_seed: u64,

    // output
    pub out_dir: String,
}

fn arange(lo: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + step * i as f64).collect()
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration_ms: 8000.0,
            burn_in_ms: 500.0,
            dt_ms: 0.1,

            n_exc: 160,
            n_inh: 40,
            p_connect: 0.1,

            tau_m_ms: 20.0,
            v_rest_mv: -65.0,
            v_threshold_mv: -50.0,
            v_reset_mv: -65.0,
            t_refractory_ms: 2.0,

            tau_s_ms: 5.0,
            w_ee: 1.2,
            w_ei: 1.6,
            w_ie: 6.0,
            w_ii: 4.0,
            w_max_ee: 2.4,

            lambda_p: 2e-3,
            a_plus: 1.0,
            a_minus: 1.05,
            tau_plus_ms: 20.0,
            tau_minus_ms: 20.0,

            i_dc: 21.0,
            sigma_noise: 100.0,

            d_base_ms: 6.25,
            jitter_cv: 0.0,
            control_jitter_cv: 0.2,

            rate_bin_ms: 1.0,
            kernel_sigma_ms: 5.0,
            psd_segment_ms: 1000.0,
            psd_overlap: 0.5,
            prom_band_lo_hz: 5.0,
            prom_band_hi_hz: 100.0,
            f0_band_lo_hz: 8.0,
            f0_band_hi_hz: 70.0,

            rate_sil_hz: 1.0,
            prom_osc: 10.0,

            hopf_gain_ref: 5.0,

            grid_tau_s_ms: arange(5.0, 2.5, 11),
            grid_d_ms: arange(0.0, 1.25, 9),
            grid_lambda_p: vec![0.0, 5e-4, 2e-3],
            n_seeds: 5,
            master_seed: 42,

            out_dir: "out".to_string(),
        }
    }
}

impl SimConfig {
    pub fn neuron(&self) -> NeuronParams {
        NeuronParams {
            tau_m_ms: self.tau_m_ms,
            v_rest_mv: self.v_rest_mv,
            v_threshold_mv: self.v_threshold_mv,
            v_reset_mv: self.v_reset_mv,
            t_refractory_ms: self.t_refractory_ms,
        }
    }

    pub fn synapse(&self) -> SynapseParams {
        SynapseParams {
            tau_s_ms: self.tau_s_ms,
            w_ee: self.w_ee,
            w_ei: self.w_ei,
            w_ie: self.w_ie,
            w_ii: self.w_ii,
            w_max_ee: self.w_max_ee,
        }
    }

    pub fn stdp(&self) -> StdpParams {
        StdpParams {
            lambda_p: self.lambda_p,
            a_plus: self.a_plus,
            a_minus: self.a_minus,
            tau_plus_ms: self.tau_plus_ms,
            tau_minus_ms: self.tau_minus_ms,
        }
    }

    pub fn drive(&self) -> DriveParams {
        DriveParams {
            i_dc: self.i_dc,
            sigma_noise: self.sigma_noise,
        }
    }

    pub fn delay_spec(&self) -> DelaySpec {
        DelaySpec {
            d_base_ms: self.d_base_ms,
            jitter_cv: self.jitter_cv,
        }
    }

    pub fn analysis(&self) -> AnalysisParams {
        AnalysisParams {
            rate_bin_ms: self.rate_bin_ms,
            kernel_sigma_ms: self.kernel_sigma_ms,
            psd_segment_ms: self.psd_segment_ms,
            psd_overlap: self.psd_overlap,
            prom_band_lo_hz: self.prom_band_lo_hz,
            prom_band_hi_hz: self.prom_band_hi_hz,
            f0_band_lo_hz: self.f0_band_lo_hz,
            f0_band_hi_hz: self.f0_band_hi_hz,
            rate_sil_hz: self.rate_sil_hz,
            prom_osc: self.prom_osc,
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.n_exc + self.n_inh
    }

    /// Checks every structural invariant. Called once after parsing and
    /// again inside `run` (sweeps rewrite per-point fields).
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt_ms > 0.0) {
            return Err(invalid("dt_ms must be > 0"));
        }
        if !(self.tau_m_ms > 0.0) {
            return Err(invalid("tau_m_ms must be > 0"));
        }
        if !(self.tau_s_ms > 0.0) {
            return Err(invalid("tau_s_ms must be > 0"));
        }
        let dt_cap = self.tau_m_ms.min(self.tau_s_ms) / 10.0;
        if self.dt_ms > dt_cap {
            return Err(invalid(format!(
                "dt_ms = {} too coarse: must be <= min(tau_m_ms, tau_s_ms)/10 = {}",
                self.dt_ms, dt_cap
            )));
        }
        if !(self.v_reset_mv < self.v_threshold_mv) {
            return Err(invalid("v_reset_mv must be < v_threshold_mv"));
        }
        if self.t_refractory_ms < 0.0 {
            return Err(invalid("t_refractory_ms must be >= 0"));
        }
        if !(self.duration_ms > self.burn_in_ms) {
            return Err(invalid("duration_ms must exceed burn_in_ms"));
        }
        if self.n_exc == 0 && self.n_inh == 0 {
            return Err(invalid("network must contain at least one neuron"));
        }
        if !(0.0..=1.0).contains(&self.p_connect) {
            return Err(invalid("p_connect must lie in [0, 1]"));
        }
        for (name, w) in [
            ("w_ee", self.w_ee),
            ("w_ei", self.w_ei),
            ("w_ie", self.w_ie),
            ("w_ii", self.w_ii),
        ] {
            if !(w >= 0.0) {
                return Err(invalid(format!("{name} must be >= 0")));
            }
        }
        if !(self.w_ee <= self.w_max_ee) {
            return Err(invalid("w_ee must not exceed w_max_ee"));
        }
        if !(self.lambda_p >= 0.0) {
            return Err(invalid("lambda_p must be >= 0"));
        }
        if !(self.a_plus > 0.0 && self.a_minus > 0.0) {
            return Err(invalid("a_plus and a_minus must be > 0"));
        }
        if !(self.tau_plus_ms > 0.0 && self.tau_minus_ms > 0.0) {
            return Err(invalid("tau_plus_ms and tau_minus_ms must be > 0"));
        }
        if !(self.sigma_noise >= 0.0) {
            return Err(invalid("sigma_noise must be >= 0"));
        }
        if self.d_base_ms < 0.0 {
            return Err(invalid("d_base_ms must be >= 0"));
        }
        if self.jitter_cv < 0.0 || self.control_jitter_cv < 0.0 {
            return Err(invalid("jitter coefficients must be >= 0"));
        }
        if self.jitter_cv > 0.0 && self.d_base_ms == 0.0 {
            return Err(invalid("jitter_cv > 0 requires d_base_ms > 0"));
        }
        if !(self.rate_bin_ms > 0.0) {
            return Err(invalid("rate_bin_ms must be > 0"));
        }
        if !(self.kernel_sigma_ms > 0.0) {
            return Err(invalid("kernel_sigma_ms must be > 0"));
        }
        if !(self.psd_segment_ms > 0.0) {
            return Err(invalid("psd_segment_ms must be > 0"));
        }
        if !(0.0..1.0).contains(&self.psd_overlap) {
            return Err(invalid("psd_overlap must lie in [0, 1)"));
        }
        if !(self.prom_band_lo_hz > 0.0 && self.prom_band_hi_hz > self.prom_band_lo_hz) {
            return Err(invalid("prominence band must satisfy 0 < lo < hi"));
        }
        if !(self.f0_band_lo_hz > 0.0 && self.f0_band_hi_hz > self.f0_band_lo_hz) {
            return Err(invalid("f0 band must satisfy 0 < lo < hi"));
        }
        if !(self.rate_sil_hz >= 0.0) {
            return Err(invalid("rate_sil_hz must be >= 0"));
        }
        if !(self.prom_osc >= 0.0) {
            return Err(invalid("prom_osc must be >= 0"));
        }
        for (name, grid) in [
            ("grid_tau_s_ms", &self.grid_tau_s_ms),
            ("grid_d_ms", &self.grid_d_ms),
            ("grid_lambda_p", &self.grid_lambda_p),
        ] {
            if grid.is_empty() {
                return Err(invalid(format!("{name} must be nonempty")));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(format!("{name} must be strictly increasing")));
            }
        }
        if self.grid_tau_s_ms[0] <= 0.0 {
            return Err(invalid("grid_tau_s_ms values must be > 0"));
        }
        if self.grid_d_ms[0] < 0.0 {
            return Err(invalid("grid_d_ms values must be >= 0"));
        }
        if self.grid_lambda_p[0] < 0.0 {
            return Err(invalid("grid_lambda_p values must be >= 0"));
        }
        if self.n_seeds == 0 {
            return Err(invalid("n_seeds must be >= 1"));
        }
        Ok(())
    }
}
