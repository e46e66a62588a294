//! CSV and JSON emission. Numeric fields are written with the shortest
//! representation that round-trips to the same binary value, so repeated
//! runs produce byte-identical files.

use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::RateTrace;
use crate::config::SimConfig;
use crate::dynamics::SpikeRecord;
use crate::hopf::BoundaryPoint;
use crate::sweep::{ControlReport, RegimeMap};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_raster_csv(path: &Path, record: &SpikeRecord) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t_ms", "neuron"])?;
    for s in &record.spikes {
        w.write_record([fmt_f64(s.t_ms), s.neuron.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rate_csv(path: &Path, trace: &RateTrace) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t_ms", "rate_hz"])?;
    for (i, &v) in trace.values.iter().enumerate() {
        let t = trace.t_start_ms + i as f64 * trace.bin_ms;
        w.write_record([fmt_f64(t), fmt_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_psd_csv(path: &Path, freqs_hz: &[f64], psd: &[f64]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["freq_hz", "psd"])?;
    for (&f, &v) in freqs_hz.iter().zip(psd) {
        w.write_record([fmt_f64(f), fmt_f64(v)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (grid point, seed).
pub fn write_sweep_cells_csv(path: &Path, map: &RegimeMap) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "tau_s_ms",
        "d_ms",
        "lambda_p",
        "seed_idx",
        "seed",
        "regime",
        "prominence",
        "f0_hz",
        "rate_hz",
        "error",
    ])?;
    for cell in &map.cells {
        for r in &cell.runs {
            w.write_record([
                fmt_f64(cell.tau_s_ms),
                fmt_f64(cell.d_ms),
                fmt_f64(cell.lambda_p),
                r.seed_idx.to_string(),
                r.seed.to_string(),
                r.regime.map(|l| l.to_string()).unwrap_or_default(),
                fmt_opt(r.summary.as_ref().map(|s| s.prominence)),
                fmt_opt(r.summary.as_ref().and_then(|s| s.f0_hz)),
                fmt_opt(r.summary.as_ref().map(|s| s.mean_rate_hz)),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per grid point with seed-aggregated statistics.
pub fn write_sweep_agg_csv(path: &Path, map: &RegimeMap) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "tau_s_ms",
        "d_ms",
        "lambda_p",
        "n_ok",
        "n_failed",
        "regime",
        "prom_mean",
        "prom_sd",
        "f0_mean",
        "f0_sd",
        "f0_n",
        "rate_mean",
        "rate_sd",
    ])?;
    for cell in &map.cells {
        w.write_record([
            fmt_f64(cell.tau_s_ms),
            fmt_f64(cell.d_ms),
            fmt_f64(cell.lambda_p),
            (cell.runs.len() - cell.n_failed).to_string(),
            cell.n_failed.to_string(),
            cell.majority.map(|l| l.to_string()).unwrap_or_default(),
            fmt_opt(cell.prominence.mean),
            fmt_opt(cell.prominence.sd),
            fmt_opt(cell.f0_hz.mean),
            fmt_opt(cell.f0_hz.sd),
            cell.f0_hz.n.to_string(),
            fmt_opt(cell.rate_hz.mean),
            fmt_opt(cell.rate_hz.sd),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Control-condition summary table; Baseline rows leave the delta and
/// effect-size columns empty.
pub fn write_controls_csv(path: &Path, report: &ControlReport) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "condition",
        "prom_mean",
        "prom_sd",
        "f0_mean",
        "f0_sd",
        "rate_mean",
        "rate_sd",
        "prom_delta_pct",
        "hedges_g",
    ])?;
    for c in &report.conditions {
        w.write_record([
            c.condition.to_string(),
            fmt_opt(c.prominence.mean),
            fmt_opt(c.prominence.sd),
            fmt_opt(c.f0_hz.mean),
            fmt_opt(c.f0_hz.sd),
            fmt_opt(c.rate_hz.mean),
            fmt_opt(c.rate_hz.sd),
            fmt_opt(c.prom_delta_pct),
            fmt_opt(c.hedges_g),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Critical-gain surface rows: (tau_s, d, G_c, omega).
pub fn write_hopf_csv(path: &Path, rows: &[(f64, f64, f64, f64)]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["tau_s_ms", "d_ms", "g_c", "omega_rad_per_ms"])?;
    for &(tau_s, d, g, omega) in rows {
        w.write_record([fmt_f64(tau_s), fmt_f64(d), fmt_f64(g), fmt_f64(omega)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct BoundaryFile<'a> {
    pub tau_m_ms: f64,
    pub gain_ref: f64,
    pub points: &'a [BoundaryPoint],
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Documented algorithmic conventions, attached to every meta.json so the
/// outputs are auditable without reading the source.
#[derive(Debug, Serialize)]
pub struct Conventions {
    pub stdp_rule: &'static str,
    pub stdp_timing: &'static str,
    pub integration: &'static str,
    pub noise: &'static str,
    pub delay_quantization: &'static str,
    pub delay_jitter: &'static str,
    pub rate_kernel: &'static str,
    pub welch: &'static str,
    pub psd_median: &'static str,
    pub f0_pick: &'static str,
    pub boundary_model: &'static str,
    pub seed_derivation: &'static str,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            stdp_rule: "pair-based, branch-wise: +lambda_p*a_plus*exp(-x/tau_plus) for \
                        post-minus-pre x >= 0, -lambda_p*a_minus*exp(-|x|/tau_minus) for x < 0; \
                        all-to-all pairing via exponential traces",
            stdp_timing: "presynaptic event time is the spike arrival time (emission plus the \
                          synapse's conduction delay); depression applies at arrival, \
                          potentiation at the postsynaptic spike against the delay-shifted \
                          presynaptic trace; a zero difference potentiates",
            integration: "exponential-Euler per state variable (analytic decay plus impulse \
                          increments); delayed increments are applied before the threshold check",
            noise: "per neuron and step: i_dc + sigma_noise*sqrt(dt_ms)*xi, xi standard normal \
                    from a counter-based stream keyed by (seed, neuron, step)",
            delay_quantization: "round to nearest dt_ms, minimum one step; d = 0 maps to one step",
            delay_jitter: "normal(mean d_base_ms, sd jitter_cv*d_base_ms) truncated below at \
                           dt_ms by redraw; applied to all synapses",
            rate_kernel: "Gaussian, sigma = kernel_sigma_ms, support +-4 sigma, unit sum, \
                          reflect-padded edges",
            welch: "mean-subtracted segments, periodic Hann window, one-sided density, \
                    averaged across segments",
            psd_median: "band endpoints inclusive; even bin count takes the mean of the \
                         central pair",
            f0_pick: "argmax over the f0 band, reported only when it is a strict local maximum; \
                      ties break toward the lower frequency",
            boundary_model: "single effective population with delayed negative feedback through \
                             membrane and synaptic poles: (1+s*tau_m)(1+s*tau_s)+G*exp(-s*d)=0; \
                             a coarse reference, not a fit",
            seed_derivation: "run seed = hash64(master_seed, point_index, seed_index); topology \
                              and noise streams are split from the run seed by role tags",
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a SimConfig,
    pub conventions: Conventions,
}

pub fn write_meta_json(path: &Path, command: &str, cfg: &SimConfig) -> Result<(), IoError> {
    write_json(
        path,
        &Meta {
            tool: "regimescan",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: cfg,
            conventions: Conventions::default(),
        },
    )
}

/// Reads a rate-trace CSV (t_ms, rate_hz) back into a `RateTrace`; the bin
/// width is inferred from the first two timestamps.
pub fn read_rate_csv(path: &Path) -> Result<RateTrace, IoError> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "t_ms" || &headers[1] != "rate_hz" {
        return Err(IoError::Format(format!(
            "expected header t_ms,rate_hz in {}",
            path.display()
        )));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let t: f64 = rec[0]
            .parse()
            .map_err(|e| IoError::Format(format!("bad t_ms value {:?}: {e}", &rec[0])))?;
        let v: f64 = rec[1]
            .parse()
            .map_err(|e| IoError::Format(format!("bad rate_hz value {:?}: {e}", &rec[1])))?;
        times.push(t);
        values.push(v);
    }
    if times.len() < 2 {
        return Err(IoError::Format("need at least two samples".into()));
    }
    Ok(RateTrace {
        bin_ms: times[1] - times[0],
        t_start_ms: times[0],
        values,
    })
}
