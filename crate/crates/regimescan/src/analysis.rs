//! Spectral analysis of population activity.
//!
//! A spike record becomes a smoothed population-rate trace (1 ms bins,
//! Gaussian kernel, burn-in excluded), then a Welch power spectral density
//! (mean-subtracted Hann segments, 50% overlap, one-sided, averaged), and
//! finally a scalar summary: dominant frequency `f0`, peak-to-median
//! prominence, and mean firing rate. Classification into silent /
//! asynchronous-irregular / oscillatory regimes is a two-threshold rule on
//! that summary.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{AnalysisParams, SimConfig};
use crate::dynamics::SpikeRecord;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("trace of {len} samples is shorter than one segment of {segment}")]
    TraceTooShort { len: usize, segment: usize },
    #[error("spectrum does not cover the requested band [{lo} Hz, {hi} Hz]")]
    BandNotCovered { lo: f64, hi: f64 },
    #[error("empty trace")]
    EmptyTrace,
}

/// Smoothed population rate in Hz per neuron, sampled on the bin grid
/// starting at `t_start_ms` (the end of the burn-in).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateTrace {
    pub bin_ms: f64,
    pub t_start_ms: f64,
    pub values: Vec<f64>,
}

/// One-sided power spectral density on an evenly spaced frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Psd {
    pub freqs_hz: Vec<f64>,
    pub values: Vec<f64>,
}

/// Scalar spectral summary of one run.
///
/// `prominence` is the ratio of the peak PSD value to the median PSD value
/// within the prominence band; `f0_hz` is the dominant in-band spectral
/// peak, absent when the band argmax is not a local maximum or when the
/// spectrum is identically zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSummary {
    pub freqs_hz: Vec<f64>,
    pub psd: Vec<f64>,
    pub f0_hz: Option<f64>,
    pub prominence: f64,
    pub mean_rate_hz: f64,
}

/// Population regime label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegimeLabel {
    #[serde(rename = "SIL")]
    Sil,
    #[serde(rename = "AI")]
    Ai,
    #[serde(rename = "OSC")]
    Osc,
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegimeLabel::Sil => "SIL",
            RegimeLabel::Ai => "AI",
            RegimeLabel::Osc => "OSC",
        })
    }
}

impl std::str::FromStr for RegimeLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SIL" => Ok(RegimeLabel::Sil),
            "AI" => Ok(RegimeLabel::Ai),
            "OSC" => Ok(RegimeLabel::Osc),
            other => Err(format!("unknown regime label {other:?}")),
        }
    }
}

/// Classifier thresholds; carried into every output so the decision rule
/// is auditable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyThresholds {
    pub rate_sil_hz: f64,
    pub prom_osc: f64,
}

/// Bins spikes at `bin_ms` over [burn_in, duration), converts to Hz per
/// neuron, and smooths with a unit-sum discrete Gaussian kernel
/// (support +-4 sigma, reflect-padded edges).
pub fn population_rate(
    record: &SpikeRecord,
    n_neurons: usize,
    duration_ms: f64,
    burn_in_ms: f64,
    bin_ms: f64,
    kernel_sigma_ms: f64,
) -> RateTrace {
    let n_bins = ((duration_ms - burn_in_ms) / bin_ms).floor() as usize;
    let mut counts = vec![0.0f64; n_bins];
    let window_end = burn_in_ms + n_bins as f64 * bin_ms;
    for s in &record.spikes {
        if s.t_ms >= burn_in_ms && s.t_ms < window_end {
            let idx = ((s.t_ms - burn_in_ms) / bin_ms) as usize;
            counts[idx.min(n_bins - 1)] += 1.0;
        }
    }
    let smoothed = gaussian_smooth(&counts, kernel_sigma_ms / bin_ms);
    let scale = 1.0 / (n_neurons as f64 * bin_ms * 1e-3);
    RateTrace {
        bin_ms,
        t_start_ms: burn_in_ms,
        values: smoothed.iter().map(|c| c * scale).collect(),
    }
}

/// Convolves with a normalized Gaussian (sigma in samples), reflecting the
/// signal at both edges (x[-1] mirrors x[0]).
fn gaussian_smooth(x: &[f64], sigma_samples: f64) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let radius = (4.0 * sigma_samples).ceil() as i64;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for j in -radius..=radius {
        kernel.push((-0.5 * (j as f64 / sigma_samples).powi(2)).exp());
    }
    let total: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= total;
    }

    let n = x.len() as i64;
    let reflect = |mut p: i64| -> usize {
        loop {
            if p < 0 {
                p = -p - 1;
            } else if p >= n {
                p = 2 * n - 1 - p;
            } else {
                return p as usize;
            }
        }
    };
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(kj, &kv)| kv * x[reflect(i - radius + kj as i64)])
                .sum()
        })
        .collect()
}

/// Welch PSD estimate of a rate trace.
///
/// Segments of `segment_ms` with the given overlap fraction are
/// mean-subtracted, windowed with a periodic Hann window, transformed, and
/// averaged into a one-sided density (unit: signal^2 / Hz).
pub fn welch_psd(
    trace: &RateTrace,
    segment_ms: f64,
    overlap: f64,
) -> Result<Psd, AnalysisError> {
    let fs_hz = 1000.0 / trace.bin_ms;
    let nseg = (segment_ms / trace.bin_ms).round() as usize;
    if trace.values.len() < nseg {
        return Err(AnalysisError::TraceTooShort {
            len: trace.values.len(),
            segment: nseg,
        });
    }
    let hop = ((nseg as f64 * (1.0 - overlap)).round() as usize).max(1);

    let window: Vec<f64> = (0..nseg)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / nseg as f64).cos()))
        .collect();
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let scale = 1.0 / (fs_hz * win_power);

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nseg);
    let n_out = nseg / 2 + 1;
    let mut acc = vec![0.0f64; n_out];
    let mut n_segments = 0usize;
    let mut buf = vec![Complex::new(0.0, 0.0); nseg];

    let mut start = 0usize;
    while start + nseg <= trace.values.len() {
        let seg = &trace.values[start..start + nseg];
        let mean = seg.iter().sum::<f64>() / nseg as f64;
        for (b, (&v, &w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((v - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            let mag2 = buf[k].norm_sqr();
            let one_sided = if k == 0 || (nseg % 2 == 0 && k == nseg / 2) {
                1.0
            } else {
                2.0
            };
            *a += one_sided * mag2 * scale;
        }
        n_segments += 1;
        start += hop;
    }

    let freqs_hz = (0..n_out).map(|k| k as f64 * fs_hz / nseg as f64).collect();
    let values = acc.iter().map(|a| a / n_segments as f64).collect();
    Ok(Psd { freqs_hz, values })
}

/// Spike-count metadata needed alongside the PSD for a full summary.
#[derive(Debug, Clone, Copy)]
pub struct SpikesMeta {
    pub n_spikes: usize,
    pub n_neurons: usize,
    pub window_s: f64,
}

fn band_indices(freqs: &[f64], lo: f64, hi: f64) -> Vec<usize> {
    freqs
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= lo && f <= hi)
        .map(|(i, _)| i)
        .collect()
}

fn median(sorted: &mut [f64]) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite PSD values"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Reduces a PSD to the scalar summary. The prominence band and f0 band
/// come from `params`; `f0` is reported only when the band argmax is a
/// strict local maximum. A zero-median (all-zero) spectrum yields
/// prominence 0 and no f0 — the silent convention.
pub fn spectral_summary(
    psd: &Psd,
    meta: &SpikesMeta,
    params: &AnalysisParams,
) -> Result<SpectralSummary, AnalysisError> {
    let prom_band = band_indices(&psd.freqs_hz, params.prom_band_lo_hz, params.prom_band_hi_hz);
    if prom_band.is_empty()
        || *psd.freqs_hz.last().unwrap_or(&0.0) < params.prom_band_hi_hz
    {
        return Err(AnalysisError::BandNotCovered {
            lo: params.prom_band_lo_hz,
            hi: params.prom_band_hi_hz,
        });
    }

    let mut band_vals: Vec<f64> = prom_band.iter().map(|&i| psd.values[i]).collect();
    let peak = band_vals.iter().cloned().fold(f64::MIN, f64::max);
    let med = median(&mut band_vals);

    let (prominence, f0_hz) = if med == 0.0 {
        (0.0, None)
    } else {
        let f0_band = band_indices(&psd.freqs_hz, params.f0_band_lo_hz, params.f0_band_hi_hz);
        let mut best: Option<usize> = None;
        for &i in &f0_band {
            if best.map_or(true, |b| psd.values[i] > psd.values[b]) {
                best = Some(i);
            }
        }
        let f0 = best.and_then(|i| {
            let left_ok = i == 0 || psd.values[i] > psd.values[i - 1];
            let right_ok = i + 1 >= psd.values.len() || psd.values[i] > psd.values[i + 1];
            (left_ok && right_ok).then(|| psd.freqs_hz[i])
        });
        (peak / med, f0)
    };

    let mean_rate_hz = meta.n_spikes as f64 / (meta.n_neurons as f64 * meta.window_s);
    Ok(SpectralSummary {
        freqs_hz: psd.freqs_hz.clone(),
        psd: psd.values.clone(),
        f0_hz,
        prominence,
        mean_rate_hz,
    })
}

/// Two-threshold regime rule: silent below `rate_sil_hz`, oscillatory when
/// prominence reaches `prom_osc` with a detected f0, asynchronous-irregular
/// otherwise.
pub fn classify(summary: &SpectralSummary, thresholds: &ClassifyThresholds) -> RegimeLabel {
    if summary.mean_rate_hz < thresholds.rate_sil_hz {
        RegimeLabel::Sil
    } else if summary.prominence >= thresholds.prom_osc && summary.f0_hz.is_some() {
        RegimeLabel::Osc
    } else {
        RegimeLabel::Ai
    }
}

/// Full pipeline for one finished run.
pub fn analyze_record(
    record: &SpikeRecord,
    cfg: &SimConfig,
) -> Result<(RateTrace, SpectralSummary, RegimeLabel), AnalysisError> {
    let params = cfg.analysis();
    let trace = population_rate(
        record,
        cfg.n_neurons(),
        cfg.duration_ms,
        cfg.burn_in_ms,
        params.rate_bin_ms,
        params.kernel_sigma_ms,
    );
    let psd = welch_psd(&trace, params.psd_segment_ms, params.psd_overlap)?;
    let window_end = cfg.burn_in_ms + trace.values.len() as f64 * params.rate_bin_ms;
    let meta = SpikesMeta {
        n_spikes: record.count_in_window(cfg.burn_in_ms, window_end),
        n_neurons: cfg.n_neurons(),
        window_s: (window_end - cfg.burn_in_ms) * 1e-3,
    };
    let summary = spectral_summary(&psd, &meta, &params)?;
    let label = classify(
        &summary,
        &ClassifyThresholds {
            rate_sil_hz: params.rate_sil_hz,
            prom_osc: params.prom_osc,
        },
    );
    Ok((trace, summary, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Spike;
    use proptest::prelude::*;

    fn record_from(times_neurons: &[(f64, u32)], n_neurons: u32, duration_ms: f64) -> SpikeRecord {
        SpikeRecord {
            n_neurons,
            duration_ms,
            spikes: times_neurons
                .iter()
                .map(|&(t_ms, neuron)| Spike { t_ms, neuron })
                .collect(),
        }
    }

    fn default_params() -> AnalysisParams {
        SimConfig::default().analysis()
    }

    fn tone_trace(f_hz: f64, amp: f64, offset: f64, n: usize) -> RateTrace {
        RateTrace {
            bin_ms: 1.0,
            t_start_ms: 0.0,
            values: (0..n)
                .map(|i| offset + amp * (std::f64::consts::TAU * f_hz * i as f64 * 1e-3).sin())
                .collect(),
        }
    }

    #[test]
    fn empty_record_gives_zero_trace() {
        let r = record_from(&[], 200, 8000.0);
        let t = population_rate(&r, 200, 8000.0, 500.0, 1.0, 5.0);
        assert_eq!(t.values.len(), 7500);
        assert!(t.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_spike_mass_is_one_over_n() {
        // Trace integral (sum * bin) equals 1/N spikes per neuron.
        let r = record_from(&[(4000.0, 3)], 200, 8000.0);
        let t = population_rate(&r, 200, 8000.0, 500.0, 1.0, 5.0);
        let integral: f64 = t.values.iter().sum::<f64>() * 1e-3; // bin in s
        assert!((integral - 1.0 / 200.0).abs() <= 1e-9);
    }

    #[test]
    fn smoothing_conserves_interior_mass() {
        let mut spikes = Vec::new();
        for k in 0..4000u64 {
            let t = 600.0 + (crate::rng::hash_words(&[k, 1]) % 6_800_000) as f64 * 1e-3;
            let neuron = (crate::rng::hash_words(&[k, 2]) % 200) as u32;
            spikes.push((t, neuron));
        }
        let r = record_from(&spikes, 200, 8000.0);
        let t = population_rate(&r, 200, 8000.0, 500.0, 1.0, 5.0);
        let integral: f64 = t.values.iter().sum::<f64>() * 1e-3;
        let expected = 4000.0 / 200.0;
        assert!(
            (integral - expected).abs() <= 1e-9 * expected,
            "integral {integral} vs {expected}"
        );
    }

    #[test]
    fn poisson_rate_recovered() {
        // Homogeneous 30 Hz per neuron over 8 s, 200 neurons.
        let rate_hz = 30.0;
        let mut spikes = Vec::new();
        let mut k = 0u64;
        for neuron in 0..200u32 {
            let mut t = 0.0f64;
            loop {
                let u = (crate::rng::hash_words(&[7, u64::from(neuron), k]) >> 11) as f64
                    / 9_007_199_254_740_992.0;
                k += 1;
                t -= (1.0 - u).ln() / rate_hz * 1000.0;
                if t >= 8000.0 {
                    break;
                }
                spikes.push((t, neuron));
            }
        }
        let r = record_from(&spikes, 200, 8000.0);
        let t = population_rate(&r, 200, 8000.0, 500.0, 1.0, 5.0);
        let mean = t.values.iter().sum::<f64>() / t.values.len() as f64;
        assert!((mean - 30.0).abs() <= 1.0, "mean rate {mean}");
    }

    #[test]
    fn constant_trace_has_no_ac_power() {
        let trace = tone_trace(0.0, 0.0, 42.0, 7500);
        let psd = welch_psd(&trace, 1000.0, 0.5).unwrap();
        let max_ac = psd.values[1..]
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        assert!(max_ac < 1e-10);
    }

    #[test]
    fn tone_frequencies_recovered_within_one_hz() {
        for f in [10.0, 25.0, 40.0, 60.0] {
            let trace = tone_trace(f, 4.0, 30.0, 7500);
            let psd = welch_psd(&trace, 1000.0, 0.5).unwrap();
            let meta = SpikesMeta {
                n_spikes: 1,
                n_neurons: 1,
                window_s: 7.5,
            };
            let s = spectral_summary(&psd, &meta, &default_params()).unwrap();
            let f0 = s.f0_hz.expect("tone should produce a local maximum");
            assert!((f0 - f).abs() <= 1.0, "tone {f}: f0 {f0}");
        }
    }

    #[test]
    fn welch_resolution_is_one_hz() {
        let trace = tone_trace(40.0, 1.0, 10.0, 7500);
        let psd = welch_psd(&trace, 1000.0, 0.5).unwrap();
        assert_eq!(psd.freqs_hz[1] - psd.freqs_hz[0], 1.0);
        assert_eq!(psd.freqs_hz.len(), 501);
    }

    #[test]
    fn white_noise_psd_is_flat() {
        // Median ~= mean over the prominence band for a long flat-spectrum
        // signal with many averaged segments.
        let values: Vec<f64> = (0..60_000)
            .map(|i| 30.0 + crate::rng::NoiseStream::new(3).normal(0, i as u64))
            .collect();
        let trace = RateTrace {
            bin_ms: 1.0,
            t_start_ms: 0.0,
            values,
        };
        let psd = welch_psd(&trace, 1000.0, 0.5).unwrap();
        let band: Vec<f64> = psd
            .freqs_hz
            .iter()
            .zip(&psd.values)
            .filter(|(&f, _)| (5.0..=100.0).contains(&f))
            .map(|(_, &v)| v)
            .collect();
        let mean = band.iter().sum::<f64>() / band.len() as f64;
        let mut sorted = band.clone();
        let med = median(&mut sorted);
        assert!(
            (med / mean - 1.0).abs() <= 0.25,
            "median {med} vs mean {mean}"
        );
    }

    #[test]
    fn short_trace_is_an_error() {
        let trace = tone_trace(10.0, 1.0, 5.0, 800);
        let err = welch_psd(&trace, 1000.0, 0.5).unwrap_err();
        assert_eq!(
            err,
            AnalysisError::TraceTooShort {
                len: 800,
                segment: 1000
            }
        );
    }

    #[test]
    fn all_zero_psd_is_silent_convention() {
        let psd = Psd {
            freqs_hz: (0..=500).map(f64::from).collect(),
            values: vec![0.0; 501],
        };
        let meta = SpikesMeta {
            n_spikes: 0,
            n_neurons: 200,
            window_s: 7.5,
        };
        let s = spectral_summary(&psd, &meta, &default_params()).unwrap();
        assert_eq!(s.prominence, 0.0);
        assert_eq!(s.f0_hz, None);
        assert_eq!(s.mean_rate_hz, 0.0);
    }

    #[test]
    fn classifier_rules() {
        let thresholds = ClassifyThresholds {
            rate_sil_hz: 1.0,
            prom_osc: 10.0,
        };
        let base = SpectralSummary {
            freqs_hz: vec![],
            psd: vec![],
            f0_hz: None,
            prominence: 0.0,
            mean_rate_hz: 0.0,
        };
        assert_eq!(classify(&base, &thresholds), RegimeLabel::Sil);

        let osc = SpectralSummary {
            f0_hz: Some(37.1),
            prominence: 175.2,
            mean_rate_hz: 31.0,
            ..base.clone()
        };
        assert_eq!(classify(&osc, &thresholds), RegimeLabel::Osc);

        let ai = SpectralSummary {
            f0_hz: None,
            prominence: 2.0,
            mean_rate_hz: 10.0,
            ..base.clone()
        };
        assert_eq!(classify(&ai, &thresholds), RegimeLabel::Ai);

        // High prominence without a detected peak stays AI.
        let no_peak = SpectralSummary {
            f0_hz: None,
            prominence: 50.0,
            mean_rate_hz: 10.0,
            ..base
        };
        assert_eq!(classify(&no_peak, &thresholds), RegimeLabel::Ai);
    }

    #[test]
    fn regime_order_is_sil_ai_osc() {
        assert!(RegimeLabel::Sil < RegimeLabel::Ai);
        assert!(RegimeLabel::Ai < RegimeLabel::Osc);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Prominence and f0 are invariant under positive scaling of the PSD.
        #[test]
        fn summary_is_scale_invariant(scale in 1e-6f64..1e6, seed in 0u64..1000) {
            let noise = crate::rng::NoiseStream::new(seed);
            let values: Vec<f64> = (0..501)
                .map(|i| (1.0 + 0.5 * noise.normal(0, i as u64).tanh()).abs() + 0.01)
                .collect();
            let freqs: Vec<f64> = (0..=500).map(f64::from).collect();
            let meta = SpikesMeta { n_spikes: 100, n_neurons: 10, window_s: 1.0 };
            let p = default_params();

            let a = spectral_summary(&Psd { freqs_hz: freqs.clone(), values: values.clone() }, &meta, &p).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let b = spectral_summary(&Psd { freqs_hz: freqs, values: scaled }, &meta, &p).unwrap();

            prop_assert_eq!(a.f0_hz, b.f0_hz);
            prop_assert!((a.prominence - b.prominence).abs() <= 1e-9 * a.prominence.abs());
        }

        /// Raising prominence with fixed rate and f0 never demotes OSC to AI.
        #[test]
        fn classification_monotone_in_prominence(p1 in 0.0f64..500.0, bump in 0.0f64..500.0) {
            let thresholds = ClassifyThresholds { rate_sil_hz: 1.0, prom_osc: 10.0 };
            let mk = |prom: f64| SpectralSummary {
                freqs_hz: vec![],
                psd: vec![],
                f0_hz: Some(40.0),
                prominence: prom,
                mean_rate_hz: 20.0,
            };
            let lo = classify(&mk(p1), &thresholds);
            let hi = classify(&mk(p1 + bump), &thresholds);
            prop_assert!(hi >= lo);
        }
    }
}
