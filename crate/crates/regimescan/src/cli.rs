//! Command-line interface: `simulate`, `sweep`, `control`, `hopf`, and
//! `classify`. Exit codes: 0 success, 1 configuration error, 2 runtime
//! failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    classify, spectral_summary, welch_psd, ClassifyThresholds, SpikesMeta,
};
use crate::config::SimConfig;
use crate::dynamics::WeightChangeSummary;
use crate::hopf;
use crate::io;
use crate::svg::{self, CellValue, HeatmapSpec, PanelColumn};
use crate::sweep::{run_controls, run_sweep, RegimeMap, SweepGrid};

#[derive(Debug, Parser)]
#[command(name = "regimescan", version, about = "Spiking-network regime mapper")]
struct Cli {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// One run: raster, rate, PSD CSVs plus a scalar summary.
    Simulate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also dump the built topology's edge list as JSON.
        #[arg(long)]
        dump_topology: bool,
    },
    /// Full (tau_s, d, lambda_p) x seeds sweep with regime and prominence
    /// maps per lambda slice.
    Sweep,
    /// Baseline / Freeze / Jitter protocol at the configured operating
    /// point, with the three-column panel figure.
    Control,
    /// Critical-gain surface and reference boundary of the linear delayed
    /// rate model.
    Hopf,
    /// Classify an existing rate-trace CSV (t_ms, rate_hz).
    Classify {
        #[arg(long)]
        input: PathBuf,
    },
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn runtime_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

/// Parses argv, runs the chosen command, and returns a process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };

    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.display().to_string();
    }
    init_thread_pool()?;
    let out_dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&out_dir).map_err(runtime_err)?;

    match cli.cmd {
        Cmd::Simulate {
            seed,
            dump_topology,
        } => cmd_simulate(&cfg, seed, dump_topology, &out_dir),
        Cmd::Sweep => cmd_sweep(&cfg, &out_dir),
        Cmd::Control => cmd_control(&cfg, &out_dir),
        Cmd::Hopf => cmd_hopf(&cfg, &out_dir),
        Cmd::Classify { input } => cmd_classify(&cfg, &input, &out_dir),
    }
}

fn load_config(path: Option<&Path>) -> Result<SimConfig, CliError> {
    let cfg = match path {
        None => SimConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| config_err(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| {
                config_err(format!(
                    "{}: line {} column {}: {e}",
                    p.display(),
                    e.line(),
                    e.column()
                ))
            })?
        }
    };
    cfg.validate()
        .map_err(|e| config_err(format!("invalid configuration: {e}")))?;
    Ok(cfg)
}

/// Caps the worker pool from REGIMESCAN_THREADS when set.
fn init_thread_pool() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("REGIMESCAN_THREADS") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| config_err(format!("REGIMESCAN_THREADS must be a positive integer, got {raw:?}")))?;
        #[cfg(feature = "parallel")]
        {
            // Ignore the error from setting the pool twice (tests).
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        #[cfg(not(feature = "parallel"))]
        let _ = n;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunSummaryFile<'a> {
    seed: u64,
    regime: String,
    mean_rate_hz: f64,
    prominence: f64,
    f0_hz: Option<f64>,
    n_spikes: usize,
    duration_ms: f64,
    burn_in_ms: f64,
    thresholds: ClassifyThresholds,
    weight_change: &'a WeightChangeSummary,
}

fn cmd_simulate(
    cfg: &SimConfig,
    seed: u64,
    dump_topology: bool,
    out_dir: &Path,
) -> Result<(), CliError> {
    let out = crate::dynamics::run(cfg, seed).map_err(runtime_err)?;
    let (trace, summary, regime) =
        crate::analysis::analyze_record(&out.record, cfg).map_err(runtime_err)?;

    io::write_raster_csv(&out_dir.join("raster.csv"), &out.record).map_err(runtime_err)?;
    io::write_rate_csv(&out_dir.join("rate.csv"), &trace).map_err(runtime_err)?;
    io::write_psd_csv(&out_dir.join("psd.csv"), &summary.freqs_hz, &summary.psd)
        .map_err(runtime_err)?;
    io::write_json(
        &out_dir.join("summary.json"),
        &RunSummaryFile {
            seed,
            regime: regime.to_string(),
            mean_rate_hz: summary.mean_rate_hz,
            prominence: summary.prominence,
            f0_hz: summary.f0_hz,
            n_spikes: out.record.spikes.len(),
            duration_ms: cfg.duration_ms,
            burn_in_ms: cfg.burn_in_ms,
            thresholds: ClassifyThresholds {
                rate_sil_hz: cfg.rate_sil_hz,
                prom_osc: cfg.prom_osc,
            },
            weight_change: &out.weight_change,
        },
    )
    .map_err(runtime_err)?;
    if dump_topology {
        io::write_json(&out_dir.join("topology.json"), &out.topology).map_err(runtime_err)?;
    }
    io::write_meta_json(&out_dir.join("meta.json"), "simulate", cfg).map_err(runtime_err)?;
    println!(
        "simulate: seed {seed}, {} spikes, regime {regime}, rate {:.2} Hz, prominence {:.2}",
        out.record.spikes.len(),
        summary.mean_rate_hz,
        summary.prominence
    );
    Ok(())
}

fn refine_grid(values: &[f64], factor: usize) -> Vec<f64> {
    if values.len() < 2 {
        return values.to_vec();
    }
    let mut out = Vec::new();
    for w in values.windows(2) {
        for k in 0..factor {
            out.push(w[0] + (w[1] - w[0]) * k as f64 / factor as f64);
        }
    }
    out.push(*values.last().unwrap());
    out
}

fn overlay_points(cfg: &SimConfig) -> Vec<(f64, f64)> {
    let fine_tau = refine_grid(&cfg.grid_tau_s_ms, 8);
    let fine_d = refine_grid(&cfg.grid_d_ms, 8);
    let mut pts: Vec<(f64, f64)> = hopf::boundary_curve(
        cfg.tau_m_ms,
        cfg.hopf_gain_ref,
        &fine_tau,
        &fine_d,
    )
    .into_iter()
    .map(|p| (p.tau_s_ms, p.d_ms))
    .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite boundary points"));
    pts
}

fn lambda_tag(lambda: f64) -> String {
    format!("{lambda}")
}

fn cmd_sweep(cfg: &SimConfig, out_dir: &Path) -> Result<(), CliError> {
    let grid = SweepGrid::from_config(cfg);
    let map = run_sweep(&grid, cfg);
    write_sweep_outputs(cfg, &map, out_dir)?;
    let n_failed: usize = map.cells.iter().map(|c| c.n_failed).sum();
    println!(
        "sweep: {} points x {} seeds, {} failed runs, outputs in {}",
        map.cells.len(),
        grid.n_seeds,
        n_failed,
        out_dir.display()
    );
    Ok(())
}

fn write_sweep_outputs(cfg: &SimConfig, map: &RegimeMap, out_dir: &Path) -> Result<(), CliError> {
    io::write_sweep_cells_csv(&out_dir.join("sweep_cells.csv"), map).map_err(runtime_err)?;
    io::write_sweep_agg_csv(&out_dir.join("sweep_agg.csv"), map).map_err(runtime_err)?;
    io::write_meta_json(&out_dir.join("meta.json"), "sweep", cfg).map_err(runtime_err)?;

    let overlay = overlay_points(cfg);
    let nt = map.grid.tau_s_ms.len();
    let nd = map.grid.d_ms.len();
    for (li, &lambda) in map.grid.lambda_p.iter().enumerate() {
        let slice = map.lambda_slice(li);
        let mut regime_cells = vec![CellValue::Missing; nt * nd];
        let mut prom_cells = vec![CellValue::Missing; nt * nd];
        for (it, _) in map.grid.tau_s_ms.iter().enumerate() {
            for (id, _) in map.grid.d_ms.iter().enumerate() {
                let cell = slice[it * nd + id];
                let k = id * nt + it;
                if let Some(label) = cell.majority {
                    regime_cells[k] = CellValue::Regime(label);
                }
                if let Some(mean) = cell.prominence.mean {
                    prom_cells[k] = CellValue::Scalar(mean);
                }
            }
        }
        let tag = lambda_tag(lambda);
        let regime_svg = svg::render_heatmap(&HeatmapSpec {
            title: format!("Regime map, lambda_p = {tag}"),
            x_label: "tau_s (ms)".into(),
            y_label: "d (ms)".into(),
            x_values: map.grid.tau_s_ms.clone(),
            y_values: map.grid.d_ms.clone(),
            cells: regime_cells,
            overlay: Some(overlay.clone()),
            scale_bounds: None,
        });
        fs::write(out_dir.join(format!("regime_map_lambda_{tag}.svg")), regime_svg)
            .map_err(runtime_err)?;
        let prom_svg = svg::render_heatmap(&HeatmapSpec {
            title: format!("Mean PSD prominence, lambda_p = {tag}"),
            x_label: "tau_s (ms)".into(),
            y_label: "d (ms)".into(),
            x_values: map.grid.tau_s_ms.clone(),
            y_values: map.grid.d_ms.clone(),
            cells: prom_cells,
            overlay: Some(overlay.clone()),
            scale_bounds: None,
        });
        fs::write(
            out_dir.join(format!("prominence_map_lambda_{tag}.svg")),
            prom_svg,
        )
        .map_err(runtime_err)?;
    }
    Ok(())
}

fn cmd_control(cfg: &SimConfig, out_dir: &Path) -> Result<(), CliError> {
    let report = run_controls(cfg, cfg.n_seeds);
    io::write_controls_csv(&out_dir.join("controls.csv"), &report).map_err(runtime_err)?;
    io::write_meta_json(&out_dir.join("meta.json"), "control", cfg).map_err(runtime_err)?;

    let columns: Vec<PanelColumn> = report
        .conditions
        .iter()
        .filter_map(|c| {
            let e = c.exemplar.as_ref()?;
            let title = match c.condition {
                crate::sweep::ControlCondition::Baseline => "Baseline".to_string(),
                crate::sweep::ControlCondition::Freeze => "Freeze (lambda_p = 0)".to_string(),
                crate::sweep::ControlCondition::Jitter => {
                    format!("Jitter (CV = {})", report.jitter_cv)
                }
            };
            Some(PanelColumn {
                title,
                record: e.record.clone(),
                rate: e.rate.clone(),
                psd_freqs_hz: e.summary.freqs_hz.clone(),
                psd: e.summary.psd.clone(),
                f0_hz: e.summary.f0_hz,
                prominence: e.summary.prominence,
                mean_rate_hz: e.summary.mean_rate_hz,
            })
        })
        .collect();
    let window_ms = 2000.0f64.min(cfg.duration_ms - cfg.burn_in_ms);
    let panel = svg::render_control_panel(
        &columns,
        cfg.burn_in_ms,
        window_ms,
        (cfg.prom_band_lo_hz, cfg.prom_band_hi_hz),
    );
    fs::write(out_dir.join("control_panel.svg"), panel).map_err(runtime_err)?;

    for c in &report.conditions {
        println!(
            "control {}: prom {} +- {}, f0 {}, rate {}, delta% {}, g {}",
            c.condition,
            c.prominence.mean.map_or("-".into(), |v| format!("{v:.1}")),
            c.prominence.sd.map_or("-".into(), |v| format!("{v:.1}")),
            c.f0_hz.mean.map_or("-".into(), |v| format!("{v:.1}")),
            c.rate_hz.mean.map_or("-".into(), |v| format!("{v:.1}")),
            c.prom_delta_pct.map_or("-".into(), |v| format!("{v:+.1}")),
            c.hedges_g.map_or("-".into(), |v| format!("{v:+.2}")),
        );
    }
    Ok(())
}

fn cmd_hopf(cfg: &SimConfig, out_dir: &Path) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for &tau_s in &cfg.grid_tau_s_ms {
        for &d in &cfg.grid_d_ms {
            if d <= 0.0 {
                continue;
            }
            let omega = hopf::hopf_frequency(cfg.tau_m_ms, tau_s, d).map_err(runtime_err)?;
            let g = hopf::critical_gain(cfg.tau_m_ms, tau_s, d).map_err(runtime_err)?;
            rows.push((tau_s, d, g, omega));
        }
    }
    io::write_hopf_csv(&out_dir.join("hopf.csv"), &rows).map_err(runtime_err)?;

    let fine_tau = refine_grid(&cfg.grid_tau_s_ms, 8);
    let fine_d = refine_grid(&cfg.grid_d_ms, 8);
    let points = hopf::boundary_curve(cfg.tau_m_ms, cfg.hopf_gain_ref, &fine_tau, &fine_d);
    io::write_json(
        &out_dir.join("hopf_boundary.json"),
        &io::BoundaryFile {
            tau_m_ms: cfg.tau_m_ms,
            gain_ref: cfg.hopf_gain_ref,
            points: &points,
        },
    )
    .map_err(runtime_err)?;
    println!(
        "hopf: {} surface rows, {} boundary points at gain_ref {}",
        rows.len(),
        points.len(),
        cfg.hopf_gain_ref
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct ClassifyFile {
    mean_rate_hz: f64,
    prominence: f64,
    f0_hz: Option<f64>,
    regime: String,
    thresholds: ClassifyThresholds,
}

fn cmd_classify(cfg: &SimConfig, input: &Path, out_dir: &Path) -> Result<(), CliError> {
    let trace = io::read_rate_csv(input).map_err(|e| config_err(e.to_string()))?;
    let psd = welch_psd(&trace, cfg.psd_segment_ms, cfg.psd_overlap).map_err(runtime_err)?;
    // For a bare rate trace the mean rate is the trace mean.
    let meta = SpikesMeta {
        n_spikes: 0,
        n_neurons: 1,
        window_s: 1.0,
    };
    let mut summary = spectral_summary(&psd, &meta, &cfg.analysis()).map_err(runtime_err)?;
    summary.mean_rate_hz = trace.values.iter().sum::<f64>() / trace.values.len() as f64;
    let thresholds = ClassifyThresholds {
        rate_sil_hz: cfg.rate_sil_hz,
        prom_osc: cfg.prom_osc,
    };
    let regime = classify(&summary, &thresholds);
    let file = ClassifyFile {
        mean_rate_hz: summary.mean_rate_hz,
        prominence: summary.prominence,
        f0_hz: summary.f0_hz,
        regime: regime.to_string(),
        thresholds,
    };
    io::write_json(&out_dir.join("regime.json"), &file).map_err(runtime_err)?;
    println!(
        "{}",
        serde_json::to_string(&file).expect("classification serializes")
    );
    Ok(())
}
