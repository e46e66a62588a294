//! Calibration harness: prints operating-point control statistics and a
//! coarse regime map for candidate parameter sets, so drive and coupling
//! defaults can be pinned from one documented run.
//!
//! Usage: cargo run --release --example calibrate -- [key=value ...]
//! Any flat config key can be overridden, e.g. `i_dc=20 w_ie=6.5 map=1`.

use regimescan::analysis::RegimeLabel;
use regimescan::config::SimConfig;
use regimescan::sweep::{run_controls, run_sweep, SweepGrid};

fn apply_overrides(args: &[String]) -> (SimConfig, bool, bool) {
    let mut obj = serde_json::Map::new();
    let mut map = false;
    let mut controls = true;
    for a in args {
        let (k, v) = a.split_once('=').expect("arguments must be key=value");
        match k {
            "map" => map = v != "0",
            "controls" => controls = v != "0",
            _ => {
                let value: serde_json::Value = v
                    .parse::<u64>()
                    .map(|x| serde_json::json!(x))
                    .or_else(|_| v.parse::<f64>().map(|x| serde_json::json!(x)))
                    .unwrap_or_else(|_| serde_json::json!(v));
                obj.insert(k.to_string(), value);
            }
        }
    }
    let cfg: SimConfig =
        serde_json::from_value(serde_json::Value::Object(obj)).expect("valid overrides");
    cfg.validate().expect("valid config");
    (cfg, map, controls)
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (cfg, do_map, do_controls) = apply_overrides(&args);
    println!(
        "params: w_ee={} w_ei={} w_ie={} w_ii={} i_dc={} sigma={} a+={} a-={} lambda={} wmax={}",
        cfg.w_ee,
        cfg.w_ei,
        cfg.w_ie,
        cfg.w_ii,
        cfg.i_dc,
        cfg.sigma_noise,
        cfg.a_plus,
        cfg.a_minus,
        cfg.lambda_p,
        cfg.w_max_ee
    );

    if do_controls {
        let t0 = std::time::Instant::now();
        let report = run_controls(&cfg, cfg.n_seeds);
        for c in &report.conditions {
            let proms: Vec<String> = c
                .runs
                .iter()
                .map(|r| {
                    r.summary
                        .as_ref()
                        .map(|s| format!("{:.0}", s.prominence))
                        .unwrap_or_else(|| "ERR".to_string())
                })
                .collect();
            println!(
                "{:<9} prom {:>7.1} +- {:>6.1}  f0 {:>5.1}  rate {:>6.2}  d% {:>7}  g {:>6}  [{}]",
                c.condition.to_string(),
                c.prominence.mean.unwrap_or(f64::NAN),
                c.prominence.sd.unwrap_or(f64::NAN),
                c.f0_hz.mean.unwrap_or(f64::NAN),
                c.rate_hz.mean.unwrap_or(f64::NAN),
                c.prom_delta_pct
                    .map(|v| format!("{v:+.1}"))
                    .unwrap_or_else(|| "-".into()),
                c.hedges_g
                    .map(|v| format!("{v:+.2}"))
                    .unwrap_or_else(|| "-".into()),
                proms.join(",")
            );
        }
        // Weight drift at the operating point, one seed per lambda.
        for lambda in [0.0, 2e-3] {
            let c = SimConfig {
                lambda_p: lambda,
                ..cfg.clone()
            };
            let out = regimescan::dynamics::run(&c, 12345).unwrap();
            println!(
                "lambda={lambda}: mean w {:.4} -> {:.4}, mean|dw| {:.4}, max|dw| {:.4}",
                out.weight_change.mean_initial,
                out.weight_change.mean_final,
                out.weight_change.mean_abs_delta,
                out.weight_change.max_abs_delta
            );
        }
        println!("controls took {:.1?}", t0.elapsed());
    }

    if do_map {
        let t0 = std::time::Instant::now();
        let grid = SweepGrid {
            tau_s_ms: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            d_ms: vec![1.25, 3.75, 6.25, 8.75, 10.0],
            lambda_p: vec![0.0, 2e-3],
            n_seeds: 2,
            master_seed: cfg.master_seed,
        };
        let map = run_sweep(&grid, &cfg);
        for (li, &lambda) in map.grid.lambda_p.iter().enumerate() {
            println!("lambda_p = {lambda}  (rows: d top-down, cols: tau_s {:?})", map.grid.tau_s_ms);
            let slice = map.lambda_slice(li);
            for (id, d) in map.grid.d_ms.iter().enumerate().rev() {
                let mut row = format!("d={d:>5}: ");
                for it in 0..map.grid.tau_s_ms.len() {
                    let cell = slice[it * map.grid.d_ms.len() + id];
                    let label = match cell.majority {
                        Some(RegimeLabel::Sil) => "SIL",
                        Some(RegimeLabel::Ai) => "AI ",
                        Some(RegimeLabel::Osc) => "OSC",
                        None => "***",
                    };
                    row.push_str(&format!(
                        "{label}({:>5.0},{:>4.1}) ",
                        cell.prominence.mean.unwrap_or(f64::NAN),
                        cell.rate_hz.mean.unwrap_or(f64::NAN)
                    ));
                }
                println!("{row}");
            }
        }
        println!("map took {:.1?}", t0.elapsed());
    }
}
