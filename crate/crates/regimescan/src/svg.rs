//! Hand-rolled SVG figures: regime and prominence heatmaps with an
//! optional dashed overlay polyline, and the three-condition control
//! panel (raster, rate trace, spectrum). SVG is the only figure format:
//! no raster dependencies, diffable in review.

use std::fmt::Write as _;

use crate::analysis::{RateTrace, RegimeLabel};
use crate::dynamics::SpikeRecord;

pub const REGIME_COLORS: [(RegimeLabel, &str); 3] = [
    (RegimeLabel::Sil, "#b8b8b8"),
    (RegimeLabel::Ai, "#4878cf"),
    (RegimeLabel::Osc, "#d65f5f"),
];

fn regime_color(label: RegimeLabel) -> &'static str {
    REGIME_COLORS
        .iter()
        .find(|(l, _)| *l == label)
        .map(|(_, c)| *c)
        .expect("every label has a color")
}

/// Linear value-to-pixel map for one axis. The same map positions cell
/// rectangles and overlay vertices, so both stay mutually consistent.
#[derive(Debug, Clone, Copy)]
pub struct AxisMap {
    pub v_lo: f64,
    pub v_hi: f64,
    pub px_lo: f64,
    pub px_hi: f64,
}

impl AxisMap {
    pub fn to_px(&self, v: f64) -> f64 {
        self.px_lo + (v - self.v_lo) / (self.v_hi - self.v_lo) * (self.px_hi - self.px_lo)
    }

    pub fn to_value(&self, px: f64) -> f64 {
        self.v_lo + (px - self.px_lo) / (self.px_hi - self.px_lo) * (self.v_hi - self.v_lo)
    }
}

/// Cell payload of a heatmap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellValue {
    Regime(RegimeLabel),
    Scalar(f64),
    Missing,
}

/// A grid of cells over (x, y) axis values; `cells` is row-major with
/// index `iy * x_values.len() + ix`.
#[derive(Debug, Clone)]
pub struct HeatmapSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    pub cells: Vec<CellValue>,
    pub overlay: Option<Vec<(f64, f64)>>,
    /// Fixed color-scale bounds for scalar maps; inferred when absent.
    pub scale_bounds: Option<(f64, f64)>,
}

/// Midpoint cell boundaries around strictly increasing grid values.
fn boundaries(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 1 {
        return vec![values[0] - 0.5, values[0] + 0.5];
    }
    let mut b = Vec::with_capacity(n + 1);
    b.push(values[0] - 0.5 * (values[1] - values[0]));
    for w in values.windows(2) {
        b.push(0.5 * (w[0] + w[1]));
    }
    b.push(values[n - 1] + 0.5 * (values[n - 1] - values[n - 2]));
    b
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Monotone single-hue sequential scale, light to dark.
fn sequential_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r0, g0, b0) = (247.0, 251.0, 255.0);
    let (r1, g1, b1) = (8.0, 48.0, 107.0);
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(r0, r1, t) as u8,
        lerp(g0, g1, t) as u8,
        lerp(b0, b1, t) as u8
    )
}

fn fmt_tick(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Renders one heatmap as a complete SVG document.
///
/// Regime cells use the fixed categorical palette with a legend; scalar
/// cells use the sequential scale with min/max annotated; missing cells
/// are hatched. The overlay polyline is drawn dashed in white and clipped
/// to the plot area.
pub fn render_heatmap(spec: &HeatmapSpec) -> String {
    let (width, height) = (640.0, 520.0);
    let (ml, mr, mt, mb) = (80.0, 150.0, 50.0, 70.0);
    let bx = boundaries(&spec.x_values);
    let by = boundaries(&spec.y_values);
    let x_map = AxisMap {
        v_lo: bx[0],
        v_hi: *bx.last().unwrap(),
        px_lo: ml,
        px_hi: width - mr,
    };
    let y_map = AxisMap {
        v_lo: by[0],
        v_hi: *by.last().unwrap(),
        px_lo: height - mb, // value axis points up
        px_hi: mt,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"##
    );
    let _ = writeln!(
        s,
        r##"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><rect width="6" height="6" fill="#ffffff"/><line x1="0" y1="0" x2="0" y2="6" stroke="#999999" stroke-width="2"/></pattern><clipPath id="plot"><rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/></clipPath></defs>"##,
        ml,
        mt,
        width - ml - mr,
        height - mt - mb
    );
    let _ = writeln!(s, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r##"<text x="{:.2}" y="28" text-anchor="middle" font-size="16">{}</text>"##,
        ml + (width - ml - mr) / 2.0,
        escape(&spec.title)
    );

    // Scalar scale bounds over finite cells unless pinned.
    let (lo, hi) = spec.scale_bounds.unwrap_or_else(|| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &spec.cells {
            if let CellValue::Scalar(v) = c {
                if v.is_finite() {
                    lo = lo.min(*v);
                    hi = hi.max(*v);
                }
            }
        }
        if lo > hi {
            (0.0, 1.0)
        } else if lo == hi {
            (lo, lo + 1.0)
        } else {
            (lo, hi)
        }
    });

    let nx = spec.x_values.len();
    for (iy, _) in spec.y_values.iter().enumerate() {
        for (ix, _) in spec.x_values.iter().enumerate() {
            let cell = spec.cells[iy * nx + ix];
            let fill = match cell {
                CellValue::Regime(l) => regime_color(l).to_string(),
                CellValue::Scalar(v) if v.is_finite() => {
                    sequential_color((v - lo) / (hi - lo))
                }
                _ => "url(#hatch)".to_string(),
            };
            let x0 = x_map.to_px(bx[ix]);
            let x1 = x_map.to_px(bx[ix + 1]);
            let y0 = y_map.to_px(by[iy + 1]); // upper boundary, smaller py
            let y1 = y_map.to_px(by[iy]);
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"##,
                x0,
                y0,
                x1 - x0,
                y1 - y0,
                fill
            );
        }
    }

    if let Some(overlay) = &spec.overlay {
        if !overlay.is_empty() {
            let pts: Vec<String> = overlay
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", x_map.to_px(x), y_map.to_px(y)))
                .collect();
            let _ = writeln!(
                s,
                r##"<polyline points="{}" fill="none" stroke="#ffffff" stroke-width="2.5" stroke-dasharray="7 5" clip-path="url(#plot)"/>"##,
                pts.join(" ")
            );
        }
    }

    // Axes and ticks at the grid values.
    let _ = writeln!(
        s,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000000"/>"##,
        ml,
        mt,
        width - ml - mr,
        height - mt - mb
    );
    for &v in &spec.x_values {
        let px = x_map.to_px(v);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#000000"/>"##,
            height - mb,
            height - mb + 5.0
        );
        let _ = writeln!(
            s,
            r##"<text x="{px:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"##,
            height - mb + 18.0,
            fmt_tick(v)
        );
    }
    for &v in &spec.y_values {
        let py = y_map.to_px(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#000000"/>"##,
            ml - 5.0,
            ml
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"##,
            ml - 8.0,
            py + 4.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        s,
        r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"##,
        ml + (width - ml - mr) / 2.0,
        height - 22.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r##"<text x="22" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 22 {:.2})">{}</text>"##,
        mt + (height - mt - mb) / 2.0,
        mt + (height - mt - mb) / 2.0,
        escape(&spec.y_label)
    );

    // Legend / colorbar.
    let legend_x = width - mr + 20.0;
    let is_regime = spec
        .cells
        .iter()
        .any(|c| matches!(c, CellValue::Regime(_)));
    if is_regime {
        for (i, (label, color)) in REGIME_COLORS.iter().enumerate() {
            let y = mt + 20.0 + i as f64 * 26.0;
            let _ = writeln!(
                s,
                r##"<rect x="{legend_x:.2}" y="{y:.2}" width="18" height="18" fill="{color}" stroke="#000000"/>"##
            );
            let _ = writeln!(
                s,
                r##"<text x="{:.2}" y="{:.2}" font-size="12">{label}</text>"##,
                legend_x + 26.0,
                y + 14.0
            );
        }
    } else {
        let bar_h = height - mt - mb;
        let steps = 24;
        for k in 0..steps {
            let t = k as f64 / (steps - 1) as f64;
            let y = (height - mb) - (k + 1) as f64 * bar_h / steps as f64;
            let _ = writeln!(
                s,
                r##"<rect x="{legend_x:.2}" y="{y:.2}" width="18" height="{:.2}" fill="{}"/>"##,
                bar_h / steps as f64 + 0.5,
                sequential_color(t)
            );
        }
        let _ = writeln!(
            s,
            r##"<rect x="{legend_x:.2}" y="{mt:.2}" width="18" height="{bar_h:.2}" fill="none" stroke="#000000"/>"##
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-size="11">max {hi:.3}</text>"##,
            legend_x + 24.0,
            mt + 10.0
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-size="11">min {lo:.3}</text>"##,
            legend_x + 24.0,
            height - mb
        );
    }

    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One column of the control panel.
#[derive(Debug, Clone)]
pub struct PanelColumn {
    pub title: String,
    pub record: SpikeRecord,
    pub rate: RateTrace,
    pub psd_freqs_hz: Vec<f64>,
    pub psd: Vec<f64>,
    pub f0_hz: Option<f64>,
    pub prominence: f64,
    pub mean_rate_hz: f64,
}

/// Three-row control panel: spike raster (time window capped at
/// `window_ms`), smoothed population rate over the same window, and the
/// spectrum restricted to `psd_band`. Full-resolution data always lives in
/// the CSV outputs; this figure is for reading, not archiving.
pub fn render_control_panel(
    columns: &[PanelColumn],
    window_start_ms: f64,
    window_ms: f64,
    psd_band: (f64, f64),
) -> String {
    let (sub_w, sub_h) = (300.0, 170.0);
    let (gap_x, gap_y) = (45.0, 48.0);
    let (ml, mt) = (70.0, 46.0);
    let width = ml + columns.len() as f64 * (sub_w + gap_x);
    let height = mt + 3.0 * (sub_h + gap_y) + 10.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"##
    );
    let _ = writeln!(s, r##"<rect width="{width:.0}" height="{height:.0}" fill="#ffffff"/>"##);

    let t_lo = window_start_ms;
    let t_hi = window_start_ms + window_ms;

    // Shared vertical scales so the columns are comparable.
    let rate_max = columns
        .iter()
        .flat_map(|c| c.rate.values.iter())
        .cloned()
        .fold(1.0f64, f64::max);
    let psd_max = columns
        .iter()
        .flat_map(|c| c.psd_freqs_hz.iter().zip(&c.psd))
        .filter(|(&f, _)| f >= psd_band.0 && f <= psd_band.1)
        .map(|(_, &v)| v)
        .fold(f64::MIN_POSITIVE, f64::max);

    for (ci, col) in columns.iter().enumerate() {
        let x0 = ml + ci as f64 * (sub_w + gap_x);
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"##,
            x0 + sub_w / 2.0,
            mt - 16.0,
            escape(&col.title)
        );

        // Row 1: raster.
        let y0 = mt;
        let tx = AxisMap {
            v_lo: t_lo,
            v_hi: t_hi,
            px_lo: x0,
            px_hi: x0 + sub_w,
        };
        let ny = AxisMap {
            v_lo: 0.0,
            v_hi: f64::from(col.record.n_neurons),
            px_lo: y0 + sub_h,
            px_hi: y0,
        };
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{sub_w:.2}" height="{sub_h:.2}" fill="none" stroke="#000000"/>"##
        );
        for spike in &col.record.spikes {
            if spike.t_ms < t_lo || spike.t_ms >= t_hi {
                continue;
            }
            let _ = writeln!(
                s,
                r##"<circle cx="{:.1}" cy="{:.1}" r="0.8" fill="#222222"/>"##,
                tx.to_px(spike.t_ms),
                ny.to_px(f64::from(spike.neuron))
            );
        }
        if ci == 0 {
            let _ = writeln!(
                s,
                r##"<text x="20" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 20 {:.2})">neuron</text>"##,
                y0 + sub_h / 2.0,
                y0 + sub_h / 2.0
            );
        }

        // Row 2: population rate.
        let y0 = mt + sub_h + gap_y;
        let ry = AxisMap {
            v_lo: 0.0,
            v_hi: rate_max * 1.05,
            px_lo: y0 + sub_h,
            px_hi: y0,
        };
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{sub_w:.2}" height="{sub_h:.2}" fill="none" stroke="#000000"/>"##
        );
        let mut pts = String::new();
        for (i, &v) in col.rate.values.iter().enumerate() {
            let t = col.rate.t_start_ms + i as f64 * col.rate.bin_ms;
            if t < t_lo || t >= t_hi {
                continue;
            }
            let _ = write!(pts, "{:.1},{:.1} ", tx.to_px(t), ry.to_px(v));
        }
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#2a5fa5" stroke-width="1.2"/>"##,
            pts.trim_end()
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">t (ms)</text>"##,
            x0 + sub_w / 2.0,
            y0 + sub_h + 16.0
        );
        if ci == 0 {
            let _ = writeln!(
                s,
                r##"<text x="20" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 20 {:.2})">rate (Hz)</text>"##,
                y0 + sub_h / 2.0,
                y0 + sub_h / 2.0
            );
        }

        // Row 3: spectrum over the display band.
        let y0 = mt + 2.0 * (sub_h + gap_y);
        let fx = AxisMap {
            v_lo: psd_band.0,
            v_hi: psd_band.1,
            px_lo: x0,
            px_hi: x0 + sub_w,
        };
        let py = AxisMap {
            v_lo: 0.0,
            v_hi: psd_max * 1.05,
            px_lo: y0 + sub_h,
            px_hi: y0,
        };
        let _ = writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y0:.2}" width="{sub_w:.2}" height="{sub_h:.2}" fill="none" stroke="#000000"/>"##
        );
        let mut pts = String::new();
        for (&f, &v) in col.psd_freqs_hz.iter().zip(&col.psd) {
            if f < psd_band.0 || f > psd_band.1 {
                continue;
            }
            let _ = write!(pts, "{:.1},{:.1} ", fx.to_px(f), py.to_px(v));
        }
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="#b0413e" stroke-width="1.4"/>"##,
            pts.trim_end()
        );
        let f0_text = col
            .f0_hz
            .map_or("f0: none".to_string(), |f| format!("f0 = {f:.1} Hz"));
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" font-size="11">{f0_text}, Prom = {:.1}, {:.1} Hz</text>"##,
            x0 + 8.0,
            y0 + 16.0,
            col.prominence,
            col.mean_rate_hz
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">f (Hz)</text>"##,
            x0 + sub_w / 2.0,
            y0 + sub_h + 16.0
        );
        if ci == 0 {
            let _ = writeln!(
                s,
                r##"<text x="20" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 20 {:.2})">PSD</text>"##,
                y0 + sub_h / 2.0,
                y0 + sub_h / 2.0
            );
        }
    }

    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_map_round_trips() {
        let m = AxisMap {
            v_lo: 3.75,
            v_hi: 31.25,
            px_lo: 80.0,
            px_hi: 490.0,
        };
        for v in [3.75, 5.0, 6.25, 17.5, 31.25] {
            let back = m.to_value(m.to_px(v));
            assert!((back - v).abs() < 1e-9, "{v} -> {back}");
        }
        let inv = AxisMap {
            v_lo: -0.625,
            v_hi: 10.625,
            px_lo: 450.0,
            px_hi: 50.0,
        };
        for v in [0.0, 6.25, 10.0] {
            assert!((inv.to_value(inv.to_px(v)) - v).abs() < 1e-9);
        }
    }

    #[test]
    fn single_sil_cell_renders_one_rect_in_sil_color() {
        let spec = HeatmapSpec {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            x_values: vec![5.0],
            y_values: vec![2.5],
            cells: vec![CellValue::Regime(RegimeLabel::Sil)],
            overlay: None,
            scale_bounds: None,
        };
        let svg = render_heatmap(&spec);
        assert_eq!(svg.matches("#b8b8b8").count(), 2); // one cell + legend swatch
        assert!(svg.contains("<svg"));
        assert!(svg.contains("</svg>"));
    }

    #[test]
    fn uniform_scalar_field_has_identical_fills() {
        let spec = HeatmapSpec {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            x_values: vec![1.0, 2.0, 3.0],
            y_values: vec![1.0, 2.0],
            cells: vec![CellValue::Scalar(7.5); 6],
            overlay: None,
            scale_bounds: None,
        };
        let svg = render_heatmap(&spec);
        let fills: Vec<&str> = svg
            .lines()
            .filter(|l| l.starts_with("<rect x=") && l.contains("fill=\"#"))
            .take(6)
            .collect();
        assert_eq!(fills.len(), 6);
        let first_fill = fills[0].split("fill=").nth(1).unwrap();
        assert!(fills.iter().all(|l| l.split("fill=").nth(1).unwrap() == first_fill));
    }

    #[test]
    fn missing_cells_are_hatched() {
        let spec = HeatmapSpec {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            x_values: vec![1.0, 2.0],
            y_values: vec![1.0],
            cells: vec![CellValue::Scalar(1.0), CellValue::Missing],
            overlay: None,
            scale_bounds: None,
        };
        let svg = render_heatmap(&spec);
        assert!(svg.contains("url(#hatch)"));
    }

    #[test]
    fn overlay_uses_the_cell_axis_transform() {
        // An overlay vertex placed exactly on a grid value must land on
        // that cell's center pixel.
        let x_values = vec![5.0, 7.5, 10.0];
        let y_values = vec![0.0, 1.25, 2.5];
        let bx = boundaries(&x_values);
        let by = boundaries(&y_values);
        let x_map = AxisMap {
            v_lo: bx[0],
            v_hi: *bx.last().unwrap(),
            px_lo: 80.0,
            px_hi: 490.0,
        };
        let y_map = AxisMap {
            v_lo: by[0],
            v_hi: *by.last().unwrap(),
            px_lo: 450.0,
            px_hi: 50.0,
        };
        let cx = x_map.to_px(7.5);
        let cy = y_map.to_px(1.25);
        // Cell center = midpoint of its boundary pixels.
        let cell_cx = 0.5 * (x_map.to_px(bx[1]) + x_map.to_px(bx[2]));
        let cell_cy = 0.5 * (y_map.to_px(by[1]) + y_map.to_px(by[2]));
        assert!((cx - cell_cx).abs() < 1e-9);
        assert!((cy - cell_cy).abs() < 1e-9);

        let spec = HeatmapSpec {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            x_values,
            y_values,
            cells: vec![CellValue::Scalar(1.0); 9],
            overlay: Some(vec![(5.0, 0.0), (7.5, 1.25), (10.0, 2.5)]),
            scale_bounds: None,
        };
        let svg = render_heatmap(&spec);
        assert!(svg.contains("stroke-dasharray"));
    }
}
