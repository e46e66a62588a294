//! Oscillation-onset boundary of a linear delayed-feedback rate model.
//!
//! The reference model is a single effective population with delayed
//! negative feedback filtered through a membrane pole and a synaptic pole:
//!
//! ```text
//! tau_m r'(t) = -r(t) + a(t)
//! tau_s a'(t) = -a(t) - G r(t - d)
//! ```
//!
//! Its characteristic equation `(1 + s tau_m)(1 + s tau_s) + G e^(-s d) = 0`
//! loses stability through a pure imaginary pair `s = +-i w`. Splitting
//! into phase and magnitude at `s = i w` gives
//!
//! ```text
//! w d + atan(w tau_m) + atan(w tau_s) = pi        (phase)
//! G_c = sqrt((1 + w^2 tau_m^2)(1 + w^2 tau_s^2))  (magnitude)
//! ```
//!
//! The phase is continuous, zero at w = 0, and unbounded, so the smallest
//! positive root is unique and bracketed by [0, pi/d]. With d = 0 the
//! phase is bounded below pi and no finite onset frequency exists. This
//! module is a coarse reference overlay, not a spectral theory of the
//! spiking network.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HopfError {
    #[error("no finite oscillation-onset frequency for zero delay")]
    ZeroDelay,
}

const PHASE_TOL: f64 = 1e-10;

fn phase(omega: f64, tau_m: f64, tau_s: f64, d: f64) -> f64 {
    omega * d + (omega * tau_m).atan() + (omega * tau_s).atan()
}

/// Smallest positive `w` (rad/ms) satisfying the phase condition, found by
/// bisection until the phase residual drops below 1e-10.
pub fn hopf_frequency(tau_m: f64, tau_s: f64, d: f64) -> Result<f64, HopfError> {
    if d <= 0.0 {
        return Err(HopfError::ZeroDelay);
    }
    let mut lo = 0.0f64;
    let mut hi = std::f64::consts::PI / d;
    // The bracket endpoint is exact in the pure-delay limit.
    if phase(hi, tau_m, tau_s, d) - std::f64::consts::PI <= 0.0 {
        return Ok(hi);
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let r = phase(mid, tau_m, tau_s, d) - std::f64::consts::PI;
        if r.abs() < PHASE_TOL {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

/// Feedback gain at which the fixed point turns neutrally stable.
pub fn critical_gain(tau_m: f64, tau_s: f64, d: f64) -> Result<f64, HopfError> {
    let w = hopf_frequency(tau_m, tau_s, d)?;
    Ok(((1.0 + (w * tau_m).powi(2)) * (1.0 + (w * tau_s).powi(2))).sqrt())
}

/// One boundary vertex in the (tau_s, d) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub tau_s_ms: f64,
    pub d_ms: f64,
}

/// Extracts the `G_c = gain_ref` contour by sign-change detection along
/// each tau_s column of the grid, with linear interpolation in d. Grid
/// nodes at d <= 0 are skipped (no finite onset there); an exact hit on a
/// node returns that node. An empty result is legal: the boundary lies
/// outside the window.
pub fn boundary_curve(
    tau_m: f64,
    gain_ref: f64,
    tau_s_grid: &[f64],
    d_grid: &[f64],
) -> Vec<BoundaryPoint> {
    let mut points = Vec::new();
    for &tau_s in tau_s_grid {
        let column: Vec<(f64, f64)> = d_grid
            .iter()
            .filter(|&&d| d > 0.0)
            .map(|&d| (d, critical_gain(tau_m, tau_s, d).expect("d > 0")))
            .collect();
        for pair in column.windows(2) {
            let (d0, g0) = pair[0];
            let (d1, g1) = pair[1];
            let r0 = g0 - gain_ref;
            let r1 = g1 - gain_ref;
            if r0 == 0.0 {
                points.push(BoundaryPoint {
                    tau_s_ms: tau_s,
                    d_ms: d0,
                });
            } else if r0 * r1 < 0.0 {
                let frac = r0 / (r0 - r1);
                points.push(BoundaryPoint {
                    tau_s_ms: tau_s,
                    d_ms: d0 + frac * (d1 - d0),
                });
            }
        }
        if let Some(&(d_last, g_last)) = column.last() {
            if g_last == gain_ref {
                points.push(BoundaryPoint {
                    tau_s_ms: tau_s,
                    d_ms: d_last,
                });
            }
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn phase_residual_below_tolerance() {
        for (tau_m, tau_s, d) in [(20.0, 5.0, 6.25), (20.0, 30.0, 1.25), (10.0, 12.5, 10.0)] {
            let w = hopf_frequency(tau_m, tau_s, d).unwrap();
            let r = (phase(w, tau_m, tau_s, d) - PI).abs();
            assert!(r < 1e-10, "residual {r} at ({tau_m},{tau_s},{d})");
        }
    }

    #[test]
    fn pure_delay_limit() {
        for d in [0.5, 2.0, 6.25, 10.0] {
            let w = hopf_frequency(0.0, 0.0, d).unwrap();
            assert!((w - PI / d).abs() <= 1e-6 * (PI / d));
            let g = critical_gain(0.0, 0.0, d).unwrap();
            assert!((g - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn zero_delay_is_an_error() {
        assert_eq!(hopf_frequency(20.0, 5.0, 0.0).unwrap_err(), HopfError::ZeroDelay);
        assert_eq!(critical_gain(20.0, 5.0, 0.0).unwrap_err(), HopfError::ZeroDelay);
    }

    #[test]
    fn timescale_scaling_inverts_frequency() {
        let (tau_m, tau_s, d) = (20.0, 5.0, 6.25);
        let w = hopf_frequency(tau_m, tau_s, d).unwrap();
        for c in [0.5, 2.0, 4.0] {
            let wc = hopf_frequency(c * tau_m, c * tau_s, c * d).unwrap();
            assert!(
                (wc - w / c).abs() <= 1e-8 * (w / c),
                "scale {c}: {wc} vs {}",
                w / c
            );
        }
    }

    #[test]
    fn gain_at_least_one_and_nonincreasing_in_delay() {
        // Numeric sweep: longer delay destabilizes at lower gain.
        let (tau_m, tau_s) = (20.0, 5.0);
        let mut prev = f64::INFINITY;
        let mut d = 0.5;
        while d <= 10.0 + 1e-9 {
            let g = critical_gain(tau_m, tau_s, d).unwrap();
            assert!(g >= 1.0);
            assert!(g <= prev + 1e-12, "G_c increased at d = {d}");
            prev = g;
            d += 0.1;
        }
    }

    #[test]
    fn gain_is_continuous_in_tau_s() {
        let (tau_m, d) = (20.0, 6.25);
        let mut prev = critical_gain(tau_m, 5.0, d).unwrap();
        let mut tau_s = 5.0 + 1e-3;
        while tau_s <= 30.0 {
            let g = critical_gain(tau_m, tau_s, d).unwrap();
            assert!((g - prev).abs() < 0.05, "jump at tau_s = {tau_s}");
            prev = g;
            tau_s += 1e-3 * 250.0;
        }
    }

    #[test]
    fn boundary_empty_when_gain_unattained() {
        let tau_s: Vec<f64> = (1..=11).map(|i| 2.5 * i as f64 + 2.5).collect();
        let d: Vec<f64> = (0..=8).map(|i| 1.25 * i as f64).collect();
        // Below the attainable minimum (G_c >= 1): no contour.
        let pts = boundary_curve(20.0, 0.5, &tau_s, &d);
        assert!(pts.is_empty());
    }

    #[test]
    fn boundary_exact_node_hit_returned() {
        let g_node = critical_gain(20.0, 10.0, 5.0).unwrap();
        let pts = boundary_curve(20.0, g_node, &[10.0], &[2.5, 5.0, 7.5]);
        assert!(pts
            .iter()
            .any(|p| p.tau_s_ms == 10.0 && (p.d_ms - 5.0).abs() < 1e-12));
    }

    #[test]
    fn boundary_unique_per_column_in_attained_range() {
        // G_c is monotone in d, so each tau_s column crosses once.
        let tau_s: Vec<f64> = (0..11).map(|i| 5.0 + 2.5 * i as f64).collect();
        let d: Vec<f64> = (0..9).map(|i| 1.25 * i as f64).collect();
        let gain_ref = 8.0;
        let pts = boundary_curve(20.0, gain_ref, &tau_s, &d);
        assert!(!pts.is_empty());
        for &ts in &tau_s {
            let count = pts.iter().filter(|p| p.tau_s_ms == ts).count();
            assert!(count <= 1, "tau_s {ts} crossed {count} times");
        }
        // Interpolated points reproduce gain_ref closely.
        for p in &pts {
            let g = critical_gain(20.0, p.tau_s_ms, p.d_ms).unwrap();
            assert!((g - gain_ref).abs() < 0.25, "boundary point off contour: {g}");
        }
    }
}
