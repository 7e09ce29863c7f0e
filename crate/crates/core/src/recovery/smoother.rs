//! Three-stage velocity smoother: saturation, acceleration clamp, deadzone.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SmootherConfig {
    pub v_max: f64,
    pub w_max: f64,
    pub a_max: f64,
    pub a_max_w: f64,
    pub deadzone: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig { v_max: 0.5, w_max: 0.5, a_max: 1.0, a_max_w: 5.0, deadzone: 0.02 }
    }
}

fn channel(prev: f64, target: f64, limit: f64, accel: f64, deadzone: f64, dt: f64) -> f64 {
    let sat = target.clamp(-limit, limit);
    let a = ((sat - prev) / dt).clamp(-accel, accel);
    let out = prev + a * dt;
    // Zeroing is skipped when the jump to zero would itself break the
    // acceleration bound; the next step lands inside the band instead.
    if out.abs() < deadzone && prev.abs() <= accel * dt + 1e-9 {
        0.0
    } else {
        out
    }
}

/// One smoother step from the previously published `(v, omega)`.
pub fn smooth_action(prev: (f64, f64), target: (f64, f64), cfg: &SmootherConfig, dt: f64) -> (f64, f64) {
    (
        channel(prev.0, target.0, cfg.v_max, cfg.a_max, cfg.deadzone, dt),
        channel(prev.1, target.1, cfg.w_max, cfg.a_max_w, cfg.deadzone, dt),
    )
}
