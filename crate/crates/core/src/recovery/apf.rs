//! Artificial potential field controller over the robot-centred costmap.
//!
//! Repulsion comes from the nearest occupied cell in each angular sector
//! around the robot, so a long wall pushes about as hard as a single post.

use serde::{Deserialize, Serialize};

use super::costmap::{Costmap, CENTER, GRID_SIZE, RESOLUTION};
use super::kinematics::RobotState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApfConfig {
    pub k_att: f64,
    pub k_rep: f64,
    pub influence_radius: f64,
    /// Attraction saturates beyond this goal distance.
    pub att_saturation: f64,
    pub occupied_threshold: f64,
    pub sectors: usize,
    pub heading_gain: f64,
    pub v_max: f64,
    pub w_max: f64,
    /// Net force magnitude treated as zero.
    pub stall_force: f64,
}

impl Default for ApfConfig {
    fn default() -> Self {
        ApfConfig {
            k_att: 1.0,
            k_rep: 0.5,
            influence_radius: 1.5,
            att_saturation: 1.0,
            occupied_threshold: 0.5,
            sectors: 36,
            heading_gain: 1.5,
            v_max: 0.5,
            w_max: 0.5,
            stall_force: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApfCommand {
    Move { v: f64, omega: f64 },
    /// Local minimum: the field cancels or points straight back from the goal.
    Stalled,
}

impl ApfCommand {
    pub fn twist(&self) -> (f64, f64) {
        match *self {
            ApfCommand::Move { v, omega } => (v, omega),
            ApfCommand::Stalled => (0.0, 0.0),
        }
    }
}

/// Attractive force in the robot frame.
pub fn attraction(state: &RobotState, goal: [f64; 2], cfg: &ApfConfig) -> [f64; 2] {
    let g = state.to_local(goal);
    let d = g[0].hypot(g[1]);
    if d < 1e-12 {
        return [0.0, 0.0];
    }
    let scale = cfg.k_att * d.min(cfg.att_saturation) / d;
    [g[0] * scale, g[1] * scale]
}

/// Repulsive force in the robot frame.
pub fn repulsion(grid: &Costmap, cfg: &ApfConfig) -> [f64; 2] {
    let reach = (cfg.influence_radius / RESOLUTION).ceil() as usize;
    let lo = CENTER.saturating_sub(reach);
    let hi = (CENTER + reach).min(GRID_SIZE - 1);
    let mut nearest = vec![f64::INFINITY; cfg.sectors];
    let mut dirs = vec![[0.0f64; 2]; cfg.sectors];
    for iy in lo..=hi {
        for ix in lo..=hi {
            if grid.get(ix, iy) < cfg.occupied_threshold {
                continue;
            }
            let (x, y) = Costmap::cell_center(ix, iy);
            let rho = x.hypot(y);
            if rho <= 1e-9 || rho > cfg.influence_radius {
                continue;
            }
            // sector 0 is centred on the heading; rounding |angle| keeps the
            // assignment mirror-symmetric
            let angle = y.atan2(x);
            let k = (angle.abs() / std::f64::consts::TAU * cfg.sectors as f64).round() as usize;
            let sector = if angle >= 0.0 { k % cfg.sectors } else { (cfg.sectors - k % cfg.sectors) % cfg.sectors };
            // equidistant cells share the sector's direction, which keeps
            // mirrored layouts mirrored
            if rho < nearest[sector] - 1e-12 {
                nearest[sector] = rho;
                dirs[sector] = [x / rho, y / rho];
            } else if rho <= nearest[sector] + 1e-12 {
                dirs[sector][0] += x / rho;
                dirs[sector][1] += y / rho;
            }
        }
    }
    let mut f = [0.0, 0.0];
    for (rho, d) in nearest.iter().zip(&dirs) {
        if rho.is_finite() {
            let norm = d[0].hypot(d[1]);
            let d = [d[0] / norm, d[1] / norm];
            let mag = cfg.k_rep * (1.0 / rho - 1.0 / cfg.influence_radius) / (rho * rho);
            f[0] -= mag * d[0];
            f[1] -= mag * d[1];
        }
    }
    f
}

/// Target twist toward `goal` from the field over `grid`.
pub fn apf_command(state: &RobotState, goal: [f64; 2], grid: &Costmap, cfg: &ApfConfig) -> ApfCommand {
    let att = attraction(state, goal, cfg);
    let rep = repulsion(grid, cfg);
    let f = [att[0] + rep[0], att[1] + rep[1]];
    let mag = f[0].hypot(f[1]);
    if mag < cfg.stall_force {
        return ApfCommand::Stalled;
    }
    let att_mag = att[0].hypot(att[1]);
    if att_mag > 0.0 {
        let along = (f[0] * att[0] + f[1] * att[1]) / att_mag;
        let lateral = (f[1] * att[0] - f[0] * att[1]) / att_mag;
        if along < 0.0 && lateral.abs() < cfg.stall_force {
            return ApfCommand::Stalled;
        }
    }
    let psi = f[1].atan2(f[0]);
    let omega = (cfg.heading_gain * psi).clamp(-cfg.w_max, cfg.w_max);
    let v = if psi.abs() > std::f64::consts::FRAC_PI_2 {
        0.0
    } else {
        (cfg.v_max * psi.cos() * (mag / cfg.k_att).min(1.0)).clamp(0.0, cfg.v_max)
    };
    ApfCommand::Move { v, omega }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn goal_ahead_drives_straight() {
        let cmd = apf_command(&RobotState::default(), [3.0, 0.0], &Costmap::new(), &ApfConfig::default());
        let ApfCommand::Move { v, omega } = cmd else { panic!("{cmd:?}") };
        assert!(v > 0.0 && omega.abs() < 1e-12);
    }

    #[test]
    fn goal_behind_turns_in_place() {
        let cfg = ApfConfig::default();
        let cmd = apf_command(&RobotState::default(), [-3.0, 0.0], &Costmap::new(), &cfg);
        let ApfCommand::Move { v, omega } = cmd else { panic!("{cmd:?}") };
        assert!(v.abs() < 1e-12 && (omega.abs() - cfg.w_max).abs() < 1e-12);
    }

    #[test]
    fn symmetric_wall_stalls() {
        let mut g = Costmap::new();
        for iy in CENTER - 20..=CENTER + 20 {
            g.set(CENTER + 14, iy, 1.0);
        }
        let cmd = apf_command(&RobotState::default(), [5.0, 0.0], &g, &ApfConfig::default());
        assert_eq!(cmd, ApfCommand::Stalled);
        assert_eq!(cmd.twist(), (0.0, 0.0));
    }

    #[test]
    fn obstacle_on_one_side_pushes_away() {
        let mut g = Costmap::new();
        g.set(CENTER + 12, CENTER + 6, 1.0);
        let rep = repulsion(&g, &ApfConfig::default());
        assert!(rep[0] < 0.0 && rep[1] < 0.0);
    }
}
