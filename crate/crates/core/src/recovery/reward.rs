//! Dense per-step reward terms and the costmap probes that feed them.

use serde::{Deserialize, Serialize};

use super::costmap::{Costmap, GRID_SIZE};

/// Forward probe depth; also the danger normaliser.
pub const CORRIDOR_DEPTH: f64 = 3.13;
pub const BLOCKED_DISTANCE: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeConfig {
    /// Corridor width, the robot width.
    pub corridor_width: f64,
    pub corridor_depth: f64,
    /// Half length of the side probes along the heading.
    pub side_half_length: f64,
    /// Lateral offset where the side probes start (robot half width).
    pub side_offset: f64,
    /// Lateral reach of the side probes beyond the offset.
    pub side_range: f64,
    pub occupied_threshold: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            corridor_width: 0.90,
            corridor_depth: CORRIDOR_DEPTH,
            side_half_length: 0.53,
            side_offset: 0.45,
            side_range: 1.0,
            occupied_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Probes {
    /// Distance from the robot centre to the nearest occupied cell in the
    /// forward corridor, or the corridor depth when clear.
    pub corridor: f64,
    pub tau_left: f64,
    pub tau_right: f64,
}

impl Probes {
    pub fn clear(cfg: &ProbeConfig) -> Self {
        Probes { corridor: cfg.corridor_depth, tau_left: 0.0, tau_right: 0.0 }
    }

    pub fn tau_side(&self) -> f64 {
        self.tau_left.max(self.tau_right)
    }

    pub fn blocked(&self) -> bool {
        self.corridor < BLOCKED_DISTANCE
    }
}

/// Reads the corridor distance and side tightness off an inflated costmap.
pub fn probe(grid: &Costmap, cfg: &ProbeConfig) -> Probes {
    let mut out = Probes::clear(cfg);
    let mut left_gap = f64::INFINITY;
    let mut right_gap = f64::INFINITY;
    for iy in 0..GRID_SIZE {
        for ix in 0..GRID_SIZE {
            if grid.get(ix, iy) < cfg.occupied_threshold {
                continue;
            }
            let (x, y) = Costmap::cell_center(ix, iy);
            if x > 0.0 && x <= cfg.corridor_depth && y.abs() <= cfg.corridor_width / 2.0 {
                out.corridor = out.corridor.min(x.hypot(y));
            }
            if x.abs() <= cfg.side_half_length {
                let gap = y.abs() - cfg.side_offset;
                if (0.0..=cfg.side_range).contains(&gap) {
                    if y > 0.0 {
                        left_gap = left_gap.min(gap);
                    } else {
                        right_gap = right_gap.min(gap);
                    }
                }
            }
        }
    }
    let tightness = |gap: f64| if gap.is_finite() { 1.0 - (gap / cfg.side_range).clamp(0.0, 1.0) } else { 0.0 };
    out.tau_left = tightness(left_gap);
    out.tau_right = tightness(right_gap);
    out
}

/// Everything the reward terms read about one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RewardContext {
    pub x: f64,
    pub y: f64,
    pub goal_distance: f64,
    /// Bearing of the goal relative to the heading.
    pub heading_error: f64,
    pub v: f64,
    pub omega: f64,
    pub probes: Probes,
    pub collision: bool,
    /// Seconds spent inside the current stall radius.
    pub stall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub goal: f64,
    pub success: f64,
    pub time: f64,
    pub velocity: f64,
    pub heading: f64,
    pub yaw: f64,
    #[serde(rename = "move")]
    pub movement: f64,
    pub collision: f64,
    pub danger: f64,
    pub angular: f64,
    pub centering: f64,
    pub stall: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.goal
            + self.success
            + self.time
            + self.velocity
            + self.heading
            + self.yaw
            + self.movement
            + self.collision
            + self.danger
            + self.angular
            + self.centering
            + self.stall
    }

    pub fn accumulate(&mut self, o: &RewardBreakdown) {
        self.goal += o.goal;
        self.success += o.success;
        self.time += o.time;
        self.velocity += o.velocity;
        self.heading += o.heading;
        self.yaw += o.yaw;
        self.movement += o.movement;
        self.collision += o.collision;
        self.danger += o.danger;
        self.angular += o.angular;
        self.centering += o.centering;
        self.stall += o.stall;
    }
}

/// The twelve reward terms for the transition `prev -> next`.
pub fn reward_components(prev: &RewardContext, next: &RewardContext) -> RewardBreakdown {
    let p = &next.probes;
    let open = if p.blocked() { 0.0 } else { 1.0 };
    let tau_side = p.tau_side();
    let speed_scale = (p.corridor / 2.0).clamp(0.0, 1.0);
    let psi = next.heading_error;
    let moving = if next.v.abs() > 0.1 { 1.0 } else { 0.0 };
    let ds = (next.x - prev.x).hypot(next.y - prev.y);
    RewardBreakdown {
        goal: 100.0 * ((-0.25 * next.goal_distance).exp() - (-0.25 * prev.goal_distance).exp()),
        success: if next.goal_distance < 0.5 { 20.0 } else { 0.0 },
        time: -0.05,
        velocity: 3.0 * next.v * psi.cos() * (1.0 - 0.85 * tau_side) * speed_scale * open,
        heading: (1.0 - psi.abs() / std::f64::consts::PI) * moving * open,
        yaw: 2.0 * (prev.heading_error.abs() - psi.abs()),
        movement: 0.2 * (ds / 0.03).tanh(),
        collision: if next.collision { -30.0 } else { 0.0 },
        danger: -3.0 * (1.0 - (p.corridor / CORRIDOR_DEPTH).clamp(0.0, 1.0)).powi(2),
        angular: -0.3 * next.omega.abs() * (1.0 - tau_side) * open,
        centering: 2.5 * (p.tau_right - p.tau_left) * next.omega,
        stall: (-0.5 * (next.stall_time - 1.0).max(0.0).powi(2)).max(-2.0),
    }
}
