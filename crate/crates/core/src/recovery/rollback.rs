//! Closed-loop return to a safe checkpoint.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::apf::{apf_command, ApfCommand, ApfConfig};
use super::costmap::{Costmap, CostmapConfig};
use super::kinematics::{integrate_kinematics, Integrator, KinematicParams, RobotState};
use super::reward::{probe, reward_components, ProbeConfig, RewardBreakdown, RewardContext};
use super::smoother::{smooth_action, SmootherConfig};
use super::world::{BodyConfig, Scenario, World};
use crate::detector::SafeCheckpoint;
use crate::exec::Exec;

#[derive(Debug, Error, PartialEq)]
pub enum RecoveryError {
    #[error("checkpoint ({x}, {y}) lies outside the world bounds")]
    CheckpointOutOfBounds { x: f64, y: f64 },
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct RollbackConfig {
    pub kinematics: KinematicParams,
    pub smoother: SmootherConfig,
    pub costmap: CostmapConfig,
    pub apf: ApfConfig,
    pub body: BodyConfig,
    pub probes: ProbeConfig,
    pub integrator: Integrator,
    /// Seconds of simulated time allowed.
    pub budget: f64,
    pub success_radius: f64,
    pub stall_radius: f64,
    pub stall_time: f64,
}

impl Default for RollbackConfig {
    fn default() -> Self {
        RollbackConfig {
            kinematics: KinematicParams::default(),
            smoother: SmootherConfig::default(),
            costmap: CostmapConfig::default(),
            apf: ApfConfig::default(),
            body: BodyConfig::default(),
            probes: ProbeConfig::default(),
            integrator: Integrator::Euler,
            budget: 60.0,
            success_radius: 0.5,
            stall_radius: 0.2,
            stall_time: 3.0,
        }
    }
}

impl RollbackConfig {
    pub fn validate(&self) -> Result<(), RecoveryError> {
        let k = &self.kinematics;
        let s = &self.smoother;
        let positive = [k.wheel_radius, k.wheelbase, k.dt, s.v_max, s.w_max, s.a_max, s.a_max_w, s.deadzone];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(RecoveryError::Config("kinematic and smoother parameters must be positive".into()));
        }
        if !(self.budget >= 0.0) {
            return Err(RecoveryError::Config(format!("budget must be non-negative, got {}", self.budget)));
        }
        if self.apf.sectors == 0 {
            return Err(RecoveryError::Config("APF needs at least one sector".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Collision,
    Stall,
    Timeout,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Success => "Success",
            Outcome::Collision => "Collision",
            Outcome::Stall => "Stall",
            Outcome::Timeout => "Timeout",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecoveryOutcome {
    pub outcome: Outcome,
    pub elapsed: f64,
    pub steps: usize,
    pub path_length: f64,
    pub final_distance: f64,
    /// Absolute heading difference to the checkpoint pose at the end.
    pub final_heading_error: f64,
    /// Steps on which the controller reported a local minimum.
    pub stalled_commands: usize,
    pub rewards: RewardBreakdown,
    #[serde(skip)]
    pub trajectory: Vec<TrajectoryPoint>,
    /// Inflated costmap the controller saw on the last tick.
    #[serde(skip)]
    pub last_observation: Costmap,
}

impl RecoveryOutcome {
    /// `t,x,y,theta,v,omega,outcome`; the outcome is filled on the last row.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("t,x,y,theta,v,omega,outcome\n");
        let last = self.trajectory.len().saturating_sub(1);
        for (i, p) in self.trajectory.iter().enumerate() {
            let tag = if i == last { self.outcome.to_string() } else { String::new() };
            out.push_str(&format!("{:.1},{},{},{},{},{},{}\n", p.t, p.x, p.y, p.theta, p.v, p.omega, tag));
        }
        out
    }
}

/// Largest displacement of a footprint corner between two poses, so turning
/// in place counts as motion.
fn footprint_shift(a: &RobotState, b: &RobotState, body: &BodyConfig) -> f64 {
    let (hl, hw) = (body.length / 2.0, body.width / 2.0);
    let corner = |s: &RobotState, u: f64, w: f64| {
        let (sn, cs) = s.theta.sin_cos();
        [s.x + u * cs - w * sn, s.y + u * sn + w * cs]
    };
    [(hl, hw), (hl, -hw), (-hl, hw), (-hl, -hw)]
        .iter()
        .map(|&(u, w)| {
            let (p, q) = (corner(a, u, w), corner(b, u, w));
            (p[0] - q[0]).hypot(p[1] - q[1])
        })
        .fold(0.0, f64::max)
}

fn point(t: f64, s: &RobotState) -> TrajectoryPoint {
    TrajectoryPoint { t, x: s.x, y: s.y, theta: s.theta, v: s.v, omega: s.omega }
}

/// Drives from `start` toward the checkpoint position `goal = [x, y, theta]`.
pub fn run_rollback(goal: [f64; 3], start: RobotState, world: &World, cfg: &RollbackConfig) -> Result<RecoveryOutcome, RecoveryError> {
    cfg.validate()?;
    let target = [goal[0], goal[1]];
    if !world.bounds.contains(target) {
        return Err(RecoveryError::CheckpointOutOfBounds { x: goal[0], y: goal[1] });
    }
    let dt = cfg.kinematics.dt;
    let mut state = start;
    let mut trajectory = vec![point(0.0, &state)];
    let mut memory = Costmap::new();
    let mut rewards = RewardBreakdown::default();
    let mut path_length = 0.0;
    let mut stalled_commands = 0;
    let mut anchor = state;
    let mut anchored_for = 0.0;
    let mut steps = 0usize;
    let context = |s: &RobotState, grid: &Costmap, collision: bool, stall: f64| RewardContext {
        x: s.x,
        y: s.y,
        goal_distance: s.distance_to(target),
        heading_error: s.heading_error_to(target),
        v: s.v,
        omega: s.omega,
        probes: probe(grid, &cfg.probes),
        collision,
        stall_time: stall,
    };
    let mut prev_ctx = context(&state, &memory, false, 0.0);
    let mut last_observation = Costmap::new();

    let outcome = loop {
        let elapsed = steps as f64 * dt;
        if elapsed >= cfg.budget - 1e-9 {
            break Outcome::Timeout;
        }
        if state.distance_to(target) < cfg.success_radius {
            break Outcome::Success;
        }

        memory.ingest(&world.scan(&state, &cfg.body), &cfg.costmap);
        let observed = memory.inflate();
        let cmd = apf_command(&state, target, &observed, &cfg.apf);
        if cmd == ApfCommand::Stalled {
            stalled_commands += 1;
        }
        let (v, w) = smooth_action((state.v, state.omega), cmd.twist(), &cfg.smoother, dt);
        let next = integrate_kinematics(&state, v, w, dt, cfg.integrator);
        steps += 1;
        path_length += (next.x - state.x).hypot(next.y - state.y);

        // carry the memory into the new pose before the next scan lands
        let (dx, dy, dth) = state.delta_to(&next);
        memory = memory.warp(dx, dy, dth);
        memory.decay(cfg.costmap.decay);

        if footprint_shift(&anchor, &next, &cfg.body) > cfg.stall_radius {
            anchor = next;
            anchored_for = 0.0;
        } else {
            anchored_for += dt;
        }
        let collided = world.collides(&next, &cfg.body);
        let ctx = context(&next, &observed, collided, anchored_for);
        rewards.accumulate(&reward_components(&prev_ctx, &ctx));
        prev_ctx = ctx;
        last_observation = observed;
        state = next;
        trajectory.push(point(steps as f64 * dt, &state));

        if collided {
            break Outcome::Collision;
        }
        if state.distance_to(target) < cfg.success_radius {
            break Outcome::Success;
        }
        if anchored_for > cfg.stall_time + 1e-9 {
            break Outcome::Stall;
        }
    };

    Ok(RecoveryOutcome {
        outcome,
        elapsed: steps as f64 * dt,
        steps,
        path_length,
        final_distance: state.distance_to(target),
        final_heading_error: crate::trace::wrap_angle(goal[2] - state.theta).abs(),
        stalled_commands,
        rewards,
        trajectory,
        last_observation,
    })
}

/// Rolls back to the pose stored in a detector checkpoint.
pub fn rollback_to_checkpoint(
    checkpoint: &SafeCheckpoint,
    start: RobotState,
    world: &World,
    cfg: &RollbackConfig,
) -> Result<RecoveryOutcome, RecoveryError> {
    let p = checkpoint.pose;
    run_rollback([p.x as f64, p.y as f64, p.theta as f64], start, world, cfg)
}

pub fn run_scenario(sc: &Scenario, cfg: &RollbackConfig) -> Result<RecoveryOutcome, RecoveryError> {
    run_rollback(sc.checkpoint, RobotState::at(sc.start[0], sc.start[1], sc.start[2]), &sc.world, cfg)
}

/// Runs independent scenarios; results keep the input order.
pub fn run_batch(scenarios: &[Scenario], cfg: &RollbackConfig, exec: Exec) -> Result<Vec<RecoveryOutcome>, RecoveryError> {
    exec.try_map(scenarios, |sc| run_scenario(sc, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recovery::world::{Bounds, Obstacle};

    fn open() -> World {
        World::empty(Bounds { x_min: -5.0, x_max: 8.0, y_min: -5.0, y_max: 5.0 })
    }

    #[test]
    fn straight_run_in_empty_world() {
        let out = run_rollback([2.0, 0.0, 0.0], RobotState::default(), &open(), &RollbackConfig::default()).unwrap();
        assert_eq!(out.outcome, Outcome::Success);
        // stops as soon as it is inside the 0.5 m radius
        assert!(out.path_length >= 1.5 - 1e-9 && out.path_length <= 1.5 * 1.1, "{}", out.path_length);
        assert_eq!(out.rewards.collision, 0.0);
        assert_eq!(out.rewards.success, 20.0);
    }

    #[test]
    fn zero_budget_times_out() {
        let out = run_rollback([2.0, 0.0, 0.0], RobotState::default(), &open(), &RollbackConfig { budget: 0.0, ..Default::default() }).unwrap();
        assert_eq!(out.outcome, Outcome::Timeout);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn unreachable_checkpoint_never_succeeds() {
        let mut w = open();
        w.obstacles.push(Obstacle::Box { min: [2.0, -1.0], max: [4.0, 1.0] });
        let cfg = RollbackConfig { budget: 30.0, ..Default::default() };
        let out = run_rollback([3.0, 0.0, 0.0], RobotState::default(), &w, &cfg).unwrap();
        assert_ne!(out.outcome, Outcome::Success);
    }

    #[test]
    fn checkpoint_outside_bounds_rejected() {
        let err = run_rollback([20.0, 0.0, 0.0], RobotState::default(), &open(), &RollbackConfig::default()).unwrap_err();
        assert!(matches!(err, RecoveryError::CheckpointOutOfBounds { .. }));
    }

    #[test]
    fn trajectory_csv_shape() {
        let out = run_rollback([2.0, 0.0, 0.0], RobotState::default(), &open(), &RollbackConfig::default()).unwrap();
        let csv = out.trajectory_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,y,theta,v,omega,outcome");
        assert_eq!(lines.len(), out.steps + 2);
        assert!(lines.last().unwrap().ends_with(",Success"));
        assert!(lines[1].ends_with(','));
    }
}
