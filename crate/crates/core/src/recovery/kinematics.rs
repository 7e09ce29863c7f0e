//! Skid-steer wheel kinematics and unicycle integration.

use serde::{Deserialize, Serialize};

use crate::trace::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KinematicParams {
    pub wheel_radius: f64,
    pub wheelbase: f64,
    pub dt: f64,
}

impl Default for KinematicParams {
    fn default() -> Self {
        KinematicParams { wheel_radius: 0.165, wheelbase: 0.582, dt: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
}

impl RobotState {
    pub fn at(x: f64, y: f64, theta: f64) -> Self {
        RobotState { x, y, theta, v: 0.0, omega: 0.0 }
    }

    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        (self.x - p[0]).hypot(self.y - p[1])
    }

    /// Bearing of `p` relative to the current heading, in (-pi, pi].
    pub fn heading_error_to(&self, p: [f64; 2]) -> f64 {
        wrap_angle((p[1] - self.y).atan2(p[0] - self.x) - self.theta)
    }

    /// World point expressed in the robot frame.
    pub fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        let (dx, dy) = (p[0] - self.x, p[1] - self.y);
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Motion from `self` to `next` expressed in the frame of `self`.
    pub fn delta_to(&self, next: &RobotState) -> (f64, f64, f64) {
        let [dx, dy] = self.to_local([next.x, next.y]);
        (dx, dy, wrap_angle(next.theta - self.theta))
    }
}

/// Left and right wheel angular speeds in rad/s.
pub fn wheel_speeds(v: f64, omega: f64, p: &KinematicParams) -> (f64, f64) {
    let half = omega * p.wheelbase / 2.0;
    ((v - half) / p.wheel_radius, (v + half) / p.wheel_radius)
}

/// Body twist recovered from wheel speeds.
pub fn body_twist(left: f64, right: f64, p: &KinematicParams) -> (f64, f64) {
    let r = p.wheel_radius;
    (r * (left + right) / 2.0, r * (right - left) / p.wheelbase)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Integrator {
    #[default]
    Euler,
    ExactArc,
}

pub fn integrate_kinematics(s: &RobotState, v: f64, omega: f64, dt: f64, integrator: Integrator) -> RobotState {
    let (x, y) = match integrator {
        Integrator::ExactArc if omega.abs() > 1e-12 => {
            let th1 = s.theta + omega * dt;
            let r = v / omega;
            (s.x + r * (th1.sin() - s.theta.sin()), s.y - r * (th1.cos() - s.theta.cos()))
        }
        _ => (s.x + v * s.theta.cos() * dt, s.y + v * s.theta.sin() * dt),
    };
    RobotState { x, y, theta: wrap_angle(s.theta + omega * dt), v, omega }
}
