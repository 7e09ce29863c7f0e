//! 2D obstacle worlds: ray synthesis, footprint collision and seeded
//! scenario generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kinematics::RobotState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Obstacle {
    Circle { center: [f64; 2], radius: f64 },
    /// Axis-aligned box.
    Box { min: [f64; 2], max: [f64; 2] },
}

impl Obstacle {
    /// Distance from `p` to the obstacle surface, 0 inside.
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        match *self {
            Obstacle::Circle { center, radius } => ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).max(0.0),
            Obstacle::Box { min, max } => {
                let dx = (min[0] - p[0]).max(p[0] - max[0]).max(0.0);
                let dy = (min[1] - p[1]).max(p[1] - max[1]).max(0.0);
                dx.hypot(dy)
            }
        }
    }

    /// Surface-to-surface gap between two obstacles, 0 when overlapping.
    pub fn gap(&self, other: &Obstacle) -> f64 {
        match (*self, *other) {
            (Obstacle::Circle { center, radius }, o) | (o, Obstacle::Circle { center, radius }) => {
                (o.distance_to(center) - radius).max(0.0)
            }
            (Obstacle::Box { min: a0, max: a1 }, Obstacle::Box { min: b0, max: b1 }) => {
                let dx = (b0[0] - a1[0]).max(a0[0] - b1[0]).max(0.0);
                let dy = (b0[1] - a1[1]).max(a0[1] - b1[1]).max(0.0);
                dx.hypot(dy)
            }
        }
    }

    fn ray_hit(&self, o: [f64; 2], d: [f64; 2]) -> Option<f64> {
        match *self {
            Obstacle::Circle { center, radius } => {
                let (fx, fy) = (o[0] - center[0], o[1] - center[1]);
                let b = fx * d[0] + fy * d[1];
                let c = fx * fx + fy * fy - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let t = -b - disc.sqrt();
                if t >= 0.0 {
                    Some(t)
                } else {
                    let t2 = -b + disc.sqrt();
                    (t2 >= 0.0).then_some(0.0)
                }
            }
            Obstacle::Box { min, max } => {
                let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
                for axis in 0..2 {
                    if d[axis].abs() < 1e-15 {
                        if o[axis] < min[axis] || o[axis] > max[axis] {
                            return None;
                        }
                    } else {
                        let t1 = (min[axis] - o[axis]) / d[axis];
                        let t2 = (max[axis] - o[axis]) / d[axis];
                        lo = lo.max(t1.min(t2));
                        hi = hi.min(t1.max(t2));
                    }
                }
                (lo <= hi).then_some(lo)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.x_min..=self.x_max).contains(&p[0]) && (self.y_min..=self.y_max).contains(&p[1])
    }
}

/// Robot footprint and range-sensor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BodyConfig {
    pub length: f64,
    pub width: f64,
    pub sensor_height: f64,
    pub rays: usize,
    pub max_range: f64,
}

impl Default for BodyConfig {
    fn default() -> Self {
        BodyConfig { length: 1.06, width: 0.90, sensor_height: 0.63, rays: 360, max_range: 10.0 }
    }
}

/// Obstacles inside a walled rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub bounds: Bounds,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

impl World {
    pub fn empty(bounds: Bounds) -> Self {
        World { bounds, obstacles: vec![] }
    }

    /// Distance along unit direction `d` to the first surface, walls included.
    pub fn ray_cast(&self, o: [f64; 2], d: [f64; 2], max_range: f64) -> Option<f64> {
        let b = &self.bounds;
        let mut best = f64::INFINITY;
        for (axis, lo, hi) in [(0, b.x_min, b.x_max), (1, b.y_min, b.y_max)] {
            if d[axis] > 1e-15 {
                best = best.min((hi - o[axis]) / d[axis]);
            } else if d[axis] < -1e-15 {
                best = best.min((lo - o[axis]) / d[axis]);
            }
        }
        for ob in &self.obstacles {
            if let Some(t) = ob.ray_hit(o, d) {
                best = best.min(t);
            }
        }
        (best <= max_range).then_some(best.max(0.0))
    }

    /// Range returns as robot-frame points at the sensor height.
    pub fn scan(&self, s: &RobotState, body: &BodyConfig) -> Vec<[f64; 3]> {
        let mut pts = Vec::with_capacity(body.rays);
        for k in 0..body.rays {
            let local = 2.0 * std::f64::consts::PI * k as f64 / body.rays as f64;
            let (sl, cl) = local.sin_cos();
            let (sw, cw) = (s.theta + local).sin_cos();
            if let Some(t) = self.ray_cast([s.x, s.y], [cw, sw], body.max_range) {
                pts.push([t * cl, t * sl, body.sensor_height]);
            }
        }
        pts
    }

    /// Whether the robot rectangle at `s` touches an obstacle or leaves the bounds.
    pub fn collides(&self, s: &RobotState, body: &BodyConfig) -> bool {
        let (hl, hw) = (body.length / 2.0, body.width / 2.0);
        let (sn, cs) = s.theta.sin_cos();
        let corners: Vec<[f64; 2]> = [(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)]
            .iter()
            .map(|&(a, b)| [s.x + a * cs - b * sn, s.y + a * sn + b * cs])
            .collect();
        if corners.iter().any(|&c| !self.bounds.contains(c)) {
            return true;
        }
        self.obstacles.iter().any(|ob| match *ob {
            Obstacle::Circle { center, radius } => {
                let [lx, ly] = s.to_local(center);
                let (qx, qy) = (lx.clamp(-hl, hl), ly.clamp(-hw, hw));
                (lx - qx).hypot(ly - qy) < radius
            }
            Obstacle::Box { min, max } => {
                // separating axes: world x, world y, robot heading, robot lateral
                let xs = corners.iter().map(|c| c[0]);
                let ys = corners.iter().map(|c| c[1]);
                let (cx0, cx1) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
                let (cy0, cy1) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
                if cx1 < min[0] || cx0 > max[0] || cy1 < min[1] || cy0 > max[1] {
                    return false;
                }
                let box_corners = [[min[0], min[1]], [max[0], min[1]], [max[0], max[1]], [min[0], max[1]]];
                for (axis, half) in [([cs, sn], hl), ([-sn, cs], hw)] {
                    let centre = axis[0] * s.x + axis[1] * s.y;
                    let proj = box_corners.iter().map(|c| axis[0] * c[0] + axis[1] * c[1] - centre);
                    let (p0, p1) = (proj.clone().fold(f64::INFINITY, f64::min), proj.fold(f64::NEG_INFINITY, f64::max));
                    if p1 < -half || p0 > half {
                        return false;
                    }
                }
                true
            }
        })
    }

    /// Smallest surface distance from `p` to any obstacle (walls excluded).
    pub fn clearance(&self, p: [f64; 2]) -> f64 {
        self.obstacles.iter().map(|o| o.distance_to(p)).fold(f64::INFINITY, f64::min)
    }
}

/// A world with a start pose and a checkpoint `[x, y, theta]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub world: World,
    pub start: [f64; 3],
    pub checkpoint: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorldGenConfig {
    pub obstacles: usize,
    /// Minimum surface gap between any two obstacles.
    pub clearance: f64,
    /// Minimum surface distance from start and checkpoint to any obstacle.
    pub spawn_clearance: f64,
    pub cylinder_radius: f64,
    pub box_size: [f64; 2],
    pub checkpoint_range: [f64; 2],
    /// Free margin between the start/checkpoint hull and the walls.
    pub margin: f64,
}

impl Default for WorldGenConfig {
    fn default() -> Self {
        WorldGenConfig {
            obstacles: 8,
            clearance: 2.0,
            spawn_clearance: 1.5,
            cylinder_radius: 0.25,
            box_size: [1.5, 0.75],
            checkpoint_range: [2.0, 5.0],
            margin: 3.0,
        }
    }
}

/// Deterministic scenario `index` for `seed`, by rejection sampling.
pub fn generate_scenario(seed: u64, index: u64, cfg: &WorldGenConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let tau = 2.0 * std::f64::consts::PI;
    let dist = rng.random_range(cfg.checkpoint_range[0]..=cfg.checkpoint_range[1]);
    let bearing = rng.random_range(0.0..tau);
    let start = [0.0, 0.0, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)];
    let checkpoint = [dist * bearing.cos(), dist * bearing.sin(), rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)];
    let bounds = Bounds {
        x_min: start[0].min(checkpoint[0]) - cfg.margin,
        x_max: start[0].max(checkpoint[0]) + cfg.margin,
        y_min: start[1].min(checkpoint[1]) - cfg.margin,
        y_max: start[1].max(checkpoint[1]) + cfg.margin,
    };

    let mut obstacles: Vec<Obstacle> = Vec::with_capacity(cfg.obstacles);
    let mut attempts = 0;
    while obstacles.len() < cfg.obstacles && attempts < 2000 {
        attempts += 1;
        let c = [rng.random_range(bounds.x_min..bounds.x_max), rng.random_range(bounds.y_min..bounds.y_max)];
        let candidate = if rng.random_bool(0.5) {
            Obstacle::Circle { center: c, radius: cfg.cylinder_radius }
        } else {
            let [a, b] = cfg.box_size;
            let (hx, hy) = if rng.random_bool(0.5) { (a / 2.0, b / 2.0) } else { (b / 2.0, a / 2.0) };
            Obstacle::Box { min: [c[0] - hx, c[1] - hy], max: [c[0] + hx, c[1] + hy] }
        };
        let spawn_ok = [start, checkpoint].iter().all(|p| candidate.distance_to([p[0], p[1]]) >= cfg.spawn_clearance);
        let gap_ok = obstacles.iter().all(|o| o.gap(&candidate) >= cfg.clearance);
        if spawn_ok && gap_ok {
            obstacles.push(candidate);
        }
    }
    Scenario { world: World { bounds, obstacles }, start, checkpoint }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxed() -> World {
        World::empty(Bounds { x_min: -5.0, x_max: 5.0, y_min: -5.0, y_max: 5.0 })
    }

    #[test]
    fn ray_hits_walls_and_shapes() {
        let mut w = boxed();
        assert!((w.ray_cast([0.0, 0.0], [1.0, 0.0], 10.0).unwrap() - 5.0).abs() < 1e-12);
        w.obstacles.push(Obstacle::Circle { center: [2.0, 0.0], radius: 0.5 });
        w.obstacles.push(Obstacle::Box { min: [-3.0, -1.0], max: [-2.0, 1.0] });
        assert!((w.ray_cast([0.0, 0.0], [1.0, 0.0], 10.0).unwrap() - 1.5).abs() < 1e-12);
        assert!((w.ray_cast([0.0, 0.0], [-1.0, 0.0], 10.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(w.ray_cast([0.0, 0.0], [1.0, 0.0], 1.0).is_none());
    }

    #[test]
    fn scan_in_robot_frame() {
        let mut w = boxed();
        w.obstacles.push(Obstacle::Circle { center: [0.0, 2.0], radius: 0.5 });
        let s = RobotState::at(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let pts = w.scan(&s, &BodyConfig::default());
        assert_eq!(pts.len(), 360);
        // straight ahead in the robot frame
        assert!((pts[0][0] - 1.5).abs() < 1e-9 && pts[0][1].abs() < 1e-9 && pts[0][2] == 0.63);
    }

    #[test]
    fn footprint_collision() {
        let body = BodyConfig::default();
        let mut w = boxed();
        w.obstacles.push(Obstacle::Circle { center: [0.75, 0.0], radius: 0.25 });
        assert!(w.collides(&RobotState::at(0.0, 0.0, 0.0), &body));
        // turned sideways, the half width 0.45 + 0.25 < 0.75
        assert!(!w.collides(&RobotState::at(0.0, 0.0, std::f64::consts::FRAC_PI_2), &body));
        w.obstacles.clear();
        w.obstacles.push(Obstacle::Box { min: [0.5, -0.1], max: [1.0, 0.1] });
        assert!(w.collides(&RobotState::at(0.0, 0.0, 0.0), &body));
        assert!(!w.collides(&RobotState::at(0.0, 0.0, std::f64::consts::FRAC_PI_2), &body));
        assert!(w.collides(&RobotState::at(4.7, 0.0, 0.0), &body));
    }

    #[test]
    fn generated_scenarios_respect_clearances() {
        let cfg = WorldGenConfig::default();
        for i in 0..50 {
            let sc = generate_scenario(11, i, &cfg);
            let d = (sc.checkpoint[0] - sc.start[0]).hypot(sc.checkpoint[1] - sc.start[1]);
            assert!((2.0..=5.0).contains(&d));
            for (a, o) in sc.world.obstacles.iter().enumerate() {
                for p in sc.world.obstacles.iter().skip(a + 1) {
                    assert!(o.gap(p) >= 2.0);
                }
            }
            assert!(sc.world.clearance([sc.start[0], sc.start[1]]) >= 1.5);
            assert!(!sc.world.collides(&RobotState::at(sc.start[0], sc.start[1], sc.start[2]), &BodyConfig::default()));
        }
        assert_eq!(generate_scenario(11, 3, &cfg), generate_scenario(11, 3, &cfg));
        assert_ne!(generate_scenario(11, 3, &cfg), generate_scenario(11, 4, &cfg));
    }

    #[test]
    fn world_json_round_trip() {
        let sc = generate_scenario(1, 0, &WorldGenConfig::default());
        let s = serde_json::to_string(&sc.world).unwrap();
        assert!(s.contains("\"type\":\"circle\"") || s.contains("\"type\":\"box\""));
        assert_eq!(serde_json::from_str::<World>(&s).unwrap(), sc.world);
    }
}
