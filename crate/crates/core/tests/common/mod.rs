//! Brute-force oracles and random generators shared by the integration and
//! acceptance tests. Each oracle is written from the definitions, without
//! calling the code it checks.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentinel_core::labeler::PhaseLabel;
use sentinel_core::recovery::costmap::{Costmap, GRID_SIZE, RESOLUTION};
use sentinel_core::{ActionKind, AttentionMatrix, AttentionRecord, EpisodeTrace, HeadId, Pose};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- labeler

pub struct RandomWalk {
    pub poses: Vec<Pose>,
    pub actions: Vec<ActionKind>,
    pub path: Vec<[f64; 2]>,
}

/// A reference path plus an agent that mostly follows it, sometimes wanders
/// off, sometimes comes back, and sometimes turns or stops.
pub fn random_walk(r: &mut impl Rng) -> RandomWalk {
    let waypoints = r.random_range(3..20);
    let mut heading: f64 = r.random_range(0.0..std::f64::consts::TAU);
    let mut path = vec![[0.0, 0.0]];
    for _ in 1..waypoints {
        heading += r.random_range(-0.6..0.6);
        let last = *path.last().unwrap();
        path.push([last[0] + 0.25 * heading.cos(), last[1] + 0.25 * heading.sin()]);
    }
    let steps = r.random_range(1..40);
    let mut poses = Vec::with_capacity(steps);
    let mut actions = Vec::with_capacity(steps);
    let mut pos = [r.random_range(-0.2..0.2), r.random_range(-0.2..0.2)];
    let mut cursor = 0usize;
    let mut mode = 0u8;
    for _ in 0..steps {
        if r.random_bool(0.2) {
            mode = r.random_range(0..3);
        }
        let action = match r.random_range(0..10) {
            0 => ActionKind::TurnLeft(15.0),
            1 => ActionKind::TurnRight(15.0),
            2 => ActionKind::Stop,
            _ => ActionKind::Forward(0.25),
        };
        poses.push(Pose::new(pos[0] as f32, pos[1] as f32, 0.0, 0.0));
        actions.push(action);
        if action.is_translational() {
            match mode {
                // follow the path
                0 => {
                    cursor = (cursor + 1).min(path.len() - 1);
                    let w = path[cursor];
                    pos = [w[0] + r.random_range(-0.05..0.05), w[1] + r.random_range(-0.05..0.05)];
                }
                // wander
                1 => {
                    let a: f64 = r.random_range(0.0..std::f64::consts::TAU);
                    pos = [pos[0] + 0.25 * a.cos(), pos[1] + 0.25 * a.sin()];
                }
                // walk away from the end of the path
                _ => {
                    let end = path[path.len() - 1];
                    let (dx, dy) = (pos[0] - end[0], pos[1] - end[1]);
                    let n = dx.hypot(dy).max(1e-6);
                    pos = [pos[0] + 0.25 * dx / n, pos[1] + 0.25 * dy / n];
                }
            }
        }
    }
    RandomWalk { poses, actions, path }
}

pub struct OracleLabels {
    pub labels: Vec<PhaseLabel>,
    pub targets: Vec<usize>,
    pub deltas: Vec<f64>,
    pub truncated_at: Option<usize>,
}

fn dist(p: &Pose, w: [f64; 2]) -> f64 {
    (p.x as f64 - w[0]).hypot(p.y as f64 - w[1])
}

/// Replays the target search from step 0 for every prefix, then finds onset
/// and truncation by scanning the non-neutral steps for the first qualifying
/// runs.
pub fn label_oracle(poses: &[Pose], actions: &[ActionKind], path: &[[f64; 2]], p: usize) -> OracleLabels {
    let n = poses.len();
    let target_at = |t: usize| -> usize {
        let mut idx = 0;
        for pose in &poses[..=t] {
            let mut best = idx;
            for i in idx..path.len() {
                if dist(pose, path[i]) < dist(pose, path[best]) {
                    best = i;
                }
            }
            idx = best;
        }
        idx
    };
    let targets: Vec<usize> = (0..n).map(target_at).collect();
    let deltas: Vec<f64> = (0..n)
        .map(|t| {
            if t == 0 || targets[t] != targets[t - 1] {
                0.0
            } else {
                dist(&poses[t], path[targets[t]]) - dist(&poses[t - 1], path[targets[t]])
            }
        })
        .collect();

    // +1 deviating, -1 on track, 0 neutral; judged by the move that follows
    let kind: Vec<i8> = (0..n)
        .map(|t| {
            let forward = matches!(actions[t], ActionKind::Forward(_));
            if !forward || t + 1 == n {
                0
            } else if targets[t + 1] == targets[t] && deltas[t + 1] > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let active: Vec<usize> = (0..n).filter(|&t| kind[t] != 0).collect();
    let run_at = |j: usize, want: i8| j + p <= active.len() && active[j..j + p].iter().all(|&t| kind[t] == want);

    let onset_j = (0..active.len()).find(|&j| run_at(j, 1));
    let truncated_at = onset_j.and_then(|oj| (oj + p..active.len()).find(|&j| run_at(j, -1)).map(|j| active[j] - 1));
    let onset = onset_j.map(|j| active[j]);
    let retained = truncated_at.map_or(n, |t| t + 1);
    let labels = (0..retained)
        .map(|t| if onset.is_some_and(|o| t >= o) { PhaseLabel::Anomaly } else { PhaseLabel::Normal })
        .collect();
    OracleLabels { labels, targets, deltas, truncated_at }
}

// --------------------------------------------------------------- detector

/// Random trace whose heads switch between sharp and diffuse regimes.
pub fn random_trace(r: &mut impl Rng, heads: &[HeadId], frames: usize, tokens: usize, steps: usize) -> EpisodeTrace {
    let mut sharpness: f64 = r.random_range(0.5..8.0);
    let records = (0..steps)
        .map(|t| {
            if r.random_bool(0.1) {
                sharpness = r.random_range(0.5..8.0);
            }
            let hm = heads
                .iter()
                .map(|&h| {
                    let data: Vec<f32> = (0..frames * tokens)
                        .map(|_| (r.random_range(0.0f64..1.0).powf(sharpness) + 1e-6) as f32)
                        .collect();
                    (h, AttentionMatrix::new(frames, tokens, data))
                })
                .collect();
            AttentionRecord { step: t as u32, heads: hm, pose: Pose::new(t as f32, 0.0, 0.0, 0.0), action: ActionKind::Forward(0.25) }
        })
        .collect();
    EpisodeTrace {
        episode_id: "random".into(),
        tokens,
        frames,
        layer_count: 32,
        head_count: 32,
        stored_heads: heads.to_vec(),
        records,
        reference_path: None,
    }
}

fn entropy_oracle(m: &AttentionMatrix) -> f64 {
    let mut acc = 0.0;
    for k in 0..m.rows() {
        let row = m.row(k);
        let total: f64 = row.iter().map(|&v| v as f64).sum();
        let mut h = 0.0;
        for &v in row {
            if v > 0.0 {
                let q = v as f64 / total;
                h -= q * q.ln();
            }
        }
        acc += (h / (row.len() as f64).ln()).clamp(0.0, 1.0);
    }
    acc / m.rows() as f64
}

/// E_t recomputed from scratch.
pub fn step_entropy_oracle(rec: &AttentionRecord, heads: &[HeadId]) -> f64 {
    heads.iter().map(|h| entropy_oracle(&rec.heads[h])).sum::<f64>() / heads.len() as f64
}

/// Ratio and decision at the last step of `e`, recomputed from the whole prefix.
pub fn detector_prefix_oracle(e: &[f64], w: usize, p: usize, tau: f64, eps: f64) -> (Option<f64>, PhaseLabel) {
    let ratio_at = |t: usize| -> Option<f64> {
        (t >= w).then(|| {
            let mut s = 0.0;
            for v in &e[t - w..t] {
                s += v;
            }
            e[t] / (s / w as f64 + eps)
        })
    };
    let mut latched = false;
    for end in 0..e.len() {
        // longest run of exceedances ending at `end`
        let mut run = 0;
        let mut t = end as isize;
        while t >= 0 && ratio_at(t as usize).is_some_and(|r| r > tau) {
            run += 1;
            t -= 1;
        }
        latched |= run >= p;
    }
    (ratio_at(e.len() - 1), if latched { PhaseLabel::Anomaly } else { PhaseLabel::Normal })
}

// ---------------------------------------------------------------- costmap

fn get_or_zero(g: &Costmap, ix: i64, iy: i64) -> f64 {
    let n = GRID_SIZE as i64;
    if ix < 0 || iy < 0 || ix >= n || iy >= n {
        0.0
    } else {
        g.get(ix as usize, iy as usize)
    }
}

/// Per-cell inverse transform in metres followed by a bilinear read.
pub fn warp_oracle(g: &Costmap, dx: f64, dy: f64, dtheta: f64) -> Costmap {
    let half = (GRID_SIZE / 2) as f64;
    // new-frame point -> old-frame point: p_old = R(dtheta) p_new + t
    let m = [[dtheta.cos(), -dtheta.sin(), dx], [dtheta.sin(), dtheta.cos(), dy]];
    let mut out = vec![0.0; GRID_SIZE * GRID_SIZE];
    for iy in 0..GRID_SIZE {
        for ix in 0..GRID_SIZE {
            let (x, y) = ((ix as f64 - half) * RESOLUTION, (iy as f64 - half) * RESOLUTION);
            let ox = m[0][0] * x + m[0][1] * y + m[0][2];
            let oy = m[1][0] * x + m[1][1] * y + m[1][2];
            let (u, v) = (ox / RESOLUTION + half, oy / RESOLUTION + half);
            let (u0, v0) = (u.floor() as i64, v.floor() as i64);
            let (fu, fv) = (u - u0 as f64, v - v0 as f64);
            out[iy * GRID_SIZE + ix] = get_or_zero(g, u0, v0) * (1.0 - fu) * (1.0 - fv)
                + get_or_zero(g, u0 + 1, v0) * fu * (1.0 - fv)
                + get_or_zero(g, u0, v0 + 1) * (1.0 - fu) * fv
                + get_or_zero(g, u0 + 1, v0 + 1) * fu * fv;
        }
    }
    Costmap::from_cells(out)
}

/// Direct 3x3 window maximum over in-bounds cells.
pub fn inflate_oracle(g: &Costmap) -> Costmap {
    let n = GRID_SIZE as i64;
    let mut out = vec![0.0; GRID_SIZE * GRID_SIZE];
    for iy in 0..n {
        for ix in 0..n {
            let mut m = f64::NEG_INFINITY;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (x, y) = (ix + dx, iy + dy);
                    if x >= 0 && y >= 0 && x < n && y < n {
                        m = m.max(g.get(x as usize, y as usize));
                    }
                }
            }
            out[(iy * n + ix) as usize] = m;
        }
    }
    Costmap::from_cells(out)
}

pub fn random_costmap(r: &mut impl Rng, density: f64) -> Costmap {
    Costmap::from_cells(
        (0..GRID_SIZE * GRID_SIZE).map(|_| if r.random_bool(density) { r.random_range(0.0..1.0) } else { 0.0 }).collect(),
    )
}
