//! Robot-centred occupancy costmap.
//!
//! Cell `(ix, iy)` covers the point `((ix - 64) * res, (iy - 64) * res)` in
//! the robot frame (x forward, y left); storage is row-major with `iy` as the
//! row.

use serde::{Deserialize, Serialize};

pub const GRID_SIZE: usize = 128;
pub const RESOLUTION: f64 = 0.05;
pub const CENTER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostmapConfig {
    pub z_min: f64,
    pub z_max: f64,
    /// Half extents of the self-mask footprint.
    pub self_half_length: f64,
    pub self_half_width: f64,
    pub decay: f64,
}

impl Default for CostmapConfig {
    fn default() -> Self {
        CostmapConfig { z_min: 0.1, z_max: 1.0, self_half_length: 0.55, self_half_width: 0.40, decay: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Costmap {
    cells: Vec<f64>,
}

impl Default for Costmap {
    fn default() -> Self {
        Self::new()
    }
}

impl Costmap {
    pub fn new() -> Self {
        Costmap { cells: vec![0.0; GRID_SIZE * GRID_SIZE] }
    }

    pub fn from_cells(cells: Vec<f64>) -> Self {
        assert_eq!(cells.len(), GRID_SIZE * GRID_SIZE, "costmap needs {GRID_SIZE}x{GRID_SIZE} cells");
        Costmap { cells }
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.cells[iy * GRID_SIZE + ix]
    }

    pub fn set(&mut self, ix: usize, iy: usize, value: f64) {
        self.cells[iy * GRID_SIZE + ix] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.cells
    }

    /// Cell containing robot-frame point `(x, y)`, if on the grid.
    pub fn cell_of(x: f64, y: f64) -> Option<(usize, usize)> {
        let ix = (x / RESOLUTION).round() + CENTER as f64;
        let iy = (y / RESOLUTION).round() + CENTER as f64;
        let range = 0.0..GRID_SIZE as f64;
        (range.contains(&ix) && range.contains(&iy)).then_some((ix as usize, iy as usize))
    }

    pub fn cell_center(ix: usize, iy: usize) -> (f64, f64) {
        ((ix as f64 - CENTER as f64) * RESOLUTION, (iy as f64 - CENTER as f64) * RESOLUTION)
    }

    /// Rasterises robot-frame points that pass the height band and lie
    /// outside the self footprint. Returns how many cells were written.
    pub fn ingest(&mut self, points: &[[f64; 3]], cfg: &CostmapConfig) -> usize {
        let mut written = 0;
        for &[x, y, z] in points {
            if z < cfg.z_min || z > cfg.z_max {
                continue;
            }
            if x.abs() <= cfg.self_half_length && y.abs() <= cfg.self_half_width {
                continue;
            }
            if let Some((ix, iy)) = Self::cell_of(x, y) {
                self.set(ix, iy, 1.0);
                written += 1;
            }
        }
        written
    }

    /// Bilinear sample at fractional cell coordinates; taps off the grid read 0.
    pub fn sample(&self, fx: f64, fy: f64) -> f64 {
        let (x0, y0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - x0, fy - y0);
        let tap = |x: f64, y: f64| -> f64 {
            if x < 0.0 || y < 0.0 || x >= GRID_SIZE as f64 || y >= GRID_SIZE as f64 {
                0.0
            } else {
                self.get(x as usize, y as usize)
            }
        };
        let top = tap(x0, y0) * (1.0 - tx) + tap(x0 + 1.0, y0) * tx;
        let bottom = tap(x0, y0 + 1.0) * (1.0 - tx) + tap(x0 + 1.0, y0 + 1.0) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    /// Re-expresses the grid in the frame reached after moving by
    /// `(dx, dy, dtheta)` in the current frame.
    pub fn warp(&self, dx: f64, dy: f64, dtheta: f64) -> Costmap {
        let (s, c) = dtheta.sin_cos();
        let (tx, ty) = (dx / RESOLUTION, dy / RESOLUTION);
        let mut out = Costmap::new();
        for iy in 0..GRID_SIZE {
            let py = iy as f64 - CENTER as f64;
            for ix in 0..GRID_SIZE {
                let px = ix as f64 - CENTER as f64;
                let ox = c * px - s * py + tx + CENTER as f64;
                let oy = s * px + c * py + ty + CENTER as f64;
                out.cells[iy * GRID_SIZE + ix] = self.sample(ox, oy);
            }
        }
        out
    }

    pub fn decay(&mut self, gamma: f64) {
        for v in &mut self.cells {
            *v *= gamma;
        }
    }

    /// 3x3 sliding maximum; edge cells use their in-bounds neighbours.
    pub fn inflate(&self) -> Costmap {
        let n = GRID_SIZE;
        let mut rows = vec![0.0; n * n];
        for iy in 0..n {
            let r = &self.cells[iy * n..(iy + 1) * n];
            for ix in 0..n {
                let lo = ix.saturating_sub(1);
                let hi = (ix + 1).min(n - 1);
                rows[iy * n + ix] = r[lo..=hi].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
        }
        let mut out = vec![0.0; n * n];
        for iy in 0..n {
            let lo = iy.saturating_sub(1);
            let hi = (iy + 1).min(n - 1);
            for ix in 0..n {
                out[iy * n + ix] = (lo..=hi).map(|y| rows[y * n + ix]).fold(f64::NEG_INFINITY, f64::max);
            }
        }
        Costmap { cells: out }
    }

    /// Binary PGM with 255 for occupied; the top row is the far +y edge.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{GRID_SIZE} {GRID_SIZE}\n255\n").into_bytes();
        for iy in (0..GRID_SIZE).rev() {
            for ix in 0..GRID_SIZE {
                out.push((self.get(ix, iy).clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }
}
