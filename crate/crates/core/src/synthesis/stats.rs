use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::corpus::{anchor_frame, to_anchor_frame};
use crate::error::{Error, Result};
use crate::scene::{wrap_angle, SceneMatrix};
use crate::topview::ViewWindow;

/// Normalized `grid × grid` histogram, row-major with row 0 at the top
/// (largest `y`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub grid: usize,
    pub values: Vec<f64>,
    /// Number of samples binned; 0 means the map is all zero.
    pub count: usize,
}

impl Heatmap {
    fn accumulate(grid: usize, points: &[[f64; 2]], center: [f64; 2], half: f64) -> Self {
        let mut values = vec![0.0; grid * grid];
        let cell = 2.0 * half / grid as f64;
        let bin = |v: f64| -> usize { (v / cell).floor().clamp(0.0, (grid - 1) as f64) as usize };
        for p in points {
            let col = bin(p[0] - (center[0] - half));
            let row = bin((center[1] + half) - p[1]);
            values[row * grid + col] += 1.0;
        }
        if !points.is_empty() {
            let inv = 1.0 / points.len() as f64;
            values.iter_mut().for_each(|v| *v *= inv);
        }
        Self {
            grid,
            values,
            count: points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < 8 {
        return Err(Error::InvalidInput(format!("heatmap grid must be at least 8, got {grid}")));
    }
    Ok(())
}

/// Distribution of the ground-plane centers of one category over `window`.
/// Points outside the window fall into the nearest border cell.
pub fn absolute_heatmap(scenes: &[SceneMatrix], category: usize, window: &ViewWindow, grid: usize) -> Result<Heatmap> {
    check_grid(grid)?;
    let mut points = Vec::new();
    for s in scenes {
        if category >= s.config.num_categories() {
            return Err(Error::InvalidInput(format!("category index {category} out of range")));
        }
        for c in s.block(category).iter().filter(|c| c.exists()) {
            points.push([c.center[0], c.center[1]]);
        }
    }
    Ok(Heatmap::accumulate(grid, &points, window.center, window.half_extent))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStatsSpec {
    pub anchor: usize,
    pub second: usize,
    pub grid: usize,
    /// Half side of the square heatmap region in the anchor frame, meters.
    pub extent: f64,
}

/// Relative headings in four quarter bins: same orientation, turned left,
/// opposite, turned right.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AngleHistogram {
    pub bins: [f64; 4],
}

impl AngleHistogram {
    /// Bin of `wrap(θ_second − θ_anchor)`; bin 0 is centered on 0.
    pub fn bin_of(delta: f64) -> usize {
        let a = wrap_angle(delta + FRAC_PI_4).rem_euclid(2.0 * PI);
        ((a / (PI / 2.0)).floor() as usize).min(3)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub heatmap: Heatmap,
    pub angles: AngleHistogram,
    pub pairs: usize,
}

/// Per scene, the closest anchor/second pair expressed in the anchor frame:
/// origin at the midpoint of the anchor's front edge, `+y` along its front.
/// Scenes lacking either category are skipped.
pub fn pair_stats(scenes: &[SceneMatrix], spec: &PairStatsSpec) -> Result<PairStats> {
    check_grid(spec.grid)?;
    if !(spec.extent > 0.0) {
        return Err(Error::InvalidInput(format!("pair extent must be positive, got {}", spec.extent)));
    }
    let mut points = Vec::new();
    let mut bins = [0.0; 4];
    for s in scenes {
        let k = s.config.num_categories();
        if spec.anchor >= k || spec.second >= k {
            return Err(Error::InvalidInput("pair category index out of range".into()));
        }
        let mut best: Option<(f64, usize, usize)> = None;
        let anchors = s.config.block_range(spec.anchor);
        let seconds = s.config.block_range(spec.second);
        for a in anchors.filter(|&a| s.columns[a].exists()) {
            for b in seconds.clone().filter(|&b| b != a && s.columns[b].exists()) {
                let (ca, cb) = (&s.columns[a].center, &s.columns[b].center);
                let d = (ca[0] - cb[0]).hypot(ca[1] - cb[1]);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else { continue };
        let (ca, cb) = (&s.columns[a], &s.columns[b]);
        let (origin, _, front) = anchor_frame([ca.center[0], ca.center[1]], ca.front, ca.size[0]);
        points.push(to_anchor_frame([cb.center[0], cb.center[1]], origin, front));
        bins[AngleHistogram::bin_of(cb.heading() - ca.heading())] += 1.0;
    }
    let n = points.len();
    if n > 0 {
        bins.iter_mut().for_each(|v| *v /= n as f64);
    }
    Ok(PairStats {
        heatmap: Heatmap::accumulate(spec.grid, &points, [0.0, 0.0], spec.extent),
        angles: AngleHistogram { bins },
        pairs: n,
    })
}

/// Total-variation distance `½ Σ |h1 − h2|`.
pub fn distribution_distance(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::Shape {
            expected: h1.len(),
            actual: h2.len(),
        });
    }
    Ok(0.5 * h1.iter().zip(h2).map(|(a, b)| (a - b).abs()).sum::<f64>())
}
