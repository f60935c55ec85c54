//! Differentiable top-view projection.
//!
//! Each present object is flattened to its oriented footprint rectangle in the
//! ground plane. The image is the class-weighted sum of the footprints'
//! truncated signed distance fields, sampled at pixel centers.

mod render;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{CategoryConfig, ObjectColumn, SceneMatrix, EXISTENCE_THRESHOLD, ROW_CENTER, ROW_FRONT, ROW_SIZE};

pub use render::{render_svg, write_pgm, write_pgm_values};

pub const DEFAULT_RESOLUTION: usize = 128;
pub const DEFAULT_DELTA: f64 = 0.5;
const MIN_HALF_SIZE: f64 = 0.5e-4;
const MIN_FRONT_NORM: f64 = 1e-8;

/// Square world window sampled on an `r × r` pixel grid.
///
/// Row 0 is the top (largest `y`); column 0 is the left (smallest `x`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewWindow {
    pub center: [f64; 2],
    pub half_extent: f64,
    pub resolution: usize,
}

impl ViewWindow {
    pub fn new(center: [f64; 2], half_extent: f64, resolution: usize) -> Result<Self> {
        let w = Self {
            center,
            half_extent,
            resolution,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_extent.is_finite() && self.half_extent > 0.0) {
            return Err(Error::InvalidInput(format!(
                "window half extent must be positive, got {}",
                self.half_extent
            )));
        }
        if self.resolution < 8 {
            return Err(Error::InvalidInput(format!(
                "window resolution must be at least 8, got {}",
                self.resolution
            )));
        }
        Ok(())
    }

    pub fn pixel_size(&self) -> f64 {
        2.0 * self.half_extent / self.resolution as f64
    }

    pub fn pixel_center(&self, row: usize, col: usize) -> [f64; 2] {
        let s = self.pixel_size();
        [
            self.center[0] - self.half_extent + (col as f64 + 0.5) * s,
            self.center[1] + self.half_extent - (row as f64 + 0.5) * s,
        ]
    }

    /// Fractional `(row, col)` of a world point; pixel centers are integral.
    pub fn to_pixel(&self, p: [f64; 2]) -> (f64, f64) {
        let s = self.pixel_size();
        (
            (self.center[1] + self.half_extent - p[1]) / s - 0.5,
            (p[0] - (self.center[0] - self.half_extent)) / s - 0.5,
        )
    }

    /// Window centered at the mean object center whose half extent is 1.1×
    /// the 99th-percentile radius of object centers around that mean.
    pub fn fit<'a>(scenes: impl IntoIterator<Item = &'a SceneMatrix>, resolution: usize) -> Result<Self> {
        let centers: Vec<[f64; 2]> = scenes
            .into_iter()
            .flat_map(|s| s.columns.iter().filter(|c| c.exists()).map(|c| [c.center[0], c.center[1]]))
            .collect();
        if centers.is_empty() {
            return Self::new([0.0, 0.0], 1.0, resolution);
        }
        let n = centers.len() as f64;
        let mean = [
            centers.iter().map(|c| c[0]).sum::<f64>() / n,
            centers.iter().map(|c| c[1]).sum::<f64>() / n,
        ];
        let mut radii: Vec<f64> = centers
            .iter()
            .map(|c| (c[0] - mean[0]).hypot(c[1] - mean[1]))
            .collect();
        radii.sort_by(f64::total_cmp);
        let rank = ((0.99 * radii.len() as f64).ceil() as usize).clamp(1, radii.len());
        let r99 = radii[rank - 1];
        let half = if r99 > 0.0 { 1.1 * r99 } else { 1.0 };
        Self::new(mean, half, resolution)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    /// Truncation band half-width in meters.
    pub delta: f64,
    /// Use `-delta` deep inside footprints instead of 0.
    pub fill_interior: bool,
    /// Divide class constants by the number of categories.
    pub normalize_class_constants: bool,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            fill_interior: false,
            normalize_class_constants: false,
        }
    }
}

impl ProjectionConfig {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    pub fn class_constants(&self, config: &CategoryConfig) -> Vec<f64> {
        let scale = if self.normalize_class_constants {
            1.0 / config.num_categories() as f64
        } else {
            1.0
        };
        config.categories.iter().map(|c| c.class_constant * scale).collect()
    }
}

/// `r × r` image, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopView {
    pub values: Vec<f64>,
    pub window: ViewWindow,
}

impl TopView {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.window.resolution + col]
    }
}

/// Oriented rectangle in the ground plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FootprintBox {
    pub center2d: [f64; 2],
    pub front: [f64; 2],
    /// Half extents along the front and side directions.
    pub half_sizes: [f64; 2],
}

impl FootprintBox {
    /// Footprint of a column, repairing non-unit fronts and tiny sizes.
    pub fn of(col: &ObjectColumn) -> Self {
        footprint_parts(col).0
    }
}

/// Footprint plus what is needed to chain gradients back to the raw column:
/// the front norm (0 if the front was replaced) and whether each half size was
/// clamped.
fn footprint_parts(col: &ObjectColumn) -> (FootprintBox, f64, [bool; 2]) {
    let norm = col.front[0].hypot(col.front[1]);
    let (front, norm) = if norm < MIN_FRONT_NORM {
        ([1.0, 0.0], 0.0)
    } else {
        ([col.front[0] / norm, col.front[1] / norm], norm)
    };
    let raw = [0.5 * col.size[0], 0.5 * col.size[1]];
    let clamped = [raw[0] < MIN_HALF_SIZE, raw[1] < MIN_HALF_SIZE];
    let half_sizes = [raw[0].max(MIN_HALF_SIZE), raw[1].max(MIN_HALF_SIZE)];
    (
        FootprintBox {
            center2d: [col.center[0], col.center[1]],
            front,
            half_sizes,
        },
        norm,
        clamped,
    )
}

/// Signed distance to the rectangle boundary: negative inside.
fn signed_distance(p: [f64; 2], b: &FootprintBox) -> (f64, Local) {
    let d = [p[0] - b.center2d[0], p[1] - b.center2d[1]];
    let f = b.front;
    let q = [d[0] * f[0] + d[1] * f[1], -d[0] * f[1] + d[1] * f[0]];
    let e = [q[0].abs() - b.half_sizes[0], q[1].abs() - b.half_sizes[1]];
    let outside = e[0].max(0.0).hypot(e[1].max(0.0));
    let inside = e[0].max(e[1]).min(0.0);
    (outside + inside, Local { d, q, e })
}

struct Local {
    d: [f64; 2],
    q: [f64; 2],
    e: [f64; 2],
}

fn truncate(dist: f64, delta: f64, fill_interior: bool) -> f64 {
    if dist.abs() <= delta {
        dist
    } else if fill_interior && dist < 0.0 {
        -delta
    } else {
        0.0
    }
}

/// Truncated signed distance of `p` to the footprint boundary.
pub fn box_tsdf(p: [f64; 2], b: &FootprintBox, delta: f64) -> f64 {
    truncate(signed_distance(p, b).0, delta, false)
}

/// Partial derivatives of the truncated distance at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct PointGrad {
    center: [f64; 2],
    front_unit: [f64; 2],
    half_sizes: [f64; 2],
}

fn tsdf_grad(p: [f64; 2], b: &FootprintBox, delta: f64) -> Option<PointGrad> {
    let (dist, Local { d, q, e }) = signed_distance(p, b);
    if dist.abs() > delta {
        return None;
    }
    // ∂dist/∂e per region.
    let ge = if e[0] > 0.0 && e[1] > 0.0 {
        let n = e[0].hypot(e[1]);
        [e[0] / n, e[1] / n]
    } else if e[0] > 0.0 {
        [1.0, 0.0]
    } else if e[1] > 0.0 {
        [0.0, 1.0]
    } else if e[0] >= e[1] {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let gq = [ge[0] * q[0].signum(), ge[1] * q[1].signum()];
    let f = b.front;
    let perp = [-f[1], f[0]];
    Some(PointGrad {
        center: [-(gq[0] * f[0] + gq[1] * perp[0]), -(gq[0] * f[1] + gq[1] * perp[1])],
        front_unit: [gq[0] * d[0] + gq[1] * d[1], gq[0] * d[1] - gq[1] * d[0]],
        half_sizes: [-ge[0], -ge[1]],
    })
}

/// Pixel index range touched by a footprint's band (and interior).
fn pixel_bounds(b: &FootprintBox, window: &ViewWindow, delta: f64) -> Option<(usize, usize, usize, usize)> {
    let reach = b.half_sizes[0].hypot(b.half_sizes[1]) + delta;
    let (r0, c0) = window.to_pixel([b.center2d[0] - reach, b.center2d[1] + reach]);
    let (r1, c1) = window.to_pixel([b.center2d[0] + reach, b.center2d[1] - reach]);
    let r = window.resolution as f64;
    if r1 < -1.0 || c1 < -1.0 || r0 > r || c0 > r || !(r0.is_finite() && c0.is_finite()) {
        return None;
    }
    let lo = |x: f64| x.floor().max(0.0) as usize;
    let hi = |x: f64| (x.ceil().max(0.0) as usize).min(window.resolution - 1);
    Some((lo(r0), hi(r1), lo(c0), hi(c1)))
}

fn for_each_present<'a>(
    config: &'a CategoryConfig,
    columns: impl Iterator<Item = &'a ObjectColumn> + 'a,
    pcfg: &ProjectionConfig,
) -> impl Iterator<Item = (usize, &'a ObjectColumn, f64)> + 'a {
    let constants = pcfg.class_constants(config);
    let cats = config.column_categories();
    columns
        .enumerate()
        .filter(|(_, c)| c.existence >= EXISTENCE_THRESHOLD)
        .map(move |(j, c)| (j, c, constants[cats[j]]))
}

/// Class-weighted sum of truncated signed distance images of present objects.
pub fn project(scene: &SceneMatrix, window: &ViewWindow, pcfg: &ProjectionConfig) -> TopView {
    let r = window.resolution;
    let mut values = vec![0.0; r * r];
    for (_, col, c) in for_each_present(&scene.config, scene.columns.iter(), pcfg) {
        let b = FootprintBox::of(col);
        let (rows, cols) = if pcfg.fill_interior {
            ((0, r - 1), (0, r - 1))
        } else {
            match pixel_bounds(&b, window, pcfg.delta) {
                Some((r0, r1, c0, c1)) => ((r0, r1), (c0, c1)),
                None => continue,
            }
        };
        for i in rows.0..=rows.1 {
            for j in cols.0..=cols.1 {
                let p = window.pixel_center(i, j);
                let v = truncate(signed_distance(p, &b).0, pcfg.delta, pcfg.fill_interior);
                values[i * r + j] += c * v;
            }
        }
    }
    TopView {
        values,
        window: *window,
    }
}

/// Gradient of a scalar image loss with respect to one object's footprint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectGrad {
    /// Column index in the scene matrix.
    pub column: usize,
    pub center2d: [f64; 2],
    /// With respect to the raw (possibly non-unit) front vector.
    pub front: [f64; 2],
    pub half_sizes: [f64; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProjectionGrad {
    pub objects: Vec<ObjectGrad>,
}

impl ProjectionGrad {
    /// Scatters into a gradient over the flattened scene matrix.
    pub fn to_flat(&self, config: &CategoryConfig) -> Vec<f64> {
        let mut out = vec![0.0; config.flat_len()];
        self.accumulate_flat(config, &mut out, 1.0);
        out
    }

    pub fn accumulate_flat(&self, config: &CategoryConfig, out: &mut [f64], scale: f64) {
        let rows = config.rows();
        for g in &self.objects {
            let base = g.column * rows;
            out[base + ROW_CENTER] += scale * g.center2d[0];
            out[base + ROW_CENTER + 1] += scale * g.center2d[1];
            out[base + ROW_FRONT] += scale * g.front[0];
            out[base + ROW_FRONT + 1] += scale * g.front[1];
            out[base + ROW_SIZE] += scale * 0.5 * g.half_sizes[0];
            out[base + ROW_SIZE + 1] += scale * 0.5 * g.half_sizes[1];
        }
    }
}

/// Backpropagates `L = Σ upstream[i,j] · P(M)[i,j]` to every present object.
///
/// Side-region pixels reproduce the line-distance derivatives
/// `∂d/∂o = −n`, `∂d/∂n = ((p−o)·n⊥) n⊥`, `∂d/∂s = −1`; corner-region pixels use
/// the Euclidean corner distance. Deep-interior and far pixels contribute 0,
/// as does a clamped size or a replaced degenerate front.
pub fn project_backward(
    scene: &SceneMatrix,
    window: &ViewWindow,
    pcfg: &ProjectionConfig,
    upstream: &[f64],
) -> Result<ProjectionGrad> {
    let r = window.resolution;
    if upstream.len() != r * r {
        return Err(Error::Shape {
            expected: r * r,
            actual: upstream.len(),
        });
    }
    if upstream.iter().any(|u| !u.is_finite()) {
        return Err(Error::NonFinite("projection upstream gradient".into()));
    }
    let mut objects = Vec::new();
    for (j_col, col, c) in for_each_present(&scene.config, scene.columns.iter(), pcfg) {
        let (b, norm, clamped) = footprint_parts(col);
        let mut acc = PointGrad::default();
        if let Some((r0, r1, c0, c1)) = pixel_bounds(&b, window, pcfg.delta) {
            for i in r0..=r1 {
                for j in c0..=c1 {
                    let u = upstream[i * r + j];
                    if u == 0.0 {
                        continue;
                    }
                    if let Some(g) = tsdf_grad(window.pixel_center(i, j), &b, pcfg.delta) {
                        let w = c * u;
                        for a in 0..2 {
                            acc.center[a] += w * g.center[a];
                            acc.front_unit[a] += w * g.front_unit[a];
                            acc.half_sizes[a] += w * g.half_sizes[a];
                        }
                    }
                }
            }
        }
        // Chain through f = u/‖u‖: (I − f fᵀ) g / ‖u‖.
        let front = if norm > 0.0 {
            let f = b.front;
            let dot = f[0] * acc.front_unit[0] + f[1] * acc.front_unit[1];
            [
                (acc.front_unit[0] - dot * f[0]) / norm,
                (acc.front_unit[1] - dot * f[1]) / norm,
            ]
        } else {
            [0.0, 0.0]
        };
        let half_sizes = [
            if clamped[0] { 0.0 } else { acc.half_sizes[0] },
            if clamped[1] { 0.0 } else { acc.half_sizes[1] },
        ];
        objects.push(ObjectGrad {
            column: j_col,
            center2d: acc.center,
            front,
            half_sizes,
        });
    }
    Ok(ProjectionGrad { objects })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> FootprintBox {
        FootprintBox {
            center2d: [0.0, 0.0],
            front: [1.0, 0.0],
            half_sizes: [1.0, 1.0],
        }
    }

    #[test]
    fn boundary_point_is_zero() {
        assert_eq!(box_tsdf([1.0, 0.3], &unit_box(), 0.5), 0.0);
        assert_eq!(box_tsdf([-0.2, -1.0], &unit_box(), 0.5), 0.0);
    }

    #[test]
    fn outside_within_band_is_positive() {
        let v = box_tsdf([1.2, 0.0], &unit_box(), 0.5);
        assert!((v - 0.2).abs() < 1e-15);
    }

    #[test]
    fn inside_within_band_is_negative() {
        let v = box_tsdf([0.7, 0.0], &unit_box(), 0.5);
        assert!((v + 0.3).abs() < 1e-15);
    }

    #[test]
    fn deep_interior_and_far_exterior_truncate() {
        assert_eq!(box_tsdf([0.0, 0.0], &unit_box(), 0.5), 0.0);
        assert_eq!(box_tsdf([3.0, 0.0], &unit_box(), 0.5), 0.0);
        assert_eq!(truncate(-0.9, 0.5, true), -0.5);
    }

    #[test]
    fn corner_distance_is_euclidean() {
        let v = box_tsdf([1.3, 1.4], &unit_box(), 1.0);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rotated_box_uses_local_frame() {
        let b = FootprintBox {
            center2d: [1.0, 1.0],
            front: [0.0, 1.0],
            half_sizes: [1.0, 0.25],
        };
        // Front axis is +y: extent 1 along y, 0.25 along x.
        assert!((box_tsdf([1.0, 2.1], &b, 0.5) - 0.1).abs() < 1e-15);
        assert!((box_tsdf([1.4, 1.0], &b, 0.5) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn window_pixel_mapping_round_trips() {
        let w = ViewWindow::new([1.0, -2.0], 3.0, 16).unwrap();
        let p = w.pixel_center(3, 11);
        let (i, j) = w.to_pixel(p);
        assert!((i - 3.0).abs() < 1e-12 && (j - 11.0).abs() < 1e-12);
        assert!(ViewWindow::new([0.0, 0.0], 1.0, 4).is_err());
        assert!(ViewWindow::new([0.0, 0.0], 0.0, 16).is_err());
    }
}
