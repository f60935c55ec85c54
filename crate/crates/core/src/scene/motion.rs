use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SceneMatrix;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x - 2.0 * PI
    } else {
        x
    }
}

pub fn rotate2(theta: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Rotation about the vertical axis followed by a 3D translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidMotion {
    pub theta: f64,
    pub t: [f64; 3],
}

impl Default for RigidMotion {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self {
            theta: 0.0,
            t: [0.0; 3],
        }
    }

    pub fn new(theta: f64, t: [f64; 3]) -> Self {
        Self {
            theta: wrap_angle(theta),
            t,
        }
    }

    pub fn apply_point(&self, p: [f64; 3]) -> [f64; 3] {
        let [x, y] = rotate2(self.theta, [p[0], p[1]]);
        [x + self.t[0], y + self.t[1], p[2] + self.t[2]]
    }

    pub fn apply_direction(&self, v: [f64; 2]) -> [f64; 2] {
        rotate2(self.theta, v)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidMotion) -> RigidMotion {
        let [x, y] = rotate2(self.theta, [other.t[0], other.t[1]]);
        RigidMotion::new(
            self.theta + other.theta,
            [x + self.t[0], y + self.t[1], other.t[2] + self.t[2]],
        )
    }

    pub fn inverse(&self) -> RigidMotion {
        let [x, y] = rotate2(-self.theta, [self.t[0], self.t[1]]);
        RigidMotion::new(-self.theta, [-x, -y, -self.t[2]])
    }
}

/// Moves every column: centers are rotated then translated, fronts rotated.
pub fn apply_motion(scene: &SceneMatrix, motion: &RigidMotion) -> SceneMatrix {
    let mut out = scene.clone();
    for col in &mut out.columns {
        col.center = motion.apply_point(col.center);
        col.front = motion.apply_direction(col.front);
    }
    out
}
