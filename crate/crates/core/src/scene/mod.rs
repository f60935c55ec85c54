//! Matrix encoding of object arrangements.
//!
//! A scene is a `(d + 9) × n_o` matrix whose columns are object slots grouped
//! into one block per category. Row layout of a column:
//!
//! | rows        | content                                  |
//! |-------------|------------------------------------------|
//! | 0           | existence tag                            |
//! | 1..4        | bounding-box center `(x, y, z)`           |
//! | 4..6        | front direction in the ground plane       |
//! | 6..9        | size along front, side and up             |
//! | 9..9+d      | shape descriptor                          |

mod assignment;
mod distance;
mod json;
mod motion;
mod permutation;
mod procrustes;

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use assignment::{solve_assignment, Assignment};
pub use distance::{frobenius_sq, scene_distance, SceneDistance, DEFAULT_RESTARTS};
pub use json::{read_corpus_jsonl, read_scene_json, write_corpus_jsonl, write_scene_json};
pub use motion::{apply_motion, rotate2, wrap_angle, RigidMotion};
pub use permutation::{apply_permutation, PermutationSet};
pub use procrustes::{existence_weights, solve_procrustes, translation_for_rotation};

/// Columns at or above this existence value are treated as present.
pub const EXISTENCE_THRESHOLD: f64 = 0.5;
/// Number of non-descriptor rows.
pub const GEOMETRY_ROWS: usize = 9;
pub const ROW_EXISTENCE: usize = 0;
pub const ROW_CENTER: usize = 1;
pub const ROW_FRONT: usize = 4;
pub const ROW_SIZE: usize = 6;
pub const ROW_DESCRIPTOR: usize = 9;

const MIN_SIZE: f64 = 1e-4;
const MIN_FRONT_NORM: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub max_multiplicity: usize,
    pub class_constant: f64,
}

/// Category vocabulary, per-category slot counts and descriptor length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryConfig {
    pub categories: Vec<Category>,
    pub descriptor_dim: usize,
}

impl CategoryConfig {
    pub fn new(categories: Vec<Category>, descriptor_dim: usize) -> Result<Self> {
        let config = Self {
            categories,
            descriptor_dim,
        };
        config.validate()?;
        Ok(config)
    }

    /// Every category gets `max_multiplicity` slots and its 1-based index as
    /// class constant.
    pub fn uniform<S: AsRef<str>>(
        names: &[S],
        max_multiplicity: usize,
        descriptor_dim: usize,
    ) -> Result<Self> {
        let categories = names
            .iter()
            .enumerate()
            .map(|(k, name)| Category {
                name: name.as_ref().to_string(),
                max_multiplicity,
                class_constant: (k + 1) as f64,
            })
            .collect();
        Self::new(categories, descriptor_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::Config("at least one category is required".into()));
        }
        let mut constants = Vec::with_capacity(self.categories.len());
        for c in &self.categories {
            if c.max_multiplicity == 0 {
                return Err(Error::Config(format!(
                    "category `{}` has zero multiplicity",
                    c.name
                )));
            }
            if !(c.class_constant.is_finite() && c.class_constant > 0.0) {
                return Err(Error::Config(format!(
                    "category `{}` has non-positive class constant",
                    c.name
                )));
            }
            if constants.contains(&c.class_constant) {
                return Err(Error::Config(format!(
                    "class constant of `{}` is not distinct",
                    c.name
                )));
            }
            constants.push(c.class_constant);
        }
        Ok(())
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    /// Total slot count `n_o`.
    pub fn num_objects(&self) -> usize {
        self.categories.iter().map(|c| c.max_multiplicity).sum()
    }

    /// Length of one column, `d + 9`.
    pub fn rows(&self) -> usize {
        GEOMETRY_ROWS + self.descriptor_dim
    }

    /// Length of the flattened matrix.
    pub fn flat_len(&self) -> usize {
        self.rows() * self.num_objects()
    }

    pub fn block_range(&self, k: usize) -> Range<usize> {
        let start: usize = self.categories[..k].iter().map(|c| c.max_multiplicity).sum();
        start..start + self.categories[k].max_multiplicity
    }

    /// Category index of every column.
    pub fn column_categories(&self) -> Vec<usize> {
        self.categories
            .iter()
            .enumerate()
            .flat_map(|(k, c)| std::iter::repeat_n(k, c.max_multiplicity))
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c.name == name)
    }
}

/// One object slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectColumn {
    pub existence: f64,
    pub center: [f64; 3],
    pub front: [f64; 2],
    pub size: [f64; 3],
    pub descriptor: Vec<f64>,
}

impl ObjectColumn {
    pub fn absent(descriptor_dim: usize) -> Self {
        Self {
            existence: 0.0,
            center: [0.0; 3],
            front: [0.0; 2],
            size: [0.0; 3],
            descriptor: vec![0.0; descriptor_dim],
        }
    }

    pub fn exists(&self) -> bool {
        self.existence >= EXISTENCE_THRESHOLD
    }

    /// Heading angle of the front vector.
    pub fn heading(&self) -> f64 {
        self.front[1].atan2(self.front[0])
    }

    fn write_flat(&self, out: &mut [f64]) {
        out[ROW_EXISTENCE] = self.existence;
        out[ROW_CENTER..ROW_CENTER + 3].copy_from_slice(&self.center);
        out[ROW_FRONT..ROW_FRONT + 2].copy_from_slice(&self.front);
        out[ROW_SIZE..ROW_SIZE + 3].copy_from_slice(&self.size);
        out[ROW_DESCRIPTOR..].copy_from_slice(&self.descriptor);
    }

    fn from_flat(v: &[f64]) -> Self {
        Self {
            existence: v[ROW_EXISTENCE],
            center: [v[1], v[2], v[3]],
            front: [v[4], v[5]],
            size: [v[6], v[7], v[8]],
            descriptor: v[ROW_DESCRIPTOR..].to_vec(),
        }
    }

    fn squared_distance(&self, other: &ObjectColumn) -> f64 {
        let mut s = (self.existence - other.existence).powi(2);
        for i in 0..3 {
            s += (self.center[i] - other.center[i]).powi(2);
            s += (self.size[i] - other.size[i]).powi(2);
        }
        for i in 0..2 {
            s += (self.front[i] - other.front[i]).powi(2);
        }
        for (a, b) in self.descriptor.iter().zip(&other.descriptor) {
            s += (a - b).powi(2);
        }
        s
    }
}

/// Column-block encoding of one scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMatrix {
    pub config: Arc<CategoryConfig>,
    pub columns: Vec<ObjectColumn>,
}

impl SceneMatrix {
    /// Scene with every slot absent.
    pub fn empty(config: Arc<CategoryConfig>) -> Self {
        let columns = (0..config.num_objects())
            .map(|_| ObjectColumn::absent(config.descriptor_dim))
            .collect();
        Self { config, columns }
    }

    pub fn new(config: Arc<CategoryConfig>, columns: Vec<ObjectColumn>) -> Result<Self> {
        let scene = Self { config, columns };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.config.num_objects();
        if self.columns.len() != n {
            return Err(Error::Shape {
                expected: n,
                actual: self.columns.len(),
            });
        }
        let d = self.config.descriptor_dim;
        if let Some(c) = self.columns.iter().find(|c| c.descriptor.len() != d) {
            return Err(Error::Shape {
                expected: d,
                actual: c.descriptor.len(),
            });
        }
        Ok(())
    }

    pub fn from_flat(config: Arc<CategoryConfig>, flat: &[f64]) -> Result<Self> {
        if flat.len() != config.flat_len() {
            return Err(Error::Shape {
                expected: config.flat_len(),
                actual: flat.len(),
            });
        }
        let columns = flat.chunks(config.rows()).map(ObjectColumn::from_flat).collect();
        Ok(Self { config, columns })
    }

    /// Column-major flattening: column `j` occupies `j*(d+9)..(j+1)*(d+9)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let rows = self.config.rows();
        let mut out = vec![0.0; rows * self.columns.len()];
        for (col, chunk) in self.columns.iter().zip(out.chunks_mut(rows)) {
            col.write_flat(chunk);
        }
        out
    }

    pub fn block(&self, k: usize) -> &[ObjectColumn] {
        &self.columns[self.config.block_range(k)]
    }

    pub fn same_config(&self, other: &SceneMatrix) -> bool {
        Arc::ptr_eq(&self.config, &other.config) || self.config == other.config
    }

    pub(crate) fn check_config(&self, other: &SceneMatrix) -> Result<()> {
        if self.same_config(other) {
            Ok(())
        } else {
            Err(Error::Config("scenes use different category configurations".into()))
        }
    }

    /// Number of present objects per category.
    pub fn category_counts(&self) -> Vec<usize> {
        (0..self.config.num_categories())
            .map(|k| self.block(k).iter().filter(|c| c.exists()).count())
            .collect()
    }

    pub fn num_existing(&self) -> usize {
        self.columns.iter().filter(|c| c.exists()).count()
    }

    /// Repairs a latent or generated scene for geometric use.
    ///
    /// Existence is snapped at 0.5, fronts are renormalized (falling back to
    /// `(1, 0)`), sizes are clamped to at least 0.1 mm and absent columns are
    /// zeroed.
    pub fn canonicalize(&self) -> SceneMatrix {
        let d = self.config.descriptor_dim;
        let columns = self
            .columns
            .iter()
            .map(|c| {
                if !c.exists() {
                    return ObjectColumn::absent(d);
                }
                let norm = c.front[0].hypot(c.front[1]);
                let front = if norm < MIN_FRONT_NORM {
                    [1.0, 0.0]
                } else if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
                    c.front
                } else {
                    [c.front[0] / norm, c.front[1] / norm]
                };
                ObjectColumn {
                    existence: 1.0,
                    center: c.center,
                    front,
                    size: c.size.map(|s| s.max(MIN_SIZE)),
                    descriptor: c.descriptor.clone(),
                }
            })
            .collect();
        SceneMatrix {
            config: self.config.clone(),
            columns,
        }
    }
}

/// Repairs a scene for geometric use; see [`SceneMatrix::canonicalize`].
pub fn canonicalize(scene: &SceneMatrix) -> SceneMatrix {
    scene.canonicalize()
}

/// Squared Euclidean distance between two columns over all rows.
pub fn column_distance_sq(a: &ObjectColumn, b: &ObjectColumn) -> f64 {
    a.squared_distance(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> Arc<CategoryConfig> {
        Arc::new(CategoryConfig::uniform(&["bed", "stand", "lamp"], 2, 3).unwrap())
    }

    #[test]
    fn block_boundaries_are_prefix_sums() {
        let cfg = CategoryConfig::new(
            vec![
                Category { name: "a".into(), max_multiplicity: 1, class_constant: 1.0 },
                Category { name: "b".into(), max_multiplicity: 3, class_constant: 2.0 },
                Category { name: "c".into(), max_multiplicity: 2, class_constant: 3.0 },
            ],
            0,
        )
        .unwrap();
        assert_eq!(cfg.num_objects(), 6);
        assert_eq!(cfg.block_range(0), 0..1);
        assert_eq!(cfg.block_range(1), 1..4);
        assert_eq!(cfg.block_range(2), 4..6);
        assert_eq!(cfg.column_categories(), vec![0, 1, 1, 1, 2, 2]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(CategoryConfig::uniform::<&str>(&[], 4, 0).is_err());
        assert!(CategoryConfig::uniform(&["a"], 0, 0).is_err());
        let dup = vec![
            Category { name: "a".into(), max_multiplicity: 1, class_constant: 1.0 },
            Category { name: "b".into(), max_multiplicity: 1, class_constant: 1.0 },
        ];
        assert!(CategoryConfig::new(dup, 0).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let cfg = config();
        let flat: Vec<f64> = (0..cfg.flat_len()).map(|i| i as f64 * 0.25 - 3.0).collect();
        let scene = SceneMatrix::from_flat(cfg, &flat).unwrap();
        assert_eq!(scene.to_flat(), flat);
        assert_eq!(scene.columns[1].existence, flat[12]);
        assert_eq!(scene.columns[1].descriptor[2], flat[12 + 11]);
    }

    #[test]
    fn canonicalize_normalizes_front() {
        let cfg = config();
        let mut scene = SceneMatrix::empty(cfg);
        scene.columns[0] = ObjectColumn {
            existence: 1.0,
            center: [1.0, 2.0, 0.5],
            front: [3.0, 4.0],
            size: [1.0, 2.0, 0.5],
            descriptor: vec![0.1, 0.2, 0.3],
        };
        let c = scene.canonicalize();
        assert_eq!(c.columns[0].front, [0.6, 0.8]);
        assert_eq!(c.columns[0].center, [1.0, 2.0, 0.5]);
    }

    #[test]
    fn canonicalize_thresholds_existence() {
        let cfg = config();
        let mut scene = SceneMatrix::empty(cfg);
        scene.columns[0].existence = 0.49;
        scene.columns[0].center = [5.0, 5.0, 5.0];
        scene.columns[1].existence = 0.51;
        scene.columns[1].front = [0.0, 0.0];
        scene.columns[1].size = [-1.0, 0.5, 0.0];
        let c = scene.canonicalize();
        assert_eq!(c.columns[0], ObjectColumn::absent(3));
        assert_eq!(c.columns[1].existence, 1.0);
        assert_eq!(c.columns[1].front, [1.0, 0.0]);
        assert_eq!(c.columns[1].size, [1e-4, 0.5, 1e-4]);
    }

    #[test]
    fn canonicalize_keeps_valid_scene() {
        let cfg = config();
        let mut scene = SceneMatrix::empty(cfg);
        scene.columns[2] = ObjectColumn {
            existence: 1.0,
            center: [0.3, -0.2, 0.4],
            front: [0.0, 1.0],
            size: [0.5, 0.5, 0.6],
            descriptor: vec![1.0, 2.0, 3.0],
        };
        scene.columns[3].center = [9.0, 9.0, 9.0];
        let c = scene.canonicalize();
        assert_eq!(c.columns[2], scene.columns[2]);
        assert_eq!(c.columns[3], ObjectColumn::absent(3));
    }
}
