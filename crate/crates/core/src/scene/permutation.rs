use serde::{Deserialize, Serialize};

use super::{CategoryConfig, SceneMatrix};
use crate::error::{Error, Result};

/// One slot permutation per category.
///
/// Applying the set to a scene puts the column in slot `perms[k][a]` of block
/// `k` into slot `a`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PermutationSet {
    pub perms: Vec<Vec<usize>>,
}

impl PermutationSet {
    pub fn identity(config: &CategoryConfig) -> Self {
        Self {
            perms: config
                .categories
                .iter()
                .map(|c| (0..c.max_multiplicity).collect())
                .collect(),
        }
    }

    pub fn validate(&self, config: &CategoryConfig) -> Result<()> {
        if self.perms.len() != config.num_categories() {
            return Err(Error::Config(format!(
                "permutation set has {} categories, scene has {}",
                self.perms.len(),
                config.num_categories()
            )));
        }
        for (k, (p, c)) in self.perms.iter().zip(&config.categories).enumerate() {
            if !is_bijection(p, c.max_multiplicity) {
                return Err(Error::Config(format!(
                    "permutation for category {k} is not a bijection on {} slots",
                    c.max_multiplicity
                )));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.perms
            .iter()
            .all(|p| p.iter().enumerate().all(|(a, &b)| a == b))
    }

    pub fn inverse(&self) -> Self {
        Self {
            perms: self.perms.iter().map(|p| invert(p)).collect(),
        }
    }

    /// `self ∘ other`: the set equivalent to applying `other` and then `self`.
    pub fn compose(&self, other: &PermutationSet) -> Self {
        Self {
            perms: self
                .perms
                .iter()
                .zip(&other.perms)
                .map(|(outer, inner)| outer.iter().map(|&a| inner[a]).collect())
                .collect(),
        }
    }
}

pub(crate) fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (a, &b) in p.iter().enumerate() {
        inv[b] = a;
    }
    inv
}

fn is_bijection(p: &[usize], m: usize) -> bool {
    if p.len() != m {
        return false;
    }
    let mut seen = vec![false; m];
    for &b in p {
        if b >= m || seen[b] {
            return false;
        }
        seen[b] = true;
    }
    true
}

pub fn apply_permutation(scene: &SceneMatrix, perms: &PermutationSet) -> Result<SceneMatrix> {
    perms.validate(&scene.config)?;
    let mut columns = scene.columns.clone();
    for (k, p) in perms.perms.iter().enumerate() {
        let range = scene.config.block_range(k);
        for (a, &b) in p.iter().enumerate() {
            columns[range.start + a] = scene.columns[range.start + b].clone();
        }
    }
    Ok(SceneMatrix {
        config: scene.config.clone(),
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn scene() -> SceneMatrix {
        let cfg = Arc::new(CategoryConfig::uniform(&["a", "b"], 2, 1).unwrap());
        let flat: Vec<f64> = (0..cfg.flat_len()).map(|i| i as f64).collect();
        SceneMatrix::from_flat(cfg, &flat).unwrap()
    }

    #[test]
    fn identity_leaves_scene() {
        let s = scene();
        let id = PermutationSet::identity(&s.config);
        assert_eq!(apply_permutation(&s, &id).unwrap(), s);
    }

    #[test]
    fn transposition_swaps_columns() {
        let s = scene();
        let p = PermutationSet {
            perms: vec![vec![1, 0], vec![0, 1]],
        };
        let out = apply_permutation(&s, &p).unwrap();
        assert_eq!(out.columns[0], s.columns[1]);
        assert_eq!(out.columns[1], s.columns[0]);
        assert_eq!(out.columns[2], s.columns[2]);
    }

    #[test]
    fn mismatched_config_is_rejected() {
        let s = scene();
        let p = PermutationSet {
            perms: vec![vec![0, 1]],
        };
        assert!(matches!(apply_permutation(&s, &p), Err(Error::Config(_))));
        let q = PermutationSet {
            perms: vec![vec![0, 0], vec![0, 1]],
        };
        assert!(apply_permutation(&s, &q).is_err());
    }

    #[test]
    fn compose_matches_sequential_application() {
        let s = scene();
        let a = PermutationSet {
            perms: vec![vec![1, 0], vec![1, 0]],
        };
        let b = PermutationSet {
            perms: vec![vec![1, 0], vec![0, 1]],
        };
        let seq = apply_permutation(&apply_permutation(&s, &b).unwrap(), &a).unwrap();
        let comp = apply_permutation(&s, &a.compose(&b)).unwrap();
        assert_eq!(seq, comp);
    }
}
