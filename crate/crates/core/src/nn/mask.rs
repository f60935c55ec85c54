use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Fixed connectivity of a sparsely connected layer in compressed-row form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseMask {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row `o` spans `cols[offsets[o]..offsets[o + 1]]`.
    pub offsets: Vec<usize>,
    /// Connected input indices, ascending within each row.
    pub cols: Vec<u32>,
}

impl SparseMask {
    pub fn from_rows(in_dim: usize, rows: &[Vec<u32>]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        offsets.push(0);
        for (o, r) in rows.iter().enumerate() {
            if r.is_empty() {
                return Err(Error::Config(format!("sparse unit {o} has no inputs")));
            }
            if r.windows(2).any(|w| w[0] >= w[1]) || r.iter().any(|&i| i as usize >= in_dim) {
                return Err(Error::Config(format!("sparse unit {o} has invalid connections")));
            }
            cols.extend_from_slice(r);
            offsets.push(cols.len());
        }
        Ok(Self {
            in_dim,
            out_dim: rows.len(),
            offsets,
            cols,
        })
    }

    pub fn row(&self, o: usize) -> &[u32] {
        &self.cols[self.offsets[o]..self.offsets[o + 1]]
    }

    pub fn num_connections(&self) -> usize {
        self.cols.len()
    }

    pub fn in_degree(&self, o: usize) -> usize {
        self.offsets[o + 1] - self.offsets[o]
    }

    pub fn contains(&self, o: usize, i: usize) -> bool {
        self.row(o).binary_search(&(i as u32)).is_ok()
    }

    /// Dense `out × in` boolean mask.
    pub fn to_dense(&self) -> Vec<Vec<bool>> {
        (0..self.out_dim)
            .map(|o| {
                let mut r = vec![false; self.in_dim];
                for &i in self.row(o) {
                    r[i as usize] = true;
                }
                r
            })
            .collect()
    }
}

/// Connects every (output, input) pair independently with probability
/// `h / in_dim`; an output left without inputs gets one uniformly random
/// connection.
pub fn make_sc_mask(in_dim: usize, out_dim: usize, h: usize, seed: u64) -> Result<SparseMask> {
    if h == 0 || in_dim == 0 || out_dim == 0 {
        return Err(Error::Config(format!(
            "sparse mask needs positive sizes and h, got in={in_dim}, out={out_dim}, h={h}"
        )));
    }
    let p = (h as f64 / in_dim as f64).min(1.0);
    let mut r = rng::stream(seed, &[in_dim as u64, out_dim as u64, h as u64]);
    let rows: Vec<Vec<u32>> = (0..out_dim)
        .map(|_| {
            let mut row: Vec<u32> = if p >= 1.0 {
                (0..in_dim as u32).collect()
            } else {
                (0..in_dim as u32).filter(|_| r.random::<f64>() < p).collect()
            };
            if row.is_empty() {
                row.push(r.random_range(0..in_dim as u32));
            }
            row
        })
        .collect();
    SparseMask::from_rows(in_dim, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_mask_is_full() {
        let m = make_sc_mask(6, 3, 6, 1).unwrap();
        assert!(m.to_dense().iter().all(|r| r.iter().all(|&b| b)));
    }

    #[test]
    fn every_unit_has_an_input() {
        for seed in 0..20 {
            let m = make_sc_mask(500, 50, 1, seed).unwrap();
            assert!((0..50).all(|o| m.in_degree(o) >= 1));
        }
    }
}
