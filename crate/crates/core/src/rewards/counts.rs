//! Pseudo-visitation counts: a spatial grid and a Bernoulli density model.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FeatureEncoding;

/// Visit counts over square cells of the episode frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoCountGrid {
    pub cell_size: f64,
    counts: BTreeMap<(i64, i64), u64>,
}

impl Default for PseudoCountGrid {
    fn default() -> Self {
        Self::new(0.5)
    }
}

impl PseudoCountGrid {
    pub fn new(cell_size: f64) -> Self {
        Self { cell_size, counts: BTreeMap::new() }
    }

    fn key(&self, x: f64, y: f64) -> (i64, i64) {
        ((x / self.cell_size).floor() as i64, (y / self.cell_size).floor() as i64)
    }

    pub fn count_at(&self, x: f64, y: f64) -> u64 {
        self.counts.get(&self.key(x, y)).copied().unwrap_or(0)
    }

    /// Returns the count of the cell containing `(x, y)`, then increments it.
    pub fn visit(&mut self, x: f64, y: f64) -> u64 {
        let entry = self.counts.entry(self.key(x, y)).or_insert(0);
        let before = *entry;
        *entry += 1;
        before
    }

    pub fn visited_cells(&self) -> usize {
        self.counts.len()
    }
}

/// Independent per-dimension Bernoulli model over binarized encodings
/// (threshold 0.5) with Laplace-smoothed estimates `(ones + 1) / (n + 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityModel {
    ones: Vec<u64>,
    n: u64,
}

/// Result of a density-model pseudo-count query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityCount {
    pub n_hat: f64,
    /// The recoding probability did not exceed the prior one; `n_hat` is
    /// infinite.
    pub degenerate: bool,
}

impl DensityModel {
    pub fn new(dim: usize) -> Self {
        Self { ones: vec![0; dim], n: 0 }
    }

    pub fn updates(&self) -> u64 {
        self.n
    }

    fn bits(phi: &FeatureEncoding) -> impl Iterator<Item = bool> + '_ {
        phi.0.iter().map(|&v| v >= 0.5)
    }

    /// `ln rho(x)` under the current estimates, and `ln rho'(x)` after one
    /// more observation of `x`.
    fn log_probs(&self, phi: &FeatureEncoding) -> (f64, f64) {
        assert_eq!(phi.dim(), self.ones.len(), "encoding dimension mismatch");
        let (mut before, mut after) = (0.0, 0.0);
        let n = self.n as f64;
        for (bit, &ones) in Self::bits(phi).zip(&self.ones) {
            let c = if bit { ones as f64 } else { n - ones as f64 };
            before += ((c + 1.0) / (n + 2.0)).ln();
            after += ((c + 2.0) / (n + 3.0)).ln();
        }
        (before, after)
    }

    /// Pseudo-count `rho (1 - rho') / (rho' - rho)` evaluated in log space,
    /// then commits the update.
    pub fn query_and_update(&mut self, phi: &FeatureEncoding) -> DensityCount {
        let (lr, lr2) = self.log_probs(phi);
        let result = if lr2 <= lr {
            DensityCount { n_hat: f64::INFINITY, degenerate: true }
        } else {
            DensityCount { n_hat: -lr2.exp_m1() / (lr2 - lr).exp_m1(), degenerate: false }
        };
        for (bit, ones) in Self::bits(phi).zip(self.ones.iter_mut()) {
            *ones += bit as u64;
        }
        self.n += 1;
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts_sequence() {
        let mut grid = PseudoCountGrid::default();
        assert_eq!(grid.count_at(0.1, 0.1), 0);
        let seq: Vec<u64> = (0..5).map(|_| grid.visit(0.1, 0.4)).collect();
        assert_eq!(seq, vec![0, 1, 2, 3, 4]);
        assert_eq!(grid.visit(-0.1, 0.4), 0);
        assert_eq!(grid.visit(0.6, 0.4), 0);
        assert_eq!(grid.visited_cells(), 3);
    }

    #[test]
    fn constant_vector_matches_closed_form() {
        let d = 20;
        let phi = FeatureEncoding((0..d).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect());
        let mut model = DensityModel::new(d);
        let mut last = 0.0;
        for n in 0..30u64 {
            let got = model.query_and_update(&phi);
            // Every dimension has seen the same bit n times:
            // rho = ((n+1)/(n+2))^d, rho' = ((n+2)/(n+3))^d.
            let nf = n as f64;
            let rho = ((nf + 1.0) / (nf + 2.0)).powi(d as i32);
            let rho2 = ((nf + 2.0) / (nf + 3.0)).powi(d as i32);
            let want = rho * (1.0 - rho2) / (rho2 - rho);
            assert!(!got.degenerate);
            assert!((got.n_hat - want).abs() <= 1e-9 * want.max(1.0), "n = {n}: {} vs {want}", got.n_hat);
            assert!(got.n_hat > last);
            last = got.n_hat;
        }
    }

    #[test]
    fn equal_probabilities_are_degenerate() {
        let mut model = DensityModel::new(0);
        let got = model.query_and_update(&FeatureEncoding(vec![]));
        assert!(got.degenerate && got.n_hat.is_infinite());
    }
}
