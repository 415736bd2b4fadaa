//! State encoding: pooled local map plus a visible-category histogram.

use crate::mapping::LocalMap;
use crate::world::Observation;

/// Side of the pooled map grid.
pub const POOL_SIDE: usize = 16;
/// Number of pooled map components (`16 * 16 * 2`).
pub const POOLED_DIM: usize = POOL_SIDE * POOL_SIDE * 2;

/// Fixed-length state encoding; component `(by * 16 + bx) * 2 + channel`
/// holds the pooled map, followed by one area entry per vocabulary word.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoding(pub Vec<f64>);

impl FeatureEncoding {
    pub fn zeros(vocabulary_len: usize) -> Self {
        Self(vec![0.0; POOLED_DIM + vocabulary_len])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn distance_squared(&self, other: &FeatureEncoding) -> f64 {
        assert_eq!(self.dim(), other.dim(), "encoding dimension mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn distance(&self, other: &FeatureEncoding) -> f64 {
        self.distance_squared(other).sqrt()
    }
}

/// Block of pooled component covering local cell index `i` of an `L`-cell
/// side.
#[inline]
pub fn pool_block(i: usize, side: usize) -> usize {
    i * POOL_SIDE / side
}

pub fn encode_features(local: &LocalMap, obs: &Observation, vocabulary: &[String]) -> FeatureEncoding {
    let side = local.size();
    let mut sums = vec![0.0f64; POOLED_DIM];
    let mut counts = vec![0u32; POOL_SIDE * POOL_SIDE];
    for i in 0..side {
        let bi = pool_block(i, side);
        for j in 0..side {
            let b = bi * POOL_SIDE + pool_block(j, side);
            sums[2 * b] += local.occupied(i, j) as f64;
            sums[2 * b + 1] += local.explored(i, j) as f64;
            counts[b] += 1;
        }
    }
    let mut v = Vec::with_capacity(POOLED_DIM + vocabulary.len());
    for (b, &n) in counts.iter().enumerate() {
        let n = n.max(1) as f64;
        v.push(sums[2 * b] / n);
        v.push(sums[2 * b + 1] / n);
    }
    for word in vocabulary {
        let area: f64 = obs.visible.iter().filter(|o| &o.category == word).map(|o| o.apparent_area).sum();
        v.push(area.min(1.0));
    }
    FeatureEncoding(v)
}
