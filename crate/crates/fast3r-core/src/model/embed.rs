//! Fixed (non-learned) embeddings: the per-view image-index embedding that
//! anchors the global frame and supports "train short, test long", and the
//! intra-image 2D patch position embedding.

use rand::Rng;

use super::ModelError;

/// The distinct view slots of one sample, drawn from the pool `{1..=N'}`.
/// Slot 1 is always first: it defines the global coordinate frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexAssignment {
    indices: Vec<u32>,
}

impl IndexAssignment {
    pub fn new(indices: Vec<u32>, pool_size: u32) -> Result<Self, ModelError> {
        if indices.is_empty() || indices[0] != 1 {
            return Err(ModelError::ShapeError(
                "index assignment must start with slot 1".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for &i in &indices {
            if i < 1 || i > pool_size {
                return Err(ModelError::PoolTooSmall {
                    n_views: indices.len(),
                    pool_size,
                });
            }
            if !seen.insert(i) {
                return Err(ModelError::ShapeError(format!("duplicate slot {i}")));
            }
        }
        Ok(IndexAssignment { indices })
    }

    /// Consecutive slots `1..=n`; the no-interpolation ablation.
    pub fn consecutive(n_views: usize, pool_size: u32) -> Result<Self, ModelError> {
        if n_views as u32 > pool_size {
            return Err(ModelError::PoolTooSmall {
                n_views,
                pool_size,
            });
        }
        Ok(IndexAssignment {
            indices: (1..=n_views as u32).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn slots(&self) -> &[u32] {
        &self.indices
    }
}

/// Draws an assignment: slot 1 first, the rest uniform without replacement
/// from `{2..=pool_size}`.
pub fn sample_index_assignment(
    n_views: usize,
    pool_size: u32,
    rng: &mut impl Rng,
) -> Result<IndexAssignment, ModelError> {
    if n_views as u32 > pool_size {
        return Err(ModelError::PoolTooSmall {
            n_views,
            pool_size,
        });
    }
    let mut pool: Vec<u32> = (2..=pool_size).collect();
    let mut indices = Vec::with_capacity(n_views);
    indices.push(1);
    // Partial Fisher-Yates: the first n_views - 1 slots of a full shuffle.
    for i in 0..n_views.saturating_sub(1) {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
        indices.push(pool[i]);
    }
    Ok(IndexAssignment { indices })
}

/// Sinusoidal embedding of a raw view slot: `dim/2` sin/cos pairs on a
/// geometric frequency ladder from 1 down to `1/pool_size`.
pub fn index_embedding(index: u32, dim: usize, pool_size: u32) -> Vec<f64> {
    assert!(dim % 2 == 0, "embedding dim must be even");
    let pairs = dim / 2;
    let mut out = Vec::with_capacity(dim);
    let x = index as f64;
    for k in 0..pairs {
        let omega = if pairs > 1 {
            (pool_size as f64).powf(-(k as f64) / (pairs as f64 - 1.0))
        } else {
            1.0
        };
        out.push((x * omega).sin());
        out.push((x * omega).cos());
    }
    out
}

/// Fixed 2D sinusoidal embedding for the patch at grid cell `(gy, gx)`.
/// Half the dimensions encode x, half y, each as sin/cos pairs on the usual
/// 10000-base ladder.
pub fn pos2d_embedding(gy: usize, gx: usize, dim: usize) -> Vec<f64> {
    assert!(dim % 4 == 0, "2d position embedding needs dim % 4 == 0");
    let quarter = dim / 4;
    let mut out = Vec::with_capacity(dim);
    for (coord, _) in [(gx as f64, 0), (gy as f64, 1)] {
        for k in 0..quarter {
            let omega = 10_000f64.powf(-(k as f64) / quarter as f64);
            out.push((coord * omega).sin());
            out.push((coord * omega).cos());
        }
    }
    out
}
