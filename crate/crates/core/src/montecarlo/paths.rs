use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::chaos::GridSpec;
use crate::error::{invalid, Result};

/// Standardized increments `ξ` of `n_samples` paths on `grid`, row-major.
///
/// Path `i` is drawn from the ChaCha8 stream `i` under `seed`, so a batch is
/// a pure function of `(seed, grid, n_samples)` whatever the thread count.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    grid: GridSpec,
    seed: u64,
    increments: Vec<f64>,
}

impl PathBatch {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.increments.len() / self.grid.steps()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// `ξ` of path `i`.
    pub fn path(&self, i: usize) -> &[f64] {
        let n = self.grid.steps();
        &self.increments[i * n..(i + 1) * n]
    }

    pub fn paths(&self) -> std::slice::Chunks<'_, f64> {
        self.increments.chunks(self.grid.steps())
    }

    /// Applies `f` to every path in parallel; results come back in path order.
    pub fn map<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync + Send,
    {
        self.increments
            .par_chunks(self.grid.steps())
            .map(f)
            .collect()
    }
}

pub fn sample_paths(grid: GridSpec, n_samples: usize, seed: u64) -> Result<PathBatch> {
    if n_samples == 0 {
        return Err(invalid("need at least one sample path"));
    }
    let steps = grid.steps();
    let rows: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (0..steps)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect();
    Ok(PathBatch {
        grid,
        seed,
        increments: rows.concat(),
    })
}
