//! Batch (default) and sequential SOM training, plus quantization error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::som::{Assignment, GridSpec, Som};
use crate::volume::Volume;

/// Iteration schedule and seed for a training run.
///
/// The neighborhood radius decays linearly, `sigma(g) = sigma0 * (1 - g/total)`,
/// clamped below at `sigma_min` so the Gaussian kernel stays defined at the
/// final step. The learning rate only applies to the sequential algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSchedule {
    pub iterations: usize,
    pub sigma0: f64,
    pub sigma_min: f64,
    pub alpha0: f64,
    pub seed: u64,
}

impl TrainingSchedule {
    pub const DEFAULT_SIGMA_MIN: f64 = 0.1;
    pub const DEFAULT_ALPHA0: f64 = 0.1;

    /// Default schedule for a given grid: 100 iterations, initial radius
    /// equal to the grid height.
    pub fn for_grid(grid: GridSpec, seed: u64) -> Self {
        Self {
            iterations: 100,
            sigma0: grid.k1() as f64,
            sigma_min: Self::DEFAULT_SIGMA_MIN,
            alpha0: Self::DEFAULT_ALPHA0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidSchedule("iterations must be >= 1".into()));
        }
        if !(self.sigma0 > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "sigma0 must be positive, got {}",
                self.sigma0
            )));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min <= self.sigma0) {
            return Err(Error::InvalidSchedule(format!(
                "sigma_min must lie in (0, sigma0], got {}",
                self.sigma_min
            )));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "alpha0 must lie in (0, 1], got {}",
                self.alpha0
            )));
        }
        Ok(())
    }

    /// Radius used at 0-based step `g`.
    pub fn sigma_at(&self, g: usize) -> f64 {
        let linear = self.sigma0 * (1.0 - g as f64 / self.iterations as f64);
        linear.max(self.sigma_min)
    }

    /// Learning rate at 0-based step `g`: exponential decay to 1% of alpha0.
    pub fn alpha_at(&self, g: usize) -> f64 {
        self.alpha0 * 0.01f64.powf(g as f64 / self.iterations as f64)
    }
}

/// Index of the unit whose weight is Euclidean-closest to `x`.
/// Ties break to the lowest index.
pub fn bmu_index(x: &[f64], weights: &[Vec<f64>]) -> Result<usize> {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (k, w) in weights.iter().enumerate() {
        if w.len() != x.len() {
            return Err(Error::DimensionMismatch {
                context: "input vector length vs weight length",
                expected: w.len(),
                found: x.len(),
            });
        }
        let d = dist_sq(x, w);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    Ok(best)
}

/// Gaussian neighborhood kernel over grid coordinates.
pub fn neighborhood_kernel(k: usize, c: usize, sigma: f64, grid: GridSpec) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    Ok((-grid.coord_dist_sq(k, c) / (2.0 * sigma * sigma)).exp())
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

fn check_times(som_times: usize, volume: &Volume) -> Result<()> {
    if som_times != volume.times() {
        return Err(Error::DimensionMismatch {
            context: "SOM time axis vs volume time axis",
            expected: som_times,
            found: volume.times(),
        });
    }
    Ok(())
}

/// One batch update: every weight becomes the kernel-weighted convex
/// combination of all inputs, with BMUs taken from the pre-step weights.
fn batch_step_weights(
    weights: &[Vec<f64>],
    volume: &Volume,
    sigma: f64,
    grid: GridSpec,
) -> Result<Vec<Vec<f64>>> {
    let times = volume.times();
    let bmus: Vec<usize> = volume
        .rows()
        .map(|x| bmu_index(x, weights))
        .collect::<Result<_>>()?;

    let mut new_weights = Vec::with_capacity(weights.len());
    for k in 0..weights.len() {
        let mut num = vec![0.0f64; times];
        let mut den = 0.0f64;
        for (x, &c) in volume.rows().zip(&bmus) {
            let h = neighborhood_kernel(k, c, sigma, grid)?;
            den += h;
            for (n, &xt) in num.iter_mut().zip(x) {
                *n += h * xt;
            }
        }
        // strictly positive kernel, so den > 0
        for n in num.iter_mut() {
            *n /= den;
        }
        new_weights.push(num);
    }
    Ok(new_weights)
}

/// Applies a single batch update to `som` and reassigns voxels.
pub fn batch_step(som: &Som, volume: &Volume, sigma: f64) -> Result<Som> {
    check_times(som.times(), volume)?;
    let weights = batch_step_weights(som.weights(), volume, sigma, som.grid())?;
    finalize(som.grid(), weights, volume)
}

fn init_weights(volume: &Volume, grid: GridSpec, seed: u64) -> Vec<Vec<f64>> {
    let times = volume.times();
    let mut lo = vec![f64::INFINITY; times];
    let mut hi = vec![f64::NEG_INFINITY; times];
    for x in volume.rows() {
        for t in 0..times {
            lo[t] = lo[t].min(x[t]);
            hi[t] = hi[t].max(x[t]);
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..grid.units())
        .map(|_| {
            (0..times)
                .map(|t| {
                    if hi[t] > lo[t] {
                        rng.random_range(lo[t]..hi[t])
                    } else {
                        lo[t]
                    }
                })
                .collect()
        })
        .collect()
}

fn finalize(grid: GridSpec, weights: Vec<Vec<f64>>, volume: &Volume) -> Result<Som> {
    let bmus: Vec<usize> = volume
        .rows()
        .map(|x| bmu_index(x, &weights))
        .collect::<Result<_>>()?;
    let assignment = Assignment::new(bmus, grid.units())?;
    Som::new(grid, weights, assignment)
}

/// The seeded starting map both algorithms train from: weights drawn
/// uniformly inside the data's per-time-point range.
pub fn initial_som(volume: &Volume, grid: GridSpec, seed: u64) -> Result<Som> {
    finalize(grid, init_weights(volume, grid, seed), volume)
}

/// Trains a SOM with the batch algorithm. Deterministic given the seed.
pub fn train_batch(volume: &Volume, grid: GridSpec, schedule: &TrainingSchedule) -> Result<Som> {
    schedule.validate()?;
    let mut weights = init_weights(volume, grid, schedule.seed);
    for g in 0..schedule.iterations {
        weights = batch_step_weights(&weights, volume, schedule.sigma_at(g), grid)?;
    }
    finalize(grid, weights, volume)
}

/// Trains a SOM with the sequential algorithm: at each step all inputs are
/// presented in a seeded random order and every unit moves toward the input
/// proportionally to the learning rate and its kernel distance to the BMU.
pub fn train_sequential(
    volume: &Volume,
    grid: GridSpec,
    schedule: &TrainingSchedule,
) -> Result<Som> {
    use rand::seq::SliceRandom;

    schedule.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(schedule.seed);
    let mut weights = init_weights(volume, grid, schedule.seed);
    let mut order: Vec<usize> = (0..volume.voxels()).collect();
    for g in 0..schedule.iterations {
        let sigma = schedule.sigma_at(g);
        let alpha = schedule.alpha_at(g);
        order.shuffle(&mut rng);
        for &v in &order {
            let x = volume.series(v);
            let c = bmu_index(x, &weights)?;
            for k in 0..weights.len() {
                let h = neighborhood_kernel(k, c, sigma, grid)?;
                let step = alpha * h;
                for (wt, &xt) in weights[k].iter_mut().zip(x) {
                    *wt += step * (xt - *wt);
                }
            }
        }
    }
    finalize(grid, weights, volume)
}

/// Summed Euclidean distance from each input to its BMU prototype.
pub fn quantization_error(som: &Som, volume: &Volume) -> Result<f64> {
    check_times(som.times(), volume)?;
    let mut total = 0.0;
    for x in volume.rows() {
        let c = bmu_index(x, som.weights())?;
        total += euclidean(x, som.weight(c));
    }
    Ok(total)
}
