use crate::error::{Error, Result};

/// Rectangular map layout: `k1` rows by `k2` columns, read left to right
/// and top to bottom starting at unit 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    k1: usize,
    k2: usize,
}

impl GridSpec {
    pub fn new(k1: usize, k2: usize) -> Result<Self> {
        if k1 == 0 || k2 == 0 || k1 * k2 < 2 {
            return Err(Error::DegenerateGrid { k1, k2 });
        }
        Ok(Self { k1, k2 })
    }

    pub fn k1(&self) -> usize {
        self.k1
    }

    pub fn k2(&self) -> usize {
        self.k2
    }

    /// Total number of units.
    pub fn units(&self) -> usize {
        self.k1 * self.k2
    }

    /// Grid coordinates (row, col) of unit `k`.
    pub fn coord(&self, k: usize) -> (usize, usize) {
        debug_assert!(k < self.units());
        (k / self.k2, k % self.k2)
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.k1 && col < self.k2);
        row * self.k2 + col
    }

    /// Squared Euclidean distance between the coordinates of two units.
    pub fn coord_dist_sq(&self, k: usize, c: usize) -> f64 {
        let (r1, c1) = self.coord(k);
        let (r2, c2) = self.coord(c);
        let dr = r1 as f64 - r2 as f64;
        let dc = c1 as f64 - c2 as f64;
        dr * dr + dc * dc
    }
}

/// Hard voxel-to-unit assignment induced by a trained map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    bmu_of: Vec<usize>,
    units: usize,
}

impl Assignment {
    pub fn new(bmu_of: Vec<usize>, units: usize) -> Result<Self> {
        if let Some((v, &k)) = bmu_of.iter().enumerate().find(|(_, &k)| k >= units) {
            return Err(Error::IncompatibleSample {
                index: v,
                reason: format!("voxel assigned to unit {k}, but map has {units} units"),
            });
        }
        Ok(Self { bmu_of, units })
    }

    pub fn voxels(&self) -> usize {
        self.bmu_of.len()
    }

    pub fn units(&self) -> usize {
        self.units
    }

    /// Unit index of voxel `v`.
    pub fn bmu_of(&self, v: usize) -> usize {
        self.bmu_of[v]
    }

    pub fn bmu_slice(&self) -> &[usize] {
        &self.bmu_of
    }

    /// Binarized indicator over voxels for unit `k`.
    pub fn indicator(&self, k: usize) -> Vec<bool> {
        self.bmu_of.iter().map(|&c| c == k).collect()
    }

    /// Voxel indices assigned to unit `k`.
    pub fn voxels_of(&self, k: usize) -> Vec<usize> {
        self.bmu_of
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == k)
            .map(|(v, _)| v)
            .collect()
    }
}

/// A trained self-organizing map: one prototype time series per grid unit,
/// plus the voxel assignment it induces on its training volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Som {
    grid: GridSpec,
    weights: Vec<Vec<f64>>,
    assignment: Assignment,
    source_times: usize,
}

impl Som {
    pub fn new(grid: GridSpec, weights: Vec<Vec<f64>>, assignment: Assignment) -> Result<Self> {
        if weights.len() != grid.units() {
            return Err(Error::DimensionMismatch {
                context: "weight vector count",
                expected: grid.units(),
                found: weights.len(),
            });
        }
        let times = weights.first().map_or(0, |w| w.len());
        for (k, w) in weights.iter().enumerate() {
            if w.len() != times {
                return Err(Error::RaggedInput {
                    row: k,
                    found: w.len(),
                    expected: times,
                });
            }
            if let Some(t) = w.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteEntry { voxel: k, time: t });
            }
        }
        if assignment.units() != grid.units() {
            return Err(Error::DimensionMismatch {
                context: "assignment unit count",
                expected: grid.units(),
                found: assignment.units(),
            });
        }
        Ok(Self {
            grid,
            weights,
            assignment,
            source_times: times,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn units(&self) -> usize {
        self.grid.units()
    }

    pub fn times(&self) -> usize {
        self.source_times
    }

    pub fn weight(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }
}
