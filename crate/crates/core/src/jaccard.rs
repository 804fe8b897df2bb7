//! Ranks the output units of a group-mean SOM by sample Jaccard index and
//! reports per-unit overlaps with external binary reference maps.

use crate::error::{Error, Result};
use crate::som::Som;
use crate::trainer::bmu_index;
use crate::volume::Volume;

/// Per-unit sample Jaccard indices with their ascending rank order.
/// The lowest-index units are the most representative of the group.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRanking {
    values: Vec<f64>,
    order: Vec<usize>,
}

impl UnitRanking {
    fn new(values: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        // ascending, ties broken by unit index
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
        Self { values, order }
    }

    /// Sample Jaccard index of unit `k`.
    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Unit indices sorted ascending by sample Jaccard index.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// The most representative units.
    pub fn best(&self, count: usize) -> &[usize] {
        &self.order[..count.min(self.order.len())]
    }
}

/// Jaccard distance between two indicator vectors: disagreements over the
/// union. Two empty sets count as maximal agreement (distance 0).
pub fn jaccard_distance(x: &[bool], y: &[bool]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "indicator vector lengths",
            expected: x.len(),
            found: y.len(),
        });
    }
    let mut c11 = 0usize;
    let mut c10 = 0usize;
    let mut c01 = 0usize;
    for (&a, &b) in x.iter().zip(y) {
        match (a, b) {
            (true, true) => c11 += 1,
            (true, false) => c10 += 1,
            (false, true) => c01 += 1,
            (false, false) => {}
        }
    }
    let union = c11 + c10 + c01;
    if union == 0 {
        Ok(0.0)
    } else {
        Ok((c10 + c01) as f64 / union as f64)
    }
}

fn check_dims(mean_som: &Som, volume: &Volume) -> Result<()> {
    if mean_som.times() != volume.times() {
        return Err(Error::DimensionMismatch {
            context: "mean SOM time axis vs subject time axis",
            expected: mean_som.times(),
            found: volume.times(),
        });
    }
    if mean_som.assignment().voxels() != volume.voxels() {
        return Err(Error::DimensionMismatch {
            context: "mean SOM voxel count vs subject voxel count",
            expected: mean_som.assignment().voxels(),
            found: volume.voxels(),
        });
    }
    Ok(())
}

/// Projects a subject's voxels onto the mean map by BMU search, yielding the
/// subject-side indicator of each unit.
fn project_assignment(mean_som: &Som, volume: &Volume) -> Result<Vec<usize>> {
    volume
        .rows()
        .map(|x| bmu_index(x, mean_som.weights()))
        .collect()
}

/// Jaccard distance between a mean unit's voxel set and the voxel set the
/// subject's data induces on that unit via BMU projection onto the mean map.
pub fn global_jaccard(mean_som: &Som, subject: &Volume, k: usize) -> Result<f64> {
    check_dims(mean_som, subject)?;
    let projected = project_assignment(mean_som, subject)?;
    let subj_indicator: Vec<bool> = projected.iter().map(|&c| c == k).collect();
    jaccard_distance(&mean_som.assignment().indicator(k), &subj_indicator)
}

/// Per-unit average of `global_jaccard` over a group of subjects, with units
/// ranked ascending (smallest index = most representative).
pub fn sample_jaccard_index(mean_som: &Som, group: &[Volume]) -> Result<UnitRanking> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let units = mean_som.units();
    let mut sums = vec![0.0f64; units];
    for subject in group {
        check_dims(mean_som, subject)?;
        let projected = project_assignment(mean_som, subject)?;
        for k in 0..units {
            let subj_indicator: Vec<bool> = projected.iter().map(|&c| c == k).collect();
            sums[k] += jaccard_distance(&mean_som.assignment().indicator(k), &subj_indicator)?;
        }
    }
    let n = group.len() as f64;
    Ok(UnitRanking::new(sums.into_iter().map(|s| s / n).collect()))
}

/// Fraction of reference voxels falling in each unit's voxel set, listed in
/// ranking order. The fractions over all units sum to 1 because the
/// assignment partitions the voxels.
pub fn overlap_report(som: &Som, ranking: &UnitRanking, reference: &[bool]) -> Result<Vec<(usize, f64)>> {
    if reference.len() != som.assignment().voxels() {
        return Err(Error::DimensionMismatch {
            context: "reference map length vs voxel count",
            expected: som.assignment().voxels(),
            found: reference.len(),
        });
    }
    let active = reference.iter().filter(|&&b| b).count();
    if active == 0 {
        return Err(Error::EmptyReference);
    }
    let mut report = Vec::with_capacity(som.units());
    for &k in ranking.order() {
        let hits = som
            .assignment()
            .bmu_slice()
            .iter()
            .zip(reference)
            .filter(|(&c, &r)| c == k && r)
            .count();
        report.push((k, hits as f64 / active as f64));
    }
    Ok(report)
}
