use crate::error::{Error, Result};

/// A subject's spatio-temporal volume: `voxels` time series of length `times`,
/// stored row-major. Optional 2-D extents describe the voxel grid of synthetic
/// images; externally supplied data may use the flat index alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    data: Vec<f64>,
    voxels: usize,
    times: usize,
    extents: Option<(usize, usize)>,
    subject_id: String,
}

impl Volume {
    /// Validates a rectangular matrix of voxel time series.
    ///
    /// `extents` is `(width, height)`; when given, `width * height` must equal
    /// the number of rows. Every entry must be finite.
    pub fn new(
        rows: Vec<Vec<f64>>,
        extents: Option<(usize, usize)>,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        let voxels = rows.len();
        let times = rows.first().map_or(0, |r| r.len());
        if voxels < 1 || times < 2 {
            return Err(Error::DegenerateVolume { voxels, times });
        }
        for (v, row) in rows.iter().enumerate() {
            if row.len() != times {
                return Err(Error::RaggedInput {
                    row: v,
                    found: row.len(),
                    expected: times,
                });
            }
        }
        let mut data = Vec::with_capacity(voxels * times);
        for row in &rows {
            data.extend_from_slice(row);
        }
        Self::from_flat(data, voxels, times, extents, subject_id)
    }

    /// Builds a volume from a flat row-major buffer.
    pub fn from_flat(
        data: Vec<f64>,
        voxels: usize,
        times: usize,
        extents: Option<(usize, usize)>,
        subject_id: impl Into<String>,
    ) -> Result<Self> {
        if voxels < 1 || times < 2 {
            return Err(Error::DegenerateVolume { voxels, times });
        }
        if data.len() != voxels * times {
            return Err(Error::DimensionMismatch {
                context: "flat volume buffer",
                expected: voxels * times,
                found: data.len(),
            });
        }
        if let Some((w, h)) = extents {
            if w * h != voxels {
                return Err(Error::ExtentMismatch {
                    width: w,
                    height: h,
                    product: w * h,
                    voxels,
                });
            }
        }
        for (i, x) in data.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFiniteEntry {
                    voxel: i / times,
                    time: i % times,
                });
            }
        }
        Ok(Self {
            data,
            voxels,
            times,
            extents,
            subject_id: subject_id.into(),
        })
    }

    pub fn voxels(&self) -> usize {
        self.voxels
    }

    pub fn times(&self) -> usize {
        self.times
    }

    pub fn extents(&self) -> Option<(usize, usize)> {
        self.extents
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    /// Time series of voxel `v`.
    pub fn series(&self, v: usize) -> &[f64] {
        &self.data[v * self.times..(v + 1) * self.times]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.times)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}
