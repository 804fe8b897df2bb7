//! C ABI over the frechet-som pipeline: opaque handles, status codes, and
//! plain-C data in and out. Every constructor has a matching `_free`; all
//! other functions borrow.

use std::ffi::c_char;

use frechet_som::{
    metric_closure, pairwise_distances, permutation_test, quantization_error, som_distance,
    train_batch, DistanceMatrix, Error, GridSpec, GroupedSample, MetricKind, Som, StatisticKind,
    TrainingSchedule, Volume,
};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsomStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was structurally invalid (bad sizes, bad enum value...).
    InvalidArgument = 2,
    /// The computation rejected the data (degenerate input, failed
    /// validation, numeric trouble).
    DataError = 3,
}

/// Distance between self-organizing maps.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsomMetric {
    /// Temporal: prototype time series.
    TSmd = 0,
    /// Spatial: voxel assignment sets.
    SSmd = 1,
    /// Spatio-temporal: assignments of temporally matched units.
    StSmd = 2,
}

impl FsomMetric {
    fn kind(self) -> MetricKind {
        match self {
            FsomMetric::TSmd => MetricKind::TSmd,
            FsomMetric::SSmd => MetricKind::SSmd,
            FsomMetric::StSmd => MetricKind::StSmd,
        }
    }
}

/// Opaque spatio-temporal volume handle.
pub struct FsomVolume(Volume);

/// Opaque trained-map handle.
pub struct FsomSom(Som);

/// Opaque metric-closed distance matrix handle.
pub struct FsomMatrix(DistanceMatrix);

fn status_of(e: &Error) -> FsomStatus {
    match e {
        Error::Config(_) | Error::InvalidAlpha(_) => FsomStatus::InvalidArgument,
        _ => FsomStatus::DataError,
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> FsomStatus {
    if out.is_null() {
        return FsomStatus::NullPointer;
    }
    unsafe { out.write(value) };
    FsomStatus::Ok
}

/// Builds a volume from row-major data: `voxels` rows of `times` samples.
/// The data is copied.
///
/// # Safety
/// `data` must point to `voxels * times` readable doubles and `out` to a
/// writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn fsom_volume_create(
    data: *const f64,
    voxels: usize,
    times: usize,
    out: *mut *mut FsomVolume,
) -> FsomStatus {
    if data.is_null() || out.is_null() {
        return FsomStatus::NullPointer;
    }
    let Some(len) = voxels.checked_mul(times) else {
        return FsomStatus::InvalidArgument;
    };
    let flat = unsafe { std::slice::from_raw_parts(data, len) };
    match Volume::from_flat(flat.to_vec(), voxels, times, None, "ffi") {
        Ok(v) => unsafe { write_out(out, Box::into_raw(Box::new(FsomVolume(v)))) },
        Err(e) => status_of(&e),
    }
}

/// # Safety
/// `volume` must be a pointer from `fsom_volume_create`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsom_volume_free(volume: *mut FsomVolume) {
    if !volume.is_null() {
        drop(unsafe { Box::from_raw(volume) });
    }
}

/// Trains a `k1 x k2` map on the volume with the batch algorithm and the
/// default schedule (`iterations` steps, radius decaying from `k1`).
///
/// # Safety
/// `volume` must be a live volume handle; `out` a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn fsom_train_batch(
    volume: *const FsomVolume,
    k1: usize,
    k2: usize,
    iterations: usize,
    seed: u64,
    out: *mut *mut FsomSom,
) -> FsomStatus {
    let Some(volume) = (unsafe { volume.as_ref() }) else {
        return FsomStatus::NullPointer;
    };
    let grid = match GridSpec::new(k1, k2) {
        Ok(g) => g,
        Err(_) => return FsomStatus::InvalidArgument,
    };
    let schedule = TrainingSchedule {
        iterations,
        ..TrainingSchedule::for_grid(grid, seed)
    };
    match train_batch(&volume.0, grid, &schedule) {
        Ok(som) => unsafe { write_out(out, Box::into_raw(Box::new(FsomSom(som)))) },
        Err(e) => status_of(&e),
    }
}

/// # Safety
/// `som` must be a pointer from `fsom_train_batch`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsom_som_free(som: *mut FsomSom) {
    if !som.is_null() {
        drop(unsafe { Box::from_raw(som) });
    }
}

/// Number of output units of a trained map; 0 for a null handle.
///
/// # Safety
/// `som` must be null or a live map handle.
#[no_mangle]
pub unsafe extern "C" fn fsom_som_units(som: *const FsomSom) -> usize {
    unsafe { som.as_ref() }.map_or(0, |s| s.0.units())
}

/// Summed distance from each voxel series to its best-matching prototype.
///
/// # Safety
/// `som` and `volume` must be live handles; `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn fsom_quantization_error(
    som: *const FsomSom,
    volume: *const FsomVolume,
    out: *mut f64,
) -> FsomStatus {
    let (Some(som), Some(volume)) = (unsafe { som.as_ref() }, unsafe { volume.as_ref() }) else {
        return FsomStatus::NullPointer;
    };
    match quantization_error(&som.0, &volume.0) {
        Ok(q) => unsafe { write_out(out, q) },
        Err(e) => status_of(&e),
    }
}

/// Raw (pre-closure) distance between two maps under a metric.
///
/// # Safety
/// `a` and `b` must be live map handles; `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn fsom_som_distance(
    metric: FsomMetric,
    a: *const FsomSom,
    b: *const FsomSom,
    out: *mut f64,
) -> FsomStatus {
    let (Some(a), Some(b)) = (unsafe { a.as_ref() }, unsafe { b.as_ref() }) else {
        return FsomStatus::NullPointer;
    };
    match som_distance(metric.kind(), &a.0, &b.0) {
        Ok(d) => unsafe { write_out(out, d) },
        Err(e) => status_of(&e),
    }
}

/// Pairwise distances over a sample of maps, repaired into a metric by
/// shortest-path closure.
///
/// # Safety
/// `soms` must point to `n` live map handles; `out` to a writable slot.
#[no_mangle]
pub unsafe extern "C" fn fsom_closed_matrix(
    soms: *const *const FsomSom,
    n: usize,
    metric: FsomMetric,
    out: *mut *mut FsomMatrix,
) -> FsomStatus {
    if soms.is_null() || out.is_null() {
        return FsomStatus::NullPointer;
    }
    let handles = unsafe { std::slice::from_raw_parts(soms, n) };
    let mut sample = Vec::with_capacity(n);
    for &h in handles {
        let Some(h) = (unsafe { h.as_ref() }) else {
            return FsomStatus::NullPointer;
        };
        sample.push(h.0.clone());
    }
    let closed = pairwise_distances(&sample, metric.kind()).and_then(|d| metric_closure(&d));
    match closed {
        Ok(m) => unsafe { write_out(out, Box::into_raw(Box::new(FsomMatrix(m)))) },
        Err(e) => status_of(&e),
    }
}

/// # Safety
/// `matrix` must be a pointer from `fsom_closed_matrix`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsom_matrix_free(matrix: *mut FsomMatrix) {
    if !matrix.is_null() {
        drop(unsafe { Box::from_raw(matrix) });
    }
}

/// Side length of the matrix; 0 for a null handle.
///
/// # Safety
/// `matrix` must be null or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn fsom_matrix_len(matrix: *const FsomMatrix) -> usize {
    unsafe { matrix.as_ref() }.map_or(0, |m| m.0.len())
}

/// Entry `(i, j)` of the matrix.
///
/// # Safety
/// `matrix` must be a live matrix handle; `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn fsom_matrix_get(
    matrix: *const FsomMatrix,
    i: usize,
    j: usize,
    out: *mut f64,
) -> FsomStatus {
    let Some(m) = (unsafe { matrix.as_ref() }) else {
        return FsomStatus::NullPointer;
    };
    if i >= m.0.len() || j >= m.0.len() {
        return FsomStatus::InvalidArgument;
    }
    unsafe { write_out(out, m.0.get(i, j)) }
}

/// Two-group permutation test on a closed matrix. `labels` holds one 0/1
/// group label per sample member. Writes the observed statistic and the
/// permutation p-value.
///
/// # Safety
/// `matrix` must be a live matrix handle, `labels` must point to `n`
/// readable values, and the out-pointers must be writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fsom_permutation_test(
    matrix: *const FsomMatrix,
    labels: *const u32,
    n: usize,
    permutations: u64,
    seed: u64,
    statistic_out: *mut f64,
    p_value_out: *mut f64,
) -> FsomStatus {
    let Some(m) = (unsafe { matrix.as_ref() }) else {
        return FsomStatus::NullPointer;
    };
    if labels.is_null() {
        return FsomStatus::NullPointer;
    }
    let labels = unsafe { std::slice::from_raw_parts(labels, n) };
    if labels.iter().any(|&l| l > 1) {
        return FsomStatus::InvalidArgument;
    }
    let groups = match GroupedSample::new(labels.iter().map(|&l| l as usize).collect()) {
        Ok(g) => g,
        Err(e) => return status_of(&e),
    };
    let result = permutation_test(
        &m.0,
        &groups,
        permutations as usize,
        seed,
        StatisticKind::T,
        0.0,
    );
    match result {
        Ok(r) => {
            let s = unsafe { write_out(statistic_out, r.statistic) };
            if s != FsomStatus::Ok {
                return s;
            }
            unsafe { write_out(p_value_out, r.p_value) }
        }
        Err(e) => status_of(&e),
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn fsom_status_message(status: FsomStatus) -> *const c_char {
    let msg: &'static [u8] = match status {
        FsomStatus::Ok => b"ok\0",
        FsomStatus::NullPointer => b"null pointer argument\0",
        FsomStatus::InvalidArgument => b"invalid argument\0",
        FsomStatus::DataError => b"data rejected\0",
    };
    msg.as_ptr().cast()
}
