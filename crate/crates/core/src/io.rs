//! File formats: raw little-endian f32 volumes with text sidecars, text SOM
//! files, distance-matrix CSVs, test-result records, and key-value configs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::inference::{StatisticKind, TestResult};
use crate::jaccard::UnitRanking;
use crate::metrics::{DistanceMatrix, MetricKind};
use crate::som::{Assignment, GridSpec, Som};
use crate::volume::Volume;

fn data_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::DataFile {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| data_err(path, e.to_string()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| data_err(parent, e.to_string()))?;
    }
    fs::write(path, bytes).map_err(|e| data_err(path, e.to_string()))
}

/// Parses `key = value` lines, ignoring blanks and `#` comments, preserving
/// order. Duplicate keys are rejected.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| data_err(path, format!("line {}: expected 'key = value'", lineno + 1)))?;
        let key = key.trim().to_string();
        if out.iter().any(|(k, _)| *k == key) {
            return Err(data_err(path, format!("duplicate key '{key}'")));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Volumes
// ---------------------------------------------------------------------------

/// Quantizes through f32, matching what a round trip through the volume file
/// format produces. In-memory pipelines use this so their numbers agree
/// byte-for-byte with file-based runs.
pub fn quantize_volume(volume: &Volume) -> Volume {
    Volume::from_flat(
        volume.as_flat().iter().map(|&x| x as f32 as f64).collect(),
        volume.voxels(),
        volume.times(),
        volume.extents(),
        volume.subject_id(),
    )
    .expect("quantizing a valid volume preserves validity")
}

/// Writes `<stem>.vol` (row-major little-endian f32) and `<stem>.meta`.
pub fn write_volume(stem: &Path, volume: &Volume) -> Result<()> {
    let mut bytes = Vec::with_capacity(volume.as_flat().len() * 4);
    for &x in volume.as_flat() {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    write_bytes(&stem.with_extension("vol"), &bytes)?;

    let mut meta = String::new();
    meta.push_str(&format!("subject_id = {}\n", volume.subject_id()));
    meta.push_str(&format!("voxels = {}\n", volume.voxels()));
    meta.push_str(&format!("times = {}\n", volume.times()));
    if let Some((w, h)) = volume.extents() {
        meta.push_str(&format!("width = {w}\nheight = {h}\n"));
    }
    write_bytes(&stem.with_extension("meta"), meta.as_bytes())
}

pub fn read_volume(stem: &Path) -> Result<Volume> {
    let meta_path = stem.with_extension("meta");
    let kvs = parse_key_values(&read_to_string(&meta_path)?, &meta_path);
    let kvs = kvs?;
    let get = |key: &str| -> Result<&str> {
        kvs.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| data_err(&meta_path, format!("missing key '{key}'")))
    };
    let parse_usize = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| data_err(&meta_path, format!("key '{key}' is not an integer")))
    };
    let voxels = parse_usize("voxels")?;
    let times = parse_usize("times")?;
    let subject_id = get("subject_id")?.to_string();
    let extents = if kvs.iter().any(|(k, _)| k == "width") {
        Some((parse_usize("width")?, parse_usize("height")?))
    } else {
        None
    };

    let vol_path = stem.with_extension("vol");
    let bytes = fs::read(&vol_path).map_err(|e| data_err(&vol_path, e.to_string()))?;
    if bytes.len() != voxels * times * 4 {
        return Err(data_err(
            &vol_path,
            format!("expected {} bytes, found {}", voxels * times * 4, bytes.len()),
        ));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Volume::from_flat(data, voxels, times, extents, subject_id)
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

/// One subject entry in a study manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub group: String,
    pub stem: String,
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut text = String::from("subject_id,group,stem\n");
    for e in entries {
        text.push_str(&format!("{},{},{}\n", e.subject_id, e.group, e.stem));
    }
    write_bytes(path, text.as_bytes())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("subject_id,group,stem") => {}
        _ => return Err(data_err(path, "missing manifest header")),
    }
    let mut entries = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(data_err(path, format!("bad manifest line '{line}'")));
        }
        entries.push(ManifestEntry {
            subject_id: fields[0].to_string(),
            group: fields[1].to_string(),
            stem: fields[2].to_string(),
        });
    }
    if entries.is_empty() {
        return Err(data_err(path, "manifest lists no subjects"));
    }
    Ok(entries)
}

/// Condition labels in `[0, J)` from manifest group names, ordered by first
/// appearance. Returns the labels and the distinct group names.
pub fn manifest_labels(entries: &[ManifestEntry]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    let labels = entries
        .iter()
        .map(|e| {
            if let Some(i) = names.iter().position(|n| *n == e.group) {
                i
            } else {
                names.push(e.group.clone());
                names.len() - 1
            }
        })
        .collect();
    (labels, names)
}

// ---------------------------------------------------------------------------
// SOMs
// ---------------------------------------------------------------------------

pub fn write_som(path: &Path, som: &Som) -> Result<()> {
    let mut text = String::new();
    text.push_str(&format!("k1 = {}\n", som.grid().k1()));
    text.push_str(&format!("k2 = {}\n", som.grid().k2()));
    text.push_str(&format!("times = {}\n", som.times()));
    text.push_str(&format!("voxels = {}\n", som.assignment().voxels()));
    text.push_str("weights:\n");
    for w in som.weights() {
        let row: Vec<String> = w.iter().map(|x| format!("{x}")).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    text.push_str("assignment:\n");
    let asg: Vec<String> = som.assignment().bmu_slice().iter().map(|k| k.to_string()).collect();
    text.push_str(&asg.join(" "));
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_som(path: &Path) -> Result<Som> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    let mut header = Vec::new();
    for line in lines.by_ref() {
        if line == "weights:" {
            break;
        }
        header.push(line.to_string());
    }
    let kvs = parse_key_values(&header.join("\n"), path)?;
    let get_usize = |key: &str| -> Result<usize> {
        kvs.iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.parse().ok())
            .ok_or_else(|| data_err(path, format!("missing or invalid key '{key}'")))
    };
    let k1 = get_usize("k1")?;
    let k2 = get_usize("k2")?;
    let times = get_usize("times")?;
    let voxels = get_usize("voxels")?;
    let grid = GridSpec::new(k1, k2)?;

    let mut weights = Vec::with_capacity(grid.units());
    for _ in 0..grid.units() {
        let line = lines
            .next()
            .ok_or_else(|| data_err(path, "truncated weights section"))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| data_err(path, format!("bad weight '{t}'"))))
            .collect::<Result<_>>()?;
        if row.len() != times {
            return Err(data_err(path, "weight row length disagrees with header"));
        }
        weights.push(row);
    }
    if lines.next() != Some("assignment:") {
        return Err(data_err(path, "missing assignment section"));
    }
    let asg_line = lines
        .next()
        .ok_or_else(|| data_err(path, "truncated assignment section"))?;
    let bmus: Vec<usize> = asg_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| data_err(path, format!("bad unit index '{t}'"))))
        .collect::<Result<_>>()?;
    if bmus.len() != voxels {
        return Err(data_err(path, "assignment length disagrees with header"));
    }
    Som::new(grid, weights, Assignment::new(bmus, grid.units())?)
}

// ---------------------------------------------------------------------------
// Distance matrices
// ---------------------------------------------------------------------------

pub fn write_distance_matrix(path: &Path, d: &DistanceMatrix) -> Result<()> {
    let mut text = format!("# metric={} closed={}\n", d.metric(), d.closed());
    for i in 0..d.len() {
        let row: Vec<String> = (0..d.len()).map(|j| format!("{}", d.get(i, j))).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_bytes(path, text.as_bytes())
}

pub fn read_distance_matrix(path: &Path) -> Result<DistanceMatrix> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| data_err(path, "empty file"))?;
    let header = header
        .strip_prefix("# ")
        .ok_or_else(|| data_err(path, "missing '# metric=... closed=...' header"))?;
    let mut metric = None;
    let mut closed = None;
    for token in header.split_whitespace() {
        match token.split_once('=') {
            Some(("metric", v)) => metric = Some(v.parse::<MetricKind>()?),
            Some(("closed", v)) => closed = v.parse::<bool>().ok(),
            _ => return Err(data_err(path, format!("unknown header token '{token}'"))),
        }
    }
    let metric = metric.ok_or_else(|| data_err(path, "header lacks metric"))?;
    let closed = closed.ok_or_else(|| data_err(path, "header lacks closed flag"))?;

    let mut values = Vec::new();
    let mut n = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.parse().map_err(|_| data_err(path, format!("bad entry '{t}'"))))
            .collect::<Result<_>>()?;
        if n == 0 {
            n = row.len();
        } else if row.len() != n {
            return Err(data_err(path, "ragged matrix rows"));
        }
        values.extend(row);
    }
    if values.len() != n * n {
        return Err(data_err(path, "matrix is not square"));
    }
    DistanceMatrix::from_values(values, n, closed, metric)
}

// ---------------------------------------------------------------------------
// Test results
// ---------------------------------------------------------------------------

pub fn write_test_result(record_path: &Path, null_path: &Path, result: &TestResult) -> Result<()> {
    let kind = match result.statistic_kind {
        StatisticKind::T => "t",
        StatisticKind::F => "f",
    };
    let text = format!(
        "metric = {}\nstatistic_kind = {}\nstatistic = {}\np_value = {}\npermutations = {}\nseed = {}\ndelta0 = {}\n",
        result.metric,
        kind,
        result.statistic,
        result.p_value,
        result.permutations,
        result.seed,
        result.delta0,
    );
    write_bytes(record_path, text.as_bytes())?;

    let mut null_csv = String::with_capacity(result.null_distribution.len() * 8);
    for v in &result.null_distribution {
        null_csv.push_str(&format!("{v}\n"));
    }
    write_bytes(null_path, null_csv.as_bytes())
}

pub fn read_test_result_p_value(record_path: &Path) -> Result<f64> {
    let kvs = parse_key_values(&read_to_string(record_path)?, record_path)?;
    kvs.iter()
        .find(|(k, _)| k == "p_value")
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| data_err(record_path, "missing or invalid p_value"))
}

// ---------------------------------------------------------------------------
// Rankings, references, overlap tables
// ---------------------------------------------------------------------------

pub fn write_ranking(path: &Path, ranking: &UnitRanking) -> Result<()> {
    let mut text = String::from("rank,unit,sample_jaccard\n");
    for (rank, &unit) in ranking.order().iter().enumerate() {
        text.push_str(&format!("{},{},{}\n", rank + 1, unit, ranking.value(unit)));
    }
    write_bytes(path, text.as_bytes())
}

/// Reads a binary reference map: whitespace-separated 0/1 tokens.
pub fn read_reference_map(path: &Path) -> Result<Vec<bool>> {
    let text = read_to_string(path)?;
    let map: Vec<bool> = text
        .split_whitespace()
        .map(|t| match t {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(data_err(path, format!("expected 0 or 1, found '{other}'"))),
        })
        .collect::<Result<_>>()?;
    if map.is_empty() {
        return Err(data_err(path, "reference map is empty"));
    }
    Ok(map)
}

/// Writes an overlap report: rows are ranked units, one column of overlap
/// fractions per condition.
pub fn write_overlap_table(
    path: &Path,
    conditions: &[String],
    per_condition: &[Vec<(usize, f64)>],
) -> Result<()> {
    let mut text = String::from("rank");
    for c in conditions {
        text.push_str(&format!(",{c}_unit,{c}_overlap"));
    }
    text.push('\n');
    let rows = per_condition.first().map_or(0, |r| r.len());
    for rank in 0..rows {
        text.push_str(&format!("{}", rank + 1));
        for column in per_condition {
            let (unit, frac) = column[rank];
            text.push_str(&format!(",{unit},{frac}"));
        }
        text.push('\n');
    }
    write_bytes(path, text.as_bytes())
}

// ---------------------------------------------------------------------------
// Misc
// ---------------------------------------------------------------------------

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

pub fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| data_err(path, e.to_string()))?;
    writeln!(file, "{line}").map_err(|e| data_err(path, e.to_string()))
}

pub fn list_files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| data_err(dir, e.to_string()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(ext))
        .collect();
    files.sort();
    Ok(files)
}
