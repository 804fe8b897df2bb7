//! Pipeline orchestration behind the command-line interface: simulate,
//! train, dist, infer, rank, overlap, report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{
    bonferroni_adjust, permutation_test, restricted_frechet_mean, GroupedSample, StatisticKind,
    TestResult,
};
use crate::io;
use crate::jaccard::{overlap_report, sample_jaccard_index, UnitRanking};
use crate::metrics::{metric_closure, pairwise_distances, DistanceMatrix, MetricKind};
use crate::seeding::derive_seed;
use crate::som::{GridSpec, Som};
use crate::synth::{generate_study, Scenario, ScenarioSpec};
use crate::trainer::{train_batch, train_sequential, TrainingSchedule};
use crate::volume::Volume;

// seed-stream tags, one per pipeline stage
const STREAM_TRAIN: u64 = 1;
const STREAM_INFER: u64 = 2;
const STREAM_REPLICATE: u64 = 3;

/// Resolved run configuration. Defaults mirror the synthetic-study design:
/// 3x3 grid, 100 iterations, sigma0 = grid height, 100 permutations, 20
/// subjects per group.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub snr: f64,
    pub seed: u64,
    pub n_per_group: usize,
    pub width: usize,
    pub height: usize,
    pub times: usize,
    pub grid_k1: usize,
    pub grid_k2: usize,
    pub iterations: usize,
    pub sigma0: Option<f64>,
    pub sigma_min: f64,
    pub alpha0: f64,
    pub algorithm: Algorithm,
    pub permutations: usize,
    pub metrics: Vec<MetricKind>,
    pub statistic: StatisticKind,
    pub delta0: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Batch,
    Sequential,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Sc1,
            snr: 2.0,
            seed: 0,
            n_per_group: 20,
            width: 10,
            height: 10,
            times: 50,
            grid_k1: 3,
            grid_k2: 3,
            iterations: 100,
            sigma0: None,
            sigma_min: TrainingSchedule::DEFAULT_SIGMA_MIN,
            alpha0: TrainingSchedule::DEFAULT_ALPHA0,
            algorithm: Algorithm::Batch,
            permutations: 100,
            metrics: MetricKind::ALL.to_vec(),
            statistic: StatisticKind::T,
            delta0: 0.0,
            replicates: 20,
        }
    }
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("grid '{s}' must look like 3x3")))?;
    let k1 = a.trim().parse().map_err(|_| Error::Config(format!("bad grid height '{a}'")))?;
    let k2 = b.trim().parse().map_err(|_| Error::Config(format!("bad grid width '{b}'")))?;
    GridSpec::new(k1, k2)?;
    Ok((k1, k2))
}

fn parse_metrics(s: &str) -> Result<Vec<MetricKind>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(MetricKind::ALL.to_vec());
    }
    s.split(',').map(|t| t.trim().parse()).collect()
}

impl RunConfig {
    /// Applies `key = value` settings from a config file. Unknown keys are
    /// rejected.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::DataFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        for (key, value) in io::parse_key_values(&text, path)? {
            self.apply(&key, &value)?;
        }
        Ok(())
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid {what} '{value}'"));
        match key {
            "scenario" => self.scenario = value.parse()?,
            "snr" => self.snr = value.parse().map_err(|_| bad("snr"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "n_per_group" => self.n_per_group = value.parse().map_err(|_| bad("n_per_group"))?,
            "width" => self.width = value.parse().map_err(|_| bad("width"))?,
            "height" => self.height = value.parse().map_err(|_| bad("height"))?,
            "times" => self.times = value.parse().map_err(|_| bad("times"))?,
            "grid" => {
                let (k1, k2) = parse_grid(value)?;
                self.grid_k1 = k1;
                self.grid_k2 = k2;
            }
            "iterations" => self.iterations = value.parse().map_err(|_| bad("iterations"))?,
            "sigma0" => self.sigma0 = Some(value.parse().map_err(|_| bad("sigma0"))?),
            "sigma_min" => self.sigma_min = value.parse().map_err(|_| bad("sigma_min"))?,
            "alpha0" => self.alpha0 = value.parse().map_err(|_| bad("alpha0"))?,
            "algorithm" => {
                self.algorithm = match value {
                    "batch" => Algorithm::Batch,
                    "sequential" => Algorithm::Sequential,
                    _ => return Err(bad("algorithm")),
                }
            }
            "permutations" => self.permutations = value.parse().map_err(|_| bad("permutations"))?,
            "metric" | "metrics" => self.metrics = parse_metrics(value)?,
            "statistic" => {
                self.statistic = match value {
                    "t" => StatisticKind::T,
                    "f" => StatisticKind::F,
                    _ => return Err(bad("statistic")),
                }
            }
            "delta0" => self.delta0 = value.parse().map_err(|_| bad("delta0"))?,
            "replicates" => self.replicates = value.parse().map_err(|_| bad("replicates"))?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid_k1, self.grid_k2)
    }

    pub fn schedule(&self, seed: u64) -> Result<TrainingSchedule> {
        let grid = self.grid()?;
        Ok(TrainingSchedule {
            iterations: self.iterations,
            sigma0: self.sigma0.unwrap_or(grid.k1() as f64),
            sigma_min: self.sigma_min,
            alpha0: self.alpha0,
            seed,
        })
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec> {
        let spec = ScenarioSpec {
            scenario: self.scenario,
            width: self.width,
            height: self.height,
            times: self.times,
            snr: self.snr,
            n_per_group: self.n_per_group,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn resolved_text(&self) -> String {
        let metrics: Vec<&str> = self.metrics.iter().map(|m| m.name()).collect();
        format!(
            "scenario = {}\nsnr = {}\nseed = {}\nn_per_group = {}\nwidth = {}\nheight = {}\ntimes = {}\ngrid = {}x{}\niterations = {}\nsigma0 = {}\nsigma_min = {}\nalpha0 = {}\nalgorithm = {}\npermutations = {}\nmetrics = {}\nstatistic = {}\ndelta0 = {}\nreplicates = {}\n",
            self.scenario,
            self.snr,
            self.seed,
            self.n_per_group,
            self.width,
            self.height,
            self.times,
            self.grid_k1,
            self.grid_k2,
            self.iterations,
            self.sigma0.map_or("auto".to_string(), |s| s.to_string()),
            self.sigma_min,
            self.alpha0,
            match self.algorithm {
                Algorithm::Batch => "batch",
                Algorithm::Sequential => "sequential",
            },
            self.permutations,
            metrics.join(","),
            match self.statistic {
                StatisticKind::T => "t",
                StatisticKind::F => "f",
            },
            self.delta0,
            self.replicates,
        )
    }

    fn write_resolved(&self, run: &Path, stage: &str) -> Result<()> {
        io::write_text(&run.join(format!("{stage}_config.txt")), &self.resolved_text())
    }
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

/// Generates a synthetic study into `run`: one volume file pair per subject
/// plus a manifest.
pub fn cmd_simulate(cfg: &RunConfig, run: &Path) -> Result<()> {
    let spec = cfg.scenario_spec()?;
    let study = generate_study(&spec)?;
    let mut entries = Vec::with_capacity(study.len());
    for (group, volume) in &study {
        let stem = volume.subject_id().to_string();
        io::write_volume(&run.join(&stem), volume)?;
        entries.push(io::ManifestEntry {
            subject_id: volume.subject_id().to_string(),
            group: group.name().to_string(),
            stem,
        });
    }
    io::write_manifest(&run.join("manifest.txt"), &entries)?;
    cfg.write_resolved(run, "simulate")
}

fn load_study(run: &Path) -> Result<(Vec<io::ManifestEntry>, Vec<Volume>)> {
    let entries = io::read_manifest(&run.join("manifest.txt"))?;
    let volumes = entries
        .iter()
        .map(|e| io::read_volume(&run.join(&e.stem)))
        .collect::<Result<Vec<_>>>()?;
    Ok((entries, volumes))
}

fn train_all(cfg: &RunConfig, volumes: &[Volume]) -> Result<Vec<Som>> {
    let grid = cfg.grid()?;
    volumes
        .par_iter()
        .enumerate()
        .map(|(i, vol)| {
            let seed = derive_seed(cfg.seed, &[STREAM_TRAIN, i as u64]);
            let schedule = cfg.schedule(seed)?;
            match cfg.algorithm {
                Algorithm::Batch => train_batch(vol, grid, &schedule),
                Algorithm::Sequential => train_sequential(vol, grid, &schedule),
            }
        })
        .collect()
}

/// Trains one SOM per manifest subject into `run/soms/`.
pub fn cmd_train(cfg: &RunConfig, run: &Path) -> Result<()> {
    let (entries, volumes) = load_study(run)?;
    let soms = train_all(cfg, &volumes)?;
    for (entry, som) in entries.iter().zip(&soms) {
        io::write_som(&run.join("soms").join(format!("{}.som", entry.stem)), som)?;
    }
    cfg.write_resolved(run, "train")
}

fn load_soms(run: &Path) -> Result<(Vec<io::ManifestEntry>, Vec<Som>)> {
    let entries = io::read_manifest(&run.join("manifest.txt"))?;
    let soms = entries
        .iter()
        .map(|e| io::read_som(&run.join("soms").join(format!("{}.som", e.stem))))
        .collect::<Result<Vec<_>>>()?;
    Ok((entries, soms))
}

fn dist_paths(run: &Path, metric: MetricKind) -> (PathBuf, PathBuf) {
    let dir = run.join("dist");
    let tag = metric.name().to_ascii_lowercase();
    (dir.join(format!("{tag}_raw.csv")), dir.join(format!("{tag}_closed.csv")))
}

/// Writes raw and closed pairwise distance matrices per requested metric.
pub fn cmd_dist(cfg: &RunConfig, run: &Path) -> Result<()> {
    let (_, soms) = load_soms(run)?;
    for &metric in &cfg.metrics {
        let raw = pairwise_distances(&soms, metric)?;
        let closed = metric_closure(&raw)?;
        let (raw_path, closed_path) = dist_paths(run, metric);
        io::write_distance_matrix(&raw_path, &raw)?;
        io::write_distance_matrix(&closed_path, &closed)?;
    }
    cfg.write_resolved(run, "dist")
}

/// Restriction of a closed matrix to a member subset, preserving order.
fn submatrix(d: &DistanceMatrix, members: &[usize]) -> DistanceMatrix {
    let n = members.len();
    let mut values = vec![0.0; n * n];
    for (a, &i) in members.iter().enumerate() {
        for (b, &j) in members.iter().enumerate() {
            values[a * n + b] = d.get(i, j);
        }
    }
    DistanceMatrix::from_values(values, n, d.closed(), d.metric())
        .expect("restriction of a valid matrix is valid")
}

fn run_test(
    d: &DistanceMatrix,
    labels: Vec<usize>,
    cfg: &RunConfig,
    seed: u64,
) -> Result<TestResult> {
    let groups = GroupedSample::new(labels)?;
    permutation_test(d, &groups, cfg.permutations, seed, cfg.statistic, cfg.delta0)
}

/// Inference outputs for one metric.
pub struct InferOutcome {
    pub metric: MetricKind,
    /// `(condition a, condition b, result)` per comparison; a single entry
    /// for two-group designs, all pairs for more.
    pub comparisons: Vec<(String, String, TestResult)>,
    /// Bonferroni threshold when several comparisons were run.
    pub threshold: Option<f64>,
}

fn infer_metric(
    cfg: &RunConfig,
    metric: MetricKind,
    d: &DistanceMatrix,
    labels: &[usize],
    names: &[String],
) -> Result<InferOutcome> {
    let seed = derive_seed(cfg.seed, &[STREAM_INFER, metric as u64]);
    if names.len() == 2 || cfg.statistic == StatisticKind::F {
        let result = run_test(d, labels.to_vec(), cfg, seed)?;
        let (a, b) = if names.len() == 2 {
            (names[0].clone(), names[1].clone())
        } else {
            ("all".to_string(), "all".to_string())
        };
        return Ok(InferOutcome {
            metric,
            comparisons: vec![(a, b, result)],
            threshold: None,
        });
    }
    // more than two conditions under t: all pairwise tests with Bonferroni
    let mut comparisons = Vec::new();
    for j1 in 0..names.len() {
        for j2 in (j1 + 1)..names.len() {
            let members: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == j1 || l == j2)
                .map(|(i, _)| i)
                .collect();
            let sub = submatrix(d, &members);
            let sub_labels: Vec<usize> = members
                .iter()
                .map(|&i| if labels[i] == j1 { 0 } else { 1 })
                .collect();
            let pair_seed = derive_seed(seed, &[j1 as u64, j2 as u64]);
            let result = run_test(&sub, sub_labels, cfg, pair_seed)?;
            comparisons.push((names[j1].clone(), names[j2].clone(), result));
        }
    }
    let ps: Vec<f64> = comparisons.iter().map(|(_, _, r)| r.p_value).collect();
    let report = bonferroni_adjust(&ps, 0.05)?;
    Ok(InferOutcome {
        metric,
        comparisons,
        threshold: Some(report.threshold),
    })
}

/// Runs permutation inference per metric from the closed distance matrices,
/// writing one result record and one null-distribution CSV per comparison.
pub fn cmd_infer(cfg: &RunConfig, run: &Path) -> Result<()> {
    let entries = io::read_manifest(&run.join("manifest.txt"))?;
    let (labels, names) = io::manifest_labels(&entries);
    for &metric in &cfg.metrics {
        let (_, closed_path) = dist_paths(run, metric);
        let d = io::read_distance_matrix(&closed_path)?;
        let outcome = infer_metric(cfg, metric, &d, &labels, &names)?;
        let tag = metric.name().to_ascii_lowercase();
        let dir = run.join("infer");
        if outcome.comparisons.len() == 1 {
            let (_, _, result) = &outcome.comparisons[0];
            io::write_test_result(
                &dir.join(format!("{tag}_result.txt")),
                &dir.join(format!("{tag}_null.csv")),
                result,
            )?;
        } else {
            let mut table = String::from("comparison,p_value,statistic,significant\n");
            let threshold = outcome.threshold.unwrap_or(0.05);
            for (a, b, result) in &outcome.comparisons {
                let pair = format!("{a}_vs_{b}");
                io::write_test_result(
                    &dir.join(format!("{tag}_{pair}_result.txt")),
                    &dir.join(format!("{tag}_{pair}_null.csv")),
                    result,
                )?;
                table.push_str(&format!(
                    "{pair},{},{},{}\n",
                    result.p_value,
                    result.statistic,
                    result.p_value < threshold
                ));
            }
            table.push_str(&format!("# bonferroni_threshold = {threshold}\n"));
            io::write_text(&dir.join(format!("{tag}_pairwise.csv")), &table)?;
        }
    }
    cfg.write_resolved(run, "infer")
}

/// Group-mean SOM of a named condition under a metric: the restricted
/// Frechet mean member, identified from the closed matrix.
fn group_mean_som(
    run: &Path,
    metric: MetricKind,
    group: &str,
) -> Result<(Som, Vec<usize>, Vec<io::ManifestEntry>)> {
    let (entries, soms) = load_soms(run)?;
    let members: Vec<usize> = entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.group == group)
        .map(|(i, _)| i)
        .collect();
    if members.is_empty() {
        return Err(Error::Config(format!("no subjects in group '{group}'")));
    }
    let (_, closed_path) = dist_paths(run, metric);
    let d = io::read_distance_matrix(&closed_path)?;
    if d.len() != soms.len() {
        return Err(Error::DimensionMismatch {
            context: "distance matrix size vs manifest size",
            expected: soms.len(),
            found: d.len(),
        });
    }
    let mean_index = restricted_frechet_mean(&d, &members)?;
    Ok((soms[mean_index].clone(), members, entries))
}

fn ranking_for_group(cfg: &RunConfig, run: &Path, metric: MetricKind, group: &str) -> Result<(Som, UnitRanking)> {
    let _ = cfg;
    let (mean_som, members, entries) = group_mean_som(run, metric, group)?;
    let volumes: Vec<Volume> = members
        .iter()
        .map(|&i| io::read_volume(&run.join(&entries[i].stem)))
        .collect::<Result<_>>()?;
    let ranking = sample_jaccard_index(&mean_som, &volumes)?;
    Ok((mean_som, ranking))
}

/// Ranks the group-mean SOM's units by sample Jaccard index, one CSV per
/// condition.
pub fn cmd_rank(cfg: &RunConfig, run: &Path, metric: MetricKind) -> Result<()> {
    let entries = io::read_manifest(&run.join("manifest.txt"))?;
    let (_, names) = io::manifest_labels(&entries);
    let tag = metric.name().to_ascii_lowercase();
    for group in &names {
        let (_, ranking) = ranking_for_group(cfg, run, metric, group)?;
        io::write_ranking(
            &run.join("rank").join(format!("{group}_{tag}_ranking.csv")),
            &ranking,
        )?;
    }
    cfg.write_resolved(run, "rank")
}

/// Per-condition overlap fractions of ranked units against a binary
/// reference map, in one CSV with a column pair per condition.
pub fn cmd_overlap(cfg: &RunConfig, run: &Path, metric: MetricKind, reference_path: &Path) -> Result<()> {
    let reference = io::read_reference_map(reference_path)?;
    let entries = io::read_manifest(&run.join("manifest.txt"))?;
    let (_, names) = io::manifest_labels(&entries);
    let mut per_condition = Vec::new();
    for group in &names {
        let (mean_som, ranking) = ranking_for_group(cfg, run, metric, group)?;
        per_condition.push(overlap_report(&mean_som, &ranking, &reference)?);
    }
    let tag = metric.name().to_ascii_lowercase();
    io::write_overlap_table(
        &run.join("overlap").join(format!("overlap_{tag}.csv")),
        &names,
        &per_condition,
    )?;
    cfg.write_resolved(run, "overlap")
}

// ---------------------------------------------------------------------------
// Replicated reports
// ---------------------------------------------------------------------------

/// One full in-memory replicate: simulate, quantize through the volume file
/// format, train, build closed matrices, and test. Returns the p-value per
/// metric.
pub fn run_replicate(cfg: &RunConfig) -> Result<Vec<(MetricKind, f64)>> {
    let spec = cfg.scenario_spec()?;
    let study = generate_study(&spec)?;
    let volumes: Vec<Volume> = study.iter().map(|(_, v)| io::quantize_volume(v)).collect();
    let labels: Vec<usize> = study.iter().map(|(g, _)| g.label()).collect();
    let names = vec!["A".to_string(), "B".to_string()];
    let soms = train_all(cfg, &volumes)?;
    let mut out = Vec::with_capacity(cfg.metrics.len());
    for &metric in &cfg.metrics {
        let closed = metric_closure(&pairwise_distances(&soms, metric)?)?;
        let outcome = infer_metric(cfg, metric, &closed, &labels, &names)?;
        out.push((metric, outcome.comparisons[0].2.p_value));
    }
    Ok(out)
}

fn replicate_path(out: &Path, replicate: usize) -> PathBuf {
    out.join(format!("rep_{replicate:04}.csv"))
}

/// Replicated-study report: runs `cfg.replicates` seeded replicates (skipping
/// those already on disk, so interrupted runs resume), then aggregates all
/// replicate files into mean and standard deviation of the p-value per
/// metric.
pub fn cmd_report(cfg: &RunConfig, out: &Path, aggregate_only: bool) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::DataFile {
        path: out.display().to_string(),
        reason: e.to_string(),
    })?;
    if !aggregate_only {
        for rep in 0..cfg.replicates {
            let path = replicate_path(out, rep);
            if path.exists() {
                continue;
            }
            let mut rep_cfg = cfg.clone();
            rep_cfg.seed = derive_seed(cfg.seed, &[STREAM_REPLICATE, rep as u64]);
            let results = run_replicate(&rep_cfg)?;
            let mut text = String::from("metric,p_value\n");
            for (metric, p) in results {
                text.push_str(&format!("{},{}\n", metric.name(), p));
            }
            io::write_text(&path, &text)?;
        }
    }

    let files = io::list_files_with_extension(out, "csv")?;
    let rep_files: Vec<&PathBuf> = files
        .iter()
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("rep_"))
        })
        .collect();
    if rep_files.is_empty() {
        return Err(Error::DataFile {
            path: out.display().to_string(),
            reason: "no replicate results to aggregate".into(),
        });
    }

    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for path in &rep_files {
        let text = std::fs::read_to_string(path).map_err(|e| Error::DataFile {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        for line in text.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let (metric, p) = line.split_once(',').ok_or_else(|| Error::DataFile {
                path: path.display().to_string(),
                reason: format!("bad replicate line '{line}'"),
            })?;
            let p: f64 = p.parse().map_err(|_| Error::DataFile {
                path: path.display().to_string(),
                reason: format!("bad p-value '{p}'"),
            })?;
            per_metric.entry(metric.to_string()).or_default().push(p);
        }
    }

    let mut summary = String::from("metric,mean_p,sd_p,replicates\n");
    for (metric, ps) in &per_metric {
        let n = ps.len() as f64;
        let mean = ps.iter().sum::<f64>() / n;
        let sd = if ps.len() > 1 {
            (ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        summary.push_str(&format!("{metric},{mean},{sd},{}\n", ps.len()));
    }
    io::write_text(&out.join("summary.csv"), &summary)?;
    cfg.write_resolved(out, "report")
}

/// Mean p-value per metric from a finished report directory.
pub fn read_summary(out: &Path) -> Result<BTreeMap<String, f64>> {
    let path = out.join("summary.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::DataFile {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let mut map = BTreeMap::new();
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() == 4 {
            if let Ok(p) = fields[1].parse() {
                map.insert(fields[0].to_string(), p);
            }
        }
    }
    Ok(map)
}
