//! End-to-end acceptance checks. Each test prints a single PASS/FAIL line
//! for its criterion (visible with `--nocapture`).

use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use frechet_som::cli::{run_replicate, RunConfig};
use frechet_som::seeding::derive_seed;
use frechet_som::synth::{generate_study, Group, Scenario, ScenarioSpec};
use frechet_som::{
    f_statistic, metric_closure, overlap_report, pairwise_distances, restricted_frechet_mean,
    sample_jaccard_index, t_statistic, train_batch, Assignment, DistanceMatrix, GridSpec,
    GroupedSample, MetricKind, Som, TrainingSchedule, TRIANGLE_TOL,
};

fn verdict(criterion: usize, name: &str, ok: bool) {
    eprintln!(
        "ACCEPTANCE {criterion} ({name}): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "acceptance criterion {criterion} ({name}) failed");
}

fn random_som(rng: &mut ChaCha12Rng, grid: GridSpec, voxels: usize, times: usize) -> Som {
    let k = grid.units();
    let weights = (0..k)
        .map(|_| (0..times).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let bmus = (0..voxels).map(|_| rng.random_range(0..k)).collect();
    Som::new(grid, weights, Assignment::new(bmus, k).unwrap()).unwrap()
}

/// Criterion 1: after closure, every metric satisfies the metric axioms on
/// hundreds of random map pairs and triples.
#[test]
fn metric_axioms_after_closure() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    let grid = GridSpec::new(2, 3).unwrap();
    let mut ok = true;
    for metric in MetricKind::ALL {
        // 10 samples of 10 maps: 450 pairs and 1200 triples per metric
        for _ in 0..10 {
            let sample: Vec<Som> = (0..10).map(|_| random_som(&mut rng, grid, 15, 5)).collect();
            let closed = metric_closure(&pairwise_distances(&sample, metric).unwrap()).unwrap();
            let n = closed.len();
            for i in 0..n {
                ok &= closed.get(i, i) == 0.0;
                for j in 0..n {
                    ok &= closed.get(i, j) >= 0.0;
                    ok &= closed.get(i, j) == closed.get(j, i);
                    for k in 0..n {
                        ok &= closed.get(i, j) <= closed.get(i, k) + closed.get(k, j) + TRIANGLE_TOL;
                    }
                }
            }
        }
    }
    verdict(1, "metric axioms after closure", ok);
}

/// Brute-force statistics on a small labelled metric space, straight from
/// the definitions.
mod oracle {
    use super::DistanceMatrix;

    pub fn mean(d: &DistanceMatrix, members: &[usize]) -> usize {
        let sums: Vec<f64> = members
            .iter()
            .map(|&c| members.iter().map(|&i| d.get(i, c).powi(2)).sum())
            .collect();
        let best = sums
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        members[best]
    }

    pub fn variance(d: &DistanceMatrix, members: &[usize]) -> f64 {
        let m = mean(d, members);
        members.iter().map(|&i| d.get(i, m).powi(2)).sum::<f64>() / (members.len() - 1) as f64
    }

    pub fn t(d: &DistanceMatrix, g1: &[usize], g2: &[usize], delta0: f64) -> f64 {
        let (m1, m2) = (mean(d, g1), mean(d, g2));
        let (n1, n2) = (g1.len() as f64, g2.len() as f64);
        let sp2 =
            ((n1 - 1.0) * variance(d, g1) + (n2 - 1.0) * variance(d, g2)) / (n1 + n2 - 2.0);
        (d.get(m1, m2) - delta0) / (sp2.sqrt() * (1.0 / n1 + 1.0 / n2).sqrt())
    }

    pub fn f(d: &DistanceMatrix, groups: &[Vec<usize>]) -> f64 {
        let all: Vec<usize> = groups.iter().flatten().copied().collect();
        let grand = mean(d, &all);
        let j = groups.len() as f64;
        let n = all.len() as f64;
        let ss1: f64 = groups
            .iter()
            .map(|g| g.len() as f64 * d.get(mean(d, g), grand).powi(2))
            .sum::<f64>()
            / (j - 1.0);
        let ss0: f64 = groups
            .iter()
            .map(|g| {
                let m = mean(d, g);
                g.iter().map(|&i| d.get(i, m).powi(2)).sum::<f64>()
            })
            .sum::<f64>()
            / (n - j);
        ss1 / ss0
    }
}

/// Random small metric space: random symmetric dissimilarities repaired by
/// closure.
fn random_space(rng: &mut ChaCha12Rng, n: usize) -> DistanceMatrix {
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.random_range(0.5..10.0);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    metric_closure(&DistanceMatrix::from_values(values, n, false, MetricKind::TSmd).unwrap())
        .unwrap()
}

/// Criterion 2: the inference statistics agree with direct evaluation of
/// their definitions on small spaces.
#[test]
fn statistics_match_brute_force() {
    let mut rng = ChaCha12Rng::seed_from_u64(23);
    let mut ok = true;
    for _ in 0..200 {
        let n = rng.random_range(4..=8);
        let d = random_space(&mut rng, n);
        let split = rng.random_range(2..=(n - 2));
        let g1: Vec<usize> = (0..split).collect();
        let g2: Vec<usize> = (split..n).collect();
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= split)).collect();
        let groups = GroupedSample::new(labels).unwrap();

        ok &= restricted_frechet_mean(&d, &g1).unwrap() == oracle::mean(&d, &g1);
        let m1 = restricted_frechet_mean(&d, &g1).unwrap();
        ok &= (frechet_som::frechet_variance(&d, &g1, m1).unwrap() - oracle::variance(&d, &g1))
            .abs()
            < 1e-12;

        let t_lib = t_statistic(&d, &groups, 0.3, false).unwrap();
        ok &= (t_lib - oracle::t(&d, &g1, &g2, 0.3)).abs() < 1e-10;

        let f_lib = f_statistic(&d, &groups).unwrap().statistic;
        ok &= (f_lib - oracle::f(&d, &[g1, g2])).abs() < 1e-10;
    }
    verdict(2, "statistics match brute force", ok);
}

fn study_cfg(scenario: Scenario, snr: f64, metrics: &[MetricKind]) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.scenario = scenario;
    cfg.snr = snr;
    cfg.metrics = metrics.to_vec();
    cfg
}

/// Mean p-value per metric over seeded replicates.
fn replicate_means(cfg: &RunConfig, replicates: usize, base_seed: u64) -> Vec<(MetricKind, f64)> {
    let mut sums = vec![0.0; cfg.metrics.len()];
    for rep in 0..replicates {
        let mut rep_cfg = cfg.clone();
        rep_cfg.seed = derive_seed(base_seed, &[rep as u64]);
        for (s, (_, p)) in sums.iter_mut().zip(run_replicate(&rep_cfg).unwrap()) {
            *s += p;
        }
    }
    cfg.metrics
        .iter()
        .zip(sums)
        .map(|(&m, s)| (m, s / replicates as f64))
        .collect()
}

fn mean_p(means: &[(MetricKind, f64)], metric: MetricKind) -> f64 {
    means.iter().find(|(m, _)| *m == metric).unwrap().1
}

/// Criterion 3: the replicated synthetic studies separate the scenarios the
/// way the study design predicts — temporal differences show on T-SMD,
/// spatial ones on S-SMD, and each metric stays blind to the other kind.
#[test]
fn scenario_study_pattern() {
    let reps = 20;
    let sc1 = replicate_means(&study_cfg(Scenario::Sc1, 2.0, &MetricKind::ALL), reps, 101);
    let sc2 = replicate_means(&study_cfg(Scenario::Sc2, 2.0, &MetricKind::ALL), reps, 102);
    let sc3 = replicate_means(&study_cfg(Scenario::Sc3, 2.0, &MetricKind::ALL), reps, 103);
    eprintln!("SC1 mean p: {sc1:?}");
    eprintln!("SC2 mean p: {sc2:?}");
    eprintln!("SC3 mean p: {sc3:?}");

    let ok = mean_p(&sc1, MetricKind::TSmd) <= 0.05
        && mean_p(&sc1, MetricKind::StSmd) <= 0.05
        && mean_p(&sc2, MetricKind::TSmd) <= 0.05
        && (0.25..=0.75).contains(&mean_p(&sc2, MetricKind::SSmd))
        && mean_p(&sc3, MetricKind::SSmd) <= 0.10
        && mean_p(&sc3, MetricKind::TSmd) >= 0.25;
    verdict(3, "synthetic scenario separation", ok);
}

/// Criterion 4: lowering the signal-to-noise ratio weakens the spatial
/// evidence in the spatially separated scenario.
#[test]
fn snr_degrades_power() {
    let reps = 20;
    let metrics = [MetricKind::SSmd];
    let low = replicate_means(&study_cfg(Scenario::Sc1, 0.5, &metrics), reps, 201);
    let high = replicate_means(&study_cfg(Scenario::Sc1, 2.0, &metrics), reps, 201);
    eprintln!("S-SMD mean p at SNR 0.5: {:.4}, at SNR 2: {:.4}", low[0].1, high[0].1);
    verdict(4, "lower SNR weakens evidence", low[0].1 > high[0].1);
}

/// Criterion 5: the temporal result is stable under the map grid choice.
#[test]
fn grid_choice_robustness() {
    let reps = 10;
    let mut ok = true;
    for (k1, k2) in [(5, 5), (4, 6)] {
        let mut cfg = study_cfg(Scenario::Sc2, 1.0, &[MetricKind::TSmd]);
        cfg.grid_k1 = k1;
        cfg.grid_k2 = k2;
        let means = replicate_means(&cfg, reps, 301);
        eprintln!("grid {k1}x{k2} T-SMD mean p: {:.4}", means[0].1);
        ok &= means[0].1 <= 0.05;
    }
    verdict(5, "grid robustness", ok);
}

/// Criterion 6: overlap fractions across a map's units always partition the
/// reference mass.
#[test]
fn overlap_partitions_reference() {
    let spec = ScenarioSpec {
        scenario: Scenario::Sc1,
        width: 8,
        height: 8,
        times: 30,
        snr: 2.0,
        n_per_group: 4,
        seed: 9,
    };
    let study = generate_study(&spec).unwrap();
    let grid = GridSpec::new(3, 3).unwrap();
    let mut ok = true;
    for wanted in [Group::A, Group::B] {
        let volumes: Vec<_> = study
            .iter()
            .filter(|(g, _)| *g == wanted)
            .map(|(_, v)| v.clone())
            .collect();
        let soms: Vec<Som> = volumes
            .iter()
            .enumerate()
            .map(|(i, v)| {
                train_batch(v, grid, &TrainingSchedule::for_grid(grid, i as u64)).unwrap()
            })
            .collect();
        let closed =
            metric_closure(&pairwise_distances(&soms, MetricKind::StSmd).unwrap()).unwrap();
        let members: Vec<usize> = (0..soms.len()).collect();
        let mean_som = &soms[restricted_frechet_mean(&closed, &members).unwrap()];
        let ranking = sample_jaccard_index(mean_som, &volumes).unwrap();
        // several reference shapes, including a single-voxel one
        let voxels = spec.width * spec.height;
        let refs = [
            (0..voxels).map(|v| v % 3 == 0).collect::<Vec<bool>>(),
            (0..voxels).map(|v| v == 5).collect(),
            vec![true; voxels],
        ];
        for reference in &refs {
            let report = overlap_report(mean_som, &ranking, reference).unwrap();
            let total: f64 = report.iter().map(|(_, f)| f).sum();
            ok &= (total - 1.0).abs() < 1e-12;
        }
    }
    verdict(6, "overlap partitions the reference", ok);
}

// ---------------------------------------------------------------------------
// Command-line pipeline criteria
// ---------------------------------------------------------------------------

fn run_bin(args: &[&str], workers: &str) {
    let status = Command::new(env!("CARGO_BIN_EXE_frechet-som"))
        .args(args)
        .args(["--workers", workers])
        .status()
        .unwrap();
    assert!(status.success(), "frechet-som {args:?} failed");
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn run_pipeline(run: &Path, workers: &str) {
    let run = run.to_str().unwrap();
    run_bin(
        &["simulate", run, "--scenario", "SC2", "--n-per-group", "3", "--seed", "7"],
        workers,
    );
    run_bin(&["train", run, "--iterations", "15", "--seed", "7"], workers);
    run_bin(&["dist", run], workers);
    run_bin(&["infer", run, "--permutations", "25", "--seed", "7"], workers);
    run_bin(&["rank", run, "--metric", "t-smd"], workers);
}

/// Criterion 7: the pipeline's artifacts are byte-identical across repeated
/// runs and across worker counts.
#[test]
fn pipeline_is_reproducible() {
    let base = tempfile::tempdir().unwrap();
    let dirs = [base.path().join("a"), base.path().join("b"), base.path().join("c")];
    run_pipeline(&dirs[0], "1");
    run_pipeline(&dirs[1], "1");
    run_pipeline(&dirs[2], "4");
    let a = dir_bytes(&dirs[0]);
    let ok = a == dir_bytes(&dirs[1]) && a == dir_bytes(&dirs[2]);
    verdict(7, "byte-identical reruns", ok);
}

/// Criterion 8: a hand-assembled three-condition study goes through the
/// whole pipeline and yields a pairwise Bonferroni-corrected report.
#[test]
fn three_condition_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path();
    let spec = ScenarioSpec {
        scenario: Scenario::Sc1,
        width: 6,
        height: 6,
        times: 20,
        snr: 2.0,
        n_per_group: 3,
        seed: 31,
    };
    let study = generate_study(&spec).unwrap();
    let mut manifest = String::from("subject_id,group,stem\n");
    for (i, (_, vol)) in study.iter().enumerate() {
        let stem = format!("subj{i}");
        frechet_som::io::write_volume(&run.join(&stem), vol).unwrap();
        manifest.push_str(&format!("{stem},C{},{stem}\n", i % 3));
    }
    std::fs::write(run.join("manifest.txt"), manifest).unwrap();

    let run_s = run.to_str().unwrap();
    run_bin(&["train", run_s, "--iterations", "15", "--seed", "3"], "1");
    run_bin(&["dist", run_s], "1");
    run_bin(&["infer", run_s, "--permutations", "25", "--seed", "3"], "1");

    let mut ok = true;
    for metric in ["t-smd", "s-smd", "st-smd"] {
        let table =
            std::fs::read_to_string(run.join(format!("infer/{metric}_pairwise.csv"))).unwrap();
        // three comparisons plus header and the Bonferroni threshold line
        ok &= table.lines().count() == 5;
        ok &= table.contains("bonferroni_threshold = 0.016666666666666666");
        for pair in ["C0_vs_C1", "C0_vs_C2", "C1_vs_C2"] {
            ok &= table.contains(pair);
        }
    }
    verdict(8, "three-condition report", ok);
}
