//! Seeded generator for the three synthetic scenarios: groups differing in
//! both space and time (SC1), in time only (SC2), or in space only (SC3).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use crate::volume::Volume;

/// Peak-to-peak amplitude of the sinusoidal signals.
pub const SIGNAL_AMPLITUDE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Spatio-temporal group difference.
    Sc1,
    /// Temporal difference only; masks identical across groups.
    Sc2,
    /// Spatial difference only; profile sets identical across groups.
    Sc3,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Sc1 => "SC1",
            Scenario::Sc2 => "SC2",
            Scenario::Sc3 => "SC3",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SC1" => Ok(Scenario::Sc1),
            "SC2" => Ok(Scenario::Sc2),
            "SC3" => Ok(Scenario::Sc3),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}', expected SC1, SC2 or SC3"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    A,
    B,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::A, Group::B];

    pub fn label(&self) -> usize {
        match self {
            Group::A => 0,
            Group::B => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Group::A => "A",
            Group::B => "B",
        }
    }
}

/// The three canonical time-series profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// Sinusoid with a 10-sample period.
    Signal1,
    /// Sinusoid with a 20-sample period.
    Signal2,
    /// Pure noise.
    Background,
}

/// One simulated study design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub width: usize,
    pub height: usize,
    pub times: usize,
    pub snr: f64,
    pub n_per_group: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, snr: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            scenario,
            width: 10,
            height: 10,
            times: 50,
            snr,
            n_per_group: 20,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.snr > 0.0) {
            return Err(Error::Config(format!("SNR must be positive, got {}", self.snr)));
        }
        if self.width < 1 || self.height < 1 || self.times < 2 || self.n_per_group < 1 {
            return Err(Error::Config(
                "width, height, n_per_group must be >= 1 and T >= 2".into(),
            ));
        }
        Ok(())
    }

    /// Noise standard deviation implied by the SNR: `sigma = amplitude / (2 snr)`.
    pub fn noise_sigma(&self) -> f64 {
        SIGNAL_AMPLITUDE / (2.0 * self.snr)
    }

    pub fn voxels(&self) -> usize {
        self.width * self.height
    }
}

/// Noiseless profile value at 1-based sample `t` (1 second per sample).
fn profile_value(kind: ProfileKind, t: usize) -> f64 {
    match kind {
        ProfileKind::Signal1 => (2.0 * PI * 0.1 * t as f64).sin(),
        ProfileKind::Signal2 => (2.0 * PI * 0.05 * t as f64).sin(),
        ProfileKind::Background => 0.0,
    }
}

/// A length-`times` profile plus i.i.d. Gaussian noise drawn from `seed`.
pub fn make_profile(kind: ProfileKind, times: usize, noise_sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).expect("sigma is non-negative");
    (1..=times)
        .map(|t| profile_value(kind, t) + if noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 })
        .collect()
}

/// Signal blocks are image quadrants, so a quarter of the voxels carry each
/// placed signal (5x5 on the default 10x10 image).
fn block_dims(spec: &ScenarioSpec) -> (usize, usize) {
    ((spec.height / 2).max(1), (spec.width / 2).max(1))
}

/// Block of voxel indices with its top-left corner at (row, col).
fn block(spec: &ScenarioSpec, row: usize, col: usize) -> Vec<usize> {
    let (rows, cols) = block_dims(spec);
    let mut out = Vec::with_capacity(rows * cols);
    for r in row..(row + rows).min(spec.height) {
        for c in col..(col + cols).min(spec.width) {
            out.push(r * spec.width + c);
        }
    }
    out
}

/// Signal placement for one group: `(signal1 voxels, signal2 voxels)`.
/// All remaining voxels carry the background profile.
pub fn signal_layout(spec: &ScenarioSpec, group: Group) -> (Vec<usize>, Vec<usize>) {
    let (rows, cols) = block_dims(spec);
    let far_r = spec.height - rows;
    let far_c = spec.width - cols;
    match (spec.scenario, group) {
        // SC1: group A carries signal1 top-left, group B signal2 bottom-right
        (Scenario::Sc1, Group::A) => (block(spec, 0, 0), Vec::new()),
        (Scenario::Sc1, Group::B) => (Vec::new(), block(spec, far_r, far_c)),
        // SC2: same block in both groups, different profile
        (Scenario::Sc2, Group::A) => (block(spec, 0, 0), Vec::new()),
        (Scenario::Sc2, Group::B) => (Vec::new(), block(spec, 0, 0)),
        // SC3: same profiles, signal2 placed differently per group
        (Scenario::Sc3, Group::A) => (block(spec, 0, 0), block(spec, 0, far_c)),
        (Scenario::Sc3, Group::B) => (block(spec, 0, 0), block(spec, far_r, 0)),
    }
}

/// Deterministic per-subject volume: every voxel gets its profile plus its
/// own noise stream derived from `(seed, group, subject, voxel)`.
pub fn generate_subject(spec: &ScenarioSpec, group: Group, subject_index: usize) -> Result<Volume> {
    spec.validate()?;
    let (signal1, signal2) = signal_layout(spec, group);
    let mut kinds = vec![ProfileKind::Background; spec.voxels()];
    for &v in &signal1 {
        kinds[v] = ProfileKind::Signal1;
    }
    for &v in &signal2 {
        kinds[v] = ProfileKind::Signal2;
    }
    let sigma = spec.noise_sigma();
    let rows: Vec<Vec<f64>> = kinds
        .iter()
        .enumerate()
        .map(|(v, &kind)| {
            let voxel_seed = derive_seed(
                spec.seed,
                &[group.label() as u64, subject_index as u64, v as u64],
            );
            make_profile(kind, spec.times, sigma, voxel_seed)
        })
        .collect();
    Volume::new(
        rows,
        Some((spec.width, spec.height)),
        format!("{}_{}_{:02}", spec.scenario, group.name(), subject_index),
    )
}

/// A full two-group study: group A subjects first, then group B.
pub fn generate_study(spec: &ScenarioSpec) -> Result<Vec<(Group, Volume)>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(2 * spec.n_per_group);
    for group in Group::BOTH {
        for i in 0..spec.n_per_group {
            out.push((group, generate_subject(spec, group, i)?));
        }
    }
    Ok(out)
}
