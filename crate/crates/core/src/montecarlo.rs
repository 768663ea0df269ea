//! Monte Carlo estimation of stationary statistics.
//!
//! Samples long trajectories of the stochastic dynamics and estimates the
//! stationary activity of the central node, together with the empirical
//! frequencies of its neighbourhood patterns.  Error bars come from the
//! method of batch means.  All randomness is derived from a single master
//! seed through a documented, platform-independent scheme, so every result
//! is reproducible bit for bit.
//!
//! Seed derivation: stream `cell` of master seed `s` uses the 64-bit value
//! `splitmix64_mix(s + (cell + 1) * 0x9E3779B97F4A7C15)` (wrapping
//! arithmetic), i.e. the `cell`-th output of the standard SplitMix64
//! generator seeded with `s`.  That value in turn seeds a ChaCha8 stream
//! cipher RNG: the 32-byte ChaCha key is the little-endian concatenation of
//! the first four SplitMix64 outputs seeded with the derived value.
//! Parallel sweeps assign disjoint cells to worker threads, so the thread
//! schedule cannot affect any sampled number.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::dynamics::{activation_table, NeighbourMask, PotentialSet, UpdateMode};
use crate::error::{Error, Result};
use crate::lattice::{NetworkTopology, Neighbour};
use crate::projectivity::{phase_transition_report, subset_index};

/// Number of batches used by the batch-means variance estimator.
pub const DEFAULT_BATCHES: u32 = 20;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function (mixing stage only).
fn splitmix64_mix(state: u64) -> u64 {
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `cell`-th output of a SplitMix64 generator seeded with `master`.
///
/// Used to hand independent sub-seeds to the individual runs of a sweep or
/// of a boundary comparison without any sequential RNG state.
pub fn derive_seed(master: u64, cell: u64) -> u64 {
    splitmix64_mix(master.wrapping_add(cell.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Deterministically builds the trajectory RNG for a 64-bit seed.
pub fn rng_for_seed(seed: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&derive_seed(seed, i as u64).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform double in `[0, 1)` built from the top 53 bits of one RNG draw.
fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in `0..n` by rejection sampling (no modulo bias).
fn uniform_index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    let n64 = n as u64;
    // Largest multiple of n representable in u64, minus one.
    let zone = u64::MAX - (u64::MAX % n64 + 1) % n64;
    loop {
        let x = rng.next_u64();
        if x <= zone {
            return (x % n64) as usize;
        }
    }
}

/// A fully specified sampling run.
#[derive(Debug, Clone)]
pub struct SimulationPlan<'a> {
    pub topology: &'a NetworkTopology,
    pub potentials: PotentialSet,
    /// Clamped value of every boundary cell (0 or 1).
    pub boundary: u8,
    pub mode: UpdateMode,
    /// Sweeps discarded before any statistic is recorded.
    pub burn_in: u64,
    /// Sweeps executed after burn-in.
    pub samples: u64,
    /// A record is taken every `thinning` sweeps.
    pub thinning: u64,
    pub seed: u64,
}

impl SimulationPlan<'_> {
    fn validate(&self) -> Result<()> {
        if self.boundary > 1 {
            return Err(Error::InvalidPlan(format!(
                "boundary value must be 0 or 1, got {}",
                self.boundary
            )));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidPlan("thinning must be at least 1".into()));
        }
        let min_samples = 10 * DEFAULT_BATCHES as u64;
        if self.samples < min_samples {
            return Err(Error::InvalidPlan(format!(
                "need at least {min_samples} sample sweeps, got {}",
                self.samples
            )));
        }
        let recorded = self.samples / self.thinning;
        if recorded < DEFAULT_BATCHES as u64 {
            return Err(Error::InvalidPlan(format!(
                "thinning {} leaves {} records, fewer than the {} batches",
                self.thinning, recorded, DEFAULT_BATCHES
            )));
        }
        Ok(())
    }
}

/// Batch-means estimate of a stationary expectation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of the mean from `batches` batch means.
    pub stderr: f64,
    /// Number of records actually used (truncated to a whole number of batches).
    pub n_samples: u64,
    pub batches: u32,
}

/// Empirical frequencies of the central neighbourhood patterns.
///
/// Slot `c` counts the records whose set of *inactive* central neighbours
/// is the canonical subset with index `c`, so slot 0 is the fully active
/// pattern and slot 15 the fully inactive one.
#[derive(Debug, Clone, Serialize)]
pub struct CylinderFrequencies {
    pub counts: [u64; 16],
    pub total: u64,
}

impl CylinderFrequencies {
    /// Relative frequency of pattern `c`.
    pub fn freq(&self, c: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.counts[c] as f64 / self.total as f64
        }
    }
}

/// Result of one sampling run.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationOutput {
    /// Stationary activity of the central node.
    pub estimate: Estimate,
    /// Pattern frequencies of the central neighbourhood.
    pub neighbourhood: CylinderFrequencies,
}

/// Wiring of one free node: free in-neighbours plus clamped in-degree.
struct NodeWiring {
    free: [u32; 4],
    n_free: u8,
    n_boundary: u8,
}

fn wire_nodes(topology: &NetworkTopology) -> Vec<NodeWiring> {
    topology
        .free_nodes()
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let mut w = NodeWiring { free: [0; 4], n_free: 0, n_boundary: 0 };
            for nb in topology.neighbours(i) {
                match *nb {
                    Neighbour::Free(j) => {
                        w.free[w.n_free as usize] = j as u32;
                        w.n_free += 1;
                    }
                    Neighbour::Boundary(_) => w.n_boundary += 1,
                }
            }
            w
        })
        .collect()
}

fn active_count(states: &[u8], w: &NodeWiring, boundary: u8) -> usize {
    let mut m = (w.n_boundary * boundary) as usize;
    for k in 0..w.n_free as usize {
        m += states[w.free[k] as usize] as usize;
    }
    m
}

/// Runs the plan and returns the central-node estimate together with the
/// neighbourhood pattern frequencies.
pub fn simulate(plan: &SimulationPlan) -> Result<SimulationOutput> {
    plan.validate()?;
    let topology = plan.topology;
    let n = topology.free_nodes().len();
    let centre = topology.central_index();
    let wiring = wire_nodes(topology);
    let probs = activation_table(&plan.potentials);
    let mut rng = rng_for_seed(plan.seed);

    let mut states = vec![plan.boundary; n];
    let mut next = vec![0u8; n];

    let run_sweep = |states: &mut Vec<u8>, next: &mut Vec<u8>, rng: &mut ChaCha8Rng| {
        match plan.mode {
            UpdateMode::Synchronous => {
                for i in 0..n {
                    let m = active_count(states, &wiring[i], plan.boundary);
                    next[i] = (uniform_f64(rng) < probs[m]) as u8;
                }
                std::mem::swap(states, next);
            }
            UpdateMode::AsynchronousUniform => {
                for _ in 0..n {
                    let i = uniform_index(rng, n);
                    let m = active_count(states, &wiring[i], plan.boundary);
                    states[i] = (uniform_f64(rng) < probs[m]) as u8;
                }
            }
        }
    };

    for _ in 0..plan.burn_in {
        run_sweep(&mut states, &mut next, &mut rng);
    }

    let recorded = (plan.samples / plan.thinning) as usize;
    let mut centre_records: Vec<u8> = Vec::with_capacity(recorded);
    let mut pattern_records: Vec<u8> = Vec::with_capacity(recorded);
    for sweep_no in 1..=plan.samples {
        run_sweep(&mut states, &mut next, &mut rng);
        if sweep_no % plan.thinning == 0 {
            centre_records.push(states[centre]);
            let mut active = 0u8;
            for (slot, nb) in topology.neighbours(centre).iter().enumerate() {
                let bit = match *nb {
                    Neighbour::Free(j) => states[j],
                    Neighbour::Boundary(_) => plan.boundary,
                };
                active |= bit << slot;
            }
            pattern_records.push(active);
        }
    }

    // Truncate to a whole number of equal batches so every record carries
    // the same weight in both the mean and the variance estimate.
    let batches = DEFAULT_BATCHES as usize;
    let batch_len = centre_records.len() / batches;
    let used = batches * batch_len;

    let mut batch_means = [0.0f64; DEFAULT_BATCHES as usize];
    for (b, mean) in batch_means.iter_mut().enumerate() {
        let slice = &centre_records[b * batch_len..(b + 1) * batch_len];
        *mean = slice.iter().map(|&x| x as f64).sum::<f64>() / batch_len as f64;
    }
    let mean = batch_means.iter().sum::<f64>() / batches as f64;
    let var_of_means = batch_means
        .iter()
        .map(|&m| (m - mean) * (m - mean))
        .sum::<f64>()
        / (batches as f64 - 1.0);
    let stderr = (var_of_means / batches as f64).sqrt();

    let mut counts = [0u64; 16];
    for &active in &pattern_records[..used] {
        let inactive = NeighbourMask(!active & 0b1111);
        counts[subset_index(inactive)] += 1;
    }

    Ok(SimulationOutput {
        estimate: Estimate { mean, stderr, n_samples: used as u64, batches: DEFAULT_BATCHES },
        neighbourhood: CylinderFrequencies { counts, total: used as u64 },
    })
}

/// Sampling parameters shared by the runs of a comparison or a sweep.
#[derive(Debug, Clone, Copy)]
pub struct McParams {
    pub burn_in: u64,
    pub samples: u64,
    pub thinning: u64,
    pub seed: u64,
}

/// Monte Carlo estimate of the boundary influence on the central node.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaEstimate {
    /// Central activity under the all-zero boundary.
    pub p0: Estimate,
    /// Central activity under the all-one boundary.
    pub p1: Estimate,
    /// `p1.mean - p0.mean`.
    pub delta: f64,
    /// Standard error of `delta` (independent runs, so errors add in quadrature).
    pub stderr: f64,
}

/// Estimates the central activity under both clamped boundary values.
///
/// The two runs use seeds derived from cells 0 and 1 of the master seed, so
/// exchanging the two boundary values exchanges the two runs and exactly
/// negates the estimated difference.
pub fn boundary_influence_mc(
    topology: &NetworkTopology,
    potentials: &PotentialSet,
    mode: UpdateMode,
    params: &McParams,
) -> Result<DeltaEstimate> {
    let run = |boundary: u8| -> Result<Estimate> {
        let plan = SimulationPlan {
            topology,
            potentials: *potentials,
            boundary,
            mode,
            burn_in: params.burn_in,
            samples: params.samples,
            thinning: params.thinning,
            seed: derive_seed(params.seed, boundary as u64),
        };
        Ok(simulate(&plan)?.estimate)
    };
    let p0 = run(0)?;
    let p1 = run(1)?;
    Ok(DeltaEstimate {
        p0,
        p1,
        delta: p1.mean - p0.mean,
        stderr: (p0.stderr * p0.stderr + p1.stderr * p1.stderr).sqrt(),
    })
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    #[serde(rename = "T")]
    Temperature,
    W0,
    W1,
    W2,
    W3,
    W4,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepParam::Temperature => "T",
            SweepParam::W0 => "w0",
            SweepParam::W1 => "w1",
            SweepParam::W2 => "w2",
            SweepParam::W3 => "w3",
            SweepParam::W4 => "w4",
        };
        f.write_str(s)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T" => Ok(SweepParam::Temperature),
            "w0" => Ok(SweepParam::W0),
            "w1" => Ok(SweepParam::W1),
            "w2" => Ok(SweepParam::W2),
            "w3" => Ok(SweepParam::W3),
            "w4" => Ok(SweepParam::W4),
            other => Err(Error::InvalidSweep(format!(
                "unknown sweep parameter {other:?} (expected T or w0..w4)"
            ))),
        }
    }
}

impl SweepParam {
    /// Returns `base` with this parameter replaced by `value`.
    pub fn apply(self, base: &PotentialSet, value: f64) -> Result<PotentialSet> {
        let mut w = [0.0; 5];
        for (m, slot) in w.iter_mut().enumerate() {
            *slot = base.w(m);
        }
        let mut temperature = base.temperature();
        match self {
            SweepParam::Temperature => temperature = value,
            SweepParam::W0 => w[0] = value,
            SweepParam::W1 => w[1] = value,
            SweepParam::W2 => w[2] = value,
            SweepParam::W3 => w[3] = value,
            SweepParam::W4 => w[4] = value,
        }
        PotentialSet::new(temperature, base.order(), w)
    }
}

/// A sweep over one scalar parameter on a fixed grid.
#[derive(Debug, Clone, Copy)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    /// Number of grid points (at least 2; endpoints included).
    pub steps: u32,
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::InvalidSweep(format!(
                "a sweep needs at least 2 steps, got {}",
                self.steps
            )));
        }
        if !self.from.is_finite() || !self.to.is_finite() {
            return Err(Error::InvalidSweep("sweep endpoints must be finite".into()));
        }
        if self.param == SweepParam::Temperature && (self.from <= 0.0 || self.to <= 0.0) {
            return Err(Error::InvalidSweep(
                "temperature sweeps need strictly positive endpoints".into(),
            ));
        }
        Ok(())
    }

    fn value_at(&self, step: u32) -> f64 {
        let t = step as f64 / (self.steps - 1) as f64;
        self.from + t * (self.to - self.from)
    }
}

/// One grid point of a sweep, for one boundary value.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    pub boundary: u8,
    pub estimate: Estimate,
    /// Sub-seed actually used by this run.
    pub seed: u64,
    /// Alternating pattern sum of the local rule at this grid point.
    pub alt_sum: f64,
    /// Symmetry residual of the local rule at this grid point.
    pub symmetry_residual: f64,
    /// Signed interaction-matrix determinant at this grid point.
    pub det: f64,
}

/// Runs a parameter sweep, sampling both boundary values at every grid point.
///
/// Runs are independent (cell `2 * step + boundary` of the master seed), so
/// the grid is evaluated in parallel without affecting any sampled number.
pub fn sweep(
    topology: &NetworkTopology,
    base: &PotentialSet,
    mode: UpdateMode,
    params: &McParams,
    spec: &SweepSpec,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    // Validate every grid point up front so a bad endpoint fails before any
    // sampling work starts.
    for step in 0..spec.steps {
        spec.param.apply(base, spec.value_at(step))?;
    }
    (0..spec.steps * 2)
        .into_par_iter()
        .map(|cell| {
            let step = cell / 2;
            let boundary = (cell % 2) as u8;
            let value = spec.value_at(step);
            let potentials = spec.param.apply(base, value)?;
            let report = phase_transition_report(&potentials);
            let seed = derive_seed(params.seed, cell as u64);
            let plan = SimulationPlan {
                topology,
                potentials,
                boundary,
                mode,
                burn_in: params.burn_in,
                samples: params.samples,
                thinning: params.thinning,
                seed,
            };
            let out = simulate(&plan)?;
            Ok(SweepRow {
                param: spec.param,
                value,
                boundary,
                estimate: out.estimate,
                seed,
                alt_sum: report.alt_sum,
                symmetry_residual: report.symmetry_residual,
                det: report.det,
            })
        })
        .collect()
}

/// Formats a float with 17 significant digits so the value round-trips.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes sweep rows as CSV with a fixed, stable column set.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "param_name,param_value,boundary,mean,stderr,n_samples,seed,alt_sum,symmetry_residual,det"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.param,
            fmt_float(r.value),
            r.boundary,
            fmt_float(r.estimate.mean),
            fmt_float(r.estimate.stderr),
            r.estimate.n_samples,
            r.seed,
            fmt_float(r.alt_sum),
            fmt_float(r.symmetry_residual),
            fmt_float(r.det),
        )?;
    }
    Ok(())
}
