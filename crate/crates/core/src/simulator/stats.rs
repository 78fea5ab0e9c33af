//! Output analysis for waiting-time sequences.
//!
//! A zero wait is a regeneration point. Completed cycles (from one zero
//! wait up to the next) are grouped into batches and the ratio estimator
//! is applied to the batch sums; the incomplete final cycle is dropped.
//! Runs with too few regenerations fall back to batch means over
//! consecutive customers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest completed cycles for the regenerative estimator.
pub const MIN_CYCLES: usize = 30;
/// Target number of batches per run.
pub const BATCHES: usize = 100;
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub mean_cycle_length: f64,
    pub zero_wait_freq: f64,
    pub cycles: usize,
}

/// Cycle statistics over the completed-cycle window of `waits`.
pub fn cycle_stats(waits: &[f64]) -> Result<CycleStats> {
    let zeros: Vec<usize> = zero_indices(waits);
    if zeros.len() < 2 {
        return Err(Error::InsufficientRun(format!(
            "{} regeneration point(s) in {} customers; need at least 2",
            zeros.len(),
            waits.len()
        )));
    }
    let cycles = zeros.len() - 1;
    let customers = (zeros[cycles] - zeros[0]) as f64;
    Ok(CycleStats {
        mean_cycle_length: customers / cycles as f64,
        zero_wait_freq: cycles as f64 / customers,
        cycles,
    })
}

fn zero_indices(waits: &[f64]) -> Vec<usize> {
    waits
        .iter()
        .enumerate()
        .filter_map(|(i, w)| (*w == 0.0).then_some(i))
        .collect()
}

/// Sums over one block of customers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub wait: f64,
    pub customers: u64,
    pub zeros: u64,
}

/// Sufficient statistics of one replication.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// One entry per completed cycle.
    pub cycles: Vec<Block>,
    /// Consecutive-customer batches covering the whole run.
    pub batches: Vec<Block>,
    pub customers: u64,
}

impl RunSummary {
    pub fn from_waits(waits: &[f64]) -> Self {
        let zeros = zero_indices(waits);
        let cycles = zeros
            .windows(2)
            .map(|w| Block {
                wait: waits[w[0]..w[1]].iter().sum(),
                customers: (w[1] - w[0]) as u64,
                zeros: 1,
            })
            .collect();
        let k = BATCHES.min(waits.len()).max(1);
        let batches = (0..k)
            .map(|b| {
                let lo = b * waits.len() / k;
                let hi = (b + 1) * waits.len() / k;
                let slice = &waits[lo..hi];
                Block {
                    wait: slice.iter().sum(),
                    customers: slice.len() as u64,
                    zeros: slice.iter().filter(|w| **w == 0.0).count() as u64,
                }
            })
            .filter(|b| b.customers > 0)
            .collect();
        Self { cycles, batches, customers: waits.len() as u64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Regenerative,
    BatchMeans,
}

/// Monte-Carlo estimates of the stationary waiting time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mean_wait: f64,
    pub zero_wait_freq: f64,
    /// `None` when no cycle was completed.
    pub mean_cycle_length: Option<f64>,
    pub half_width_95: f64,
    pub std_error: f64,
    pub zero_wait_std_error: f64,
    pub customers: u64,
    pub cycles: u64,
    pub seed: u64,
    pub replications: u32,
    pub estimator: Estimator,
}

/// Ratio estimate `sum y / sum n` and its delta-method standard error.
fn ratio(blocks: &[Block], y: impl Fn(&Block) -> f64) -> (f64, f64) {
    let k = blocks.len() as f64;
    let sy: f64 = blocks.iter().map(&y).sum();
    let sn: f64 = blocks.iter().map(|b| b.customers as f64).sum();
    let r = sy / sn;
    if blocks.len() < 2 {
        return (r, f64::NAN);
    }
    let ss: f64 = blocks
        .iter()
        .map(|b| {
            let d = y(b) - r * b.customers as f64;
            d * d
        })
        .sum();
    let var = ss / (k - 1.0);
    (r, (var / k).sqrt() / (sn / k))
}

/// Groups consecutive cycles into at most [`BATCHES`] batches.
fn batch_cycles(cycles: &[Block]) -> Vec<Block> {
    let k = BATCHES.min(cycles.len());
    (0..k)
        .map(|b| {
            let lo = b * cycles.len() / k;
            let hi = (b + 1) * cycles.len() / k;
            cycles[lo..hi].iter().fold(Block::default(), |acc, c| Block {
                wait: acc.wait + c.wait,
                customers: acc.customers + c.customers,
                zeros: acc.zeros + c.zeros,
            })
        })
        .collect()
}

impl SimReport {
    /// Pools replications in the given order.
    pub fn from_summaries(runs: &[RunSummary], seed: u64) -> Result<Self> {
        let customers: u64 = runs.iter().map(|r| r.customers).sum();
        if customers == 0 {
            return Err(Error::InvalidParameter("need at least one customer".into()));
        }
        let n_cycles: usize = runs.iter().map(|r| r.cycles.len()).sum();
        let (blocks, estimator) = if n_cycles >= MIN_CYCLES {
            // Batch each replication separately so batches never straddle runs.
            let per_run: Vec<Block> = runs.iter().flat_map(|r| batch_cycles(&r.cycles)).collect();
            (per_run, Estimator::Regenerative)
        } else {
            let all: Vec<Block> = runs.iter().flat_map(|r| r.batches.iter().copied()).collect();
            (all, Estimator::BatchMeans)
        };
        let (mean_wait, std_error) = ratio(&blocks, |b| b.wait);
        let (zero_wait_freq, zero_wait_std_error) = ratio(&blocks, |b| b.zeros as f64);
        let mean_cycle_length = (n_cycles > 0).then(|| {
            let in_cycles: u64 = runs.iter().flat_map(|r| &r.cycles).map(|c| c.customers).sum();
            in_cycles as f64 / n_cycles as f64
        });
        Ok(SimReport {
            mean_wait,
            zero_wait_freq,
            mean_cycle_length,
            half_width_95: Z_95 * std_error,
            std_error,
            zero_wait_std_error,
            customers,
            cycles: n_cycles as u64,
            seed,
            replications: runs.len() as u32,
            estimator,
        })
    }
}

/// Kolmogorov distance between the empirical law of `samples` and `cdf`.
///
/// `cdf` may carry atoms; both one-sided limits are checked at every
/// sample value.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = cdf(x);
        // Left limit of the analytic cdf, one ulp below x.
        let f_left = if x > 0.0 { cdf(x - x * f64::EPSILON) } else { 0.0 };
        worst = worst.max((j as f64 / n - f).abs());
        worst = worst.max((i as f64 / n - f_left).abs());
        i = j;
    }
    worst
}
