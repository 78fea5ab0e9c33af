//! Monte-Carlo simulation of both service policies.
//!
//! Generators are ChaCha8 streams: the master seed keys the generator and
//! the replication index selects the stream, so every replication is
//! reproducible on its own and independent of thread scheduling.
//!
//! Both policies start from the same state: at time zero the server
//! begins serving customer 1 while the customer at the other point starts
//! its preparation. Preparation draw `B_i` is the one started at the
//! `(i-1)`-th departure (`D_0 = 0`), in both policies. Customer 1 never
//! waits, so every run starts at a regeneration point.

pub mod stats;

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Law, PrepLaw, ServiceLaw};
use crate::error::{Error, Result};

pub use stats::{cycle_stats, ks_distance, CycleStats, Estimator, RunSummary, SimReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Alternating,
    NonAlternating,
}

/// Generator for replication `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_customers(customers: u64) -> Result<()> {
    if customers == 0 {
        return Err(Error::InvalidParameter("need at least one customer".into()));
    }
    Ok(())
}

fn require_erlang(prep: &PrepLaw) -> Result<usize> {
    prep.as_erlang().ok_or_else(|| {
        Error::OutOfScope("non-alternating simulation needs a pure Erlang preparation".into())
    })
}

/// Server waits `W_1..W_M` under the alternating policy,
/// `W_{i+1} = max{0, B_i - A_i - W_i}`.
pub fn alternating_waits(
    service: &ServiceLaw,
    prep: &PrepLaw,
    customers: u64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut waits = Vec::with_capacity(customers as usize);
    // Time the other point still needs, measured from the last departure.
    let mut residual = 0.0;
    for i in 0..customers {
        let b = prep.sample(rng);
        let a = service.sample(rng);
        let w = if i == 0 { 0.0 } else { residual };
        waits.push(w);
        residual = (b - w - a).max(0.0);
    }
    waits
}

/// Server waits under the non-alternating policy: after each departure
/// the server takes whichever point is ready first.
pub fn nonalternating_waits(
    service: &ServiceLaw,
    prep: &PrepLaw,
    customers: u64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut waits = Vec::with_capacity(customers as usize);
    let mut residual = 0.0;
    for i in 0..customers {
        let b = prep.sample(rng);
        let a = service.sample(rng);
        if i == 0 {
            waits.push(0.0);
            residual = (b - a).max(0.0);
            continue;
        }
        let w = b.min(residual);
        waits.push(w);
        // The point not chosen keeps preparing through the service.
        residual = ((b - residual).abs() - a).max(0.0);
    }
    waits
}

fn policy_waits(
    policy: Policy,
    service: &ServiceLaw,
    prep: &PrepLaw,
    customers: u64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    match policy {
        Policy::Alternating => alternating_waits(service, prep, customers, rng),
        Policy::NonAlternating => nonalternating_waits(service, prep, customers, rng),
    }
}

pub fn simulate_alternating(
    service: &ServiceLaw,
    prep: &PrepLaw,
    customers: u64,
    seed: u64,
) -> Result<SimReport> {
    simulate(Policy::Alternating, service, prep, customers, seed, 1)
}

pub fn simulate_nonalternating(
    service: &ServiceLaw,
    prep: &PrepLaw,
    customers: u64,
    seed: u64,
) -> Result<SimReport> {
    simulate(Policy::NonAlternating, service, prep, customers, seed, 1)
}

/// Runs `replications` independent streams of `customers` each, in
/// parallel, and pools them in replication order.
pub fn simulate(
    policy: Policy,
    service: &ServiceLaw,
    prep: &PrepLaw,
    customers: u64,
    seed: u64,
    replications: u32,
) -> Result<SimReport> {
    check_customers(customers)?;
    if replications == 0 {
        return Err(Error::InvalidParameter("need at least one replication".into()));
    }
    if policy == Policy::NonAlternating {
        require_erlang(prep)?;
    }
    let runs: Vec<RunSummary> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            RunSummary::from_waits(&policy_waits(policy, service, prep, customers, &mut rng))
        })
        .collect();
    SimReport::from_summaries(&runs, seed)
}

/// Both policies driven by one shared sequence of service and preparation
/// times, in absolute time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrace {
    /// `A_i`.
    pub service: Vec<f64>,
    /// `B_i`, started at departure `i-1`.
    pub prep: Vec<f64>,
    pub w_alt: Vec<f64>,
    pub w_na: Vec<f64>,
    /// Departure time of customer `i`.
    pub d_alt: Vec<f64>,
    pub d_na: Vec<f64>,
    /// Earliest time after `D_i` at which the server can start the next service.
    pub h_alt: Vec<f64>,
    pub h_na: Vec<f64>,
}

/// Per-index comparison counts for one coupled trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingCheck {
    pub departure_violations: usize,
    pub ready_violations: usize,
    pub partial_sum_violations: usize,
    /// Indices with `W^A_i < W^NA_i`; allowed, the waits are not ordered.
    pub pointwise_reversals: usize,
}

impl CoupledTrace {
    pub fn len(&self) -> usize {
        self.service.len()
    }

    pub fn is_empty(&self) -> bool {
        self.service.is_empty()
    }

    /// Counts violations of `D^A_i >= D^NA_i`, `H^A_i >= H^NA_i` and of the
    /// partial-sum ordering of the waits.
    ///
    /// Partial sums are taken as `D_i - (A_1 + ... + A_i)`, with the
    /// service sum shared by both policies, so the comparison inherits the
    /// exact ordering of the departure times.
    pub fn check(&self) -> CouplingCheck {
        let mut out = CouplingCheck::default();
        let mut served = 0.0;
        for i in 0..self.len() {
            served += self.service[i];
            if self.d_alt[i] < self.d_na[i] {
                out.departure_violations += 1;
            }
            if self.h_alt[i] < self.h_na[i] {
                out.ready_violations += 1;
            }
            if self.d_alt[i] - served < self.d_na[i] - served {
                out.partial_sum_violations += 1;
            }
            if self.w_alt[i] < self.w_na[i] {
                out.pointwise_reversals += 1;
            }
        }
        out
    }

    /// `max_i |D_i - sum_{j<=i} (W_j + A_j)| / max(1, D_i)` over both policies.
    pub fn bookkeeping_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let (mut sa, mut sna) = (0.0, 0.0);
        for i in 0..self.len() {
            sa += self.w_alt[i] + self.service[i];
            sna += self.w_na[i] + self.service[i];
            worst = worst.max((self.d_alt[i] - sa).abs() / self.d_alt[i].max(1.0));
            worst = worst.max((self.d_na[i] - sna).abs() / self.d_na[i].max(1.0));
        }
        worst
    }

    /// First customer after the first with a zero wait, per policy (0-based).
    pub fn first_regenerations(&self) -> (Option<usize>, Option<usize>) {
        let first = |w: &[f64]| w.iter().skip(1).position(|x| *x == 0.0).map(|p| p + 1);
        (first(&self.w_alt), first(&self.w_na))
    }

    /// Writes `i,W_A,W_NA,D_A,D_NA,H_A,H_NA` with a header, `i` 1-based.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,W_A,W_NA,D_A,D_NA,H_A,H_NA")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
                i + 1,
                self.w_alt[i],
                self.w_na[i],
                self.d_alt[i],
                self.d_na[i],
                self.h_alt[i],
                self.h_na[i]
            )?;
        }
        Ok(())
    }
}

/// Runs both policies on the same draws.
pub fn coupled_run(
    service: &ServiceLaw,
    prep: &PrepLaw,
    customers: u64,
    seed: u64,
) -> Result<CoupledTrace> {
    check_customers(customers)?;
    require_erlang(prep)?;
    let mut rng = stream(seed, 0);
    let m = customers as usize;
    let mut tr = CoupledTrace {
        service: Vec::with_capacity(m),
        prep: Vec::with_capacity(m),
        w_alt: Vec::with_capacity(m),
        w_na: Vec::with_capacity(m),
        d_alt: Vec::with_capacity(m),
        d_na: Vec::with_capacity(m),
        h_alt: Vec::with_capacity(m),
        h_na: Vec::with_capacity(m),
    };
    for i in 0..m {
        let b = prep.sample(&mut rng);
        let a = service.sample(&mut rng);
        tr.service.push(a);
        tr.prep.push(b);
        if i == 0 {
            tr.w_alt.push(0.0);
            tr.w_na.push(0.0);
            tr.d_alt.push(a);
            tr.d_na.push(a);
            tr.h_alt.push(a.max(b));
            tr.h_na.push(a.max(b));
            continue;
        }
        let (d_prev_a, h_prev_a) = (tr.d_alt[i - 1], tr.h_alt[i - 1]);
        let (d_prev_na, h_prev_na) = (tr.d_na[i - 1], tr.h_na[i - 1]);

        let d_a = h_prev_a + a;
        tr.w_alt.push(h_prev_a - d_prev_a);
        tr.d_alt.push(d_a);
        tr.h_alt.push(d_a.max(d_prev_a + b));

        let fresh_ready = d_prev_na + b;
        let start = h_prev_na.min(fresh_ready);
        let d_na = start + a;
        tr.w_na.push(start - d_prev_na);
        tr.d_na.push(d_na);
        tr.h_na.push(d_na.max(h_prev_na.max(fresh_ready)));
    }
    Ok(tr)
}
