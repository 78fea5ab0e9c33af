//! Evaluates an experiment over its grid and renders CSV.

use altserve_core::simulator::{
    alternating_waits, ks_distance, nonalternating_waits, simulate, stream, Policy, SimReport,
};
use altserve_core::{alternating, repair, Law, PrepLaw, ServiceLaw};
use rayon::prelude::*;

use crate::error::CliError;
use crate::spec::{ExperimentSpec, Point, PolicyChoice, SimSpec};

pub const SUMMARY_HEADER: &str = "series_param,series_value,sweep_param,sweep_value,policy,\
prep_phases,prep_rate,prep_mean,prep_scv,service_mean,service_scv,\
mean_wait,norm_wait,p_zero,throughput,sim_mean_wait,sim_half_width,sim_p_zero,sim_customers";

pub const CDF_HEADER: &str = "series_param,series_value,x,policy,cdf,sim_cdf";

/// Rendered CSV plus human-readable notes for standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub csv: String,
    pub diagnostics: Vec<String>,
}

fn num(v: f64) -> String {
    format!("{v:.11e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn policies(choice: PolicyChoice) -> &'static [Policy] {
    match choice {
        PolicyChoice::Alternating => &[Policy::Alternating],
        PolicyChoice::Nonalternating => &[Policy::NonAlternating],
        PolicyChoice::Both => &[Policy::Alternating, Policy::NonAlternating],
    }
}

fn policy_name(p: Policy) -> &'static str {
    match p {
        Policy::Alternating => "alternating",
        Policy::NonAlternating => "nonalternating",
    }
}

/// An analytic solution that has passed its invariant checks.
enum Solved {
    Alt(alternating::AlternatingSolution),
    Na(repair::NonAlternatingSolution),
}

impl Solved {
    fn new(policy: Policy, service: &ServiceLaw, prep: &PrepLaw) -> Result<Self, CliError> {
        Ok(match policy {
            Policy::Alternating => {
                let sol = alternating::solve(prep, service)?;
                sol.check(service)?;
                Solved::Alt(sol)
            }
            Policy::NonAlternating => {
                let sol = repair::solve(prep, service)?;
                sol.check()?;
                Solved::Na(sol)
            }
        })
    }

    fn mean_wait(&self) -> f64 {
        match self {
            Solved::Alt(s) => s.wait.mean(),
            Solved::Na(s) => s.mean_wait,
        }
    }

    fn p_zero(&self) -> f64 {
        match self {
            Solved::Alt(s) => s.wait.p0,
            Solved::Na(s) => s.p_zero,
        }
    }

    fn cdf(&self, prep: &PrepLaw, x: f64) -> Result<f64, CliError> {
        Ok(match self {
            Solved::Alt(s) => s.wait.cdf(x)?,
            Solved::Na(s) => repair::na_wait_cdf(&s.residual, prep, x)?,
        })
    }
}

/// Runs `spec` on a pool of `threads` workers (rayon's default when `None`).
pub fn run_with_threads(spec: &ExperimentSpec, threads: Option<usize>) -> Result<Output, CliError> {
    match threads {
        None => run(spec),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::spec(format!("cannot start {t} worker threads: {e}")))?
            .install(|| run(spec)),
    }
}

pub fn run(spec: &ExperimentSpec) -> Result<Output, CliError> {
    let points = spec.points()?;
    if let Some(sim) = &spec.sim {
        if sim.customers == 0 || sim.replications == 0 {
            return Err(CliError::spec("sim needs customers >= 1 and replications >= 1"));
        }
    }
    if spec.is_cdf() {
        cdf_rows(spec, &points)
    } else {
        summary_rows(spec, &points)
    }
}

fn param_names(spec: &ExperimentSpec) -> (&'static str, &'static str) {
    (
        spec.series.as_ref().map(|s| s.param.name()).unwrap_or(""),
        spec.sweep.as_ref().map(|s| s.param.name()).unwrap_or(""),
    )
}

fn summary_rows(spec: &ExperimentSpec, points: &[Point]) -> Result<Output, CliError> {
    let (series_param, sweep_param) = param_names(spec);
    let per_point: Vec<Result<Vec<String>, CliError>> = points
        .par_iter()
        .map(|pt| {
            policies(spec.policy)
                .iter()
                .map(|&policy| {
                    let solved = Solved::new(policy, &pt.service, &pt.prep)?;
                    let sim = spec
                        .sim
                        .map(|s| run_sim(policy, pt, &s))
                        .transpose()?;
                    Ok(summary_line(series_param, sweep_param, policy, pt, &solved, sim.as_ref()))
                })
                .collect()
        })
        .collect();
    let mut csv = String::from(SUMMARY_HEADER);
    csv.push('\n');
    for rows in per_point {
        for row in rows? {
            csv.push_str(&row);
            csv.push('\n');
        }
    }
    Ok(Output { csv, diagnostics: Vec::new() })
}

fn run_sim(policy: Policy, pt: &Point, sim: &SimSpec) -> Result<SimReport, CliError> {
    Ok(simulate(policy, &pt.service, &pt.prep, sim.customers, sim.seed, sim.replications)?)
}

fn summary_line(
    series_param: &str,
    sweep_param: &str,
    policy: Policy,
    pt: &Point,
    solved: &Solved,
    sim: Option<&SimReport>,
) -> String {
    let service_mean = pt.service.mean();
    let mean_wait = solved.mean_wait();
    let norm = (service_mean > 0.0).then(|| mean_wait / service_mean);
    let fields = [
        series_param.to_string(),
        opt(pt.series),
        sweep_param.to_string(),
        opt(pt.sweep),
        policy_name(policy).to_string(),
        pt.prep.max_phases().to_string(),
        num(pt.prep.mu()),
        num(pt.prep.mean()),
        opt(pt.prep.scv().ok()),
        num(service_mean),
        opt(pt.service.scv().ok()),
        num(mean_wait),
        opt(norm),
        num(solved.p_zero()),
        num(1.0 / (mean_wait + service_mean)),
        opt(sim.map(|s| s.mean_wait)),
        opt(sim.map(|s| s.half_width_95)),
        opt(sim.map(|s| s.zero_wait_freq)),
        sim.map(|s| s.customers.to_string()).unwrap_or_default(),
    ];
    fields.join(",")
}

/// Sorted pooled waits over all replications.
fn sim_waits(policy: Policy, pt: &Point, sim: &SimSpec) -> Vec<f64> {
    let mut waits: Vec<f64> = (0..sim.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(sim.seed, r as u64);
            match policy {
                Policy::Alternating => alternating_waits(&pt.service, &pt.prep, sim.customers, &mut rng),
                Policy::NonAlternating => {
                    nonalternating_waits(&pt.service, &pt.prep, sim.customers, &mut rng)
                }
            }
        })
        .flatten()
        .collect();
    waits.sort_by(|a, b| a.total_cmp(b));
    waits
}

fn cdf_rows(spec: &ExperimentSpec, points: &[Point]) -> Result<Output, CliError> {
    let (series_param, _) = param_names(spec);
    // Points come series-major; the laws only change with the series value.
    let mut groups: Vec<&[Point]> = Vec::new();
    let mut start = 0;
    for i in 1..=points.len() {
        if i == points.len() || points[i].series != points[start].series {
            groups.push(&points[start..i]);
            start = i;
        }
    }
    let jobs: Vec<(usize, Policy)> = (0..groups.len())
        .flat_map(|g| policies(spec.policy).iter().map(move |&p| (g, p)))
        .collect();
    let results: Vec<Result<(Vec<String>, Option<String>), CliError>> = jobs
        .par_iter()
        .map(|&(g, policy)| {
            let group = groups[g];
            let head = &group[0];
            let solved = Solved::new(policy, &head.service, &head.prep)?;
            let waits = spec.sim.map(|s| sim_waits(policy, head, &s));
            let mut rows = Vec::with_capacity(group.len());
            for pt in group {
                let x = pt.sweep.expect("cdf grids always carry x");
                let ecdf = waits.as_ref().map(|w| {
                    w.partition_point(|v| *v <= x) as f64 / w.len() as f64
                });
                rows.push(
                    [
                        series_param.to_string(),
                        opt(head.series),
                        num(x),
                        policy_name(policy).to_string(),
                        num(solved.cdf(&head.prep, x)?),
                        opt(ecdf),
                    ]
                    .join(","),
                );
            }
            let note = match &waits {
                Some(w) => {
                    let d = ks_distance(w, |x| solved.cdf(&head.prep, x).unwrap_or(0.0));
                    let label = match head.series {
                        Some(s) => format!("{} ({series_param}={s})", policy_name(policy)),
                        None => policy_name(policy).to_string(),
                    };
                    Some(format!("{label}: Kolmogorov distance {d:.3e} over {} waits", w.len()))
                }
                None => None,
            };
            Ok((rows, note))
        })
        .collect();
    // Emit in grid order: x-major within each series, policies interleaved.
    let mut by_job = Vec::with_capacity(results.len());
    let mut diagnostics = Vec::new();
    for r in results {
        let (rows, note) = r?;
        diagnostics.extend(note);
        by_job.push(rows);
    }
    let per_group = policies(spec.policy).len();
    let mut csv = String::from(CDF_HEADER);
    csv.push('\n');
    for g in 0..groups.len() {
        for k in 0..groups[g].len() {
            for p in 0..per_group {
                csv.push_str(&by_job[g * per_group + p][k]);
                csv.push('\n');
            }
        }
    }
    Ok(Output { csv, diagnostics })
}
