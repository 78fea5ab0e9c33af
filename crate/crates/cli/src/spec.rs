//! Experiment specifications and their expansion into parameter points.

use std::path::PathBuf;

use altserve_core::distributions::{fit, fit_mixed_erlang, MAX_PHASES};
use altserve_core::{Law, Moments, PrepLaw, ServiceLaw};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyChoice {
    Alternating,
    Nonalternating,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsSpec {
    pub mean: f64,
    pub scv: f64,
}

impl MomentsSpec {
    fn moments(&self) -> Result<Moments, CliError> {
        Ok(Moments::new(self.mean, self.scv)?)
    }
}

/// Service time: an explicit law or moments to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceSpec {
    Law(ServiceLaw),
    Fit(MomentsSpec),
}

/// Erlang-`n` given either its phase rate or its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErlangSpec {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
}

/// Preparation time: an explicit law, an Erlang, or moments to fit
/// (`scv <= 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PrepSpec {
    Law(PrepLaw),
    Erlang(ErlangSpec),
    Fit(MomentsSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    ServiceScv,
    ServiceMean,
    PrepPhases,
    PrepMean,
    PrepRate,
    /// `E[A] / E[B]`, applied by setting the preparation mean.
    Ratio,
    /// Waiting-time abscissa; switches the output to cdf rows.
    X,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::ServiceScv => "service_scv",
            Param::ServiceMean => "service_mean",
            Param::PrepPhases => "prep_phases",
            Param::PrepMean => "prep_mean",
            Param::PrepRate => "prep_rate",
            Param::Ratio => "ratio",
            Param::X => "x",
        }
    }
}

/// Evenly spaced values, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: Param,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Range>,
}

impl Sweep {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match (&self.values, &self.range) {
            (Some(v), None) => v.clone(),
            (None, Some(r)) => {
                if r.count == 0 {
                    return Err(CliError::spec("range count must be >= 1"));
                }
                if r.count == 1 {
                    vec![r.start]
                } else {
                    let step = (r.stop - r.start) / (r.count - 1) as f64;
                    (0..r.count).map(|k| r.start + step * k as f64).collect()
                }
            }
            _ => {
                return Err(CliError::spec(format!(
                    "sweep over {} needs exactly one of `values` or `range`",
                    self.param.name()
                )))
            }
        };
        if grid.is_empty() {
            return Err(CliError::spec(format!("empty grid for {}", self.param.name())));
        }
        if let Some(v) = grid.iter().find(|v| !v.is_finite()) {
            return Err(CliError::spec(format!("non-finite value {v} in {} grid", self.param.name())));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub customers: u64,
    #[serde(default = "one")]
    pub replications: u32,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> u32 {
    1
}

fn both() -> PolicyChoice {
    PolicyChoice::Both
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default = "both")]
    pub policy: PolicyChoice,
    pub service: ServiceSpec,
    pub prep: PrepSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Laws at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub series: Option<f64>,
    pub sweep: Option<f64>,
    pub service: ServiceLaw,
    pub prep: PrepLaw,
}

/// Parameter overrides accumulated from the series and sweep values.
#[derive(Debug, Clone, Copy, Default)]
struct Overrides {
    service_scv: Option<f64>,
    service_mean: Option<f64>,
    prep_phases: Option<usize>,
    prep_mean: Option<f64>,
    prep_rate: Option<f64>,
    ratio: Option<f64>,
}

impl Overrides {
    fn set(&mut self, param: Param, v: f64) -> Result<(), CliError> {
        match param {
            Param::ServiceScv => self.service_scv = Some(v),
            Param::ServiceMean => self.service_mean = Some(v),
            Param::PrepPhases => {
                if v.fract() != 0.0 || v < 1.0 || v > MAX_PHASES as f64 {
                    return Err(CliError::spec(format!(
                        "prep_phases must be an integer in 1..={MAX_PHASES}, got {v}"
                    )));
                }
                self.prep_phases = Some(v as usize);
            }
            Param::PrepMean => self.prep_mean = Some(v),
            Param::PrepRate => self.prep_rate = Some(v),
            Param::Ratio => self.ratio = Some(v),
            Param::X => {}
        }
        Ok(())
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::spec(format!("invalid spec: {e}")))
    }

    /// True when the sweep runs over waiting-time values.
    pub fn is_cdf(&self) -> bool {
        self.sweep.as_ref().is_some_and(|s| s.param == Param::X)
    }

    /// Checks the spec and expands it into grid points, series-major.
    pub fn points(&self) -> Result<Vec<Point>, CliError> {
        self.check_params()?;
        let series = match &self.series {
            Some(s) => s.grid()?.into_iter().map(Some).collect(),
            None => vec![None],
        };
        let sweep = match &self.sweep {
            Some(s) => s.grid()?.into_iter().map(Some).collect(),
            None => vec![None],
        };
        if self.is_cdf() {
            if let Some(v) = sweep.iter().flatten().find(|v| **v < 0.0) {
                return Err(CliError::spec(format!("waiting-time grid value {v} is negative")));
            }
        }
        let mut out = Vec::with_capacity(series.len() * sweep.len());
        for s in &series {
            let mut ov = Overrides::default();
            if let (Some(spec), Some(v)) = (&self.series, s) {
                ov.set(spec.param, *v)?;
            }
            for x in &sweep {
                let mut ov = ov;
                if let (Some(spec), Some(v)) = (&self.sweep, x) {
                    ov.set(spec.param, *v)?;
                }
                let (service, prep) = self.resolve(&ov)?;
                if self.policy != PolicyChoice::Alternating && prep.as_erlang().is_none() {
                    return Err(CliError::spec(
                        "the non-alternating policy needs a pure Erlang preparation time",
                    ));
                }
                out.push(Point { series: *s, sweep: *x, service, prep });
            }
        }
        Ok(out)
    }

    fn check_params(&self) -> Result<(), CliError> {
        let params: Vec<Param> =
            self.series.iter().chain(self.sweep.iter()).map(|s| s.param).collect();
        if self.series.as_ref().is_some_and(|s| s.param == Param::X) {
            return Err(CliError::spec("x can only be the sweep parameter"));
        }
        if params.len() == 2 && params[0] == params[1] {
            return Err(CliError::spec("series and sweep vary the same parameter"));
        }
        let has = |p: Param| params.contains(&p);
        if has(Param::Ratio) && has(Param::PrepMean) {
            return Err(CliError::spec("ratio and prep_mean both set the preparation mean"));
        }
        if has(Param::PrepRate) && (has(Param::Ratio) || has(Param::PrepMean)) {
            return Err(CliError::spec("prep_rate cannot be combined with ratio or prep_mean"));
        }
        for p in &params {
            match (p, &self.service, &self.prep) {
                (Param::ServiceScv | Param::ServiceMean, ServiceSpec::Law(_), _) => {
                    return Err(CliError::spec(format!(
                        "{} needs the service given as moments to fit",
                        p.name()
                    )))
                }
                (Param::PrepPhases, _, PrepSpec::Law(_) | PrepSpec::Fit(_)) => {
                    return Err(CliError::spec("prep_phases needs an Erlang preparation time"))
                }
                (Param::PrepRate, _, PrepSpec::Fit(_)) => {
                    return Err(CliError::spec("prep_rate needs an Erlang or explicit preparation law"))
                }
                _ => {}
            }
        }
        if let PrepSpec::Erlang(e) = &self.prep {
            if e.mu.is_some() == e.mean.is_some() {
                return Err(CliError::spec("erlang preparation needs exactly one of `mu` or `mean`"));
            }
        }
        Ok(())
    }

    fn resolve(&self, ov: &Overrides) -> Result<(ServiceLaw, PrepLaw), CliError> {
        let service = match &self.service {
            ServiceSpec::Law(law) => law.clone(),
            ServiceSpec::Fit(m) => {
                let m = MomentsSpec {
                    mean: ov.service_mean.unwrap_or(m.mean),
                    scv: ov.service_scv.unwrap_or(m.scv),
                };
                fit(m.moments()?)?
            }
        };
        let target_mean = match (ov.ratio, ov.prep_mean) {
            (Some(r), _) => {
                if !(r > 0.0) {
                    return Err(CliError::spec(format!("ratio must be > 0, got {r}")));
                }
                Some(service.mean() / r)
            }
            (None, m) => m,
        };
        let prep = match &self.prep {
            PrepSpec::Law(law) => match (target_mean, ov.prep_rate) {
                (Some(mean), _) => law.with_rate(law.mu() * law.mean() / mean)?,
                (None, Some(rate)) => law.with_rate(rate)?,
                (None, None) => law.clone(),
            },
            PrepSpec::Erlang(e) => {
                let n = ov.prep_phases.unwrap_or(e.n);
                let mu = match (ov.prep_rate, target_mean.or(e.mean), e.mu) {
                    (Some(rate), _, _) => rate,
                    (None, Some(mean), _) => n as f64 / mean,
                    (None, None, Some(mu)) => mu,
                    (None, None, None) => unreachable!("checked in check_params"),
                };
                PrepLaw::erlang(n, mu)?
            }
            PrepSpec::Fit(m) => {
                let moments = Moments::new(target_mean.unwrap_or(m.mean), m.scv)?;
                let law = if moments.scv == 1.0 {
                    ServiceLaw::exponential(1.0 / moments.mean)?
                } else {
                    fit_mixed_erlang(moments)?
                };
                PrepLaw::try_from(&law)?
            }
        };
        Ok((service, prep))
    }
}
