//! Service and preparation laws.
//!
//! | Law | Parameters | Mean |
//! |---|---|---|
//! | [`ServiceLaw::Deterministic`] | `d` | `d` |
//! | [`ServiceLaw::Exponential`] | `lambda` | `1/lambda` |
//! | [`ServiceLaw::MixedErlang`] | `p`, `n`, `mu` | `(n - p)/mu` |
//! | [`ServiceLaw::HyperExponential`] | `p1`, `p2`, `mu1`, `mu2` | `p1/mu1 + p2/mu2` |
//! | [`PrepLaw`] | `mu`, `kappa` | `sum_n kappa_n n / mu` |
//!
//! Service laws expose closed-form derivatives of their Laplace transform
//! and the distribution of the number of rate-`mu` exponential phases that
//! expire during one service. Both are what the solvers consume.

mod fit;

pub use fit::{fit, fit_hyperexponential, fit_mixed_erlang};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest total number of Erlang phases accepted anywhere in the crate.
///
/// Desk-scale use is `n <= 50`; beyond 170 the raw transform derivatives
/// leave the `f64` range.
pub const MAX_PHASES: usize = 170;

const WEIGHT_TOL: f64 = 1e-12;

/// Moments shared by every law in this module.
pub trait Law {
    fn mean(&self) -> f64;

    fn second_moment(&self) -> f64;

    fn variance(&self) -> f64 {
        let m = self.mean();
        (self.second_moment() - m * m).max(0.0)
    }

    /// Squared coefficient of variation, `Var / mean^2`.
    fn scv(&self) -> Result<f64> {
        let m = self.mean();
        if m == 0.0 {
            return Err(Error::UndefinedScv);
        }
        Ok((self.second_moment() / (m * m) - 1.0).max(0.0))
    }

    /// Draws one variate; consumes only the caller's generator.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
}

/// Target mean and squared coefficient of variation for fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub scv: f64,
}

impl Moments {
    pub fn new(mean: f64, scv: f64) -> Result<Self> {
        if !(mean.is_finite() && mean > 0.0) {
            return Err(Error::InvalidParameter(format!("mean must be > 0, got {mean}")));
        }
        if !(scv.is_finite() && scv > 0.0) {
            return Err(Error::InvalidParameter(format!("scv must be > 0, got {scv}")));
        }
        Ok(Self { mean, scv })
    }
}

/// Law of the service time `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ServiceLawRepr", into = "ServiceLawRepr")]
pub enum ServiceLaw {
    Deterministic { d: f64 },
    Exponential { lambda: f64 },
    /// Erlang-`(n-1)` with probability `p`, Erlang-`n` otherwise, both at rate `mu`.
    MixedErlang { p: f64, n: u32, mu: f64 },
    HyperExponential { p1: f64, p2: f64, mu1: f64, mu2: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ServiceLawRepr {
    Det { d: f64 },
    Exp { lambda: f64 },
    MixedErlang { p: f64, n: u32, mu: f64 },
    Hyperexp { p1: f64, p2: f64, mu1: f64, mu2: f64 },
}

impl TryFrom<ServiceLawRepr> for ServiceLaw {
    type Error = Error;

    fn try_from(r: ServiceLawRepr) -> Result<Self> {
        let law = match r {
            ServiceLawRepr::Det { d } => ServiceLaw::Deterministic { d },
            ServiceLawRepr::Exp { lambda } => ServiceLaw::Exponential { lambda },
            ServiceLawRepr::MixedErlang { p, n, mu } => ServiceLaw::MixedErlang { p, n, mu },
            ServiceLawRepr::Hyperexp { p1, p2, mu1, mu2 } => {
                ServiceLaw::HyperExponential { p1, p2, mu1, mu2 }
            }
        };
        law.validate()?;
        Ok(law)
    }
}

impl From<ServiceLaw> for ServiceLawRepr {
    fn from(law: ServiceLaw) -> Self {
        match law {
            ServiceLaw::Deterministic { d } => ServiceLawRepr::Det { d },
            ServiceLaw::Exponential { lambda } => ServiceLawRepr::Exp { lambda },
            ServiceLaw::MixedErlang { p, n, mu } => ServiceLawRepr::MixedErlang { p, n, mu },
            ServiceLaw::HyperExponential { p1, p2, mu1, mu2 } => {
                ServiceLawRepr::Hyperexp { p1, p2, mu1, mu2 }
            }
        }
    }
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be a finite rate > 0, got {v}")))
    }
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl ServiceLaw {
    pub fn deterministic(d: f64) -> Result<Self> {
        let law = ServiceLaw::Deterministic { d };
        law.validate()?;
        Ok(law)
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        let law = ServiceLaw::Exponential { lambda };
        law.validate()?;
        Ok(law)
    }

    pub fn mixed_erlang(p: f64, n: u32, mu: f64) -> Result<Self> {
        let law = ServiceLaw::MixedErlang { p, n, mu };
        law.validate()?;
        Ok(law)
    }

    pub fn hyperexponential(p1: f64, p2: f64, mu1: f64, mu2: f64) -> Result<Self> {
        let law = ServiceLaw::HyperExponential { p1, p2, mu1, mu2 };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ServiceLaw::Deterministic { d } => {
                if d.is_finite() && d >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("d must be finite and >= 0, got {d}")))
                }
            }
            ServiceLaw::Exponential { lambda } => check_rate("lambda", lambda),
            ServiceLaw::MixedErlang { p, n, mu } => {
                check_prob("p", p)?;
                check_rate("mu", mu)?;
                if n < 2 || n as usize > MAX_PHASES {
                    return Err(Error::InvalidParameter(format!(
                        "n must lie in 2..={MAX_PHASES}, got {n}"
                    )));
                }
                Ok(())
            }
            ServiceLaw::HyperExponential { p1, p2, mu1, mu2 } => {
                check_prob("p1", p1)?;
                check_prob("p2", p2)?;
                check_rate("mu1", mu1)?;
                check_rate("mu2", mu2)?;
                if (p1 + p2 - 1.0).abs() > WEIGHT_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "p1 + p2 must equal 1, got {}",
                        p1 + p2
                    )));
                }
                Ok(())
            }
        }
    }

    /// `alpha^{(i)}(s) = E[(-A)^i e^{-sA}]`, differentiated in closed form.
    ///
    /// Valid for `s >= 0`; at `s = 0` this gives the signed raw moments.
    pub fn lt_deriv(&self, i: usize, s: f64) -> f64 {
        assert!(s >= 0.0, "Laplace transform argument must be >= 0, got {s}");
        match *self {
            ServiceLaw::Deterministic { d } => {
                if i == 0 {
                    (-s * d).exp()
                } else {
                    (-d).powi(i as i32) * (-s * d).exp()
                }
            }
            ServiceLaw::Exponential { lambda } => erlang_lt_deriv(1, lambda, i, s),
            ServiceLaw::MixedErlang { p, n, mu } => {
                p * erlang_lt_deriv(n as usize - 1, mu, i, s)
                    + (1.0 - p) * erlang_lt_deriv(n as usize, mu, i, s)
            }
            ServiceLaw::HyperExponential { p1, p2, mu1, mu2 } => {
                p1 * erlang_lt_deriv(1, mu1, i, s) + p2 * erlang_lt_deriv(1, mu2, i, s)
            }
        }
    }

    /// `P[exactly k rate-mu phases expire during A] = (-mu)^k alpha^{(k)}(mu) / k!`
    /// for `k = 0..=kmax`.
    ///
    /// Evaluated from the count distribution of each family (Poisson,
    /// geometric, negative binomial) in log space rather than through
    /// `lt_deriv`, so it stays finite where the raw derivatives do not.
    pub fn phase_count_pmfs(&self, mu: f64, kmax: usize) -> Vec<f64> {
        assert!(mu > 0.0, "phase rate must be > 0, got {mu}");
        match *self {
            ServiceLaw::Deterministic { d } => crate::erlang::poisson_pmfs(mu * d, kmax),
            ServiceLaw::Exponential { lambda } => negative_binomial_pmfs(1, lambda, mu, kmax),
            ServiceLaw::MixedErlang { p, n, mu: rate } => {
                let lo = negative_binomial_pmfs(n as usize - 1, rate, mu, kmax);
                let hi = negative_binomial_pmfs(n as usize, rate, mu, kmax);
                lo.iter().zip(&hi).map(|(a, b)| p * a + (1.0 - p) * b).collect()
            }
            ServiceLaw::HyperExponential { p1, p2, mu1, mu2 } => {
                let a = negative_binomial_pmfs(1, mu1, mu, kmax);
                let b = negative_binomial_pmfs(1, mu2, mu, kmax);
                a.iter().zip(&b).map(|(x, y)| p1 * x + p2 * y).collect()
            }
        }
    }

    pub fn phase_count_pmf(&self, mu: f64, k: usize) -> f64 {
        self.phase_count_pmfs(mu, k)[k]
    }

    /// `P[at least k rate-mu phases expire during A]`, as the complement of
    /// the finite head of the count distribution.
    pub fn phase_count_tail(&self, mu: f64, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let head: f64 = self.phase_count_pmfs(mu, k - 1).iter().sum();
        (1.0 - head).clamp(0.0, 1.0)
    }
}

/// Derivative of order `i` of `(rate/(rate+s))^m`.
fn erlang_lt_deriv(m: usize, rate: f64, i: usize, s: f64) -> f64 {
    if m == 0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    let base = (rate / (rate + s)).powi(m as i32);
    // (-1)^i m (m+1) ... (m+i-1) / (rate+s)^i
    let mut factor = 1.0;
    for t in 0..i {
        factor *= -((m + t) as f64) / (rate + s);
    }
    base * factor
}

/// Number of Poisson(`mu`) events during an Erlang-`m`(`rate`) time:
/// negative binomial with `C(m+k-1, k) r^m q^k`, `r = rate/(rate+mu)`.
fn negative_binomial_pmfs(m: usize, rate: f64, mu: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if m == 0 {
        out[0] = 1.0;
        return out;
    }
    let ln_r = (rate / (rate + mu)).ln();
    let ln_q = (mu / (rate + mu)).ln();
    let mut ln_term = m as f64 * ln_r;
    out[0] = ln_term.exp();
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        ln_term += ln_q + ((m + k - 1) as f64).ln() - (k as f64).ln();
        *slot = ln_term.exp();
    }
    out
}

fn sample_erlang<R: Rng + ?Sized>(rng: &mut R, phases: usize, rate: f64) -> f64 {
    let mut total = 0.0;
    for _ in 0..phases {
        let e: f64 = rng.sample(Exp1);
        total += e;
    }
    total / rate
}

impl Law for ServiceLaw {
    fn mean(&self) -> f64 {
        match *self {
            ServiceLaw::Deterministic { d } => d,
            ServiceLaw::Exponential { lambda } => 1.0 / lambda,
            ServiceLaw::MixedErlang { p, n, mu } => (n as f64 - p) / mu,
            ServiceLaw::HyperExponential { p1, p2, mu1, mu2 } => p1 / mu1 + p2 / mu2,
        }
    }

    fn second_moment(&self) -> f64 {
        match *self {
            ServiceLaw::Deterministic { d } => d * d,
            ServiceLaw::Exponential { lambda } => 2.0 / (lambda * lambda),
            ServiceLaw::MixedErlang { p, n, mu } => {
                let n = n as f64;
                (p * (n - 1.0) * n + (1.0 - p) * n * (n + 1.0)) / (mu * mu)
            }
            ServiceLaw::HyperExponential { p1, p2, mu1, mu2 } => {
                2.0 * p1 / (mu1 * mu1) + 2.0 * p2 / (mu2 * mu2)
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ServiceLaw::Deterministic { d } => d,
            ServiceLaw::Exponential { lambda } => sample_erlang(rng, 1, lambda),
            ServiceLaw::MixedErlang { p, n, mu } => {
                let u: f64 = rng.random();
                let phases = if u < p { n - 1 } else { n };
                sample_erlang(rng, phases as usize, mu)
            }
            ServiceLaw::HyperExponential { p1, mu1, mu2, .. } => {
                let u: f64 = rng.random();
                let rate = if u < p1 { mu1 } else { mu2 };
                sample_erlang(rng, 1, rate)
            }
        }
    }
}

/// Law of the preparation time `B`: Erlang-`n` at rate `mu` with
/// probability `kappa[n-1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PrepLawRepr", into = "PrepLawRepr")]
pub struct PrepLaw {
    mu: f64,
    kappa: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename = "prep")]
struct PrepLawRepr {
    mu: f64,
    kappa: Vec<f64>,
}

impl TryFrom<PrepLawRepr> for PrepLaw {
    type Error = Error;

    fn try_from(r: PrepLawRepr) -> Result<Self> {
        PrepLaw::mixed(r.mu, r.kappa)
    }
}

impl From<PrepLaw> for PrepLawRepr {
    fn from(law: PrepLaw) -> Self {
        PrepLawRepr { mu: law.mu, kappa: law.kappa }
    }
}

impl PrepLaw {
    /// Pure Erlang-`n` at rate `mu`.
    pub fn erlang(n: usize, mu: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("Erlang order must be >= 1".into()));
        }
        let mut kappa = vec![0.0; n];
        kappa[n - 1] = 1.0;
        Self::mixed(mu, kappa)
    }

    pub fn mixed(mu: f64, kappa: Vec<f64>) -> Result<Self> {
        check_rate("mu", mu)?;
        if kappa.is_empty() || kappa.len() > MAX_PHASES {
            return Err(Error::InvalidParameter(format!(
                "kappa must have between 1 and {MAX_PHASES} entries, got {}",
                kappa.len()
            )));
        }
        if kappa.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(Error::InvalidParameter("kappa entries must be >= 0".into()));
        }
        let total: f64 = kappa.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidParameter(format!("kappa must sum to 1, got {total}")));
        }
        Ok(Self { mu, kappa })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    /// Largest Erlang order carried by the mixture.
    pub fn max_phases(&self) -> usize {
        self.kappa.len()
    }

    /// `Some(n)` when the law is a pure Erlang-`n`.
    pub fn as_erlang(&self) -> Option<usize> {
        let n = self.kappa.len();
        (self.kappa[n - 1] == 1.0 && self.kappa[..n - 1].iter().all(|&k| k == 0.0)).then_some(n)
    }

    /// Same mixture weights at a different phase rate.
    pub fn with_rate(&self, mu: f64) -> Result<Self> {
        Self::mixed(mu, self.kappa.clone())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        crate::erlang::mixture_cdf(self.mu, &self.kappa, x)
    }
}

/// Exponential and mixed-Erlang laws have a common phase rate and convert
/// directly; the other families are rejected.
impl TryFrom<&ServiceLaw> for PrepLaw {
    type Error = Error;

    fn try_from(law: &ServiceLaw) -> Result<Self> {
        match *law {
            ServiceLaw::Exponential { lambda } => PrepLaw::erlang(1, lambda),
            ServiceLaw::MixedErlang { p, n, mu } => {
                let n = n as usize;
                let mut kappa = vec![0.0; n];
                kappa[n - 2] = p;
                kappa[n - 1] = 1.0 - p;
                PrepLaw::mixed(mu, kappa)
            }
            _ => Err(Error::OutOfFamily(format!(
                "{law:?} is not a mixture of Erlangs with one rate"
            ))),
        }
    }
}

impl Law for PrepLaw {
    fn mean(&self) -> f64 {
        crate::erlang::mixture_mean(self.mu, &self.kappa)
    }

    fn second_moment(&self) -> f64 {
        self.kappa
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let n = (i + 1) as f64;
                k * n * (n + 1.0)
            })
            .sum::<f64>()
            / (self.mu * self.mu)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let phases = if self.kappa.len() == 1 {
            1
        } else if let Some(n) = self.as_erlang() {
            n
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = self.kappa.len();
            for (i, k) in self.kappa.iter().enumerate() {
                acc += k;
                if u < acc {
                    chosen = i + 1;
                    break;
                }
            }
            chosen
        };
        sample_erlang(rng, phases, self.mu)
    }
}
