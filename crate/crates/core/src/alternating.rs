//! Stationary waiting time of a server that strictly alternates between
//! two service points, `W = max{0, B - A - W}` in distribution.
//!
//! With `B` an Erlang-`n` (or a mixture of Erlangs sharing the rate `mu`)
//! the law of `W` is an atom at zero plus a mixture of Erlang-1..Erlang-N
//! at rate `mu`. The mixture weights follow from the derivatives
//! `omega^{(k)}(mu)` of the transform of `W`, which solve a linear system.
//!
//! The system is assembled in the scaled unknowns
//! `x_k = (-mu)^k omega^{(k)}(mu) / k!`, which are probabilities in
//! disguise (`x_k = P[W + A spans exactly k phases of a fresh rate-mu
//! clock]`). Every coefficient is then nonnegative and of order one,
//! whatever `n` and `mu` are. The raw derivatives are recovered afterwards
//! for [`TransformSolution`].

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::distributions::{Law, PrepLaw, ServiceLaw, MAX_PHASES};
use crate::erlang::{half_binomial_table, mixture_cdf, mixture_mean, mixture_pdf};
use crate::error::{Error, Result};
use crate::linalg;

/// Negative weights down to this size are treated as rounding and clamped.
pub const CLAMP_TOL: f64 = 1e-12;

/// Atom at zero plus Erlang-1..Erlang-N weights at the common rate `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitLaw {
    pub mu: f64,
    pub p0: f64,
    /// `p[i]` is the weight of Erlang-`(i+1)`.
    pub p: Vec<f64>,
}

impl WaitLaw {
    pub fn new(mu: f64, p0: f64, p: Vec<f64>) -> Result<Self> {
        let law = Self { mu, p0, p };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be > 0, got {}", self.mu)));
        }
        if std::iter::once(&self.p0).chain(&self.p).any(|v| *v < -CLAMP_TOL || !v.is_finite()) {
            return Err(Error::Inconsistent("negative mixture weight".into()));
        }
        let total = self.p0 + self.p.iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Inconsistent(format!("weights sum to {total}")));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        mixture_mean(self.mu, &self.p)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::Domain(format!("waiting time must be >= 0, got {x}")));
        }
        Ok(mixture_cdf(self.mu, &self.p, x))
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::Domain(format!("waiting time must be >= 0, got {x}")));
        }
        Ok(mixture_pdf(self.mu, &self.p, x))
    }
}

/// Transform derivatives at `s = mu` from one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSolution {
    pub mu: f64,
    pub kappa: Vec<f64>,
    /// `omega^{(k)}(mu)`, `k = 0..N-1`.
    pub omega: Vec<f64>,
    /// `phi^{(i)}(mu) = sum_k C(i,k) omega^{(k)}(mu) alpha^{(i-k)}(mu)`.
    pub phi: Vec<f64>,
    /// `(-mu)^k omega^{(k)}(mu) / k!`, the unknowns actually solved for.
    pub scaled_omega: Vec<f64>,
    /// 1-norm condition estimate of the solved system.
    pub condition: f64,
}

impl TransformSolution {
    /// Probability of no wait computed from `phi`:
    /// `1 - sum_n kappa_n sum_{i<n} (-mu)^i phi^{(i)}(mu) / i!`.
    pub fn atom(&self) -> f64 {
        let terms: Vec<f64> = self
            .phi
            .iter()
            .enumerate()
            .map(|(i, f)| signed_power_over_factorial(-self.mu, i) * f)
            .collect();
        let mut total = 0.0;
        for (n_minus_1, kappa) in self.kappa.iter().enumerate() {
            total += kappa * terms[..=n_minus_1].iter().sum::<f64>();
        }
        1.0 - total
    }

    /// Inverse throughput through the Erlang-only closed form,
    /// `sum_{i<n} (-1)^i/i! phi^{(i)}(mu) mu^{i-1} (n-i) - alpha'(0)`.
    ///
    /// `None` unless the preparation law was a pure Erlang.
    pub fn erlang_inverse_throughput(&self, service: &ServiceLaw) -> Option<f64> {
        let n = self.kappa.len();
        if self.kappa[n - 1] != 1.0 {
            return None;
        }
        let sum: f64 = self
            .phi
            .iter()
            .enumerate()
            .map(|(i, f)| {
                signed_power_over_factorial(-self.mu, i) * f * (n - i) as f64 / self.mu
            })
            .sum();
        Some(sum - service.lt_deriv(1, 0.0))
    }
}

/// `y^i / i!`, built as a product of ratios.
fn signed_power_over_factorial(y: f64, i: usize) -> f64 {
    (1..=i).fold(1.0, |acc, k| acc * y / k as f64)
}

/// Linear system `matrix * x = rhs` in the scaled unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

/// Balance equations for an Erlang-`n` preparation time.
pub fn build_system(n: usize, mu: f64, service: &ServiceLaw) -> Result<LinearSystem> {
    let prep = PrepLaw::erlang(n, mu)?;
    build_mixed_system(&prep, service)
}

/// Balance equations for a mixed-Erlang preparation time.
///
/// Row 0 is `x_0 = 1 - sum_n kappa_n sum_{i<n} (1 - 2^{-(n-i)}) q_i`,
/// row `l` is `x_l = sum_n kappa_n sum_{i<n} 2^{-(n-i+l)} C(n-i+l-1, l) q_i`,
/// where `q_i = sum_{k<=i} x_k a_{i-k}` and `a_j` is the probability that
/// exactly `j` rate-`mu` phases expire during a service.
pub fn build_mixed_system(prep: &PrepLaw, service: &ServiceLaw) -> Result<LinearSystem> {
    service.validate()?;
    let kappa = prep.kappa();
    let big_n = kappa.len();
    if big_n > MAX_PHASES {
        return Err(Error::InvalidParameter(format!("at most {MAX_PHASES} phases")));
    }
    let a = service.phase_count_pmfs(prep.mu(), big_n);
    // t[m-1][l] / 2 = 2^{-(m+l)} C(m+l-1, l)
    let t = half_binomial_table(big_n);

    // coef[l][i]: weight of q_i in row l.
    let mut coef = vec![vec![0.0; big_n]; big_n];
    for i in 0..big_n {
        for (n_minus_1, &k) in kappa.iter().enumerate().skip(i) {
            if k == 0.0 {
                continue;
            }
            let m = n_minus_1 + 1 - i;
            coef[0][i] += k * (1.0 - 0.5 * t[m - 1][0]);
            for (l, row) in coef.iter_mut().enumerate().skip(1) {
                row[i] += k * 0.5 * t[m - 1][l];
            }
        }
    }

    let mut matrix = vec![vec![0.0; big_n]; big_n];
    for (l, row) in matrix.iter_mut().enumerate() {
        let sign = if l == 0 { 1.0 } else { -1.0 };
        for (k, slot) in row.iter_mut().enumerate() {
            let s: f64 = (k..big_n).map(|i| coef[l][i] * a[i - k]).sum();
            *slot = sign * s;
        }
        row[l] += 1.0;
    }
    let mut rhs = vec![0.0; big_n];
    rhs[0] = 1.0;
    Ok(LinearSystem { matrix, rhs })
}

/// Full output of one alternating solve.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingSolution {
    pub wait: WaitLaw,
    pub transform: TransformSolution,
    /// `||M x - rhs||_inf` of the solved system.
    pub solve_residual: f64,
}

/// Largest rewritten-system residual accepted by [`AlternatingSolution::check`].
pub const REWRITTEN_TOL: f64 = 1e-9;
/// Agreement required between the two routes to the atom and to the throughput.
pub const IDENTITY_TOL: f64 = 1e-10;

impl AlternatingSolution {
    /// Re-verifies the solve: weights form a distribution, the atom agrees
    /// with its transform expression, the rewritten system holds and, for a
    /// pure Erlang preparation, both throughput formulas agree.
    pub fn check(&self, service: &ServiceLaw) -> Result<()> {
        self.wait.validate()?;
        let atom = self.transform.atom();
        if (atom - self.wait.p0).abs() > IDENTITY_TOL {
            return Err(Error::Inconsistent(format!("atom {atom} vs p0 {}", self.wait.p0)));
        }
        let r = verify_rewritten_system(&self.wait, &self.transform);
        if !(r <= REWRITTEN_TOL) {
            return Err(Error::Inconsistent(format!("rewritten-system residual {r}")));
        }
        if let Some(inv) = self.transform.erlang_inverse_throughput(service) {
            let direct = self.wait.mean() + service.mean();
            if (inv - direct).abs() > IDENTITY_TOL * direct.max(1.0) {
                return Err(Error::Inconsistent(format!(
                    "inverse throughput {inv} vs E[W] + E[A] = {direct}"
                )));
            }
        }
        Ok(())
    }
}

/// Solves the alternating system for an Erlang-`n`(`mu`) preparation time.
pub fn solve_erlang(n: usize, mu: f64, service: &ServiceLaw) -> Result<(WaitLaw, TransformSolution)> {
    let sol = solve(&PrepLaw::erlang(n, mu)?, service)?;
    Ok((sol.wait, sol.transform))
}

/// Solves the alternating system for a mixed-Erlang preparation time.
pub fn solve_phase_type(prep: &PrepLaw, service: &ServiceLaw) -> Result<WaitLaw> {
    Ok(solve(prep, service)?.wait)
}

pub fn solve(prep: &PrepLaw, service: &ServiceLaw) -> Result<AlternatingSolution> {
    let system = build_mixed_system(prep, service)?;
    let lin = linalg::solve(&system.matrix, &system.rhs)?;
    let x = lin.x;
    let mu = prep.mu();
    let kappa = prep.kappa();
    let big_n = kappa.len();
    let a = service.phase_count_pmfs(mu, big_n);

    // q_i = (-mu)^i phi^{(i)}(mu) / i!
    let q: Vec<f64> = (0..big_n)
        .map(|i| (0..=i).map(|k| x[k] * a[i - k]).sum())
        .collect();

    let mut p = vec![0.0; big_n];
    for (j, slot) in p.iter_mut().enumerate() {
        let phases = j + 1;
        *slot = (phases..=big_n).map(|n| kappa[n - 1] * q[n - phases]).sum();
    }
    for (j, v) in p.iter_mut().enumerate() {
        *v = clamp_weight(*v).map_err(|e| match e {
            Error::Inconsistent(msg) => Error::Inconsistent(format!("p_{}: {msg}", j + 1)),
            other => other,
        })?;
    }
    let mut p0 = 1.0 - p.iter().sum::<f64>();
    if p0 < 0.0 {
        clamp_weight(p0).map_err(|_| Error::Inconsistent(format!("p_0 = {p0}")))?;
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
        p0 = 0.0;
    }
    let wait = WaitLaw::new(mu, p0, p)?;

    // Raw derivatives, for reporting and the transform-side identities.
    let omega: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(k, xk)| xk / signed_power_over_factorial(-mu, k))
        .collect();
    let alpha: Vec<f64> = (0..big_n).map(|j| service.lt_deriv(j, mu)).collect();
    let phi: Vec<f64> = (0..big_n)
        .map(|i| {
            let mut binom = 1.0;
            let mut s = 0.0;
            for k in 0..=i {
                if k > 0 {
                    binom = binom * (i - k + 1) as f64 / k as f64;
                }
                s += binom * omega[k] * alpha[i - k];
            }
            s
        })
        .collect();

    Ok(AlternatingSolution {
        wait,
        transform: TransformSolution {
            mu,
            kappa: kappa.to_vec(),
            omega,
            phi,
            scaled_omega: x,
            condition: lin.condition,
        },
        solve_residual: lin.residual,
    })
}

fn clamp_weight(v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NumericFailure(format!("non-finite weight {v}")));
    }
    if v < -CLAMP_TOL || v > 1.0 + 1e-9 {
        return Err(Error::Inconsistent(format!("weight {v} outside [0, 1]")));
    }
    Ok(v.clamp(0.0, 1.0))
}

pub fn wait_mean(w: &WaitLaw) -> f64 {
    w.mean()
}

pub fn wait_cdf(w: &WaitLaw, x: f64) -> Result<f64> {
    w.cdf(x)
}

pub fn wait_pdf(w: &WaitLaw, x: f64) -> Result<f64> {
    w.pdf(x)
}

/// `1 / (E[W] + E[A])`, completions per unit time.
pub fn throughput(w: &WaitLaw, service: &ServiceLaw) -> f64 {
    1.0 / (w.mean() + service.mean())
}

/// Largest violation of the identities tying the transform derivatives
/// back to the mixture weights,
/// `omega(mu) = p_0 + sum_i p_i 2^{-i}` and
/// `omega^{(l)}(mu) = sum_i p_i (-mu)^{-l} 2^{-(i+l)} (i+l-1)!/(i-1)!`.
///
/// Row `l` is compared after multiplying by `(-mu)^l / l!`, so the result
/// is on the probability scale for every `l`.
pub fn verify_rewritten_system(w: &WaitLaw, ts: &TransformSolution) -> f64 {
    let x = &ts.scaled_omega;
    let row0 = w.p0
        + w.p
            .iter()
            .enumerate()
            .map(|(j, pj)| pj * 0.5f64.powi(j as i32 + 1))
            .sum::<f64>();
    let mut worst = (x[0] - row0).abs();
    for (l, xl) in x.iter().enumerate().skip(1) {
        let lf = l as f64;
        let rhs: f64 = w
            .p
            .iter()
            .enumerate()
            .map(|(j, pj)| {
                let i = (j + 1) as f64;
                let ln_c = ln_gamma(i + lf) - ln_gamma(i) - ln_gamma(lf + 1.0)
                    - (i + lf) * std::f64::consts::LN_2;
                pj * ln_c.exp()
            })
            .sum();
        worst = worst.max((xl - rhs).abs());
    }
    worst
}
