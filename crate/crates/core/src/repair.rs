//! Non-alternating (machine repair) policy: after each service the server
//! takes whichever of the two points finishes its preparation first.
//!
//! The embedded chain tracks the number of preparation phases the other
//! customer still has to complete right after a service completion
//! (states `0..=n`, `0` meaning that customer is already waiting). With
//! `R` the residual time in equilibrium and `B` a fresh Erlang-`n`
//! preparation, the server waits `W = min(B, R)`.

use serde::{Deserialize, Serialize};

use crate::distributions::{PrepLaw, ServiceLaw, MAX_PHASES};
use crate::erlang::{half_binomial_table, mixture_cdf, mixture_survival};
use crate::error::{Error, Result};
use crate::linalg;

pub const ROW_SUM_TOL: f64 = 1e-12;
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

/// Transition matrix and equilibrium of the remaining-phase chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseChain {
    pub n: usize,
    pub mu: f64,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
}

impl PhaseChain {
    /// `max_j |(pi P)_j - pi_j|`.
    pub fn equilibrium_residual(&self) -> f64 {
        let size = self.pi.len();
        (0..size)
            .map(|j| {
                let flow: f64 = (0..size).map(|i| self.pi[i] * self.p[i][j]).sum();
                (flow - self.pi[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max_i |sum_j P_ij - 1|`.
    pub fn row_sum_error(&self) -> f64 {
        self.p
            .iter()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Remaining preparation time seen just after a service completion:
/// atom `pi[0]` at zero, Erlang-`i` with weight `pi[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualLaw {
    pub mu: f64,
    pub pi: Vec<f64>,
}

impl ResidualLaw {
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return if x == 0.0 { self.pi[0] } else { 0.0 };
        }
        mixture_cdf(self.mu, &self.pi[1..], x)
    }

    pub fn survival(&self, x: f64) -> f64 {
        mixture_survival(self.mu, &self.pi[1..], x)
    }
}

/// Precomputed pieces shared by every transition probability of one chain.
struct Kernel {
    n: usize,
    /// Exactly `k` phases expire during a service.
    counts: Vec<f64>,
    /// At least `k` phases expire during a service.
    tails: Vec<f64>,
    half_binom: Vec<Vec<f64>>,
}

impl Kernel {
    fn new(n: usize, mu: f64, service: &ServiceLaw) -> Result<Self> {
        if n == 0 || n > MAX_PHASES {
            return Err(Error::InvalidParameter(format!("n must lie in 1..={MAX_PHASES}, got {n}")));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be > 0, got {mu}")));
        }
        service.validate()?;
        let counts = service.phase_count_pmfs(mu, n);
        let mut tails = vec![1.0; n + 1];
        let mut head = 0.0;
        for k in 1..=n {
            head += counts[k - 1];
            tails[k] = (1.0 - head).max(0.0);
        }
        Ok(Self { n, counts, tails, half_binom: half_binomial_table(n) })
    }

    /// Probability that, starting from `i` remaining phases of the waiting
    /// customer against a fresh `n`-phase preparation, the customer served
    /// next leaves the other one with `k` phases to go:
    /// `(1/2)^{n+i-k} [C(n+i-k-1, n-1) + C(n+i-k-1, n-k)]`.
    fn race(&self, i: usize, k: usize) -> f64 {
        let n = self.n;
        // Fresh customer finishes first; the old one has done i-k phases.
        let fresh_first = if k <= i { 0.5 * self.half_binom[n - 1][i - k] } else { 0.0 };
        // Old customer finishes first; the fresh one has done n-k phases.
        let old_first = 0.5 * self.half_binom[n - k][i - 1];
        fresh_first + old_first
    }

    fn prob(&self, i: usize, j: usize) -> f64 {
        let n = self.n;
        match (i, j) {
            (0, 0) => self.tails[n],
            (0, j) => self.counts[n - j],
            (i, 0) => (1..=n).map(|k| self.race(i, k) * self.tails[k]).sum(),
            (i, j) => (j..=n).map(|k| self.race(i, k) * self.counts[k - j]).sum(),
        }
    }
}

/// One-step transition probability of the remaining-phase chain.
pub fn transition_prob(i: usize, j: usize, n: usize, mu: f64, service: &ServiceLaw) -> Result<f64> {
    if i > n || j > n {
        return Err(Error::OutOfRange(format!("states must lie in 0..={n}, got ({i}, {j})")));
    }
    Ok(Kernel::new(n, mu, service)?.prob(i, j))
}

pub fn build_chain(n: usize, mu: f64, service: &ServiceLaw) -> Result<PhaseChain> {
    let kernel = Kernel::new(n, mu, service)?;
    let size = n + 1;
    let p: Vec<Vec<f64>> = (0..size)
        .map(|i| (0..size).map(|j| kernel.prob(i, j)).collect())
        .collect();
    for (i, row) in p.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL || row.iter().any(|v| *v < 0.0) {
            return Err(Error::Inconsistent(format!("row {i} is not stochastic (sum {s})")));
        }
    }

    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = vec![vec![0.0; size]; size];
    for (r, row) in a.iter_mut().enumerate().take(size - 1) {
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = p[c][r] - if r == c { 1.0 } else { 0.0 };
        }
    }
    a[size - 1] = vec![1.0; size];
    let mut b = vec![0.0; size];
    b[size - 1] = 1.0;
    let sol = linalg::solve(&a, &b)?;
    let mut pi = sol.x;
    for v in pi.iter_mut() {
        if *v < -1e-12 {
            return Err(Error::Inconsistent(format!("negative equilibrium mass {v}")));
        }
        *v = v.max(0.0);
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);

    let chain = PhaseChain { n, mu, p, pi };
    let res = chain.equilibrium_residual();
    if res > EQUILIBRIUM_TOL {
        return Err(Error::NumericFailure(format!("equilibrium residual {res:e}")));
    }
    Ok(chain)
}

pub fn residual_law(chain: &PhaseChain) -> ResidualLaw {
    ResidualLaw { mu: chain.mu, pi: chain.pi.clone() }
}

fn erlang_order(r: &ResidualLaw, prep: &PrepLaw) -> Result<usize> {
    let n = prep.as_erlang().ok_or_else(|| {
        Error::OutOfScope("non-alternating analysis needs a pure Erlang preparation".into())
    })?;
    if (prep.mu() - r.mu).abs() > 1e-12 * r.mu {
        return Err(Error::InvalidParameter(format!(
            "residual rate {} differs from preparation rate {}",
            r.mu,
            prep.mu()
        )));
    }
    Ok(n)
}

/// `F_W(x) = F_R(x) + F_B(x) - F_R(x) F_B(x)` for `W = min(B, R)`.
pub fn na_wait_cdf(r: &ResidualLaw, prep: &PrepLaw, x: f64) -> Result<f64> {
    erlang_order(r, prep)?;
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(format!("waiting time must be >= 0, got {x}")));
    }
    let fr = r.cdf(x);
    let fb = prep.cdf(x);
    Ok(fr + fb - fr * fb)
}

/// `E[min(B, R)] = int_0^inf S_B(x) S_R(x) dx` in closed form.
///
/// Both survivals are `e^{-mu x}` times a polynomial, so the integral
/// reduces to `1/(2 mu) sum_{a<n, b<m} T_b C(a+b, a) 2^{-(a+b)}` with
/// `T_b = sum_{i>b} pi_i`.
pub fn na_wait_mean(r: &ResidualLaw, prep: &PrepLaw) -> Result<f64> {
    let n = erlang_order(r, prep)?;
    let m = r.pi.len() - 1;
    if m == 0 {
        return Ok(0.0);
    }
    let t = half_binomial_table(n.max(m));
    let mut tail = vec![0.0; m];
    let mut acc = 0.0;
    for b in (0..m).rev() {
        acc += r.pi[b + 1];
        tail[b] = acc;
    }
    let mut s = 0.0;
    for row in t.iter().take(n) {
        for (b, tb) in tail.iter().enumerate() {
            s += tb * row[b];
        }
    }
    Ok(s / (2.0 * r.mu))
}

/// Everything the non-alternating analysis produces for one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonAlternatingSolution {
    pub chain: PhaseChain,
    pub residual: ResidualLaw,
    pub mean_wait: f64,
    /// `P[W = 0] = pi_0`.
    pub p_zero: f64,
}

impl NonAlternatingSolution {
    /// Re-verifies row sums, the equilibrium residual and the residual law.
    pub fn check(&self) -> Result<()> {
        let rows = self.chain.row_sum_error();
        if !(rows <= ROW_SUM_TOL) {
            return Err(Error::Inconsistent(format!("row-sum error {rows}")));
        }
        let eq = self.chain.equilibrium_residual();
        if !(eq <= EQUILIBRIUM_TOL) {
            return Err(Error::Inconsistent(format!("equilibrium residual {eq}")));
        }
        let total: f64 = self.residual.pi.iter().sum();
        if (total - 1.0).abs() > 1e-10 || self.residual.pi.iter().any(|v| *v < 0.0) {
            return Err(Error::Inconsistent(format!("residual weights sum to {total}")));
        }
        Ok(())
    }
}

pub fn solve(prep: &PrepLaw, service: &ServiceLaw) -> Result<NonAlternatingSolution> {
    let n = prep.as_erlang().ok_or_else(|| {
        Error::OutOfScope("non-alternating analysis needs a pure Erlang preparation".into())
    })?;
    let chain = build_chain(n, prep.mu(), service)?;
    let residual = residual_law(&chain);
    let mean_wait = na_wait_mean(&residual, prep)?;
    let p_zero = chain.pi[0];
    Ok(NonAlternatingSolution { chain, residual, mean_wait, p_zero })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_phase_exponential_transitions() {
        let law = ServiceLaw::exponential(2.0).unwrap();
        let mu = 1.5;
        let alpha = 2.0 / 3.5;
        let p = |i, j| transition_prob(i, j, 1, mu, &law).unwrap();
        assert!((p(0, 0) - (1.0 - alpha)).abs() < 1e-15);
        assert!((p(0, 1) - alpha).abs() < 1e-15);
        assert!((p(1, 1) - alpha).abs() < 1e-15);
        assert!((p(1, 0) - (1.0 - alpha)).abs() < 1e-15);
    }

    #[test]
    fn one_phase_zero_service_transitions() {
        let law = ServiceLaw::deterministic(0.0).unwrap();
        let p = |i, j| transition_prob(i, j, 1, 3.0, &law).unwrap();
        assert_eq!(p(0, 1), 1.0);
        assert_eq!(p(1, 1), 1.0);
        assert_eq!(p(0, 0), 0.0);
        assert_eq!(p(1, 0), 0.0);
    }

    #[test]
    fn out_of_range_state() {
        let law = ServiceLaw::deterministic(1.0).unwrap();
        assert!(matches!(transition_prob(3, 0, 2, 1.0, &law), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn simple_equilibria() {
        let chain = build_chain(1, 1.0, &ServiceLaw::exponential(1.0).unwrap()).unwrap();
        assert!((chain.pi[0] - 0.5).abs() < 1e-15 && (chain.pi[1] - 0.5).abs() < 1e-15);
        let chain = build_chain(1, 2.0, &ServiceLaw::deterministic(0.0).unwrap()).unwrap();
        assert!(chain.pi[0].abs() < 1e-15 && (chain.pi[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_law_examples() {
        let r = ResidualLaw { mu: 1.0, pi: vec![0.5, 0.5] };
        let x: f64 = 0.8;
        assert!((r.cdf(x) - (0.5 + 0.5 * (1.0 - (-x).exp()))).abs() < 1e-15);
        let r = ResidualLaw { mu: 2.0, pi: vec![1.0, 0.0, 0.0] };
        assert_eq!(r.cdf(0.0), 1.0);
    }

    #[test]
    fn min_of_two_exponentials() {
        let mu = 1.7;
        let prep = PrepLaw::erlang(1, mu).unwrap();
        let r = ResidualLaw { mu, pi: vec![0.0, 1.0] };
        for x in [0.0, 0.2, 1.0] {
            let want = 1.0 - (-2.0 * mu * x).exp();
            assert!((na_wait_cdf(&r, &prep, x).unwrap() - want).abs() < 1e-15);
        }
        assert!((na_wait_mean(&r, &prep).unwrap() - 1.0 / (2.0 * mu)).abs() < 1e-15);
        assert!(matches!(na_wait_cdf(&r, &prep, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn never_waits_with_atom_only() {
        let prep = PrepLaw::erlang(3, 1.0).unwrap();
        let r = ResidualLaw { mu: 1.0, pi: vec![1.0, 0.0, 0.0, 0.0] };
        assert_eq!(na_wait_mean(&r, &prep).unwrap(), 0.0);
        assert_eq!(na_wait_cdf(&r, &prep, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn exponential_hand_value() {
        let sol = solve(&PrepLaw::erlang(1, 1.0).unwrap(), &ServiceLaw::exponential(1.0).unwrap())
            .unwrap();
        assert!((sol.mean_wait - 0.25).abs() < 1e-15);
        assert!((sol.p_zero - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mixed_preparation_is_out_of_scope() {
        let prep = PrepLaw::mixed(1.0, vec![0.5, 0.5]).unwrap();
        let law = ServiceLaw::exponential(1.0).unwrap();
        assert!(matches!(solve(&prep, &law), Err(Error::OutOfScope(_))));
    }

    #[test]
    fn chain_json_shape() {
        let chain = build_chain(1, 1.0, &ServiceLaw::exponential(1.0).unwrap()).unwrap();
        let v = serde_json::to_value(&chain).unwrap();
        assert!(v.get("P").is_some() && v.get("pi").is_some());
        let r = serde_json::to_value(residual_law(&chain)).unwrap();
        assert_eq!(r, serde_json::json!({"mu": 1.0, "pi": [0.5, 0.5]}));
    }
}
