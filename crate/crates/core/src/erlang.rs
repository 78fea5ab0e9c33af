//! Helpers for laws built from Erlang phases that share one rate.
//!
//! Everything here works with the Poisson weights
//! `e^{-y} y^j / j!`, evaluated in log space so that large `y` or `j`
//! neither overflow nor lose the leading terms.

/// Poisson probabilities `P[N = j]` for `j = 0..=kmax`, `N ~ Poisson(y)`.
pub fn poisson_pmfs(y: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if y == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ln_y = y.ln();
    let mut ln_term = -y;
    out[0] = ln_term.exp();
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        ln_term += ln_y - (j as f64).ln();
        *slot = ln_term.exp();
    }
    out
}

/// Erlang-`k` cdf at rate `mu`, `E_k(x) = 1 - e^{-mu x} sum_{j<k} (mu x)^j / j!`.
///
/// `E_0` is the point mass at zero.
pub fn erlang_cdf(k: usize, mu: f64, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if x <= 0.0 {
        return 0.0;
    }
    let survival: f64 = poisson_pmfs(mu * x, k - 1).iter().sum();
    (1.0 - survival).clamp(0.0, 1.0)
}

/// Survival function of an atom-plus-Erlang mixture.
///
/// `weights[i]` is the probability of Erlang-`(i+1)`; the atom at zero
/// carries the remaining mass and contributes nothing for `x >= 0`.
pub fn mixture_survival(mu: f64, weights: &[f64], x: f64) -> f64 {
    if weights.is_empty() {
        return 0.0;
    }
    if x < 0.0 {
        return 1.0;
    }
    // S(x) = sum_j Poisson(j; mu x) * T_j, T_j = sum_{i > j} w_i (1-based phases).
    let pois = poisson_pmfs(mu * x, weights.len() - 1);
    let mut tail = 0.0;
    let mut acc = 0.0;
    for j in (0..weights.len()).rev() {
        tail += weights[j];
        acc += pois[j] * tail;
    }
    acc
}

pub fn mixture_cdf(mu: f64, weights: &[f64], x: f64) -> f64 {
    (1.0 - mixture_survival(mu, weights, x)).clamp(0.0, 1.0)
}

/// Density of the continuous part, `mu e^{-mu x} sum_i w_i (mu x)^{i-1}/(i-1)!`.
pub fn mixture_pdf(mu: f64, weights: &[f64], x: f64) -> f64 {
    if weights.is_empty() || x < 0.0 {
        return 0.0;
    }
    let pois = poisson_pmfs(mu * x, weights.len() - 1);
    mu * weights.iter().zip(&pois).map(|(w, q)| w * q).sum::<f64>()
}

pub fn mixture_mean(mu: f64, weights: &[f64]) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * (i + 1) as f64)
        .sum::<f64>()
        / mu
}

/// Table `t[a][b] = C(a+b, a) / 2^{a+b}` for `a, b <= size`.
///
/// This is the probability that, in a fair race between two Poisson
/// streams, the first `a + b` events split as `a` and `b`. Built from
/// Pascal's rule, so every entry stays in `[0, 1]`.
pub fn half_binomial_table(size: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; size + 1]; size + 1];
    for a in 0..=size {
        for b in 0..=size {
            t[a][b] = match (a, b) {
                (0, 0) => 1.0,
                (0, _) => 0.5 * t[0][b - 1],
                (_, 0) => 0.5 * t[a - 1][0],
                _ => 0.5 * (t[a - 1][b] + t[a][b - 1]),
            };
        }
    }
    t
}
