#![allow(dead_code)]

use altserve_core::ServiceLaw;

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Splits `[a, b]` into `pieces` panels before adapting, so that narrow
/// features near zero are not missed by the first Simpson estimate.
pub fn integrate_panels(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| integrate(f, a + k as f64 * h, a + (k + 1) as f64 * h, tol / pieces as f64))
        .sum()
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// `C(a, b)`, zero when `b > a`.
pub fn binom(a: usize, b: usize) -> f64 {
    if b > a {
        return 0.0;
    }
    (0..b).fold(1.0, |acc, j| acc * (a - j) as f64 / (j + 1) as f64)
}

/// Stationary vector of a row-stochastic matrix by power iteration.
pub fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let size = p.len();
    let mut pi = vec![1.0 / size as f64; size];
    for _ in 0..200_000 {
        let mut next = vec![0.0; size];
        for (i, row) in p.iter().enumerate() {
            for (j, pij) in row.iter().enumerate() {
                next[j] += pi[i] * pij;
            }
        }
        let delta = next.iter().zip(&pi).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        pi = next;
        if delta < 1e-16 {
            break;
        }
    }
    pi
}

/// P[exactly k rate-mu phases expire during A] in closed form, for the
/// families where this is elementary.
pub fn phase_counts(law: &ServiceLaw, mu: f64, kmax: usize) -> Vec<f64> {
    match *law {
        ServiceLaw::Deterministic { d } => {
            let y = mu * d;
            let mut out = vec![(-y).exp()];
            for k in 1..=kmax {
                let prev = out[k - 1];
                out.push(prev * y / k as f64);
            }
            out
        }
        ServiceLaw::Exponential { lambda } => {
            let q = mu / (lambda + mu);
            (0..=kmax).map(|k| (1.0 - q) * q.powi(k as i32)).collect()
        }
        ServiceLaw::HyperExponential { p1, p2, mu1, mu2 } => {
            let (q1, q2) = (mu / (mu1 + mu), mu / (mu2 + mu));
            (0..=kmax)
                .map(|k| p1 * (1.0 - q1) * q1.powi(k as i32) + p2 * (1.0 - q2) * q2.powi(k as i32))
                .collect()
        }
        ServiceLaw::MixedErlang { p, n, mu: rate } => {
            let q = mu / (rate + mu);
            let nb = |m: u32, k: usize| binom(m as usize - 1 + k, k) * (1.0 - q).powi(m as i32) * q.powi(k as i32);
            (0..=kmax).map(|k| p * nb(n - 1, k) + (1.0 - p) * nb(n, k)).collect()
        }
    }
}
