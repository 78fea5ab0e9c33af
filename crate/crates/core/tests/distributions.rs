mod common;

use altserve_core::distributions::{fit, fit_hyperexponential, fit_mixed_erlang};
use altserve_core::simulator::stream;
use altserve_core::{Law, Moments, PrepLaw, ServiceLaw};
use proptest::prelude::*;

fn service_law() -> impl Strategy<Value = ServiceLaw> {
    prop_oneof![
        (0.0..5.0f64).prop_map(|d| ServiceLaw::deterministic(d).unwrap()),
        (0.05..10.0f64).prop_map(|l| ServiceLaw::exponential(l).unwrap()),
        (0.0..=1.0f64, 2u32..12, 0.1..10.0f64)
            .prop_map(|(p, n, mu)| ServiceLaw::mixed_erlang(p, n, mu).unwrap()),
        (0.0..=1.0f64, 0.1..10.0f64, 0.1..10.0f64)
            .prop_map(|(p, m1, m2)| ServiceLaw::hyperexponential(p, 1.0 - p, m1, m2).unwrap()),
    ]
}

/// Mean draws and scv from `n` samples, with their standard errors.
fn sample_moments(law: &impl Law, n: usize, seed: u64) -> (f64, f64, f64, f64) {
    let mut rng = stream(seed, 0);
    let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / nf;
    let var = m2 - mean * mean;
    let mean_se = (var / nf).sqrt();
    let scv = var / (mean * mean);
    // Delta method for var/mean^2 using the first four sample moments.
    let m3 = xs.iter().map(|x| x.powi(3)).sum::<f64>() / nf;
    let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / nf;
    let grad = [
        -2.0 * m2 / mean.powi(3), // d/d m1 of m2/m1^2
        1.0 / (mean * mean),      // d/d m2
    ];
    let cov11 = m2 - mean * mean;
    let cov12 = m3 - mean * m2;
    let cov22 = m4 - m2 * m2;
    let scv_var = grad[0] * grad[0] * cov11 + 2.0 * grad[0] * grad[1] * cov12 + grad[1] * grad[1] * cov22;
    (mean, mean_se, scv, (scv_var / nf).sqrt())
}

#[test]
fn exponential_sample_mean_converges() {
    let law = ServiceLaw::exponential(1.0).unwrap();
    let (mean, _, _, _) = sample_moments(&law, 1_000_000, 5);
    assert!((mean - 1.0).abs() <= 3.0 / 1_000_000f64.sqrt(), "mean {mean}");
}

#[test]
fn erlang_five_sample_scv_converges() {
    let law = PrepLaw::erlang(5, 5.0).unwrap();
    let (mean, mean_se, scv, scv_se) = sample_moments(&law, 1_000_000, 6);
    assert!((mean - 1.0).abs() <= 3.0 * mean_se);
    assert!((scv - 0.2).abs() <= 3.0 * scv_se, "scv {scv} se {scv_se}");
}

#[test]
fn every_family_samples_its_moments() {
    let laws = [
        ServiceLaw::exponential(0.7).unwrap(),
        fit(Moments::new(1.0, 0.2).unwrap()).unwrap(),
        fit(Moments::new(2.0, 0.45).unwrap()).unwrap(),
        fit(Moments::new(1.0, 3.0).unwrap()).unwrap(),
    ];
    for (k, law) in laws.iter().enumerate() {
        let (mean, mean_se, scv, scv_se) = sample_moments(law, 1_000_000, 100 + k as u64);
        assert!((mean - law.mean()).abs() <= 3.0 * mean_se, "{law:?}: mean {mean}");
        let want = law.scv().unwrap();
        assert!((scv - want).abs() <= 3.0 * scv_se, "{law:?}: scv {scv} vs {want}");
    }
    let prep = PrepLaw::mixed(2.0, vec![0.3, 0.0, 0.7]).unwrap();
    let (mean, mean_se, scv, scv_se) = sample_moments(&prep, 1_000_000, 200);
    assert!((mean - prep.mean()).abs() <= 3.0 * mean_se);
    assert!((scv - prep.scv().unwrap()).abs() <= 3.0 * scv_se);
}

#[test]
fn geometric_phase_counts_match_direct_integration() {
    // P[k phases] = int_0^inf e^{-mu x} (mu x)^k / k! * lambda e^{-lambda x} dx
    let (lambda, mu) = (1.0, 1.0);
    let law = ServiceLaw::exponential(lambda).unwrap();
    for k in 0..6 {
        let fact: f64 = (1..=k).map(|v| v as f64).product();
        let f = |x: f64| {
            (-mu * x).exp() * (mu * x).powi(k) / fact * lambda * (-lambda * x).exp()
        };
        let oracle = common::integrate_panels(&f, 0.0, 80.0, 40, 1e-13);
        assert!((law.phase_count_pmf(mu, k as usize) - oracle).abs() < 1e-10, "k={k}");
    }
    assert!((law.phase_count_pmf(1.0, 1) - 0.25).abs() < 1e-15);
}

#[test]
fn phase_counts_sum_to_one_at_desk_scale() {
    // mu * E[A] = 50, the edge of desk scale.
    let law = ServiceLaw::deterministic(10.0).unwrap();
    let s: f64 = law.phase_count_pmfs(5.0, 200).iter().sum();
    assert!((s - 1.0).abs() < 1e-10, "{s}");
    // Negative binomial and geometric tails need more terms.
    let law = ServiceLaw::mixed_erlang(0.4, 5, 0.46).unwrap();
    let s: f64 = law.phase_count_pmfs(50.0 / law.mean(), 1_000).iter().sum();
    assert!((s - 1.0).abs() < 1e-10, "{s}");
    let law = ServiceLaw::exponential(0.2).unwrap();
    let mu = 50.0 / law.mean();
    let s: f64 = law.phase_count_pmfs(mu, 2_000).iter().sum();
    assert!((s - 1.0).abs() < 1e-10);
    let h = fit_hyperexponential(Moments::new(1.0, 3.0).unwrap()).unwrap();
    let s: f64 = h.phase_count_pmfs(5.0, 5_000).iter().sum();
    assert!((s - 1.0).abs() < 1e-10);
}

proptest! {
    #[test]
    fn transform_bounds_and_signs(law in service_law(), s in 0.01..20.0f64, i in 0usize..12) {
        let v0 = law.lt_deriv(0, s);
        prop_assert!(v0 > 0.0 && v0 <= 1.0);
        let vi = law.lt_deriv(i, s);
        if vi != 0.0 {
            prop_assert_eq!(vi.is_sign_negative(), i % 2 == 1);
        }
    }

    #[test]
    fn phase_counts_nonnegative_and_bounded(law in service_law(), mu in 0.05..10.0f64) {
        let pmf = law.phase_count_pmfs(mu, 60);
        prop_assert!(pmf.iter().all(|p| *p >= 0.0));
        prop_assert!(pmf.iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn fitting_roundtrip(mean in 0.01..10.0f64, scv in 0.05..10.0f64) {
        let m = Moments::new(mean, scv).unwrap();
        let law = fit(m).unwrap();
        prop_assert!((law.mean() - mean).abs() <= 1e-12, "{:?}", law);
        prop_assert!((law.scv().unwrap() - scv).abs() <= 1e-12, "{:?}", law);
        if scv <= 1.0 {
            prop_assert!(fit_mixed_erlang(m).is_ok());
        } else {
            prop_assert!(fit_hyperexponential(m).is_ok());
        }
    }

    #[test]
    fn service_law_json_roundtrip(law in service_law()) {
        let text = serde_json::to_string(&law).unwrap();
        let back: ServiceLaw = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, law);
    }
}

#[test]
fn json_field_names() {
    let v = serde_json::to_value(ServiceLaw::exponential(2.0).unwrap()).unwrap();
    assert_eq!(v, serde_json::json!({"type": "exp", "lambda": 2.0}));
    let v = serde_json::to_value(ServiceLaw::deterministic(0.0).unwrap()).unwrap();
    assert_eq!(v, serde_json::json!({"type": "det", "d": 0.0}));
    let v = serde_json::to_value(ServiceLaw::mixed_erlang(0.5, 3, 2.0).unwrap()).unwrap();
    assert_eq!(v, serde_json::json!({"type": "mixed_erlang", "p": 0.5, "n": 3, "mu": 2.0}));
    let v = serde_json::to_value(ServiceLaw::hyperexponential(0.25, 0.75, 1.0, 2.0).unwrap()).unwrap();
    assert_eq!(
        v,
        serde_json::json!({"type": "hyperexp", "p1": 0.25, "p2": 0.75, "mu1": 1.0, "mu2": 2.0})
    );
    let prep = PrepLaw::mixed(5.0, vec![0.5, 0.5]).unwrap();
    let v = serde_json::to_value(&prep).unwrap();
    assert_eq!(v, serde_json::json!({"type": "prep", "mu": 5.0, "kappa": [0.5, 0.5]}));
    let back: PrepLaw = serde_json::from_value(v).unwrap();
    assert_eq!(back, prep);
}

#[test]
fn json_rejects_invalid_laws() {
    assert!(serde_json::from_str::<ServiceLaw>(r#"{"type":"exp","lambda":-1}"#).is_err());
    assert!(serde_json::from_str::<ServiceLaw>(r#"{"type":"weibull","k":2}"#).is_err());
    assert!(serde_json::from_str::<PrepLaw>(r#"{"type":"prep","mu":1,"kappa":[0.2,0.2]}"#).is_err());
}
