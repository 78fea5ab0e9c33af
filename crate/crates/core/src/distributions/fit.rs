//! Two-moment fits: mixed Erlang below `scv = 1`, balanced-means
//! hyperexponential above it.

use super::{Moments, ServiceLaw, MAX_PHASES};
use crate::error::{Error, Result};

/// Fits Erlang-`(n-1)`/Erlang-`n` with a common rate, `1/n <= scv <= 1/(n-1)`.
pub fn fit_mixed_erlang(m: Moments) -> Result<ServiceLaw> {
    let Moments { mean, scv } = Moments::new(m.mean, m.scv)?;
    if scv > 1.0 {
        return Err(Error::OutOfFamily(format!(
            "mixed Erlang needs 0 < scv <= 1, got {scv}"
        )));
    }
    let n = ((1.0 / scv).ceil() as usize).max(2);
    if n > MAX_PHASES {
        return Err(Error::OutOfFamily(format!(
            "scv {scv} needs {n} phases, more than {MAX_PHASES}"
        )));
    }
    let nf = n as f64;
    let disc = (nf * (1.0 + scv) - nf * nf * scv).max(0.0);
    let p = ((nf * scv - disc.sqrt()) / (1.0 + scv)).clamp(0.0, 1.0);
    let mu = (nf - p) / mean;
    ServiceLaw::mixed_erlang(p, n as u32, mu)
}

/// Fits a two-branch hyperexponential with balanced means, `scv > 1`.
pub fn fit_hyperexponential(m: Moments) -> Result<ServiceLaw> {
    let Moments { mean, scv } = Moments::new(m.mean, m.scv)?;
    if scv <= 1.0 {
        return Err(Error::OutOfFamily(format!(
            "hyperexponential needs scv > 1, got {scv}"
        )));
    }
    let p1 = 0.5 * (1.0 + ((scv - 1.0) / (scv + 1.0)).sqrt());
    let p2 = 1.0 - p1;
    ServiceLaw::hyperexponential(p1, p2, 2.0 * p1 / mean, 2.0 * p2 / mean)
}

/// Dispatches on `scv`: exponential at exactly 1, mixed Erlang below,
/// hyperexponential above.
pub fn fit(m: Moments) -> Result<ServiceLaw> {
    let m = Moments::new(m.mean, m.scv)?;
    if m.scv == 1.0 {
        ServiceLaw::exponential(1.0 / m.mean)
    } else if m.scv < 1.0 {
        fit_mixed_erlang(m)
    } else {
        fit_hyperexponential(m)
    }
}
