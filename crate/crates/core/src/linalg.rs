//! Dense LU solve with one step of iterative refinement.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Systems whose 1-norm condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    /// `||A||_1 ||A^{-1}||_1`.
    pub condition: f64,
    /// `||A x - b||_inf` after refinement.
    pub residual: f64,
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `a x = b` for a row-major square `a`.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Solution> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter(format!("expected a {n}x{n} matrix")));
    }
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let rhs = DVector::from_column_slice(b);
    let lu = m.clone().lu();
    let inverse = lu
        .try_inverse()
        .ok_or_else(|| Error::NumericFailure("singular matrix".into()))?;
    let condition = norm1(&m) * norm1(&inverse);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::NumericFailure(format!(
            "condition estimate {condition:e} exceeds {MAX_CONDITION:e}"
        )));
    }
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::NumericFailure("singular matrix".into()))?;
    let r = &rhs - &m * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let residual = (&rhs - &m * &x).amax();
    Ok(Solution { x: x.iter().copied().collect(), condition, residual })
}
