//! Small dense linear algebra over any [`Scalar`] field, plus tensor
//! construction helpers in the index-notation style the geometry code uses.
//!
//! Matrices here are n x n for n = 2 or 3; elimination with partial pivoting
//! is plenty. Working over the scalar trait lets the same inversion run on
//! plain reals and on jets (division is defined in both fields).

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("singular matrix (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("matrix asymmetry {asymmetry:.3e} exceeds {tolerance:.1e}")]
    Asymmetric { asymmetry: f64, tolerance: f64 },
    #[error("matrix is not positive definite (leading minor {col})")]
    NotPositiveDefinite { col: usize },
}

/// Invert by Gaussian elimination with partial pivoting on the value parts.
pub fn invert<S: Scalar>(a: &[Vec<S>]) -> Result<Vec<Vec<S>>, LinalgError> {
    let n = a.len();
    let mut m: Vec<Vec<S>> = a.to_vec();
    let template = &a[0][0];
    let mut inv: Vec<Vec<S>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| template.constant(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| {
                m[r][col]
                    .value()
                    .abs()
                    .total_cmp(&m[s][col].value().abs())
            })
            .unwrap();
        let pivot = m[pivot_row][col].value();
        if pivot.abs() < 1e-300 {
            return Err(LinalgError::Singular { col, pivot });
        }
        m.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let d = m[col][col].clone();
        for j in 0..n {
            m[col][j] = m[col][j]
                .try_div(&d)
                .map_err(|_| LinalgError::Singular { col, pivot })?;
            inv[col][j] = inv[col][j]
                .try_div(&d)
                .map_err(|_| LinalgError::Singular { col, pivot })?;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r][col].clone();
            for j in 0..n {
                m[r][j] = m[r][j].clone() - factor.clone() * m[col][j].clone();
                inv[r][j] = inv[r][j].clone() - factor.clone() * inv[col][j].clone();
            }
        }
    }
    Ok(inv)
}

/// Positive-definiteness via Cholesky on the symmetrized matrix; asymmetry
/// beyond `asym_tol` is an input error, not a PD failure.
pub fn check_positive_definite(a: &[Vec<f64>], asym_tol: f64) -> Result<(), LinalgError> {
    let n = a.len();
    let mut asymmetry = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            asymmetry = asymmetry.max((a[i][j] - a[j][i]).abs());
        }
    }
    if asymmetry > asym_tol {
        return Err(LinalgError::Asymmetric {
            asymmetry,
            tolerance: asym_tol,
        });
    }
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = 0.5 * (a[i][j] + a[j][i]);
            for k in 0..j {
                acc -= l[i][k] * l[j][k];
            }
            if i == j {
                if acc <= 0.0 {
                    return Err(LinalgError::NotPositiveDefinite { col: i });
                }
                l[i][j] = acc.sqrt();
            } else {
                l[i][j] = acc / l[j][j];
            }
        }
    }
    Ok(())
}

pub fn mat<T>(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Vec<Vec<T>> {
    (0..n).map(|i| (0..n).map(|j| f(i, j)).collect()).collect()
}

pub fn ten3<T>(n: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Vec<Vec<Vec<T>>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| f(i, j, k)).collect())
                .collect()
        })
        .collect()
}

/// Sum `f(s)` over `s in 0..n`; `n` is at least 1 everywhere in this crate.
pub fn sum<T: std::ops::Add<Output = T>>(n: usize, f: impl FnMut(usize) -> T) -> T {
    (0..n).map(f).reduce(|a, b| a + b).expect("empty contraction")
}

pub fn max_abs1(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn max_abs2(m2: &[Vec<f64>]) -> f64 {
    m2.iter().fold(0.0f64, |m, row| m.max(max_abs1(row)))
}

pub fn max_abs3(t: &[Vec<Vec<f64>>]) -> f64 {
    t.iter().fold(0.0f64, |m, s| m.max(max_abs2(s)))
}

/// Max-abs entry of `a·b - I`.
pub fn inverse_residual(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut acc = if i == j { -1.0 } else { 0.0 };
            for k in 0..n {
                acc += a[i][k] * b[k][j];
            }
            worst = worst.max(acc.abs());
        }
    }
    worst
}
