//! Independent finite-difference oracles used by the test suites.
//!
//! Everything here differentiates plain `f64` evaluations with central
//! stencils; nothing touches the jet engine, so these values cross-check it.

use crate::expr::{EvalEnv, EvalError, ExprAst};

/// Central-difference weights for one direction, as (grid offset, weight/h^k).
fn stencil(order: u8, h: f64) -> Vec<(f64, f64)> {
    match order {
        1 => vec![(1.0, 0.5 / h), (-1.0, -0.5 / h)],
        2 => {
            let h2 = h * h;
            vec![(1.0, 1.0 / h2), (0.0, -2.0 / h2), (-1.0, 1.0 / h2)]
        }
        3 => {
            let h3 = h * h * h;
            vec![
                (2.0, 0.5 / h3),
                (1.0, -1.0 / h3),
                (-1.0, 1.0 / h3),
                (-2.0, -0.5 / h3),
            ]
        }
        _ => panic!("central stencils implemented for orders 1..=3"),
    }
}

/// Mixed central finite difference of `f` at `base` for a multi-index with
/// per-direction order at most 3.
pub fn fd_scalar(f: &dyn Fn(&[f64]) -> f64, base: &[f64], multi: &[u8], h: f64) -> f64 {
    match multi.iter().position(|&m| m > 0) {
        None => f(base),
        Some(dir) => {
            let mut rest = multi.to_vec();
            rest[dir] = 0;
            let mut acc = 0.0;
            for (offset, weight) in stencil(multi[dir], h) {
                let mut shifted = base.to_vec();
                shifted[dir] += offset * h;
                acc += weight * fd_scalar(f, &shifted, &rest, h);
            }
            acc
        }
    }
}

/// Richardson-extrapolated central difference: each stencil has O(h²) error,
/// so `(4 f(h/2) - f(h)) / 3` cancels the leading term.
pub fn fd_scalar_richardson(f: &dyn Fn(&[f64]) -> f64, base: &[f64], multi: &[u8], h: f64) -> f64 {
    let coarse = fd_scalar(f, base, multi, h);
    let fine = fd_scalar(f, base, multi, 0.5 * h);
    (4.0 * fine - coarse) / 3.0
}

fn expr_closure(ast: &ExprAst, n: usize) -> impl Fn(&[f64]) -> f64 {
    let ast = ast.clone();
    move |coords: &[f64]| -> f64 {
        let env = EvalEnv {
            x: coords[..n].to_vec(),
            p: coords[n..].to_vec(),
        };
        ast.eval(&env).expect("oracle evaluation left the domain")
    }
}

/// Finite-difference mixed partial of an expression over (x, p).
pub fn fd_partial(
    ast: &ExprAst,
    x: &[f64],
    p: &[f64],
    multi: &[u8],
    h: f64,
) -> Result<f64, EvalError> {
    let mut base = x.to_vec();
    base.extend_from_slice(p);
    Ok(fd_scalar(&expr_closure(ast, x.len()), &base, multi, h))
}

/// As [`fd_partial`] with Richardson extrapolation.
pub fn fd_partial_richardson(
    ast: &ExprAst,
    x: &[f64],
    p: &[f64],
    multi: &[u8],
    h: f64,
) -> Result<f64, EvalError> {
    let mut base = x.to_vec();
    base.extend_from_slice(p);
    Ok(fd_scalar_richardson(
        &expr_closure(ast, x.len()),
        &base,
        multi,
        h,
    ))
}

/// Christoffel symbols (second kind) of a base Riemannian metric given as a
/// closure `x -> g_ij`, by finite differences.
pub fn christoffel_fd(
    metric: &dyn Fn(&[f64]) -> Vec<Vec<f64>>,
    x: &[f64],
    h: f64,
) -> Vec<Vec<Vec<f64>>> {
    let n = x.len();
    let g = metric(x);
    let g_inv = invert_f64(&g);
    // dg[k][i][j] = ∂_k g_ij
    let mut dg = vec![vec![vec![0.0; n]; n]; n];
    for k in 0..n {
        let mut plus = x.to_vec();
        plus[k] += h;
        let mut minus = x.to_vec();
        minus[k] -= h;
        let gp = metric(&plus);
        let gm = metric(&minus);
        for i in 0..n {
            for j in 0..n {
                dg[k][i][j] = (gp[i][j] - gm[i][j]) / (2.0 * h);
            }
        }
    }
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut acc = 0.0;
                for s in 0..n {
                    acc += 0.5 * g_inv[i][s] * (dg[k][j][s] + dg[j][s][k] - dg[s][j][k]);
                }
                gamma[i][j][k] = acc;
            }
        }
    }
    gamma
}

/// Riemann tensor `R^i_{jkl}` (curvature of the Levi-Civita connection, plane
/// indices last) of a base metric, by finite differences of the Christoffels.
pub fn riemann_fd(
    metric: &dyn Fn(&[f64]) -> Vec<Vec<f64>>,
    x: &[f64],
    h: f64,
) -> Vec<Vec<Vec<Vec<f64>>>> {
    let n = x.len();
    let gamma = christoffel_fd(metric, x, h);
    let mut dgamma = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for k in 0..n {
        let mut plus = x.to_vec();
        plus[k] += h;
        let mut minus = x.to_vec();
        minus[k] -= h;
        let gp = christoffel_fd(metric, &plus, h);
        let gm = christoffel_fd(metric, &minus, h);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    dgamma[k][i][j][l] = (gp[i][j][l] - gm[i][j][l]) / (2.0 * h);
                }
            }
        }
    }
    let mut riemann = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = dgamma[k][i][l][j] - dgamma[l][i][k][j];
                    for s in 0..n {
                        acc += gamma[i][k][s] * gamma[s][l][j] - gamma[i][l][s] * gamma[s][k][j];
                    }
                    riemann[i][j][k][l] = acc;
                }
            }
        }
    }
    riemann
}

fn invert_f64(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    crate::linalg::invert(a).expect("oracle metric must be invertible")
}
