//! Base Cartan-space tensors at a point of the punctured cotangent bundle.
//!
//! Everything is computed inside one jet algebra over the 2n coordinates, so
//! each tensor is a function germ: taking its fiber derivative `∂̇^i` or its
//! horizontal derivative `δ_i = ∂_i + N_ij ∂̇^j` is a coefficient operation,
//! and the tower composes until the configured jet order is spent.
//!
//! Index conventions (all indices 0-based in code):
//! - `g_upper[i][j]`      = g^ij, the fiber Hessian of K²/2
//! - `g_lower[i][j]`      = g_ij, its matrix inverse
//! - `p_upper[i]`         = p^i = g^ij p_j
//! - `cartan_upper[i][j][k]` = C^ijk = -1/4 ∂̇^i∂̇^j∂̇^k K²
//! - `cartan_mixed[i][j][k]` = C^{jk}_i = g_is C^{sjk}
//! - `christoffel[i][j][k]`  = γ^i_jk (formal Christoffel symbols of g_ij)
//! - `nonlinear[i][j]`    = N_ij (Miron's nonlinear connection; symmetric)
//! - `h_conn[i][j][k]`    = H^i_jk (h-coefficients of the canonical metrical
//!                          connection)
//! - `p_tensor[i][j][k]`  = P^i_jk = H^i_jk - ∂̇^i N_jk
//! - `r_curv[k][i][j]`    = R_kij, the coefficient of the horizontal bracket:
//!                          [δ_i, δ_j] = R_kij ∂̇^k

use std::sync::Arc;

use thiserror::Error;

use crate::expr::{EvalError, ExprAst};
use crate::jet::{seed_env, JetScalar, JetSpace};
use crate::linalg::{self, LinalgError};
use crate::report::Residual;
use crate::scalar::Scalar;
use crate::tol;

/// A point (x, p) of T*M with p ≠ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentPoint {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl CotangentPoint {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Result<Self, GeometryError> {
        if x.len() != p.len() {
            return Err(GeometryError::Dimension {
                x: x.len(),
                p: p.len(),
            });
        }
        if p.iter().all(|&v| v == 0.0) {
            return Err(GeometryError::ZeroMomentum);
        }
        Ok(CotangentPoint { x, p })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("fiber metric not positive definite: {0}")]
    SingularMetric(LinalgError),
    #[error("momentum must be nonzero (zero section is excluded)")]
    ZeroMomentum,
    #[error("coordinate dimensions differ: x has {x}, p has {p}")]
    Dimension { x: usize, p: usize },
    #[error("tensor valence mismatch: {0}")]
    Valence(String),
    #[error("jet order {got} below the {need} this operation needs")]
    OrderBudget { need: usize, got: usize },
}

type Mat = Vec<Vec<JetScalar>>;
type Ten3 = Vec<Vec<Vec<JetScalar>>>;

/// All base tensors at one point, jet-valued.
pub struct CartanTensors {
    n: usize,
    space: Arc<JetSpace>,
    point: CotangentPoint,
    /// Coordinate jets (x first, then p), exact seeds.
    pub x: Vec<JetScalar>,
    pub p: Vec<JetScalar>,
    pub k2: JetScalar,
    pub tau: JetScalar,
    pub g_upper: Mat,
    pub g_lower: Mat,
    pub p_upper: Vec<JetScalar>,
    pub cartan_upper: Ten3,
    /// C^{jk}_i stored as [i][j][k].
    pub cartan_mixed: Ten3,
    /// C^i_jk = g_jl g_kh C^{ilh} stored as [i][j][k].
    pub cartan_ud: Ten3,
    /// C_ijk, fully lowered.
    pub cartan_lower: Ten3,
    /// I^j = C^{js}_s.
    pub mean_cartan: Vec<JetScalar>,
    pub christoffel: Ten3,
    pub nonlinear: Mat,
    /// ∂̇^i N_jk stored as [i][j][k]; these are the vertical bracket
    /// coefficients: [δ_j, ∂̇^i] = -(∂̇^i N_jk) ∂̇^k.
    pub nonlinear_dp: Ten3,
    pub h_conn: Ten3,
    pub p_tensor: Ten3,
    pub r_curv: Ten3,
}

impl CartanTensors {
    /// Build the full tensor tower at `pt` with jets of the given order
    /// (at least 4: P and R consume four derivative levels of K²).
    pub fn build(
        k_ast: &ExprAst,
        pt: &CotangentPoint,
        order: usize,
    ) -> Result<CartanTensors, GeometryError> {
        if order < 4 {
            return Err(GeometryError::OrderBudget {
                need: 4,
                got: order,
            });
        }
        let space = JetSpace::shared(2 * pt.dim(), order);
        Self::build_in(&space, k_ast, pt)
    }

    /// As [`build`](Self::build) with a caller-provided jet space (shared
    /// across points of a run).
    pub fn build_in(
        space: &Arc<JetSpace>,
        k_ast: &ExprAst,
        pt: &CotangentPoint,
    ) -> Result<CartanTensors, GeometryError> {
        let n = pt.dim();
        assert_eq!(space.dim(), 2 * n);
        let env = seed_env(space, &pt.x, &pt.p);
        let k2_ast = k_ast.squared();
        let k2 = k2_ast.eval(&env)?;
        let tau = k2.constant(0.5) * k2.clone();

        let vd = |f: &JetScalar, i: usize| f.diff(n + i);
        let hd = |f: &JetScalar, i: usize| f.diff(i);

        // g^ij = 1/2 ∂̇^i ∂̇^j K², symmetric by construction
        let dk2: Vec<JetScalar> = (0..n).map(|i| vd(&k2, i)).collect();
        let mut g_upper = linalg::mat(n, |_, _| k2.constant(0.0));
        for i in 0..n {
            for j in i..n {
                let entry = k2.constant(0.5) * vd(&dk2[i], j);
                g_upper[i][j] = entry.clone();
                g_upper[j][i] = entry;
            }
        }
        let g_values: Vec<Vec<f64>> = g_upper
            .iter()
            .map(|row| row.iter().map(|e| e.value()).collect())
            .collect();
        linalg::check_positive_definite(&g_values, 1e-10)
            .map_err(GeometryError::SingularMetric)?;
        let g_lower = linalg::invert(&g_upper).map_err(GeometryError::SingularMetric)?;

        let p_upper: Vec<JetScalar> = dk2.iter().map(|d| d.constant(0.5) * d.clone()).collect();

        // C^ijk = -1/4 ∂̇^i ∂̇^j ∂̇^k K², totally symmetric
        let mut cartan_upper = linalg::ten3(n, |_, _, _| k2.constant(0.0));
        for i in 0..n {
            for j in i..n {
                let dij = vd(&dk2[i], j);
                for k in j..n {
                    let entry = k2.constant(-0.25) * vd(&dij, k);
                    for (a, b, c) in [
                        (i, j, k),
                        (i, k, j),
                        (j, i, k),
                        (j, k, i),
                        (k, i, j),
                        (k, j, i),
                    ] {
                        cartan_upper[a][b][c] = entry.clone();
                    }
                }
            }
        }

        let sum = |f: &mut dyn FnMut(usize) -> JetScalar| linalg::sum(n, f);

        let cartan_ud = linalg::ten3(n, |i, j, k| {
            sum(&mut |l| {
                &g_lower[j][l]
                    * &sum(&mut |h| &g_lower[k][h] * &cartan_upper[i][l][h])
            })
        });
        let cartan_mixed = linalg::ten3(n, |i, j, k| {
            sum(&mut |s| &g_lower[i][s] * &cartan_upper[s][j][k])
        });
        let cartan_lower = linalg::ten3(n, |i, j, k| {
            sum(&mut |r| &g_lower[i][r] * &cartan_ud[r][j][k])
        });
        let mean_cartan: Vec<JetScalar> = (0..n)
            .map(|j| sum(&mut |s| cartan_mixed[s][j][s].clone()))
            .collect();

        // formal Christoffel symbols of g_ij, from its x-derivatives
        let dgx = linalg::ten3(n, |k, i, j| hd(&g_lower[i][j], k));
        let christoffel = linalg::ten3(n, |i, j, k| {
            let inner = &mut |s: usize| {
                let braces = &(&dgx[k][j][s] + &dgx[j][s][k]) - &dgx[s][j][k];
                &g_upper[i][s] * &braces
            };
            k2.constant(0.5) * sum(inner)
        });

        // Miron nonlinear connection: N_ij = γ°_ij - 1/2 γ°_h° ∂̇^h g_ij
        let gamma0 = linalg::mat(n, |i, j| {
            sum(&mut |h| &christoffel[h][i][j] * &env.p[h])
        });
        let gamma00: Vec<JetScalar> = (0..n)
            .map(|h| {
                sum(&mut |i| {
                    &env.p[i] * &sum(&mut |k| &christoffel[i][h][k] * &p_upper[k])
                })
            })
            .collect();
        let mut nonlinear = linalg::mat(n, |_, _| k2.constant(0.0));
        for i in 0..n {
            for j in i..n {
                let correction = sum(&mut |h| &gamma00[h] * &vd(&g_lower[i][j], h));
                let entry = &gamma0[i][j] - &(k2.constant(0.5) * correction);
                nonlinear[i][j] = entry.clone();
                nonlinear[j][i] = entry;
            }
        }

        let nonlinear_dp = linalg::ten3(n, |i, j, k| vd(&nonlinear[j][k], i));

        let del = |f: &JetScalar, i: usize| -> JetScalar {
            &hd(f, i) + &sum(&mut |j| &nonlinear[i][j] * &vd(f, j))
        };

        // canonical metrical connection H^i_jk, from δ-derivatives of g_ij
        let del_g = linalg::ten3(n, |a, i, j| del(&g_lower[i][j], a));
        let h_conn = linalg::ten3(n, |i, j, k| {
            let inner = &mut |s: usize| {
                let braces = &(&del_g[j][s][k] + &del_g[k][j][s]) - &del_g[s][j][k];
                &g_upper[i][s] * &braces
            };
            k2.constant(0.5) * sum(inner)
        });

        let p_tensor =
            linalg::ten3(n, |i, j, k| &h_conn[i][j][k] - &nonlinear_dp[i][j][k]);

        // R_kij = δ_i N_kj - δ_j N_ki, the horizontal bracket coefficient
        let del_n = linalg::ten3(n, |a, k, j| del(&nonlinear[k][j], a));
        let r_curv = linalg::ten3(n, |k, i, j| &del_n[i][k][j] - &del_n[j][k][i]);

        Ok(CartanTensors {
            n,
            space: space.clone(),
            point: pt.clone(),
            x: env.x,
            p: env.p,
            k2,
            tau,
            g_upper,
            g_lower,
            p_upper,
            cartan_upper,
            cartan_mixed,
            cartan_ud,
            cartan_lower,
            mean_cartan,
            christoffel,
            nonlinear,
            nonlinear_dp,
            h_conn,
            p_tensor,
            r_curv,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn point(&self) -> &CotangentPoint {
        &self.point
    }

    /// Fiber derivative ∂̇^i.
    pub fn vertical(&self, f: &JetScalar, i: usize) -> JetScalar {
        f.diff(self.n + i)
    }

    /// Horizontal (adapted) derivative δ_i = ∂_i + N_ij ∂̇^j.
    pub fn horizontal(&self, f: &JetScalar, i: usize) -> JetScalar {
        &f.diff(i)
            + &linalg::sum(self.n, |j| &self.nonlinear[i][j] * &f.diff(self.n + j))
    }

    /// f64 snapshot of every tensor at the point.
    pub fn context(&self) -> CartanContext {
        let n = self.n;
        let v2 = |m: &Mat| -> Vec<Vec<f64>> {
            m.iter()
                .map(|row| row.iter().map(|e| e.value()).collect())
                .collect()
        };
        let v3 = |t: &Ten3| -> Vec<Vec<Vec<f64>>> {
            t.iter()
                .map(|m| {
                    m.iter()
                        .map(|row| row.iter().map(|e| e.value()).collect())
                        .collect()
                })
                .collect()
        };
        CartanContext {
            n,
            point: self.point.clone(),
            k2: self.k2.value(),
            tau: self.tau.value(),
            g_upper: v2(&self.g_upper),
            g_lower: v2(&self.g_lower),
            p_upper: self.p_upper.iter().map(|e| e.value()).collect(),
            cartan_upper: v3(&self.cartan_upper),
            cartan_mixed: v3(&self.cartan_mixed),
            christoffel: v3(&self.christoffel),
            nonlinear: v2(&self.nonlinear),
            h_conn: v3(&self.h_conn),
            p_tensor: v3(&self.p_tensor),
            r_curv: v3(&self.r_curv),
            mean_cartan: self.mean_cartan.iter().map(|e| e.value()).collect(),
        }
    }

    /// δ_i applied to a named scalar field, at the point.
    pub fn adapted_derivative(&self, field: ScalarField, i: usize) -> f64 {
        match field {
            ScalarField::K2 => self.horizontal(&self.k2, i).value(),
            ScalarField::Tau => self.horizontal(&self.tau, i).value(),
            ScalarField::Momentum(k) => self.horizontal(&self.p[k], i).value(),
        }
    }
}

/// Scalar fields addressable by [`CartanTensors::adapted_derivative`].
#[derive(Debug, Clone, Copy)]
pub enum ScalarField {
    K2,
    Tau,
    Momentum(usize),
}

/// f64 view of the base tensors (shapes as documented on [`CartanTensors`]).
#[derive(Debug, Clone)]
pub struct CartanContext {
    pub n: usize,
    pub point: CotangentPoint,
    pub k2: f64,
    pub tau: f64,
    pub g_upper: Vec<Vec<f64>>,
    pub g_lower: Vec<Vec<f64>>,
    pub p_upper: Vec<f64>,
    pub cartan_upper: Vec<Vec<Vec<f64>>>,
    pub cartan_mixed: Vec<Vec<Vec<f64>>>,
    pub christoffel: Vec<Vec<Vec<f64>>>,
    pub nonlinear: Vec<Vec<f64>>,
    pub h_conn: Vec<Vec<Vec<f64>>>,
    pub p_tensor: Vec<Vec<Vec<f64>>>,
    pub r_curv: Vec<Vec<Vec<f64>>>,
    pub mean_cartan: Vec<f64>,
}

impl CartanContext {
    pub fn max_cartan(&self) -> f64 {
        linalg::max_abs3(&self.cartan_upper)
    }

    /// Whether the structure is Riemannian at this point (Cartan tensor
    /// below the detection threshold).
    pub fn is_riemannian(&self) -> bool {
        self.max_cartan() <= tol::RIEMANNIAN_DETECT
    }
}

/// Index variance of one tensor slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Upper,
    Lower,
}

/// A distinguished tensor field handed to [`h_covariant`]: jet-valued
/// components in row-major layout with one variance flag per slot.
pub struct DTensor {
    pub variance: Vec<Variance>,
    pub components: Vec<JetScalar>,
    pub n: usize,
}

impl DTensor {
    pub fn new(
        n: usize,
        variance: Vec<Variance>,
        components: Vec<JetScalar>,
    ) -> Result<DTensor, GeometryError> {
        let expected = n.pow(variance.len() as u32);
        if components.len() != expected {
            return Err(GeometryError::Valence(format!(
                "{} components for a rank-{} tensor over n={} (expected {})",
                components.len(),
                variance.len(),
                n,
                expected
            )));
        }
        Ok(DTensor {
            variance,
            components,
            n,
        })
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn get(&self, idx: &[usize]) -> &JetScalar {
        &self.components[self.flat(idx)]
    }
}

/// h-covariant derivative of a d-tensor field: δ_k on components, plus an
/// H-term per slot with sign by variance. The new lower index comes last.
pub fn h_covariant(t: &CartanTensors, field: &DTensor) -> Result<DTensor, GeometryError> {
    let n = t.dim();
    if field.n != n {
        return Err(GeometryError::Valence(format!(
            "tensor over n={} fed to a context with n={}",
            field.n, n
        )));
    }
    let rank = field.variance.len();
    let mut out_variance = field.variance.clone();
    out_variance.push(Variance::Lower);
    let mut components = Vec::with_capacity(field.components.len() * n);
    let mut idx = vec![0usize; rank];
    for flat in 0..field.components.len() {
        let mut rem = flat;
        for a in (0..rank).rev() {
            idx[a] = rem % n;
            rem /= n;
        }
        for k in 0..n {
            let mut acc = t.horizontal(&field.components[flat], k);
            for (slot, variance) in field.variance.iter().enumerate() {
                let held = idx[slot];
                let correction = linalg::sum(n, |s| {
                    let mut shifted = idx.clone();
                    shifted[slot] = s;
                    match variance {
                        Variance::Upper => &t.h_conn[held][s][k] * field.get(&shifted),
                        Variance::Lower => &t.h_conn[s][held][k] * field.get(&shifted),
                    }
                });
                acc = match variance {
                    Variance::Upper => &acc + &correction,
                    Variance::Lower => &acc - &correction,
                };
            }
            components.push(acc);
        }
    }
    DTensor::new(n, out_variance, components)
}

/// Residuals of the structural base identities over a sample of points,
/// merged by max into report checks.
pub fn verify_base_identities(
    k_ast: &ExprAst,
    samples: &[CotangentPoint],
) -> Result<Vec<crate::report::Check>, GeometryError> {
    assert!(!samples.is_empty(), "at least one sample point required");
    let space = JetSpace::shared(2 * samples[0].dim(), 4);
    let mut checks: Vec<crate::report::Check> = Vec::new();
    for pt in samples {
        let tensors = CartanTensors::build_in(&space, k_ast, pt)?;
        for residual in base_residuals(&tensors, k_ast)? {
            match checks.iter_mut().find(|c| c.name == residual.name) {
                Some(check) => {
                    check.n_points += 1;
                    check.max_abs_residual = check.max_abs_residual.max(residual.value);
                    check.pass = check.max_abs_residual <= check.tolerance;
                }
                None => checks.push(crate::report::Check {
                    name: residual.name.to_string(),
                    identity: residual.identity.to_string(),
                    max_abs_residual: residual.value,
                    tolerance: residual.tolerance,
                    pass: residual.value <= residual.tolerance,
                    n_points: 1,
                    hard: true,
                }),
            }
        }
    }
    Ok(checks)
}

/// Fiber metric values alone (order-2 jets), for homogeneity probes.
pub fn fiber_metric_values(
    k_ast: &ExprAst,
    x: &[f64],
    p: &[f64],
) -> Result<Vec<Vec<f64>>, GeometryError> {
    let n = x.len();
    let space = JetSpace::shared(2 * n, 2);
    let env = seed_env(&space, x, p);
    let k2 = k_ast.squared().eval(&env)?;
    let mut out = vec![vec![0.0; n]; n];
    let mut multi = vec![0u8; 2 * n];
    for i in 0..n {
        for j in 0..n {
            multi.iter_mut().for_each(|e| *e = 0);
            multi[n + i] += 1;
            multi[n + j] += 1;
            out[i][j] = 0.5 * k2.partial(&multi);
        }
    }
    Ok(out)
}

/// Residuals of the structural identities of the base geometry at one point.
pub fn base_residuals(t: &CartanTensors, k_ast: &ExprAst) -> Result<Vec<Residual>, GeometryError> {
    let n = t.dim();
    let ctx = t.context();
    let mut out = Vec::new();
    let mut push = |name, identity, tolerance, value: f64| {
        out.push(Residual::new(name, identity, tolerance, value));
    };

    push(
        "base.inverse_metric",
        "g^is g_sj = delta^i_j",
        tol::MATRIX,
        linalg::inverse_residual(&ctx.g_upper, &ctx.g_lower),
    );

    let p_upper_defect = (0..n).fold(0.0f64, |m, i| {
        let contracted: f64 = (0..n).map(|j| ctx.g_upper[i][j] * t.point.p[j]).sum();
        m.max((ctx.p_upper[i] - contracted).abs())
    });
    push(
        "base.p_upper",
        "p^i = g^ij p_j",
        tol::DIRECT_AD,
        p_upper_defect,
    );

    let k2_trace: f64 = (0..n).map(|i| t.point.p[i] * ctx.p_upper[i]).sum();
    push(
        "base.k2_trace",
        "K^2 = p_i p^i",
        tol::DIRECT_AD,
        (k2_trace - ctx.k2).abs(),
    );

    let mut homogeneity = 0.0f64;
    for lambda in [0.5, 2.0] {
        let scaled: Vec<f64> = t.point.p.iter().map(|v| v * lambda).collect();
        let g_scaled = fiber_metric_values(k_ast, &t.point.x, &scaled)?;
        for i in 0..n {
            for j in 0..n {
                homogeneity = homogeneity.max((g_scaled[i][j] - ctx.g_upper[i][j]).abs());
            }
        }
    }
    push(
        "base.g_homogeneity",
        "g^ij(x, lambda p) = g^ij(x, p)",
        tol::DIRECT_AD,
        homogeneity,
    );

    let mut c_contraction = 0.0f64;
    let mut c_symmetry = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            c_symmetry = c_symmetry.max(
                (0..n).fold(0.0f64, |m, k| {
                    m.max((ctx.cartan_mixed[i][j][k] - ctx.cartan_mixed[i][k][j]).abs())
                }),
            );
            let contracted: f64 = (0..n)
                .map(|k| ctx.cartan_upper[i][j][k] * t.point.p[k])
                .sum();
            c_contraction = c_contraction.max(contracted.abs());
        }
    }
    push(
        "base.c_contraction",
        "C^ijk p_k = 0",
        tol::DIRECT_AD,
        c_contraction,
    );
    push(
        "base.c_torsion",
        "C^{jk}_i = C^{kj}_i",
        tol::DIRECT_AD,
        c_symmetry,
    );

    let mean_orthogonal: f64 = (0..n).map(|j| ctx.mean_cartan[j] * t.point.p[j]).sum();
    push(
        "base.mean_cartan_orthogonal",
        "I^j p_j = 0",
        tol::DIRECT_AD,
        mean_orthogonal.abs(),
    );

    let n_symmetry = (0..n).fold(0.0f64, |m, i| {
        (0..n).fold(m, |m, j| {
            m.max((ctx.nonlinear[i][j] - ctx.nonlinear[j][i]).abs())
        })
    });
    push(
        "base.n_symmetry",
        "N_ij = N_ji",
        tol::DIRECT_AD,
        n_symmetry,
    );

    let deflection = (0..n).fold(0.0f64, |m, i| {
        (0..n).fold(m, |m, j| {
            let contracted: f64 = (0..n).map(|k| t.point.p[k] * ctx.h_conn[k][i][j]).sum();
            m.max((ctx.nonlinear[i][j] - contracted).abs())
        })
    });
    push(
        "base.deflection",
        "N_ij - p_k H^k_ij = 0",
        tol::COMPOSED,
        deflection,
    );

    let h_torsion = linalg::max_abs3(&linalg::ten3(n, |i, j, k| {
        ctx.h_conn[i][j][k] - ctx.h_conn[i][k][j]
    }));
    push(
        "base.h_torsion",
        "H^i_jk = H^i_kj",
        tol::DIRECT_AD,
        h_torsion,
    );

    let r_momentum = (0..n).fold(0.0f64, |m, i| {
        (0..n).fold(m, |m, j| {
            let contracted: f64 = (0..n).map(|k| ctx.r_curv[k][i][j] * ctx.p_upper[k]).sum();
            m.max(contracted.abs())
        })
    });
    push(
        "base.r_momentum",
        "R_kij p^k = 0",
        tol::COMPOSED,
        r_momentum,
    );

    let p_upper_contraction = (0..n).fold(0.0f64, |m, i| {
        (0..n).fold(m, |m, k| {
            let contracted: f64 = (0..n).map(|j| ctx.p_tensor[i][j][k] * ctx.p_upper[j]).sum();
            m.max(contracted.abs())
        })
    });
    push(
        "base.p_tensor_momentum_upper",
        "P^i_jk p^j = 0",
        tol::COMPOSED,
        p_upper_contraction,
    );

    let p_lower_contraction = (0..n).fold(0.0f64, |m, j| {
        (0..n).fold(m, |m, k| {
            let contracted: f64 = (0..n).map(|i| t.point.p[i] * ctx.p_tensor[i][j][k]).sum();
            m.max(contracted.abs())
        })
    });
    push(
        "base.p_tensor_momentum_lower",
        "p_i P^i_jk = 0",
        tol::COMPOSED,
        p_lower_contraction,
    );

    let mut metric_compat = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let lhs = t.horizontal(&t.g_lower[j][k], i).value();
                let rhs: f64 = (0..n)
                    .map(|s| {
                        ctx.h_conn[s][j][i] * ctx.g_lower[s][k]
                            + ctx.h_conn[s][k][i] * ctx.g_lower[j][s]
                    })
                    .sum();
                metric_compat = metric_compat.max((lhs - rhs).abs());
            }
        }
    }
    push(
        "base.metric_compat_h",
        "delta_i g_jk = H^s_ji g_sk + H^s_ki g_js",
        tol::COMPOSED,
        metric_compat,
    );

    let g_field = DTensor::new(
        n,
        vec![Variance::Upper, Variance::Upper],
        t.g_upper.iter().flatten().cloned().collect(),
    )?;
    let metricity = h_covariant(t, &g_field)?;
    push(
        "base.metricity_upper",
        "g^ij_{|k} = 0",
        tol::METRICITY,
        linalg::max_abs1(
            &metricity
                .components
                .iter()
                .map(|c| c.value())
                .collect::<Vec<_>>(),
        ),
    );

    let p_field = DTensor::new(n, vec![Variance::Lower], t.p.clone())?;
    let p_parallel = h_covariant(t, &p_field)?;
    push(
        "base.momentum_parallel",
        "p_{i|j} = 0",
        tol::DIRECT_AD,
        linalg::max_abs1(
            &p_parallel
                .components
                .iter()
                .map(|c| c.value())
                .collect::<Vec<_>>(),
        ),
    );

    let k2_horizontal = (0..n).fold(0.0f64, |m, i| {
        m.max(t.adapted_derivative(ScalarField::K2, i).abs())
    });
    push(
        "base.k2_horizontal",
        "delta_j K^2 = 0",
        tol::DIRECT_AD,
        k2_horizontal,
    );

    let k2_vertical = (0..n).fold(0.0f64, |m, j| {
        m.max((t.vertical(&t.k2, j).value() - 2.0 * ctx.p_upper[j]).abs())
    });
    push(
        "base.k2_vertical",
        "K^2|^j = 2 p^j",
        tol::DIRECT_AD,
        k2_vertical,
    );

    if ctx.is_riemannian() {
        let reduction = (0..n).fold(0.0f64, |m, i| {
            (0..n).fold(m, |m, j| {
                let gamma0: f64 = (0..n)
                    .map(|k| ctx.christoffel[k][i][j] * t.point.p[k])
                    .sum();
                m.max((ctx.nonlinear[i][j] - gamma0).abs())
            })
        });
        push(
            "base.riemannian_n_reduction",
            "N_ij = gamma^k_ij p_k (Riemannian input)",
            tol::DIRECT_AD,
            reduction,
        );
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::oracle;

    fn build(expr: &str, x: [f64; 2], p: [f64; 2]) -> CartanTensors {
        let ast = parse(expr, 2).unwrap();
        let pt = CotangentPoint::new(x.to_vec(), p.to_vec()).unwrap();
        CartanTensors::build(&ast, &pt, 4).unwrap()
    }

    #[test]
    fn zero_momentum_is_rejected() {
        assert!(matches!(
            CotangentPoint::new(vec![0.0, 0.0], vec![0.0, 0.0]),
            Err(GeometryError::ZeroMomentum)
        ));
    }

    #[test]
    fn euclidean_structure_is_flat() {
        let t = build("sqrt(p1^2+p2^2)", [0.3, -0.8], [0.6, 1.1]);
        let ctx = t.context();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ctx.g_upper[i][j] - expected).abs() < 1e-12);
            }
        }
        assert!(ctx.max_cartan() < 1e-12);
        assert!(linalg::max_abs2(&ctx.nonlinear) < 1e-12);
        assert!(linalg::max_abs3(&ctx.h_conn) < 1e-12);
        assert!(linalg::max_abs3(&ctx.r_curv) < 1e-12);
    }

    #[test]
    fn half_plane_christoffels_match_the_classical_values() {
        // fiber metric x2^2·id has inverse id/x2^2, the half-plane metric
        let t = build("sqrt(x2^2*(p1^2+p2^2))", [0.0, 1.0], [1.0, 0.0]);
        let ctx = t.context();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ctx.g_upper[i][j] - expected).abs() < 1e-12);
            }
        }
        // γ^1_12 = -1/x2 = -1
        assert!((ctx.christoffel[0][0][1] + 1.0).abs() < 1e-10);
        assert!((ctx.christoffel[1][0][0] - 1.0).abs() < 1e-10);
        assert!((ctx.christoffel[1][1][1] + 1.0).abs() < 1e-10);
        assert!(ctx.christoffel[0][0][0].abs() < 1e-10);
    }

    #[test]
    fn half_plane_christoffels_match_finite_differences() {
        let t = build("sqrt(x2^2*(p1^2+p2^2))", [0.4, 1.7], [0.9, -0.2]);
        let ctx = t.context();
        let metric = |x: &[f64]| {
            let s = 1.0 / (x[1] * x[1]);
            vec![vec![s, 0.0], vec![0.0, s]]
        };
        let gamma_fd = oracle::christoffel_fd(&metric, &t.point.x, 1e-5);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert!(
                        (ctx.christoffel[i][j][k] - gamma_fd[i][j][k]).abs() < 1e-7,
                        "gamma[{i}][{j}][{k}]"
                    );
                }
            }
        }
    }

    #[test]
    fn randers_structure_has_cartan_torsion() {
        let t = build("sqrt(p1^2+p2^2)+0.3*p1", [0.0, 0.0], [0.0, 1.0]);
        let ctx = t.context();
        assert!(ctx.max_cartan() > 1e-3);
        let mut contraction = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let c: f64 = (0..2)
                    .map(|k| ctx.cartan_upper[i][j][k] * t.point.p[k])
                    .sum();
                contraction = contraction.max(c.abs());
            }
        }
        assert!(contraction < 1e-10);
    }

    #[test]
    fn adapted_derivative_kills_k2() {
        for (expr, x, p) in [
            ("sqrt(x2^2*(p1^2+p2^2))", [0.1, 1.3], [0.7, 0.4]),
            ("sqrt(p1^2+p2^2)+0.3*p1", [0.5, -0.2], [0.3, 0.9]),
        ] {
            let t = build(expr, x, p);
            for i in 0..2 {
                assert!(t.adapted_derivative(ScalarField::K2, i).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn adapted_derivative_of_momentum_is_the_nonlinear_connection() {
        let t = build("sqrt(x2^2*(p1^2+p2^2))", [0.2, 0.9], [0.5, 1.2]);
        let ctx = t.context();
        for i in 0..2 {
            for k in 0..2 {
                let lhs = t.adapted_derivative(ScalarField::Momentum(k), i);
                assert!((lhs - ctx.nonlinear[i][k]).abs() < 1e-10);
            }
        }
        // flat case: δ reduces to ∂, so δ_i p_k = 0
        let flat = build("sqrt(p1^2+p2^2)", [0.0, 0.0], [1.0, 2.0]);
        for i in 0..2 {
            for k in 0..2 {
                assert!(flat.adapted_derivative(ScalarField::Momentum(k), i).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn h_covariant_checks_valence() {
        let t = build("sqrt(p1^2+p2^2)", [0.0, 0.0], [1.0, 0.0]);
        let bad = DTensor::new(2, vec![Variance::Upper], t.p.clone());
        assert!(bad.is_ok());
        let really_bad = DTensor::new(
            2,
            vec![Variance::Upper, Variance::Lower],
            t.p.clone(),
        );
        assert!(matches!(really_bad, Err(GeometryError::Valence(_))));
    }

    #[test]
    fn base_identities_hold_on_sample_points() {
        let cases = [
            ("sqrt(p1^2+p2^2)", [0.3, 0.4], [1.1, -0.7]),
            ("sqrt(x2^2*(p1^2+p2^2))", [0.6, 1.4], [0.8, 0.5]),
            ("sqrt(p1^2+p2^2)+0.3*p1", [0.1, -0.4], [0.9, 0.6]),
        ];
        for (expr, x, p) in cases {
            let ast = parse(expr, 2).unwrap();
            let t = build(expr, x, p);
            for residual in base_residuals(&t, &ast).unwrap() {
                assert!(
                    residual.value <= residual.tolerance,
                    "{expr}: {} = {:.3e} > {:.1e}",
                    residual.name,
                    residual.value,
                    residual.tolerance
                );
            }
        }
    }

    #[test]
    fn riemannian_reduction_detected_on_quadratic_inputs() {
        let t = build("sqrt(x2^2*(p1^2+p2^2))", [0.0, 1.2], [0.4, 0.8]);
        let ctx = t.context();
        assert!(ctx.max_cartan() < 1e-12);
        assert!(ctx.is_riemannian());
        let names: Vec<_> = base_residuals(&t, &parse("sqrt(x2^2*(p1^2+p2^2))", 2).unwrap())
            .unwrap()
            .iter()
            .map(|r| r.name)
            .collect();
        assert!(names.contains(&"base.riemannian_n_reduction"));
    }
}
