//! The lifted Riemannian metric G on T*M \ 0, the almost complex structure J,
//! the fundamental 2-form, the integrability obstructions and the tube bound.
//!
//! On the adapted frame the metric is block diagonal:
//!
//! ```text
//! G(δ_i, δ_j)   = G_ij  = (1/β) g_ij + (v/(αβ)) p_i p_j
//! G(∂̇^i, ∂̇^j) = G^ij  = β g^ij - (vβ/(α + 2τv)) p^i p^j    (matrix inverse)
//! G(δ_i, ∂̇^j) = 0
//! ```
//!
//! positive definite exactly while `α, β > 0` and `α + 2τv > 0`. In linked
//! mode `v = -c·α·β²`, the value integrability forces.

use thiserror::Error;

use crate::cartan::{CartanContext, CartanTensors, GeometryError};
use crate::frame::{self, JetField};
use crate::jet::JetScalar;
use crate::linalg;
use crate::report::Residual;
use crate::scalar::Scalar;
use crate::tol;

/// Lift parameters. `v` is a run-time constant; linked mode ties it to the
/// target constant curvature as `v = -c·α·β²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftParams {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub v: f64,
}

impl LiftParams {
    pub fn linked(alpha: f64, beta: f64, c: f64) -> LiftParams {
        assert!(alpha > 0.0 && beta > 0.0, "alpha and beta must be positive");
        LiftParams {
            alpha,
            beta,
            c,
            v: -c * alpha * beta * beta,
        }
    }

    pub fn explicit(alpha: f64, beta: f64, c: f64, v: f64) -> LiftParams {
        assert!(alpha > 0.0 && beta > 0.0, "alpha and beta must be positive");
        LiftParams { alpha, beta, c, v }
    }

    pub fn is_linked(&self) -> bool {
        (self.v + self.c * self.alpha * self.beta * self.beta).abs() <= 1e-12
    }

    /// The positivity margin `α + 2τv` at squared norm `k2 = 2τ`.
    pub fn positivity(&self, k2: f64) -> f64 {
        self.alpha + k2 * self.v
    }

    /// Largest admissible K² when `v < 0` (the tube radius squared).
    pub fn k2_limit(&self) -> f64 {
        if self.v < 0.0 {
            -self.alpha / self.v
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Error)]
pub enum LiftError {
    #[error(
        "lifted metric not positive definite: tau = {tau:.6} exceeds the bound 2tau < {limit:.6}"
    )]
    NotPositiveDefinite { tau: f64, limit: f64 },
    #[error("tube predicate needs c > 0, got c = {c}")]
    NotApplicable { c: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Jet-valued blocks of the lifted metric on the adapted frame.
pub struct LiftJets {
    pub params: LiftParams,
    /// G_ij on the horizontal block.
    pub gl: Vec<Vec<JetScalar>>,
    /// G^ij on the vertical block (closed-form inverse).
    pub gu: Vec<Vec<JetScalar>>,
}

impl LiftJets {
    pub fn build(t: &CartanTensors, params: &LiftParams) -> Result<LiftJets, LiftError> {
        let margin = params.positivity(t.k2.value());
        if margin <= 0.0 {
            return Err(LiftError::NotPositiveDefinite {
                tau: 0.5 * t.k2.value(),
                limit: params.k2_limit(),
            });
        }
        let n = t.dim();
        let inv_beta = t.k2.constant(1.0 / params.beta);
        let v_ab = t.k2.constant(params.v / (params.alpha * params.beta));
        let gl = linalg::mat(n, |i, j| {
            &(&inv_beta * &t.g_lower[i][j]) + &(&v_ab * &(&t.p[i] * &t.p[j]))
        });
        // β g^ij − vβ/(α+2τv) p^i p^j, dividing by the jet of the margin
        let beta = t.k2.constant(params.beta);
        let v_beta = t.k2.constant(params.v * params.beta);
        let denom = &t.k2.constant(params.alpha) + &(&t.k2.constant(params.v) * &t.k2);
        let gu = linalg::mat(n, |i, j| {
            let correction = (&v_beta * &(&t.p_upper[i] * &t.p_upper[j]))
                .try_div(&denom)
                .expect("positivity margin checked above");
            &(&beta * &t.g_upper[i][j]) - &correction
        });
        Ok(LiftJets {
            params: *params,
            gl,
            gu,
        })
    }

    pub fn values(&self) -> LiftedFrameMetric {
        LiftedFrameMetric {
            gl: self
                .gl
                .iter()
                .map(|row| row.iter().map(|e| e.value()).collect())
                .collect(),
            gu: self
                .gu
                .iter()
                .map(|row| row.iter().map(|e| e.value()).collect())
                .collect(),
        }
    }

    /// Max deviation between the closed-form vertical block and the
    /// elimination inverse of the horizontal block.
    pub fn inverse_defect(&self) -> f64 {
        let values = self.values();
        let inverted = linalg::invert(&values.gl).expect("positive definite block");
        let n = values.gl.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((values.gu[i][j] - inverted[i][j]).abs());
            }
        }
        worst
    }
}

/// f64 blocks of the lifted metric at the point.
#[derive(Debug, Clone)]
pub struct LiftedFrameMetric {
    pub gl: Vec<Vec<f64>>,
    pub gu: Vec<Vec<f64>>,
}

impl LiftedFrameMetric {
    pub fn dim(&self) -> usize {
        self.gl.len()
    }

    /// The block metric on a frame pair (a, b in 0..2n).
    pub fn frame_block(&self, a: usize, b: usize) -> f64 {
        let n = self.dim();
        match (a < n, b < n) {
            (true, true) => self.gl[a][b],
            (false, false) => self.gu[a - n][b - n],
            _ => 0.0,
        }
    }
}

/// Convenience constructor implementing the lifted-metric operation end to
/// end (jet blocks are in [`LiftJets::build`]).
pub fn lifted_metric(
    t: &CartanTensors,
    params: &LiftParams,
) -> Result<LiftedFrameMetric, LiftError> {
    Ok(LiftJets::build(t, params)?.values())
}

/// A tangent vector of T*M in adapted-frame components.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameVector {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

impl FrameVector {
    pub fn zeros(n: usize) -> FrameVector {
        FrameVector {
            h: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn basis(n: usize, a: usize) -> FrameVector {
        let mut fv = FrameVector::zeros(n);
        if a < n {
            fv.h[a] = 1.0;
        } else {
            fv.v[a - n] = 1.0;
        }
        fv
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs1(&self.h).max(linalg::max_abs1(&self.v))
    }

    pub fn sub(&self, other: &FrameVector) -> FrameVector {
        FrameVector {
            h: self.h.iter().zip(&other.h).map(|(a, b)| a - b).collect(),
            v: self.v.iter().zip(&other.v).map(|(a, b)| a - b).collect(),
        }
    }
}

/// `J(δ_i) = G_ik ∂̇^k`, `J(∂̇^i) = -G^ik δ_k`, extended linearly.
pub fn apply_j(metric: &LiftedFrameMetric, x: &FrameVector) -> FrameVector {
    let n = metric.dim();
    FrameVector {
        h: (0..n)
            .map(|k| -(0..n).map(|i| x.v[i] * metric.gu[i][k]).sum::<f64>())
            .collect(),
        v: (0..n)
            .map(|k| (0..n).map(|i| x.h[i] * metric.gl[i][k]).sum::<f64>())
            .collect(),
    }
}

/// The lifted metric on two frame vectors.
pub fn metric_value(metric: &LiftedFrameMetric, x: &FrameVector, y: &FrameVector) -> f64 {
    let n = metric.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += metric.gl[i][j] * x.h[i] * y.h[j] + metric.gu[i][j] * x.v[i] * y.v[j];
        }
    }
    acc
}

/// Fundamental 2-form `θ(X, Y) = G(X, JY)`.
pub fn fundamental_form(metric: &LiftedFrameMetric, x: &FrameVector, y: &FrameVector) -> f64 {
    metric_value(metric, x, &apply_j(metric, y))
}

/// Both integrability obstruction tensors, all indexed `[k][i][j]`.
pub struct ObstructionTensors {
    /// A_kij = δ_i G_jk - δ_j G_ik + G_ir ∂̇^r N_jk - G_jr ∂̇^r N_ik
    /// (vanishes for every Cartan structure).
    pub a: Vec<Vec<Vec<f64>>>,
    /// B_kij = G_ir ∂̇^r G_jk - G_jr ∂̇^r G_ik, from the definition.
    pub b_direct: Vec<Vec<Vec<f64>>>,
    /// The same tensor from the closed form (v/(αβ²))(g_ik p_j - g_jk p_i).
    pub b_closed: Vec<Vec<Vec<f64>>>,
}

pub fn obstruction_tensors(
    t: &CartanTensors,
    lift: &LiftJets,
    params: &LiftParams,
) -> ObstructionTensors {
    let n = t.dim();
    // δ_a G_jk and ∂̇^r-contracted pieces, at value level
    let del_gl = linalg::ten3(n, |a, j, k| t.horizontal(&lift.gl[j][k], a).value());
    let dp_gl = linalg::ten3(n, |r, j, k| t.vertical(&lift.gl[j][k], r).value());
    let dp_n = linalg::ten3(n, |r, j, k| t.nonlinear_dp[r][j][k].value());
    let glv = lift.values().gl;

    let a = linalg::ten3(n, |k, i, j| {
        let mixed: f64 = (0..n)
            .map(|r| glv[i][r] * dp_n[r][j][k] - glv[j][r] * dp_n[r][i][k])
            .sum();
        del_gl[i][j][k] - del_gl[j][i][k] + mixed
    });

    let b_direct = linalg::ten3(n, |k, i, j| {
        (0..n)
            .map(|r| glv[i][r] * dp_gl[r][j][k] - glv[j][r] * dp_gl[r][i][k])
            .sum()
    });

    let ctx_g: Vec<Vec<f64>> = t
        .g_lower
        .iter()
        .map(|row| row.iter().map(|e| e.value()).collect())
        .collect();
    let scale = params.v / (params.alpha * params.beta * params.beta);
    let b_closed = linalg::ten3(n, |k, i, j| {
        scale * (ctx_g[i][k] * t.point().p[j] - ctx_g[j][k] * t.point().p[i])
    });

    ObstructionTensors {
        a,
        b_direct,
        b_closed,
    }
}

/// Nijenhuis tensor value on two frame vectors with constant components.
pub fn nijenhuis(
    t: &CartanTensors,
    lift: &LiftJets,
    x: &FrameVector,
    y: &FrameVector,
) -> FrameVector {
    let xf = JetField::constant(t, x);
    let yf = JetField::constant(t, y);
    frame::nijenhuis_field(t, lift, &xf, &yf).values()
}

/// Max |N_J| over all adapted-frame basis pairs.
pub fn nijenhuis_frame_max(t: &CartanTensors, lift: &LiftJets) -> f64 {
    let dim = 2 * t.dim();
    let mut worst = 0.0f64;
    for a in 0..dim {
        for b in (a + 1)..dim {
            let x = JetField::basis(t, a);
            let y = JetField::basis(t, b);
            let value = frame::nijenhuis_field(t, lift, &x, &y).values();
            worst = worst.max(value.max_abs());
        }
    }
    worst
}

/// Residuals of the constant-curvature characterization.
pub struct ConstantCurvature {
    /// R_kij - c(g_jk p_i - g_ik p_j), componentwise, indexed [k][i][j].
    pub r_residual: Vec<Vec<Vec<f64>>>,
    /// R_hjk p^j - c(K² g_hk - p_h p_k), indexed [h][k].
    pub contracted: Vec<Vec<f64>>,
}

impl ConstantCurvature {
    pub fn max_abs(&self) -> f64 {
        linalg::max_abs3(&self.r_residual).max(linalg::max_abs2(&self.contracted))
    }
}

pub fn constant_curvature_residual(ctx: &CartanContext, c: f64) -> ConstantCurvature {
    let n = ctx.n;
    let p = &ctx.point.p;
    let r_residual = linalg::ten3(n, |k, i, j| {
        ctx.r_curv[k][i][j] - c * (ctx.g_lower[j][k] * p[i] - ctx.g_lower[i][k] * p[j])
    });
    let contracted = linalg::mat(n, |h, k| {
        let lhs: f64 = (0..n).map(|j| ctx.r_curv[h][j][k] * ctx.p_upper[j]).sum();
        lhs - c * (ctx.k2 * ctx.g_lower[h][k] - p[h] * p[k])
    });
    ConstantCurvature {
        r_residual,
        contracted,
    }
}

/// For c > 0: whether the point lies inside the tube `K² < 1/(cβ²)` where the
/// lifted metric stays positive definite under linked parameters.
pub fn tube_predicate(k2: f64, params: &LiftParams) -> Result<bool, LiftError> {
    if params.c <= 0.0 {
        return Err(LiftError::NotApplicable { c: params.c });
    }
    Ok(k2 < 1.0 / (params.c * params.beta * params.beta))
}

/// Per-point residuals for the lifted-structure suite. Structural identities
/// come first; the input-dependent integrability measurements close the list.
pub fn kahler_residuals(
    t: &CartanTensors,
    lift: &LiftJets,
    params: &LiftParams,
) -> Vec<Residual> {
    let n = t.dim();
    let metric = lift.values();
    let mut out = Vec::new();

    out.push(Residual::new(
        "kahler.lift_inverse",
        "G_is G^sj = delta_i^j",
        tol::MATRIX,
        linalg::inverse_residual(&metric.gl, &metric.gu),
    ));
    out.push(Residual::new(
        "kahler.lift_inverse_closed",
        "closed-form G^ij = (G_ij)^-1 by elimination",
        tol::LIFT_INVERSE,
        lift.inverse_defect(),
    ));

    // J² = -Id on the whole frame
    let dim = 2 * n;
    let mut j_squared = 0.0f64;
    for a in 0..dim {
        let e = FrameVector::basis(n, a);
        let jje = apply_j(&metric, &apply_j(&metric, &e));
        let mut defect = jje.clone();
        if a < n {
            defect.h[a] += 1.0;
        } else {
            defect.v[a - n] += 1.0;
        }
        j_squared = j_squared.max(defect.max_abs());
    }
    out.push(Residual::new(
        "kahler.j_squared",
        "J(J(X)) = -X",
        tol::MATRIX,
        j_squared,
    ));

    // Hermitian property and the symplectic pairing on basis vectors plus
    // two fixed dense vectors (deterministic, no RNG needed)
    let mut probes: Vec<FrameVector> = (0..dim).map(|a| FrameVector::basis(n, a)).collect();
    probes.push(FrameVector {
        h: (0..n).map(|i| 1.0 + 0.25 * i as f64).collect(),
        v: (0..n).map(|i| -0.5 + 0.75 * i as f64).collect(),
    });
    probes.push(FrameVector {
        h: (0..n).map(|i| 0.3 - 0.6 * i as f64).collect(),
        v: (0..n).map(|i| 0.9 + 0.2 * i as f64).collect(),
    });
    let mut hermitian = 0.0f64;
    let mut antisym = 0.0f64;
    for x in &probes {
        for y in &probes {
            let lhs = metric_value(&metric, &apply_j(&metric, x), &apply_j(&metric, y));
            hermitian = hermitian.max((lhs - metric_value(&metric, x, y)).abs());
            antisym = antisym.max(
                (fundamental_form(&metric, x, y) + fundamental_form(&metric, y, x)).abs(),
            );
        }
    }
    out.push(Residual::new(
        "kahler.hermitian",
        "G(JX, JY) = G(X, Y)",
        tol::MATRIX,
        hermitian,
    ));

    let mut pairing = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let vi = FrameVector::basis(n, n + i);
            let dj = FrameVector::basis(n, j);
            let expected = if i == j { 1.0 } else { 0.0 };
            pairing = pairing.max((fundamental_form(&metric, &vi, &dj) - expected).abs());
            pairing = pairing.max(
                fundamental_form(&metric, &FrameVector::basis(n, i), &dj).abs(),
            );
            pairing = pairing
                .max(fundamental_form(&metric, &vi, &FrameVector::basis(n, n + j)).abs());
        }
    }
    out.push(Residual::new(
        "kahler.symplectic_pairing",
        "theta(pd^i, delta_j) = delta^i_j, theta(delta,delta) = theta(pd,pd) = 0",
        tol::MATRIX,
        pairing,
    ));
    out.push(Residual::new(
        "kahler.theta_antisymmetry",
        "theta(X, Y) = -theta(Y, X)",
        tol::MATRIX,
        antisym,
    ));

    let obstructions = obstruction_tensors(t, lift, params);
    out.push(Residual::new(
        "kahler.a_tensor",
        "A_kij = 0 (holds for every Cartan structure)",
        tol::OBSTRUCTION,
        linalg::max_abs3(&obstructions.a),
    ));
    let b_defect = linalg::max_abs3(&linalg::ten3(n, |k, i, j| {
        obstructions.b_direct[k][i][j] - obstructions.b_closed[k][i][j]
    }));
    out.push(Residual::new(
        "kahler.b_two_routes",
        "B_kij = (v/(alpha beta^2))(g_ik p_j - g_jk p_i)",
        tol::OBSTRUCTION,
        b_defect,
    ));

    if params.c > 0.0 {
        let excess = (t.k2.value() - 1.0 / (params.c * params.beta * params.beta)).max(0.0);
        out.push(Residual::new(
            "kahler.tube",
            "K^2 < 1/(c beta^2) at every sampled point",
            tol::MATRIX,
            excess,
        ));
    }

    // input-dependent: integrability measurements feeding the verdicts
    out.push(Residual::new(
        "kahler.nijenhuis",
        "N_J = 0 on the adapted frame",
        tol::NIJENHUIS,
        nijenhuis_frame_max(t, lift),
    ));
    let cc = constant_curvature_residual(&t.context(), params.c);
    out.push(Residual::new(
        "kahler.constant_curvature",
        "R_kij = c(g_jk p_i - g_ik p_j)",
        tol::CONSTANT_CURVATURE,
        linalg::max_abs3(&cc.r_residual),
    ));
    out.push(Residual::new(
        "kahler.constant_curvature_contracted",
        "R_hjk p^j = c(K^2 g_hk - p_h p_k)",
        tol::CONSTANT_CURVATURE,
        linalg::max_abs2(&cc.contracted),
    ));

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::CotangentPoint;
    use crate::expr::parse;

    fn tensors(expr: &str, x: [f64; 2], p: [f64; 2]) -> CartanTensors {
        let ast = parse(expr, 2).unwrap();
        let pt = CotangentPoint::new(x.to_vec(), p.to_vec()).unwrap();
        CartanTensors::build(&ast, &pt, 4).unwrap()
    }

    #[test]
    fn euclidean_identity_blocks() {
        let t = tensors("sqrt(p1^2+p2^2)", [0.0, 0.0], [1.0, 0.0]);
        let params = LiftParams::explicit(1.0, 1.0, 0.0, 0.0);
        let metric = lifted_metric(&t, &params).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((metric.gl[i][j] - expected).abs() < 1e-14);
                assert!((metric.gu[i][j] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn euclidean_momentum_rank_one_blocks() {
        // τ = 1/2, v = 1: G = I + p pᵀ so G_11 = 2 and G^11 = 1/2
        let t = tensors("sqrt(p1^2+p2^2)", [0.0, 0.0], [1.0, 0.0]);
        let params = LiftParams::explicit(1.0, 1.0, 0.0, 1.0);
        let metric = lifted_metric(&t, &params).unwrap();
        assert!((metric.gl[0][0] - 2.0).abs() < 1e-14);
        assert!((metric.gu[0][0] - 0.5).abs() < 1e-14);
        assert!((metric.gl[1][1] - 1.0).abs() < 1e-14);
        let lift = LiftJets::build(&t, &params).unwrap();
        assert!(lift.inverse_defect() < 1e-14);
    }

    #[test]
    fn positivity_violation_is_an_error() {
        let t = tensors("sqrt(p1^2+p2^2)", [0.0, 0.0], [2.0, 0.0]); // K² = 4
        let params = LiftParams::linked(1.0, 1.0, 1.0); // v = -1, needs K² < 1
        match LiftJets::build(&t, &params) {
            Err(LiftError::NotPositiveDefinite { tau, limit }) => {
                assert!((tau - 2.0).abs() < 1e-12);
                assert!((limit - 1.0).abs() < 1e-12);
            }
            _ => panic!("expected NotPositiveDefinite"),
        }
    }

    #[test]
    fn j_swaps_the_blocks_on_the_flat_structure() {
        let t = tensors("sqrt(p1^2+p2^2)", [0.0, 0.0], [0.0, 1.0]);
        let params = LiftParams::explicit(1.0, 1.0, 0.0, 0.0);
        let metric = lifted_metric(&t, &params).unwrap();
        let d1 = FrameVector::basis(2, 0);
        let jd1 = apply_j(&metric, &d1);
        assert!((jd1.v[0] - 1.0).abs() < 1e-14 && jd1.h.iter().all(|&x| x.abs() < 1e-14));
        let v1 = FrameVector::basis(2, 2);
        let jv1 = apply_j(&metric, &v1);
        assert!((jv1.h[0] + 1.0).abs() < 1e-14 && jv1.v.iter().all(|&x| x.abs() < 1e-14));
    }

    #[test]
    fn tube_examples() {
        let params = LiftParams::linked(1.0, 1.0, 1.0);
        assert!(tube_predicate(0.5, &params).unwrap());
        assert!(!tube_predicate(2.0, &params).unwrap());
        let wide = LiftParams::linked(1.0, 0.5, 4.0); // bound 1/(4·0.25) = 1
        assert!(tube_predicate(0.9, &wide).unwrap());
        let negative = LiftParams::linked(1.0, 1.0, -1.0);
        assert!(matches!(
            tube_predicate(0.5, &negative),
            Err(LiftError::NotApplicable { .. })
        ));
        // the tube predicate is exactly the positivity predicate under linked v
        for k2 in [0.3, 0.9, 1.1, 3.0] {
            assert_eq!(
                tube_predicate(k2, &params).unwrap(),
                params.positivity(k2) > 0.0
            );
        }
    }

    #[test]
    fn structural_residuals_hold_on_the_half_plane() {
        let t = tensors("sqrt(x2^2*(p1^2+p2^2))", [0.3, 1.2], [0.8, -0.4]);
        let params = LiftParams::linked(1.0, 1.0, -1.0);
        let lift = LiftJets::build(&t, &params).unwrap();
        for r in kahler_residuals(&t, &lift, &params) {
            assert!(
                r.value <= r.tolerance,
                "{} = {:.3e} > {:.1e}",
                r.name,
                r.value,
                r.tolerance
            );
        }
    }

    #[test]
    fn b_routes_agree_for_unlinked_constants() {
        let t = tensors("sqrt(p1^2+p2^2)+0.3*p1", [0.2, -0.1], [0.4, 1.1]);
        let params = LiftParams::explicit(1.0, 1.0, -1.0, 0.7);
        let lift = LiftJets::build(&t, &params).unwrap();
        let obstructions = obstruction_tensors(&t, &lift, &params);
        let defect = linalg::max_abs3(&linalg::ten3(2, |k, i, j| {
            obstructions.b_direct[k][i][j] - obstructions.b_closed[k][i][j]
        }));
        assert!(defect < 1e-8, "defect {defect:.3e}");
    }

    #[test]
    fn nijenhuis_vanishes_exactly_where_it_should() {
        // flat, c = 0 linked: integrable
        let flat = tensors("sqrt(p1^2+p2^2)", [0.1, 0.2], [0.9, 0.5]);
        let flat_params = LiftParams::linked(1.0, 1.0, 0.0);
        let flat_lift = LiftJets::build(&flat, &flat_params).unwrap();
        assert!(nijenhuis_frame_max(&flat, &flat_lift) < 1e-10);

        // half-plane, c = -1 linked: integrable
        let hyp = tensors("sqrt(x2^2*(p1^2+p2^2))", [0.4, 0.9], [1.1, -0.6]);
        let hyp_params = LiftParams::linked(1.0, 1.0, -1.0);
        let hyp_lift = LiftJets::build(&hyp, &hyp_params).unwrap();
        assert!(nijenhuis_frame_max(&hyp, &hyp_lift) < 1e-7);

        // half-plane with v = 0: obstruction must show up
        let wrong = LiftParams::explicit(1.0, 1.0, -1.0, 0.0);
        let wrong_lift = LiftJets::build(&hyp, &wrong).unwrap();
        assert!(nijenhuis_frame_max(&hyp, &wrong_lift) > 1e-3);
    }

    #[test]
    fn nijenhuis_is_bilinear_over_constants() {
        let t = tensors("sqrt(x2^2*(p1^2+p2^2))", [0.0, 1.1], [0.7, 0.3]);
        let params = LiftParams::explicit(1.0, 1.0, -1.0, 0.4);
        let lift = LiftJets::build(&t, &params).unwrap();
        let x = FrameVector {
            h: vec![1.0, -0.5],
            v: vec![0.25, 0.75],
        };
        let y = FrameVector {
            h: vec![0.0, 1.0],
            v: vec![-1.0, 0.5],
        };
        let n_xy = nijenhuis(&t, &lift, &x, &y);
        let doubled = FrameVector {
            h: x.h.iter().map(|a| 2.0 * a).collect(),
            v: x.v.iter().map(|a| 2.0 * a).collect(),
        };
        let n_2xy = nijenhuis(&t, &lift, &doubled, &y);
        for (a, b) in n_2xy.h.iter().zip(&n_xy.h) {
            assert!((a - 2.0 * b).abs() < 1e-10);
        }
        for (a, b) in n_2xy.v.iter().zip(&n_xy.v) {
            assert!((a - 2.0 * b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_curvature_sign_is_decisive_on_the_half_plane() {
        let t = tensors("sqrt(x2^2*(p1^2+p2^2))", [0.5, 1.3], [0.9, 0.7]);
        let ctx = t.context();
        let right = constant_curvature_residual(&ctx, -1.0);
        assert!(right.max_abs() < 1e-8, "c=-1 residual {}", right.max_abs());
        let wrong = constant_curvature_residual(&ctx, 1.0);
        assert!(wrong.max_abs() > 0.1, "c=+1 residual {}", wrong.max_abs());
    }

    #[test]
    fn half_plane_curvature_against_finite_difference_riemann() {
        // independent oracle: R^i_jkl of a_ij = δ_ij/x2² has sectional
        // curvature -1; our R_kij must equal p_h R^h_kij with c = -1
        let t = tensors("sqrt(x2^2*(p1^2+p2^2))", [0.2, 0.8], [0.6, 1.0]);
        let ctx = t.context();
        let metric = |x: &[f64]| {
            let s = 1.0 / (x[1] * x[1]);
            vec![vec![s, 0.0], vec![0.0, s]]
        };
        let riem = crate::oracle::riemann_fd(&metric, &t.point().x, 1e-4);
        // sectional curvature = R_1212 / det g
        let g = metric(&t.point().x);
        let r_1212: f64 = (0..2).map(|s| g[0][s] * riem[s][1][0][1]).sum();
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        assert!(
            (r_1212 / det + 1.0).abs() < 1e-5,
            "sectional curvature {}",
            r_1212 / det
        );
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let contracted: f64 =
                        (0..2).map(|h| t.point().p[h] * riem[h][k][i][j]).sum();
                    assert!(
                        (ctx.r_curv[k][i][j] - contracted).abs() < 1e-5,
                        "R[{k}][{i}][{j}]"
                    );
                }
            }
        }
    }
}
