//! Deterministic seeded sampling of cotangent points.
//!
//! x is uniform in the chart box; p is a uniform direction times a uniform
//! radius in the annulus. Points violating the positivity margin of the
//! lifted metric (equivalently the tube bound, when c > 0) are rejected and
//! redrawn, with a cap on consecutive rejections.

use rand::Rng;
use thiserror::Error;

use crate::cartan::CotangentPoint;
use crate::expr::{EvalEnv, EvalError, ExprAst};
use crate::lift::LiftParams;

pub const MAX_CONSECUTIVE_REJECTIONS: usize = 10_000;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error(
        "sampling exhausted after {rejections} consecutive rejections; \
         the domain box, annulus and parameters admit too few valid points"
    )]
    Exhausted { rejections: usize },
    #[error("expression not evaluable inside the declared chart box: {0}")]
    Eval(#[from] EvalError),
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller; u1 bounded away from 0
    let mut u1: f64 = rng.random();
    while u1 <= f64::MIN_POSITIVE {
        u1 = rng.random();
    }
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Draw `count` admissible points. Deterministic for a fixed rng state.
pub fn sample_points(
    ast: &ExprAst,
    domain: &[(f64, f64)],
    annulus: (f64, f64),
    params: &LiftParams,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<CotangentPoint>, SampleError> {
    let n = domain.len();
    let (r_min, r_max) = annulus;
    let tube_bound = if params.c > 0.0 {
        Some(1.0 / (params.c * params.beta * params.beta))
    } else {
        None
    };

    let mut out = Vec::with_capacity(count);
    let mut rejections = 0usize;
    while out.len() < count {
        if rejections > MAX_CONSECUTIVE_REJECTIONS {
            return Err(SampleError::Exhausted { rejections });
        }
        let x: Vec<f64> = domain
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..hi))
            .collect();
        let mut direction: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm < 1e-9 {
            rejections += 1;
            continue;
        }
        let radius = rng.random_range(r_min..r_max);
        for d in &mut direction {
            *d *= radius / norm;
        }
        let env = EvalEnv {
            x: x.clone(),
            p: direction.clone(),
        };
        let k = ast.eval(&env)?;
        let k2 = k * k;
        let admissible = params.positivity(k2) > 0.0
            && tube_bound.map_or(true, |bound| k2 < bound);
        if !admissible {
            rejections += 1;
            continue;
        }
        rejections = 0;
        out.push(CotangentPoint { x, p: direction });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sampling_is_deterministic() {
        let ast = parse("sqrt(p1^2+p2^2)", 2).unwrap();
        let params = LiftParams::linked(1.0, 1.0, 0.0);
        let domain = [(-1.0, 1.0), (-1.0, 1.0)];
        let mut rng_a = ChaCha8Rng::seed_from_u64(42);
        let mut rng_b = ChaCha8Rng::seed_from_u64(42);
        let a = sample_points(&ast, &domain, (0.5, 1.5), &params, 25, &mut rng_a).unwrap();
        let b = sample_points(&ast, &domain, (0.5, 1.5), &params, 25, &mut rng_b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn annulus_is_respected() {
        let ast = parse("sqrt(p1^2+p2^2)", 2).unwrap();
        let params = LiftParams::linked(1.0, 1.0, 0.0);
        let domain = [(-1.0, 1.0), (-1.0, 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points = sample_points(&ast, &domain, (0.5, 1.5), &params, 200, &mut rng).unwrap();
        for pt in &points {
            let r = pt.p.iter().map(|p| p * p).sum::<f64>().sqrt();
            assert!((0.5..1.5).contains(&r));
        }
    }

    #[test]
    fn tube_bound_is_enforced_for_positive_curvature() {
        let ast = parse("sqrt(p1^2 + p2^2/sin(x1)^2)", 2).unwrap();
        let params = LiftParams::linked(1.0, 1.0, 1.0);
        let domain = [(0.4, 2.74), (-1.0, 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let points = sample_points(&ast, &domain, (0.05, 0.45), &params, 100, &mut rng).unwrap();
        for pt in &points {
            let env = EvalEnv {
                x: pt.x.clone(),
                p: pt.p.clone(),
            };
            let k = ast.eval(&env).unwrap();
            assert!(k * k < 1.0, "K² = {}", k * k);
        }
    }

    #[test]
    fn impossible_regions_exhaust() {
        let ast = parse("sqrt(p1^2+p2^2)", 2).unwrap();
        // v = -1 with the annulus forcing K² ≥ 4 > 1: every draw rejected
        let params = LiftParams::explicit(1.0, 1.0, 1.0, -1.0);
        let domain = [(-1.0, 1.0), (-1.0, 1.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let result = sample_points(&ast, &domain, (2.0, 3.0), &params, 1, &mut rng);
        assert!(matches!(result, Err(SampleError::Exhausted { .. })));
    }
}
