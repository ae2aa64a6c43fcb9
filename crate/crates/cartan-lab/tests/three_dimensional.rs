//! The whole pipeline at n = 3: hyperbolic upper half-space
//! (fiber metric x3²·id, constant curvature -1) and the flat structure.
//! Exercises every dimension-generic loop that the n = 2 presets cannot.

use std::collections::BTreeSet;

use cartan_lab::cartan::{self, CartanTensors, CotangentPoint};
use cartan_lab::curvature;
use cartan_lab::expr::parse;
use cartan_lab::lift::{self, LiftJets, LiftParams};
use cartan_lab::run::{run, RunConfig, Suite, VMode};

const HALF_SPACE: &str = "sqrt(x3^2*(p1^2+p2^2+p3^2))";

fn half_space_config(suites: &[Suite], points: usize) -> RunConfig {
    RunConfig {
        expression: HALF_SPACE.into(),
        n: 3,
        alpha: 1.0,
        beta: 1.0,
        c: -1.0,
        v_mode: VMode::Linked,
        domain: vec![(-1.0, 1.0), (-1.0, 1.0), (0.5, 2.0)],
        p_annulus: (0.5, 1.5),
        points,
        seed: 42,
        suites: suites.iter().copied().collect::<BTreeSet<_>>(),
        threads: 0,
    }
}

#[test]
fn base_identities_hold_in_three_dimensions() {
    let config = half_space_config(&[Suite::Base, Suite::Kahler, Suite::Connection], 20);
    let outcome = run(&config).unwrap();
    assert_eq!(outcome.exit_code, 0, "{}", outcome.report.to_json());
    assert_eq!(outcome.report.verdicts.riemannian_detected, Some(true));
    assert_eq!(outcome.report.verdicts.integrable, Some(true));
}

#[test]
fn half_space_is_einstein_with_factor_minus_three() {
    let ast = parse(HALF_SPACE, 3).unwrap();
    let params = LiftParams::linked(1.0, 1.0, -1.0);
    let pt = CotangentPoint::new(vec![0.2, -0.4, 1.1], vec![0.7, 0.3, -0.5]).unwrap();
    let t = CartanTensors::build(&ast, &pt, 5).unwrap();
    let lift_jets = LiftJets::build(&t, &params).unwrap();
    let conn = curvature::connection_koszul(&t, &lift_jets);
    let values = curvature::curvature(&t, &conn).values();
    let metric = lift_jets.values();
    let res = curvature::einstein_residual(&metric, &values, &params);
    // c n beta = -3 at n = 3
    assert!(res.einstein < 1e-6, "einstein residual {:.3e}", res.einstein);
    assert!((res.ricci[0][0] + 3.0 * metric.gl[0][0]).abs() < 1e-6);
    let closed = curvature::riemannian_closed_forms(&t.context(), &metric, &params).unwrap();
    assert!(curvature::curvature_values_distance(&values, &closed) < 1e-7);
}

#[test]
fn half_space_lift_is_locally_symmetric() {
    let ast = parse(HALF_SPACE, 3).unwrap();
    let params = LiftParams::linked(1.0, 1.0, -1.0);
    let pt = CotangentPoint::new(vec![0.0, 0.3, 0.9], vec![0.4, -0.6, 0.8]).unwrap();
    let t = CartanTensors::build(&ast, &pt, 6).unwrap();
    let lift_jets = LiftJets::build(&t, &params).unwrap();
    let conn = curvature::connection_koszul(&t, &lift_jets);
    let curv = curvature::curvature(&t, &conn);
    let nabla = curvature::nabla_curvature(&t, &conn, &curv);
    assert!(nabla.max_abs() < 1e-5, "nabla {:.3e}", nabla.max_abs());
    assert!(curvature::contracted_symmetry_residual(&t, &params, &nabla) < 1e-5);
}

#[test]
fn verify_base_identities_reports_merged_checks() {
    let ast = parse("sqrt(p1^2+p2^2+p3^2)+0.2*p2", 3).unwrap();
    let samples: Vec<CotangentPoint> = [
        ([0.1, 0.0, -0.3], [0.8, 0.2, 0.5]),
        ([-0.4, 0.6, 0.2], [0.3, -0.9, 0.4]),
        ([0.0, 0.0, 0.0], [0.6, 0.6, -0.6]),
    ]
    .into_iter()
    .map(|(x, p)| CotangentPoint::new(x.to_vec(), p.to_vec()).unwrap())
    .collect();
    let checks = cartan::verify_base_identities(&ast, &samples).unwrap();
    assert!(!checks.is_empty());
    for check in &checks {
        assert_eq!(check.n_points, 3, "{}", check.name);
        assert!(check.pass, "{} = {:.3e}", check.name, check.max_abs_residual);
    }
}

#[test]
fn three_dimensional_flat_randers_contrast() {
    // non-Riemannian flat structure at n = 3: obstruction to Einstein persists
    let ast = parse("sqrt(p1^2+p2^2+p3^2)+0.2*p2", 3).unwrap();
    let params = LiftParams::linked(1.0, 1.0, -1.0);
    let pt = CotangentPoint::new(vec![0.0, 0.0, 0.0], vec![0.5, 0.9, -0.3]).unwrap();
    let t = CartanTensors::build(&ast, &pt, 5).unwrap();
    let ctx = t.context();
    assert!(ctx.max_cartan() > 1e-3);
    assert!(lift::constant_curvature_residual(&ctx, -1.0).max_abs() > 1e-3);
    let lift_jets = LiftJets::build(&t, &params).unwrap();
    let conn = curvature::connection_koszul(&t, &lift_jets);
    let values = curvature::curvature(&t, &conn).values();
    let res = curvature::einstein_residual(&lift_jets.values(), &values, &params);
    assert!(res.einstein > 1e-3);
}
