//! Run driver: configuration, presets, the per-point verification pipeline,
//! report assembly and tensor dumps.

use std::collections::BTreeSet;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::cartan::{self, CartanTensors, CotangentPoint, GeometryError};
use crate::curvature::{self, ConnectionBlocks, CurvatureBlocks};
use crate::expr::{self, ExprAst, ParseError};
use crate::jet::{JetSpace, MAX_ORDER};
use crate::lift::{self, LiftError, LiftJets, LiftParams};
use crate::linalg;
use crate::report::{
    f17, nest, Check, LiftReport, Meta, Residual, TensorDump, TensorEntry, Verdicts,
};
use crate::sample::{self, SampleError};
use crate::tol;

/// Verification suites selectable per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Base,
    Kahler,
    Connection,
    Curvature,
    Einstein,
    Symmetry,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Base,
        Suite::Kahler,
        Suite::Connection,
        Suite::Curvature,
        Suite::Einstein,
        Suite::Symmetry,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Base => "base",
            Suite::Kahler => "kahler",
            Suite::Connection => "connection",
            Suite::Curvature => "curvature",
            Suite::Einstein => "einstein",
            Suite::Symmetry => "symmetry",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Jet order the suite's deepest derivative tower needs.
    pub fn required_order(self) -> usize {
        match self {
            Suite::Base | Suite::Kahler | Suite::Connection => 4,
            Suite::Curvature | Suite::Einstein => 5,
            Suite::Symmetry => 6,
        }
    }
}

/// Source of the lift constant v.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VMode {
    /// v = -c·α·β² (the integrable value).
    Linked,
    Explicit(f64),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub expression: String,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub v_mode: VMode,
    /// Chart box per x-coordinate.
    pub domain: Vec<(f64, f64)>,
    /// Momentum annulus (r_min, r_max), r_min > 0.
    pub p_annulus: (f64, f64),
    pub points: usize,
    pub seed: u64,
    pub suites: BTreeSet<Suite>,
    /// 0 = library default thread count.
    pub threads: usize,
}

impl RunConfig {
    /// Built-in configurations for the four reference structures.
    pub fn preset(name: &str) -> Option<RunConfig> {
        let base = RunConfig {
            expression: String::new(),
            n: 2,
            alpha: 1.0,
            beta: 1.0,
            c: 0.0,
            v_mode: VMode::Linked,
            domain: vec![(-1.0, 1.0), (-1.0, 1.0)],
            p_annulus: (0.5, 1.5),
            points: 100,
            seed: 42,
            suites: Suite::ALL.into_iter().collect(),
            threads: 0,
        };
        match name {
            "euclidean" => Some(RunConfig {
                expression: "sqrt(p1^2+p2^2)".into(),
                c: 0.0,
                ..base
            }),
            "hyperbolic-half-plane" => Some(RunConfig {
                expression: "sqrt(x2^2*(p1^2+p2^2))".into(),
                c: -1.0,
                domain: vec![(-1.0, 1.0), (0.5, 2.0)],
                ..base
            }),
            "sphere-patch" => Some(RunConfig {
                expression: "sqrt(p1^2 + p2^2/sin(x1)^2)".into(),
                c: 1.0,
                // keeps |sin x1| >= 0.39, well away from the chart singularity
                domain: vec![(0.4, 2.74), (-1.0, 1.0)],
                p_annulus: (0.05, 0.45),
                ..base
            }),
            "randers" => Some(RunConfig {
                expression: "sqrt(p1^2+p2^2)+0.3*p1".into(),
                c: -1.0,
                ..base
            }),
            _ => None,
        }
    }

    pub fn params(&self) -> LiftParams {
        match self.v_mode {
            VMode::Linked => LiftParams::linked(self.alpha, self.beta, self.c),
            VMode::Explicit(v) => LiftParams::explicit(self.alpha, self.beta, self.c, v),
        }
    }

    pub fn required_order(&self) -> usize {
        self.suites
            .iter()
            .map(|s| s.required_order())
            .max()
            .unwrap_or(4)
    }

    fn validate(&self) -> Result<ExprAst, RunError> {
        if self.n < 2 {
            return Err(RunError::Config("n must be at least 2".into()));
        }
        if self.domain.len() != self.n {
            return Err(RunError::Config(format!(
                "domain box has {} coordinate ranges, n = {}",
                self.domain.len(),
                self.n
            )));
        }
        if self.domain.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(RunError::Config("domain ranges must satisfy lo < hi".into()));
        }
        let (r_min, r_max) = self.p_annulus;
        if !(r_min > 0.0 && r_min < r_max) {
            return Err(RunError::Config(
                "momentum annulus needs 0 < r_min < r_max".into(),
            ));
        }
        if self.points < 1 {
            return Err(RunError::Config("points must be at least 1".into()));
        }
        if self.suites.is_empty() {
            return Err(RunError::Config("no suites selected".into()));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(RunError::Config("alpha and beta must be positive".into()));
        }
        if self.required_order() > MAX_ORDER {
            return Err(RunError::Config("jet order budget exceeded".into()));
        }
        Ok(expr::parse(&self.expression, self.n)?)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("expression error: {0}")]
    Parse(#[from] ParseError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(
        "fundamental function is not 1-homogeneous in p: max residual {max_residual:.3e} \
         (tolerance {tolerance:.1e})"
    )]
    Homogeneity { max_residual: f64, tolerance: f64 },
    #[error("sampling failed: {0}")]
    Sample(#[from] SampleError),
    #[error("geometry failed: {0}")]
    Geometry(#[from] GeometryError),
    #[error("lift failed: {0}")]
    Lift(String),
}

impl From<LiftError> for RunError {
    fn from(e: LiftError) -> Self {
        RunError::Lift(e.to_string())
    }
}

/// Everything measured at one sample point.
struct PointOutcome {
    residuals: Vec<Residual>,
    max_cartan: f64,
    constant_curvature: f64,
}

fn point_pipeline(
    ast: &ExprAst,
    space: &std::sync::Arc<JetSpace>,
    pt: &CotangentPoint,
    params: &LiftParams,
    suites: &BTreeSet<Suite>,
) -> Result<PointOutcome, RunError> {
    let t = CartanTensors::build_in(space, ast, pt)?;
    let ctx = t.context();
    let mut residuals = Vec::new();

    if suites.contains(&Suite::Base) {
        residuals.extend(cartan::base_residuals(&t, ast)?);
    }

    let needs_lift = suites
        .iter()
        .any(|s| !matches!(s, Suite::Base));
    if !needs_lift {
        return Ok(PointOutcome {
            max_cartan: ctx.max_cartan(),
            constant_curvature: lift::constant_curvature_residual(&ctx, params.c).max_abs(),
            residuals,
        });
    }

    let lift_jets = LiftJets::build(&t, params)?;

    if suites.contains(&Suite::Kahler) {
        residuals.extend(lift::kahler_residuals(&t, &lift_jets, params));
    }

    let needs_connection = suites.iter().any(|s| {
        matches!(
            s,
            Suite::Connection | Suite::Curvature | Suite::Einstein | Suite::Symmetry
        )
    });
    let koszul: Option<ConnectionBlocks> = needs_connection
        .then(|| curvature::connection_koszul(&t, &lift_jets));

    if suites.contains(&Suite::Connection) {
        residuals.extend(curvature::connection_residuals(
            &t,
            &lift_jets,
            params,
            koszul.as_ref().expect("connection blocks computed"),
        ));
    }

    let needs_curvature = suites
        .iter()
        .any(|s| matches!(s, Suite::Curvature | Suite::Einstein | Suite::Symmetry));
    let curv: Option<CurvatureBlocks> = needs_curvature
        .then(|| curvature::curvature(&t, koszul.as_ref().expect("connection")));

    if let Some(curv) = &curv {
        let values = curv.values();
        let metric = lift_jets.values();

        if suites.contains(&Suite::Curvature) {
            residuals.push(Residual::new(
                "curvature.antisymmetry",
                "K(X, Y)Z = -K(Y, X)Z",
                tol::CURVATURE_ANTISYM,
                curvature::antisymmetry_residual(&values),
            ));
            residuals.push(Residual::new(
                "curvature.bianchi",
                "K(X,Y)Z + K(Y,Z)X + K(Z,X)Y = 0",
                tol::BIANCHI,
                curvature::bianchi_residual(&values),
            ));
            if ctx.is_riemannian() {
                if let Ok(closed) =
                    curvature::riemannian_closed_forms(&ctx, &metric, params)
                {
                    residuals.push(Residual::new(
                        "curvature.riemannian_forms",
                        "frame curvature = constant-curvature closed forms",
                        tol::RIEMANN_FORMS,
                        curvature::curvature_values_distance(&values, &closed),
                    ));
                }
            }
        }

        if suites.contains(&Suite::Einstein) {
            let einstein = curvature::einstein_residual(&metric, &values, params);
            residuals.push(Residual::new(
                "einstein.residual",
                "Ric = c n beta G",
                tol::EINSTEIN,
                einstein.einstein,
            ));
            residuals.push(Residual::new(
                "einstein.mixed_blocks",
                "Ric(delta, pd) = 0",
                tol::MIXED_RICCI,
                einstein.mixed_blocks,
            ));
            residuals.push(Residual::new(
                "einstein.mean_cartan",
                "I^j = 0 (Riemannian reduction)",
                tol::METRICITY,
                linalg::max_abs1(&ctx.mean_cartan),
            ));
        }

        if suites.contains(&Suite::Symmetry) {
            let nabla =
                curvature::nabla_curvature(&t, koszul.as_ref().expect("connection"), curv);
            residuals.push(Residual::new(
                "symmetry.nabla_curvature",
                "nabla K = 0 (local symmetry, Riemannian reduction)",
                tol::LOCAL_SYMMETRY,
                nabla.max_abs(),
            ));
            residuals.push(Residual::new(
                "symmetry.contracted_identity",
                "p^j p_i M^{uiks}_j = 2(1 - c beta^2 tau) C^{kus}",
                tol::LOCAL_SYMMETRY,
                curvature::contracted_symmetry_residual(&t, params, &nabla),
            ));
        }
    }

    Ok(PointOutcome {
        max_cartan: ctx.max_cartan(),
        constant_curvature: lift::constant_curvature_residual(&ctx, params.c).max_abs(),
        residuals,
    })
}

/// Which checks falsify a structural identity when they fail, as opposed to
/// measuring an input-dependent property.
fn is_hard(name: &str, riemannian: bool, constant_curvature: bool, linked: bool) -> bool {
    match name {
        "kahler.nijenhuis"
        | "kahler.constant_curvature"
        | "kahler.constant_curvature_contracted" => false,
        // the displayed blocks are derived in the Kaehler regime only
        "connection.closed_vs_koszul" => linked && constant_curvature,
        "curvature.riemannian_forms" => riemannian && constant_curvature,
        "einstein.residual" | "einstein.mixed_blocks" => riemannian && constant_curvature,
        "einstein.mean_cartan" => riemannian,
        "symmetry.nabla_curvature" | "symmetry.contracted_identity" => {
            riemannian && constant_curvature
        }
        _ => true,
    }
}

pub struct RunOutcome {
    pub report: LiftReport,
    /// 0 on success, 1 when a hard check failed.
    pub exit_code: i32,
    pub points: Vec<CotangentPoint>,
}

pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let ast = config.validate()?;
    let params = config.params();
    let scale = tol::scale();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let points = sample::sample_points(
        &ast,
        &config.domain,
        config.p_annulus,
        &params,
        config.points,
        &mut rng,
    )?;

    // input gate, not a reported check: tolerance scaling only loosens it
    let homogeneity_tol = tol::DIRECT_AD * scale.max(1.0);
    let homogeneity = expr::check_homogeneity(&ast, 1, &points, homogeneity_tol, &mut rng)
        .map_err(GeometryError::Eval)?;
    if !homogeneity.pass {
        return Err(RunError::Homogeneity {
            max_residual: homogeneity.max_residual,
            tolerance: homogeneity_tol,
        });
    }

    let order = config.required_order();
    let space = JetSpace::shared(2 * config.n, order);

    let pipeline = |pt: &CotangentPoint| point_pipeline(&ast, &space, pt, &params, &config.suites);
    let outcomes: Result<Vec<PointOutcome>, RunError> = if config.threads == 1 {
        points.iter().map(pipeline).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
        pool.install(|| points.par_iter().map(pipeline).collect())
    };
    let outcomes = outcomes?;

    let riemannian = outcomes
        .iter()
        .map(|o| o.max_cartan)
        .fold(0.0f64, f64::max)
        <= tol::RIEMANNIAN_DETECT * scale;
    let constant_curvature = outcomes
        .iter()
        .map(|o| o.constant_curvature)
        .fold(0.0f64, f64::max)
        <= tol::CONSTANT_CURVATURE * scale;

    // merge by name in first-appearance order; max is order-independent
    let mut order_of_names: Vec<&'static str> = Vec::new();
    let mut merged: std::collections::HashMap<&'static str, Check> =
        std::collections::HashMap::new();
    for outcome in &outcomes {
        for residual in &outcome.residuals {
            let entry = merged.entry(residual.name).or_insert_with(|| {
                order_of_names.push(residual.name);
                Check {
                    name: residual.name.to_string(),
                    identity: residual.identity.to_string(),
                    max_abs_residual: 0.0,
                    tolerance: residual.tolerance * scale,
                    pass: true,
                    n_points: 0,
                    hard: is_hard(
                        residual.name,
                        riemannian,
                        constant_curvature,
                        params.is_linked(),
                    ),
                }
            });
            entry.n_points += 1;
            entry.max_abs_residual = entry.max_abs_residual.max(residual.value);
        }
    }
    let mut checks: Vec<Check> = order_of_names
        .iter()
        .map(|name| {
            let mut check = merged.remove(name).expect("merged check");
            check.pass = check.max_abs_residual <= check.tolerance;
            check
        })
        .collect();

    let verdicts = assemble_verdicts(config, &checks, riemannian);

    // ordering: keep suites in declaration order for readability
    checks.sort_by_key(|c| {
        let suite = c.name.split('.').next().unwrap_or("");
        Suite::ALL
            .iter()
            .position(|s| s.name() == suite)
            .unwrap_or(usize::MAX)
    });

    let meta = Meta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        expression: config.expression.clone(),
        n: config.n,
        alpha: config.alpha,
        beta: config.beta,
        c: config.c,
        v: params.v,
        v_linked: params.is_linked(),
        domain: config.domain.clone(),
        p_annulus: config.p_annulus,
        points: config.points,
        seed: config.seed,
        jet_order: order,
        suites: config.suites.iter().map(|s| s.name().to_string()).collect(),
        tolerance_scale: scale,
    };

    let report = LiftReport {
        meta,
        checks,
        verdicts,
    };
    let exit_code = if report.failed_hard_checks().is_empty() {
        0
    } else {
        1
    };
    Ok(RunOutcome {
        report,
        exit_code,
        points,
    })
}

fn assemble_verdicts(config: &RunConfig, checks: &[Check], riemannian: bool) -> Verdicts {
    let find = |name: &str| checks.iter().find(|c| c.name == name);
    let mut verdicts = Verdicts {
        riemannian_detected: Some(riemannian),
        ..Verdicts::default()
    };
    if config.suites.contains(&Suite::Kahler) {
        let structural_pass = checks
            .iter()
            .filter(|c| c.name.starts_with("kahler.") && c.hard)
            .all(|c| c.pass);
        verdicts.almost_kahler = Some(structural_pass);
        verdicts.integrable = find("kahler.nijenhuis").map(|c| c.pass);
    }
    if config.suites.contains(&Suite::Einstein) {
        verdicts.einstein_consistent = find("einstein.residual").map(|c| c.pass);
    }
    if config.suites.contains(&Suite::Symmetry) {
        verdicts.locally_symmetric_consistent = find("symmetry.nabla_curvature").map(|c| c.pass);
    }
    verdicts
}

/// Tensor dump at one explicit point (includes lifted and curvature data,
/// so jets to order 5 are used).
pub fn dump_tensors(config: &RunConfig, x: Vec<f64>, p: Vec<f64>) -> Result<TensorDump, RunError> {
    let ast = config.validate()?;
    let params = config.params();
    let pt = CotangentPoint::new(x, p)?;
    for (coord, &(lo, hi)) in pt.x.iter().zip(&config.domain) {
        if !(lo <= *coord && *coord <= hi) {
            return Err(RunError::Config(format!(
                "dump point x = {coord} outside the chart box [{lo}, {hi}]"
            )));
        }
    }
    let radius = pt.p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (r_min, r_max) = config.p_annulus;
    if !(r_min <= radius && radius <= r_max) {
        return Err(RunError::Config(format!(
            "dump point |p| = {radius} outside the annulus [{r_min}, {r_max}]"
        )));
    }

    let t = CartanTensors::build(&ast, &pt, 5)?;
    let ctx = t.context();
    if params.c > 0.0 && !lift::tube_predicate(ctx.k2, &params)? {
        return Err(RunError::Config(format!(
            "dump point has K^2 = {} outside the tube bound {}",
            ctx.k2,
            1.0 / (params.c * params.beta * params.beta)
        )));
    }
    let lift_jets = LiftJets::build(&t, &params)?;
    let metric = lift_jets.values();
    let koszul = curvature::connection_koszul(&t, &lift_jets);
    let curv = curvature::curvature(&t, &koszul);
    let ricci = curvature::ricci(&metric, &curv.values());

    let n = ctx.n;
    let dim = 2 * n;
    let flat2 = |m: &Vec<Vec<f64>>| -> Vec<f64> { m.iter().flatten().copied().collect() };
    let flat3 = |m: &Vec<Vec<Vec<f64>>>| -> Vec<f64> {
        m.iter().flatten().flatten().copied().collect()
    };

    // J on the frame basis as a (2n)x(2n) matrix, columns = images
    let mut j_matrix = vec![vec![0.0; dim]; dim];
    for col in 0..dim {
        let image = lift::apply_j(&metric, &lift::FrameVector::basis(n, col));
        for row in 0..n {
            j_matrix[row][col] = image.h[row];
            j_matrix[n + row][col] = image.v[row];
        }
    }

    let entries = vec![
        TensorEntry {
            name: "gU",
            variance: vec!["upper", "upper"],
            shape: vec![n, n],
            components: nest(&[n, n], &flat2(&ctx.g_upper)),
        },
        TensorEntry {
            name: "gL",
            variance: vec!["lower", "lower"],
            shape: vec![n, n],
            components: nest(&[n, n], &flat2(&ctx.g_lower)),
        },
        TensorEntry {
            name: "C3",
            variance: vec!["upper", "upper", "upper"],
            shape: vec![n, n, n],
            components: nest(&[n, n, n], &flat3(&ctx.cartan_upper)),
        },
        TensorEntry {
            name: "N",
            variance: vec!["lower", "lower"],
            shape: vec![n, n],
            components: nest(&[n, n], &flat2(&ctx.nonlinear)),
        },
        TensorEntry {
            name: "H",
            variance: vec!["upper", "lower", "lower"],
            shape: vec![n, n, n],
            components: nest(&[n, n, n], &flat3(&ctx.h_conn)),
        },
        TensorEntry {
            name: "P",
            variance: vec!["upper", "lower", "lower"],
            shape: vec![n, n, n],
            components: nest(&[n, n, n], &flat3(&ctx.p_tensor)),
        },
        TensorEntry {
            name: "R",
            variance: vec!["lower", "lower", "lower"],
            shape: vec![n, n, n],
            components: nest(&[n, n, n], &flat3(&ctx.r_curv)),
        },
        TensorEntry {
            name: "GL",
            variance: vec!["lower", "lower"],
            shape: vec![n, n],
            components: nest(&[n, n], &flat2(&metric.gl)),
        },
        TensorEntry {
            name: "GU",
            variance: vec!["upper", "upper"],
            shape: vec![n, n],
            components: nest(&[n, n], &flat2(&metric.gu)),
        },
        TensorEntry {
            name: "J",
            variance: vec!["frame", "frame"],
            shape: vec![dim, dim],
            components: nest(&[dim, dim], &flat2(&j_matrix)),
        },
        TensorEntry {
            name: "Ricci",
            variance: vec!["frame", "frame"],
            shape: vec![dim, dim],
            components: nest(&[dim, dim], &flat2(&ricci)),
        },
    ];

    Ok(TensorDump {
        schema: crate::report::SCHEMA,
        expression: config.expression.clone(),
        x: pt.x.iter().map(|&v| f17(v)).collect(),
        p: pt.p.iter().map(|&v| f17(v)).collect(),
        tensors: entries,
    })
}
