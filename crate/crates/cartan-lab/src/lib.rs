//! Numerical verification engine for almost-Kähler lifts of Cartan
//! structures on punctured cotangent bundles.
//!
//! Given a fundamental function `K(x, p)` in a small expression language,
//! the crate computes the base-space tensors (fiber metric, Cartan tensor,
//! nonlinear connection, canonical metrical connection, R-curvature), the
//! lifted metric `G` and almost complex structure `J` on `T*M \ 0`, the
//! Levi-Civita connection of `G`, its curvature, Ricci tensor and covariant
//! curvature derivative — and certifies or refutes every structural identity
//! at sampled points, with residuals written to a JSON report.
//!
//! All derivatives come from truncated multivariate Taylor jets, so residuals
//! of true identities sit at rounding level; every check carries an explicit
//! tolerance.

pub mod cartan;
pub mod curvature;
pub mod expr;
pub mod frame;
pub mod jet;
pub mod lift;
pub mod linalg;
pub mod oracle;
pub mod report;
pub mod run;
pub mod sample;
pub mod scalar;
pub mod tol;

pub use cartan::{CartanContext, CartanTensors, CotangentPoint, GeometryError};
pub use expr::{parse, EvalEnv, ExprAst, ParseError};
pub use jet::{JetConfig, JetScalar, JetSpace};
pub use lift::{FrameVector, LiftParams, LiftedFrameMetric};
pub use report::{Check, LiftReport, Verdicts};
pub use run::{run, RunConfig, Suite};
pub use scalar::Scalar;
