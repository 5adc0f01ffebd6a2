//! Grasp wrench-space analysis: force-closure certification, the min-weight,
//! Ferrari-Canny and Chebyshev metrics, perturbation certificates, the PONG
//! lower bound on the probability of force closure, and the oracles that check
//! them.

pub mod hull;
pub mod linprog;
pub mod metrics;
pub mod oracle;
pub mod pong;
pub mod surfaces;
pub mod synth;
pub mod wrench;

pub use hull::{contains_origin, Hull, HullError};
pub use linprog::{LinearProgram, LpError, LpSolution, LpStatus};
pub use metrics::{grasp_metrics, GraspMetrics, MetricsError, ToleranceCertificate};
pub use oracle::{McEstimate, OracleError};
pub use pong::{l_fc, l_fc_gradient, PongConfig, PongError, PongGradient, PongReport, Polygon2};
pub use surfaces::{contact_at, Surface, SurfaceError, UncertaintyField};
pub use synth::{synthesize, SynthError, SynthProblem, SynthResult};
pub use wrench::{basis_wrenches, ContactSpec, FrictionModel, Wrench, WrenchError, WrenchSet};
