//! Adaptive neuron enhancement for diffusion-reaction equations.
//!
//! A two-layer spline network `c₀ + Σ cᵢ max(0, ωᵢ·x − bᵢ)^k` is trained by
//! minimizing the discrete Ritz energy. After each training stage a recovered
//! flux gives local error indicators on the cells cut out by the network's
//! hyperplanes; marked cells receive new neurons and the loop repeats until the
//! relative estimator falls below a tolerance.
//!
//! ```no_run
//! use ane_core::{ane_run, benchmarks};
//!
//! let case = benchmarks::poisson1d();
//! let report = ane_run(case.name, &case.problem, &case.config).unwrap();
//! println!("{:?}", report.neuron_counts());
//! ```

pub mod artifacts;
pub mod benchmarks;
pub mod driver;
pub mod enhancement;
pub mod error;
pub mod estimators;
pub mod functionals;
pub mod linalg;
pub mod par;
pub mod partition;
pub mod problem;
pub mod quadrature;
pub mod spline_net;
pub mod trainer;

pub use artifacts::emit_artifacts;
pub use driver::{ane_run, dual_run, fixed_run, AneConfig, RunReport, RunStop, StageReport};
pub use error::{AneError, Result};
pub use problem::PdeProblem;
pub use quadrature::{build_mesh, Domain, MeshResolution, QuadratureMesh};
pub use spline_net::SplineNetwork;
