//! Projected stochastic gradient descent for finite-sum objectives subject
//! to linear equality constraints `Ax = b`.
//!
//! The iteration draws one mini-batch gradient from a fixed partition of the
//! components, takes a step of length `Δ_k`, and projects back onto the
//! affine set either exactly (Cholesky of `AA^T`) or inexactly (conjugate
//! gradient with a residual test tied to the current infeasibility).
//!
//! ```
//! use psgleco::objectives::quadratic_oracle;
//! use psgleco::sampling::{Partition, RngStream};
//! use psgleco::solver::{run, SolverConfig};
//! use psgleco::steplength::StepConfig;
//!
//! let oracle = quadratic_oracle(10, 4, 50, 1).unwrap();
//! let step = StepConfig { k_max: 200, ..StepConfig::default() };
//! let cfg = SolverConfig { k_max: 200, ..SolverConfig::exact() };
//! let mut rng = RngStream::new(7);
//! let partition = Partition::build(50, 10, &mut rng).unwrap();
//! let record = run(&oracle.system, &oracle.problem, partition, &step, &cfg, &mut rng).unwrap();
//! assert_eq!(record.rows.len(), 200);
//! ```

pub mod constraintgen;
pub mod ingest;
pub mod objectives;
pub mod projection;
pub mod sampling;
pub mod solver;
pub mod sparse;
pub mod steplength;

pub use objectives::FiniteSumObjective;
pub use projection::{ConstraintSystem, ProjectionOutcome};
pub use sampling::{Partition, RngStream};
pub use solver::{run, run_many, AggregateRecord, ProjectionMode, RunRecord, SolverConfig, X0Mode};
pub use steplength::{BbPairing, StepConfig, Strategy};
