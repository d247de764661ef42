//! Random walks in random scenery (RWRS) and the Matheron-de Marsily layered walk.
//!
//! The crate simulates `Z_n = Σ_{k<=n} ξ_{S_k}` and the two-dimensional walk with
//! randomly oriented horizontal lines, computes exact small-`n` values by
//! enumeration, and measures range growth, first-return tails and the constants
//! of the Kesten-Spitzer limit by Monte Carlo.

pub mod config;
pub mod ensemble;
pub mod estimators;
pub mod experiments;
pub mod error;
pub mod ks_limit;
pub mod mdm;
pub mod oracle;
pub mod output;
pub mod rng;
pub mod rwrs;
pub mod samplers;
pub mod sites;
pub mod verify;
pub mod walk_core;

pub use ensemble::{Moments, RunSpec};
pub use estimators::{EnsembleEstimate, PowerLawFit};
pub use error::{Error, Result};
pub use ks_limit::{KsEstimator, KsGrid, SupEstimate};
pub use mdm::{MdmConfig, MdmStats};
pub use oracle::{ExactTable, ExactValue, Quantity};
pub use rwrs::{FirstReturn, RwrsModel, RwrsOptions, RwrsStats};
pub use samplers::{SceneryDist, StableParams, WalkIncrementDist};
pub use walk_core::Trajectory;
pub use config::RunConfig;
pub use experiments::{ExperimentModel, ExperimentOptions, RangeReport, SurvivalReport};
pub use verify::{CriterionReport, Verifier, VerifyOptions};
