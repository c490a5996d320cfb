//! Simulator and analysis toolkit for coded data rebalancing in `r`-balanced
//! cyclic distributed databases.
//!
//! A cyclic database on `K` nodes stores segment `W_i` at nodes
//! `i, i+1, …, i+r-1` (wrapping around). When a node leaves or joins, the
//! survivors exchange data over a shared broadcast bus until the database is
//! again `r`-balanced and cyclic. This crate executes those exchanges at the
//! bit level, counts the load exactly and verifies the outcome independently.
//!
//! ```
//! use cyclic_rebalance::{run_removal, FaultPlan, SchemeChoice, SystemParams};
//! use num_rational::Ratio;
//!
//! let params = SystemParams::with_minimal_segment(6, 3)?;
//! let run = run_removal(&params, 6, SchemeChoice::Auto, 0, FaultPlan::none())?;
//! assert_eq!(run.outcome.scheme, SchemeChoice::Scheme1);
//! assert_eq!(run.outcome.report.measured_load, Ratio::from_integer(2));
//! assert!(run.verification.passed());
//! # Ok::<(), cyclic_rebalance::Error>(())
//! ```

pub mod addition;
pub mod analytics;
pub mod bus;
pub mod content;
pub mod error;
pub mod exec;
pub mod merge;
pub mod model;
pub mod removal;
pub mod scenario;
pub mod split;
pub mod trace;
pub mod verify;

pub use addition::{addition_lower_bound, rebalance_add, rebalance_add_with_faults, AdditionOutcome, AdditionPlan};
pub use analytics::{
    load_scheme1, load_scheme2, removal_lower_bound, threshold, verify_claim1, Claim1Report, LoadReport, Rational,
};
pub use bus::{Broadcast, Bus, Kind, TransmissionLog};
pub use error::{Error, Result};
pub use exec::Execution;
pub use merge::{apply_merge, build_merge_recipes, MergeRecipe, Part};
pub use model::{
    box_minus, box_plus, build_cyclic_database, relabel_for_removed_node, storage_set, target_storage_set, Database,
    NodeId, SegmentLabel, StoredLabel, SubsegmentLabel, SystemParams,
};
pub use removal::{
    rebalance_remove, rebalance_remove_with_faults, run_scheme1, run_scheme2, run_uncoded_removal, FaultPlan,
    RemovalOutcome, SchemeChoice,
};
pub use scenario::{removal_sweep, run_addition, run_removal, write_sweep_csv, AdditionRun, RemovalRun, SweepRow};
pub use split::{make_split_plan, split_corners, split_middle, SplitPlan};
pub use verify::{verify_cyclic_balanced, verify_preservation, ExpectedLayout, VerificationReport};
