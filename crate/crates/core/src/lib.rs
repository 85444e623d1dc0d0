//! Simulator and analysis toolkit for detector-blinding attacks on the N09
//! counterfactual quantum key distribution protocol.
//!
//! The protocol distributes key bits over a Mach-Zehnder interferometer split
//! between Alice and Bob; an eavesdropper armed with bright-light detector
//! control can learn the secret polarization choices while leaving the
//! monitored detector statistics almost untouched. This crate provides three
//! views of that attack surface:
//!
//! - [`analytic`] — closed-form per-pulse click probabilities for the honest
//!   exchange and the four combined blinding/measurement attack variants,
//!   exact solvers for the compensation knobs, ratio reports, and the
//!   equivalent channel-loss fluctuation.
//! - [`optimizer`] — brute-force minimax search over the strategy knobs,
//!   reproducing the published attack-efficiency tables.
//! - [`montecarlo`] — a pulse-level simulation of every scenario that serves
//!   as an independent check on each closed form, and tracks sifted keys and
//!   the eavesdropper's knowledge.
//!
//! Shared domain types live in [`model`].
//!
//! ```
//! use cfqkd::{baseline_stats, optimize, AttackScenario, ConfigInput};
//!
//! let cfg = ConfigInput::default().validate().unwrap();
//! let base = baseline_stats(&cfg);
//! assert!(base.p_d1 > 0.0 && base.p_d1 <= 0.5);
//!
//! let best = optimize(&cfg, AttackScenario::CombinedNoDisc, 0.01).unwrap();
//! assert!(best.report.max_deviation < 0.05);
//! ```

pub mod analytic;
pub mod model;
pub mod montecarlo;
pub mod optimizer;

pub use analytic::{
    attack_stats, baseline_stats, loss_fluctuation_equivalent, ratio_report, solve_y, solve_z0,
    AnalyticError, MAX_FLUCTUATION_DB,
};
pub use model::{
    db_from_transmission, transmission_from_db, AttackParams, AttackScenario, ConfigError,
    ConfigInput, DetectionStats, Discrimination, Polarization, ProtocolConfig, RatioReport,
};
pub use montecarlo::{
    compare_to_analytic, simulate, simulate_with, single_photon_expectation, ClickCounts,
    EveAction, PulseRecord, SimulationError, SimulationSummary, SourceModel, StatCheck, StatChecks,
};
pub use optimizer::{
    optimize, reproduce_tables, OptimizationResult, OptimizeError, TableCell, TableId,
    DEFAULT_GRID_STEP,
};
