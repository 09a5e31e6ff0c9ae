//! shufflab — a laboratory for the ball-shuffling game and the block-model
//! cost of dynamic one-dimensional range indexes.
//!
//! The pieces fit together like this:
//!
//! * [`game`] — the shuffling game itself: states, legal moves, replay, and
//!   the line-oriented op-sequence format.
//! * [`strategies`] — concrete ball-handling strategies with analytic cost
//!   bounds.
//! * [`oracle`] — exact optimal costs by dynamic programming, the recurrence
//!   and capacity bound evaluators, and the query/update tradeoff region.
//! * [`sim`] — a simulator for sorted-run, logarithmic-method, and
//!   stepped-merge indexes measuring redundancy, access overhead, and
//!   transition costs.
//! * [`reduction`] — the bridge: an index trace on the grouped workload
//!   yields a verified shuffle schedule bounded by its element transition
//!   cost.
//! * [`experiment`] — reproducible runners behind the CLI, emitting CSV and
//!   JSON artifacts.
//!
//! See the `examples/` directory for one runnable walk-through per
//! capability.

pub mod cover;
pub mod experiment;
pub mod game;
pub mod oracle;
pub mod reduction;
pub mod sim;
pub mod strategies;

pub use game::{
    apply_shuffle, place_ball_direct, replay, CostLedger, GameError, GameState, ReplayError,
    ShuffleOp,
};
pub use oracle::{
    capacity_bound_holds, optimal_cost_full, optimal_cost_merging, optimal_cost_table,
    recurrence_lower_bound, theorem_bounds, tradeoff_region, BoundParams, OracleError,
    OracleResult, TradeoffClass,
};
pub use reduction::{
    build_grouped_workload, contaminated_groups, extract_certificate, group_element_cost,
    run_reduction, verify_certificate, GroupedWorkload, ReductionCertificate, ReductionError,
};
pub use sim::{
    run_workload, IndexConfig, IndexMetrics, Key, SimError, Simulator, SnapshotRecord, Structure,
    WorkloadOptions,
};
pub use strategies::{
    run_strategy, strategy_cost_bound, strategy_cost_bound_corrected, StrategyConfig,
    StrategyError, StrategyKind,
};
