//! Interconnection model, input signals, jump schedulers and the simulator.

mod model;
mod scheduler;
mod signal;
mod sim;

pub use model::{
    example_network, parse_all, Clock, ClockKind, CompiledSystem, Interconnection, ModelError, StateLayout,
    Subsystem, CLOCK_TOL,
};
pub use scheduler::{trajectory_rng, JumpScheduler, SchedulerError};
pub use signal::{Signal, SignalError, SignalSpec};
pub use sim::{csv_columns, simulate, simulate_scheduled, EndReason, JumpRecord, SimConfig, SimError, Trajectory};
