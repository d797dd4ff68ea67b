//! Energy modelling for low-power wireless sensor transceivers and sizing of
//! a battery plus super-capacitor hybrid supply.
//!
//! - [`traces`]: bench current traces, energy integration, spike cleaning and
//!   phase segmentation.
//! - [`profiles`]: transceiver presets and four-phase load schedules.
//! - [`hess`]: battery, capacitor and switch models, RC recharge.
//! - [`sizing`]: capacitor sizing and the design pipeline.
//! - [`sim`]: time-stepped simulation with an energy ledger.
//! - [`rf`]: antenna patterns, link budget, coexistence table.
//! - [`io`]: CSV formats.

pub mod error;
pub mod hess;
pub mod io;
pub mod profiles;
pub mod rf;
pub mod sim;
pub mod sizing;
pub mod traces;

pub use error::{Error, Result};
pub use hess::{
    recharge_feasible, sc_recharge_trajectory, BatterySpec, CircuitPhase, Feasibility, SupercapSpec, SwitchSet,
    SwitchSpec, Topology,
};
pub use profiles::{phase_energies, synthesize_trace, PhaseEnergies, PhaseId, PhaseSchedule, Spike, TransceiverPreset};
pub use rf::{AntennaKind, AntennaPattern, CoexistenceEntry, FieldMap};
pub use sim::{
    battery_stress, default_switch_schedule, energy_balance, run_cycle, EnergyLedger, LoadModel, LoadProfile,
    SimConfig, SimulationResult, StressMetrics, SwitchSchedule,
};
pub use sizing::{design_hess, size_supercap, DesignRequest, HessDesign, SizingConstraints};
pub use traces::{analyze_trace, session_energy, CommMode, CurrentTrace, EnergyReport, SenseConfig};
