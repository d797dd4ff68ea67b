use thiserror::Error;

use crate::sim::SimulationResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A scalar input fell outside its admissible range.
    #[error("{quantity} = {value} is out of range ({constraint})")]
    Domain {
        quantity: &'static str,
        value: f64,
        constraint: String,
    },

    /// Too few distinct levels in a trace. Carries (level centre in volts, sample count).
    #[error(
        "trace is unsegmentable: found {} distinct level(s); histogram {histogram:?}",
        distinct_levels
    )]
    Unsegmentable {
        distinct_levels: usize,
        histogram: Vec<(f64, usize)>,
    },

    #[error("unknown {kind} '{name}', available: {}", known.join(", "))]
    Unknown {
        kind: &'static str,
        name: String,
        known: Vec<&'static str>,
    },

    #[error("phase boundaries must be strictly increasing: {first_name} = {first} s, {second_name} = {second} s")]
    NonMonotone {
        first_name: &'static str,
        first: f64,
        second_name: &'static str,
        second: f64,
    },

    #[error("nothing to size: the sizing phase carries zero energy")]
    NothingToSize,

    #[error("degenerate voltage window: v_min = {v_min} V, v_max = {v_max} V")]
    DegenerateWindow { v_min: f64, v_max: f64 },

    #[error("invalid switch schedule in {phase}: {reason}")]
    SwitchSchedule { phase: &'static str, reason: String },

    #[error("time step {dt:e} s exceeds the limit {max:.6e} s (min phase duration / 10)")]
    StepTooLarge { dt: f64, max: f64 },

    #[error("brown-out at t = {time} s: supply voltage {voltage} V below the {floor} V operating floor")]
    BrownOut {
        time: f64,
        voltage: f64,
        floor: f64,
        partial: Box<SimulationResult>,
    },

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(quantity: &'static str, value: f64, constraint: impl Into<String>) -> Self {
        Error::Domain {
            quantity,
            value,
            constraint: constraint.into(),
        }
    }
}

pub(crate) fn ensure_positive(quantity: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(quantity, value, "must be finite and > 0"))
    }
}

pub(crate) fn ensure_non_negative(quantity: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::domain(quantity, value, "must be finite and >= 0"))
    }
}
