//! Super-capacitor sizing and the end-to-end design pipeline.
//!
//! The capacitor must hold enough energy that the T1 demand `W_e1` is at most
//! `delivery_fraction` of what it releases between `v_max` and `v_min`:
//!
//! ```text
//! W_esc_min = W_e1 / fraction
//! C         = 2 · W_esc_min / (v_max² − v_min²)
//! ```
//!
//! With the default fraction of 0.75 the coefficient is exactly 8/3. The
//! rounded 1.33 and 2.66 factors are available through [`Coefficient::Literal`].

use crate::error::{ensure_positive, Error, Result};
use crate::hess::{
    deliverable_window_energy, loop_resistance, recharge_current_literal, recharge_feasible, sc_recharge_trajectory,
    BatterySpec, Feasibility, SupercapSpec, SwitchSpec, DEFAULT_SC_V_MAX, DEFAULT_SC_V_MIN,
};
use crate::profiles::{phase_energies, PhaseId, PhaseSchedule};
use crate::traces::SenseConfig;

pub const DEFAULT_DELIVERY_FRACTION: f64 = 0.75;
/// Rounded energy multiplier, `1 / 0.75` to two decimals.
pub const LITERAL_ENERGY_FACTOR: f64 = 1.33;
/// Rounded capacitance coefficient, `2 / 0.75` to two decimals.
pub const LITERAL_CAPACITANCE_COEFFICIENT: f64 = 2.66;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coefficient {
    /// `1 / fraction` and `2 / fraction`.
    #[default]
    Exact,
    /// The rounded 1.33 and 2.66 factors; ignores the fraction.
    Literal,
}

/// Which phases the capacitor is sized for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizingBasis {
    #[default]
    T1,
    /// T1 plus T4, for a conservative capacitor.
    T1PlusT4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizingConstraints {
    pub delivery_fraction: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub coefficient: Coefficient,
    pub basis: SizingBasis,
}

impl Default for SizingConstraints {
    fn default() -> Self {
        Self {
            delivery_fraction: DEFAULT_DELIVERY_FRACTION,
            v_min: DEFAULT_SC_V_MIN,
            v_max: DEFAULT_SC_V_MAX,
            coefficient: Coefficient::Exact,
            basis: SizingBasis::T1,
        }
    }
}

impl SizingConstraints {
    pub fn new(delivery_fraction: f64, v_min: f64, v_max: f64) -> Result<Self> {
        let c = Self {
            delivery_fraction,
            v_min,
            v_max,
            ..Self::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn literal(self) -> Self {
        Self {
            coefficient: Coefficient::Literal,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.delivery_fraction;
        if !(f.is_finite() && f > 0.0 && f < 1.0) {
            return Err(Error::domain(
                "delivery_fraction",
                f,
                "must lie strictly between 0 and 1",
            ));
        }
        ensure_positive("v_min", self.v_min)?;
        if !(self.v_max.is_finite() && self.v_max > self.v_min) {
            return Err(Error::DegenerateWindow {
                v_min: self.v_min,
                v_max: self.v_max,
            });
        }
        Ok(())
    }

    fn window(&self) -> f64 {
        self.v_max * self.v_max - self.v_min * self.v_min
    }
}

/// Smallest capacitor energy that covers `w_e1` at the delivery fraction.
pub fn min_sc_energy(w_e1: f64, constraints: &SizingConstraints) -> Result<f64> {
    ensure_positive("w_e1", w_e1)?;
    constraints.validate()?;
    Ok(match constraints.coefficient {
        Coefficient::Exact => w_e1 / constraints.delivery_fraction,
        Coefficient::Literal => LITERAL_ENERGY_FACTOR * w_e1,
    })
}

/// Capacitance whose voltage window releases [`min_sc_energy`].
pub fn size_supercap(w_e1: f64, constraints: &SizingConstraints) -> Result<f64> {
    ensure_positive("w_e1", w_e1)?;
    constraints.validate()?;
    Ok(match constraints.coefficient {
        Coefficient::Exact => 2.0 * (w_e1 / constraints.delivery_fraction) / constraints.window(),
        Coefficient::Literal => LITERAL_CAPACITANCE_COEFFICIENT * w_e1 / constraints.window(),
    })
}

/// The `w_e1` that [`size_supercap`] turns into `capacitance`.
pub fn energy_for_capacitance(capacitance: f64, constraints: &SizingConstraints) -> Result<f64> {
    ensure_positive("capacitance", capacitance)?;
    constraints.validate()?;
    Ok(match constraints.coefficient {
        Coefficient::Exact => capacitance * constraints.window() * constraints.delivery_fraction / 2.0,
        Coefficient::Literal => capacitance * constraints.window() / LITERAL_CAPACITANCE_COEFFICIENT,
    })
}

/// One evaluated formula in a design.
#[derive(Debug, Clone, PartialEq)]
pub struct ProvenanceEntry {
    pub name: &'static str,
    pub formula: &'static str,
    pub value: f64,
    pub unit: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignRequest {
    pub schedule: PhaseSchedule,
    pub sense: SenseConfig,
    pub battery: BatterySpec,
    pub switch: SwitchSpec,
    /// ESR of the capacitor to be sized.
    pub sc_esr: f64,
    pub constraints: SizingConstraints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessDesign {
    pub battery: BatterySpec,
    pub supercap: SupercapSpec,
    pub switch: SwitchSpec,
    pub w_e1: f64,
    pub constraints: SizingConstraints,
    /// `[t2, t3]`, the window the battery has to refill the capacitor.
    pub recharge_window: (f64, f64),
    pub feasibility: Feasibility,
    pub provenance: Vec<ProvenanceEntry>,
}

impl HessDesign {
    pub fn loop_resistance(&self) -> f64 {
        loop_resistance(&self.battery, &self.supercap, &self.switch)
    }

    pub fn provenance_value(&self, name: &str) -> Option<f64> {
        self.provenance.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

/// Sizes the capacitor for the schedule's T1 demand and checks that the
/// battery refills it over `[t2, t3]` starting from `v_min`.
pub fn design_hess(req: &DesignRequest) -> Result<HessDesign> {
    let c = &req.constraints;
    c.validate()?;
    let energies = phase_energies(&req.schedule, &req.sense)?;
    let w_e1 = match c.basis {
        SizingBasis::T1 => energies.get(PhaseId::T1),
        SizingBasis::T1PlusT4 => energies.get(PhaseId::T1) + energies.get(PhaseId::T4),
    };
    if w_e1 <= 0.0 {
        return Err(Error::NothingToSize);
    }

    let w_esc_min = min_sc_energy(w_e1, c)?;
    let capacitance = size_supercap(w_e1, c)?;
    let supercap = SupercapSpec::new(capacitance, req.sc_esr, c.v_min, c.v_max)?;
    let window_energy = deliverable_window_energy(&supercap);
    let r_e = loop_resistance(&req.battery, &supercap, &req.switch);
    let (_, t2) = req.schedule.interval(PhaseId::T2);
    let (_, t3) = req.schedule.interval(PhaseId::T3);
    let window = t3 - t2;
    let feasibility = recharge_feasible(&req.battery, &supercap, &req.switch, c.v_min, window)?;
    let traj = sc_recharge_trajectory(&req.battery, &supercap, &req.switch, c.v_min, window)?;
    let i_b0 = traj.current(0.0);
    let literal_isc = recharge_current_literal(i_b0, &supercap, req.battery.r_ib)?;

    let (coef_formula, coef_value) = match c.coefficient {
        Coefficient::Exact => ("2 / delivery_fraction", 2.0 / c.delivery_fraction),
        Coefficient::Literal => ("2.66 (rounded)", LITERAL_CAPACITANCE_COEFFICIENT),
    };
    let provenance = vec![
        ProvenanceEntry {
            name: "w_e1",
            formula: "sum over sizing phases of p(level) * duration",
            value: w_e1,
            unit: "J",
        },
        ProvenanceEntry {
            name: "delivery_fraction",
            formula: "W_e1 >= fraction * W_esc",
            value: c.delivery_fraction,
            unit: "",
        },
        ProvenanceEntry {
            name: "w_esc_min",
            formula: "W_e1 / fraction",
            value: w_esc_min,
            unit: "J",
        },
        ProvenanceEntry {
            name: "capacitance_coefficient",
            formula: coef_formula,
            value: coef_value,
            unit: "",
        },
        ProvenanceEntry {
            name: "c_equiv",
            formula: "coefficient * W_e1 / (v_max^2 - v_min^2)",
            value: capacitance,
            unit: "F",
        },
        ProvenanceEntry {
            name: "w_window",
            formula: "0.5 * C * (v_max^2 - v_min^2)",
            value: window_energy,
            unit: "J",
        },
        ProvenanceEntry {
            name: "v_start",
            formula: "worst-case capacitor voltage = v_min",
            value: c.v_min,
            unit: "V",
        },
        ProvenanceEntry {
            name: "r_e",
            formula: "R_IB + R_ESR + R_SW_ON",
            value: r_e,
            unit: "ohm",
        },
        ProvenanceEntry {
            name: "tau",
            formula: "R_E * C",
            value: traj.tau(),
            unit: "s",
        },
        ProvenanceEntry {
            name: "recharge_window",
            formula: "t3 - t2",
            value: window,
            unit: "s",
        },
        ProvenanceEntry {
            name: "i_b_initial",
            formula: "(V_B - v_start) / R_E",
            value: i_b0,
            unit: "A",
        },
        ProvenanceEntry {
            name: "i_sc_literal",
            formula: "(1 - R_ESR / R_IB) * i_B",
            value: literal_isc.current,
            unit: "A",
        },
        ProvenanceEntry {
            name: "v_sc_t3",
            formula: "min(v_max, V_B - (V_B - v_start) * exp(-window / tau))",
            value: feasibility.v_end(),
            unit: "V",
        },
        ProvenanceEntry {
            name: "v_sc_required",
            formula: "V_SC(t3) >= v_max",
            value: c.v_max,
            unit: "V",
        },
    ];

    Ok(HessDesign {
        battery: req.battery,
        supercap,
        switch: req.switch,
        w_e1,
        constraints: *c,
        recharge_window: (t2, t3),
        feasibility,
        provenance,
    })
}
