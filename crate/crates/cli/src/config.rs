//! TOML run configuration. Every section is optional; missing keys fall back
//! to the HC-05 bench setup and the default hybrid supply.

use std::path::Path;

use serde::Deserialize;

use hess_core::hess::{
    BatterySpec, SwitchSpec, Topology, DEFAULT_SC_ESR, DEFAULT_SWITCH_R_ON, LI_ION_V_SOC0, LI_ION_V_SOC100,
};
use hess_core::profiles::{calibrated_schedule, preset, PhaseId, PhaseSchedule, Spike, DEFAULT_SPIKE_WIDTH_FRACTION};
use hess_core::sim::{default_switch_schedule, LoadModel, SwitchSchedule};
use hess_core::sizing::{Coefficient, SizingBasis, SizingConstraints};
use hess_core::traces::{SenseConfig, BENCH_SAMPLE_RATE, BENCH_SENSE_RESISTANCE};

use crate::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub sense: SenseSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub battery: BatterySection,
    #[serde(default)]
    pub supercap: SupercapSection,
    #[serde(default)]
    pub switch: SwitchSection,
    #[serde(default)]
    pub sizing: SizingSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub rf: RfSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SenseSection {
    pub r_sense_ohm: Option<f64>,
    pub v_supply_v: Option<f64>,
    pub sample_rate_sps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// Calibrated schedule to start from: hc05, jdy30 or hm10.
    pub preset: Option<String>,
    pub t1_us: Option<f64>,
    pub t2_us: Option<f64>,
    pub t3_us: Option<f64>,
    pub t4_us: Option<f64>,
    pub level1_v: Option<f64>,
    pub level2_v: Option<f64>,
    pub level3_v: Option<f64>,
    pub level4_v: Option<f64>,
    pub skip: Option<Vec<String>>,
    pub spike_ma: Option<f64>,
    pub spike_us: Option<f64>,
    pub spike_phase: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySection {
    pub v_oc_v: Option<f64>,
    pub r_ib_ohm: Option<f64>,
    pub v_soc0_v: Option<f64>,
    pub v_soc100_v: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupercapSection {
    /// Overrides the sized capacitance in `simulate`.
    pub c_uf: Option<f64>,
    pub esr_ohm: Option<f64>,
    pub v_min_v: Option<f64>,
    pub v_max_v: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSection {
    pub r_on_ohm: Option<f64>,
    pub control_v_min_v: Option<f64>,
    pub control_v_max_v: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizingSection {
    pub delivery_fraction: Option<f64>,
    pub include_t4: Option<bool>,
    pub paper_literal: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt_us: Option<f64>,
    pub cycles: Option<usize>,
    pub load_model: Option<String>,
    pub harvest_mw: Option<f64>,
    pub floor_v: Option<f64>,
    pub t1: Option<String>,
    pub t2: Option<String>,
    pub t3: Option<String>,
    pub t4: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfSection {
    pub antenna: Option<String>,
    pub calibrate_to: Option<String>,
    pub p_tx_dbm: Option<f64>,
    pub distance_m: Option<f64>,
    pub frequency_hz: Option<f64>,
    pub step_deg: Option<f64>,
    pub peak_gain_dbi: Option<f64>,
    pub shape_exponent: Option<f64>,
    pub floor_dbi: Option<f64>,
}

fn keyed(key: &str, e: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{key}: {e}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Failure::Usage(m) => Failure::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::Usage(e.to_string()))
    }

    fn preset_name(&self) -> &str {
        self.schedule.preset.as_deref().unwrap_or("hc05")
    }

    pub fn sense(&self) -> Result<SenseConfig, Failure> {
        let p = preset(self.preset_name()).map_err(|e| keyed("schedule.preset", e))?;
        let s = &self.sense;
        let v_supply = s.v_supply_v.unwrap_or(p.v_supply);
        SenseConfig::new(
            s.r_sense_ohm.unwrap_or(BENCH_SENSE_RESISTANCE),
            v_supply,
            s.sample_rate_sps.unwrap_or(BENCH_SAMPLE_RATE),
        )
        .map_err(|e| keyed("sense", e))
    }

    pub fn schedule(&self) -> Result<PhaseSchedule, Failure> {
        let base = calibrated_schedule(self.preset_name()).map_err(|e| keyed("schedule.preset", e))?;
        let s = &self.schedule;
        let b0 = base.boundaries();
        let l0 = base.levels();
        let us = |v: Option<f64>, d: f64| v.map_or(d, |x| x * 1e-6);
        let boundaries = [
            us(s.t1_us, b0[0]),
            us(s.t2_us, b0[1]),
            us(s.t3_us, b0[2]),
            us(s.t4_us, b0[3]),
        ];
        let levels = [
            s.level1_v.unwrap_or(l0[0]),
            s.level2_v.unwrap_or(l0[1]),
            s.level3_v.unwrap_or(l0[2]),
            s.level4_v.unwrap_or(l0[3]),
        ];
        let skipped: Vec<PhaseId> = match &s.skip {
            Some(list) => list
                .iter()
                .map(|p| p.parse().map_err(|e| keyed("schedule.skip", e)))
                .collect::<Result<_, _>>()?,
            None => PhaseId::ALL.into_iter().filter(|p| base.is_skipped(*p)).collect(),
        };
        let schedule =
            PhaseSchedule::with_skipped(boundaries, levels, &skipped, None).map_err(|e| keyed("schedule", e))?;
        match s.spike_ma {
            None => {
                if s.spike_us.is_some() || s.spike_phase.is_some() {
                    return Err(keyed(
                        "schedule.spike_ma",
                        "required when spike_us or spike_phase is set",
                    ));
                }
                Ok(schedule)
            }
            Some(ma) => {
                let phase: PhaseId = match &s.spike_phase {
                    Some(p) => p.parse().map_err(|e| keyed("schedule.spike_phase", e))?,
                    None => PhaseId::T1,
                };
                let width = s
                    .spike_us
                    .map_or(DEFAULT_SPIKE_WIDTH_FRACTION * schedule.duration(PhaseId::T1), |w| {
                        w * 1e-6
                    });
                schedule
                    .with_spike(Spike {
                        amplitude: ma * 1e-3,
                        width,
                        phase,
                    })
                    .map_err(|e| keyed("schedule.spike_ma", e))
            }
        }
    }

    pub fn battery(&self) -> Result<BatterySpec, Failure> {
        let b = &self.battery;
        BatterySpec::new(
            b.v_oc_v.unwrap_or(LI_ION_V_SOC100),
            b.r_ib_ohm.unwrap_or(1.0),
            b.v_soc0_v.unwrap_or(LI_ION_V_SOC0),
            b.v_soc100_v.unwrap_or(LI_ION_V_SOC100),
        )
        .map_err(|e| keyed("battery", e))
    }

    pub fn switch(&self) -> Result<SwitchSpec, Failure> {
        let s = &self.switch;
        let d = SwitchSpec::default();
        SwitchSpec::new(
            s.r_on_ohm.unwrap_or(DEFAULT_SWITCH_R_ON),
            s.control_v_min_v.unwrap_or(d.control_v_min),
            s.control_v_max_v.unwrap_or(d.control_v_max),
        )
        .map_err(|e| keyed("switch", e))
    }

    pub fn sc_esr(&self) -> f64 {
        self.supercap.esr_ohm.unwrap_or(DEFAULT_SC_ESR)
    }

    pub fn constraints(&self, paper_literal: bool) -> Result<SizingConstraints, Failure> {
        let d = SizingConstraints::default();
        let mut c = SizingConstraints::new(
            self.sizing.delivery_fraction.unwrap_or(d.delivery_fraction),
            self.supercap.v_min_v.unwrap_or(d.v_min),
            self.supercap.v_max_v.unwrap_or(d.v_max),
        )
        .map_err(|e| {
            let key = if self.sizing.delivery_fraction.is_some_and(|f| !(f > 0.0 && f < 1.0)) {
                "sizing.delivery_fraction"
            } else {
                "supercap.v_max_v"
            };
            keyed(key, e)
        })?;
        if paper_literal || self.sizing.paper_literal.unwrap_or(false) {
            c.coefficient = Coefficient::Literal;
        }
        if self.sizing.include_t4.unwrap_or(false) {
            c.basis = SizingBasis::T1PlusT4;
        }
        Ok(c)
    }

    pub fn load_model(&self) -> Result<LoadModel, Failure> {
        match &self.sim.load_model {
            Some(m) => m.parse().map_err(|e| keyed("sim.load_model", e)),
            None => Ok(LoadModel::default()),
        }
    }

    pub fn switches(&self, schedule: &PhaseSchedule) -> Result<SwitchSchedule, Failure> {
        let mut s = default_switch_schedule(schedule);
        let overrides = [
            (PhaseId::T1, &self.sim.t1, "sim.t1"),
            (PhaseId::T2, &self.sim.t2, "sim.t2"),
            (PhaseId::T3, &self.sim.t3, "sim.t3"),
            (PhaseId::T4, &self.sim.t4, "sim.t4"),
        ];
        for (phase, value, key) in overrides {
            if let Some(name) = value {
                let t: Topology = name.parse().map_err(|e| keyed(key, e))?;
                s = s.with_topology(phase, t);
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_hc05() {
        let c = RunConfig::parse("").unwrap();
        let s = c.schedule().unwrap();
        assert_eq!(s, hess_core::profiles::hc05_schedule());
        assert_eq!(c.sense().unwrap().v_supply(), 5.0);
    }

    #[test]
    fn unknown_key_is_located() {
        let err = match RunConfig::parse("[battery]\nr_ib = 1.0\n") {
            Err(Failure::Usage(m)) => m,
            other => panic!("{other:?}"),
        };
        assert!(err.contains("r_ib"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn degenerate_window_names_key() {
        let c = RunConfig::parse("[supercap]\nv_min_v = 3.6\nv_max_v = 3.6\n").unwrap();
        match c.constraints(false) {
            Err(Failure::Usage(m)) => assert!(m.starts_with("supercap.v_max_v"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn preset_sets_supply() {
        let c = RunConfig::parse("[schedule]\npreset = \"jdy30\"\n").unwrap();
        assert_eq!(c.sense().unwrap().v_supply(), 3.3);
        assert!(c.schedule().unwrap().is_skipped(PhaseId::T2));
    }
}
