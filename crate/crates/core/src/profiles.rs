//! Transceiver presets and phase-structured load profiles.
//!
//! One transmission cycle is split into four phases:
//!
//! | phase | interval   | level                         |
//! |-------|------------|-------------------------------|
//! | T1    | `[0, t1]`  | active maximum (0.5..0.6 V)   |
//! | T2    | `[t1, t2]` | wake-up / sleep (about 0.3 V) |
//! | T3    | `[t2, t3]` | active minimum (0.15..0.2 V)  |
//! | T4    | `[t3, t4]` | active maximum                |
//!
//! Levels are sense-resistor voltages on the measurement bench.

use std::fmt;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::traces::{transceiver_power, voltage_for_current, voltage_for_power, CurrentTrace, SenseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PhaseId {
    T1,
    T2,
    T3,
    T4,
}

impl PhaseId {
    pub const ALL: [PhaseId; 4] = [PhaseId::T1, PhaseId::T2, PhaseId::T3, PhaseId::T4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PhaseId::T1 => "T1",
            PhaseId::T2 => "T2",
            PhaseId::T3 => "T3",
            PhaseId::T4 => "T4",
        }
    }
}

impl fmt::Display for PhaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PhaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(PhaseId::T1),
            "T2" => Ok(PhaseId::T2),
            "T3" => Ok(PhaseId::T3),
            "T4" => Ok(PhaseId::T4),
            _ => Err(Error::Unknown {
                kind: "phase",
                name: s.to_string(),
                known: vec!["T1", "T2", "T3", "T4"],
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeClass {
    Short,
    Medium,
    Long,
}

/// Where a transceiver's commutation spike occurs relative to transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikePlacement {
    OutsideTransmission,
    InsideTransmission,
}

/// Fixed per-transceiver current figures. Currents in amperes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransceiverPreset {
    pub name: &'static str,
    pub i_txrx: f64,
    pub i_mean: f64,
    pub i_spike: f64,
    /// Connected, no command sent.
    pub i_idle: f64,
    pub v_supply: f64,
    pub data_rate: f64,
    pub range_class: RangeClass,
    pub spike_placement: SpikePlacement,
}

/// Columns of the current table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrentColumn {
    TxRx,
    Mean,
    Spike,
    Idle,
}

impl CurrentColumn {
    pub const ALL: [CurrentColumn; 4] = [
        CurrentColumn::TxRx,
        CurrentColumn::Mean,
        CurrentColumn::Spike,
        CurrentColumn::Idle,
    ];
}

impl TransceiverPreset {
    pub fn current(&self, column: CurrentColumn) -> f64 {
        match column {
            CurrentColumn::TxRx => self.i_txrx,
            CurrentColumn::Mean => self.i_mean,
            CurrentColumn::Spike => self.i_spike,
            CurrentColumn::Idle => self.i_idle,
        }
    }

    /// `100 * self / reference` for one column, in percent.
    pub fn ratio_percent(&self, reference: &TransceiverPreset, column: CurrentColumn) -> f64 {
        100.0 * self.current(column) / reference.current(column)
    }

    /// Bench sense configuration at this transceiver's supply voltage.
    pub fn bench_config(&self) -> SenseConfig {
        SenseConfig::bench(self.v_supply).expect("preset supply voltages are positive")
    }
}

pub const HC05: TransceiverPreset = TransceiverPreset {
    name: "hc05",
    i_txrx: 47.25e-3,
    i_mean: 31.53e-3,
    i_spike: 62.02e-3,
    i_idle: 18.14e-3,
    v_supply: 5.0,
    data_rate: 1.0e6,
    range_class: RangeClass::Medium,
    spike_placement: SpikePlacement::OutsideTransmission,
};

pub const JDY30: TransceiverPreset = TransceiverPreset {
    name: "jdy30",
    i_txrx: 31.98e-3,
    i_mean: 14.40e-3,
    i_spike: 60.43e-3,
    i_idle: 8.53e-3,
    v_supply: 3.3,
    data_rate: 1.0e6,
    range_class: RangeClass::Medium,
    spike_placement: SpikePlacement::OutsideTransmission,
};

pub const HM10: TransceiverPreset = TransceiverPreset {
    name: "hm10",
    i_txrx: 20.60e-3,
    i_mean: 10.47e-3,
    i_spike: 18.0e-3,
    i_idle: 8.80e-3,
    v_supply: 3.3,
    data_rate: 721.0e3,
    range_class: RangeClass::Short,
    spike_placement: SpikePlacement::InsideTransmission,
};

/// Long-range 2.4 GHz module. Tx&Rx is the top of the Tx range, mean is the
/// Tx midpoint, spike is the module's peak current and idle its sleep current.
pub const NRF24: TransceiverPreset = TransceiverPreset {
    name: "nrf24",
    i_txrx: 11.3e-3,
    i_mean: 9.15e-3,
    i_spike: 18.0e-3,
    i_idle: 26e-6,
    v_supply: 3.3,
    data_rate: 2.0e6,
    range_class: RangeClass::Long,
    spike_placement: SpikePlacement::InsideTransmission,
};

/// Reference BLE current pattern that the commercial modules are compared to.
pub const BLE_REF: TransceiverPreset = TransceiverPreset {
    name: "ble_ref",
    i_txrx: 17.5e-3,
    i_mean: 8.53e-3,
    i_spike: 16.0e-3,
    i_idle: 7.4e-3,
    v_supply: 3.3,
    data_rate: 1.0e6,
    range_class: RangeClass::Short,
    spike_placement: SpikePlacement::OutsideTransmission,
};

pub const PRESETS: [TransceiverPreset; 5] = [HC05, JDY30, HM10, NRF24, BLE_REF];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

pub fn preset(name: &str) -> Result<TransceiverPreset> {
    let key = name.to_ascii_lowercase().replace(['-', '_'], "");
    PRESETS
        .iter()
        .find(|p| p.name.replace('_', "") == key)
        .copied()
        .ok_or_else(|| Error::Unknown {
            kind: "preset",
            name: name.to_string(),
            known: preset_names(),
        })
}

/// Rectangular current pulse superposed on one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spike {
    /// Current during the pulse, amperes.
    pub amplitude: f64,
    /// Pulse width, seconds.
    pub width: f64,
    pub phase: PhaseId,
}

/// Default spike width as a fraction of the T1 duration.
pub const DEFAULT_SPIKE_WIDTH_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseLevel {
    pub phase: PhaseId,
    pub sense_voltage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    boundaries: [f64; 4],
    levels: [f64; 4],
    skipped: [bool; 4],
    spike: Option<Spike>,
}

const BOUNDARY_NAMES: [&str; 5] = ["0", "t1", "t2", "t3", "t4"];

impl PhaseSchedule {
    /// Validated four-phase schedule. `boundaries` are `t1..t4` in seconds and
    /// must be strictly increasing from zero.
    pub fn new(boundaries: [f64; 4], levels: [f64; 4], spike: Option<Spike>) -> Result<Self> {
        Self::with_skipped(boundaries, levels, &[], spike)
    }

    /// Like [`PhaseSchedule::new`], but the listed phases are zero-length
    /// and carry no energy. T1 cannot be skipped.
    pub fn with_skipped(
        boundaries: [f64; 4],
        levels: [f64; 4],
        skipped: &[PhaseId],
        spike: Option<Spike>,
    ) -> Result<Self> {
        let mut skip = [false; 4];
        for &p in skipped {
            if p == PhaseId::T1 {
                return Err(Error::domain("skipped phase", 1.0, "T1 must be present"));
            }
            skip[p.index()] = true;
        }
        let mut prev = 0.0;
        for (k, &t) in boundaries.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::domain("phase boundary", t, "must be finite"));
            }
            let ok = if skip[k] { t == prev } else { t > prev };
            if !ok {
                return Err(Error::NonMonotone {
                    first_name: BOUNDARY_NAMES[k],
                    first: prev,
                    second_name: BOUNDARY_NAMES[k + 1],
                    second: t,
                });
            }
            prev = t;
        }
        for (k, &v) in levels.iter().enumerate() {
            ensure_non_negative("phase level", v)?;
            if skip[k] && v != 0.0 {
                return Err(Error::domain("phase level", v, "skipped phases must have level 0"));
            }
        }
        let schedule = Self {
            boundaries,
            levels,
            skipped: skip,
            spike: None,
        };
        match spike {
            Some(s) => schedule.with_spike(s),
            None => Ok(schedule),
        }
    }

    pub fn with_spike(mut self, spike: Spike) -> Result<Self> {
        ensure_positive("spike amplitude", spike.amplitude)?;
        ensure_positive("spike width", spike.width)?;
        if self.skipped[spike.phase.index()] {
            return Err(Error::domain("spike width", spike.width, "host phase is skipped"));
        }
        let host = self.duration(spike.phase);
        if spike.width > host {
            return Err(Error::domain(
                "spike width",
                spike.width,
                format!("must not exceed the host phase duration {host} s"),
            ));
        }
        self.spike = Some(spike);
        Ok(self)
    }

    /// Spike in T1 with the default width.
    pub fn with_default_spike(self, amplitude: f64) -> Result<Self> {
        let width = DEFAULT_SPIKE_WIDTH_FRACTION * self.duration(PhaseId::T1);
        self.with_spike(Spike {
            amplitude,
            width,
            phase: PhaseId::T1,
        })
    }

    pub fn without_spike(mut self) -> Self {
        self.spike = None;
        self
    }

    /// Same timing, every level multiplied by `factor`.
    pub fn scaled_levels(&self, factor: f64) -> Result<Self> {
        ensure_non_negative("level scale", factor)?;
        let mut out = self.clone();
        for v in &mut out.levels {
            *v *= factor;
        }
        Ok(out)
    }

    pub fn boundaries(&self) -> [f64; 4] {
        self.boundaries
    }

    pub fn levels(&self) -> [f64; 4] {
        self.levels
    }

    pub fn phase_levels(&self) -> [PhaseLevel; 4] {
        PhaseId::ALL.map(|phase| PhaseLevel {
            phase,
            sense_voltage: self.levels[phase.index()],
        })
    }

    pub fn level(&self, phase: PhaseId) -> f64 {
        self.levels[phase.index()]
    }

    pub fn spike(&self) -> Option<Spike> {
        self.spike
    }

    pub fn is_skipped(&self, phase: PhaseId) -> bool {
        self.skipped[phase.index()]
    }

    pub fn active_phases(&self) -> impl Iterator<Item = PhaseId> + '_ {
        PhaseId::ALL.into_iter().filter(|p| !self.is_skipped(*p))
    }

    /// `(start, end)` of a phase in seconds.
    pub fn interval(&self, phase: PhaseId) -> (f64, f64) {
        let i = phase.index();
        let start = if i == 0 { 0.0 } else { self.boundaries[i - 1] };
        (start, self.boundaries[i])
    }

    pub fn duration(&self, phase: PhaseId) -> f64 {
        let (a, b) = self.interval(phase);
        b - a
    }

    /// Full cycle duration, `t4`.
    pub fn cycle_duration(&self) -> f64 {
        self.boundaries[3]
    }

    /// Shortest non-skipped phase.
    pub fn min_phase_duration(&self) -> f64 {
        self.active_phases()
            .map(|p| self.duration(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Phase containing time `t` within `[0, t4)`; `t >= t4` maps to the last
    /// active phase.
    pub fn phase_at(&self, t: f64) -> PhaseId {
        for p in self.active_phases() {
            if t < self.interval(p).1 {
                return p;
            }
        }
        self.active_phases().last().unwrap_or(PhaseId::T1)
    }

    /// `(start, end)` of the spike pulse, centred in its host phase.
    pub fn spike_window(&self) -> Option<(f64, f64)> {
        self.spike.map(|s| {
            let (a, b) = self.interval(s.phase);
            let start = a + 0.5 * (b - a - s.width);
            (start, start + s.width)
        })
    }

    fn check_levels(&self, config: &SenseConfig) -> Result<()> {
        for &v in &self.levels {
            if v >= config.v_supply() {
                return Err(Error::domain(
                    "phase level",
                    v,
                    format!("must be below v_supply = {} V", config.v_supply()),
                ));
            }
        }
        Ok(())
    }
}

/// Alias kept for symmetry with the other operations.
pub fn make_schedule(boundaries: [f64; 4], levels: [f64; 4], spike: Option<Spike>) -> Result<PhaseSchedule> {
    PhaseSchedule::new(boundaries, levels, spike)
}

/// Sense-voltage waveform sampled at `config.sample_rate()` over `[0, t4)`.
///
/// Sample `k` sits at `k * dt` and takes the level of the phase containing it;
/// the spike, when present, replaces the level by `amplitude * r_sense` inside
/// its window.
pub fn synthesize_trace(schedule: &PhaseSchedule, config: &SenseConfig) -> Result<CurrentTrace> {
    schedule.check_levels(config)?;
    let n = (schedule.cycle_duration() * config.sample_rate()).round() as usize;
    if n < 2 {
        return Err(Error::domain(
            "samples per cycle",
            n as f64,
            "sample_rate * t4 must give at least 2 samples",
        ));
    }
    let spike = match (schedule.spike, schedule.spike_window()) {
        (Some(s), Some(w)) => Some((voltage_for_current(s.amplitude, config)?, w)),
        _ => None,
    };
    let dt = config.dt();
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            match spike {
                Some((v, (a, b))) if t >= a && t < b => v,
                _ => schedule.level(schedule.phase_at(t)),
            }
        })
        .collect();
    CurrentTrace::new(samples, *config, "synthetic")
}

/// Closed-form energies per phase, joules.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseEnergies(pub [f64; 4]);

impl PhaseEnergies {
    pub fn get(&self, phase: PhaseId) -> f64 {
        self.0[phase.index()]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PhaseId, f64)> + '_ {
        PhaseId::ALL.into_iter().map(|p| (p, self.get(p)))
    }
}

/// `p(level) * duration` per phase, with the spike's excess energy over its
/// host level added to the host phase.
pub fn phase_energies(schedule: &PhaseSchedule, config: &SenseConfig) -> Result<PhaseEnergies> {
    schedule.check_levels(config)?;
    let mut out = [0.0; 4];
    for p in schedule.active_phases() {
        out[p.index()] = transceiver_power(schedule.level(p), config)? * schedule.duration(p);
    }
    if let Some(s) = schedule.spike {
        let v = voltage_for_current(s.amplitude, config)?;
        let excess = transceiver_power(v, config)? - transceiver_power(schedule.level(s.phase), config)?;
        out[s.phase.index()] += excess * s.width;
    }
    Ok(PhaseEnergies(out))
}

/// Level that makes a phase of `duration` consume `energy` on the bench.
pub fn level_for_phase_energy(energy: f64, duration: f64, config: &SenseConfig) -> Result<f64> {
    ensure_positive("phase duration", duration)?;
    voltage_for_power(energy / duration, config)
}

/// Reference phase boundaries of the HC-05 cycle, seconds.
pub const HC05_BOUNDARIES: [f64; 4] = [950e-6, 1150e-6, 1850e-6, 2400e-6];

/// Mid-band levels for the HC-05 cycle before calibration.
pub const HC05_NOMINAL_LEVELS: [f64; 4] = [0.55, 0.30, 0.175, 0.55];

/// HC-05 levels reproducing the measured per-phase energies
/// (204.703, 30.205, 55.683, 106.703) µJ on a 5 V bench.
/// Each is `level_for_phase_energy(E, T, bench(5 V))` over the reference
/// boundaries; T2 sits at 0.40 V and T3 at 0.203 V, slightly above their
/// nominal bands.
pub const HC05_CALIBRATED_LEVELS: [f64; 4] = [
    0.598_192_178_616_965_5,
    0.401_316_007_589_517_9,
    0.202_624_559_571_136_68,
    0.530_417_976_967_055_8,
];

/// JDY-30 with T2 folded away: (94.484, 0, 19.219, 15.490) µJ at 3.3 V over
/// T1 = 950 µs, T3 = 700 µs, T4 = 550 µs.
pub const JDY30_BOUNDARIES: [f64; 4] = [950e-6, 950e-6, 1650e-6, 2200e-6];
pub const JDY30_CALIBRATED_LEVELS: [f64; 4] = [
    0.422_344_759_521_760_65,
    0.0,
    0.105_010_947_796_531_75,
    0.107_813_122_985_296_77,
];

/// HM-10 with its in-transmission spike folded into T1 and T2/T4 empty:
/// (80.501, 0, 22.574, 0) µJ at 3.3 V over T1 = 950 µs, T3 = 700 µs.
pub const HM10_BOUNDARIES: [f64; 4] = [950e-6, 950e-6, 1650e-6, 1650e-6];
pub const HM10_CALIBRATED_LEVELS: [f64; 4] = [0.351_153_232_164_860_3, 0.0, 0.124_083_076_592_026, 0.0];

/// HC-05 cycle with mid-band levels.
pub fn hc05_nominal_schedule() -> PhaseSchedule {
    PhaseSchedule::new(HC05_BOUNDARIES, HC05_NOMINAL_LEVELS, None).expect("valid constants")
}

/// HC-05 cycle calibrated to the measured phase energies. The default design input.
pub fn hc05_schedule() -> PhaseSchedule {
    PhaseSchedule::new(HC05_BOUNDARIES, HC05_CALIBRATED_LEVELS, None).expect("valid constants")
}

pub fn jdy30_schedule() -> PhaseSchedule {
    PhaseSchedule::with_skipped(JDY30_BOUNDARIES, JDY30_CALIBRATED_LEVELS, &[PhaseId::T2], None)
        .expect("valid constants")
}

pub fn hm10_schedule() -> PhaseSchedule {
    PhaseSchedule::with_skipped(
        HM10_BOUNDARIES,
        HM10_CALIBRATED_LEVELS,
        &[PhaseId::T2, PhaseId::T4],
        None,
    )
    .expect("valid constants")
}

/// Calibrated schedule for a preset name, where one exists.
pub fn calibrated_schedule(name: &str) -> Result<PhaseSchedule> {
    match preset(name)?.name {
        "hc05" => Ok(hc05_schedule()),
        "jdy30" => Ok(jdy30_schedule()),
        "hm10" => Ok(hm10_schedule()),
        other => Err(Error::Unknown {
            kind: "calibrated schedule",
            name: other.to_string(),
            known: vec!["hc05", "jdy30", "hm10"],
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traces::session_energy;
    use approx::assert_relative_eq;

    const HC05_TABLE: [f64; 4] = [204.703e-6, 30.205e-6, 55.683e-6, 106.703e-6];

    #[test]
    fn preset_lookup() {
        let p = preset("hc05").unwrap();
        assert_eq!(
            (p.i_txrx, p.i_mean, p.i_spike, p.i_idle),
            (47.25e-3, 31.53e-3, 62.02e-3, 18.14e-3)
        );
        assert_eq!(p.v_supply, 5.0);
        let hm = preset("HM-10").unwrap();
        assert_eq!(hm.i_txrx, 20.60e-3);
        assert_eq!(hm.spike_placement, SpikePlacement::InsideTransmission);
        let b = preset("ble_ref").unwrap();
        assert_eq!(
            (b.i_txrx, b.i_mean, b.i_spike, b.i_idle),
            (17.5e-3, 8.53e-3, 16e-3, 7.4e-3)
        );
    }

    #[test]
    fn unknown_preset_lists_names() {
        let err = preset("cc2541").unwrap_err();
        let msg = err.to_string();
        for name in ["hc05", "jdy30", "hm10", "nrf24", "ble_ref"] {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn current_ordering_for_bt_modules() {
        for p in [HC05, JDY30] {
            assert!(p.i_spike >= p.i_txrx && p.i_txrx >= p.i_mean && p.i_mean >= p.i_idle && p.i_idle > 0.0);
        }
    }

    #[test]
    fn schedule_validation() {
        let s = hc05_nominal_schedule();
        assert_relative_eq!(s.cycle_duration(), 2400e-6);
        assert_eq!(s.level(PhaseId::T3), 0.175);

        let err = PhaseSchedule::new([950e-6, 950e-6, 1850e-6, 2400e-6], HC05_NOMINAL_LEVELS, None).unwrap_err();
        match err {
            Error::NonMonotone {
                first_name,
                second_name,
                ..
            } => assert_eq!((first_name, second_name), ("t1", "t2")),
            other => panic!("{other}"),
        }
        assert!(PhaseSchedule::new([0.0, 1.0, 2.0, 3.0], [0.1; 4], None).is_err());
        assert!(PhaseSchedule::new([1.0, 2.0, 3.0, 4.0], [0.1, -0.1, 0.1, 0.1], None).is_err());
    }

    #[test]
    fn skipped_phases_are_zero_length() {
        let s = jdy30_schedule();
        assert!(s.is_skipped(PhaseId::T2));
        assert_eq!(s.duration(PhaseId::T2), 0.0);
        assert_eq!(s.active_phases().count(), 3);
        assert_eq!(s.phase_at(951e-6), PhaseId::T3);
        assert!(PhaseSchedule::with_skipped([1.0, 2.0, 3.0, 4.0], [0.1; 4], &[PhaseId::T1], None).is_err());
    }

    #[test]
    fn calibrated_constants_match_inversion() {
        let cfg = SenseConfig::bench(5.0).unwrap();
        let s = hc05_schedule();
        for p in PhaseId::ALL {
            let v = level_for_phase_energy(HC05_TABLE[p.index()], s.duration(p), &cfg).unwrap();
            assert_relative_eq!(v, s.level(p), max_relative = 1e-12);
        }
        // Calibrated levels stay inside the active-max band for T1 and T4.
        for p in [PhaseId::T1, PhaseId::T4] {
            assert!((0.5..=0.6).contains(&s.level(p)));
        }
    }

    #[test]
    fn hc05_phase_energies_match_table() {
        let e = phase_energies(&hc05_schedule(), &HC05.bench_config()).unwrap();
        for p in PhaseId::ALL {
            assert_relative_eq!(e.get(p), HC05_TABLE[p.index()], max_relative = 1e-9);
        }
        assert_relative_eq!(e.total(), 397.294e-6, max_relative = 1e-9);
    }

    #[test]
    fn hm10_energies_fold_spike_into_t1() {
        let e = phase_energies(&hm10_schedule(), &HM10.bench_config()).unwrap();
        assert_relative_eq!(e.get(PhaseId::T1), 80.501e-6, max_relative = 1e-9);
        assert_eq!(e.get(PhaseId::T2), 0.0);
        assert_relative_eq!(e.get(PhaseId::T3), 22.574e-6, max_relative = 1e-9);
        assert_eq!(e.get(PhaseId::T4), 0.0);
    }

    #[test]
    fn zero_levels_give_zero_energy() {
        let s = hc05_nominal_schedule().scaled_levels(0.0).unwrap();
        let e = phase_energies(&s, &HC05.bench_config()).unwrap();
        assert_eq!(e.total(), 0.0);
    }

    #[test]
    fn constant_schedule_gives_constant_trace() {
        let s = PhaseSchedule::new([1e-4, 2e-4, 3e-4, 4e-4], [0.3; 4], None).unwrap();
        let t = synthesize_trace(&s, &HC05.bench_config()).unwrap();
        assert_eq!(t.len(), 100);
        assert!(t.samples().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn synthesized_hc05_energy_matches_closed_form() {
        let cfg = HC05.bench_config();
        let s = hc05_schedule();
        let t = synthesize_trace(&s, &cfg).unwrap();
        assert_eq!(t.len(), 600);
        let closed = phase_energies(&s, &cfg).unwrap().total();
        // Boundaries fall mid-interval, so only the final half-open interval
        // of T4 is missing from the trapezoid.
        let p4 = transceiver_power(s.level(PhaseId::T4), &cfg).unwrap();
        assert_relative_eq!(session_energy(&t), closed - p4 * cfg.dt(), max_relative = 1e-9);
    }

    #[test]
    fn spike_sets_trace_maximum() {
        let cfg = HC05.bench_config();
        let s = hc05_schedule().with_default_spike(HC05.i_spike).unwrap();
        assert_relative_eq!(s.spike().unwrap().width, 47.5e-6, max_relative = 1e-12);
        let t = synthesize_trace(&s, &cfg).unwrap();
        let peak = t.currents().fold(0.0, f64::max);
        assert_relative_eq!(peak, 62.02e-3, max_relative = 1e-12);
    }

    #[test]
    fn level_above_supply_is_rejected() {
        let s = PhaseSchedule::new([1e-4, 2e-4, 3e-4, 4e-4], [0.3, 3.4, 0.2, 0.3], None).unwrap();
        assert!(synthesize_trace(&s, &JDY30.bench_config()).is_err());
        assert!(phase_energies(&s, &JDY30.bench_config()).is_err());
    }

    #[test]
    fn spike_wider_than_host_is_rejected() {
        let s = hc05_schedule();
        assert!(s
            .with_spike(Spike {
                amplitude: 0.06,
                width: 1e-3,
                phase: PhaseId::T1
            })
            .is_err());
    }
}
