//! Time-stepped simulation of the hybrid supply feeding the transceiver.
//!
//! The only state is the capacitor voltage. Each step solves the resistive
//! network of the active topology algebraically and advances `v_sc` with
//! Heun's method (explicit trapezoidal predictor-corrector). Energy flows are
//! integrated with the trapezoid rule over the same step ends, so the ledger
//! imbalance is a direct measure of the integration error.

use std::fmt;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::hess::{BatterySpec, SupercapSpec, SwitchSet, SwitchSpec, Topology, TRANSCEIVER_FLOOR_V};
use crate::profiles::{PhaseId, PhaseSchedule};
use crate::sizing::HessDesign;
use crate::traces::{transceiver_power, voltage_for_current, SenseConfig};

/// Relative ledger change between consecutive cycles below which the run is
/// considered periodic.
pub const STEADY_STATE_TOLERANCE: f64 = 1e-6;

/// How the transceiver draws from its supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadModel {
    /// Draws the bench power of each phase regardless of supply voltage.
    #[default]
    ConstantPower,
    /// Behaves as the resistance seen on the bench, `R_T = r_sense (Vs − v) / v`.
    ConstantResistance,
}

impl LoadModel {
    pub fn name(self) -> &'static str {
        match self {
            LoadModel::ConstantPower => "constant_power",
            LoadModel::ConstantResistance => "constant_resistance",
        }
    }
}

impl fmt::Display for LoadModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LoadModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant_power" => Ok(LoadModel::ConstantPower),
            "constant_resistance" => Ok(LoadModel::ConstantResistance),
            _ => Err(Error::Unknown {
                kind: "load model",
                name: s.to_string(),
                known: vec!["constant_power", "constant_resistance"],
            }),
        }
    }
}

/// Load drawn during one phase (or the spike).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseLoad {
    Power(f64),
    /// Ohms; `f64::INFINITY` for an open load.
    Resistance(f64),
}

impl PhaseLoad {
    fn from_sense(v_sense: f64, sense: &SenseConfig, model: LoadModel) -> Result<Self> {
        Ok(match model {
            LoadModel::ConstantPower => PhaseLoad::Power(transceiver_power(v_sense, sense)?),
            LoadModel::ConstantResistance => {
                if v_sense <= 0.0 {
                    PhaseLoad::Resistance(f64::INFINITY)
                } else {
                    PhaseLoad::Resistance(sense.r_sense() * (sense.v_supply() - v_sense) / v_sense)
                }
            }
        })
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            PhaseLoad::Power(p) => p == 0.0,
            PhaseLoad::Resistance(r) => r.is_infinite(),
        }
    }
}

/// The transceiver load over one cycle, derived from a phase schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    schedule: PhaseSchedule,
    model: LoadModel,
    phases: [PhaseLoad; 4],
    spike: Option<(PhaseId, f64, f64, PhaseLoad)>,
}

impl LoadProfile {
    pub fn from_schedule(schedule: &PhaseSchedule, sense: &SenseConfig, model: LoadModel) -> Result<Self> {
        let mut phases = [PhaseLoad::Power(0.0); 4];
        for p in PhaseId::ALL {
            phases[p.index()] = if schedule.is_skipped(p) {
                PhaseLoad::from_sense(0.0, sense, model)?
            } else {
                PhaseLoad::from_sense(schedule.level(p), sense, model)?
            };
        }
        let spike = match (schedule.spike(), schedule.spike_window()) {
            (Some(s), Some((a, b))) => {
                let v = voltage_for_current(s.amplitude, sense)?;
                Some((s.phase, a, b, PhaseLoad::from_sense(v, sense, model)?))
            }
            _ => None,
        };
        Ok(Self {
            schedule: schedule.clone(),
            model,
            phases,
            spike,
        })
    }

    pub fn schedule(&self) -> &PhaseSchedule {
        &self.schedule
    }

    pub fn model(&self) -> LoadModel {
        self.model
    }

    pub fn phase_load(&self, phase: PhaseId) -> PhaseLoad {
        self.phases[phase.index()]
    }

    /// Load at cycle time `t` while in `phase`.
    pub fn at(&self, phase: PhaseId, t: f64) -> PhaseLoad {
        match self.spike {
            Some((p, a, b, load)) if p == phase && t >= a && t < b => load,
            _ => self.phases[phase.index()],
        }
    }

    fn phase_is_unloaded(&self, phase: PhaseId) -> bool {
        self.phases[phase.index()].is_zero() && !matches!(self.spike, Some((p, _, _, l)) if p == phase && !l.is_zero())
    }
}

/// Topology per phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchSchedule {
    topologies: [Topology; 4],
}

impl SwitchSchedule {
    pub fn new(topologies: [Topology; 4]) -> Self {
        Self { topologies }
    }

    /// Builds a schedule from raw switch states, rejecting any combination
    /// with more than one source path or a recharge path while the capacitor
    /// feeds the load.
    pub fn from_switches(switches: [SwitchSet; 4]) -> Result<Self> {
        let mut topologies = [Topology::Idle; 4];
        for p in PhaseId::ALL {
            topologies[p.index()] = switches[p.index()].topology().map_err(|reason| Error::SwitchSchedule {
                phase: p.name(),
                reason,
            })?;
        }
        Ok(Self { topologies })
    }

    /// Every phase served by the battery; the capacitor stays disconnected.
    pub fn battery_only() -> Self {
        Self::new([Topology::BatteryToLoad; 4])
    }

    pub fn topology(&self, phase: PhaseId) -> Topology {
        self.topologies[phase.index()]
    }

    pub fn with_topology(mut self, phase: PhaseId, topology: Topology) -> Self {
        self.topologies[phase.index()] = topology;
        self
    }

    pub fn switches(&self, phase: PhaseId) -> SwitchSet {
        self.topology(phase).switches()
    }

    pub fn topologies(&self) -> [Topology; 4] {
        self.topologies
    }
}

/// T1 from the capacitor, T2 and T4 from the battery, and T3 from the battery
/// while it recharges the capacitor.
///
/// T4 stays on the battery: a capacitor sized for T1 alone cannot also carry
/// T4 and then enter the next T1 above the floor.
pub fn default_switch_schedule(_schedule: &PhaseSchedule) -> SwitchSchedule {
    SwitchSchedule::new([
        Topology::ScToLoad,
        Topology::BatteryToLoad,
        Topology::BatteryRechargesSc,
        Topology::BatteryToLoad,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Requested step, seconds. Each phase uses the largest step not above
    /// this that divides it evenly.
    pub dt: f64,
    pub cycles: usize,
    /// Capacitor voltage at `t = 0`; defaults to `v_max`.
    pub initial_v_sc: Option<f64>,
    /// Brown-out threshold while the capacitor feeds the load.
    pub floor: f64,
    /// Constant-power charging source on the capacitor, watts. Zero disables it.
    pub harvest_power: f64,
    pub record_waveform: bool,
}

impl SimConfig {
    pub fn new(dt: f64, cycles: usize) -> Self {
        Self {
            dt,
            cycles,
            initial_v_sc: None,
            floor: TRANSCEIVER_FLOOR_V,
            harvest_power: 0.0,
            record_waveform: true,
        }
    }

    pub fn without_waveform(mut self) -> Self {
        self.record_waveform = false;
        self
    }
}

/// Energy flows, joules.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    /// Battery EMF output plus harvested energy.
    pub source: f64,
    pub load: f64,
    pub dissipated: f64,
    /// Change in capacitor energy.
    pub stored_delta: f64,
}

impl EnergyLedger {
    pub fn imbalance(&self) -> f64 {
        self.source - (self.load + self.dissipated + self.stored_delta)
    }

    fn relative_change(&self, other: &EnergyLedger) -> f64 {
        let scale = self.source.abs().max(other.source.abs()).max(f64::MIN_POSITIVE);
        [
            self.source - other.source,
            self.load - other.load,
            self.dissipated - other.dissipated,
            self.stored_delta - other.stored_delta,
        ]
        .iter()
        .fold(0.0_f64, |m, d| m.max(d.abs()))
            / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleSummary {
    pub ledger: EnergyLedger,
    pub phase_load_energy: [f64; 4],
    pub v_sc_start: f64,
    pub v_sc_end: f64,
    pub v_sc_min: f64,
    pub v_sc_max: f64,
    pub peak_battery_current: f64,
}

/// Step layout of a run; two results share a grid when these are equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub cycle_duration: f64,
    pub cycles: usize,
    pub steps_per_phase: [usize; 4],
    pub step_per_phase: [f64; 4],
}

impl TimeGrid {
    pub fn points(&self) -> usize {
        1 + self.cycles * self.steps_per_phase.iter().sum::<usize>()
    }

    pub fn duration(&self) -> f64 {
        self.cycle_duration * self.cycles as f64
    }
}

/// Sampled waveforms, one entry per step end plus the initial point. Each
/// sample carries the operating point of the step that ends there.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Waveform {
    pub t: Vec<f64>,
    pub v_sc: Vec<f64>,
    pub i_batt: Vec<f64>,
    /// Capacitor current, positive when discharging.
    pub i_sc: Vec<f64>,
    pub i_load: Vec<f64>,
    pub p_load: Vec<f64>,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn push(&mut self, t: f64, v: f64, op: &OperatingPoint) {
        self.t.push(t);
        self.v_sc.push(v);
        self.i_batt.push(op.i_batt);
        self.i_sc.push(op.i_sc);
        self.i_load.push(op.i_load);
        self.p_load.push(op.p_load);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub grid: TimeGrid,
    /// Empty unless [`SimConfig::record_waveform`] was set.
    pub waveform: Waveform,
    pub ledger: EnergyLedger,
    pub cycles: Vec<CycleSummary>,
    /// First cycle whose ledger matches the previous one within
    /// [`STEADY_STATE_TOLERANCE`].
    pub steady_state_cycle: Option<usize>,
    pub v_sc_initial: f64,
    pub v_sc_final: f64,
    pub v_sc_min: f64,
    pub v_sc_max: f64,
    pub peak_battery_current: f64,
    /// Time integral of the battery current, coulombs.
    pub battery_charge: f64,
    /// Time integral of the squared battery current, A²·s.
    pub battery_current_sq_integral: f64,
    /// Simulated time actually covered, seconds.
    pub elapsed: f64,
}

impl SimulationResult {
    /// Standard deviation of the battery current about its time average.
    pub fn battery_ripple_rms(&self) -> f64 {
        if self.elapsed <= 0.0 {
            return 0.0;
        }
        let mean = self.battery_charge / self.elapsed;
        (self.battery_current_sq_integral / self.elapsed - mean * mean)
            .max(0.0)
            .sqrt()
    }

    /// Load energy per phase for cycle `k`.
    pub fn phase_load_energy(&self, k: usize) -> Option<[f64; 4]> {
        self.cycles.get(k).map(|c| c.phase_load_energy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct OperatingPoint {
    i_batt: f64,
    i_sc: f64,
    i_load: f64,
    p_load: f64,
    p_source: f64,
    p_diss: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulators {
    source: Kahan,
    load: Kahan,
    dissipated: Kahan,
    charge: Kahan,
    charge_sq: Kahan,
    phase_load: [Kahan; 4],
}

impl Accumulators {
    fn add_step(&mut self, phase: PhaseId, h: f64, a: &OperatingPoint, b: &OperatingPoint) {
        let half = 0.5 * h;
        self.source.add(half * (a.p_source + b.p_source));
        let load = half * (a.p_load + b.p_load);
        self.load.add(load);
        self.phase_load[phase.index()].add(load);
        self.dissipated.add(half * (a.p_diss + b.p_diss));
        self.charge.add(half * (a.i_batt + b.i_batt));
        self.charge_sq.add(half * (a.i_batt * a.i_batt + b.i_batt * b.i_batt));
    }
}

/// Electrical parameters seen by the solver.
#[derive(Debug, Clone, Copy)]
struct Circuit {
    battery: BatterySpec,
    sc: SupercapSpec,
    sw: SwitchSpec,
    harvest: f64,
}

/// Load current from a Thevenin source, or `None` if a constant-power load
/// cannot be supplied.
fn load_current(v_th: f64, r_th: f64, load: PhaseLoad) -> Option<f64> {
    match load {
        PhaseLoad::Power(p) => {
            if p == 0.0 {
                return Some(0.0);
            }
            let disc = v_th * v_th - 4.0 * p * r_th;
            if v_th <= 0.0 || disc < 0.0 {
                return None;
            }
            Some(2.0 * p / (v_th + disc.sqrt()))
        }
        PhaseLoad::Resistance(r) => {
            if r.is_infinite() {
                Some(0.0)
            } else {
                Some(v_th / (r_th + r))
            }
        }
    }
}

impl Circuit {
    /// Algebraic solve of the network at capacitor voltage `v`. With
    /// `charge_open` the recharge branch and the harvester are disconnected.
    fn solve(&self, topology: Topology, v: f64, load: PhaseLoad, charge_open: bool) -> Option<OperatingPoint> {
        let v_b = self.battery.v_oc;
        let r_ib = self.battery.r_ib;
        let r_on = self.sw.r_on;
        let r_s = self.sc.esr + r_on;
        let mut op = match topology {
            Topology::ScToLoad => {
                let r_th = self.sc.esr + r_on;
                let i = load_current(v, r_th, load)?;
                OperatingPoint {
                    i_sc: i,
                    i_load: i,
                    p_load: (v - i * r_th) * i,
                    p_diss: i * i * r_th,
                    ..Default::default()
                }
            }
            Topology::BatteryRechargesSc if !charge_open => {
                let g = 1.0 / r_ib + 1.0 / r_s;
                let r_b = 1.0 / g;
                let v_b0 = (v_b / r_ib + v / r_s) * r_b;
                let i = load_current(v_b0, r_b + r_on, load)?;
                let v_node = v_b0 - r_b * i;
                let i_batt = (v_b - v_node) / r_ib;
                let i_chg = (v_node - v) / r_s;
                OperatingPoint {
                    i_batt,
                    i_sc: -i_chg,
                    i_load: i,
                    p_load: (v_node - i * r_on) * i,
                    p_source: v_b * i_batt,
                    p_diss: i_batt * i_batt * r_ib + i_chg * i_chg * r_s + i * i * r_on,
                }
            }
            Topology::BatteryToLoad | Topology::BatteryRechargesSc => {
                let r_th = r_ib + r_on;
                let i = load_current(v_b, r_th, load)?;
                OperatingPoint {
                    i_batt: i,
                    i_load: i,
                    p_load: (v_b - i * r_th) * i,
                    p_source: v_b * i,
                    p_diss: i * i * r_th,
                    ..Default::default()
                }
            }
            Topology::Idle => {
                if !load.is_zero() {
                    return None;
                }
                OperatingPoint::default()
            }
        };
        if self.harvest > 0.0 && !charge_open && v > 0.0 {
            op.i_sc -= self.harvest / v;
            op.p_source += self.harvest;
        }
        Some(op)
    }

    fn slope(&self, op: &OperatingPoint) -> f64 {
        -op.i_sc / self.sc.capacitance
    }
}

struct StepOutcome {
    v: f64,
    start: OperatingPoint,
    end: OperatingPoint,
}

/// One Heun step of size `h`; `None` on supply collapse.
fn heun(
    c: &Circuit,
    topology: Topology,
    v: f64,
    loads: (PhaseLoad, PhaseLoad),
    charge_open: bool,
    h: f64,
) -> Option<StepOutcome> {
    let start = c.solve(topology, v, loads.0, charge_open)?;
    let k0 = c.slope(&start);
    let pred = c.solve(topology, v + h * k0, loads.1, charge_open)?;
    let k1 = c.slope(&pred);
    let v1 = v + 0.5 * h * (k0 + k1);
    let end = c.solve(topology, v1, loads.1, charge_open)?;
    Some(StepOutcome { v: v1, start, end })
}

struct Runner<'a> {
    c: Circuit,
    load: &'a LoadProfile,
    switches: &'a SwitchSchedule,
    acc: Accumulators,
    cycle_acc: Accumulators,
    v: f64,
    v_min: f64,
    v_max: f64,
    cycle_v_min: f64,
    cycle_v_max: f64,
    peak: f64,
    cycle_peak: f64,
    waveform: Waveform,
    elapsed: f64,
}

impl Runner<'_> {
    fn note(&mut self, v: f64, op: &OperatingPoint) {
        self.v_min = self.v_min.min(v);
        self.v_max = self.v_max.max(v);
        self.cycle_v_min = self.cycle_v_min.min(v);
        self.cycle_v_max = self.cycle_v_max.max(v);
        self.peak = self.peak.max(op.i_batt);
        self.cycle_peak = self.cycle_peak.max(op.i_batt);
    }

    fn account(&mut self, phase: PhaseId, h: f64, a: &OperatingPoint, b: &OperatingPoint) {
        self.acc.add_step(phase, h, a, b);
        self.cycle_acc.add_step(phase, h, a, b);
    }

    /// Advances one grid step, splitting it where the capacitor reaches
    /// `v_max`. Returns the operating point at the step end, or the time of
    /// collapse.
    fn step(&mut self, phase: PhaseId, t_cycle: f64, h: f64) -> std::result::Result<OperatingPoint, f64> {
        let topology = self.switches.topology(phase);
        let v_cap = self.c.sc.v_max;
        let loads = (self.load.at(phase, t_cycle), self.load.at(phase, t_cycle + h));
        let open = self.v >= v_cap;
        let out = heun(&self.c, topology, self.v, loads, open, h).ok_or(t_cycle)?;
        if open || out.v <= v_cap {
            self.account(phase, h, &out.start, &out.end);
            self.v = out.v.max(0.0);
            self.note(self.v, &out.end);
            return Ok(out.end);
        }

        // Bisect for the sub-step that lands on v_max.
        let (mut lo, mut hi) = (0.0, h);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let probe = heun(&self.c, topology, self.v, loads, false, mid).ok_or(t_cycle)?;
            if probe.v > v_cap {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let s = hi;
        let first = heun(
            &self.c,
            topology,
            self.v,
            (loads.0, self.load.at(phase, t_cycle + s)),
            false,
            s,
        )
        .ok_or(t_cycle)?;
        let end_closed = self
            .c
            .solve(topology, v_cap, self.load.at(phase, t_cycle + s), false)
            .ok_or(t_cycle + s)?;
        self.account(phase, s, &first.start, &end_closed);
        self.v = v_cap;
        self.note(v_cap, &end_closed);
        let rest = h - s;
        if rest <= 0.0 {
            return Ok(end_closed);
        }
        let second = heun(
            &self.c,
            topology,
            v_cap,
            (self.load.at(phase, t_cycle + s), loads.1),
            true,
            rest,
        )
        .ok_or(t_cycle + s)?;
        self.account(phase, rest, &second.start, &second.end);
        self.v = second.v;
        self.note(self.v, &second.end);
        Ok(second.end)
    }
}

fn validate(load: &LoadProfile, switches: &SwitchSchedule, cfg: &SimConfig, sc: &SupercapSpec) -> Result<()> {
    ensure_positive("dt", cfg.dt)?;
    if cfg.cycles == 0 {
        return Err(Error::domain("cycles", 0.0, "must be >= 1"));
    }
    ensure_non_negative("harvest_power", cfg.harvest_power)?;
    ensure_non_negative("floor", cfg.floor)?;
    let max = load.schedule().min_phase_duration() / 10.0;
    if cfg.dt > max * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt: cfg.dt, max });
    }
    if let Some(v0) = cfg.initial_v_sc {
        if !(v0.is_finite() && (0.0..=sc.v_max).contains(&v0)) {
            return Err(Error::domain(
                "initial_v_sc",
                v0,
                format!("must lie in [0, {}] V", sc.v_max),
            ));
        }
    }
    for p in load.schedule().active_phases() {
        if switches.topology(p) == Topology::Idle && !load.phase_is_unloaded(p) {
            return Err(Error::SwitchSchedule {
                phase: p.name(),
                reason: "no source path to a loaded phase".into(),
            });
        }
    }
    Ok(())
}

/// Simulates `cfg.cycles` repetitions of the load profile on the designed
/// supply.
///
/// Fails with [`Error::BrownOut`] when the capacitor drops below `cfg.floor`
/// while feeding the load, or when a constant-power load exceeds what its
/// source can deliver. The error carries the run up to that instant.
pub fn run_cycle(
    design: &HessDesign,
    load: &LoadProfile,
    switches: &SwitchSchedule,
    cfg: &SimConfig,
) -> Result<SimulationResult> {
    run_on(&design.battery, &design.supercap, &design.switch, load, switches, cfg)
}

/// [`run_cycle`] on explicit components.
pub fn run_on(
    battery: &BatterySpec,
    sc: &SupercapSpec,
    sw: &SwitchSpec,
    load: &LoadProfile,
    switches: &SwitchSchedule,
    cfg: &SimConfig,
) -> Result<SimulationResult> {
    validate(load, switches, cfg, sc)?;
    let schedule = load.schedule();
    let mut steps_per_phase = [0usize; 4];
    let mut step_per_phase = [0.0; 4];
    for p in schedule.active_phases() {
        let d = schedule.duration(p);
        let n = ((d / cfg.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        steps_per_phase[p.index()] = n;
        step_per_phase[p.index()] = d / n as f64;
    }
    let grid = TimeGrid {
        cycle_duration: schedule.cycle_duration(),
        cycles: cfg.cycles,
        steps_per_phase,
        step_per_phase,
    };

    let v0 = cfg.initial_v_sc.unwrap_or(sc.v_max);
    let circuit = Circuit {
        battery: *battery,
        sc: *sc,
        sw: *sw,
        harvest: cfg.harvest_power,
    };
    let mut r = Runner {
        c: circuit,
        load,
        switches,
        acc: Accumulators::default(),
        cycle_acc: Accumulators::default(),
        v: v0,
        v_min: v0,
        v_max: v0,
        cycle_v_min: v0,
        cycle_v_max: v0,
        peak: 0.0,
        cycle_peak: 0.0,
        waveform: Waveform::default(),
        elapsed: 0.0,
    };

    let first_phase = schedule.active_phases().next().unwrap_or(PhaseId::T1);
    let op0 = circuit
        .solve(
            switches.topology(first_phase),
            v0,
            load.at(first_phase, 0.0),
            v0 >= sc.v_max,
        )
        .unwrap_or_default();
    r.note(v0, &op0);
    if cfg.record_waveform {
        r.waveform.reserve(grid.points());
        r.waveform.push(0.0, v0, &op0);
    }

    let mut cycles = Vec::with_capacity(cfg.cycles);
    let mut steady_state_cycle = None;
    let period = schedule.cycle_duration();
    for k in 0..cfg.cycles {
        let t0 = k as f64 * period;
        let v_cycle_start = r.v;
        r.cycle_acc = Accumulators::default();
        r.cycle_v_min = r.v;
        r.cycle_v_max = r.v;
        r.cycle_peak = 0.0;
        for p in schedule.active_phases() {
            let (a, _) = schedule.interval(p);
            let n = steps_per_phase[p.index()];
            let h = step_per_phase[p.index()];
            let sc_sourced = switches.topology(p) == Topology::ScToLoad;
            for j in 0..n {
                let t_local = a + j as f64 * h;
                let t_end = t0 + a + (j + 1) as f64 * h;
                let end = match r.step(p, t_local, h) {
                    Ok(op) => op,
                    Err(t_fail) => {
                        let time = t0 + t_fail;
                        return Err(brown_out(r, cycles, grid, v0, steady_state_cycle, time, cfg.floor));
                    }
                };
                r.elapsed = t_end;
                if cfg.record_waveform {
                    r.waveform.push(t_end, r.v, &end);
                }
                if sc_sourced && r.v < cfg.floor {
                    return Err(brown_out(r, cycles, grid, v0, steady_state_cycle, t_end, cfg.floor));
                }
            }
        }
        let c = sc.capacitance;
        let summary = CycleSummary {
            ledger: EnergyLedger {
                source: r.cycle_acc.source.sum,
                load: r.cycle_acc.load.sum,
                dissipated: r.cycle_acc.dissipated.sum,
                stored_delta: 0.5 * c * (r.v * r.v - v_cycle_start * v_cycle_start),
            },
            phase_load_energy: r.cycle_acc.phase_load.map(|k| k.sum),
            v_sc_start: v_cycle_start,
            v_sc_end: r.v,
            v_sc_min: r.cycle_v_min,
            v_sc_max: r.cycle_v_max,
            peak_battery_current: r.cycle_peak,
        };
        if steady_state_cycle.is_none() {
            if let Some(prev) = cycles.last() {
                let prev: &CycleSummary = prev;
                if summary.ledger.relative_change(&prev.ledger) < STEADY_STATE_TOLERANCE {
                    steady_state_cycle = Some(k);
                }
            }
        }
        cycles.push(summary);
    }
    Ok(finish(r, cycles, grid, v0, steady_state_cycle))
}

fn finish(
    r: Runner<'_>,
    cycles: Vec<CycleSummary>,
    grid: TimeGrid,
    v0: f64,
    steady_state_cycle: Option<usize>,
) -> SimulationResult {
    let c = r.c.sc.capacitance;
    SimulationResult {
        grid,
        ledger: EnergyLedger {
            source: r.acc.source.sum,
            load: r.acc.load.sum,
            dissipated: r.acc.dissipated.sum,
            stored_delta: 0.5 * c * (r.v * r.v - v0 * v0),
        },
        cycles,
        steady_state_cycle,
        v_sc_initial: v0,
        v_sc_final: r.v,
        v_sc_min: r.v_min,
        v_sc_max: r.v_max,
        peak_battery_current: r.peak,
        battery_charge: r.acc.charge.sum,
        battery_current_sq_integral: r.acc.charge_sq.sum,
        elapsed: r.elapsed,
        waveform: r.waveform,
    }
}

fn brown_out(
    r: Runner<'_>,
    cycles: Vec<CycleSummary>,
    grid: TimeGrid,
    v0: f64,
    steady: Option<usize>,
    time: f64,
    floor: f64,
) -> Error {
    let voltage = r.v;
    Error::BrownOut {
        time,
        voltage,
        floor,
        partial: Box::new(finish(r, cycles, grid, v0, steady)),
    }
}

impl Waveform {
    fn reserve(&mut self, n: usize) {
        for v in [
            &mut self.t,
            &mut self.v_sc,
            &mut self.i_batt,
            &mut self.i_sc,
            &mut self.i_load,
            &mut self.p_load,
        ] {
            v.reserve(n);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressMetrics {
    pub peak_current: f64,
    pub ripple_rms: f64,
    pub baseline_peak_current: f64,
    pub baseline_ripple_rms: f64,
    pub peak_ratio: f64,
    pub ripple_ratio: f64,
}

fn ratio(value: f64, baseline: f64) -> f64 {
    if value == 0.0 {
        0.0
    } else {
        value / baseline
    }
}

/// Peak and RMS ripple of the battery current, and their ratios to a baseline
/// run on the same grid.
pub fn battery_stress(result: &SimulationResult, baseline: &SimulationResult) -> Result<StressMetrics> {
    if result.grid != baseline.grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", result.grid, baseline.grid)));
    }
    if result.elapsed != baseline.elapsed {
        return Err(Error::GridMismatch(format!(
            "covered {} s vs {} s",
            result.elapsed, baseline.elapsed
        )));
    }
    let peak = result.peak_battery_current;
    let ripple = result.battery_ripple_rms();
    let b_peak = baseline.peak_battery_current;
    let b_ripple = baseline.battery_ripple_rms();
    Ok(StressMetrics {
        peak_current: peak,
        ripple_rms: ripple,
        baseline_peak_current: b_peak,
        baseline_ripple_rms: b_ripple,
        peak_ratio: ratio(peak, b_peak),
        ripple_ratio: ratio(ripple, b_ripple),
    })
}

/// `|E_source − (E_load + E_dissipated + ΔE_stored)| / max(E_source, ε)`.
pub fn energy_balance(result: &SimulationResult) -> f64 {
    let l = &result.ledger;
    l.imbalance().abs() / l.source.abs().max(f64::EPSILON)
}
