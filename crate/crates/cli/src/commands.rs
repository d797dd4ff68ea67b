use std::f64::consts::PI;
use std::fs::File;
use std::io::BufReader;

use hess_core::hess::{literal_recharge_voltage, Feasibility, SupercapSpec};
use hess_core::io::{read_trace, write_field_map, write_metrics, write_waveform, Metric};
use hess_core::rf::{
    calibrate, calibration_target, coexistence_lookup, field_map_at, AntennaKind, AntennaPattern, Interference,
    Scenario, CALIBRATION_DISTANCE, DEFAULT_FREQUENCY,
};
use hess_core::sim::{
    battery_stress, energy_balance, run_cycle, LoadProfile, SimConfig, SimulationResult, SwitchSchedule,
};
use hess_core::sizing::{design_hess, DesignRequest, HessDesign};
use hess_core::traces::{analyze_trace, AnalysisOptions, CommMode, SenseConfig, SpikeCleaning};
use hess_core::{Error, PhaseId};

use crate::config::RunConfig;
use crate::report::{emit, sig, Output};
use crate::{AnalyzeArgs, CoexistArgs, Failure, FieldmapArgs, SimulateArgs, SizeArgs};

fn metrics_csv(metrics: &[Metric]) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write_metrics(&mut buf, metrics).map_err(|e| Failure::Internal(e.to_string()))?;
    Ok(buf)
}

pub fn analyze(a: &AnalyzeArgs, stamp: bool) -> Result<(), Failure> {
    let cfg = SenseConfig::new(a.rsense, a.vs, a.fs)?;
    let mode: CommMode = a.mode.parse()?;
    let file =
        File::open(&a.trace).map_err(|e| Failure::Usage(format!("cannot open trace {}: {e}", a.trace.display())))?;
    let label = a
        .trace
        .file_name()
        .map_or("trace".into(), |n| n.to_string_lossy().into_owned());
    let trace = read_trace(BufReader::new(file), cfg, &label)
        .map_err(|e| Failure::Usage(format!("{}: {e}", a.trace.display())))?
        .with_mode(mode);
    let opts = AnalysisOptions {
        char_count: a.chars,
        spikes: a.clean_spikes.then(|| SpikeCleaning {
            threshold: a.spike_threshold_ma.map(|t| t * 1e-3),
            max_width: a.spike_max_width_us * 1e-6,
        }),
        level_tolerance: a.tolerance_v,
    };
    let r = analyze_trace(&trace, &opts)?;

    let mut m = vec![
        Metric::text("label", r.label.clone()),
        Metric::text("mode", r.mode.to_string()),
        Metric::num("samples", trace.len() as f64, ""),
        Metric::num("duration", trace.duration(), "s"),
        Metric::num("total_energy", r.total_energy, "J"),
    ];
    for (k, e) in &r.per_phase_energy {
        m.push(Metric::num(format!("energy_{k}"), *e, "J"));
    }
    if let Some(c) = r.char_count {
        m.push(Metric::num("chars", c as f64, ""));
    }
    if let Some(e) = r.energy_per_char {
        m.push(Metric::num("energy_per_char", e, "J"));
    }
    if a.clean_spikes {
        m.push(Metric::num("spike_count", r.spikes.spike_intervals.len() as f64, ""));
        m.push(Metric::num("spike_threshold", r.spikes.threshold_used, "A"));
        m.push(Metric::num("spike_peak_current", r.spikes.peak_current, "A"));
        m.push(Metric::num("spike_energy", r.spike_energy, "J"));
        m.push(Metric::num("energy_without_spikes", r.energy_without_spikes(), "J"));
        if let Some(e) = r.energy_per_char_without_spikes() {
            m.push(Metric::num("energy_per_char_without_spikes", e, "J"));
        }
    }

    let mut out = Output::new();
    out.line(format!(
        "trace {} ({} samples, {} s, mode {})",
        r.label,
        trace.len(),
        sig(trace.duration()),
        r.mode
    ));
    out.line(format!("total energy        {} uJ", sig(r.total_energy * 1e6)));
    for (k, e) in &r.per_phase_energy {
        out.line(format!("  {k:<17} {} uJ", sig(e * 1e6)));
    }
    if let Some(e) = r.energy_per_char {
        out.line(format!(
            "energy per char     {} uJ (session energy / chars)",
            sig(e * 1e6)
        ));
    }
    if a.clean_spikes {
        out.line(format!(
            "spikes              {} removed, threshold {} mA, peak {} mA",
            r.spikes.spike_intervals.len(),
            sig(r.spikes.threshold_used * 1e3),
            sig(r.spikes.peak_current * 1e3)
        ));
        out.line(format!("spike energy        {} uJ", sig(r.spike_energy * 1e6)));
        out.line(format!(
            "without spikes      {} uJ",
            sig(r.energy_without_spikes() * 1e6)
        ));
    }
    out.csv = metrics_csv(&m)?;
    emit(&out, a.out.as_deref(), stamp)
}

fn design_from(cfg: &RunConfig, paper_literal: bool) -> Result<(HessDesign, DesignRequest), Failure> {
    let req = DesignRequest {
        schedule: cfg.schedule()?,
        sense: cfg.sense()?,
        battery: cfg.battery()?,
        switch: cfg.switch()?,
        sc_esr: cfg.sc_esr(),
        constraints: cfg.constraints(paper_literal)?,
    };
    let design = design_hess(&req)?;
    Ok((design, req))
}

fn feasibility_lines(f: &Feasibility, out: &mut Output, m: &mut Vec<Metric>) {
    out.line(format!("verdict             {}", f.verdict()));
    m.push(Metric::text("verdict", f.verdict()));
    match *f {
        Feasibility::Sufficient { v_end, time_to_full } => {
            out.line(format!("  V_SC(t3)          {} V", sig(v_end)));
            out.line(format!("  time to v_max     {} us", sig(time_to_full * 1e6)));
            m.push(Metric::num("time_to_v_max", time_to_full, "s"));
        }
        Feasibility::Insufficient {
            achieved,
            min_window,
            max_loop_resistance,
            max_r_ib,
        } => {
            out.line(format!("  V_SC(t3) achieved {} V", sig(achieved)));
            m.push(Metric::num("v_sc_achieved", achieved, "V"));
            match min_window {
                Some(w) => {
                    out.line(format!("  option: lengthen [t2,t3] to {} us", sig(w * 1e6)));
                    m.push(Metric::num("required_window", w, "s"));
                }
                None => out.line("  option: none, battery voltage cannot reach v_max"),
            }
            if let Some(r) = max_loop_resistance {
                out.line(format!("  option: loop resistance <= {} ohm", sig(r)));
                m.push(Metric::num("max_loop_resistance", r, "ohm"));
            }
            match max_r_ib {
                Some(r) => {
                    out.line(format!("  option: battery R_IB <= {} ohm", sig(r)));
                    m.push(Metric::num("max_r_ib", r, "ohm"));
                }
                None => out.line("  option: no positive battery R_IB suffices with this ESR and switch"),
            }
        }
    }
}

pub fn size(a: &SizeArgs, stamp: bool) -> Result<(), Failure> {
    let cfg = RunConfig::load(&a.config)?;
    let (d, req) = design_from(&cfg, a.paper_literal)?;
    let mut m = Vec::new();
    let mut out = Output::new();
    out.line(format!("hybrid supply design ({})", a.config.display()));
    out.line(format!(
        "coefficient         {}",
        match d.constraints.coefficient {
            hess_core::sizing::Coefficient::Exact => "exact (2 / delivery_fraction)",
            hess_core::sizing::Coefficient::Literal => "rounded (1.33, 2.66)",
        }
    ));
    for p in &d.provenance {
        out.line(format!("{:<19} {} {}  [{}]", p.name, sig(p.value), p.unit, p.formula));
        m.push(Metric::num(p.name, p.value, p.unit));
    }
    let window = d.recharge_window.1 - d.recharge_window.0;
    let i_b0 = d.provenance_value("i_b_initial").unwrap_or(0.0);
    let literal_v = literal_recharge_voltage(
        d.constraints.v_min,
        d.loop_resistance(),
        d.supercap.capacitance,
        i_b0,
        window,
    );
    out.line(format!(
        "{:<19} {} (mixed units)  [v_start + i_B * window / (R_E * C)]",
        "v_sc_t3_literal",
        sig(literal_v)
    ));
    m.push(Metric::num("v_sc_t3_literal", literal_v, "mixed"));
    feasibility_lines(&d.feasibility, &mut out, &mut m);

    if !a.sweep_r_ib.is_empty() {
        out.line("sweep over battery R_IB:");
        let results: Vec<(f64, Result<HessDesign, Error>)> = std::thread::scope(|s| {
            let handles: Vec<_> = a
                .sweep_r_ib
                .iter()
                .map(|&r| {
                    let mut req = req.clone();
                    s.spawn(move || {
                        let b = req.battery;
                        let res = hess_core::BatterySpec::new(b.v_oc, r, b.v_soc0, b.v_soc100).and_then(|battery| {
                            req.battery = battery;
                            design_hess(&req)
                        });
                        (r, res)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("sweep worker")).collect()
        });
        for (r, res) in results {
            let d = res.map_err(|e| Failure::Usage(format!("--sweep-r-ib {r}: {e}")))?;
            out.line(format!(
                "  r_ib {} ohm: {} V_SC(t3) = {} V",
                sig(r),
                d.feasibility.verdict(),
                sig(d.feasibility.v_end())
            ));
            m.push(Metric::text(format!("sweep_r_ib_{r}_verdict"), d.feasibility.verdict()));
            m.push(Metric::num(
                format!("sweep_r_ib_{r}_v_sc_t3"),
                d.feasibility.v_end(),
                "V",
            ));
        }
    }
    out.csv = metrics_csv(&m)?;
    emit(&out, a.out.as_deref(), stamp)
}

struct RunOutcome {
    result: SimulationResult,
    brown_out: Option<(f64, f64)>,
}

fn run(design: &HessDesign, load: &LoadProfile, sw: &SwitchSchedule, cfg: &SimConfig) -> Result<RunOutcome, Failure> {
    match run_cycle(design, load, sw, cfg) {
        Ok(result) => Ok(RunOutcome {
            result,
            brown_out: None,
        }),
        Err(Error::BrownOut {
            time, voltage, partial, ..
        }) => Ok(RunOutcome {
            result: *partial,
            brown_out: Some((time, voltage)),
        }),
        Err(e) => Err(e.into()),
    }
}

fn waveform_csv(o: &RunOutcome, every: usize) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write_waveform(&mut buf, &o.result, every).map_err(|e| Failure::Internal(e.to_string()))?;
    if let Some((t, v)) = o.brown_out {
        buf.extend_from_slice(format!("# brown_out t_s {t} v_sc_v {v}\n").as_bytes());
    }
    Ok(buf)
}

fn ledger_lines(label: &str, o: &RunOutcome, out: &mut Output) {
    let r = &o.result;
    let l = &r.ledger;
    out.line(format!("{label}:"));
    match o.brown_out {
        Some((t, v)) => out.line(format!("  BROWN-OUT at t = {} us, v_sc = {} V", sig(t * 1e6), sig(v))),
        None => out.line(format!("  completed {} cycle(s)", r.cycles.len())),
    }
    out.line(format!("  source energy     {} uJ", sig(l.source * 1e6)));
    out.line(format!("  load energy       {} uJ", sig(l.load * 1e6)));
    out.line(format!("  dissipated        {} uJ", sig(l.dissipated * 1e6)));
    out.line(format!("  stored change     {} uJ", sig(l.stored_delta * 1e6)));
    out.line(format!("  imbalance         {:e}", energy_balance(r)));
    out.line(format!(
        "  v_sc range        {} .. {} V",
        sig(r.v_sc_min),
        sig(r.v_sc_max)
    ));
    out.line(format!("  peak battery      {} mA", sig(r.peak_battery_current * 1e3)));
    out.line(format!(
        "  battery ripple    {} mA rms",
        sig(r.battery_ripple_rms() * 1e3)
    ));
    match r.steady_state_cycle {
        Some(k) => out.line(format!("  steady state from cycle {}", k + 1)),
        None => out.line("  steady state not reached"),
    }
}

pub fn simulate(a: &SimulateArgs, stamp: bool) -> Result<(), Failure> {
    let cfg = RunConfig::load(&a.config)?;
    let (mut design, req) = design_from(&cfg, a.paper_literal)?;
    if let Some(c_uf) = cfg.supercap.c_uf {
        let sc = &design.supercap;
        design.supercap = SupercapSpec::new(c_uf * 1e-6, sc.esr, sc.v_min, sc.v_max)
            .map_err(|e| Failure::Usage(format!("supercap.c_uf: {e}")))?;
    }
    let load = LoadProfile::from_schedule(&req.schedule, &req.sense, cfg.load_model()?)?;
    let switches = cfg.switches(&req.schedule)?;
    let dt = a.dt.or(cfg.sim.dt_us.map(|x| x * 1e-6)).unwrap_or(0.1e-6);
    let cycles = a.cycles.or(cfg.sim.cycles).unwrap_or(10);
    let mut sim = SimConfig::new(dt, cycles);
    if let Some(p) = cfg.sim.harvest_mw {
        sim.harvest_power = p * 1e-3;
    }
    if let Some(f) = cfg.sim.floor_v {
        sim.floor = f;
    }

    let hybrid = run(&design, &load, &switches, &sim)?;
    let mut out = Output::new();
    out.line(format!(
        "simulation: C = {} uF, dt = {} us, {} cycle(s), load {}",
        sig(design.supercap.capacitance * 1e6),
        sig(dt * 1e6),
        cycles,
        load.model()
    ));
    let topo: Vec<String> = PhaseId::ALL
        .iter()
        .map(|p| format!("{p}={}", switches.topology(*p)))
        .collect();
    out.line(format!("switching: {}", topo.join(" ")));
    ledger_lines("hybrid", &hybrid, &mut out);
    if let Some(c) = hybrid.result.cycles.last() {
        let e = c.phase_load_energy;
        out.line(format!(
            "  last cycle load   T1 {} / T2 {} / T3 {} / T4 {} uJ",
            sig(e[0] * 1e6),
            sig(e[1] * 1e6),
            sig(e[2] * 1e6),
            sig(e[3] * 1e6)
        ));
    }
    out.csv = waveform_csv(&hybrid, a.every)?;

    if a.baseline {
        let base = run(&design, &load, &SwitchSchedule::battery_only(), &sim)?;
        ledger_lines("battery-only baseline", &base, &mut out);
        match battery_stress(&hybrid.result, &base.result) {
            Ok(s) => {
                out.line("battery stress (hybrid / baseline):");
                out.line(format!(
                    "  peak current      {} / {} mA, ratio {}",
                    sig(s.peak_current * 1e3),
                    sig(s.baseline_peak_current * 1e3),
                    sig(s.peak_ratio)
                ));
                out.line(format!(
                    "  ripple rms        {} / {} mA, ratio {}",
                    sig(s.ripple_rms * 1e3),
                    sig(s.baseline_ripple_rms * 1e3),
                    sig(s.ripple_ratio)
                ));
            }
            Err(e) => out.line(format!("battery stress unavailable: {e}")),
        }
        out.extra.push((".baseline.csv".into(), waveform_csv(&base, a.every)?));
    }
    emit(&out, a.out.as_deref(), stamp)
}

pub fn fieldmap(a: &FieldmapArgs, stamp: bool) -> Result<(), Failure> {
    let cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let rf = &cfg.rf;
    let target = match a.calibrate_to.as_deref().or(rf.calibrate_to.as_deref()) {
        Some(name) => Some(calibration_target(name)?),
        None => None,
    };
    let kind: AntennaKind = match a.antenna.as_deref().or(rf.antenna.as_deref()) {
        Some(k) => k.parse()?,
        None => target.map_or(AntennaKind::Isotropic, |t| t.kind),
    };
    let mut pattern = AntennaPattern::of_kind(kind);
    if let Some(g) = a.peak_gain_dbi.or(rf.peak_gain_dbi) {
        pattern.peak_gain_dbi = g;
    }
    if let Some(n) = a.shape_exponent.or(rf.shape_exponent) {
        pattern.shape_exponent = n;
    }
    if let Some(fl) = rf.floor_dbi {
        pattern.floor_dbi = fl;
    }
    let d = a.distance_m.or(rf.distance_m).unwrap_or(CALIBRATION_DISTANCE);
    let f = a.frequency_hz.or(rf.frequency_hz).unwrap_or(DEFAULT_FREQUENCY);
    let step = a.step_deg.or(rf.step_deg).unwrap_or(5.0) * PI / 180.0;
    let (pattern, p_tx) = match target {
        Some(t) => {
            let c = calibrate(&pattern, &t, d, f)?;
            (c.pattern, c.p_tx_dbm)
        }
        None => (pattern, a.p_tx_dbm.or(rf.p_tx_dbm).unwrap_or(0.0)),
    };
    let map = field_map_at(&pattern, p_tx, d, step, f)?;

    let mut out = Output::new();
    out.line(format!(
        "field map: {} antenna, peak {} dBi, exponent {}, floor {} dBi",
        pattern.kind,
        sig(pattern.peak_gain_dbi),
        sig(pattern.shape_exponent),
        sig(pattern.floor_dbi)
    ));
    if let Some(t) = target {
        out.line(format!("calibrated to {} ({} .. {} dBm)", t.name, t.max_dbm, t.min_dbm));
    }
    out.line(format!("p_tx {} dBm, r {} m, f {} Hz", sig(p_tx), sig(d), f));
    out.line(format!("grid {} x {} points", map.n_theta, map.n_phi));
    out.line(format!("max {} dBm", sig(map.max_dbm())));
    out.line(format!("min {} dBm", sig(map.min_dbm())));
    out.line(format!("spread {} dB", sig(map.spread_db())));
    let mut buf = Vec::new();
    write_field_map(&mut buf, &map).map_err(|e| Failure::Internal(e.to_string()))?;
    out.csv = buf;
    emit(&out, a.out.as_deref(), stamp)
}

pub fn coexist(a: &CoexistArgs, stamp: bool) -> Result<(), Failure> {
    let scenario: Scenario = a.scenario.parse()?;
    let interference: Interference = a.interference.parse()?;
    let r = coexistence_lookup(&a.transceiver, scenario, interference)?;
    let e = r.entry;
    let labels = [
        "indoor_range_same_floor",
        "indoor_range_between_floors",
        "throughput_loss_under_interference",
        "indoor_in_band_interference",
        "outdoor_range",
    ];
    let mut m = vec![Metric::text("transceiver", e.transceiver)];
    let mut out = Output::new();
    out.line(e.transceiver);
    for (label, cell) in labels.iter().zip(e.cells) {
        m.push(Metric::text(format!("table_{label}"), cell));
        out.line(format!("  {label:<36} {cell}"));
    }
    m.push(Metric::num("range_min", r.range.lo, "m"));
    m.push(Metric::num("range_max", r.range.hi, "m"));
    if let Some(lr) = r.range_long_range {
        m.push(Metric::num("range_long_range_min", lr.lo, "m"));
        m.push(Metric::num("range_long_range_max", lr.hi, "m"));
    }
    m.push(Metric::num("throughput_loss_min", r.throughput_loss.lo, "fraction"));
    m.push(Metric::num("throughput_loss_max", r.throughput_loss.hi, "fraction"));
    m.push(Metric::text("interference_class", r.interference_class.name()));
    out.line(format!("{} scenario, {} interference:", a.scenario, a.interference));
    out.line(format!("  range             {} m", r.range));
    if let Some(lr) = r.range_long_range {
        out.line(format!("  long-range antenna {lr} m"));
    }
    out.line(format!(
        "  throughput loss   {}-{} %",
        r.throughput_loss.lo * 100.0,
        r.throughput_loss.hi * 100.0
    ));
    out.line(format!("  interference      {}", r.interference_class));
    out.csv = metrics_csv(&m)?;
    emit(&out, a.out.as_deref(), stamp)
}
