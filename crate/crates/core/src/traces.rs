//! Sense-resistor trace analysis.
//!
//! A [`CurrentTrace`] stores the raw voltage measured across the series sense
//! resistor. Current, transceiver voltage and power are derived on demand, so
//! the stored record stays exactly what the acquisition produced.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{ensure_positive, Error, Result};
use crate::profiles::{PhaseId, PhaseSchedule};

/// Sense resistor used on the reference test bench, in ohms.
pub const BENCH_SENSE_RESISTANCE: f64 = 12.22;
/// Acquisition rate of the reference test bench, in samples per second.
pub const BENCH_SAMPLE_RATE: f64 = 250_000.0;

/// Spike threshold multiplier applied to the active-max phase current.
pub const DEFAULT_SPIKE_FACTOR: f64 = 1.2;
/// Widest excursion still treated as a spike, in seconds.
pub const DEFAULT_SPIKE_MAX_WIDTH: f64 = 50e-6;
/// Default tolerance for phase segmentation, in volts.
pub const DEFAULT_LEVEL_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenseConfig {
    r_sense: f64,
    v_supply: f64,
    sample_rate: f64,
}

impl SenseConfig {
    pub fn new(r_sense: f64, v_supply: f64, sample_rate: f64) -> Result<Self> {
        Ok(Self {
            r_sense: ensure_positive("r_sense", r_sense)?,
            v_supply: ensure_positive("v_supply", v_supply)?,
            sample_rate: ensure_positive("sample_rate", sample_rate)?,
        })
    }

    /// The reference bench: 12.22 Ω sense resistor sampled at 250 ksps.
    pub fn bench(v_supply: f64) -> Result<Self> {
        Self::new(BENCH_SENSE_RESISTANCE, v_supply, BENCH_SAMPLE_RATE)
    }

    pub fn r_sense(&self) -> f64 {
        self.r_sense
    }

    pub fn v_supply(&self) -> f64 {
        self.v_supply
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Sampling interval in seconds.
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    fn check_voltage(&self, v: f64) -> Result<()> {
        if v.is_finite() && v >= 0.0 && v < self.v_supply {
            Ok(())
        } else {
            Err(Error::domain(
                "sense voltage",
                v,
                format!("must satisfy 0 <= v < v_supply = {} V", self.v_supply),
            ))
        }
    }

    // Unchecked forms used on already-validated traces.
    fn current(&self, v: f64) -> f64 {
        v / self.r_sense
    }

    fn power(&self, v: f64) -> f64 {
        v * (self.v_supply - v) / self.r_sense
    }
}

/// Sense voltage to transceiver current: `i = v / R`.
pub fn current_from_voltage(v: f64, config: &SenseConfig) -> Result<f64> {
    config.check_voltage(v)?;
    Ok(config.current(v))
}

/// Voltage left across the transceiver, `V_s - v`.
pub fn transceiver_voltage(v: f64, config: &SenseConfig) -> Result<f64> {
    config.check_voltage(v)?;
    Ok(config.v_supply - v)
}

/// Power drawn by the transceiver: `i * (V_s - v) = v*V_s/R - v^2/R`.
pub fn transceiver_power(v: f64, config: &SenseConfig) -> Result<f64> {
    config.check_voltage(v)?;
    Ok(config.power(v))
}

/// Inverts [`transceiver_power`] on the physical branch `v <= V_s / 2`.
pub fn voltage_for_power(p: f64, config: &SenseConfig) -> Result<f64> {
    let vs = config.v_supply;
    let p_max = vs * vs / (4.0 * config.r_sense);
    if !(p.is_finite() && p >= 0.0 && p <= p_max) {
        return Err(Error::domain(
            "transceiver power",
            p,
            format!("must lie in [0, {p_max}] W for this sense configuration"),
        ));
    }
    // Rationalised root: stable for small p.
    let disc = (vs * vs - 4.0 * p * config.r_sense).max(0.0);
    Ok(2.0 * p * config.r_sense / (vs + disc.sqrt()))
}

/// Sense voltage produced by a given transceiver current.
pub fn voltage_for_current(i: f64, config: &SenseConfig) -> Result<f64> {
    let v = i * config.r_sense;
    config.check_voltage(v)?;
    Ok(v)
}

/// Communication pattern the trace was captured under. Labels only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CommMode {
    Echo,
    #[default]
    NoEcho,
}

impl fmt::Display for CommMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommMode::Echo => "echo",
            CommMode::NoEcho => "no-echo",
        })
    }
}

impl std::str::FromStr for CommMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "echo" => Ok(CommMode::Echo),
            "no-echo" | "no_echo" | "noecho" => Ok(CommMode::NoEcho),
            other => Err(Error::Unknown {
                kind: "mode",
                name: other.to_string(),
                known: vec!["echo", "no-echo"],
            }),
        }
    }
}

/// A uniformly sampled sense-voltage record.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentTrace {
    samples: Vec<f64>,
    config: SenseConfig,
    label: String,
    mode: CommMode,
}

impl CurrentTrace {
    pub fn new(samples: Vec<f64>, config: SenseConfig, label: impl Into<String>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::domain(
                "trace length",
                samples.len() as f64,
                "at least 2 samples are needed for one integration interval",
            ));
        }
        for &v in &samples {
            config.check_voltage(v)?;
        }
        Ok(Self {
            samples,
            config,
            label: label.into(),
            mode: CommMode::default(),
        })
    }

    pub fn with_mode(mut self, mode: CommMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn config(&self) -> &SenseConfig {
        &self.config
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mode(&self) -> CommMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time spanned by the samples, `(N - 1) * dt`.
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.config.dt()
    }

    pub fn currents(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|&v| self.config.current(v))
    }

    pub fn powers(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|&v| self.config.power(v))
    }

    fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            config: self.config,
            label: self.label.clone(),
            mode: self.mode,
        }
    }
}

/// Trapezoidal energy of a trace over its `N - 1` sampling intervals, in joules.
pub fn session_energy(trace: &CurrentTrace) -> f64 {
    let dt = trace.config.dt();
    let mut prev = trace.config.power(trace.samples[0]);
    let mut sum = 0.0;
    for &v in &trace.samples[1..] {
        let p = trace.config.power(v);
        sum += 0.5 * (prev + p);
        prev = p;
    }
    sum * dt
}

fn interval_energy(trace: &CurrentTrace, j: usize) -> f64 {
    let c = &trace.config;
    0.5 * (c.power(trace.samples[j]) + c.power(trace.samples[j + 1])) * c.dt()
}

/// Energy divided evenly over the transferred characters.
pub fn energy_per_char(energy: f64, char_count: u64) -> Result<f64> {
    if char_count == 0 {
        return Err(Error::domain("char_count", 0.0, "must be > 0"));
    }
    Ok(energy / char_count as f64)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpikeReport {
    /// Removed runs as half-open sample ranges `[start, end)`.
    pub spike_intervals: Vec<(usize, usize)>,
    /// Highest current found inside a removed run, amperes.
    pub peak_current: f64,
    pub threshold_used: f64,
}

impl SpikeReport {
    pub fn is_empty(&self) -> bool {
        self.spike_intervals.is_empty()
    }
}

/// Replaces short over-threshold runs by linear interpolation between the
/// samples that bracket them.
///
/// A run qualifies when every sample's current exceeds `threshold` and the run
/// spans at most `max_width` seconds (`samples * dt`). Runs touching one end of
/// the trace are flattened to the single available neighbour. A replaced
/// sample never carries more power than the original: above `V_s / 2` the
/// interpolated voltage is mirrored onto the equal-power branch.
pub fn clean_spikes(trace: &CurrentTrace, threshold: f64, max_width: f64) -> Result<(CurrentTrace, SpikeReport)> {
    ensure_positive("spike threshold", threshold)?;
    if !(max_width.is_finite() && max_width >= 0.0) {
        return Err(Error::domain("spike max width", max_width, "must be finite and >= 0"));
    }
    let cfg = trace.config;
    let dt = cfg.dt();
    let n = trace.samples.len();
    let mut out = trace.samples.clone();
    let mut report = SpikeReport {
        threshold_used: threshold,
        ..SpikeReport::default()
    };

    let mut k = 0;
    while k < n {
        if cfg.current(trace.samples[k]) <= threshold {
            k += 1;
            continue;
        }
        let start = k;
        while k < n && cfg.current(trace.samples[k]) > threshold {
            k += 1;
        }
        let end = k;
        let width = (end - start) as f64 * dt;
        if width > max_width * (1.0 + 1e-12) {
            continue;
        }
        let left = start.checked_sub(1).map(|j| trace.samples[j]);
        let right = (end < n).then(|| trace.samples[end]);
        let (a, b) = match (left, right) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (a, a),
            (None, Some(b)) => (b, b),
            (None, None) => continue,
        };
        let span = (end - start + 1) as f64;
        for (offset, j) in (start..end).enumerate() {
            let original = trace.samples[j];
            let frac = (offset + 1) as f64 / span;
            let mut v = a + (b - a) * frac;
            if cfg.power(v) > cfg.power(original) {
                v = cfg.v_supply - original;
            }
            out[j] = v;
            report.peak_current = report.peak_current.max(cfg.current(original));
        }
        report.spike_intervals.push((start, end));
    }
    Ok((trace.with_samples(out), report))
}

/// Spike threshold from the active-max phase current.
pub fn default_spike_threshold(active_max_current: f64) -> f64 {
    DEFAULT_SPIKE_FACTOR * active_max_current
}

/// Current of the highest level held longer than `max_width`.
///
/// Shorter runs are excursions, not phases. Falls back to the median current
/// when no run is long enough.
pub fn estimate_active_max_current(trace: &CurrentTrace, level_tolerance: f64, max_width: f64) -> f64 {
    let dt = trace.config.dt();
    let runs = detect_runs(&trace.samples, level_tolerance);
    let best = runs
        .iter()
        .filter(|r| (r.end - r.start) as f64 * dt > max_width)
        .map(|r| r.mean_voltage)
        .fold(f64::NEG_INFINITY, f64::max);
    let v = if best.is_finite() {
        best
    } else {
        let mut sorted = trace.samples.clone();
        sorted.sort_by(f64::total_cmp);
        sorted[sorted.len() / 2]
    };
    trace.config.current(v)
}

/// A maximal run of samples held near one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRun {
    /// First sample of the run.
    pub start: usize,
    /// One past the last sample.
    pub end: usize,
    pub mean_voltage: f64,
}

impl PhaseRun {
    fn len(&self) -> usize {
        self.end - self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentOptions {
    pub level_tolerance: f64,
    /// Runs shorter than this are folded into a neighbour.
    pub min_run_samples: usize,
}

impl SegmentOptions {
    pub fn new(level_tolerance: f64) -> Self {
        Self {
            level_tolerance,
            min_run_samples: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub runs: Vec<PhaseRun>,
    /// Present when exactly four phases were found.
    pub schedule: Option<PhaseSchedule>,
}

/// Splits a trace into constant-level phases.
pub fn segment_phases(trace: &CurrentTrace, level_tolerance: f64) -> Result<Segmentation> {
    segment_phases_with(trace, SegmentOptions::new(level_tolerance))
}

pub fn segment_phases_with(trace: &CurrentTrace, opts: SegmentOptions) -> Result<Segmentation> {
    let tol = ensure_positive("level tolerance", opts.level_tolerance)?;
    let samples = &trace.samples;
    let mut runs = detect_runs(samples, tol);
    absorb_short_runs(&mut runs, opts.min_run_samples.max(1));
    merge_close_runs(&mut runs, tol);

    let distinct = count_distinct_levels(&runs, tol);
    if distinct < 2 {
        return Err(Error::Unsegmentable {
            distinct_levels: distinct,
            histogram: level_histogram(samples, tol),
        });
    }

    let schedule = if runs.len() == 4 {
        let dt = trace.config.dt();
        let edge = |r: &PhaseRun| (r.start as f64 - 0.5) * dt;
        let boundaries = [
            edge(&runs[1]),
            edge(&runs[2]),
            edge(&runs[3]),
            samples.len() as f64 * dt,
        ];
        let levels = [
            runs[0].mean_voltage,
            runs[1].mean_voltage,
            runs[2].mean_voltage,
            runs[3].mean_voltage,
        ];
        Some(PhaseSchedule::new(boundaries, levels, None)?)
    } else {
        None
    };
    Ok(Segmentation { runs, schedule })
}

fn detect_runs(samples: &[f64], tol: f64) -> Vec<PhaseRun> {
    let mut runs = Vec::new();
    let mut start = 0;
    let mut sum = samples[0];
    for (k, &v) in samples.iter().enumerate().skip(1) {
        let mean = sum / (k - start) as f64;
        if (v - mean).abs() <= tol {
            sum += v;
        } else {
            runs.push(PhaseRun {
                start,
                end: k,
                mean_voltage: mean,
            });
            start = k;
            sum = v;
        }
    }
    runs.push(PhaseRun {
        start,
        end: samples.len(),
        mean_voltage: sum / (samples.len() - start) as f64,
    });
    runs
}

fn join(a: PhaseRun, b: PhaseRun) -> PhaseRun {
    let (la, lb) = (a.len() as f64, b.len() as f64);
    PhaseRun {
        start: a.start.min(b.start),
        end: a.end.max(b.end),
        mean_voltage: (a.mean_voltage * la + b.mean_voltage * lb) / (la + lb),
    }
}

fn absorb_short_runs(runs: &mut Vec<PhaseRun>, min_len: usize) {
    while runs.len() > 1 {
        let Some(i) = runs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.len() < min_len)
            .min_by_key(|(_, r)| r.len())
            .map(|(i, _)| i)
        else {
            break;
        };
        let short = runs[i];
        let target = match (i.checked_sub(1), (i + 1 < runs.len()).then_some(i + 1)) {
            (Some(l), Some(r)) => {
                let dl = (runs[l].mean_voltage - short.mean_voltage).abs();
                let dr = (runs[r].mean_voltage - short.mean_voltage).abs();
                if dl <= dr {
                    l
                } else {
                    r
                }
            }
            (Some(l), None) => l,
            (None, Some(r)) => r,
            (None, None) => break,
        };
        // Keep the neighbour's level; the short run only lends its samples.
        let host = runs[target];
        runs[target] = PhaseRun {
            start: host.start.min(short.start),
            end: host.end.max(short.end),
            mean_voltage: host.mean_voltage,
        };
        runs.remove(i);
    }
}

fn merge_close_runs(runs: &mut Vec<PhaseRun>, tol: f64) {
    let mut i = 0;
    while i + 1 < runs.len() {
        if (runs[i].mean_voltage - runs[i + 1].mean_voltage).abs() <= tol {
            runs[i] = join(runs[i], runs[i + 1]);
            runs.remove(i + 1);
        } else {
            i += 1;
        }
    }
}

fn count_distinct_levels(runs: &[PhaseRun], tol: f64) -> usize {
    let mut means: Vec<f64> = runs.iter().map(|r| r.mean_voltage).collect();
    means.sort_by(f64::total_cmp);
    let mut count = 0;
    let mut last = f64::NEG_INFINITY;
    for m in means {
        if m - last > tol {
            count += 1;
            last = m;
        }
    }
    count
}

fn level_histogram(samples: &[f64], bin: f64) -> Vec<(f64, usize)> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &v in samples {
        *counts.entry((v / bin).floor() as i64).or_default() += 1;
    }
    counts.into_iter().map(|(k, c)| ((k as f64 + 0.5) * bin, c)).collect()
}

/// How spikes are treated when building an [`EnergyReport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeCleaning {
    /// Current threshold in amperes; `None` uses [`DEFAULT_SPIKE_FACTOR`] times
    /// the estimated active-max current.
    pub threshold: Option<f64>,
    pub max_width: f64,
}

impl Default for SpikeCleaning {
    fn default() -> Self {
        Self {
            threshold: None,
            max_width: DEFAULT_SPIKE_MAX_WIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub char_count: Option<u64>,
    pub spikes: Option<SpikeCleaning>,
    pub level_tolerance: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            char_count: None,
            spikes: None,
            level_tolerance: DEFAULT_LEVEL_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// Raw trapezoidal energy, spikes included.
    pub total_energy: f64,
    /// Keyed `T1..T4` for a four-phase trace, `P1..Pn` otherwise, `all` when
    /// the trace holds a single level.
    pub per_phase_energy: BTreeMap<String, f64>,
    /// `total_energy / char_count`.
    pub energy_per_char: Option<f64>,
    /// Raw minus cleaned energy; zero unless cleaning was requested.
    pub spike_energy: f64,
    pub spikes: SpikeReport,
    pub mode: CommMode,
    pub char_count: Option<u64>,
    pub label: String,
}

impl EnergyReport {
    pub fn energy_without_spikes(&self) -> f64 {
        self.total_energy - self.spike_energy
    }

    pub fn energy_per_char_without_spikes(&self) -> Option<f64> {
        self.char_count.map(|c| self.energy_without_spikes() / c as f64)
    }
}

/// Full trace analysis: session energy, optional spike accounting, per-phase
/// split and per-character energy.
pub fn analyze_trace(trace: &CurrentTrace, opts: &AnalysisOptions) -> Result<EnergyReport> {
    let total_energy = session_energy(trace);
    let energy_per_char = opts.char_count.map(|c| energy_per_char(total_energy, c)).transpose()?;

    let (spike_energy, spikes, segment_source) = match opts.spikes {
        Some(sc) => {
            let threshold = match sc.threshold {
                Some(t) => t,
                None => default_spike_threshold(estimate_active_max_current(trace, opts.level_tolerance, sc.max_width)),
            };
            let (cleaned, report) = clean_spikes(trace, threshold, sc.max_width)?;
            let spike_energy = (total_energy - session_energy(&cleaned)).max(0.0);
            (spike_energy, report, cleaned)
        }
        None => (0.0, SpikeReport::default(), trace.clone()),
    };

    let mut per_phase_energy = BTreeMap::new();
    match segment_phases(&segment_source, opts.level_tolerance) {
        Ok(seg) => {
            let four = seg.schedule.is_some();
            for (idx, run) in seg.runs.iter().enumerate() {
                let last = (run.end).min(trace.len() - 1);
                let e: f64 = (run.start..last).map(|j| interval_energy(trace, j)).sum();
                let key = if four {
                    PhaseId::ALL[idx].to_string()
                } else {
                    format!("P{}", idx + 1)
                };
                per_phase_energy.insert(key, e);
            }
        }
        Err(Error::Unsegmentable { .. }) => {
            per_phase_energy.insert("all".to_string(), total_energy);
        }
        Err(e) => return Err(e),
    }

    Ok(EnergyReport {
        total_energy,
        per_phase_energy,
        energy_per_char,
        spike_energy,
        spikes,
        mode: trace.mode,
        char_count: opts.char_count,
        label: trace.label.clone(),
    })
}
