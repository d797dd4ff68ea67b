//! CSV readers and writers for traces, reports, waveforms and field maps.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::rf::FieldMap;
use crate::sim::{energy_balance, SimulationResult};
use crate::traces::{CurrentTrace, SenseConfig};

pub const TRACE_HEADER: [&str; 2] = ["index", "voltage_v"];
pub const METRIC_HEADER: [&str; 3] = ["metric", "value", "unit"];
pub const WAVEFORM_HEADER: [&str; 6] = ["t_s", "v_sc_v", "i_batt_a", "i_sc_a", "i_load_a", "p_load_w"];
pub const FIELD_MAP_HEADER: [&str; 4] = ["theta_rad", "phi_rad", "r_m", "p_dbm"];

fn parse_field(s: &str, line: u64, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("{what} '{}' is not a number", s.trim()),
    })
}

/// Reads sense-resistor voltages. Accepts `index,voltage_v` rows or a single
/// voltage column, an optional header row and `#` comment lines.
pub fn read_trace<R: Read>(reader: R, config: SenseConfig, label: &str) -> Result<CurrentTrace> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut samples = Vec::new();
    let mut columns = None;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(k as u64 + 1, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if samples.is_empty() && columns.is_none() && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            // Header row.
            columns = Some(rec.len());
            continue;
        }
        let expected = *columns.get_or_insert(rec.len());
        if rec.len() != expected || !(1..=2).contains(&rec.len()) {
            return Err(Error::Parse {
                line,
                message: format!("expected {expected} column(s), found {}", rec.len()),
            });
        }
        let v = parse_field(&rec[rec.len() - 1], line, "voltage")?;
        if !v.is_finite() || v < 0.0 || v >= config.v_supply() {
            return Err(Error::Parse {
                line,
                message: format!("voltage {v} outside [0, {}) V", config.v_supply()),
            });
        }
        samples.push(v);
    }
    CurrentTrace::new(samples, config, label)
}

pub fn write_trace<W: Write>(writer: W, trace: &CurrentTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for (i, v) in trace.samples().iter().enumerate() {
        w.write_record([i.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One report row.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: String,
    pub unit: String,
}

impl Metric {
    pub fn num(name: impl Into<String>, value: f64, unit: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: value.to_string(),
            unit: unit.into(),
        }
    }

    pub fn text(name: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: value.into(),
            unit: String::new(),
        }
    }
}

pub fn write_metrics<W: Write>(writer: W, metrics: &[Metric]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRIC_HEADER)?;
    for m in metrics {
        w.write_record([m.name.as_str(), m.value.as_str(), m.unit.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Waveform rows (every `every`-th sample, always including the last),
/// followed by the ledger as `#` comment lines.
pub fn write_waveform<W: Write>(mut writer: W, result: &SimulationResult, every: usize) -> Result<()> {
    let every = every.max(1);
    {
        let mut w = csv::Writer::from_writer(&mut writer);
        w.write_record(WAVEFORM_HEADER)?;
        let wf = &result.waveform;
        let n = wf.len();
        for k in 0..n {
            if k % every != 0 && k + 1 != n {
                continue;
            }
            w.write_record([
                wf.t[k].to_string(),
                wf.v_sc[k].to_string(),
                wf.i_batt[k].to_string(),
                wf.i_sc[k].to_string(),
                wf.i_load[k].to_string(),
                wf.p_load[k].to_string(),
            ])?;
        }
        w.flush()?;
    }
    write_ledger_comments(&mut writer, result)?;
    Ok(())
}

pub fn write_ledger_comments<W: Write>(mut w: W, result: &SimulationResult) -> Result<()> {
    let l = &result.ledger;
    writeln!(w, "# ledger source_j {}", l.source)?;
    writeln!(w, "# ledger load_j {}", l.load)?;
    writeln!(w, "# ledger dissipated_j {}", l.dissipated)?;
    writeln!(w, "# ledger stored_delta_j {}", l.stored_delta)?;
    writeln!(w, "# ledger imbalance_rel {}", energy_balance(result))?;
    Ok(())
}

pub fn write_field_map<W: Write>(writer: W, map: &FieldMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FIELD_MAP_HEADER)?;
    for p in &map.points {
        w.write_record([
            p.theta.to_string(),
            p.phi.to_string(),
            p.r.to_string(),
            p.p_dbm.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
