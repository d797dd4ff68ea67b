use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hess_bench::{hc05_design, hc05_load, hc05_request, hc05_trace};
use hess_core::profiles::hc05_schedule;
use hess_core::rf::{calibrate, field_map, AntennaPattern, CALIBRATION_DISTANCE, DEFAULT_FREQUENCY, HC05_MEASURED};
use hess_core::traces::{analyze_trace, clean_spikes, AnalysisOptions};
use hess_core::{default_switch_schedule, design_hess, run_cycle, session_energy, SimConfig};

fn traces(c: &mut Criterion) {
    let trace = hc05_trace(100);
    c.bench_function("session_energy/100_cycles", |b| {
        b.iter(|| session_energy(black_box(&trace)))
    });
    c.bench_function("clean_spikes/100_cycles", |b| {
        b.iter(|| clean_spikes(black_box(&trace), 0.06, 50e-6).unwrap())
    });
    let one = hc05_trace(1);
    let opts = AnalysisOptions::default();
    c.bench_function("analyze_trace/1_cycle", |b| {
        b.iter(|| analyze_trace(black_box(&one), &opts).unwrap())
    });
}

fn sizing(c: &mut Criterion) {
    let req = hc05_request();
    c.bench_function("design_hess", |b| b.iter(|| design_hess(black_box(&req)).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let design = hc05_design();
    let load = hc05_load();
    let sw = default_switch_schedule(&hc05_schedule());
    let mut group = c.benchmark_group("run_cycle");
    group.sample_size(20);
    for dt in [1e-6, 0.1e-6] {
        let cfg = SimConfig::new(dt, 10).without_waveform();
        group.bench_with_input(BenchmarkId::new("10_cycles", format!("{dt:e}")), &cfg, |b, cfg| {
            b.iter(|| run_cycle(&design, &load, &sw, cfg).unwrap())
        });
    }
    group.finish();
}

fn rf(c: &mut Criterion) {
    let cal = calibrate(
        &AntennaPattern::patch(6.0, 2.0),
        &HC05_MEASURED,
        CALIBRATION_DISTANCE,
        DEFAULT_FREQUENCY,
    )
    .unwrap();
    c.bench_function("field_map/1deg", |b| {
        b.iter(|| field_map(black_box(&cal.pattern), cal.p_tx_dbm, 5.0, PI / 180.0).unwrap())
    });
}

criterion_group!(benches, traces, sizing, simulation, rf);
criterion_main!(benches);
