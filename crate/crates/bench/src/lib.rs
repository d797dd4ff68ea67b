//! Fixtures shared by the criterion benchmarks in `benches/`.

use hess_core::hess::{BatterySpec, SwitchSpec, DEFAULT_SC_ESR};
use hess_core::profiles::{hc05_schedule, synthesize_trace, HC05};
use hess_core::{design_hess, CurrentTrace, DesignRequest, HessDesign, LoadModel, LoadProfile, SizingConstraints};

pub fn hc05_request() -> DesignRequest {
    DesignRequest {
        schedule: hc05_schedule(),
        sense: HC05.bench_config(),
        battery: BatterySpec::li_ion(1.0).expect("valid battery"),
        switch: SwitchSpec::default(),
        sc_esr: DEFAULT_SC_ESR,
        constraints: SizingConstraints::default(),
    }
}

pub fn hc05_design() -> HessDesign {
    design_hess(&hc05_request()).expect("default design")
}

pub fn hc05_load() -> LoadProfile {
    LoadProfile::from_schedule(&hc05_schedule(), &HC05.bench_config(), LoadModel::ConstantPower).expect("load")
}

/// `cycles` back-to-back copies of the synthetic HC-05 capture.
pub fn hc05_trace(cycles: usize) -> CurrentTrace {
    let one = synthesize_trace(&hc05_schedule(), &HC05.bench_config()).expect("trace");
    let mut samples = Vec::with_capacity(one.len() * cycles);
    for _ in 0..cycles {
        samples.extend_from_slice(one.samples());
    }
    CurrentTrace::new(samples, *one.config(), "hc05").expect("trace")
}
