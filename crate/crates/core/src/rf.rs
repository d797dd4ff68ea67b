//! Antenna patterns, free-space link budget, emission field maps, band
//! coexistence and a calibrated power-versus-distance curve.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Centre of the 2.4 GHz ISM band used by all shipped transceivers.
pub const DEFAULT_FREQUENCY: f64 = 2.44e9;
/// Gains are never reported below this, so exports stay finite.
pub const DEFAULT_PATTERN_FLOOR_DBI: f64 = -60.0;
/// Distance of the field-map measurements.
pub const CALIBRATION_DISTANCE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AntennaKind {
    Isotropic,
    /// Omnidirectional in azimuth, null along the axis (`theta = 0, π`).
    MonopoleOmni,
    /// Maximum broadside (`theta = 0`), nothing behind the ground plane.
    PatchDirectional,
}

impl AntennaKind {
    pub const ALL: [AntennaKind; 3] = [
        AntennaKind::Isotropic,
        AntennaKind::MonopoleOmni,
        AntennaKind::PatchDirectional,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AntennaKind::Isotropic => "isotropic",
            AntennaKind::MonopoleOmni => "monopole",
            AntennaKind::PatchDirectional => "patch",
        }
    }
}

impl fmt::Display for AntennaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AntennaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isotropic" => Ok(AntennaKind::Isotropic),
            "monopole" | "monopole_omni" => Ok(AntennaKind::MonopoleOmni),
            "patch" | "patch_directional" => Ok(AntennaKind::PatchDirectional),
            _ => Err(Error::Unknown {
                kind: "antenna",
                name: s.to_string(),
                known: AntennaKind::ALL.iter().map(|k| k.name()).collect(),
            }),
        }
    }
}

/// Power pattern `peak · sin^n θ` (monopole) or `peak · cos^n θ` (patch), in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPattern {
    pub kind: AntennaKind,
    pub peak_gain_dbi: f64,
    pub shape_exponent: f64,
    pub floor_dbi: f64,
}

impl AntennaPattern {
    pub fn isotropic() -> Self {
        Self {
            kind: AntennaKind::Isotropic,
            peak_gain_dbi: 0.0,
            shape_exponent: 0.0,
            floor_dbi: DEFAULT_PATTERN_FLOOR_DBI,
        }
    }

    /// Short monopole, `sin² θ` power pattern.
    pub fn monopole(peak_gain_dbi: f64) -> Self {
        Self {
            kind: AntennaKind::MonopoleOmni,
            peak_gain_dbi,
            shape_exponent: 2.0,
            floor_dbi: DEFAULT_PATTERN_FLOOR_DBI,
        }
    }

    pub fn patch(peak_gain_dbi: f64, shape_exponent: f64) -> Self {
        Self {
            kind: AntennaKind::PatchDirectional,
            peak_gain_dbi,
            shape_exponent,
            floor_dbi: DEFAULT_PATTERN_FLOOR_DBI,
        }
    }

    pub fn of_kind(kind: AntennaKind) -> Self {
        match kind {
            AntennaKind::Isotropic => Self::isotropic(),
            AntennaKind::MonopoleOmni => Self::monopole(1.76),
            AntennaKind::PatchDirectional => Self::patch(6.0, 2.0),
        }
    }

    pub fn with_floor(mut self, floor_dbi: f64) -> Self {
        self.floor_dbi = floor_dbi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.peak_gain_dbi.is_finite() {
            return Err(Error::domain("peak_gain_dbi", self.peak_gain_dbi, "must be finite"));
        }
        ensure_non_negative("shape_exponent", self.shape_exponent)?;
        if !(self.floor_dbi.is_finite() && self.floor_dbi <= self.peak_gain_dbi) {
            return Err(Error::domain(
                "floor_dbi",
                self.floor_dbi,
                format!("must be finite and <= peak_gain_dbi = {}", self.peak_gain_dbi),
            ));
        }
        Ok(())
    }
}

/// Gain towards `(theta, phi)` in dBi. `theta` is measured from the antenna
/// axis; both patterns are symmetric in `phi`.
pub fn pattern_gain(pattern: &AntennaPattern, theta: f64, _phi: f64) -> f64 {
    let shaped = |x: f64| {
        if x <= 0.0 {
            f64::NEG_INFINITY
        } else {
            pattern.peak_gain_dbi + 10.0 * pattern.shape_exponent * x.log10()
        }
    };
    let g = match pattern.kind {
        AntennaKind::Isotropic => return pattern.peak_gain_dbi,
        AntennaKind::MonopoleOmni => {
            // sin(π) is 1.2e-16, not 0; treat the axis exactly.
            let s = if theta <= 0.0 || theta >= PI { 0.0 } else { theta.sin() };
            shaped(s)
        }
        AntennaKind::PatchDirectional => {
            if theta >= PI / 2.0 {
                f64::NEG_INFINITY
            } else {
                shaped(theta.cos())
            }
        }
    };
    g.max(pattern.floor_dbi)
}

/// `20 log10(4π d f / c)`.
pub fn free_space_path_loss_db(d: f64, f: f64) -> Result<f64> {
    ensure_positive("distance", d)?;
    ensure_positive("frequency", f)?;
    Ok(20.0 * (4.0 * PI * d * f / SPEED_OF_LIGHT).log10())
}

/// Friis link budget, dBm.
pub fn received_power_dbm(p_tx: f64, g_tx: f64, g_rx: f64, d: f64, f: f64) -> Result<f64> {
    Ok(p_tx + g_tx + g_rx - free_space_path_loss_db(d, f)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub theta: f64,
    pub phi: f64,
    pub r: f64,
    pub p_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub pattern: AntennaPattern,
    pub p_tx_dbm: f64,
    pub frequency: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    /// Row-major: `theta` outer, `phi` inner.
    pub points: Vec<FieldPoint>,
}

impl FieldMap {
    pub fn min_dbm(&self) -> f64 {
        self.points.iter().map(|p| p.p_dbm).fold(f64::INFINITY, f64::min)
    }

    pub fn max_dbm(&self) -> f64 {
        self.points.iter().map(|p| p.p_dbm).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn spread_db(&self) -> f64 {
        self.max_dbm() - self.min_dbm()
    }
}

/// Full-sphere map at 2.44 GHz; see [`field_map_at`].
pub fn field_map(pattern: &AntennaPattern, p_tx: f64, d: f64, angular_step: f64) -> Result<FieldMap> {
    field_map_at(pattern, p_tx, d, angular_step, DEFAULT_FREQUENCY)
}

/// Received power over `theta ∈ [0, π]` (inclusive) and `phi ∈ [0, 2π)` at
/// radius `d`, with an isotropic receiver. `angular_step` must divide π.
pub fn field_map_at(pattern: &AntennaPattern, p_tx: f64, d: f64, angular_step: f64, f: f64) -> Result<FieldMap> {
    pattern.validate()?;
    if !p_tx.is_finite() {
        return Err(Error::domain("p_tx", p_tx, "must be finite"));
    }
    ensure_positive("angular_step", angular_step)?;
    let n = (PI / angular_step).round();
    if n < 1.0 || (n * angular_step - PI).abs() > 1e-9 * PI {
        return Err(Error::domain("angular_step", angular_step, "must divide π evenly"));
    }
    let n = n as usize;
    let step = PI / n as f64;
    let base = received_power_dbm(p_tx, 0.0, 0.0, d, f)?;
    let n_theta = n + 1;
    let n_phi = 2 * n;
    let mut points = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        let theta = i as f64 * step;
        for j in 0..n_phi {
            let phi = j as f64 * step;
            points.push(FieldPoint {
                theta,
                phi,
                r: d,
                p_dbm: base + pattern_gain(pattern, theta, phi),
            });
        }
    }
    Ok(FieldMap {
        pattern: *pattern,
        p_tx_dbm: p_tx,
        frequency: f,
        n_theta,
        n_phi,
        points,
    })
}

/// Received-power range a calibrated map should span at 5 m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTarget {
    pub name: &'static str,
    pub kind: AntennaKind,
    pub max_dbm: f64,
    pub min_dbm: f64,
}

impl CalibrationTarget {
    pub fn spread_db(&self) -> f64 {
        self.max_dbm - self.min_dbm
    }
}

pub const MICAZ_MEASURED: CalibrationTarget = CalibrationTarget {
    name: "micaz",
    kind: AntennaKind::MonopoleOmni,
    max_dbm: -65.71,
    min_dbm: -77.70,
};

pub const HC05_MEASURED: CalibrationTarget = CalibrationTarget {
    name: "hc05",
    kind: AntennaKind::PatchDirectional,
    max_dbm: -63.1,
    min_dbm: -67.38,
};

/// Range predicted by the theoretical model for both antennas.
pub const THEORETICAL: CalibrationTarget = CalibrationTarget {
    name: "theoretical",
    kind: AntennaKind::MonopoleOmni,
    max_dbm: -65.71,
    min_dbm: -74.22,
};

pub const CALIBRATION_TARGETS: [CalibrationTarget; 3] = [MICAZ_MEASURED, HC05_MEASURED, THEORETICAL];

pub fn calibration_target(name: &str) -> Result<CalibrationTarget> {
    let key = name.to_ascii_lowercase().replace(['-', '_'], "");
    CALIBRATION_TARGETS
        .iter()
        .find(|t| t.name == key)
        .copied()
        .ok_or_else(|| Error::Unknown {
            kind: "calibration target",
            name: name.to_string(),
            known: CALIBRATION_TARGETS.iter().map(|t| t.name).collect(),
        })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub pattern: AntennaPattern,
    /// Transmit power that puts the map maximum on the target.
    pub p_tx_dbm: f64,
    pub distance: f64,
    pub frequency: f64,
}

/// Fits a pattern to a measured range: the pattern floor sets the null depth
/// to the target spread and a single transmit-power offset places the peak.
pub fn calibrate(pattern: &AntennaPattern, target: &CalibrationTarget, d: f64, f: f64) -> Result<Calibration> {
    pattern.validate()?;
    let spread = target.spread_db();
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(Error::domain(
            "calibration spread",
            spread,
            "max_dbm must be >= min_dbm",
        ));
    }
    let fitted = if pattern.kind == AntennaKind::Isotropic {
        *pattern
    } else {
        pattern.with_floor(pattern.peak_gain_dbi - spread)
    };
    let p_tx = target.max_dbm - fitted.peak_gain_dbi + free_space_path_loss_db(d, f)?;
    Ok(Calibration {
        pattern: fitted,
        p_tx_dbm: p_tx,
        distance: d,
        frequency: f,
    })
}

impl Calibration {
    pub fn field_map(&self, angular_step: f64) -> Result<FieldMap> {
        field_map_at(
            &self.pattern,
            self.p_tx_dbm,
            self.distance,
            angular_step,
            self.frequency,
        )
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}-{}", self.lo, self.hi)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterferenceClass {
    Negligible,
    Considerable,
    Worst,
}

impl InterferenceClass {
    pub fn name(self) -> &'static str {
        match self {
            InterferenceClass::Negligible => "negligible",
            InterferenceClass::Considerable => "considerable",
            InterferenceClass::Worst => "worst",
        }
    }
}

impl fmt::Display for InterferenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Indoor,
    Outdoor,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indoor" => Ok(Scenario::Indoor),
            "outdoor" => Ok(Scenario::Outdoor),
            _ => Err(Error::Unknown {
                kind: "scenario",
                name: s.to_string(),
                known: vec!["indoor", "outdoor"],
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interference {
    Severe,
    Average,
    None,
}

impl std::str::FromStr for Interference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "severe" => Ok(Interference::Severe),
            "average" => Ok(Interference::Average),
            "none" => Ok(Interference::None),
            _ => Err(Error::Unknown {
                kind: "interference level",
                name: s.to_string(),
                known: vec!["severe", "average", "none"],
            }),
        }
    }
}

/// One column of the range/throughput/interference table. Ranges are in
/// metres, throughput losses are fractions. `*_long_range` holds the figure
/// reachable with an added long-range antenna, where one is quoted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoexistenceEntry {
    pub transceiver: &'static str,
    pub indoor_range: Interval,
    pub indoor_range_long_range: Option<Interval>,
    pub between_floors_range: Interval,
    pub between_floors_range_long_range: Option<Interval>,
    pub outdoor_range: Interval,
    pub outdoor_range_long_range: Option<Interval>,
    pub throughput_loss_severe: Interval,
    pub throughput_loss_average: Interval,
    pub interference_class: InterferenceClass,
    /// Table cells as printed: same-floor range, between-floors range,
    /// throughput loss, indoor interference, outdoor range.
    pub cells: [&'static str; 5],
}

/// Loss bound when interference is absent or negligible.
pub const NEGLIGIBLE_LOSS: Interval = Interval::new(0.0, 0.2);

pub const COEXISTENCE_TABLE: [CoexistenceEntry; 4] = [
    CoexistenceEntry {
        transceiver: "HC-05",
        indoor_range: Interval::new(10.0, 15.0),
        indoor_range_long_range: None,
        between_floors_range: Interval::new(6.0, 10.0),
        between_floors_range_long_range: None,
        outdoor_range: Interval::new(30.0, 40.0),
        outdoor_range_long_range: None,
        throughput_loss_severe: Interval::new(0.30, 0.50),
        throughput_loss_average: Interval::new(0.15, 0.20),
        interference_class: InterferenceClass::Considerable,
        cells: [
            "10–15 m",
            "6–10 m",
            "Severe: 30–50%, Average: 15–20%",
            "considerable",
            "30–40 m",
        ],
    },
    CoexistenceEntry {
        transceiver: "JDY-30",
        indoor_range: Interval::point(10.0),
        indoor_range_long_range: None,
        between_floors_range: Interval::point(5.0),
        between_floors_range_long_range: None,
        outdoor_range: Interval::point(30.0),
        outdoor_range_long_range: None,
        throughput_loss_severe: Interval::new(0.45, 0.60),
        throughput_loss_average: Interval::point(0.20),
        interference_class: InterferenceClass::Considerable,
        cells: ["10 m", "5 m", "Severe: 45–60%, Average: 20%", "considerable", "30 m"],
    },
    CoexistenceEntry {
        transceiver: "HM-10",
        indoor_range: Interval::point(5.0),
        indoor_range_long_range: None,
        between_floors_range: Interval::new(2.0, 3.0),
        between_floors_range_long_range: None,
        outdoor_range: Interval::new(20.0, 30.0),
        outdoor_range_long_range: None,
        throughput_loss_severe: Interval::new(0.70, 0.80),
        throughput_loss_average: Interval::point(0.25),
        interference_class: InterferenceClass::Worst,
        cells: [
            "5 m",
            "2–3 m",
            "Severe: 70–80%, Average: 25%",
            "worst effect",
            "20–30 m",
        ],
    },
    CoexistenceEntry {
        transceiver: "NRF24",
        indoor_range: Interval::new(15.0, 25.0),
        indoor_range_long_range: Some(Interval::new(100.0, 200.0)),
        between_floors_range: Interval::point(15.0),
        between_floors_range_long_range: Some(Interval::point(100.0)),
        outdoor_range: Interval::point(100.0),
        outdoor_range_long_range: Some(Interval::point(1000.0)),
        throughput_loss_severe: NEGLIGIBLE_LOSS,
        throughput_loss_average: NEGLIGIBLE_LOSS,
        interference_class: InterferenceClass::Negligible,
        cells: [
            "15–25 m, 100–200 m ¹",
            "15 m, 100 m ¹",
            "Not higher than 20%",
            "negligible",
            "100 m, 1 km ¹",
        ],
    },
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoexistenceResult {
    pub entry: &'static CoexistenceEntry,
    pub scenario: Scenario,
    pub interference: Interference,
    pub range: Interval,
    pub range_long_range: Option<Interval>,
    pub throughput_loss: Interval,
    pub interference_class: InterferenceClass,
}

fn normalise(name: &str) -> String {
    name.to_ascii_lowercase().replace(['-', '_', ' '], "")
}

pub fn coexistence_entry(transceiver: &str) -> Result<&'static CoexistenceEntry> {
    let key = normalise(transceiver);
    COEXISTENCE_TABLE
        .iter()
        .find(|e| normalise(e.transceiver) == key)
        .ok_or_else(|| Error::Unknown {
            kind: "transceiver",
            name: transceiver.to_string(),
            known: COEXISTENCE_TABLE.iter().map(|e| e.transceiver).collect(),
        })
}

/// Range and throughput loss for a transceiver in a scenario. Indoors the
/// same-floor range applies. Outdoors, and without interference, the loss is
/// bounded by 20% and the interference is negligible.
pub fn coexistence_lookup(
    transceiver: &str,
    scenario: Scenario,
    interference: Interference,
) -> Result<CoexistenceResult> {
    let entry = coexistence_entry(transceiver)?;
    let (range, range_long_range, class) = match scenario {
        Scenario::Indoor => (
            entry.indoor_range,
            entry.indoor_range_long_range,
            entry.interference_class,
        ),
        Scenario::Outdoor => (
            entry.outdoor_range,
            entry.outdoor_range_long_range,
            InterferenceClass::Negligible,
        ),
    };
    let throughput_loss = match (scenario, interference) {
        (_, Interference::None) | (Scenario::Outdoor, _) => {
            if entry.interference_class == InterferenceClass::Negligible {
                entry.throughput_loss_severe
            } else {
                NEGLIGIBLE_LOSS
            }
        }
        (Scenario::Indoor, Interference::Severe) => entry.throughput_loss_severe,
        (Scenario::Indoor, Interference::Average) => entry.throughput_loss_average,
    };
    Ok(CoexistenceResult {
        entry,
        scenario,
        interference,
        range,
        range_long_range,
        throughput_loss,
        interference_class: class,
    })
}

/// Monotone piecewise-linear power curve through measured `(metres, watts)`
/// points; extrapolates along the end segments, never below zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    points: Vec<(f64, f64)>,
}

impl PowerCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain(
                "calibration points",
                points.len() as f64,
                "need at least 2",
            ));
        }
        for &(d, p) in &points {
            ensure_non_negative("calibration distance", d)?;
            ensure_non_negative("calibration power", p)?;
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::domain(
                    "calibration distance",
                    w[1].0,
                    format!("must exceed the previous distance {}", w[0].0),
                ));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::domain(
                    "calibration power",
                    w[1].1,
                    format!("must not fall below the previous power {}", w[0].1),
                ));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, d: f64) -> Result<f64> {
        ensure_non_negative("distance", d)?;
        let pts = &self.points;
        let seg = |i: usize| {
            let (d0, p0) = pts[i];
            let (d1, p1) = pts[i + 1];
            p0 + (p1 - p0) * (d - d0) / (d1 - d0)
        };
        let n = pts.len();
        if d <= pts[0].0 {
            return Ok(seg(0).max(0.0));
        }
        if d >= pts[n - 1].0 {
            return Ok(seg(n - 2));
        }
        let i = pts.partition_point(|&(x, _)| x <= d) - 1;
        if pts[i].0 == d {
            return Ok(pts[i].1);
        }
        Ok(seg(i))
    }
}

pub fn power_vs_distance(calibration_points: &[(f64, f64)], d: f64) -> Result<f64> {
    PowerCurve::new(calibration_points.to_vec())?.eval(d)
}
