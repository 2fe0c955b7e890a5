//! Experimental setup configuration: per-arm component transmissions,
//! beamsplitter characterization, detector efficiencies, source parameters,
//! and the line geometry of verifiers and prover.
//!
//! The schema is a JSON document with strict key checking; two
//! characterizations ship with the crate: `paper_setup` (the measured
//! transmissions and splitting ratios of the tabletop experiment) and
//! `ideal_setup` (lossless, balanced, perfect detectors).
//!
//! # Schema (version 1)
//!
//! ```json
//! {
//!   "schema": 1,
//!   "source": { "g2": 0.224, "indistinguishability": 0.542 },
//!   "arms": { "v0": { "switch": .., "delay_stage": .., "polarization_modulator": .., "long_fiber": .. }, "v1": { .. } },
//!   "beamsplitters": { "bs1": { "split_ratio_upper": .., "excess_transmission": .. }, "bs2": { .. }, "bs3": { .. } },
//!   "detectors": { "a": { "fiber_transmission": .., "relative_efficiency": .., "dark_click_probability": .. }, .. },
//!   "detector_abs_scale": 0.3,
//!   "geometry": { "x_v0_m": .., "x_prover_m": .., "x_v1_m": .., "signal_speed_m_per_s": .., "processing_time_s": .., "timing_tolerance_s": .. }
//! }
//! ```
//!
//! All transmissions are probabilities in [0, 1]. Detector efficiencies are
//! relative to detector A; `detector_abs_scale` sets the absolute efficiency
//! of detector A. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{Arm, BeamSplitterSpec, ClickPattern, Detector, DetectorSpec};
use crate::source::SourceParams;

const PAPER_SETUP_JSON: &str = include_str!("../data/paper_setup.json");
const IDEAL_SETUP_JSON: &str = include_str!("../data/ideal_setup.json");

/// Speed of light in vacuum, m/s.
pub const C_VACUUM_M_PER_S: f64 = 299_792_458.0;

/// Component transmissions of one verifier arm, switch to prover input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmTransmissions {
    pub switch: f64,
    pub delay_stage: f64,
    pub polarization_modulator: f64,
    pub long_fiber: f64,
}

impl ArmTransmissions {
    /// Composed arm transmission: the product of the component rows.
    pub fn composed(&self) -> f64 {
        self.switch * self.delay_stage * self.polarization_modulator * self.long_fiber
    }

    fn validate(&self, key: &str) -> Result<()> {
        for (name, v) in [
            ("switch", self.switch),
            ("delay_stage", self.delay_stage),
            ("polarization_modulator", self.polarization_modulator),
            ("long_fiber", self.long_fiber),
        ] {
            check_probability(&format!("{key}.{name}"), v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arms {
    pub v0: ArmTransmissions,
    pub v1: ArmTransmissions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Beamsplitters {
    pub bs1: BeamSplitterSpec,
    pub bs2: BeamSplitterSpec,
    pub bs3: BeamSplitterSpec,
}

/// One detection channel: fiber feed, efficiency relative to detector A, and
/// dark click probability per gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorChannel {
    pub fiber_transmission: f64,
    pub relative_efficiency: f64,
    #[serde(default)]
    pub dark_click_probability: f64,
}

impl DetectorChannel {
    fn validate(&self, key: &str) -> Result<()> {
        check_probability(&format!("{key}.fiber_transmission"), self.fiber_transmission)?;
        check_probability(
            &format!("{key}.relative_efficiency"),
            self.relative_efficiency,
        )?;
        if !(0.0..1.0).contains(&self.dark_click_probability) {
            return Err(Error::OutOfRange {
                key: format!("{key}.dark_click_probability"),
                value: self.dark_click_probability,
                expected: "[0, 1)",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detectors {
    pub a: DetectorChannel,
    pub b: DetectorChannel,
    pub c: DetectorChannel,
    pub d: DetectorChannel,
}

impl Detectors {
    pub fn channel(&self, d: Detector) -> &DetectorChannel {
        match d {
            Detector::A => &self.a,
            Detector::B => &self.b,
            Detector::C => &self.c,
            Detector::D => &self.d,
        }
    }
}

/// One-dimensional protocol geometry and timing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub x_v0_m: f64,
    pub x_prover_m: f64,
    pub x_v1_m: f64,
    pub signal_speed_m_per_s: f64,
    pub processing_time_s: f64,
    pub timing_tolerance_s: f64,
}

impl Geometry {
    fn validate(&self) -> Result<()> {
        if !(self.x_v0_m < self.x_prover_m && self.x_prover_m < self.x_v1_m) {
            return Err(Error::ConfigParse(format!(
                "geometry must satisfy x_v0_m < x_prover_m < x_v1_m, got {} / {} / {}",
                self.x_v0_m, self.x_prover_m, self.x_v1_m
            )));
        }
        if !(self.signal_speed_m_per_s > 0.0 && self.signal_speed_m_per_s <= C_VACUUM_M_PER_S) {
            return Err(Error::OutOfRange {
                key: "geometry.signal_speed_m_per_s".into(),
                value: self.signal_speed_m_per_s,
                expected: "(0, c]",
            });
        }
        for (name, v) in [
            ("processing_time_s", self.processing_time_s),
            ("timing_tolerance_s", self.timing_tolerance_s),
        ] {
            if v < 0.0 {
                return Err(Error::OutOfRange {
                    key: format!("geometry.{name}"),
                    value: v,
                    expected: ">= 0",
                });
            }
        }
        Ok(())
    }

    /// Distance from a verifier to the prover position, meters.
    pub fn distance_to_prover(&self, arm: Arm) -> f64 {
        match arm {
            Arm::V0 => self.x_prover_m - self.x_v0_m,
            Arm::V1 => self.x_v1_m - self.x_prover_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub g2: f64,
    pub indistinguishability: f64,
    /// Per-pulse photon delivery probability. Accepted for completeness;
    /// all conditional statistics are independent of it, so the model
    /// ignores it (missed pulses are loss like any other).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brightness: Option<f64>,
}

/// The full optical-network characterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupConfig {
    pub schema: u32,
    pub source: SourceSection,
    pub arms: Arms,
    pub beamsplitters: Beamsplitters,
    pub detectors: Detectors,
    pub detector_abs_scale: f64,
    pub geometry: Geometry,
}

impl SetupConfig {
    /// The measured characterization of the tabletop experiment.
    pub fn paper_setup() -> SetupConfig {
        load_config(PAPER_SETUP_JSON).expect("bundled paper_setup is valid")
    }

    /// Lossless balanced network with perfect detectors and an ideal source.
    pub fn ideal_setup() -> SetupConfig {
        load_config(IDEAL_SETUP_JSON).expect("bundled ideal_setup is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != 1 {
            return Err(Error::ConfigParse(format!(
                "unsupported schema version {} (expected 1)",
                self.schema
            )));
        }
        SourceParams::new(self.source.g2, self.source.indistinguishability)?;
        if let Some(b) = self.source.brightness {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::OutOfRange {
                    key: "source.brightness".into(),
                    value: b,
                    expected: "(0, 1]",
                });
            }
        }
        self.arms.v0.validate("arms.v0")?;
        self.arms.v1.validate("arms.v1")?;
        self.beamsplitters.bs1.validate("beamsplitters.bs1")?;
        self.beamsplitters.bs2.validate("beamsplitters.bs2")?;
        self.beamsplitters.bs3.validate("beamsplitters.bs3")?;
        for (key, ch) in [
            ("detectors.a", &self.detectors.a),
            ("detectors.b", &self.detectors.b),
            ("detectors.c", &self.detectors.c),
            ("detectors.d", &self.detectors.d),
        ] {
            ch.validate(key)?;
        }
        check_probability("detector_abs_scale", self.detector_abs_scale)?;
        self.geometry.validate()?;
        Ok(())
    }

    pub fn source_params(&self) -> Result<SourceParams> {
        SourceParams::new(self.source.g2, self.source.indistinguishability)
    }

    /// Composed transmission of a verifier arm up to BS1.
    pub fn arm_transmission(&self, arm: Arm) -> f64 {
        match arm {
            Arm::V0 => self.arms.v0.composed(),
            Arm::V1 => self.arms.v1.composed(),
        }
    }

    /// The composed detector: fiber feed times relative efficiency times the
    /// absolute scale, plus the dark click probability.
    pub fn detector_spec(&self, d: Detector) -> DetectorSpec {
        let ch = self.detectors.channel(d);
        DetectorSpec {
            efficiency: ch.fiber_transmission * ch.relative_efficiency * self.detector_abs_scale,
            dark_click_probability: ch.dark_click_probability,
        }
    }

    fn downstream_excess(&self, d: Detector) -> f64 {
        match d {
            Detector::A | Detector::B => self.beamsplitters.bs2.excess_transmission,
            Detector::C | Detector::D => self.beamsplitters.bs3.excess_transmission,
        }
    }

    /// Survival probability of a photon on the (arm, detector) trajectory,
    /// excluding splitting ratios (routing is a separate process): arm
    /// transmission, BS1 excess, downstream BS excess, detector fiber and
    /// efficiency.
    pub fn path_survival(&self, arm: Arm, d: Detector) -> f64 {
        self.arm_transmission(arm)
            * self.beamsplitters.bs1.excess_transmission
            * self.downstream_excess(d)
            * self.detector_spec(d).efficiency
    }

    /// Overall optical transmission of the (arm, detector) path in the
    /// supplement's sense: includes splitting ratios and the detector fiber
    /// but not the detector quantum efficiency.
    pub fn optical_path_transmission(&self, arm: Arm, d: Detector) -> f64 {
        let bs = &self.beamsplitters;
        let to_upper = match arm {
            Arm::V0 => bs.bs1.split_ratio_upper,
            Arm::V1 => bs.bs1.split_ratio_lower(),
        };
        let (port_split, downstream_split) = match d {
            Detector::A => (to_upper, bs.bs2.split_ratio_upper),
            Detector::B => (to_upper, bs.bs2.split_ratio_lower()),
            Detector::C => (1.0 - to_upper, bs.bs3.split_ratio_upper),
            Detector::D => (1.0 - to_upper, bs.bs3.split_ratio_lower()),
        };
        self.arm_transmission(arm)
            * bs.bs1.excess_transmission
            * port_split
            * self.downstream_excess(d)
            * downstream_split
            * self.detectors.channel(d).fiber_transmission
    }

    /// Canonical serialized form (pretty JSON, fixed key order, trailing
    /// newline).
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

fn check_probability(key: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
        return Err(Error::OutOfRange {
            key: key.to_string(),
            value,
            expected: "[0, 1]",
        });
    }
    Ok(())
}

/// Parse and validate a configuration document. Unknown keys, missing keys,
/// malformed numbers, and out-of-range probabilities are all rejected with
/// the offending key named.
pub fn load_config(text: &str) -> Result<SetupConfig> {
    let config: SetupConfig =
        serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Accumulated coincidence and singles counts over many pulse slots.
///
/// `CC[i][j]` counts slots where detectors i and j both clicked (regardless
/// of other detectors); `SC[i]` counts slots where detector i clicked.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountsTable {
    cc: [[u64; 4]; 4],
    sc: [u64; 4],
    pub duration_s: f64,
}

/// Canonical unordered detector pairs, in (A,B), (A,C), (A,D), (B,C), (B,D),
/// (C,D) order.
pub const DETECTOR_PAIRS: [(Detector, Detector); 6] = [
    (Detector::A, Detector::B),
    (Detector::A, Detector::C),
    (Detector::A, Detector::D),
    (Detector::B, Detector::C),
    (Detector::B, Detector::D),
    (Detector::C, Detector::D),
];

impl CountsTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record the clicks of one pulse slot.
    pub fn record(&mut self, pattern: ClickPattern) {
        for d in pattern.detectors() {
            self.sc[d.index()] += 1;
        }
        for (i, j) in DETECTOR_PAIRS {
            if pattern.contains(i) && pattern.contains(j) {
                self.cc[i.index()][j.index()] += 1;
            }
        }
    }

    /// Merge counts from another shard.
    pub fn merge(&mut self, other: &CountsTable) {
        for i in 0..4 {
            self.sc[i] += other.sc[i];
            for j in 0..4 {
                self.cc[i][j] += other.cc[i][j];
            }
        }
        self.duration_s += other.duration_s;
    }

    pub fn coincidences(&self, a: Detector, b: Detector) -> u64 {
        let (i, j) = if a.index() <= b.index() { (a, b) } else { (b, a) };
        self.cc[i.index()][j.index()]
    }

    pub fn singles(&self, d: Detector) -> u64 {
        self.sc[d.index()]
    }

    pub fn set_coincidences(&mut self, a: Detector, b: Detector, count: u64) {
        let (i, j) = if a.index() <= b.index() { (a, b) } else { (b, a) };
        self.cc[i.index()][j.index()] = count;
    }

    pub fn set_singles(&mut self, d: Detector, count: u64) {
        self.sc[d.index()] = count;
    }

    /// Normalized coincidences `CC_ij / (SC_i SC_j)` for all six pairs.
    pub fn normalized_coincidences(&self) -> Result<Vec<((Detector, Detector), f64)>> {
        for d in Detector::ALL {
            if self.sc[d.index()] == 0 {
                return Err(Error::ZeroSingles(d));
            }
        }
        Ok(DETECTOR_PAIRS
            .into_iter()
            .map(|(i, j)| {
                let norm = self.coincidences(i, j) as f64
                    / (self.singles(i) as f64 * self.singles(j) as f64);
                ((i, j), norm)
            })
            .collect())
    }

    /// CSV export: a `pair,count` section, a `detector,count` section, and a
    /// trailing `duration,<seconds>` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair,count\n");
        for (i, j) in DETECTOR_PAIRS {
            out.push_str(&format!("{}{},{}\n", i, j, self.coincidences(i, j)));
        }
        out.push_str("detector,count\n");
        for d in Detector::ALL {
            out.push_str(&format!("{},{}\n", d, self.singles(d)));
        }
        out.push_str(&format!("duration,{}\n", self.duration_s));
        out
    }

    pub fn from_csv(text: &str) -> Result<CountsTable> {
        let mut table = CountsTable::new();
        #[derive(PartialEq)]
        enum Section {
            None,
            Pairs,
            Detectors,
        }
        let mut section = Section::None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            if line == "pair,count" {
                section = Section::Pairs;
                continue;
            }
            if line == "detector,count" {
                section = Section::Detectors;
                continue;
            }
            let (key, value) = line.split_once(',').ok_or(Error::CsvParse {
                line: lineno,
                message: "expected `key,value`".into(),
            })?;
            if key == "duration" {
                table.duration_s = value.trim().parse().map_err(|e| Error::CsvParse {
                    line: lineno,
                    message: format!("bad duration: {e}"),
                })?;
                continue;
            }
            let count: u64 = value.trim().parse().map_err(|e| Error::CsvParse {
                line: lineno,
                message: format!("bad count: {e}"),
            })?;
            match section {
                Section::Pairs => {
                    let pattern: ClickPattern = key.parse().map_err(|e| Error::CsvParse {
                        line: lineno,
                        message: e,
                    })?;
                    let dets: Vec<Detector> = pattern.detectors().collect();
                    if dets.len() != 2 {
                        return Err(Error::CsvParse {
                            line: lineno,
                            message: format!("`{key}` is not a detector pair"),
                        });
                    }
                    table.set_coincidences(dets[0], dets[1], count);
                }
                Section::Detectors => {
                    let d = Detector::from_label(key.chars().next().unwrap_or('?')).ok_or(
                        Error::CsvParse {
                            line: lineno,
                            message: format!("unknown detector `{key}`"),
                        },
                    )?;
                    table.set_singles(d, count);
                }
                Section::None => {
                    return Err(Error::CsvParse {
                        line: lineno,
                        message: "data before a section header".into(),
                    });
                }
            }
        }
        Ok(table)
    }
}
