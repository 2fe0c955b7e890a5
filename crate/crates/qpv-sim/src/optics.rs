//! Exact probability computation and sampling for photon propagation through
//! the prover's three-beamsplitter, four-detector network with loss.
//!
//! Layout: each verifier arm feeds one input of the first beamsplitter (BS1).
//! The upper BS1 output feeds BS2 (detectors A and B), the lower feeds BS3
//! (detectors C and D). Detectors are threshold detectors: any positive
//! number of surviving photons produces exactly one click.
//!
//! The interference model: the unique signal-signal pair interferes at BS1
//! with the pair overlap given by the source's interferometric visibility
//! times the polarization overlap of the two encoded qubits; all other
//! photons (noise contamination) are fully distinguishable and route
//! independently. Downstream of BS1, routing statistics of any photon group
//! are exactly multinomial regardless of indistinguishability, and every
//! loss channel commutes with routing, so path loss, beamsplitter excess
//! loss, and detector efficiency compose into one per-trajectory survival
//! probability.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SetupConfig;
use crate::error::{Error, Result};
use crate::protocol::RoundSpec;
use crate::source::SourceParams;

/// Verifier arm labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    V0,
    V1,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::V0, Arm::V1];

    pub fn index(self) -> usize {
        match self {
            Arm::V0 => 0,
            Arm::V1 => 1,
        }
    }
}

/// Detector labels, in network order: A and B behind BS2, C and D behind BS3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    A,
    B,
    C,
    D,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::A, Detector::B, Detector::C, Detector::D];

    pub fn index(self) -> usize {
        match self {
            Detector::A => 0,
            Detector::B => 1,
            Detector::C => 2,
            Detector::D => 3,
        }
    }

    fn from_index(i: usize) -> Detector {
        Detector::ALL[i]
    }

    pub fn label(self) -> char {
        match self {
            Detector::A => 'A',
            Detector::B => 'B',
            Detector::C => 'C',
            Detector::D => 'D',
        }
    }

    pub fn from_label(c: char) -> Option<Detector> {
        match c.to_ascii_uppercase() {
            'A' => Some(Detector::A),
            'B' => Some(Detector::B),
            'C' => Some(Detector::C),
            'D' => Some(Detector::D),
            _ => None,
        }
    }
}

impl std::fmt::Display for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// The set of detectors that clicked in one pulse slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ClickPattern(u8);

impl ClickPattern {
    pub const COUNT: usize = 16;

    pub fn empty() -> Self {
        ClickPattern(0)
    }

    pub fn from_detectors(dets: &[Detector]) -> Self {
        let mut p = ClickPattern(0);
        for &d in dets {
            p = p.with(d);
        }
        p
    }

    #[must_use]
    pub fn with(self, d: Detector) -> Self {
        ClickPattern(self.0 | (1 << d.index()))
    }

    pub fn contains(self, d: Detector) -> bool {
        self.0 & (1 << d.index()) != 0
    }

    pub fn cardinality(self) -> u32 {
        self.0.count_ones()
    }

    /// Index into a dense 16-entry table.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(i: usize) -> Self {
        debug_assert!(i < Self::COUNT);
        ClickPattern(i as u8)
    }

    pub fn detectors(self) -> impl Iterator<Item = Detector> {
        Detector::ALL.into_iter().filter(move |d| self.contains(*d))
    }

    pub fn all() -> impl Iterator<Item = ClickPattern> {
        (0..Self::COUNT).map(ClickPattern::from_index)
    }
}

impl std::fmt::Display for ClickPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 == 0 {
            return write!(f, "-");
        }
        for d in self.detectors() {
            write!(f, "{}", d.label())?;
        }
        Ok(())
    }
}

impl std::str::FromStr for ClickPattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "-" || s.is_empty() {
            return Ok(ClickPattern::empty());
        }
        let mut p = ClickPattern::empty();
        for c in s.chars() {
            let d = Detector::from_label(c).ok_or_else(|| format!("unknown detector `{c}`"))?;
            p = p.with(d);
        }
        Ok(p)
    }
}

/// A probability distribution over all 16 click patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    probs: [f64; ClickPattern::COUNT],
}

impl OutcomeDistribution {
    pub fn from_probabilities(probs: [f64; ClickPattern::COUNT]) -> Self {
        Self { probs }
    }

    pub fn probability(&self, pattern: ClickPattern) -> f64 {
        self.probs[pattern.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ClickPattern, f64)> + '_ {
        ClickPattern::all().map(move |p| (p, self.probs[p.index()]))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability mass on patterns satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(ClickPattern) -> bool) -> f64 {
        self.iter().filter(|(p, _)| pred(*p)).map(|(_, v)| v).sum()
    }

    /// Total-variation distance to another distribution over the same space.
    pub fn total_variation(&self, other: &OutcomeDistribution) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(other.probs.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn is_normalized(&self, tolerance: f64) -> bool {
        self.probs.iter().all(|&p| p >= -tolerance) && (self.total() - 1.0).abs() <= tolerance
    }
}

/// A pure single-photon polarization state in the H/V amplitude basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationQubit {
    h: Complex64,
    v: Complex64,
}

const NORMALIZATION_TOL: f64 = 1e-12;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

impl PolarizationQubit {
    pub fn new(h: Complex64, v: Complex64) -> Result<Self> {
        let q = Self { h, v };
        let norm = q.norm_sqr();
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(q)
    }

    pub fn horizontal() -> Self {
        Self {
            h: Complex64::new(1.0, 0.0),
            v: Complex64::new(0.0, 0.0),
        }
    }

    pub fn vertical() -> Self {
        Self {
            h: Complex64::new(0.0, 0.0),
            v: Complex64::new(1.0, 0.0),
        }
    }

    /// (H + V) / sqrt(2)
    pub fn diagonal() -> Self {
        Self {
            h: Complex64::new(FRAC_1_SQRT_2, 0.0),
            v: Complex64::new(FRAC_1_SQRT_2, 0.0),
        }
    }

    /// (H - V) / sqrt(2)
    pub fn antidiagonal() -> Self {
        Self {
            h: Complex64::new(FRAC_1_SQRT_2, 0.0),
            v: Complex64::new(-FRAC_1_SQRT_2, 0.0),
        }
    }

    /// (H + iV) / sqrt(2)
    pub fn circular_right() -> Self {
        Self {
            h: Complex64::new(FRAC_1_SQRT_2, 0.0),
            v: Complex64::new(0.0, FRAC_1_SQRT_2),
        }
    }

    /// (H - iV) / sqrt(2)
    pub fn circular_left() -> Self {
        Self {
            h: Complex64::new(FRAC_1_SQRT_2, 0.0),
            v: Complex64::new(0.0, -FRAC_1_SQRT_2),
        }
    }

    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        (self.h, self.v)
    }

    fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    /// Inner product ⟨self|other⟩.
    pub fn inner(&self, other: &PolarizationQubit) -> Complex64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }
}

/// |⟨q0|q1⟩|² for two normalized polarization states.
pub fn polarization_overlap(q0: &PolarizationQubit, q1: &PolarizationQubit) -> Result<f64> {
    for q in [q0, q1] {
        let norm = q.norm_sqr();
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { norm });
        }
    }
    Ok(q0.inner(q1).norm_sqr().clamp(0.0, 1.0))
}

/// A (possibly unbalanced, lossy) beamsplitter: the probability of exiting
/// the upper port and the lumped non-splitting transmission of the device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSplitterSpec {
    pub split_ratio_upper: f64,
    pub excess_transmission: f64,
}

impl BeamSplitterSpec {
    pub fn new(split_ratio_upper: f64, excess_transmission: f64) -> Result<Self> {
        let bs = Self {
            split_ratio_upper,
            excess_transmission,
        };
        bs.validate("beamsplitter")?;
        Ok(bs)
    }

    pub fn split_ratio_lower(&self) -> f64 {
        1.0 - self.split_ratio_upper
    }

    pub(crate) fn validate(&self, key: &str) -> Result<()> {
        if !(self.split_ratio_upper > 0.0 && self.split_ratio_upper < 1.0) {
            return Err(Error::OutOfRange {
                key: format!("{key}.split_ratio_upper"),
                value: self.split_ratio_upper,
                expected: "(0, 1)",
            });
        }
        if !(self.excess_transmission > 0.0 && self.excess_transmission <= 1.0) {
            return Err(Error::OutOfRange {
                key: format!("{key}.excess_transmission"),
                value: self.excess_transmission,
                expected: "(0, 1]",
            });
        }
        Ok(())
    }
}

/// A threshold detector: composed detection efficiency and per-gate dark
/// click probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub efficiency: f64,
    pub dark_click_probability: f64,
}

impl DetectorSpec {
    pub fn new(efficiency: f64, dark_click_probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(Error::OutOfRange {
                key: "detector.efficiency".into(),
                value: efficiency,
                expected: "[0, 1]",
            });
        }
        if !(0.0..1.0).contains(&dark_click_probability) {
            return Err(Error::OutOfRange {
                key: "detector.dark_click_probability".into(),
                value: dark_click_probability,
                expected: "[0, 1)",
            });
        }
        Ok(Self {
            efficiency,
            dark_click_probability,
        })
    }
}

/// Photon species: the interfering signal photon or distinguishable
/// multi-photon contamination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonKind {
    Signal,
    Noise,
}

/// One photon in flight. `mode_class` identifies the temporal mode: the two
/// signal photons share class 0 and interfere with the pair overlap; noise
/// photons carry unique classes and have zero overlap with everything.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonRecord {
    pub origin: Arm,
    pub kind: PhotonKind,
    pub polarization: PolarizationQubit,
    pub mode_class: u8,
}

/// Output statistics of one photon pair meeting at a beamsplitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRouting {
    pub both_upper: f64,
    pub both_lower: f64,
    pub split: f64,
}

/// Two-photon routing at a beamsplitter with transmittance `t_upper` for the
/// pair overlap `overlap`:
///
/// P(split)      = T² + R² − 2 T R · overlap
/// P(both upper) = P(both lower) = T R (1 + overlap)
///
/// the standard partial-distinguishability result for one photon entering
/// each input port.
pub fn two_photon_bs_distribution(t_upper: f64, overlap: f64) -> Result<PairRouting> {
    if !(t_upper > 0.0 && t_upper < 1.0) {
        return Err(Error::OutOfRange {
            key: "split_ratio_upper".into(),
            value: t_upper,
            expected: "(0, 1)",
        });
    }
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::OutOfRange {
            key: "overlap".into(),
            value: overlap,
            expected: "[0, 1]",
        });
    }
    let t = t_upper;
    let r = 1.0 - t_upper;
    Ok(PairRouting {
        both_upper: t * r * (1.0 + overlap),
        both_lower: t * r * (1.0 + overlap),
        split: t * t + r * r - 2.0 * t * r * overlap,
    })
}

/// Flattened network parameters for the enumeration and the sampler.
///
/// `upper_detect[i]` is the probability that a photon leaving BS1 through the
/// upper port ends up *detected* at detector A (i=0) or B (i=1); it folds in
/// the BS1 excess loss, the downstream splitting ratio and excess loss, and
/// the composed detector efficiency. Same for `lower_detect` with C and D.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Network {
    pub arm_transmission: [f64; 2],
    pub bs1_upper: f64,
    pub upper_detect: [f64; 2],
    pub lower_detect: [f64; 2],
    pub dark: [f64; 4],
}

impl Network {
    pub(crate) fn from_config(setup: &SetupConfig) -> Network {
        let bs = &setup.beamsplitters;
        let e1 = bs.bs1.excess_transmission;
        let det = |d: Detector| setup.detector_spec(d).efficiency;
        Network {
            arm_transmission: [
                setup.arm_transmission(Arm::V0),
                setup.arm_transmission(Arm::V1),
            ],
            bs1_upper: bs.bs1.split_ratio_upper,
            upper_detect: [
                e1 * bs.bs2.split_ratio_upper * bs.bs2.excess_transmission * det(Detector::A),
                e1 * bs.bs2.split_ratio_lower() * bs.bs2.excess_transmission * det(Detector::B),
            ],
            lower_detect: [
                e1 * bs.bs3.split_ratio_upper * bs.bs3.excess_transmission * det(Detector::C),
                e1 * bs.bs3.split_ratio_lower() * bs.bs3.excess_transmission * det(Detector::D),
            ],
            dark: Detector::ALL.map(|d| setup.detector_spec(d).dark_click_probability),
        }
    }

    /// Probability that a single photon from `arm` leaves BS1 through the
    /// upper port. The two inputs see complementary ratios (unitarity).
    fn upper_probability(&self, arm: Arm) -> f64 {
        match arm {
            Arm::V0 => self.bs1_upper,
            Arm::V1 => 1.0 - self.bs1_upper,
        }
    }
}

/// Click outcome probabilities for `k` photons in one BS1 output port whose
/// two detectors fire per photon with probabilities `p_first`, `p_second`.
/// Returns [none, first only, second only, both] by inclusion-exclusion over
/// the threshold detectors.
fn port_click_probs(k: u32, p_first: f64, p_second: f64) -> [f64; 4] {
    if k == 0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let ki = k as i32;
    let no_first = (1.0 - p_first).powi(ki);
    let no_second = (1.0 - p_second).powi(ki);
    let neither = (1.0 - p_first - p_second).powi(ki);
    [
        neither,
        no_second - neither,
        no_first - neither,
        1.0 - no_first - no_second + neither,
    ]
}

/// The engine core: exact pattern distribution for noise probability `p2`
/// and signal-pair overlap `pair_overlap`, before dark counts.
fn base_distribution(net: &Network, p2: f64, pair_overlap: f64) -> [f64; ClickPattern::COUNT] {
    let mut dist = [0.0; ClickPattern::COUNT];
    let [t0, t1] = net.arm_transmission;
    let up0 = net.upper_probability(Arm::V0);
    let up1 = net.upper_probability(Arm::V1);

    let arrive0 = [(false, 1.0 - t0), (true, t0)];
    let arrive1 = [(false, 1.0 - t1), (true, t1)];
    let absent = [(false, 1.0)];
    let noise_emission = [(false, 1.0 - p2), (true, p2)];

    for (noise0, w_n0) in noise_emission {
        for (noise1, w_n1) in noise_emission {
            let w_emit = w_n0 * w_n1;
            if w_emit == 0.0 {
                continue;
            }
            // survival of each emitted photon to BS1 (arm transmission)
            for (sig0, w_s0) in arrive0 {
                for (sig1, w_s1) in arrive1 {
                    let n0_opts: &[(bool, f64)] = if noise0 { &arrive0 } else { &absent };
                    for &(n0, w_a0) in n0_opts {
                        let n1_opts: &[(bool, f64)] = if noise1 { &arrive1 } else { &absent };
                        for &(n1, w_a1) in n1_opts {
                            let w = w_emit * w_s0 * w_s1 * w_a0 * w_a1;
                            if w == 0.0 {
                                continue;
                            }
                            accumulate_routes(
                                &mut dist,
                                net,
                                w,
                                (sig0, sig1, n0, n1),
                                pair_overlap,
                                (up0, up1),
                            );
                        }
                    }
                }
            }
        }
    }
    dist
}

/// Route the photons present at BS1 and fold the per-port click outcomes
/// into the pattern distribution with weight `w`.
fn accumulate_routes(
    dist: &mut [f64; ClickPattern::COUNT],
    net: &Network,
    w: f64,
    present: (bool, bool, bool, bool),
    pair_overlap: f64,
    (up0, up1): (f64, f64),
) {
    let (sig0, sig1, n0, n1) = present;
    // (probability, photons in upper port, photons in lower port)
    let mut routes: Vec<(f64, u32, u32)> = Vec::with_capacity(12);
    if sig0 && sig1 {
        // split_ratio_upper is validated to (0,1) at config load
        let pair = two_photon_bs_distribution(net.bs1_upper, pair_overlap)
            .expect("validated BS1 parameters");
        routes.push((pair.both_upper, 2, 0));
        routes.push((pair.both_lower, 0, 2));
        routes.push((pair.split, 1, 1));
    } else {
        routes.push((1.0, 0, 0));
        if sig0 {
            route_single(&mut routes, up0);
        }
        if sig1 {
            route_single(&mut routes, up1);
        }
    }
    if n0 {
        route_single(&mut routes, up0);
    }
    if n1 {
        route_single(&mut routes, up1);
    }

    for (wr, ku, kl) in routes {
        if wr == 0.0 {
            continue;
        }
        let pu = port_click_probs(ku, net.upper_detect[0], net.upper_detect[1]);
        let pl = port_click_probs(kl, net.lower_detect[0], net.lower_detect[1]);
        for (iu, wu) in pu.iter().enumerate() {
            if *wu == 0.0 {
                continue;
            }
            for (il, wl) in pl.iter().enumerate() {
                // upper-port bits are A/B (0,1); lower-port bits are C/D (2,3)
                let pattern = iu | (il << 2);
                dist[pattern] += w * wr * wu * wl;
            }
        }
    }
}

fn route_single(routes: &mut Vec<(f64, u32, u32)>, up: f64) {
    let mut expanded = Vec::with_capacity(routes.len() * 2);
    for &(p, ku, kl) in routes.iter() {
        expanded.push((p * up, ku + 1, kl));
        expanded.push((p * (1.0 - up), ku, kl + 1));
    }
    *routes = expanded;
}

/// Overlay independent per-detector dark clicks onto a pattern distribution.
fn apply_dark_counts(dist: &mut [f64; ClickPattern::COUNT], dark: &[f64; 4]) {
    for (d, &pd) in dark.iter().enumerate() {
        if pd == 0.0 {
            continue;
        }
        let bit = 1usize << d;
        let mut next = [0.0; ClickPattern::COUNT];
        for (i, &p) in dist.iter().enumerate() {
            if i & bit != 0 {
                next[i] += p;
            } else {
                next[i] += p * (1.0 - pd);
                next[i | bit] += p * pd;
            }
        }
        *dist = next;
    }
}

/// The pair overlap for a round: interferometric visibility of the source
/// times the polarization overlap of the two encoded qubits.
fn round_pair_overlap(source: &SourceParams, round: &RoundSpec) -> Result<f64> {
    let (q0, q1) = round.qubits();
    let pol = polarization_overlap(&q0, &q1)?;
    Ok(source.interferometric_visibility() * pol)
}

/// Exact distribution over all 16 click patterns for one protocol round,
/// by exhaustive enumeration of emission, survival, routing, and threshold
/// detection. Deterministic, no sampling.
pub fn exact_outcome_distribution(
    source: &SourceParams,
    setup: &SetupConfig,
    round: &RoundSpec,
) -> Result<OutcomeDistribution> {
    let net = Network::from_config(setup);
    let p2 = source.two_photon_probability()?;
    let overlap = round_pair_overlap(source, round)?;
    Ok(exact_distribution_internal(&net, p2, overlap))
}

pub(crate) fn exact_distribution_internal(
    net: &Network,
    p2: f64,
    pair_overlap: f64,
) -> OutcomeDistribution {
    let mut dist = base_distribution(net, p2, pair_overlap);
    apply_dark_counts(&mut dist, &net.dark);
    OutcomeDistribution::from_probabilities(dist)
}

/// Draw one click pattern from the same distribution as
/// [`exact_outcome_distribution`].
pub fn sample_outcome<R: Rng>(
    source: &SourceParams,
    setup: &SetupConfig,
    round: &RoundSpec,
    rng: &mut R,
) -> Result<ClickPattern> {
    let net = Network::from_config(setup);
    let p2 = source.two_photon_probability()?;
    let overlap = round_pair_overlap(source, round)?;
    Ok(sample_internal(&net, p2, overlap, rng))
}

pub(crate) fn sample_internal<R: Rng>(
    net: &Network,
    p2: f64,
    pair_overlap: f64,
    rng: &mut R,
) -> ClickPattern {
    let [t0, t1] = net.arm_transmission;
    // emission
    let noise0 = rng.random_bool(p2);
    let noise1 = rng.random_bool(p2);
    // survival to BS1
    let sig0 = rng.random_bool(t0);
    let sig1 = rng.random_bool(t1);
    let n0 = noise0 && rng.random_bool(t0);
    let n1 = noise1 && rng.random_bool(t1);

    // routing at BS1
    let mut ku = 0u32;
    let mut kl = 0u32;
    if sig0 && sig1 {
        let pair = two_photon_bs_distribution(net.bs1_upper, pair_overlap)
            .expect("validated BS1 parameters");
        let x: f64 = rng.random();
        if x < pair.both_upper {
            ku += 2;
        } else if x < pair.both_upper + pair.both_lower {
            kl += 2;
        } else {
            ku += 1;
            kl += 1;
        }
    } else {
        for (present, arm) in [(sig0, Arm::V0), (sig1, Arm::V1)] {
            if present {
                if rng.random_bool(net.upper_probability(arm)) {
                    ku += 1;
                } else {
                    kl += 1;
                }
            }
        }
    }
    for (present, arm) in [(n0, Arm::V0), (n1, Arm::V1)] {
        if present {
            if rng.random_bool(net.upper_probability(arm)) {
                ku += 1;
            } else {
                kl += 1;
            }
        }
    }

    // detection: each photon in a port is detected at one of the port's two
    // detectors or lost
    let mut pattern = ClickPattern::empty();
    for _ in 0..ku {
        let x: f64 = rng.random();
        if x < net.upper_detect[0] {
            pattern = pattern.with(Detector::A);
        } else if x < net.upper_detect[0] + net.upper_detect[1] {
            pattern = pattern.with(Detector::B);
        }
    }
    for _ in 0..kl {
        let x: f64 = rng.random();
        if x < net.lower_detect[0] {
            pattern = pattern.with(Detector::C);
        } else if x < net.lower_detect[0] + net.lower_detect[1] {
            pattern = pattern.with(Detector::D);
        }
    }

    // dark clicks
    for (i, &pd) in net.dark.iter().enumerate() {
        if pd > 0.0 && rng.random_bool(pd) {
            pattern = pattern.with(Detector::from_index(i));
        }
    }
    pattern
}
