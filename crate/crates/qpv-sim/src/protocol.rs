//! The SWAP protocol state machines: verifier round preparation, prover
//! answer logic, space-time round check, and final statistical verification.
//!
//! Per round the verifiers agree on a basis and on whether the two encoded
//! qubits are parallel or orthogonal, send one photon each so both arrive at
//! the prover simultaneously, and collect the prover's classical answer
//! `z in {0, 1, inconclusive}`. Conclusive answers require exactly two
//! distinct detector clicks; same-side pairs (AB, CD) mean `z = 0`, cross
//! pairs mean `z = 1`.

use rand::Rng;
use rayon::prelude::*;

use crate::config::{Geometry, SetupConfig};
use crate::error::{Error, Result};
use crate::optics::{self, Arm, ClickPattern, Detector, PolarizationQubit};
use crate::rng::round_stream;
use crate::source::SourceParams;
use crate::stats::{wilson_interval, WilsonInterval, Z_95};

/// The LOCC security threshold: conclusive correctness above this bound is
/// unreachable for attackers restricted to local operations and one round of
/// classical communication with all three bases in play.
pub const LOCC_BOUND: f64 = 2.0 / 3.0;

/// Polarization measurement bases (mutually unbiased).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Hv,
    Da,
    Rl,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Hv, Basis::Da, Basis::Rl];

    /// The two orthogonal states spanning the basis.
    pub fn states(self) -> (PolarizationQubit, PolarizationQubit) {
        match self {
            Basis::Hv => (
                PolarizationQubit::horizontal(),
                PolarizationQubit::vertical(),
            ),
            Basis::Da => (
                PolarizationQubit::diagonal(),
                PolarizationQubit::antidiagonal(),
            ),
            Basis::Rl => (
                PolarizationQubit::circular_right(),
                PolarizationQubit::circular_left(),
            ),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Basis::Hv => "HV",
            Basis::Da => "DA",
            Basis::Rl => "RL",
        }
    }
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Whether the two encoded qubits are the same state or orthogonal ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Parallel,
    Orthogonal,
}

impl Parity {
    pub const ALL: [Parity; 2] = [Parity::Parallel, Parity::Orthogonal];

    pub fn index(self) -> usize {
        match self {
            Parity::Parallel => 0,
            Parity::Orthogonal => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Parity::Parallel => "parallel",
            Parity::Orthogonal => "orthogonal",
        }
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One protocol round as prepared by the verifiers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSpec {
    basis: Basis,
    parity: Parity,
    /// Which basis state leads: for parallel rounds both qubits carry the
    /// flipped-or-not first state; for orthogonal rounds this decides which
    /// photon carries which of the two states.
    flipped: bool,
}

impl RoundSpec {
    pub fn new(basis: Basis, parity: Parity, flipped: bool) -> Self {
        Self {
            basis,
            parity,
            flipped,
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn flipped(&self) -> bool {
        self.flipped
    }

    /// The encoded qubit pair (V0's photon, V1's photon).
    pub fn qubits(&self) -> (PolarizationQubit, PolarizationQubit) {
        let (first, second) = self.basis.states();
        match (self.parity, self.flipped) {
            (Parity::Parallel, false) => (first, first),
            (Parity::Parallel, true) => (second, second),
            (Parity::Orthogonal, false) => (first, second),
            (Parity::Orthogonal, true) => (second, first),
        }
    }
}

/// The prover's classical response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProverAnswer {
    Zero,
    One,
    Inconclusive,
}

impl ProverAnswer {
    pub fn index(self) -> usize {
        match self {
            ProverAnswer::Zero => 0,
            ProverAnswer::One => 1,
            ProverAnswer::Inconclusive => 2,
        }
    }

    pub fn is_conclusive(self) -> bool {
        self != ProverAnswer::Inconclusive
    }

    /// The answer a prover should give for this parity.
    pub fn correct_for(parity: Parity) -> ProverAnswer {
        match parity {
            Parity::Parallel => ProverAnswer::Zero,
            Parity::Orthogonal => ProverAnswer::One,
        }
    }
}

impl std::fmt::Display for ProverAnswer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProverAnswer::Zero => f.write_str("0"),
            ProverAnswer::One => f.write_str("1"),
            ProverAnswer::Inconclusive => f.write_str("-"),
        }
    }
}

/// A point in the one-dimensional protocol space-time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimePoint {
    pub x_m: f64,
    pub t_s: f64,
}

impl SpaceTimePoint {
    /// Whether a signal at `speed_m_per_s` (at most c) leaving this event
    /// can reach `other`.
    pub fn can_reach(&self, other: &SpaceTimePoint, speed_m_per_s: f64) -> bool {
        let dt = other.t_s - self.t_s;
        dt >= 0.0 && (other.x_m - self.x_m).abs() <= speed_m_per_s * dt
    }
}

/// Draw one round: basis uniform over the enabled set, parity a fair coin,
/// and the state assignment another fair coin.
pub fn draw_round<R: Rng>(rng: &mut R, enabled_bases: &[Basis]) -> Result<RoundSpec> {
    if enabled_bases.is_empty() {
        return Err(Error::EmptyBasisSet);
    }
    let basis = enabled_bases[rng.random_range(0..enabled_bases.len())];
    let parity = if rng.random_bool(0.5) {
        Parity::Parallel
    } else {
        Parity::Orthogonal
    };
    let flipped = rng.random_bool(0.5);
    Ok(RoundSpec::new(basis, parity, flipped))
}

/// The prover's answer map: same-side coincidences (AB, CD) mean bunching
/// and `z = 0`; cross coincidences mean `z = 1`; anything but exactly two
/// distinct clicks is inconclusive.
pub fn answer_from_pattern(pattern: ClickPattern) -> ProverAnswer {
    if pattern.cardinality() != 2 {
        return ProverAnswer::Inconclusive;
    }
    let same_ab = pattern.contains(Detector::A) && pattern.contains(Detector::B);
    let same_cd = pattern.contains(Detector::C) && pattern.contains(Detector::D);
    if same_ab || same_cd {
        ProverAnswer::Zero
    } else {
        ProverAnswer::One
    }
}

/// Answers as received by the two verifiers, with arrival times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceivedRound {
    pub answer_v0: ProverAnswer,
    pub answer_v1: ProverAnswer,
    pub t_arrival_v0_s: f64,
    pub t_arrival_v1_s: f64,
}

/// Outcome of the per-round verifier check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundCheck {
    pub answers_match: bool,
    pub v0_on_time: bool,
    pub v1_on_time: bool,
}

impl RoundCheck {
    pub fn passed(&self) -> bool {
        self.answers_match && self.v0_on_time && self.v1_on_time
    }
}

/// Per-verifier response deadlines for a prover at the claimed position:
/// send time + time of flight to the prover + processing + time of flight
/// back + tolerance. Time zero is when the earlier verifier sends; both
/// photons reach the claimed position at `t_meet`.
///
/// Deadlines and [`prover_response_times`] share the same expression shape,
/// so an honest prover meets its deadline exactly even at zero tolerance.
pub fn response_deadlines(geometry: &Geometry) -> (f64, f64) {
    let c = geometry.signal_speed_m_per_s;
    let d0 = geometry.distance_to_prover(Arm::V0);
    let d1 = geometry.distance_to_prover(Arm::V1);
    let base = d0.max(d1) / c + geometry.processing_time_s;
    (
        base + d0 / c + geometry.timing_tolerance_s,
        base + d1 / c + geometry.timing_tolerance_s,
    )
}

/// Arrival times of the answers at the verifiers for a prover that actually
/// sits at `actual_x_m` while the verifiers time their photons for the
/// claimed position. The prover measures once both photons have reached it.
pub fn prover_response_times(geometry: &Geometry, actual_x_m: f64) -> (f64, f64) {
    let c = geometry.signal_speed_m_per_s;
    let d0 = geometry.distance_to_prover(Arm::V0);
    let d1 = geometry.distance_to_prover(Arm::V1);
    let base = d0.max(d1) / c + geometry.processing_time_s;
    // extra wait relative to the planned meeting, from the displacement
    let return0 = (actual_x_m - geometry.x_v0_m).abs();
    let return1 = (geometry.x_v1_m - actual_x_m).abs();
    let wait = ((return0 - d0) / c).max((return1 - d1) / c).max(0.0);
    (base + wait + return0 / c, base + wait + return1 / c)
}

/// Step-3 round check: both verifiers received identical answers and each
/// arrival met its deadline.
pub fn round_check(received: &ReceivedRound, geometry: &Geometry) -> RoundCheck {
    let (deadline_v0, deadline_v1) = response_deadlines(geometry);
    RoundCheck {
        answers_match: received.answer_v0 == received.answer_v1,
        v0_on_time: received.t_arrival_v0_s <= deadline_v0,
        v1_on_time: received.t_arrival_v1_s <= deadline_v1,
    }
}

/// Probabilities of the three answers for one parity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnswerDistribution {
    pub zero: f64,
    pub one: f64,
    pub inconclusive: f64,
}

impl AnswerDistribution {
    pub fn probability(&self, answer: ProverAnswer) -> f64 {
        match answer {
            ProverAnswer::Zero => self.zero,
            ProverAnswer::One => self.one,
            ProverAnswer::Inconclusive => self.inconclusive,
        }
    }

    /// P(0 | conclusive).
    pub fn zero_given_conclusive(&self) -> f64 {
        self.zero / (self.zero + self.one)
    }
}

/// The ideal-source, lossless answer distribution per parity: orthogonal
/// qubits never bunch, so all six coincidences are equally probable and the
/// same-detector chance is 1/4; parallel qubits always bunch, doubling the
/// inconclusive chance and forbidding cross coincidences.
pub fn theoretical_distribution(parity: Parity) -> AnswerDistribution {
    match parity {
        Parity::Orthogonal => AnswerDistribution {
            inconclusive: 0.25,
            zero: 0.75 * (1.0 / 3.0),
            one: 0.75 * (2.0 / 3.0),
        },
        Parity::Parallel => AnswerDistribution {
            inconclusive: 0.5,
            zero: 0.5,
            one: 0.0,
        },
    }
}

/// The model answer distribution for one parity on a given setup, from the
/// exact engine.
pub fn model_distribution(
    source: &SourceParams,
    setup: &SetupConfig,
    parity: Parity,
) -> Result<AnswerDistribution> {
    let round = RoundSpec::new(Basis::Hv, parity, false);
    let dist = optics::exact_outcome_distribution(source, setup, &round)?;
    let mut acc = [0.0_f64; 3];
    for (pattern, p) in dist.iter() {
        acc[answer_from_pattern(pattern).index()] += p;
    }
    Ok(AnswerDistribution {
        zero: acc[0],
        one: acc[1],
        inconclusive: acc[2],
    })
}

/// One transcript row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranscriptEntry {
    pub round: u64,
    pub basis: Basis,
    pub parity: Parity,
    pub flipped: bool,
    pub pattern: ClickPattern,
    pub answer: ProverAnswer,
    pub t_arrival_v0_s: f64,
    pub t_arrival_v1_s: f64,
}

impl TranscriptEntry {
    pub fn round_spec(&self) -> RoundSpec {
        RoundSpec::new(self.basis, self.parity, self.flipped)
    }

    pub fn received(&self) -> ReceivedRound {
        ReceivedRound {
            answer_v0: self.answer,
            answer_v1: self.answer,
            t_arrival_v0_s: self.t_arrival_v0_s,
            t_arrival_v1_s: self.t_arrival_v1_s,
        }
    }

    pub const CSV_HEADER: &'static str = "round,basis,parity,pattern,z,t_v0,t_v1";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.round,
            self.basis,
            self.parity,
            self.pattern,
            self.answer,
            self.t_arrival_v0_s,
            self.t_arrival_v1_s
        )
    }
}

/// A full protocol transcript in round order.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TranscriptEntry::CSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&e.to_csv_row());
            out.push('\n');
        }
        out
    }
}

/// Answer counts by (parity, answer).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnswerCounts {
    counts: [[u64; 3]; 2],
}

impl AnswerCounts {
    pub fn record(&mut self, parity: Parity, answer: ProverAnswer) {
        self.counts[parity.index()][answer.index()] += 1;
    }

    pub fn merge(&mut self, other: &AnswerCounts) {
        for p in 0..2 {
            for a in 0..3 {
                self.counts[p][a] += other.counts[p][a];
            }
        }
    }

    pub fn count(&self, parity: Parity, answer: ProverAnswer) -> u64 {
        self.counts[parity.index()][answer.index()]
    }

    pub fn rounds(&self, parity: Parity) -> u64 {
        self.counts[parity.index()].iter().sum()
    }

    pub fn conclusive(&self, parity: Parity) -> u64 {
        self.count(parity, ProverAnswer::Zero) + self.count(parity, ProverAnswer::One)
    }

    pub fn total_rounds(&self) -> u64 {
        self.rounds(Parity::Parallel) + self.rounds(Parity::Orthogonal)
    }
}

/// Parity-balanced conclusive correctness: the mean of P(0 | parallel,
/// conclusive) and P(1 | orthogonal, conclusive), i.e. the per-round
/// probability of a correct conclusive answer under the protocol's fair
/// parity draw. 5/6 for an ideal lossless honest prover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledCorrectness {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Verifier-side statistics of a protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub counts: AnswerCounts,
    pub p0_given_parallel_conclusive: WilsonInterval,
    pub p1_given_orthogonal_conclusive: WilsonInterval,
    pub inconclusive_given_parallel: WilsonInterval,
    pub inconclusive_given_orthogonal: WilsonInterval,
    pub pooled_conclusive_correctness: PooledCorrectness,
    /// True iff the lower bound of the pooled conclusive correctness exceeds
    /// the LOCC limit of 2/3.
    pub secure_against_locc: bool,
}

impl VerificationReport {
    pub fn from_counts(counts: AnswerCounts) -> Self {
        let p0_par = wilson_interval(
            counts.count(Parity::Parallel, ProverAnswer::Zero),
            counts.conclusive(Parity::Parallel),
            Z_95,
        );
        let p1_perp = wilson_interval(
            counts.count(Parity::Orthogonal, ProverAnswer::One),
            counts.conclusive(Parity::Orthogonal),
            Z_95,
        );
        let incl_par = wilson_interval(
            counts.count(Parity::Parallel, ProverAnswer::Inconclusive),
            counts.rounds(Parity::Parallel),
            Z_95,
        );
        let incl_perp = wilson_interval(
            counts.count(Parity::Orthogonal, ProverAnswer::Inconclusive),
            counts.rounds(Parity::Orthogonal),
            Z_95,
        );
        let pooled = PooledCorrectness {
            estimate: 0.5 * (p0_par.p_hat + p1_perp.p_hat),
            lower: 0.5 * (p0_par.lower + p1_perp.lower),
            upper: 0.5 * (p0_par.upper + p1_perp.upper),
        };
        let secure = pooled.lower > LOCC_BOUND;
        Self {
            counts,
            p0_given_parallel_conclusive: p0_par,
            p1_given_orthogonal_conclusive: p1_perp,
            inconclusive_given_parallel: incl_par,
            inconclusive_given_orthogonal: incl_perp,
            pooled_conclusive_correctness: pooled,
            secure_against_locc: secure,
        }
    }

    /// Structured text rendering with all estimates and intervals.
    pub fn render_text(&self) -> String {
        let c = &self.counts;
        let mut out = String::new();
        out.push_str("verification report\n");
        out.push_str(&format!("rounds                      = {}\n", c.total_rounds()));
        for parity in Parity::ALL {
            out.push_str(&format!(
                "rounds[{:<10}]          = {} (conclusive {})\n",
                parity.label(),
                c.rounds(parity),
                c.conclusive(parity)
            ));
        }
        out.push_str(&format!(
            "P(0 | parallel, concl.)     = {}\n",
            self.p0_given_parallel_conclusive
        ));
        out.push_str(&format!(
            "P(1 | orthogonal, concl.)   = {}\n",
            self.p1_given_orthogonal_conclusive
        ));
        out.push_str(&format!(
            "P(inconcl. | parallel)      = {}\n",
            self.inconclusive_given_parallel
        ));
        out.push_str(&format!(
            "P(inconcl. | orthogonal)    = {}\n",
            self.inconclusive_given_orthogonal
        ));
        out.push_str(&format!(
            "pooled concl. correctness   = {:.4} [{:.4}, {:.4}]\n",
            self.pooled_conclusive_correctness.estimate,
            self.pooled_conclusive_correctness.lower,
            self.pooled_conclusive_correctness.upper
        ));
        out.push_str(&format!(
            "secure against LOCC (> 2/3) = {}\n",
            self.secure_against_locc
        ));
        out
    }
}

/// Acceptance thresholds for [`verify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyPolicy {
    /// Minimum conclusive rounds per parity before a verdict is meaningful.
    pub min_conclusive: u64,
    /// Clause (i): the lower bound of P(0 | parallel, concl.) must exceed this.
    pub locc_threshold: f64,
    /// Clause (ii): allowed distance between the P(1 | orthogonal, concl.)
    /// interval and the theoretical 2/3.
    pub orthogonal_margin: f64,
    /// Clause (iii): allowed absolute deviation of the inconclusive rates
    /// from their expected values.
    pub inconclusive_band: f64,
    pub expected_inconclusive_parallel: f64,
    pub expected_inconclusive_orthogonal: f64,
}

impl VerifyPolicy {
    /// Policy for an ideal lossless experiment.
    pub fn ideal() -> Self {
        Self {
            min_conclusive: 100,
            locc_threshold: LOCC_BOUND,
            orthogonal_margin: 0.05,
            inconclusive_band: 0.03,
            expected_inconclusive_parallel: theoretical_distribution(Parity::Parallel)
                .inconclusive,
            expected_inconclusive_orthogonal: theoretical_distribution(Parity::Orthogonal)
                .inconclusive,
        }
    }

    /// Policy with inconclusive-rate expectations taken from the exact model
    /// of the given source and setup.
    pub fn for_model(source: &SourceParams, setup: &SetupConfig) -> Result<Self> {
        let par = model_distribution(source, setup, Parity::Parallel)?;
        let perp = model_distribution(source, setup, Parity::Orthogonal)?;
        Ok(Self {
            expected_inconclusive_parallel: par.inconclusive,
            expected_inconclusive_orthogonal: perp.inconclusive,
            ..Self::ideal()
        })
    }
}

/// A violated acceptance clause.
#[derive(Debug, Clone, PartialEq)]
pub enum VerifyFailure {
    /// Clause (i): conclusive parallel correctness not above the LOCC bound.
    ParallelCorrectnessNotAboveLoccBound { lower: f64, threshold: f64 },
    /// Clause (ii): orthogonal conclusive statistics away from 2/3.
    OrthogonalRatioOffTheory { interval: WilsonInterval, margin: f64 },
    /// Clause (iii): an inconclusive rate outside its policy band.
    InconclusiveRateOutOfBand {
        parity: Parity,
        observed: f64,
        expected: f64,
        band: f64,
    },
}

impl std::fmt::Display for VerifyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VerifyFailure::ParallelCorrectnessNotAboveLoccBound { lower, threshold } => write!(
                f,
                "clause (i): P(0|parallel,concl.) lower bound {lower:.4} does not exceed {threshold:.4}"
            ),
            VerifyFailure::OrthogonalRatioOffTheory { interval, margin } => write!(
                f,
                "clause (ii): P(1|orthogonal,concl.) interval [{:.4}, {:.4}] misses 2/3 by more than {margin}",
                interval.lower, interval.upper
            ),
            VerifyFailure::InconclusiveRateOutOfBand {
                parity,
                observed,
                expected,
                band,
            } => write!(
                f,
                "clause (iii): P(inconcl.|{parity}) = {observed:.4} outside {expected:.4} ± {band}"
            ),
        }
    }
}

/// The verifiers' final decision.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Accept,
    Reject(Vec<VerifyFailure>),
    /// Too few conclusive rounds for a meaningful decision.
    Indeterminate { conclusive: u64, required: u64 },
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Accept => f.write_str("accept"),
            Verdict::Reject(reasons) => {
                write!(f, "reject")?;
                for reason in reasons {
                    write!(f, "\n  {reason}")?;
                }
                Ok(())
            }
            Verdict::Indeterminate { conclusive, required } => write!(
                f,
                "indeterminate ({conclusive} conclusive rounds, {required} required)"
            ),
        }
    }
}

/// Step-4 verification: accept iff the parallel conclusive correctness is
/// secure, the orthogonal statistics follow theory, and inconclusive rates
/// sit inside the policy bands. Rejections list every violated clause.
pub fn verify(report: &VerificationReport, policy: &VerifyPolicy) -> Verdict {
    let conclusive = report
        .counts
        .conclusive(Parity::Parallel)
        .min(report.counts.conclusive(Parity::Orthogonal));
    if conclusive < policy.min_conclusive {
        return Verdict::Indeterminate {
            conclusive,
            required: policy.min_conclusive,
        };
    }

    let mut failures = Vec::new();
    if report.p0_given_parallel_conclusive.lower <= policy.locc_threshold {
        failures.push(VerifyFailure::ParallelCorrectnessNotAboveLoccBound {
            lower: report.p0_given_parallel_conclusive.lower,
            threshold: policy.locc_threshold,
        });
    }

    let perp = &report.p1_given_orthogonal_conclusive;
    let miss = if perp.lower > LOCC_BOUND {
        perp.lower - LOCC_BOUND
    } else if perp.upper < LOCC_BOUND {
        LOCC_BOUND - perp.upper
    } else {
        0.0
    };
    if miss > policy.orthogonal_margin {
        failures.push(VerifyFailure::OrthogonalRatioOffTheory {
            interval: *perp,
            margin: policy.orthogonal_margin,
        });
    }

    for (parity, interval, expected) in [
        (
            Parity::Parallel,
            &report.inconclusive_given_parallel,
            policy.expected_inconclusive_parallel,
        ),
        (
            Parity::Orthogonal,
            &report.inconclusive_given_orthogonal,
            policy.expected_inconclusive_orthogonal,
        ),
    ] {
        if (interval.p_hat - expected).abs() > policy.inconclusive_band {
            failures.push(VerifyFailure::InconclusiveRateOutOfBand {
                parity,
                observed: interval.p_hat,
                expected,
                band: policy.inconclusive_band,
            });
        }
    }

    if failures.is_empty() {
        Verdict::Accept
    } else {
        Verdict::Reject(failures)
    }
}

/// Everything fixed across rounds, precomputed once.
struct RoundSimulator {
    net: optics::Network,
    p2: f64,
    visibility: f64,
    enabled_bases: Vec<Basis>,
    arrival_times: (f64, f64),
}

impl RoundSimulator {
    fn new(source: &SourceParams, setup: &SetupConfig, enabled_bases: &[Basis]) -> Result<Self> {
        if enabled_bases.is_empty() {
            return Err(Error::EmptyBasisSet);
        }
        Ok(Self {
            net: optics::Network::from_config(setup),
            p2: source.two_photon_probability()?,
            visibility: source.interferometric_visibility(),
            enabled_bases: enabled_bases.to_vec(),
            arrival_times: prover_response_times(&setup.geometry, setup.geometry.x_prover_m),
        })
    }

    fn simulate(&self, round_index: u64, master_seed: u64) -> TranscriptEntry {
        let mut rng = round_stream(master_seed, round_index);
        let spec = draw_round(&mut rng, &self.enabled_bases).expect("nonempty basis set");
        // parallel qubits are identical, orthogonal ones have zero overlap
        let pair_overlap = match spec.parity() {
            Parity::Parallel => self.visibility,
            Parity::Orthogonal => 0.0,
        };
        let pattern = optics::sample_internal(&self.net, self.p2, pair_overlap, &mut rng);
        TranscriptEntry {
            round: round_index,
            basis: spec.basis(),
            parity: spec.parity(),
            flipped: spec.flipped(),
            pattern,
            answer: answer_from_pattern(pattern),
            t_arrival_v0_s: self.arrival_times.0,
            t_arrival_v1_s: self.arrival_times.1,
        }
    }
}

const CHUNK_ROUNDS: u64 = 1 << 16;

/// Run `n` honest protocol rounds, streaming transcript entries to `on_entry`
/// in round order, and return the verification report. Rounds are simulated
/// in parallel; results are bit-identical for any thread count because each
/// round owns the stream keyed by `(master_seed, round index)`.
pub fn run_protocol_with<F: FnMut(&TranscriptEntry)>(
    n: u64,
    source: &SourceParams,
    setup: &SetupConfig,
    enabled_bases: &[Basis],
    master_seed: u64,
    mut on_entry: F,
) -> Result<VerificationReport> {
    let sim = RoundSimulator::new(source, setup, enabled_bases)?;
    let mut counts = AnswerCounts::default();
    let mut start = 0u64;
    while start < n {
        let end = (start + CHUNK_ROUNDS).min(n);
        let entries: Vec<TranscriptEntry> = (start..end)
            .into_par_iter()
            .map(|i| sim.simulate(i, master_seed))
            .collect();
        for e in &entries {
            counts.record(e.parity, e.answer);
            on_entry(e);
        }
        start = end;
    }
    Ok(VerificationReport::from_counts(counts))
}

/// As [`run_protocol_with`], returning the full transcript in memory.
pub fn run_protocol(
    n: u64,
    source: &SourceParams,
    setup: &SetupConfig,
    enabled_bases: &[Basis],
    master_seed: u64,
) -> Result<(Transcript, VerificationReport)> {
    let mut transcript = Transcript {
        entries: Vec::with_capacity(n.min(1 << 24) as usize),
    };
    let report = run_protocol_with(n, source, setup, enabled_bases, master_seed, |e| {
        transcript.entries.push(*e)
    })?;
    Ok((transcript, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn answer_map_covers_all_sixteen_patterns() {
        let mut conclusive = 0;
        for pattern in ClickPattern::all() {
            match answer_from_pattern(pattern) {
                ProverAnswer::Inconclusive => assert_ne!(pattern.cardinality(), 2),
                _ => {
                    assert_eq!(pattern.cardinality(), 2);
                    conclusive += 1;
                }
            }
        }
        assert_eq!(conclusive, 6);
    }

    #[test]
    fn answer_map_paper_cases() {
        use Detector::*;
        let p = |ds: &[Detector]| answer_from_pattern(ClickPattern::from_detectors(ds));
        assert_eq!(p(&[A, B]), ProverAnswer::Zero);
        assert_eq!(p(&[C, D]), ProverAnswer::Zero);
        assert_eq!(p(&[B, C]), ProverAnswer::One);
        assert_eq!(p(&[A, C]), ProverAnswer::One);
        assert_eq!(p(&[A, D]), ProverAnswer::One);
        assert_eq!(p(&[B, D]), ProverAnswer::One);
        assert_eq!(p(&[A]), ProverAnswer::Inconclusive);
        assert_eq!(p(&[]), ProverAnswer::Inconclusive);
        assert_eq!(p(&[A, B, C]), ProverAnswer::Inconclusive);
        assert_eq!(p(&[A, B, C, D]), ProverAnswer::Inconclusive);
    }

    #[test]
    fn round_spec_respects_parity() {
        for basis in Basis::ALL {
            for flipped in [false, true] {
                let par = RoundSpec::new(basis, Parity::Parallel, flipped);
                let (q0, q1) = par.qubits();
                assert_abs_diff_eq!(
                    optics::polarization_overlap(&q0, &q1).unwrap(),
                    1.0,
                    epsilon = 1e-12
                );
                let orth = RoundSpec::new(basis, Parity::Orthogonal, flipped);
                let (q0, q1) = orth.qubits();
                assert_abs_diff_eq!(
                    optics::polarization_overlap(&q0, &q1).unwrap(),
                    0.0,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn theoretical_distribution_matches_expected_table() {
        let perp = theoretical_distribution(Parity::Orthogonal);
        assert_abs_diff_eq!(perp.inconclusive, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(perp.zero_given_conclusive(), 1.0 / 3.0, epsilon = 1e-15);
        let par = theoretical_distribution(Parity::Parallel);
        assert_abs_diff_eq!(par.inconclusive, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(par.zero_given_conclusive(), 1.0, epsilon = 1e-15);
        for p in Parity::ALL {
            let d = theoretical_distribution(p);
            assert_abs_diff_eq!(d.zero + d.one + d.inconclusive, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn draw_round_is_deterministic_and_validates() {
        let mut rng = round_stream(3, 0);
        assert!(matches!(
            draw_round(&mut rng, &[]),
            Err(Error::EmptyBasisSet)
        ));
        let a = draw_round(&mut round_stream(3, 17), &[Basis::Hv, Basis::Da]).unwrap();
        let b = draw_round(&mut round_stream(3, 17), &[Basis::Hv, Basis::Da]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn draw_round_frequencies_are_uniform() {
        let n = 100_000u64;
        let mut basis_counts = [0u64; 3];
        let mut parallel = 0u64;
        for i in 0..n {
            let spec = draw_round(&mut round_stream(5, i), &Basis::ALL).unwrap();
            basis_counts[match spec.basis() {
                Basis::Hv => 0,
                Basis::Da => 1,
                Basis::Rl => 2,
            }] += 1;
            if spec.parity() == Parity::Parallel {
                parallel += 1;
            }
        }
        let sigma_basis = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in basis_counts {
            assert!((c as f64 - n as f64 / 3.0).abs() < 5.0 * sigma_basis);
        }
        let sigma_parity = (n as f64 * 0.25).sqrt();
        assert!((parallel as f64 - n as f64 / 2.0).abs() < 5.0 * sigma_parity);
    }

    #[test]
    fn causal_reachability_respects_the_signal_speed() {
        let origin = SpaceTimePoint { x_m: 0.0, t_s: 0.0 };
        let c_eff = 2.04e8;
        assert!(origin.can_reach(&SpaceTimePoint { x_m: 204.0, t_s: 1e-6 }, c_eff));
        assert!(!origin.can_reach(&SpaceTimePoint { x_m: 205.0, t_s: 1e-6 }, c_eff));
        // no reaching into the past
        assert!(!origin.can_reach(&SpaceTimePoint { x_m: 0.0, t_s: -1e-9 }, c_eff));
    }

    #[test]
    fn honest_prover_passes_round_check() {
        // including at zero tolerance
        for tolerance in [1e-9, 0.0] {
            let mut geometry = SetupConfig::paper_setup().geometry;
            geometry.timing_tolerance_s = tolerance;
            let (t0, t1) = prover_response_times(&geometry, geometry.x_prover_m);
            let check = round_check(
                &ReceivedRound {
                    answer_v0: ProverAnswer::Zero,
                    answer_v1: ProverAnswer::Zero,
                    t_arrival_v0_s: t0,
                    t_arrival_v1_s: t1,
                },
                &geometry,
            );
            assert!(check.passed(), "tolerance {tolerance}");
        }
    }

    #[test]
    fn mismatched_answers_fail_round_check() {
        let geometry = SetupConfig::paper_setup().geometry;
        let (t0, t1) = prover_response_times(&geometry, geometry.x_prover_m);
        let check = round_check(
            &ReceivedRound {
                answer_v0: ProverAnswer::Zero,
                answer_v1: ProverAnswer::One,
                t_arrival_v0_s: t0,
                t_arrival_v1_s: t1,
            },
            &geometry,
        );
        assert!(!check.passed());
        assert!(!check.answers_match);
    }

    #[test]
    fn displaced_prover_is_late_at_one_verifier() {
        // 1D time-of-flight oracle: a displacement dx delays the answer at
        // the far verifier by exactly 2 dx / c and leaves the near verifier
        // on schedule.
        let geometry = SetupConfig::paper_setup().geometry;
        let c = geometry.signal_speed_m_per_s;
        let dx = 5.0; // meters, well beyond the 1 ns tolerance (~0.2 m)
        let (honest_t0, honest_t1) = prover_response_times(&geometry, geometry.x_prover_m);
        let (t0, t1) = prover_response_times(&geometry, geometry.x_prover_m + dx);
        assert_abs_diff_eq!(t0 - honest_t0, 2.0 * dx / c, epsilon = 1e-15);
        assert_abs_diff_eq!(t1, honest_t1, epsilon = 1e-15);
        let check = round_check(
            &ReceivedRound {
                answer_v0: ProverAnswer::Zero,
                answer_v1: ProverAnswer::Zero,
                t_arrival_v0_s: t0,
                t_arrival_v1_s: t1,
            },
            &geometry,
        );
        assert!(!check.passed());
        assert!(!check.v0_on_time);
        assert!(check.v1_on_time);
    }

    #[test]
    fn report_conditionals_sum_to_one() {
        let mut counts = AnswerCounts::default();
        for (parity, answer, k) in [
            (Parity::Parallel, ProverAnswer::Zero, 40u64),
            (Parity::Parallel, ProverAnswer::One, 3),
            (Parity::Parallel, ProverAnswer::Inconclusive, 57),
            (Parity::Orthogonal, ProverAnswer::Zero, 25),
            (Parity::Orthogonal, ProverAnswer::One, 50),
            (Parity::Orthogonal, ProverAnswer::Inconclusive, 25),
        ] {
            for _ in 0..k {
                counts.record(parity, answer);
            }
        }
        let report = VerificationReport::from_counts(counts);
        for parity in Parity::ALL {
            let n = counts.rounds(parity) as f64;
            let sum = counts.count(parity, ProverAnswer::Zero) as f64 / n
                + counts.count(parity, ProverAnswer::One) as f64 / n
                + counts.count(parity, ProverAnswer::Inconclusive) as f64 / n;
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
        assert_eq!(report.counts.total_rounds(), 200);
    }

    #[test]
    fn verify_indeterminate_below_min_conclusive() {
        let mut counts = AnswerCounts::default();
        counts.record(Parity::Parallel, ProverAnswer::Zero);
        counts.record(Parity::Orthogonal, ProverAnswer::One);
        let report = VerificationReport::from_counts(counts);
        match verify(&report, &VerifyPolicy::ideal()) {
            Verdict::Indeterminate { conclusive, required } => {
                assert_eq!(conclusive, 1);
                assert_eq!(required, 100);
            }
            other => panic!("expected indeterminate, got {other:?}"),
        }
    }

    #[test]
    fn parallel_transcript_is_identical_across_thread_counts() {
        let setup = SetupConfig::paper_setup();
        let source = setup.source_params().unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                run_protocol(20_000, &source, &setup, &[Basis::Hv], 99).unwrap()
            })
        };
        let (t1, r1) = run(1);
        let (t4, r4) = run(4);
        assert_eq!(r1, r4);
        assert_eq!(t1.entries, t4.entries);
    }
}
