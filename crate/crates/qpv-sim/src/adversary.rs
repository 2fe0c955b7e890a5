//! LOCC attacker strategies against the SWAP protocol.
//!
//! Two adversaries sit on the line between the verifiers and the claimed
//! prover position. Each intercepts the qubit sent by the verifier closest
//! to them and measures it in a basis drawn from a shared per-round policy;
//! they then exchange one round of classical messages and both emit the same
//! answer. No quantum communication and no shared entanglement.
//!
//! When the guessed basis equals the round basis the two measurement
//! outcomes reveal the parity exactly; otherwise the outcomes are uniformly
//! random and carry no parity information (mutually unbiased bases). The
//! response rules may condition on whether the basis matched, reflecting
//! protocols where basis information becomes public after the quantum
//! phase; that is what enables loss-claiming attacks, and what the
//! verifier's inconclusive-rate monitoring defends against.

use rand::Rng;
use rayon::prelude::*;

use crate::config::{Geometry, SetupConfig};
use crate::error::{Error, Result};
use crate::optics::{polarization_overlap, Arm, PolarizationQubit};
use crate::protocol::{
    draw_round, response_deadlines, theoretical_distribution, AnswerCounts, AnswerDistribution,
    Basis, Parity, ProverAnswer, RoundSpec, VerificationReport, Verdict, VerifyPolicy,
};
use crate::rng::round_stream;
use crate::stats::{wilson_interval, WilsonInterval, Z_95};

/// How the shared measurement basis is chosen each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisPolicy {
    /// Uniform guess over the protocol's enabled bases.
    UniformOverEnabled,
    /// Always the same basis.
    Fixed(Basis),
}

/// Response rule when the guessed basis matched the round basis (parity is
/// then known exactly).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchRule {
    /// Answer the parity directly.
    AnswerParity,
    /// Answer the opposite of the known parity.
    AnswerFlipped,
    /// Sample the honest prover's ideal answer distribution for the known
    /// parity, inconclusive included (statistical mimicry).
    MimicHonest,
    AlwaysZero,
    AlwaysOne,
}

/// Response rule when the guessed basis did not match (outcomes carry no
/// parity information).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MismatchRule {
    /// Guess the parity with a fair coin and answer it.
    FairCoin,
    /// Report inconclusive.
    ClaimLoss,
    /// Report inconclusive with this probability, otherwise a fair coin.
    ClaimLossWithProbability(f64),
    /// Sample the honest answer distribution marginalized over parity.
    MimicMarginal,
    AlwaysZero,
    AlwaysOne,
}

/// A LOCC attack strategy: a basis policy plus the joint response rule.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackerStrategy {
    pub name: &'static str,
    pub basis_policy: BasisPolicy,
    pub on_match: MatchRule,
    pub on_mismatch: MismatchRule,
}

/// The built-in strategy library.
pub fn strategy_library() -> Vec<AttackerStrategy> {
    use BasisPolicy::*;
    use MatchRule::*;
    use MismatchRule::*;
    vec![
        AttackerStrategy {
            name: "intercept3",
            basis_policy: UniformOverEnabled,
            on_match: MimicHonest,
            on_mismatch: FairCoin,
        },
        AttackerStrategy {
            name: "intercept-hv",
            basis_policy: Fixed(Basis::Hv),
            on_match: MimicHonest,
            on_mismatch: FairCoin,
        },
        AttackerStrategy {
            name: "claim-loss",
            basis_policy: UniformOverEnabled,
            on_match: AnswerParity,
            on_mismatch: ClaimLoss,
        },
        AttackerStrategy {
            name: "claim-loss-half",
            basis_policy: UniformOverEnabled,
            on_match: AnswerParity,
            on_mismatch: ClaimLossWithProbability(0.5),
        },
        AttackerStrategy {
            name: "parity-direct",
            basis_policy: UniformOverEnabled,
            on_match: AnswerParity,
            on_mismatch: FairCoin,
        },
        AttackerStrategy {
            name: "mimic-claim-loss",
            basis_policy: UniformOverEnabled,
            on_match: MimicHonest,
            on_mismatch: ClaimLoss,
        },
        AttackerStrategy {
            name: "mimic-marginal",
            basis_policy: UniformOverEnabled,
            on_match: MimicHonest,
            on_mismatch: MismatchRule::MimicMarginal,
        },
        AttackerStrategy {
            name: "always-zero",
            basis_policy: UniformOverEnabled,
            on_match: MatchRule::AlwaysZero,
            on_mismatch: MismatchRule::AlwaysZero,
        },
        AttackerStrategy {
            name: "always-one",
            basis_policy: UniformOverEnabled,
            on_match: MatchRule::AlwaysOne,
            on_mismatch: MismatchRule::AlwaysOne,
        },
        AttackerStrategy {
            name: "contrarian",
            basis_policy: UniformOverEnabled,
            on_match: AnswerFlipped,
            on_mismatch: FairCoin,
        },
    ]
}

/// Look up a library strategy by name.
pub fn strategy_by_name(name: &str) -> Result<AttackerStrategy> {
    let library = strategy_library();
    library
        .iter()
        .find(|s| s.name == name)
        .cloned()
        .ok_or_else(|| Error::UnknownStrategy {
            name: name.to_string(),
            available: library
                .iter()
                .map(|s| s.name)
                .collect::<Vec<_>>()
                .join(", "),
        })
}

/// Adversary positions on the line, strictly between each verifier and the
/// claimed prover position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversaryPositions {
    pub x_a0_m: f64,
    pub x_a1_m: f64,
}

impl AdversaryPositions {
    /// Midpoints of the two verifier-prover segments.
    pub fn midpoints(geometry: &Geometry) -> Self {
        Self {
            x_a0_m: 0.5 * (geometry.x_v0_m + geometry.x_prover_m),
            x_a1_m: 0.5 * (geometry.x_prover_m + geometry.x_v1_m),
        }
    }
}

/// Answer arrival times at the two verifiers for the intercept attack: each
/// adversary measures when the photon passes, forwards its record to the
/// partner, and each answers its own verifier once both records are in hand.
pub fn attack_arrival_times(geometry: &Geometry, positions: &AdversaryPositions) -> (f64, f64) {
    let c = geometry.signal_speed_m_per_s;
    let d0 = geometry.distance_to_prover(Arm::V0);
    let d1 = geometry.distance_to_prover(Arm::V1);
    let t_meet = d0.max(d1) / c;
    let send0 = t_meet - d0 / c;
    let send1 = t_meet - d1 / c;
    let intercept0 = send0 + (positions.x_a0_m - geometry.x_v0_m) / c;
    let intercept1 = send1 + (geometry.x_v1_m - positions.x_a1_m) / c;
    let exchange = (positions.x_a1_m - positions.x_a0_m) / c;
    let ready0 = intercept0.max(intercept1 + exchange);
    let ready1 = intercept1.max(intercept0 + exchange);
    (
        ready0 + (positions.x_a0_m - geometry.x_v0_m) / c,
        ready1 + (geometry.x_v1_m - positions.x_a1_m) / c,
    )
}

/// Whether one classical exchange fits within the round deadlines.
pub fn attack_timing_feasible(geometry: &Geometry, positions: &AdversaryPositions) -> bool {
    let (t0, t1) = attack_arrival_times(geometry, positions);
    let (d0, d1) = response_deadlines(geometry);
    t0 <= d0 && t1 <= d1
}

/// One adversary round outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversaryResponse {
    /// The common answer both adversaries send.
    pub answer: ProverAnswer,
    /// The parity the adversaries would bet on (None if they abstain).
    pub parity_guess: Option<Parity>,
    /// Whether the classical exchange met the round deadline.
    pub timing_feasible: bool,
}

/// Born-rule measurement of a qubit in a basis; returns the index of the
/// observed basis state.
fn measure_in_basis<R: Rng>(qubit: &PolarizationQubit, basis: Basis, rng: &mut R) -> usize {
    let (first, _second) = basis.states();
    let p_first = polarization_overlap(&first, qubit).expect("protocol states are normalized");
    if rng.random_bool(p_first.clamp(0.0, 1.0)) {
        0
    } else {
        1
    }
}

fn sample_answer<R: Rng>(dist: &AnswerDistribution, rng: &mut R) -> ProverAnswer {
    let x: f64 = rng.random();
    if x < dist.zero {
        ProverAnswer::Zero
    } else if x < dist.zero + dist.one {
        ProverAnswer::One
    } else {
        ProverAnswer::Inconclusive
    }
}

fn answer_for(parity: Parity) -> ProverAnswer {
    ProverAnswer::correct_for(parity)
}

/// Run one round of the intercept-measure attack: both adversaries measure
/// in a shared guessed basis, exchange their records, and emit a common
/// response.
pub fn intercept_measure_attack<R: Rng>(
    strategy: &AttackerStrategy,
    enabled_bases: &[Basis],
    round: &RoundSpec,
    geometry: &Geometry,
    positions: &AdversaryPositions,
    rng: &mut R,
) -> Result<AdversaryResponse> {
    if enabled_bases.is_empty() {
        return Err(Error::EmptyBasisSet);
    }
    let measured_basis = match strategy.basis_policy {
        BasisPolicy::UniformOverEnabled => enabled_bases[rng.random_range(0..enabled_bases.len())],
        BasisPolicy::Fixed(b) => b,
    };
    let (q0, q1) = round.qubits();
    let o0 = measure_in_basis(&q0, measured_basis, rng);
    let o1 = measure_in_basis(&q1, measured_basis, rng);
    let timing_feasible = attack_timing_feasible(geometry, positions);

    let matched = measured_basis == round.basis();
    let (answer, parity_guess) = if matched {
        // same basis: equal outcomes mean parallel qubits, different mean
        // orthogonal
        let inferred = if o0 == o1 {
            Parity::Parallel
        } else {
            Parity::Orthogonal
        };
        let answer = match strategy.on_match {
            MatchRule::AnswerParity => answer_for(inferred),
            MatchRule::AnswerFlipped => match inferred {
                Parity::Parallel => ProverAnswer::One,
                Parity::Orthogonal => ProverAnswer::Zero,
            },
            MatchRule::MimicHonest => sample_answer(&theoretical_distribution(inferred), rng),
            MatchRule::AlwaysZero => ProverAnswer::Zero,
            MatchRule::AlwaysOne => ProverAnswer::One,
        };
        (answer, Some(inferred))
    } else {
        match strategy.on_mismatch {
            MismatchRule::FairCoin => {
                let guess = if rng.random_bool(0.5) {
                    Parity::Parallel
                } else {
                    Parity::Orthogonal
                };
                (answer_for(guess), Some(guess))
            }
            MismatchRule::ClaimLoss => (ProverAnswer::Inconclusive, None),
            MismatchRule::ClaimLossWithProbability(p) => {
                if rng.random_bool(p.clamp(0.0, 1.0)) {
                    (ProverAnswer::Inconclusive, None)
                } else {
                    let guess = if rng.random_bool(0.5) {
                        Parity::Parallel
                    } else {
                        Parity::Orthogonal
                    };
                    (answer_for(guess), Some(guess))
                }
            }
            MismatchRule::MimicMarginal => {
                let par = theoretical_distribution(Parity::Parallel);
                let perp = theoretical_distribution(Parity::Orthogonal);
                let marginal = AnswerDistribution {
                    zero: 0.5 * (par.zero + perp.zero),
                    one: 0.5 * (par.one + perp.one),
                    inconclusive: 0.5 * (par.inconclusive + perp.inconclusive),
                };
                let answer = sample_answer(&marginal, rng);
                let guess = match answer {
                    ProverAnswer::Zero => Some(Parity::Parallel),
                    ProverAnswer::One => Some(Parity::Orthogonal),
                    ProverAnswer::Inconclusive => None,
                };
                (answer, guess)
            }
            MismatchRule::AlwaysZero => (ProverAnswer::Zero, Some(Parity::Parallel)),
            MismatchRule::AlwaysOne => (ProverAnswer::One, Some(Parity::Orthogonal)),
        }
    };
    Ok(AdversaryResponse {
        answer,
        parity_guess,
        timing_feasible,
    })
}

/// The analytic success bound of the intercept strategy over `k` enabled
/// mutually unbiased bases: `(1/k) (1 + (k-1)/2)`.
///
/// For k = 3 this is the LOCC limit 2/3. The k = 2 value extrapolates the
/// same counting argument; only the three-basis case is backed by a proof in
/// the literature.
pub fn analytic_locc_bound(basis_count: usize) -> Result<f64> {
    if !(1..=3).contains(&basis_count) {
        return Err(Error::BasisCountOutOfRange(basis_count));
    }
    let k = basis_count as f64;
    Ok((1.0 + (k - 1.0) / 2.0) / k)
}

/// Evaluation of one attack strategy over many rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub strategy: &'static str,
    pub rounds: u64,
    /// The statistics the verifiers see, over the adversary answers.
    pub answer_report: VerificationReport,
    /// Parity-guess correctness, conditioned on the adversaries committing
    /// to a guess. For strategies that answer whenever they guess this is
    /// the conclusive-conditioned correctness; mimicking strategies may
    /// deliberately answer inconclusive while still knowing the parity.
    pub guess_success: WilsonInterval,
    pub guess_success_parallel: WilsonInterval,
    pub guess_success_orthogonal: WilsonInterval,
    /// Analytic intercept bound for the enabled basis count.
    pub analytic_bound: f64,
    pub timing_always_feasible: bool,
    pub verdict: Verdict,
}

impl AttackReport {
    pub fn accepted(&self) -> bool {
        self.verdict.is_accept()
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str("attack report\n");
        out.push_str(&format!("strategy                    = {}\n", self.strategy));
        out.push_str(&format!("rounds                      = {}\n", self.rounds));
        out.push_str(&format!(
            "guess success               = {}\n",
            self.guess_success
        ));
        out.push_str(&format!(
            "success | parallel          = {}\n",
            self.guess_success_parallel
        ));
        out.push_str(&format!(
            "success | orthogonal        = {}\n",
            self.guess_success_orthogonal
        ));
        out.push_str(&format!(
            "analytic intercept bound    = {:.6}\n",
            self.analytic_bound
        ));
        out.push_str(&format!(
            "timing feasible             = {}\n",
            self.timing_always_feasible
        ));
        out.push_str(&format!(
            "verifier verdict            = {}\n",
            match &self.verdict {
                Verdict::Accept => "accept (attack succeeded)".to_string(),
                Verdict::Reject(reasons) => format!(
                    "reject ({})",
                    reasons
                        .iter()
                        .map(|r| r.to_string())
                        .collect::<Vec<_>>()
                        .join("; ")
                ),
                Verdict::Indeterminate { conclusive, required } =>
                    format!("indeterminate ({conclusive}/{required} conclusive rounds)"),
            }
        ));
        out.push('\n');
        out.push_str(&self.answer_report.render_text());
        out
    }
}

#[derive(Default, Clone, Copy)]
struct AttackTally {
    counts: AnswerCounts,
    correct: [u64; 2],
    guessed: [u64; 2],
    all_feasible: bool,
}

/// Substitute the adversaries for the prover over `n` rounds and evaluate
/// what the verifiers would conclude.
pub fn evaluate_attack(
    strategy: &AttackerStrategy,
    n: u64,
    setup: &SetupConfig,
    enabled_bases: &[Basis],
    master_seed: u64,
    policy: &VerifyPolicy,
) -> Result<AttackReport> {
    if enabled_bases.is_empty() {
        return Err(Error::EmptyBasisSet);
    }
    let geometry = setup.geometry;
    let positions = AdversaryPositions::midpoints(&geometry);

    const CHUNK: u64 = 1 << 16;
    let mut tally = AttackTally {
        all_feasible: true,
        ..Default::default()
    };
    let mut start = 0u64;
    while start < n {
        let end = (start + CHUNK).min(n);
        let partial: Vec<(Parity, AdversaryResponse)> = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut rng = round_stream(master_seed, i);
                let round = draw_round(&mut rng, enabled_bases).expect("nonempty basis set");
                let response = intercept_measure_attack(
                    strategy,
                    enabled_bases,
                    &round,
                    &geometry,
                    &positions,
                    &mut rng,
                )
                .expect("nonempty basis set");
                (round.parity(), response)
            })
            .collect();
        for (parity, response) in partial {
            tally.counts.record(parity, response.answer);
            tally.all_feasible &= response.timing_feasible;
            if let Some(guess) = response.parity_guess {
                tally.guessed[parity.index()] += 1;
                if guess == parity {
                    tally.correct[parity.index()] += 1;
                }
            }
        }
        start = end;
    }

    let answer_report = VerificationReport::from_counts(tally.counts);
    let verdict = crate::protocol::verify(&answer_report, policy);
    Ok(AttackReport {
        strategy: strategy.name,
        rounds: n,
        guess_success: wilson_interval(
            tally.correct[0] + tally.correct[1],
            tally.guessed[0] + tally.guessed[1],
            Z_95,
        ),
        guess_success_parallel: wilson_interval(
            tally.correct[Parity::Parallel.index()],
            tally.guessed[Parity::Parallel.index()],
            Z_95,
        ),
        guess_success_orthogonal: wilson_interval(
            tally.correct[Parity::Orthogonal.index()],
            tally.guessed[Parity::Orthogonal.index()],
            Z_95,
        ),
        analytic_bound: analytic_locc_bound(enabled_bases.len())?,
        timing_always_feasible: tally.all_feasible,
        verdict,
        answer_report,
    })
}
