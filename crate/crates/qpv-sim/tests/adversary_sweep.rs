//! Security sanity sweep over the attacker strategy library.

use qpv_sim::adversary::{evaluate_attack, strategy_by_name, strategy_library};
use qpv_sim::config::SetupConfig;
use qpv_sim::protocol::{Basis, Verdict, VerifyFailure, VerifyPolicy};

/// With all three mutually unbiased bases in play, no library strategy beats
/// the 2/3 bound without tripping the inconclusive-rate monitor: loss
/// claiming boosts the conditioned success but is detectable.
#[test]
fn no_strategy_beats_the_bound_undetected() {
    let setup = SetupConfig::ideal_setup();
    let policy = VerifyPolicy::ideal();
    for strategy in strategy_library() {
        let report =
            evaluate_attack(&strategy, 50_000, &setup, &Basis::ALL, 9_000, &policy).unwrap();
        let success = report.guess_success.p_hat;
        let trials = report.guess_success.trials.max(1) as f64;
        let five_sigma = 5.0 * ((2.0 / 3.0) * (1.0 / 3.0) / trials).sqrt();
        let within_bound = success <= 2.0 / 3.0 + five_sigma;
        let loss_flagged = matches!(
            &report.verdict,
            Verdict::Reject(reasons) if reasons
                .iter()
                .any(|r| matches!(r, VerifyFailure::InconclusiveRateOutOfBand { .. }))
        );
        assert!(
            within_bound || loss_flagged,
            "{}: success {success:.4} above bound and not flagged (verdict {:?})",
            strategy.name,
            report.verdict
        );
        // no strategy passes verification with three bases enabled
        assert!(
            !report.accepted(),
            "{} was accepted by the verifier",
            strategy.name
        );
    }
}

/// The loss-claiming signature shows up well before 10^4 rounds under the
/// default policy bands.
#[test]
fn claim_loss_is_detected_at_ten_thousand_rounds() {
    let setup = SetupConfig::ideal_setup();
    let policy = VerifyPolicy::ideal();
    for name in ["claim-loss", "claim-loss-half", "mimic-claim-loss"] {
        let strategy = strategy_by_name(name).unwrap();
        let report =
            evaluate_attack(&strategy, 10_000, &setup, &Basis::ALL, 77, &policy).unwrap();
        match &report.verdict {
            Verdict::Reject(reasons) => assert!(
                reasons
                    .iter()
                    .any(|r| matches!(r, VerifyFailure::InconclusiveRateOutOfBand { .. })),
                "{name}: rejected but not on the inconclusive-rate clause: {reasons:?}"
            ),
            other => panic!("{name}: expected rejection, got {other:?}"),
        }
    }
}
