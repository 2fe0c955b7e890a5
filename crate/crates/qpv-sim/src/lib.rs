//! Simulator and analysis toolkit for the loss-tolerant SWAP quantum
//! position verification protocol.
//!
//! Two verifiers send polarization qubits, randomly parallel or orthogonal
//! in a randomly chosen basis, to a prover, who interferes them on a
//! beamsplitter and watches four threshold detectors behind two further
//! beamsplitters. Same-side coincidences (AB, CD) signal photon bunching and
//! the answer `z = 0`; cross coincidences signal `z = 1`; anything else is
//! inconclusive. Because loss only ever turns rounds inconclusive without
//! biasing the conclusive statistics, the protocol tolerates arbitrary
//! transmission loss, and the verifiers hold the prover's conclusive
//! correctness against the 2/3 ceiling of attackers restricted to local
//! operations and classical communication.
//!
//! The crate provides:
//!
//! - [`optics`]: exact click-pattern distributions and a Monte Carlo sampler
//!   for the prover's three-beamsplitter network, with partial photon
//!   distinguishability, multi-photon contamination, loss, and threshold
//!   detection;
//! - [`source`]: the (g², M) parametrization of an imperfect single-photon
//!   source and the visibility/indistinguishability estimator chain;
//! - [`config`]: ingestion of the experimental characterization (component
//!   transmissions, splitting ratios, detector efficiencies) plus normalized
//!   coincidence bookkeeping;
//! - [`protocol`]: verifier/prover round state machines, space-time round
//!   checks, and statistical verification with Wilson intervals;
//! - [`adversary`]: LOCC intercept strategies and their evaluation against
//!   the analytic success bound.

pub mod adversary;
pub mod config;
pub mod error;
pub mod optics;
pub mod protocol;
pub mod rng;
pub mod source;
pub mod stats;
pub mod sweep;

pub use adversary::{
    analytic_locc_bound, evaluate_attack, intercept_measure_attack, strategy_by_name,
    strategy_library, AdversaryPositions, AttackReport, AttackerStrategy,
};
pub use config::{load_config, CountsTable, Geometry, SetupConfig};
pub use error::{Error, Result};
pub use optics::{
    exact_outcome_distribution, polarization_overlap, sample_outcome, two_photon_bs_distribution,
    Arm, BeamSplitterSpec, ClickPattern, Detector, DetectorSpec, OutcomeDistribution,
    PairRouting, PhotonKind, PhotonRecord, PolarizationQubit,
};
pub use protocol::{
    answer_from_pattern, draw_round, round_check, run_protocol, run_protocol_with,
    theoretical_distribution, verify, Basis, Parity, ProverAnswer, RoundSpec, Transcript,
    TranscriptEntry, Verdict, VerificationReport, VerifyPolicy,
};
pub use source::{
    emission_profile, hom_visibility, indistinguishability_from_visibility,
    two_photon_probability, visibility_from_indistinguishability, HomMeasurement, SourceParams,
};
pub use stats::{wilson_interval, Uncertain, WilsonInterval};
pub use sweep::{run_sweep, SweepGrid, SweepMode, SweepSpec};
