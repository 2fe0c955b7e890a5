//! Statistical and self-consistency tests at the protocol level.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rayon::prelude::*;

use qpv_sim::config::{CountsTable, SetupConfig, DETECTOR_PAIRS};
use qpv_sim::optics::{exact_outcome_distribution, ClickPattern, Detector};
use qpv_sim::protocol::{model_distribution, Basis, Parity, RoundSpec};
use qpv_sim::rng::round_stream;
use qpv_sim::source::SourceParams;
use qpv_sim::Arm;

#[test]
fn wilson_intervals_cover_the_truth() {
    // 1000 resimulations at n = 10^4 on a known-truth config; the 95%
    // interval for P(1 | orthogonal, concl.) = 2/3 must cover at least 93%.
    let setup = SetupConfig::ideal_setup();
    let source = SourceParams::ideal();
    let covered: u32 = (0..1000u64)
        .into_par_iter()
        .map(|seed| {
            let mut counts = qpv_sim::protocol::AnswerCounts::default();
            for i in 0..10_000u64 {
                let mut rng = round_stream(1_000 + seed, i);
                let spec = qpv_sim::draw_round(&mut rng, &[Basis::Hv]).unwrap();
                let pattern =
                    qpv_sim::sample_outcome(&source, &setup, &spec, &mut rng).unwrap();
                counts.record(spec.parity(), qpv_sim::answer_from_pattern(pattern));
            }
            let report = qpv_sim::VerificationReport::from_counts(counts);
            u32::from(report.p1_given_orthogonal_conclusive.contains(2.0 / 3.0))
        })
        .sum();
    assert!(covered >= 930, "coverage {covered}/1000");
}

/// Simulated HOM dip: the first beamsplitter with one effective threshold
/// detector per output port (balanced downstream splitters with equal
/// efficiencies act as one detector per port), normalized coincidences
/// between the two ports for parallel and orthogonal polarizations, then the
/// estimator chain back to M.
fn simulated_m_recovery(g2: f64, m: f64) -> f64 {
    let mut setup = SetupConfig::ideal_setup();
    setup.detector_abs_scale = 0.05; // production-like detection efficiency
    let source = SourceParams::new(g2, m).unwrap();
    let normalized_port_coincidence = |parity: Parity| {
        let round = RoundSpec::new(Basis::Hv, parity, false);
        let dist = exact_outcome_distribution(&source, &setup, &round).unwrap();
        let upper = |p: ClickPattern| p.contains(Detector::A) || p.contains(Detector::B);
        let lower = |p: ClickPattern| p.contains(Detector::C) || p.contains(Detector::D);
        let cc = dist.mass_where(|p| upper(p) && lower(p));
        let s_u = dist.mass_where(upper);
        let s_l = dist.mass_where(lower);
        cc / (s_u * s_l)
    };
    let g_parallel = normalized_port_coincidence(Parity::Parallel);
    let g_orthogonal = normalized_port_coincidence(Parity::Orthogonal);
    let visibility = (g_orthogonal - g_parallel) / g_orthogonal;
    visibility * (1.0 + 2.0 * g2)
}

#[test]
fn estimator_chain_closes_the_loop_with_the_engine() {
    // Self-consistency in the estimators' validity regime (first-order
    // contamination correction): the simulated HOM experiment plus the
    // visibility/indistinguishability chain recovers M within 0.02.
    for g2 in [0.0, 0.002, 0.005, 0.008] {
        for m in [0.3, 0.6, 0.9, 1.0] {
            let recovered = simulated_m_recovery(g2, m);
            assert!(
                (recovered - m).abs() < 0.02,
                "g2={g2}, m={m}: recovered {recovered}"
            );
        }
    }
}

fn conditionals(source: &SourceParams, setup: &SetupConfig, parity: Parity) -> (f64, f64) {
    let d = model_distribution(source, setup, parity).unwrap();
    (d.zero_given_conclusive(), d.inconclusive)
}

#[test]
fn equal_efficiency_loss_leaves_conditionals_unchanged() {
    let source = SourceParams::ideal();
    let reference_parallel = 1.0;
    let reference_orthogonal = 1.0 / 3.0;
    // balanced splitters with equal detector-path efficiencies; arm and
    // splitter losses vary freely
    for (t0, t1, e1) in [(1.0, 1.0, 1.0), (0.7, 0.45, 1.0), (0.477, 0.420, 0.9)] {
        for efficiency in [0.05, 0.2, 0.5, 0.8, 1.0] {
            let mut setup = SetupConfig::ideal_setup();
            setup.arms.v0.switch = t0;
            setup.arms.v1.switch = t1;
            setup.beamsplitters.bs1.excess_transmission = e1;
            setup.detector_abs_scale = efficiency;
            let (p0_par, _) = conditionals(&source, &setup, Parity::Parallel);
            let (p0_perp, _) = conditionals(&source, &setup, Parity::Orthogonal);
            assert_abs_diff_eq!(p0_par, reference_parallel, epsilon = 1e-12);
            assert_abs_diff_eq!(p0_perp, reference_orthogonal, epsilon = 1e-12);
        }
    }
}

#[test]
fn cross_coincidences_vanish_only_for_a_perfect_source() {
    // On a balanced-BS1 network (bunching suppression is exact there), the
    // parallel cross-coincidence mass is zero iff M = 1 and g2 = 0.
    let mut setup = SetupConfig::ideal_setup();
    setup.detector_abs_scale = 0.4;
    setup.arms.v0.switch = 0.7;
    setup.arms.v1.switch = 0.6;
    let cross_mass = |g2: f64, m: f64| {
        let source = SourceParams::new(g2, m).unwrap();
        let round = RoundSpec::new(Basis::Hv, Parity::Parallel, false);
        let dist = exact_outcome_distribution(&source, &setup, &round).unwrap();
        dist.mass_where(|p| {
            p.cardinality() == 2
                && (p.contains(Detector::A) || p.contains(Detector::B))
                && (p.contains(Detector::C) || p.contains(Detector::D))
        })
    };
    for g2 in [0.0, 0.05, 0.224] {
        for m in [0.5, 0.9, 1.0] {
            let mass = cross_mass(g2, m);
            if g2 == 0.0 && m == 1.0 {
                assert!(mass.abs() < 1e-14, "perfect source leaked {mass}");
            } else {
                assert!(mass > 1e-9, "imperfect source (g2={g2}, m={m}) shows no crosses");
            }
        }
    }
}

#[test]
fn orthogonal_normalized_coincidences_are_flat() {
    // 10^7 sampled orthogonal rounds on the measured setup: normalization by
    // singles removes the splitter and efficiency imbalance, leaving all six
    // pair rates equal to within 5% relative.
    let setup = SetupConfig::paper_setup();
    let source = setup.source_params().unwrap();
    let round = RoundSpec::new(Basis::Hv, Parity::Orthogonal, false);
    let n = 10_000_000u64;
    let chunk = 1u64 << 17;
    let mut table = CountsTable::new();
    let mut start = 0u64;
    while start < n {
        let end = (start + chunk).min(n);
        let partials: Vec<CountsTable> = (start..end)
            .into_par_iter()
            .fold(CountsTable::new, |mut acc, i| {
                let mut rng = round_stream(404, i);
                let pattern =
                    qpv_sim::sample_outcome(&source, &setup, &round, &mut rng).unwrap();
                acc.record(pattern);
                acc
            })
            .collect();
        for p in &partials {
            table.merge(p);
        }
        start = end;
    }
    let normalized = table.normalized_coincidences().unwrap();
    let values: Vec<f64> = normalized.iter().map(|(_, v)| *v).collect();
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        max / min < 1.05,
        "normalized spread too wide: {values:?} (ratio {})",
        max / min
    );
    // while the raw coincidences stay visibly imbalanced
    let raw: Vec<f64> = DETECTOR_PAIRS
        .iter()
        .map(|(i, j)| table.coincidences(*i, *j) as f64)
        .collect();
    let raw_ratio = raw.iter().cloned().fold(f64::MIN, f64::max)
        / raw.iter().cloned().fold(f64::MAX, f64::min);
    assert!(raw_ratio > 2.0, "raw spread unexpectedly flat: {raw:?}");
}

/// Solve the 4x4 normal equations of the log-linear singles fit by Gaussian
/// elimination with partial pivoting.
fn solve4(mut m: [[f64; 5]; 4]) -> [f64; 4] {
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        for row in (col + 1)..4 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (k, entry) in m[row].iter_mut().enumerate().skip(col) {
                *entry -= f * pivot_row[k];
            }
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut acc = m[row][4];
        for k in (row + 1)..4 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x
}

#[test]
fn published_normalized_coincidences_regress_through_the_formula() {
    // The published table gives coincidences and normalized coincidences but
    // not the underlying singles. Fit per-detector singles by least squares
    // on log CC_ij - log norm_ij = log SC_i + log SC_j, then check the
    // normalization code path reproduces the published values to within the
    // published rounding.
    let data = include_str!("../data/table_s3.csv");
    let mut rows = Vec::new();
    for line in data.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let pattern: ClickPattern = fields[0].parse().unwrap();
        let dets: Vec<Detector> = pattern.detectors().collect();
        rows.push((
            (dets[0], dets[1]),
            fields[1].parse::<u64>().unwrap(),
            fields[2].parse::<u64>().unwrap(),
            fields[3].parse::<f64>().unwrap() * 1e-9,
            fields[4].parse::<f64>().unwrap() * 1e-9,
        ));
    }
    for parity_column in [0usize, 1] {
        let mut normal = [[0.0f64; 5]; 4];
        for ((i, j), cc_perp, cc_par, norm_perp, norm_par) in &rows {
            let (cc, norm) = if parity_column == 0 {
                (*cc_perp as f64, *norm_perp)
            } else {
                (*cc_par as f64, *norm_par)
            };
            let target = (cc / norm).ln();
            let cols = [i.index(), j.index()];
            for &a in &cols {
                for &b in &cols {
                    normal[a][b] += 1.0;
                }
                normal[a][4] += target;
            }
        }
        let log_singles = solve4(normal);
        let mut table = CountsTable::new();
        for d in Detector::ALL {
            table.set_singles(d, log_singles[d.index()].exp().round() as u64);
        }
        for ((i, j), cc_perp, cc_par, _, _) in &rows {
            let cc = if parity_column == 0 { cc_perp } else { cc_par };
            table.set_coincidences(*i, *j, *cc);
        }
        let normalized = table.normalized_coincidences().unwrap();
        for (pair, value) in normalized {
            let published = rows
                .iter()
                .find(|(p, ..)| *p == pair)
                .map(|(_, _, _, np, nl)| if parity_column == 0 { *np } else { *nl })
                .unwrap();
            assert!(
                (value - published).abs() / published < 0.03,
                "{pair:?}: computed {value:e}, published {published:e}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalization_removes_detector_imbalance(
        eff_a in 0.3..=1.0f64,
        eff_spread in 2.0..6.0f64,
        s2 in 0.35..0.65f64,
        s3 in 0.35..0.65f64,
        t1 in 0.5..1.0f64,
    ) {
        // orthogonal rounds; expected counts from the exact engine
        let mut cfg = SetupConfig::ideal_setup();
        cfg.detectors.a.relative_efficiency = eff_a;
        cfg.detectors.b.relative_efficiency = eff_a / eff_spread;
        cfg.detectors.c.relative_efficiency = (eff_a / eff_spread.sqrt()).min(1.0);
        cfg.detectors.d.relative_efficiency = eff_a / (eff_spread * 1.5);
        cfg.beamsplitters.bs2.split_ratio_upper = s2;
        cfg.beamsplitters.bs3.split_ratio_upper = s3;
        cfg.arms.v1.switch = t1;
        cfg.detector_abs_scale = 0.5;
        cfg.validate().unwrap();
        let source = SourceParams::new(0.1, 0.8).unwrap();
        let round = RoundSpec::new(Basis::Hv, Parity::Orthogonal, false);
        let dist = exact_outcome_distribution(&source, &cfg, &round).unwrap();

        let mut raw = Vec::new();
        let mut normalized = Vec::new();
        for (i, j) in DETECTOR_PAIRS {
            let cc = dist.mass_where(|p| p.contains(i) && p.contains(j));
            let si = dist.mass_where(|p| p.contains(i));
            let sj = dist.mass_where(|p| p.contains(j));
            raw.push(cc);
            normalized.push(cc / (si * sj));
        }
        let spread = |v: &[f64]| {
            v.iter().cloned().fold(f64::MIN, f64::max)
                / v.iter().cloned().fold(f64::MAX, f64::min)
        };
        prop_assert!(
            spread(&normalized) < spread(&raw),
            "normalized {:?} raw {:?}",
            normalized,
            raw
        );
    }
}

#[test]
fn arm_transmission_helper_is_consistent() {
    let cfg = SetupConfig::paper_setup();
    assert!(cfg.arm_transmission(Arm::V0) > cfg.arm_transmission(Arm::V1));
}

#[test]
fn every_honest_transcript_entry_passes_the_round_check() {
    let setup = SetupConfig::paper_setup();
    let source = setup.source_params().unwrap();
    let (transcript, _) =
        qpv_sim::run_protocol(2_000, &source, &setup, &Basis::ALL, 52).unwrap();
    assert_eq!(transcript.entries.len(), 2_000);
    for entry in &transcript.entries {
        let check = qpv_sim::round_check(&entry.received(), &setup.geometry);
        assert!(check.passed(), "round {} failed: {check:?}", entry.round);
    }
}

#[test]
fn measured_setup_monte_carlo_reproduces_the_case_a_prediction() {
    let setup = SetupConfig::paper_setup();
    let source = setup.source_params().unwrap();
    let (_, report) =
        qpv_sim::run_protocol(1_000_000, &source, &setup, &[Basis::Hv], 271).unwrap();
    let p0 = report.p0_given_parallel_conclusive.p_hat;
    assert!(
        (p0 - 0.47).abs() < 0.05,
        "P(0|par,concl.) = {p0} over {} conclusive rounds",
        report.p0_given_parallel_conclusive.trials
    );
}

#[test]
fn verifier_accepts_good_sources_and_rejects_the_measured_one() {
    use qpv_sim::protocol::{verify, Verdict, VerifyFailure, VerifyPolicy};

    // ideal source, ideal setup: accept
    let ideal_setup = SetupConfig::ideal_setup();
    let ideal = SourceParams::ideal();
    let (_, report) =
        qpv_sim::run_protocol(100_000, &ideal, &ideal_setup, &[Basis::Hv], 4_001).unwrap();
    let verdict = verify(&report, &VerifyPolicy::ideal());
    assert!(verdict.is_accept(), "ideal run: {verdict}");

    // case-A source on the measured setup: rejected on the parallel
    // correctness clause
    let paper = SetupConfig::paper_setup();
    let case_a = paper.source_params().unwrap();
    let policy = VerifyPolicy::for_model(&case_a, &paper).unwrap();
    let (_, report) =
        qpv_sim::run_protocol(1_000_000, &case_a, &paper, &[Basis::Hv], 4_002).unwrap();
    match verify(&report, &policy) {
        Verdict::Reject(reasons) => {
            assert!(
                reasons.iter().any(|r| matches!(
                    r,
                    VerifyFailure::ParallelCorrectnessNotAboveLoccBound { .. }
                )),
                "case A rejected, but not on clause (i): {reasons:?}"
            );
        }
        other => panic!("case A should be rejected, got {other}"),
    }

    // case-B source (high purity and indistinguishability): accept
    let case_b = SourceParams::new(0.021, 0.960).unwrap();
    let policy = VerifyPolicy::for_model(&case_b, &paper).unwrap();
    let (_, report) =
        qpv_sim::run_protocol(2_000_000, &case_b, &paper, &[Basis::Hv], 4_003).unwrap();
    let verdict = verify(&report, &policy);
    assert!(verdict.is_accept(), "case B run: {verdict}");
}
