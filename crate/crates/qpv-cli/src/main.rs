//! Command-line interface for the SWAP QPV simulator: protocol simulation,
//! purity/indistinguishability sweeps, source-parameter estimation, and
//! LOCC attack evaluation.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qpv_sim::adversary::{evaluate_attack, strategy_by_name};
use qpv_sim::config::{load_config, SetupConfig};
use qpv_sim::protocol::{
    model_distribution, run_protocol_with, theoretical_distribution, AnswerDistribution, Basis,
    Parity, TranscriptEntry, VerifyPolicy,
};
use qpv_sim::source::SourceParams;
use qpv_sim::stats::Uncertain;
use qpv_sim::sweep::{run_sweep, SweepMode, SweepSpec};

#[derive(Parser)]
#[command(
    name = "qpv",
    about = "Simulator and analysis toolkit for the loss-tolerant SWAP quantum position verification protocol",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run honest protocol rounds and report verifier statistics.
    Simulate(SimulateArgs),
    /// Evaluate P(0 | parallel, concl.) over a purity x indistinguishability grid.
    Sweep(SweepArgs),
    /// Run the visibility / indistinguishability estimator chain.
    Estimate(EstimateArgs),
    /// Evaluate a LOCC attack strategy against the verifier checks.
    Attack(AttackArgs),
    /// Parse and validate a configuration file, printing the canonical form.
    ValidateConfig(ValidateArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// Setup configuration: a file path or a bundled name
    /// (`paper_setup`, `ideal_setup`).
    #[arg(long, default_value = "paper_setup")]
    config: String,
}

impl ConfigArg {
    fn load(&self) -> Result<SetupConfig> {
        match self.config.as_str() {
            "paper_setup" => Ok(SetupConfig::paper_setup()),
            "ideal_setup" => Ok(SetupConfig::ideal_setup()),
            path => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config `{path}`"))?;
                Ok(load_config(&text)?)
            }
        }
    }
}

/// Round counts accept plain integers and scientific notation (`1e6`).
fn parse_rounds(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|e| format!("not a count: {e}"))?;
    if f.is_finite() && (1.0..=1e18).contains(&f) && f.fract() == 0.0 {
        Ok(f as u64)
    } else {
        Err(format!("`{s}` is not a whole nonnegative count"))
    }
}

fn parse_bases(count: u8) -> Result<Vec<Basis>> {
    Ok(match count {
        1 => vec![Basis::Hv],
        2 => vec![Basis::Hv, Basis::Da],
        3 => Basis::ALL.to_vec(),
        other => bail!("--bases must be 1, 2, or 3 (got {other})"),
    })
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Number of Monte Carlo rounds.
    #[arg(long, value_parser = parse_rounds)]
    n: Option<u64>,
    /// Master seed for the per-round random streams (required with --n).
    #[arg(long)]
    seed: Option<u64>,
    /// Exact-engine evaluation instead of sampling.
    #[arg(long)]
    exact: bool,
    /// Override the configured source with a perfect one (g2 = 0, M = 1).
    #[arg(long)]
    ideal_source: bool,
    /// Number of enabled mutually unbiased bases (1-3).
    #[arg(long, default_value_t = 1)]
    bases: u8,
    /// Output directory for transcript.csv and report.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, default_value_t = 0.5)]
    purity_min: f64,
    #[arg(long, default_value_t = 1.0)]
    purity_max: f64,
    #[arg(long, default_value_t = 50)]
    purity_steps: usize,
    #[arg(long, default_value_t = 0.0)]
    m_min: f64,
    #[arg(long, default_value_t = 1.0)]
    m_max: f64,
    #[arg(long, default_value_t = 50)]
    m_steps: usize,
    /// Monte Carlo rounds per cell (omit for exact mode).
    #[arg(long, value_parser = parse_rounds)]
    rounds: Option<u64>,
    /// Master seed (required with --rounds).
    #[arg(long)]
    seed: Option<u64>,
    /// Grid CSV output path.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
    /// Companion CSV with the 2/3 contour crossings per purity row.
    #[arg(long)]
    contour: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Zero-time correlation for parallel-polarized HOM inputs.
    #[arg(long)]
    g2_parallel: f64,
    #[arg(long, default_value_t = 0.0)]
    g2_parallel_sigma: f64,
    /// Zero-time correlation for orthogonally polarized HOM inputs.
    #[arg(long)]
    g2_perp: f64,
    #[arg(long, default_value_t = 0.0)]
    g2_perp_sigma: f64,
    /// Source g2 from a Hanbury-Brown-Twiss measurement.
    #[arg(long)]
    g2: f64,
    #[arg(long, default_value_t = 0.0)]
    g2_sigma: f64,
}

#[derive(Args)]
struct AttackArgs {
    /// Strategy name from the built-in library.
    #[arg(long)]
    strategy: String,
    /// Number of enabled mutually unbiased bases (1-3).
    #[arg(long, default_value_t = 3)]
    bases: u8,
    #[arg(long, value_parser = parse_rounds)]
    n: u64,
    #[arg(long)]
    seed: u64,
    /// Geometry / policy configuration.
    #[arg(long, default_value = "ideal_setup")]
    config: String,
    /// Write the attack report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    config: ConfigArg,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Attack(args) => cmd_attack(args),
        Command::ValidateConfig(args) => cmd_validate(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn answer_table(rows: &[(&str, f64, f64)], evaluated_label: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<30} {:>10} {:>12}\n",
        "quantity", "theory", evaluated_label
    ));
    for (label, theory, evaluated) in rows {
        out.push_str(&format!("{label:<30} {theory:>10.4} {evaluated:>12.4}\n"));
    }
    out
}

fn distribution_rows(
    perp: &AnswerDistribution,
    par: &AnswerDistribution,
) -> Vec<(&'static str, f64, f64)> {
    let t_perp = theoretical_distribution(Parity::Orthogonal);
    let t_par = theoretical_distribution(Parity::Parallel);
    vec![
        ("P(inconclusive | orthogonal)", t_perp.inconclusive, perp.inconclusive),
        ("P(inconclusive | parallel)", t_par.inconclusive, par.inconclusive),
        (
            "P(0 | orthogonal, concl.)",
            t_perp.zero_given_conclusive(),
            perp.zero_given_conclusive(),
        ),
        (
            "P(1 | orthogonal, concl.)",
            1.0 - t_perp.zero_given_conclusive(),
            1.0 - perp.zero_given_conclusive(),
        ),
        (
            "P(0 | parallel, concl.)",
            t_par.zero_given_conclusive(),
            par.zero_given_conclusive(),
        ),
        (
            "P(1 | parallel, concl.)",
            1.0 - t_par.zero_given_conclusive(),
            1.0 - par.zero_given_conclusive(),
        ),
    ]
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let setup = args.config.load()?;
    let source = if args.ideal_source {
        SourceParams::ideal()
    } else {
        setup.source_params()?
    };
    let bases = parse_bases(args.bases)?;

    if args.exact {
        let perp = model_distribution(&source, &setup, Parity::Orthogonal)?;
        let par = model_distribution(&source, &setup, Parity::Parallel)?;
        let table = answer_table(&distribution_rows(&perp, &par), "model (exact)");
        print!("{table}");
        if let Some(dir) = &args.out {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("report.txt"), &table)?;
        }
        return Ok(());
    }

    let n = args.n.context("--n is required unless --exact is given")?;
    let seed = args.seed.context("--seed is mandatory for Monte Carlo runs")?;

    let out_dir = args.out.clone();
    if let Some(dir) = &out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut transcript_file = match &out_dir {
        Some(dir) => {
            let mut w = std::io::BufWriter::new(fs::File::create(dir.join("transcript.csv"))?);
            use std::io::Write;
            writeln!(w, "{}", TranscriptEntry::CSV_HEADER)?;
            Some(w)
        }
        None => None,
    };
    let report = run_protocol_with(n, &source, &setup, &bases, seed, |entry| {
        if let Some(w) = transcript_file.as_mut() {
            use std::io::Write;
            writeln!(w, "{}", entry.to_csv_row()).expect("transcript write");
        }
    })?;
    drop(transcript_file);

    let counts = &report.counts;
    let conditional = |parity: Parity| {
        use qpv_sim::protocol::ProverAnswer;
        let n_par = (counts.rounds(parity) as f64).max(1.0);
        AnswerDistribution {
            zero: counts.count(parity, ProverAnswer::Zero) as f64 / n_par,
            one: counts.count(parity, ProverAnswer::One) as f64 / n_par,
            inconclusive: counts.count(parity, ProverAnswer::Inconclusive) as f64 / n_par,
        }
    };
    let perp = conditional(Parity::Orthogonal);
    let par = conditional(Parity::Parallel);
    let table = answer_table(&distribution_rows(&perp, &par), "simulated");
    let policy = VerifyPolicy::for_model(&source, &setup)?;
    let verdict = qpv_sim::verify(&report, &policy);
    let body = format!(
        "{table}\n{}verdict                     = {verdict}\n",
        report.render_text()
    );
    print!("{body}");
    if let Some(dir) = &out_dir {
        fs::write(dir.join("report.txt"), &body)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let setup = args.config.load()?;
    let mode = match (args.rounds, args.seed) {
        (Some(rounds), Some(seed)) => SweepMode::MonteCarlo {
            rounds_per_cell: rounds,
            master_seed: seed,
        },
        (Some(_), None) => bail!("--seed is mandatory for Monte Carlo sweeps"),
        _ => SweepMode::Exact,
    };
    let spec = SweepSpec {
        purity_min: args.purity_min,
        purity_max: args.purity_max,
        purity_steps: args.purity_steps,
        m_min: args.m_min,
        m_max: args.m_max,
        m_steps: args.m_steps,
        mode,
    };
    let grid = run_sweep(&spec, &setup)?;
    fs::write(&args.out, grid.to_csv()).with_context(|| format!("writing {:?}", args.out))?;
    let contour_path = args
        .contour
        .unwrap_or_else(|| companion_path(&args.out, "contour"));
    fs::write(&contour_path, grid.contour_csv(2.0 / 3.0))?;
    println!(
        "wrote {} cells to {} (contour: {})",
        grid.purities.len() * grid.indistinguishabilities.len(),
        args.out.display(),
        contour_path.display()
    );
    Ok(())
}

fn companion_path(base: &Path, tag: &str) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}.{tag}.{ext}"))
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let measurement = qpv_sim::HomMeasurement {
        g2_parallel: Uncertain::new(args.g2_parallel, args.g2_parallel_sigma),
        g2_perp: Uncertain::new(args.g2_perp, args.g2_perp_sigma),
    };
    let visibility = qpv_sim::hom_visibility(&measurement)?;
    let indistinguishability = qpv_sim::indistinguishability_from_visibility(
        visibility,
        Uncertain::new(args.g2, args.g2_sigma),
    );
    println!("V_HOM = {visibility:.4}");
    println!("M     = {indistinguishability:.4}");
    Ok(())
}

fn cmd_attack(args: AttackArgs) -> Result<()> {
    let setup = ConfigArg {
        config: args.config.clone(),
    }
    .load()?;
    let strategy = strategy_by_name(&args.strategy)?;
    let bases = parse_bases(args.bases)?;
    let policy = VerifyPolicy::for_model(&setup.source_params()?, &setup)?;
    let report = evaluate_attack(&strategy, args.n, &setup, &bases, args.seed, &policy)?;
    let text = report.render_text();
    print!("{text}");
    if let Some(path) = &args.out {
        fs::write(path, &text)?;
    }
    println!(
        "verdict: {}",
        if report.accepted() {
            "ACCEPTED (the attack defeats verification)"
        } else {
            "REJECTED (the attack is caught)"
        }
    );
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let setup = args.config.load()?;
    print!("{}", setup.to_canonical_json());
    eprintln!("config OK");
    Ok(())
}
