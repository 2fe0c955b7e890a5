//! Parameter sweeps over source purity and indistinguishability.
//!
//! Each grid cell evaluates P(0 | parallel, conclusive) for a source with
//! the cell's purity (g2 = 1 - purity) and indistinguishability on a fixed
//! setup; the 2/3 contour of the resulting map separates the region where
//! the honest prover beats LOCC attackers from the region where it does not.

use rayon::prelude::*;

use crate::config::SetupConfig;
use crate::error::{Error, Result};
use crate::optics;
use crate::protocol::{answer_from_pattern, Basis, Parity, ProverAnswer, RoundSpec};
use crate::rng::round_stream;
use crate::source::SourceParams;

/// How a sweep cell is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    /// Exact engine; cells are sampling-noise-free.
    Exact,
    /// Monte Carlo with this many parallel-parity rounds per cell.
    MonteCarlo { rounds_per_cell: u64, master_seed: u64 },
}

/// A rectangular grid over purity and indistinguishability.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub purity_min: f64,
    pub purity_max: f64,
    pub purity_steps: usize,
    pub m_min: f64,
    pub m_max: f64,
    pub m_steps: usize,
    pub mode: SweepMode,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        for (key, steps) in [
            ("purity_steps", self.purity_steps),
            ("m_steps", self.m_steps),
        ] {
            if steps < 2 {
                return Err(Error::OutOfRange {
                    key: key.into(),
                    value: steps as f64,
                    expected: ">= 2",
                });
            }
        }
        for (key, lo, hi) in [
            ("purity", self.purity_min, self.purity_max),
            ("indistinguishability", self.m_min, self.m_max),
        ] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
                return Err(Error::OutOfRange {
                    key: key.into(),
                    value: lo,
                    expected: "0 <= min < max <= 1",
                });
            }
        }
        Ok(())
    }

    fn purities(&self) -> Vec<f64> {
        linspace(self.purity_min, self.purity_max, self.purity_steps)
    }

    fn indistinguishabilities(&self) -> Vec<f64> {
        linspace(self.m_min, self.m_max, self.m_steps)
    }
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Sweep results: `value(i, j)` is P(0 | parallel, concl.) at purity index
/// `i` and indistinguishability index `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub purities: Vec<f64>,
    pub indistinguishabilities: Vec<f64>,
    values: Vec<f64>,
}

impl SweepGrid {
    pub fn value(&self, purity_index: usize, m_index: usize) -> f64 {
        self.values[purity_index * self.indistinguishabilities.len() + m_index]
    }

    /// CSV export in row-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("purity,indistinguishability,p0_given_parallel_conclusive\n");
        for (i, purity) in self.purities.iter().enumerate() {
            for (j, m) in self.indistinguishabilities.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", purity, m, self.value(i, j)));
            }
        }
        out
    }

    /// Per purity row, the lowest indistinguishability at which the value
    /// crosses `level` (linear interpolation between grid columns); None if
    /// the row never reaches the level.
    pub fn contour_thresholds(&self, level: f64) -> Vec<Option<f64>> {
        self.purities
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let ms = &self.indistinguishabilities;
                for j in 0..ms.len() {
                    let v = self.value(i, j);
                    if v >= level {
                        if j == 0 {
                            return Some(ms[0]);
                        }
                        let v_prev = self.value(i, j - 1);
                        let fraction = (level - v_prev) / (v - v_prev);
                        return Some(ms[j - 1] + fraction * (ms[j] - ms[j - 1]));
                    }
                }
                None
            })
            .collect()
    }

    /// Companion CSV for the contour crossings of one level.
    pub fn contour_csv(&self, level: f64) -> String {
        let mut out = String::from("purity,m_threshold\n");
        for (purity, threshold) in self.purities.iter().zip(self.contour_thresholds(level)) {
            match threshold {
                Some(m) => out.push_str(&format!("{},{}\n", purity, m)),
                None => out.push_str(&format!("{},none\n", purity)),
            }
        }
        out
    }
}

fn exact_cell(setup: &SetupConfig, purity: f64, m: f64) -> Result<f64> {
    let source = SourceParams::new(1.0 - purity, m)?;
    let round = RoundSpec::new(Basis::Hv, Parity::Parallel, false);
    let dist = optics::exact_outcome_distribution(&source, setup, &round)?;
    let mut zero = 0.0;
    let mut one = 0.0;
    for (pattern, p) in dist.iter() {
        match answer_from_pattern(pattern) {
            ProverAnswer::Zero => zero += p,
            ProverAnswer::One => one += p,
            ProverAnswer::Inconclusive => {}
        }
    }
    Ok(zero / (zero + one))
}

fn monte_carlo_cell(
    setup: &SetupConfig,
    purity: f64,
    m: f64,
    rounds: u64,
    master_seed: u64,
    cell_index: u64,
) -> Result<f64> {
    let source = SourceParams::new(1.0 - purity, m)?;
    let round = RoundSpec::new(Basis::Hv, Parity::Parallel, false);
    let mut zero = 0u64;
    let mut one = 0u64;
    for i in 0..rounds {
        let mut rng = round_stream(master_seed, cell_index * rounds + i);
        let pattern = optics::sample_outcome(&source, setup, &round, &mut rng)?;
        match answer_from_pattern(pattern) {
            ProverAnswer::Zero => zero += 1,
            ProverAnswer::One => one += 1,
            ProverAnswer::Inconclusive => {}
        }
    }
    Ok(zero as f64 / (zero + one) as f64)
}

/// Evaluate the sweep. Cells run concurrently; assembly order is fixed by
/// cell index, so output is identical for any thread count.
pub fn run_sweep(spec: &SweepSpec, setup: &SetupConfig) -> Result<SweepGrid> {
    spec.validate()?;
    let purities = spec.purities();
    let ms = spec.indistinguishabilities();
    let cells: Vec<(usize, usize)> = (0..purities.len())
        .flat_map(|i| (0..ms.len()).map(move |j| (i, j)))
        .collect();
    let values: Result<Vec<f64>> = cells
        .par_iter()
        .map(|&(i, j)| match spec.mode {
            SweepMode::Exact => exact_cell(setup, purities[i], ms[j]),
            SweepMode::MonteCarlo {
                rounds_per_cell,
                master_seed,
            } => monte_carlo_cell(
                setup,
                purities[i],
                ms[j],
                rounds_per_cell,
                master_seed,
                (i * ms.len() + j) as u64,
            ),
        })
        .collect();
    Ok(SweepGrid {
        purities,
        indistinguishabilities: ms,
        values: values?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec {
            purity_min: 0.5,
            purity_max: 1.0,
            purity_steps: 5,
            m_min: 0.0,
            m_max: 1.0,
            m_steps: 5,
            mode: SweepMode::Exact,
        };
        assert!(spec.validate().is_ok());
        spec.purity_steps = 1;
        assert!(spec.validate().is_err());
        spec.purity_steps = 5;
        spec.m_max = 1.5;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn ideal_corner_is_unity() {
        let spec = SweepSpec {
            purity_min: 0.8,
            purity_max: 1.0,
            purity_steps: 3,
            m_min: 0.5,
            m_max: 1.0,
            m_steps: 3,
            mode: SweepMode::Exact,
        };
        let grid = run_sweep(&spec, &SetupConfig::ideal_setup()).unwrap();
        assert_abs_diff_eq!(grid.value(2, 2), 1.0, epsilon = 1e-12);
        // value grows in both purity and indistinguishability
        assert!(grid.value(2, 2) > grid.value(0, 2));
        assert!(grid.value(2, 2) > grid.value(2, 0));
    }

    #[test]
    fn measured_setup_cell_matches_the_case_b_prediction() {
        let spec = SweepSpec {
            purity_min: 0.979,
            purity_max: 1.0,
            purity_steps: 2,
            m_min: 0.96,
            m_max: 1.0,
            m_steps: 2,
            mode: SweepMode::Exact,
        };
        let grid = run_sweep(&spec, &SetupConfig::paper_setup()).unwrap();
        assert_abs_diff_eq!(grid.value(0, 0), 0.87, epsilon = 0.05);
    }

    #[test]
    fn unsupported_purity_reports_the_cell() {
        let spec = SweepSpec {
            purity_min: 0.2,
            purity_max: 1.0,
            purity_steps: 3,
            m_min: 0.0,
            m_max: 1.0,
            m_steps: 2,
            mode: SweepMode::Exact,
        };
        assert!(run_sweep(&spec, &SetupConfig::ideal_setup()).is_err());
    }

    #[test]
    fn monte_carlo_mode_tracks_exact_mode() {
        let exact = run_sweep(
            &SweepSpec {
                purity_min: 0.9,
                purity_max: 1.0,
                purity_steps: 2,
                m_min: 0.4,
                m_max: 0.8,
                m_steps: 2,
                mode: SweepMode::Exact,
            },
            &SetupConfig::ideal_setup(),
        )
        .unwrap();
        let sampled = run_sweep(
            &SweepSpec {
                purity_min: 0.9,
                purity_max: 1.0,
                purity_steps: 2,
                m_min: 0.4,
                m_max: 0.8,
                m_steps: 2,
                mode: SweepMode::MonteCarlo {
                    rounds_per_cell: 40_000,
                    master_seed: 7,
                },
            },
            &SetupConfig::ideal_setup(),
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(sampled.value(i, j), exact.value(i, j), epsilon = 0.02);
            }
        }
    }

    #[test]
    fn contour_interpolates_between_columns() {
        let grid = SweepGrid {
            purities: vec![0.9, 1.0],
            indistinguishabilities: vec![0.0, 0.5, 1.0],
            values: vec![0.3, 0.6, 0.9, 0.5, 0.7, 1.0],
        };
        let thresholds = grid.contour_thresholds(2.0 / 3.0);
        // row 0: crossing between 0.6 (at 0.5) and 0.9 (at 1.0)
        let expected = 0.5 + (2.0 / 3.0 - 0.6) / 0.3 * 0.5;
        assert_abs_diff_eq!(thresholds[0].unwrap(), expected, epsilon = 1e-12);
        assert!(thresholds[1].unwrap() < thresholds[0].unwrap());
        let csv = grid.contour_csv(2.0 / 3.0);
        assert!(csv.starts_with("purity,m_threshold\n"));
    }
}
