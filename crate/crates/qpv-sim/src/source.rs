//! Imperfect single-photon source model.
//!
//! The source is parametrized by the second-order correlation at zero delay
//! `g2` (single-photon purity is `1 - g2`) and the pairwise photon
//! indistinguishability `M`. Multi-photon contamination is modeled as a rare
//! second, fully distinguishable "noise" photon emitted alongside the signal
//! photon; its per-pulse probability `p2` solves `g2 = 2 p2 / (1 + p2)^2`,
//! the truncated-model relation for a pulsed source with mean photon number
//! `1 + p2`.
//!
//! The estimator chain between raw correlation measurements and the source
//! parameters is the interferometric visibility
//! `V = (g2_perp - g2_parallel) / g2_perp` and the purity correction
//! `M = V (1 + 2 g2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{Arm, PhotonKind, PhotonRecord, PolarizationQubit};
use crate::stats::Uncertain;

/// Source parameters: multi-photon probability (via `g2`) and pairwise
/// indistinguishability `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    g2: f64,
    indistinguishability: f64,
}

impl SourceParams {
    pub fn new(g2: f64, indistinguishability: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&g2) {
            return Err(Error::OutOfRange {
                key: "source.g2".into(),
                value: g2,
                expected: "[0, 1)",
            });
        }
        if !(0.0..=1.0).contains(&indistinguishability) {
            return Err(Error::OutOfRange {
                key: "source.indistinguishability".into(),
                value: indistinguishability,
                expected: "[0, 1]",
            });
        }
        Ok(Self {
            g2,
            indistinguishability,
        })
    }

    /// A perfect source: no multi-photon emission, full wavefunction overlap.
    pub fn ideal() -> Self {
        Self {
            g2: 0.0,
            indistinguishability: 1.0,
        }
    }

    pub fn g2(&self) -> f64 {
        self.g2
    }

    pub fn indistinguishability(&self) -> f64 {
        self.indistinguishability
    }

    /// Single-photon purity P = 1 - g2.
    pub fn purity(&self) -> f64 {
        1.0 - self.g2
    }

    /// Per-pulse probability of the extra noise photon.
    pub fn two_photon_probability(&self) -> Result<f64> {
        two_photon_probability(self.g2)
    }

    /// The interferometric pair visibility V = M / (1 + 2 g2): the bunching
    /// contrast a pair from this source actually shows at a beamsplitter.
    pub fn interferometric_visibility(&self) -> f64 {
        visibility_from_indistinguishability(self.indistinguishability, self.g2)
    }
}

/// Solve `g2 = 2 p / (1 + p)^2` for `p` on [0, 1] by bisection.
///
/// The left side is strictly increasing on [0, 1] with range [0, 1/2], so a
/// unique solution exists exactly for `g2 <= 1/2`.
pub fn two_photon_probability(g2: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&g2) {
        return Err(Error::UnsupportedRegime(g2));
    }
    if g2 == 0.0 {
        return Ok(0.0);
    }
    let f = |p: f64| 2.0 * p / ((1.0 + p) * (1.0 + p));
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < g2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Zero-time correlations from a Hong-Ou-Mandel experiment, for orthogonal
/// and parallel polarized inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomMeasurement {
    pub g2_parallel: Uncertain,
    pub g2_perp: Uncertain,
}

/// Interferometric HOM visibility `V = (g2_perp - g2_parallel) / g2_perp`,
/// with first-order propagation of the two input uncertainties treated as
/// independent.
pub fn hom_visibility(m: &HomMeasurement) -> Result<Uncertain> {
    let gp = m.g2_parallel.value;
    let go = m.g2_perp.value;
    if go <= 0.0 {
        return Err(Error::ZeroPerpendicularCorrelation);
    }
    let value = (go - gp) / go;
    let d_dgp = -1.0 / go;
    let d_dgo = gp / (go * go);
    let sigma = ((d_dgp * m.g2_parallel.sigma).powi(2) + (d_dgo * m.g2_perp.sigma).powi(2)).sqrt();
    Ok(Uncertain::new(value, sigma))
}

/// Bare photon indistinguishability `M = V (1 + 2 g2)`, correcting the
/// measured visibility for multi-photon contamination.
pub fn indistinguishability_from_visibility(v: Uncertain, g2: Uncertain) -> Uncertain {
    let value = v.value * (1.0 + 2.0 * g2.value);
    let sigma = (((1.0 + 2.0 * g2.value) * v.sigma).powi(2)
        + (2.0 * v.value * g2.sigma).powi(2))
    .sqrt();
    Uncertain::new(value, sigma)
}

/// Inverse of [`indistinguishability_from_visibility`]: `V = M / (1 + 2 g2)`.
pub fn visibility_from_indistinguishability(m: f64, g2: f64) -> f64 {
    m / (1.0 + 2.0 * g2)
}

/// One possible per-pulse photon multiset, with its probability.
#[derive(Debug, Clone)]
pub struct EmissionCase {
    pub photons: Vec<PhotonRecord>,
    pub probability: f64,
}

/// Per-pulse emission distribution of one arm: one signal photon always,
/// plus a co-polarized noise photon with probability `p2`. Noise photons get
/// a per-arm mode class so they never interfere with anything.
pub fn emission_profile(
    params: &SourceParams,
    arm: Arm,
    signal_polarization: PolarizationQubit,
) -> Result<[EmissionCase; 2]> {
    let p2 = params.two_photon_probability()?;
    let signal = PhotonRecord {
        origin: arm,
        kind: PhotonKind::Signal,
        polarization: signal_polarization,
        mode_class: 0,
    };
    let noise = PhotonRecord {
        origin: arm,
        kind: PhotonKind::Noise,
        polarization: signal_polarization,
        mode_class: match arm {
            Arm::V0 => 1,
            Arm::V1 => 2,
        },
    };
    Ok([
        EmissionCase {
            photons: vec![signal],
            probability: 1.0 - p2,
        },
        EmissionCase {
            photons: vec![signal, noise],
            probability: p2,
        },
    ])
}
