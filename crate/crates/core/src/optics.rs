//! Ideal linear polarizers and polarizer cascades, computed either on beam
//! density operators or photon by photon.
//!
//! A polarizer is a projective measurement in its axis basis: the aligned
//! outcome is transmitted along the axis and the orthogonal outcome is
//! absorbed. On a linearly polarized beam this is Malus' law.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{contract, invalid, Result};
use crate::quantum::{collapse, ket_from_angle, DensityOperator, MeasurementBasis, StateVector};
use crate::rng::{run_chunked, RngStream};

/// Stream domain for cascade photons.
const DOMAIN_CASCADE: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Polarizer {
    pub axis: MeasurementBasis,
}

impl Polarizer {
    pub fn new(axis: f64) -> Result<Self> {
        Ok(Self { axis: MeasurementBasis::new(axis)? })
    }
}

/// A beam: polarization state plus intensity relative to the source.
#[derive(Debug, Clone, PartialEq)]
pub struct LightBeam {
    pub rho: DensityOperator,
    pub intensity: f64,
}

impl LightBeam {
    /// Fully polarized beam at angle `phi` with unit intensity.
    pub fn linear(phi: f64) -> Result<Self> {
        Ok(Self { rho: ket_from_angle(phi)?.to_density(), intensity: 1.0 })
    }
}

/// Unpolarized light of unit intensity.
pub fn natural_light() -> LightBeam {
    LightBeam { rho: DensityOperator::maximally_mixed(2).expect("I/2 is a state"), intensity: 1.0 }
}

/// Passes a beam through a polarizer.
pub fn transmit_analytic(beam: &LightBeam, p: &Polarizer) -> LightBeam {
    let axis = p.axis.aligned();
    let pass = beam.rho.expectation(&axis).clamp(0.0, 1.0);
    LightBeam { rho: axis.to_density(), intensity: beam.intensity * pass }
}

/// Per-stage outcome of a cascade.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageValues {
    Intensity(Vec<f64>),
    Counts(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeResult {
    pub stages: StageValues,
    pub n_source: u64,
    pub seed: Option<u64>,
}

impl CascadeResult {
    /// Stage values as fractions of the source.
    pub fn fractions(&self) -> Vec<f64> {
        match &self.stages {
            StageValues::Intensity(v) => v.clone(),
            StageValues::Counts(c) => c.iter().map(|k| *k as f64 / self.n_source as f64).collect(),
        }
    }

    pub fn counts(&self) -> Option<&[u64]> {
        match &self.stages {
            StageValues::Counts(c) => Some(c),
            StageValues::Intensity(_) => None,
        }
    }
}

fn polarizers(axes: &[f64]) -> Result<Vec<Polarizer>> {
    if axes.is_empty() {
        return Err(invalid("a cascade needs at least one polarizer"));
    }
    axes.iter().map(|a| Polarizer::new(*a)).collect()
}

/// Intensities after each polarizer of a cascade.
pub fn cascade_analytic(beam: &LightBeam, axes: &[f64]) -> Result<CascadeResult> {
    let pols = polarizers(axes)?;
    let mut current = beam.clone();
    let mut out = Vec::with_capacity(pols.len());
    for p in &pols {
        current = transmit_analytic(&current, p);
        out.push(current.intensity);
    }
    Ok(CascadeResult { stages: StageValues::Intensity(out), n_source: 1, seed: None })
}

/// One photon and the measurements it has undergone.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonRecord {
    pub state: StateVector,
    pub alive: bool,
    /// `(basis angle, outcome)` in order of interaction.
    pub collapse_history: Vec<(f64, u8)>,
}

impl PhotonRecord {
    pub fn new(state: StateVector) -> Self {
        Self { state, alive: true, collapse_history: Vec::new() }
    }
}

/// One photon meets one polarizer.
pub fn transmit_photon_mc(mut photon: PhotonRecord, p: &Polarizer, rng: &mut RngStream) -> Result<PhotonRecord> {
    if !photon.alive {
        return Err(contract("absorbed photon cannot reach another polarizer"));
    }
    let record = collapse(&photon.state, &p.axis, rng)?;
    photon.collapse_history.push((p.axis.theta(), record.outcome));
    if record.outcome == 0 {
        photon.state = record.post_state;
    } else {
        photon.alive = false;
    }
    Ok(photon)
}

/// Photon source for Monte Carlo cascades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Each photon linearly polarized at an independent uniform angle in [0, π).
    Natural,
    /// Every photon polarized at the given angle.
    Linear(f64),
}

impl Source {
    fn validate(&self) -> Result<()> {
        match self {
            Source::Linear(phi) if !phi.is_finite() => Err(invalid("source angle must be finite")),
            _ => Ok(()),
        }
    }

    fn emit(&self, rng: &mut RngStream) -> StateVector {
        let angle = match self {
            Source::Natural => PI * rng.uniform(),
            Source::Linear(phi) => *phi,
        };
        ket_from_angle(angle).expect("angle is finite")
    }

    /// Analytic counterpart of the source.
    pub fn beam(&self) -> Result<LightBeam> {
        self.validate()?;
        match self {
            Source::Natural => Ok(natural_light()),
            Source::Linear(phi) => LightBeam::linear(*phi),
        }
    }
}

/// Threads `n_photons` source photons through a cascade and counts survivors
/// after each stage.
pub fn cascade_mc(n_photons: u64, axes: &[f64], source: Source, seed: u64) -> Result<CascadeResult> {
    if n_photons == 0 {
        return Err(invalid("n_photons must be positive"));
    }
    source.validate()?;
    let pols = polarizers(axes)?;
    let stages = pols.len();
    let counts = run_chunked(
        n_photons,
        seed,
        DOMAIN_CASCADE,
        vec![0u64; stages],
        |rng, _, count| {
            let mut tally = vec![0u64; stages];
            for _ in 0..count {
                let mut photon = PhotonRecord::new(source.emit(rng));
                for (k, p) in pols.iter().enumerate() {
                    photon = transmit_photon_mc(photon, p, rng).expect("alive photon with normalized state");
                    if !photon.alive {
                        break;
                    }
                    tally[k] += 1;
                }
            }
            tally
        },
        |mut acc, part| {
            acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
            acc
        },
    );
    Ok(CascadeResult { stages: StageValues::Counts(counts), n_source: n_photons, seed: Some(seed) })
}

/// Axes for the three-polarizer family: crossed outer polarizers at π/2 and
/// 0 with the middle one rotated by `theta` from the first.
pub fn sandwich_axes(theta: f64) -> [f64; 3] {
    [PI / 2.0, PI / 2.0 - theta, 0.0]
}
