//! Delayed-choice Mach-Zehnder interferometer.
//!
//! Two-mode model: the photon enters mode 0, a balanced beamsplitter
//! `(1/√2)[[1, 1], [1, −1]]` forms the path superposition, arm 1 picks up a
//! phase `e^{iφ}`, and a second identical beamsplitter is either inserted
//! (closed, interference) or left out (open, which-way). Detector D0 sits on
//! output mode 0. With the second splitter present `P(D0) = cos²(φ/2)`; without
//! it each detector fires with probability ½.
//!
//! Under a delayed policy each photon's insert/remove decision is drawn only
//! after its path superposition exists.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::quantum::{born_probabilities, collapse, MeasurementBasis, StateVector};
use crate::rng::{chunk_stream_index, run_chunked, stream_from_seed, CHUNK_SIZE};
use crate::stats::{two_proportion_z, BinomialEstimate, SWEEP_SIGMAS};

const DOMAIN_DETECTION: u64 = 64;
const DOMAIN_CHOICE: u64 = 65;

/// When and how the second beamsplitter is decided.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChoicePolicy {
    /// Fixed before the photon enters.
    Fixed { second_bs: bool },
    /// Drawn after the photon is in superposition; present with probability `p_present`.
    DelayedRandom { p_present: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MziConfig {
    pub phase: f64,
    pub choice_policy: ChoicePolicy,
}

impl MziConfig {
    pub fn closed(phase: f64) -> Self {
        Self { phase, choice_policy: ChoicePolicy::Fixed { second_bs: true } }
    }

    pub fn open(phase: f64) -> Self {
        Self { phase, choice_policy: ChoicePolicy::Fixed { second_bs: false } }
    }

    pub fn delayed(phase: f64, p_present: f64) -> Self {
        Self { phase, choice_policy: ChoicePolicy::DelayedRandom { p_present } }
    }

    fn validate(&self) -> Result<()> {
        if !self.phase.is_finite() {
            return Err(invalid("phase must be finite"));
        }
        if let ChoicePolicy::DelayedRandom { p_present } = self.choice_policy {
            if !(0.0..=1.0).contains(&p_present) {
                return Err(invalid(format!("p_present must lie in [0, 1], got {p_present}")));
            }
        }
        Ok(())
    }
}

/// Detector tallies for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DetectorCounts {
    pub n: u64,
    pub count_d0: u64,
    pub count_d1: u64,
}

impl DetectorCounts {
    fn add(self, other: Self) -> Self {
        Self { n: self.n + other.n, count_d0: self.count_d0 + other.count_d0, count_d1: self.count_d1 + other.count_d1 }
    }

    /// D0 fraction with its Wilson interval; `None` when no photons.
    pub fn d0(&self) -> Option<BinomialEstimate> {
        BinomialEstimate::new(self.count_d0, self.n).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChoiceBreakdown {
    pub present: DetectorCounts,
    pub absent: DetectorCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MziStats {
    pub n: u64,
    pub count_d0: u64,
    pub count_d1: u64,
    /// Per-choice tallies under a delayed policy.
    pub by_choice: Option<ChoiceBreakdown>,
}

const HALF: Complex64 = Complex64::new(FRAC_1_SQRT_2, 0.0);

fn beamsplit(amps: [Complex64; 2]) -> [Complex64; 2] {
    [HALF * (amps[0] + amps[1]), HALF * (amps[0] - amps[1])]
}

/// State just after the first splitter and the phase shifter.
fn path_superposition(phase: f64) -> [Complex64; 2] {
    let [a0, a1] = beamsplit([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    [a0, a1 * Complex64::from_polar(1.0, phase)]
}

fn output_state(phase: f64, second_bs: bool) -> StateVector {
    let paths = path_superposition(phase);
    let out = if second_bs { beamsplit(paths) } else { paths };
    StateVector::new(out.to_vec()).expect("unitary evolution keeps the state normalized")
}

fn detectors() -> MeasurementBasis {
    MeasurementBasis::new(0.0).expect("0 is finite")
}

/// Exact `(P(D0), P(D1))` for a fixed configuration.
pub fn mzi_probabilities(phase: f64, second_bs: bool) -> Result<(f64, f64)> {
    if !phase.is_finite() {
        return Err(invalid("phase must be finite"));
    }
    born_probabilities(&output_state(phase, second_bs), &detectors())
}

/// Simulates `n` photons.
pub fn run_mzi(config: &MziConfig, n: u64, seed: u64) -> Result<MziStats> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    config.validate()?;
    let basis = detectors();
    let zero = DetectorCounts { n: 0, count_d0: 0, count_d1: 0 };
    let breakdown = run_chunked(
        n,
        seed,
        DOMAIN_DETECTION,
        ChoiceBreakdown { present: zero, absent: zero },
        |rng, start, count| {
            // choices draw from a sibling stream so the detection draws are
            // identical under every policy
            let mut choice_rng = stream_from_seed(seed, chunk_stream_index(DOMAIN_CHOICE, start / CHUNK_SIZE));
            let mut present = zero;
            let mut absent = zero;
            for _ in 0..count {
                let paths = path_superposition(config.phase);
                let inserted = match config.choice_policy {
                    ChoicePolicy::Fixed { second_bs } => second_bs,
                    ChoicePolicy::DelayedRandom { p_present } => choice_rng.uniform() < p_present,
                };
                let out = if inserted { beamsplit(paths) } else { paths };
                let state = StateVector::new(out.to_vec()).expect("unitary evolution keeps the norm");
                let outcome = collapse(&state, &basis, rng).expect("normalized output state").outcome;
                let tally = if inserted { &mut present } else { &mut absent };
                tally.n += 1;
                if outcome == 0 {
                    tally.count_d0 += 1;
                } else {
                    tally.count_d1 += 1;
                }
            }
            ChoiceBreakdown { present, absent }
        },
        |a, b| ChoiceBreakdown { present: a.present.add(b.present), absent: a.absent.add(b.absent) },
    );
    let total = breakdown.present.add(breakdown.absent);
    Ok(MziStats {
        n,
        count_d0: total.count_d0,
        count_d1: total.count_d1,
        by_choice: matches!(config.choice_policy, ChoicePolicy::DelayedRandom { .. }).then_some(breakdown),
    })
}

/// Delayed-choice conditional statistics set against fixed-choice runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingInvarianceReport {
    pub phase: f64,
    pub p_present: f64,
    pub n: u64,
    pub delayed: MziStats,
    pub fixed_closed: MziStats,
    pub fixed_open: MziStats,
    /// Two-proportion z of D0 given "present" against the fixed closed run.
    pub z_present: Option<f64>,
    /// Two-proportion z of D0 given "absent" against the fixed open run.
    pub z_absent: Option<f64>,
    pub sigma_band: f64,
    pub consistent: bool,
}

/// Runs a delayed-random configuration and the two fixed configurations
/// (seeds `seed`, `seed + 1`, `seed + 2`) and compares the conditional
/// detector statistics.
pub fn choice_timing_invariance(phase: f64, p_present: f64, n: u64, seed: u64) -> Result<TimingInvarianceReport> {
    let delayed = run_mzi(&MziConfig::delayed(phase, p_present), n, seed)?;
    let fixed_closed = run_mzi(&MziConfig::closed(phase), n, seed.wrapping_add(1))?;
    let fixed_open = run_mzi(&MziConfig::open(phase), n, seed.wrapping_add(2))?;
    let split = delayed.by_choice.expect("delayed policy records the breakdown");
    let z = |cond: &DetectorCounts, fixed: &MziStats| -> Option<f64> {
        let c = cond.d0()?;
        let f = BinomialEstimate::new(fixed.count_d0, fixed.n).ok()?;
        Some(two_proportion_z(&c, &f))
    };
    let z_present = z(&split.present, &fixed_closed);
    let z_absent = z(&split.absent, &fixed_open);
    let consistent = [z_present, z_absent].iter().flatten().all(|v| v.abs() <= SWEEP_SIGMAS);
    Ok(TimingInvarianceReport {
        phase,
        p_present,
        n,
        delayed,
        fixed_closed,
        fixed_open,
        z_present,
        z_absent,
        sigma_band: SWEEP_SIGMAS,
        consistent,
    })
}
