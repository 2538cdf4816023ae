//! Shannon and von Neumann entropy, and the entropy change of a collapse.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::quantum::{born_probabilities, collapse, DensityOperator, MeasurementBasis, StateVector};
use crate::rng::RngStream;

/// A discrete distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("empty probability vector"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < -1e-12 || *p > 1.0 + 1e-12) {
            return Err(invalid(format!("probabilities out of range: {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self { probs: probs.into_iter().map(|p| p.clamp(0.0, 1.0)).collect() })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Entropy before and after a measurement, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyReport {
    pub before_bits: f64,
    pub after_bits: f64,
    pub delta_bits: f64,
    pub outcome: u8,
}

fn entropy_bits(probs: impl IntoIterator<Item = f64>) -> f64 {
    let h: f64 = probs.into_iter().filter(|p| *p > 0.0).map(|p| -p * p.log2()).sum();
    // -0.0 and rounding below zero both read as zero
    h.max(0.0)
}

/// `H = −Σ pᵢ log₂ pᵢ` with `0 · log₂ 0 = 0`.
pub fn shannon_entropy(p: &ProbabilityVector) -> f64 {
    entropy_bits(p.probs.iter().copied())
}

/// Shannon entropy of the Born distribution of `state` in `basis`.
pub fn qubit_superposition_entropy(state: &StateVector, basis: &MeasurementBasis) -> Result<f64> {
    let (p0, p1) = born_probabilities(state, basis)?;
    Ok(shannon_entropy(&ProbabilityVector::new(vec![p0, p1])?))
}

/// Measures `state` and reports the entropy before and after.
///
/// The post-measurement state is a basis eigenvector. Its overlap with the
/// other eigenvector is `c·s − s·c`, which cancels exactly in floating point,
/// so the entropy after is exactly zero.
pub fn collapse_entropy_report(state: &StateVector, basis: &MeasurementBasis, rng: &mut RngStream) -> Result<EntropyReport> {
    let before_bits = qubit_superposition_entropy(state, basis)?;
    let record = collapse(state, basis, rng)?;
    let after_bits = qubit_superposition_entropy(&record.post_state, basis)?;
    Ok(EntropyReport { before_bits, after_bits, delta_bits: after_bits - before_bits, outcome: record.outcome })
}

/// `S(ρ) = −Σ λᵢ log₂ λᵢ` over the spectrum of ρ.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    rho.validate().map_err(|e| invalid(e.to_string()))?;
    // eigenvalues within tolerance of zero carry no entropy
    Ok(entropy_bits(rho.eigenvalues().into_iter().map(|l| if l < 1e-14 { 0.0 } else { l })))
}
