//! Two- and four-dimensional states, density operators, polarization bases,
//! Born probabilities and projective collapse.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::eigen::hermitian_eigenvalues;
use crate::error::{contract, invalid, Result};
use crate::rng::RngStream;

/// Tolerance for algebraic identities.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance for precondition checks on caller-supplied data.
pub const PRECONDITION_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Trig results this close to zero are flushed, so axis-aligned angles give
/// exactly orthogonal vectors.
const TRIG_FLUSH: f64 = 4.0 * f64::EPSILON;

fn cos_sin(theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let flush = |v: f64| if v.abs() < TRIG_FLUSH { 0.0 } else { v };
    (flush(c), flush(s))
}

/// Reduces an angle to the canonical polarization range `[0, π)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly π
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Which half of a two-photon system to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Subsystem {
    A,
    B,
}

/// A normalized pure state of dimension 2 or 4.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Normalizing constructor.
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 2 && amps.len() != 4 {
            return Err(invalid(format!("state dimension must be 2 or 4, got {}", amps.len())));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(invalid("state amplitudes must be finite"));
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(invalid("zero vector is not a state"));
        }
        Ok(Self { amps: amps.into_iter().map(|a| a / norm).collect() })
    }

    /// Real qubit `(a, b)`, normalized.
    pub fn qubit(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(a, 0.0), Complex64::new(b, 0.0)])
    }

    /// Stores amplitudes as given; the caller guarantees unit norm.
    pub(crate) fn from_normalized(amps: Vec<Complex64>) -> Self {
        debug_assert!((amps.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs() < PRECONDITION_TOL);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Equality up to a global phase, within `tol` on |⟨a|b⟩|.
    pub fn approx_eq_up_to_phase(&self, other: &StateVector, tol: f64) -> bool {
        self.dim() == other.dim() && (1.0 - self.inner(other).norm()).abs() <= tol
    }

    pub fn to_density(&self) -> DensityOperator {
        let n = self.dim();
        let mut m = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = self.amps[i] * self.amps[j].conj();
            }
        }
        DensityOperator { dim: n, m }
    }

    fn check_normalized(&self) -> Result<()> {
        let dev = (self.norm_sqr().sqrt() - 1.0).abs();
        if dev > PRECONDITION_TOL {
            return Err(contract(format!("state is not normalized (norm deviation {dev:e})")));
        }
        Ok(())
    }
}

/// A polarization measurement basis `{|θ⟩, |θ⊥⟩}` with θ in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasurementBasis {
    theta: f64,
}

impl MeasurementBasis {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(invalid("basis angle must be finite"));
        }
        Ok(Self { theta: canonical_angle(theta) })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `|θ⟩ = (cos θ, sin θ)`
    pub fn aligned(&self) -> StateVector {
        let (c, s) = cos_sin(self.theta);
        StateVector::from_normalized(vec![Complex64::new(c, 0.0), Complex64::new(s, 0.0)])
    }

    /// `|θ⊥⟩ = (−sin θ, cos θ)`
    pub fn orthogonal(&self) -> StateVector {
        let (c, s) = cos_sin(self.theta);
        StateVector::from_normalized(vec![Complex64::new(-s, 0.0), Complex64::new(c, 0.0)])
    }

    pub fn eigenvector(&self, outcome: u8) -> StateVector {
        if outcome == 0 {
            self.aligned()
        } else {
            self.orthogonal()
        }
    }
}

/// Result of one projective measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRecord {
    /// 0 for the aligned eigenvector, 1 for the orthogonal one.
    pub outcome: u8,
    pub post_state: StateVector,
    pub basis: MeasurementBasis,
    pub probability: f64,
}

/// `(cos θ, sin θ)` for any finite θ.
pub fn ket_from_angle(theta: f64) -> Result<StateVector> {
    if !theta.is_finite() {
        return Err(invalid("angle must be finite"));
    }
    let (c, s) = cos_sin(theta);
    Ok(StateVector::from_normalized(vec![Complex64::new(c, 0.0), Complex64::new(s, 0.0)]))
}

/// `(|⟨θ|ψ⟩|², |⟨θ⊥|ψ⟩|²)`, summing to one.
pub fn born_probabilities(state: &StateVector, basis: &MeasurementBasis) -> Result<(f64, f64)> {
    if state.dim() != 2 {
        return Err(invalid("Born probabilities in a polarization basis need a qubit"));
    }
    state.check_normalized()?;
    let a = basis.aligned().inner(state).norm_sqr();
    let b = basis.orthogonal().inner(state).norm_sqr();
    let p0 = a / (a + b);
    Ok((p0, 1.0 - p0))
}

/// Samples a projective measurement and returns the collapsed state.
pub fn collapse(state: &StateVector, basis: &MeasurementBasis, rng: &mut RngStream) -> Result<OutcomeRecord> {
    let (p0, p1) = born_probabilities(state, basis)?;
    let outcome = u8::from(rng.uniform() >= p0);
    Ok(OutcomeRecord { outcome, post_state: basis.eigenvector(outcome), basis: *basis, probability: if outcome == 0 { p0 } else { p1 } })
}

/// Kronecker product of two qubits, amplitudes ordered `a₀b₀, a₀b₁, a₁b₀, a₁b₁`.
pub fn tensor_product(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    if a.dim() != 2 || b.dim() != 2 {
        return Err(invalid("tensor_product takes two qubits"));
    }
    a.check_normalized()?;
    b.check_normalized()?;
    let amps = a.amps.iter().flat_map(|x| b.amps.iter().map(move |y| x * y)).collect();
    StateVector::new(amps)
}

/// Hermitian, unit-trace, positive semidefinite operator of dimension 2 or 4.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    dim: usize,
    /// row-major
    m: Vec<Complex64>,
}

impl DensityOperator {
    /// Validating constructor from row-major entries.
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim != 2 && dim != 4 {
            return Err(invalid(format!("density operator dimension must be 2 or 4, got {dim}")));
        }
        if entries.len() != dim * dim {
            return Err(invalid("entry count does not match dimension"));
        }
        let rho = Self { dim, m: entries };
        rho.validate()?;
        Ok(rho)
    }

    /// `I / dim`
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        let mut m = vec![ZERO; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = ONE / dim as f64;
        }
        Self::new(dim, m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.m[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.m
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entry(i, i)).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.dim, &self.m)
    }

    /// Checks Hermiticity, unit trace and positivity at [`ALGEBRA_TOL`].
    pub fn validate(&self) -> Result<()> {
        if self.m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(contract("density operator has non-finite entries"));
        }
        for i in 0..self.dim {
            for j in i..self.dim {
                if (self.entry(i, j) - self.entry(j, i).conj()).norm() > ALGEBRA_TOL {
                    return Err(contract("density operator is not Hermitian"));
                }
            }
        }
        if (self.trace() - ONE).norm() > ALGEBRA_TOL {
            return Err(contract(format!("density operator trace is {}", self.trace())));
        }
        if let Some(min) = self.eigenvalues().first() {
            if *min < -ALGEBRA_TOL {
                return Err(contract(format!("density operator has negative eigenvalue {min:e}")));
            }
        }
        Ok(())
    }

    /// `⟨ψ|ρ|ψ⟩`
    pub fn expectation(&self, psi: &StateVector) -> f64 {
        let n = self.dim;
        let a = psi.amplitudes();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += a[i].conj() * self.m[i * n + j] * a[j];
            }
        }
        acc.re
    }

    /// `ρ_A ⊗ ρ_B` for two qubit operators.
    pub fn kron(&self, other: &DensityOperator) -> Result<DensityOperator> {
        if self.dim != 2 || other.dim != 2 {
            return Err(invalid("kron takes two qubit operators"));
        }
        let mut m = vec![ZERO; 16];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m[(2 * i + k) * 4 + (2 * j + l)] = self.entry(i, j) * other.entry(k, l);
                    }
                }
            }
        }
        Ok(DensityOperator { dim: 4, m })
    }

    /// Probability-weighted sum of qubit projectors, `Σ wᵢ |ψᵢ⟩⟨ψᵢ|`.
    pub fn mixture(parts: &[(f64, StateVector)]) -> Result<DensityOperator> {
        let dim = parts.first().map(|(_, s)| s.dim()).ok_or_else(|| invalid("empty mixture"))?;
        let mut m = vec![ZERO; dim * dim];
        for (w, s) in parts {
            if s.dim() != dim {
                return Err(invalid("mixture components differ in dimension"));
            }
            for (acc, v) in m.iter_mut().zip(s.to_density().m) {
                *acc += v * *w;
            }
        }
        DensityOperator::new(dim, m)
    }

    /// Largest entrywise deviation from another operator.
    pub fn max_abs_diff(&self, other: &DensityOperator) -> f64 {
        self.m.iter().zip(&other.m).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Reduced state of one photon of a two-photon operator.
pub fn partial_trace(rho: &DensityOperator, keep: Subsystem) -> Result<DensityOperator> {
    if rho.dim != 4 {
        return Err(contract("partial_trace needs a two-qubit (4×4) operator"));
    }
    rho.validate()?;
    let mut m = vec![ZERO; 4];
    for i in 0..2 {
        for j in 0..2 {
            m[i * 2 + j] = (0..2)
                .map(|k| match keep {
                    // index of |x y⟩ is 2x + y
                    Subsystem::A => rho.entry(2 * i + k, 2 * j + k),
                    Subsystem::B => rho.entry(2 * k + i, 2 * k + j),
                })
                .sum();
        }
    }
    DensityOperator::new(2, m)
}

/// `½ Σ |λᵢ(ρ₁ − ρ₂)|`
pub fn trace_distance(r1: &DensityOperator, r2: &DensityOperator) -> Result<f64> {
    if r1.dim != r2.dim {
        return Err(invalid(format!("dimension mismatch: {} vs {}", r1.dim, r2.dim)));
    }
    let diff: Vec<Complex64> = r1.m.iter().zip(&r2.m).map(|(a, b)| a - b).collect();
    let ev = hermitian_eigenvalues(r1.dim, &diff);
    Ok(0.5 * ev.iter().map(|l| l.abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_from_seed;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag2(a: f64, b: f64) -> DensityOperator {
        DensityOperator::new(2, vec![c(a), ZERO, ZERO, c(b)]).unwrap()
    }

    #[test]
    fn ket_at_axes_and_diagonal() {
        assert_eq!(ket_from_angle(0.0).unwrap().amplitudes(), &[c(1.0), c(0.0)]);
        assert_eq!(ket_from_angle(FRAC_PI_2).unwrap().amplitudes(), &[c(0.0), c(1.0)]);
        let d = ket_from_angle(FRAC_PI_4).unwrap();
        // cos(π/4) = 0.70710678118654752440...
        for a in d.amplitudes() {
            assert!((a.re - 0.707_106_781_186_547_5).abs() < 1e-15);
        }
    }

    #[test]
    fn ket_rejects_non_finite() {
        assert!(matches!(ket_from_angle(f64::NAN), Err(crate::Error::InvalidArgument(_))));
        assert!(ket_from_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn ket_period_pi_is_global_sign() {
        let a = ket_from_angle(0.7).unwrap();
        let b = ket_from_angle(0.7 + PI).unwrap();
        assert!(a.approx_eq_up_to_phase(&b, 1e-12));
    }

    #[test]
    fn born_examples() {
        let b0 = MeasurementBasis::new(0.0).unwrap();
        assert_eq!(born_probabilities(&StateVector::qubit(1.0, 0.0).unwrap(), &b0).unwrap(), (1.0, 0.0));
        let (p0, p1) = born_probabilities(&StateVector::qubit(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap(), &b0).unwrap();
        assert!((p0 - 0.5).abs() < 1e-15 && (p1 - 0.5).abs() < 1e-15);
        // cos²(π/6) = 0.75 exactly in real arithmetic
        let b = MeasurementBasis::new(FRAC_PI_6).unwrap();
        let (p0, p1) = born_probabilities(&StateVector::qubit(1.0, 0.0).unwrap(), &b).unwrap();
        assert!((p0 - 0.75).abs() < 1e-12 && (p1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn born_rejects_unnormalized() {
        let bad = StateVector { amps: vec![c(1.0), c(0.1)] };
        let b = MeasurementBasis::new(0.0).unwrap();
        assert!(matches!(born_probabilities(&bad, &b), Err(crate::Error::ContractViolation(_))));
    }

    #[test]
    fn collapse_on_eigenstates_is_certain() {
        let b0 = MeasurementBasis::new(0.0).unwrap();
        for seed in 0..20 {
            let mut rng = stream_from_seed(seed, 0);
            let r = collapse(&StateVector::qubit(1.0, 0.0).unwrap(), &b0, &mut rng).unwrap();
            assert_eq!(r.outcome, 0);
            assert_eq!(r.post_state.amplitudes(), &[c(1.0), c(0.0)]);
            let r = collapse(&StateVector::qubit(0.0, 1.0).unwrap(), &b0, &mut rng).unwrap();
            assert_eq!(r.outcome, 1);
            assert!(r.post_state.approx_eq_up_to_phase(&StateVector::qubit(0.0, 1.0).unwrap(), 1e-15));
        }
    }

    #[test]
    fn collapse_equal_superposition_statistics() {
        let b0 = MeasurementBasis::new(0.0).unwrap();
        let psi = StateVector::qubit(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
        let mut rng = stream_from_seed(2024, 0);
        let n = 1_000_000;
        let zeros = (0..n).filter(|_| collapse(&psi, &b0, &mut rng).unwrap().outcome == 0).count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.5).abs() < 3.0 * 0.0005, "freq {freq}");
    }

    #[test]
    fn collapse_is_deterministic_in_stream() {
        let b = MeasurementBasis::new(0.4).unwrap();
        let psi = ket_from_angle(1.1).unwrap();
        let run = || {
            let mut rng = stream_from_seed(5, 3);
            (0..100).map(|_| collapse(&psi, &b, &mut rng).unwrap().outcome).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn tensor_product_examples() {
        let zero = StateVector::qubit(1.0, 0.0).unwrap();
        let one = StateVector::qubit(0.0, 1.0).unwrap();
        assert_eq!(tensor_product(&zero, &one).unwrap().amplitudes(), &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert_eq!(tensor_product(&zero, &zero).unwrap().amplitudes(), &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let plus = StateVector::qubit(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
        let t = tensor_product(&plus, &zero).unwrap();
        let want = [FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2, 0.0];
        for (a, w) in t.amplitudes().iter().zip(want) {
            assert!((a - c(w)).norm() < 1e-15);
        }
    }

    fn singlet_projector() -> DensityOperator {
        let s = StateVector::new(vec![c(0.0), c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2), c(0.0)]).unwrap();
        s.to_density()
    }

    #[test]
    fn partial_trace_examples() {
        let ket = |v: [f64; 4]| StateVector::new(v.iter().map(|x| c(*x)).collect()).unwrap().to_density();
        let r = partial_trace(&ket([1.0, 0.0, 0.0, 0.0]), Subsystem::B).unwrap();
        assert_eq!(r, diag2(1.0, 0.0));
        // |01⟩: A is |0⟩, B is |1⟩
        let r = partial_trace(&ket([0.0, 1.0, 0.0, 0.0]), Subsystem::A).unwrap();
        assert_eq!(r, diag2(1.0, 0.0));
        let r = partial_trace(&ket([0.0, 1.0, 0.0, 0.0]), Subsystem::B).unwrap();
        assert_eq!(r, diag2(0.0, 1.0));
        // singlet: by hand, ρ_B[i][j] = Σ_k ρ[2k+i][2k+j] = diag(½, ½)
        let r = partial_trace(&singlet_projector(), Subsystem::B).unwrap();
        assert!(r.max_abs_diff(&diag2(0.5, 0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_malformed() {
        let bad = DensityOperator { dim: 4, m: vec![c(0.5); 16] };
        assert!(matches!(partial_trace(&bad, Subsystem::A), Err(crate::Error::ContractViolation(_))));
        assert!(partial_trace(&diag2(1.0, 0.0), Subsystem::A).is_err());
    }

    #[test]
    fn trace_distance_examples() {
        let r = diag2(0.3, 0.7);
        assert!(trace_distance(&r, &r).unwrap().abs() < 1e-15);
        assert!((trace_distance(&diag2(1.0, 0.0), &diag2(0.0, 1.0)).unwrap() - 1.0).abs() < 1e-15);
        // difference diag(½, −½) → ½(½ + ½)
        assert!((trace_distance(&diag2(1.0, 0.0), &diag2(0.5, 0.5)).unwrap() - 0.5).abs() < 1e-15);
        assert!(trace_distance(&diag2(1.0, 0.0), &singlet_projector()).is_err());
    }

    #[test]
    fn density_validation() {
        assert!(DensityOperator::new(2, vec![c(1.0), c(0.0), c(0.0), c(1.0)]).is_err());
        assert!(DensityOperator::new(2, vec![c(1.5), c(0.0), c(0.0), c(-0.5)]).is_err());
        assert!(DensityOperator::new(2, vec![c(0.5), Complex64::new(0.0, 0.2), c(0.0), c(0.5)]).is_err());
        assert!(DensityOperator::new(3, vec![c(0.0); 9]).is_err());
        assert!(DensityOperator::maximally_mixed(4).is_ok());
    }
}
