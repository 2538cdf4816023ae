//! Polarization-entangled photon pairs: joint and sequential measurement,
//! correlation statistics, CHSH and the no-signaling oracle.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{contract, invalid, Result};
use crate::quantum::{
    collapse, partial_trace, tensor_product, trace_distance, DensityOperator, MeasurementBasis, OutcomeRecord, StateVector, Subsystem,
};
use crate::rng::{run_chunked, RngStream};
use crate::stats::BinomialEstimate;

/// Stream domains for pair sampling; CHSH terms use consecutive domains.
const DOMAIN_CORRELATION: u64 = 16;
/// Base domain for B-marginal runs; callers add their own offset.
const DOMAIN_BOB_MARGINAL: u64 = 1 << 12;

/// Branch probabilities below this are treated as impossible.
const IMPOSSIBLE: f64 = 1e-15;

/// Joint state of photons A and B, amplitudes ordered `|AB⟩ = 00, 01, 10, 11`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub joint: StateVector,
}

impl PairState {
    /// `(|01⟩ − |10⟩)/√2`: orthogonal polarizations in every basis.
    pub fn singlet() -> Self {
        let z = Complex64::new(0.0, 0.0);
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self { joint: StateVector::new(vec![z, h, -h, z]).expect("singlet is normalized") }
    }

    /// `(|01⟩ + |10⟩)/√2`: orthogonal in the H/V basis only.
    pub fn psi_plus() -> Self {
        let z = Complex64::new(0.0, 0.0);
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self { joint: StateVector::new(vec![z, h, h, z]).expect("normalized") }
    }

    /// Unentangled pair `|a⟩ ⊗ |b⟩`.
    pub fn product(a: &StateVector, b: &StateVector) -> Result<Self> {
        Ok(Self { joint: tensor_product(a, b)? })
    }

    pub fn new(joint: StateVector) -> Result<Self> {
        if joint.dim() != 4 {
            return Err(invalid("a pair state has dimension 4"));
        }
        Ok(Self { joint })
    }

    /// Reduced state of one photon before anything is measured.
    pub fn reduced(&self, keep: Subsystem) -> Result<DensityOperator> {
        partial_trace(&self.joint.to_density(), keep)
    }
}

/// The source used throughout: the singlet.
pub fn make_pair() -> PairState {
    PairState::singlet()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointOutcome {
    pub outcome_a: u8,
    pub outcome_b: u8,
    pub basis_a: MeasurementBasis,
    pub basis_b: MeasurementBasis,
}

/// `(⟨e|_A ⊗ I) |ψ⟩`, unnormalized.
fn project_a(pair: &PairState, e: &StateVector) -> [Complex64; 2] {
    let psi = pair.joint.amplitudes();
    let ea = e.amplitudes();
    let mut v = [Complex64::new(0.0, 0.0); 2];
    for (j, vj) in v.iter_mut().enumerate() {
        *vj = ea[0].conj() * psi[j] + ea[1].conj() * psi[2 + j];
    }
    v
}

/// Probability of A's `outcome` in `basis_a` and B's normalized state given it.
pub fn condition_on_a(pair: &PairState, basis_a: &MeasurementBasis, outcome: u8) -> Result<(f64, StateVector)> {
    let v = project_a(pair, &basis_a.eigenvector(outcome));
    let p = v[0].norm_sqr() + v[1].norm_sqr();
    if p < IMPOSSIBLE {
        return Err(contract(format!("outcome {outcome} of A at θ = {} has zero probability", basis_a.theta())));
    }
    Ok((p, StateVector::new(v.to_vec())?))
}

/// Measures photon A; returns A's record and B's conditional state.
pub fn measure_a(pair: &PairState, basis_a: &MeasurementBasis, rng: &mut RngStream) -> Result<(OutcomeRecord, StateVector)> {
    let v0 = project_a(pair, &basis_a.aligned());
    let v1 = project_a(pair, &basis_a.orthogonal());
    let w0 = v0[0].norm_sqr() + v0[1].norm_sqr();
    let w1 = v1[0].norm_sqr() + v1[1].norm_sqr();
    let p0 = if w0 < IMPOSSIBLE {
        0.0
    } else if w1 < IMPOSSIBLE {
        1.0
    } else {
        w0 / (w0 + w1)
    };
    let outcome = u8::from(rng.uniform() >= p0);
    let (probability, b_state) = condition_on_a(pair, basis_a, outcome)?;
    Ok((OutcomeRecord { outcome, post_state: basis_a.eigenvector(outcome), basis: *basis_a, probability }, b_state))
}

/// Born distribution `P[a][b]` of a joint measurement.
pub fn joint_distribution(pair: &PairState, basis_a: &MeasurementBasis, basis_b: &MeasurementBasis) -> [[f64; 2]; 2] {
    let mut p = [[0.0; 2]; 2];
    for (a, row) in p.iter_mut().enumerate() {
        let v = project_a(pair, &basis_a.eigenvector(a as u8));
        for (b, cell) in row.iter_mut().enumerate() {
            let eb = basis_b.eigenvector(b as u8);
            let e = eb.amplitudes();
            *cell = (e[0].conj() * v[0] + e[1].conj() * v[1]).norm_sqr();
        }
    }
    // rounding residue on forbidden cells is zeroed so they are never sampled
    p.iter_mut().flatten().filter(|x| **x < IMPOSSIBLE).for_each(|x| *x = 0.0);
    let total: f64 = p.iter().flatten().sum();
    p.iter_mut().flatten().for_each(|x| *x /= total);
    p
}

fn sample_joint(p: &[[f64; 2]; 2], u: f64) -> (u8, u8) {
    let cells = [(0u8, 0u8), (0, 1), (1, 0), (1, 1)];
    let mut cum = 0.0;
    let mut last = (1, 1);
    for (a, b) in cells {
        let w = p[a as usize][b as usize];
        if w <= 0.0 {
            continue;
        }
        cum += w;
        last = (a, b);
        if u < cum {
            return (a, b);
        }
    }
    last
}

/// Samples both photons at once from the four-outcome Born distribution.
pub fn measure_pair(pair: &PairState, basis_a: &MeasurementBasis, basis_b: &MeasurementBasis, rng: &mut RngStream) -> JointOutcome {
    let p = joint_distribution(pair, basis_a, basis_b);
    let (outcome_a, outcome_b) = sample_joint(&p, rng.uniform());
    JointOutcome { outcome_a, outcome_b, basis_a: *basis_a, basis_b: *basis_b }
}

/// Measures A, then B's conditional state.
pub fn measure_sequential(
    pair: &PairState,
    basis_a: &MeasurementBasis,
    basis_b: &MeasurementBasis,
    rng: &mut RngStream,
) -> Result<JointOutcome> {
    let (a, b_state) = measure_a(pair, basis_a, rng)?;
    let b = collapse(&b_state, basis_b, rng)?;
    Ok(JointOutcome { outcome_a: a.outcome, outcome_b: b.outcome, basis_a: *basis_a, basis_b: *basis_b })
}

/// Sample mean of ±1 (+1 when outcomes agree).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationStats {
    pub e_value: f64,
    pub n: u64,
    pub std_err: f64,
}

impl CorrelationStats {
    fn from_equal_count(equal: u64, n: u64) -> Self {
        let e_value = (2.0 * equal as f64 - n as f64) / n as f64;
        Self { e_value, n, std_err: ((1.0 - e_value * e_value).max(0.0) / n as f64).sqrt() }
    }
}

/// Analytic correlation of a pair state at two angles.
pub fn correlation_analytic(pair: &PairState, theta_a: f64, theta_b: f64) -> Result<f64> {
    let p = joint_distribution(pair, &MeasurementBasis::new(theta_a)?, &MeasurementBasis::new(theta_b)?);
    Ok(p[0][0] + p[1][1] - p[0][1] - p[1][0])
}

fn correlation_in_domain(pair: &PairState, theta_a: f64, theta_b: f64, n: u64, seed: u64, domain: u64) -> Result<CorrelationStats> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let ba = MeasurementBasis::new(theta_a)?;
    let bb = MeasurementBasis::new(theta_b)?;
    let p = joint_distribution(pair, &ba, &bb);
    let equal = run_chunked(
        n,
        seed,
        domain,
        0u64,
        |rng, _, count| {
            (0..count)
                .filter(|_| {
                    let (a, b) = sample_joint(&p, rng.uniform());
                    a == b
                })
                .count() as u64
        },
        |x, y| x + y,
    );
    Ok(CorrelationStats::from_equal_count(equal, n))
}

/// Monte Carlo correlation `E(θ_a, θ_b)` of the singlet.
pub fn correlation(theta_a: f64, theta_b: f64, n: u64, seed: u64) -> Result<CorrelationStats> {
    correlation_with(&make_pair(), theta_a, theta_b, n, seed)
}

pub fn correlation_with(pair: &PairState, theta_a: f64, theta_b: f64, n: u64, seed: u64) -> Result<CorrelationStats> {
    correlation_in_domain(pair, theta_a, theta_b, n, seed, DOMAIN_CORRELATION)
}

/// CHSH settings `(a, a′, b, b′)` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshSettings {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl ChshSettings {
    /// `(0, π/4, π/8, 3π/8)`, the singlet optimum.
    pub fn standard() -> Self {
        use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
        Self { a: 0.0, a_prime: FRAC_PI_4, b: FRAC_PI_8, b_prime: 3.0 * FRAC_PI_8 }
    }

    fn terms(&self) -> [(f64, f64); 4] {
        [(self.a, self.b), (self.a, self.b_prime), (self.a_prime, self.b), (self.a_prime, self.b_prime)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChshResult {
    pub s: f64,
    pub std_err: f64,
    /// `E(a,b), E(a,b′), E(a′,b), E(a′,b′)`
    pub terms: [CorrelationStats; 4],
}

/// `S = |E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)|` from independent runs.
pub fn chsh(settings: &ChshSettings, n_per_setting: u64, seed: u64) -> Result<ChshResult> {
    chsh_with(&make_pair(), settings, n_per_setting, seed)
}

pub fn chsh_with(pair: &PairState, settings: &ChshSettings, n_per_setting: u64, seed: u64) -> Result<ChshResult> {
    let mut terms = [CorrelationStats { e_value: 0.0, n: 0, std_err: 0.0 }; 4];
    for (k, (ta, tb)) in settings.terms().into_iter().enumerate() {
        terms[k] = correlation_in_domain(pair, ta, tb, n_per_setting, seed, DOMAIN_CORRELATION + 1 + k as u64)?;
    }
    let s = (terms[0].e_value - terms[1].e_value + terms[2].e_value + terms[3].e_value).abs();
    let std_err = terms.iter().map(|t| t.std_err * t.std_err).sum::<f64>().sqrt();
    Ok(ChshResult { s, std_err, terms })
}

/// Fraction of B outcomes equal to 0 in `theta_b` when A is first measured
/// in `theta_a`, sampled sequentially.
pub fn bob_marginal_mc(pair: &PairState, theta_a: f64, theta_b: f64, n: u64, seed: u64, domain: u64) -> Result<BinomialEstimate> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let ba = MeasurementBasis::new(theta_a)?;
    let bb = MeasurementBasis::new(theta_b)?;
    let zeros = run_chunked(
        n,
        seed,
        DOMAIN_BOB_MARGINAL + domain,
        Ok(0u64),
        |rng, _, count| {
            let mut zeros = 0;
            for _ in 0..count {
                zeros += u64::from(measure_sequential(pair, &ba, &bb, rng)?.outcome_b == 0);
            }
            Ok(zeros)
        },
        |acc: Result<u64>, part| Ok(acc? + part?),
    )?;
    BinomialEstimate::new(zeros, n)
}

/// B's state averaged over A's outcomes after A is measured in `basis_a`.
pub fn bob_state_after_alice(pair: &PairState, basis_a: &MeasurementBasis) -> Result<DensityOperator> {
    let mut parts = Vec::with_capacity(2);
    for outcome in 0..2 {
        match condition_on_a(pair, basis_a, outcome) {
            Ok(branch) => parts.push(branch),
            Err(_) => continue,
        }
    }
    DensityOperator::mixture(&parts)
}

/// Largest trace distance between B's unconditional states over the listed
/// Alice bases.
pub fn no_signaling_check(bases_a: &[f64]) -> Result<f64> {
    no_signaling_check_with(&make_pair(), bases_a)
}

pub fn no_signaling_check_with(pair: &PairState, bases_a: &[f64]) -> Result<f64> {
    if bases_a.is_empty() {
        return Err(invalid("at least one Alice basis is required"));
    }
    let states = bases_a.iter().map(|t| bob_state_after_alice(pair, &MeasurementBasis::new(*t)?)).collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            worst = worst.max(trace_distance(&states[i], &states[j])?);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::ket_from_angle;
    use crate::rng::stream_from_seed;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

    fn basis(t: f64) -> MeasurementBasis {
        MeasurementBasis::new(t).unwrap()
    }

    #[test]
    fn singlet_amplitudes() {
        let h = FRAC_1_SQRT_2;
        let want = [0.0, h, -h, 0.0];
        for (a, w) in make_pair().joint.amplitudes().iter().zip(want) {
            assert_eq!(*a, Complex64::new(w, 0.0));
        }
    }

    #[test]
    fn singlet_halves_are_maximally_mixed() {
        let half = DensityOperator::maximally_mixed(2).unwrap();
        for keep in [Subsystem::A, Subsystem::B] {
            assert!(make_pair().reduced(keep).unwrap().max_abs_diff(&half) < 1e-15);
        }
    }

    #[test]
    fn equal_bases_always_disagree() {
        let pair = make_pair();
        let mut rng = stream_from_seed(4, 0);
        for k in 0..50 {
            let b = basis(k as f64 * 0.37);
            let p = joint_distribution(&pair, &b, &b);
            assert_eq!(p[0][0], 0.0);
            assert_eq!(p[1][1], 0.0);
            for _ in 0..100 {
                let o = measure_pair(&pair, &b, &b, &mut rng);
                assert_ne!(o.outcome_a, o.outcome_b);
            }
        }
    }

    #[test]
    fn conditional_b_is_orthogonal_to_a() {
        let pair = make_pair();
        let (p, b) = condition_on_a(&pair, &basis(0.0), 0).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!(b.approx_eq_up_to_phase(&ket_from_angle(FRAC_PI_2).unwrap(), 1e-15));
        let (_, b) = condition_on_a(&pair, &basis(FRAC_PI_4), 0).unwrap();
        assert!(b.approx_eq_up_to_phase(&ket_from_angle(FRAC_PI_4 + FRAC_PI_2).unwrap(), 1e-12));
    }

    #[test]
    fn impossible_branch_is_rejected() {
        let h = StateVector::qubit(1.0, 0.0).unwrap();
        let pair = PairState::product(&h, &h).unwrap();
        assert!(matches!(condition_on_a(&pair, &basis(0.0), 1), Err(crate::Error::ContractViolation(_))));
    }

    #[test]
    fn alice_marginal_is_half_in_every_basis() {
        let pair = make_pair();
        for k in 0..32 {
            let (p, _) = condition_on_a(&pair, &basis(k as f64 * PI / 32.0), 0).unwrap();
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_distribution_examples() {
        let pair = make_pair();
        // crossed bases: brute force over the four cells gives equal outcomes only
        let p = joint_distribution(&pair, &basis(0.3), &basis(0.3 + FRAC_PI_2));
        assert!(p[0][1] < 1e-12 && p[1][0] < 1e-12);
        // Δ = π/8: P(equal) = sin²(π/8) = 0.14644660940672624
        let p = joint_distribution(&pair, &basis(0.0), &basis(FRAC_PI_8));
        assert!((p[0][0] + p[1][1] - 0.146_446_609_406_726_24).abs() < 1e-12);
        for row in p {
            assert!((row.iter().sum::<f64>() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_examples() {
        let c = correlation(0.4, 0.4, 10_000, 1).unwrap();
        assert_eq!(c.e_value, -1.0);
        assert_eq!(c.std_err, 0.0);
        let c = correlation(FRAC_PI_4, 0.0, 1_000_000, 2).unwrap();
        assert!(c.e_value.abs() < 3.0 * (1.0f64 / 1e6).sqrt(), "{c:?}");
        let c = correlation(FRAC_PI_8, 0.0, 1_000_000, 3).unwrap();
        let want = -0.707_106_781_186_547_5;
        let sigma = ((1.0 - want * want) / 1e6f64).sqrt();
        assert!((c.e_value - want).abs() < 3.0 * sigma, "{c:?}");
        assert!((c.std_err - sigma).abs() < 0.1 * sigma);
        assert!(correlation(0.0, 0.0, 0, 0).is_err());
    }

    #[test]
    fn chsh_examples() {
        let r = chsh(&ChshSettings::standard(), 1_000_000, 5).unwrap();
        assert!((r.s - 2.828_427_124_746_19).abs() < 3.0 * r.std_err, "{r:?}");
        let same = ChshSettings { a: 0.7, a_prime: 0.7, b: 0.7, b_prime: 0.7 };
        assert_eq!(chsh(&same, 1000, 5).unwrap().s, 2.0);
        let h = ket_from_angle(0.2).unwrap();
        let v = ket_from_angle(1.3).unwrap();
        let product = PairState::product(&h, &v).unwrap();
        let r = chsh_with(&product, &ChshSettings::standard(), 200_000, 6).unwrap();
        assert!(r.s <= 2.0 + 3.0 * r.std_err, "{r:?}");
    }

    #[test]
    fn no_signaling_examples() {
        assert!(no_signaling_check(&[0.0, FRAC_PI_4]).unwrap() < 1e-12);
        assert_eq!(no_signaling_check(&[0.0]).unwrap(), 0.0);
        let sweep: Vec<f64> = (0..32).map(|k| k as f64 * PI / 32.0).collect();
        assert!(no_signaling_check(&sweep).unwrap() < 1e-12);
        assert!(no_signaling_check(&[]).is_err());
    }

    #[test]
    fn no_signaling_holds_for_psi_plus_too() {
        let sweep: Vec<f64> = (0..16).map(|k| k as f64 * PI / 16.0).collect();
        assert!(no_signaling_check_with(&PairState::psi_plus(), &sweep).unwrap() < 1e-12);
    }
}
