//! The basis-encoding bit transmission scheme over entangled pairs.
//!
//! Alice encodes each bit by the basis in which she measures her photon of a
//! fresh singlet pair. Bob's photon collapses into an eigenvector of that
//! basis, but a single copy reveals only an outcome, never the basis. The
//! receivers below cover what standard measurement allows (fixed-basis
//! maximum likelihood, fixed-basis readout, repetition with majority vote) and one counterfactual
//! receiver that reads the collapse basis directly.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::entangle::{bob_state_after_alice, make_pair, measure_a};
use crate::error::{invalid, Result};
use crate::quantum::{collapse, MeasurementBasis, StateVector};
use crate::rng::{balanced_bits, run_chunked, stream_from_seed, RngStream, RNG_ALGORITHM};
use crate::stats::{permutation_null, JointCounts};

const DOMAIN_MESSAGE: u64 = 32;
const DOMAIN_CHANNEL: u64 = 33;
const DOMAIN_MI_NULL: u64 = 34;

/// Likelihoods closer than this are a tie.
const TIE_TOL: f64 = 1e-12;

/// Shuffles used for the mutual-information null unless configured otherwise.
pub const DEFAULT_SHUFFLES: usize = 1000;

/// Which of Alice's bases encodes which bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EncodingRule {
    pub basis_for_one: f64,
    pub basis_for_zero: f64,
}

impl Default for EncodingRule {
    /// H/V axes for "1", the axes rotated by π/4 for "0".
    fn default() -> Self {
        Self { basis_for_one: 0.0, basis_for_zero: FRAC_PI_4 }
    }
}

/// An eigenbasis as an unordered axis pair, identified by its angle mod π/2.
fn axis_pair(theta: f64) -> f64 {
    let r = theta.rem_euclid(FRAC_PI_2);
    if r >= FRAC_PI_2 {
        0.0
    } else {
        r
    }
}

fn same_axis_pair(a: f64, b: f64) -> bool {
    let d = (axis_pair(a) - axis_pair(b)).abs();
    d < 1e-12 || (FRAC_PI_2 - d) < 1e-12
}

impl EncodingRule {
    pub fn new(basis_for_one: f64, basis_for_zero: f64) -> Result<Self> {
        if !basis_for_one.is_finite() || !basis_for_zero.is_finite() {
            return Err(invalid("encoding bases must be finite"));
        }
        Ok(Self { basis_for_one, basis_for_zero })
    }

    pub fn basis_for(&self, bit: bool) -> f64 {
        if bit {
            self.basis_for_one
        } else {
            self.basis_for_zero
        }
    }

    /// True when both bits select the same pair of axes.
    pub fn is_degenerate(&self) -> bool {
        same_axis_pair(self.basis_for_one, self.basis_for_zero)
    }
}

/// Bob's photon after Alice's measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SentPhoton {
    pub bob_state: StateVector,
    /// Axis pair (angle mod π/2) that Bob's photon collapsed onto. Only the
    /// counterfactual receiver reads it.
    pub hidden_basis_tag: f64,
    pub pair_index: u64,
}

/// Encodes `bits` using `pairs_per_bit` fresh singlets per bit.
pub fn encode(bits: &[bool], rule: &EncodingRule, pairs_per_bit: usize, rng: &mut RngStream) -> Result<Vec<SentPhoton>> {
    encode_from(bits, rule, pairs_per_bit, 0, rng)
}

fn encode_from(bits: &[bool], rule: &EncodingRule, pairs_per_bit: usize, first_pair: u64, rng: &mut RngStream) -> Result<Vec<SentPhoton>> {
    if bits.is_empty() {
        return Err(invalid("nothing to encode"));
    }
    if pairs_per_bit == 0 {
        return Err(invalid("pairs_per_bit must be at least 1"));
    }
    let pair = make_pair();
    let mut out = Vec::with_capacity(bits.len() * pairs_per_bit);
    for &bit in bits {
        let theta = rule.basis_for(bit);
        let basis = MeasurementBasis::new(theta)?;
        for _ in 0..pairs_per_bit {
            let (_, bob_state) = measure_a(&pair, &basis, rng)?;
            out.push(SentPhoton { bob_state, hidden_basis_tag: axis_pair(theta), pair_index: first_pair + out.len() as u64 });
        }
    }
    Ok(out)
}

/// How Bob turns photons into bits.
#[derive(Debug, Clone, PartialEq)]
pub enum ReceiverStrategy {
    /// Measure each photon at `theta` and pick the bit with the larger
    /// likelihood of the observed outcome.
    FixedBasisMl { theta: f64 },
    /// Measure each photon at `theta` and report the aligned outcome as "1".
    FixedBasisReadout { theta: f64 },
    /// Read the collapse basis directly. Not a physical measurement.
    BasisOracle,
    /// Decode `k` groups with `inner` and take the majority.
    Repetition { k: usize, inner: Box<ReceiverStrategy> },
}

impl ReceiverStrategy {
    pub const NAMES: &'static [&'static str] =
        &["fixed-basis-ml:<deg>", "fixed-basis-readout:<deg>", "basis-oracle", "repetition:<k>:<strategy>"];

    /// The standard receivers exercised by the no-signaling checks: each
    /// family at the encoding angles and halfway between them.
    pub fn standard_set() -> Vec<ReceiverStrategy> {
        let mut out = Vec::new();
        for deg in [0.0f64, 22.5, 45.0] {
            out.push(ReceiverStrategy::FixedBasisMl { theta: deg.to_radians() });
            out.push(ReceiverStrategy::FixedBasisReadout { theta: deg.to_radians() });
        }
        for inner in [ReceiverStrategy::FixedBasisMl { theta: 0.0 }, ReceiverStrategy::FixedBasisReadout { theta: 0.0 }] {
            out.push(ReceiverStrategy::Repetition { k: 5, inner: Box::new(inner) });
        }
        out
    }

    /// Photons consumed per decoded bit.
    pub fn pairs_per_bit(&self) -> usize {
        match self {
            ReceiverStrategy::Repetition { k, inner } => k * inner.pairs_per_bit(),
            _ => 1,
        }
    }

    /// Whether the strategy uses only operations allowed by standard
    /// measurement theory.
    pub fn is_standard(&self) -> bool {
        match self {
            ReceiverStrategy::FixedBasisMl { .. } | ReceiverStrategy::FixedBasisReadout { .. } => true,
            ReceiverStrategy::BasisOracle => false,
            ReceiverStrategy::Repetition { inner, .. } => inner.is_standard(),
        }
    }

    pub fn receiver_model(&self) -> &'static str {
        if self.is_standard() {
            "standard-measurement"
        } else {
            "counterfactual-basis-oracle"
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ReceiverStrategy::FixedBasisMl { theta } | ReceiverStrategy::FixedBasisReadout { theta } if !theta.is_finite() => {
                Err(invalid("receiver angle must be finite"))
            }
            ReceiverStrategy::Repetition { k: 0, .. } => Err(invalid("repetition needs k ≥ 1")),
            ReceiverStrategy::Repetition { inner, .. } => inner.validate(),
            _ => Ok(()),
        }
    }
}

/// Text form used by configs and the CLI; angles in degrees.
impl fmt::Display for ReceiverStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // trim radian round-off so 22.5° prints as 22.5
        let deg = |theta: &f64| (theta.to_degrees() * 1e9).round() / 1e9;
        match self {
            ReceiverStrategy::FixedBasisMl { theta } => write!(f, "fixed-basis-ml:{}", deg(theta)),
            ReceiverStrategy::FixedBasisReadout { theta } => write!(f, "fixed-basis-readout:{}", deg(theta)),
            ReceiverStrategy::BasisOracle => write!(f, "basis-oracle"),
            ReceiverStrategy::Repetition { k, inner } => write!(f, "repetition:{k}:{inner}"),
        }
    }
}

impl FromStr for ReceiverStrategy {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || invalid(format!("unknown receiver strategy {s:?}; valid strategies: {}", Self::NAMES.join(", ")));
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let strategy = match (head, rest) {
            ("basis-oracle", None) => ReceiverStrategy::BasisOracle,
            ("fixed-basis-ml", Some(deg)) => ReceiverStrategy::FixedBasisMl { theta: parse_degrees(deg, s)? },
            ("fixed-basis-readout", Some(deg)) => ReceiverStrategy::FixedBasisReadout { theta: parse_degrees(deg, s)? },
            ("repetition", Some(rest)) => {
                let (k, inner) = rest.split_once(':').ok_or_else(unknown)?;
                let k: usize = k.parse().map_err(|_| invalid(format!("bad repetition count in {s:?}")))?;
                ReceiverStrategy::Repetition { k, inner: Box::new(inner.parse()?) }
            }
            _ => return Err(unknown()),
        };
        strategy.validate()?;
        Ok(strategy)
    }
}

fn parse_degrees(deg: &str, whole: &str) -> Result<f64> {
    let deg: f64 = deg.parse().map_err(|_| invalid(format!("bad angle in {whole:?}")))?;
    Ok(deg.to_radians())
}

/// Decoded bits and the number of decisions settled by the tie rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub bits: Vec<bool>,
    pub ties: u64,
}

/// `likelihood[bit][outcome]` of Bob's outcome at `theta` given the sent bit,
/// from Bob's reduced state.
fn outcome_likelihoods(rule: &EncodingRule, theta: f64) -> Result<[[f64; 2]; 2]> {
    let pair = make_pair();
    let bob = MeasurementBasis::new(theta)?;
    let mut table = [[0.0; 2]; 2];
    for (bit, row) in table.iter_mut().enumerate() {
        let rho = bob_state_after_alice(&pair, &MeasurementBasis::new(rule.basis_for(bit == 1))?)?;
        row[0] = rho.expectation(&bob.aligned());
        row[1] = rho.expectation(&bob.orthogonal());
    }
    Ok(table)
}

fn decide(one: f64, zero: f64) -> (bool, bool) {
    if (one - zero).abs() <= TIE_TOL {
        (false, true)
    } else {
        (one > zero, false)
    }
}

struct Receiver<'a> {
    rule: &'a EncodingRule,
    likelihoods: Option<[[f64; 2]; 2]>,
}

impl Receiver<'_> {
    fn decode(&self, photons: &[SentPhoton], strategy: &ReceiverStrategy, rng: &mut RngStream, ties: &mut u64) -> Result<bool> {
        match strategy {
            ReceiverStrategy::FixedBasisMl { theta } => {
                let basis = MeasurementBasis::new(*theta)?;
                let outcome = collapse(&photons[0].bob_state, &basis, rng)?.outcome as usize;
                let table = self.likelihoods.expect("likelihoods precomputed for ML receivers");
                let (bit, tie) = decide(table[1][outcome], table[0][outcome]);
                *ties += u64::from(tie);
                Ok(bit)
            }
            ReceiverStrategy::FixedBasisReadout { theta } => {
                let basis = MeasurementBasis::new(*theta)?;
                Ok(collapse(&photons[0].bob_state, &basis, rng)?.outcome == 0)
            }
            ReceiverStrategy::BasisOracle => {
                let tag = photons[0].hidden_basis_tag;
                let one = same_axis_pair(tag, self.rule.basis_for_one);
                let zero = same_axis_pair(tag, self.rule.basis_for_zero);
                let (bit, tie) = decide(f64::from(u8::from(one)), f64::from(u8::from(zero)));
                *ties += u64::from(tie);
                Ok(bit)
            }
            ReceiverStrategy::Repetition { k, inner } => {
                let group = inner.pairs_per_bit();
                let mut ones = 0usize;
                for chunk in photons.chunks(group).take(*k) {
                    ones += usize::from(self.decode(chunk, inner, rng, ties)?);
                }
                let (bit, tie) = decide(ones as f64, (*k - ones) as f64);
                *ties += u64::from(tie);
                Ok(bit)
            }
        }
    }
}

fn ml_angle(strategy: &ReceiverStrategy) -> Option<f64> {
    match strategy {
        ReceiverStrategy::FixedBasisMl { theta } => Some(*theta),
        ReceiverStrategy::FixedBasisReadout { .. } | ReceiverStrategy::BasisOracle => None,
        ReceiverStrategy::Repetition { inner, .. } => ml_angle(inner),
    }
}

/// Decodes a photon stream, `strategy.pairs_per_bit()` photons per bit.
pub fn receive(photons: &[SentPhoton], strategy: &ReceiverStrategy, rule: &EncodingRule, rng: &mut RngStream) -> Result<Decoded> {
    strategy.validate()?;
    let per_bit = strategy.pairs_per_bit();
    if !photons.len().is_multiple_of(per_bit) {
        return Err(invalid(format!("{} photons do not split into groups of {per_bit}", photons.len())));
    }
    let likelihoods = ml_angle(strategy).map(|t| outcome_likelihoods(rule, t)).transpose()?;
    let receiver = Receiver { rule, likelihoods };
    let mut ties = 0;
    let bits = photons.chunks(per_bit).map(|group| receiver.decode(group, strategy, rng, &mut ties)).collect::<Result<Vec<_>>>()?;
    Ok(Decoded { bits, ties })
}

/// Plug-in mutual information with a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiEstimate {
    pub mi_bits: f64,
    pub ci: (f64, f64),
    /// Permutation p-value against independence.
    pub p_value: f64,
    /// 95th percentile of the permutation null.
    pub null_q95: f64,
}

/// Estimates `I(sent; decoded)` from the empirical 2×2 table.
///
/// The interval half-width is the larger of the 95th percentile of the
/// permutation null (the spread of the estimate when no information flows)
/// and 1.96 delta-method standard errors (the spread when it does); the
/// interval is clipped to `[0, 1]`.
pub fn mutual_information(sent: &[bool], decoded: &[bool], n_shuffles: usize, rng: &mut RngStream) -> Result<MiEstimate> {
    if sent.is_empty() {
        return Err(invalid("mutual information of empty streams"));
    }
    if n_shuffles < 1000 {
        return Err(invalid("at least 1000 shuffles are required"));
    }
    let table = JointCounts::tally(sent, decoded)?;
    let mi_bits = table.mutual_information().min(1.0);
    let mut null = permutation_null(&table, n_shuffles, rng);
    null.sort_by(f64::total_cmp);
    let null_q95 = null[((0.95 * n_shuffles as f64).ceil() as usize).saturating_sub(1)];
    let exceed = null.iter().filter(|v| **v >= mi_bits - 1e-15).count();
    let n = table.total();
    let degenerate = [table.x_ones(), table.y_ones()].iter().any(|k| *k == 0 || *k == n);
    let p_value = if degenerate { 1.0 } else { (1 + exceed) as f64 / (1 + n_shuffles) as f64 };
    let half = null_q95.max(1.959_963_984_540_054 * table.mutual_information_std_err());
    let ci = ((mi_bits - half).max(0.0), (mi_bits + half).min(1.0));
    Ok(MiEstimate { mi_bits, ci, p_value, null_q95 })
}

/// Outcome of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransmissionReport {
    pub n_bits: u64,
    pub pairs_per_bit: u64,
    pub strategy: String,
    pub receiver_model: &'static str,
    pub rule: EncodingRule,
    pub ber: f64,
    pub bit_errors: u64,
    pub mutual_info_bits: f64,
    pub mi_confidence_interval: (f64, f64),
    pub mi_p_value: f64,
    pub mi_shuffles: u64,
    /// Decisions settled by the tie rule (ties decode to 0).
    pub ties: u64,
    pub seed: u64,
    pub rng_algorithm: &'static str,
}

/// Sends `n_bits` balanced random bits and measures what arrives.
pub fn run_protocol(
    n_bits: u64,
    rule: &EncodingRule,
    strategy: &ReceiverStrategy,
    seed: u64,
    n_shuffles: usize,
) -> Result<TransmissionReport> {
    if n_bits == 0 {
        return Err(invalid("n_bits must be positive"));
    }
    strategy.validate()?;
    let per_bit = strategy.pairs_per_bit();
    let sent = balanced_bits(n_bits as usize, &mut stream_from_seed(seed, DOMAIN_MESSAGE));
    let (decoded, ties) = run_chunked(
        n_bits,
        seed,
        DOMAIN_CHANNEL,
        Ok((Vec::with_capacity(n_bits as usize), 0u64)),
        |rng, start, count| {
            let bits = &sent[start as usize..(start + count) as usize];
            let photons = encode_from(bits, rule, per_bit, start * per_bit as u64, rng)?;
            let d = receive(&photons, strategy, rule, rng)?;
            Ok((d.bits, d.ties))
        },
        |acc: Result<(Vec<bool>, u64)>, part| {
            let (mut bits, ties) = acc?;
            let (more, more_ties) = part?;
            bits.extend(more);
            Ok((bits, ties + more_ties))
        },
    )?;
    let bit_errors = sent.iter().zip(&decoded).filter(|(a, b)| a != b).count() as u64;
    let mi = mutual_information(&sent, &decoded, n_shuffles, &mut stream_from_seed(seed, DOMAIN_MI_NULL))?;
    Ok(TransmissionReport {
        n_bits,
        pairs_per_bit: per_bit as u64,
        strategy: strategy.to_string(),
        receiver_model: strategy.receiver_model(),
        rule: *rule,
        ber: bit_errors as f64 / n_bits as f64,
        bit_errors,
        mutual_info_bits: mi.mi_bits,
        mi_confidence_interval: mi.ci,
        mi_p_value: mi.p_value,
        mi_shuffles: n_shuffles as u64,
        ties,
        seed,
        rng_algorithm: RNG_ALGORITHM,
    })
}
