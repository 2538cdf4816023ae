//! Binomial intervals, sigma checks and the permutation test behind every
//! mutual-information claim.

use rand_distr::{Distribution, Hypergeometric};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};
use crate::rng::RngStream;

/// Band for single golden checks.
pub const GOLDEN_SIGMAS: f64 = 3.0;
/// Band for bulk property sweeps.
pub const SWEEP_SIGMAS: f64 = 4.0;

/// Successes out of trials with a 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinomialEstimate {
    pub successes: u64,
    pub trials: u64,
    pub point: f64,
    pub ci95: (f64, f64),
}

impl BinomialEstimate {
    pub fn new(successes: u64, trials: u64) -> Result<Self> {
        let ci95 = wilson_interval(successes, trials, 0.95)?;
        Ok(Self { successes, trials, point: successes as f64 / trials as f64, ci95 })
    }

    /// Binomial standard deviation of the fraction if the true rate is `p`.
    pub fn sigma_at(&self, p: f64) -> f64 {
        binomial_sigma(p, self.trials)
    }

    /// Whether the observed fraction lies within `k` standard deviations of `p`.
    ///
    /// For `p` of exactly 0 or 1 the band collapses and the count must match.
    pub fn within_sigmas(&self, p: f64, k: f64) -> bool {
        (self.point - p).abs() <= k * self.sigma_at(p)
    }
}

pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Two-sided normal quantile for a confidence level, e.g. 1.96 for 0.95.
pub fn normal_quantile(confidence: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(0.5 + 0.5 * confidence)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(invalid("wilson_interval needs at least one trial"));
    }
    if successes > trials {
        return Err(invalid(format!("{successes} successes out of {trials} trials")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid("confidence must lie in (0, 1)"));
    }
    let z = normal_quantile(confidence);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    Ok((lo.min(p), hi.max(p)))
}

/// z-score of the difference between two independent proportions, using the
/// pooled rate. Zero when both samples are degenerate and equal.
pub fn two_proportion_z(a: &BinomialEstimate, b: &BinomialEstimate) -> f64 {
    let pooled = (a.successes + b.successes) as f64 / (a.trials + b.trials) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / a.trials as f64 + 1.0 / b.trials as f64)).sqrt();
    let diff = a.point - b.point;
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / se
    }
}

/// Empirical 2×2 joint distribution of two bit streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct JointCounts {
    /// `counts[x][y]`
    pub counts: [[u64; 2]; 2],
}

impl JointCounts {
    pub fn tally(x: &[bool], y: &[bool]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(invalid(format!("length mismatch: {} vs {}", x.len(), y.len())));
        }
        let mut counts = [[0u64; 2]; 2];
        for (a, b) in x.iter().zip(y) {
            counts[*a as usize][*b as usize] += 1;
        }
        Ok(Self { counts })
    }

    /// Table with the given margins and `n11` joint ones.
    fn from_margins(n: u64, x_ones: u64, y_ones: u64, n11: u64) -> Self {
        let n10 = x_ones - n11;
        let n01 = y_ones - n11;
        let n00 = n + n11 - x_ones - y_ones;
        Self { counts: [[n00, n01], [n10, n11]] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn x_ones(&self) -> u64 {
        self.counts[1][0] + self.counts[1][1]
    }

    pub fn y_ones(&self) -> u64 {
        self.counts[0][1] + self.counts[1][1]
    }

    /// Per-cell log-ratios `log₂(p(x,y) / p(x)p(y))` paired with `p(x,y)`,
    /// skipping empty cells.
    fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.total() as f64;
        let px = [1.0 - self.x_ones() as f64 / n, self.x_ones() as f64 / n];
        let py = [1.0 - self.y_ones() as f64 / n, self.y_ones() as f64 / n];
        (0..2).flat_map(move |x| {
            (0..2).filter_map(move |y| {
                let c = self.counts[x][y];
                (c > 0).then(|| {
                    let pxy = c as f64 / n;
                    (pxy, (pxy / (px[x] * py[y])).log2())
                })
            })
        })
    }

    /// Plug-in mutual information in bits, clamped to be non-negative.
    pub fn mutual_information(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        self.cells().map(|(p, l)| p * l).sum::<f64>().max(0.0)
    }

    /// Delta-method standard error of the plug-in estimate.
    pub fn mutual_information_std_err(&self) -> f64 {
        let n = self.total() as f64;
        let mi = self.cells().map(|(p, l)| p * l).sum::<f64>();
        let second = self.cells().map(|(p, l)| p * l * l).sum::<f64>();
        ((second - mi * mi).max(0.0) / n).sqrt()
    }

    fn degenerate_margin(&self) -> bool {
        let n = self.total();
        let (xo, yo) = (self.x_ones(), self.y_ones());
        xo == 0 || xo == n || yo == 0 || yo == n
    }
}

/// Null distribution of plug-in MI under random relabelling of `y`.
///
/// Shuffling `y` against fixed `x` leaves both margins unchanged, and the
/// joint-ones count of the shuffled table is hypergeometric, so each shuffle
/// is drawn as one hypergeometric variate instead of an O(n) permutation.
pub fn permutation_null(observed: &JointCounts, n_shuffles: usize, rng: &mut RngStream) -> Vec<f64> {
    let n = observed.total();
    let (xo, yo) = (observed.x_ones(), observed.y_ones());
    if observed.degenerate_margin() {
        return vec![observed.mutual_information(); n_shuffles];
    }
    let dist = Hypergeometric::new(n, xo, yo).expect("margins are within the population");
    (0..n_shuffles).map(|_| JointCounts::from_margins(n, xo, yo, dist.sample(rng.as_rng())).mutual_information()).collect()
}

/// p-value of the observed MI under independence, `(1 + #{null ≥ obs}) / (1 + B)`.
///
/// A constant stream carries no information; the p-value is 1 by convention.
pub fn permutation_independence_test(x: &[bool], y: &[bool], n_shuffles: usize, rng: &mut RngStream) -> Result<f64> {
    if n_shuffles < 1000 {
        return Err(invalid("permutation test needs at least 1000 shuffles"));
    }
    let observed = JointCounts::tally(x, y)?;
    if observed.total() == 0 {
        return Err(invalid("permutation test needs non-empty streams"));
    }
    if observed.degenerate_margin() {
        return Ok(1.0);
    }
    let mi = observed.mutual_information();
    let null = permutation_null(&observed, n_shuffles, rng);
    // tolerance absorbs summation-order noise between equal tables
    let at_least = null.iter().filter(|v| **v >= mi - 1e-15).count();
    Ok((1 + at_least) as f64 / (1 + n_shuffles) as f64)
}
