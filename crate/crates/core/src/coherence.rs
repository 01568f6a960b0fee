//! Block-fading coherence model with random per-snapshot persistence.
//!
//! A link is observed over `n` time snapshots. Between consecutive snapshots
//! the channel value either persists (probability `p`, the retain
//! probability) or is redrawn independently. The positions where a fresh
//! value starts are the *altering points* `c_1 = 1 < c_2 < ... <= n`, and the
//! trace splits into constant runs `[c_l, c_{l+1})`. The quantity that
//! decides how much interference-free signal space survives alignment is the
//! longest constant run
//!
//! ```text
//! F = max_l (c_{l+1} - c_l),   with sentinel c_{last+1} = n + 1.
//! ```
//!
//! `run_length_pmf` computes the exact law of `F` by dynamic programming over
//! (current run length, maximum so far); `enumerate_runlength_oracle`
//! recomputes it by weighted enumeration of all 2^(n-1) boundary patterns and
//! exists purely to cross-check the DP. `free_dim_ccdf` turns the law of `F`
//! into the decodability weights
//!
//! ```text
//! G(i) = P(min(n/2, n - F) >= i),  i = 0..n/2,
//! ```
//!
//! the probability that at least `i` interference-free dimensions are
//! available at the receiver.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounds for the magnitude of a drawn channel value. Phases are uniform on
/// `[0, 2pi)`, magnitudes uniform on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnitudeRange {
    pub lo: f64,
    pub hi: f64,
}

impl Default for MagnitudeRange {
    fn default() -> Self {
        MagnitudeRange { lo: 0.5, hi: 2.0 }
    }
}

impl MagnitudeRange {
    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo <= 0.0 || self.hi < self.lo {
            return Err(Error::param(
                "magnitude_range",
                format!("need 0 < lo <= hi, got [{}, {}]", self.lo, self.hi),
            ));
        }
        Ok(())
    }
}

/// One realization of a block-fading link over `n` snapshots.
///
/// Runs are defined by the altering-point list recorded at generation time,
/// not by comparing values for equality; two runs drawing numerically equal
/// values (a probability-zero event) still count as separate runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    values: Vec<Complex64>,
    altering_points: Vec<usize>,
    retain_prob: f64,
}

impl ChannelTrace {
    /// Rebuilds a trace from recorded values and altering points, for
    /// replaying realizations produced elsewhere.
    pub fn from_parts(
        values: Vec<Complex64>,
        altering_points: Vec<usize>,
        retain_prob: f64,
    ) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::param("values", "trace must have at least 1 snapshot"));
        }
        if altering_points.first() != Some(&1)
            || altering_points.windows(2).any(|w| w[0] >= w[1])
            || altering_points.iter().any(|&c| c < 1 || c > n)
        {
            return Err(Error::param(
                "altering_points",
                "must be strictly increasing, start at 1, and stay within 1..=n",
            ));
        }
        Ok(ChannelTrace {
            values,
            altering_points,
            retain_prob,
        })
    }

    /// Number of snapshots in the trace.
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Per-snapshot channel values (diagonal of the channel matrix).
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// 1-based positions where a fresh value starts; the first is always 1.
    pub fn altering_points(&self) -> &[usize] {
        &self.altering_points
    }

    pub fn retain_prob(&self) -> f64 {
        self.retain_prob
    }

    /// Longest constant run of this trace.
    pub fn longest_constant_run(&self) -> usize {
        longest_constant_run(self)
    }

    /// Fraction of snapshots that start a fresh value, eta/n. Purely a
    /// derived statistic of the realization.
    pub fn variation_rate(&self) -> f64 {
        self.altering_points.len() as f64 / self.n() as f64
    }
}

fn draw_value(rng: &mut impl Rng, range: MagnitudeRange) -> Complex64 {
    let mag = range.lo + (range.hi - range.lo) * rng.random::<f64>();
    let phase = std::f64::consts::TAU * rng.random::<f64>();
    Complex64::from_polar(mag, phase)
}

/// Draws a trace from an already-seeded stream. Draw order is fixed: the
/// first value, then per boundary one uniform for the retain decision
/// followed by a fresh value draw when the decision is "change".
pub fn gen_trace_with_rng(
    n: usize,
    p: f64,
    range: MagnitudeRange,
    rng: &mut impl Rng,
) -> Result<ChannelTrace> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("must be in [0, 1], got {p}")));
    }
    range.validate()?;

    let mut values = Vec::with_capacity(n);
    let mut altering_points = vec![1];
    let mut current = draw_value(rng, range);
    values.push(current);
    for t in 2..=n {
        let retain = rng.random::<f64>() < p;
        if !retain {
            current = draw_value(rng, range);
            altering_points.push(t);
        }
        values.push(current);
    }
    Ok(ChannelTrace {
        values,
        altering_points,
        retain_prob: p,
    })
}

/// Generates one trace of `n` snapshots with retain probability `p`.
/// The same seed reproduces the trace bit for bit.
pub fn gen_trace(n: usize, p: f64, range: MagnitudeRange, seed: u64) -> Result<ChannelTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_trace_with_rng(n, p, range, &mut rng)
}

/// Longest constant run: the largest gap between consecutive altering points,
/// closed with the sentinel n + 1.
pub fn longest_constant_run(trace: &ChannelTrace) -> usize {
    let n = trace.n();
    let pts = trace.altering_points();
    let mut best = 0;
    for (idx, &c) in pts.iter().enumerate() {
        let next = if idx + 1 < pts.len() { pts[idx + 1] } else { n + 1 };
        best = best.max(next - c);
    }
    best
}

/// Exact probability law of the longest constant run `F` for a trace of `n`
/// snapshots with retain probability `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RunLengthDistributionRepr", into = "RunLengthDistributionRepr")]
pub struct RunLengthDistribution {
    n: usize,
    retain_prob: f64,
    /// pmf[f] = P(F = f); index 0 is unused and stays 0.
    pmf: Vec<f64>,
}

impl RunLengthDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn retain_prob(&self) -> f64 {
        self.retain_prob
    }

    /// P(F = f); zero outside 1..=n.
    pub fn prob(&self, f: usize) -> f64 {
        self.pmf.get(f).copied().unwrap_or(0.0)
    }

    /// (f, P(F = f)) pairs with positive mass, ascending in f.
    pub fn support(&self) -> Vec<(usize, f64)> {
        self.pmf
            .iter()
            .enumerate()
            .filter(|&(f, &q)| f >= 1 && q > 0.0)
            .map(|(f, &q)| (f, q))
            .collect()
    }

    /// P(F <= f).
    pub fn cdf(&self, f: usize) -> f64 {
        let hi = f.min(self.n);
        self.pmf[1..=hi].iter().sum()
    }
}

#[derive(Serialize, Deserialize)]
struct RunLengthDistributionRepr {
    n: usize,
    p: f64,
    pmf: Vec<(usize, f64)>,
}

impl From<RunLengthDistribution> for RunLengthDistributionRepr {
    fn from(d: RunLengthDistribution) -> Self {
        RunLengthDistributionRepr {
            n: d.n,
            p: d.retain_prob,
            pmf: d.support(),
        }
    }
}

impl TryFrom<RunLengthDistributionRepr> for RunLengthDistribution {
    type Error = Error;

    fn try_from(r: RunLengthDistributionRepr) -> Result<Self> {
        if r.n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&r.p) {
            return Err(Error::param("p", format!("must be in [0, 1], got {}", r.p)));
        }
        let mut pmf = vec![0.0; r.n + 1];
        for (f, q) in r.pmf {
            if f < 1 || f > r.n {
                return Err(Error::param("pmf", format!("run length {f} outside 1..={}", r.n)));
            }
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::param("pmf", format!("probability {q} outside [0, 1]")));
            }
            if pmf[f] != 0.0 {
                return Err(Error::param("pmf", format!("duplicate entry for run length {f}")));
            }
            pmf[f] = q;
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(
                "pmf",
                format!("probabilities sum to {total}, expected 1 within 1e-12"),
            ));
        }
        Ok(RunLengthDistribution {
            n: r.n,
            retain_prob: r.p,
            pmf,
        })
    }
}

fn check_np(n: usize, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("must be in [0, 1], got {p}")));
    }
    Ok(())
}

/// Exact pmf of the longest constant run by dynamic programming.
///
/// State after t snapshots: (length of the run in progress, maximum run seen
/// so far, including the one in progress). Each boundary retains with
/// probability `p` or cuts the run with probability `1 - p`. O(n^2) states,
/// O(n^3) time, fine up to a few hundred snapshots.
pub fn run_length_pmf(n: usize, p: f64) -> Result<RunLengthDistribution> {
    check_np(n, p)?;
    let w = n + 1;
    // dp[cur * w + mx]
    let mut dp = vec![0.0f64; w * w];
    let mut next = vec![0.0f64; w * w];
    dp[w + 1] = 1.0; // cur = 1, mx = 1
    let q = 1.0 - p;
    for t in 1..n {
        next[..(t + 2) * w].fill(0.0);
        for cur in 1..=t {
            for mx in cur..=t {
                let mass = dp[cur * w + mx];
                if mass == 0.0 {
                    continue;
                }
                next[(cur + 1) * w + mx.max(cur + 1)] += mass * p;
                next[w + mx] += mass * q;
            }
        }
        std::mem::swap(&mut dp, &mut next);
    }
    let mut pmf = vec![0.0; w];
    for cur in 1..=n {
        for mx in cur..=n {
            pmf[mx] += dp[cur * w + mx];
        }
    }
    Ok(RunLengthDistribution {
        n,
        retain_prob: p,
        pmf,
    })
}

/// Brute-force law of the longest run: enumerates all 2^(n-1) boundary
/// patterns, weighting a pattern with k retained boundaries by
/// p^k (1-p)^(n-1-k). Independent of the DP; kept as its oracle.
pub fn enumerate_runlength_oracle(n: usize, p: f64) -> Result<RunLengthDistribution> {
    check_np(n, p)?;
    if n > 24 {
        return Err(Error::Capacity(format!(
            "oracle enumerates 2^(n-1) patterns; n = {n} exceeds the cap of 24"
        )));
    }
    // powers[k] = p^k, copowers[k] = (1-p)^k; 0^0 = 1 covers p in {0, 1}
    let mut powers = vec![1.0f64; n];
    let mut copowers = vec![1.0f64; n];
    for k in 1..n {
        powers[k] = powers[k - 1] * p;
        copowers[k] = copowers[k - 1] * (1.0 - p);
    }
    let boundaries = n - 1;
    let mut pmf = vec![0.0; n + 1];
    for mask in 0u32..(1u32 << boundaries) {
        let retained = mask.count_ones() as usize;
        let weight = powers[retained] * copowers[boundaries - retained];
        let mut cur = 1usize;
        let mut best = 1usize;
        for t in 0..boundaries {
            if mask >> t & 1 == 1 {
                cur += 1;
                if cur > best {
                    best = cur;
                }
            } else {
                cur = 1;
            }
        }
        pmf[best] += weight;
    }
    Ok(RunLengthDistribution {
        n,
        retain_prob: p,
        pmf,
    })
}

/// Decodability weights G(i) = P(min(n/2, n - F) >= i) for i = 0..n/2.
/// G(0) = 1 and G is non-increasing.
pub fn free_dim_ccdf(dist: &RunLengthDistribution) -> Result<Vec<f64>> {
    let n = dist.n;
    if n % 2 != 0 {
        return Err(Error::param("n", format!("must be even, got {n}")));
    }
    // cdf[f] = P(F <= f); for i <= n/2 the min(...) >= i condition reduces
    // to F <= n - i.
    let mut cdf = vec![0.0; n + 1];
    for f in 1..=n {
        cdf[f] = cdf[f - 1] + dist.pmf[f];
    }
    Ok((0..=n / 2).map(|i| cdf[n - i]).collect())
}
