//! Per-layer and average rates, Monte Carlo over channel realizations.
//!
//! With successive decoding from layer 1 upward, undecoded layers act as
//! noise, so layer i carries
//!
//! ```text
//! R_i = (i / 2n) log2(1 + P_i / (N + sum_{j>i} P_j)),
//! ```
//!
//! the prefactor i being the free-dimension multiplicity at which the layer
//! survives. A realization with longest direct-channel run F decodes layers
//! 1..l_s, l_s = min(n/2, n - F), so the expected rate is
//!
//! ```text
//! R_avg = sum_i R_i G(i),   G(i) = P(l_s >= i),
//! ```
//!
//! which `monte_carlo_avg_rate` estimates empirically and
//! `avg_rate_analytic` evaluates in closed form; the two compute the same
//! expectation. Direct-channel gains are normalized out of the SNR terms
//! (unit-determinant convention), so the formulas see powers only.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{
    check_interference_nulled, free_interference_dims, gen_precoder_with_rng,
    zero_forced_signal_rank, zero_forcing_matrix, DiagonalChannel,
};
use crate::coherence::{gen_trace, gen_trace_with_rng, run_length_pmf, MagnitudeRange};
use crate::error::{Error, Result};
use crate::powalloc::{PowerProfile, WeightFunction};

/// Parameters of one simulated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Even block length.
    pub n: usize,
    /// Number of users; only receiver 1's rate is computed, the rest shape
    /// the interference in full-pipeline checks.
    pub k: usize,
    /// Retain probability of the direct links.
    pub p_direct: f64,
    /// Retain probability of the cross links; 1.0 keeps them block-constant.
    pub p_cross: f64,
    /// Total transmit power per user.
    pub p_t: f64,
    /// Noise power.
    pub noise: f64,
    /// Monte Carlo trial count.
    pub trials: usize,
    /// Trial t draws from seed base_seed + t.
    pub base_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 20,
            k: 3,
            p_direct: 0.9,
            p_cross: 1.0,
            p_t: 100.0,
            noise: 1.0,
            trials: 10_000,
            base_seed: 7_777,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(Error::param("n", format!("need even n >= 2, got {}", self.n)));
        }
        if self.k < 1 {
            return Err(Error::param("k", "need at least 1 user"));
        }
        for (name, p) in [("p_direct", self.p_direct), ("p_cross", self.p_cross)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, format!("must be in [0, 1], got {p}")));
            }
        }
        if !(self.p_t > 0.0 && self.p_t.is_finite()) {
            return Err(Error::param("p_t", format!("must be positive, got {}", self.p_t)));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::param("noise", format!("must be positive, got {}", self.noise)));
        }
        if self.trials < 1 {
            return Err(Error::param("trials", "must be >= 1"));
        }
        Ok(())
    }
}

/// Outcome summary of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub analytic_avg_rate: f64,
    pub empirical_avg_rate: f64,
    pub std_error: f64,
    pub per_layer_rates: Vec<f64>,
    /// counts[l] = number of trials that could decode exactly l layers.
    pub decodable_layer_histogram: Vec<u64>,
    pub baseline_perfect_csi: f64,
}

fn check_profile(profile: &PowerProfile, n: usize) -> Result<()> {
    if profile.n() != n {
        return Err(Error::param(
            "profile",
            format!("profile is for n = {}, expected {n}", profile.n()),
        ));
    }
    Ok(())
}

/// R_i in bits per channel use for 1-based layer i.
pub fn layer_rate(i: usize, profile: &PowerProfile, n: usize) -> Result<f64> {
    check_profile(profile, n)?;
    let m = profile.layer_count();
    if i < 1 || i > m {
        return Err(Error::param("i", format!("layer index must be in 1..={m}, got {i}")));
    }
    let tail: f64 = profile.layers()[i..].iter().sum();
    let p_i = profile.layers()[i - 1];
    Ok(i as f64 / (2.0 * n as f64) * (1.0 + p_i / (profile.noise() + tail)).log2())
}

/// Expected average rate: sum_i R_i G(i).
pub fn avg_rate_analytic(
    profile: &PowerProfile,
    wf: &WeightFunction,
    n: usize,
    noise: f64,
) -> Result<f64> {
    check_profile(profile, n)?;
    if wf.n() != n {
        return Err(Error::param("wf", format!("weights are for n = {}, expected {n}", wf.n())));
    }
    if (noise - profile.noise()).abs() > 1e-12 * noise.abs().max(1.0) {
        return Err(Error::param(
            "noise",
            format!("noise {noise} does not match the profile ({})", profile.noise()),
        ));
    }
    let mut total = 0.0;
    for i in 1..=profile.layer_count() {
        total += layer_rate(i, profile, n)? * wf.weight(i);
    }
    Ok(total)
}

/// Half-DoF reference at matched SNR: (1/2) log2(1 + P_t/N).
pub fn perfect_csi_baseline(p_t: f64, noise: f64) -> Result<f64> {
    if !(p_t > 0.0 && p_t.is_finite()) {
        return Err(Error::param("p_t", format!("must be positive, got {p_t}")));
    }
    if !(noise > 0.0 && noise.is_finite()) {
        return Err(Error::param("noise", format!("must be positive, got {noise}")));
    }
    Ok(0.5 * (1.0 + p_t / noise).log2())
}

/// Draws the direct-channel trace for trial `trial_index` and scores it:
/// returns (decodable layer count, realized rate).
pub fn simulate_realization(
    cfg: &ExperimentConfig,
    profile: &PowerProfile,
    trial_index: usize,
) -> Result<(usize, f64)> {
    cfg.validate()?;
    check_profile(profile, cfg.n)?;
    let trace = gen_trace(
        cfg.n,
        cfg.p_direct,
        MagnitudeRange::default(),
        cfg.base_seed + trial_index as u64,
    )?;
    let l_s = free_interference_dims(cfg.n, trace.longest_constant_run())?;
    let mut rate = 0.0;
    for i in 1..=l_s {
        rate += layer_rate(i, profile, cfg.n)?;
    }
    Ok((l_s, rate))
}

/// One trial with the whole chain materialized: precoder, projector, cross
/// channels. Verifies that block-constant interference is annihilated and
/// that the zero-forced desired signal keeps l_s dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FullRealization {
    pub free_dims: usize,
    pub realized_rate: f64,
    /// worst interference leakage past the projector, relative to the
    /// incoming interference scale; 0 when the config has a single user
    pub interference_residual: f64,
    /// numerical rank of the zero-forced desired-signal map D H V
    pub signal_rank: usize,
}

pub fn simulate_realization_full(
    cfg: &ExperimentConfig,
    profile: &PowerProfile,
    trial_index: usize,
) -> Result<FullRealization> {
    cfg.validate()?;
    check_profile(profile, cfg.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed + trial_index as u64);
    let range = MagnitudeRange::default();
    // same draw order as simulate_realization, which uses the trace only
    let trace = gen_trace_with_rng(cfg.n, cfg.p_direct, range, &mut rng)?;
    let l_s = free_interference_dims(cfg.n, trace.longest_constant_run())?;
    let mut rate = 0.0;
    for i in 1..=l_s {
        rate += layer_rate(i, profile, cfg.n)?;
    }

    let prec = gen_precoder_with_rng(cfg.n, cfg.p_t, &mut rng)?;
    let zf = zero_forcing_matrix(&prec)?;

    let mut worst_rel = 0.0f64;
    for _ in 1..cfg.k {
        let cross_trace = gen_trace_with_rng(cfg.n, cfg.p_cross, range, &mut rng)?;
        let cross = DiagonalChannel::from_trace(&cross_trace)?;
        let x: Vec<_> = (0..cfg.n / 2)
            .map(|_| {
                let t = gen_trace_with_rng(1, 1.0, range, &mut rng).unwrap();
                t.values()[0]
            })
            .collect();
        let residual = check_interference_nulled(&zf, &cross, &prec, &x)?;
        let through = cross.apply(&(prec.matrix().clone()));
        let scale = through.iter().map(|e| e.norm()).fold(0.0, f64::max)
            * x.iter().map(|e| e.norm()).fold(0.0, f64::max).max(1e-300);
        let rel = residual / scale.max(1e-300);
        if cfg.p_cross == 1.0 && rel > 1e-8 {
            return Err(Error::VerificationFailed(format!(
                "constant cross link leaked relative residual {rel:.3e} in trial {trial_index}"
            )));
        }
        worst_rel = worst_rel.max(rel);
    }

    let direct = DiagonalChannel::from_trace(&trace)?;
    let signal_rank = zero_forced_signal_rank(&zf, &direct, &prec)?;
    if signal_rank < l_s {
        return Err(Error::VerificationFailed(format!(
            "zero-forced signal rank {signal_rank} < {l_s} free dims in trial {trial_index}"
        )));
    }
    Ok(FullRealization {
        free_dims: l_s,
        realized_rate: rate,
        interference_residual: worst_rel,
        signal_rank,
    })
}

/// Runs `cfg.trials` independent realizations and aggregates. Trials run in
/// parallel; results are collected in trial order and folded sequentially,
/// so the report is identical for any thread count.
pub fn monte_carlo_avg_rate(cfg: &ExperimentConfig, profile: &PowerProfile) -> Result<RateReport> {
    cfg.validate()?;
    check_profile(profile, cfg.n)?;
    let wf = WeightFunction::from_run_length(&run_length_pmf(cfg.n, cfg.p_direct)?)?;
    let analytic = avg_rate_analytic(profile, &wf, cfg.n, cfg.noise)?;
    let m = profile.layer_count();
    let mut per_layer = Vec::with_capacity(m);
    for i in 1..=m {
        per_layer.push(layer_rate(i, profile, cfg.n)?);
    }

    let outcomes: Vec<(usize, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| simulate_realization(cfg, profile, t))
        .collect::<Result<_>>()?;

    let mut histogram = vec![0u64; m + 1];
    let mut sum = 0.0;
    for &(l_s, rate) in &outcomes {
        histogram[l_s] += 1;
        sum += rate;
    }
    let mean = sum / cfg.trials as f64;
    let mut ss = 0.0;
    for &(_, rate) in &outcomes {
        ss += (rate - mean) * (rate - mean);
    }
    let std_error = if cfg.trials > 1 {
        (ss / (cfg.trials - 1) as f64 / cfg.trials as f64).sqrt()
    } else {
        0.0
    };

    Ok(RateReport {
        analytic_avg_rate: analytic,
        empirical_avg_rate: mean,
        std_error,
        per_layer_rates: per_layer,
        decodable_layer_histogram: histogram,
        baseline_perfect_csi: perfect_csi_baseline(cfg.p_t, cfg.noise)?,
    })
}

/// One sweep point of a rate experiment, ready for CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: f64,
    pub p_t: f64,
    pub report: RateReport,
}

/// 12-significant-digit scientific form shared by all CSV writers.
pub(crate) fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Renders sweep results as CSV with one row per point.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("p,p_t,analytic,empirical,stderr,baseline\n");
    for pt in points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig12(pt.p),
            sig12(pt.p_t),
            sig12(pt.report.analytic_avg_rate),
            sig12(pt.report.empirical_avg_rate),
            sig12(pt.report.std_error),
            sig12(pt.report.baseline_perfect_csi),
        ));
    }
    out
}
