//! C ABI over the core library.
//!
//! Handles are opaque pointers created by `_new`-style functions and
//! released by their paired `_free`; `_free(NULL)` is a no-op. Every other
//! function returns a [BiaStatus] and writes its result through an out
//! pointer, which is left untouched on failure. Handles are not thread
//! safe to mutate, but all exported operations only read them.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use bia_core::alignment::verify_lemma1;
use bia_core::coherence::{run_length_pmf, RunLengthDistribution};
use bia_core::powalloc::{cumulative_power, layer_powers, PowerProfile, WeightFunction};
use bia_core::rates::{
    avg_rate_analytic, monte_carlo_avg_rate, perfect_csi_baseline, ExperimentConfig, RateReport,
};
use bia_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NumericalFailure = 3,
    CapacityExceeded = 4,
    NotApplicable = 5,
    InternalError = 6,
}

pub struct BiaRunLengthDist {
    inner: RunLengthDistribution,
}

pub struct BiaWeightFunction {
    inner: WeightFunction,
}

pub struct BiaPowerProfile {
    inner: PowerProfile,
}

pub struct BiaRateReport {
    inner: RateReport,
}

/// Experiment parameters, field-for-field the core config.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BiaExperimentConfig {
    /// even block length
    pub n: u32,
    /// number of users
    pub k: u32,
    /// retain probability of the direct links, in [0, 1]
    pub p_direct: f64,
    /// retain probability of the cross links, in [0, 1]
    pub p_cross: f64,
    /// total transmit power, positive
    pub p_t: f64,
    /// noise power, positive
    pub noise: f64,
    /// Monte Carlo trial count
    pub trials: u64,
    /// trial t draws from base_seed + t
    pub base_seed: u64,
}

impl BiaExperimentConfig {
    fn to_core(self) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n as usize,
            k: self.k as usize,
            p_direct: self.p_direct,
            p_cross: self.p_cross,
            p_t: self.p_t,
            noise: self.noise,
            trials: self.trials as usize,
            base_seed: self.base_seed,
        }
    }
}

fn status_of(err: &Error) -> BiaStatus {
    match err {
        Error::Parameter { .. } | Error::Config { .. } => BiaStatus::InvalidParameter,
        Error::Numerical(_) => BiaStatus::NumericalFailure,
        Error::Capacity(_) => BiaStatus::CapacityExceeded,
        Error::NotApplicable(_) => BiaStatus::NotApplicable,
        Error::VerificationFailed(_) | Error::Io(_) | Error::Serde(_) => BiaStatus::InternalError,
    }
}

fn guarded(f: impl FnOnce() -> BiaStatus) -> BiaStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(BiaStatus::InternalError)
}

macro_rules! try_ref {
    ($ptr:expr) => {
        match $ptr.as_ref() {
            Some(v) => v,
            None => return BiaStatus::NullPointer,
        }
    };
}

/// Version of this library as a NUL-terminated static string.
#[no_mangle]
pub extern "C" fn bia_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Fills `out` with the default experiment configuration.
///
/// # Safety
/// `out` must be null or valid for writing one BiaExperimentConfig.
#[no_mangle]
pub unsafe extern "C" fn bia_experiment_config_default(
    out: *mut BiaExperimentConfig,
) -> BiaStatus {
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    let dflt = ExperimentConfig::default();
    out.write(BiaExperimentConfig {
        n: dflt.n as u32,
        k: dflt.k as u32,
        p_direct: dflt.p_direct,
        p_cross: dflt.p_cross,
        p_t: dflt.p_t,
        noise: dflt.noise,
        trials: dflt.trials as u64,
        base_seed: dflt.base_seed,
    });
    BiaStatus::Ok
}

/// Exact longest-run distribution for block length `n` and retain
/// probability `p`; writes a new handle to `out`.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn bia_run_length_new(
    n: u32,
    p: f64,
    out: *mut *mut BiaRunLengthDist,
) -> BiaStatus {
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    guarded(|| match run_length_pmf(n as usize, p) {
        Ok(inner) => {
            out.write(Box::into_raw(Box::new(BiaRunLengthDist { inner })));
            BiaStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// # Safety
/// `dist` must be null or a handle from bia_run_length_new not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bia_run_length_free(dist: *mut BiaRunLengthDist) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// P(F = f); zero outside 1..=n.
///
/// # Safety
/// `dist` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_run_length_prob(
    dist: *const BiaRunLengthDist,
    f: u32,
    out: *mut f64,
) -> BiaStatus {
    let dist = try_ref!(dist);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    out.write(dist.inner.prob(f as usize));
    BiaStatus::Ok
}

/// Decodable-layer weights G for block length `n` and retain probability
/// `p`; writes a new handle to `out`.
///
/// # Safety
/// `out` must be null or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn bia_weights_new(
    n: u32,
    p: f64,
    out: *mut *mut BiaWeightFunction,
) -> BiaStatus {
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    guarded(|| {
        let built = run_length_pmf(n as usize, p)
            .and_then(|dist| WeightFunction::from_run_length(&dist));
        match built {
            Ok(inner) => {
                out.write(Box::into_raw(Box::new(BiaWeightFunction { inner })));
                BiaStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `wf` must be null or a handle from bia_weights_new not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bia_weights_free(wf: *mut BiaWeightFunction) {
    if !wf.is_null() {
        drop(Box::from_raw(wf));
    }
}

/// Number of layers n/2.
///
/// # Safety
/// `wf` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_weights_layer_count(
    wf: *const BiaWeightFunction,
    out: *mut u32,
) -> BiaStatus {
    let wf = try_ref!(wf);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    out.write(wf.inner.layer_count() as u32);
    BiaStatus::Ok
}

/// G(i) = P(at least i layers decodable); zero past n/2.
///
/// # Safety
/// `wf` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_weights_get(
    wf: *const BiaWeightFunction,
    i: u32,
    out: *mut f64,
) -> BiaStatus {
    let wf = try_ref!(wf);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    out.write(wf.inner.weight(i as usize));
    BiaStatus::Ok
}

/// Closed-form per-layer allocation for the given weights; writes a new
/// profile handle to `out`.
///
/// # Safety
/// `wf` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_layer_powers(
    wf: *const BiaWeightFunction,
    noise: f64,
    p_t: f64,
    out: *mut *mut BiaPowerProfile,
) -> BiaStatus {
    let wf = try_ref!(wf);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    guarded(|| match layer_powers(&wf.inner, noise, p_t, wf.inner.n()) {
        Ok(inner) => {
            out.write(Box::into_raw(Box::new(BiaPowerProfile { inner })));
            BiaStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// # Safety
/// `profile` must be null or a handle from bia_layer_powers not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bia_profile_free(profile: *mut BiaPowerProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// # Safety
/// `profile` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_profile_layer_count(
    profile: *const BiaPowerProfile,
    out: *mut u32,
) -> BiaStatus {
    let profile = try_ref!(profile);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    out.write(profile.inner.layer_count() as u32);
    BiaStatus::Ok
}

/// Power of 1-based layer `i`.
///
/// # Safety
/// `profile` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_profile_power(
    profile: *const BiaPowerProfile,
    i: u32,
    out: *mut f64,
) -> BiaStatus {
    let profile = try_ref!(profile);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    match profile.inner.power(i as usize) {
        Ok(p) => {
            out.write(p);
            BiaStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// # Safety
/// `profile` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_profile_total_power(
    profile: *const BiaPowerProfile,
    out: *mut f64,
) -> BiaStatus {
    let profile = try_ref!(profile);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    out.write(profile.inner.total_power());
    BiaStatus::Ok
}

/// Cumulative power P_Z(z) above decodable fraction z, for z in [0, 1/2].
///
/// # Safety
/// `wf` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_cumulative_power(
    wf: *const BiaWeightFunction,
    z: f64,
    noise: f64,
    p_t: f64,
    out: *mut f64,
) -> BiaStatus {
    let wf = try_ref!(wf);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    guarded(|| match cumulative_power(z, &wf.inner, noise, p_t) {
        Ok(v) => {
            out.write(v);
            BiaStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// Expected average rate of a profile under the weights.
///
/// # Safety
/// `profile` and `wf` must be live handles or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_avg_rate_analytic(
    profile: *const BiaPowerProfile,
    wf: *const BiaWeightFunction,
    noise: f64,
    out: *mut f64,
) -> BiaStatus {
    let profile = try_ref!(profile);
    let wf = try_ref!(wf);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    guarded(
        || match avg_rate_analytic(&profile.inner, &wf.inner, wf.inner.n(), noise) {
            Ok(v) => {
                out.write(v);
                BiaStatus::Ok
            }
            Err(e) => status_of(&e),
        },
    )
}

/// Half-DoF known-channel reference rate.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_perfect_csi_baseline(
    p_t: f64,
    noise: f64,
    out: *mut f64,
) -> BiaStatus {
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    match perfect_csi_baseline(p_t, noise) {
        Ok(v) => {
            out.write(v);
            BiaStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Runs the full Monte Carlo experiment described by `cfg`: weights and
/// allocation are derived from the config, trials are seeded from
/// base_seed. Writes a new report handle to `out`.
///
/// # Safety
/// `cfg` must be null or valid for reading; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_monte_carlo_avg_rate(
    cfg: *const BiaExperimentConfig,
    out: *mut *mut BiaRateReport,
) -> BiaStatus {
    let cfg = try_ref!(cfg);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    guarded(|| {
        let core = cfg.to_core();
        let run = run_length_pmf(core.n, core.p_direct)
            .and_then(|dist| WeightFunction::from_run_length(&dist))
            .and_then(|wf| layer_powers(&wf, core.noise, core.p_t, core.n))
            .and_then(|profile| monte_carlo_avg_rate(&core, &profile));
        match run {
            Ok(inner) => {
                out.write(Box::into_raw(Box::new(BiaRateReport { inner })));
                BiaStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `report` must be null or a handle from bia_monte_carlo_avg_rate not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn bia_report_free(report: *mut BiaRateReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_report_analytic(
    report: *const BiaRateReport,
    out: *mut f64,
) -> BiaStatus {
    let report = try_ref!(report);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    out.write(report.inner.analytic_avg_rate);
    BiaStatus::Ok
}

/// # Safety
/// `report` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_report_empirical(
    report: *const BiaRateReport,
    out: *mut f64,
) -> BiaStatus {
    let report = try_ref!(report);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    out.write(report.inner.empirical_avg_rate);
    BiaStatus::Ok
}

/// # Safety
/// `report` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_report_std_error(
    report: *const BiaRateReport,
    out: *mut f64,
) -> BiaStatus {
    let report = try_ref!(report);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    out.write(report.inner.std_error);
    BiaStatus::Ok
}

/// # Safety
/// `report` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_report_baseline(
    report: *const BiaRateReport,
    out: *mut f64,
) -> BiaStatus {
    let report = try_ref!(report);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    out.write(report.inner.baseline_perfect_csi);
    BiaStatus::Ok
}

/// # Safety
/// `report` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_report_layer_count(
    report: *const BiaRateReport,
    out: *mut u32,
) -> BiaStatus {
    let report = try_ref!(report);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    out.write(report.inner.per_layer_rates.len() as u32);
    BiaStatus::Ok
}

/// Rate of 1-based layer `i`.
///
/// # Safety
/// `report` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_report_layer_rate(
    report: *const BiaRateReport,
    i: u32,
    out: *mut f64,
) -> BiaStatus {
    let report = try_ref!(report);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    let i = i as usize;
    if i < 1 || i > report.inner.per_layer_rates.len() {
        return BiaStatus::InvalidParameter;
    }
    out.write(report.inner.per_layer_rates[i - 1]);
    BiaStatus::Ok
}

/// Count of trials that decoded exactly `layers` layers.
///
/// # Safety
/// `report` must be a live handle or null; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_report_histogram(
    report: *const BiaRateReport,
    layers: u32,
    out: *mut u64,
) -> BiaStatus {
    let report = try_ref!(report);
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    let layers = layers as usize;
    if layers >= report.inner.decodable_layer_histogram.len() {
        return BiaStatus::InvalidParameter;
    }
    out.write(report.inner.decodable_layer_histogram[layers]);
    BiaStatus::Ok
}

/// Fraction of sampled channel pairs whose stacked signal-and-channel
/// matrix hits the predicted rank.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn bia_verify_lemma1(
    n: u32,
    d_v: u32,
    f: u32,
    trials: u64,
    seed: u64,
    out: *mut f64,
) -> BiaStatus {
    if out.is_null() {
        return BiaStatus::NullPointer;
    }
    guarded(|| {
        match verify_lemma1(n as usize, d_v as usize, f as usize, trials as usize, seed) {
            Ok(v) => {
                out.write(v);
                BiaStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}
