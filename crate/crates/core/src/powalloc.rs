//! Layered power allocation from the stationarity closed form.
//!
//! The budget P_t is split over M = n/2 superposition layers. Writing the
//! allocation as the cumulative tail power P_Z(z) (power left for layers
//! deeper than fraction z), the average-rate objective is stationary at
//!
//! ```text
//! P_Z(z) = N * F_Z(0) / (2 z F_Z(1/2 - z)) - N,   clamped to [0, P_t],
//! ```
//!
//! where the weight F_Z(1/2 - z) = G(floor(n z)) steps through the
//! decodability grid. Layer powers are first differences at z = j/n, so the
//! budget telescopes exactly: sum_j P_j = P_Z(0) - P_Z(1/2) = P_t - 0.
//!
//! `euler_lagrange_residual` checks stationarity numerically. It works in
//! the increasing parameterization u = 1/2 - z with a piecewise-linear
//! interpolant of the weights (the step function has no usable derivative),
//! differentiates the closed form by central differences, and evaluates
//! |D_y - dD_{y'}/du| for the objective integrand
//!
//! ```text
//! D(y, y', u) = (1/(2 ln 2)) (1/2 - u) y'(u) F_U(u) / (N + y(u)),
//! ```
//!
//! whose stationarity expression dD_{y'}/du = (1/(2 ln 2)) (-F_U +
//! (1/2 - u) f_U) / (N + P) the closed form satisfies identically. The
//! residual is evaluated only where neither clamp binds: on clamped
//! stretches the profile is constant and stationarity is not claimed.

use serde::{Deserialize, Serialize};

use crate::coherence::{free_dim_ccdf, RunLengthDistribution};
use crate::error::{Error, Result};

/// Decodability weights G(0..=n/2) interpreted as the step function
/// F_Z(1/2 - z) = G(floor(n z)).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    n: usize,
    grid: Vec<f64>,
}

impl WeightFunction {
    pub fn new(n: usize, grid: Vec<f64>) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(Error::param("n", format!("need even n >= 2, got {n}")));
        }
        if grid.len() != n / 2 + 1 {
            return Err(Error::param(
                "grid",
                format!("need n/2 + 1 = {} weights, got {}", n / 2 + 1, grid.len()),
            ));
        }
        if grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::param("grid", "weights must be finite"));
        }
        if (grid[0] - 1.0).abs() > 1e-9 {
            return Err(Error::param("grid", format!("G(0) must be 1, got {}", grid[0])));
        }
        // accumulated-rounding slack: ccdf sums can overshoot 1 by a few ulp
        if grid.iter().any(|&g| !(-1e-12..=1.0 + 1e-9).contains(&g)) {
            return Err(Error::param("grid", "weights must lie in [0, 1]"));
        }
        if grid.windows(2).any(|w| w[1] > w[0] + 1e-12) {
            return Err(Error::param("grid", "weights must be non-increasing"));
        }
        Ok(WeightFunction { n, grid })
    }

    pub fn from_run_length(dist: &RunLengthDistribution) -> Result<Self> {
        Self::new(dist.n(), free_dim_ccdf(dist)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layer_count(&self) -> usize {
        self.n / 2
    }

    /// G(i); zero past depth n/2.
    pub fn weight(&self, i: usize) -> f64 {
        self.grid.get(i).copied().unwrap_or(0.0)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Index floor(n z) with a guard: grid arguments arrive as j/n with
    /// float error, so values within 1e-9 of an integer snap to it.
    fn grid_index(&self, z: f64) -> usize {
        let t = self.n as f64 * z;
        let r = t.round();
        let idx = if (t - r).abs() < 1e-9 { r as usize } else { t.floor() as usize };
        idx.min(self.n / 2)
    }

    /// Step weight F_Z(1/2 - z) = G(floor(n z)) for z in [0, 1/2].
    pub fn step_at(&self, z: f64) -> f64 {
        self.weight(self.grid_index(z))
    }

    /// Piecewise-linear interpolant in the increasing parameterization:
    /// nodes u_j = 1/2 - j/n carry G(j). Continuous and non-decreasing on
    /// [0, 1/2]; kinks sit at the nodes.
    pub fn interp_at(&self, u: f64) -> f64 {
        let m = self.n / 2;
        let s = (self.n as f64 * (0.5 - u)).clamp(0.0, m as f64);
        let j = (s.floor() as usize).min(m - 1);
        let t = s - j as f64;
        self.grid[j] * (1.0 - t) + self.grid[j + 1] * t
    }
}

/// Per-layer powers plus the budget and noise they were derived for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PowerProfileRepr", into = "PowerProfileRepr")]
pub struct PowerProfile {
    layers: Vec<f64>,
    p_t: f64,
    noise: f64,
    saturation_index: Option<usize>,
}

impl PowerProfile {
    /// Wraps an explicit allocation; the budget is the layer sum. Used for
    /// perturbation experiments and deserialization.
    pub fn from_layers(layers: Vec<f64>, noise: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::param("layers", "need at least one layer"));
        }
        if layers.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::param("layers", "powers must be finite and >= 0"));
        }
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(Error::param("noise", format!("must be positive, got {noise}")));
        }
        let p_t = layers.iter().sum();
        Ok(PowerProfile { layers, p_t, noise, saturation_index: None })
    }

    pub fn n(&self) -> usize {
        2 * self.layers.len()
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[f64] {
        &self.layers
    }

    /// P_i for 1-based layer index.
    pub fn power(&self, i: usize) -> Result<f64> {
        if i < 1 || i > self.layers.len() {
            return Err(Error::param(
                "i",
                format!("layer index must be in 1..={}, got {i}", self.layers.len()),
            ));
        }
        Ok(self.layers[i - 1])
    }

    pub fn total_power(&self) -> f64 {
        self.p_t
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Number of leading grid points z = j/n pinned at the cap P_t when the
    /// profile came from `layer_powers`; 1 means only z = 0. None for
    /// profiles assembled from raw layers.
    pub fn saturation_index(&self) -> Option<usize> {
        self.saturation_index
    }
}

#[derive(Serialize, Deserialize)]
struct PowerProfileRepr {
    n: usize,
    #[serde(rename = "N")]
    noise: f64,
    #[serde(rename = "Pt")]
    p_t: f64,
    layers: Vec<f64>,
}

impl From<PowerProfile> for PowerProfileRepr {
    fn from(p: PowerProfile) -> Self {
        PowerProfileRepr { n: p.n(), noise: p.noise, p_t: p.p_t, layers: p.layers }
    }
}

impl TryFrom<PowerProfileRepr> for PowerProfile {
    type Error = Error;

    fn try_from(r: PowerProfileRepr) -> Result<Self> {
        if r.n != 2 * r.layers.len() {
            return Err(Error::param(
                "n",
                format!("n = {} does not match {} layers", r.n, r.layers.len()),
            ));
        }
        let profile = PowerProfile::from_layers(r.layers, r.noise)?;
        if (profile.p_t - r.p_t).abs() > 1e-9 * r.p_t.abs().max(1.0) {
            return Err(Error::param(
                "Pt",
                format!("layers sum to {}, header says {}", profile.p_t, r.p_t),
            ));
        }
        Ok(PowerProfile { p_t: r.p_t, ..profile })
    }
}

fn check_noise_power(noise: f64, p_t: f64) -> Result<()> {
    if !(noise > 0.0 && noise.is_finite()) {
        return Err(Error::param("noise", format!("must be positive, got {noise}")));
    }
    if !(p_t > 0.0 && p_t.is_finite()) {
        return Err(Error::param("p_t", format!("must be positive, got {p_t}")));
    }
    Ok(())
}

/// Cumulative tail power P_Z(z) on [0, 1/2], clamped to [0, P_t]. The
/// endpoints are pinned exactly: P_Z(0) = P_t (the 1/z divergence always
/// caps) and P_Z(1/2) = 0 (boundary condition). Depths whose weight is zero
/// get zero power.
pub fn cumulative_power(z: f64, wf: &WeightFunction, noise: f64, p_t: f64) -> Result<f64> {
    check_noise_power(noise, p_t)?;
    if !z.is_finite() || !(0.0..=0.5).contains(&z) {
        return Err(Error::param("z", format!("must be in [0, 1/2], got {z}")));
    }
    if z == 0.0 {
        return Ok(p_t);
    }
    if z == 0.5 {
        return Ok(0.0);
    }
    let g = wf.step_at(z);
    if g <= 0.0 {
        return Ok(0.0);
    }
    let fz0 = wf.weight(wf.n() / 2);
    let raw = noise * fz0 / (2.0 * z * g) - noise;
    Ok(raw.clamp(0.0, p_t))
}

/// The cumulative curve evaluated with the piecewise-linear weight
/// interpolant instead of the step, for plotting. The step form jumps
/// upward wherever the weight steps down between grid points; this variant
/// is continuous and monotone non-increasing, and agrees with
/// `cumulative_power` at every z = j/n.
pub fn cumulative_power_smooth(z: f64, wf: &WeightFunction, noise: f64, p_t: f64) -> Result<f64> {
    check_noise_power(noise, p_t)?;
    if !z.is_finite() || !(0.0..=0.5).contains(&z) {
        return Err(Error::param("z", format!("must be in [0, 1/2], got {z}")));
    }
    if z == 0.0 {
        return Ok(p_t);
    }
    if z == 0.5 {
        return Ok(0.0);
    }
    let g = wf.interp_at(0.5 - z);
    if g <= 0.0 {
        return Ok(0.0);
    }
    let fz0 = wf.weight(wf.n() / 2);
    let raw = noise * fz0 / (2.0 * z * g) - noise;
    Ok(raw.clamp(0.0, p_t))
}

/// Discretizes the cumulative curve into per-layer powers
/// P_j = P_Z((j-1)/n) - P_Z(j/n), j = 1..n/2.
pub fn layer_powers(wf: &WeightFunction, noise: f64, p_t: f64, n: usize) -> Result<PowerProfile> {
    if n != wf.n() {
        return Err(Error::param("n", format!("n = {n} does not match weights ({})", wf.n())));
    }
    check_noise_power(noise, p_t)?;
    let m = n / 2;
    let mut pz = Vec::with_capacity(m + 1);
    for j in 0..=m {
        pz.push(cumulative_power(j as f64 / n as f64, wf, noise, p_t)?);
    }
    let saturation_index = pz.iter().take_while(|&&v| v == p_t).count();
    let mut layers = Vec::with_capacity(m);
    for j in 1..=m {
        let p = pz[j - 1] - pz[j];
        if p < -1e-12 * p_t {
            return Err(Error::Numerical(format!(
                "cumulative power not monotone at j = {j}: {} -> {}",
                pz[j - 1],
                pz[j]
            )));
        }
        layers.push(p.max(0.0));
    }
    Ok(PowerProfile {
        layers,
        p_t,
        noise,
        saturation_index: Some(saturation_index),
    })
}

/// Max |D_y - dD_{y'}/du| of the closed form over a grid of roughly
/// `grid_size` points placed inside the region where neither clamp binds,
/// with difference stencils kept inside single linear pieces of the weight
/// interpolant. Decays like grid_size^-2 for the unperturbed closed form.
pub fn euler_lagrange_residual(
    wf: &WeightFunction,
    noise: f64,
    p_t: f64,
    n: usize,
    grid_size: usize,
) -> Result<f64> {
    if n != wf.n() {
        return Err(Error::param("n", format!("n = {n} does not match weights ({})", wf.n())));
    }
    check_noise_power(noise, p_t)?;
    if grid_size < 4 {
        return Err(Error::param("grid_size", format!("need at least 4 points, got {grid_size}")));
    }
    stationarity_residual(wf, noise, p_t, grid_size, 0.0)
}

/// Same residual for the closed form plus a smooth bump of the given
/// amplitude; a non-stationary control that stays bounded away from zero.
pub fn euler_lagrange_residual_perturbed(
    wf: &WeightFunction,
    noise: f64,
    p_t: f64,
    n: usize,
    grid_size: usize,
    amplitude: f64,
) -> Result<f64> {
    if n != wf.n() {
        return Err(Error::param("n", format!("n = {n} does not match weights ({})", wf.n())));
    }
    check_noise_power(noise, p_t)?;
    if grid_size < 4 {
        return Err(Error::param("grid_size", format!("need at least 4 points, got {grid_size}")));
    }
    if !amplitude.is_finite() {
        return Err(Error::param("amplitude", "must be finite"));
    }
    stationarity_residual(wf, noise, p_t, grid_size, amplitude)
}

fn stationarity_residual(
    wf: &WeightFunction,
    noise: f64,
    p_t: f64,
    grid_size: usize,
    bump_amplitude: f64,
) -> Result<f64> {
    let n = wf.n();
    let m = n / 2;
    let w0 = wf.weight(m);
    if w0 <= 0.0 {
        return Err(Error::NotApplicable(
            "deepest weight is zero; the closed form is degenerate".into(),
        ));
    }
    let raw = |u: f64| noise * w0 / (2.0 * (0.5 - u) * wf.interp_at(u)) - noise;

    // Interior of the unclamped region: raw crosses 0 at u = 0, may stay
    // non-positive for a while, then rises monotonically to the P_t cap.
    let scan = 4096;
    let step = 0.5 / scan as f64;
    let mut last_nonpos = 0usize;
    let mut first_cap = None;
    for k in 0..scan {
        let v = raw(k as f64 * step);
        if v <= 0.0 {
            last_nonpos = k;
        }
        if v >= p_t && first_cap.is_none() && k > last_nonpos {
            first_cap = Some(k);
            break;
        }
    }
    let hi_limit = 0.5 - 1e-12;
    let u_lo = if last_nonpos + 1 >= scan {
        return Err(Error::NotApplicable("no positive unclamped region".into()));
    } else {
        let mut lo = last_nonpos as f64 * step;
        let mut hi = lo + step;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if raw(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let u_sat = match first_cap {
        Some(k) => {
            let mut lo = (k - 1) as f64 * step;
            let mut hi = k as f64 * step;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if raw(mid) >= p_t {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            lo
        }
        None => {
            if raw(hi_limit) < p_t {
                hi_limit
            } else {
                let mut lo = (scan - 1) as f64 * step;
                let mut hi = hi_limit;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if raw(mid) >= p_t {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                lo
            }
        }
    };
    let span = u_sat - u_lo;
    if !(span > 1e-9) {
        return Err(Error::NotApplicable(
            "power cap binds over the whole positive region".into(),
        ));
    }

    // Segment the interior at interpolant kinks so no stencil straddles one.
    let mut bounds = vec![u_lo];
    for j in (1..m).rev() {
        let u_kink = 0.5 - j as f64 / n as f64;
        if u_kink > u_lo && u_kink < u_sat {
            bounds.push(u_kink);
        }
    }
    bounds.push(u_sat);

    let bump = |u: f64| {
        let s = (std::f64::consts::PI * (u - u_lo) / span).sin();
        bump_amplitude * s * s
    };
    let profile = |u: f64| raw(u) + bump(u);

    let c = 0.5 / std::f64::consts::LN_2;
    let mut max_res = 0.0f64;
    let mut evaluated = 0usize;
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        let pts = ((grid_size as f64 * len / span).ceil() as usize).max(1);
        let h_seg = len / (2.0 * (pts + 1) as f64);
        for k in 0..pts {
            let u = a + (k + 1) as f64 * len / (pts + 1) as f64;
            // the closed form steepens like 1/(1/2 - u) toward the cap;
            // shrink the stencil there, scaling with the refinement so the
            // difference error stays quadratic all the way to the cap
            let h = h_seg.min(2.5 * (0.5 - u) / grid_size as f64);
            let pu = profile(u);
            let rho = (profile(u + h) - profile(u - h)) / (2.0 * h);
            let fu = wf.interp_at(u);
            let slope = (wf.interp_at(u + h) - wf.interp_at(u - h)) / (2.0 * h);
            let denom = noise + pu;
            let d_y = -c * (0.5 - u) * rho * fu / (denom * denom);
            let d_yp_du = c * ((0.5 - u) * slope - fu) / denom;
            max_res = max_res.max((d_y - d_yp_du).abs());
            evaluated += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::NotApplicable("unclamped region has no usable points".into()));
    }
    Ok(max_res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::run_length_pmf;
    use proptest::prelude::*;

    fn paper_weights() -> WeightFunction {
        WeightFunction::from_run_length(&run_length_pmf(20, 0.9).unwrap()).unwrap()
    }

    // Frozen from an independent scripted recomputation of the closed form.
    const PZ_20_09: [f64; 11] = [
        100.0,
        2.90224508579236,
        1.0212757263252041,
        0.40651752621471293,
        0.11153894272945131,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    const P_20_09: [f64; 10] = [
        97.09775491420764,
        1.880969359467156,
        0.6147582001104912,
        0.2949785834852616,
        0.11153894272945131,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ];

    #[test]
    fn weight_function_validation() {
        assert!(WeightFunction::new(20, vec![1.0; 11]).is_ok());
        assert!(WeightFunction::new(19, vec![1.0; 11]).is_err());
        assert!(WeightFunction::new(20, vec![1.0; 10]).is_err());
        assert!(WeightFunction::new(20, {
            let mut g = vec![1.0; 11];
            g[0] = 0.9;
            g
        })
        .is_err());
        assert!(WeightFunction::new(20, {
            let mut g = vec![0.5; 11];
            g[0] = 1.0;
            g[5] = 0.7;
            g
        })
        .is_err());
        // ccdf rounding overshoot above 1 stays acceptable
        let mut g = vec![1.0; 11];
        g[0] = 1.0 + 5e-13;
        assert!(WeightFunction::new(20, g).is_ok());
    }

    #[test]
    fn step_lookup_snaps_grid_arguments() {
        let wf = paper_weights();
        assert_eq!(wf.step_at(0.0), wf.weight(0));
        assert_eq!(wf.step_at(0.5), wf.weight(10));
        assert_eq!(wf.step_at(3.0 / 20.0), wf.weight(3));
        // strictly between grid points the step holds its left value
        assert_eq!(wf.step_at(0.225), wf.weight(4));
        // formally floor(20 * 0.2 - eps) would be 3; the snap keeps index 4
        assert_eq!(wf.step_at(0.2f64.next_down()), wf.weight(4));
    }

    #[test]
    fn interpolant_matches_nodes_and_is_monotone() {
        let wf = paper_weights();
        for j in 0..=10usize {
            let u = 0.5 - j as f64 / 20.0;
            assert!((wf.interp_at(u) - wf.weight(j)).abs() < 1e-12, "node {j}");
        }
        let mut prev = wf.interp_at(0.0);
        for k in 1..=1000 {
            let u = 0.5 * k as f64 / 1000.0;
            let v = wf.interp_at(u);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn cumulative_power_boundaries_are_exact() {
        let wf = paper_weights();
        assert_eq!(cumulative_power(0.0, &wf, 1.0, 100.0).unwrap(), 100.0);
        assert_eq!(cumulative_power(0.5, &wf, 1.0, 100.0).unwrap(), 0.0);
        assert!(cumulative_power(-0.1, &wf, 1.0, 100.0).is_err());
        assert!(cumulative_power(0.51, &wf, 1.0, 100.0).is_err());
        assert!(cumulative_power(f64::NAN, &wf, 1.0, 100.0).is_err());
        assert!(cumulative_power(0.2, &wf, 0.0, 100.0).is_err());
        assert!(cumulative_power(0.2, &wf, 1.0, -1.0).is_err());
    }

    #[test]
    fn cumulative_power_frozen_values() {
        let wf = paper_weights();
        for (j, want) in PZ_20_09.iter().enumerate() {
            let got = cumulative_power(j as f64 / 20.0, &wf, 1.0, 100.0).unwrap();
            if *want == 0.0 {
                assert_eq!(got, 0.0, "j={j}");
            } else {
                assert!((got - want).abs() <= 1e-10 * want, "j={j}: {got} vs {want}");
            }
        }
        // within one step piece the curve falls like 1/z; across piece
        // boundaries only the grid values are claimed monotone
        for j in 0..10 {
            let mut prev = f64::INFINITY;
            for k in 0..20 {
                let z = (j as f64 + k as f64 / 20.0) / 20.0;
                if z == 0.0 {
                    continue;
                }
                let v = cumulative_power(z, &wf, 1.0, 100.0).unwrap();
                assert!(v <= prev + 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn smooth_curve_is_monotone_and_agrees_on_grid() {
        let wf = paper_weights();
        assert_eq!(cumulative_power_smooth(0.0, &wf, 1.0, 100.0).unwrap(), 100.0);
        assert_eq!(cumulative_power_smooth(0.5, &wf, 1.0, 100.0).unwrap(), 0.0);
        for j in 0..=10 {
            let z = j as f64 / 20.0;
            let step = cumulative_power(z, &wf, 1.0, 100.0).unwrap();
            let smooth = cumulative_power_smooth(z, &wf, 1.0, 100.0).unwrap();
            assert!((step - smooth).abs() <= 1e-9 * step.max(1.0), "j={j}");
        }
        let mut prev = f64::INFINITY;
        for k in 0..=500 {
            let v = cumulative_power_smooth(0.5 * k as f64 / 500.0, &wf, 1.0, 100.0).unwrap();
            assert!(v <= prev + 1e-10, "z={}", 0.5 * k as f64 / 500.0);
            prev = v;
        }
    }

    #[test]
    fn layer_powers_frozen_values_and_telescoping() {
        let wf = paper_weights();
        let profile = layer_powers(&wf, 1.0, 100.0, 20).unwrap();
        assert_eq!(profile.layer_count(), 10);
        for (j, want) in P_20_09.iter().enumerate() {
            let got = profile.layers()[j];
            if *want == 0.0 {
                assert_eq!(got, 0.0, "layer {}", j + 1);
            } else {
                assert!((got - want).abs() <= 1e-10 * want, "layer {}: {got} vs {want}", j + 1);
            }
        }
        let sum: f64 = profile.layers().iter().sum();
        assert!((sum - 100.0).abs() <= 1e-9 * 100.0);
        for w in profile.layers().windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * 100.0);
        }
        assert_eq!(profile.saturation_index(), Some(1));
        assert_eq!(profile.total_power(), 100.0);
        assert_eq!(profile.noise(), 1.0);
        assert_eq!(profile.n(), 20);
    }

    #[test]
    fn degenerate_weights_put_everything_in_layer_one() {
        let wf = WeightFunction::from_run_length(&run_length_pmf(20, 1.0).unwrap()).unwrap();
        let profile = layer_powers(&wf, 1.0, 100.0, 20).unwrap();
        assert_eq!(profile.layers()[0], 100.0);
        for &p in &profile.layers()[1..] {
            assert_eq!(p, 0.0);
        }
        let sum: f64 = profile.layers().iter().sum();
        assert_eq!(sum, 100.0);
    }

    #[test]
    fn fast_variation_spreads_power_across_layers() {
        let wf0 = WeightFunction::from_run_length(&run_length_pmf(20, 0.0).unwrap()).unwrap();
        let spread = layer_powers(&wf0, 1.0, 100.0, 20).unwrap();
        let wf9 = paper_weights();
        let peaked = layer_powers(&wf9, 1.0, 100.0, 20).unwrap();
        let count = |p: &PowerProfile| p.layers().iter().filter(|&&v| v > 0.1).count();
        assert!(count(&spread) > count(&peaked));
        assert!(spread.layers()[0] < peaked.layers()[0]);
    }

    #[test]
    fn profile_json_shape_and_roundtrip() {
        let profile = PowerProfile::from_layers(vec![3.0, 1.0], 0.5).unwrap();
        let json = serde_json::to_string(&profile).unwrap();
        assert_eq!(json, r#"{"n":4,"N":0.5,"Pt":4.0,"layers":[3.0,1.0]}"#);
        let back: PowerProfile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.layers(), profile.layers());
        assert_eq!(back.saturation_index(), None);

        let bad = r#"{"n":4,"N":0.5,"Pt":5.0,"layers":[3.0,1.0]}"#;
        assert!(serde_json::from_str::<PowerProfile>(bad).is_err());
        let bad = r#"{"n":6,"N":0.5,"Pt":4.0,"layers":[3.0,1.0]}"#;
        assert!(serde_json::from_str::<PowerProfile>(bad).is_err());
        let bad = r#"{"n":4,"N":0.5,"Pt":2.0,"layers":[3.0,-1.0]}"#;
        assert!(serde_json::from_str::<PowerProfile>(bad).is_err());
    }

    #[test]
    fn residual_converges_for_closed_form() {
        let wf = paper_weights();
        let res: Vec<f64> = [25usize, 50, 100, 200, 400]
            .iter()
            .map(|&g| euler_lagrange_residual(&wf, 1.0, 100.0, 20, g).unwrap())
            .collect();
        println!("residuals: {res:?}");
        for w in res.windows(2) {
            assert!(w[1] < w[0], "residual must shrink with refinement: {res:?}");
        }
        assert!(res[4] <= res[0] / 64.0, "expected near-quadratic decay: {res:?}");
        assert!(res[4] < 1e-5, "res(400) = {}", res[4]);
    }

    #[test]
    fn residual_flags_perturbed_profiles() {
        let wf = paper_weights();
        let clean = euler_lagrange_residual(&wf, 1.0, 100.0, 20, 200).unwrap();
        let bumped = euler_lagrange_residual_perturbed(&wf, 1.0, 100.0, 20, 200, 10.0).unwrap();
        println!("clean {clean} bumped {bumped}");
        assert!(bumped > 100.0 * clean.max(1e-12));
        assert!(bumped > 1e-4);
    }

    #[test]
    fn residual_not_applicable_cases() {
        let wf = WeightFunction::from_run_length(&run_length_pmf(20, 1.0).unwrap()).unwrap();
        match euler_lagrange_residual(&wf, 1.0, 100.0, 20, 100) {
            Err(Error::NotApplicable(_)) => {}
            other => panic!("expected not-applicable, got {other:?}"),
        }
        let wf = paper_weights();
        match euler_lagrange_residual(&wf, 1.0, 1e-12, 20, 100) {
            Err(Error::NotApplicable(_)) => {}
            other => panic!("expected not-applicable, got {other:?}"),
        }
        assert!(euler_lagrange_residual(&wf, 1.0, 100.0, 18, 100).is_err());
        assert!(euler_lagrange_residual(&wf, 1.0, 100.0, 20, 3).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn telescoping_and_nonnegativity_hold_broadly(
            half in 1usize..24,
            p in 0.0f64..=1.0,
            noise in 0.05f64..4.0,
            p_t in 0.01f64..20_000.0,
        ) {
            let n = 2 * half;
            let wf = WeightFunction::from_run_length(&run_length_pmf(n, p).unwrap()).unwrap();
            let profile = layer_powers(&wf, noise, p_t, n).unwrap();
            let sum: f64 = profile.layers().iter().sum();
            prop_assert!((sum - p_t).abs() <= 1e-9 * p_t);
            for &v in profile.layers() {
                prop_assert!(v >= 0.0);
            }
            // the cumulative curve itself is monotone even where the layer
            // sequence is reshaped by the cap
            let mut prev = f64::INFINITY;
            for j in 0..=half {
                let v = cumulative_power(j as f64 / n as f64, &wf, noise, p_t).unwrap();
                prop_assert!(v <= prev + 1e-12 * p_t.max(1.0));
                prev = v;
            }
        }
    }
}
