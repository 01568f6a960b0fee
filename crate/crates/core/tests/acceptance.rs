//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single verdict line (visible with --nocapture) and then asserts it.

use std::fs;
use std::process::Command;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use bia_core::alignment::{
    check_interference_nulled, gen_precoder_with_rng, verify_lemma1, zero_forcing_matrix,
    DiagonalChannel,
};
use bia_core::coherence::{enumerate_runlength_oracle, run_length_pmf};
use bia_core::powalloc::{
    cumulative_power, euler_lagrange_residual, euler_lagrange_residual_perturbed, layer_powers,
    PowerProfile, WeightFunction,
};
use bia_core::rates::{
    avg_rate_analytic, layer_rate, monte_carlo_avg_rate, perfect_csi_baseline, ExperimentConfig,
};

fn verdict(label: &str, ok: bool) {
    println!("{label}: {}", if ok { "PASS" } else { "FAIL" });
}

fn weights(n: usize, p: f64) -> WeightFunction {
    WeightFunction::from_run_length(&run_length_pmf(n, p).unwrap()).unwrap()
}

fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[test]
fn criterion1_runlength_dp_matches_enumeration() {
    let mut worst = 0.0f64;
    for n in 1..=14usize {
        for tenths in 0..=10 {
            let p = tenths as f64 / 10.0;
            let dp = run_length_pmf(n, p).unwrap();
            let oracle = enumerate_runlength_oracle(n, p).unwrap();
            for f in 1..=n {
                worst = worst.max((dp.prob(f) - oracle.prob(f)).abs());
            }
        }
    }
    let ok = worst <= 1e-12;
    verdict("criterion 1 (run-length pmf vs exhaustive enumeration, n <= 14)", ok);
    assert!(ok, "worst pmf deviation {worst:.3e} exceeds 1e-12");
}

#[test]
fn criterion2_rank_prediction_holds_statistically() {
    let mut cells = Vec::new();
    for &n in &[4usize, 8, 16, 20, 32] {
        let mut f_grid = vec![1, n.div_ceil(4), n.div_ceil(2), (3 * n).div_ceil(4), n];
        f_grid.dedup();
        for f in f_grid {
            cells.push((n, f));
        }
    }
    let fractions: Vec<(usize, usize, f64)> = cells
        .par_iter()
        .map(|&(n, f)| {
            let seed = 9_000 + (n * 1_000 + f * 7) as u64;
            let frac = verify_lemma1(n, n / 2, f, 1_000, seed).unwrap();
            (n, f, frac)
        })
        .collect();
    let worst = fractions
        .iter()
        .cloned()
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .unwrap();
    let ok = worst.2 >= 0.999;
    verdict("criterion 2 (stacked-precoder rank prediction, 1000 trials/cell)", ok);
    assert!(
        ok,
        "agreement {:.4} at n = {}, F = {} is below 0.999",
        worst.2, worst.0, worst.1
    );
}

#[test]
fn criterion3_constant_interference_is_annihilated() {
    let worst_rel: f64 = (0..1_000u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(7_000 + t);
            let prec = gen_precoder_with_rng(20, 100.0, &mut rng).unwrap();
            let zf = zero_forcing_matrix(&prec).unwrap();
            let cross = DiagonalChannel::constant(20, cgauss(&mut rng)).unwrap();
            let x: Vec<Complex64> = (0..10).map(|_| cgauss(&mut rng)).collect();

            let vx = prec.matrix() * DVector::from_vec(x.clone());
            let through = cross.apply_vec(&vx);
            let scale = through.iter().map(|e| e.norm()).fold(0.0, f64::max);
            let residual = check_interference_nulled(&zf, &cross, &prec, &x).unwrap();
            residual / scale.max(1e-300)
        })
        .reduce(|| 0.0, f64::max);
    let ok = worst_rel <= 1e-8;
    verdict("criterion 3 (zero-forcer nulls constant cross links, 1000 instances)", ok);
    assert!(ok, "worst relative leakage {worst_rel:.3e} exceeds 1e-8");
}

#[test]
fn criterion4_power_budget_boundaries_and_ordering() {
    let mut grid: Vec<(usize, f64, f64)> = Vec::new();
    for &(noise, p_t) in &[(1.0, 10.0), (1.0, 100.0), (1.0, 1e4), (2.0, 200.0)] {
        grid.push((8, noise, p_t));
    }
    for &n in &[20usize, 32, 64] {
        for &(noise, p_t) in &[(1.0, 100.0), (1.0, 1e4), (2.0, 200.0)] {
            grid.push((n, noise, p_t));
        }
    }
    let ps = [0.0, 0.2, 0.5, 0.9, 1.0];

    let mut failures = Vec::new();
    let mut points = 0;
    for &(n, noise, p_t) in &grid {
        for &p in &ps {
            points += 1;
            let wf = weights(n, p);
            let profile = layer_powers(&wf, noise, p_t, n).unwrap();
            let sum: f64 = profile.layers().iter().sum();
            if (sum - p_t).abs() > 1e-9 * p_t {
                failures.push(format!("budget {sum} != {p_t} at (n={n}, p={p})"));
            }
            if cumulative_power(0.5, &wf, noise, p_t).unwrap() != 0.0 {
                failures.push(format!("nonzero tail power at (n={n}, p={p})"));
            }
            for w in profile.layers().windows(2) {
                if w[1] > w[0] + 1e-12 * p_t {
                    failures.push(format!(
                        "layers not non-increasing at (n={n}, p={p}, N={noise}, P_t={p_t}): {} < {}",
                        w[0], w[1]
                    ));
                    break;
                }
            }
        }
    }
    assert_eq!(points, 65);
    let ok = failures.is_empty();
    verdict("criterion 4 (power telescoping, zero tail, layer ordering, 65 points)", ok);
    assert!(ok, "{failures:?}");
}

#[test]
fn criterion5a_closed_form_is_discretely_stationary() {
    let wf = weights(20, 0.9);
    let mut residuals = Vec::new();
    for grid in [25usize, 50, 100, 200, 400] {
        residuals.push(euler_lagrange_residual(&wf, 1.0, 100.0, 20, grid).unwrap());
    }
    let decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
    let first = residuals[0];
    let last = *residuals.last().unwrap();
    let converges = decreasing && last <= first / 64.0 && last < 1e-5;

    let clean_200 = residuals[3];
    let bumped = euler_lagrange_residual_perturbed(&wf, 1.0, 100.0, 20, 200, 10.0).unwrap();
    let control = bumped > 1e-4 && bumped > 100.0 * clean_200;

    let ok = converges && control;
    verdict("criterion 5a (stationarity residual vanishes at discretization order)", ok);
    assert!(
        ok,
        "residuals {residuals:?}, perturbed control {bumped:.3e} (clean {clean_200:.3e})"
    );
}

#[test]
fn criterion5b_closed_form_beats_random_reallocations() {
    let wf = weights(20, 0.9);
    let p_t = 100.0;
    let profile = layer_powers(&wf, 1.0, p_t, 20).unwrap();
    let base = avg_rate_analytic(&profile, &wf, 20, 1.0).unwrap();
    let m = profile.layer_count();

    let mut beaten = 0usize;
    let mut best = base;
    for k in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(41_000 + k);
        let mut q: Vec<f64> = profile
            .layers()
            .iter()
            .map(|&pi| {
                let eps: f64 = rng.sample(StandardNormal);
                (pi + eps * 0.05 * p_t / m as f64).max(0.0)
            })
            .collect();
        let sum: f64 = q.iter().sum();
        for qi in &mut q {
            *qi *= p_t / sum;
        }
        let pert = PowerProfile::from_layers(q, 1.0).unwrap();
        let avg = avg_rate_analytic(&pert, &wf, 20, 1.0).unwrap();
        if avg > base + 1e-12 {
            beaten += 1;
            best = best.max(avg);
        }
    }
    let ok = beaten == 0;
    verdict("criterion 5b (closed-form allocation vs 100 random same-budget profiles)", ok);
    assert!(
        ok,
        "{beaten} of 100 perturbed profiles beat the closed form: best {best:.6} vs {base:.6}; \
         the continuum-optimal allocation is not the discrete n = 20 optimum"
    );
}

/// Exact standard error of the trial-mean rate from the known run-length
/// law. The sample estimate degenerates when p is small: the only rate
/// variation comes from F > n/2, an event of probability ~1e-6 at p = 0.2
/// that a 1e5-trial sample usually never sees.
fn exact_stderr(wf: &WeightFunction, profile: &PowerProfile, trials: usize) -> f64 {
    let m = profile.layer_count();
    let mut prefix = vec![0.0; m + 1];
    for i in 1..=m {
        prefix[i] = prefix[i - 1] + layer_rate(i, profile, wf.n()).unwrap();
    }
    let mut mean = 0.0;
    let mut q = vec![0.0; m + 1];
    for l in 0..=m {
        q[l] = if l < m {
            wf.weight(l) - wf.weight(l + 1)
        } else {
            wf.weight(m)
        };
        mean += q[l] * prefix[l];
    }
    let var: f64 = (0..=m)
        .map(|l| q[l] * (prefix[l] - mean) * (prefix[l] - mean))
        .sum();
    (var / trials as f64).sqrt()
}

#[test]
fn criterion6_monte_carlo_agrees_with_analytic() {
    let mut results = Vec::new();
    for &p in &[0.9, 0.2] {
        let cfg = ExperimentConfig {
            p_direct: p,
            trials: 100_000,
            base_seed: 2_026,
            ..Default::default()
        };
        let wf = weights(20, p);
        let profile = layer_powers(&wf, 1.0, 100.0, 20).unwrap();
        let report = monte_carlo_avg_rate(&cfg, &profile).unwrap();
        let gap = (report.empirical_avg_rate - report.analytic_avg_rate).abs();
        let se = exact_stderr(&wf, &profile, cfg.trials);
        results.push((p, gap, se));
    }
    let ok = results.iter().all(|&(_, gap, se)| gap <= 3.0 * se && se > 0.0);
    verdict("criterion 6 (empirical mean within 3 standard errors, 1e5 trials)", ok);
    assert!(ok, "{results:?}");
}

#[test]
fn criterion7_rate_curves_ordered_and_below_baseline() {
    let ps = [0.2, 0.4, 0.6, 0.8];
    let pt_grid: Vec<f64> = (0..=16).map(|k| 10f64.powf(k as f64 / 4.0)).collect();

    let mut curves = Vec::new();
    for &p in &ps {
        let wf = weights(20, p);
        let curve: Vec<f64> = pt_grid
            .iter()
            .map(|&p_t| {
                let profile = layer_powers(&wf, 1.0, p_t, 20).unwrap();
                avg_rate_analytic(&profile, &wf, 20, 1.0).unwrap()
            })
            .collect();
        curves.push(curve);
    }

    let mut ordered = true;
    let mut dominated = true;
    for (t, &p_t) in pt_grid.iter().enumerate() {
        let baseline = perfect_csi_baseline(p_t, 1.0).unwrap();
        for c in 0..ps.len() {
            dominated &= curves[c][t] < baseline;
            if c > 0 {
                ordered &= curves[c - 1][t] > curves[c][t];
            }
        }
    }
    let ok = ordered && dominated;
    verdict("criterion 7 (slower variation lowers rate, all below the known-channel bound)", ok);
    assert!(ok, "ordered {ordered}, dominated {dominated}");
}

#[test]
fn criterion8_rate_sweep_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.cfg");
    fs::write(
        &cfg_path,
        "n = 20\nk = 3\np_direct = 0.9\ntrials = 1000\nseed = 99\n\
         p_sweep = 0.2,0.8\npt_sweep = 1,100,10000\n",
    )
    .unwrap();

    let mut outputs = Vec::new();
    for (run, threads) in [(0, "1"), (1, "3"), (2, "3")] {
        let out_dir = dir.path().join(format!("out{run}"));
        let status = Command::new(env!("CARGO_BIN_EXE_bia"))
            .args(["rates", "--config"])
            .arg(&cfg_path)
            .arg("--out-dir")
            .arg(&out_dir)
            .args(["--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(out_dir.join("rates.csv")).unwrap());
    }
    let ok = outputs[0] == outputs[1] && outputs[1] == outputs[2];
    verdict("criterion 8 (identical sweep bytes across runs and thread counts)", ok);
    assert!(ok);
}
