//! Bodies of the `bia` subcommands. Each takes explicit output paths and
//! returns nothing on success; the binary layers manifest capture and exit
//! codes on top.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::alignment::{
    gen_precoder, lemma1_predicted_rank, verify_lemma1_with_tol, zero_forcing_matrix,
};
use crate::cli::config::RunConfig;
use crate::coherence::{enumerate_runlength_oracle, free_dim_ccdf, run_length_pmf};
use crate::error::{Error, Result};
use crate::powalloc::{
    cumulative_power, cumulative_power_smooth, euler_lagrange_residual, layer_powers,
    WeightFunction,
};
use crate::rates::{monte_carlo_avg_rate, sig12, sweep_csv, ExperimentConfig, SweepPoint};

/// Decodable-fraction weights on the grid z = i/n: headerless CSV rows
/// (i/n, G(i)), i = 0..n/2.
pub fn cmd_fz(n: usize, p: f64, out_path: &Path) -> Result<()> {
    let g = free_dim_ccdf(&run_length_pmf(n, p)?)?;
    let mut csv = String::new();
    for (i, gi) in g.iter().enumerate() {
        writeln!(csv, "{},{}", sig12(i as f64 / n as f64), sig12(*gi)).unwrap();
    }
    fs::write(out_path, csv)?;
    Ok(())
}

/// Cumulative power curve on a 200-point grid plus the per-layer powers.
pub fn cmd_power(
    n: usize,
    p: f64,
    noise: f64,
    p_t: f64,
    curve_path: &Path,
    layers_path: &Path,
) -> Result<()> {
    let wf = WeightFunction::from_run_length(&run_length_pmf(n, p)?)?;
    let points = 200usize;
    let mut curve = String::new();
    for j in 0..points {
        let z = 0.5 * j as f64 / (points - 1) as f64;
        let pz = cumulative_power_smooth(z, &wf, noise, p_t)?;
        writeln!(curve, "{},{}", sig12(z), sig12(pz)).unwrap();
    }
    fs::write(curve_path, curve)?;

    let profile = layer_powers(&wf, noise, p_t, n)?;
    let mut layers = String::new();
    for (i, power) in profile.layers().iter().enumerate() {
        writeln!(layers, "{},{}", i + 1, sig12(*power)).unwrap();
    }
    fs::write(layers_path, layers)?;
    Ok(())
}

/// Rate sweep over the configured p and P_t sets, one Monte Carlo run per
/// point, all seeded from the config.
pub fn cmd_rates(cfg: &RunConfig, out_path: &Path) -> Result<()> {
    let mut points = Vec::with_capacity(cfg.p_sweep.len() * cfg.pt_sweep.len());
    for &p in &cfg.p_sweep {
        let wf = WeightFunction::from_run_length(&run_length_pmf(cfg.experiment.n, p)?)?;
        for &p_t in &cfg.pt_sweep {
            let profile = layer_powers(&wf, cfg.experiment.noise, p_t, cfg.experiment.n)?;
            let experiment = ExperimentConfig {
                p_direct: p,
                p_t,
                ..cfg.experiment.clone()
            };
            let report = monte_carlo_avg_rate(&experiment, &profile)?;
            points.push(SweepPoint { p, p_t, report });
        }
    }
    fs::write(out_path, sweep_csv(&points))?;
    Ok(())
}

/// Rank agreement sampled over the (n, F) grid.
pub fn cmd_lemma1(trials: usize, seed: u64, out_path: &Path) -> Result<()> {
    let mut csv = String::from("n,d_v,f,predicted_rank,trials,agree_fraction\n");
    for &n in &[4usize, 8, 16, 20, 32] {
        let d_v = n / 2;
        let mut f_grid = vec![1, n.div_ceil(4), n.div_ceil(2), (3 * n).div_ceil(4), n];
        f_grid.dedup();
        for f in f_grid {
            let predicted = lemma1_predicted_rank(n, d_v, f)?;
            let frac = verify_lemma1_with_tol(n, d_v, f, trials, seed, None)?;
            writeln!(csv, "{n},{d_v},{f},{predicted},{trials},{}", sig12(frac)).unwrap();
        }
    }
    fs::write(out_path, csv)?;
    Ok(())
}

pub const VERIFY_SUITES: [&str; 5] = [
    "dp-oracle",
    "projector",
    "lemma1",
    "euler",
    "power-telescoping",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
    pub all_passed: bool,
    pub rank_tol: Option<f64>,
}

/// Self-check suites with a machine-readable report. `rank_tol` overrides
/// the rank tolerance inside the lemma1 suite only; 0 makes it count
/// roundoff directions and fail, a negative control for the harness.
pub fn cmd_verify(
    selection: &[String],
    rank_tol: Option<f64>,
    out_path: &Path,
) -> Result<VerifyReport> {
    if selection.is_empty() {
        return Err(Error::param("suites", "empty suite selection"));
    }
    for name in selection {
        if !VERIFY_SUITES.contains(&name.as_str()) {
            return Err(Error::param(
                "suites",
                format!("unknown suite `{name}`; available: {}", VERIFY_SUITES.join(", ")),
            ));
        }
    }
    let mut suites = Vec::with_capacity(selection.len());
    for name in selection {
        suites.push(match name.as_str() {
            "dp-oracle" => suite_dp_oracle()?,
            "projector" => suite_projector()?,
            "lemma1" => suite_lemma1(rank_tol)?,
            "euler" => suite_euler()?,
            "power-telescoping" => suite_power_telescoping()?,
            _ => unreachable!(),
        });
    }
    let all_passed = suites.iter().all(|s| s.passed);
    let report = VerifyReport {
        suites,
        all_passed,
        rank_tol,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(out_path, text)?;
    Ok(report)
}

fn suite_dp_oracle() -> Result<SuiteResult> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in [2usize, 4, 8, 12] {
        for p in [0.0, 0.3, 0.7, 1.0] {
            let dp = run_length_pmf(n, p)?;
            let oracle = enumerate_runlength_oracle(n, p)?;
            for f in 1..=n {
                worst = worst.max((dp.prob(f) - oracle.prob(f)).abs());
            }
            cases += 1;
        }
    }
    Ok(SuiteResult {
        name: "dp-oracle".into(),
        passed: worst <= 1e-12,
        cases,
        detail: format!("max pmf deviation {worst:.3e}"),
    })
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|e| e.norm()).fold(0.0, f64::max)
}

fn suite_projector() -> Result<SuiteResult> {
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &n in &[2usize, 8, 20, 64] {
        let prec = gen_precoder(n, 100.0, 400 + n as u64)?;
        let zf = zero_forcing_matrix(&prec)?;
        let d = zf.matrix();
        worst = worst.max(max_abs(&(d * d - d)));
        worst = worst.max(max_abs(&(d - &d.adjoint())));
        worst = worst.max(max_abs(&(d * prec.matrix())));
        cases += 1;
    }
    Ok(SuiteResult {
        name: "projector".into(),
        passed: worst <= 1e-10,
        cases,
        detail: format!("max identity violation {worst:.3e}"),
    })
}

fn suite_lemma1(rank_tol: Option<f64>) -> Result<SuiteResult> {
    let mut min_frac = 1.0f64;
    let mut cases = 0;
    for &n in &[4usize, 8, 16] {
        let d_v = n / 2;
        let mut f_grid = vec![1, n.div_ceil(4), n.div_ceil(2), (3 * n).div_ceil(4), n];
        f_grid.dedup();
        for f in f_grid {
            let frac = verify_lemma1_with_tol(n, d_v, f, 200, 1_000 + n as u64, rank_tol)?;
            min_frac = min_frac.min(frac);
            cases += 1;
        }
    }
    Ok(SuiteResult {
        name: "lemma1".into(),
        passed: min_frac >= 0.995,
        cases,
        detail: format!("min rank agreement {min_frac:.4}"),
    })
}

fn suite_euler() -> Result<SuiteResult> {
    let wf = WeightFunction::from_run_length(&run_length_pmf(20, 0.9)?)?;
    let mut residuals = Vec::new();
    for grid in [25usize, 50, 100, 200] {
        residuals.push(euler_lagrange_residual(&wf, 1.0, 100.0, 20, grid)?);
    }
    let decreasing = residuals.windows(2).all(|w| w[1] < w[0]);
    let last = *residuals.last().unwrap();
    let listed: Vec<String> = residuals.iter().map(|r| format!("{r:.3e}")).collect();
    Ok(SuiteResult {
        name: "euler".into(),
        passed: decreasing && last < 1e-4,
        cases: residuals.len(),
        detail: format!("residuals [{}]", listed.join(", ")),
    })
}

fn suite_power_telescoping() -> Result<SuiteResult> {
    let mut worst_rel = 0.0f64;
    let mut boundary_ok = true;
    let mut nonnegative = true;
    let mut cases = 0;
    for &n in &[8usize, 20] {
        for &p in &[0.0, 0.5, 0.9, 1.0] {
            let wf = WeightFunction::from_run_length(&run_length_pmf(n, p)?)?;
            for &(noise, p_t) in &[(1.0, 100.0), (2.0, 200.0)] {
                let profile = layer_powers(&wf, noise, p_t, n)?;
                let sum: f64 = profile.layers().iter().sum();
                worst_rel = worst_rel.max((sum - p_t).abs() / p_t);
                boundary_ok &= cumulative_power(0.5, &wf, noise, p_t)? == 0.0;
                nonnegative &= profile.layers().iter().all(|&x| x >= 0.0);
                cases += 1;
            }
        }
    }
    Ok(SuiteResult {
        name: "power-telescoping".into(),
        passed: worst_rel <= 1e-9 && boundary_ok && nonnegative,
        cases,
        detail: format!(
            "worst relative budget error {worst_rel:.3e}, boundary zero {boundary_ok}, nonnegative {nonnegative}"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fz_golden_small_and_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fz.csv");
        cmd_fz(2, 0.3, &path).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "0.00000000000e0,1.00000000000e0\n5.00000000000e-1,7.00000000000e-1\n"
        );

        cmd_fz(20, 1.0, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], "0.00000000000e0,1.00000000000e0");
        for line in &lines[1..] {
            assert!(line.ends_with(",0.00000000000e0"), "{line}");
        }
    }

    #[test]
    fn power_outputs_budget_and_boundary() {
        let dir = tempfile::tempdir().unwrap();
        let curve = dir.path().join("pz_curve.csv");
        let layers = dir.path().join("layer_powers.csv");
        cmd_power(20, 0.9, 1.0, 100.0, &curve, &layers).unwrap();

        let rows: Vec<(f64, f64)> = fs::read_to_string(&curve)
            .unwrap()
            .lines()
            .map(|l| {
                let (a, b) = l.split_once(',').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            })
            .collect();
        assert_eq!(rows.len(), 200);
        assert_eq!(rows[0].0, 0.0);
        assert!((rows[0].1 - 100.0).abs() < 1e-9);
        assert_eq!(rows[199], (0.5, 0.0));
        for w in rows.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12, "curve not non-increasing at z = {}", w[1].0);
        }

        let powers: Vec<f64> = fs::read_to_string(&layers)
            .unwrap()
            .lines()
            .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
            .collect();
        assert_eq!(powers.len(), 10);
        let sum: f64 = powers.iter().sum();
        assert!((sum - 100.0).abs() <= 1e-7, "sum = {sum}");
    }

    #[test]
    fn rates_sweep_shape_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = crate::cli::config::parse_config(
            "n = 4\ntrials = 30\nseed = 5\np_sweep = 0.2,0.8\npt_sweep = 10,100\n",
        )
        .unwrap();
        let out_a = dir.path().join("a.csv");
        let out_b = dir.path().join("b.csv");
        cmd_rates(&cfg, &out_a).unwrap();
        cmd_rates(&cfg, &out_b).unwrap();
        let a = fs::read_to_string(&out_a).unwrap();
        assert_eq!(a, fs::read_to_string(&out_b).unwrap());

        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "p,p_t,analytic,empirical,stderr,baseline");
        for line in &lines[1..] {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(cols.len(), 6);
            assert!(cols[2] < cols[5], "analytic above baseline: {line}");
        }
    }

    #[test]
    fn lemma1_grid_report() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lemma1.csv");
        cmd_lemma1(10, 77, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,d_v,f,predicted_rank,trials,agree_fraction");
        assert_eq!(lines.len(), 1 + 4 + 5 * 4);
        for line in &lines[1..] {
            let frac: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert!((0.0..=1.0).contains(&frac));
        }
    }

    #[test]
    fn verify_all_suites_pass_by_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verify_report.json");
        let all: Vec<String> = VERIFY_SUITES.iter().map(|s| s.to_string()).collect();
        let report = cmd_verify(&all, None, &path).unwrap();
        assert!(report.all_passed, "{report:?}");
        assert_eq!(report.suites.len(), 5);

        let back: VerifyReport =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn verify_zero_rank_tol_is_a_failing_control() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verify_report.json");
        let report = cmd_verify(&["lemma1".into()], Some(0.0), &path).unwrap();
        assert!(!report.all_passed);
        assert!(!report.suites[0].passed);
    }

    #[test]
    fn verify_selection_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("verify_report.json");
        assert!(matches!(
            cmd_verify(&[], None, &path),
            Err(Error::Parameter { name: "suites", .. })
        ));
        assert!(cmd_verify(&["nope".into()], None, &path).is_err());
        assert!(!path.exists());
    }
}
