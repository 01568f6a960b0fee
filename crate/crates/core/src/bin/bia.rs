use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use bia_core::cli::commands::{
    cmd_fz, cmd_lemma1, cmd_power, cmd_rates, cmd_verify, VERIFY_SUITES,
};
use bia_core::cli::config::{load_config, RunConfig};
use bia_core::cli::manifest::RunManifest;
use bia_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "bia",
    version,
    about = "blind interference alignment over block-fading channels: \
             distributions, power allocation, and rate experiments"
)]
struct Cli {
    /// key=value experiment config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// directory for output files and the run manifest
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// overrides the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// worker threads for trial parallelism, 0 = library default
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate the decodable-fraction weights G on the grid z = i/n
    Fz {
        /// block length, even
        #[arg(long)]
        n: Option<usize>,
        /// retain probability of the direct link
        #[arg(long)]
        p: Option<f64>,
    },
    /// Write the cumulative power curve and the per-layer allocation
    Power {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        /// noise power
        #[arg(long)]
        noise: Option<f64>,
        /// total transmit power
        #[arg(long)]
        p_t: Option<f64>,
    },
    /// Monte Carlo rate sweep over the configured p and P_t sets
    Rates,
    /// Run the self-check suites and write a machine-readable report
    Verify {
        /// comma-separated subset of: dp-oracle, projector, lemma1, euler,
        /// power-telescoping
        #[arg(long)]
        suites: Option<String>,
        /// relative rank tolerance override for the lemma1 suite; 0 is a
        /// deliberately failing control
        #[arg(long)]
        rank_tol: Option<f64>,
    },
    /// Sample rank agreement of the subspace-collision prediction
    Lemma1 {
        /// trials per (n, F) cell
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config { .. } | Error::Parameter { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.base_seed = seed;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    let started = Instant::now();

    let mut files: Vec<String> = Vec::new();
    let mut verify_failure: Option<String> = None;
    match &cli.cmd {
        Cmd::Fz { n, p } => {
            cfg.experiment.n = n.unwrap_or(cfg.experiment.n);
            cfg.experiment.p_direct = p.unwrap_or(cfg.experiment.p_direct);
            cmd_fz(cfg.experiment.n, cfg.experiment.p_direct, &cli.out_dir.join("fz.csv"))?;
            files.push("fz.csv".into());
        }
        Cmd::Power { n, p, noise, p_t } => {
            cfg.experiment.n = n.unwrap_or(cfg.experiment.n);
            cfg.experiment.p_direct = p.unwrap_or(cfg.experiment.p_direct);
            cfg.experiment.noise = noise.unwrap_or(cfg.experiment.noise);
            cfg.experiment.p_t = p_t.unwrap_or(cfg.experiment.p_t);
            cmd_power(
                cfg.experiment.n,
                cfg.experiment.p_direct,
                cfg.experiment.noise,
                cfg.experiment.p_t,
                &cli.out_dir.join("pz_curve.csv"),
                &cli.out_dir.join("layer_powers.csv"),
            )?;
            files.push("pz_curve.csv".into());
            files.push("layer_powers.csv".into());
        }
        Cmd::Rates => {
            cmd_rates(&cfg, &cli.out_dir.join("rates.csv"))?;
            files.push("rates.csv".into());
        }
        Cmd::Verify { suites, rank_tol } => {
            let selection: Vec<String> = match suites {
                Some(s) => s
                    .split(',')
                    .map(|x| x.trim().to_string())
                    .filter(|x| !x.is_empty())
                    .collect(),
                None => VERIFY_SUITES.iter().map(|s| s.to_string()).collect(),
            };
            let report =
                cmd_verify(&selection, *rank_tol, &cli.out_dir.join("verify_report.json"))?;
            files.push("verify_report.json".into());
            if !report.all_passed {
                let failed: Vec<&str> = report
                    .suites
                    .iter()
                    .filter(|s| !s.passed)
                    .map(|s| s.name.as_str())
                    .collect();
                verify_failure = Some(format!("suites failed: {}", failed.join(", ")));
            }
        }
        Cmd::Lemma1 { trials } => {
            cmd_lemma1(*trials, cfg.experiment.base_seed, &cli.out_dir.join("lemma1.csv"))?;
            files.push("lemma1.csv".into());
        }
    }

    let manifest = RunManifest::capture(
        cfg.experiment.clone(),
        &cli.out_dir,
        &files,
        started.elapsed().as_millis() as u64,
    )?;
    manifest.save(&cli.out_dir.join("manifest.json"))?;
    manifest.verify(&cli.out_dir)?;

    match verify_failure {
        Some(msg) => Err(Error::VerificationFailed(msg)),
        None => Ok(()),
    }
}
