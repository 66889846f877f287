//! `hmb`: hashing multi-arm beam training simulator.
//!
//! Subcommands cover the whole pipeline: codebook generation, scanning
//! simulation, identification, accuracy and overhead sweeps, the
//! round-count trend check and an invariant self test. Exit codes: 0 on
//! success, 2 on configuration errors, 3 when an accuracy target is
//! unreachable, 1 otherwise.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hmb_core::codebook::write_codebook;
use hmb_core::harness::{
    format_float, identify_from_files, run_accuracy_sweep, run_overhead_sweep, selftest,
    simulate_to_files, trend_check, write_codebook_files, write_metrics_csv, write_trend_csv,
    ExperimentConfig,
};
use hmb_core::hashing::sample_hash;
use hmb_core::rng::{trial_stream, StreamPurpose};
use hmb_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "hmb",
    version,
    about = "Hashing multi-arm beam training for multi-RIS mmWave systems",
    after_help = "Config file: flat `key = value` lines with exactly the keys\n\
                  I, K, n_h, n_v, d_h, d_v, N1, N2, B, L, k_wise, gain_gap_db,\n\
                  snr_db, trials, seed, methods, target_error, accuracy_target,\n\
                  out_dir. Lists (snr_db, methods) are comma-separated.\n\
                  Without --config the built-in defaults apply."
)]
struct Cli {
    /// Experiment config file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config output directory (or file for gen-hash).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; 0 picks the machine default. HMB_THREADS overrides.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output format (only csv is supported).
    #[arg(long, global = true, default_value = "csv")]
    format: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one polynomial hash and print `p k B a_0 .. a_{k-1}`.
    GenHash,
    /// Write the per-RIS multi-arm codebook files.
    GenCodebook,
    /// Run scanning trials and write trace.csv, truth.csv and codebooks.
    Simulate,
    /// Identify the traces in the output directory into results.csv.
    Identify,
    /// Accuracy versus SNR per method; writes accuracy.csv.
    SweepAccuracy,
    /// Training overhead versus direction count; writes overhead.csv.
    SweepOverhead,
    /// Misidentification rate versus round count; writes trend.csv.
    CheckTheorem2,
    /// Run the invariant battery.
    Selftest,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads(cli: &Cli) -> usize {
    match std::env::var("HMB_THREADS") {
        Ok(v) => v.parse().unwrap_or(cli.threads),
        Err(_) => cli.threads,
    }
}

fn run(cli: &Cli) -> Result<()> {
    if cli.format != "csv" {
        return Err(Error::InvalidConfig(format!(
            "unsupported format '{}'",
            cli.format
        )));
    }
    let cfg = load_config(cli)?;
    let threads = threads(cli);

    match cli.command {
        Command::GenHash => {
            let family = cfg.family()?;
            let hash = sample_hash(&family, &mut trial_stream(cfg.seed, 0, StreamPurpose::Hashes));
            let mut line = format!(
                "{} {} {}",
                hash.field().modulus(),
                hash.independence_order(),
                hash.bins()
            );
            for c in hash.coeffs() {
                line.push_str(&format!(" {c}"));
            }
            match &cli.out {
                Some(path) => fs::write(path, format!("{line}\n"))?,
                None => println!("{line}"),
            }
        }
        Command::GenCodebook => {
            let books = write_codebook_files(&cfg, &cfg.out_dir)?;
            // Also echo the first codebook header for quick inspection.
            let mut header = Vec::new();
            write_codebook(&books[0], &mut header)?;
            let first_line = header.split(|&b| b == b'\n').next().unwrap_or_default();
            eprintln!(
                "wrote {} codebooks to {} (header: {})",
                books.len(),
                cfg.out_dir.display(),
                String::from_utf8_lossy(first_line)
            );
        }
        Command::Simulate => {
            simulate_to_files(&cfg, &cfg.out_dir)?;
            eprintln!(
                "simulated {} trials at {} dB into {}",
                cfg.trials,
                cfg.snr_points_db[0],
                cfg.out_dir.display()
            );
        }
        Command::Identify => {
            let identified = identify_from_files(&cfg, &cfg.out_dir)?;
            eprintln!(
                "identified {identified} links; results in {}",
                cfg.out_dir.join("results.csv").display()
            );
        }
        Command::SweepAccuracy => {
            let rows = run_accuracy_sweep(&cfg, threads)?;
            fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join("accuracy.csv");
            let mut w = fs::File::create(&path)?;
            write_metrics_csv(&rows, &mut w)?;
            w.flush()?;
            for r in &rows {
                eprintln!(
                    "{:<12} snr {:>6} dB: link {:.4} ({} slots, {:.1}s)",
                    r.method.name(),
                    r.snr_db,
                    r.link_accuracy,
                    r.slots_used,
                    r.wall_time_s
                );
            }
            eprintln!("wrote {}", path.display());
        }
        Command::SweepOverhead => {
            let report = run_overhead_sweep(&cfg, threads)?;
            fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join("overhead.csv");
            let mut w = fs::File::create(&path)?;
            write_metrics_csv(&report.rows, &mut w)?;
            w.flush()?;
            for r in &report.rows {
                eprintln!(
                    "{:<12} N {:>4}: {} slots (L = {}, accuracy {:.4}, {:.1}s)",
                    r.method.name(),
                    r.directions,
                    r.slots_used,
                    r.rounds,
                    r.link_accuracy,
                    r.wall_time_s
                );
            }
            eprintln!("wrote {}", path.display());
            if !report.unreachable.is_empty() {
                return Err(Error::TargetUnreachable {
                    directions: report.unreachable[0],
                    target: cfg.accuracy_target,
                    best: f64::NAN,
                    max_rounds: hmb_core::harness::MAX_SEARCH_ROUNDS,
                });
            }
        }
        Command::CheckTheorem2 => {
            let report = trend_check(&cfg, 0.0, threads)?;
            fs::create_dir_all(&cfg.out_dir)?;
            let path = cfg.out_dir.join("trend.csv");
            let mut w = fs::File::create(&path)?;
            write_trend_csv(&report, &mut w)?;
            w.flush()?;
            for r in &report.rows {
                eprintln!(
                    "L = {:>2}: error rate {} ({}/{} links){}",
                    r.rounds,
                    format_float(r.error_rate),
                    r.link_errors,
                    r.links_total,
                    if r.resolvable { "" } else { "  [below resolution floor]" }
                );
            }
            match report.hits_target_at {
                Some(rounds) => eprintln!(
                    "error rate reaches 1/{} at L = {rounds}",
                    cfg.target_error
                ),
                None => eprintln!("error rate never reaches 1/{}", cfg.target_error),
            }
            if report.skipped {
                eprintln!("warning: no resolvable pair at {} trials; trend skipped", cfg.trials);
            } else {
                eprintln!(
                    "monotone non-increase: {}; error(2L) <= 0.75 error(L): {}",
                    verdict(report.monotone),
                    verdict(report.halving_ok)
                );
                if !report.monotone || !report.halving_ok {
                    return Err(Error::InvalidConfig(
                        "round-count trend check failed".into(),
                    ));
                }
            }
            eprintln!("wrote {}", path.display());
        }
        Command::Selftest => {
            let report = selftest(threads)?;
            for item in &report.items {
                println!(
                    "{} {}: {}",
                    if item.passed { "ok  " } else { "FAIL" },
                    item.name,
                    item.detail
                );
            }
            if !report.all_passed() {
                return Err(Error::InvalidConfig("selftest failed".into()));
            }
        }
    }
    Ok(())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
