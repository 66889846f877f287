//! File pipeline backing the `gen-codebook`, `simulate` and `identify`
//! subcommands.
//!
//! `simulate` fixes one codebook draw per RIS (so the emitted codebook
//! files describe every trial), then redraws channels and noise per trial:
//!   out_dir/codebook_ris<i>.txt   documented plain-text codebooks
//!   out_dir/trace.csv             per (trial, user, slot) received powers
//!   out_dir/truth.csv             ground-truth directions and rankings
//! `identify` reads those three back and writes out_dir/results.csv.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::array::draw_channels;
use crate::codebook::{read_codebook, write_codebook, HmbCodebook, MultiArmBeamSet, SingleBeamCodebook};
use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::identify::{demultiplex_and_vote, write_results_header, write_results_rows, StopRule};
use crate::protocol::{
    read_trace_csv, run_scanning, write_trace_header, write_trace_rows, SlotSchedule,
};
use crate::rng::{trial_stream, StreamPurpose};

pub const TRUTH_CSV_HEADER: &str = "trial,user,ris,gamma_true,rank_true";

fn codebook_path(out_dir: &Path, ris: usize) -> std::path::PathBuf {
    out_dir.join(format!("codebook_ris{ris}.txt"))
}

/// Draw one codebook per RIS from the seed and write the codebook files.
pub fn write_codebook_files(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<HmbCodebook<f64>>> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let grid = cfg.grid()?;
    let geometry = cfg.geometry()?;
    let single = SingleBeamCodebook::build(&geometry, &grid)?;
    let family = cfg.family()?;
    let mut rng = trial_stream(cfg.seed, 0, StreamPurpose::Hashes);
    let mut books = Vec::with_capacity(cfg.ris_count);
    for ris in 0..cfg.ris_count {
        let set = MultiArmBeamSet::build(&grid, cfg.beams, cfg.rounds, &family, &mut rng)?;
        let book = HmbCodebook::build(&single, set)?;
        let mut w = BufWriter::new(fs::File::create(codebook_path(out_dir, ris))?);
        write_codebook(&book, &mut w)?;
        w.flush()?;
        books.push(book);
    }
    Ok(books)
}

/// Run `cfg.trials` scanning trials at the first configured SNR with the
/// fixed codebook draw, emitting trace, truth and codebook files.
pub fn simulate_to_files(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let books = write_codebook_files(cfg, out_dir)?;
    let scenario = cfg.scenario(cfg.snr_points_db[0])?;
    let schedule = SlotSchedule::new(cfg.rounds, cfg.beams)?;

    let mut trace_w = BufWriter::new(fs::File::create(out_dir.join("trace.csv"))?);
    write_trace_header(&mut trace_w)?;
    let mut truth_w = BufWriter::new(fs::File::create(out_dir.join("truth.csv"))?);
    writeln!(truth_w, "{TRUTH_CSV_HEADER}")?;

    for trial in 0..cfg.trials as u64 {
        let channels = draw_channels(
            &scenario,
            &mut trial_stream(cfg.seed, trial, StreamPurpose::Channels),
        );
        let scan = run_scanning(
            &scenario,
            &channels,
            &books,
            &mut trial_stream(cfg.seed, trial, StreamPurpose::Noise),
        )?;
        for trace in &scan.traces {
            write_trace_rows(&mut trace_w, trial, trace, &schedule)?;
        }
        for user in 0..cfg.user_count {
            for ris in 0..cfg.ris_count {
                let rank = channels
                    .ranking(user)
                    .iter()
                    .position(|&r| r == ris)
                    .unwrap();
                writeln!(
                    truth_w,
                    "{trial},{user},{ris},{},{rank}",
                    channels.link(ris, user).direction
                )?;
            }
        }
    }
    trace_w.flush()?;
    truth_w.flush()?;
    Ok(())
}

struct TruthRow {
    trial: u64,
    user: usize,
    ris: usize,
    gamma: usize,
    rank: usize,
}

fn read_truth_csv(path: &Path) -> Result<Vec<TruthRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRUTH_CSV_HEADER => {}
        _ => {
            return Err(Error::InvalidConfig(
                "truth csv missing expected header".into(),
            ))
        }
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::InvalidConfig(format!("bad truth row '{line}'")));
        }
        let parse = |s: &str| -> Result<u64> {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad integer '{s}'")))
        };
        rows.push(TruthRow {
            trial: parse(f[0])?,
            user: parse(f[1])? as usize,
            ris: parse(f[2])? as usize,
            gamma: parse(f[3])? as usize,
            rank: parse(f[4])? as usize,
        });
    }
    Ok(rows)
}

/// Identify every (trial, user) trace in `out_dir` against the codebook
/// files and write `results.csv`. Returns the number of identified links.
pub fn identify_from_files(cfg: &ExperimentConfig, out_dir: &Path) -> Result<usize> {
    cfg.validate()?;
    let mut books = Vec::with_capacity(cfg.ris_count);
    for ris in 0..cfg.ris_count {
        let file = fs::File::open(codebook_path(out_dir, ris))?;
        books.push(read_codebook(&mut BufReader::new(file))?);
    }
    let sets: Vec<&MultiArmBeamSet> = books.iter().map(|b| b.beam_set()).collect();
    let rounds = sets[0].rounds();

    let trace_file = fs::File::open(out_dir.join("trace.csv"))?;
    let traces = read_trace_csv(&mut BufReader::new(trace_file))?;
    let truth = read_truth_csv(&out_dir.join("truth.csv"))?;

    // Reassemble per-(trial, user) channel facts from the truth rows.
    let mut links: Vec<Vec<Vec<crate::array::CascadedLink<f64>>>> = Vec::new();
    let mut max_trial = 0;
    for row in &truth {
        max_trial = max_trial.max(row.trial as usize);
    }
    let user_count = cfg.user_count;
    let ris_count = cfg.ris_count;
    links.resize_with(max_trial + 1, || {
        vec![
            vec![
                crate::array::CascadedLink {
                    gain: crate::num::Cx::new(0.0, 0.0),
                    direction: 0,
                };
                user_count
            ];
            ris_count
        ]
    });
    for row in &truth {
        if row.ris >= ris_count || row.user >= user_count {
            return Err(Error::InvalidConfig(
                "truth csv does not match the config dimensions".into(),
            ));
        }
        // Rebuild strictly ordered magnitudes from the recorded ranks.
        let magnitude = 1.0 / (1.0 + row.rank as f64);
        links[row.trial as usize][row.ris][row.user] = crate::array::CascadedLink {
            gain: crate::num::Cx::new(magnitude, 0.0),
            direction: row.gamma,
        };
    }

    let mut out = BufWriter::new(fs::File::create(out_dir.join("results.csv"))?);
    write_results_header(&mut out)?;
    let mut identified = 0usize;
    for (trial, trace) in &traces {
        let channels = crate::array::ChannelSet::from_links(
            links
                .get(*trial as usize)
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("trace trial {trial} missing from truth csv"))
                })?
                .clone(),
        )?;
        let result = demultiplex_and_vote(
            trace,
            &sets,
            StopRule::RisCount(ris_count),
            rounds,
        )?;
        identified += result.ranking.len();
        write_results_rows(&mut out, *trial, trace.user(), &result, &channels)?;
    }
    out.flush()?;
    Ok(identified)
}
