//! Monte Carlo experiment driver: accuracy and overhead sweeps, the
//! round-count trend check, self tests and the file pipeline.
//!
//! Every trial is a pure function of `(seed, trial index, purpose)` random
//! streams, and all aggregation is over integer counts in trial order, so
//! sweep outputs are byte-identical across reruns and worker counts.

mod config;
mod files;
mod metrics;
mod selftest;

pub use config::{ExperimentConfig, CONFIG_KEYS};
pub use files::{identify_from_files, simulate_to_files, write_codebook_files};
pub use metrics::{format_float, write_metrics_csv, MetricsRow, METRICS_CSV_HEADER};
pub use selftest::{selftest, SelftestItem, SelftestReport};

use std::time::Instant;

use rayon::prelude::*;

use crate::array::{draw_channels, ChannelSet, ScenarioConfig};
use crate::baselines::{
    exhaustive_train, hierarchical_train, overhead_model, Method, TrainingOutcome,
};
use crate::codebook::{HierarchicalCodebook, HmbCodebook, MultiArmBeamSet, SingleBeamCodebook};
use crate::error::{Error, Result};
use crate::hashing::HashFamilySpec;
use crate::identify::{demultiplex_and_vote, IdentificationResult, StopRule};
use crate::protocol::run_scanning;
use crate::rng::{trial_stream, StreamPurpose};

/// Direction counts visited by the overhead sweep.
pub const OVERHEAD_SWEEP_DIRECTIONS: [usize; 4] = [16, 32, 64, 128];

/// Round counts visited by the trend check.
pub const TREND_CHECK_ROUNDS: [usize; 4] = [2, 4, 8, 16];

/// Cap of the round-count search.
pub const MAX_SEARCH_ROUNDS: usize = 64;

/// Integer outcome of one trial; everything downstream is ratios of these.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrialCounts {
    pub links_correct: usize,
    pub links_total: usize,
    pub strongest_correct: usize,
    pub ranking_correct: usize,
    pub users: usize,
    pub slots_used: usize,
}

impl TrialCounts {
    fn absorb(&mut self, other: &TrialCounts) {
        self.links_correct += other.links_correct;
        self.links_total += other.links_total;
        self.strongest_correct += other.strongest_correct;
        self.ranking_correct += other.ranking_correct;
        self.users += other.users;
        self.slots_used = other.slots_used;
    }
}

fn score_identification(
    channels: &ChannelSet<f64>,
    user: usize,
    result: &IdentificationResult,
    counts: &mut TrialCounts,
) {
    let ranking_true = channels.ranking(user);
    for ris in 0..channels.ris_count() {
        counts.links_total += 1;
        if result.gamma_hat[ris] == Some(channels.link(ris, user).direction) {
            counts.links_correct += 1;
        }
    }
    let strongest = ranking_true[0];
    if result.gamma_hat[strongest] == Some(channels.link(strongest, user).direction) {
        counts.strongest_correct += 1;
    }
    if result.ranking == ranking_true {
        counts.ranking_correct += 1;
    }
    counts.users += 1;
}

fn score_training(
    channels: &ChannelSet<f64>,
    outcome: &TrainingOutcome<f64>,
    counts: &mut TrialCounts,
) {
    for ris in 0..channels.ris_count() {
        for user in 0..channels.user_count() {
            counts.links_total += 1;
            if outcome.gamma_hat[ris][user] == channels.link(ris, user).direction {
                counts.links_correct += 1;
            }
        }
    }
    for user in 0..channels.user_count() {
        let strongest = channels.ranking(user)[0];
        if outcome.gamma_hat[strongest][user] == channels.link(strongest, user).direction {
            counts.strongest_correct += 1;
        }
        if outcome.ranking_hat[user] == channels.ranking(user) {
            counts.ranking_correct += 1;
        }
        counts.users += 1;
    }
    counts.slots_used = outcome.slots_used;
}

/// Build per-RIS beam sets and codebooks from one hash stream.
pub fn build_hmb_codebooks(
    scenario: &ScenarioConfig<f64>,
    codebook: &SingleBeamCodebook<f64>,
    family: &HashFamilySpec,
    beams: usize,
    rounds: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<HmbCodebook<f64>>> {
    (0..scenario.ris_count)
        .map(|_| {
            let set = MultiArmBeamSet::build(&scenario.grid, beams, rounds, family, rng)?;
            HmbCodebook::build(codebook, set)
        })
        .collect()
}

/// One end-to-end HMB trial: draw channels, scan, identify, score.
pub fn hmb_trial(
    scenario: &ScenarioConfig<f64>,
    codebook: &SingleBeamCodebook<f64>,
    family: &HashFamilySpec,
    beams: usize,
    rounds: usize,
    seed: u64,
    trial: u64,
) -> Result<TrialCounts> {
    let channels = draw_channels(
        scenario,
        &mut trial_stream(seed, trial, StreamPurpose::Channels),
    );
    let books = build_hmb_codebooks(
        scenario,
        codebook,
        family,
        beams,
        rounds,
        &mut trial_stream(seed, trial, StreamPurpose::Hashes),
    )?;
    let scan = run_scanning(
        scenario,
        &channels,
        &books,
        &mut trial_stream(seed, trial, StreamPurpose::Noise),
    )?;
    let sets: Vec<&MultiArmBeamSet> = books.iter().map(|b| b.beam_set()).collect();
    let mut counts = TrialCounts::default();
    for user in 0..scenario.user_count {
        let result = demultiplex_and_vote(
            &scan.traces[user],
            &sets,
            StopRule::RisCount(scenario.ris_count),
            rounds,
        )?;
        score_identification(&channels, user, &result, &mut counts);
    }
    counts.slots_used = rounds * beams;
    Ok(counts)
}

/// One baseline trial (exhaustive or hierarchical).
pub fn baseline_trial(
    method: Method,
    scenario: &ScenarioConfig<f64>,
    codebook: &SingleBeamCodebook<f64>,
    hierarchical: Option<&HierarchicalCodebook<f64>>,
    seed: u64,
    trial: u64,
) -> Result<TrialCounts> {
    let channels = draw_channels(
        scenario,
        &mut trial_stream(seed, trial, StreamPurpose::Channels),
    );
    let mut rng = trial_stream(seed, trial, StreamPurpose::Interference);
    let outcome = match method {
        Method::Exhaustive => exhaustive_train(scenario, &channels, codebook, &mut rng)?,
        Method::Hierarchical => {
            let book = hierarchical.ok_or_else(|| {
                Error::ConfigMismatch("hierarchical trial without a codebook".into())
            })?;
            hierarchical_train(scenario, &channels, book, &mut rng)?
        }
        Method::Hmb => {
            return Err(Error::ConfigMismatch(
                "hmb trials run through hmb_trial".into(),
            ))
        }
    };
    let mut counts = TrialCounts::default();
    score_training(&channels, &outcome, &mut counts);
    Ok(counts)
}

fn run_pool<F>(threads: usize, trials: usize, trial_fn: F) -> Result<TrialCounts>
where
    F: Fn(u64) -> Result<TrialCounts> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let per_trial: Vec<TrialCounts> = pool.install(|| {
        (0..trials as u64)
            .into_par_iter()
            .map(&trial_fn)
            .collect::<Result<Vec<_>>>()
    })?;
    let mut total = TrialCounts::default();
    for c in &per_trial {
        total.absorb(c);
    }
    Ok(total)
}

fn counts_to_row(
    method: Method,
    cfg_beams: usize,
    rounds: usize,
    snr_db: f64,
    scenario: &ScenarioConfig<f64>,
    trials: usize,
    counts: &TrialCounts,
    slots_used: usize,
    wall_time_s: f64,
) -> MetricsRow {
    MetricsRow {
        method,
        beams: cfg_beams,
        rounds,
        snr_db,
        directions: scenario.grid.directions(),
        ris_count: scenario.ris_count,
        user_count: scenario.user_count,
        trials,
        link_accuracy: counts.links_correct as f64 / counts.links_total.max(1) as f64,
        strongest_link_accuracy: counts.strongest_correct as f64 / counts.users.max(1) as f64,
        ranking_accuracy: counts.ranking_correct as f64 / counts.users.max(1) as f64,
        slots_used,
        wall_time_s,
    }
}

/// Accuracy versus SNR: `trials` end-to-end trials per (method, SNR) cell.
pub fn run_accuracy_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let family = cfg.family()?;
    let grid = cfg.grid()?;
    let geometry = cfg.geometry()?;
    let codebook = SingleBeamCodebook::build(&geometry, &grid)?;
    let hierarchical = if cfg.methods.contains(&Method::Hierarchical) {
        Some(HierarchicalCodebook::build(&geometry, &grid)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    for &snr_db in &cfg.snr_points_db {
        let scenario = cfg.scenario(snr_db)?;
        for &method in &cfg.methods {
            let started = Instant::now();
            let counts = match method {
                Method::Hmb => run_pool(threads, cfg.trials, |trial| {
                    hmb_trial(
                        &scenario,
                        &codebook,
                        &family,
                        cfg.beams,
                        cfg.rounds,
                        cfg.seed,
                        trial,
                    )
                })?,
                _ => run_pool(threads, cfg.trials, |trial| {
                    baseline_trial(
                        method,
                        &scenario,
                        &codebook,
                        hierarchical.as_ref(),
                        cfg.seed,
                        trial,
                    )
                })?,
            };
            let slots = match method {
                Method::Hmb => cfg.rounds * cfg.beams,
                _ => counts.slots_used,
            };
            rows.push(counts_to_row(
                method,
                cfg.beams,
                cfg.rounds,
                snr_db,
                &scenario,
                cfg.trials,
                &counts,
                slots,
                started.elapsed().as_secs_f64(),
            ));
        }
    }
    Ok(rows)
}

/// Scenario used by the overhead sweep at one direction count: a
/// critically sampled azimuth grid with `n_h = N`, `n_v = N / B`, which
/// keeps every splice segment a full array row for any `N`.
pub fn overhead_scenario(cfg: &ExperimentConfig, directions: usize) -> Result<ScenarioConfig<f64>> {
    if !directions.is_multiple_of(cfg.beams) {
        return Err(Error::IndivisibleGrid {
            directions,
            beams: cfg.beams,
        });
    }
    let grid = crate::array::AngleGrid::new(directions, 1)?;
    let geometry = crate::array::UpaGeometry::new(
        directions,
        (directions / cfg.beams).max(1),
        cfg.d_h,
        cfg.d_v,
    )?;
    let snr_db = cfg.snr_points_db[0];
    let scenario = ScenarioConfig::with_snr(
        cfg.ris_count,
        cfg.user_count,
        geometry,
        grid,
        cfg.gain_gap_db,
        snr_db,
    );
    scenario.validate()?;
    Ok(scenario)
}

/// Measure HMB link accuracy at one round count.
pub fn hmb_accuracy_at(
    cfg: &ExperimentConfig,
    scenario: &ScenarioConfig<f64>,
    codebook: &SingleBeamCodebook<f64>,
    family: &HashFamilySpec,
    rounds: usize,
    threads: usize,
) -> Result<f64> {
    let counts = run_pool(threads, cfg.trials, |trial| {
        hmb_trial(
            scenario, codebook, family, cfg.beams, rounds, cfg.seed, trial,
        )
    })?;
    Ok(counts.links_correct as f64 / counts.links_total.max(1) as f64)
}

/// Smallest round count meeting the accuracy target: doubling ladder to
/// bracket, then binary refinement. Returns the rounds and the accuracy
/// measured there.
pub fn find_min_rounds(
    cfg: &ExperimentConfig,
    scenario: &ScenarioConfig<f64>,
    codebook: &SingleBeamCodebook<f64>,
    family: &HashFamilySpec,
    threads: usize,
) -> Result<(usize, f64)> {
    let target = cfg.accuracy_target;
    let mut lo = 0usize; // known failing
    let mut hi = None; // known passing
    let mut best = 0.0f64;
    let mut rounds = 1usize;
    let mut acc_at: Vec<(usize, f64)> = Vec::new();
    while rounds <= MAX_SEARCH_ROUNDS {
        let acc = hmb_accuracy_at(cfg, scenario, codebook, family, rounds, threads)?;
        acc_at.push((rounds, acc));
        best = best.max(acc);
        if acc >= target {
            hi = Some((rounds, acc));
            break;
        }
        lo = rounds;
        rounds *= 2;
    }
    let Some((mut hi_rounds, mut hi_acc)) = hi else {
        return Err(Error::TargetUnreachable {
            directions: scenario.grid.directions(),
            target,
            best,
            max_rounds: MAX_SEARCH_ROUNDS,
        });
    };
    while hi_rounds - lo > 1 {
        let mid = (lo + hi_rounds) / 2;
        let acc = match acc_at.iter().find(|&&(r, _)| r == mid) {
            Some(&(_, a)) => a,
            None => hmb_accuracy_at(cfg, scenario, codebook, family, mid, threads)?,
        };
        if acc >= target {
            hi_rounds = mid;
            hi_acc = acc;
        } else {
            lo = mid;
        }
    }
    Ok((hi_rounds, hi_acc))
}

/// Overhead sweep output: rows per (method, N) plus the direction counts
/// where the accuracy target was unreachable.
#[derive(Debug, Clone)]
pub struct OverheadReport {
    pub rows: Vec<MetricsRow>,
    pub unreachable: Vec<usize>,
}

/// Training overhead versus direction count at the first configured SNR.
///
/// For HMB the smallest round count meeting `accuracy_target` is searched
/// and `slots = L * B` recorded; the baselines use their closed-form
/// counts, with accuracy measured for reference.
pub fn run_overhead_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<OverheadReport> {
    cfg.validate()?;
    let snr_db = cfg.snr_points_db[0];
    let mut rows = Vec::new();
    let mut unreachable = Vec::new();

    for &directions in &OVERHEAD_SWEEP_DIRECTIONS {
        let scenario = overhead_scenario(cfg, directions)?;
        let codebook = SingleBeamCodebook::build(&scenario.geometry, &scenario.grid)?;
        let family = HashFamilySpec::for_keys(directions, cfg.beams, cfg.k_wise)?;
        let hierarchical = if cfg.methods.contains(&Method::Hierarchical) {
            Some(HierarchicalCodebook::build(&scenario.geometry, &scenario.grid)?)
        } else {
            None
        };
        for &method in &cfg.methods {
            let started = Instant::now();
            match method {
                Method::Hmb => {
                    let search = find_min_rounds(cfg, &scenario, &codebook, &family, threads);
                    let (rounds, capped) = match search {
                        Ok((rounds, _)) => (rounds, false),
                        Err(Error::TargetUnreachable { .. }) => (MAX_SEARCH_ROUNDS, true),
                        Err(e) => return Err(e),
                    };
                    if capped {
                        unreachable.push(directions);
                    }
                    let counts = run_pool(threads, cfg.trials, |trial| {
                        hmb_trial(
                            &scenario, &codebook, &family, cfg.beams, rounds, cfg.seed, trial,
                        )
                    })?;
                    rows.push(counts_to_row(
                        method,
                        cfg.beams,
                        rounds,
                        snr_db,
                        &scenario,
                        cfg.trials,
                        &counts,
                        rounds * cfg.beams,
                        started.elapsed().as_secs_f64(),
                    ));
                }
                _ => {
                    let counts = run_pool(threads, cfg.trials, |trial| {
                        baseline_trial(
                            method,
                            &scenario,
                            &codebook,
                            hierarchical.as_ref(),
                            cfg.seed,
                            trial,
                        )
                    })?;
                    let slots =
                        overhead_model(method, directions, cfg.ris_count, cfg.beams, cfg.rounds)?;
                    debug_assert_eq!(slots, counts.slots_used);
                    rows.push(counts_to_row(
                        method,
                        cfg.beams,
                        cfg.rounds,
                        snr_db,
                        &scenario,
                        cfg.trials,
                        &counts,
                        slots,
                        started.elapsed().as_secs_f64(),
                    ));
                }
            }
        }
    }
    Ok(OverheadReport { rows, unreachable })
}

/// Least-squares line `y = a + b x`; returns `(a, b, r_squared)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    for &(x, y) in points {
        cov += (x - mean_x) * (y - mean_y);
        var_x += (x - mean_x) * (x - mean_x);
    }
    let slope = if var_x > 0.0 { cov / var_x } else { 0.0 };
    let intercept = mean_y - slope * mean_x;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x, y) in points {
        let fit = intercept + slope * x;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    (intercept, slope, r_squared)
}

/// One row of the round-count trend check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendRow {
    pub rounds: usize,
    pub trials: usize,
    pub link_errors: usize,
    pub links_total: usize,
    pub error_rate: f64,
    /// Above the `50 / trials` resolution floor.
    pub resolvable: bool,
}

/// Trend-check report: misidentification rate versus round count.
#[derive(Debug, Clone)]
pub struct TrendReport {
    pub rows: Vec<TrendRow>,
    /// Non-increase holds (rows below the floor compare as equal).
    pub monotone: bool,
    /// `error(2L) <= 0.75 error(L)` wherever `error(L)` is resolvable.
    pub halving_ok: bool,
    /// True when no pair was resolvable.
    pub skipped: bool,
    /// First round count whose error rate drops below `1 / target_error`.
    pub hits_target_at: Option<usize>,
}

/// Sweep the round count and report the misidentification trend at the
/// given SNR (the error bound direction: more rounds, fewer errors).
pub fn trend_check(cfg: &ExperimentConfig, snr_db: f64, threads: usize) -> Result<TrendReport> {
    cfg.validate()?;
    let scenario = cfg.scenario(snr_db)?;
    let codebook = SingleBeamCodebook::build(&scenario.geometry, &scenario.grid)?;
    let family = cfg.family()?;
    let floor = 50.0 / cfg.trials as f64;

    let mut rows = Vec::new();
    for &rounds in &TREND_CHECK_ROUNDS {
        let counts = run_pool(threads, cfg.trials, |trial| {
            hmb_trial(
                &scenario, &codebook, &family, cfg.beams, rounds, cfg.seed, trial,
            )
        })?;
        let link_errors = counts.links_total - counts.links_correct;
        let error_rate = link_errors as f64 / counts.links_total.max(1) as f64;
        rows.push(TrendRow {
            rounds,
            trials: cfg.trials,
            link_errors,
            links_total: counts.links_total,
            error_rate,
            resolvable: error_rate >= floor,
        });
    }

    let mut monotone = true;
    let mut halving_ok = true;
    let mut any_resolvable_pair = false;
    for pair in rows.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if !(b.error_rate <= a.error_rate || (!a.resolvable && !b.resolvable)) {
            monotone = false;
        }
        if a.resolvable {
            any_resolvable_pair = true;
            if b.error_rate > 0.75 * a.error_rate {
                halving_ok = false;
            }
        }
    }
    let hits_target_at = rows
        .iter()
        .find(|r| r.error_rate <= 1.0 / cfg.target_error)
        .map(|r| r.rounds);

    Ok(TrendReport {
        rows,
        monotone,
        halving_ok,
        skipped: !any_resolvable_pair,
        hits_target_at,
    })
}

/// Render trend rows as CSV.
pub fn write_trend_csv<W: std::io::Write>(report: &TrendReport, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "L,trials,link_errors,links_total,error_rate,resolvable")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.rounds,
            r.trials,
            r.link_errors,
            r.links_total,
            format_float(r.error_rate),
            u8::from(r.resolvable)
        )?;
    }
    Ok(())
}
