//! Beam identification: soft-decision demultiplexing and multi-round voting.
//!
//! The power trace is sorted descending; the slots ranked `(i-1)L+1 .. iL`
//! form the i-th strongest tier and are attributed to one RIS by letting
//! every unresolved RIS vote its beams over the tier and keeping the RIS
//! with the strongest winner. Each beam contributes one vote per member
//! direction, so over a full tier of correctly attributed slots the true
//! direction collects exactly `L` votes while every other direction needs a
//! per-round hash collision to keep up.
//!
//! All ties (vote counts, RIS selection, equal powers) break toward the
//! smallest index, which makes identification a pure function of its inputs.

use std::cmp::Ordering;
use std::io::{self, Write};

use crate::array::{ChannelSet, ScenarioConfig};
use crate::codebook::MultiArmBeamSet;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::protocol::PowerTrace;

/// Loop control for the demultiplexer: a known RIS count, or a power
/// threshold when the count is unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule<T> {
    RisCount(usize),
    Threshold(T),
}

/// Default threshold: the noise power.
pub fn stop_threshold_default<T: Scalar>(cfg: &ScenarioConfig<T>) -> T {
    cfg.noise_power
}

/// Vote counts over all directions for one slot tier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTally {
    pub counts: Vec<u32>,
    pub winner: usize,
    pub winner_votes: u32,
}

/// Tally one vote per member direction of each beam; the smallest index
/// wins ties.
pub fn vote(beams: &[&[usize]], directions: usize) -> VoteTally {
    let mut counts = vec![0u32; directions];
    for beam in beams {
        for &d in *beam {
            counts[d] += 1;
        }
    }
    let mut winner = 0;
    let mut winner_votes = 0;
    for (d, &c) in counts.iter().enumerate() {
        if c > winner_votes {
            winner = d;
            winner_votes = c;
        }
    }
    VoteTally {
        counts,
        winner,
        winner_votes,
    }
}

/// Identification output for one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentificationResult {
    /// Estimated direction per RIS; `None` when the stop rule fired first.
    pub gamma_hat: Vec<Option<usize>>,
    /// RIS indices in decreasing estimated reflected strength.
    pub ranking: Vec<usize>,
    /// Demultiplexing iterations executed.
    pub iterations: usize,
}

/// Run the identification phase on one user's trace.
pub fn demultiplex_and_vote<T: Scalar>(
    trace: &PowerTrace<T>,
    beam_sets: &[&MultiArmBeamSet],
    stop: StopRule<T>,
    rounds: usize,
) -> Result<IdentificationResult> {
    let ris_count = beam_sets.len();
    if ris_count == 0 {
        return Err(Error::InconsistentBeamSets("no beam sets".into()));
    }
    let beams = beam_sets[0].beams_per_round();
    let directions = beam_sets[0].directions();
    for (j, set) in beam_sets.iter().enumerate() {
        if set.rounds() != rounds
            || set.beams_per_round() != beams
            || set.directions() != directions
        {
            return Err(Error::InconsistentBeamSets(format!(
                "beam set {j} disagrees on rounds, beams or grid"
            )));
        }
    }
    let total_slots = rounds * beams;
    if trace.len() != total_slots {
        return Err(Error::InconsistentBeamSets(format!(
            "trace has {} slots, schedule {}",
            trace.len(),
            total_slots
        )));
    }
    if let StopRule::RisCount(count) = stop {
        if count > ris_count {
            return Err(Error::InconsistentBeamSets(format!(
                "stop count {count} exceeds {ris_count} beam sets"
            )));
        }
        if count * rounds > total_slots {
            return Err(Error::InsufficientSlots {
                required: count * rounds,
                available: total_slots,
            });
        }
    }

    // Descending power, ties by slot index ascending.
    let powers = trace.powers();
    let mut order: Vec<usize> = (0..total_slots).collect();
    order.sort_by(|&a, &b| {
        powers[b]
            .partial_cmp(&powers[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut gamma_hat = vec![None; ris_count];
    let mut ranking = Vec::new();
    let mut resolved = vec![false; ris_count];
    let mut iterations = 0;

    for i in 1.. {
        match stop {
            StopRule::RisCount(count) => {
                if i > count {
                    break;
                }
            }
            StopRule::Threshold(eps) => {
                if i > ris_count || i * rounds > total_slots {
                    break;
                }
                if powers[order[i * rounds - 1]] <= eps {
                    break;
                }
            }
        }
        let tier = &order[(i - 1) * rounds..i * rounds];
        let mut best: Option<(usize, VoteTally)> = None;
        for (j, set) in beam_sets.iter().enumerate() {
            if resolved[j] {
                continue;
            }
            let beams: Vec<&[usize]> = tier.iter().map(|&q| set.slot_beam(q)).collect();
            let tally = vote(&beams, directions);
            let better = match &best {
                None => true,
                Some((_, current)) => tally.winner_votes > current.winner_votes,
            };
            if better {
                best = Some((j, tally));
            }
        }
        let Some((m_i, tally)) = best else { break };
        resolved[m_i] = true;
        gamma_hat[m_i] = Some(tally.winner);
        ranking.push(m_i);
        iterations = i;
    }

    Ok(IdentificationResult {
        gamma_hat,
        ranking,
        iterations,
    })
}

// ---------------------------------------------------------------------------
// Results CSV: (trial, user, ris, gamma_true, gamma_hat, resolved,
// rank_true, rank_hat). Unresolved entries carry gamma_hat = -1 and
// rank_hat = -1.
// ---------------------------------------------------------------------------

pub const RESULTS_CSV_HEADER: &str =
    "trial,user,ris,gamma_true,gamma_hat,resolved,rank_true,rank_hat";

pub fn write_results_header<W: Write>(w: &mut W) -> io::Result<()> {
    writeln!(w, "{RESULTS_CSV_HEADER}")
}

pub fn write_results_rows<T: Scalar, W: Write>(
    w: &mut W,
    trial: u64,
    user: usize,
    result: &IdentificationResult,
    channels: &ChannelSet<T>,
) -> io::Result<()> {
    let ranking_true = channels.ranking(user);
    for ris in 0..channels.ris_count() {
        let gamma_true = channels.link(ris, user).direction;
        let (gamma_hat, resolved) = match result.gamma_hat[ris] {
            Some(g) => (g as i64, 1),
            None => (-1, 0),
        };
        let rank_true = ranking_true.iter().position(|&r| r == ris).unwrap();
        let rank_hat = result
            .ranking
            .iter()
            .position(|&r| r == ris)
            .map_or(-1, |p| p as i64);
        writeln!(
            w,
            "{trial},{user},{ris},{gamma_true},{gamma_hat},{resolved},{rank_true},{rank_hat}"
        )?;
    }
    Ok(())
}
