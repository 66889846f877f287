//! Exhaustive and hierarchical training baselines with exact slot accounting.
//!
//! Both baselines train the RISs alternately: while one RIS sweeps its
//! codewords, every other RIS applies a uniformly random per-element phase
//! configuration held fixed for the duration of that sweep, modeling
//! uncontrolled reflection. All users measure the shared slots
//! simultaneously and keep their own argmax, so the slot counts are
//! `I * N` (exhaustive) and `I * 2 * log2(N)` (hierarchical) regardless of
//! the user count.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::Rng;

use crate::array::{ChannelSet, ScenarioConfig, SteeringVector};
use crate::codebook::{HierarchicalCodebook, SingleBeamCodebook};
use crate::error::{Error, Result};
use crate::num::{inner_product_conj, Cx, Scalar};
use crate::protocol::link_steering;

/// Training method identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Hmb,
    Exhaustive,
    Hierarchical,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Hmb => "hmb",
            Method::Exhaustive => "exhaustive",
            Method::Hierarchical => "hierarchical",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hmb" => Ok(Method::Hmb),
            "exhaustive" => Ok(Method::Exhaustive),
            "hierarchical" => Ok(Method::Hierarchical),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Closed-form training-slot counts.
///
/// HMB scans all RISs and users simultaneously (`L * B` slots); the
/// baselines take turns per RIS.
pub fn overhead_model(
    method: Method,
    directions: usize,
    ris_count: usize,
    beams: usize,
    rounds: usize,
) -> Result<usize> {
    match method {
        Method::Hmb => Ok(rounds * beams),
        Method::Exhaustive => Ok(ris_count * directions),
        Method::Hierarchical => {
            if !directions.is_power_of_two() || directions < 2 {
                return Err(Error::NotPowerOfTwo(directions));
            }
            Ok(ris_count * 2 * directions.trailing_zeros() as usize)
        }
    }
}

/// Estimated directions and slot usage for one baseline run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome<T> {
    pub method: Method,
    /// Estimated direction per (RIS, user).
    pub gamma_hat: Vec<Vec<usize>>,
    /// Per user: RIS indices ordered by measured peak power.
    pub ranking_hat: Vec<Vec<usize>>,
    /// Peak measured power per (RIS, user).
    pub peak_power: Vec<Vec<T>>,
    /// Training slots actually simulated.
    pub slots_used: usize,
}

impl<T: Scalar> TrainingOutcome<T> {
    /// Fraction of (RIS, user) links whose direction matches the channels.
    pub fn link_accuracy(&self, channels: &ChannelSet<T>) -> f64 {
        let mut correct = 0;
        let mut total = 0;
        for ris in 0..channels.ris_count() {
            for user in 0..channels.user_count() {
                total += 1;
                if self.gamma_hat[ris][user] == channels.link(ris, user).direction {
                    correct += 1;
                }
            }
        }
        correct as f64 / total as f64
    }

    fn finish(method: Method, peak_power: Vec<Vec<T>>, gamma_hat: Vec<Vec<usize>>, slots_used: usize) -> Self {
        let ris_count = gamma_hat.len();
        let user_count = gamma_hat.first().map_or(0, Vec::len);
        let mut ranking_hat = Vec::with_capacity(user_count);
        for user in 0..user_count {
            let mut order: Vec<usize> = (0..ris_count).collect();
            order.sort_by(|&a, &b| {
                peak_power[b][user]
                    .partial_cmp(&peak_power[a][user])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            ranking_hat.push(order);
        }
        Self {
            method,
            gamma_hat,
            ranking_hat,
            peak_power,
            slots_used,
        }
    }
}

// Identify-style results plus the slot cost of the method.
pub const OUTCOME_CSV_HEADER: &str =
    "trial,user,ris,gamma_true,gamma_hat,resolved,rank_true,rank_hat,slots_used";

pub fn write_outcome_header<W: Write>(w: &mut W) -> io::Result<()> {
    writeln!(w, "{OUTCOME_CSV_HEADER}")
}

pub fn write_outcome_rows<T: Scalar, W: Write>(
    w: &mut W,
    trial: u64,
    outcome: &TrainingOutcome<T>,
    channels: &ChannelSet<T>,
) -> io::Result<()> {
    for user in 0..channels.user_count() {
        let ranking_true = channels.ranking(user);
        for ris in 0..channels.ris_count() {
            let rank_true = ranking_true.iter().position(|&r| r == ris).unwrap();
            let rank_hat = outcome.ranking_hat[user]
                .iter()
                .position(|&r| r == ris)
                .unwrap();
            writeln!(
                w,
                "{trial},{user},{ris},{},{},1,{rank_true},{rank_hat},{}",
                channels.link(ris, user).direction,
                outcome.gamma_hat[ris][user],
                outcome.slots_used
            )?;
        }
    }
    Ok(())
}

fn random_phase_vector<T: Scalar, R: Rng + ?Sized>(elements: usize, rng: &mut R) -> Vec<Cx<T>> {
    let two_pi = T::PI() + T::PI();
    (0..elements)
        .map(|_| Cx::from_polar(T::one(), two_pi * T::unit_uniform(rng)))
        .collect()
}

/// Constant interference per user from the idle RISs during one sweep.
fn idle_interference<T: Scalar, R: Rng + ?Sized>(
    cfg: &ScenarioConfig<T>,
    channels: &ChannelSet<T>,
    steering: &[Vec<SteeringVector<T>>],
    trained_ris: usize,
    rng: &mut R,
) -> Vec<Cx<T>> {
    let mut offsets = vec![Cx::new(T::zero(), T::zero()); cfg.user_count];
    for other in 0..cfg.ris_count {
        if other == trained_ris {
            continue;
        }
        let idle = random_phase_vector(cfg.geometry.elements(), rng);
        for (user, offset) in offsets.iter_mut().enumerate() {
            let inner = inner_product_conj(steering[other][user].entries(), &idle);
            *offset += channels.link(other, user).gain * inner;
        }
    }
    offsets
}

/// Sweep every single-beam codeword per RIS in turn; users keep the argmax.
pub fn exhaustive_train<T: Scalar, R: Rng + ?Sized>(
    cfg: &ScenarioConfig<T>,
    channels: &ChannelSet<T>,
    codebook: &SingleBeamCodebook<T>,
    rng: &mut R,
) -> Result<TrainingOutcome<T>> {
    cfg.validate()?;
    let directions = cfg.grid.directions();
    if codebook.directions() != directions || codebook.elements() != cfg.geometry.elements() {
        return Err(Error::ConfigMismatch(
            "single-beam codebook does not match the scenario".into(),
        ));
    }
    let steering = link_steering(cfg, channels)?;
    let amp = cfg.tx_power.sqrt();
    let noise_scale = (cfg.noise_power / T::from_f64_lossy(2.0)).sqrt();

    let mut gamma_hat = vec![vec![0usize; cfg.user_count]; cfg.ris_count];
    let mut peak_power = vec![vec![T::zero(); cfg.user_count]; cfg.ris_count];
    let mut slots_used = 0;

    for ris in 0..cfg.ris_count {
        let offsets = idle_interference(cfg, channels, &steering, ris, rng);
        let mut best = vec![(T::neg_infinity(), 0usize); cfg.user_count];
        for n in 0..directions {
            slots_used += 1;
            for user in 0..cfg.user_count {
                let inner = inner_product_conj(
                    steering[ris][user].entries(),
                    codebook.row(n).entries(),
                );
                let signal = channels.link(ris, user).gain * inner + offsets[user];
                let noise =
                    Cx::new(T::standard_normal(rng), T::standard_normal(rng)) * noise_scale;
                let power = (signal * amp + noise).norm_sqr();
                if power > best[user].0 {
                    best[user] = (power, n);
                }
            }
        }
        for user in 0..cfg.user_count {
            gamma_hat[ris][user] = best[user].1;
            peak_power[ris][user] = best[user].0;
        }
    }

    Ok(TrainingOutcome::finish(
        Method::Exhaustive,
        peak_power,
        gamma_hat,
        slots_used,
    ))
}

/// Binary descent per RIS: two sibling codewords per layer, keep the
/// stronger branch, no backtracking.
pub fn hierarchical_train<T: Scalar, R: Rng + ?Sized>(
    cfg: &ScenarioConfig<T>,
    channels: &ChannelSet<T>,
    codebook: &HierarchicalCodebook<T>,
    rng: &mut R,
) -> Result<TrainingOutcome<T>> {
    cfg.validate()?;
    let directions = cfg.grid.directions();
    if !directions.is_power_of_two() || directions < 2 {
        return Err(Error::NotPowerOfTwo(directions));
    }
    let depth = directions.trailing_zeros() as usize;
    if codebook.depth() != depth {
        return Err(Error::ConfigMismatch(
            "hierarchical codebook does not match the grid".into(),
        ));
    }
    let steering = link_steering(cfg, channels)?;
    let amp = cfg.tx_power.sqrt();
    let noise_scale = (cfg.noise_power / T::from_f64_lossy(2.0)).sqrt();

    let mut gamma_hat = vec![vec![0usize; cfg.user_count]; cfg.ris_count];
    let mut peak_power = vec![vec![T::zero(); cfg.user_count]; cfg.ris_count];
    let mut slots_used = 0;

    for ris in 0..cfg.ris_count {
        let offsets = idle_interference(cfg, channels, &steering, ris, rng);
        // Every user follows its own path down the shared layer schedule.
        let mut node = vec![0usize; cfg.user_count];
        let mut last_power = vec![T::zero(); cfg.user_count];
        for t in 1..=depth {
            slots_used += 2;
            let layer = codebook.layer(t);
            for user in 0..cfg.user_count {
                let mut branch_power = [T::zero(); 2];
                for (child, power) in branch_power.iter_mut().enumerate() {
                    let beam = &layer[2 * node[user] + child];
                    let inner = inner_product_conj(
                        steering[ris][user].entries(),
                        &beam.codeword,
                    );
                    let signal = channels.link(ris, user).gain * inner + offsets[user];
                    let noise =
                        Cx::new(T::standard_normal(rng), T::standard_normal(rng)) * noise_scale;
                    *power = (signal * amp + noise).norm_sqr();
                }
                let pick = usize::from(branch_power[1] > branch_power[0]);
                node[user] = 2 * node[user] + pick;
                last_power[user] = branch_power[pick];
            }
        }
        for user in 0..cfg.user_count {
            gamma_hat[ris][user] = node[user];
            peak_power[ris][user] = last_power[user];
        }
    }

    Ok(TrainingOutcome::finish(
        Method::Hierarchical,
        peak_power,
        gamma_hat,
        slots_used,
    ))
}
