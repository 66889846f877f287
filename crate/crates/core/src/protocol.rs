//! Scanning-phase simulation.
//!
//! In slot `q = l*B + b` every RIS applies its round-`l`, beam-`b` codeword;
//! all users transmit once per slot and the BS records, per user, the power
//! of the superimposed reflections plus noise. The BS-side combining and the
//! RIS-to-BS steering are assumed pre-compensated, so each link contributes
//! `sqrt(P) * g * <a_user, s>` to the received sample.

use std::io::{self, BufRead, Write};

use rand::Rng;

use crate::array::{steering_vector, ChannelSet, ScenarioConfig, SteeringVector};
use crate::codebook::{HmbCodebook, MultiArmBeamSet};
use crate::error::{Error, Result};
use crate::num::{inner_product_conj, Cx, Scalar};

/// Bijection between slots and (round, beam) pairs: `q = round * B + beam`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotSchedule {
    rounds: usize,
    beams: usize,
}

impl SlotSchedule {
    pub fn new(rounds: usize, beams: usize) -> Result<Self> {
        if rounds == 0 || beams == 0 {
            return Err(Error::InvalidConfig(
                "schedule needs positive rounds and beams".into(),
            ));
        }
        Ok(Self { rounds, beams })
    }

    pub fn total_slots(&self) -> usize {
        self.rounds * self.beams
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn slot(&self, round: usize, beam: usize) -> usize {
        round * self.beams + beam
    }

    pub fn round_beam(&self, slot: usize) -> (usize, usize) {
        (slot / self.beams, slot % self.beams)
    }
}

/// Received power per training slot for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace<T> {
    user: usize,
    powers: Vec<T>,
}

impl<T: Scalar> PowerTrace<T> {
    pub fn new(user: usize, powers: Vec<T>) -> Result<Self> {
        if powers.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(Error::InvalidConfig(
                "trace powers must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { user, powers })
    }

    pub fn user(&self) -> usize {
        self.user
    }

    pub fn powers(&self) -> &[T] {
        &self.powers
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }
}

/// Ground-truth alignment indicators `e^i_q` per (RIS, user, slot).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentRecord {
    ris_count: usize,
    user_count: usize,
    slots: usize,
    indicators: Vec<bool>, // [ris][user][slot]
}

impl AlignmentRecord {
    pub fn indicator(&self, ris: usize, user: usize, slot: usize) -> bool {
        self.indicators[(ris * self.user_count + user) * self.slots + slot]
    }

    /// Number of slots in which the RIS sees the user; one per round.
    pub fn aligned_slot_count(&self, ris: usize, user: usize) -> usize {
        (0..self.slots)
            .filter(|&q| self.indicator(ris, user, q))
            .count()
    }

    pub fn slots(&self) -> usize {
        self.slots
    }
}

/// Traces for every user plus the ground-truth alignment record.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutput<T> {
    pub traces: Vec<PowerTrace<T>>,
    pub alignment: AlignmentRecord,
}

/// `e^i_q`: 1 iff the slot's multi-arm beam contains the direction.
pub fn alignment_indicator(beams: &MultiArmBeamSet, direction: usize, slot: usize) -> bool {
    beams.contains(slot, direction)
}

/// Simulate the scanning phase for every user.
///
/// Per user and slot the received sample is the superposition of all RIS
/// reflections plus an independent circular Gaussian noise draw; users are
/// separated ideally so their traces are independent.
pub fn run_scanning<T: Scalar, R: Rng + ?Sized>(
    cfg: &ScenarioConfig<T>,
    channels: &ChannelSet<T>,
    codebooks: &[HmbCodebook<T>],
    rng: &mut R,
) -> Result<ScanOutput<T>> {
    cfg.validate()?;
    let ris_count = cfg.ris_count;
    let user_count = cfg.user_count;
    if codebooks.len() != ris_count {
        return Err(Error::ConfigMismatch(format!(
            "{} codebooks for {} RISs",
            codebooks.len(),
            ris_count
        )));
    }
    if channels.ris_count() != ris_count || channels.user_count() != user_count {
        return Err(Error::ConfigMismatch(
            "channel set does not match the scenario".into(),
        ));
    }
    let rounds = codebooks[0].rounds();
    let beams = codebooks[0].beams_per_round();
    for book in codebooks {
        if book.rounds() != rounds || book.beams_per_round() != beams {
            return Err(Error::ConfigMismatch(
                "codebooks disagree on rounds or beams per round".into(),
            ));
        }
        if book.elements() != cfg.geometry.elements() {
            return Err(Error::ConfigMismatch(
                "codeword length does not match the array".into(),
            ));
        }
        if book.beam_set().directions() != cfg.grid.directions() {
            return Err(Error::ConfigMismatch(
                "beam set does not cover the scenario grid".into(),
            ));
        }
    }
    let schedule = SlotSchedule::new(rounds, beams)?;
    let total_slots = schedule.total_slots();

    let steering = link_steering(cfg, channels)?;
    let amp = cfg.tx_power.sqrt();
    let noise_scale = (cfg.noise_power / T::from_f64_lossy(2.0)).sqrt();

    let mut traces = Vec::with_capacity(user_count);
    for user in 0..user_count {
        let mut powers = Vec::with_capacity(total_slots);
        for slot in 0..total_slots {
            let mut sample = Cx::new(T::zero(), T::zero());
            for ris in 0..ris_count {
                let inner = inner_product_conj(
                    steering[ris][user].entries(),
                    codebooks[ris].slot_codeword(slot),
                );
                sample += channels.link(ris, user).gain * inner;
            }
            sample *= amp;
            let noise = Cx::new(T::standard_normal(rng), T::standard_normal(rng)) * noise_scale;
            powers.push((sample + noise).norm_sqr());
        }
        traces.push(PowerTrace::new(user, powers)?);
    }

    let mut indicators = vec![false; ris_count * user_count * total_slots];
    for ris in 0..ris_count {
        for user in 0..user_count {
            let direction = channels.link(ris, user).direction;
            for slot in 0..total_slots {
                indicators[(ris * user_count + user) * total_slots + slot] =
                    alignment_indicator(codebooks[ris].beam_set(), direction, slot);
            }
        }
    }

    Ok(ScanOutput {
        traces,
        alignment: AlignmentRecord {
            ris_count,
            user_count,
            slots: total_slots,
            indicators,
        },
    })
}

/// Steering vectors toward every (RIS, user) link direction.
pub fn link_steering<T: Scalar>(
    cfg: &ScenarioConfig<T>,
    channels: &ChannelSet<T>,
) -> Result<Vec<Vec<SteeringVector<T>>>> {
    (0..cfg.ris_count)
        .map(|ris| {
            (0..cfg.user_count)
                .map(|user| {
                    let f = cfg.grid.frequency(channels.link(ris, user).direction)?;
                    Ok(steering_vector(&cfg.geometry, f))
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Trace CSV: columns (trial, user, slot, round, beam, power), linear power
// at full double precision.
// ---------------------------------------------------------------------------

pub const TRACE_CSV_HEADER: &str = "trial,user,slot,round,beam,power";

pub fn write_trace_header<W: Write>(w: &mut W) -> io::Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")
}

pub fn write_trace_rows<T: Scalar, W: Write>(
    w: &mut W,
    trial: u64,
    trace: &PowerTrace<T>,
    schedule: &SlotSchedule,
) -> io::Result<()> {
    for (slot, p) in trace.powers().iter().enumerate() {
        let (round, beam) = schedule.round_beam(slot);
        writeln!(
            w,
            "{trial},{},{slot},{round},{beam},{:.16e}",
            trace.user(),
            p.to_f64_lossy()
        )?;
    }
    Ok(())
}

/// Parse a trace CSV back into per-(trial, user) traces, sorted by trial
/// then user.
pub fn read_trace_csv<R: BufRead>(r: &mut R) -> Result<Vec<(u64, PowerTrace<f64>)>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != TRACE_CSV_HEADER {
        return Err(Error::InvalidConfig(
            "trace csv missing expected header".into(),
        ));
    }
    let mut rows: Vec<(u64, usize, usize, f64)> = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::InvalidConfig(format!("bad trace row '{line}'")));
        }
        let parse = |s: &str| -> Result<u64> {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad integer '{s}'")))
        };
        let trial = parse(fields[0])?;
        let user = parse(fields[1])? as usize;
        let slot = parse(fields[2])? as usize;
        let power: f64 = fields[5]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad power '{}'", fields[5])))?;
        rows.push((trial, user, slot, power));
    }
    rows.sort_by_key(|&(trial, user, slot, _)| (trial, user, slot));
    let mut traces = Vec::new();
    let mut current: Option<(u64, usize, Vec<f64>)> = None;
    for (trial, user, slot, power) in rows {
        match current.as_mut() {
            Some((t, u, powers)) if *t == trial && *u == user => {
                if powers.len() != slot {
                    return Err(Error::InvalidConfig(format!(
                        "non-contiguous slots for trial {trial} user {user}"
                    )));
                }
                powers.push(power);
            }
            _ => {
                if let Some((t, u, powers)) = current.take() {
                    traces.push((t, PowerTrace::new(u, powers)?));
                }
                if slot != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "trace for trial {trial} user {user} does not start at slot 0"
                    )));
                }
                current = Some((trial, user, vec![power]));
            }
        }
    }
    if let Some((t, u, powers)) = current {
        traces.push((t, PowerTrace::new(u, powers)?));
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{AngleGrid, CascadedLink, UpaGeometry};
    use crate::codebook::SingleBeamCodebook;
    use crate::hashing::HashFamilySpec;
    use crate::rng::{trial_stream, StreamPurpose};

    fn scenario(
        ris: usize,
        users: usize,
        n: usize,
        n_h: usize,
        n_v: usize,
        snr_db: f64,
    ) -> ScenarioConfig<f64> {
        ScenarioConfig::with_snr(
            ris,
            users,
            UpaGeometry::half_wavelength(n_h, n_v).unwrap(),
            AngleGrid::new(n, 1).unwrap(),
            3.0,
            snr_db,
        )
    }

    fn build_books(
        cfg: &ScenarioConfig<f64>,
        beams: usize,
        rounds: usize,
        seed: u64,
    ) -> Vec<HmbCodebook<f64>> {
        let cb = SingleBeamCodebook::build(&cfg.geometry, &cfg.grid).unwrap();
        let family =
            HashFamilySpec::for_keys(cfg.grid.directions(), beams, 4).unwrap();
        let mut rng = trial_stream(seed, 0, StreamPurpose::Hashes);
        (0..cfg.ris_count)
            .map(|_| {
                let set =
                    MultiArmBeamSet::build(&cfg.grid, beams, rounds, &family, &mut rng).unwrap();
                HmbCodebook::build(&cb, set).unwrap()
            })
            .collect()
    }

    #[test]
    fn schedule_is_a_bijection() {
        let s = SlotSchedule::new(3, 4).unwrap();
        assert_eq!(s.total_slots(), 12);
        for q in 0..12 {
            let (l, b) = s.round_beam(q);
            assert_eq!(s.slot(l, b), q);
        }
        assert_eq!(s.round_beam(5), (1, 1));
    }

    #[test]
    fn alignment_counts_equal_rounds() {
        let cfg = scenario(2, 2, 16, 16, 1, 0.0);
        let books = build_books(&cfg, 4, 3, 5);
        let channels = crate::array::draw_channels(
            &cfg,
            &mut trial_stream(5, 1, StreamPurpose::Channels),
        );
        let out = run_scanning(
            &cfg,
            &channels,
            &books,
            &mut trial_stream(5, 1, StreamPurpose::Noise),
        )
        .unwrap();
        for ris in 0..2 {
            for user in 0..2 {
                assert_eq!(out.alignment.aligned_slot_count(ris, user), 3);
            }
        }
    }

    #[test]
    fn indicator_sums_to_rounds_and_single_beam_always_sees() {
        let cfg = scenario(1, 1, 16, 16, 1, 0.0);
        let books = build_books(&cfg, 4, 5, 9);
        let set = books[0].beam_set();
        let gamma = 11;
        let total: usize = (0..set.total_slots())
            .filter(|&q| alignment_indicator(set, gamma, q))
            .count();
        assert_eq!(total, 5);

        let wide = build_books(&scenario(1, 1, 16, 16, 1, 0.0), 1, 2, 9);
        let set = wide[0].beam_set();
        for q in 0..set.total_slots() {
            assert!(alignment_indicator(set, gamma, q));
        }
    }

    #[test]
    fn zero_gain_channels_leave_pure_noise() {
        let cfg = scenario(1, 1, 16, 16, 1, 0.0);
        let channels = ChannelSet::from_links(vec![vec![CascadedLink {
            gain: crate::num::Cx::new(0.0, 0.0),
            direction: 3,
        }]])
        .unwrap();
        let books = build_books(&cfg, 4, 64, 2);
        let out = run_scanning(
            &cfg,
            &channels,
            &books,
            &mut trial_stream(2, 0, StreamPurpose::Noise),
        )
        .unwrap();
        let trace = &out.traces[0];
        let mean: f64 = trace.powers().iter().sum::<f64>() / trace.len() as f64;
        // Noise power is 1; the mean over 256 slots should sit close.
        assert!((mean - 1.0).abs() < 0.25, "mean noise power {mean}");
    }

    #[test]
    fn single_beam_sweep_is_a_matched_filter_on_orthogonal_grids() {
        // B = N degenerates every beam to one direction; noiseless, the
        // aligned slots carry exactly (sqrt(P) |g| N_i)^2 and all others 0.
        let mut cfg = scenario(1, 1, 16, 16, 1, 0.0);
        cfg.noise_power = 0.0;
        cfg.tx_power = 2.0;
        let rounds = 3;
        let books = build_books(&cfg, 16, rounds, 31);
        let channels = crate::array::draw_channels(
            &cfg,
            &mut trial_stream(31, 0, StreamPurpose::Channels),
        );
        let out = run_scanning(
            &cfg,
            &channels,
            &books,
            &mut trial_stream(31, 0, StreamPurpose::Noise),
        )
        .unwrap();
        let gamma = channels.link(0, 0).direction;
        let gain = channels.link(0, 0).gain.norm();
        let expected = 2.0 * (gain * 16.0).powi(2);
        let trace = &out.traces[0];
        let mut aligned = 0;
        for q in 0..trace.len() {
            if out.alignment.indicator(0, 0, q) {
                aligned += 1;
                assert!(books[0].beam_set().slot_beam(q) == [gamma]);
                assert!(
                    (trace.powers()[q] - expected).abs() < 1e-9 * expected,
                    "slot {q}: {} vs {expected}",
                    trace.powers()[q]
                );
            } else {
                assert!(trace.powers()[q] < 1e-18, "leak at slot {q}");
            }
        }
        assert_eq!(aligned, rounds);
    }

    #[test]
    fn noiseless_aligned_slots_dominate_unaligned() {
        // Strict separation at N=16, B=4, N_i=64 over many trials.
        let mut cfg = scenario(1, 1, 16, 16, 4, 0.0);
        cfg.noise_power = 0.0;
        for trial in 0..1000u64 {
            let books = build_books(&cfg, 4, 4, 1000 + trial);
            let channels = crate::array::draw_channels(
                &cfg,
                &mut trial_stream(77, trial, StreamPurpose::Channels),
            );
            let out = run_scanning(
                &cfg,
                &channels,
                &books,
                &mut trial_stream(77, trial, StreamPurpose::Noise),
            )
            .unwrap();
            let trace = &out.traces[0];
            let mut min_aligned = f64::INFINITY;
            let mut max_other = 0.0f64;
            for q in 0..trace.len() {
                if out.alignment.indicator(0, 0, q) {
                    min_aligned = min_aligned.min(trace.powers()[q]);
                } else {
                    max_other = max_other.max(trace.powers()[q]);
                }
            }
            assert!(
                min_aligned > max_other,
                "trial {trial}: aligned {min_aligned} vs other {max_other}"
            );
        }
    }

    #[test]
    fn mean_unaligned_power_never_beats_mean_aligned() {
        // On a leaky geometry (partial-row segments) strict per-slot
        // dominance can fail, but the means must still separate.
        let mut cfg = scenario(1, 1, 16, 16, 1, 0.0);
        cfg.noise_power = 0.0;
        let mut aligned_sum = 0.0;
        let mut aligned_n = 0usize;
        let mut other_sum = 0.0;
        let mut other_n = 0usize;
        for trial in 0..10_000u64 {
            let books = build_books(&cfg, 4, 2, 20_000 + trial);
            let channels = crate::array::draw_channels(
                &cfg,
                &mut trial_stream(78, trial, StreamPurpose::Channels),
            );
            let out = run_scanning(
                &cfg,
                &channels,
                &books,
                &mut trial_stream(78, trial, StreamPurpose::Noise),
            )
            .unwrap();
            let trace = &out.traces[0];
            for q in 0..trace.len() {
                if out.alignment.indicator(0, 0, q) {
                    aligned_sum += trace.powers()[q];
                    aligned_n += 1;
                } else {
                    other_sum += trace.powers()[q];
                    other_n += 1;
                }
            }
        }
        let aligned_mean = aligned_sum / aligned_n as f64;
        let other_mean = other_sum / other_n as f64;
        assert!(
            other_mean <= aligned_mean,
            "means: unaligned {other_mean} vs aligned {aligned_mean}"
        );
    }

    #[test]
    fn joint_alignment_rate_matches_inverse_bins_squared() {
        // Two RISs with independent hashes align on the same slot at rate
        // 1/B^2 (checked at B = 4 here; the full sweep lives in the
        // acceptance suite).
        let cfg = scenario(2, 1, 16, 16, 1, 0.0);
        let mut joint = 0usize;
        let mut slots = 0usize;
        for trial in 0..4000u64 {
            let books = build_books(&cfg, 4, 1, 50_000 + trial);
            let channels = crate::array::draw_channels(
                &cfg,
                &mut trial_stream(13, trial, StreamPurpose::Channels),
            );
            let out = run_scanning(
                &cfg,
                &channels,
                &books,
                &mut trial_stream(13, trial, StreamPurpose::Noise),
            )
            .unwrap();
            for q in 0..out.alignment.slots() {
                slots += 1;
                if out.alignment.indicator(0, 0, q) && out.alignment.indicator(1, 0, q) {
                    joint += 1;
                }
            }
        }
        let rate = joint as f64 / slots as f64;
        assert!((rate - 1.0 / 16.0).abs() < 0.01, "joint rate {rate}");
    }

    #[test]
    fn mismatched_codebooks_are_rejected() {
        let cfg = scenario(2, 1, 16, 16, 1, 0.0);
        let mut books = build_books(&cfg, 4, 3, 1);
        let other = build_books(&cfg, 4, 2, 1);
        books[1] = other[1].clone();
        let channels = crate::array::draw_channels(
            &cfg,
            &mut trial_stream(1, 0, StreamPurpose::Channels),
        );
        let r = run_scanning(
            &cfg,
            &channels,
            &books,
            &mut trial_stream(1, 0, StreamPurpose::Noise),
        );
        assert!(matches!(r, Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn scanning_is_deterministic() {
        let cfg = scenario(3, 2, 16, 16, 2, 5.0);
        let run = || {
            let books = build_books(&cfg, 4, 3, 8);
            let channels = crate::array::draw_channels(
                &cfg,
                &mut trial_stream(8, 0, StreamPurpose::Channels),
            );
            run_scanning(
                &cfg,
                &channels,
                &books,
                &mut trial_stream(8, 0, StreamPurpose::Noise),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn trace_csv_round_trips() {
        let schedule = SlotSchedule::new(2, 3).unwrap();
        let trace = PowerTrace::new(1, vec![0.5, 1.25, 0.0, 3.5e-17, 2.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_trace_header(&mut buf).unwrap();
        write_trace_rows(&mut buf, 4, &trace, &schedule).unwrap();
        let parsed = read_trace_csv(&mut buf.as_slice()).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].0, 4);
        assert_eq!(parsed[0].1, trace);
    }

    #[test]
    fn power_trace_rejects_bad_values() {
        assert!(PowerTrace::new(0, vec![1.0, -0.5]).is_err());
        assert!(PowerTrace::new(0, vec![f64::NAN]).is_err());
    }
}
