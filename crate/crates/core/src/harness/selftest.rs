//! Invariant battery behind the `selftest` subcommand.
//!
//! Mirrors the statistical and structural checks of the test suite at
//! counts sized to finish in well under five minutes.

use crate::array::{
    draw_channels, AngleGrid, CascadedLink, ChannelSet, ScenarioConfig, UpaGeometry,
};
use crate::baselines::{overhead_model, Method};
use crate::codebook::{
    beam_gain, dft_form_check, HmbCodebook, MultiArmBeamSet, SingleBeamCodebook,
};
use crate::error::Result;
use crate::harness::{run_accuracy_sweep, write_metrics_csv, ExperimentConfig};
use crate::hashing::{balanced_partition, sample_hash, HashFamilySpec, PolyHash, PrimeField};
use crate::identify::{demultiplex_and_vote, vote, StopRule};
use crate::protocol::run_scanning;
use crate::rng::{trial_stream, StreamPurpose};
use crate::Cx64;

use rand::Rng;

/// One named check.
#[derive(Debug, Clone)]
pub struct SelftestItem {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Battery outcome.
#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub items: Vec<SelftestItem>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }
}

const SEED: u64 = 0x5E1F;

fn scenario(
    ris: usize,
    users: usize,
    n: usize,
    n_h: usize,
    n_v: usize,
    gap_db: f64,
    snr_db: f64,
) -> ScenarioConfig<f64> {
    ScenarioConfig::with_snr(
        ris,
        users,
        UpaGeometry::half_wavelength(n_h, n_v).unwrap(),
        AngleGrid::new(n, 1).unwrap(),
        gap_db,
        snr_db,
    )
}

fn build_books(
    cfg: &ScenarioConfig<f64>,
    beams: usize,
    rounds: usize,
    seed: u64,
    trial: u64,
) -> Result<Vec<HmbCodebook<f64>>> {
    let cb = SingleBeamCodebook::build(&cfg.geometry, &cfg.grid)?;
    let family = HashFamilySpec::for_keys(cfg.grid.directions(), beams, 4)?;
    let mut rng = trial_stream(seed, trial, StreamPurpose::Hashes);
    (0..cfg.ris_count)
        .map(|_| {
            let set = MultiArmBeamSet::build(&cfg.grid, beams, rounds, &family, &mut rng)?;
            HmbCodebook::build(&cb, set)
        })
        .collect()
}

fn check_hash_family() -> Result<(bool, String)> {
    let field = PrimeField::new(5)?;
    let spec = HashFamilySpec::new(field, 2, 5, 5)?;
    if spec.family_size() != 20 {
        return Ok((false, format!("family size {}", spec.family_size())));
    }
    for x1 in 0..5u64 {
        for x2 in 0..5u64 {
            if x1 == x2 {
                continue;
            }
            let mut counts = [[0u32; 5]; 5];
            for a0 in 0..5 {
                for a1 in 1..5 {
                    let h = PolyHash::new(field, vec![a0, a1], 5)?;
                    counts[h.eval(x1)? as usize][h.eval(x2)? as usize] += 1;
                }
            }
            for (r1, row) in counts.iter().enumerate() {
                for (r2, &c) in row.iter().enumerate() {
                    let expected = u32::from(r1 != r2);
                    if c != expected {
                        return Ok((false, format!("cell ({r1},{r2}) count {c}")));
                    }
                }
            }
        }
    }
    Ok((true, "|H| = 20, pairwise value distribution exact".into()))
}

fn check_chi_square() -> Result<(bool, String)> {
    let p = 1009u64;
    let spec = HashFamilySpec::new(PrimeField::new(p)?, 3, 4, p - (p % 4))?;
    let mut rng = trial_stream(SEED, 1, StreamPurpose::Hashes);
    let mut counts = [0u64; 4];
    for _ in 0..10_000 {
        let h = sample_hash(&spec, &mut rng);
        let key = rng.gen_range(0..p);
        counts[h.bin(key)? as usize] += 1;
    }
    let expected = 2500.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    Ok((chi2 < 11.345, format!("chi2 = {chi2:.2} (crit 11.345)")))
}

fn check_partitions() -> Result<(bool, String)> {
    let mut rng = trial_stream(SEED, 2, StreamPurpose::Hashes);
    for _ in 0..200 {
        let n = 32u64;
        let b = [1u64, 2, 4, 8, 16, 32][rng.gen_range(0..6u64) as usize];
        let spec = HashFamilySpec::for_keys(n as usize, b as usize, 4)?;
        let h = sample_hash(&spec, &mut rng);
        let parts = balanced_partition(&h, n)?;
        let run = (n / b) as usize;
        let mut seen = vec![false; n as usize];
        for part in &parts {
            if part.len() != run {
                return Ok((false, format!("bin size {} != {run}", part.len())));
            }
            for &k in part {
                if seen[k] {
                    return Ok((false, format!("duplicate key {k}")));
                }
                seen[k] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return Ok((false, "partition does not cover".into()));
        }
    }
    Ok((true, "200 random partitions balanced and covering".into()))
}

fn check_dft_forms() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (n_h, n_v) in [(4usize, 1usize), (8, 4), (32, 32)] {
        let cb = SingleBeamCodebook::build(
            &UpaGeometry::half_wavelength(n_h, n_v)?,
            &AngleGrid::new(n_h, n_v)?,
        )?;
        worst = worst.max(dft_form_check(&cb));
    }
    Ok((worst < 1e-9, format!("max deviation {worst:.3e}")))
}

fn check_splice_and_gains() -> Result<(bool, String)> {
    let cfg = scenario(1, 1, 32, 32, 32, 3.0, 0.0);
    let cb = SingleBeamCodebook::build(&cfg.geometry, &cfg.grid)?;
    let family = HashFamilySpec::for_keys(32, 8, 4)?;
    let mut rng = trial_stream(SEED, 3, StreamPurpose::Hashes);
    let mut member_sum = 0.0;
    let mut other_sum = 0.0;
    let mut member_n = 0usize;
    let mut other_n = 0usize;
    for _ in 0..100 {
        let set = MultiArmBeamSet::build(&cfg.grid, 8, 1, &family, &mut rng)?;
        let book = HmbCodebook::build(&cb, set)?;
        let m = book.segment_len();
        for beam in 0..8 {
            let cw = book.codeword(0, beam);
            for (r, &d) in book.beam_set().beam(0, beam).iter().enumerate() {
                if cw[r * m..(r + 1) * m] != cb.row(d).entries()[r * m..(r + 1) * m] {
                    return Ok((false, "splice segment mismatch".into()));
                }
            }
            for d in 0..32 {
                let g = beam_gain(cw, cb.row(d))?;
                if book.beam_set().beam(0, beam).contains(&d) {
                    member_sum += g;
                    member_n += 1;
                } else {
                    other_sum += g;
                    other_n += 1;
                }
            }
        }
    }
    let ratio = (member_sum / member_n as f64) / (other_sum / other_n as f64).max(1e-30);
    Ok((
        ratio >= 3.0,
        format!("member/non-member mean gain ratio {ratio:.1}"),
    ))
}

fn check_collision_rates() -> Result<(bool, String)> {
    let mut details = Vec::new();
    let mut ok = true;
    for beams in [2usize, 4, 8] {
        let n = 32usize;
        let family = HashFamilySpec::for_keys(n, beams, 4)?;
        let mut rng = trial_stream(SEED, beams as u64, StreamPurpose::Hashes);
        let mut joint = 0usize;
        let mut samples = 0usize;
        let draws = 120_000 / beams;
        for _ in 0..draws {
            let h1 = sample_hash(&family, &mut rng);
            let h2 = sample_hash(&family, &mut rng);
            let p1 = balanced_partition(&h1, n as u64)?;
            let p2 = balanced_partition(&h2, n as u64)?;
            let g1 = rng.gen_range(0..n as u64) as usize;
            let g2 = rng.gen_range(0..n as u64) as usize;
            let b1 = p1.iter().position(|p| p.contains(&g1)).unwrap();
            let b2 = p2.iter().position(|p| p.contains(&g2)).unwrap();
            for slot in 0..beams {
                samples += 1;
                if b1 == slot && b2 == slot {
                    joint += 1;
                }
            }
        }
        let rate = joint as f64 / samples as f64;
        let expected = 1.0 / (beams * beams) as f64;
        if (rate - expected).abs() > 0.01 {
            ok = false;
        }
        details.push(format!("B={beams}: {rate:.4} vs {expected:.4}"));
    }
    Ok((ok, details.join("; ")))
}

fn check_alignment_counts() -> Result<(bool, String)> {
    let mut rng = trial_stream(SEED, 5, StreamPurpose::Channels);
    for trial in 0..500u64 {
        let n = [8usize, 16, 32][rng.gen_range(0..3u64) as usize];
        let divisors: Vec<usize> = (1..=n).filter(|b| n.is_multiple_of(*b)).collect();
        let beams = divisors[rng.gen_range(0..divisors.len() as u64) as usize];
        let rounds = rng.gen_range(1..5u64) as usize;
        let ris = rng.gen_range(1..4u64) as usize;
        let users = rng.gen_range(1..4u64) as usize;
        let cfg = scenario(ris, users, n, n, 1, 2.0, 0.0);
        let books = build_books(&cfg, beams, rounds, SEED, 100 + trial)?;
        let channels = draw_channels(
            &cfg,
            &mut trial_stream(SEED, 200 + trial, StreamPurpose::Channels),
        );
        let out = run_scanning(
            &cfg,
            &channels,
            &books,
            &mut trial_stream(SEED, 300 + trial, StreamPurpose::Noise),
        )?;
        for i in 0..ris {
            for k in 0..users {
                if out.alignment.aligned_slot_count(i, k) != rounds {
                    return Ok((
                        false,
                        format!("trial {trial}: alignment count != L = {rounds}"),
                    ));
                }
            }
        }
    }
    Ok((true, "sum_q e_q = L over 500 random configs".into()))
}

fn check_noiseless_monotonicity() -> Result<(bool, String)> {
    let mut cfg = scenario(1, 1, 16, 16, 4, 3.0, 0.0);
    cfg.noise_power = 0.0;
    for trial in 0..200u64 {
        let books = build_books(&cfg, 4, 4, SEED, 400 + trial)?;
        let channels = draw_channels(
            &cfg,
            &mut trial_stream(SEED, 500 + trial, StreamPurpose::Channels),
        );
        let out = run_scanning(
            &cfg,
            &channels,
            &books,
            &mut trial_stream(SEED, 500 + trial, StreamPurpose::Noise),
        )?;
        let trace = &out.traces[0];
        let mut min_aligned = f64::INFINITY;
        let mut max_other: f64 = 0.0;
        for q in 0..trace.len() {
            if out.alignment.indicator(0, 0, q) {
                min_aligned = min_aligned.min(trace.powers()[q]);
            } else {
                max_other = max_other.max(trace.powers()[q]);
            }
        }
        if min_aligned <= max_other {
            return Ok((false, format!("trial {trial}: {min_aligned} <= {max_other}")));
        }
    }
    Ok((true, "aligned power strictly dominates in 200 trials".into()))
}

fn check_vote_completeness() -> Result<(bool, String)> {
    let grid = AngleGrid::new(16, 1)?;
    let family = HashFamilySpec::for_keys(16, 4, 4)?;
    let rounds = 4;
    let mut flagged = 0usize;
    for trial in 0..200u64 {
        let mut rng = trial_stream(SEED, 600 + trial, StreamPurpose::Hashes);
        let set = MultiArmBeamSet::build(&grid, 4, rounds, &family, &mut rng)?;
        let gamma = (trial % 16) as usize;
        let slots: Vec<usize> = (0..set.total_slots())
            .filter(|&q| set.contains(q, gamma))
            .collect();
        let beams: Vec<&[usize]> = slots.iter().map(|&q| set.slot_beam(q)).collect();
        let tally = vote(&beams, 16);
        if tally.counts[gamma] as usize != rounds {
            return Ok((false, format!("true direction got {} votes", tally.counts[gamma])));
        }
        if (0..16).any(|d| d != gamma && tally.counts[d] as usize >= rounds) {
            flagged += 1;
        }
    }
    Ok((
        flagged <= 4,
        format!("full-tier vote = L in 200 trials, {flagged} co-hash ties"),
    ))
}

fn check_scale_invariance() -> Result<(bool, String)> {
    let mut cfg = scenario(2, 1, 16, 16, 4, 4.0, 0.0);
    cfg.noise_power = 0.0;
    let books = build_books(&cfg, 4, 3, SEED, 700)?;
    let channels = draw_channels(&cfg, &mut trial_stream(SEED, 700, StreamPurpose::Channels));
    let out = run_scanning(
        &cfg,
        &channels,
        &books,
        &mut trial_stream(SEED, 700, StreamPurpose::Noise),
    )?;
    let sets: Vec<&MultiArmBeamSet> = books.iter().map(|b| b.beam_set()).collect();
    let base = demultiplex_and_vote(&out.traces[0], &sets, StopRule::Threshold(1e-9), 3)?;
    for scale in [1e-8, 1e8] {
        let scaled = crate::protocol::PowerTrace::new(
            0,
            out.traces[0].powers().iter().map(|p| p * scale).collect(),
        )?;
        let result =
            demultiplex_and_vote(&scaled, &sets, StopRule::Threshold(1e-9 * scale), 3)?;
        if result != base {
            return Ok((false, format!("result changed at scale {scale}")));
        }
    }
    Ok((true, "identification invariant under trace scaling".into()))
}

fn check_narrative_fixture() -> Result<(bool, String)> {
    let mut cfg = scenario(2, 1, 16, 16, 4, 6.0, 10.0);
    cfg.noise_power = 0.0;
    let channels = ChannelSet::from_links(vec![
        vec![CascadedLink {
            gain: Cx64::new(1.0, 0.0),
            direction: 3,
        }],
        vec![CascadedLink {
            gain: Cx64::new(0.0, 0.5),
            direction: 5,
        }],
    ])?;
    // Same pinned draw as the regression test: seed 1, pairwise hashes.
    let cb = SingleBeamCodebook::build(&cfg.geometry, &cfg.grid)?;
    let family = HashFamilySpec::for_keys(16, 4, 2)?;
    let mut rng = trial_stream(1, 0, StreamPurpose::Hashes);
    let books: Vec<HmbCodebook<f64>> = (0..2)
        .map(|_| {
            let set = MultiArmBeamSet::build(&cfg.grid, 4, 4, &family, &mut rng)?;
            HmbCodebook::build(&cb, set)
        })
        .collect::<Result<_>>()?;
    let out = run_scanning(
        &cfg,
        &channels,
        &books,
        &mut trial_stream(1, 0, StreamPurpose::Noise),
    )?;
    let sets: Vec<&MultiArmBeamSet> = books.iter().map(|b| b.beam_set()).collect();
    let result = demultiplex_and_vote(&out.traces[0], &sets, StopRule::RisCount(2), 4)?;
    let ok = result.ranking == vec![0, 1] && result.gamma_hat == vec![Some(3), Some(5)];
    Ok((ok, format!("{:?} ranking {:?}", result.gamma_hat, result.ranking)))
}

fn check_overhead_forms() -> Result<(bool, String)> {
    let cases = [
        (Method::Hmb, 32, 3, 8, 5, 40),
        (Method::Exhaustive, 32, 3, 8, 5, 96),
        (Method::Hierarchical, 32, 3, 8, 5, 30),
        (Method::Hierarchical, 16, 1, 4, 4, 8),
    ];
    for (m, n, i, b, l, expected) in cases {
        if overhead_model(m, n, i, b, l)? != expected {
            return Ok((false, format!("{m} N={n} I={i}")));
        }
    }
    Ok((true, "closed-form slot counts".into()))
}

fn check_sweep_determinism() -> Result<(bool, String)> {
    let cfg = ExperimentConfig {
        n_h: 16,
        n_v: 4,
        n1: 16,
        beams: 4,
        rounds: 3,
        trials: 25,
        snr_points_db: vec![0.0],
        methods: vec![Method::Hmb, Method::Hierarchical],
        ..ExperimentConfig::default()
    };
    let render = |threads| -> Result<String> {
        let rows = run_accuracy_sweep(&cfg, threads)?;
        let mut buf = Vec::new();
        write_metrics_csv(&rows, &mut buf)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    };
    let one = render(1)?;
    let four = render(4)?;
    Ok((
        one == four,
        "accuracy sweep byte-identical at 1 and 4 threads".into(),
    ))
}

/// Run the whole battery.
pub fn selftest(_threads: usize) -> Result<SelftestReport> {
    let checks: Vec<(&'static str, fn() -> Result<(bool, String)>)> = vec![
        ("hash-family-exactness", check_hash_family),
        ("hash-bin-chi-square", check_chi_square),
        ("balanced-partitions", check_partitions),
        ("dft-form-equivalence", check_dft_forms),
        ("codeword-splice-and-gain-separation", check_splice_and_gains),
        ("joint-alignment-collision-rate", check_collision_rates),
        ("alignment-count-per-round", check_alignment_counts),
        ("noiseless-power-monotonicity", check_noiseless_monotonicity),
        ("full-tier-vote-completeness", check_vote_completeness),
        ("identification-scale-invariance", check_scale_invariance),
        ("two-ris-voting-fixture", check_narrative_fixture),
        ("overhead-closed-forms", check_overhead_forms),
        ("sweep-determinism", check_sweep_determinism),
    ];
    let mut items = Vec::with_capacity(checks.len());
    for (name, check) in checks {
        let (passed, detail) = check()?;
        items.push(SelftestItem {
            name,
            passed,
            detail,
        });
    }
    Ok(SelftestReport { items })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_battery_passes() {
        let report = selftest(2).unwrap();
        for item in &report.items {
            assert!(item.passed, "{}: {}", item.name, item.detail);
        }
    }
}
