//! Single-beam, hashing multi-arm and hierarchical codebooks.
//!
//! The single-beam codebook holds one steering row per grid region center
//! and doubles as a 2-D DFT matrix on critically sampled grids. Multi-arm
//! codewords splice `M = N_i / R` adjacent elements from each arm's
//! single-beam row, widening each arm by a factor of `R`. Steering rows use
//! the `e^{+j...}` convention; [`beam_gain`] conjugates the codeword, so the
//! matched filter `s = a` yields exactly `N_i`.

use std::io::{self, BufRead, Write};

use rand::Rng;

use crate::array::{AngleGrid, SteeringVector, UpaGeometry};
use crate::error::{Error, Result};
use crate::hashing::{balanced_partition, sample_hash, HashFamilySpec, PolyHash, PrimeField};
use crate::num::{inner_product_conj, Cx, Scalar};

/// DFT-style grid codebook: one steering row per direction region center.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleBeamCodebook<T> {
    rows: Vec<SteeringVector<T>>,
    grid: AngleGrid,
    geom: UpaGeometry<T>,
}

impl<T: Scalar> SingleBeamCodebook<T> {
    /// `N x N_i` matrix of steering rows at the grid region centers.
    pub fn build(geom: &UpaGeometry<T>, grid: &AngleGrid) -> Result<Self> {
        let rows = (0..grid.directions())
            .map(|n| {
                grid.frequency(n)
                    .map(|f| crate::array::steering_vector(geom, f))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows,
            grid: *grid,
            geom: *geom,
        })
    }

    pub fn row(&self, direction: usize) -> &SteeringVector<T> {
        &self.rows[direction]
    }

    pub fn directions(&self) -> usize {
        self.rows.len()
    }

    pub fn elements(&self) -> usize {
        self.geom.elements()
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn geometry(&self) -> &UpaGeometry<T> {
        &self.geom
    }
}

/// Maximum entrywise deviation between the codebook and the 2-D DFT closed
/// form built from `xi_h = e^{-j 2 pi d_h}`, `xi_v = e^{-j 2 pi d_v}` raised
/// to the (direction, element) products and conjugated to reconcile the
/// sign conventions.
pub fn dft_form_check<T: Scalar>(cb: &SingleBeamCodebook<T>) -> T {
    let geom = cb.geometry();
    let two_pi = T::PI() + T::PI();
    let mut max_dev = T::zero();
    for n in 0..cb.directions() {
        let f = cb
            .grid()
            .frequency::<T>(n)
            .expect("row index within grid");
        // Per-direction unit steps; the row is an iterated product, a
        // different floating route than the direct per-entry evaluation.
        let xi_h_u = Cx::from_polar(T::one(), -two_pi * geom.d_h() * f.u);
        let xi_v_v = Cx::from_polar(T::one(), -two_pi * geom.d_v() * f.v);
        let row = cb.row(n).entries();
        let mut vert = Cx::new(T::one(), T::zero());
        for mv in 0..geom.n_v() {
            let mut entry = vert;
            for mh in 0..geom.n_h() {
                let dev = (row[mv * geom.n_h() + mh] - entry.conj()).norm();
                if dev > max_dev {
                    max_dev = dev;
                }
                if mh + 1 < geom.n_h() {
                    entry *= xi_h_u;
                }
            }
            vert *= xi_v_v;
        }
    }
    max_dev
}

/// Per-round balanced beam partitions plus the hashes that produced them.
///
/// Every round partitions all `N` directions into `B` beams of `R = N/B`
/// arms, so each direction is seen exactly once per round and `L` times
/// over the whole schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiArmBeamSet {
    directions: usize,
    rounds: usize,
    beams_per_round: usize,
    arms: usize,
    dirs: Vec<Vec<Vec<usize>>>, // [round][beam] -> arm-ordered directions
    hash_log: Vec<PolyHash>,
}

impl MultiArmBeamSet {
    /// Draw one independent hash per round and partition the grid.
    pub fn build<R: Rng + ?Sized>(
        grid: &AngleGrid,
        beams: usize,
        rounds: usize,
        family: &HashFamilySpec,
        rng: &mut R,
    ) -> Result<Self> {
        let directions = grid.directions();
        if rounds == 0 {
            return Err(Error::InvalidConfig("need at least one round".into()));
        }
        if beams == 0 || !directions.is_multiple_of(beams) {
            return Err(Error::IndivisibleGrid { directions, beams });
        }
        if family.key_count() != directions as u64 || family.bins() != beams as u64 {
            return Err(Error::ConfigMismatch(format!(
                "hash family covers {} keys / {} bins but the grid needs {} / {}",
                family.key_count(),
                family.bins(),
                directions,
                beams
            )));
        }
        let mut dirs = Vec::with_capacity(rounds);
        let mut hash_log = Vec::with_capacity(rounds);
        for _ in 0..rounds {
            let hash = sample_hash(family, rng);
            dirs.push(balanced_partition(&hash, directions as u64)?);
            hash_log.push(hash);
        }
        Ok(Self {
            directions,
            rounds,
            beams_per_round: beams,
            arms: directions / beams,
            dirs,
            hash_log,
        })
    }

    /// Assemble a beam set from explicit partitions (file import, fixtures).
    pub fn from_parts(
        directions: usize,
        dirs: Vec<Vec<Vec<usize>>>,
        hash_log: Vec<PolyHash>,
    ) -> Result<Self> {
        let rounds = dirs.len();
        if rounds == 0 || hash_log.len() != rounds {
            return Err(Error::InconsistentBeamSets(
                "need one hash per non-empty round".into(),
            ));
        }
        let beams_per_round = dirs[0].len();
        if beams_per_round == 0 || !directions.is_multiple_of(beams_per_round) {
            return Err(Error::IndivisibleGrid {
                directions,
                beams: beams_per_round,
            });
        }
        let arms = directions / beams_per_round;
        for round in &dirs {
            if round.len() != beams_per_round || round.iter().any(|b| b.len() != arms) {
                return Err(Error::InconsistentBeamSets(
                    "rounds disagree on beam or arm counts".into(),
                ));
            }
            let mut seen = vec![false; directions];
            for beam in round {
                for &d in beam {
                    if d >= directions || seen[d] {
                        return Err(Error::InconsistentBeamSets(format!(
                            "round is not a partition at direction {d}"
                        )));
                    }
                    seen[d] = true;
                }
            }
        }
        Ok(Self {
            directions,
            rounds,
            beams_per_round,
            arms,
            dirs,
            hash_log,
        })
    }

    pub fn beam(&self, round: usize, beam: usize) -> &[usize] {
        &self.dirs[round][beam]
    }

    /// Beam shown in slot `q = round * B + beam`.
    pub fn slot_beam(&self, slot: usize) -> &[usize] {
        let round = slot / self.beams_per_round;
        let beam = slot % self.beams_per_round;
        self.beam(round, beam)
    }

    pub fn contains(&self, slot: usize, direction: usize) -> bool {
        self.slot_beam(slot).contains(&direction)
    }

    pub fn directions(&self) -> usize {
        self.directions
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn beams_per_round(&self) -> usize {
        self.beams_per_round
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn total_slots(&self) -> usize {
        self.rounds * self.beams_per_round
    }

    pub fn hash_log(&self) -> &[PolyHash] {
        &self.hash_log
    }
}

/// Splice one multi-arm codeword: segment `r` comes from row `dirs[r]`,
/// columns `r*M .. (r+1)*M` with `M = N_i / R`.
pub fn build_hmb_codeword<T: Scalar>(
    cb: &SingleBeamCodebook<T>,
    dirs: &[usize],
) -> Result<Vec<Cx<T>>> {
    let arms = dirs.len();
    let elements = cb.elements();
    if arms == 0 || !elements.is_multiple_of(arms) {
        return Err(Error::IndivisibleArray { elements, arms });
    }
    let segment = elements / arms;
    let mut codeword = Vec::with_capacity(elements);
    for (r, &dir) in dirs.iter().enumerate() {
        if dir >= cb.directions() {
            return Err(Error::IndexOutOfRange {
                index: dir,
                len: cb.directions(),
            });
        }
        codeword.extend_from_slice(&cb.row(dir).entries()[r * segment..(r + 1) * segment]);
    }
    Ok(codeword)
}

/// Spliced codewords realizing a beam set, one per (round, beam) slot.
#[derive(Debug, Clone, PartialEq)]
pub struct HmbCodebook<T> {
    codewords: Vec<Vec<Cx<T>>>, // [round * B + beam]
    beam_set: MultiArmBeamSet,
    segment_len: usize,
}

impl<T: Scalar> HmbCodebook<T> {
    pub fn build(cb: &SingleBeamCodebook<T>, beam_set: MultiArmBeamSet) -> Result<Self> {
        if cb.directions() != beam_set.directions() {
            return Err(Error::ConfigMismatch(format!(
                "codebook covers {} directions, beam set {}",
                cb.directions(),
                beam_set.directions()
            )));
        }
        let arms = beam_set.arms();
        let elements = cb.elements();
        if !elements.is_multiple_of(arms) {
            return Err(Error::IndivisibleArray { elements, arms });
        }
        let mut codewords = Vec::with_capacity(beam_set.total_slots());
        for round in 0..beam_set.rounds() {
            for beam in 0..beam_set.beams_per_round() {
                codewords.push(build_hmb_codeword(cb, beam_set.beam(round, beam))?);
            }
        }
        Ok(Self {
            codewords,
            beam_set,
            segment_len: elements / arms,
        })
    }

    pub fn codeword(&self, round: usize, beam: usize) -> &[Cx<T>] {
        &self.codewords[round * self.beam_set.beams_per_round() + beam]
    }

    pub fn slot_codeword(&self, slot: usize) -> &[Cx<T>] {
        &self.codewords[slot]
    }

    pub fn beam_set(&self) -> &MultiArmBeamSet {
        &self.beam_set
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    pub fn elements(&self) -> usize {
        self.codewords.first().map_or(0, Vec::len)
    }

    pub fn rounds(&self) -> usize {
        self.beam_set.rounds()
    }

    pub fn beams_per_round(&self) -> usize {
        self.beam_set.beams_per_round()
    }
}

/// `|<a, s>| = |sum_n a(n) conj(s(n))|`: magnitude of the effective
/// response of codeword `s` toward steering vector `a`.
pub fn beam_gain<T: Scalar>(codeword: &[Cx<T>], steering: &SteeringVector<T>) -> Result<T> {
    if codeword.len() != steering.len() {
        return Err(Error::LengthMismatch {
            left: codeword.len(),
            right: steering.len(),
        });
    }
    Ok(inner_product_conj(steering.entries(), codeword).norm())
}

/// One wide beam of the hierarchical baseline: a spliced codeword covering
/// a contiguous block of grid directions.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalBeam<T> {
    pub codeword: Vec<Cx<T>>,
    pub block: std::ops::Range<usize>,
}

/// Binary-descent codebook: layer `t` (1-based) holds `2^t` beams, each
/// covering `N / 2^t` contiguous directions; the bottom layer equals the
/// single-beam codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalCodebook<T> {
    layers: Vec<Vec<HierarchicalBeam<T>>>,
}

impl<T: Scalar> HierarchicalCodebook<T> {
    pub fn build(geom: &UpaGeometry<T>, grid: &AngleGrid) -> Result<Self> {
        let n = grid.directions();
        if !n.is_power_of_two() || n < 2 {
            return Err(Error::NotPowerOfTwo(n));
        }
        let cb = SingleBeamCodebook::build(geom, grid)?;
        let depth = n.trailing_zeros() as usize;
        let mut layers = Vec::with_capacity(depth);
        for t in 1..=depth {
            let blocks = 1usize << t;
            let width = n / blocks;
            let mut layer = Vec::with_capacity(blocks);
            for b in 0..blocks {
                let block = b * width..(b + 1) * width;
                let arms = block_arms(block.clone(), cb.elements());
                layer.push(HierarchicalBeam {
                    codeword: build_hmb_codeword(&cb, &arms)?,
                    block,
                });
            }
            layers.push(layer);
        }
        Ok(Self { layers })
    }

    /// Number of layers, `log2(N)`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Beams of layer `t` in `1..=depth`.
    pub fn layer(&self, t: usize) -> &[HierarchicalBeam<T>] {
        &self.layers[t - 1]
    }
}

/// Arm directions used to splice a wide beam over a contiguous block. When
/// the block size does not divide the element count, the block is decimated
/// to the largest divisor of `N_i` that fits, taking evenly spaced members.
fn block_arms(block: std::ops::Range<usize>, elements: usize) -> Vec<usize> {
    let len = block.len();
    if elements.is_multiple_of(len) {
        return block.collect();
    }
    let mut d = 1;
    for cand in 1..=len.min(elements) {
        if elements.is_multiple_of(cand) {
            d = cand;
        }
    }
    (0..d)
        .map(|j| block.start + ((2 * j + 1) * len) / (2 * d))
        .collect()
}

// ---------------------------------------------------------------------------
// Plain-text export: header line `N N_i B R L p k <k coefficients per round>`,
// then one line per codeword (interleaved re/im pairs, round-major), then one
// line per beam (its direction indices, round-major).
// ---------------------------------------------------------------------------

/// Write a codebook in the documented plain-text format.
pub fn write_codebook<T: Scalar, W: Write>(book: &HmbCodebook<T>, w: &mut W) -> io::Result<()> {
    let set = book.beam_set();
    let p = set.hash_log()[0].field().modulus();
    let k = set.hash_log()[0].independence_order();
    write!(
        w,
        "{} {} {} {} {} {} {}",
        set.directions(),
        book.elements(),
        set.beams_per_round(),
        set.arms(),
        set.rounds(),
        p,
        k
    )?;
    for hash in set.hash_log() {
        for &c in hash.coeffs() {
            write!(w, " {c}")?;
        }
    }
    writeln!(w)?;
    for slot in 0..set.total_slots() {
        let mut line = String::new();
        for e in book.slot_codeword(slot) {
            if !line.is_empty() {
                line.push(' ');
            }
            line.push_str(&format!(
                "{:.16e} {:.16e}",
                e.re.to_f64_lossy(),
                e.im.to_f64_lossy()
            ));
        }
        writeln!(w, "{line}")?;
    }
    for round in 0..set.rounds() {
        for beam in 0..set.beams_per_round() {
            let line: Vec<String> = set
                .beam(round, beam)
                .iter()
                .map(|d| d.to_string())
                .collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

/// Read a codebook written by [`write_codebook`].
pub fn read_codebook<R: BufRead>(r: &mut R) -> Result<HmbCodebook<f64>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err("empty codebook file"))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 7 {
        return Err(parse_err("codebook header too short"));
    }
    let mut ints = fields.iter().map(|s| {
        s.parse::<u64>()
            .map_err(|_| parse_err(format!("bad header field '{s}'")))
    });
    let n = ints.next().unwrap()? as usize;
    let elements = ints.next().unwrap()? as usize;
    let beams = ints.next().unwrap()? as usize;
    let arms = ints.next().unwrap()? as usize;
    let rounds = ints.next().unwrap()? as usize;
    let p = ints.next().unwrap()?;
    let k = ints.next().unwrap()? as usize;
    if fields.len() != 7 + rounds * k {
        return Err(parse_err(format!(
            "expected {} hash coefficients, found {}",
            rounds * k,
            fields.len() - 7
        )));
    }
    let field = PrimeField::new(p)?;
    let mut hash_log = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let coeffs = ints
            .by_ref()
            .take(k)
            .collect::<Result<Vec<u64>>>()
            .map_err(|_| parse_err(format!("bad coefficients for round {round}")))?;
        hash_log.push(PolyHash::new(field, coeffs, beams as u64)?);
    }

    let mut codewords = Vec::with_capacity(rounds * beams);
    for slot in 0..rounds * beams {
        let line = lines
            .next()
            .ok_or_else(|| parse_err(format!("missing codeword line {slot}")))??;
        let values = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| parse_err(format!("bad float '{s}' in codeword {slot}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 2 * elements {
            return Err(parse_err(format!(
                "codeword {slot} has {} values, expected {}",
                values.len(),
                2 * elements
            )));
        }
        codewords.push(
            values
                .chunks(2)
                .map(|pair| Cx::new(pair[0], pair[1]))
                .collect(),
        );
    }

    let mut dirs = vec![Vec::with_capacity(beams); rounds];
    for round in 0..rounds {
        for beam in 0..beams {
            let line = lines
                .next()
                .ok_or_else(|| parse_err(format!("missing beam line {round}/{beam}")))??;
            let members = line
                .split_whitespace()
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(format!("bad direction '{s}'")))
                })
                .collect::<Result<Vec<usize>>>()?;
            if members.len() != arms {
                return Err(parse_err(format!(
                    "beam {round}/{beam} lists {} arms, expected {arms}",
                    members.len()
                )));
            }
            dirs[round].push(members);
        }
    }

    let beam_set = MultiArmBeamSet::from_parts(n, dirs, hash_log)?;
    if beam_set.arms() != arms {
        return Err(parse_err("arm count disagrees with beam lines"));
    }
    Ok(HmbCodebook {
        codewords,
        beam_set,
        segment_len: elements / arms,
    })
}
