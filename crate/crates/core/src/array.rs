//! UPA geometry, spatial-frequency grids, steering vectors and channel draws.
//!
//! Directions live natively in spatial-frequency space `(u, v) =
//! (sin(phi)cos(theta), sin(theta))`, which covers `[-1, 1]^2` uniformly and
//! avoids the invisible-region singularity an angle inversion would hit.
//! Grid codewords point at region centers.

use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::num::{Cx, Scalar};

/// Uniform planar array: element counts and spacings in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpaGeometry<T> {
    n_h: usize,
    n_v: usize,
    d_h: T,
    d_v: T,
}

impl<T: Scalar> UpaGeometry<T> {
    pub fn new(n_h: usize, n_v: usize, d_h: T, d_v: T) -> Result<Self> {
        if n_h == 0 || n_v == 0 {
            return Err(Error::InvalidConfig(
                "array needs at least one element per axis".into(),
            ));
        }
        if d_h <= T::zero() || d_v <= T::zero() {
            return Err(Error::InvalidConfig(
                "element spacings must be positive".into(),
            ));
        }
        Ok(Self { n_h, n_v, d_h, d_v })
    }

    /// Half-wavelength spacing on both axes.
    pub fn half_wavelength(n_h: usize, n_v: usize) -> Result<Self> {
        let half = T::from_f64_lossy(0.5);
        Self::new(n_h, n_v, half, half)
    }

    pub fn n_h(&self) -> usize {
        self.n_h
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn d_h(&self) -> T {
        self.d_h
    }

    pub fn d_v(&self) -> T {
        self.d_v
    }

    /// Total element count `N_i`.
    pub fn elements(&self) -> usize {
        self.n_h * self.n_v
    }
}

/// Rectangular direction grid; index `n = n1 * N2 + n2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngleGrid {
    n1: usize,
    n2: usize,
}

impl AngleGrid {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidConfig(
                "grid needs at least one direction per axis".into(),
            ));
        }
        Ok(Self { n1, n2 })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn directions(&self) -> usize {
        self.n1 * self.n2
    }

    /// Region-center spatial frequency of a direction index:
    /// `u = (2 n1 + 1)/N1 - 1`, `v = (2 n2 + 1)/N2 - 1`.
    pub fn frequency<T: Scalar>(&self, index: usize) -> Result<SpatialFrequency<T>> {
        if index >= self.directions() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.directions(),
            });
        }
        let a1 = index / self.n2;
        let a2 = index % self.n2;
        let u = (2 * a1 + 1) as f64 / self.n1 as f64 - 1.0;
        let v = (2 * a2 + 1) as f64 / self.n2 as f64 - 1.0;
        Ok(SpatialFrequency {
            u: T::from_f64_lossy(u),
            v: T::from_f64_lossy(v),
        })
    }
}

/// Horizontal and vertical spatial frequency, both in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialFrequency<T> {
    pub u: T,
    pub v: T,
}

impl<T: Scalar> SpatialFrequency<T> {
    pub fn new(u: T, v: T) -> Result<Self> {
        if u.abs() > T::one() || v.abs() > T::one() {
            return Err(Error::InvalidConfig(
                "spatial frequencies must lie in [-1, 1]".into(),
            ));
        }
        Ok(Self { u, v })
    }

    pub fn broadside() -> Self {
        Self {
            u: T::zero(),
            v: T::zero(),
        }
    }
}

/// `u = sin(phi) cos(theta)`, `v = sin(theta)`.
pub fn angles_to_frequency<T: Scalar>(phi: T, theta: T) -> SpatialFrequency<T> {
    SpatialFrequency {
        u: phi.sin() * theta.cos(),
        v: theta.sin(),
    }
}

/// Array response to a plane wave; unit modulus per element, first element 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector<T>(Vec<Cx<T>>);

impl<T: Scalar> SteeringVector<T> {
    pub fn entries(&self) -> &[Cx<T>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<Cx<T>> {
        self.0
    }
}

impl<T> std::ops::Deref for SteeringVector<T> {
    type Target = [Cx<T>];

    fn deref(&self) -> &[Cx<T>] {
        &self.0
    }
}

/// Steering vector of a UPA toward spatial frequency `f`.
///
/// Entry ordering follows the Kronecker product of the vertical and
/// horizontal progressions: element `(m_v, m_h)` sits at index
/// `m_v * N_h + m_h` and carries phase `2 pi (d_v m_v v + d_h m_h u)`.
pub fn steering_vector<T: Scalar>(geom: &UpaGeometry<T>, f: SpatialFrequency<T>) -> SteeringVector<T> {
    let two_pi = T::PI() + T::PI();
    let mut entries = Vec::with_capacity(geom.elements());
    for mv in 0..geom.n_v() {
        let vert = geom.d_v() * T::from_usize(mv).unwrap() * f.v;
        for mh in 0..geom.n_h() {
            let phase = two_pi * (vert + geom.d_h() * T::from_usize(mh).unwrap() * f.u);
            entries.push(Complex::from_polar(T::one(), phase));
        }
    }
    SteeringVector(entries)
}

/// One reflective link: cascaded complex gain and on-grid direction index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadedLink<T> {
    pub gain: Cx<T>,
    pub direction: usize,
}

/// All links of one scenario draw plus the per-user strength ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T> {
    links: Vec<CascadedLink<T>>, // ris-major: links[ris * users + user]
    ris_count: usize,
    user_count: usize,
    rankings: Vec<Vec<usize>>, // per user: RIS indices, strongest first
}

impl<T: Scalar> ChannelSet<T> {
    /// Assemble a channel set from explicit links, recomputing the ranking.
    pub fn from_links(links: Vec<Vec<CascadedLink<T>>>) -> Result<Self> {
        let ris_count = links.len();
        if ris_count == 0 {
            return Err(Error::InvalidConfig("need at least one RIS".into()));
        }
        let user_count = links[0].len();
        if user_count == 0 || links.iter().any(|row| row.len() != user_count) {
            return Err(Error::InvalidConfig(
                "every RIS needs the same positive user count".into(),
            ));
        }
        let mut flat = Vec::with_capacity(ris_count * user_count);
        for row in &links {
            flat.extend_from_slice(row);
        }
        let mut rankings = Vec::with_capacity(user_count);
        for k in 0..user_count {
            let mut order: Vec<usize> = (0..ris_count).collect();
            order.sort_by(|&a, &b| {
                let ga = flat[a * user_count + k].gain.norm_sqr();
                let gb = flat[b * user_count + k].gain.norm_sqr();
                gb.partial_cmp(&ga).unwrap_or(std::cmp::Ordering::Equal)
            });
            rankings.push(order);
        }
        Ok(Self {
            links: flat,
            ris_count,
            user_count,
            rankings,
        })
    }

    pub fn link(&self, ris: usize, user: usize) -> &CascadedLink<T> {
        &self.links[ris * self.user_count + user]
    }

    /// RIS indices for one user, strongest reflected gain first.
    pub fn ranking(&self, user: usize) -> &[usize] {
        &self.rankings[user]
    }

    pub fn ris_count(&self) -> usize {
        self.ris_count
    }

    pub fn user_count(&self) -> usize {
        self.user_count
    }
}

/// Scenario-wide physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig<T> {
    pub ris_count: usize,
    pub user_count: usize,
    pub geometry: UpaGeometry<T>,
    pub grid: AngleGrid,
    /// Transmit power, linear.
    pub tx_power: T,
    /// Noise variance per received sample; zero selects noiseless debugging.
    pub noise_power: T,
    /// Minimum dB separation between successive reflected gains per user.
    pub gain_gap_db: T,
    /// Pre-beamforming SNR of the strongest link, `P |g|^2 / sigma^2` in dB.
    pub snr_db: T,
}

impl<T: Scalar> ScenarioConfig<T> {
    /// Scenario pinned to a pre-beamforming SNR: unit noise power, unit
    /// strongest gain, `P = 10^(snr/10)`.
    pub fn with_snr(
        ris_count: usize,
        user_count: usize,
        geometry: UpaGeometry<T>,
        grid: AngleGrid,
        gain_gap_db: T,
        snr_db: T,
    ) -> Self {
        let ten: T = T::from_f64_lossy(10.0);
        Self {
            ris_count,
            user_count,
            geometry,
            grid,
            tx_power: ten.powf(snr_db / ten),
            noise_power: T::one(),
            gain_gap_db,
            snr_db,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ris_count == 0 || self.user_count == 0 {
            return Err(Error::InvalidConfig(
                "need at least one RIS and one user".into(),
            ));
        }
        if self.tx_power <= T::zero() {
            return Err(Error::InvalidConfig("tx power must be positive".into()));
        }
        if self.noise_power < T::zero() {
            return Err(Error::InvalidConfig(
                "noise power must be nonnegative".into(),
            ));
        }
        if self.gain_gap_db < T::zero() {
            return Err(Error::InvalidConfig("gain gap must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Extra uniform spread in dB on top of the configured gap, keeping the
/// strength ordering strict even at a zero configured gap.
const GAP_JITTER_DB: f64 = 1.0;

/// Draw directions, cascaded gains and the strength ranking for every
/// (RIS, user) pair.
///
/// Directions are uniform on the grid. Per user, gain magnitudes are
/// log-spaced: the strongest link has unit magnitude and each weaker link
/// sits at least `gain_gap_db` below its predecessor; phases are uniform.
pub fn draw_channels<T: Scalar, R: Rng + ?Sized>(
    cfg: &ScenarioConfig<T>,
    rng: &mut R,
) -> ChannelSet<T> {
    let ris_count = cfg.ris_count;
    let user_count = cfg.user_count;
    let directions = cfg.grid.directions() as u64;
    let two_pi = T::PI() + T::PI();
    let ten = T::from_f64_lossy(10.0);
    let twenty = T::from_f64_lossy(20.0);

    let mut links = vec![
        CascadedLink {
            gain: Cx::new(T::zero(), T::zero()),
            direction: 0,
        };
        ris_count * user_count
    ];
    let mut rankings = Vec::with_capacity(user_count);

    for user in 0..user_count {
        let mut order: Vec<usize> = (0..ris_count).collect();
        order.shuffle(rng);
        let mut level_db = T::zero();
        for (rank, &ris) in order.iter().enumerate() {
            if rank > 0 {
                let jitter = T::from_f64_lossy(GAP_JITTER_DB) * T::unit_uniform(rng);
                level_db = level_db - cfg.gain_gap_db - jitter;
            }
            let magnitude = ten.powf(level_db / twenty);
            let phase = two_pi * T::unit_uniform(rng);
            let direction = rng.gen_range(0..directions) as usize;
            links[ris * user_count + user] = CascadedLink {
                gain: Complex::from_polar(magnitude, phase),
                direction,
            };
        }
        rankings.push(order);
    }

    ChannelSet {
        links,
        ris_count,
        user_count,
        rankings,
    }
}
