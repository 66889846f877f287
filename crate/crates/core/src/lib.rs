//! Hashing multi-arm beam (HMB) training for multi-RIS mmWave systems.
//!
//! The crate simulates the full training pipeline: k-wise independent
//! polynomial hashes partition a direction grid into balanced multi-arm
//! beams, spliced sub-array codewords realize those beams on a uniform
//! planar array, a scanning phase superimposes the reflections of several
//! RISs per user, and a soft-decision demultiplexer with multi-round voting
//! recovers the aligned direction of every reflective link. Exhaustive and
//! hierarchical baselines plus a Monte Carlo harness support accuracy and
//! overhead benchmarks behind the `hmb` CLI.
//!
//! Core math is generic over the scalar type ([`Scalar`], `f32`/`f64`); the
//! `*64` aliases below pin the `f64` instantiation the harness uses.
//!
//! # Example
//!
//! ```
//! use hmb_core::array::{draw_channels, AngleGrid, ScenarioConfig, UpaGeometry};
//! use hmb_core::codebook::{HmbCodebook, MultiArmBeamSet, SingleBeamCodebook};
//! use hmb_core::hashing::HashFamilySpec;
//! use hmb_core::identify::{demultiplex_and_vote, StopRule};
//! use hmb_core::protocol::run_scanning;
//! use hmb_core::rng::{trial_stream, StreamPurpose};
//!
//! // One RIS with a 16x4 array scanning a 16-direction azimuth grid.
//! let scenario: ScenarioConfig<f64> = ScenarioConfig::with_snr(
//!     1,
//!     1,
//!     UpaGeometry::half_wavelength(16, 4)?,
//!     AngleGrid::new(16, 1)?,
//!     3.0,
//!     10.0,
//! );
//! let single = SingleBeamCodebook::build(&scenario.geometry, &scenario.grid)?;
//!
//! // Four rounds of four-arm beams from a 4-wise independent hash family.
//! let family = HashFamilySpec::for_keys(16, 4, 4)?;
//! let mut hash_rng = trial_stream(7, 0, StreamPurpose::Hashes);
//! let beams = MultiArmBeamSet::build(&scenario.grid, 4, 4, &family, &mut hash_rng)?;
//! let book = HmbCodebook::build(&single, beams)?;
//!
//! // Scan, then demultiplex and vote the trace back into a direction.
//! let channels = draw_channels(&scenario, &mut trial_stream(7, 0, StreamPurpose::Channels));
//! let scan = run_scanning(
//!     &scenario,
//!     &channels,
//!     std::slice::from_ref(&book),
//!     &mut trial_stream(7, 0, StreamPurpose::Noise),
//! )?;
//! let sets = [book.beam_set()];
//! let result = demultiplex_and_vote(&scan.traces[0], &sets, StopRule::RisCount(1), 4)?;
//! assert_eq!(result.gamma_hat[0], Some(channels.link(0, 0).direction));
//! # Ok::<(), hmb_core::Error>(())
//! ```

pub mod array;
pub mod baselines;
pub mod codebook;
pub mod error;
pub mod harness;
pub mod hashing;
pub mod identify;
pub mod num;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
pub use num::{Cx, Scalar};

/// f64 instantiations of the core types.
pub type Cx64 = Cx<f64>;
pub type UpaGeometry64 = array::UpaGeometry<f64>;
pub type SpatialFrequency64 = array::SpatialFrequency<f64>;
pub type SteeringVector64 = array::SteeringVector<f64>;
pub type CascadedLink64 = array::CascadedLink<f64>;
pub type ChannelSet64 = array::ChannelSet<f64>;
pub type ScenarioConfig64 = array::ScenarioConfig<f64>;
pub type SingleBeamCodebook64 = codebook::SingleBeamCodebook<f64>;
pub type HmbCodebook64 = codebook::HmbCodebook<f64>;
pub type HierarchicalCodebook64 = codebook::HierarchicalCodebook<f64>;
pub type PowerTrace64 = protocol::PowerTrace<f64>;
pub type ScanOutput64 = protocol::ScanOutput<f64>;
pub type TrainingOutcome64 = baselines::TrainingOutcome<f64>;
pub type StopRule64 = identify::StopRule<f64>;
