//! Rate-concealing trellis coded modulation.
//!
//! Codes of any rate k/n upgrade a source constellation to the highest-order
//! target constellation so every transmission looks alike on the air, while
//! the Euclidean-distance-optimized code recovers (and usually exceeds) the
//! robustness of the original modulation. Coded symbols are permuted per
//! block with a keyed affine interleaver and the rate is carried in an
//! encrypted header.
//!
//! The numeric core is generic over the floating-point scalar; the aliases
//! below fix it to `f64` or `f32`.

pub mod catalog;
pub mod code_search;
pub mod constellation;
pub mod error;
pub mod frame;
pub mod free_distance;
pub mod gtcm_code;
pub mod interleave;
pub mod link_sim;
pub mod viterbi;

pub use constellation::ModulationKind;
pub use error::{Error, Result};
pub use gtcm_code::{CodeSpec, Trellis, Validity};

pub type Modulation = constellation::Modulation<f64>;
pub type ModulationF32 = constellation::Modulation<f32>;
pub type StateDistanceTable = free_distance::StateDistanceTable<f64>;
pub type FreeDistanceResult = free_distance::FreeDistanceResult<f64>;
pub type ViterbiDecoder = viterbi::ViterbiDecoder<f64>;
pub type ViterbiDecoderF32 = viterbi::ViterbiDecoder<f32>;

