//! Generative agents on a hex wargame board.
//!
//! [`sim`] is the deterministic board. [`memory`] and [`reflection`] give a
//! side's strategic agent a scored memory stream. [`planning`] runs the
//! strategic/tactical negotiation through a [`backend::Backend`].
//! [`baselines`] holds the non-LLM opponents and [`harness`] runs seeded
//! batches of episodes.
//!
//! Retrieval and reflection scoring are generic over [`scalar::Scalar`];
//! the aliases below pin the common choices.

pub mod backend;
pub mod baselines;
pub mod harness;
pub mod memory;
pub mod planning;
pub mod reflection;
pub mod scalar;
pub mod sim;

pub use scalar::Scalar;

pub type Weights = memory::RetrievalWeights<f64>;
pub type Weights32 = memory::RetrievalWeights<f32>;
pub type Scored = memory::ScoredMemory<f64>;
pub type Scored32 = memory::ScoredMemory<f32>;
pub type Components = memory::Components<f64>;
pub type ReflectionSettings = reflection::ReflectionConfig<f64>;
pub type ReflectionSettings32 = reflection::ReflectionConfig<f32>;
