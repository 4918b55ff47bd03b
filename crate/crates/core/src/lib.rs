//! Metric embeddings of hyperbolic trees into concrete sequence spaces.

pub mod analysis;
pub mod embeddings;
pub mod error;
pub mod optimizer;
pub mod scalar;
pub mod spaces;
pub mod systems;
pub mod tree;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vector64 = spaces::Vector<f64>;
pub type Vector32 = spaces::Vector<f32>;
pub type SpaceModel64 = spaces::SpaceModel<f64>;
pub type SpaceModel32 = spaces::SpaceModel<f32>;
pub type BiorthSystem64 = systems::BiorthSystem<f64>;
pub type BiorthSystem32 = systems::BiorthSystem<f32>;
pub type LeveledSystems64 = systems::LeveledSystems<f64>;
pub type LeveledSystems32 = systems::LeveledSystems<f32>;
pub type EmbeddingMap64 = embeddings::EmbeddingMap<f64>;
pub type EmbeddingMap32 = embeddings::EmbeddingMap<f32>;
